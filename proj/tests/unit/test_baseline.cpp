#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"
#include "prefcf/baseline.hpp"
#include "prefcf/error.hpp"

using namespace prefcf;

TEST_SUITE("baseline") {
  TEST_CASE("single-class collapse") {
    testgen::Rng rng(1);
    const auto p = BaselineParams::random(2, 3, 3, 1, 1, rng);
    for (ItemId x = 0; x < 3; ++x)
      for (int r = 1; r <= 3; ++r)
        CHECK(baseline_joint_prob(p, 1, x, r) ==
              doctest::Approx(p.p_x_given_zx(0, x) * p.p_r_given_zp_zx(0, r - 1)));
  }

  TEST_CASE("joint matches enumeration and is normalised") {
    testgen::Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      const auto n = testgen::uniform_size(rng, 1, 3), m = testgen::uniform_size(rng, 1, 4);
      const int r = int(testgen::uniform_size(rng, 1, 3));
      const auto p = BaselineParams::random(n, m, r, testgen::uniform_size(rng, 1, 3),
                                            testgen::uniform_size(rng, 1, 3), rng);
      for (UserId y = 0; y < n; ++y) {
        double total = 0.0;
        for (ItemId x = 0; x < m; ++x)
          for (int k = 1; k <= r; ++k) {
            const double v = baseline_joint_prob(p, y, x, k);
            CHECK(std::abs(v - oracle::baseline_joint(p, y, x, k)) <= 1e-12);
            total += v;
          }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("e-step matches enumeration, tempered and not") {
    testgen::Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      const auto t = testgen::random_table(rng, 4, 4, 3, 1, 4);
      const auto p = BaselineParams::random(4, 4, 3, testgen::uniform_size(rng, 1, 3),
                                            testgen::uniform_size(rng, 1, 3), rng);
      const double beta = trial % 2 ? 1.0 : 0.6;
      const auto post = baseline_e_step(p, t, beta);
      for (std::size_t l = 0; l < t.size(); ++l) {
        const auto& tr = t.triple(l);
        const auto row = post.row(l);
        CHECK(testgen::max_abs_diff({row.begin(), row.end()},
                                    oracle::baseline_posterior(p, tr.user, tr.item, tr.rating,
                                                               beta)) <= 1e-12);
        CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-12);
      }
      const auto a = baseline_e_step(p, t), b = baseline_e_step(p, t, 1.0);
      for (std::size_t l = 0; l < t.size(); ++l)
        CHECK(std::equal(a.row(l).begin(), a.row(l).end(), b.row(l).begin()));
    }
  }

  TEST_CASE("EmModel step equals the free functions") {
    testgen::Rng rng(13);
    const auto t = testgen::random_table(rng, 6, 5, 4, 2, 5);
    auto p = BaselineParams::random(6, 5, 4, 2, 3, rng);
    const auto want = baseline_m_step(baseline_e_step(p, t, 0.8), t);
    BaselineEm em(t, p);
    em.e_step(0.8);
    em.m_step();
    CHECK(testgen::max_abs_diff(p.p_zx, want.p_zx) <= 1e-14);
    CHECK(testgen::max_abs_diff(p.p_x_given_zx, want.p_x_given_zx) <= 1e-14);
    CHECK(testgen::max_abs_diff(p.p_zp_given_y, want.p_zp_given_y) <= 1e-14);
    CHECK(testgen::max_abs_diff(p.p_r_given_zp_zx, want.p_r_given_zp_zx) <= 1e-14);
  }

  TEST_CASE("training is monotone and normalised") {
    testgen::Rng rng(14);
    for (int trial = 0; trial < 4; ++trial) {
      const auto t = testgen::random_table(rng, 8, 6, 4, 2, 6);
      const auto fit = baseline_train(t, 2, 2, std::nullopt, {60, 1e-300}, trial);
      CHECK(loglik_monotone(fit.trace, 1e-9));
      CHECK(fit.params.max_normalization_error() < 1e-9);
      CHECK(fit.trace.final_loglik() ==
            doctest::Approx(baseline_log_likelihood(fit.params, t)).epsilon(1e-9));
    }
  }

  TEST_CASE("fold-in and prediction") {
    testgen::Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
      const auto p = BaselineParams::random(3, 5, 4, 2, 3, rng);
      const auto obs = testgen::random_observed(rng, 5, 4, 3);
      const auto q = baseline_fold_in(p, obs, 1.0, {100, 1e-9});
      CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(1.0));
      for (double v : q) CHECK(v > 0.0);
      for (ItemId x = 0; x < 5; ++x) {
        std::vector<double> want;
        for (int r = 1; r <= 4; ++r) {
          double s = 0.0;
          for (std::size_t zp = 0; zp < 3; ++zp)
            for (std::size_t zx = 0; zx < 2; ++zx)
              s += oracle::baseline_term(p, q, x, r, zp, zx);
          want.push_back(s);
        }
        const double z = std::accumulate(want.begin(), want.end(), 0.0);
        for (auto& v : want) v /= z;
        CHECK(testgen::max_abs_diff(baseline_rating_distribution(p, q, x), want) <= 1e-12);
        const double e = baseline_predict(p, q, x, PredictMode::expected);
        CHECK(e >= 1.0);
        CHECK(e <= 4.0);
      }
    }
    const auto p = BaselineParams::random(3, 5, 4, 2, 3, rng);
    CHECK_THROWS_AS(baseline_fold_in(p, std::vector<ItemRating>{}, 1.0, {}), FoldInError);
  }

  TEST_CASE("an unseen item uses the item-class prior") {
    auto p = BaselineParams::uniform(1, 2, 2, 2, 1);
    p.p_x_given_zx(0, 0) = 1.0, p.p_x_given_zx(0, 1) = 0.0;
    p.p_x_given_zx(1, 0) = 1.0, p.p_x_given_zx(1, 1) = 0.0;
    p.p_zx(0, 0) = 0.25, p.p_zx(0, 1) = 0.75;
    p.p_r_given_zp_zx(0, 0) = 1.0, p.p_r_given_zp_zx(0, 1) = 0.0;
    p.p_r_given_zp_zx(1, 0) = 0.0, p.p_r_given_zp_zx(1, 1) = 1.0;
    const std::vector<double> q{1.0};
    const auto d = baseline_rating_distribution(p, q, 1);
    CHECK(d[0] == doctest::Approx(0.25));
    CHECK(d[1] == doctest::Approx(0.75));
  }
}
