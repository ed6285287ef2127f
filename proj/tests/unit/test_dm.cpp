#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"
#include "prefcf/dm.hpp"
#include "prefcf/error.hpp"

using namespace prefcf;

namespace {

struct Instance {
  DmParams params;
  RatingTable table;
};

DmSizes random_sizes(testgen::Rng& rng) {
  return {testgen::uniform_size(rng, 1, 3), testgen::uniform_size(rng, 1, 3),
          testgen::uniform_size(rng, 1, 3), testgen::uniform_size(rng, 1, 3)};
}

Instance random_instance(testgen::Rng& rng) {
  const std::size_t n = testgen::uniform_size(rng, 1, 4), m = testgen::uniform_size(rng, 1, 4);
  const int r = static_cast<int>(testgen::uniform_size(rng, 1, 3));
  auto params = DmParams::random(n, m, r, random_sizes(rng), rng);
  auto table = testgen::random_table(rng, n, m, r, 1, m);
  return {std::move(params), std::move(table)};
}

std::vector<double> oracle_rating_dist(const DmParams& p, const DmUserProfile& prof, ItemId x) {
  std::vector<double> d;
  for (int r = 1; r <= p.scale; ++r) d.push_back(oracle::dm_joint(p, prof.pref, prof.rating, x, r));
  const double s = std::accumulate(d.begin(), d.end(), 0.0);
  for (auto& v : d) v /= s;
  return d;
}

}  // namespace

TEST_SUITE("dm") {
  TEST_CASE("single-class collapse") {
    const auto p = DmParams::uniform(1, 2, 2, {1, 1, 1, 1});
    CHECK(dm_joint_prob(p, 0, 0, 1) == doctest::Approx(0.25));
    CHECK(dm_joint_prob(p, 0, 1, 2) == doctest::Approx(0.25));
  }

  TEST_CASE("default sizes") {
    const auto s = DmSizes{}.resolved(5);
    CHECK(s.k_x == 5);
    CHECK(s.k_p == 3);
    CHECK(s.k_r == 10);
    CHECK(s.k_pref == 5);
    CHECK_THROWS_AS((DmSizes{0, 1, 1, 1}.resolved(5)), ValidationError);
  }

  TEST_CASE("joint matches enumeration and sums to one over (x, r)") {
    testgen::Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
      const auto inst = random_instance(rng);
      const auto& p = inst.params;
      for (UserId y = 0; y < p.num_users; ++y) {
        double total = 0.0;
        for (ItemId x = 0; x < p.num_items; ++x)
          for (int r = 1; r <= p.scale; ++r) {
            const double v = dm_joint_prob(p, y, x, r);
            CHECK(std::abs(v - oracle::dm_joint(p, y, x, r)) <= 1e-12);
            CHECK(dm_joint_prob(p, x, r, p.p_zp_given_y.row(y), p.p_zr_given_y.row(y)) == v);
            total += v;
          }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("bounds are checked") {
    const auto p = DmParams::uniform(2, 3, 4, {2, 2, 2, 2});
    CHECK_THROWS_AS(dm_joint_prob(p, 0, 3, 1), BoundsError);
    CHECK_THROWS_AS(dm_joint_prob(p, 0, 0, 5), BoundsError);
    CHECK_THROWS_AS(dm_joint_prob(p, 2, 0, 1), BoundsError);
  }

  TEST_CASE("e-step matches tempered enumeration") {
    testgen::Rng rng(202);
    for (int trial = 0; trial < 100; ++trial) {
      const auto inst = random_instance(rng);
      const double beta = trial % 2 ? 1.0 : testgen::uniform_real(rng, 0.2, 1.0);
      const auto post = dm_e_step(inst.params, inst.table, beta);
      REQUIRE(post.observations() == inst.table.size());
      for (std::size_t l = 0; l < inst.table.size(); ++l) {
        const auto& t = inst.table.triple(l);
        const auto want = oracle::dm_posterior(inst.params, t.user, t.item, t.rating, beta);
        const auto row = post.row(l);
        CHECK(testgen::max_abs_diff({row.begin(), row.end()}, want) <= 1e-12);
        CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-12);
      }
    }
  }

  TEST_CASE("uniform tables give uniform responsibilities") {
    testgen::Rng rng(3);
    const auto t = testgen::random_table(rng, 4, 5, 3, 1, 5);
    const auto p = DmParams::uniform(4, 5, 3, {2, 3, 2, 2});
    const auto post = dm_e_step(p, t);
    for (std::size_t l = 0; l < post.observations(); ++l)
      for (double v : post.row(l)) CHECK(v == doctest::Approx(1.0 / 24));
  }

  TEST_CASE("tempered e-step at beta 1 equals the untempered one exactly") {
    testgen::Rng rng(303);
    for (int trial = 0; trial < 50; ++trial) {
      const auto inst = random_instance(rng);
      const auto a = dm_e_step(inst.params, inst.table);
      const auto b = dm_e_step(inst.params, inst.table, 1.0);
      for (std::size_t l = 0; l < a.observations(); ++l) {
        const auto ra = a.row(l), rb = b.row(l);
        CHECK(std::equal(ra.begin(), ra.end(), rb.begin()));
      }
    }
  }

  TEST_CASE("m-step with uniform responsibilities yields the rating histogram") {
    testgen::Rng rng(4);
    const auto t = testgen::random_table(rng, 6, 5, 4, 2, 5);
    const auto post = dm_e_step(DmParams::uniform(6, 5, 4, {2, 2, 3, 2}), t);
    const auto p = dm_m_step(post, t);
    std::vector<double> hist(4, 0.0);
    for (const auto& tr : t.triples()) hist[tr.rating - 1] += 1.0 / t.size();
    for (std::size_t row = 0; row < p.p_r_given_zr_zpref.rows(); ++row)
      for (int r = 0; r < 4; ++r) CHECK(p.p_r_given_zr_zpref(row, r) == doctest::Approx(hist[r]));
    CHECK(p.max_normalization_error() < 1e-9);
  }

  TEST_CASE("m-step on a delta responsibility") {
    const auto t = RatingTable::build(1, 3, 2, {{0, 2, 2}});
    LatentPosterior post(1, {2, 2, 2, 2});
    // zp=1, zr=0, zx=1, zpref=0
    post.row(0)[((1 * 2 + 0) * 2 + 1) * 2 + 0] = 1.0;
    std::size_t fallbacks = 0;
    const auto p = dm_m_step(post, t, &fallbacks);
    CHECK(p.p_x_given_zx(1, 2) == 1.0);
    CHECK(p.p_zx(0, 1) == 1.0);
    CHECK(p.p_zp_given_y(0, 1) == 1.0);
    CHECK(p.p_r_given_zr_zpref(p.rating_row(0, 0), 1) == 1.0);
    CHECK(fallbacks > 0);  // classes with no mass fall back to uniform
    CHECK(p.p_x_given_zx(0, 0) == doctest::Approx(1.0 / 3));
  }

  TEST_CASE("fused EM step equals the materialised one") {
    testgen::Rng rng(404);
    for (int trial = 0; trial < 30; ++trial) {
      const auto t = testgen::random_table(rng, 6, 5, 3, 1, 5);
      auto params = DmParams::random(6, 5, 3, random_sizes(rng), rng);
      const auto expected = dm_m_step(dm_e_step(params, t, 0.7), t);
      DmEm em(t, params);
      em.e_step(0.7);
      em.m_step();
      CHECK(testgen::max_abs_diff(params.p_zx, expected.p_zx) <= 1e-12);
      CHECK(testgen::max_abs_diff(params.p_x_given_zx, expected.p_x_given_zx) <= 1e-12);
      CHECK(testgen::max_abs_diff(params.p_zp_given_y, expected.p_zp_given_y) <= 1e-12);
      CHECK(testgen::max_abs_diff(params.p_zr_given_y, expected.p_zr_given_y) <= 1e-12);
      CHECK(testgen::max_abs_diff(params.p_zpref_given_zp_zx, expected.p_zpref_given_zp_zx) <=
            1e-12);
      CHECK(testgen::max_abs_diff(params.p_r_given_zr_zpref, expected.p_r_given_zr_zpref) <=
            1e-12);
      const double ll = em.e_step(0.5);
      CHECK(ll == doctest::Approx(oracle::dm_log_likelihood(params, t)).epsilon(1e-12));
    }
  }

  TEST_CASE("EM at beta 1 never decreases the log-likelihood") {
    testgen::Rng rng(505);
    for (int trial = 0; trial < 5; ++trial) {
      const auto t = testgen::random_table(rng, 5, 5, 3, 2, 5);
      const auto fit = dm_train(t, {2, 2, 2, 2}, std::nullopt, {60, 1e-300}, trial);
      CHECK(loglik_monotone(fit.trace, 1e-9));
      CHECK(fit.params.max_normalization_error() < 1e-9);
    }
  }

  TEST_CASE("item-class relabelling leaves the joint unchanged") {
    testgen::Rng rng(606);
    for (int trial = 0; trial < 50; ++trial) {
      auto p = DmParams::random(2, 4, 3, {3, 2, 2, 2}, rng);
      auto q = p;
      const std::size_t perm[3] = {2, 0, 1};
      for (std::size_t zx = 0; zx < 3; ++zx) {
        q.p_zx(0, perm[zx]) = p.p_zx(0, zx);
        for (ItemId x = 0; x < 4; ++x) q.p_x_given_zx(perm[zx], x) = p.p_x_given_zx(zx, x);
        for (std::size_t zp = 0; zp < 2; ++zp)
          for (std::size_t k = 0; k < 2; ++k)
            q.p_zpref_given_zp_zx(q.pref_row(zp, perm[zx]), k) =
                p.p_zpref_given_zp_zx(p.pref_row(zp, zx), k);
      }
      for (UserId y = 0; y < 2; ++y)
        for (ItemId x = 0; x < 4; ++x)
          for (int r = 1; r <= 3; ++r)
            CHECK(dm_joint_prob(q, y, x, r) == doctest::Approx(dm_joint_prob(p, y, x, r)).epsilon(1e-14));
    }
  }

  TEST_CASE("fold-in profiles") {
    testgen::Rng rng(707);
    const auto p = DmParams::random(5, 6, 4, {2, 2, 3, 2}, rng);
    const std::vector<ItemRating> one{{2, 3}};
    const auto prof = dm_fold_in(p, one, 1.0, {100, 1e-9});
    CHECK(std::accumulate(prof.pref.begin(), prof.pref.end(), 0.0) == doctest::Approx(1.0));
    CHECK(std::accumulate(prof.rating.begin(), prof.rating.end(), 0.0) == doctest::Approx(1.0));
    for (double v : prof.pref) CHECK(v > 0.0);
    for (double v : prof.rating) CHECK(v > 0.0);

    const auto obs = testgen::random_observed(rng, 6, 4, 5);
    const auto flat = dm_fold_in(p, obs, 1e9, {100, 1e-9});
    for (double v : flat.pref) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
    for (double v : flat.rating) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-6));

    CHECK_THROWS_AS(dm_fold_in(p, std::vector<ItemRating>{}, 1.0, {}), FoldInError);
  }

  TEST_CASE("predictions match the enumeration oracle") {
    testgen::Rng rng(808);
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = DmParams::random(3, 4, 3, random_sizes(rng), rng);
      const auto obs = testgen::random_observed(rng, 4, 3, 2);
      const auto prof = dm_fold_in(p, obs, 1.0, {50, 1e-9});
      DmPredictor pred(p);
      for (ItemId x = 0; x < 4; ++x) {
        const auto want = oracle_rating_dist(p, prof, x);
        const auto got = pred.rating_distribution(prof, x);
        CHECK(testgen::max_abs_diff(got, want) <= 1e-10);
        double e = 0.0;
        for (int r = 1; r <= 3; ++r) e += r * want[r - 1];
        const double exp_pred = dm_predict(p, prof, x, PredictMode::expected);
        CHECK(std::abs(exp_pred - e) <= 1e-10);
        CHECK(exp_pred >= 1.0);
        CHECK(exp_pred <= 3.0);
        const double am = dm_predict(p, prof, x, PredictMode::argmax);
        CHECK(want[static_cast<int>(am) - 1] == *std::max_element(want.begin(), want.end()));
      }
    }
  }

  TEST_CASE("an item no class emits falls back to the class prior") {
    auto p = DmParams::uniform(1, 3, 3, {2, 1, 1, 2});
    p.p_x_given_zx(0, 0) = 0.5, p.p_x_given_zx(0, 1) = 0.5, p.p_x_given_zx(0, 2) = 0.0;
    p.p_x_given_zx(1, 0) = 0.5, p.p_x_given_zx(1, 1) = 0.5, p.p_x_given_zx(1, 2) = 0.0;
    p.p_zpref_given_zp_zx(0, 0) = 1.0, p.p_zpref_given_zp_zx(0, 1) = 0.0;
    p.p_r_given_zr_zpref(0, 0) = 1.0, p.p_r_given_zr_zpref(0, 1) = 0.0,
                                  p.p_r_given_zr_zpref(0, 2) = 0.0;
    DmUserProfile prof{{1.0}, {1.0}};
    const auto d = DmPredictor(p).rating_distribution(prof, 2);
    // z_x prior 0.5/0.5; zx 0 always reaches level 0 (rating 1), zx 1 splits
    // between level 0 and the uniform level 1.
    CHECK(d[0] == doctest::Approx(0.5 + 0.5 * (0.5 + 0.5 / 3)));
    CHECK(d[1] == doctest::Approx(0.5 * 0.5 / 3));
  }

  TEST_CASE("synthesis is deterministic and respects the rating kernel") {
    testgen::Rng rng(909);
    auto p = DmParams::random(3, 60, 4, {1, 1, 1, 1}, rng);
    const auto a = dm_synthesize(p, 2000, 50, 5);
    const auto b = dm_synthesize(p, 2000, 50, 5);
    CHECK(a.table == b.table);
    CHECK(a.table.size() == 100000);
    std::vector<double> hist(4, 0.0);
    for (const auto& t : a.table.triples()) hist[t.rating - 1] += 1.0 / a.table.size();
    for (int r = 0; r < 4; ++r) CHECK(std::abs(hist[r] - p.p_r_given_zr_zpref(0, r)) < 0.01);
    for (UserId u = 0; u < 2000; ++u) CHECK(a.table.user_count(u) == 50);
  }

  TEST_CASE("delta generator cannot fill more than one rating per user") {
    auto p = DmParams::uniform(1, 3, 3, {1, 1, 1, 1});
    p.p_x_given_zx(0, 0) = 1.0, p.p_x_given_zx(0, 1) = 0.0, p.p_x_given_zx(0, 2) = 0.0;
    p.p_r_given_zr_zpref(0, 0) = 0.0, p.p_r_given_zr_zpref(0, 1) = 1.0,
                                  p.p_r_given_zr_zpref(0, 2) = 0.0;
    const auto s = dm_synthesize(p, 4, 1, 1);
    for (const auto& t : s.table.triples()) {
      CHECK(t.item == 0);
      CHECK(t.rating == 2);
    }
    CHECK_THROWS_AS(dm_synthesize(p, 4, 2, 1), InfeasibleError);
    CHECK_THROWS_AS(dm_synthesize(p, 4, 4, 1), InfeasibleError);
  }

  TEST_CASE("fold-in recovers the generating classes of a separated design") {
    SeparatedDesign d;
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto p = make_separated_params(d, seed);
      const auto s = dm_synthesize(p, 40, 20, seed + 100);
      int good = 0;
      for (UserId u = 0; u < 40; ++u) {
        const auto obs = s.table.ratings_in_order(u);
        const auto prof = dm_fold_in(p, obs, 1.0, {100, 1e-9});
        const auto zp = std::max_element(prof.pref.begin(), prof.pref.end()) - prof.pref.begin();
        const auto zr =
            std::max_element(prof.rating.begin(), prof.rating.end()) - prof.rating.begin();
        if (std::size_t(zp) == s.pref_class[u] && std::size_t(zr) == s.rating_class[u]) ++good;
      }
      if (good >= 30) ++hits;
    }
    CHECK(hits >= 4);
  }

  TEST_CASE("shape checks") {
    auto p = DmParams::uniform(2, 3, 4, {2, 2, 2, 2});
    CHECK_NOTHROW(p.check_shapes());
    p.p_zx = ProbTable::uniform(1, 3);
    CHECK_THROWS_AS(p.check_shapes(), ValidationError);
  }
}
