#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "generators.hpp"
#include "prefcf/decision.hpp"
#include "prefcf/error.hpp"
#include "prefcf/prob_table.hpp"

using namespace prefcf;

TEST_SUITE("prob_table") {
  TEST_CASE("uniform rows") {
    const auto t = ProbTable::uniform(3, 4);
    CHECK(t.rows() == 3);
    CHECK(t(2, 3) == 0.25);
    CHECK(t.max_row_error() < 1e-15);
  }

  TEST_CASE("normalize_rows rescales and reports empty rows") {
    ProbTable t(2, 2);
    t(0, 0) = 1.0;
    t(0, 1) = 3.0;
    CHECK(t.normalize_rows() == 1);
    CHECK(t(0, 0) == 0.25);
    CHECK(t(1, 0) == 0.5);
  }

  TEST_CASE("dirichlet draws are normalised and seed-reproducible") {
    testgen::Rng a(3), b(3);
    ProbTable x(5, 7), y(5, 7);
    x.randomize(a);
    y.randomize(b);
    CHECK(x == y);
    CHECK(x.max_row_error() < 1e-12);
    for (double v : x.values()) CHECK(v >= 0.0);
  }

  TEST_CASE("powered with beta 1 is an exact copy") {
    testgen::Rng rng(1);
    ProbTable t(4, 3);
    t.randomize(rng);
    CHECK(t.powered(1.0) == t);
    const auto h = t.powered(0.5);
    CHECK(h(1, 2) == doctest::Approx(std::sqrt(t(1, 2))));
  }

  TEST_CASE("transpose") {
    ProbTable t(2, 3);
    for (std::size_t i = 0; i < 6; ++i) t.values()[i] = double(i);
    const auto tt = t.transposed();
    CHECK(tt.rows() == 3);
    CHECK(tt(2, 1) == t(1, 2));
    CHECK(tt.transposed() == t);
  }

  TEST_CASE("log_sum_exp") {
    const std::vector<double> x{-1000.0, -1000.0};
    CHECK(log_sum_exp(x) == doctest::Approx(-1000.0 + std::log(2.0)));
    CHECK(std::isinf(log_sum_exp(std::vector<double>{})));
    const double ninf = -std::numeric_limits<double>::infinity();
    CHECK(std::isinf(log_sum_exp(std::vector<double>{ninf, ninf})));
  }

  TEST_CASE("normalize falls back to uniform without mass") {
    std::vector<double> z{0.0, 0.0, 0.0, 0.0};
    CHECK_FALSE(normalize(z));
    CHECK(z[3] == 0.25);
    std::vector<double> p{2.0, 6.0};
    CHECK(normalize(p));
    CHECK(p[1] == 0.75);
  }
}

TEST_SUITE("prob_table") {
  TEST_CASE("decision rule") {
    const std::vector<double> point{0.0, 1.0, 0.0, 0.0, 0.0};
    CHECK(decide(point, PredictMode::argmax) == 2.0);
    CHECK(decide(point, PredictMode::expected) == 2.0);
    const std::vector<double> flat(5, 0.2);
    CHECK(decide(flat, PredictMode::expected) == doctest::Approx(3.0));
    CHECK(decide(flat, PredictMode::argmax) == 1.0);
    CHECK(parse_predict_mode("argmax") == PredictMode::argmax);
    CHECK(predict_mode_name(PredictMode::expected) == "expected");
    CHECK_THROWS_AS(parse_predict_mode("median"), ValidationError);
  }
}
