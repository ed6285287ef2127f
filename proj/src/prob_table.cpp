#include "prefcf/prob_table.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prefcf/simd.hpp"

namespace prefcf {

ProbTable ProbTable::uniform(std::size_t rows, std::size_t cols) {
  return ProbTable(rows, cols, cols == 0 ? 0.0 : 1.0 / static_cast<double>(cols));
}

void ProbTable::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

ProbTable ProbTable::transposed() const {
  ProbTable t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

ProbTable ProbTable::powered(double beta) const {
  ProbTable t = *this;
  if (beta != 1.0)
    for (double& v : t.data_) v = std::pow(v, beta);
  return t;
}

std::size_t ProbTable::normalize_rows() {
  std::size_t fallbacks = 0;
  for (std::size_t r = 0; r < rows_; ++r)
    if (!normalize(row(r))) ++fallbacks;
  return fallbacks;
}

void ProbTable::randomize(std::mt19937_64& rng, double concentration) {
  for (std::size_t r = 0; r < rows_; ++r) dirichlet(rng, concentration, row(r));
}

double ProbTable::max_row_error() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (double v : row(r)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

void dirichlet(std::mt19937_64& rng, double concentration, std::span<double> out) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  double total = 0.0;
  for (double& v : out) {
    v = gamma(rng);
    total += v;
  }
  if (!(total > 0.0)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return;
  }
  for (double& v : out) v /= total;
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

bool normalize(std::span<double> x) {
  if (x.empty()) return true;
  const double total = simd::sum(x);
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(x.begin(), x.end(), 1.0 / static_cast<double>(x.size()));
    return false;
  }
  const double inv = 1.0 / total;
  for (double& v : x) v *= inv;
  return true;
}

}  // namespace prefcf
