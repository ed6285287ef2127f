#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace prefcf {

// Row-major table of conditional distributions: each row is one distribution
// over `cols` outcomes. A single unconditional distribution is a 1-row table.
class ProbTable {
 public:
  ProbTable() = default;
  ProbTable(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static ProbTable uniform(std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  void fill(double v);
  ProbTable transposed() const;
  // Elementwise x^beta (beta == 1 copies exactly).
  ProbTable powered(double beta) const;

  // Rescales every row to sum to one. Rows with no mass become uniform; the
  // number of such rows is returned.
  std::size_t normalize_rows();
  // Fills each row with a draw from a symmetric Dirichlet(concentration).
  void randomize(std::mt19937_64& rng, double concentration = 1.0);

  // Largest |row sum - 1| over all rows.
  double max_row_error() const;

  bool operator==(const ProbTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Symmetric Dirichlet draw into `out`.
void dirichlet(std::mt19937_64& rng, double concentration, std::span<double> out);

// log(sum(exp(x))) with the usual max shift; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> x);

// In-place normalisation of a single distribution; returns false (and writes a
// uniform distribution) when the input has no positive mass.
bool normalize(std::span<double> x);

}  // namespace prefcf
