#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefcf/rating_table.hpp"
#include "prefcf/recommender.hpp"

namespace prefcf {

struct PredictionRecord {
  UserId user;
  ItemId item;
  double predicted;  // after the abstention fallback
  Rating actual;
  bool abstained = false;
};

// Mean absolute error over all records. UndefinedMetricError when empty.
double mae(std::span<const PredictionRecord> records);

// Used when a model abstains: the mean of the user's given ratings, clamped to
// the scale.
double abstention_fallback(std::span<const ItemRating> observed, int scale);

struct EvalRow {
  std::string model;
  std::size_t train_users = 0;
  std::size_t given = 0;
  std::optional<double> mae;  // empty when the cell failed or had no targets
  std::size_t n_pred = 0;
  std::size_t n_abstain = 0;
  double seconds = 0.0;
  std::string error;  // non-empty when the cell failed
};

struct EvalReport {
  std::string dataset;
  std::vector<EvalRow> rows;
};

struct ProtocolConfig {
  std::vector<ModelKind> models;
  std::vector<std::size_t> train_sizes;
  std::vector<std::size_t> given_counts{5, 10, 20};
  GivenSelection selection = GivenSelection::first_in_file;
  ModelConfig model{};
  std::uint64_t seed = 0;
  std::string dataset_name;
};

// Rows are ordered by train size, then model, then given count. Each model is
// trained once per train size.
EvalReport run_protocol(const RatingTable& table, const ProtocolConfig& config);

// Predictions for every held-out rating of every test user.
std::vector<PredictionRecord> predict_heldout(const Recommender& rec, const SplitResult& split);

// Published MAE for a (dataset, model, train size, given) cell, if there is one.
// Dataset names are matched case-insensitively against "movierating" and
// "eachmovie".
struct ReferenceValue {
  double mae;
  int decimals;
};
std::optional<ReferenceValue> reference_mae(std::string_view dataset, std::string_view model,
                                            std::size_t train_users, std::size_t given);
bool has_reference_column(std::string_view dataset);

struct RenderOptions {
  // Wall-clock seconds vary between runs; by default the column prints NA so
  // reports are byte-for-byte reproducible.
  bool timing = false;
};

void render_report(const EvalReport& report, std::ostream& out, RenderOptions options = {});

}  // namespace prefcf
