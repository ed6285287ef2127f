#pragma once
// One front end over every model kind: train (where needed), then answer
// rating queries for a test user described by a few given ratings.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "prefcf/aspect.hpp"
#include "prefcf/baseline.hpp"
#include "prefcf/bayes_cluster.hpp"
#include "prefcf/decision.hpp"
#include "prefcf/dm.hpp"
#include "prefcf/em.hpp"
#include "prefcf/mp.hpp"
#include "prefcf/rating_table.hpp"

namespace prefcf {

enum class ModelKind { dm, baseline, mp, am, bc, pd, pcc, vs };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
// Comma-separated list, e.g. "dm,baseline,mp".
std::vector<ModelKind> parse_model_list(std::string_view list);
// False for the memory-based kinds (pd, pcc, vs), which keep the training table.
bool is_trainable(ModelKind kind);

struct ModelConfig {
  DmSizes dm{};  // the baseline uses dm.k_x and dm.k_p
  std::size_t am_k = 10;
  std::size_t bc_k = 10;
  std::size_t mp_k_y = 3;
  std::size_t mp_k_x = 5;
  std::size_t mp_max_pairs = 0;  // per user; 0 keeps every pair
  double sigma = 1.0;
  double alpha = 1.0;
  std::optional<AnnealSchedule> schedule = AnnealSchedule{};
  ConvergenceCriterion criterion{};
  ConvergenceCriterion fold_in{100, 1e-6};
  PredictMode mode = PredictMode::expected;

  void validate() const;
};

using TrainedParams = std::variant<DmParams, BaselineParams, MpParams, AmParams, BcParams>;

struct TrainedModel {
  ModelKind kind = ModelKind::dm;
  TrainedParams params;
  TrainTrace trace;
  std::vector<std::string> item_labels;
};

TrainedModel train_model(ModelKind kind, const RatingTable& train, const ModelConfig& config,
                         std::uint64_t seed, const EmObserver& observer = {});

// Prediction for one item; empty means the model abstains.
using ItemScorer = std::function<std::optional<double>(ItemId)>;

class Recommender {
 public:
  // Trains `kind` on `train`; memory-based kinds keep a reference to `train`,
  // which must outlive the recommender.
  Recommender(ModelKind kind, const RatingTable& train, const ModelConfig& config,
              std::uint64_t seed, const EmObserver& observer = {});
  Recommender(TrainedModel model, const ModelConfig& config);

  ModelKind kind() const noexcept { return kind_; }
  const TrainedModel* model() const noexcept { return model_ ? &*model_ : nullptr; }
  std::size_t num_items() const noexcept { return num_items_; }
  int scale() const noexcept { return scale_; }

  // Folds in the test user (when the model needs it) and returns a scorer for
  // that user. The scorer borrows this recommender.
  ItemScorer for_user(std::span<const ItemRating> observed) const;

 private:
  void prepare();

  ModelKind kind_;
  ModelConfig config_;
  std::optional<TrainedModel> model_;
  const RatingTable* train_ = nullptr;
  std::shared_ptr<const DmPredictor> dm_;
  std::size_t num_items_ = 0;
  int scale_ = 0;
};

}  // namespace prefcf
