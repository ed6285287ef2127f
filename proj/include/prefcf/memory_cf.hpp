#pragma once
// Neighbourhood predictors: Pearson correlation and vector (cosine) similarity
// weights combined by a mean-offset weighted sum.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "prefcf/rating_table.hpp"

namespace prefcf {

enum class Similarity { pearson, cosine };

// Correlation over co-rated items, each side centred on its own mean over those
// items. 0 with fewer than two co-rated items or zero variance on either side.
double pearson_weight(std::span<const ItemRating> a, std::span<const ItemRating> b);
// Co-rated dot product over the product of the full-profile norms; 0 when
// nothing is co-rated.
double cosine_weight(std::span<const ItemRating> a, std::span<const ItemRating> b);

// Weights of every training user against one test user.
class MemoryPredictor {
 public:
  MemoryPredictor(const RatingTable& train, std::span<const ItemRating> observed,
                  Similarity method);

  double weight(UserId y) const { return weights_.at(y); }
  // mean(observed) + sum w (R_y(item) - mean_y) / sum |w| over training users
  // with w != 0 who rated the item, clamped to [1, R]. Empty when there are none.
  std::optional<double> predict(ItemId item) const;

 private:
  const RatingTable& train_;
  std::vector<double> weights_;
  std::vector<double> means_;
  double observed_mean_;
};

std::optional<double> memory_predict(const RatingTable& train,
                                     std::span<const ItemRating> observed, ItemId item,
                                     Similarity method);

}  // namespace prefcf
