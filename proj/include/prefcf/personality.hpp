#pragma once
// Personality diagnosis: each training user is a noisy copy of the test user's
// "true" ratings under Gaussian noise with standard deviation sigma.

#include <optional>
#include <span>
#include <vector>

#include "prefcf/rating_table.hpp"

namespace prefcf {

struct PdConfig {
  double sigma = 1.0;
  void validate() const;
};

// Precomputes one log weight per training user for a fixed test user:
//   log w(y) = -sum over co-rated x of (R_t(x) - R_y(x))^2 / (2 sigma^2)
// Items the training user did not rate contribute nothing.
class PdPredictor {
 public:
  PdPredictor(const RatingTable& train, std::span<const ItemRating> observed, PdConfig config);

  double log_weight(UserId y) const { return log_weight_.at(y); }
  // log score(r) for r = 1..R, where
  //   score(r) = sum over training users y who rated the item of
  //              w(y) exp(-(R_y(item) - r)^2 / (2 sigma^2)).
  // Empty when no training user rated the item (abstain).
  std::optional<std::vector<double>> log_scores(ItemId item) const;
  // Most likely rating; scores within 1e-12 (log scale) count as tied and ties go
  // to the lower rating.
  std::optional<Rating> predict(ItemId item) const;

 private:
  const RatingTable& train_;
  PdConfig config_;
  std::vector<double> log_weight_;
};

std::optional<std::vector<double>> pd_log_scores(const RatingTable& train,
                                                 std::span<const ItemRating> observed,
                                                 ItemId item, const PdConfig& config);
std::optional<Rating> pd_predict(const RatingTable& train, std::span<const ItemRating> observed,
                                 ItemId item, const PdConfig& config);

}  // namespace prefcf
