#include "prefcf/personality.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefcf/error.hpp"
#include "prefcf/prob_table.hpp"

namespace prefcf {

void PdConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be positive");
}

PdPredictor::PdPredictor(const RatingTable& train, std::span<const ItemRating> observed,
                         PdConfig config)
    : train_(train), config_(config), log_weight_(train.num_users(), 0.0) {
  config_.validate();
  std::vector<Rating> dense(train.num_items(), 0);
  for (const auto& o : observed) {
    if (o.item >= train.num_items())
      throw BoundsError("item id " + std::to_string(o.item) + " out of range");
    dense[o.item] = o.rating;
  }
  const double inv = 1.0 / (2.0 * config_.sigma * config_.sigma);
  for (std::size_t y = 0; y < train.num_users(); ++y) {
    double s = 0.0;
    for (const auto& ir : train.profile(UserId(y)))
      if (const Rating t = dense[ir.item]; t != 0) {
        const double d = t - ir.rating;
        s -= d * d * inv;
      }
    log_weight_[y] = s;
  }
}

std::optional<std::vector<double>> PdPredictor::log_scores(ItemId item) const {
  if (item >= train_.num_items())
    throw BoundsError("item id " + std::to_string(item) + " out of range");
  const auto raters = train_.item_triples(item);
  if (raters.empty()) return std::nullopt;
  const double inv = 1.0 / (2.0 * config_.sigma * config_.sigma);
  std::vector<double> terms(raters.size());
  std::vector<double> out(static_cast<std::size_t>(train_.scale()));
  for (int r = 1; r <= train_.scale(); ++r) {
    for (std::size_t j = 0; j < raters.size(); ++j) {
      const auto& tr = train_.triple(raters[j]);
      const double d = tr.rating - r;
      terms[j] = log_weight_[tr.user] - d * d * inv;
    }
    out[static_cast<std::size_t>(r - 1)] = log_sum_exp(terms);
  }
  return out;
}

std::optional<Rating> PdPredictor::predict(ItemId item) const {
  const auto scores = log_scores(item);
  if (!scores) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores->size(); ++i)
    if ((*scores)[i] > (*scores)[best] + 1e-12) best = i;
  return static_cast<Rating>(best + 1);
}

std::optional<std::vector<double>> pd_log_scores(const RatingTable& train,
                                                 std::span<const ItemRating> observed,
                                                 ItemId item, const PdConfig& config) {
  return PdPredictor(train, observed, config).log_scores(item);
}

std::optional<Rating> pd_predict(const RatingTable& train, std::span<const ItemRating> observed,
                                 ItemId item, const PdConfig& config) {
  return PdPredictor(train, observed, config).predict(item);
}

}  // namespace prefcf
