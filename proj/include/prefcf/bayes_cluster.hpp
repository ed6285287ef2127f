#pragma once
// Bayesian clustering: each user belongs to one class C, and given C the user's
// ratings are independent per item.
//   P(y's ratings) = sum_C P(C) prod_{i in X(y)} P(r_i | C, i)

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "prefcf/decision.hpp"
#include "prefcf/em.hpp"
#include "prefcf/prob_table.hpp"
#include "prefcf/rating_table.hpp"

namespace prefcf {

struct BcParams {
  std::size_t num_items = 0;
  int scale = 0;
  std::size_t k = 0;

  ProbTable p_c;               // 1 x K
  ProbTable p_r_given_c_item;  // (K*M) x R, row c*M + item

  static BcParams uniform(std::size_t num_items, int scale, std::size_t k);
  static BcParams random(std::size_t num_items, int scale, std::size_t k, std::mt19937_64& rng);

  std::size_t row(std::size_t c, ItemId item) const { return c * num_items + item; }
  double max_normalization_error() const;
  void check_shapes() const;
  bool operator==(const BcParams&) const = default;
};

// Probability of one user's whole rating vector, and its logarithm (computed
// in log space).
double bc_user_joint(const BcParams& params, std::span<const ItemRating> ratings);
double bc_user_log_likelihood(const BcParams& params, std::span<const ItemRating> ratings);
double bc_log_likelihood(const BcParams& params, const RatingTable& table);
// Log density of the add-one prior on the per-item rating tables, up to a
// constant. Training maximises bc_log_likelihood plus this term.
double bc_log_prior(const BcParams& params);

// P(C | ratings), or its tempered version.
std::vector<double> bc_posterior(const BcParams& params, std::span<const ItemRating> ratings,
                                 double beta = 1.0);
// One row per user of the table, dims {K}.
LatentPosterior bc_e_step(const BcParams& params, const RatingTable& table, double beta = 1.0);
// Re-estimates P(C) and the per-item tables with add-one smoothing over ratings.
BcParams bc_m_step(const LatentPosterior& posterior, const RatingTable& table,
                   std::size_t* uniform_fallbacks = nullptr);

// The returned objective is the smoothed (MAP) one: log-likelihood plus
// bc_log_prior, which is what these updates never decrease.
class BcEm final : public EmModel {
 public:
  BcEm(const RatingTable& table, BcParams& params);
  double e_step(double beta) override;
  std::size_t m_step() override;
  void perturb(std::mt19937_64& rng, double magnitude) override;

 private:
  const RatingTable& table_;
  BcParams& params_;
  LatentPosterior post_;
};

struct BcFit {
  BcParams params;
  TrainTrace trace;
};

BcFit bc_train(const RatingTable& table, std::size_t k,
               const std::optional<AnnealSchedule>& schedule,
               const ConvergenceCriterion& criterion, std::uint64_t seed,
               const EmObserver& observer = {});

// P(r | x, observed) = sum_C P(C | observed) P(r | C, x).
std::vector<double> bc_rating_distribution(const BcParams& params,
                                           std::span<const ItemRating> observed, ItemId item);
double bc_predict(const BcParams& params, std::span<const ItemRating> observed, ItemId item,
                  PredictMode mode);

}  // namespace prefcf
