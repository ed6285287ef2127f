#pragma once
// Aspect model: user, item and rating are independent given one latent class z.
//   P(x, y, r) = sum_z P(z) P(x|z) P(y|z) P(r|z)

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

struct AmParams {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  int scale = 0;
  std::size_t k = 0;

  ProbTable p_z;          // 1 x K
  ProbTable p_x_given_z;  // K x M
  ProbTable p_y_given_z;  // K x N
  ProbTable p_r_given_z;  // K x R

  static AmParams uniform(std::size_t num_users, std::size_t num_items, int scale, std::size_t k);
  static AmParams random(std::size_t num_users, std::size_t num_items, int scale, std::size_t k,
                         std::mt19937_64& rng);
  double max_normalization_error() const;
  void check_shapes() const;
  bool operator==(const AmParams&) const = default;
};

double am_joint_prob(const AmParams& params, UserId user, ItemId item, Rating rating);
double am_log_likelihood(const AmParams& params, const RatingTable& table);

// Responsibilities over z per triple.
LatentPosterior am_e_step(const AmParams& params, const RatingTable& table, double beta = 1.0);
AmParams am_m_step(const LatentPosterior& posterior, const RatingTable& table,
                   std::size_t* uniform_fallbacks = nullptr);

class AmEm final : public EmModel {
 public:
  AmEm(const RatingTable& table, AmParams& params);
  double e_step(double beta) override;
  std::size_t m_step() override;
  void perturb(std::mt19937_64& rng, double magnitude) override;

 private:
  const RatingTable& table_;
  AmParams& params_;
  LatentPosterior post_;
};

struct AmFit {
  AmParams params;
  TrainTrace trace;
};

AmFit am_train(const RatingTable& table, std::size_t k,
               const std::optional<AnnealSchedule>& schedule,
               const ConvergenceCriterion& criterion, std::uint64_t seed,
               const EmObserver& observer = {});

// Mixture weights q(z) standing in for P(z) P(y_t|z), fitted to the observed
// (item, rating) pairs with `alpha` pseudo-counts per class.
std::vector<double> am_fold_in(const AmParams& params, std::span<const ItemRating> observed,
                               double alpha, const ConvergenceCriterion& criterion);
// P(r | x, y_t) proportional to sum_z q(z) P(x|z) P(r|z). An item with no mass
// in any class is scored by sum_z q(z) P(r|z).
std::vector<double> am_rating_distribution(const AmParams& params, std::span<const double> q,
                                           ItemId item);
double am_predict(const AmParams& params, std::span<const double> q, ItemId item,
                  PredictMode mode);

}  // namespace prefcf
