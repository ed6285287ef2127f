#pragma once
// Baseline-peer model: the rating is emitted from the preference class and the
// item class jointly, with no separate rating-habit class.
//   z_x ~ P(z_x), x ~ P(x|z_x), r ~ P(r|z_p, z_x), z_p ~ P(z_p|y)

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "prefcf/decision.hpp"
#include "prefcf/em.hpp"
#include "prefcf/prob_table.hpp"
#include "prefcf/rating_table.hpp"

namespace prefcf {

struct BaselineParams {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  int scale = 0;
  std::size_t k_x = 0, k_p = 0;

  ProbTable p_zx;              // 1 x K_x
  ProbTable p_x_given_zx;      // K_x x M
  ProbTable p_zp_given_y;      // N x K_p
  ProbTable p_r_given_zp_zx;   // (K_p*K_x) x R, row zp*K_x + zx

  static BaselineParams uniform(std::size_t num_users, std::size_t num_items, int scale,
                                std::size_t k_x, std::size_t k_p);
  static BaselineParams random(std::size_t num_users, std::size_t num_items, int scale,
                               std::size_t k_x, std::size_t k_p, std::mt19937_64& rng);

  std::size_t rating_row(std::size_t zp, std::size_t zx) const { return zp * k_x + zx; }
  double max_normalization_error() const;
  void check_shapes() const;
  bool operator==(const BaselineParams&) const = default;
};

double baseline_joint_prob(const BaselineParams& params, ItemId item, Rating rating,
                           std::span<const double> pref_profile);
double baseline_joint_prob(const BaselineParams& params, UserId user, ItemId item, Rating rating);
double baseline_log_likelihood(const BaselineParams& params, const RatingTable& table);

// Responsibilities over (z_p, z_x) per triple.
LatentPosterior baseline_e_step(const BaselineParams& params, const RatingTable& table,
                                double beta = 1.0);
BaselineParams baseline_m_step(const LatentPosterior& posterior, const RatingTable& table,
                               std::size_t* uniform_fallbacks = nullptr);

class BaselineEm final : public EmModel {
 public:
  BaselineEm(const RatingTable& table, BaselineParams& params);
  double e_step(double beta) override;
  std::size_t m_step() override;
  void perturb(std::mt19937_64& rng, double magnitude) override;

 private:
  const RatingTable& table_;
  BaselineParams& params_;
  LatentPosterior post_;
};

struct BaselineFit {
  BaselineParams params;
  TrainTrace trace;
};

BaselineFit baseline_train(const RatingTable& table, std::size_t k_x, std::size_t k_p,
                           const std::optional<AnnealSchedule>& schedule,
                           const ConvergenceCriterion& criterion, std::uint64_t seed,
                           const EmObserver& observer = {});

// P(z_p | y_t) by EM over the observed ratings with `alpha` pseudo-counts.
std::vector<double> baseline_fold_in(const BaselineParams& params,
                                     std::span<const ItemRating> observed, double alpha,
                                     const ConvergenceCriterion& criterion);
// P(r | x, y_t); unseen items fall back to the class prior P(z_x).
std::vector<double> baseline_rating_distribution(const BaselineParams& params,
                                                 std::span<const double> pref_profile,
                                                 ItemId item);
double baseline_predict(const BaselineParams& params, std::span<const double> pref_profile,
                        ItemId item, PredictMode mode);

}  // namespace prefcf
