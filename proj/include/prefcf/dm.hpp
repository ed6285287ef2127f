#pragma once
// Decoupled model: a user's preference pattern (z_p) and rating habit (z_r) are
// separate latent classes. An observation (x, r | y) is generated by
//   z_x ~ P(z_x), x ~ P(x|z_x), z_pref ~ P(z_pref|z_p, z_x), r ~ P(r|z_r, z_pref)
// with z_p ~ P(z_p|y) and z_r ~ P(z_r|y).

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

struct DmSizes {
  std::size_t k_x = 5;
  std::size_t k_p = 3;
  std::size_t k_r = 10;
  // Number of preference levels; 0 means "same as the rating scale".
  std::size_t k_pref = 0;

  DmSizes resolved(int scale) const;
};

struct DmParams {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  int scale = 0;
  std::size_t k_x = 0, k_p = 0, k_r = 0, k_pref = 0;

  ProbTable p_zx;                 // 1 x K_x
  ProbTable p_x_given_zx;         // K_x x M
  ProbTable p_zp_given_y;         // N x K_p
  ProbTable p_zr_given_y;         // N x K_r
  ProbTable p_zpref_given_zp_zx;  // (K_p*K_x) x K_pref, row zp*K_x + zx
  ProbTable p_r_given_zr_zpref;   // (K_r*K_pref) x R, row zr*K_pref + zpref

  static DmParams uniform(std::size_t num_users, std::size_t num_items, int scale, DmSizes sizes);
  static DmParams random(std::size_t num_users, std::size_t num_items, int scale, DmSizes sizes,
                         std::mt19937_64& rng);

  std::size_t pref_row(std::size_t zp, std::size_t zx) const { return zp * k_x + zx; }
  std::size_t rating_row(std::size_t zr, std::size_t zpref) const { return zr * k_pref + zpref; }

  // Largest deviation of any conditional distribution from summing to one.
  double max_normalization_error() const;
  // Throws ValidationError on inconsistent shapes.
  void check_shapes() const;
  bool operator==(const DmParams&) const = default;
};

// Test-user profile estimated by fold-in.
struct DmUserProfile {
  std::vector<double> pref;    // P(z_p | y_t)
  std::vector<double> rating;  // P(z_r | y_t)
};

// P(x, r | y) given the user's two class distributions.
double dm_joint_prob(const DmParams& params, ItemId item, Rating rating,
                     std::span<const double> pref_profile, std::span<const double> rating_profile);
// Same, with the user's rows from the parameter tables.
double dm_joint_prob(const DmParams& params, UserId user, ItemId item, Rating rating);

double dm_log_likelihood(const DmParams& params, const RatingTable& table);

// Responsibilities over (z_p, z_r, z_x, z_pref) for every triple of `table`,
// tempered as joint^beta.
LatentPosterior dm_e_step(const DmParams& params, const RatingTable& table, double beta = 1.0);
// Count-ratio re-estimation of all six tables. Class counts come from the
// posterior dims, N/M/R from the table.
DmParams dm_m_step(const LatentPosterior& posterior, const RatingTable& table,
                   std::size_t* uniform_fallbacks = nullptr);

// EM state that streams sufficient statistics instead of materialising the
// posterior.
class DmEm final : public EmModel {
 public:
  DmEm(const RatingTable& table, DmParams& params);
  ~DmEm() override;
  double e_step(double beta) override;
  std::size_t m_step() override;
  void perturb(std::mt19937_64& rng, double magnitude) override;

 private:
  struct Stats;
  const RatingTable& table_;
  DmParams& params_;
  std::unique_ptr<Stats> stats_;
};

struct DmFit {
  DmParams params;
  TrainTrace trace;
};

DmFit dm_train(const RatingTable& table, DmSizes sizes,
               const std::optional<AnnealSchedule>& schedule,
               const ConvergenceCriterion& criterion, std::uint64_t seed,
               const EmObserver& observer = {});

// Read-only prediction state: global tables laid out for the inner loops.
// Safe for concurrent use.
class DmPredictor {
 public:
  explicit DmPredictor(const DmParams& params);
  ~DmPredictor();
  DmPredictor(DmPredictor&&) noexcept;
  DmPredictor& operator=(DmPredictor&&) noexcept;

  // EM over P(z_p|y_t) and P(z_r|y_t) only, with `alpha` pseudo-counts per class.
  DmUserProfile fold_in(std::span<const ItemRating> observed, double alpha,
                        const ConvergenceCriterion& criterion) const;
  // P(r | x, y_t) for r = 1..R. An item with no mass under any item class (never
  // seen in training) is scored with the class prior P(z_x) alone.
  std::vector<double> rating_distribution(const DmUserProfile& profile, ItemId item) const;
  double predict(const DmUserProfile& profile, ItemId item, PredictMode mode) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

DmUserProfile dm_fold_in(const DmParams& params, std::span<const ItemRating> observed,
                         double alpha, const ConvergenceCriterion& criterion);
double dm_predict(const DmParams& params, const DmUserProfile& profile, ItemId item,
                  PredictMode mode);

struct DmSample {
  RatingTable table;
  std::vector<std::uint32_t> pref_class;    // drawn z_p per user
  std::vector<std::uint32_t> rating_class;  // drawn z_r per user
};

// Ancestral sampling. Synthetic user u uses parameter row u % N. Duplicate
// (user, item) draws are re-drawn; InfeasibleError when a user cannot collect
// ratings_per_user distinct items.
DmSample dm_synthesize(const DmParams& params, std::size_t num_users,
                       std::size_t ratings_per_user, std::uint64_t seed);

// Well-separated generator used for synthetic experiments: items cluster by
// class, each user is pinned to one preference and one rating class, each
// (z_p, z_x) has a dominant preference level, and rating classes shift the
// rating scale (lenient vs tough raters) for the same preference level.
struct SeparatedDesign {
  std::size_t num_users = 200;
  std::size_t num_items = 50;
  int scale = 5;
  DmSizes sizes{3, 2, 2, 2};
  double item_purity = 0.9;
  double pref_purity = 0.9;
  double user_purity = 1.0;
  // Std-dev (in rating steps) of the rating kernel around each class center.
  double rating_spread = 0.5;
  // Fraction of the scale spanned by preference levels; the rest is rater bias.
  double pref_span = 0.6;
};

DmParams make_separated_params(const SeparatedDesign& design, std::uint64_t seed);

}  // namespace prefcf
