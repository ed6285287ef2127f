#pragma once
// Preference-ordering model: users and items fall into classes, and for a pair of
// items rated by the same user the model explains only their relative order.
// Each item draws a preference bit b with P(b = 1) = v(z_x, z_y); the order is
// "equal" when the bits agree and favours the item whose bit is set otherwise.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "prefcf/em.hpp"
#include "prefcf/prob_table.hpp"
#include "prefcf/rating_table.hpp"

namespace prefcf {

enum class Order : std::uint8_t { equal = 0, a_over_b = 1, b_over_a = 2 };

// 0 when r == r2, 1 when r > r2, 2 when r < r2.
Order indicator(Rating r, Rating r2);
double order_prob(double v_a, double v_b, Order order);

struct OrderObservation {
  UserId user;
  ItemId item_a;
  ItemId item_b;
  Order order;
  bool operator==(const OrderObservation&) const = default;
};

struct MpParams {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  int scale = 0;
  std::size_t k_y = 0, k_x = 0;

  ProbTable p_zy;          // 1 x K_y
  ProbTable p_y_given_zy;  // K_y x N
  ProbTable p_zx;          // 1 x K_x
  ProbTable p_x_given_zx;  // K_x x M
  ProbTable v;             // K_x x K_y, entries in [0, 1]

  static MpParams uniform(std::size_t num_users, std::size_t num_items, int scale,
                          std::size_t k_y, std::size_t k_x);
  // Dirichlet(1) tables and v drawn uniformly from [0, 1].
  static MpParams random(std::size_t num_users, std::size_t num_items, int scale,
                         std::size_t k_y, std::size_t k_x, std::mt19937_64& rng);

  double max_normalization_error() const;
  void check_shapes() const;
  bool operator==(const MpParams&) const = default;
};

// Class-mixture weights of a test user, standing in for P(z_y) P(y|z_y).
struct MpUserProfile {
  std::vector<double> weights;
};

double pair_joint(const MpParams& params, const OrderObservation& obs);
double mp_log_likelihood(const MpParams& params, std::span<const OrderObservation> pairs);

// Every unordered pair of a user's rated items once, the earlier rating in
// insertion order as item_a. With max_pairs_per_user > 0, users with more pairs
// keep a seeded uniform sample of that size (original order kept).
std::vector<OrderObservation> extract_pairs(const RatingTable& table,
                                            std::size_t max_pairs_per_user = 0,
                                            std::uint64_t seed = 0);
std::vector<OrderObservation> pairs_from_ratings(UserId user, std::span<const ItemRating> ratings);

// Responsibilities over (z_y, z_x, z_x', b, b') per pair.
LatentPosterior mp_e_step(const MpParams& params, std::span<const OrderObservation> pairs,
                          double beta = 1.0);
// Count-ratio updates; `shape` supplies N, M, R and the class counts.
MpParams mp_m_step(const LatentPosterior& posterior, std::span<const OrderObservation> pairs,
                   const MpParams& shape, std::size_t* uniform_fallbacks = nullptr);

class MpEm final : public EmModel {
 public:
  MpEm(std::span<const OrderObservation> pairs, MpParams& params);
  ~MpEm() override;
  double e_step(double beta) override;
  std::size_t m_step() override;
  void perturb(std::mt19937_64& rng, double magnitude) override;

 private:
  struct Stats;
  std::span<const OrderObservation> pairs_;
  MpParams& params_;
  std::unique_ptr<Stats> stats_;
};

struct MpFit {
  MpParams params;
  TrainTrace trace;
};

MpFit mp_train(const RatingTable& table, std::size_t k_y, std::size_t k_x,
               const std::optional<AnnealSchedule>& schedule,
               const ConvergenceCriterion& criterion, std::uint64_t seed,
               std::size_t max_pairs_per_user = 0, const EmObserver& observer = {});

// EM over the test user's pairs, updating only the mixture weights.
MpUserProfile mp_fold_in(const MpParams& params, std::span<const OrderObservation> pairs,
                         const ConvergenceCriterion& criterion);

// log score of each candidate rating 1..R for `target`: the sum over observed
// items x of log P(target, x, indicator(r, R(x))) under the profile.
std::vector<double> mp_candidate_log_scores(const MpParams& params, const MpUserProfile& profile,
                                            std::span<const ItemRating> observed, ItemId target);
// Highest-scoring candidate. Scores within 1e-12 (log scale) are tied; ties go
// to the candidate closest to the observed mean, then to the lower rating.
Rating mp_predict(const MpParams& params, const MpUserProfile& profile,
                  std::span<const ItemRating> observed, ItemId target);
Rating pick_candidate(std::span<const double> log_scores, double observed_mean);

}  // namespace prefcf
