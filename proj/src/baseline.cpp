#include "prefcf/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefcf/error.hpp"
#include "prefcf/simd.hpp"

namespace prefcf {
namespace {

void check_observation(const BaselineParams& p, ItemId item, Rating rating) {
  if (item >= p.num_items)
    throw BoundsError("item id " + std::to_string(item) + " out of range for the model");
  if (rating < 1 || rating > p.scale)
    throw BoundsError("rating " + std::to_string(rating) + " outside 1.." +
                      std::to_string(p.scale));
}

struct BaselineTables {
  std::size_t k_x, k_p;
  std::vector<double> zx;
  ProbTable x_given_zx_t;  // M x K_x
  ProbTable r_given_t;     // R x (K_p*K_x)

  BaselineTables(const BaselineParams& p, double beta)
      : k_x(p.k_x), k_p(p.k_p), zx(p.p_zx.powered(beta).values()),
        x_given_zx_t(p.p_x_given_zx.powered(beta).transposed()),
        r_given_t(p.p_r_given_zp_zx.powered(beta).transposed()) {}

  // w[zx] = P(z_x) P(x|z_x), or the prior alone when the item has no mass.
  void item_weights(ItemId x, std::span<double> w, bool prior_fallback) const {
    simd::mul(zx, x_given_zx_t.row(x), w);
    if (prior_fallback && !(simd::sum(w) > 0.0)) std::copy(zx.begin(), zx.end(), w.begin());
  }

  // out[zp*K_x + zx] = u[zp] w[zx] P(r|zp,zx); returns the total.
  double joint(std::span<const double> u, std::span<const double> w, Rating r,
               std::span<double> out) const {
    const auto col = r_given_t.row(static_cast<std::size_t>(r - 1));
    for (std::size_t zp = 0; zp < k_p; ++zp) {
      auto o = out.subspan(zp * k_x, k_x);
      simd::mul(w, col.subspan(zp * k_x, k_x), o);
      simd::scale(u[zp], o, o);
    }
    return simd::sum(out);
  }
};

}  // namespace

BaselineParams BaselineParams::uniform(std::size_t num_users, std::size_t num_items, int scale,
                                       std::size_t k_x, std::size_t k_p) {
  if (scale < 1) throw ValidationError("rating scale must be at least 1");
  if (k_x < 1 || k_p < 1) throw ValidationError("class counts must be at least 1");
  BaselineParams p;
  p.num_users = num_users;
  p.num_items = num_items;
  p.scale = scale;
  p.k_x = k_x;
  p.k_p = k_p;
  p.p_zx = ProbTable::uniform(1, k_x);
  p.p_x_given_zx = ProbTable::uniform(k_x, num_items);
  p.p_zp_given_y = ProbTable::uniform(num_users, k_p);
  p.p_r_given_zp_zx = ProbTable::uniform(k_p * k_x, static_cast<std::size_t>(scale));
  return p;
}

BaselineParams BaselineParams::random(std::size_t num_users, std::size_t num_items, int scale,
                                      std::size_t k_x, std::size_t k_p, std::mt19937_64& rng) {
  BaselineParams p = uniform(num_users, num_items, scale, k_x, k_p);
  p.p_zx.randomize(rng);
  p.p_x_given_zx.randomize(rng);
  p.p_zp_given_y.randomize(rng);
  p.p_r_given_zp_zx.randomize(rng);
  return p;
}

double BaselineParams::max_normalization_error() const {
  double e = 0.0;
  for (const auto* t : {&p_zx, &p_x_given_zx, &p_zp_given_y, &p_r_given_zp_zx})
    e = std::max(e, t->max_row_error());
  return e;
}

void BaselineParams::check_shapes() const {
  const bool ok = scale >= 1 && k_x >= 1 && k_p >= 1 && p_zx.rows() == 1 &&
                  p_zx.cols() == k_x && p_x_given_zx.rows() == k_x &&
                  p_x_given_zx.cols() == num_items && p_zp_given_y.rows() == num_users &&
                  p_zp_given_y.cols() == k_p && p_r_given_zp_zx.rows() == k_p * k_x &&
                  p_r_given_zp_zx.cols() == static_cast<std::size_t>(scale);
  if (!ok) throw ValidationError("baseline tables have inconsistent shapes");
}

double baseline_joint_prob(const BaselineParams& params, ItemId item, Rating rating,
                           std::span<const double> pref_profile) {
  check_observation(params, item, rating);
  if (pref_profile.size() != params.k_p)
    throw BoundsError("user profile does not match the model's class count");
  const BaselineTables t(params, 1.0);
  std::vector<double> w(t.k_x), out(t.k_p * t.k_x);
  t.item_weights(item, w, false);
  return t.joint(pref_profile, w, rating, out);
}

double baseline_joint_prob(const BaselineParams& params, UserId user, ItemId item,
                           Rating rating) {
  if (user >= params.num_users)
    throw BoundsError("user id " + std::to_string(user) + " out of range for the model");
  return baseline_joint_prob(params, item, rating, params.p_zp_given_y.row(user));
}

double baseline_log_likelihood(const BaselineParams& params, const RatingTable& table) {
  const BaselineTables t(params, 1.0);
  std::vector<double> w(t.k_x), out(t.k_p * t.k_x);
  double ll = 0.0;
  for (const auto& tr : table.triples()) {
    check_observation(params, tr.item, tr.rating);
    t.item_weights(tr.item, w, false);
    ll += std::log(t.joint(params.p_zp_given_y.row(tr.user), w, tr.rating, out));
  }
  return ll;
}

LatentPosterior baseline_e_step(const BaselineParams& params, const RatingTable& table,
                                double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("beta must lie in (0, 1]");
  const BaselineTables t(params, beta);
  const ProbTable users = params.p_zp_given_y.powered(beta);
  std::vector<double> w(t.k_x);
  LatentPosterior post(table.size(), {t.k_p, t.k_x});
  for (std::size_t l = 0; l < table.size(); ++l) {
    const auto& tr = table.triple(l);
    check_observation(params, tr.item, tr.rating);
    t.item_weights(tr.item, w, false);
    auto q = post.row(l);
    const double z = t.joint(users.row(tr.user), w, tr.rating, q);
    if (!(z > 0.0) || !std::isfinite(z))
      throw NumericError("triple " + std::to_string(l) + " has no posterior mass", l);
    simd::scale(1.0 / z, q, q);
  }
  return post;
}

BaselineParams baseline_m_step(const LatentPosterior& posterior, const RatingTable& table,
                               std::size_t* uniform_fallbacks) {
  const auto& d = posterior.dims();
  if (d.size() != 2 || posterior.observations() != table.size())
    throw ValidationError("posterior does not match the rating table");
  const std::size_t kp = d[0], kx = d[1];
  BaselineParams p =
      BaselineParams::uniform(table.num_users(), table.num_items(), table.scale(), kx, kp);
  for (auto* t : {&p.p_zx, &p.p_x_given_zx, &p.p_zp_given_y, &p.p_r_given_zp_zx}) t->fill(0.0);
  for (std::size_t l = 0; l < table.size(); ++l) {
    const auto& tr = table.triple(l);
    const auto q = posterior.row(l);
    const auto rc = static_cast<std::size_t>(tr.rating - 1);
    for (std::size_t zp = 0; zp < kp; ++zp)
      for (std::size_t zx = 0; zx < kx; ++zx) {
        const double m = q[zp * kx + zx];
        p.p_zx(0, zx) += m;
        p.p_x_given_zx(zx, tr.item) += m;
        p.p_zp_given_y(tr.user, zp) += m;
        p.p_r_given_zp_zx(zp * kx + zx, rc) += m;
      }
  }
  std::size_t fb = 0;
  for (auto* t : {&p.p_zx, &p.p_x_given_zx, &p.p_zp_given_y, &p.p_r_given_zp_zx})
    fb += t->normalize_rows();
  if (uniform_fallbacks) *uniform_fallbacks = fb;
  return p;
}

BaselineEm::BaselineEm(const RatingTable& table, BaselineParams& params)
    : table_(table), params_(params) {
  params.check_shapes();
  if (table.num_users() != params.num_users || table.num_items() != params.num_items ||
      table.scale() != params.scale)
    throw ValidationError("rating table does not match the model dimensions");
}

double BaselineEm::e_step(double beta) {
  post_ = baseline_e_step(params_, table_, beta);
  return baseline_log_likelihood(params_, table_);
}

std::size_t BaselineEm::m_step() {
  std::size_t fb = 0;
  params_ = baseline_m_step(post_, table_, &fb);
  return fb;
}

void BaselineEm::perturb(std::mt19937_64& rng, double magnitude) {
  for (auto* t : {&params_.p_zx, &params_.p_x_given_zx, &params_.p_zp_given_y,
                  &params_.p_r_given_zp_zx})
    perturb_rows(*t, rng, magnitude);
}

BaselineFit baseline_train(const RatingTable& table, std::size_t k_x, std::size_t k_p,
                           const std::optional<AnnealSchedule>& schedule,
                           const ConvergenceCriterion& criterion, std::uint64_t seed,
                           const EmObserver& observer) {
  if (table.empty()) throw ValidationError("cannot train on an empty rating table");
  std::mt19937_64 rng(seed);
  BaselineFit fit{BaselineParams::random(table.num_users(), table.num_items(), table.scale(),
                                         k_x, k_p, rng),
                  {}};
  BaselineEm em(table, fit.params);
  fit.trace = run_em(em, schedule, criterion, seed + 1, observer);
  return fit;
}

std::vector<double> baseline_fold_in(const BaselineParams& params,
                                     std::span<const ItemRating> observed, double alpha,
                                     const ConvergenceCriterion& criterion) {
  if (observed.empty()) throw FoldInError("fold-in needs at least one observed rating");
  const BaselineTables t(params, 1.0);
  std::vector<double> w(t.k_x), out(t.k_p * t.k_x);
  const std::vector<double> ones(t.k_p, 1.0);
  ProbTable evidence(observed.size(), t.k_p);
  for (std::size_t l = 0; l < observed.size(); ++l) {
    check_observation(params, observed[l].item, observed[l].rating);
    t.item_weights(observed[l].item, w, true);
    t.joint(ones, w, observed[l].rating, out);
    for (std::size_t zp = 0; zp < t.k_p; ++zp)
      evidence(l, zp) = simd::sum(std::span<const double>(out).subspan(zp * t.k_x, t.k_x));
  }
  return fold_in_mixture(evidence, alpha, criterion);
}

std::vector<double> baseline_rating_distribution(const BaselineParams& params,
                                                 std::span<const double> pref_profile,
                                                 ItemId item) {
  if (item >= params.num_items)
    throw BoundsError("item id " + std::to_string(item) + " out of range for the model");
  if (pref_profile.size() != params.k_p)
    throw BoundsError("user profile does not match the model's class count");
  const BaselineTables t(params, 1.0);
  std::vector<double> w(t.k_x), out(t.k_p * t.k_x);
  t.item_weights(item, w, true);
  std::vector<double> dist(static_cast<std::size_t>(params.scale));
  for (int r = 1; r <= params.scale; ++r)
    dist[static_cast<std::size_t>(r - 1)] = t.joint(pref_profile, w, r, out);
  normalize(dist);
  return dist;
}

double baseline_predict(const BaselineParams& params, std::span<const double> pref_profile,
                        ItemId item, PredictMode mode) {
  return decide(baseline_rating_distribution(params, pref_profile, item), mode);
}

}  // namespace prefcf
