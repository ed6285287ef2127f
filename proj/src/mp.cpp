#include "prefcf/mp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "prefcf/error.hpp"
#include "prefcf/simd.hpp"

namespace prefcf {
namespace {

constexpr double kTieTolerance = 1e-12;

// Tables raised to beta and laid out per user class.
struct MpTables {
  std::size_t k_y, k_x, num_users, num_items;
  ProbTable user_w;  // N x K_y: P(z_y) P(y|z_y)
  ProbTable item_w;  // M x K_x: P(z_x) P(x|z_x)
  ProbTable v1, v0;  // K_y x K_x: v and 1 - v
  std::vector<double> zx;

  MpTables(const MpParams& p, double beta)
      : k_y(p.k_y), k_x(p.k_x), num_users(p.num_users), num_items(p.num_items),
        user_w(p.num_users, p.k_y), item_w(p.num_items, p.k_x), v1(p.k_y, p.k_x),
        v0(p.k_y, p.k_x), zx(p.p_zx.powered(beta).values()) {
    const ProbTable zy = p.p_zy.powered(beta), yz = p.p_y_given_zy.powered(beta);
    for (std::size_t y = 0; y < num_users; ++y)
      for (std::size_t c = 0; c < k_y; ++c) user_w(y, c) = zy(0, c) * yz(c, y);
    const ProbTable xz = p.p_x_given_zx.powered(beta);
    for (std::size_t x = 0; x < num_items; ++x)
      for (std::size_t c = 0; c < k_x; ++c) item_w(x, c) = zx[c] * xz(c, x);
    for (std::size_t c = 0; c < k_y; ++c)
      for (std::size_t z = 0; z < k_x; ++z) {
        const double v = p.v(z, c);
        v1(c, z) = beta == 1.0 ? v : std::pow(v, beta);
        v0(c, z) = beta == 1.0 ? 1.0 - v : std::pow(1.0 - v, beta);
      }
  }

  std::span<const double> item(ItemId x, bool prior_fallback) const {
    const auto w = item_w.row(x);
    if (prior_fallback && !(simd::sum(w) > 0.0)) return zx;
    return w;
  }
};

// Per user class: bit sums for both items and the coefficients each item's bit
// receives from the other item's allowed bits.
struct PairTerms {
  double a1, a0, b1, b0;  // sum over z of w(z) v(z) and w(z) (1 - v(z))
  double ca1, ca0;        // item a with bit 1 / 0: sum of allowed partner sums
  double cb1, cb0;
  double mass() const { return a1 * ca1 + a0 * ca0; }
};

PairTerms pair_terms(const MpTables& t, std::size_t zy, std::span<const double> wa,
                     std::span<const double> wb, Order order) {
  PairTerms p{};
  const auto r1 = t.v1.row(zy), r0 = t.v0.row(zy);
  p.a1 = simd::dot(wa, r1);
  p.a0 = simd::dot(wa, r0);
  p.b1 = simd::dot(wb, r1);
  p.b0 = simd::dot(wb, r0);
  switch (order) {
    case Order::equal:
      p.ca1 = p.b1, p.ca0 = p.b0, p.cb1 = p.a1, p.cb0 = p.a0;
      break;
    case Order::a_over_b:
      p.ca1 = p.b0, p.ca0 = 0.0, p.cb1 = 0.0, p.cb0 = p.a1;
      break;
    case Order::b_over_a:
      p.ca1 = 0.0, p.ca0 = p.b1, p.cb1 = p.a0, p.cb0 = 0.0;
      break;
  }
  return p;
}

void check_pair(const MpParams& p, const OrderObservation& o) {
  if (o.user >= p.num_users)
    throw BoundsError("user id " + std::to_string(o.user) + " out of range for the model");
  if (o.item_a >= p.num_items || o.item_b >= p.num_items)
    throw BoundsError("item id out of range for the model");
  if (o.item_a == o.item_b) throw ValidationError("an order observation needs two distinct items");
  if (static_cast<int>(o.order) > 2) throw ValidationError("invalid order value");
}

double pair_total(const MpTables& t, const OrderObservation& o) {
  const auto wa = t.item_w.row(o.item_a), wb = t.item_w.row(o.item_b);
  const auto u = t.user_w.row(o.user);
  double z = 0.0;
  for (std::size_t c = 0; c < t.k_y; ++c) z += u[c] * pair_terms(t, c, wa, wb, o.order).mass();
  return z;
}

struct MpCounts {
  ProbTable n_zy;     // 1 x K_y
  ProbTable n_y;      // K_y x N
  ProbTable n_x_t;    // M x K_x
  ProbTable n_v1;     // K_y x K_x
  ProbTable n_vall;   // K_y x K_x

  explicit MpCounts(const MpParams& p)
      : n_zy(1, p.k_y), n_y(p.k_y, p.num_users), n_x_t(p.num_items, p.k_x), n_v1(p.k_y, p.k_x),
        n_vall(p.k_y, p.k_x) {}

  void clear() {
    for (auto* t : {&n_zy, &n_y, &n_x_t, &n_v1, &n_vall}) t->fill(0.0);
  }

  std::size_t finalize(MpParams& p) const {
    std::size_t fb = 0;
    p.p_zy = n_zy;
    fb += p.p_zy.normalize_rows();
    p.p_y_given_zy = n_y;
    fb += p.p_y_given_zy.normalize_rows();
    p.p_zx = ProbTable(1, p.k_x);
    for (std::size_t c = 0; c < p.k_y; ++c)
      for (std::size_t z = 0; z < p.k_x; ++z) p.p_zx(0, z) += n_vall(c, z);
    fb += p.p_zx.normalize_rows();
    p.p_x_given_zx = n_x_t.transposed();
    fb += p.p_x_given_zx.normalize_rows();
    for (std::size_t c = 0; c < p.k_y; ++c)
      for (std::size_t z = 0; z < p.k_x; ++z) {
        if (n_vall(c, z) > 0.0) {
          p.v(z, c) = std::clamp(n_v1(c, z) / n_vall(c, z), 0.0, 1.0);
        } else {
          p.v(z, c) = 0.5;
          ++fb;
        }
      }
    return fb;
  }
};

}  // namespace

Order indicator(Rating r, Rating r2) {
  if (r == r2) return Order::equal;
  return r > r2 ? Order::a_over_b : Order::b_over_a;
}

double order_prob(double v_a, double v_b, Order order) {
  switch (order) {
    case Order::equal: return v_a * v_b + (1.0 - v_a) * (1.0 - v_b);
    case Order::a_over_b: return v_a * (1.0 - v_b);
    case Order::b_over_a: return (1.0 - v_a) * v_b;
  }
  return 0.0;
}

MpParams MpParams::uniform(std::size_t num_users, std::size_t num_items, int scale,
                           std::size_t k_y, std::size_t k_x) {
  if (scale < 1) throw ValidationError("rating scale must be at least 1");
  if (k_y < 1 || k_x < 1) throw ValidationError("class counts must be at least 1");
  MpParams p;
  p.num_users = num_users;
  p.num_items = num_items;
  p.scale = scale;
  p.k_y = k_y;
  p.k_x = k_x;
  p.p_zy = ProbTable::uniform(1, k_y);
  p.p_y_given_zy = ProbTable::uniform(k_y, num_users);
  p.p_zx = ProbTable::uniform(1, k_x);
  p.p_x_given_zx = ProbTable::uniform(k_x, num_items);
  p.v = ProbTable(k_x, k_y, 0.5);
  return p;
}

MpParams MpParams::random(std::size_t num_users, std::size_t num_items, int scale,
                          std::size_t k_y, std::size_t k_x, std::mt19937_64& rng) {
  MpParams p = uniform(num_users, num_items, scale, k_y, k_x);
  p.p_zy.randomize(rng);
  p.p_y_given_zy.randomize(rng);
  p.p_zx.randomize(rng);
  p.p_x_given_zx.randomize(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : p.v.values()) v = unit(rng);
  return p;
}

double MpParams::max_normalization_error() const {
  double e = 0.0;
  for (const auto* t : {&p_zy, &p_y_given_zy, &p_zx, &p_x_given_zx})
    e = std::max(e, t->max_row_error());
  return e;
}

void MpParams::check_shapes() const {
  bool ok = scale >= 1 && k_y >= 1 && k_x >= 1 && p_zy.rows() == 1 && p_zy.cols() == k_y &&
            p_y_given_zy.rows() == k_y && p_y_given_zy.cols() == num_users &&
            p_zx.rows() == 1 && p_zx.cols() == k_x && p_x_given_zx.rows() == k_x &&
            p_x_given_zx.cols() == num_items && v.rows() == k_x && v.cols() == k_y;
  if (ok)
    for (double x : v.values()) ok = ok && x >= 0.0 && x <= 1.0;
  if (!ok) throw ValidationError("ordering-model tables have inconsistent shapes or values");
}

double pair_joint(const MpParams& params, const OrderObservation& obs) {
  check_pair(params, obs);
  return pair_total(MpTables(params, 1.0), obs);
}

double mp_log_likelihood(const MpParams& params, std::span<const OrderObservation> pairs) {
  const MpTables t(params, 1.0);
  double ll = 0.0;
  for (const auto& o : pairs) {
    check_pair(params, o);
    ll += std::log(pair_total(t, o));
  }
  return ll;
}

std::vector<OrderObservation> pairs_from_ratings(UserId user,
                                                 std::span<const ItemRating> ratings) {
  std::vector<OrderObservation> out;
  for (std::size_t i = 0; i < ratings.size(); ++i)
    for (std::size_t j = i + 1; j < ratings.size(); ++j)
      out.push_back({user, ratings[i].item, ratings[j].item,
                     indicator(ratings[i].rating, ratings[j].rating)});
  return out;
}

std::vector<OrderObservation> extract_pairs(const RatingTable& table,
                                            std::size_t max_pairs_per_user, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<OrderObservation> out;
  for (std::size_t u = 0; u < table.num_users(); ++u) {
    const auto ratings = table.ratings_in_order(UserId(u));
    auto pairs = pairs_from_ratings(UserId(u), ratings);
    if (max_pairs_per_user > 0 && pairs.size() > max_pairs_per_user) {
      std::vector<OrderObservation> kept;
      kept.reserve(max_pairs_per_user);
      std::sample(pairs.begin(), pairs.end(), std::back_inserter(kept), max_pairs_per_user, rng);
      pairs = std::move(kept);
    }
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  return out;
}

LatentPosterior mp_e_step(const MpParams& params, std::span<const OrderObservation> pairs,
                          double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("beta must lie in (0, 1]");
  const MpTables t(params, beta);
  const std::size_t ky = t.k_y, kx = t.k_x;
  LatentPosterior post(pairs.size(), {ky, kx, kx, 2, 2});
  for (std::size_t l = 0; l < pairs.size(); ++l) {
    const auto& o = pairs[l];
    check_pair(params, o);
    const auto wa = t.item_w.row(o.item_a), wb = t.item_w.row(o.item_b);
    const auto u = t.user_w.row(o.user);
    auto q = post.row(l);
    double z = 0.0;
    for (std::size_t c = 0; c < ky; ++c)
      for (std::size_t za = 0; za < kx; ++za)
        for (std::size_t zb = 0; zb < kx; ++zb)
          for (int ba = 0; ba < 2; ++ba)
            for (int bb = 0; bb < 2; ++bb) {
              const bool allowed = o.order == Order::equal ? ba == bb
                                   : o.order == Order::a_over_b ? (ba == 1 && bb == 0)
                                                                 : (ba == 0 && bb == 1);
              if (!allowed) continue;
              const double pa = ba ? t.v1(c, za) : t.v0(c, za);
              const double pb = bb ? t.v1(c, zb) : t.v0(c, zb);
              const double m = u[c] * wa[za] * wb[zb] * pa * pb;
              q[(((c * kx + za) * kx + zb) * 2 + ba) * 2 + bb] = m;
              z += m;
            }
    if (!(z > 0.0) || !std::isfinite(z))
      throw NumericError("pair " + std::to_string(l) + " has no posterior mass", l);
    for (double& x : q) x /= z;
  }
  return post;
}

MpParams mp_m_step(const LatentPosterior& posterior, std::span<const OrderObservation> pairs,
                   const MpParams& shape, std::size_t* uniform_fallbacks) {
  const auto& d = posterior.dims();
  if (d.size() != 5 || d[0] != shape.k_y || d[1] != shape.k_x || d[2] != shape.k_x ||
      posterior.observations() != pairs.size())
    throw ValidationError("posterior does not match the pairs or model shape");
  const std::size_t ky = shape.k_y, kx = shape.k_x;
  MpParams p = MpParams::uniform(shape.num_users, shape.num_items, shape.scale, ky, kx);
  MpCounts st(p);
  for (std::size_t l = 0; l < pairs.size(); ++l) {
    const auto& o = pairs[l];
    const auto q = posterior.row(l);
    for (std::size_t c = 0; c < ky; ++c)
      for (std::size_t za = 0; za < kx; ++za)
        for (std::size_t zb = 0; zb < kx; ++zb)
          for (int ba = 0; ba < 2; ++ba)
            for (int bb = 0; bb < 2; ++bb) {
              const double m = q[(((c * kx + za) * kx + zb) * 2 + ba) * 2 + bb];
              st.n_zy(0, c) += m;
              st.n_y(c, o.user) += m;
              st.n_x_t(o.item_a, za) += m;
              st.n_x_t(o.item_b, zb) += m;
              st.n_vall(c, za) += m;
              st.n_vall(c, zb) += m;
              if (ba) st.n_v1(c, za) += m;
              if (bb) st.n_v1(c, zb) += m;
            }
  }
  const std::size_t fb = st.finalize(p);
  if (uniform_fallbacks) *uniform_fallbacks = fb;
  return p;
}

struct MpEm::Stats : MpCounts {
  using MpCounts::MpCounts;
};

MpEm::MpEm(std::span<const OrderObservation> pairs, MpParams& params)
    : pairs_(pairs), params_(params), stats_(std::make_unique<Stats>(params)) {
  params.check_shapes();
  for (const auto& o : pairs) check_pair(params, o);
}

MpEm::~MpEm() = default;

double MpEm::e_step(double beta) {
  auto& st = *stats_;
  st.clear();
  const MpTables t(params_, beta);
  std::optional<MpTables> t1;
  if (beta != 1.0) t1.emplace(params_, 1.0);
  const std::size_t ky = t.k_y, kx = t.k_x;
  std::vector<PairTerms> terms(ky);
  std::vector<double> mass(ky), pos_a(kx), pos_b(kx), tmp(kx);
  double ll = 0.0;

  for (std::size_t l = 0; l < pairs_.size(); ++l) {
    const auto& o = pairs_[l];
    const auto wa = t.item_w.row(o.item_a), wb = t.item_w.row(o.item_b);
    const auto u = t.user_w.row(o.user);
    double z = 0.0;
    for (std::size_t c = 0; c < ky; ++c) {
      terms[c] = pair_terms(t, c, wa, wb, o.order);
      mass[c] = u[c] * terms[c].mass();
      z += mass[c];
    }
    if (!(z > 0.0) || !std::isfinite(z))
      throw NumericError("pair " + std::to_string(l) + " has no posterior mass", l);
    ll += std::log(t1 ? pair_total(*t1, o) : z);

    const double inv = 1.0 / z;
    std::fill(pos_a.begin(), pos_a.end(), 0.0);
    std::fill(pos_b.begin(), pos_b.end(), 0.0);
    for (std::size_t c = 0; c < ky; ++c) {
      if (mass[c] == 0.0) continue;
      const double k = u[c] * inv;
      const auto& pt = terms[c];
      const auto r1 = t.v1.row(c), r0 = t.v0.row(c);
      st.n_zy(0, c) += mass[c] * inv;
      st.n_y(c, o.user) += mass[c] * inv;
      auto n1 = st.n_v1.row(c), nall = st.n_vall.row(c);
      // Item a: bit-1 mass and total mass per item class.
      simd::mul(wa, r1, tmp);
      simd::axpy(k * pt.ca1, tmp, n1);
      simd::axpy(k * pt.ca1, tmp, nall);
      simd::axpy(k * pt.ca1, tmp, pos_a);
      simd::mul(wa, r0, tmp);
      simd::axpy(k * pt.ca0, tmp, nall);
      simd::axpy(k * pt.ca0, tmp, pos_a);
      // Item b.
      simd::mul(wb, r1, tmp);
      simd::axpy(k * pt.cb1, tmp, n1);
      simd::axpy(k * pt.cb1, tmp, nall);
      simd::axpy(k * pt.cb1, tmp, pos_b);
      simd::mul(wb, r0, tmp);
      simd::axpy(k * pt.cb0, tmp, nall);
      simd::axpy(k * pt.cb0, tmp, pos_b);
    }
    simd::axpy(1.0, pos_a, st.n_x_t.row(o.item_a));
    simd::axpy(1.0, pos_b, st.n_x_t.row(o.item_b));
  }
  return ll;
}

std::size_t MpEm::m_step() { return stats_->finalize(params_); }

void MpEm::perturb(std::mt19937_64& rng, double magnitude) {
  for (auto* t : {&params_.p_zy, &params_.p_y_given_zy, &params_.p_zx, &params_.p_x_given_zx})
    perturb_rows(*t, rng, magnitude);
  // v moves on the logit scale so it stays inside [0, 1].
  std::normal_distribution<double> noise(0.0, magnitude);
  for (double& v : params_.v.values()) {
    if (v <= 0.0 || v >= 1.0) continue;
    const double logit = std::log(v / (1.0 - v)) + noise(rng);
    v = 1.0 / (1.0 + std::exp(-logit));
  }
}

MpFit mp_train(const RatingTable& table, std::size_t k_y, std::size_t k_x,
               const std::optional<AnnealSchedule>& schedule,
               const ConvergenceCriterion& criterion, std::uint64_t seed,
               std::size_t max_pairs_per_user, const EmObserver& observer) {
  const auto pairs = extract_pairs(table, max_pairs_per_user, seed);
  if (pairs.empty()) throw ValidationError("no user has two rated items; nothing to train on");
  std::mt19937_64 rng(seed);
  MpFit fit{MpParams::random(table.num_users(), table.num_items(), table.scale(), k_y, k_x, rng),
            {}};
  MpEm em(pairs, fit.params);
  fit.trace = run_em(em, schedule, criterion, seed + 1, observer);
  return fit;
}

MpUserProfile mp_fold_in(const MpParams& params, std::span<const OrderObservation> pairs,
                         const ConvergenceCriterion& criterion) {
  if (pairs.empty()) throw FoldInError("fold-in needs at least one observed pair");
  const MpTables t(params, 1.0);
  ProbTable evidence(pairs.size(), t.k_y);
  for (std::size_t l = 0; l < pairs.size(); ++l) {
    const auto& o = pairs[l];
    if (o.item_a >= params.num_items || o.item_b >= params.num_items)
      throw BoundsError("item id out of range for the model");
    const auto wa = t.item(o.item_a, true), wb = t.item(o.item_b, true);
    for (std::size_t c = 0; c < t.k_y; ++c)
      evidence(l, c) = pair_terms(t, c, wa, wb, o.order).mass();
  }
  return {fold_in_mixture(evidence, 0.0, criterion)};
}

std::vector<double> mp_candidate_log_scores(const MpParams& params, const MpUserProfile& profile,
                                            std::span<const ItemRating> observed,
                                            ItemId target) {
  if (observed.empty()) throw FoldInError("prediction needs at least one observed rating");
  if (profile.weights.size() != params.k_y)
    throw BoundsError("user profile does not match the model's class count");
  if (target >= params.num_items)
    throw BoundsError("item id " + std::to_string(target) + " out of range for the model");
  const MpTables t(params, 1.0);
  const auto wt = t.item(target, true);
  std::vector<double> scores(static_cast<std::size_t>(params.scale), 0.0);
  std::vector<PairTerms> terms(t.k_y);
  for (const auto& o : observed) {
    if (o.item >= params.num_items)
      throw BoundsError("item id " + std::to_string(o.item) + " out of range for the model");
    if (o.rating < 1 || o.rating > params.scale)
      throw BoundsError("observed rating outside the model's scale");
    const auto wx = t.item(o.item, true);
    for (int r = 1; r <= params.scale; ++r) {
      const Order ord = indicator(r, o.rating);
      double p = 0.0;
      for (std::size_t c = 0; c < t.k_y; ++c)
        p += profile.weights[c] * pair_terms(t, c, wt, wx, ord).mass();
      scores[static_cast<std::size_t>(r - 1)] += std::log(p);
    }
  }
  return scores;
}

Rating pick_candidate(std::span<const double> log_scores, double observed_mean) {
  const double best = *std::max_element(log_scores.begin(), log_scores.end());
  const auto tied = [&](double s) {
    if (s == best) return true;
    return std::isfinite(s) && std::isfinite(best) && std::abs(s - best) < kTieTolerance;
  };
  Rating pick = 0;
  double pick_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_scores.size(); ++i) {
    if (!tied(log_scores[i])) continue;
    const Rating r = static_cast<Rating>(i + 1);
    const double dist = std::abs(r - observed_mean);
    if (dist < pick_dist) {
      pick = r;
      pick_dist = dist;
    }
  }
  return pick;
}

Rating mp_predict(const MpParams& params, const MpUserProfile& profile,
                  std::span<const ItemRating> observed, ItemId target) {
  const auto scores = mp_candidate_log_scores(params, profile, observed, target);
  double mean = 0.0;
  for (const auto& o : observed) mean += o.rating;
  mean /= static_cast<double>(observed.size());
  return pick_candidate(scores, mean);
}

}  // namespace prefcf
