#include "prefcf/dm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "prefcf/error.hpp"
#include "prefcf/simd.hpp"

namespace prefcf {
namespace {

// Global tables, optionally tempered, in the layout the observation kernel reads.
struct DmTables {
  std::size_t k_x, k_p, k_r, k_pref, num_items;
  int scale;
  std::vector<double> zx;  // K_x
  ProbTable x_given_zx_t;  // M x K_x
  ProbTable pref;          // (K_p*K_x) x K_pref
  ProbTable rating_t;      // R x (K_r*K_pref)

  DmTables(const DmParams& p, double beta)
      : k_x(p.k_x), k_p(p.k_p), k_r(p.k_r), k_pref(p.k_pref), num_items(p.num_items),
        scale(p.scale), zx(p.p_zx.powered(beta).values()),
        x_given_zx_t(p.p_x_given_zx.powered(beta).transposed()),
        pref(p.p_zpref_given_zp_zx.powered(beta)),
        rating_t(p.p_r_given_zr_zpref.powered(beta).transposed()) {}

  // w[zx] = P(z_x) P(x|z_x); returns the total.
  double item_weights(ItemId x, std::span<double> w) const {
    simd::mul(zx, x_given_zx_t.row(x), w);
    return simd::sum(w);
  }
};

struct DmScratch {
  std::vector<double> w, f, F, g, G;
  explicit DmScratch(const DmTables& t)
      : w(t.k_x), f(t.k_p * t.k_x * t.k_pref), F(t.k_pref), g(t.k_r * t.k_pref), G(t.k_pref) {}

  std::span<double> f_row(std::size_t row, std::size_t k_pref) {
    return {f.data() + row * k_pref, k_pref};
  }
  std::span<double> g_row(std::size_t zr, std::size_t k_pref) {
    return {g.data() + zr * k_pref, k_pref};
  }
};

// f[zp,zx,:] = u[zp] w[zx] P(:|zp,zx) and F = sum over (zp, zx) of f.
void item_side(const DmTables& t, std::span<const double> u, std::span<const double> w,
               DmScratch& s) {
  std::fill(s.F.begin(), s.F.end(), 0.0);
  for (std::size_t zp = 0; zp < t.k_p; ++zp) {
    for (std::size_t zx = 0; zx < t.k_x; ++zx) {
      const std::size_t row = zp * t.k_x + zx;
      auto fr = s.f_row(row, t.k_pref);
      simd::scale(u[zp] * w[zx], t.pref.row(row), fr);
      simd::axpy(1.0, fr, s.F);
    }
  }
}

// g[zr,:] = v[zr] P(r|zr,:) and G = sum over zr of g. Returns F . G, the
// probability of the observation.
double rating_side(const DmTables& t, std::span<const double> v, Rating r, DmScratch& s) {
  std::fill(s.G.begin(), s.G.end(), 0.0);
  const auto col = t.rating_t.row(static_cast<std::size_t>(r - 1));
  for (std::size_t zr = 0; zr < t.k_r; ++zr) {
    auto gr = s.g_row(zr, t.k_pref);
    simd::scale(v[zr], col.subspan(zr * t.k_pref, t.k_pref), gr);
    simd::axpy(1.0, gr, s.G);
  }
  return simd::dot(s.F, s.G);
}

void check_observation(const DmParams& p, ItemId item, Rating rating) {
  if (item >= p.num_items)
    throw BoundsError("item id " + std::to_string(item) + " out of range for the model");
  if (rating < 1 || rating > p.scale)
    throw BoundsError("rating " + std::to_string(rating) + " outside 1.." +
                      std::to_string(p.scale));
}

// Sufficient statistics: expected counts for each table.
struct DmCounts {
  ProbTable n_zx, n_x_zx, n_zp, n_zr, n_pref, n_r_t;

  explicit DmCounts(const DmParams& p)
      : n_zx(1, p.k_x), n_x_zx(p.k_x, p.num_items), n_zp(p.num_users, p.k_p),
        n_zr(p.num_users, p.k_r), n_pref(p.k_p * p.k_x, p.k_pref),
        n_r_t(static_cast<std::size_t>(p.scale), p.k_r * p.k_pref) {}

  void clear() {
    for (auto* t : {&n_zx, &n_x_zx, &n_zp, &n_zr, &n_pref, &n_r_t}) t->fill(0.0);
  }

  std::size_t finalize(DmParams& p) const {
    std::size_t fb = 0;
    p.p_zx = n_zx;
    fb += p.p_zx.normalize_rows();
    p.p_x_given_zx = n_x_zx;
    fb += p.p_x_given_zx.normalize_rows();
    p.p_zp_given_y = n_zp;
    fb += p.p_zp_given_y.normalize_rows();
    p.p_zr_given_y = n_zr;
    fb += p.p_zr_given_y.normalize_rows();
    p.p_zpref_given_zp_zx = n_pref;
    fb += p.p_zpref_given_zp_zx.normalize_rows();
    p.p_r_given_zr_zpref = n_r_t.transposed();
    fb += p.p_r_given_zr_zpref.normalize_rows();
    return fb;
  }
};

}  // namespace

struct DmEm::Stats : DmCounts {
  using DmCounts::DmCounts;
};

DmSizes DmSizes::resolved(int scale) const {
  DmSizes s = *this;
  if (s.k_pref == 0) s.k_pref = static_cast<std::size_t>(std::max(scale, 1));
  if (s.k_x < 1 || s.k_p < 1 || s.k_r < 1)
    throw ValidationError("class counts must be at least 1");
  return s;
}

DmParams DmParams::uniform(std::size_t num_users, std::size_t num_items, int scale,
                           DmSizes sizes) {
  sizes = sizes.resolved(scale);
  if (scale < 1) throw ValidationError("rating scale must be at least 1");
  DmParams p;
  p.num_users = num_users;
  p.num_items = num_items;
  p.scale = scale;
  p.k_x = sizes.k_x;
  p.k_p = sizes.k_p;
  p.k_r = sizes.k_r;
  p.k_pref = sizes.k_pref;
  p.p_zx = ProbTable::uniform(1, p.k_x);
  p.p_x_given_zx = ProbTable::uniform(p.k_x, num_items);
  p.p_zp_given_y = ProbTable::uniform(num_users, p.k_p);
  p.p_zr_given_y = ProbTable::uniform(num_users, p.k_r);
  p.p_zpref_given_zp_zx = ProbTable::uniform(p.k_p * p.k_x, p.k_pref);
  p.p_r_given_zr_zpref = ProbTable::uniform(p.k_r * p.k_pref, static_cast<std::size_t>(scale));
  return p;
}

DmParams DmParams::random(std::size_t num_users, std::size_t num_items, int scale,
                          DmSizes sizes, std::mt19937_64& rng) {
  DmParams p = uniform(num_users, num_items, scale, sizes);
  p.p_zx.randomize(rng);
  p.p_x_given_zx.randomize(rng);
  p.p_zp_given_y.randomize(rng);
  p.p_zr_given_y.randomize(rng);
  p.p_zpref_given_zp_zx.randomize(rng);
  p.p_r_given_zr_zpref.randomize(rng);
  return p;
}

double DmParams::max_normalization_error() const {
  double e = 0.0;
  for (const auto* t : {&p_zx, &p_x_given_zx, &p_zp_given_y, &p_zr_given_y,
                        &p_zpref_given_zp_zx, &p_r_given_zr_zpref})
    e = std::max(e, t->max_row_error());
  return e;
}

void DmParams::check_shapes() const {
  const auto R = static_cast<std::size_t>(scale);
  const bool ok = scale >= 1 && k_x >= 1 && k_p >= 1 && k_r >= 1 && k_pref >= 1 &&
                  p_zx.rows() == 1 && p_zx.cols() == k_x && p_x_given_zx.rows() == k_x &&
                  p_x_given_zx.cols() == num_items && p_zp_given_y.rows() == num_users &&
                  p_zp_given_y.cols() == k_p && p_zr_given_y.rows() == num_users &&
                  p_zr_given_y.cols() == k_r && p_zpref_given_zp_zx.rows() == k_p * k_x &&
                  p_zpref_given_zp_zx.cols() == k_pref &&
                  p_r_given_zr_zpref.rows() == k_r * k_pref && p_r_given_zr_zpref.cols() == R;
  if (!ok) throw ValidationError("decoupled-model tables have inconsistent shapes");
}

double dm_joint_prob(const DmParams& params, ItemId item, Rating rating,
                     std::span<const double> pref_profile,
                     std::span<const double> rating_profile) {
  check_observation(params, item, rating);
  if (pref_profile.size() != params.k_p || rating_profile.size() != params.k_r)
    throw BoundsError("user profile does not match the model's class counts");
  const DmTables t(params, 1.0);
  DmScratch s(t);
  t.item_weights(item, s.w);
  item_side(t, pref_profile, s.w, s);
  return rating_side(t, rating_profile, rating, s);
}

double dm_joint_prob(const DmParams& params, UserId user, ItemId item, Rating rating) {
  if (user >= params.num_users)
    throw BoundsError("user id " + std::to_string(user) + " out of range for the model");
  return dm_joint_prob(params, item, rating, params.p_zp_given_y.row(user),
                       params.p_zr_given_y.row(user));
}

double dm_log_likelihood(const DmParams& params, const RatingTable& table) {
  const DmTables t(params, 1.0);
  DmScratch s(t);
  double ll = 0.0;
  for (const auto& tr : table.triples()) {
    check_observation(params, tr.item, tr.rating);
    t.item_weights(tr.item, s.w);
    item_side(t, params.p_zp_given_y.row(tr.user), s.w, s);
    ll += std::log(rating_side(t, params.p_zr_given_y.row(tr.user), tr.rating, s));
  }
  return ll;
}

LatentPosterior dm_e_step(const DmParams& params, const RatingTable& table, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("beta must lie in (0, 1]");
  const DmTables t(params, beta);
  const ProbTable users_p = params.p_zp_given_y.powered(beta);
  const ProbTable users_r = params.p_zr_given_y.powered(beta);
  DmScratch s(t);
  const std::size_t kp = t.k_p, kr = t.k_r, kx = t.k_x, kq = t.k_pref;
  LatentPosterior post(table.size(), {kp, kr, kx, kq});

  for (std::size_t l = 0; l < table.size(); ++l) {
    const auto& tr = table.triple(l);
    check_observation(params, tr.item, tr.rating);
    t.item_weights(tr.item, s.w);
    item_side(t, users_p.row(tr.user), s.w, s);
    const double z = rating_side(t, users_r.row(tr.user), tr.rating, s);
    if (!(z > 0.0) || !std::isfinite(z))
      throw NumericError("triple " + std::to_string(l) + " has no posterior mass", l);
    const double inv = 1.0 / z;
    auto q = post.row(l);
    for (std::size_t zp = 0; zp < kp; ++zp)
      for (std::size_t zr = 0; zr < kr; ++zr)
        for (std::size_t zx = 0; zx < kx; ++zx)
          for (std::size_t k = 0; k < kq; ++k)
            q[((zp * kr + zr) * kx + zx) * kq + k] =
                s.f[(zp * kx + zx) * kq + k] * s.g[zr * kq + k] * inv;
  }
  return post;
}

DmParams dm_m_step(const LatentPosterior& posterior, const RatingTable& table,
                   std::size_t* uniform_fallbacks) {
  const auto& d = posterior.dims();
  if (d.size() != 4 || posterior.observations() != table.size())
    throw ValidationError("posterior does not match the rating table");
  DmParams p = DmParams::uniform(table.num_users(), table.num_items(), table.scale(),
                                 DmSizes{d[2], d[0], d[1], d[3]});
  DmCounts st(p);
  const std::size_t kp = d[0], kr = d[1], kx = d[2], kq = d[3];
  for (std::size_t l = 0; l < table.size(); ++l) {
    const auto& tr = table.triple(l);
    const auto q = posterior.row(l);
    const auto rcol = static_cast<std::size_t>(tr.rating - 1);
    for (std::size_t zp = 0; zp < kp; ++zp)
      for (std::size_t zr = 0; zr < kr; ++zr)
        for (std::size_t zx = 0; zx < kx; ++zx)
          for (std::size_t k = 0; k < kq; ++k) {
            const double m = q[((zp * kr + zr) * kx + zx) * kq + k];
            st.n_zx(0, zx) += m;
            st.n_x_zx(zx, tr.item) += m;
            st.n_zp(tr.user, zp) += m;
            st.n_zr(tr.user, zr) += m;
            st.n_pref(zp * kx + zx, k) += m;
            st.n_r_t(rcol, zr * kq + k) += m;
          }
  }
  const std::size_t fb = st.finalize(p);
  if (uniform_fallbacks) *uniform_fallbacks = fb;
  return p;
}

DmEm::DmEm(const RatingTable& table, DmParams& params)
    : table_(table), params_(params), stats_(std::make_unique<Stats>(params)) {
  params.check_shapes();
  if (table.num_users() > params.num_users || table.num_items() > params.num_items ||
      table.scale() > params.scale)
    throw ValidationError("rating table does not fit the model dimensions");
}

DmEm::~DmEm() = default;

double DmEm::e_step(double beta) {
  stats_->clear();
  const DmTables t(params_, beta);
  const bool tempered = beta != 1.0;
  std::optional<DmTables> t1;
  if (tempered) t1.emplace(params_, 1.0);
  const ProbTable users_p = params_.p_zp_given_y.powered(beta);
  const ProbTable users_r = params_.p_zr_given_y.powered(beta);
  DmScratch s(t);
  std::optional<DmScratch> s1;
  if (tempered) s1.emplace(t);

  const std::size_t kp = t.k_p, kr = t.k_r, kx = t.k_x, kq = t.k_pref;
  auto& st = *stats_;
  double ll = 0.0;
  for (std::size_t l = 0; l < table_.size(); ++l) {
    const auto& tr = table_.triple(l);
    t.item_weights(tr.item, s.w);
    item_side(t, users_p.row(tr.user), s.w, s);
    const double z = rating_side(t, users_r.row(tr.user), tr.rating, s);
    if (!(z > 0.0) || !std::isfinite(z))
      throw NumericError("triple " + std::to_string(l) + " has no posterior mass", l);
    if (tempered) {
      t1->item_weights(tr.item, s1->w);
      item_side(*t1, params_.p_zp_given_y.row(tr.user), s1->w, *s1);
      ll += std::log(rating_side(*t1, params_.p_zr_given_y.row(tr.user), tr.rating, *s1));
    } else {
      ll += std::log(z);
    }

    const double inv = 1.0 / z;
    for (std::size_t zp = 0; zp < kp; ++zp) {
      double user_mass = 0.0;
      for (std::size_t zx = 0; zx < kx; ++zx) {
        const std::size_t row = zp * kx + zx;
        const auto fr = s.f_row(row, kq);
        simd::mul_axpy(inv, fr, s.G, st.n_pref.row(row));
        const double m = simd::dot(fr, s.G) * inv;
        st.n_zx(0, zx) += m;
        st.n_x_zx(zx, tr.item) += m;
        user_mass += m;
      }
      st.n_zp(tr.user, zp) += user_mass;
    }
    auto nr = st.n_r_t.row(static_cast<std::size_t>(tr.rating - 1));
    for (std::size_t zr = 0; zr < kr; ++zr) {
      const auto gr = s.g_row(zr, kq);
      simd::mul_axpy(inv, gr, s.F, nr.subspan(zr * kq, kq));
      st.n_zr(tr.user, zr) += simd::dot(gr, s.F) * inv;
    }
  }
  return ll;
}

std::size_t DmEm::m_step() { return stats_->finalize(params_); }

void DmEm::perturb(std::mt19937_64& rng, double magnitude) {
  for (auto* t : {&params_.p_zx, &params_.p_x_given_zx, &params_.p_zp_given_y,
                  &params_.p_zr_given_y, &params_.p_zpref_given_zp_zx,
                  &params_.p_r_given_zr_zpref})
    perturb_rows(*t, rng, magnitude);
}

DmFit dm_train(const RatingTable& table, DmSizes sizes,
               const std::optional<AnnealSchedule>& schedule,
               const ConvergenceCriterion& criterion, std::uint64_t seed,
               const EmObserver& observer) {
  if (table.empty()) throw ValidationError("cannot train on an empty rating table");
  std::mt19937_64 rng(seed);
  DmFit fit{DmParams::random(table.num_users(), table.num_items(), table.scale(), sizes, rng), {}};
  DmEm em(table, fit.params);
  fit.trace = run_em(em, schedule, criterion, seed + 1, observer);
  return fit;
}

struct DmPredictor::Impl {
  DmParams params;
  DmTables tables;
  explicit Impl(const DmParams& p) : params(p), tables(p, 1.0) {}
};

DmPredictor::DmPredictor(const DmParams& params) {
  params.check_shapes();
  impl_ = std::make_unique<Impl>(params);
}
DmPredictor::~DmPredictor() = default;
DmPredictor::DmPredictor(DmPredictor&&) noexcept = default;
DmPredictor& DmPredictor::operator=(DmPredictor&&) noexcept = default;

DmUserProfile DmPredictor::fold_in(std::span<const ItemRating> observed, double alpha,
                                   const ConvergenceCriterion& criterion) const {
  if (observed.empty()) throw FoldInError("fold-in needs at least one observed rating");
  if (!(alpha >= 0.0)) throw ValidationError("smoothing alpha must be non-negative");
  criterion.validate();
  const auto& p = impl_->params;
  const auto& t = impl_->tables;
  for (const auto& o : observed) check_observation(p, o.item, o.rating);

  DmUserProfile prof{std::vector<double>(t.k_p, 1.0 / double(t.k_p)),
                     std::vector<double>(t.k_r, 1.0 / double(t.k_r))};
  DmScratch s(t);
  std::vector<double> n_p(t.k_p), n_r(t.k_r);
  double previous = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t it = 0; it < criterion.max_iters; ++it) {
    std::fill(n_p.begin(), n_p.end(), 0.0);
    std::fill(n_r.begin(), n_r.end(), 0.0);
    double ll = 0.0;
    for (const auto& o : observed) {
      if (!(t.item_weights(o.item, s.w) > 0.0)) std::copy(t.zx.begin(), t.zx.end(), s.w.begin());
      item_side(t, prof.pref, s.w, s);
      const double z = rating_side(t, prof.rating, o.rating, s);
      if (!(z > 0.0)) continue;
      ll += std::log(z);
      const double inv = 1.0 / z;
      for (std::size_t zp = 0; zp < t.k_p; ++zp) {
        double m = 0.0;
        for (std::size_t zx = 0; zx < t.k_x; ++zx)
          m += simd::dot(s.f_row(zp * t.k_x + zx, t.k_pref), s.G);
        n_p[zp] += m * inv;
      }
      for (std::size_t zr = 0; zr < t.k_r; ++zr)
        n_r[zr] += simd::dot(s.g_row(zr, t.k_pref), s.F) * inv;
    }

    const auto update = [alpha](std::vector<double>& dst, const std::vector<double>& counts) {
      const double total = std::accumulate(counts.begin(), counts.end(), 0.0) +
                           alpha * static_cast<double>(counts.size());
      if (!(total > 0.0)) return;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = (counts[k] + alpha) / total;
    };
    update(prof.pref, n_p);
    update(prof.rating, n_r);

    if (std::isfinite(previous) &&
        std::abs(ll - previous) / std::max(std::abs(previous), 1e-300) <
            criterion.rel_loglik_tol)
      break;
    previous = ll;
  }
  return prof;
}

std::vector<double> DmPredictor::rating_distribution(const DmUserProfile& profile,
                                                     ItemId item) const {
  const auto& p = impl_->params;
  const auto& t = impl_->tables;
  if (item >= p.num_items)
    throw BoundsError("item id " + std::to_string(item) + " out of range for the model");
  if (profile.pref.size() != t.k_p || profile.rating.size() != t.k_r)
    throw BoundsError("user profile does not match the model's class counts");
  DmScratch s(t);
  if (!(t.item_weights(item, s.w) > 0.0)) std::copy(t.zx.begin(), t.zx.end(), s.w.begin());
  item_side(t, profile.pref, s.w, s);
  std::vector<double> dist(static_cast<std::size_t>(t.scale));
  for (int r = 1; r <= t.scale; ++r)
    dist[static_cast<std::size_t>(r - 1)] = rating_side(t, profile.rating, r, s);
  normalize(dist);
  return dist;
}

double DmPredictor::predict(const DmUserProfile& profile, ItemId item, PredictMode mode) const {
  return decide(rating_distribution(profile, item), mode);
}

DmUserProfile dm_fold_in(const DmParams& params, std::span<const ItemRating> observed,
                         double alpha, const ConvergenceCriterion& criterion) {
  return DmPredictor(params).fold_in(observed, alpha, criterion);
}

double dm_predict(const DmParams& params, const DmUserProfile& profile, ItemId item,
                  PredictMode mode) {
  return DmPredictor(params).predict(profile, item, mode);
}

DmSample dm_synthesize(const DmParams& params, std::size_t num_users,
                       std::size_t ratings_per_user, std::uint64_t seed) {
  params.check_shapes();
  if (params.num_users == 0 && num_users > 0)
    throw InfeasibleError("model has no user rows to draw classes from");
  if (ratings_per_user > params.num_items)
    throw InfeasibleError("cannot draw " + std::to_string(ratings_per_user) +
                          " distinct items from " + std::to_string(params.num_items));
  std::size_t support = 0;
  for (std::size_t x = 0; x < params.num_items; ++x) {
    double px = 0.0;
    for (std::size_t zx = 0; zx < params.k_x; ++zx)
      px += params.p_zx(0, zx) * params.p_x_given_zx(zx, x);
    if (px > 0.0) ++support;
  }
  if (support < ratings_per_user)
    throw InfeasibleError("only " + std::to_string(support) +
                          " items have positive probability; cannot draw " +
                          std::to_string(ratings_per_user) + " distinct items per user");

  using Dist = std::discrete_distribution<std::size_t>;
  const auto make = [](std::span<const double> w) { return Dist(w.begin(), w.end()); };
  std::mt19937_64 rng(seed);
  Dist d_zx = make(params.p_zx.row(0));
  std::vector<Dist> d_x, d_pref, d_r;
  for (std::size_t zx = 0; zx < params.k_x; ++zx) d_x.push_back(make(params.p_x_given_zx.row(zx)));
  for (std::size_t r = 0; r < params.p_zpref_given_zp_zx.rows(); ++r)
    d_pref.push_back(make(params.p_zpref_given_zp_zx.row(r)));
  for (std::size_t r = 0; r < params.p_r_given_zr_zpref.rows(); ++r)
    d_r.push_back(make(params.p_r_given_zr_zpref.row(r)));

  const std::size_t max_attempts = 1000 + 50 * params.num_items;
  DmSample out;
  std::vector<RatingTriple> triples;
  triples.reserve(num_users * ratings_per_user);
  std::vector<char> used(params.num_items, 0);
  for (std::size_t u = 0; u < num_users; ++u) {
    const std::size_t row = u % params.num_users;
    const auto zp = make(params.p_zp_given_y.row(row))(rng);
    const auto zr = make(params.p_zr_given_y.row(row))(rng);
    out.pref_class.push_back(static_cast<std::uint32_t>(zp));
    out.rating_class.push_back(static_cast<std::uint32_t>(zr));
    std::fill(used.begin(), used.end(), 0);
    for (std::size_t k = 0; k < ratings_per_user; ++k) {
      for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= max_attempts)
          throw InfeasibleError("could not draw a fresh item for synthetic user " +
                                std::to_string(u));
        const auto zx = d_zx(rng);
        const auto x = d_x[zx](rng);
        if (used[x]) continue;
        const auto level = d_pref[params.pref_row(zp, zx)](rng);
        const auto r = d_r[params.rating_row(zr, level)](rng);
        used[x] = 1;
        triples.push_back({UserId(u), ItemId(x), static_cast<Rating>(r + 1)});
        break;
      }
    }
  }
  std::vector<std::string> user_labels, item_labels;
  for (std::size_t u = 0; u < num_users; ++u) user_labels.push_back("u" + std::to_string(u));
  for (std::size_t x = 0; x < params.num_items; ++x) item_labels.push_back("i" + std::to_string(x));
  out.table = RatingTable::build(num_users, params.num_items, params.scale, std::move(triples),
                                 std::move(user_labels), std::move(item_labels));
  return out;
}

DmParams make_separated_params(const SeparatedDesign& design, std::uint64_t seed) {
  const DmSizes sizes = design.sizes.resolved(design.scale);
  DmParams p = DmParams::uniform(design.num_users, design.num_items, design.scale, sizes);
  std::mt19937_64 rng(seed);
  const auto spread_row = [](std::span<double> row, std::size_t home, double purity) {
    if (row.size() == 1) {
      row[0] = 1.0;
      return;
    }
    const double rest = (1.0 - purity) / static_cast<double>(row.size() - 1);
    std::fill(row.begin(), row.end(), rest);
    row[home] = purity;
  };

  // Items: item x belongs to class x % K_x.
  for (std::size_t zx = 0; zx < p.k_x; ++zx) {
    auto row = p.p_x_given_zx.row(zx);
    std::size_t own = 0;
    for (std::size_t x = 0; x < p.num_items; ++x) own += (x % p.k_x == zx);
    const std::size_t other = p.num_items - own;
    for (std::size_t x = 0; x < p.num_items; ++x) {
      if (x % p.k_x == zx)
        row[x] = (other == 0 ? 1.0 : design.item_purity) / static_cast<double>(own);
      else
        row[x] = (1.0 - design.item_purity) / static_cast<double>(other);
    }
  }
  if (p.num_items < p.k_x) p.p_x_given_zx.normalize_rows();

  // Users: balanced over (z_p, z_r) combinations, in shuffled order.
  std::vector<std::size_t> combo(p.num_users);
  for (std::size_t u = 0; u < p.num_users; ++u) combo[u] = u % (p.k_p * p.k_r);
  std::shuffle(combo.begin(), combo.end(), rng);
  for (std::size_t u = 0; u < p.num_users; ++u) {
    spread_row(p.p_zp_given_y.row(u), combo[u] / p.k_r, design.user_purity);
    spread_row(p.p_zr_given_y.row(u), combo[u] % p.k_r, design.user_purity);
  }

  // Preference classes disagree: the dominant level shifts with z_p.
  std::uniform_int_distribution<std::size_t> level_draw(0, p.k_pref - 1);
  for (std::size_t zp = 0; zp < p.k_p; ++zp)
    for (std::size_t zx = 0; zx < p.k_x; ++zx) {
      const std::size_t level =
          zp < p.k_pref ? (zp + zx) % p.k_pref : level_draw(rng);
      spread_row(p.p_zpref_given_zp_zx.row(p.pref_row(zp, zx)), level, design.pref_purity);
    }

  // Ratings: the center moves up with the preference level and with the rater
  // class offset.
  const double span = static_cast<double>(design.scale - 1);
  for (std::size_t zr = 0; zr < p.k_r; ++zr)
    for (std::size_t k = 0; k < p.k_pref; ++k) {
      const double pref_pos = p.k_pref > 1 ? double(k) / double(p.k_pref - 1) : 0.5;
      const double bias_pos = p.k_r > 1 ? double(zr) / double(p.k_r - 1) : 0.5;
      const double center =
          1.0 + span * (design.pref_span * pref_pos + (1.0 - design.pref_span) * bias_pos);
      auto row = p.p_r_given_zr_zpref.row(p.rating_row(zr, k));
      for (int r = 1; r <= design.scale; ++r) {
        const double d = (r - center) / design.rating_spread;
        row[static_cast<std::size_t>(r - 1)] = std::exp(-0.5 * d * d);
      }
      normalize(row);
    }
  return p;
}

}  // namespace prefcf
