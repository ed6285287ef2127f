#include "prefcf/bayes_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefcf/error.hpp"

namespace prefcf {
namespace {

void check_item_rating(const BcParams& p, ItemId item, Rating rating) {
  if (item >= p.num_items)
    throw BoundsError("item id " + std::to_string(item) + " out of range for the model");
  if (rating < 1 || rating > p.scale)
    throw BoundsError("rating " + std::to_string(rating) + " outside 1.." +
                      std::to_string(p.scale));
}

// log P(C) + sum_i log P(r_i | C, i) for every class.
std::vector<double> class_log_joint(const BcParams& p, std::span<const ItemRating> ratings) {
  std::vector<double> lj(p.k);
  for (std::size_t c = 0; c < p.k; ++c) {
    double s = std::log(p.p_c(0, c));
    for (const auto& o : ratings) {
      check_item_rating(p, o.item, o.rating);
      s += std::log(p.p_r_given_c_item(p.row(c, o.item), static_cast<std::size_t>(o.rating - 1)));
    }
    lj[c] = s;
  }
  return lj;
}

}  // namespace

BcParams BcParams::uniform(std::size_t num_items, int scale, std::size_t k) {
  if (scale < 1) throw ValidationError("rating scale must be at least 1");
  if (k < 1) throw ValidationError("class count must be at least 1");
  BcParams p;
  p.num_items = num_items;
  p.scale = scale;
  p.k = k;
  p.p_c = ProbTable::uniform(1, k);
  p.p_r_given_c_item = ProbTable::uniform(k * num_items, static_cast<std::size_t>(scale));
  return p;
}

BcParams BcParams::random(std::size_t num_items, int scale, std::size_t k, std::mt19937_64& rng) {
  BcParams p = uniform(num_items, scale, k);
  p.p_c.randomize(rng);
  p.p_r_given_c_item.randomize(rng);
  return p;
}

double BcParams::max_normalization_error() const {
  return std::max(p_c.max_row_error(), p_r_given_c_item.max_row_error());
}

void BcParams::check_shapes() const {
  const bool ok = scale >= 1 && k >= 1 && p_c.rows() == 1 && p_c.cols() == k &&
                  p_r_given_c_item.rows() == k * num_items &&
                  p_r_given_c_item.cols() == static_cast<std::size_t>(scale);
  if (!ok) throw ValidationError("clustering-model tables have inconsistent shapes");
}

double bc_user_joint(const BcParams& params, std::span<const ItemRating> ratings) {
  return std::exp(bc_user_log_likelihood(params, ratings));
}

double bc_user_log_likelihood(const BcParams& params, std::span<const ItemRating> ratings) {
  return log_sum_exp(class_log_joint(params, ratings));
}

double bc_log_likelihood(const BcParams& params, const RatingTable& table) {
  double ll = 0.0;
  for (std::size_t u = 0; u < table.num_users(); ++u)
    ll += bc_user_log_likelihood(params, table.profile(UserId(u)));
  return ll;
}

double bc_log_prior(const BcParams& params) {
  double s = 0.0;
  for (double v : params.p_r_given_c_item.values()) s += std::log(v);
  return s;
}

std::vector<double> bc_posterior(const BcParams& params, std::span<const ItemRating> ratings,
                                 double beta) {
  auto lj = class_log_joint(params, ratings);
  for (double& v : lj) v *= beta;
  const double z = log_sum_exp(lj);
  if (!std::isfinite(z)) throw NumericError("rating vector has no posterior mass", 0);
  for (double& v : lj) v = std::exp(v - z);
  return lj;
}

LatentPosterior bc_e_step(const BcParams& params, const RatingTable& table, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("beta must lie in (0, 1]");
  LatentPosterior post(table.num_users(), {params.k});
  for (std::size_t u = 0; u < table.num_users(); ++u) {
    std::vector<double> q;
    try {
      q = bc_posterior(params, table.profile(UserId(u)), beta);
    } catch (const NumericError&) {
      throw NumericError("user " + std::to_string(u) + " has no posterior mass", u);
    }
    std::copy(q.begin(), q.end(), post.row(u).begin());
  }
  return post;
}

BcParams bc_m_step(const LatentPosterior& posterior, const RatingTable& table,
                   std::size_t* uniform_fallbacks) {
  const auto& d = posterior.dims();
  if (d.size() != 1 || posterior.observations() != table.num_users())
    throw ValidationError("posterior does not match the rating table");
  const std::size_t k = d[0];
  BcParams p = BcParams::uniform(table.num_items(), table.scale(), k);
  p.p_c.fill(0.0);
  p.p_r_given_c_item.fill(1.0);  // add-one smoothing
  for (std::size_t u = 0; u < table.num_users(); ++u) {
    const auto q = posterior.row(u);
    for (std::size_t c = 0; c < k; ++c) {
      p.p_c(0, c) += q[c];
      for (const auto& o : table.profile(UserId(u)))
        p.p_r_given_c_item(p.row(c, o.item), static_cast<std::size_t>(o.rating - 1)) += q[c];
    }
  }
  std::size_t fb = p.p_c.normalize_rows();
  fb += p.p_r_given_c_item.normalize_rows();
  if (uniform_fallbacks) *uniform_fallbacks = fb;
  return p;
}

BcEm::BcEm(const RatingTable& table, BcParams& params) : table_(table), params_(params) {
  params.check_shapes();
  if (table.num_items() != params.num_items || table.scale() != params.scale)
    throw ValidationError("rating table does not match the model dimensions");
}

double BcEm::e_step(double beta) {
  post_ = bc_e_step(params_, table_, beta);
  return bc_log_likelihood(params_, table_) + bc_log_prior(params_);
}

std::size_t BcEm::m_step() {
  std::size_t fb = 0;
  params_ = bc_m_step(post_, table_, &fb);
  return fb;
}

void BcEm::perturb(std::mt19937_64& rng, double magnitude) {
  perturb_rows(params_.p_c, rng, magnitude);
  perturb_rows(params_.p_r_given_c_item, rng, magnitude);
}

BcFit bc_train(const RatingTable& table, std::size_t k,
               const std::optional<AnnealSchedule>& schedule,
               const ConvergenceCriterion& criterion, std::uint64_t seed,
               const EmObserver& observer) {
  if (table.empty()) throw ValidationError("cannot train on an empty rating table");
  std::mt19937_64 rng(seed);
  BcFit fit{BcParams::random(table.num_items(), table.scale(), k, rng), {}};
  BcEm em(table, fit.params);
  fit.trace = run_em(em, schedule, criterion, seed + 1, observer);
  return fit;
}

std::vector<double> bc_rating_distribution(const BcParams& params,
                                           std::span<const ItemRating> observed, ItemId item) {
  check_item_rating(params, item, 1);
  const auto post = bc_posterior(params, observed);
  std::vector<double> dist(static_cast<std::size_t>(params.scale), 0.0);
  for (std::size_t c = 0; c < params.k; ++c) {
    const auto row = params.p_r_given_c_item.row(params.row(c, item));
    for (std::size_t r = 0; r < dist.size(); ++r) dist[r] += post[c] * row[r];
  }
  normalize(dist);
  return dist;
}

double bc_predict(const BcParams& params, std::span<const ItemRating> observed, ItemId item,
                  PredictMode mode) {
  return decide(bc_rating_distribution(params, observed, item), mode);
}

}  // namespace prefcf
