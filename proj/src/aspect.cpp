#include "prefcf/aspect.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefcf/error.hpp"
#include "prefcf/simd.hpp"

namespace prefcf {
namespace {

void check_item_rating(const AmParams& p, ItemId item, Rating rating) {
  if (item >= p.num_items)
    throw BoundsError("item id " + std::to_string(item) + " out of range for the model");
  if (rating < 1 || rating > p.scale)
    throw BoundsError("rating " + std::to_string(rating) + " outside 1.." +
                      std::to_string(p.scale));
}

struct AmTables {
  std::vector<double> z;
  ProbTable x_t, y_t, r_t;  // M x K, N x K, R x K

  AmTables(const AmParams& p, double beta)
      : z(p.p_z.powered(beta).values()), x_t(p.p_x_given_z.powered(beta).transposed()),
        y_t(p.p_y_given_z.powered(beta).transposed()),
        r_t(p.p_r_given_z.powered(beta).transposed()) {}

  // out[z] = P(z) P(x|z) P(y|z) P(r|z); returns the total.
  double joint(const RatingTriple& tr, std::span<double> out) const {
    simd::mul(z, x_t.row(tr.item), out);
    simd::mul(out, y_t.row(tr.user), out);
    simd::mul(out, r_t.row(static_cast<std::size_t>(tr.rating - 1)), out);
    return simd::sum(out);
  }
};

}  // namespace

AmParams AmParams::uniform(std::size_t num_users, std::size_t num_items, int scale,
                           std::size_t k) {
  if (scale < 1) throw ValidationError("rating scale must be at least 1");
  if (k < 1) throw ValidationError("class count must be at least 1");
  AmParams p;
  p.num_users = num_users;
  p.num_items = num_items;
  p.scale = scale;
  p.k = k;
  p.p_z = ProbTable::uniform(1, k);
  p.p_x_given_z = ProbTable::uniform(k, num_items);
  p.p_y_given_z = ProbTable::uniform(k, num_users);
  p.p_r_given_z = ProbTable::uniform(k, static_cast<std::size_t>(scale));
  return p;
}

AmParams AmParams::random(std::size_t num_users, std::size_t num_items, int scale, std::size_t k,
                          std::mt19937_64& rng) {
  AmParams p = uniform(num_users, num_items, scale, k);
  p.p_z.randomize(rng);
  p.p_x_given_z.randomize(rng);
  p.p_y_given_z.randomize(rng);
  p.p_r_given_z.randomize(rng);
  return p;
}

double AmParams::max_normalization_error() const {
  double e = 0.0;
  for (const auto* t : {&p_z, &p_x_given_z, &p_y_given_z, &p_r_given_z})
    e = std::max(e, t->max_row_error());
  return e;
}

void AmParams::check_shapes() const {
  const bool ok = scale >= 1 && k >= 1 && p_z.rows() == 1 && p_z.cols() == k &&
                  p_x_given_z.rows() == k && p_x_given_z.cols() == num_items &&
                  p_y_given_z.rows() == k && p_y_given_z.cols() == num_users &&
                  p_r_given_z.rows() == k &&
                  p_r_given_z.cols() == static_cast<std::size_t>(scale);
  if (!ok) throw ValidationError("aspect-model tables have inconsistent shapes");
}

double am_joint_prob(const AmParams& params, UserId user, ItemId item, Rating rating) {
  check_item_rating(params, item, rating);
  if (user >= params.num_users)
    throw BoundsError("user id " + std::to_string(user) + " out of range for the model");
  std::vector<double> out(params.k);
  return AmTables(params, 1.0).joint({user, item, rating}, out);
}

double am_log_likelihood(const AmParams& params, const RatingTable& table) {
  const AmTables t(params, 1.0);
  std::vector<double> out(params.k);
  double ll = 0.0;
  for (const auto& tr : table.triples()) {
    check_item_rating(params, tr.item, tr.rating);
    ll += std::log(t.joint(tr, out));
  }
  return ll;
}

LatentPosterior am_e_step(const AmParams& params, const RatingTable& table, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("beta must lie in (0, 1]");
  if (table.num_users() > params.num_users)
    throw BoundsError("rating table has more users than the model");
  const AmTables t(params, beta);
  LatentPosterior post(table.size(), {params.k});
  for (std::size_t l = 0; l < table.size(); ++l) {
    const auto& tr = table.triple(l);
    check_item_rating(params, tr.item, tr.rating);
    auto q = post.row(l);
    const double z = t.joint(tr, q);
    if (!(z > 0.0) || !std::isfinite(z))
      throw NumericError("triple " + std::to_string(l) + " has no posterior mass", l);
    simd::scale(1.0 / z, q, q);
  }
  return post;
}

AmParams am_m_step(const LatentPosterior& posterior, const RatingTable& table,
                   std::size_t* uniform_fallbacks) {
  const auto& d = posterior.dims();
  if (d.size() != 1 || posterior.observations() != table.size())
    throw ValidationError("posterior does not match the rating table");
  const std::size_t k = d[0];
  AmParams p = AmParams::uniform(table.num_users(), table.num_items(), table.scale(), k);
  for (auto* t : {&p.p_z, &p.p_x_given_z, &p.p_y_given_z, &p.p_r_given_z}) t->fill(0.0);
  for (std::size_t l = 0; l < table.size(); ++l) {
    const auto& tr = table.triple(l);
    const auto q = posterior.row(l);
    for (std::size_t z = 0; z < k; ++z) {
      p.p_z(0, z) += q[z];
      p.p_x_given_z(z, tr.item) += q[z];
      p.p_y_given_z(z, tr.user) += q[z];
      p.p_r_given_z(z, static_cast<std::size_t>(tr.rating - 1)) += q[z];
    }
  }
  std::size_t fb = 0;
  for (auto* t : {&p.p_z, &p.p_x_given_z, &p.p_y_given_z, &p.p_r_given_z})
    fb += t->normalize_rows();
  if (uniform_fallbacks) *uniform_fallbacks = fb;
  return p;
}

AmEm::AmEm(const RatingTable& table, AmParams& params) : table_(table), params_(params) {
  params.check_shapes();
  if (table.num_users() != params.num_users || table.num_items() != params.num_items ||
      table.scale() != params.scale)
    throw ValidationError("rating table does not match the model dimensions");
}

double AmEm::e_step(double beta) {
  post_ = am_e_step(params_, table_, beta);
  return am_log_likelihood(params_, table_);
}

std::size_t AmEm::m_step() {
  std::size_t fb = 0;
  params_ = am_m_step(post_, table_, &fb);
  return fb;
}

void AmEm::perturb(std::mt19937_64& rng, double magnitude) {
  for (auto* t : {&params_.p_z, &params_.p_x_given_z, &params_.p_y_given_z, &params_.p_r_given_z})
    perturb_rows(*t, rng, magnitude);
}

AmFit am_train(const RatingTable& table, std::size_t k,
               const std::optional<AnnealSchedule>& schedule,
               const ConvergenceCriterion& criterion, std::uint64_t seed,
               const EmObserver& observer) {
  if (table.empty()) throw ValidationError("cannot train on an empty rating table");
  std::mt19937_64 rng(seed);
  AmFit fit{AmParams::random(table.num_users(), table.num_items(), table.scale(), k, rng), {}};
  AmEm em(table, fit.params);
  fit.trace = run_em(em, schedule, criterion, seed + 1, observer);
  return fit;
}

namespace {

// e[z] = P(x|z) P(r|z), with the item factor dropped for an item no class emits.
void item_rating_evidence(const AmParams& p, ItemId item, Rating rating, std::span<double> e) {
  double item_mass = 0.0;
  for (std::size_t z = 0; z < p.k; ++z) item_mass += p.p_x_given_z(z, item);
  const bool seen = item_mass > 0.0;
  for (std::size_t z = 0; z < p.k; ++z)
    e[z] = (seen ? p.p_x_given_z(z, item) : 1.0) *
           p.p_r_given_z(z, static_cast<std::size_t>(rating - 1));
}

}  // namespace

std::vector<double> am_fold_in(const AmParams& params, std::span<const ItemRating> observed,
                               double alpha, const ConvergenceCriterion& criterion) {
  if (observed.empty()) throw FoldInError("fold-in needs at least one observed rating");
  ProbTable evidence(observed.size(), params.k);
  for (std::size_t l = 0; l < observed.size(); ++l) {
    check_item_rating(params, observed[l].item, observed[l].rating);
    item_rating_evidence(params, observed[l].item, observed[l].rating, evidence.row(l));
  }
  return fold_in_mixture(evidence, alpha, criterion);
}

std::vector<double> am_rating_distribution(const AmParams& params, std::span<const double> q,
                                           ItemId item) {
  if (q.size() != params.k) throw BoundsError("mixture weights do not match the class count");
  check_item_rating(params, item, 1);
  std::vector<double> e(params.k), dist(static_cast<std::size_t>(params.scale));
  for (int r = 1; r <= params.scale; ++r) {
    item_rating_evidence(params, item, r, e);
    dist[static_cast<std::size_t>(r - 1)] = simd::dot(q, e);
  }
  normalize(dist);
  return dist;
}

double am_predict(const AmParams& params, std::span<const double> q, ItemId item,
                  PredictMode mode) {
  return decide(am_rating_distribution(params, q, item), mode);
}

}  // namespace prefcf
