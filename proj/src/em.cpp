#include "prefcf/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "prefcf/error.hpp"

namespace prefcf {

LatentPosterior::LatentPosterior(std::size_t observations, std::vector<std::size_t> dims)
    : dims_(std::move(dims)), width_(1) {
  for (auto d : dims_) width_ *= d;
  resp_.assign(observations * width_, 0.0);
}

void AnnealSchedule::validate() const {
  if (!(beta_start > 0.0 && beta_start <= 1.0))
    throw ConfigError("beta_start must lie in (0, 1]");
  if (!(beta_growth > 1.0)) throw ConfigError("beta_growth must exceed 1");
  if (!(beta_max > 0.0 && beta_max <= 1.0)) throw ConfigError("beta_max must lie in (0, 1]");
  if (beta_start > beta_max) throw ConfigError("beta_start must not exceed beta_max");
  if (inner_iters_per_beta < 1) throw ConfigError("inner_iters_per_beta must be at least 1");
  if (!(perturbation >= 0.0) || !std::isfinite(perturbation))
    throw ConfigError("perturbation must be non-negative");
}

std::vector<double> AnnealSchedule::levels() const {
  validate();
  std::vector<double> out;
  for (double b = beta_start; b < beta_max; b *= beta_growth) out.push_back(b);
  return out;
}

void ConvergenceCriterion::validate() const {
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(rel_loglik_tol > 0.0)) throw ConfigError("rel_loglik_tol must be positive");
}

TrainTrace run_em(EmModel& model, const std::optional<AnnealSchedule>& schedule,
                  const ConvergenceCriterion& criterion, std::uint64_t seed,
                  const EmObserver& observer) {
  criterion.validate();
  std::mt19937_64 rng(seed);
  const double jitter = schedule ? schedule->perturbation : 0.0;

  // beta used by the E-step whose statistics feed update number i (0-based).
  std::vector<double> betas;
  double final_beta = 1.0;
  if (schedule) {
    final_beta = schedule->beta_max;
    for (double b : schedule->levels())
      for (std::size_t k = 0; k < schedule->inner_iters_per_beta; ++k) betas.push_back(b);
  }
  const auto beta_at = [&](std::size_t i) { return i < betas.size() ? betas[i] : final_beta; };

  TrainTrace trace;
  trace.initial_loglik = model.e_step(beta_at(0));
  if (!std::isfinite(trace.initial_loglik))
    throw NumericError("non-finite log-likelihood at initialisation", 0);

  double previous = trace.initial_loglik;
  for (std::size_t it = 0; it < criterion.max_iters; ++it) {
    const double beta = beta_at(it);
    trace.uniform_fallbacks += model.m_step();
    if (jitter > 0.0 && beta_at(it + 1) > beta) model.perturb(rng, jitter);
    const double ll = model.e_step(beta_at(it + 1));
    if (!std::isfinite(ll))
      throw NumericError("non-finite log-likelihood at iteration " + std::to_string(it + 1),
                         it + 1);
    trace.loglik.push_back(ll);
    trace.beta.push_back(beta);
    trace.iterations = it + 1;
    if (observer) observer({it + 1, beta, ll});

    if (beta == final_beta) {
      const double scale = std::max(std::abs(previous), 1e-300);
      if (std::abs(ll - previous) / scale < criterion.rel_loglik_tol) {
        trace.converged = true;
        break;
      }
    }
    previous = ll;
  }
  return trace;
}

void perturb_rows(ProbTable& table, std::mt19937_64& rng, double magnitude) {
  std::normal_distribution<double> noise(0.0, magnitude);
  for (double& v : table.values()) v *= std::exp(noise(rng));
  table.normalize_rows();
}

bool loglik_monotone(const TrainTrace& trace, double rel_slack) {
  double previous = trace.initial_loglik;
  for (std::size_t i = 0; i < trace.loglik.size(); ++i) {
    const double ll = trace.loglik[i];
    if (trace.beta[i] == 1.0 && ll < previous - rel_slack * std::abs(previous)) return false;
    previous = ll;
  }
  return true;
}

std::vector<double> fold_in_mixture(const ProbTable& evidence, double alpha,
                                    const ConvergenceCriterion& criterion) {
  if (evidence.rows() == 0) throw FoldInError("fold-in needs at least one observation");
  if (!(alpha >= 0.0)) throw ValidationError("smoothing alpha must be non-negative");
  criterion.validate();
  const std::size_t k = evidence.cols();
  std::vector<double> q(k, 1.0 / static_cast<double>(k)), counts(k), joint(k);
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t it = 0; it < criterion.max_iters; ++it) {
    std::fill(counts.begin(), counts.end(), 0.0);
    double ll = 0.0;
    for (std::size_t l = 0; l < evidence.rows(); ++l) {
      const auto e = evidence.row(l);
      for (std::size_t c = 0; c < k; ++c) joint[c] = q[c] * e[c];
      const double z = std::accumulate(joint.begin(), joint.end(), 0.0);
      if (!(z > 0.0)) continue;
      ll += std::log(z);
      for (std::size_t c = 0; c < k; ++c) counts[c] += joint[c] / z;
    }
    const double total =
        std::accumulate(counts.begin(), counts.end(), 0.0) + alpha * static_cast<double>(k);
    if (total > 0.0)
      for (std::size_t c = 0; c < k; ++c) q[c] = (counts[c] + alpha) / total;
    if (std::isfinite(previous) &&
        std::abs(ll - previous) / std::max(std::abs(previous), 1e-300) <
            criterion.rel_loglik_tol)
      break;
    previous = ll;
  }
  return q;
}

}  // namespace prefcf
