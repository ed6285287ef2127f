#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "prefcf/prob_table.hpp"

namespace prefcf {

// Per-observation responsibilities over a product of latent domains. The
// configuration index is row-major over `dims`.
class LatentPosterior {
 public:
  LatentPosterior() = default;
  LatentPosterior(std::size_t observations, std::vector<std::size_t> dims);

  std::size_t observations() const noexcept { return width_ == 0 ? 0 : resp_.size() / width_; }
  std::size_t width() const noexcept { return width_; }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }

  std::span<double> row(std::size_t l) noexcept { return {resp_.data() + l * width_, width_}; }
  std::span<const double> row(std::size_t l) const noexcept {
    return {resp_.data() + l * width_, width_};
  }

 private:
  std::vector<std::size_t> dims_;
  std::size_t width_ = 0;
  std::vector<double> resp_;
};

// Deterministic annealing: E-step posteriors are tempered as joint^beta and
// renormalised, with beta rising geometrically to beta_max.
struct AnnealSchedule {
  double beta_start = 0.5;
  double beta_growth = 1.2;
  double beta_max = 1.0;
  std::size_t inner_iters_per_beta = 10;
  // Multiplicative jitter (log-normal with this standard deviation) applied to
  // the parameters whenever beta moves up a level. At low beta the tempered
  // E-step pulls the model onto its symmetric fixed point, which plain EM can
  // never leave.
  double perturbation = 0.3;

  void validate() const;
  // Distinct beta levels below beta_max, in order; beta_max itself is implied.
  std::vector<double> levels() const;
};

struct ConvergenceCriterion {
  std::size_t max_iters = 500;
  double rel_loglik_tol = 1e-6;

  void validate() const;
};

struct TrainTrace {
  double initial_loglik = 0.0;
  // One entry per full iteration: log-likelihood after the update, and the
  // beta used by that update's E-step.
  std::vector<double> loglik;
  std::vector<double> beta;
  std::size_t iterations = 0;
  bool converged = false;
  // M-step cells that had no mass and fell back to a uniform distribution.
  std::size_t uniform_fallbacks = 0;

  double final_loglik() const { return loglik.empty() ? initial_loglik : loglik.back(); }
};

// What run_em needs from a latent-class model. e_step() must leave the
// sufficient statistics of the tempered posterior ready for the next m_step()
// and return the untempered log-likelihood of the current parameters.
class EmModel {
 public:
  virtual ~EmModel() = default;
  virtual double e_step(double beta) = 0;
  // Returns the number of uniform fallbacks taken.
  virtual std::size_t m_step() = 0;
  // Jitters the parameters (see AnnealSchedule::perturbation).
  virtual void perturb(std::mt19937_64& rng, double magnitude) = 0;
};

struct EmProgress {
  std::size_t iteration;
  double beta;
  double loglik;
};

using EmObserver = std::function<void(const EmProgress&)>;

// Alternates M- and E-steps until the relative log-likelihood change at beta = 1
// drops below the tolerance or max_iters updates have been made. Parameters are
// updated in place; the model must already be initialised. `seed` drives the
// annealing jitter. Throws NumericError on a non-finite log-likelihood.
TrainTrace run_em(EmModel& model, const std::optional<AnnealSchedule>& schedule,
                  const ConvergenceCriterion& criterion, std::uint64_t seed = 0,
                  const EmObserver& observer = {});

// Multiplies every entry by exp(magnitude * N(0, 1)) and renormalises the rows.
void perturb_rows(ProbTable& table, std::mt19937_64& rng, double magnitude);

// True when every step of `trace` taken at beta == 1 is non-decreasing within
// `rel_slack` relative to the previous value.
bool loglik_monotone(const TrainTrace& trace, double rel_slack = 1e-9);

// EM for the mixture weights q of one user given fixed class likelihoods
// evidence(l, k) = P(observation l | class k). Each update adds `alpha`
// pseudo-counts per class. Starts from uniform weights.
std::vector<double> fold_in_mixture(const ProbTable& evidence, double alpha,
                                    const ConvergenceCriterion& criterion);

}  // namespace prefcf
