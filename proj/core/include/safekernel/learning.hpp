#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "safekernel/supervisor.hpp"
#include "safekernel/value_function.hpp"

namespace safekernel {

/// Lower bound on fitted variances (value units squared). Keeps the Gaussian
/// likelihood bounded when every observation coincides.
inline constexpr double kVarianceFloor = 1e-6;

struct GaussianFit {
  double mu = 0.0;
  double sigma2 = 0.0;
};

/// Closed-form maximum-likelihood mean and (biased) variance. Needs p >= 2.
GaussianFit fit_mu_sigma(std::span<const double> values);

/// Joint Gaussian log-density of independent observations.
double log_likelihood(std::span<const double> values, double mu, double sigma2);

struct CandidateLikelihood {
  double mu_hat = 0.0;       // clamped at zero (MAP prior on mu)
  double sigma2_hat = 0.0;
  double log_likelihood = 0.0;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
};

/// Scores one value function against the intervention records, evaluated in
/// each record's obstacle frame. Records outside the grid are excluded;
/// more than 10% exclusions is an error.
CandidateLikelihood candidate_likelihood(const ValueFunction& vf,
                                         std::span<const InterventionRecord> records);

struct CandidateScore {
  double omega_max = 0.0;
  double mu_hat = 0.0;
  double sigma2_hat = 0.0;
  double log_likelihood = 0.0;
  bool conservative = true;
};

struct SupervisorFit {
  std::size_t library_index = 0;
  double omega_max = 0.0;
  double mu_hat = 0.0;
  double sigma2_hat = 0.0;
  double log_likelihood = 0.0;
  std::vector<CandidateScore> per_candidate;
  std::size_t n_records = 0;
  std::size_t n_excluded = 0;
};

/// Most likely library member. With enforce_conservative, candidates whose
/// unsafe region does not cover true_vf's are dropped first. Ties go to the
/// smaller omega_max.
SupervisorFit select_value_function(std::span<const ValueFunction> library,
                                    std::span<const InterventionRecord> records,
                                    const ValueFunction* true_vf, bool enforce_conservative);

/// Fraction of records the safe set {V > level} contains, i.e. intervention
/// states a controller at that level would not steer away from.
double predicted_fp_fraction(const ValueFunction& vf, double level,
                             std::span<const InterventionRecord> records);

}  // namespace safekernel
