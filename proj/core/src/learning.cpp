#include "safekernel/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "safekernel/errors.hpp"
#include "safekernel/reachability.hpp"

namespace safekernel {

namespace {

double mean_of(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double mean_square_about(std::span<const double> values, double center) {
  double sum = 0.0;
  for (double v : values) sum += (v - center) * (v - center);
  return sum / static_cast<double>(values.size());
}

}  // namespace

GaussianFit fit_mu_sigma(std::span<const double> values) {
  if (values.size() < 2) {
    throw Error(ErrorKind::insufficient_data,
                "need at least 2 observations to fit mu and sigma^2, got " + std::to_string(values.size()));
  }
  const double mu = mean_of(values);
  return {mu, std::max(mean_square_about(values, mu), kVarianceFloor)};
}

double log_likelihood(std::span<const double> values, double mu, double sigma2) {
  if (!(sigma2 > 0.0)) throw Error(ErrorKind::invalid_argument, "sigma^2 must be positive");
  const double p = static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return -0.5 * p * std::log(2.0 * std::numbers::pi * sigma2) - ss / (2.0 * sigma2);
}

CandidateLikelihood candidate_likelihood(const ValueFunction& vf,
                                         std::span<const InterventionRecord> records) {
  if (records.size() < 2) {
    throw Error(ErrorKind::insufficient_data, "need at least 2 intervention records");
  }
  std::vector<double> values;
  values.reserve(records.size());
  std::size_t excluded = 0;
  for (const InterventionRecord& rec : records) {
    const InterpolatedValue v = interpolate_value(vf, rec.relative_state);
    if (v.out_of_domain) {
      ++excluded;
      continue;
    }
    values.push_back(v.value);
  }
  if (static_cast<double>(excluded) > 0.1 * static_cast<double>(records.size())) {
    throw Error(ErrorKind::out_of_domain, std::to_string(excluded) + " of " +
                                              std::to_string(records.size()) +
                                              " records fall outside the value-function grid");
  }

  CandidateLikelihood out;
  out.n_used = values.size();
  out.n_excluded = excluded;
  if (values.size() < 2) throw Error(ErrorKind::insufficient_data, "fewer than 2 in-domain records");
  // MAP under a prior with zero mass on negative mu: the optimum sits at
  // max(mean, 0), and the variance is re-estimated about that point.
  out.mu_hat = std::max(mean_of(values), 0.0);
  out.sigma2_hat = std::max(mean_square_about(values, out.mu_hat), kVarianceFloor);
  out.log_likelihood = log_likelihood(values, out.mu_hat, out.sigma2_hat);
  return out;
}

SupervisorFit select_value_function(std::span<const ValueFunction> library,
                                    std::span<const InterventionRecord> records,
                                    const ValueFunction* true_vf, bool enforce_conservative) {
  if (library.empty()) throw Error(ErrorKind::invalid_argument, "empty value-function library");
  if (records.size() < 2) throw Error(ErrorKind::insufficient_data, "need at least 2 intervention records");
  if (enforce_conservative && true_vf == nullptr) {
    throw Error(ErrorKind::invalid_argument, "conservative prior needs the true value function");
  }

  SupervisorFit fit;
  fit.n_records = records.size();
  bool have_best = false;
  for (std::size_t i = 0; i < library.size(); ++i) {
    const ValueFunction& vf = library[i];
    const CandidateLikelihood c = candidate_likelihood(vf, records);
    CandidateScore score{vf.omega_max, c.mu_hat, c.sigma2_hat, c.log_likelihood, true};
    if (true_vf != nullptr) score.conservative = is_superset_reachable(vf, *true_vf);
    fit.per_candidate.push_back(score);

    if (enforce_conservative && !score.conservative) continue;
    const bool better =
        !have_best || score.log_likelihood > fit.log_likelihood ||
        (score.log_likelihood == fit.log_likelihood && score.omega_max < fit.omega_max);
    if (better) {
      have_best = true;
      fit.library_index = i;
      fit.omega_max = score.omega_max;
      fit.mu_hat = score.mu_hat;
      fit.sigma2_hat = score.sigma2_hat;
      fit.log_likelihood = score.log_likelihood;
      fit.n_excluded = c.n_excluded;
    }
  }
  if (!have_best) {
    throw Error(ErrorKind::empty_feasible_set,
                "no library candidate is conservative with respect to the true value function");
  }
  return fit;
}

double predicted_fp_fraction(const ValueFunction& vf, double level,
                             std::span<const InterventionRecord> records) {
  if (records.empty()) throw Error(ErrorKind::invalid_argument, "no records to score");
  std::size_t inside = 0;
  for (const InterventionRecord& rec : records) {
    if (interpolate_value(vf, rec.relative_state).value > level) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(records.size());
}

}  // namespace safekernel
