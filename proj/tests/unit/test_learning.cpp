#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "safekernel/errors.hpp"
#include "safekernel/learning.hpp"
#include "safekernel/reachability.hpp"

using namespace safekernel;
using safekernel::testing::canonical_vf;
using safekernel::testing::field;

namespace {

const double kLogPeak = -0.5 * std::log(2.0 * std::numbers::pi);  // ln(1/sqrt(2 pi))

Grid3 flat_grid() { return Grid3::dubins(15.0, 31, 31, 8); }

ValueFunction constant_vf(double c, double omega = 1.0) {
  return field(flat_grid(), [=](double, double, double) { return c; }, omega);
}

InterventionRecord at(double x, double y, double theta = 0.0) {
  return InterventionRecord::from_absolute(State(x, y, theta), {0, 0, 2.25}, "t", 0);
}

std::vector<double> normal_draws(int n, double mu, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mu, sigma);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST(FitMuSigma, ClosedForm) {
  const std::vector<double> v{1, 2, 3};
  const GaussianFit f = fit_mu_sigma(v);
  EXPECT_DOUBLE_EQ(f.mu, 2.0);
  EXPECT_NEAR(f.sigma2, 2.0 / 3.0, 1e-15);
}

TEST(FitMuSigma, VarianceFloor) {
  const std::vector<double> v{0.7, 0.7, 0.7};
  const GaussianFit f = fit_mu_sigma(v);
  EXPECT_DOUBLE_EQ(f.mu, 0.7);
  EXPECT_EQ(f.sigma2, kVarianceFloor);
}

TEST(FitMuSigma, NeedsTwoValues) {
  const std::vector<double> one{1.0};
  try {
    fit_mu_sigma(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
  }
}

TEST(FitMuSigma, LawOfLargeNumbers) {
  const GaussianFit f = fit_mu_sigma(normal_draws(10000, 0.4, 0.3, 8));
  EXPECT_NEAR(f.mu, 0.4, 0.01);
  EXPECT_NEAR(f.sigma2, 0.09, 0.01);
}

TEST(LogLikelihood, StandardNormalPeak) {
  const std::vector<double> one{0.0}, two{0.0, 0.0};
  EXPECT_NEAR(log_likelihood(one, 0.0, 1.0), kLogPeak, 1e-12);
  EXPECT_NEAR(log_likelihood(two, 0.0, 1.0), 2 * kLogPeak, 1e-12);
  EXPECT_NEAR(kLogPeak, -0.9189385, 1e-7);
}

TEST(LogLikelihood, RejectsNonPositiveVariance) {
  const std::vector<double> v{0.0, 1.0};
  EXPECT_THROW(log_likelihood(v, 0.0, 0.0), Error);
  EXPECT_THROW(log_likelihood(v, 0.0, -1.0), Error);
}

TEST(LogLikelihood, ClosedFormDominatesLattice) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto v = normal_draws(50, 0.3, 0.2, seed);
    const GaussianFit f = fit_mu_sigma(v);
    const double best = log_likelihood(v, f.mu, f.sigma2);
    const double sd = std::sqrt(f.sigma2);
    for (int i = 0; i < 100; ++i) {
      const double mu = f.mu - 3 * sd + 6 * sd * i / 99.0;
      for (int j = 0; j < 100; ++j) {
        const double s2 = f.sigma2 * (0.1 + 3.9 * j / 99.0);
        ASSERT_LE(log_likelihood(v, mu, s2), best + 1e-9);
      }
    }
  }
}

TEST(FitMuSigma, ShiftEquivariance) {
  const auto v = normal_draws(40, 0.1, 0.3, 2);
  auto w = v;
  for (double& x : w) x += 1.25;
  const GaussianFit a = fit_mu_sigma(v), b = fit_mu_sigma(w);
  EXPECT_NEAR(b.mu, a.mu + 1.25, 1e-12);
  EXPECT_NEAR(b.sigma2, a.sigma2, 1e-12);
  EXPECT_NEAR(log_likelihood(w, b.mu, b.sigma2), log_likelihood(v, a.mu, a.sigma2), 1e-9);
}

TEST(FitMuSigma, ScaleSensitivity) {
  const auto v = normal_draws(40, 0.1, 0.3, 3);
  auto w = v;
  for (double& x : w) x *= 2.0;
  const GaussianFit a = fit_mu_sigma(v), b = fit_mu_sigma(w);
  EXPECT_NEAR(b.sigma2, 4 * a.sigma2, 1e-12);
  EXPECT_LT(log_likelihood(w, b.mu, b.sigma2), log_likelihood(v, a.mu, a.sigma2));
}

TEST(CandidateLikelihood, IdenticalRecordsHitTheFloor) {
  const auto vf = canonical_vf(1.0);
  const std::vector<InterventionRecord> recs{at(5, 1, 0.2), at(5, 1, 0.2)};
  const CandidateLikelihood c = candidate_likelihood(*vf, recs);
  EXPECT_EQ(c.sigma2_hat, kVarianceFloor);
  EXPECT_NEAR(c.mu_hat, std::max(0.0, interpolate_value(*vf, State(5, 1, 0.2)).value), 1e-12);
}

TEST(CandidateLikelihood, ConstantField) {
  const ValueFunction vf = constant_vf(0.8);
  const std::vector<InterventionRecord> recs{at(1, 2), at(-3, 4), at(6, -1)};
  const CandidateLikelihood c = candidate_likelihood(vf, recs);
  EXPECT_DOUBLE_EQ(c.mu_hat, 0.8);
  EXPECT_EQ(c.sigma2_hat, kVarianceFloor);
  EXPECT_EQ(c.n_used, 3u);
}

TEST(CandidateLikelihood, ExcludesOutOfDomainRecords) {
  const ValueFunction vf = field(flat_grid(), [](double x, double, double) { return x; });
  std::vector<InterventionRecord> recs;
  for (int i = 0; i < 19; ++i) recs.push_back(at(0.1 * i, 0));
  recs.push_back(at(40, 0));
  const CandidateLikelihood c = candidate_likelihood(vf, recs);
  EXPECT_EQ(c.n_excluded, 1u);
  EXPECT_EQ(c.n_used, 19u);
  EXPECT_NEAR(c.mu_hat, 0.9, 1e-12);

  recs.push_back(at(-40, 0));
  recs.push_back(at(0, 40));
  try {
    candidate_likelihood(vf, recs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::out_of_domain);
  }
}

TEST(CandidateLikelihood, SelfConsistentOnNoiselessData) {
  const double omegas[] = {0.5, 0.75, 1.0};
  const std::vector<std::shared_ptr<const ValueFunction>> lib{canonical_vf(0.5), canonical_vf(0.75),
                                                             canonical_vf(1.0)};
  std::mt19937_64 rng(6);
  const auto recs = collect_interventions({lib[1], 0.3, 0.0}, 100, rng);
  const CandidateLikelihood own = candidate_likelihood(*lib[1], recs);
  const double drop = CollectionConfig{}.dt * 3.0 * max_gradient_norm(*lib[1]);
  EXPECT_LE(own.sigma2_hat, drop * drop);
  for (std::size_t i = 0; i < lib.size(); ++i) {
    if (i == 1) continue;
    EXPECT_GT(own.log_likelihood, candidate_likelihood(*lib[i], recs).log_likelihood) << omegas[i];
  }
}

TEST(SelectValueFunction, NegativeMeanClampsToZero) {
  const std::vector<ValueFunction> lib{field(flat_grid(), [](double x, double, double) { return x; })};
  const std::vector<InterventionRecord> recs{at(-0.1, 0), at(-0.3, 0)};
  const SupervisorFit fit = select_value_function(lib, recs, nullptr, false);
  EXPECT_EQ(fit.mu_hat, 0.0);
  EXPECT_NEAR(fit.sigma2_hat, (0.01 + 0.09) / 2, 1e-12);
}

TEST(SelectValueFunction, SingletonIsReturned) {
  const std::vector<ValueFunction> lib{constant_vf(-5.0)};
  const std::vector<InterventionRecord> recs{at(1, 1), at(2, 2)};
  const SupervisorFit fit = select_value_function(lib, recs, nullptr, false);
  EXPECT_EQ(fit.library_index, 0u);
  ASSERT_EQ(fit.per_candidate.size(), 1u);
}

TEST(SelectValueFunction, TiesGoToSmallerOmega) {
  const std::vector<ValueFunction> lib{constant_vf(0.5, 2.0), constant_vf(0.5, 1.0), constant_vf(0.5, 3.0)};
  const std::vector<InterventionRecord> recs{at(1, 1), at(2, 2)};
  const SupervisorFit fit = select_value_function(lib, recs, nullptr, false);
  EXPECT_EQ(fit.omega_max, 1.0);
  EXPECT_EQ(fit.library_index, 1u);
}

TEST(SelectValueFunction, PriorDropsLessConservativeCandidates) {
  const ValueFunction truth = field(flat_grid(), [](double x, double y, double) { return std::hypot(x, y) - 3; });
  ValueFunction loose = truth, tight = truth;
  loose.omega_max = 2.0;
  tight.omega_max = 0.5;
  for (double& v : loose.values) v += 2.0;
  for (double& v : tight.values) v -= 1.0;
  // Records sit where loose reads exactly 0.3: loose wins on likelihood.
  std::vector<InterventionRecord> recs;
  for (int k = 0; k < 12; ++k) recs.push_back(at(1.3 * std::cos(k * 0.5), 1.3 * std::sin(k * 0.5)));
  const std::vector<ValueFunction> lib{tight, loose};
  EXPECT_EQ(select_value_function(lib, recs, &truth, false).omega_max, 2.0);
  const SupervisorFit fit = select_value_function(lib, recs, &truth, true);
  EXPECT_EQ(fit.omega_max, 0.5);
  EXPECT_FALSE(fit.per_candidate[1].conservative);
  EXPECT_TRUE(is_superset_reachable(lib[fit.library_index], truth));

  const std::vector<ValueFunction> only_loose{loose};
  try {
    select_value_function(only_loose, recs, &truth, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_feasible_set);
  }
}

TEST(SelectValueFunction, LogLikelihoodIsMaxOverConservativeCandidates) {
  const std::vector<ValueFunction> lib{*canonical_vf(0.5), *canonical_vf(0.75), *canonical_vf(1.0)};
  std::mt19937_64 rng(2);
  const auto recs = collect_interventions({canonical_vf(0.75), 0.3, 0.05}, 60, rng);
  const SupervisorFit fit = select_value_function(lib, recs, canonical_vf(1.0).get(), true);
  double best = -1e300;
  for (const CandidateScore& c : fit.per_candidate) {
    if (c.conservative) best = std::max(best, c.log_likelihood);
    EXPECT_GE(c.mu_hat, 0.0);
    EXPECT_GE(c.sigma2_hat, kVarianceFloor);
  }
  EXPECT_EQ(fit.log_likelihood, best);
  EXPECT_EQ(fit.omega_max, 0.75);
}

TEST(PredictedFpFraction, Counting) {
  const ValueFunction vf = field(flat_grid(), [](double x, double, double) { return x; });
  const std::vector<InterventionRecord> recs{at(-1, 0), at(0.5, 0), at(1.5, 0)};
  EXPECT_NEAR(predicted_fp_fraction(vf, 1.0, recs), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(predicted_fp_fraction(vf, 1.0, std::span<const InterventionRecord>{}), Error);
}

TEST(PredictedFpFraction, LevelRules) {
  const std::vector<ValueFunction> lib{*canonical_vf(0.5), *canonical_vf(0.75), *canonical_vf(1.0)};
  std::mt19937_64 rng(31);
  const auto recs = collect_interventions({canonical_vf(0.75), 0.3, 0.05}, 1000, rng);
  const SupervisorFit fit = select_value_function(lib, recs, &lib[2], true);
  const ValueFunction& learned = lib[fit.library_index];
  EXPECT_NEAR(predicted_fp_fraction(learned, fit.mu_hat, recs), 0.5, 0.05);
  const double two_sigma = fit.mu_hat + 2 * std::sqrt(fit.sigma2_hat);
  const double frac = predicted_fp_fraction(learned, two_sigma, recs);
  EXPECT_GE(frac, 0.008);
  EXPECT_LE(frac, 0.038);
}
