#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "thinshell/gibbs.hpp"

using namespace thinshell;

// Reference values below were computed with mpmath at 30 digits.

TEST(PartitionFunction, ClosedForms) {
  EXPECT_NEAR(partition_function(HamiltonianSpec::quadratic(), kPi), 1.0, 1e-15);
  EXPECT_NEAR(partition_function(HamiltonianSpec::linear_half(), 2.0), 0.5, 1e-15);
}

TEST(PartitionFunction, QuadratureAgreesWithClosedForms) {
  for (double c : {0.25, 0.5, 1.0, 2.0}) {
    const double zq = partition_function_quadrature(HamiltonianSpec::quadratic(), c);
    EXPECT_NEAR(zq / std::sqrt(kPi / c), 1.0, 1e-10) << c;
    const double zl = partition_function_quadrature(HamiltonianSpec::linear_half(), c);
    EXPECT_NEAR(zl * c, 1.0, 1e-10) << c;
  }
}

TEST(PartitionFunction, QuarticBelowGaussian) {
  const double z = partition_function(HamiltonianSpec::quartic_perturbed(1.0), 1.0);
  EXPECT_LT(z, std::sqrt(kPi));
  EXPECT_NEAR(z, 1.36842685573550877, 1e-12);
}

TEST(Moments, ChiSquareOne) {
  const auto m = moments(HamiltonianSpec::quadratic(), 0.5);
  EXPECT_NEAR(m.mu, 1.0, 1e-10);
  EXPECT_NEAR(m.sigma2, 2.0, 1e-9);
  EXPECT_NEAR(m.m3, 8.69156290272550643, 1e-8);
}

TEST(Moments, ExponentialOne) {
  const auto m = moments(HamiltonianSpec::linear_half(), 1.0);
  EXPECT_NEAR(m.mu, 1.0, 1e-10);
  EXPECT_NEAR(m.sigma2, 1.0, 1e-10);
  EXPECT_NEAR(m.m3, 2.41455329405730786, 1e-9);
}

TEST(Moments, Quartic) {
  const auto m = moments(HamiltonianSpec::quartic_perturbed(1.0), 1.0);
  EXPECT_NEAR(m.mu, 0.366979979243416297, 1e-10);
  EXPECT_NEAR(m.sigma2, 0.328060679267063967, 1e-9);
}

TEST(Moments, DerivativeOfMeanIsMinusVariance) {
  for (const auto& s : {HamiltonianSpec::quadratic(), HamiltonianSpec::linear_half(),
                        HamiltonianSpec::power(3.0), HamiltonianSpec::quartic_perturbed(0.5)}) {
    for (double c : {0.3, 1.0, 4.0}) {
      const double h = 1e-4 * c;
      const double slope = (mean_energy(s, c - h) - mean_energy(s, c + h)) / (2.0 * h);
      EXPECT_NEAR(slope / moments(s, c).sigma2, 1.0, 0.01) << s.name() << " c=" << c;
    }
  }
}

TEST(Moments, MeanStrictlyDecreasing) {
  for (const auto& s : {HamiltonianSpec::quadratic(), HamiltonianSpec::power(1.5),
                        HamiltonianSpec::quartic_perturbed(1.0)}) {
    double prev = kInfinity;
    for (double c : log_space(0.1, 10.0, 20)) {
      const double mu = mean_energy(s, c);
      EXPECT_LT(mu, prev) << s.name() << " c=" << c;
      prev = mu;
    }
  }
}

TEST(SolveEnergy, Examples) {
  EXPECT_NEAR(solve_energy(HamiltonianSpec::quadratic(), 0.5).c, 1.0, 1e-10);
  EXPECT_NEAR(solve_energy(HamiltonianSpec::linear_half(), 1.0).c, 1.0, 1e-10);
  EXPECT_NEAR(solve_energy(HamiltonianSpec::quadratic(), 1.0).c, 0.5, 1e-10);
}

TEST(SolveEnergy, MatchesTargetForNonClosedForms) {
  for (double t : {0.05, 1.0, 20.0}) {
    for (const auto& s : {HamiltonianSpec::power(3.0), HamiltonianSpec::quartic_perturbed(1.0)}) {
      const auto m = solve_energy(s, t);
      EXPECT_NEAR(m.mu / t, 1.0, 1e-10) << s.name() << " t=" << t;
      EXPECT_NEAR(mean_energy(s, m.c) / t, 1.0, 1e-10);
    }
  }
}

TEST(SolveEnergy, RejectsNonpositiveTarget) {
  EXPECT_THROW(solve_energy(HamiltonianSpec::quadratic(), 0.0), PreconditionError);
}

TEST(YDensity, PointValues) {
  const auto lin = make_model(HamiltonianSpec::linear_half(), 1.0);
  EXPECT_NEAR(y_density_at(lin, 0.0), 1.0, 1e-14);
  EXPECT_NEAR(y_density_at(lin, 2.0), std::exp(-2.0), 1e-14);
  const auto quad = make_model(HamiltonianSpec::quadratic(), 0.5);
  EXPECT_NEAR(y_density_at(quad, 1.0), std::exp(-0.5) / std::sqrt(2.0 * kPi), 1e-14);
  EXPECT_NEAR(y_density_at(quad, 1.0), 0.24197072451914337, 1e-15);
}

TEST(YDensity, GridMassIsOne) {
  for (const auto& s : {HamiltonianSpec::quadratic(), HamiltonianSpec::linear_half(),
                        HamiltonianSpec::power(1.5), HamiltonianSpec::power(3.0, Support::half_line),
                        HamiltonianSpec::quartic_perturbed(1.0)}) {
    for (double c : {0.25, 0.5, 1.0, 2.0}) {
      const auto g = y_density(make_model(s, c));
      EXPECT_NEAR(g.mass(), 1.0, 1e-6) << s.name() << " c=" << c;
    }
  }
}

TEST(YDensity, GridMomentsMatchModel) {
  const auto m = make_model(HamiltonianSpec::quartic_perturbed(1.0), 1.0);
  const auto g = y_density(m);
  EXPECT_NEAR(g.mean(), m.mu, 1e-6);
  EXPECT_NEAR(g.variance(), m.sigma2, 1e-5);
}

TEST(CharacteristicFunction, ClosedForms) {
  const auto lin = make_model(HamiltonianSpec::linear_half(), 1.0);
  const auto quad = make_model(HamiltonianSpec::quadratic(), 0.5);
  for (double u : {0.1, 1.0, 3.0, 10.0}) {
    const auto e = 1.0 / std::complex<double>(1.0, -u);
    EXPECT_LT(std::abs(characteristic_function(lin, u) - e), 1e-9) << u;
    const auto q = std::pow(std::complex<double>(1.0, -2.0 * u), -0.5);
    EXPECT_LT(std::abs(characteristic_function(quad, u) - q), 1e-9) << u;
  }
  EXPECT_NEAR(std::abs(characteristic_function(lin, 1.0)), 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(std::abs(characteristic_function(quad, 1.0)), std::pow(5.0, -0.25), 1e-9);
}

TEST(CharacteristicFunction, ZeroConjugateAndBounded) {
  for (const auto& s : {HamiltonianSpec::quadratic(), HamiltonianSpec::power(3.0),
                        HamiltonianSpec::quartic_perturbed(1.0)}) {
    const auto m = make_model(s, 1.0);
    EXPECT_NEAR(std::abs(characteristic_function(m, 0.0) - 1.0), 0.0, 1e-9) << s.name();
    for (double u : {0.2, 1.5, 7.0, 40.0}) {
      const auto p = characteristic_function(m, u);
      const auto q = characteristic_function(m, -u);
      EXPECT_LT(std::abs(p - std::conj(q)), 1e-14) << s.name();
      EXPECT_LE(std::abs(p), 1.0 + 1e-12);
    }
  }
}

TEST(CharacteristicFunction, QuarticAgainstDirectQuadrature) {
  const auto m = make_model(HamiltonianSpec::quartic_perturbed(1.0), 1.0);
  for (double u : {0.5, 2.0, 6.0}) {
    auto re = [&](double x) { return m.density(x) * std::cos(u * m.spec.evaluate(x)); };
    auto im = [&](double x) { return m.density(x) * std::sin(u * m.spec.evaluate(x)); };
    const std::complex<double> ref(2.0 * integrate(re, 0.0, m.quad.x_max).value,
                                   2.0 * integrate(im, 0.0, m.quad.x_max).value);
    EXPECT_LT(std::abs(characteristic_function(m, u) - ref), 1e-8) << u;
  }
}

TEST(CharacteristicFunction, BeyondNyquistIsAnError) {
  const auto m = make_model(HamiltonianSpec::quartic_perturbed(1.0), 1.0);
  CharacteristicFunction phi(m);
  EXPECT_THROW(phi(2.0 * phi.nyquist()), ConvergenceError);
}

TEST(CltPrerequisites, Exponential) {
  const auto m = make_model(HamiltonianSpec::linear_half(), 1.0);
  const auto pre = clt_prerequisites(m, {1, 2, 3, 4});
  EXPECT_EQ(pre.r_used, 2);
  EXPECT_NEAR(pre.I, kPi, 1e-4);
  EXPECT_LT(pre.nu, 1.0);
  EXPECT_GT(pre.nu, 0.0);
}

TEST(CltPrerequisites, ChiSquare) {
  const auto m = make_model(HamiltonianSpec::quadratic(), 0.5);
  const auto pre = clt_prerequisites(m, {1, 2, 3, 4});
  EXPECT_EQ(pre.r_used, 3);
  EXPECT_LT(pre.nu, 1.0);
  EXPECT_TRUE(std::isfinite(pre.I));
}

TEST(CltPrerequisites, NoIntegrablePowerIsReported) {
  // |phi|^1 of chi-square(1) decays like u^(-1/2): not integrable.
  const auto m = make_model(HamiltonianSpec::quadratic(), 0.5);
  EXPECT_THROW(clt_prerequisites(m, {1}), ConvergenceError);
}

TEST(EntropyEnergy, AnalyticIdentity) {
  const auto lin = entropy_energy(make_model(HamiltonianSpec::linear_half(), 1.0));
  EXPECT_NEAR(lin.h, 1.0, 1e-14);
  const auto quad = entropy_energy(make_model(HamiltonianSpec::quadratic(), 0.5));
  EXPECT_NEAR(quad.h, 1.41893853320467274, 1e-14);
  EXPECT_NEAR(quad.energy, 1.0, 1e-10);
}

TEST(EntropyEnergy, GridMatchesAnalytic) {
  for (const auto& s : {HamiltonianSpec::quadratic(), HamiltonianSpec::quartic_perturbed(1.0)}) {
    const auto m = make_model(s, 0.7);
    const auto grid = entropy_energy(s, x_density(m));
    const auto exact = entropy_energy(m);
    EXPECT_NEAR(grid.h, exact.h, 1e-4) << s.name();
    EXPECT_NEAR(grid.energy, exact.energy, 1e-4) << s.name();
  }
}

TEST(EntropyEnergy, RejectsUnnormalizedGrid) {
  const DensityGrid q(0.0, 0.1, std::vector<double>(11, 2.0));
  EXPECT_THROW(entropy_energy(HamiltonianSpec::linear_half(), q), PreconditionError);
}

TEST(MaxEntropy, TiltedEnergyMatchedDensitiesHaveLessEntropy) {
  const auto m = solve_energy(HamiltonianSpec::quadratic(), 1.0);
  for (double b : {0.05, 0.2, 1.0}) {
    const auto r = max_entropy_check(m, b);
    EXPECT_TRUE(r.passed) << b;
    EXPECT_NEAR(r.energy_q, m.mu, 1e-9);
    EXPECT_LT(r.h_q, r.h_g);
    EXPECT_NEAR(r.kl, r.h_g - r.h_q, 1e-6);
  }
}

TEST(MaxEntropy, ZeroTiltIsGibbsItself) {
  const auto m = solve_energy(HamiltonianSpec::linear_half(), 1.0);
  const auto r = max_entropy_check(m, 0.0);
  EXPECT_NEAR(r.a, m.c, 1e-6);
  EXPECT_NEAR(r.kl, 0.0, 1e-6);
}
