#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "indcal/calibration.hpp"
#include "indcal/errors.hpp"
#include "oracles.hpp"

using namespace indcal;

namespace {

Dataset linear_data(std::size_t n, std::uint64_t seed, double noise = 1.0) {
  Rng rng(seed);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform(-2.0, 2.0);
    y[i] = 2.0 * x[i] + noise * rng.normal();
  }
  return Dataset(x, y, {"x0"});
}

Forecaster linear_oracle(double sigma = 1.0) {
  return Forecaster::oracle(
      [sigma](std::span<const double> x) { return GaussianForecast{2.0 * x[0], sigma}; }, 1);
}

// Largest group error over the whole set and every contiguous window of every
// ordering with at least m members.
double brute_force_epsilon(const std::vector<double>& pits, const std::vector<Ordering>& orderings,
                           std::size_t m) {
  double best = oracle::w1_exact_cdf(pits);
  for (const auto& o : orderings) {
    for (std::size_t b = 0; b < pits.size(); ++b) {
      for (std::size_t e = b + m; e <= pits.size(); ++e) {
        std::vector<double> window;
        for (std::size_t k = b; k < e; ++k) window.push_back(pits[o.order[k]]);
        best = std::max(best, oracle::w1_exact_cdf(window));
      }
    }
  }
  return best;
}

}  // namespace

TEST(GroupError, BasicCases) {
  const std::vector<double> pits{0.1, 0.4, 0.6, 0.9, 0.5};
  const GroupSpec all = whole_set_group(pits.size());
  EXPECT_EQ(group_calibration_error(pits, all), average_calibration_error(EmpiricalPit(pits)));
  EXPECT_NEAR(group_calibration_error(pits, explicit_group({4}, 5)), 0.25, 1e-15);
  EXPECT_THROW(group_calibration_error(pits, explicit_group({}, 5)), DomainError);
  EXPECT_THROW(group_calibration_error(pits, explicit_group({7}, 8)), DomainError);
}

TEST(GroupError, HalfSupportedGroupsAreFarFromUniform) {
  // The closest law on [0, 1/2] to U[0,1] has quantile min(u, 1/2): W1 = 1/8.
  std::vector<double> closest(4000);
  for (std::size_t i = 0; i < closest.size(); ++i) {
    closest[i] = std::min((static_cast<double>(i) + 0.5) / 4000.0, 0.5);
  }
  EXPECT_NEAR(oracle::w1_exact_cdf(closest), 0.125, 1e-4);
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + trial);
    for (double& x : v) x = u(gen);
    EXPECT_GE(average_calibration_error(EmpiricalPit(v)), 0.125 - 1e-12);
  }
}

TEST(MinGroupSize, Defaults) {
  EXPECT_EQ(default_min_group_size(5000), 150u);
  EXPECT_EQ(default_min_group_size(3000), 150u);
  EXPECT_EQ(default_min_group_size(1000), 50u);
  EXPECT_EQ(default_min_group_size(100), 30u);
}

TEST(InterpretableGroups, TwoFeatures) {
  Rng rng(1);
  std::vector<double> f(2000), y(1000);
  for (double& v : f) v = rng.normal();
  const Dataset d(f, y, {"a", "b"});
  const auto groups = interpretable_groups(d, 150);
  ASSERT_EQ(groups.size(), 8u);
  for (std::size_t g = 0; g < 4; ++g) {
    EXPECT_EQ(groups[g].kind, GroupKind::kFeatureThreshold);
    EXPECT_EQ(groups[g].members.size(), 500u);
  }
  for (std::size_t g = 4; g < 8; ++g) {
    EXPECT_EQ(groups[g].kind, GroupKind::kFeatureIntersection);
    EXPECT_NEAR(static_cast<double>(groups[g].members.size()), 250.0, 60.0);
  }
  EXPECT_EQ(groups[0].name, "a<=median");
  EXPECT_EQ(groups[5].name, "a<=median & b>median");
  EXPECT_TRUE(interpretable_groups(d, 1001).empty());
}

TEST(InterpretableGroups, TiesGoBelowAndConstantFeatureDropsAbove) {
  const Dataset d({1.0, 5.0, 2.0, 5.0, 2.0, 5.0, 3.0, 5.0}, {0, 0, 0, 0}, {"a", "c"});
  const auto groups = interpretable_groups(d, 1);
  // Feature a: values 1,2,2,3, median 2, ties below -> {0,1,2} and {3}.
  ASSERT_GE(groups.size(), 3u);
  EXPECT_EQ(groups[0].members, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(groups[1].members, (std::vector<std::size_t>{3}));
  // Constant feature c: only the at-or-below side survives.
  EXPECT_EQ(groups[2].name, "c<=median");
  EXPECT_EQ(groups[2].members.size(), 4u);
  for (const auto& g : groups) EXPECT_NE(g.name, "c>median");
}

TEST(CovariateOrderings, IgnoreLabels) {
  const Dataset a = linear_data(200, 3);
  std::vector<double> shuffled(a.labels().begin(), a.labels().end());
  std::reverse(shuffled.begin(), shuffled.end());
  const Dataset b(std::vector<double>(a.features().begin(), a.features().end()), shuffled, {"x0"});
  const Forecaster f = linear_oracle();
  const auto oa = covariate_orderings(a, &f);
  const auto ob = covariate_orderings(b, &f);
  ASSERT_EQ(oa.size(), 3u);
  for (std::size_t k = 0; k < oa.size(); ++k) {
    EXPECT_EQ(oa[k].name, ob[k].name);
    EXPECT_EQ(oa[k].order, ob[k].order);
  }
}

TEST(AdversarialCurve, EndpointAndMonotone) {
  const Dataset d = linear_data(3000, 5);
  const Forecaster f = linear_oracle(0.7);
  Rng rng(2);
  const std::vector<double> deltas{0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
  const auto curve = adversarial_curve(f, d, deltas, rng);
  Rng again(2);
  const double avg = average_calibration_error(pit_sample(f, d, again).empirical());
  EXPECT_EQ(curve.back().epsilon_hat, avg);
  EXPECT_EQ(curve.back().witness.kind, GroupKind::kAll);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i - 1].epsilon_hat, curve[i].epsilon_hat);
  }
  for (const auto& p : curve) {
    EXPECT_GE(p.witness.members.size(),
              static_cast<std::size_t>(std::ceil(p.delta * 3000 - 1e-9)));
  }
}

TEST(AdversarialCurve, MatchesExhaustiveWindowsOnSmallSamples) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const AdversarialOptions options;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + trial % 19;
    std::vector<double> pits(n);
    for (double& p : pits) p = std::pow(u(gen), 0.5 + u(gen));
    std::vector<Ordering> orderings(2);
    for (auto& o : orderings) {
      o.order.resize(n);
      std::iota(o.order.begin(), o.order.end(), 0);
      std::shuffle(o.order.begin(), o.order.end(), gen);
    }
    const auto curve = adversarial_curve_from_pits(pits, orderings, {}, options);
    for (const auto& p : curve) {
      const auto m = static_cast<std::size_t>(std::ceil(p.delta * static_cast<double>(n) - 1e-9));
      EXPECT_NEAR(p.epsilon_hat, brute_force_epsilon(pits, orderings, m), 1e-12)
          << "n " << n << " delta " << p.delta;
    }
  }
}

TEST(AdversarialCurve, FindsConcentratedBlock) {
  const std::size_t n = 20;
  std::vector<double> pits(n);
  for (std::size_t i = 0; i < 10; ++i) pits[i] = 0.9;
  for (std::size_t i = 0; i < 10; ++i) pits[10 + i] = (static_cast<double>(i) + 0.5) / 10.0;
  Ordering identity{"x0", std::vector<std::size_t>(n)};
  std::iota(identity.order.begin(), identity.order.end(), 0);
  AdversarialOptions options;
  options.deltas = {0.5, 1.0};
  const std::vector<Ordering> orderings{identity};
  const auto curve = adversarial_curve_from_pits(pits, orderings, {}, options);
  EXPECT_EQ(curve[0].witness.members, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_NEAR(curve[0].epsilon_hat, oracle::w1_exact_cdf(std::vector<double>(10, 0.9)), 1e-12);
  EXPECT_GE(curve[0].epsilon_hat, curve[1].epsilon_hat);
  EXPECT_NEAR(curve[0].epsilon_hat, 0.41, 1e-12);
}

TEST(Sharpness, OracleValues) {
  const Dataset d = linear_data(10000, 7, 2.0);
  Rng rng(1);
  const Sharpness s = sharpness(linear_oracle(2.0), d, rng);
  EXPECT_EQ(s.mean_sigma, 2.0);
  const double expected = 0.5 * std::log(2 * std::numbers::pi * 4.0) + 0.5;
  EXPECT_NEAR(s.mean_nll, expected, 0.05);
  Rng rng2(1);
  EXPECT_GT(sharpness(Forecaster::pass_through(1e9), d, rng2).mean_sigma, 1e6);
}

TEST(Recalibration, OracleMapIsNearIdentity) {
  const Dataset d = linear_data(10000, 8);
  Rng rng(3);
  const Forecaster rec = recalibrate(linear_oracle(), d, rng);
  ASSERT_EQ(rec.kind(), ForecasterKind::kRecalibrated);
  const auto& map = *std::get<RecalibratedModel>(rec.model()).map;
  double worst = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    const double u = k / 1000.0;
    worst = std::max(worst, std::abs(map(u) - u));
  }
  EXPECT_LT(worst, 0.05);
}

TEST(Recalibration, FixesOverconfidenceAndIsIdempotent) {
  const Dataset val = linear_data(5000, 9);
  const Dataset test = linear_data(5000, 10);
  const Forecaster narrow = linear_oracle(0.5);
  Rng r1(1);
  const Forecaster rec = recalibrate(narrow, val, r1);
  Rng a(2), b(2);
  const double before = average_calibration_error(pit_sample(narrow, test, a).empirical());
  const double after = average_calibration_error(pit_sample(rec, test, b).empirical());
  EXPECT_LT(after, before);

  Rng r2(4);
  const Forecaster twice = recalibrate(rec, val, r2);
  const auto& outer = *std::get<RecalibratedModel>(twice.model()).map;
  double worst = 0.0;
  for (int k = 0; k <= 1000; ++k) worst = std::max(worst, std::abs(outer(k / 1000.0) - k / 1000.0));
  EXPECT_LT(worst, 0.05);
  Rng c(2);
  const double again = average_calibration_error(pit_sample(twice, test, c).empirical());
  EXPECT_NEAR(again, after, 0.01);
}

TEST(Recalibration, NeedsTenRows) {
  EXPECT_THROW(fit_recalibration_map(std::vector<double>(9, 0.5)), ConfigError);
}

TEST(Violations, Counting) {
  PitSample s;
  s.pit = {0.51, 0.7, 0.35};
  s.r = {0.5, 0.5, 0.3};
  EXPECT_NEAR(violation_fraction(s, 0.1), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(violation_fraction(s, 0.0), 1.0);
  const Dataset d = linear_data(1000, 2);
  Rng rng(5);
  EXPECT_EQ(mpaic_violation_fraction(Forecaster::pass_through(1e9), d, 0.01, rng), 0.0);
}

TEST(Monotonicity, DegenerateCases) {
  const Dataset d = linear_data(100, 2);
  Rng rng(1);
  EXPECT_EQ(monotonicity_diagnostic(Forecaster::pass_through(1e9), d, 16, rng), 1.0);
  EXPECT_EQ(monotonicity_diagnostic(linear_oracle(), d, 16, rng), 1.0);
  const Forecaster net = Forecaster::trained(mlp_init(std::vector<std::size_t>{1, 8, 8, 2}, 3),
                                             Standardization{{0.0}, {1.0}});
  const double v = monotonicity_diagnostic(net, d, 16, rng);
  EXPECT_GE(v, 0.5);
  EXPECT_LE(v, 1.0);
}

TEST(Evaluate, ReportInvariants) {
  const Dataset d = linear_data(2000, 11);
  const Forecaster f = linear_oracle(0.8);
  const CalibrationReport a = evaluate(f, d, EvalOptions{}, 3);
  const CalibrationReport b = evaluate(f, d, EvalOptions{}, 3);
  EXPECT_EQ(a.average_w1, b.average_w1);
  EXPECT_EQ(a.epsilon_at(1.0), a.average_w1);
  EXPECT_NEAR(a.average_w1, a.average_ece, 1e-9);
  for (std::size_t i = 1; i < a.adversarial_curve.size(); ++i) {
    EXPECT_GE(a.adversarial_curve[i - 1].epsilon_hat, a.adversarial_curve[i].epsilon_hat);
  }
  EXPECT_EQ(a.min_group_size, 100u);
  EXPECT_EQ(a.mpaic.n, 2000u);
  EXPECT_THROW(a.epsilon_at(0.3), DomainError);
}
