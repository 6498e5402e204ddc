#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "indcal/calibration.hpp"
#include "indcal/data.hpp"
#include "indcal/errors.hpp"
#include "indcal/forecaster.hpp"

using namespace indcal;

TEST(Generators, DeterministicInSeed) {
  for (GeneratorSpec spec : {default_toy_spec(), default_heteroscedastic_spec(),
                             default_credit_spec()}) {
    spec.n = 300;
    const Dataset a = generate(spec);
    const Dataset b = generate(spec);
    EXPECT_TRUE(a == b) << to_string(spec.kind);
    spec.seed = 1;
    EXPECT_FALSE(generate(spec) == a) << to_string(spec.kind);
  }
}

TEST(Generators, ToyNoiseFreeIsTheFunction) {
  GeneratorSpec spec = default_toy_spec();
  spec.noise = 0.0;
  spec.n = 500;
  const Dataset d = gen_toy(spec);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.label(i), true_mean(spec, d.row(i)));
    if (in_toy_region(spec, d.feature(i, 0))) ++inside;
  }
  // The irregular region covers a quarter of the input range.
  spec.n = 20000;
  spec.noise = 0.1;
  const Dataset big = gen_toy(spec);
  inside = 0;
  for (std::size_t i = 0; i < big.size(); ++i) inside += in_toy_region(spec, big.feature(i, 0));
  EXPECT_NEAR(static_cast<double>(inside) / 20000.0, 0.25, 0.015);
  // Away from the region the curve is sin(x).
  EXPECT_EQ(true_mean(spec, std::vector<double>{-3.0}), std::sin(-3.0));
}

TEST(Generators, NoiseShapesAreStandardized) {
  for (NoiseShape shape : {NoiseShape::kGaussian, NoiseShape::kSkewRight, NoiseShape::kSkewLeft,
                           NoiseShape::kHeavySkewRight, NoiseShape::kHeavySkewLeft,
                           NoiseShape::kBimodal, NoiseShape::kLaplace}) {
    GeneratorSpec spec = default_heteroscedastic_spec();
    spec.n = 40000;
    spec.dim = 2;
    spec.groups = {{0.7, 1.0, shape}};
    const Dataset d = gen_heteroscedastic(spec);
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double e = d.label(i) - true_mean(spec, d.row(i));
      sum += e;
      sq += e * e;
    }
    const double mean = sum / 40000.0;
    EXPECT_NEAR(mean, 0.0, 0.03) << to_string(shape);
    EXPECT_NEAR(sq / 40000.0 - mean * mean, 1.0, 0.06) << to_string(shape);
    EXPECT_EQ(parse_noise_shape(to_string(shape)), shape);
  }
  EXPECT_THROW(parse_noise_shape("square"), ConfigError);
}

TEST(Generators, PooledFitMiscalibratesEachGroup) {
  GeneratorSpec spec = default_heteroscedastic_spec();
  spec.n = 20000;
  const Dataset d = gen_heteroscedastic(spec);
  // One Gaussian for the residuals of both groups around the shared base.
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = d.row(i);
    const double e = d.label(i) - (true_mean(spec, x) - spec.groups[latent_group(spec, x)].mean_shift);
    sum += e;
    sq += e * e;
  }
  const double n = static_cast<double>(d.size());
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  std::vector<std::vector<double>> pits(spec.groups.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = d.row(i);
    const std::size_t g = latent_group(spec, x);
    const double base = true_mean(spec, x) - spec.groups[g].mean_shift;
    pits[g].push_back(Forecast(GaussianForecast{base + mean, sd}).cdf_at(d.label(i)));
  }
  std::vector<double> all;
  for (const auto& p : pits) {
    EXPECT_GT(w1_to_uniform(EmpiricalPit(p)), 0.02);
    all.insert(all.end(), p.begin(), p.end());
  }
  EXPECT_LT(w1_to_uniform(EmpiricalPit(all)), w1_to_uniform(EmpiricalPit(pits[0])));
}

TEST(Generators, CreditLabelsAndThreshold) {
  GeneratorSpec spec = default_credit_spec();
  spec.n = 4000;
  const CreditData c = gen_credit(spec);
  std::size_t below = 0;
  for (std::size_t i = 0; i < c.data.size(); ++i) {
    EXPECT_GE(c.data.label(i), 0.0);
    EXPECT_LE(c.data.label(i), 1.0);
    if (c.data.label(i) < c.y0) ++below;
  }
  EXPECT_NEAR(static_cast<double>(below) / 4000.0, 0.3, 0.01);
  EXPECT_THROW(gen_credit(default_toy_spec()), ConfigError);
}

TEST(Generators, SpecValidation) {
  GeneratorSpec spec = default_toy_spec();
  spec.dim = 2;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = default_heteroscedastic_spec();
  spec.groups.clear();
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = default_credit_spec();
  spec.credit_quantile = 1.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_THROW(parse_generator_kind("spiral"), ConfigError);
  EXPECT_EQ(parse_generator_kind("credit"), GeneratorKind::kCredit);
}

TEST(Csv, RoundTrip) {
  GeneratorSpec spec = default_heteroscedastic_spec();
  spec.n = 200;
  spec.dim = 3;
  const Dataset d = generate(spec);
  const Dataset back = parse_csv(to_csv(d));
  EXPECT_TRUE(back == d);
  EXPECT_EQ(back.feature_names(), (std::vector<std::string>{"x0", "x1", "x2"}));
}

TEST(Csv, TargetColumnAnywhere) {
  const Dataset d = parse_csv("score,a,b\n1.5,2,3\n-1,4,5\n", "score");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.label(1), -1.0);
  EXPECT_EQ(d.feature(1, 1), 5.0);
  EXPECT_EQ(d.target_name(), "score");
}

TEST(Csv, ErrorsCarryPosition) {
  try {
    parse_csv("a,y\n1,2\n3,oops\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3);
    EXPECT_EQ(e.column(), 2);
  }
  try {
    parse_csv("a,y\n1,2\n3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3);
  }
  EXPECT_THROW(parse_csv(""), ParseError);
  EXPECT_THROW(parse_csv("a,y\n"), ParseError);
  EXPECT_THROW(parse_csv("a,b\n1,2\n"), ConfigError);
  EXPECT_THROW(parse_csv("a,y\n1,inf\n"), ParseError);
  EXPECT_THROW(load_csv("/nonexistent/data.csv"), ConfigError);
}

TEST(Split, SizesAndPartition) {
  GeneratorSpec spec = default_heteroscedastic_spec();
  spec.n = 1000;
  const Dataset d = generate(spec);
  const std::vector<double> fr{0.6, 0.2, 0.2};
  const auto parts = split(d, fr, 5);
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[0].size(), 600u);
  EXPECT_EQ(parts[1].size(), 200u);
  EXPECT_EQ(parts[2].size(), 200u);
  std::vector<double> labels;
  for (const auto& p : parts) labels.insert(labels.end(), p.labels().begin(), p.labels().end());
  std::vector<double> original(d.labels().begin(), d.labels().end());
  std::sort(labels.begin(), labels.end());
  std::sort(original.begin(), original.end());
  EXPECT_EQ(labels, original);
  EXPECT_TRUE(split(d, fr, 5)[1] == parts[1]);
  EXPECT_THROW(split(d, std::vector<double>{0.5, 0.4}, 1), ConfigError);
}

TEST(Standardize, TrainMomentsAndRecord) {
  GeneratorSpec spec = default_credit_spec();
  spec.n = 500;
  const Dataset d = generate(spec);
  const Standardization rec = fit_standardization(d);
  const Dataset s = standardize(d, rec);
  ASSERT_TRUE(s.standardization().has_value());
  EXPECT_TRUE(*s.standardization() == rec);
  for (std::size_t j = 0; j < s.dim(); ++j) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      sum += s.feature(i, j);
      sq += s.feature(i, j) * s.feature(i, j);
    }
    EXPECT_LT(std::abs(sum / 500.0), 1e-9);
    EXPECT_NEAR(sq / 500.0, 1.0, 1e-9);
  }
  // A constant column keeps unit scale.
  const Dataset flat({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0}, {"c"});
  EXPECT_EQ(fit_standardization(flat).scale[0], 1.0);
  EXPECT_THROW(standardize(flat, rec), ShapeError);
}
