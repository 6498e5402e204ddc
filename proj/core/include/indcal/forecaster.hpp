#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "indcal/core_math.hpp"
#include "indcal/data.hpp"
#include "indcal/nn.hpp"
#include "indcal/random.hpp"

namespace indcal {

struct GaussianForecast {
  double mu = 0.0;
  double sigma = 1.0;
};

// One predicted CDF: a Gaussian optionally followed by monotone maps on the
// probability scale, applied innermost first:
//   cdf(y) = m_k(... m_1(Phi((y - mu) / sigma)))
class Forecast {
 public:
  Forecast(GaussianForecast base) : Forecast(base, {}) {}  // NOLINT(google-explicit-constructor)
  Forecast(GaussianForecast base, std::vector<std::shared_ptr<const MonotoneStepFn>> maps);

  const GaussianForecast& gaussian() const noexcept { return base_; }
  bool is_gaussian() const noexcept { return maps_.empty(); }
  const std::vector<std::shared_ptr<const MonotoneStepFn>>& maps() const noexcept { return maps_; }

  // Clamped to [kCdfTiny, 1 - kCdfTiny]. Throws DomainError for non-finite y.
  double cdf_at(double y) const;
  // Derivative of cdf_at in y (zero on flat parts of a map).
  double density_at(double y) const;
  // -log density, computed without underflow for the Gaussian part.
  double neg_log_density(double y) const;
  // Requires 0 < p < 1. Inverts maps outermost first.
  double quantile(double p) const;
  // Equal-tailed interval holding `level` of the mass. Requires 0 < level < 1.
  std::pair<double, double> credible_interval(double level) const;

 private:
  double apply_maps(double u) const;
  GaussianForecast base_;
  std::vector<std::shared_ptr<const MonotoneStepFn>> maps_;
};

double cdf_at(const Forecast& forecast, double y);
double quantile(const Forecast& forecast, double p);
std::pair<double, double> credible_interval(const Forecast& forecast, double level);

enum class ForecasterKind { kTrained, kOracle, kPassThrough, kRecalibrated };
std::string to_string(ForecasterKind kind);

class Forecaster;

struct TrainedModel {
  MlpParams params;
  Standardization standardization;
  double sigma_floor = kSigmaFloor;
};

struct OracleModel {
  std::function<GaussianForecast(std::span<const double>)> truth;
  std::size_t dim = 0;
};

// The trivial construction h[x, r](y) = Phi(y / c + Phi^-1(r)): a Gaussian
// with mu = -c Phi^-1(r) and sigma = c, independent of x.
struct PassThroughModel {
  double c = 1e9;
};

struct RecalibratedModel {
  std::shared_ptr<const Forecaster> inner;
  std::shared_ptr<const MonotoneStepFn> map;
};

// Randomized forecaster h(x, r). Immutable; predict is pure and thread-safe.
class Forecaster {
 public:
  using Model = std::variant<TrainedModel, OracleModel, PassThroughModel, RecalibratedModel>;

  static Forecaster trained(MlpParams params, Standardization standardization,
                            double sigma_floor = kSigmaFloor);
  static Forecaster oracle(std::function<GaussianForecast(std::span<const double>)> truth,
                           std::size_t dim);
  // The generator's true conditional law. Throws ConfigError for
  // heteroscedastic specs with non-Gaussian groups, whose law is not Gaussian.
  static Forecaster oracle(const GeneratorSpec& spec);
  static Forecaster pass_through(double c);
  static Forecaster recalibrated(Forecaster inner, MonotoneStepFn map);

  ForecasterKind kind() const noexcept;
  // Feature dimension expected by predict; 0 when any dimension is accepted.
  std::size_t dim() const noexcept;
  const Model& model() const noexcept { return model_; }

  // Requires r in [0,1] and x of the expected dimension.
  Forecast predict(std::span<const double> x, double r) const;

 private:
  explicit Forecaster(Model model) : model_(std::move(model)) {}
  Model model_;
};

// PIT values h[x_i, r_i](y_i) with the seeds that produced them.
struct PitSample {
  std::vector<double> pit;
  std::vector<double> r;

  EmpiricalPit empirical() const { return EmpiricalPit(std::span<const double>(pit)); }
};

// One fresh r_i ~ U(0,1) per row, drawn from rng in row order.
PitSample pit_sample(const Forecaster& f, const Dataset& data, Rng& rng);

// Evaluates every row at `draws_per_row` seeds and pools the results. The
// seeds form a stratified grid: row i gets one seed in each of the
// draws_per_row strata of [0,1], and over all rows the n * draws_per_row
// seeds are exactly the cell midpoints of a uniform grid, assigned to rows in
// a random order. This integrates R out with far less noise than one draw per
// row, which matters when the forecaster's PIT is close to r itself.
PitSample stratified_pit_sample(const Forecaster& f, const Dataset& data,
                                std::size_t draws_per_row, Rng& rng);

}  // namespace indcal
