#include "indcal/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "indcal/errors.hpp"

namespace indcal {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

void require_probability_open(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError(std::string(what) + " must lie in (0,1), got " + std::to_string(p));
  }
}

}  // namespace

Forecast::Forecast(GaussianForecast base, std::vector<std::shared_ptr<const MonotoneStepFn>> maps)
    : base_(base), maps_(std::move(maps)) {
  if (!(base_.sigma > 0.0) || !std::isfinite(base_.sigma) || !std::isfinite(base_.mu)) {
    throw DomainError("forecast needs finite mu and sigma > 0");
  }
}

double Forecast::apply_maps(double u) const {
  for (const auto& m : maps_) u = (*m)(u);
  return u;
}

double Forecast::cdf_at(double y) const {
  if (!std::isfinite(y)) throw DomainError("cdf_at: non-finite y");
  const double u = std_normal_cdf((y - base_.mu) / base_.sigma);
  if (maps_.empty()) return u;
  return std::clamp(apply_maps(u), kCdfTiny, 1.0 - kCdfTiny);
}

double Forecast::density_at(double y) const {
  if (!std::isfinite(y)) throw DomainError("density_at: non-finite y");
  const double z = (y - base_.mu) / base_.sigma;
  double d = std_normal_pdf(z) / base_.sigma;
  double u = std_normal_cdf(z);
  for (const auto& m : maps_) {
    d *= m->slope(u);
    u = (*m)(u);
  }
  return d;
}

double Forecast::neg_log_density(double y) const {
  if (!std::isfinite(y)) throw DomainError("neg_log_density: non-finite y");
  const double z = (y - base_.mu) / base_.sigma;
  double nll = std::log(base_.sigma) + 0.5 * z * z + kHalfLog2Pi;
  double u = std_normal_cdf(z);
  for (const auto& m : maps_) {
    nll -= std::log(std::max(m->slope(u), 1e-300));
    u = (*m)(u);
  }
  return nll;
}

double Forecast::quantile(double p) const {
  require_probability_open(p, "quantile level");
  double u = p;
  for (auto it = maps_.rbegin(); it != maps_.rend(); ++it) u = (*it)->inverse(u);
  u = std::clamp(u, kCdfTiny, 1.0 - kCdfTiny);
  return base_.mu + base_.sigma * std_normal_inv_cdf(u);
}

std::pair<double, double> Forecast::credible_interval(double level) const {
  require_probability_open(level, "credible level");
  return {quantile(0.5 * (1.0 - level)), quantile(0.5 * (1.0 + level))};
}

double cdf_at(const Forecast& forecast, double y) { return forecast.cdf_at(y); }
double quantile(const Forecast& forecast, double p) { return forecast.quantile(p); }
std::pair<double, double> credible_interval(const Forecast& forecast, double level) {
  return forecast.credible_interval(level);
}

std::string to_string(ForecasterKind kind) {
  switch (kind) {
    case ForecasterKind::kTrained: return "trained";
    case ForecasterKind::kOracle: return "oracle";
    case ForecasterKind::kPassThrough: return "pass-through";
    case ForecasterKind::kRecalibrated: return "recalibrated";
  }
  return "unknown";
}

Forecaster Forecaster::trained(MlpParams params, Standardization standardization,
                               double sigma_floor) {
  const auto& layout = params.layout();
  if (layout.output_dim != 2 || !layout.seed_input) {
    throw ConfigError("forecaster network needs 2 outputs and the seed input");
  }
  if (standardization.dim() != layout.input_dim || standardization.scale.size() != layout.input_dim) {
    throw ShapeError("standardization does not match the network input dimension");
  }
  if (!(sigma_floor > 0.0)) throw ConfigError("sigma_floor: must be > 0");
  return Forecaster(TrainedModel{std::move(params), std::move(standardization), sigma_floor});
}

Forecaster Forecaster::oracle(std::function<GaussianForecast(std::span<const double>)> truth,
                              std::size_t dim) {
  if (!truth) throw ConfigError("oracle forecaster needs a truth function");
  return Forecaster(OracleModel{std::move(truth), dim});
}

Forecaster Forecaster::oracle(const GeneratorSpec& spec) {
  spec.validate();
  if (spec.kind == GeneratorKind::kHeteroscedastic) {
    for (const auto& g : spec.groups) {
      if (g.shape != NoiseShape::kGaussian) {
        throw ConfigError("oracle: heteroscedastic groups must have gaussian noise");
      }
    }
  }
  return oracle(
      [spec](std::span<const double> x) {
        return GaussianForecast{true_mean(spec, x), std::max(true_stdev(spec, x), 1e-12)};
      },
      spec.dim);
}

Forecaster Forecaster::pass_through(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("pass-through scale c must be > 0");
  return Forecaster(PassThroughModel{c});
}

Forecaster Forecaster::recalibrated(Forecaster inner, MonotoneStepFn map) {
  return Forecaster(RecalibratedModel{std::make_shared<const Forecaster>(std::move(inner)),
                                      std::make_shared<const MonotoneStepFn>(std::move(map))});
}

ForecasterKind Forecaster::kind() const noexcept {
  return static_cast<ForecasterKind>(model_.index());
}

std::size_t Forecaster::dim() const noexcept {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TrainedModel>) {
          return m.params.layout().input_dim;
        } else if constexpr (std::is_same_v<T, OracleModel>) {
          return m.dim;
        } else if constexpr (std::is_same_v<T, PassThroughModel>) {
          return 0;
        } else {
          return m.inner->dim();
        }
      },
      model_);
}

Forecast Forecaster::predict(std::span<const double> x, double r) const {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw DomainError("forecast seed r must lie in [0,1], got " + std::to_string(r));
  }
  const std::size_t d = dim();
  if (d != 0 && x.size() != d) {
    throw ShapeError("forecaster expects " + std::to_string(d) + " features, got " +
                     std::to_string(x.size()));
  }
  return std::visit(
      [&](const auto& m) -> Forecast {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TrainedModel>) {
          thread_local ForwardTrace trace;
          thread_local std::vector<double> scaled;
          scaled.resize(x.size());
          m.standardization.apply(x, scaled);
          const auto out = mlp_forward(m.params, scaled, r, trace, m.sigma_floor);
          return Forecast(GaussianForecast{out.mu, out.sigma});
        } else if constexpr (std::is_same_v<T, OracleModel>) {
          const GaussianForecast g = m.truth(x);
          return Forecast(g, {});
        } else if constexpr (std::is_same_v<T, PassThroughModel>) {
          const double rc = std::clamp(r, kCdfTiny, 1.0 - kCdfTiny);
          return Forecast(GaussianForecast{-m.c * std_normal_inv_cdf(rc), m.c});
        } else {
          const Forecast inner = m.inner->predict(x, r);
          auto maps = inner.maps();
          maps.push_back(m.map);
          return Forecast(inner.gaussian(), std::move(maps));
        }
      },
      model_);
}

PitSample pit_sample(const Forecaster& f, const Dataset& data, Rng& rng) {
  if (data.size() == 0) throw DomainError("pit_sample: empty dataset");
  PitSample s;
  s.pit.resize(data.size());
  s.r.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = rng.uniform_open();
    s.r[i] = r;
    s.pit[i] = f.predict(data.row(i), r).cdf_at(data.label(i));
  }
  return s;
}

PitSample stratified_pit_sample(const Forecaster& f, const Dataset& data,
                                std::size_t draws_per_row, Rng& rng) {
  if (data.size() == 0) throw DomainError("stratified_pit_sample: empty dataset");
  if (draws_per_row == 0) throw ConfigError("draws_per_row: must be >= 1");
  const std::size_t n = data.size();
  const double cells = static_cast<double>(n) * static_cast<double>(draws_per_row);
  std::vector<std::size_t> slot(n);
  PitSample s;
  s.pit.reserve(n * draws_per_row);
  s.r.reserve(n * draws_per_row);
  for (std::size_t j = 0; j < draws_per_row; ++j) {
    std::iota(slot.begin(), slot.end(), 0);
    std::shuffle(slot.begin(), slot.end(), rng.engine());
    for (std::size_t i = 0; i < n; ++i) {
      const double cell = static_cast<double>(j * n + slot[i]);
      const double r = (cell + 0.5) / cells;
      s.r.push_back(r);
      s.pit.push_back(f.predict(data.row(i), r).cdf_at(data.label(i)));
    }
  }
  return s;
}

}  // namespace indcal
