#include "indcal/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace indcal {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct SampleTerms {
  double paic;
  double nll;
  double paic_dmu;
  double paic_dsigma;
  double nll_dmu;
  double nll_dsigma;
};

SampleTerms sample_terms(double mu, double sigma, double y, double r) {
  const double z = (y - mu) / sigma;
  const double u = std_normal_cdf(z);
  const double diff = u - r;
  const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  // Inside the clamp region the CDF is constant.
  const bool clamped = u <= kCdfTiny || u >= 1.0 - kCdfTiny;
  const double slope = clamped ? 0.0 : sign * std_normal_pdf(z);
  SampleTerms t;
  t.paic = std::abs(diff);
  t.nll = std::log(sigma) + 0.5 * z * z + kHalfLog2Pi;
  t.paic_dmu = -slope / sigma;
  t.paic_dsigma = -slope * z / sigma;
  t.nll_dmu = -z / sigma;
  t.nll_dsigma = (1.0 - z * z) / sigma;
  return t;
}

// Mean losses over data rows `indices` with seeds r (aligned with indices).
// Adds the gradient of L_alpha into grad when non-null.
LossParts accumulate(double alpha, const MlpParams& params, const Dataset& data,
                     std::span<const std::size_t> indices, std::span<const double> r,
                     double sigma_floor, std::vector<double>* grad) {
  if (indices.empty()) throw DomainError("loss: empty batch");
  if (r.size() != indices.size()) throw ShapeError("loss: need exactly one seed per batch row");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha: must lie in [0,1]");
  for (double v : r) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("loss: seed r outside [0,1]");
  }
  const double n = static_cast<double>(indices.size());
  const double w_paic = (1.0 - alpha) / n;
  const double w_nll = alpha / n;
  thread_local ForwardTrace trace;
  double sum_paic = 0.0;
  double sum_nll = 0.0;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t i = indices[b];
    const auto out = mlp_forward(params, data.row(i), r[b], trace, sigma_floor);
    const SampleTerms t = sample_terms(out.mu, out.sigma, data.label(i), r[b]);
    sum_paic += t.paic;
    sum_nll += t.nll;
    if (grad != nullptr) {
      const double d_mu = w_paic * t.paic_dmu + w_nll * t.nll_dmu;
      const double d_sigma = w_paic * t.paic_dsigma + w_nll * t.nll_dsigma;
      mlp_backward_accumulate(params, trace, d_mu, d_sigma, *grad);
    }
  }
  LossParts parts;
  parts.paic = sum_paic / n;
  parts.nll = sum_nll / n;
  parts.combined = (1.0 - alpha) * parts.paic + alpha * parts.nll;
  return parts;
}

std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha: must lie in [0,1]");
  if (epochs == 0) throw ConfigError("epochs: must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size: must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate: must be > 0");
  }
  if (patience == 0) throw ConfigError("patience: must be >= 1");
  if (!(sigma_floor > 0.0) || !std::isfinite(sigma_floor)) {
    throw ConfigError("sigma_floor: must be > 0");
  }
  if (hidden.empty()) throw ConfigError("hidden: need at least one hidden layer");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("hidden: layer widths must be >= 1");
  }
}

LossResult loss_combined(double alpha, const MlpParams& params, const Dataset& data,
                         std::span<const double> r, double sigma_floor) {
  LossResult result;
  result.gradient.assign(params.layout().parameter_count(), 0.0);
  const auto idx = all_rows(data);
  result.value = accumulate(alpha, params, data, idx, r, sigma_floor, &result.gradient).combined;
  return result;
}

LossResult loss_paic(const MlpParams& params, const Dataset& data, std::span<const double> r,
                     double sigma_floor) {
  return loss_combined(0.0, params, data, r, sigma_floor);
}

LossResult loss_nll(const MlpParams& params, const Dataset& data, std::span<const double> r,
                    double sigma_floor) {
  return loss_combined(1.0, params, data, r, sigma_floor);
}

LossParts evaluate_losses(double alpha, const MlpParams& params, const Dataset& data,
                          std::span<const double> r, double sigma_floor) {
  const auto idx = all_rows(data);
  return accumulate(alpha, params, data, idx, r, sigma_floor, nullptr);
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  if (train_set.dim() != val_set.dim()) {
    throw ShapeError("train and validation sets have different feature counts");
  }
  const Standardization record = fit_standardization(train_set);
  const Dataset tr = standardize(train_set, record);
  const Dataset va = standardize(val_set, record);

  std::vector<std::size_t> sizes{tr.dim()};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(2);

  const Rng root(config.seed);
  MlpParams params = mlp_init(layout_from_sizes(sizes), root.child("init").next_u64());
  Rng shuffle_rng = root.child("shuffle");
  Rng seed_rng = root.child("seeds");
  Rng val_rng = root.child("val-seeds");

  std::vector<double> val_r(va.size());
  for (double& v : val_r) v = val_rng.uniform_open();
  const auto val_idx = all_rows(va);

  AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  AdamState adam = adam_init(params.layout().parameter_count(), adam_config);

  std::vector<double> best(params.values().begin(), params.values().end());
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t stale = 0;
  bool stopped_early = false;

  std::vector<EpochRecord> history;
  std::vector<std::size_t> order = all_rows(tr);
  std::vector<double> grad(params.layout().parameter_count());
  std::vector<double> batch_r;

  const auto diverged = [&](const std::string& why) {
    MlpParams good(params.layout(), best);
    return TrainingDiverged(why, Forecaster::trained(std::move(good), record, config.sigma_floor),
                            history);
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    LossParts sums;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      batch_r.resize(batch.size());
      for (double& v : batch_r) v = seed_rng.uniform_open();
      if (hooks.on_batch_seeds) hooks.on_batch_seeds(epoch, batch_r);

      std::fill(grad.begin(), grad.end(), 0.0);
      const LossParts parts =
          accumulate(config.alpha, params, tr, batch, batch_r, config.sigma_floor, &grad);
      if (!std::isfinite(parts.combined)) {
        throw diverged("non-finite training loss at epoch " + std::to_string(epoch));
      }
      const double w = static_cast<double>(batch.size());
      sums.paic += w * parts.paic;
      sums.nll += w * parts.nll;
      sums.combined += w * parts.combined;
      try {
        adam_step(params, grad, adam);
      } catch (const TrainingError& e) {
        throw diverged(std::string(e.what()) + " at epoch " + std::to_string(epoch));
      }
    }
    const double n = static_cast<double>(order.size());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = {sums.paic / n, sums.nll / n, sums.combined / n};
    rec.val = accumulate(config.alpha, params, va, val_idx, val_r, config.sigma_floor, nullptr);
    if (!std::isfinite(rec.val.combined)) {
      throw diverged("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);

    if (rec.val.combined < best_val) {
      best_val = rec.val.combined;
      best_epoch = epoch;
      std::copy(params.values().begin(), params.values().end(), best.begin());
      stale = 0;
    } else if (++stale >= config.patience) {
      stopped_early = true;
      break;
    }
  }

  MlpParams final_params(params.layout(), std::move(best));
  return TrainResult{Forecaster::trained(std::move(final_params), record, config.sigma_floor),
                     std::move(history), best_epoch, stopped_early};
}

double hoeffding_slack(double gamma, std::size_t n) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma: must lie in (0,1)");
  if (n == 0) throw DomainError("hoeffding_slack: n must be >= 1");
  return std::sqrt(-std::log(gamma) / (2.0 * static_cast<double>(n)));
}

MpaicCertificate make_certificate(double epsilon, double empirical_violation, double gamma,
                                  std::size_t n) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon: must lie in [0,1]");
  MpaicCertificate c;
  c.epsilon = epsilon;
  c.empirical_violation = empirical_violation;
  c.gamma = gamma;
  c.n = n;
  c.bound = empirical_violation + hoeffding_slack(gamma, n);
  return c;
}

MpaicCertificate certify_mpaic(const Forecaster& f, const Dataset& heldout, double epsilon,
                               double gamma, Rng& rng) {
  if (heldout.size() == 0) throw DomainError("certify_mpaic: empty dataset");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon: must lie in [0,1]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma: must lie in (0,1)");
  const PitSample s = pit_sample(f, heldout, rng);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < s.pit.size(); ++i) {
    if (std::abs(s.pit[i] - s.r[i]) >= epsilon) ++violations;
  }
  return make_certificate(epsilon,
                          static_cast<double>(violations) / static_cast<double>(heldout.size()),
                          gamma, heldout.size());
}

PaicConversion mpaic_to_paic(double epsilon, double delta, double epsilon_prime) {
  if (!(epsilon >= 0.0) || !(epsilon_prime <= 1.0)) {
    throw DomainError("mpaic_to_paic: need 0 <= epsilon < epsilon' <= 1");
  }
  if (!(epsilon_prime > epsilon)) {
    throw DomainError("mpaic_to_paic: epsilon' must exceed epsilon");
  }
  if (!(delta >= 0.0 && delta <= 1.0)) throw DomainError("mpaic_to_paic: delta must lie in [0,1]");
  PaicConversion c;
  c.epsilon = epsilon;
  c.delta = delta;
  c.epsilon_prime = epsilon_prime;
  c.delta_paic = std::min(1.0, delta * (1.0 - epsilon) / (epsilon_prime - epsilon));
  return c;
}

}  // namespace indcal
