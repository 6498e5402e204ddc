#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "indcal/data.hpp"
#include "indcal/errors.hpp"
#include "indcal/forecaster.hpp"
#include "indcal/nn.hpp"
#include "indcal/random.hpp"

namespace indcal {

struct TrainConfig {
  // Weight of the NLL term: loss = (1 - alpha) * L_PAIC + alpha * L_NLL.
  double alpha = 0.5;
  std::size_t epochs = 300;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  // Epochs without a validation improvement before stopping.
  std::size_t patience = 20;
  double sigma_floor = kSigmaFloor;
  std::vector<std::size_t> hidden{64, 64};

  // Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Mean losses over a batch.
struct LossParts {
  double paic = 0.0;
  double nll = 0.0;
  double combined = 0.0;
};

struct LossResult {
  double value = 0.0;
  std::vector<double> gradient;  // same layout as the parameter vector
};

// The batch is `data` (features already standardized) with one seed per row.
//
// L_PAIC = mean |Phi((y - mu) / sigma) - r|, subgradient 0 at the kink.
// L_NLL  = mean [log sigma + (y - mu)^2 / (2 sigma^2) + log(2 pi) / 2].
// L_alpha = (1 - alpha) L_PAIC + alpha L_NLL.
// All three share one kernel, so alpha = 0 and alpha = 1 reproduce the
// single losses bit for bit.
LossResult loss_paic(const MlpParams& params, const Dataset& data, std::span<const double> r,
                     double sigma_floor = kSigmaFloor);
LossResult loss_nll(const MlpParams& params, const Dataset& data, std::span<const double> r,
                    double sigma_floor = kSigmaFloor);
LossResult loss_combined(double alpha, const MlpParams& params, const Dataset& data,
                         std::span<const double> r, double sigma_floor = kSigmaFloor);

// Values of all three losses without gradients.
LossParts evaluate_losses(double alpha, const MlpParams& params, const Dataset& data,
                          std::span<const double> r, double sigma_floor = kSigmaFloor);

struct EpochRecord {
  std::size_t epoch = 0;
  LossParts train;
  LossParts val;
};

struct TrainHooks {
  // Called with the seeds of every minibatch, in order.
  std::function<void(std::size_t epoch, std::span<const double> r)> on_batch_seeds;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Forecaster forecaster;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

// Raised when a loss or gradient becomes non-finite. Carries the parameters
// of the best epoch seen so far.
class TrainingDiverged : public TrainingError {
 public:
  TrainingDiverged(const std::string& what, Forecaster last_good, std::vector<EpochRecord> history)
      : TrainingError(what), last_good_(std::move(last_good)), history_(std::move(history)) {}
  const Forecaster& last_good() const noexcept { return last_good_; }
  const std::vector<EpochRecord>& history() const noexcept { return history_; }

 private:
  Forecaster last_good_;
  std::vector<EpochRecord> history_;
};

// Trains h(x, r) with Adam. Features are standardized with statistics of
// `train` only. A fresh r is drawn for every sample at every step. Early
// stopping watches validation L_alpha evaluated at seeds drawn once per run.
// Deterministic in config.seed.
TrainResult train(const Dataset& train, const Dataset& val, const TrainConfig& config,
                  const TrainHooks& hooks = {});

// Hoeffding slack sqrt(-ln(gamma) / (2 n)).
double hoeffding_slack(double gamma, std::size_t n);

struct MpaicCertificate {
  double epsilon = 0.0;
  double empirical_violation = 0.0;
  double gamma = 0.05;
  std::size_t n = 0;
  // With probability at least 1 - gamma the population violation rate
  // Pr[|h(X, R)(Y) - R| >= epsilon] is at most this value.
  double bound = 0.0;
};

MpaicCertificate make_certificate(double epsilon, double empirical_violation, double gamma,
                                  std::size_t n);
MpaicCertificate certify_mpaic(const Forecaster& f, const Dataset& heldout, double epsilon,
                               double gamma, Rng& rng);

struct PaicConversion {
  double epsilon = 0.0;
  double delta = 0.0;
  double epsilon_prime = 0.0;
  double delta_paic = 0.0;
};

// An (epsilon, delta)-mPAIC forecaster is (epsilon', delta_paic)-PAIC with
// delta_paic = delta (1 - epsilon) / (epsilon' - epsilon), capped at 1.
PaicConversion mpaic_to_paic(double epsilon, double delta, double epsilon_prime);

}  // namespace indcal
