#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "indcal/data.hpp"
#include "indcal/forecaster.hpp"
#include "indcal/nn.hpp"
#include "indcal/random.hpp"

namespace indcal {

enum class Direction { kNonIncreasing, kNonDecreasing };
std::string to_string(Direction d);

// l(y) = below for y < threshold, at_or_above otherwise.
struct StepCurve {
  double threshold = 0.0;
  double below = 0.0;
  double at_or_above = 0.0;
};

// Loss of one action as a function of (x, y). Either a step curve (expected
// values use the forecast CDF in closed form) or a general function
// (expected values use quadrature).
struct LossCurve {
  std::string action;
  Direction direction = Direction::kNonIncreasing;
  std::optional<StepCurve> step;
  std::function<double(std::span<const double> x, double y)> fn;

  double operator()(std::span<const double> x, double y) const;
};

class MonotonicLossSpec {
 public:
  // Checks every curve on a probe grid over [probe_lo, probe_hi]: declared
  // direction, finiteness, and non-negativity when the flag is set. Throws
  // SpecError on a violation.
  MonotonicLossSpec(std::vector<LossCurve> curves, bool non_negative, double probe_lo = -10.0,
                    double probe_hi = 10.0);

  const std::vector<LossCurve>& curves() const noexcept { return curves_; }
  std::size_t size() const noexcept { return curves_.size(); }
  bool non_negative() const noexcept { return non_negative_; }
  std::size_t action_index(const std::string& action) const;

 private:
  std::vector<LossCurve> curves_;
  bool non_negative_;
};

struct BankUtility {
  double yes_qualified = 1.0;
  double yes_unqualified = -3.0;
  double no = 0.0;
  bool operator==(const BankUtility&) const = default;
};

struct CustomerUtility {
  double yes_qualified = 0.2;
  double yes_unqualified = 1.0;
  double no = -0.5;
  bool operator==(const CustomerUtility&) const = default;
};

// Actions {"yes", "no"} with loss = -utility; "yes" is listed first.
MonotonicLossSpec bank_loss(double y0, const BankUtility& utility = {});

// Non-negative monotone pair: "low" costs exp(scale (y - center)) and "high"
// costs exp(-scale (y - center)).
MonotonicLossSpec exponential_pair_loss(double center = 0.0, double scale = 1.0);

// E[l(x, Y, action)] for Y distributed as the forecast. Step curves use the
// CDF; other curves use 64-node Gauss-Legendre quadrature over z in [-10, 10]
// with standard-normal weights, mapped through the forecast quantile.
double bayes_expected_loss(const Forecast& forecast, const MonotonicLossSpec& loss,
                           std::size_t action, std::span<const double> x = {});

struct BayesDecision {
  std::size_t action = 0;
  double expected_loss = 0.0;  // l_H(x)
};

// Minimizes the expected loss; ties go to the earlier action.
BayesDecision bayes_action(const Forecast& forecast, const MonotonicLossSpec& loss,
                           std::span<const double> x = {});

enum class BankDecision { kYes, kNo };
// 'yes' iff the forecast CDF at y0 is at most 1/4.
BankDecision bank_decide(const Forecast& forecast, double y0);

struct MarkovRow {
  double k = 0.0;
  std::size_t n = 0;
  std::size_t exceed = 0;
  double empirical = 0.0;      // fraction with l >= k l_H
  double bound_avg = 0.0;      // min(1, 2/k), average calibration
  double bound_paic = 0.0;     // min(1, 1/k), individual calibration
  double binomial_sigma = 0.0; // sqrt(p (1-p) / n) at p = min(1, 1/k)
};

// Fresh r per row; the action and l_H come from the forecast, the realized
// loss from the true label. Throws SpecError if the loss is not flagged
// non-negative or a realized loss is negative.
std::vector<MarkovRow> markov_check(const Forecaster& f, const Dataset& data,
                                    const MonotonicLossSpec& loss, std::span<const double> k_list,
                                    Rng& rng);

// Realized (x, y, utility) triples seen by customers.
struct CustomerHistory {
  std::size_t dim = 0;
  std::vector<double> inputs;  // row-major (x, y), width dim + 1
  std::vector<double> utility;

  std::size_t size() const noexcept { return utility.size(); }
  void add(std::span<const double> x, double y, double u);
};

struct PsiConfig {
  std::vector<std::size_t> hidden{32, 32};
  double learning_rate = 3e-3;
  std::size_t steps_per_refit = 200;
  std::size_t batch_size = 64;
  bool operator==(const PsiConfig&) const = default;
};

// Customer utility model psi(x, y). Untrained models predict 0.
class PsiModel {
 public:
  PsiModel(std::size_t dim, PsiConfig config, std::uint64_t seed);

  double predict(std::span<const double> x, double y) const;
  bool trained() const noexcept { return trained_; }
  // Continues training for config.steps_per_refit minibatch steps of squared
  // error on the whole history. Inputs are standardized with statistics of
  // the history seen at the first fit.
  void fit(const CustomerHistory& history);

 private:
  std::size_t dim_;
  PsiConfig config_;
  MlpParams params_;
  AdamState adam_;
  Rng rng_;
  Standardization record_;
  bool trained_ = false;
};

PsiModel train_customer_model(const CustomerHistory& history, const PsiConfig& config,
                              std::uint64_t seed);

struct BankGameConfig {
  double y0 = 0.0;
  BankUtility bank;
  CustomerUtility customer;
  std::size_t refit_interval = 200;
  PsiConfig psi;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Phase { kRandom, kRational };
std::string to_string(Phase phase);

struct GameRound {
  Phase phase = Phase::kRandom;
  std::size_t round = 0;
  std::size_t row = 0;
  double y = 0.0;
  double psi = 0.0;
  bool applied = false;
  bool approved = false;
  double bank_utility = 0.0;
  double customer_utility = 0.0;
  bool exploit = false;  // applied with y < y0
};

struct PhaseSummary {
  Phase phase = Phase::kRandom;
  std::size_t arrivals = 0;
  std::size_t applications = 0;
  std::size_t approvals = 0;
  std::size_t unqualified_approvals = 0;
  std::size_t exploits = 0;
  double bank_total = 0.0;
  double customer_total = 0.0;
  double mean_bank_utility = 0.0;            // per application
  double mean_bank_utility_per_round = 0.0;  // per arrival
  double exploit_fraction = 0.0;             // exploits / arrivals
  double unqualified_approval_fraction = 0.0;
};

struct GameResult {
  std::vector<GameRound> trace;
  std::vector<PhaseSummary> phases;  // random, then rational

  const PhaseSummary& phase(Phase p) const;
};

// Two phases over the same stream: every arrival applies, then arrivals
// apply iff psi(x, y) >= 0 with psi refit every refit_interval rounds on
// the realized utilities of that phase. The bank draws a fresh r per
// application and never retrains.
GameResult run_credit_game(const Forecaster& bank, const Dataset& stream,
                           const BankGameConfig& config);

}  // namespace indcal
