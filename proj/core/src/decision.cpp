#include "indcal/decision.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>

#include "indcal/errors.hpp"

namespace indcal {

std::string to_string(Direction d) {
  return d == Direction::kNonIncreasing ? "non-increasing" : "non-decreasing";
}

std::string to_string(Phase phase) { return phase == Phase::kRandom ? "random" : "rational"; }

double LossCurve::operator()(std::span<const double> x, double y) const {
  if (step) return y < step->threshold ? step->below : step->at_or_above;
  return fn(x, y);
}

MonotonicLossSpec::MonotonicLossSpec(std::vector<LossCurve> curves, bool non_negative,
                                     double probe_lo, double probe_hi)
    : curves_(std::move(curves)), non_negative_(non_negative) {
  if (curves_.empty()) throw SpecError("loss needs at least one action");
  if (!(probe_hi > probe_lo)) throw SpecError("loss probe range is empty");
  constexpr int kProbes = 201;
  for (const auto& c : curves_) {
    if (!c.step && !c.fn) throw SpecError("action '" + c.action + "' has no loss curve");
    double prev = 0.0;
    for (int i = 0; i < kProbes; ++i) {
      const double y = probe_lo + (probe_hi - probe_lo) * i / (kProbes - 1);
      const double v = c({}, y);
      if (!std::isfinite(v)) {
        throw SpecError("action '" + c.action + "': non-finite loss at y = " + std::to_string(y));
      }
      if (non_negative_ && v < 0.0) {
        throw SpecError("action '" + c.action + "': negative loss at y = " + std::to_string(y));
      }
      if (i > 0) {
        const bool ok = c.direction == Direction::kNonIncreasing ? v <= prev : v >= prev;
        if (!ok) {
          throw SpecError("action '" + c.action + "' is not " + to_string(c.direction) +
                          " near y = " + std::to_string(y));
        }
      }
      prev = v;
    }
  }
}

std::size_t MonotonicLossSpec::action_index(const std::string& action) const {
  for (std::size_t i = 0; i < curves_.size(); ++i) {
    if (curves_[i].action == action) return i;
  }
  throw ConfigError("unknown action '" + action + "'");
}

MonotonicLossSpec bank_loss(double y0, const BankUtility& u) {
  LossCurve yes;
  yes.action = "yes";
  yes.step = StepCurve{y0, -u.yes_unqualified, -u.yes_qualified};
  yes.direction = yes.step->below >= yes.step->at_or_above ? Direction::kNonIncreasing
                                                           : Direction::kNonDecreasing;
  LossCurve no;
  no.action = "no";
  no.step = StepCurve{y0, -u.no, -u.no};
  no.direction = Direction::kNonIncreasing;
  return MonotonicLossSpec({yes, no}, false, y0 - 10.0, y0 + 10.0);
}

MonotonicLossSpec exponential_pair_loss(double center, double scale) {
  if (!(scale > 0.0)) throw SpecError("exponential loss scale must be > 0");
  LossCurve low;
  low.action = "low";
  low.direction = Direction::kNonDecreasing;
  low.fn = [center, scale](std::span<const double>, double y) {
    return std::exp(scale * (y - center));
  };
  LossCurve high;
  high.action = "high";
  high.direction = Direction::kNonIncreasing;
  high.fn = [center, scale](std::span<const double>, double y) {
    return std::exp(-scale * (y - center));
  };
  return MonotonicLossSpec({low, high}, true, center - 10.0 / scale, center + 10.0 / scale);
}

namespace {

constexpr double kZRange = 10.0;
constexpr std::size_t kNodes = 64;

struct QuadratureRule {
  std::array<double, kNodes> z;
  std::array<double, kNodes> weight;  // normalized to sum to 1
};

const QuadratureRule& standard_normal_rule() {
  static const QuadratureRule rule = [] {
    using Gauss = boost::math::quadrature::gauss<double, kNodes>;
    const auto& abscissa = Gauss::abscissa();
    const auto& weights = Gauss::weights();
    QuadratureRule q{};
    const std::size_t half = kNodes / 2;
    double total = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      const double z = kZRange * abscissa[i];
      const double w = weights[i] * std_normal_pdf(z);
      q.z[half - 1 - i] = -z;
      q.z[half + i] = z;
      q.weight[half - 1 - i] = w;
      q.weight[half + i] = w;
      total += 2.0 * w;
    }
    for (double& w : q.weight) w /= total;
    return q;
  }();
  return rule;
}

}  // namespace

double bayes_expected_loss(const Forecast& forecast, const MonotonicLossSpec& loss,
                           std::size_t action, std::span<const double> x) {
  if (action >= loss.size()) throw ConfigError("action index out of range");
  const LossCurve& curve = loss.curves()[action];
  if (curve.step) {
    const double p = forecast.cdf_at(curve.step->threshold);
    return curve.step->at_or_above + (curve.step->below - curve.step->at_or_above) * p;
  }
  const QuadratureRule& rule = standard_normal_rule();
  const GaussianForecast& g = forecast.gaussian();
  const auto y_at = [&](double z) {
    if (forecast.is_gaussian()) return g.mu + g.sigma * z;
    return forecast.quantile(std::clamp(std_normal_cdf(z), kCdfTiny, 1.0 - kCdfTiny));
  };
  // Accumulate deviations from a reference value so constants come out exact.
  const double reference = curve(x, y_at(rule.z[kNodes / 2]));
  if (!std::isfinite(reference)) throw SpecError("non-finite loss in expectation");
  double acc = 0.0;
  for (std::size_t i = 0; i < kNodes; ++i) {
    const double v = curve(x, y_at(rule.z[i]));
    if (!std::isfinite(v)) throw SpecError("non-finite loss in expectation");
    acc += rule.weight[i] * (v - reference);
  }
  return reference + acc;
}

BayesDecision bayes_action(const Forecast& forecast, const MonotonicLossSpec& loss,
                           std::span<const double> x) {
  BayesDecision best{0, bayes_expected_loss(forecast, loss, 0, x)};
  for (std::size_t a = 1; a < loss.size(); ++a) {
    const double v = bayes_expected_loss(forecast, loss, a, x);
    if (v < best.expected_loss) best = {a, v};
  }
  return best;
}

BankDecision bank_decide(const Forecast& forecast, double y0) {
  return forecast.cdf_at(y0) <= 0.25 ? BankDecision::kYes : BankDecision::kNo;
}

std::vector<MarkovRow> markov_check(const Forecaster& f, const Dataset& data,
                                    const MonotonicLossSpec& loss, std::span<const double> k_list,
                                    Rng& rng) {
  if (!loss.non_negative()) throw SpecError("markov_check needs a loss flagged non-negative");
  if (data.size() == 0) throw DomainError("markov_check: empty dataset");
  if (k_list.empty()) throw ConfigError("k: need at least one value");
  for (double k : k_list) {
    if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("k: every value must be > 0");
  }
  std::vector<double> realized(data.size());
  std::vector<double> l_h(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    const Forecast fc = f.predict(x, rng.uniform_open());
    const BayesDecision d = bayes_action(fc, loss, x);
    const double l = loss.curves()[d.action](x, data.label(i));
    if (l < 0.0) throw SpecError("observed a negative loss on row " + std::to_string(i));
    realized[i] = l;
    l_h[i] = d.expected_loss;
  }
  std::vector<MarkovRow> rows;
  const double n = static_cast<double>(data.size());
  for (double k : k_list) {
    MarkovRow row;
    row.k = k;
    row.n = data.size();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (realized[i] >= k * l_h[i]) ++row.exceed;
    }
    row.empirical = static_cast<double>(row.exceed) / n;
    row.bound_avg = std::min(1.0, 2.0 / k);
    row.bound_paic = std::min(1.0, 1.0 / k);
    row.binomial_sigma = std::sqrt(row.bound_paic * (1.0 - row.bound_paic) / n);
    rows.push_back(row);
  }
  return rows;
}

void CustomerHistory::add(std::span<const double> x, double y, double u) {
  if (dim == 0) dim = x.size();
  if (x.size() != dim) throw ShapeError("customer history: feature dimension changed");
  inputs.insert(inputs.end(), x.begin(), x.end());
  inputs.push_back(y);
  utility.push_back(u);
}

namespace {

MlpLayout psi_layout(std::size_t dim, const PsiConfig& config) {
  std::vector<std::size_t> sizes{dim + 1};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);
  return layout_from_sizes(sizes, false);
}

}  // namespace

PsiModel::PsiModel(std::size_t dim, PsiConfig config, std::uint64_t seed)
    : dim_(dim),
      config_(std::move(config)),
      params_(mlp_init(psi_layout(dim, config_), Rng(seed).child("psi-init").next_u64())),
      adam_(adam_init(params_.layout().parameter_count(), AdamConfig{config_.learning_rate})),
      rng_(Rng(seed).child("psi-batches")) {
  if (config_.batch_size == 0 || config_.steps_per_refit == 0) {
    throw ConfigError("psi: batch_size and steps_per_refit must be >= 1");
  }
}

double PsiModel::predict(std::span<const double> x, double y) const {
  if (!trained_) return 0.0;
  if (x.size() != dim_) throw ShapeError("psi: feature dimension mismatch");
  thread_local std::vector<double> input;
  thread_local ForwardTrace trace;
  input.resize(dim_ + 1);
  for (std::size_t j = 0; j < dim_; ++j) input[j] = (x[j] - record_.mean[j]) / record_.scale[j];
  input[dim_] = (y - record_.mean[dim_]) / record_.scale[dim_];
  return mlp_forward_raw(params_, input, 0.0, trace)[0];
}

void PsiModel::fit(const CustomerHistory& history) {
  const std::size_t n = history.size();
  if (n == 0) return;
  const std::size_t width = dim_ + 1;
  if (history.dim != dim_) throw ShapeError("psi: history dimension mismatch");
  if (!trained_) {
    std::vector<std::string> names(width, "v");
    const Dataset view(history.inputs, history.utility, names);
    record_ = fit_standardization(view);
  }
  std::vector<double> grad(params_.layout().parameter_count());
  std::vector<double> input(width);
  ForwardTrace trace;
  const std::size_t batch = std::min(config_.batch_size, n);
  for (std::size_t step = 0; step < config_.steps_per_refit; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t i = rng_.index(n);
      for (std::size_t j = 0; j < width; ++j) {
        input[j] = (history.inputs[i * width + j] - record_.mean[j]) / record_.scale[j];
      }
      const double out = mlp_forward_raw(params_, input, 0.0, trace)[0];
      const double d = 2.0 * (out - history.utility[i]) / static_cast<double>(batch);
      mlp_backward_raw(params_, trace, std::span<const double>(&d, 1), grad);
    }
    adam_step(params_, grad, adam_);
  }
  trained_ = true;
}

PsiModel train_customer_model(const CustomerHistory& history, const PsiConfig& config,
                              std::uint64_t seed) {
  PsiModel model(history.dim, config, seed);
  model.fit(history);
  return model;
}

void BankGameConfig::validate() const {
  if (!std::isfinite(y0)) throw ConfigError("y0: must be finite");
  if (refit_interval == 0) throw ConfigError("refit_interval: must be >= 1");
  if (psi.hidden.empty()) throw ConfigError("psi.hidden: need at least one hidden layer");
  if (psi.batch_size == 0 || psi.steps_per_refit == 0) {
    throw ConfigError("psi: batch_size and steps_per_refit must be >= 1");
  }
  if (!(psi.learning_rate > 0.0)) throw ConfigError("psi.learning_rate: must be > 0");
}

const PhaseSummary& GameResult::phase(Phase p) const {
  for (const auto& s : phases) {
    if (s.phase == p) return s;
  }
  throw DomainError("game result has no " + to_string(p) + " phase");
}

namespace {

PhaseSummary summarize(Phase phase, std::span<const GameRound> rounds) {
  PhaseSummary s;
  s.phase = phase;
  for (const auto& r : rounds) {
    ++s.arrivals;
    if (r.applied) ++s.applications;
    if (r.approved) ++s.approvals;
    if (r.approved && r.bank_utility < 0.0) ++s.unqualified_approvals;
    if (r.exploit) ++s.exploits;
    s.bank_total += r.bank_utility;
    s.customer_total += r.customer_utility;
  }
  if (s.applications > 0) s.mean_bank_utility = s.bank_total / static_cast<double>(s.applications);
  if (s.arrivals > 0) {
    s.mean_bank_utility_per_round = s.bank_total / static_cast<double>(s.arrivals);
    s.exploit_fraction = static_cast<double>(s.exploits) / static_cast<double>(s.arrivals);
  }
  if (s.approvals > 0) {
    s.unqualified_approval_fraction =
        static_cast<double>(s.unqualified_approvals) / static_cast<double>(s.approvals);
  }
  return s;
}

}  // namespace

GameResult run_credit_game(const Forecaster& bank, const Dataset& stream,
                           const BankGameConfig& config) {
  config.validate();
  if (stream.size() == 0) throw DomainError("run_credit_game: empty customer stream");
  const Rng root(config.seed);
  GameResult result;
  result.trace.reserve(2 * stream.size());

  for (Phase phase : {Phase::kRandom, Phase::kRational}) {
    Rng bank_rng = root.child(phase == Phase::kRandom ? "bank-random" : "bank-rational");
    PsiModel psi(stream.dim(), config.psi, root.child("psi").next_u64());
    CustomerHistory history;
    history.dim = stream.dim();
    const std::size_t first = result.trace.size();

    for (std::size_t t = 0; t < stream.size(); ++t) {
      const auto x = stream.row(t);
      const double y = stream.label(t);
      const bool qualified = y >= config.y0;
      GameRound round;
      round.phase = phase;
      round.round = t;
      round.row = t;
      round.y = y;
      if (phase == Phase::kRational) {
        if (t > 0 && t % config.refit_interval == 0) psi.fit(history);
        round.psi = psi.predict(x, y);
        round.applied = round.psi >= 0.0;
      } else {
        round.applied = true;
      }
      if (round.applied) {
        const Forecast fc = bank.predict(x, bank_rng.uniform_open());
        round.approved = bank_decide(fc, config.y0) == BankDecision::kYes;
        if (round.approved) {
          round.bank_utility = qualified ? config.bank.yes_qualified : config.bank.yes_unqualified;
          round.customer_utility =
              qualified ? config.customer.yes_qualified : config.customer.yes_unqualified;
        } else {
          round.bank_utility = config.bank.no;
          round.customer_utility = config.customer.no;
        }
        round.exploit = !qualified;
        history.add(x, y, round.customer_utility);
      }
      result.trace.push_back(round);
    }
    result.phases.push_back(summarize(
        phase, std::span<const GameRound>(result.trace.data() + first, stream.size())));
  }
  return result;
}

}  // namespace indcal
