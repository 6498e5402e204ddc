#include "indcal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "indcal/errors.hpp"

namespace indcal {

std::string to_string(GroupKind kind) {
  switch (kind) {
    case GroupKind::kAll: return "all";
    case GroupKind::kFeatureThreshold: return "feature-threshold";
    case GroupKind::kFeatureIntersection: return "feature-threshold-intersection";
    case GroupKind::kWindow: return "window";
    case GroupKind::kExplicit: return "explicit";
  }
  return "unknown";
}

GroupSpec whole_set_group(std::size_t n) {
  GroupSpec g;
  g.kind = GroupKind::kAll;
  g.name = "all";
  g.members.resize(n);
  std::iota(g.members.begin(), g.members.end(), 0);
  g.size_fraction = 1.0;
  return g;
}

GroupSpec explicit_group(std::vector<std::size_t> members, std::size_t n, std::string name) {
  if (n == 0) throw DomainError("explicit_group: n must be >= 1");
  std::sort(members.begin(), members.end());
  GroupSpec g;
  g.kind = GroupKind::kExplicit;
  g.name = std::move(name);
  g.size_fraction = static_cast<double>(members.size()) / static_cast<double>(n);
  g.members = std::move(members);
  return g;
}

double average_calibration_error(const EmpiricalPit& pits) { return w1_to_uniform(pits); }

namespace {

double members_error(std::span<const double> pits, std::span<const std::size_t> members) {
  if (members.empty()) throw DomainError("group calibration error: empty group");
  std::vector<double> values;
  values.reserve(members.size());
  for (std::size_t i : members) {
    if (i >= pits.size()) throw DomainError("group member index out of range");
    values.push_back(pits[i]);
  }
  return w1_to_uniform(EmpiricalPit(std::move(values)));
}

double median_of(std::vector<double> column) {
  std::sort(column.begin(), column.end());
  const std::size_t n = column.size();
  return n % 2 == 1 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
}

std::string condition_name(const std::vector<std::string>& names, const FeatureCondition& c) {
  return names[c.feature] + (c.above ? ">median" : "<=median");
}

bool satisfies(const Dataset& data, std::size_t row, const FeatureCondition& c) {
  const double v = data.feature(row, c.feature);
  return c.above ? v > c.threshold : v <= c.threshold;
}

}  // namespace

double group_calibration_error(std::span<const double> pits, const GroupSpec& group) {
  return members_error(pits, group.members);
}

std::size_t default_min_group_size(std::size_t n) {
  if (n >= 3000) return 150;
  const auto scaled = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n)));
  return std::max<std::size_t>(30, scaled);
}

std::vector<GroupSpec> interpretable_groups(const Dataset& data, std::size_t min_size) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  std::vector<double> medians(d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i) column[i] = data.feature(i, j);
    medians[j] = median_of(std::move(column));
  }

  std::vector<GroupSpec> groups;
  const auto emit = [&](GroupKind kind, std::vector<FeatureCondition> conditions) {
    GroupSpec g;
    g.kind = kind;
    for (std::size_t i = 0; i < n; ++i) {
      bool in = true;
      for (const auto& c : conditions) in = in && satisfies(data, i, c);
      if (in) g.members.push_back(i);
    }
    if (g.members.empty() || g.members.size() < min_size) return;
    for (std::size_t k = 0; k < conditions.size(); ++k) {
      if (k > 0) g.name += " & ";
      g.name += condition_name(data.feature_names(), conditions[k]);
    }
    g.conditions = std::move(conditions);
    g.size_fraction = static_cast<double>(g.members.size()) / static_cast<double>(n);
    groups.push_back(std::move(g));
  };

  for (std::size_t j = 0; j < d; ++j) {
    emit(GroupKind::kFeatureThreshold, {{j, medians[j], false}});
    emit(GroupKind::kFeatureThreshold, {{j, medians[j], true}});
  }
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j + 1; k < d; ++k) {
      for (bool above_j : {false, true}) {
        for (bool above_k : {false, true}) {
          emit(GroupKind::kFeatureIntersection,
               {{j, medians[j], above_j}, {k, medians[k], above_k}});
        }
      }
    }
  }
  return groups;
}

std::vector<Ordering> covariate_orderings(const Dataset& data, const Forecaster* f) {
  const std::size_t n = data.size();
  std::vector<Ordering> out;
  const auto by_key = [&](std::string name, const std::vector<double>& key) {
    Ordering o;
    o.name = std::move(name);
    o.order.resize(n);
    std::iota(o.order.begin(), o.order.end(), 0);
    std::stable_sort(o.order.begin(), o.order.end(),
                     [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    out.push_back(std::move(o));
  };
  std::vector<double> key(n);
  for (std::size_t j = 0; j < data.dim(); ++j) {
    for (std::size_t i = 0; i < n; ++i) key[i] = data.feature(i, j);
    by_key(data.feature_names()[j], key);
  }
  if (f != nullptr) {
    std::vector<double> sigma(n);
    for (std::size_t i = 0; i < n; ++i) {
      const GaussianForecast g = f->predict(data.row(i), 0.5).gaussian();
      key[i] = g.mu;
      sigma[i] = g.sigma;
    }
    by_key("predicted-mu", key);
    by_key("predicted-sigma", sigma);
  }
  return out;
}

namespace {

struct Candidate {
  std::size_t size;
  double error;
  long ordering;  // -1 for extra groups
  std::size_t index;  // window begin, or extra group index
  std::size_t end;
};

std::size_t required_size(double delta, std::size_t n) {
  const double m = std::ceil(delta * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(m, 1.0)), 1, n);
}

}  // namespace

std::vector<CurvePoint> adversarial_curve_from_pits(std::span<const double> pits,
                                                    std::span<const Ordering> orderings,
                                                    std::span<const GroupSpec> extra_groups,
                                                    const AdversarialOptions& options) {
  const std::size_t n = pits.size();
  if (n == 0) throw DomainError("adversarial_curve: empty sample");
  if (options.deltas.empty()) throw ConfigError("deltas: need at least one value");
  for (double delta : options.deltas) {
    if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("deltas: every delta must lie in (0,1]");
  }
  for (const auto& o : orderings) {
    if (o.order.size() != n) throw ShapeError("ordering '" + o.name + "' has the wrong length");
  }

  std::vector<Candidate> candidates;
  const GroupSpec all = whole_set_group(n);
  candidates.push_back({n, w1_to_uniform(EmpiricalPit(pits)), -1, extra_groups.size(), n});
  for (std::size_t g = 0; g < extra_groups.size(); ++g) {
    const auto& members = extra_groups[g].members;
    if (members.empty()) continue;
    candidates.push_back({members.size(), members_error(pits, members), -1, g, 0});
  }

  std::vector<double> buffer;
  const auto window_error = [&](const Ordering& o, std::size_t begin, std::size_t end) {
    buffer.assign(end - begin, 0.0);
    for (std::size_t k = begin; k < end; ++k) buffer[k - begin] = pits[o.order[k]];
    return w1_to_uniform(EmpiricalPit(std::move(buffer)));
  };

  for (std::size_t oi = 0; oi < orderings.size(); ++oi) {
    const Ordering& o = orderings[oi];
    const auto ord = static_cast<long>(oi);
    if (n <= options.exhaustive_max_n) {
      for (std::size_t begin = 0; begin < n; ++begin) {
        for (std::size_t end = begin + 1; end <= n; ++end) {
          candidates.push_back({end - begin, window_error(o, begin, end), ord, begin, end});
        }
      }
      continue;
    }
    for (double delta : options.deltas) {
      const std::size_t m = required_size(delta, n);
      const std::size_t stride = std::max<std::size_t>(1, (m + 3) / 4);
      for (std::size_t begin = 0; begin + m <= n; begin += stride) {
        candidates.push_back({m, window_error(o, begin, begin + m), ord, begin, begin + m});
      }
      if ((n - m) % stride != 0) {
        candidates.push_back({m, window_error(o, n - m, n), ord, n - m, n});
      }
    }
  }

  std::vector<CurvePoint> curve;
  for (double delta : options.deltas) {
    const std::size_t m = required_size(delta, n);
    const Candidate* best = nullptr;
    for (const auto& c : candidates) {
      if (c.size < m) continue;
      if (best == nullptr || c.error > best->error) best = &c;
    }
    CurvePoint p;
    p.delta = delta;
    p.epsilon_hat = best->error;
    if (best->ordering < 0) {
      p.witness = best->index == extra_groups.size() ? all : extra_groups[best->index];
    } else {
      const Ordering& o = orderings[static_cast<std::size_t>(best->ordering)];
      GroupSpec w;
      w.kind = GroupKind::kWindow;
      w.ordering = o.name;
      w.rank_begin = best->index;
      w.rank_end = best->end;
      w.name = o.name + "[" + std::to_string(best->index) + "," + std::to_string(best->end) + ")";
      w.members.assign(o.order.begin() + static_cast<long>(best->index),
                       o.order.begin() + static_cast<long>(best->end));
      std::sort(w.members.begin(), w.members.end());
      w.size_fraction = static_cast<double>(w.members.size()) / static_cast<double>(n);
      p.witness = std::move(w);
    }
    curve.push_back(std::move(p));
  }
  return curve;
}

std::vector<CurvePoint> adversarial_curve(const Forecaster& f, const Dataset& data,
                                          std::span<const double> deltas, Rng& rng) {
  const PitSample s = pit_sample(f, data, rng);
  const auto orderings = covariate_orderings(data, &f);
  const auto groups = interpretable_groups(data, default_min_group_size(data.size()));
  AdversarialOptions options;
  options.deltas.assign(deltas.begin(), deltas.end());
  return adversarial_curve_from_pits(s.pit, orderings, groups, options);
}

Sharpness sharpness(const Forecaster& f, const Dataset& data, Rng& rng) {
  if (data.size() == 0) throw DomainError("sharpness: empty dataset");
  double nll = 0.0;
  double sigma = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Forecast fc = f.predict(data.row(i), rng.uniform_open());
    nll += fc.neg_log_density(data.label(i));
    sigma += fc.gaussian().sigma;
  }
  const double n = static_cast<double>(data.size());
  return {nll / n, sigma / n};
}

MonotoneStepFn fit_recalibration_map(std::span<const double> pits) {
  if (pits.size() < 10) {
    throw ConfigError("recalibration needs at least 10 validation rows, got " +
                      std::to_string(pits.size()));
  }
  std::vector<double> sorted(pits.begin(), pits.end());
  std::sort(sorted.begin(), sorted.end());
  const double denom = static_cast<double>(sorted.size() + 1);
  std::vector<IsotonicPoint> points;
  points.reserve(sorted.size() + 2);
  points.push_back({0.0, 0.0});
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    points.push_back({sorted[i], static_cast<double>(i + 1) / denom});
  }
  points.push_back({1.0, 1.0});
  return pav_isotonic(points);
}

Forecaster recalibrate(const Forecaster& f, const Dataset& val, Rng& rng) {
  if (val.size() < 10) {
    throw ConfigError("recalibration needs at least 10 validation rows, got " +
                      std::to_string(val.size()));
  }
  const PitSample s = pit_sample(f, val, rng);
  return Forecaster::recalibrated(f, fit_recalibration_map(s.pit));
}

double violation_fraction(const PitSample& sample, double epsilon) {
  if (sample.pit.empty()) throw DomainError("violation_fraction: empty sample");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon: must lie in [0,1]");
  std::size_t count = 0;
  for (std::size_t i = 0; i < sample.pit.size(); ++i) {
    if (std::abs(sample.pit[i] - sample.r[i]) >= epsilon) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(sample.pit.size());
}

double mpaic_violation_fraction(const Forecaster& f, const Dataset& data, double epsilon,
                                Rng& rng) {
  if (data.size() == 0) throw DomainError("mpaic_violation_fraction: empty dataset");
  return violation_fraction(pit_sample(f, data, rng), epsilon);
}

double monotonicity_diagnostic(const Forecaster& f, const Dataset& data, std::size_t m, Rng& rng,
                               std::size_t max_rows) {
  if (m < 3) throw ConfigError("monotone grid: need at least 3 points");
  if (data.size() == 0) throw DomainError("monotonicity_diagnostic: empty dataset");
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  if (max_rows > 0 && rows.size() > max_rows) {
    std::shuffle(rows.begin(), rows.end(), rng.engine());
    rows.resize(max_rows);
    std::sort(rows.begin(), rows.end());
  }
  std::vector<double> v(m);
  const double pairs = 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
  double total = 0.0;
  for (std::size_t i : rows) {
    for (std::size_t j = 0; j < m; ++j) {
      const double r = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
      v[j] = f.predict(data.row(i), r).cdf_at(data.label(i));
    }
    std::size_t up = 0;
    std::size_t down = 0;
    std::size_t ties = 0;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        if (v[b] > v[a]) {
          ++up;
        } else if (v[b] < v[a]) {
          ++down;
        } else {
          ++ties;
        }
      }
    }
    total += static_cast<double>(std::max(up, down) + ties) / pairs;
  }
  return total / static_cast<double>(rows.size());
}

double CalibrationReport::epsilon_at(double delta) const {
  for (const auto& p : adversarial_curve) {
    if (p.delta == delta) return p.epsilon_hat;
  }
  throw DomainError("no adversarial curve point at delta " + std::to_string(delta));
}

CalibrationReport evaluate(const Forecaster& f, const Dataset& data, const EvalOptions& options,
                           std::uint64_t seed) {
  if (data.size() == 0) throw DomainError("evaluate: empty dataset");
  const Rng root(seed);
  CalibrationReport report;
  report.n = data.size();

  Rng pit_rng = root.child("pit");
  const PitSample sample = pit_sample(f, data, pit_rng);
  const EmpiricalPit pits = sample.empirical();
  report.average_w1 = average_calibration_error(pits);
  report.average_ece = ece(pits);

  report.min_group_size =
      options.min_group_size > 0 ? options.min_group_size : default_min_group_size(data.size());
  const auto groups = interpretable_groups(data, report.min_group_size);
  for (const auto& g : groups) {
    GroupError ge{g, group_calibration_error(sample.pit, g)};
    if (!report.interpretable_worst || ge.error > report.interpretable_worst->error) {
      report.interpretable_worst = ge;
    }
    report.interpretable.push_back(std::move(ge));
  }
  const auto orderings = covariate_orderings(data, &f);
  report.adversarial_curve =
      adversarial_curve_from_pits(sample.pit, orderings, groups, options.adversarial);

  Rng sharp_rng = root.child("sharpness");
  report.sharpness = sharpness(f, data, sharp_rng);

  std::size_t violations = 0;
  for (std::size_t i = 0; i < sample.pit.size(); ++i) {
    if (std::abs(sample.pit[i] - sample.r[i]) >= options.epsilon) ++violations;
  }
  report.mpaic = make_certificate(
      options.epsilon, static_cast<double>(violations) / static_cast<double>(data.size()),
      options.gamma, data.size());

  Rng mono_rng = root.child("monotone");
  report.monotone_fraction =
      monotonicity_diagnostic(f, data, options.monotone_grid, mono_rng, options.monotone_rows);

  if (options.stratified_draws > 0) {
    Rng strat_rng = root.child("stratified");
    const PitSample pooled = stratified_pit_sample(f, data, options.stratified_draws, strat_rng);
    report.average_w1_stratified = w1_to_uniform(pooled.empirical());
  }
  return report;
}

}  // namespace indcal
