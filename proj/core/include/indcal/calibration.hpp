#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "indcal/core_math.hpp"
#include "indcal/data.hpp"
#include "indcal/forecaster.hpp"
#include "indcal/random.hpp"
#include "indcal/training.hpp"

namespace indcal {

enum class GroupKind {
  kAll,                  // every row
  kFeatureThreshold,     // one feature above / at-or-below its median
  kFeatureIntersection,  // two such conditions
  kWindow,               // a contiguous rank range of a covariate ordering
  kExplicit,             // an index set given by the caller
};
std::string to_string(GroupKind kind);

struct FeatureCondition {
  std::size_t feature = 0;
  double threshold = 0.0;
  bool above = false;  // x > threshold when set, x <= threshold otherwise
};

struct GroupSpec {
  GroupKind kind = GroupKind::kExplicit;
  std::string name;
  std::vector<FeatureCondition> conditions;
  // Window groups: ranks [rank_begin, rank_end) of the named ordering.
  std::string ordering;
  std::size_t rank_begin = 0;
  std::size_t rank_end = 0;
  std::vector<std::size_t> members;  // ascending row indices
  double size_fraction = 0.0;
};

GroupSpec whole_set_group(std::size_t n);
GroupSpec explicit_group(std::vector<std::size_t> members, std::size_t n, std::string name = "");

// W1 distance of the PIT distribution to uniform (equal to ECE).
double average_calibration_error(const EmpiricalPit& pits);

// W1 error of the PIT values of the group's members. Throws DomainError for an
// empty group or an out-of-range member.
double group_calibration_error(std::span<const double> pits, const GroupSpec& group);

// 150 rows, or max(30, ceil(0.05 n)) when n < 3000.
std::size_t default_min_group_size(std::size_t n);

// Above / at-or-below-median groups per feature (medians of `data`), plus the
// four intersections of every feature pair. Groups smaller than min_size are
// dropped.
std::vector<GroupSpec> interpretable_groups(const Dataset& data, std::size_t min_size);

// A permutation of row indices; windows of consecutive ranks are candidate
// groups for the adversarial search.
struct Ordering {
  std::string name;
  std::vector<std::size_t> order;
};

// One ordering per feature, plus the forecaster's predicted mu and sigma at
// r = 1/2 when a forecaster is given. Ties keep row order. Every ordering
// depends on x only, never on the label.
std::vector<Ordering> covariate_orderings(const Dataset& data, const Forecaster* f = nullptr);

struct CurvePoint {
  double delta = 0.0;
  double epsilon_hat = 0.0;
  GroupSpec witness;
};

struct AdversarialOptions {
  std::vector<double> deltas{0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
  // Up to this many rows every contiguous window of every ordering is a
  // candidate; above it, windows of each requested size with stride
  // max(1, ceil(m / 4)) plus the end-aligned window.
  std::size_t exhaustive_max_n = 64;
};

// Heuristic lower bound on the adversarial group calibration error. For each
// delta, epsilon_hat is the largest group error among candidates with at
// least ceil(delta n) members. The candidate family is shared by all deltas,
// so epsilon_hat is non-increasing in delta, and at delta = 1 only the whole
// set qualifies.
std::vector<CurvePoint> adversarial_curve_from_pits(std::span<const double> pits,
                                                    std::span<const Ordering> orderings,
                                                    std::span<const GroupSpec> extra_groups,
                                                    const AdversarialOptions& options = {});

// Draws a PIT sample and searches windows of covariate_orderings(data, &f)
// plus the interpretable groups of data.
std::vector<CurvePoint> adversarial_curve(const Forecaster& f, const Dataset& data,
                                          std::span<const double> deltas, Rng& rng);

struct Sharpness {
  double mean_nll = 0.0;
  double mean_sigma = 0.0;  // sigma of the Gaussian part of each forecast
};

Sharpness sharpness(const Forecaster& f, const Dataset& data, Rng& rng);

// Isotonic recalibration: PAV fit of the empirical rank i/(n+1) on the sorted
// validation PIT values, anchored at (0,0) and (1,1). Throws ConfigError with
// fewer than 10 rows.
MonotoneStepFn fit_recalibration_map(std::span<const double> pits);
Forecaster recalibrate(const Forecaster& f, const Dataset& val, Rng& rng);

// Fraction of rows with |PIT_i - r_i| >= epsilon.
double violation_fraction(const PitSample& sample, double epsilon);
double mpaic_violation_fraction(const Forecaster& f, const Dataset& data, double epsilon, Rng& rng);

// For up to max_rows rows, evaluates h(x, r_j)(y) on the grid r_j = (j + 1/2) / m
// and scores the fraction of grid pairs ordered in the better-fitting
// direction (ties count for both). Returns the mean score.
double monotonicity_diagnostic(const Forecaster& f, const Dataset& data, std::size_t m, Rng& rng,
                               std::size_t max_rows = 256);

struct GroupError {
  GroupSpec group;
  double error = 0.0;
};

struct EvalOptions {
  AdversarialOptions adversarial;
  double epsilon = 0.1;
  double gamma = 0.05;
  std::size_t monotone_grid = 16;
  std::size_t monotone_rows = 256;
  // Seeds per row for the stratified average error; 0 disables it.
  std::size_t stratified_draws = 16;
  // 0 selects default_min_group_size(n).
  std::size_t min_group_size = 0;
};

struct CalibrationReport {
  std::size_t n = 0;
  double average_w1 = 0.0;
  double average_ece = 0.0;
  std::optional<double> average_w1_stratified;
  std::vector<CurvePoint> adversarial_curve;
  std::size_t min_group_size = 0;
  std::vector<GroupError> interpretable;
  std::optional<GroupError> interpretable_worst;
  Sharpness sharpness;
  MpaicCertificate mpaic;
  double monotone_fraction = 0.0;

  // epsilon_hat at the given delta; throws DomainError when absent.
  double epsilon_at(double delta) const;
};

// Full evaluation. Randomness is split per unit from `seed` (pit, sharpness,
// certificate, monotone, stratified), so the result does not depend on the
// order units run in.
CalibrationReport evaluate(const Forecaster& f, const Dataset& data, const EvalOptions& options,
                           std::uint64_t seed);

}  // namespace indcal
