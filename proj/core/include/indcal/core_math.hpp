#pragma once

#include <span>
#include <utility>
#include <vector>

namespace indcal {

// Lower / upper clamp applied to every CDF value so that logs stay finite.
inline constexpr double kCdfTiny = 1e-15;

// Standard normal CDF, clamped to [kCdfTiny, 1 - kCdfTiny].
// Throws DomainError for non-finite z.
double std_normal_cdf(double z);

// Standard normal density (unclamped).
double std_normal_pdf(double z);

// Standard normal quantile. Requires 0 < p < 1.
double std_normal_inv_cdf(double p);

// Sorted sample of probability-integral-transform values in [0,1].
class EmpiricalPit {
 public:
  // Copies and sorts. Throws DomainError when empty or any value is outside
  // [0,1] or non-finite.
  explicit EmpiricalPit(std::span<const double> values);
  explicit EmpiricalPit(std::vector<double>&& values);

  std::span<const double> sorted() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  void validate_and_sort();
  std::vector<double> values_;
};

// Wasserstein-1 distance between the empirical PIT distribution and U[0,1],
// evaluated in closed form through the monotone (quantile) coupling:
//   sum_i  integral over ((i-1)/n, i/n] of |p_(i) - u| du.
// Always in [0, 0.5].
double w1_to_uniform(const EmpiricalPit& pits);

// Expected calibration error: integral over thresholds c in [0,1] of
// |Pr[PIT <= c] - c|, evaluated in closed form between consecutive order
// statistics. Equal to w1_to_uniform up to rounding; the two are computed
// along different routes on purpose.
double ece(const EmpiricalPit& pits);

struct Knot {
  double input;
  double output;
};

// Non-decreasing piecewise-linear map on [0,1] defined by knots.
// Evaluation clamps outside [first.input, last.input].
class MonotoneStepFn {
 public:
  // Throws DomainError unless inputs are strictly ascending, outputs
  // non-decreasing, and everything is finite.
  explicit MonotoneStepFn(std::vector<Knot> knots);

  double operator()(double u) const;
  // Right derivative of the map at u (0 outside the knot range).
  double slope(double u) const;
  // Preimage of v. When the map is flat at level v the midpoint of the flat
  // segment is returned; outside the output range the end knot is returned.
  double inverse(double v) const;

  const std::vector<Knot>& knots() const noexcept { return knots_; }

 private:
  std::vector<Knot> knots_;
};

struct IsotonicPoint {
  double position;
  double target;
};

// Least-squares non-decreasing fit by pool-adjacent-violators. Points must be
// sorted by position (ties allowed); tied positions are pooled first. The
// returned function has one knot per distinct position.
MonotoneStepFn pav_isotonic(std::span<const IsotonicPoint> points);

// Block values of the PAV fit, one per input point (same order).
std::vector<double> pav_fitted_values(std::span<const IsotonicPoint> points);

}  // namespace indcal
