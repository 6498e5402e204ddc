#include "indcal/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "indcal/errors.hpp"

namespace indcal {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite argument");
}

// Integral over [a, b] of |level - u| du.
double abs_gap_integral(double level, double a, double b) {
  if (b <= a) return 0.0;
  if (level <= a) return (b - a) * (0.5 * (a + b) - level);
  if (level >= b) return (b - a) * (level - 0.5 * (a + b));
  const double left = level - a;
  const double right = b - level;
  return 0.5 * (left * left + right * right);
}

}  // namespace

double std_normal_cdf(double z) {
  require_finite(z, "std_normal_cdf");
  const double p = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return std::clamp(p, kCdfTiny, 1.0 - kCdfTiny);
}

double std_normal_pdf(double z) {
  require_finite(z, "std_normal_pdf");
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double std_normal_inv_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("std_normal_inv_cdf: p must lie in (0,1), got " + std::to_string(p));
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

EmpiricalPit::EmpiricalPit(std::span<const double> values)
    : values_(values.begin(), values.end()) {
  validate_and_sort();
}

EmpiricalPit::EmpiricalPit(std::vector<double>&& values) : values_(std::move(values)) {
  validate_and_sort();
}

void EmpiricalPit::validate_and_sort() {
  if (values_.empty()) throw DomainError("EmpiricalPit: empty sample");
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw DomainError("EmpiricalPit: value outside [0,1]: " + std::to_string(v));
    }
  }
  std::sort(values_.begin(), values_.end());
}

double w1_to_uniform(const EmpiricalPit& pits) {
  const auto v = pits.sorted();
  const double n = static_cast<double>(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = static_cast<double>(i) / n;
    const double b = static_cast<double>(i + 1) / n;
    total += abs_gap_integral(v[i], a, b);
  }
  return total;
}

double ece(const EmpiricalPit& pits) {
  // Between consecutive distinct order statistics the empirical CDF is the
  // constant k/n, where k counts the values at or below the left end.
  const auto v = pits.sorted();
  const double n = static_cast<double>(v.size());
  double total = abs_gap_integral(0.0, 0.0, v.front());
  std::size_t k = 0;
  while (k < v.size()) {
    const double left = v[k];
    while (k < v.size() && v[k] == left) ++k;
    const double right = k < v.size() ? v[k] : 1.0;
    total += abs_gap_integral(static_cast<double>(k) / n, left, right);
  }
  return total;
}

MonotoneStepFn::MonotoneStepFn(std::vector<Knot> knots) : knots_(std::move(knots)) {
  if (knots_.empty()) throw DomainError("MonotoneStepFn: no knots");
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i].input) || !std::isfinite(knots_[i].output)) {
      throw DomainError("MonotoneStepFn: non-finite knot");
    }
    if (i > 0) {
      if (!(knots_[i].input > knots_[i - 1].input)) {
        throw DomainError("MonotoneStepFn: knot inputs must be strictly ascending");
      }
      if (knots_[i].output < knots_[i - 1].output) {
        throw DomainError("MonotoneStepFn: knot outputs must be non-decreasing");
      }
    }
  }
}

double MonotoneStepFn::operator()(double u) const {
  if (u <= knots_.front().input) return knots_.front().output;
  if (u >= knots_.back().input) return knots_.back().output;
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), u,
                                   [](double x, const Knot& k) { return x < k.input; });
  const Knot& hi = *it;
  const Knot& lo = *(it - 1);
  const double t = (u - lo.input) / (hi.input - lo.input);
  return lo.output + t * (hi.output - lo.output);
}

double MonotoneStepFn::slope(double u) const {
  if (u < knots_.front().input || u >= knots_.back().input) return 0.0;
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), u,
                                   [](double x, const Knot& k) { return x < k.input; });
  const Knot& hi = *it;
  const Knot& lo = *(it - 1);
  return (hi.output - lo.output) / (hi.input - lo.input);
}

double MonotoneStepFn::inverse(double v) const {
  if (v <= knots_.front().output) {
    // Flat start: every u up to the last knot still at this level maps to v.
    std::size_t j = 0;
    while (j + 1 < knots_.size() && knots_[j + 1].output <= knots_.front().output) ++j;
    return v < knots_.front().output ? knots_.front().input
                                     : 0.5 * (knots_.front().input + knots_[j].input);
  }
  if (v >= knots_.back().output) {
    std::size_t j = knots_.size() - 1;
    while (j > 0 && knots_[j - 1].output >= knots_.back().output) --j;
    return v > knots_.back().output ? knots_.back().input
                                    : 0.5 * (knots_[j].input + knots_.back().input);
  }
  // First knot with output >= v, and last knot with output <= v.
  const auto first_ge = std::lower_bound(knots_.begin(), knots_.end(), v,
                                         [](const Knot& k, double x) { return k.output < x; });
  const auto last_le = std::upper_bound(knots_.begin(), knots_.end(), v,
                                        [](double x, const Knot& k) { return x < k.output; }) -
                       1;
  if (first_ge->output == v) {
    return 0.5 * (first_ge->input + last_le->input);
  }
  const Knot& hi = *first_ge;
  const Knot& lo = *(first_ge - 1);
  const double t = (v - lo.output) / (hi.output - lo.output);
  return lo.input + t * (hi.input - lo.input);
}

namespace {

struct Block {
  double sum;
  double weight;
  std::size_t first;  // index of first distinct position in the block
  std::size_t last;   // one past the last distinct position
  double mean() const { return sum / weight; }
};

struct Pooled {
  std::vector<double> positions;  // distinct positions
  std::vector<double> values;     // fitted value per distinct position
  std::vector<std::size_t> group_of_point;
};

Pooled run_pav(std::span<const IsotonicPoint> points) {
  if (points.empty()) throw DomainError("pav_isotonic: empty input");
  Pooled out;
  out.group_of_point.resize(points.size());
  std::vector<double> sums;
  std::vector<double> weights;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.position) || !std::isfinite(p.target)) {
      throw DomainError("pav_isotonic: non-finite point");
    }
    if (i > 0 && p.position < points[i - 1].position) {
      throw DomainError("pav_isotonic: positions must be sorted ascending");
    }
    if (out.positions.empty() || p.position != out.positions.back()) {
      out.positions.push_back(p.position);
      sums.push_back(0.0);
      weights.push_back(0.0);
    }
    sums.back() += p.target;
    weights.back() += 1.0;
    out.group_of_point[i] = out.positions.size() - 1;
  }

  std::vector<Block> stack;
  stack.reserve(out.positions.size());
  for (std::size_t g = 0; g < out.positions.size(); ++g) {
    stack.push_back({sums[g], weights[g], g, g + 1});
    while (stack.size() > 1 && stack[stack.size() - 2].mean() > stack.back().mean()) {
      Block top = stack.back();
      stack.pop_back();
      Block& below = stack.back();
      below.sum += top.sum;
      below.weight += top.weight;
      below.last = top.last;
    }
  }
  out.values.resize(out.positions.size());
  for (const auto& b : stack) {
    std::fill(out.values.begin() + static_cast<std::ptrdiff_t>(b.first),
              out.values.begin() + static_cast<std::ptrdiff_t>(b.last), b.mean());
  }
  return out;
}

}  // namespace

MonotoneStepFn pav_isotonic(std::span<const IsotonicPoint> points) {
  Pooled pooled = run_pav(points);
  std::vector<Knot> knots(pooled.positions.size());
  for (std::size_t g = 0; g < knots.size(); ++g) {
    knots[g] = {pooled.positions[g], pooled.values[g]};
  }
  // Pooled block means can differ from their neighbours by rounding only.
  for (std::size_t g = 1; g < knots.size(); ++g) {
    knots[g].output = std::max(knots[g].output, knots[g - 1].output);
  }
  return MonotoneStepFn(std::move(knots));
}

std::vector<double> pav_fitted_values(std::span<const IsotonicPoint> points) {
  Pooled pooled = run_pav(points);
  std::vector<double> fitted(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    fitted[i] = pooled.values[pooled.group_of_point[i]];
  }
  return fitted;
}

}  // namespace indcal
