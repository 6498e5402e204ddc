#include "indcal/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "indcal/errors.hpp"
#include "indcal/random.hpp"

namespace indcal {

void Standardization::apply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != mean.size() || out.size() != mean.size()) {
    throw ShapeError("standardization dimension mismatch");
  }
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
}

Dataset::Dataset(std::vector<double> features, std::vector<double> labels,
                 std::vector<std::string> feature_names, std::string target_name)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      names_(std::move(feature_names)),
      target_(std::move(target_name)) {
  if (labels_.empty()) throw DomainError("dataset needs at least one row");
  if (names_.empty()) throw ShapeError("dataset needs at least one feature");
  if (features_.size() != labels_.size() * names_.size()) {
    throw ShapeError("feature matrix does not match n x d");
  }
  for (double v : features_) {
    if (!std::isfinite(v)) throw DomainError("dataset contains a non-finite feature");
  }
  for (double v : labels_) {
    if (!std::isfinite(v)) throw DomainError("dataset contains a non-finite label");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> features;
  std::vector<double> labels;
  features.reserve(indices.size() * dim());
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw DomainError("subset index out of range");
    const auto r = row(i);
    features.insert(features.end(), r.begin(), r.end());
    labels.push_back(labels_[i]);
  }
  Dataset out(std::move(features), std::move(labels), names_, target_);
  out.record_ = record_;
  return out;
}

bool Dataset::operator==(const Dataset& other) const {
  return features_ == other.features_ && labels_ == other.labels_ && names_ == other.names_ &&
         target_ == other.target_ && record_ == other.record_;
}

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::kToy: return "toy";
    case GeneratorKind::kHeteroscedastic: return "heteroscedastic";
    case GeneratorKind::kCredit: return "credit";
  }
  return "unknown";
}

std::string to_string(NoiseShape shape) {
  switch (shape) {
    case NoiseShape::kGaussian: return "gaussian";
    case NoiseShape::kSkewRight: return "skew-right";
    case NoiseShape::kSkewLeft: return "skew-left";
    case NoiseShape::kHeavySkewRight: return "heavy-skew-right";
    case NoiseShape::kHeavySkewLeft: return "heavy-skew-left";
    case NoiseShape::kBimodal: return "bimodal";
    case NoiseShape::kLaplace: return "laplace";
  }
  return "unknown";
}

GeneratorKind parse_generator_kind(const std::string& text) {
  for (auto k : {GeneratorKind::kToy, GeneratorKind::kHeteroscedastic, GeneratorKind::kCredit}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("kind: unknown generator '" + text +
                    "' (expected toy, heteroscedastic or credit)");
}

NoiseShape parse_noise_shape(const std::string& text) {
  for (auto s : {NoiseShape::kGaussian, NoiseShape::kSkewRight, NoiseShape::kSkewLeft,
                 NoiseShape::kHeavySkewRight, NoiseShape::kHeavySkewLeft, NoiseShape::kBimodal,
                 NoiseShape::kLaplace}) {
    if (text == to_string(s)) return s;
  }
  throw ConfigError("shape: unknown noise shape '" + text + "'");
}

void GeneratorSpec::validate() const {
  if (n == 0) throw ConfigError("n: must be positive");
  if (dim == 0) throw ConfigError("dim: must be positive");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise: must be >= 0");
  if (kind == GeneratorKind::kToy && dim != 1) throw ConfigError("dim: toy generator is 1-D");
  if (kind == GeneratorKind::kToy && !(region_fraction > 0.0 && region_fraction < 1.0)) {
    throw ConfigError("region_fraction: must lie in (0,1)");
  }
  if (kind == GeneratorKind::kHeteroscedastic) {
    if (groups.empty()) throw ConfigError("groups: need at least one subgroup");
    for (const auto& g : groups) {
      if (!(g.noise_scale >= 0.0) || !std::isfinite(g.noise_scale) || !std::isfinite(g.mean_shift)) {
        throw ConfigError("groups: noise_scale must be >= 0 and values finite");
      }
    }
  }
  if (kind == GeneratorKind::kCredit && !(credit_quantile > 0.0 && credit_quantile < 1.0)) {
    throw ConfigError("credit_quantile: must lie in (0,1)");
  }
}

GeneratorSpec default_toy_spec() {
  GeneratorSpec s;
  s.kind = GeneratorKind::kToy;
  s.n = 2000;
  s.dim = 1;
  s.noise = 0.1;
  return s;
}

GeneratorSpec default_heteroscedastic_spec() {
  GeneratorSpec s;
  s.kind = GeneratorKind::kHeteroscedastic;
  s.n = 5000;
  s.dim = 8;
  // Opposite heavy skews: a Gaussian head cannot match either group's shape.
  // The mirrored parts of the two distortions cancel in the pooled PIT while
  // the shared symmetric part does not.
  s.groups = {{0.0, 0.5, NoiseShape::kHeavySkewRight}, {1.0, 2.0, NoiseShape::kHeavySkewLeft}};
  return s;
}

GeneratorSpec default_credit_spec() {
  GeneratorSpec s;
  s.kind = GeneratorKind::kCredit;
  s.n = 5000;
  s.dim = 6;
  s.noise = 0.05;
  return s;
}

namespace {

std::vector<std::string> default_names(std::size_t d) {
  std::vector<std::string> names(d);
  for (std::size_t j = 0; j < d; ++j) names[j] = "x" + std::to_string(j);
  return names;
}

// Unit-variance, zero-mean noise of the requested shape.
double standard_noise(NoiseShape shape, Rng& rng) {
  switch (shape) {
    case NoiseShape::kGaussian: return rng.normal();
    case NoiseShape::kSkewRight: return -std::log(rng.uniform_open()) - 1.0;
    case NoiseShape::kSkewLeft: return 1.0 + std::log(rng.uniform_open());
    case NoiseShape::kHeavySkewRight: {
      const double z = rng.normal();
      return (z * z - 1.0) / std::numbers::sqrt2;
    }
    case NoiseShape::kHeavySkewLeft: {
      const double z = rng.normal();
      return (1.0 - z * z) / std::numbers::sqrt2;
    }
    case NoiseShape::kBimodal: {
      const double sign = rng.uniform_open() < 0.5 ? -1.0 : 1.0;
      constexpr double norm = 0.99624294225856;  // sqrt(0.95^2 + 0.3^2)
      return (sign * 0.95 + 0.3 * rng.normal()) / norm;
    }
    case NoiseShape::kLaplace: {
      const double u = rng.uniform_open() - 0.5;
      const double b = 1.0 / std::numbers::sqrt2;
      return -b * std::copysign(1.0, u) * std::log(1.0 - 2.0 * std::abs(u));
    }
  }
  return 0.0;
}

constexpr double kToyLo = -4.0;
constexpr double kToyHi = 4.0;

struct ToyRegion {
  double start;
  double width;
};

ToyRegion toy_region(const GeneratorSpec& spec) {
  const double width = spec.region_fraction * (kToyHi - kToyLo);
  const double start = std::clamp(1.5 - 0.5 * width, kToyLo, kToyHi - width);
  return {start, width};
}

double toy_function(const GeneratorSpec& spec, double x) {
  double f = std::sin(x);
  const ToyRegion region = toy_region(spec);
  const double t = (x - region.start) / region.width;
  if (t >= 0.0 && t <= 1.0) {
    const double window = std::sin(std::numbers::pi * t);
    f += 0.8 * window * window * std::sin(6.0 * std::numbers::pi * t);
  }
  return f;
}

double hetero_base(std::span<const double> x) {
  double f = 0.5 * x[0];
  for (std::size_t j = 1; j < x.size(); ++j) {
    switch (j % 3) {
      case 1: f += std::sin(std::numbers::pi * x[j]); break;
      case 2: f += 0.8 * x[j] * x[j]; break;
      default: f += 0.6 * x[j]; break;
    }
  }
  if (x.size() >= 3) f += x[1] * x[2];
  return f;
}

double credit_probability(std::span<const double> x) {
  const auto at = [&](std::size_t j) { return j < x.size() ? x[j] : 0.0; };
  const double score = 1.2 * at(0) - 0.8 * at(1) + 0.6 * at(2) * at(3) +
                       0.8 * std::sin(1.5 * at(4)) + 0.4 * at(5) * at(5) - 0.4;
  return 1.0 / (1.0 + std::exp(-score));
}

}  // namespace

bool in_toy_region(const GeneratorSpec& spec, double x) {
  const ToyRegion region = toy_region(spec);
  return x >= region.start && x <= region.start + region.width;
}

std::size_t latent_group(const GeneratorSpec& spec, std::span<const double> x) {
  const std::size_t k = spec.groups.size();
  if (k <= 1) return 0;
  const double u = 0.5 * (x[0] + 1.0);
  const auto g = static_cast<std::size_t>(std::clamp(u, 0.0, 1.0) * static_cast<double>(k));
  return std::min(g, k - 1);
}

double true_mean(const GeneratorSpec& spec, std::span<const double> x) {
  switch (spec.kind) {
    case GeneratorKind::kToy: return toy_function(spec, x[0]);
    case GeneratorKind::kHeteroscedastic:
      return hetero_base(x) + spec.groups[latent_group(spec, x)].mean_shift;
    case GeneratorKind::kCredit: return credit_probability(x);
  }
  return 0.0;
}

double true_stdev(const GeneratorSpec& spec, std::span<const double> x) {
  if (spec.kind == GeneratorKind::kHeteroscedastic) {
    return spec.groups[latent_group(spec, x)].noise_scale;
  }
  return spec.noise;
}

Dataset gen_toy(const GeneratorSpec& spec) {
  spec.validate();
  if (spec.kind != GeneratorKind::kToy) throw ConfigError("kind: gen_toy needs a toy spec");
  Rng rng(spec.seed);
  std::vector<double> xs(spec.n);
  std::vector<double> ys(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    xs[i] = rng.uniform(kToyLo, kToyHi);
    const double eps = rng.normal();
    ys[i] = toy_function(spec, xs[i]) + spec.noise * eps;
  }
  return Dataset(std::move(xs), std::move(ys), {"x0"});
}

Dataset gen_heteroscedastic(const GeneratorSpec& spec) {
  spec.validate();
  if (spec.kind != GeneratorKind::kHeteroscedastic) {
    throw ConfigError("kind: gen_heteroscedastic needs a heteroscedastic spec");
  }
  Rng rng(spec.seed);
  std::vector<double> features(spec.n * spec.dim);
  std::vector<double> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    std::span<double> x(features.data() + i * spec.dim, spec.dim);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const SubgroupSpec& g = spec.groups[latent_group(spec, x)];
    labels[i] = true_mean(spec, x) + g.noise_scale * standard_noise(g.shape, rng);
  }
  return Dataset(std::move(features), std::move(labels), default_names(spec.dim));
}

CreditData gen_credit(const GeneratorSpec& spec) {
  spec.validate();
  if (spec.kind != GeneratorKind::kCredit) throw ConfigError("kind: gen_credit needs a credit spec");
  Rng rng(spec.seed);
  std::vector<double> features(spec.n * spec.dim);
  std::vector<double> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    std::span<double> x(features.data() + i * spec.dim, spec.dim);
    for (double& v : x) v = rng.normal();
    labels[i] = std::clamp(credit_probability(x) + spec.noise * rng.normal(), 0.0, 1.0);
  }
  std::vector<double> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  const auto q = static_cast<std::size_t>(spec.credit_quantile * static_cast<double>(spec.n - 1));
  const double y0 = sorted[q];
  return {Dataset(std::move(features), std::move(labels), default_names(spec.dim)), y0};
}

Dataset generate(const GeneratorSpec& spec) {
  switch (spec.kind) {
    case GeneratorKind::kToy: return gen_toy(spec);
    case GeneratorKind::kHeteroscedastic: return gen_heteroscedastic(spec);
    case GeneratorKind::kCredit: return gen_credit(spec).data;
  }
  throw ConfigError("kind: unknown generator");
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string to_csv(const Dataset& data) {
  std::string out;
  for (const auto& name : data.feature_names()) {
    out += name;
    out += ',';
  }
  out += data.target_name();
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) {
      append_number(out, v);
      out += ',';
    }
    append_number(out, data.label(i));
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << to_csv(data);
  if (!f) throw Error("failed writing " + path.string());
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& target_column) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("CSV: missing header row", 1);
  std::vector<std::string> header;
  for (auto f : split_fields(line)) header.emplace_back(trim(f));
  const auto target_it = std::find(header.begin(), header.end(), target_column);
  if (target_it == header.end()) {
    throw ConfigError("target column '" + target_column + "' not found in CSV header");
  }
  const auto target_idx = static_cast<std::size_t>(target_it - header.begin());
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != target_idx) names.push_back(header[j]);
  }
  if (names.empty()) throw ConfigError("CSV has no feature columns besides the target");

  std::vector<double> features;
  std::vector<double> labels;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("CSV row " + std::to_string(row) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       row);
    }
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto cell = trim(fields[j]);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
          !std::isfinite(v)) {
        throw ParseError("CSV row " + std::to_string(row) + ", column " + std::to_string(j + 1) +
                             " ('" + header[j] + "'): not a finite number: '" +
                             std::string(cell) + "'",
                         row, static_cast<long>(j + 1));
      }
      if (j == target_idx) {
        labels.push_back(v);
      } else {
        features.push_back(v);
      }
    }
  }
  if (labels.empty()) throw ParseError("CSV: no data rows", row);
  return Dataset(std::move(features), std::move(labels), std::move(names), target_column);
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target_column) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open dataset '" + path.string() + "'");
  std::stringstream buffer;
  buffer << f.rdbuf();
  return parse_csv(buffer.str(), target_column);
}

std::vector<Dataset> split(const Dataset& data, std::span<const double> fractions,
                           std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split: no fractions given");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split: fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());

  std::vector<Dataset> parts;
  double cumulative = 0.0;
  std::size_t begin = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    cumulative += fractions[k];
    std::size_t end = k + 1 == fractions.size()
                          ? data.size()
                          : static_cast<std::size_t>(
                                std::llround(cumulative * static_cast<double>(data.size())));
    end = std::clamp(end, begin, data.size());
    if (end == begin) throw ConfigError("split: part " + std::to_string(k) + " would be empty");
    parts.push_back(data.subset(std::span(order).subspan(begin, end - begin)));
    begin = end;
  }
  return parts;
}

Standardization fit_standardization(const Dataset& train) {
  const std::size_t d = train.dim();
  const double n = static_cast<double>(train.size());
  Standardization s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += train.feature(i, j);
  }
  for (double& m : s.mean) m /= n;
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = train.feature(i, j) - s.mean[j];
      s.scale[j] += c * c;
    }
  }
  for (double& v : s.scale) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

Dataset standardize(const Dataset& data, const Standardization& record) {
  if (record.dim() != data.dim()) throw ShapeError("standardization dimension mismatch");
  std::vector<double> features(data.features().begin(), data.features().end());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::span<double> row(features.data() + i * data.dim(), data.dim());
    record.apply(data.row(i), row);
  }
  Dataset out(std::move(features), std::vector<double>(data.labels().begin(), data.labels().end()),
              data.feature_names(), data.target_name());
  out.set_standardization(record);
  return out;
}

}  // namespace indcal
