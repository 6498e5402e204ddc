#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace indcal {

// Per-feature affine map fitted on a training split: (x - mean) / scale.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;

  std::size_t dim() const noexcept { return mean.size(); }
  void apply(std::span<const double> x, std::span<double> out) const;
  bool operator==(const Standardization&) const = default;
};

// n x d feature matrix (row-major) with one real label per row.
class Dataset {
 public:
  Dataset(std::vector<double> features, std::vector<double> labels,
          std::vector<std::string> feature_names, std::string target_name = "y");

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return names_.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim(), dim()};
  }
  double label(std::size_t i) const { return labels_[i]; }
  std::span<const double> labels() const noexcept { return labels_; }
  std::span<const double> features() const noexcept { return features_; }
  double feature(std::size_t i, std::size_t j) const { return features_[i * dim() + j]; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }
  const std::string& target_name() const noexcept { return target_; }

  // Standardization already applied to the features, if any.
  const std::optional<Standardization>& standardization() const noexcept { return record_; }
  void set_standardization(Standardization record) { record_ = std::move(record); }

  Dataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset& other) const;

 private:
  std::vector<double> features_;
  std::vector<double> labels_;
  std::vector<std::string> names_;
  std::string target_;
  std::optional<Standardization> record_;
};

enum class GeneratorKind { kToy, kHeteroscedastic, kCredit };
// kSkewRight: exponential. kHeavySkewRight: chi-square with one degree of
// freedom. The left variants are their mirror images.
enum class NoiseShape {
  kGaussian,
  kSkewRight,
  kSkewLeft,
  kHeavySkewRight,
  kHeavySkewLeft,
  kBimodal,
  kLaplace,
};

std::string to_string(GeneratorKind kind);
std::string to_string(NoiseShape shape);
GeneratorKind parse_generator_kind(const std::string& text);
NoiseShape parse_noise_shape(const std::string& text);

// One latent subgroup of the heteroscedastic generator. Noise draws are
// standardized to mean 0 and variance 1 before scaling, whatever the shape.
struct SubgroupSpec {
  double mean_shift = 0.0;
  double noise_scale = 1.0;
  NoiseShape shape = NoiseShape::kGaussian;
};

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::kHeteroscedastic;
  std::size_t n = 1000;
  std::size_t dim = 8;
  std::uint64_t seed = 0;
  // Label noise standard deviation for the toy and credit generators.
  double noise = 0.1;
  // Toy: fraction of the x-range occupied by the oscillating region.
  double region_fraction = 0.25;
  // Heteroscedastic: groups are equal-probability bins of feature 0.
  std::vector<SubgroupSpec> groups;
  // Credit: population quantile of the label used as the approval threshold.
  double credit_quantile = 0.3;

  // Throws ConfigError on n == 0, dim == 0, negative noise, empty groups, ...
  void validate() const;
};

// The standard benchmark generators.
GeneratorSpec default_toy_spec();
GeneratorSpec default_heteroscedastic_spec();
GeneratorSpec default_credit_spec();

Dataset gen_toy(const GeneratorSpec& spec);
Dataset gen_heteroscedastic(const GeneratorSpec& spec);

struct CreditData {
  Dataset data;
  double y0;
};
CreditData gen_credit(const GeneratorSpec& spec);

// Dispatch on spec.kind. For the credit generator the threshold is dropped.
Dataset generate(const GeneratorSpec& spec);

// Ground-truth conditional mean / standard deviation of a generator. The
// conditional law is exactly Gaussian for toy, for credit before clipping,
// and for heteroscedastic groups with NoiseShape::kGaussian.
double true_mean(const GeneratorSpec& spec, std::span<const double> x);
double true_stdev(const GeneratorSpec& spec, std::span<const double> x);
// Heteroscedastic latent group index of x.
std::size_t latent_group(const GeneratorSpec& spec, std::span<const double> x);
// Toy: whether x falls in the oscillating region.
bool in_toy_region(const GeneratorSpec& spec, double x);

// CSV with a header row, comma separator, '.' decimal point. Every value is
// written in shortest round-trip form. The label column comes last.
void write_csv(const Dataset& data, const std::filesystem::path& path);
std::string to_csv(const Dataset& data);

// Reads numeric CSV; target_column is excluded from the features.
// Throws ConfigError for a missing column and ParseError (with row/column)
// for a non-numeric or missing cell.
Dataset load_csv(const std::filesystem::path& path, const std::string& target_column = "y");
Dataset parse_csv(const std::string& text, const std::string& target_column = "y");

// Deterministic shuffle-split. Fractions must sum to 1 within 1e-9.
std::vector<Dataset> split(const Dataset& data, std::span<const double> fractions,
                           std::uint64_t seed);

// Fits per-feature mean and scale (population standard deviation; constant
// columns get scale 1).
Standardization fit_standardization(const Dataset& train);
// Returns a copy with standardized features and the record attached.
Dataset standardize(const Dataset& data, const Standardization& record);

}  // namespace indcal
