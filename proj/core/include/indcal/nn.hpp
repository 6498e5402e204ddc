#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace indcal {

// Default floor added to the softplus standard-deviation head.
inline constexpr double kSigmaFloor = 1e-3;

// Shape of a dense tanh network.
//
// Layer k maps its input vector to hidden[k] units (or to output_dim units for
// the final layer). With seed_input set, the forecast seed r is appended to the
// raw features and to every hidden activation except the last hidden layer:
//
//   [x, r] -> h1 -> [h1, r] -> h2 -> ... -> [h_{L-1}, r] -> h_L -> output
//
// Parameters are stored flat, layer by layer: row-major weights
// (out x in) followed by the bias vector.
struct MlpLayout {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 2;
  bool seed_input = true;

  std::size_t num_layers() const noexcept { return hidden.size() + 1; }
  std::size_t layer_in(std::size_t k) const;
  std::size_t layer_out(std::size_t k) const;
  bool appends_seed(std::size_t k) const;
  std::size_t weight_offset(std::size_t k) const;
  std::size_t bias_offset(std::size_t k) const;
  std::size_t parameter_count() const;

  bool operator==(const MlpLayout&) const = default;
};

// Layout from [d_in, h_1, ..., h_L, out]; d_in counts features only.
// Throws ConfigError without at least one hidden layer or with a zero size.
MlpLayout layout_from_sizes(std::span<const std::size_t> sizes, bool seed_input = true);

class MlpParams {
 public:
  MlpParams(MlpLayout layout, std::vector<double> values);

  const MlpLayout& layout() const noexcept { return layout_; }
  std::span<const double> values() const noexcept { return values_; }
  // Mutable access marks the parameters as a new revision, so forward traces
  // recorded earlier are rejected by mlp_backward.
  std::span<double> mutable_values();
  std::uint64_t revision() const noexcept { return revision_; }

 private:
  MlpLayout layout_;
  std::vector<double> values_;
  std::uint64_t revision_;
};

// LeCun-normal weights N(0, 1/fan_in), zero biases. Deterministic in seed.
MlpParams mlp_init(const MlpLayout& layout, std::uint64_t seed);
MlpParams mlp_init(std::span<const std::size_t> sizes, std::uint64_t seed);

// Activations of one forward pass. Reused across calls to avoid allocation.
struct ForwardTrace {
  std::uint64_t revision = 0;
  double seed = 0.0;
  std::vector<std::vector<double>> inputs;  // input of each layer (r appended where used)
  std::vector<double> output;               // raw linear output of the last layer
};

// Raw outputs of the network.
std::span<const double> mlp_forward_raw(const MlpParams& params, std::span<const double> x,
                                        double r, ForwardTrace& trace);

// Accumulates scale * d(output . d_output)/d(params) into grad.
void mlp_backward_raw(const MlpParams& params, const ForwardTrace& trace,
                      std::span<const double> d_output, std::span<double> grad,
                      double scale = 1.0);

// Gaussian head on a 2-output network: mu = out[0],
// sigma = softplus(out[1]) + sigma_floor.
struct GaussianOutput {
  double mu;
  double sigma;
};

GaussianOutput mlp_forward(const MlpParams& params, std::span<const double> x, double r,
                           ForwardTrace& trace, double sigma_floor = kSigmaFloor);

// d(sigma)/d(out[1]) for a recorded trace.
double sigma_head_slope(const ForwardTrace& trace);

// Gradient of d_mu * mu + d_sigma * sigma with respect to every parameter.
std::vector<double> mlp_backward(const MlpParams& params, const ForwardTrace& trace,
                                 double d_mu, double d_sigma);
void mlp_backward_accumulate(const MlpParams& params, const ForwardTrace& trace, double d_mu,
                             double d_sigma, std::span<double> grad, double scale = 1.0);

double softplus(double s);
double sigmoid(double s);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
};

AdamState adam_init(std::size_t parameter_count, const AdamConfig& config = {});

// Bias-corrected Adam update of a flat parameter vector, in place.
// Throws TrainingError when a gradient entry is non-finite.
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state);
void adam_step(MlpParams& params, std::span<const double> grads, AdamState& state);

}  // namespace indcal
