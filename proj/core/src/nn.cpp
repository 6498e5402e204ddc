#include "indcal/nn.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "indcal/errors.hpp"
#include "indcal/random.hpp"

namespace indcal {

namespace {

std::uint64_t next_revision() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

std::size_t MlpLayout::layer_in(std::size_t k) const {
  if (k == 0) return input_dim + (seed_input ? 1 : 0);
  return hidden[k - 1] + (appends_seed(k) ? 1 : 0);
}

std::size_t MlpLayout::layer_out(std::size_t k) const {
  return k < hidden.size() ? hidden[k] : output_dim;
}

bool MlpLayout::appends_seed(std::size_t k) const {
  if (!seed_input) return false;
  // The input layer always carries r; hidden activations carry it except the
  // last hidden layer (whose consumer is the output layer).
  return k + 1 < num_layers() || k == 0;
}

std::size_t MlpLayout::weight_offset(std::size_t k) const {
  std::size_t offset = 0;
  for (std::size_t j = 0; j < k; ++j) offset += (layer_in(j) + 1) * layer_out(j);
  return offset;
}

std::size_t MlpLayout::bias_offset(std::size_t k) const {
  return weight_offset(k) + layer_in(k) * layer_out(k);
}

std::size_t MlpLayout::parameter_count() const { return weight_offset(num_layers()); }

MlpLayout layout_from_sizes(std::span<const std::size_t> sizes, bool seed_input) {
  if (sizes.size() < 3) {
    throw ConfigError("layer sizes need an input, at least one hidden layer, and an output");
  }
  for (std::size_t s : sizes) {
    if (s == 0) throw ConfigError("layer sizes must be >= 1");
  }
  MlpLayout layout;
  layout.input_dim = sizes.front();
  layout.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
  layout.output_dim = sizes.back();
  layout.seed_input = seed_input;
  return layout;
}

MlpParams::MlpParams(MlpLayout layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)), revision_(next_revision()) {
  if (layout_.hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  if (values_.size() != layout_.parameter_count()) {
    throw ShapeError("parameter vector has " + std::to_string(values_.size()) +
                     " entries, layout needs " + std::to_string(layout_.parameter_count()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw DomainError("non-finite network parameter");
  }
}

std::span<double> MlpParams::mutable_values() {
  revision_ = next_revision();
  return values_;
}

MlpParams mlp_init(const MlpLayout& layout, std::uint64_t seed) {
  if (layout.hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  std::vector<double> values(layout.parameter_count(), 0.0);
  Rng rng(seed);
  for (std::size_t k = 0; k < layout.num_layers(); ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layout.layer_in(k)));
    const std::size_t w = layout.weight_offset(k);
    const std::size_t count = layout.layer_in(k) * layout.layer_out(k);
    for (std::size_t i = 0; i < count; ++i) values[w + i] = scale * rng.normal();
  }
  return MlpParams(layout, std::move(values));
}

MlpParams mlp_init(std::span<const std::size_t> sizes, std::uint64_t seed) {
  return mlp_init(layout_from_sizes(sizes), seed);
}

std::span<const double> mlp_forward_raw(const MlpParams& params, std::span<const double> x,
                                        double r, ForwardTrace& trace) {
  const MlpLayout& layout = params.layout();
  if (x.size() != layout.input_dim) {
    throw ShapeError("network expects " + std::to_string(layout.input_dim) + " features, got " +
                     std::to_string(x.size()));
  }
  if (!std::isfinite(r)) throw DomainError("non-finite forecast seed");
  for (double v : x) {
    if (!std::isfinite(v)) throw DomainError("non-finite network input");
  }

  const std::size_t layers = layout.num_layers();
  trace.revision = params.revision();
  trace.seed = r;
  trace.inputs.resize(layers);

  auto& in0 = trace.inputs[0];
  in0.assign(x.begin(), x.end());
  if (layout.seed_input) in0.push_back(r);

  const auto w = params.values();
  for (std::size_t k = 0; k < layers; ++k) {
    const auto& in = trace.inputs[k];
    const std::size_t n_in = layout.layer_in(k);
    const std::size_t n_out = layout.layer_out(k);
    const double* weights = w.data() + layout.weight_offset(k);
    const double* bias = w.data() + layout.bias_offset(k);
    const bool last = k + 1 == layers;
    std::vector<double>& out = last ? trace.output : trace.inputs[k + 1];
    out.resize(n_out + (!last && layout.appends_seed(k + 1) ? 1 : 0));
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* row = weights + o * n_in;
      double z = bias[o];
      for (std::size_t i = 0; i < n_in; ++i) z += row[i] * in[i];
      out[o] = last ? z : std::tanh(z);
    }
    if (!last && layout.appends_seed(k + 1)) out[n_out] = r;
  }
  return trace.output;
}

void mlp_backward_raw(const MlpParams& params, const ForwardTrace& trace,
                      std::span<const double> d_output, std::span<double> grad, double scale) {
  const MlpLayout& layout = params.layout();
  if (trace.revision != params.revision()) {
    throw ContractError("forward trace was recorded with different parameters");
  }
  if (grad.size() != layout.parameter_count()) throw ShapeError("gradient buffer size mismatch");
  if (d_output.size() != layout.output_dim) throw ShapeError("output gradient size mismatch");

  const auto w = params.values();
  // delta holds d(objective)/d(pre-activation) of the current layer.
  std::vector<double> delta(d_output.begin(), d_output.end());
  for (double& d : delta) d *= scale;
  std::vector<double> upstream;

  for (std::size_t k = layout.num_layers(); k-- > 0;) {
    const auto& in = trace.inputs[k];
    const std::size_t n_in = layout.layer_in(k);
    const std::size_t n_out = layout.layer_out(k);
    const double* weights = w.data() + layout.weight_offset(k);
    double* g_w = grad.data() + layout.weight_offset(k);
    double* g_b = grad.data() + layout.bias_offset(k);

    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      g_b[o] += d;
      double* g_row = g_w + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) g_row[i] += d * in[i];
    }
    if (k == 0) break;

    // Through the weights to the previous activation (the appended r, if any,
    // is not a parameter and is skipped), then through tanh.
    const std::size_t n_prev = layout.hidden[k - 1];
    upstream.assign(n_prev, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = weights + o * n_in;
      for (std::size_t i = 0; i < n_prev; ++i) upstream[i] += d * row[i];
    }
    for (std::size_t i = 0; i < n_prev; ++i) {
      const double a = in[i];
      upstream[i] *= (1.0 - a * a);
    }
    delta.swap(upstream);
  }
}

double softplus(double s) {
  // log(1 + e^s) without overflow.
  return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

GaussianOutput mlp_forward(const MlpParams& params, std::span<const double> x, double r,
                           ForwardTrace& trace, double sigma_floor) {
  if (params.layout().output_dim != 2) {
    throw ShapeError("Gaussian head needs a network with exactly 2 outputs");
  }
  const auto out = mlp_forward_raw(params, x, r, trace);
  return {out[0], softplus(out[1]) + sigma_floor};
}

double sigma_head_slope(const ForwardTrace& trace) { return sigmoid(trace.output.at(1)); }

void mlp_backward_accumulate(const MlpParams& params, const ForwardTrace& trace, double d_mu,
                             double d_sigma, std::span<double> grad, double scale) {
  const double d_out[2] = {d_mu, d_sigma * sigma_head_slope(trace)};
  mlp_backward_raw(params, trace, d_out, grad, scale);
}

std::vector<double> mlp_backward(const MlpParams& params, const ForwardTrace& trace,
                                 double d_mu, double d_sigma) {
  std::vector<double> grad(params.layout().parameter_count(), 0.0);
  mlp_backward_accumulate(params, trace, d_mu, d_sigma, grad);
  return grad;
}

AdamState adam_init(std::size_t parameter_count, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  state.first_moment.assign(parameter_count, 0.0);
  state.second_moment.assign(parameter_count, 0.0);
  return state;
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw ShapeError("adam: parameter, gradient and state sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw TrainingError("adam: non-finite gradient at parameter index " + std::to_string(i) +
                          " (step " + std::to_string(state.step) + ")");
    }
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

void adam_step(MlpParams& params, std::span<const double> grads, AdamState& state) {
  adam_update(params.mutable_values(), grads, state);
}

}  // namespace indcal
