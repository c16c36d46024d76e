#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crs/rng.hpp"

namespace crs::neural {

// Row-major dense matrix. Vectors are 1 x n tensors.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
};

enum class Activation { None, Gelu };

// One dense layer: z = x W^T + b, optionally layer-normalized (affine) and
// activated. Composition order is Linear -> LN -> activation.
struct Layer {
  Tensor2 weight;                 // out x in
  std::vector<double> bias;       // out
  bool layer_norm = false;
  std::vector<double> ln_gain;    // out, present iff layer_norm
  std::vector<double> ln_offset;  // out
  Activation activation = Activation::None;

  std::size_t in_dim() const { return weight.cols; }
  std::size_t out_dim() const { return weight.rows; }
};

using MlpParams = std::vector<Layer>;

// Orthogonal-style init: Gaussian draw orthonormalized over the shorter
// side, scaled by init_gain. Bias zero, LN gain 1 / offset 0.
Layer make_layer(std::size_t out_dim, std::size_t in_dim, bool layer_norm,
                 Activation activation, double init_gain, Rng& rng);

struct LayerCache {
  Tensor2 input;      // x
  Tensor2 pre_norm;   // z = x W^T + b
  Tensor2 normed;     // (z - mu) / sigma, empty unless layer_norm
  Tensor2 pre_act;    // after LN affine (or = pre_norm), before activation
  std::vector<double> inv_sigma;  // per row, layer_norm only
};

struct ForwardCache {
  std::vector<LayerCache> layers;
};

// Runs the composition; cache (optional) retains intermediates for
// backward. Throws if any activation goes non-finite, naming the layer.
Tensor2 forward(const MlpParams& params, const Tensor2& input,
                ForwardCache* cache);

struct LayerGrads {
  Tensor2 weight;
  std::vector<double> bias;
  std::vector<double> ln_gain;
  std::vector<double> ln_offset;
};

using MlpGrads = std::vector<LayerGrads>;

MlpGrads make_zero_grads(const MlpParams& params);
void zero(MlpGrads& grads);

// Exact analytic gradients of the forward composition; accumulates into
// grads and returns the gradient w.r.t. the layer input.
Tensor2 backward(const MlpParams& params, const ForwardCache& cache,
                 const Tensor2& output_grad, MlpGrads& grads);

// tanh-approximation GELU, constant 0.044715.
double gelu(double x);
double gelu_derivative(double x);

// Decoupled-weight-decay Adam over an ordered list of parameter spans.
// Moment slots are laid out to mirror the spans registered at init.
struct AdamWState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  long step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  void init(const std::vector<std::span<double>>& params);
};

// One update. maximize negates the gradient (ascent). Shapes must match
// the spans the state was initialized with.
void adamw_step(std::vector<std::span<double>> params,
                const std::vector<std::span<const double>>& grads,
                AdamWState& state, bool maximize = false);

// Parameter span collection for optimizer wiring (weights, biases, LN
// parameters, in layer order).
std::vector<std::span<double>> param_spans(MlpParams& params);
std::vector<std::span<const double>> grad_spans(const MlpGrads& grads);

// Diagonal Gaussian policy head over externally produced mean and learned
// log-std. log_std is clamped to [-5, 2] before use.
namespace gaussian {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

double clamp_log_std(double log_std);

// value = mean + exp(log_std) * noise, one noise entry per dim.
std::vector<double> sample(std::span<const double> mean,
                           std::span<const double> log_std,
                           std::span<const double> noise);

double log_prob(std::span<const double> mean, std::span<const double> log_std,
                std::span<const double> value);

double entropy(std::span<const double> log_std);

// d log_prob / d mean and / d log_std for a fixed observed value, scaled
// by coeff and accumulated into the outputs.
void accumulate_log_prob_grads(std::span<const double> mean,
                               std::span<const double> log_std,
                               std::span<const double> value, double coeff,
                               std::span<double> mean_grad,
                               std::span<double> log_std_grad);

// d entropy / d log_std is 1 per active (unclamped) dim.
void accumulate_entropy_grads(std::span<const double> log_std, double coeff,
                              std::span<double> log_std_grad);

}  // namespace gaussian

// Versioned textual checkpoint: named tensors plus key/value metadata.
// Values print at 17 significant digits, so load(save(x)) == x exactly.
struct Archive {
  std::vector<std::pair<std::string, Tensor2>> tensors;
  std::vector<std::pair<std::string, std::string>> meta;

  const Tensor2& find(const std::string& name) const;
};

void save_archive(const Archive& archive, const std::string& path);
Archive load_archive(const std::string& path);

}  // namespace crs::neural
