#include "crs/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crs::neural {

namespace {

constexpr double kLnEps = 1e-12;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;

void check_finite(const Tensor2& t, std::size_t layer_index) {
  for (double v : t.data)
    if (!std::isfinite(v))
      throw std::runtime_error("non-finite activation in layer " +
                               std::to_string(layer_index));
}

// y[r,:] += s * w[:]
inline void axpy(double s, const double* w, double* y, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) y[i] += s * w[i];
}

inline double dot(const double* a, const double* b, std::size_t len) {
  double acc = 0.0;
  for (std::size_t i = 0; i < len; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

double gelu(double x) {
  const double u = kGeluC * (x + kGeluCubic * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_derivative(double x) {
  const double u = kGeluC * (x + kGeluCubic * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluCubic * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Layer make_layer(std::size_t out_dim, std::size_t in_dim, bool layer_norm,
                 Activation activation, double init_gain, Rng& rng) {
  Layer layer;
  layer.weight = Tensor2(out_dim, in_dim);
  for (auto& v : layer.weight.data) v = rng.normal();

  // Orthonormalize the shorter side by modified Gram-Schmidt: columns when
  // out >= in, rows otherwise.
  if (out_dim >= in_dim) {
    for (std::size_t c = 0; c < in_dim; ++c) {
      for (std::size_t p = 0; p < c; ++p) {
        double proj = 0.0;
        for (std::size_t r = 0; r < out_dim; ++r)
          proj += layer.weight.at(r, c) * layer.weight.at(r, p);
        for (std::size_t r = 0; r < out_dim; ++r)
          layer.weight.at(r, c) -= proj * layer.weight.at(r, p);
      }
      double norm = 0.0;
      for (std::size_t r = 0; r < out_dim; ++r)
        norm += layer.weight.at(r, c) * layer.weight.at(r, c);
      norm = std::sqrt(norm);
      if (norm < 1e-12) norm = 1.0;
      for (std::size_t r = 0; r < out_dim; ++r) layer.weight.at(r, c) /= norm;
    }
  } else {
    for (std::size_t r = 0; r < out_dim; ++r) {
      double* row = layer.weight.row(r);
      for (std::size_t p = 0; p < r; ++p) {
        const double proj = dot(row, layer.weight.row(p), in_dim);
        axpy(-proj, layer.weight.row(p), row, in_dim);
      }
      double norm = std::sqrt(dot(row, row, in_dim));
      if (norm < 1e-12) norm = 1.0;
      for (std::size_t i = 0; i < in_dim; ++i) row[i] /= norm;
    }
  }
  for (auto& v : layer.weight.data) v *= init_gain;

  layer.bias.assign(out_dim, 0.0);
  layer.layer_norm = layer_norm;
  if (layer_norm) {
    layer.ln_gain.assign(out_dim, 1.0);
    layer.ln_offset.assign(out_dim, 0.0);
  }
  layer.activation = activation;
  return layer;
}

Tensor2 forward(const MlpParams& params, const Tensor2& input,
                ForwardCache* cache) {
  if (cache) {
    cache->layers.clear();
    cache->layers.resize(params.size());
  }
  Tensor2 x = input;
  for (std::size_t li = 0; li < params.size(); ++li) {
    const Layer& layer = params[li];
    if (x.cols != layer.in_dim())
      throw std::runtime_error("dimension mismatch at layer " +
                               std::to_string(li) + ": input cols " +
                               std::to_string(x.cols) + " vs in_dim " +
                               std::to_string(layer.in_dim()));
    const std::size_t batch = x.rows;
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();

    Tensor2 z(batch, out);
    for (std::size_t r = 0; r < batch; ++r) {
      const double* xr = x.row(r);
      double* zr = z.row(r);
      for (std::size_t o = 0; o < out; ++o)
        zr[o] = dot(xr, layer.weight.row(o), in) + layer.bias[o];
    }

    LayerCache* lc = cache ? &cache->layers[li] : nullptr;
    if (lc) {
      lc->input = x;
      lc->pre_norm = z;
    }

    Tensor2 a;
    if (layer.layer_norm) {
      Tensor2 normed(batch, out);
      a = Tensor2(batch, out);
      std::vector<double> inv_sigma(batch);
      for (std::size_t r = 0; r < batch; ++r) {
        const double* zr = z.row(r);
        double mean = 0.0;
        for (std::size_t o = 0; o < out; ++o) mean += zr[o];
        mean /= static_cast<double>(out);
        double var = 0.0;
        for (std::size_t o = 0; o < out; ++o) {
          const double d = zr[o] - mean;
          var += d * d;
        }
        var /= static_cast<double>(out);
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        inv_sigma[r] = inv;
        double* nr = normed.row(r);
        double* ar = a.row(r);
        for (std::size_t o = 0; o < out; ++o) {
          nr[o] = (zr[o] - mean) * inv;
          ar[o] = nr[o] * layer.ln_gain[o] + layer.ln_offset[o];
        }
      }
      if (lc) {
        lc->normed = std::move(normed);
        lc->inv_sigma = std::move(inv_sigma);
      }
    } else {
      a = z;
    }
    if (lc) lc->pre_act = a;

    if (layer.activation == Activation::Gelu) {
      for (auto& v : a.data) v = gelu(v);
    }
    check_finite(a, li);
    x = std::move(a);
  }
  return x;
}

MlpGrads make_zero_grads(const MlpParams& params) {
  MlpGrads grads(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    grads[i].weight = Tensor2(params[i].out_dim(), params[i].in_dim());
    grads[i].bias.assign(params[i].out_dim(), 0.0);
    if (params[i].layer_norm) {
      grads[i].ln_gain.assign(params[i].out_dim(), 0.0);
      grads[i].ln_offset.assign(params[i].out_dim(), 0.0);
    }
  }
  return grads;
}

void zero(MlpGrads& grads) {
  for (auto& g : grads) {
    std::fill(g.weight.data.begin(), g.weight.data.end(), 0.0);
    std::fill(g.bias.begin(), g.bias.end(), 0.0);
    std::fill(g.ln_gain.begin(), g.ln_gain.end(), 0.0);
    std::fill(g.ln_offset.begin(), g.ln_offset.end(), 0.0);
  }
}

Tensor2 backward(const MlpParams& params, const ForwardCache& cache,
                 const Tensor2& output_grad, MlpGrads& grads) {
  if (cache.layers.size() != params.size() || grads.size() != params.size())
    throw std::runtime_error("stale cache: layer count mismatch");

  Tensor2 grad = output_grad;
  for (std::size_t li = params.size(); li-- > 0;) {
    const Layer& layer = params[li];
    const LayerCache& lc = cache.layers[li];
    const std::size_t batch = lc.input.rows;
    const std::size_t out = layer.out_dim();
    const std::size_t in = layer.in_dim();
    if (grad.rows != batch || grad.cols != out)
      throw std::runtime_error("stale cache: gradient shape mismatch at layer " +
                               std::to_string(li));

    // Through the activation.
    Tensor2 da = grad;
    if (layer.activation == Activation::Gelu) {
      for (std::size_t idx = 0; idx < da.data.size(); ++idx)
        da.data[idx] *= gelu_derivative(lc.pre_act.data[idx]);
    }

    // Through layer norm (affine, then normalization).
    Tensor2 dz(batch, out);
    if (layer.layer_norm) {
      for (std::size_t r = 0; r < batch; ++r) {
        const double* dar = da.row(r);
        const double* nr = lc.normed.row(r);
        double* gln_gain = grads[li].ln_gain.data();
        double* gln_off = grads[li].ln_offset.data();
        double mean_dn = 0.0;
        double mean_dn_n = 0.0;
        for (std::size_t o = 0; o < out; ++o) {
          gln_gain[o] += dar[o] * nr[o];
          gln_off[o] += dar[o];
          const double dn = dar[o] * layer.ln_gain[o];
          mean_dn += dn;
          mean_dn_n += dn * nr[o];
        }
        mean_dn /= static_cast<double>(out);
        mean_dn_n /= static_cast<double>(out);
        double* dzr = dz.row(r);
        const double inv = lc.inv_sigma[r];
        for (std::size_t o = 0; o < out; ++o) {
          const double dn = dar[o] * layer.ln_gain[o];
          dzr[o] = inv * (dn - mean_dn - nr[o] * mean_dn_n);
        }
      }
    } else {
      dz = std::move(da);
    }

    // Through the linear map.
    for (std::size_t r = 0; r < batch; ++r) {
      const double* dzr = dz.row(r);
      const double* xr = lc.input.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        grads[li].bias[o] += dzr[o];
        axpy(dzr[o], xr, grads[li].weight.row(o), in);
      }
    }
    Tensor2 dx(batch, in);
    for (std::size_t r = 0; r < batch; ++r) {
      double* dxr = dx.row(r);
      const double* dzr = dz.row(r);
      for (std::size_t o = 0; o < out; ++o)
        axpy(dzr[o], layer.weight.row(o), dxr, in);
    }
    grad = std::move(dx);
  }
  return grad;
}

void AdamWState::init(const std::vector<std::span<double>>& params) {
  first_moment.clear();
  second_moment.clear();
  for (const auto& p : params) {
    first_moment.emplace_back(p.size(), 0.0);
    second_moment.emplace_back(p.size(), 0.0);
  }
  step_count = 0;
}

void adamw_step(std::vector<std::span<double>> params,
                const std::vector<std::span<const double>>& grads,
                AdamWState& state, bool maximize) {
  if (state.first_moment.size() != params.size())
    throw std::runtime_error("AdamW state not initialized for these params");
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t];
    const auto& g = grads[t];
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    if (p.size() != g.size() || p.size() != m.size())
      throw std::runtime_error("AdamW shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = maximize ? -g[i] : g[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= state.lr * (m_hat / (std::sqrt(v_hat) + state.eps) +
                          state.weight_decay * p[i]);
    }
  }
}

std::vector<std::span<double>> param_spans(MlpParams& params) {
  std::vector<std::span<double>> out;
  for (auto& layer : params) {
    out.emplace_back(layer.weight.data);
    out.emplace_back(layer.bias);
    if (layer.layer_norm) {
      out.emplace_back(layer.ln_gain);
      out.emplace_back(layer.ln_offset);
    }
  }
  return out;
}

std::vector<std::span<const double>> grad_spans(const MlpGrads& grads) {
  std::vector<std::span<const double>> out;
  for (const auto& g : grads) {
    out.emplace_back(g.weight.data);
    out.emplace_back(g.bias);
    if (!g.ln_gain.empty()) {
      out.emplace_back(g.ln_gain);
      out.emplace_back(g.ln_offset);
    }
  }
  return out;
}

namespace gaussian {

double clamp_log_std(double log_std) {
  return std::clamp(log_std, kLogStdMin, kLogStdMax);
}

std::vector<double> sample(std::span<const double> mean,
                           std::span<const double> log_std,
                           std::span<const double> noise) {
  std::vector<double> out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i)
    out[i] = mean[i] + std::exp(clamp_log_std(log_std[i])) * noise[i];
  return out;
}

double log_prob(std::span<const double> mean, std::span<const double> log_std,
                std::span<const double> value) {
  constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5*ln(2*pi)
  double acc = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double ls = clamp_log_std(log_std[i]);
    const double z = (value[i] - mean[i]) * std::exp(-ls);
    acc += -0.5 * z * z - ls - kHalfLog2Pi;
  }
  return acc;
}

double entropy(std::span<const double> log_std) {
  constexpr double kHalfLog2PiE = 1.4189385332046727;  // 0.5*ln(2*pi*e)
  double acc = 0.0;
  for (std::size_t i = 0; i < log_std.size(); ++i)
    acc += kHalfLog2PiE + clamp_log_std(log_std[i]);
  return acc;
}

void accumulate_log_prob_grads(std::span<const double> mean,
                               std::span<const double> log_std,
                               std::span<const double> value, double coeff,
                               std::span<double> mean_grad,
                               std::span<double> log_std_grad) {
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double ls = clamp_log_std(log_std[i]);
    const double inv_var = std::exp(-2.0 * ls);
    const double diff = value[i] - mean[i];
    mean_grad[i] += coeff * diff * inv_var;
    log_std_grad[i] += coeff * (diff * diff * inv_var - 1.0);
  }
}

void accumulate_entropy_grads(std::span<const double> log_std, double coeff,
                              std::span<double> log_std_grad) {
  for (std::size_t i = 0; i < log_std.size(); ++i) {
    if (log_std[i] > kLogStdMin && log_std[i] < kLogStdMax)
      log_std_grad[i] += coeff;
  }
}

}  // namespace gaussian

const Tensor2& Archive::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw std::runtime_error("archive missing tensor: " + name);
}

void save_archive(const Archive& archive, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "crs-params-v1\n";
  out << "meta " << archive.meta.size() << "\n";
  char buf[64];
  for (const auto& [k, v] : archive.meta) out << k << " " << v << "\n";
  out << "tensors " << archive.tensors.size() << "\n";
  for (const auto& [name, t] : archive.tensors) {
    out << name << " " << t.rows << " " << t.cols << "\n";
    for (std::size_t r = 0; r < t.rows; ++r) {
      const double* row = t.row(r);
      for (std::size_t c = 0; c < t.cols; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", row[c]);
        out << buf << (c + 1 == t.cols ? "" : " ");
      }
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Archive load_archive(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::string magic;
  in >> magic;
  if (magic != "crs-params-v1")
    throw std::runtime_error("unsupported checkpoint format in " + path);
  Archive archive;
  std::string token;
  std::size_t count = 0;
  in >> token >> count;
  if (token != "meta") throw std::runtime_error("malformed checkpoint: " + path);
  in.ignore();
  for (std::size_t i = 0; i < count; ++i) {
    std::string line;
    std::getline(in, line);
    const auto pos = line.find(' ');
    if (pos == std::string::npos)
      throw std::runtime_error("malformed meta line: " + line);
    archive.meta.emplace_back(line.substr(0, pos), line.substr(pos + 1));
  }
  in >> token >> count;
  if (token != "tensors")
    throw std::runtime_error("malformed checkpoint: " + path);
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    in >> name >> rows >> cols;
    Tensor2 t(rows, cols);
    for (auto& v : t.data) in >> v;
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    archive.tensors.emplace_back(std::move(name), std::move(t));
  }
  return archive;
}

}  // namespace crs::neural
