#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

namespace {

constexpr long double kPi = 3.14159265358979323846264338327950288L;
constexpr long double kMu0 = 1.25663706212e-6L;
constexpr long double kEps0 = 8.8541878128e-12L;
constexpr long double kC = 299792458.0L;

long double log2l_(long double x) { return std::log(x) / std::log(2.0L); }

// a^H b for two-vectors.
cld dot2(const cld a[2], const cld b[2]) {
  return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1];
}

long double abs2(const cld& z) {
  return z.real() * z.real() + z.imag() * z.imag();
}

long double norm2(const cld a[2]) { return std::sqrt(abs2(a[0]) + abs2(a[1])); }

void unit2(const cld a[2], cld out[2]) {
  const long double n = norm2(a);
  out[0] = a[0] / n;
  out[1] = a[1] / n;
}

long double gain2(const cld h[2], const cld w[2]) {  // |h^H w|^2
  return abs2(dot2(h, w));
}

}  // namespace

AlphaBeta attenuation(long double eps_r, long double eps_i, long double mu_r,
                      long double freq) {
  const long double omega = 2.0L * kPi * freq;
  const long double mu = mu_r * kMu0;
  const long double eps = eps_r * kEps0;
  const long double loss_tangent = eps_i / eps_r;
  const long double root = std::sqrt(1.0L + loss_tangent * loss_tangent);
  const long double alpha = omega * std::sqrt(mu * eps / 2.0L * (root - 1.0L));
  const long double beta = omega * std::sqrt(mu * eps / 2.0L * (root + 1.0L));
  return {alpha, beta};
}

long double refraction(long double eps_r, long double eps_i) {
  const long double modulus = std::sqrt(eps_r * eps_r + eps_i * eps_i);
  const long double n_real = std::sqrt((modulus + eps_r) / 2.0L);
  const long double base = (n_real + 1.0L) / 4.0L;
  return base * base;
}

long double soil_loss(long double eps_r, long double eps_i, long double mu_r,
                      long double freq, long double depth) {
  const AlphaBeta ab = attenuation(eps_r, eps_i, mu_r, freq);
  const long double amp =
      2.0L * ab.beta * depth / std::exp(-ab.alpha * depth);
  return amp * amp;
}

long double friis(long double g_tx, long double g_rx, long double freq,
                  long double dist, long double ple) {
  const long double lam_term = kC / (4.0L * kPi * freq);
  return g_tx * g_rx * lam_term * lam_term * std::pow(dist, -ple);
}

CrsReport crs_chain(const CrsInstance& in) {
  cld w_ar[2], w_1[2], w_2[2];
  unit2(in.h_ar, w_ar);
  unit2(in.h_1, w_1);
  unit2(in.h_2, w_2);
  cld s[2] = {w_ar[0] + w_1[0] + w_2[0], w_ar[1] + w_1[1] + w_2[1]};
  cld w_c[2];
  unit2(s, w_c);

  const long double p_c = in.p[0], p_ar = in.p[1], p_1 = in.p[2],
                    p_2 = in.p[3];
  const long double sigma2 = in.noise;

  // Common-stream SINRs, private streams as noise.
  const long double g_c_ar =
      p_c * gain2(in.h_ar, w_c) /
      (p_ar * gain2(in.h_ar, w_ar) + p_1 * gain2(in.h_ar, w_1) +
       p_2 * gain2(in.h_ar, w_2) + sigma2);
  const long double g_c_1 =
      p_c * gain2(in.h_1, w_c) /
      (p_ar * gain2(in.h_1, w_ar) + p_1 * gain2(in.h_1, w_1) +
       p_2 * gain2(in.h_1, w_2) + sigma2);
  const long double g_c_2 =
      p_c * gain2(in.h_2, w_c) /
      (p_ar * gain2(in.h_2, w_ar) + p_1 * gain2(in.h_2, w_1) +
       p_2 * gain2(in.h_2, w_2) + sigma2);

  // Private SINRs after the common stream is cancelled.
  const long double g_p_ar =
      p_ar * gain2(in.h_ar, w_ar) /
      (p_1 * gain2(in.h_ar, w_1) + p_2 * gain2(in.h_ar, w_2) + sigma2);
  const long double g_p_1 =
      p_1 * gain2(in.h_1, w_1) /
      (p_ar * gain2(in.h_1, w_ar) + p_2 * gain2(in.h_1, w_2) + sigma2);
  const long double g_p_2 =
      p_2 * gain2(in.h_2, w_2) /
      (p_ar * gain2(in.h_2, w_ar) + p_1 * gain2(in.h_2, w_1) + sigma2);

  const long double theta = in.theta;
  const long double r_c_ar = theta * log2l_(1.0L + g_c_ar);

  // Cooperative phase: relay leg capped by the AR's own decode rate.
  const long double snr_1 = in.relay_power * abs2(in.g_1) / sigma2;
  const long double snr_2 = in.relay_power * abs2(in.g_2) / sigma2;
  const long double coop_1 =
      std::min(r_c_ar, (1.0L - theta) * log2l_(1.0L + snr_1));
  const long double coop_2 =
      std::min(r_c_ar, (1.0L - theta) * log2l_(1.0L + snr_2));

  const long double r_c =
      std::min(r_c_ar, std::min(theta * log2l_(1.0L + g_c_1) + coop_1,
                                theta * log2l_(1.0L + g_c_2) + coop_2));

  CrsReport out;
  out.sinr_common_relay = g_c_ar;
  out.sinr_common_ud[0] = g_c_1;
  out.sinr_common_ud[1] = g_c_2;
  out.sinr_priv_relay = g_p_ar;
  out.sinr_priv_ud[0] = g_p_1;
  out.sinr_priv_ud[1] = g_p_2;
  out.rate_common = r_c;
  out.rate_coop_ud[0] = coop_1;
  out.rate_coop_ud[1] = coop_2;
  out.rate_total[0] = theta * log2l_(1.0L + g_p_ar) + in.c[0] * r_c;
  out.rate_total[1] = theta * log2l_(1.0L + g_p_1) + in.c[1] * r_c;
  out.rate_total[2] = theta * log2l_(1.0L + g_p_2) + in.c[2] * r_c;
  out.min_rate = std::min(out.rate_total[1], out.rate_total[2]);
  return out;
}

RsmaReport rsma_chain(const RsmaInstance& in) {
  cld w_1[2], w_2[2];
  unit2(in.h_1, w_1);
  unit2(in.h_2, w_2);
  cld s[2] = {w_1[0] + w_2[0], w_1[1] + w_2[1]};
  cld w_c[2];
  unit2(s, w_c);

  const long double p_c = in.p[0], p_1 = in.p[1], p_2 = in.p[2];
  const long double sigma2 = in.noise;

  const long double g_c_1 =
      p_c * gain2(in.h_1, w_c) /
      (p_1 * gain2(in.h_1, w_1) + p_2 * gain2(in.h_1, w_2) + sigma2);
  const long double g_c_2 =
      p_c * gain2(in.h_2, w_c) /
      (p_1 * gain2(in.h_2, w_1) + p_2 * gain2(in.h_2, w_2) + sigma2);
  const long double g_p_1 =
      p_1 * gain2(in.h_1, w_1) / (p_2 * gain2(in.h_1, w_2) + sigma2);
  const long double g_p_2 =
      p_2 * gain2(in.h_2, w_2) / (p_1 * gain2(in.h_2, w_1) + sigma2);

  const long double r_c =
      std::min(log2l_(1.0L + g_c_1), log2l_(1.0L + g_c_2));

  RsmaReport out;
  out.sinr_common_ud[0] = g_c_1;
  out.sinr_common_ud[1] = g_c_2;
  out.sinr_priv_ud[0] = g_p_1;
  out.sinr_priv_ud[1] = g_p_2;
  out.rate_common = r_c;
  out.rate_total[0] = log2l_(1.0L + g_p_1) + in.c[0] * r_c;
  out.rate_total[1] = log2l_(1.0L + g_p_2) + in.c[1] * r_c;
  out.min_rate = std::min(out.rate_total[0], out.rate_total[1]);
  return out;
}

SdmaReport sdma_chain(const SdmaInstance& in) {
  cld w_1[2], w_2[2];
  unit2(in.h_1, w_1);
  unit2(in.h_2, w_2);
  const long double sigma2 = in.noise;
  const long double g_1 =
      in.p[0] * gain2(in.h_1, w_1) / (in.p[1] * gain2(in.h_1, w_2) + sigma2);
  const long double g_2 =
      in.p[1] * gain2(in.h_2, w_2) / (in.p[0] * gain2(in.h_2, w_1) + sigma2);
  SdmaReport out;
  out.sinr_ud[0] = g_1;
  out.sinr_ud[1] = g_2;
  out.rate_total[0] = log2l_(1.0L + g_1);
  out.rate_total[1] = log2l_(1.0L + g_2);
  out.min_rate = std::min(out.rate_total[0], out.rate_total[1]);
  return out;
}

std::vector<long double> gae_double_loop(const std::vector<double>& rewards,
                                         const std::vector<double>& values,
                                         double bootstrap, double eta,
                                         double varsigma) {
  const std::size_t n = rewards.size();
  auto value_at = [&](std::size_t i) -> long double {
    return i < n ? static_cast<long double>(values[i])
                 : static_cast<long double>(bootstrap);
  };
  std::vector<long double> adv(n, 0.0L);
  for (std::size_t t = 0; t < n; ++t) {
    long double acc = 0.0L;
    long double weight = 1.0L;
    for (std::size_t l = 0; t + l < n; ++l) {
      const long double delta = static_cast<long double>(rewards[t + l]) +
                                static_cast<long double>(eta) *
                                    value_at(t + l + 1) -
                                value_at(t + l);
      acc += weight * delta;
      weight *= static_cast<long double>(eta) *
                static_cast<long double>(varsigma);
    }
    adv[t] = acc;
  }
  return adv;
}

long double surrogate(const std::vector<double>& new_lp,
                      const std::vector<double>& old_lp,
                      const std::vector<double>& adv, double clip) {
  long double sum = 0.0L;
  for (std::size_t t = 0; t < new_lp.size(); ++t) {
    const long double ratio =
        std::exp(static_cast<long double>(new_lp[t]) -
                 static_cast<long double>(old_lp[t]));
    const long double a = adv[t];
    const long double lo = 1.0L - static_cast<long double>(clip);
    const long double hi = 1.0L + static_cast<long double>(clip);
    const long double clipped = std::min(std::max(ratio, lo), hi);
    sum += std::min(ratio * a, clipped * a);
  }
  return sum / static_cast<long double>(new_lp.size());
}

long double gaussian_log_prob(const std::vector<double>& mean,
                              const std::vector<double>& log_std,
                              const std::vector<double>& value) {
  const long double log_two_pi = std::log(2.0L * kPi);
  long double lp = 0.0L;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const long double ls = std::min(std::max(
        static_cast<long double>(log_std[i]), -5.0L), 2.0L);
    const long double z =
        (static_cast<long double>(value[i]) -
         static_cast<long double>(mean[i])) / std::exp(ls);
    lp += -0.5L * log_two_pi - ls - 0.5L * z * z;
  }
  return lp;
}

long double gelu(long double x) {
  const long double c = std::sqrt(2.0L / kPi);
  const long double u = c * (x + 0.044715L * x * x * x);
  return 0.5L * x * (1.0L + std::tanh(u));
}

}  // namespace oracle
