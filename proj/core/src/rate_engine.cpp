#include "crs/rate_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace crs {

namespace {

constexpr double kFeasibilityTol = 1e-9;

double sq_abs_dot(const cvec& h, const cvec& w) {
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < h.size(); ++i) acc += std::conj(h[i]) * w[i];
  return std::norm(acc);
}

double vec_norm(const cvec& v) {
  double acc = 0.0;
  for (const auto& x : v) acc += std::norm(x);
  return std::sqrt(acc);
}

cvec normalized(const cvec& v, const char* what) {
  const double n = vec_norm(v);
  if (!(n > 0.0))
    throw std::domain_error(std::string("degenerate channel: ") + what);
  cvec out(v);
  for (auto& x : out) x /= n;
  return out;
}

double rate(double theta, double sinr) {
  return theta * std::log2(1.0 + sinr);
}

void check_dims(const ResourceAction& action, Strategy strategy,
                std::size_t n) {
  std::size_t want_power = 0, want_split = 0;
  switch (strategy) {
    case Strategy::Crs:
      want_power = n + 2;
      want_split = n + 1;
      break;
    case Strategy::Rsma:
      want_power = n + 1;
      want_split = n;
      break;
    case Strategy::Sdma:
      want_power = n;
      want_split = 0;
      break;
  }
  if (action.power.size() != want_power)
    throw std::domain_error("action power vector has wrong length for " +
                            std::string(strategy_name(strategy)));
  if (action.common_split.size() != want_split)
    throw std::domain_error("action split vector has wrong length for " +
                            std::string(strategy_name(strategy)));
}

}  // namespace

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Crs: return "crs";
    case Strategy::Rsma: return "rsma";
    case Strategy::Sdma: return "sdma";
  }
  return "?";
}

void validate_action(const ResourceAction& action, Strategy strategy,
                     std::size_t ud_count, double total_power) {
  check_dims(action, strategy, ud_count);
  double power_sum = 0.0;
  for (double p : action.power) {
    if (!(p >= 0.0)) throw std::domain_error("negative power entry");
    power_sum += p;
  }
  if (power_sum > total_power * (1.0 + kFeasibilityTol))
    throw std::domain_error("power sum exceeds budget");
  double split_sum = 0.0;
  for (double c : action.common_split) {
    if (!(c >= 0.0)) throw std::domain_error("negative split entry");
    split_sum += c;
  }
  if (split_sum > 1.0 + kFeasibilityTol)
    throw std::domain_error("split fractions exceed 1");
  if (!(action.theta >= 0.0 && action.theta <= 1.0))
    throw std::domain_error("theta outside [0,1]");
}

Precoders build_precoders(const LinkRealization& links, bool include_relay) {
  Precoders prec;
  const std::size_t n = links.ud_count();
  prec.w_ud_priv.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    prec.w_ud_priv.push_back(normalized(links.h_ud[i], "h_ud"));

  cvec sum(links.num_antennas(), {0.0, 0.0});
  if (include_relay) {
    prec.w_relay_priv = normalized(links.h_ar, "h_ar");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += prec.w_relay_priv[i];
  }
  for (const auto& w : prec.w_ud_priv)
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += w[i];
  prec.w_common = normalized(sum, "common precoder sum");
  return prec;
}

CommonSinr sinr_common_direct(const LinkRealization& links,
                              const Precoders& prec,
                              const ResourceAction& action,
                              double noise_power) {
  // action.power = (P_c, P_ar, P_1..P_N) with relay, (P_c, P_1..P_N) without.
  const bool has_relay = !prec.w_relay_priv.empty();
  const std::size_t n = links.ud_count();
  const double p_c = action.power[0];
  const double p_ar = has_relay ? action.power[1] : 0.0;
  const std::size_t priv_base = has_relay ? 2 : 1;

  auto sinr_at = [&](const cvec& h) {
    double interference = noise_power;
    if (has_relay)
      interference += p_ar * sq_abs_dot(h, prec.w_relay_priv);
    for (std::size_t i = 0; i < n; ++i)
      interference += action.power[priv_base + i] * sq_abs_dot(h, prec.w_ud_priv[i]);
    return p_c * sq_abs_dot(h, prec.w_common) / interference;
  };

  CommonSinr out;
  if (has_relay) out.relay = sinr_at(links.h_ar);
  out.ud.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.ud.push_back(sinr_at(links.h_ud[i]));
  return out;
}

PrivateSinr sinr_private_direct(const LinkRealization& links,
                                const Precoders& prec,
                                const ResourceAction& action,
                                double noise_power) {
  const bool has_relay = !prec.w_relay_priv.empty();
  const std::size_t n = links.ud_count();
  const double p_ar = has_relay ? action.power[1] : 0.0;
  const std::size_t priv_base = has_relay ? 2 : (action.power.size() == n ? 0 : 1);

  PrivateSinr out;
  if (has_relay) {
    double interference = noise_power;
    for (std::size_t i = 0; i < n; ++i)
      interference +=
          action.power[priv_base + i] * sq_abs_dot(links.h_ar, prec.w_ud_priv[i]);
    out.relay = p_ar * sq_abs_dot(links.h_ar, prec.w_relay_priv) / interference;
  }
  out.ud.reserve(n);
  for (std::size_t u = 0; u < n; ++u) {
    const cvec& h = links.h_ud[u];
    double interference = noise_power;
    if (has_relay) interference += p_ar * sq_abs_dot(h, prec.w_relay_priv);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == u) continue;
      interference += action.power[priv_base + i] * sq_abs_dot(h, prec.w_ud_priv[i]);
    }
    out.ud.push_back(action.power[priv_base + u] *
                     sq_abs_dot(h, prec.w_ud_priv[u]) / interference);
  }
  return out;
}

std::vector<double> cooperative_rate(const LinkRealization& links,
                                     const ResourceAction& action,
                                     double rate_common_relay_direct,
                                     const RateParams& params) {
  const std::size_t n = links.ud_count();
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double snr =
        params.relay_power * std::norm(links.h_relay_ud[i]) / params.noise_power;
    const double relay_leg = rate(1.0 - action.theta, snr);
    out.push_back(std::min(rate_common_relay_direct, relay_leg));
  }
  return out;
}

RateReport evaluate_crs(const LinkRealization& links,
                        const ResourceAction& action,
                        const RateParams& params) {
  const std::size_t n = links.ud_count();
  check_dims(action, Strategy::Crs, n);
  const Precoders prec = build_precoders(links, /*include_relay=*/true);
  const CommonSinr common = sinr_common_direct(links, prec, action, params.noise_power);
  const PrivateSinr priv = sinr_private_direct(links, prec, action, params.noise_power);

  RateReport report;
  report.sinr_common_relay = common.relay;
  report.sinr_common_ud = common.ud;
  report.sinr_priv_relay = priv.relay;
  report.sinr_priv_ud = priv.ud;

  const double theta = action.theta;
  const double rate_common_relay = rate(theta, common.relay);
  report.rate_coop_ud = cooperative_rate(links, action, rate_common_relay, params);

  double r_c = rate_common_relay;
  for (std::size_t i = 0; i < n; ++i)
    r_c = std::min(r_c, rate(theta, common.ud[i]) + report.rate_coop_ud[i]);
  report.rate_common = r_c;

  report.rate_total.resize(n + 1);
  report.rate_total[0] = rate(theta, priv.relay) + action.common_split[0] * r_c;
  double min_rate = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double total =
        rate(theta, priv.ud[i]) + action.common_split[1 + i] * r_c;
    report.rate_total[1 + i] = total;
    min_rate = std::min(min_rate, total);
  }
  report.min_rate = min_rate;
  return report;
}

RateReport evaluate_rsma(const LinkRealization& links,
                         const ResourceAction& action,
                         const RateParams& params) {
  const std::size_t n = links.ud_count();
  check_dims(action, Strategy::Rsma, n);
  const Precoders prec = build_precoders(links, /*include_relay=*/false);
  const CommonSinr common = sinr_common_direct(links, prec, action, params.noise_power);
  const PrivateSinr priv = sinr_private_direct(links, prec, action, params.noise_power);

  RateReport report;
  report.sinr_common_ud = common.ud;
  report.sinr_priv_ud = priv.ud;
  report.rate_coop_ud.assign(n, 0.0);

  double r_c = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    r_c = std::min(r_c, rate(1.0, common.ud[i]));
  report.rate_common = r_c;

  report.rate_total.assign(n + 1, 0.0);
  double min_rate = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double total = rate(1.0, priv.ud[i]) + action.common_split[i] * r_c;
    report.rate_total[1 + i] = total;
    min_rate = std::min(min_rate, total);
  }
  report.min_rate = min_rate;
  return report;
}

RateReport evaluate_sdma(const LinkRealization& links,
                         const ResourceAction& action,
                         const RateParams& params) {
  const std::size_t n = links.ud_count();
  check_dims(action, Strategy::Sdma, n);
  Precoders prec;
  prec.w_ud_priv.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    prec.w_ud_priv.push_back(normalized(links.h_ud[i], "h_ud"));

  RateReport report;
  report.sinr_priv_ud.reserve(n);
  report.rate_coop_ud.assign(n, 0.0);
  report.rate_total.assign(n + 1, 0.0);
  double min_rate = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < n; ++u) {
    const cvec& h = links.h_ud[u];
    double interference = params.noise_power;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == u) continue;
      interference += action.power[i] * sq_abs_dot(h, prec.w_ud_priv[i]);
    }
    const double sinr =
        action.power[u] * sq_abs_dot(h, prec.w_ud_priv[u]) / interference;
    report.sinr_priv_ud.push_back(sinr);
    const double total = rate(1.0, sinr);
    report.rate_total[1 + u] = total;
    min_rate = std::min(min_rate, total);
  }
  report.min_rate = min_rate;
  return report;
}

RateReport evaluate_strategy(Strategy strategy, const LinkRealization& links,
                             const ResourceAction& action,
                             const RateParams& params) {
  switch (strategy) {
    case Strategy::Crs: return evaluate_crs(links, action, params);
    case Strategy::Rsma: return evaluate_rsma(links, action, params);
    case Strategy::Sdma: return evaluate_sdma(links, action, params);
  }
  throw std::logic_error("unknown strategy");
}

void validate_report(const RateReport& report, const ResourceAction& action,
                     Strategy strategy) {
  const std::size_t n = report.sinr_priv_ud.size();
  double split_sum = 0.0;
  for (double c : action.common_split) split_sum += c;
  const double allocated = split_sum * report.rate_common;
  if (allocated > report.rate_common * (1.0 + kFeasibilityTol) + 1e-15)
    throw std::domain_error("allocated common rate exceeds R_c");

  // Total = private rate + common portion, by construction; recheck the
  // balance from the report's own SINRs.
  const double theta = strategy == Strategy::Crs ? action.theta : 1.0;
  const std::size_t split_base = strategy == Strategy::Crs ? 1 : 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double portion = action.common_split.empty()
                               ? 0.0
                               : action.common_split[split_base + i] *
                                     report.rate_common;
    const double expect = theta * std::log2(1.0 + report.sinr_priv_ud[i]) + portion;
    const double got = report.rate_total[1 + i];
    if (std::abs(expect - got) > 1e-9 * std::max(1.0, std::abs(expect)))
      throw std::domain_error("rate balance violated for UD " +
                              std::to_string(i + 1));
  }
}

}  // namespace crs
