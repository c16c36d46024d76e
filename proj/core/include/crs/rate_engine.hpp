#pragma once

#include <cstddef>
#include <vector>

#include "crs/channel.hpp"

namespace crs {

enum class Strategy { Crs, Rsma, Sdma };

const char* strategy_name(Strategy s);

// One agent decision in physical form. Vector layouts per strategy:
//   CRS:  power (P_c, P_ar, P_1..P_N), common_split (C_ar, C_1..C_N)
//         as fractions of R_c, theta in [0,1].
//   RSMA: power (P_c, P_1..P_N), common_split (C_1..C_N), theta fixed 1.
//   SDMA: power (P_1..P_N), no split, theta fixed 1.
struct ResourceAction {
  std::vector<double> power;         // watts
  std::vector<double> common_split;  // nonnegative fractions, sum <= 1
  double theta = 1.0;
};

// Throws std::domain_error if the action violates the feasibility
// constraints for the given strategy and budget.
void validate_action(const ResourceAction& action, Strategy strategy,
                     std::size_t ud_count, double total_power);

struct Precoders {
  cvec w_common;                 // unit norm, length Q (empty for SDMA)
  cvec w_relay_priv;             // unit norm, length Q (CRS only)
  std::vector<cvec> w_ud_priv;   // unit norm, length Q each
};

// Matched-filter private precoders plus a multicast common precoder built
// as the normalized sum of per-receiver normalized channels. include_relay
// selects whether the AR participates (CRS) or not (RSMA/SDMA).
Precoders build_precoders(const LinkRealization& links, bool include_relay);

struct RateReport {
  double sinr_common_relay = 0.0;        // gamma_{c,ar}^D
  std::vector<double> sinr_common_ud;    // gamma_{c,n}^D
  double sinr_priv_relay = 0.0;          // gamma_{p,ar}^D
  std::vector<double> sinr_priv_ud;      // gamma_{p,n}^D
  double rate_common = 0.0;              // R_c, bps/Hz
  std::vector<double> rate_coop_ud;      // R_{c,n}^C
  std::vector<double> rate_total;        // (R_ar^tot, R_1^tot..R_N^tot)
  double min_rate = 0.0;                 // min over UDs only
};

struct RateParams {
  double noise_power = 0.0;  // sigma^2, watts
  double relay_power = 0.0;  // P_R, watts
};

struct CommonSinr {
  double relay = 0.0;
  std::vector<double> ud;
};

struct PrivateSinr {
  double relay = 0.0;
  std::vector<double> ud;
};

// Common-stream SINRs when the private streams are treated as noise.
CommonSinr sinr_common_direct(const LinkRealization& links,
                              const Precoders& prec,
                              const ResourceAction& action,
                              double noise_power);

// Private-stream SINRs after SIC removed the common stream.
PrivateSinr sinr_private_direct(const LinkRealization& links,
                                const Precoders& prec,
                                const ResourceAction& action,
                                double noise_power);

// Per-UD rate of the relayed common stream in the cooperative phase,
// capped by the AR's own direct decode rate.
std::vector<double> cooperative_rate(const LinkRealization& links,
                                     const ResourceAction& action,
                                     double rate_common_relay_direct,
                                     const RateParams& params);

RateReport evaluate_crs(const LinkRealization& links,
                        const ResourceAction& action,
                        const RateParams& params);

RateReport evaluate_rsma(const LinkRealization& links,
                         const ResourceAction& action,
                         const RateParams& params);

RateReport evaluate_sdma(const LinkRealization& links,
                         const ResourceAction& action,
                         const RateParams& params);

RateReport evaluate_strategy(Strategy strategy, const LinkRealization& links,
                             const ResourceAction& action,
                             const RateParams& params);

// Confirms the closure the split encoding guarantees: allocated common
// portions sum to at most R_c and each total is private + portion.
void validate_report(const RateReport& report, const ResourceAction& action,
                     Strategy strategy);

}  // namespace crs
