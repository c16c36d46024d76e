#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "crs/rng.hpp"

namespace crs {

using cvec = std::vector<std::complex<double>>;

// Dielectric and geometric description of the burial medium. vwc/clay are
// provenance metadata; the physics consumes eps_real/eps_imag only.
struct SoilProfile {
  double eps_real = 8.3;      // relative permittivity, real part (>= 1)
  double eps_imag = 1.4;      // relative permittivity, imaginary part (>= 0)
  double mu_r = 1.0;          // relative permeability
  double vwc = 0.15;          // volumetric water content, metadata
  double clay = 0.1686;       // clay fraction, metadata
  double burial_depth = 0.6;  // d_u, meters (> 0)

  void validate() const;
};

// One knot of the VWC -> (eps', eps'') lookup: a documented placeholder fit
// for the default clay fraction at 433 MHz, config-overridable. Values are
// monotone in vwc so soil attenuation grows with water content.
struct DielectricKnot {
  double vwc;
  double eps_real;
  double eps_imag;
};

std::vector<DielectricKnot> default_dielectric_table();

// Linear interpolation over the knots, clamped at the table ends.
// Returns (eps_real, eps_imag).
std::pair<double, double> dielectric_from_vwc(
    double vwc, const std::vector<DielectricKnot>& table);

struct Geometry {
  double sat_distance_ar = 550e3;         // d_s2a, meters
  std::vector<double> sat_distance_ud;    // per-UD d_n^{s2g}, meters
  double relay_height = 5.0;              // H_ar, meters
  std::vector<std::pair<double, double>> ud_positions;  // meters, AR at origin
  std::vector<double> relay_distance_ud;  // per-UD d_n^{a2u}, meters
  std::vector<double> soil_distance;      // per-UD vertical soil path = d_u

  std::size_t ud_count() const { return sat_distance_ud.size(); }
  void validate(double burial_depth) const;
};

// Draws UD positions uniformly in the deployment disk and derives all
// per-UD distances. The AR->UD path is the air slant plus the vertical
// soil segment.
Geometry make_geometry(std::size_t ud_count, double area_radius,
                       double sat_range, double relay_height,
                       double burial_depth, Rng& rng);

// All linear-scale RF parameters. dB-specified config values are converted
// exactly once, at config load; everything here is already linear.
struct AntennaGains {
  double g_sat = 0.0;          // G_s, linear
  double g_relay = 0.0;        // G_ar, linear
  double g_ud = 0.0;           // G_n, linear
  double tx_power_sat = 0.0;   // P_t, watts
  double tx_power_relay = 0.0; // P_R, watts
  double noise_power = 0.0;    // sigma^2 per receiver, watts
  double carrier_freq = 433e6; // f, Hz
  std::size_t num_antennas = 6;  // Q
  double rician_k_leo = 10.0;
  double rician_k_relay = 3.0;
  double ple_leo = 2.0;
  double ple_relay = 2.4;

  void validate() const;
};

// One coherent-period draw of all channel vectors/gains.
struct LinkRealization {
  cvec h_ar;                          // LEO->AR, length Q
  std::vector<cvec> h_ud;             // LEO->UD, N vectors of length Q
  cvec h_relay_ud;                    // AR->UD, N scalars

  std::size_t num_antennas() const { return h_ar.size(); }
  std::size_t ud_count() const { return h_ud.size(); }
};

// Attenuation and phase-shifting constants of the lossy soil, Np/m and
// rad/m. beta >= alpha for every valid soil.
struct PropagationConstants {
  double alpha;
  double beta;
};

PropagationConstants attenuation_constants(const SoilProfile& soil,
                                           double freq);

// Power loss factor crossing the air-soil interface.
double refraction_loss(const SoilProfile& soil);

// Power loss factor of the underground path; strictly increasing in
// dist_soil. dist_soil must be strictly positive: the formula degenerates
// to zero at d = 0, which would imply infinite gain downstream.
double soil_loss(const SoilProfile& soil, double freq, double dist_soil);

// Free-space power gain with a generalized distance exponent and 1 m
// reference distance; reduces to the Friis form at ple = 2.
double friis_gain(double gain_tx, double gain_rx, double freq, double dist,
                  double ple);

// Rician fading entries with E[|entry|^2] = 1. The LoS phase is a single
// deterministic draw per call, not redrawn per entry.
cvec sample_rician(double k_factor, std::size_t dims, Rng& rng);

LinkRealization realize_links(const SoilProfile& soil, const Geometry& geom,
                              const AntennaGains& gains, Rng& rng);

}  // namespace crs
