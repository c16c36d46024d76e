#include "crs/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "crs/constants.hpp"

namespace crs {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::domain_error(what);
}

void require_finite(double v, const std::string& name) {
  if (!std::isfinite(v))
    throw std::domain_error("non-finite result from parameter: " + name);
}

}  // namespace

void SoilProfile::validate() const {
  require(eps_real >= 1.0, "soil eps_real must be >= 1");
  require(eps_imag >= 0.0, "soil eps_imag must be >= 0");
  require(mu_r > 0.0, "soil mu_r must be > 0");
  require(burial_depth > 0.0, "soil burial_depth must be > 0");
}

std::vector<DielectricKnot> default_dielectric_table() {
  // Loam-type soil, ~17% clay, UHF band. Interpolated from published
  // dielectric measurements; placeholder until site-specific data exists.
  return {
      {0.10, 6.0, 0.9},
      {0.15, 8.3, 1.4},
      {0.20, 11.0, 2.0},
      {0.25, 14.0, 2.7},
  };
}

std::pair<double, double> dielectric_from_vwc(
    double vwc, const std::vector<DielectricKnot>& table) {
  require(!table.empty(), "dielectric table is empty");
  if (vwc <= table.front().vwc)
    return {table.front().eps_real, table.front().eps_imag};
  if (vwc >= table.back().vwc)
    return {table.back().eps_real, table.back().eps_imag};
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (vwc <= table[i].vwc) {
      const auto& lo = table[i - 1];
      const auto& hi = table[i];
      const double w = (vwc - lo.vwc) / (hi.vwc - lo.vwc);
      return {lo.eps_real + w * (hi.eps_real - lo.eps_real),
              lo.eps_imag + w * (hi.eps_imag - lo.eps_imag)};
    }
  }
  return {table.back().eps_real, table.back().eps_imag};
}

void Geometry::validate(double burial_depth) const {
  require(sat_distance_ar > 0.0, "sat_distance_ar must be > 0");
  require(relay_height > 0.0, "relay_height must be > 0");
  const std::size_t n = ud_count();
  require(n >= 1, "at least one UD required");
  require(relay_distance_ud.size() == n && soil_distance.size() == n &&
              ud_positions.size() == n,
          "geometry vectors must have one entry per UD");
  for (std::size_t i = 0; i < n; ++i) {
    require(sat_distance_ud[i] > 0.0, "sat_distance_ud must be > 0");
    require(relay_distance_ud[i] >= relay_height,
            "relay_distance_ud must be >= relay_height");
    require(soil_distance[i] == burial_depth,
            "soil path must equal burial depth (vertical propagation)");
  }
}

Geometry make_geometry(std::size_t ud_count, double area_radius,
                       double sat_range, double relay_height,
                       double burial_depth, Rng& rng) {
  require(ud_count >= 1, "ud_count must be >= 1");
  require(area_radius > 0.0 && sat_range > 0.0 && relay_height > 0.0 &&
              burial_depth > 0.0,
          "geometry parameters must be > 0");
  Geometry g;
  g.sat_distance_ar = sat_range;
  g.relay_height = relay_height;
  g.sat_distance_ud.assign(ud_count, sat_range);
  g.ud_positions.reserve(ud_count);
  for (std::size_t i = 0; i < ud_count; ++i) {
    // Uniform over the disk: radius via sqrt of uniform.
    const double r = area_radius * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * constants::pi);
    g.ud_positions.emplace_back(r * std::cos(phi), r * std::sin(phi));
    const double horiz = r;
    g.relay_distance_ud.push_back(
        std::sqrt(relay_height * relay_height + horiz * horiz) + burial_depth);
    g.soil_distance.push_back(burial_depth);
  }
  return g;
}

void AntennaGains::validate() const {
  require(g_sat > 0.0 && g_relay > 0.0 && g_ud > 0.0,
          "antenna gains must be > 0");
  require(tx_power_sat > 0.0 && tx_power_relay > 0.0,
          "transmit powers must be > 0");
  require(noise_power > 0.0, "noise power must be > 0");
  require(carrier_freq > 0.0, "carrier frequency must be > 0");
  require(num_antennas >= 1, "num_antennas must be >= 1");
  require(rician_k_leo >= 0.0 && rician_k_relay >= 0.0,
          "Rician factors must be >= 0");
  require(ple_leo > 0.0 && ple_relay > 0.0,
          "path-loss exponents must be > 0");
}

PropagationConstants attenuation_constants(const SoilProfile& soil,
                                           double freq) {
  require(freq > 0.0, "freq must be > 0");
  soil.validate();
  const double ratio = soil.eps_imag / soil.eps_real;
  const double root = std::sqrt(1.0 + ratio * ratio);
  const double common =
      soil.mu_r * constants::mu0 * soil.eps_real * constants::eps0 / 2.0;
  const double two_pi_f = 2.0 * constants::pi * freq;
  const double alpha = two_pi_f * std::sqrt(common * (root - 1.0));
  const double beta = two_pi_f * std::sqrt(common * (root + 1.0));
  require_finite(alpha, "freq/eps (alpha overflow)");
  require_finite(beta, "freq/eps (beta overflow)");
  return {alpha, beta};
}

double refraction_loss(const SoilProfile& soil) {
  soil.validate();
  const double modulus = std::sqrt(soil.eps_real * soil.eps_real +
                                   soil.eps_imag * soil.eps_imag);
  const double inner = std::sqrt((modulus + soil.eps_real) / 2.0);
  const double loss = (inner + 1.0) / 4.0;
  return loss * loss;
}

double soil_loss(const SoilProfile& soil, double freq, double dist_soil) {
  require(dist_soil > 0.0, "dist_soil must be > 0");
  const auto [alpha, beta] = attenuation_constants(soil, freq);
  const double amplitude = 2.0 * beta * dist_soil / std::exp(-alpha * dist_soil);
  require_finite(amplitude, "dist_soil (soil loss overflow)");
  return amplitude * amplitude;
}

double friis_gain(double gain_tx, double gain_rx, double freq, double dist,
                  double ple) {
  require(gain_tx > 0.0 && gain_rx > 0.0 && freq > 0.0 && dist > 0.0 &&
              ple > 0.0,
          "friis_gain arguments must be > 0");
  const double wavelength_term =
      constants::speed_of_light / (4.0 * constants::pi * freq);
  return gain_tx * gain_rx * wavelength_term * wavelength_term *
         std::pow(dist, -ple);
}

cvec sample_rician(double k_factor, std::size_t dims, Rng& rng) {
  require(k_factor >= 0.0, "k_factor must be >= 0");
  require(dims >= 1, "dims must be >= 1");
  const double los_scale = std::sqrt(k_factor / (k_factor + 1.0));
  const double nlos_scale = std::sqrt(1.0 / (k_factor + 1.0));
  // One deterministic LoS phase per draw.
  const double phase = rng.uniform(0.0, 2.0 * constants::pi);
  const std::complex<double> los =
      los_scale * std::complex<double>(std::cos(phase), std::sin(phase));
  cvec out(dims);
  for (std::size_t i = 0; i < dims; ++i)
    out[i] = los + nlos_scale * rng.complex_normal();
  return out;
}

LinkRealization realize_links(const SoilProfile& soil, const Geometry& geom,
                              const AntennaGains& gains, Rng& rng) {
  soil.validate();
  gains.validate();
  geom.validate(soil.burial_depth);

  const double f = gains.carrier_freq;
  const double refr = refraction_loss(soil);
  const std::size_t n = geom.ud_count();
  const std::size_t q = gains.num_antennas;

  LinkRealization links;
  {
    const double budget = friis_gain(gains.g_sat, gains.g_relay, f,
                                     geom.sat_distance_ar, gains.ple_leo);
    const double amp = std::sqrt(budget);
    links.h_ar = sample_rician(gains.rician_k_leo, q, rng);
    for (auto& v : links.h_ar) v *= amp;
  }

  links.h_ud.reserve(n);
  links.h_relay_ud.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double soil_att = soil_loss(soil, f, geom.soil_distance[i]);
    const double through_soil = refr * soil_att;

    const double sat_budget = friis_gain(gains.g_sat, gains.g_ud, f,
                                         geom.sat_distance_ud[i],
                                         gains.ple_leo) /
                              through_soil;
    cvec h = sample_rician(gains.rician_k_leo, q, rng);
    const double sat_amp = std::sqrt(sat_budget);
    for (auto& v : h) v *= sat_amp;
    links.h_ud.push_back(std::move(h));

    const double relay_budget = friis_gain(gains.g_relay, gains.g_ud, f,
                                           geom.relay_distance_ud[i],
                                           gains.ple_relay) /
                                through_soil;
    const cvec delta = sample_rician(gains.rician_k_relay, 1, rng);
    links.h_relay_ud.push_back(delta[0] * std::sqrt(relay_budget));
  }
  return links;
}

}  // namespace crs
