#pragma once

#include <cmath>

namespace crs {

// CODATA 2018 values. Fixed, never configurable.
namespace constants {
inline constexpr double speed_of_light = 299792458.0;          // m/s
inline constexpr double mu0 = 1.25663706212e-6;                // H/m
inline constexpr double eps0 = 8.8541878128e-12;               // F/m
inline constexpr double pi = 3.141592653589793238462643383279502884;
}  // namespace constants

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

}  // namespace crs
