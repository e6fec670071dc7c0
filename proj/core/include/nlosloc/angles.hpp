#pragma once

#include <numbers>

namespace nlos {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps to [0, 2*pi).
double wrap_2pi(double angle);

/// Wraps to (-pi, pi].
double wrap_pi(double angle);

}  // namespace nlos
