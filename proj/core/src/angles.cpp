#include "nlosloc/angles.hpp"

#include <cmath>

namespace nlos {

double wrap_2pi(double angle) {
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a -= kTwoPi;
  return a;
}

double wrap_pi(double angle) {
  double a = std::fmod(angle + kPi, kTwoPi);
  if (a <= 0.0) a += kTwoPi;
  return a - kPi;
}

}  // namespace nlos
