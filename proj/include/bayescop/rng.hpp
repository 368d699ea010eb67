#pragma once

#include <cstdint>
#include <random>

namespace bayescop {

// Every chain owns exactly one of these; all randomness flows through it.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Uniform on the open interval (0,1).
inline double uniform_open(Rng& rng) {
  double u = 0.0;
  do {
    u = uniform01(rng);
  } while (u <= 0.0);
  return u;
}

inline double std_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace bayescop
