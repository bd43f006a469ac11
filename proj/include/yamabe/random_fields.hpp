#pragma once

// Deterministic random inputs: a splittable 64-bit generator (so adding
// experiments never perturbs existing streams) and band-limited trigonometric
// test fields.

#include <cmath>
#include <cstdint>
#include <vector>

#include "yamabe/grid.hpp"

namespace yamabe {

struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() {  // in [0,1)
    return (next() >> 11) * 0x1.0p-53;
  }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  // Independent child stream; the parent stream is not advanced.
  SplitMix64 split(std::uint64_t label) const {
    SplitMix64 tmp(state ^ (0x9e3779b97f4a7c15ULL * (label + 1)));
    return SplitMix64(tmp.next());
  }
};

// Random trigonometric polynomial with integer modes |k_i| <= max_mode,
// normalized so the typical amplitude is close to `amplitude`.
inline ScalarField random_bandlimited(const PeriodicGrid& g, SplitMix64& rng,
                                      int max_mode, double amplitude) {
  const int n = g.dim;
  std::vector<std::vector<int>> modes;
  std::vector<int> k(n, -max_mode);
  while (true) {
    bool nonzero = false, lead_positive = false;
    for (int d = 0; d < n; ++d) {
      if (k[d] != 0 && !nonzero) { nonzero = true; lead_positive = k[d] > 0; }
    }
    if (nonzero && lead_positive) modes.push_back(k);  // one of each +-k pair
    int d = n - 1;
    while (d >= 0 && ++k[d] > max_mode) k[d--] = -max_mode;
    if (d < 0) break;
  }

  std::vector<double> amp(modes.size()), phase0(modes.size());
  for (size_t m = 0; m < modes.size(); ++m) {
    amp[m] = rng.uniform(-1.0, 1.0);
    phase0[m] = rng.uniform(0.0, 2.0 * M_PI);
  }
  const double norm = amplitude / std::sqrt(static_cast<double>(modes.size()));

  ScalarField f(g);
  int idx[kMaxDim];
  for (std::int64_t p = 0; p < f.num_points(); ++p) {
    g.coords(p, idx);
    double v = 0.0;
    for (size_t m = 0; m < modes.size(); ++m) {
      double ph = phase0[m];
      for (int d = 0; d < n; ++d)
        ph += 2.0 * M_PI * modes[m][d] * idx[d] / static_cast<double>(g.points[d]);
      v += amp[m] * std::cos(ph);
    }
    f(p) = norm * v;
  }
  return f;
}

inline SymTensorField random_bandlimited_sym(const PeriodicGrid& g, SplitMix64& rng,
                                             int max_mode, double amplitude) {
  SymTensorField h(g);
  for (int c = 0; c < h.ncomp; ++c) {
    SplitMix64 child = rng.split(1000 + c);
    ScalarField comp = random_bandlimited(g, child, max_mode, amplitude);
    for (std::int64_t p = 0; p < h.num_points(); ++p) h(p, c) = comp(p);
  }
  rng.next();
  return h;
}

}  // namespace yamabe
