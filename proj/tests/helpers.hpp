#pragma once
// Shared test utilities: seeded RNG draws and random polynomial generators.

#include <random>
#include <vector>

#include "seqbound/poly.hpp"

namespace testutil {

using seqbound::poly::Monomial;
using seqbound::poly::Polynomial;
using seqbound::poly::VarId;

inline std::mt19937& rng(unsigned seed = 0) {
  static std::mt19937 gen(12345u);
  if (seed) gen.seed(seed);
  return gen;
}

inline double uniform(double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng());
}

inline std::vector<double> random_point(int n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> p(n);
  for (auto& x : p) x = uniform(lo, hi);
  return p;
}

inline Polynomial random_poly(const std::vector<VarId>& vars, int max_deg, int terms,
                              double coeff_range = 2.0) {
  std::uniform_int_distribution<int> deg(0, max_deg);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(vars.size()) - 1);
  Polynomial p;
  for (int t = 0; t < terms; ++t) {
    Monomial m;
    int d = deg(rng());
    for (int i = 0; i < d; ++i) m = m * Monomial::var(vars[pick(rng())]);
    p += Polynomial(m, uniform(-coeff_range, coeff_range));
  }
  return p;
}

}  // namespace testutil
