#pragma once
// Basic closed semialgebraic sets {z : g_i(z) >= 0, h_j(z) = 0} plus the
// standard building blocks used by the sequential models.

#include <string>
#include <vector>

#include "seqbound/poly.hpp"

namespace seqbound::sets {

using poly::Polynomial;
using poly::VarId;

struct SemialgebraicSet {
  std::vector<VarId> vars;            // ambient variables, ascending
  std::vector<Polynomial> ineqs;      // g_i >= 0
  std::vector<Polynomial> eqs;        // h_j == 0
  // Per-variable box known to contain the set, parallel to vars.
  // Used for rigorous residual accounting; defaults to [-1, 1].
  std::vector<std::pair<double, double>> bounds;

  SemialgebraicSet() = default;
  explicit SemialgebraicSet(std::vector<VarId> v);

  void add_ineq(Polynomial g) { ineqs.push_back(std::move(g)); }
  void add_eq(Polynomial h) { eqs.push_back(std::move(h)); }
  void set_bound(VarId v, double lo, double hi);

  // Cartesian-style product: union of variables and constraints.
  SemialgebraicSet product(const SemialgebraicSet& o) const;

  // max over the box of |m(z)|, used in rigorous slack formulas
  double monomial_sup(const poly::Monomial& m) const;

  // sum_m |c_m| monomial_sup(m): a box bound on sup |p|
  double l1_sup(const Polynomial& p) const;

  // all g_i(z) >= -tol and |h_j(z)| <= tol; point is positional, parallel
  // to vars (not VarId indexed)
  bool contains(const std::vector<double>& point, double tol = 1e-9) const;
};

// {x : x_i >= 0, 1 - sum x_i >= 0}; adds the normalisation equality
// sum x_i = 1 when with_sum_eq is set.
SemialgebraicSet simplex(const std::vector<VarId>& vars, bool with_sum_eq = false);

SemialgebraicSet box(const std::vector<VarId>& vars, double lo, double hi);

// {x : r^2 - sum x_i^2 >= 0}
SemialgebraicSet ball(const std::vector<VarId>& vars, double radius = 1.0);

}  // namespace seqbound::sets
