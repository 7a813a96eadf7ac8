#pragma once
// Moment and localizing matrix relaxations of polynomial maximisation over a
// semialgebraic set. Assembled directly from moment variables (one per
// monomial), deliberately not sharing any code with the certificate compiler
// in sos.hpp, so the two relaxation routes cross-check each other.

#include <map>
#include <vector>

#include "seqbound/conic.hpp"
#include "seqbound/poly.hpp"
#include "seqbound/sets.hpp"
#include "seqbound/sos.hpp"

namespace seqbound::moment {

using poly::Monomial;
using poly::Polynomial;

struct Relaxation {
  sets::SemialgebraicSet S;
  Polynomial objective;
  int level = 0;
  std::vector<Monomial> moments;  // grlex, moments[0] == 1
  std::map<Monomial, int, poly::GrlexLess> index;
  std::vector<int> moment_vars;   // free variable per moment
  std::vector<Monomial> basis;    // basis of the moment matrix
  int moment_block = -1;
  std::vector<int> localizing_blocks;          // -1 when the level is too low
  std::vector<std::vector<Monomial>> localizing_bases;
  // row ranges for the dual reconstruction
  int one_row = -1;
  std::vector<std::pair<int, std::vector<Monomial>>> eq_rows;  // (first row, shifts) per eq
  conic::ConicProblem prog;
};

// Moments up to degree 2*level; throws when deg(p) > 2*level.
Relaxation build_relaxation(const Polynomial& p, const sets::SemialgebraicSet& S, int level);

struct MomentResult {
  double value = 0;            // relaxation optimum, >= max_S p up to solver error
  std::vector<double> y;       // moment values, parallel to rel.moments
  Relaxation rel;
  conic::SdpSolution sol;
  conic::SolverReport report;
};

MomentResult relax_max(const Polynomial& p, const sets::SemialgebraicSet& S, int level,
                       const conic::SolveOptions& opts = {});
MomentResult relax_min(const Polynomial& p, const sets::SemialgebraicSet& S, int level,
                       const conic::SolveOptions& opts = {});

// First-order moment readout with a flatness check on the moment matrix:
// the relaxation is tight and the point optimal when the matrix is rank one.
struct Extraction {
  bool rank_one = false;
  double second_eig_ratio = 1.0;  // lambda_2 / lambda_1 of the moment matrix
  std::vector<double> point;      // indexed by position in rel.S.vars
  bool feasible = false;          // point lies in S
};

Extraction extract_point(const MomentResult& res, double rank_tol = 1e-6);

// Certified upper bound on max_S p. Solves the moment relaxation, rebuilds
// the dual weighted-SOS certificate from the block duals and row multipliers,
// and pays for every reconstruction defect through box bounds:
//   rigorous = nu_dual + l1_sup(identity error) + negative-eigenvalue penalty.
// Solver tolerances never enter the bound.
struct ViolationBound {
  double raw = 0;        // primal relaxation value
  double dual_value = 0; // dual certificate constant
  double delta = 0;      // rigorization slack
  double rigorous = 0;   // dual_value + delta
  sos::Certificate cert;
  conic::SolverReport report;
};

ViolationBound max_violation(const Polynomial& p, const sets::SemialgebraicSet& S, int level,
                             const conic::SolveOptions& opts = {});

}  // namespace seqbound::moment
