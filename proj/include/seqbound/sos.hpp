#pragma once
// Weighted sum-of-squares certificates that a polynomial is nonnegative on a
// semialgebraic set, compiled to semidefinite feasibility by coefficient
// matching. The target may have coefficients that are affine in decision
// variables of the surrounding cone program, so value-function constraints
// can be asserted before the values are known.

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "seqbound/conic.hpp"
#include "seqbound/poly.hpp"
#include "seqbound/sets.hpp"

namespace seqbound::sos {

using poly::Monomial;
using poly::Polynomial;
using poly::VarId;

// Polynomial in x whose coefficients are affine in cone-program decision
// variables d: p(x; d) = base(x) + sum_v d_v comps[v](x).
class VarPoly {
 public:
  Polynomial base;
  std::map<int, Polynomial> comps;

  VarPoly() = default;
  VarPoly(Polynomial p) : base(std::move(p)) {}
  VarPoly(double c) : base(Polynomial(c)) {}

  // single decision variable times a fixed polynomial
  static VarPoly decision(int var, Polynomial coeff = Polynomial(1.0));

  // fresh decision variable per basis monomial, registered in prog;
  // coefficient variable ids returned in the same order as the basis
  static VarPoly parametric(conic::ConicProblem& prog, const std::vector<Monomial>& basis,
                            std::vector<int>* coeff_vars = nullptr);

  VarPoly& operator+=(const VarPoly& o);
  VarPoly& operator-=(const VarPoly& o);
  VarPoly& operator*=(double c);
  friend VarPoly operator+(VarPoly a, const VarPoly& b) { return a += b; }
  friend VarPoly operator-(VarPoly a, const VarPoly& b) { return a -= b; }
  friend VarPoly operator*(VarPoly a, double c) { return a *= c; }
  friend VarPoly operator*(double c, VarPoly a) { return a *= c; }
  // multiplication by a numeric polynomial keeps affinity in d
  friend VarPoly operator*(const VarPoly& a, const Polynomial& p);

  VarPoly substitute(const std::map<VarId, Polynomial>& repl) const;

  // fix the decision variables from a full free-variable vector
  Polynomial evaluate_decision(const std::vector<double>& free_vars) const;

  int degree() const;
  std::vector<Monomial> support() const;
};

// One weighted-SOS summand: (prod_{i in ineq_indices} g_i) * b' G b with
// G psd over the given monomial basis. Empty indices give the plain SOS term.
struct ProductTerm {
  std::vector<int> ineq_indices;
  std::vector<Monomial> basis;
};

// Free-sign multiplier on an equality constraint, spanned by basis monomials.
struct EqTerm {
  int eq_index;
  std::vector<Monomial> basis;
};

struct CertificateTemplate {
  std::vector<ProductTerm> products;
  std::vector<EqTerm> eq_terms;
};

struct TemplateOptions {
  int degree = 2;  // certificate degree cap
  int depth = 1;   // max number of inequality factors per product
  // optional override for the Gram basis of a product term; receives the
  // factor indices and the remaining half-degree (may return empty to skip)
  std::function<std::vector<Monomial>(const std::vector<int>&, int)> basis_fn;
  // optional per-equality multiplier degree; default degree - deg(h_j)
  std::vector<int> eq_degrees;
};

CertificateTemplate make_template(const sets::SemialgebraicSet& S, const TemplateOptions& opt);
CertificateTemplate putinar_template(const sets::SemialgebraicSet& S, int degree);
CertificateTemplate schmuedgen_template(const sets::SemialgebraicSet& S, int degree, int depth);

// Result of compiling one membership assertion into prog: which psd blocks
// and multiplier coefficient variables realise it, for later extraction.
struct Compiled {
  struct Term {
    int block = -1;
    std::vector<int> ineq_indices;
    std::vector<Monomial> basis;
    Polynomial product;  // numeric product of the g_i factors
  };
  struct EqMult {
    int eq_index = -1;
    std::vector<int> coeff_vars;
    std::vector<Monomial> basis;
  };
  std::vector<Term> terms;
  std::vector<EqMult> eq_mults;
  int first_row = -1;
  int num_rows = 0;
};

// Appends equality rows to prog asserting, identically in x,
//   target(x; d) == sum_t prod_t(x) (b_t' G_t b_t) + sum_j mult_j(x; c) h_j(x).
// Throws std::runtime_error when some target monomial cannot be produced by
// any template term (listing the offending monomials).
Compiled compile(const VarPoly& target, const sets::SemialgebraicSet& S,
                 const CertificateTemplate& tmpl, conic::ConicProblem& prog,
                 const std::string& label = "sos");

// Numeric certificate recovered from a solved program.
struct Certificate {
  struct Term {
    std::vector<int> ineq_indices;
    std::vector<Monomial> basis;
    Eigen::MatrixXd gram;
  };
  struct EqMult {
    int eq_index = -1;
    Polynomial mult;
  };
  std::vector<Term> terms;
  std::vector<EqMult> eq_mults;
};

Certificate extract(const Compiled& c, const conic::SdpSolution& sol);

// sum_t prod_t (b' G b) + sum_j mult_j h_j as a plain polynomial
Polynomial reconstruct(const Certificate& cert, const sets::SemialgebraicSet& S);

// Rigorous slack of the claim "target >= 0 on S" given the certificate:
// on S, target >= -delta with
//   delta = l1_sup(target - reconstruction) + sum_t |min(eig G_t, 0)| *
//           l1_sup(prod_t) * sum_i monomial_sup(b_i^2).
// Only box information from S enters, never solver-reported residuals.
struct VerifyReport {
  double mismatch_sup = 0;  // box bound on |target - reconstruction|
  double min_gram_eig = 0;
  double gram_penalty = 0;
  double delta = 0;
};

VerifyReport verify(const Certificate& cert, const Polynomial& target,
                    const sets::SemialgebraicSet& S);

std::string certificate_to_json(const Certificate& cert, const poly::VariableRegistry& reg);
Certificate certificate_from_json(const std::string& text, const poly::VariableRegistry& reg);

// max gamma with p - gamma certified nonnegative on S; a convenience wrapper
// used by tests and cross-checks
struct BoundResult {
  double bound = 0;
  Certificate cert;
  conic::SolverReport report;
};
BoundResult sos_lower_bound(const Polynomial& p, const sets::SemialgebraicSet& S,
                            const CertificateTemplate& tmpl,
                            const conic::SolveOptions& opts = {});

}  // namespace seqbound::sos
