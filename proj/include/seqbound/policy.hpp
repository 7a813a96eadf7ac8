#pragma once
// Optimization over policy parameters x that enter the dynamics and rewards
// of a sequential model. nu(x) denotes the certified upper bound produced by
// seqopt::upper_bound on the model sliced at x. The tools here compute
// one-sided derivatives D+nu(x) per coordinate by perturbing the certificate
// around its saturated constraints, fall back to a coordinate-descent
// refinement when the value functions are not unique, and drive projected
// gradient descent (plain or Adam) with a persisted trajectory.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqbound/seqopt.hpp"

namespace seqbound::policy {

using poly::Monomial;
using poly::Polynomial;
using poly::VarId;

using Projector = std::function<std::vector<double>(const std::vector<double>&)>;

// Model family: the step updates and rewards may mention the policy
// variables; slicing substitutes a numeric policy and yields an ordinary
// sequential model. Domain and lambda constraints must not involve x.
struct PolicyModel {
  seqopt::SequentialModel family;
  std::vector<VarId> policy_vars;
  seqopt::UpperBoundOptions options;  // used by slices and derivative programs
  Projector project;                  // maps any vector into the policy set
};

seqopt::SequentialModel slice(const PolicyModel& pm, const std::vector<double>& x);

// upper_bound of the slice, with pm.options
seqopt::ValueCertificate solve_slice(const PolicyModel& pm, const std::vector<double>& x);

struct CoordinateDerivative {
  double mu = 0;          // bound on D+nu(x) along the coordinate
  bool ok = false;
  std::vector<double> xi; // saturation multiplier per certificate constraint
  conic::SolverReport report;
};

// Derivative program around the solved certificate: minimise mu over
// (mu, Vhat_k, xi_i) subject to, on each constraint set of the certificate,
//   xi_i * target_i + [perturbation of constraint i under dx_i] >= 0
// certified with the same templates as the original solve. The result is an
// upper bound on D+nu(x); it is exact when the certificate's minimiser is
// unique. The multipliers are constrained to xi_i >= 0 (lossless, since the
// targets are themselves certifiable) and carry a tiny objective penalty;
// both guard against unbounded rays fed by solver noise in the stored
// targets and can only bias mu upward. negate_direction computes the
// derivative along -e_i instead, so D-nu(x) = -mu(-e_i).
CoordinateDerivative directional_derivative(const PolicyModel& pm, const std::vector<double>& x,
                                            int coordinate, const seqopt::ValueCertificate& cert,
                                            bool negate_direction = false);

// Monomial-average functional q in Q; missing monomials average to zero.
using Functional = std::map<Monomial, double, poly::GrlexLess>;

struct PinnedOptions {
  double annihilation_tol = 1e-6;  // |<target_i>_q| allowed
  double range_tol = 1e-4;         // first-moment spread allowed in Q'_i
  double cross_check_tol = 1e-4;   // disagreement with the full program allowed
  bool verify_singleton = true;    // probe each Q'_i for uniqueness
  bool cross_check = true;         // also run directional_derivative and compare
  int level = 0;                   // probe relaxation level; 0 = from degrees
  // weight on max(0, <target>) when probing; the probe maximises moments
  // penalised away from the saturating set instead of pinning <target> = 0
  // exactly, which would have no interior
  double probe_penalty = 1e5;
  conic::SolveOptions solver;
};

// Evaluation form of the derivative, valid only when each saturating set
//   Q'_i = {q in Q : <target_i>_q = 0}
// is a singleton {q_i}: mu chains the averaged reward and dynamics
// derivatives backwards through the q_i. Every precondition is verified
// (annihilation, marginal consistency, optional singleton probe and full
// cross-check); any failure throws instead of returning a wrong number.
// q is ordered like cert.constraints: q[0] for the initial constraint.
CoordinateDerivative directional_derivative_pinned(const PolicyModel& pm,
                                                   const std::vector<double>& x, int coordinate,
                                                   const seqopt::ValueCertificate& cert,
                                                   const std::vector<Functional>& q,
                                                   const PinnedOptions& opt = {});

struct DescentOptions {
  int max_outer = 8;
  double rel_tol = 1e-6;  // stop when mu improves less than this relatively
  conic::SolveOptions solver;
};

struct DescentDiagnostic {
  std::vector<double> mu_sequence;  // nonincreasing D+ estimates
  double mu = 0;                    // best (last) D+ estimate
  double d_minus = 0;               // D- estimate at the final value functions
  double gap = 0;                   // |D+ - D-|, differentiability diagnostic
  bool ok = false;
  int iterations = 0;
};

// Alternates the derivative program (fixed V, free xi) with its variant that
// re-optimises V at fixed xi among the minimisers of the unperturbed
// problem, to tighten mu when the value functions are not unique.
DescentDiagnostic coordinate_descent_nonunique(const PolicyModel& pm, const std::vector<double>& x,
                                               int coordinate, const seqopt::ValueCertificate& seed,
                                               const DescentOptions& opt = {});

struct GradientEval {
  double value = 0;
  std::vector<double> gradient;
  std::vector<int> failed;  // coordinates frozen at 0 this evaluation
};

using ObjectiveFn = std::function<GradientEval(const std::vector<double>& x)>;

struct OptimizeOptions {
  int steps = 100;
  double lr = 0.01;
  enum class Method { Plain, Adam } method = Method::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool parallel = true;   // per-coordinate derivative solves
  int threads = 0;        // 0 = hardware concurrency
  // > 0: per coordinate, also estimate D- and rerun coordinates whose
  // |D+ - D-| exceeds the threshold through coordinate descent
  double diagnose_threshold = 0;
  std::string trajectory_path;  // JSON-lines sink; empty disables persistence
  bool resume = false;          // restart from the last record in the sink
};

struct IterationRecord {
  int iteration = 0;
  std::vector<double> x;
  double value = 0;
  std::vector<int> frozen;
};

struct OptimizeResult {
  std::vector<double> x;
  double value = 0;
  std::vector<IterationRecord> trajectory;
};

// Projected descent x <- project(x - lr * grad) over a black-box objective.
OptimizeResult optimize_policy(const ObjectiveFn& objective, const Projector& project,
                               std::vector<double> x0, const OptimizeOptions& opt = {});

// nu(x) objective: solves the slice each iteration and differentiates every
// coordinate through directional_derivative (in parallel when enabled).
OptimizeResult optimize_policy(const PolicyModel& pm, std::vector<double> x0,
                               const OptimizeOptions& opt = {});

// Frobenius-nearest valid POVM families, one independent projection per
// configuration: {M_{t'|t} psd, sum_{t'} M_{t'|t} = I}. Inputs are
// symmetrised; throws when the projection program does not solve, since
// descent feasibility depends on it.
std::vector<std::vector<Eigen::MatrixXcd>> povm_project(
    const std::vector<std::vector<Eigen::MatrixXcd>>& raw,
    const conic::SolveOptions& solver = {});

}  // namespace seqbound::policy
