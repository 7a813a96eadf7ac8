#pragma once
// Upper bounds on the maximum total reward of sequential processes
//   s_{k+1} = f_k(s_k, h_k, lambda),  reward sum_k r_k(s_k, h_k, lambda),
// maximised over shared parameters lambda and per-step controls h_k. The
// bound comes from polynomial value functions V_k(s, lambda) satisfying
//   V_k >= r_k + V_{k+1} o f_k  on the step domain,   nu >= V_1(s_1, lambda),
// each inequality certified by a weighted-SOS membership, so nu >= optimum.
// Companion tools: rigorous certificate audits, grid enumeration lower
// bounds, adaptive-game values, and optimizer recovery from moments.

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqbound/moment.hpp"
#include "seqbound/poly.hpp"
#include "seqbound/sets.hpp"
#include "seqbound/sos.hpp"

namespace seqbound::seqopt {

using poly::Monomial;
using poly::Polynomial;
using poly::VarId;

struct Step {
  std::vector<VarId> h_vars;          // this step's controls, in grid order
  sets::SemialgebraicSet domain;      // constraints on (s_k, h_k, lambda)
  sets::SemialgebraicSet next_domain; // constraints on s_{k+1}, explicit mode
  std::map<VarId, Polynomial> next;   // state update, one entry per state var
  Polynomial reward;
};

struct SequentialModel {
  std::vector<VarId> state_vars;
  std::vector<VarId> next_vars;       // aliases for s_{k+1} in explicit mode
  std::vector<VarId> lambda_vars;
  sets::SemialgebraicSet lambda_set;
  std::vector<double> initial_state;  // parallel to state_vars
  std::vector<Step> steps;
  int num_vars = 0;                   // registry size, for evaluation buffers
};

enum class Composition {
  Substitute,  // V_{k+1}(f_k(s,h,lambda), lambda): higher degree, fewer vars
  Explicit     // fresh s' variables tied by equality multipliers
};

struct UpperBoundOptions {
  Composition composition = Composition::Substitute;
  int value_degree = 2;  // default V basis: monomials in (s, lambda)
  int degree = 2;        // certificate degree cap
  int depth = 1;         // constraint-product depth (1 = Putinar)
  // overrides; any may be empty
  std::function<std::vector<Monomial>(int step)> value_basis;
  std::function<sos::CertificateTemplate(int step, const sets::SemialgebraicSet&)> step_template;
  std::function<sos::CertificateTemplate(const sets::SemialgebraicSet&)> initial_template;
  conic::SolveOptions solver;
};

struct ValueCertificate {
  double upper_bound = 0;
  std::vector<Polynomial> values;  // V_k for k = 0..N-1 over (s, lambda)
  struct Constraint {
    std::string label;
    sets::SemialgebraicSet set;
    Polynomial target;  // certified nonnegative on set
    sos::Certificate cert;
  };
  std::vector<Constraint> constraints;  // [0] initial, then one per step
  Composition composition = Composition::Substitute;
  conic::SolverReport report;
};

ValueCertificate upper_bound(const SequentialModel& m, const UpperBoundOptions& opt = {});

// Rigorous audit: recompute each value inequality from the stored value
// functions and bound its worst violation delta_i; any trajectory then
// satisfies  total reward <= nu + sum_i delta_i.
struct AuditOptions {
  enum class Method {
    Certificate,  // re-verify the stored SOS certificates (fast)
    Moment        // independent moment bound on each violation, ignores certificates
  };
  Method method = Method::Certificate;
  int moment_level = 2;
  conic::SolveOptions solver;
};

struct AuditReport {
  double raw = 0;        // nu as solved
  double rigorous = 0;   // nu + sum of audited violations
  std::vector<double> deltas;
  double max_delta = 0;
};

AuditReport audit_certificate(const SequentialModel& m, const ValueCertificate& vc,
                              const AuditOptions& opt = {});

// The constraint list (set, target) that value functions and a bound assert
// for this model, initial constraint first; certificates are left empty.
// Used by audits and by the policy derivative programs.
std::vector<ValueCertificate::Constraint> build_targets(const SequentialModel& m,
                                                        const std::vector<Polynomial>& values,
                                                        double nu, Composition comp);

// Sparsify the value functions: for each threshold in turn, drop value
// coefficients below it, re-solve with the value bases restricted to the
// surviving monomials, and keep the result only while the bound stays within
// keep_tol of the input bound. Thresholds are tried in ascending order; the
// first failing threshold stops the loop.
struct SimplifyOptions {
  std::vector<double> thresholds{1e-7, 1e-5, 1e-3};
  double keep_tol = 1e-6;
  UpperBoundOptions solve;  // composition is taken from the input certificate
};

ValueCertificate simplify_values(const SequentialModel& m, const ValueCertificate& vc,
                                 const SimplifyOptions& opt = {});

// Replay a concrete strategy; h[k] is parallel to steps[k].h_vars.
double simulate(const SequentialModel& m, const std::vector<double>& lambda,
                const std::vector<std::vector<double>>& h);

// Grid-enumeration lower bound with prefix feasibility pruning: every
// constraint is tested as soon as all its variables are bound. tie_h reuses
// one control point for all steps (a strategy restriction, so still a valid
// lower bound). When the evaluation cap triggers under the parallel path the
// truncation point depends on scheduling; pick caps generously.
struct BruteForceOptions {
  int grid = 5;                        // default samples per variable
  std::map<VarId, int> grid_by_var;    // per-variable overrides
  bool tie_h = false;
  long long max_evals = 10000000;
  bool parallel = true;
  double feas_tol = 1e-9;

  int grid_for(VarId v) const {
    auto it = grid_by_var.find(v);
    return it == grid_by_var.end() ? grid : it->second;
  }
};

struct BruteForceResult {
  double value = 0;
  bool found = false;
  std::vector<double> lambda;
  std::vector<std::vector<double>> h;
  bool truncated = false;
  long long evals = 0;
};

BruteForceResult brute_force_value(const SequentialModel& m, const BruteForceOptions& opt = {});

// Finite adaptive game: from state t at step k the controller picks the
// action i maximising sum_{t'} W[i](t, t') mu_{k+1}(t'). Ties pick the
// lowest action index. Weights and terminal values must be nonnegative;
// otherwise per-state maximisation is not the table optimum.
struct AdaptiveGame {
  std::vector<Eigen::MatrixXd> W;  // one |T| x |T| weight matrix per action
  Eigen::VectorXd terminal;        // mu at horizon end
  int horizon = 1;
  int start = 0;
};

struct GameValue {
  double value = 0;
  std::vector<std::vector<int>> policy;  // [step][state] -> action
  std::vector<Eigen::VectorXd> mu;       // mu[k], k = 0..horizon
};

GameValue adaptive_game_value(const AdaptiveGame& g);

// Preparation game: at round k the box holds configuration t, measures the
// incoming state with the POVM povm[k][t] and moves to the outcome label t'.
// score holds the final payoff per configuration, collected after round N.
// Configurations are a fixed finite set; povm[k][t][t'] acts on a fixed
// d-dimensional system.
struct PreparationGame {
  std::vector<std::vector<std::vector<Eigen::MatrixXcd>>> povm;  // [round][t][t']
  Eigen::VectorXd score;
  int initial = 0;
};

// Throws unless every POVM element is Hermitian PSD and each family sums to
// the identity, both to tolerance tol.
void check_povm(const PreparationGame& g, double tol = 1e-10);

PreparationGame repeat_game(int rounds, const std::vector<std::vector<Eigen::MatrixXcd>>& family,
                            const Eigen::VectorXd& score, int initial);

struct GameScore {
  double value = 0;
  std::vector<Eigen::VectorXd> mu;          // mu[k], k = 0..N; mu[N] = score
  std::vector<std::vector<int>> maximizer;  // [round][t] -> feasible-state index
};

// Best adaptive strategy restricted to preparing one of the given feasible
// states each round: mu_k(t) = max_i tr(rho_i sum_{t'} mu_{k+1}(t') M_{t'|t}).
// Exact because the weights tr(rho_i M) are nonnegative.
GameScore adaptive_game_value(const PreparationGame& g,
                              const std::vector<Eigen::MatrixXcd>& feasible);

// Candidate optimizer read off a near-tight certificate: maximise
// V_1(s_1, lambda) subject to the saturation equalities
//   V_k(s_k, lambda) = r_k + V_{k+1}(f_k(s_k, h_k, lambda), lambda)
// over fresh per-step copies of the state variables, relaxed at the given
// moment level. A loose certificate leaves the equalities unsatisfiable and
// the result reports infeasible. `achieved` replays the extracted point
// through the true dynamics, so it is a valid lower bound whenever
// `extracted` holds.
struct RecoverOptions {
  int level = 2;          // raised automatically to cover the constraint degrees
  double rank_tol = 1e-6;
  double eq_slack = 1e-6; // saturation equalities become |.| <= eq_slack bands;
                          // 0 requests hard equality rows
  conic::SolveOptions solver;
};

struct RecoverResult {
  bool extracted = false;
  bool feasible = false;  // relaxation solved to optimality
  double relaxation_value = 0;
  double achieved = 0;
  std::vector<double> lambda;
  std::vector<std::vector<double>> h;
  moment::Extraction extraction;
};

RecoverResult recover_optimizer(const SequentialModel& m, const ValueCertificate& vc,
                                const RecoverOptions& opt = {});

}  // namespace seqbound::seqopt
