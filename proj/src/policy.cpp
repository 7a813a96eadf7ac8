#include "seqbound/policy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "seqbound/quantum.hpp"

namespace seqbound::policy {

namespace {

using sos::VarPoly;

std::map<VarId, Polynomial> policy_bind(const PolicyModel& pm, const std::vector<double>& x) {
  if (x.size() != pm.policy_vars.size())
    throw std::invalid_argument("policy vector length does not match policy_vars");
  std::map<VarId, Polynomial> bind;
  for (std::size_t i = 0; i < x.size(); ++i) bind[pm.policy_vars[i]] = Polynomial(x[i]);
  return bind;
}

bool mentions(const Polynomial& p, const std::vector<VarId>& vars) {
  for (VarId v : p.variables())
    if (std::find(vars.begin(), vars.end(), v) != vars.end()) return true;
  return false;
}

void check_constraints_policy_free(const PolicyModel& pm) {
  auto scan = [&pm](const sets::SemialgebraicSet& S, const char* where) {
    for (const auto& g : S.ineqs)
      if (mentions(g, pm.policy_vars))
        throw std::invalid_argument(std::string(where) + " involves policy variables");
    for (const auto& h : S.eqs)
      if (mentions(h, pm.policy_vars))
        throw std::invalid_argument(std::string(where) + " involves policy variables");
  };
  scan(pm.family.lambda_set, "lambda set");
  for (const auto& st : pm.family.steps) {
    scan(st.domain, "a step domain");
    scan(st.next_domain, "a step next-domain");
  }
}

std::vector<Monomial> value_basis(const PolicyModel& pm, const seqopt::SequentialModel& m, int k) {
  if (pm.options.value_basis) return pm.options.value_basis(k);
  std::vector<VarId> vars = m.state_vars;
  vars.insert(vars.end(), m.lambda_vars.begin(), m.lambda_vars.end());
  std::sort(vars.begin(), vars.end());
  return poly::monomials_up_to(vars, pm.options.value_degree);
}

sos::CertificateTemplate template_for(const PolicyModel& pm, std::size_t i,
                                      const sets::SemialgebraicSet& S) {
  if (i == 0)
    return pm.options.initial_template
               ? pm.options.initial_template(S)
               : sos::schmuedgen_template(S, pm.options.degree, pm.options.depth);
  return pm.options.step_template
             ? pm.options.step_template(static_cast<int>(i) - 1, S)
             : sos::schmuedgen_template(S, pm.options.degree, pm.options.depth);
}

VarPoly diff_varpoly(const VarPoly& p, VarId v) {
  VarPoly out(p.base.differentiate(v));
  for (const auto& [var, c] : p.comps) {
    Polynomial d = c.differentiate(v);
    if (!d.is_zero()) out.comps[var] = std::move(d);
  }
  return out;
}

// Direction of change of the sliced dynamics and rewards along one policy
// coordinate, evaluated at x.
struct DirectionData {
  std::vector<Polynomial> dr;
  std::vector<std::map<VarId, Polynomial>> dnext;
};

DirectionData direction(const PolicyModel& pm, const std::vector<double>& x, int coordinate,
                        double sign) {
  auto bind = policy_bind(pm, x);
  VarId xv = pm.policy_vars.at(static_cast<std::size_t>(coordinate));
  DirectionData d;
  for (const auto& st : pm.family.steps) {
    d.dr.push_back(st.reward.differentiate(xv).substitute(bind) * sign);
    std::map<VarId, Polynomial> dn;
    for (const auto& [svar, f] : st.next) {
      Polynomial g = f.differentiate(xv);
      if (g.is_zero()) continue;
      g = g.substitute(bind) * sign;
      if (!g.is_zero()) dn[svar] = std::move(g);
    }
    d.dnext.push_back(std::move(dn));
  }
  return d;
}

std::map<VarId, Polynomial> initial_bind(const seqopt::SequentialModel& m) {
  std::map<VarId, Polynomial> init;
  for (std::size_t j = 0; j < m.state_vars.size(); ++j)
    init[m.state_vars[j]] = Polynomial(m.initial_state.at(j));
  return init;
}

std::map<VarId, Polynomial> next_rename(const seqopt::SequentialModel& m) {
  std::map<VarId, Polynomial> rename;
  for (std::size_t j = 0; j < m.state_vars.size(); ++j)
    rename[m.state_vars[j]] = Polynomial::variable(m.next_vars.at(j));
  return rename;
}

// First derivative of each certificate target along the direction, with Vhat
// standing in for dV/dx; the free scalar mu on the initial constraint is not
// included. V enters through the chain rule on the next-state argument and
// may itself carry decision variables.
std::vector<VarPoly> perturbation_exprs(const seqopt::SequentialModel& m, seqopt::Composition comp,
                                        const std::vector<VarPoly>& V,
                                        const std::vector<VarPoly>& Vhat,
                                        const DirectionData& dir) {
  const int N = static_cast<int>(m.steps.size());
  std::map<VarId, Polynomial> rename;
  if (comp == seqopt::Composition::Explicit) rename = next_rename(m);
  std::vector<VarPoly> out;
  out.push_back(VarPoly(Polynomial(0.0)) - Vhat[0].substitute(initial_bind(m)));
  for (int k = 0; k < N; ++k) {
    const auto& st = m.steps[k];
    VarPoly e = Vhat[static_cast<std::size_t>(k)] - VarPoly(dir.dr[static_cast<std::size_t>(k)]);
    if (k + 1 < N) {
      const auto& comp_map = comp == seqopt::Composition::Substitute ? st.next : rename;
      e -= Vhat[static_cast<std::size_t>(k) + 1].substitute(comp_map);
      for (const auto& [svar, df] : dir.dnext[static_cast<std::size_t>(k)]) {
        VarPoly dv = diff_varpoly(V[static_cast<std::size_t>(k) + 1], svar);
        if (dv.base.is_zero() && dv.comps.empty()) continue;
        e -= dv.substitute(comp_map) * df;
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

// The certificate targets with the value functions as decision polynomials
// and nu held at a fixed number.
std::vector<VarPoly> original_exprs(const seqopt::SequentialModel& m, seqopt::Composition comp,
                                    const std::vector<VarPoly>& V, double nu) {
  const int N = static_cast<int>(m.steps.size());
  std::map<VarId, Polynomial> rename;
  if (comp == seqopt::Composition::Explicit) rename = next_rename(m);
  std::vector<VarPoly> out;
  out.push_back(VarPoly(Polynomial(nu)) - V[0].substitute(initial_bind(m)));
  for (int k = 0; k < N; ++k) {
    const auto& st = m.steps[k];
    VarPoly e = V[static_cast<std::size_t>(k)] - VarPoly(st.reward);
    if (k + 1 < N) {
      const auto& comp_map = comp == seqopt::Composition::Substitute ? st.next : rename;
      e -= V[static_cast<std::size_t>(k) + 1].substitute(comp_map);
    }
    out.push_back(std::move(e));
  }
  return out;
}

bool solved(const conic::SolverReport& r) {
  return r.status == conic::Status::Optimal || r.status == conic::Status::NearOptimal;
}

// Everything read out of the derivative programs (mu, re-optimised values) is
// valid for any primal-feasible iterate; optimality only sharpens it. The
// near-degenerate optimal faces this module exists to handle routinely stall
// interior-point progress in the last few digits, so accept a stalled run
// whose final residuals already meet the working tolerance.
bool usable(const conic::SolverReport& r, double tol) {
  if (solved(r)) return true;
  return r.status == conic::Status::Unknown && r.r_prim <= 100 * tol && r.r_dual <= 100 * tol;
}

// Multiplier regularisation. Restricting xi >= 0 loses nothing: each stored
// target is certifiable over its set, so adding a further nonnegative
// multiple of it keeps any row certifiable, and a feasible point with some
// xi_i < 0 stays feasible after raising that xi_i to 0. Without the
// restriction and the small objective penalty below, numerical noise in the
// stored targets (which should vanish at the saturating points but carries
// the solver tolerance) spawns unbounded rays xi -> +-inf and the program
// reports infeasible. The penalty biases mu upward by at most
// kXiPenalty * sum(xi), which keeps it a valid derivative bound.
constexpr double kXiPenalty = 1e-6;

int add_multiplier(conic::ConicProblem& prog) {
  int v = prog.add_free();
  conic::ConicProblem::Row row;
  row.kind = conic::ConicProblem::RowKind::Ge;
  row.lin.push_back({v, 1.0});
  row.label = "xi_nonneg";
  prog.rows.push_back(std::move(row));
  prog.set_objective(v, kXiPenalty);
  return v;
}

// One value-function re-optimisation at fixed multipliers xi: minimise mu
// subject to the perturbed constraints and to V staying feasible for the
// unperturbed problem at the certified bound. Updates cur in place.
bool reoptimize_values(const PolicyModel& pm, const seqopt::SequentialModel& model,
                       const DirectionData& dir, const std::vector<double>& xi,
                       const conic::SolveOptions& solver, seqopt::ValueCertificate& cur) {
  const int N = static_cast<int>(model.steps.size());
  conic::ConicProblem prog;
  const int mu_var = prog.add_free();
  std::vector<VarPoly> V, Vhat;
  for (int k = 0; k < N; ++k) {
    auto basis = value_basis(pm, model, k);
    V.push_back(VarPoly::parametric(prog, basis));
    Vhat.push_back(VarPoly::parametric(prog, basis));
  }
  auto orig = original_exprs(model, cur.composition, V, cur.upper_bound);
  auto ahat = perturbation_exprs(model, cur.composition, V, Vhat, dir);
  for (std::size_t i = 0; i < orig.size(); ++i) {
    const auto& S = cur.constraints[i].set;
    VarPoly expr = ahat[i] + xi.at(i) * orig[i];
    if (i == 0) expr += VarPoly::decision(mu_var);
    sos::compile(expr, S, template_for(pm, i, S), prog, "pd_" + cur.constraints[i].label);
    sos::compile(orig[i], S, template_for(pm, i, S), prog, "keep_" + cur.constraints[i].label);
  }
  prog.set_objective(mu_var, 1.0);
  auto sol = conic::solve_sdp(prog, solver);
  if (!usable(sol.report, solver.tol)) return false;

  std::vector<Polynomial> values;
  for (int k = 0; k < N; ++k) values.push_back(V[static_cast<std::size_t>(k)].evaluate_decision(sol.free));
  auto targets = seqopt::build_targets(model, values, cur.upper_bound, cur.composition);
  {
    std::fprintf(stderr, "DEBUG reopt: status=%s mu=%.6f nu=%.6f\n",
                 sol.report.detail.c_str(), sol.free.at(0), cur.upper_bound);
    std::vector<double> p8(static_cast<std::size_t>(model.num_vars), 0.0);
    std::vector<double> p32 = p8;
    p8[0] = 0.8; p32[0] = 0.32;
    for (int k = 0; k < N; ++k)
      std::fprintf(stderr, "  V%d(0.8)=%.8f V%d(0.32)=%.8f\n", k,
                   values[static_cast<std::size_t>(k)].evaluate(p8), k,
                   values[static_cast<std::size_t>(k)].evaluate(p32));
    for (std::size_t i = 0; i < targets.size(); ++i)
      std::fprintf(stderr, "  t%zu(0.8)=%.3e t%zu(0.32)=%.3e\n", i,
                   targets[i].target.evaluate(p8), i, targets[i].target.evaluate(p32));
  }
  cur.values = std::move(values);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    cur.constraints[i].target = std::move(targets[i].target);
    cur.constraints[i].cert = {};
  }
  cur.report = sol.report;
  return true;
}

}  // namespace

seqopt::SequentialModel slice(const PolicyModel& pm, const std::vector<double>& x) {
  check_constraints_policy_free(pm);
  auto bind = policy_bind(pm, x);
  seqopt::SequentialModel m = pm.family;
  for (auto& st : m.steps) {
    for (auto& [v, f] : st.next) f = f.substitute(bind);
    st.reward = st.reward.substitute(bind);
  }
  return m;
}

seqopt::ValueCertificate solve_slice(const PolicyModel& pm, const std::vector<double>& x) {
  return seqopt::upper_bound(slice(pm, x), pm.options);
}

CoordinateDerivative directional_derivative(const PolicyModel& pm, const std::vector<double>& x,
                                            int coordinate, const seqopt::ValueCertificate& cert,
                                            bool negate_direction) {
  if (coordinate < 0 || coordinate >= static_cast<int>(pm.policy_vars.size()))
    throw std::invalid_argument("policy coordinate out of range");
  const auto model = slice(pm, x);
  const int N = static_cast<int>(model.steps.size());
  if (static_cast<int>(cert.values.size()) != N ||
      cert.constraints.size() != static_cast<std::size_t>(N) + 1)
    throw std::invalid_argument("certificate does not match the policy model");
  auto dir = direction(pm, x, coordinate, negate_direction ? -1.0 : 1.0);

  conic::ConicProblem prog;
  const int mu_var = prog.add_free();
  std::vector<int> xi_var;
  for (int i = 0; i <= N; ++i) xi_var.push_back(add_multiplier(prog));
  std::vector<VarPoly> V, Vhat;
  for (int k = 0; k < N; ++k) {
    V.push_back(VarPoly(cert.values[static_cast<std::size_t>(k)]));
    Vhat.push_back(VarPoly::parametric(prog, value_basis(pm, model, k)));
  }
  auto ahat = perturbation_exprs(model, cert.composition, V, Vhat, dir);
  for (std::size_t i = 0; i < ahat.size(); ++i) {
    VarPoly expr = ahat[i] + VarPoly::decision(xi_var[i], cert.constraints[i].target);
    if (i == 0) expr += VarPoly::decision(mu_var);
    const auto& S = cert.constraints[i].set;
    sos::compile(expr, S, template_for(pm, i, S), prog, "dd_" + cert.constraints[i].label);
  }
  prog.set_objective(mu_var, 1.0);
  auto sol = conic::solve_sdp(prog, pm.options.solver);

  CoordinateDerivative out;
  out.report = sol.report;
  out.ok = usable(sol.report, pm.options.solver.tol);
  if (out.ok) {
    out.mu = sol.free.at(static_cast<std::size_t>(mu_var));
    for (int i = 0; i <= N; ++i)
      out.xi.push_back(sol.free.at(static_cast<std::size_t>(xi_var[static_cast<std::size_t>(i)])));
  }
  return out;
}

CoordinateDerivative directional_derivative_pinned(const PolicyModel& pm,
                                                   const std::vector<double>& x, int coordinate,
                                                   const seqopt::ValueCertificate& cert,
                                                   const std::vector<Functional>& q,
                                                   const PinnedOptions& opt) {
  const auto model = slice(pm, x);
  const int N = static_cast<int>(model.steps.size());
  if (static_cast<int>(cert.values.size()) != N ||
      cert.constraints.size() != static_cast<std::size_t>(N) + 1)
    throw std::invalid_argument("certificate does not match the policy model");
  if (q.size() != cert.constraints.size())
    throw std::invalid_argument("one functional per certificate constraint required");
  auto dir = direction(pm, x, coordinate, 1.0);

  auto avg = [](const Functional& f, const Polynomial& p) {
    double s = 0;
    for (const auto& [mon, c] : p.terms()) {
      auto it = f.find(mon);
      if (it != f.end()) s += c * it->second;
    }
    return s;
  };
  auto fail = [](const std::string& what) -> void {
    throw std::runtime_error("pinned derivative: " + what);
  };

  for (std::size_t i = 0; i < q.size(); ++i) {
    auto unit = q[i].find(Monomial{});
    if (unit == q[i].end() || std::abs(unit->second - 1.0) > opt.annihilation_tol)
      fail("functional " + std::to_string(i) + " is not normalised");
    if (std::abs(avg(q[i], cert.constraints[i].target)) > opt.annihilation_tol)
      fail("functional " + std::to_string(i) + " does not annihilate its constraint");
  }

  // the chained value only equals <Vhat_0(s_1, .)> when consecutive
  // functionals agree through the dynamics on every value-basis monomial
  auto init = initial_bind(model);
  std::map<VarId, Polynomial> rename;
  if (cert.composition == seqopt::Composition::Explicit) rename = next_rename(model);
  for (const Monomial& mon : value_basis(pm, model, 0)) {
    double lhs = avg(q[0], Polynomial(mon).substitute(init));
    double rhs = avg(q[1], Polynomial(mon));
    if (std::abs(lhs - rhs) > opt.annihilation_tol) fail("initial marginal mismatch");
  }
  for (int k = 0; k + 1 < N; ++k) {
    for (const Monomial& mon : value_basis(pm, model, k + 1)) {
      Polynomial composed =
          cert.composition == seqopt::Composition::Substitute
              ? Polynomial(mon).substitute(model.steps[static_cast<std::size_t>(k)].next)
              : Polynomial(mon).substitute(rename);
      double lhs = avg(q[static_cast<std::size_t>(k) + 1], composed);
      double rhs = avg(q[static_cast<std::size_t>(k) + 2], Polynomial(mon));
      if (std::abs(lhs - rhs) > opt.annihilation_tol)
        fail("marginal mismatch between steps " + std::to_string(k) + " and " +
             std::to_string(k + 1));
    }
  }

  if (opt.verify_singleton) {
    // bound each variable's moment range within {q in Q : <target> = 0}; a
    // spread certifies the saturating set is not a point and the chained
    // value would be unreliable
    for (std::size_t i = 0; i < cert.constraints.size(); ++i) {
      const auto& S = cert.constraints[i].set;
      if (S.vars.empty()) continue;
      const Polynomial& a = cert.constraints[i].target;
      int level = opt.level;
      if (level <= 0) {
        int dmax = std::max(2, a.degree());
        for (const auto& g : S.ineqs) dmax = std::max(dmax, g.degree());
        for (const auto& h : S.eqs) dmax = std::max(dmax, h.degree());
        level = (dmax + 1) / 2;
      }
      for (std::size_t vpos = 0; vpos < S.vars.size(); ++vpos) {
        double ends[2] = {0, 0};
        for (int s = 0; s < 2; ++s) {
          // an exact pin <target> = 0 selects a boundary face with no
          // interior, which interior-point solvers reject; maximising
          // <z> - W max(0, <target>) keeps an interior and overestimates
          // the spread by at most ~1/W times the target's curvature
          Polynomial z = Polynomial::variable(S.vars[vpos]) * (s == 0 ? 1.0 : -1.0);
          auto rel = moment::build_relaxation(z, S, level);
          conic::ConicProblem prog = rel.prog;
          int slack = prog.add_free();
          conic::ConicProblem::Row dominates;
          dominates.kind = conic::ConicProblem::RowKind::Ge;
          dominates.label = "pin_slack";
          dominates.lin.push_back({slack, 1.0});
          for (const auto& [mon, c] : a.terms())
            dominates.lin.push_back({rel.moment_vars.at(static_cast<std::size_t>(rel.index.at(mon))), -c});
          prog.rows.push_back(std::move(dominates));
          conic::ConicProblem::Row nonneg;
          nonneg.kind = conic::ConicProblem::RowKind::Ge;
          nonneg.label = "pin_slack_nonneg";
          nonneg.lin.push_back({slack, 1.0});
          prog.rows.push_back(std::move(nonneg));
          prog.set_objective(slack, opt.probe_penalty);
          auto sol = conic::solve_sdp(prog, opt.solver);
          if (!solved(sol.report))
            fail("singleton probe did not solve on constraint " + std::to_string(i));
          ends[s] = -sol.report.objective;  // max of <z> - W max(0, <target>)
        }
        double hi = ends[0], lo = -ends[1];
        if (hi - lo > opt.range_tol)
          fail("saturating set of constraint " + std::to_string(i) +
               " is not a verified singleton");
        double actual = avg(q[i], Polynomial::variable(S.vars[vpos]));
        if (actual < lo - opt.range_tol || actual > hi + opt.range_tol)
          fail("functional " + std::to_string(i) + " sits outside its saturating set");
      }
    }
  }

  CoordinateDerivative out;
  for (int k = 0; k < N; ++k) {
    Polynomial term = dir.dr[static_cast<std::size_t>(k)];
    if (k + 1 < N) {
      for (const auto& [svar, df] : dir.dnext[static_cast<std::size_t>(k)]) {
        Polynomial dv = cert.values[static_cast<std::size_t>(k) + 1].differentiate(svar);
        if (dv.is_zero()) continue;
        dv = cert.composition == seqopt::Composition::Substitute
                 ? dv.substitute(model.steps[static_cast<std::size_t>(k)].next)
                 : dv.substitute(rename);
        term += dv * df;
      }
    }
    out.mu += avg(q[static_cast<std::size_t>(k) + 1], term);
  }
  out.ok = true;

  if (opt.cross_check) {
    auto full = directional_derivative(pm, x, coordinate, cert);
    if (!full.ok) fail("cross-check program did not solve");
    if (std::abs(full.mu - out.mu) > opt.cross_check_tol * std::max(1.0, std::abs(out.mu)))
      fail("cross-check disagrees: chained " + std::to_string(out.mu) + " vs program " +
           std::to_string(full.mu));
  }
  return out;
}

DescentDiagnostic coordinate_descent_nonunique(const PolicyModel& pm, const std::vector<double>& x,
                                               int coordinate,
                                               const seqopt::ValueCertificate& seed,
                                               const DescentOptions& opt) {
  PolicyModel pmd = pm;
  pmd.options.solver = opt.solver;
  const auto model = slice(pm, x);
  auto dir = direction(pm, x, coordinate, 1.0);
  seqopt::ValueCertificate cur = seed;

  DescentDiagnostic out;
  for (int j = 0; j < opt.max_outer; ++j) {
    auto d = directional_derivative(pmd, x, coordinate, cur);
    if (!d.ok) break;
    out.mu_sequence.push_back(d.mu);
    out.iterations = j + 1;
    if (j > 0) {
      double prev = out.mu_sequence[static_cast<std::size_t>(j) - 1];
      if (std::abs(prev - d.mu) <= opt.rel_tol * std::max(1.0, std::abs(prev))) break;
    }
    if (j + 1 >= opt.max_outer) break;
    if (!reoptimize_values(pmd, model, dir, d.xi, opt.solver, cur)) break;
  }
  if (out.mu_sequence.empty()) return out;
  out.mu = *std::min_element(out.mu_sequence.begin(), out.mu_sequence.end());
  auto dm = directional_derivative(pmd, x, coordinate, cur, true);
  if (dm.ok) {
    out.d_minus = -dm.mu;
    out.gap = std::abs(out.mu - out.d_minus);
    out.ok = true;
  }
  return out;
}

OptimizeResult optimize_policy(const ObjectiveFn& objective, const Projector& project,
                               std::vector<double> x0, const OptimizeOptions& opt) {
  const std::size_t n = x0.size();
  std::vector<double> x = project ? project(x0) : std::move(x0);
  std::vector<double> am(n, 0.0), av(n, 0.0);
  int start = 0;
  OptimizeResult res;
  res.x = x;

  if (opt.resume && !opt.trajectory_path.empty()) {
    std::ifstream in(opt.trajectory_path);
    std::string line;
    nlohmann::json last;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto parsed = nlohmann::json::parse(line, nullptr, false);
      if (!parsed.is_discarded()) last = std::move(parsed);
    }
    if (!last.is_null()) {
      start = last.at("iteration").get<int>() + 1;
      x = last.contains("next_x") ? last.at("next_x").get<std::vector<double>>()
                                  : last.at("x").get<std::vector<double>>();
      if (x.size() != n) throw std::runtime_error("trajectory record does not match x0 length");
      if (last.contains("adam_m")) am = last.at("adam_m").get<std::vector<double>>();
      if (last.contains("adam_v")) av = last.at("adam_v").get<std::vector<double>>();
      res.x = x;
      res.value = last.at("value").get<double>();
    }
  }

  std::ofstream sink;
  if (!opt.trajectory_path.empty())
    sink.open(opt.trajectory_path, start > 0 ? std::ios::app : std::ios::trunc);

  for (int j = start; j <= opt.steps; ++j) {
    GradientEval ev = objective(x);
    IterationRecord rec;
    rec.iteration = j;
    rec.x = x;
    rec.value = ev.value;
    rec.frozen = ev.failed;
    res.trajectory.push_back(rec);
    res.x = x;
    res.value = ev.value;

    // the update also runs on the final iteration so that a persisted record
    // always carries the state a resumed run needs to continue seamlessly
    if (ev.gradient.size() != n)
      throw std::runtime_error("objective returned a gradient of the wrong length");
    if (opt.method == OptimizeOptions::Method::Adam) {
      const double t = j + 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        am[i] = opt.beta1 * am[i] + (1 - opt.beta1) * ev.gradient[i];
        av[i] = opt.beta2 * av[i] + (1 - opt.beta2) * ev.gradient[i] * ev.gradient[i];
        double mh = am[i] / (1 - std::pow(opt.beta1, t));
        double vh = av[i] / (1 - std::pow(opt.beta2, t));
        x[i] -= opt.lr * mh / (std::sqrt(vh) + opt.eps);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) x[i] -= opt.lr * ev.gradient[i];
    }
    if (project) x = project(x);

    if (sink.is_open()) {
      nlohmann::json line{{"iteration", j},       {"x", rec.x},     {"value", rec.value},
                          {"frozen", rec.frozen}, {"next_x", x},    {"adam_m", am},
                          {"adam_v", av}};
      sink << line.dump() << '\n' << std::flush;
    }
  }
  return res;
}

OptimizeResult optimize_policy(const PolicyModel& pm, std::vector<double> x0,
                               const OptimizeOptions& opt) {
  ObjectiveFn obj = [&pm, &opt](const std::vector<double>& x) {
    auto cert = solve_slice(pm, x);
    if (!solved(cert.report))
      throw std::runtime_error(std::string("policy slice solve failed: ") +
                               conic::status_name(cert.report.status));
    GradientEval ev;
    ev.value = cert.upper_bound;
    const int n = static_cast<int>(x.size());
    ev.gradient.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<char> bad(static_cast<std::size_t>(n), 0);

    auto work = [&](int i) {
      try {
        auto d = directional_derivative(pm, x, i, cert);
        if (!d.ok) {
          bad[static_cast<std::size_t>(i)] = 1;
          return;
        }
        double g = d.mu;
        if (opt.diagnose_threshold > 0) {
          auto dm = directional_derivative(pm, x, i, cert, true);
          double gap = dm.ok ? std::abs(d.mu + dm.mu) : 2 * opt.diagnose_threshold;
          if (gap > opt.diagnose_threshold) {
            DescentOptions dopt;
            dopt.solver = pm.options.solver;
            auto cd = coordinate_descent_nonunique(pm, x, i, cert, dopt);
            if (cd.ok) g = cd.mu;
          }
        }
        ev.gradient[static_cast<std::size_t>(i)] = g;
      } catch (const std::exception&) {
        bad[static_cast<std::size_t>(i)] = 1;
      }
    };

    int threads = opt.threads > 0 ? opt.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (opt.parallel && threads > 1) {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
          for (int i; (i = next++) < n;) work(i);
        });
      for (auto& th : pool) th.join();
    } else {
      for (int i = 0; i < n; ++i) work(i);
    }

    for (int i = 0; i < n; ++i)
      if (bad[static_cast<std::size_t>(i)]) ev.failed.push_back(i);
    return ev;
  };
  return optimize_policy(obj, pm.project, std::move(x0), opt);
}

std::vector<std::vector<Eigen::MatrixXcd>> povm_project(
    const std::vector<std::vector<Eigen::MatrixXcd>>& raw, const conic::SolveOptions& solver) {
  std::vector<std::vector<Eigen::MatrixXcd>> out;
  out.reserve(raw.size());
  for (const auto& fam : raw) {
    const int K = static_cast<int>(fam.size());
    if (K == 0) throw std::invalid_argument("povm projection: empty family");
    std::vector<double> z0(4 * static_cast<std::size_t>(K));
    for (int e = 0; e < K; ++e) {
      if (fam[static_cast<std::size_t>(e)].rows() != 2 || fam[static_cast<std::size_t>(e)].cols() != 2)
        throw std::invalid_argument("povm projection expects qubit elements");
      Eigen::Matrix2cd M =
          0.5 * (fam[static_cast<std::size_t>(e)] + fam[static_cast<std::size_t>(e)].adjoint());
      double a;
      Eigen::Vector3d v;
      quantum::bloch_coords(M, a, v);
      z0[4 * static_cast<std::size_t>(e)] = a;
      for (int j = 0; j < 3; ++j) z0[4 * static_cast<std::size_t>(e) + 1 + static_cast<std::size_t>(j)] = v[j];
    }

    // Frobenius distance is (1/2)(da^2 + |dv|^2) per element in these
    // coordinates, so the nearest family is a QP over one second-order cone
    // (a, v) per element plus the completeness equalities.
    conic::ConeProgram cp;
    cp.nvars = 4 * K;
    for (int i = 0; i < 4 * K; ++i) {
      cp.P.push_back({i, i, 1.0});
      cp.q.push_back(-z0[static_cast<std::size_t>(i)]);
    }
    for (int r = 0; r < 4; ++r) {
      for (int e = 0; e < K; ++e) cp.A.push_back({r, 4 * e + r, 1.0});
      cp.b.push_back(r == 0 ? 2.0 : 0.0);
    }
    cp.cones.push_back({conic::ConeKind::Zero, 4});
    for (int e = 0; e < K; ++e) {
      for (int r = 0; r < 4; ++r) {
        cp.A.push_back({4 + 4 * e + r, 4 * e + r, -1.0});
        cp.b.push_back(0.0);
      }
      cp.cones.push_back({conic::ConeKind::Soc, 4});
    }
    cp.nrows = 4 + 4 * K;

    auto sol = conic::solve_cone_program(cp, solver);
    if (!solved(sol.report))
      throw std::runtime_error(std::string("povm projection failed: ") +
                               conic::status_name(sol.report.status));

    std::vector<Eigen::MatrixXcd> proj(static_cast<std::size_t>(K));
    Eigen::Matrix2cd sum = Eigen::Matrix2cd::Zero();
    for (int e = 0; e < K; ++e) {
      Eigen::Vector3d v(sol.x[4 * static_cast<std::size_t>(e) + 1],
                        sol.x[4 * static_cast<std::size_t>(e) + 2],
                        sol.x[4 * static_cast<std::size_t>(e) + 3]);
      Eigen::Matrix2cd M = quantum::bloch_operator(sol.x[4 * static_cast<std::size_t>(e)], v);
      sum += M;
      proj[static_cast<std::size_t>(e)] = M;
    }
    Eigen::Matrix2cd fix = (Eigen::Matrix2cd::Identity() - sum) / static_cast<double>(K);
    for (auto& M : proj) M += fix;  // resolve completeness exactly
    out.push_back(std::move(proj));
  }

  for (const auto& fam : out) {
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(2, 2);
    for (const auto& M : fam) {
      if ((M - M.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
        throw std::runtime_error("povm projection produced a non-Hermitian element");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
      if (es.eigenvalues().minCoeff() < -1e-9)
        throw std::runtime_error("povm projection produced an indefinite element");
      sum += M;
    }
    if ((sum - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff() > 1e-9)
      throw std::runtime_error("povm projection does not sum to the identity");
  }
  return out;
}

}  // namespace seqbound::policy
