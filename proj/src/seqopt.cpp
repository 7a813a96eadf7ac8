#include "seqbound/seqopt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace seqbound::seqopt {

namespace {

using sos::VarPoly;

std::vector<Monomial> default_value_basis(const SequentialModel& m, int degree) {
  std::vector<VarId> vars = m.state_vars;
  vars.insert(vars.end(), m.lambda_vars.begin(), m.lambda_vars.end());
  std::sort(vars.begin(), vars.end());
  return poly::monomials_up_to(vars, degree);
}

struct Built {
  std::string label;
  sets::SemialgebraicSet set;
  VarPoly expr;
};

std::vector<Built> build_constraints(const SequentialModel& m, const std::vector<VarPoly>& V,
                                     const VarPoly& nu, Composition comp) {
  const int N = static_cast<int>(m.steps.size());
  std::vector<Built> out;

  std::map<VarId, Polynomial> init;
  for (std::size_t i = 0; i < m.state_vars.size(); ++i)
    init[m.state_vars[i]] = Polynomial(m.initial_state.at(i));
  out.push_back({"init", m.lambda_set, nu - V[0].substitute(init)});

  for (int k = 0; k < N; ++k) {
    const Step& st = m.steps[k];
    Built b;
    b.label = "step" + std::to_string(k);
    VarPoly expr = V[k] - VarPoly(st.reward);
    if (k + 1 < N) {
      if (comp == Composition::Substitute) {
        expr -= V[k + 1].substitute(st.next);
        b.set = st.domain;
      } else {
        b.set = st.domain.product(st.next_domain);
        std::map<VarId, Polynomial> rename;
        for (std::size_t j = 0; j < m.state_vars.size(); ++j) {
          rename[m.state_vars[j]] = Polynomial::variable(m.next_vars.at(j));
          auto it = st.next.find(m.state_vars[j]);
          Polynomial f = it != st.next.end() ? it->second : Polynomial::variable(m.state_vars[j]);
          b.set.add_eq(Polynomial::variable(m.next_vars.at(j)) - f);
        }
        expr -= V[k + 1].substitute(rename);
      }
    } else {
      b.set = st.domain;
    }
    b.expr = std::move(expr);
    out.push_back(std::move(b));
  }
  return out;
}

void validate(const SequentialModel& m) {
  if (m.steps.empty()) throw std::invalid_argument("sequential model has no steps");
  if (m.initial_state.size() != m.state_vars.size())
    throw std::invalid_argument("initial state size does not match state variables");
  VarId top = -1;
  for (VarId v : m.state_vars) top = std::max(top, v);
  for (VarId v : m.lambda_vars) top = std::max(top, v);
  for (const auto& st : m.steps)
    for (VarId v : st.h_vars) top = std::max(top, v);
  if (m.num_vars <= top) throw std::invalid_argument("num_vars smaller than a model variable id");
}

}  // namespace

ValueCertificate upper_bound(const SequentialModel& m, const UpperBoundOptions& opt) {
  validate(m);
  const int N = static_cast<int>(m.steps.size());
  conic::ConicProblem prog;
  int nu_var = prog.add_free();

  std::vector<VarPoly> V;
  for (int k = 0; k < N; ++k) {
    auto basis = opt.value_basis ? opt.value_basis(k) : default_value_basis(m, opt.value_degree);
    V.push_back(VarPoly::parametric(prog, basis));
  }

  auto built = build_constraints(m, V, VarPoly::decision(nu_var), opt.composition);
  std::vector<sos::Compiled> compiled;
  for (std::size_t i = 0; i < built.size(); ++i) {
    sos::CertificateTemplate tmpl;
    if (i == 0) {
      tmpl = opt.initial_template ? opt.initial_template(built[i].set)
                                  : sos::schmuedgen_template(built[i].set, opt.degree, opt.depth);
    } else {
      tmpl = opt.step_template
                 ? opt.step_template(static_cast<int>(i) - 1, built[i].set)
                 : sos::schmuedgen_template(built[i].set, opt.degree, opt.depth);
    }
    compiled.push_back(sos::compile(built[i].expr, built[i].set, tmpl, prog, built[i].label));
  }

  prog.set_objective(nu_var, 1.0);
  auto sol = conic::solve_sdp(prog, opt.solver);

  ValueCertificate vc;
  vc.upper_bound = sol.free.at(nu_var);
  vc.composition = opt.composition;
  vc.report = sol.report;
  for (int k = 0; k < N; ++k) vc.values.push_back(V[k].evaluate_decision(sol.free));
  for (std::size_t i = 0; i < built.size(); ++i) {
    ValueCertificate::Constraint c;
    c.label = built[i].label;
    c.set = built[i].set;
    c.target = built[i].expr.evaluate_decision(sol.free);
    c.cert = sos::extract(compiled[i], sol);
    vc.constraints.push_back(std::move(c));
  }
  return vc;
}

std::vector<ValueCertificate::Constraint> build_targets(const SequentialModel& m,
                                                        const std::vector<Polynomial>& values,
                                                        double nu, Composition comp) {
  validate(m);
  std::vector<VarPoly> V;
  for (const auto& p : values) V.push_back(VarPoly(p));
  auto built = build_constraints(m, V, VarPoly(Polynomial(nu)), comp);
  std::vector<ValueCertificate::Constraint> out;
  for (auto& b : built) {
    ValueCertificate::Constraint c;
    c.label = std::move(b.label);
    c.set = std::move(b.set);
    c.target = std::move(b.expr.base);
    out.push_back(std::move(c));
  }
  return out;
}

AuditReport audit_certificate(const SequentialModel& m, const ValueCertificate& vc,
                              const AuditOptions& opt) {
  validate(m);
  if (vc.constraints.size() != m.steps.size() + 1)
    throw std::invalid_argument("certificate does not match the model's step count");

  std::vector<VarPoly> V;
  for (const auto& p : vc.values) V.push_back(VarPoly(p));
  VarPoly nu{Polynomial(vc.upper_bound)};

  AuditReport rep;
  rep.raw = vc.upper_bound;
  if (opt.method == AuditOptions::Method::Certificate) {
    auto built = build_constraints(m, V, nu, vc.composition);
    for (std::size_t i = 0; i < built.size(); ++i) {
      auto r = sos::verify(vc.constraints[i].cert, built[i].expr.base, vc.constraints[i].set);
      rep.deltas.push_back(r.delta);
    }
  } else {
    // ignore the certificates: bound each inequality's violation from the
    // value functions alone via the moment route
    auto built = build_constraints(m, V, nu, Composition::Substitute);
    for (const auto& b : built) {
      const Polynomial& target = b.expr.base;
      if (b.set.vars.empty()) {
        // variable-free constraint (e.g. no shared parameters): the target is
        // a constant and its violation is immediate
        rep.deltas.push_back(std::max(0.0, -target.coefficient(Monomial{})));
        continue;
      }
      int level = std::max(opt.moment_level, (target.degree() + 1) / 2);
      auto vb = moment::max_violation(Polynomial(0.0) - target, b.set, level, opt.solver);
      rep.deltas.push_back(std::max(0.0, vb.rigorous));
    }
  }
  rep.rigorous = vc.upper_bound;
  for (double d : rep.deltas) {
    rep.rigorous += d;
    rep.max_delta = std::max(rep.max_delta, d);
  }
  return rep;
}

ValueCertificate simplify_values(const SequentialModel& m, const ValueCertificate& vc,
                                 const SimplifyOptions& opt) {
  validate(m);
  ValueCertificate best = vc;
  const double base = vc.upper_bound;
  std::vector<double> thresholds = opt.thresholds;
  std::sort(thresholds.begin(), thresholds.end());
  for (double t : thresholds) {
    if (t <= 0) continue;
    std::vector<std::vector<Monomial>> supports;
    bool changed = false;
    for (const auto& v : best.values) {
      std::vector<Monomial> sup;
      for (const auto& [mon, c] : v.terms())
        if (std::abs(c) >= t) sup.push_back(mon);
      if (sup.empty()) sup.push_back(Monomial{});  // keep the restricted problem well posed
      changed = changed || sup.size() != v.term_count();
      supports.push_back(std::move(sup));
    }
    if (!changed) continue;

    UpperBoundOptions ub = opt.solve;
    ub.composition = best.composition;
    ub.value_basis = [&supports](int k) { return supports.at(k); };
    ValueCertificate trial;
    try {
      trial = upper_bound(m, ub);
    } catch (const std::exception&) {
      break;  // restricted program unusable: keep the last good certificate
    }
    bool solved = trial.report.status == conic::Status::Optimal ||
                  trial.report.status == conic::Status::NearOptimal;
    if (!solved || !(trial.upper_bound <= base + opt.keep_tol)) break;
    best = std::move(trial);
  }
  return best;
}

double simulate(const SequentialModel& m, const std::vector<double>& lambda,
                const std::vector<std::vector<double>>& h) {
  validate(m);
  std::vector<double> buf(m.num_vars, 0.0);
  for (std::size_t i = 0; i < m.lambda_vars.size(); ++i) buf[m.lambda_vars[i]] = lambda.at(i);
  for (std::size_t i = 0; i < m.state_vars.size(); ++i) buf[m.state_vars[i]] = m.initial_state[i];
  double total = 0;
  std::vector<double> nx(m.state_vars.size());
  for (std::size_t k = 0; k < m.steps.size(); ++k) {
    const Step& st = m.steps[k];
    if (!st.h_vars.empty()) {
      const auto& hk = h.at(k);
      for (std::size_t i = 0; i < st.h_vars.size(); ++i) buf[st.h_vars[i]] = hk.at(i);
    }
    total += st.reward.evaluate(buf);
    for (std::size_t j = 0; j < m.state_vars.size(); ++j) {
      auto it = st.next.find(m.state_vars[j]);
      nx[j] = it != st.next.end() ? it->second.evaluate(buf) : buf[m.state_vars[j]];
    }
    for (std::size_t j = 0; j < m.state_vars.size(); ++j) buf[m.state_vars[j]] = nx[j];
  }
  return total;
}

namespace {

// grid over [lo, hi] including both endpoints
double grid_value(double lo, double hi, int grid, int i) {
  if (grid <= 1) return lo;
  return lo + (hi - lo) * static_cast<double>(i) / (grid - 1);
}

struct Plan {
  // constraints to evaluate after binding enumeration position p; position -1
  // entries (no free variable) are checked before the enumeration starts
  std::vector<std::vector<const Polynomial*>> ineq_after, eq_after;
  std::vector<const Polynomial*> ineq_pre, eq_pre;
};

Plan make_plan(const sets::SemialgebraicSet& S, const std::vector<VarId>& order,
               const std::vector<char>& known) {
  Plan plan;
  plan.ineq_after.resize(order.size());
  plan.eq_after.resize(order.size());
  auto place = [&](const Polynomial& c, bool eq) {
    int maxpos = -1;
    for (VarId v : c.variables()) {
      if (v < static_cast<VarId>(known.size()) && known[v]) continue;
      auto it = std::find(order.begin(), order.end(), v);
      if (it == order.end())
        throw std::invalid_argument("brute force: constraint uses a variable bound later");
      maxpos = std::max(maxpos, static_cast<int>(it - order.begin()));
    }
    if (maxpos < 0) {
      (eq ? plan.eq_pre : plan.ineq_pre).push_back(&c);
    } else {
      (eq ? plan.eq_after : plan.ineq_after)[maxpos].push_back(&c);
    }
  };
  for (const auto& g : S.ineqs) place(g, false);
  for (const auto& h : S.eqs) place(h, true);
  return plan;
}

bool pre_ok(const Plan& plan, const std::vector<double>& buf, double tol) {
  for (const auto* g : plan.ineq_pre)
    if (g->evaluate(buf) < -tol) return false;
  for (const auto* h : plan.eq_pre)
    if (std::abs(h->evaluate(buf)) > tol) return false;
  return true;
}

bool pos_ok(const Plan& plan, int pos, const std::vector<double>& buf, double tol) {
  for (const auto* g : plan.ineq_after[pos])
    if (g->evaluate(buf) < -tol) return false;
  for (const auto* h : plan.eq_after[pos])
    if (std::abs(h->evaluate(buf)) > tol) return false;
  return true;
}

std::pair<double, double> var_bound(const sets::SemialgebraicSet& S, VarId v) {
  auto it = std::lower_bound(S.vars.begin(), S.vars.end(), v);
  if (it == S.vars.end() || *it != v) return {-1.0, 1.0};
  return S.bounds[it - S.vars.begin()];
}

struct Enumerator {
  const SequentialModel& m;
  const BruteForceOptions& opt;
  std::vector<Plan> step_plans;
  Plan lambda_plan;
  std::atomic<long long> evals{0};
  std::atomic<bool> truncated{false};

  // best strategy recording, only used on the serial replay pass
  struct Record {
    double best = -1e300;
    bool found = false;
    std::vector<std::vector<double>> h;
    std::vector<std::vector<double>> h_cur;
  };

  explicit Enumerator(const SequentialModel& model, const BruteForceOptions& o) : m(model), opt(o) {
    std::vector<char> known(m.num_vars, 0);
    lambda_plan = make_plan(m.lambda_set, m.lambda_vars, known);
    for (VarId v : m.lambda_vars) known[v] = 1;
    for (VarId v : m.state_vars) known[v] = 1;
    for (const auto& st : m.steps) {
      step_plans.push_back(make_plan(st.domain, st.h_vars, known));
      for (VarId v : st.h_vars) known[v] = 1;  // earlier controls stay bound
    }
  }

  bool spent() {
    if (evals.fetch_add(1) + 1 > opt.max_evals) {
      truncated = true;
      return true;
    }
    return false;
  }

  // free controls: depth first over steps with per-position pruning
  void steps_rec(std::size_t k, double accum, std::vector<double>& buf, double& best,
                 Record* rec) {
    if (truncated) return;
    if (k == m.steps.size()) {
      if (spent()) return;
      if (accum > best) {
        best = accum;
        if (rec) {
          rec->best = accum;
          rec->found = true;
          rec->h = rec->h_cur;
        }
      }
      return;
    }
    const Step& st = m.steps[k];
    const Plan& plan = step_plans[k];
    if (!pre_ok(plan, buf, opt.feas_tol)) return;

    std::vector<double> saved;
    for (VarId v : m.state_vars) saved.push_back(buf[v]);
    auto advance = [&]() {
      double reward = st.reward.evaluate(buf);
      std::vector<double> nx(m.state_vars.size());
      for (std::size_t j = 0; j < m.state_vars.size(); ++j) {
        auto it = st.next.find(m.state_vars[j]);
        nx[j] = it != st.next.end() ? it->second.evaluate(buf) : buf[m.state_vars[j]];
      }
      for (std::size_t j = 0; j < m.state_vars.size(); ++j) buf[m.state_vars[j]] = nx[j];
      steps_rec(k + 1, accum + reward, buf, best, rec);
      for (std::size_t j = 0; j < m.state_vars.size(); ++j) buf[m.state_vars[j]] = saved[j];
    };

    if (st.h_vars.empty()) {
      advance();
      return;
    }
    std::function<void(std::size_t)> hrec = [&](std::size_t pos) {
      if (truncated) return;
      if (pos == st.h_vars.size()) {
        advance();
        return;
      }
      auto [lo, hi] = var_bound(st.domain, st.h_vars[pos]);
      const int grid = opt.grid_for(st.h_vars[pos]);
      for (int i = 0; i < grid; ++i) {
        buf[st.h_vars[pos]] = grid_value(lo, hi, grid, i);
        if (rec) rec->h_cur[k][pos] = buf[st.h_vars[pos]];
        if (!pos_ok(plan, static_cast<int>(pos), buf, opt.feas_tol)) continue;
        hrec(pos + 1);
      }
    };
    hrec(0);
  }

  // tied controls: one point drives every step; feasibility checked by replay
  void tied(std::vector<double>& buf, double& best, Record* rec) {
    const auto& h0 = m.steps[0].h_vars;
    for (const auto& st : m.steps)
      if (st.h_vars.size() != h0.size())
        throw std::invalid_argument("tie_h needs equal control counts per step");
    std::vector<double> point(h0.size());
    std::function<void(std::size_t)> hrec = [&](std::size_t pos) {
      if (truncated) return;
      if (pos == point.size()) {
        if (spent()) return;
        double total = 0;
        for (std::size_t i = 0; i < m.state_vars.size(); ++i)
          buf[m.state_vars[i]] = m.initial_state[i];
        for (std::size_t k = 0; k < m.steps.size(); ++k) {
          const Step& st = m.steps[k];
          for (std::size_t i = 0; i < st.h_vars.size(); ++i) buf[st.h_vars[i]] = point[i];
          for (const auto& g : st.domain.ineqs)
            if (g.evaluate(buf) < -opt.feas_tol) return;
          for (const auto& e : st.domain.eqs)
            if (std::abs(e.evaluate(buf)) > opt.feas_tol) return;
          total += st.reward.evaluate(buf);
          std::vector<double> nx(m.state_vars.size());
          for (std::size_t j = 0; j < m.state_vars.size(); ++j) {
            auto it = st.next.find(m.state_vars[j]);
            nx[j] = it != st.next.end() ? it->second.evaluate(buf) : buf[m.state_vars[j]];
          }
          for (std::size_t j = 0; j < m.state_vars.size(); ++j) buf[m.state_vars[j]] = nx[j];
        }
        if (total > best) {
          best = total;
          if (rec) {
            rec->best = total;
            rec->found = true;
            rec->h.assign(m.steps.size(), point);
          }
        }
        return;
      }
      auto [lo, hi] = var_bound(m.steps[0].domain, h0[pos]);
      const int grid = opt.grid_for(h0[pos]);
      for (int i = 0; i < grid; ++i) {
        point[pos] = grid_value(lo, hi, grid, i);
        hrec(pos + 1);
      }
    };
    hrec(0);
  }

  double evaluate_lambda(const std::vector<double>& lam, Record* rec) {
    std::vector<double> buf(m.num_vars, 0.0);
    for (std::size_t i = 0; i < m.lambda_vars.size(); ++i) buf[m.lambda_vars[i]] = lam[i];
    for (std::size_t i = 0; i < m.state_vars.size(); ++i) buf[m.state_vars[i]] = m.initial_state[i];
    double best = -1e300;
    if (rec) {
      rec->h_cur.clear();
      for (const auto& st : m.steps) rec->h_cur.emplace_back(st.h_vars.size(), 0.0);
    }
    if (opt.tie_h) {
      tied(buf, best, rec);
    } else {
      steps_rec(0, 0.0, buf, best, rec);
    }
    return best;
  }

  std::vector<std::vector<double>> lambda_candidates() {
    std::vector<std::vector<double>> out;
    std::vector<double> buf(m.num_vars, 0.0);
    std::vector<double> cur(m.lambda_vars.size());
    if (!pre_ok(lambda_plan, buf, opt.feas_tol)) return out;  // constant constraints only
    std::function<void(std::size_t)> rec = [&](std::size_t pos) {
      if (static_cast<long long>(out.size()) > opt.max_evals) {
        truncated = true;
        return;
      }
      if (pos == m.lambda_vars.size()) {
        out.push_back(cur);
        return;
      }
      auto [lo, hi] = var_bound(m.lambda_set, m.lambda_vars[pos]);
      const int grid = opt.grid_for(m.lambda_vars[pos]);
      for (int i = 0; i < grid; ++i) {
        cur[pos] = grid_value(lo, hi, grid, i);
        buf[m.lambda_vars[pos]] = cur[pos];
        if (!pos_ok(lambda_plan, static_cast<int>(pos), buf, opt.feas_tol)) continue;
        rec(pos + 1);
      }
    };
    rec(0);
    return out;
  }
};

}  // namespace

BruteForceResult brute_force_value(const SequentialModel& m, const BruteForceOptions& opt) {
  validate(m);
  Enumerator en(m, opt);
  auto cands = en.lambda_candidates();
  BruteForceResult res;
  if (cands.empty()) {
    res.truncated = en.truncated;
    return res;
  }

  std::vector<double> values(cands.size(), -1e300);
  bool parallel = opt.parallel && cands.size() > 1;
#if defined(_OPENMP)
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(cands.size()); ++i)
      values[i] = en.evaluate_lambda(cands[i], nullptr);
  } else
#endif
  {
    (void)parallel;
    for (std::size_t i = 0; i < cands.size(); ++i)
      values[i] = en.evaluate_lambda(cands[i], nullptr);
  }

  std::size_t winner = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[winner]) winner = i;
  if (values[winner] <= -1e300) {
    res.truncated = en.truncated;
    res.evals = en.evals;
    return res;
  }

  // replay the winning candidate serially to recover the strategy
  Enumerator replay(m, opt);
  Enumerator::Record rec;
  replay.evaluate_lambda(cands[winner], &rec);
  res.value = values[winner];
  res.found = rec.found;
  res.lambda = cands[winner];
  res.h = rec.h;
  res.truncated = en.truncated || replay.truncated;
  res.evals = en.evals;
  return res;
}

GameValue adaptive_game_value(const AdaptiveGame& g) {
  if (g.W.empty()) throw std::invalid_argument("adaptive game has no actions");
  const int T = static_cast<int>(g.terminal.size());
  for (const auto& w : g.W)
    if (w.rows() != T || w.cols() != T)
      throw std::invalid_argument("adaptive game weight matrix size mismatch");
  GameValue out;
  out.mu.assign(g.horizon + 1, Eigen::VectorXd());
  out.mu[g.horizon] = g.terminal;
  out.policy.assign(g.horizon, std::vector<int>(T, 0));
  for (int k = g.horizon - 1; k >= 0; --k) {
    Eigen::VectorXd mu(T);
    for (int t = 0; t < T; ++t) {
      double best = -1e300;
      int arg = 0;
      for (int i = 0; i < static_cast<int>(g.W.size()); ++i) {
        double v = g.W[i].row(t).dot(out.mu[k + 1]);
        if (v > best) {  // strict: ties keep the lowest action index
          best = v;
          arg = i;
        }
      }
      mu(t) = best;
      out.policy[k][t] = arg;
    }
    out.mu[k] = std::move(mu);
  }
  out.value = out.mu[0](g.start);
  return out;
}

void check_povm(const PreparationGame& g, double tol) {
  const int T = static_cast<int>(g.score.size());
  if (g.povm.empty()) throw std::invalid_argument("preparation game has no rounds");
  if (g.initial < 0 || g.initial >= T)
    throw std::invalid_argument("preparation game initial configuration out of range");
  for (const auto& round : g.povm) {
    if (static_cast<int>(round.size()) != T)
      throw std::invalid_argument("preparation game configuration count mismatch");
    for (const auto& family : round) {
      if (static_cast<int>(family.size()) != T)
        throw std::invalid_argument("preparation game outcome count mismatch");
      const Eigen::Index d = family[0].rows();
      Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(d, d);
      for (const auto& M : family) {
        if (M.rows() != d || M.cols() != d)
          throw std::invalid_argument("POVM element dimension mismatch");
        if ((M - M.adjoint()).cwiseAbs().maxCoeff() > tol)
          throw std::invalid_argument("POVM element not Hermitian");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
        if (es.eigenvalues().minCoeff() < -tol)
          throw std::invalid_argument("POVM element not positive semidefinite");
        sum += M;
      }
      if ((sum - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff() > tol)
        throw std::invalid_argument("POVM does not sum to the identity");
    }
  }
}

PreparationGame repeat_game(int rounds, const std::vector<std::vector<Eigen::MatrixXcd>>& family,
                            const Eigen::VectorXd& score, int initial) {
  if (rounds < 1) throw std::invalid_argument("preparation game needs at least one round");
  PreparationGame g;
  g.povm.assign(rounds, family);
  g.score = score;
  g.initial = initial;
  return g;
}

GameScore adaptive_game_value(const PreparationGame& g,
                              const std::vector<Eigen::MatrixXcd>& feasible) {
  if (feasible.empty()) throw std::invalid_argument("adaptive game needs a feasible state");
  const int N = static_cast<int>(g.povm.size());
  const int T = static_cast<int>(g.score.size());
  if (N == 0) throw std::invalid_argument("preparation game has no rounds");
  if (g.initial < 0 || g.initial >= T)
    throw std::invalid_argument("preparation game initial configuration out of range");

  GameScore out;
  out.mu.assign(N + 1, Eigen::VectorXd());
  out.mu[N] = g.score;
  out.maximizer.assign(N, std::vector<int>(T, 0));
  for (int k = N - 1; k >= 0; --k) {
    if (static_cast<int>(g.povm[k].size()) != T)
      throw std::invalid_argument("preparation game configuration count mismatch");
    Eigen::VectorXd mu(T);
    for (int t = 0; t < T; ++t) {
      const auto& family = g.povm[k][t];
      if (static_cast<int>(family.size()) != T)
        throw std::invalid_argument("preparation game outcome count mismatch");
      Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(family[0].rows(), family[0].cols());
      for (int tp = 0; tp < T; ++tp) K += out.mu[k + 1](tp) * family[tp];
      double best = -1e300;
      int arg = 0;
      for (int i = 0; i < static_cast<int>(feasible.size()); ++i) {
        double v = std::real((feasible[i] * K).trace());
        if (v > best) {  // strict: ties keep the lowest state index
          best = v;
          arg = i;
        }
      }
      mu(t) = best;
      out.maximizer[k][t] = arg;
    }
    out.mu[k] = std::move(mu);
  }
  out.value = out.mu[0](g.initial);
  return out;
}

RecoverResult recover_optimizer(const SequentialModel& m, const ValueCertificate& vc,
                                const RecoverOptions& opt) {
  validate(m);
  const int N = static_cast<int>(m.steps.size());
  if (vc.values.size() != static_cast<std::size_t>(N))
    throw std::invalid_argument("recover: certificate does not match the model's step count");

  // joint variables: lambda, every step's controls, fresh copies of s_k for
  // k >= 2 (s_1 is numeric)
  std::vector<VarId> jvars = m.lambda_vars;
  for (const auto& st : m.steps) jvars.insert(jvars.end(), st.h_vars.begin(), st.h_vars.end());
  VarId fresh = static_cast<VarId>(m.num_vars);
  std::vector<std::vector<VarId>> copy(N);
  for (int k = 1; k < N; ++k) {
    copy[k].resize(m.state_vars.size());
    for (auto& v : copy[k]) {
      v = fresh++;
      jvars.push_back(v);
    }
  }
  std::size_t expected = jvars.size();
  std::sort(jvars.begin(), jvars.end());
  jvars.erase(std::unique(jvars.begin(), jvars.end()), jvars.end());
  if (jvars.size() != expected)
    throw std::invalid_argument("recover: control variables shared between steps");

  sets::SemialgebraicSet J(jvars);
  for (VarId v : m.lambda_vars) {
    auto [lo, hi] = var_bound(m.lambda_set, v);
    J.set_bound(v, lo, hi);
  }
  for (int k = 0; k < N; ++k) {
    const Step& st = m.steps[k];
    for (VarId v : st.h_vars) {
      auto [lo, hi] = var_bound(st.domain, v);
      J.set_bound(v, lo, hi);
    }
    for (std::size_t j = 0; k >= 1 && j < m.state_vars.size(); ++j) {
      auto [lo, hi] = var_bound(st.domain, m.state_vars[j]);
      J.set_bound(copy[k][j], lo, hi);
    }
  }
  for (const auto& g : m.lambda_set.ineqs) J.add_ineq(g);
  for (const auto& h : m.lambda_set.eqs) J.add_eq(h);

  auto add_substituted = [&](const Polynomial& c, const std::map<VarId, Polynomial>& bind,
                             bool eq) {
    Polynomial cs = c.substitute(bind);
    if (cs.degree() == 0) {
      double v = cs.evaluate({});
      if ((eq && std::abs(v) > 1e-9) || (!eq && v < -1e-9))
        throw std::invalid_argument("recover: model constraints are infeasible");
      return;
    }
    if (eq)
      J.add_eq(cs);
    else
      J.add_ineq(cs);
  };

  // rename map per step: state vars -> numeric s_1 or their fresh copies
  std::vector<std::map<VarId, Polynomial>> at(N);
  for (int k = 0; k < N; ++k)
    for (std::size_t j = 0; j < m.state_vars.size(); ++j)
      at[k][m.state_vars[j]] =
          k == 0 ? Polynomial(m.initial_state[j]) : Polynomial::variable(copy[k][j]);

  for (int k = 0; k < N; ++k) {
    const Step& st = m.steps[k];
    for (const auto& g : st.domain.ineqs) add_substituted(g, at[k], false);
    for (const auto& h : st.domain.eqs) add_substituted(h, at[k], true);

    // saturation band: |V_k - r_k - V_{k+1} o f_k| <= eq_slack at this step's
    // variables; a loose certificate keeps the left side strictly positive
    Polynomial sat = vc.values[k] - st.reward;
    if (k + 1 < N) {
      Polynomial composed = vc.values[k + 1].substitute(st.next);
      sat -= composed;
    }
    sat = sat.substitute(at[k]);
    if (opt.eq_slack > 0) {
      add_substituted(Polynomial(opt.eq_slack) - sat, {}, false);
      add_substituted(sat + Polynomial(opt.eq_slack), {}, false);
    } else {
      add_substituted(sat, {}, true);
    }
  }

  std::map<VarId, Polynomial> init;
  for (std::size_t j = 0; j < m.state_vars.size(); ++j)
    init[m.state_vars[j]] = Polynomial(m.initial_state[j]);
  Polynomial objective = vc.values[0].substitute(init);

  int maxdeg = objective.degree();
  for (const auto& g : J.ineqs) maxdeg = std::max(maxdeg, g.degree());
  for (const auto& h : J.eqs) maxdeg = std::max(maxdeg, h.degree());
  int level = std::max(opt.level, (maxdeg + 1) / 2);

  auto res = moment::relax_max(objective, J, level, opt.solver);

  RecoverResult out;
  out.relaxation_value = res.value;
  out.feasible = res.report.status == conic::Status::Optimal ||
                 res.report.status == conic::Status::NearOptimal;
  if (!out.feasible) return out;

  auto ex = moment::extract_point(res, opt.rank_tol);
  out.extraction = ex;
  std::vector<double> byid(fresh, 0.0);
  for (std::size_t i = 0; i < J.vars.size(); ++i) byid[J.vars[i]] = ex.point.at(i);
  for (VarId v : m.lambda_vars) out.lambda.push_back(byid[v]);
  for (const auto& st : m.steps) {
    std::vector<double> hk;
    for (VarId v : st.h_vars) hk.push_back(byid[v]);
    out.h.push_back(std::move(hk));
  }
  out.achieved = simulate(m, out.lambda, out.h);
  out.extracted = ex.rank_one && ex.feasible;
  return out;
}

}  // namespace seqbound::seqopt
