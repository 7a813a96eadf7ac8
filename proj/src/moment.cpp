#include "seqbound/moment.hpp"

#include <cmath>
#include <stdexcept>

namespace seqbound::moment {

Relaxation build_relaxation(const Polynomial& p, const sets::SemialgebraicSet& S, int level) {
  if (p.degree() > 2 * level)
    throw std::invalid_argument("moment: objective degree exceeds 2*level");
  Relaxation rel;
  rel.S = S;
  rel.objective = p;
  rel.level = level;
  rel.moments = poly::monomials_up_to(S.vars, 2 * level);
  for (int i = 0; i < static_cast<int>(rel.moments.size()); ++i) {
    rel.index[rel.moments[i]] = i;
    rel.moment_vars.push_back(rel.prog.add_free());
  }
  auto yvar = [&](const Monomial& m) {
    auto it = rel.index.find(m);
    if (it == rel.index.end()) throw std::logic_error("moment: monomial outside moment vector");
    return rel.moment_vars[it->second];
  };

  for (const auto& [m, c] : p.terms()) rel.prog.set_objective(yvar(m), -c);

  {
    conic::ConicProblem::Row one;
    one.kind = conic::ConicProblem::RowKind::Eq;
    one.lin = {{rel.moment_vars[0], 1.0}};
    one.rhs = 1.0;
    one.label = "moment[one]";
    rel.one_row = static_cast<int>(rel.prog.rows.size());
    rel.prog.rows.push_back(std::move(one));
  }

  rel.basis = poly::monomials_up_to(S.vars, level);
  const int n = static_cast<int>(rel.basis.size());
  rel.moment_block = rel.prog.add_psd_block(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      conic::ConicProblem::Row row;
      row.kind = conic::ConicProblem::RowKind::Eq;
      row.lin = {{yvar(rel.basis[i] * rel.basis[j]), 1.0}};
      row.mat = {{rel.moment_block, i, j, -1.0}};
      row.label = "moment[M]";
      rel.prog.rows.push_back(std::move(row));
    }
  }

  for (int gi = 0; gi < static_cast<int>(S.ineqs.size()); ++gi) {
    const Polynomial& g = S.ineqs[gi];
    int cap = level - (g.degree() + 1) / 2;
    if (cap < 0) {
      rel.localizing_blocks.push_back(-1);
      rel.localizing_bases.emplace_back();
      continue;
    }
    auto gb = poly::monomials_up_to(S.vars, cap);
    int blk = rel.prog.add_psd_block(static_cast<int>(gb.size()));
    for (int i = 0; i < static_cast<int>(gb.size()); ++i) {
      for (int j = i; j < static_cast<int>(gb.size()); ++j) {
        conic::ConicProblem::Row row;
        row.kind = conic::ConicProblem::RowKind::Eq;
        Monomial ab = gb[i] * gb[j];
        for (const auto& [m, c] : g.terms()) row.lin.push_back({yvar(m * ab), c});
        row.mat = {{blk, i, j, -1.0}};
        row.label = "moment[loc]";
        rel.prog.rows.push_back(std::move(row));
      }
    }
    rel.localizing_blocks.push_back(blk);
    rel.localizing_bases.push_back(std::move(gb));
  }

  for (const auto& h : S.eqs) {
    int cap = 2 * level - h.degree();
    std::vector<Monomial> shifts;
    if (cap >= 0) shifts = poly::monomials_up_to(S.vars, cap);
    rel.eq_rows.emplace_back(static_cast<int>(rel.prog.rows.size()), shifts);
    for (const auto& a : shifts) {
      conic::ConicProblem::Row row;
      row.kind = conic::ConicProblem::RowKind::Eq;
      for (const auto& [m, c] : h.terms()) row.lin.push_back({yvar(m * a), c});
      row.label = "moment[eq]";
      rel.prog.rows.push_back(std::move(row));
    }
  }
  return rel;
}

MomentResult relax_max(const Polynomial& p, const sets::SemialgebraicSet& S, int level,
                       const conic::SolveOptions& opts) {
  MomentResult res;
  res.rel = build_relaxation(p, S, level);
  res.sol = conic::solve_sdp(res.rel.prog, opts);
  res.report = res.sol.report;
  res.value = -res.report.objective;
  for (int v : res.rel.moment_vars) res.y.push_back(res.sol.free.at(v));
  return res;
}

MomentResult relax_min(const Polynomial& p, const sets::SemialgebraicSet& S, int level,
                       const conic::SolveOptions& opts) {
  MomentResult res = relax_max(-p, S, level, opts);
  res.value = -res.value;
  res.rel.objective = p;
  return res;
}

Extraction extract_point(const MomentResult& res, double rank_tol) {
  Extraction ex;
  const Eigen::MatrixXd& M = res.sol.blocks.at(res.rel.moment_block);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();  // ascending
  double lmax = ev(ev.size() - 1);
  double l2 = ev.size() > 1 ? std::max(ev(ev.size() - 2), 0.0) : 0.0;
  ex.second_eig_ratio = lmax > 0 ? l2 / lmax : 1.0;
  ex.rank_one = lmax > 0 && ex.second_eig_ratio <= rank_tol;
  for (auto v : res.rel.S.vars) {
    auto it = res.rel.index.find(Monomial::var(v));
    ex.point.push_back(it == res.rel.index.end() ? 0.0 : res.y.at(it->second));
  }
  ex.feasible = res.rel.S.contains(ex.point, 1e-6);
  return ex;
}

ViolationBound max_violation(const Polynomial& p, const sets::SemialgebraicSet& S, int level,
                             const conic::SolveOptions& opts) {
  MomentResult res = relax_max(p, S, level, opts);
  const Relaxation& rel = res.rel;

  ViolationBound out;
  out.raw = res.value;
  out.report = res.report;
  out.dual_value = res.sol.row_duals.at(rel.one_row);

  sos::Certificate cert;
  {
    sos::Certificate::Term t;
    t.basis = rel.basis;
    t.gram = res.sol.block_duals.at(rel.moment_block);
    cert.terms.push_back(std::move(t));
  }
  for (int gi = 0; gi < static_cast<int>(rel.localizing_blocks.size()); ++gi) {
    if (rel.localizing_blocks[gi] < 0) continue;
    sos::Certificate::Term t;
    t.ineq_indices = {gi};
    t.basis = rel.localizing_bases[gi];
    t.gram = res.sol.block_duals.at(rel.localizing_blocks[gi]);
    cert.terms.push_back(std::move(t));
  }
  for (int j = 0; j < static_cast<int>(rel.eq_rows.size()); ++j) {
    const auto& [first, shifts] = rel.eq_rows[j];
    sos::Certificate::EqMult em;
    em.eq_index = j;
    for (int k = 0; k < static_cast<int>(shifts.size()); ++k)
      em.mult.add_term(shifts[k], -res.sol.row_duals.at(first + k));
    cert.eq_mults.push_back(std::move(em));
  }

  Polynomial target = Polynomial(out.dual_value) - p;
  auto rep = sos::verify(cert, target, S);
  out.delta = rep.delta;
  out.rigorous = out.dual_value + rep.delta;
  out.cert = std::move(cert);
  return out;
}

}  // namespace seqbound::moment
