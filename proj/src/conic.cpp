#include "seqbound/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace seqbound::conic {

const char* status_name(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::NearOptimal: return "near_optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unknown: return "unknown";
  }
  return "unknown";
}

Solution solve_cone_program(const ConeProgram& prog, const SolveOptions& opts_in) {
  SolveOptions opts = opts_in;
  if (const char* e = std::getenv("SEQBOUND_BACKEND")) opts.backend = e;
  if (const char* e = std::getenv("SEQBOUND_SOLVER_TOL")) opts.tol = std::atof(e);
  if (const char* e = std::getenv("SEQBOUND_SOLVER_MAXITER")) opts.max_iter = std::atoi(e);

  int rows = 0;
  for (const auto& c : prog.cones) rows += c.rows();
  if (rows != prog.nrows)
    throw std::invalid_argument("cone dimensions do not match row count");
  if (static_cast<int>(prog.q.size()) != prog.nvars ||
      static_cast<int>(prog.b.size()) != prog.nrows)
    throw std::invalid_argument("q/b size mismatch");

  if (opts.backend == "clarabel") return solve_clarabel(prog, opts);
  if (opts.backend == "admm") return solve_admm(prog, opts);
  throw std::invalid_argument("unknown backend: " + opts.backend);
}

int ConicProblem::add_free(int count) {
  int first = num_free;
  num_free += count;
  objective.resize(num_free, 0.0);
  return first;
}

int ConicProblem::add_psd_block(int dim) {
  psd_dims.push_back(dim);
  return static_cast<int>(psd_dims.size()) - 1;
}

void ConicProblem::set_objective(int var, double v) {
  objective.resize(num_free, 0.0);
  objective.at(var) = v;
}

Eigen::MatrixXd unsvec(const double* data, int dim) {
  Eigen::MatrixXd m(dim, dim);
  const double rt2 = std::sqrt(2.0);
  for (int c = 0; c < dim; ++c)
    for (int r = 0; r <= c; ++r) {
      double v = data[svec_index(r, c)];
      if (r == c) {
        m(r, c) = v;
      } else {
        m(r, c) = v / rt2;
        m(c, r) = v / rt2;
      }
    }
  return m;
}

namespace {

struct Lowering {
  ConeProgram prog;
  int n_eq = 0;
  int n_ge = 0;
  std::vector<int> block_col;  // first x-column of each block's svec
  std::vector<int> block_row;  // first constraint row of each block's psd cone
};

Lowering lower(const ConicProblem& p) {
  Lowering L;
  const double rt2 = std::sqrt(2.0);
  for (const auto& r : p.rows) {
    if (r.kind == ConicProblem::RowKind::Eq) ++L.n_eq;
    else ++L.n_ge;
  }
  int nvars = p.num_free;
  L.block_col.reserve(p.psd_dims.size());
  for (int d : p.psd_dims) {
    L.block_col.push_back(nvars);
    nvars += svec_size(d);
  }
  int psd_rows = 0;
  for (int d : p.psd_dims) psd_rows += svec_size(d);
  ConeProgram& g = L.prog;
  g.nvars = nvars;
  g.nrows = L.n_eq + L.n_ge + psd_rows;
  g.q.assign(nvars, 0.0);
  for (int i = 0; i < p.num_free; ++i) g.q[i] = p.objective.empty() ? 0.0 : p.objective[i];
  g.b.assign(g.nrows, 0.0);

  if (L.n_eq) g.cones.push_back({ConeKind::Zero, L.n_eq});
  if (L.n_ge) g.cones.push_back({ConeKind::Nonneg, L.n_ge});

  // rows: equalities keep problem order; inequalities after, also in order
  int eq_at = 0, ge_at = L.n_eq;
  for (const auto& r : p.rows) {
    bool eq = r.kind == ConicProblem::RowKind::Eq;
    int row = eq ? eq_at++ : ge_at++;
    double sgn = eq ? 1.0 : -1.0;  // ge rows: -a'x + s = -rhs, s >= 0
    for (const auto& t : r.lin) g.A.push_back({row, t.var, sgn * t.v});
    for (const auto& t : r.mat) {
      if (t.r > t.c) throw std::invalid_argument("MatTerm needs r <= c");
      int col = L.block_col.at(t.block) + svec_index(t.r, t.c);
      double scale = t.r == t.c ? 1.0 : 1.0 / rt2;
      g.A.push_back({row, col, sgn * scale * t.v});
    }
    g.b[row] = sgn * r.rhs;
  }

  // psd membership: s_block = svec(X_block)
  int row = L.n_eq + L.n_ge;
  for (std::size_t bi = 0; bi < p.psd_dims.size(); ++bi) {
    int d = p.psd_dims[bi];
    L.block_row.push_back(row);
    g.cones.push_back({ConeKind::PsdTriangle, d});
    for (int k = 0; k < svec_size(d); ++k) {
      g.A.push_back({row + k, L.block_col[bi] + k, -1.0});
      // b stays 0
    }
    row += svec_size(d);
  }
  return L;
}

}  // namespace

SdpSolution solve_sdp(const ConicProblem& prob, const SolveOptions& opts) {
  Lowering L = lower(prob);
  Solution raw = solve_cone_program(L.prog, opts);

  SdpSolution out;
  out.report = raw.report;
  out.report.objective += prob.obj_offset;
  out.free.assign(raw.x.begin(), raw.x.begin() + prob.num_free);
  for (std::size_t bi = 0; bi < prob.psd_dims.size(); ++bi) {
    out.blocks.push_back(unsvec(raw.x.data() + L.block_col[bi], prob.psd_dims[bi]));
    out.block_duals.push_back(unsvec(raw.z.data() + L.block_row[bi], prob.psd_dims[bi]));
  }

  out.row_duals.resize(prob.rows.size(), 0.0);
  int eq_at = 0, ge_at = L.n_eq;
  for (std::size_t i = 0; i < prob.rows.size(); ++i) {
    bool eq = prob.rows[i].kind == ConicProblem::RowKind::Eq;
    int row = eq ? eq_at++ : ge_at++;
    // ge rows were negated in the lowering; undo for the caller
    out.row_duals[i] = (eq ? 1.0 : -1.0) * raw.z[row];
  }
  return out;
}

SdpAudit audit_sdp(const ConicProblem& prob, const SdpSolution& sol) {
  SdpAudit a;
  for (const auto& r : prob.rows) {
    double v = -r.rhs;
    for (const auto& t : r.lin) v += t.v * sol.free.at(t.var);
    for (const auto& t : r.mat) v += t.v * sol.blocks.at(t.block)(t.r, t.c);
    if (r.kind == ConicProblem::RowKind::Eq)
      a.max_eq_residual = std::max(a.max_eq_residual, std::abs(v));
    else
      a.max_ge_violation = std::max(a.max_ge_violation, std::max(0.0, -v));
  }
  double mineig = 0.0;
  for (const auto& X : sol.blocks) {
    if (X.rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X, Eigen::EigenvaluesOnly);
    mineig = std::min(mineig, es.eigenvalues().minCoeff());
  }
  a.min_block_eig = mineig;
  a.objective = prob.obj_offset;
  for (int i = 0; i < prob.num_free; ++i)
    a.objective += (prob.objective.empty() ? 0.0 : prob.objective[i]) * sol.free[i];
  return a;
}

std::string dump_cbf(const ConicProblem& prob) {
  // CBF v2. Scalar constraint rows are emitted equalities first (L=), then
  // inequalities (L+), matching the lowering order. PSD matrix coefficients
  // use the CBF convention that an off-diagonal entry (r, c) denotes both
  // symmetric positions, hence the factor 1/2 against our single-count v.
  std::ostringstream os;
  os << "# seqbound conic problem dump\n";
  os << "VER\n2\n\n";
  os << "OBJSENSE\nMIN\n\n";
  if (!prob.psd_dims.empty()) {
    os << "PSDVAR\n" << prob.psd_dims.size() << "\n";
    for (int d : prob.psd_dims) os << d << "\n";
    os << "\n";
  }
  if (prob.num_free > 0) {
    os << "VAR\n" << prob.num_free << " 1\nF " << prob.num_free << "\n\n";
  }
  int n_eq = 0, n_ge = 0;
  for (const auto& r : prob.rows)
    r.kind == ConicProblem::RowKind::Eq ? ++n_eq : ++n_ge;
  os << "CON\n" << (n_eq + n_ge) << " " << ((n_eq ? 1 : 0) + (n_ge ? 1 : 0)) << "\n";
  if (n_eq) os << "L= " << n_eq << "\n";
  if (n_ge) os << "L+ " << n_ge << "\n";
  os << "\n";

  std::vector<int> row_index(prob.rows.size());
  {
    int eq_at = 0, ge_at = n_eq;
    for (std::size_t i = 0; i < prob.rows.size(); ++i)
      row_index[i] = prob.rows[i].kind == ConicProblem::RowKind::Eq ? eq_at++ : ge_at++;
  }

  std::ostringstream obja, hcoord, acoord, bcoord;
  int n_obja = 0, n_h = 0, n_a = 0, n_b = 0;
  for (int i = 0; i < prob.num_free; ++i) {
    double v = prob.objective.empty() ? 0.0 : prob.objective[i];
    if (v != 0.0) {
      obja << i << " " << v << "\n";
      ++n_obja;
    }
  }
  for (std::size_t i = 0; i < prob.rows.size(); ++i) {
    const auto& r = prob.rows[i];
    for (const auto& t : r.lin) {
      acoord << row_index[i] << " " << t.var << " " << t.v << "\n";
      ++n_a;
    }
    for (const auto& t : r.mat) {
      double v = t.r == t.c ? t.v : t.v / 2.0;
      // CBF wants lower-triangular indices
      hcoord << row_index[i] << " " << t.block << " " << t.c << " " << t.r << " " << v
             << "\n";
      ++n_h;
    }
    if (r.rhs != 0.0) {
      bcoord << row_index[i] << " " << -r.rhs << "\n";
      ++n_b;
    }
  }
  if (prob.obj_offset != 0.0) os << "OBJBCOORD\n" << prob.obj_offset << "\n\n";
  if (n_obja) os << "OBJACOORD\n" << n_obja << "\n" << obja.str() << "\n";
  if (n_h) os << "HCOORD\n" << n_h << "\n" << hcoord.str() << "\n";
  if (n_a) os << "ACOORD\n" << n_a << "\n" << acoord.str() << "\n";
  if (n_b) os << "BCOORD\n" << n_b << "\n" << bcoord.str() << "\n";
  return os.str();
}

}  // namespace seqbound::conic
