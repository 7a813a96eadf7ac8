#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "seqbound/conic.hpp"

#if SEQBOUND_HAVE_CLARABEL

extern "C" {
// Implemented by the solver_ffi staticlib (Rust). See solver_ffi/src/lib.rs.
int sqb_clarabel_solve(
    std::size_t n, const std::size_t* p_colptr, const std::size_t* p_rowval,
    const double* p_nzval, const double* q, std::size_t m,
    const std::size_t* a_colptr, const std::size_t* a_rowval, const double* a_nzval,
    const double* b, std::size_t n_cones, const std::int32_t* cone_kind,
    const std::size_t* cone_dim, std::uint32_t max_iter, double time_limit,
    double tol_gap_abs, double tol_gap_rel, double tol_feas, std::int32_t verbose,
    double* x_out, double* z_out, double* s_out, double* obj_out,
    std::uint32_t* iters_out, double* time_out, double* r_prim_out, double* r_dual_out);
}

namespace seqbound::conic {

namespace {

struct Csc {
  std::vector<std::size_t> colptr, rowval;
  std::vector<double> nzval;
};

Csc to_csc(const std::vector<Triplet>& entries, int rows, int cols) {
  (void)rows;
  // sort by (col, row), summing duplicates
  std::vector<Triplet> es = entries;
  std::sort(es.begin(), es.end(), [](const Triplet& a, const Triplet& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  Csc m;
  m.colptr.assign(cols + 1, 0);
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (i > 0 && es[i].col == es[i - 1].col && es[i].row == es[i - 1].row) {
      m.nzval.back() += es[i].v;
      continue;
    }
    m.rowval.push_back(es[i].row);
    m.nzval.push_back(es[i].v);
    ++m.colptr[es[i].col + 1];
  }
  for (int c = 0; c < cols; ++c) m.colptr[c + 1] += m.colptr[c];
  return m;
}

}  // namespace

bool clarabel_available() { return true; }

Solution solve_clarabel(const ConeProgram& prog, const SolveOptions& opts) {
  Csc P = to_csc(prog.P, prog.nvars, prog.nvars);
  Csc A = to_csc(prog.A, prog.nrows, prog.nvars);

  std::vector<std::int32_t> kinds;
  std::vector<std::size_t> dims;
  for (const auto& c : prog.cones) {
    switch (c.kind) {
      case ConeKind::Zero: kinds.push_back(0); break;
      case ConeKind::Nonneg: kinds.push_back(1); break;
      case ConeKind::Soc: kinds.push_back(2); break;
      case ConeKind::PsdTriangle: kinds.push_back(3); break;
    }
    dims.push_back(c.dim);
  }

  Solution sol;
  sol.x.assign(prog.nvars, 0.0);
  sol.z.assign(prog.nrows, 0.0);
  sol.s.assign(prog.nrows, 0.0);
  std::uint32_t iters = 0;
  double obj = 0, secs = 0, rp = 0, rd = 0;

  std::uint32_t max_iter = opts.max_iter > 0 ? opts.max_iter : 200;
  double time_limit = opts.time_limit > 0 ? opts.time_limit : 1e30;

  int code = sqb_clarabel_solve(
      prog.nvars, P.colptr.data(), P.rowval.data(), P.nzval.data(), prog.q.data(),
      prog.nrows, A.colptr.data(), A.rowval.data(), A.nzval.data(), prog.b.data(),
      kinds.size(), kinds.data(), dims.data(), max_iter, time_limit,
      opts.tol, opts.tol, opts.tol, opts.verbose ? 1 : 0,
      sol.x.data(), sol.z.data(), sol.s.data(), &obj, &iters, &secs, &rp, &rd);

  SolverReport& r = sol.report;
  r.backend = "clarabel";
  r.objective = obj;
  r.iterations = static_cast<int>(iters);
  r.seconds = secs;
  r.r_prim = rp;
  r.r_dual = rd;
  r.gap_abs = 0.0;
  switch (code) {
    case 0: r.status = Status::Optimal; r.detail = "Solved"; break;
    case 1: r.status = Status::NearOptimal; r.detail = "AlmostSolved"; break;
    case 2: r.status = Status::Infeasible; r.detail = "PrimalInfeasible"; break;
    case 3: r.status = Status::Infeasible; r.detail = "DualInfeasible"; break;
    case 4: r.status = Status::Infeasible; r.detail = "AlmostPrimalInfeasible"; break;
    case 5: r.status = Status::Infeasible; r.detail = "AlmostDualInfeasible"; break;
    case 6: r.status = Status::Unknown; r.detail = "MaxIterations"; break;
    case 7: r.status = Status::Unknown; r.detail = "MaxTime"; break;
    case 8: r.status = Status::Unknown; r.detail = "NumericalError"; break;
    case 9: r.status = Status::Unknown; r.detail = "InsufficientProgress"; break;
    case -1: throw std::invalid_argument("clarabel ffi rejected the problem");
    default: r.status = Status::Unknown; r.detail = "Unsolved"; break;
  }
  return sol;
}

}  // namespace seqbound::conic

#else  // !SEQBOUND_HAVE_CLARABEL

namespace seqbound::conic {

bool clarabel_available() { return false; }

Solution solve_clarabel(const ConeProgram&, const SolveOptions&) {
  throw std::runtime_error("built without the clarabel backend");
}

}  // namespace seqbound::conic

#endif
