#include "seqbound/conic.hpp"

#include <cmath>
#include <cstdlib>

#include "doctest.h"

using namespace seqbound::conic;

namespace {

// max <C, X> s.t. tr X = 1, X psd  ==  lambda_max(C)
ConicProblem eigenvalue_sdp(const Eigen::Matrix2d& C) {
  ConicProblem p;
  int blk = p.add_psd_block(2);
  ConicProblem::Row tr;
  tr.kind = ConicProblem::RowKind::Eq;
  tr.mat = {{blk, 0, 0, 1.0}, {blk, 1, 1, 1.0}};
  tr.rhs = 1.0;
  tr.label = "trace";
  p.rows.push_back(tr);
  // minimize -<C,X> via a free epigraph variable
  int t = p.add_free();
  ConicProblem::Row link;
  link.kind = ConicProblem::RowKind::Eq;
  link.lin = {{t, 1.0}};
  link.mat = {{blk, 0, 0, -C(0, 0)}, {blk, 1, 1, -C(1, 1)}, {blk, 0, 1, -2.0 * C(0, 1)}};
  link.label = "objective_link";
  p.rows.push_back(link);
  p.set_objective(t, -1.0);
  return p;
}

}  // namespace

TEST_CASE("free variable with inequality row") {
  // min t s.t. t >= 1
  ConicProblem p;
  int t = p.add_free();
  ConicProblem::Row r;
  r.kind = ConicProblem::RowKind::Ge;
  r.lin = {{t, 1.0}};
  r.rhs = 1.0;
  p.rows.push_back(r);
  p.set_objective(t, 1.0);
  for (const char* be : {"clarabel", "admm"}) {
    SolveOptions o;
    o.backend = be;
    auto sol = solve_sdp(p, o);
    CAPTURE(be);
    CHECK(sol.report.status == Status::Optimal);
    CHECK(sol.free[0] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("psd block forces nonnegativity") {
  // min t s.t. [t] psd (1x1 block linked to t)
  ConicProblem p;
  int t = p.add_free();
  int blk = p.add_psd_block(1);
  ConicProblem::Row link;
  link.lin = {{t, 1.0}};
  link.mat = {{blk, 0, 0, -1.0}};
  p.rows.push_back(link);
  p.set_objective(t, 1.0);
  auto sol = solve_sdp(p, {});
  CHECK(sol.report.status == Status::Optimal);
  CHECK(std::abs(sol.free[0]) < 1e-7);
}

TEST_CASE("largest eigenvalue sdp matches Eigen") {
  Eigen::Matrix2d C;
  C << 2.0, 1.0, 1.0, 3.0;
  double lmax = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(C).eigenvalues().maxCoeff();
  CHECK(lmax == doctest::Approx((5.0 + std::sqrt(5.0)) / 2.0));

  auto p = eigenvalue_sdp(C);
  SolveOptions clarabel_opts;
  auto a = solve_sdp(p, clarabel_opts);
  CHECK(a.report.status == Status::Optimal);
  CHECK(-a.report.objective == doctest::Approx(lmax).epsilon(1e-7));

  SolveOptions admm_opts;
  admm_opts.backend = "admm";
  admm_opts.tol = 1e-9;
  auto b = solve_sdp(p, admm_opts);
  CHECK(b.report.status == Status::Optimal);
  CHECK(-b.report.objective == doctest::Approx(lmax).epsilon(1e-6));

  // backends agree
  CHECK(a.report.objective == doctest::Approx(b.report.objective).epsilon(1e-6));

  // optimizer is the top eigenprojector; trace 1, psd
  auto audit = audit_sdp(p, a);
  CHECK(audit.max_eq_residual < 1e-7);
  CHECK(audit.min_block_eig > -1e-8);
}

TEST_CASE("audit flags corrupted solutions") {
  Eigen::Matrix2d C;
  C << 1.0, 0.0, 0.0, -1.0;
  auto p = eigenvalue_sdp(C);
  auto sol = solve_sdp(p, {});
  auto clean = audit_sdp(p, sol);
  CHECK(clean.max_eq_residual < 1e-7);

  sol.blocks[0](0, 0) += 0.05;  // break the trace row
  auto broken = audit_sdp(p, sol);
  CHECK(broken.max_eq_residual > 0.04);

  sol.blocks[0](0, 1) = sol.blocks[0](1, 0) = 2.0;  // break psd
  auto indef = audit_sdp(p, sol);
  CHECK(indef.min_block_eig < -0.5);
}

TEST_CASE("row order does not change the optimum") {
  Eigen::Matrix2d C;
  C << 2.0, 1.0, 1.0, 3.0;
  auto p = eigenvalue_sdp(C);
  auto q = p;
  std::swap(q.rows[0], q.rows[1]);
  auto a = solve_sdp(p, {});
  auto b = solve_sdp(q, {});
  CHECK(a.report.objective == doctest::Approx(b.report.objective).epsilon(1e-8));
}

TEST_CASE("determinism: identical reruns") {
  Eigen::Matrix2d C;
  C << 2.0, 1.0, 1.0, 3.0;
  auto p = eigenvalue_sdp(C);
  auto a = solve_sdp(p, {});
  auto b = solve_sdp(p, {});
  CHECK(a.report.objective == b.report.objective);
  for (std::size_t i = 0; i < a.free.size(); ++i) CHECK(a.free[i] == b.free[i]);
}

TEST_CASE("second order cone and quadratic objective") {
  // min t s.t. (t, 3, 4) in SOC  -> 5
  ConeProgram g;
  g.nvars = 1;
  g.nrows = 3;
  g.q = {1.0};
  g.A = {{0, 0, -1.0}};
  g.b = {0.0, 3.0, 4.0};
  g.cones = {{ConeKind::Soc, 3}};
  for (const char* be : {"clarabel", "admm"}) {
    SolveOptions o;
    o.backend = be;
    o.tol = 1e-9;
    auto sol = solve_cone_program(g, o);
    CAPTURE(be);
    CHECK(sol.x[0] == doctest::Approx(5.0).epsilon(1e-6));
  }

  // min (1/2)(x - 2)^2 -> x = 2 (quadratic objective, unconstrained except x >= 0)
  ConeProgram h;
  h.nvars = 1;
  h.nrows = 1;
  h.P = {{0, 0, 1.0}};
  h.q = {-2.0};
  h.A = {{0, 0, -1.0}};
  h.b = {0.0};
  h.cones = {{ConeKind::Nonneg, 1}};
  for (const char* be : {"clarabel", "admm"}) {
    SolveOptions o;
    o.backend = be;
    o.tol = 1e-9;
    auto sol = solve_cone_program(h, o);
    CAPTURE(be);
    CHECK(sol.x[0] == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("environment overrides pick the backend") {
  ConicProblem p;
  int t = p.add_free();
  ConicProblem::Row r;
  r.kind = ConicProblem::RowKind::Ge;
  r.lin = {{t, 1.0}};
  r.rhs = 2.0;
  p.rows.push_back(r);
  p.set_objective(t, 1.0);

  setenv("SEQBOUND_BACKEND", "admm", 1);
  auto sol = solve_sdp(p, {});  // asks for clarabel by default
  unsetenv("SEQBOUND_BACKEND");
  CHECK(sol.report.backend == "admm");
  CHECK(sol.free[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("admm serial and parallel kernels agree bitwise") {
  Eigen::Matrix2d C;
  C << 2.0, -1.0, -1.0, 0.5;
  auto p = eigenvalue_sdp(C);
  SolveOptions par;
  par.backend = "admm";
  SolveOptions ser = par;
  ser.serial_kernels = true;
  auto a = solve_sdp(p, par);
  auto b = solve_sdp(p, ser);
  CHECK(a.report.objective == b.report.objective);
  for (std::size_t i = 0; i < a.free.size(); ++i) CHECK(a.free[i] == b.free[i]);
}

TEST_CASE("cbf dump structure") {
  Eigen::Matrix2d C;
  C << 2.0, 1.0, 1.0, 3.0;
  auto p = eigenvalue_sdp(C);
  std::string s = dump_cbf(p);
  CHECK(s.find("VER\n2") != std::string::npos);
  CHECK(s.find("OBJSENSE\nMIN") != std::string::npos);
  CHECK(s.find("PSDVAR\n1\n2") != std::string::npos);
  CHECK(s.find("L= 2") != std::string::npos);
  CHECK(s.find("HCOORD") != std::string::npos);
  CHECK(s.find("OBJACOORD") != std::string::npos);
}

TEST_CASE("infeasible problems are reported") {
  // t >= 1 and -t >= 0 cannot hold together
  ConicProblem p;
  int t = p.add_free();
  ConicProblem::Row r1, r2;
  r1.kind = ConicProblem::RowKind::Ge;
  r1.lin = {{t, 1.0}};
  r1.rhs = 1.0;
  r2.kind = ConicProblem::RowKind::Ge;
  r2.lin = {{t, -1.0}};
  r2.rhs = 0.0;
  p.rows = {r1, r2};
  p.set_objective(t, 1.0);
  auto sol = solve_sdp(p, {});
  CHECK(sol.report.status == Status::Infeasible);
}
