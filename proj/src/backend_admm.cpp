// First-order ADMM solver for cone programs. Splitting:
//   x-step: (P + rho A'A + sigma I) x = -q + rho A'(b - s - u)
//   s-step: s = proj_K(b - Ax - u)
//   u-step: u += Ax + s - b
// with y = rho u the dual iterate. The cone projection loop is the parallel
// kernel; serial and OpenMP paths produce bitwise identical iterates since
// blocks are disjoint.

#include <algorithm>
#include <chrono>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "seqbound/conic.hpp"

namespace seqbound::conic {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

struct ConeSlice {
  Cone cone;
  int offset;
};

void project_slice(const ConeSlice& cs, Vec& v) {
  double* p = v.data() + cs.offset;
  switch (cs.cone.kind) {
    case ConeKind::Zero:
      std::fill(p, p + cs.cone.dim, 0.0);
      break;
    case ConeKind::Nonneg:
      for (int i = 0; i < cs.cone.dim; ++i) p[i] = std::max(0.0, p[i]);
      break;
    case ConeKind::Soc: {
      int d = cs.cone.dim;
      double t = p[0];
      double nw = 0;
      for (int i = 1; i < d; ++i) nw += p[i] * p[i];
      nw = std::sqrt(nw);
      if (nw <= t) break;
      if (nw <= -t) {
        std::fill(p, p + d, 0.0);
        break;
      }
      double a = 0.5 * (t + nw);
      p[0] = a;
      double scale = a / nw;
      for (int i = 1; i < d; ++i) p[i] *= scale;
      break;
    }
    case ConeKind::PsdTriangle: {
      int d = cs.cone.dim;
      Eigen::MatrixXd X = unsvec(p, d);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X);
      Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
      X = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
      const double rt2 = std::sqrt(2.0);
      for (int c = 0; c < d; ++c)
        for (int r = 0; r <= c; ++r)
          p[svec_index(r, c)] = r == c ? X(r, c) : rt2 * X(r, c);
      break;
    }
  }
}

void project(const std::vector<ConeSlice>& slices, Vec& v, bool serial) {
  if (serial) {
    for (const auto& cs : slices) project_slice(cs, v);
    return;
  }
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(slices.size()); ++i) project_slice(slices[i], v);
#else
  for (const auto& cs : slices) project_slice(cs, v);
#endif
}

}  // namespace

Solution solve_admm(const ConeProgram& prog, const SolveOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  const int n = prog.nvars, m = prog.nrows;

  SpMat A(m, n), P(n, n);
  {
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(prog.A.size());
    for (const auto& t : prog.A) ts.emplace_back(t.row, t.col, t.v);
    A.setFromTriplets(ts.begin(), ts.end());
    ts.clear();
    for (const auto& t : prog.P) {  // stored upper triangle; symmetrise
      ts.emplace_back(t.row, t.col, t.v);
      if (t.row != t.col) ts.emplace_back(t.col, t.row, t.v);
    }
    P.setFromTriplets(ts.begin(), ts.end());
  }
  SpMat At = A.transpose();
  Vec q = Eigen::Map<const Vec>(prog.q.data(), n);
  Vec b = Eigen::Map<const Vec>(prog.b.data(), m);

  std::vector<ConeSlice> slices;
  {
    int off = 0;
    for (const auto& c : prog.cones) {
      slices.push_back({c, off});
      off += c.rows();
    }
  }

  // sigma only guards the factorization; the fixed point carries an
  // O(sigma/rho |x|) residual so it must sit far below the target tolerance.
  const double sigma = 1e-12;
  const double alpha = 1.6;  // over-relaxation
  double rho = 1.0;
  SpMat I(n, n);
  I.setIdentity();
  Eigen::SimplicialLDLT<SpMat> kkt;
  auto factor = [&]() {
    SpMat M = P + (At * A * rho).pruned() + I * sigma;
    kkt.compute(M);
    if (kkt.info() != Eigen::Success)
      throw std::runtime_error("admm: KKT factorization failed");
  };
  factor();

  Vec x = Vec::Zero(n), s = Vec::Zero(m), u = Vec::Zero(m);
  project(slices, s, opts.serial_kernels);

  const int max_iter = opts.max_iter > 0 ? opts.max_iter : 100000;
  const double tol = opts.tol;
  double rp = 0, rd = 0, gap = 0;
  int it = 0;
  const double bscale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  const double qscale = std::max(1.0, q.lpNorm<Eigen::Infinity>());

  for (it = 1; it <= max_iter; ++it) {
    Vec rhs = -q + rho * (At * (b - s - u));
    x = kkt.solve(rhs);
    Vec ax = A * x;
    Vec w = alpha * ax - (1.0 - alpha) * (s - b);
    s = b - w - u;
    project(slices, s, opts.serial_kernels);
    u += w + s - b;
    Vec resid = ax + s - b;

    if (it % 25 == 0 || it == max_iter) {
      Vec y = rho * u;
      rp = resid.lpNorm<Eigen::Infinity>() / bscale;
      rd = (P * x + q + At * y).lpNorm<Eigen::Infinity>() / qscale;
      double pobj = 0.5 * x.dot(P * x) + q.dot(x);
      gap = std::abs(pobj + 0.5 * x.dot(P * x) + b.dot(y));
      if (rp < tol && rd < tol) break;
      if (it % 200 == 0) {  // residual balancing
        double prev = rho;
        if (rp > 10 * rd) rho = std::min(rho * 2, 1e6);
        else if (rd > 10 * rp) rho = std::max(rho / 2, 1e-6);
        if (rho != prev) {
          u *= prev / rho;  // keep y = rho u continuous
          factor();
        }
      }
    }
  }

  Solution sol;
  sol.x.assign(x.data(), x.data() + n);
  Vec y = rho * u;
  sol.z.assign(y.data(), y.data() + m);
  sol.s.assign(s.data(), s.data() + m);
  SolverReport& r = sol.report;
  r.backend = "admm";
  r.objective = 0.5 * x.dot(P * x) + q.dot(x);
  r.iterations = it;
  r.r_prim = rp;
  r.r_dual = rd;
  r.gap_abs = gap;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (rp < tol && rd < tol) r.status = Status::Optimal;
  else if (rp < 100 * tol && rd < 100 * tol) r.status = Status::NearOptimal;
  else r.status = Status::Unknown;
  r.detail = r.status == Status::Optimal ? "converged" : "residuals above tolerance";
  return sol;
}

}  // namespace seqbound::conic
