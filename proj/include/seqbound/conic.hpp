#pragma once
// Conic solving layer.
//
// Two levels:
//  * ConeProgram: the raw backend form  min (1/2)x'Px + q'x  s.t. Ax + s = b,
//    s in a product of zero / nonneg / second-order / PSD-triangle cones.
//    Solved by the clarabel backend (interior point, via FFI) or the admm
//    backend (first order, native; has serial and OpenMP kernel paths).
//  * ConicProblem: structured SDP with named free scalars, PSD matrix
//    variables and labelled equality / inequality rows. This is what the
//    certificate machinery assembles; it lowers onto ConeProgram.
//
// PSD-triangle vectorisation (svec): upper triangle stacked column-wise,
// off-diagonal entries scaled by sqrt(2), so inner products of svecs equal
// matrix inner products.

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace seqbound::conic {

enum class ConeKind { Zero, Nonneg, Soc, PsdTriangle };

struct Cone {
  ConeKind kind;
  int dim;  // rows for zero/nonneg/soc; matrix side for psd triangle
  int rows() const { return kind == ConeKind::PsdTriangle ? dim * (dim + 1) / 2 : dim; }
};

struct Triplet {
  int row, col;
  double v;
};

struct ConeProgram {
  int nvars = 0;
  int nrows = 0;
  std::vector<Triplet> P;  // quadratic objective, upper triangle
  std::vector<double> q;
  std::vector<Triplet> A;
  std::vector<double> b;
  std::vector<Cone> cones;
};

enum class Status { Optimal, NearOptimal, Infeasible, Unknown };

const char* status_name(Status s);

struct SolverReport {
  Status status = Status::Unknown;
  double objective = 0.0;
  double r_prim = 0.0;
  double r_dual = 0.0;
  double gap_abs = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  std::string backend;
  std::string detail;  // backend-specific status string
};

struct Solution {
  std::vector<double> x;
  std::vector<double> z;  // dual per constraint row
  std::vector<double> s;  // slack per constraint row
  SolverReport report;
};

struct SolveOptions {
  std::string backend = "clarabel";  // "clarabel" or "admm"
  double tol = 1e-8;                 // feasibility and absolute gap target
  int max_iter = 0;                  // 0 = backend default
  double time_limit = 0.0;           // seconds, 0 = none
  bool verbose = false;
  bool serial_kernels = false;       // admm: force the serial reference path
};

// Applies SEQBOUND_BACKEND / SEQBOUND_SOLVER_TOL / SEQBOUND_SOLVER_MAXITER
// environment overrides, dispatches to the named backend.
Solution solve_cone_program(const ConeProgram& prog, const SolveOptions& opts = {});

Solution solve_clarabel(const ConeProgram& prog, const SolveOptions& opts);
Solution solve_admm(const ConeProgram& prog, const SolveOptions& opts);
bool clarabel_available();

// ---------------------------------------------------------------------------

struct ConicProblem {
  enum class RowKind { Eq, Ge };
  struct FreeTerm {
    int var;
    double v;
  };
  // Coefficient v multiplies the single entry X_rc (r <= c) of the
  // symmetric block; callers accounting for both (r,c) and (c,r) copies of
  // a bilinear form must fold the factor 2 into v themselves.
  struct MatTerm {
    int block;
    int r, c;
    double v;
  };
  struct Row {
    RowKind kind = RowKind::Eq;
    std::vector<FreeTerm> lin;
    std::vector<MatTerm> mat;
    double rhs = 0.0;
    std::string label;
  };

  int num_free = 0;
  std::vector<int> psd_dims;
  std::vector<double> objective;  // length num_free, minimised
  double obj_offset = 0.0;
  std::vector<Row> rows;

  int add_free(int count = 1);
  int add_psd_block(int dim);
  void set_objective(int var, double v);
};

struct SdpSolution {
  std::vector<double> free;            // free scalar values
  std::vector<Eigen::MatrixXd> blocks; // PSD block values
  std::vector<double> row_duals;       // one per problem row, problem order
  // dual matrix of each block's psd constraint (same dims as blocks)
  std::vector<Eigen::MatrixXd> block_duals;
  SolverReport report;
};

SdpSolution solve_sdp(const ConicProblem& prob, const SolveOptions& opts = {});

// Independent feasibility re-check: recomputes every row residual and every
// block's minimum eigenvalue directly from the solution.
struct SdpAudit {
  double max_eq_residual = 0.0;
  double max_ge_violation = 0.0;
  double min_block_eig = 0.0;  // most negative eigenvalue across blocks (0 if none)
  double objective = 0.0;      // recomputed from the solution
};

SdpAudit audit_sdp(const ConicProblem& prob, const SdpSolution& sol);

// Text dump in the Conic Benchmark Format (CBF v2) for offline cross-checks.
std::string dump_cbf(const ConicProblem& prob);

// svec index of entry (r, c), r <= c, in an upper-triangle column-major
// packing of a dim x dim symmetric matrix.
inline int svec_index(int r, int c) { return c * (c + 1) / 2 + r; }
inline int svec_size(int dim) { return dim * (dim + 1) / 2; }

Eigen::MatrixXd unsvec(const double* data, int dim);

}  // namespace seqbound::conic
