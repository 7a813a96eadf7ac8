//! Minimal C ABI around the Clarabel conic solver.
//!
//! Problem form: min (1/2) x'Px + q'x  s.t.  Ax + s = b,  s in K,
//! with P, A in CSC format (P upper-triangular) and K a product of
//! zero / nonnegative / second-order / PSD-triangle cones.
//!
//! PSD-triangle vectorisation follows Clarabel: upper triangle stacked
//! column-wise with off-diagonal entries scaled by sqrt(2).

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

pub const CONE_ZERO: i32 = 0;
pub const CONE_NONNEG: i32 = 1;
pub const CONE_SOC: i32 = 2;
pub const CONE_PSD_TRIANGLE: i32 = 3;

fn status_code(s: SolverStatus) -> i32 {
    match s {
        SolverStatus::Solved => 0,
        SolverStatus::AlmostSolved => 1,
        SolverStatus::PrimalInfeasible => 2,
        SolverStatus::DualInfeasible => 3,
        SolverStatus::AlmostPrimalInfeasible => 4,
        SolverStatus::AlmostDualInfeasible => 5,
        SolverStatus::MaxIterations => 6,
        SolverStatus::MaxTime => 7,
        SolverStatus::NumericalError => 8,
        SolverStatus::InsufficientProgress => 9,
        SolverStatus::Unsolved => 10,
    }
}

unsafe fn csc_from_parts(
    m: usize,
    n: usize,
    colptr: *const usize,
    rowval: *const usize,
    nzval: *const f64,
) -> CscMatrix<f64> {
    let colptr = std::slice::from_raw_parts(colptr, n + 1).to_vec();
    let nnz = colptr[n];
    let rowval = if nnz > 0 {
        std::slice::from_raw_parts(rowval, nnz).to_vec()
    } else {
        Vec::new()
    };
    let nzval = if nnz > 0 {
        std::slice::from_raw_parts(nzval, nnz).to_vec()
    } else {
        Vec::new()
    };
    CscMatrix {
        m,
        n,
        colptr,
        rowval,
        nzval,
    }
}

/// Returns the Clarabel status code, or -1 on malformed input.
/// All output pointers must reference buffers of the documented sizes.
#[no_mangle]
pub unsafe extern "C" fn sqb_clarabel_solve(
    n: usize,
    p_colptr: *const usize,
    p_rowval: *const usize,
    p_nzval: *const f64,
    q: *const f64,
    m: usize,
    a_colptr: *const usize,
    a_rowval: *const usize,
    a_nzval: *const f64,
    b: *const f64,
    n_cones: usize,
    cone_kind: *const i32,
    cone_dim: *const usize,
    max_iter: u32,
    time_limit: f64,
    tol_gap_abs: f64,
    tol_gap_rel: f64,
    tol_feas: f64,
    verbose: i32,
    x_out: *mut f64,      // n
    z_out: *mut f64,      // m
    s_out: *mut f64,      // m
    obj_out: *mut f64,
    iters_out: *mut u32,
    time_out: *mut f64,
    r_prim_out: *mut f64,
    r_dual_out: *mut f64,
) -> i32 {
    if n == 0 || q.is_null() || a_colptr.is_null() {
        return -1;
    }
    let pmat = csc_from_parts(n, n, p_colptr, p_rowval, p_nzval);
    let amat = csc_from_parts(m, n, a_colptr, a_rowval, a_nzval);
    let qv = std::slice::from_raw_parts(q, n).to_vec();
    let bv = std::slice::from_raw_parts(b, m).to_vec();

    let kinds = std::slice::from_raw_parts(cone_kind, n_cones);
    let dims = std::slice::from_raw_parts(cone_dim, n_cones);
    let mut cones: Vec<SupportedConeT<f64>> = Vec::with_capacity(n_cones);
    let mut total = 0usize;
    for i in 0..n_cones {
        let d = dims[i];
        match kinds[i] {
            CONE_ZERO => {
                cones.push(SupportedConeT::ZeroConeT(d));
                total += d;
            }
            CONE_NONNEG => {
                cones.push(SupportedConeT::NonnegativeConeT(d));
                total += d;
            }
            CONE_SOC => {
                cones.push(SupportedConeT::SecondOrderConeT(d));
                total += d;
            }
            CONE_PSD_TRIANGLE => {
                cones.push(SupportedConeT::PSDTriangleConeT(d));
                total += d * (d + 1) / 2;
            }
            _ => return -1,
        }
    }
    if total != m {
        return -1;
    }

    let mut settings = DefaultSettings::default();
    settings.max_iter = max_iter;
    settings.time_limit = time_limit;
    settings.tol_gap_abs = tol_gap_abs;
    settings.tol_gap_rel = tol_gap_rel;
    settings.tol_feas = tol_feas;
    settings.verbose = verbose != 0;

    let mut solver = DefaultSolver::new(&pmat, &qv, &amat, &bv, &cones, settings);
    solver.solve();

    let sol = &solver.solution;
    std::ptr::copy_nonoverlapping(sol.x.as_ptr(), x_out, n);
    std::ptr::copy_nonoverlapping(sol.z.as_ptr(), z_out, m);
    std::ptr::copy_nonoverlapping(sol.s.as_ptr(), s_out, m);
    *obj_out = sol.obj_val;
    *iters_out = sol.iterations;
    *time_out = sol.solve_time;
    *r_prim_out = sol.r_prim;
    *r_dual_out = sol.r_dual;
    status_code(sol.status)
}
