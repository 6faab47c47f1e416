//! Linear solves with Dirichlet elimination and point evaluation of the
//! discrete fields.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LltError;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::assembly::{combine, Discretization, PointValues, SparseSystem};
use crate::error::{FemError, Result};
use crate::nedelec::eval_vector_shapes_at;
use crate::simplex::bezier_eval_closed;
use crate::sparse::CsrMatrix;

pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub disc: Arc<Discretization>,
    pub coeffs: Vec<f64>,
    /// Relative residual of the reduced system.
    pub residual: f64,
    /// Solver that produced the solution.
    pub method: SolverKind,
}

impl FieldSolution {
    /// Wraps given coefficients, e.g. an interpolant.
    pub fn from_coeffs(disc: Arc<Discretization>, coeffs: Vec<f64>) -> Self {
        Self { disc, coeffs, residual: 0.0, method: SolverKind::Direct }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Sparse Cholesky, falling back to conjugate gradients.
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub kind: SolverKind,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { kind: SolverKind::Direct, tol: RESIDUAL_TOL, max_iter: 50_000 }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_residual(k: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = k.matvec(x).iter().zip(b).map(|(a, b)| a - b).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Diagonally preconditioned conjugate gradients from the initial guess `x`.
pub fn pcg(k: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<f64> {
    let n = b.len();
    let inv_d: Vec<f64> = k.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let nb = norm(b).max(f64::MIN_POSITIVE);
    let mut r: Vec<f64> = k.matvec(x).iter().zip(b).map(|(a, b)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut res = norm(&r) / nb;
    for _ in 0..max_iter {
        if res <= tol {
            return Ok(res);
        }
        let kp = k.matvec(&p);
        let pkp: f64 = p.iter().zip(&kp).map(|(a, b)| a * b).sum();
        if pkp <= 0.0 {
            return Err(FemError::NotPositiveDefinite);
        }
        let alpha = rz / pkp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        res = norm(&r) / nb;
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // confirm with a true residual before giving up
    let res = relative_residual(k, x, b);
    if res <= tol {
        Ok(res)
    } else {
        Err(FemError::NonConvergence { iterations: max_iter, residual: res })
    }
}

/// Solves `K x = b` for a symmetric positive definite `K`. Returns the
/// solution, its relative residual and the solver that succeeded.
pub fn solve_spd(k: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, f64, SolverKind)> {
    let n = k.n;
    if n == 0 {
        return Ok((Vec::new(), 0.0, opts.kind));
    }
    let mut x = vec![0.0; n];
    if opts.kind == SolverKind::Direct {
        // a symmetric CSR matrix is its own CSC transpose
        let symbolic =
            SymbolicSparseColMat::<usize>::new_checked(n, n, k.row_ptr.clone(), None, k.cols.clone());
        let mat = SparseColMat::<usize, f64>::new(symbolic, k.vals.clone());
        match mat.sp_cholesky(Side::Lower) {
            Ok(llt) => {
                let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
                let sol = llt.solve(&rhs);
                for i in 0..n {
                    x[i] = sol[(i, 0)];
                }
                let mut res = relative_residual(k, &x, b);
                // iterative refinement
                for _ in 0..3 {
                    if res <= opts.tol {
                        break;
                    }
                    let r: Vec<f64> = k.matvec(&x).iter().zip(b).map(|(a, b)| b - a).collect();
                    let d = llt.solve(&Mat::<f64>::from_fn(n, 1, |i, _| r[i]));
                    for i in 0..n {
                        x[i] += d[(i, 0)];
                    }
                    res = relative_residual(k, &x, b);
                }
                if res <= opts.tol {
                    return Ok((x, res, SolverKind::Direct));
                }
            }
            Err(LltError::Numeric(_)) => return Err(FemError::NotPositiveDefinite),
            Err(LltError::Generic(_)) => {}
        }
    }
    let res = pcg(k, b, &mut x, opts.tol, opts.max_iter)?;
    Ok((x, res, SolverKind::ConjugateGradient))
}

/// Eliminates the constraints symmetrically and solves for the free dofs.
pub fn solve_with(system: &SparseSystem, opts: &SolveOptions) -> Result<FieldSolution> {
    let k = &system.matrix;
    let n = k.n;
    let mut coeffs = vec![0.0; n];
    let mut free_index = vec![usize::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        match system.constraints.get(i) {
            Some(v) => coeffs[i] = v,
            None => {
                free_index[i] = free.len();
                free.push(i);
            }
        }
    }
    let mut rows = Vec::with_capacity(free.len());
    let mut vals = Vec::with_capacity(free.len());
    let mut rhs = Vec::with_capacity(free.len());
    for &i in &free {
        let (c, v) = k.row(i);
        let mut r = Vec::with_capacity(c.len());
        let mut rv = Vec::with_capacity(c.len());
        let mut b = system.rhs[i];
        for (j, a) in c.iter().zip(v) {
            if free_index[*j] != usize::MAX {
                r.push(free_index[*j]);
                rv.push(*a);
            } else {
                b -= a * coeffs[*j];
            }
        }
        rows.push(r);
        vals.push(rv);
        rhs.push(b);
    }
    let mut reduced = CsrMatrix::from_pattern(rows);
    reduced.vals = vals.into_iter().flatten().collect();
    let (x, residual, method) = solve_spd(&reduced, &rhs, opts)?;
    for (f, v) in free.iter().zip(x) {
        coeffs[*f] = v;
    }
    Ok(FieldSolution { disc: system.disc.clone(), coeffs, residual, method })
}

pub fn solve(system: &SparseSystem) -> Result<FieldSolution> {
    solve_with(system, &SolveOptions::default())
}

/// Field values at a physical point.
pub fn eval_field(sol: &FieldSolution, x: &[f64; 3]) -> Result<PointValues> {
    let (cell, xi) = sol.disc.mesh.locate(x).ok_or_else(|| FemError::PointOutsideMesh(x.to_vec()))?;
    eval_in_cell(sol, cell, &xi)
}

/// Field values at reference point `xi` of `cell`, using that cell's
/// polynomials (one-sided on cell boundaries).
pub fn eval_in_cell(sol: &FieldSolution, cell: usize, xi: &[f64; 3]) -> Result<PointValues> {
    let disc = &sol.disc;
    if cell >= disc.mesh.n_cells() {
        return Err(FemError::InvalidParam(format!("cell {cell} out of range")));
    }
    let h1 = bezier_eval_closed(disc.u_space().degree, disc.mesh.dim, xi);
    let (vv, vc) = match disc.p_space() {
        Some(ps) => {
            let v = eval_vector_shapes_at(&ps, xi)?;
            (v.values, v.curls)
        }
        None => (Vec::new(), Vec::new()),
    };
    Ok(combine(disc, cell, &sol.coeffs, &h1.values, &h1.grads, &vv, &vc))
}
