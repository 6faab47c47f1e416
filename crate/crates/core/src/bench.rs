//! Benchmark drivers: antiplane shear with a manufactured solution,
//! cylindrical bending of a plate and the characteristic-length sweep on a
//! cube.
//!
//! `p` is the H¹ degree of the displacement; the microdistortion uses the
//! Nédélec space of degree `p - 1`, so `p = 1` pairs linear displacements
//! with the lowest-order first-family element.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_antiplane, assemble_cauchy3d, assemble_full3d, assemble_full3d_split, default_degree, l2_error_p,
    l2_error_u, integrate_fields, Loads, SparseSystem,
};
use crate::dirichlet::{embed_dirichlet_with, facets_with_tags, BoundaryData, Coupling};
use crate::error::{FemError, Result};
use crate::materials::MaterialParams;
use crate::mesh::{generate_box, generate_disk_rings, Mesh};
use crate::nedelec::{SpaceDescriptor, SpaceFamily};
use crate::simplex::Dim;
use crate::solver::{eval_field, solve, FieldSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    Antiplane,
    Bending,
    LcSweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub benchmark: Benchmark,
    /// H¹ degree of the displacement.
    pub p: usize,
    /// Number of ladder levels (antiplane) or refinement level (others).
    pub refine: usize,
    pub family: SpaceFamily,
    /// Characteristic lengths; empty selects the benchmark default.
    pub lc: Vec<f64>,
    /// Overrides the benchmark's material parameters.
    pub params: Option<MaterialParams>,
    pub out: Option<PathBuf>,
    /// Replaces the generated mesh (single run, no ladder).
    pub mesh: Option<PathBuf>,
    /// Tangential data for the microdistortion; `None` selects the
    /// benchmark default (discrete gradient for the sweep, projection
    /// otherwise).
    pub coupling: Option<Coupling>,
}

impl BenchConfig {
    pub fn new(benchmark: Benchmark, p: usize, refine: usize, family: SpaceFamily) -> Self {
        Self { benchmark, p, refine, family, lc: Vec::new(), params: None, out: None, mesh: None, coupling: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(FemError::InvalidParam("p must be at least 1".into()));
        }
        match self.family {
            SpaceFamily::NedelecI => {}
            SpaceFamily::NedelecII if self.p >= 2 => {}
            SpaceFamily::NedelecII => {
                return Err(FemError::InvalidParam("the second family needs p >= 2".into()))
            }
            SpaceFamily::H1Bezier => return Err(FemError::InvalidParam("family must be a Nedelec family".into())),
        }
        if self.lc.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(FemError::InvalidParam("L_c values must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn spaces(&self, dim: Dim) -> Result<(SpaceDescriptor, SpaceDescriptor)> {
        self.validate()?;
        Ok((
            SpaceDescriptor::new(SpaceFamily::H1Bezier, self.p, dim)?,
            SpaceDescriptor::new(self.family, self.p - 1, dim)?,
        ))
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling.unwrap_or(match self.benchmark {
            Benchmark::LcSweep => Coupling::DiscreteGradient,
            _ => Coupling::Projection,
        })
    }

    fn load_mesh(&self) -> Result<Option<Mesh>> {
        self.mesh.as_deref().map(Mesh::read_json).transpose()
    }
}

fn family_name(f: SpaceFamily) -> &'static str {
    match f {
        SpaceFamily::NedelecI => "nedelec1",
        SpaceFamily::NedelecII => "nedelec2",
        SpaceFamily::H1Bezier => "h1",
    }
}

/// Least-squares slope of `log y` against `log x` over the last three
/// points (or all if fewer).
pub fn fitted_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let k = n.min(3);
    let lx: Vec<f64> = xs[n - k..n].iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys[n - k..n].iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k as f64;
    let my = ly.iter().sum::<f64>() / k as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn solve_checked(system: &SparseSystem) -> Result<FieldSolution> {
    let sol = solve(system)?;
    debug_assert!(sol.residual <= crate::solver::RESIDUAL_TOL);
    Ok(sol)
}

// ---------------------------------------------------------------- antiplane

pub const DISK_RADIUS: f64 = 10.0;

/// Manufactured antiplane solution `ũ = sin(r²/5)`.
pub mod antiplane_data {
    pub fn u(x: &[f64; 3]) -> f64 {
        ((x[0] * x[0] + x[1] * x[1]) / 5.0).sin()
    }

    pub fn grad_u(x: &[f64; 3]) -> [f64; 3] {
        let c = ((x[0] * x[0] + x[1] * x[1]) / 5.0).cos();
        [0.4 * x[0] * c, 0.4 * x[1] * c, 0.0]
    }

    pub fn m(x: &[f64; 3]) -> [f64; 3] {
        [-x[0] / 5.0, -x[1] / 5.0, 0.0]
    }

    pub fn f(x: &[f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let s = r2 / 5.0;
        (2.0 * r2 * s.sin() - 10.0 * s.cos() - 5.0) / 25.0
    }

    /// `p̃ = (m + μ_e ∇ũ)/(μ_e + μ_micro)` with unit moduli.
    pub fn p(x: &[f64; 3]) -> [f64; 3] {
        let g = grad_u(x);
        let m = m(x);
        [0.5 * (m[0] + g[0]), 0.5 * (m[1] + g[1]), 0.0]
    }
}

/// All moduli one.
pub fn antiplane_params() -> MaterialParams {
    MaterialParams {
        lambda_e: 1.0,
        mu_e: 1.0,
        lambda_micro: 1.0,
        mu_micro: 1.0,
        mu_c: 0.0,
        mu_macro: 1.0,
        lambda_macro: 1.0,
        lc: 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntiplaneRow {
    pub p: usize,
    pub family: String,
    pub level: usize,
    pub cells: usize,
    pub h: f64,
    pub dofs: usize,
    pub u_error: f64,
    pub p_error: f64,
    pub rot_norm: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntiplaneReport {
    pub rows: Vec<AntiplaneRow>,
    pub u_slope: Option<f64>,
    pub p_slope: Option<f64>,
}

/// Ring count of antiplane ladder level `l`.
pub fn antiplane_rings(level: usize) -> usize {
    8 << level
}

/// Solves the antiplane problem on one mesh.
pub fn antiplane_single(cfg: &BenchConfig, mesh: Mesh, level: usize) -> Result<AntiplaneRow> {
    let (us, ps) = cfg.spaces(Dim::Two)?;
    let params = cfg.params.unwrap_or_else(antiplane_params);
    let mesh = Arc::new(mesh);
    let f = antiplane_data::f;
    let m = antiplane_data::m;
    let mut sys = assemble_antiplane(mesh.clone(), &params, us, ps, Some(&f), Some(&m))?;
    let value = |x: &[f64; 3]| [antiplane_data::u(x), 0.0, 0.0];
    let gradient = |x: &[f64; 3]| [antiplane_data::grad_u(x), [0.0; 3], [0.0; 3]];
    let data = BoundaryData { value: &value, gradient: &gradient };
    sys.constraints = embed_dirichlet_with(&sys.disc, &mesh.boundary_facets, &data, cfg.coupling())?;
    let sol = solve_checked(&sys)?;
    let deg = (default_degree(cfg.p) + 2).min(crate::quadrature::MAX_DEGREE);
    let u_error = l2_error_u(&sol, &value, deg)?;
    let p_error = l2_error_p(&sol, &|x| [antiplane_data::p(x), [0.0; 3], [0.0; 3]], deg)?;
    let mut rot2 = 0.0;
    integrate_fields(&sol.disc, &sol.coeffs, deg, |_, _, w, v| rot2 += w * v.curl_p[0][2].powi(2))?;
    Ok(AntiplaneRow {
        p: cfg.p,
        family: family_name(cfg.family).into(),
        level,
        cells: mesh.n_cells(),
        h: mesh.h_max(),
        dofs: sol.disc.n_dofs(),
        u_error,
        p_error,
        rot_norm: rot2.sqrt(),
        residual: sol.residual,
    })
}

/// h-refinement ladder on ring meshes of the disk of radius 10.
pub fn run_antiplane(cfg: &BenchConfig) -> Result<AntiplaneReport> {
    cfg.validate()?;
    let rows = match cfg.load_mesh()? {
        Some(mesh) => vec![antiplane_single(cfg, mesh, 0)?],
        None => (0..cfg.refine.max(1))
            .map(|l| antiplane_single(cfg, generate_disk_rings(DISK_RADIUS, antiplane_rings(l))?, l))
            .collect::<Result<Vec<_>>>()?,
    };
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let u_slope = fitted_slope(&hs, &rows.iter().map(|r| r.u_error).collect::<Vec<_>>());
    let p_slope = fitted_slope(&hs, &rows.iter().map(|r| r.p_error).collect::<Vec<_>>());
    Ok(AntiplaneReport { rows, u_slope, p_slope })
}

// ------------------------------------------------------------------ bending

pub const BENDING_KAPPA: f64 = 0.07;

/// Analytic cylindrical bending solution.
pub mod bending_data {
    use super::BENDING_KAPPA as K;
    use crate::materials::Mat3;

    /// Through-thickness profile with `P₁₁ = -κ g(z)`.
    pub fn g(z: f64) -> f64 {
        let s82 = 82f64.sqrt();
        (41.0 * z + 20.0 * s82 * (41f64 / 2.0).sqrt().cosh().recip() * (s82 * z).sinh()) / 1681.0
    }

    pub fn u(x: &[f64; 3]) -> [f64; 3] {
        [-K * x[0] * x[2], 0.0, K * x[0] * x[0] / 2.0]
    }

    /// Prescribed displacement `u - (0, 0, 3.5)`.
    pub fn u_tilde(x: &[f64; 3]) -> [f64; 3] {
        let u = u(x);
        [u[0], u[1], u[2] - 3.5]
    }

    pub fn grad_u(x: &[f64; 3]) -> Mat3 {
        [[-K * x[2], 0.0, -K * x[0]], [0.0; 3], [K * x[0], 0.0, 0.0]]
    }

    pub fn p(x: &[f64; 3]) -> Mat3 {
        [[-K * g(x[2]), 0.0, -K * x[0]], [0.0; 3], [K * x[0], 0.0, 0.0]]
    }
}

pub fn bending_params() -> MaterialParams {
    MaterialParams {
        lambda_e: 0.0,
        mu_e: 0.5,
        lambda_micro: 0.0,
        mu_micro: 20.0,
        mu_c: 0.0,
        mu_macro: 0.5,
        lambda_macro: 0.0,
        lc: 1.0,
    }
}

/// Plate subdivision `(n_x = n_y, n_z)` at refinement level `r`. The
/// in-plane count is odd so the centerline `x = y = 0` avoids element faces.
pub fn bending_divisions(refine: usize) -> (usize, usize) {
    (2 * refine + 3, 5 << refine)
}

pub fn bending_mesh(refine: usize) -> Result<Mesh> {
    let (nxy, nz) = bending_divisions(refine);
    generate_box(&[(-10.0, 10.0), (-10.0, 10.0), (-0.5, 0.5)], &[nxy, nxy, nz])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub z: f64,
    pub p11: f64,
    pub exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendingReport {
    pub p: usize,
    pub family: String,
    pub cells: usize,
    pub dofs: usize,
    pub profile: Vec<ProfilePoint>,
    /// `max |P₁₁ - P̃₁₁|` over the profile divided by `max |P̃₁₁|`.
    pub profile_deviation: f64,
    pub u_error: f64,
    pub p_error: f64,
    pub residual: f64,
}

pub const PROFILE_POINTS: usize = 101;

pub fn run_bending(cfg: &BenchConfig) -> Result<BendingReport> {
    let (us, ps) = cfg.spaces(Dim::Three)?;
    let mut params = cfg.params.unwrap_or_else(bending_params);
    if let Some(lc) = cfg.lc.first() {
        params.lc = *lc;
    }
    let mesh = Arc::new(match cfg.load_mesh()? {
        Some(m) => m,
        None => bending_mesh(cfg.refine)?,
    });
    let mut sys = assemble_full3d(mesh.clone(), &params, us, ps, Loads::default())?;
    let facets = facets_with_tags(&mesh, &["xmin", "xmax"])?;
    let data = BoundaryData { value: &bending_data::u_tilde, gradient: &bending_data::grad_u };
    sys.constraints = embed_dirichlet_with(&sys.disc, &facets, &data, cfg.coupling())?;
    let sol = solve_checked(&sys)?;
    let mut profile = Vec::with_capacity(PROFILE_POINTS);
    for i in 0..PROFILE_POINTS {
        let z = -0.5 + i as f64 / (PROFILE_POINTS - 1) as f64;
        let v = eval_field(&sol, &[0.0, 0.0, z])?;
        profile.push(ProfilePoint { z, p11: v.p[0][0], exact: -BENDING_KAPPA * bending_data::g(z) });
    }
    let amp = profile.iter().fold(0.0f64, |m, q| m.max(q.exact.abs()));
    let dev = profile.iter().fold(0.0f64, |m, q| m.max((q.p11 - q.exact).abs()));
    let deg = (default_degree(cfg.p) + 2).min(crate::quadrature::MAX_DEGREE);
    Ok(BendingReport {
        p: cfg.p,
        family: family_name(cfg.family).into(),
        cells: mesh.n_cells(),
        dofs: sol.disc.n_dofs(),
        profile_deviation: dev / amp,
        u_error: l2_error_u(&sol, &bending_data::u_tilde, deg)?,
        p_error: l2_error_p(&sol, &bending_data::p, deg)?,
        residual: sol.residual,
        profile,
    })
}

// ----------------------------------------------------------------- L_c sweep

/// Cube boundary data; each pair of opposite faces moves one component.
pub mod cube_data {
    use super::PI;
    use crate::materials::Mat3;

    const TOL: f64 = 1e-9;

    fn bump(a: f64, b: f64) -> (f64, f64, f64) {
        // (1-a²) sin(π(1-b²)) / 10 and its partials in a and b
        let s = (PI * (1.0 - b * b)).sin();
        let c = (PI * (1.0 - b * b)).cos();
        ((1.0 - a * a) * s / 10.0, -2.0 * a * s / 10.0, (1.0 - a * a) * c * (-2.0 * PI * b) / 10.0)
    }

    fn face(x: &[f64; 3]) -> Option<usize> {
        (0..3).find(|&k| (x[k].abs() - 1.0).abs() < TOL)
    }

    pub fn u(x: &[f64; 3]) -> [f64; 3] {
        match face(x) {
            Some(0) => [bump(x[1], x[2]).0, 0.0, 0.0],
            Some(1) => [0.0, bump(x[0], x[2]).0, 0.0],
            Some(2) => [0.0, 0.0, bump(x[1], x[0]).0],
            _ => [0.0; 3],
        }
    }

    /// Tangential gradient rows on the face containing `x`; the normal
    /// component is irrelevant for the boundary projections and set to 0.
    pub fn grad_u(x: &[f64; 3]) -> Mat3 {
        let mut g = [[0.0; 3]; 3];
        match face(x) {
            Some(0) => {
                let (_, da, db) = bump(x[1], x[2]);
                g[0] = [0.0, da, db];
            }
            Some(1) => {
                let (_, da, db) = bump(x[0], x[2]);
                g[1] = [da, 0.0, db];
            }
            Some(2) => {
                let (_, da, db) = bump(x[1], x[0]);
                g[2] = [db, da, 0.0];
            }
            _ => {}
        }
        g
    }
}

/// `λ_macro = 2, μ_macro = 1, λ_micro = 10, μ_micro = 5, μ_c = 1`.
pub fn sweep_params() -> Result<MaterialParams> {
    MaterialParams::from_macro_micro(2.0, 1.0, 10.0, 5.0, 1.0, 1.0)
}

/// 16 log-spaced values from `1e-4` to `1e3`.
pub fn default_lc_grid() -> Vec<f64> {
    (0..16).map(|i| 10f64.powf(-4.0 + 7.0 * i as f64 / 15.0)).collect()
}

/// Cube subdivisions per side at refinement level `r`: 48 tets at `r = 0`.
pub fn cube_divisions(refine: usize) -> usize {
    2 << refine
}

pub fn cube_mesh(refine: usize) -> Result<Mesh> {
    let n = cube_divisions(refine);
    generate_box(&[(-1.0, 1.0); 3], &[n, n, n])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lc: f64,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub p: usize,
    pub family: String,
    pub cells: usize,
    pub dofs: usize,
    pub rows: Vec<SweepRow>,
    pub i_macro: f64,
    pub i_micro: f64,
    pub cauchy_residuals: [f64; 2],
}

/// Energy `½ xᵀ K x` of a Cauchy solve with the cube data.
pub fn cube_cauchy_energy(mesh: Arc<Mesh>, lambda: f64, mu: f64, p: usize) -> Result<(f64, f64)> {
    let us = SpaceDescriptor::new(SpaceFamily::H1Bezier, p, Dim::Three)?;
    let mut sys = assemble_cauchy3d(mesh.clone(), lambda, mu, us, None)?;
    let data = BoundaryData { value: &cube_data::u, gradient: &cube_data::grad_u };
    sys.constraints = embed_dirichlet_with(&sys.disc, &mesh.boundary_facets, &data, Coupling::Projection)?;
    let sol = solve_checked(&sys)?;
    Ok((0.5 * sys.matrix.bilinear(&sol.coeffs, &sol.coeffs), sol.residual))
}

pub fn run_lc_sweep(cfg: &BenchConfig) -> Result<SweepReport> {
    let (us, ps) = cfg.spaces(Dim::Three)?;
    let params = match cfg.params {
        Some(p) => p,
        None => sweep_params()?,
    };
    let mesh = Arc::new(match cfg.load_mesh()? {
        Some(m) => m,
        None => cube_mesh(cfg.refine)?,
    });
    let lcs = if cfg.lc.is_empty() { default_lc_grid() } else { cfg.lc.clone() };
    let split = assemble_full3d_split(mesh.clone(), &params, us, ps, Loads::default())?;
    let data = BoundaryData { value: &cube_data::u, gradient: &cube_data::grad_u };
    let constraints = embed_dirichlet_with(&split.disc, &mesh.boundary_facets, &data, cfg.coupling())?;
    let rows = lcs
        .par_iter()
        .map(|&lc| {
            let mut sys = split.with_lc(lc);
            sys.constraints = constraints.clone();
            let sol = solve_checked(&sys)?;
            Ok(SweepRow { lc, energy: 0.5 * sys.matrix.bilinear(&sol.coeffs, &sol.coeffs), residual: sol.residual })
        })
        .collect::<Result<Vec<_>>>()?;
    let (i_macro, r0) = cube_cauchy_energy(mesh.clone(), params.lambda_macro, params.mu_macro, cfg.p)?;
    let (i_micro, r1) = cube_cauchy_energy(mesh.clone(), params.lambda_micro, params.mu_micro, cfg.p)?;
    Ok(SweepReport {
        p: cfg.p,
        family: family_name(cfg.family).into(),
        cells: mesh.n_cells(),
        dofs: split.disc.n_dofs(),
        rows,
        i_macro,
        i_micro,
        cauchy_residuals: [r0, r1],
    })
}

// ------------------------------------------------------------------- output

fn io_err(path: &Path, e: impl std::fmt::Display) -> FemError {
    FemError::Io(format!("{}: {e}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Result of any benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "benchmark", rename_all = "kebab-case")]
pub enum Report {
    Antiplane(AntiplaneReport),
    Bending(BendingReport),
    LcSweep(SweepReport),
}

pub fn run(cfg: &BenchConfig) -> Result<Report> {
    Ok(match cfg.benchmark {
        Benchmark::Antiplane => Report::Antiplane(run_antiplane(cfg)?),
        Benchmark::Bending => Report::Bending(run_bending(cfg)?),
        Benchmark::LcSweep => Report::LcSweep(run_lc_sweep(cfg)?),
    })
}

/// Writes `<name>.csv` (one row per run or sample) and `<name>.json` with
/// the full report into `dir`. Returns the written paths.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let (name, csv_path) = match report {
        Report::Antiplane(r) => {
            let p = dir.join("antiplane.csv");
            write_csv(&p, &r.rows)?;
            ("antiplane", p)
        }
        Report::Bending(r) => {
            let p = dir.join("bending_profile.csv");
            write_csv(&p, &r.profile)?;
            ("bending", p)
        }
        Report::LcSweep(r) => {
            let p = dir.join("lc_sweep.csv");
            write_csv(&p, &r.rows)?;
            ("lc_sweep", p)
        }
    };
    let json = dir.join(format!("{name}.json"));
    write_json(&json, report)?;
    Ok(vec![csv_path, json])
}
