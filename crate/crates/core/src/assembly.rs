//! Global assembly for the antiplane and the full three-dimensional relaxed
//! micromorphic model, plus the classical Cauchy system used for the energy
//! bounds.
//!
//! Unknowns are laid out as `[u_0, .., u_{c-1}, P_0, .., P_{r-1}]`, one block
//! per displacement component and per row of the microdistortion. Vector
//! shapes map covariantly (`J^{-T} θ`), curls contravariantly
//! (`J c / det J`).
//!
//! On affine cells every bilinear term is a congruence transform of a
//! reference moment `Σ_q w_q a(ξ_q) b(ξ_q)ᵀ`, so the moments are tabulated
//! once per mesh and each element only pays for a few 3×3 products.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::dirichlet::ConstraintSet;
use crate::error::{FemError, Result};
use crate::materials::{contract, isotropic, local_energy_density, sym, MaterialParams, Mat3};
use crate::mesh::{matvec, Mesh};
use crate::nedelec::{eval_vector_shapes, local_keys, SpaceDescriptor, SpaceFamily};
use crate::quadrature::{rule_for, MAX_DEGREE};
use crate::simplex::{bezier_eval, Dim, PolytopeKind};
use crate::solver::FieldSolution;
use crate::sparse::CsrMatrix;

pub type ScalarFn<'a> = dyn Fn(&[f64; 3]) -> f64 + Sync + 'a;
pub type VectorFn<'a> = dyn Fn(&[f64; 3]) -> [f64; 3] + Sync + 'a;
pub type TensorFn<'a> = dyn Fn(&[f64; 3]) -> Mat3 + Sync + 'a;

/// Identity of a global basis function independent of cell numbering.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalKey {
    pub kind: PolytopeKind,
    /// Sorted global vertex ids of the owning polytope.
    pub verts: Vec<usize>,
    pub family: u16,
    pub exps: Vec<u16>,
}

/// Global numbering of one scalar or vector space. Numbers follow the sorted
/// order of [`GlobalKey`]s, so they do not depend on the order of cells.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub space: SpaceDescriptor,
    pub n_dofs: usize,
    pub cell_dofs: Vec<Vec<usize>>,
    pub keys: Vec<GlobalKey>,
    by_polytope: HashMap<Vec<usize>, Vec<usize>>,
}

impl DofMap {
    pub fn build(mesh: &Mesh, space: SpaceDescriptor) -> Result<Self> {
        if space.dim != mesh.dim {
            return Err(FemError::SpaceMismatch("space and mesh dimension differ".into()));
        }
        let locals = local_keys(&space)?;
        let per_cell: Vec<Vec<GlobalKey>> = mesh
            .cells
            .iter()
            .map(|cell| {
                locals
                    .iter()
                    .map(|k| GlobalKey {
                        kind: k.polytope.kind,
                        verts: k.polytope.vertices(mesh.dim).iter().map(|&v| cell[v]).collect(),
                        family: k.family,
                        exps: k.exps.clone(),
                    })
                    .collect()
            })
            .collect();
        let mut keys: Vec<GlobalKey> = per_cell.iter().flatten().cloned().collect();
        keys.sort_unstable();
        keys.dedup();
        let index: HashMap<&GlobalKey, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let cell_dofs = per_cell.iter().map(|ks| ks.iter().map(|k| index[k]).collect()).collect();
        let mut by_polytope: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (i, k) in keys.iter().enumerate() {
            by_polytope.entry(k.verts.clone()).or_default().push(i);
        }
        Ok(Self { space, n_dofs: keys.len(), cell_dofs, keys, by_polytope })
    }

    /// Dofs owned by the polytope with the given sorted global vertices.
    pub fn dofs_on(&self, verts: &[usize]) -> &[usize] {
        self.by_polytope.get(verts).map_or(&[], Vec::as_slice)
    }
}

/// Fields of one problem: `u_comps` copies of an H¹ space and optionally
/// `p_rows` copies of an H(curl) space.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub u_map: DofMap,
    pub u_comps: usize,
    pub p_map: Option<DofMap>,
    pub p_rows: usize,
}

impl Discretization {
    pub fn new(
        mesh: Arc<Mesh>,
        u_space: SpaceDescriptor,
        u_comps: usize,
        p_space: Option<SpaceDescriptor>,
        p_rows: usize,
    ) -> Result<Self> {
        if u_space.family != SpaceFamily::H1Bezier {
            return Err(FemError::SpaceMismatch("displacement space must be H1".into()));
        }
        let u_map = DofMap::build(&mesh, u_space)?;
        let p_map = match p_space {
            Some(s) if !s.is_vector() => {
                return Err(FemError::SpaceMismatch("microdistortion space must be H(curl)".into()))
            }
            Some(s) => Some(DofMap::build(&mesh, s)?),
            None => None,
        };
        let p_rows = if p_map.is_some() { p_rows } else { 0 };
        Ok(Self { mesh, u_map, u_comps, p_map, p_rows })
    }

    pub fn u_space(&self) -> SpaceDescriptor {
        self.u_map.space
    }

    pub fn p_space(&self) -> Option<SpaceDescriptor> {
        self.p_map.as_ref().map(|m| m.space)
    }

    pub fn n_u(&self) -> usize {
        self.u_comps * self.u_map.n_dofs
    }

    pub fn n_p(&self) -> usize {
        self.p_map.as_ref().map_or(0, |m| self.p_rows * m.n_dofs)
    }

    pub fn n_dofs(&self) -> usize {
        self.n_u() + self.n_p()
    }

    pub fn u_dof(&self, comp: usize, d: usize) -> usize {
        comp * self.u_map.n_dofs + d
    }

    pub fn p_dof(&self, row: usize, d: usize) -> usize {
        let n = self.p_map.as_ref().expect("no microdistortion space").n_dofs;
        self.n_u() + row * n + d
    }

    fn n_h(&self) -> usize {
        self.u_map.cell_dofs.first().map_or(0, Vec::len)
    }

    fn n_n(&self) -> usize {
        self.p_map.as_ref().and_then(|m| m.cell_dofs.first()).map_or(0, Vec::len)
    }

    pub fn local_len(&self) -> usize {
        self.u_comps * self.n_h() + self.p_rows * self.n_n()
    }

    /// Global dofs of a cell in local order.
    pub fn cell_dofs(&self, cell: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.local_len());
        for c in 0..self.u_comps {
            out.extend(self.u_map.cell_dofs[cell].iter().map(|&d| self.u_dof(c, d)));
        }
        if let Some(pm) = &self.p_map {
            for r in 0..self.p_rows {
                out.extend(pm.cell_dofs[cell].iter().map(|&d| self.p_dof(r, d)));
            }
        }
        out
    }

    /// Matrix pattern: every dof couples to all dofs of the cells it touches.
    fn pattern(&self) -> Vec<Vec<usize>> {
        let cells_of = |map: &DofMap| {
            let mut out = vec![Vec::new(); map.n_dofs];
            for (c, ds) in map.cell_dofs.iter().enumerate() {
                for &d in ds {
                    out[d].push(c);
                }
            }
            out
        };
        let row_for = |cells: &Vec<usize>| {
            let mut r: Vec<usize> = cells.iter().flat_map(|&c| self.cell_dofs(c)).collect();
            r.sort_unstable();
            r.dedup();
            r
        };
        let u_rows: Vec<Vec<usize>> = cells_of(&self.u_map).par_iter().map(row_for).collect();
        let p_rows: Vec<Vec<usize>> = match &self.p_map {
            Some(pm) => cells_of(pm).par_iter().map(row_for).collect(),
            None => Vec::new(),
        };
        let mut rows = Vec::with_capacity(self.n_dofs());
        for _ in 0..self.u_comps {
            rows.extend(u_rows.iter().cloned());
        }
        for _ in 0..self.p_rows {
            rows.extend(p_rows.iter().cloned());
        }
        rows
    }
}

/// Reference shape values at the points of a volume rule.
pub(crate) struct RefTables {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub h1_vals: Vec<Vec<f64>>,
    pub h1_grads: Vec<Vec<[f64; 3]>>,
    pub vec_vals: Vec<Vec<[f64; 3]>>,
    pub vec_curls: Vec<Vec<[f64; 3]>>,
}

impl RefTables {
    pub fn new(disc: &Discretization, degree: usize) -> Result<Self> {
        let dim = disc.mesh.dim;
        let rule = rule_for(dim, degree.min(MAX_DEGREE))?;
        let k = disc.u_space().degree;
        let mut t = RefTables {
            points: rule.ref_points.clone(),
            weights: rule.weights.clone(),
            h1_vals: Vec::new(),
            h1_grads: Vec::new(),
            vec_vals: Vec::new(),
            vec_curls: Vec::new(),
        };
        for cp in &rule.points {
            let s = bezier_eval(k, cp)?;
            t.h1_vals.push(s.values);
            t.h1_grads.push(s.grads);
            if let Some(ps) = disc.p_space() {
                let v = eval_vector_shapes(&ps, cp)?;
                t.vec_vals.push(v.values);
                t.vec_curls.push(v.curls);
            }
        }
        Ok(t)
    }
}

/// Default volume quadrature degree for H¹ degree `k`.
pub fn default_degree(k: usize) -> usize {
    (2 * k + 2).min(MAX_DEGREE)
}

fn outer_acc(m: &mut Mat3, w: f64, a: &[f64; 3], b: &[f64; 3]) {
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] += w * a[i] * b[j];
        }
    }
}

/// `A M Aᵀ`
fn congruence(a: &Mat3, m: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = (0..3).map(|k| a[i][k] * m[k][j]).sum();
        }
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| t[i][k] * a[j][k]).sum();
        }
    }
    out
}

fn scaled(m: Mat3, s: f64) -> Mat3 {
    m.map(|row| row.map(|v| v * s))
}

fn tr(m: &Mat3) -> f64 {
    m[0][0] + m[1][1] + m[2][2]
}

/// Entry of `λ trA trB + (μ+μ_c)⟨A,B⟩ + (μ-μ_c)⟨A,Bᵀ⟩` for `A = e_r ⊗ v`,
/// `B = e_s ⊗ w` given `S = Σ v wᵀ`.
fn kform(s: &Mat3, r: usize, c: usize, lambda: f64, mu: f64, mu_c: f64) -> f64 {
    let diag = if r == c { tr(s) } else { 0.0 };
    lambda * s[r][c] + (mu + mu_c) * diag + (mu - mu_c) * s[c][r]
}

struct Moments {
    gg: Vec<Mat3>,
    gt: Vec<Mat3>,
    tt: Vec<Mat3>,
    cc: Vec<Mat3>,
}

impl Moments {
    fn new(t: &RefTables, nh: usize, nn: usize) -> Self {
        let mut m = Moments {
            gg: vec![[[0.0; 3]; 3]; nh * nh],
            gt: vec![[[0.0; 3]; 3]; nh * nn],
            tt: vec![[[0.0; 3]; 3]; nn * nn],
            cc: vec![[[0.0; 3]; 3]; nn * nn],
        };
        for (q, w) in t.weights.iter().enumerate() {
            let g = &t.h1_grads[q];
            for a in 0..nh {
                for b in 0..nh {
                    outer_acc(&mut m.gg[a * nh + b], *w, &g[a], &g[b]);
                }
            }
            if nn == 0 {
                continue;
            }
            let th = &t.vec_vals[q];
            let cu = &t.vec_curls[q];
            for a in 0..nh {
                for b in 0..nn {
                    outer_acc(&mut m.gt[a * nn + b], *w, &g[a], &th[b]);
                }
            }
            for a in 0..nn {
                for b in 0..nn {
                    outer_acc(&mut m.tt[a * nn + b], *w, &th[a], &th[b]);
                    outer_acc(&mut m.cc[a * nn + b], *w, &cu[a], &cu[b]);
                }
            }
        }
        m
    }
}

/// Bilinear form being assembled or evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    /// `(μ_e+μ_c)(∇u-p)·(∇δu-δp) + μ_micro p·δp + μ_macro L_c² rot p rot δp`
    Antiplane(MaterialParams),
    /// Full relaxed micromorphic form with row-wise Curl.
    Micromorphic(MaterialParams),
    /// Classical isotropic elasticity.
    Cauchy { lambda: f64, mu: f64 },
}

/// Right-hand side data. `body` pairs with the displacement components,
/// `moment` row `r` with row `r` of the microdistortion.
#[derive(Clone, Copy, Default)]
pub struct Loads<'a> {
    pub body: Option<&'a VectorFn<'a>>,
    pub moment: Option<&'a TensorFn<'a>>,
}

struct Local {
    base: Vec<f64>,
    curl: Vec<f64>,
    rhs: Vec<f64>,
}

struct Assembler<'a> {
    disc: &'a Discretization,
    tables: RefTables,
    moments: Moments,
    model: Model,
    loads: Loads<'a>,
}

impl Assembler<'_> {
    fn element(&self, cell: usize) -> Local {
        let d = self.disc;
        let map = &d.mesh.maps[cell];
        let ad = map.abs_det();
        let jit = &map.inv_t;
        let jac = &map.jac;
        let (nh, nn) = (d.n_h(), d.n_n());
        let (uc, pr) = (d.u_comps, d.p_rows);
        let n = d.local_len();
        let iu = |c: usize, a: usize| c * nh + a;
        let ip = |r: usize, b: usize| uc * nh + r * nn + b;
        let mut base = vec![0.0; n * n];
        let mut curl = vec![0.0; if nn > 0 { n * n } else { 0 }];
        let m = &self.moments;
        // JᵀJ for the curl moments
        let mut jtj = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                jtj[i][j] = (0..3).map(|k| jac[k][i] * jac[k][j]).sum();
            }
        }
        let sgg = |a: usize, b: usize| scaled(congruence(jit, &m.gg[a * nh + b]), ad);
        let sgt = |a: usize, b: usize| scaled(congruence(jit, &m.gt[a * nn + b]), ad);
        let stt = |a: usize, b: usize| scaled(congruence(jit, &m.tt[a * nn + b]), ad);
        let scc = |a: usize, b: usize| contract(&jtj, &m.cc[a * nn + b]) / ad;

        match self.model {
            Model::Cauchy { lambda, mu } => {
                for a in 0..nh {
                    for b in 0..nh {
                        let s = sgg(a, b);
                        for r in 0..uc {
                            for c in 0..uc {
                                base[iu(r, a) * n + iu(c, b)] = kform(&s, r, c, lambda, mu, 0.0);
                            }
                        }
                    }
                }
            }
            Model::Antiplane(p) => {
                let me = p.mu_e + p.mu_c;
                for a in 0..nh {
                    for b in 0..nh {
                        base[iu(0, a) * n + iu(0, b)] = me * tr(&sgg(a, b));
                    }
                    for b in 0..nn {
                        let v = -me * tr(&sgt(a, b));
                        base[iu(0, a) * n + ip(0, b)] = v;
                        base[ip(0, b) * n + iu(0, a)] = v;
                    }
                }
                for a in 0..nn {
                    for b in 0..nn {
                        base[ip(0, a) * n + ip(0, b)] = (me + p.mu_micro) * tr(&stt(a, b));
                        curl[ip(0, a) * n + ip(0, b)] = p.mu_macro * scc(a, b);
                    }
                }
            }
            Model::Micromorphic(p) => {
                for a in 0..nh {
                    for b in 0..nh {
                        let s = sgg(a, b);
                        for r in 0..uc {
                            for c in 0..uc {
                                base[iu(r, a) * n + iu(c, b)] = kform(&s, r, c, p.lambda_e, p.mu_e, p.mu_c);
                            }
                        }
                    }
                    for b in 0..nn {
                        let s = sgt(a, b);
                        for r in 0..uc {
                            for c in 0..pr {
                                let v = -kform(&s, r, c, p.lambda_e, p.mu_e, p.mu_c);
                                base[iu(r, a) * n + ip(c, b)] = v;
                                base[ip(c, b) * n + iu(r, a)] = v;
                            }
                        }
                    }
                }
                for a in 0..nn {
                    for b in 0..nn {
                        let s = stt(a, b);
                        let cc = p.mu_macro * scc(a, b);
                        for r in 0..pr {
                            for c in 0..pr {
                                base[ip(r, a) * n + ip(c, b)] = kform(&s, r, c, p.lambda_e, p.mu_e, p.mu_c)
                                    + kform(&s, r, c, p.lambda_micro, p.mu_micro, 0.0);
                            }
                            curl[ip(r, a) * n + ip(r, b)] = cc;
                        }
                    }
                }
            }
        }

        let mut rhs = vec![0.0; n];
        if self.loads.body.is_some() || self.loads.moment.is_some() {
            let t = &self.tables;
            for (q, w) in t.weights.iter().enumerate() {
                let x = map.forward(&t.points[q]);
                let wq = w * ad;
                if let Some(f) = self.loads.body {
                    let fv = f(&x);
                    for c in 0..uc {
                        for a in 0..nh {
                            rhs[iu(c, a)] += wq * fv[c] * t.h1_vals[q][a];
                        }
                    }
                }
                if let Some(mf) = self.loads.moment {
                    let mv = mf(&x);
                    for b in 0..nn {
                        let th = matvec(jit, &t.vec_vals[q][b]);
                        for r in 0..pr {
                            rhs[ip(r, b)] += wq * (0..3).map(|k| mv[r][k] * th[k]).sum::<f64>();
                        }
                    }
                }
            }
        }
        Local { base, curl, rhs }
    }
}

/// Stiffness split into the part independent of `L_c` and the curvature
/// part (already multiplied by `μ_macro`, not by `L_c²`).
#[derive(Debug, Clone)]
pub struct SplitSystem {
    pub disc: Arc<Discretization>,
    pub base: CsrMatrix,
    pub curl: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl SplitSystem {
    pub fn with_lc(&self, lc: f64) -> SparseSystem {
        SparseSystem {
            disc: self.disc.clone(),
            matrix: self.base.plus_scaled(&self.curl, lc * lc),
            rhs: self.rhs.clone(),
            constraints: ConstraintSet::default(),
        }
    }
}

/// Assembled symmetric system with its Dirichlet constraints.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub disc: Arc<Discretization>,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraints: ConstraintSet,
}

/// Assembles any model on a prepared discretization.
pub fn assemble_split(disc: Arc<Discretization>, model: Model, loads: Loads, degree: Option<usize>) -> Result<SplitSystem> {
    let degree = degree.unwrap_or_else(|| default_degree(disc.u_space().degree));
    let tables = RefTables::new(&disc, degree)?;
    let moments = Moments::new(&tables, disc.n_h(), disc.n_n());
    let asm = Assembler { disc: &disc, tables, moments, model, loads };
    let pattern = disc.pattern();
    let mut base = CsrMatrix::from_pattern(pattern);
    let mut curl = base.clone();
    let mut rhs = vec![0.0; disc.n_dofs()];
    const CHUNK: usize = 256;
    let n_cells = disc.mesh.n_cells();
    for start in (0..n_cells).step_by(CHUNK) {
        let end = (start + CHUNK).min(n_cells);
        let locals: Vec<Local> = (start..end).into_par_iter().map(|c| asm.element(c)).collect();
        for (c, local) in (start..end).zip(locals) {
            let dofs = disc.cell_dofs(c);
            let n = dofs.len();
            for (i, gi) in dofs.iter().enumerate() {
                rhs[*gi] += local.rhs[i];
                for (j, gj) in dofs.iter().enumerate() {
                    let v = local.base[i * n + j];
                    if v != 0.0 {
                        base.add(*gi, *gj, v);
                    }
                    if !local.curl.is_empty() {
                        let v = local.curl[i * n + j];
                        if v != 0.0 {
                            curl.add(*gi, *gj, v);
                        }
                    }
                }
            }
        }
    }
    Ok(SplitSystem { disc: disc.clone(), base, curl, rhs })
}

fn check_spaces(mesh: &Mesh, dim: Dim, u_space: &SpaceDescriptor, p_space: Option<&SpaceDescriptor>) -> Result<()> {
    if mesh.dim != dim {
        return Err(FemError::SpaceMismatch(format!("expected a {}D mesh", dim.n())));
    }
    if u_space.family != SpaceFamily::H1Bezier || u_space.dim != dim {
        return Err(FemError::SpaceMismatch("displacement space must be H1 on the mesh dimension".into()));
    }
    if let Some(p) = p_space {
        if !p.is_vector() || p.dim != dim {
            return Err(FemError::SpaceMismatch("microdistortion space must be H(curl) on the mesh dimension".into()));
        }
    }
    Ok(())
}

/// Antiplane shear system. `f` is the out-of-plane body force, `m` the
/// in-plane moment vector.
pub fn assemble_antiplane(
    mesh: Arc<Mesh>,
    params: &MaterialParams,
    u_space: SpaceDescriptor,
    p_space: SpaceDescriptor,
    f: Option<&ScalarFn>,
    m: Option<&VectorFn>,
) -> Result<SparseSystem> {
    check_spaces(&mesh, Dim::Two, &u_space, Some(&p_space))?;
    let disc = Arc::new(Discretization::new(mesh, u_space, 1, Some(p_space), 1)?);
    let body = f.map(|f| move |x: &[f64; 3]| [f(x), 0.0, 0.0]);
    let moment = m.map(|m| move |x: &[f64; 3]| [m(x), [0.0; 3], [0.0; 3]]);
    let loads = Loads {
        body: body.as_ref().map(|b| b as &VectorFn),
        moment: moment.as_ref().map(|b| b as &TensorFn),
    };
    Ok(assemble_split(disc, Model::Antiplane(*params), loads, None)?.with_lc(params.lc))
}

/// Full three-dimensional system with separate curvature matrix.
pub fn assemble_full3d_split(
    mesh: Arc<Mesh>,
    params: &MaterialParams,
    u_space: SpaceDescriptor,
    p_space: SpaceDescriptor,
    loads: Loads,
) -> Result<SplitSystem> {
    check_spaces(&mesh, Dim::Three, &u_space, Some(&p_space))?;
    let disc = Arc::new(Discretization::new(mesh, u_space, 3, Some(p_space), 3)?);
    assemble_split(disc, Model::Micromorphic(*params), loads, None)
}

pub fn assemble_full3d(
    mesh: Arc<Mesh>,
    params: &MaterialParams,
    u_space: SpaceDescriptor,
    p_space: SpaceDescriptor,
    loads: Loads,
) -> Result<SparseSystem> {
    Ok(assemble_full3d_split(mesh, params, u_space, p_space, loads)?.with_lc(params.lc))
}

/// Classical isotropic elasticity `-Div(λ tr(ε) 1 + 2μ ε) = f`.
pub fn assemble_cauchy3d(
    mesh: Arc<Mesh>,
    lambda: f64,
    mu: f64,
    u_space: SpaceDescriptor,
    body: Option<&VectorFn>,
) -> Result<SparseSystem> {
    check_spaces(&mesh, Dim::Three, &u_space, None)?;
    let disc = Arc::new(Discretization::new(mesh, u_space, 3, None, 0)?);
    let loads = Loads { body, moment: None };
    Ok(assemble_split(disc, Model::Cauchy { lambda, mu }, loads, None)?.with_lc(0.0))
}

/// Field values at one physical point. Row `c` of `du` is the gradient of
/// `u_c`; row `r` of `p` and `curl_p` belongs to row `r` of P. In 2D the rot
/// sits in `curl_p[0][2]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointValues {
    pub u: [f64; 3],
    pub du: Mat3,
    pub p: Mat3,
    pub curl_p: Mat3,
}

pub(crate) fn combine(
    disc: &Discretization,
    cell: usize,
    coeffs: &[f64],
    h1_vals: &[f64],
    h1_grads: &[[f64; 3]],
    vec_vals: &[[f64; 3]],
    vec_curls: &[[f64; 3]],
) -> PointValues {
    let map = &disc.mesh.maps[cell];
    let mut out = PointValues::default();
    let ud = &disc.u_map.cell_dofs[cell];
    for c in 0..disc.u_comps {
        let mut g = [0.0; 3];
        for (a, &d) in ud.iter().enumerate() {
            let x = coeffs[disc.u_dof(c, d)];
            out.u[c] += x * h1_vals[a];
            for k in 0..3 {
                g[k] += x * h1_grads[a][k];
            }
        }
        out.du[c] = matvec(&map.inv_t, &g);
    }
    if let Some(pm) = &disc.p_map {
        let pd = &pm.cell_dofs[cell];
        for r in 0..disc.p_rows {
            let (mut v, mut cu) = ([0.0; 3], [0.0; 3]);
            for (b, &d) in pd.iter().enumerate() {
                let x = coeffs[disc.p_dof(r, d)];
                for k in 0..3 {
                    v[k] += x * vec_vals[b][k];
                    cu[k] += x * vec_curls[b][k];
                }
            }
            out.p[r] = map.covariant(&v);
            out.curl_p[r] = map.curl(&cu);
        }
    }
    out
}

/// Calls `f(cell, x, weight, values)` at every quadrature point; `weight`
/// includes `|det J|`.
pub fn integrate_fields(
    disc: &Discretization,
    coeffs: &[f64],
    degree: usize,
    mut f: impl FnMut(usize, &[f64; 3], f64, &PointValues),
) -> Result<()> {
    let t = RefTables::new(disc, degree)?;
    let empty: Vec<[f64; 3]> = Vec::new();
    for cell in 0..disc.mesh.n_cells() {
        let map = &disc.mesh.maps[cell];
        for (q, w) in t.weights.iter().enumerate() {
            let (vv, vc) = if disc.p_map.is_some() { (&t.vec_vals[q], &t.vec_curls[q]) } else { (&empty, &empty) };
            let pv = combine(disc, cell, coeffs, &t.h1_vals[q], &t.h1_grads[q], vv, vc);
            f(cell, &map.forward(&t.points[q]), w * map.abs_det(), &pv);
        }
    }
    Ok(())
}

/// Quadratic energy density `½ a(w, w)` at one point.
pub fn energy_density(model: &Model, v: &PointValues) -> f64 {
    match model {
        Model::Antiplane(p) => {
            let e: f64 = (0..3).map(|k| (v.du[0][k] - v.p[0][k]).powi(2)).sum();
            let pp: f64 = v.p[0].iter().map(|x| x * x).sum();
            0.5 * ((p.mu_e + p.mu_c) * e + p.mu_micro * pp + p.mu_macro * p.lc * p.lc * v.curl_p[0][2].powi(2))
        }
        Model::Micromorphic(p) => {
            let c2: f64 = v.curl_p.iter().flatten().map(|x| x * x).sum();
            local_energy_density(p, &v.du, &v.p) + 0.5 * p.mu_macro * p.lc * p.lc * c2
        }
        Model::Cauchy { lambda, mu } => {
            let s = sym(&v.du);
            0.5 * contract(&s, &isotropic(*lambda, *mu, &s))
        }
    }
}

/// `½ a(w, w)` of a solution by quadrature.
pub fn compute_energy(sol: &FieldSolution, model: &Model) -> Result<f64> {
    let degree = default_degree(sol.disc.u_space().degree);
    let mut total = 0.0;
    integrate_fields(&sol.disc, &sol.coeffs, degree, |_, _, w, v| total += w * energy_density(model, v))?;
    Ok(total)
}

/// `‖ũ - u_h‖_{L²}` over the displacement components.
pub fn l2_error_u(sol: &FieldSolution, exact: &VectorFn, degree: usize) -> Result<f64> {
    let nc = sol.disc.u_comps;
    let mut acc = 0.0;
    integrate_fields(&sol.disc, &sol.coeffs, degree, |_, x, w, v| {
        let e = exact(x);
        acc += w * (0..nc).map(|c| (e[c] - v.u[c]).powi(2)).sum::<f64>();
    })?;
    Ok(acc.sqrt())
}

/// `‖P̃ - P_h‖_{L²}` over the rows of the microdistortion.
pub fn l2_error_p(sol: &FieldSolution, exact: &TensorFn, degree: usize) -> Result<f64> {
    let nr = sol.disc.p_rows;
    let mut acc = 0.0;
    integrate_fields(&sol.disc, &sol.coeffs, degree, |_, x, w, v| {
        let e = exact(x);
        acc += w * (0..nr).map(|r| (0..3).map(|k| (e[r][k] - v.p[r][k]).powi(2)).sum::<f64>()).sum::<f64>();
    })?;
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box;
    use crate::nedelec::SpaceFamily::*;
    use rand::{Rng, SeedableRng};

    fn sp(f: SpaceFamily, p: usize, dim: Dim) -> SpaceDescriptor {
        SpaceDescriptor::new(f, p, dim).unwrap()
    }

    fn unit_params() -> MaterialParams {
        MaterialParams {
            lambda_e: 1.0,
            mu_e: 1.0,
            lambda_micro: 1.0,
            mu_micro: 1.0,
            mu_c: 1.0,
            mu_macro: 0.5,
            lambda_macro: 0.5,
            lc: 1.0,
        }
    }

    #[test]
    fn numbering_ignores_cell_order() {
        let mesh = generate_box(&[(0.0, 1.0), (0.0, 1.0)], &[2, 2]).unwrap();
        let mut rev = mesh.cells.clone();
        rev.reverse();
        let mesh2 = Mesh::build(Dim::Two, mesh.vertices.clone(), rev, Default::default()).unwrap();
        let s = sp(NedelecII, 2, Dim::Two);
        let a = DofMap::build(&mesh, s).unwrap();
        let b = DofMap::build(&mesh2, s).unwrap();
        assert_eq!(a.keys, b.keys);
        let n = mesh.n_cells();
        for c in 0..n {
            assert_eq!(a.cell_dofs[c], b.cell_dofs[n - 1 - c]);
        }
    }

    #[test]
    fn global_counts() {
        // 2x2 squares, 8 triangles: 9 vertices, 16 edges
        let mesh = generate_box(&[(0.0, 1.0), (0.0, 1.0)], &[2, 2]).unwrap();
        assert_eq!(DofMap::build(&mesh, sp(H1Bezier, 2, Dim::Two)).unwrap().n_dofs, 25);
        assert_eq!(DofMap::build(&mesh, sp(NedelecI, 0, Dim::Two)).unwrap().n_dofs, 16);
        assert_eq!(DofMap::build(&mesh, sp(NedelecII, 1, Dim::Two)).unwrap().n_dofs, 32);
    }

    #[test]
    fn element_matrix_symmetric_psd() {
        let mesh = Arc::new(generate_box(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)], &[1, 1, 1]).unwrap());
        let mesh = Arc::new(Mesh::build(Dim::Three, mesh.vertices.clone(), vec![mesh.cells[0].clone()], Default::default()).unwrap());
        let sys = assemble_full3d(mesh, &unit_params(), sp(H1Bezier, 1, Dim::Three), sp(NedelecI, 0, Dim::Three), Loads::default())
            .unwrap();
        let k = &sys.matrix;
        assert!(k.asymmetry() <= 1e-12 * k.max_abs());
        let n = k.n;
        let dense = faer::Mat::<f64>::from_fn(n, n, |i, j| k.get(i, j));
        let eig = dense.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(eig.iter().all(|e| *e > -1e-12 * k.max_abs()));
    }

    #[test]
    fn gradient_microdistortion_has_no_curvature() {
        // P = Du with u quadratic: coefficients of P from the exact sequence
        // are not needed; the curl matrix must annihilate gradient dofs.
        let mesh = Arc::new(generate_box(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)], &[1, 1, 1]).unwrap());
        let split = assemble_full3d_split(
            mesh,
            &unit_params(),
            sp(H1Bezier, 2, Dim::Three),
            sp(NedelecI, 1, Dim::Three),
            Loads::default(),
        )
        .unwrap();
        let disc = &split.disc;
        let pm = disc.p_map.as_ref().unwrap();
        let basis = crate::nedelec::basis(&pm.space).unwrap();
        let mut x = vec![0.0; disc.n_dofs()];
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for (c, dofs) in pm.cell_dofs.iter().enumerate() {
            let _ = c;
            for (f, &d) in basis.iter().zip(dofs) {
                if matches!(f.kind, crate::nedelec::ShapeKind::Gradient { .. }) {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    for r in 0..3 {
                        x[disc.p_dof(r, d)] = v;
                    }
                }
            }
        }
        let e = split.curl.bilinear(&x, &x);
        assert!(e.abs() < 1e-12, "{e}");
    }

    #[test]
    fn constant_error_closed_form() {
        let mesh = Arc::new(generate_box(&[(0.0, 2.0), (0.0, 1.0), (0.0, 1.0)], &[2, 1, 1]).unwrap());
        let disc = Arc::new(Discretization::new(mesh, sp(H1Bezier, 1, Dim::Three), 3, None, 0).unwrap());
        let sol = FieldSolution::from_coeffs(disc.clone(), vec![0.0; disc.n_dofs()]);
        let e = l2_error_u(&sol, &|_| [3.0, 0.0, 0.0], 4).unwrap();
        assert!((e - 3.0 * 2f64.sqrt()).abs() < 1e-12);
        let z = compute_energy(&sol, &Model::Cauchy { lambda: 1.0, mu: 1.0 }).unwrap();
        assert_eq!(z, 0.0);
    }
}
