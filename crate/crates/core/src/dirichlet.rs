//! Hierarchical embedding of Dirichlet data.
//!
//! Bernstein bases are not hierarchical, so the boundary values of a
//! polytope must be known before its interior coefficients can be solved
//! for: vertices first, then edges, then faces. Every local problem is
//! evaluated through one incident cell, whose local vertex order matches the
//! global order of the polytope.
//!
//! H(curl) fields receive the tangential trace of `∇ũ` (row-wise for the
//! three-dimensional model), which is the consistent coupling condition.
//! [`Coupling::DiscreteGradient`] instead imposes the tangential gradient of
//! the embedded displacement trace.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::assembly::{Discretization, TensorFn, VectorFn};
use crate::error::{FemError, Result};
use crate::mesh::{dist, matvec, Mesh};
use crate::nedelec::{cross, eval_vector_shapes_at, local_keys, LocalKey};
use crate::quadrature::{gauss_legendre, rule_for, MAX_DEGREE};
use crate::simplex::{bezier_eval_closed, Dim, Polytope, PolytopeKind, TET_EDGES, TET_FACES, TRI_EDGES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Vertex,
    Edge,
    Face,
}

/// Prescribed values keyed by global dof.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    entries: BTreeMap<usize, (f64, Provenance)>,
}

impl ConstraintSet {
    /// Records a value; returns `false` and keeps the old entry if the dof
    /// is already constrained.
    pub fn insert(&mut self, dof: usize, value: f64, prov: Provenance) -> bool {
        if self.entries.contains_key(&dof) {
            return false;
        }
        self.entries.insert(dof, (value, prov));
        true
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.entries.get(&dof).map(|e| e.0)
    }

    pub fn provenance(&self, dof: usize) -> Option<Provenance> {
        self.entries.get(&dof).map(|e| e.1)
    }

    pub fn contains(&self, dof: usize) -> bool {
        self.entries.contains_key(&dof)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops every constrained dof for which `keep` returns `false`.
    pub fn retain(&mut self, mut keep: impl FnMut(usize) -> bool) {
        self.entries.retain(|d, _| keep(*d));
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, Provenance)> + '_ {
        self.entries.iter().map(|(d, (v, p))| (*d, *v, *p))
    }
}

/// Prescribed displacement and its gradient (row `c` is `∇ũ_c`).
#[derive(Clone, Copy)]
pub struct BoundaryData<'a> {
    pub value: &'a VectorFn<'a>,
    pub gradient: &'a TensorFn<'a>,
}

/// Reference vertex coordinates in local order.
pub fn reference_vertices(dim: Dim) -> Vec<[f64; 3]> {
    match dim {
        Dim::Two => vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]],
        Dim::Three => vec![[0.0; 3], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]],
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn lerp2(o: &[f64; 3], a: &[f64; 3], s: f64, b: &[f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|k| o[k] + s * (a[k] - o[k]) + t * (b[k] - o[k]))
}

/// Solves the SPD system `k x = f` of size `n`.
fn dense_spd_solve(n: usize, k: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let a = Mat::<f64>::from_fn(n, n, |i, j| k[i * n + j]);
    let b = Mat::<f64>::from_fn(n, 1, |i, _| f[i]);
    let llt = a.llt(Side::Lower).map_err(|_| FemError::NotPositiveDefinite)?;
    let x = llt.solve(&b);
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

/// Local problem `min ½ cᵀKc - fᵀc` over the unknown subset with the known
/// coefficients moved to the right-hand side.
fn solve_partitioned(k: &[f64], f: &[f64], unknown: &[usize], known: &[(usize, f64)], n: usize) -> Result<Vec<f64>> {
    let m = unknown.len();
    let mut kk = vec![0.0; m * m];
    let mut ff = vec![0.0; m];
    for (a, &i) in unknown.iter().enumerate() {
        ff[a] = f[i] - known.iter().map(|&(j, v)| k[i * n + j] * v).sum::<f64>();
        for (b, &j) in unknown.iter().enumerate() {
            kk[a * m + b] = k[i * n + j];
        }
    }
    dense_spd_solve(m, &kk, &ff)
}

fn incident_cell(cells: &[Vec<usize>], owner: &[usize], what: &str) -> Result<usize> {
    owner
        .first()
        .copied()
        .filter(|c| *c < cells.len())
        .ok_or_else(|| FemError::InvalidParam(format!("{what} has no incident cell")))
}

fn keys_on_closure(keys: &[LocalKey], dim: Dim, verts: &[usize]) -> Vec<usize> {
    (0..keys.len())
        .filter(|&i| keys[i].polytope.vertices(dim).iter().all(|v| verts.contains(v)))
        .collect()
}

/// `u_c(x_v) = ũ_c(x_v)` for every listed vertex and displacement component.
pub fn vertex_values(disc: &Discretization, vertices: &[usize], value: &VectorFn, set: &mut ConstraintSet) {
    for &v in vertices {
        let u = value(&disc.mesh.vertices[v]);
        for &d in disc.u_map.dofs_on(&[v]) {
            for c in 0..disc.u_comps {
                set.insert(disc.u_dof(c, d), u[c], Provenance::Vertex);
            }
        }
    }
}

struct EdgeFrame {
    cell: usize,
    local: usize,
    ra: [f64; 3],
    rb: [f64; 3],
    xa: [f64; 3],
    xb: [f64; 3],
}

fn edge_frame(mesh: &Mesh, edge: usize) -> Result<EdgeFrame> {
    let [a, b] = mesh.edges[edge];
    let (xa, xb) = (mesh.vertices[a], mesh.vertices[b]);
    let len = dist(&xa, &xb);
    if len < 1e-14 {
        return Err(FemError::SingularEdge(len));
    }
    let cell = incident_cell(&mesh.cells, &mesh.edge_cells[edge], "edge")?;
    let local = mesh.cell_edges[cell].iter().position(|&e| e == edge).expect("edge of incident cell");
    let table: &[[usize; 2]] = match mesh.dim {
        Dim::Two => &TRI_EDGES,
        Dim::Three => &TET_EDGES,
    };
    let rv = reference_vertices(mesh.dim);
    let [la, lb] = table[local];
    Ok(EdgeFrame { cell, local, ra: rv[la], rb: rv[lb], xa, xb })
}

fn known_values(set: &ConstraintSet, globals: &[usize], idx: &[usize]) -> Result<Vec<f64>> {
    idx.iter()
        .map(|&i| {
            set.get(globals[i])
                .ok_or_else(|| FemError::InvalidParam("boundary values of lower polytopes must be fixed first".into()))
        })
        .collect()
}

/// Interior coefficients of displacement component `comp` on `edge`: the
/// 1D stiffness problem `∫ n_i' n_j' dα` with load `∫ n_i' ⟨t, ∇ũ_c⟩ dα`.
/// Vertex values must already be in `set`.
pub fn edge_h1_projection(
    disc: &Discretization,
    edge: usize,
    comp: usize,
    gradient: &TensorFn,
    set: &ConstraintSet,
) -> Result<Vec<(usize, f64)>> {
    let mesh = &disc.mesh;
    let fr = edge_frame(mesh, edge)?;
    let space = disc.u_space();
    let keys = local_keys(&space)?;
    let dim = mesh.dim;
    let table: &[[usize; 2]] = if dim == Dim::Two { &TRI_EDGES } else { &TET_EDGES };
    let sel = keys_on_closure(&keys, dim, &table[fr.local]);
    let globals: Vec<usize> = sel.iter().map(|&i| disc.u_dof(comp, disc.u_map.cell_dofs[fr.cell][i])).collect();
    let n = sel.len();
    let unknown: Vec<usize> = (0..n).filter(|&a| keys[sel[a]].polytope.kind == PolytopeKind::Edge).collect();
    let known_idx: Vec<usize> = (0..n).filter(|&a| keys[sel[a]].polytope.kind == PolytopeKind::Vertex).collect();
    let known_vals = known_values(set, &globals, &known_idx)?;
    let known: Vec<(usize, f64)> = known_idx.into_iter().zip(known_vals).collect();

    let dr = sub(&fr.rb, &fr.ra);
    let t = sub(&fr.xb, &fr.xa);
    let (xs, ws) = gauss_legendre(space.degree + 3);
    let mut k = vec![0.0; n * n];
    let mut f = vec![0.0; n];
    for (alpha, w) in xs.iter().zip(&ws) {
        let xr = lerp2(&fr.ra, &fr.rb, *alpha, &fr.ra, 0.0);
        let s = bezier_eval_closed(space.degree, dim, &xr);
        let d: Vec<f64> = sel.iter().map(|&i| dot(&s.grads[i], &dr)).collect();
        let x = lerp2(&fr.xa, &fr.xb, *alpha, &fr.xa, 0.0);
        let target = dot(&gradient(&x)[comp], &t);
        for a in 0..n {
            f[a] += w * d[a] * target;
            for b in 0..n {
                k[a * n + b] += w * d[a] * d[b];
            }
        }
    }
    let vals = solve_partitioned(&k, &f, &unknown, &known, n)?;
    Ok(unknown.iter().map(|&a| globals[a]).zip(vals).collect())
}

/// Edge coefficients of microdistortion row `row`: `L²` projection of
/// `⟨t, ∇ũ_row⟩` onto the tangential traces of the edge functions. For the
/// second family this is the edge mass problem; for the first family the
/// traces are the lowest-order constant plus derivatives of edge Bernstein
/// polynomials, so it coincides with the edge stiffness problem.
pub fn edge_hcurl_projection(
    disc: &Discretization,
    edge: usize,
    row: usize,
    gradient: &TensorFn,
) -> Result<Vec<(usize, f64)>> {
    edge_hcurl_with(disc, edge, row, &|_, x| gradient(x)[row])
}

/// Target row vector at (reference point in the incident cell, physical point).
type RowTarget<'a> = dyn Fn(&[f64; 3], &[f64; 3]) -> [f64; 3] + 'a;

fn edge_hcurl_with(disc: &Discretization, edge: usize, row: usize, target: &RowTarget) -> Result<Vec<(usize, f64)>> {
    let mesh = &disc.mesh;
    let pm = disc.p_map.as_ref().ok_or_else(|| FemError::SpaceMismatch("no H(curl) field".into()))?;
    let fr = edge_frame(mesh, edge)?;
    let keys = local_keys(&pm.space)?;
    let sel: Vec<usize> =
        (0..keys.len()).filter(|&i| keys[i].polytope == Polytope::edge(fr.local)).collect();
    let n = sel.len();
    let dr = sub(&fr.rb, &fr.ra);
    let t = sub(&fr.xb, &fr.xa);
    let (xs, ws) = gauss_legendre(pm.space.degree + 4);
    let mut k = vec![0.0; n * n];
    let mut f = vec![0.0; n];
    for (alpha, w) in xs.iter().zip(&ws) {
        let xr = lerp2(&fr.ra, &fr.rb, *alpha, &fr.ra, 0.0);
        let s = eval_vector_shapes_at(&pm.space, &xr)?;
        let tau: Vec<f64> = sel.iter().map(|&i| dot(&s.values[i], &dr)).collect();
        let x = lerp2(&fr.xa, &fr.xb, *alpha, &fr.xa, 0.0);
        let target = dot(&target(&xr, &x), &t);
        for a in 0..n {
            f[a] += w * tau[a] * target;
            for b in 0..n {
                k[a * n + b] += w * tau[a] * tau[b];
            }
        }
    }
    let vals = dense_spd_solve(n, &k, &f)?;
    Ok(sel.iter().map(|&i| disc.p_dof(row, pm.cell_dofs[fr.cell][i])).zip(vals).collect())
}

struct FaceFrame {
    cell: usize,
    local: usize,
    r: [[f64; 3]; 3],
    x: [[f64; 3]; 3],
    normal: [f64; 3],
    area2: f64,
}

fn face_frame(mesh: &Mesh, face: usize) -> Result<FaceFrame> {
    if mesh.dim != Dim::Three {
        return Err(FemError::SpaceMismatch("faces exist only in 3D".into()));
    }
    let [a, b, c] = mesh.faces[face];
    let x = [mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]];
    let nrm = cross(sub(&x[2], &x[0]), sub(&x[1], &x[0]));
    let area2 = dot(&nrm, &nrm).sqrt();
    let h = dist(&x[0], &x[1]).max(dist(&x[0], &x[2])).max(dist(&x[1], &x[2]));
    if area2 < 1e-14 * h * h || area2 == 0.0 {
        return Err(FemError::DegenerateFace(area2));
    }
    let cell = incident_cell(&mesh.cells, &mesh.face_cells[face], "face")?;
    let local = mesh.cell_faces[cell].iter().position(|&f| f == face).expect("face of incident cell");
    let rv = reference_vertices(Dim::Three);
    let lv = TET_FACES[local];
    Ok(FaceFrame {
        cell,
        local,
        r: [rv[lv[0]], rv[lv[1]], rv[lv[2]]],
        x,
        normal: nrm.map(|v| v / area2),
        area2,
    })
}

/// Face points as (reference point in the cell, physical point, weight).
fn face_points(fr: &FaceFrame, degree: usize) -> Result<Vec<([f64; 3], [f64; 3], f64)>> {
    let rule = rule_for(Dim::Two, degree.clamp(1, MAX_DEGREE))?;
    Ok(rule
        .ref_points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| {
            // ξ runs towards the third vertex, η towards the second
            let xr = lerp2(&fr.r[0], &fr.r[2], p[0], &fr.r[1], p[1]);
            let x = lerp2(&fr.x[0], &fr.x[2], p[0], &fr.x[1], p[1]);
            (xr, x, w * fr.area2)
        })
        .collect())
}

fn tangential(v: &[f64; 3], n: &[f64; 3]) -> [f64; 3] {
    let s = dot(v, n);
    [v[0] - s * n[0], v[1] - s * n[1], v[2] - s * n[2]]
}

/// Interior face coefficients of displacement component `comp`: surface
/// gradient problem with load `∫ ∇_Γ n_i · ∇ũ_c`. Vertex and edge values
/// must already be in `set`.
pub fn face_h1_projection(
    disc: &Discretization,
    face: usize,
    comp: usize,
    gradient: &TensorFn,
    set: &ConstraintSet,
) -> Result<Vec<(usize, f64)>> {
    let mesh = &disc.mesh;
    let fr = face_frame(mesh, face)?;
    let space = disc.u_space();
    let keys = local_keys(&space)?;
    let sel = keys_on_closure(&keys, Dim::Three, &TET_FACES[fr.local]);
    let globals: Vec<usize> = sel.iter().map(|&i| disc.u_dof(comp, disc.u_map.cell_dofs[fr.cell][i])).collect();
    let n = sel.len();
    let is_face = |a: usize| keys[sel[a]].polytope == Polytope::face(fr.local);
    let unknown: Vec<usize> = (0..n).filter(|&a| is_face(a)).collect();
    if unknown.is_empty() {
        return Ok(Vec::new());
    }
    let known_idx: Vec<usize> = (0..n).filter(|&a| !is_face(a)).collect();
    let known: Vec<(usize, f64)> = known_idx.iter().copied().zip(known_values(set, &globals, &known_idx)?).collect();
    let jit = &mesh.maps[fr.cell].inv_t;
    let mut k = vec![0.0; n * n];
    let mut f = vec![0.0; n];
    for (xr, x, w) in face_points(&fr, 2 * (space.degree + 2))? {
        let s = bezier_eval_closed(space.degree, Dim::Three, &xr);
        let g: Vec<[f64; 3]> = sel.iter().map(|&i| tangential(&matvec(jit, &s.grads[i]), &fr.normal)).collect();
        let target = gradient(&x)[comp];
        for a in 0..n {
            f[a] += w * dot(&g[a], &target);
            for b in 0..n {
                k[a * n + b] += w * dot(&g[a], &g[b]);
            }
        }
    }
    let vals = solve_partitioned(&k, &f, &unknown, &known, n)?;
    Ok(unknown.iter().map(|&a| globals[a]).zip(vals).collect())
}

/// Interior face coefficients of microdistortion row `row`: surface H(rot)
/// problem `∫ π_t θ_i · π_t θ_j + (n·curl θ_i)(n·curl θ_j)` with load
/// `∫ π_t θ_i · ∇ũ_row`. Edge values must already be in `set`.
pub fn face_hcurl_projection(
    disc: &Discretization,
    face: usize,
    row: usize,
    gradient: &TensorFn,
    set: &ConstraintSet,
) -> Result<Vec<(usize, f64)>> {
    face_hcurl_with(disc, face, row, &|_, x| gradient(x)[row], set)
}

fn face_hcurl_with(
    disc: &Discretization,
    face: usize,
    row: usize,
    target: &RowTarget,
    set: &ConstraintSet,
) -> Result<Vec<(usize, f64)>> {
    let mesh = &disc.mesh;
    let pm = disc.p_map.as_ref().ok_or_else(|| FemError::SpaceMismatch("no H(curl) field".into()))?;
    let fr = face_frame(mesh, face)?;
    let keys = local_keys(&pm.space)?;
    let fv = TET_FACES[fr.local];
    let sel: Vec<usize> = (0..keys.len())
        .filter(|&i| {
            let kind = keys[i].polytope.kind;
            (kind == PolytopeKind::Edge || kind == PolytopeKind::Face)
                && keys[i].polytope.vertices(Dim::Three).iter().all(|v| fv.contains(v))
        })
        .collect();
    let globals: Vec<usize> = sel.iter().map(|&i| disc.p_dof(row, pm.cell_dofs[fr.cell][i])).collect();
    let n = sel.len();
    let is_face = |a: usize| keys[sel[a]].polytope.kind == PolytopeKind::Face;
    let unknown: Vec<usize> = (0..n).filter(|&a| is_face(a)).collect();
    if unknown.is_empty() {
        return Ok(Vec::new());
    }
    let known_idx: Vec<usize> = (0..n).filter(|&a| !is_face(a)).collect();
    let known: Vec<(usize, f64)> = known_idx.iter().copied().zip(known_values(set, &globals, &known_idx)?).collect();
    let map = &mesh.maps[fr.cell];
    let mut k = vec![0.0; n * n];
    let mut f = vec![0.0; n];
    for (xr, x, w) in face_points(&fr, 2 * (pm.space.degree + 3))? {
        let s = eval_vector_shapes_at(&pm.space, &xr)?;
        let th: Vec<[f64; 3]> = sel.iter().map(|&i| tangential(&map.covariant(&s.values[i]), &fr.normal)).collect();
        let rc: Vec<f64> = sel.iter().map(|&i| dot(&map.curl(&s.curls[i]), &fr.normal)).collect();
        let target = target(&xr, &x);
        for a in 0..n {
            f[a] += w * dot(&th[a], &target);
            for b in 0..n {
                k[a * n + b] += w * (dot(&th[a], &th[b]) + rc[a] * rc[b]);
            }
        }
    }
    let vals = solve_partitioned(&k, &f, &unknown, &known, n)?;
    Ok(unknown.iter().map(|&a| globals[a]).zip(vals).collect())
}

/// Boundary facet ids carrying any of the given tags.
pub fn facets_with_tags(mesh: &Mesh, tags: &[&str]) -> Result<Vec<usize>> {
    let lookup: HashMap<Vec<usize>, usize> = match mesh.dim {
        Dim::Two => mesh.edges.iter().enumerate().map(|(i, e)| (e.to_vec(), i)).collect(),
        Dim::Three => mesh.faces.iter().enumerate().map(|(i, f)| (f.to_vec(), i)).collect(),
    };
    let mut out = BTreeSet::new();
    for tag in tags {
        let facets = mesh
            .boundary_tags
            .get(*tag)
            .ok_or_else(|| FemError::InvalidParam(format!("unknown boundary tag '{tag}'")))?;
        for f in facets {
            let mut key = f.clone();
            key.sort_unstable();
            let id = lookup
                .get(&key)
                .ok_or_else(|| FemError::InvalidParam(format!("tagged facet {f:?} is not a mesh facet")))?;
            out.insert(*id);
        }
    }
    Ok(out.into_iter().collect())
}

/// Source of the tangential data imposed on H(curl) fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Coupling {
    /// Project the tangential trace of the prescribed `∇ũ`.
    #[default]
    Projection,
    /// Project the tangential gradient of the embedded displacement trace.
    /// The result is a discrete gradient on every boundary edge and face,
    /// so `P = ∇u_h` is admissible for any `u_h` meeting the data.
    DiscreteGradient,
}

/// Gradient of displacement component `comp` in `cell`, built from the
/// constrained coefficients on the closure of the local polytope with
/// vertices `verts`. Exact tangentially on that polytope.
fn trace_gradient<'a>(
    disc: &'a Discretization,
    cell: usize,
    verts: &[usize],
    comp: usize,
    set: &ConstraintSet,
) -> Result<impl Fn(&[f64; 3], &[f64; 3]) -> [f64; 3] + 'a> {
    let space = disc.u_space();
    let keys = local_keys(&space)?;
    let sel = keys_on_closure(&keys, disc.mesh.dim, verts);
    let globals: Vec<usize> = sel.iter().map(|&i| disc.u_dof(comp, disc.u_map.cell_dofs[cell][i])).collect();
    let idx: Vec<usize> = (0..sel.len()).collect();
    let coeffs: Vec<(usize, f64)> = sel.into_iter().zip(known_values(set, &globals, &idx)?).collect();
    let jit = &disc.mesh.maps[cell].inv_t;
    let dim = disc.mesh.dim;
    Ok(move |xr: &[f64; 3], _: &[f64; 3]| {
        let s = bezier_eval_closed(space.degree, dim, xr);
        let mut g = [0.0; 3];
        for &(i, c) in &coeffs {
            for k in 0..3 {
                g[k] += c * s.grads[i][k];
            }
        }
        matvec(jit, &g)
    })
}

/// Embeds the Dirichlet data on the given boundary facets for every field of
/// the discretization: vertices, then edges, then faces.
pub fn embed_dirichlet(disc: &Discretization, facets: &[usize], data: &BoundaryData) -> Result<ConstraintSet> {
    embed_dirichlet_with(disc, facets, data, Coupling::Projection)
}

fn insert_all(set: &mut ConstraintSet, vals: Vec<Vec<(usize, f64)>>, prov: Provenance) {
    for (d, v) in vals.into_iter().flatten() {
        set.insert(d, v, prov);
    }
}

pub fn embed_dirichlet_with(
    disc: &Discretization,
    facets: &[usize],
    data: &BoundaryData,
    coupling: Coupling,
) -> Result<ConstraintSet> {
    let mesh = &disc.mesh;
    let mut verts = BTreeSet::new();
    let mut edges = BTreeSet::new();
    let mut faces = BTreeSet::new();
    let edge_id: HashMap<[usize; 2], usize> = mesh.edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    for &f in facets {
        match mesh.dim {
            Dim::Two => {
                edges.insert(f);
                verts.extend(mesh.edges[f]);
            }
            Dim::Three => {
                faces.insert(f);
                let [a, b, c] = mesh.faces[f];
                verts.extend([a, b, c]);
                for e in [[a, b], [a, c], [b, c]] {
                    edges.insert(edge_id[&e]);
                }
            }
        }
    }
    let verts: Vec<usize> = verts.into_iter().collect();
    let edges: Vec<usize> = edges.into_iter().collect();
    let faces: Vec<usize> = faces.into_iter().collect();
    if disc.p_rows > disc.u_comps {
        return Err(FemError::SpaceMismatch("more microdistortion rows than displacement components".into()));
    }
    let edge_table: &[[usize; 2]] = if mesh.dim == Dim::Two { &TRI_EDGES } else { &TET_EDGES };

    let mut set = ConstraintSet::default();
    vertex_values(disc, &verts, data.value, &mut set);

    let vals = edges
        .par_iter()
        .map(|&e| {
            let mut out = Vec::new();
            for c in 0..disc.u_comps {
                out.extend(edge_h1_projection(disc, e, c, data.gradient, &set)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    insert_all(&mut set, vals, Provenance::Edge);
    let vals = edges
        .par_iter()
        .map(|&e| {
            let mut out = Vec::new();
            for r in 0..disc.p_rows {
                out.extend(match coupling {
                    Coupling::Projection => edge_hcurl_projection(disc, e, r, data.gradient)?,
                    Coupling::DiscreteGradient => {
                        let fr = edge_frame(mesh, e)?;
                        let g = trace_gradient(disc, fr.cell, &edge_table[fr.local], r, &set)?;
                        edge_hcurl_with(disc, e, r, &g)?
                    }
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    insert_all(&mut set, vals, Provenance::Edge);

    let vals = faces
        .par_iter()
        .map(|&f| {
            let mut out = Vec::new();
            for c in 0..disc.u_comps {
                out.extend(face_h1_projection(disc, f, c, data.gradient, &set)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    insert_all(&mut set, vals, Provenance::Face);
    let vals = faces
        .par_iter()
        .map(|&f| {
            let mut out = Vec::new();
            for r in 0..disc.p_rows {
                out.extend(match coupling {
                    Coupling::Projection => face_hcurl_projection(disc, f, r, data.gradient, &set)?,
                    Coupling::DiscreteGradient => {
                        let fr = face_frame(mesh, f)?;
                        let g = trace_gradient(disc, fr.cell, &TET_FACES[fr.local], r, &set)?;
                        face_hcurl_with(disc, f, r, &g, &set)?
                    }
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    insert_all(&mut set, vals, Provenance::Face);
    Ok(set)
}
