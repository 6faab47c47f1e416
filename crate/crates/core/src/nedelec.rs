//! Nédélec H(curl) bases of the first and second type on the reference
//! triangle and tetrahedron, built from the Bézier basis with polytopal
//! templates.
//!
//! Every function is one of four kinds: a lowest-order (Whitney) edge
//! function, a scalar Bézier function times a template direction, the
//! gradient of a Bézier function, or a non-gradient cell function. Template
//! directions are either constant vectors or fixed combinations of the
//! lowest-order functions. All vectors live on the reference element; the
//! covariant map to physical cells happens during assembly.
//!
//! Each function carries a local DOF key `(polytope, family, exponents)`.
//! The exponents are those of its defining scalar index restricted to the
//! polytope vertices, so two cells sharing an edge or face produce equal keys
//! for the functions whose tangential traces coincide there.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{FemError, Result};
use crate::simplex::{
    barycentric, bezier_eval, bezier_eval_closed, classify, duffy_forward, traversal_order,
    CollapsedPoint, Dim, MultiIndex, Polytope, ShapeSet, TET_EDGES, TRI_EDGES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpaceFamily {
    NedelecI,
    NedelecII,
    H1Bezier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceDescriptor {
    pub family: SpaceFamily,
    pub degree: usize,
    pub dim: Dim,
}

impl SpaceDescriptor {
    pub fn new(family: SpaceFamily, degree: usize, dim: Dim) -> Result<Self> {
        let ok = match family {
            SpaceFamily::NedelecI => true,
            SpaceFamily::NedelecII | SpaceFamily::H1Bezier => degree >= 1,
        };
        if !ok {
            return Err(FemError::InvalidParam(format!("{family:?} requires degree >= 1, got {degree}")));
        }
        Ok(Self { family, degree, dim })
    }

    /// Number of local functions per element.
    pub fn local_dim(&self) -> usize {
        let p = self.degree;
        match (self.family, self.dim) {
            (SpaceFamily::H1Bezier, d) => crate::simplex::bezier_count(p, d),
            (SpaceFamily::NedelecII, Dim::Two) => (p + 1) * (p + 2),
            (SpaceFamily::NedelecI, Dim::Two) => (p + 1) * (p + 3),
            (SpaceFamily::NedelecII, Dim::Three) => (p + 1) * (p + 2) * (p + 3) / 2,
            (SpaceFamily::NedelecI, Dim::Three) => (p + 4) * (p + 3) * (p + 1) / 2,
        }
    }

    pub fn is_vector(&self) -> bool {
        self.family != SpaceFamily::H1Bezier
    }
}

/// Direction multiplying a scalar Bézier function.
#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    Constant([f64; 3]),
    /// Coefficients of the lowest-order functions, indexed by local edge.
    Whitney([f64; 6]),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    /// Whitney function of a local edge.
    LowestOrder(usize),
    Template { scalar: MultiIndex, dir: Direction },
    Gradient { scalar: MultiIndex },
    /// `(q+1) b^q_{I-e_a} e_a - I_a/(q+1) ∇b^{q+1}_I` with `q+1 = index.degree`.
    NonGradientCell { index: MultiIndex, axis: usize },
}

/// Identifies a local function up to the choice of cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalKey {
    pub polytope: Polytope,
    pub family: u16,
    pub exps: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorShapeFn {
    pub key: LocalKey,
    pub kind: ShapeKind,
}

impl VectorShapeFn {
    pub fn polytope(&self) -> Polytope {
        self.key.polytope
    }
}

fn restricted(mi: &MultiIndex, poly: Polytope) -> Vec<u16> {
    let e = mi.exponents();
    poly.vertices(mi.dim).iter().map(|&v| e[v] as u16).collect()
}

/// Indices of degree `q` whose polytope is `poly`, in traversal order.
fn indices_on(q: usize, dim: Dim, poly: Polytope) -> Vec<MultiIndex> {
    traversal_order(q, dim).into_iter().filter(|mi| classify(mi) == poly).collect()
}

const E1: [f64; 3] = [1.0, 0.0, 0.0];
const E2: [f64; 3] = [0.0, 1.0, 0.0];
const E3: [f64; 3] = [0.0, 0.0, 1.0];

fn scaled(v: [f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn sum3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn whitney(terms: &[(usize, f64)]) -> Direction {
    let mut c = [0.0; 6];
    for &(e, s) in terms {
        c[e] += s;
    }
    Direction::Whitney(c)
}

struct Builder {
    dim: Dim,
    p: usize,
    fns: Vec<VectorShapeFn>,
}

impl Builder {
    fn new(dim: Dim, p: usize) -> Self {
        Self { dim, p, fns: Vec::new() }
    }

    /// Scalar functions of degree `p` on `scalar_poly`, times `dir`, owned by
    /// `owner` as family `family`.
    fn template(&mut self, owner: Polytope, family: u16, scalar_poly: Polytope, dir: Direction) {
        for mi in indices_on(self.p, self.dim, scalar_poly) {
            self.fns.push(VectorShapeFn {
                key: LocalKey { polytope: owner, family, exps: restricted(&mi, owner) },
                kind: ShapeKind::Template { scalar: mi, dir: dir.clone() },
            });
        }
    }

    fn constant(&mut self, owner: Polytope, family: u16, scalar_poly: Polytope, v: [f64; 3]) {
        self.template(owner, family, scalar_poly, Direction::Constant(v));
    }

    /// Gradients of the degree-`q` functions interior to `poly`.
    fn gradients(&mut self, poly: Polytope, family: u16, q: usize) {
        for mi in indices_on(q, self.dim, poly) {
            self.fns.push(VectorShapeFn {
                key: LocalKey { polytope: poly, family, exps: restricted(&mi, poly) },
                kind: ShapeKind::Gradient { scalar: mi },
            });
        }
    }

    fn lowest(&mut self, edge: usize) {
        self.fns.push(VectorShapeFn {
            key: LocalKey { polytope: Polytope::edge(edge), family: 0, exps: Vec::new() },
            kind: ShapeKind::LowestOrder(edge),
        });
    }

    /// Whitney-template functions of a triangle with vertices `v` and edges
    /// `a = (v0,v1)`, `b = (v0,v2)`, `c = (v1,v2)`. `sign1` is the sign of
    /// the second vertex family.
    fn whitney_face(&mut self, owner: Polytope, v: [usize; 3], edges: [usize; 3], sign1: f64) {
        let dim = self.dim;
        let [a, b, c] = edges;
        let vert = |k: usize| Polytope::vertex(v[k]);
        let edge = |x: usize, y: usize| Polytope::from_vertices(dim, &[v[x], v[y]]);
        self.template(owner, 0, vert(0), whitney(&[(c, 1.0)]));
        self.template(owner, 1, vert(1), whitney(&[(b, sign1)]));
        self.template(owner, 2, edge(0, 1), whitney(&[(c, 1.0), (b, -1.0)]));
        self.template(owner, 3, edge(0, 2), whitney(&[(a, 1.0), (c, 1.0)]));
        self.template(owner, 4, edge(1, 2), whitney(&[(a, 1.0), (b, -1.0)]));
        self.template(owner, 5, owner, whitney(&[(a, 1.0), (b, -1.0), (c, 1.0)]));
    }
}

fn ones() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

/// Second-type basis on the triangle, `(p+1)(p+2)` functions.
pub fn nedelec2_tri(p: usize) -> Result<Vec<VectorShapeFn>> {
    if p < 1 {
        return Err(FemError::InvalidParam("second-type triangle basis needs p >= 1".into()));
    }
    let mut b = Builder::new(Dim::Two, p);
    let (v, e, c) = (Polytope::vertex, Polytope::edge, Polytope::CELL);
    let e12 = [1.0, 1.0, 0.0];
    // e12
    b.constant(e(0), 0, v(0), E2);
    b.constant(e(0), 1, v(1), e12);
    b.constant(e(0), 2, e(0), E2);
    // e13
    b.constant(e(1), 0, v(0), E1);
    b.constant(e(1), 1, v(2), e12);
    b.constant(e(1), 2, e(1), E1);
    // e23
    b.constant(e(2), 0, v(1), E1);
    b.constant(e(2), 1, v(2), scaled(E2, -1.0));
    b.constant(e(2), 2, e(2), [0.5, -0.5, 0.0]);
    // cell
    b.constant(c, 0, e(0), scaled(E1, -1.0));
    b.constant(c, 1, e(1), E2);
    b.constant(c, 2, e(2), e12);
    b.constant(c, 3, c, E2);
    b.constant(c, 4, c, E1);
    Ok(b.fns)
}

/// First-type triangle basis, `(p+1)(p+3)` functions.
pub fn nedelec1_tri(p: usize) -> Vec<VectorShapeFn> {
    let mut b = Builder::new(Dim::Two, p);
    for (edge, _) in TRI_EDGES.iter().enumerate() {
        b.lowest(edge);
        b.gradients(Polytope::edge(edge), 1, p + 1);
    }
    if p >= 1 {
        b.whitney_face(Polytope::CELL, [0, 1, 2], [0, 1, 2], 1.0);
        b.gradients(Polytope::CELL, 6, p + 1);
    }
    b.fns
}

/// Second-type tetrahedral basis, `(p+1)(p+2)(p+3)/2` functions.
pub fn nedelec2_tet(p: usize) -> Result<Vec<VectorShapeFn>> {
    if p < 1 {
        return Err(FemError::InvalidParam("second-type tetrahedral basis needs p >= 1".into()));
    }
    let mut b = Builder::new(Dim::Three, p);
    let (v, e, f, c) = (Polytope::vertex, Polytope::edge, Polytope::face, Polytope::CELL);
    let one = ones();
    let neg = |x: [f64; 3]| scaled(x, -1.0);
    // edges: (vertex-edge, vertex-edge, pure edge)
    let edges: [(usize, usize, [f64; 3], usize, [f64; 3], [f64; 3]); 6] = [
        (0, 0, E3, 1, one, E3),
        (1, 0, E2, 2, one, E2),
        (2, 0, E1, 3, one, E1),
        (3, 1, E2, 2, neg(E3), E2),
        (4, 1, E1, 3, neg(E3), E1),
        (5, 2, E1, 3, neg(E2), E1),
    ];
    for (id, va, ta, vb, tb, te) in edges {
        b.constant(e(id), 0, v(va), ta);
        b.constant(e(id), 1, v(vb), tb);
        b.constant(e(id), 2, e(id), te);
    }
    // faces: three edge-face families on the face edges (v0v1, v0v2, v1v2),
    // then two interior families
    let faces: [(usize, [f64; 3], [f64; 3], [f64; 3], [f64; 3], [f64; 3]); 4] = [
        (0, neg(E2), E3, one, E3, E2),
        (1, neg(E1), E3, one, E3, E1),
        (2, neg(E1), E2, one, E2, E1),
        (3, neg(E1), E2, neg(E3), E2, E1),
    ];
    for (id, t0, t1, t2, t3, t4) in faces {
        let fv = crate::simplex::TET_FACES[id];
        let edge_of = |x: usize, y: usize| Polytope::from_vertices(Dim::Three, &[fv[x], fv[y]]);
        b.constant(f(id), 0, edge_of(0, 1), t0);
        b.constant(f(id), 1, edge_of(0, 2), t1);
        b.constant(f(id), 2, edge_of(1, 2), t2);
        b.constant(f(id), 3, f(id), t3);
        b.constant(f(id), 4, f(id), t4);
    }
    // cell: four face-cell families, then three interior families
    b.constant(c, 0, f(0), neg(E1));
    b.constant(c, 1, f(1), E2);
    b.constant(c, 2, f(2), neg(E3));
    b.constant(c, 3, f(3), one);
    b.constant(c, 4, c, E3);
    b.constant(c, 5, c, E2);
    b.constant(c, 6, c, E1);
    Ok(b.fns)
}

/// First-type tetrahedral basis, `(p+4)(p+3)(p+1)/2` functions.
pub fn nedelec1_tet(p: usize) -> Vec<VectorShapeFn> {
    let mut b = Builder::new(Dim::Three, p);
    for (edge, _) in TET_EDGES.iter().enumerate() {
        b.lowest(edge);
        b.gradients(Polytope::edge(edge), 1, p + 1);
    }
    if p >= 1 {
        // local edge ids of each face: (v0v1, v0v2, v1v2)
        let face_edges = [[0, 1, 3], [0, 2, 4], [1, 2, 5], [3, 4, 5]];
        for (id, fv) in crate::simplex::TET_FACES.iter().enumerate() {
            let f = Polytope::face(id);
            b.whitney_face(f, *fv, face_edges[id], -1.0);
            b.gradients(f, 6, p + 1);
        }
        let q = p + 2;
        let mut ngc = |family: u16, axis: usize, mi: MultiIndex| {
            b.fns.push(VectorShapeFn {
                key: LocalKey { polytope: Polytope::CELL, family, exps: restricted(&mi, Polytope::CELL) },
                kind: ShapeKind::NonGradientCell { index: mi, axis },
            });
        };
        let interior = indices_on(q, Dim::Three, Polytope::CELL);
        for mi in &interior {
            ngc(0, 0, *mi);
        }
        for mi in &interior {
            ngc(1, 1, *mi);
        }
        // (i, j, 1) with i, j > 0 and i + j < q - 1, which keeps the index
        // interior at degree q
        for i in 1..q {
            for j in 1..q - i {
                if i + j + 1 < q {
                    ngc(2, 2, MultiIndex { degree: q, dim: Dim::Three, ijk: [i, j, 1] });
                }
            }
        }
        b.gradients(Polytope::CELL, 3, p + 1);
    }
    b.fns
}

/// Basis functions of a space, built once and shared.
pub fn basis(space: &SpaceDescriptor) -> Result<Arc<Vec<VectorShapeFn>>> {
    static CACHE: OnceLock<Mutex<HashMap<SpaceDescriptor, Arc<Vec<VectorShapeFn>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("basis cache poisoned").get(space) {
        return Ok(b.clone());
    }
    let fns = match (space.family, space.dim) {
        (SpaceFamily::NedelecI, Dim::Two) => nedelec1_tri(space.degree),
        (SpaceFamily::NedelecII, Dim::Two) => nedelec2_tri(space.degree)?,
        (SpaceFamily::NedelecI, Dim::Three) => nedelec1_tet(space.degree),
        (SpaceFamily::NedelecII, Dim::Three) => nedelec2_tet(space.degree)?,
        (SpaceFamily::H1Bezier, _) => {
            return Err(FemError::SpaceMismatch("H1 space has no vector basis".into()))
        }
    };
    let arc = Arc::new(fns);
    cache.lock().expect("basis cache poisoned").insert(*space, arc.clone());
    Ok(arc)
}

/// Local keys of the scalar Bézier basis in traversal order.
pub fn h1_local_keys(p: usize, dim: Dim) -> Vec<LocalKey> {
    traversal_order(p, dim)
        .iter()
        .map(|mi| {
            let poly = classify(mi);
            LocalKey { polytope: poly, family: 0, exps: restricted(mi, poly) }
        })
        .collect()
}

/// Values and curls of a vector basis at one point. In 2D the scalar rot is
/// stored in the third curl component and the other two are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorShapeSet {
    pub values: Vec<[f64; 3]>,
    pub curls: Vec<[f64; 3]>,
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Whitney function values and curls for every local edge.
fn whitney_all(dim: Dim, x: &[f64; 3]) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let (lam, dlam) = barycentric(dim, x);
    let edges: &[[usize; 2]] = match dim {
        Dim::Two => &TRI_EDGES,
        Dim::Three => &TET_EDGES,
    };
    let mut vals = Vec::with_capacity(edges.len());
    let mut curls = Vec::with_capacity(edges.len());
    for &[a, b] in edges {
        vals.push(sum3(scaled(dlam[b], lam[a]), scaled(dlam[a], -lam[b])));
        curls.push(scaled(cross(dlam[a], dlam[b]), 2.0));
    }
    (vals, curls)
}

fn eval_with(
    fns: &[VectorShapeFn],
    dim: Dim,
    x: &[f64; 3],
    scalar: impl Fn(usize) -> Result<ShapeSet>,
) -> Result<VectorShapeSet> {
    let (wv, wc) = whitney_all(dim, x);
    // pre-evaluate the degrees that occur
    let mut degrees: Vec<usize> = Vec::new();
    for f in fns {
        match &f.kind {
            ShapeKind::LowestOrder(_) => {}
            ShapeKind::Template { scalar, .. } | ShapeKind::Gradient { scalar } => degrees.push(scalar.degree),
            ShapeKind::NonGradientCell { index, .. } => {
                degrees.push(index.degree);
                degrees.push(index.degree - 1);
            }
        }
    }
    degrees.sort_unstable();
    degrees.dedup();
    let mut tables: HashMap<usize, ShapeSet> = HashMap::new();
    for q in degrees {
        tables.insert(q, scalar(q)?);
    }
    let mut values = Vec::with_capacity(fns.len());
    let mut curls = Vec::with_capacity(fns.len());
    for f in fns {
        let (v, c) = match &f.kind {
            ShapeKind::LowestOrder(e) => (wv[*e], wc[*e]),
            ShapeKind::Template { scalar, dir } => {
                let t = &tables[&scalar.degree];
                let n = scalar.position();
                let (bv, bg) = (t.values[n], t.grads[n]);
                let (dv, dc) = match dir {
                    Direction::Constant(d) => (*d, [0.0; 3]),
                    Direction::Whitney(coef) => {
                        let mut dv = [0.0; 3];
                        let mut dc = [0.0; 3];
                        for (e, &s) in coef.iter().enumerate() {
                            if s != 0.0 {
                                dv = sum3(dv, scaled(wv[e], s));
                                dc = sum3(dc, scaled(wc[e], s));
                            }
                        }
                        (dv, dc)
                    }
                };
                (scaled(dv, bv), sum3(cross(bg, dv), scaled(dc, bv)))
            }
            ShapeKind::Gradient { scalar } => (tables[&scalar.degree].grads[scalar.position()], [0.0; 3]),
            ShapeKind::NonGradientCell { index, axis } => {
                let q = index.degree;
                let mut lower = index.ijk;
                lower[*axis] -= 1;
                let low = MultiIndex { degree: q - 1, dim, ijk: lower };
                let tl = &tables[&(q - 1)];
                let th = &tables[&q];
                let mut ea = [0.0; 3];
                ea[*axis] = 1.0;
                let s = q as f64;
                let n = low.position();
                let g = th.grads[index.position()];
                let c = index.ijk[*axis] as f64 / s;
                let v = sum3(scaled(ea, s * tl.values[n]), scaled(g, -c));
                (v, scaled(cross(tl.grads[n], ea), s))
            }
        };
        values.push(v);
        curls.push(c);
    }
    Ok(VectorShapeSet { values, curls })
}

/// Evaluates a vector basis at a collapsed point (interior points only).
pub fn eval_vector_shapes(space: &SpaceDescriptor, cp: &CollapsedPoint) -> Result<VectorShapeSet> {
    if cp.dim != space.dim {
        return Err(FemError::SpaceMismatch("point and space dimension differ".into()));
    }
    let fns = basis(space)?;
    let x = duffy_forward(cp);
    eval_with(&fns, space.dim, &x, |q| bezier_eval(q, cp))
}

/// Evaluates a vector basis at a reference point anywhere on the closed
/// simplex.
pub fn eval_vector_shapes_at(space: &SpaceDescriptor, x: &[f64; 3]) -> Result<VectorShapeSet> {
    let fns = basis(space)?;
    eval_with(&fns, space.dim, x, |q| Ok(bezier_eval_closed(q, space.dim, x)))
}

/// Local keys of any space in local function order.
pub fn local_keys(space: &SpaceDescriptor) -> Result<Vec<LocalKey>> {
    match space.family {
        SpaceFamily::H1Bezier => Ok(h1_local_keys(space.degree, space.dim)),
        _ => Ok(basis(space)?.iter().map(|f| f.key.clone()).collect()),
    }
}
