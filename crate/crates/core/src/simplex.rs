//! Bézier bases on the reference triangle and tetrahedron.
//!
//! Reference triangle: `x(ξ,η) = (1-ξ-η) x₁ + η x₂ + ξ x₃`, so vertex 1 sits
//! at the origin, vertex 2 at `η = 1` and vertex 3 at `ξ = 1`. Reference
//! tetrahedron: `x = λ₁ x₁ + ζ x₂ + η x₃ + ξ x₄`. A multi-index `(i, j[, k])`
//! carries the exponents of `ξ`, `η` (and `ζ`), which makes the Duffy
//! collapse factor the basis into univariate Bernstein polynomials:
//! `b_ij = b_i^p(α) b_j^{p-i}(β)` and `b_ijk = b_i^p(α) b_j^{p-i}(β) b_k^{p-i-j}(γ)`.

use crate::bernstein::{binomial, eval_duals_into};
use crate::dual::Dual;
use crate::error::{FemError, Result};

/// Threshold for the collapse factors `1-α`, `1-β`.
pub const COLLAPSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    pub fn n_vertices(self) -> usize {
        self.n() + 1
    }

    pub fn from_usize(d: usize) -> Result<Dim> {
        match d {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            _ => Err(FemError::InvalidParam(format!("dimension {d}"))),
        }
    }
}

/// Index of one Bézier base function: `(i, j)` in 2D, `(i, j, k)` in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub degree: usize,
    pub dim: Dim,
    pub ijk: [usize; 3],
}

impl MultiIndex {
    pub fn tri(degree: usize, i: usize, j: usize) -> Result<Self> {
        if i + j > degree {
            return Err(FemError::Index { index: i + j, degree });
        }
        Ok(Self { degree, dim: Dim::Two, ijk: [i, j, 0] })
    }

    pub fn tet(degree: usize, i: usize, j: usize, k: usize) -> Result<Self> {
        if i + j + k > degree {
            return Err(FemError::Index { index: i + j + k, degree });
        }
        Ok(Self { degree, dim: Dim::Three, ijk: [i, j, k] })
    }

    /// Barycentric exponents per local vertex, padded with zero in 2D.
    pub fn exponents(&self) -> [usize; 4] {
        let [i, j, k] = self.ijk;
        match self.dim {
            Dim::Two => [self.degree - i - j, j, i, 0],
            Dim::Three => [self.degree - i - j - k, k, j, i],
        }
    }

    /// Builds the index from barycentric exponents (inverse of [`exponents`]).
    ///
    /// [`exponents`]: MultiIndex::exponents
    pub fn from_exponents(dim: Dim, exps: &[usize]) -> Self {
        let degree = exps[..dim.n_vertices()].iter().sum();
        let ijk = match dim {
            Dim::Two => [exps[2], exps[1], 0],
            Dim::Three => [exps[3], exps[2], exps[1]],
        };
        Self { degree, dim, ijk }
    }

    /// Position in [`traversal_order`].
    pub fn position(&self) -> usize {
        let p = self.degree;
        let [i, j, k] = self.ijk;
        match self.dim {
            Dim::Two => tri_position(p, i, j),
            Dim::Three => tet_position(p, i, j, k),
        }
    }

    /// Vertex polytope this index lives on.
    pub fn polytope(&self) -> Polytope {
        classify(self)
    }
}

pub(crate) fn tri_position(p: usize, i: usize, j: usize) -> usize {
    // Σ_{i'<i} (p - i' + 1) + j
    i * (p + 1) - i * i.saturating_sub(1) / 2 + j
}

pub(crate) fn tet_position(p: usize, i: usize, j: usize, k: usize) -> usize {
    let mut off = 0;
    for ii in 0..i {
        off += tri_count(p - ii);
    }
    off + tri_position(p - i, j, k)
}

/// Number of Bézier functions on the triangle, `(p+1)(p+2)/2`.
pub fn tri_count(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Number of Bézier functions on the tetrahedron, `(p+1)(p+2)(p+3)/6`.
pub fn tet_count(p: usize) -> usize {
    (p + 1) * (p + 2) * (p + 3) / 6
}

pub fn bezier_count(p: usize, dim: Dim) -> usize {
    match dim {
        Dim::Two => tri_count(p),
        Dim::Three => tet_count(p),
    }
}

/// Lexicographic order with `i` outermost: `(0,0) → (0,1) → … → (p,0)`.
pub fn traversal_order(p: usize, dim: Dim) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(bezier_count(p, dim));
    match dim {
        Dim::Two => {
            for i in 0..=p {
                for j in 0..=p - i {
                    out.push(MultiIndex { degree: p, dim, ijk: [i, j, 0] });
                }
            }
        }
        Dim::Three => {
            for i in 0..=p {
                for j in 0..=p - i {
                    for k in 0..=p - i - j {
                        out.push(MultiIndex { degree: p, dim, ijk: [i, j, k] });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolytopeKind {
    Vertex,
    Edge,
    Face,
    Cell,
}

/// A sub-simplex of the reference element.
///
/// Local ids: vertices `0..=d`; edges in the order `e12, e13, e23` (triangle)
/// or `e12, e13, e14, e23, e24, e34` (tetrahedron); faces `f123, f124, f134,
/// f234`. The cell has id 0. In 2D the triangle itself is the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Polytope {
    pub kind: PolytopeKind,
    pub local: usize,
}

pub const TRI_EDGES: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
pub const TET_FACES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];

impl Polytope {
    pub const fn vertex(local: usize) -> Self {
        Self { kind: PolytopeKind::Vertex, local }
    }
    pub const fn edge(local: usize) -> Self {
        Self { kind: PolytopeKind::Edge, local }
    }
    pub const fn face(local: usize) -> Self {
        Self { kind: PolytopeKind::Face, local }
    }
    pub const CELL: Polytope = Polytope { kind: PolytopeKind::Cell, local: 0 };

    /// Local vertices of the polytope in ascending order.
    pub fn vertices(&self, dim: Dim) -> Vec<usize> {
        match self.kind {
            PolytopeKind::Vertex => vec![self.local],
            PolytopeKind::Edge => match dim {
                Dim::Two => TRI_EDGES[self.local].to_vec(),
                Dim::Three => TET_EDGES[self.local].to_vec(),
            },
            PolytopeKind::Face => TET_FACES[self.local].to_vec(),
            PolytopeKind::Cell => (0..dim.n_vertices()).collect(),
        }
    }

    /// Polytope spanned by a sorted set of local vertices.
    pub fn from_vertices(dim: Dim, verts: &[usize]) -> Polytope {
        match verts.len() {
            1 => Polytope::vertex(verts[0]),
            2 => {
                let table: &[[usize; 2]] = match dim {
                    Dim::Two => &TRI_EDGES,
                    Dim::Three => &TET_EDGES,
                };
                let id = table.iter().position(|e| e == verts).expect("valid edge");
                Polytope::edge(id)
            }
            3 if dim == Dim::Three => {
                let id = TET_FACES.iter().position(|f| f == verts).expect("valid face");
                Polytope::face(id)
            }
            _ => Polytope::CELL,
        }
    }
}

/// Polytope of a base function: the sub-simplex spanned by the vertices
/// whose barycentric exponent is non-zero.
pub fn classify(mi: &MultiIndex) -> Polytope {
    let e = mi.exponents();
    let support: Vec<usize> = (0..mi.dim.n_vertices()).filter(|&v| e[v] > 0).collect();
    if support.is_empty() {
        // degree 0: the single constant belongs to the first vertex
        return Polytope::vertex(0);
    }
    Polytope::from_vertices(mi.dim, &support)
}

/// Point of the unit square / cube, mapped onto the simplex by the Duffy
/// collapse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapsedPoint {
    pub dim: Dim,
    pub coords: [f64; 3],
}

impl CollapsedPoint {
    pub fn new2(alpha: f64, beta: f64) -> Self {
        Self { dim: Dim::Two, coords: [alpha, beta, 0.0] }
    }
    pub fn new3(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { dim: Dim::Three, coords: [alpha, beta, gamma] }
    }
}

/// `ξ = α, η = (1-α)β, ζ = (1-α)(1-β)γ`.
pub fn duffy_forward(cp: &CollapsedPoint) -> [f64; 3] {
    let [a, b, g] = cp.coords;
    match cp.dim {
        Dim::Two => [a, (1.0 - a) * b, 0.0],
        Dim::Three => [a, (1.0 - a) * b, (1.0 - a) * (1.0 - b) * g],
    }
}

/// `α = ξ, β = η/(1-ξ), γ = ζ/(1-ξ-η)`.
pub fn duffy_inverse(dim: Dim, x: &[f64; 3]) -> Result<CollapsedPoint> {
    let d1 = 1.0 - x[0];
    if d1 < 1e-14 {
        return Err(FemError::SingularCollapse { denominator: d1 });
    }
    let beta = x[1] / d1;
    match dim {
        Dim::Two => Ok(CollapsedPoint::new2(x[0], beta)),
        Dim::Three => {
            let d2 = 1.0 - x[0] - x[1];
            if d2 < 1e-14 {
                return Err(FemError::SingularCollapse { denominator: d2 });
            }
            Ok(CollapsedPoint::new3(x[0], beta, x[2] / d2))
        }
    }
}

/// Scalar basis values and reference gradients at one point, in traversal
/// order. In 2D the third gradient component is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSet {
    pub degree: usize,
    pub dim: Dim,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 3]>,
}

impl ShapeSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, mi: &MultiIndex) -> f64 {
        self.values[mi.position()]
    }

    pub fn grad(&self, mi: &MultiIndex) -> [f64; 3] {
        self.grads[mi.position()]
    }
}

/// Bernstein tables `b^q(t)` for every degree `q ≤ p` at one coordinate.
struct Tables {
    rows: Vec<Vec<Dual>>,
}

impl Tables {
    fn new(p: usize, t: f64) -> Self {
        let rows = (0..=p)
            .map(|q| {
                let mut row = vec![Dual::default(); q + 1];
                eval_duals_into(q, t.clamp(0.0, 1.0), &mut row);
                row
            })
            .collect();
        Self { rows }
    }
}

/// Sum-factorised evaluation on the triangle at a collapsed point.
pub fn bezier_tri_eval(p: usize, cp: &CollapsedPoint) -> Result<ShapeSet> {
    let [alpha, beta, _] = cp.coords;
    let om = 1.0 - alpha;
    if om < COLLAPSE_TOL {
        return Err(FemError::SingularCollapse { denominator: om });
    }
    let mut a = vec![Dual::default(); p + 1];
    eval_duals_into(p, alpha.clamp(0.0, 1.0), &mut a);
    let b = Tables::new(p, beta);
    let n = tri_count(p);
    let mut values = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);
    for (i, ai) in a.iter().enumerate() {
        for bj in &b.rows[p - i] {
            let da = ai.der * bj.val;
            let db = ai.val * bj.der;
            values.push(ai.val * bj.val);
            // (D_α ξ)^{-T} ∇_α
            grads.push([da + beta * db / om, db / om, 0.0]);
        }
    }
    Ok(ShapeSet { degree: p, dim: Dim::Two, values, grads })
}

/// Sum-factorised evaluation on the tetrahedron at a collapsed point.
pub fn bezier_tet_eval(p: usize, cp: &CollapsedPoint) -> Result<ShapeSet> {
    let [alpha, beta, gamma] = cp.coords;
    let oa = 1.0 - alpha;
    let ob = 1.0 - beta;
    if oa < COLLAPSE_TOL {
        return Err(FemError::SingularCollapse { denominator: oa });
    }
    if ob < COLLAPSE_TOL {
        return Err(FemError::SingularCollapse { denominator: ob });
    }
    let mut a = vec![Dual::default(); p + 1];
    eval_duals_into(p, alpha.clamp(0.0, 1.0), &mut a);
    let bt = Tables::new(p, beta);
    let gt = Tables::new(p, gamma);
    let n = tet_count(p);
    let mut values = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);
    let oab = oa * ob;
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in bt.rows[p - i].iter().enumerate() {
            for gk in &gt.rows[p - i - j] {
                let v_bg = bj.val * gk.val;
                let da = ai.der * v_bg;
                let db = ai.val * bj.der * gk.val;
                let dg = ai.val * bj.val * gk.der;
                values.push(ai.val * v_bg);
                grads.push([
                    da + beta * db / oa + gamma * dg / oab,
                    db / oa + gamma * dg / oab,
                    dg / oab,
                ]);
            }
        }
    }
    Ok(ShapeSet { degree: p, dim: Dim::Three, values, grads })
}

pub fn bezier_eval(p: usize, cp: &CollapsedPoint) -> Result<ShapeSet> {
    match cp.dim {
        Dim::Two => bezier_tri_eval(p, cp),
        Dim::Three => bezier_tet_eval(p, cp),
    }
}

/// Barycentric coordinates and their constant gradients on the reference
/// simplex.
pub fn barycentric(dim: Dim, x: &[f64; 3]) -> ([f64; 4], [[f64; 3]; 4]) {
    match dim {
        Dim::Two => (
            [1.0 - x[0] - x[1], x[1], x[0], 0.0],
            [[-1.0, -1.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0; 3]],
        ),
        Dim::Three => (
            [1.0 - x[0] - x[1] - x[2], x[2], x[1], x[0]],
            [[-1.0, -1.0, -1.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]],
        ),
    }
}

/// Closed-form evaluation from barycentric powers, valid on the whole closed
/// simplex including the collapse lines. Used for boundary traces and point
/// evaluation.
pub fn bezier_eval_closed(p: usize, dim: Dim, x: &[f64; 3]) -> ShapeSet {
    let (lam, dlam) = barycentric(dim, x);
    let nv = dim.n_vertices();
    // powers[v][e] = λ_v^e
    let powers: Vec<Vec<f64>> = (0..nv)
        .map(|v| {
            let mut row = vec![1.0; p + 1];
            for e in 1..=p {
                row[e] = row[e - 1] * lam[v];
            }
            row
        })
        .collect();
    let order = traversal_order(p, dim);
    let mut values = Vec::with_capacity(order.len());
    let mut grads = Vec::with_capacity(order.len());
    for mi in &order {
        let e = mi.exponents();
        let coeff = multinomial(p, &e[..nv]);
        let mut val = coeff;
        for v in 0..nv {
            val *= powers[v][e[v]];
        }
        let mut g = [0.0; 3];
        for v in 0..nv {
            if e[v] == 0 {
                continue;
            }
            let mut term = coeff * e[v] as f64 * powers[v][e[v] - 1];
            for w in 0..nv {
                if w != v {
                    term *= powers[w][e[w]];
                }
            }
            for c in 0..3 {
                g[c] += term * dlam[v][c];
            }
        }
        values.push(val);
        grads.push(g);
    }
    ShapeSet { degree: p, dim, values, grads }
}

pub fn multinomial(n: usize, parts: &[usize]) -> f64 {
    let mut rest = n;
    let mut acc = 1.0;
    for &k in parts {
        acc *= binomial(rest, k);
        rest -= k;
    }
    acc
}
