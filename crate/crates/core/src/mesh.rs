//! Simplicial meshes with global orientation.
//!
//! Cell vertex lists are sorted ascending by global id, so local vertex `k`
//! of a cell is always its `k`-th smallest global vertex. Edges and faces
//! inherit this order, which makes every shared polytope traverse the same
//! way from both sides.
//!
//! Triangle map: `x = x₁ + ξ (x₃-x₁) + η (x₂-x₁)`, so `J = [x₃-x₁, x₂-x₁]`.
//! Tetrahedron map: `J = [x₄-x₁, x₃-x₁, x₂-x₁]`. The determinant may be
//! negative; integrals use `|det J|`.
//!
//! # JSON schema
//!
//! ```json
//! {
//!   "dim": 2,
//!   "vertices": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
//!   "cells": [[0, 1, 2]],
//!   "boundary_tags": { "outer": [[0, 1], [1, 2], [0, 2]] }
//! }
//! ```
//!
//! `boundary_tags` is optional and maps a label to a list of boundary facets
//! (vertex-id pairs in 2D, triples in 3D).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FemError, Result};
use crate::simplex::{Dim, Polytope, PolytopeKind, TET_EDGES, TET_FACES, TRI_EDGES};

/// Affine map from the reference simplex to one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub origin: [f64; 3],
    /// Columns are the images of the reference axes. In 2D the third row and
    /// column are those of the identity.
    pub jac: [[f64; 3]; 3],
    pub det: f64,
    pub inv_t: [[f64; 3]; 3],
}

impl AffineMap {
    pub fn new(dim: Dim, verts: &[[f64; 3]]) -> Self {
        let x1 = verts[0];
        let col = |v: [f64; 3]| [v[0] - x1[0], v[1] - x1[1], v[2] - x1[2]];
        let cols = match dim {
            Dim::Two => [col(verts[2]), col(verts[1]), [0.0, 0.0, 1.0]],
            Dim::Three => [col(verts[3]), col(verts[2]), col(verts[1])],
        };
        let mut jac = [[0.0; 3]; 3];
        for (c, v) in cols.iter().enumerate() {
            for r in 0..3 {
                jac[r][c] = v[r];
            }
        }
        let det = det3(&jac);
        let inv = inverse3(&jac, det);
        let mut inv_t = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                inv_t[r][c] = inv[c][r];
            }
        }
        Self { origin: x1, jac, det, inv_t }
    }

    pub fn abs_det(&self) -> f64 {
        self.det.abs()
    }

    pub fn forward(&self, xi: &[f64; 3]) -> [f64; 3] {
        let mut x = self.origin;
        for r in 0..3 {
            for c in 0..3 {
                x[r] += self.jac[r][c] * xi[c];
            }
        }
        x
    }

    /// Reference coordinates of a physical point.
    pub fn inverse(&self, x: &[f64; 3]) -> [f64; 3] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1], x[2] - self.origin[2]];
        // J^{-1} d = (J^{-T})^T d
        let mut xi = [0.0; 3];
        for r in 0..3 {
            for c in 0..3 {
                xi[r] += self.inv_t[c][r] * d[c];
            }
        }
        xi
    }

    /// Covariant map `J^{-T} v`.
    pub fn covariant(&self, v: &[f64; 3]) -> [f64; 3] {
        matvec(&self.inv_t, v)
    }

    /// Contravariant curl map `J c / det J`.
    pub fn curl(&self, c: &[f64; 3]) -> [f64; 3] {
        let v = matvec(&self.jac, c);
        [v[0] / self.det, v[1] / self.det, v[2] / self.det]
    }
}

pub fn matvec(m: &[[f64; 3]; 3], v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    inv
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: Dim,
    /// Coordinates padded with zeros to three components.
    pub vertices: Vec<[f64; 3]>,
    /// Sorted vertex ids per cell.
    pub cells: Vec<Vec<usize>>,
    /// Sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    /// Sorted vertex triples (3D only).
    pub faces: Vec<[usize; 3]>,
    /// Global edge id of each local edge.
    pub cell_edges: Vec<Vec<usize>>,
    /// Global face id of each local face (3D only).
    pub cell_faces: Vec<Vec<usize>>,
    pub edge_cells: Vec<Vec<usize>>,
    pub face_cells: Vec<Vec<usize>>,
    /// Ids of boundary facets: edges in 2D, faces in 3D.
    pub boundary_facets: Vec<usize>,
    pub boundary_tags: BTreeMap<String, Vec<Vec<usize>>>,
    pub maps: Vec<AffineMap>,
}

impl Mesh {
    pub fn build(
        dim: Dim,
        vertices: Vec<[f64; 3]>,
        cells: Vec<Vec<usize>>,
        boundary_tags: BTreeMap<String, Vec<Vec<usize>>>,
    ) -> Result<Mesh> {
        let nv = dim.n_vertices();
        let mut sorted_cells = Vec::with_capacity(cells.len());
        for (ci, c) in cells.into_iter().enumerate() {
            if c.len() != nv {
                return Err(FemError::InvalidParam(format!("cell {ci} has {} vertices, expected {nv}", c.len())));
            }
            for &v in &c {
                if v >= vertices.len() {
                    return Err(FemError::BadIndex { cell: ci, vertex: v });
                }
            }
            let mut s = c;
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(FemError::DegenerateCell { cell: ci, det: 0.0 });
            }
            sorted_cells.push(s);
        }

        let mut maps = Vec::with_capacity(sorted_cells.len());
        for (ci, c) in sorted_cells.iter().enumerate() {
            let pts: Vec<[f64; 3]> = c.iter().map(|&v| vertices[v]).collect();
            let map = AffineMap::new(dim, &pts);
            let mut h: f64 = 0.0;
            for a in 0..nv {
                for b in a + 1..nv {
                    h = h.max(dist(&pts[a], &pts[b]));
                }
            }
            if map.abs_det() < 1e-14 * h.powi(dim.n() as i32) || h == 0.0 {
                return Err(FemError::DegenerateCell { cell: ci, det: map.det });
            }
            maps.push(map);
        }

        let local_edges: &[[usize; 2]] = match dim {
            Dim::Two => &TRI_EDGES,
            Dim::Three => &TET_EDGES,
        };
        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_edges = Vec::with_capacity(sorted_cells.len());
        for (ci, c) in sorted_cells.iter().enumerate() {
            let mut ids = Vec::with_capacity(local_edges.len());
            for &[a, b] in local_edges {
                let key = [c[a], c[b]];
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_cells.push(Vec::new());
                    edges.len() - 1
                });
                edge_cells[id].push(ci);
                ids.push(id);
            }
            cell_edges.push(ids);
        }

        let mut faces = Vec::new();
        let mut face_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_faces = Vec::new();
        if dim == Dim::Three {
            let mut face_ids: HashMap<[usize; 3], usize> = HashMap::new();
            for (ci, c) in sorted_cells.iter().enumerate() {
                let mut ids = Vec::with_capacity(4);
                for &[a, b, d] in &TET_FACES {
                    let key = [c[a], c[b], c[d]];
                    let id = *face_ids.entry(key).or_insert_with(|| {
                        faces.push(key);
                        face_cells.push(Vec::new());
                        faces.len() - 1
                    });
                    face_cells[id].push(ci);
                    ids.push(id);
                }
                cell_faces.push(ids);
            }
        }

        let boundary_facets = match dim {
            Dim::Two => (0..edges.len()).filter(|&e| edge_cells[e].len() == 1).collect(),
            Dim::Three => (0..faces.len()).filter(|&f| face_cells[f].len() == 1).collect(),
        };

        let mut tags = BTreeMap::new();
        for (label, facets) in boundary_tags {
            let mut list = Vec::with_capacity(facets.len());
            for f in facets {
                if f.len() != dim.n() || f.iter().any(|&v| v >= vertices.len()) {
                    return Err(FemError::InvalidParam(format!("boundary tag '{label}' has an invalid facet {f:?}")));
                }
                let mut s = f;
                s.sort_unstable();
                list.push(s);
            }
            tags.insert(label, list);
        }

        Ok(Mesh {
            dim,
            vertices,
            cells: sorted_cells,
            edges,
            faces,
            cell_edges,
            cell_faces,
            edge_cells,
            face_cells,
            boundary_facets,
            boundary_tags: tags,
            maps,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Global id of a local polytope of a cell. Vertices map to vertex ids;
    /// the cell maps to the cell id.
    pub fn global_polytope(&self, cell: usize, poly: Polytope) -> usize {
        match poly.kind {
            PolytopeKind::Vertex => self.cells[cell][poly.local],
            PolytopeKind::Edge => self.cell_edges[cell][poly.local],
            PolytopeKind::Face => self.cell_faces[cell][poly.local],
            PolytopeKind::Cell => cell,
        }
    }

    /// Sorted vertex ids of each boundary facet.
    pub fn boundary_facet_vertices(&self) -> Vec<Vec<usize>> {
        self.boundary_facets
            .iter()
            .map(|&f| match self.dim {
                Dim::Two => self.edges[f].to_vec(),
                Dim::Three => self.faces[f].to_vec(),
            })
            .collect()
    }

    /// Flags for vertices, edges and faces lying on the boundary.
    pub fn boundary_flags(&self) -> BoundaryFlags {
        let mut vertex = vec![false; self.vertices.len()];
        let mut edge = vec![false; self.edges.len()];
        let mut face = vec![false; self.faces.len()];
        let edge_id: HashMap<[usize; 2], usize> = self.edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        for &f in &self.boundary_facets {
            match self.dim {
                Dim::Two => {
                    edge[f] = true;
                    for v in self.edges[f] {
                        vertex[v] = true;
                    }
                }
                Dim::Three => {
                    face[f] = true;
                    let [a, b, c] = self.faces[f];
                    for v in [a, b, c] {
                        vertex[v] = true;
                    }
                    for e in [[a, b], [a, c], [b, c]] {
                        edge[edge_id[&e]] = true;
                    }
                }
            }
        }
        BoundaryFlags { vertex, edge, face }
    }

    /// Sum of cell measures.
    pub fn volume(&self) -> f64 {
        let fact = match self.dim {
            Dim::Two => 2.0,
            Dim::Three => 6.0,
        };
        self.maps.iter().map(|m| m.abs_det() / fact).sum()
    }

    /// Largest edge length.
    pub fn h_max(&self) -> f64 {
        self.edges
            .iter()
            .map(|[a, b]| dist(&self.vertices[*a], &self.vertices[*b]))
            .fold(0.0, f64::max)
    }

    /// Cell containing `x` and the reference coordinates there. Ties on
    /// shared boundaries go to the lowest cell id.
    pub fn locate(&self, x: &[f64; 3]) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = 1e-12;
        let n = self.dim.n();
        for (ci, map) in self.maps.iter().enumerate() {
            let mut xi = map.inverse(x);
            if self.dim == Dim::Two {
                xi[2] = 0.0;
            }
            let s: f64 = xi[..n].iter().sum();
            if xi[..n].iter().all(|c| *c >= -TOL) && s <= 1.0 + TOL {
                for c in xi[..n].iter_mut() {
                    *c = c.max(0.0);
                }
                let s: f64 = xi[..n].iter().sum();
                if s > 1.0 {
                    for c in xi[..n].iter_mut() {
                        *c /= s;
                    }
                }
                return Some((ci, xi));
            }
        }
        None
    }

    pub fn read_json(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| FemError::Io(format!("{}: {e}", path.display())))?;
        Mesh::from_json_str(&text)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| FemError::Io(format!("{}: {e}", path.display())))
    }

    pub fn from_json_str(text: &str) -> Result<Mesh> {
        let file: MeshFile = serde_json::from_str(text).map_err(|e| FemError::Parse {
            context: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let dim = Dim::from_usize(file.dim).map_err(|_| FemError::Parse {
            context: "dim".into(),
            message: format!("expected 2 or 3, found {}", file.dim),
        })?;
        let mut vertices = Vec::with_capacity(file.vertices.len());
        for (i, v) in file.vertices.iter().enumerate() {
            if v.len() != dim.n() {
                return Err(FemError::Parse {
                    context: format!("vertices[{i}]"),
                    message: format!("expected {} coordinates, found {}", dim.n(), v.len()),
                });
            }
            let mut p = [0.0; 3];
            p[..v.len()].copy_from_slice(v);
            vertices.push(p);
        }
        for (i, c) in file.cells.iter().enumerate() {
            if c.len() != dim.n_vertices() {
                return Err(FemError::Parse {
                    context: format!("cells[{i}]"),
                    message: format!("expected {} vertex ids, found {}", dim.n_vertices(), c.len()),
                });
            }
        }
        Mesh::build(dim, vertices, file.cells, file.boundary_tags)
    }

    pub fn to_json_string(&self) -> String {
        let n = self.dim.n();
        let file = MeshFile {
            dim: n,
            vertices: self.vertices.iter().map(|v| v[..n].to_vec()).collect(),
            cells: self.cells.clone(),
            boundary_tags: self.boundary_tags.clone(),
        };
        serde_json::to_string_pretty(&file).expect("mesh serialises")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlags {
    pub vertex: Vec<bool>,
    pub edge: Vec<bool>,
    pub face: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeshFile {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    #[serde(default)]
    boundary_tags: BTreeMap<String, Vec<Vec<usize>>>,
}

pub fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Disk of the given radius built from concentric rings: ring `k` carries
/// `6k` equally spaced points at radius `kR/n`, `n = ceil(R/h)`. Neighbouring
/// rings are stitched by a merge walk over angles, giving `6n²` triangles.
pub fn generate_disk(radius: f64, target_h: f64) -> Result<Mesh> {
    if !(radius > 0.0 && target_h > 0.0) {
        return Err(FemError::InvalidParam(format!("disk radius {radius} and h {target_h} must be positive")));
    }
    let n = (radius / target_h).ceil().max(1.0) as usize;
    generate_disk_rings(radius, n)
}

/// Disk with exactly `n` rings.
pub fn generate_disk_rings(radius: f64, n: usize) -> Result<Mesh> {
    if !(radius > 0.0) || n == 0 {
        return Err(FemError::InvalidParam(format!("disk radius {radius} and ring count {n}")));
    }
    let mut vertices = vec![[0.0; 3]];
    let mut rings: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..=n {
        let r = radius * k as f64 / n as f64;
        let m = 6 * k;
        let mut ring = Vec::with_capacity(m);
        for j in 0..m {
            let t = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            ring.push(vertices.len());
            vertices.push([r * t.cos(), r * t.sin(), 0.0]);
        }
        rings.push(ring);
    }
    let mut cells = Vec::with_capacity(6 * n * n);
    for k in 1..=n {
        let inner = &rings[k - 1];
        let outer = &rings[k];
        let (ni, no) = (inner.len(), outer.len());
        if k == 1 {
            for j in 0..no {
                cells.push(vec![inner[0], outer[j], outer[(j + 1) % no]]);
            }
            continue;
        }
        let (mut i, mut o) = (0, 0);
        while i < ni || o < no {
            let next_i = (i + 1) as f64 / ni as f64;
            let next_o = (o + 1) as f64 / no as f64;
            if o < no && (i == ni || next_o <= next_i) {
                cells.push(vec![inner[i % ni], outer[o], outer[(o + 1) % no]]);
                o += 1;
            } else {
                cells.push(vec![inner[i], inner[(i + 1) % ni], outer[o % no]]);
                i += 1;
            }
        }
    }
    let outer = &rings[n];
    let facets = (0..outer.len()).map(|j| vec![outer[j], outer[(j + 1) % outer.len()]]).collect();
    let mut tags = BTreeMap::new();
    tags.insert("boundary".to_string(), facets);
    Mesh::build(Dim::Two, vertices, cells, tags)
}

/// Axis-aligned box `bounds[d] = (lo, hi)` with `n[d]` intervals per axis.
/// Quads split into two triangles along the main diagonal, hexahedra into six
/// tetrahedra sharing the main diagonal. Faces are tagged `xmin`, `xmax`, …
pub fn generate_box(bounds: &[(f64, f64)], n: &[usize]) -> Result<Mesh> {
    let d = bounds.len();
    if !(d == 2 || d == 3) || n.len() != d {
        return Err(FemError::InvalidParam("box needs 2 or 3 axes with matching counts".into()));
    }
    for a in 0..d {
        if !(bounds[a].1 > bounds[a].0) || n[a] == 0 {
            return Err(FemError::InvalidParam(format!("axis {a}: bounds {:?}, count {}", bounds[a], n[a])));
        }
    }
    let dim = Dim::from_usize(d)?;
    let nx = n[0] + 1;
    let ny = n[1] + 1;
    let nz = if d == 3 { n[2] + 1 } else { 1 };
    let id = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let coord = |a: usize, i: usize| bounds[a].0 + (bounds[a].1 - bounds[a].0) * i as f64 / n[a] as f64;
    let mut vertices = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let z = if d == 3 { coord(2, k) } else { 0.0 };
                vertices.push([coord(0, i), coord(1, j), z]);
            }
        }
    }
    let mut cells = Vec::new();
    if d == 2 {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let (a, b, c, e) = (id(i, j, 0), id(i + 1, j, 0), id(i, j + 1, 0), id(i + 1, j + 1, 0));
                cells.push(vec![a, b, e]);
                cells.push(vec![a, e, c]);
            }
        }
    } else {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    for perm in perms {
                        let mut c = [i, j, k];
                        let mut tet = vec![id(c[0], c[1], c[2])];
                        for axis in perm {
                            c[axis] += 1;
                            tet.push(id(c[0], c[1], c[2]));
                        }
                        cells.push(tet);
                    }
                }
            }
        }
    }
    let mut mesh = Mesh::build(dim, vertices, cells, BTreeMap::new())?;
    let names = [("xmin", "xmax"), ("ymin", "ymax"), ("zmin", "zmax")];
    let mut tags: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    for facet in mesh.boundary_facet_vertices() {
        for a in 0..d {
            let on = |target: f64| facet.iter().all(|&v| (mesh.vertices[v][a] - target).abs() < 1e-12);
            if on(bounds[a].0) {
                tags.entry(names[a].0.into()).or_default().push(facet.clone());
            } else if on(bounds[a].1) {
                tags.entry(names[a].1.into()).or_default().push(facet.clone());
            }
        }
    }
    mesh.boundary_tags = tags;
    Ok(mesh)
}
