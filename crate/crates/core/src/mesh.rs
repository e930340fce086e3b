//! Structured triangulations of rectangles with full edge topology.
//!
//! Every edge carries a normal that is fixed at construction. For an interior
//! edge shared by `left` (E_i) and `right` (E_j) the normal points from E_i to
//! E_j, so that the jump of a broken function is `ψ|E_i − ψ|E_j`. Boundary
//! edges carry the outward normal of the domain; there the jump and the
//! average both reduce to the single trace.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side of the rectangle a boundary edge lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Bottom,
    Top,
    Left,
    Right,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Bottom,
        BoundaryTag::Top,
        BoundaryTag::Left,
        BoundaryTag::Right,
    ];
}

/// Index into [`TriMesh::edges`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

#[derive(Clone, Debug)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// E_i for interior edges, the owner element for boundary edges.
    pub left: usize,
    /// E_j; `None` on the boundary.
    pub right: Option<usize>,
    pub normal: [f64; 2],
    pub length: f64,
    pub tag: Option<BoundaryTag>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// The orientation triple used to define jumps and averages on an edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeOrientation {
    pub left: usize,
    pub right: Option<usize>,
    pub normal: [f64; 2],
}

impl EdgeOrientation {
    /// `⟦ψ⟧` from the two traces; on a boundary edge the trace itself.
    pub fn jump(&self, left_trace: f64, right_trace: f64) -> f64 {
        match self.right {
            Some(_) => left_trace - right_trace,
            None => left_trace,
        }
    }

    /// `{ψ}` from the two traces; on a boundary edge the trace itself.
    pub fn average(&self, left_trace: f64, right_trace: f64) -> f64 {
        match self.right {
            Some(_) => 0.5 * (left_trace + right_trace),
            None => left_trace,
        }
    }
}

/// Affine map data of one triangle: `x = origin + J ξ` on the reference
/// triangle with vertices (0,0), (1,0), (0,1).
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub origin: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    pub inverse_jacobian: [[f64; 2]; 2],
    pub det: f64,
    pub area: f64,
    pub diameter: f64,
    pub inradius: f64,
    pub centroid: [f64; 2],
}

impl ElementGeometry {
    fn new(p: [[f64; 2]; 3]) -> Self {
        let j = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1]],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        let side = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let (l0, l1, l2) = (side(p[1], p[2]), side(p[2], p[0]), side(p[0], p[1]));
        let area = 0.5 * det.abs();
        ElementGeometry {
            origin: p[0],
            jacobian: j,
            inverse_jacobian: inv,
            det,
            area,
            diameter: l0.max(l1).max(l2),
            inradius: 2.0 * area / (l0 + l1 + l2),
            centroid: [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ],
        }
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> [f64; 2] {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let m = &self.inverse_jacobian;
        [m[0][0] * d[0] + m[0][1] * d[1], m[1][0] * d[0] + m[1][1] * d[1]]
    }

    /// Maps a reference gradient to physical space (`J^{-T} ∇ξ`).
    #[inline]
    pub fn physical_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inverse_jacobian;
        [m[0][0] * g[0] + m[1][0] * g[1], m[0][1] * g[0] + m[1][1] * g[1]]
    }
}

/// Conforming triangulation of `[0, Lx] × [0, Ly]`.
#[derive(Clone, Debug)]
pub struct TriMesh {
    extents: [f64; 2],
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    geometry: Vec<ElementGeometry>,
    h: f64,
}

/// Lower bound on inradius / diameter enforced when no other is requested.
pub const DEFAULT_MIN_REGULARITY: f64 = 0.1;

impl TriMesh {
    /// Splits each of the `nx × ny` cells along its lower-left to upper-right
    /// diagonal into two counterclockwise triangles.
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::rectangle_with_regularity(lx, ly, nx, ny, DEFAULT_MIN_REGULARITY)
    }

    pub fn rectangle_with_regularity(
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
        min_regularity: f64,
    ) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::invalid(format!(
                "domain extents must be positive and finite, got {lx} x {ly}"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!(
                "cell counts must be at least 1, got {nx} x {ny}"
            )));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        Self::from_parts([lx, ly], vertices, triangles, min_regularity)
    }

    fn from_parts(
        extents: [f64; 2],
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        min_regularity: f64,
    ) -> Result<Self> {
        let geometry: Vec<ElementGeometry> = triangles
            .iter()
            .map(|t| ElementGeometry::new([vertices[t[0]], vertices[t[1]], vertices[t[2]]]))
            .collect();
        for (e, g) in geometry.iter().enumerate() {
            if g.det <= 0.0 {
                return Err(Error::invalid(format!("element {e} is not counterclockwise")));
            }
            let ratio = g.inradius / g.diameter;
            if ratio < min_regularity {
                return Err(Error::invalid(format!(
                    "element {e} violates shape regularity: inradius/diameter = {ratio:.4} < {min_regularity}"
                )));
            }
        }

        // (sorted vertex pair) -> edge index, in order of first appearance
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        for (e, t) in triangles.iter().enumerate() {
            for local in 0..3 {
                let (p, q) = (t[local], t[(local + 1) % 3]);
                let key = (p.min(q), p.max(q));
                match lookup.get(&key) {
                    Some(&id) => {
                        let edge = &mut edges[id];
                        if edge.right.is_some() {
                            return Err(Error::invalid("edge shared by more than two elements"));
                        }
                        edge.right = Some(e);
                    }
                    None => {
                        let (a, b) = (vertices[p], vertices[q]);
                        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                        let length = (dx * dx + dy * dy).sqrt();
                        lookup.insert(key, edges.len());
                        edges.push(Edge {
                            vertices: [p, q],
                            left: e,
                            right: None,
                            // outward normal of a counterclockwise triangle
                            normal: [dy / length, -dx / length],
                            length,
                            tag: None,
                        });
                    }
                }
            }
        }

        let [lx, ly] = extents;
        let tol = 1e-12 * lx.max(ly);
        for edge in edges.iter_mut().filter(|e| e.right.is_none()) {
            let (a, b) = (vertices[edge.vertices[0]], vertices[edge.vertices[1]]);
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            edge.tag = Some(if mid[1].abs() < tol {
                BoundaryTag::Bottom
            } else if (mid[1] - ly).abs() < tol {
                BoundaryTag::Top
            } else if mid[0].abs() < tol {
                BoundaryTag::Left
            } else if (mid[0] - lx).abs() < tol {
                BoundaryTag::Right
            } else {
                return Err(Error::invalid("boundary edge not on the rectangle boundary"));
            });
        }

        let interior = (0..edges.len()).filter(|&i| edges[i].right.is_some()).collect();
        let boundary = (0..edges.len()).filter(|&i| edges[i].right.is_none()).collect();
        let h = geometry.iter().map(|g| g.diameter).fold(0.0, f64::max);
        Ok(TriMesh {
            extents,
            vertices,
            triangles,
            edges,
            interior,
            boundary,
            geometry,
            h,
        })
    }

    pub fn extents(&self) -> [f64; 2] {
        self.extents
    }

    /// `|Ω|`
    pub fn domain_area(&self) -> f64 {
        self.extents[0] * self.extents[1]
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Result<&Edge> {
        self.edges
            .get(id.0)
            .ok_or_else(|| Error::invalid(format!("unknown edge id {}", id.0)))
    }

    pub fn interior_edges(&self) -> impl ExactSizeIterator<Item = &Edge> + '_ {
        self.interior.iter().map(move |&i| &self.edges[i])
    }

    pub fn boundary_edges(&self) -> impl ExactSizeIterator<Item = &Edge> + '_ {
        self.boundary.iter().map(move |&i| &self.edges[i])
    }

    pub fn interior_edge_ids(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_edge_ids(&self) -> &[usize] {
        &self.boundary
    }

    pub fn geometry(&self, element: usize) -> &ElementGeometry {
        &self.geometry[element]
    }

    pub fn geometries(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Smallest inradius / diameter ratio over all elements.
    pub fn regularity(&self) -> f64 {
        self.geometry
            .iter()
            .map(|g| g.inradius / g.diameter)
            .fold(f64::INFINITY, f64::min)
    }

    /// The fixed `(E_i, E_j, n_e)` triple of an edge.
    pub fn orientation(&self, id: EdgeId) -> Result<EdgeOrientation> {
        let e = self.edge(id)?;
        Ok(EdgeOrientation {
            left: e.left,
            right: e.right,
            normal: e.normal,
        })
    }

    /// Element containing `x` (first match; points on shared edges resolve to
    /// the lower-numbered element).
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        const TOL: f64 = 1e-12;
        self.geometry.iter().position(|g| {
            let xi = g.to_reference(x);
            xi[0] >= -TOL && xi[1] >= -TOL && xi[0] + xi[1] <= 1.0 + TOL
        })
    }

    pub fn edge_endpoints(&self, edge: &Edge) -> ([f64; 2], [f64; 2]) {
        (self.vertices[edge.vertices[0]], self.vertices[edge.vertices[1]])
    }
}
