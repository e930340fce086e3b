//! Assembly of the interior-penalty bilinear and trilinear forms.
//!
//! Convention: entry `(row, col)` of an assembled matrix holds
//! `form(trial = φ_col, test = φ_row)`.

mod cache;

use std::ops::Deref;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::BoundaryTag;
use crate::space::{Discretization, FieldVector, SpaceKind};

use cache::{dot, grad_dot, BasisCache, EdgeData};

/// Physical coefficients and the penalty parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormParams {
    /// Penalty `σ_e`, one global value.
    pub sigma: f64,
    /// Dielectric coefficient.
    pub mu: f64,
    /// Viscosity.
    pub nu: f64,
    pub kappa: [f64; 2],
    pub beta: [f64; 2],
}

impl Default for FormParams {
    fn default() -> Self {
        FormParams {
            sigma: 10.0,
            mu: 1.0,
            nu: 1.0,
            kappa: [1.0, 1.0],
            beta: [1.0, -1.0],
        }
    }
}

impl FormParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("mu", self.mu),
            ("nu", self.nu),
            ("kappa1", self.kappa[0]),
            ("kappa2", self.kappa[1]),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("beta must be finite"));
        }
        Ok(())
    }
}

/// Treatment of the convection forms on `∂Ω`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvectionBoundary {
    /// The scalar form has no boundary terms; the vector form takes jump and
    /// average equal to the trace. Neither is skew unless `w·n = 0`.
    Literal,
    /// The exterior trace is taken as zero, so jump = trace and average =
    /// half the trace on `∂Ω` for every factor. Both forms are then exactly
    /// skew-symmetric for any advecting field.
    #[default]
    ZeroExterior,
}

/// An assembled matrix together with the spaces it maps between.
#[derive(Clone, Debug)]
pub struct AssembledOperator {
    pub matrix: SparseMatrix,
    /// Test space.
    pub rows: SpaceKind,
    /// Trial space.
    pub cols: SpaceKind,
}

impl Deref for AssembledOperator {
    type Target = SparseMatrix;
    fn deref(&self) -> &SparseMatrix {
        &self.matrix
    }
}

/// Boundary data for the potential in the charged-reservoir setting.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBoundary {
    /// Weakly imposed `φ = g` on these sides.
    pub dirichlet: Vec<(BoundaryTag, f64)>,
    /// Prescribed normal derivative `∇φ·n` on these sides; sides in neither
    /// list are insulated.
    pub flux: Vec<(BoundaryTag, f64)>,
}

impl PotentialBoundary {
    pub fn validate(&self) -> Result<()> {
        let mut seen = Vec::new();
        for tag in self.dirichlet.iter().chain(&self.flux).map(|(t, _)| *t) {
            if seen.contains(&tag) {
                return Err(Error::invalid(format!("boundary side {tag:?} is assigned twice")));
            }
            seen.push(tag);
        }
        Ok(())
    }

    fn dirichlet_value(&self, tag: Option<BoundaryTag>) -> Option<f64> {
        tag.and_then(|t| self.dirichlet.iter().find(|(d, _)| *d == t).map(|(_, g)| *g))
    }

    fn flux_value(&self, tag: Option<BoundaryTag>) -> Option<f64> {
        tag.and_then(|t| self.flux.iter().find(|(d, _)| *d == t).map(|(_, g)| *g))
    }
}

type Triplets = Vec<(usize, usize, f64)>;

/// Runs `f` over `0..n` in parallel and concatenates the per-item triplets in
/// item order, so the assembled matrix is independent of scheduling.
fn gather(nrows: usize, ncols: usize, n: usize, f: impl Fn(usize, &mut Triplets) + Sync) -> SparseMatrix {
    const CHUNK: usize = 256;
    let parts: Vec<Triplets> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut t = Vec::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                f(i, &mut t);
            }
            t
        })
        .collect();
    let mut b = TripletBuilder::with_capacity(nrows, ncols, parts.iter().map(Vec::len).sum());
    for part in parts {
        for (r, c, v) in part {
            b.push(r, c, v);
        }
    }
    b.build()
}

/// Vector analogue of [`gather`].
fn gather_vec(len: usize, n: usize, f: impl Fn(usize, &mut Vec<(usize, f64)>) + Sync) -> Vec<f64> {
    const CHUNK: usize = 256;
    let parts: Vec<Vec<(usize, f64)>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut t = Vec::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                f(i, &mut t);
            }
            t
        })
        .collect();
    let mut out = vec![0.0; len];
    for part in parts {
        for (i, v) in part {
            out[i] += v;
        }
    }
    out
}

/// Assembles every form of the scheme on one [`Discretization`].
#[derive(Clone, Debug)]
pub struct Assembler {
    disc: Arc<Discretization>,
    scalar: BasisCache,
    pressure: BasisCache,
}

impl Assembler {
    pub fn new(disc: Arc<Discretization>) -> Self {
        let q = &disc.quad;
        let scalar = BasisCache::new(&disc.mesh, &disc.scalar, &q.element, &q.edge);
        let pressure = BasisCache::new(&disc.mesh, &disc.pressure, &q.element, &q.edge);
        Assembler {
            disc,
            scalar,
            pressure,
        }
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    /// Physical gradients of all basis functions of `cache` at element point `q`.
    #[inline]
    fn element_grads(&self, cache: &BasisCache, e: usize, q: usize, out: &mut [[f64; 2]]) {
        let geom = self.disc.mesh.geometry(e);
        for (o, g) in out.iter_mut().zip(cache.element.ref_gradients(q)) {
            *o = geom.physical_gradient(*g);
        }
    }

    fn n_elements(&self) -> usize {
        self.disc.mesh.n_elements()
    }

    /// Element mass matrix `(φ_a, φ_b)` of one component of `kind`.
    pub fn mass(&self, kind: SpaceKind) -> AssembledOperator {
        let space = self.space(kind);
        let mref = space.basis().mass();
        let n = space.local_len();
        let mesh = &self.disc.mesh;
        let comp = gather(space.component_len(), space.component_len(), self.n_elements(), |e, t| {
            let det = mesh.geometry(e).det.abs();
            for b in 0..n {
                for a in 0..n {
                    let v = det * mref[(b, a)];
                    if v != 0.0 {
                        t.push((e * n + b, e * n + a, v));
                    }
                }
            }
        });
        let matrix = if kind == SpaceKind::Vector { comp.block_diagonal2() } else { comp };
        AssembledOperator {
            matrix,
            rows: kind,
            cols: kind,
        }
    }

    fn space(&self, kind: SpaceKind) -> &crate::space::BrokenSpace {
        match kind {
            SpaceKind::Scalar => &self.disc.scalar,
            SpaceKind::Vector => &self.disc.vector,
            SpaceKind::Pressure => &self.disc.pressure,
        }
    }

    /// Inverse of the block-diagonal mass matrix of `kind`, as a matrix.
    pub fn mass_inverse(&self, kind: SpaceKind) -> SparseMatrix {
        let space = self.space(kind);
        let minv = space.basis().mass_inverse();
        let n = space.local_len();
        let mesh = &self.disc.mesh;
        let comp = gather(space.component_len(), space.component_len(), self.n_elements(), |e, t| {
            let det = mesh.geometry(e).det.abs();
            for b in 0..n {
                for a in 0..n {
                    let v = minv[(b, a)] / det;
                    if v != 0.0 {
                        t.push((e * n + b, e * n + a, v));
                    }
                }
            }
        });
        if kind == SpaceKind::Vector {
            comp.block_diagonal2()
        } else {
            comp
        }
    }

    /// Applies the inverse of the block-diagonal mass matrix of `kind`.
    pub fn apply_mass_inverse(&self, kind: SpaceKind, rhs: &[f64]) -> Vec<f64> {
        let space = self.space(kind);
        let minv = space.basis().mass_inverse();
        let n = space.local_len();
        let mesh = &self.disc.mesh;
        let mut out = vec![0.0; rhs.len()];
        out.par_chunks_mut(n).zip(rhs.par_chunks(n)).enumerate().for_each(|(blk, (o, r))| {
            let e = blk % mesh.n_elements();
            let det = mesh.geometry(e).det.abs();
            for i in 0..n {
                o[i] = (0..n).map(|j| minv[(i, j)] * r[j]).sum::<f64>() / det;
            }
        });
        out
    }

    /// `M x` for the block-diagonal mass matrix of `kind`.
    pub fn apply_mass(&self, kind: SpaceKind, x: &[f64]) -> Vec<f64> {
        let space = self.space(kind);
        let m = space.basis().mass();
        let n = space.local_len();
        let mesh = &self.disc.mesh;
        let mut out = vec![0.0; x.len()];
        out.par_chunks_mut(n).zip(x.par_chunks(n)).enumerate().for_each(|(blk, (o, r))| {
            let det = mesh.geometry(blk % mesh.n_elements()).det.abs();
            for i in 0..n {
                o[i] = det * (0..n).map(|j| m[(i, j)] * r[j]).sum::<f64>();
            }
        });
        out
    }

    /// Scalar SIPG operator; `include` selects which edges carry the three
    /// edge terms.
    fn sipg(&self, cache: &BasisCache, sigma: f64, include: impl Fn(&EdgeData) -> bool + Sync) -> SparseMatrix {
        let n = cache.n;
        let nq = cache.nq();
        let ne = self.n_elements();
        let dim = ne * n;
        let volume = gather(dim, dim, ne, |e, t| {
            let mut g = [[0.0; 2]; 64];
            let mut local = vec![0.0; n * n];
            for q in 0..nq {
                self.element_grads(cache, e, q, &mut g[..n]);
                let w = cache.element_weights[e * nq + q];
                for b in 0..n {
                    for a in 0..n {
                        local[b * n + a] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    }
                }
            }
            for b in 0..n {
                for a in 0..n {
                    t.push((e * n + b, e * n + a, local[b * n + a]));
                }
            }
        });
        let edges = gather(dim, dim, cache.edges.len(), |i, t| {
            let ed = &cache.edges[i];
            if !include(ed) {
                return;
            }
            let alpha = ed.alpha();
            let pen = sigma / ed.length;
            let nrm = ed.normal;
            for sa in &ed.sides {
                for sb in &ed.sides {
                    let mut local = vec![0.0; n * n];
                    for (q, w) in ed.weights.iter().enumerate() {
                        let (va, ga) = (&sa.values[q * n..(q + 1) * n], &sa.grads[q * n..(q + 1) * n]);
                        let (vb, gb) = (&sb.values[q * n..(q + 1) * n], &sb.grads[q * n..(q + 1) * n]);
                        for b in 0..n {
                            let dnb = gb[b][0] * nrm[0] + gb[b][1] * nrm[1];
                            for a in 0..n {
                                let dna = ga[a][0] * nrm[0] + ga[a][1] * nrm[1];
                                local[b * n + a] += w
                                    * (-alpha * dna * sb.sign * vb[b] - alpha * dnb * sa.sign * va[a]
                                        + pen * sa.sign * sb.sign * va[a] * vb[b]);
                            }
                        }
                    }
                    for b in 0..n {
                        for a in 0..n {
                            t.push((sb.element * n + b, sa.element * n + a, local[b * n + a]));
                        }
                    }
                }
            }
        });
        volume.add_scaled(1.0, &edges).expect("same shape")
    }

    /// `𝒜₁` on the potential/concentration space: SIPG over interior edges.
    pub fn a1(&self, sigma: f64) -> AssembledOperator {
        AssembledOperator {
            matrix: self.sipg(&self.scalar, sigma, |e| !e.boundary),
            rows: SpaceKind::Scalar,
            cols: SpaceKind::Scalar,
        }
    }

    /// `𝒜₁` on the pressure space.
    pub fn a1_pressure(&self, sigma: f64) -> AssembledOperator {
        AssembledOperator {
            matrix: self.sipg(&self.pressure, sigma, |e| !e.boundary),
            rows: SpaceKind::Pressure,
            cols: SpaceKind::Pressure,
        }
    }

    /// One velocity component of `𝒜₂` (SIPG over all edges).
    pub fn a2_block(&self, sigma: f64) -> SparseMatrix {
        self.sipg(&self.scalar, sigma, |_| true)
    }

    /// `𝒜₂` on the velocity space; block diagonal in the two components.
    pub fn a2(&self, sigma: f64) -> AssembledOperator {
        AssembledOperator {
            matrix: self.a2_block(sigma).block_diagonal2(),
            rows: SpaceKind::Vector,
            cols: SpaceKind::Vector,
        }
    }

    /// `𝒜₁` plus weak Dirichlet terms on the `dirichlet` sides, and the load
    /// produced by the boundary data. The weak problem `−Δφ = 0` with these
    /// conditions reads `A φ = load`.
    pub fn a1_mixed_bc(&self, sigma: f64, bc: &PotentialBoundary) -> Result<(AssembledOperator, Vec<f64>)> {
        bc.validate()?;
        let cache = &self.scalar;
        let matrix = self.sipg(cache, sigma, |e| !e.boundary || bc.dirichlet_value(e.tag).is_some());
        let n = cache.n;
        let load = gather_vec(self.disc.scalar.n_dofs(), cache.edges.len(), |i, out| {
            let ed = &cache.edges[i];
            if !ed.boundary {
                return;
            }
            let side = &ed.sides[0];
            if let Some(g) = bc.dirichlet_value(ed.tag) {
                let pen = sigma / ed.length;
                for (q, w) in ed.weights.iter().enumerate() {
                    for b in 0..n {
                        let gb = side.grads[q * n + b];
                        let dn = gb[0] * ed.normal[0] + gb[1] * ed.normal[1];
                        out.push((side.element * n + b, w * g * (pen * side.values[q * n + b] - dn)));
                    }
                }
            } else if let Some(flux) = bc.flux_value(ed.tag) {
                for (q, w) in ed.weights.iter().enumerate() {
                    for b in 0..n {
                        out.push((side.element * n + b, w * flux * side.values[q * n + b]));
                    }
                }
            }
        });
        Ok((
            AssembledOperator {
                matrix,
                rows: SpaceKind::Scalar,
                cols: SpaceKind::Scalar,
            },
            load,
        ))
    }

    /// `𝒟(v, q) = Σ_E ∫ q ∇·v − Σ_{all e} ∫ {q} n·⟦v⟧`: rows are pressure
    /// test functions, columns velocity trial functions.
    pub fn d(&self) -> AssembledOperator {
        let (sc, pc) = (&self.scalar, &self.pressure);
        let (n, np) = (sc.n, pc.n);
        let nq = sc.nq();
        let ne = self.n_elements();
        let (nrows, ncols) = (ne * np, 2 * ne * n);
        let comp_off = ne * n;
        let volume = gather(nrows, ncols, ne, |e, t| {
            let mut g = [[0.0; 2]; 64];
            for c in 0..2 {
                let mut local = vec![0.0; np * n];
                for q in 0..nq {
                    self.element_grads(sc, e, q, &mut g[..n]);
                    let w = sc.element_weights[e * nq + q];
                    let pv = pc.element.values(q);
                    for b in 0..np {
                        for a in 0..n {
                            local[b * n + a] += w * pv[b] * g[a][c];
                        }
                    }
                }
                for b in 0..np {
                    for a in 0..n {
                        t.push((e * np + b, c * comp_off + e * n + a, local[b * n + a]));
                    }
                }
            }
        });
        let edges = gather(nrows, ncols, sc.edges.len(), |i, t| {
            let (ev, ep) = (&sc.edges[i], &pc.edges[i]);
            let alpha = ev.alpha();
            for sa in &ev.sides {
                for sb in &ep.sides {
                    for c in 0..2 {
                        let nc = ev.normal[c];
                        for (q, w) in ev.weights.iter().enumerate() {
                            for b in 0..np {
                                let pb = sb.values[q * np + b];
                                for a in 0..n {
                                    let v = -w * alpha * pb * nc * sa.sign * sa.values[q * n + a];
                                    t.push((sb.element * np + b, c * comp_off + sa.element * n + a, v));
                                }
                            }
                        }
                    }
                }
            }
        });
        AssembledOperator {
            matrix: volume.add_scaled(1.0, &edges).expect("same shape"),
            rows: SpaceKind::Pressure,
            cols: SpaceKind::Vector,
        }
    }

    /// The integrated-by-parts expression of `𝒟`:
    /// `−Σ_E ∫ v·∇q + Σ_{interior e} ∫ {v}·n ⟦q⟧`. Equal to [`d`](Self::d)
    /// for every discrete pair.
    pub fn d_integrated_by_parts(&self) -> AssembledOperator {
        let (sc, pc) = (&self.scalar, &self.pressure);
        let (n, np) = (sc.n, pc.n);
        let nq = sc.nq();
        let ne = self.n_elements();
        let (nrows, ncols) = (ne * np, 2 * ne * n);
        let comp_off = ne * n;
        let volume = gather(nrows, ncols, ne, |e, t| {
            let mut g = [[0.0; 2]; 64];
            for q in 0..nq {
                self.element_grads(pc, e, q, &mut g[..np]);
                let w = sc.element_weights[e * nq + q];
                let v = sc.element.values(q);
                for c in 0..2 {
                    for b in 0..np {
                        for a in 0..n {
                            t.push((e * np + b, c * comp_off + e * n + a, -w * v[a] * g[b][c]));
                        }
                    }
                }
            }
        });
        let edges = gather(nrows, ncols, sc.edges.len(), |i, t| {
            let (ev, ep) = (&sc.edges[i], &pc.edges[i]);
            if ev.boundary {
                return;
            }
            for sa in &ev.sides {
                for sb in &ep.sides {
                    for c in 0..2 {
                        for (q, w) in ev.weights.iter().enumerate() {
                            for b in 0..np {
                                let pb = sb.sign * sb.values[q * np + b];
                                for a in 0..n {
                                    let v = w * 0.5 * sa.values[q * n + a] * ev.normal[c] * pb;
                                    t.push((sb.element * np + b, c * comp_off + sa.element * n + a, v));
                                }
                            }
                        }
                    }
                }
            }
        });
        AssembledOperator {
            matrix: volume.add_scaled(1.0, &edges).expect("same shape"),
            rows: SpaceKind::Pressure,
            cols: SpaceKind::Vector,
        }
    }

    fn check_velocity(&self, w: &FieldVector) -> Result<()> {
        if w.space().kind() != SpaceKind::Vector || w.coeffs().len() != self.disc.vector.n_dofs() {
            return Err(Error::invalid("advecting field must live in the velocity space"));
        }
        Ok(())
    }

    fn check_scalar(&self, f: &FieldVector, what: &str) -> Result<()> {
        if f.space().kind() != SpaceKind::Scalar || f.coeffs().len() != self.disc.scalar.n_dofs() {
            return Err(Error::invalid(format!("{what} must live in the scalar space")));
        }
        Ok(())
    }

    /// One scalar block of the convection operator advected by `w`.
    /// `boundary` selects the boundary closure; `None` skips `∂Ω`.
    fn convection_block(&self, w: &FieldVector, boundary: Option<ConvectionBoundary>) -> SparseMatrix {
        let cache = &self.scalar;
        let n = cache.n;
        let nq = cache.nq();
        let ne = self.n_elements();
        let dim = ne * n;
        let volume = gather(dim, dim, ne, |e, t| {
            let mut g = [[0.0; 2]; 64];
            let (w0, w1) = (w.local(e, 0), w.local(e, 1));
            let mut local = vec![0.0; n * n];
            for q in 0..nq {
                self.element_grads(cache, e, q, &mut g[..n]);
                let wt = cache.element_weights[e * nq + q];
                let v = cache.element.values(q);
                let wq = [dot(w0, v), dot(w1, v)];
                let div = grad_dot(w0, &g[..n])[0] + grad_dot(w1, &g[..n])[1];
                for b in 0..n {
                    for a in 0..n {
                        let adv = wq[0] * g[a][0] + wq[1] * g[a][1];
                        local[b * n + a] += wt * (adv * v[b] + 0.5 * div * v[a] * v[b]);
                    }
                }
            }
            for b in 0..n {
                for a in 0..n {
                    t.push((e * n + b, e * n + a, local[b * n + a]));
                }
            }
        });
        let edges = gather(dim, dim, cache.edges.len(), |i, t| {
            let ed = &cache.edges[i];
            // (weight of a side in averages, factor on the average of w)
            let (alpha, avg_w) = match (ed.boundary, boundary) {
                (false, _) => (0.5, 0.5),
                (true, None) => return,
                (true, Some(ConvectionBoundary::Literal)) => (1.0, 1.0),
                (true, Some(ConvectionBoundary::ZeroExterior)) => (0.5, 0.5),
            };
            let mut local = [0.0; 4 * 64];
            for (q, wq) in ed.weights.iter().enumerate() {
                let mut wn = [0.0; 2];
                for (k, s) in ed.sides.iter().enumerate() {
                    let v = &s.values[q * n..(q + 1) * n];
                    wn[k] = dot(w.local(s.element, 0), v) * ed.normal[0] + dot(w.local(s.element, 1), v) * ed.normal[1];
                }
                let avg = avg_w * (wn[0] + wn[1]);
                let jump: f64 = ed.sides.iter().zip(&wn).map(|(s, x)| s.sign * x).sum();
                for (ia, sa) in ed.sides.iter().enumerate() {
                    let va = &sa.values[q * n..(q + 1) * n];
                    for (ib, sb) in ed.sides.iter().enumerate() {
                        let vb = &sb.values[q * n..(q + 1) * n];
                        let mut f = -avg * sa.sign * alpha;
                        if ia == ib {
                            f -= 0.5 * jump * alpha;
                        }
                        let blk = &mut local[(ia * 2 + ib) * 64..];
                        for b in 0..n {
                            for a in 0..n {
                                blk[b * n + a] += wq * f * va[a] * vb[b];
                            }
                        }
                    }
                }
            }
            for (ia, sa) in ed.sides.iter().enumerate() {
                for (ib, sb) in ed.sides.iter().enumerate() {
                    let blk = &local[(ia * 2 + ib) * 64..];
                    for b in 0..n {
                        for a in 0..n {
                            t.push((sb.element * n + b, sa.element * n + a, blk[b * n + a]));
                        }
                    }
                }
            }
        });
        volume.add_scaled(1.0, &edges).expect("same shape")
    }

    /// `𝒩₁(w, ·, ·)` on the concentration space.
    pub fn n1(&self, w: &FieldVector, mode: ConvectionBoundary) -> Result<AssembledOperator> {
        self.check_velocity(w)?;
        let boundary = match mode {
            ConvectionBoundary::Literal => None,
            ConvectionBoundary::ZeroExterior => Some(mode),
        };
        Ok(AssembledOperator {
            matrix: self.convection_block(w, boundary),
            rows: SpaceKind::Scalar,
            cols: SpaceKind::Scalar,
        })
    }

    /// One component block of `𝒩₂(w, ·, ·)`.
    pub fn n2_block(&self, w: &FieldVector, mode: ConvectionBoundary) -> Result<SparseMatrix> {
        self.check_velocity(w)?;
        Ok(self.convection_block(w, Some(mode)))
    }

    /// `𝒩₂(w, ·, ·)` on the velocity space.
    pub fn n2(&self, w: &FieldVector, mode: ConvectionBoundary) -> Result<AssembledOperator> {
        Ok(AssembledOperator {
            matrix: self.n2_block(w, mode)?.block_diagonal2(),
            rows: SpaceKind::Vector,
            cols: SpaceKind::Vector,
        })
    }

    /// Values of `chi + shift` at the element points of `e`.
    fn coefficient_at_element(&self, chi: &FieldVector, shift: f64, e: usize) -> Vec<f64> {
        let cache = &self.scalar;
        (0..cache.nq())
            .map(|q| dot(chi.local(e, 0), cache.element.values(q)) + shift)
            .collect()
    }

    /// `𝒢(χ + m₀, ψ, ζ)` as a matrix acting on `ψ` and tested with `ζ`.
    pub fn g(&self, chi: &FieldVector, shift: f64) -> Result<AssembledOperator> {
        self.check_scalar(chi, "drift coefficient")?;
        let cache = &self.scalar;
        let n = cache.n;
        let nq = cache.nq();
        let ne = self.n_elements();
        let dim = ne * n;
        let volume = gather(dim, dim, ne, |e, t| {
            let mut g = [[0.0; 2]; 64];
            let coef = self.coefficient_at_element(chi, shift, e);
            let mut local = vec![0.0; n * n];
            for q in 0..nq {
                self.element_grads(cache, e, q, &mut g[..n]);
                let w = cache.element_weights[e * nq + q] * coef[q];
                for b in 0..n {
                    for a in 0..n {
                        local[b * n + a] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    }
                }
            }
            for b in 0..n {
                for a in 0..n {
                    t.push((e * n + b, e * n + a, local[b * n + a]));
                }
            }
        });
        let edges = gather(dim, dim, cache.edges.len(), |i, t| {
            let ed = &cache.edges[i];
            if ed.boundary {
                return;
            }
            let nrm = ed.normal;
            for sa in &ed.sides {
                for sb in &ed.sides {
                    let mut local = vec![0.0; n * n];
                    for (q, w) in ed.weights.iter().enumerate() {
                        let (va, ga) = (&sa.values[q * n..(q + 1) * n], &sa.grads[q * n..(q + 1) * n]);
                        let (vb, gb) = (&sb.values[q * n..(q + 1) * n], &sb.grads[q * n..(q + 1) * n]);
                        let ca = dot(chi.local(sa.element, 0), va) + shift;
                        let cb = dot(chi.local(sb.element, 0), vb) + shift;
                        for b in 0..n {
                            let dnb = gb[b][0] * nrm[0] + gb[b][1] * nrm[1];
                            for a in 0..n {
                                let dna = ga[a][0] * nrm[0] + ga[a][1] * nrm[1];
                                local[b * n + a] -=
                                    w * 0.5 * (ca * dna * sb.sign * vb[b] + cb * dnb * sa.sign * va[a]);
                            }
                        }
                    }
                    for b in 0..n {
                        for a in 0..n {
                            t.push((sb.element * n + b, sa.element * n + a, local[b * n + a]));
                        }
                    }
                }
            }
        });
        Ok(AssembledOperator {
            matrix: volume.add_scaled(1.0, &edges).expect("same shape"),
            rows: SpaceKind::Scalar,
            cols: SpaceKind::Scalar,
        })
    }

    /// `ζ ↦ 𝒢(χ + m₀, ψ, ζ)` for a known `ψ`, without forming the matrix.
    pub fn apply_g(&self, chi: &FieldVector, shift: f64, psi: &FieldVector) -> Result<Vec<f64>> {
        self.check_scalar(chi, "drift coefficient")?;
        self.check_scalar(psi, "potential")?;
        let cache = &self.scalar;
        let n = cache.n;
        let nq = cache.nq();
        let ne = self.n_elements();
        let mut out = gather_vec(ne * n, ne, |e, o| {
            let mut g = [[0.0; 2]; 64];
            let coef = self.coefficient_at_element(chi, shift, e);
            let mut local = vec![0.0; n];
            for q in 0..nq {
                self.element_grads(cache, e, q, &mut g[..n]);
                let gp = grad_dot(psi.local(e, 0), &g[..n]);
                let w = cache.element_weights[e * nq + q] * coef[q];
                for b in 0..n {
                    local[b] += w * (gp[0] * g[b][0] + gp[1] * g[b][1]);
                }
            }
            o.extend(local.iter().enumerate().map(|(b, v)| (e * n + b, *v)));
        });
        let edge_part = gather_vec(ne * n, cache.edges.len(), |i, o| {
            let ed = &cache.edges[i];
            if ed.boundary {
                return;
            }
            let nrm = ed.normal;
            for (q, w) in ed.weights.iter().enumerate() {
                // {χ∇ψ}·n and ⟦ψ⟧
                let mut flux = 0.0;
                let mut jump = 0.0;
                for s in &ed.sides {
                    let (v, gr) = (&s.values[q * n..(q + 1) * n], &s.grads[q * n..(q + 1) * n]);
                    let c = dot(chi.local(s.element, 0), v) + shift;
                    let gp = grad_dot(psi.local(s.element, 0), gr);
                    flux += 0.5 * c * (gp[0] * nrm[0] + gp[1] * nrm[1]);
                    jump += s.sign * dot(psi.local(s.element, 0), v);
                }
                for s in &ed.sides {
                    let (v, gr) = (&s.values[q * n..(q + 1) * n], &s.grads[q * n..(q + 1) * n]);
                    let c = dot(chi.local(s.element, 0), v) + shift;
                    for b in 0..n {
                        let dnb = gr[b][0] * nrm[0] + gr[b][1] * nrm[1];
                        o.push((s.element * n + b, -w * (flux * s.sign * v[b] + 0.5 * c * dnb * jump)));
                    }
                }
            }
        });
        for (a, b) in out.iter_mut().zip(edge_part) {
            *a += b;
        }
        Ok(out)
    }

    /// `w ↦ 𝒯(χ, ψ, w)` over the velocity test functions.
    pub fn t(&self, chi: &FieldVector, psi: &FieldVector) -> Result<Vec<f64>> {
        self.check_scalar(chi, "charge")?;
        self.check_scalar(psi, "potential")?;
        let cache = &self.scalar;
        let n = cache.n;
        let nq = cache.nq();
        let ne = self.n_elements();
        let off = ne * n;
        let volume = gather_vec(2 * off, ne, |e, o| {
            let mut g = [[0.0; 2]; 64];
            let mut local = vec![0.0; 2 * n];
            for q in 0..nq {
                self.element_grads(cache, e, q, &mut g[..n]);
                let v = cache.element.values(q);
                let c = dot(chi.local(e, 0), v);
                let gp = grad_dot(psi.local(e, 0), &g[..n]);
                let w = cache.element_weights[e * nq + q] * c;
                for b in 0..n {
                    local[b] += w * gp[0] * v[b];
                    local[n + b] += w * gp[1] * v[b];
                }
            }
            for b in 0..n {
                o.push((e * n + b, local[b]));
                o.push((off + e * n + b, local[n + b]));
            }
        });
        let edges = gather_vec(2 * off, cache.edges.len(), |i, o| {
            let ed = &cache.edges[i];
            if ed.boundary {
                return;
            }
            for (q, w) in ed.weights.iter().enumerate() {
                let mut avg_chi = 0.0;
                let mut jump = 0.0;
                for s in &ed.sides {
                    let v = &s.values[q * n..(q + 1) * n];
                    avg_chi += 0.5 * dot(chi.local(s.element, 0), v);
                    jump += s.sign * dot(psi.local(s.element, 0), v);
                }
                let f = -w * avg_chi * jump * 0.5;
                for s in &ed.sides {
                    for b in 0..n {
                        let vb = s.values[q * n + b];
                        o.push((s.element * n + b, f * vb * ed.normal[0]));
                        o.push((off + s.element * n + b, f * vb * ed.normal[1]));
                    }
                }
            }
        });
        Ok(volume.iter().zip(edges).map(|(a, b)| a + b).collect())
    }
}

#[cfg(test)]
mod tests;
