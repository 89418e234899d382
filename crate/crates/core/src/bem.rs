//! Galerkin assembly of the Helmholtz boundary integral operators with kernel
//! G_s(x, y) = e^{−s|x−y|} / (4π|x−y|), and evaluation of the single- and
//! double-layer potentials.
//!
//! Trial/test spaces: V acts on Φ_h × Φ_h, K maps Ψ_h → Φ_h', Kᵀ maps
//! Φ_h → Ψ_h' and W acts on Ψ_h × Ψ_h. W uses the integration-by-parts form
//!
//! ```text
//! ⟨W ψ, η⟩ = ∫∫ G_s(x,y) [curl ψ(y)·curl η(x) + s² (n_x·n_y) ψ(y) η(x)].
//! ```

use crate::error::{Error, Result};
use crate::geometry::{self, Point3};
use crate::mesh::SurfaceMesh;
use crate::quadrature::{singular_pair_rule, Adjacency, PairRule, TriangleRule};
use crate::spaces::BoundarySpaces;
use crate::symbols::ComplexFrequency;
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

const FOUR_PI_INV: f64 = 1.0 / (4.0 * PI);

#[inline]
fn green(s: Complex64, r: f64) -> Complex64 {
    let (sn, cs) = (s.im * r).sin_cos();
    let m = (-s.re * r).exp() * (FOUR_PI_INV / r);
    Complex64::new(m * cs, -m * sn)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Polynomial degree of the triangle rule for well-separated pairs.
    pub regular_order: usize,
    /// Gauss points per direction of the singular 4D rules.
    pub singular_order: usize,
    /// Pairs (or point–triangle) closer than this many triangle diameters use
    /// a rule of twice the regular degree.
    pub near_threshold: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            regular_order: 2,
            singular_order: 4,
            near_threshold: 1.5,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.regular_order == 0 {
            return Err(Error::QuadratureOrder(self.regular_order));
        }
        if self.singular_order == 0 || self.singular_order > crate::quadrature::MAX_GAUSS_POINTS {
            return Err(Error::QuadratureOrder(self.singular_order));
        }
        if !(self.near_threshold >= 0.0) {
            return Err(Error::Precondition("near_threshold must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Galerkin matrices of V, K, Kᵀ and W at one frequency.
#[derive(Debug, Clone)]
pub struct BemMatrixSet {
    pub s: ComplexFrequency,
    pub v: Mat<Complex64>,
    pub k: Mat<Complex64>,
    pub kt: Mat<Complex64>,
    pub w: Mat<Complex64>,
}

/// Frequency-independent assembly data for one mesh: quadrature rules and
/// the triangle-pair classification.
pub struct BemAssembler<'a> {
    mesh: &'a SurfaceMesh,
    spaces: &'a BoundarySpaces,
    quad: QuadratureConfig,
    far: TriangleRule,
    near: TriangleRule,
    singular: [PairRule; 3],
    centroids: Vec<Point3>,
    // physical points of the far and near rules, triangle-major
    far_x: Vec<Point3>,
    near_x: Vec<Point3>,
}

/// Pairs with Re s · r_min above `PRUNE_BASE + 2 ln(1 + |s|)` are dropped:
/// their entries are below roundoff relative to the near field.
const PRUNE_BASE: f64 = 40.0;

#[derive(Clone, Copy)]
struct PairInfo {
    adjacency: Adjacency,
    // local vertex order used by the singular rule, per triangle
    perm_a: [usize; 3],
    perm_b: [usize; 3],
}

/// Per-pair integrals in the triangles' own local vertex order.
#[derive(Default, Clone, Copy)]
struct PairIntegrals {
    g: Complex64,
    gxy: [[Complex64; 3]; 3],
    // ∫∫ ∂_{n_y} G λ_j(y), y in the second triangle
    ky: [Complex64; 3],
    // ∫∫ ∂_{n_x} G λ_i(x), x in the first triangle
    kx: [Complex64; 3],
}

// Accumulators laid out so that the inner loop over b writes down columns:
// V holds its lower triangle, W holds half of W + Wᵀ, and the ∂_{n_y} part of
// K is collected transposed.
struct Partial {
    v_lower: Mat<Complex64>,
    k: Mat<Complex64>,
    k_tr: Mat<Complex64>,
    w_half: Mat<Complex64>,
}

impl Partial {
    fn zeros(nt: usize, nv: usize) -> Self {
        Self {
            v_lower: Mat::zeros(nt, nt),
            k: Mat::zeros(nt, nv),
            k_tr: Mat::zeros(nv, nt),
            w_half: Mat::zeros(nv, nv),
        }
    }

    fn add(mut self, other: Self) -> Self {
        self.v_lower += &other.v_lower;
        self.k += &other.k;
        self.k_tr += &other.k_tr;
        self.w_half += &other.w_half;
        self
    }
}

impl<'a> BemAssembler<'a> {
    pub fn new(mesh: &'a SurfaceMesh, spaces: &'a BoundarySpaces, quad: QuadratureConfig) -> Result<Self> {
        quad.validate()?;
        if spaces.phi_dim != mesh.num_triangles() || spaces.psi_dim != mesh.num_vertices() {
            return Err(Error::DimensionMismatch("spaces were built on a different mesh".into()));
        }
        let far = TriangleRule::with_degree(quad.regular_order)?;
        let near = TriangleRule::with_degree(2 * quad.regular_order)?;
        let tabulate = |rule: &TriangleRule| -> Vec<Point3> {
            (0..mesh.num_triangles())
                .flat_map(|t| {
                    let p = mesh.triangle_points(t);
                    rule.points.iter().map(move |&b| geometry::barycentric_point(&p, b))
                })
                .collect()
        };
        Ok(Self {
            mesh,
            spaces,
            quad,
            far_x: tabulate(&far),
            near_x: tabulate(&near),
            centroids: (0..mesh.num_triangles()).map(|t| mesh.centroid(t)).collect(),
            far,
            near,
            singular: [
                singular_pair_rule(Adjacency::Identical, quad.singular_order)?,
                singular_pair_rule(Adjacency::CommonEdge, quad.singular_order)?,
                singular_pair_rule(Adjacency::CommonVertex, quad.singular_order)?,
            ],
        })
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        self.quad
    }

    fn classify(&self, a: usize, b: usize) -> PairInfo {
        let ta = self.mesh.triangles()[a];
        let tb = self.mesh.triangles()[b];
        if a == b {
            return PairInfo {
                adjacency: Adjacency::Identical,
                perm_a: [0, 1, 2],
                perm_b: [0, 1, 2],
            };
        }
        let mut shared = [(0, 0); 3];
        let mut count = 0;
        for i in 0..3 {
            for j in 0..3 {
                if ta[i] == tb[j] {
                    shared[count] = (i, j);
                    count += 1;
                }
            }
        }
        match count {
            2 => {
                let (i0, j0) = shared[0];
                let (i1, j1) = shared[1];
                PairInfo {
                    adjacency: Adjacency::CommonEdge,
                    perm_a: [i0, i1, 3 - i0 - i1],
                    perm_b: [j0, j1, 3 - j0 - j1],
                }
            }
            1 => {
                let (i0, j0) = shared[0];
                PairInfo {
                    adjacency: Adjacency::CommonVertex,
                    perm_a: [i0, (i0 + 1) % 3, (i0 + 2) % 3],
                    perm_b: [j0, (j0 + 1) % 3, (j0 + 2) % 3],
                }
            }
            _ => PairInfo {
                adjacency: Adjacency::Disjoint,
                perm_a: [0, 1, 2],
                perm_b: [0, 1, 2],
            },
        }
    }

    fn is_near(&self, a: usize, b: usize) -> bool {
        let d = geometry::dist(self.centroids[a], self.centroids[b]);
        let diam = self.mesh.diameters()[a].max(self.mesh.diameters()[b]);
        d < self.quad.near_threshold * diam
    }

    /// Lower bound on the distance between T_a and T_b.
    fn separation(&self, a: usize, b: usize) -> f64 {
        let d = geometry::dist(self.centroids[a], self.centroids[b]);
        d - self.mesh.diameters()[a] - self.mesh.diameters()[b]
    }

    /// Tensor rule on a disjoint pair from tabulated points. The P1 moments
    /// are summed over y first.
    fn regular_pair(&self, s: Complex64, a: usize, b: usize) -> PairIntegrals {
        let (rule, pts) = if self.is_near(a, b) {
            (&self.near, &self.near_x)
        } else {
            (&self.far, &self.far_x)
        };
        let m = rule.len();
        let xa = &pts[a * m..(a + 1) * m];
        let yb = &pts[b * m..(b + 1) * m];
        let na = self.mesh.normals()[a];
        let nb = self.mesh.normals()[b];
        let area = self.mesh.areas()[a] * self.mesh.areas()[b];
        let zero = Complex64::new(0.0, 0.0);
        let mut out = PairIntegrals::default();
        for p in 0..m {
            let x = xa[p];
            let bx = rule.points[p];
            let wp = rule.weights[p] * area;
            let mut row = [zero; 3];
            let mut gsum = zero;
            let mut kxs = zero;
            for q in 0..m {
                let by = rule.points[q];
                let wq = rule.weights[q];
                let d = geometry::sub(x, yb[q]);
                let r = geometry::norm(d);
                let inv_r = 1.0 / r;
                let (sn, cs) = (s.im * r).sin_cos();
                let m = (-s.re * r).exp() * (FOUR_PI_INV * inv_r);
                let g = Complex64::new(m * cs, -m * sn);
                // (dG/dr) / r
                let dgr = -g * ((s + inv_r) * inv_r);
                let wg = g * wq;
                gsum += wg;
                let dny = -dgr * (wp * wq * geometry::dot(d, nb));
                for j in 0..3 {
                    row[j] += wg * by[j];
                    out.ky[j] += dny * by[j];
                }
                kxs += dgr * (wq * geometry::dot(d, na));
            }
            out.g += gsum * wp;
            for i in 0..3 {
                let f = wp * bx[i];
                out.kx[i] += kxs * f;
                for j in 0..3 {
                    out.gxy[i][j] += row[j] * f;
                }
            }
        }
        out
    }

    /// Integrals over T_a × T_b, x ∈ T_a, y ∈ T_b.
    fn pair_integrals(&self, s: Complex64, a: usize, b: usize) -> PairIntegrals {
        let info = self.classify(a, b);
        if info.adjacency == Adjacency::Disjoint {
            return self.regular_pair(s, a, b);
        }
        let pa = self.mesh.triangle_points(a);
        let pb = self.mesh.triangle_points(b);
        let na = self.mesh.normals()[a];
        let nb = self.mesh.normals()[b];
        let area = self.mesh.areas()[a] * self.mesh.areas()[b];
        let mut out = PairIntegrals::default();

        let mut accumulate = |w: f64, bx: [f64; 3], by: [f64; 3]| {
            let x = geometry::barycentric_point(&pa, bx);
            let y = geometry::barycentric_point(&pb, by);
            let d = geometry::sub(x, y);
            let r = geometry::norm(d);
            let g = green(s, r);
            // dG/dr = −G (s + 1/r)
            let dg = -g * (s + 1.0 / r);
            let wg = g * w;
            let dny = -dg * (w * geometry::dot(d, nb) / r);
            let dnx = dg * (w * geometry::dot(d, na) / r);
            out.g += wg;
            for i in 0..3 {
                let wgx = wg * bx[i];
                for j in 0..3 {
                    out.gxy[i][j] += wgx * by[j];
                }
                out.ky[i] += dny * by[i];
                out.kx[i] += dnx * bx[i];
            }
        };

        let rule = match info.adjacency {
            Adjacency::Identical => &self.singular[0],
            Adjacency::CommonEdge => &self.singular[1],
            _ => &self.singular[2],
        };
        for k in 0..rule.len() {
            // rule coordinates refer to the permuted vertex order
            let mut bx = [0.0; 3];
            let mut by = [0.0; 3];
            for l in 0..3 {
                bx[info.perm_a[l]] = rule.x[k][l];
                by[info.perm_b[l]] = rule.y[k][l];
            }
            accumulate(rule.weights[k] * area, bx, by);
        }
        if info.adjacency == Adjacency::Identical {
            // the exact integral is symmetric in (i, j)
            for i in 0..3 {
                for j in 0..i {
                    let m = (out.gxy[i][j] + out.gxy[j][i]) * 0.5;
                    out.gxy[i][j] = m;
                    out.gxy[j][i] = m;
                }
            }
        }
        out
    }

    /// Assembles V, K, Kᵀ and W at frequency `s`, visiting each unordered
    /// triangle pair once.
    pub fn assemble(&self, s: ComplexFrequency) -> BemMatrixSet {
        self.assemble_with_cutoff(s, PRUNE_BASE + 2.0 * (1.0 + s.value().norm()).ln())
    }

    /// [`Self::assemble`] with an explicit decay cutoff; `f64::INFINITY`
    /// keeps every pair.
    pub fn assemble_with_cutoff(&self, s: ComplexFrequency, cutoff: f64) -> BemMatrixSet {
        let nt = self.mesh.num_triangles();
        let nv = self.mesh.num_vertices();
        let sv = s.value();
        // a fixed chunk count and an ordered fold keep the sums bit-identical
        // across runs with the same thread count
        let n_chunks = rayon::current_num_threads().min(nt).max(1);
        let partials: Vec<Partial> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut p = Partial::zeros(nt, nv);
                for a in (c..nt).step_by(n_chunks) {
                    for b in a..nt {
                        if sv.re * self.separation(a, b) > cutoff {
                            continue;
                        }
                        let pi = self.pair_integrals(sv, a, b);
                        self.scatter(sv, a, b, &pi, &mut p, a != b);
                    }
                }
                p
            })
            .collect();
        let p = partials.into_iter().reduce(Partial::add).expect("at least one chunk");
        let mut v = p.v_lower;
        for b in 1..nt {
            for a in 0..b {
                v[(a, b)] = v[(b, a)];
            }
        }
        let k = p.k + p.k_tr.transpose();
        let w = &p.w_half + p.w_half.transpose();
        let kt = k.transpose().to_owned();
        BemMatrixSet { s, v, k, kt, w }
    }

    fn scatter(&self, s: Complex64, a: usize, b: usize, pi: &PairIntegrals, p: &mut Partial, mirror: bool) {
        let ta = self.mesh.triangles()[a];
        let tb = self.mesh.triangles()[b];
        let nn = geometry::dot(self.mesh.normals()[a], self.mesh.normals()[b]);
        let ca = &self.spaces.curls[a];
        let cb = &self.spaces.curls[b];
        let s2nn = s * s * nn;
        // b ≥ a: (b, a) is on or below the diagonal
        p.v_lower[(b, a)] += pi.g;
        for j in 0..3 {
            p.k_tr[(tb[j], a)] += pi.ky[j];
        }
        if mirror {
            for i in 0..3 {
                p.k[(b, ta[i])] += pi.kx[i];
            }
        }
        // W gets val at (ta_i, tb_j) and, mirrored, at (tb_j, ta_i); an
        // identical pair is symmetric on its own and counts half
        let half = if mirror { 1.0 } else { 0.5 };
        for i in 0..3 {
            for j in 0..3 {
                let val = pi.g * geometry::dot(ca[i], cb[j]) + s2nn * pi.gxy[i][j];
                p.w_half[(tb[j], ta[i])] += val * half;
            }
        }
    }

    /// Assembles every ordered pair independently, reading Kᵀ directly from
    /// its own bilinear form. Twice the cost of [`Self::assemble`]; used to
    /// cross-check symmetry properties.
    pub fn assemble_unsymmetrized(&self, s: ComplexFrequency) -> BemMatrixSet {
        let nt = self.mesh.num_triangles();
        let nv = self.mesh.num_vertices();
        let sv = s.value();
        let mut v = Mat::zeros(nt, nt);
        let mut k = Mat::zeros(nt, nv);
        let mut kt = Mat::zeros(nv, nt);
        let mut w = Mat::zeros(nv, nv);
        for a in 0..nt {
            let ta = self.mesh.triangles()[a];
            for b in 0..nt {
                let tb = self.mesh.triangles()[b];
                let pi = self.pair_integrals(sv, a, b);
                v[(a, b)] += pi.g;
                for j in 0..3 {
                    k[(a, tb[j])] += pi.ky[j];
                }
                for i in 0..3 {
                    kt[(ta[i], b)] += pi.kx[i];
                }
                let nn = geometry::dot(self.mesh.normals()[a], self.mesh.normals()[b]);
                for i in 0..3 {
                    for j in 0..3 {
                        w[(ta[i], tb[j])] += pi.g * geometry::dot(self.spaces.curls[a][i], self.spaces.curls[b][j])
                            + sv * sv * nn * pi.gxy[i][j];
                    }
                }
            }
        }
        BemMatrixSet { s, v, k, kt, w }
    }
}

/// Assembles the four boundary operators at `s`.
pub fn assemble_boundary_ops(
    s: ComplexFrequency,
    mesh: &SurfaceMesh,
    spaces: &BoundarySpaces,
    quad: QuadratureConfig,
) -> Result<BemMatrixSet> {
    Ok(BemAssembler::new(mesh, spaces, quad)?.assemble(s))
}

/// Potential values at a set of points, with a flag for points close enough
/// to Γ that the regular quadrature is unreliable.
#[derive(Debug, Clone)]
pub struct PotentialValues {
    pub values: Vec<Complex64>,
    pub near_surface: Vec<bool>,
}

impl PotentialValues {
    pub fn any_near_surface(&self) -> bool {
        self.near_surface.iter().any(|&f| f)
    }
}

/// Point evaluation of S(s)φ and D(s)ψ at fixed observation points.
pub struct PotentialEvaluator<'a> {
    mesh: &'a SurfaceMesh,
    points: Vec<Point3>,
    far: Vec<(Point3, [f64; 3], f64)>,
    near: Vec<(Point3, [f64; 3], f64)>,
    far_len: usize,
    near_len: usize,
    // triangles needing the refined rule, per point
    near_triangles: Vec<Vec<bool>>,
    near_surface: Vec<bool>,
}

impl<'a> PotentialEvaluator<'a> {
    pub fn new(mesh: &'a SurfaceMesh, points: &[Point3], quad: QuadratureConfig) -> Result<Self> {
        quad.validate()?;
        let far_rule = TriangleRule::with_degree(quad.regular_order)?;
        let near_rule = TriangleRule::with_degree(2 * quad.regular_order)?;
        let tabulate = |rule: &TriangleRule| {
            let mut out = Vec::with_capacity(rule.len() * mesh.num_triangles());
            for t in 0..mesh.num_triangles() {
                let p = mesh.triangle_points(t);
                for (b, &w) in rule.points.iter().zip(&rule.weights) {
                    out.push((geometry::barycentric_point(&p, *b), *b, w * mesh.areas()[t]));
                }
            }
            out
        };
        let mut near_triangles = Vec::with_capacity(points.len());
        let mut near_surface = Vec::with_capacity(points.len());
        for &x in points {
            let flags: Vec<bool> = (0..mesh.num_triangles())
                .map(|t| {
                    let d = crate::mesh::point_triangle_distance(x, &mesh.triangle_points(t));
                    d < quad.near_threshold * mesh.diameters()[t]
                })
                .collect();
            near_surface.push(flags.iter().any(|&f| f));
            near_triangles.push(flags);
        }
        Ok(Self {
            mesh,
            points: points.to_vec(),
            far: tabulate(&far_rule),
            near: tabulate(&near_rule),
            far_len: far_rule.len(),
            near_len: near_rule.len(),
            near_triangles,
            near_surface,
        })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn near_surface(&self) -> &[bool] {
        &self.near_surface
    }

    /// S(s)φ + D(s)ψ at every point; either density may be omitted.
    pub fn evaluate(&self, s: Complex64, phi: Option<&[Complex64]>, psi: Option<&[Complex64]>) -> Vec<Complex64> {
        (0..self.points.len())
            .into_par_iter()
            .map(|i| self.evaluate_at(i, s, phi, psi))
            .collect()
    }

    fn evaluate_at(&self, i: usize, s: Complex64, phi: Option<&[Complex64]>, psi: Option<&[Complex64]>) -> Complex64 {
        let x = self.points[i];
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..self.mesh.num_triangles() {
            let (tab, len) = if self.near_triangles[i][t] {
                (&self.near, self.near_len)
            } else {
                (&self.far, self.far_len)
            };
            let tri = self.mesh.triangles()[t];
            let n = self.mesh.normals()[t];
            let phi_t = phi.map(|p| p[t]);
            let psi_t = psi.map(|p| [p[tri[0]], p[tri[1]], p[tri[2]]]);
            for &(y, b, w) in &tab[t * len..(t + 1) * len] {
                let d = geometry::sub(x, y);
                let r = geometry::norm(d);
                let g = green(s, r);
                if let Some(f) = phi_t {
                    acc += g * w * f;
                }
                if let Some(p) = psi_t {
                    // ∂_{n_y} G = −G' (d·n)/r with G' = −G (s + 1/r)
                    let dny = g * (s + 1.0 / r) * (geometry::dot(d, n) / r);
                    acc += dny * w * (p[0] * b[0] + p[1] * b[1] + p[2] * b[2]);
                }
            }
        }
        acc
    }
}

/// Single-layer potential S(s)φ at the given points.
pub fn eval_single_layer(
    s: ComplexFrequency,
    mesh: &SurfaceMesh,
    phi: &[Complex64],
    points: &[Point3],
    quad: QuadratureConfig,
) -> Result<PotentialValues> {
    if phi.len() != mesh.num_triangles() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} triangles",
            phi.len(),
            mesh.num_triangles()
        )));
    }
    let ev = PotentialEvaluator::new(mesh, points, quad)?;
    Ok(PotentialValues {
        values: ev.evaluate(s.value(), Some(phi), None),
        near_surface: ev.near_surface.clone(),
    })
}

/// Double-layer potential D(s)ψ at the given points.
pub fn eval_double_layer(
    s: ComplexFrequency,
    mesh: &SurfaceMesh,
    psi: &[Complex64],
    points: &[Point3],
    quad: QuadratureConfig,
) -> Result<PotentialValues> {
    if psi.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} vertices",
            psi.len(),
            mesh.num_vertices()
        )));
    }
    let ev = PotentialEvaluator::new(mesh, points, quad)?;
    Ok(PotentialValues {
        values: ev.evaluate(s.value(), None, Some(psi)),
        near_surface: ev.near_surface.clone(),
    })
}
