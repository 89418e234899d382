//! The coupled boundary system over Φ_h × Ψ_h at one frequency:
//!
//! ```text
//! A(s) = [[ s V,          K − ½ J       ],
//!         [ −Kᵀ + ½ Jᵀ,   s⁻¹ W + F_h(s) ]]
//! ```
//!
//! with J the P0–P1 duality mass matrix. Unknowns are φ = −∂_n u (per
//! triangle) and ψ = s γu (per vertex), the normal pointing out of the
//! obstacle.

use crate::bem::BemMatrixSet;
use crate::error::{Error, Result};
use crate::geometry::{self, Point3};
use crate::mesh::SurfaceMesh;
use crate::spaces::BoundarySpaces;
use crate::symbols::{ComplexFrequency, TransferMatrix};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64;
use std::sync::OnceLock;

const REFINEMENT_TOL: f64 = 1e-10;
const MAX_REFINEMENT_STEPS: usize = 3;

/// Boundary coefficient vectors: φ on triangles, ψ on vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub phi: Vec<Complex64>,
    pub psi: Vec<Complex64>,
}

impl CauchyData {
    pub fn zeros(phi_dim: usize, psi_dim: usize) -> Self {
        Self {
            phi: vec![Complex64::new(0.0, 0.0); phi_dim],
            psi: vec![Complex64::new(0.0, 0.0); psi_dim],
        }
    }

    pub fn from_stacked(x: &[Complex64], phi_dim: usize) -> Self {
        Self {
            phi: x[..phi_dim].to_vec(),
            psi: x[phi_dim..].to_vec(),
        }
    }

    pub fn stacked(&self) -> Vec<Complex64> {
        let mut x = self.phi.clone();
        x.extend_from_slice(&self.psi);
        x
    }
}

pub struct BlockSystem {
    s: ComplexFrequency,
    phi_dim: usize,
    psi_dim: usize,
    matrix: Mat<Complex64>,
    lu: OnceLock<std::result::Result<PartialPivLu<Complex64>, String>>,
}

impl std::fmt::Debug for BlockSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockSystem")
            .field("s", &self.s)
            .field("phi_dim", &self.phi_dim)
            .field("psi_dim", &self.psi_dim)
            .field("factorized", &self.lu.get().is_some())
            .finish()
    }
}

/// B_imp(s): the Calderón blocks plus the ±½ duality terms.
pub fn assemble_b_imp(spaces: &BoundarySpaces, bem: &BemMatrixSet) -> Result<Mat<Complex64>> {
    let (np, nq) = (spaces.phi_dim, spaces.psi_dim);
    let dims_ok = bem.v.nrows() == np
        && bem.v.ncols() == np
        && bem.k.nrows() == np
        && bem.k.ncols() == nq
        && bem.kt.nrows() == nq
        && bem.kt.ncols() == np
        && bem.w.nrows() == nq
        && bem.w.ncols() == nq;
    if !dims_ok {
        return Err(Error::DimensionMismatch("boundary operators do not match the spaces".into()));
    }
    let s = bem.s.value();
    let sinv = 1.0 / s;
    let j = &spaces.mass_p0p1;
    let half = Complex64::new(0.5, 0.0);
    let n = np + nq;
    let a = Mat::from_fn(n, n, |r, c| match (r < np, c < np) {
        (true, true) => s * bem.v[(r, c)],
        (true, false) => bem.k[(r, c - np)] - half * j[(r, c - np)],
        (false, true) => -bem.kt[(r - np, c)] + half * j[(c, r - np)],
        (false, false) => sinv * bem.w[(r - np, c - np)],
    });
    Ok(a)
}

/// A(s) = B_imp(s) + diag(0, F_h(s)). `transfer = None` gives B_imp alone.
pub fn assemble_a(
    spaces: &BoundarySpaces,
    bem: &BemMatrixSet,
    transfer: Option<&TransferMatrix>,
) -> Result<BlockSystem> {
    let mut a = assemble_b_imp(spaces, bem)?;
    let np = spaces.phi_dim;
    if let Some(f) = transfer {
        if f.matrix.nrows() != spaces.psi_dim || f.matrix.ncols() != spaces.psi_dim {
            return Err(Error::DimensionMismatch("transfer matrix does not match Ψ_h".into()));
        }
        for c in 0..spaces.psi_dim {
            for r in 0..spaces.psi_dim {
                a[(np + r, np + c)] += f.matrix[(r, c)];
            }
        }
    }
    Ok(BlockSystem {
        s: bem.s,
        phi_dim: np,
        psi_dim: spaces.psi_dim,
        matrix: a,
        lu: OnceLock::new(),
    })
}

impl BlockSystem {
    pub fn s(&self) -> ComplexFrequency {
        self.s
    }

    pub fn phi_dim(&self) -> usize {
        self.phi_dim
    }

    pub fn psi_dim(&self) -> usize {
        self.psi_dim
    }

    pub fn dim(&self) -> usize {
        self.phi_dim + self.psi_dim
    }

    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.matrix
    }

    /// x* A x.
    pub fn quadratic_form(&self, x: &[Complex64]) -> Complex64 {
        let ax = self.apply(x);
        x.iter().zip(&ax).map(|(xi, yi)| xi.conj() * yi).sum()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (c, &xc) in x.iter().enumerate() {
            let col = self.matrix.col(c);
            for r in 0..n {
                y[r] += col[r] * xc;
            }
        }
        y
    }

    fn lu(&self) -> Result<&PartialPivLu<Complex64>> {
        let lu = self.lu.get_or_init(|| {
            let lu = self.matrix.partial_piv_lu();
            let u = lu.U();
            let scale = (0..self.dim()).map(|i| u[(i, i)].norm()).fold(0.0, f64::max);
            for i in 0..self.dim() {
                let p = u[(i, i)].norm();
                if !p.is_finite() || p <= scale * f64::EPSILON * self.dim() as f64 {
                    return Err(format!("zero pivot at row {i}"));
                }
            }
            Ok(lu)
        });
        lu.as_ref().map_err(|msg| Error::SolveFailed {
            index: None,
            s: self.s.value(),
            msg: msg.clone(),
        })
    }

    /// Factorizes now instead of on the first solve.
    pub fn factorize(&self) -> Result<()> {
        self.lu().map(|_| ())
    }

    /// Solves A x = rhs with iterative refinement until the residual drops
    /// below 1e-10 relative.
    pub fn solve_stacked(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch(format!("rhs has length {}, system {}", rhs.len(), n)));
        }
        let rhs_norm = norm(rhs);
        if rhs_norm == 0.0 {
            return Ok(vec![Complex64::new(0.0, 0.0); n]);
        }
        let lu = self.lu()?;
        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let sol = lu.solve(&b);
        let mut x: Vec<Complex64> = (0..n).map(|i| sol[(i, 0)]).collect();
        for _ in 0..MAX_REFINEMENT_STEPS {
            let ax = self.apply(&x);
            let r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            if norm(&r) <= REFINEMENT_TOL * rhs_norm {
                break;
            }
            let rm = Mat::from_fn(n, 1, |i, _| r[i]);
            let d = lu.solve(&rm);
            for i in 0..n {
                x[i] += d[(i, 0)];
            }
        }
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SolveFailed {
                index: None,
                s: self.s.value(),
                msg: "non-finite solution".into(),
            });
        }
        Ok(x)
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<CauchyData> {
        Ok(CauchyData::from_stacked(&self.solve_stacked(rhs)?, self.phi_dim))
    }
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Consistency residual of the exterior Cauchy data of the point source
/// e^{−s|x−x0|}/(4π|x−x0|), x0 inside the obstacle: interpolates the data
/// into Φ_h × Ψ_h and returns
/// ‖B_imp(s)(φ_h, ψ_h) − (0, Jᵀφ_h)‖ / ‖(φ_h, ψ_h)‖ with the residual in the
/// discrete L² dual norm.
pub fn cauchy_identity_residual(
    mesh: &SurfaceMesh,
    spaces: &BoundarySpaces,
    bem: &BemMatrixSet,
    x0: Point3,
) -> Result<f64> {
    if !mesh.contains(x0) || mesh.distance_to(x0) <= 0.0 {
        return Err(Error::PointNotInside(x0));
    }
    let s = bem.s.value();
    let green = |x: Point3| {
        let r = geometry::dist(x, x0);
        (-s * r).exp() / (4.0 * std::f64::consts::PI * r)
    };
    // −∂_n û at centroids
    let phi: Vec<Complex64> = (0..mesh.num_triangles())
        .map(|t| {
            let x = mesh.centroid(t);
            let d = geometry::sub(x, x0);
            let r = geometry::norm(d);
            let dgdr = -green(x) * (s + 1.0 / r);
            -dgdr * (geometry::dot(d, mesh.normals()[t]) / r)
        })
        .collect();
    let psi: Vec<Complex64> = mesh.vertices().iter().map(|&x| s * green(x)).collect();
    let data = CauchyData { phi, psi };
    let b = assemble_b_imp(spaces, bem)?;
    let x = data.stacked();
    let np = spaces.phi_dim;
    let n = x.len();
    let mut r = vec![Complex64::new(0.0, 0.0); n];
    for (c, &xc) in x.iter().enumerate() {
        for i in 0..n {
            r[i] += b[(i, c)] * xc;
        }
    }
    let j = &spaces.mass_p0p1;
    for v in 0..spaces.psi_dim {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..np {
            acc += j[(t, v)] * data.phi[t];
        }
        r[np + v] -= acc;
    }
    // dual norms: P0 mass is diagonal, P1 mass is inverted by Cholesky
    let areas = mesh.areas();
    let r0: f64 = (0..np).map(|t| r[t].norm_sqr() / areas[t]).sum();
    let m1 = spaces.mass_p1.llt(faer::Side::Lower).map_err(|_| Error::InvalidMesh("P1 mass matrix is not positive definite".into()))?;
    let rr = Mat::from_fn(spaces.psi_dim, 2, |i, k| if k == 0 { r[np + i].re } else { r[np + i].im });
    let y = m1.solve(&rr);
    let r1: f64 = (0..spaces.psi_dim)
        .map(|i| rr[(i, 0)] * y[(i, 0)] + rr[(i, 1)] * y[(i, 1)])
        .sum();
    let d0: f64 = (0..np).map(|t| data.phi[t].norm_sqr() * areas[t]).sum();
    let mut d1 = 0.0;
    for a in 0..spaces.psi_dim {
        for c in 0..spaces.psi_dim {
            let m = spaces.mass_p1[(a, c)];
            if m != 0.0 {
                d1 += m * (data.psi[a].conj() * data.psi[c]).re;
            }
        }
    }
    Ok(((r0 + r1) / (d0 + d1)).sqrt())
}
