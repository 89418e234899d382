//! Time-domain scattering: incident traces, the right-hand side of the
//! discrete boundary system, the density solve and Kirchhoff field
//! reconstruction u = S(∂_t)φ + D(∂_t)∂_t^{−1}ψ.

use crate::bem::{BemAssembler, BemMatrixSet, PotentialEvaluator, QuadratureConfig};
use crate::cache::BemCache;
use crate::calderon::assemble_a;
use crate::cq::{self, apply_convolution, scalar_weights, CQScheme, ScalarSymbol, TimeSeries};
use crate::error::{Error, Result};
use crate::geometry::{self, Point3};
use crate::mesh::SurfaceMesh;
use crate::spaces::BoundarySpaces;
use crate::symbols::{transfer_matrix, ComplexFrequency, TransferKind, TransferSymbolSpec};
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

/// Traces at t ≤ 0 above this fraction of the amplitude violate the
/// zero-initial-data assumption.
pub const CAUSALITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveKind {
    /// e^{−c(|x−center| − (r0 − t))²} / |x−center|, converging on `center`.
    SphericalGaussian { center: Point3, c: f64, r0: f64 },
    /// e^{−c(x·a − (t − t0))²}.
    PlaneGaussian { direction: Point3, c: f64, t0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidentWave {
    pub kind: WaveKind,
    pub amplitude: f64,
}

impl IncidentWave {
    /// The converging spherical pulse e^{−5(|x|−(3−t))²}/|x|.
    pub fn sphere_benchmark() -> Self {
        Self {
            kind: WaveKind::SphericalGaussian {
                center: [0.0; 3],
                c: 5.0,
                r0: 3.0,
            },
            amplitude: 1.0,
        }
    }

    pub fn plane(direction: Point3, c: f64, t0: f64) -> Result<Self> {
        let n = geometry::norm(direction);
        if !(n > 0.0) || !(c > 0.0) {
            return Err(Error::Precondition("plane wave needs a nonzero direction and c > 0".into()));
        }
        Ok(Self {
            kind: WaveKind::PlaneGaussian {
                direction: geometry::scale(direction, 1.0 / n),
                c,
                t0,
            },
            amplitude: 1.0,
        })
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            WaveKind::SphericalGaussian { c, .. } if !(c > 0.0) => {
                Err(Error::Precondition("spherical wave needs c > 0".into()))
            }
            WaveKind::PlaneGaussian { direction, c, .. } => {
                if (geometry::norm(direction) - 1.0).abs() > 1e-12 || !(c > 0.0) {
                    Err(Error::Precondition("plane wave needs a unit direction and c > 0".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Value and spatial gradient at (x, t).
    pub fn eval(&self, x: Point3, t: f64) -> (f64, Point3) {
        match self.kind {
            WaveKind::SphericalGaussian { center, c, r0 } => {
                let d = geometry::sub(x, center);
                let r = geometry::norm(d);
                let a = r - r0 + t;
                let e = self.amplitude * (-c * a * a).exp();
                let dr = (-1.0 / (r * r) - 2.0 * c * a / r) * e;
                (e / r, geometry::scale(d, dr / r))
            }
            WaveKind::PlaneGaussian { direction, c, t0 } => {
                let a = geometry::dot(x, direction) - (t - t0);
                let u = self.amplitude * (-c * a * a).exp();
                (u, geometry::scale(direction, -2.0 * c * a * u))
            }
        }
    }
}

/// γu^inc at vertices and ∂_n u^inc at centroids on the CQ grid.
#[derive(Debug, Clone)]
pub struct IncidentTraces {
    pub gamma: TimeSeries,
    pub dn: TimeSeries,
    /// Largest |γu^inc| at t = 0 relative to the amplitude.
    pub initial_magnitude: f64,
}

impl IncidentTraces {
    pub fn is_causal(&self) -> bool {
        self.initial_magnitude <= CAUSALITY_TOLERANCE
    }
}

pub fn incident_traces(wave: &IncidentWave, mesh: &SurfaceMesh, scheme: &CQScheme) -> Result<IncidentTraces> {
    wave.validate()?;
    let times = scheme.times();
    let gamma = TimeSeries {
        tau: scheme.tau(),
        values: times
            .iter()
            .map(|&t| mesh.vertices().iter().map(|&x| Complex64::new(wave.eval(x, t).0, 0.0)).collect())
            .collect(),
    };
    let dn = TimeSeries {
        tau: scheme.tau(),
        values: times
            .iter()
            .map(|&t| {
                (0..mesh.num_triangles())
                    .map(|k| {
                        let (_, g) = wave.eval(mesh.centroid(k), t);
                        Complex64::new(geometry::dot(g, mesh.normals()[k]), 0.0)
                    })
                    .collect()
            })
            .collect(),
    };
    let mut initial: f64 = 0.0;
    for v in &gamma.values[0] {
        initial = initial.max(v.norm());
    }
    let initial_magnitude = if wave.amplitude == 0.0 { 0.0 } else { initial / wave.amplitude.abs() };
    Ok(IncidentTraces { gamma, dn, initial_magnitude })
}

fn mat_vec(m: &Mat<f64>, x: &[Complex64]) -> Vec<Complex64> {
    let mut y = vec![Complex64::new(0.0, 0.0); m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == Complex64::new(0.0, 0.0) {
            continue;
        }
        for i in 0..m.nrows() {
            let a = m[(i, j)];
            if a != 0.0 {
                y[i] += a * xj;
            }
        }
    }
    y
}

fn map_series(g: &TimeSeries, f: impl Fn(&[Complex64]) -> Vec<Complex64> + Sync) -> TimeSeries {
    TimeSeries {
        tau: g.tau,
        values: g.values.par_iter().map(|v| f(v)).collect(),
    }
}

/// Right-hand side (0, −[F(∂_t)∂_t γu^inc] + Jᵀ∂_n u^inc) in the dual of
/// Φ_h × Ψ_h.
pub fn build_rhs(
    spec: &TransferSymbolSpec,
    spaces: &BoundarySpaces,
    traces: &IncidentTraces,
    scheme: &CQScheme,
) -> Result<TimeSeries> {
    spec.validate()?;
    let np = spaces.phi_dim;
    let nq = spaces.psi_dim;
    if traces.gamma.dim() != nq || traces.dn.dim() != np {
        return Err(Error::DimensionMismatch("traces do not match the spaces".into()));
    }
    let len = traces.gamma.len();
    let mut block1 = vec![vec![Complex64::new(0.0, 0.0); nq]; len];

    // F_h(s)s = a(s)s M + b(s)s S_LB + c(s)s M_H; each coefficient is a
    // scalar symbol acting on a matrix-weighted trace
    let zero = Complex64::new(0.0, 0.0);
    let probe = spec.coefficients(Complex64::new(1.0, 0.5));
    type Coefficient = Box<dyn Fn(Complex64) -> Complex64 + Sync>;
    let mut parts: Vec<(&Mat<f64>, Coefficient)> = Vec::new();
    if probe.mass != zero {
        let sp = *spec;
        parts.push((&spaces.mass_p1, Box::new(move |s| sp.coefficients(s).mass * s)));
    }
    if probe.stiffness != zero {
        let sp = *spec;
        parts.push((&spaces.stiffness_lb, Box::new(move |s| sp.coefficients(s).stiffness * s)));
    }
    if probe.curvature != zero {
        let sp = *spec;
        parts.push((spec.curvature_matrix(spaces)?, Box::new(move |s| sp.coefficients(s).curvature * s)));
    }
    for (m, f) in parts {
        let weighted = map_series(&traces.gamma, |g| mat_vec(m, g));
        let w = scalar_weights(&ScalarSymbol::new(f), scheme)?;
        let conv = apply_convolution(&w, &weighted)?;
        for (b, c) in block1.iter_mut().zip(&conv.values) {
            for (bi, ci) in b.iter_mut().zip(c) {
                *bi -= ci;
            }
        }
    }
    let j = &spaces.mass_p0p1;
    let jt = j.transpose().to_owned();
    let dn_part = map_series(&traces.dn, |d| mat_vec(&jt, d));
    let values = block1
        .into_iter()
        .zip(dn_part.values)
        .map(|(mut b, d)| {
            for (bi, di) in b.iter_mut().zip(d) {
                *bi += di;
            }
            let mut v = vec![Complex64::new(0.0, 0.0); np];
            v.extend(b);
            v
        })
        .collect();
    Ok(TimeSeries { tau: scheme.tau(), values })
}

/// Everything needed for one scattering run.
pub struct ScatterProblem<'a> {
    pub mesh: &'a SurfaceMesh,
    pub spaces: &'a BoundarySpaces,
    pub transfer: TransferSymbolSpec,
    pub scheme: CQScheme,
    pub wave: IncidentWave,
    pub quad: QuadratureConfig,
    pub cache: Option<BemCache>,
    /// Called with (solves done, solves total) after each frequency.
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
}

impl<'a> ScatterProblem<'a> {
    pub fn new(
        mesh: &'a SurfaceMesh,
        spaces: &'a BoundarySpaces,
        transfer: TransferSymbolSpec,
        scheme: CQScheme,
        wave: IncidentWave,
    ) -> Self {
        Self {
            mesh,
            spaces,
            transfer,
            scheme,
            wave,
            quad: QuadratureConfig::default(),
            cache: None,
            progress: None,
        }
    }
}

/// φ_h and ψ_h on the time grid.
#[derive(Debug, Clone)]
pub struct DensityHistory {
    pub phi: TimeSeries,
    pub psi: TimeSeries,
    /// Warnings raised while solving (e.g. non-causal incident data).
    pub warnings: Vec<String>,
}

impl DensityHistory {
    /// max_n (max_i ψ_i − min_i ψ_i) / max_{n,i} |ψ_i|: zero for densities
    /// constant across vertices at every step.
    pub fn psi_spread(&self) -> f64 {
        let peak = self
            .psi
            .values
            .iter()
            .flat_map(|v| v.iter().map(|x| x.norm()))
            .fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        self.psi
            .values
            .iter()
            .map(|v| {
                let hi = v.iter().map(|x| x.re).fold(f64::NEG_INFINITY, f64::max);
                let lo = v.iter().map(|x| x.re).fold(f64::INFINITY, f64::min);
                hi - lo
            })
            .fold(0.0, f64::max)
            / peak
    }

    fn stacked(&self) -> TimeSeries {
        TimeSeries {
            tau: self.phi.tau,
            values: self
                .phi
                .values
                .iter()
                .zip(&self.psi.values)
                .map(|(a, b)| a.iter().chain(b).copied().collect())
                .collect(),
        }
    }
}

fn operators_at(problem: &ScatterProblem<'_>, assembler: &BemAssembler<'_>, s: ComplexFrequency) -> Result<BemMatrixSet> {
    if let Some(cache) = &problem.cache {
        if let Some(set) = cache.load(problem.mesh, s, &problem.quad) {
            return Ok(set);
        }
        let set = assembler.assemble(s);
        cache.store(problem.mesh, &problem.quad, &set)?;
        return Ok(set);
    }
    Ok(assembler.assemble(s))
}

/// Solves the fully discrete boundary system for (φ_h, ψ_h).
pub fn solve_densities(problem: &ScatterProblem<'_>) -> Result<DensityHistory> {
    let traces = incident_traces(&problem.wave, problem.mesh, &problem.scheme)?;
    let mut warnings = Vec::new();
    if !traces.is_causal() {
        warnings.push(format!(
            "incident traces at t = 0 reach {:.3e} of the amplitude; zero initial data is assumed",
            traces.initial_magnitude
        ));
    }
    let rhs = build_rhs(&problem.transfer, problem.spaces, &traces, &problem.scheme)?;
    let np = problem.spaces.phi_dim;
    if problem.wave.amplitude == 0.0 {
        let len = rhs.len();
        return Ok(DensityHistory {
            phi: TimeSeries::zeros(problem.scheme.tau(), len, np),
            psi: TimeSeries::zeros(problem.scheme.tau(), len, problem.spaces.psi_dim),
            warnings,
        });
    }
    let h_max = if problem.transfer.uses_curvature() {
        problem.transfer.max_curvature(problem.spaces, problem.mesh.analytic_curvature())?
    } else {
        0.0
    };
    let sigma0 = problem.transfer.sigma0(h_max);
    let assembler = BemAssembler::new(problem.mesh, problem.spaces, problem.quad)?;
    let total = if rhs.is_real() {
        problem.scheme.independent_frequencies().len()
    } else {
        problem.scheme.steps() + 1
    };
    let done = std::sync::atomic::AtomicUsize::new(0);
    let solution = cq::operator_cq_solve(
        |l, s, g| {
            if s.re <= sigma0 {
                return Err(Error::Precondition(format!(
                    "contour frequency {l} (s = {s}) lies left of the positivity abscissa {sigma0}"
                )));
            }
            let sf = ComplexFrequency::new(s)?;
            let bem = operators_at(problem, &assembler, sf)?;
            let sys = if problem.transfer.kind == TransferKind::SoundHard {
                assemble_a(problem.spaces, &bem, None)?
            } else {
                let f = transfer_matrix(&problem.transfer, sf, problem.spaces)?;
                assemble_a(problem.spaces, &bem, Some(&f))?
            };
            drop(bem);
            let x = sys.solve_stacked(g)?;
            let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            if let Some(p) = problem.progress {
                p(k, total);
            }
            Ok(x)
        },
        &rhs,
        &problem.scheme,
    )?;
    let split = |range: std::ops::Range<usize>| TimeSeries {
        tau: solution.tau,
        values: solution.values.iter().map(|v| v[range.clone()].to_vec()).collect(),
    };
    let dim = solution.dim();
    Ok(DensityHistory {
        phi: split(0..np),
        psi: split(np..dim),
        warnings,
    })
}

/// Real field samples at observation points.
#[derive(Debug, Clone)]
pub struct FieldHistory {
    pub times: Vec<f64>,
    /// values[point][n]; NaN for points inside the obstacle.
    pub values: Vec<Vec<f64>>,
    pub near_surface: Vec<bool>,
    pub inside: Vec<bool>,
    /// max |Im| / max |Re| over all samples (zero for exact real output).
    pub imaginary_ratio: f64,
}

impl FieldHistory {
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .filter(|v| v.is_finite())
            .fold(0.0, |a, &b| a.max(b.abs()))
    }
}

/// Evaluates u_h = S(∂_t)φ_h + D(∂_t)∂_t^{−1}ψ_h at `points`.
pub fn evaluate_field(
    mesh: &SurfaceMesh,
    densities: &DensityHistory,
    points: &[Point3],
    scheme: &CQScheme,
    quad: QuadratureConfig,
) -> Result<FieldHistory> {
    let np = mesh.num_triangles();
    if densities.phi.dim() != np || densities.psi.dim() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch("densities do not match the mesh".into()));
    }
    let inside: Vec<bool> = points.iter().map(|&x| mesh.contains(x)).collect();
    let outside_idx: Vec<usize> = (0..points.len()).filter(|&i| !inside[i]).collect();
    let outside_pts: Vec<Point3> = outside_idx.iter().map(|&i| points[i]).collect();
    let evaluator = PotentialEvaluator::new(mesh, &outside_pts, quad)?;

    let stacked = densities.stacked();
    let hat = cq::forward_transform(&stacked, scheme)?;
    let freqs = scheme.frequencies();
    let m = scheme.steps() + 1;
    let real = stacked.is_real();
    let indices: Vec<usize> = if real { scheme.independent_frequencies() } else { (0..m).collect() };
    let mut field_hat = vec![Vec::new(); m];
    for &l in &indices {
        let s = freqs[l];
        let phi = &hat[l][..np];
        let psi: Vec<Complex64> = hat[l][np..].iter().map(|v| v / s).collect();
        field_hat[l] = evaluator.evaluate(s, Some(phi), Some(&psi));
    }
    if real {
        for &l in &indices {
            if l != 0 && m - l != l {
                field_hat[m - l] = field_hat[l].iter().map(|v| v.conj()).collect();
            }
        }
    }
    let series = cq::inverse_transform(&field_hat, scheme)?;
    let mut values = vec![vec![f64::NAN; m]; points.len()];
    let mut near = vec![false; points.len()];
    let (mut max_re, mut max_im): (f64, f64) = (0.0, 0.0);
    for (k, &i) in outside_idx.iter().enumerate() {
        near[i] = evaluator.near_surface()[k];
        for n in 0..m {
            let v = series.values[n][k];
            values[i][n] = v.re;
            max_re = max_re.max(v.re.abs());
            max_im = max_im.max(v.im.abs());
        }
    }
    let imaginary_ratio = if max_re > 0.0 { max_im / max_re } else { 0.0 };
    Ok(FieldHistory {
        times: scheme.times(),
        values,
        near_surface: near,
        inside,
        imaginary_ratio,
    })
}

/// A rectangular grid in the plane {x_axis = offset}.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPlane {
    /// Index of the coordinate held fixed (0, 1 or 2).
    pub normal_axis: usize,
    pub offset: f64,
    /// [min, max] of the two free coordinates, in increasing axis order.
    pub extent: [[f64; 2]; 2],
    pub resolution: [usize; 2],
}

impl SnapshotPlane {
    pub fn points(&self) -> Result<Vec<Point3>> {
        if self.normal_axis > 2 || self.resolution[0] < 2 || self.resolution[1] < 2 {
            return Err(Error::Precondition("snapshot plane needs an axis in 0..3 and at least 2x2 points".into()));
        }
        let free: Vec<usize> = (0..3).filter(|&a| a != self.normal_axis).collect();
        let mut pts = Vec::with_capacity(self.resolution[0] * self.resolution[1]);
        for j in 0..self.resolution[1] {
            for i in 0..self.resolution[0] {
                let mut p = [0.0; 3];
                p[self.normal_axis] = self.offset;
                let fi = i as f64 / (self.resolution[0] - 1) as f64;
                let fj = j as f64 / (self.resolution[1] - 1) as f64;
                p[free[0]] = self.extent[0][0] + fi * (self.extent[0][1] - self.extent[0][0]);
                p[free[1]] = self.extent[1][0] + fj * (self.extent[1][1] - self.extent[1][0]);
                pts.push(p);
            }
        }
        Ok(pts)
    }
}
