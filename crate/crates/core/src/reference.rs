//! Semi-analytic solution for the unit sphere under a spherically symmetric
//! incident wave. Constants are eigenfunctions of every boundary operator
//! there, so the boundary system collapses to the scalar equation
//! (1 + 1/s + f(s))ψ̂ = −f(s)s γû^inc + ∂_r û^inc, and the scattered field is
//! u(x, t) = (∂_t^{−1}ψ)(t − (|x| − 1)) / |x|.

use crate::cq::{apply_convolution, scalar_cq_solve, scalar_weights, CQScheme, ScalarSymbol, TimeSeries};
use crate::error::{Error, Result};
use crate::scatter::{IncidentWave, WaveKind};
use crate::symbols::TransferSymbolSpec;
use num_complex::Complex64;

/// Default step count of the oracle.
pub const DEFAULT_REFERENCE_STEPS: usize = 1 << 13;

#[derive(Debug, Clone)]
pub struct SphereReferenceRun {
    /// `SoundHard` gives f ≡ 0.
    pub transfer: TransferSymbolSpec,
    pub scheme: CQScheme,
    pub wave: IncidentWave,
}

impl SphereReferenceRun {
    pub fn new(transfer: TransferSymbolSpec, scheme: CQScheme, wave: IncidentWave) -> Result<Self> {
        transfer.validate()?;
        match wave.kind {
            WaveKind::SphericalGaussian { center, .. } if center == [0.0; 3] => {}
            _ => {
                return Err(Error::Precondition(
                    "the sphere reference needs a spherical wave centred at the origin".into(),
                ))
            }
        }
        Ok(Self { transfer, scheme, wave })
    }

    /// The sphere benchmark: converging Gaussian, T = 4, BDF2.
    pub fn benchmark(transfer: TransferSymbolSpec, n: usize) -> Result<Self> {
        Self::new(transfer, CQScheme::on_interval(2, 4.0, n)?, IncidentWave::sphere_benchmark())
    }

    /// f(s), the transfer symbol on constants of the unit sphere (H = 1).
    pub fn symbol(&self, s: Complex64) -> Complex64 {
        self.transfer.coefficients(s).on_constants(1.0)
    }

    /// γu^inc and ∂_r u^inc on the unit sphere at the scheme's times.
    pub fn traces(&self) -> (Vec<f64>, Vec<f64>) {
        let x = [1.0, 0.0, 0.0];
        self.scheme
            .times()
            .iter()
            .map(|&t| {
                let (u, g) = self.wave.eval(x, t);
                (u, g[0])
            })
            .unzip()
    }
}

/// The reference density ψ = sγu of the scattered field.
pub fn solve_reference_density(run: &SphereReferenceRun) -> Result<Vec<f64>> {
    let sigma0 = run.transfer.sigma0(1.0);
    if let Some((l, s)) = run.scheme.frequencies().iter().enumerate().find(|(_, s)| s.re <= sigma0) {
        return Err(Error::Precondition(format!(
            "contour frequency {l} (s = {s}) lies left of the positivity abscissa {sigma0}"
        )));
    }
    let tau = run.scheme.tau();
    let (gamma, dn) = run.traces();
    let mut rhs: Vec<Complex64> = dn.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if run.symbol(Complex64::new(1.0, 0.5)) != Complex64::new(0.0, 0.0) {
        let fs = scalar_weights(&ScalarSymbol::new(|s| run.symbol(s) * s), &run.scheme)?;
        let conv = apply_convolution(&fs, &TimeSeries::from_real_scalar(tau, &gamma))?;
        for (r, c) in rhs.iter_mut().zip(conv.component(0)) {
            *r -= c;
        }
    }
    let psi = scalar_cq_solve(&ScalarSymbol::new(|s| 1.0 + 1.0 / s + run.symbol(s)), &rhs, &run.scheme)?;
    Ok(psi.iter().map(|v| v.re).collect())
}

/// u(R e, t_n) from the reference density.
pub fn reference_field_at(run: &SphereReferenceRun, psi: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 1.0) {
        return Err(Error::Precondition(format!("observation radius {radius} must exceed 1")));
    }
    let tau = run.scheme.tau();
    if psi.len() != run.scheme.steps() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "density has {} samples, scheme has {}",
            psi.len(),
            run.scheme.steps() + 1
        )));
    }
    let iw = scalar_weights(&ScalarSymbol::power(-1.0), &run.scheme)?;
    let w: Vec<f64> = apply_convolution(&iw, &TimeSeries::from_real_scalar(tau, psi))?
        .component(0)
        .iter()
        .map(|v| v.re)
        .collect();
    Ok(shift_causal(&w, (radius - 1.0) / tau).into_iter().map(|v| v / radius).collect())
}

/// out_n = w(n − shift) in index units, zero for negative arguments. Whole
/// shifts are exact; otherwise 4-point cubic Lagrange interpolation.
pub fn shift_causal(w: &[f64], shift: f64) -> Vec<f64> {
    let at = |i: isize| if i < 0 || i as usize >= w.len() { 0.0 } else { w[i as usize] };
    let k = shift.round();
    let whole = (shift - k).abs() <= 1e-9 * shift.max(1.0);
    (0..w.len())
        .map(|n| {
            let x = n as f64 - shift;
            if whole {
                return at(n as isize - k as isize);
            }
            if x <= 0.0 {
                return 0.0;
            }
            let i = (x.floor() as isize).clamp(1, w.len() as isize - 3);
            let u = x - i as f64;
            let (a, b, c, d) = (at(i - 1), at(i), at(i + 1), at(i + 2));
            // Lagrange basis on nodes −1, 0, 1, 2
            -u * (u - 1.0) * (u - 2.0) / 6.0 * a + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * b
                - (u + 1.0) * u * (u - 2.0) / 2.0 * c
                + (u + 1.0) * u * (u - 1.0) / 6.0 * d
        })
        .collect()
}

/// Restricts a fine series to a coarser grid whose step is an integer
/// multiple of the fine one.
pub fn restrict(fine: &[f64], fine_steps: usize, coarse_steps: usize) -> Result<Vec<f64>> {
    if coarse_steps == 0 || !fine_steps.is_multiple_of(coarse_steps) || fine.len() != fine_steps + 1 {
        return Err(Error::Precondition(format!(
            "cannot restrict {fine_steps} steps to {coarse_steps}"
        )));
    }
    let r = fine_steps / coarse_steps;
    Ok((0..=coarse_steps).map(|n| fine[n * r]).collect())
}
