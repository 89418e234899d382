//! BDF convolution quadrature.
//!
//! Weights of K(∂_t^τ) are the Taylor coefficients of K(δ(ζ)/τ), with
//! δ(ζ) = Σ_{ℓ=1}^{p} (1−ζ)^ℓ/ℓ, computed by the trapezoidal rule on a circle
//! |ζ| = ρ. Operator equations A(∂_t^τ)x = g are solved either all at once in
//! the frequency domain (decoupled) or step by step (marching).

use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

const FFT_CONVOLUTION_THRESHOLD: usize = 512;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// BDF generating polynomial δ(ζ) for order 1 or 2.
pub fn bdf_delta(p: usize, zeta: Complex64) -> Complex64 {
    let w = 1.0 - zeta;
    match p {
        1 => w,
        2 => w + 0.5 * w * w,
        _ => panic!("BDF order {p} is not A-stable"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CQScheme {
    p: usize,
    tau: f64,
    n: usize,
    lambda: f64,
}

impl CQScheme {
    /// Scheme with `n` steps of size `tau` and the default contour radius.
    pub fn new(p: usize, tau: f64, n: usize) -> Result<Self> {
        Self::with_lambda(p, tau, n, Self::default_lambda(n))
    }

    /// Scheme on [0, t_final] with `n` steps.
    pub fn on_interval(p: usize, t_final: f64, n: usize) -> Result<Self> {
        if !(t_final > 0.0) || n == 0 {
            return Err(Error::InvalidScheme(format!("T = {t_final}, N = {n}")));
        }
        Self::new(p, t_final / n as f64, n)
    }

    pub fn with_lambda(p: usize, tau: f64, n: usize, lambda: f64) -> Result<Self> {
        if p != 1 && p != 2 {
            return Err(Error::InvalidScheme(format!("BDF order must be 1 or 2, got {p}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidScheme(format!("step size must be positive, got {tau}")));
        }
        if n == 0 {
            return Err(Error::InvalidScheme("at least one step is required".into()));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidScheme(format!("contour radius must lie in (0, 1), got {lambda}")));
        }
        if lambda.powi(n as i32 + 1) < 1e2 * f64::EPSILON {
            return Err(Error::InvalidScheme(format!(
                "contour radius {lambda} too small for {n} steps"
            )));
        }
        Ok(Self { p, tau, n, lambda })
    }

    /// eps^{1/(2(N+1))}.
    pub fn default_lambda(n: usize) -> f64 {
        f64::EPSILON.powf(1.0 / (2.0 * (n as f64 + 1.0)))
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn final_time(&self) -> f64 {
        self.tau * self.n as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| k as f64 * self.tau).collect()
    }

    /// Contour frequencies s_l = δ(λ e^{−2πil/(N+1)})/τ, l = 0..N.
    pub fn frequencies(&self) -> Vec<Complex64> {
        let m = self.n + 1;
        (0..m)
            .map(|l| {
                let zeta = Complex64::from_polar(self.lambda, -2.0 * std::f64::consts::PI * l as f64 / m as f64);
                bdf_delta(self.p, zeta) / self.tau
            })
            .collect()
    }

    /// Relative accuracy of the scaled transform: the larger of the aliasing
    /// term λ^{N+1} and the roundoff amplification eps·λ^{−N}.
    pub fn contour_tolerance(&self) -> f64 {
        let m = self.n as i32 + 1;
        self.lambda.powi(m).max(f64::EPSILON / self.lambda.powi(m - 1))
    }

    /// Indices l that need a solve when the data is real; the rest follow
    /// from s_{N+1−l} = conj(s_l).
    pub fn independent_frequencies(&self) -> Vec<usize> {
        (0..=self.n.div_ceil(2)).collect()
    }
}

/// A Laplace-domain symbol s ↦ K(s), analytic for Re s > 0.
pub struct ScalarSymbol<'a> {
    f: Box<dyn Fn(Complex64) -> Complex64 + Sync + 'a>,
}

impl<'a> ScalarSymbol<'a> {
    pub fn new(f: impl Fn(Complex64) -> Complex64 + Sync + 'a) -> Self {
        Self { f: Box::new(f) }
    }

    /// s^a on the principal branch.
    pub fn power(a: f64) -> Self {
        Self::new(move |s: Complex64| {
            if a == a.round() {
                s.powi(a as i32)
            } else {
                (a * s.ln()).exp()
            }
        })
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        (self.f)(s)
    }
}

/// Convolution weights ω_0..ω_N of K(∂_t^τ).
///
/// The Cauchy integral for the Taylor coefficients is discretized with
/// L = 4(N+1) nodes on the radius ρ with ρ^{L+N} = eps, which keeps both the
/// aliasing and the roundoff error near eps^{0.8}.
pub fn scalar_weights(symbol: &ScalarSymbol<'_>, scheme: &CQScheme) -> Result<Vec<Complex64>> {
    let n = scheme.n;
    let l = 4 * (n + 1);
    let rho = f64::EPSILON.powf(1.0 / (l + n) as f64);
    let mut buf = Vec::with_capacity(l);
    for k in 0..l {
        let zeta = Complex64::from_polar(rho, -2.0 * std::f64::consts::PI * k as f64 / l as f64);
        let s = bdf_delta(scheme.p, zeta) / scheme.tau;
        let v = symbol.eval(s);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::SymbolEvaluation { index: k, s });
        }
        buf.push(v);
    }
    // Σ_k K(s_k) e^{+2πijk/L} is an inverse DFT
    FftPlanner::new().plan_fft_inverse(l).process(&mut buf);
    let mut scale = 1.0 / l as f64;
    let mut w = Vec::with_capacity(n + 1);
    for v in buf.into_iter().take(n + 1) {
        w.push(v * scale);
        scale /= rho;
    }
    Ok(w)
}

/// Matrix-valued weights Ω_0..Ω_N of A(∂_t^τ) for a d×d symbol, on the
/// same contour as [`scalar_weights`].
pub fn matrix_weights(
    symbol: impl Fn(Complex64) -> Result<Mat<Complex64>> + Sync,
    d: usize,
    scheme: &CQScheme,
) -> Result<Vec<Mat<Complex64>>> {
    let n = scheme.n;
    let l = 4 * (n + 1);
    let rho = f64::EPSILON.powf(1.0 / (l + n) as f64);
    let values: Vec<Mat<Complex64>> = (0..l)
        .into_par_iter()
        .map(|k| {
            let zeta = Complex64::from_polar(rho, -2.0 * std::f64::consts::PI * k as f64 / l as f64);
            let s = bdf_delta(scheme.p, zeta) / scheme.tau;
            let m = symbol(s)?;
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch(format!("symbol returned {}x{}, expected {d}x{d}", m.nrows(), m.ncols())));
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let fft = FftPlanner::new().plan_fft_inverse(l);
    let mut out: Vec<Mat<Complex64>> = (0..=n).map(|_| Mat::zeros(d, d)).collect();
    let mut buf = vec![czero(); l];
    for c in 0..d {
        for r in 0..d {
            for k in 0..l {
                buf[k] = values[k][(r, c)];
            }
            fft.process(&mut buf);
            let mut scale = 1.0 / l as f64;
            for (j, o) in out.iter_mut().enumerate() {
                o[(r, c)] = buf[j] * scale;
                scale /= rho;
            }
        }
    }
    Ok(out)
}

/// Samples x_0..x_N of a vector-valued signal on the CQ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub tau: f64,
    pub values: Vec<Vec<Complex64>>,
}

impl TimeSeries {
    pub fn zeros(tau: f64, len: usize, dim: usize) -> Self {
        Self {
            tau,
            values: vec![vec![czero(); dim]; len],
        }
    }

    pub fn from_scalar(tau: f64, v: &[Complex64]) -> Self {
        Self {
            tau,
            values: v.iter().map(|&x| vec![x]).collect(),
        }
    }

    pub fn from_real_scalar(tau: f64, v: &[f64]) -> Self {
        Self {
            tau,
            values: v.iter().map(|&x| vec![Complex64::new(x, 0.0)]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Component `k` as a scalar series.
    pub fn component(&self, k: usize) -> Vec<Complex64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.im == 0.0))
    }

    fn check_uniform(&self) -> Result<()> {
        let d = self.dim();
        if self.values.iter().any(|v| v.len() != d) {
            return Err(Error::DimensionMismatch("time series has ragged entries".into()));
        }
        Ok(())
    }
}

/// out_n = Σ_{j≤n} ω_j g_{n−j}.
pub fn apply_convolution(weights: &[Complex64], g: &TimeSeries) -> Result<TimeSeries> {
    g.check_uniform()?;
    if weights.len() < g.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for a series of length {}",
            weights.len(),
            g.len()
        )));
    }
    let n = g.len();
    let d = g.dim();
    let mut out = TimeSeries::zeros(g.tau, n, d);
    if n > FFT_CONVOLUTION_THRESHOLD {
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut wh = vec![czero(); m];
        wh[..n].copy_from_slice(&weights[..n]);
        fwd.process(&mut wh);
        let mut buf = vec![czero(); m];
        for k in 0..d {
            buf.iter_mut().for_each(|b| *b = czero());
            for i in 0..n {
                buf[i] = g.values[i][k];
            }
            fwd.process(&mut buf);
            for (b, w) in buf.iter_mut().zip(&wh) {
                *b *= w;
            }
            inv.process(&mut buf);
            for i in 0..n {
                out.values[i][k] = buf[i] / m as f64;
            }
        }
    } else {
        for i in 0..n {
            let o = &mut out.values[i];
            for j in 0..=i {
                let w = weights[j];
                for (ok, gk) in o.iter_mut().zip(&g.values[i - j]) {
                    *ok += w * gk;
                }
            }
        }
    }
    Ok(out)
}

/// Scaled transform ĝ_l = Σ_n λⁿ g_n e^{−2πinl/(N+1)}, one vector per
/// contour frequency.
pub fn forward_transform(g: &TimeSeries, scheme: &CQScheme) -> Result<Vec<Vec<Complex64>>> {
    g.check_uniform()?;
    let m = scheme.n + 1;
    if g.len() != m {
        return Err(Error::DimensionMismatch(format!("series of length {} for {} steps", g.len(), scheme.n)));
    }
    let d = g.dim();
    let fft = FftPlanner::new().plan_fft_forward(m);
    let mut out = vec![vec![czero(); d]; m];
    let mut buf = vec![czero(); m];
    for k in 0..d {
        let mut scale = 1.0;
        for i in 0..m {
            buf[i] = g.values[i][k] * scale;
            scale *= scheme.lambda;
        }
        fft.process(&mut buf);
        for l in 0..m {
            out[l][k] = buf[l];
        }
    }
    Ok(out)
}

/// Inverse of [`forward_transform`]: x_n = λ^{−n}/(N+1) Σ_l x̂_l e^{2πinl/(N+1)}.
pub fn inverse_transform(hat: &[Vec<Complex64>], scheme: &CQScheme) -> Result<TimeSeries> {
    let m = scheme.n + 1;
    if hat.len() != m {
        return Err(Error::DimensionMismatch(format!("{} frequencies for {} steps", hat.len(), scheme.n)));
    }
    let d = hat.first().map_or(0, |v| v.len());
    let fft = FftPlanner::new().plan_fft_inverse(m);
    let mut out = TimeSeries::zeros(scheme.tau, m, d);
    let mut buf = vec![czero(); m];
    for k in 0..d {
        for l in 0..m {
            buf[l] = hat[l][k];
        }
        fft.process(&mut buf);
        let mut scale = 1.0 / m as f64;
        for i in 0..m {
            out.values[i][k] = buf[i] * scale;
            scale /= scheme.lambda;
        }
    }
    Ok(out)
}

/// Solves A(∂_t^τ)x = g by independent solves at every contour frequency.
///
/// `solve(l, s_l, ĝ_l)` returns x̂_l. For real data only the frequencies in
/// [`CQScheme::independent_frequencies`] are visited.
pub fn operator_cq_solve<F>(solve: F, rhs: &TimeSeries, scheme: &CQScheme) -> Result<TimeSeries>
where
    F: Fn(usize, Complex64, &[Complex64]) -> Result<Vec<Complex64>> + Sync,
{
    let hat = operator_cq_solve_frequencies(solve, rhs, scheme)?;
    inverse_transform(&hat, scheme)
}

/// The frequency-domain half of [`operator_cq_solve`]: returns x̂_l for all l.
pub fn operator_cq_solve_frequencies<F>(solve: F, rhs: &TimeSeries, scheme: &CQScheme) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(usize, Complex64, &[Complex64]) -> Result<Vec<Complex64>> + Sync,
{
    let ghat = forward_transform(rhs, scheme)?;
    let freqs = scheme.frequencies();
    let m = scheme.n + 1;
    let real = rhs.is_real();
    let indices: Vec<usize> = if real { scheme.independent_frequencies() } else { (0..m).collect() };
    let solved: Vec<(usize, Vec<Complex64>)> = indices
        .par_iter()
        .map(|&l| {
            let x = solve(l, freqs[l], &ghat[l]).map_err(|e| match e {
                Error::SolveFailed { s, msg, .. } => Error::SolveFailed { index: Some(l), s, msg },
                other => other,
            })?;
            if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::SolveFailed {
                    index: Some(l),
                    s: freqs[l],
                    msg: "non-finite solution".into(),
                });
            }
            Ok((l, x))
        })
        .collect::<Result<_>>()?;
    let mut hat = vec![Vec::new(); m];
    for (l, x) in solved {
        if real && l != 0 && m - l != l {
            hat[m - l] = x.iter().map(|v| v.conj()).collect();
        }
        hat[l] = x;
    }
    Ok(hat)
}

/// Scalar special case: x̂_l = ĝ_l / K(s_l).
pub fn scalar_cq_solve(symbol: &ScalarSymbol<'_>, rhs: &[Complex64], scheme: &CQScheme) -> Result<Vec<Complex64>> {
    let g = TimeSeries::from_scalar(scheme.tau, rhs);
    let x = operator_cq_solve(
        |l, s, gh| {
            let k = symbol.eval(s);
            if !k.re.is_finite() || !k.im.is_finite() || k.norm() == 0.0 {
                return Err(Error::SymbolEvaluation { index: l, s });
            }
            Ok(vec![gh[0] / k])
        },
        &g,
        scheme,
    )?;
    Ok(x.component(0))
}

/// Scalar CQ of a symbol applied in the frequency domain with the scheme's
/// own contour: the decoupled counterpart of [`apply_convolution`].
pub fn scalar_cq_apply(symbol: &ScalarSymbol<'_>, g: &TimeSeries, scheme: &CQScheme) -> Result<TimeSeries> {
    operator_cq_solve(
        |l, s, gh| {
            let k = symbol.eval(s);
            if !k.re.is_finite() || !k.im.is_finite() {
                return Err(Error::SymbolEvaluation { index: l, s });
            }
            Ok(gh.iter().map(|v| v * k).collect())
        },
        g,
        scheme,
    )
}

/// Solves Σ_j Ω_j x_{n−j} = g_n step by step with one factorization of Ω_0.
pub fn marching_cq_solve(weights: &[Mat<Complex64>], rhs: &TimeSeries) -> Result<TimeSeries> {
    rhs.check_uniform()?;
    let n = rhs.len();
    let d = rhs.dim();
    if weights.len() < n || weights.iter().any(|w| w.nrows() != d || w.ncols() != d) {
        return Err(Error::DimensionMismatch("weights do not match the series".into()));
    }
    let lu = weights[0].partial_piv_lu();
    let u = lu.U();
    if (0..d).any(|i| u[(i, i)].norm() == 0.0 || !u[(i, i)].norm().is_finite()) {
        return Err(Error::Precondition("leading convolution weight is singular".into()));
    }
    let mut out = TimeSeries::zeros(rhs.tau, n, d);
    for i in 0..n {
        let mut r = Mat::from_fn(d, 1, |k, _| rhs.values[i][k]);
        for j in 1..=i {
            let x = &out.values[i - j];
            let w = &weights[j];
            for c in 0..d {
                let xc = x[c];
                if xc == czero() {
                    continue;
                }
                for k in 0..d {
                    r[(k, 0)] -= w[(k, c)] * xc;
                }
            }
        }
        let x = lu.solve(&r);
        for k in 0..d {
            out.values[i][k] = x[(k, 0)];
        }
    }
    Ok(out)
}
