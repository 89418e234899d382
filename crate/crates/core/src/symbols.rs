//! Laplace-domain transfer operators F(s) of the generalized impedance
//! boundary conditions and their Galerkin matrices on Ψ_h.
//!
//! Every supported F(s) is a combination of three fixed surface matrices,
//!
//! ```text
//! F_h(s) = a(s) M + b(s) S_LB + c(s) M_H,
//! ```
//!
//! with M the P1 mass matrix, S_LB the Laplace–Beltrami stiffness matrix and
//! M_H the curvature-weighted mass matrix, so time-domain convolutions with
//! F reduce to scalar convolutions with the coefficient functions.

use crate::error::{Error, Result};
use crate::spaces::BoundarySpaces;
use faer::Mat;
use num_complex::Complex64;
use std::fmt;

/// A Laplace frequency with positive real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexFrequency(Complex64);

impl ComplexFrequency {
    pub fn new(s: Complex64) -> Result<Self> {
        if s.re > 0.0 && s.re.is_finite() && s.im.is_finite() {
            Ok(Self(s))
        } else {
            Err(Error::NotInRightHalfPlane(s))
        }
    }

    pub fn real(re: f64) -> Result<Self> {
        Self::new(Complex64::new(re, 0.0))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

impl fmt::Display for ComplexFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Principal square root; the result has positive real part.
pub fn principal_sqrt(s: Complex64) -> Result<Complex64> {
    let s = ComplexFrequency::new(s)?;
    Ok(s.value().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    /// Thin coating of width ε: F(s) = ε (s − s⁻¹ Δ_Γ).
    ThinCoatingA,
    /// First-order absorbing condition: F(s) = ε⁻¹ s^{-1/2}.
    AbsorbingB1,
    /// Second-order absorbing condition: F(s) = ε⁻¹ s^{-1/2} − H s⁻¹.
    AbsorbingB2,
    /// Acoustic (locally reacting spring–mass–damper) boundary:
    /// F(s) = (m s + α + k s⁻¹)⁻¹.
    AcousticC,
    /// F ≡ 0, the sound-hard condition ∂_n u = 0.
    SoundHard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureMode {
    Analytic,
    DiscreteEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferSymbolSpec {
    pub kind: TransferKind,
    pub eps: f64,
    pub m: f64,
    pub alpha: f64,
    pub k: f64,
    pub curvature_mode: CurvatureMode,
}

/// Scalar coefficients of F_h(s) in the mass / stiffness / curvature basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferCoefficients {
    pub mass: Complex64,
    pub stiffness: Complex64,
    pub curvature: Complex64,
}

impl TransferCoefficients {
    pub const ZERO: Self = Self {
        mass: Complex64::new(0.0, 0.0),
        stiffness: Complex64::new(0.0, 0.0),
        curvature: Complex64::new(0.0, 0.0),
    };

    /// Eigenvalue on constant functions of a surface with constant mean
    /// curvature `h` (the stiffness part annihilates constants).
    pub fn on_constants(&self, h: f64) -> Complex64 {
        self.mass + self.curvature * h
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self {
            mass: self.mass * k,
            stiffness: self.stiffness * k,
            curvature: self.curvature * k,
        }
    }
}

impl TransferSymbolSpec {
    pub fn thin_coating(eps: f64) -> Self {
        Self::with_kind(TransferKind::ThinCoatingA, eps)
    }

    pub fn absorbing_first_order(eps: f64) -> Self {
        Self::with_kind(TransferKind::AbsorbingB1, eps)
    }

    pub fn absorbing_second_order(eps: f64, curvature_mode: CurvatureMode) -> Self {
        Self {
            curvature_mode,
            ..Self::with_kind(TransferKind::AbsorbingB2, eps)
        }
    }

    pub fn acoustic(m: f64, alpha: f64, k: f64) -> Self {
        Self {
            m,
            alpha,
            k,
            ..Self::with_kind(TransferKind::AcousticC, 1.0)
        }
    }

    pub fn sound_hard() -> Self {
        Self::with_kind(TransferKind::SoundHard, 1.0)
    }

    fn with_kind(kind: TransferKind, eps: f64) -> Self {
        Self {
            kind,
            eps,
            m: 1.0,
            alpha: 1.0,
            k: 1.0,
            curvature_mode: CurvatureMode::Analytic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            TransferKind::ThinCoatingA | TransferKind::AbsorbingB1 | TransferKind::AbsorbingB2 => {
                if !(self.eps > 0.0 && self.eps <= 1.0) {
                    return Err(Error::InvalidTransferSpec(format!("eps = {} not in (0, 1]", self.eps)));
                }
            }
            TransferKind::AcousticC => {
                if !(self.m > 0.0 && self.k > 0.0 && self.alpha >= 0.0) {
                    return Err(Error::InvalidTransferSpec(format!(
                        "need m > 0, k > 0, alpha >= 0; got m = {}, alpha = {}, k = {}",
                        self.m, self.alpha, self.k
                    )));
                }
            }
            TransferKind::SoundHard => {}
        }
        Ok(())
    }

    /// Abscissa above which F(s) is of positive type. Nonzero only for the
    /// second-order absorbing condition, where positivity needs
    /// Re s ≥ 4 ε² H_max².
    pub fn sigma0(&self, h_max: f64) -> f64 {
        match self.kind {
            TransferKind::AbsorbingB2 => (4.0 * self.eps * self.eps * h_max * h_max).max(0.0),
            _ => 0.0,
        }
    }

    /// Coefficients of F_h(s).
    pub fn coefficients(&self, s: Complex64) -> TransferCoefficients {
        let zero = Complex64::new(0.0, 0.0);
        match self.kind {
            TransferKind::ThinCoatingA => TransferCoefficients {
                mass: s * self.eps,
                stiffness: s.inv() * self.eps,
                curvature: zero,
            },
            TransferKind::AbsorbingB1 => TransferCoefficients {
                mass: s.sqrt().inv() / self.eps,
                stiffness: zero,
                curvature: zero,
            },
            TransferKind::AbsorbingB2 => TransferCoefficients {
                mass: s.sqrt().inv() / self.eps,
                stiffness: zero,
                curvature: -s.inv(),
            },
            TransferKind::AcousticC => TransferCoefficients {
                mass: (s * self.m + self.alpha + s.inv() * self.k).inv(),
                stiffness: zero,
                curvature: zero,
            },
            TransferKind::SoundHard => TransferCoefficients::ZERO,
        }
    }

    pub fn uses_curvature(&self) -> bool {
        self.kind == TransferKind::AbsorbingB2
    }

    /// The curvature-weighted mass matrix selected by `curvature_mode`.
    pub fn curvature_matrix<'a>(&self, spaces: &'a BoundarySpaces) -> Result<&'a Mat<f64>> {
        match self.curvature_mode {
            CurvatureMode::DiscreteEstimate => Ok(&spaces.curvature_mass_estimate),
            CurvatureMode::Analytic => spaces.curvature_mass_analytic.as_ref().ok_or_else(|| {
                Error::TransferConfig(
                    "analytic curvature requested but the mesh carries no analytic curvature; \
                     use the discrete estimate"
                        .into(),
                )
            }),
        }
    }

    /// Largest mean curvature seen by this symbol on the given spaces.
    pub fn max_curvature(&self, spaces: &BoundarySpaces, analytic: Option<&[f64]>) -> Result<f64> {
        let h = match self.curvature_mode {
            CurvatureMode::Analytic => analytic.ok_or_else(|| {
                Error::TransferConfig("analytic curvature requested but the mesh carries none".into())
            })?,
            CurvatureMode::DiscreteEstimate => &spaces.curvature_estimate,
        };
        Ok(h.iter().cloned().fold(0.0, f64::max))
    }
}

/// Dense Galerkin matrix ⟨η_i, F(s) η_j⟩ on Ψ_h.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub matrix: Mat<Complex64>,
}

/// Evaluates F_h(s) on the given spaces.
pub fn transfer_matrix(
    spec: &TransferSymbolSpec,
    s: ComplexFrequency,
    spaces: &BoundarySpaces,
) -> Result<TransferMatrix> {
    spec.validate()?;
    let c = spec.coefficients(s.value());
    let n = spaces.psi_dim;
    let curvature = if spec.uses_curvature() {
        Some(spec.curvature_matrix(spaces)?)
    } else {
        None
    };
    let matrix = Mat::from_fn(n, n, |i, j| {
        let mut v = c.mass * spaces.mass_p1[(i, j)] + c.stiffness * spaces.stiffness_lb[(i, j)];
        if let Some(mh) = curvature {
            v += c.curvature * mh[(i, j)];
        }
        v
    });
    Ok(TransferMatrix { matrix })
}
