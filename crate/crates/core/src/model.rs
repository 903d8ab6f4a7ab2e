//! Parameter and state types of the two-resonator model and the linear
//! operators derived from its coupled-mode equations.
//!
//! Conventions:
//! - time is measured in resonator round trips;
//! - `a`, `b` are baseband envelopes relative to the half-harmonic carrier;
//! - the field basis is `(a, a*, b, b*)`, the quadrature basis is
//!   `(X₁, Y₁, X₂, Y₂)` with `X = a + a*`, `Y = (a − a*)/i`;
//! - the sideband-frame matrix `M` satisfies `L = −i M` where `L` is the
//!   field-basis generator, so eigenvalues `ν = λ_R + i λ_I` of `M` map to
//!   growth exponents `−i ν = λ_I − i λ_R` of `L`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CMatrix4, RMatrix4, C64, I, ZERO};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("state component is not finite")]
    NonFiniteState,
    #[error("constructor assumes identical resonators but gamma1 = {gamma1} != gamma2 = {gamma2}; use the field-basis generator")]
    AsymmetricLoss { gamma1: f64, gamma2: f64 },
    #[error("drive schedule `{0}` is invalid: {1}")]
    InvalidDrive(&'static str, &'static str),
}

/// Static constants of the coupled-mode equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Parametric gain of the first resonator.
    pub g: f64,
    /// Parametric gain of the second resonator.
    pub f: f64,
    /// Relative phase of the second pump (radians).
    pub phi: f64,
    pub gs1: f64,
    pub gs2: f64,
    pub kappa: f64,
    /// Escape efficiency: out-coupling share of the total loss.
    pub rho: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            gamma1: 0.25,
            gamma2: 0.25,
            delta1: 0.0,
            delta2: 0.0,
            g: 0.0,
            f: 0.0,
            phi: 0.0,
            gs1: 0.0,
            gs2: 0.0,
            kappa: 1.0,
            rho: 1.0,
        }
    }
}

impl SystemParams {
    /// Identical resonators with loss `gamma`, coupling `kappa`, gains `g`, `f`,
    /// no detuning, no saturation.
    pub fn symmetric(gamma: f64, kappa: f64, g: f64, f: f64, phi: f64) -> Self {
        SystemParams {
            gamma1: gamma,
            gamma2: gamma,
            g,
            f,
            phi,
            kappa,
            ..Default::default()
        }
    }

    pub fn with_saturation(mut self, gs: f64) -> Self {
        self.gs1 = gs;
        self.gs2 = gs;
        self
    }

    pub fn with_detuning(mut self, delta1: f64, delta2: f64) -> Self {
        self.delta1 = delta1;
        self.delta2 = delta2;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma1 = gamma;
        self.gamma2 = gamma;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("gamma1", self.gamma1, true),
            ("gamma2", self.gamma2, true),
            ("delta1", self.delta1, false),
            ("delta2", self.delta2, false),
            ("g", self.g, true),
            ("f", self.f, true),
            ("phi", self.phi, false),
            ("gs1", self.gs1, true),
            ("gs2", self.gs2, true),
            ("kappa", self.kappa, true),
            ("rho", self.rho, true),
        ];
        for (name, value, nonneg) in fields {
            if !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
            if nonneg && value < 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be non-negative",
                });
            }
        }
        if self.rho > 1.0 {
            return Err(ModelError::InvalidParameter {
                name: "rho",
                value: self.rho,
                reason: "must lie in [0, 1]",
            });
        }
        Ok(())
    }

    /// Common loss rate, or an error if the resonators differ.
    pub fn symmetric_gamma(&self) -> Result<f64, ModelError> {
        if self.gamma1 != self.gamma2 {
            return Err(ModelError::AsymmetricLoss {
                gamma1: self.gamma1,
                gamma2: self.gamma2,
            });
        }
        Ok(self.gamma1)
    }

    /// Parameters with the drive's instantaneous `(g, f, Δ₁)` substituted.
    pub fn at(&self, drive: &DriveSchedule, t: f64) -> SystemParams {
        let v = eval_drive(drive, self, t);
        SystemParams {
            g: v.g,
            f: v.f,
            delta1: v.delta1,
            ..*self
        }
    }
}

/// Complex envelopes of the two resonators.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldState {
    pub a: C64,
    pub b: C64,
}

impl FieldState {
    pub fn new(a: C64, b: C64) -> Self {
        FieldState { a, b }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.a.re.is_finite() && self.a.im.is_finite() && self.b.re.is_finite() && self.b.im.is_finite()
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a.re, self.a.im, self.b.re, self.b.im]
    }

    pub fn from_array(y: &[f64; 4]) -> Self {
        FieldState {
            a: C64::new(y[0], y[1]),
            b: C64::new(y[2], y[3]),
        }
    }

    pub fn intensity_a(&self) -> f64 {
        self.a.norm_sqr()
    }

    pub fn intensity_b(&self) -> f64 {
        self.b.norm_sqr()
    }

    /// Field-basis vector `(a, a*, b, b*)`.
    pub fn field_vector(&self) -> [C64; 4] {
        [self.a, self.a.conj(), self.b, self.b.conj()]
    }

    /// Quadratures `(X₁, Y₁, X₂, Y₂)`.
    pub fn quadratures(&self) -> [f64; 4] {
        [2.0 * self.a.re, 2.0 * self.a.im, 2.0 * self.b.re, 2.0 * self.b.im]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopDirection {
    /// Counter-clockwise in the (g, Δ₁) plane.
    Ccw,
    /// Clockwise.
    Cw,
}

impl LoopDirection {
    pub fn sign(self) -> f64 {
        match self {
            LoopDirection::Ccw => 1.0,
            LoopDirection::Cw => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LoopDirection::Ccw => "ccw",
            LoopDirection::Cw => "cw",
        }
    }
}

/// Time dependence of the pumps and the first detuning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveSchedule {
    /// Static parameters.
    #[default]
    Constant,
    /// `g(t) = g0 + depth·sin(ωt)`. With `f_follows_g` the second pump carries
    /// the same modulation; otherwise `f` keeps its static value.
    AmplitudeModulated {
        g0: f64,
        depth: f64,
        omega: f64,
        #[serde(default)]
        f_follows_g: bool,
    },
    /// `f = g = g0 + r cos(σωt)`, `Δ₁ = r sin(σωt)`, σ = ±1 for CCW/CW.
    EncirclementLoop {
        g0: f64,
        radius: f64,
        omega: f64,
        direction: LoopDirection,
    },
}

impl DriveSchedule {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            DriveSchedule::Constant => Ok(()),
            DriveSchedule::AmplitudeModulated { g0, depth, omega, .. } => {
                if !(omega > 0.0 && omega.is_finite()) {
                    return Err(ModelError::InvalidDrive("amplitude_modulated", "omega must be positive"));
                }
                if !(depth >= 0.0 && depth.is_finite() && g0.is_finite()) {
                    return Err(ModelError::InvalidDrive("amplitude_modulated", "depth must be non-negative"));
                }
                Ok(())
            }
            DriveSchedule::EncirclementLoop { g0, radius, omega, .. } => {
                if !(omega > 0.0 && omega.is_finite()) {
                    return Err(ModelError::InvalidDrive("encirclement_loop", "omega must be positive"));
                }
                if !(radius >= 0.0 && radius.is_finite() && g0.is_finite()) {
                    return Err(ModelError::InvalidDrive("encirclement_loop", "radius must be non-negative"));
                }
                Ok(())
            }
        }
    }

    /// Modulation period, `None` for a constant drive.
    pub fn period(&self) -> Option<f64> {
        match *self {
            DriveSchedule::Constant => None,
            DriveSchedule::AmplitudeModulated { omega, .. } | DriveSchedule::EncirclementLoop { omega, .. } => {
                Some(2.0 * PI / omega)
            }
        }
    }
}

/// Instantaneous drive values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveValues {
    pub g: f64,
    pub f: f64,
    pub delta1: f64,
}

pub fn eval_drive(d: &DriveSchedule, p: &SystemParams, t: f64) -> DriveValues {
    match *d {
        DriveSchedule::Constant => DriveValues {
            g: p.g,
            f: p.f,
            delta1: p.delta1,
        },
        DriveSchedule::AmplitudeModulated {
            g0,
            depth,
            omega,
            f_follows_g,
        } => {
            let g = g0 + depth * (omega * t).sin();
            DriveValues {
                g,
                f: if f_follows_g { g } else { p.f },
                delta1: p.delta1,
            }
        }
        DriveSchedule::EncirclementLoop {
            g0,
            radius,
            omega,
            direction,
        } => {
            let theta = direction.sign() * omega * t;
            let g = g0 + radius * theta.cos();
            DriveValues {
                g,
                f: g,
                delta1: radius * theta.sin(),
            }
        }
    }
}

/// Right-hand side of the nonlinear coupled-mode equations.
pub fn coupled_rhs(p: &SystemParams, s: &FieldState, t: f64, d: &DriveSchedule) -> Result<FieldState, ModelError> {
    if !s.is_finite() {
        return Err(ModelError::NonFiniteState);
    }
    Ok(rhs_at(&p.at(d, t), s))
}

/// Coupled-mode right-hand side for already-instantaneous parameters.
pub(crate) fn rhs_at(p: &SystemParams, s: &FieldState) -> FieldState {
    let (a, b) = (s.a, s.b);
    let pump2 = C64::from_polar(p.f, p.phi);
    let da = a * C64::new(-p.gamma1, p.delta1) + p.g * a.conj() - p.gs1 * a.norm_sqr() * a + I * p.kappa * b;
    let db = b * C64::new(-p.gamma2, p.delta2) + pump2 * b.conj() - p.gs2 * b.norm_sqr() * b + I * p.kappa * a;
    FieldState { a: da, b: db }
}

/// Linearization around the origin in the field basis `(a, a*, b, b*)`.
///
/// Accepts asymmetric resonators and detunings; `+iΔ` sits on the direct
/// rows and `−iΔ` on the conjugate rows.
pub fn matrix_field_basis(p: &SystemParams) -> Result<CMatrix4, ModelError> {
    p.validate()?;
    Ok(field_basis_unchecked(p))
}

pub(crate) fn field_basis_unchecked(p: &SystemParams) -> CMatrix4 {
    let g = C64::new(p.g, 0.0);
    let pump2 = C64::from_polar(p.f, p.phi);
    let ik = I * p.kappa;
    CMatrix4([
        [C64::new(-p.gamma1, p.delta1), g, ik, ZERO],
        [g, C64::new(-p.gamma1, -p.delta1), ZERO, -ik],
        [ik, ZERO, C64::new(-p.gamma2, p.delta2), pump2],
        [ZERO, -ik, pump2.conj(), C64::new(-p.gamma2, -p.delta2)],
    ])
}

/// The sideband eigenproblem matrix acting on `(A, B*, C, D*)`.
///
/// Requires identical losses. With `Δ₁ = Δ₂ = 0` this is exactly the printed
/// form; nonzero detunings enter as `i·L`, i.e. `∓Δ` on the diagonal.
pub fn matrix_nondegenerate(p: &SystemParams) -> Result<CMatrix4, ModelError> {
    p.validate()?;
    let gamma = p.symmetric_gamma()?;
    let ig = I * p.g;
    let k = C64::new(p.kappa, 0.0);
    let ife = I * C64::from_polar(p.f, p.phi);
    let ife_conj = I * C64::from_polar(p.f, -p.phi);
    Ok(CMatrix4([
        [C64::new(-p.delta1, -gamma), ig, -k, ZERO],
        [ig, C64::new(p.delta1, -gamma), ZERO, k],
        [-k, ZERO, C64::new(-p.delta2, -gamma), ife],
        [ZERO, k, ife_conj, C64::new(p.delta2, -gamma)],
    ]))
}

/// Real generator of `d/dt (X₁, Y₁, X₂, Y₂)` for identical losses.
///
/// Detunings contribute the rotation `dX/dt ∋ −ΔY`, `dY/dt ∋ +ΔX`.
pub fn matrix_quadrature(p: &SystemParams) -> Result<RMatrix4, ModelError> {
    p.validate()?;
    let gamma = p.symmetric_gamma()?;
    Ok(quadrature_unchecked(p, gamma))
}

pub(crate) fn quadrature_unchecked(p: &SystemParams, gamma: f64) -> RMatrix4 {
    let (g, f, k) = (p.g, p.f, p.kappa);
    let (s, c) = p.phi.sin_cos();
    RMatrix4([
        [-gamma + g, -p.delta1, 0.0, -k],
        [p.delta1, -gamma - g, k, 0.0],
        [0.0, -k, -gamma + f * c, f * s - p.delta2],
        [k, 0.0, f * s + p.delta2, -gamma - f * c],
    ])
}

/// Parameter that a one-dimensional sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    G,
    F,
    /// Sets `g = x` and `f = ratio·x`.
    GainPair { ratio: f64 },
    Phi,
    Kappa,
    /// Both losses.
    Gamma,
    Delta1,
    Delta2,
    /// Both saturation coefficients.
    Gs,
    Rho,
}

impl SweepVariable {
    pub const TIED_GAIN: SweepVariable = SweepVariable::GainPair { ratio: 1.0 };

    pub fn apply(&self, base: &SystemParams, x: f64) -> SystemParams {
        let mut p = *base;
        match *self {
            SweepVariable::G => p.g = x,
            SweepVariable::F => p.f = x,
            SweepVariable::GainPair { ratio } => {
                p.g = x;
                p.f = ratio * x;
            }
            SweepVariable::Phi => p.phi = x,
            SweepVariable::Kappa => p.kappa = x,
            SweepVariable::Gamma => {
                p.gamma1 = x;
                p.gamma2 = x;
            }
            SweepVariable::Delta1 => p.delta1 = x,
            SweepVariable::Delta2 => p.delta2 = x,
            SweepVariable::Gs => {
                p.gs1 = x;
                p.gs2 = x;
            }
            SweepVariable::Rho => p.rho = x,
        }
        p
    }

    pub fn label(&self) -> String {
        match *self {
            SweepVariable::G => "g".into(),
            SweepVariable::F => "f".into(),
            SweepVariable::GainPair { ratio } if ratio == 1.0 => "g=f".into(),
            SweepVariable::GainPair { ratio } => format!("f={ratio}g"),
            SweepVariable::Phi => "phi".into(),
            SweepVariable::Kappa => "kappa".into(),
            SweepVariable::Gamma => "gamma".into(),
            SweepVariable::Delta1 => "delta1".into(),
            SweepVariable::Delta2 => "delta2".into(),
            SweepVariable::Gs => "gs".into(),
            SweepVariable::Rho => "rho".into(),
        }
    }

    /// Parses the labels produced by [`SweepVariable::label`] plus `f=<m>g`.
    pub fn parse(s: &str) -> Option<SweepVariable> {
        Some(match s {
            "g" => SweepVariable::G,
            "f" => SweepVariable::F,
            "g=f" | "f=g" | "tied" => SweepVariable::TIED_GAIN,
            "phi" => SweepVariable::Phi,
            "kappa" => SweepVariable::Kappa,
            "gamma" => SweepVariable::Gamma,
            "delta1" => SweepVariable::Delta1,
            "delta2" => SweepVariable::Delta2,
            "gs" => SweepVariable::Gs,
            "rho" => SweepVariable::Rho,
            other => {
                let ratio = other.strip_prefix("f=")?.strip_suffix('g')?.parse().ok()?;
                SweepVariable::GainPair { ratio }
            }
        })
    }
}

/// `n` evenly spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DIM;

    fn rnd_params(seed: u64) -> SystemParams {
        // small deterministic LCG so the test has no RNG dependency
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        SystemParams {
            gamma1: next(),
            gamma2: next(),
            delta1: next() - 0.5,
            delta2: next() - 0.5,
            g: 2.0 * next(),
            f: 2.0 * next(),
            phi: 6.0 * next(),
            gs1: next(),
            gs2: next(),
            kappa: 2.0 * next(),
            rho: next(),
        }
    }

    #[test]
    fn origin_is_fixed_point() {
        let p = rnd_params(3);
        let d = coupled_rhs(&p, &FieldState::zero(), 0.0, &DriveSchedule::Constant).unwrap();
        assert_eq!(d, FieldState::zero());
    }

    #[test]
    fn phase_sensitive_amplification_on_real_axis() {
        let p = SystemParams {
            gamma1: 0.25,
            g: 0.5,
            kappa: 0.0,
            ..Default::default()
        };
        let d = coupled_rhs(&p, &FieldState::new(C64::new(1.0, 0.0), ZERO), 0.0, &DriveSchedule::Constant).unwrap();
        assert!((d.a - C64::new(0.25, 0.0)).norm() < 1e-15);
        assert_eq!(d.b, ZERO);
    }

    #[test]
    fn single_opo_fixed_point() {
        // −γ + g − g_s a² = 0 ⇒ a² = (g − γ)/g_s
        let p = SystemParams {
            gamma1: 0.25,
            g: 1.5,
            gs1: 0.3,
            kappa: 0.0,
            ..Default::default()
        };
        let a2: f64 = 25.0 / 6.0;
        let s = FieldState::new(C64::new(a2.sqrt(), 0.0), ZERO);
        let d = coupled_rhs(&p, &s, 0.0, &DriveSchedule::Constant).unwrap();
        assert!(d.a.norm() < 1e-14, "{:?}", d.a);
    }

    #[test]
    fn non_finite_state_rejected() {
        let p = SystemParams::default();
        let s = FieldState::new(C64::new(f64::NAN, 0.0), ZERO);
        assert_eq!(
            coupled_rhs(&p, &s, 0.0, &DriveSchedule::Constant),
            Err(ModelError::NonFiniteState)
        );
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut p = SystemParams::default();
        p.rho = 1.5;
        assert!(p.validate().is_err());
        p.rho = 0.5;
        p.kappa = -1.0;
        assert!(p.validate().is_err());
        p.kappa = f64::INFINITY;
        assert!(p.validate().is_err());
    }

    #[test]
    fn printed_matrix_without_detuning() {
        let p = SystemParams::symmetric(0.25, 1.0, 0.7, 0.4, 0.3);
        let m = matrix_nondegenerate(&p).unwrap();
        let e = C64::from_polar(1.0, 0.3);
        assert_eq!(m[(0, 0)], C64::new(0.0, -0.25));
        assert_eq!(m[(0, 1)], C64::new(0.0, 0.7));
        assert_eq!(m[(0, 2)], C64::new(-1.0, 0.0));
        assert_eq!(m[(1, 3)], C64::new(1.0, 0.0));
        assert!((m[(2, 3)] - I * 0.4 * e).norm() < 1e-16);
        assert!((m[(3, 2)] - I * 0.4 * e.conj()).norm() < 1e-16);
    }

    #[test]
    fn printed_matrix_is_i_times_field_generator() {
        for seed in 0..50 {
            let mut p = rnd_params(seed);
            p.gamma2 = p.gamma1;
            let m = matrix_nondegenerate(&p).unwrap();
            let l = matrix_field_basis(&p).unwrap();
            assert!((m - l.scale(I)).frobenius_norm() < 1e-14);
        }
    }

    #[test]
    fn asymmetric_loss_rejected() {
        let mut p = SystemParams::default();
        p.gamma2 = 0.3;
        assert!(matches!(matrix_nondegenerate(&p), Err(ModelError::AsymmetricLoss { .. })));
        assert!(matches!(matrix_quadrature(&p), Err(ModelError::AsymmetricLoss { .. })));
        assert!(matrix_field_basis(&p).is_ok());
    }

    /// T maps (a, a*, b, b*) to (X₁, Y₁, X₂, Y₂).
    fn field_to_quadrature() -> CMatrix4 {
        let mut t = CMatrix4::zeros();
        for k in 0..2 {
            t[(2 * k, 2 * k)] = C64::new(1.0, 0.0);
            t[(2 * k, 2 * k + 1)] = C64::new(1.0, 0.0);
            t[(2 * k + 1, 2 * k)] = -I;
            t[(2 * k + 1, 2 * k + 1)] = I;
        }
        t
    }

    #[test]
    fn quadrature_generator_is_similar_to_field_generator() {
        let t = field_to_quadrature();
        let t_inv = t.inverse().unwrap();
        for seed in 0..50 {
            let mut p = rnd_params(seed);
            p.gamma2 = p.gamma1;
            let l = matrix_field_basis(&p).unwrap();
            let q = matrix_quadrature(&p).unwrap().to_complex();
            let err = (t * l * t_inv - q).frobenius_norm();
            assert!(err < 1e-13, "seed {seed}: {err}");
        }
    }

    #[test]
    fn field_generator_is_jacobian_of_rhs() {
        // finite-difference Jacobian of the real 4-vector RHS at the origin,
        // compared against L expressed in real coordinates
        let mut p = rnd_params(11);
        p.gs1 = 0.0;
        p.gs2 = 0.0;
        let l = matrix_field_basis(&p).unwrap();
        let h = 1e-6;
        for j in 0..4 {
            let mut y = [0.0; 4];
            y[j] = h;
            let plus = rhs_at(&p, &FieldState::from_array(&y));
            y[j] = -h;
            let minus = rhs_at(&p, &FieldState::from_array(&y));
            let col = [
                (plus.a - minus.a) / (2.0 * h),
                (plus.b - minus.b) / (2.0 * h),
            ];
            // perturbation direction in the field basis
            let mut v = [ZERO; DIM];
            let dir = match j {
                0 => FieldState::new(C64::new(1.0, 0.0), ZERO),
                1 => FieldState::new(C64::new(0.0, 1.0), ZERO),
                2 => FieldState::new(ZERO, C64::new(1.0, 0.0)),
                _ => FieldState::new(ZERO, C64::new(0.0, 1.0)),
            };
            v.copy_from_slice(&dir.field_vector());
            let lv = l.mul_vec(&v);
            assert!((lv[0] - col[0]).norm() < 1e-9);
            assert!((lv[2] - col[1]).norm() < 1e-9);
        }
    }

    #[test]
    fn amplitude_modulation_starts_at_g0() {
        let d = DriveSchedule::AmplitudeModulated {
            g0: 1.0,
            depth: 5.0,
            omega: 10.0,
            f_follows_g: false,
        };
        let p = SystemParams::symmetric(0.25, 1.0, 0.0, 0.3, 0.0);
        let v = eval_drive(&d, &p, 0.0);
        assert_eq!(v.g, 1.0);
        assert_eq!(v.f, 0.3);
    }

    #[test]
    fn encirclement_quarter_period() {
        let omega = 2.0 * PI / 3000.0;
        let p = SystemParams::default();
        for (direction, sign) in [(LoopDirection::Ccw, 1.0), (LoopDirection::Cw, -1.0)] {
            let d = DriveSchedule::EncirclementLoop {
                g0: 1.0,
                radius: 0.2,
                omega,
                direction,
            };
            let v = eval_drive(&d, &p, 750.0);
            assert!((v.g - 1.0).abs() < 1e-12);
            assert!((v.f - 1.0).abs() < 1e-12);
            assert!((v.delta1 - sign * 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn drive_validation() {
        let bad = DriveSchedule::AmplitudeModulated {
            g0: 1.0,
            depth: 1.0,
            omega: 0.0,
            f_follows_g: true,
        };
        assert!(bad.validate().is_err());
        let bad = DriveSchedule::EncirclementLoop {
            g0: 1.0,
            radius: -0.1,
            omega: 1.0,
            direction: LoopDirection::Cw,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sweep_variable_labels_roundtrip() {
        for v in [
            SweepVariable::G,
            SweepVariable::F,
            SweepVariable::TIED_GAIN,
            SweepVariable::GainPair { ratio: 2.0 },
            SweepVariable::Phi,
            SweepVariable::Delta1,
            SweepVariable::Gamma,
        ] {
            assert_eq!(SweepVariable::parse(&v.label()), Some(v), "{}", v.label());
        }
        assert_eq!(SweepVariable::parse("f=2g"), Some(SweepVariable::GainPair { ratio: 2.0 }));
        assert_eq!(SweepVariable::parse("nope"), None);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 2.0, 5);
        assert_eq!(v, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(linspace(1.0, 3.0, 1), vec![1.0]);
    }
}
