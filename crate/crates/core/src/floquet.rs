//! Floquet analysis of amplitude-modulated pumps and transport of a state
//! around a closed loop in the `(g, Δ₁)` plane.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{inner, vec_norm, CMatrix4, CVector4, RMatrix4, C64, DIM, I, ZERO};
use crate::model::{field_basis_unchecked, quadrature_unchecked, DriveSchedule, LoopDirection, ModelError, SystemParams};
use crate::ode::{self, OdeError, Options};
use crate::spectral::{self, eig_dense, SpectralError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FloquetError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("instantaneous eigenbasis is degenerate at the start point (condition {0:.3e})")]
    DegenerateStart(f64),
    #[error("mode index {index} out of range ({available} modes)")]
    NoSuchMode { index: usize, available: usize },
    #[error("invalid input: {0}")]
    Invalid(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonodromyOptions {
    /// Start of the integrated period.
    pub t0: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        MonodromyOptions {
            t0: 0.0,
            rel_tol: 1e-12,
            abs_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonodromyResult {
    /// State-transition matrix over one period in the quadrature basis.
    pub phi: RMatrix4,
    pub period: f64,
    /// Sorted by descending real part; `Im μ ∈ (−ω/2, ω/2]`.
    pub exponents: [C64; DIM],
    /// `|det Φ / exp(∫ tr Q) − 1|`.
    pub liouville_residual: f64,
}

impl MonodromyResult {
    /// Spread of the real parts of the exponents.
    pub fn re_splitting(&self) -> f64 {
        self.exponents[0].re - self.exponents[DIM - 1].re
    }

    pub fn max_re(&self) -> f64 {
        self.exponents[0].re
    }
}

fn quadrature_generator(p: &SystemParams, d: &DriveSchedule, gamma: f64) -> impl Fn(f64) -> RMatrix4 {
    let (p, d) = (*p, *d);
    move |t| quadrature_unchecked(&p.at(&d, t), gamma)
}

/// Transition matrix of `v' = Q(t) v` over `[t0, t1]`.
pub fn transition_matrix(p: &SystemParams, d: &DriveSchedule, t0: f64, t1: f64, o: &MonodromyOptions) -> Result<RMatrix4, FloquetError> {
    p.validate()?;
    d.validate()?;
    let gamma = p.symmetric_gamma()?;
    let q = quadrature_generator(p, d, gamma);
    let rhs = |t: f64, y: &[f64; 16]| {
        let qt = q(t);
        let mut out = [0.0; 16];
        for r in 0..DIM {
            for c in 0..DIM {
                out[r * DIM + c] = (0..DIM).map(|k| qt[(r, k)] * y[k * DIM + c]).sum();
            }
        }
        out
    };
    let mut y0 = [0.0; 16];
    for k in 0..DIM {
        y0[k * DIM + k] = 1.0;
    }
    let (y, _) = ode::integrate_to(rhs, t0, y0, t1, &Options::tolerances(o.rel_tol, o.abs_tol))?;
    let mut phi = RMatrix4::zeros();
    for r in 0..DIM {
        for c in 0..DIM {
            phi[(r, c)] = y[r * DIM + c];
        }
    }
    Ok(phi)
}

fn sort_exponents(v: &mut [C64; DIM]) {
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
}

/// Monodromy of the linearized quadrature system under an amplitude-modulated drive.
pub fn monodromy(p: &SystemParams, d: &DriveSchedule, o: &MonodromyOptions) -> Result<MonodromyResult, FloquetError> {
    if !matches!(d, DriveSchedule::AmplitudeModulated { .. }) {
        return Err(FloquetError::Invalid("monodromy needs an amplitude-modulated drive"));
    }
    let period = d.period().expect("periodic drive");
    let phi = transition_matrix(p, d, o.t0, o.t0 + period, o)?;
    let multipliers = spectral::eigenvalues(&phi.to_complex())?;
    let mut exponents = multipliers.map(|z| z.ln() / period);
    for z in exponents.iter_mut() {
        // principal log gives Im ∈ (−π/T, π/T]; pin the upper edge
        if z.im <= -PI / period {
            z.im += 2.0 * PI / period;
        }
    }
    sort_exponents(&mut exponents);
    let gamma = p.symmetric_gamma()?;
    let trace = quadrature_unchecked(p, gamma).trace();
    let liouville_residual = (phi.determinant() / (trace * period).exp() - 1.0).abs();
    Ok(MonodromyResult {
        phi,
        period,
        exponents,
        liouville_residual,
    })
}

/// Real-part splitting above which the modulated pairs count as separated.
pub const FEP_SPLIT: f64 = 1e-5;

fn modulated(g0: f64, depth: f64, omega: f64) -> DriveSchedule {
    DriveSchedule::AmplitudeModulated {
        g0,
        depth,
        omega,
        f_follows_g: true,
    }
}

/// Exponents for `f = g = g0 + F sin ωt`.
pub fn modulated_exponents(p: &SystemParams, g0: f64, depth: f64, omega: f64) -> Result<MonodromyResult, FloquetError> {
    let base = SystemParams { g: g0, f: g0, ..*p };
    monodromy(&base, &modulated(g0, depth, omega), &MonodromyOptions::default())
}

/// First `g0` in `range` where the real parts of the exponents separate:
/// grid scan of `n` points, then bisection.
pub fn find_fep(p: &SystemParams, depth: f64, omega: f64, range: (f64, f64), n: usize) -> Result<Option<f64>, FloquetError> {
    if n < 2 || !(range.0 < range.1) {
        return Err(FloquetError::Invalid("need n >= 2 and lo < hi"));
    }
    let split = |g0: f64| -> Result<bool, FloquetError> { Ok(modulated_exponents(p, g0, depth, omega)?.re_splitting() > FEP_SPLIT) };
    let grid = crate::model::linspace(range.0, range.1, n);
    let flags = grid.par_iter().map(|&g| split(g)).collect::<Result<Vec<_>, _>>()?;
    if flags[0] {
        return Ok(None);
    }
    let Some(k) = flags.iter().position(|&f| f) else {
        return Ok(None);
    };
    let (mut lo, mut hi) = (grid[k - 1], grid[k]);
    while hi - lo > 1e-10 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if split(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FepCell {
    pub depth: f64,
    pub g0: f64,
    /// `max Re μ + γ`.
    pub gain: f64,
    pub splitting: f64,
    pub below_threshold: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FepSweep {
    /// Row-major: depth outer, `g0` inner.
    pub cells: Vec<FepCell>,
    /// `(F, g0 at the F-EP)` per depth; `None` if not bracketed by the grid.
    pub locus: Vec<(f64, Option<f64>)>,
}

/// Floquet exponents over a `(F, g0)` grid plus the F-EP locus.
pub fn fep_sweep(p: &SystemParams, depths: &[f64], g0s: &[f64], omega: f64) -> Result<FepSweep, FloquetError> {
    p.validate()?;
    if g0s.len() < 2 || depths.is_empty() {
        return Err(FloquetError::Invalid("grid needs at least one depth and two g0 values"));
    }
    if depths.iter().chain(g0s).any(|x| !x.is_finite()) {
        return Err(FloquetError::Invalid("grid bounds must be finite"));
    }
    let gamma = p.symmetric_gamma()?;
    let cells: Vec<FepCell> = (0..depths.len() * g0s.len())
        .into_par_iter()
        .map(|idx| {
            let (depth, g0) = (depths[idx / g0s.len()], g0s[idx % g0s.len()]);
            match modulated_exponents(p, g0, depth, omega) {
                Ok(r) => FepCell {
                    depth,
                    g0,
                    gain: r.max_re() + gamma,
                    splitting: r.re_splitting(),
                    below_threshold: r.max_re() < 0.0,
                    error: None,
                },
                Err(e) => FepCell {
                    depth,
                    g0,
                    gain: f64::NAN,
                    splitting: f64::NAN,
                    below_threshold: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let lo = g0s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = g0s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let locus = depths
        .iter()
        .map(|&depth| Ok((depth, find_fep(p, depth, omega, (lo, hi), g0s.len())?)))
        .collect::<Result<Vec<_>, FloquetError>>()?;
    Ok(FepSweep { cells, locus })
}

/// Eigenmodes grouped into complex-conjugate classes, which are the modes a
/// real field can occupy.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeClasses {
    pub eigenvalues: [C64; DIM],
    pub eigenvectors: [CVector4; DIM],
    /// Indices into `eigenvalues`, ordered by descending growth rate, then
    /// ascending `|Im|`.
    pub classes: Vec<Vec<usize>>,
    pub gram_condition: f64,
}

/// Conjugate swap `Σ v̄`; real fields satisfy `v = Σ v̄`.
fn conj_swap(v: &CVector4) -> CVector4 {
    [v[1].conj(), v[0].conj(), v[3].conj(), v[2].conj()]
}

/// Relative tolerance for equal growth rates when ordering classes.
const RATE_TIE: f64 = 1e-6;

pub fn mode_classes(l: &CMatrix4) -> Result<ModeClasses, FloquetError> {
    let d = eig_dense(l)?;
    let mut class_of = [usize::MAX; DIM];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for k in 0..DIM {
        if class_of[k] != usize::MAX {
            continue;
        }
        let target = d.eigenvalues[k].conj();
        let partner = (0..DIM)
            .filter(|&j| class_of[j] == usize::MAX)
            .min_by(|&i, &j| {
                (d.eigenvalues[i] - target)
                    .norm()
                    .total_cmp(&(d.eigenvalues[j] - target).norm())
                    .then(if i == k { Ordering::Greater } else { Ordering::Equal })
            })
            .unwrap_or(k);
        // a real eigenvalue is its own partner unless a distinct one is closer
        let members = if partner == k || d.eigenvalues[k].im.abs() <= RATE_TIE * l.frobenius_norm() {
            vec![k]
        } else {
            vec![k, partner]
        };
        for &m in &members {
            class_of[m] = classes.len();
        }
        classes.push(members);
    }
    let tie = RATE_TIE * l.frobenius_norm();
    let key = |c: &Vec<usize>| {
        let z = d.eigenvalues[c[0]];
        (z.re, z.im.abs())
    };
    classes.sort_by(|a, b| {
        let (ra, ia) = key(a);
        let (rb, ib) = key(b);
        if (ra - rb).abs() <= tie {
            ia.total_cmp(&ib)
        } else {
            rb.total_cmp(&ra)
        }
    });
    Ok(ModeClasses {
        eigenvalues: d.eigenvalues,
        eigenvectors: d.eigenvectors,
        classes,
        gram_condition: d.gram_condition,
    })
}

impl ModeClasses {
    /// Real field occupying class `index`.
    pub fn physical_mode(&self, index: usize) -> Result<CVector4, FloquetError> {
        let c = self.classes.get(index).ok_or(FloquetError::NoSuchMode {
            index,
            available: self.classes.len(),
        })?;
        let v = self.eigenvectors[c[0]];
        let w = conj_swap(&v);
        let mut x = [ZERO; DIM];
        for k in 0..DIM {
            x[k] = v[k] + w[k];
        }
        if vec_norm(&x) < 1e-8 {
            for k in 0..DIM {
                x[k] = I * (v[k] - w[k]);
            }
        }
        let n = vec_norm(&x);
        Ok(x.map(|z| z / n))
    }

    /// Share of `x` in each class from expansion in the (non-orthogonal)
    /// eigenbasis, normalized to sum to one.
    pub fn weights(&self, x: &CVector4) -> Vec<f64> {
        let v = CMatrix4::from_fn(|r, c| self.eigenvectors[c][r]);
        let coeff = match v.inverse() {
            Some(inv) => inv.mul_vec(x),
            None => self.eigenvectors.map(|e| inner(&e, x)),
        };
        let w: Vec<f64> = self
            .classes
            .iter()
            .map(|c| c.iter().map(|&k| coeff[k].norm_sqr()).sum::<f64>().sqrt())
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    pub fn dominant(&self, x: &CVector4) -> usize {
        let w = self.weights(x);
        (0..w.len()).max_by(|&i, &j| w[i].total_cmp(&w[j])).unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncircleOptions {
    /// Loop angle at which the state is prepared.
    pub start_angle: f64,
    pub samples: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum accepted Gram condition of the start eigenbasis.
    pub max_condition: f64,
}

impl Default for EncircleOptions {
    fn default() -> Self {
        EncircleOptions {
            start_angle: 0.75 * PI,
            samples: 300,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_condition: 1e8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopSample {
    pub t: f64,
    /// Loop angle `σωt`.
    pub angle: f64,
    pub g: f64,
    pub delta1: f64,
    /// Class weights at this instant.
    pub weights: Vec<f64>,
    /// Rayleigh quotient `⟨v, L v⟩ / ⟨v, v⟩` of the transported state.
    pub rayleigh: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EncirclementResult {
    pub direction: LoopDirection,
    pub start_mode: usize,
    pub final_mode: usize,
    pub samples: Vec<LoopSample>,
    /// Instantaneous eigenvalues at the start (and end) of the loop.
    pub start_eigenvalues: [C64; DIM],
}

impl EncirclementResult {
    pub fn returns(&self) -> bool {
        self.final_mode == self.start_mode
    }
}

fn to_real(v: &CVector4) -> [f64; 8] {
    let mut y = [0.0; 8];
    for k in 0..DIM {
        y[2 * k] = v[k].re;
        y[2 * k + 1] = v[k].im;
    }
    y
}

fn from_real(y: &[f64; 8]) -> CVector4 {
    let mut v = [ZERO; DIM];
    for k in 0..DIM {
        v[k] = C64::new(y[2 * k], y[2 * k + 1]);
    }
    v
}

/// Transports an instantaneous mode once around the loop
/// `f = g = g0 + r cos θ`, `Δ₁ = r sin θ`, `θ = σωt`.
pub fn encircle(
    p: &SystemParams,
    g0: f64,
    radius: f64,
    omega: f64,
    direction: LoopDirection,
    start_mode: usize,
    o: &EncircleOptions,
) -> Result<EncirclementResult, FloquetError> {
    p.validate()?;
    let drive = DriveSchedule::EncirclementLoop {
        g0,
        radius,
        omega,
        direction,
    };
    drive.validate()?;
    if o.samples < 2 {
        return Err(FloquetError::Invalid("need at least two samples"));
    }
    let t0 = direction.sign() * o.start_angle / omega;
    let period = 2.0 * PI / omega;
    let generator = |t: f64| field_basis_unchecked(&p.at(&drive, t));

    let start = mode_classes(&generator(t0))?;
    if !(start.gram_condition <= o.max_condition) {
        return Err(FloquetError::DegenerateStart(start.gram_condition));
    }
    let x0 = start.physical_mode(start_mode)?;

    // norm-preserving linear transport
    let rhs = |t: f64, y: &[f64; 8]| {
        let v = from_real(y);
        let lv = generator(t).mul_vec(&v);
        let rate = (inner(&v, &lv) / inner(&v, &v)).re;
        let mut dv = [ZERO; DIM];
        for k in 0..DIM {
            dv[k] = lv[k] - v[k] * rate;
        }
        to_real(&dv)
    };
    let times: Vec<f64> = crate::model::linspace(t0, t0 + period, o.samples);
    let sol = ode::integrate(rhs, t0, to_real(&x0), &times, &Options::tolerances(o.rel_tol, o.abs_tol)).map_err(|f| f.error)?;

    let mut samples = Vec::with_capacity(times.len());
    for (t, y) in sol.times.iter().zip(&sol.states) {
        let l = generator(*t);
        let v = from_real(y);
        let classes = mode_classes(&l)?;
        let values = p.at(&drive, *t);
        samples.push(LoopSample {
            t: *t,
            angle: direction.sign() * omega * t,
            g: values.g,
            delta1: values.delta1,
            weights: classes.weights(&v),
            rayleigh: inner(&v, &l.mul_vec(&v)) / inner(&v, &v),
        });
    }
    let end = mode_classes(&generator(t0 + period))?;
    let final_state = from_real(sol.states.last().expect("at least two samples"));
    Ok(EncirclementResult {
        direction,
        start_mode,
        final_mode: end.dominant(&final_state),
        samples,
        start_eigenvalues: start.eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_generator_has_exponential_monodromy() {
        // κ = g = f = 0 leaves Q = −γ I, modulated or not
        let p = SystemParams::symmetric(0.3, 0.0, 0.0, 0.0, 0.0);
        let d = DriveSchedule::AmplitudeModulated {
            g0: 0.0,
            depth: 0.0,
            omega: 2.0,
            f_follows_g: true,
        };
        let r = monodromy(&p, &d, &MonodromyOptions::default()).unwrap();
        let expect = (-0.3 * PI).exp();
        for k in 0..DIM {
            for c in 0..DIM {
                let e = if k == c { expect } else { 0.0 };
                assert!((r.phi[(k, c)] - e).abs() < 1e-12);
            }
        }
        assert!(r.liouville_residual < 1e-10);
    }

    #[test]
    fn exponent_zone_folding() {
        let p = SystemParams::symmetric(0.25, 3.0, 0.0, 0.0, 0.0);
        let r = modulated_exponents(&p, 0.0, 0.0, 1.0).unwrap();
        // ±3i folds to ±(3 − 2π·0) with ω = 1 → zone (−0.5, 0.5]
        for z in r.exponents {
            assert!(z.im > -0.5 && z.im <= 0.5 + 1e-12);
            let unfolded = 3.0 - z.im.abs();
            assert!((unfolded - unfolded.round()).abs() < 1e-8);
        }
    }

    #[test]
    fn requires_modulation() {
        let p = SystemParams::default();
        assert!(monodromy(&p, &DriveSchedule::Constant, &MonodromyOptions::default()).is_err());
    }

    #[test]
    fn conjugate_classes_of_pair_spectrum() {
        let p = SystemParams::symmetric(0.25, 1.0, 0.5, 0.5, 0.0).with_detuning(0.1, 0.0);
        let c = mode_classes(&field_basis_unchecked(&p)).unwrap();
        assert_eq!(c.classes.len(), 2);
        for cl in &c.classes {
            assert_eq!(cl.len(), 2);
            let (a, b) = (c.eigenvalues[cl[0]], c.eigenvalues[cl[1]]);
            assert!((a - b.conj()).norm() < 1e-10);
        }
        let x = c.physical_mode(0).unwrap();
        let s = conj_swap(&x);
        assert!((0..DIM).all(|k| (x[k] - s[k]).norm() < 1e-12));
        let w = c.weights(&x);
        assert!(w[0] > 0.999);
    }
}
