//! Time-domain integration of the nonlinear coupled-mode equations, spectral
//! regime classification and parameter sweeps.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::C64;
use crate::model::{linspace, rhs_at, DriveSchedule, FieldState, ModelError, SweepVariable, SystemParams};
use crate::ode::{self, OdeError, Options, Stats};
use crate::seeds::derive_seed;

/// Mean tail intensity below which a run counts as below threshold.
pub const INTENSITY_FLOOR: f64 = 1e-8;
/// Half-width, in FFT bins, of the zero-frequency neighbourhood.
pub const DC_BINS: usize = 2;
pub const MIN_WINDOW_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("integration failed: {error}")]
    Integration { error: OdeError, partial: Box<Trajectory> },
    #[error("analysis window has {samples} samples, need at least {needed}")]
    WindowTooShort { samples: usize, needed: usize },
    #[error("invalid settings: {0}")]
    InvalidSettings(&'static str),
}

/// Uniformly sampled solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FieldState>,
    /// Log of the renormalization factor per sample (zeros when disabled);
    /// the physical state is `states[k]·exp(log_scale[k])`.
    pub log_scale: Vec<f64>,
    pub stats: Stats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sample_spacing(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    /// Physical state at sample `k`.
    pub fn physical(&self, k: usize) -> FieldState {
        let s = self.log_scale[k].exp();
        FieldState::new(self.states[k].a * s, self.states[k].b * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Spacing of the uniform output grid.
    pub sample_dt: f64,
    /// Renormalize each step; valid only without saturation.
    pub renormalize: bool,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            sample_dt: 0.1,
            renormalize: false,
        }
    }
}

fn rhs(p: &SystemParams, d: &DriveSchedule) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] {
    let (p, d) = (*p, *d);
    move |t, y| {
        let q = if matches!(d, DriveSchedule::Constant) { p } else { p.at(&d, t) };
        rhs_at(&q, &FieldState::from_array(y)).to_array()
    }
}

/// Solves the coupled-mode equations on `[t_span.0, t_span.1]`.
pub fn integrate(
    p: &SystemParams,
    d: &DriveSchedule,
    s0: FieldState,
    t_span: (f64, f64),
    settings: &IntegratorSettings,
) -> Result<Trajectory, DynamicsError> {
    p.validate()?;
    d.validate()?;
    if !s0.is_finite() {
        return Err(ModelError::NonFiniteState.into());
    }
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(DynamicsError::InvalidSettings("time span must be finite and increasing"));
    }
    if !(settings.sample_dt > 0.0 && settings.sample_dt.is_finite()) {
        return Err(DynamicsError::InvalidSettings("sample_dt must be positive"));
    }
    if settings.renormalize && (p.gs1 != 0.0 || p.gs2 != 0.0) {
        return Err(DynamicsError::InvalidSettings("renormalization requires gs1 = gs2 = 0"));
    }
    let n = ((t1 - t0) / settings.sample_dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * settings.sample_dt).collect();
    let options = Options {
        renormalize: settings.renormalize,
        ..Options::tolerances(settings.rel_tol, settings.abs_tol)
    };
    let wrap = |s: ode::Samples<4>| Trajectory {
        times: s.times,
        states: s.states.iter().map(FieldState::from_array).collect(),
        log_scale: s.log_scale,
        stats: s.stats,
    };
    match ode::integrate(rhs(p, d), t0, s0.to_array(), &times, &options) {
        Ok(s) => Ok(wrap(s)),
        Err(f) => Err(DynamicsError::Integration {
            error: f.error,
            partial: Box::new(wrap(f.partial)),
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    BelowThreshold,
    Degenerate,
    NonDegenerate,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::BelowThreshold => "below_threshold",
            Regime::Degenerate => "degenerate",
            Regime::NonDegenerate => "non_degenerate",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Regime::BelowThreshold => 0,
            Regime::Degenerate => 1,
            Regime::NonDegenerate => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    /// Envelope angular frequency of the sidebands; 0 when degenerate, NaN
    /// below threshold.
    pub sideband_offset: f64,
    /// Mean tail intensities `(|a|², |b|²)`.
    pub intensities: [f64; 2],
    /// `10·log₁₀(P_dc / P_side)`.
    pub dc_margin_db: f64,
    /// Margin smaller than the decision threshold; labelled by the larger mass.
    pub marginal: bool,
    /// `ω₊ + ω₋` of the strongest positive and negative sideband peaks.
    pub asymmetry: f64,
    /// Frequency resolution of the analysis window.
    pub resolution: f64,
}

fn peak_bin(power: &[f64], bins: impl Iterator<Item = usize>) -> Option<usize> {
    bins.max_by(|&x, &y| power[x].total_cmp(&power[y]))
}

/// Quadratic interpolation of the log-power peak around bin `k`.
fn refine_peak(power: &[f64], k: usize) -> f64 {
    let n = power.len();
    let l = power[(k + n - 1) % n].max(f64::MIN_POSITIVE).ln();
    let c = power[k].max(f64::MIN_POSITIVE).ln();
    let r = power[(k + 1) % n].max(f64::MIN_POSITIVE).ln();
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
}

fn signed_bin(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Classifies the tail of a trajectory by the spectrum of `a(t)`.
pub fn classify_regime(tr: &Trajectory, settle_fraction: f64, peak_threshold_db: f64) -> Result<RegimeLabel, DynamicsError> {
    if !(0.0..1.0).contains(&settle_fraction) {
        return Err(DynamicsError::InvalidSettings("settle_fraction must lie in [0, 1)"));
    }
    if !(peak_threshold_db > 0.0) {
        return Err(DynamicsError::InvalidSettings("peak_threshold_db must be positive"));
    }
    let start = (settle_fraction * tr.len() as f64).ceil() as usize;
    let n = tr.len().saturating_sub(start);
    if n < MIN_WINDOW_SAMPLES {
        return Err(DynamicsError::WindowTooShort {
            samples: n,
            needed: MIN_WINDOW_SAMPLES,
        });
    }
    let dt = tr.sample_spacing();
    let resolution = 2.0 * PI / (n as f64 * dt);

    let mut ia = 0.0;
    let mut ib = 0.0;
    for k in start..tr.len() {
        let s = tr.physical(k);
        ia += s.intensity_a();
        ib += s.intensity_b();
    }
    let intensities = [ia / n as f64, ib / n as f64];
    let below = intensities[0] + intensities[1] < INTENSITY_FLOOR;
    if below {
        return Ok(RegimeLabel {
            regime: Regime::BelowThreshold,
            sideband_offset: f64::NAN,
            intensities,
            dc_margin_db: f64::NAN,
            marginal: false,
            asymmetry: f64::NAN,
            resolution,
        });
    }

    // renormalized runs are analysed through the state direction
    let renormalized = tr.log_scale.iter().any(|&x| x != 0.0);
    let mut buf: Vec<C64> = (start..tr.len())
        .enumerate()
        .map(|(j, k)| {
            let s = tr.states[k];
            let a = if renormalized {
                s.a / (s.a.norm_sqr() + s.b.norm_sqr()).sqrt()
            } else {
                s.a
            };
            let w = 0.5 - 0.5 * (2.0 * PI * j as f64 / (n - 1) as f64).cos();
            a * w
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|z| z.norm_sqr()).collect();

    let in_dc = |k: usize| k <= DC_BINS || k >= n - DC_BINS;
    let p_dc: f64 = (0..n).filter(|&k| in_dc(k)).map(|k| power[k]).sum();
    let peak = peak_bin(&power, (0..n).filter(|&k| !in_dc(k)));
    let side_mass = |k: usize| -> f64 {
        (-(DC_BINS as isize)..=DC_BINS as isize)
            .map(|o| ((k as isize + o).rem_euclid(n as isize)) as usize)
            .filter(|&j| !in_dc(j))
            .map(|j| power[j])
            .sum()
    };
    let p_side = peak.map(side_mass).unwrap_or(0.0);
    let margin = 10.0 * (p_dc.max(f64::MIN_POSITIVE) / p_side.max(f64::MIN_POSITIVE)).log10();
    let degenerate = if margin >= peak_threshold_db {
        true
    } else if margin <= -peak_threshold_db {
        false
    } else {
        p_dc >= p_side
    };
    let marginal = margin.abs() < peak_threshold_db;

    let freq = |k: usize| (signed_bin(k, n) as f64 + refine_peak(&power, k)) * resolution;
    let pos = peak_bin(&power, (DC_BINS + 1..=n / 2).filter(|&k| !in_dc(k)));
    let neg = peak_bin(&power, (n / 2 + 1..n).filter(|&k| !in_dc(k)));
    let (w_pos, w_neg) = (pos.map(freq).unwrap_or(0.0), neg.map(freq).unwrap_or(0.0));
    let asymmetry = w_pos + w_neg;

    let (regime, offset) = if degenerate {
        (Regime::Degenerate, 0.0)
    } else {
        (Regime::NonDegenerate, 0.5 * (w_pos - w_neg))
    };
    Ok(RegimeLabel {
        regime,
        sideband_offset: offset,
        intensities,
        dc_margin_db: margin,
        marginal,
        asymmetry,
        resolution,
    })
}

/// Settings shared by every cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub t_end: f64,
    pub settle_fraction: f64,
    pub peak_threshold_db: f64,
    /// Magnitude of the random initial envelopes.
    pub seed_amplitude: f64,
    pub seed: u64,
    pub integrator: IntegratorSettings,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            t_end: 3000.0,
            settle_fraction: 0.7,
            peak_threshold_db: 20.0,
            seed_amplitude: 1e-6,
            seed: 0,
            integrator: IntegratorSettings::default(),
        }
    }
}

/// Complex Gaussian initial envelopes with r.m.s. magnitude `amplitude`.
pub fn random_initial_state(seed: u64, amplitude: f64) -> FieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im) * (amplitude / 2f64.sqrt())
    };
    let a = draw();
    let b = draw();
    FieldState::new(a, b)
}

/// Integrates from a seeded random start and classifies the result.
pub fn simulate_and_classify(p: &SystemParams, s: &SimSettings, seed: u64) -> Result<RegimeLabel, DynamicsError> {
    let s0 = random_initial_state(seed, s.seed_amplitude);
    let tr = integrate(p, &DriveSchedule::Constant, s0, (0.0, s.t_end), &s.integrator)?;
    classify_regime(&tr, s.settle_fraction, s.peak_threshold_db)
}

/// One axis of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub variable: SweepVariable,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(variable: SweepVariable, lo: f64, hi: f64, n: usize) -> Self {
        Axis { variable, lo, hi, n }
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub x1: f64,
    pub x2: f64,
    /// Classification, or a description of the failure.
    pub outcome: Result<RegimeLabel, String>,
}

/// Row-major grid: `cells[i * axis2.n + j]` has `axis1` value `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub axis1: Axis,
    pub axis2: Axis,
    pub cells: Vec<Cell>,
}

/// Classifies every cell of a two-parameter grid from full nonlinear runs.
pub fn phase_diagram(base: &SystemParams, axis1: Axis, axis2: Axis, settings: &SimSettings) -> Result<PhaseDiagram, DynamicsError> {
    base.validate()?;
    if axis1.n < 2 || axis2.n < 2 {
        return Err(DynamicsError::InvalidSettings("grid sizes must be at least 2"));
    }
    let v1 = axis1.values();
    let v2 = axis2.values();
    let cells = (0..v1.len() * v2.len())
        .into_par_iter()
        .map(|idx| {
            let (x1, x2) = (v1[idx / v2.len()], v2[idx % v2.len()]);
            let p = axis2.variable.apply(&axis1.variable.apply(base, x1), x2);
            let outcome = simulate_and_classify(&p, settings, derive_seed(settings.seed, idx as u64)).map_err(|e| e.to_string());
            Cell { x1, x2, outcome }
        })
        .collect();
    Ok(PhaseDiagram { axis1, axis2, cells })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionPoint {
    pub g: f64,
    pub outcome: Result<RegimeLabel, String>,
    /// `|λ_R|` of the fastest-growing linear mode.
    pub linear_splitting: f64,
}

/// Scans `f = g` at fixed pump phase.
pub fn transition_scan(
    base: &SystemParams,
    phi: f64,
    g_range: (f64, f64),
    n: usize,
    settings: &SimSettings,
) -> Result<Vec<TransitionPoint>, DynamicsError> {
    base.validate()?;
    if n < 2 {
        return Err(DynamicsError::InvalidSettings("scan needs at least 2 points"));
    }
    let base = SystemParams { phi, ..*base };
    let gs = linspace(g_range.0, g_range.1, n);
    let out = gs
        .par_iter()
        .enumerate()
        .map(|(idx, &g)| {
            let p = SweepVariable::TIED_GAIN.apply(&base, g);
            let outcome = simulate_and_classify(&p, settings, derive_seed(settings.seed, idx as u64)).map_err(|e| e.to_string());
            let linear_splitting = crate::spectral::growth_rates(&p).map(|r| r.splittings[0].abs()).unwrap_or(f64::NAN);
            TransitionPoint {
                g,
                outcome,
                linear_splitting,
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_decay() {
        let p = SystemParams::symmetric(0.25, 0.0, 0.0, 0.0, 0.0);
        let s = IntegratorSettings {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            ..Default::default()
        };
        let tr = integrate(&p, &DriveSchedule::Constant, FieldState::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0)), (0.0, 20.0), &s).unwrap();
        for (t, st) in tr.times.iter().zip(&tr.states) {
            assert!((st.a.re - (-0.25 * t).exp()).abs() < 1e-8);
            assert!(st.b.norm() == 0.0);
        }
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn saturated_fixed_point() {
        let p = SystemParams::symmetric(0.25, 0.0, 1.5, 0.0, 0.0).with_saturation(0.3);
        let tr = integrate(&p, &DriveSchedule::Constant, FieldState::new(C64::new(1e-6, 0.0), C64::new(0.0, 0.0)), (0.0, 200.0), &IntegratorSettings::default()).unwrap();
        let last = tr.states.last().unwrap();
        assert!((last.intensity_a() - 1.25 / 0.3).abs() < 1e-6);
    }

    #[test]
    fn renormalization_requires_linear_model() {
        let p = SystemParams::default().with_saturation(0.3);
        let s = IntegratorSettings {
            renormalize: true,
            ..Default::default()
        };
        assert!(integrate(&p, &DriveSchedule::Constant, FieldState::zero(), (0.0, 1.0), &s).is_err());
    }

    #[test]
    fn below_threshold_classification() {
        let p = SystemParams::symmetric(0.25, 1.0, 0.5, 0.5, 0.0).with_saturation(0.3);
        let l = simulate_and_classify(&p, &SimSettings::default(), 1).unwrap();
        assert_eq!(l.regime, Regime::BelowThreshold);
        assert!(l.sideband_offset.is_nan());
    }

    #[test]
    fn short_window_rejected() {
        let p = SystemParams::default();
        let tr = integrate(&p, &DriveSchedule::Constant, FieldState::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0)), (0.0, 5.0), &IntegratorSettings::default()).unwrap();
        assert!(matches!(classify_regime(&tr, 0.7, 20.0), Err(DynamicsError::WindowTooShort { .. })));
    }

    #[test]
    fn synthetic_sidebands() {
        let n = 4000;
        let dt = 0.1;
        let w = 0.8;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let states = times
            .iter()
            .map(|&t| FieldState::new(C64::from_polar(1.0, -w * t) + C64::from_polar(0.7, w * t), C64::new(0.0, 0.0)))
            .collect();
        let tr = Trajectory {
            times,
            states,
            log_scale: vec![0.0; n],
            stats: Stats::default(),
        };
        let l = classify_regime(&tr, 0.0, 20.0).unwrap();
        assert_eq!(l.regime, Regime::NonDegenerate);
        assert!((l.sideband_offset - w).abs() < 0.2 * l.resolution, "{}", l.sideband_offset);
        assert!(l.asymmetry.abs() < l.resolution);
    }

    #[test]
    fn synthetic_dc() {
        let n = 2000;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
        let states = vec![FieldState::new(C64::new(1.0, 0.5), C64::new(0.3, 0.0)); n];
        let tr = Trajectory {
            times,
            states,
            log_scale: vec![0.0; n],
            stats: Stats::default(),
        };
        let l = classify_regime(&tr, 0.0, 20.0).unwrap();
        assert_eq!(l.regime, Regime::Degenerate);
        assert_eq!(l.sideband_offset, 0.0);
        assert!(!l.marginal);
    }

    #[test]
    fn initial_state_is_seeded() {
        assert_eq!(random_initial_state(3, 1e-6), random_initial_state(3, 1e-6));
        assert_ne!(random_initial_state(3, 1e-6), random_initial_state(4, 1e-6));
        assert!(random_initial_state(3, 1e-6).a.norm() < 1e-5);
    }
}
