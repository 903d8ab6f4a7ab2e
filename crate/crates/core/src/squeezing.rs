//! Output quadrature noise spectra below threshold from the linearized
//! Langevin equations, and a stochastic cross-check.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CMatrix4, RMatrix4, C64, DIM};
use crate::model::{quadrature_unchecked, ModelError, SystemParams};
use crate::seeds::derive_seed;
use crate::spectral::{self, SpectralError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SqueezingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("system is at or above threshold (max growth rate {0})")]
    AboveThreshold(f64),
    #[error("response matrix is singular at Omega = {0}")]
    Singular(f64),
    #[error("time step {dt} does not resolve the fastest rate (need dt <= {limit})")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("stochastic integration became unstable")]
    Unstable,
    #[error("invalid input: {0}")]
    Invalid(&'static str),
}

/// Loss budget of each resonator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub gamma: f64,
    /// Out-coupling rate `ργ`.
    pub gamma_ex: f64,
    /// Intrinsic loss `(1 − ρ)γ`.
    pub gamma_i: f64,
}

impl NoiseModel {
    pub fn from_params(p: &SystemParams) -> Result<Self, SqueezingError> {
        p.validate()?;
        let gamma = p.symmetric_gamma()?;
        Ok(NoiseModel {
            gamma,
            gamma_ex: p.rho * gamma,
            gamma_i: (1.0 - p.rho) * gamma,
        })
    }
}

/// Output port, i.e. which resonator is observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Port {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Port {
    pub fn offset(self) -> usize {
        match self {
            Port::One => 0,
            Port::Two => 2,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Port::One => 1,
            Port::Two => 2,
        }
    }
}

fn stable_generator(p: &SystemParams) -> Result<(RMatrix4, NoiseModel), SqueezingError> {
    let noise = NoiseModel::from_params(p)?;
    let q = quadrature_unchecked(p, noise.gamma);
    let values = spectral::eigenvalues(&q.to_complex())?;
    let max = values.iter().map(|z| z.re).fold(f64::MIN, f64::max);
    if max >= 0.0 {
        return Err(SqueezingError::AboveThreshold(max));
    }
    Ok((q, noise))
}

fn psd_from(q: &RMatrix4, noise: &NoiseModel, omega: f64) -> Result<RMatrix4, SqueezingError> {
    let m = CMatrix4::identity().scale(C64::new(0.0, -omega)) - q.to_complex();
    let chi = m.inverse().ok_or(SqueezingError::Singular(omega))?;
    let t = chi.scale(C64::new(2.0 * noise.gamma_ex, 0.0)) - CMatrix4::identity();
    let s = t * t.adjoint() + (chi * chi.adjoint()).scale(C64::new(4.0 * noise.gamma_ex * noise.gamma_i, 0.0));
    let mut out = RMatrix4::zeros();
    for r in 0..DIM {
        for c in 0..DIM {
            // symmetrized spectrum of real quadratures
            out[(r, c)] = s[(r, c)].re;
        }
    }
    Ok(out)
}

/// Symmetrized output spectral matrix in `(X₁, Y₁, X₂, Y₂)`, vacuum = 1.
pub fn output_psd(p: &SystemParams, omega: f64) -> Result<RMatrix4, SqueezingError> {
    if !omega.is_finite() {
        return Err(SqueezingError::Invalid("Omega must be finite"));
    }
    let (q, noise) = stable_generator(p)?;
    psd_from(&q, &noise, omega)
}

/// `(θ*, S_min, S_max)` of the 2×2 block of one port; `θ* ∈ [0, π)`.
fn optimal_from(s: &RMatrix4, port: Port) -> (f64, f64, f64) {
    let o = port.offset();
    let (a, d) = (s[(o, o)], s[(o + 1, o + 1)]);
    let c = 0.5 * (s[(o, o + 1)] + s[(o + 1, o)]);
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = half.hypot(c);
    let beta = c.atan2(half);
    let theta = ((beta + PI) * 0.5).rem_euclid(PI);
    (theta, mean - r, mean + r)
}

/// Noise of `cos θ·X + sin θ·Y` at `port`.
pub fn quadrature_noise(s: &RMatrix4, port: Port, theta: f64) -> f64 {
    let o = port.offset();
    let (c, sn) = (theta.cos(), theta.sin());
    c * c * s[(o, o)] + sn * sn * s[(o + 1, o + 1)] + c * sn * (s[(o, o + 1)] + s[(o + 1, o)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalQuadrature {
    pub theta: f64,
    pub s_min: f64,
    pub s_max: f64,
}

/// Least-noise quadrature of `port` at `omega`.
pub fn optimal_quadrature(p: &SystemParams, port: Port, omega: f64) -> Result<OptimalQuadrature, SqueezingError> {
    let s = output_psd(p, omega)?;
    let (theta, s_min, s_max) = optimal_from(&s, port);
    Ok(OptimalQuadrature { theta, s_min, s_max })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingSpectrum {
    pub port: Port,
    pub omegas: Vec<f64>,
    pub thetas: Vec<f64>,
    /// `noise[i][j]` at `omegas[i]`, `thetas[j]`.
    pub noise: Vec<Vec<f64>>,
    pub optimal: Vec<OptimalQuadrature>,
}

impl SqueezingSpectrum {
    pub fn min_noise(&self) -> f64 {
        self.optimal.iter().map(|o| o.s_min).fold(f64::INFINITY, f64::min)
    }
}

pub fn squeezing_spectrum(p: &SystemParams, port: Port, thetas: &[f64], omegas: &[f64]) -> Result<SqueezingSpectrum, SqueezingError> {
    let (q, noise) = stable_generator(p)?;
    let rows = omegas
        .par_iter()
        .map(|&w| {
            let s = psd_from(&q, &noise, w)?;
            let (theta, s_min, s_max) = optimal_from(&s, port);
            let row: Vec<f64> = thetas.iter().map(|&t| quadrature_noise(&s, port, t)).collect();
            Ok((row, OptimalQuadrature { theta, s_min, s_max }))
        })
        .collect::<Result<Vec<_>, SqueezingError>>()?;
    let (noise_rows, optimal) = rows.into_iter().unzip();
    Ok(SqueezingSpectrum {
        port,
        omegas: omegas.to_vec(),
        thetas: thetas.to_vec(),
        noise: noise_rows,
        optimal,
    })
}

/// Settings of the Euler–Maruyama estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSettings {
    pub dt: f64,
    pub ensemble: usize,
    /// Discarded transient, in steps.
    pub burn_in_steps: usize,
    /// Welch segments per member.
    pub segments: usize,
    pub segment_steps: usize,
    /// Highest reported sideband frequency.
    pub max_omega: f64,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        MonteCarloSettings {
            dt: 0.01,
            ensemble: 200,
            burn_in_steps: 5000,
            segments: 8,
            segment_steps: 40_000,
            max_omega: 5.0,
        }
    }
}

impl MonteCarloSettings {
    /// Simulated time per member after burn-in.
    pub fn duration(&self) -> f64 {
        (self.segments * self.segment_steps) as f64 * self.dt
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpectrum {
    pub omegas: Vec<f64>,
    /// Estimated diagonal spectra `S_jj(Ω)` for `(X₁, Y₁, X₂, Y₂)`.
    pub diagonal: Vec<[f64; DIM]>,
}

/// Welch periodograms of the simulated output quadratures, averaged over
/// segments and ensemble members.
pub fn langevin_mc(p: &SystemParams, seed: u64, s: &MonteCarloSettings) -> Result<MonteCarloSpectrum, SqueezingError> {
    let (q, noise) = stable_generator(p)?;
    if s.ensemble == 0 || s.segments == 0 || s.segment_steps < 16 {
        return Err(SqueezingError::Invalid("ensemble, segments and segment length must be positive"));
    }
    let fastest = noise.gamma.max(p.g.abs()).max(p.f.abs()).max(p.kappa.abs());
    let limit = 0.01 / fastest;
    if !(s.dt > 0.0) || s.dt > limit * (1.0 + 1e-12) {
        return Err(SqueezingError::StepTooLarge { dt: s.dt, limit });
    }
    let n = s.segment_steps;
    let bins: Vec<usize> = (1..n / 2).take_while(|&k| 2.0 * PI * k as f64 / (n as f64 * s.dt) <= s.max_omega).collect();
    let window: Vec<f64> = (0..n).map(|j| 0.5 - 0.5 * (2.0 * PI * j as f64 / n as f64).cos()).collect();
    let wsum: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(n);

    let members = (0..s.ensemble)
        .into_par_iter()
        .map(|member| -> Result<Vec<[f64; DIM]>, SqueezingError> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, member as u64));
            let dt = s.dt;
            let sq_ex = (2.0 * noise.gamma_ex).sqrt();
            let sq_i = (2.0 * noise.gamma_i).sqrt();
            let sd = dt.sqrt();
            let mut v = [0.0; DIM];
            let step = |v: &mut [f64; DIM], rng: &mut ChaCha8Rng| -> [f64; DIM] {
                let mut w_ex = [0.0; DIM];
                let mut next = *v;
                for r in 0..DIM {
                    let dw_ex = sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
                    let dw_i = sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
                    let drift: f64 = (0..DIM).map(|c| q[(r, c)] * v[c]).sum();
                    next[r] += drift * dt + sq_ex * dw_ex + sq_i * dw_i;
                    w_ex[r] = dw_ex;
                }
                let mut out = [0.0; DIM];
                for r in 0..DIM {
                    out[r] = sq_ex * 0.5 * (v[r] + next[r]) - w_ex[r] / dt;
                }
                *v = next;
                out
            };
            for _ in 0..s.burn_in_steps {
                step(&mut v, &mut rng);
            }
            let mut acc = vec![[0.0; DIM]; bins.len()];
            let mut buffers = vec![vec![C64::new(0.0, 0.0); n]; DIM];
            for _ in 0..s.segments {
                for j in 0..n {
                    let y = step(&mut v, &mut rng);
                    for r in 0..DIM {
                        buffers[r][j] = C64::new(y[r] * window[j], 0.0);
                    }
                }
                if !v.iter().all(|x| x.is_finite() && x.abs() < 1e8) {
                    return Err(SqueezingError::Unstable);
                }
                for (r, buf) in buffers.iter_mut().enumerate() {
                    fft.process(buf);
                    for (slot, &k) in bins.iter().enumerate() {
                        acc[slot][r] += buf[k].norm_sqr() * dt / wsum;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let norm = (s.ensemble * s.segments) as f64;
    let mut diagonal = vec![[0.0; DIM]; bins.len()];
    for m in &members {
        for (slot, row) in m.iter().enumerate() {
            for r in 0..DIM {
                diagonal[slot][r] += row[r];
            }
        }
    }
    for row in diagonal.iter_mut() {
        for x in row.iter_mut() {
            *x /= norm;
        }
    }
    let omegas = bins.iter().map(|&k| 2.0 * PI * k as f64 / (n as f64 * s.dt)).collect();
    Ok(MonteCarloSpectrum { omegas, diagonal })
}
