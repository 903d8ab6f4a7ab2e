//! Dormand–Prince 5(4) integrator with step-size control and continuous
//! (dense) output, for fixed-size real state vectors.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OdeError {
    #[error("tolerances must lie in [1e-12, 1e-3] (rel {rel}, abs {abs})")]
    InvalidTolerance { rel: f64, abs: f64 },
    #[error("invalid time span [{t0}, {t1}]")]
    InvalidSpan { t0: f64, t1: f64 },
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    MaxSteps { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step; `None` leaves it to the controller.
    pub max_step: Option<f64>,
    pub max_steps: usize,
    /// Rescale the state to unit norm after every accepted step and keep the
    /// logarithm of the removed factor. Only meaningful for linear systems.
    pub renormalize: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: None,
            max_steps: 50_000_000,
            renormalize: false,
        }
    }
}

impl Options {
    pub fn tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Options {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        let ok = |x: f64| (1e-12..=1e-3).contains(&x);
        if ok(self.rel_tol) && ok(self.abs_tol) {
            Ok(())
        } else {
            Err(OdeError::InvalidTolerance {
                rel: self.rel_tol,
                abs: self.abs_tol,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Scaled error estimate of the last accepted step.
    pub last_error: f64,
}

/// States at the requested sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    /// Natural log of the factor removed by renormalization up to each sample;
    /// all zero unless [`Options::renormalize`] is set.
    pub log_scale: Vec<f64>,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct Failure<const N: usize> {
    pub error: OdeError,
    /// Samples produced before the failure.
    pub partial: Samples<N>,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

fn is_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|x| x.is_finite())
}

fn rms_scaled<const N: usize>(v: &[f64; N], y0: &[f64; N], y1: &[f64; N], o: &Options) -> f64 {
    let s: f64 = (0..N)
        .map(|i| {
            let sk = o.abs_tol + o.rel_tol * y0[i].abs().max(y1[i].abs());
            (v[i] / sk).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], f0: &[f64; N], o: &Options, span: f64) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let d0 = rms_scaled(y, y, y, o);
    let d1 = rms_scaled(f0, y, y, o);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = combo(y, h0, &[(1.0, f0)]);
    let f1 = f(t + h0, &y1);
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = rms_scaled(&diff, y, y, o) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `y' = f(t, y)` from `t0` and returns the solution at each of the
/// (non-decreasing, ≥ t0) `sample_times` using continuous output.
pub fn integrate<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    sample_times: &[f64],
    o: &Options,
) -> Result<Samples<N>, Failure<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut out = Samples {
        times: Vec::with_capacity(sample_times.len()),
        states: Vec::with_capacity(sample_times.len()),
        log_scale: Vec::with_capacity(sample_times.len()),
        stats: Stats::default(),
    };
    let fail = |error, partial| Err(Failure { error, partial });
    if let Err(e) = o.validate() {
        return fail(e, out);
    }
    let t_end = match sample_times.last() {
        Some(&t) => t,
        None => return Ok(out),
    };
    let sorted = sample_times.windows(2).all(|w| w[0] <= w[1]);
    if !t0.is_finite() || !t_end.is_finite() || !sorted || sample_times[0] < t0 {
        return fail(OdeError::InvalidSpan { t0, t1: t_end }, out);
    }
    if !is_finite(&y0) {
        return fail(OdeError::NonFinite { t: t0 }, out);
    }

    let mut t = t0;
    let mut y = y0;
    let mut log_scale = 0.0;
    let mut next = 0usize;
    while next < sample_times.len() && sample_times[next] == t0 {
        out.times.push(t0);
        out.states.push(y);
        out.log_scale.push(0.0);
        next += 1;
    }
    if next == sample_times.len() {
        return Ok(out);
    }

    let span = t_end - t0;
    let h_max = o.max_step.unwrap_or(span).min(span);
    let mut k1 = f(t, &y);
    out.stats.evaluations += 1;
    let mut h = initial_step(&mut f, t, &y, &k1, o, h_max);
    out.stats.evaluations += 1;
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    while next < sample_times.len() {
        if out.stats.accepted + out.stats.rejected >= o.max_steps {
            return fail(OdeError::MaxSteps { t }, out);
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return fail(OdeError::StepUnderflow { t, h }, out);
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let k2 = f(t + C2 * h, &combo(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &combo(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y1 = combo(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y1);
        out.stats.evaluations += 6;

        let mut e = [0.0; N];
        for i in 0..N {
            e[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = rms_scaled(&e, &y, &y1, o);

        if !err.is_finite() || !is_finite(&y1) {
            // treat as a failed step and shrink hard
            out.stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return fail(OdeError::NonFinite { t }, out);
            }
            continue;
        }

        let fac11 = err.powf(0.2 - BETA * 0.75);
        if err <= 1.0 {
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            fac_old = err.max(1e-4);
            out.stats.accepted += 1;
            out.stats.last_error = err;

            let t_new = if last { t_end } else { t + h };
            // dense output coefficients over [t, t + h]
            let mut r2 = [0.0; N];
            let mut r3 = [0.0; N];
            let mut r4 = [0.0; N];
            let mut r5 = [0.0; N];
            for i in 0..N {
                let dy = y1[i] - y[i];
                let bspl = h * k1[i] - dy;
                r2[i] = dy;
                r3[i] = bspl;
                r4[i] = dy - h * k7[i] - bspl;
                r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            while next < sample_times.len() && sample_times[next] <= t_new {
                let ts = sample_times[next];
                let th = if ts >= t_new { 1.0 } else { (ts - t) / h };
                let th1 = 1.0 - th;
                let mut ys = [0.0; N];
                for i in 0..N {
                    ys[i] = y[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
                }
                if th == 1.0 {
                    ys = y1;
                }
                out.times.push(ts);
                out.states.push(ys);
                out.log_scale.push(log_scale);
                next += 1;
            }

            t = t_new;
            y = y1;
            k1 = k7;
            if o.renormalize {
                let n = y.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 0.0 && n.is_finite() {
                    for v in y.iter_mut() {
                        *v /= n;
                    }
                    for v in k1.iter_mut() {
                        *v /= n;
                    }
                    log_scale += n.ln();
                }
            }
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new.min(h_max);
        } else {
            out.stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
    Ok(out)
}

/// Convenience wrapper returning only the state at `t1`.
pub fn integrate_to<const N: usize, F>(f: F, t0: f64, y0: [f64; N], t1: f64, o: &Options) -> Result<([f64; N], Stats), OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let s = integrate(f, t0, y0, &[t1], o).map_err(|e| e.error)?;
    let mut y = s.states[0];
    if o.renormalize {
        let scale = s.log_scale[0].exp();
        for v in y.iter_mut() {
            *v *= scale;
        }
    }
    Ok((y, s.stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_: f64, y: &[f64; 1]) -> [f64; 1] {
        [-0.25 * y[0]]
    }

    #[test]
    fn exponential_decay() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.5).collect();
        let s = integrate(decay, 0.0, [1.0], &times, &Options::tolerances(1e-12, 1e-12)).unwrap();
        for (t, y) in s.times.iter().zip(&s.states) {
            assert!((y[0] - (-0.25 * t).exp()).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0]];
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.0731).collect();
        let s = integrate(f, 0.0, [1.0, 0.0], &times, &Options::tolerances(1e-11, 1e-12)).unwrap();
        for (t, y) in s.times.iter().zip(&s.states) {
            assert!((y[0] - t.cos()).abs() < 1e-8);
            assert!((y[1] + t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let f = |t: f64, y: &[f64; 2]| [y[1], -(1.0 + 0.5 * t.sin()) * y[0]];
        let reference = integrate_to(f, 0.0, [1.0, 0.0], 20.0, &Options::tolerances(1e-12, 1e-12)).unwrap().0;
        let mut last = f64::INFINITY;
        for tol in [1e-4, 1e-6, 1e-8] {
            let y = integrate_to(f, 0.0, [1.0, 0.0], 20.0, &Options::tolerances(tol, tol)).unwrap().0;
            let err = (y[0] - reference[0]).hypot(y[1] - reference[1]);
            assert!(err < last, "tol {tol}: {err} vs {last}");
            last = err;
        }
    }

    #[test]
    fn renormalized_growth_tracks_log_scale() {
        let f = |_: f64, y: &[f64; 1]| [3.0 * y[0]];
        let o = Options {
            renormalize: true,
            ..Options::tolerances(1e-10, 1e-12)
        };
        let s = integrate(f, 0.0, [1.0], &[100.0], &o).unwrap();
        let ln = s.log_scale[0] + s.states[0][0].ln();
        assert!((ln - 300.0).abs() < 1e-6, "{ln}");
    }

    #[test]
    fn blow_up_reports_partial() {
        let f = |_: f64, y: &[f64; 1]| [y[0] * y[0]];
        let times = [0.5, 0.9, 1.5];
        let err = integrate(f, 0.0, [1.0], &times, &Options::default()).unwrap_err();
        assert!(matches!(err.error, OdeError::StepUnderflow { .. } | OdeError::NonFinite { .. }));
        assert_eq!(err.partial.states.len(), 2);
        assert!((err.partial.states[0][0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_tolerance_and_span() {
        assert!(integrate(decay, 0.0, [1.0], &[1.0], &Options::tolerances(1e-14, 1e-9)).is_err());
        assert!(integrate(decay, 0.0, [1.0], &[1.0], &Options::tolerances(1e-9, 1e-2)).is_err());
        assert!(integrate(decay, 0.0, [1.0], &[2.0, 1.0], &Options::default()).is_err());
        assert!(integrate(decay, 1.0, [1.0], &[0.5], &Options::default()).is_err());
    }

    #[test]
    fn samples_at_start_time() {
        let s = integrate(decay, 0.0, [2.0], &[0.0, 0.0, 1.0], &Options::default()).unwrap();
        assert_eq!(s.states[0], [2.0]);
        assert_eq!(s.states[1], [2.0]);
    }
}
