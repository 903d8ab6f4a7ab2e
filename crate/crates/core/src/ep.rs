//! Exceptional-point search, order diagnosis and perturbative scaling fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CMatrix4, C64, DIM};
use crate::model::{field_basis_unchecked, linspace, ModelError, SystemParams};
use crate::spectral::{self, eig_dense, eigenvalues, SpectralError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no fourfold coalescence in the search box (best spread {best_spread:.3e} at g = {g}, delta1 = {delta1})")]
    NotFound { g: f64, delta1: f64, best_spread: f64 },
    #[error("only {usable} usable scaling points (need {needed})")]
    TooFewPoints { usable: usize, needed: usize },
    #[error("invalid input: {0}")]
    Invalid(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceMetrics {
    /// Largest pairwise distance inside the cluster.
    pub spread: f64,
    /// Condition number of the cluster's eigenvector Gram matrix.
    pub gram_condition: f64,
    pub cluster_size: usize,
    pub center: C64,
    /// Smallest distance from the cluster centre to an eigenvalue outside it;
    /// infinite when the cluster holds the whole spectrum.
    pub separation: f64,
}

/// Single-linkage grouping of eigenvalues closer than `tol`.
pub fn clusters(values: &[C64; DIM], tol: f64) -> Vec<Vec<usize>> {
    let mut label: [usize; DIM] = [0, 1, 2, 3];
    for i in 0..DIM {
        for j in i + 1..DIM {
            if (values[i] - values[j]).norm() <= tol {
                let (from, to) = (label[j].max(label[i]), label[j].min(label[i]));
                for l in label.iter_mut() {
                    if *l == from {
                        *l = to;
                    }
                }
            }
        }
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for root in 0..DIM {
        let members: Vec<usize> = (0..DIM).filter(|&k| label[k] == root).collect();
        if !members.is_empty() {
            out.push(members);
        }
    }
    out
}

fn spread_of(values: &[C64], members: &[usize]) -> f64 {
    let mut s: f64 = 0.0;
    for (x, &i) in members.iter().enumerate() {
        for &j in &members[x + 1..] {
            s = s.max((values[i] - values[j]).norm());
        }
    }
    s
}

/// Max pairwise distance over the whole spectrum.
pub fn total_spread(values: &[C64; DIM]) -> f64 {
    spread_of(values, &[0, 1, 2, 3])
}

/// Metrics of the largest eigenvalue cluster (ties: tightest).
pub fn coalescence_metrics(m: &CMatrix4, tol: f64) -> Result<CoalescenceMetrics, EpError> {
    if !(tol >= 0.0) {
        return Err(EpError::Invalid("cluster tolerance must be non-negative"));
    }
    let d = eig_dense(m)?;
    let groups = clusters(&d.eigenvalues, tol);
    let best = groups
        .iter()
        .max_by(|a, b| {
            a.len()
                .cmp(&b.len())
                .then(spread_of(&d.eigenvalues, b).total_cmp(&spread_of(&d.eigenvalues, a)))
        })
        .expect("at least one cluster");
    let center = best.iter().map(|&k| d.eigenvalues[k]).sum::<C64>() / best.len() as f64;
    let separation = (0..DIM)
        .filter(|k| !best.contains(k))
        .map(|k| (d.eigenvalues[k] - center).norm())
        .fold(f64::INFINITY, f64::min);
    let gram_condition = if best.len() > 1 {
        spectral::gram_condition(&d.eigenvectors, best)?
    } else {
        1.0
    };
    Ok(CoalescenceMetrics {
        spread: spread_of(&d.eigenvalues, best),
        gram_condition,
        cluster_size: best.len(),
        center,
        separation,
    })
}

/// Smallest `k ≤ 4` with `‖(M − cI)^k‖ ≤ tol·‖M‖^k`, `c = tr M / 4`; `None`
/// when `M − cI` is not numerically nilpotent.
pub fn nilpotency_index(m: &CMatrix4, tol: f64) -> Option<usize> {
    let c = m.trace() / DIM as f64;
    let n = *m - CMatrix4::identity().scale(c);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut power = CMatrix4::identity();
    for k in 1..=DIM {
        power = power * n;
        if power.frobenius_norm() <= tol * scale.powi(k as i32) {
            return Some(k);
        }
    }
    None
}

/// Relative tolerance of the nilpotency test.
pub const NILPOTENCY_TOL: f64 = 1e-6;

/// Exceptional point of the `f = m·g`, `Δ₂ = 0` family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpLocation {
    pub g: f64,
    pub delta1: f64,
    /// Pump ratio `f / g`.
    pub ratio: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub phi: f64,
    /// Length of the longest Jordan chain.
    pub order: usize,
    pub metrics: CoalescenceMetrics,
}

impl EpLocation {
    pub fn params(&self) -> SystemParams {
        family_params(self.ratio, self.kappa, self.gamma, self.phi, self.g, self.delta1)
    }

    pub fn generator(&self) -> CMatrix4 {
        field_basis_unchecked(&self.params())
    }

    pub fn scaling(&self, offsets: &[f64]) -> Result<ScalingFit, EpError> {
        scaling_exponent(&self.params(), offsets)
    }
}

fn family_params(ratio: f64, kappa: f64, gamma: f64, phi: f64, g: f64, delta1: f64) -> SystemParams {
    SystemParams::symmetric(gamma, kappa, g, ratio * g, phi).with_detuning(delta1, 0.0)
}

fn locate(ratio: f64, kappa: f64, gamma: f64, phi: f64, g: f64, delta1: f64) -> Result<EpLocation, EpError> {
    let p = family_params(ratio, kappa, gamma, phi, g, delta1);
    p.validate()?;
    let l = field_basis_unchecked(&p);
    let scale = l.frobenius_norm();
    // clusters at an order-n point are smeared by roundoff to ~ε^{1/n}·‖L‖
    let metrics = coalescence_metrics(&l, 1e-2 * scale)?;
    let order = nilpotency_index(&l, NILPOTENCY_TOL).unwrap_or(1);
    Ok(EpLocation {
        g,
        delta1,
        ratio,
        kappa,
        gamma,
        phi,
        order,
        metrics,
    })
}

/// `(Re spread, Im spread)` of the field-basis spectrum.
fn axis_spreads(p: &SystemParams) -> Result<(f64, f64), EpError> {
    let v = eigenvalues(&field_basis_unchecked(p))?;
    let range = |f: fn(&C64) -> f64| {
        let hi = v.iter().map(f).fold(f64::MIN, f64::max);
        let lo = v.iter().map(f).fold(f64::MAX, f64::min);
        hi - lo
    };
    Ok((range(|z| z.re), range(|z| z.im)))
}

/// Second-order point of the `f = g`, `φ = 0`, `Δ = 0` family: bisection on
/// where the splitting turns from frequency (Im) to growth (Re).
pub fn find_ep2(kappa: f64, gamma: f64) -> Result<EpLocation, EpError> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(EpError::Invalid("kappa must be positive"));
    }
    let at = |g: f64| family_params(1.0, kappa, gamma, 0.0, g, 0.0);
    at(0.0).validate()?;
    let split = |g: f64| -> Result<bool, EpError> {
        let (re, im) = axis_spreads(&at(g))?;
        Ok(im > re)
    };

    let mut lo = 0.0;
    let mut hi = kappa;
    while split(hi)? {
        hi *= 2.0;
        if hi > 1e6 * kappa {
            return Err(EpError::Invalid("splitting does not close"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if split(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    locate(1.0, kappa, gamma, 0.0, 0.5 * (lo + hi), 0.0)
}

/// Rectangle in the `(g, Δ₁)` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub g: (f64, f64),
    pub delta1: (f64, f64),
    pub n: usize,
}

impl Default for SearchBox {
    fn default() -> Self {
        SearchBox {
            g: (0.05, 2.0),
            delta1: (0.0, 1.0),
            n: 200,
        }
    }
}

/// Spread below which a refined candidate is accepted as fourfold,
/// relative to `‖L‖`.
pub const EP4_ACCEPT: f64 = 1e-3;

/// Fourth-order point of the `f = m·g`, `Δ₂ = 0` family: coarse grid over
/// the box, then Nelder–Mead on the total eigenvalue spread.
pub fn find_ep4(ratio: f64, kappa: f64, gamma: f64, phi: f64, search: &SearchBox) -> Result<EpLocation, EpError> {
    if search.n < 2 || !(search.g.0 < search.g.1) || !(search.delta1.0 < search.delta1.1) {
        return Err(EpError::Invalid("search box must be non-empty with n >= 2"));
    }
    family_params(ratio, kappa, gamma, phi, search.g.0, search.delta1.0).validate()?;
    let inside = |x: [f64; 2]| (search.g.0..=search.g.1).contains(&x[0]) && (search.delta1.0..=search.delta1.1).contains(&x[1]);
    let objective = |x: [f64; 2]| -> f64 {
        if !inside(x) {
            return f64::INFINITY;
        }
        let p = family_params(ratio, kappa, gamma, phi, x[0], x[1]);
        let l = field_basis_unchecked(&p);
        match eigenvalues(&l) {
            Ok(v) => total_spread(&v) / l.frobenius_norm().max(f64::MIN_POSITIVE),
            Err(_) => f64::INFINITY,
        }
    };
    let gs = linspace(search.g.0, search.g.1, search.n);
    let ds = linspace(search.delta1.0, search.delta1.1, search.n);
    let (best_idx, _) = (0..gs.len() * ds.len())
        .into_par_iter()
        .map(|idx| (idx, objective([gs[idx / ds.len()], ds[idx % ds.len()]])))
        .reduce(
            || (usize::MAX, f64::INFINITY),
            |a, b| match a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)) {
                std::cmp::Ordering::Greater => b,
                _ => a,
            },
        );
    if best_idx == usize::MAX {
        return Err(EpError::Invalid("objective not finite anywhere in the box"));
    }
    let start = [gs[best_idx / ds.len()], ds[best_idx % ds.len()]];
    let step = [
        (search.g.1 - search.g.0) / (search.n - 1) as f64,
        (search.delta1.1 - search.delta1.0) / (search.n - 1) as f64,
    ];
    let x = nelder_mead(objective, start, step, 4000);
    let best = objective(x);
    if !(best <= EP4_ACCEPT) {
        return Err(EpError::NotFound {
            g: x[0],
            delta1: x[1],
            best_spread: best,
        });
    }
    locate(ratio, kappa, gamma, phi, x[0], x[1])
}

/// Derivative-free minimization in two dimensions.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: [f64; 2], max_iter: usize) -> [f64; 2] {
    let mut s = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut v = s.map(&f);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..max_iter {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        s = idx.map(|i| s[i]);
        v = idx.map(|i| v[i]);
        let size = (s[1][0] - s[0][0]).abs().max((s[2][0] - s[0][0]).abs()) + (s[1][1] - s[0][1]).abs().max((s[2][1] - s[0][1]).abs());
        if size <= 1e-15 * (1.0 + s[0][0].abs() + s[0][1].abs()) {
            break;
        }
        let centroid = lerp(s[0], s[1], 0.5);
        let reflected = lerp(centroid, s[2], -1.0);
        let fr = f(reflected);
        if fr < v[0] {
            let expanded = lerp(centroid, s[2], -2.0);
            let fe = f(expanded);
            if fe < fr {
                s[2] = expanded;
                v[2] = fe;
            } else {
                s[2] = reflected;
                v[2] = fr;
            }
        } else if fr < v[1] {
            s[2] = reflected;
            v[2] = fr;
        } else {
            let (contracted, fc) = if fr < v[2] {
                let c = lerp(centroid, s[2], -0.5);
                (c, f(c))
            } else {
                let c = lerp(centroid, s[2], 0.5);
                (c, f(c))
            };
            if fc < v[2].min(fr) {
                s[2] = contracted;
                v[2] = fc;
            } else {
                for k in 1..3 {
                    s[k] = lerp(s[0], s[k], 0.5);
                    v[k] = f(s[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| v[i].total_cmp(&v[j])).unwrap_or(0);
    s[best]
}

/// Analytic fourfold point of the `f = m·g`, `φ = 0`, `Δ₂ = 0` family.
///
/// With `K = L + γI` the characteristic polynomial is `s⁴ + B s² + C`, and the
/// fourfold root needs `B = C = 0`.
pub fn ep4_closed_form(ratio: f64, kappa: f64) -> Option<(f64, f64)> {
    let m = ratio;
    let k2 = kappa * kappa;
    let lin = 2.0 * k2 * (m * m - m);
    let disc = lin * lin + 4.0 * m.powi(4) * k2 * k2;
    let u = (lin + disc.sqrt()) / (2.0 * m.powi(4));
    let d2 = u * (m * m + 1.0) - 2.0 * k2;
    if !(u > 0.0) || d2 < -1e-14 {
        return None;
    }
    Some((u.sqrt(), d2.max(0.0).sqrt()))
}

/// Default `δΔ` grid: 13 logarithmic points on `[1e-6, 1e-3]`.
pub fn default_offsets() -> Vec<f64> {
    (0..13).map(|k| 10f64.powf(-6.0 + 0.25 * k as f64)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Usable `(δΔ, splitting)` pairs.
    pub points: Vec<(f64, f64)>,
    pub dropped: usize,
}

pub const MIN_SCALING_POINTS: usize = 4;

/// Fits `log splitting = slope·log δΔ + intercept` for `Δ₁ → Δ₁ + δΔ`.
///
/// A perturbed eigenvalue joins the cluster of its nearest unperturbed one;
/// the splitting is the largest intra-cluster distance.
pub fn scaling_exponent(p: &SystemParams, offsets: &[f64]) -> Result<ScalingFit, EpError> {
    p.validate()?;
    let base = eigenvalues(&field_basis_unchecked(p))?;
    let scale = field_basis_unchecked(p).frobenius_norm();
    let groups = clusters(&base, 1e-2 * scale);
    let base_spread = groups.iter().map(|c| spread_of(&base, c)).fold(0.0, f64::max);
    let floor = (10.0 * base_spread).max(1e3 * f64::EPSILON * scale);
    let mut group_of = [0usize; DIM];
    for (gi, c) in groups.iter().enumerate() {
        for &k in c {
            group_of[k] = gi;
        }
    }

    let mut points = Vec::new();
    let mut dropped = 0;
    for &d in offsets {
        if !(d > 0.0 && d.is_finite()) {
            return Err(EpError::Invalid("offsets must be positive"));
        }
        let q = p.with_detuning(p.delta1 + d, p.delta2);
        let v = eigenvalues(&field_basis_unchecked(&q))?;
        let mut members: Vec<Vec<C64>> = vec![Vec::new(); groups.len()];
        for z in v {
            let nearest = (0..DIM)
                .min_by(|&i, &j| (z - base[i]).norm().total_cmp(&(z - base[j]).norm()))
                .unwrap_or(0);
            members[group_of[nearest]].push(z);
        }
        let split = members
            .iter()
            .map(|c| {
                let idx: Vec<usize> = (0..c.len()).collect();
                spread_of(c, &idx)
            })
            .fold(0.0, f64::max);
        if split < floor {
            dropped += 1;
        } else {
            points.push((d, split));
        }
    }
    if points.len() < MIN_SCALING_POINTS {
        return Err(EpError::TooFewPoints {
            usable: points.len(),
            needed: MIN_SCALING_POINTS,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        points,
        dropped,
    })
}

/// Ordinary least squares; returns `(slope, intercept, R²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_degeneracy_is_diabolic() {
        let m = CMatrix4::diagonal([C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0)]);
        let c = coalescence_metrics(&m, 1e-9).unwrap();
        assert_eq!(c.cluster_size, 2);
        assert!((c.gram_condition - 1.0).abs() < 1e-12);
        assert_eq!(c.spread, 0.0);
    }

    #[test]
    fn fourfold_at_g_equals_kappa() {
        let p = SystemParams::symmetric(0.25, 1.0, 1.0, 1.0, 0.0);
        let c = coalescence_metrics(&field_basis_unchecked(&p), 1e-4).unwrap();
        assert_eq!(c.cluster_size, 4);
        assert!((c.center - C64::new(-0.25, 0.0)).norm() < 1e-7);
        assert!(c.gram_condition > 1e6);
    }

    #[test]
    fn two_pairs_below_coalescence() {
        let p = SystemParams::symmetric(0.25, 1.0, 0.9, 0.9, 0.0);
        let c = coalescence_metrics(&field_basis_unchecked(&p), 1e-6).unwrap();
        assert_eq!(c.cluster_size, 2);
        let gap = 2.0 * (1.0f64 - 0.81).sqrt();
        assert!((c.separation - gap).abs() < 1e-9);
    }

    #[test]
    fn clustering_links_transitively() {
        let v = [C64::new(0.0, 0.0), C64::new(0.9, 0.0), C64::new(1.8, 0.0), C64::new(5.0, 0.0)];
        let c = clusters(&v, 1.0);
        assert_eq!(c, vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn nilpotency_of_jordan_block() {
        let mut m = CMatrix4::identity().scale(C64::new(0.3, -0.1));
        m[(0, 1)] = C64::new(1.0, 0.0);
        m[(1, 2)] = C64::new(1.0, 0.0);
        assert_eq!(nilpotency_index(&m, 1e-12), Some(3));
        assert_eq!(nilpotency_index(&CMatrix4::identity(), 1e-12), Some(1));
        assert_eq!(nilpotency_index(&CMatrix4::diagonal([C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0), C64::new(4.0, 0.0)]), 1e-6), None);
    }

    #[test]
    fn closed_form_fourfold_point() {
        let (g, d) = ep4_closed_form(2.0, 1.0).unwrap();
        assert!((g - ((1.0 + 5f64.sqrt()) / 8.0).sqrt()).abs() < 1e-15);
        assert!((d - ((5.0 * 5f64.sqrt() - 11.0) / 8.0).sqrt()).abs() < 1e-15);
        let (g1, d1) = ep4_closed_form(1.0, 1.0).unwrap();
        assert!((g1 - 1.0).abs() < 1e-15 && d1 < 1e-7);
        let p = family_params(2.0, 1.0, 0.25, 0.0, g, d);
        assert_eq!(nilpotency_index(&field_basis_unchecked(&p), 1e-10), Some(4));
    }

    #[test]
    fn search_stays_inside_the_box() {
        let b = SearchBox {
            g: (1.5, 2.0),
            delta1: (0.5, 1.0),
            n: 10,
        };
        assert!(matches!(find_ep4(2.0, 1.0, 0.25, 0.0, &b), Err(EpError::NotFound { .. })));
    }

    #[test]
    fn linear_fit_exact() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.25 * x - 1.0).collect();
        let (s, i, r2) = linear_fit(&xs, &ys);
        assert!((s - 0.25).abs() < 1e-15 && (i + 1.0).abs() < 1e-15 && (r2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nelder_mead_quadratic() {
        let x = nelder_mead(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2), [0.0, 0.0], [0.1, 0.1], 2000);
        assert!((x[0] - 1.0).abs() < 1e-7 && (x[1] + 0.5).abs() < 1e-7);
    }

    #[test]
    fn default_grid() {
        let o = default_offsets();
        assert_eq!(o.len(), 13);
        assert!((o[0] - 1e-6).abs() < 1e-20 && (o[12] - 1e-3).abs() < 1e-15);
    }
}
