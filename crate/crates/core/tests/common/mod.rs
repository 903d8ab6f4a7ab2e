#![allow(dead_code)]

use para_ep::linalg::CVector4;
use para_ep::{CMatrix4, SystemParams, C64};
use proptest::prelude::*;
use rand::Rng;

/// Optimal-matching distance between two 4-element multisets.
pub fn multiset_distance(a: &[C64; 4], b: &[C64; 4]) -> f64 {
    let mut best = f64::INFINITY;
    let mut perm = [0usize, 1, 2, 3];
    permute(&mut perm, 0, &mut |p| {
        let d = (0..4).map(|k| (a[k] - b[p[k]]).norm()).fold(0.0, f64::max);
        best = best.min(d);
    });
    best
}

fn permute(p: &mut [usize; 4], k: usize, f: &mut impl FnMut(&[usize; 4])) {
    if k == 4 {
        f(p);
        return;
    }
    for i in k..4 {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

pub fn random_matrix(rng: &mut impl Rng, scale: f64) -> CMatrix4 {
    CMatrix4::from_fn(|_, _| C64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
}

/// Gram–Schmidt orthonormalization of a random complex matrix.
pub fn random_unitary(rng: &mut impl Rng) -> CMatrix4 {
    let mut cols: Vec<CVector4> = Vec::new();
    while cols.len() < 4 {
        let mut v: CVector4 = std::array::from_fn(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        for u in &cols {
            let c: C64 = (0..4).map(|k| u[k].conj() * v[k]).sum();
            for k in 0..4 {
                v[k] -= c * u[k];
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-3 {
            cols.push(v.map(|z| z / n));
        }
    }
    CMatrix4::from_fn(|r, c| cols[c][r])
}

/// Valid symmetric-loss parameters without detuning or saturation.
pub fn params_strategy() -> impl Strategy<Value = SystemParams> {
    (0.0..2.0f64, 0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64, -std::f64::consts::PI..std::f64::consts::PI)
        .prop_map(|(gamma, kappa, g, f, phi)| SystemParams::symmetric(gamma, kappa, g, f, phi))
}
