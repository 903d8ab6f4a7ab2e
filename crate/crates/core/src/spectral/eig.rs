//! Complex Schur decomposition of a 4×4 matrix by Householder reduction to
//! Hessenberg form followed by single-shift QR with Wilkinson shifts, and
//! eigenvectors by back substitution on the triangular factor.

use crate::linalg::{CMatrix4, C64, DIM, ONE, ZERO};

const MAX_ITERATIONS_PER_EIGENVALUE: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Schur {
    /// Unitary factor, `A = Z T Zᴴ`.
    pub z: CMatrix4,
    /// Upper triangular factor.
    pub t: CMatrix4,
}

/// Returns `None` when the QR sweep fails to deflate within the budget.
pub(crate) fn schur(a: &CMatrix4) -> Option<Schur> {
    let (mut h, mut z) = hessenberg(a);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;

    let mut hi = DIM - 1;
    let mut iterations = 0usize;
    let mut since_deflation = 0usize;
    while hi > 0 {
        // find the start of the unreduced block ending at `hi`
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let local = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            // the norm-wise test is backward stable and keeps nearly
            // defective blocks with small entries from stalling
            if sub <= eps * local || sub <= eps * scale || sub <= f64::MIN_POSITIVE {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        iterations += 1;
        since_deflation += 1;
        if iterations > MAX_ITERATIONS_PER_EIGENVALUE * DIM {
            return None;
        }

        let shift = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.25 * h[(hi, hi - 1)].norm())
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_sweep(&mut h, &mut z, lo, hi, shift);
    }

    // clear the strictly lower part left by roundoff
    for r in 1..DIM {
        for c in 0..r {
            h[(r, c)] = ZERO;
        }
    }
    Some(Schur { z, t: h })
}

/// Eigenvalue of the trailing 2×2 block closest to its last diagonal entry.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Givens rotation `[c s; −s̄ c]` (c real) with `G·[x; y] = [r; 0]`.
fn givens(x: C64, y: C64) -> (f64, C64) {
    let ny = y.norm();
    if ny == 0.0 {
        return (1.0, ZERO);
    }
    let nx = x.norm();
    if nx == 0.0 {
        return (0.0, y.conj() / ny);
    }
    let r = nx.hypot(ny);
    let c = nx / r;
    let s = (x / nx) * y.conj() / r;
    (c, s)
}

fn rotate_rows(m: &mut CMatrix4, i: usize, j: usize, c: f64, s: C64, cols: std::ops::Range<usize>) {
    for col in cols {
        let x = m[(i, col)];
        let y = m[(j, col)];
        m[(i, col)] = x * c + s * y;
        m[(j, col)] = -s.conj() * x + y * c;
    }
}

/// Right-multiplies columns `i`, `j` of `m` by the adjoint rotation.
fn rotate_cols(m: &mut CMatrix4, i: usize, j: usize, c: f64, s: C64, rows: std::ops::Range<usize>) {
    for row in rows {
        let x = m[(row, i)];
        let y = m[(row, j)];
        m[(row, i)] = x * c + y * s.conj();
        m[(row, j)] = -x * s + y * c;
    }
}

/// One explicit shifted QR step on the active window `lo..=hi`.
fn qr_sweep(h: &mut CMatrix4, z: &mut CMatrix4, lo: usize, hi: usize, shift: C64) {
    for k in lo..=hi {
        h[(k, k)] -= shift;
    }
    let mut rotations = [(1.0, ZERO); DIM];
    for k in lo..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        rotations[k] = (c, s);
        rotate_rows(h, k, k + 1, c, s, k..DIM);
        h[(k + 1, k)] = ZERO;
    }
    for k in lo..hi {
        let (c, s) = rotations[k];
        rotate_cols(h, k, k + 1, c, s, 0..(k + 2).min(hi + 1));
        rotate_cols(z, k, k + 1, c, s, 0..DIM);
    }
    for k in lo..=hi {
        h[(k, k)] += shift;
    }
}

/// Householder reduction to upper Hessenberg form, `A = Z H Zᴴ`.
fn hessenberg(a: &CMatrix4) -> (CMatrix4, CMatrix4) {
    let mut h = *a;
    let mut z = CMatrix4::identity();
    for k in 0..DIM - 2 {
        let mut x = [ZERO; DIM];
        let mut norm2 = 0.0;
        for r in k + 1..DIM {
            x[r] = h[(r, k)];
            norm2 += x[r].norm_sqr();
        }
        let tail: f64 = (k + 2..DIM).map(|r| x[r].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let alpha_norm = norm2.sqrt();
        let lead = x[k + 1];
        let phase = if lead.norm() == 0.0 { ONE } else { lead / lead.norm() };
        // v = x + e^{i arg x₀}‖x‖ e₀ avoids cancellation
        let mut v = x;
        v[k + 1] = lead + phase * alpha_norm;
        let vnorm2: f64 = (k + 1..DIM).map(|r| v[r].norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // H ← (I − β v vᴴ) H
        for col in 0..DIM {
            let dot: C64 = (k + 1..DIM).map(|r| v[r].conj() * h[(r, col)]).sum();
            for r in k + 1..DIM {
                h[(r, col)] -= v[r] * dot * beta;
            }
        }
        // H ← H (I − β v vᴴ), Z ← Z (I − β v vᴴ)
        for m in [&mut h, &mut z] {
            for row in 0..DIM {
                let dot: C64 = (k + 1..DIM).map(|c| m[(row, c)] * v[c]).sum();
                for c in k + 1..DIM {
                    m[(row, c)] -= dot * v[c].conj() * beta;
                }
            }
        }
        for r in k + 2..DIM {
            h[(r, k)] = ZERO;
        }
    }
    (h, z)
}

/// Unit eigenvectors of the Schur form, mapped back by `Z`.
///
/// Near-singular diagonal differences are replaced by `ε‖T‖` so defective
/// and nearly defective matrices still yield small residuals.
pub(crate) fn eigenvectors(s: &Schur) -> [[C64; DIM]; DIM] {
    let t = &s.t;
    let small = (f64::EPSILON * t.frobenius_norm()).max(f64::MIN_POSITIVE);
    let mut out = [[ZERO; DIM]; DIM];
    for k in 0..DIM {
        let lambda = t[(k, k)];
        let mut y = [ZERO; DIM];
        y[k] = ONE;
        for j in (0..k).rev() {
            let rhs: C64 = (j + 1..=k).map(|l| t[(j, l)] * y[l]).sum();
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = C64::new(small, 0.0);
            }
            y[j] = -rhs / denom;
        }
        let mut v = s.z.mul_vec(&y);
        let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in v.iter_mut() {
            *c /= n;
        }
        out[k] = v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schur_reconstructs_input() {
        let a = CMatrix4::from_fn(|r, c| C64::new((r as f64 + 1.0) * (c as f64 - 1.5), (r * c) as f64 * 0.3 - 0.4));
        let s = schur(&a).unwrap();
        let back = s.z * s.t * s.z.adjoint();
        assert!((back - a).frobenius_norm() < 1e-13 * a.frobenius_norm());
        let zz = s.z * s.z.adjoint();
        assert!((zz - CMatrix4::identity()).frobenius_norm() < 1e-14);
        for r in 1..DIM {
            for c in 0..r {
                assert_eq!(s.t[(r, c)], ZERO);
            }
        }
    }

    #[test]
    fn jordan_block_converges() {
        let mut a = CMatrix4::identity().scale(C64::new(0.0, -0.25));
        for k in 0..3 {
            a[(k, k + 1)] = ONE;
        }
        let s = schur(&a).unwrap();
        for k in 0..DIM {
            assert!((s.t[(k, k)] - C64::new(0.0, -0.25)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix() {
        let s = schur(&CMatrix4::zeros()).unwrap();
        assert_eq!(s.t, CMatrix4::zeros());
    }

    #[test]
    fn small_nearly_defective_block_converges() {
        // generator near a second-order point with all rates scaled by 0.1
        let (gamma, k, g) = (0.019658133670524022, 0.1, 0.1 * (1.0 - 1e-9));
        let i = C64::new(0.0, 1.0);
        let a = CMatrix4([
            [C64::new(-gamma, 0.0), C64::new(g, 0.0), i * k, ZERO],
            [C64::new(g, 0.0), C64::new(-gamma, 0.0), ZERO, -i * k],
            [i * k, ZERO, C64::new(-gamma, 0.0), C64::new(g, 0.0)],
            [ZERO, -i * k, C64::new(g, 0.0), C64::new(-gamma, 0.0)],
        ]);
        let s = schur(&a).unwrap();
        let back = s.z * s.t * s.z.adjoint();
        assert!((back - a).frobenius_norm() < 1e-13 * a.frobenius_norm());
    }
}
