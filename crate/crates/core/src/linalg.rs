//! Fixed-size 4×4 dense matrices used throughout the crate.
//!
//! Every linear operator in the model acts on a four-component state, either
//! the field basis `(a, a*, b, b*)` or the quadrature basis `(X₁, Y₁, X₂, Y₂)`,
//! so a stack-allocated `[[_; 4]; 4]` is all we need.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const DIM: usize = 4;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Complex vector in C⁴.
pub type CVector4 = [C64; DIM];

/// Dense complex 4×4 matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMatrix4(pub [[C64; DIM]; DIM]);

/// Dense real 4×4 matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RMatrix4(pub [[f64; DIM]; DIM]);

impl CMatrix4 {
    pub fn zeros() -> Self {
        CMatrix4([[ZERO; DIM]; DIM])
    }

    pub fn identity() -> Self {
        Self::diagonal([ONE; DIM])
    }

    pub fn diagonal(d: [C64; DIM]) -> Self {
        let mut m = Self::zeros();
        for (k, value) in d.into_iter().enumerate() {
            m.0[k][k] = value;
        }
        m
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros();
        for r in 0..DIM {
            for c in 0..DIM {
                m.0[r][c] = f(r, c);
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        Self::from_fn(|r, c| self.0[r][c].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|r, c| self.0[c][r])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(|r, c| self.0[c][r].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_fn(|r, c| self.0[r][c] * s)
    }

    pub fn trace(&self) -> C64 {
        (0..DIM).map(|k| self.0[k][k]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn mul_vec(&self, v: &CVector4) -> CVector4 {
        let mut out = [ZERO; DIM];
        for (r, row) in self.0.iter().enumerate() {
            out[r] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Conjugates by the permutation `perm`: returns `P A Pᵀ` where
    /// `(P A Pᵀ)[r][c] = A[perm[r]][perm[c]]`.
    pub fn permuted(&self, perm: [usize; DIM]) -> Self {
        Self::from_fn(|r, c| self.0[perm[r]][perm[c]])
    }

    /// Inverse by LU with partial pivoting; `None` if a pivot vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let mut a = self.0;
        let mut inv = Self::identity().0;
        for col in 0..DIM {
            let pivot = (col..DIM)
                .max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm()))
                .unwrap_or(col);
            if a[pivot][col].norm() == 0.0 || !a[pivot][col].norm().is_finite() {
                return None;
            }
            a.swap(col, pivot);
            inv.swap(col, pivot);
            let p = a[col][col];
            for c in 0..DIM {
                a[col][c] /= p;
                inv[col][c] /= p;
            }
            for r in 0..DIM {
                if r == col {
                    continue;
                }
                let factor = a[r][col];
                if factor == ZERO {
                    continue;
                }
                for c in 0..DIM {
                    let ac = a[col][c];
                    let ic = inv[col][c];
                    a[r][c] -= factor * ac;
                    inv[r][c] -= factor * ic;
                }
            }
        }
        Some(CMatrix4(inv))
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut out = Self::identity();
        for _ in 0..k {
            out = out * *self;
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix4 {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix4 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.0[r][c]
    }
}

impl Mul for CMatrix4 {
    type Output = CMatrix4;
    fn mul(self, rhs: CMatrix4) -> CMatrix4 {
        CMatrix4::from_fn(|r, c| (0..DIM).map(|k| self.0[r][k] * rhs.0[k][c]).sum())
    }
}

impl Add for CMatrix4 {
    type Output = CMatrix4;
    fn add(self, rhs: CMatrix4) -> CMatrix4 {
        CMatrix4::from_fn(|r, c| self.0[r][c] + rhs.0[r][c])
    }
}

impl Sub for CMatrix4 {
    type Output = CMatrix4;
    fn sub(self, rhs: CMatrix4) -> CMatrix4 {
        CMatrix4::from_fn(|r, c| self.0[r][c] - rhs.0[r][c])
    }
}

impl Neg for CMatrix4 {
    type Output = CMatrix4;
    fn neg(self) -> CMatrix4 {
        CMatrix4::from_fn(|r, c| -self.0[r][c])
    }
}

impl RMatrix4 {
    pub fn zeros() -> Self {
        RMatrix4([[0.0; DIM]; DIM])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for k in 0..DIM {
            m.0[k][k] = 1.0;
        }
        m
    }

    pub fn to_complex(&self) -> CMatrix4 {
        CMatrix4::from_fn(|r, c| C64::new(self.0[r][c], 0.0))
    }

    pub fn trace(&self) -> f64 {
        (0..DIM).map(|k| self.0[k][k]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn mul_vec(&self, v: &[f64; DIM]) -> [f64; DIM] {
        let mut out = [0.0; DIM];
        for (r, row) in self.0.iter().enumerate() {
            out[r] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn max_abs_diff(&self, other: &RMatrix4) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let mut a = self.0;
        let mut det = 1.0;
        for col in 0..DIM {
            let pivot = (col..DIM)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap_or(col);
            if a[pivot][col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                a.swap(col, pivot);
                det = -det;
            }
            det *= a[col][col];
            for r in col + 1..DIM {
                let factor = a[r][col] / a[col][col];
                for c in col..DIM {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
        det
    }
}

impl Index<(usize, usize)> for RMatrix4 {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for RMatrix4 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.0[r][c]
    }
}

impl Mul for RMatrix4 {
    type Output = RMatrix4;
    fn mul(self, rhs: RMatrix4) -> RMatrix4 {
        let mut out = RMatrix4::zeros();
        for r in 0..DIM {
            for c in 0..DIM {
                out.0[r][c] = (0..DIM).map(|k| self.0[r][k] * rhs.0[k][c]).sum();
            }
        }
        out
    }
}

pub fn vec_norm(v: &CVector4) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(u: &CVector4, v: &CVector4) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMatrix4 {
        CMatrix4::from_fn(|r, c| C64::new((r * 3 + c) as f64 * 0.37 - 1.0, (r as f64 - c as f64) * 0.21 + 0.05))
            + CMatrix4::identity().scale(C64::new(2.0, 0.0))
    }

    #[test]
    fn inverse_roundtrip() {
        let m = sample();
        let inv = m.inverse().unwrap();
        let err = (m * inv - CMatrix4::identity()).frobenius_norm();
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn singular_inverse_is_none() {
        let mut m = CMatrix4::identity();
        m[(2, 2)] = ZERO;
        assert!(m.inverse().is_none());
    }

    #[test]
    fn real_determinant() {
        let mut m = RMatrix4::identity();
        m[(0, 0)] = 2.0;
        m[(1, 2)] = 5.0;
        m[(3, 3)] = -3.0;
        assert!((m.determinant() + 6.0).abs() < 1e-14);
        let mut p = RMatrix4::zeros();
        p[(0, 1)] = 1.0;
        p[(1, 0)] = 1.0;
        p[(2, 2)] = 1.0;
        p[(3, 3)] = 1.0;
        assert!((p.determinant() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn permutation_conjugation() {
        let m = sample();
        let swapped = m.permuted([1, 0, 3, 2]);
        assert_eq!(swapped[(0, 0)], m[(1, 1)]);
        assert_eq!(swapped[(0, 2)], m[(1, 3)]);
        assert_eq!(swapped.permuted([1, 0, 3, 2]), m);
    }
}
