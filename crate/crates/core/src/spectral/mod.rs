//! Dense eigensolver, symmetry diagnostics, growth rates and threshold search.

mod eig;

use std::cmp::Ordering;
use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CMatrix4, CVector4, C64, DIM, I, ZERO};
use crate::model::{field_basis_unchecked, linspace, ModelError, SweepVariable, SystemParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("QR iteration did not converge")]
    NoConvergence,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid sweep: {0}")]
    InvalidSweep(&'static str),
}

/// Eigenpairs of a 4×4 complex matrix, sorted by (Re, Im).
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: [C64; DIM],
    /// Unit-norm eigenvectors; `eigenvectors[k]` pairs with `eigenvalues[k]`.
    pub eigenvectors: [CVector4; DIM],
    /// `‖M v − ν v‖` per pair.
    pub residuals: [f64; DIM],
    /// Condition number of the eigenvector Gram matrix `Vᴴ V`; diverges at
    /// defective points.
    pub gram_condition: f64,
}

impl EigenDecomposition {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Matrix whose columns are the eigenvectors.
    pub fn vector_matrix(&self) -> CMatrix4 {
        CMatrix4::from_fn(|r, c| self.eigenvectors[c][r])
    }
}

fn by_re_then_im(a: &C64, b: &C64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Eigenvalues only, sorted by (Re, Im).
pub fn eigenvalues(m: &CMatrix4) -> Result<[C64; DIM], SpectralError> {
    if !m.is_finite() {
        return Err(SpectralError::NonFinite);
    }
    let s = eig::schur(m).ok_or(SpectralError::NoConvergence)?;
    let mut values = [ZERO; DIM];
    for (k, v) in values.iter_mut().enumerate() {
        *v = s.t[(k, k)];
    }
    values.sort_by(by_re_then_im);
    Ok(values)
}

/// Full eigendecomposition of a general (possibly defective) complex 4×4.
pub fn eig_dense(m: &CMatrix4) -> Result<EigenDecomposition, SpectralError> {
    if !m.is_finite() {
        return Err(SpectralError::NonFinite);
    }
    let s = eig::schur(m).ok_or(SpectralError::NoConvergence)?;
    let vectors = eig::eigenvectors(&s);
    let mut order: [usize; DIM] = [0, 1, 2, 3];
    order.sort_by(|&x, &y| by_re_then_im(&s.t[(x, x)], &s.t[(y, y)]));

    let mut eigenvalues = [ZERO; DIM];
    let mut eigenvectors = [[ZERO; DIM]; DIM];
    let mut residuals = [0.0; DIM];
    for (slot, &k) in order.iter().enumerate() {
        let nu = s.t[(k, k)];
        let v = vectors[k];
        let mv = m.mul_vec(&v);
        residuals[slot] = mv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - nu * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        eigenvalues[slot] = nu;
        eigenvectors[slot] = v;
    }
    let gram_condition = gram_condition(&eigenvectors, &[0, 1, 2, 3])?;
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        residuals,
        gram_condition,
    })
}

/// Condition number of the Gram matrix of the selected unit vectors.
///
/// The Gram block is padded with the identity to 4×4; since its diagonal is
/// one, its extreme eigenvalues straddle 1 and the padding leaves the
/// condition number unchanged.
pub fn gram_condition(vectors: &[CVector4; DIM], selection: &[usize]) -> Result<f64, SpectralError> {
    let mut gram = CMatrix4::identity();
    for (r, &i) in selection.iter().enumerate() {
        for (c, &j) in selection.iter().enumerate() {
            gram[(r, c)] = crate::linalg::inner(&vectors[i], &vectors[j]);
        }
    }
    let values = eigenvalues(&gram)?;
    let max = values.iter().map(|z| z.re).fold(f64::MIN, f64::max);
    let min = values.iter().map(|z| z.re).fold(f64::MAX, f64::min);
    let floor = f64::EPSILON * max;
    Ok(max / min.max(floor))
}

/// Parity `P₁P₂`: swaps indices (1↔2) and (3↔4).
pub const PARITY: [usize; DIM] = [1, 0, 3, 2];

/// `‖P M* P + M‖_F`; zero certifies spectral anti-PT symmetry.
pub fn check_anti_pt(m: &CMatrix4) -> f64 {
    (m.conj().permuted(PARITY) + *m).frobenius_norm()
}

/// The unitary that maps the sideband problem to a PT-symmetric dimer of
/// signal–idler superpositions.
pub fn pt_unitary() -> CMatrix4 {
    let s = FRAC_1_SQRT_2;
    let rows = [
        [1.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, -1.0],
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0],
    ];
    CMatrix4::from_fn(|r, c| C64::new(rows[r][c] * s, 0.0))
}

/// `𝕌 m 𝕌†`.
pub fn map_to_pt(m: &CMatrix4) -> CMatrix4 {
    let u = pt_unitary();
    u * *m * u.adjoint()
}

/// Field-basis generator `L` expressed in the sideband frame, `M = i L`.
pub fn to_sideband_frame(l: &CMatrix4) -> CMatrix4 {
    l.scale(I)
}

/// Growth rates `λ_I` (descending) with their spectral splittings `λ_R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRates {
    pub rates: [f64; DIM],
    pub splittings: [f64; DIM],
}

impl GrowthRates {
    pub fn max(&self) -> f64 {
        self.rates[0]
    }
}

/// Real parts of the field-basis spectrum, descending.
///
/// An exponent `s = λ_I − i λ_R` contributes `λ_I = Re s` and `λ_R = −Im s`.
pub fn growth_rates(p: &SystemParams) -> Result<GrowthRates, SpectralError> {
    p.validate()?;
    let mut values = eigenvalues(&field_basis_unchecked(p))?;
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    let mut rates = [0.0; DIM];
    let mut splittings = [0.0; DIM];
    for (k, s) in values.iter().enumerate() {
        rates[k] = s.re;
        splittings[k] = -s.im;
    }
    Ok(GrowthRates { rates, splittings })
}

fn max_growth(p: &SystemParams) -> Result<f64, SpectralError> {
    eigenvalues(&field_basis_unchecked(p)).map(|v| v.iter().map(|z| z.re).fold(f64::MIN, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingKind {
    /// `max λ_I` goes from negative to positive with increasing parameter.
    Rising,
    /// Oscillation self-terminates.
    Falling,
}

impl CrossingKind {
    pub fn name(self) -> &'static str {
        match self {
            CrossingKind::Rising => "rising",
            CrossingKind::Falling => "falling",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub value: f64,
    pub kind: CrossingKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub variable: SweepVariable,
    pub crossings: Vec<Crossing>,
}

impl ThresholdReport {
    pub fn first_rising(&self) -> Option<f64> {
        self.crossings
            .iter()
            .find(|c| c.kind == CrossingKind::Rising)
            .map(|c| c.value)
    }
}

/// Number of pre-scan points used to bracket threshold crossings.
pub const THRESHOLD_PRESCAN: usize = 200;

/// Locate every sign change of `max λ_I` over `range` by a 200-point scan
/// followed by bisection to `tolerance`.
pub fn find_threshold(
    p: &SystemParams,
    sweep: SweepVariable,
    range: (f64, f64),
    tolerance: f64,
) -> Result<ThresholdReport, SpectralError> {
    p.validate()?;
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(SpectralError::InvalidSweep("range must be finite with lo < hi"));
    }
    if !(tolerance > 0.0) {
        return Err(SpectralError::InvalidSweep("tolerance must be positive"));
    }
    let rate = |x: f64| -> Result<f64, SpectralError> {
        let q = sweep.apply(p, x);
        q.validate()?;
        max_growth(&q)
    };
    let grid = linspace(lo, hi, THRESHOLD_PRESCAN);
    let values = grid.iter().map(|&x| rate(x)).collect::<Result<Vec<_>, _>>()?;

    let mut crossings = Vec::new();
    for k in 0..grid.len() - 1 {
        let (ya, yb) = (values[k], values[k + 1]);
        let kind = match (ya > 0.0, yb > 0.0) {
            (false, true) => CrossingKind::Rising,
            (true, false) => CrossingKind::Falling,
            _ => continue,
        };
        let (mut a, mut b) = (grid[k], grid[k + 1]);
        let a_positive = ya > 0.0;
        while b - a > tolerance {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if (rate(mid)? > 0.0) == a_positive {
                a = mid;
            } else {
                b = mid;
            }
        }
        crossings.push(Crossing {
            value: 0.5 * (a + b),
            kind,
        });
    }
    Ok(ThresholdReport {
        variable: sweep,
        crossings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{matrix_field_basis, matrix_nondegenerate, matrix_quadrature};

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    /// Minimum over all pairings of the largest pairwise distance.
    fn multiset_distance(a: &[C64; 4], b: &[C64; 4]) -> f64 {
        let mut best = f64::INFINITY;
        let mut perm = [0, 1, 2, 3];
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

    #[test]
    fn identity_spectrum() {
        let d = eig_dense(&CMatrix4::identity()).unwrap();
        for v in d.eigenvalues {
            assert!(close(v, C64::new(1.0, 0.0), 1e-15));
        }
        assert!((d.gram_condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_spectrum() {
        let m = CMatrix4::diagonal([C64::new(1.0, 0.0), C64::new(0.0, 2.0), C64::new(-3.0, 0.0), ZERO]);
        let d = eig_dense(&m).unwrap();
        let expect = [C64::new(-3.0, 0.0), ZERO, C64::new(0.0, 2.0), C64::new(1.0, 0.0)];
        assert_eq!(multiset_distance(&d.eigenvalues, &expect), 0.0);
        assert_eq!(d.eigenvalues[0], C64::new(-3.0, 0.0));
    }

    #[test]
    fn sideband_matrix_block_formula() {
        let p = SystemParams::symmetric(0.25, 1.0, 0.5, 0.5, 0.0);
        let d = eig_dense(&matrix_nondegenerate(&p).unwrap()).unwrap();
        let r = 0.75f64.sqrt();
        let expect = [
            C64::new(-r, -0.25),
            C64::new(-r, -0.25),
            C64::new(r, -0.25),
            C64::new(r, -0.25),
        ];
        assert!(multiset_distance(&d.eigenvalues, &expect) < 1e-12);
        assert!(d.max_residual() < 1e-13);
    }

    #[test]
    fn coupling_only_limit() {
        let p = SystemParams::symmetric(0.25, 1.0, 0.0, 0.0, 0.0);
        let v = eigenvalues(&matrix_nondegenerate(&p).unwrap()).unwrap();
        let expect = [
            C64::new(-1.0, -0.25),
            C64::new(-1.0, -0.25),
            C64::new(1.0, -0.25),
            C64::new(1.0, -0.25),
        ];
        assert!(multiset_distance(&v, &expect) < 1e-12);
    }

    #[test]
    fn fourfold_point_at_g_equals_kappa() {
        let p = SystemParams::symmetric(0.25, 1.0, 1.0, 1.0, 0.0);
        let d = eig_dense(&matrix_nondegenerate(&p).unwrap()).unwrap();
        for v in d.eigenvalues {
            assert!(close(v, C64::new(0.0, -0.25), 1e-7), "{v}");
        }
        assert!(d.max_residual() < 1e-8);
        assert!(d.gram_condition > 1e6, "{}", d.gram_condition);
    }

    #[test]
    fn quadrature_block_formula() {
        let p = SystemParams::symmetric(0.25, 1.0, 1.2, 1.2, 0.0);
        let q = matrix_quadrature(&p).unwrap().to_complex();
        let v = eigenvalues(&q).unwrap();
        let r = 0.44f64.sqrt();
        assert!((v[3].re - (-0.25 + r)).abs() < 1e-12);
        assert!((v[3].re - 0.41332495807107994).abs() < 1e-12);
        let expect = [
            C64::new(-0.25 - r, 0.0),
            C64::new(-0.25 - r, 0.0),
            C64::new(-0.25 + r, 0.0),
            C64::new(-0.25 + r, 0.0),
        ];
        assert!(multiset_distance(&v, &expect) < 1e-12);
    }

    #[test]
    fn quadrature_pure_coupling_rotates() {
        let p = SystemParams::symmetric(0.25, 1.0, 0.0, 0.0, 0.0);
        let v = eigenvalues(&matrix_quadrature(&p).unwrap().to_complex()).unwrap();
        let expect = [
            C64::new(-0.25, -1.0),
            C64::new(-0.25, -1.0),
            C64::new(-0.25, 1.0),
            C64::new(-0.25, 1.0),
        ];
        assert!(multiset_distance(&v, &expect) < 1e-12);
    }

    #[test]
    fn anti_pt_identity_fails_symmetry() {
        assert!((check_anti_pt(&CMatrix4::identity()) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn sideband_matrix_is_anti_pt() {
        let p = SystemParams::symmetric(0.25, 1.0, 0.6, 0.9, 0.7);
        let m = to_sideband_frame(&matrix_field_basis(&p).unwrap());
        assert!(check_anti_pt(&m) < 1e-15);
        let mut broken = m;
        broken[(0, 2)] += C64::new(0.1, 0.0);
        assert!((check_anti_pt(&broken) - 0.1 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pt_unitary_is_unitary() {
        let u = pt_unitary();
        assert!((u * u.adjoint() - CMatrix4::identity()).frobenius_norm() < 1e-15);
    }

    #[test]
    fn pt_map_puts_gain_on_diagonal() {
        // direct multiplication: for φ = 0, f = g the superpositions A ∓ B*
        // acquire −iγ ∓ ig on the diagonal
        let p = SystemParams::symmetric(0.25, 1.0, 0.6, 0.6, 0.0);
        let h = map_to_pt(&matrix_nondegenerate(&p).unwrap());
        let diag: Vec<C64> = (0..4).map(|k| h[(k, k)]).collect();
        assert!(close(diag[0], C64::new(0.0, -0.25 - 0.6), 1e-15));
        assert!(close(diag[1], C64::new(0.0, -0.25 - 0.6), 1e-15));
        assert!(close(diag[2], C64::new(0.0, -0.25 + 0.6), 1e-15));
        assert!(close(diag[3], C64::new(0.0, -0.25 + 0.6), 1e-15));
    }

    #[test]
    fn growth_rates_passive() {
        let p = SystemParams::symmetric(0.3, 1.0, 0.0, 0.0, 0.0);
        let r = growth_rates(&p).unwrap();
        for x in r.rates {
            assert!((x + 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn growth_rates_above_threshold() {
        let p = SystemParams::symmetric(0.25, 1.0, 1.2, 1.2, 0.0);
        let r = growth_rates(&p).unwrap();
        assert!((r.max() - (-0.25 + 0.44f64.sqrt())).abs() < 1e-12);
        let g_th = (0.25f64 * 0.25 + 1.0).sqrt();
        let at = growth_rates(&SystemParams::symmetric(0.25, 1.0, g_th, g_th, 0.0)).unwrap();
        assert!(at.max().abs() < 1e-12);
    }

    #[test]
    fn threshold_tied_gain() {
        let p = SystemParams::symmetric(0.25, 1.0, 0.0, 0.0, 0.0);
        let rep = find_threshold(&p, SweepVariable::TIED_GAIN, (0.0, 2.0), 1e-10).unwrap();
        assert_eq!(rep.crossings.len(), 1);
        assert_eq!(rep.crossings[0].kind, CrossingKind::Rising);
        assert!((rep.crossings[0].value - 1.0625f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn threshold_single_opo() {
        let p = SystemParams::symmetric(0.25, 0.0, 0.0, 0.0, 0.0);
        let rep = find_threshold(&p, SweepVariable::G, (0.0, 1.0), 1e-10).unwrap();
        assert_eq!(rep.crossings.len(), 1);
        assert!((rep.crossings[0].value - 0.25).abs() < 1e-8);
    }

    #[test]
    fn threshold_empty_when_no_crossing() {
        let p = SystemParams::symmetric(0.25, 1.0, 0.0, 0.0, 0.0);
        let rep = find_threshold(&p, SweepVariable::TIED_GAIN, (0.0, 0.5), 1e-10).unwrap();
        assert!(rep.crossings.is_empty());
    }

    #[test]
    fn threshold_rejects_bad_range() {
        let p = SystemParams::default();
        assert!(find_threshold(&p, SweepVariable::G, (1.0, 0.0), 1e-10).is_err());
        assert!(find_threshold(&p, SweepVariable::G, (0.0, f64::NAN), 1e-10).is_err());
    }
}
