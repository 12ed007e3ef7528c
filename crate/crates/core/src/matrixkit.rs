//! Dense symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Relative eigenvalue floor for positive-definiteness checks.
pub const PD_TOL: f64 = 1e-10;

/// A real symmetric matrix. Construction averages the input with its
/// transpose after checking it was symmetric to begin with.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(Mat);

/// A symmetric positive definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix(Mat);

impl SymMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 * scale.max(1.0) {
            return Err(Error::Input(format!("matrix is not symmetric (asymmetry {asym:e})")));
        }
        Ok(SymMatrix(symmetrize(&m)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        SymMatrix::new(from_rows(rows)?)
    }

    pub fn identity(m: usize) -> Self {
        SymMatrix(Mat::identity(m, m))
    }

    pub fn zeros(m: usize) -> Self {
        SymMatrix(Mat::zeros(m, m))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(Mat::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eigenvalues(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Accepts positive semi-definite matrices, including zero, which is how
    /// noncentrality parameters are validated.
    pub fn check_psd(&self, name: &str) -> Result<()> {
        let ev = self.eigenvalues();
        let top = ev.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let floor = -PD_TOL * top.max(1.0);
        if ev.first().is_some_and(|&e| e < floor) {
            return Err(Error::NotPositiveSemiDefinite(format!(
                "{name} has eigenvalue {:e}",
                ev[0]
            )));
        }
        Ok(())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        to_rows(&self.0)
    }
}

impl SpdMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        let s = SymMatrix::new(m)?;
        if !is_pd(s.as_mat()) {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {:e}",
                s.eigenvalues().first().copied().unwrap_or(f64::NAN)
            )));
        }
        Ok(SpdMatrix(s.0))
    }

    pub fn identity(m: usize) -> Self {
        SpdMatrix(Mat::identity(m, m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    pub fn as_sym(&self) -> SymMatrix {
        SymMatrix(self.0.clone())
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("matrix rows must form a square array".into()));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Positive definiteness with the floor relative to the spectral radius.
pub fn is_pd(m: &Mat) -> bool {
    let ev = sym_eigenvalues(m);
    let top = ev.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    !ev.is_empty() && top > 0.0 && ev[0] > PD_TOL * top
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
pub fn sym_apply(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = eig.eigenvalues.map(f);
    let v = &eig.eigenvectors;
    symmetrize(&(v * Mat::from_diagonal(&d) * v.transpose()))
}

/// The unique symmetric positive definite square root.
pub fn spd_sqrt(s: &SpdMatrix) -> SpdMatrix {
    SpdMatrix(sym_apply(s.as_mat(), f64::sqrt))
}

/// Symmetric square root of a PSD matrix; tiny negative eigenvalues from
/// rounding are clamped to zero.
pub fn psd_sqrt(m: &Mat) -> Mat {
    sym_apply(m, |x| x.max(0.0).sqrt())
}

pub fn spd_inv_sqrt(m: &Mat) -> Result<Mat> {
    if !is_pd(m) {
        return Err(Error::NotPositiveDefinite("inverse square root".into()));
    }
    Ok(sym_apply(m, |x| 1.0 / x.sqrt()))
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    m.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::Singular(format!("{}x{} inverse", m.nrows(), m.ncols())))
}

/// log|S| for symmetric positive definite S via Cholesky.
pub fn log_det_spd(m: &Mat) -> Result<f64> {
    let ch = nalgebra::Cholesky::new(symmetrize(m))
        .ok_or_else(|| Error::NotPositiveDefinite("log-determinant".into()))?;
    Ok(2.0 * ch.l().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

/// True iff U and I − U are both positive definite.
pub fn interval_check(u: &Mat) -> bool {
    if !u.is_square() || u.nrows() == 0 {
        return false;
    }
    let i = Mat::identity(u.nrows(), u.nrows());
    is_pd(u) && is_pd(&(i - u))
}

/// tr(W₁ W₂ … W_n) where letters index into `args`.
pub fn trace_word(word: &[u8], args: &[&Mat]) -> Result<f64> {
    let first = word.first().ok_or_else(|| Error::Input("empty trace word".into()))?;
    let m = args
        .first()
        .ok_or_else(|| Error::Input("no matrix arguments".into()))?
        .nrows();
    if args.iter().any(|a| a.nrows() != m || a.ncols() != m) {
        return Err(Error::DimensionMismatch("trace word arguments differ in dimension".into()));
    }
    let get = |l: u8| {
        args.get(l as usize)
            .copied()
            .ok_or_else(|| Error::Input(format!("trace word letter {l} has no argument")))
    };
    if word.len() == 1 {
        return Ok(get(*first)?.trace());
    }
    let mut acc = get(*first)?.clone();
    for &l in &word[1..word.len() - 1] {
        acc = &acc * get(l)?;
    }
    // Last factor only needs the diagonal of the product.
    let last = get(word[word.len() - 1])?;
    Ok(acc.component_mul(&last.transpose()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(m: usize, rng: &mut ChaCha8Rng) -> Mat {
        let a = Mat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        symmetrize(&a)
    }

    fn random_spd(m: usize, rng: &mut ChaCha8Rng) -> Mat {
        let a = Mat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + Mat::identity(m, m) * 0.1
    }

    #[test]
    fn sqrt_examples() {
        let i = SpdMatrix::identity(3);
        assert!((spd_sqrt(&i).as_mat() - Mat::identity(3, 3)).amax() < 1e-15);
        let d = SpdMatrix::new(Mat::from_diagonal(&nalgebra::dvector![4.0, 9.0])).unwrap();
        let r = spd_sqrt(&d);
        assert!((r.as_mat() - Mat::from_diagonal(&nalgebra::dvector![2.0, 3.0])).amax() < 1e-14);
    }

    #[test]
    fn sqrt_reconstructs_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 1..=6 {
            for _ in 0..20 {
                let s = SpdMatrix::new(random_spd(m, &mut rng)).unwrap();
                let r = spd_sqrt(&s);
                let back = r.as_mat() * r.as_mat();
                assert!((&back - s.as_mat()).norm() / s.as_mat().norm() < 1e-10);
                assert!((r.as_mat() - r.as_mat().transpose()).amax() == 0.0);
                assert!(is_pd(r.as_mat()));
            }
        }
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(SpdMatrix::new(Mat::from_diagonal(&nalgebra::dvector![1.0, -1.0])).is_err());
        assert!(SymMatrix::zeros(2).check_psd("zero").is_ok());
        assert!(SymMatrix::from_diagonal(&[1.0, -0.5]).check_psd("bad").is_err());
    }

    #[test]
    fn trace_word_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_sym(3, &mut rng);
        assert!((trace_word(&[0], &[&x]).unwrap() - x.trace()).abs() < 1e-15);
        let i2 = Mat::identity(2, 2);
        assert_eq!(trace_word(&[0, 1], &[&i2, &i2]).unwrap(), 2.0);
        let y = random_sym(3, &mut rng);
        let a = trace_word(&[0, 0, 1], &[&x, &y]).unwrap();
        let b = trace_word(&[0, 1, 0], &[&x, &y]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(trace_word(&[0, 1], &[&x, &i2]).is_err());
        assert!(trace_word(&[], &[&x]).is_err());
        assert!(trace_word(&[2], &[&x]).is_err());
    }

    #[test]
    fn interval_examples() {
        for m in 1..=4 {
            let i = Mat::identity(m, m);
            assert!(interval_check(&(&i * 0.5)));
            assert!(!interval_check(&i));
            assert!(interval_check(&(&i * (1.0 - 1e-3))));
            assert!(!interval_check(&(&i * (1.0 + 1e-3))));
        }
    }

    #[test]
    fn log_det_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_spd(4, &mut rng);
        let want: f64 = sym_eigenvalues(&s).iter().map(|x| x.ln()).sum();
        assert!((log_det_spd(&s).unwrap() - want).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn trace_word_rotation_and_reversal(seed in 0u64..1000, len in 1usize..7, m in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let args: Vec<Mat> = (0..3).map(|_| random_sym(m, &mut rng)).collect();
            let refs: Vec<&Mat> = args.iter().collect();
            let word: Vec<u8> = (0..len).map(|_| rng.random_range(0..3u8)).collect();
            let base = trace_word(&word, &refs).unwrap();
            let scale = args.iter().map(|a| a.norm()).fold(1.0, |p, n| p * n.max(1.0)).powi(len as i32);
            let mut rot = word.clone();
            rot.rotate_left(1);
            prop_assert!((trace_word(&rot, &refs).unwrap() - base).abs() < 1e-12 * scale);
            let mut rev = word.clone();
            rev.reverse();
            prop_assert!((trace_word(&rev, &refs).unwrap() - base).abs() < 1e-12 * scale);
        }
    }
}
