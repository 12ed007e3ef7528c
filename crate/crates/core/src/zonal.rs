//! Zonal polynomials and truncated hypergeometric series of a matrix
//! argument.
//!
//! C_κ is stored by its coefficients in the monomial symmetric basis, which
//! do not depend on the matrix dimension. Unrestricted tables also carry the
//! power-sum expansion so that C_κ can be evaluated on non-symmetric
//! arguments through traces of powers.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixkit::{self, Mat};
use crate::partitions::{enumerate_partitions, factorial, gen_pochhammer, Partition};
use crate::TABLE_VERSION;

/// Coefficients of every C_κ with |κ| = degree.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ZonalShell {
    pub degree: usize,
    /// Partitions of `degree`, reverse lexicographic; indexes both the
    /// polynomials and the monomial basis.
    pub basis: Vec<Partition>,
    /// Row κ holds the monomial coefficients of C_κ.
    pub monomial: Vec<Vec<f64>>,
    /// Row κ holds the coefficients of C_κ on p_ν = ∏ tr(X^{ν_i}).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_sum: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ZonalTable {
    pub version: String,
    pub max_degree: usize,
    /// When set, only partitions with at most this many parts are stored.
    /// The recurrence never leaves that set, so stored values are exact.
    pub max_len: Option<usize>,
    pub shells: Vec<ZonalShell>,
}

/// Unnormalized Y_κ = Σ_λ c_κλ m_λ with c_κκ = 1.
fn jack_row(kappa: &Partition, basis: &[Partition]) -> Vec<f64> {
    let pos = |p: &Partition| basis.iter().position(|q| q == p);
    let mut row = vec![0.0; basis.len()];
    let start = pos(kappa).expect("kappa in basis");
    row[start] = 1.0;
    let rho_k = kappa.rho();
    for li in start + 1..basis.len() {
        let lam = basis[li].parts();
        let mut acc = 0.0;
        for j in 1..lam.len() {
            for i in 0..j {
                for t in 1..=lam[j] {
                    let mut mu = lam.to_vec();
                    mu[i] += t;
                    mu[j] -= t;
                    let mu = Partition::from_unsorted(mu);
                    if let Some(mi) = pos(&mu) {
                        if mi < li && row[mi] != 0.0 {
                            let w = (lam[i] + t) as f64 - (lam[j] as f64 - t as f64);
                            acc += w * row[mi];
                        }
                    }
                }
            }
        }
        if acc != 0.0 {
            row[li] = acc / (rho_k - basis[li].rho());
        }
    }
    row
}

/// Multinomial k!/∏μ_i!: the coefficient of m_μ in (tr X)^k.
fn multinomial(mu: &Partition) -> f64 {
    mu.parts()
        .iter()
        .fold(factorial(mu.weight()), |acc, &p| acc / factorial(p as usize))
}

/// Number of maps from the parts of ν onto the slots of μ whose part sums
/// hit μ exactly: the coefficient of m_μ in p_ν.
fn power_to_monomial(nu: &Partition, mu: &Partition) -> f64 {
    fn rec(nu: &[u32], slots: &mut [u32]) -> f64 {
        match nu.split_first() {
            None => {
                if slots.iter().all(|&s| s == 0) {
                    1.0
                } else {
                    0.0
                }
            }
            Some((&first, rest)) => {
                let mut total = 0.0;
                for j in 0..slots.len() {
                    if slots[j] >= first {
                        slots[j] -= first;
                        total += rec(rest, slots);
                        slots[j] += first;
                    }
                }
                total
            }
        }
    }
    let mut slots = mu.parts().to_vec();
    rec(nu.parts(), &mut slots)
}

fn build_shell(k: usize, max_len: Option<usize>, with_power_sum: bool) -> ZonalShell {
    let basis = enumerate_partitions(k, max_len.unwrap_or(k).max(1));
    let n = basis.len();
    let y: Vec<Vec<f64>> = basis.iter().map(|kap| jack_row(kap, &basis)).collect();
    // Σ_κ s_κ Y_κ = (tr X)^k; Y is unit lower-triangular in this order.
    let mut s = vec![0.0; n];
    for mi in 0..n {
        let partial: f64 = (0..mi).map(|ki| s[ki] * y[ki][mi]).sum();
        s[mi] = multinomial(&basis[mi]) - partial;
    }
    let monomial: Vec<Vec<f64>> = (0..n)
        .map(|ki| y[ki].iter().map(|c| c * s[ki]).collect())
        .collect();
    let power_sum = with_power_sum.then(|| {
        // c_μ = Σ_ν d_ν L_νμ with L_νμ = 0 unless ν refines μ, which puts ν
        // after μ in reverse lexicographic order.
        let l: Vec<Vec<f64>> = basis
            .iter()
            .map(|nu| basis.iter().map(|mu| power_to_monomial(nu, mu)).collect())
            .collect();
        monomial
            .iter()
            .map(|c| {
                let mut d = vec![0.0; n];
                for mi in (0..n).rev() {
                    let partial: f64 = (mi + 1..n).map(|ni| d[ni] * l[ni][mi]).sum();
                    d[mi] = (c[mi] - partial) / l[mi][mi];
                }
                d
            })
            .collect()
    });
    ZonalShell { degree: k, basis, monomial, power_sum }
}

/// Full table through degree `d`, including power-sum coefficients.
pub fn build_zonal_table(d: usize) -> ZonalTable {
    ZonalTable {
        version: TABLE_VERSION.to_string(),
        max_degree: d,
        max_len: None,
        shells: (0..=d).map(|k| build_shell(k, None, true)).collect(),
    }
}

impl ZonalTable {
    /// Table limited to partitions with at most `max_len` parts; enough for
    /// evaluation on `max_len` × `max_len` symmetric arguments.
    pub fn restricted(d: usize, max_len: usize) -> ZonalTable {
        ZonalTable {
            version: TABLE_VERSION.to_string(),
            max_degree: d,
            max_len: Some(max_len),
            shells: (0..=d).map(|k| build_shell(k, Some(max_len), false)).collect(),
        }
    }

    pub fn shell(&self, k: usize) -> Result<&ZonalShell> {
        self.shells.get(k).ok_or(Error::DegreeOverflow {
            requested: k,
            ceiling: self.max_degree,
        })
    }

    fn index(&self, kappa: &Partition) -> Result<(&ZonalShell, usize)> {
        let shell = self.shell(kappa.weight())?;
        let idx = shell
            .basis
            .iter()
            .position(|p| p == kappa)
            .ok_or_else(|| Error::Input(format!("partition {kappa} is not stored in this table")))?;
        Ok((shell, idx))
    }

    /// Monomial coefficient row of C_κ, keyed by basis partition.
    pub fn coefficients(&self, kappa: &Partition) -> Result<BTreeMap<Partition, f64>> {
        let (shell, idx) = self.index(kappa)?;
        Ok(shell.basis.iter().cloned().zip(shell.monomial[idx].iter().copied()).collect())
    }

    /// Power-sum coefficient row of C_κ, keyed by ν.
    pub fn power_sum_coefficients(&self, kappa: &Partition) -> Result<Vec<(Partition, f64)>> {
        let (shell, idx) = self.index(kappa)?;
        let ps = shell
            .power_sum
            .as_ref()
            .ok_or_else(|| Error::Input("table has no power-sum coefficients".into()))?;
        Ok(shell.basis.iter().cloned().zip(ps[idx].iter().copied()).collect())
    }

    pub fn check_version(&self) -> Result<()> {
        if self.version != TABLE_VERSION {
            return Err(Error::TableVersion {
                found: self.version.clone(),
                expected: TABLE_VERSION.to_string(),
            });
        }
        Ok(())
    }
}

/// Monomial symmetric functions m_μ(x) for every μ in `basis`.
pub fn monomials(x: &[f64], basis: &[Partition]) -> Vec<f64> {
    fn rec(mu: &[u32], n: usize, x: &[f64], memo: &mut HashMap<(Vec<u32>, usize), f64>) -> f64 {
        if mu.is_empty() {
            return 1.0;
        }
        if mu.len() > n {
            return 0.0;
        }
        if let Some(&v) = memo.get(&(mu.to_vec(), n)) {
            return v;
        }
        let mut total = rec(mu, n - 1, x, memo);
        let xn = x[n - 1];
        let mut i = 0;
        while i < mu.len() {
            let p = mu[i];
            let mut rest = mu.to_vec();
            rest.remove(i);
            total += xn.powi(p as i32) * rec(&rest, n - 1, x, memo);
            while i < mu.len() && mu[i] == p {
                i += 1;
            }
        }
        memo.insert((mu.to_vec(), n), total);
        total
    }
    let mut memo = HashMap::new();
    basis.iter().map(|mu| rec(mu.parts(), x.len(), x, &mut memo)).collect()
}

/// C_κ at a matrix with the given eigenvalues; zero when κ has more parts
/// than there are eigenvalues.
pub fn zonal_eval(table: &ZonalTable, kappa: &Partition, eigenvalues: &[f64]) -> Result<f64> {
    if kappa.weight() > table.max_degree {
        return Err(Error::DegreeOverflow { requested: kappa.weight(), ceiling: table.max_degree });
    }
    if kappa.len() > eigenvalues.len() {
        return Ok(0.0);
    }
    let (shell, idx) = table.index(kappa)?;
    let m = monomials(eigenvalues, &shell.basis);
    Ok(shell.monomial[idx].iter().zip(&m).map(|(c, v)| c * v).sum())
}

/// All C_κ for |κ| = k at once, in the shell's basis order.
pub fn zonal_shell_eval(table: &ZonalTable, k: usize, eigenvalues: &[f64]) -> Result<Vec<f64>> {
    let shell = table.shell(k)?;
    let m = monomials(eigenvalues, &shell.basis);
    Ok(shell
        .monomial
        .iter()
        .zip(&shell.basis)
        .map(|(row, kap)| {
            if kap.len() > eigenvalues.len() {
                0.0
            } else {
                row.iter().zip(&m).map(|(c, v)| c * v).sum()
            }
        })
        .collect())
}

/// C_κ(I_m) by the closed product formula
/// 2^{2k} k! (m/2)_κ ∏_{i<j}(2κ_i − 2κ_j − i + j) / ∏_i (2κ_i + l − i)!.
pub fn zonal_at_identity(kappa: &Partition, m: usize) -> f64 {
    if kappa.len() > m {
        return 0.0;
    }
    let k = kappa.weight();
    let l = kappa.len();
    let p = kappa.parts();
    let mut num = 4f64.powi(k as i32) * factorial(k) * gen_pochhammer(m as f64 / 2.0, kappa);
    for i in 0..l {
        for j in i + 1..l {
            num *= 2.0 * p[i] as f64 - 2.0 * p[j] as f64 - i as f64 + j as f64;
        }
    }
    let den: f64 = (0..l).map(|i| factorial(2 * p[i] as usize + l - i - 1)).product();
    num / den
}

/// Eigenvalues of a square matrix known to have a real spectrum: symmetric
/// input goes through the symmetric solver, anything else through the
/// general Schur form with the imaginary parts checked.
pub fn real_spectrum(x: &Mat) -> Result<Vec<f64>> {
    let asym = (x - x.transpose()).amax();
    if asym <= 1e-13 * x.amax().max(1.0) {
        return Ok(matrixkit::sym_eigenvalues(x));
    }
    let ev = x.complex_eigenvalues();
    let scale = ev.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if ev.iter().any(|z| z.im.abs() > 1e-8 * scale) {
        return Err(Error::Domain("matrix argument has a complex spectrum".into()));
    }
    Ok(ev.iter().map(|z| z.re).collect())
}

/// Process-wide cache of restricted tables keyed by (degree, parts).
pub fn shared_table(d: usize, max_len: usize) -> Arc<ZonalTable> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<ZonalTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("zonal cache poisoned");
    guard
        .entry((d, max_len))
        .or_insert_with(|| Arc::new(ZonalTable::restricted(d, max_len)))
        .clone()
}

/// pFq parameters; only (0,0), (0,1) and (1,1) are supported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypergeomSpec {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    pub truncation: usize,
}

/// Truncated series value plus the size of the last shell added.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub shells_used: usize,
    pub last_shell_magnitude: f64,
    pub truncation: usize,
}

impl HypergeomSpec {
    pub fn f00(truncation: usize) -> Self {
        HypergeomSpec { numerator: vec![], denominator: vec![], truncation }
    }

    pub fn f01(b: f64, truncation: usize) -> Self {
        HypergeomSpec { numerator: vec![], denominator: vec![b], truncation }
    }

    pub fn f11(a: f64, b: f64, truncation: usize) -> Self {
        HypergeomSpec { numerator: vec![a], denominator: vec![b], truncation }
    }

    fn validate(&self, m: usize) -> Result<()> {
        match (self.numerator.len(), self.denominator.len()) {
            (0, 0) | (0, 1) | (1, 1) => {}
            (p, q) => return Err(Error::Input(format!("{p}F{q} is not supported"))),
        }
        for &b in &self.denominator {
            for i in 0..m {
                let shifted = b - i as f64 / 2.0;
                if shifted <= 0.0 && shifted == shifted.round() {
                    return Err(Error::Pole(b));
                }
            }
        }
        Ok(())
    }

    fn coefficient(&self, kappa: &Partition) -> f64 {
        let num: f64 = self.numerator.iter().map(|&a| gen_pochhammer(a, kappa)).product();
        let den: f64 = self.denominator.iter().map(|&b| gen_pochhammer(b, kappa)).product();
        num / den / factorial(kappa.weight())
    }
}

/// Σ_{k ≤ D} Σ_{κ ⊢ k} [∏(a)_κ / ∏(b)_κ] C_κ(X) / k! at a matrix with the
/// given eigenvalues.
pub fn hypergeom_eigen(spec: &HypergeomSpec, eigenvalues: &[f64]) -> Result<SeriesValue> {
    let m = eigenvalues.len();
    spec.validate(m)?;
    let d = spec.truncation;
    let mut value = 1.0;
    let mut last = 1.0;
    if eigenvalues.iter().all(|&x| x == 0.0) {
        return Ok(SeriesValue { value, shells_used: d + 1, last_shell_magnitude: 0.0, truncation: d });
    }
    if m == 1 {
        // C_(k)(x) = x^k for a single eigenvalue.
        let x = eigenvalues[0];
        let mut term = 1.0;
        for k in 1..=d {
            term *= x / k as f64;
            for &a in &spec.numerator {
                term *= a + (k - 1) as f64;
            }
            for &b in &spec.denominator {
                term /= b + (k - 1) as f64;
            }
            value += term;
            last = term.abs();
        }
        return Ok(SeriesValue { value, shells_used: d + 1, last_shell_magnitude: last, truncation: d });
    }
    let table = shared_table(d, m);
    for k in 1..=d {
        let shell = table.shell(k)?;
        let c = zonal_shell_eval(&table, k, eigenvalues)?;
        let term: f64 = shell
            .basis
            .iter()
            .zip(&c)
            .map(|(kap, ck)| if *ck == 0.0 { 0.0 } else { spec.coefficient(kap) * ck })
            .sum();
        value += term;
        last = term.abs();
    }
    Ok(SeriesValue { value, shells_used: d + 1, last_shell_magnitude: last, truncation: d })
}

/// As [`hypergeom_eigen`] for a matrix argument with real spectrum, such as
/// a product of a PSD and a PD matrix.
pub fn hypergeom_matrix(spec: &HypergeomSpec, x: &Mat) -> Result<SeriesValue> {
    if !x.is_square() {
        return Err(Error::DimensionMismatch("hypergeometric argument must be square".into()));
    }
    if x.iter().all(|&v| v == 0.0) {
        spec.validate(x.nrows())?;
        return Ok(SeriesValue {
            value: 1.0,
            shells_used: spec.truncation + 1,
            last_shell_magnitude: 0.0,
            truncation: spec.truncation,
        });
    }
    hypergeom_eigen(spec, &real_spectrum(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(v: &[u32]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    fn coef(t: &ZonalTable, kap: &[u32], mu: &[u32]) -> f64 {
        t.coefficients(&p(kap)).unwrap()[&p(mu)]
    }

    #[test]
    fn low_degree_coefficients() {
        let t = build_zonal_table(3);
        assert_eq!(coef(&t, &[1], &[1]), 1.0);
        assert!((coef(&t, &[2], &[2]) - 1.0).abs() < 1e-15);
        assert!((coef(&t, &[2], &[1, 1]) - 2.0 / 3.0).abs() < 1e-15);
        assert!((coef(&t, &[1, 1], &[1, 1]) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(coef(&t, &[1, 1], &[2]), 0.0);
        // Degree three values from the classical tables.
        assert!((coef(&t, &[3], &[2, 1]) - 3.0 / 5.0).abs() < 1e-14);
        assert!((coef(&t, &[3], &[1, 1, 1]) - 2.0 / 5.0).abs() < 1e-14);
        assert!((coef(&t, &[2, 1], &[2, 1]) - 12.0 / 5.0).abs() < 1e-14);
        assert!((coef(&t, &[2, 1], &[1, 1, 1]) - 18.0 / 5.0).abs() < 1e-14);
        assert!((coef(&t, &[1, 1, 1], &[1, 1, 1]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn power_sum_forms_degree_two() {
        // C_(2) = (p1² + 2 p2)/3, C_(1,1) = (2/3)(p1² − p2).
        let t = build_zonal_table(2);
        let c2 = t.power_sum_coefficients(&p(&[2])).unwrap();
        let c11 = t.power_sum_coefficients(&p(&[1, 1])).unwrap();
        let get = |v: &Vec<(Partition, f64)>, nu: &[u32]| v.iter().find(|(q, _)| *q == p(nu)).unwrap().1;
        assert!((get(&c2, &[1, 1]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((get(&c2, &[2]) - 2.0 / 3.0).abs() < 1e-15);
        assert!((get(&c11, &[1, 1]) - 2.0 / 3.0).abs() < 1e-15);
        assert!((get(&c11, &[2]) + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn eval_examples() {
        let t = build_zonal_table(4);
        assert!((zonal_eval(&t, &p(&[2]), &[1.0, 2.0]).unwrap() - 19.0 / 3.0).abs() < 1e-14);
        assert!((zonal_eval(&t, &p(&[1]), &[0.3, 1.7, 2.0]).unwrap() - 4.0).abs() < 1e-14);
        for k in 1..=4u32 {
            let x: f64 = 1.3;
            assert!((zonal_eval(&t, &p(&[k]), &[x]).unwrap() - x.powi(k as i32)).abs() < 1e-12);
        }
        assert_eq!(zonal_eval(&t, &p(&[1, 1, 1]), &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(
            zonal_eval(&t, &p(&[5]), &[1.0]),
            Err(Error::DegreeOverflow { requested: 5, ceiling: 4 })
        ));
    }

    #[test]
    fn identity_values() {
        assert_eq!(zonal_at_identity(&p(&[1]), 4), 4.0);
        assert!((zonal_at_identity(&p(&[2]), 2) - 8.0 / 3.0).abs() < 1e-14);
        assert_eq!(zonal_at_identity(&p(&[1, 1, 1]), 2), 0.0);
        assert_eq!(zonal_at_identity(&Partition::empty(), 3), 1.0);
        let t = build_zonal_table(6);
        for k in 1..=6 {
            for kap in enumerate_partitions(k, k) {
                for m in 1..=5 {
                    let ones = vec![1.0; m];
                    let table = zonal_eval(&t, &kap, &ones).unwrap();
                    let closed = zonal_at_identity(&kap, m);
                    assert!((table - closed).abs() < 1e-10 * closed.abs().max(1.0), "{kap} m={m}");
                }
            }
        }
    }

    // Laplace–Beltrami check: C_κ is an eigenfunction of
    // Δ = Σ x_i² ∂²_i + Σ_{i≠j} x_i²/(x_i − x_j) ∂_i with eigenvalue
    // ρ_κ + k(m − 1).
    #[test]
    fn zonal_are_laplace_beltrami_eigenfunctions() {
        let t = build_zonal_table(5);
        let x = [0.7, 1.3, 2.1];
        let m = x.len();
        let h = 1e-3;
        for k in 1..=5 {
            for kap in enumerate_partitions(k, m) {
                let f = |y: &[f64]| zonal_eval(&t, &kap, y).unwrap();
                let f0 = f(&x);
                let mut lhs = 0.0;
                for i in 0..m {
                    let mut xp = x;
                    let mut xm = x;
                    xp[i] += h;
                    xm[i] -= h;
                    let d1 = (f(&xp) - f(&xm)) / (2.0 * h);
                    let d2 = (f(&xp) - 2.0 * f0 + f(&xm)) / (h * h);
                    lhs += x[i] * x[i] * d2;
                    for j in 0..m {
                        if j != i {
                            lhs += x[i] * x[i] / (x[i] - x[j]) * d1;
                        }
                    }
                }
                let eig = kap.rho() + (k * (m - 1)) as f64;
                assert!((lhs - eig * f0).abs() < 1e-4 * f0.abs().max(1.0), "{kap}: {lhs} vs {}", eig * f0);
            }
        }
    }

    #[test]
    fn restricted_table_matches_full() {
        let full = build_zonal_table(7);
        let r = ZonalTable::restricted(7, 2);
        for k in 1..=7 {
            for kap in enumerate_partitions(k, 2) {
                let a = zonal_eval(&full, &kap, &[0.4, 1.1]).unwrap();
                let b = zonal_eval(&r, &kap, &[0.4, 1.1]).unwrap();
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn normalization_random_spd() {
        let t = build_zonal_table(8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 1..=5 {
            for _ in 0..5 {
                let x: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..2.0)).collect();
                let tr: f64 = x.iter().sum();
                for k in 1..=8 {
                    let s: f64 = zonal_shell_eval(&t, k, &x).unwrap().iter().sum();
                    assert!((s - tr.powi(k as i32)).abs() / tr.powi(k as i32) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn f00_is_exponential_of_trace() {
        let x = [0.3, -0.2, 0.5];
        let v = hypergeom_eigen(&HypergeomSpec::f00(25), &x).unwrap();
        let want: f64 = x.iter().sum::<f64>().exp();
        assert!((v.value - want).abs() < 1e-10);
        let z = hypergeom_eigen(&HypergeomSpec::f11(1.5, 2.5, 10), &[0.0, 0.0]).unwrap();
        assert_eq!(z.value, 1.0);
    }

    #[test]
    fn scalar_series_agree() {
        // Independent scalar recurrences.
        let f01 = |b: f64, x: f64, d: usize| {
            let mut s = 0.0;
            for k in 0..=d {
                s += x.powi(k as i32) / (crate::partitions::pochhammer(b, k) * factorial(k));
            }
            s
        };
        let f11 = |a: f64, b: f64, x: f64, d: usize| {
            let mut s = 0.0;
            for k in 0..=d {
                s += crate::partitions::pochhammer(a, k) / crate::partitions::pochhammer(b, k)
                    * x.powi(k as i32)
                    / factorial(k);
            }
            s
        };
        for &x in &[0.1, 0.9, 2.5] {
            let v = hypergeom_eigen(&HypergeomSpec::f01(1.7, 30), &[x]).unwrap().value;
            assert!((v - f01(1.7, x, 30)).abs() < 1e-10 * v.abs());
            let v = hypergeom_eigen(&HypergeomSpec::f11(2.2, 0.8, 30), &[x]).unwrap().value;
            assert!((v - f11(2.2, 0.8, x, 30)).abs() < 1e-10 * v.abs());
        }
    }

    #[test]
    fn matrix_and_eigen_paths_agree() {
        let t = HypergeomSpec::f11(2.0, 1.5, 6);
        let a = Mat::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]);
        let b = Mat::from_row_slice(2, 2, &[0.5, -0.1, -0.1, 0.4]);
        let prod = &a * &b;
        let v1 = hypergeom_matrix(&t, &prod).unwrap().value;
        let sq = matrixkit::psd_sqrt(&b);
        let sym = &sq * &a * &sq;
        let v2 = hypergeom_eigen(&t, &matrixkit::sym_eigenvalues(&sym)).unwrap().value;
        assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn poles_are_rejected() {
        assert!(matches!(
            hypergeom_eigen(&HypergeomSpec::f01(1.0, 5), &[0.1, 0.2, 0.3]),
            Err(Error::Pole(_))
        ));
        assert!(hypergeom_eigen(&HypergeomSpec::f01(1.0, 5), &[0.1, 0.2]).is_ok());
        assert!(hypergeom_eigen(&HypergeomSpec::f01(-2.0, 5), &[0.1]).is_err());
    }

    proptest! {
        #[test]
        fn zonal_is_symmetric_in_eigenvalues(a in 0.01f64..3.0, b in 0.01f64..3.0, c in 0.01f64..3.0) {
            let t = shared_table(5, 3);
            for kap in enumerate_partitions(5, 3) {
                let x = zonal_eval(&t, &kap, &[a, b, c]).unwrap();
                let y = zonal_eval(&t, &kap, &[c, a, b]).unwrap();
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
