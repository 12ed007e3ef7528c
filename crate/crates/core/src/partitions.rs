//! Integer partitions, generalized Pochhammer symbols and the multivariate
//! gamma/beta constants.
//!
//! Partitions are listed in reverse lexicographic order, so `(3)` precedes
//! `(2,1)` precedes `(1,1,1)`. Every series in the crate walks its shells in
//! this order, which keeps floating-point summation reproducible.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A weakly decreasing sequence of positive integers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Partition(Vec<u32>);

impl Partition {
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        if parts.contains(&0) {
            return Err(Error::Input(format!("partition parts must be positive: {parts:?}")));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Input(format!("partition parts must be weakly decreasing: {parts:?}")));
        }
        Ok(Partition(parts))
    }

    /// Builds a partition from arbitrary non-negative parts by dropping zeros
    /// and sorting.
    pub fn from_unsorted(mut parts: Vec<u32>) -> Self {
        parts.retain(|&p| p > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition(parts)
    }

    pub fn empty() -> Self {
        Partition(Vec::new())
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.iter().map(|&p| p as usize).sum()
    }

    /// Number of nonzero parts.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Σ κ_i (κ_i − i) with 1-based i; the eigenvalue shift used by the
    /// zonal recurrence.
    pub fn rho(&self) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &k)| k as f64 * (k as f64 - (i as f64 + 1.0)))
            .sum()
    }

    /// Multiplicities of each distinct part value, largest part first.
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.0.len() {
            let mut j = i;
            while j < self.0.len() && self.0[j] == self.0[i] {
                j += 1;
            }
            out.push(j - i);
            i = j;
        }
        out
    }
}

impl TryFrom<Vec<u32>> for Partition {
    type Error = Error;
    fn try_from(v: Vec<u32>) -> Result<Self> {
        Partition::new(v)
    }
}

impl From<Partition> for Vec<u32> {
    fn from(p: Partition) -> Self {
        p.0
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// All partitions of `k` with at most `max_len` parts, in reverse
/// lexicographic order.
pub fn enumerate_partitions(k: usize, max_len: usize) -> Vec<Partition> {
    fn rec(rest: u32, cap: u32, slots: usize, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if rest == 0 {
            out.push(Partition(cur.clone()));
            return;
        }
        if slots == 0 {
            return;
        }
        for first in (1..=cap.min(rest)).rev() {
            cur.push(first);
            rec(rest - first, first, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k as u32, k as u32, max_len, &mut Vec::new(), &mut out);
    out
}

/// Generalized Pochhammer symbol (a)_κ = ∏_i (a − (i−1)/2)_{κ_i}.
pub fn gen_pochhammer(a: f64, kappa: &Partition) -> f64 {
    let mut acc = 1.0;
    for (i, &part) in kappa.parts().iter().enumerate() {
        let base = a - i as f64 / 2.0;
        for j in 0..part {
            acc *= base + j as f64;
        }
    }
    acc
}

/// Ordinary rising factorial (a)_k.
pub fn pochhammer(a: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (a + j as f64))
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

/// Natural logarithm of a positive constant.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogConstant(f64);

impl LogConstant {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn exp(self) -> f64 {
        self.0.exp()
    }
}

fn check_shape(m: usize, a: f64, name: &str) -> Result<()> {
    if m == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let bound = (m as f64 - 1.0) / 2.0;
    if !(a.is_finite() && a > bound) {
        return Err(Error::Domain(format!(
            "shape {name} = {a} must exceed (m-1)/2 = {bound} for m = {m}"
        )));
    }
    Ok(())
}

/// log Γ_m[a] = m(m−1)/4 · log π + Σ_{i=1}^{m} log Γ(a − (i−1)/2).
pub fn lgamma_m(m: usize, a: f64) -> Result<LogConstant> {
    check_shape(m, a, "a")?;
    let mf = m as f64;
    let mut acc = mf * (mf - 1.0) / 4.0 * std::f64::consts::PI.ln();
    for i in 0..m {
        acc += ln_gamma(a - i as f64 / 2.0);
    }
    Ok(LogConstant(acc))
}

/// log β_m[a,b] = log Γ_m[a] + log Γ_m[b] − log Γ_m[a+b].
pub fn lbeta_m(m: usize, a: f64, b: f64) -> Result<LogConstant> {
    check_shape(m, a, "a")?;
    check_shape(m, b, "b")?;
    Ok(LogConstant(
        lgamma_m(m, a)?.0 + lgamma_m(m, b)?.0 - lgamma_m(m, a + b)?.0,
    ))
}

/// log β*_m[a,b,c] = log Γ_m[a] + log Γ_m[b] + log Γ_m[c] − log Γ_m[a+b+c].
pub fn lbeta_star_m(m: usize, a: f64, b: f64, c: f64) -> Result<LogConstant> {
    check_shape(m, a, "a")?;
    check_shape(m, b, "b")?;
    check_shape(m, c, "c")?;
    Ok(LogConstant(
        lgamma_m(m, a)?.0 + lgamma_m(m, b)?.0 + lgamma_m(m, c)?.0 - lgamma_m(m, a + b + c)?.0,
    ))
}
