//! Perfect matchings and the orthogonal Weingarten function.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest supported number of matched points.
pub const MAX_POINTS: usize = 8;

/// A perfect matching of {0, …, 2d−1}, stored as the partner of each point.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pairing(Vec<usize>);

impl Pairing {
    pub fn partner(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn points(&self) -> usize {
        self.0.len()
    }

    /// Pairs (i, j) with i < j in increasing order of i.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.0.len()).filter(|&i| i < self.0[i]).map(|i| (i, self.0[i])).collect()
    }
}

/// All (2d−1)!! perfect matchings; point 0 is matched first, to partners
/// in increasing order, then the rest recursively.
pub fn enumerate_pairings(two_d: usize) -> Result<Vec<Pairing>> {
    if !two_d.is_multiple_of(2) {
        return Err(Error::Input(format!("cannot pair an odd number of points ({two_d})")));
    }
    if two_d > MAX_POINTS {
        return Err(Error::DegreeOverflow { requested: two_d / 2, ceiling: MAX_POINTS / 2 });
    }
    fn rec(free: &mut Vec<usize>, partner: &mut Vec<usize>, out: &mut Vec<Pairing>) {
        if free.is_empty() {
            out.push(Pairing(partner.clone()));
            return;
        }
        let first = free.remove(0);
        for idx in 0..free.len() {
            let other = free.remove(idx);
            partner[first] = other;
            partner[other] = first;
            rec(free, partner, out);
            free.insert(idx, other);
        }
        free.insert(0, first);
    }
    let mut out = Vec::new();
    let mut free: Vec<usize> = (0..two_d).collect();
    let mut partner = vec![usize::MAX; two_d];
    rec(&mut free, &mut partner, &mut out);
    Ok(out)
}

/// Number of cycles in the union of two matchings on the same points.
pub fn loops(s: &Pairing, t: &Pairing) -> usize {
    let n = s.points();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut i = start;
        loop {
            seen[i] = true;
            let j = s.partner(i);
            seen[j] = true;
            i = t.partner(j);
            if i == start {
                break;
            }
        }
    }
    count
}

/// Wg(σ, τ) on O(m) for all matchings of 2d points.
#[derive(Clone, Debug)]
pub struct WeingartenTable {
    pub order: usize,
    pub dim: usize,
    pub pairings: Vec<Pairing>,
    pub wg: DMatrix<f64>,
    /// True when the Gram matrix is singular (m < d) and the pseudo-inverse
    /// was used.
    pub singular: bool,
}

/// Builds Wg as the (pseudo-)inverse of G(σ, τ) = m^{loops(σ, τ)}.
pub fn weingarten_orth(d: usize, m: usize) -> Result<WeingartenTable> {
    if m == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let pairings = enumerate_pairings(2 * d)?;
    let n = pairings.len();
    let gram = DMatrix::from_fn(n, n, |i, j| (m as f64).powi(loops(&pairings[i], &pairings[j]) as i32));
    let singular = m < d;
    let wg = if singular {
        gram.pseudo_inverse(1e-9 * (m as f64).powi(d as i32))
            .map_err(|e| Error::Singular(e.to_string()))?
    } else {
        gram.try_inverse().ok_or_else(|| Error::Singular(format!("Gram matrix d={d} m={m}")))?
    };
    Ok(WeingartenTable { order: d, dim: m, pairings, wg, singular })
}

/// Cached tables keyed by (d, m).
pub fn shared_weingarten(d: usize, m: usize) -> Result<Arc<WeingartenTable>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<WeingartenTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("weingarten cache poisoned").get(&(d, m)) {
        return Ok(t.clone());
    }
    let t = Arc::new(weingarten_orth(d, m)?);
    cache.lock().expect("weingarten cache poisoned").insert((d, m), t.clone());
    Ok(t)
}

impl WeingartenTable {
    /// E[∏_r H_{i_r j_r}] for index lists of length 2d.
    pub fn moment(&self, rows: &[usize], cols: &[usize]) -> Result<f64> {
        if rows.len() != 2 * self.order || cols.len() != 2 * self.order {
            return Err(Error::DimensionMismatch(format!(
                "moment of order {} needs {} indices",
                self.order,
                2 * self.order
            )));
        }
        let delta = |p: &Pairing, idx: &[usize]| p.pairs().iter().all(|&(a, b)| idx[a] == idx[b]);
        let mut total = 0.0;
        for (i, s) in self.pairings.iter().enumerate() {
            if !delta(s, rows) {
                continue;
            }
            for (j, t) in self.pairings.iter().enumerate() {
                if delta(t, cols) {
                    total += self.wg[(i, j)];
                }
            }
        }
        Ok(total)
    }
}
