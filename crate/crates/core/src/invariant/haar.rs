//! Exact Haar integrals of trace products over O(m).
//!
//! Each H-letter contributes one matrix entry H_{ij}; the row index sits on
//! the left of H and on the right of H'. Fixed letters between consecutive
//! H-letters collapse into segments, and for a pair of matchings (σ, τ) on
//! row and column indices the index sums close into cycles of segments,
//! each worth the trace of its product (segments walked backwards enter
//! transposed).

use nalgebra::DMatrix;

use super::pairing::{shared_weingarten, Pairing, WeingartenTable};
use super::trace::{orientations, TraceMonomial, TraceMonomialBasis};
use crate::error::{Error, Result};
use crate::matrixkit::Mat;
use crate::partitions::Partition;
use crate::zonal::ZonalTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Letter {
    Fixed(usize),
    FixedT(usize),
    H,
    Ht,
}

struct Segment {
    mat: Mat,
    start: usize,
    end: usize,
}

/// Node ids: H-letter q owns nodes 2q (left) and 2q+1 (right).
fn row_node(q: usize, transposed: bool) -> usize {
    if transposed {
        2 * q + 1
    } else {
        2 * q
    }
}

fn col_node(q: usize, transposed: bool) -> usize {
    if transposed {
        2 * q
    } else {
        2 * q + 1
    }
}

/// ∫_{O(m)} ∏_r tr(W_r) (dH) for words over fixed matrices and H, H'.
pub fn haar_expect_traceprod(words: &[Vec<Letter>], args: &[Mat], table: &WeingartenTable) -> Result<f64> {
    let m = table.dim;
    if args.iter().any(|a| a.nrows() != m || a.ncols() != m) {
        return Err(Error::DimensionMismatch(format!("fixed matrices must be {m}x{m}")));
    }
    let fixed = |l: &Letter| -> Result<Mat> {
        match *l {
            Letter::Fixed(i) => args.get(i).cloned(),
            Letter::FixedT(i) => args.get(i).map(|a| a.transpose()),
            _ => unreachable!(),
        }
        .ok_or_else(|| Error::Input("trace word refers to a missing argument".into()))
    };
    let mut constant = 1.0;
    let mut transposed: Vec<bool> = Vec::new();
    let mut segments: Vec<Segment> = Vec::new();
    for w in words {
        let hpos: Vec<usize> = (0..w.len()).filter(|&i| matches!(w[i], Letter::H | Letter::Ht)).collect();
        if hpos.is_empty() {
            let mut p = Mat::identity(m, m);
            for l in w {
                p *= fixed(l)?;
            }
            constant *= p.trace();
            continue;
        }
        let base = transposed.len();
        for &p in &hpos {
            transposed.push(w[p] == Letter::Ht);
        }
        let r = hpos.len();
        for i in 0..r {
            let (from, to) = (hpos[i], hpos[(i + 1) % r]);
            let mut mat = Mat::identity(m, m);
            let mut j = (from + 1) % w.len();
            while j != to {
                mat *= fixed(&w[j])?;
                j = (j + 1) % w.len();
            }
            segments.push(Segment { mat, start: 2 * (base + i) + 1, end: 2 * (base + (i + 1) % r) });
        }
    }
    let n_h = transposed.len();
    if n_h == 0 {
        return Ok(constant);
    }
    if n_h % 2 == 1 {
        return Ok(0.0);
    }
    if n_h != 2 * table.order {
        return Err(Error::DimensionMismatch(format!(
            "{} H-letters need a Weingarten table of order {}, got {}",
            n_h,
            n_h / 2,
            table.order
        )));
    }
    let mut seg_of = vec![(usize::MAX, false); 2 * n_h];
    for (si, s) in segments.iter().enumerate() {
        seg_of[s.start] = (si, true);
        seg_of[s.end] = (si, false);
    }
    let is_row = |node: usize| {
        let q = node / 2;
        row_node(q, transposed[q]) == node
    };
    let partner = |node: usize, sigma: &Pairing, tau: &Pairing| {
        let q = node / 2;
        if is_row(node) {
            let p = sigma.partner(q);
            row_node(p, transposed[p])
        } else {
            let p = tau.partner(q);
            col_node(p, transposed[p])
        }
    };
    let cycles = |sigma: &Pairing, tau: &Pairing, only_rows: Option<bool>| -> f64 {
        let mut seen = vec![false; 2 * n_h];
        let mut value = 1.0;
        for start in 0..2 * n_h {
            if seen[start] || only_rows.is_some_and(|r| r != is_row(start)) {
                continue;
            }
            let mut acc = Mat::identity(m, m);
            let mut cur = start;
            loop {
                seen[cur] = true;
                let (si, forward) = seg_of[cur];
                let s = &segments[si];
                let other = if forward {
                    acc *= &s.mat;
                    s.end
                } else {
                    acc *= s.mat.transpose();
                    s.start
                };
                seen[other] = true;
                cur = partner(other, sigma, tau);
                if cur == start {
                    break;
                }
            }
            value *= acc.trace();
        }
        value
    };
    let separable = segments.iter().all(|s| is_row(s.start) == is_row(s.end));
    let pairings = &table.pairings;
    let np = pairings.len();
    let total = if separable {
        let id = &pairings[0];
        let r: Vec<f64> = pairings.iter().map(|s| cycles(s, id, Some(true))).collect();
        let c: Vec<f64> = pairings.iter().map(|t| cycles(id, t, Some(false))).collect();
        let mut acc = 0.0;
        for i in 0..np {
            if r[i] == 0.0 {
                continue;
            }
            let row: f64 = (0..np).map(|j| table.wg[(i, j)] * c[j]).sum();
            acc += r[i] * row;
        }
        acc
    } else {
        let mut acc = 0.0;
        for (i, s) in pairings.iter().enumerate() {
            for (j, t) in pairings.iter().enumerate() {
                acc += table.wg[(i, j)] * cycles(s, t, None);
            }
        }
        acc
    };
    Ok(constant * total)
}

/// Convenience wrapper that picks the Weingarten table from the words.
pub fn haar_expect(words: &[Vec<Letter>], args: &[Mat], m: usize) -> Result<f64> {
    let n_h = words.iter().flatten().filter(|l| matches!(l, Letter::H | Letter::Ht)).count();
    if n_h % 2 == 1 {
        return Ok(0.0);
    }
    let table = shared_weingarten(n_h / 2, m)?;
    haar_expect_traceprod(words, args, &table)
}

/// ∫ b(Ω_1 H P_1 H', …, Ω_s H P_s H') (dH) for every monomial of the basis,
/// with the same orientation averaging used by [`WordCache`].
///
/// [`WordCache`]: super::trace::WordCache
pub fn haar_average_basis(basis: &TraceMonomialBasis, omegas: &[Mat], ps: &[Mat]) -> Result<Vec<f64>> {
    let m = omegas.first().map(|o| o.nrows()).unwrap_or(1);
    let mut args = Vec::with_capacity(2 * omegas.len());
    for (o, p) in omegas.iter().zip(ps) {
        args.push(o.clone());
        args.push(p.clone());
    }
    let expand = |w: &[u8]| -> Vec<Letter> {
        w.iter()
            .flat_map(|&l| [Letter::Fixed(2 * l as usize), Letter::H, Letter::Fixed(2 * l as usize + 1), Letter::Ht])
            .collect()
    };
    basis
        .monomials
        .iter()
        .map(|mono| {
            let options: Vec<Vec<Vec<u8>>> = mono.words().iter().map(|w| orientations(w)).collect();
            let weight: f64 = options.iter().map(|o| 1.0 / o.len() as f64).product();
            let mut total = 0.0;
            let mut idx = vec![0usize; options.len()];
            loop {
                let words: Vec<Vec<Letter>> = options.iter().zip(&idx).map(|(o, &i)| expand(&o[i])).collect();
                total += haar_expect(&words, &args, m)?;
                let mut pos = 0;
                while pos < idx.len() {
                    idx[pos] += 1;
                    if idx[pos] < options[pos].len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == idx.len() {
                    break;
                }
            }
            Ok(total * weight)
        })
        .collect()
}

/// All ways of choosing one power-sum index per slot, with the product of
/// the zonal power-sum coefficients.
fn power_sum_choices(parts: &[Partition], zonal: &ZonalTable) -> Result<Vec<(Vec<Partition>, f64)>> {
    let mut out = vec![(Vec::new(), 1.0)];
    for kap in parts {
        let exp = if kap.is_empty() {
            vec![(Partition::empty(), 1.0)]
        } else {
            zonal.power_sum_coefficients(kap)?
        };
        let mut next = Vec::new();
        for (prefix, c) in &out {
            for (nu, d) in &exp {
                if *d == 0.0 {
                    continue;
                }
                let mut p = prefix.clone();
                p.push(nu.clone());
                next.push((p, c * d));
            }
        }
        out = next;
    }
    Ok(out)
}

/// ∫ ∏_s C_{κ_s}(A_s H X_s H') (dH), evaluated with explicit matrices.
pub fn splitting_lhs(parts: &[Partition], a: &[Mat], x: &[Mat], zonal: &ZonalTable) -> Result<f64> {
    let m = a.first().map(|v| v.nrows()).unwrap_or(1);
    let d: usize = parts.iter().map(|p| p.weight()).sum();
    let table = shared_weingarten(d, m)?;
    let mut args = Vec::new();
    for s in 0..parts.len() {
        args.push(a[s].clone());
        args.push(x[s].clone());
    }
    let mut total = 0.0;
    for (nus, coef) in power_sum_choices(parts, zonal)? {
        let mut words = Vec::new();
        for (s, nu) in nus.iter().enumerate() {
            for &j in nu.parts() {
                let mut w = Vec::new();
                for _ in 0..j {
                    w.extend([Letter::Fixed(2 * s), Letter::H, Letter::Fixed(2 * s + 1), Letter::Ht]);
                }
                words.push(w);
            }
        }
        total += coef * haar_expect_traceprod(&words, &args, &table)?;
    }
    Ok(total)
}

/// Symbolic kernel G with ∫ ∏_s C_{κ_s}(A_s H X_s H') (dH) = b(A)' G b(X)
/// over the trace-monomial basis of the profile (|κ_s|)_s.
pub fn splitting_kernel(
    parts: &[Partition],
    m: usize,
    zonal: &ZonalTable,
    basis: &TraceMonomialBasis,
) -> Result<DMatrix<f64>> {
    let d: usize = parts.iter().map(|p| p.weight()).sum();
    let n = basis.len();
    if d == 0 {
        return Ok(DMatrix::from_element(1, 1, 1.0));
    }
    let table = shared_weingarten(d, m)?;
    let np = table.pairings.len();
    let mut g = DMatrix::zeros(n, n);
    for (nus, coef) in power_sum_choices(parts, zonal)? {
        // H-letter 2b is block b's H, 2b+1 its H'. Row segments join the H'
        // of one block to the H of the next block in the same trace; column
        // segments join H and H' inside a block.
        let mut row_link = vec![(0usize, 0u8); 2 * d];
        let mut col_link = vec![(0usize, 0u8); 2 * d];
        let mut b = 0;
        for (s, nu) in nus.iter().enumerate() {
            for &j in nu.parts() {
                let blocks: Vec<usize> = (b..b + j as usize).collect();
                b += j as usize;
                for i in 0..blocks.len() {
                    let prev = blocks[(i + blocks.len() - 1) % blocks.len()];
                    let (qa, qb) = (2 * prev + 1, 2 * blocks[i]);
                    row_link[qa] = (qb, s as u8);
                    row_link[qb] = (qa, s as u8);
                    let (qc, qd) = (2 * blocks[i], 2 * blocks[i] + 1);
                    col_link[qc] = (qd, s as u8);
                    col_link[qd] = (qc, s as u8);
                }
            }
        }
        let monomial = |links: &[(usize, u8)], p: &Pairing| -> Result<usize> {
            let mut seen = vec![false; 2 * d];
            let mut words = Vec::new();
            for start in 0..2 * d {
                if seen[start] {
                    continue;
                }
                let mut w = Vec::new();
                let mut q = start;
                loop {
                    seen[q] = true;
                    let (other, letter) = links[q];
                    w.push(letter);
                    seen[other] = true;
                    q = p.partner(other);
                    if q == start {
                        break;
                    }
                }
                words.push(w);
            }
            let mono = TraceMonomial::from_words(words);
            basis
                .index_of(&mono)
                .ok_or_else(|| Error::Input(format!("monomial {mono} outside the basis")))
        };
        let rows: Vec<usize> = table.pairings.iter().map(|p| monomial(&row_link, p)).collect::<Result<_>>()?;
        let cols: Vec<usize> = table.pairings.iter().map(|p| monomial(&col_link, p)).collect::<Result<_>>()?;
        // G += coef · P_rows' Wg P_cols
        let mut wp = DMatrix::<f64>::zeros(np, n);
        for i in 0..np {
            for j in 0..np {
                wp[(i, cols[j])] += table.wg[(i, j)];
            }
        }
        for i in 0..np {
            for c in 0..n {
                g[(rows[i], c)] += coef * wp[(i, c)];
            }
        }
    }
    Ok(g)
}
