//! Exact Haar-integral identities for the stored invariant polynomials,
//! checked away from the calibration dimension.

use std::collections::BTreeMap;

use dncbeta::invariant::haar::{haar_average_basis, splitting_lhs};
use dncbeta::invariant::table::{parts_key, split_product, TableEvaluator};
use dncbeta::invariant::{shared_invariant_table, InvariantEntry, WordCache};
use dncbeta::matrixkit::psd_sqrt;
use dncbeta::zonal::{build_zonal_table, zonal_at_identity};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Mat = DMatrix<f64>;

fn pd(m: usize, r: &mut ChaCha8Rng) -> Mat {
    let z = Mat::from_fn(m, m, |_, _| r.random_range(-1.0..1.0));
    &z * z.transpose() / m as f64 + Mat::identity(m, m) * 0.1
}

fn groups() -> BTreeMap<String, Vec<InvariantEntry>> {
    let table = shared_invariant_table();
    let mut g: BTreeMap<String, Vec<InvariantEntry>> = BTreeMap::new();
    for e in table.entries.values() {
        g.entry(parts_key(&e.parts)).or_default().push(e.clone());
    }
    g
}

#[test]
fn splitting_transfers_across_dimensions() {
    let table = shared_invariant_table();
    let zonal = build_zonal_table(4);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in [1usize, 2, 3, 6] {
        for (key, es) in groups() {
            let parts = &es[0].parts;
            let k = parts.len();
            for _ in 0..2 {
                let a: Vec<Mat> = (0..k).map(|_| pd(m, &mut rng)).collect();
                let x: Vec<Mat> = (0..k).map(|_| pd(m, &mut rng)).collect();
                let lhs = splitting_lhs(parts, &a, &x, &zonal).unwrap();
                let mut ea = TableEvaluator::new(&table, a).unwrap();
                let mut ex = TableEvaluator::new(&table, x).unwrap();
                let mut rhs = 0.0;
                let mut scale: f64 = lhs.abs();
                for e in &es {
                    let t = split_product(e, &mut ea, &mut ex).unwrap();
                    scale = scale.max(t.abs());
                    rhs += t;
                }
                assert!((lhs - rhs).abs() <= 1e-9 * scale.max(1e-3), "m={m} {key}: {lhs:e} vs {rhs:e}");
            }
        }
    }
}

#[test]
fn long_phi_vanishes_below_its_length() {
    let table = shared_invariant_table();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in [1usize, 2, 3] {
        for e in table.entries.values().filter(|e| e.phi.len() > m) {
            let args: Vec<Mat> = e.parts.iter().map(|_| pd(m, &mut rng)).collect();
            let mut ev = TableEvaluator::new(&table, args).unwrap();
            for v in ev.component_values(e).unwrap() {
                assert!(v.abs() < 1e-12, "m={m} {}: {v:e}", e.phi);
            }
        }
    }
}

/// The Haar average of θ-weighted invariants at Ω_i H P_i H' equals the
/// symmetrised splitting term for symmetric P_i, including arguments that
/// only become symmetric after a common similarity.
#[test]
fn nonsymmetrised_term_averages_to_symmetrised() {
    let table = shared_invariant_table();
    let m = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (key, es) in groups() {
        let parts = &es[0].parts;
        if parts.iter().map(|p| p.weight()).sum::<usize>() > 3 {
            continue;
        }
        let k = parts.len();
        let profile: Vec<usize> = parts.iter().map(|p| p.weight()).collect();
        let basis = table.basis(&profile).unwrap();
        let om: Vec<Mat> = (0..k).map(|_| pd(m, &mut rng)).collect();
        let qs: Vec<Mat> = (0..k).map(|_| pd(m, &mut rng)).collect();
        let avg = haar_average_basis(basis, &om, &qs).unwrap();
        let bo = basis.evaluate(&om.iter().collect::<Vec<_>>(), &mut WordCache::new()).unwrap();
        let bq = basis.evaluate(&qs.iter().collect::<Vec<_>>(), &mut WordCache::new()).unwrap();
        for e in &es {
            if e.phi.len() > m {
                continue;
            }
            let w = e.weighted_coefficients();
            let lhs: f64 = w.iter().zip(&avg).map(|(a, b)| a * b).sum();
            let rhs = e
                .components
                .iter()
                .map(|c| {
                    let x: f64 = c.coefficients.iter().zip(&bo).map(|(a, b)| a * b).sum();
                    let y: f64 = c.coefficients.iter().zip(&bq).map(|(a, b)| a * b).sum();
                    x * y
                })
                .sum::<f64>()
                / zonal_at_identity(&e.phi, m);
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-12), "{key};{}: {lhs} vs {rhs}", e.phi);
        }
    }
}

/// Sign flips of a component leave every density-facing product unchanged.
#[test]
fn sign_product_invariance() {
    let table = shared_invariant_table();
    let mut flipped = (*table).clone();
    for e in flipped.entries.values_mut() {
        for c in &mut e.components {
            c.theta = -c.theta;
            for u in &mut c.coefficients {
                *u = -*u;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = 3;
    for (key, e) in &table.entries {
        let f = &flipped.entries[key];
        let x: Vec<Mat> = e.parts.iter().map(|_| pd(m, &mut rng)).collect();
        let y: Vec<Mat> = e.parts.iter().map(|_| pd(m, &mut rng)).collect();
        let mut ex = TableEvaluator::new(&table, x.clone()).unwrap();
        let mut ey = TableEvaluator::new(&table, y.clone()).unwrap();
        let mut fx = TableEvaluator::new(&flipped, x).unwrap();
        let mut fy = TableEvaluator::new(&flipped, y).unwrap();
        assert_eq!(ex.weighted(e).unwrap(), fx.weighted(f).unwrap(), "{key}");
        assert_eq!(split_product(e, &mut ex, &mut ey).unwrap(), split_product(f, &mut fx, &mut fy).unwrap(), "{key}");
    }
}

#[test]
fn symmetric_representatives_are_similar_to_products() {
    // Ω M S M^{-1}-type products share traces with Ω-free symmetric forms
    // only through a common similarity; check the representative identity
    // M₁ = M^{1/2} Q₁ M^{-1/2} used by the densities.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = 3;
    let i = Mat::identity(m, m);
    let u1 = { let a = pd(m, &mut rng); &a * (&a + &i).try_inverse().unwrap() };
    let u2 = { let a = pd(m, &mut rng); &a * (&a + &i).try_inverse().unwrap() };
    let u1 = (&u1 + u1.transpose()) * 0.5;
    let u2 = (&u2 + u2.transpose()) * 0.5;
    let t = dncbeta::densities::transforms_m(&u1, &u2).unwrap();
    let r = psd_sqrt(&t.m);
    let back = &r * &t.q1 * r.clone().try_inverse().unwrap();
    assert!((back - &t.m1).amax() < 1e-10);
}
