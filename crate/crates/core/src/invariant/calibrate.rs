//! Recovery of invariant polynomials from exact Haar integrals.
//!
//! The splitting integral ∫ ∏_s C_{κ_s}(A_s H X_s H') (dH) equals
//! b(A)' G b(X) for an exact kernel G over the trace-monomial basis b, and
//! G = Σ_φ Σ_r u_{φr} u_{φr}' / C_φ(I_m). With R the restriction map to
//! power sums and c_φ the power-sum coefficients of C_φ, R u_{φr} = θ_{φr} c_φ,
//! so C⁻¹ R G isolates w_φ = Σ_r θ_{φr} u_{φr} one φ at a time. Directions
//! with θ = 0 (extra copies of φ in the product) are left in the remainder
//! and separated by their dependence on m.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::haar::{splitting_kernel, splitting_lhs};
use super::trace::{TraceMonomialBasis, WordCache};
use crate::error::{Error, Result};
use crate::matrixkit::Mat;
use crate::partitions::{enumerate_partitions, Partition};
use crate::zonal::{zonal_at_identity, zonal_eval, ZonalTable};

/// One polynomial in the φ-isotypic part of the product; `theta` is zero for
/// every component after the first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub theta: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantEntry {
    pub parts: Vec<Partition>,
    pub phi: Partition,
    pub m_cal: usize,
    pub components: Vec<Component>,
    pub restriction_residual: f64,
    pub splitting_residual: f64,
}

impl InvariantEntry {
    /// θ of the leading component.
    pub fn theta(&self) -> f64 {
        self.components.first().map(|c| c.theta).unwrap_or(0.0)
    }

    /// Σ_r θ_r u_r: the coefficient vector entering nonsymmetrised densities.
    pub fn weighted_coefficients(&self) -> Vec<f64> {
        let n = self.components.first().map(|c| c.coefficients.len()).unwrap_or(0);
        let mut w = vec![0.0; n];
        for c in &self.components {
            for (wi, ci) in w.iter_mut().zip(&c.coefficients) {
                *wi += c.theta * ci;
            }
        }
        w
    }

    pub fn multiplicity(&self) -> usize {
        self.components.len()
    }
}

pub fn profile_of(parts: &[Partition]) -> Vec<usize> {
    parts.iter().map(|p| p.weight()).collect()
}

fn restriction_matrix(basis: &TraceMonomialBasis, phis: &[Partition]) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(phis.len(), basis.len());
    for (j, mono) in basis.monomials.iter().enumerate() {
        let nu = mono.length_partition();
        let i = phis.iter().position(|p| *p == nu).expect("length partition of a monomial");
        r[(i, j)] = 1.0;
    }
    r
}

fn power_sum_matrix(phis: &[Partition], zonal: &ZonalTable) -> Result<DMatrix<f64>> {
    let mut c = DMatrix::zeros(phis.len(), phis.len());
    for (j, phi) in phis.iter().enumerate() {
        for (nu, v) in zonal.power_sum_coefficients(phi)? {
            let i = phis.iter().position(|p| *p == nu).expect("same shell");
            c[(i, j)] = v;
        }
    }
    Ok(c)
}

fn key_name(parts: &[Partition], phi: Option<&Partition>) -> String {
    let p: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
    match phi {
        Some(phi) => format!("{};{}", p.join("|"), phi),
        None => p.join("|"),
    }
}

fn random_pd(m: usize, rng: &mut ChaCha8Rng) -> Mat {
    let z = Mat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    (&z * z.transpose()) / m as f64 + Mat::identity(m, m) * 0.05
}

/// Sum of the component products for one φ.
pub fn split_term(entry: &InvariantEntry, ba: &[f64], bx: &[f64]) -> f64 {
    entry
        .components
        .iter()
        .map(|c| {
            let u = DVector::from_column_slice(&c.coefficients);
            u.dot(&DVector::from_column_slice(ba)) * u.dot(&DVector::from_column_slice(bx))
        })
        .sum()
}

/// Calibrates every φ for the given argument partitions at dimension
/// `m_cal`. The basis is returned alongside the entries.
pub fn calibrate_invariants(
    parts: &[Partition],
    m_cal: usize,
    zonal: &ZonalTable,
    seed: u64,
) -> Result<(TraceMonomialBasis, Vec<InvariantEntry>)> {
    let profile = profile_of(parts);
    let d: usize = profile.iter().sum();
    let basis = TraceMonomialBasis::new(&profile);
    if d == 0 {
        let entry = InvariantEntry {
            parts: parts.to_vec(),
            phi: Partition::empty(),
            m_cal,
            components: vec![Component { theta: 1.0, coefficients: vec![1.0] }],
            restriction_residual: 0.0,
            splitting_residual: 0.0,
        };
        return Ok((basis, vec![entry]));
    }
    if m_cal < d {
        return Err(Error::Conditioning {
            key: key_name(parts, None),
            reason: format!("calibration dimension {m_cal} is below the degree {d}"),
        });
    }
    let phis = enumerate_partitions(d, d);
    let np = phis.len();
    let n = basis.len();
    let g = splitting_kernel(parts, m_cal, zonal, &basis)?;
    let r = restriction_matrix(&basis, &phis);
    let cmat = power_sum_matrix(&phis, zonal)?;
    let cinv = cmat
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("zonal power-sum matrix".into()))?;
    let y = &cinv * &r * &g;
    let gscale = g.amax().max(f64::MIN_POSITIVE);
    let tol = 1e-9;

    let mut leading: Vec<Option<Component>> = vec![None; np];
    for (pi, phi) in phis.iter().enumerate() {
        let cid = zonal_at_identity(phi, m_cal);
        let w: DVector<f64> = y.row(pi).transpose() * cid;
        let c = cmat.column(pi).clone_owned();
        let rw = &r * &w;
        let theta2 = c.dot(&rw) / c.dot(&c);
        let resid = (&rw - &c * theta2).amax();
        if resid > 1e-8 * rw.amax().max(1.0) {
            return Err(Error::Degeneracy {
                key: key_name(parts, Some(phi)),
                reason: format!("restriction is not proportional to the zonal polynomial (residual {resid:e})"),
            });
        }
        let wscale = w.amax();
        if wscale <= tol * gscale * cid.max(1.0) {
            continue;
        }
        if theta2 <= 0.0 {
            return Err(Error::Degeneracy {
                key: key_name(parts, Some(phi)),
                reason: format!("nonpositive θ² = {theta2:e}"),
            });
        }
        let theta = theta2.sqrt();
        leading[pi] = Some(Component { theta, coefficients: (w / theta).iter().copied().collect() });
    }

    let rest_at = |m: usize| -> Result<DMatrix<f64>> {
        let mut gm = splitting_kernel(parts, m, zonal, &basis)?;
        for (pi, phi) in phis.iter().enumerate() {
            if let Some(c) = &leading[pi] {
                let u = DVector::from_column_slice(&c.coefficients);
                gm -= &u * u.transpose() / zonal_at_identity(phi, m);
            }
        }
        Ok(gm)
    };
    let g_rest = rest_at(m_cal)?;
    let mut extra: Vec<Vec<Component>> = vec![Vec::new(); np];
    if g_rest.amax() > tol * gscale {
        // Σ_φ K_φ / C_φ(I_m) at np dimensions, solved entrywise.
        let ms: Vec<usize> = (0..np).map(|j| m_cal + j).collect();
        let rests: Vec<DMatrix<f64>> = ms.iter().map(|&m| rest_at(m)).collect::<Result<_>>()?;
        let v = DMatrix::from_fn(np, np, |j, pi| 1.0 / zonal_at_identity(&phis[pi], ms[j]));
        let vlu = v.lu();
        let mut ks = vec![DMatrix::<f64>::zeros(n, n); np];
        for a in 0..n {
            for b in 0..n {
                let rhs = DVector::from_fn(np, |j, _| rests[j][(a, b)]);
                let sol = vlu.solve(&rhs).ok_or_else(|| Error::Conditioning {
                    key: key_name(parts, None),
                    reason: "dimension separation system is singular".into(),
                })?;
                for pi in 0..np {
                    ks[pi][(a, b)] = sol[pi];
                }
            }
        }
        // Check the separation against a dimension not used to fit it.
        let m_check = m_cal + np;
        let mut pred = DMatrix::zeros(n, n);
        for (pi, phi) in phis.iter().enumerate() {
            pred += &ks[pi] / zonal_at_identity(phi, m_check);
        }
        let actual = rest_at(m_check)?;
        let miss = (&pred - &actual).amax();
        if miss > 1e-7 * gscale {
            return Err(Error::Degeneracy {
                key: key_name(parts, None),
                reason: format!("remainder does not separate by dimension (miss {miss:e})"),
            });
        }
        for (pi, k) in ks.into_iter().enumerate() {
            let k = (&k + k.transpose()) * 0.5;
            let kscale = k.amax();
            if kscale <= 1e-8 * gscale {
                continue;
            }
            let eig = SymmetricEigen::new(k);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            for i in order {
                let lam = eig.eigenvalues[i];
                if lam < -1e-7 * kscale {
                    return Err(Error::Conditioning {
                        key: key_name(parts, Some(&phis[pi])),
                        reason: format!("remainder kernel has negative eigenvalue {lam:e}"),
                    });
                }
                if lam <= 1e-7 * kscale {
                    continue;
                }
                let mut u: DVector<f64> = eig.eigenvectors.column(i) * lam.sqrt();
                // Fix the sign of the eigenvector by its largest entry.
                let imax = u.iamax();
                if u[imax] < 0.0 {
                    u = -u;
                }
                let leak = (&r * &u).amax();
                if leak > 1e-7 * u.amax() {
                    return Err(Error::Degeneracy {
                        key: key_name(parts, Some(&phis[pi])),
                        reason: format!("θ = 0 component restricts to nonzero ({leak:e})"),
                    });
                }
                extra[pi].push(Component { theta: 0.0, coefficients: u.iter().copied().collect() });
            }
        }
    }

    let mut entries = Vec::new();
    for (pi, phi) in phis.iter().enumerate() {
        let mut components: Vec<Component> = leading[pi].take().into_iter().collect();
        components.append(&mut extra[pi]);
        if components.is_empty() {
            continue;
        }
        entries.push(InvariantEntry {
            parts: parts.to_vec(),
            phi: phi.clone(),
            m_cal,
            components,
            restriction_residual: 0.0,
            splitting_residual: 0.0,
        });
    }

    // Diagnostics on fresh random points.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = parts.len();
    for e in entries.iter_mut() {
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let x = random_pd(m_cal, &mut rng);
            let args: Vec<&Mat> = vec![&x; k];
            let b = basis.evaluate(&args, &mut WordCache::new())?;
            let ev = crate::matrixkit::sym_eigenvalues(&x);
            let cz = zonal_eval(zonal, &e.phi, &ev)?;
            for c in &e.components {
                let val: f64 = c.coefficients.iter().zip(&b).map(|(u, v)| u * v).sum();
                worst = worst.max((val - c.theta * cz).abs() / cz.abs().max(1.0));
            }
        }
        e.restriction_residual = worst;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a: Vec<Mat> = (0..k).map(|_| random_pd(m_cal, &mut rng)).collect();
        let x: Vec<Mat> = (0..k).map(|_| random_pd(m_cal, &mut rng)).collect();
        let lhs = splitting_lhs(parts, &a, &x, zonal)?;
        let ba = basis.evaluate(&a.iter().collect::<Vec<_>>(), &mut WordCache::new())?;
        let bx = basis.evaluate(&x.iter().collect::<Vec<_>>(), &mut WordCache::new())?;
        let rhs: f64 = entries.iter().map(|e| split_term(e, &ba, &bx) / zonal_at_identity(&e.phi, m_cal)).sum();
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE));
    }
    for e in entries.iter_mut() {
        e.splitting_residual = worst;
    }
    Ok((basis, entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zonal::build_zonal_table;

    fn p(v: &[u32]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn one_by_one() {
        let zonal = build_zonal_table(4);
        let (basis, entries) = calibrate_invariants(&[p(&[1]), p(&[1])], 3, &zonal, 1).unwrap();
        assert_eq!(basis.len(), 2);
        let phis: Vec<Partition> = entries.iter().map(|e| e.phi.clone()).collect();
        assert_eq!(phis, vec![p(&[2]), p(&[1, 1])]);
        for e in &entries {
            assert_eq!(e.multiplicity(), 1);
            assert!(e.restriction_residual < 1e-9);
            assert!(e.splitting_residual < 1e-8);
            // θ_(2)^{(1),(1)} = θ_(1,1)^{(1),(1)} = 1 for two degree-one factors.
            assert!((e.theta() - 1.0).abs() < 1e-10, "{}: θ = {}", e.phi, e.theta());
        }
    }

    #[test]
    fn empty_slot_gives_zonal() {
        let zonal = build_zonal_table(4);
        let (_, entries) = calibrate_invariants(&[Partition::empty(), p(&[2, 1])], 4, &zonal, 2).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].phi, p(&[2, 1]));
        assert!((entries[0].theta() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn triple_with_multiplicity() {
        let zonal = build_zonal_table(4);
        let (basis, entries) = calibrate_invariants(&[p(&[1]), p(&[1]), p(&[1])], 4, &zonal, 3).unwrap();
        assert_eq!(basis.len(), 5);
        let mult: Vec<(String, usize)> = entries.iter().map(|e| (e.phi.to_string(), e.multiplicity())).collect();
        assert_eq!(
            mult,
            vec![("(3)".to_string(), 1), ("(2,1)".to_string(), 3), ("(1,1,1)".to_string(), 1)]
        );
        for e in &entries {
            assert!(e.restriction_residual < 1e-9);
            assert!(e.splitting_residual < 1e-8);
            for c in &e.components[1..] {
                assert_eq!(c.theta, 0.0);
            }
        }
    }
}
