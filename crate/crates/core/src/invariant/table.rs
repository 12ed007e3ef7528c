//! Persisted invariant-polynomial tables and their evaluation.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::calibrate::{calibrate_invariants, InvariantEntry};
use super::trace::{TraceMonomialBasis, WordCache};
use crate::error::{Error, Result};
use crate::matrixkit::Mat;
use crate::partitions::{enumerate_partitions, Partition};
use crate::zonal::{build_zonal_table, zonal_at_identity};
use crate::TABLE_VERSION;

pub const DEFAULT_PAIR_DEGREE: usize = 4;
pub const DEFAULT_TRIPLE_DEGREE: usize = 3;
pub const DEFAULT_CALIBRATION_SEED: u64 = 20090;

/// In-process table at the default ceilings, calibrated on first use.
pub fn shared_invariant_table() -> Arc<InvariantTable> {
    static TABLE: OnceLock<Arc<InvariantTable>> = OnceLock::new();
    TABLE
        .get_or_init(|| {
            let (table, _) = InvariantTable::calibrate(DEFAULT_PAIR_DEGREE, DEFAULT_TRIPLE_DEGREE, DEFAULT_CALIBRATION_SEED)
                .expect("default calibration");
            Arc::new(table)
        })
        .clone()
}

/// "(2)|(1)" for the argument partitions.
pub fn parts_key(parts: &[Partition]) -> String {
    parts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("|")
}

/// "(2)|(1);(2,1)".
pub fn entry_key(parts: &[Partition], phi: &Partition) -> String {
    format!("{};{}", parts_key(parts), phi)
}

pub fn profile_key(profile: &[usize]) -> String {
    profile.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

/// Every tuple of `slots` partitions with total weight at most `max_total`,
/// ordered by total weight, then slot weights, then partitions.
pub fn argument_tuples(slots: usize, max_total: usize) -> Vec<Vec<Partition>> {
    fn weights(slots: usize, total: usize) -> Vec<Vec<usize>> {
        if slots == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in (0..=total).rev() {
            for mut rest in weights(slots - 1, total - first) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    let mut out = Vec::new();
    for total in 0..=max_total {
        for ws in weights(slots, total) {
            let mut tuples: Vec<Vec<Partition>> = vec![Vec::new()];
            for &w in &ws {
                let choices = enumerate_partitions(w, w.max(1));
                tuples = tuples
                    .into_iter()
                    .flat_map(|t| {
                        choices.iter().map(move |c| {
                            let mut t = t.clone();
                            t.push(c.clone());
                            t
                        })
                    })
                    .collect();
            }
            out.extend(tuples);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantTable {
    pub version: String,
    pub max_pair_degree: usize,
    pub max_triple_degree: usize,
    pub bases: BTreeMap<String, TraceMonomialBasis>,
    pub entries: BTreeMap<String, InvariantEntry>,
}

/// Per-key residuals written next to the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub key: String,
    pub m_cal: usize,
    pub theta: f64,
    pub multiplicity: usize,
    pub restriction_residual: f64,
    pub splitting_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFailure {
    pub key: String,
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub version: String,
    pub seed: u64,
    pub records: Vec<CalibrationRecord>,
    pub failures: Vec<CalibrationFailure>,
}

impl InvariantTable {
    /// Calibrates every pair with total degree ≤ `max_pair` and every triple
    /// with total degree ≤ `max_triple`. Keys that fail are withheld and
    /// listed in the report.
    pub fn calibrate(max_pair: usize, max_triple: usize, seed: u64) -> Result<(Self, CalibrationReport)> {
        if max_pair > DEFAULT_PAIR_DEGREE || max_triple > DEFAULT_TRIPLE_DEGREE {
            return Err(Error::DegreeOverflow {
                requested: max_pair.max(max_triple),
                ceiling: if max_pair > DEFAULT_PAIR_DEGREE { DEFAULT_PAIR_DEGREE } else { DEFAULT_TRIPLE_DEGREE },
            });
        }
        let zonal = build_zonal_table(max_pair.max(max_triple).max(1));
        let mut table = InvariantTable {
            version: TABLE_VERSION.to_string(),
            max_pair_degree: max_pair,
            max_triple_degree: max_triple,
            bases: BTreeMap::new(),
            entries: BTreeMap::new(),
        };
        let mut report = CalibrationReport { version: TABLE_VERSION.to_string(), seed, records: Vec::new(), failures: Vec::new() };
        let tuples = argument_tuples(2, max_pair).into_iter().chain(argument_tuples(3, max_triple));
        for (i, parts) in tuples.enumerate() {
            let d: usize = parts.iter().map(|p| p.weight()).sum();
            match calibrate_invariants(&parts, d + 1, &zonal, seed.wrapping_add(i as u64)) {
                Ok((basis, entries)) => {
                    table.bases.insert(profile_key(&basis.profile), basis);
                    for e in entries {
                        let key = entry_key(&e.parts, &e.phi);
                        report.records.push(CalibrationRecord {
                            key: key.clone(),
                            m_cal: e.m_cal,
                            theta: e.theta(),
                            multiplicity: e.multiplicity(),
                            restriction_residual: e.restriction_residual,
                            splitting_residual: e.splitting_residual,
                        });
                        table.entries.insert(key, e);
                    }
                }
                Err(err) => report.failures.push(CalibrationFailure {
                    key: parts_key(&parts),
                    code: err.code().to_string(),
                    message: err.to_string(),
                }),
            }
        }
        Ok((table, report))
    }

    pub fn check_version(&self) -> Result<()> {
        if self.version != TABLE_VERSION {
            return Err(Error::TableVersion { found: self.version.clone(), expected: TABLE_VERSION.to_string() });
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let table: InvariantTable = serde_json::from_str(&text)?;
        table.check_version()?;
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Largest total degree available for tuples of `slots` arguments.
    pub fn ceiling(&self, slots: usize) -> usize {
        if slots == 3 {
            self.max_triple_degree
        } else {
            self.max_pair_degree
        }
    }

    pub fn entry(&self, parts: &[Partition], phi: &Partition) -> Result<&InvariantEntry> {
        let key = entry_key(parts, phi);
        self.entries.get(&key).ok_or(Error::MissingKey(key))
    }

    pub fn entry_by_key(&self, key: &str) -> Result<&InvariantEntry> {
        self.entries.get(key).ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    /// All φ entries stored for the argument partitions.
    pub fn entries_for(&self, parts: &[Partition]) -> Result<Vec<&InvariantEntry>> {
        let prefix = format!("{};", parts_key(parts));
        let found: Vec<&InvariantEntry> =
            self.entries.range(prefix.clone()..).take_while(|(k, _)| k.starts_with(&prefix)).map(|(_, e)| e).collect();
        if found.is_empty() {
            let d: usize = parts.iter().map(|p| p.weight()).sum();
            let ceiling = self.ceiling(parts.len());
            if d > ceiling {
                return Err(Error::DegreeOverflow { requested: d, ceiling });
            }
            return Err(Error::MissingKey(prefix.trim_end_matches(';').to_string()));
        }
        Ok(found)
    }

    pub fn basis(&self, profile: &[usize]) -> Result<&TraceMonomialBasis> {
        let key = profile_key(profile);
        self.bases.get(&key).ok_or(Error::MissingKey(format!("basis {key}")))
    }

    pub fn theta(&self, key: &str) -> Result<f64> {
        Ok(self.entry_by_key(key)?.theta())
    }

    /// Value of the leading polynomial of an entry at the given arguments.
    pub fn invariant_eval(&self, key: &str, args: &[&Mat]) -> Result<f64> {
        let entry = self.entry_by_key(key)?;
        let mut ev = TableEvaluator::new(self, args.iter().map(|a| (*a).clone()).collect())?;
        Ok(ev.component_values(entry)?[0])
    }
}

/// Evaluates many entries at one argument tuple, sharing word traces and
/// basis values.
pub struct TableEvaluator<'a> {
    table: &'a InvariantTable,
    args: Vec<Mat>,
    cache: WordCache,
    basis_values: HashMap<Vec<usize>, Vec<f64>>,
}

impl<'a> TableEvaluator<'a> {
    pub fn new(table: &'a InvariantTable, args: Vec<Mat>) -> Result<Self> {
        if let Some(first) = args.first() {
            let m = first.nrows();
            if args.iter().any(|a| a.nrows() != m || a.ncols() != m) {
                return Err(Error::DimensionMismatch("invariant arguments must share one square shape".into()));
            }
        }
        Ok(TableEvaluator { table, args, cache: WordCache::new(), basis_values: HashMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.args.first().map(|a| a.nrows()).unwrap_or(0)
    }

    fn values(&mut self, profile: &[usize]) -> Result<&[f64]> {
        if !self.basis_values.contains_key(profile) {
            let basis = self.table.basis(profile)?;
            let refs: Vec<&Mat> = self.args.iter().collect();
            let v = basis.evaluate(&refs, &mut self.cache)?;
            self.basis_values.insert(profile.to_vec(), v);
        }
        Ok(&self.basis_values[profile])
    }

    /// u_r'b for every component of the entry.
    pub fn component_values(&mut self, entry: &InvariantEntry) -> Result<Vec<f64>> {
        let profile: Vec<usize> = entry.parts.iter().map(|p| p.weight()).collect();
        let b = self.values(&profile)?;
        Ok(entry.components.iter().map(|c| c.coefficients.iter().zip(b).map(|(u, v)| u * v).sum()).collect())
    }

    /// Σ_r θ_r u_r'b.
    pub fn weighted(&mut self, entry: &InvariantEntry) -> Result<f64> {
        let vals = self.component_values(entry)?;
        Ok(entry.components.iter().zip(vals).map(|(c, v)| c.theta * v).sum())
    }
}

/// Σ_r (u_r'b(X))(u_r'b(Y)) / C_φ(I_m), the symmetrised splitting term.
pub fn split_product(entry: &InvariantEntry, x: &mut TableEvaluator, y: &mut TableEvaluator) -> Result<f64> {
    let m = x.dim();
    let cid = zonal_at_identity(&entry.phi, m);
    if cid == 0.0 {
        return Ok(0.0);
    }
    let vx = x.component_values(entry)?;
    let vy = y.component_values(entry)?;
    Ok(vx.iter().zip(&vy).map(|(a, b)| a * b).sum::<f64>() / cid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixkit::from_rows;

    #[test]
    fn tuple_counts() {
        assert_eq!(argument_tuples(2, 4).len(), 38);
        assert_eq!(argument_tuples(3, 3).len(), 35);
        assert_eq!(argument_tuples(2, 0), vec![vec![Partition::empty(), Partition::empty()]]);
    }

    #[test]
    fn small_table_round_trip_and_lookup() {
        let (table, report) = InvariantTable::calibrate(2, 1, 11).unwrap();
        assert!(report.failures.is_empty());
        let one = Partition::new(vec![1]).unwrap();
        let phis: Vec<String> =
            table.entries_for(&[one.clone(), one.clone()]).unwrap().iter().map(|e| e.phi.to_string()).collect();
        assert_eq!(phis, vec!["(1,1)", "(2)"]);
        let x = from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let key = "(1)|(1);(2)";
        let v = table.invariant_eval(key, &[&x, &x]).unwrap();
        // C_(2)(X) = (p1² + 2 p2)/3.
        let p1 = 3.0;
        let p2 = 4.0 + 1.0 + 0.5;
        let theta = table.theta(key).unwrap();
        assert!((v - theta * (p1 * p1 + 2.0 * p2) / 3.0).abs() < 1e-10);
        let s = serde_json::to_string(&table).unwrap();
        let back: InvariantTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, table);
        assert!(matches!(table.entry_by_key("(9)|(1);(10)"), Err(Error::MissingKey(_))));
        assert!(matches!(
            table.entries_for(&[Partition::new(vec![3]).unwrap(), one]),
            Err(Error::DegreeOverflow { .. })
        ));
    }
}
