//! Trace words, trace monomials and the monomial bases that carry invariant
//! polynomials.
//!
//! A word is a cyclic product of argument letters; its canonical form is the
//! lexicographically smallest rotation of the word or of its reversal, which
//! identifies words with equal traces on symmetric arguments. A monomial is
//! a sorted multiset of canonical words.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixkit::{trace_word, Mat};
use crate::partitions::Partition;

pub type Word = Vec<u8>;

const LETTERS: &[u8] = b"ABCDEFGH";

fn rotations(w: &[u8]) -> impl Iterator<Item = Word> + '_ {
    (0..w.len()).map(move |r| {
        let mut v = w.to_vec();
        v.rotate_left(r);
        v
    })
}

/// Smallest rotation of the word or its reversal.
pub fn canonical_word(w: &[u8]) -> Word {
    let mut rev = w.to_vec();
    rev.reverse();
    rotations(w).chain(rotations(&rev).collect::<Vec<_>>()).min().unwrap_or_default()
}

/// Smallest rotation only.
pub fn canonical_rotation(w: &[u8]) -> Word {
    rotations(w).min().unwrap_or_default()
}

/// Literal orientations whose traces are averaged when a canonical word is
/// evaluated on non-symmetric arguments: the word itself, plus its reversal
/// if that is not merely a rotation.
pub fn orientations(w: &[u8]) -> Vec<Word> {
    let mut rev = w.to_vec();
    rev.reverse();
    let a = canonical_rotation(w);
    let b = canonical_rotation(&rev);
    if a == b {
        vec![a]
    } else {
        vec![a, b]
    }
}

/// A product of traces of canonical words.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TraceMonomial(pub Vec<Word>);

impl TraceMonomial {
    pub fn from_words(mut words: Vec<Word>) -> Self {
        for w in &mut words {
            *w = canonical_word(w);
        }
        words.sort();
        TraceMonomial(words)
    }

    pub fn words(&self) -> &[Word] {
        &self.0
    }

    /// Word lengths as a partition: the power-sum index this monomial
    /// restricts to when every argument is the same matrix.
    pub fn length_partition(&self) -> Partition {
        Partition::from_unsorted(self.0.iter().map(|w| w.len() as u32).collect())
    }

    pub fn letter_counts(&self, n_letters: usize) -> Vec<usize> {
        let mut c = vec![0; n_letters];
        for w in &self.0 {
            for &l in w {
                c[l as usize] += 1;
            }
        }
        c
    }
}

impl fmt::Display for TraceMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let words: Vec<String> = self.0.iter().map(|w| word_to_string(w)).collect();
        write!(f, "{}", words.join("."))
    }
}

pub fn word_to_string(w: &[u8]) -> String {
    w.iter().map(|&l| LETTERS[l as usize] as char).collect()
}

pub fn word_from_str(s: &str) -> Result<Word> {
    s.bytes()
        .map(|b| {
            LETTERS
                .iter()
                .position(|&l| l == b)
                .map(|p| p as u8)
                .ok_or_else(|| Error::Input(format!("bad trace letter {:?}", b as char)))
        })
        .collect()
}

impl Serialize for TraceMonomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.iter().map(|w| word_to_string(w)).collect::<Vec<_>>().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TraceMonomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        let words = v
            .iter()
            .map(|s| word_from_str(s))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Ok(TraceMonomial::from_words(words))
    }
}

/// All canonical words with exactly the given letter counts.
fn words_with_counts(counts: &[usize]) -> BTreeSet<Word> {
    fn rec(counts: &mut [usize], cur: &mut Word, out: &mut BTreeSet<Word>) {
        if counts.iter().all(|&c| c == 0) {
            out.insert(canonical_word(cur));
            return;
        }
        for l in 0..counts.len() {
            if counts[l] > 0 {
                counts[l] -= 1;
                cur.push(l as u8);
                rec(counts, cur, out);
                cur.pop();
                counts[l] += 1;
            }
        }
    }
    let mut out = BTreeSet::new();
    if counts.iter().any(|&c| c > 0) {
        rec(&mut counts.to_vec(), &mut Vec::new(), &mut out);
    }
    out
}

/// Every trace monomial whose letter counts equal `profile`, sorted.
pub fn enumerate_monomials(profile: &[usize]) -> Vec<TraceMonomial> {
    // Candidate words: any nonzero sub-profile.
    let mut words: Vec<Word> = Vec::new();
    let mut sub = vec![0usize; profile.len()];
    fn sub_profiles(i: usize, profile: &[usize], sub: &mut Vec<usize>, out: &mut Vec<Word>) {
        if i == profile.len() {
            out.extend(words_with_counts(sub));
            return;
        }
        for c in 0..=profile[i] {
            sub[i] = c;
            sub_profiles(i + 1, profile, sub, out);
        }
        sub[i] = 0;
    }
    sub_profiles(0, profile, &mut sub, &mut words);
    words.sort();
    words.dedup();
    let count = |w: &Word| {
        let mut c = vec![0usize; profile.len()];
        for &l in w {
            c[l as usize] += 1;
        }
        c
    };
    let wc: Vec<Vec<usize>> = words.iter().map(count).collect();
    let mut out = Vec::new();
    fn multisets(
        start: usize,
        remaining: &mut Vec<usize>,
        words: &[Word],
        wc: &[Vec<usize>],
        cur: &mut Vec<Word>,
        out: &mut Vec<TraceMonomial>,
    ) {
        if remaining.iter().all(|&r| r == 0) {
            out.push(TraceMonomial(cur.clone()));
            return;
        }
        for i in start..words.len() {
            if wc[i].iter().zip(remaining.iter()).all(|(a, b)| a <= b) {
                for (r, a) in remaining.iter_mut().zip(&wc[i]) {
                    *r -= a;
                }
                cur.push(words[i].clone());
                multisets(i, remaining, words, wc, cur, out);
                cur.pop();
                for (r, a) in remaining.iter_mut().zip(&wc[i]) {
                    *r += a;
                }
            }
        }
    }
    multisets(0, &mut profile.to_vec(), &words, &wc, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// Trace-monomial basis for a fixed letter-count profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMonomialBasis {
    pub profile: Vec<usize>,
    pub monomials: Vec<TraceMonomial>,
}

impl TraceMonomialBasis {
    pub fn new(profile: &[usize]) -> Self {
        TraceMonomialBasis { profile: profile.to_vec(), monomials: enumerate_monomials(profile) }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn index_of(&self, mono: &TraceMonomial) -> Option<usize> {
        self.monomials.binary_search(mono).ok()
    }

    /// Values of every basis monomial at the given arguments.
    pub fn evaluate(&self, args: &[&Mat], cache: &mut WordCache) -> Result<Vec<f64>> {
        if args.len() < self.profile.len() {
            return Err(Error::DimensionMismatch(format!(
                "basis needs {} arguments, got {}",
                self.profile.len(),
                args.len()
            )));
        }
        self.monomials
            .iter()
            .map(|mono| {
                mono.words().iter().try_fold(1.0, |acc, w| Ok(acc * cache.value(w, args)?))
            })
            .collect()
    }
}

/// Memoized canonical-word traces for one argument tuple.
#[derive(Debug, Default)]
pub struct WordCache {
    values: HashMap<Word, f64>,
}

impl WordCache {
    pub fn new() -> Self {
        WordCache::default()
    }

    /// Trace of a canonical word, averaged over its two orientations when
    /// they differ.
    pub fn value(&mut self, w: &Word, args: &[&Mat]) -> Result<f64> {
        if let Some(&v) = self.values.get(w) {
            return Ok(v);
        }
        let ors = orientations(w);
        let mut acc = 0.0;
        for o in &ors {
            acc += trace_word(o, args)?;
        }
        let v = acc / ors.len() as f64;
        self.values.insert(w.clone(), v);
        Ok(v)
    }
}
