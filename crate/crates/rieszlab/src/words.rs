//! Signed word expansion for a single tower stage.
//!
//! A product of `p` cosine factors with frequencies `e_0, ..., e_{p-1}`
//! expands into exponentials at every signed combination
//! `w = sum_q eps_q * e_q` with `eps_q` in `{-1, 0, +1}`. This module
//! enumerates all `3^p` combinations in exact arithmetic, groups them by
//! value, and checks the two combinatorial facts the spectral analysis
//! leans on: every value is produced by exactly one combination (up to
//! the position-0 degeneracy described below), and accumulated spacer
//! sums at least triple from one column to the next.
//!
//! Position 0 is special: `e_0 = 0`, so flipping `eps_0` never changes
//! the word value. Every value therefore has its producers in groups of
//! three, one per choice of `eps_0`. Distinctness is asserted on the
//! "clean" representatives with `eps_0 = 0`; enumeration still covers
//! all vectors so table totals stay exact.

use crate::construction::StageSpec;
use crate::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Hard cap on enumerable columns: 3^12 vectors is the largest table
/// that stays cheap to build and hold in memory.
pub const MAX_ENUM_COLUMNS: usize = 12;

/// One signed combination of column positions, entries in `{-1, 0, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SignVector {
    eps: Vec<i8>,
}

impl SignVector {
    pub fn new(eps: Vec<i8>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::InvalidStage("sign vector must be nonempty".into()));
        }
        if let Some(bad) = eps.iter().find(|&&e| !(-1..=1).contains(&e)) {
            return Err(Error::InvalidStage(format!("sign entry {bad} outside -1..=1")));
        }
        Ok(SignVector { eps })
    }

    /// Decodes an enumeration index into base-3 digits, position 0 least
    /// significant, each digit shifted down to `{-1, 0, +1}`.
    fn from_index(mut index: usize, p: usize) -> Self {
        let mut eps = Vec::with_capacity(p);
        for _ in 0..p {
            eps.push((index % 3) as i8 - 1);
            index /= 3;
        }
        SignVector { eps }
    }

    pub fn eps(&self) -> &[i8] {
        &self.eps
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// Positions carrying a nonzero sign.
    pub fn support(&self) -> Vec<usize> {
        self.eps
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(|(q, _)| q)
            .collect()
    }

    /// Support size, the `r` of the factor-count bound.
    pub fn r(&self) -> usize {
        self.eps.iter().filter(|&&e| e != 0).count()
    }

    /// True when position 0 is unused, making this the canonical
    /// representative of its value class.
    pub fn is_clean(&self) -> bool {
        self.eps[0] == 0
    }

    pub fn negated(&self) -> Self {
        SignVector { eps: self.eps.iter().map(|&e| -e).collect() }
    }

    /// Exact word value against the given stage exponents.
    pub fn value(&self, stage: &StageSpec) -> Result<BigInt> {
        if self.eps.len() != stage.columns() {
            return Err(Error::InvalidStage(format!(
                "sign vector length {} does not match {} columns",
                self.eps.len(),
                stage.columns()
            )));
        }
        let exps: Vec<BigInt> =
            stage.exponents().into_iter().map(BigInt::from).collect();
        Ok(self.value_with(&exps))
    }

    fn value_with(&self, exps: &[BigInt]) -> BigInt {
        let mut acc = BigInt::zero();
        for (q, &e) in self.eps.iter().enumerate() {
            match e {
                1 => acc += &exps[q],
                -1 => acc -= &exps[q],
                _ => {}
            }
        }
        acc
    }
}

/// All sign vectors producing one word value.
#[derive(Debug, Clone)]
pub struct WordEntry {
    pub value: BigInt,
    /// Every producer, in enumeration-index order.
    pub producers: Vec<SignVector>,
}

impl WordEntry {
    /// Producers whose position 0 is unused.
    pub fn clean_producers(&self) -> Vec<&SignVector> {
        self.producers.iter().filter(|v| v.is_clean()).collect()
    }

    /// Support size of the unique clean producer, absent when the value
    /// is ambiguous.
    pub fn r(&self) -> Option<usize> {
        let clean = self.clean_producers();
        match clean.as_slice() {
            [only] => Some(only.r()),
            _ => None,
        }
    }
}

/// The full word table of a stage: every one of the `3^p` sign vectors,
/// grouped by exact value and sorted by value.
#[derive(Debug, Clone)]
pub struct WordTable {
    stage: StageSpec,
    entries: Vec<WordEntry>,
}

impl WordTable {
    pub fn stage(&self) -> &StageSpec {
        &self.stage
    }

    pub fn entries(&self) -> &[WordEntry] {
        &self.entries
    }

    /// Total vectors across entries, always `3^p`.
    pub fn total_vectors(&self) -> usize {
        self.entries.iter().map(|e| e.producers.len()).sum()
    }

    /// Largest word value; the all-(+1) vector realizes it.
    pub fn n_max(&self) -> &BigInt {
        &self.entries.last().expect("table is never empty").value
    }

    /// Entry lookup by exact value.
    pub fn entry(&self, w: &BigInt) -> Option<&WordEntry> {
        self.entries
            .binary_search_by(|e| e.value.cmp(w))
            .ok()
            .map(|i| &self.entries[i])
    }
}

/// Expands all `3^p` sign vectors of a stage into a value-sorted table.
///
/// Enumeration parallelizes over index blocks; the result is
/// deterministic because vectors are grouped in index order afterwards.
pub fn enumerate_words(stage: &StageSpec) -> Result<WordTable> {
    let p = stage.columns();
    if p > MAX_ENUM_COLUMNS {
        return Err(Error::WordLimitExceeded { got: p, max: MAX_ENUM_COLUMNS });
    }
    let exps: Vec<BigInt> = stage.exponents().into_iter().map(BigInt::from).collect();
    let total = 3usize.pow(p as u32);
    let valued: Vec<(BigInt, SignVector)> = (0..total)
        .into_par_iter()
        .map(|index| {
            let v = SignVector::from_index(index, p);
            (v.value_with(&exps), v)
        })
        .collect();
    let mut grouped: BTreeMap<BigInt, Vec<SignVector>> = BTreeMap::new();
    for (value, vector) in valued {
        grouped.entry(value).or_default().push(vector);
    }
    let entries = grouped
        .into_iter()
        .map(|(value, producers)| WordEntry { value, producers })
        .collect();
    Ok(WordTable { stage: stage.clone(), entries })
}

/// Outcome of the injectivity check on clean vectors.
#[derive(Debug, Clone)]
pub struct DistinctReport {
    pub distinct: bool,
    /// Pairs of clean vectors sharing a value, in table order.
    pub collisions: Vec<(SignVector, SignVector)>,
}

/// Checks that every word value has exactly one clean producer.
///
/// Dressed vectors (nonzero `eps_0`) are excluded: they repeat each
/// clean value verbatim because `e_0 = 0`, so counting them would flag
/// every stage. Collision witnesses pair the first clean producer of an
/// offending value with each further one.
pub fn check_distinct(table: &WordTable) -> DistinctReport {
    let mut collisions = Vec::new();
    for entry in &table.entries {
        let clean = entry.clean_producers();
        for extra in clean.iter().skip(1) {
            collisions.push(((*clean[0]).clone(), (**extra).clone()));
        }
    }
    DistinctReport { distinct: collisions.is_empty(), collisions }
}

/// True iff accumulated spacer sums at least triple column over column:
/// `s(q+1) >= 3 s(q)` for every `q >= 1`.
pub fn check_triple_growth(stage: &StageSpec) -> bool {
    let s = stage.partial_sums();
    (1..stage.columns()).all(|q| s[q + 1] >= &s[q] * 3u32)
}

/// Support size of the unique clean producer of `w`.
///
/// Errors when `w` is not a word of the stage, or when distinctness
/// fails at `w` and the support is ambiguous.
pub fn r_of_word(table: &WordTable, w: &BigInt) -> Result<usize> {
    let entry = table
        .entry(w)
        .ok_or_else(|| Error::WordLookup(format!("{w} is not a word of this stage")))?;
    entry.r().ok_or_else(|| {
        Error::WordLookup(format!(
            "{w} has {} clean producers, support is ambiguous",
            entry.clean_producers().len()
        ))
    })
}

/// Closed form for the maximum word value: the all-(+1) vector gives
/// `(p(p-1)/2) h + sum_{q=1}^{p-1} s(q)`.
pub fn expected_n_max(stage: &StageSpec) -> BigUint {
    let p = stage.columns();
    let s = stage.partial_sums();
    let mut acc = &stage.height * BigUint::from(p * (p - 1) / 2);
    for sq in s.iter().take(p).skip(1) {
        acc += sq;
    }
    acc
}
