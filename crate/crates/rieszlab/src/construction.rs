//! Tower sequences: heights, spacers, exponents, and the per-stage
//! admissibility conditions.
//!
//! A stage holds a height `h`, a cutting number `p`, and a spacer vector
//! `a_1..a_p`. Cutting the current stack into `p` columns and placing `a_j`
//! spacer levels above column `j` yields the next height
//!
//! ```text
//! h' = p*h + a_1 + ... + a_p
//! ```
//!
//! with the base stack a single level, `h_0 = 1`. Column `j` (counted from
//! 0) starts at level `j*h + s(j)` of the new stack, where `s(j)` is the
//! sum of the first `j` spacers; those starting levels are the exponents of
//! the stage polynomial studied in `trigpoly` and `riesz`. The top spacer
//! `a_p` raises `h'` but never appears in an exponent.
//!
//! Heights grow geometrically with depth, so all of `h`, `s(j)`, and the
//! exponents are big integers. Ratios needed as floats go through
//! [`ratio_f64`], which keeps 64 significant bits before rounding.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::{Error, Result};

/// One cutting-and-stacking stage: index, height, and spacer vector.
///
/// Invariants enforced at construction: at least one column, height at
/// least 1. Spacers are nonnegative by type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSpec {
    /// Stage index `k` (0 is the base stage with height 1 in a built tower;
    /// standalone stages may carry any index).
    pub index: usize,
    /// Height `h_k`.
    pub height: BigUint,
    /// Spacer counts `a_1..a_p`, one per column.
    pub spacers: Vec<BigUint>,
}

impl StageSpec {
    pub fn new(index: usize, height: BigUint, spacers: Vec<BigUint>) -> Result<Self> {
        if spacers.is_empty() {
            return Err(Error::InvalidStage(format!(
                "stage {index}: need at least one column"
            )));
        }
        if height.is_zero() {
            return Err(Error::InvalidStage(format!("stage {index}: height must be >= 1")));
        }
        Ok(StageSpec { index, height, spacers })
    }

    /// Stage with `p` columns and no spacers at all.
    pub fn zero_spacers(index: usize, height: BigUint, p: usize) -> Result<Self> {
        StageSpec::new(index, height, vec![BigUint::zero(); p])
    }

    /// Number of columns `p_k`.
    pub fn columns(&self) -> usize {
        self.spacers.len()
    }

    /// Prefix sums `s(0)=0, s(1)=a_1, ..., s(p)=a_1+...+a_p`.
    /// Length is `p+1` and the list is nondecreasing.
    pub fn partial_sums(&self) -> Vec<BigUint> {
        let mut s = Vec::with_capacity(self.spacers.len() + 1);
        let mut acc = BigUint::zero();
        s.push(acc.clone());
        for a in &self.spacers {
            acc += a;
            s.push(acc.clone());
        }
        s
    }

    /// Total spacer count `s(p)`.
    pub fn total_spacers(&self) -> BigUint {
        self.spacers.iter().sum()
    }

    /// Column starting levels `e_j = j*h + s(j)` for `j = 0..p-1`,
    /// strictly increasing with `e_0 = 0`.
    pub fn exponents(&self) -> Vec<BigUint> {
        let s = self.partial_sums();
        let mut out = Vec::with_capacity(self.columns());
        for j in 0..self.columns() {
            out.push(BigUint::from(j) * &self.height + &s[j]);
        }
        out
    }

    /// Largest exponent `e_{p-1}`. Strictly below `next_height()`.
    pub fn max_exponent(&self) -> BigUint {
        let s = self.partial_sums();
        let p = self.columns();
        BigUint::from(p - 1) * &self.height + &s[p - 1]
    }

    /// Height of the next stage, `p*h + s(p)`.
    pub fn next_height(&self) -> BigUint {
        BigUint::from(self.columns()) * &self.height + self.total_spacers()
    }

    /// Smallest spacer of the stage.
    pub fn min_spacer(&self) -> BigUint {
        self.spacers.iter().min().cloned().expect("at least one column")
    }
}

/// A built tower: consecutive stages whose heights satisfy the recursion.
#[derive(Debug, Clone)]
pub struct TowerSequence {
    pub stages: Vec<StageSpec>,
    /// Label of the generating rule, carried into reports.
    pub family_name: String,
}

impl TowerSequence {
    /// Validates contiguous indices from 0, `h_0 = 1`, and the height chain
    /// `h_{k+1} = p_k h_k + s_k(p_k)`.
    pub fn new(stages: Vec<StageSpec>, family_name: impl Into<String>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidTower("no stages".into()));
        }
        if !stages[0].height.is_one() {
            return Err(Error::InvalidTower("h_0 must be 1".into()));
        }
        for (k, stage) in stages.iter().enumerate() {
            if stage.index != k {
                return Err(Error::InvalidTower(format!(
                    "stage at position {k} carries index {}",
                    stage.index
                )));
            }
        }
        for pair in stages.windows(2) {
            let expect = pair[0].next_height();
            if pair[1].height != expect {
                return Err(Error::InvalidTower(format!(
                    "height chain broken at stage {}: expected {}, found {}",
                    pair[1].index, expect, pair[1].height
                )));
            }
        }
        Ok(TowerSequence { stages, family_name: family_name.into() })
    }

    pub fn depth(&self) -> usize {
        self.stages.len() - 1
    }

    /// Wraps a standalone stage as stage 1 of a minimal valid tower: a
    /// base stage of height 1 with a single column whose spacer pads the
    /// height chain up to the wrapped stage.
    pub fn from_single_stage(stage: StageSpec) -> Result<Self> {
        let pad = &stage.height - BigUint::one();
        let base = StageSpec::new(0, BigUint::one(), vec![pad])?;
        let mut wrapped = stage;
        wrapped.index = 1;
        TowerSequence::new(vec![base, wrapped], "padded")
    }

    /// Heights `h_0..h_{depth+1}`; one more entry than there are stages,
    /// the last being the height the next stage would start from.
    pub fn heights(&self) -> Vec<BigUint> {
        let mut hs: Vec<BigUint> = self.stages.iter().map(|s| s.height.clone()).collect();
        hs.push(self.stages.last().expect("nonempty").next_height());
        hs
    }
}

/// Spacer-generation rules for [`build_tower`].
#[derive(Debug, Clone)]
pub enum SpacerRule {
    /// Fully explicit per-stage spacer lists.
    Explicit { stages: Vec<Vec<BigUint>> },
    /// No spacers; stage `k` uses `columns[min(k, len-1)]` columns, so a
    /// single entry gives a constant cutting number.
    ZeroSpacers { columns: Vec<usize> },
    /// Spacers `(0, 3c, 9c, ..., 3^{p-1} c)` with `p` chosen maximal such
    /// that the total stays below `h/2`. While no `p >= 2` qualifies (the
    /// first few stages, where `h` is tiny), the rule emits a two-column
    /// zero-spacer stage to let the height grow.
    Geometric { scale: BigUint },
    /// Spacers `(0, 1, ..., p-1)` with `p = base_columns + k` at stage `k`.
    /// Negative control: fails the domination condition once `p >= 4`.
    Staircase { base_columns: usize },
}

impl SpacerRule {
    pub fn family_name(&self) -> &'static str {
        match self {
            SpacerRule::Explicit { .. } => "explicit",
            SpacerRule::ZeroSpacers { .. } => "zero-spacers",
            SpacerRule::Geometric { .. } => "geometric",
            SpacerRule::Staircase { .. } => "staircase",
        }
    }

    /// Spacer list for stage `k` at height `h`.
    fn spacers_at(&self, k: usize, h: &BigUint) -> Result<Vec<BigUint>> {
        match self {
            SpacerRule::Explicit { stages } => stages.get(k).cloned().ok_or_else(|| {
                Error::InvalidTower(format!(
                    "explicit rule provides {} stages, stage {k} requested",
                    stages.len()
                ))
            }),
            SpacerRule::ZeroSpacers { columns } => {
                if columns.is_empty() {
                    return Err(Error::InvalidTower("zero-spacer rule needs a column count".into()));
                }
                let p = columns[k.min(columns.len() - 1)];
                if p < 1 {
                    return Err(Error::InvalidStage(format!("stage {k}: columns must be >= 1")));
                }
                Ok(vec![BigUint::zero(); p])
            }
            SpacerRule::Geometric { scale } => {
                if scale.is_zero() {
                    return Err(Error::InvalidTower("geometric rule needs scale >= 1".into()));
                }
                Ok(geometric_spacers(h, scale))
            }
            SpacerRule::Staircase { base_columns } => {
                let p = base_columns + k;
                if p < 1 {
                    return Err(Error::InvalidStage(format!("stage {k}: columns must be >= 1")));
                }
                Ok((0..p).map(BigUint::from).collect())
            }
        }
    }
}

/// Geometric spacer list at height `h`: the largest `p` with
/// `c*(3^p - 3) < h` (that is, total spacers below `h/2`), falling back to
/// a two-column zero-spacer stage when even `p = 2` does not fit.
fn geometric_spacers(h: &BigUint, c: &BigUint) -> Vec<BigUint> {
    let three = BigUint::from(3u32);
    // Largest p >= 2 with c*(3^p - 3) < h, if any.
    let mut p = 1usize;
    let mut pow = three.clone(); // 3^p
    loop {
        let next_pow = &pow * &three; // 3^{p+1}
        let total_doubled = c * (&next_pow - &three); // 2*s(p+1)
        if total_doubled < *h {
            p += 1;
            pow = next_pow;
        } else {
            break;
        }
    }
    if p < 2 {
        return vec![BigUint::zero(); 2];
    }
    let mut spacers = Vec::with_capacity(p);
    spacers.push(BigUint::zero());
    let mut step = c * &three; // 3^j * c for j = 1..
    for _ in 1..p {
        spacers.push(step.clone());
        step *= &three;
    }
    spacers
}

/// Standalone geometric stage with exactly `p` columns: spacers
/// `(0, 3c, ..., 3^{p-1} c)` and the smallest height at which the
/// geometric rule would pick this very `p`, namely `h = c*(3^p - 2)`.
/// Useful as a fixture for cutting numbers the depth-built family skips.
pub fn geometric_stage_with_columns(p: usize, c: &BigUint) -> Result<StageSpec> {
    if p < 2 {
        return Err(Error::InvalidStage("geometric fixture needs p >= 2".into()));
    }
    let three = BigUint::from(3u32);
    let h = c * (three.pow(p as u32) - BigUint::from(2u32));
    let mut spacers = Vec::with_capacity(p);
    spacers.push(BigUint::zero());
    let mut step = c * &three;
    for _ in 1..p {
        spacers.push(step.clone());
        step *= &three;
    }
    StageSpec::new(0, h, spacers)
}

/// Builds stages `0..=depth` from the rule, starting at `h_0 = 1`.
///
/// `height_bit_cap` bounds the bit length of every derived height
/// (exponents are strictly smaller than the next height, so they are
/// covered by the same cap). Exceeding it is an error rather than a
/// truncation: runaway growth is a configuration mistake.
pub fn build_tower(rule: &SpacerRule, depth: usize, height_bit_cap: u64) -> Result<TowerSequence> {
    let mut stages = Vec::with_capacity(depth + 1);
    let mut h = BigUint::one();
    for k in 0..=depth {
        let spacers = rule.spacers_at(k, &h)?;
        let stage = StageSpec::new(k, h.clone(), spacers)?;
        let next = stage.next_height();
        if next.bits() > height_bit_cap {
            return Err(Error::HeightCapExceeded {
                stage: k + 1,
                bits: next.bits(),
                cap: height_bit_cap,
            });
        }
        stages.push(stage);
        h = next;
    }
    TowerSequence::new(stages, rule.family_name())
}

/// Ratio of two big integers as f64, keeping 64 significant bits of the
/// quotient before the final rounding. Good to one ulp for the magnitudes
/// used here; avoids overflowing f64 conversion of the operands themselves.
pub fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "ratio_f64: zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    // Scale so the quotient carries 64 fractional bits, then divide out.
    let scaled = (num << 64u32) / den;
    let bits = scaled.bits();
    if bits <= 1024 {
        scaled.to_f64().expect("fits after check") / 2f64.powi(64)
    } else {
        // Quotient itself is astronomically large; callers never need these,
        // but keep the conversion total instead of panicking.
        f64::INFINITY
    }
}

/// The two per-stage spacer conditions behind the singularity results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpacerConditions {
    /// Each spacer dominates twice the sum of its predecessors:
    /// `a_{j+1} >= 2 s(j)` for `j = 0..p-1`.
    pub domination: bool,
    /// Total spacers stay below half the height: `2 s(p) < h`.
    pub half_total: bool,
}

/// Evaluates the domination and half-total conditions for one stage.
pub fn spacer_conditions(stage: &StageSpec) -> SpacerConditions {
    let s = stage.partial_sums();
    let p = stage.columns();
    let domination = (0..p).all(|j| stage.spacers[j] >= &s[j] * 2u32);
    let half_total = &s[p] * 2u32 < stage.height;
    SpacerConditions { domination, half_total }
}

/// Centered variant of the half-total condition:
/// `(s(p) - p*min a) / (h + min a) < 1/2`, which subtracts the best
/// constant shift from the spacers before comparing against the height.
pub fn centered_half_total(stage: &StageSpec) -> bool {
    let p = stage.columns();
    let m = stage.min_spacer();
    let centered = stage.total_spacers() - BigUint::from(p) * &m;
    centered * 2u32 < &stage.height + m
}

/// The centered spacer-to-height ratio `(s(p) - p*min a)/(h + min a)`,
/// the quantity whose smallness expresses restricted growth. Always >= 0.
pub fn restricted_growth_ratio(stage: &StageSpec) -> f64 {
    let p = stage.columns();
    let m = stage.min_spacer();
    let num = stage.total_spacers() - BigUint::from(p) * &m;
    let den = &stage.height + m;
    ratio_f64(&num, &den)
}

/// Per-stage ratios for a whole tower; callers inspect the trend toward 0.
pub fn restricted_growth_ratios(tower: &TowerSequence) -> Vec<f64> {
    tower.stages.iter().map(restricted_growth_ratio).collect()
}

/// Partial sums of `s_k(p_k) / (p_k h_k)` over stages. Bounded partial
/// sums mean the spacers add only finite measure to the space.
pub fn finiteness_partials(tower: &TowerSequence) -> Vec<f64> {
    let mut acc = 0.0;
    tower
        .stages
        .iter()
        .map(|st| {
            let den = BigUint::from(st.columns()) * &st.height;
            acc += ratio_f64(&st.total_spacers(), &den);
            acc
        })
        .collect()
}

/// Partial sums of `1/p_k^2` over stages; their boundedness is the cheap
/// sufficient condition for singularity in the large-cutting-number regime.
pub fn inv_p_sq_partials(tower: &TowerSequence) -> Vec<f64> {
    let mut acc = 0.0;
    tower
        .stages
        .iter()
        .map(|st| {
            let p = st.columns() as f64;
            acc += 1.0 / (p * p);
            acc
        })
        .collect()
}

/// Everything the condition checkers know about one stage, in report form.
#[derive(Debug, Clone, Serialize)]
pub struct StageConditions {
    pub stage: usize,
    pub columns: usize,
    pub height_bits: u64,
    pub domination: bool,
    pub half_total: bool,
    pub centered_half_total: bool,
    pub restricted_growth_ratio: f64,
    pub inv_p_sq_partial: f64,
    pub finiteness_partial: f64,
}

/// Per-stage condition table for a tower.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub stages: Vec<StageConditions>,
}

pub fn condition_report(tower: &TowerSequence) -> ConditionReport {
    let growth = restricted_growth_ratios(tower);
    let fin = finiteness_partials(tower);
    let inv = inv_p_sq_partials(tower);
    let stages = tower
        .stages
        .iter()
        .zip(growth.iter().zip(fin.iter().zip(inv.iter())))
        .map(|(st, (g, (f, i)))| {
            let c = spacer_conditions(st);
            StageConditions {
                stage: st.index,
                columns: st.columns(),
                height_bits: st.height.bits(),
                domination: c.domination,
                half_total: c.half_total,
                centered_half_total: centered_half_total(st),
                restricted_growth_ratio: *g,
                inv_p_sq_partial: *i,
                finiteness_partial: *f,
            }
        })
        .collect();
    ConditionReport { stages }
}
