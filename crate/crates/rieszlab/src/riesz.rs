//! Partial Riesz products and the associated singularity diagnostics.
//!
//! The spectral-type candidate of a tower is the weak-* limit of the
//! densities `prod_{k=1}^{n} |P_k|^2`, where `P_k` is the normalized
//! exponential polynomial of stage `k`. Stage 0 is excluded from every
//! product: its polynomial is the constant 1 (height 1, single relevant
//! exponent), so including it would only pad indices.
//!
//! Everything here reports numbers, not verdicts. The singularity
//! criterion is a statement about an infimum over all finite stage
//! subsequences; a finite run can exhibit the decay trend but cannot
//! certify the limit, so callers get the decreasing sequence and its
//! convergence deltas and draw their own conclusions.

use crate::construction::TowerSequence;
use crate::trigpoly::{
    compensated_sum, doubling_mean, riemann_mean, ConvergedMean, GridFunction, GridPolicy,
    SparseExponentPoly, UniformGrid,
};
use crate::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rayon::prelude::*;

/// Strictly increasing stage indices `n_1 < ... < n_k`, all >= 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorSelection {
    indices: Vec<usize>,
}

impl FactorSelection {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidStage("factor selection must be nonempty".into()));
        }
        if indices[0] == 0 {
            return Err(Error::InvalidStage(
                "stage 0 has the constant polynomial and is excluded from products".into(),
            ));
        }
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidStage(format!(
                "selection indices must strictly increase, got {indices:?}"
            )));
        }
        Ok(FactorSelection { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_index(&self) -> usize {
        *self.indices.last().expect("selection is nonempty")
    }
}

/// A product-integral estimate with the grid evidence attached. Values
/// are never reported without their final doubling delta.
#[derive(Debug, Clone)]
pub struct RieszEstimate {
    pub value: f64,
    pub grid_log2: u32,
    pub convergence_delta: f64,
    pub converged: bool,
    pub selection: FactorSelection,
}

impl RieszEstimate {
    pub fn grid_n(&self) -> u64 {
        1u64 << self.grid_log2
    }
}

fn check_stage_range(tower: &TowerSequence, indices: &[usize]) -> Result<()> {
    let depth = tower.depth();
    for &i in indices {
        if i == 0 || i > depth {
            return Err(Error::InvalidStage(format!(
                "stage index {i} outside the product range 1..={depth}"
            )));
        }
    }
    Ok(())
}

/// Degree of `prod |P_k|^2` over the given stages: each squared modulus
/// contributes frequencies up to its largest exponent.
pub fn product_degree(tower: &TowerSequence, indices: &[usize]) -> BigUint {
    indices
        .iter()
        .map(|&i| tower.stages[i].max_exponent())
        .fold(BigUint::zero(), |acc, e| acc + e)
}

/// Absolute values of a stage polynomial, sampled at the grid's offset
/// nodes `t_m = 2*pi*(m + 1/2)/N`.
///
/// Every quadrature in this module goes through here, so they all share
/// one node family, and it must be the offset one: each stage peaks at
/// the subgroup points (`sqrt(p)` exactly at `t = 0`), so subgroup-node
/// means of deep products of wide stages are swamped by those few nodes;
/// see [`SparseExponentPoly::eval_on_midpoint_grid`]. Exact-regime
/// quadratures (the mass checks) are indifferent to the choice.
fn stage_abs(tower: &TowerSequence, index: usize, grid: &UniformGrid) -> Vec<f64> {
    SparseExponentPoly::from_stage(&tower.stages[index])
        .eval_on_midpoint_grid(grid)
        .modulus()
        .values
}

/// Pointwise product of `|P_k|^2` over stages `1..=n` on the given grid.
/// `n = 0` is the empty product, identically 1.
pub fn partial_product_sq(tower: &TowerSequence, n: usize, grid: &UniformGrid) -> Result<GridFunction> {
    if n > tower.depth() {
        return Err(Error::InvalidStage(format!(
            "partial product needs {n} stages, tower depth is {}",
            tower.depth()
        )));
    }
    let mut values = vec![1.0f64; grid.len()];
    for k in 1..=n {
        let abs = stage_abs(tower, k, grid);
        for (v, a) in values.iter_mut().zip(&abs) {
            *v *= a * a;
        }
    }
    Ok(GridFunction { grid: *grid, values })
}

/// Mean of the nth partial density on its exactness-rule grid. The
/// product is a trigonometric polynomial, so the grid mean IS the
/// integral once the grid outruns the degree; expected to be 1.
pub fn mass(tower: &TowerSequence, n: usize, policy: &GridPolicy) -> Result<(f64, u32)> {
    let indices: Vec<usize> = (1..=n).collect();
    check_stage_range(tower, &indices)?;
    let degree = product_degree(tower, &indices);
    let log2 = policy.exact_log2(&(degree * 2u32))?;
    let grid = UniformGrid::new(log2)?;
    Ok((riemann_mean(&partial_product_sq(tower, n, &grid)?), log2))
}

/// Mean of `prod |P_{n_i}|^2` over an arbitrary selection on its exact
/// grid. Used to anchor the Cauchy-Schwarz chain for `l1_product`.
pub fn selection_sq_mass(
    tower: &TowerSequence,
    selection: &FactorSelection,
    policy: &GridPolicy,
) -> Result<(f64, u32)> {
    check_stage_range(tower, selection.indices())?;
    let degree = product_degree(tower, selection.indices());
    let log2 = policy.exact_log2(&(degree * 2u32))?;
    let grid = UniformGrid::new(log2)?;
    let mut values = vec![1.0f64; grid.len()];
    for &i in selection.indices() {
        let abs = stage_abs(tower, i, &grid);
        for (v, a) in values.iter_mut().zip(&abs) {
            *v *= a * a;
        }
    }
    Ok((riemann_mean(&GridFunction { grid, values }), log2))
}

/// Doubling-converged mean of `prod |P_{n_i}|` (absolute values, not
/// squared). The modulus product is not a polynomial, so no grid is
/// exact; the estimate carries its final doubling delta instead.
pub fn l1_product(
    tower: &TowerSequence,
    selection: &FactorSelection,
    policy: &GridPolicy,
) -> Result<RieszEstimate> {
    check_stage_range(tower, selection.indices())?;
    let degree = product_degree(tower, selection.indices());
    let start = policy.start_log2(&degree);
    let mean = doubling_mean(start, policy, |log2| {
        let grid = UniformGrid::new(log2)?;
        let mut values = vec![1.0f64; grid.len()];
        for &i in selection.indices() {
            let abs = stage_abs(tower, i, &grid);
            for (v, a) in values.iter_mut().zip(&abs) {
                *v *= a;
            }
        }
        Ok(riemann_mean(&GridFunction { grid, values }))
    })?;
    Ok(RieszEstimate {
        value: mean.value,
        grid_log2: mean.grid_log2,
        convergence_delta: mean.convergence_delta,
        converged: mean.converged,
        selection: selection.clone(),
    })
}

/// Greedy minimizer for the product-integral criterion.
///
/// Starting from the empty product, each step adds the unused window
/// stage that minimizes the running `l1_product`; the selection is kept
/// sorted, so the increasing-indices invariant holds whatever order the
/// greedy discovers them in. Ties break toward the smallest index.
/// Returns the final selection and one estimate per step; the value
/// sequence is nonincreasing up to quadrature tolerance because a
/// candidate multiplies the integrand by a factor of mean 1.
pub fn greedy_bourgain(
    tower: &TowerSequence,
    budget: usize,
    window: std::ops::RangeInclusive<usize>,
    policy: &GridPolicy,
) -> Result<(FactorSelection, Vec<RieszEstimate>)> {
    if budget == 0 {
        return Err(Error::InvalidStage("greedy budget must be >= 1".into()));
    }
    let lo = (*window.start()).max(1);
    let hi = (*window.end()).min(tower.depth());
    if lo > hi {
        return Err(Error::InvalidStage(format!(
            "window {window:?} selects no stages of a depth-{} tower",
            tower.depth()
        )));
    }

    // Running product of the chosen factors, materialized lazily per
    // grid size so every candidate evaluation is a plain dot product.
    let mut chosen: Vec<usize> = Vec::new();
    let mut running: std::collections::BTreeMap<u32, Vec<f64>> = std::collections::BTreeMap::new();
    let mut steps: Vec<RieszEstimate> = Vec::new();

    for _ in 0..budget {
        let candidates: Vec<usize> =
            (lo..=hi).filter(|i| !chosen.contains(i)).collect();
        if candidates.is_empty() {
            break;
        }
        // Make sure the running product exists on every ladder size the
        // candidates can request.
        let degree_all =
            product_degree(tower, &chosen) + product_degree(tower, &candidates);
        let start = policy.start_log2(&degree_all);
        for log2 in start.saturating_sub(1).max(1)..=policy.cap_log2 {
            if !running.contains_key(&log2) {
                let grid = UniformGrid::new(log2)?;
                let mut values = vec![1.0f64; grid.len()];
                for &i in &chosen {
                    let abs = stage_abs(tower, i, &grid);
                    for (v, a) in values.iter_mut().zip(&abs) {
                        *v *= a;
                    }
                }
                running.insert(log2, values);
            }
        }
        let running_ref = &running;
        let results: Vec<Result<ConvergedMean>> = candidates
            .par_iter()
            .map(|&cand| {
                doubling_mean(start, policy, |log2| {
                    let grid = UniformGrid::new(log2)?;
                    let q = &running_ref[&log2];
                    let abs = stage_abs(tower, cand, &grid);
                    let dot = compensated_sum(q.iter().zip(&abs).map(|(a, b)| a * b));
                    Ok(dot / grid.len() as f64)
                })
            })
            .collect();
        let mut best: Option<(f64, usize, ConvergedMean)> = None;
        for (&cand, res) in candidates.iter().zip(results) {
            let mean = res?;
            let better = match &best {
                None => true,
                Some((bv, bi, _)) => mean.value < *bv || (mean.value == *bv && cand < *bi),
            };
            if better {
                best = Some((mean.value, cand, mean));
            }
        }
        let (_, cand, mean) = best.expect("candidates is nonempty");
        chosen.push(cand);
        chosen.sort_unstable();
        for (log2, values) in running.iter_mut() {
            let grid = UniformGrid::new(*log2)?;
            let abs = stage_abs(tower, cand, &grid);
            for (v, a) in values.iter_mut().zip(&abs) {
                *v *= a;
            }
        }
        steps.push(RieszEstimate {
            value: mean.value,
            grid_log2: mean.grid_log2,
            convergence_delta: mean.convergence_delta,
            converged: mean.converged,
            selection: FactorSelection::new(chosen.clone())?,
        });
    }
    Ok((FactorSelection::new(chosen)?, steps))
}

/// Both sides of the one-step contraction bound
/// `int Q|P_m| <= (int Q + int Q|P_m|^2)/2 - (int Q||P_m|^2 - 1|)^2/8`.
#[derive(Debug, Clone, Copy)]
pub struct StepBound {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Largest doubling delta among the four quadratures.
    pub convergence_delta: f64,
    pub grid_log2: u32,
}

/// Evaluates the contraction bound with `Q = prod_{i in q_stages}|P_i|`.
///
/// `q_stages` may be empty (`Q` identically 1): the bound is applied
/// starting from an arbitrary product, including the trivial one.
/// Requires `m` beyond every `Q` stage so the step extends the product.
pub fn step_bound(
    tower: &TowerSequence,
    q_stages: &[usize],
    m: usize,
    policy: &GridPolicy,
) -> Result<StepBound> {
    check_stage_range(tower, q_stages)?;
    check_stage_range(tower, &[m])?;
    if let Some(&q_max) = q_stages.last() {
        if m <= q_max {
            return Err(Error::InvalidStage(format!(
                "step stage {m} must exceed the last product stage {q_max}"
            )));
        }
    }
    if !q_stages.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidStage("product stages must strictly increase".into()));
    }

    let mut all = q_stages.to_vec();
    all.push(m);
    let degree = product_degree(tower, &all);
    let start = policy.start_log2(&degree);
    // One doubling pass evaluates all four integrals per grid so the
    // deltas stay comparable; the driver tracks the worst of them.
    let eval = |log2: u32| -> Result<[f64; 4]> {
        let grid = UniformGrid::new(log2)?;
        let mut q = vec![1.0f64; grid.len()];
        for &i in q_stages {
            let abs = stage_abs(tower, i, &grid);
            for (v, a) in q.iter_mut().zip(&abs) {
                *v *= a;
            }
        }
        let pm = stage_abs(tower, m, &grid);
        let n = grid.len() as f64;
        Ok([
            // int Q |P_m|
            compensated_sum(q.iter().zip(&pm).map(|(a, b)| a * b)) / n,
            // int Q
            compensated_sum(q.iter().copied()) / n,
            // int Q |P_m|^2
            compensated_sum(q.iter().zip(&pm).map(|(a, b)| a * b * b)) / n,
            // int Q ||P_m|^2 - 1|
            compensated_sum(q.iter().zip(&pm).map(|(a, b)| a * (b * b - 1.0).abs())) / n,
        ])
    };
    let begin = if start >= policy.cap_log2 { policy.cap_log2.saturating_sub(1).max(1) } else { start };
    let mut prev = eval(begin)?;
    let mut log2 = begin + 1;
    let (means, worst_delta, final_log2) = loop {
        let cur = eval(log2)?;
        let delta = cur
            .iter()
            .zip(&prev)
            .map(|(c, q)| (c - q).abs())
            .fold(0.0, f64::max);
        if delta <= policy.tolerance || log2 >= policy.cap_log2 {
            break (cur, delta, log2);
        }
        prev = cur;
        log2 += 1;
    };
    let lhs = means[0];
    let rhs = 0.5 * (means[1] + means[2]) - means[3] * means[3] / 8.0;
    Ok(StepBound {
        lhs,
        rhs,
        slack: rhs - lhs,
        convergence_delta: worst_delta,
        grid_log2: final_log2,
    })
}

/// `|int R |P_m|^2 - int R|` by exact coefficient counting.
///
/// `|P_m|^2` has Fourier coefficient `count{(i,j): e_i - e_j = f}/p` at
/// frequency `f`, so the difference is a finite sum over the nonzero
/// frequencies of `R`; no quadrature and no grid cap are involved. The
/// value vanishes exactly when no frequency of `R` matches an exponent
/// gap of the stage.
pub fn weak_convergence_check(
    tower: &TowerSequence,
    m: usize,
    terms: &[(BigInt, f64)],
) -> Result<f64> {
    check_stage_range(tower, &[m])?;
    let stage = &tower.stages[m];
    let exps: Vec<BigInt> = stage.exponents().into_iter().map(BigInt::from).collect();
    let p = stage.columns() as f64;
    let mut acc = 0.0f64;
    for (freq, coeff) in terms {
        if freq.is_zero() || *coeff == 0.0 {
            continue;
        }
        // Count ordered pairs with e_i - e_j = freq; exponents are
        // sorted, so a binary search per j suffices.
        let mut count = 0usize;
        for ej in &exps {
            let target = ej + freq;
            if exps.binary_search(&target).is_ok() {
                count += 1;
            }
        }
        acc += coeff * count as f64 / p;
    }
    Ok(acc.abs())
}

/// Coefficient list of `cos(f t)` for `weak_convergence_check`.
pub fn cosine_terms(freq: BigInt) -> Vec<(BigInt, f64)> {
    vec![(-freq.clone(), 0.5), (freq, 0.5)]
}

/// The two deviation integrals of one stage polynomial:
/// `int ||P_m| - 1|` and `int ||P_m|^2 - 1|`.
#[derive(Debug, Clone, Copy)]
pub struct DeviationPair {
    pub abs_dev: ConvergedMean,
    pub sq_dev: ConvergedMean,
}

pub fn l1_deviation(tower: &TowerSequence, m: usize, policy: &GridPolicy) -> Result<DeviationPair> {
    check_stage_range(tower, &[m])?;
    let degree = tower.stages[m].max_exponent();
    let start = policy.start_log2(&degree);
    let abs_dev = doubling_mean(start, policy, |log2| {
        let grid = UniformGrid::new(log2)?;
        let abs = stage_abs(tower, m, &grid);
        Ok(compensated_sum(abs.iter().map(|a| (a - 1.0).abs())) / grid.len() as f64)
    })?;
    let sq_dev = doubling_mean(start, policy, |log2| {
        let grid = UniformGrid::new(log2)?;
        let abs = stage_abs(tower, m, &grid);
        Ok(compensated_sum(abs.iter().map(|a| (a * a - 1.0).abs())) / grid.len() as f64)
    })?;
    Ok(DeviationPair { abs_dev, sq_dev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{build_tower, geometric_stage_with_columns, SpacerRule, StageSpec, TowerSequence};
    use num_traits::One;

    // Closed-form oracles, frozen independently of the quadrature code.
    const TWO_ROOT2_OVER_PI: f64 = 0.9003163161571060695551992;
    const TWO_OVER_PI: f64 = 0.6366197723675813430755351;
    const ABS_DEV_P2: f64 = 0.3729232285780566165958709; // (4 - 2*sqrt(2))/pi
    const ROOT_PI_OVER_2: f64 = 0.8862269254527580136490837;
    const RAYLEIGH_ABS_DEV: f64 = 0.3925786598279039628501489; // E||CN(0,1)| - 1|
    const RAYLEIGH_SQ_DEV: f64 = 0.7357588823428846431910475; // 2/e

    fn zero_tower(depth: usize) -> TowerSequence {
        build_tower(&SpacerRule::ZeroSpacers { columns: vec![2] }, depth, 256).unwrap()
    }

    fn geometric_tower(depth: usize) -> TowerSequence {
        build_tower(&SpacerRule::Geometric { scale: BigUint::one() }, depth, 16384).unwrap()
    }

    fn wrap_stage(stage: StageSpec) -> TowerSequence {
        TowerSequence::from_single_stage(stage).unwrap()
    }

    fn sel(indices: &[usize]) -> FactorSelection {
        FactorSelection::new(indices.to_vec()).unwrap()
    }

    #[test]
    fn selection_validation() {
        assert!(FactorSelection::new(vec![]).is_err());
        assert!(FactorSelection::new(vec![0, 1]).is_err());
        assert!(FactorSelection::new(vec![2, 2]).is_err());
        assert!(FactorSelection::new(vec![3, 2]).is_err());
        assert_eq!(sel(&[1, 4, 9]).max_index(), 9);
    }

    #[test]
    fn empty_partial_product_is_one() {
        let tower = zero_tower(3);
        let grid = UniformGrid::new(4).unwrap();
        let f = partial_product_sq(&tower, 0, &grid).unwrap();
        assert!(f.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn first_partial_density_is_a_cosine() {
        // Stage 1 of the zero-spacer tower has exponents (0, 2), so
        // |P_1|^2 = |1 + z^2|^2 / 2 = 1 + cos(2t) = 2cos^2(t), sampled
        // at the offset nodes t_m = 2*pi*(m + 1/2)/N.
        let tower = zero_tower(3);
        let grid = UniformGrid::new(8).unwrap();
        let f = partial_product_sq(&tower, 1, &grid).unwrap();
        for m in 0..grid.len() {
            let t = std::f64::consts::TAU * (m as f64 + 0.5) / grid.len() as f64;
            let want = 2.0 * t.cos() * t.cos();
            assert!((f.values[m] - want).abs() < 1e-12, "node {m}");
        }
        assert!((riemann_mean(&f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_is_one_on_exact_grids() {
        let policy = GridPolicy::default();
        let zero = zero_tower(6);
        for n in 0..=6 {
            let (mass_n, _) = mass(&zero, n, &policy).unwrap();
            assert!((mass_n - 1.0).abs() < 1e-12, "zero-spacer n={n}: {mass_n}");
        }
        let geo = geometric_tower(6);
        for n in 0..=6 {
            let (mass_n, _) = mass(&geo, n, &policy).unwrap();
            assert!((mass_n - 1.0).abs() < 1e-8, "geometric n={n}: {mass_n}");
        }
    }

    #[test]
    fn mass_reports_grid_cap() {
        let policy = GridPolicy { cap_log2: 4, tolerance: 1e-6 };
        let err = mass(&zero_tower(8), 8, &policy).unwrap_err();
        assert!(matches!(err, Error::GridCapExceeded { .. }));
    }

    #[test]
    fn single_factor_l1_matches_closed_form() {
        let tower = zero_tower(2);
        let policy = GridPolicy::default();
        let est = l1_product(&tower, &sel(&[1]), &policy).unwrap();
        assert!(est.converged);
        assert!((est.value - TWO_ROOT2_OVER_PI).abs() < 1e-4, "{}", est.value);
    }

    #[test]
    fn rayleigh_limit_l1_for_wide_stage() {
        // p = 4096 makes P a sum of 4096 unimodular terms with wildly
        // spread frequencies; node values behave like samples of a
        // standard complex Gaussian, so the mean modulus approaches
        // E|CN(0,1)| = sqrt(pi)/2.
        let stage = geometric_stage_with_columns(4096, &BigUint::one()).unwrap();
        let tower = wrap_stage(stage);
        let policy = GridPolicy { cap_log2: 21, tolerance: 1e-6 };
        let est = l1_product(&tower, &sel(&[1]), &policy).unwrap();
        assert!((est.value - ROOT_PI_OVER_2).abs() < 0.01, "{}", est.value);
        assert!(est.convergence_delta < 0.01);
    }

    #[test]
    fn cauchy_schwarz_chain_holds() {
        let tower = geometric_tower(6);
        let policy = GridPolicy::default();
        for indices in [vec![1], vec![2], vec![1, 2], vec![2, 4], vec![1, 3, 5]] {
            let s = sel(&indices);
            let l1 = l1_product(&tower, &s, &policy).unwrap().value;
            let (sq, _) = selection_sq_mass(&tower, &s, &policy).unwrap();
            assert!(l1 <= sq.sqrt() + 1e-6, "{indices:?}: {l1} vs sqrt {sq}");
            assert!(l1 <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn greedy_decays_like_independent_factors() {
        let tower = zero_tower(8);
        let policy = GridPolicy { cap_log2: 16, tolerance: 1e-7 };
        let (selection, steps) = greedy_bourgain(&tower, 3, 1..=8, &policy).unwrap();
        assert_eq!(selection.len(), 3);
        assert_eq!(steps.len(), 3);
        for w in steps.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-6);
        }
        // Every single factor integrates to 2*sqrt(2)/pi, so the first
        // step is pinned; later steps can only undershoot the
        // independent-factor prediction, because the greedy is free to
        // exploit correlations between dyadic stages.
        assert!((steps[0].value - TWO_ROOT2_OVER_PI).abs() < 1e-3);
        for (j, step) in steps.iter().enumerate() {
            let independent = TWO_ROOT2_OVER_PI.powi(j as i32 + 1);
            assert!(step.value <= independent + 0.01, "step {j}: {}", step.value);
            assert!(step.value >= 0.3, "step {j}: {}", step.value);
        }
    }

    #[test]
    fn greedy_respects_window_and_order() {
        let tower = zero_tower(8);
        let policy = GridPolicy { cap_log2: 14, tolerance: 1e-7 };
        let (selection, _) = greedy_bourgain(&tower, 4, 3..=6, &policy).unwrap();
        let idx = selection.indices();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert!(idx.iter().all(|&i| (3..=6).contains(&i)));
    }

    #[test]
    fn step_bound_with_trivial_q() {
        // Q = 1 and a p=2 stage: lhs = 2*sqrt(2)/pi, and the deviation
        // integral is int|cos| = 2/pi, so rhs = 1 - (2/pi)^2/8.
        let tower = zero_tower(2);
        let policy = GridPolicy::default();
        let bound = step_bound(&tower, &[], 1, &policy).unwrap();
        assert!((bound.lhs - TWO_ROOT2_OVER_PI).abs() < 1e-4);
        let want_rhs = 1.0 - TWO_OVER_PI * TWO_OVER_PI / 8.0;
        assert!((bound.rhs - want_rhs).abs() < 1e-4, "{}", bound.rhs);
        assert!(bound.slack > 0.0);
    }

    #[test]
    fn step_bound_equality_for_single_column() {
        // A one-column stage has the constant polynomial, so both sides
        // collapse to int Q and the slack vanishes identically.
        let stages = vec![
            StageSpec::zero_spacers(0, BigUint::one(), 2).unwrap(),
            StageSpec::zero_spacers(1, BigUint::from(2u32), 2).unwrap(),
            StageSpec::new(2, BigUint::from(4u32), vec![BigUint::one()]).unwrap(),
        ];
        let tower = TowerSequence::new(stages, "explicit").unwrap();
        let policy = GridPolicy::default();
        let bound = step_bound(&tower, &[1], 2, &policy).unwrap();
        assert_eq!(bound.slack, 0.0);
        assert_eq!(bound.lhs, bound.rhs);
    }

    #[test]
    fn step_bound_slack_on_small_matrix() {
        let tower = geometric_tower(6);
        let policy = GridPolicy::default();
        for q in [vec![], vec![1], vec![2], vec![1, 2], vec![1, 3]] {
            let m0 = q.last().map_or(1, |&x| x + 1);
            for m in m0..=6 {
                let bound = step_bound(&tower, &q, m, &policy).unwrap();
                assert!(
                    bound.slack >= -1e-6,
                    "q={q:?} m={m}: slack {}",
                    bound.slack
                );
            }
        }
    }

    #[test]
    fn step_bound_rejects_bad_order() {
        let tower = geometric_tower(4);
        let policy = GridPolicy::default();
        assert!(step_bound(&tower, &[2], 2, &policy).is_err());
        assert!(step_bound(&tower, &[3], 1, &policy).is_err());
    }

    #[test]
    fn weak_convergence_exact_cases() {
        let geo = geometric_tower(6);
        // Constant R: both integrals are 1, difference 0.
        assert_eq!(weak_convergence_check(&geo, 3, &[(BigInt::zero(), 1.0)]).unwrap(), 0.0);
        // cos(t): stage exponent gaps are all far above 1.
        assert_eq!(
            weak_convergence_check(&geo, 3, &cosine_terms(BigInt::one())).unwrap(),
            0.0
        );
        // cos((e_1 - e_0) t) resonates with exactly one ordered gap of
        // the wrapped h=100, a=(0,1,3,9) stage: value 1/4 exactly.
        let st = StageSpec::new(
            1,
            BigUint::from(100u32),
            [0u32, 1, 3, 9].iter().map(|&v| BigUint::from(v)).collect(),
        )
        .unwrap();
        let tower = wrap_stage(st);
        let got = weak_convergence_check(&tower, 1, &cosine_terms(BigInt::from(100))).unwrap();
        assert_eq!(got, 0.25);
    }

    #[test]
    fn weak_convergence_decays_with_depth() {
        // A fixed low-frequency observable stops resonating once stage
        // gaps outgrow it: nonzero only while some gap equals 4.
        let geo = geometric_tower(8);
        let terms = cosine_terms(BigInt::from(4));
        let values: Vec<f64> = (1..=8)
            .map(|m| weak_convergence_check(&geo, m, &terms).unwrap())
            .collect();
        assert!(values.iter().skip(4).all(|&v| v == 0.0), "{values:?}");
    }

    #[test]
    fn deviation_pair_closed_forms() {
        let tower = zero_tower(2);
        let policy = GridPolicy::default();
        let dev = l1_deviation(&tower, 1, &policy).unwrap();
        assert!((dev.abs_dev.value - ABS_DEV_P2).abs() < 1e-6, "{}", dev.abs_dev.value);
        assert!((dev.sq_dev.value - TWO_OVER_PI).abs() < 1e-6, "{}", dev.sq_dev.value);
    }

    #[test]
    fn deviation_single_column_is_zero() {
        let stages = vec![
            StageSpec::zero_spacers(0, BigUint::one(), 2).unwrap(),
            StageSpec::new(1, BigUint::from(2u32), vec![BigUint::one()]).unwrap(),
        ];
        let tower = TowerSequence::new(stages, "explicit").unwrap();
        let dev = l1_deviation(&tower, 1, &GridPolicy::default()).unwrap();
        assert_eq!(dev.abs_dev.value, 0.0);
        assert_eq!(dev.sq_dev.value, 0.0);
    }

    #[test]
    fn wide_stage_deviations_match_rayleigh() {
        let stage = geometric_stage_with_columns(4096, &BigUint::one()).unwrap();
        let tower = wrap_stage(stage);
        let policy = GridPolicy { cap_log2: 20, tolerance: 1e-6 };
        let dev = l1_deviation(&tower, 1, &policy).unwrap();
        assert!((dev.abs_dev.value - RAYLEIGH_ABS_DEV).abs() < 0.02, "{}", dev.abs_dev.value);
        assert!((dev.sq_dev.value - RAYLEIGH_SQ_DEV).abs() < 0.02, "{}", dev.sq_dev.value);
    }
}
