//! Gaussian-limit diagnostics for the stage cosine sums.
//!
//! The normalized sum of one stage is
//! `S_m(t) = sqrt(2/p) * sum_j cos(e_j t)`; as the cutting number grows
//! its distribution under normalized Lebesgue measure approaches the
//! standard normal. This module measures that approach: a deterministic
//! Kolmogorov-Smirnov distance of the pushforward law against the
//! normal CDF, the dispersion statistic of the squared summands, the
//! two-sided tail mass against the Gaussian tail, and the `Theta`
//! product whose Fourier coefficients control the density argument.
//!
//! Everything on grids is bit-for-bit reproducible: the "distribution"
//! of `S_m` is the pushforward of node-counting measure, not a random
//! sample, so two runs of the same configuration agree exactly.

use crate::construction::TowerSequence;
use crate::gauss::phi;
use crate::trigpoly::{
    compensated_sum, cosine_wave, GridPolicy, SparseExponentPoly, UniformGrid,
};
use crate::words::{enumerate_words, MAX_ENUM_COLUMNS};
use crate::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

/// Minimum node count for a meaningful distributional distance.
pub const MIN_KS_NODES: usize = 1000;

/// A finite union of disjoint half-open arcs of the circle, stored as
/// fractions of the full turn: `(u, v)` covers `t/2pi in [u, v)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorelSet {
    arcs: Vec<(f64, f64)>,
}

impl BorelSet {
    pub fn full_circle() -> Self {
        BorelSet { arcs: vec![(0.0, 1.0)] }
    }

    pub fn new(mut arcs: Vec<(f64, f64)>) -> Result<Self> {
        if arcs.is_empty() {
            return Err(Error::Degenerate("Borel set needs at least one arc".into()));
        }
        arcs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite arc bounds"));
        for &(u, v) in &arcs {
            if !(u.is_finite() && v.is_finite() && (0.0..1.0).contains(&u) && u < v && v <= 1.0) {
                return Err(Error::Degenerate(format!(
                    "arc ({u}, {v}) is not a fraction range inside [0, 1)"
                )));
            }
        }
        if arcs.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::Degenerate("arcs overlap".into()));
        }
        Ok(BorelSet { arcs })
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn total_fraction(&self) -> f64 {
        self.arcs.iter().map(|&(u, v)| v - u).sum()
    }

    pub fn contains(&self, fraction: f64) -> bool {
        self.arcs.iter().any(|&(u, v)| (u..v).contains(&fraction))
    }
}

/// Values of `S_m` at the grid nodes falling inside a Borel set.
#[derive(Debug, Clone)]
pub struct NormalizedSum {
    pub stage_m: usize,
    pub set: BorelSet,
    pub grid_log2: u32,
    /// Node values in grid order, restricted to the set.
    pub values: Vec<f64>,
}

/// Samples `S_m = sqrt(2) Re P_m` on the grid nodes inside `set`.
///
/// Phases are reduced through exact residues, so node values are exact
/// up to floating-point rounding at any stage height.
pub fn normalized_sum(
    tower: &TowerSequence,
    m: usize,
    grid_log2: u32,
    set: &BorelSet,
) -> Result<NormalizedSum> {
    if m == 0 || m > tower.depth() {
        return Err(Error::InvalidStage(format!(
            "stage {m} outside the tower range 1..={}",
            tower.depth()
        )));
    }
    let grid = UniformGrid::new(grid_log2)?;
    let eval = SparseExponentPoly::from_stage(&tower.stages[m]).eval_on_grid(&grid);
    let root2 = std::f64::consts::SQRT_2;
    let values: Vec<f64> = (0..grid.len())
        .filter(|&i| set.contains(grid.node_fraction(i)))
        .map(|i| root2 * eval.values[i].re)
        .collect();
    if values.is_empty() {
        return Err(Error::Degenerate("Borel set misses every grid node".into()));
    }
    Ok(NormalizedSum { stage_m: m, set: set.clone(), grid_log2, values })
}

/// A Kolmogorov-Smirnov comparison against the standard normal.
#[derive(Debug, Clone, Serialize)]
pub struct KSReport {
    pub stage_m: usize,
    pub arcs: Vec<(f64, f64)>,
    /// Grid size behind the pushforward law; None when the values came
    /// from an ensemble sample instead of a grid.
    pub grid_n: Option<u64>,
    pub ks: f64,
    pub sample_count: usize,
}

/// Exact sup distance between the step CDF of `sorted` and the normal
/// CDF: the sup of a step-vs-continuous comparison is attained at a
/// jump, from one side or the other.
fn ks_statistic(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = phi(x);
        let above = (i as f64 + 1.0) / n - cdf;
        let below = cdf - i as f64 / n;
        sup = sup.max(above).max(below);
    }
    sup
}

/// KS distance of a grid pushforward law against the standard normal.
pub fn ks_distance(sum: &NormalizedSum) -> Result<KSReport> {
    if sum.values.len() < MIN_KS_NODES {
        return Err(Error::Degenerate(format!(
            "{} nodes in the set, need at least {MIN_KS_NODES}",
            sum.values.len()
        )));
    }
    let mut sorted = sum.values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sum values"));
    let ks = ks_statistic(&sorted);
    Ok(KSReport {
        stage_m: sum.stage_m,
        arcs: sum.set.arcs().to_vec(),
        grid_n: Some(1u64 << sum.grid_log2),
        ks,
        sample_count: sorted.len(),
    })
}

/// KS distance for ensemble samples (no grid behind the values).
pub fn ks_from_samples(stage_m: usize, mut values: Vec<f64>) -> Result<KSReport> {
    if values.len() < MIN_KS_NODES {
        return Err(Error::Degenerate(format!(
            "{} samples, need at least {MIN_KS_NODES}",
            values.len()
        )));
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite sample values"));
    let ks = ks_statistic(&values);
    Ok(KSReport {
        stage_m,
        arcs: BorelSet::full_circle().arcs().to_vec(),
        grid_n: None,
        ks,
        sample_count: values.len(),
    })
}

/// Dispersion of the squared summands:
/// `V_m = mean of (sum_j X_j^2 - 1)^2` with `X_j = sqrt(2/p) cos(e_j t)`.
///
/// The deviation collapses to `(1/p) sum_j cos(2 e_j t)`, a polynomial
/// in the doubled exponents, so an exact grid computes the integral
/// exactly. With distinct exponents the value is `(p+1)/(2p^2)`: the
/// `j = 0` term is the constant 1 and contributes `1/p^2`, every other
/// column contributes `1/(2p^2)`.
pub fn squares_dispersion(
    tower: &TowerSequence,
    m: usize,
    policy: &GridPolicy,
) -> Result<(f64, u32)> {
    if m == 0 || m > tower.depth() {
        return Err(Error::InvalidStage(format!(
            "stage {m} outside the tower range 1..={}",
            tower.depth()
        )));
    }
    let stage = &tower.stages[m];
    let doubled: Vec<BigUint> = stage.exponents().iter().map(|e| e * 2u32).collect();
    let poly = SparseExponentPoly::new(doubled)?;
    // The squared deviation doubles the frequency span again.
    let log2 = policy.exact_log2(&(poly.max_exponent() * 2u32))?;
    let grid = UniformGrid::new(log2)?;
    let eval = poly.eval_on_grid(&grid);
    let p = stage.columns() as f64;
    // eval is (1/sqrt p) sum z^{-2e_j}, so Re(eval)/sqrt(p) is the
    // deviation sum_j cos(2 e_j t)/p.
    let v = compensated_sum(eval.values.iter().map(|z| z.re * z.re)) / (grid.len() as f64 * p);
    Ok((v, log2))
}

/// Tail mass of `|Re P_m|` beyond `x`, against the Gaussian limit.
#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub x: f64,
    /// Fraction of nodes with `|Re P_m| > x`, i.e. `|S_m| > sqrt(2) x`.
    pub empirical_tail: f64,
    /// `P(|Z| > sqrt(2) x)` for standard normal `Z`.
    pub gaussian_tail: f64,
    /// `(x - 1) * empirical_tail`.
    pub k_hat: f64,
    /// `(x - 1) * gaussian_tail`, the limiting constant.
    pub limit: f64,
    pub sample_count: usize,
}

pub fn tail_lower_bound(
    tower: &TowerSequence,
    m: usize,
    set: &BorelSet,
    x: f64,
    grid_log2: u32,
) -> Result<TailReport> {
    if !(x > 1.0) {
        return Err(Error::Degenerate(format!("tail threshold must exceed 1, got {x}")));
    }
    let sum = normalized_sum(tower, m, grid_log2, set)?;
    let threshold = std::f64::consts::SQRT_2 * x;
    let count = sum.values.iter().filter(|v| v.abs() > threshold).count();
    let n = sum.values.len();
    let empirical_tail = count as f64 / n as f64;
    let gaussian_tail = crate::gauss::two_sided_tail(threshold);
    Ok(TailReport {
        x,
        empirical_tail,
        gaussian_tail,
        k_hat: (x - 1.0) * empirical_tail,
        limit: (x - 1.0) * gaussian_tail,
        sample_count: n,
    })
}

/// One extracted Fourier coefficient of the `Theta` product.
#[derive(Debug, Clone)]
pub struct ThetaCoefficient {
    /// Positive word value `w`; the coefficient of `cos(w t)`.
    pub word: BigInt,
    /// Support size of the word's unique clean producer, or None when
    /// the word table reports it ambiguous.
    pub r: Option<usize>,
    /// `rho_w = 2 c_w`, complex because the factors are.
    pub rho: Complex64,
}

/// The product `Theta(x, t) = prod_j (1 - i x sqrt(2/p) cos(e_j t))`
/// expanded over the stage's word set.
#[derive(Debug, Clone)]
pub struct ThetaExpansion {
    pub x: f64,
    pub stage_m: usize,
    pub grid_log2: u32,
    /// The coefficient of `cos(0 t)`: the position-0 factor is the
    /// constant `1 - i x sqrt(2/p)` because `e_0 = 0`, so this is not 1
    /// unless `x = 0`.
    pub constant: Complex64,
    /// Coefficients at every positive word value, sorted by word.
    pub coefficients: Vec<ThetaCoefficient>,
    /// Max modulus over the grid; a grid sup never exceeds the true sup,
    /// so upper-bound checks against it are conservative-safe.
    pub sup_norm: f64,
}

/// Expands `Theta` by exact-grid Fourier extraction.
///
/// The expansion is supported on word values, which need the word table,
/// so the stage cap of [`MAX_ENUM_COLUMNS`] applies; the grid must
/// resolve twice the largest word.
pub fn theta_product(
    tower: &TowerSequence,
    m: usize,
    x: f64,
    policy: &GridPolicy,
) -> Result<ThetaExpansion> {
    if m == 0 || m > tower.depth() {
        return Err(Error::InvalidStage(format!(
            "stage {m} outside the tower range 1..={}",
            tower.depth()
        )));
    }
    if !x.is_finite() {
        return Err(Error::Degenerate(format!("Theta parameter must be finite, got {x}")));
    }
    let stage = &tower.stages[m];
    if stage.columns() > MAX_ENUM_COLUMNS {
        return Err(Error::WordLimitExceeded { got: stage.columns(), max: MAX_ENUM_COLUMNS });
    }
    let table = enumerate_words(stage)?;
    let n_max = table
        .n_max()
        .to_biguint()
        .expect("the all-ones word is nonnegative");
    let log2 = policy.exact_log2(&(n_max * 2u32))?;
    let grid = UniformGrid::new(log2)?;
    let n = grid.len();

    let scale = x * (2.0 / stage.columns() as f64).sqrt();
    let mut values = vec![Complex64::new(1.0, 0.0); n];
    for e in stage.exponents() {
        let wave = cosine_wave(&e, &grid);
        for (v, c) in values.iter_mut().zip(&wave.values) {
            *v *= Complex64::new(1.0, -scale * c);
        }
    }
    let sup_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);

    let mut buf = values;
    let mut planner = rustfft::FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let inv_n = 1.0 / n as f64;

    let mut coefficients = Vec::new();
    for entry in table.entries() {
        if entry.value <= BigInt::zero() {
            continue;
        }
        let w = entry.value.to_usize().expect("word fits the grid by construction");
        let rho = (buf[w] + buf[n - w]) * inv_n;
        coefficients.push(ThetaCoefficient { word: entry.value.clone(), r: entry.r(), rho });
    }
    Ok(ThetaExpansion {
        x,
        stage_m: m,
        grid_log2: log2,
        constant: buf[0] * inv_n,
        coefficients,
        sup_norm,
    })
}

/// `|int Theta R - int R|` for a real-coefficient trigonometric `R`
/// given as `(frequency, coefficient)` terms.
///
/// `Theta` is even, so the overlap at frequency `f` is the coefficient
/// at `|f|`: the stored constant at 0, `rho_w / 2` at word values,
/// zero elsewhere.
pub fn density_check(theta: &ThetaExpansion, terms: &[(BigInt, f64)]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut r_mean = 0.0f64;
    for (freq, coeff) in terms {
        if freq.is_zero() {
            acc += theta.constant * *coeff;
            r_mean += coeff;
            continue;
        }
        let w = freq.abs();
        if let Ok(i) = theta.coefficients.binary_search_by(|c| c.word.cmp(&w)) {
            acc += theta.coefficients[i].rho * 0.5 * *coeff;
        }
    }
    (acc - Complex64::new(r_mean, 0.0)).norm()
}
