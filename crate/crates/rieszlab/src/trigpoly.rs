//! Sparse trigonometric polynomials on uniform power-of-two grids.
//!
//! The central object is `P(z) = (1/sqrt(p)) * sum_j z^{-e_j}` with integer
//! exponents that may run to thousands of bits. On the N-node grid
//! `t_m = 2*pi*m/N` only `e_j mod N` matters, and that residue is exact for
//! any exponent size. Evaluation therefore builds the length-N vector
//! counting how many exponents land on each residue and applies one forward
//! DFT, which equals direct summation exactly in exact arithmetic and costs
//! O(N log N) regardless of p.
//!
//! Means over the grid use compensated (Neumaier) summation. For an
//! integrand that is a trigonometric polynomial of degree D, the grid mean
//! is the true integral as soon as N > D: aliasing folds frequency f onto
//! f mod N, and no nonzero frequency of the integrand is a multiple of N.
//! Absolute-value integrands are not polynomials; for those the grid is
//! doubled until the mean stabilizes, and the last doubling difference is
//! always carried alongside the value.

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, Zero};
use rustfft::FftPlanner;

use crate::phase::reduce_mod_pow2;
use crate::construction::StageSpec;
use crate::{Error, Result};

/// Hard ceiling on grid sizes: 2^26 doubles is the largest buffer the
/// evaluation path is allowed to allocate (1 GiB of complex scratch).
pub const MAX_GRID_LOG2: u32 = 26;

/// Uniform circle grid with `N = 2^log2_n` nodes `t_m = 2*pi*m/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformGrid {
    log2_n: u32,
}

impl UniformGrid {
    pub fn new(log2_n: u32) -> Result<Self> {
        if log2_n < 1 || log2_n > MAX_GRID_LOG2 {
            return Err(Error::InvalidGrid(format!(
                "grid must have 2^1..2^{MAX_GRID_LOG2} nodes, got 2^{log2_n}"
            )));
        }
        Ok(UniformGrid { log2_n })
    }

    pub fn log2_n(&self) -> u32 {
        self.log2_n
    }

    pub fn len(&self) -> usize {
        1usize << self.log2_n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node `t_m` as a fraction of the full circle, in [0, 1).
    pub fn node_fraction(&self, m: usize) -> f64 {
        m as f64 / self.len() as f64
    }
}

/// Real-valued samples on a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

/// Complex-valued samples on a grid.
#[derive(Debug, Clone)]
pub struct ComplexGridFunction {
    pub grid: UniformGrid,
    pub values: Vec<Complex64>,
}

impl ComplexGridFunction {
    /// Pointwise modulus.
    pub fn modulus(&self) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v.norm()).collect(),
        }
    }

    /// Pointwise real part.
    pub fn real(&self) -> GridFunction {
        GridFunction { grid: self.grid, values: self.values.iter().map(|v| v.re).collect() }
    }
}

/// `P(z) = (1/sqrt(p)) * sum_j z^{-exps[j]}` with strictly increasing
/// nonnegative integer exponents.
#[derive(Debug, Clone)]
pub struct SparseExponentPoly {
    exps: Vec<BigUint>,
}

impl SparseExponentPoly {
    pub fn new(exps: Vec<BigUint>) -> Result<Self> {
        if exps.is_empty() {
            return Err(Error::Degenerate("polynomial needs at least one term".into()));
        }
        for w in exps.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Degenerate("exponents must be strictly increasing".into()));
            }
        }
        Ok(SparseExponentPoly { exps })
    }

    /// The polynomial attached to a tower stage: exponents are the column
    /// starting levels.
    pub fn from_stage(stage: &StageSpec) -> Self {
        SparseExponentPoly { exps: stage.exponents() }
    }

    pub fn terms(&self) -> usize {
        self.exps.len()
    }

    pub fn exponents(&self) -> &[BigUint] {
        &self.exps
    }

    pub fn max_exponent(&self) -> &BigUint {
        self.exps.last().expect("nonempty")
    }

    /// `exps[j] mod N` for the N-node grid, exact at any exponent size.
    pub fn reduce_exponents(&self, grid: &UniformGrid) -> Vec<u64> {
        self.exps.iter().map(|e| reduce_mod_pow2(e, grid.log2_n())).collect()
    }

    /// Values on the grid through the counts-and-DFT path.
    pub fn eval_on_grid(&self, grid: &UniformGrid) -> ComplexGridFunction {
        let n = grid.len();
        let mut buffer = vec![Complex64::zero(); n];
        for r in self.reduce_exponents(grid) {
            buffer[r as usize].re += 1.0;
        }
        FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
        let scale = 1.0 / (self.terms() as f64).sqrt();
        for v in &mut buffer {
            *v *= scale;
        }
        ComplexGridFunction { grid: *grid, values: buffer }
    }

    /// Direct two-loop summation; reference implementation for tests and
    /// tiny cases only (cost O(p*N)).
    pub fn eval_direct(&self, grid: &UniformGrid) -> ComplexGridFunction {
        let n = grid.len();
        let residues = self.reduce_exponents(grid);
        let scale = 1.0 / (self.terms() as f64).sqrt();
        let values = (0..n)
            .map(|m| {
                let mut acc = Complex64::zero();
                for &r in &residues {
                    // r*m stays below 2^52 for any grid this crate allows,
                    // so the phase index is exact.
                    let idx = (r * m as u64) % n as u64;
                    let phase = -std::f64::consts::TAU * (idx as f64) / n as f64;
                    acc += Complex64::new(phase.cos(), phase.sin());
                }
                acc * scale
            })
            .collect();
        ComplexGridFunction { grid: *grid, values }
    }

    /// Values on the offset nodes `t_m = 2*pi*(m + 1/2)/N`, through the
    /// same counts-and-DFT path with a half-node twist per exponent.
    ///
    /// The offset family obeys the same exactness rule as the subgroup
    /// family (the node average of `z^{-e}` vanishes whenever `N` does
    /// not divide `e`; when it does, the average is `(-1)^{e/N}` rather
    /// than 1), but it contains no subgroup point. That matters for
    /// sampled means of |product| integrands: every stage polynomial
    /// peaks at `t = 0` with the deterministic value `sqrt(p)`, so a
    /// subgroup grid hands node 0 alone a spurious `prod_k sqrt(p_k)/N`
    /// share of the mean, and no grid this crate allows outruns that
    /// product for ten 64-column stages. Offset nodes sidestep the peak
    /// entirely, so sampling-regime absolute-value quadratures must use
    /// this evaluator.
    pub fn eval_on_midpoint_grid(&self, grid: &UniformGrid) -> ComplexGridFunction {
        let n = grid.len();
        let mut buffer = vec![Complex64::zero(); n];
        for e in &self.exps {
            // The twist exp(-i*pi*e/N) has period 2N in e, so the residue
            // must be taken mod 2N before splitting into bin and phase.
            let r2 = reduce_mod_pow2(e, grid.log2_n() + 1);
            let phase = -std::f64::consts::PI * r2 as f64 / n as f64;
            buffer[(r2 % n as u64) as usize] += Complex64::new(phase.cos(), phase.sin());
        }
        FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
        let scale = 1.0 / (self.terms() as f64).sqrt();
        for v in &mut buffer {
            *v *= scale;
        }
        ComplexGridFunction { grid: *grid, values: buffer }
    }

    /// Direct midpoint-node summation; reference implementation for
    /// tests, mirroring [`Self::eval_direct`].
    pub fn eval_direct_midpoint(&self, grid: &UniformGrid) -> ComplexGridFunction {
        let n = grid.len();
        let two_n = 2 * n as u64;
        let residues: Vec<u64> =
            self.exps.iter().map(|e| reduce_mod_pow2(e, grid.log2_n() + 1)).collect();
        let scale = 1.0 / (self.terms() as f64).sqrt();
        let values = (0..n)
            .map(|m| {
                let mut acc = Complex64::zero();
                for &r2 in &residues {
                    // r2*(2m+1) stays below 2^54 for any grid this crate
                    // allows, so the phase index is exact.
                    let idx = (r2 * (2 * m as u64 + 1)) % two_n;
                    let phase = -std::f64::consts::TAU * (idx as f64) / two_n as f64;
                    acc += Complex64::new(phase.cos(), phase.sin());
                }
                acc * scale
            })
            .collect();
        ComplexGridFunction { grid: *grid, values }
    }
}

/// Neumaier-compensated sum of a stream of doubles.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Grid mean `(1/N) * sum_m f(t_m)` with compensated accumulation.
pub fn riemann_mean(f: &GridFunction) -> f64 {
    compensated_sum(f.values.iter().copied()) / f.grid.len() as f64
}

/// Samples `cos(freq * t)` on the grid, phase-exact via residues.
pub fn cosine_wave(freq: &BigUint, grid: &UniformGrid) -> GridFunction {
    let n = grid.len() as u64;
    let r = reduce_mod_pow2(freq, grid.log2_n());
    let values = (0..grid.len())
        .map(|m| {
            let idx = (r * m as u64) % n;
            (std::f64::consts::TAU * idx as f64 / n as f64).cos()
        })
        .collect();
    GridFunction { grid: *grid, values }
}

/// Smallest grid exponent whose node count exceeds the given polynomial
/// degree, i.e. the cheapest exact grid. None when it would exceed
/// [`MAX_GRID_LOG2`].
pub fn exact_grid_log2(degree: &BigUint) -> Option<u32> {
    // Need N >= degree + 2, honoring the safety margin of one: the mean of
    // a degree-D polynomial is exact for N > D already, but starting one
    // past the boundary keeps the aliasing self-test honest.
    let need = degree + BigUint::from(2u32);
    let mut log2 = 1u32;
    while (BigUint::one() << log2) < need {
        log2 += 1;
        if log2 > MAX_GRID_LOG2 {
            return None;
        }
    }
    Some(log2)
}

/// Quadrature policy: where doubling starts, where it must stop, and what
/// doubling difference counts as converged.
#[derive(Debug, Clone, Copy)]
pub struct GridPolicy {
    pub cap_log2: u32,
    pub tolerance: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        // 2^24 nodes is the memory cap from the exactness rule; 1e-6 is the
        // doubling tolerance used for non-polynomial integrands.
        GridPolicy { cap_log2: 24, tolerance: 1e-6 }
    }
}

impl GridPolicy {
    pub fn new(cap_log2: u32, tolerance: f64) -> Result<Self> {
        if cap_log2 < 2 || cap_log2 > MAX_GRID_LOG2 {
            return Err(Error::InvalidGrid(format!(
                "grid cap must lie in 2^2..2^{MAX_GRID_LOG2}, got 2^{cap_log2}"
            )));
        }
        if !(tolerance > 0.0) {
            return Err(Error::InvalidGrid("doubling tolerance must be positive".into()));
        }
        Ok(GridPolicy { cap_log2, tolerance })
    }

    /// Starting grid for an integrand with the given underlying polynomial
    /// degree: the exact grid when it fits under the cap, otherwise 2^12
    /// (or the cap itself if even that is out of reach).
    pub fn start_log2(&self, degree: &BigUint) -> u32 {
        match exact_grid_log2(degree) {
            Some(l) if l <= self.cap_log2 => l,
            _ => 12u32.min(self.cap_log2),
        }
    }

    /// Exact grid under this policy's cap, or a structured error naming
    /// the grid it would have needed.
    pub fn exact_log2(&self, degree: &BigUint) -> Result<u32> {
        match exact_grid_log2(degree) {
            Some(l) if l <= self.cap_log2 => Ok(l),
            Some(l) => Err(Error::GridCapExceeded { required_log2: l, cap_log2: self.cap_log2 }),
            None => Err(Error::GridCapExceeded {
                required_log2: MAX_GRID_LOG2 + 1,
                cap_log2: self.cap_log2,
            }),
        }
    }
}

/// A mean produced by the doubling engine, always paired with the
/// difference observed at the final doubling.
#[derive(Debug, Clone, Copy)]
pub struct ConvergedMean {
    pub value: f64,
    pub convergence_delta: f64,
    pub grid_log2: u32,
    /// False when the cap was hit before the delta dropped under tolerance.
    pub converged: bool,
}

/// Runs `eval` on grids of doubling size until the mean stabilizes.
///
/// At least two evaluations always happen so a delta can be reported.
/// The returned value is the finest-grid mean.
pub fn doubling_mean(
    start_log2: u32,
    policy: &GridPolicy,
    mut eval: impl FnMut(u32) -> Result<f64>,
) -> Result<ConvergedMean> {
    let start = start_log2.min(policy.cap_log2).max(1);
    let mut log2 = if start == policy.cap_log2 { start - 1 } else { start };
    let mut prev = eval(log2)?;
    loop {
        let next = eval(log2 + 1)?;
        let delta = (next - prev).abs();
        if delta <= policy.tolerance || log2 + 1 >= policy.cap_log2 {
            return Ok(ConvergedMean {
                value: next,
                convergence_delta: delta,
                grid_log2: log2 + 1,
                converged: delta <= policy.tolerance,
            });
        }
        prev = next;
        log2 += 1;
    }
}
