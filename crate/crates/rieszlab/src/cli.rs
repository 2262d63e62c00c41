//! Command-line surface: one subcommand per analysis, config-file input,
//! JSON and CSV output.
//!
//! Exit-code contract: 0 on success, 1 when a mathematical invariant
//! fails (the failing invariant is named on stderr), 2 on config or
//! usage errors. Every run writes its report JSON, its CSV curves, and a
//! `run_meta.json` holding the wall-clock facts, so the report files
//! stay byte-identical across reruns of the same config and seed.

use crate::cltlab::{
    ks_distance, normalized_sum, squares_dispersion, tail_lower_bound, theta_product, BorelSet,
};
use crate::config::{OrnsteinParams, RieszParams, RunConfig};
use crate::construction::condition_report;
use crate::gauss::phi;
use crate::ornstein::{centering_gap_estimate, clt_in_omega_with_samples};
use crate::report::{significant, validate_estimates, write_csv, write_json, write_meta};
use crate::riesz::{greedy_bourgain, l1_deviation, l1_product, mass, FactorSelection};
use crate::trigpoly::ConvergedMean;
use crate::words::{check_distinct, enumerate_words};
use crate::{Error, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::time::Instant;

/// Mass of every partial product must sit this close to 1 on its
/// exactness grid; quadrature there is exact, so the allowance only
/// covers floating-point accumulation.
pub const MASS_TOLERANCE: f64 = 1e-8;

/// Greedy decay may wiggle upward between steps by twice the quadrature
/// tolerance (each endpoint is converged only to within the tolerance)
/// plus this fixed allowance before the monotonicity invariant counts
/// as violated.
pub const DECAY_SLACK: f64 = 1e-9;

/// The sup of the characteristic product must stay under e^{x^2} plus
/// this allowance.
pub const THETA_ENVELOPE_SLACK: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "rieszlab", version, about = "Rank-one tower spectral laboratory")]
pub struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to the config's out_dir, then "runs".
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Caps the rayon worker count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the grid cap (log2 of the node count).
    #[arg(long = "grid-cap", global = true, value_name = "LOG2")]
    pub grid_cap: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tower summary and growth-condition report.
    Describe,
    /// Partial-product masses and L1 estimates.
    Riesz,
    /// Greedy small-L1 stage selection.
    Bourgain,
    /// Pushforward law of the normalized sum against the normal.
    Clt,
    /// Characteristic-product expansion at a fixed argument.
    Theta,
    /// Exhaustive word-distinctness check.
    Words,
    /// Random spacer ensemble diagnostics.
    Ornstein {
        /// Overrides the number of planned stages (constant form only).
        #[arg(long)]
        depth: Option<usize>,
        /// Overrides the Monte Carlo sample count of the centering gap.
        #[arg(long)]
        samples: Option<usize>,
        /// Overrides the analyzed stage.
        #[arg(long)]
        stage: Option<usize>,
    },
}

/// Everything one subcommand produces before anything touches disk.
struct SubReport {
    json: Value,
    /// (file name, header, rows)
    csvs: Vec<(&'static str, Vec<&'static str>, Vec<Vec<String>>)>,
    /// Named invariant violations; nonempty means exit code 1.
    violations: Vec<String>,
}

pub fn run(cli: Cli) -> u8 {
    match execute(cli) {
        Ok(violations) if violations.is_empty() => 0,
        Ok(violations) => {
            for v in &violations {
                eprintln!("invariant failed: {v}");
            }
            1
        }
        Err(e) => {
            eprintln!("config error: {e}");
            2
        }
    }
}

fn execute(cli: Cli) -> Result<Vec<String>> {
    let started = Instant::now();
    let config_path = cli
        .config
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut config = RunConfig::from_path(&config_path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(cap) = cli.grid_cap {
        config.grid_cap_log2 = cap;
        config.policy()?;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }

    let (name, sub) = match &cli.command {
        Command::Describe => ("describe", cmd_describe(&config)?),
        Command::Riesz => ("riesz", cmd_riesz(&config)?),
        Command::Bourgain => ("bourgain", cmd_bourgain(&config)?),
        Command::Clt => ("clt", cmd_clt(&config)?),
        Command::Theta => ("theta", cmd_theta(&config)?),
        Command::Words => ("words", cmd_words(&config)?),
        Command::Ornstein { depth, samples, stage } => {
            ("ornstein", cmd_ornstein(&config, *depth, *samples, *stage)?)
        }
    };

    let out_dir = cli
        .out
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&out_dir)?;

    let mut violations = sub.violations;
    match validate_estimates(&sub.json) {
        Ok(()) => {
            let path = out_dir.join(format!("{name}.json"));
            write_json(&path, &sub.json)?;
            println!("wrote {}", path.display());
        }
        // A schema hole is an invariant failure of the report layer, not
        // a user error; the offending report is withheld.
        Err(msg) => violations.push(format!("estimate-schema ({msg})")),
    }
    for (file, header, rows) in &sub.csvs {
        let path = out_dir.join(file);
        write_csv(&path, header, rows)?;
        println!("wrote {}", path.display());
    }
    write_meta(
        &out_dir.join("run_meta.json"),
        name,
        &config_path.to_string_lossy(),
        started.elapsed().as_millis(),
    )?;
    Ok(violations)
}

fn converged_mean_json(m: &ConvergedMean) -> Value {
    json!({
        "value": m.value,
        "convergence_delta": m.convergence_delta,
        "grid_log2": m.grid_log2,
        "converged": m.converged,
    })
}

fn cmd_describe(config: &RunConfig) -> Result<SubReport> {
    let tower = config.build_tower()?;
    let conditions = condition_report(&tower);
    let heights: Vec<String> = tower.heights().iter().map(|h| h.to_string()).collect();
    let columns: Vec<usize> = tower.stages.iter().map(|s| s.columns()).collect();
    let json = json!({
        "family": tower.family_name,
        "depth": tower.depth(),
        "heights": heights,
        "columns": columns,
        "conditions": serde_json::to_value(&conditions)?,
    });
    let rows = conditions
        .stages
        .iter()
        .map(|s| {
            vec![
                s.stage.to_string(),
                s.columns.to_string(),
                s.height_bits.to_string(),
                s.domination.to_string(),
                s.half_total.to_string(),
                s.centered_half_total.to_string(),
                significant(s.restricted_growth_ratio),
                significant(s.inv_p_sq_partial),
                significant(s.finiteness_partial),
            ]
        })
        .collect();
    Ok(SubReport {
        json,
        csvs: vec![(
            "conditions.csv",
            vec![
                "stage",
                "columns",
                "height_bits",
                "domination",
                "half_total",
                "centered_half_total",
                "restricted_growth_ratio",
                "inv_p_sq_partial",
                "finiteness_partial",
            ],
            rows,
        )],
        violations: Vec::new(),
    })
}

fn cmd_riesz(config: &RunConfig) -> Result<SubReport> {
    let tower = config.build_tower()?;
    let policy = config.policy()?;
    let params = config.riesz.clone().unwrap_or(RieszParams { max_partial: None, selection: None });
    let n_max = params.max_partial.unwrap_or(tower.depth()).min(tower.depth());
    if n_max == 0 {
        return Err(Error::Config("riesz needs a tower of depth >= 1".into()));
    }

    let mut violations = Vec::new();
    let mut masses = Vec::with_capacity(n_max);
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (value, grid_log2) = mass(&tower, n, &policy)?;
        let dev = (value - 1.0).abs();
        if dev > MASS_TOLERANCE {
            violations.push(format!("mass-normalization (n = {n}: |mass - 1| = {dev:.3e})"));
        }
        masses.push(json!({
            "n": n,
            "value": value,
            "convergence_delta": 0.0,
            "grid_log2": grid_log2,
        }));
        rows.push(vec![n.to_string(), significant(value)]);
    }

    let indices = params.selection.unwrap_or_else(|| (1..=n_max).collect());
    let selection = FactorSelection::new(indices)?;
    let l1 = l1_product(&tower, &selection, &policy)?;
    let deviation = l1_deviation(&tower, n_max, &policy)?;

    let json = json!({
        "family": tower.family_name,
        "masses": masses,
        "l1": {
            "value": l1.value,
            "convergence_delta": l1.convergence_delta,
            "grid_log2": l1.grid_log2,
            "converged": l1.converged,
            "stages": l1.selection.indices(),
        },
        "top_stage_deviation": {
            "stage": n_max,
            "abs_dev": converged_mean_json(&deviation.abs_dev),
            "sq_dev": converged_mean_json(&deviation.sq_dev),
        },
    });
    Ok(SubReport {
        json,
        csvs: vec![("masses.csv", vec!["n", "mass"], rows)],
        violations,
    })
}

fn cmd_bourgain(config: &RunConfig) -> Result<SubReport> {
    let tower = config.build_tower()?;
    let policy = config.policy()?;
    let (budget, lo, hi) = match &config.bourgain {
        Some(p) => (
            p.budget,
            p.window_lo.unwrap_or(1),
            p.window_hi.unwrap_or(tower.depth()),
        ),
        None => (10, 1, tower.depth()),
    };
    let (selection, steps) = greedy_bourgain(&tower, budget, lo..=hi, &policy)?;

    let mut violations = Vec::new();
    let slack = 2.0 * policy.tolerance + DECAY_SLACK;
    for pair in steps.windows(2) {
        if pair[1].value > pair[0].value + slack {
            violations.push(format!(
                "greedy-decay-monotone (step values {} -> {})",
                pair[0].value, pair[1].value
            ));
        }
    }

    let step_json: Vec<Value> = steps
        .iter()
        .map(|s| {
            json!({
                "value": s.value,
                "convergence_delta": s.convergence_delta,
                "grid_log2": s.grid_log2,
                "converged": s.converged,
                "stages": s.selection.indices(),
            })
        })
        .collect();
    let rows = steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                (i + 1).to_string(),
                significant(s.value),
                significant(s.convergence_delta),
            ]
        })
        .collect();

    let json = json!({
        "family": tower.family_name,
        "budget": budget,
        "window": [lo, hi],
        "selection": selection.indices(),
        "steps": step_json,
    });
    Ok(SubReport {
        json,
        csvs: vec![("decay.csv", vec!["step", "value", "convergence_delta"], rows)],
        violations,
    })
}

fn cmd_clt(config: &RunConfig) -> Result<SubReport> {
    let params = config
        .clt
        .as_ref()
        .ok_or_else(|| Error::Config("clt section missing from config".into()))?;
    let tower = config.build_tower()?;
    let policy = config.policy()?;
    let stage = params.stage;
    if stage == 0 || stage > tower.depth() {
        return Err(Error::Config(format!(
            "key clt.stage: {stage} outside the tower range 1..={}",
            tower.depth()
        )));
    }
    // Default to a grid that resolves the stage polynomial when it fits
    // under the cap, but never fewer than 2^10 nodes for the KS law.
    let grid_log2 = match params.grid_log2 {
        Some(g) => g,
        None => policy
            .start_log2(&tower.stages[stage].max_exponent())
            .clamp(10, policy.cap_log2),
    };
    let set = match &params.arcs {
        Some(arcs) => BorelSet::new(arcs.clone())?,
        None => BorelSet::full_circle(),
    };

    let sum = normalized_sum(&tower, stage, grid_log2, &set)?;
    let ks = ks_distance(&sum)?;
    let (dispersion, disp_log2) = squares_dispersion(&tower, stage, &policy)?;
    let tail = match params.tail_x {
        Some(x) => Some(serde_json::to_value(tail_lower_bound(
            &tower, stage, &set, x, grid_log2,
        )?)?),
        None => None,
    };

    let mut sorted = sum.values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite node values"));
    let stride = sorted.len().div_ceil(params.max_csv_rows).max(1);
    let n = sorted.len() as f64;
    let rows: Vec<Vec<String>> = sorted
        .iter()
        .enumerate()
        .step_by(stride)
        .map(|(i, &v)| {
            vec![
                significant(v),
                significant((i as f64 + 1.0) / n),
                significant(phi(v)),
            ]
        })
        .collect();

    let json = json!({
        "family": tower.family_name,
        "stage": stage,
        "ks": serde_json::to_value(&ks)?,
        "dispersion": {
            "value": dispersion,
            "convergence_delta": 0.0,
            "grid_log2": disp_log2,
        },
        "tail": tail,
    });
    Ok(SubReport {
        json,
        csvs: vec![(
            "cdf.csv",
            vec!["value", "empirical_cdf", "normal_cdf"],
            rows,
        )],
        violations: Vec::new(),
    })
}

fn cmd_theta(config: &RunConfig) -> Result<SubReport> {
    let params = config
        .theta
        .as_ref()
        .ok_or_else(|| Error::Config("theta section missing from config".into()))?;
    let tower = config.build_tower()?;
    let policy = config.policy()?;
    let theta = theta_product(&tower, params.stage, params.x, &policy)?;

    let envelope = (params.x * params.x).exp() + THETA_ENVELOPE_SLACK;
    let mut violations = Vec::new();
    if theta.sup_norm > envelope {
        violations.push(format!(
            "theta-sup-envelope (sup {} exceeds e^(x^2) + eps = {envelope})",
            theta.sup_norm
        ));
    }

    let rows: Vec<Vec<String>> = theta
        .coefficients
        .iter()
        .map(|c| {
            vec![
                c.word.to_string(),
                c.r.map(|r| r.to_string()).unwrap_or_default(),
                significant(c.rho.re),
                significant(c.rho.im),
                significant(c.rho.norm()),
            ]
        })
        .collect();

    let json = json!({
        "family": tower.family_name,
        "stage": theta.stage_m,
        "x": theta.x,
        "grid_log2": theta.grid_log2,
        "constant": {"re": theta.constant.re, "im": theta.constant.im},
        "sup_norm": {"value": theta.sup_norm, "convergence_delta": 0.0,
                     "grid_log2": theta.grid_log2},
        "coefficient_count": theta.coefficients.len(),
    });
    Ok(SubReport {
        json,
        csvs: vec![(
            "coefficients.csv",
            vec!["word", "r", "rho_re", "rho_im", "rho_abs"],
            rows,
        )],
        violations,
    })
}

fn cmd_words(config: &RunConfig) -> Result<SubReport> {
    let params = config
        .words
        .as_ref()
        .ok_or_else(|| Error::Config("words section missing from config".into()))?;
    let tower = config.build_tower()?;
    let stage = params.stage;
    if stage > tower.depth() {
        return Err(Error::Config(format!(
            "key words.stage: {stage} outside the tower range 0..={}",
            tower.depth()
        )));
    }
    let table = enumerate_words(&tower.stages[stage])?;
    let distinct = check_distinct(&table);

    let rows: Vec<Vec<String>> = table
        .entries()
        .iter()
        .map(|e| {
            vec![
                e.value.to_string(),
                e.r().map(|r| r.to_string()).unwrap_or_default(),
            ]
        })
        .collect();

    let json = json!({
        "family": tower.family_name,
        "stage": stage,
        "columns": tower.stages[stage].columns(),
        "distinct": distinct.distinct,
        "count": table.total_vectors(),
        "distinct_values": table.entries().len(),
        "n_max": table.n_max().to_string(),
        "collision_count": distinct.collisions.len(),
    });
    Ok(SubReport {
        json,
        csvs: vec![("words.csv", vec!["word", "r"], rows)],
        violations: Vec::new(),
    })
}

fn cmd_ornstein(
    config: &RunConfig,
    depth: Option<usize>,
    samples: Option<usize>,
    stage: Option<usize>,
) -> Result<SubReport> {
    let base = config
        .ornstein
        .as_ref()
        .ok_or_else(|| Error::Config("ornstein section missing from config".into()))?;
    let mut params: OrnsteinParams = base.clone();
    if let Some(d) = depth {
        if params.constant.is_none() {
            return Err(Error::Config(
                "--depth override needs the `constant` plan form".into(),
            ));
        }
        params.depth = d;
    }
    if let Some(s) = samples {
        params.gap_samples = s;
    }
    if let Some(s) = stage {
        params.stage = s;
    }

    let policy = config.policy()?;
    let ensemble = params.to_ensemble(config.seed)?;
    let k = params.stage;
    if k >= ensemble.stages() {
        return Err(Error::Config(format!(
            "key ornstein.stage: {k} outside the planned range 0..{}",
            ensemble.stages()
        )));
    }

    let xi_l2: Vec<f64> = (0..ensemble.stages())
        .map(|i| ensemble.plan(i).map(|p| p.xi.l2()))
        .collect::<Result<_>>()?;
    let gap = centering_gap_estimate(&ensemble, k, params.gap_samples, &policy)?;
    let (clt, samples_vec) =
        clt_in_omega_with_samples(&ensemble, k, params.t0, params.clt_samples)?;

    let mut violations = Vec::new();
    if gap.mc_mean > gap.bound + 3.0 * gap.stderr {
        violations.push(format!(
            "centering-gap-bound (mc_mean {} exceeds bound {} + 3 stderr {})",
            gap.mc_mean, gap.bound, gap.stderr
        ));
    }

    let rows = histogram_rows(&samples_vec, params.histogram_bins)?;
    let json = json!({
        "seed": ensemble.seed(),
        "stage": k,
        "xi_l2": xi_l2,
        "centering": serde_json::to_value(&gap)?,
        "clt": serde_json::to_value(&clt)?,
    });
    Ok(SubReport {
        json,
        csvs: vec![(
            "histogram.csv",
            vec!["bin_left", "bin_right", "count"],
            rows,
        )],
        violations,
    })
}

/// Fixed-range histogram over [-5, 5]; out-of-range samples land in the
/// edge bins so counts always total the sample count.
fn histogram_rows(values: &[f64], bins: usize) -> Result<Vec<Vec<String>>> {
    if bins == 0 {
        return Err(Error::Config("key ornstein.histogram_bins: must be >= 1".into()));
    }
    let (lo, hi) = (-5.0f64, 5.0f64);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (((v - lo) / width).floor() as i64).clamp(0, bins as i64 - 1) as usize;
        counts[idx] += 1;
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            vec![
                significant(lo + i as f64 * width),
                significant(lo + (i as f64 + 1.0) * width),
                c.to_string(),
            ]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> RunConfig {
        RunConfig::from_str(text).unwrap()
    }

    #[test]
    fn describe_geometric_flags_all_hold() {
        let sub = cmd_describe(&config(
            r#"{"family": {"rule": "geometric", "scale": "1"}, "depth": 6}"#,
        ))
        .unwrap();
        let stages = sub.json["conditions"]["stages"].as_array().unwrap();
        assert_eq!(stages.len(), 7);
        for s in stages {
            assert_eq!(s["domination"], true, "stage {}", s["stage"]);
            assert_eq!(s["half_total"], true, "stage {}", s["stage"]);
        }
        // Heights travel as decimal strings.
        assert_eq!(sub.json["heights"][0], "1");
        assert!(sub.json["heights"][6].is_string());
        assert!(validate_estimates(&sub.json).is_ok());
    }

    #[test]
    fn describe_staircase_flags_break_at_four_columns() {
        let sub = cmd_describe(&config(
            r#"{"family": {"rule": "staircase", "base_columns": 2}, "depth": 6}"#,
        ))
        .unwrap();
        let stages = sub.json["conditions"]["stages"].as_array().unwrap();
        // Stages 0 and 1 have 2 and 3 columns and still pass; from stage
        // 2 on (4 columns and up) the domination condition fails.
        assert_eq!(stages[0]["domination"], true);
        assert_eq!(stages[1]["domination"], true);
        for s in &stages[2..] {
            assert_eq!(s["domination"], false, "stage {}", s["stage"]);
        }
    }

    #[test]
    fn riesz_masses_hold_on_a_small_tower() {
        let sub = cmd_riesz(&config(
            r#"{"family": {"rule": "zero-spacers", "columns": [2]}, "depth": 3}"#,
        ))
        .unwrap();
        assert!(sub.violations.is_empty(), "{:?}", sub.violations);
        let masses = sub.json["masses"].as_array().unwrap();
        assert_eq!(masses.len(), 3);
        for m in masses {
            assert!((m["value"].as_f64().unwrap() - 1.0).abs() <= MASS_TOLERANCE);
        }
        assert!(sub.json["l1"]["value"].as_f64().unwrap() <= 1.0 + 1e-9);
        assert!(validate_estimates(&sub.json).is_ok());
        assert_eq!(sub.csvs[0].2.len(), 3);
    }

    #[test]
    fn bourgain_steps_never_increase() {
        let sub = cmd_bourgain(&config(
            r#"{"family": {"rule": "geometric", "scale": "1"}, "depth": 8,
                "bourgain": {"budget": 4, "window_lo": 6, "window_hi": 8}}"#,
        ))
        .unwrap();
        assert!(sub.violations.is_empty(), "{:?}", sub.violations);
        // Budget 4 in a 3-stage window still yields one estimate per
        // greedy step until the window is exhausted.
        let steps = sub.json["steps"].as_array().unwrap();
        assert_eq!(steps.len(), 3);
        assert!(validate_estimates(&sub.json).is_ok());
    }

    #[test]
    fn clt_requires_its_section_and_a_real_stage() {
        let bare = config(r#"{"family": {"rule": "geometric", "scale": "1"}, "depth": 4}"#);
        assert!(cmd_clt(&bare).is_err());
        let zero_stage = config(
            r#"{"family": {"rule": "geometric", "scale": "1"}, "depth": 4,
                "clt": {"stage": 0}}"#,
        );
        assert!(cmd_clt(&zero_stage).is_err());
    }

    #[test]
    fn clt_reports_ks_and_dispersion() {
        let sub = cmd_clt(&config(
            r#"{"family": {"rule": "geometric", "scale": "1"}, "depth": 7,
                "clt": {"stage": 7, "max_csv_rows": 100}}"#,
        ))
        .unwrap();
        let ks = sub.json["ks"]["ks"].as_f64().unwrap();
        assert!(ks > 0.0 && ks < 1.0);
        assert!(sub.json["dispersion"]["value"].as_f64().unwrap() > 0.0);
        assert!(sub.csvs[0].2.len() <= 101);
        assert!(validate_estimates(&sub.json).is_ok());
    }

    #[test]
    fn theta_envelope_holds_on_a_small_stage() {
        let sub = cmd_theta(&config(
            r#"{"family": {"rule": "geometric", "scale": "1"}, "depth": 6,
                "theta": {"stage": 6, "x": 1.0}}"#,
        ))
        .unwrap();
        assert!(sub.violations.is_empty(), "{:?}", sub.violations);
        let sup = sub.json["sup_norm"]["value"].as_f64().unwrap();
        assert!(sup <= 1.0f64.exp() + THETA_ENVELOPE_SLACK);
        assert!(!sub.csvs[0].2.is_empty());
    }

    #[test]
    fn words_example_counts_every_vector() {
        // An explicit two-stage family whose stage 1 has 10 columns with
        // geometrically growing spacers; 3^10 sign vectors, all distinct.
        let sub = cmd_words(&config(
            r#"{"family": {"rule": "explicit",
                "stages": [["0", "59045"],
                           ["0", "3", "9", "27", "81", "243", "729", "2187", "6561", "19683"]]},
                "depth": 1, "words": {"stage": 1}}"#,
        ))
        .unwrap();
        assert_eq!(sub.json["distinct"], true);
        assert_eq!(sub.json["count"], 59049);
        assert_eq!(sub.json["columns"], 10);
    }

    #[test]
    fn ornstein_small_run_reports_all_blocks() {
        let sub = cmd_ornstein(
            &config(
                r#"{"family": {"rule": "geometric", "scale": "1"}, "depth": 1, "seed": 11,
                "grid_cap_log2": 12, "tolerance": 1e-4,
                "ornstein": {"constant": {"p": 16, "t": 8,
                                          "xi": {"kind": "uniform", "radius": 4}},
                             "depth": 2, "gap_samples": 120}}"#,
            ),
            None,
            None,
            None,
        )
        .unwrap();
        assert!(sub.violations.is_empty(), "{:?}", sub.violations);
        assert_eq!(sub.json["xi_l2"].as_array().unwrap().len(), 2);
        assert!(sub.json["centering"]["mc_mean"].as_f64().unwrap() >= 0.0);
        assert!(sub.json["clt"]["ks"]["ks"].as_f64().unwrap() < 1.0);
        assert!(validate_estimates(&sub.json).is_ok());
        // Histogram counts total the CLT sample count.
        let total: usize = sub.csvs[0]
            .2
            .iter()
            .map(|row| row[2].parse::<usize>().unwrap())
            .sum();
        assert_eq!(total, 10_000);
    }

    #[test]
    fn ornstein_depth_override_requires_constant_form() {
        let cfg = config(
            r#"{"family": {"rule": "geometric", "scale": "1"}, "depth": 1,
                "ornstein": {"plans": [{"p": 4, "t": 2,
                                        "xi": {"kind": "uniform", "radius": 1}}]}}"#,
        );
        assert!(cmd_ornstein(&cfg, Some(3), None, None).is_err());
    }

    #[test]
    fn histogram_covers_outliers_in_edge_bins() {
        let rows = histogram_rows(&[-9.0, -0.1, 0.1, 9.0], 2).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][2], "2");
        assert_eq!(rows[1][2], "2");
        assert!(histogram_rows(&[], 0).is_err());
    }
}
