//! Monte Carlo experiment runner: sweeps over the snapshot count or the SNR,
//! per-estimator metrics (squared subspace distance per subspace, mean and
//! standard deviation of the estimated principal angles), CSV persistence
//! and reproducible splittable seeding.
//!
//! Seeding layout: the truth bases are a fixed function of the master seed
//! alone, so they are identical at every sweep point and trial. Each trial
//! gets its seed from a counter-based hash of (master seed, sweep index,
//! trial index), never from shared-stream consumption order, which makes
//! parallel and serial execution bitwise identical.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{gibbs_estimate, imap_estimate, svd_estimate, EstimatorTag};
use crate::io::fmt_f64;
use crate::model::{generate_data, make_close_basis, ScenarioConfig};
use crate::stiefel::{principal_angles, subspace_sq_distance, uniform_stiefel, OrthonormalBasis};

const TRUTH_STREAM: u64 = 1;
const TRIAL_STREAM: u64 = 2;
const DATA_STREAM: u64 = 3;
const GIBBS_STREAM: u64 = 4;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable counter-based seed derivation: mixes the master seed with a list
/// of stream/index words. Independent of evaluation order and platform.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &w in words {
        s = splitmix64(s ^ splitmix64(w));
    }
    s
}

/// Which scenario field a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "t")]
    T,
    #[serde(rename = "snr_db")]
    SnrDb,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::T => "t",
            SweepVariable::SnrDb => "snr_db",
        }
    }
}

impl std::str::FromStr for SweepVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(SweepVariable::T),
            "snr_db" => Ok(SweepVariable::SnrDb),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep variable {other:?}"
            ))),
        }
    }
}

/// A full experiment description: base scenario, the swept variable and its
/// grid, the Monte Carlo repetition count and the CSV destination.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub n_trials: usize,
    pub output_path: String,
}

impl SweepSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let spec: SweepSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.sweep_values.is_empty() {
            return Err(Error::field("sweep_values", "must not be empty"));
        }
        if self.n_trials == 0 {
            return Err(Error::field("n_trials", "must be at least 1"));
        }
        for &v in &self.sweep_values {
            self.configure_point(v)?;
        }
        Ok(())
    }

    /// The scenario at one sweep value.
    pub fn configure_point(&self, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = self.base.clone();
        match self.sweep_variable {
            SweepVariable::T => {
                if !value.is_finite() || value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::field(
                        "sweep_values",
                        format!("snapshot counts must be positive integers, got {value}"),
                    ));
                }
                cfg.t = value as usize;
            }
            SweepVariable::SnrDb => {
                if !value.is_finite() {
                    return Err(Error::field("sweep_values", "SNR values must be finite"));
                }
                cfg.snr_db = value;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Per-trial, per-estimator metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialMetrics {
    pub trial_id: u64,
    pub estimator: EstimatorTag,
    /// Squared subspace distance to the truth, one entry per subspace.
    pub msd: Vec<f64>,
    /// Principal angles between the first two estimated subspaces, degrees,
    /// sorted non-decreasing.
    pub theta_hat_deg: Vec<f64>,
}

/// One row of a trial: either metrics or a recorded failure. Failures never
/// abort a sweep; they are excluded from the aggregates.
#[derive(Clone, Debug)]
pub enum TrialRow {
    Metrics(TrialMetrics),
    Failed {
        trial_id: u64,
        estimator: EstimatorTag,
        message: String,
    },
}

/// The truth bases implied by a scenario: a chain started from a uniform
/// draw, each link planted at the configured angles. A fixed function of
/// the master seed, identical across sweep points and trials.
pub fn truth_bases(config: &ScenarioConfig) -> Result<Vec<OrthonormalBasis>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[TRUTH_STREAM]));
    let angles: Vec<f64> = config
        .true_angles_deg
        .iter()
        .map(|a| a.to_radians())
        .collect();
    let mut out = vec![uniform_stiefel(config.m, config.r, &mut rng)?];
    for _ in 1..config.k {
        let prev = out.last().expect("chain is non-empty").clone();
        out.push(make_close_basis(&prev, &angles, &mut rng)?);
    }
    Ok(out)
}

fn metrics_for(
    trial_id: u64,
    estimator: EstimatorTag,
    bases: &[OrthonormalBasis],
    truth: &[OrthonormalBasis],
) -> Result<TrialMetrics> {
    let msd = bases
        .iter()
        .zip(truth)
        .map(|(b, t)| subspace_sq_distance(b, t))
        .collect::<Result<Vec<_>>>()?;
    let theta_hat_deg = principal_angles(&bases[0], &bases[1])?.degrees();
    Ok(TrialMetrics {
        trial_id,
        estimator,
        msd,
        theta_hat_deg,
    })
}

/// Runs one Monte Carlo trial: regenerates the fixed truth, draws fresh
/// signal and noise from the trial seed, runs all three estimators and
/// scores them. Estimator failures become [`TrialRow::Failed`] entries.
pub fn run_trial(config: &ScenarioConfig, trial_seed: u64) -> Result<Vec<TrialRow>> {
    let truth = truth_bases(config)?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, &[DATA_STREAM]));
    let data = generate_data(config, &truth, &mut data_rng)?;

    let trial_id = trial_seed;
    let mut rows = Vec::with_capacity(3);
    for tag in EstimatorTag::ALL {
        let estimate: Result<Vec<OrthonormalBasis>> = match tag {
            EstimatorTag::Svd => data
                .x
                .iter()
                .map(|xk| svd_estimate(xk, config.r).map(|e| e.basis))
                .collect(),
            EstimatorTag::Gibbs => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, &[GIBBS_STREAM]));
                gibbs_estimate(&data, &mut rng).map(|e| e.bases)
            }
            EstimatorTag::Imap => imap_estimate(&data).map(|e| e.bases),
        };
        let row = match estimate.and_then(|bases| metrics_for(trial_id, tag, &bases, &truth)) {
            Ok(m) => TrialRow::Metrics(m),
            Err(e) => TrialRow::Failed {
                trial_id,
                estimator: tag,
                message: e.to_string(),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Aggregated results for one (sweep value, estimator) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub sweep_variable: SweepVariable,
    pub sweep_value: f64,
    pub estimator: EstimatorTag,
    /// Mean squared subspace distance per subspace over successful trials.
    pub mean_msd: Vec<f64>,
    /// Mean of each estimated angle, degrees.
    pub theta_mean_deg: Vec<f64>,
    /// Sample standard deviation of each estimated angle, degrees; zero when
    /// fewer than two trials succeeded.
    pub theta_std_deg: Vec<f64>,
    /// Number of successful trials behind the aggregates.
    pub n_trials: usize,
}

/// Runs the full sweep, writes the summary CSV to `spec.output_path` and
/// returns the same table in memory. `threads` bounds the rayon pool
/// (`None` = library default); the output is independent of the choice.
pub fn run_sweep(spec: &SweepSpec, threads: Option<usize>) -> Result<Vec<SummaryRow>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

    let mut summary = Vec::new();
    for (si, &value) in spec.sweep_values.iter().enumerate() {
        let cfg = spec.configure_point(value)?;
        let master = cfg.seed;
        let trial_rows: Result<Vec<Vec<TrialRow>>> = pool.install(|| {
            (0..spec.n_trials)
                .into_par_iter()
                .map(|ti| {
                    let trial_seed =
                        derive_seed(master, &[TRIAL_STREAM, si as u64, ti as u64]);
                    run_trial(&cfg, trial_seed)
                })
                .collect()
        });
        let trial_rows = trial_rows?;

        for tag in EstimatorTag::ALL {
            let successes: Vec<&TrialMetrics> = trial_rows
                .iter()
                .flatten()
                .filter_map(|row| match row {
                    TrialRow::Metrics(m) if m.estimator == tag => Some(m),
                    _ => None,
                })
                .collect();
            summary.push(aggregate_cell(
                spec.sweep_variable,
                value,
                tag,
                &successes,
                cfg.k,
                cfg.r,
            ));
        }
    }

    write_summary_csv(Path::new(&spec.output_path), &summary, &spec.base)?;
    Ok(summary)
}

fn aggregate_cell(
    sweep_variable: SweepVariable,
    sweep_value: f64,
    estimator: EstimatorTag,
    rows: &[&TrialMetrics],
    k: usize,
    r: usize,
) -> SummaryRow {
    let n = rows.len();
    let mut mean_msd = vec![0.0; k];
    let mut theta_mean = vec![0.0; r];
    let mut theta_std = vec![0.0; r];
    if n > 0 {
        for row in rows {
            for (acc, v) in mean_msd.iter_mut().zip(&row.msd) {
                *acc += v;
            }
            for (acc, v) in theta_mean.iter_mut().zip(&row.theta_hat_deg) {
                *acc += v;
            }
        }
        for v in mean_msd.iter_mut().chain(theta_mean.iter_mut()) {
            *v /= n as f64;
        }
        if n > 1 {
            for row in rows {
                for ((acc, m), v) in theta_std.iter_mut().zip(&theta_mean).zip(&row.theta_hat_deg)
                {
                    *acc += (v - m).powi(2);
                }
            }
            for v in theta_std.iter_mut() {
                *v = (*v / (n - 1) as f64).sqrt();
            }
        }
    }
    SummaryRow {
        sweep_variable,
        sweep_value,
        estimator,
        mean_msd,
        theta_mean_deg: theta_mean,
        theta_std_deg: theta_std,
        n_trials: n,
    }
}

/// Header for the summary CSV at the given chain length and subspace
/// dimension. For K = 2, R = 2 this is exactly
/// `sweep_var,sweep_value,estimator,msd1,msd2,theta1_mean,theta1_std,theta2_mean,theta2_std,n_trials`.
pub fn csv_header(k: usize, r: usize) -> String {
    let mut cols = vec![
        "sweep_var".to_string(),
        "sweep_value".to_string(),
        "estimator".to_string(),
    ];
    for i in 1..=k {
        cols.push(format!("msd{i}"));
    }
    for i in 1..=r {
        cols.push(format!("theta{i}_mean"));
        cols.push(format!("theta{i}_std"));
    }
    cols.push("n_trials".to_string());
    cols.join(",")
}

/// Writes the summary table as comma-delimited UTF-8 with newline-terminated
/// rows; all floating-point fields carry 17 significant digits so that
/// parsing the file reproduces the in-memory summary exactly.
pub fn write_summary_csv(
    path: &Path,
    rows: &[SummaryRow],
    base: &ScenarioConfig,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&csv_header(base.k, base.r));
    out.push('\n');
    for row in rows {
        let mut fields = vec![
            row.sweep_variable.as_str().to_string(),
            fmt_f64(row.sweep_value),
            row.estimator.as_str().to_string(),
        ];
        fields.extend(row.mean_msd.iter().map(|&v| fmt_f64(v)));
        for i in 0..row.theta_mean_deg.len() {
            fields.push(fmt_f64(row.theta_mean_deg[i]));
            fields.push(fmt_f64(row.theta_std_deg[i]));
        }
        fields.push(row.n_trials.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses a summary CSV produced by [`write_summary_csv`].
pub fn parse_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let malformed = |detail: String| Error::MalformedFile {
        path: path.display().to_string(),
        detail,
    };
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed("missing header".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let k = cols.iter().filter(|c| c.starts_with("msd")).count();
    let r = cols
        .iter()
        .filter(|c| c.starts_with("theta") && c.ends_with("_mean"))
        .count();
    if k == 0 || r == 0 || cols.len() != 3 + k + 2 * r + 1 {
        return Err(malformed(format!("unrecognized header {header:?}")));
    }

    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(malformed(format!(
                "line {}: expected {} fields, found {}",
                ln + 2,
                cols.len(),
                fields.len()
            )));
        }
        let bad = |what: &str, tok: &str| {
            malformed(format!("line {}: bad {what} {tok:?}", ln + 2))
        };
        let sweep_variable: SweepVariable = fields[0]
            .parse()
            .map_err(|_| bad("sweep variable", fields[0]))?;
        let sweep_value: f64 = fields[1].parse().map_err(|_| bad("number", fields[1]))?;
        let estimator: EstimatorTag =
            fields[2].parse().map_err(|_| bad("estimator", fields[2]))?;
        let mut idx = 3;
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                out.push(
                    fields[idx]
                        .parse::<f64>()
                        .map_err(|_| bad("number", fields[idx]))?,
                );
                idx += 1;
            }
            Ok(out)
        };
        let mean_msd = take(k)?;
        let interleaved = take(2 * r)?;
        let theta_mean_deg: Vec<f64> = interleaved.iter().step_by(2).copied().collect();
        let theta_std_deg: Vec<f64> = interleaved.iter().skip(1).step_by(2).copied().collect();
        let n_trials: usize = fields[idx]
            .parse()
            .map_err(|_| bad("trial count", fields[idx]))?;
        rows.push(SummaryRow {
            sweep_variable,
            sweep_value,
            estimator,
            mean_msd,
            theta_mean_deg,
            theta_std_deg,
            n_trials,
        });
    }
    Ok(rows)
}
