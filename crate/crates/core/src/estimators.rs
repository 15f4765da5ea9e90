//! The three subspace estimators compared by the harness: an SVD baseline
//! operating on each observation independently, the Gibbs-sampler
//! minimum-mean-square-distance estimator, and the iterative MAP scheme of
//! alternating dominant-eigenvector updates. All three generalize to chains
//! of K >= 2 subspaces.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{conditional_bingham_params, log_joint_posterior, DataSet};
use crate::stiefel::{complete_orthonormal, principal_subspace, OrthonormalBasis};

/// Which estimator produced a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorTag {
    Svd,
    Gibbs,
    Imap,
}

impl EstimatorTag {
    pub const ALL: [EstimatorTag; 3] = [EstimatorTag::Svd, EstimatorTag::Gibbs, EstimatorTag::Imap];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorTag::Svd => "svd",
            EstimatorTag::Gibbs => "gibbs",
            EstimatorTag::Imap => "imap",
        }
    }
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EstimatorTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd" => Ok(EstimatorTag::Svd),
            "gibbs" => Ok(EstimatorTag::Gibbs),
            "imap" => Ok(EstimatorTag::Imap),
            other => Err(Error::InvalidArgument(format!(
                "unknown estimator tag {other:?}"
            ))),
        }
    }
}

/// Estimated bases for all K subspaces plus method-specific bookkeeping.
#[derive(Clone, Debug)]
pub struct EstimateResult {
    pub bases: Vec<OrthonormalBasis>,
    pub method: EstimatorTag,
    /// Log-posterior after each full iteration (iterative MAP only).
    pub log_posterior_trace: Option<Vec<f64>>,
    /// Number of kept Gibbs samples behind each basis (Gibbs only).
    pub kept_samples: Option<usize>,
}

/// SVD baseline result; `degenerate` flags observation matrices with fewer
/// than R usable singular directions, in which case the basis was completed
/// with an arbitrary orthonormal extension.
#[derive(Clone, Debug)]
pub struct SvdEstimate {
    pub basis: OrthonormalBasis,
    pub degenerate: bool,
}

/// The R dominant left singular vectors of `x`.
pub fn svd_estimate(x: &DMatrix<f64>, r: usize) -> Result<SvdEstimate> {
    let (m, t) = (x.nrows(), x.ncols());
    if r == 0 || r > m {
        return Err(Error::InvalidArgument(format!(
            "requested R={r} dominant directions from an {m}x{t} matrix"
        )));
    }
    if t == 0 {
        return Err(Error::InvalidArgument("observation matrix has no columns".into()));
    }
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors were requested");
    let mut order: Vec<usize> = (0..u.ncols()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("singular values are finite")
    });

    let sigma_max = svd.singular_values[order[0]];
    let tol = 1e-12 * sigma_max.max(1e-300);
    let usable = order
        .iter()
        .take_while(|&&i| svd.singular_values[i] > tol)
        .count()
        .min(r);
    let degenerate = usable < r;

    let cols: Vec<DVector<f64>> = order
        .iter()
        .take(r.min(u.ncols()))
        .map(|&i| u.column(i).into_owned())
        .collect();
    let basis = OrthonormalBasis::new(complete_orthonormal(cols, m, r))?;
    Ok(SvdEstimate { basis, degenerate })
}

/// Dominant invariant subspace of the average projector of a sample set:
/// the minimum-mean-square-distance point estimate.
pub fn mmsd_aggregate(samples: &[OrthonormalBasis], r: usize) -> Result<OrthonormalBasis> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("mmsd_aggregate needs samples"));
    }
    let m = samples[0].m();
    let mut mean = DMatrix::<f64>::zeros(m, m);
    for s in samples {
        if s.m() != m {
            return Err(Error::DimensionMismatch(
                "samples have inconsistent ambient dimension".into(),
            ));
        }
        mean += s.projector();
    }
    mean /= samples.len() as f64;
    principal_subspace(&mean, r)
}

fn neighbors_of(current: &[OrthonormalBasis], k: usize) -> Vec<OrthonormalBasis> {
    let mut out = Vec::with_capacity(2);
    if k > 0 {
        out.push(current[k - 1].clone());
    }
    if k + 1 < current.len() {
        out.push(current[k + 1].clone());
    }
    out
}

fn svd_initialization(data: &DataSet) -> Result<Vec<OrthonormalBasis>> {
    data.x
        .iter()
        .map(|xk| svd_estimate(xk, data.config.r).map(|e| e.basis))
        .collect()
}

/// Gibbs sampler over the full conditionals of every subspace, followed by
/// the minimum-distance aggregation of the kept draws.
///
/// Initialization is the per-observation SVD estimate; each of the
/// `n_burn + n_keep` outer iterations redraws every basis from its Bingham
/// full conditional in descending subspace order.
pub fn gibbs_estimate<RNG: Rng + ?Sized>(data: &DataSet, rng: &mut RNG) -> Result<EstimateResult> {
    let cfg = &data.config;
    let kk = cfg.k;
    let mut current = svd_initialization(data)?;
    let mut kept: Vec<Vec<OrthonormalBasis>> = vec![Vec::with_capacity(cfg.n_keep); kk];

    for n in 1..=cfg.n_burn + cfg.n_keep {
        for k in (0..kk).rev() {
            let params = conditional_bingham_params(data, k, &neighbors_of(&current, k))?;
            current[k] = crate::bingham::sample_bingham(&params, cfg.r, &current[k], 1, rng)?;
        }
        if n > cfg.n_burn {
            for k in 0..kk {
                kept[k].push(current[k].clone());
            }
        }
    }

    let bases = kept
        .iter()
        .map(|samples| mmsd_aggregate(samples, cfg.r))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateResult {
        bases,
        method: EstimatorTag::Gibbs,
        log_posterior_trace: None,
        kept_samples: Some(cfg.n_keep),
    })
}

/// [`gibbs_estimate`] with a self-contained deterministic stream derived
/// from `seed`.
pub fn gibbs_estimate_seeded(data: &DataSet, seed: u64) -> Result<EstimateResult> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    gibbs_estimate(data, &mut rng)
}

/// How long the log-posterior gain must stay below threshold before the
/// alternating MAP iteration stops early.
const IMAP_STALL_ITERS: usize = 3;
const IMAP_STALL_GAIN: f64 = 1e-10;

/// Alternating maximization of the joint posterior: each subspace is set to
/// the dominant invariant subspace of its conditional parameter matrix, in
/// descending subspace order, for at most `n_imap` iterations. The recorded
/// log-posterior trace is non-decreasing by construction.
pub fn imap_estimate(data: &DataSet) -> Result<EstimateResult> {
    let cfg = &data.config;
    let kk = cfg.k;
    let mut current = svd_initialization(data)?;
    let mut trace = Vec::with_capacity(cfg.n_imap);
    let mut prev = f64::NEG_INFINITY;
    let mut stalled = 0;

    for _ in 0..cfg.n_imap {
        for k in (0..kk).rev() {
            let params = conditional_bingham_params(data, k, &neighbors_of(&current, k))?;
            current[k] = principal_subspace(params.matrix(), cfg.r)?;
        }
        let lp = log_joint_posterior(&current, data)?;
        trace.push(lp);
        if lp - prev < IMAP_STALL_GAIN {
            stalled += 1;
            if stalled >= IMAP_STALL_ITERS {
                break;
            }
        } else {
            stalled = 0;
        }
        prev = lp;
    }

    Ok(EstimateResult {
        bases: current,
        method: EstimatorTag::Imap,
        log_posterior_trace: Some(trace),
        kept_samples: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bingham::log_density_unnorm;
    use crate::model::{generate_data, make_close_basis, ScenarioConfig};
    use crate::stiefel::{subspace_sq_distance, uniform_stiefel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn dataset(config: &ScenarioConfig, seed: u64) -> DataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h1 = uniform_stiefel(config.m, config.r, &mut rng).unwrap();
        let angles: Vec<f64> = config.true_angles_deg.iter().map(|a| a.to_radians()).collect();
        let mut h_true = vec![h1];
        for _ in 1..config.k {
            let prev = h_true.last().unwrap().clone();
            h_true.push(make_close_basis(&prev, &angles, &mut rng).unwrap());
        }
        generate_data(config, &h_true, &mut rng).unwrap()
    }

    #[test]
    fn svd_recovers_noise_free_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = uniform_stiefel(6, 2, &mut rng).unwrap();
        let s = DMatrix::from_fn(2, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = h.matrix() * s;
        let est = svd_estimate(&x, 2).unwrap();
        assert!(!est.degenerate);
        assert!(subspace_sq_distance(&est.basis, &h).unwrap() < 1e-9);
    }

    #[test]
    fn svd_completes_rank_deficient_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(5, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let est = svd_estimate(&x, 3).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.basis.r(), 3);
        // First direction still tracks the single data column.
        let col = x.column(0).into_owned();
        let unit = &col / col.norm();
        let align = (est.basis.matrix().transpose() * unit).norm();
        assert!((align - 1.0).abs() < 1e-9);
    }

    #[test]
    fn svd_agrees_with_gram_matrix_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = DMatrix::from_fn(7, 9, |_, _| rng.sample::<f64, _>(StandardNormal));
            let est = svd_estimate(&x, 3).unwrap();
            let gram = &x * x.transpose();
            let oracle = principal_subspace(&gram, 3).unwrap();
            assert!(subspace_sq_distance(&est.basis, &oracle).unwrap() < 1e-9);
        }
    }

    #[test]
    fn svd_rejects_r_larger_than_m() {
        let x = DMatrix::<f64>::zeros(3, 4);
        assert!(svd_estimate(&x, 4).is_err());
    }

    #[test]
    fn mmsd_of_a_constant_sample_set_is_that_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = uniform_stiefel(5, 2, &mut rng).unwrap();
        let q = uniform_stiefel(2, 2, &mut rng).unwrap();
        let hq = OrthonormalBasis::new(h.matrix() * q.matrix()).unwrap();
        let est = mmsd_aggregate(&[h.clone(), hq], 2).unwrap();
        assert!(subspace_sq_distance(&est, &h).unwrap() < 1e-9);
    }

    #[test]
    fn mmsd_weighted_average_projector() {
        // 3 samples spanning {e1,e2} and 1 spanning {e1,e3}: the average
        // projector is diag(1, 0.75, 0.25) whose top-2 subspace is {e1,e2}.
        let span12 = OrthonormalBasis::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        ))
        .unwrap();
        let span13 = OrthonormalBasis::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        ))
        .unwrap();
        let samples = vec![span12.clone(), span12.clone(), span12.clone(), span13];
        let est = mmsd_aggregate(&samples, 2).unwrap();
        assert!(subspace_sq_distance(&est, &span12).unwrap() < 1e-9);
    }

    #[test]
    fn mmsd_handles_degenerate_ties() {
        // Two orthogonal lines with equal weight: the average projector is
        // I/2 and any unit vector is a valid answer.
        let e1 = OrthonormalBasis::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let e2 = OrthonormalBasis::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let est = mmsd_aggregate(&[e1, e2], 1).unwrap();
        assert_eq!(est.m(), 2);
        assert_eq!(est.r(), 1);
    }

    #[test]
    fn mmsd_rejects_empty_input() {
        assert!(matches!(
            mmsd_aggregate(&[], 2),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn gibbs_matches_svd_when_prior_vanishes_and_noise_is_gone() {
        let config = ScenarioConfig {
            snr_db: 300.0,
            kappa: vec![0.0],
            n_burn: 5,
            n_keep: 20,
            seed: 5,
            ..ScenarioConfig::default()
        };
        let data = dataset(&config, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let est = gibbs_estimate(&data, &mut rng).unwrap();
        for (k, xk) in data.x.iter().enumerate() {
            let svd = svd_estimate(xk, config.r).unwrap();
            let d = subspace_sq_distance(&est.bases[k], &svd.basis).unwrap();
            assert!(d < 1e-4, "subspace {k}: distance {d}");
        }
    }

    #[test]
    fn gibbs_is_deterministic_under_a_fixed_seed() {
        let config = ScenarioConfig { n_keep: 15, seed: 7, ..ScenarioConfig::default() };
        let data = dataset(&config, 7);
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            gibbs_estimate(&data, &mut rng).unwrap()
        };
        let a = run(42);
        let b = run(42);
        for (x, y) in a.bases.iter().zip(&b.bases) {
            assert_eq!(x.matrix(), y.matrix());
        }
        assert_eq!(a.kept_samples, Some(15));
    }

    #[test]
    fn gibbs_single_draw_pipeline_stays_on_the_manifold() {
        let config = ScenarioConfig { n_burn: 0, n_keep: 1, seed: 8, ..ScenarioConfig::default() };
        let data = dataset(&config, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let est = gibbs_estimate(&data, &mut rng).unwrap();
        for b in &est.bases {
            let gram = b.matrix().transpose() * b.matrix();
            assert!((gram - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
        }
    }

    #[test]
    fn imap_with_zero_kappa_lands_on_the_svd_estimates() {
        let config = ScenarioConfig { kappa: vec![0.0], seed: 10, ..ScenarioConfig::default() };
        let data = dataset(&config, 10);
        let est = imap_estimate(&data).unwrap();
        for (k, xk) in data.x.iter().enumerate() {
            let svd = svd_estimate(xk, config.r).unwrap();
            let d = subspace_sq_distance(&est.bases[k], &svd.basis).unwrap();
            assert!(d < 1e-9, "subspace {k}: distance {d}");
        }
        // Decoupled updates converge immediately, so the early exit fires.
        let trace = est.log_posterior_trace.unwrap();
        assert!(trace.len() <= 1 + IMAP_STALL_ITERS);
    }

    #[test]
    fn imap_trace_is_monotone_non_decreasing() {
        for seed in 0..10u64 {
            let config = ScenarioConfig { seed, ..ScenarioConfig::default() };
            let data = dataset(&config, seed);
            let est = imap_estimate(&data).unwrap();
            let trace = est.log_posterior_trace.unwrap();
            assert!(!trace.is_empty() && trace.len() <= config.n_imap);
            for w in trace.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-9,
                    "seed {seed}: trace dropped from {} to {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn conditional_map_update_maximizes_the_conditional_density() {
        let config = ScenarioConfig { seed: 11, ..ScenarioConfig::default() };
        let data = dataset(&config, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for k in 0..2 {
            let params =
                conditional_bingham_params(&data, k, &[data.h_true[1 - k].clone()]).unwrap();
            let map = principal_subspace(params.matrix(), config.r).unwrap();
            let map_density = log_density_unnorm(&map, &params).unwrap();
            for _ in 0..100 {
                let u = uniform_stiefel(config.m, config.r, &mut rng).unwrap();
                let d = log_density_unnorm(&u, &params).unwrap();
                assert!(
                    map_density >= d - 1e-9,
                    "random basis beat the MAP update: {d} > {map_density}"
                );
            }
        }
    }

    #[test]
    fn svd_and_imap_are_equivariant_under_left_rotations() {
        let config = ScenarioConfig { seed: 13, ..ScenarioConfig::default() };
        let data = dataset(&config, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let q = uniform_stiefel(config.m, config.m, &mut rng).unwrap();

        let rotated = DataSet::new(
            data.x.iter().map(|xk| q.matrix() * xk).collect(),
            data.h_true
                .iter()
                .map(|h| OrthonormalBasis::new(q.matrix() * h.matrix()).unwrap())
                .collect(),
            data.sigma2,
            data.config.clone(),
        )
        .unwrap();

        for k in 0..2 {
            let plain = svd_estimate(&data.x[k], config.r).unwrap().basis;
            let rot = svd_estimate(&rotated.x[k], config.r).unwrap().basis;
            let mapped = OrthonormalBasis::new(q.matrix() * plain.matrix()).unwrap();
            assert!(subspace_sq_distance(&rot, &mapped).unwrap() < 1e-8);
        }

        let plain = imap_estimate(&data).unwrap();
        let rot = imap_estimate(&rotated).unwrap();
        for k in 0..2 {
            let mapped =
                OrthonormalBasis::new(q.matrix() * plain.bases[k].matrix()).unwrap();
            assert!(subspace_sq_distance(&rot.bases[k], &mapped).unwrap() < 1e-8);
            // Distances to the (rotated) truth are preserved.
            let d1 = subspace_sq_distance(&plain.bases[k], &data.h_true[k]).unwrap();
            let d2 = subspace_sq_distance(&rot.bases[k], &rotated.h_true[k]).unwrap();
            assert!((d1 - d2).abs() < 1e-8);
        }
    }

    #[test]
    fn estimator_tags_round_trip_through_strings() {
        for tag in EstimatorTag::ALL {
            let parsed: EstimatorTag = tag.as_str().parse().unwrap();
            assert_eq!(parsed, tag);
        }
        assert!("pca".parse::<EstimatorTag>().is_err());
    }
}
