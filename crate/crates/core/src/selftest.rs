//! Runtime invariant suite at tiny dimensions, behind the CLI `selftest`
//! subcommand. Each check is quick (the whole suite runs in a couple of
//! seconds) and exercises one structural property end to end.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bingham::{log_density_unnorm, sample_bingham, BinghamParams};
use crate::model::{
    conditional_bingham_params, generate_data, log_joint_posterior, make_close_basis,
    regularized_mle_criterion, ScenarioConfig,
};
use crate::estimators::imap_estimate;
use crate::stiefel::{principal_angles, principal_subspace, subspace_sq_distance, uniform_stiefel, OrthonormalBasis};

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Report of the whole suite.
#[derive(Clone, Debug)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &'static str, body: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match body() {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn small_dataset(seed: u64) -> crate::model::DataSet {
    let config = ScenarioConfig {
        m: 6,
        r: 2,
        t: 5,
        kappa: vec![20.0],
        true_angles_deg: vec![10.0, 25.0],
        n_burn: 2,
        n_keep: 10,
        n_imap: 30,
        seed,
        ..ScenarioConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h1 = uniform_stiefel(config.m, config.r, &mut rng).unwrap();
    let angles: Vec<f64> = config
        .true_angles_deg
        .iter()
        .map(|a| a.to_radians())
        .collect();
    let h2 = make_close_basis(&h1, &angles, &mut rng).unwrap();
    generate_data(&config, &[h1, h2], &mut rng).unwrap()
}

/// Runs every check and collects the results.
pub fn run_selftest(seed: u64) -> SelftestReport {
    let mut checks = Vec::new();

    checks.push(check("uniform-basis-orthonormality", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let h = uniform_stiefel(5, 2, &mut rng).map_err(|e| e.to_string())?;
            let dev = (h.matrix().transpose() * h.matrix() - DMatrix::<f64>::identity(2, 2)).amax();
            worst = worst.max(dev);
        }
        if worst < 1e-10 {
            Ok(format!("max |H^T H - I| = {worst:.2e}"))
        } else {
            Err(format!("orthonormality violated: {worst:.2e}"))
        }
    }));

    checks.push(check("planted-angle-recovery", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let h1 = uniform_stiefel(8, 2, &mut rng).map_err(|e| e.to_string())?;
        let want = [10.0f64.to_radians(), 25.0f64.to_radians()];
        let h2 = make_close_basis(&h1, &want, &mut rng).map_err(|e| e.to_string())?;
        let got = principal_angles(&h1, &h2).map_err(|e| e.to_string())?;
        let err = got
            .radians()
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err < 1e-8 {
            Ok(format!("max angle error {err:.2e} rad"))
        } else {
            Err(format!("angle error {err:.2e} rad"))
        }
    }));

    checks.push(check("distance-equals-sum-sin2", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let u = uniform_stiefel(6, 2, &mut rng).map_err(|e| e.to_string())?;
            let v = uniform_stiefel(6, 2, &mut rng).map_err(|e| e.to_string())?;
            let d = subspace_sq_distance(&u, &v).map_err(|e| e.to_string())?;
            let s: f64 = principal_angles(&u, &v)
                .map_err(|e| e.to_string())?
                .radians()
                .iter()
                .map(|a| a.sin().powi(2))
                .sum();
            worst = worst.max((d - s).abs());
        }
        if worst < 1e-9 {
            Ok(format!("max |distance - sum sin^2| = {worst:.2e}"))
        } else {
            Err(format!("identity violated: {worst:.2e}"))
        }
    }));

    checks.push(check("principal-subspace-shift-invariance", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let g = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = (&g + g.transpose()) * 0.5;
        let shifted = &a + DMatrix::identity(5, 5) * 3.25;
        let p1 = principal_subspace(&a, 2).map_err(|e| e.to_string())?;
        let p2 = principal_subspace(&shifted, 2).map_err(|e| e.to_string())?;
        let d = subspace_sq_distance(&p1, &p2).map_err(|e| e.to_string())?;
        if d < 1e-8 {
            Ok(format!("distance {d:.2e}"))
        } else {
            Err(format!("shift moved the subspace by {d:.2e}"))
        }
    }));

    checks.push(check("bingham-kernel-right-invariance", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let g = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let p = BinghamParams::new((&g + g.transpose()) * 0.5).map_err(|e| e.to_string())?;
        let h = uniform_stiefel(6, 3, &mut rng).map_err(|e| e.to_string())?;
        let q = uniform_stiefel(3, 3, &mut rng).map_err(|e| e.to_string())?;
        let hq = OrthonormalBasis::new(h.matrix() * q.matrix()).map_err(|e| e.to_string())?;
        let a = log_density_unnorm(&h, &p).map_err(|e| e.to_string())?;
        let b = log_density_unnorm(&hq, &p).map_err(|e| e.to_string())?;
        if (a - b).abs() < 1e-9 {
            Ok(format!("|delta| = {:.2e}", (a - b).abs()))
        } else {
            Err(format!("kernel changed by {:.2e}", (a - b).abs()))
        }
    }));

    checks.push(check("conditional-matches-joint-ratios", || {
        let data = small_dataset(seed ^ 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 6);
        let other = uniform_stiefel(6, 2, &mut rng).map_err(|e| e.to_string())?;
        let params =
            conditional_bingham_params(&data, 0, &[other.clone()]).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let u = uniform_stiefel(6, 2, &mut rng).map_err(|e| e.to_string())?;
            let v = uniform_stiefel(6, 2, &mut rng).map_err(|e| e.to_string())?;
            let joint = log_joint_posterior(&[u.clone(), other.clone()], &data)
                .map_err(|e| e.to_string())?
                - log_joint_posterior(&[v.clone(), other.clone()], &data)
                    .map_err(|e| e.to_string())?;
            let cond = log_density_unnorm(&u, &params).map_err(|e| e.to_string())?
                - log_density_unnorm(&v, &params).map_err(|e| e.to_string())?;
            worst = worst.max((joint - cond).abs());
        }
        if worst < 1e-9 {
            Ok(format!("max log-ratio gap {worst:.2e}"))
        } else {
            Err(format!("log-ratio gap {worst:.2e}"))
        }
    }));

    checks.push(check("regularization-posterior-identity", || {
        let data = small_dataset(seed ^ 7);
        let mu = data.config.kappa[0] / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 8);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..20 {
            let b1 = uniform_stiefel(6, 2, &mut rng).map_err(|e| e.to_string())?;
            let b2 = uniform_stiefel(6, 2, &mut rng).map_err(|e| e.to_string())?;
            let bases = [b1, b2];
            let s = log_joint_posterior(&bases, &data).map_err(|e| e.to_string())?
                + regularized_mle_criterion(&bases, &data, mu).map_err(|e| e.to_string())?;
            lo = lo.min(s);
            hi = hi.max(s);
        }
        if hi - lo < 1e-8 {
            Ok(format!("spread {:.2e}", hi - lo))
        } else {
            Err(format!("spread {:.2e}", hi - lo))
        }
    }));

    checks.push(check("imap-monotone-log-posterior", || {
        for s in 0..5u64 {
            let data = small_dataset(seed ^ (100 + s));
            let est = imap_estimate(&data).map_err(|e| e.to_string())?;
            let trace = est.log_posterior_trace.expect("imap records a trace");
            for w in trace.windows(2) {
                if w[1] < w[0] - 1e-9 {
                    return Err(format!("trace dropped from {} to {}", w[0], w[1]));
                }
            }
        }
        Ok("5 scenarios monotone".to_string())
    }));

    checks.push(check("circle-sampler-matches-quadrature", || {
        let ks = circle_sampler_ks_distance(seed ^ 9, 20_000);
        if ks < 0.02 {
            Ok(format!("KS distance {ks:.4}"))
        } else {
            Err(format!("KS distance {ks:.4}"))
        }
    }));

    checks.push(check("uniform-sampler-moment", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 10);
        let p = BinghamParams::new(DMatrix::zeros(3, 3)).map_err(|e| e.to_string())?;
        let mut h = uniform_stiefel(3, 1, &mut rng).map_err(|e| e.to_string())?;
        let n = 20_000;
        let mut mean = DMatrix::<f64>::zeros(3, 3);
        for _ in 0..n {
            h = sample_bingham(&p, 1, &h, 1, &mut rng).map_err(|e| e.to_string())?;
            mean += h.projector();
        }
        mean /= n as f64;
        let dev = (&mean - DMatrix::<f64>::identity(3, 3) / 3.0).amax();
        if dev < 0.03 {
            Ok(format!("max |E[xx^T] - I/3| = {dev:.4}"))
        } else {
            Err(format!("moment deviation {dev:.4}"))
        }
    }));

    SelftestReport { checks }
}

/// Kolmogorov-Smirnov distance between the empirical angle distribution of
/// the circle sampler (M = 2, R = 1, A = diag(a, -a)) and the numeric CDF of
/// the normalized density.
fn circle_sampler_ks_distance(seed: u64, n: usize) -> f64 {
    let a = 2.5;
    let params = BinghamParams::new(DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, -a])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = uniform_stiefel(2, 1, &mut rng).unwrap();
    let mut angles = Vec::with_capacity(n);
    for _ in 0..n {
        h = sample_bingham(&params, 1, &h, 1, &mut rng).unwrap();
        angles.push(h.matrix()[(1, 0)].atan2(h.matrix()[(0, 0)]));
    }
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());

    // Trapezoid CDF of exp(a cos 2 phi) on (-pi, pi].
    let grid = 20_000usize;
    let density = |phi: f64| (a * (2.0 * phi).cos()).exp();
    let step = 2.0 * std::f64::consts::PI / grid as f64;
    let mut cdf = Vec::with_capacity(grid + 1);
    let mut acc = 0.0;
    cdf.push(0.0);
    for i in 0..grid {
        let x0 = -std::f64::consts::PI + i as f64 * step;
        acc += 0.5 * (density(x0) + density(x0 + step)) * step;
        cdf.push(acc);
    }
    let total = acc;
    let cdf_at = |phi: f64| -> f64 {
        let pos = (phi + std::f64::consts::PI) / step;
        let i = (pos.floor() as usize).min(grid - 1);
        let frac = pos - i as f64;
        (cdf[i] * (1.0 - frac) + cdf[i + 1] * frac) / total
    };

    let mut ks = 0.0f64;
    for (i, &phi) in angles.iter().enumerate() {
        let f = cdf_at(phi);
        let emp_hi = (i + 1) as f64 / n as f64;
        let emp_lo = i as f64 / n as f64;
        ks = ks.max((f - emp_hi).abs()).max((f - emp_lo).abs());
    }
    ks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes_on_a_clean_build() {
        let report = run_selftest(0xA11CE);
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert!(report.all_passed());
    }
}
