//! Observation model and posterior densities: synthetic data generation,
//! SNR bookkeeping, construction of planted close subspaces, and the joint
//! and conditional log-posteriors of the chain of K coupled subspaces.
//!
//! The model observes `X_k = H_k S_k + N_k` for k = 1..K, with the signal
//! coordinates S_k integrated out under a flat prior. The subspaces form a
//! Markov chain: H_1 uniform on the Stiefel manifold, each later H_k Bingham
//! distributed around its predecessor with concentration `kappa_k`. The noise
//! variance is always known, derived from the configured SNR.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bingham::BinghamParams;
use crate::error::{Error, Result};
use crate::stiefel::{qr_positive, OrthonormalBasis};

/// Full description of a simulation scenario.
///
/// Angles are stored in degrees (the unit used for reporting); chain lengths
/// are `n_burn` discarded plus `n_keep` kept Gibbs iterations and `n_imap`
/// alternating MAP iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Ambient dimension M.
    pub m: usize,
    /// Subspace dimension R.
    pub r: usize,
    /// Snapshot count T (columns per observation matrix).
    pub t: usize,
    /// Number of observation sets K.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Signal-to-noise ratio in dB; SNR_linear = R / (M sigma^2).
    pub snr_db: f64,
    /// Chain coupling concentrations, K-1 entries; `kappa[j]` ties subspace
    /// j+1 to subspace j (0-based).
    pub kappa: Vec<f64>,
    /// True principal angles planted between consecutive subspaces, degrees.
    pub true_angles_deg: Vec<f64>,
    /// Discarded Gibbs iterations.
    #[serde(default = "default_n_burn")]
    pub n_burn: usize,
    /// Kept Gibbs iterations feeding the minimum-distance average.
    #[serde(default = "default_n_keep")]
    pub n_keep: usize,
    /// Cap on alternating MAP iterations.
    #[serde(default = "default_n_imap")]
    pub n_imap: usize,
    /// Master seed for all random streams.
    pub seed: u64,
}

fn default_k() -> usize {
    2
}
fn default_n_burn() -> usize {
    10
}
fn default_n_keep() -> usize {
    200
}
fn default_n_imap() -> usize {
    50
}

impl Default for ScenarioConfig {
    /// The reference two-subspace scenario used by the shipped sweep specs:
    /// M=8, R=2, T=6, angles 10 and 25 degrees, kappa=40, SNR 0 dB.
    fn default() -> Self {
        ScenarioConfig {
            m: 8,
            r: 2,
            t: 6,
            k: 2,
            snr_db: 0.0,
            kappa: vec![40.0],
            true_angles_deg: vec![10.0, 25.0],
            n_burn: 10,
            n_keep: 200,
            n_imap: 50,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::field("m", "ambient dimension must be positive"));
        }
        if self.r == 0 || self.r > self.m {
            return Err(Error::field(
                "r",
                format!("subspace dimension must satisfy 1 <= r <= m={}", self.m),
            ));
        }
        if self.t == 0 {
            return Err(Error::field("t", "snapshot count must be positive"));
        }
        if self.k < 2 {
            return Err(Error::field("k", "need at least two observation sets"));
        }
        if self.kappa.len() != self.k - 1 {
            return Err(Error::field(
                "kappa",
                format!("expected k-1 = {} entries, got {}", self.k - 1, self.kappa.len()),
            ));
        }
        if self.kappa.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::field("kappa", "entries must be finite and >= 0"));
        }
        if self.true_angles_deg.len() != self.r {
            return Err(Error::field(
                "true_angles_deg",
                format!("expected r = {} entries, got {}", self.r, self.true_angles_deg.len()),
            ));
        }
        if self
            .true_angles_deg
            .iter()
            .any(|&a| !a.is_finite() || !(0.0..=90.0).contains(&a))
        {
            return Err(Error::field(
                "true_angles_deg",
                "angles must lie in [0, 90] degrees",
            ));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::field("snr_db", "must be finite"));
        }
        if self.n_keep == 0 {
            return Err(Error::field("n_keep", "must be positive"));
        }
        if self.n_imap == 0 {
            return Err(Error::field("n_imap", "must be positive"));
        }
        Ok(())
    }

    /// Per-entry noise variance implied by the configured SNR.
    pub fn sigma2(&self) -> f64 {
        sigma2_from_snr(self.snr_db, self.m, self.r)
    }
}

/// Noise variance from the SNR definition `SNR = R / (M sigma^2)`:
/// `sigma^2 = R / (M 10^{snr_db/10})`.
pub fn sigma2_from_snr(snr_db: f64, m: usize, r: usize) -> f64 {
    r as f64 / (m as f64 * 10f64.powf(snr_db / 10.0))
}

/// Observed matrices together with the ground truth that generated them.
#[derive(Clone, Debug)]
pub struct DataSet {
    /// K observation matrices, each M x T.
    pub x: Vec<DMatrix<f64>>,
    /// The true bases used for generation.
    pub h_true: Vec<OrthonormalBasis>,
    /// Per-entry noise variance.
    pub sigma2: f64,
    pub config: ScenarioConfig,
}

impl DataSet {
    pub fn new(
        x: Vec<DMatrix<f64>>,
        h_true: Vec<OrthonormalBasis>,
        sigma2: f64,
        config: ScenarioConfig,
    ) -> Result<Self> {
        config.validate()?;
        if x.len() != config.k || h_true.len() != config.k {
            return Err(Error::DimensionMismatch(format!(
                "expected {} observation matrices and true bases, got {} and {}",
                config.k,
                x.len(),
                h_true.len()
            )));
        }
        for (i, xk) in x.iter().enumerate() {
            if xk.nrows() != config.m || xk.ncols() != config.t {
                return Err(Error::DimensionMismatch(format!(
                    "X_{} is {}x{}, expected {}x{}",
                    i + 1,
                    xk.nrows(),
                    xk.ncols(),
                    config.m,
                    config.t
                )));
            }
        }
        for (i, hk) in h_true.iter().enumerate() {
            if hk.m() != config.m || hk.r() != config.r {
                return Err(Error::DimensionMismatch(format!(
                    "true basis {} is {}x{}, expected {}x{}",
                    i + 1,
                    hk.m(),
                    hk.r(),
                    config.m,
                    config.r
                )));
            }
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument("sigma2 must be positive".into()));
        }
        Ok(DataSet {
            x,
            h_true,
            sigma2,
            config,
        })
    }

    pub fn k(&self) -> usize {
        self.config.k
    }
}

/// Builds a basis whose principal angles to `h1` are exactly the requested
/// values: column j of `h1` is rotated by `angles_rad[j]` into a random
/// direction of the orthogonal complement of `span(h1)`.
///
/// Requires `M >= 2R` whenever any angle is nonzero, so that the complement
/// can host R independent rotation directions.
pub fn make_close_basis<RNG: Rng + ?Sized>(
    h1: &OrthonormalBasis,
    angles_rad: &[f64],
    rng: &mut RNG,
) -> Result<OrthonormalBasis> {
    let (m, r) = (h1.m(), h1.r());
    if angles_rad.len() != r {
        return Err(Error::DimensionMismatch(format!(
            "expected {} angles, got {}",
            r,
            angles_rad.len()
        )));
    }
    const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
    if angles_rad
        .iter()
        .any(|&a| !a.is_finite() || !(0.0..=HALF_PI + 1e-12).contains(&a))
    {
        return Err(Error::InvalidArgument(
            "angles must lie in [0, pi/2] radians".into(),
        ));
    }
    let any_nonzero = angles_rad.iter().any(|&a| a > 0.0);
    if !any_nonzero {
        return Ok(h1.clone());
    }
    if m < 2 * r {
        return Err(Error::InvalidArgument(format!(
            "planting nonzero angles needs M >= 2R, got M={m}, R={r}"
        )));
    }

    // Random orthonormal directions inside the complement of span(h1).
    let g = DMatrix::from_fn(m, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let proj_out = DMatrix::identity(m, m) - h1.projector();
    let w = qr_positive(proj_out * g);

    let mut h2 = DMatrix::zeros(m, r);
    for j in 0..r {
        let (s, c) = angles_rad[j].sin_cos();
        let col = h1.matrix().column(j) * c + w.column(j) * s;
        h2.set_column(j, &col);
    }
    OrthonormalBasis::new(h2)
}

/// Generates `X_k = H_k S_k + N_k` with `S_k` i.i.d. standard normal R x T
/// and `N_k` i.i.d. normal with the variance implied by the configured SNR.
/// Deterministic given the random stream.
pub fn generate_data<RNG: Rng + ?Sized>(
    config: &ScenarioConfig,
    h_true: &[OrthonormalBasis],
    rng: &mut RNG,
) -> Result<DataSet> {
    config.validate()?;
    if h_true.len() != config.k {
        return Err(Error::DimensionMismatch(format!(
            "expected {} true bases, got {}",
            config.k,
            h_true.len()
        )));
    }
    let sigma2 = config.sigma2();
    let sigma = sigma2.sqrt();
    let (m, r, t) = (config.m, config.r, config.t);
    let mut x = Vec::with_capacity(config.k);
    for hk in h_true {
        if hk.m() != m || hk.r() != r {
            return Err(Error::DimensionMismatch(format!(
                "true basis is {}x{}, expected {}x{}",
                hk.m(),
                hk.r(),
                m,
                r
            )));
        }
        // Explicit fill order keeps the stream layout stable.
        let mut s = DMatrix::zeros(r, t);
        for j in 0..t {
            for i in 0..r {
                s[(i, j)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        let mut xk = hk.matrix() * s;
        for j in 0..t {
            for i in 0..m {
                xk[(i, j)] += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
        x.push(xk);
    }
    DataSet::new(x, h_true.to_vec(), sigma2, config.clone())
}

fn check_bases_against(data: &DataSet, bases: &[OrthonormalBasis]) -> Result<()> {
    if bases.len() != data.k() {
        return Err(Error::DimensionMismatch(format!(
            "expected {} bases, got {}",
            data.k(),
            bases.len()
        )));
    }
    for b in bases {
        if b.m() != data.config.m || b.r() != data.config.r {
            return Err(Error::DimensionMismatch(format!(
                "basis is {}x{}, expected {}x{}",
                b.m(),
                b.r(),
                data.config.m,
                data.config.r
            )));
        }
    }
    Ok(())
}

/// Log of the joint posterior density, up to an additive constant:
/// `sum_k ||X_k^T H_k||_F^2 / (2 sigma^2) + sum_j kappa_j ||H_j^T H_{j+1}||_F^2`.
pub fn log_joint_posterior(bases: &[OrthonormalBasis], data: &DataSet) -> Result<f64> {
    check_bases_against(data, bases)?;
    let inv2s2 = 1.0 / (2.0 * data.sigma2);
    let mut acc = 0.0;
    for (xk, hk) in data.x.iter().zip(bases) {
        acc += inv2s2 * (xk.transpose() * hk.matrix()).norm_squared();
    }
    for (j, kappa) in data.config.kappa.iter().enumerate() {
        acc += kappa * (bases[j].matrix().transpose() * bases[j + 1].matrix()).norm_squared();
    }
    Ok(acc)
}

/// Parameter matrix of the Bingham full conditional of subspace `k` given
/// its chain neighbors:
/// `A = X_k X_k^T / (2 sigma^2) + kappa_k H_{k-1} H_{k-1}^T + kappa_{k+1} H_{k+1} H_{k+1}^T`
/// with the neighbor terms present only where the chain has them.
///
/// `neighbors` lists the chain-adjacent bases in index order: one entry for
/// an endpoint (k = 0 or k = K-1), two (left then right) otherwise.
pub fn conditional_bingham_params(
    data: &DataSet,
    k: usize,
    neighbors: &[OrthonormalBasis],
) -> Result<BinghamParams> {
    let kk = data.k();
    if k >= kk {
        return Err(Error::InvalidArgument(format!(
            "subspace index {k} out of range for K={kk}"
        )));
    }
    let expected = if k == 0 || k == kk - 1 { 1 } else { 2 };
    if neighbors.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "subspace {k} of a {kk}-chain has {expected} neighbors, got {}",
            neighbors.len()
        )));
    }
    for nb in neighbors {
        if nb.m() != data.config.m || nb.r() != data.config.r {
            return Err(Error::DimensionMismatch(format!(
                "neighbor basis is {}x{}, expected {}x{}",
                nb.m(),
                nb.r(),
                data.config.m,
                data.config.r
            )));
        }
    }

    let xk = &data.x[k];
    let mut a = xk * xk.transpose() / (2.0 * data.sigma2);
    let mut idx = 0;
    if k > 0 {
        a += neighbors[idx].projector() * data.config.kappa[k - 1];
        idx += 1;
    }
    if k + 1 < kk {
        a += neighbors[idx].projector() * data.config.kappa[k];
    }
    BinghamParams::new(a)
}

/// The regularized maximum-likelihood criterion for two subspaces: summed
/// squared residuals of projecting each observation onto its subspace plus
/// `mu` times the squared Frobenius distance between the two projectors.
/// Up to an additive constant this equals the negated joint log-posterior
/// with `kappa = 2 mu`; tested as an identity, not used as an estimator.
pub fn regularized_mle_criterion(
    bases: &[OrthonormalBasis],
    data: &DataSet,
    mu: f64,
) -> Result<f64> {
    if data.k() != 2 {
        return Err(Error::InvalidArgument(
            "the regularized criterion is defined for K = 2".into(),
        ));
    }
    check_bases_against(data, bases)?;
    let inv2s2 = 1.0 / (2.0 * data.sigma2);
    let mut acc = 0.0;
    for (xk, hk) in data.x.iter().zip(bases) {
        let resid = xk - hk.projector() * xk;
        acc += inv2s2 * resid.norm_squared();
    }
    acc += mu * (bases[0].projector() - bases[1].projector()).norm_squared();
    Ok(acc)
}
