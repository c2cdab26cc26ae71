//! Resampled predictive distributions, interval summaries, and CRPS.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{LampError, Result};
use crate::linalg::{cholesky_lower, Design};
use crate::nonlinear::{AugmentedModel, Learner};
use crate::spatial::Site;
use crate::util::{derive_seed, par_map, quantile_sorted, rng_from_seed};

/// `b` draws for each of `n` sites, stored draw-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawMatrix {
    b: usize,
    n: usize,
    data: Vec<f64>,
}

impl DrawMatrix {
    pub fn new(b: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != b * n {
            return Err(LampError::LengthMismatch {
                what: "draw matrix",
                expected: b * n,
                found: data.len(),
            });
        }
        Ok(DrawMatrix { b, n, data })
    }

    pub fn draws(&self) -> usize {
        self.b
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn draw(&self, b: usize) -> &[f64] {
        &self.data[b * self.n..(b + 1) * self.n]
    }

    /// All draws at site `i`.
    pub fn site(&self, i: usize) -> Vec<f64> {
        (0..self.b).map(|b| self.data[b * self.n + i]).collect()
    }
}

/// Variance used when drawing each scale's contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleVariance {
    /// Sampling variance of the aggregated mean. Observation noise enters
    /// once, through the residual bootstrap.
    #[default]
    Estimation,
    /// The gPoE variance `1 / Σ w/σ̂²`, which carries the local observation
    /// variance of every scale.
    Gpoe,
}

impl std::str::FromStr for ScaleVariance {
    type Err = LampError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "estimation" => Ok(ScaleVariance::Estimation),
            "gpoe" => Ok(ScaleVariance::Gpoe),
            other => Err(LampError::InvalidInput(format!(
                "unknown scale variance `{other}` (expected estimation or gpoe)"
            ))),
        }
    }
}

/// Draws `b` predictive replicates at each site with the default scale variance.
pub fn resample_draws<L: Learner + Sync>(
    model: &AugmentedModel<L>,
    sites: &[Site],
    x: &Design,
    xf: &Design,
    b: usize,
    rng: &mut dyn RngCore,
) -> Result<DrawMatrix> {
    resample_draws_with(model, sites, x, xf, b, ScaleVariance::default(), rng)
}

/// Draws `b` predictive replicates at each site.
///
/// Each replicate samples the coefficients from their Gaussian sampling
/// distribution, every scale independently around its aggregated mean
/// (scaled by its adjustment), one bootstrapped residual, and, when the
/// residual learner was accepted, one learner sample.
pub fn resample_draws_with<L: Learner + Sync>(
    model: &AugmentedModel<L>,
    sites: &[Site],
    x: &Design,
    xf: &Design,
    b: usize,
    scale_variance: ScaleVariance,
    rng: &mut dyn RngCore,
) -> Result<DrawMatrix> {
    if b == 0 {
        return Err(LampError::InvalidInput("number of draws must be positive".into()));
    }
    let base = &model.base;
    let pred = base.predict(sites, x)?;
    let n = sites.len();
    let p = base.beta.len();
    let chol = cholesky_lower(&base.beta_cov, p)?;
    let alphas = base.alphas();
    let vars = match scale_variance {
        ScaleVariance::Estimation => &pred.scale_estimation_vars,
        ScaleVariance::Gpoe => &pred.scale_vars,
    };
    let scale_sd: Vec<Vec<f64>> = vars
        .iter()
        .map(|v| v.iter().map(|s| s.max(0.0).sqrt()).collect())
        .collect();
    let learner = model.active_learner();
    let features = match learner {
        Some(_) => Some(model.feature_spec.build(xf, sites)?),
        None => None,
    };
    let residuals = &model.residuals;
    if residuals.is_empty() {
        return Err(LampError::InvalidInput("model has no stored residuals".into()));
    }
    let seed = rng.random::<u64>();

    let rows = par_map(b, |k| -> Result<Vec<f64>> {
        let mut rng = rng_from_seed(derive_seed(seed, k as u64));
        let xi: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let beta: Vec<f64> = (0..p)
            .map(|i| base.beta[i] + (0..=i).map(|j| chol[i * p + j] * xi[j]).sum::<f64>())
            .collect();
        let mut out: Vec<f64> = (0..n).map(|i| x.dot_row(i, &beta)).collect();
        for (r, &a) in alphas.iter().enumerate() {
            for i in 0..n {
                let eps: f64 = rng.sample(StandardNormal);
                out[i] += a * (pred.scale_means[r][i] + scale_sd[r][i] * eps);
            }
        }
        for v in out.iter_mut() {
            *v += residuals[rng.random_range(0..residuals.len())];
        }
        if let (Some(l), Some(f)) = (learner, &features) {
            for (v, s) in out.iter_mut().zip(l.sample(f, &mut rng)?) {
                *v += s;
            }
        }
        Ok(out)
    });
    let mut data = Vec::with_capacity(b * n);
    for r in rows {
        data.extend(r?);
    }
    DrawMatrix::new(b, n, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub level: f64,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Per-site mean, SD, and central `level` interval from linearly
/// interpolated empirical quantiles.
pub fn summarize(d: &DrawMatrix, level: f64) -> Result<PredictiveSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(LampError::InvalidInput(format!("level must lie in (0, 1), got {level}")));
    }
    if d.draws() < 2 {
        return Err(LampError::InvalidInput("summaries need at least 2 draws".into()));
    }
    let lo_p = (1.0 - level) / 2.0;
    let hi_p = (1.0 + level) / 2.0;
    let mut s = PredictiveSummary {
        level,
        mean: Vec::with_capacity(d.sites()),
        sd: Vec::with_capacity(d.sites()),
        lower: Vec::with_capacity(d.sites()),
        upper: Vec::with_capacity(d.sites()),
    };
    for i in 0..d.sites() {
        let mut v = d.site(i);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let ss: f64 = v.iter().map(|a| (a - m) * (a - m)).sum();
        v.sort_by(f64::total_cmp);
        s.mean.push(m);
        s.sd.push((ss / (v.len() - 1) as f64).sqrt());
        s.lower.push(quantile_sorted(&v, lo_p));
        s.upper.push(quantile_sorted(&v, hi_p));
    }
    Ok(s)
}

/// CRPS of the empirical distribution of `draws` at the observation `y`:
/// `E|X - y| - E|X - X'| / 2`.
pub fn crps(draws: &[f64], y: f64) -> f64 {
    let m = draws.len();
    assert!(m > 0, "crps needs at least one draw");
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    let mf = m as f64;
    let abs: f64 = v.iter().map(|x| (x - y).abs()).sum::<f64>() / mf;
    // Σ_{i<j} |x_i - x_j| = Σ_k k (m - k) (x_(k) - x_(k-1)) over sorted draws.
    let spread: f64 = v
        .windows(2)
        .enumerate()
        .map(|(k, w)| ((k + 1) as f64 * (mf - (k + 1) as f64)) * (w[1] - w[0]))
        .sum::<f64>()
        / (mf * mf);
    (abs - spread).max(0.0)
}

/// Mean CRPS over sites.
pub fn mean_crps(d: &DrawMatrix, y: &[f64]) -> Result<f64> {
    if y.len() != d.sites() {
        return Err(LampError::LengthMismatch {
            what: "observations",
            expected: d.sites(),
            found: y.len(),
        });
    }
    Ok(y.iter().enumerate().map(|(i, &yi)| crps(&d.site(i), yi)).sum::<f64>() / y.len() as f64)
}

/// Closed-form CRPS of `N(mu, sigma²)` at `y`.
pub fn crps_gaussian(mu: f64, sigma: f64, y: f64) -> f64 {
    if sigma <= 0.0 {
        return (y - mu).abs();
    }
    let z = (y - mu) / sigma;
    let n = Normal::standard();
    sigma * (z * (2.0 * n.cdf(z) - 1.0) + 2.0 * n.pdf(z) - 1.0 / std::f64::consts::PI.sqrt())
}
