//! Kernel-weighted local intercept models and their generalized
//! product-of-experts aggregation into a single-scale process.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LampError, Result};
use crate::index::GridIndex;
use crate::spatial::{
    bounding_diagonal, center_count_with_factor, common_dim, distinct_count, place_centers,
    CenterSet, KernelSpec, Site,
};
use crate::util::{par_map, sample_variance};

/// Total precision below which a site counts as uninformed by a scale.
pub const PRECISION_EPS: f64 = 1e-12;
/// Variance ceiling of the "no information" aggregate.
pub const MAX_VARIANCE: f64 = 1e12;
/// Experts with a first-power kernel weight below this are skipped in batch evaluation.
const AGGREGATE_WEIGHT_CUTOFF: f64 = 1e-14;
const EXACT_AGGREGATE_MAX_CENTERS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFitOptions {
    /// Samples with kernel weight at or below this value are ignored.
    pub w_threshold: f64,
    pub sigma2_floor: f64,
}

impl Default for LocalFitOptions {
    fn default() -> Self {
        LocalFitOptions {
            w_threshold: 0.05,
            sigma2_floor: 1e-8,
        }
    }
}

/// One penalized intercept model fitted around a kernel center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub center: Site,
    pub mu_hat: f64,
    /// Unpenalized weighted mean `Σw²y / Σw²`.
    pub mu_tilde: f64,
    pub sigma2_hat: f64,
    pub tau2: f64,
    pub kernel: KernelSpec,
    pub n_local: usize,
    /// `Σw² + σ̂²/τ²` over the local window.
    pub precision_denom: f64,
}

impl LocalModel {
    pub fn predictive_variance(&self, d: f64) -> f64 {
        local_predictive_variance(self, d)
    }
}

fn fit_local_indices(
    values: &[f64],
    sites: &[Site],
    center: &Site,
    kernel: &KernelSpec,
    tau2: f64,
    opts: &LocalFitOptions,
    candidates: impl Iterator<Item = usize>,
) -> Result<LocalModel> {
    let c = center.xy();
    let mut window: Vec<(f64, f64)> = Vec::new();
    for i in candidates {
        let p = sites[i].xy();
        let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
        let w = kernel.weight(d);
        if w > opts.w_threshold {
            window.push((w * w, values[i]));
        }
    }
    if window.is_empty() {
        return Err(LampError::EmptyKernelWindow {
            threshold: opts.w_threshold,
        });
    }
    let n_local = window.len();
    let sum_w2: f64 = window.iter().map(|(w2, _)| w2).sum();
    let sum_w2y: f64 = window.iter().map(|(w2, y)| w2 * y).sum();

    // Pass 1: unpenalized weighted mean, then the weighted residual variance.
    let mu_tilde = sum_w2y / sum_w2;
    let sigma2_hat = if n_local > 1 {
        let ss: f64 = window
            .iter()
            .map(|(w2, y)| w2 * (y - mu_tilde) * (y - mu_tilde))
            .sum();
        (ss / (n_local - 1) as f64).max(opts.sigma2_floor)
    } else {
        opts.sigma2_floor
    };

    // Pass 2: the penalized (shrunk toward zero) mean.
    let precision_denom = sum_w2 + sigma2_hat / tau2;
    Ok(LocalModel {
        center: *center,
        mu_hat: sum_w2y / precision_denom,
        mu_tilde,
        sigma2_hat,
        tau2,
        kernel: *kernel,
        n_local,
        precision_denom,
    })
}

/// Fits the local model centered at `center` from all samples whose kernel
/// weight exceeds the threshold.
pub fn fit_local(
    values: &[f64],
    sites: &[Site],
    center: &Site,
    kernel: &KernelSpec,
    tau2: f64,
    opts: &LocalFitOptions,
) -> Result<LocalModel> {
    if values.len() != sites.len() {
        return Err(LampError::LengthMismatch {
            what: "values",
            expected: sites.len(),
            found: values.len(),
        });
    }
    if !(tau2 > 0.0) {
        return Err(LampError::InvalidInput(format!(
            "prior variance must be positive, got {tau2}"
        )));
    }
    fit_local_indices(values, sites, center, kernel, tau2, opts, 0..sites.len())
}

/// Predictive variance of a local model at distance `d` from its center:
/// the estimation variance plus `σ̂²/w(d)²`.
pub fn local_predictive_variance(m: &LocalModel, d: f64) -> f64 {
    let w = m.kernel.weight(d);
    m.sigma2_hat / m.precision_denom + m.sigma2_hat / (w * w)
}

/// Aggregate of the local models at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleProcess {
    pub resolution: usize,
    pub kernel: KernelSpec,
    pub centers: CenterSet,
    pub locals: Vec<LocalModel>,
    /// Multiplicative adjustment applied to this scale's mean.
    pub alpha: f64,
}

/// Aggregated moments of one scale at one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleMoments {
    /// gPoE mean.
    pub mean: f64,
    /// gPoE variance `1 / Σ w/σ̂²`.
    pub variance: f64,
    /// Sampling variance of the mean: the square of the precision-weighted
    /// average of the experts' standard errors `sqrt(σ̂² / (Σw² + σ̂²/τ²))`.
    pub estimation_variance: f64,
}

fn no_information(locals: &[LocalModel]) -> ScaleMoments {
    let worst = locals
        .iter()
        .map(|m| m.sigma2_hat / PRECISION_EPS)
        .fold(0.0, f64::max)
        .min(MAX_VARIANCE);
    ScaleMoments {
        mean: 0.0,
        variance: worst,
        estimation_variance: worst,
    }
}

fn combine<'a>(s: [f64; 2], experts: impl Iterator<Item = &'a LocalModel>, all: &[LocalModel]) -> ScaleMoments {
    let mut precision = 0.0;
    let mut weighted = 0.0;
    let mut weighted_se = 0.0;
    for m in experts {
        let c = m.center.xy();
        let d = ((s[0] - c[0]).powi(2) + (s[1] - c[1]).powi(2)).sqrt();
        let p = m.kernel.weight(d) / m.sigma2_hat;
        precision += p;
        weighted += p * m.mu_hat;
        weighted_se += p * (m.sigma2_hat / m.precision_denom).sqrt();
    }
    if precision < PRECISION_EPS {
        return no_information(all);
    }
    let var = 1.0 / precision;
    let se = var * weighted_se;
    ScaleMoments {
        mean: var * weighted,
        variance: var,
        estimation_variance: se * se,
    }
}

/// Generalized product-of-experts mean and variance of a scale at `s`,
/// using first-power kernel weights over every local model.
pub fn aggregate_gpoe(sp: &ScaleProcess, s: &Site) -> (f64, f64) {
    let m = combine(s.xy(), sp.locals.iter(), &sp.locals);
    (m.mean, m.variance)
}

impl ScaleProcess {
    pub fn bandwidth(&self) -> f64 {
        self.kernel.bandwidth
    }

    pub fn evaluate_at(&self, s: &Site) -> (f64, f64) {
        aggregate_gpoe(self, s)
    }

    /// Aggregated mean and variance at many sites.
    pub fn evaluate(&self, sites: &[Site]) -> Vec<(f64, f64)> {
        self.moments(sites).into_iter().map(|m| (m.mean, m.variance)).collect()
    }

    /// All aggregated moments at many sites. Experts whose weight is below
    /// 1e-14 are skipped when the scale has many centers.
    pub fn moments(&self, sites: &[Site]) -> Vec<ScaleMoments> {
        if self.locals.len() <= EXACT_AGGREGATE_MAX_CENTERS {
            return par_map(sites.len(), |i| combine(sites[i].xy(), self.locals.iter(), &self.locals));
        }
        let radius = self.kernel.radius_for_weight(AGGREGATE_WEIGHT_CUTOFF);
        let centers: Vec<[f64; 2]> = self.locals.iter().map(|m| m.center.xy()).collect();
        let grid = GridIndex::new(centers, radius.max(f64::MIN_POSITIVE));
        par_map(sites.len(), |i| {
            let q = sites[i].xy();
            let mut near = Vec::new();
            grid.within(q, radius, &mut near);
            near.sort_unstable();
            combine(q, near.iter().map(|&j| &self.locals[j]), &self.locals)
        })
    }

    pub fn mu_hats(&self) -> Vec<f64> {
        self.locals.iter().map(|m| m.mu_hat).collect()
    }

    pub fn mu_tildes(&self) -> Vec<f64> {
        self.locals.iter().map(|m| m.mu_tilde).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleOptions {
    pub w_threshold: f64,
    /// Coverage multiplier in the center-count rule.
    pub c_factor: f64,
}

impl Default for ScaleOptions {
    fn default() -> Self {
        ScaleOptions {
            w_threshold: 0.05,
            c_factor: 1.5,
        }
    }
}

/// Places centers for bandwidth `kernel.bandwidth` and fits one local model
/// per center to `residuals`. Centers with empty windows are dropped.
pub fn fit_scale<R: Rng + ?Sized>(
    residuals: &[f64],
    sites: &[Site],
    resolution: usize,
    kernel: &KernelSpec,
    tau2: f64,
    opts: &ScaleOptions,
    rng: &mut R,
) -> Result<ScaleProcess> {
    if residuals.len() != sites.len() {
        return Err(LampError::LengthMismatch {
            what: "residuals",
            expected: sites.len(),
            found: residuals.len(),
        });
    }
    let dim = common_dim(sites)?;
    let var = sample_variance(residuals);
    let local_opts = LocalFitOptions {
        w_threshold: opts.w_threshold,
        sigma2_floor: 1e-8 * if var > 0.0 { var } else { 1.0 },
    };

    let span = bounding_diagonal(sites)?;
    let points: Vec<[f64; 2]> = sites.iter().map(Site::xy).collect();
    let count = center_count_with_factor(span, kernel.bandwidth, dim, opts.c_factor)
        .min(distinct_count(&points));
    let centers = place_centers(sites, count, rng)?;

    let radius = kernel.radius_for_weight(opts.w_threshold) * (1.0 + 1e-9) + 1e-12;
    let grid = GridIndex::new(points, radius);
    let fits = par_map(centers.count(), |j| {
        let center = centers.sites[j];
        let mut near = Vec::new();
        grid.within(center.xy(), radius, &mut near);
        near.sort_unstable();
        fit_local_indices(
            residuals,
            sites,
            &center,
            kernel,
            tau2,
            &local_opts,
            near.into_iter(),
        )
    });

    let mut kept = CenterSet {
        indices: Vec::new(),
        sites: Vec::new(),
    };
    let mut locals = Vec::new();
    for (j, fit) in fits.into_iter().enumerate() {
        match fit {
            Ok(m) => {
                kept.indices.push(centers.indices[j]);
                kept.sites.push(centers.sites[j]);
                locals.push(m);
            }
            Err(LampError::EmptyKernelWindow { .. }) => {
                warn!(
                    "dropping kernel center {} at resolution {resolution}: empty window",
                    centers.indices[j]
                );
            }
            Err(e) => return Err(e),
        }
    }
    if locals.is_empty() {
        return Err(LampError::BandwidthTooSmall {
            bandwidth: kernel.bandwidth,
        });
    }
    Ok(ScaleProcess {
        resolution,
        kernel: *kernel,
        centers: kept,
        locals,
        alpha: 1.0,
    })
}
