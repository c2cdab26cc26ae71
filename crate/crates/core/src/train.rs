//! The linear multiscale model: holdout split, the bandwidth-decay training
//! curriculum, the scale-adjustment fit and prediction.

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LampError, Result};
use crate::linalg::{Design, OlsSolver};
use crate::local::{fit_scale, ScaleOptions, ScaleProcess};
use crate::spatial::{bounding_diagonal, common_dim, KernelKind, KernelSpec, Site};
use crate::util::{rng_from_seed, sample_variance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Fraction of samples used for fitting; the rest score candidate scales.
    pub phi: f64,
    /// Bandwidth decay per resolution.
    pub delta: f64,
    /// Consecutive non-improving resolutions tolerated before stopping.
    pub q_max: usize,
    /// Initial bandwidth; half the bounding diagonal of the sites when unset.
    pub h1: Option<f64>,
    pub w_threshold: f64,
    pub c_factor: f64,
    pub seed: u64,
    pub max_resolutions: usize,
    pub kernel: KernelKind,
    /// Which local means of the last accepted scale set the next prior variance.
    pub tau2_rule: Tau2Rule,
}

/// Source of the prior variance τ² for the next scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tau2Rule {
    /// Sample variance of the unpenalized local means.
    #[default]
    Unpenalized,
    /// Sample variance of the penalized local means. Shrinkage feeds back
    /// into the next prior, which can drive τ² toward zero.
    Penalized,
}

impl std::str::FromStr for Tau2Rule {
    type Err = LampError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unpenalized" => Ok(Tau2Rule::Unpenalized),
            "penalized" => Ok(Tau2Rule::Penalized),
            other => Err(LampError::InvalidInput(format!(
                "unknown tau2 rule `{other}` (expected unpenalized or penalized)"
            ))),
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            phi: 0.75,
            delta: 0.9,
            q_max: 5,
            h1: None,
            w_threshold: 0.05,
            c_factor: 1.5,
            seed: 0,
            max_resolutions: 200,
            kernel: KernelKind::Gaussian,
            tau2_rule: Tau2Rule::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LampError::InvalidInput(m));
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return bad(format!("phi must lie in (0, 1), got {}", self.phi));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.q_max < 1 {
            return bad("q_max must be at least 1".into());
        }
        if let Some(h) = self.h1 {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("h1 must be positive, got {h}"));
            }
        }
        if !(0.0..1.0).contains(&self.w_threshold) {
            return bad(format!("w_threshold must lie in [0, 1), got {}", self.w_threshold));
        }
        if !(self.c_factor > 0.0) {
            return bad(format!("c_factor must be positive, got {}", self.c_factor));
        }
        if self.max_resolutions < 1 {
            return bad("max_resolutions must be at least 1".into());
        }
        Ok(())
    }

    fn scale_options(&self) -> ScaleOptions {
        ScaleOptions {
            w_threshold: self.w_threshold,
            c_factor: self.c_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    pub train_idx: Vec<usize>,
    pub valid_idx: Vec<usize>,
}

/// Uniform random partition into `round(phi * n)` training and the remaining
/// validation indices, both sorted.
pub fn split_holdout<R: Rng + ?Sized>(n: usize, phi: f64, rng: &mut R) -> Result<HoldoutSplit> {
    if n < 4 {
        return Err(LampError::InvalidInput(format!(
            "holdout split needs at least 4 samples, got {n}"
        )));
    }
    if !(phi > 0.0 && phi < 1.0) {
        return Err(LampError::InvalidInput(format!("phi must lie in (0, 1), got {phi}")));
    }
    let n_train = (phi * n as f64).round() as usize;
    if n_train < 1 || n_train > n - 1 {
        return Err(LampError::InvalidInput(format!(
            "phi = {phi} leaves an empty training or validation set for n = {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut train_idx = perm[..n_train].to_vec();
    let mut valid_idx = perm[n_train..].to_vec();
    train_idx.sort_unstable();
    valid_idx.sort_unstable();
    Ok(HoldoutSplit {
        train_idx,
        valid_idx,
    })
}

/// One step of the resolution loop, accepted or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionStep {
    pub bandwidth: f64,
    pub centers: usize,
    pub tau2: f64,
    pub validation_sse: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LampModel {
    pub config: TrainConfig,
    pub dim: usize,
    pub covariate_names: Vec<String>,
    pub beta: Vec<f64>,
    /// Row-major covariance of `beta` from the final least-squares step.
    pub beta_cov: Vec<f64>,
    pub scales: Vec<ScaleProcess>,
    pub theta1: f64,
    pub theta2: f64,
    /// Final residuals `y - ŷ` at every sample (training and validation).
    pub residuals: Vec<f64>,
    pub split: HoldoutSplit,
    /// Validation SSE after each accepted scale.
    pub sse_path: Vec<f64>,
    /// Validation SSE of the model as returned.
    pub validation_sse: f64,
    pub trace: Vec<ResolutionStep>,
    pub hit_max_resolutions: bool,
}

impl LampModel {
    /// Trains with both holdout stages, seeding the random source from `config.seed`.
    pub fn fit(y: &[f64], x: &Design, sites: &[Site], config: &TrainConfig) -> Result<Self> {
        let mut rng = rng_from_seed(config.seed);
        let model = first_hv(y, x, sites, config, &mut rng)?;
        second_hv(model, y, x, sites)
    }

    /// Terminal resolution: number of accepted scales.
    pub fn resolutions(&self) -> usize {
        self.scales.len()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.scales.iter().map(|s| s.alpha).collect()
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.scales.iter().map(|s| s.bandwidth()).collect()
    }

    /// Smallest accepted bandwidth, if any scale was accepted.
    pub fn terminal_bandwidth(&self) -> Option<f64> {
        self.scales.last().map(|s| s.bandwidth())
    }

    pub fn kernel(&self) -> KernelKind {
        self.config.kernel
    }

    pub fn std_errors(&self) -> Vec<f64> {
        let p = self.beta.len();
        (0..p).map(|j| self.beta_cov[j * p + j].max(0.0).sqrt()).collect()
    }

    pub fn predict(&self, sites: &[Site], x: &Design) -> Result<LinearPrediction> {
        predict_linear(self, sites, x)
    }
}

/// Per-row spatial contribution `Σ_r α_r ẑ_r`, summed in resolution order.
pub(crate) fn spatial_sum(per_scale: &[Vec<f64>], alphas: &[f64], n: usize) -> Vec<f64> {
    let mut z = vec![0.0; n];
    for (zr, &a) in per_scale.iter().zip(alphas) {
        for (zi, v) in z.iter_mut().zip(zr) {
            *zi += a * v;
        }
    }
    z
}

fn linear_means(x: &Design, beta: &[f64], zsum: &[f64]) -> Vec<f64> {
    (0..x.nrows()).map(|i| x.dot_row(i, beta) + zsum[i]).collect()
}

fn sse_over(y: &[f64], mean: &[f64], rows: &[usize]) -> f64 {
    rows.iter()
        .map(|&i| {
            let e = y[i] - mean[i];
            e * e
        })
        .sum()
}

fn check_inputs(y: &[f64], x: &Design, sites: &[Site]) -> Result<usize> {
    if y.len() != sites.len() {
        return Err(LampError::LengthMismatch {
            what: "response",
            expected: sites.len(),
            found: y.len(),
        });
    }
    if x.nrows() != sites.len() {
        return Err(LampError::LengthMismatch {
            what: "covariate rows",
            expected: sites.len(),
            found: x.nrows(),
        });
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(LampError::InvalidInput(format!("non-finite response value {v}")));
    }
    common_dim(sites)
}

/// First holdout stage: fits one scale per resolution to the current
/// residuals while decaying the bandwidth, keeping a scale only when it lowers
/// the validation SSE, and stopping after `q_max` consecutive rejections.
/// Returns the model with unit adjustments (`θ₁ = 1`, `θ₂ = 0`).
pub fn first_hv<R: Rng + ?Sized>(
    y: &[f64],
    x: &Design,
    sites: &[Site],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<LampModel> {
    config.validate()?;
    let dim = check_inputs(y, x, sites)?;
    let n = y.len();
    let split = split_holdout(n, config.phi, rng)?;
    let train_sites: Vec<Site> = split.train_idx.iter().map(|&i| sites[i]).collect();
    let solver = OlsSolver::new(x, &split.train_idx)?;

    let mut h = match config.h1 {
        Some(h) => h,
        None => 0.5 * bounding_diagonal(sites)?,
    };
    let opts = config.scale_options();

    let mut zsum = vec![0.0; n];
    let mut scales: Vec<ScaleProcess> = Vec::new();
    let mut sse_path = Vec::new();
    let mut trace = Vec::new();
    let mut sse_best = f64::INFINITY;
    let mut patience = 0usize;
    let mut tau2: Option<f64> = None;
    let mut hit_max = false;

    for attempt in 1.. {
        let target: Vec<f64> = y.iter().zip(&zsum).map(|(a, b)| a - b).collect();
        let beta = solver.coefficients(&target);
        let mean = linear_means(x, &beta, &zsum);
        let resid: Vec<f64> = y.iter().zip(&mean).map(|(a, b)| a - b).collect();
        let train_resid: Vec<f64> = split.train_idx.iter().map(|&i| resid[i]).collect();

        let prior = *tau2.get_or_insert_with(|| sample_variance(&train_resid));
        let prior = prior.max(f64::MIN_POSITIVE);
        let kernel = KernelSpec::new(config.kernel, h)?;
        let mut scale = fit_scale(
            &train_resid,
            &train_sites,
            scales.len() + 1,
            &kernel,
            prior,
            &opts,
            rng,
        )?;
        let zr: Vec<f64> = scale.evaluate(sites).into_iter().map(|(m, _)| m).collect();
        let sse: f64 = split
            .valid_idx
            .iter()
            .map(|&i| {
                let e = resid[i] - zr[i];
                e * e
            })
            .sum();
        let accepted = sse < sse_best;
        trace.push(ResolutionStep {
            bandwidth: h,
            centers: scale.locals.len(),
            tau2: prior,
            validation_sse: sse,
            accepted,
        });

        if accepted {
            for (zi, v) in zsum.iter_mut().zip(&zr) {
                *zi += v;
            }
            let mu = match config.tau2_rule {
                Tau2Rule::Unpenalized => scale.mu_tildes(),
                Tau2Rule::Penalized => scale.mu_hats(),
            };
            let v = sample_variance(&mu);
            if mu.len() >= 2 && v > 0.0 {
                tau2 = Some(v);
            }
            scale.resolution = scales.len() + 1;
            scales.push(scale);
            sse_path.push(sse);
            sse_best = sse;
            patience = 0;
        } else {
            patience += 1;
            if patience >= config.q_max {
                break;
            }
        }
        if attempt >= config.max_resolutions {
            warn!(
                "stopped after {} resolutions without exhausting patience",
                config.max_resolutions
            );
            hit_max = true;
            break;
        }
        h *= config.delta;
    }

    let target: Vec<f64> = y.iter().zip(&zsum).map(|(a, b)| a - b).collect();
    let fit = solver.fit(x, &target);
    let mean = linear_means(x, &fit.beta, &zsum);
    let residuals: Vec<f64> = y.iter().zip(&mean).map(|(a, b)| a - b).collect();
    let validation_sse = sse_over(y, &mean, &split.valid_idx);

    Ok(LampModel {
        config: config.clone(),
        dim,
        covariate_names: x.names().to_vec(),
        beta: fit.beta,
        beta_cov: fit.cov,
        scales,
        theta1: 1.0,
        theta2: 0.0,
        residuals,
        split,
        sse_path,
        validation_sse,
        trace,
        hit_max_resolutions: hit_max,
    })
}

/// Validation SSE of `||a - G α||²`, precomputed as a quadratic form in α.
struct QuadraticSse {
    gram: Vec<f64>,
    cross: Vec<f64>,
    aa: f64,
    r: usize,
}

impl QuadraticSse {
    fn eval(&self, alpha: &[f64]) -> f64 {
        let mut s = self.aa;
        for j in 0..self.r {
            s -= 2.0 * alpha[j] * self.cross[j];
            for k in 0..self.r {
                s += alpha[j] * alpha[k] * self.gram[j * self.r + k];
            }
        }
        s
    }
}

pub(crate) fn alphas_for(theta1: f64, theta2: f64, bandwidths: &[f64]) -> Vec<f64> {
    bandwidths.iter().map(|h| theta1 * (-theta2 * h).exp()).collect()
}

const THETA1_STEPS: usize = 31;
const THETA2_STEPS: usize = 25;

/// Grid of `θ₂` values: zero plus a log-spaced sweep from `1e-3/h_R` to `5/h_R`.
fn theta2_grid(h_terminal: f64) -> Vec<f64> {
    let lo = (1e-3 / h_terminal).ln();
    let hi = (5.0 / h_terminal).ln();
    let mut g = vec![0.0];
    for k in 0..THETA2_STEPS {
        let t = k as f64 / (THETA2_STEPS - 1) as f64;
        g.push((lo + t * (hi - lo)).exp());
    }
    g
}

/// Second holdout stage: chooses `α_r = θ₁ exp(-θ₂ h_r)` to minimize the
/// validation SSE, refitting the coefficients for each candidate. Never
/// returns a model with a larger validation SSE than its input.
pub fn second_hv(model: LampModel, y: &[f64], x: &Design, sites: &[Site]) -> Result<LampModel> {
    check_inputs(y, x, sites)?;
    if model.scales.is_empty() {
        return Ok(model);
    }
    let n = y.len();
    let r = model.scales.len();
    let solver = OlsSolver::new(x, &model.split.train_idx)?;
    let per_scale: Vec<Vec<f64>> = model
        .scales
        .iter()
        .map(|s| s.evaluate(sites).into_iter().map(|(m, _)| m).collect())
        .collect();
    let bandwidths = model.bandwidths();

    // Coefficients are linear in the response, so β(α) = b_y - Σ α_r b_r and
    // the validation residual is a - G α.
    let b_y = solver.coefficients(y);
    let valid = &model.split.valid_idx;
    let a: Vec<f64> = valid.iter().map(|&i| y[i] - x.dot_row(i, &b_y)).collect();
    let g: Vec<Vec<f64>> = per_scale
        .iter()
        .map(|zr| {
            let b_r = solver.coefficients(zr);
            valid.iter().map(|&i| zr[i] - x.dot_row(i, &b_r)).collect()
        })
        .collect();
    let mut gram = vec![0.0; r * r];
    for j in 0..r {
        for k in 0..r {
            gram[j * r + k] = g[j].iter().zip(&g[k]).map(|(u, v)| u * v).sum();
        }
    }
    let quad = QuadraticSse {
        gram,
        cross: g.iter().map(|gj| gj.iter().zip(&a).map(|(u, v)| u * v).sum()).collect(),
        aa: a.iter().map(|v| v * v).sum(),
        r,
    };
    let objective = |t1: f64, t2: f64| quad.eval(&alphas_for(t1, t2, &bandwidths));

    let h_terminal = *bandwidths.last().expect("non-empty scales");
    let mut best = (1.0, 0.0, objective(1.0, 0.0));
    for i in 0..THETA1_STEPS {
        let t1 = 0.05 * i as f64;
        for &t2 in &theta2_grid(h_terminal) {
            let v = objective(t1, t2);
            if v < best.2 {
                best = (t1, t2, v);
            }
        }
    }
    // Refine within the grid's box. Nearly constant scales are collinear with
    // the intercept, and an unbounded search can drift along that ridge.
    let t1_max = 0.05 * (THETA1_STEPS - 1) as f64;
    let t2_max = 5.0 / h_terminal;
    let step2 = if best.1 > 0.0 { 0.5 * best.1 } else { 0.1 / h_terminal };
    let (refined, v) = nelder_mead(
        |p| {
            if (0.0..=t1_max).contains(&p[0]) && (0.0..=t2_max).contains(&p[1]) {
                objective(p[0], p[1])
            } else {
                f64::INFINITY
            }
        },
        [best.0, best.1],
        [0.05, step2],
        400,
    );
    if v < best.2 {
        best = (refined[0], refined[1], v);
    }

    // Confirm on the exact pipeline; keep the unadjusted model unless it improves.
    let alphas = alphas_for(best.0, best.1, &bandwidths);
    let zsum = spatial_sum(&per_scale, &alphas, n);
    let target: Vec<f64> = y.iter().zip(&zsum).map(|(u, v)| u - v).collect();
    let fit = solver.fit(x, &target);
    let mean = linear_means(x, &fit.beta, &zsum);
    let sse = sse_over(y, &mean, valid);
    if !(sse < model.validation_sse) {
        return Ok(model);
    }
    let mut out = model;
    for (s, &a) in out.scales.iter_mut().zip(&alphas) {
        s.alpha = a;
    }
    out.theta1 = best.0;
    out.theta2 = best.1;
    out.beta = fit.beta;
    out.beta_cov = fit.cov;
    out.residuals = y.iter().zip(&mean).map(|(u, v)| u - v).collect();
    out.validation_sse = sse;
    Ok(out)
}

/// Minimal 2-D Nelder-Mead.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(
    f: F,
    start: [f64; 2],
    step: [f64; 2],
    max_iter: usize,
) -> ([f64; 2], f64) {
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut vals = simplex.map(&f);
    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = order.map(|i| simplex[i]);
        vals = order.map(|i| vals[i]);
        if (vals[2] - vals[0]).abs() <= 1e-12 * (1.0 + vals[0].abs()) {
            break;
        }
        let c = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| [c[0] + t * (simplex[2][0] - c[0]), c[1] + t * (simplex[2][1] - c[1])];
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(xe);
            if fe < fr {
                simplex[2] = xe;
                vals[2] = fe;
            } else {
                simplex[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = xr;
            vals[2] = fr;
        } else {
            let xc = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fc = f(xc);
            if fc < vals[2].min(fr) {
                simplex[2] = xc;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = [
                        0.5 * (simplex[0][0] + simplex[k][0]),
                        0.5 * (simplex[0][1] + simplex[k][1]),
                    ];
                    vals[k] = f(simplex[k]);
                }
            }
        }
    }
    let mut best = 0;
    for k in 1..3 {
        if vals[k] < vals[best] {
            best = k;
        }
    }
    (simplex[best], vals[best])
}

/// Point predictions plus each scale's aggregated mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPrediction {
    pub mean: Vec<f64>,
    /// `scale_means[r][i]`: unadjusted mean of scale `r` at site `i`.
    pub scale_means: Vec<Vec<f64>>,
    /// `scale_vars[r][i]`: gPoE variance of scale `r` at site `i`.
    pub scale_vars: Vec<Vec<f64>>,
    /// Sampling variance of each scale's mean (see [`crate::local::ScaleMoments`]).
    pub scale_estimation_vars: Vec<Vec<f64>>,
}

pub(crate) fn check_design(model: &LampModel, x: &Design) -> Result<()> {
    if x.names() != model.covariate_names.as_slice() {
        return Err(LampError::InvalidInput(format!(
            "covariate mismatch: expected [{}], found [{}]",
            model.covariate_names.join(", "),
            x.names().join(", ")
        )));
    }
    Ok(())
}

/// `x'β + Σ_r α_r ẑ_r(s)` at new sites.
pub fn predict_linear(model: &LampModel, sites: &[Site], x: &Design) -> Result<LinearPrediction> {
    check_design(model, x)?;
    if x.nrows() != sites.len() {
        return Err(LampError::LengthMismatch {
            what: "covariate rows",
            expected: sites.len(),
            found: x.nrows(),
        });
    }
    if !sites.is_empty() && common_dim(sites)? != model.dim {
        return Err(LampError::DimensionMismatch {
            expected: model.dim,
            found: sites[0].dim(),
        });
    }
    let mut scale_means = Vec::with_capacity(model.scales.len());
    let mut scale_vars = Vec::with_capacity(model.scales.len());
    let mut scale_estimation_vars = Vec::with_capacity(model.scales.len());
    for s in &model.scales {
        let moments = s.moments(sites);
        scale_means.push(moments.iter().map(|m| m.mean).collect());
        scale_vars.push(moments.iter().map(|m| m.variance).collect());
        scale_estimation_vars.push(moments.iter().map(|m| m.estimation_variance).collect());
    }
    let zsum = spatial_sum(&scale_means, &model.alphas(), sites.len());
    Ok(LinearPrediction {
        mean: linear_means(x, &model.beta, &zsum),
        scale_means,
        scale_vars,
        scale_estimation_vars,
    })
}
