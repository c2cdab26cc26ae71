//! One-dimensional demo computations, free of any JavaScript types.

use lamp_core::local::{fit_local, fit_scale, LocalFitOptions, ScaleOptions};
use lamp_core::util::{mean, rng_from_seed, sample_variance};
use lamp_core::{Design, KernelKind, KernelSpec, LampModel, Result, Site, TrainConfig};
use rand::Rng;
use rand_distr::StandardNormal;

/// Length of the demo interval `[0, SPAN]`.
pub const SPAN: f64 = 10.0;

/// The signal behind [`simulate`]: a slow trend plus a wave of width `wiggle`.
pub fn signal(x: f64, wiggle: f64) -> f64 {
    (0.3 * x).cos() + 1.5 * (x / wiggle).sin()
}

/// Sorted uniform sites on the interval and noisy signal values.
pub fn simulate(n: usize, wiggle: f64, noise_sd: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let mut xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * SPAN).collect();
    xs.sort_by(f64::total_cmp);
    let ys = xs
        .iter()
        .map(|&x| signal(x, wiggle) + noise_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (xs, ys)
}

fn sites(xs: &[f64]) -> Vec<Site> {
    xs.iter().map(|&x| Site::new_1d(x)).collect()
}

/// One local expert and its predictive band.
#[derive(Debug, Clone, PartialEq)]
pub struct Expert {
    pub mu_hat: f64,
    pub mu_tilde: f64,
    pub n_local: usize,
    /// Predictive standard deviation at each grid point.
    pub sd: Vec<f64>,
}

/// Fits the expert centered at `center`, with the data variance as its prior.
pub fn local_expert(xs: &[f64], ys: &[f64], center: f64, bandwidth: f64, grid: &[f64]) -> Result<Expert> {
    let kernel = KernelSpec::new(KernelKind::Gaussian, bandwidth)?;
    let ybar = mean(ys);
    let centered: Vec<f64> = ys.iter().map(|y| y - ybar).collect();
    let tau2 = sample_variance(&centered).max(1e-12);
    let m = fit_local(&centered, &sites(xs), &Site::new_1d(center), &kernel, tau2, &LocalFitOptions::default())?;
    Ok(Expert {
        mu_hat: m.mu_hat + ybar,
        mu_tilde: m.mu_tilde + ybar,
        n_local: m.n_local,
        sd: grid.iter().map(|g| m.predictive_variance((g - center).abs()).sqrt()).collect(),
    })
}

/// A fitted curve on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Expert centers of the single scale, or of the finest accepted scale.
    pub centers: Vec<f64>,
    /// Bandwidth of each accepted scale.
    pub bandwidths: Vec<f64>,
}

/// The aggregate of all experts at one bandwidth.
pub fn single_scale(xs: &[f64], ys: &[f64], bandwidth: f64, grid: &[f64], seed: u64) -> Result<Curve> {
    let kernel = KernelSpec::new(KernelKind::Gaussian, bandwidth)?;
    let ybar = mean(ys);
    let centered: Vec<f64> = ys.iter().map(|y| y - ybar).collect();
    let tau2 = sample_variance(&centered).max(1e-12);
    let mut rng = rng_from_seed(seed);
    let sp = fit_scale(&centered, &sites(xs), 1, &kernel, tau2, &ScaleOptions::default(), &mut rng)?;
    let (mean, sd) = sp.evaluate(&sites(grid)).into_iter().map(|(m, v)| (m + ybar, v.sqrt())).unzip();
    Ok(Curve {
        mean,
        sd,
        centers: sp.centers.sites.iter().map(|s| s.coords()[0]).collect(),
        bandwidths: vec![bandwidth],
    })
}

/// The intercept-only multiscale fit. `sd` is the sampling spread of the
/// spatial part.
pub fn multiscale(xs: &[f64], ys: &[f64], grid: &[f64], delta: f64, seed: u64) -> Result<Curve> {
    let config = TrainConfig {
        delta,
        seed,
        ..TrainConfig::default()
    };
    let model = LampModel::fit(ys, &Design::intercept(xs.len()), &sites(xs), &config)?;
    let pred = model.predict(&sites(grid), &Design::intercept(grid.len()))?;
    let alphas = model.alphas();
    let sd = (0..grid.len())
        .map(|i| {
            alphas
                .iter()
                .zip(&pred.scale_estimation_vars)
                .map(|(a, v)| a * a * v[i])
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(Curve {
        mean: pred.mean,
        sd,
        centers: model
            .scales
            .last()
            .map(|s| s.centers.sites.iter().map(|c| c.coords()[0]).collect())
            .unwrap_or_default(),
        bandwidths: model.bandwidths(),
    })
}

/// `n` evenly spaced points covering the interval.
pub fn grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![SPAN / 2.0],
        _ => (0..n).map(|i| SPAN * i as f64 / (n - 1) as f64).collect(),
    }
}
