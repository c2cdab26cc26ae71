mod common;

use lamp_core::local::{LocalFitOptions, ScaleOptions};
use lamp_core::util::sample_variance;
use lamp_core::{
    aggregate_gpoe, bounding_diagonal, fit_local, fit_scale, local_predictive_variance, CenterSet, KernelKind,
    KernelSpec, LocalModel, ScaleProcess, Site,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn expert(center: Site, mu: f64, sigma2: f64, h: f64) -> LocalModel {
    LocalModel {
        center,
        mu_hat: mu,
        mu_tilde: mu,
        sigma2_hat: sigma2,
        tau2: 1.0,
        kernel: KernelSpec::new(KernelKind::Gaussian, h).unwrap(),
        n_local: 10,
        precision_denom: 10.0,
    }
}

fn process(locals: Vec<LocalModel>) -> ScaleProcess {
    ScaleProcess {
        resolution: 1,
        kernel: locals[0].kernel,
        centers: CenterSet {
            indices: (0..locals.len()).collect(),
            sites: locals.iter().map(|m| m.center).collect(),
        },
        locals,
        alpha: 1.0,
    }
}

#[test]
fn local_fit_matches_penalized_least_squares() {
    let opts = LocalFitOptions::default();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = common::rng(seed);
        let n = rng.random_range(5..200);
        let sites = common::random_sites(n, 10.0, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal) + 1.0).collect();
        let h = rng.random_range(0.5..8.0);
        let tau2 = rng.random_range(0.01..10.0);
        let kind = if seed % 2 == 0 { KernelKind::Gaussian } else { KernelKind::Exponential };
        let kernel = KernelSpec::new(kind, h).unwrap();
        let center = sites[0];

        let (mut w, mut yw) = (Vec::new(), Vec::new());
        for (s, &v) in sites.iter().zip(&y) {
            let k = kernel.weight(lamp_core::distance(s, &center).unwrap());
            if k > opts.w_threshold {
                w.push(k);
                yw.push(v);
            }
        }
        let (mu, s2) = common::penalized_intercept(&w, &yw, tau2, opts.sigma2_floor);
        let m = fit_local(&y, &sites, &center, &kernel, tau2, &opts).unwrap();
        assert_eq!(m.n_local, w.len());
        worst = worst.max((m.mu_hat - mu).abs()).max((m.sigma2_hat - s2).abs());
    }
    assert!(worst < 1e-10, "max abs diff {worst:e}");
}

#[test]
fn gpoe_mean_maximizes_weighted_density_product() {
    let mut worst = 0.0f64;
    for seed in 0..30u64 {
        let mut rng = common::rng(100 + seed);
        let h = rng.random_range(0.5..5.0);
        let locals: Vec<LocalModel> = (0..3)
            .map(|_| {
                let c = Site::new_2d(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
                expert(c, rng.random_range(-2.0..2.0), rng.random_range(0.1..3.0), h)
            })
            .collect();
        let sp = process(locals);
        let s = Site::new_2d(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
        let experts: Vec<(f64, f64, f64)> = sp
            .locals
            .iter()
            .map(|m| (m.mu_hat, m.sigma2_hat, m.kernel.weight(lamp_core::distance(&s, &m.center).unwrap())))
            .collect();
        if experts.iter().map(|e| e.2 / e.1).sum::<f64>() < 1e-9 {
            continue;
        }
        let (mean, _) = aggregate_gpoe(&sp, &s);
        let oracle = common::density_product_argmax(&experts, 100_001);
        worst = worst.max((mean - oracle).abs());
    }
    assert!(worst < 1e-4, "max abs diff {worst:e}");
}

#[test]
fn zero_residuals_give_zero_process() {
    let mut rng = common::rng(5);
    let sites = common::random_sites(300, 10.0, &mut rng);
    let kernel = KernelSpec::new(KernelKind::Gaussian, 2.0).unwrap();
    let sp = fit_scale(&vec![0.0; 300], &sites, 1, &kernel, 1.0, &ScaleOptions::default(), &mut rng).unwrap();
    assert!(sp.locals.iter().all(|m| m.mu_hat == 0.0));
    assert!(sp.evaluate(&sites).iter().all(|&(m, _)| m == 0.0));
}

#[test]
fn one_dimensional_scale_tracks_trend() {
    let mut rng = common::rng(8);
    let x: Vec<f64> = (0..3000).map(|_| rng.random_range(0.0..10.0)).collect();
    let sites: Vec<Site> = x.iter().map(|&v| Site::new_1d(v)).collect();
    let trend: Vec<f64> = x.iter().map(|v| 2.0 * (0.6 * v).sin()).collect();
    let y: Vec<f64> = trend.iter().map(|t| t + rng.sample::<f64, _>(StandardNormal)).collect();
    let kernel = KernelSpec::new(KernelKind::Gaussian, 1.16).unwrap();
    let sp = fit_scale(&y, &sites, 1, &kernel, sample_variance(&y), &ScaleOptions::default(), &mut rng).unwrap();
    assert_eq!(sp.locals.len(), 13);
    let z: Vec<f64> = sp.evaluate(&sites).into_iter().map(|(m, _)| m).collect();
    let (mz, mt) = (lamp_core::util::mean(&z), lamp_core::util::mean(&trend));
    let cov: f64 = z.iter().zip(&trend).map(|(a, b)| (a - mz) * (b - mt)).sum();
    let corr = cov / (sample_variance(&z) * sample_variance(&trend)).sqrt() / (z.len() - 1) as f64;
    assert!(corr > 0.9, "correlation {corr}");
}

#[test]
fn scale_fits_equal_standalone_fits() {
    let mut rng = common::rng(21);
    let sites = common::random_sites(50, 10.0, &mut rng);
    let y: Vec<f64> = sites.iter().map(|s| common::smooth_field(s) + rng.random_range(-0.5..0.5)).collect();
    let d = bounding_diagonal(&sites).unwrap();
    let kernel = KernelSpec::new(KernelKind::Gaussian, d * (1.5f64 / 4.0).sqrt()).unwrap();
    let sp = fit_scale(&y, &sites, 1, &kernel, 2.0, &ScaleOptions::default(), &mut rng).unwrap();
    assert_eq!(sp.locals.len(), 4);
    let opts = LocalFitOptions {
        w_threshold: 0.05,
        sigma2_floor: 1e-8 * sample_variance(&y),
    };
    for m in &sp.locals {
        assert_eq!(*m, fit_local(&y, &sites, &m.center, &kernel, 2.0, &opts).unwrap());
    }
}

#[test]
fn aggregate_variance_shrinks_with_bandwidth_on_noise() {
    let mut rng = common::rng(33);
    let sites = common::random_sites(2000, 10.0, &mut rng);
    let y: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
    let d = bounding_diagonal(&sites).unwrap();
    let var_at = |h: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        let k = KernelSpec::new(KernelKind::Gaussian, h).unwrap();
        let sp = fit_scale(&y, &sites, 1, &k, 1.0, &ScaleOptions::default(), rng).unwrap();
        sample_variance(&sp.evaluate(&sites).into_iter().map(|(m, _)| m).collect::<Vec<_>>())
    };
    assert!(var_at(d, &mut rng) <= var_at(d / 100.0, &mut rng));
}

#[test]
fn input_errors() {
    let sites = [Site::new_2d(0.0, 0.0), Site::new_2d(1.0, 1.0)];
    let k = KernelSpec::new(KernelKind::Gaussian, 0.1).unwrap();
    let opts = LocalFitOptions::default();
    assert!(fit_local(&[1.0], &sites, &sites[0], &k, 1.0, &opts).is_err());
    assert!(fit_local(&[1.0, 2.0], &sites, &sites[0], &k, 0.0, &opts).is_err());
    let far = Site::new_2d(50.0, 50.0);
    assert!(fit_local(&[1.0, 2.0], &sites, &far, &k, 1.0, &opts).is_err());
}

proptest! {
    #[test]
    fn gpoe_is_convex_and_sharper_than_each_expert(
        params in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, -5.0f64..5.0, 0.01f64..4.0), 1..8),
        sx in 0.0f64..10.0, sy in 0.0f64..10.0, h in 0.5f64..6.0,
    ) {
        let locals: Vec<LocalModel> = params.iter().map(|&(x, y, mu, s2)| expert(Site::new_2d(x, y), mu, s2, h)).collect();
        let sp = process(locals);
        let s = Site::new_2d(sx, sy);
        let (mean, var) = aggregate_gpoe(&sp, &s);
        let lo = sp.locals.iter().map(|m| m.mu_hat).fold(f64::INFINITY, f64::min);
        let hi = sp.locals.iter().map(|m| m.mu_hat).fold(f64::NEG_INFINITY, f64::max);
        let informed = sp.locals.iter().map(|m| m.kernel.weight(lamp_core::distance(&s, &m.center).unwrap()) / m.sigma2_hat).sum::<f64>() >= 1e-12;
        if informed {
            prop_assert!(mean >= lo - 1e-12 && mean <= hi + 1e-12);
            for m in &sp.locals {
                let w = m.kernel.weight(lamp_core::distance(&s, &m.center).unwrap());
                if w > 0.0 {
                    prop_assert!(var <= m.sigma2_hat / w * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn penalization_shrinks_toward_zero(
        ys in prop::collection::vec(-10.0f64..10.0, 2..40),
        tau2 in 1e-4f64..1e4,
        h in 0.5f64..20.0,
    ) {
        let n = ys.len();
        let sites: Vec<Site> = (0..n).map(|i| Site::new_2d(i as f64 * 0.1, (i % 3) as f64 * 0.1)).collect();
        let k = KernelSpec::new(KernelKind::Gaussian, h).unwrap();
        let opts = LocalFitOptions::default();
        let m = fit_local(&ys, &sites, &sites[0], &k, tau2, &opts).unwrap();
        prop_assert!(m.mu_hat.abs() <= m.mu_tilde.abs());
        if m.mu_tilde != 0.0 {
            prop_assert!(m.mu_hat.abs() < m.mu_tilde.abs());
        }
        prop_assert!(m.sigma2_hat >= opts.sigma2_floor);
        for d in [0.0, 0.3, 1.0, 5.0] {
            let v = local_predictive_variance(&m, d);
            prop_assert!(v > m.sigma2_hat);
        }
    }
}
