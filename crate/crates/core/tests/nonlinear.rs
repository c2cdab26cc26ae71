mod common;

use lamp_core::nonlinear::{ale_from_fn, default_coord_names};
use lamp_core::synth::gen_with_seeds;
use lamp_core::{
    ale, augment, fit_nonlinear, forest_fit, Design, FeatureSpec, ForestConfig, LampError, LampModel, Learner,
    RandomForestLearner, Result, TrainConfig, TruthKind,
};
use proptest::prelude::*;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

fn column(name: &str, v: Vec<f64>) -> Design {
    Design::from_columns(vec![name.to_string()], &[v]).unwrap()
}

/// Predicts a fixed constant regardless of its inputs.
struct ConstantLearner(f64);

impl Learner for ConstantLearner {
    fn fit(&mut self, _: &Design, _: &[f64], _: &mut dyn RngCore) -> Result<()> {
        Ok(())
    }
    fn predict(&self, f: &Design) -> Result<Vec<f64>> {
        Ok(vec![self.0; f.nrows()])
    }
    fn sample(&self, f: &Design, _: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.predict(f)
    }
}

/// Reads its prediction straight from the `signal` feature column.
struct OracleLearner;

impl Learner for OracleLearner {
    fn fit(&mut self, _: &Design, _: &[f64], _: &mut dyn RngCore) -> Result<()> {
        Ok(())
    }
    fn predict(&self, f: &Design) -> Result<Vec<f64>> {
        Ok(f.column(f.column_index("signal").unwrap()))
    }
    fn sample(&self, f: &Design, _: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.predict(f)
    }
}

/// RMSE between the curve and `truth` at the bin centers inside the 2.5-97.5%
/// range, after removing the mean difference over those bins.
fn interior_rmse(c: &lamp_core::AleCurve, truth: impl Fn(f64) -> f64) -> f64 {
    let diffs: Vec<f64> = (0..c.values.len())
        .filter(|&k| c.inside_95pct(k))
        .map(|k| c.values[k] - truth(c.bin_centers[k]))
        .collect();
    let m = lamp_core::util::mean(&diffs);
    (diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt()
}

fn spec(covariates: &[&str], coords: bool) -> FeatureSpec {
    FeatureSpec {
        covariates: covariates.iter().map(|s| s.to_string()).collect(),
        coord_names: default_coord_names(2),
        append_coords: coords,
    }
}

#[test]
fn single_tree_matches_exhaustive_stump() {
    for seed in 0..20u64 {
        let mut rng = common::rng(seed);
        let x: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v > 0.5 { 2.0 } else { 0.0 } + 0.3 * rng.random::<f64>()).collect();
        let (t, l, r) = common::best_stump(&x, &y, 10);
        let left = x.iter().filter(|&&v| v <= t).count();
        if !(11..=19).contains(&left) {
            continue;
        }
        let cfg = ForestConfig { n_trees: 1, mtry_grid: vec![1], min_node_grid: vec![10], replace: false, ..Default::default() };
        let f = forest_fit(&column("x", x.clone()), &y, &cfg, &mut rng).unwrap();
        let grid: Vec<f64> = (0..101).map(|k| k as f64 / 100.0).collect();
        let p = f.predict(&column("x", grid.clone())).unwrap();
        for (g, v) in grid.iter().zip(p) {
            let want = if *g <= t { l } else { r };
            assert!((v - want).abs() < 1e-12, "seed {seed} at {g}: {v} vs {want}");
        }
    }
}

#[test]
fn forest_learns_a_step() {
    let mut rng = common::rng(2);
    let x: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
    let cfg = ForestConfig { n_trees: 100, ..Default::default() };
    let f = forest_fit(&column("x", x.clone()), &y, &cfg, &mut rng).unwrap();
    assert!(f.oob_mse.sqrt() < 0.1, "oob rmse {}", f.oob_mse.sqrt());
    assert_eq!(f.grid.len(), 2);
    assert!(f.grid.iter().all(|g| g.oob_mse >= f.oob_mse));
    let (t, l, r) = common::best_stump(&x, &y, 1);
    assert_eq!((l, r), (0.0, 1.0));
    let p = f.predict(&column("x", vec![t - 0.05, t + 0.05])).unwrap();
    assert_eq!(p, vec![0.0, 1.0]);
}

#[test]
fn forest_is_reproducible() {
    let mut rng = common::rng(4);
    let feats = common::random_design(300, 3, &mut rng).without_intercept();
    let y: Vec<f64> = (0..300).map(|i| feats.row(i)[0].sin() + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
    let cfg = ForestConfig { n_trees: 40, ..Default::default() };
    let fit = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| forest_fit(&feats, &y, &cfg, &mut common::rng(77)).unwrap())
    };
    let a = fit(1);
    assert_eq!(a, fit(3));
    let s1 = a.quantile_sample(&feats, &mut common::rng(1)).unwrap();
    let s2 = a.quantile_sample(&feats, &mut common::rng(1)).unwrap();
    assert_eq!(s1, s2);
}

#[test]
fn quantile_samples_average_to_the_prediction() {
    let mut rng = common::rng(6);
    let feats = common::random_design(400, 2, &mut rng).without_intercept();
    let y: Vec<f64> = (0..400).map(|i| feats.row(i)[0] + rng.sample::<f64, _>(StandardNormal)).collect();
    let cfg = ForestConfig { n_trees: 50, ..Default::default() };
    let f = forest_fit(&feats, &y, &cfg, &mut rng).unwrap();
    let probe = feats.select_rows(&[0, 1, 2, 3, 4]);
    let pred = f.predict(&probe).unwrap();
    let k = 20_000;
    let mut draws = vec![Vec::with_capacity(k); 5];
    for _ in 0..k {
        for (d, v) in draws.iter_mut().zip(f.quantile_sample(&probe, &mut rng).unwrap()) {
            d.push(v);
        }
    }
    for (d, p) in draws.iter().zip(pred) {
        let m = lamp_core::util::mean(d);
        let se = lamp_core::util::sample_sd(d) / (k as f64).sqrt();
        assert!((m - p).abs() < 3.0 * se + 1e-12, "{m} vs {p} (se {se})");
    }
}

#[test]
fn forest_errors() {
    let cfg = ForestConfig::default();
    let mut rng = common::rng(0);
    assert!(forest_fit(&column("x", vec![1.0; 5]), &[0.0; 5], &cfg, &mut rng).is_err());
    assert!(forest_fit(&column("x", vec![1.0; 50]), &[0.0; 49], &cfg, &mut rng).is_err());
    assert!(ForestConfig { n_trees: 0, ..cfg.clone() }.validate().is_err());
    assert!(ForestConfig { mtry_grid: vec![], ..cfg.clone() }.validate().is_err());
    let f = forest_fit(&column("x", (0..50).map(f64::from).collect()), &[1.0; 50], &cfg, &mut rng).unwrap();
    assert_eq!(f.predict(&column("x", vec![3.0])).unwrap(), vec![1.0]);
    let two = Design::from_columns(vec!["a".into(), "b".into()], &[vec![0.0], vec![0.0]]).unwrap();
    assert!(f.predict(&two).is_err());
}

struct Small {
    y: Vec<f64>,
    x: Design,
    xf: Design,
    sites: Vec<lamp_core::Site>,
}

fn small(kind: TruthKind, n: usize, seed: u64) -> Small {
    let d = gen_with_seeds(kind, n, 10, 1.0, seed, seed + 1).unwrap();
    Small {
        y: d.y[d.train_rows()].to_vec(),
        x: d.design(d.train_rows()),
        xf: d.features(d.train_rows()),
        sites: d.sites[d.train_rows()].to_vec(),
    }
}

#[test]
fn trivial_learners_never_degrade() {
    let d = small(TruthKind::Linear, 400, 3);
    let base = LampModel::fit(&d.y, &d.x, &d.sites, &TrainConfig::default()).unwrap();
    for c in [0.0, 5.0, -1e3] {
        let m = augment(base.clone(), &d.y, &d.xf, &d.sites, ConstantLearner(c), spec(&["x1", "x2"], true), &mut common::rng(1)).unwrap();
        assert!(!m.learner_accepted, "constant {c}");
        assert_eq!(m.validation_sse, base.validation_sse);
        assert_eq!(m.residuals, base.residuals);
        assert_eq!(m.predict(&d.sites, &d.x, &d.xf).unwrap(), base.predict(&d.sites, &d.x).unwrap().mean);
    }
}

#[test]
fn helpful_learner_is_accepted() {
    let d = small(TruthKind::Linear, 400, 5);
    let base = LampModel::fit(&d.y, &d.x, &d.sites, &TrainConfig::default()).unwrap();
    let signal: Vec<f64> = base.residuals.iter().map(|r| 0.9 * r).collect();
    let xf = column("signal", signal);
    let m = augment(base.clone(), &d.y, &xf, &d.sites, OracleLearner, spec(&["signal"], false), &mut common::rng(1)).unwrap();
    assert!(m.learner_accepted);
    assert!(m.validation_sse < base.validation_sse);
    assert!((m.validation_sse - 0.01 * base.validation_sse).abs() < 1e-9 * base.validation_sse);
}

#[test]
fn forest_learner_guard_holds() {
    for (kind, seed) in [(TruthKind::Linear, 8u64), (TruthKind::Nonlinear, 9)] {
        let d = small(kind, 600, seed);
        let cfg = TrainConfig { seed, ..TrainConfig::default() };
        let learner = RandomForestLearner::new(ForestConfig { n_trees: 30, ..Default::default() });
        let m = fit_nonlinear(&d.y, &d.x, &d.xf, &d.sites, &cfg, learner, spec(&["x1", "x2"], true), &mut common::rng(seed)).unwrap();
        assert!(m.validation_sse <= m.base.validation_sse);
        assert_eq!(m.learner_accepted, m.active_learner().is_some());
        assert!(m.learner.is_some());
    }
}

#[test]
fn ale_of_linear_model_is_affine_with_its_slope() {
    let d = small(TruthKind::Linear, 500, 11);
    let base = LampModel::fit(&d.y, &d.x, &d.sites, &TrainConfig::default()).unwrap();
    let model = lamp_core::AugmentedModel::<RandomForestLearner>::linear(base, spec(&["x1", "x2"], true));
    let c = ale(&model, &d.sites, &d.x, &d.xf, "x1", 20).unwrap();
    for k in 1..c.values.len() {
        let slope = (c.values[k] - c.values[k - 1]) / (c.bin_centers[k] - c.bin_centers[k - 1]);
        assert!((slope - model.base.beta[1]).abs() < 1e-8, "{slope}");
    }
    let coord = ale(&model, &d.sites, &d.x, &d.xf, "coord1", 10).unwrap();
    assert!(coord.values.iter().any(|v| v.abs() > 1e-6));
    assert!(matches!(ale(&model, &d.sites, &d.x, &d.xf, "nope", 10), Err(LampError::UnknownFeature(_))));
}

#[test]
fn ale_of_unused_feature_is_zero() {
    let d = small(TruthKind::Linear, 300, 12);
    let x = d.x.select_rows(&(0..300).collect::<Vec<_>>());
    let base = LampModel::fit(&d.y, &x, &d.sites, &TrainConfig::default()).unwrap();
    let unused = column("other", (0..300).map(|i| ((i * 7919) % 300) as f64).collect());
    let model = lamp_core::AugmentedModel::<RandomForestLearner>::linear(base, spec(&["other"], false));
    let c = ale(&model, &d.sites, &x, &unused, "other", 15).unwrap();
    assert!(c.values.iter().all(|&v| v == 0.0));
    let flat = column("other", vec![2.0; 300]);
    assert!(ale(&model, &d.sites, &x, &flat, "other", 15).is_err());
}

#[test]
fn ale_recovers_exponential_shape() {
    let mut rng = common::rng(13);
    let x1: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
    let c = ale_from_fn("x1", &x1, 40, |v| Ok(v.iter().map(|a| a.exp()).collect())).unwrap();
    let err = interior_rmse(&c, f64::exp);
    assert!(err < 0.02, "rmse {err}");
}

#[test]
fn ale_of_fitted_nonlinear_model_follows_truth() {
    let d = gen_with_seeds(TruthKind::Nonlinear, 3000, 10, 1.0, 21, 22).unwrap();
    let rows = d.train_rows();
    let (y, x, xf, sites) = (&d.y[rows.clone()], d.design(rows.clone()), d.features(rows.clone()), &d.sites[rows.clone()]);
    let learner = RandomForestLearner::new(ForestConfig { n_trees: 60, ..Default::default() });
    let m = fit_nonlinear(y, &x, &xf, sites, &TrainConfig::default(), learner, spec(&["x1", "x2"], true), &mut common::rng(3)).unwrap();
    assert!(m.learner_accepted);
    let c = ale(&m, sites, &x, &xf, "x1", 20).unwrap();
    let truth = |a: f64| d.beta[1] * a.exp();
    let err = interior_rmse(&c, truth);
    let spread = lamp_core::util::sample_sd(&c.bin_centers.iter().map(|&a| truth(a)).collect::<Vec<_>>());
    eprintln!("ale rmse {err} vs truth sd {spread}");
    assert!(err < 0.35 * spread, "ale rmse {err} vs truth sd {spread}");
}

proptest! {
    #[test]
    fn ale_is_mean_centered(
        values in prop::collection::vec(-50.0f64..50.0, 20..200),
        a in -3.0f64..3.0, b in -3.0f64..3.0, bins in 2usize..30,
    ) {
        prop_assume!(values.iter().any(|&v| v != values[0]));
        let c = ale_from_fn("f", &values, bins, |v| Ok(v.iter().map(|x| a * x.sin() + b * x * x / 50.0).collect())).unwrap();
        let scale = 1.0 + c.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let total: usize = c.counts.iter().sum();
        prop_assert_eq!(total, values.len());
        let centered: f64 = c.values.iter().zip(&c.counts).map(|(v, &n)| v * n as f64).sum::<f64>() / total as f64;
        prop_assert!(centered.abs() < 1e-10 * scale);
    }
}
