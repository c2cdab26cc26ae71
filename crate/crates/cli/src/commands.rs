use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lamp_core::bench::{run_benchmark, BenchModel, BenchSpec, BenchmarkReport};
use lamp_core::linalg::INTERCEPT;
use lamp_core::persist::{load_model, save_model, write_atomic, SavedModel};
use lamp_core::synth::{gen_with_seeds, TruthKind};
use lamp_core::uncertainty::{crps, resample_draws_with, summarize};
use lamp_core::util::{derive_seed, rng_from_seed, sample_sd};
use lamp_core::{ale, fit_nonlinear, Design, FeatureSpec, LampModel, RandomForestLearner, Site};

use crate::config::{parse_names, RunConfig};
use crate::data::{write_columns, write_text, Table, TEST_FLAG};
use crate::error::{CliError, CliResult};
use crate::Command;

pub fn dispatch(cmd: &Command, cfg: &RunConfig) -> CliResult<()> {
    match cmd {
        Command::Fit { data, model, summary } => {
            let path = required(model.as_ref(), cfg.model.as_ref(), "--model")?;
            let text = fit(data, &path, cfg)?;
            print!("{text}");
            if let Some(s) = summary {
                write_text(s, &text)?;
            }
            Ok(())
        }
        Command::Predict { model, data, output, test_only, .. } => {
            let model = required(model.as_ref(), cfg.model.as_ref(), "--model")?;
            let output = required(output.as_ref(), cfg.output.as_ref(), "--output")?;
            predict(&model, data, &output, *test_only, cfg)
        }
        Command::Simulate { kind, n, n_test, h, output, truth } => {
            let truth = truth.clone().unwrap_or_else(|| sibling(output, "truth"));
            simulate(kind, *n, *n_test, *h, output, &truth, cfg)
        }
        Command::Benchmark { kind, n, h, trials, models, n_test, draws, report, summary, resume } => {
            let spec = BenchSpec {
                kind: kind.parse()?,
                ns: parse_list(n, "--n")?,
                hs: parse_list(h, "--h")?,
                trials: *trials,
                models: parse_list(models, "--models")?,
                seed: cfg.train.seed,
                n_test: *n_test,
                train: cfg.train.clone(),
                forest: cfg.forest.clone(),
                draws: *draws,
                level: cfg.level,
            };
            let summary = summary.clone().unwrap_or_else(|| sibling(report, "summary"));
            benchmark(&spec, report, &summary, *resume)
        }
        Command::Ale { model, data, feature, output, include_coords, .. } => {
            let model = required(model.as_ref(), cfg.model.as_ref(), "--model")?;
            let output = required(output.as_ref(), cfg.output.as_ref(), "--output")?;
            ale_curve(&model, data, feature, &output, *include_coords, cfg)
        }
    }
}

fn required(flag: Option<&PathBuf>, config: Option<&PathBuf>, name: &str) -> CliResult<PathBuf> {
    flag.or(config)
        .cloned()
        .ok_or_else(|| CliError::usage(format!("{name} is required (flag or configuration)")))
}

/// `out.csv` -> `out.<tag>.csv`.
fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.csv"))
}

fn parse_list<T: std::str::FromStr>(value: &str, flag: &str) -> CliResult<Vec<T>> {
    let items = parse_names(value);
    if items.is_empty() {
        return Err(CliError::usage(format!("{flag} needs at least one value")));
    }
    items
        .iter()
        .map(|v| v.parse().map_err(|_| CliError::usage(format!("invalid value `{v}` for {flag}"))))
        .collect()
}

/// Columns the model was fitted on, checked against the table.
struct Inputs {
    sites: Vec<Site>,
    x: Design,
    xf: Design,
}

fn model_inputs(model: &SavedModel, table: &Table) -> CliResult<Inputs> {
    let covariates: Vec<String> = model.base.covariate_names.iter().filter(|c| *c != INTERCEPT).cloned().collect();
    let spec = &model.feature_spec;
    let missing: Vec<&String> = spec
        .coord_names
        .iter()
        .chain(&covariates)
        .chain(&spec.covariates)
        .filter(|c| table.index(c).is_none())
        .collect();
    if !missing.is_empty() {
        let missing: Vec<&str> = missing.iter().map(|s| s.as_str()).collect();
        return Err(CliError::data(format!(
            "column mismatch: model needs [{}]; found [{}]",
            missing.join(", "),
            table.headers.join(", ")
        )));
    }
    Ok(Inputs {
        sites: table.sites(&spec.coord_names)?,
        x: table.design(&covariates, true)?,
        xf: table.design(&spec.covariates, false)?,
    })
}

fn training_table(path: &Path) -> CliResult<Table> {
    let table = Table::read(path)?;
    if table.index(TEST_FLAG).is_some() {
        let rows = table.split_rows(false);
        log::info!("using {} of {} rows (non-zero `{TEST_FLAG}` rows held out)", rows.len(), table.nrows());
        Ok(table.select(&rows))
    } else {
        Ok(table)
    }
}

/// Fits and saves a model; returns the summary text.
pub fn fit(data: &Path, model_path: &Path, cfg: &RunConfig) -> CliResult<String> {
    let table = training_table(data)?;
    let covariates = if cfg.covariates.is_empty() {
        table.default_covariates(&cfg.coords, &cfg.target)
    } else {
        cfg.covariates.clone()
    };
    let sites = table.sites(&cfg.coords)?;
    let y = table.column(&cfg.target)?.to_vec();
    let x = table.design(&covariates, true)?;
    let xf = table.design(&covariates, false)?;
    let spec = FeatureSpec {
        covariates: covariates.clone(),
        coord_names: cfg.coords.clone(),
        append_coords: cfg.append_coords,
    };
    let model: SavedModel = if cfg.nonlinear {
        let mut rng = rng_from_seed(derive_seed(cfg.train.seed, 1));
        let learner = RandomForestLearner::new(cfg.forest.clone());
        fit_nonlinear(&y, &x, &xf, &sites, &cfg.train, learner, spec, &mut rng)?
    } else {
        SavedModel::linear(LampModel::fit(&y, &x, &sites, &cfg.train)?, spec)
    };
    save_model(model_path, &model)?;
    log::info!("model written to {}", model_path.display());
    summary(&model, &sites, &x, &y)
}

fn stars(z: f64) -> &'static str {
    match z.abs() {
        a if a >= 3.291 => "***",
        a if a >= 2.576 => "**",
        a if a >= 1.96 => "*",
        _ => "",
    }
}

fn summary(model: &SavedModel, sites: &[Site], x: &Design, y: &[f64]) -> CliResult<String> {
    let base = &model.base;
    let mut s = String::new();
    let _ = writeln!(s, "observations: {}", y.len());
    let _ = writeln!(s, "{:<16} {:>12} {:>12} {:>9}", "coefficient", "estimate", "std.error", "z");
    for ((name, b), se) in base.covariate_names.iter().zip(&base.beta).zip(base.std_errors()) {
        let z = b / se;
        let _ = writeln!(s, "{name:<16} {b:>12.5} {se:>12.5} {z:>9.3} {}", stars(z));
    }
    let _ = writeln!(s, "signif: *** |z|>=3.291  ** |z|>=2.576  * |z|>=1.96");
    let _ = writeln!(s, "resolutions: {}", base.resolutions());
    let bw = base.bandwidths();
    if let (Some(first), Some(last)) = (bw.first(), bw.last()) {
        let _ = writeln!(s, "bandwidths: {first:.4} .. {last:.4}");
    }
    if base.hit_max_resolutions {
        let _ = writeln!(s, "note: stopped at the resolution cap");
    }
    let _ = writeln!(s, "residual sd: {:.5}", sample_sd(&model.residuals));
    let mean = base.predict(sites, x)?.mean;
    let spatial: Vec<f64> = (0..y.len()).map(|i| mean[i] - x.dot_row(i, &base.beta)).collect();
    let _ = writeln!(s, "spatial sd: {:.5}", sample_sd(&spatial));
    let learner = match (&model.learner, model.learner_accepted) {
        (None, _) => "none",
        (Some(_), true) => "accepted",
        (Some(_), false) => "rejected (did not lower validation error)",
    };
    let _ = writeln!(s, "residual learner: {learner}");
    Ok(s)
}

pub fn predict(model_path: &Path, data: &Path, output: &Path, test_only: bool, cfg: &RunConfig) -> CliResult<()> {
    let model = load_model(model_path)?;
    let mut table = Table::read(data)?;
    if test_only {
        table = table.select(&table.split_rows(true));
    }
    let inp = model_inputs(&model, &table)?;
    let mean = model.predict(&inp.sites, &inp.x, &inp.xf)?;
    let mut headers = vec!["mean"];
    let mut columns: Vec<Vec<f64>> = vec![mean];
    if cfg.draws > 0 {
        let mut rng = rng_from_seed(derive_seed(cfg.train.seed, 2));
        let d = resample_draws_with(&model, &inp.sites, &inp.x, &inp.xf, cfg.draws, cfg.scale_variance, &mut rng)?;
        let s = summarize(&d, cfg.level)?;
        headers.extend(["sd", "lower", "upper"]);
        columns.extend([s.sd, s.lower, s.upper]);
        if let Some(j) = table.index(&cfg.target) {
            headers.push("crps");
            let y = &table.columns[j];
            columns.push((0..y.len()).map(|i| crps(&d.site(i), y[i])).collect());
        }
    }
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    write_columns(output, &headers, &refs)
}

pub fn simulate(
    kind: &str,
    n: usize,
    n_test: usize,
    h: f64,
    output: &Path,
    truth: &Path,
    cfg: &RunConfig,
) -> CliResult<()> {
    let kind: TruthKind = kind.parse()?;
    let seed = cfg.train.seed;
    let ds = gen_with_seeds(kind, n, n_test, h, derive_seed(seed, 0), derive_seed(seed, 1))?;
    let s1: Vec<f64> = ds.sites.iter().map(|s| s.coords()[0]).collect();
    let s2: Vec<f64> = ds.sites.iter().map(|s| s.coords()[1]).collect();
    let x = ds.features(0..ds.len());
    let flag: Vec<f64> = (0..ds.len()).map(|i| f64::from(u8::from(ds.is_test(i)))).collect();
    let (x1, x2) = (x.column(0), x.column(1));
    write_columns(output, &["s1", "s2", "x1", "x2", "y", TEST_FLAG], &[&s1, &s2, &x1, &x2, &ds.y, &flag])?;
    write_columns(truth, &["trend", "spatial", "noise", "y"], &[&ds.trend, &ds.spatial, &ds.noise, &ds.y])?;
    log::info!("wrote {} rows to {} and {}", ds.len(), output.display(), truth.display());
    Ok(())
}

pub fn benchmark(spec: &BenchSpec, report: &Path, summary: &Path, resume: bool) -> CliResult<()> {
    let rep = run_benchmark(spec, Some(report), resume)?;
    write_atomic(summary, |w| rep.write_summary_csv(w))?;
    print!("{}", medians_table(&rep, &spec.models));
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn medians_table(rep: &BenchmarkReport, models: &[BenchModel]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:>6} {:>6} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "model", "n", "h", "ok", "rmse", "mae", "crps", "coverage", "seconds"
    );
    for c in rep.summary.iter().filter(|c| models.contains(&c.model)) {
        let _ = writeln!(
            s,
            "{:<8} {:>6} {:>6} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}",
            c.model.name(),
            c.n,
            c.h,
            c.completed,
            fmt_opt(c.rmse),
            fmt_opt(c.mae),
            fmt_opt(c.crps),
            fmt_opt(c.coverage),
            fmt_opt(c.fit_seconds)
        );
    }
    s
}

pub fn ale_curve(
    model_path: &Path,
    data: &Path,
    feature: &str,
    output: &Path,
    include_coords: bool,
    cfg: &RunConfig,
) -> CliResult<()> {
    let model = load_model(model_path)?;
    if !include_coords && model.feature_spec.coord_names.iter().any(|c| c == feature) {
        return Err(CliError::usage(format!(
            "`{feature}` is a coordinate; pass --include-coords to compute its curve"
        )));
    }
    let table = training_table(data)?;
    let inp = model_inputs(&model, &table)?;
    let curve = ale(&model, &inp.sites, &inp.x, &inp.xf, feature, cfg.bins)?;
    write_atomic(output, |w| curve.write_csv(w))?;
    Ok(())
}
