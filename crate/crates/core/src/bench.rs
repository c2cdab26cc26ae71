//! Monte Carlo benchmark over synthetic datasets.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{LampError, Result};
use crate::forest::{forest_fit, ForestConfig};
use crate::linalg::{ols, Design};
use crate::metrics::{mae, rmse};
use crate::nonlinear::{augment, default_coord_names, AugmentedModel, FeatureSpec, RandomForestLearner};
use crate::persist::write_atomic;
use crate::synth::{gen_with_seeds, SyntheticDataset, TruthKind, N_TEST};
use crate::train::{LampModel, TrainConfig};
use crate::uncertainty::{crps_gaussian, mean_crps, resample_draws, summarize, DrawMatrix};
use crate::util::{derive_seed, median, par_map, quantile_sorted, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BenchModel {
    #[serde(rename = "OLS")]
    Ols,
    #[serde(rename = "LAMP")]
    Lamp,
    #[serde(rename = "LAMP-RF")]
    LampRf,
    #[serde(rename = "RF")]
    Rf,
}

impl BenchModel {
    pub const ALL: [BenchModel; 4] = [BenchModel::Ols, BenchModel::Lamp, BenchModel::LampRf, BenchModel::Rf];

    pub fn name(self) -> &'static str {
        match self {
            BenchModel::Ols => "OLS",
            BenchModel::Lamp => "LAMP",
            BenchModel::LampRf => "LAMP-RF",
            BenchModel::Rf => "RF",
        }
    }
}

impl std::str::FromStr for BenchModel {
    type Err = LampError;

    fn from_str(s: &str) -> Result<Self> {
        BenchModel::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| LampError::InvalidInput(format!("unknown benchmark model `{s}`")))
    }
}

impl std::fmt::Display for BenchModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub kind: TruthKind,
    pub ns: Vec<usize>,
    pub hs: Vec<f64>,
    pub trials: usize,
    pub models: Vec<BenchModel>,
    pub seed: u64,
    pub n_test: usize,
    pub train: TrainConfig,
    pub forest: ForestConfig,
    /// Predictive draws per model for CRPS and interval coverage; 0 skips both.
    pub draws: usize,
    pub level: f64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            kind: TruthKind::Linear,
            ns: vec![500],
            hs: vec![1.0],
            trials: 30,
            models: BenchModel::ALL.to_vec(),
            seed: 0,
            n_test: N_TEST,
            train: TrainConfig::default(),
            forest: ForestConfig::default(),
            draws: 200,
            level: 0.9,
        }
    }
}

/// One model fitted in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: BenchModel,
    pub n: usize,
    pub h: f64,
    pub trial: usize,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub crps: Option<f64>,
    /// Share of test responses inside the central predictive interval.
    pub coverage: Option<f64>,
    pub fit_seconds: Option<f64>,
    pub beta0: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub terminal_bandwidth: Option<f64>,
    pub resolutions: Option<usize>,
}

impl BenchRow {
    fn empty(model: BenchModel, n: usize, h: f64, trial: usize) -> Self {
        BenchRow {
            model,
            n,
            h,
            trial,
            status: "ok".into(),
            rmse: None,
            mae: None,
            crps: None,
            coverage: None,
            fit_seconds: None,
            beta0: None,
            beta1: None,
            beta2: None,
            terminal_bandwidth: None,
            resolutions: None,
        }
    }

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    fn key(&self) -> (usize, u64, BenchModel, usize) {
        (self.n, self.h.to_bits(), self.model, self.trial)
    }
}

/// Medians over the completed trials of one (model, N, h) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub model: BenchModel,
    pub n: usize,
    pub h: f64,
    pub completed: usize,
    pub failed: usize,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub crps: Option<f64>,
    pub coverage: Option<f64>,
    pub fit_seconds: Option<f64>,
    pub beta1: Option<f64>,
    pub terminal_bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Sorted by N, h, model, trial.
    pub rows: Vec<BenchRow>,
    pub summary: Vec<CellSummary>,
}

fn med(v: Vec<f64>) -> Option<f64> {
    (!v.is_empty()).then(|| median(&v))
}

impl BenchmarkReport {
    pub fn from_rows(mut rows: Vec<BenchRow>) -> Self {
        rows.sort_by(|a, b| a.key().cmp(&b.key()));
        rows.dedup_by(|a, b| a.key() == b.key());
        let cells: BTreeSet<(usize, u64, BenchModel)> = rows.iter().map(|r| (r.n, r.h.to_bits(), r.model)).collect();
        let summary = cells
            .into_iter()
            .map(|(n, hb, model)| {
                let h = f64::from_bits(hb);
                let cell: Vec<&BenchRow> = rows
                    .iter()
                    .filter(|r| r.n == n && r.h.to_bits() == hb && r.model == model)
                    .collect();
                let done: Vec<&&BenchRow> = cell.iter().filter(|r| r.ok()).collect();
                let col = |f: fn(&BenchRow) -> Option<f64>| med(done.iter().filter_map(|r| f(r)).collect());
                CellSummary {
                    model,
                    n,
                    h,
                    completed: done.len(),
                    failed: cell.len() - done.len(),
                    rmse: col(|r| r.rmse),
                    mae: col(|r| r.mae),
                    crps: col(|r| r.crps),
                    coverage: col(|r| r.coverage),
                    fit_seconds: col(|r| r.fit_seconds),
                    beta1: col(|r| r.beta1),
                    terminal_bandwidth: col(|r| r.terminal_bandwidth),
                }
            })
            .collect();
        BenchmarkReport { rows, summary }
    }

    /// Values of one column over the completed trials of a cell.
    pub fn values(&self, model: BenchModel, n: usize, h: f64, f: impl Fn(&BenchRow) -> Option<f64>) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.ok() && r.model == model && r.n == n && r.h.to_bits() == h.to_bits())
            .filter_map(f)
            .collect()
    }

    pub fn cell(&self, model: BenchModel, n: usize, h: f64) -> Option<&CellSummary> {
        self.summary
            .iter()
            .find(|c| c.model == model && c.n == n && c.h.to_bits() == h.to_bits())
    }

    pub fn write_rows_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for c in &self.summary {
            w.serialize(c)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Interquartile range (linear-interpolation quantiles).
pub fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Seed of one trial, derived from the master seed, the cell, and the trial index.
pub fn trial_seed(master: u64, n: usize, h: f64, trial: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(master, n as u64), h.to_bits()), trial as u64)
}

fn coverage(d: &DrawMatrix, y: &[f64], level: f64) -> Result<f64> {
    let s = summarize(d, level)?;
    let inside = y
        .iter()
        .enumerate()
        .filter(|(i, &yi)| s.lower[*i] <= yi && yi <= s.upper[*i])
        .count();
    Ok(inside as f64 / y.len() as f64)
}

struct TrialData<'a> {
    data: &'a SyntheticDataset,
    y_test: &'a [f64],
    x_train: Design,
    x_test: Design,
    f_train: Design,
    f_test: Design,
    spec: FeatureSpec,
}

fn score(row: &mut BenchRow, d: &TrialData, pred: &[f64]) -> Result<()> {
    row.rmse = Some(rmse(d.y_test, pred)?);
    row.mae = Some(mae(d.y_test, pred)?);
    Ok(())
}

fn score_draws(row: &mut BenchRow, d: &TrialData, draws: &DrawMatrix, level: f64) -> Result<()> {
    row.crps = Some(mean_crps(draws, d.y_test)?);
    row.coverage = Some(coverage(draws, d.y_test, level)?);
    Ok(())
}

fn set_beta(row: &mut BenchRow, beta: &[f64]) {
    row.beta0 = beta.first().copied();
    row.beta1 = beta.get(1).copied();
    row.beta2 = beta.get(2).copied();
}

fn run_ols(spec: &BenchSpec, d: &TrialData, row: &mut BenchRow) -> Result<()> {
    let t = Instant::now();
    let fit = ols(&d.x_train, &d.data.y[d.data.train_rows()], None)?;
    row.fit_seconds = Some(t.elapsed().as_secs_f64());
    set_beta(row, &fit.beta);
    let p = fit.beta.len();
    let pred: Vec<f64> = (0..d.x_test.nrows()).map(|i| d.x_test.dot_row(i, &fit.beta)).collect();
    score(row, d, &pred)?;
    if spec.draws > 0 {
        let mut total = 0.0;
        let mut inside = 0usize;
        let z = statrs_normal_quantile(0.5 + spec.level / 2.0);
        for (i, (&m, &y)) in pred.iter().zip(d.y_test).enumerate() {
            let xi = d.x_test.row(i);
            let mut q = 0.0;
            for a in 0..p {
                for b in 0..p {
                    q += xi[a] * fit.cov[a * p + b] * xi[b];
                }
            }
            let sd = (fit.sigma2 + q).sqrt();
            total += crps_gaussian(m, sd, y);
            if (y - m).abs() <= z * sd {
                inside += 1;
            }
        }
        row.crps = Some(total / pred.len() as f64);
        row.coverage = Some(inside as f64 / pred.len() as f64);
    }
    Ok(())
}

fn statrs_normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

fn run_lamp(
    spec: &BenchSpec,
    d: &TrialData,
    seed: u64,
    lamp_row: Option<&mut BenchRow>,
    rf_row: Option<&mut BenchRow>,
) -> Result<()> {
    let train = d.data.train_rows();
    let sites = &d.data.sites[train.clone()];
    let test_sites = &d.data.sites[d.data.test_rows()];
    let y = &d.data.y[train];
    let config = TrainConfig {
        seed: derive_seed(seed, 1),
        ..spec.train.clone()
    };
    let t = Instant::now();
    let base = LampModel::fit(y, &d.x_train, sites, &config)?;
    let lamp_seconds = t.elapsed().as_secs_f64();

    let fill = |row: &mut BenchRow, model: &AugmentedModel<RandomForestLearner>, secs: f64, stream: u64| -> Result<()> {
        row.fit_seconds = Some(secs);
        set_beta(row, &model.base.beta);
        row.terminal_bandwidth = model.base.terminal_bandwidth();
        row.resolutions = Some(model.base.resolutions());
        let pred = model.predict(test_sites, &d.x_test, &d.f_test)?;
        score(row, d, &pred)?;
        if spec.draws > 0 {
            let mut rng = rng_from_seed(derive_seed(seed, stream));
            let draws = resample_draws(model, test_sites, &d.x_test, &d.f_test, spec.draws, &mut rng)?;
            score_draws(row, d, &draws, spec.level)?;
        }
        Ok(())
    };

    if let Some(row) = rf_row {
        let t = Instant::now();
        let mut rng = rng_from_seed(derive_seed(seed, 2));
        let model = augment(
            base.clone(),
            y,
            &d.f_train,
            sites,
            RandomForestLearner::new(spec.forest.clone()),
            d.spec.clone(),
            &mut rng,
        )?;
        fill(row, &model, lamp_seconds + t.elapsed().as_secs_f64(), 5)?;
    }
    if let Some(row) = lamp_row {
        let model = AugmentedModel::<RandomForestLearner>::linear(base, d.spec.clone());
        fill(row, &model, lamp_seconds, 4)?;
    }
    Ok(())
}

fn run_rf(spec: &BenchSpec, d: &TrialData, seed: u64, row: &mut BenchRow) -> Result<()> {
    let train = d.data.train_rows();
    let ftrain = d.spec.build(&d.f_train, &d.data.sites[train.clone()])?;
    let ftest = d.spec.build(&d.f_test, &d.data.sites[d.data.test_rows()])?;
    let mut rng = rng_from_seed(derive_seed(seed, 3));
    let t = Instant::now();
    let forest = forest_fit(&ftrain, &d.data.y[train], &spec.forest, &mut rng)?;
    row.fit_seconds = Some(t.elapsed().as_secs_f64());
    let pred = forest.predict(&ftest)?;
    score(row, d, &pred)?;
    if spec.draws > 0 {
        let mut rng = rng_from_seed(derive_seed(seed, 6));
        let mut data = Vec::with_capacity(spec.draws * pred.len());
        for _ in 0..spec.draws {
            data.extend(forest.quantile_sample(&ftest, &mut rng)?);
        }
        let draws = DrawMatrix::new(spec.draws, pred.len(), data)?;
        score_draws(row, d, &draws, spec.level)?;
    }
    Ok(())
}

fn fail(row: &mut BenchRow, e: LampError) {
    log::warn!("{} N={} h={} trial {} failed: {e}", row.model, row.n, row.h, row.trial);
    let keep = (row.model, row.n, row.h, row.trial);
    *row = BenchRow::empty(keep.0, keep.1, keep.2, keep.3);
    row.status = format!("failed: {e}");
}

/// Runs every requested model on one trial's data.
pub fn run_trial(spec: &BenchSpec, n: usize, h: f64, trial: usize) -> Vec<BenchRow> {
    let seed = trial_seed(spec.seed, n, h, trial);
    let mut rows: Vec<BenchRow> = spec.models.iter().map(|&m| BenchRow::empty(m, n, h, trial)).collect();
    let data = match gen_with_seeds(spec.kind, n, spec.n_test, h, derive_seed(seed, 10), derive_seed(seed, 11)) {
        Ok(d) => d,
        Err(e) => {
            let msg = e.to_string();
            for r in &mut rows {
                fail(r, LampError::InvalidInput(msg.clone()));
            }
            return rows;
        }
    };
    let td = TrialData {
        data: &data,
        y_test: &data.y[data.test_rows()],
        x_train: data.design(data.train_rows()),
        x_test: data.design(data.test_rows()),
        f_train: data.features(data.train_rows()),
        f_test: data.features(data.test_rows()),
        spec: FeatureSpec {
            covariates: SyntheticDataset::covariate_names(),
            coord_names: default_coord_names(2),
            append_coords: true,
        },
    };
    let pos = |m: BenchModel| spec.models.iter().position(|&x| x == m);
    if let Some(i) = pos(BenchModel::Ols) {
        if let Err(e) = run_ols(spec, &td, &mut rows[i]) {
            fail(&mut rows[i], e);
        }
    }
    let (li, ri) = (pos(BenchModel::Lamp), pos(BenchModel::LampRf));
    if li.is_some() || ri.is_some() {
        let mut lamp_row = li.map(|i| rows[i].clone());
        let mut rf_row = ri.map(|i| rows[i].clone());
        if let Err(e) = run_lamp(spec, &td, seed, lamp_row.as_mut(), rf_row.as_mut()) {
            for r in lamp_row.iter_mut().chain(rf_row.iter_mut()) {
                fail(r, LampError::InvalidInput(e.to_string()));
            }
        }
        if let (Some(i), Some(r)) = (li, lamp_row) {
            rows[i] = r;
        }
        if let (Some(i), Some(r)) = (ri, rf_row) {
            rows[i] = r;
        }
    }
    if let Some(i) = pos(BenchModel::Rf) {
        if let Err(e) = run_rf(spec, &td, seed, &mut rows[i]) {
            fail(&mut rows[i], e);
        }
    }
    rows
}

/// Runs all cells and trials. With `journal`, each finished trial is appended
/// to that file and, with `resume`, trials already recorded there are skipped;
/// the file is rewritten in sorted order at the end.
pub fn run_benchmark(spec: &BenchSpec, journal: Option<&Path>, resume: bool) -> Result<BenchmarkReport> {
    if spec.trials == 0 || spec.ns.is_empty() || spec.hs.is_empty() || spec.models.is_empty() {
        return Err(LampError::InvalidInput(
            "benchmark needs at least one trial, N, h, and model".into(),
        ));
    }
    spec.train.validate()?;
    if spec.models.contains(&BenchModel::Rf) || spec.models.contains(&BenchModel::LampRf) {
        spec.forest.validate()?;
    }
    let mut done: Vec<BenchRow> = match journal {
        Some(p) if resume && p.exists() => read_rows_csv(p)?,
        _ => Vec::new(),
    };
    let have: BTreeSet<_> = done.iter().map(|r| r.key()).collect();
    let mut todo = Vec::new();
    for &n in &spec.ns {
        for &h in &spec.hs {
            for t in 0..spec.trials {
                let complete = spec.models.iter().all(|&m| have.contains(&(n, h.to_bits(), m, t)));
                if !complete {
                    todo.push((n, h, t));
                }
            }
        }
    }
    if !resume {
        done.clear();
    }
    let writer = match journal {
        Some(p) => {
            let fresh = !resume || !p.exists() || std::fs::metadata(p)?.len() == 0;
            let file = OpenOptions::new().create(true).append(!fresh).write(true).truncate(fresh).open(p)?;
            Some(Mutex::new(
                csv::WriterBuilder::new().has_headers(fresh).from_writer(file),
            ))
        }
        None => None,
    };
    let results = par_map(todo.len(), |k| -> Result<Vec<BenchRow>> {
        let (n, h, t) = todo[k];
        let rows = run_trial(spec, n, h, t);
        log::info!("N={n} h={h} trial {t} done");
        if let Some(w) = &writer {
            let mut w = w.lock().expect("journal lock");
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Ok(rows)
    });
    for r in results {
        done.extend(r?);
    }
    let wanted: BTreeSet<(usize, u64)> = spec
        .ns
        .iter()
        .flat_map(|&n| spec.hs.iter().map(move |&h| (n, h.to_bits())))
        .collect();
    done.retain(|r| wanted.contains(&(r.n, r.h.to_bits())) && spec.models.contains(&r.model) && r.trial < spec.trials);
    let report = BenchmarkReport::from_rows(done);
    if let Some(p) = journal {
        drop(writer);
        write_atomic(p, |w| report.write_rows_csv(w))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for m in BenchModel::ALL {
            assert_eq!(m.name().parse::<BenchModel>().unwrap(), m);
        }
        assert_eq!("lamp-rf".parse::<BenchModel>().unwrap(), BenchModel::LampRf);
    }
}
