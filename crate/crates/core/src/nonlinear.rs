//! Residual learners on top of a linear LAMP fit, and accumulated local
//! effects for interpreting the combined predictor.

use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{LampError, Result};
use crate::forest::{forest_fit, Forest, ForestConfig};
use crate::linalg::{Design, INTERCEPT};
use crate::spatial::Site;
use crate::train::{check_design, LampModel, TrainConfig};
use crate::util::quantile_sorted;

/// A regression learner fitted to LAMP residuals.
pub trait Learner {
    fn fit(&mut self, features: &Design, targets: &[f64], rng: &mut dyn RngCore) -> Result<()>;
    fn predict(&self, features: &Design) -> Result<Vec<f64>>;
    /// One draw per row from the learner's predictive distribution.
    fn sample(&self, features: &Design, rng: &mut dyn RngCore) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RandomForestLearner {
    pub config: ForestConfig,
    pub forest: Option<Forest>,
}

impl RandomForestLearner {
    pub fn new(config: ForestConfig) -> Self {
        RandomForestLearner { config, forest: None }
    }

    fn fitted(&self) -> Result<&Forest> {
        self.forest
            .as_ref()
            .ok_or_else(|| LampError::InvalidInput("forest has not been fitted".into()))
    }
}

impl Learner for RandomForestLearner {
    fn fit(&mut self, features: &Design, targets: &[f64], rng: &mut dyn RngCore) -> Result<()> {
        self.forest = Some(forest_fit(features, targets, &self.config, rng)?);
        Ok(())
    }

    fn predict(&self, features: &Design) -> Result<Vec<f64>> {
        self.fitted()?.predict(features)
    }

    fn sample(&self, features: &Design, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.fitted()?.quantile_sample(features, rng)
    }
}

/// Learner inputs: named feature columns, optionally followed by the site coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub covariates: Vec<String>,
    pub coord_names: Vec<String>,
    pub append_coords: bool,
}

impl FeatureSpec {
    pub fn names(&self) -> Vec<String> {
        let mut names = self.covariates.clone();
        if self.append_coords {
            names.extend(self.coord_names.iter().cloned());
        }
        names
    }

    /// Assembles the learner design from `xf` and `sites`.
    pub fn build(&self, xf: &Design, sites: &[Site]) -> Result<Design> {
        if xf.names() != self.covariates.as_slice() {
            return Err(LampError::InvalidInput(format!(
                "learner features mismatch: expected [{}], found [{}]",
                self.covariates.join(", "),
                xf.names().join(", ")
            )));
        }
        if xf.nrows() != sites.len() {
            return Err(LampError::LengthMismatch {
                what: "learner feature rows",
                expected: sites.len(),
                found: xf.nrows(),
            });
        }
        let mut cols: Vec<Vec<f64>> = (0..xf.ncols()).map(|j| xf.column(j)).collect();
        if self.append_coords {
            for (k, _) in self.coord_names.iter().enumerate() {
                let mut c = Vec::with_capacity(sites.len());
                for s in sites {
                    let v = s.coords().get(k).copied().ok_or(LampError::DimensionMismatch {
                        expected: self.coord_names.len(),
                        found: s.dim(),
                    })?;
                    c.push(v);
                }
                cols.push(c);
            }
        }
        if cols.is_empty() {
            return Design::new(Vec::new(), sites.len(), Vec::new());
        }
        Design::from_columns(self.names(), &cols)
    }
}

/// Default coordinate column names for `dim` coordinates.
pub fn default_coord_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|k| format!("coord{k}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedModel<L> {
    pub base: LampModel,
    pub learner: Option<L>,
    pub learner_accepted: bool,
    pub feature_spec: FeatureSpec,
    /// `y - ŷ` for the returned predictor at every sample.
    pub residuals: Vec<f64>,
    pub validation_sse: f64,
}

impl<L: Learner> AugmentedModel<L> {
    /// A model without a residual learner.
    pub fn linear(base: LampModel, feature_spec: FeatureSpec) -> Self {
        AugmentedModel {
            residuals: base.residuals.clone(),
            validation_sse: base.validation_sse,
            base,
            learner: None,
            learner_accepted: false,
            feature_spec,
        }
    }

    /// The learner, if it was accepted.
    pub fn active_learner(&self) -> Option<&L> {
        if self.learner_accepted {
            self.learner.as_ref()
        } else {
            None
        }
    }

    /// Point prediction of the returned predictor.
    pub fn predict(&self, sites: &[Site], x: &Design, xf: &Design) -> Result<Vec<f64>> {
        predict_full(self, sites, x, xf)
    }
}

/// Fits linear LAMP (seeded from `config.seed`) and then the residual learner.
pub fn fit_nonlinear<L: Learner>(
    y: &[f64],
    x: &Design,
    xf: &Design,
    sites: &[Site],
    config: &TrainConfig,
    learner: L,
    feature_spec: FeatureSpec,
    rng: &mut dyn RngCore,
) -> Result<AugmentedModel<L>> {
    let base = LampModel::fit(y, x, sites, config)?;
    augment(base, y, xf, sites, learner, feature_spec, rng)
}

/// Fits `learner` to the base model's training residuals and keeps it only
/// if it lowers the validation SSE.
pub fn augment<L: Learner>(
    base: LampModel,
    y: &[f64],
    xf: &Design,
    sites: &[Site],
    mut learner: L,
    feature_spec: FeatureSpec,
    rng: &mut dyn RngCore,
) -> Result<AugmentedModel<L>> {
    if y.len() != base.residuals.len() {
        return Err(LampError::LengthMismatch {
            what: "response",
            expected: base.residuals.len(),
            found: y.len(),
        });
    }
    let features = feature_spec.build(xf, sites)?;
    let train = &base.split.train_idx;
    let train_features = features.select_rows(train);
    let train_targets: Vec<f64> = train.iter().map(|&i| base.residuals[i]).collect();
    learner.fit(&train_features, &train_targets, rng)?;
    let f = learner.predict(&features)?;
    let residuals: Vec<f64> = base.residuals.iter().zip(&f).map(|(r, fi)| r - fi).collect();
    let sse: f64 = base.split.valid_idx.iter().map(|&i| residuals[i] * residuals[i]).sum();
    let accepted = sse < base.validation_sse;
    log::info!(
        "residual learner validation SSE {sse:.6} vs {:.6}: {}",
        base.validation_sse,
        if accepted { "accepted" } else { "rejected" }
    );
    Ok(if accepted {
        AugmentedModel {
            base,
            learner: Some(learner),
            learner_accepted: true,
            feature_spec,
            residuals,
            validation_sse: sse,
        }
    } else {
        AugmentedModel {
            residuals: base.residuals.clone(),
            validation_sse: base.validation_sse,
            base,
            learner: Some(learner),
            learner_accepted: false,
            feature_spec,
        }
    })
}

/// `ŷ* + f` when the learner was accepted, `ŷ*` otherwise.
pub fn predict_full<L: Learner>(
    model: &AugmentedModel<L>,
    sites: &[Site],
    x: &Design,
    xf: &Design,
) -> Result<Vec<f64>> {
    let mut mean = model.base.predict(sites, x)?.mean;
    if let Some(l) = model.active_learner() {
        let f = l.predict(&model.feature_spec.build(xf, sites)?)?;
        for (m, fi) in mean.iter_mut().zip(f) {
            *m += fi;
        }
    }
    Ok(mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleCurve {
    pub feature: String,
    pub bin_centers: Vec<f64>,
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
    /// 2.5% and 97.5% sample percentiles of the feature.
    pub lower_pct: f64,
    pub upper_pct: f64,
}

impl AleCurve {
    pub fn inside_95pct(&self, k: usize) -> bool {
        let c = self.bin_centers[k];
        c >= self.lower_pct && c <= self.upper_pct
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_center", "ale_value", "inside_95pct"])?;
        for k in 0..self.bin_centers.len() {
            w.write_record([
                self.bin_centers[k].to_string(),
                self.values[k].to_string(),
                u8::from(self.inside_95pct(k)).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Accumulated local effects of a feature taking `values` at each sample.
///
/// `predict(v)` must return predictions with the feature replaced by `v[i]`
/// in row `i` and everything else held at its observed value.
pub fn ale_from_fn<F>(feature: &str, values: &[f64], n_bins: usize, predict: F) -> Result<AleCurve>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if n_bins < 2 {
        return Err(LampError::InvalidInput("ALE needs at least 2 bins".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = match (sorted.first(), sorted.last()) {
        (Some(&lo), Some(&hi)) if lo < hi => (lo, hi),
        _ => return Err(LampError::ZeroVarianceFeature(feature.to_string())),
    };
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|k| quantile_sorted(&sorted, k as f64 / n_bins as f64))
        .collect();
    edges[0] = lo;
    edges[n_bins] = hi;
    edges.dedup();
    let bins = edges.len() - 1;

    // Bin k covers (edges[k], edges[k+1]]; the first bin also holds the minimum.
    let bin_of: Vec<usize> = values
        .iter()
        .map(|&v| edges[1..].partition_point(|&e| e < v).min(bins - 1))
        .collect();
    let lower: Vec<f64> = bin_of.iter().map(|&k| edges[k]).collect();
    let upper: Vec<f64> = bin_of.iter().map(|&k| edges[k + 1]).collect();
    let pl = predict(&lower)?;
    let pu = predict(&upper)?;

    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (i, &k) in bin_of.iter().enumerate() {
        sums[k] += pu[i] - pl[i];
        counts[k] += 1;
    }
    let mut acc = Vec::with_capacity(bins + 1);
    acc.push(0.0);
    for k in 0..bins {
        let step = if counts[k] > 0 { sums[k] / counts[k] as f64 } else { 0.0 };
        acc.push(acc[k] + step);
    }
    let mut mids: Vec<f64> = (0..bins).map(|k| 0.5 * (acc[k] + acc[k + 1])).collect();
    let n = values.len() as f64;
    let shift: f64 = mids.iter().zip(&counts).map(|(m, &c)| m * c as f64).sum::<f64>() / n;
    for m in &mut mids {
        *m -= shift;
    }
    Ok(AleCurve {
        feature: feature.to_string(),
        bin_centers: (0..bins).map(|k| 0.5 * (edges[k] + edges[k + 1])).collect(),
        values: mids,
        counts,
        lower_pct: quantile_sorted(&sorted, 0.025),
        upper_pct: quantile_sorted(&sorted, 0.975),
    })
}

/// ALE of the full predictor for a covariate, learner feature, or coordinate.
/// A name present in both `x` and `xf` is varied in both.
pub fn ale<L: Learner>(
    model: &AugmentedModel<L>,
    sites: &[Site],
    x: &Design,
    xf: &Design,
    feature: &str,
    n_bins: usize,
) -> Result<AleCurve> {
    check_design(&model.base, x)?;
    let xj = x.column_index(feature).filter(|_| feature != INTERCEPT);
    let fj = xf.column_index(feature);
    let cj = model.feature_spec.coord_names.iter().position(|c| c == feature);
    let values = match (xj, fj, cj) {
        (Some(j), _, _) => x.column(j),
        (None, Some(j), _) => xf.column(j),
        (None, None, Some(k)) => sites.iter().map(|s| s.coords()[k]).collect(),
        _ => return Err(LampError::UnknownFeature(feature.to_string())),
    };
    ale_from_fn(feature, &values, n_bins, |v| {
        let mut x2 = x.clone();
        let mut xf2 = xf.clone();
        let mut s2 = sites.to_vec();
        for (i, &vi) in v.iter().enumerate() {
            if let Some(j) = xj {
                x2.set(i, j, vi);
            }
            if let Some(j) = fj {
                xf2.set(i, j, vi);
            }
            if let Some(k) = cj {
                let mut c = s2[i].xy();
                c[k] = vi;
                s2[i] = if s2[i].dim() == 1 { Site::new_1d(c[0]) } else { Site::new_2d(c[0], c[1]) };
            }
        }
        predict_full(model, &s2, &x2, &xf2)
    })
}
