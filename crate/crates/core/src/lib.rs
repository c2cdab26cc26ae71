//! Multiscale spatial regression built from kernel-local aggregates (LAMP).
//!
//! A spatial process is represented as a sum of single-scale processes, each
//! the generalized product-of-experts aggregate of kernel-weighted local
//! means. Scales are learned coarse to fine by holdout validation, optionally
//! followed by a non-linear residual learner, with resampling-based
//! predictive uncertainty.

pub mod bench;
pub mod error;
pub mod forest;
pub(crate) mod index;
pub mod linalg;
pub mod local;
pub mod metrics;
pub mod nonlinear;
pub mod persist;
pub mod spatial;
pub mod synth;
pub mod train;
pub mod uncertainty;
pub mod util;

pub use bench::{run_benchmark, BenchModel, BenchRow, BenchSpec, BenchmarkReport};
pub use error::{LampError, Result};
pub use linalg::{ols, Design, OlsFit};
pub use local::{aggregate_gpoe, fit_local, fit_scale, local_predictive_variance, LocalModel, ScaleProcess};
pub use spatial::{
    bandwidth_at, bounding_diagonal, center_count, distance, kernel_weight, place_centers,
    BandwidthSchedule, CenterSet, KernelKind, KernelSpec, Site,
};
pub use train::{first_hv, predict_linear, second_hv, split_holdout, HoldoutSplit, LampModel, TrainConfig};
pub use forest::{forest_fit, forest_predict, forest_quantile_sample, Forest, ForestConfig};
pub use metrics::{mae, rmse};
pub use nonlinear::{ale, augment, fit_nonlinear, predict_full, AleCurve, AugmentedModel, FeatureSpec, Learner, RandomForestLearner};
pub use persist::{load_model, save_model};
pub use synth::{gen_linear, gen_nonlinear, SyntheticDataset, TruthKind};
pub use uncertainty::{crps, resample_draws, summarize, DrawMatrix, PredictiveSummary};
