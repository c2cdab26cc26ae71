//! Synthetic spatial regression data on the square `[0, 10]²`.
//!
//! The response process and the two covariate processes are moving averages
//! of white noise under an exponential kernel. Each moving average is scaled
//! by the root sum of squared weights so the process keeps the variance of its
//! noise (4 for the response process, 1 for the covariates).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LampError, Result};
use crate::index::{dist2, GridIndex};
use crate::linalg::Design;
use crate::spatial::Site;
use crate::util::{derive_seed, par_map, rng_from_seed, sample_sd};

pub const REGION: f64 = 10.0;
pub const N_TEST: usize = 1000;
pub const LINEAR_BETA: [f64; 3] = [1.0, 2.0, -0.5];
/// Bandwidth of the covariate processes.
pub const COVARIATE_BANDWIDTH: f64 = 1.0;
/// Above this many sites, kernel weights below [`WEIGHT_CUTOFF`] are dropped.
pub const DENSE_LIMIT: usize = 8000;
pub const WEIGHT_CUTOFF: f64 = 1e-6;
const PROCESS_SD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthKind {
    Linear,
    Nonlinear,
}

impl std::str::FromStr for TruthKind {
    type Err = LampError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(TruthKind::Linear),
            "nonlinear" | "non-linear" => Ok(TruthKind::Nonlinear),
            other => Err(LampError::InvalidInput(format!(
                "unknown data kind `{other}` (expected linear or nonlinear)"
            ))),
        }
    }
}

impl std::fmt::Display for TruthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TruthKind::Linear => "linear",
            TruthKind::Nonlinear => "nonlinear",
        })
    }
}

/// Training rows come first, followed by `n_test` test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub kind: TruthKind,
    pub n_train: usize,
    pub n_test: usize,
    pub h: f64,
    pub train_seed: u64,
    pub test_seed: u64,
    /// `(β₀, β₁, β₂)`; for non-linear data these multiply `exp(x₁)` and `x₂⁺`.
    pub beta: [f64; 3],
    pub sites: Vec<Site>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: Vec<f64>,
    /// Covariate part of the mean, intercept included.
    pub trend: Vec<f64>,
    pub spatial: Vec<f64>,
    pub noise: Vec<f64>,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn is_test(&self, i: usize) -> bool {
        i >= self.n_train
    }

    pub fn train_rows(&self) -> std::ops::Range<usize> {
        0..self.n_train
    }

    pub fn test_rows(&self) -> std::ops::Range<usize> {
        self.n_train..self.len()
    }

    pub fn covariate_names() -> Vec<String> {
        vec!["x1".to_string(), "x2".to_string()]
    }

    /// Intercept plus `x1`, `x2` over `rows`.
    pub fn design(&self, rows: std::ops::Range<usize>) -> Design {
        Design::with_intercept(
            &Self::covariate_names(),
            &[self.x1[rows.clone()].to_vec(), self.x2[rows.clone()].to_vec()],
            rows.len(),
        )
        .expect("generated covariates are finite")
    }

    /// `x1`, `x2` without intercept, the learner's covariate features.
    pub fn features(&self, rows: std::ops::Range<usize>) -> Design {
        Design::from_columns(
            Self::covariate_names(),
            &[self.x1[rows.clone()].to_vec(), self.x2[rows].to_vec()],
        )
        .expect("generated covariates are finite")
    }
}

/// Moving averages `Σ_j w(d_ij) u_j / sqrt(Σ_j w(d_ij)²)` of each noise vector.
fn moving_average(points: &[[f64; 2]], h: f64, noise: &[&[f64]]) -> Vec<Vec<f64>> {
    let m = points.len();
    let weight = |d2: f64| (-d2.sqrt() / h).exp();
    let rows: Vec<Vec<f64>> = if m <= DENSE_LIMIT {
        par_map(m, |i| {
            let mut acc = vec![0.0; noise.len() + 1];
            for (j, p) in points.iter().enumerate() {
                let w = weight(dist2(&points[i], p));
                acc[0] += w * w;
                for (a, u) in acc[1..].iter_mut().zip(noise) {
                    *a += w * u[j];
                }
            }
            acc
        })
    } else {
        let radius = -h * WEIGHT_CUTOFF.ln();
        let grid = GridIndex::new(points.to_vec(), radius.max(1e-9));
        par_map(m, |i| {
            let mut near = Vec::new();
            grid.within(points[i], radius, &mut near);
            near.sort_unstable();
            let mut acc = vec![0.0; noise.len() + 1];
            for j in near {
                let w = weight(dist2(&points[i], &points[j]));
                if w < WEIGHT_CUTOFF {
                    continue;
                }
                acc[0] += w * w;
                for (a, u) in acc[1..].iter_mut().zip(noise) {
                    *a += w * u[j];
                }
            }
            acc
        })
    };
    (0..noise.len())
        .map(|k| rows.iter().map(|acc| acc[k + 1] / acc[0].sqrt()).collect())
        .collect()
}

/// Draws from one side (train or test) of the data.
struct SideDraws {
    points: Vec<[f64; 2]>,
    u: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    e1: Vec<f64>,
    e2: Vec<f64>,
    e: Vec<f64>,
}

fn side_draws(n: usize, seed: u64) -> SideDraws {
    let normals = |stream: u64, sd: f64| -> Vec<f64> {
        let mut rng = rng_from_seed(derive_seed(seed, stream));
        (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let points = (0..n)
        .map(|_| [rng.random_range(0.0..REGION), rng.random_range(0.0..REGION)])
        .collect();
    SideDraws {
        points,
        u: normals(1, PROCESS_SD),
        u1: normals(2, 1.0),
        u2: normals(3, 1.0),
        e1: normals(4, 1.0),
        e2: normals(5, 1.0),
        e: normals(6, 1.0),
    }
}

/// Generates `n` training and `n_test` test rows. Training-side draws (sites,
/// process noise at training sites, covariate and response noise) depend only
/// on `train_seed`, test-side draws only on `test_seed`; the processes
/// themselves are computed over all sites jointly.
pub fn gen_with_seeds(
    kind: TruthKind,
    n: usize,
    n_test: usize,
    h: f64,
    train_seed: u64,
    test_seed: u64,
) -> Result<SyntheticDataset> {
    if n < 10 {
        return Err(LampError::InvalidInput(format!("need at least 10 training sites, got {n}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(LampError::InvalidInput(format!("bandwidth must be positive, got {h}")));
    }
    let tr = side_draws(n, train_seed);
    let te = side_draws(n_test, test_seed);
    let cat = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().chain(b).copied().collect() };
    let points: Vec<[f64; 2]> = tr.points.iter().chain(&te.points).copied().collect();
    let u = cat(&tr.u, &te.u);
    let u1 = cat(&tr.u1, &te.u1);
    let u2 = cat(&tr.u2, &te.u2);

    let (z, z1, z2) = if h == COVARIATE_BANDWIDTH {
        let mut all = moving_average(&points, h, &[&u, &u1, &u2]).into_iter();
        (all.next().unwrap(), all.next().unwrap(), all.next().unwrap())
    } else {
        let z = moving_average(&points, h, &[&u]).remove(0);
        let mut cov = moving_average(&points, COVARIATE_BANDWIDTH, &[&u1, &u2]).into_iter();
        (z, cov.next().unwrap(), cov.next().unwrap())
    };
    let e1 = cat(&tr.e1, &te.e1);
    let e2 = cat(&tr.e2, &te.e2);
    let noise = cat(&tr.e, &te.e);
    let x1: Vec<f64> = z1.iter().zip(&e1).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
    let x2: Vec<f64> = z2.iter().zip(&e2).map(|(a, b)| 0.5 * a + 0.5 * b).collect();

    let (beta, trend): ([f64; 3], Vec<f64>) = match kind {
        TruthKind::Linear => {
            let b = LINEAR_BETA;
            (b, x1.iter().zip(&x2).map(|(a, c)| b[0] + b[1] * a + b[2] * c).collect())
        }
        TruthKind::Nonlinear => {
            let f1: Vec<f64> = x1.iter().map(|a| a.exp()).collect();
            let f2: Vec<f64> = x2.iter().map(|a| a.max(0.0)).collect();
            let b = [1.0, PROCESS_SD / sample_sd(&f1), PROCESS_SD / sample_sd(&f2)];
            (b, f1.iter().zip(&f2).map(|(a, c)| b[0] + b[1] * a + b[2] * c).collect())
        }
    };
    let y = (0..points.len()).map(|i| trend[i] + z[i] + noise[i]).collect();
    Ok(SyntheticDataset {
        kind,
        n_train: n,
        n_test,
        h,
        train_seed,
        test_seed,
        beta,
        sites: points.iter().map(|p| Site::new_2d(p[0], p[1])).collect(),
        x1,
        x2,
        y,
        trend,
        spatial: z,
        noise,
    })
}

pub fn generate<R: Rng + ?Sized>(kind: TruthKind, n: usize, h: f64, rng: &mut R) -> Result<SyntheticDataset> {
    let seed = rng.random::<u64>();
    gen_with_seeds(kind, n, N_TEST, h, derive_seed(seed, 0), derive_seed(seed, 1))
}

/// Linear truth: `y = 1 + 2 x₁ - 0.5 x₂ + z + e`.
pub fn gen_linear<R: Rng + ?Sized>(n: usize, h: f64, rng: &mut R) -> Result<SyntheticDataset> {
    generate(TruthKind::Linear, n, h, rng)
}

/// Non-linear truth: `y = 1 + β₁ exp(x₁) + β₂ max(x₂, 0) + z + e` with both
/// effects calibrated to variance 4 on the generated sample.
pub fn gen_nonlinear<R: Rng + ?Sized>(n: usize, h: f64, rng: &mut R) -> Result<SyntheticDataset> {
    generate(TruthKind::Nonlinear, n, h, rng)
}
