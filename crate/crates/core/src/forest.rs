//! Bagged CART regression forest with out-of-bag hyperparameter selection
//! and quantile-regression-forest sampling.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LampError, Result};
use crate::linalg::Design;
use crate::util::{derive_seed, par_map, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate numbers of features tried at each split (clipped to the feature count).
    pub mtry_grid: Vec<usize>,
    /// Candidate minimum leaf sizes.
    pub min_node_grid: Vec<usize>,
    /// Bootstrap size as a fraction of the training rows.
    pub sample_fraction: f64,
    /// Sample with replacement; without it every tree sees the full training set.
    pub replace: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            mtry_grid: vec![1, 2, 3],
            min_node_grid: vec![5, 10],
            sample_fraction: 1.0,
            replace: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(LampError::InvalidInput("n_trees must be positive".into()));
        }
        if self.mtry_grid.is_empty() || self.mtry_grid.contains(&0) {
            return Err(LampError::InvalidInput("mtry_grid needs positive entries".into()));
        }
        if self.min_node_grid.is_empty() || self.min_node_grid.contains(&0) {
            return Err(LampError::InvalidInput("min_node_grid needs positive entries".into()));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(LampError::InvalidInput(format!(
                "sample_fraction must lie in (0, 1], got {}",
                self.sample_fraction
            )));
        }
        Ok(())
    }
}

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
    leaf_start: u32,
    leaf_len: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    /// In-bag targets of every leaf, addressed by `leaf_start..leaf_start + leaf_len`.
    leaf_values: Vec<f64>,
}

impl Tree {
    fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut k = 0usize;
        loop {
            let node = &self.nodes[k];
            if node.feature == LEAF {
                return node;
            }
            k = if row[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.leaf_for(row).value
    }

    fn leaf_samples(&self, row: &[f64]) -> &[f64] {
        let n = self.leaf_for(row);
        &self.leaf_values[n.leaf_start as usize..(n.leaf_start + n.leaf_len) as usize]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    targets: &'a [f64],
    mtry: usize,
    min_node: usize,
    nodes: Vec<Node>,
    leaf_values: Vec<f64>,
    scratch: Vec<(f64, f64)>,
    features: Vec<usize>,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> u32 {
        let start = self.leaf_values.len() as u32;
        let mut sum = 0.0;
        for &i in idx {
            sum += self.targets[i];
            self.leaf_values.push(self.targets[i]);
        }
        self.nodes.push(Node {
            feature: LEAF,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: sum / idx.len() as f64,
            leaf_start: start,
            leaf_len: idx.len() as u32,
        });
        (self.nodes.len() - 1) as u32
    }

    /// Best variance-reducing split among `mtry` random features, if any.
    fn best_split<R: Rng>(&mut self, idx: &[usize], rng: &mut R) -> Option<(usize, f64)> {
        let n = idx.len();
        let p = self.features.len();
        self.features.partial_shuffle(rng, self.mtry.min(p));
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..self.mtry.min(p) {
            let feature = self.features[f];
            let col = &self.columns[feature];
            self.scratch.clear();
            self.scratch
                .extend(idx.iter().map(|&i| (col[i], self.targets[i])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total: f64 = self.scratch.iter().map(|v| v.1).sum();
            let mut left = 0.0;
            for k in 1..n {
                left += self.scratch[k - 1].1;
                if k < self.min_node || n - k < self.min_node {
                    continue;
                }
                let (xl, xr) = (self.scratch[k - 1].0, self.scratch[k].0);
                if xl >= xr {
                    continue;
                }
                let right = total - left;
                let score = left * left / k as f64 + right * right / (n - k) as f64;
                if best.is_none_or(|b| score > b.0) {
                    let mut threshold = 0.5 * (xl + xr);
                    if threshold >= xr {
                        threshold = xl;
                    }
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn build<R: Rng>(&mut self, idx: &mut [usize], rng: &mut R) -> u32 {
        let n = idx.len();
        let first = self.targets[idx[0]];
        let constant = idx.iter().all(|&i| self.targets[i] == first);
        if n < 2 * self.min_node || constant {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx, rng) else {
            return self.leaf(idx);
        };
        let col = &self.columns[feature];
        let mut split = 0;
        for k in 0..n {
            if col[idx[k]] <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let me = self.nodes.len();
        self.nodes.push(Node {
            feature: feature as u32,
            threshold,
            left: 0,
            right: 0,
            value: 0.0,
            leaf_start: 0,
            leaf_len: 0,
        });
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, rng);
        let right = self.build(r, rng);
        self.nodes[me].left = left;
        self.nodes[me].right = right;
        me as u32
    }
}

fn grow_tree(
    columns: &[Vec<f64>],
    targets: &[f64],
    mtry: usize,
    min_node: usize,
    sample_fraction: f64,
    replace: bool,
    seed: u64,
) -> (Tree, Vec<bool>) {
    let n = targets.len();
    let mut rng = rng_from_seed(seed);
    let mut in_bag = vec![false; n];
    let mut idx: Vec<usize> = if replace {
        let m = ((sample_fraction * n as f64).round() as usize).max(1);
        (0..m).map(|_| rng.random_range(0..n)).collect()
    } else if sample_fraction < 1.0 {
        let m = ((sample_fraction * n as f64).round() as usize).max(1);
        rand::seq::index::sample(&mut rng, n, m).into_vec()
    } else {
        (0..n).collect()
    };
    for &i in &idx {
        in_bag[i] = true;
    }
    let mut builder = TreeBuilder {
        columns,
        targets,
        mtry,
        min_node,
        nodes: Vec::new(),
        leaf_values: Vec::new(),
        scratch: Vec::with_capacity(idx.len()),
        features: (0..columns.len()).collect(),
    };
    builder.build(&mut idx, &mut rng);
    (
        Tree {
            nodes: builder.nodes,
            leaf_values: builder.leaf_values,
        },
        in_bag,
    )
}

/// Out-of-bag score of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub mtry: usize,
    pub min_node: usize,
    /// Out-of-bag mean squared error (in-sample when no row is out of bag).
    pub oob_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    pub mtry: usize,
    pub min_node: usize,
    pub oob_mse: f64,
    pub grid: Vec<GridScore>,
}

fn fit_one(
    columns: &[Vec<f64>],
    targets: &[f64],
    cfg: &ForestConfig,
    mtry: usize,
    min_node: usize,
    seed: u64,
) -> (Vec<Tree>, f64) {
    let n = targets.len();
    let grown = par_map(cfg.n_trees, |t| {
        grow_tree(
            columns,
            targets,
            mtry,
            min_node,
            cfg.sample_fraction,
            cfg.replace,
            derive_seed(seed, t as u64),
        )
    });
    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0u32; n];
    let mut row = vec![0.0; columns.len()];
    for (tree, in_bag) in &grown {
        for i in 0..n {
            if in_bag[i] {
                continue;
            }
            for (j, c) in columns.iter().enumerate() {
                row[j] = c[i];
            }
            oob_sum[i] += tree.predict_row(&row);
            oob_count[i] += 1;
        }
    }
    let trees: Vec<Tree> = grown.into_iter().map(|(t, _)| t).collect();
    let (mut se, mut m) = (0.0, 0usize);
    for i in 0..n {
        if oob_count[i] > 0 {
            let e = targets[i] - oob_sum[i] / oob_count[i] as f64;
            se += e * e;
            m += 1;
        }
    }
    let mse = if m > 0 {
        se / m as f64
    } else {
        // Nothing out of bag: fall back to the training error.
        (0..n)
            .map(|i| {
                for (j, c) in columns.iter().enumerate() {
                    row[j] = c[i];
                }
                let p = trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / trees.len() as f64;
                (targets[i] - p).powi(2)
            })
            .sum::<f64>()
            / n as f64
    };
    (trees, mse)
}

/// Fits a forest for every `(mtry, min_node)` grid point and keeps the one
/// with the lowest out-of-bag error. All grid points share the same bootstrap
/// samples.
pub fn forest_fit<R: Rng + ?Sized>(
    features: &Design,
    targets: &[f64],
    cfg: &ForestConfig,
    rng: &mut R,
) -> Result<Forest> {
    cfg.validate()?;
    let n = targets.len();
    if features.nrows() != n {
        return Err(LampError::LengthMismatch {
            what: "targets",
            expected: features.nrows(),
            found: n,
        });
    }
    let p = features.ncols();
    if p == 0 {
        return Err(LampError::InvalidInput("forest needs at least one feature".into()));
    }
    let smallest = *cfg.min_node_grid.iter().min().expect("validated non-empty");
    if n < 2 * smallest {
        return Err(LampError::InvalidInput(format!(
            "forest needs at least {} samples, got {n}",
            2 * smallest
        )));
    }
    let columns: Vec<Vec<f64>> = (0..p).map(|j| features.column(j)).collect();
    let mut mtrys: Vec<usize> = cfg.mtry_grid.iter().map(|&m| m.min(p)).collect();
    mtrys.dedup();
    let seed = rng.random::<u64>();

    let mut best: Option<(Vec<Tree>, usize, usize, f64)> = None;
    let mut grid = Vec::new();
    for &mtry in &mtrys {
        for &min_node in &cfg.min_node_grid {
            if grid
                .iter()
                .any(|g: &GridScore| g.mtry == mtry && g.min_node == min_node)
            {
                continue;
            }
            let (trees, mse) = fit_one(&columns, targets, cfg, mtry, min_node, seed);
            grid.push(GridScore {
                mtry,
                min_node,
                oob_mse: mse,
            });
            if best.as_ref().is_none_or(|b| mse < b.3) {
                best = Some((trees, mtry, min_node, mse));
            }
        }
    }
    let (trees, mtry, min_node, oob_mse) = best.expect("grid is non-empty");
    Ok(Forest {
        feature_names: features.names().to_vec(),
        trees,
        mtry,
        min_node,
        oob_mse,
        grid,
    })
}

impl Forest {
    fn check(&self, features: &Design) -> Result<()> {
        if features.ncols() != self.feature_names.len() {
            return Err(LampError::InvalidInput(format!(
                "forest expects {} features, got {}",
                self.feature_names.len(),
                features.ncols()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, features: &Design) -> Result<Vec<f64>> {
        forest_predict(self, features)
    }

    /// One draw per row from the pooled leaf distribution: a uniformly
    /// chosen tree, then a uniformly chosen in-bag target in its leaf.
    pub fn quantile_sample<R: Rng + ?Sized>(&self, features: &Design, rng: &mut R) -> Result<Vec<f64>> {
        self.check(features)?;
        Ok((0..features.nrows())
            .map(|i| {
                let tree = &self.trees[rng.random_range(0..self.trees.len())];
                let leaf = tree.leaf_samples(features.row(i));
                leaf[rng.random_range(0..leaf.len())]
            })
            .collect())
    }
}

pub fn forest_predict(forest: &Forest, features: &Design) -> Result<Vec<f64>> {
    forest.check(features)?;
    let t = forest.trees.len() as f64;
    Ok(par_map(features.nrows(), |i| {
        let row = features.row(i);
        forest.trees.iter().map(|tr| tr.predict_row(row)).sum::<f64>() / t
    }))
}

pub fn forest_quantile_sample<R: Rng + ?Sized>(
    forest: &Forest,
    features: &Design,
    rng: &mut R,
) -> Result<Vec<f64>> {
    forest.quantile_sample(features, rng)
}
