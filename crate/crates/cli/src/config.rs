//! `key = value` run configuration. Defaults, then the file, then flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use lamp_core::train::Tau2Rule;
use lamp_core::uncertainty::ScaleVariance;
use lamp_core::{ForestConfig, KernelKind, TrainConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub forest: ForestConfig,
    pub nonlinear: bool,
    /// Append site coordinates to the residual learner's features.
    pub append_coords: bool,
    pub coords: Vec<String>,
    pub target: String,
    /// Covariate columns; every remaining numeric column when empty.
    pub covariates: Vec<String>,
    pub draws: usize,
    pub level: f64,
    pub scale_variance: ScaleVariance,
    pub bins: usize,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            forest: ForestConfig::default(),
            nonlinear: false,
            append_coords: true,
            coords: vec!["s1".into(), "s2".into()],
            target: "y".into(),
            covariates: Vec::new(),
            draws: 0,
            level: 0.9,
            scale_variance: ScaleVariance::default(),
            bins: 40,
            model: None,
            output: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::usage(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

pub fn parse_names(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::usage(format!("invalid value `{value}` for `{key}` (expected true or false)"))),
    }
}

impl RunConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let t = &mut self.train;
        let f = &mut self.forest;
        match key {
            "phi" => t.phi = parse(key, value)?,
            "delta" => t.delta = parse(key, value)?,
            "q_max" => t.q_max = parse(key, value)?,
            "h1" => t.h1 = Some(parse(key, value)?),
            "w_threshold" => t.w_threshold = parse(key, value)?,
            "c_factor" => t.c_factor = parse(key, value)?,
            "max_resolutions" => t.max_resolutions = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "kernel" => t.kernel = KernelKind::from_str(value).map_err(|e| CliError::usage(e.to_string()))?,
            "tau2_rule" => t.tau2_rule = Tau2Rule::from_str(value).map_err(|e| CliError::usage(e.to_string()))?,
            "n_trees" => f.n_trees = parse(key, value)?,
            "mtry_grid" => f.mtry_grid = parse_list(key, value)?,
            "min_node_grid" => f.min_node_grid = parse_list(key, value)?,
            "sample_fraction" => f.sample_fraction = parse(key, value)?,
            "replace" => f.replace = parse_bool(key, value)?,
            "nonlinear" => self.nonlinear = parse_bool(key, value)?,
            "append_coords" => self.append_coords = parse_bool(key, value)?,
            "coords" => self.coords = parse_names(value),
            "target" => self.target = value.to_string(),
            "covariates" => self.covariates = parse_names(value),
            "draws" | "B" => self.draws = parse(key, value)?,
            "level" => self.level = parse(key, value)?,
            "scale_variance" => {
                self.scale_variance = ScaleVariance::from_str(value).map_err(|e| CliError::usage(e.to_string()))?
            }
            "bins" => self.bins = parse(key, value)?,
            "model" => self.model = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            _ => return Err(CliError::usage(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> CliResult<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("{origin}:{}: expected `key = value`", no + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::usage(format!("{origin}:{}: {}", no + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> CliResult<()> {
        let invalid = |e: lamp_core::LampError| CliError::usage(e.to_string());
        self.train.validate().map_err(invalid)?;
        self.forest.validate().map_err(invalid)?;
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::usage(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.draws == 1 {
            return Err(CliError::usage("draws must be 0 or at least 2"));
        }
        if !(1..=2).contains(&self.coords.len()) {
            return Err(CliError::usage(format!("need 1 or 2 coordinate columns, got {}", self.coords.len())));
        }
        if self.bins < 2 {
            return Err(CliError::usage("bins must be at least 2"));
        }
        Ok(())
    }
}
