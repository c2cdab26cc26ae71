//! Versioned JSON model files and atomic file output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LampError, Result};
use crate::nonlinear::{AugmentedModel, RandomForestLearner};

pub const MODEL_FORMAT: &str = "lamp-model";
pub const MODEL_VERSION: u32 = 1;

pub type SavedModel = AugmentedModel<RandomForestLearner>;

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a SavedModel,
}

#[derive(Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: SavedModel,
}

/// Writes through `f` into a temporary file next to `path`, then renames it
/// into place, so a failure never leaves a partial file behind.
pub fn write_atomic<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        f(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| LampError::Io(e.error))?;
    Ok(())
}

pub fn model_to_json(model: &SavedModel) -> Result<String> {
    Ok(serde_json::to_string(&ModelFileRef {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        model,
    })?)
}

pub fn model_from_json(s: &str) -> Result<SavedModel> {
    check(serde_json::from_str(s)?)
}

fn check(file: ModelFile) -> Result<SavedModel> {
    if file.format != MODEL_FORMAT {
        return Err(LampError::ModelFormat(format!("unexpected format `{}`", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(LampError::ModelFormat(format!(
            "unsupported version {} (expected {MODEL_VERSION})",
            file.version
        )));
    }
    Ok(file.model)
}

pub fn save_model(path: &Path, model: &SavedModel) -> Result<()> {
    let json = model_to_json(model)?;
    write_atomic(path, |w| {
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let file: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    check(file)
}
