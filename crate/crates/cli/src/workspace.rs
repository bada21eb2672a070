//! Run directories.
//!
//! A workspace root holds `runs/<stamp>/` directories and a `LATEST` file
//! naming the newest one. Each run directory contains `manifest.json`,
//! `plan.json`, `prompts/`, `models/<id>/`, and later `tests.json`,
//! `triage.json`, `triage.md` and `stategraph.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use protomodel::harness::{GeneratedModel, Origin, SymbolMap};
use serde::Serialize;

pub const RUN_MARKER: &str = "manifest.json";

/// Claims a fresh run directory under `root` and points `LATEST` at it.
pub fn new_run(root: &Path) -> Result<PathBuf> {
    let runs = root.join("runs");
    fs::create_dir_all(&runs).with_context(|| format!("creating {}", runs.display()))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    for n in 0.. {
        let name = if n == 0 {
            stamp.clone()
        } else {
            format!("{stamp}-{n}")
        };
        let dir = runs.join(&name);
        match fs::create_dir(&dir) {
            Ok(()) => {
                fs::write(root.join("LATEST"), format!("runs/{name}\n"))?;
                return Ok(dir);
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}

/// A run directory itself, or the run named by a root's `LATEST`.
pub fn resolve_run(path: &Path) -> Result<PathBuf> {
    if path.join(RUN_MARKER).is_file() {
        return Ok(path.to_path_buf());
    }
    let latest = path.join("LATEST");
    let rel = fs::read_to_string(&latest).with_context(|| {
        format!(
            "{} is neither a run directory nor a workspace with LATEST",
            path.display()
        )
    })?;
    let dir = path.join(rel.trim());
    if !dir.join(RUN_MARKER).is_file() {
        bail!(
            "{} names {}, which is not a run directory",
            latest.display(),
            dir.display()
        );
    }
    Ok(dir)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize, serde::Deserialize)]
struct ModelMeta {
    sample_index: usize,
    provenance: Vec<(String, Origin)>,
}

pub fn save_model(run: &Path, m: &GeneratedModel) -> Result<()> {
    let dir = run.join("models").join(&m.model_id);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("model.c"), &m.program_text)?;
    write_json(&dir.join("symbols.json"), &m.symbol_map)?;
    write_json(
        &dir.join("model.json"),
        &ModelMeta {
            sample_index: m.sample_index,
            provenance: m.provenance.clone(),
        },
    )
}

/// Models of a run, in id order.
pub fn load_models(run: &Path) -> Result<Vec<GeneratedModel>> {
    let root = run.join("models");
    let mut ids: Vec<String> = fs::read_dir(&root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("model.c").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    ids.into_iter()
        .map(|id| {
            let dir = root.join(&id);
            let symbol_map: SymbolMap = read_json(&dir.join("symbols.json"))?;
            let meta: ModelMeta = read_json(&dir.join("model.json"))?;
            Ok(GeneratedModel {
                model_id: id,
                sample_index: meta.sample_index,
                program_text: fs::read_to_string(dir.join("model.c"))?,
                symbol_map,
                provenance: meta.provenance,
            })
        })
        .collect()
}
