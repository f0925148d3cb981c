//! Line-delimited store files.
//!
//! ```text
//! {"format":"sct-memory","version":1,"feature_len":256,"action_len":7,"image_width":64,"image_height":64}
//! {"kind":"entry","episode_id":"object:mixed/3","step_index":0,"feature":[...],"action":[...]}
//! {"kind":"image","episode_id":"object:mixed/3","pixels":[...]}
//! ```
//!
//! An empty file is an empty store.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Action, MemoryConfig, MemoryEntry, MemoryStore, SuccessImage, VisualFeature, ACTION_DIM};
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "sct-memory";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileHeader {
    pub format: String,
    pub version: u32,
    pub feature_len: usize,
    pub action_len: usize,
    pub image_width: usize,
    pub image_height: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Entry {
        episode_id: String,
        step_index: u64,
        feature: Vec<f64>,
        action: Vec<f64>,
    },
    Image {
        episode_id: String,
        pixels: Vec<f64>,
    },
}

pub fn save_to_string(store: &MemoryStore) -> Result<String> {
    let cfg = store.config();
    let header = FileHeader {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        feature_len: cfg.feature_dim,
        action_len: ACTION_DIM,
        image_width: cfg.image_width,
        image_height: cfg.image_height,
    };
    let mut out = to_line(&header)?;
    let snap = store.snapshot();
    for e in snap.entries() {
        out.push_str(&to_line(&Record::Entry {
            episode_id: e.episode_id.clone(),
            step_index: e.step_index,
            feature: e.feature.values().to_vec(),
            action: e.action.values().to_vec(),
        })?);
    }
    for img in snap.images() {
        out.push_str(&to_line(&Record::Image {
            episode_id: img.episode_id().to_owned(),
            pixels: img.pixels().to_vec(),
        })?);
    }
    Ok(out)
}

fn to_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value).map_err(|e| Error::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn save(store: &MemoryStore, path: impl AsRef<Path>) -> Result<()> {
    let text = save_to_string(store)?;
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.sync_all()?;
    Ok(())
}

/// Parses a store file into a store governed by `config`. The header's
/// dimensions must agree with the configuration.
pub fn load_from_str(text: &str, config: MemoryConfig) -> Result<MemoryStore> {
    let mut store = MemoryStore::new(config)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((idx, first)) = lines.next() else {
        return Ok(store);
    };
    let header: FileHeader =
        serde_json::from_str(first).map_err(|e| Error::parse(idx + 1, format!("bad header: {e}")))?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(Error::parse(
            idx + 1,
            format!("unsupported format {} v{}", header.format, header.version),
        ));
    }
    let cfg = store.config().clone();
    if header.feature_len != cfg.feature_dim {
        return Err(Error::config(format!(
            "store file has feature length {}, configuration expects {}",
            header.feature_len, cfg.feature_dim
        )));
    }
    if header.action_len != ACTION_DIM {
        return Err(Error::config(format!(
            "store file has action length {}, expected {ACTION_DIM}",
            header.action_len
        )));
    }
    if (header.image_width, header.image_height) != (cfg.image_width, cfg.image_height) {
        return Err(Error::config(format!(
            "store file has image resolution {}x{}, configuration expects {}x{}",
            header.image_width, header.image_height, cfg.image_width, cfg.image_height
        )));
    }

    let mut entries = Vec::new();
    let mut images = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let record: Record = serde_json::from_str(line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        let at_line = |e: Error| match e {
            Error::Validation(m) => Error::parse(lineno, m),
            other => other,
        };
        match record {
            Record::Entry {
                episode_id,
                step_index,
                feature,
                action,
            } => {
                if feature.len() != cfg.feature_dim {
                    return Err(Error::config(format!(
                        "line {lineno}: feature length {} differs from configured {}",
                        feature.len(),
                        cfg.feature_dim
                    )));
                }
                let entry = MemoryEntry {
                    feature: VisualFeature::from_normalized(feature).map_err(at_line)?,
                    action: Action::from_slice(&action).map_err(at_line)?,
                    episode_id,
                    step_index,
                };
                if !cfg.action_bounds.contains(&entry.action) {
                    return Err(Error::parse(lineno, "action violates the configured bounds"));
                }
                entries.push(entry);
            }
            Record::Image { episode_id, pixels } => {
                images.push(
                    SuccessImage::new(cfg.image_width, cfg.image_height, pixels, episode_id).map_err(at_line)?,
                );
            }
        }
    }
    store.push_raw(entries, images)?;
    Ok(store)
}

pub fn load(path: impl AsRef<Path>, config: MemoryConfig) -> Result<MemoryStore> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    load_from_str(&text, config).map_err(|e| e.with_path(path))
}
