use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::{squared_distance, ActionBounds, MemoryEntry, SuccessImage, VisualFeature};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub feature_dim: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub entry_capacity: usize,
    pub image_capacity: usize,
    pub action_bounds: ActionBounds,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            feature_dim: 256,
            image_width: 64,
            image_height: 64,
            entry_capacity: 10_000,
            image_capacity: 500,
            action_bounds: ActionBounds::default(),
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::config("memory.feature_dim must be positive"));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::config("memory image resolution must be positive"));
        }
        if self.entry_capacity == 0 || self.image_capacity == 0 {
            return Err(Error::config("memory capacities must be positive"));
        }
        self.action_bounds.validate()
    }

    fn check_entry(&self, e: &MemoryEntry) -> Result<()> {
        if e.feature.len() != self.feature_dim {
            return Err(Error::validation(format!(
                "entry feature has length {}, store expects {}",
                e.feature.len(),
                self.feature_dim
            )));
        }
        if !self.action_bounds.contains(&e.action) {
            return Err(Error::validation(format!(
                "entry action {:?} violates the action bounds",
                e.action.values()
            )));
        }
        Ok(())
    }

    fn check_image(&self, img: &SuccessImage) -> Result<()> {
        if img.width() != self.image_width || img.height() != self.image_height {
            return Err(Error::validation(format!(
                "success image is {}x{}, store expects {}x{}",
                img.width(),
                img.height(),
                self.image_width,
                self.image_height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Banks {
    entries: Vec<Arc<MemoryEntry>>,
    /// Entry features back to back, for cache-friendly kernel scans.
    features: Vec<f64>,
    images: Vec<Arc<SuccessImage>>,
}

impl Banks {
    fn extend_entries(&mut self, entries: Vec<MemoryEntry>) {
        for e in entries {
            self.features.extend_from_slice(e.feature.values());
            self.entries.push(Arc::new(e));
        }
    }
}

/// Bounded action and image banks with copy-on-write snapshots.
#[derive(Debug, Clone)]
pub struct MemoryStore {
    config: MemoryConfig,
    banks: Arc<Banks>,
}

impl PartialEq for MemoryStore {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.banks == other.banks
    }
}

/// Immutable view of a store at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    banks: Arc<Banks>,
}

impl Snapshot {
    pub fn entries(&self) -> &[Arc<MemoryEntry>] {
        &self.banks.entries
    }

    pub fn images(&self) -> &[Arc<SuccessImage>] {
        &self.banks.images
    }

    /// Same values as [`crate::perturb::rbf_weights`] over [`Self::entries`].
    pub fn kernel_weights(&self, current: &VisualFeature, gamma: f64) -> Result<Vec<f64>> {
        if !(gamma > 0.0) {
            return Err(Error::validation(format!("gamma must be positive, got {gamma}")));
        }
        let n = self.banks.entries.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let dim = self.banks.features.len() / n;
        if dim != current.len() {
            return Err(Error::validation(format!(
                "feature length {dim} does not match current feature length {}",
                current.len()
            )));
        }
        Ok(self
            .banks
            .features
            .chunks_exact(dim)
            .map(|row| (-gamma * squared_distance(current.values(), row)).exp())
            .collect())
    }
}

impl MemoryStore {
    pub fn new(config: MemoryConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            banks: Arc::default(),
        })
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn entry_count(&self) -> usize {
        self.banks.entries.len()
    }

    pub fn image_count(&self) -> usize {
        self.banks.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entry_count() == 0 && self.image_count() == 0
    }

    /// Appends one successful episode. Validates everything before touching
    /// the banks, so a rejected record leaves the store unchanged.
    pub fn record_success(&mut self, entries: Vec<MemoryEntry>, terminal: SuccessImage) -> Result<()> {
        if entries.is_empty() {
            return Err(Error::validation("record_success needs at least one entry"));
        }
        for e in &entries {
            self.config.check_entry(e)?;
        }
        self.config.check_image(&terminal)?;
        self.push(entries, Some(terminal));
        Ok(())
    }

    /// Appends entries and images without the pairing requirement; used by
    /// the loader.
    pub(crate) fn push_raw(&mut self, entries: Vec<MemoryEntry>, images: Vec<SuccessImage>) -> Result<()> {
        for e in &entries {
            self.config.check_entry(e)?;
        }
        for img in &images {
            self.config.check_image(img)?;
        }
        let banks = Arc::make_mut(&mut self.banks);
        banks.extend_entries(entries);
        banks.images.extend(images.into_iter().map(Arc::new));
        self.evict();
        Ok(())
    }

    fn push(&mut self, entries: Vec<MemoryEntry>, terminal: Option<SuccessImage>) {
        let banks = Arc::make_mut(&mut self.banks);
        banks.extend_entries(entries);
        banks.images.extend(terminal.map(Arc::new));
        self.evict();
    }

    fn evict(&mut self) {
        let (ec, ic) = (self.config.entry_capacity, self.config.image_capacity);
        let banks = Arc::make_mut(&mut self.banks);
        if banks.entries.len() > ec {
            let excess = banks.entries.len() - ec;
            let dim = banks.features.len() / banks.entries.len();
            banks.entries.drain(..excess);
            banks.features.drain(..excess * dim);
        }
        if banks.images.len() > ic {
            let excess = banks.images.len() - ic;
            banks.images.drain(..excess);
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            banks: Arc::clone(&self.banks),
        }
    }

    pub fn entries_for<'a>(&'a self, episode_id: &'a str) -> impl Iterator<Item = &'a MemoryEntry> + 'a {
        self.banks
            .entries
            .iter()
            .map(AsRef::as_ref)
            .filter(move |e| e.episode_id == episode_id)
    }

    pub fn clear(&mut self) {
        self.banks = Arc::default();
    }
}

/// A store shared between one writer and any number of readers.
///
/// `snapshot` clones an `Arc` under a read lock, so readers always see the
/// state between two completed records.
#[derive(Debug, Clone)]
pub struct SharedStore {
    inner: Arc<RwLock<MemoryStore>>,
}

impl SharedStore {
    pub fn new(store: MemoryStore) -> Self {
        Self {
            inner: Arc::new(RwLock::new(store)),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        self.read(|s| s.snapshot())
    }

    pub fn read<T>(&self, f: impl FnOnce(&MemoryStore) -> T) -> T {
        let guard = self.inner.read().unwrap_or_else(|p| p.into_inner());
        f(&guard)
    }

    pub fn write<T>(&self, f: impl FnOnce(&mut MemoryStore) -> T) -> T {
        let mut guard = self.inner.write().unwrap_or_else(|p| p.into_inner());
        f(&mut guard)
    }

    pub fn record_success(&self, entries: Vec<MemoryEntry>, terminal: SuccessImage) -> Result<()> {
        self.write(|s| s.record_success(entries, terminal))
    }

    pub fn replace(&self, store: MemoryStore) {
        self.write(|s| *s = store);
    }

    pub fn to_store(&self) -> MemoryStore {
        self.read(Clone::clone)
    }
}
