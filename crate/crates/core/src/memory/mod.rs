//! Episodic memory of successful experience.
//!
//! Two banks share one store: `(visual feature, action)` entries used for
//! grasp correction, and terminal success images used for termination.
//! Both are bounded FIFO queues.

mod persist;
mod store;

pub use persist::{load, load_from_str, save, save_to_string, FileHeader};
pub use store::{MemoryConfig, MemoryStore, SharedStore, Snapshot};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::termination::PreparedImage;

pub const ACTION_DIM: usize = 7;

/// Translation deltas, rotation deltas, gripper command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; ACTION_DIM]", into = "[f64; ACTION_DIM]")]
pub struct Action([f64; ACTION_DIM]);

impl Action {
    pub const GRIP: usize = 6;

    pub fn new(values: [f64; ACTION_DIM]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("action components must be finite"));
        }
        Ok(Self(values))
    }

    pub fn zero() -> Self {
        Self([0.0; ACTION_DIM])
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; ACTION_DIM] = values.try_into().map_err(|_| {
            Error::validation(format!("action has {} components, expected {ACTION_DIM}", values.len()))
        })?;
        Self::new(arr)
    }

    pub fn values(&self) -> &[f64; ACTION_DIM] {
        &self.0
    }

    pub fn translation(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn rotation(&self) -> [f64; 3] {
        [self.0[3], self.0[4], self.0[5]]
    }

    pub fn grip(&self) -> f64 {
        self.0[Self::GRIP]
    }

    /// Raw constructor for sums that may leave the bounds; callers clip.
    pub(crate) fn unbounded(values: [f64; ACTION_DIM]) -> Self {
        Self(values)
    }
}

impl TryFrom<[f64; ACTION_DIM]> for Action {
    type Error = Error;

    fn try_from(values: [f64; ACTION_DIM]) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Action> for [f64; ACTION_DIM] {
    fn from(a: Action) -> Self {
        a.0
    }
}

/// Per-dimension closed interval `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionBounds {
    pub low: [f64; ACTION_DIM],
    pub high: [f64; ACTION_DIM],
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            low: [-1.0; ACTION_DIM],
            high: [1.0; ACTION_DIM],
        }
    }
}

impl ActionBounds {
    pub fn validate(&self) -> Result<()> {
        for d in 0..ACTION_DIM {
            if !(self.low[d].is_finite() && self.high[d].is_finite() && self.low[d] < self.high[d]) {
                return Err(Error::config(format!(
                    "action bound {d} must satisfy low < high, got [{}, {}]",
                    self.low[d], self.high[d]
                )));
            }
        }
        Ok(())
    }

    pub fn clip(&self, action: &Action) -> Action {
        let mut out = action.0;
        for (d, v) in out.iter_mut().enumerate() {
            *v = v.clamp(self.low[d], self.high[d]);
        }
        Action(out)
    }

    pub fn contains(&self, action: &Action) -> bool {
        action.0.iter().enumerate().all(|(d, v)| *v >= self.low[d] && *v <= self.high[d])
    }
}

/// Unit-norm visual descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct VisualFeature(Vec<f64>);

impl VisualFeature {
    /// Normalizes to unit L2 norm. The zero vector is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("feature must be a nonempty finite vector"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::validation("feature is the zero vector"));
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    /// Accepts an already-normalized vector verbatim, so stored features
    /// reload bit-for-bit.
    pub fn from_normalized(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("feature must be a nonempty finite vector"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::validation(format!("feature norm is {norm}, expected 1")));
        }
        Ok(Self(values))
    }

    /// Unit basis vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn squared_distance(&self, other: &VisualFeature) -> f64 {
        squared_distance(&self.0, &other.0)
    }
}

impl TryFrom<Vec<f64>> for VisualFeature {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::from_normalized(values)
    }
}

impl From<VisualFeature> for Vec<f64> {
    fn from(f: VisualFeature) -> Self {
        f.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub feature: VisualFeature,
    pub action: Action,
    pub episode_id: String,
    pub step_index: u64,
}

/// Grayscale terminal view of a successful episode at the termination
/// resolution, with its correlation-ready form cached.
#[derive(Debug, Clone)]
pub struct SuccessImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    episode_id: String,
    prepared: Arc<PreparedImage>,
}

impl PartialEq for SuccessImage {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.pixels == other.pixels
            && self.episode_id == other.episode_id
    }
}

impl SuccessImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>, episode_id: impl Into<String>) -> Result<Self> {
        if pixels.len() != width * height || pixels.is_empty() {
            return Err(Error::validation(format!(
                "success image holds {} pixels, expected {width}x{height}",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::validation("success image intensities must lie in [0, 1]"));
        }
        let prepared = Arc::new(PreparedImage::new(&pixels));
        Ok(Self {
            width,
            height,
            pixels,
            episode_id: episode_id.into(),
            prepared,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn episode_id(&self) -> &str {
        &self.episode_id
    }

    pub fn prepared(&self) -> &PreparedImage {
        &self.prepared
    }
}


/// Squared Euclidean distance between equal-length slices.
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx") {
        // Same per-lane operation order as the portable loop, so results are
        // bit-identical.
        // SAFETY: the CPU supports AVX.
        return unsafe { squared_distance_avx(a, b) };
    }
    squared_distance_lanes(a, b)
}

#[inline(always)]
fn squared_distance_lanes(a: &[f64], b: &[f64]) -> f64 {
    let (a, a_tail) = a.as_chunks::<8>();
    let (b, b_tail) = b.as_chunks::<8>();
    let mut acc = [0.0; 8];
    for (x, y) in a.iter().zip(b) {
        for k in 0..8 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    let tail: f64 = a_tail.iter().zip(b_tail).map(|(x, y)| (x - y) * (x - y)).sum();
    acc.iter().sum::<f64>() + tail
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn squared_distance_avx(a: &[f64], b: &[f64]) -> f64 {
    squared_distance_lanes(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_normalizes() {
        let f = VisualFeature::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(f.values(), &[0.6, 0.8]);
        assert!(VisualFeature::new(vec![0.0, 0.0]).is_err());
        assert!(VisualFeature::from_normalized(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn clip_and_contains() {
        let b = ActionBounds::default();
        let a = Action::new([2.0, -3.0, 0.5, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(!b.contains(&a));
        let c = b.clip(&a);
        assert_eq!(c.values(), &[1.0, -1.0, 0.5, 0.0, 0.0, 0.0, 1.0]);
        assert!(b.contains(&c));
    }

    #[test]
    fn bounds_validate() {
        let mut b = ActionBounds::default();
        b.low[3] = 1.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn success_image_checks() {
        assert!(SuccessImage::new(2, 2, vec![0.0; 3], "e").is_err());
        assert!(SuccessImage::new(2, 2, vec![0.0, 0.5, 1.0, 1.5], "e").is_err());
        assert!(SuccessImage::new(2, 2, vec![0.0, 0.5, 1.0, 0.2], "e").is_ok());
    }
}
