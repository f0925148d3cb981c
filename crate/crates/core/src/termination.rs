//! Task-completion detection by Pearson similarity against stored views of
//! past successes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{self, Image};

/// Sum of squared deviations per sample below which a vector is constant.
const CONSTANT_TOLERANCE: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TermParams {
    pub tau_term: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for TermParams {
    fn default() -> Self {
        Self {
            tau_term: 0.95,
            width: 64,
            height: 64,
        }
    }
}

impl TermParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau_term) {
            return Err(Error::config(format!(
                "termination.tau_term must lie in [0, 1], got {}",
                self.tau_term
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("termination.width and termination.height must be positive"));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermDecision {
    pub s_max: f64,
    pub best_match: Option<usize>,
    pub stop: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx") {
        // SAFETY: the CPU supports AVX.
        return unsafe { dot_avx(x, y) };
    }
    dot_lanes(x, y)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn dot_avx(x: &[f64], y: &[f64]) -> f64 {
    dot_lanes(x, y)
}

/// Independent partial sums let the loop vectorize; lane order is fixed, so
/// every instruction set gives the same bits.
#[inline(always)]
fn dot_lanes(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (xc, xr) = x.as_chunks::<8>();
    let (yc, yr) = y.as_chunks::<8>();
    for (a, b) in xc.iter().zip(yc) {
        for k in 0..8 {
            acc[k] += a[k] * b[k];
        }
    }
    let tail: f64 = xr.iter().zip(yr).map(|(a, b)| a * b).sum();
    acc.iter().sum::<f64>() + tail
}

/// Pixels per block of the coarse summary used to bound correlations.
const BLOCK: usize = 4;
/// Covers the f32 rounding of the coarse summary in [`Direction::bound`].
const BOUND_SLACK: f64 = 1e-6;

/// Centered unit-norm pixel direction plus a coarse summary: the projection
/// onto per-block means, scaled so that coarse dot products equal projected
/// ones, and the norm of what the projection leaves out. Splitting both
/// vectors this way bounds their dot product from above by Cauchy-Schwarz.
#[derive(Debug, Clone, PartialEq)]
struct Direction {
    unit: Vec<f64>,
    coarse: Vec<f32>,
    residual: f64,
}

impl Direction {
    fn new(unit: Vec<f64>) -> Self {
        let mut coarse = Vec::with_capacity(unit.len().div_ceil(BLOCK));
        let mut rr = 0.0;
        for block in unit.chunks(BLOCK) {
            let sum: f64 = block.iter().sum();
            let m = sum / block.len() as f64;
            rr += block.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
            coarse.push((sum / (block.len() as f64).sqrt()) as f32);
        }
        Self {
            unit,
            coarse,
            residual: rr.sqrt(),
        }
    }

    /// Upper bound on `dot(self.unit, other.unit)`.
    fn bound(&self, other: &Direction) -> f64 {
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx") {
            // SAFETY: the CPU supports AVX.
            let coarse = unsafe { coarse_dot_avx(&self.coarse, &other.coarse) };
            return coarse + self.residual * other.residual + BOUND_SLACK;
        }
        coarse_dot(&self.coarse, &other.coarse) + self.residual * other.residual + BOUND_SLACK
    }
}

#[inline(always)]
fn coarse_dot(x: &[f32], y: &[f32]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (xc, xr) = x.as_chunks::<8>();
    let (yc, yr) = y.as_chunks::<8>();
    for (a, b) in xc.iter().zip(yc) {
        for k in 0..8 {
            acc[k] += f64::from(a[k]) * f64::from(b[k]);
        }
    }
    let tail: f64 = xr.iter().zip(yr).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
    acc.iter().sum::<f64>() + tail
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn coarse_dot_avx(x: &[f32], y: &[f32]) -> f64 {
    coarse_dot(x, y)
}

/// A pixel vector reduced to what the correlation needs: its mean and, when
/// it is not constant, its centered unit-norm direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedImage {
    mean: f64,
    direction: Option<Direction>,
}

impl PreparedImage {
    pub fn new(pixels: &[f64]) -> Self {
        let mu = mean(pixels);
        let centered: Vec<f64> = pixels.iter().map(|x| x - mu).collect();
        let sxx: f64 = centered.iter().map(|d| d * d).sum();
        let direction = if sxx <= CONSTANT_TOLERANCE * pixels.len() as f64 {
            None
        } else {
            let norm = sxx.sqrt();
            Some(Direction::new(centered.into_iter().map(|d| d / norm).collect()))
        };
        Self { mean: mu, direction }
    }

    pub fn len(&self) -> Option<usize> {
        self.direction.as_ref().map(|d| d.unit.len())
    }

    pub fn is_constant(&self) -> bool {
        self.direction.is_none()
    }

    /// `(r + 1) / 2` with the constant-vector conventions of
    /// [`pearson_similarity`].
    pub fn similarity(&self, other: &PreparedImage) -> f64 {
        match (&self.direction, &other.direction) {
            (Some(x), Some(y)) => {
                let r = dot(&x.unit, &y.unit);
                // A unit vector dotted with itself can round just below one.
                if r > 1.0 - 1e-9 && x.unit == y.unit {
                    return 1.0;
                }
                (r.clamp(-1.0, 1.0) + 1.0) / 2.0
            }
            (None, None) if (self.mean - other.mean).abs() <= 1e-12 => 1.0,
            _ => 0.5,
        }
    }

    /// Upper bound on [`similarity`](Self::similarity) that reads only the
    /// coarse summaries.
    fn similarity_bound(&self, other: &PreparedImage) -> f64 {
        match (&self.direction, &other.direction) {
            (Some(x), Some(y)) => (x.bound(y).min(1.0) + 1.0) / 2.0,
            _ => self.similarity(other),
        }
    }
}

/// Pearson correlation mapped to `[0, 1]` as `(r + 1) / 2`.
///
/// Constant vectors: two equal constants score 1, two different constants
/// score 0.5, and one constant against a varying vector scores 0.5.
pub fn pearson_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::validation(format!(
            "pixel vectors differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Length {
            op: "pearson_similarity",
            needed: 2,
            got: x.len(),
        });
    }
    Ok(PreparedImage::new(x).similarity(&PreparedImage::new(y)))
}

/// Best match of `current` against the stored views. Ties go to the
/// earliest view.
///
/// Candidates are visited in order of a cheap upper bound and the scan stops
/// once no remaining bound can beat the best exact score, so the result is
/// the same as scoring every view.
pub fn decide_prepared<'a, I>(current: &PreparedImage, repository: I, params: &TermParams) -> TermDecision
where
    I: IntoIterator<Item = &'a PreparedImage>,
{
    let stored: Vec<&PreparedImage> = repository.into_iter().collect();
    let mut order: Vec<(f64, usize)> = stored
        .iter()
        .enumerate()
        .map(|(i, s)| (current.similarity_bound(s), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut best: Option<(usize, f64)> = None;
    for (bound, i) in order {
        if best.is_some_and(|(_, b)| bound < b) {
            break;
        }
        let s = current.similarity(stored[i]);
        if best.is_none_or(|(j, b)| s > b || (s == b && i < j)) {
            best = Some((i, s));
        }
    }
    match best {
        None => TermDecision {
            s_max: 0.0,
            best_match: None,
            stop: false,
        },
        Some((i, s)) => TermDecision {
            s_max: s,
            best_match: Some(i),
            stop: s >= params.tau_term,
        },
    }
}

pub fn prepare(image: &Image, params: &TermParams) -> Result<PreparedImage> {
    Ok(PreparedImage::new(&image::preprocess(image, params.width, params.height)?))
}

pub fn decide<'a, I>(current: &Image, repository: I, params: &TermParams) -> Result<TermDecision>
where
    I: IntoIterator<Item = &'a PreparedImage>,
{
    let prepared = prepare(current, params)?;
    Ok(decide_prepared(&prepared, repository, params))
}
