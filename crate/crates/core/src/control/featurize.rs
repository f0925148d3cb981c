use crate::image::{self, Image};
use crate::memory::VisualFeature;

pub const FEATURE_SIDE: usize = 16;
pub const FEATURE_DIM: usize = FEATURE_SIDE * FEATURE_SIDE;

/// Mean-centred, unit-norm 16x16 grayscale thumbnail. A constant image has
/// no direction and maps to the first basis vector.
pub fn featurize(observation: &Image) -> VisualFeature {
    let pixels = image::preprocess(observation, FEATURE_SIDE, FEATURE_SIDE)
        .expect("validated images are never empty");
    let mean = pixels.iter().sum::<f64>() / pixels.len() as f64;
    let centered: Vec<f64> = pixels.iter().map(|p| p - mean).collect();
    let norm = centered.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return VisualFeature::basis(FEATURE_DIM, 0);
    }
    VisualFeature::from_normalized(centered.into_iter().map(|d| d / norm).collect())
        .expect("a normalized finite vector has unit norm")
}
