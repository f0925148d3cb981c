//! Deterministic table-top pick-and-place harness with scripted policies
//! that miss grasps by a constant offset or never retreat after placing.

mod policy;
mod task;
mod world;

pub use policy::{PolicyKind, PolicySpec, ScriptedPolicy, HOVER_HEIGHT, RETREAT_HEIGHT, TRAVEL_HEIGHT};
pub use task::{
    canonical_layout, canonical_task, layouts, make_task, Family, PolicyChoice, TaskId, BIAS_MAX, BIAS_MIN,
};
pub use world::{
    Layout, SimParams, SimWorld, CANVAS, DT, METERS_PER_PIXEL, ROTATION_SCALE, TRANSLATION_SCALE, WORKSPACE_MAX,
    WORKSPACE_MIN,
};

use std::path::Path;

use crate::error::Result;
use crate::image::Image;

/// Writes a frame as a binary PGM for inspection.
pub fn export_pgm(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, image.to_pgm()?)?;
    Ok(())
}
