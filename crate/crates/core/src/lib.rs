//! Evaluate, correct and terminate: a training-free control layer that wraps
//! a manipulation policy.
//!
//! The layer scores recent end-effector motion, nudges grasp actions toward
//! what worked before when the motion looks poor, and stops the episode when
//! the camera view matches a remembered success.

pub mod api;
pub mod config;
pub mod control;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod image;
pub mod memory;
pub mod perturb;
pub mod pose_log;
pub mod quality;
pub mod report;
pub mod seed;
pub mod sim;
pub mod termination;
pub mod trace;

pub use config::Config;
pub use error::{Error, Result};
