//! The evaluate, correct and terminate loop around a policy and an
//! environment.

mod campaign;
mod episode;
mod featurize;

pub use campaign::{run_campaign, run_replay_campaign, CampaignReport, TaskSummary};
pub use episode::{run_episode, step_seed, EpisodeTrace, Outcome, StepRecord};
pub use featurize::{featurize, FEATURE_DIM, FEATURE_SIDE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::image::Image;
use crate::memory::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepFlags {
    /// The environment considers the task done.
    pub success: bool,
    /// The gripper is closing in on an object it has not yet grasped.
    pub grasp_phase: bool,
    /// The gripper reports an object between its fingers.
    #[serde(default)]
    pub holding: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub image: Image,
    pub pose: Pose,
    pub flags: StepFlags,
}

pub trait Environment {
    fn observe(&self) -> Observation;

    /// Applies one action. An error is an environment fault and ends the
    /// episode.
    fn step(&mut self, action: &Action) -> Result<Observation>;

    /// Ground-truth completion, independent of any retreat requirement.
    fn task_complete(&self) -> bool;

    /// Control period in seconds.
    fn dt(&self) -> f64;
}

/// The wrapped manipulation policy.
pub trait Policy {
    fn propose(&mut self, observation: &Observation) -> Action;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopParams {
    /// Poses per evaluated window.
    pub eval_window: usize,
    pub max_steps: usize,
    pub correction_enabled: bool,
    pub termination_enabled: bool,
    /// Restrict correction to steps the environment flags as grasp phase.
    pub correct_grasp_phase_only: bool,
    /// Environment faults tolerated by a campaign before it is reported as
    /// a runtime failure.
    pub max_env_faults: usize,
}

impl Default for LoopParams {
    fn default() -> Self {
        Self {
            eval_window: 20,
            max_steps: 200,
            correction_enabled: true,
            termination_enabled: true,
            correct_grasp_phase_only: true,
            max_env_faults: 0,
        }
    }
}

impl LoopParams {
    pub fn validate(&self) -> Result<()> {
        if self.eval_window < crate::geometry::MIN_DERIVATIVE_SAMPLES {
            return Err(Error::config(format!(
                "loop.eval_window must be at least {}, got {}",
                crate::geometry::MIN_DERIVATIVE_SAMPLES,
                self.eval_window
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::config("loop.max_steps must be positive"));
        }
        if self.eval_window > self.max_steps {
            return Err(Error::config(format!(
                "loop.eval_window ({}) must not exceed loop.max_steps ({})",
                self.eval_window, self.max_steps
            )));
        }
        Ok(())
    }

    /// Steps between evaluations once the first window is full.
    pub fn eval_stride(&self) -> usize {
        self.eval_window.div_ceil(2)
    }
}
