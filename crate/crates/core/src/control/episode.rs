use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use twox_hash::XxHash3_64;

use super::{featurize, Environment, Observation, Policy};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Trajectory};
use crate::image::{self, Image};
use crate::memory::{Action, MemoryEntry, SharedStore, SuccessImage};
use crate::perturb;
use crate::quality::{self, QualityReport};
use crate::seed::mix;
use crate::termination::{self, TermDecision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Timeout,
    EnvFailure,
    /// The termination detector stopped an episode whose task was not done.
    StoppedEarlyIncorrect,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Timeout => "timeout",
            Outcome::EnvFailure => "env_failure",
            Outcome::StoppedEarlyIncorrect => "stopped_early_incorrect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// XXH3-64 of the little-endian bytes of the observation the policy saw.
    pub observation: String,
    pub pose: Pose,
    pub grasp_phase: bool,
    pub proposed: Action,
    pub executed: Action,
    /// True when the executed action came from the perturbation sampler.
    pub corrected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<TermDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode_id: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of evaluated windows, and how many of them were gated low.
    pub fn windows(&self) -> (usize, usize) {
        let evaluated = self.steps.iter().filter_map(|s| s.quality.as_ref());
        evaluated.fold((0, 0), |(n, low), q| (n + 1, low + q.gate_low_quality as usize))
    }
}

/// Seed for the perturbation draw at `step` of the episode seeded `seed`.
pub fn step_seed(seed: u64, step: usize) -> u64 {
    mix(&[seed, step as u64])
}

pub(crate) fn digest(image: &Image) -> String {
    let bytes: Vec<u8> = image.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    format!("{:016x}", XxHash3_64::oneshot(&bytes))
}

/// Runs one episode. On success the grasp-phase steps and the final view are
/// recorded into `store`; nothing is recorded otherwise.
///
/// Environment faults end the episode with [`Outcome::EnvFailure`] and keep
/// the trace; other errors propagate.
pub fn run_episode<P, E>(
    policy: &mut P,
    env: &mut E,
    store: &SharedStore,
    config: &Config,
    episode_id: &str,
    seed: u64,
) -> Result<EpisodeTrace>
where
    P: Policy + ?Sized,
    E: Environment + ?Sized,
{
    config.validate()?;
    let lp = &config.control;
    let bounds = config.perturb.action_bounds;
    let mut window: VecDeque<Pose> = VecDeque::with_capacity(lp.eval_window);
    let mut gate_low = false;
    let mut steps = Vec::new();
    let mut grasp_entries = Vec::new();
    let mut all_entries = Vec::new();
    let mut error = None;
    let mut outcome = Outcome::Timeout;
    let mut obs: Observation = env.observe();

    for step in 0..lp.max_steps {
        let proposed = policy.propose(&obs);

        if window.len() == lp.eval_window {
            window.pop_front();
        }
        window.push_back(obs.pose);
        let seen = step + 1;
        let quality = if seen >= lp.eval_window && (seen - lp.eval_window).is_multiple_of(lp.eval_stride()) {
            let traj = Trajectory::new(window.iter().cloned().collect(), env.dt())?;
            let q = quality::evaluate(&traj, &config.eval)?;
            gate_low = q.gate_low_quality;
            Some(q)
        } else {
            None
        };

        let wants_correction =
            lp.correction_enabled && gate_low && (!lp.correct_grasp_phase_only || obs.flags.grasp_phase);
        // Features are needed to correct, to remember a grasp-phase step, or
        // for the every-step fallback until the first grasp-phase flag.
        let feature = (wants_correction || obs.flags.grasp_phase || grasp_entries.is_empty()).then(|| featurize(&obs.image));
        let (executed, corrected) = if let (true, Some(feature)) = (wants_correction, &feature) {
            let snap = store.snapshot();
            let c = perturb::perturb_snapshot(&proposed, feature, &snap, &config.perturb, step_seed(seed, step))?;
            (c.action, !c.fell_back)
        } else {
            (bounds.clip(&proposed), false)
        };

        let mut record = StepRecord {
            step,
            observation: digest(&obs.image),
            pose: obs.pose,
            grasp_phase: obs.flags.grasp_phase,
            proposed,
            executed,
            corrected,
            quality,
            termination: None,
        };
        if let Some(feature) = feature {
            let entry = MemoryEntry {
                feature,
                action: executed,
                episode_id: episode_id.to_owned(),
                step_index: step as u64,
            };
            if obs.flags.grasp_phase {
                grasp_entries.push(entry);
                all_entries.clear();
            } else if grasp_entries.is_empty() {
                all_entries.push(entry);
            }
        }

        let next = match env.step(&executed) {
            Ok(next) => next,
            Err(Error::Env(msg)) => {
                steps.push(record);
                outcome = Outcome::EnvFailure;
                error = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };

        let stop = if lp.termination_enabled {
            let snap = store.snapshot();
            let current = termination::prepare(&next.image, &config.termination)?;
            let d = termination::decide_prepared(&current, snap.images().iter().map(|i| i.prepared()), &config.termination);
            record.termination = Some(d);
            d.stop
        } else {
            false
        };
        steps.push(record);
        obs = next;

        if obs.flags.success {
            outcome = Outcome::Success;
            break;
        }
        if stop {
            outcome = if env.task_complete() {
                Outcome::Success
            } else {
                Outcome::StoppedEarlyIncorrect
            };
            break;
        }
    }

    if outcome == Outcome::Success {
        // Environments that never flag a grasp phase contribute every step.
        let entries = if grasp_entries.is_empty() { all_entries } else { grasp_entries };
        if !entries.is_empty() {
            let cfg = &config.memory;
            let pixels = image::preprocess(&obs.image, cfg.image_width, cfg.image_height)?;
            let terminal = SuccessImage::new(cfg.image_width, cfg.image_height, pixels, episode_id)?;
            store.record_success(entries, terminal)?;
        }
    }

    Ok(EpisodeTrace {
        episode_id: episode_id.to_owned(),
        seed,
        steps,
        outcome,
        error,
    })
}
