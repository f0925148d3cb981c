use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::policy::{PolicyKind, PolicySpec, ScriptedPolicy, TRAVEL_HEIGHT};
use super::world::{Layout, SimParams, SimWorld};
use crate::error::{Error, Result};
use crate::perturb::GaussianStream;
use crate::seed::mix;

pub const BIAS_MIN: f64 = 0.01;
pub const BIAS_MAX: f64 = 0.05;
const START_JITTER: f64 = 0.05;
const LAYOUTS_PER_FAMILY: usize = 4;
const PREGRASP_MIN: f64 = 0.02;
const PREGRASP_MAX: f64 = 0.06;

const BIASED_JITTER: f64 = 0.06;
const BIASED_ROTATION_JITTER: f64 = 0.05;
const WOBBLY_JITTER: f64 = 0.15;
const WOBBLY_ROTATION_JITTER: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// One object; the goal sits on a different side in each layout.
    Goal,
    /// One target object among distractors.
    Object,
    /// Goal placement defined relative to a landmark.
    Spatial,
    /// Two objects placed in sequence.
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    Clean,
    Biased,
    Wobbly,
    /// Clean grasps that never retreat after placing.
    NonTerminating,
    BiasedNonTerminating,
    /// Biased grasps; about half the seeds never retreat.
    Mixed,
}

/// `family[:policy]`, for example `object`, `object:biased`,
/// `long:non_terminating`. A bare family means `family:mixed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaskId {
    pub family: Family,
    pub policy: PolicyChoice,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Goal => "goal",
            Family::Object => "object",
            Family::Spatial => "spatial",
            Family::Long => "long",
        }
    }
}

impl PolicyChoice {
    fn name(self) -> &'static str {
        match self {
            PolicyChoice::Clean => "clean",
            PolicyChoice::Biased => "biased",
            PolicyChoice::Wobbly => "wobbly",
            PolicyChoice::NonTerminating => "non_terminating",
            PolicyChoice::BiasedNonTerminating => "biased_non_terminating",
            PolicyChoice::Mixed => "mixed",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.family.name(), self.policy.name())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (fam, pol) = s.split_once(':').unwrap_or((s, "mixed"));
        let family = match fam {
            "goal" => Family::Goal,
            "object" => Family::Object,
            "spatial" => Family::Spatial,
            "long" => Family::Long,
            _ => return Err(Error::validation(format!("unknown task family `{fam}` in task id `{s}`"))),
        };
        let policy = match pol {
            "clean" => PolicyChoice::Clean,
            "biased" => PolicyChoice::Biased,
            "wobbly" => PolicyChoice::Wobbly,
            "non_terminating" => PolicyChoice::NonTerminating,
            "biased_non_terminating" => PolicyChoice::BiasedNonTerminating,
            "mixed" => PolicyChoice::Mixed,
            _ => return Err(Error::validation(format!("unknown policy `{pol}` in task id `{s}`"))),
        };
        Ok(TaskId { family, policy })
    }
}

impl Serialize for TaskId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TaskId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn v(x: f64, y: f64) -> Vector3<f64> {
    Vector3::new(x, y, 0.0)
}

fn start(x: f64, y: f64) -> Vector3<f64> {
    Vector3::new(x, y, TRAVEL_HEIGHT)
}

/// Nominal layouts. Starts sit 0.25 to 0.45 m from the first object.
pub fn layouts(family: Family) -> Vec<Layout> {
    let mk = |objects: Vec<Vector3<f64>>, goals, distractors, gripper_start| Layout {
        objects,
        goals,
        distractors,
        gripper_start,
    };
    match family {
        Family::Object => vec![
            mk(vec![v(0.20, 0.30)], vec![v(0.42, 0.34)], vec![v(0.30, 0.12), v(0.14, 0.50)], start(0.52, 0.10)),
            mk(vec![v(0.44, 0.22)], vec![v(0.24, 0.40)], vec![v(0.50, 0.46), v(0.30, 0.14)], start(0.10, 0.12)),
            mk(vec![v(0.32, 0.46)], vec![v(0.30, 0.20)], vec![v(0.12, 0.30), v(0.52, 0.36)], start(0.50, 0.12)),
            mk(vec![v(0.26, 0.18)], vec![v(0.46, 0.44)], vec![v(0.44, 0.14), v(0.16, 0.42)], start(0.20, 0.56)),
        ],
        Family::Goal => vec![
            mk(vec![v(0.30, 0.30)], vec![v(0.50, 0.30)], vec![], start(0.10, 0.56)),
            mk(vec![v(0.30, 0.30)], vec![v(0.12, 0.30)], vec![], start(0.54, 0.54)),
            mk(vec![v(0.30, 0.34)], vec![v(0.30, 0.14)], vec![], start(0.56, 0.20)),
            mk(vec![v(0.30, 0.26)], vec![v(0.30, 0.48)], vec![], start(0.08, 0.08)),
        ],
        Family::Spatial => vec![
            mk(vec![v(0.18, 0.20)], vec![v(0.40, 0.40)], vec![v(0.46, 0.40), v(0.40, 0.46)], start(0.50, 0.12)),
            mk(vec![v(0.46, 0.18)], vec![v(0.22, 0.42)], vec![v(0.16, 0.42), v(0.22, 0.48)], start(0.12, 0.14)),
            mk(vec![v(0.20, 0.46)], vec![v(0.44, 0.24)], vec![v(0.50, 0.24), v(0.44, 0.18)], start(0.52, 0.54)),
            mk(vec![v(0.44, 0.46)], vec![v(0.18, 0.24)], vec![v(0.12, 0.24), v(0.18, 0.18)], start(0.12, 0.56)),
        ],
        Family::Long => vec![
            mk(vec![v(0.16, 0.20), v(0.30, 0.48)], vec![v(0.46, 0.20), v(0.48, 0.44)], vec![], start(0.50, 0.54)),
            mk(vec![v(0.48, 0.18), v(0.16, 0.40)], vec![v(0.30, 0.32), v(0.40, 0.50)], vec![], start(0.12, 0.10)),
            mk(vec![v(0.22, 0.46), v(0.46, 0.46)], vec![v(0.20, 0.20), v(0.44, 0.18)], vec![], start(0.54, 0.12)),
            mk(vec![v(0.40, 0.30), v(0.16, 0.16)], vec![v(0.14, 0.46), v(0.50, 0.50)], vec![], start(0.12, 0.54)),
        ],
    }
}

/// Start for the reference run: the first object layout with the gripper
/// 0.08 m from the object.
pub fn canonical_layout() -> Layout {
    let mut l = layouts(Family::Object).swap_remove(0);
    l.gripper_start = start(0.26, 0.25);
    l
}

pub fn canonical_task(params: SimParams) -> Result<(SimWorld, ScriptedPolicy)> {
    let layout = canonical_layout();
    let spec = PolicySpec {
        kind: PolicyKind::Clean,
        non_terminating: false,
        bias: [0.0, 0.0],
        pregrasp: [0.0, 0.0],
        jitter: 0.0,
        rotation_jitter: 0.0,
        noise_seed: 0,
    };
    let policy = ScriptedPolicy::new(spec, layout.objects.clone(), layout.goals.clone());
    Ok((SimWorld::new(layout, params, 0)?, policy))
}

/// Deterministic world and policy for `(task, seed)`.
pub fn make_task(task: &TaskId, seed: u64, params: &SimParams) -> Result<(SimWorld, ScriptedPolicy)> {
    let stream_seed = mix(&[seed, task.family as u64, 0x7461_736b]);
    let mut rng = GaussianStream::new(stream_seed);
    let all = layouts(task.family);
    let pick = ((rng.uniform() * LAYOUTS_PER_FAMILY as f64) as usize).min(all.len() - 1);
    let mut layout = all[pick].clone();

    let r = START_JITTER * rng.uniform().sqrt();
    let theta = std::f64::consts::TAU * rng.uniform();
    layout.gripper_start.x += r * theta.cos();
    layout.gripper_start.y += r * theta.sin();

    let magnitude = BIAS_MIN + (BIAS_MAX - BIAS_MIN) * rng.uniform();
    let phi = std::f64::consts::TAU * rng.uniform();
    let bias = [magnitude * phi.cos(), magnitude * phi.sin()];
    let coin = rng.uniform() < 0.5;
    let reach = PREGRASP_MIN + (PREGRASP_MAX - PREGRASP_MIN) * rng.uniform();
    let psi = std::f64::consts::TAU * rng.uniform();
    let pregrasp = [reach * psi.cos(), reach * psi.sin()];
    let noise_seed = mix(&[stream_seed, 1]);

    let (kind, non_terminating) = match task.policy {
        PolicyChoice::Clean => (PolicyKind::Clean, false),
        PolicyChoice::Biased => (PolicyKind::Biased, false),
        PolicyChoice::Wobbly => (PolicyKind::Wobbly, false),
        PolicyChoice::NonTerminating => (PolicyKind::Clean, true),
        PolicyChoice::BiasedNonTerminating => (PolicyKind::Biased, true),
        PolicyChoice::Mixed => (PolicyKind::Biased, coin),
    };
    let (bias, jitter, rotation_jitter) = match kind {
        PolicyKind::Clean => ([0.0, 0.0], 0.0, 0.0),
        PolicyKind::Biased => (bias, BIASED_JITTER, BIASED_ROTATION_JITTER),
        PolicyKind::Wobbly => ([0.0, 0.0], WOBBLY_JITTER, WOBBLY_ROTATION_JITTER),
    };
    let spec = PolicySpec {
        kind,
        non_terminating,
        bias,
        pregrasp,
        jitter,
        rotation_jitter,
        noise_seed,
    };
    let policy = ScriptedPolicy::new(spec, layout.objects.clone(), layout.goals.clone());
    Ok((SimWorld::new(layout, params.clone(), seed)?, policy))
}
