use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::world::TRANSLATION_SCALE;
use crate::control::{Observation, Policy};
use crate::memory::Action;
use crate::perturb::GaussianStream;

/// Height at which the gripper travels between table positions.
pub const TRAVEL_HEIGHT: f64 = 0.06;
/// Height the terminating script retreats to once everything is placed.
pub const RETREAT_HEIGHT: f64 = 0.10;
/// Height above the goal at which objects are let go.
pub const RELEASE_HEIGHT: f64 = 0.03;
/// Height the non-terminating script hovers at after placing.
pub const HOVER_HEIGHT: f64 = 0.07;

const GAIN: f64 = 0.6;
const MAX_SPEED: f64 = 0.5;
const SMOOTHING: f64 = 0.6;
const ARRIVED: f64 = 0.004;
const STALL_STEPS: u32 = 4;
const STALL_PROGRESS: f64 = 0.0005;
const PHASE_LIMIT: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Clean,
    /// Aims every grasp at a constant offset from the object.
    Biased,
    /// Clean targets with injected jerk noise.
    Wobbly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// After placing, hover near the goal instead of retreating.
    pub non_terminating: bool,
    /// Horizontal grasp offset in metres; zero unless biased.
    pub bias: [f64; 2],
    /// Horizontal offset of the touchdown point from the grasp point; the
    /// gripper lands there and slides in at table height.
    pub pregrasp: [f64; 2],
    /// Standard deviation of per-step translation noise, in command units.
    pub jitter: f64,
    /// Standard deviation of per-step rotation noise, in command units.
    pub rotation_jitter: f64,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Approach,
    Descend,
    Align,
    Close,
    Lift,
    Carry,
    Lower,
    Open,
    Rise,
    Retreat,
    Idle,
    Hover,
}

/// Phase-scripted pick-and-place controller with privileged knowledge of
/// the layout. It is closed-loop on the gripper pose and the gripper's
/// holding signal, never on the image: a lift that comes up empty sends it
/// back to approach the same grasp point.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    spec: PolicySpec,
    objects: Vec<Vector3<f64>>,
    goals: Vec<Vector3<f64>>,
    current: usize,
    phase: Phase,
    phase_steps: u32,
    best: f64,
    stalled: u32,
    velocity: Vector3<f64>,
    noise: GaussianStream,
    ticks: u64,
}

impl ScriptedPolicy {
    pub fn new(spec: PolicySpec, objects: Vec<Vector3<f64>>, goals: Vec<Vector3<f64>>) -> Self {
        Self {
            noise: GaussianStream::new(spec.noise_seed),
            spec,
            objects,
            goals,
            current: 0,
            phase: Phase::Approach,
            phase_steps: 0,
            best: f64::INFINITY,
            stalled: 0,
            velocity: Vector3::zeros(),
            ticks: 0,
        }
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    fn grasp_point(&self) -> Vector3<f64> {
        let o = self.objects[self.current];
        Vector3::new(o.x + self.spec.bias[0], o.y + self.spec.bias[1], o.z)
    }

    fn target(&self, here: &Vector3<f64>) -> Vector3<f64> {
        let g = self.grasp_point();
        let goal = self.goals[self.current];
        match self.phase {
            Phase::Approach => Vector3::new(g.x + self.spec.pregrasp[0], g.y + self.spec.pregrasp[1], TRAVEL_HEIGHT),
            Phase::Descend => Vector3::new(g.x + self.spec.pregrasp[0], g.y + self.spec.pregrasp[1], g.z),
            Phase::Align => g,
            Phase::Close | Phase::Open | Phase::Idle => *here,
            Phase::Lift | Phase::Rise => Vector3::new(here.x, here.y, TRAVEL_HEIGHT),
            Phase::Carry => Vector3::new(goal.x, goal.y, TRAVEL_HEIGHT),
            Phase::Lower => Vector3::new(goal.x, goal.y, goal.z + RELEASE_HEIGHT),
            Phase::Retreat => Vector3::new(goal.x, goal.y, RETREAT_HEIGHT),
            Phase::Hover => {
                let wave = (self.ticks as f64 * 0.9).sin() * 0.006;
                Vector3::new(goal.x + wave, goal.y, HOVER_HEIGHT)
            }
        }
    }

    /// Commands between the open and close thresholds leave the gripper as
    /// it is.
    fn grip(&self) -> f64 {
        match self.phase {
            Phase::Approach | Phase::Descend | Phase::Align => 0.0,
            Phase::Close | Phase::Lift | Phase::Carry | Phase::Lower => 1.0,
            _ => -1.0,
        }
    }

    fn next_phase(&self, holding: bool) -> Phase {
        let last = self.current + 1 == self.objects.len();
        match self.phase {
            Phase::Approach => Phase::Descend,
            Phase::Descend => Phase::Align,
            Phase::Align => Phase::Close,
            Phase::Close => Phase::Lift,
            Phase::Lift if holding => Phase::Carry,
            Phase::Lift => Phase::Approach,
            Phase::Carry => Phase::Lower,
            Phase::Lower => Phase::Open,
            Phase::Open if last && self.spec.non_terminating => Phase::Hover,
            Phase::Open if last => Phase::Retreat,
            Phase::Open => Phase::Rise,
            Phase::Rise => Phase::Approach,
            Phase::Retreat => Phase::Idle,
            Phase::Idle => Phase::Idle,
            Phase::Hover => Phase::Hover,
        }
    }

    fn enter(&mut self, phase: Phase) {
        if self.phase == Phase::Rise && phase == Phase::Approach {
            self.current += 1;
        }
        self.phase = phase;
        self.phase_steps = 0;
        self.best = f64::INFINITY;
        self.stalled = 0;
    }

    /// Moves on when the target is reached, progress stalls, or the phase
    /// overruns. Single-step phases always move on.
    fn update_phase(&mut self, here: &Vector3<f64>, holding: bool) {
        loop {
            let one_shot = matches!(self.phase, Phase::Close | Phase::Open);
            if one_shot && self.phase_steps > 0 {
                let next = self.next_phase(holding);
                self.enter(next);
                continue;
            }
            if matches!(self.phase, Phase::Close | Phase::Open | Phase::Idle | Phase::Hover) {
                return;
            }
            let d = (self.target(here) - here).norm();
            if d + STALL_PROGRESS < self.best {
                self.best = d;
                self.stalled = 0;
            } else {
                self.stalled += 1;
            }
            let done = d < ARRIVED || self.stalled >= STALL_STEPS || self.phase_steps >= PHASE_LIMIT;
            if !done {
                return;
            }
            let next = self.next_phase(holding);
            self.enter(next);
        }
    }
}

impl Policy for ScriptedPolicy {
    fn propose(&mut self, observation: &Observation) -> Action {
        let here = *observation.pose.position();
        self.update_phase(&here, observation.flags.holding);

        let desired = if matches!(self.phase, Phase::Close | Phase::Open | Phase::Idle) {
            Vector3::zeros()
        } else {
            let v = (self.target(&here) - here) * (GAIN / TRANSLATION_SCALE);
            let n = v.norm();
            if n > MAX_SPEED { v * (MAX_SPEED / n) } else { v }
        };
        self.velocity += (desired - self.velocity) * SMOOTHING;
        if self.phase == Phase::Idle {
            self.velocity = Vector3::zeros();
        }

        let mut values = [0.0; 7];
        for i in 0..3 {
            values[i] = self.velocity[i];
        }
        if self.spec.jitter > 0.0 {
            for v in values.iter_mut().take(3) {
                *v += self.spec.jitter * self.noise.standard_normal();
            }
        }
        if self.spec.rotation_jitter > 0.0 {
            for v in values.iter_mut().skip(3).take(3) {
                *v += self.spec.rotation_jitter * self.noise.standard_normal();
            }
        }
        for v in values.iter_mut().take(6) {
            *v = v.clamp(-1.0, 1.0);
        }
        values[Action::GRIP] = self.grip();
        self.phase_steps += 1;
        self.ticks += 1;
        Action::new(values).expect("scripted actions are finite")
    }
}
