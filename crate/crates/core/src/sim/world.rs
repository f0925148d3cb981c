use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::{Environment, Observation, StepFlags};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::image::Image;
use crate::memory::{Action, ActionBounds};

pub const CANVAS: usize = 64;
pub const METERS_PER_PIXEL: f64 = 0.01;
/// Gripper travel per unit of translation command.
pub const TRANSLATION_SCALE: f64 = 0.05;
/// Gripper rotation per unit of rotation command.
pub const ROTATION_SCALE: f64 = 0.1;
/// Control period in seconds.
pub const DT: f64 = 0.2;
/// Upward image shift per metre of height, a cheap oblique-camera cue.
pub const HEIGHT_PX_PER_M: f64 = 100.0;

pub const WORKSPACE_MIN: [f64; 3] = [0.02, 0.02, 0.0];
pub const WORKSPACE_MAX: [f64; 3] = [0.62, 0.62, 0.25];

const GRIP_CLOSE: f64 = 0.5;
const GRIP_OPEN: f64 = -0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub grasp_tolerance: f64,
    pub place_tolerance: f64,
    /// Height above the table the gripper must reach after placing before the
    /// environment reports success.
    pub withdraw_height: f64,
    /// Horizontal radius around an unplaced object inside which an open,
    /// empty gripper counts as grasping.
    pub approach_radius: f64,
    /// Inject an environment fault at this step.
    pub fault_at_step: Option<u32>,
    /// Only episodes whose seed is a multiple of this value fault.
    pub fault_every: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            grasp_tolerance: 0.02,
            place_tolerance: 0.03,
            withdraw_height: 0.08,
            approach_radius: 0.10,
            fault_at_step: None,
            fault_every: 1,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("grasp_tolerance", self.grasp_tolerance),
            ("place_tolerance", self.place_tolerance),
            ("withdraw_height", self.withdraw_height),
            ("approach_radius", self.approach_radius),
        ];
        for (name, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("sim.{name} must be positive, got {v}")));
            }
        }
        if self.fault_every == 0 {
            return Err(Error::config("sim.fault_every must be positive"));
        }
        Ok(())
    }
}

/// Scene layout: where things sit on the table at reset.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub objects: Vec<Vector3<f64>>,
    pub goals: Vec<Vector3<f64>>,
    pub distractors: Vec<Vector3<f64>>,
    pub gripper_start: Vector3<f64>,
}

/// Table-top pick-and-place world seen from above.
#[derive(Debug, Clone, PartialEq)]
pub struct SimWorld {
    objects: Vec<Vector3<f64>>,
    goals: Vec<Vector3<f64>>,
    distractors: Vec<Vector3<f64>>,
    gripper: Pose,
    closed: bool,
    held: Option<usize>,
    params: SimParams,
    steps: u32,
    faults: bool,
}

fn clamp_workspace(p: Vector3<f64>) -> Vector3<f64> {
    Vector3::from_fn(|i, _| p[i].clamp(WORKSPACE_MIN[i], WORKSPACE_MAX[i]))
}

impl SimWorld {
    pub fn new(layout: Layout, params: SimParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if layout.objects.is_empty() || layout.objects.len() != layout.goals.len() {
            return Err(Error::validation("a layout needs one goal per object and at least one object"));
        }
        let faults = params.fault_at_step.is_some() && seed.is_multiple_of(params.fault_every);
        Ok(Self {
            objects: layout.objects,
            goals: layout.goals,
            distractors: layout.distractors,
            gripper: Pose::at(clamp_workspace(layout.gripper_start)),
            closed: false,
            held: None,
            params,
            steps: 0,
            faults,
        })
    }

    pub fn objects(&self) -> &[Vector3<f64>] {
        &self.objects
    }

    pub fn goals(&self) -> &[Vector3<f64>] {
        &self.goals
    }

    pub fn gripper(&self) -> &Pose {
        &self.gripper
    }

    pub fn held(&self) -> Option<usize> {
        self.held
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    fn placed(&self, i: usize) -> bool {
        self.held != Some(i) && (self.objects[i] - self.goals[i]).norm() <= self.params.place_tolerance
    }

    fn grasp_phase(&self) -> bool {
        if self.closed || self.held.is_some() {
            return false;
        }
        let g = self.gripper.position();
        (0..self.objects.len()).any(|i| {
            let o = &self.objects[i];
            !self.placed(i) && ((g.x - o.x).powi(2) + (g.y - o.y).powi(2)).sqrt() < self.params.approach_radius
        })
    }

    fn flags(&self) -> StepFlags {
        StepFlags {
            success: self.is_complete() && self.gripper.position().z >= self.params.withdraw_height,
            grasp_phase: self.grasp_phase(),
            holding: self.held.is_some(),
        }
    }

    fn is_complete(&self) -> bool {
        !self.closed && (0..self.objects.len()).all(|i| self.placed(i))
    }

    /// Advances the world by one control period. Dynamics are total; the
    /// only error is an injected fault.
    pub fn advance(&mut self, action: &Action) -> Result<()> {
        if self.faults && self.params.fault_at_step == Some(self.steps) {
            return Err(Error::Env(format!("injected fault at step {}", self.steps)));
        }
        let a = ActionBounds::default().clip(action);
        let [tx, ty, tz] = a.translation();
        let [rx, ry, rz] = a.rotation();
        let position = clamp_workspace(self.gripper.position() + Vector3::new(tx, ty, tz) * TRANSLATION_SCALE);
        let orientation = self.gripper.orientation()
            * UnitQuaternion::from_scaled_axis(Vector3::new(rx, ry, rz) * ROTATION_SCALE);
        self.gripper = Pose::from_parts(position, orientation)?;

        // An empty gripper only stays shut while commanded closed; a loaded
        // one keeps its grip until told to open.
        let grip = a.grip();
        if grip > GRIP_CLOSE {
            if self.held.is_none() {
                self.held = (0..self.objects.len())
                    .filter(|&i| (self.objects[i] - position).norm() <= self.params.grasp_tolerance)
                    .min_by(|&i, &j| {
                        (self.objects[i] - position)
                            .norm()
                            .total_cmp(&(self.objects[j] - position).norm())
                    });
            }
            self.closed = true;
        } else if grip < GRIP_OPEN {
            if let Some(i) = self.held.take() {
                self.objects[i] = Vector3::new(position.x, position.y, 0.0);
            }
            self.closed = false;
        } else {
            self.closed = self.held.is_some();
        }
        if let Some(i) = self.held {
            self.objects[i] = position;
        }
        self.steps += 1;
        Ok(())
    }

    /// Deterministic RGB rendering of the scene.
    pub fn render(&self) -> Image {
        let mut canvas = Canvas::new();
        for g in &self.goals {
            canvas.ring(to_px(g), 4.0, 1.0, [0.25, 0.55, 0.3]);
        }
        for d in &self.distractors {
            canvas.square(to_px(d), 2.5, [0.3, 0.35, 0.6]);
        }
        for (i, o) in self.objects.iter().enumerate() {
            if self.held != Some(i) {
                canvas.square(to_px(o), 3.0, [1.0, 0.75, 0.2]);
            }
        }
        if let Some(i) = self.held {
            canvas.square(to_px(&self.objects[i]), 3.0, [1.0, 0.75, 0.2]);
        }
        self.draw_gripper(&mut canvas);
        canvas.into_image()
    }

    fn draw_gripper(&self, canvas: &mut Canvas) {
        let p = self.gripper.position();
        // Nearer the camera the pads look larger and further apart.
        let scale = 1.0 + 1.5 * p.z;
        let spread = if self.closed { 1.0 } else { 4.0 } * scale;
        let sigma = 1.6 * scale;
        let axis = self.gripper.orientation() * Vector3::x();
        let planar = Vector3::new(axis.x, axis.y, 0.0);
        let dir = if planar.norm() > 1e-9 { planar.normalize() } else { Vector3::x() };
        let centre = to_px(p);
        for s in [-1.0, 1.0] {
            let c = (centre.0 + s * spread * dir.x, centre.1 + s * spread * dir.y);
            canvas.blob(c, sigma, [1.0, 1.0, 1.0]);
        }
    }
}

/// Image coordinates; anything above the table is drawn shifted up.
fn to_px(p: &Vector3<f64>) -> (f64, f64) {
    (p.x / METERS_PER_PIXEL, p.y / METERS_PER_PIXEL - p.z * HEIGHT_PX_PER_M)
}

/// Minimal antialiased RGB rasterizer on the fixed canvas.
struct Canvas {
    data: Vec<f64>,
}

impl Canvas {
    fn new() -> Self {
        let mut data = Vec::with_capacity(CANVAS * CANVAS * 3);
        for y in 0..CANVAS {
            for x in 0..CANVAS {
                let shade = 0.1 + 0.01 * (x + y) as f64 / (2 * CANVAS) as f64;
                data.extend_from_slice(&[shade, shade, shade * 1.05]);
            }
        }
        Self { data }
    }

    /// Blends `color` with per-pixel coverage from `alpha(px, py)`, visiting
    /// only pixels within `radius` of `centre`.
    fn paint(&mut self, centre: (f64, f64), radius: f64, color: [f64; 3], alpha: impl Fn(f64, f64) -> f64) {
        let x0 = (centre.0 - radius).floor().max(0.0) as usize;
        let y0 = (centre.1 - radius).floor().max(0.0) as usize;
        let x1 = ((centre.0 + radius).ceil() as isize).clamp(0, CANVAS as isize - 1) as usize;
        let y1 = ((centre.1 + radius).ceil() as isize).clamp(0, CANVAS as isize - 1) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let a = alpha(x as f64 + 0.5 - centre.0, y as f64 + 0.5 - centre.1).clamp(0.0, 1.0);
                if a <= 0.0 {
                    continue;
                }
                let px = &mut self.data[(y * CANVAS + x) * 3..][..3];
                for c in 0..3 {
                    px[c] = px[c] * (1.0 - a) + color[c] * a;
                }
            }
        }
    }

    fn ring(&mut self, centre: (f64, f64), radius: f64, half_width: f64, color: [f64; 3]) {
        self.paint(centre, radius + half_width + 1.0, color, |dx, dy| {
            let d = ((dx * dx + dy * dy).sqrt() - radius).abs();
            0.5 + half_width - d
        });
    }

    fn square(&mut self, centre: (f64, f64), half: f64, color: [f64; 3]) {
        self.paint(centre, half * 1.5 + 1.0, color, |dx, dy| {
            let cov = |d: f64| (half + 0.5 - d.abs()).clamp(0.0, 1.0);
            cov(dx) * cov(dy)
        });
    }

    fn blob(&mut self, centre: (f64, f64), sigma: f64, color: [f64; 3]) {
        self.paint(centre, 3.5 * sigma, color, |dx, dy| (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
    }

    fn into_image(self) -> Image {
        Image::new(CANVAS, CANVAS, 3, self.data).expect("canvas dimensions are fixed")
    }
}

impl Environment for SimWorld {
    fn observe(&self) -> Observation {
        Observation {
            image: self.render(),
            pose: self.gripper,
            flags: self.flags(),
        }
    }

    fn step(&mut self, action: &Action) -> Result<Observation> {
        self.advance(action)?;
        Ok(self.observe())
    }

    fn task_complete(&self) -> bool {
        self.is_complete()
    }

    fn dt(&self) -> f64 {
        DT
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Layout {
        Layout {
            objects: vec![Vector3::new(0.2, 0.3, 0.0)],
            goals: vec![Vector3::new(0.45, 0.3, 0.0)],
            distractors: vec![Vector3::new(0.3, 0.5, 0.0)],
            gripper_start: Vector3::new(0.2, 0.3, 0.0),
        }
    }

    fn grip(g: f64) -> Action {
        Action::new([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, g]).unwrap()
    }

    #[test]
    fn zero_action_is_fixed_point() {
        let mut w = SimWorld::new(layout(), SimParams::default(), 0).unwrap();
        let before = w.render();
        let snapshot = w.clone();
        w.advance(&Action::zero()).unwrap();
        assert_eq!(w.render(), before);
        assert_eq!(w.objects, snapshot.objects);
        assert_eq!(w.gripper, snapshot.gripper);
    }

    #[test]
    fn grasp_rule() {
        let mut w = SimWorld::new(layout(), SimParams::default(), 0).unwrap();
        w.advance(&grip(1.0)).unwrap();
        assert_eq!(w.held(), Some(0));
    }

    #[test]
    fn grasp_out_of_tolerance_misses() {
        let mut l = layout();
        l.gripper_start.x += 0.025;
        let mut w = SimWorld::new(l, SimParams::default(), 0).unwrap();
        w.advance(&grip(1.0)).unwrap();
        assert!(w.is_closed());
        assert_eq!(w.held(), None);
        w.advance(&grip(0.0)).unwrap();
        assert!(!w.is_closed());
    }

    #[test]
    fn loaded_gripper_holds_until_opened() {
        let mut w = SimWorld::new(layout(), SimParams::default(), 0).unwrap();
        w.advance(&grip(1.0)).unwrap();
        w.advance(&grip(0.0)).unwrap();
        assert_eq!(w.held(), Some(0));
        assert!(w.observe().flags.holding);
        w.advance(&grip(-1.0)).unwrap();
        assert_eq!(w.held(), None);
    }

    #[test]
    fn held_object_tracks_gripper_and_places() {
        let mut w = SimWorld::new(layout(), SimParams::default(), 0).unwrap();
        w.advance(&grip(1.0)).unwrap();
        for _ in 0..5 {
            w.advance(&Action::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap()).unwrap();
            assert_eq!(w.objects()[0], *w.gripper().position());
        }
        assert!(!w.task_complete());
        w.advance(&grip(-1.0)).unwrap();
        assert!(w.task_complete());
        assert!(!w.observe().flags.success);
        for _ in 0..3 {
            w.advance(&Action::new([0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]).unwrap()).unwrap();
        }
        assert!(w.observe().flags.success);
    }

    #[test]
    fn injected_fault() {
        let params = SimParams {
            fault_at_step: Some(2),
            ..Default::default()
        };
        let mut w = SimWorld::new(layout(), params, 0).unwrap();
        w.advance(&Action::zero()).unwrap();
        w.advance(&Action::zero()).unwrap();
        assert!(matches!(w.advance(&Action::zero()), Err(Error::Env(_))));
    }

    #[test]
    fn rendering_is_bounded_and_deterministic() {
        let w = SimWorld::new(layout(), SimParams::default(), 0).unwrap();
        let a = w.render();
        assert_eq!(a, w.clone().render());
        assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
