//! Discrete differential geometry on uniformly sampled end-effector paths.
//!
//! Derivatives come from repeated second-order central differences with
//! second-order one-sided stencils at the two ends, so every derived series
//! has the same sample count as the input.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speeds and cross-product norms below this (SI units) are treated as zero.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// Maximum accepted deviation of a raw quaternion norm from one.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Minimum number of poses for derivative-based operations.
pub const MIN_DERIVATIVE_SAMPLES: usize = 5;

/// End-effector position (meters) and orientation at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    position: Vector3<f64>,
    orientation: UnitQuaternion<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    /// `(w, x, y, z)`
    orientation: [f64; 4],
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        let [w, x, y, z] = r.orientation;
        Pose::new(Vector3::from(r.position), Quaternion::new(w, x, y, z))
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let q = p.orientation.quaternion();
        PoseRepr {
            position: [p.position.x, p.position.y, p.position.z],
            orientation: [q.w, q.i, q.j, q.k],
        }
    }
}

impl Pose {
    /// Builds a pose, renormalizing the quaternion. Rejects non-finite
    /// components and the zero quaternion.
    pub fn new(position: Vector3<f64>, orientation: Quaternion<f64>) -> Result<Self> {
        if !position.iter().all(|c| c.is_finite()) {
            return Err(Error::validation("pose position must be finite"));
        }
        if !orientation.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::validation("pose orientation must be finite"));
        }
        let norm = orientation.norm();
        if norm < 1e-12 {
            return Err(Error::validation("pose orientation is the zero quaternion"));
        }
        Ok(Self {
            position,
            orientation: UnitQuaternion::new_unchecked(orientation / norm),
        })
    }

    pub fn from_parts(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Result<Self> {
        Self::new(position, orientation.into_inner())
    }

    /// Like [`Pose::new`] but refuses quaternions whose norm is off by more
    /// than [`UNIT_NORM_TOLERANCE`] instead of silently renormalizing.
    pub fn new_strict(position: Vector3<f64>, orientation: Quaternion<f64>) -> Result<Self> {
        let norm = orientation.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::validation(format!(
                "orientation quaternion has norm {norm}, expected 1"
            )));
        }
        Self::new(position, orientation)
    }

    pub fn at(position: Vector3<f64>) -> Self {
        Self {
            position,
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn position(&self) -> &Vector3<f64> {
        &self.position
    }

    pub fn orientation(&self) -> &UnitQuaternion<f64> {
        &self.orientation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix().into_inner()
    }

    /// Applies a rigid motion `x -> R x + t` to the pose.
    pub fn transformed(&self, rotation: &UnitQuaternion<f64>, translation: &Vector3<f64>) -> Self {
        Self {
            position: rotation * self.position + translation,
            orientation: rotation * self.orientation,
        }
    }
}

/// Time-ordered poses sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    poses: Vec<Pose>,
    dt: f64,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation(format!("sampling interval must be positive, got {dt}")));
        }
        if poses.is_empty() {
            return Err(Error::Length {
                op: "trajectory",
                needed: 1,
                got: 0,
            });
        }
        Ok(Self { poses, dt })
    }

    /// Positions only, constant identity orientation.
    pub fn from_positions(positions: impl IntoIterator<Item = Vector3<f64>>, dt: f64) -> Result<Self> {
        Self::new(positions.into_iter().map(Pose::at).collect(), dt)
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = &Vector3<f64>> + '_ {
        self.poses.iter().map(|p| &p.position)
    }

    pub(crate) fn require(&self, op: &'static str, needed: usize) -> Result<()> {
        if self.poses.len() < needed {
            return Err(Error::Length {
                op,
                needed,
                got: self.poses.len(),
            });
        }
        Ok(())
    }

    /// Segment lengths `‖p[i+1] - p[i]‖`, one fewer than the pose count.
    pub fn segment_lengths(&self) -> Vec<f64> {
        self.poses
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .collect()
    }

    pub fn arc_length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    pub fn transformed(&self, rotation: &UnitQuaternion<f64>, translation: &Vector3<f64>) -> Self {
        Self {
            poses: self.poses.iter().map(|p| p.transformed(rotation, translation)).collect(),
            dt: self.dt,
        }
    }
}

/// Per-sample velocity, acceleration and jerk of the position track.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveDerivatives {
    pub velocity: Vec<Vector3<f64>>,
    pub acceleration: Vec<Vector3<f64>>,
    pub jerk: Vec<Vector3<f64>>,
}

impl CurveDerivatives {
    pub fn len(&self) -> usize {
        self.velocity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocity.is_empty()
    }
}

/// Second-order accurate derivative of a uniformly sampled series.
fn differentiate(xs: &[Vector3<f64>], dt: f64) -> Vec<Vector3<f64>> {
    let n = xs.len();
    debug_assert!(n >= 3);
    let mut out = Vec::with_capacity(n);
    out.push((-3.0 * xs[0] + 4.0 * xs[1] - xs[2]) / (2.0 * dt));
    for i in 1..n - 1 {
        out.push((xs[i + 1] - xs[i - 1]) / (2.0 * dt));
    }
    out.push((3.0 * xs[n - 1] - 4.0 * xs[n - 2] + xs[n - 3]) / (2.0 * dt));
    out
}

pub fn finite_differences(traj: &Trajectory) -> Result<CurveDerivatives> {
    traj.require("finite_differences", MIN_DERIVATIVE_SAMPLES)?;
    let positions: Vec<_> = traj.positions().copied().collect();
    let velocity = differentiate(&positions, traj.dt);
    let acceleration = differentiate(&velocity, traj.dt);
    let jerk = differentiate(&acceleration, traj.dt);
    Ok(CurveDerivatives {
        velocity,
        acceleration,
        jerk,
    })
}

/// Curvature (1/m) and signed torsion (1/m) at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureTorsion {
    pub curvature: f64,
    pub torsion: f64,
}

pub fn curvature_torsion(derivs: &CurveDerivatives) -> Vec<CurvatureTorsion> {
    derivs
        .velocity
        .iter()
        .zip(&derivs.acceleration)
        .zip(&derivs.jerk)
        .map(|((v, a), j)| {
            let speed = v.norm();
            let cross = v.cross(a);
            let cross_norm = cross.norm();
            let curvature = if speed < DEGENERACY_TOLERANCE {
                0.0
            } else {
                cross_norm / (speed * speed * speed)
            };
            let torsion = if speed < DEGENERACY_TOLERANCE || cross_norm < DEGENERACY_TOLERANCE {
                0.0
            } else {
                cross.dot(j) / (cross_norm * cross_norm)
            };
            CurvatureTorsion {
                curvature: finite_or_zero(curvature),
                torsion: finite_or_zero(torsion),
            }
        })
        .collect()
}

fn finite_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

fn check_unit(q: &Quaternion<f64>, name: &str) -> Result<UnitQuaternion<f64>> {
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::validation(format!("{name} has norm {norm}, expected a unit quaternion")));
    }
    Ok(UnitQuaternion::new_normalize(*q))
}

/// Rotation angle between two orientations, read off the trace of the
/// relative rotation matrix. Result lies in `[0, pi]`.
pub fn geodesic_angle(q_prev: &Quaternion<f64>, q_curr: &Quaternion<f64>) -> Result<f64> {
    let prev = check_unit(q_prev, "previous orientation")?;
    let curr = check_unit(q_curr, "current orientation")?;
    Ok(rotation_angle_between(&prev, &curr))
}

pub(crate) fn rotation_angle_between(prev: &UnitQuaternion<f64>, curr: &UnitQuaternion<f64>) -> f64 {
    let r_prev = prev.to_rotation_matrix().into_inner();
    let r_curr = curr.to_rotation_matrix().into_inner();
    let trace = (r_curr * r_prev.transpose()).trace();
    ((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Rotation vector (axis times angle) of a unit quaternion, taking the
/// representative with nonnegative scalar part.
fn rotation_vector(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let q = q.quaternion();
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.vector())
    } else {
        (q.w, q.vector().into_owned())
    };
    let s = v.norm();
    if s < 1e-12 {
        // 2 atan2(s, w) / s -> 2 / w as s -> 0
        return v * (2.0 / w);
    }
    v * (2.0 * s.atan2(w) / s)
}

/// Body-frame angular velocity between consecutive samples, one fewer
/// entry than the pose count.
pub fn angular_velocity(traj: &Trajectory) -> Vec<Vector3<f64>> {
    traj.poses
        .windows(2)
        .map(|w| rotation_vector(&(w[0].orientation.inverse() * w[1].orientation)) / traj.dt)
        .collect()
}

/// Second derivative of the body angular velocity (rad/s^3). Has one entry
/// per angular-velocity sample, i.e. `len - 1` entries.
pub fn angular_jerk(traj: &Trajectory) -> Result<Vec<Vector3<f64>>> {
    traj.require("angular_jerk", MIN_DERIVATIVE_SAMPLES)?;
    let omega = angular_velocity(traj);
    let m = omega.len();
    let h2 = traj.dt * traj.dt;
    let mut out = Vec::with_capacity(m);
    out.push((2.0 * omega[0] - 5.0 * omega[1] + 4.0 * omega[2] - omega[3]) / h2);
    for i in 1..m - 1 {
        out.push((omega[i + 1] - 2.0 * omega[i] + omega[i - 1]) / h2);
    }
    out.push((2.0 * omega[m - 1] - 5.0 * omega[m - 2] + 4.0 * omega[m - 3] - omega[m - 4]) / h2);
    Ok(out)
}
