//! Trajectory quality scores and the correction gate.
//!
//! Three scores in `[0, 1]`: efficiency (path bending and twisting),
//! stability (accumulated rotation), and smoothness (integrated squared
//! jerk). Their weighted mean is compared against a threshold to decide
//! whether the current plan should be corrected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Trajectory, MIN_DERIVATIVE_SAMPLES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalParams {
    /// Weight of the total-curvature integral.
    pub a: f64,
    /// Weight of the total-torsion integral.
    pub b: f64,
    /// Decay rate of the stability score per radian of rotation.
    pub k: f64,
    /// Sensitivity of the smoothness score to integrated squared jerk.
    pub mu: f64,
    /// Weight of angular jerk relative to translational jerk.
    pub w_rot: f64,
    /// Mixing weights for (efficiency, stability, smoothness).
    pub gate_weights: [f64; 3],
    pub gate_threshold: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            k: 1.0,
            mu: 0.1,
            w_rot: 1.0,
            gate_weights: [1.0 / 3.0; 3],
            gate_threshold: 0.75,
        }
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("k", self.k), ("mu", self.mu), ("w_rot", self.w_rot)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("eval.{name} must be a nonnegative number, got {v}")));
            }
        }
        if self.gate_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::config("eval.gate_weights must be nonnegative"));
        }
        let sum: f64 = self.gate_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("eval.gate_weights must sum to 1, got {sum}")));
        }
        if !(0.0..=1.0).contains(&self.gate_threshold) {
            return Err(Error::config(format!(
                "eval.gate_threshold must lie in [0, 1], got {}",
                self.gate_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub s_eff: f64,
    pub s_sta: f64,
    pub s_smo: f64,
    pub composite: f64,
    pub gate_low_quality: bool,
}

/// Total curvature and total absolute torsion along the path, integrated
/// with the trapezoid rule over segment lengths.
pub fn bending_integrals(traj: &Trajectory) -> Result<(f64, f64)> {
    let derivs = geometry::finite_differences(traj)?;
    let ct = geometry::curvature_torsion(&derivs);
    let ds = traj.segment_lengths();
    let mut curvature = 0.0;
    let mut torsion = 0.0;
    for (i, s) in ds.iter().enumerate() {
        curvature += 0.5 * (ct[i].curvature + ct[i + 1].curvature) * s;
        torsion += 0.5 * (ct[i].torsion.abs() + ct[i + 1].torsion.abs()) * s;
    }
    Ok((curvature, torsion))
}

pub fn efficiency_score(traj: &Trajectory, params: &EvalParams) -> Result<f64> {
    let (curvature, torsion) = bending_integrals(traj)?;
    let penalty = params.a * curvature + params.b * torsion;
    Ok(1.0 / (1.0 + penalty))
}

pub fn accumulated_rotation(traj: &Trajectory) -> Result<f64> {
    traj.require("stability_score", 2)?;
    Ok(traj
        .poses()
        .windows(2)
        .map(|w| geometry::rotation_angle_between(w[0].orientation(), w[1].orientation()))
        .sum())
}

pub fn stability_score(traj: &Trajectory, params: &EvalParams) -> Result<f64> {
    let total = accumulated_rotation(traj)?;
    Ok((-params.k * total).exp())
}

/// `sum_i (|j_i|^2 + w_rot |zeta_i|^2) dt`. Angular jerk has one sample fewer
/// than translational jerk; each series is summed over its own samples.
pub fn jerk_cost(traj: &Trajectory, w_rot: f64) -> Result<f64> {
    traj.require("smoothness_score", MIN_DERIVATIVE_SAMPLES)?;
    let derivs = geometry::finite_differences(traj)?;
    let angular = geometry::angular_jerk(traj)?;
    let translational: f64 = derivs.jerk.iter().map(|j| j.norm_squared()).sum();
    let rotational: f64 = angular.iter().map(|z| z.norm_squared()).sum();
    Ok((translational + w_rot * rotational) * traj.dt())
}

pub fn smoothness_score(traj: &Trajectory, params: &EvalParams) -> Result<f64> {
    let cost = jerk_cost(traj, params.w_rot)?;
    Ok((-params.mu * cost).exp())
}

/// Combine scores under the gate weights and threshold.
pub fn gate(s_eff: f64, s_sta: f64, s_smo: f64, params: &EvalParams) -> QualityReport {
    let [we, ws, wm] = params.gate_weights;
    let composite = (we * s_eff + ws * s_sta + wm * s_smo).clamp(0.0, 1.0);
    QualityReport {
        s_eff,
        s_sta,
        s_smo,
        composite,
        gate_low_quality: composite < params.gate_threshold,
    }
}

pub fn evaluate(traj: &Trajectory, params: &EvalParams) -> Result<QualityReport> {
    traj.require("evaluate", MIN_DERIVATIVE_SAMPLES)?;
    let s_eff = efficiency_score(traj, params)?;
    let s_sta = stability_score(traj, params)?;
    let s_smo = smoothness_score(traj, params)?;
    Ok(gate(s_eff, s_sta, s_smo, params))
}
