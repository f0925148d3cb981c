//! Pose logs: CSV with columns `t, px, py, pz, qw, qx, qy, qz`.

use std::io::Read;

use nalgebra::{Quaternion, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Trajectory};

const COLUMNS: [&str; 8] = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"];

/// Parses a pose log into a trajectory. Timestamps must be uniformly spaced;
/// quaternions must be unit norm. Errors carry the 1-based file line.
pub fn parse_pose_log(input: impl Read) -> Result<Trajectory> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
    let header_line = reader.position().line().max(1) as usize;
    let headers = reader.headers().map_err(|e| Error::parse(header_line, e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != COLUMNS {
        return Err(Error::parse(
            header_line,
            format!("expected columns {}, got {}", COLUMNS.join(","), names.join(",")),
        ));
    }
    let mut times = Vec::new();
    let mut poses = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut v = [0.0; 8];
        for (i, field) in record.iter().enumerate() {
            v[i] = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(line, format!("column {} is not a finite number: `{field}`", COLUMNS[i])))?;
        }
        let pose = Pose::new_strict(Vector3::new(v[1], v[2], v[3]), Quaternion::new(v[4], v[5], v[6], v[7]))
            .map_err(|e| Error::parse(line, e.to_string()))?;
        times.push((line, v[0]));
        poses.push(pose);
    }
    if poses.len() < 2 {
        return Err(Error::parse(header_line, "a pose log needs at least two rows"));
    }
    let dt = times[1].1 - times[0].1;
    if !(dt > 0.0) {
        return Err(Error::parse(times[1].0, "timestamps must increase"));
    }
    for w in times.windows(2) {
        let step = w[1].1 - w[0].1;
        if (step - dt).abs() > 1e-6 * dt.max(1.0) {
            return Err(Error::parse(w[1].0, format!("non-uniform time step {step} (expected {dt})")));
        }
    }
    Trajectory::new(poses, dt)
}
