//! Per-joint positional spread of a 3D-labeled dataset.

use thiserror::Error;

use super::dataset::Dataset;
use super::joints::{group_members, JointGroup, ALL_JOINTS, NUM_JOINTS};
use crate::geometry::root_relative;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("record {0:?} has no pose3d; joint statistics need a 3D-labeled dataset")]
    Missing3D(String),
    #[error("dataset is empty")]
    Empty,
}

/// Per-joint standard deviation of the root-centered 3D joint locations,
/// in millimeters, plus the mean over the 16 joints.
///
/// Convention: poses are root-centered (pelvis subtracted), the 3x3
/// coordinate covariance uses the population (divide-by-N) estimator, and
/// the reported value is sqrt(trace(covariance)).
#[derive(Debug, Clone, PartialEq)]
pub struct JointStdReport {
    pub per_joint_mm: [f64; NUM_JOINTS],
    pub mean_mm: f64,
}

impl JointStdReport {
    /// Mean STD over the joints of one DOF group.
    pub fn group_mean(&self, group: JointGroup) -> f64 {
        let members = group_members(group);
        members
            .iter()
            .map(|j| self.per_joint_mm[j.index()])
            .sum::<f64>()
            / members.len() as f64
    }
}

pub fn joint_std(ds: &Dataset) -> Result<JointStdReport, StatsError> {
    if ds.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut centered = Vec::with_capacity(ds.len());
    for rec in &ds.records {
        let p = rec
            .pose3d
            .as_ref()
            .ok_or_else(|| StatsError::Missing3D(rec.id.clone()))?;
        centered.push(root_relative(p));
    }
    let n = centered.len() as f64;
    let mut per_joint = [0.0; NUM_JOINTS];
    for &j in &ALL_JOINTS {
        let ji = j.index();
        let mut mean = [0.0f64; 3];
        for p in &centered {
            for k in 0..3 {
                mean[k] += p.coords[ji][k] / n;
            }
        }
        // trace of the covariance = mean squared distance from the mean
        let mut trace = 0.0;
        for p in &centered {
            for k in 0..3 {
                let d = p.coords[ji][k] - mean[k];
                trace += d * d / n;
            }
        }
        per_joint[ji] = trace.sqrt();
    }
    let mean_mm = per_joint.iter().sum::<f64>() / NUM_JOINTS as f64;
    Ok(JointStdReport {
        per_joint_mm: per_joint,
        mean_mm,
    })
}
