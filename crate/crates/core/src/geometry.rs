//! Torso-plane geometry: orthogonal-distance plane fitting over the five
//! torso anchors, plane orientation, signed distances, front/on-plane/back
//! attribute labeling, and rigid (Procrustes) alignment.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeleton::{JointId, Pose3D};

/// Relative tolerance deciding that the two smallest anchor variances are
/// equal, i.e. the anchor set is (near-)collinear and the plane normal is
/// not unique.
const DEGENERACY_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate anchor set: {0}")]
    DegenerateAnchors(String),
    #[error("hip axis and spine axis are parallel; plane orientation undefined")]
    ParallelAxes,
    #[error("rank-deficient cross-covariance; alignment undefined")]
    RankDeficient,
    #[error("threshold must be positive, got {0}")]
    NonPositiveTau(f64),
}

/// An oriented plane {x : normal . x + offset = 0}; `normal` is unit length
/// and points toward the subject's front half-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: [f64; 3],
    pub offset: f64,
}

/// Side of the torso plane a limb joint lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Attribute {
    Front,
    OnPlane,
    Back,
}

impl Attribute {
    /// One-letter file token.
    pub fn token(self) -> &'static str {
        match self {
            Attribute::Front => "F",
            Attribute::OnPlane => "O",
            Attribute::Back => "B",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "F" => Some(Attribute::Front),
            "O" => Some(Attribute::OnPlane),
            "B" => Some(Attribute::Back),
            _ => None,
        }
    }

    /// Class index used by the attribute classifiers: F=0, O=1, B=2.
    pub fn class_index(self) -> usize {
        match self {
            Attribute::Front => 0,
            Attribute::OnPlane => 1,
            Attribute::Back => 2,
        }
    }

    pub fn from_class_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Attribute::Front),
            1 => Some(Attribute::OnPlane),
            2 => Some(Attribute::Back),
            _ => None,
        }
    }
}

/// The nine labeled limb joints in their fixed order. The order is part of
/// the serialization and classifier-output contract.
pub const ATTRIBUTE_JOINTS: [JointId; 9] = [
    JointId::LShoulder,
    JointId::LElbow,
    JointId::RShoulder,
    JointId::RElbow,
    JointId::LKnee,
    JointId::LAnkle,
    JointId::RKnee,
    JointId::RAnkle,
    JointId::Head,
];

/// Nine three-class labels in `ATTRIBUTE_JOINTS` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttributeVector {
    pub labels: [Attribute; 9],
}

impl AttributeVector {
    pub fn new(labels: [Attribute; 9]) -> Self {
        Self { labels }
    }
}

impl TryFrom<&[Attribute]> for AttributeVector {
    type Error = usize;

    /// Fails with the offending length when not exactly 9 labels.
    fn try_from(labels: &[Attribute]) -> Result<Self, usize> {
        let arr: [Attribute; 9] = labels.try_into().map_err(|_| labels.len())?;
        Ok(Self { labels: arr })
    }
}

/// The five joints the torso plane is regressed from.
pub const PLANE_ANCHORS: [JointId; 5] = [
    JointId::LShoulder,
    JointId::RShoulder,
    JointId::LHip,
    JointId::RHip,
    JointId::Pelvis,
];

/// How the on-plane threshold is derived for a pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tau {
    /// Fixed threshold in millimeters.
    AbsoluteMm(f64),
    /// Factor of the pose's pelvis-to-thorax distance; survives subject
    /// height variation.
    Relative(f64),
}

impl Default for Tau {
    fn default() -> Self {
        Tau::Relative(0.1)
    }
}

impl Tau {
    /// Resolve to millimeters for a concrete pose.
    pub fn resolve(self, pose: &Pose3D) -> Result<f64, GeometryError> {
        let mm = match self {
            Tau::AbsoluteMm(v) => v,
            Tau::Relative(f) => {
                let spine = crate::skeleton::pose_dist(
                    pose.joint(JointId::Pelvis),
                    pose.joint(JointId::Thorax),
                );
                f * spine
            }
        };
        if mm > 0.0 {
            Ok(mm)
        } else {
            Err(GeometryError::NonPositiveTau(mm))
        }
    }
}

/// Fit the plane minimizing the sum of squared point-plane distances over
/// the five torso anchors, then orient it (see [`orient_plane`]).
///
/// The unoriented solution passes through the anchor centroid with normal
/// along the least-variance direction of the centered anchors.
pub fn fit_torso_plane(pose: &Pose3D) -> Result<Plane, GeometryError> {
    let anchors: Vec<[f64; 3]> = PLANE_ANCHORS.iter().map(|&j| pose.joint(j)).collect();
    let plane = fit_plane_points(&anchors)?;
    orient_plane(plane, pose)
}

/// Least-squares plane through arbitrary points (at least 3). Unoriented.
pub fn fit_plane_points(points: &[[f64; 3]]) -> Result<Plane, GeometryError> {
    assert!(points.len() >= 3, "need at least 3 points to fit a plane");
    let n = points.len() as f64;
    let mut centroid = [0.0; 3];
    for p in points {
        for k in 0..3 {
            centroid[k] += p[k] / n;
        }
    }
    // Scatter matrix of centered points; its smallest eigenvalue equals the
    // minimal sum of squared plane distances.
    let mut scatter = [[0.0f64; 3]; 3];
    for p in points {
        let d = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
        for r in 0..3 {
            for c in 0..3 {
                scatter[r][c] += d[r] * d[c];
            }
        }
    }
    let (eigvals, eigvecs) = sym3_eigen(scatter);
    // eigvals ascending; eigvecs[i] is the unit eigenvector of eigvals[i]
    let scale = eigvals[2].abs().max(1.0);
    if (eigvals[1] - eigvals[0]).abs() <= DEGENERACY_REL_TOL * scale {
        return Err(GeometryError::DegenerateAnchors(format!(
            "two smallest variances equal within tolerance ({:.3e} vs {:.3e})",
            eigvals[0], eigvals[1]
        )));
    }
    let normal = eigvecs[0];
    let offset = -(normal[0] * centroid[0] + normal[1] * centroid[1] + normal[2] * centroid[2]);
    Ok(Plane { normal, offset })
}

/// Flip the normal, if needed, so that it has positive dot product with
/// (l-hip - r-hip) x (thorax - pelvis); the positive half-space is then the
/// subject's front.
pub fn orient_plane(plane: Plane, pose: &Pose3D) -> Result<Plane, GeometryError> {
    let hip = sub3(pose.joint(JointId::LHip), pose.joint(JointId::RHip));
    let spine = sub3(pose.joint(JointId::Thorax), pose.joint(JointId::Pelvis));
    let front = cross3(hip, spine);
    let front_norm = norm3(front);
    let axis_scale = norm3(hip) * norm3(spine);
    if front_norm <= 1e-9 * axis_scale.max(1e-300) {
        return Err(GeometryError::ParallelAxes);
    }
    let d = dot3(plane.normal, front);
    if d == 0.0 {
        return Err(GeometryError::ParallelAxes);
    }
    if d < 0.0 {
        Ok(Plane {
            normal: [-plane.normal[0], -plane.normal[1], -plane.normal[2]],
            offset: -plane.offset,
        })
    } else {
        Ok(plane)
    }
}

/// Signed point-plane distance in millimeters; positive on the front side.
pub fn signed_distance(plane: &Plane, x: [f64; 3]) -> f64 {
    dot3(plane.normal, x) + plane.offset
}

/// Label the nine limb joints front/on-plane/back against the oriented
/// torso plane. Distances with |d| <= tau are on-plane (boundary inclusive).
pub fn compute_attributes(pose: &Pose3D, tau_mm: f64) -> Result<AttributeVector, GeometryError> {
    if tau_mm <= 0.0 {
        return Err(GeometryError::NonPositiveTau(tau_mm));
    }
    let plane = fit_torso_plane(pose)?;
    let mut labels = [Attribute::OnPlane; 9];
    for (i, &j) in ATTRIBUTE_JOINTS.iter().enumerate() {
        let d = signed_distance(&plane, pose.joint(j));
        labels[i] = if d > tau_mm {
            Attribute::Front
        } else if d < -tau_mm {
            Attribute::Back
        } else {
            Attribute::OnPlane
        };
    }
    Ok(AttributeVector::new(labels))
}

/// Same as [`compute_attributes`] with the threshold resolved from a mode.
pub fn compute_attributes_with(pose: &Pose3D, tau: Tau) -> Result<AttributeVector, GeometryError> {
    let tau_mm = tau.resolve(pose)?;
    compute_attributes(pose, tau_mm)
}

/// Closed-form orthogonal-Procrustes alignment of `pred` onto `gt`:
/// returns s*R*pred + t minimizing the summed squared joint distances,
/// with R a proper rotation (reflections corrected) and s = 1 unless
/// `with_scale`.
pub fn procrustes_align(
    pred: &Pose3D,
    gt: &Pose3D,
    with_scale: bool,
) -> Result<Pose3D, GeometryError> {
    let n = crate::skeleton::NUM_JOINTS as f64;
    let mut mu_p = Vector3::zeros();
    let mut mu_g = Vector3::zeros();
    for i in 0..crate::skeleton::NUM_JOINTS {
        mu_p += Vector3::from(pred.coords[i]) / n;
        mu_g += Vector3::from(gt.coords[i]) / n;
    }
    let mut cross = Matrix3::zeros();
    let mut var_p = 0.0;
    for i in 0..crate::skeleton::NUM_JOINTS {
        let p = Vector3::from(pred.coords[i]) - mu_p;
        let g = Vector3::from(gt.coords[i]) - mu_g;
        cross += g * p.transpose();
        var_p += p.norm_squared();
    }
    let svd = cross.svd(true, true);
    let u = svd.u.ok_or(GeometryError::RankDeficient)?;
    let v_t = svd.v_t.ok_or(GeometryError::RankDeficient)?;
    let sigma = svd.singular_values;
    // Rank < 2 leaves a rotation axis free.
    if sigma[1] <= 1e-12 * sigma[0].max(1e-300) || var_p == 0.0 {
        return Err(GeometryError::RankDeficient);
    }
    let sign = if (u * v_t).determinant() < 0.0 { -1.0 } else { 1.0 };
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    let rot = u * d * v_t;
    let scale = if with_scale {
        (sigma[0] + sigma[1] + sign * sigma[2]) / var_p
    } else {
        1.0
    };
    let t = mu_g - rot * mu_p * scale;
    let mut out = [[0.0; 3]; crate::skeleton::NUM_JOINTS];
    for i in 0..crate::skeleton::NUM_JOINTS {
        let q = rot * Vector3::from(pred.coords[i]) * scale + t;
        out[i] = [q.x, q.y, q.z];
    }
    Ok(Pose3D::new(out))
}

/// Express the pose relative to the pelvis; the pelvis becomes the origin.
pub fn root_relative(pose: &Pose3D) -> Pose3D {
    let root = pose.joint(JointId::Pelvis);
    let mut out = pose.coords;
    for c in &mut out {
        for k in 0..3 {
            c[k] -= root[k];
        }
    }
    Pose3D::new(out)
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi
/// rotations. Returns eigenvalues ascending and matching unit eigenvectors.
/// Deterministic; converges to machine precision in a handful of sweeps.
pub fn sym3_eigen(m: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = m;
    // v accumulates rotations, columns become eigenvectors
    let mut v = [[0.0; 3]; 3];
    v[0][0] = 1.0;
    v[1][1] = 1.0;
    v[2][2] = 1.0;

    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-300 {
            break;
        }
        let diag_scale = a[0][0].abs() + a[1][1].abs() + a[2][2].abs();
        if off.sqrt() <= f64::EPSILON * diag_scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = if theta >= 0.0 {
                1.0 / (theta + (1.0 + theta * theta).sqrt())
            } else {
                1.0 / (theta - (1.0 + theta * theta).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            // A <- J^T A J with the (p,q) rotation
            let app = a[p][p];
            let aqq = a[q][q];
            a[p][p] = app - t * apq;
            a[q][q] = aqq + t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            let r = 3 - p - q; // the remaining index
            let arp = a[r][p];
            let arq = a[r][q];
            a[r][p] = c * arp - s * arq;
            a[p][r] = a[r][p];
            a[r][q] = s * arp + c * arq;
            a[q][r] = a[r][q];
            for row in &mut v {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap());
    let vals = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
    let mut vecs = [[0.0; 3]; 3];
    for (k, &col) in order.iter().enumerate() {
        let mut e = [v[0][col], v[1][col], v[2][col]];
        let len = norm3(e);
        for x in &mut e {
            *x /= len;
        }
        vecs[k] = e;
    }
    (vals, vecs)
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Sum of squared anchor distances to the plane; the fit minimizes this.
pub fn plane_residual(plane: &Plane, points: &[[f64; 3]]) -> f64 {
    points
        .iter()
        .map(|&p| {
            let d = signed_distance(plane, p);
            d * d
        })
        .sum()
}
