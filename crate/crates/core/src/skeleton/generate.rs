//! Synthetic skeleton dataset generator.
//!
//! Each record is built by sampling torso bend/twist and limb joint angles
//! within fixed anatomical ranges on the canonical skeleton, scaling bones
//! by a per-subject factor, placing the body rigidly in front of a pinhole
//! camera, and projecting to pixels. Deterministic given (config, seed).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{Dataset, DatasetMeta, Domain, SampleRecord};
use super::joints::{JointId, CANONICAL_REST_POSE, NUM_JOINTS};
use super::pose::{Pose2D, Pose3D};
use crate::geometry::{compute_attributes, GeometryError};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("record {id}: could not place pose in frame after {tries} tries")]
    Placement { id: String, tries: usize },
    #[error("record {id}: {source}")]
    Labeling {
        id: String,
        #[source]
        source: GeometryError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub focal_px: f64,
    pub image_w: u32,
    pub image_h: u32,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            focal_px: 1100.0,
            image_w: 1000,
            image_h: 1000,
        }
    }
}

/// Rigid placement of the body in the camera frame. Counts as "rigid
/// placement", not as a limb angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementConfig {
    /// Pelvis depth range in mm.
    pub depth_range: (f64, f64),
    /// Lateral pelvis offset as a fraction of depth.
    pub lateral_frac: f64,
    /// Vertical pelvis offset as a fraction of depth.
    pub vertical_frac: f64,
    /// Yaw about the body's up axis, degrees.
    pub yaw_range_deg: (f64, f64),
    pub pitch_max_deg: f64,
    pub roll_max_deg: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            depth_range: (3800.0, 6200.0),
            lateral_frac: 0.10,
            vertical_frac: 0.06,
            yaw_range_deg: (-180.0, 180.0),
            pitch_max_deg: 10.0,
            roll_max_deg: 10.0,
        }
    }
}

/// Joint-angle sampling ranges, degrees. Zeroing every field reproduces
/// the canonical rest pose up to rigid placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AngleConfig {
    /// Upper-torso forward/backward bend (about the body x axis).
    pub torso_bend_deg: f64,
    /// Upper-torso twist (about the body up axis).
    pub torso_twist_deg: f64,
    /// Upper-torso side bend (about the body facing axis).
    pub torso_side_deg: f64,
    /// Upper-arm polar angle from straight down: (min, max).
    pub arm_polar_deg: (f64, f64),
    /// Elbow flexion: (min, max).
    pub forearm_flex_deg: (f64, f64),
    /// Forearm azimuth half-range about the forward direction; below 90
    /// the elbow bends forward-biased, as elbows do.
    pub forearm_azimuth_deg: f64,
    /// Upper-leg polar angle from straight down: (min, max).
    pub leg_polar_deg: (f64, f64),
    /// Knee flexion: (min, max).
    pub shin_flex_deg: (f64, f64),
    /// Shin azimuth half-range about the backward direction; knees bend
    /// backward.
    pub shin_azimuth_deg: f64,
    /// Head direction cone half-angle around body-up.
    pub head_cone_deg: f64,
}

impl Default for AngleConfig {
    fn default() -> Self {
        Self {
            torso_bend_deg: 15.0,
            torso_twist_deg: 20.0,
            torso_side_deg: 10.0,
            arm_polar_deg: (0.0, 85.0),
            forearm_flex_deg: (0.0, 135.0),
            forearm_azimuth_deg: 75.0,
            leg_polar_deg: (0.0, 55.0),
            shin_flex_deg: (0.0, 110.0),
            shin_azimuth_deg: 60.0,
            head_cone_deg: 35.0,
        }
    }
}

impl AngleConfig {
    /// All ranges zero: every generated pose is the rest pose up to rigid
    /// placement.
    pub fn zeroed() -> Self {
        Self {
            torso_bend_deg: 0.0,
            torso_twist_deg: 0.0,
            torso_side_deg: 0.0,
            arm_polar_deg: (0.0, 0.0),
            forearm_flex_deg: (0.0, 0.0),
            forearm_azimuth_deg: 0.0,
            leg_polar_deg: (0.0, 0.0),
            shin_flex_deg: (0.0, 0.0),
            shin_azimuth_deg: 0.0,
            head_cone_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub name: String,
    pub n: usize,
    /// Whole dataset carries 2D-only records when true.
    pub labeled2d: bool,
    pub scale_range: (f64, f64),
    /// On-plane threshold written into the dataset header and used for
    /// generated labels, mm.
    pub tau_mm: f64,
    pub camera: CameraConfig,
    pub placement: PlacementConfig,
    pub angles: AngleConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            name: "synthetic".to_string(),
            n: 1000,
            labeled2d: false,
            scale_range: (0.85, 1.15),
            tau_mm: 80.0,
            camera: CameraConfig::default(),
            placement: PlacementConfig::default(),
            angles: AngleConfig::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.n == 0 {
            return Err(GeneratorError::InvalidConfig("n must be >= 1".into()));
        }
        let (lo, hi) = self.scale_range;
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || lo > hi {
            return Err(GeneratorError::InvalidConfig(format!(
                "scale_range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
            )));
        }
        if !(self.tau_mm.is_finite() && self.tau_mm > 0.0) {
            return Err(GeneratorError::InvalidConfig(format!(
                "tau_mm must be positive, got {}",
                self.tau_mm
            )));
        }
        if self.camera.focal_px <= 0.0 || self.camera.image_w == 0 || self.camera.image_h == 0 {
            return Err(GeneratorError::InvalidConfig(
                "camera needs positive focal length and image size".into(),
            ));
        }
        let (dlo, dhi) = self.placement.depth_range;
        if dlo <= 0.0 || dlo > dhi {
            return Err(GeneratorError::InvalidConfig(format!(
                "depth_range must satisfy 0 < lo <= hi, got ({dlo}, {dhi})"
            )));
        }
        Ok(())
    }
}

/// Canonical bone lengths in mm, read off the rest pose.
struct BoneTable {
    hip_offset: f64,
    thorax: [f64; 3],
    neck: [f64; 3],
    shoulder: [f64; 3], // left shoulder offset from pelvis; mirror x for right
    head_len: f64,
    upper_arm: f64,
    forearm: f64,
    thigh: f64,
    shin: f64,
}

fn bone_table() -> BoneTable {
    let p = |j: JointId| CANONICAL_REST_POSE[j.index()];
    let len = |a: [f64; 3], b: [f64; 3]| super::pose::dist3(a, b);
    BoneTable {
        hip_offset: p(JointId::LHip)[0],
        thorax: p(JointId::Thorax),
        neck: p(JointId::Neck),
        shoulder: p(JointId::LShoulder),
        head_len: len(p(JointId::Head), p(JointId::Neck)),
        upper_arm: len(p(JointId::LElbow), p(JointId::LShoulder)),
        forearm: len(p(JointId::LWrist), p(JointId::LElbow)),
        thigh: len(p(JointId::LKnee), p(JointId::LHip)),
        shin: len(p(JointId::LAnkle), p(JointId::LKnee)),
    }
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

fn mat_apply(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn scale3(v: [f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Unit vector at polar angle `polar` from `axis`, rotated `azimuth`
/// within the plane spanned by `ref_dir` (azimuth 0) and axis x ref_dir.
fn cone_dir(axis: [f64; 3], ref_dir: [f64; 3], polar: f64, azimuth: f64) -> [f64; 3] {
    // component of ref_dir orthogonal to axis; caller guarantees they are
    // not parallel
    let proj = dot3(ref_dir, axis);
    let e1 = normalize([
        ref_dir[0] - proj * axis[0],
        ref_dir[1] - proj * axis[1],
        ref_dir[2] - proj * axis[2],
    ]);
    let e2 = [
        axis[1] * e1[2] - axis[2] * e1[1],
        axis[2] * e1[0] - axis[0] * e1[2],
        axis[0] * e1[1] - axis[1] * e1[0],
    ];
    let (sp, cp) = polar.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    [
        cp * axis[0] + sp * (ca * e1[0] + sa * e2[0]),
        cp * axis[1] + sp * (ca * e1[1] + sa * e2[1]),
        cp * axis[2] + sp * (ca * e1[2] + sa * e2[2]),
    ]
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn sym_uniform(rng: &mut ChaCha8Rng, half: f64) -> f64 {
    uniform(rng, -half, half)
}

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Sample one articulated pose in the body frame (pelvis at origin, +y up,
/// +z facing) with bones scaled by `s`.
fn sample_body_pose(rng: &mut ChaCha8Rng, angles: &AngleConfig, s: f64) -> Pose3D {
    let bones = bone_table();
    let mut coords = [[0.0; 3]; NUM_JOINTS];

    // Lower body: hips rigid to the pelvis.
    let l_hip = [bones.hip_offset * s, 0.0, 0.0];
    let r_hip = [-bones.hip_offset * s, 0.0, 0.0];
    coords[JointId::Pelvis.index()] = [0.0, 0.0, 0.0];
    coords[JointId::LHip.index()] = l_hip;
    coords[JointId::RHip.index()] = r_hip;

    // Upper torso bend/twist about the pelvis.
    let bend = sym_uniform(rng, angles.torso_bend_deg) * DEG;
    let twist = sym_uniform(rng, angles.torso_twist_deg) * DEG;
    let side = sym_uniform(rng, angles.torso_side_deg) * DEG;
    let torso_rot = mat_mul(&rot_z(side), &mat_mul(&rot_x(bend), &rot_y(twist)));

    let thorax = mat_apply(&torso_rot, scale3(bones.thorax, s));
    let neck = mat_apply(&torso_rot, scale3(bones.neck, s));
    let l_shoulder = mat_apply(&torso_rot, scale3(bones.shoulder, s));
    let r_shoulder = mat_apply(
        &torso_rot,
        scale3([-bones.shoulder[0], bones.shoulder[1], bones.shoulder[2]], s),
    );
    coords[JointId::Thorax.index()] = thorax;
    coords[JointId::Neck.index()] = neck;
    coords[JointId::LShoulder.index()] = l_shoulder;
    coords[JointId::RShoulder.index()] = r_shoulder;

    let torso_up = mat_apply(&torso_rot, [0.0, 1.0, 0.0]);
    let torso_down = [-torso_up[0], -torso_up[1], -torso_up[2]];
    let torso_front = mat_apply(&torso_rot, [0.0, 0.0, 1.0]);

    // Head on a cone around torso-up.
    let head_polar = uniform(rng, 0.0, angles.head_cone_deg) * DEG;
    let head_azim = uniform(rng, 0.0, 360.0) * DEG;
    let head_dir = if head_polar == 0.0 {
        torso_up
    } else {
        cone_dir(torso_up, torso_front, head_polar, head_azim)
    };
    coords[JointId::Head.index()] = add3(neck, scale3(head_dir, bones.head_len * s));

    // Arms: upper arm on a cone around torso-down, forearm flexed
    // forward-biased about the upper arm.
    let arm = |shoulder: [f64; 3], elbow_j: JointId, wrist_j: JointId, rng: &mut ChaCha8Rng| {
        let polar = uniform(rng, angles.arm_polar_deg.0, angles.arm_polar_deg.1) * DEG;
        let azim = uniform(rng, 0.0, 360.0) * DEG;
        let upper_dir = if polar == 0.0 {
            torso_down
        } else {
            cone_dir(torso_down, torso_front, polar, azim)
        };
        let elbow = add3(shoulder, scale3(upper_dir, bones.upper_arm * s));

        let flex = uniform(rng, angles.forearm_flex_deg.0, angles.forearm_flex_deg.1) * DEG;
        let psi = sym_uniform(rng, angles.forearm_azimuth_deg) * DEG;
        let fore_dir = if flex == 0.0 {
            upper_dir
        } else {
            // reference "forward" for the flexion plane; fall back to
            // torso-up when the arm points straight forward
            let fref = if dot3(torso_front, upper_dir).abs() > 0.99 {
                torso_up
            } else {
                torso_front
            };
            cone_dir(upper_dir, fref, flex, psi)
        };
        let wrist = add3(elbow, scale3(fore_dir, bones.forearm * s));
        (elbow_j, elbow, wrist_j, wrist)
    };
    let (ej, e, wj, w) = arm(l_shoulder, JointId::LElbow, JointId::LWrist, rng);
    coords[ej.index()] = e;
    coords[wj.index()] = w;
    let (ej, e, wj, w) = arm(r_shoulder, JointId::RElbow, JointId::RWrist, rng);
    coords[ej.index()] = e;
    coords[wj.index()] = w;

    // Legs: thigh on a cone around straight down (pelvis frame), shin
    // flexed backward-biased.
    let down = [0.0, -1.0, 0.0];
    let front = [0.0, 0.0, 1.0];
    let back = [0.0, 0.0, -1.0];
    let leg = |hip: [f64; 3], knee_j: JointId, ankle_j: JointId, rng: &mut ChaCha8Rng| {
        let polar = uniform(rng, angles.leg_polar_deg.0, angles.leg_polar_deg.1) * DEG;
        let azim = uniform(rng, 0.0, 360.0) * DEG;
        let thigh_dir = if polar == 0.0 {
            down
        } else {
            cone_dir(down, front, polar, azim)
        };
        let knee = add3(hip, scale3(thigh_dir, bones.thigh * s));

        let flex = uniform(rng, angles.shin_flex_deg.0, angles.shin_flex_deg.1) * DEG;
        let psi = sym_uniform(rng, angles.shin_azimuth_deg) * DEG;
        let shin_dir = if flex == 0.0 {
            thigh_dir
        } else {
            let bref = if dot3(back, thigh_dir).abs() > 0.99 {
                [0.0, 1.0, 0.0]
            } else {
                back
            };
            cone_dir(thigh_dir, bref, flex, psi)
        };
        let ankle = add3(knee, scale3(shin_dir, bones.shin * s));
        (knee_j, knee, ankle_j, ankle)
    };
    let (kj, k, aj, a) = leg(l_hip, JointId::LKnee, JointId::LAnkle, rng);
    coords[kj.index()] = k;
    coords[aj.index()] = a;
    let (kj, k, aj, a) = leg(r_hip, JointId::RKnee, JointId::RAnkle, rng);
    coords[kj.index()] = k;
    coords[aj.index()] = a;

    Pose3D::new(coords)
}

/// Generate a dataset. Pure function of (cfg, seed): the same inputs give
/// byte-identical datasets.
pub fn synth_generate(cfg: &GeneratorConfig, seed: u64) -> Result<Dataset, GeneratorError> {
    cfg.validate()?;
    let mut ds = Dataset::new(DatasetMeta {
        name: cfg.name.clone(),
        seed,
        tau_mm: cfg.tau_mm,
    });

    // Body up (+y) maps to image up (-y camera): proper rotation, person
    // upright in the image.
    let cam0: Mat3 = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
    let (w, h) = (f64::from(cfg.camera.image_w), f64::from(cfg.camera.image_h));

    for i in 0..cfg.n {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
            seed ^ 0x9e3779b97f4a7c15u64.wrapping_mul(i as u64 + 1),
        ));
        let s = uniform(&mut rng, cfg.scale_range.0, cfg.scale_range.1);
        let body = sample_body_pose(&mut rng, &cfg.angles, s);

        let mut placed: Option<(Pose3D, Pose2D)> = None;
        let max_tries = 100;
        for _try in 0..max_tries {
            let yaw = uniform(
                &mut rng,
                cfg.placement.yaw_range_deg.0,
                cfg.placement.yaw_range_deg.1,
            ) * DEG;
            let pitch = sym_uniform(&mut rng, cfg.placement.pitch_max_deg) * DEG;
            let roll = sym_uniform(&mut rng, cfg.placement.roll_max_deg) * DEG;
            let r_place = mat_mul(&cam0, &mat_mul(&rot_y(yaw), &mat_mul(&rot_x(pitch), &rot_z(roll))));
            let tz = uniform(&mut rng, cfg.placement.depth_range.0, cfg.placement.depth_range.1);
            let tx = sym_uniform(&mut rng, cfg.placement.lateral_frac) * tz;
            let ty = sym_uniform(&mut rng, cfg.placement.vertical_frac) * tz;

            let mut cam_coords = [[0.0; 3]; NUM_JOINTS];
            let mut px = [[0.0; 2]; NUM_JOINTS];
            let mut ok = true;
            for j in 0..NUM_JOINTS {
                let q = mat_apply(&r_place, body.coords[j]);
                let c = [q[0] + tx, q[1] + ty, q[2] + tz];
                cam_coords[j] = c;
                if c[2] <= 1.0 {
                    ok = false;
                    break;
                }
                let u = cfg.camera.focal_px * c[0] / c[2] + w / 2.0;
                let v = cfg.camera.focal_px * c[1] / c[2] + h / 2.0;
                if !(0.0..=w).contains(&u) || !(0.0..=h).contains(&v) {
                    ok = false;
                    break;
                }
                px[j] = [u, v];
            }
            if ok {
                placed = Some((
                    Pose3D::new(cam_coords),
                    Pose2D::new(px, cfg.camera.image_w, cfg.camera.image_h),
                ));
                break;
            }
        }
        let id = format!("r{i:06}");
        let (pose3d, pose2d) = placed.ok_or(GeneratorError::Placement {
            id: id.clone(),
            tries: max_tries,
        })?;

        let record = if cfg.labeled2d {
            SampleRecord {
                id,
                domain: Domain::Labeled2D,
                pose2d,
                pose3d: None,
                attributes: None,
                subject_scale: s,
            }
        } else {
            let attrs = compute_attributes(&pose3d, cfg.tau_mm)
                .map_err(|e| GeneratorError::Labeling { id: id.clone(), source: e })?;
            SampleRecord {
                id,
                domain: Domain::Labeled3D,
                pose2d,
                pose3d: Some(pose3d),
                attributes: Some(attrs),
                subject_scale: s,
            }
        };
        ds.records.push(record);
    }
    Ok(ds)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Attribute, ATTRIBUTE_JOINTS};
    use crate::skeleton::joints::{parent_of, ALL_JOINTS};
    use crate::skeleton::pose::dist3;

    #[test]
    fn same_config_and_seed_give_identical_datasets() {
        let cfg = GeneratorConfig {
            n: 50,
            ..GeneratorConfig::default()
        };
        let a = synth_generate(&cfg, 7).unwrap();
        let b = synth_generate(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&cfg, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_angle_ranges_reproduce_rest_pose_up_to_rigid_placement() {
        let cfg = GeneratorConfig {
            n: 20,
            angles: AngleConfig::zeroed(),
            scale_range: (0.9, 1.1),
            ..GeneratorConfig::default()
        };
        let ds = synth_generate(&cfg, 3).unwrap();
        for rec in &ds.records {
            let p = rec.pose3d.as_ref().unwrap();
            let s = rec.subject_scale;
            // bone lengths equal canonical x subject_scale
            for &j in &ALL_JOINTS {
                if let Some(par) = parent_of(j) {
                    let got = dist3(p.joint(j), p.joint(par));
                    let want = s * dist3(
                        CANONICAL_REST_POSE[j.index()],
                        CANONICAL_REST_POSE[par.index()],
                    );
                    assert!(
                        (got - want).abs() < 1e-6,
                        "bone {:?}: got {got}, want {want}",
                        j
                    );
                }
            }
            // rigid placement: all pairwise distances match the scaled rest pose
            let rest = Pose3D::new(CANONICAL_REST_POSE);
            for i in 0..NUM_JOINTS {
                for j in (i + 1)..NUM_JOINTS {
                    let got = dist3(p.coords[i], p.coords[j]);
                    let want = s * dist3(rest.coords[i], rest.coords[j]);
                    assert!((got - want).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn empty_scale_range_is_config_error() {
        let cfg = GeneratorConfig {
            scale_range: (1.2, 0.8),
            ..GeneratorConfig::default()
        };
        assert!(matches!(
            synth_generate(&cfg, 1),
            Err(GeneratorError::InvalidConfig(_))
        ));
    }

    #[test]
    fn generated_poses_are_valid_and_in_frame() {
        let cfg = GeneratorConfig {
            n: 200,
            ..GeneratorConfig::default()
        };
        let ds = synth_generate(&cfg, 11).unwrap();
        assert_eq!(ds.len(), 200);
        for rec in &ds.records {
            assert!(rec.pose2d.in_frame());
            assert!(rec.pose3d.as_ref().unwrap().is_valid());
            assert!(rec.attributes.is_some());
        }
    }

    #[test]
    fn labeled2d_records_omit_3d_fields() {
        let cfg = GeneratorConfig {
            n: 10,
            labeled2d: true,
            ..GeneratorConfig::default()
        };
        let ds = synth_generate(&cfg, 1).unwrap();
        for rec in &ds.records {
            assert_eq!(rec.domain, Domain::Labeled2D);
            assert!(rec.pose3d.is_none());
            assert!(rec.attributes.is_none());
        }
    }

    #[test]
    fn all_attribute_classes_occur_for_moving_joints() {
        let cfg = GeneratorConfig {
            n: 1000,
            ..GeneratorConfig::default()
        };
        let ds = synth_generate(&cfg, 21).unwrap();
        // shoulders anchor the plane, so only the other seven J joints are
        // expected to exercise all three classes
        let moving: Vec<usize> = ATTRIBUTE_JOINTS
            .iter()
            .enumerate()
            .filter(|(_, j)| !matches!(j, JointId::LShoulder | JointId::RShoulder))
            .map(|(i, _)| i)
            .collect();
        for ji in moving {
            let mut counts = [0usize; 3];
            for rec in &ds.records {
                let lab = rec.attributes.as_ref().unwrap().labels[ji];
                counts[lab.class_index()] += 1;
            }
            let n = ds.len();
            for (ci, &c) in counts.iter().enumerate() {
                let frac = c as f64 / n as f64;
                assert!(
                    frac > 0.0 && frac < 1.0,
                    "joint {} ({:?}) class {:?} fraction {frac}",
                    ji,
                    ATTRIBUTE_JOINTS[ji],
                    Attribute::from_class_index(ci).unwrap()
                );
            }
        }
    }
}
