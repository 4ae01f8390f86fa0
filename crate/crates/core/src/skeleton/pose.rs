//! Pose containers: 3D joint coordinates in millimeters (camera frame)
//! and 2D joint coordinates in pixels.

use super::joints::{parent_of, JointId, ALL_JOINTS, NUM_JOINTS};

/// A 16-joint 3D pose, millimeters, camera coordinate frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose3D {
    pub coords: [[f64; 3]; NUM_JOINTS],
}

impl Pose3D {
    pub fn new(coords: [[f64; 3]; NUM_JOINTS]) -> Self {
        Self { coords }
    }

    pub fn joint(&self, j: JointId) -> [f64; 3] {
        self.coords[j.index()]
    }

    pub fn set_joint(&mut self, j: JointId, p: [f64; 3]) {
        self.coords[j.index()] = p;
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().flatten().all(|v| v.is_finite())
    }

    /// All values finite and every bone (parent-map distance) strictly positive.
    pub fn is_valid(&self) -> bool {
        if !self.is_finite() {
            return false;
        }
        ALL_JOINTS.iter().all(|&j| match parent_of(j) {
            Some(p) => dist3(self.joint(j), self.joint(p)) > 0.0,
            None => true,
        })
    }

    /// Flat 48-value view in joint-index order: x0,y0,z0,x1,...
    pub fn flat(&self) -> [f64; NUM_JOINTS * 3] {
        let mut out = [0.0; NUM_JOINTS * 3];
        for (i, c) in self.coords.iter().enumerate() {
            out[3 * i] = c[0];
            out[3 * i + 1] = c[1];
            out[3 * i + 2] = c[2];
        }
        out
    }

    pub fn from_flat(values: &[f64]) -> Option<Self> {
        if values.len() != NUM_JOINTS * 3 {
            return None;
        }
        let mut coords = [[0.0; 3]; NUM_JOINTS];
        for (i, c) in coords.iter_mut().enumerate() {
            c[0] = values[3 * i];
            c[1] = values[3 * i + 1];
            c[2] = values[3 * i + 2];
        }
        Some(Self { coords })
    }
}

/// A 16-joint 2D pose in pixels, with the image extent it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose2D {
    pub coords: [[f64; 2]; NUM_JOINTS],
    pub image_w: u32,
    pub image_h: u32,
}

impl Pose2D {
    pub fn new(coords: [[f64; 2]; NUM_JOINTS], image_w: u32, image_h: u32) -> Self {
        Self {
            coords,
            image_w,
            image_h,
        }
    }

    pub fn joint(&self, j: JointId) -> [f64; 2] {
        self.coords[j.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().flatten().all(|v| v.is_finite())
    }

    /// Whether every joint lies inside [0,w] x [0,h]. Loaded data may
    /// violate this; it is flagged, not rejected.
    pub fn in_frame(&self) -> bool {
        let (w, h) = (f64::from(self.image_w), f64::from(self.image_h));
        self.coords
            .iter()
            .all(|c| c[0] >= 0.0 && c[0] <= w && c[1] >= 0.0 && c[1] <= h)
    }

    /// Flat 32-value view in joint-index order: x0,y0,x1,y1,...
    pub fn flat(&self) -> [f64; NUM_JOINTS * 2] {
        let mut out = [0.0; NUM_JOINTS * 2];
        for (i, c) in self.coords.iter().enumerate() {
            out[2 * i] = c[0];
            out[2 * i + 1] = c[1];
        }
        out
    }

    pub fn from_flat(values: &[f64], image_w: u32, image_h: u32) -> Option<Self> {
        if values.len() != NUM_JOINTS * 2 {
            return None;
        }
        let mut coords = [[0.0; 2]; NUM_JOINTS];
        for (i, c) in coords.iter_mut().enumerate() {
            c[0] = values[2 * i];
            c[1] = values[2 * i + 1];
        }
        Some(Self {
            coords,
            image_w,
            image_h,
        })
    }
}

pub(crate) fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
