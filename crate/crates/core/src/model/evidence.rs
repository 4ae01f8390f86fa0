//! The evidence vector fed to the 3D regressor: normalized 2D coordinates
//! followed by per-joint attribute probability triples.

use thiserror::Error;

use crate::geometry::AttributeVector;
use crate::skeleton::{Pose2D, NUM_JOINTS};

/// 2 coordinates per joint, mapped to [-1, 1] by the image size.
pub const COORD_DIM: usize = NUM_JOINTS * 2;
/// 9 labeled joints x 3 classes.
pub const ATTR_PROB_DIM: usize = 27;
/// Full evidence width.
pub const EVIDENCE_DIM: usize = COORD_DIM + ATTR_PROB_DIM;

#[derive(Debug, Error, PartialEq)]
pub enum EvidenceError {
    #[error("attribute triple {index} is not a distribution (sum {sum}, min {min})")]
    NotADistribution { index: usize, sum: f64, min: f64 },
}

/// 59 values: 32 normalized coordinates (x0,y0,...) then 27 attribute
/// probabilities in labeled-joint order, each triple summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceVector {
    pub values: [f64; EVIDENCE_DIM],
}

impl EvidenceVector {
    pub fn coords(&self) -> &[f64] {
        &self.values[..COORD_DIM]
    }

    pub fn attr_probs(&self) -> &[f64] {
        &self.values[COORD_DIM..]
    }
}

/// Per-joint (x, y) mapped to [-1, 1] by the image size; the image center
/// maps to zero.
pub fn normalized_coords(p2d: &Pose2D) -> [f64; COORD_DIM] {
    let (w, h) = (f64::from(p2d.image_w), f64::from(p2d.image_h));
    let mut out = [0.0; COORD_DIM];
    for (i, c) in p2d.coords.iter().enumerate() {
        out[2 * i] = 2.0 * c[0] / w - 1.0;
        out[2 * i + 1] = 2.0 * c[1] / h - 1.0;
    }
    out
}

/// Deterministic concatenation of normalized coordinates and attribute
/// probabilities. Each probability triple must be a distribution.
pub fn encode_evidence(
    p2d: &Pose2D,
    attr_probs: &[[f64; 3]; 9],
) -> Result<EvidenceVector, EvidenceError> {
    let mut values = [0.0; EVIDENCE_DIM];
    values[..COORD_DIM].copy_from_slice(&normalized_coords(p2d));
    for (i, triple) in attr_probs.iter().enumerate() {
        let sum: f64 = triple.iter().sum();
        let min = triple.iter().cloned().fold(f64::INFINITY, f64::min);
        if (sum - 1.0).abs() > 1e-9 || min < 0.0 {
            return Err(EvidenceError::NotADistribution { index: i, sum, min });
        }
        values[COORD_DIM + 3 * i..COORD_DIM + 3 * (i + 1)].copy_from_slice(triple);
    }
    Ok(EvidenceVector { values })
}

/// One-hot probability triples for ground-truth labels.
pub fn one_hot_attrs(attrs: &AttributeVector) -> [[f64; 3]; 9] {
    let mut out = [[0.0; 3]; 9];
    for (i, l) in attrs.labels.iter().enumerate() {
        out[i][l.class_index()] = 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Attribute;

    #[test]
    fn center_of_image_maps_to_zero() {
        let p = Pose2D::new([[320.0, 240.0]; NUM_JOINTS], 640, 480);
        let ev = encode_evidence(&p, &[[1.0, 0.0, 0.0]; 9]).unwrap();
        for &v in ev.coords() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn corners_map_to_unit_box() {
        let mut coords = [[0.0, 0.0]; NUM_JOINTS];
        coords[1] = [640.0, 480.0];
        let p = Pose2D::new(coords, 640, 480);
        let n = normalized_coords(&p);
        assert_eq!(&n[0..2], &[-1.0, -1.0]);
        assert_eq!(&n[2..4], &[1.0, 1.0]);
    }

    #[test]
    fn one_hot_triples_pass_through() {
        let p = Pose2D::new([[100.0, 100.0]; NUM_JOINTS], 200, 200);
        let attrs = AttributeVector::new([
            Attribute::Front,
            Attribute::Back,
            Attribute::OnPlane,
            Attribute::Front,
            Attribute::Back,
            Attribute::OnPlane,
            Attribute::Front,
            Attribute::Back,
            Attribute::OnPlane,
        ]);
        let trip = one_hot_attrs(&attrs);
        let ev = encode_evidence(&p, &trip).unwrap();
        for (i, t) in trip.iter().enumerate() {
            assert_eq!(&ev.attr_probs()[3 * i..3 * i + 3], t);
        }
    }

    #[test]
    fn non_distribution_triple_is_rejected() {
        let p = Pose2D::new([[0.0, 0.0]; NUM_JOINTS], 10, 10);
        let mut probs = [[1.0 / 3.0; 3]; 9];
        probs[4] = [0.9, 0.2, 0.1];
        assert!(matches!(
            encode_evidence(&p, &probs),
            Err(EvidenceError::NotADistribution { index: 4, .. })
        ));
        probs[4] = [1.2, -0.2, 0.0];
        assert!(encode_evidence(&p, &probs).is_err());
    }

    #[test]
    fn fixed_size_contract_rejects_wrong_lengths() {
        // AttributeVector construction from slices enforces exactly 9
        use crate::geometry::AttributeVector;
        let eight = vec![Attribute::Front; 8];
        assert_eq!(AttributeVector::try_from(&eight[..]), Err(8));
        let ten = vec![Attribute::Front; 10];
        assert_eq!(AttributeVector::try_from(&ten[..]), Err(10));
    }
}
