//! 2D-to-3D human pose lifting at desk scale.
//!
//! The crate covers the full pipeline downstream of an image-based 2D
//! detector: a 16-joint skeleton model with a synthetic dataset generator,
//! torso-plane pose-attribute labeling, a small reverse-mode autodiff
//! engine, a bi-directional progressive 2D-to-3D regression network with
//! adversarial domain adaptation for the attribute head, and the standard
//! evaluation metrics (MPJPE under both protocols, 3DPCK, AUC).

pub mod autodiff;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod skeleton;
