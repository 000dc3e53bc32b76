//! Geometry engine and evaluation toolkit for joint 3D object detection
//! and quad-based room layout estimation.
//!
//! The crate covers the non-learned machinery of a point-cloud scene
//! parser: quad layout representation, the physical-constraint loss
//! between boxes and walls (naive and fast forms, with analytic
//! gradients), farthest-point-sampling proposals, a fixed-weight
//! attention decoder forward pass, prediction codecs, NMS and
//! ceiling/floor assembly, detection and layout metrics, and a
//! deterministic synthetic scene generator that doubles as the test
//! oracle. Everything is exercised through the `quadscene` CLI.

pub mod codec;
pub mod constraint;
pub mod decoder;
pub mod geom;
pub mod metrics;
pub mod postprocess;
pub mod proposals;
