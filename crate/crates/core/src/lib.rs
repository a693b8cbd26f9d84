//! Weighted frames, canonicalizations and group-averaging projections for
//! point clouds under permutations, rotations, reflections and translations.
//!
//! A point cloud is a `d × n` matrix whose columns are points. Averaging a
//! function over a *weighted frame* (an input-dependent probability measure
//! on the group) makes it invariant or equivariant; when the frame is
//! continuous and weakly equivariant, the projection also preserves
//! continuity, which canonicalizations and small unweighted frames cannot.

pub mod algebra;
pub mod canon;
pub mod diagnostics;
pub mod error;
pub mod frames;
pub mod harness;
pub mod project;

pub use algebra::{GroupElement, GroupTag, Permutation, PointCloud, StabilizerDescriptor};
pub use error::{FrameError, Result};
pub use frames::{FrameKind, FrameMap, WeightedFrame};
