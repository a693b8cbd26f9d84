//! Point clouds, the groups acting on them, stabilizers, and the dense
//! linear-algebra kernels the frames are built from.

mod cloud;
mod group;
pub mod linalg;
mod sampling;
mod stabilizer;

pub use cloud::{PointCloud, PointCloudJson};
pub use group::{
    GroupElement, GroupElementJson, GroupTag, OrthogonalMatrix, Permutation, RotationMatrix,
    TranslationVector, DET_TOL, ORTHO_TOL,
};
pub use sampling::{haar_orthogonal, haar_rotation, unit_direction};
pub use stabilizer::{stabilizer, Quadrature, StabilizerDescriptor, MAX_STABILIZER_ORDER};
