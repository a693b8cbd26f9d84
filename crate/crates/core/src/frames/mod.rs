//! Weighted frames and their constructions.

mod measure;
mod rotation;
mod sn;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use measure::{Atom, AtomJson, WeightedFrame, WeightedFrameJson, MERGE_TOL};
pub use rotation::{
    frame_od, frame_so2, frame_so2_stable, frame_so3_stable, frame_sod, phi_eta, sequence_length,
    so3_diagonals, sod_cardinality_bound, DEFAULT_ETA, WEIGHT_FLOOR,
};
pub use sn::{
    adversarial_unseparated, argsort_cardinality_bound, critical_angles_d2, frame_argsort_exact_d2,
    frame_argsort_mc, frame_separated, is_a_separated, reynolds_frame, separated_collection,
    sn_frame_lower_bound, stable_argsort, tied_pair, DirectionCollection, UnseparatedWitness,
    MAX_REYNOLDS_N, TIE_TOL,
};

use crate::algebra::{GroupTag, PointCloud};
use crate::error::{FrameError, Result};

/// An input-dependent frame `X ↦ μ_X`.
pub trait FrameMap {
    /// The group the frame lives on for inputs shaped like `x`.
    fn group(&self, x: &PointCloud) -> GroupTag;

    fn frame(&self, x: &PointCloud) -> Result<WeightedFrame>;
}

impl<F: Fn(&PointCloud) -> Result<WeightedFrame>> FrameMap for (GroupTag, F) {
    fn group(&self, _x: &PointCloud) -> GroupTag {
        self.0
    }

    fn frame(&self, x: &PointCloud) -> Result<WeightedFrame> {
        (self.1)(x)
    }
}

/// The frame constructions by name, with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameKind {
    Reynolds,
    /// Sorting frame over a fixed direction collection.
    Separated(DirectionCollection),
    ArgsortExact,
    /// Monte-Carlo argsort frame; reseeded on every call so the map is a
    /// deterministic function of `X`.
    ArgsortMc {
        samples: usize,
        seed: u64,
    },
    So2 {
        eta: f64,
    },
    Sod,
    Od,
    So2Stable {
        eta: f64,
    },
    So3Stable,
}

impl FrameKind {
    pub fn name(&self) -> &'static str {
        match self {
            FrameKind::Reynolds => "reynolds",
            FrameKind::Separated(_) => "separated",
            FrameKind::ArgsortExact => "argsort-exact",
            FrameKind::ArgsortMc { .. } => "argsort-mc",
            FrameKind::So2 { .. } => "so2",
            FrameKind::Sod => "sod",
            FrameKind::Od => "od",
            FrameKind::So2Stable { .. } => "so2-stable",
            FrameKind::So3Stable => "so3-stable",
        }
    }

    /// True for frames computed without sampling.
    pub fn is_exact(&self) -> bool {
        !matches!(self, FrameKind::ArgsortMc { .. })
    }
}

impl FrameMap for FrameKind {
    fn group(&self, x: &PointCloud) -> GroupTag {
        match self {
            FrameKind::Reynolds
            | FrameKind::Separated(_)
            | FrameKind::ArgsortExact
            | FrameKind::ArgsortMc { .. } => GroupTag::Sn(x.n()),
            FrameKind::Od => GroupTag::O(x.d()),
            _ => GroupTag::SO(x.d()),
        }
    }

    fn frame(&self, x: &PointCloud) -> Result<WeightedFrame> {
        match self {
            FrameKind::Reynolds => reynolds_frame(x.n()),
            FrameKind::Separated(dirs) => frame_separated(x, dirs),
            FrameKind::ArgsortExact => frame_argsort_exact_d2(x),
            FrameKind::ArgsortMc { samples, seed } => {
                frame_argsort_mc(x, *samples, &mut ChaCha8Rng::seed_from_u64(*seed))
            }
            FrameKind::So2 { eta } => frame_so2(x, *eta),
            FrameKind::Sod => frame_sod(x),
            FrameKind::Od => frame_od(x),
            FrameKind::So2Stable { eta } => frame_so2_stable(x, *eta),
            FrameKind::So3Stable => frame_so3_stable(x),
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a kind name with default parameters. `separated` needs a
/// direction collection and is built by the caller.
impl FromStr for FrameKind {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "reynolds" => FrameKind::Reynolds,
            "argsort-exact" => FrameKind::ArgsortExact,
            "argsort-mc" => FrameKind::ArgsortMc {
                samples: 10_000,
                seed: 0,
            },
            "so2" => FrameKind::So2 { eta: DEFAULT_ETA },
            "sod" => FrameKind::Sod,
            "od" => FrameKind::Od,
            "so2-stable" => FrameKind::So2Stable { eta: DEFAULT_ETA },
            "so3-stable" => FrameKind::So3Stable,
            "separated" => {
                return Err(FrameError::InvalidInput(
                    "separated frames need a direction collection".into(),
                ))
            }
            other => {
                return Err(FrameError::InvalidInput(format!(
                    "unknown frame kind {other:?}"
                )))
            }
        })
    }
}
