use itertools::Itertools;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linalg::{numerical_rank, orthogonal_complement, span_basis, RANK_TOL};
use super::sampling::{haar_orthogonal, haar_rotation};
use super::{GroupElement, GroupTag, Permutation, PointCloud};
use crate::error::{FrameError, Result};

/// Largest finite stabilizer we are willing to enumerate.
pub const MAX_STABILIZER_ORDER: usize = 40_320;

/// Seed of the fixed Haar sample standing in for `SO(c)`/`O(c)`, `c ≥ 3`.
const HAAR_QUADRATURE_SEED: u64 = 0x5E_ED0F_4AA2;

/// Exact description of `stab(X)`.
#[derive(Debug, Clone, PartialEq)]
pub enum StabilizerDescriptor {
    /// Only the identity fixes `X`.
    Trivial,
    /// Every element fixes `X` (e.g. `X = 0` under rotations).
    FullGroup(GroupTag),
    /// Classes of equal columns; the stabilizer permutes within classes.
    SnPartition(Vec<Vec<usize>>),
    /// Elements of `group` fixing `span(X)` pointwise; `basis` is an
    /// orthonormal `d × rank` basis of the span.
    RotSpan {
        group: GroupTag,
        rank: usize,
        basis: DMatrix<f64>,
    },
}

/// How a stabilizer was discretized for averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// The stabilizer is finite and enumerated exactly.
    Exact,
    /// `k` equispaced rotations of a circle (doubled with reflections in
    /// the orthogonal case).
    Circle(usize),
    /// Fixed-seed Haar sample of size `k`.
    Haar(usize),
}

impl StabilizerDescriptor {
    pub fn is_trivial(&self) -> bool {
        matches!(self, StabilizerDescriptor::Trivial)
    }

    /// Elements used to average over the stabilizer, with uniform weights.
    ///
    /// Finite stabilizers are listed exactly. Circle stabilizers use `k`
    /// equispaced angles. The whole group of `SO(c)`/`O(c)` for `c ≥ 3` is
    /// replaced by a fixed Haar sample of size `k`; a continuous stabilizer
    /// of a nonzero cloud with complement dimension `c ≥ 3` is rejected.
    pub fn elements(&self, k: usize) -> Result<(Vec<GroupElement>, Quadrature)> {
        match self {
            StabilizerDescriptor::Trivial => Err(FrameError::UnsupportedStabilizer(
                "trivial stabilizer has no group tag; averaging is the identity".into(),
            )),
            StabilizerDescriptor::SnPartition(classes) => {
                let n: usize = classes.iter().map(|c| c.len()).sum();
                let order: usize = classes
                    .iter()
                    .map(|c| (1..=c.len()).product::<usize>())
                    .product();
                if order > MAX_STABILIZER_ORDER {
                    return Err(FrameError::UnsupportedStabilizer(format!(
                        "stabilizer of order {order} exceeds {MAX_STABILIZER_ORDER}"
                    )));
                }
                let per_class: Vec<Vec<Vec<usize>>> = classes
                    .iter()
                    .map(|c| c.iter().copied().permutations(c.len()).collect())
                    .collect();
                let elems = per_class
                    .iter()
                    .multi_cartesian_product()
                    .map(|choice| {
                        let mut map: Vec<usize> = (0..n).collect();
                        for (class, image) in classes.iter().zip(choice) {
                            for (&from, &to) in class.iter().zip(image.iter()) {
                                map[from] = to;
                            }
                        }
                        GroupElement::Perm(Permutation::new(map).expect("block permutation"))
                    })
                    .collect::<Vec<_>>();
                // multi_cartesian_product of zero iterators yields nothing
                if elems.is_empty() {
                    return Ok((
                        vec![GroupElement::Perm(Permutation::identity(n))],
                        Quadrature::Exact,
                    ));
                }
                Ok((elems, Quadrature::Exact))
            }
            StabilizerDescriptor::FullGroup(tag) => match *tag {
                GroupTag::Sn(n) => {
                    StabilizerDescriptor::SnPartition(vec![(0..n).collect()]).elements(k)
                }
                GroupTag::SO(d) | GroupTag::O(d) => {
                    let basis = DMatrix::zeros(d, 0);
                    complement_elements(*tag, &basis, k, true)
                }
                GroupTag::Trans(_) => Err(FrameError::UnsupportedStabilizer(
                    "translations are never a stabilizer".into(),
                )),
            },
            StabilizerDescriptor::RotSpan { group, basis, .. } => {
                complement_elements(*group, basis, k, false)
            }
        }
    }
}

/// Elements `B Bᵀ + C R Cᵀ` with `C` spanning the complement of `basis` and
/// `R` ranging over `SO(c)` or `O(c)`.
fn complement_elements(
    group: GroupTag,
    basis: &DMatrix<f64>,
    k: usize,
    full: bool,
) -> Result<(Vec<GroupElement>, Quadrature)> {
    let special = matches!(group, GroupTag::SO(_));
    let comp = orthogonal_complement(basis);
    let c = comp.ncols();
    let fixed = basis * basis.transpose();
    let lift = |r: &DMatrix<f64>| -> GroupElement {
        GroupElement::from_matrix_unchecked(group, &fixed + &comp * r * comp.transpose())
    };
    let circle = |k: usize| -> Vec<DMatrix<f64>> {
        (0..k)
            .map(|j| {
                let (s, co) = (2.0 * std::f64::consts::PI * j as f64 / k as f64).sin_cos();
                DMatrix::from_row_slice(2, 2, &[co, -s, s, co])
            })
            .collect()
    };
    match (c, special) {
        (0, _) | (1, true) => Ok((vec![lift(&DMatrix::identity(c, c))], Quadrature::Exact)),
        (1, false) => {
            let flip = DMatrix::from_element(1, 1, -1.0);
            Ok((
                vec![lift(&DMatrix::identity(1, 1)), lift(&flip)],
                Quadrature::Exact,
            ))
        }
        (2, _) => {
            let rots = circle(k.max(3));
            let mut elems: Vec<GroupElement> = rots.iter().map(&lift).collect();
            if !special {
                let refl = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
                elems.extend(rots.iter().map(|r| lift(&(r * &refl))));
            }
            Ok((elems, Quadrature::Circle(k.max(3))))
        }
        _ if full => {
            let mut rng = ChaCha8Rng::seed_from_u64(HAAR_QUADRATURE_SEED);
            let elems = (0..k.max(1))
                .map(|_| {
                    let r = if special {
                        haar_rotation(c, &mut rng).matrix().clone()
                    } else {
                        haar_orthogonal(c, &mut rng).matrix().clone()
                    };
                    lift(&r)
                })
                .collect();
            Ok((elems, Quadrature::Haar(k.max(1))))
        }
        _ => Err(FrameError::UnsupportedStabilizer(format!(
            "no quadrature for a {c}-dimensional rotational stabilizer in {group}"
        ))),
    }
}

/// Computes `stab(X)` for `group`.
///
/// For `S_n`, two columns are equal when their max-norm difference is at most
/// `eq_tol` (`0` means exact). For rotations, the stabilizer is determined by
/// the numerical rank of `X` at [`RANK_TOL`].
pub fn stabilizer(x: &PointCloud, group: GroupTag, eq_tol: f64) -> Result<StabilizerDescriptor> {
    group.check_acts_on(x)?;
    match group {
        GroupTag::Sn(n) => {
            let mut classes: Vec<Vec<usize>> = Vec::new();
            for j in 0..n {
                let found = classes
                    .iter_mut()
                    .find(|c| (x.column(c[0]) - x.column(j)).amax() <= eq_tol);
                match found {
                    Some(c) => c.push(j),
                    None => classes.push(vec![j]),
                }
            }
            if classes.len() == n {
                Ok(StabilizerDescriptor::Trivial)
            } else {
                Ok(StabilizerDescriptor::SnPartition(classes))
            }
        }
        GroupTag::Trans(_) => Ok(StabilizerDescriptor::Trivial),
        GroupTag::SO(d) | GroupTag::O(d) => {
            if x.is_zero() {
                return Ok(StabilizerDescriptor::FullGroup(group));
            }
            let rank = numerical_rank(x.matrix(), RANK_TOL);
            let trivial_at = if matches!(group, GroupTag::SO(_)) {
                d - 1
            } else {
                d
            };
            if rank >= trivial_at {
                Ok(StabilizerDescriptor::Trivial)
            } else {
                Ok(StabilizerDescriptor::RotSpan {
                    group,
                    rank,
                    basis: span_basis(x.matrix(), RANK_TOL),
                })
            }
        }
    }
}
