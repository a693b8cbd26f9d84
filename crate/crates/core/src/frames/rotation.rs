//! Frames for rotations and orthogonal maps acting on the left of `X`.

use nalgebra::{DMatrix, DVector};

use super::measure::{Atom, WeightedFrame};
use crate::algebra::linalg::{gram_schmidt_rotation, numerical_rank, residual, RANK_TOL};
use crate::algebra::{GroupElement, GroupTag, PointCloud};
use crate::error::{FrameError, Result};

/// Cumulative weight below which an index prefix is dropped.
pub const WEIGHT_FLOOR: f64 = 1e-14;

/// Default cutoff of the ramp `φ_η`.
pub const DEFAULT_ETA: f64 = 0.5;

/// Piecewise-linear ramp: 0 below `eta`, 1 above 1, linear in between.
pub fn phi_eta(t: f64, eta: f64) -> f64 {
    if t <= eta {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        (t - eta) / (1.0 - eta)
    }
}

fn planar(c: f64, s: f64) -> GroupElement {
    GroupElement::from_matrix_unchecked(
        GroupTag::SO(2),
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
    )
}

fn check_planar(z: &PointCloud) -> Result<()> {
    if z.d() != 2 {
        return Err(FrameError::DimensionMismatch(format!(
            "SO(2) frame needs d = 2, got {}",
            z.d()
        )));
    }
    Ok(())
}

/// Phase frame on `C^n ≅ R^{2×n}`: atom `z_i/|z_i|` with weight
/// `φ_η(|z_i| / max_j |z_j|)`.
pub fn frame_so2(z: &PointCloud, eta: f64) -> Result<WeightedFrame> {
    check_planar(z)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(FrameError::InvalidInput(format!(
            "eta must lie in (0, 1), got {eta}"
        )));
    }
    let norms: Vec<f64> = (0..z.n()).map(|j| z.column(j).norm()).collect();
    let top = norms.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(WeightedFrame::delta(GroupTag::SO(2).identity()));
    }
    let atoms = norms
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0.0)
        .map(|(j, &r)| Atom {
            weight: phi_eta(r / top, eta),
            element: planar(z.get(0, j) / r, z.get(1, j) / r),
        })
        .collect();
    WeightedFrame::new(GroupTag::SO(2), atoms)
}

/// [`frame_so2`] with every atom `g` split into `±g` at half weight.
pub fn frame_so2_stable(z: &PointCloud, eta: f64) -> Result<WeightedFrame> {
    let base = frame_so2(z, eta)?;
    let atoms = base
        .atoms()
        .iter()
        .flat_map(|a| {
            let m = a.element.matrix().expect("rotation").clone();
            [
                Atom {
                    weight: 0.5 * a.weight,
                    element: a.element.clone(),
                },
                Atom {
                    weight: 0.5 * a.weight,
                    element: GroupElement::from_matrix_unchecked(GroupTag::SO(2), -m),
                },
            ]
        })
        .collect();
    WeightedFrame::new(GroupTag::SO(2), atoms)
}

/// Gram-Schmidt frame for `SO(d)`: sequences of `r = min(rank X, d − 1)`
/// columns weighted by ratios of parallelotope volumes.
pub fn frame_sod(x: &PointCloud) -> Result<WeightedFrame> {
    gram_schmidt_frame(x, true)
}

/// Gram-Schmidt frame for `O(d)`, with `r = rank X`.
pub fn frame_od(x: &PointCloud) -> Result<WeightedFrame> {
    gram_schmidt_frame(x, false)
}

/// Depth of the index sequences used at `x`.
pub fn sequence_length(x: &PointCloud, special: bool) -> usize {
    let rank = numerical_rank(x.matrix(), RANK_TOL);
    if special {
        rank.min(x.d().saturating_sub(1))
    } else {
        rank
    }
}

fn gram_schmidt_frame(x: &PointCloud, special: bool) -> Result<WeightedFrame> {
    let d = x.d();
    let group = if special {
        GroupTag::SO(d)
    } else {
        GroupTag::O(d)
    };
    if x.is_zero() {
        return Ok(WeightedFrame::delta(group.identity()));
    }
    let r = sequence_length(x, special);
    let scale = x.frobenius_norm();
    let cols: Vec<DVector<f64>> = (0..x.n()).map(|j| x.column(j).into_owned()).collect();

    let mut atoms = Vec::new();
    // (index prefix, orthonormal basis of its span or None once dependent, W)
    type Node = (Vec<usize>, Option<Vec<DVector<f64>>>, f64);
    let mut stack: Vec<Node> = vec![(Vec::new(), Some(Vec::new()), 1.0)];
    while let Some((prefix, basis, w)) = stack.pop() {
        if prefix.len() == r {
            let gs = gram_schmidt_rotation(x.matrix(), &prefix, special, RANK_TOL);
            atoms.push(Atom {
                weight: w,
                element: GroupElement::from_matrix_unchecked(group, gs.g),
            });
            continue;
        }
        let residuals: Vec<Option<DVector<f64>>> = match &basis {
            Some(b) => cols.iter().map(|c| Some(residual(b, c))).collect(),
            None => vec![None; cols.len()],
        };
        let lens: Vec<f64> = residuals
            .iter()
            .map(|r| r.as_ref().map_or(0.0, |v| v.norm()))
            .collect();
        let total: f64 = lens.iter().sum();
        // push in reverse so sequences pop in lexicographic order
        for j in (0..cols.len()).rev() {
            let wj = if total > 0.0 {
                lens[j] / total
            } else {
                1.0 / cols.len() as f64
            };
            let next = w * wj;
            if next < WEIGHT_FLOOR {
                continue;
            }
            let next_basis = match (&basis, &residuals[j]) {
                (Some(b), Some(res)) if lens[j] > RANK_TOL * scale => {
                    let mut nb = b.clone();
                    nb.push(res / lens[j]);
                    Some(nb)
                }
                _ => None,
            };
            let mut p = prefix.clone();
            p.push(j);
            stack.push((p, next_basis, next));
        }
    }
    WeightedFrame::new(group, atoms)
}

/// The four diagonal matrices in `SO(3)`.
pub fn so3_diagonals() -> [DMatrix<f64>; 4] {
    let diag =
        |a: f64, b: f64, c: f64| DMatrix::from_diagonal(&DVector::from_column_slice(&[a, b, c]));
    [
        diag(1.0, 1.0, 1.0),
        diag(1.0, -1.0, -1.0),
        diag(-1.0, -1.0, 1.0),
        diag(-1.0, 1.0, -1.0),
    ]
}

/// [`frame_sod`] in `d = 3` with every atom `g` replaced by `g d^(k)`,
/// `k = 1..4`, at a quarter of its weight.
pub fn frame_so3_stable(x: &PointCloud) -> Result<WeightedFrame> {
    if x.d() != 3 {
        return Err(FrameError::DimensionMismatch(format!(
            "stable SO(3) frame needs d = 3, got {}",
            x.d()
        )));
    }
    let base = frame_sod(x)?;
    let diags = so3_diagonals();
    let atoms = base
        .atoms()
        .iter()
        .flat_map(|a| {
            let g = a.element.matrix().expect("rotation").clone();
            diags.iter().map(move |dk| Atom {
                weight: 0.25 * a.weight,
                element: GroupElement::from_matrix_unchecked(GroupTag::SO(3), &g * dk),
            })
        })
        .collect();
    WeightedFrame::new(GroupTag::SO(3), atoms)
}

/// `n (n − 1) ⋯ (n − d + 2)`, the support bound for [`frame_sod`].
pub fn sod_cardinality_bound(n: usize, d: usize) -> u128 {
    (0..d.saturating_sub(1))
        .map(|k| n.saturating_sub(k) as u128)
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{haar_rotation, RotationMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud<C: AsRef<[f64]>>(cols: &[C]) -> PointCloud {
        PointCloud::from_columns(cols).unwrap()
    }

    #[test]
    fn ramp() {
        assert_eq!(phi_eta(0.2, 0.5), 0.0);
        assert_eq!(phi_eta(0.75, 0.5), 0.5);
        assert_eq!(phi_eta(1.0, 0.5), 1.0);
    }

    #[test]
    fn so2_examples() {
        let z = cloud(&[[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]);
        let f = frame_so2(&z, 0.5).unwrap();
        assert_eq!(f.len(), 1);
        assert!(f.atoms()[0].element.is_identity(0.0));

        let f0 = frame_so2(&PointCloud::zeros(2, 3), 0.5).unwrap();
        assert_eq!(f0, WeightedFrame::delta(GroupTag::SO(2).identity()));

        let zi = cloud(&[[0.0, 1.0], [0.0, 1.0]]);
        let fi = frame_so2(&zi, 0.5).unwrap();
        assert_eq!(fi.len(), 1);
        assert!(fi.atoms()[0].element.approx_eq(
            &GroupElement::Rotation(RotationMatrix::planar(std::f64::consts::FRAC_PI_2)),
            1e-15
        ));
    }

    #[test]
    fn so2_stable_doubles() {
        let z = cloud(&[[1.0, 0.0], [0.0, 0.0]]);
        let f = frame_so2_stable(&z, 0.5).unwrap();
        assert_eq!(f.len(), 2);
        let minus = GroupElement::Rotation(RotationMatrix::planar(std::f64::consts::PI));
        assert!((f.weight_of(&minus) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sod_two_basis_columns() {
        let x = cloud(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let f = frame_sod(&x).unwrap();
        assert_eq!(f.len(), 2);
        let id = GroupTag::SO(3).identity();
        assert!((f.weight_of(&id) - 0.5).abs() < 1e-15);
        let swap = GroupElement::from_matrix_unchecked(
            GroupTag::SO(3),
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0]),
        );
        assert!((f.weight_of(&swap) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sod_single_direction_weights_by_norm() {
        let x = cloud(&[[1.0, 2.0, 2.0], [0.0, 0.0, 0.0], [-2.0, -4.0, -4.0]]);
        let f = frame_sod(&x).unwrap();
        assert_eq!(f.len(), 2);
        let w: Vec<f64> = f.atoms().iter().map(|a| a.weight).collect();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15 && (w[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sod_support_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = PointCloud::from_matrix(DMatrix::from_fn(3, 4, |_, _| {
            rand::Rng::random::<f64>(&mut rng) - 0.5
        }))
        .unwrap();
        assert!(frame_sod(&x).unwrap().len() <= 12);
        assert!(frame_od(&x).unwrap().len() <= 24);
        assert_eq!(sod_cardinality_bound(4, 3), 12);
    }

    #[test]
    fn sod_equivariant_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = PointCloud::from_matrix(DMatrix::from_fn(3, 4, |_, _| {
            rand::Rng::random::<f64>(&mut rng) - 0.5
        }))
        .unwrap();
        let g = GroupElement::Rotation(haar_rotation(3, &mut rng));
        let gx = g.act(&x).unwrap();
        let lhs = frame_sod(&gx).unwrap();
        let rhs = frame_sod(&x).unwrap().pushforward(&g).unwrap();
        assert_eq!(lhs.len(), rhs.len());
        for a in rhs.atoms() {
            let found = lhs
                .atoms()
                .iter()
                .find(|b| b.element.approx_eq(&a.element, 1e-9))
                .expect("matched atom");
            assert!((found.weight - a.weight).abs() < 1e-10);
        }
    }

    #[test]
    fn so3_stable_diagonals_cancel() {
        let sum = so3_diagonals()
            .iter()
            .fold(DMatrix::zeros(3, 3), |acc, d| acc + d);
        assert_eq!(sum, DMatrix::zeros(3, 3));
        let f = frame_so3_stable(&PointCloud::zeros(3, 2)).unwrap();
        assert_eq!(f.len(), 4);
        assert!((f.total_weight() - 1.0).abs() < 1e-15);
    }
}
