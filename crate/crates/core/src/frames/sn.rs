//! Frames for `S_n` acting on the columns of a point cloud.

use std::collections::HashMap;
use std::f64::consts::PI;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::measure::{Atom, WeightedFrame};
use crate::algebra::linalg::orthogonal_complement;
use crate::algebra::{unit_direction, GroupElement, GroupTag, Permutation, PointCloud};
use crate::error::{FrameError, Result};

/// Largest `n` for which the full Reynolds frame (`n!` atoms) is built.
pub const MAX_REYNOLDS_N: usize = 8;

/// Seed for the padding directions drawn by [`adversarial_unseparated`].
const ADVERSARY_SEED: u64 = 0xAD5E_55A1;

/// Unit directions `a_1, .., a_m` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionCollection {
    d: usize,
    dirs: Vec<DVector<f64>>,
}

impl DirectionCollection {
    pub fn new(d: usize, dirs: Vec<DVector<f64>>) -> Result<Self> {
        for a in &dirs {
            if a.len() != d {
                return Err(FrameError::DimensionMismatch(format!(
                    "direction of length {} in R^{d}",
                    a.len()
                )));
            }
            if (a.norm() - 1.0).abs() > 1e-12 {
                return Err(FrameError::InvalidInput(format!(
                    "direction has norm {}",
                    a.norm()
                )));
            }
        }
        Ok(Self { d, dirs })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn dirs(&self) -> &[DVector<f64>] {
        &self.dirs
    }
}

/// The permutation listing column indices in increasing order of `values`,
/// equal values kept in index order. As a group element `g`, `g⁻¹X` is the
/// sorted cloud.
pub fn stable_argsort(values: &[f64]) -> Permutation {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    Permutation::new(idx).expect("argsort is a bijection")
}

/// Uniform weight on all `n!` permutations.
pub fn reynolds_frame(n: usize) -> Result<WeightedFrame> {
    if n > MAX_REYNOLDS_N {
        return Err(FrameError::TooLarge {
            n,
            limit: MAX_REYNOLDS_N,
        });
    }
    let elements = (0..n)
        .permutations(n)
        .map(|p| GroupElement::Perm(Permutation::new(p).expect("permutation")))
        .collect();
    WeightedFrame::uniform(GroupTag::Sn(n), elements)
}

/// Returns the unique `τ` with `aᵀx_{τ(1)} < .. < aᵀx_{τ(n)}`, or `None` if
/// two projections coincide exactly.
pub fn is_a_separated(x: &PointCloud, a: &DVector<f64>) -> Option<Permutation> {
    let p = x.project(a);
    let tau = stable_argsort(&p);
    let strict = tau.map().windows(2).all(|w| p[w[0]] < p[w[1]]);
    strict.then_some(tau)
}

/// A pair of columns whose projections onto `a` agree within
/// `tol · scale`, where `scale` is the largest column difference norm.
pub fn tied_pair(x: &PointCloud, a: &DVector<f64>, tol: f64) -> Option<(usize, usize)> {
    let p = x.project(a);
    let mut scale: f64 = 0.0;
    for s in 0..x.n() {
        for t in (s + 1)..x.n() {
            scale = scale.max((x.column(s) - x.column(t)).norm());
        }
    }
    let tau = stable_argsort(&p);
    tau.map()
        .windows(2)
        .find(|w| (p[w[1]] - p[w[0]]).abs() <= tol * scale)
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}

/// `m = n(d − 1)` uniformly random unit directions.
pub fn separated_collection<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    rng: &mut R,
) -> Result<DirectionCollection> {
    if n < 2 || d < 2 {
        return Err(FrameError::InvalidInput(format!(
            "need n, d > 1, got n = {n}, d = {d}"
        )));
    }
    let dirs = (0..n * (d - 1)).map(|_| unit_direction(d, rng)).collect();
    DirectionCollection::new(d, dirs)
}

/// Sorting frame over a fixed collection: direction `a_i` contributes its
/// sorting permutation with weight proportional to
/// `min_{s≠t} |a_iᵀ(x_s − x_t)|`.
pub fn frame_separated(x: &PointCloud, dirs: &DirectionCollection) -> Result<WeightedFrame> {
    if dirs.d() != x.d() {
        return Err(FrameError::DimensionMismatch(format!(
            "directions in R^{} for a cloud in R^{}",
            dirs.d(),
            x.d()
        )));
    }
    if !x.has_distinct_columns() {
        return Err(FrameError::InvalidInput(
            "separated frame needs pairwise distinct columns".into(),
        ));
    }
    let mut atoms = Vec::new();
    for a in dirs.dirs() {
        let p = x.project(a);
        let tau = stable_argsort(&p);
        let gap = tau
            .map()
            .windows(2)
            .map(|w| p[w[1]] - p[w[0]])
            .fold(f64::INFINITY, f64::min);
        // a single point is separated by every direction
        let gap = if gap.is_infinite() { 1.0 } else { gap };
        if gap > 0.0 {
            atoms.push(Atom {
                weight: gap,
                element: GroupElement::Perm(tau),
            });
        }
    }
    if atoms.is_empty() {
        return Err(FrameError::NotSeparated);
    }
    WeightedFrame::new(GroupTag::Sn(x.n()), atoms)
}

/// Angles in `[0, 2π)` where the argsort along `(cos θ, sin θ)` can change:
/// `a ⟂ x_s − x_t` for every pair of distinct columns.
pub fn critical_angles_d2(x: &PointCloud) -> Vec<f64> {
    assert_eq!(x.d(), 2, "critical angles are defined for planar clouds");
    let mut angles = Vec::new();
    for s in 0..x.n() {
        for t in (s + 1)..x.n() {
            let dx = x.get(0, t) - x.get(0, s);
            let dy = x.get(1, t) - x.get(1, s);
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            let base = dy.atan2(dx) + PI / 2.0;
            for theta in [base, base + PI] {
                angles.push(theta.rem_euclid(2.0 * PI));
            }
        }
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    angles
}

/// The argsort frame for `d = 2`, with weights equal to the normalized arc
/// length of the directions producing each permutation.
pub fn frame_argsort_exact_d2(x: &PointCloud) -> Result<WeightedFrame> {
    if x.d() != 2 {
        return Err(FrameError::DimensionMismatch(format!(
            "exact argsort frame needs d = 2, got {}",
            x.d()
        )));
    }
    let angles = critical_angles_d2(x);
    let dir = |theta: f64| DVector::from_column_slice(&[theta.cos(), theta.sin()]);
    if angles.is_empty() {
        let tau = stable_argsort(&x.project(&dir(0.0)));
        return Ok(WeightedFrame::delta(GroupElement::Perm(tau)));
    }
    let k = angles.len();
    let atoms = (0..k)
        .map(|i| {
            let start = angles[i];
            let end = if i + 1 < k {
                angles[i + 1]
            } else {
                angles[0] + 2.0 * PI
            };
            let tau = stable_argsort(&x.project(&dir(0.5 * (start + end))));
            Atom {
                weight: (end - start) / (2.0 * PI),
                element: GroupElement::Perm(tau),
            }
        })
        .collect();
    WeightedFrame::new(GroupTag::Sn(x.n()), atoms)
}

/// Monte-Carlo estimate of the argsort frame: empirical frequencies of the
/// stable argsort along `nsamples` uniform directions.
pub fn frame_argsort_mc<R: Rng + ?Sized>(
    x: &PointCloud,
    nsamples: usize,
    rng: &mut R,
) -> Result<WeightedFrame> {
    if nsamples == 0 {
        return Err(FrameError::InvalidInput("need at least one sample".into()));
    }
    let mut counts: HashMap<Permutation, usize> = HashMap::new();
    for _ in 0..nsamples {
        let a = unit_direction(x.d(), rng);
        *counts.entry(stable_argsort(&x.project(&a))).or_default() += 1;
    }
    let mut atoms: Vec<Atom> = counts
        .into_iter()
        .map(|(p, c)| Atom {
            weight: c as f64,
            element: GroupElement::Perm(p),
        })
        .collect();
    // HashMap order is arbitrary; fix it for reproducible output
    atoms.sort_by(|a, b| a.element.as_perm().cmp(&b.element.as_perm()));
    WeightedFrame::new(GroupTag::Sn(x.n()), atoms)
}

fn binomial(m: u128, k: u128) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    (1..=k).fold(1u128, |acc, i| acc * (m - k + i) / i)
}

/// Upper bound `2 Σ_{k<d} C((n² − n − 2)/2, k)` on the support of the
/// argsort frame: regions cut out by the `C(n, 2)` hyperplanes
/// `a ⟂ x_s − x_t`.
pub fn argsort_cardinality_bound(n: usize, d: usize) -> u128 {
    assert!(n >= 2 && d >= 1, "bound needs n >= 2, d >= 1");
    let pairs = (n * (n - 1) / 2) as u128;
    2 * (0..d as u128).map(|k| binomial(pairs - 1, k)).sum::<u128>()
}

/// `(d − 1)⌊n/2⌋ + 1 − Σ_{i=1}^{⌊n/2⌋} (d − 1 − 2^i)_+`, the minimum
/// cardinality of any continuous weakly equivariant frame for `S_n`.
pub fn sn_frame_lower_bound(n: usize, d: usize) -> u64 {
    assert!(n >= 1 && d >= 1, "bound needs n, d >= 1");
    let half = (n / 2) as i128;
    let dm1 = d as i128 - 1;
    let penalty: i128 = (1..=half)
        .map(|i| {
            let pow = if i >= 100 { i128::MAX / 4 } else { 1i128 << i };
            (dm1 - pow).max(0)
        })
        .sum();
    let k = dm1 * half + 1 - penalty;
    u64::try_from(k).expect("lower bound is positive")
}

/// A cloud with distinct columns that no direction of a collection
/// separates, with a tied pair per direction as certificate.
#[derive(Debug, Clone)]
pub struct UnseparatedWitness {
    pub cloud: PointCloud,
    /// `(direction index, s, t)` with `aᵀx_s = aᵀx_t` up to round-off.
    pub ties: Vec<(usize, usize, usize)>,
    /// Directions appended to reach the `d(n − 1) − 1` the construction uses.
    pub padding: usize,
}

/// Relative tolerance under which two projections count as tied.
pub const TIE_TOL: f64 = 1e-9;

fn stack(vs: &[&DVector<f64>]) -> DMatrix<f64> {
    let owned: Vec<DVector<f64>> = vs.iter().map(|&v| v.clone()).collect();
    DMatrix::from_columns(&owned)
}

fn dependent(vs: &[&DVector<f64>]) -> bool {
    let m = stack(vs);
    m.determinant().abs() <= 1e-12
}

/// Nonzero unit vector orthogonal to all of `vs` (which span at most a
/// hyperplane).
fn normal_to(vs: &[&DVector<f64>], d: usize) -> DVector<f64> {
    if d == 2 {
        // exact perpendicular: a·perp(a) rounds to zero exactly
        let a = vs[0];
        return DVector::from_column_slice(&[-a[1], a[0]]);
    }
    let m = stack(vs);
    let basis = crate::algebra::linalg::span_basis(&m, 1e-12);
    orthogonal_complement(&basis).column(0).into_owned()
}

/// Builds a cloud of `n` distinct points that no direction in `dirs`
/// separates, following the block construction: first point at the origin,
/// a second point orthogonal to the first `d − 1` directions, one point per
/// group of `d` generic directions solving a `d × d` linear system, and one
/// point orthogonal to each linearly dependent block.
///
/// The construction handles up to `d(n − 1) − 1` directions; shorter
/// collections are padded with fixed-seed random directions, which only
/// makes the requirement stronger.
pub fn adversarial_unseparated(dirs: &DirectionCollection, n: usize) -> Result<UnseparatedWitness> {
    let d = dirs.d();
    let m = dirs.len();
    if d < 2 || n < 2 {
        return Err(FrameError::InvalidInput(format!(
            "need n, d >= 2, got n = {n}, d = {d}"
        )));
    }
    let capacity = d * (n - 1) - 1;
    if m > capacity {
        return Err(FrameError::Construction(format!(
            "{m} directions in R^{d} can separate every cloud of {n} distinct points; \
             the construction handles at most d(n-1)-1 = {capacity}"
        )));
    }
    let mut last_err = None;
    for attempt in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(ADVERSARY_SEED ^ attempt);
        let mut all: Vec<DVector<f64>> = dirs.dirs().to_vec();
        while all.len() < capacity {
            all.push(unit_direction(d, &mut rng));
        }
        match block_construction(&all, d, n) {
            Ok(cloud) => {
                let mut ties = Vec::with_capacity(m);
                for (i, a) in dirs.dirs().iter().enumerate() {
                    match tied_pair(&cloud, a, TIE_TOL) {
                        Some((s, t)) => ties.push((i, s, t)),
                        None => {
                            last_err = Some(FrameError::Construction(format!(
                                "direction {i} separates the result"
                            )));
                            break;
                        }
                    }
                }
                if ties.len() == m && distinct_columns_rel(&cloud, 1e-6) {
                    return Ok(UnseparatedWitness {
                        cloud,
                        ties,
                        padding: capacity - m,
                    });
                }
                if last_err.is_none() {
                    last_err = Some(FrameError::Construction("points are not distinct".into()));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| FrameError::Construction("no attempt succeeded".into())))
}

fn distinct_columns_rel(x: &PointCloud, tol: f64) -> bool {
    let scale = x.frobenius_norm().max(f64::MIN_POSITIVE);
    (0..x.n())
        .tuple_combinations()
        .all(|(s, t)| (x.column(s) - x.column(t)).norm() > tol * scale)
}

fn block_construction(all: &[DVector<f64>], d: usize, n: usize) -> Result<PointCloud> {
    // Split into generic directions (every d-subset independent) and
    // dependent blocks of size d.
    let mut generic: Vec<&DVector<f64>> = all.iter().collect();
    let mut blocks: Vec<Vec<&DVector<f64>>> = Vec::new();
    'outer: loop {
        for combo in (0..generic.len()).combinations(d) {
            let vs: Vec<&DVector<f64>> = combo.iter().map(|&i| generic[i]).collect();
            if dependent(&vs) {
                for &i in combo.iter().rev() {
                    generic.remove(i);
                }
                blocks.push(vs);
                continue 'outer;
            }
        }
        break;
    }
    let s = generic.len();
    debug_assert_eq!((s + 1) % d, 0);
    let v = (s + 1) / d - 1;

    let mut points: Vec<DVector<f64>> = Vec::with_capacity(n);
    points.push(DVector::zeros(d));
    let x2 = normal_to(&generic[..d - 1], d);
    points.push(x2.clone());
    for p in 1..=v {
        // rows a_{pd}, .., a_{pd+d-1} (1-based)
        let rows: Vec<&DVector<f64>> = (0..d).map(|j| generic[p * d + j - 1]).collect();
        let mut mat = DMatrix::zeros(d, d);
        for (r, a) in rows.iter().enumerate() {
            mat.set_row(r, &a.transpose());
        }
        let mut rhs = DVector::zeros(d);
        rhs[d - 1] = rows[d - 1].dot(&x2);
        let sol = mat
            .lu()
            .solve(&rhs)
            .ok_or_else(|| FrameError::Construction(format!("linear system {p} is singular")))?;
        points.push(sol);
    }
    for block in &blocks {
        let normal = normal_to(&block[..d.min(block.len())], d);
        let reach = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        points.push(normal * (1.0 + reach));
    }
    if points.len() != n {
        return Err(FrameError::Construction(format!(
            "built {} points, expected {n}",
            points.len()
        )));
    }
    PointCloud::from_matrix(DMatrix::from_columns(&points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(cols: &[[f64; 2]]) -> PointCloud {
        PointCloud::from_columns(cols).unwrap()
    }

    fn dir(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn reynolds_examples() {
        let f1 = reynolds_frame(1).unwrap();
        assert_eq!(f1.len(), 1);
        assert_eq!(f1.atoms()[0].weight, 1.0);
        let f3 = reynolds_frame(3).unwrap();
        assert_eq!(f3.len(), 6);
        assert!(f3
            .atoms()
            .iter()
            .all(|a| (a.weight - 1.0 / 6.0).abs() < 1e-15));
        assert!(matches!(
            reynolds_frame(9),
            Err(FrameError::TooLarge { .. })
        ));
    }

    #[test]
    fn separation_examples() {
        let x = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        assert!(is_a_separated(&x, &dir(&[1.0, 0.0])).unwrap().is_identity());
        assert!(is_a_separated(&x, &dir(&[0.0, 1.0])).is_none());
        let y = cloud(&[[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(
            is_a_separated(&y, &dir(&[1.0, 0.0])).unwrap(),
            Permutation::transposition(2, 0, 1)
        );
    }

    #[test]
    fn collection_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(separated_collection(3, 2, &mut rng).unwrap().len(), 3);
        assert_eq!(separated_collection(4, 3, &mut rng).unwrap().len(), 8);
        assert!(separated_collection(1, 3, &mut rng).is_err());
    }

    #[test]
    fn separated_frame_single_atom() {
        let x = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        let dirs = DirectionCollection::new(2, vec![dir(&[1.0, 0.0]), dir(&[0.0, 1.0])]).unwrap();
        let f = frame_separated(&x, &dirs).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.atoms()[0].weight, 1.0);
        assert!(f.atoms()[0].element.is_identity(0.0));
        let only_y = DirectionCollection::new(2, vec![dir(&[0.0, 1.0])]).unwrap();
        assert_eq!(frame_separated(&x, &only_y), Err(FrameError::NotSeparated));
        let dup = cloud(&[[0.0, 0.0], [0.0, 0.0]]);
        assert!(frame_separated(&dup, &dirs).is_err());
    }

    #[test]
    fn exact_arcs_two_points() {
        let x = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        let f = frame_argsort_exact_d2(&x).unwrap();
        assert_eq!(f.len(), 2);
        for a in f.atoms() {
            assert!((a.weight - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_arcs_equal_columns() {
        let x = cloud(&[[2.0, 1.0], [2.0, 1.0]]);
        let f = frame_argsort_exact_d2(&x).unwrap();
        assert_eq!(f.len(), 1);
        assert!(f.atoms()[0].element.is_identity(0.0));
    }

    #[test]
    fn mc_single_sample() {
        let x = cloud(&[[0.0, 0.0], [1.0, 0.3], [0.2, 2.0]]);
        let f = frame_argsort_mc(&x, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.atoms()[0].weight, 1.0);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(argsort_cardinality_bound(3, 2), 6);
        assert_eq!(argsort_cardinality_bound(2, 2), 2);
        assert_eq!(argsort_cardinality_bound(4, 3), 32);
        assert_eq!(sn_frame_lower_bound(4, 2), 3);
        for n in 1..12 {
            assert_eq!(sn_frame_lower_bound(n, 2), (n / 2 + 1) as u64);
        }
        assert_eq!(sn_frame_lower_bound(2, 5), 3);
    }

    #[test]
    fn adversary_two_points_in_plane() {
        let dirs = DirectionCollection::new(2, vec![dir(&[1.0, 0.0])]).unwrap();
        let w = adversarial_unseparated(&dirs, 2).unwrap();
        assert_eq!(w.cloud, cloud(&[[0.0, 0.0], [0.0, 1.0]]));
        assert!(is_a_separated(&w.cloud, &dir(&[1.0, 0.0])).is_none());
    }

    #[test]
    fn adversary_three_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dirs = DirectionCollection::new(
            2,
            vec![unit_direction(2, &mut rng), unit_direction(2, &mut rng)],
        )
        .unwrap();
        let w = adversarial_unseparated(&dirs, 3).unwrap();
        assert!(w.cloud.has_distinct_columns());
        assert_eq!(w.ties.len(), 2);
    }

    #[test]
    fn adversary_handles_dependent_blocks() {
        // two parallel directions form a dependent block in the plane
        let a = dir(&[0.6, 0.8]);
        let dirs = DirectionCollection::new(2, vec![dir(&[1.0, 0.0]), a.clone(), -a]).unwrap();
        let w = adversarial_unseparated(&dirs, 4).unwrap();
        assert!(w.cloud.has_distinct_columns());
        assert_eq!(w.ties.len(), 3);
    }

    #[test]
    fn adversary_rejects_too_many_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dirs =
            DirectionCollection::new(3, (0..3).map(|_| unit_direction(3, &mut rng)).collect())
                .unwrap();
        assert!(matches!(
            adversarial_unseparated(&dirs, 2),
            Err(FrameError::Construction(_))
        ));
    }
}
