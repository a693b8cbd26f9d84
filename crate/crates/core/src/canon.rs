//! Canonicalizations: invariant maps choosing one representative per orbit.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::algebra::linalg::{procrustes_rotation, psd_sqrt};
use crate::algebra::{GroupTag, PointCloud};
use crate::error::{FrameError, Result};

/// Subtracts the first column from every column. Returns the canonical
/// cloud and the translation `x_1` that maps it back.
pub fn canon_translation(x: &PointCloud) -> (PointCloud, DVector<f64>) {
    let t: DVector<f64> = x.column(0).into_owned();
    let mut m = x.matrix().clone();
    for mut c in m.column_iter_mut() {
        c -= &t;
    }
    (PointCloud::from_matrix(m).expect("finite"), t)
}

pub fn canon_sort(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(p, q)| p.total_cmp(q))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Columns in lexicographic order. Discontinuous across first-coordinate
/// ties.
pub fn canon_lex(x: &PointCloud) -> PointCloud {
    let mut cols = x.columns();
    cols.sort_by(|a, b| lex_cmp(a, b));
    PointCloud::from_columns(&cols).expect("same entries")
}

/// `‖x‖ e_1`.
pub fn canon_norm_axis(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    if let Some(first) = out.first_mut() {
        *first = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    out
}

/// Rotates `Z ∈ C^n` so that `z_1` is real and positive; unchanged when
/// `z_1 = 0`. Discontinuous there.
pub fn canon_so2_phase(z: &PointCloud) -> Result<PointCloud> {
    if z.d() != 2 {
        return Err(FrameError::DimensionMismatch(format!(
            "phase canonicalization needs d = 2, got {}",
            z.d()
        )));
    }
    let (a, b) = (z.get(0, 0), z.get(1, 0));
    let r = a.hypot(b);
    if r == 0.0 {
        return Ok(z.clone());
    }
    let (c, s) = (a / r, -b / r);
    let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    PointCloud::from_matrix(rot * z.matrix())
}

/// `(XᵀX)^{1/2}` after padding `X` with zero columns to `d × d`, truncated
/// back to `d × n`. Same Gram matrix as `X`; needs `n ≤ d`.
pub fn canon_od_gram(x: &PointCloud) -> Result<PointCloud> {
    let (d, n) = (x.d(), x.n());
    if n > d {
        return Err(FrameError::InvalidInput(format!(
            "Gram canonicalization needs n <= d, got n = {n}, d = {d}"
        )));
    }
    let mut padded = DMatrix::zeros(d, d);
    padded.columns_mut(0, n).copy_from(x.matrix());
    let root = psd_sqrt(&(padded.transpose() * &padded))?;
    PointCloud::from_matrix(root.columns(0, n).into_owned())
}

/// [`canon_od_gram`] restricted to `n < d`, where `SO(d)` and `O(d)` orbits
/// coincide.
pub fn canon_sod(x: &PointCloud) -> Result<PointCloud> {
    if x.n() >= x.d() {
        return Err(FrameError::InvalidInput(format!(
            "rotation canonicalization needs n < d, got n = {}, d = {}",
            x.n(),
            x.d()
        )));
    }
    canon_od_gram(x)
}

/// The canonicalizations by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CanonMethod {
    Translation,
    Sort,
    Lex,
    NormAxis,
    So2Phase,
    OdGram,
    Sod,
}

impl CanonMethod {
    pub const ALL: [CanonMethod; 7] = [
        CanonMethod::Translation,
        CanonMethod::Sort,
        CanonMethod::Lex,
        CanonMethod::NormAxis,
        CanonMethod::So2Phase,
        CanonMethod::OdGram,
        CanonMethod::Sod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CanonMethod::Translation => "translation",
            CanonMethod::Sort => "sort",
            CanonMethod::Lex => "lex",
            CanonMethod::NormAxis => "norm-axis",
            CanonMethod::So2Phase => "so2-phase",
            CanonMethod::OdGram => "od-gram",
            CanonMethod::Sod => "sod",
        }
    }

    pub fn group(self, x: &PointCloud) -> GroupTag {
        match self {
            CanonMethod::Translation => GroupTag::Trans(x.d()),
            CanonMethod::Sort | CanonMethod::Lex => GroupTag::Sn(x.n()),
            CanonMethod::NormAxis | CanonMethod::OdGram => GroupTag::O(x.d()),
            CanonMethod::So2Phase => GroupTag::SO(2),
            CanonMethod::Sod => GroupTag::SO(x.d()),
        }
    }

    pub fn continuous_claimed(self) -> bool {
        !matches!(self, CanonMethod::Lex | CanonMethod::So2Phase)
    }

    /// Checks the shape constraint of the method's domain.
    pub fn check_domain(self, x: &PointCloud) -> Result<()> {
        let bad = |msg: String| Err(FrameError::InvalidInput(msg));
        match self {
            CanonMethod::Sort if x.d() != 1 => {
                bad(format!("sort acts on 1 x n inputs, got d = {}", x.d()))
            }
            CanonMethod::Lex if x.d() < 2 => bad("lexicographic sort needs d >= 2".into()),
            CanonMethod::NormAxis if x.n() != 1 => bad(format!(
                "norm-axis acts on a single vector, got n = {}",
                x.n()
            )),
            CanonMethod::So2Phase if x.d() != 2 => {
                bad(format!("so2-phase needs d = 2, got {}", x.d()))
            }
            CanonMethod::OdGram if x.n() > x.d() => {
                bad(format!("od-gram needs n <= d, got n = {}", x.n()))
            }
            CanonMethod::Sod if x.n() >= x.d() => {
                bad(format!("sod needs n < d, got n = {}", x.n()))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(self, x: &PointCloud) -> Result<PointCloud> {
        self.check_domain(x)?;
        match self {
            CanonMethod::Translation => Ok(canon_translation(x).0),
            CanonMethod::Sort => PointCloud::from_line(&canon_sort(x.matrix().as_slice())),
            CanonMethod::Lex => Ok(canon_lex(x)),
            CanonMethod::NormAxis => PointCloud::from_matrix(DMatrix::from_column_slice(
                x.d(),
                1,
                &canon_norm_axis(x.matrix().as_slice()),
            )),
            CanonMethod::So2Phase => canon_so2_phase(x),
            CanonMethod::OdGram => canon_od_gram(x),
            CanonMethod::Sod => canon_sod(x),
        }
    }

    /// Whether `y` lies in the orbit of `x`, compared through a complete
    /// invariant of the group: column multiset, Gram matrix, rotational
    /// alignment or column differences.
    pub fn same_orbit(self, x: &PointCloud, y: &PointCloud, tol: f64) -> bool {
        if x.check_same_shape(y).is_err() {
            return false;
        }
        match self {
            CanonMethod::Sort | CanonMethod::Lex => canon_lex(x).distance(&canon_lex(y)) <= tol,
            CanonMethod::NormAxis | CanonMethod::OdGram => (x.gram() - y.gram()).amax() <= tol,
            CanonMethod::So2Phase | CanonMethod::Sod => {
                procrustes_rotation(x.matrix(), y.matrix()).1 <= tol
            }
            CanonMethod::Translation => {
                let (a, _) = canon_translation(x);
                let (b, _) = canon_translation(y);
                a.distance(&b) <= tol
            }
        }
    }
}

impl fmt::Display for CanonMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CanonMethod {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self> {
        CanonMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FrameError::InvalidInput(format!("unknown canonicalization {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{haar_orthogonal, haar_rotation, GroupElement, Permutation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud<C: AsRef<[f64]>>(cols: &[C]) -> PointCloud {
        PointCloud::from_columns(cols).unwrap()
    }

    fn random_cloud(d: usize, n: usize, rng: &mut ChaCha8Rng) -> PointCloud {
        PointCloud::from_matrix(DMatrix::from_fn(d, n, |_, _| {
            rng.random::<f64>() * 2.0 - 1.0
        }))
        .unwrap()
    }

    #[test]
    fn translation_examples() {
        let (c, t) = canon_translation(&cloud(&[[1.0, 1.0], [2.0, 1.0]]));
        assert_eq!(c, cloud(&[[0.0, 0.0], [1.0, 0.0]]));
        assert_eq!(t.as_slice(), &[1.0, 1.0]);
        let x = cloud(&[[0.0, 0.0], [3.0, -1.0]]);
        assert_eq!(canon_translation(&x).0, x);
    }

    #[test]
    fn sort_and_lex() {
        assert_eq!(canon_sort(&[3.0, 1.0, 2.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(
            canon_lex(&cloud(&[[1.0, 5.0], [0.0, 9.0]])),
            cloud(&[[0.0, 9.0], [1.0, 5.0]])
        );
        assert_eq!(
            canon_lex(&cloud(&[[1.0, 5.0], [1.0, 2.0]])),
            cloud(&[[1.0, 2.0], [1.0, 5.0]])
        );
        let x = cloud(&[[0.3, 1.0], [-2.0, 0.5], [0.3, -1.0]]);
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(canon_lex(&p.act(&x)), canon_lex(&x));
    }

    #[test]
    fn norm_axis() {
        assert_eq!(canon_norm_axis(&[3.0, 4.0]), vec![5.0, 0.0]);
        assert_eq!(canon_norm_axis(&[0.0, 0.0, 0.0]), vec![0.0; 3]);
    }

    #[test]
    fn phase_examples() {
        let z = cloud(&[[0.0, 1.0], [1.0, 0.0]]);
        let c = canon_so2_phase(&z).unwrap();
        assert!(c.distance(&cloud(&[[1.0, 0.0], [0.0, -1.0]])) < 1e-15);
        let zero_first = cloud(&[[0.0, 0.0], [1.0, 2.0]]);
        assert_eq!(canon_so2_phase(&zero_first).unwrap(), zero_first);
    }

    #[test]
    fn gram_examples() {
        let c = canon_od_gram(&cloud(&[[3.0, 4.0]])).unwrap();
        assert!(c.distance(&cloud(&[[5.0, 0.0]])) < 1e-12);
        let c = canon_sod(&cloud(&[[0.0, 0.0, 2.0]])).unwrap();
        assert!(c.distance(&cloud(&[[2.0, 0.0, 0.0]])) < 1e-12);
        assert!(canon_od_gram(&PointCloud::zeros(2, 3)).is_err());
        assert!(canon_sod(&PointCloud::zeros(3, 3)).is_err());
    }

    #[test]
    fn gram_invariance_and_orbit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = random_cloud(3, 3, &mut rng);
            let g = GroupElement::Orthogonal(haar_orthogonal(3, &mut rng));
            let c = canon_od_gram(&x).unwrap();
            assert!(c.distance(&canon_od_gram(&g.act(&x).unwrap()).unwrap()) < 1e-8);
            assert!(CanonMethod::OdGram.same_orbit(&x, &c, 1e-8));

            let y = random_cloud(3, 2, &mut rng);
            let h = GroupElement::Rotation(haar_rotation(3, &mut rng));
            let cy = canon_sod(&y).unwrap();
            assert!(cy.distance(&canon_sod(&h.act(&y).unwrap()).unwrap()) < 1e-8);
            assert!(CanonMethod::Sod.same_orbit(&y, &cy, 1e-8));
        }
    }

    #[test]
    fn names_round_trip() {
        for m in CanonMethod::ALL {
            assert_eq!(m.name().parse::<CanonMethod>().unwrap(), m);
        }
        assert!(!CanonMethod::Lex.continuous_claimed());
        assert!(CanonMethod::OdGram.continuous_claimed());
    }
}
