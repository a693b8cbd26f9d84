use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{FrameError, Result};

/// Default tolerance on `‖mᵀm − I‖_F` for orthogonal matrices.
pub const ORTHO_TOL: f64 = 1e-10;
/// Default tolerance on `|det(m) − ±1|`.
pub const DET_TOL: f64 = 1e-8;

/// Which group acts, with its size parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupTag {
    /// Permutations of `n` columns.
    Sn(usize),
    /// Rotations of `R^d`.
    SO(usize),
    /// Orthogonal transformations of `R^d`.
    O(usize),
    /// Translations of `R^d`, applied to every column.
    Trans(usize),
}

impl GroupTag {
    pub fn is_finite(&self) -> bool {
        matches!(self, GroupTag::Sn(_)) || matches!(self, GroupTag::O(1))
    }

    /// Checks that this group can act on `x`.
    pub fn check_acts_on(&self, x: &PointCloud) -> Result<()> {
        let ok = match *self {
            GroupTag::Sn(n) => n == x.n(),
            GroupTag::SO(d) | GroupTag::O(d) | GroupTag::Trans(d) => d == x.d(),
        };
        if ok {
            Ok(())
        } else {
            Err(FrameError::DimensionMismatch(format!(
                "{self} cannot act on a {}x{} cloud",
                x.d(),
                x.n()
            )))
        }
    }

    pub fn identity(&self) -> GroupElement {
        match *self {
            GroupTag::Sn(n) => GroupElement::Perm(Permutation::identity(n)),
            GroupTag::SO(d) => GroupElement::Rotation(RotationMatrix(DMatrix::identity(d, d))),
            GroupTag::O(d) => GroupElement::Orthogonal(OrthogonalMatrix(DMatrix::identity(d, d))),
            GroupTag::Trans(d) => GroupElement::Translation(TranslationVector(DVector::zeros(d))),
        }
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupTag::Sn(n) => write!(f, "S_{n}"),
            GroupTag::SO(d) => write!(f, "SO({d})"),
            GroupTag::O(d) => write!(f, "O({d})"),
            GroupTag::Trans(d) => write!(f, "R^{d}"),
        }
    }
}

/// A bijection of `{0, .., n-1}`, stored as `map[i] = g(i)`.
///
/// Acting on a cloud moves column `i` to position `g(i)`, so column `j` of
/// `gX` is `x_{g⁻¹(j)}` and `act(g∘h) = act(g)∘act(h)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(FrameError::InvalidElement(format!(
                    "{map:?} is not a permutation"
                )));
            }
            seen[v] = true;
        }
        Ok(Self(map))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Exchanges `i` and `j`.
    pub fn transposition(n: usize, i: usize, j: usize) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(i, j);
        Self(map)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn map(&self) -> &[usize] {
        &self.0
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.n(), other.n(), "permutation size mismatch");
        Permutation(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.n()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Permutation(inv)
    }

    pub fn act(&self, x: &PointCloud) -> PointCloud {
        let mut m = DMatrix::zeros(x.d(), x.n());
        for (i, &target) in self.0.iter().enumerate() {
            m.set_column(target, &x.column(i));
        }
        PointCloud::from_matrix(m).expect("permuting a valid cloud")
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Perm{:?}", self.0)
    }
}

fn ortho_defect(m: &DMatrix<f64>) -> f64 {
    (m.transpose() * m - DMatrix::identity(m.nrows(), m.ncols())).norm()
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(FrameError::InvalidElement(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// An element of `SO(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix(DMatrix<f64>);

impl RotationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let defect = ortho_defect(&m);
        if defect > ORTHO_TOL {
            return Err(FrameError::InvalidElement(format!(
                "not orthogonal (defect {defect:.2e})"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > DET_TOL {
            return Err(FrameError::InvalidElement(format!(
                "determinant {det} is not +1"
            )));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix already known to be a rotation (products of rotations).
    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    /// Planar rotation by `theta` radians.
    pub fn planar(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// An element of `O(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix(DMatrix<f64>);

impl OrthogonalMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let defect = ortho_defect(&m);
        if defect > ORTHO_TOL {
            return Err(FrameError::InvalidElement(format!(
                "not orthogonal (defect {defect:.2e})"
            )));
        }
        let det = m.determinant();
        if (det.abs() - 1.0).abs() > DET_TOL {
            return Err(FrameError::InvalidElement(format!(
                "determinant {det} is not ±1"
            )));
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationVector(pub DVector<f64>);

/// A group element together with the group it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Perm(Permutation),
    Rotation(RotationMatrix),
    Orthogonal(OrthogonalMatrix),
    Translation(TranslationVector),
}

impl GroupElement {
    pub fn group(&self) -> GroupTag {
        match self {
            GroupElement::Perm(p) => GroupTag::Sn(p.n()),
            GroupElement::Rotation(r) => GroupTag::SO(r.d()),
            GroupElement::Orthogonal(o) => GroupTag::O(o.d()),
            GroupElement::Translation(t) => GroupTag::Trans(t.0.len()),
        }
    }

    /// Wraps an orthogonal matrix as an element of `group`, which must be
    /// `SO(d)` or `O(d)`. No validation beyond shape.
    pub(crate) fn from_matrix_unchecked(group: GroupTag, m: DMatrix<f64>) -> GroupElement {
        match group {
            GroupTag::SO(_) => GroupElement::Rotation(RotationMatrix::new_unchecked(m)),
            GroupTag::O(_) => GroupElement::Orthogonal(OrthogonalMatrix::new_unchecked(m)),
            _ => panic!("{group} is not a matrix group"),
        }
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            GroupElement::Rotation(r) => Some(r.matrix()),
            GroupElement::Orthogonal(o) => Some(o.matrix()),
            _ => None,
        }
    }

    pub fn as_perm(&self) -> Option<&Permutation> {
        match self {
            GroupElement::Perm(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&self.group().identity(), tol)
    }

    /// Equality under the group's notion: exact for permutations, entrywise
    /// within `tol` for matrices and translations.
    pub fn approx_eq(&self, other: &GroupElement, tol: f64) -> bool {
        match (self, other) {
            (GroupElement::Perm(a), GroupElement::Perm(b)) => a == b,
            (GroupElement::Translation(a), GroupElement::Translation(b)) => {
                a.0.len() == b.0.len() && (&a.0 - &b.0).amax() <= tol
            }
            _ => match (self.matrix(), other.matrix()) {
                (Some(a), Some(b)) if self.group() == other.group() => (a - b).amax() <= tol,
                _ => false,
            },
        }
    }

    /// `g · X`.
    pub fn act(&self, x: &PointCloud) -> Result<PointCloud> {
        self.group().check_acts_on(x)?;
        Ok(match self {
            GroupElement::Perm(p) => p.act(x),
            GroupElement::Translation(t) => {
                let mut m = x.matrix().clone();
                for mut c in m.column_iter_mut() {
                    c += &t.0;
                }
                PointCloud::from_matrix(m)?
            }
            _ => PointCloud::from_matrix(self.matrix().unwrap() * x.matrix())?,
        })
    }

    /// `g⁻¹ · X`.
    pub fn act_inverse(&self, x: &PointCloud) -> Result<PointCloud> {
        self.inverse().act(x)
    }

    /// `self · other`, so that `act(compose(g, h)) = act(g) ∘ act(h)`.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.group() != other.group() {
            return Err(FrameError::GroupMismatch {
                expected: self.group(),
                found: other.group(),
            });
        }
        Ok(match (self, other) {
            (GroupElement::Perm(a), GroupElement::Perm(b)) => GroupElement::Perm(a.compose(b)),
            (GroupElement::Translation(a), GroupElement::Translation(b)) => {
                GroupElement::Translation(TranslationVector(&a.0 + &b.0))
            }
            _ => GroupElement::from_matrix_unchecked(
                self.group(),
                self.matrix().unwrap() * other.matrix().unwrap(),
            ),
        })
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Perm(p) => GroupElement::Perm(p.inverse()),
            GroupElement::Translation(t) => GroupElement::Translation(TranslationVector(-&t.0)),
            _ => GroupElement::from_matrix_unchecked(
                self.group(),
                self.matrix().unwrap().transpose(),
            ),
        }
    }

    /// Applies the element to a vector in `R^d` (matrix groups only).
    pub fn apply_vector(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        self.matrix().map(|m| m * v)
    }
}

/// JSON form: `{"group": "Sn"|"SOd"|"Od"|"Trans", "perm"|"matrix"|"t": ...}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroupElementJson {
    pub group: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub perm: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<Vec<f64>>,
}

impl From<&GroupElement> for GroupElementJson {
    fn from(g: &GroupElement) -> Self {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        match g {
            GroupElement::Perm(p) => Self {
                group: "Sn".into(),
                perm: Some(p.map().to_vec()),
                matrix: None,
                t: None,
            },
            GroupElement::Rotation(r) => Self {
                group: "SOd".into(),
                perm: None,
                matrix: Some(rows(r.matrix())),
                t: None,
            },
            GroupElement::Orthogonal(o) => Self {
                group: "Od".into(),
                perm: None,
                matrix: Some(rows(o.matrix())),
                t: None,
            },
            GroupElement::Translation(t) => Self {
                group: "Trans".into(),
                perm: None,
                matrix: None,
                t: Some(t.0.iter().copied().collect()),
            },
        }
    }
}

impl TryFrom<GroupElementJson> for GroupElement {
    type Error = FrameError;

    fn try_from(j: GroupElementJson) -> Result<Self> {
        let missing = |field: &str| {
            FrameError::InvalidElement(format!("{} element needs \"{field}\"", j.group))
        };
        let matrix = |rows: &Vec<Vec<f64>>| -> Result<DMatrix<f64>> {
            let d = rows.len();
            if rows.iter().any(|r| r.len() != d) {
                return Err(FrameError::InvalidElement("matrix must be square".into()));
            }
            Ok(DMatrix::from_fn(d, d, |i, k| rows[i][k]))
        };
        match j.group.as_str() {
            "Sn" => Ok(GroupElement::Perm(Permutation::new(
                j.perm.clone().ok_or_else(|| missing("perm"))?,
            )?)),
            "SOd" => Ok(GroupElement::Rotation(RotationMatrix::new(matrix(
                j.matrix.as_ref().ok_or_else(|| missing("matrix"))?,
            )?)?)),
            "Od" => Ok(GroupElement::Orthogonal(OrthogonalMatrix::new(matrix(
                j.matrix.as_ref().ok_or_else(|| missing("matrix"))?,
            )?)?)),
            "Trans" => Ok(GroupElement::Translation(TranslationVector(
                DVector::from_vec(j.t.clone().ok_or_else(|| missing("t"))?),
            ))),
            other => Err(FrameError::InvalidElement(format!(
                "unknown group \"{other}\""
            ))),
        }
    }
}

impl Serialize for GroupElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GroupElementJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        GroupElement::try_from(GroupElementJson::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;

    fn cloud(cols: &[[f64; 2]]) -> PointCloud {
        PointCloud::from_columns(cols).unwrap()
    }

    #[test]
    fn identity_permutation_fixes_cloud() {
        let x = cloud(&[[0.3, 1.0], [2.0, -1.0], [5.0, 5.0]]);
        assert_eq!(GroupTag::Sn(3).identity().act(&x).unwrap(), x);
    }

    #[test]
    fn transposition_swaps_points() {
        let x = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        let g = GroupElement::Perm(Permutation::transposition(2, 0, 1));
        assert_eq!(g.act(&x).unwrap(), cloud(&[[1.0, 0.0], [0.0, 0.0]]));
    }

    #[test]
    fn quarter_turn() {
        let x = cloud(&[[1.0, 0.0]]);
        let g = GroupElement::Rotation(RotationMatrix::planar(FRAC_PI_2));
        let y = g.act(&x).unwrap();
        assert!(y.distance(&cloud(&[[0.0, 1.0]])) < 1e-15);
    }

    #[test]
    fn permutation_convention() {
        // column j of gX is x_{g^{-1}(j)}
        let x = cloud(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        let g = Permutation::new(vec![1, 2, 0]).unwrap();
        let y = g.act(&x);
        let inv = g.inverse();
        for j in 0..3 {
            assert_eq!(y.column(j), x.column(inv.apply(j)));
        }
    }

    #[test]
    fn compose_and_inverse() {
        let t = Permutation::transposition(2, 0, 1);
        assert!(t.compose(&t).is_identity());
        let r = GroupElement::Rotation(RotationMatrix::planar(0.7));
        let r_inv = GroupElement::Rotation(RotationMatrix::planar(-0.7));
        assert!(r.compose(&r_inv).unwrap().is_identity(1e-12));
        assert!(GroupTag::SO(3).identity().inverse().is_identity(0.0));
        let p = GroupElement::Perm(Permutation::identity(2));
        assert!(matches!(
            r.compose(&p),
            Err(FrameError::GroupMismatch { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let x = cloud(&[[0.0, 0.0]]);
        assert!(GroupTag::Sn(3).identity().act(&x).is_err());
        assert!(GroupTag::SO(3).identity().act(&x).is_err());
    }

    #[test]
    fn invalid_elements_rejected() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        let refl = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(RotationMatrix::new(refl.clone()).is_err());
        assert!(OrthogonalMatrix::new(refl).is_ok());
        assert!(
            OrthogonalMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).is_err()
        );
    }

    #[test]
    fn element_json() {
        let g = GroupElement::Perm(Permutation::new(vec![2, 0, 1]).unwrap());
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"group":"Sn","perm":[2,0,1]}"#);
        assert_eq!(serde_json::from_str::<GroupElement>(&s).unwrap(), g);
        let r = GroupElement::Rotation(RotationMatrix::planar(0.3));
        let back: GroupElement = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert!(back.approx_eq(&r, 1e-15));
        assert!(serde_json::from_str::<GroupElement>(r#"{"group":"SOd","perm":[0]}"#).is_err());
    }
}
