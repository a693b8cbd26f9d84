use std::fmt;

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};

/// A `d × n` real matrix whose columns are the points of the cloud.
///
/// For `d = 2` the cloud doubles as a complex vector `Z ∈ Cⁿ` with
/// `z_j = x_j[0] + i·x_j[1]`.
#[derive(Clone, PartialEq)]
pub struct PointCloud {
    m: DMatrix<f64>,
}

impl PointCloud {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(FrameError::InvalidInput(format!(
                "point cloud must have d >= 1 and n >= 1, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(FrameError::InvalidInput(
                "point cloud has non-finite entries".into(),
            ));
        }
        Ok(Self { m })
    }

    /// Builds a cloud from a list of points, each a `d`-vector.
    pub fn from_columns<C: AsRef<[f64]>>(cols: &[C]) -> Result<Self> {
        let n = cols.len();
        let d = cols.first().map(|c| c.as_ref().len()).unwrap_or(0);
        if cols.iter().any(|c| c.as_ref().len() != d) {
            return Err(FrameError::DimensionMismatch(
                "columns have unequal lengths".into(),
            ));
        }
        let m = DMatrix::from_fn(d, n, |i, j| cols[j].as_ref()[i]);
        Self::from_matrix(m)
    }

    pub fn zeros(d: usize, n: usize) -> Self {
        assert!(d > 0 && n > 0, "point cloud dimensions must be positive");
        Self {
            m: DMatrix::zeros(d, n),
        }
    }

    /// Treats `x` as `n` points on the real line (`d = 1`).
    pub fn from_line(x: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_row_slice(1, x.len(), x))
    }

    pub fn d(&self) -> usize {
        self.m.nrows()
    }

    pub fn n(&self) -> usize {
        self.m.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.m.column(j)
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        self.m
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn distance(&self, other: &PointCloud) -> f64 {
        (&self.m - &other.m).norm()
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|&v| v == 0.0)
    }

    /// Row-major flattening, point by point: `(x_1, x_2, ..., x_n)`.
    pub fn flatten(&self) -> Vec<f64> {
        self.m.as_slice().to_vec()
    }

    /// `self + scale · delta`, the building block for probe schedules.
    pub fn perturbed(&self, delta: &PointCloud, scale: f64) -> Result<PointCloud> {
        self.check_same_shape(delta)?;
        PointCloud::from_matrix(&self.m + &delta.m * scale)
    }

    pub fn scaled(&self, s: f64) -> PointCloud {
        PointCloud { m: &self.m * s }
    }

    pub fn check_same_shape(&self, other: &PointCloud) -> Result<()> {
        if self.d() != other.d() || self.n() != other.n() {
            return Err(FrameError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.d(),
                self.n(),
                other.d(),
                other.n()
            )));
        }
        Ok(())
    }

    /// Membership in `R^{d×n}_distinct`: all columns pairwise different.
    pub fn has_distinct_columns(&self) -> bool {
        for s in 0..self.n() {
            for t in (s + 1)..self.n() {
                if self.m.column(s) == self.m.column(t) {
                    return false;
                }
            }
        }
        true
    }

    /// Projections `aᵀx_j` of every point onto `a`.
    pub fn project(&self, a: &DVector<f64>) -> Vec<f64> {
        assert_eq!(a.len(), self.d(), "direction dimension mismatch");
        self.m.column_iter().map(|c| c.dot(a)).collect()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.m.transpose() * &self.m
    }

    pub fn select_columns(&self, idx: &[usize]) -> DMatrix<f64> {
        self.m.select_columns(idx)
    }
}

impl fmt::Debug for PointCloud {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PointCloud({}x{}) {:?}",
            self.d(),
            self.n(),
            self.columns()
        )
    }
}

/// On-disk representation: `{"d": int, "n": int, "columns": [[f64; d]; n]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointCloudJson {
    pub d: usize,
    pub n: usize,
    pub columns: Vec<Vec<f64>>,
}

impl From<&PointCloud> for PointCloudJson {
    fn from(x: &PointCloud) -> Self {
        Self {
            d: x.d(),
            n: x.n(),
            columns: x.columns(),
        }
    }
}

impl TryFrom<PointCloudJson> for PointCloud {
    type Error = FrameError;

    fn try_from(j: PointCloudJson) -> Result<Self> {
        if j.columns.len() != j.n || j.columns.iter().any(|c| c.len() != j.d) {
            return Err(FrameError::DimensionMismatch(format!(
                "declared {}x{} does not match columns",
                j.d, j.n
            )));
        }
        PointCloud::from_columns(&j.columns)
    }
}

impl Serialize for PointCloud {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PointCloudJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PointCloud {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = PointCloudJson::deserialize(d)?;
        PointCloud::try_from(j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_nonfinite() {
        assert!(PointCloud::from_matrix(DMatrix::zeros(0, 3)).is_err());
        assert!(PointCloud::from_columns(&[[1.0, f64::NAN]]).is_err());
        assert!(PointCloud::from_columns(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn json_shape_is_checked() {
        let bad = r#"{"d": 2, "n": 2, "columns": [[0.0, 1.0]]}"#;
        assert!(serde_json::from_str::<PointCloud>(bad).is_err());
        let good = r#"{"d": 2, "n": 2, "columns": [[0.0, 1.0], [2.0, 3.0]]}"#;
        let x: PointCloud = serde_json::from_str(good).unwrap();
        assert_eq!(x.get(1, 1), 3.0);
        let back = serde_json::to_string(&x).unwrap();
        assert_eq!(serde_json::from_str::<PointCloud>(&back).unwrap(), x);
    }

    #[test]
    fn distinct_columns() {
        let x = PointCloud::from_columns(&[[1.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap();
        assert!(!x.has_distinct_columns());
        let y = PointCloud::from_columns(&[[1.0, 0.0], [2.0, 0.0]]).unwrap();
        assert!(y.has_distinct_columns());
    }
}
