//! Small dense kernels shared by the canonicalizations and rotation frames.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{FrameError, Result};

/// Relative tolerance for numerical rank and Gram-Schmidt degeneracy.
pub const RANK_TOL: f64 = 1e-9;

/// Removes the components of `v` along the orthonormal vectors `basis`.
/// Two passes of modified Gram-Schmidt.
pub(crate) fn residual(basis: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
    let mut r = v.clone();
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(&r);
            r.axpy(-c, q, 1.0);
        }
    }
    r
}

/// Lexicographically first standard basis vector with a non-negligible
/// component outside `span(basis)`, orthonormalized against `basis`.
fn completion_vector(basis: &[DVector<f64>], d: usize) -> DVector<f64> {
    // Some e_k always keeps at least sqrt((d - r) / d) of its norm.
    let floor = 0.5 / (d as f64).sqrt();
    for k in 0..d {
        let r = residual(
            basis,
            &DVector::from_fn(d, |i, _| if i == k { 1.0 } else { 0.0 }),
        );
        let norm = r.norm();
        if norm > floor {
            return r / norm;
        }
    }
    unreachable!("a full orthonormal basis has no completion")
}

/// Volume of the parallelotope spanned by `vs`, `sqrt|det G|` with `G` the
/// Gram matrix. Computed as the product of Gram-Schmidt residual norms,
/// which avoids squaring the conditioning of `G`. The empty product is 1.
pub fn gram_delta(vs: &[DVector<f64>]) -> f64 {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vs.len());
    let mut vol = 1.0;
    for v in vs {
        let r = residual(&basis, v);
        let norm = r.norm();
        if norm == 0.0 {
            return 0.0;
        }
        vol *= norm;
        basis.push(r / norm);
    }
    vol
}

/// Result of Gram-Schmidt on a selection of columns.
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    /// Orthogonal `d × d` matrix `g` with `g⁻¹ [x_{i_1} .. x_{i_r}] = a`.
    pub g: DMatrix<f64>,
    /// Upper triangular `d × r` coefficients with nonnegative diagonal.
    pub a: DMatrix<f64>,
    /// Number of selected columns that were (numerically) independent of
    /// their predecessors.
    pub independent: usize,
}

/// Orthonormalizes the columns `idx` of `x` in order and completes them to a
/// basis `g`.
///
/// A column lying in the span of its predecessors (residual at most
/// `rank_tol · ‖X‖_F`) is replaced by the lexicographically first standard
/// basis vector with a component outside that span. With `special = true`
/// the last basis vector is flipped if needed so that `det g = +1`; this
/// requires `idx.len() < d`.
pub fn gram_schmidt_rotation(
    x: &DMatrix<f64>,
    idx: &[usize],
    special: bool,
    rank_tol: f64,
) -> GramSchmidt {
    let d = x.nrows();
    let r = idx.len();
    assert!(r <= d, "cannot orthonormalize more than d columns");
    assert!(
        !special || r < d,
        "rotation branch needs at most d - 1 columns"
    );
    let scale = x.norm();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d);
    let mut independent = 0;
    for &i in idx {
        let v: DVector<f64> = x.column(i).into_owned();
        let q = if basis.len() + 1 == d {
            // The last direction is fixed up to sign; take it from the
            // completion rule so equal prefixes give bitwise-equal bases.
            let normal = completion_vector(&basis, d);
            let c = normal.dot(&v);
            if c.abs() > rank_tol * scale && scale > 0.0 {
                independent += 1;
                if c < 0.0 {
                    -normal
                } else {
                    normal
                }
            } else {
                normal
            }
        } else {
            let res = residual(&basis, &v);
            let norm = res.norm();
            if scale > 0.0 && norm > rank_tol * scale {
                independent += 1;
                res / norm
            } else {
                completion_vector(&basis, d)
            }
        };
        basis.push(q);
    }
    while basis.len() < d {
        let q = completion_vector(&basis, d);
        basis.push(q);
    }
    let mut g = DMatrix::from_columns(&basis);
    if special && g.determinant() < 0.0 {
        let last = -g.column(d - 1);
        g.set_column(d - 1, &last);
    }
    let mut a = g.transpose() * x.select_columns(idx);
    for t in 0..r {
        for i in (t + 1)..d {
            a[(i, t)] = 0.0;
        }
        if a[(t, t)] < 0.0 {
            a[(t, t)] = 0.0;
        }
    }
    GramSchmidt { g, a, independent }
}

/// Square root of a symmetric positive semi-definite matrix by symmetric
/// eigendecomposition. Eigenvalues below zero (round-off) are clamped.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(FrameError::InvalidInput(
            "psd_sqrt needs a square matrix".into(),
        ));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * m.amax().max(1.0) {
        return Err(FrameError::NotSymmetric(asym));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let b = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok((&b + b.transpose()) * 0.5)
}

/// Singular values of `x`, largest first.
pub fn singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = x
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values at least `rank_tol · σ_max`.
pub fn numerical_rank(x: &DMatrix<f64>, rank_tol: f64) -> usize {
    let s = singular_values(x);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v >= rank_tol * top).count()
}

/// Orthonormal basis (`d × r`) of the column span of `x` at tolerance
/// `rank_tol`.
pub fn span_basis(x: &DMatrix<f64>, rank_tol: f64) -> DMatrix<f64> {
    let d = x.nrows();
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| top > 0.0 && svd.singular_values[k] >= rank_tol * top)
        .collect();
    let mut cols: Vec<DVector<f64>> = keep.iter().map(|&k| u.column(k).into_owned()).collect();
    cols.truncate(d);
    if cols.is_empty() {
        return DMatrix::zeros(d, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Orthonormal basis of the orthogonal complement of the orthonormal
/// columns of `basis`.
pub fn orthogonal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let d = basis.nrows();
    let mut vs: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    let r = vs.len();
    while vs.len() < d {
        let q = completion_vector(&vs, d);
        vs.push(q);
    }
    let comp: Vec<DVector<f64>> = vs.split_off(r);
    if comp.is_empty() {
        return DMatrix::zeros(d, 0);
    }
    DMatrix::from_columns(&comp)
}

/// Rotation `R ∈ SO(d)` minimizing `‖R x − y‖_F` (Kabsch with determinant
/// correction), and the attained residual.
pub fn procrustes_rotation(x: &DMatrix<f64>, y: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let d = x.nrows();
    let m = y * x.transpose();
    let svd = m.svd(true, true);
    let u = svd.u.expect("U");
    let vt = svd.v_t.expect("V^T");
    let mut fix = DMatrix::identity(d, d);
    if (&u * &vt).determinant() < 0.0 {
        fix[(d - 1, d - 1)] = -1.0;
    }
    let r = u * fix * vt;
    let res = (&r * x - y).norm();
    (r, res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn delta_examples() {
        assert!((gram_delta(&[v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])]) - 1.0).abs() < 1e-15);
        assert_eq!(gram_delta(&[v(&[1.0, 0.0, 0.0]), v(&[2.0, 0.0, 0.0])]), 0.0);
        // det [[1,1],[1,2]] = 1
        assert!((gram_delta(&[v(&[1.0, 0.0, 0.0]), v(&[1.0, 1.0, 0.0])]) - 1.0).abs() < 1e-15);
        assert_eq!(gram_delta(&[]), 1.0);
    }

    #[test]
    fn gram_schmidt_identity_case() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let gs = gram_schmidt_rotation(&x, &[0, 1], true, RANK_TOL);
        assert!((gs.g.clone() - DMatrix::identity(3, 3)).amax() < 1e-15);
        assert!((gs.a - DMatrix::identity(3, 2)).amax() < 1e-15);
    }

    #[test]
    fn gram_schmidt_swapped_order_fixes_determinant() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let gs = gram_schmidt_rotation(&x, &[1, 0], true, RANK_TOL);
        // e1 -> e2, e2 -> e1, e3 -> -e3
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
        assert!((gs.g.clone() - expected).amax() < 1e-15);
        assert!((gs.g.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_schmidt_single_column_norm() {
        let x = DMatrix::from_column_slice(3, 1, &[3.0, 4.0, 0.0]);
        let gs = gram_schmidt_rotation(&x, &[0], true, RANK_TOL);
        assert!((gs.a.column(0) - v(&[5.0, 0.0, 0.0])).amax() < 1e-14);
    }

    #[test]
    fn gram_schmidt_dependent_columns_still_valid() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        let gs = gram_schmidt_rotation(&x, &[0, 1], true, RANK_TOL);
        assert_eq!(gs.independent, 1);
        assert!((gs.g.transpose() * &gs.g - DMatrix::identity(3, 3)).amax() < 1e-14);
        assert!((gs.g.transpose() * &x - &gs.a).amax() < 1e-12);
        assert!((gs.a.transpose() * &gs.a - x.transpose() * &x).amax() < 1e-12);
    }

    #[test]
    fn psd_sqrt_examples() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert!((psd_sqrt(&i).unwrap() - &i).amax() < 1e-15);
        let m = DMatrix::from_diagonal(&v(&[4.0, 9.0]));
        let b = psd_sqrt(&m).unwrap();
        assert!((b - DMatrix::from_diagonal(&v(&[2.0, 3.0]))).amax() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(psd_sqrt(&bad), Err(FrameError::NotSymmetric(_))));
    }

    #[test]
    fn rank_and_span() {
        let x = DMatrix::from_column_slice(3, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(numerical_rank(&x, RANK_TOL), 1);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 2), RANK_TOL), 0);
        let b = span_basis(&x, RANK_TOL);
        assert_eq!(b.ncols(), 1);
        assert!((b[(0, 0)].abs() - 1.0).abs() < 1e-14);
        let c = orthogonal_complement(&b);
        assert_eq!(c.ncols(), 2);
        assert!((b.transpose() * c).amax() < 1e-14);
    }
}
