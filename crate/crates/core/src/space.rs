//! Finite-dimensional real inner-product arithmetic.
//!
//! Vectors are plain coordinate lists; matrices are stored row-major with
//! `rows` equal to the codomain dimension and `cols` to the domain dimension,
//! so a matrix with orthonormal columns is a linear isometry `R^cols -> R^rows`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|<q_i, q_j> - delta_ij|` for anything called orthonormal.
pub const TAU_ORTH: f64 = 1e-9;
/// Pivot threshold below which a vector is treated as linearly dependent.
pub const TAU_RANK: f64 = 1e-8;

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("vector"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Vector(coords))
    }

    /// Builds a vector without checking the invariants. Callers guarantee a
    /// non-empty coordinate list; finiteness is re-checked where it matters.
    pub(crate) fn raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Vector(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector::raw(vec![0.0; dim])
    }

    pub fn basis(i: usize, dim: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Vector::raw(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector::raw(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        check_dims(self.dim(), other.dim())?;
        Ok(Vector::raw(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        check_dims(self.dim(), other.dim())?;
        Ok(Vector::raw(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// `|self - other|`, the metric used by every ε-isometry check.
    pub fn distance(&self, other: &Vector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn inner(a: &Vector, b: &Vector) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(dot(&a.0, &b.0))
}

pub fn norm(a: &Vector) -> f64 {
    dot(&a.0, &a.0).sqrt()
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("matrix"));
        }
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidConfig("matrix size overflows".into()))?;
        check_dims(expected, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Stacks `columns` side by side; all must share one dimension.
    pub fn from_columns(columns: &[Vector]) -> Result<Self> {
        let first = columns.first().ok_or(Error::Empty("column list"))?;
        let rows = first.dim();
        let cols = columns.len();
        let mut m = Matrix::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            check_dims(rows, c.dim())?;
            for i in 0..rows {
                m.data[i * cols + j] = c[i];
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector::raw((0..self.rows).map(|i| self.get(i, j)).collect())
    }

    pub fn columns(&self) -> Vec<Vector> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &Vector) -> Result<Vector> {
        check_dims(self.cols, x.dim())?;
        Ok(Vector::raw(
            self.data
                .chunks_exact(self.cols)
                .map(|row| dot(row, x.as_slice()))
                .collect(),
        ))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dims(self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(l, j);
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        check_dims(self.rows, other.rows)?;
        check_dims(self.cols, other.cols)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// `max |(M^T M - I)_ij|`.
    pub fn ortho_deviation(&self) -> f64 {
        let gram = self.transpose().matmul(self).expect("shapes agree");
        gram.sub(&Matrix::identity(self.cols))
            .expect("shapes agree")
            .max_abs()
    }

    pub fn has_orthonormal_columns(&self) -> bool {
        self.rows >= self.cols && self.ortho_deviation() <= TAU_ORTH
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        let tall = if self.rows >= self.cols { self.clone() } else { self.transpose() };
        jacobi_svd(&tall)
            .singular_values
            .iter()
            .fold(0.0_f64, |a, s| a.max(*s))
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let tall = if self.rows >= self.cols { self.clone() } else { self.transpose() };
        jacobi_svd(&tall).singular_values
    }
}

/// Thin SVD `A = W diag(s) V^T` of a tall matrix, as column-scaled `A V`
/// (columns `s_j w_j`) plus `V`.
struct ThinSvd {
    scaled_left: Matrix,
    v: Matrix,
    singular_values: Vec<f64>,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi: rotates column pairs of `A` until they are
/// mutually orthogonal. Accurate to working precision for the polar factor
/// even with clustered singular values.
fn jacobi_svd(a: &Matrix) -> ThinSvd {
    debug_assert!(a.rows >= a.cols);
    let (k, m) = (a.rows, a.cols);
    // column-major working copies
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| a.column(j).into_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..m).map(|j| Vector::basis(j, m).into_vec()).collect();
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for vecs in [&mut cols, &mut v] {
                    let (lo, hi) = vecs.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let (xp, yq) = (*x, *y);
                        *x = c * xp - s * yq;
                        *y = s * xp + c * yq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let singular_values = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let to_matrix = |cs: &[Vec<f64>], rows: usize| Matrix {
        rows,
        cols: m,
        data: (0..rows).flat_map(|i| cs.iter().map(move |c| c[i])).collect(),
    };
    ThinSvd {
        scaled_left: to_matrix(&cols, k),
        v: to_matrix(&v, m),
        singular_values,
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.cols.max(1)).collect();
        f.debug_struct("Matrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("data", &rows)
            .finish()
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
///
/// A vector whose residual after projection drops below `TAU_RANK` times its
/// own norm is reported as dependent.
pub fn gram_schmidt(vs: &[Vector]) -> Result<Vec<Vector>> {
    let dim = vs.first().ok_or(Error::Empty("vector list"))?.dim();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for (index, v) in vs.iter().enumerate() {
        check_dims(dim, v.dim())?;
        let scale = norm(v);
        let mut w = v.as_slice().to_vec();
        for _pass in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let residual = dot(&w, &w).sqrt();
        if scale == 0.0 || residual < TAU_RANK * scale {
            return Err(Error::RankDeficient {
                index,
                residual: if scale == 0.0 { 0.0 } else { residual / scale },
            });
        }
        w.iter_mut().for_each(|wi| *wi /= residual);
        basis.push(w);
    }
    Ok(basis.into_iter().map(Vector::raw).collect())
}

/// Closest matrix with orthonormal columns in the Frobenius norm: the polar
/// factor `W V^T` of the thin SVD `M = W S V^T`, i.e. every singular value
/// replaced by 1.
pub fn nearest_isometry(m: &Matrix) -> Result<Matrix> {
    if m.cols > m.rows {
        return Err(Error::InvalidConfig(format!(
            "nearest isometry needs cols <= rows, got {}x{}",
            m.rows, m.cols
        )));
    }
    let svd = jacobi_svd(m);
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, s| a.max(*s));
    if let Some((index, s)) = svd
        .singular_values
        .iter()
        .enumerate()
        .find(|(_, s)| **s == 0.0 || **s < TAU_RANK * smax)
    {
        return Err(Error::RankDeficient {
            index,
            residual: *s,
        });
    }
    let mut w = svd.scaled_left;
    for i in 0..w.rows {
        for j in 0..w.cols {
            w.data[i * w.cols + j] /= svd.singular_values[j];
        }
    }
    let polar = w.matmul(&svd.v.transpose())?;
    if polar.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("polar factor"));
    }
    Ok(polar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn small_vec(dim: usize) -> impl Strategy<Value = Vector> {
        proptest::collection::vec(-10.0..10.0f64, dim).prop_map(Vector::raw)
    }

    fn orthonormal(dim: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(small_vec(dim), dim).prop_filter_map("dependent", |vs| {
            gram_schmidt(&vs)
                .ok()
                .map(|q| Matrix::from_columns(&q).unwrap())
        })
    }

    #[test]
    fn inner_examples() {
        assert_eq!(inner(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(inner(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), 11.0);
        assert!(matches!(
            inner(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&v(&[3.0, 4.0])), 5.0);
        assert_eq!(norm(&Vector::zeros(4)), 0.0);
    }

    #[test]
    fn vector_rejects_bad_input() {
        assert_eq!(Vector::new(vec![]), Err(Error::Empty("vector")));
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn gram_schmidt_axis_aligned() {
        let q = gram_schmidt(&[v(&[2.0, 0.0]), v(&[1.0, 1.0])]).unwrap();
        assert_abs_diff_eq!(q[0].as_slice(), [1.0, 0.0].as_slice(), epsilon = 1e-15);
        assert_abs_diff_eq!(q[1].as_slice(), [0.0, 1.0].as_slice(), epsilon = 1e-15);
    }

    #[test]
    fn gram_schmidt_reports_dependent_index() {
        let err = gram_schmidt(&[v(&[1.0, 2.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[2.0, 5.0, 0.0])])
            .unwrap_err();
        assert!(matches!(err, Error::RankDeficient { index: 2, .. }), "{err:?}");
        let err = gram_schmidt(&[v(&[0.0, 0.0])]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { index: 0, .. }));
    }

    #[test]
    fn nearest_isometry_scaled_identity() {
        let m = Matrix::identity(2).scale(2.0);
        let u = nearest_isometry(&m).unwrap();
        assert!(u.sub(&Matrix::identity(2)).unwrap().max_abs() < TAU_ORTH);
    }

    #[test]
    fn nearest_isometry_rejects_rank_deficient_and_wide() {
        let m = Matrix::new(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        assert!(matches!(nearest_isometry(&m), Err(Error::RankDeficient { .. })));
        let wide = Matrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        assert!(nearest_isometry(&wide).is_err());
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let m = Matrix::new(2, 2, vec![3.0, 0.0, 0.0, -5.0]).unwrap();
        assert_abs_diff_eq!(m.operator_norm(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn operator_norm_rank_one_and_wide() {
        let tall = Matrix::new(2, 2, vec![3.0, 0.0, 4.0, 0.0]).unwrap();
        assert_eq!(tall.operator_norm(), 5.0);
        let wide = Matrix::new(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(wide.operator_norm(), 5.0);
        assert_eq!(Matrix::identity(4).operator_norm(), 1.0);
    }

    proptest! {
        #[test]
        fn inner_matches_norm_squared(a in small_vec(6)) {
            let n = norm(&a);
            prop_assert!((inner(&a, &a).unwrap() - n * n).abs() <= 1e-12 * (1.0 + n * n));
        }

        #[test]
        fn norm_is_absolutely_homogeneous(a in small_vec(5), s in -50.0..50.0f64) {
            let lhs = norm(&a.scale(s));
            let rhs = s.abs() * norm(&a);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn inner_symmetric_bilinear(a in small_vec(4), b in small_vec(4), c in small_vec(4),
                                   s in -5.0..5.0f64) {
            let ab = inner(&a, &b).unwrap();
            prop_assert!((ab - inner(&b, &a).unwrap()).abs() <= 1e-12 * (1.0 + ab.abs()));
            let lhs = inner(&a.scale(s).add(&b).unwrap(), &c).unwrap();
            let rhs = s * inner(&a, &c).unwrap() + inner(&b, &c).unwrap();
            let scale = 1.0 + norm(&a) * norm(&c) * s.abs() + norm(&b) * norm(&c);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn gram_schmidt_is_orthonormal_and_spans(vs in proptest::collection::vec(small_vec(5), 5)) {
            let Ok(q) = gram_schmidt(&vs) else { return Ok(()) };
            let qm = Matrix::from_columns(&q).unwrap();
            // explicit Gram matrix check
            for i in 0..5 {
                for j in 0..5 {
                    let g = inner(&q[i], &q[j]).unwrap();
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g - target).abs() < TAU_ORTH);
                }
            }
            for x in &vs {
                let coeffs = qm.transpose().mul_vec(x).unwrap();
                let back = qm.mul_vec(&coeffs).unwrap();
                prop_assert!(back.distance(x).unwrap() < 1e-9);
            }
        }

        #[test]
        fn gram_schmidt_fixes_orthonormal_input(q in orthonormal(4)) {
            let again = Matrix::from_columns(&gram_schmidt(&q.columns()).unwrap()).unwrap();
            prop_assert!(again.sub(&q).unwrap().max_abs() < TAU_ORTH);
        }

        #[test]
        fn nearest_isometry_recovers_polar_factor(q in orthonormal(4),
                                                  w in orthonormal(3),
                                                  s in proptest::collection::vec(0.5..3.0f64, 3)) {
            // M = Q_thin * S with S = W diag(s) W^T symmetric positive definite
            let q_thin = Matrix::from_columns(&q.columns()[..3]).unwrap();
            let mut d = Matrix::zeros(3, 3);
            for (i, si) in s.iter().enumerate() { d.data[i * 3 + i] = *si; }
            let spd = w.matmul(&d).unwrap().matmul(&w.transpose()).unwrap();
            let m = q_thin.matmul(&spd).unwrap();
            let u = nearest_isometry(&m).unwrap();
            let err = u.sub(&q_thin).unwrap().max_abs();
            prop_assert!(err < 1e-9, "polar error {err:e}");
            prop_assert!(u.ortho_deviation() <= TAU_ORTH);
        }

        // sigma_max^2 of a 2x2 is the larger root of x^2 - tr(A^T A) x + det(A)^2
        #[test]
        fn operator_norm_matches_closed_form_2x2(a in proptest::collection::vec(-5.0..5.0f64, 4)) {
            let m = Matrix::new(2, 2, a.clone()).unwrap();
            let tr = a.iter().map(|v| v * v).sum::<f64>();
            let det = a[0] * a[3] - a[1] * a[2];
            let oracle = ((tr + (tr * tr - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt();
            prop_assert!((m.operator_norm() - oracle).abs() <= 1e-12 * (1.0 + oracle));
            prop_assert!((m.transpose().operator_norm() - oracle).abs() <= 1e-12 * (1.0 + oracle));
        }

        #[test]
        fn nearest_isometry_idempotent_and_equivariant(m in proptest::collection::vec(-3.0..3.0f64, 12),
                                                       r in orthonormal(4)) {
            let m = Matrix::new(4, 3, m).unwrap();
            let sv = m.singular_values();
            let (lo, hi) = sv.iter().fold((f64::MAX, 0.0f64), |(lo, hi), s| (lo.min(*s), hi.max(*s)));
            prop_assume!(lo > 1e-3 * hi);
            let Ok(u) = nearest_isometry(&m) else { return Ok(()) };
            let uu = nearest_isometry(&u).unwrap();
            prop_assert!(uu.sub(&u).unwrap().max_abs() < 1e-12);
            let ru = nearest_isometry(&r.matmul(&m).unwrap()).unwrap();
            prop_assert!(ru.sub(&r.matmul(&u).unwrap()).unwrap().max_abs() < 1e-9);
        }

        #[test]
        fn orthonormal_fixed_point(q in orthonormal(3)) {
            let u = nearest_isometry(&q).unwrap();
            prop_assert!(u.sub(&q).unwrap().max_abs() < TAU_ORTH);
        }
    }
}
