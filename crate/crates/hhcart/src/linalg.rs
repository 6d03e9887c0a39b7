//! Dense symmetric linear algebra for the split search: covariance
//! estimation, Jacobi eigen-decomposition, Householder reflections.
//!
//! Feature counts stay small (tens of columns), so everything is dense
//! row-major with plain loops. `reflect` and [`dot`] accumulate in the
//! same index order; routing a point with a Householder column as the
//! weight vector reproduces the reflected coordinate bit for bit.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("class is degenerate: fewer than two distinct examples")]
    DegenerateClass,
    #[error("eigen iteration did not converge within the sweep cap")]
    ConvergenceFailure,
    #[error("householder direction equals the target axis")]
    ZeroDenominator,
    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }
}

/// Inner product with a fixed ascending accumulation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for j in 0..a.len() {
        acc += a[j] * b[j];
    }
    acc
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Sample covariance of a set of feature vectors.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    pub s: Matrix,
    pub mean: Vec<f64>,
    pub count: usize,
    /// All input vectors were identical; `s` is the zero matrix.
    pub degenerate: bool,
}

/// S = sum((x - mean)(x - mean)^T) / (n - 1), computed on one triangle and
/// mirrored so S is symmetric exactly.
pub fn covariance(rows: &[&[f64]]) -> Result<CovarianceMatrix, LinalgError> {
    let n = rows.len();
    if n < 2 {
        return Err(LinalgError::DegenerateClass);
    }
    let p = rows[0].len();
    let identical = rows.iter().all(|r| r[..] == rows[0][..]);
    let mut mean = vec![0.0; p];
    for r in rows {
        for j in 0..p {
            mean[j] += r[j];
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut s = Matrix::zeros(p, p);
    if !identical {
        let denom = (n - 1) as f64;
        for a in 0..p {
            for b in a..p {
                let mut acc = 0.0;
                for r in rows {
                    acc += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
                let v = acc / denom;
                s.set(a, b, v);
                s.set(b, a, v);
            }
        }
    }
    Ok(CovarianceMatrix { s, mean, count: n, degenerate: identical })
}

/// One eigenvalue with its unit eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations.
///
/// Pairs come back sorted by eigenvalue descending; exact ties are ordered
/// by the axis index of each vector's largest-magnitude component. Vector
/// signs are fixed so the first component above 1e-12 is positive, keeping
/// grown trees reproducible run to run.
pub fn symmetric_eigen(s: &Matrix) -> Result<Vec<EigenPair>, LinalgError> {
    let p = s.nrows();
    assert_eq!(p, s.ncols(), "matrix must be square");
    let tol = 1e-12 * s.frobenius_norm();
    let mut a = s.clone();
    let mut v = Matrix::identity(p);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = {
            let mut acc = 0.0;
            for i in 0..p {
                for j in (i + 1)..p {
                    acc += 2.0 * a.get(i, j) * a.get(i, j);
                }
            }
            acc.sqrt()
        };
        if off <= tol {
            converged = true;
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = a.get(i, j);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(j, j) - a.get(i, i)) / (2.0 * apq);
                let t = {
                    let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                // rotate rows/columns i and j of a
                for k in 0..p {
                    let aki = a.get(k, i);
                    let akj = a.get(k, j);
                    a.set(k, i, c * aki - sn * akj);
                    a.set(k, j, sn * aki + c * akj);
                }
                for k in 0..p {
                    let aik = a.get(i, k);
                    let ajk = a.get(j, k);
                    a.set(i, k, c * aik - sn * ajk);
                    a.set(j, k, sn * aik + c * ajk);
                }
                for k in 0..p {
                    let vki = v.get(k, i);
                    let vkj = v.get(k, j);
                    v.set(k, i, c * vki - sn * vkj);
                    v.set(k, j, sn * vki + c * vkj);
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::ConvergenceFailure);
    }
    let mut pairs: Vec<EigenPair> = (0..p)
        .map(|j| {
            let mut vec = v.column(j);
            let n = norm2(&vec);
            if n > 0.0 {
                for x in vec.iter_mut() {
                    *x /= n;
                }
            }
            fix_sign(&mut vec);
            EigenPair { value: a.get(j, j), vector: vec }
        })
        .collect();
    pairs.sort_by(|x, y| {
        y.value
            .partial_cmp(&x.value)
            .unwrap()
            .then_with(|| argmax_abs(&x.vector).cmp(&argmax_abs(&y.vector)))
    });
    Ok(pairs)
}

fn fix_sign(v: &mut [f64]) {
    for &x in v.iter() {
        if x.abs() > 1e-12 {
            if x < 0.0 {
                for y in v.iter_mut() {
                    *y = -*y;
                }
            }
            return;
        }
    }
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Eigenpair with the largest eigenvalue; errors on the zero matrix.
pub fn dominant_eigen(s: &Matrix) -> Result<EigenPair, LinalgError> {
    if s.is_zero() {
        return Err(LinalgError::DegenerateClass);
    }
    let pairs = symmetric_eigen(s)?;
    Ok(pairs.into_iter().next().expect("square matrix has at least one eigenpair"))
}

/// H = I - 2uu^T with u = (e1 - d)/||e1 - d||; maps the unit vector d onto e1.
#[derive(Debug, Clone)]
pub struct HouseholderMatrix {
    pub h: Matrix,
    pub u: Vec<f64>,
    pub source: Vec<f64>,
}

pub fn householder(d: &[f64]) -> Result<HouseholderMatrix, LinalgError> {
    let p = d.len();
    let mut u: Vec<f64> = d.iter().map(|x| -x).collect();
    u[0] += 1.0;
    let n = norm2(&u);
    if n == 0.0 {
        return Err(LinalgError::ZeroDenominator);
    }
    for x in u.iter_mut() {
        *x /= n;
    }
    let mut h = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let delta = if i == j { 1.0 } else { 0.0 };
            h.set(i, j, delta - 2.0 * u[i] * u[j]);
        }
    }
    Ok(HouseholderMatrix { h, u, source: d.to_vec() })
}

/// Reflected example set: the matrix product D * H.
pub fn reflect(d: &Matrix, h: &HouseholderMatrix) -> Result<Matrix, LinalgError> {
    let p = h.h.nrows();
    if d.ncols() != p {
        return Err(LinalgError::DimensionMismatch { expected: p, got: d.ncols() });
    }
    let mut out = Matrix::zeros(d.nrows(), p);
    for i in 0..d.nrows() {
        let row = d.row(i);
        for k in 0..p {
            let mut acc = 0.0;
            for j in 0..p {
                acc += row[j] * h.h.get(j, k);
            }
            out.set(i, k, acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn covariance_two_points() {
        let rows: Vec<&[f64]> = vec![&[0.0, 0.0], &[2.0, 2.0]];
        let c = covariance(&rows).unwrap();
        assert_eq!(c.mean, vec![1.0, 1.0]);
        assert_eq!(c.s.row(0), &[2.0, 2.0]);
        assert_eq!(c.s.row(1), &[2.0, 2.0]);
        assert!(!c.degenerate);
    }

    #[test]
    fn covariance_identical_points_flags_degeneracy() {
        let rows: Vec<&[f64]> = vec![&[1.0, 1.0], &[1.0, 1.0]];
        let c = covariance(&rows).unwrap();
        assert!(c.degenerate);
        assert!(c.s.is_zero());
    }

    #[test]
    fn covariance_single_vector_errors() {
        let rows: Vec<&[f64]> = vec![&[1.0, 2.0]];
        assert_eq!(covariance(&rows).unwrap_err(), LinalgError::DegenerateClass);
    }

    #[test]
    fn eigen_diagonal() {
        let s = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        let pairs = symmetric_eigen(&s).unwrap();
        assert_close(pairs[0].value, 2.0, 1e-12);
        assert_close(pairs[1].value, 1.0, 1e-12);
        assert_close(pairs[0].vector[0], 1.0, 1e-12);
        assert_close(pairs[1].vector[1], 1.0, 1e-12);
    }

    #[test]
    fn eigen_rank_one() {
        // char poly of [[2,2],[2,2]]: lambda^2 - 4 lambda = 0
        let s = Matrix::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0]]);
        let pairs = symmetric_eigen(&s).unwrap();
        let r = 1.0 / 2.0_f64.sqrt();
        assert_close(pairs[0].value, 4.0, 1e-12);
        assert_close(pairs[1].value, 0.0, 1e-12);
        assert_close(pairs[0].vector[0], r, 1e-12);
        assert_close(pairs[0].vector[1], r, 1e-12);
        assert_close(pairs[1].vector[0], r, 1e-12);
        assert_close(pairs[1].vector[1], -r, 1e-12);
    }

    #[test]
    fn eigen_identity_is_orthonormal() {
        let pairs = symmetric_eigen(&Matrix::identity(3)).unwrap();
        assert_eq!(pairs.len(), 3);
        for p in &pairs {
            assert_close(p.value, 1.0, 1e-12);
            assert_close(norm2(&p.vector), 1.0, 1e-12);
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert_close(dot(&pairs[i].vector, &pairs[j].vector), 0.0, 1e-10);
            }
        }
    }

    #[test]
    fn dominant_eigen_cases() {
        let s = Matrix::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0]]);
        let p = dominant_eigen(&s).unwrap();
        let r = 1.0 / 2.0_f64.sqrt();
        assert_close(p.value, 4.0, 1e-12);
        assert_close(p.vector[0], r, 1e-12);
        assert_close(p.vector[1], r, 1e-12);

        let d = Matrix::from_rows(&[vec![5.0, 0.0], vec![0.0, 1.0]]);
        let p = dominant_eigen(&d).unwrap();
        assert_close(p.value, 5.0, 1e-12);
        assert_close(p.vector[0], 1.0, 1e-12);

        assert!(dominant_eigen(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn householder_axis_swap() {
        let h = householder(&[0.0, 1.0]).unwrap();
        assert_close(h.h.get(0, 0), 0.0, 1e-15);
        assert_close(h.h.get(0, 1), 1.0, 1e-15);
        assert_close(h.h.get(1, 0), 1.0, 1e-15);
        assert_close(h.h.get(1, 1), 0.0, 1e-15);
    }

    #[test]
    fn householder_diagonal_direction() {
        // hand-evaluated H for d = (1/sqrt2, 1/sqrt2)
        let r = 1.0 / 2.0_f64.sqrt();
        let h = householder(&[r, r]).unwrap();
        assert_close(h.h.get(0, 0), r, 1e-12);
        assert_close(h.h.get(0, 1), r, 1e-12);
        assert_close(h.h.get(1, 0), r, 1e-12);
        assert_close(h.h.get(1, 1), -r, 1e-12);
        // Hd = e1
        let hd = [dot(h.h.row(0), &[r, r]), dot(h.h.row(1), &[r, r])];
        assert_close(hd[0], 1.0, 1e-12);
        assert_close(hd[1], 0.0, 1e-12);
    }

    #[test]
    fn householder_e1_is_zero_denominator() {
        assert_eq!(householder(&[1.0, 0.0]).unwrap_err(), LinalgError::ZeroDenominator);
    }

    #[test]
    fn reflect_examples() {
        let h = householder(&[0.0, 1.0]).unwrap();
        let d = Matrix::from_rows(&[vec![2.0, 0.0]]);
        let out = reflect(&d, &h).unwrap();
        assert_close(out.get(0, 0), 0.0, 1e-12);
        assert_close(out.get(0, 1), 2.0, 1e-12);

        let ident = HouseholderMatrix {
            h: Matrix::identity(2),
            u: vec![0.0, 0.0],
            source: vec![1.0, 0.0],
        };
        let out = reflect(&d, &ident).unwrap();
        assert_eq!(out.row(0), d.row(0));

        let r = 1.0 / 2.0_f64.sqrt();
        let h = householder(&[r, r]).unwrap();
        let d = Matrix::from_rows(&[vec![1.0, 0.0]]);
        let out = reflect(&d, &h).unwrap();
        assert_close(out.get(0, 0), r, 1e-12);
        assert_close(out.get(0, 1), r, 1e-12);

        let bad = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        assert!(reflect(&bad, &h).is_err());
    }

    #[test]
    fn reflect_is_involutive() {
        let r = 1.0 / 2.0_f64.sqrt();
        let h = householder(&[r, r]).unwrap();
        let d = Matrix::from_rows(&[vec![1.5, -0.25], vec![3.0, 7.0]]);
        let back = reflect(&reflect(&d, &h).unwrap(), &h).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_close(back.get(i, j), d.get(i, j), 1e-9);
            }
        }
    }

    // test-local determinant via Gaussian elimination with partial pivoting
    fn det(m: &Matrix) -> f64 {
        let n = m.nrows();
        let mut a = m.clone();
        let mut d = 1.0;
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a.get(r, col).abs() > a.get(piv, col).abs() {
                    piv = r;
                }
            }
            if a.get(piv, col) == 0.0 {
                return 0.0;
            }
            if piv != col {
                for k in 0..n {
                    let tmp = a.get(col, k);
                    a.set(col, k, a.get(piv, k));
                    a.set(piv, k, tmp);
                }
                d = -d;
            }
            d *= a.get(col, col);
            for r in (col + 1)..n {
                let f = a.get(r, col) / a.get(col, col);
                for k in col..n {
                    a.set(r, k, a.get(r, k) - f * a.get(col, k));
                }
            }
        }
        d
    }

    fn sym_matrix() -> impl Strategy<Value = Matrix> {
        (2usize..=8).prop_flat_map(|p| {
            proptest::collection::vec(-10.0..10.0f64, p * p).prop_map(move |v| {
                let mut m = Matrix::zeros(p, p);
                for i in 0..p {
                    for j in i..p {
                        let x = v[i * p + j];
                        m.set(i, j, x);
                        m.set(j, i, x);
                    }
                }
                m
            })
        })
    }

    fn unit_vector(p: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0..1.0f64, p).prop_filter_map("nonzero", |v| {
            let n = norm2(&v);
            if n < 1e-3 {
                return None;
            }
            Some(v.into_iter().map(|x| x / n).collect())
        })
    }

    proptest! {
        #[test]
        fn eigen_reconstructs(s in sym_matrix()) {
            let p = s.nrows();
            let pairs = symmetric_eigen(&s).unwrap();
            let norm = s.frobenius_norm().max(1.0);
            // ||S - V L V^T||_F
            let mut err = 0.0;
            for i in 0..p {
                for j in 0..p {
                    let mut acc = 0.0;
                    for pair in &pairs {
                        acc += pair.value * pair.vector[i] * pair.vector[j];
                    }
                    let d = s.get(i, j) - acc;
                    err += d * d;
                }
            }
            prop_assert!(err.sqrt() <= 1e-8 * norm);
            // V^T V = I
            for a in 0..p {
                for b in 0..p {
                    let d = dot(&pairs[a].vector, &pairs[b].vector);
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((d - want).abs() <= 1e-10);
                }
            }
            // eigenvalue sum equals trace
            let sum: f64 = pairs.iter().map(|e| e.value).sum();
            prop_assert!((sum - s.trace()).abs() <= 1e-8 * s.trace().abs().max(1.0));
            // residuals
            for pair in &pairs {
                let mut r = 0.0;
                for i in 0..p {
                    let sv = dot(s.row(i), &pair.vector);
                    let d = sv - pair.value * pair.vector[i];
                    r += d * d;
                }
                prop_assert!(r.sqrt() <= 1e-8 * pair.value.abs().max(1.0));
            }
        }

        #[test]
        fn householder_properties(v in unit_vector(5)) {
            if (v[0] - 1.0).abs() < 1e-9 && norm2(&v[1..]) < 1e-9 {
                return Ok(());
            }
            let h = householder(&v).unwrap();
            let p = v.len();
            for i in 0..p {
                for j in 0..p {
                    prop_assert!((h.h.get(i, j) - h.h.get(j, i)).abs() <= 1e-10);
                    let mut hh = 0.0;
                    for k in 0..p {
                        hh += h.h.get(i, k) * h.h.get(k, j);
                    }
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((hh - want).abs() <= 1e-10);
                }
            }
            let hd: Vec<f64> = (0..p).map(|i| dot(h.h.row(i), &v)).collect();
            prop_assert!((hd[0] - 1.0).abs() <= 1e-10);
            for x in &hd[1..] {
                prop_assert!(x.abs() <= 1e-10);
            }
            prop_assert!((det(&h.h) + 1.0).abs() <= 1e-8);
        }

        #[test]
        fn covariance_translation_invariant(
            vals in proptest::collection::vec(-5.0..5.0f64, 12),
            shift in proptest::collection::vec(-100.0..100.0f64, 3),
        ) {
            let rows: Vec<Vec<f64>> = vals.chunks(3).map(|c| c.to_vec()).collect();
            let shifted: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().zip(&shift).map(|(a, b)| a + b).collect())
                .collect();
            let a = covariance(&rows.iter().map(|r| r.as_slice()).collect::<Vec<_>>()).unwrap();
            let b = covariance(&shifted.iter().map(|r| r.as_slice()).collect::<Vec<_>>()).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((a.s.get(i, j) - b.s.get(i, j)).abs() <= 1e-10);
                }
            }
        }
    }
}
