use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
///
/// All reductions run in a fixed order (row-major, ascending inner index), so
/// every kernel here is bit-reproducible across runs and platforms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Mat::from_vec(r, c, rows.iter().flatten().copied().collect())
    }

    /// Permutation matrix with a single 1 at `(perm[j], j)` for every column `j`.
    pub fn permutation(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut m = Mat::zeros(n, n);
        for (j, &i) in perm.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    /// `self += s * other`, shapes assumed equal.
    pub fn axpy(&mut self, s: f64, other: &Mat) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += s * y;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Matrix product. Each output entry accumulates over the inner index in
/// ascending order.
pub fn gemm(x: &Mat, y: &Mat) -> Result<Mat> {
    if x.cols != y.rows {
        return Err(Error::Shape(format!(
            "gemm: {}x{} times {}x{}",
            x.rows, x.cols, y.rows, y.cols
        )));
    }
    let mut out = Mat::zeros(x.rows, y.cols);
    gemm_into(x, y, &mut out);
    Ok(out)
}

/// Unchecked `out = x * y` for hot loops; callers guarantee the shapes.
pub(crate) fn gemm_into(x: &Mat, y: &Mat, out: &mut Mat) {
    let (m, k, n) = (x.rows, x.cols, y.cols);
    debug_assert_eq!(k, y.rows);
    debug_assert_eq!((out.rows, out.cols), (m, n));
    out.data.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..m {
        let xr = &x.data[i * k..(i + 1) * k];
        let or = &mut out.data[i * n..(i + 1) * n];
        for (p, &xv) in xr.iter().enumerate() {
            let yr = &y.data[p * n..(p + 1) * n];
            for (o, &yv) in or.iter_mut().zip(yr) {
                *o += xv * yv;
            }
        }
    }
}

/// `out += s * x^T * y`, used by the gradient kernels.
pub(crate) fn gemm_tn_acc(x: &Mat, y: &Mat, s: f64, out: &mut Mat) {
    let (k, m, n) = (x.rows, x.cols, y.cols);
    debug_assert_eq!(k, y.rows);
    for p in 0..k {
        let xr = &x.data[p * m..(p + 1) * m];
        let yr = &y.data[p * n..(p + 1) * n];
        for (i, &xv) in xr.iter().enumerate() {
            let f = s * xv;
            let or = &mut out.data[i * n..(i + 1) * n];
            for (o, &yv) in or.iter_mut().zip(yr) {
                *o += f * yv;
            }
        }
    }
}

/// `out += s * x * y^T`.
pub(crate) fn gemm_nt_acc(x: &Mat, y: &Mat, s: f64, out: &mut Mat) {
    let (m, k, n) = (x.rows, x.cols, y.rows);
    debug_assert_eq!(k, y.cols);
    for i in 0..m {
        let xr = &x.data[i * k..(i + 1) * k];
        for j in 0..n {
            let yr = &y.data[j * k..(j + 1) * k];
            let dot: f64 = xr.iter().zip(yr).map(|(a, b)| a * b).sum();
            out.data[i * n + j] += s * dot;
        }
    }
}

/// `Tr(x * y)` without forming the product.
pub(crate) fn trace_of_product(x: &Mat, y: &Mat) -> f64 {
    let (m, k) = (x.rows, x.cols);
    let mut acc = 0.0;
    for i in 0..m {
        for p in 0..k {
            acc += x.data[i * k + p] * y.data[p * m + i];
        }
    }
    acc
}

pub fn frob2(x: &Mat) -> f64 {
    x.data.iter().map(|v| v * v).sum()
}

pub fn trace(x: &Mat) -> Result<f64> {
    if !x.is_square() {
        return Err(Error::Shape(format!("trace of {}x{} matrix", x.rows, x.cols)));
    }
    Ok((0..x.rows).map(|i| x[(i, i)]).sum())
}

/// Largest entry of `|x^T x - I|`.
pub fn orthogonality_defect(x: &Mat) -> f64 {
    if !x.is_square() {
        return f64::INFINITY;
    }
    let mut g = Mat::zeros(x.cols, x.cols);
    gemm_tn_acc(x, x, 1.0, &mut g);
    g.max_abs_diff(&Mat::identity(x.cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_product() {
        let x = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(gemm(&Mat::identity(2), &x).unwrap(), x);
        assert_eq!(gemm(&x, &Mat::identity(2)).unwrap(), x);
    }

    #[test]
    fn permutation_product_is_permutation() {
        let p = Mat::permutation(&[2, 0, 3, 1]);
        let q = Mat::permutation(&[1, 3, 0, 2]);
        let r = gemm(&p, &q).unwrap();
        for i in 0..4 {
            let row: f64 = (0..4).map(|j| r[(i, j)]).sum();
            let col: f64 = (0..4).map(|j| r[(j, i)]).sum();
            assert_eq!(row, 1.0);
            assert_eq!(col, 1.0);
        }
        assert!(r.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(gemm(&Mat::zeros(2, 3), &Mat::zeros(2, 3)), Err(Error::Shape(_))));
        assert!(matches!(trace(&Mat::zeros(2, 3)), Err(Error::Shape(_))));
        assert!(Mat::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Mat::from_vec(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn frob_and_trace() {
        assert_eq!(frob2(&Mat::zeros(3, 3)), 0.0);
        assert_eq!(frob2(&Mat::permutation(&[1, 2, 0, 4, 3])), 5.0);
        assert_eq!(frob2(&Mat::from_rows(&[vec![3.0, 4.0]]).unwrap()), 25.0);
        assert_eq!(trace(&Mat::identity(6)).unwrap(), 6.0);
        assert_eq!(trace(&Mat::permutation(&[1, 2, 0])).unwrap(), 0.0);
        assert_eq!(trace(&Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap()).unwrap(), 5.0);
    }

    #[test]
    fn fused_kernels_match_gemm() {
        let x = Mat::from_rows(&[vec![1.0, -2.0, 0.5], vec![3.0, 4.0, -1.0], vec![0.0, 2.0, 2.0]]).unwrap();
        let y = Mat::from_rows(&[vec![0.5, 1.0, 0.0], vec![-1.0, 2.0, 3.0], vec![1.5, 0.0, -2.0]]).unwrap();
        let mut tn = Mat::zeros(3, 3);
        gemm_tn_acc(&x, &y, 2.0, &mut tn);
        assert!(tn.max_abs_diff(&gemm(&x.transpose(), &y).unwrap().scale(2.0)) < 1e-14);
        let mut nt = Mat::zeros(3, 3);
        gemm_nt_acc(&x, &y, 1.0, &mut nt);
        assert!(nt.max_abs_diff(&gemm(&x, &y.transpose()).unwrap()) < 1e-14);
        let t = trace(&gemm(&x, &y).unwrap()).unwrap();
        assert!((trace_of_product(&x, &y) - t).abs() < 1e-14);
    }
}
