//! Forward map `T_abc = (1/n) Tr(A_a B_b C_c)`, the masked reconstruction
//! loss `L = ½ Σ_Ω Σ_c (T_abc - δ_abc)²` and its Hessian trace `H`.
//!
//! `T` is linear in every single parameter, so the diagonal of `∇²T` is zero
//! and `Tr ∇²L = Σ_Ω Σ_c |∇T_abc|²` at any point, residual or not:
//!
//! `H = (1/n²) Σ_Ω Σ_c (|A_a B_b|² + |B_b C_c|² + |C_c A_a|²)`.
//!
//! The sums over `c` collapse onto Gram matrices
//! `Σ_c C_c C_cᵀ` and `Σ_c C_cᵀ C_c`, which keeps one objective evaluation
//! at `O(|Ω| n³)`.

use super::params::{FactorParams, GradParams, ObservationSet};
use crate::algebra::CayleyTable;
use crate::error::{Error, Result};
use crate::numerics::{gemm, gemm_into, gemm_nt_acc, gemm_tn_acc, trace, trace_of_product, Mat};

pub fn forward(theta: &FactorParams, a: usize, b: usize, c: usize) -> Result<f64> {
    let n = theta.n();
    if a >= n || b >= n || c >= n {
        return Err(Error::Index(format!("({a}, {b}, {c}) out of range for n = {n}")));
    }
    let abc = gemm(&gemm(&theta.a[a], &theta.b[b])?, &theta.c[c])?;
    Ok(trace(&abc)? / n as f64)
}

/// All `n` values `T_ab·` of one fiber.
pub fn forward_fiber(theta: &FactorParams, a: usize, b: usize) -> Vec<f64> {
    let n = theta.n();
    let mut ab = Mat::zeros(n, n);
    gemm_into(&theta.a[a], &theta.b[b], &mut ab);
    let inv_n = 1.0 / n as f64;
    theta.c.iter().map(|c| trace_of_product(&ab, c) * inv_n).collect()
}

fn check_sizes(theta: &FactorParams, t: &CayleyTable, omega: &ObservationSet) -> Result<()> {
    if theta.n() != t.n() || omega.n() != t.n() {
        return Err(Error::Shape(format!(
            "parameters n = {}, table n = {}, observations n = {}",
            theta.n(),
            t.n(),
            omega.n()
        )));
    }
    Ok(())
}

pub fn recon_loss(theta: &FactorParams, t: &CayleyTable, omega: &ObservationSet) -> Result<f64> {
    check_sizes(theta, t, omega)?;
    let mut loss = 0.0;
    for &(a, b) in omega.cells() {
        let target = t.get(a, b);
        for (c, v) in forward_fiber(theta, a, b).into_iter().enumerate() {
            let r = v - if c == target { 1.0 } else { 0.0 };
            loss += 0.5 * r * r;
        }
    }
    Ok(loss)
}

/// Row and column occupancy of `Ω`.
fn counts(omega: &ObservationSet) -> (Vec<f64>, Vec<f64>) {
    let n = omega.n();
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; n];
    for &(a, b) in omega.cells() {
        rows[a] += 1.0;
        cols[b] += 1.0;
    }
    (rows, cols)
}

/// Per-slice and Gram quantities shared by the value and gradient of `H`.
struct Grams {
    /// `A_aᵀ A_a`
    ata: Vec<Mat>,
    /// `B_b B_bᵀ`
    bbt: Vec<Mat>,
    /// `Σ_c C_c C_cᵀ`
    sum_cct: Mat,
    /// `Σ_c C_cᵀ C_c`
    sum_ctc: Mat,
    /// `Σ_a rows_a A_a A_aᵀ`
    weighted_aat: Mat,
    /// `Σ_b cols_b B_bᵀ B_b`
    weighted_btb: Mat,
}

impl Grams {
    fn new(theta: &FactorParams, rows: &[f64], cols: &[f64]) -> Self {
        let n = theta.n();
        let mut ata = Vec::with_capacity(n);
        let mut bbt = Vec::with_capacity(n);
        let mut sum_cct = Mat::zeros(n, n);
        let mut sum_ctc = Mat::zeros(n, n);
        let mut weighted_aat = Mat::zeros(n, n);
        let mut weighted_btb = Mat::zeros(n, n);
        for i in 0..n {
            let mut g = Mat::zeros(n, n);
            gemm_tn_acc(&theta.a[i], &theta.a[i], 1.0, &mut g);
            ata.push(g);
            let mut g = Mat::zeros(n, n);
            gemm_nt_acc(&theta.b[i], &theta.b[i], 1.0, &mut g);
            bbt.push(g);
            gemm_nt_acc(&theta.c[i], &theta.c[i], 1.0, &mut sum_cct);
            gemm_tn_acc(&theta.c[i], &theta.c[i], 1.0, &mut sum_ctc);
            if rows[i] != 0.0 {
                gemm_nt_acc(&theta.a[i], &theta.a[i], rows[i], &mut weighted_aat);
            }
            if cols[i] != 0.0 {
                gemm_tn_acc(&theta.b[i], &theta.b[i], cols[i], &mut weighted_btb);
            }
        }
        Grams { ata, bbt, sum_cct, sum_ctc, weighted_aat, weighted_btb }
    }

    /// `n² H`, given `Σ_Ω |A_a B_b|²`.
    fn scaled_flatness(&self, n: usize, sum_ab: f64) -> f64 {
        n as f64 * sum_ab
            + trace_of_product(&self.weighted_btb, &self.sum_cct)
            + trace_of_product(&self.weighted_aat, &self.sum_ctc)
    }
}

/// Hessian trace of the half-squared reconstruction loss over `Ω`.
pub fn flatness(theta: &FactorParams, omega: &ObservationSet) -> Result<f64> {
    let n = theta.n();
    if omega.n() != n {
        return Err(Error::Shape(format!("parameters n = {n}, observations n = {}", omega.n())));
    }
    let (rows, cols) = counts(omega);
    let g = Grams::new(theta, &rows, &cols);
    // |A_a B_b|² = Tr(A_aᵀA_a B_bB_bᵀ)
    let sum_ab: f64 = omega.cells().iter().map(|&(a, b)| trace_of_product(&g.ata[a], &g.bbt[b])).sum();
    Ok(g.scaled_flatness(n, sum_ab) / (n * n) as f64)
}

/// Loss, flatness and (optionally) the gradient of `L + λH` from one pass.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub recon_loss: f64,
    pub flatness: f64,
    pub grad: Option<GradParams>,
}

pub fn evaluate_objective(
    theta: &FactorParams,
    t: &CayleyTable,
    omega: &ObservationSet,
    lambda: f64,
    with_grad: bool,
) -> Result<Evaluation> {
    check_sizes(theta, t, omega)?;
    let n = theta.n();
    let nf = n as f64;
    let inv_n = 1.0 / nf;
    let (rows, cols) = counts(omega);
    let grams = Grams::new(theta, &rows, &cols);

    let mut grad = with_grad.then(|| FactorParams::zeros(n));
    let mut loss = 0.0;
    let mut sum_ab = 0.0;
    let mut ab = Mat::zeros(n, n);
    let mut s = Mat::zeros(n, n);
    let mut tmp = Mat::zeros(n, n);
    let mut residual = vec![0.0; n];

    for &(a, b) in omega.cells() {
        gemm_into(&theta.a[a], &theta.b[b], &mut ab);
        sum_ab += ab.data().iter().map(|x| x * x).sum::<f64>();
        let target = t.get(a, b);
        for (c, r) in residual.iter_mut().enumerate() {
            let v = trace_of_product(&ab, &theta.c[c]) * inv_n;
            *r = v - if c == target { 1.0 } else { 0.0 };
            loss += 0.5 * *r * *r;
        }
        let Some(g) = grad.as_mut() else { continue };
        // S = Σ_c r_c C_c
        s.data_mut().iter_mut().for_each(|x| *x = 0.0);
        for (c, &r) in residual.iter().enumerate() {
            s.axpy(r, &theta.c[c]);
            // ∂L/∂C_c += (r/n) (A_a B_b)ᵀ
            add_transposed(&mut g.c[c], r * inv_n, &ab);
        }
        // ∂L/∂A_a += (1/n) (B_b S)ᵀ, ∂L/∂B_b += (1/n) (S A_a)ᵀ
        gemm_into(&theta.b[b], &s, &mut tmp);
        add_transposed(&mut g.a[a], inv_n, &tmp);
        gemm_into(&s, &theta.a[a], &mut tmp);
        add_transposed(&mut g.b[b], inv_n, &tmp);
    }
    let flat = grams.scaled_flatness(n, sum_ab) / (nf * nf);

    if let Some(g) = grad.as_mut() {
        if lambda != 0.0 {
            add_flatness_grad(theta, omega, &grams, &rows, &cols, lambda, g);
        }
    }
    Ok(Evaluation { recon_loss: loss, flatness: flat, grad })
}

/// `∂H/∂A_a = (2/n²)(n A_a Σ_{b∈Ω_a} B_bB_bᵀ + rows_a Σ_c C_cᵀC_c A_a)`,
/// `∂H/∂B_b = (2/n²)(n Σ_{a∈Ω^b} A_aᵀA_a B_b + cols_b B_b Σ_c C_cC_cᵀ)`,
/// `∂H/∂C_c = (2/n²)(Σ_b cols_b B_bᵀB_b C_c + C_c Σ_a rows_a A_aA_aᵀ)`.
fn add_flatness_grad(
    theta: &FactorParams,
    omega: &ObservationSet,
    grams: &Grams,
    rows: &[f64],
    cols: &[f64],
    lambda: f64,
    g: &mut GradParams,
) {
    let n = theta.n();
    let nf = n as f64;
    let k = lambda * 2.0 / (nf * nf);
    let mut row_bbt: Vec<Mat> = vec![Mat::zeros(n, n); n];
    let mut col_ata: Vec<Mat> = vec![Mat::zeros(n, n); n];
    for &(a, b) in omega.cells() {
        row_bbt[a].axpy(1.0, &grams.bbt[b]);
        col_ata[b].axpy(1.0, &grams.ata[a]);
    }
    let mut tmp = Mat::zeros(n, n);
    for i in 0..n {
        if rows[i] != 0.0 {
            gemm_into(&theta.a[i], &row_bbt[i], &mut tmp);
            g.a[i].axpy(k * nf, &tmp);
            gemm_into(&grams.sum_ctc, &theta.a[i], &mut tmp);
            g.a[i].axpy(k * rows[i], &tmp);
        }
        if cols[i] != 0.0 {
            gemm_into(&col_ata[i], &theta.b[i], &mut tmp);
            g.b[i].axpy(k * nf, &tmp);
            gemm_into(&theta.b[i], &grams.sum_cct, &mut tmp);
            g.b[i].axpy(k * cols[i], &tmp);
        }
        gemm_into(&grams.weighted_btb, &theta.c[i], &mut tmp);
        g.c[i].axpy(k, &tmp);
        gemm_into(&theta.c[i], &grams.weighted_aat, &mut tmp);
        g.c[i].axpy(k, &tmp);
    }
}

fn add_transposed(out: &mut Mat, s: f64, x: &Mat) {
    let n = x.rows();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] += s * x[(j, i)];
        }
    }
}

/// Gradient of `recon_loss + λ·flatness`.
pub fn grad(theta: &FactorParams, t: &CayleyTable, omega: &ObservationSet, lambda: f64) -> Result<GradParams> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("λ must be nonnegative, got {lambda}")));
    }
    Ok(evaluate_objective(theta, t, omega, lambda, true)?.grad.expect("gradient requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::cyclic_group;

    #[test]
    fn identity_slices_give_unit_forward() {
        let n = 3;
        let id = vec![Mat::identity(n); n];
        let p = FactorParams::new(id.clone(), id.clone(), id).unwrap();
        for a in 0..n {
            assert_eq!(forward(&p, a, 1, 2).unwrap(), 1.0);
        }
        assert!(matches!(forward(&p, 3, 0, 0), Err(Error::Index(_))));
    }

    #[test]
    fn zero_slice_kills_forward() {
        let n = 3;
        let id = vec![Mat::identity(n); n];
        let mut a = id.clone();
        a[1] = Mat::zeros(n, n);
        let p = FactorParams::new(a, id.clone(), id).unwrap();
        assert!((0..n).all(|b| forward(&p, 1, b, 0).unwrap() == 0.0));
    }

    #[test]
    fn zero_params() {
        for n in 1..=5 {
            let t = cyclic_group(n).unwrap();
            let z = FactorParams::zeros(n);
            let full = ObservationSet::full(n);
            assert_eq!(recon_loss(&z, &t, &full).unwrap(), 0.5 * (n * n) as f64);
            assert_eq!(flatness(&z, &full).unwrap(), 0.0);
            let g = grad(&z, &t, &full, 0.7).unwrap();
            assert_eq!(g.norm2(), 0.0);
            assert_eq!(recon_loss(&z, &t, &ObservationSet::empty(n)).unwrap(), 0.0);
            assert_eq!(flatness(&z, &ObservationSet::empty(n)).unwrap(), 0.0);
        }
    }

    #[test]
    fn negative_lambda_rejected() {
        let t = cyclic_group(2).unwrap();
        assert!(grad(&FactorParams::zeros(2), &t, &ObservationSet::full(2), -1.0).is_err());
    }
}
