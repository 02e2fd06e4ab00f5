//! Central finite-difference oracles. These never call into the analytic
//! gradient or flatness code; they only evaluate the scalar loss.

pub const DEFAULT_GRAD_STEP: f64 = 1e-4;
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-3;

/// `(f(θ + h e_i) - f(θ - h e_i)) / 2h` for every coordinate.
pub fn fd_gradient<F>(loss: F, theta: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = loss(&x);
            x[i] = orig - h;
            let down = loss(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `Σ_i (f(θ + h e_i) - 2 f(θ) + f(θ - h e_i)) / h²`.
pub fn fd_hessian_trace<F>(loss: F, theta: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut x = theta.to_vec();
    let center = loss(&x);
    let mut acc = 0.0;
    for i in 0..theta.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = loss(&x);
        x[i] = orig - h;
        let down = loss(&x);
        x[i] = orig;
        acc += (up - 2.0 * center + down) / (h * h);
    }
    acc
}
