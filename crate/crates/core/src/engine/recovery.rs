use serde::{Deserialize, Serialize};

use crate::algebra::CayleyTable;
use crate::error::{Error, Result};
use crate::model::{forward_fiber, FactorParams, ObservationSet};

/// Argmax decoding of every fiber, with the per-cell gap between the best
/// and second-best value.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub table: CayleyTable,
    pub margins: Vec<f64>,
}

impl Decoded {
    pub fn margin_min(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `cells[a][b] = argmax_c T_abc`, ties to the smallest `c`.
pub fn decode(theta: &FactorParams) -> Decoded {
    let n = theta.n();
    let mut cells = Vec::with_capacity(n * n);
    let mut margins = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let (best, margin) = argmax_with_margin(&forward_fiber(theta, a, b));
            cells.push(best);
            margins.push(margin);
        }
    }
    Decoded { table: CayleyTable::new(n, cells).expect("argmax indices are in range"), margins }
}

/// First index of the maximum.
pub fn argmax(xs: &[f64]) -> usize {
    argmax_with_margin(xs).0
}

/// First index of the maximum, and its lead over the runner-up (infinite
/// for a single entry).
pub(crate) fn argmax_with_margin(xs: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    let runner_up = xs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    (best, xs[best] - runner_up)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub exact: bool,
    pub cell_accuracy: f64,
    pub observed_accuracy: f64,
    /// 1 by convention when every cell is observed.
    pub unobserved_accuracy: f64,
    pub flatness_final: f64,
    pub bound_3n2: f64,
    pub margin_min: f64,
}

/// Scores a decoded table against the target. `margin_min` is left at
/// infinity; [`evaluate_decoded`] fills it from a [`Decoded`].
pub fn evaluate(decoded: &CayleyTable, target: &CayleyTable, omega: &ObservationSet, flatness_final: f64) -> Result<RecoveryReport> {
    let n = target.n();
    if decoded.n() != n || omega.n() != n {
        return Err(Error::Shape(format!(
            "decoded n = {}, target n = {n}, observations n = {}",
            decoded.n(),
            omega.n()
        )));
    }
    let mask = omega.mask();
    let (mut hit, mut obs_hit, mut obs_total) = (0usize, 0usize, 0usize);
    for a in 0..n {
        for b in 0..n {
            let ok = decoded.get(a, b) == target.get(a, b);
            hit += ok as usize;
            if mask[a * n + b] {
                obs_total += 1;
                obs_hit += ok as usize;
            }
        }
    }
    let total = n * n;
    let unobs_total = total - obs_total;
    let ratio = |k: usize, m: usize| if m == 0 { 1.0 } else { k as f64 / m as f64 };
    Ok(RecoveryReport {
        exact: hit == total,
        cell_accuracy: ratio(hit, total),
        observed_accuracy: ratio(obs_hit, obs_total),
        unobserved_accuracy: ratio(hit - obs_hit, unobs_total),
        flatness_final,
        bound_3n2: 3.0 * total as f64,
        margin_min: f64::INFINITY,
    })
}

pub fn evaluate_decoded(decoded: &Decoded, target: &CayleyTable, omega: &ObservationSet, flatness_final: f64) -> Result<RecoveryReport> {
    let mut report = evaluate(&decoded.table, target, omega, flatness_final)?;
    report.margin_min = decoded.margin_min();
    Ok(report)
}
