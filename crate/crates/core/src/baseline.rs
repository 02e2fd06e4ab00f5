//! Factorized matrix completion with weight decay, applied to matrix
//! encodings of a Cayley table. Weight decay on `U, V` is a variational form
//! of the nuclear norm of `UVᵀ`, so this is the low-rank baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::CayleyTable;
use crate::engine::{Adam, TrainConfig};
use crate::error::{Error, Result};
use crate::model::ObservationSet;
use crate::numerics::{gemm, singular_values, svd, Mat, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// `M[a][b] = a∘b` as a real number; `n×n`.
    Ordinal,
    /// `M[a·n + b][c] = δ_abc`; `n²×n`.
    Onehot,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Ordinal => "ordinal",
            Encoding::Onehot => "onehot",
        })
    }
}

impl FromStr for Encoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordinal" => Ok(Encoding::Ordinal),
            "onehot" => Ok(Encoding::Onehot),
            other => Err(Error::Parse(format!("unknown encoding {other:?}"))),
        }
    }
}

pub fn encode_table(t: &CayleyTable, encoding: Encoding) -> Mat {
    let n = t.n();
    match encoding {
        Encoding::Ordinal => {
            Mat::from_vec(n, n, t.cells().iter().map(|&c| c as f64).collect()).expect("n×n entries")
        }
        Encoding::Onehot => {
            let mut m = Mat::zeros(n * n, n);
            for a in 0..n {
                for b in 0..n {
                    m[(a * n + b, t.get(a, b))] = 1.0;
                }
            }
            m
        }
    }
}

/// Observed entries of the encoded matrix: the cells of `Ω` for ordinal,
/// their whole one-hot rows for onehot.
fn observed_entries(n: usize, omega: &ObservationSet, encoding: Encoding) -> Vec<(usize, usize)> {
    match encoding {
        Encoding::Ordinal => omega.cells().to_vec(),
        Encoding::Onehot => omega.cells().iter().flat_map(|&(a, b)| (0..n).map(move |c| (a * n + b, c))).collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McFactors {
    pub encoding: Encoding,
    pub n: usize,
    pub r: usize,
    pub u: Mat,
    pub v: Mat,
    pub steps_used: usize,
}

impl McFactors {
    pub fn reconstruction(&self) -> Mat {
        gemm(&self.u, &self.v.transpose()).expect("factor shapes agree")
    }
}

/// Relative size of the seeded perturbation added to the spectral start.
const SPECTRAL_JITTER: f64 = 0.1;

/// Balanced top-`r` factors of the zero-filled observed matrix rescaled by
/// the inverse sampling rate; columns beyond the matrix rank stay zero.
fn spectral_init(target: &Mat, observed: &[(usize, usize)], r: usize) -> (Mat, Mat) {
    let (rows, cols) = (target.rows(), target.cols());
    let mut y = Mat::zeros(rows, cols);
    let scale = if observed.is_empty() { 0.0 } else { (rows * cols) as f64 / observed.len() as f64 };
    for &(i, j) in observed {
        y[(i, j)] = scale * target[(i, j)];
    }
    let (p, q) = balanced_factors(&y);
    let mut u = Mat::zeros(rows, r);
    let mut v = Mat::zeros(cols, r);
    for k in 0..r.min(p.cols()) {
        for i in 0..rows {
            u[(i, k)] = p[(i, k)];
        }
        for j in 0..cols {
            v[(j, k)] = q[(j, k)];
        }
    }
    (u, v)
}

/// Minimizes `Σ_obs (UVᵀ - M)² + wd·(|U|² + |V|²)` over the observed entries
/// of `target` with Adam, using the learning rate, betas, step budget and
/// learning-rate decay of `cfg` (the λ part of its schedule is ignored),
/// starting from a jittered spectral estimate. Stops early when the data
/// term drops below `cfg.loss_tol`.
pub fn mc_train_matrix(
    target: &Mat,
    observed: &[(usize, usize)],
    r: usize,
    weight_decay: f64,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Mat, Mat, usize)> {
    cfg.validate()?;
    if r == 0 {
        return Err(Error::InvalidInput("rank budget must be at least 1".into()));
    }
    if !(weight_decay >= 0.0) {
        return Err(Error::InvalidInput(format!("weight decay must be nonnegative, got {weight_decay}")));
    }
    let (rows, cols) = (target.rows(), target.cols());
    let (mut u, mut v) = spectral_init(target, observed, r);
    let mut rng = Rng::new(seed);
    let sd = SPECTRAL_JITTER * cfg.init_scale / (r as f64).sqrt();
    for x in u.data_mut().iter_mut().chain(v.data_mut().iter_mut()) {
        *x += sd * rng.normal();
    }
    let mut opt = Adam::new(rows * r + cols * r, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut gu = Mat::zeros(rows, r);
    let mut gv = Mat::zeros(cols, r);

    let mut steps = 0;
    while steps < cfg.steps_max {
        let step = steps;
        gu.data_mut().copy_from_slice(u.scale(2.0 * weight_decay).data());
        gv.data_mut().copy_from_slice(v.scale(2.0 * weight_decay).data());
        let mut data_loss = 0.0;
        for &(i, j) in observed {
            let pred: f64 = u.row(i).iter().zip(v.row(j)).map(|(x, y)| x * y).sum();
            let res = pred - target[(i, j)];
            data_loss += res * res;
            for k in 0..r {
                gu[(i, k)] += 2.0 * res * v[(j, k)];
                gv[(j, k)] += 2.0 * res * u[(i, k)];
            }
        }
        if !data_loss.is_finite() {
            return Err(Error::Diverged { step });
        }
        if data_loss <= cfg.loss_tol {
            break;
        }
        let (_, lr) = cfg.schedule(step);
        let params = u.data_mut().iter_mut().chain(v.data_mut().iter_mut());
        opt.step(params, gu.data().iter().chain(gv.data().iter()), lr);
        steps += 1;
    }
    if u.data().iter().chain(v.data()).any(|x| !x.is_finite()) {
        return Err(Error::Diverged { step: cfg.steps_max });
    }
    Ok((u, v, steps))
}

pub fn mc_train(
    t: &CayleyTable,
    omega: &ObservationSet,
    encoding: Encoding,
    r: usize,
    weight_decay: f64,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<McFactors> {
    let n = t.n();
    if omega.n() != n {
        return Err(Error::Shape(format!("observations n = {} but table n = {n}", omega.n())));
    }
    let target = encode_table(t, encoding);
    let observed = observed_entries(n, omega, encoding);
    let (u, v, steps_used) = mc_train_matrix(&target, &observed, r, weight_decay, cfg, seed)?;
    Ok(McFactors { encoding, n, r, u, v, steps_used })
}

/// Ordinal: clamp-and-round each entry. Onehot: argmax of each row, ties to
/// the smallest symbol.
pub fn mc_decode(f: &McFactors) -> CayleyTable {
    let n = f.n;
    let m = f.reconstruction();
    let cells = match f.encoding {
        Encoding::Ordinal => m.data().iter().map(|&x| x.round().clamp(0.0, (n - 1) as f64) as usize).collect(),
        Encoding::Onehot => (0..n * n).map(|row| crate::engine::argmax(m.row(row))).collect(),
    };
    CayleyTable::new(n, cells).expect("decoded symbols are in range")
}

pub fn nuclear_norm(x: &Mat) -> f64 {
    singular_values(x).iter().sum()
}

/// `U = PΣ^½`, `V = QΣ^½` from the SVD `x = PΣQᵀ`, the factorization that
/// attains `|U|² + |V|² = 2·|x|_*`.
pub fn balanced_factors(x: &Mat) -> (Mat, Mat) {
    let s = svd(x);
    let k = s.sigma.len();
    let mut u = s.u.clone();
    let mut v = s.v.clone();
    for j in 0..k {
        let w = s.sigma[j].sqrt();
        for i in 0..u.rows() {
            u[(i, j)] *= w;
        }
        for i in 0..v.rows() {
            v[(i, j)] *= w;
        }
    }
    (u, v)
}
