use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::recovery::decode;
use crate::algebra::CayleyTable;
use crate::error::{Error, Result};
use crate::model::{evaluate_objective, init_params, FactorParams, ObservationSet};
use crate::numerics::Rng;

/// Optimizer and schedule settings for [`train`].
///
/// The penalty weight ramps linearly from 0 to `lambda` over the first
/// `lambda_warmup_frac` of `steps_max`, holds, and from `anneal_start_frac`
/// decays geometrically toward 0 (by `anneal_floor`) over the anneal phase.
/// The final `polish_frac` runs with no penalty so the fit becomes exact at
/// the flat point the penalty selected. The learning rate decays
/// geometrically to `lr * lr_final_frac` across anneal and polish.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub steps_max: usize,
    pub lambda: f64,
    pub lambda_warmup_frac: f64,
    pub anneal_start_frac: f64,
    pub anneal_floor: f64,
    pub polish_frac: f64,
    pub lr_final_frac: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub init_scale: f64,
    pub loss_tol: f64,
    pub stability_window: usize,
    /// Steps between decode checks and trajectory records.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-2,
            steps_max: 50_000,
            lambda: 0.05,
            lambda_warmup_frac: 0.1,
            anneal_start_frac: 0.6,
            anneal_floor: 1e-4,
            polish_frac: 0.1,
            lr_final_frac: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            init_scale: 1.0,
            loss_tol: 1e-8,
            stability_window: 500,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let checks: [(bool, &str); 12] = [
            (self.lr > 0.0 && self.lr.is_finite(), "lr must be positive"),
            (self.lambda >= 0.0 && self.lambda.is_finite(), "lambda must be nonnegative"),
            (unit(self.lambda_warmup_frac), "lambda_warmup_frac must lie in [0, 1]"),
            (unit(self.anneal_start_frac), "anneal_start_frac must lie in [0, 1]"),
            (self.anneal_floor > 0.0 && self.anneal_floor <= 1.0, "anneal_floor must lie in (0, 1]"),
            (unit(self.polish_frac), "polish_frac must lie in [0, 1]"),
            (self.lr_final_frac > 0.0 && self.lr_final_frac <= 1.0, "lr_final_frac must lie in (0, 1]"),
            ((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2), "adam betas must lie in [0, 1)"),
            (self.adam_eps > 0.0, "adam_eps must be positive"),
            (self.init_scale > 0.0 && self.init_scale.is_finite(), "init_scale must be positive"),
            (self.loss_tol > 0.0, "loss_tol must be positive"),
            (self.log_every >= 1, "log_every must be at least 1"),
        ];
        if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(Error::Config((*msg).into()));
        }
        if self.lambda_warmup_frac > self.anneal_start_frac || self.anneal_start_frac > 1.0 - self.polish_frac {
            return Err(Error::Config(
                "schedule must satisfy warmup <= anneal_start <= 1 - polish".into(),
            ));
        }
        Ok(())
    }

    /// `(λ, lr)` at `step`.
    pub fn schedule(&self, step: usize) -> (f64, f64) {
        let s = self.steps_max.max(1) as f64;
        let x = step as f64 / s;
        let polish_start = 1.0 - self.polish_frac;
        let decay_len = (1.0 - self.anneal_start_frac).max(f64::MIN_POSITIVE);
        let lr = if x <= self.anneal_start_frac {
            self.lr
        } else {
            self.lr * self.lr_final_frac.powf(((x - self.anneal_start_frac) / decay_len).min(1.0))
        };
        let lambda = if x >= polish_start {
            0.0
        } else if x < self.lambda_warmup_frac {
            self.lambda * x / self.lambda_warmup_frac
        } else if x <= self.anneal_start_frac {
            self.lambda
        } else {
            let len = (polish_start - self.anneal_start_frac).max(f64::MIN_POSITIVE);
            self.lambda * self.anneal_floor.powf((x - self.anneal_start_frac) / len)
        };
        (lambda, lr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub lambda: f64,
    pub recon_loss: f64,
    pub flatness: f64,
    pub decode_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    pub params: FactorParams,
    pub converged: bool,
    pub steps_used: usize,
    pub recon_loss_final: f64,
    /// Flatness over the observed cells at the final parameters.
    pub flatness_final: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    pub seed: u64,
}

/// Full-batch Adam on `recon_loss + λ(step)·flatness` from a seeded Gaussian
/// start. Stops once the loss is at most `loss_tol` and the decoded table has
/// not changed for `stability_window` steps (checked every `log_every`
/// steps), or after `steps_max` steps.
pub fn train(t: &CayleyTable, omega: &ObservationSet, cfg: &TrainConfig, seed: u64) -> Result<TrainResult> {
    cfg.validate()?;
    let n = t.n();
    if omega.n() != n {
        return Err(Error::Shape(format!("observations n = {} but table n = {n}", omega.n())));
    }
    let mut rng = Rng::new(seed);
    let mut params = init_params(n, cfg.init_scale, &mut rng)?;
    let mut opt = Adam::new(params.len(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    let mut trajectory = Vec::new();

    let mut last_decoded: Option<CayleyTable> = None;
    let mut stable_since = 0usize;
    let mut converged = false;
    let mut step = 0usize;

    while step < cfg.steps_max {
        let (lambda, lr) = cfg.schedule(step);
        let eval = evaluate_objective(&params, t, omega, lambda, true)?;
        if !eval.recon_loss.is_finite() || !eval.flatness.is_finite() {
            return Err(Error::Diverged { step });
        }
        if step % cfg.log_every == 0 {
            let decoded = decode(&params).table;
            let acc = agreement(&decoded, t);
            trajectory.push(TrajectoryPoint {
                step,
                lambda,
                recon_loss: eval.recon_loss,
                flatness: eval.flatness,
                decode_accuracy: acc,
            });
            if last_decoded.as_ref() != Some(&decoded) {
                last_decoded = Some(decoded);
                stable_since = step;
            }
            if eval.recon_loss <= cfg.loss_tol && step - stable_since >= cfg.stability_window {
                converged = true;
                break;
            }
        }
        let grad = eval.grad.expect("gradient requested");
        opt.step(params.values_mut(), grad.values(), lr);
        step += 1;
    }

    if !params.is_finite() {
        return Err(Error::Diverged { step });
    }
    let fin = evaluate_objective(&params, t, omega, 0.0, false)?;
    if !fin.recon_loss.is_finite() {
        return Err(Error::Diverged { step });
    }
    Ok(TrainResult {
        params,
        converged,
        steps_used: step,
        recon_loss_final: fin.recon_loss,
        flatness_final: fin.flatness,
        trajectory,
        seed,
    })
}

fn agreement(a: &CayleyTable, b: &CayleyTable) -> f64 {
    let hits = a.cells().iter().zip(b.cells()).filter(|(x, y)| x == y).count();
    hits as f64 / a.cells().len() as f64
}
