use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::recovery::decode;
use super::train::{train, TrainConfig, TrainResult};
use crate::algebra::{is_latin, CayleyTable};
use crate::error::{Error, Result};
use crate::model::{FactorParams, ObservationSet};
use crate::numerics::singular_values;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub converged: bool,
    pub steps_used: usize,
    pub recon_loss_final: f64,
    pub flatness_final: f64,
    pub exact: bool,
}

#[derive(Clone, Debug)]
pub struct MultiRestart {
    pub best: TrainResult,
    /// One entry per restart, in seed order.
    pub runs: Vec<RunSummary>,
}

/// `k` trainings with seeds `base_seed..base_seed + k`. The best run is the
/// first converged one by lowest final flatness, falling back to the lowest
/// flatness overall when none converged.
pub fn multi_restart(t: &CayleyTable, omega: &ObservationSet, cfg: &TrainConfig, k: usize, base_seed: u64) -> Result<MultiRestart> {
    if k == 0 {
        return Err(Error::InvalidInput("need at least one restart".into()));
    }
    let results: Vec<TrainResult> =
        (0..k as u64).into_par_iter().map(|i| train(t, omega, cfg, base_seed + i)).collect::<Result<_>>()?;
    let runs = results
        .iter()
        .map(|r| RunSummary {
            seed: r.seed,
            converged: r.converged,
            steps_used: r.steps_used,
            recon_loss_final: r.recon_loss_final,
            flatness_final: r.flatness_final,
            exact: decode(&r.params).table == *t,
        })
        .collect();
    let best = results
        .into_iter()
        .min_by(|x, y| {
            y.converged
                .cmp(&x.converged)
                .then(x.flatness_final.total_cmp(&y.flatness_final))
                .then(x.seed.cmp(&y.seed))
        })
        .expect("k >= 1");
    Ok(MultiRestart { best, runs })
}

/// Largest relative singular-value spread `(σ_max - σ_min) / σ_max` over all
/// `3n` slices; 0 for slices that are scaled orthogonal matrices.
pub fn sv_spread_max(theta: &FactorParams) -> f64 {
    theta
        .a
        .iter()
        .chain(&theta.b)
        .chain(&theta.c)
        .map(|m| {
            let s = singular_values(m);
            let (hi, lo) = (s[0], *s.last().expect("non-empty slice"));
            if hi > 0.0 {
                (hi - lo) / hi
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeSummary {
    pub table_id: String,
    pub n: usize,
    pub k: usize,
    pub converged_count: usize,
    /// Lowest flatness among converged runs.
    pub best_flatness: f64,
    pub bound: f64,
    /// `best_flatness - bound`.
    pub gap: f64,
    pub sv_spread_max: f64,
    pub runs: Vec<RunSummary>,
}

impl LandscapeSummary {
    /// Final flatness of every converged run, in seed order.
    pub fn converged_flatness(&self) -> Vec<f64> {
        self.runs.iter().filter(|r| r.converged).map(|r| r.flatness_final).collect()
    }

    pub fn to_json(&self) -> String {
        let runs: Vec<String> = self
            .runs
            .iter()
            .map(|r| {
                format!(
                    "{{\"seed\":{},\"converged\":{},\"steps_used\":{},\"recon_loss_final\":{},\"flatness_final\":{},\"exact\":{}}}",
                    r.seed,
                    r.converged,
                    r.steps_used,
                    json_num(r.recon_loss_final),
                    json_num(r.flatness_final),
                    r.exact
                )
            })
            .collect();
        format!(
            "{{\"table_id\":{},\"n\":{},\"k\":{},\"converged_count\":{},\"best_flatness\":{},\"bound\":{},\"gap\":{},\"sv_spread_max\":{},\"runs\":[{}]}}",
            serde_json::to_string(&self.table_id).expect("string serializes"),
            self.n,
            self.k,
            self.converged_count,
            json_num(self.best_flatness),
            json_num(self.bound),
            json_num(self.gap),
            json_num(self.sv_spread_max),
            runs.join(",")
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let num = |key: &str| -> Result<f64> {
            match &v[key] {
                serde_json::Value::Null => Ok(f64::NAN),
                x => x.as_f64().ok_or_else(|| Error::Parse(format!("missing number {key}"))),
            }
        };
        let int = |key: &str| v[key].as_u64().map(|x| x as usize).ok_or_else(|| Error::Parse(format!("missing integer {key}")));
        let runs: Vec<RunSummary> = v["runs"]
            .as_array()
            .ok_or_else(|| Error::Parse("missing runs".into()))?
            .iter()
            .map(|r| serde_json::from_value(r.clone()).map_err(Error::from))
            .collect::<Result<_>>()?;
        Ok(LandscapeSummary {
            table_id: v["table_id"].as_str().ok_or_else(|| Error::Parse("missing table_id".into()))?.to_string(),
            n: int("n")?,
            k: int("k")?,
            converged_count: int("converged_count")?,
            best_flatness: num("best_flatness")?,
            bound: num("bound")?,
            gap: num("gap")?,
            sv_spread_max: num("sv_spread_max")?,
            runs,
        })
    }
}

/// JSON number with 17 significant digits; `null` for non-finite values.
pub(crate) fn json_num(x: f64) -> String {
    if x.is_finite() {
        super::sweep::fmt17(x)
    } else {
        "null".into()
    }
}

/// Multi-restart fit of the fully observed table, reporting the lowest
/// flatness reached by an exact fit against the `3n²` group bound.
pub fn landscape_probe(table_id: &str, t: &CayleyTable, cfg: &TrainConfig, k: usize, base_seed: u64) -> Result<LandscapeSummary> {
    if !is_latin(t) {
        return Err(Error::InvalidInput("landscape probe requires a Latin square".into()));
    }
    let n = t.n();
    let mr = multi_restart(t, &ObservationSet::full(n), cfg, k, base_seed)?;
    let converged_count = mr.runs.iter().filter(|r| r.converged).count();
    if converged_count == 0 {
        return Err(Error::ProbeFailed { k });
    }
    let bound = 3.0 * (n * n) as f64;
    let best_flatness = mr.best.flatness_final;
    Ok(LandscapeSummary {
        table_id: table_id.to_string(),
        n,
        k,
        converged_count,
        best_flatness,
        bound,
        gap: best_flatness - bound,
        sv_spread_max: sv_spread_max(&mr.best.params),
        runs: mr.runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::cyclic_group;
    use crate::model::regular_representation;

    #[test]
    fn regular_representation_has_no_spread() {
        let p = regular_representation(&cyclic_group(4).unwrap()).unwrap();
        assert!(sv_spread_max(&p) < 1e-12);
        assert!(sv_spread_max(&p.scaled(2.0, 1.0, 0.5)) < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = LandscapeSummary {
            table_id: "cyclic-3".into(),
            n: 3,
            k: 2,
            converged_count: 1,
            best_flatness: 27.000000001,
            bound: 27.0,
            gap: 1e-9,
            sv_spread_max: 0.01,
            runs: vec![
                RunSummary { seed: 0, converged: true, steps_used: 10, recon_loss_final: 1e-9, flatness_final: 27.000000001, exact: true },
                RunSummary { seed: 1, converged: false, steps_used: 10, recon_loss_final: 0.5, flatness_final: 20.0, exact: false },
            ],
        };
        let text = s.to_json();
        assert!(text.starts_with("{\"table_id\":\"cyclic-3\",\"n\":3,\"k\":2,\"converged_count\":1,\"best_flatness\":2.7000000001000000e1"));
        assert_eq!(LandscapeSummary::from_json(&text).unwrap(), s);
    }

    #[test]
    fn probe_fails_without_convergence() {
        let cfg = TrainConfig { steps_max: 10, ..TrainConfig::default() };
        let err = landscape_probe("z3", &cyclic_group(3).unwrap(), &cfg, 2, 0).unwrap_err();
        assert!(matches!(err, Error::ProbeFailed { k: 2 }));
    }
}
