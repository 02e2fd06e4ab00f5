use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use super::recovery::{decode, evaluate_decoded, RecoveryReport};
use super::spec::TableSpec;
use super::train::{train, TrainConfig};
use crate::algebra::CayleyTable;
use crate::baseline::{mc_decode, mc_train, Encoding};
use crate::error::{Error, Result};
use crate::model::ObservationSet;
use crate::numerics::Rng;

/// `m` cells drawn uniformly without replacement.
pub fn sample_mask(n: usize, m: usize, rng: &mut Rng) -> Result<ObservationSet> {
    if m > n * n {
        return Err(Error::InvalidCount(format!("cannot observe {m} of {} cells", n * n)));
    }
    let mut cells: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
    // partial Fisher-Yates
    for i in 0..m {
        let j = i + rng.below(cells.len() - i);
        cells.swap(i, j);
    }
    cells.truncate(m);
    ObservationSet::new(n, cells)
}

/// Seed of the mask for `(m, seed)`, independent of the training seed stream.
pub fn mask_seed(m: usize, seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (m as u64).wrapping_mul(0xD1B5_4A32_D192_ED03) ^ 0x5EED
}

/// Observation counts to sweep, resolved per table order `n`.
#[derive(Clone, Debug, PartialEq)]
pub enum MGrid {
    Absolute(Vec<usize>),
    /// Multiples of `n ln n`, rounded to the nearest integer.
    NLogN(Vec<f64>),
    /// Fractions of `n²`, rounded up.
    Fraction(Vec<f64>),
}

impl MGrid {
    /// Sorted, deduplicated counts clamped to `0..=n²`.
    pub fn resolve(&self, n: usize) -> Vec<usize> {
        let total = n * n;
        let nf = n as f64;
        let mut ms: Vec<usize> = match self {
            MGrid::Absolute(ms) => ms.clone(),
            MGrid::NLogN(cs) => cs.iter().map(|c| (c * nf * nf.ln()).round().max(0.0) as usize).collect(),
            MGrid::Fraction(fs) => fs.iter().map(|f| (f * total as f64).ceil().max(0.0) as usize).collect(),
        };
        ms.iter_mut().for_each(|m| *m = (*m).min(total));
        ms.sort_unstable();
        ms.dedup();
        ms
    }

    pub fn is_empty(&self) -> bool {
        match self {
            MGrid::Absolute(v) => v.is_empty(),
            MGrid::NLogN(v) | MGrid::Fraction(v) => v.is_empty(),
        }
    }
}

/// `abs:M1,M2,..`, `nlogn:C1,C2,..` or `frac:F1,F2,..`.
impl std::str::FromStr for MGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, items) = s.split_once(':').ok_or_else(|| Error::Parse(format!("grid {s:?} needs KIND:VALUES")))?;
        let items: Vec<&str> = items.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
        let floats = || -> Result<Vec<f64>> {
            items.iter().map(|x| x.parse().map_err(|_| Error::Parse(format!("bad grid value {x:?}")))).collect()
        };
        match kind {
            "abs" => Ok(MGrid::Absolute(
                items.iter().map(|x| x.parse().map_err(|_| Error::Parse(format!("bad grid value {x:?}")))).collect::<Result<_>>()?,
            )),
            "nlogn" => Ok(MGrid::NLogN(floats()?)),
            "frac" => Ok(MGrid::Fraction(floats()?)),
            _ => Err(Error::Parse(format!("unknown grid kind {kind:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Tensor,
    Mc { encoding: Encoding, r: usize, weight_decay: f64 },
}

impl Method {
    fn name(&self) -> &'static str {
        match self {
            Method::Tensor => "tensor",
            Method::Mc { .. } => "mc",
        }
    }

    /// Row-key suffix distinguishing baseline configurations.
    pub fn key(&self) -> String {
        match self {
            Method::Tensor => "tensor".into(),
            Method::Mc { encoding, r, weight_decay } => format!("mc/{encoding}/r{r}/wd{}", fmt17(*weight_decay)),
        }
    }
}

/// `tensor`, or `mc:ENCODING:R:WEIGHT_DECAY`.
impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["tensor"] => Ok(Method::Tensor),
            ["mc", enc, r, wd] => {
                let r = r.parse().map_err(|_| Error::Parse(format!("bad rank {r:?} in {s:?}")))?;
                let weight_decay = wd.parse().map_err(|_| Error::Parse(format!("bad weight decay {wd:?} in {s:?}")))?;
                Ok(Method::Mc { encoding: enc.parse()?, r, weight_decay })
            }
            _ => Err(Error::Parse(format!("unrecognized method {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepJob {
    pub table_id: String,
    pub table: CayleyTable,
    pub m: usize,
    pub seed: u64,
    pub method: Method,
}

impl SweepJob {
    pub fn key(&self) -> RowKey {
        RowKey { table_id: self.table_id.clone(), m: self.m, seed: self.seed, method: self.method.key() }
    }
}

/// Identity of a sweep row, used to skip finished work when resuming.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub table_id: String,
    pub m: usize,
    pub seed: u64,
    pub method: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub table_id: String,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub converged: bool,
    pub steps: usize,
    pub recon_loss_final: f64,
    pub flatness_final: f64,
    pub bound_3n2: f64,
    pub cell_accuracy: f64,
    pub unobserved_accuracy: f64,
    pub exact: bool,
    pub method: Method,
    /// `ok`, or `diverged@STEP` when training blew up.
    pub status: String,
}

pub const CSV_HEADER: [&str; 17] = [
    "table_id",
    "n",
    "m",
    "seed",
    "converged",
    "steps",
    "recon_loss_final",
    "flatness_final",
    "bound_3n2",
    "cell_accuracy",
    "unobserved_accuracy",
    "exact",
    "method",
    "encoding",
    "r",
    "weight_decay",
    "status",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

impl SweepRow {
    pub fn key(&self) -> RowKey {
        RowKey { table_id: self.table_id.clone(), m: self.m, seed: self.seed, method: self.method.key() }
    }

    pub fn to_record(&self) -> Vec<String> {
        let (encoding, r, wd) = match &self.method {
            Method::Tensor => (String::new(), String::new(), String::new()),
            Method::Mc { encoding, r, weight_decay } => (encoding.to_string(), r.to_string(), fmt17(*weight_decay)),
        };
        vec![
            self.table_id.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.seed.to_string(),
            self.converged.to_string(),
            self.steps.to_string(),
            fmt17(self.recon_loss_final),
            fmt17(self.flatness_final),
            fmt17(self.bound_3n2),
            fmt17(self.cell_accuracy),
            fmt17(self.unobserved_accuracy),
            self.exact.to_string(),
            self.method.name().into(),
            encoding,
            r,
            wd,
            self.status.clone(),
        ]
    }

    pub fn from_record(rec: &[String]) -> Result<Self> {
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Parse(format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len())));
        }
        fn p<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
            s.parse().map_err(|_| Error::Parse(format!("bad {what} {s:?}")))
        }
        let method = match rec[12].as_str() {
            "tensor" => Method::Tensor,
            "mc" => Method::Mc { encoding: rec[13].parse()?, r: p(&rec[14], "r")?, weight_decay: p(&rec[15], "weight_decay")? },
            other => return Err(Error::Parse(format!("unknown method {other:?}"))),
        };
        Ok(SweepRow {
            table_id: rec[0].clone(),
            n: p(&rec[1], "n")?,
            m: p(&rec[2], "m")?,
            seed: p(&rec[3], "seed")?,
            converged: p(&rec[4], "converged")?,
            steps: p(&rec[5], "steps")?,
            recon_loss_final: p(&rec[6], "recon_loss_final")?,
            flatness_final: p(&rec[7], "flatness_final")?,
            bound_3n2: p(&rec[8], "bound_3n2")?,
            cell_accuracy: p(&rec[9], "cell_accuracy")?,
            unobserved_accuracy: p(&rec[10], "unobserved_accuracy")?,
            exact: p(&rec[11], "exact")?,
            method,
            status: rec[16].clone(),
        })
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[SweepRow], header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        w.write_record(CSV_HEADER).map_err(csv_err)?;
    }
    for row in rows {
        w.write_record(row.to_record()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse("unexpected sweep CSV header".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            SweepRow::from_record(&rec.iter().map(str::to_string).collect::<Vec<_>>())
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Every `(table, m, seed, method)` combination, in canonical order.
pub fn sweep_jobs(tables: &[TableSpec], grid: &MGrid, seeds: u64, methods: &[Method]) -> Result<Vec<SweepJob>> {
    if tables.is_empty() || grid.is_empty() || seeds == 0 || methods.is_empty() {
        return Err(Error::InvalidInput("sweep needs tables, an m grid, seeds and methods".into()));
    }
    let mut jobs = Vec::new();
    for spec in tables {
        let table = spec.build()?;
        for m in grid.resolve(table.n()) {
            for method in methods {
                for seed in 0..seeds {
                    jobs.push(SweepJob { table_id: spec.id(), table: table.clone(), m, seed, method: method.clone() });
                }
            }
        }
    }
    Ok(jobs)
}

/// Mask → train → decode → evaluate for one job. Divergence becomes a row
/// with `status = diverged@STEP` rather than an error.
pub fn run_job(job: &SweepJob, cfg: &TrainConfig) -> Result<SweepRow> {
    let n = job.table.n();
    let omega = sample_mask(n, job.m, &mut Rng::new(mask_seed(job.m, job.seed)))?;
    let mut row = SweepRow {
        table_id: job.table_id.clone(),
        n,
        m: job.m,
        seed: job.seed,
        converged: false,
        steps: 0,
        recon_loss_final: f64::NAN,
        flatness_final: f64::NAN,
        bound_3n2: 3.0 * (n * n) as f64,
        cell_accuracy: 0.0,
        unobserved_accuracy: 0.0,
        exact: false,
        method: job.method.clone(),
        status: "ok".into(),
    };
    let report: RecoveryReport = match &job.method {
        Method::Tensor => match train(&job.table, &omega, cfg, job.seed) {
            Ok(res) => {
                row.converged = res.converged;
                row.steps = res.steps_used;
                row.recon_loss_final = res.recon_loss_final;
                row.flatness_final = res.flatness_final;
                evaluate_decoded(&decode(&res.params), &job.table, &omega, res.flatness_final)?
            }
            Err(Error::Diverged { step }) => {
                row.status = format!("diverged@{step}");
                return Ok(row);
            }
            Err(e) => return Err(e),
        },
        Method::Mc { encoding, r, weight_decay } => {
            match mc_train(&job.table, &omega, *encoding, *r, *weight_decay, cfg, job.seed) {
                Ok(f) => {
                    let recon = f.reconstruction();
                    let target = crate::baseline::encode_table(&job.table, *encoding);
                    let loss: f64 = recon.data().iter().zip(target.data()).map(|(x, y)| (x - y) * (x - y)).sum();
                    row.recon_loss_final = loss;
                    row.flatness_final = f64::NAN;
                    row.steps = f.steps_used;
                    super::recovery::evaluate(&mc_decode(&f), &job.table, &omega, f64::NAN)?
                }
                Err(Error::Diverged { step }) => {
                    row.status = format!("diverged@{step}");
                    return Ok(row);
                }
                Err(e) => return Err(e),
            }
        }
    };
    row.cell_accuracy = report.cell_accuracy;
    row.unobserved_accuracy = report.unobserved_accuracy;
    row.exact = report.exact;
    Ok(row)
}

/// Runs jobs in parallel and returns rows in the order of `jobs`.
pub fn run_jobs(jobs: &[SweepJob], cfg: &TrainConfig) -> Result<Vec<SweepRow>> {
    jobs.par_iter().map(|j| run_job(j, cfg)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub table_id: String,
    pub n: usize,
    pub method: String,
    pub m: usize,
    pub runs: usize,
    pub exact: usize,
    pub rate: f64,
    /// Binomial standard error of `rate`.
    pub stderr: f64,
}

/// Per `(table, method, m)` exact-recovery rates, sorted by table, method, m.
pub fn aggregate(rows: &[SweepRow]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(String, String, usize), (usize, usize, usize)> = BTreeMap::new();
    for r in rows {
        let e = groups.entry((r.table_id.clone(), r.method.key(), r.m)).or_insert((r.n, 0, 0));
        e.1 += 1;
        e.2 += r.exact as usize;
    }
    groups
        .into_iter()
        .map(|((table_id, method, m), (n, runs, exact))| {
            let rate = exact as f64 / runs as f64;
            Aggregate { table_id, n, method, m, runs, exact, rate, stderr: (rate * (1.0 - rate) / runs as f64).sqrt() }
        })
        .collect()
}

pub const RECOVERY_THRESHOLD: f64 = 0.9;

/// Smallest `m` on the grid whose recovery rate reaches `threshold`, per
/// `(table, method)`.
pub fn thresholds(aggs: &[Aggregate], threshold: f64) -> Vec<(String, String, usize, Option<usize>)> {
    let mut out: BTreeMap<(String, String), (usize, Option<usize>)> = BTreeMap::new();
    for a in aggs {
        let e = out.entry((a.table_id.clone(), a.method.clone())).or_insert((a.n, None));
        if a.rate >= threshold && e.1.is_none_or(|m| a.m < m) {
            e.1 = Some(a.m);
        }
    }
    out.into_iter().map(|((t, method), (n, m))| (t, method, n, m)).collect()
}

/// Output of [`sweep_sample_complexity`].
#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<Aggregate>,
    /// `(table_id, method, n, m*)`.
    pub thresholds: Vec<(String, String, usize, Option<usize>)>,
}

pub fn sweep_sample_complexity(tables: &[TableSpec], grid: &MGrid, seeds: u64, cfg: &TrainConfig) -> Result<SweepOutput> {
    let jobs = sweep_jobs(tables, grid, seeds, &[Method::Tensor])?;
    let rows = run_jobs(&jobs, cfg)?;
    let aggregates = aggregate(&rows);
    let thresholds = thresholds(&aggregates, RECOVERY_THRESHOLD);
    Ok(SweepOutput { rows, aggregates, thresholds })
}

/// Walks the grid of one table upward and stops at the first `m` whose exact
/// recovery rate over `seeds` reaches `threshold`. Gives the same `m*` as a
/// full grid, minus the runs above it. `done` supplies finished rows to skip.
pub fn scan_threshold(
    table_id: &str,
    table: &CayleyTable,
    grid: &MGrid,
    seeds: u64,
    method: &Method,
    cfg: &TrainConfig,
    threshold: f64,
    done: &[SweepRow],
    mut on_rows: impl FnMut(&[SweepRow]) -> Result<()>,
) -> Result<(Vec<SweepRow>, Option<usize>)> {
    let mut all = Vec::new();
    for m in grid.resolve(table.n()) {
        let jobs: Vec<SweepJob> = (0..seeds)
            .map(|seed| SweepJob { table_id: table_id.into(), table: table.clone(), m, seed, method: method.clone() })
            .collect();
        let (mut rows, todo): (Vec<SweepRow>, Vec<SweepJob>) = {
            let mut have = Vec::new();
            let mut todo = Vec::new();
            for j in jobs {
                match done.iter().find(|r| r.key() == j.key()) {
                    Some(r) => have.push(r.clone()),
                    None => todo.push(j),
                }
            }
            (have, todo)
        };
        let fresh = run_jobs(&todo, cfg)?;
        on_rows(&fresh)?;
        rows.extend(fresh);
        rows.sort_by_key(|r| r.seed);
        let exact = rows.iter().filter(|r| r.exact).count();
        all.extend(rows);
        if exact as f64 >= threshold * seeds as f64 {
            return Ok((all, Some(m)));
        }
    }
    Ok((all, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks() {
        let mut rng = Rng::new(1);
        assert!(sample_mask(4, 16, &mut rng).unwrap().is_full());
        assert!(sample_mask(4, 0, &mut rng).unwrap().is_empty());
        let m = sample_mask(10, 23, &mut rng).unwrap();
        assert_eq!(m.len(), 23);
        assert!(matches!(sample_mask(3, 10, &mut rng), Err(Error::InvalidCount(_))));
        assert_eq!(sample_mask(6, 9, &mut Rng::new(5)).unwrap(), sample_mask(6, 9, &mut Rng::new(5)).unwrap());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("tensor".parse::<Method>().unwrap(), Method::Tensor);
        assert_eq!(
            "mc:onehot:6:0.001".parse::<Method>().unwrap(),
            Method::Mc { encoding: Encoding::Onehot, r: 6, weight_decay: 1e-3 }
        );
        assert!("mc:onehot:6".parse::<Method>().is_err());
        assert!("mc:binary:6:0".parse::<Method>().is_err());
    }

    #[test]
    fn grid_resolution() {
        assert_eq!(MGrid::Absolute(vec![30, 5, 5, 200]).resolve(10), vec![5, 30, 100]);
        // 10 ln 10 ≈ 23.03
        assert_eq!(MGrid::NLogN(vec![1.0, 2.0]).resolve(10), vec![23, 46]);
        assert_eq!(MGrid::Fraction(vec![0.5, 1.0]).resolve(5), vec![13, 25]);
        assert_eq!("abs:3, 9".parse::<MGrid>().unwrap(), MGrid::Absolute(vec![3, 9]));
        assert_eq!("nlogn:1.5".parse::<MGrid>().unwrap(), MGrid::NLogN(vec![1.5]));
        assert!("frac:x".parse::<MGrid>().is_err());
        assert!("10,20".parse::<MGrid>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            SweepRow {
                table_id: "cyclic-4".into(),
                n: 4,
                m: 10,
                seed: 2,
                converged: true,
                steps: 123,
                recon_loss_final: 1.0 / 3.0,
                flatness_final: 47.99999,
                bound_3n2: 48.0,
                cell_accuracy: 1.0,
                unobserved_accuracy: 1.0,
                exact: true,
                method: Method::Tensor,
                status: "ok".into(),
            },
            SweepRow {
                table_id: "cyclic-4".into(),
                n: 4,
                m: 10,
                seed: 2,
                converged: false,
                steps: 5,
                recon_loss_final: 2.5,
                flatness_final: f64::NAN,
                bound_3n2: 48.0,
                cell_accuracy: 0.25,
                unobserved_accuracy: 0.0,
                exact: false,
                method: Method::Mc { encoding: Encoding::Onehot, r: 2, weight_decay: 1e-3 },
                status: "ok".into(),
            },
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows, true).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("table_id,n,m,seed,converged,steps,recon_loss_final,flatness_final,bound_3n2,cell_accuracy,unobserved_accuracy,exact,"));
        assert!(text.contains("3.3333333333333331e-1"));
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back[0], rows[0]);
        assert_eq!(back[1].key(), rows[1].key());
        assert!(back[1].flatness_final.is_nan());
    }

    #[test]
    fn aggregation_and_threshold() {
        let mk = |m: usize, seed: u64, exact: bool| SweepRow {
            table_id: "t".into(),
            n: 4,
            m,
            seed,
            converged: exact,
            steps: 0,
            recon_loss_final: 0.0,
            flatness_final: 0.0,
            bound_3n2: 48.0,
            cell_accuracy: 0.0,
            unobserved_accuracy: 0.0,
            exact,
            method: Method::Tensor,
            status: "ok".into(),
        };
        let rows: Vec<SweepRow> = (0..10)
            .flat_map(|s| [mk(4, s, s < 3), mk(8, s, s < 9), mk(12, s, true)])
            .collect();
        let aggs = aggregate(&rows);
        assert_eq!(aggs.len(), 3);
        assert_eq!(aggs[0].rate, 0.3);
        assert_eq!(thresholds(&aggs, 0.9)[0].3, Some(8));
        assert_eq!(thresholds(&aggs, 1.0)[0].3, Some(12));
    }

    #[test]
    fn scan_stops_at_first_recovering_m() {
        let cfg = TrainConfig { steps_max: 4_000, ..TrainConfig::default() };
        let t = crate::algebra::cyclic_group(3).unwrap();
        let mut seen = 0;
        let (rows, m_star) =
            scan_threshold("cyclic-3", &t, &MGrid::Absolute(vec![0, 9, 1]), 2, &Method::Tensor, &cfg, 0.9, &[], |r| {
                seen += r.len();
                Ok(())
            })
            .unwrap();
        assert_eq!(m_star, Some(9));
        assert_eq!(rows.len(), 6);
        assert_eq!(seen, 6);
        assert!(rows[..4].iter().all(|r| r.m <= 1 && !r.exact));
        // resuming from the finished rows trains nothing
        let (again, m2) =
            scan_threshold("cyclic-3", &t, &MGrid::Absolute(vec![0, 1, 9]), 2, &Method::Tensor, &cfg, 0.9, &rows, |r| {
                assert!(r.is_empty());
                Ok(())
            })
            .unwrap();
        assert_eq!((again, m2), (rows, Some(9)));
    }
}
