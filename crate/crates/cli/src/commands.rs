use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use cayley_core::algebra::{is_associative, is_commutative, is_isotopic_to_group, is_latin, CayleyTable};
use cayley_core::baseline::{encode_table, Encoding};
use cayley_core::engine::{
    aggregate, decode, evaluate_decoded, fmt17, landscape_probe, read_csv, run_jobs, sample_mask, scan_threshold,
    thresholds, train, train_result_json, write_csv, MGrid, Method, RowKey, SweepJob, SweepRow, TrainConfig,
};
use cayley_core::numerics::{matrix_rank, Rng};
use cayley_core::verify::{integer_rank, run_verification};
use cayley_core::engine::mask_seed;

use crate::config::RunConfig;
use crate::tables::{parse_sources, positional_to_value, TableSource};
use crate::{Cli, CliError, Command, Common, TableArgs};

type Res<T> = Result<T, CliError>;

/// Adds `"key":value` as the last field of a JSON object document.
fn with_field(doc: &str, key: &str, value: &str) -> String {
    let body = doc.trim_end();
    let body = body.strip_suffix('}').expect("document is a JSON object");
    format!("{body},\"{key}\":{value}}}\n")
}

fn emit(out: Option<&Path>, text: &str) -> Res<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Run(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Defaults, then the config file, then `--set`, then explicit flags.
fn resolve(
    common: &Common,
    command: &'static str,
    keys: &[(&'static str, Option<&str>)],
    with_train: bool,
    table: Option<&TableArgs>,
) -> Res<RunConfig> {
    let mut c = RunConfig::new(command, keys, with_train);
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        c.merge_text(&text)?;
    }
    for item in &common.set {
        let (k, v) = item.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
        c.set(k.trim(), v.trim())?;
    }
    if common.seed.is_some() {
        c.set_opt("seed", common.seed)?;
    }
    if common.seeds.is_some() {
        c.set_opt("seeds", common.seeds)?;
    }
    if let Some(t) = table {
        c.set_opt("table_seed", t.table_seed)?;
        if let Some(family) = &t.family {
            let seed = match c.parse_opt::<u64>("table_seed")? {
                Some(s) => s,
                None => c.parse_opt::<u64>("seed")?.unwrap_or(0),
            };
            c.set("table", &positional_to_value(family, t.params.as_deref(), seed)?)?;
        }
    }
    Ok(c)
}

pub fn run(cli: Cli) -> Res<()> {
    if let Some(j) = cli.common.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Run(format!("thread pool: {e}")))?;
    }
    let common = &cli.common;
    let out = common.out.as_deref();
    match &cli.command {
        Command::Gen { table, format } => {
            let mut c = resolve(common, "gen", &[("table", None), ("table_seed", None), ("seed", None), ("format", Some("json"))], false, Some(table))?;
            c.set_opt("format", format.as_deref())?;
            gen(&c, out)
        }
        Command::Train { table, m, fraction, checkpoint } => {
            let keys = [("table", None), ("table_seed", None), ("seed", Some("0")), ("m", None), ("fraction", None)];
            let mut c = resolve(common, "train", &keys, true, Some(table))?;
            c.set_opt("m", *m)?;
            c.set_opt("fraction", *fraction)?;
            cmd_train(&c, out, checkpoint.as_deref())
        }
        Command::Sweep { table, grid, methods, stop_at_threshold } => {
            let keys = [
                ("table", None),
                ("table_seed", None),
                ("seed", None),
                ("seeds", Some("10")),
                ("grid", Some("nlogn:1,1.5,2,2.5,3")),
                ("methods", Some("tensor")),
                ("stop_at_threshold", Some("false")),
                ("threshold", Some("0.9")),
            ];
            let mut c = resolve(common, "sweep", &keys, true, Some(table))?;
            c.set_opt("grid", grid.as_deref())?;
            c.set_opt("methods", methods.as_deref())?;
            if *stop_at_threshold {
                c.set("stop_at_threshold", "true")?;
            }
            let methods: Vec<Method> = c.list("methods")?;
            let grid: MGrid = c.parse("grid")?;
            sweep(&c, out, grid, &|_| methods.clone())
        }
        Command::Landscape { table, k } => {
            let keys = [("table", None), ("table_seed", None), ("seed", Some("0")), ("k", Some("10"))];
            let mut c = resolve(common, "landscape", &keys, true, Some(table))?;
            c.set_opt("k", *k)?;
            landscape(&c, out)
        }
        Command::Baseline { table, m, encoding, r, weight_decay } => {
            let keys = [
                ("table", None),
                ("table_seed", None),
                ("seed", None),
                ("seeds", Some("10")),
                ("m", None),
                ("encoding", Some("both")),
                ("r", None),
                ("weight_decay", Some("0,0.001")),
                ("stop_at_threshold", Some("false")),
                ("threshold", Some("0.9")),
            ];
            let mut c = resolve(common, "baseline", &keys, true, Some(table))?;
            c.set_opt("m", m.as_deref())?;
            c.set_opt("encoding", encoding.as_deref())?;
            c.set_opt("r", r.as_deref())?;
            c.set_opt("weight_decay", weight_decay.as_deref())?;
            let grid = MGrid::Absolute(c.list("m")?);
            let encodings = parse_encodings(c.require("encoding")?)?;
            let ranks: Option<Vec<usize>> = c.get("r").map(|_| c.list("r")).transpose()?;
            let wds: Vec<f64> = c.list("weight_decay")?;
            if ranks.as_ref().is_some_and(|r| r.contains(&0)) || wds.iter().any(|w| !(*w >= 0.0)) {
                return Err(CliError::Usage("ranks must be >= 1 and weight decays >= 0".into()));
            }
            let methods = move |n: usize| -> Vec<Method> {
                let rs: BTreeSet<usize> = ranks.clone().unwrap_or_else(|| vec![2.min(n), n.div_ceil(2), n]).into_iter().collect();
                let mut v = Vec::new();
                for &encoding in &encodings {
                    for &r in &rs {
                        for &weight_decay in &wds {
                            v.push(Method::Mc { encoding, r, weight_decay });
                        }
                    }
                }
                v
            };
            sweep(&c, out, grid, &methods)
        }
        Command::Rank { table, encoding } => {
            let keys = [("table", None), ("table_seed", None), ("seed", None), ("encoding", Some("ordinal"))];
            let mut c = resolve(common, "rank", &keys, false, Some(table))?;
            c.set_opt("encoding", encoding.as_deref())?;
            rank(&c, out)
        }
        Command::Verify => {
            let c = resolve(common, "verify", &[("seed", Some("0"))], false, None)?;
            verify(&c, out)
        }
    }
}

fn parse_encodings(s: &str) -> Res<Vec<Encoding>> {
    if s == "both" {
        return Ok(vec![Encoding::Ordinal, Encoding::Onehot]);
    }
    s.split(',').map(|e| e.trim().parse().map_err(|e: cayley_core::Error| CliError::Usage(e.to_string()))).collect()
}

fn single_source(c: &RunConfig) -> Res<TableSource> {
    let mut v = parse_sources(c.require("table")?)?;
    if v.len() != 1 {
        return Err(CliError::Usage("this command takes exactly one table".into()));
    }
    Ok(v.remove(0))
}

fn gen(c: &RunConfig, out: Option<&Path>) -> Res<()> {
    let t = single_source(c)?.build()?;
    let text = match c.require("format")? {
        "json" => t.to_json(),
        "text" => t.to_text(),
        other => return Err(CliError::Usage(format!("unknown format {other:?}"))),
    };
    emit(out, &text)?;
    let latin = is_latin(&t);
    let iso = if latin { is_isotopic_to_group(&t)?.to_string() } else { "n/a".into() };
    eprintln!(
        "n={} latin={latin} associative={} commutative={} isotopic_to_group={iso}",
        t.n(),
        is_associative(&t),
        is_commutative(&t)
    );
    Ok(())
}

fn cmd_train(c: &RunConfig, out: Option<&Path>, checkpoint: Option<&Path>) -> Res<()> {
    let cfg = c.train_config()?;
    let src = single_source(c)?;
    let t = src.build()?;
    let n = t.n();
    let m = match (c.parse_opt::<usize>("m")?, c.parse_opt::<f64>("fraction")?) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give m or fraction, not both".into())),
        (Some(m), None) => m,
        (None, Some(f)) if (0.0..=1.0).contains(&f) => (f * (n * n) as f64).ceil() as usize,
        (None, Some(f)) => return Err(CliError::Usage(format!("fraction {f} outside [0, 1]"))),
        (None, None) => n * n,
    };
    let seed: u64 = c.parse("seed")?;
    let omega = sample_mask(n, m, &mut Rng::new(mask_seed(m, seed)))?;
    let res = train(&t, &omega, &cfg, seed)?;
    let rep = evaluate_decoded(&decode(&res.params), &t, &omega, res.flatness_final)?;
    let doc = with_field(&train_result_json(&src.id(), m, &cfg, &res, &rep), "resolved_config", &c.to_json());
    emit(out, &doc)?;
    if let Some(p) = checkpoint {
        fs::write(p, res.params.to_checkpoint_json()).map_err(|e| CliError::Run(format!("{}: {e}", p.display())))?;
    }
    eprintln!(
        "{} m={m} seed={seed}: converged={} steps={} loss={} flatness={} (3n^2={}) cell_accuracy={} exact={}",
        src.id(),
        res.converged,
        res.steps_used,
        fmt17(res.recon_loss_final),
        fmt17(res.flatness_final),
        3 * n * n,
        fmt17(rep.cell_accuracy),
        rep.exact
    );
    if rep.exact {
        Ok(())
    } else {
        Err(CliError::Run("decoded table is not exact".into()))
    }
}

fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

fn append_rows(path: &Path, rows: &[SweepRow]) -> Res<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let f = OpenOptions::new().create(true).append(true).open(path)?;
    write_csv(f, rows, fresh)?;
    Ok(())
}

fn canonical(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| (&a.table_id, a.method.key(), a.m, a.seed).cmp(&(&b.table_id, b.method.key(), b.m, b.seed)));
}

/// Runs every missing `(table, m, seed, method)` row, appending each batch to
/// the CSV as it finishes, then rewrites the file in canonical order and
/// writes the threshold summary and the resolved config next to it.
fn sweep(c: &RunConfig, out: Option<&Path>, grid: MGrid, methods: &dyn Fn(usize) -> Vec<Method>) -> Res<()> {
    let path = out.ok_or_else(|| CliError::Usage("sweep output needs --out PATH".into()))?;
    let cfg: TrainConfig = c.train_config()?;
    let sources = parse_sources(c.require("table")?)?;
    let seeds: u64 = c.parse("seeds")?;
    let stop: bool = c.parse("stop_at_threshold")?;
    let threshold: f64 = c.parse("threshold")?;
    if seeds == 0 || grid.is_empty() || !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Usage("need seeds >= 1, a non-empty grid and threshold in [0, 1]".into()));
    }
    let done: Vec<SweepRow> = match File::open(path) {
        Ok(f) if f.metadata()?.len() > 0 => {
            read_csv(f).map_err(|e| CliError::Usage(format!("cannot resume from {}: {e}", path.display())))?
        }
        _ => Vec::new(),
    };
    let done_keys: BTreeSet<RowKey> = done.iter().map(SweepRow::key).collect();
    let mut fresh_total = 0;
    for src in &sources {
        let table: CayleyTable = src.build()?;
        let id = src.id();
        for method in methods(table.n()) {
            if stop {
                let (rows, m_star) =
                    scan_threshold(&id, &table, &grid, seeds, &method, &cfg, threshold, &done, |fresh| {
                        fresh_total += fresh.len();
                        append_rows(path, fresh).map_err(|e| cayley_core::Error::Io(std::io::Error::other(e.to_string())))
                    })?;
                eprintln!("{id} {}: {} rows, m*={m_star:?}", method.key(), rows.len());
                continue;
            }
            for m in grid.resolve(table.n()) {
                let jobs: Vec<SweepJob> = (0..seeds)
                    .map(|seed| SweepJob { table_id: id.clone(), table: table.clone(), m, seed, method: method.clone() })
                    .filter(|j| !done_keys.contains(&j.key()))
                    .collect();
                let rows = run_jobs(&jobs, &cfg)?;
                fresh_total += rows.len();
                append_rows(path, &rows)?;
                if !rows.is_empty() {
                    let exact = rows.iter().filter(|r| r.exact).count();
                    eprintln!("{id} {} m={m}: {exact}/{} exact", method.key(), rows.len());
                }
            }
        }
    }

    let mut all = match File::open(path) {
        Ok(f) => read_csv(f)?,
        Err(_) => Vec::new(),
    };
    let mut seen = BTreeSet::new();
    all.retain(|r| seen.insert(r.key()));
    canonical(&mut all);
    let tmp = path.with_extension("csv.tmp");
    write_csv(File::create(&tmp)?, &all, true)?;
    fs::rename(&tmp, path)?;

    let aggs = aggregate(&all);
    let ths = thresholds(&aggs, threshold);
    let m_star: Vec<String> = ths
        .iter()
        .map(|(t, method, n, m)| {
            format!(
                "{{\"table_id\":{},\"n\":{n},\"method\":{},\"m_star\":{},\"m_star_over_n2\":{}}}",
                serde_json::to_string(t).expect("string"),
                serde_json::to_string(method).expect("string"),
                m.map_or("null".into(), |m| m.to_string()),
                m.map_or("null".into(), |m| fmt17(m as f64 / (n * n) as f64))
            )
        })
        .collect();
    let agg_json: Vec<String> = aggs
        .iter()
        .map(|a| {
            format!(
                "{{\"table_id\":{},\"n\":{},\"method\":{},\"m\":{},\"runs\":{},\"exact\":{},\"rate\":{},\"stderr\":{}}}",
                serde_json::to_string(&a.table_id).expect("string"),
                a.n,
                serde_json::to_string(&a.method).expect("string"),
                a.m,
                a.runs,
                a.exact,
                fmt17(a.rate),
                fmt17(a.stderr)
            )
        })
        .collect();
    let summary = format!(
        "{{\"threshold\":{},\"rows\":{},\"m_star\":[{}],\"aggregates\":[{}],\"resolved_config\":{}}}\n",
        fmt17(threshold),
        all.len(),
        m_star.join(","),
        agg_json.join(","),
        c.to_json()
    );
    fs::write(summary_path(path), summary)?;
    let mut cfg_path = path.as_os_str().to_owned();
    cfg_path.push(".config");
    fs::write(PathBuf::from(cfg_path), c.to_text())?;
    for (t, method, n, m) in &ths {
        eprintln!("m* {t} {method} (n={n}): {}", m.map_or("not reached".into(), |m| m.to_string()));
    }
    eprintln!("{fresh_total} new rows, {} total in {}", all.len(), path.display());
    Ok(())
}

fn landscape(c: &RunConfig, out: Option<&Path>) -> Res<()> {
    let cfg = c.train_config()?;
    let k: usize = c.parse("k")?;
    let seed: u64 = c.parse("seed")?;
    let mut docs = String::new();
    let mut failed = Vec::new();
    for src in parse_sources(c.require("table")?)? {
        let t = src.build()?;
        match landscape_probe(&src.id(), &t, &cfg, k, seed) {
            Ok(s) => {
                eprintln!(
                    "{}: {}/{k} converged, best flatness {} vs bound {} (gap {}), sv spread {}",
                    s.table_id,
                    s.converged_count,
                    fmt17(s.best_flatness),
                    fmt17(s.bound),
                    fmt17(s.gap),
                    fmt17(s.sv_spread_max)
                );
                docs.push_str(&with_field(&s.to_json(), "resolved_config", &c.to_json()));
            }
            Err(e @ cayley_core::Error::ProbeFailed { .. }) => failed.push(format!("{}: {e}", src.id())),
            Err(e) => return Err(e.into()),
        }
    }
    emit(out, &docs)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Run(failed.join("; ")))
    }
}

fn rank(c: &RunConfig, out: Option<&Path>) -> Res<()> {
    let encodings = parse_encodings(c.require("encoding")?)?;
    let mut docs = String::new();
    for src in parse_sources(c.require("table")?)? {
        let t = src.build()?;
        for &enc in &encodings {
            let m = encode_table(&t, enc);
            let svd_rank = matrix_rank(&m);
            let rows: Vec<Vec<i64>> = m.to_rows().iter().map(|r| r.iter().map(|&x| x as i64).collect()).collect();
            let exact = integer_rank(&rows);
            eprintln!("{} {enc}: rank {svd_rank} (exact {exact}) of n={}", src.id(), t.n());
            docs.push_str(&format!(
                "{{\"table_id\":{},\"n\":{},\"encoding\":\"{enc}\",\"rank\":{svd_rank},\"exact_rank\":{exact},\"full_rank\":{},\"resolved_config\":{}}}\n",
                serde_json::to_string(&src.id()).expect("string"),
                t.n(),
                svd_rank == t.n() && exact == t.n(),
                c.to_json()
            ));
        }
    }
    emit(out, &docs)
}

fn verify(c: &RunConfig, out: Option<&Path>) -> Res<()> {
    let report = run_verification(c.parse("seed")?)?;
    for ch in &report.checks {
        eprintln!(
            "{} {:<34} measured {:<24} tol {}",
            if ch.passed { "PASS" } else { "FAIL" },
            ch.name,
            fmt17(ch.measured),
            fmt17(ch.tolerance)
        );
    }
    emit(out, &with_field(&report.to_json(), "resolved_config", &c.to_json()))?;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        let _ = std::io::stderr().flush();
        Ok(())
    } else {
        Err(CliError::Verify(failed.join(", ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_insertion() {
        assert_eq!(with_field("{\"a\":1}\n", "b", "{}"), "{\"a\":1,\"b\":{}}\n");
        let v: serde_json::Value = serde_json::from_str(&with_field("{\"a\":[1]}", "c", "\"x\"")).unwrap();
        assert_eq!(v["c"], "x");
    }

    #[test]
    fn summary_sits_next_to_csv() {
        assert_eq!(summary_path(Path::new("/tmp/s.csv")), PathBuf::from("/tmp/s.csv.summary.json"));
    }
}
