//! Acceptance suite. Prints one PASS/FAIL line per criterion, with the
//! measured values, and exits nonzero if a binding criterion fails.
//!
//! The sample-complexity criterion (9) is an empirical expectation: its
//! outcome is printed and its sweep CSV written, but it does not set the exit
//! code. Set `ACCEPTANCE_ONLY=1,4` to run a subset.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use cayley_core::algebra::{
    cyclic_group, exhaustive_isotopy_check, find_nonassociative_quasigroup, is_isotopic_to_group, random_latin_square,
};
use cayley_core::baseline::Encoding;
use cayley_core::engine::{
    decode, evaluate_decoded, multi_restart, read_csv, scan_threshold, sv_spread_max, train, train_result_json,
    write_csv, MGrid, Method, MultiRestart, SweepRow, TableSpec, TrainConfig, RECOVERY_THRESHOLD,
};
use cayley_core::model::ObservationSet;
use cayley_core::numerics::Rng;
use cayley_core::verify::{
    gauge_errors, gradient_fd_error, hessian_fd_error, isotopy_disagreements, named_groups, nuclear_norm_slacks,
    ordinal_rank_mismatches, regular_representation_errors, scaling_gauge_min_increase,
};
use cayley_core::Result;

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: String) -> Result<Outcome> {
    Ok(Outcome { passed, summary })
}

fn c1() -> Result<Outcome> {
    let mut worst_g = 0.0f64;
    let mut worst_h = 0.0f64;
    for n in 2..=4 {
        worst_g = worst_g.max(gradient_fd_error(n, 20, 1000 + n as u64, cayley_core::model::grad)?);
        worst_h = worst_h.max(hessian_fd_error(n, 20, 2000 + n as u64)?);
    }
    outcome(
        worst_g <= 1e-5 && worst_h <= 1e-4,
        format!("grad rel err {worst_g:.3e} (tol 1e-5), hessian-trace rel err {worst_h:.3e} (tol 1e-4), n=2..4 x 20"),
    )
}

fn c2() -> Result<Outcome> {
    let groups = named_groups(8);
    let (loss, h) = regular_representation_errors(&groups)?;
    let names: Vec<&str> = groups.iter().map(|(s, _)| s.as_str()).collect();
    outcome(
        loss <= 1e-12 && h <= 1e-9,
        format!("max loss {loss:.3e}, max |H/3n^2 - 1| {h:.3e} over {}", names.join(",")),
    )
}

fn c3() -> Result<Outcome> {
    let z4 = cyclic_group(4)?;
    let (fwd, h) = gauge_errors(&z4, 20, 3000)?;
    let inc = scaling_gauge_min_increase(&z4, &[0.5, 2.0])?;
    outcome(
        fwd <= 1e-12 && h <= 1e-9 && inc > 0.0,
        format!("forward dev {fwd:.3e}, H rel dev {h:.3e}, scaling gauge min rel increase {inc:.3e}"),
    )
}

fn z5_runs() -> Result<MultiRestart> {
    multi_restart(&cyclic_group(5)?, &ObservationSet::full(5), &TrainConfig::default(), 10, 0)
}

fn c4(z5: &MultiRestart) -> Result<Outcome> {
    let bound = 75.0;
    let good = z5.runs.iter().filter(|r| r.exact && r.flatness_final <= 1.05 * bound).count();
    let spread = sv_spread_max(&z5.best.params);
    let best_exact = decode(&z5.best.params).table == cyclic_group(5)?;
    let flat: Vec<String> = z5.runs.iter().map(|r| format!("{:.3}", r.flatness_final)).collect();
    outcome(
        good >= 8 && best_exact && z5.best.flatness_final <= 1.05 * bound && spread <= 0.05,
        format!(
            "exact with H<=78.75 in {good}/10; best H {:.6}, sv spread {spread:.3e}; H per seed [{}]",
            z5.best.flatness_final,
            flat.join(", ")
        ),
    )
}

fn c5(z5: &MultiRestart) -> Result<Outcome> {
    let t = find_nonassociative_quasigroup(5, 7)?;
    let oracle_ok = !is_isotopic_to_group(&t)? && !exhaustive_isotopy_check(&t, &cyclic_group(5)?)?;
    let runs = multi_restart(&t, &ObservationSet::full(5), &TrainConfig::default(), 10, 0)?;
    let conv: Vec<f64> = runs.runs.iter().filter(|r| r.converged).map(|r| r.flatness_final).collect();
    let z5_conv: Vec<f64> = z5.runs.iter().filter(|r| r.converged).map(|r| r.flatness_final).collect();
    let min_q = conv.iter().copied().fold(f64::INFINITY, f64::min);
    let max_z = z5_conv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        oracle_ok && !conv.is_empty() && !z5_conv.is_empty() && conv.iter().all(|&h| h > 75.0) && min_q > max_z,
        format!(
            "oracle non-isotopic {oracle_ok}; {} of 10 converged; min H {min_q:.6} vs Z5 max {max_z:.6}; gap {:.6}",
            conv.len(),
            min_q - max_z
        ),
    )
}

fn c6() -> Result<Outcome> {
    let (bad, total) = isotopy_disagreements(5, 50, 6000)?;
    let mut small = 0;
    for n in 1..=4 {
        small += isotopy_disagreements(n, 5, 6100 + n as u64)?.0;
    }
    let mut rng = Rng::new(6200);
    let mut non_group4 = 0;
    for _ in 0..50 {
        non_group4 += usize::from(!is_isotopic_to_group(&random_latin_square(4, rng.next_u64())?)?);
    }
    outcome(
        bad == 0 && small == 0 && non_group4 == 0,
        format!(
            "order-5 disagreements {bad}/{total}; order<=4 group disagreements {small}; order-4 squares not isotopic to a group {non_group4}/50"
        ),
    )
}

fn c7() -> Result<Outcome> {
    let (bad, detail) = ordinal_rank_mismatches(3..=16)?;
    outcome(bad == 0, format!("rank mismatches {bad} over n=3..16 (svd and exact integer elimination) {detail}"))
}

fn c8() -> Result<Outcome> {
    let (slack, balanced) = nuclear_norm_slacks(100, 8000)?;
    outcome(
        slack >= -1e-8 && balanced <= 1e-8,
        format!("min slack {slack:.3e} over 100 pairs, balanced |slack| {balanced:.3e}"),
    )
}

fn sweep_config() -> TrainConfig {
    TrainConfig { steps_max: 10_000, ..TrainConfig::default() }
}

fn c9(out_dir: &PathBuf) -> Result<Outcome> {
    let cfg = sweep_config();
    let seeds = 10;
    let grid = MGrid::NLogN((10..=40).map(|k| k as f64 / 10.0).collect());
    let csv_path = out_dir.join("sample_complexity.csv");
    let done = match fs::File::open(&csv_path) {
        Ok(f) => read_csv(f)?,
        Err(_) => Vec::new(),
    };
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut ratios = Vec::new();
    let mut text = String::new();
    for n in [6, 8, 10, 12] {
        let t0 = Instant::now();
        let (r, m_star) =
            scan_threshold(&TableSpec::Cyclic(n).id(), &cyclic_group(n)?, &grid, seeds, &Method::Tensor, &cfg, RECOVERY_THRESHOLD, &done, |_| Ok(()))?;
        rows.extend(r);
        write_csv(fs::File::create(&csv_path)?, &rows, true)?;
        let _ = write!(text, "n={n} m*={m_star:?} ({:.0}s); ", t0.elapsed().as_secs_f64());
        ratios.push(m_star.map(|m| m as f64 / (n * n) as f64));
    }
    let m12 = *ratios.last().expect("four sizes");
    let m_star12 = m12.map(|r| (r * 144.0).round() as usize);
    let decreasing = ratios.iter().all(Option::is_some)
        && ratios.windows(2).all(|w| w[1].expect("checked") < w[0].expect("checked"));

    let mut best_baseline = (0usize, String::from("none"));
    if let Some(m) = m_star12 {
        let table = cyclic_group(12)?;
        for encoding in [Encoding::Ordinal, Encoding::Onehot] {
            for r in [2, 6, 12] {
                for wd in [0.0, 1e-3] {
                    let method = Method::Mc { encoding, r, weight_decay: wd };
                    let jobs: Vec<_> = (0..seeds)
                        .map(|seed| cayley_core::engine::SweepJob {
                            table_id: "cyclic-12".into(),
                            table: table.clone(),
                            m,
                            seed,
                            method: method.clone(),
                        })
                        .collect();
                    let mc_rows = cayley_core::engine::run_jobs(&jobs, &cfg)?;
                    let exact = mc_rows.iter().filter(|r| r.exact).count();
                    if exact > best_baseline.0 || best_baseline.1 == "none" {
                        best_baseline = (exact, method.key());
                    }
                    rows.extend(mc_rows);
                }
            }
        }
        write_csv(fs::File::create(&csv_path)?, &rows, true)?;
    }
    let baseline_ok = best_baseline.0 as f64 <= 0.1 * seeds as f64;
    let m_ok = m_star12.is_some_and(|m| m as f64 <= 0.6 * 144.0);
    let ratio_text: Vec<String> =
        ratios.iter().map(|r| r.map_or("none".into(), |x| format!("{x:.4}"))).collect();
    outcome(
        m_ok && baseline_ok && decreasing,
        format!(
            "{text}m*/n^2 [{}]; Z12 m*={m_star12:?} (limit 86); best baseline {} exact {}/{seeds}; csv {}",
            ratio_text.join(", "),
            best_baseline.1,
            best_baseline.0,
            csv_path.display()
        ),
    )
}

fn c10(z5: &MultiRestart) -> Result<Outcome> {
    let t = cyclic_group(5)?;
    let full = ObservationSet::full(5);
    let cfg = TrainConfig::default();
    let doc = || -> Result<String> {
        let res = train(&t, &full, &cfg, 0)?;
        let rep = evaluate_decoded(&decode(&res.params), &t, &full, res.flatness_final)?;
        Ok(train_result_json("cyclic-5", 25, &cfg, &res, &rep))
    };
    let (a, b) = (doc()?, doc()?);
    let first = z5.runs.iter().find(|r| r.seed == 0).expect("seed 0 ran");
    let same_as_restart = a.contains(&format!("\"flatness_final\":{}", cayley_core::engine::fmt17(first.flatness_final)));
    outcome(
        a == b && same_as_restart,
        format!("{} bytes, identical {}, matches restart seed 0 {same_as_restart}", a.len(), a == b),
    )
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|v| v.contains(&k));
    let out_dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&out_dir).expect("create output dir");

    let needs_z5 = [4, 5, 10].iter().any(|&k| wanted(k));
    let z5 = if needs_z5 { Some(z5_runs().expect("Z5 restarts")) } else { None };
    let z5 = z5.as_ref();

    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Result<Outcome>>)> = vec![
        (1, "analytic gradient and flatness vs finite differences", Box::new(c1)),
        (2, "regular representation attains 3n^2 exactly", Box::new(c2)),
        (3, "orthogonal gauge invariance, scaling gauge raises H", Box::new(c3)),
        (4, "discovery of Z5 at full observation", Box::new(|| c4(z5.expect("z5")))),
        (5, "strict separation at an order-5 non-group square", Box::new(|| c5(z5.expect("z5")))),
        (6, "isotopy oracle agrees with exhaustive search", Box::new(c6)),
        (7, "ordinal encoding of Z_n has full rank", Box::new(c7)),
        (8, "nuclear-norm variational identity", Box::new(c8)),
        (9, "sample-efficiency separation on Z12 (empirical)", Box::new(|| c9(&out_dir))),
        (10, "determinism of the result JSON", Box::new(|| c10(z5.expect("z5")))),
    ];
    let mut binding_failures = 0;
    for (k, name, run) in &criteria {
        if !wanted(*k) {
            continue;
        }
        let t0 = Instant::now();
        let o = run().unwrap_or_else(|e| Outcome { passed: false, summary: format!("error: {e}") });
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {k:>2} {status} [{:.1}s] {name}: {}", t0.elapsed().as_secs_f64(), o.summary);
        if !o.passed && *k != 9 {
            binding_failures += 1;
        }
    }
    if binding_failures > 0 {
        println!("{binding_failures} binding criteria failed");
        std::process::exit(1);
    }
}
