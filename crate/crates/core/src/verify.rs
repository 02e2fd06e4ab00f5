//! Self-verification suite: analytic code against independent oracles at
//! small sizes. Each check reports a measured error next to its tolerance.

use crate::algebra::{
    apply_isotopy, cyclic_group, dihedral_group, exhaustive_isotopy_check, groups_up_to_order_five,
    is_isotopic_to_group, klein_four, random_latin_square, CayleyTable, Isotopy,
};
use crate::baseline::{balanced_factors, encode_table, nuclear_norm, Encoding};
use crate::engine::{decode, json_num, train, TrainConfig};
use crate::error::Result;
use crate::model::{
    apply_gauge, flatness, forward_fiber, grad, init_params, random_orthogonal, recon_loss, regular_representation,
    FactorParams, GradParams, ObservationSet,
};
use crate::numerics::{fd_gradient, fd_hessian_trace, frob2, gemm, matrix_rank, Mat, Rng};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    /// Worst error seen; for count checks, the number of disagreements.
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, measured: f64, tolerance: f64, detail: String) -> Check {
        Check { name: name.into(), measured, tolerance, passed: measured <= tolerance, detail }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        let checks: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                format!(
                    "{{\"name\":{},\"passed\":{},\"measured\":{},\"tolerance\":{},\"detail\":{}}}",
                    serde_json::to_string(&c.name).expect("string serializes"),
                    c.passed,
                    json_num(c.measured),
                    json_num(c.tolerance),
                    serde_json::to_string(&c.detail).expect("string serializes")
                )
            })
            .collect();
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        format!(
            "{{\"passed\":{},\"total\":{},\"failed\":{},\"checks\":[{}]}}\n",
            self.passed(),
            self.checks.len(),
            failed,
            checks.join(",")
        )
    }
}

fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1e-12)
}

/// Each cell observed independently with probability 0.6, never empty.
pub fn random_omega(n: usize, rng: &mut Rng) -> ObservationSet {
    loop {
        let cells: Vec<(usize, usize)> =
            (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).filter(|_| rng.uniform() < 0.6).collect();
        if !cells.is_empty() {
            return ObservationSet::new(n, cells).expect("cells in range");
        }
    }
}

/// Worst scaled deviation `max_i |g_i - fd_i| / max(|fd|_∞, 1e-8)` of `grad_fn`
/// from central differences of `L + λH`, over `instances` random problems.
pub fn gradient_fd_error<G>(n: usize, instances: usize, seed: u64, grad_fn: G) -> Result<f64>
where
    G: Fn(&FactorParams, &CayleyTable, &ObservationSet, f64) -> Result<GradParams>,
{
    let mut rng = Rng::new(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let lambda = [0.0, 0.1, 1.0][i % 3];
        let p = init_params(n, 1.0, &mut rng)?;
        let t = random_latin_square(n, rng.next_u64())?;
        let omega = random_omega(n, &mut rng);
        let objective = |theta: &[f64]| {
            let q = FactorParams::from_vec(n, theta).expect("length matches");
            recon_loss(&q, &t, &omega).expect("shapes agree") + lambda * flatness(&q, &omega).expect("shapes agree")
        };
        let fd = fd_gradient(objective, &p.to_vec(), crate::numerics::DEFAULT_GRAD_STEP);
        let g = grad_fn(&p, &t, &omega, lambda)?.to_vec();
        let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-8);
        let err = g.iter().zip(&fd).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale;
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Worst relative deviation of the closed-form flatness from the
/// finite-difference Hessian trace of the reconstruction loss.
pub fn hessian_fd_error(n: usize, instances: usize, seed: u64) -> Result<f64> {
    let mut rng = Rng::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let p = init_params(n, 1.0, &mut rng)?;
        let t = random_latin_square(n, rng.next_u64())?;
        let omega = random_omega(n, &mut rng);
        let loss = |theta: &[f64]| {
            recon_loss(&FactorParams::from_vec(n, theta).expect("length matches"), &t, &omega).expect("shapes agree")
        };
        let fd = fd_hessian_trace(loss, &p.to_vec(), crate::numerics::DEFAULT_HESSIAN_STEP);
        worst = worst.max(rel_err(flatness(&p, &omega)?, fd));
    }
    Ok(worst)
}

/// Named groups used by the regular-representation checks.
pub fn named_groups(max_n: usize) -> Vec<(String, CayleyTable)> {
    let mut v: Vec<(String, CayleyTable)> =
        (2..=max_n).map(|n| (format!("Z{n}"), cyclic_group(n).expect("n >= 1"))).collect();
    if max_n >= 4 {
        v.push(("Z2xZ2".into(), klein_four()));
    }
    if max_n >= 6 {
        v.push(("D3".into(), dihedral_group(3).expect("m >= 3")));
    }
    if max_n >= 8 {
        v.push(("D4".into(), dihedral_group(4).expect("m >= 3")));
    }
    v
}

/// `(max recon loss, max relative flatness error vs 3n²)` of the regular
/// representation under full observation.
pub fn regular_representation_errors(groups: &[(String, CayleyTable)]) -> Result<(f64, f64)> {
    let mut loss = 0.0f64;
    let mut h = 0.0f64;
    for (_, t) in groups {
        let n = t.n();
        let p = regular_representation(t)?;
        let full = ObservationSet::full(n);
        loss = loss.max(recon_loss(&p, t, &full)?);
        h = h.max(rel_err(flatness(&p, &full)?, 3.0 * (n * n) as f64));
    }
    Ok((loss, h))
}

/// `(max forward deviation, max relative flatness deviation)` under random
/// orthogonal gauges of the regular representation of `t`.
pub fn gauge_errors(t: &CayleyTable, gauges: usize, seed: u64) -> Result<(f64, f64)> {
    let n = t.n();
    let p = regular_representation(t)?;
    let full = ObservationSet::full(n);
    let h0 = flatness(&p, &full)?;
    let mut rng = Rng::new(seed);
    let (mut fwd, mut h) = (0.0f64, 0.0f64);
    for _ in 0..gauges {
        let u = random_orthogonal(n, &mut rng);
        let v = random_orthogonal(n, &mut rng);
        let w = random_orthogonal(n, &mut rng);
        let q = apply_gauge(&p, &u, &v, &w)?;
        for a in 0..n {
            for b in 0..n {
                let d = forward_fiber(&q, a, b).iter().zip(forward_fiber(&p, a, b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                fwd = fwd.max(d);
            }
        }
        h = h.max(rel_err(flatness(&q, &full)?, h0));
    }
    Ok((fwd, h))
}

/// Smallest relative flatness increase `(H(c) - H(1)) / H(1)` of the scaling
/// gauge `(cA, B, C/c)` over `cs`; positive means strictly increasing.
pub fn scaling_gauge_min_increase(t: &CayleyTable, cs: &[f64]) -> Result<f64> {
    let p = regular_representation(t)?;
    let full = ObservationSet::full(t.n());
    let h1 = flatness(&p, &full)?;
    cs.iter().try_fold(f64::INFINITY, |m, &c| Ok(m.min((flatness(&p.scaled(c, 1.0, 1.0 / c), &full)? - h1) / h1)))
}

/// Exact rank of an integer matrix by fraction-free (Bareiss) elimination in
/// 128-bit integers. Intermediate values are minors of the input, so the
/// entries must be small enough for their Hadamard bound to fit.
pub fn integer_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let nrows = m.len();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..ncols {
        let Some(piv) = (rank..nrows).find(|&r| m[r][col] != 0) else { continue };
        m.swap(rank, piv);
        for r in rank + 1..nrows {
            for c in col + 1..ncols {
                m[r][c] = (m[r][c] * m[rank][col] - m[r][col] * m[rank][c]) / prev;
            }
            m[r][col] = 0;
        }
        prev = m[rank][col];
        rank += 1;
        if rank == nrows {
            break;
        }
    }
    rank
}

pub fn ordinal_rows(t: &CayleyTable) -> Vec<Vec<i64>> {
    t.rows().into_iter().map(|r| r.iter().map(|&x| x as i64).collect()).collect()
}

/// Number of `n` in `ns` where the SVD rank of the ordinal encoding of `Z_n`
/// differs from `n` or from the exact integer rank.
pub fn ordinal_rank_mismatches(ns: impl IntoIterator<Item = usize>) -> Result<(usize, String)> {
    let mut bad = 0;
    let mut detail = Vec::new();
    for n in ns {
        let t = cyclic_group(n)?;
        let svd_rank = matrix_rank(&encode_table(&t, Encoding::Ordinal));
        let exact = integer_rank(&ordinal_rows(&t));
        if svd_rank != n || exact != n {
            bad += 1;
            detail.push(format!("n={n}: svd {svd_rank}, exact {exact}"));
        }
    }
    Ok((bad, detail.join("; ")))
}

fn random_mat(rows: usize, cols: usize, rng: &mut Rng) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).expect("sizes agree")
}

/// `(min slack of |U|² + |V|² - 2|UVᵀ|_*, max |slack| of balanced factors)`
/// over `pairs` random factor pairs of random shapes.
pub fn nuclear_norm_slacks(pairs: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = Rng::new(seed);
    let (mut min_slack, mut max_balanced) = (f64::INFINITY, 0.0f64);
    for _ in 0..pairs {
        let (rows, cols, r) = (1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(6));
        let u = random_mat(rows, r, &mut rng);
        let v = random_mat(cols, r, &mut rng);
        let x = gemm(&u, &v.transpose())?;
        let nuc = nuclear_norm(&x);
        min_slack = min_slack.min(frob2(&u) + frob2(&v) - 2.0 * nuc);
        let (bu, bv) = balanced_factors(&x);
        max_balanced = max_balanced.max((frob2(&bu) + frob2(&bv) - 2.0 * nuc).abs());
    }
    Ok((min_slack, max_balanced))
}

/// `(disagreements, squares tested)` between the principal-loop isotopy
/// oracle and the exhaustive search against every group of order `n`.
pub fn isotopy_disagreements(n: usize, squares: usize, seed: u64) -> Result<(usize, usize)> {
    let mut rng = Rng::new(seed);
    let mut tables: Vec<CayleyTable> = (0..squares).map(|_| random_latin_square(n, rng.next_u64())).collect::<Result<_>>()?;
    for g in groups_up_to_order_five(n) {
        tables.push(apply_isotopy(&g, &Isotopy::random(n, &mut rng))?);
        tables.push(g);
    }
    let groups = groups_up_to_order_five(n);
    let mut bad = 0;
    for t in &tables {
        let fast = is_isotopic_to_group(t)?;
        let mut slow = false;
        for g in &groups {
            if exhaustive_isotopy_check(t, g)? {
                slow = true;
                break;
            }
        }
        bad += usize::from(fast != slow);
    }
    Ok((bad, tables.len()))
}

/// Runs every check. The suite stays at `n <= 5` except for the rank check,
/// and finishes in seconds on an optimized build.
pub fn run_verification(seed: u64) -> Result<VerifyReport> {
    let mut checks = Vec::new();

    for n in 2..=4 {
        let err = gradient_fd_error(n, 20, seed + n as u64, grad)?;
        checks.push(Check::at_most(&format!("grad_fd_n{n}"), err, 1e-5, "20 random (theta, omega, lambda)".into()));
    }
    for n in 2..=4 {
        let err = hessian_fd_error(n, 20, seed + 10 + n as u64)?;
        checks.push(Check::at_most(&format!("hessian_trace_fd_n{n}"), err, 1e-4, "20 random (theta, omega)".into()));
    }

    let groups = named_groups(5);
    let names = groups.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>().join(",");
    let (loss, h) = regular_representation_errors(&groups)?;
    checks.push(Check::at_most("regular_rep_loss", loss, 1e-12, names.clone()));
    checks.push(Check::at_most("regular_rep_flatness_3n2", h, 1e-9, names));

    let z4 = cyclic_group(4)?;
    let (fwd, hg) = gauge_errors(&z4, 20, seed + 20)?;
    checks.push(Check::at_most("gauge_forward_invariance", fwd, 1e-12, "Z4, 20 orthogonal gauges".into()));
    checks.push(Check::at_most("gauge_flatness_invariance", hg, 1e-9, "Z4, 20 orthogonal gauges".into()));
    let inc = scaling_gauge_min_increase(&z4, &[0.5, 2.0])?;
    checks.push(Check {
        name: "scaling_gauge_increases_flatness".into(),
        measured: inc,
        tolerance: 0.0,
        passed: inc > 0.0,
        detail: "min relative increase over c in {0.5, 2}; must be > 0".into(),
    });

    let (bad5, total5) = isotopy_disagreements(5, 50, seed + 30)?;
    checks.push(Check::at_most(
        "isotopy_oracle_agreement_n5",
        bad5 as f64,
        0.0,
        format!("{total5} squares incl. all groups of order 5 and isotopes"),
    ));
    let mut small_bad = 0;
    for n in 1..=4 {
        small_bad += isotopy_disagreements(n, 10, seed + 40 + n as u64)?.0;
    }
    checks.push(Check::at_most("isotopy_oracle_agreement_n1_4", small_bad as f64, 0.0, "10 random squares per n plus groups".into()));
    let mut rng = Rng::new(seed + 50);
    let mut non_group4 = 0;
    for _ in 0..50 {
        non_group4 += usize::from(!is_isotopic_to_group(&random_latin_square(4, rng.next_u64())?)?);
    }
    checks.push(Check::at_most("order4_squares_isotopic_to_group", non_group4 as f64, 0.0, "50 random order-4 squares".into()));

    let (bad_rank, detail) = ordinal_rank_mismatches(3..=16)?;
    checks.push(Check::at_most("ordinal_rank_full_3_16", bad_rank as f64, 0.0, detail));

    let (min_slack, balanced) = nuclear_norm_slacks(100, seed + 60)?;
    checks.push(Check::at_most("nuclear_norm_inequality", -min_slack, 1e-8, "100 random pairs; measured is -min slack".into()));
    checks.push(Check::at_most("nuclear_norm_balanced_equality", balanced, 1e-8, "balanced SVD factors".into()));

    let p = init_params(4, 1.0, &mut Rng::new(seed + 70))?;
    let back = FactorParams::from_checkpoint_json(&p.to_checkpoint_json())?;
    let bits_differ = p.to_vec().iter().zip(back.to_vec()).filter(|(x, y)| x.to_bits() != y.to_bits()).count();
    checks.push(Check::at_most("checkpoint_round_trip", bits_differ as f64, 0.0, "hex-float checkpoint, differing bits".into()));

    let t = random_latin_square(5, seed + 80)?;
    let json_ok = CayleyTable::from_json(&t.to_json())? == t;
    let text_ok = CayleyTable::from_text(&t.to_text())? == t;
    checks.push(Check::at_most(
        "table_format_round_trip",
        f64::from(u8::from(!json_ok) + u8::from(!text_ok)),
        0.0,
        "json and text".into(),
    ));

    let z3 = cyclic_group(3)?;
    let res = train(&z3, &ObservationSet::full(3), &TrainConfig::default(), seed)?;
    let exact = decode(&res.params).table == z3;
    let gap = rel_err(res.flatness_final, 27.0);
    checks.push(Check {
        name: "train_discovers_z3".into(),
        measured: gap,
        tolerance: 0.05,
        passed: exact && res.converged && gap <= 0.05,
        detail: format!("converged={} exact={} flatness={}", res.converged, exact, json_num(res.flatness_final)),
    });

    Ok(VerifyReport { checks })
}
