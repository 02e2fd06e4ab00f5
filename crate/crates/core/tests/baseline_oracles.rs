//! Matrix-completion baseline against exact oracles and low-rank sanity runs.

use cayley_core::algebra::cyclic_group;
use cayley_core::baseline::{balanced_factors, encode_table, mc_train_matrix, nuclear_norm, Encoding};
use cayley_core::engine::{sample_mask, TrainConfig};
use cayley_core::numerics::{frob2, gemm, matrix_rank, Mat, Rng};
use cayley_core::verify::{integer_rank, nuclear_norm_slacks, ordinal_rows};

#[test]
fn ordinal_encoding_of_cyclic_groups_is_full_rank() {
    for n in 3..=16 {
        let t = cyclic_group(n).unwrap();
        assert_eq!(matrix_rank(&encode_table(&t, Encoding::Ordinal)), n, "svd rank, n={n}");
        assert_eq!(integer_rank(&ordinal_rows(&t)), n, "exact rank, n={n}");
    }
}

#[test]
fn svd_rank_agrees_with_exact_rank_on_rank_deficient_integer_matrices() {
    let mut rng = Rng::new(3);
    for _ in 0..30 {
        let (rows, cols, r) = (2 + rng.below(7), 2 + rng.below(7), 1 + rng.below(4));
        let u: Vec<Vec<i64>> = (0..rows).map(|_| (0..r).map(|_| rng.below(7) as i64 - 3).collect()).collect();
        let v: Vec<Vec<i64>> = (0..r).map(|_| (0..cols).map(|_| rng.below(7) as i64 - 3).collect()).collect();
        let x: Vec<Vec<i64>> =
            (0..rows).map(|i| (0..cols).map(|j| (0..r).map(|k| u[i][k] * v[k][j]).sum()).collect()).collect();
        let m = Mat::from_rows(&x.iter().map(|row| row.iter().map(|&e| e as f64).collect()).collect::<Vec<_>>()).unwrap();
        assert_eq!(matrix_rank(&m), integer_rank(&x));
    }
}

#[test]
fn nuclear_norm_variational_inequality_and_equality() {
    let (min_slack, balanced) = nuclear_norm_slacks(100, 11).unwrap();
    assert!(min_slack >= -1e-8, "{min_slack}");
    assert!(balanced <= 1e-8, "{balanced}");
    let x = Mat::from_rows(&[vec![3.0, 0.0], vec![0.0, -2.0]]).unwrap();
    assert!((nuclear_norm(&x) - 5.0).abs() < 1e-12);
    let (u, v) = balanced_factors(&x);
    assert!(gemm(&u, &v.transpose()).unwrap().max_abs_diff(&x) < 1e-12);
    assert!((frob2(&u) + frob2(&v) - 10.0).abs() < 1e-12);
}

fn low_rank_completion_successes(n: usize, r: usize, trials: u64) -> usize {
    let cfg = TrainConfig { steps_max: 20_000, loss_tol: 1e-12, ..TrainConfig::default() };
    let mut ok = 0;
    for seed in 0..trials {
        let mut rng = Rng::new(100 + seed);
        let u = Mat::from_vec(n, r, (0..n * r).map(|_| rng.normal()).collect()).unwrap();
        let v = Mat::from_vec(n, r, (0..n * r).map(|_| rng.normal()).collect()).unwrap();
        let target = gemm(&u, &v.transpose()).unwrap();
        let omega = sample_mask(n, n * n / 2, &mut rng).unwrap();
        let (fu, fv, _) = mc_train_matrix(&target, omega.cells(), r, 0.0, &cfg, seed).unwrap();
        let err = gemm(&fu, &fv.transpose()).unwrap().max_abs_diff(&target);
        ok += usize::from(err <= 1e-3);
    }
    ok
}

#[test]
fn rank_one_completion_at_half_observation() {
    let ok = low_rank_completion_successes(10, 1, 10);
    assert!(ok >= 9, "{ok}/10");
}

#[test]
fn rank_two_completion_at_half_observation() {
    let ok = low_rank_completion_successes(20, 2, 10);
    assert!(ok >= 9, "{ok}/10");
}
