use super::params::FactorParams;
use crate::algebra::{is_associative, is_latin, CayleyTable};
use crate::error::{Error, Result};
use crate::numerics::{gemm, orthogonality_defect, Mat, Rng};

pub const GAUGE_TOL: f64 = 1e-10;

/// Left regular representation: `A_g = B_g = P_g`, `C_g = P_gᵀ`, where
/// `P_g` sends basis vector `x` to `g∘x`. Then `(1/n) Tr(P_a P_b P_cᵀ)` is
/// exactly `δ_abc`.
pub fn regular_representation(t: &CayleyTable) -> Result<FactorParams> {
    if !is_latin(t) {
        return Err(Error::NotAGroup("table is not Latin".into()));
    }
    if !is_associative(t) {
        return Err(Error::NotAGroup("operation is not associative".into()));
    }
    if t.identity_element().is_none() {
        return Err(Error::NotAGroup("no identity element".into()));
    }
    let n = t.n();
    let perms: Vec<Mat> = (0..n).map(|g| Mat::permutation(t.row(g))).collect();
    let transposed = perms.iter().map(Mat::transpose).collect();
    FactorParams::new(perms.clone(), perms, transposed)
}

/// I.i.d. `N(0, (scale/√n)²)` entries, filled A, B, C in flat order.
pub fn init_params(n: usize, scale: f64, rng: &mut Rng) -> Result<FactorParams> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidInput(format!("init scale must be positive, got {scale}")));
    }
    if n == 0 {
        return Err(Error::InvalidSize("n must be at least 1".into()));
    }
    let sd = scale / (n as f64).sqrt();
    let mut p = FactorParams::zeros(n);
    for x in p.values_mut() {
        *x = sd * rng.normal();
    }
    Ok(p)
}

/// `A_a → U A_a Vᵀ`, `B_b → V B_b Wᵀ`, `C_c → W C_c Uᵀ`.
pub fn apply_gauge(theta: &FactorParams, u: &Mat, v: &Mat, w: &Mat) -> Result<FactorParams> {
    let n = theta.n();
    for m in [u, v, w] {
        if m.rows() != n || m.cols() != n {
            return Err(Error::Shape(format!("gauge must be {n}x{n}")));
        }
        let defect = orthogonality_defect(m);
        if defect > GAUGE_TOL {
            return Err(Error::Gauge(defect));
        }
    }
    let sandwich = |left: &Mat, x: &Mat, right: &Mat| gemm(&gemm(left, x)?, &right.transpose());
    FactorParams::new(
        theta.a.iter().map(|x| sandwich(u, x, v)).collect::<Result<_>>()?,
        theta.b.iter().map(|x| sandwich(v, x, w)).collect::<Result<_>>()?,
        theta.c.iter().map(|x| sandwich(w, x, u)).collect::<Result<_>>()?,
    )
}

/// Haar-ish random orthogonal matrix: Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut Rng) -> Mat {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.normal()).collect()).collect();
        let mut ok = true;
        for j in 0..n {
            for k in 0..j {
                let d: f64 = (0..n).map(|i| cols[j][i] * cols[k][i]).sum();
                for i in 0..n {
                    cols[j][i] -= d * cols[k][i];
                }
            }
            let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|x| *x /= norm);
        }
        if ok {
            let mut m = Mat::zeros(n, n);
            for (j, col) in cols.iter().enumerate() {
                for (i, &x) in col.iter().enumerate() {
                    m[(i, j)] = x;
                }
            }
            return m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{cyclic_group, random_latin_square};

    #[test]
    fn z2_representation() {
        let p = regular_representation(&cyclic_group(2).unwrap()).unwrap();
        assert_eq!(p.a[0], Mat::identity(2));
        assert_eq!(p.a[1], Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
    }

    #[test]
    fn non_group_rejected() {
        let q = crate::algebra::find_nonassociative_quasigroup(5, 1).unwrap();
        assert!(matches!(regular_representation(&q), Err(Error::NotAGroup(_))));
        let sq = random_latin_square(3, 0).unwrap();
        // every order-3 Latin square is latin but need not have an identity
        if sq.identity_element().is_none() {
            assert!(regular_representation(&sq).is_err());
        }
    }

    #[test]
    fn init_is_seeded_and_scaled() {
        let a = init_params(8, 1.0, &mut Rng::new(4)).unwrap();
        let b = init_params(8, 1.0, &mut Rng::new(4)).unwrap();
        assert_eq!(a, b);
        let count = a.len() as f64;
        let mean: f64 = a.values().sum::<f64>() / count;
        let sd = (a.values().map(|x| (x - mean).powi(2)).sum::<f64>() / count).sqrt();
        let expected = 1.0 / 8f64.sqrt();
        assert!((sd - expected).abs() < 0.1 * expected, "{sd}");
        assert!(init_params(3, 0.0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn gauge_validation() {
        let p = regular_representation(&cyclic_group(3).unwrap()).unwrap();
        let id = Mat::identity(3);
        assert_eq!(apply_gauge(&p, &id, &id, &id).unwrap(), p);
        let skew = id.scale(2.0);
        assert!(matches!(apply_gauge(&p, &skew, &id, &id), Err(Error::Gauge(_))));
        let q = random_orthogonal(5, &mut Rng::new(2));
        assert!(orthogonality_defect(&q) < 1e-12);
    }
}
