use serde::{Deserialize, Serialize};

use super::table::{is_associative, is_latin, CayleyTable};
use crate::error::{Error, Result};

/// Row, column and symbol relabelings `(f, g, h)`. Applied to a table as
/// `result[a][b] = h(t[f(a)][g(b)])`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Isotopy {
    pub f: Vec<usize>,
    pub g: Vec<usize>,
    pub h: Vec<usize>,
}

fn check_bijection(p: &[usize], n: usize, name: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::InvalidIsotopy(format!("{name} has length {} but n = {n}", p.len())));
    }
    let mut seen = vec![false; n];
    for &x in p {
        if x >= n || seen[x] {
            return Err(Error::InvalidIsotopy(format!("{name} is not a bijection on 0..{n}")));
        }
        seen[x] = true;
    }
    Ok(())
}

pub(crate) fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

impl Isotopy {
    pub fn new(f: Vec<usize>, g: Vec<usize>, h: Vec<usize>) -> Result<Self> {
        let n = f.len();
        check_bijection(&f, n, "f")?;
        check_bijection(&g, n, "g")?;
        check_bijection(&h, n, "h")?;
        Ok(Isotopy { f, g, h })
    }

    pub fn identity(n: usize) -> Self {
        let id: Vec<usize> = (0..n).collect();
        Isotopy { f: id.clone(), g: id.clone(), h: id }
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    /// `(f⁻¹, g⁻¹, h⁻¹)`, which undoes `self` under the fixed convention.
    pub fn inverse(&self) -> Isotopy {
        Isotopy { f: invert(&self.f), g: invert(&self.g), h: invert(&self.h) }
    }

    pub fn random(n: usize, rng: &mut crate::numerics::Rng) -> Isotopy {
        Isotopy { f: rng.permutation(n), g: rng.permutation(n), h: rng.permutation(n) }
    }
}

/// `result[a][b] = h(t[f(a)][g(b)])`.
pub fn apply_isotopy(t: &CayleyTable, iso: &Isotopy) -> Result<CayleyTable> {
    let n = t.n();
    check_bijection(&iso.f, n, "f")?;
    check_bijection(&iso.g, n, "g")?;
    check_bijection(&iso.h, n, "h")?;
    Ok(apply_unchecked(t, iso))
}

fn apply_unchecked(t: &CayleyTable, iso: &Isotopy) -> CayleyTable {
    CayleyTable::from_fn(t.n(), |a, b| iso.h[t.get(iso.f[a], iso.g[b])]).expect("permuted table stays in range")
}

/// Loop isotope with identity `e = t[r][c]`:
/// `x ∘' y = R_c⁻¹(x) ∘ L_r⁻¹(y)` where `R_c(x) = x∘c` and `L_r(y) = r∘y`.
pub fn principal_loop_isotope(t: &CayleyTable, r: usize, c: usize) -> Result<CayleyTable> {
    let n = t.n();
    if !is_latin(t) {
        return Err(Error::InvalidInput("principal loop isotope requires a Latin square".into()));
    }
    if r >= n || c >= n {
        return Err(Error::Index(format!("({r}, {c}) out of range for n = {n}")));
    }
    let right: Vec<usize> = t.column(c);
    let left: Vec<usize> = t.row(r).to_vec();
    let iso = Isotopy { f: invert(&right), g: invert(&left), h: (0..n).collect() };
    Ok(apply_unchecked(t, &iso))
}

/// Decided on one principal loop isotope: a loop isotopic to a group is
/// itself a group, so associativity of that isotope settles the question.
pub fn is_isotopic_to_group(t: &CayleyTable) -> Result<bool> {
    Ok(is_associative(&principal_loop_isotope(t, 0, 0)?))
}

pub const EXHAUSTIVE_MAX_N: usize = 5;

/// Brute-force search for an isotopy carrying `t` onto `target`. Enumerates
/// every `(f, g)`; the symbol map `h` is then forced by row 0 and checked
/// against the remaining cells.
pub fn exhaustive_isotopy_check(t: &CayleyTable, target: &CayleyTable) -> Result<bool> {
    let n = t.n();
    if target.n() != n {
        return Err(Error::Shape(format!("orders differ: {} vs {}", n, target.n())));
    }
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::SizeLimit { n, max: EXHAUSTIVE_MAX_N });
    }
    if !is_latin(t) || !is_latin(target) {
        return Err(Error::InvalidInput("isotopy check requires Latin squares".into()));
    }
    let perms = all_permutations(n);
    let mut h = vec![0usize; n];
    for f in &perms {
        for g in &perms {
            for b in 0..n {
                h[t.get(f[0], g[b])] = target.get(0, b);
            }
            let ok = (1..n).all(|a| (0..n).all(|b| h[t.get(f[a], g[b])] == target.get(a, b)));
            if ok {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("successor exists");
        p.swap(i, j);
        p[i + 1..].reverse();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::table::{cyclic_group, dihedral_group, klein_four};
    use crate::numerics::Rng;

    #[test]
    fn identity_and_inverse() {
        let t = dihedral_group(3).unwrap();
        assert_eq!(apply_isotopy(&t, &Isotopy::identity(6)).unwrap(), t);
        let mut rng = Rng::new(9);
        for _ in 0..20 {
            let iso = Isotopy::random(6, &mut rng);
            let moved = apply_isotopy(&t, &iso).unwrap();
            assert!(is_latin(&moved));
            assert_eq!(apply_isotopy(&moved, &iso.inverse()).unwrap(), t);
        }
    }

    #[test]
    fn rejects_non_bijections() {
        let t = cyclic_group(3).unwrap();
        let bad = Isotopy { f: vec![0, 0, 1], g: vec![0, 1, 2], h: vec![0, 1, 2] };
        assert!(matches!(apply_isotopy(&t, &bad), Err(Error::InvalidIsotopy(_))));
        assert!(Isotopy::new(vec![0, 1], vec![1, 0], vec![0, 2]).is_err());
    }

    #[test]
    fn principal_isotope_has_identity() {
        let z4 = cyclic_group(4).unwrap();
        assert_eq!(principal_loop_isotope(&z4, 0, 0).unwrap(), z4);
        let d3 = dihedral_group(3).unwrap();
        for r in 0..6 {
            for c in 0..6 {
                let p = principal_loop_isotope(&d3, r, c).unwrap();
                assert!(is_latin(&p));
                assert_eq!(p.identity_element(), Some(d3.get(r, c)));
            }
        }
        let non_latin = CayleyTable::from_rows(&[vec![0, 0], vec![1, 1]]).unwrap();
        assert!(principal_loop_isotope(&non_latin, 0, 0).is_err());
        assert!(is_isotopic_to_group(&non_latin).is_err());
    }

    #[test]
    fn order_four_groups_are_not_isotopic() {
        let z3 = cyclic_group(3).unwrap();
        assert!(exhaustive_isotopy_check(&z3, &z3).unwrap());
        assert!(!exhaustive_isotopy_check(&cyclic_group(4).unwrap(), &klein_four()).unwrap());
        assert!(matches!(
            exhaustive_isotopy_check(&cyclic_group(6).unwrap(), &cyclic_group(6).unwrap()),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn permutation_enumeration() {
        assert_eq!(all_permutations(1).len(), 1);
        assert_eq!(all_permutations(4).len(), 24);
        assert_eq!(all_permutations(3)[1], vec![0, 2, 1]);
    }
}
