use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplication table of a binary operation on `{0..n-1}`;
/// `get(a, b)` is `a∘b`.
///
/// The structure tensor is implied: `δ_abc = 1` iff `get(a, b) == c`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CayleyTable {
    n: usize,
    cells: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    n: usize,
    cells: Vec<Vec<usize>>,
}

impl CayleyTable {
    pub fn new(n: usize, cells: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("table order must be at least 1".into()));
        }
        if cells.len() != n * n {
            return Err(Error::Shape(format!("expected {} cells, got {}", n * n, cells.len())));
        }
        if let Some(&bad) = cells.iter().find(|&&c| c >= n) {
            return Err(Error::InvalidInput(format!("entry {bad} out of range for n = {n}")));
        }
        Ok(CayleyTable { n, cells })
    }

    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("table rows must all have length n".into()));
        }
        CayleyTable::new(n, rows.concat())
    }

    /// Builds `a∘b = op(a, b)` for all pairs.
    pub fn from_fn(n: usize, op: impl Fn(usize, usize) -> usize) -> Result<Self> {
        let cells = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| op(a, b)).collect();
        CayleyTable::new(n, cells)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> usize {
        self.cells[a * self.n + b]
    }

    /// `δ_abc`.
    #[inline]
    pub fn delta(&self, a: usize, b: usize, c: usize) -> f64 {
        if self.get(a, b) == c {
            1.0
        } else {
            0.0
        }
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn row(&self, a: usize) -> &[usize] {
        &self.cells[a * self.n..(a + 1) * self.n]
    }

    pub fn column(&self, b: usize) -> Vec<usize> {
        (0..self.n).map(|a| self.get(a, b)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        (0..self.n).map(|a| self.row(a).to_vec()).collect()
    }

    /// Two-sided identity, if one exists.
    pub fn identity_element(&self) -> Option<usize> {
        (0..self.n).find(|&e| (0..self.n).all(|x| self.get(e, x) == x && self.get(x, e) == x))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TableJson { n: self.n, cells: self.rows() }).expect("table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: TableJson = serde_json::from_str(s)?;
        if raw.cells.len() != raw.n {
            return Err(Error::Shape(format!("n = {} but {} rows", raw.n, raw.cells.len())));
        }
        CayleyTable::from_rows(&raw.cells)
    }

    /// Plain-text form: `n` on the first line, then `n` rows of
    /// space-separated entries, each line newline-terminated.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(s: &str) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for CayleyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.n)?;
        for a in 0..self.n {
            let row: Vec<String> = self.row(a).iter().map(usize::to_string).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for CayleyTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty table text".into()))?;
        let n: usize = header.trim().parse().map_err(|_| Error::Parse(format!("bad order line {header:?}")))?;
        let rows = lines
            .map(|l| {
                l.split_whitespace()
                    .map(|tok| tok.parse::<usize>().map_err(|_| Error::Parse(format!("bad entry {tok:?}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.len() != n {
            return Err(Error::Parse(format!("expected {n} rows, found {}", rows.len())));
        }
        CayleyTable::from_rows(&rows)
    }
}

fn is_permutation(xs: impl Iterator<Item = usize>, n: usize, seen: &mut [bool]) -> bool {
    seen.iter_mut().for_each(|s| *s = false);
    for x in xs {
        if x >= n || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

/// Every row and every column is a permutation of `{0..n-1}`.
pub fn is_latin(t: &CayleyTable) -> bool {
    let n = t.n;
    let mut seen = vec![false; n];
    (0..n).all(|a| is_permutation(t.row(a).iter().copied(), n, &mut seen))
        && (0..n).all(|b| is_permutation((0..n).map(|a| t.get(a, b)), n, &mut seen))
}

/// Direct `O(n³)` check of `(a∘b)∘c = a∘(b∘c)`.
pub fn is_associative(t: &CayleyTable) -> bool {
    let n = t.n;
    (0..n).all(|a| (0..n).all(|b| (0..n).all(|c| t.get(t.get(a, b), c) == t.get(a, t.get(b, c)))))
}

pub fn is_commutative(t: &CayleyTable) -> bool {
    (0..t.n).all(|a| (0..a).all(|b| t.get(a, b) == t.get(b, a)))
}

/// `a∘b = (a + b) mod n`.
pub fn cyclic_group(n: usize) -> Result<CayleyTable> {
    if n == 0 {
        return Err(Error::InvalidSize("cyclic group order must be at least 1".into()));
    }
    CayleyTable::from_fn(n, |a, b| (a + b) % n)
}

/// Pairs are indexed row-major: `(a1, a2) ↦ a1·n2 + a2`.
pub fn direct_product(t1: &CayleyTable, t2: &CayleyTable) -> Result<CayleyTable> {
    if !is_latin(t1) || !is_latin(t2) {
        return Err(Error::InvalidInput("direct product factors must be Latin".into()));
    }
    let n2 = t2.n;
    CayleyTable::from_fn(t1.n * n2, |a, b| {
        let (a1, a2) = (a / n2, a % n2);
        let (b1, b2) = (b / n2, b % n2);
        t1.get(a1, b1) * n2 + t2.get(a2, b2)
    })
}

/// Dihedral group of order `2m`. Index `s·m + k` encodes `r^k f^s` with `r`
/// a rotation and `f` a reflection, so `(r^k1 f^s1)(r^k2 f^s2) = r^(k1 ± k2) f^(s1+s2)`
/// with the sign negative when `s1 = 1`. Index 0 is the identity.
pub fn dihedral_group(m: usize) -> Result<CayleyTable> {
    if m < 3 {
        return Err(Error::InvalidSize(format!("dihedral group needs m >= 3, got {m}")));
    }
    CayleyTable::from_fn(2 * m, |a, b| {
        let (s1, k1) = (a / m, a % m);
        let (s2, k2) = (b / m, b % m);
        let k = if s1 == 0 { (k1 + k2) % m } else { (k1 + m - k2) % m };
        ((s1 + s2) % 2) * m + k
    })
}

/// Klein four-group `Z2 × Z2`.
pub fn klein_four() -> CayleyTable {
    let z2 = cyclic_group(2).expect("n = 2 is valid");
    direct_product(&z2, &z2).expect("Z2 is Latin")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_small_cases() {
        assert_eq!(cyclic_group(1).unwrap().rows(), vec![vec![0]]);
        assert_eq!(cyclic_group(2).unwrap().rows(), vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(cyclic_group(3).unwrap().row(1), &[1, 2, 0]);
        assert!(matches!(cyclic_group(0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn group_constructors_are_latin_and_associative() {
        let mut tables: Vec<CayleyTable> = (1..=9).map(|n| cyclic_group(n).unwrap()).collect();
        tables.extend((3..=6).map(|m| dihedral_group(m).unwrap()));
        tables.push(klein_four());
        tables.push(direct_product(&cyclic_group(2).unwrap(), &cyclic_group(3).unwrap()).unwrap());
        for t in &tables {
            assert!(is_latin(t), "{t}");
            assert!(is_associative(t), "{t}");
            assert!(t.identity_element().is_some());
        }
    }

    #[test]
    fn klein_elements_square_to_zero() {
        let k = klein_four();
        assert_eq!(k.n(), 4);
        assert!((0..4).all(|x| k.get(x, x) == 0));
    }

    #[test]
    fn trivial_factor_is_identity_of_product() {
        let t = dihedral_group(3).unwrap();
        assert_eq!(direct_product(&cyclic_group(1).unwrap(), &t).unwrap(), t);
    }

    #[test]
    fn dihedral_is_nonabelian_with_identity_row() {
        let d3 = dihedral_group(3).unwrap();
        assert_eq!(d3.n(), 6);
        assert!(!is_commutative(&d3));
        assert_eq!(d3.row(0), &[0, 1, 2, 3, 4, 5]);
        assert!(matches!(dihedral_group(2), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn latin_detection() {
        assert!(is_latin(&cyclic_group(4).unwrap()));
        assert!(!is_latin(&CayleyTable::from_rows(&[vec![0, 0], vec![1, 1]]).unwrap()));
        assert!(is_associative(&cyclic_group(1).unwrap()));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(CayleyTable::from_rows(&[vec![0, 2], vec![1, 0]]).is_err());
        assert!(CayleyTable::from_rows(&[vec![0, 1], vec![1]]).is_err());
        assert!(CayleyTable::new(0, vec![]).is_err());
    }

    #[test]
    fn json_and_text_formats() {
        let t = cyclic_group(3).unwrap();
        assert_eq!(t.to_json(), r#"{"n":3,"cells":[[0,1,2],[1,2,0],[2,0,1]]}"#);
        assert_eq!(t.to_text(), "3\n0 1 2\n1 2 0\n2 0 1\n");
        assert_eq!(CayleyTable::from_json(&t.to_json()).unwrap(), t);
        assert_eq!(CayleyTable::from_text(&t.to_text()).unwrap(), t);
        assert!(CayleyTable::from_json(r#"{"n":2,"cells":[[0,1]]}"#).is_err());
        assert!(CayleyTable::from_text("2\n0 1\n").is_err());
    }
}
