use super::isotopy::is_isotopic_to_group;
use super::table::CayleyTable;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Random Latin square by randomized backtracking, filled row by row. Each
/// cell tries the symbols still free in its row and column in a shuffled
/// order; dead ends backtrack to the previous cell. Deterministic in `seed`.
pub fn random_latin_square(n: usize, seed: u64) -> Result<CayleyTable> {
    if n == 0 {
        return Err(Error::InvalidSize("order must be at least 1".into()));
    }
    let mut rng = Rng::new(seed);
    let total = n * n;
    let mut cells = vec![usize::MAX; total];
    let mut row_used = vec![false; total];
    let mut col_used = vec![false; total];
    // per-cell candidate list and cursor into it
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new(); total];
    let mut cursor = vec![0usize; total];

    let mut pos = 0usize;
    let mut fresh = true;
    while pos < total {
        let (a, b) = (pos / n, pos % n);
        if fresh {
            let mut cand: Vec<usize> =
                (0..n).filter(|&s| !row_used[a * n + s] && !col_used[b * n + s]).collect();
            rng.shuffle(&mut cand);
            candidates[pos] = cand;
            cursor[pos] = 0;
        } else {
            let s = cells[pos];
            row_used[a * n + s] = false;
            col_used[b * n + s] = false;
            cells[pos] = usize::MAX;
        }
        if cursor[pos] < candidates[pos].len() {
            let s = candidates[pos][cursor[pos]];
            cursor[pos] += 1;
            cells[pos] = s;
            row_used[a * n + s] = true;
            col_used[b * n + s] = true;
            pos += 1;
            fresh = true;
        } else {
            // every Latin rectangle extends, so cell 0 never exhausts
            pos -= 1;
            fresh = false;
        }
    }
    CayleyTable::new(n, cells)
}

/// Rejection-samples random Latin squares until one is not isotopic to any
/// group. Orders below 5 have no such squares.
pub fn find_nonassociative_quasigroup(n: usize, seed: u64) -> Result<CayleyTable> {
    if n < 5 {
        return Err(Error::NoSuchSquare(format!(
            "every Latin square of order {n} is isotopic to a group"
        )));
    }
    let mut rng = Rng::new(seed);
    loop {
        let t = random_latin_square(n, rng.next_u64())?;
        if !is_isotopic_to_group(&t)? {
            return Ok(t);
        }
    }
}
