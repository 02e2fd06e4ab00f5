use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Mat;

/// Factor stacks `Θ = (A, B, C)`, each `n` real `n×n` slices.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorParams {
    n: usize,
    pub a: Vec<Mat>,
    pub b: Vec<Mat>,
    pub c: Vec<Mat>,
}

/// Gradient with respect to a [`FactorParams`], stored in the same layout.
pub type GradParams = FactorParams;

impl FactorParams {
    pub fn zeros(n: usize) -> Self {
        let stack = || vec![Mat::zeros(n, n); n];
        FactorParams { n, a: stack(), b: stack(), c: stack() }
    }

    pub fn new(a: Vec<Mat>, b: Vec<Mat>, c: Vec<Mat>) -> Result<Self> {
        let n = a.len();
        if n == 0 || b.len() != n || c.len() != n {
            return Err(Error::Shape("factor stacks must be non-empty and of equal length".into()));
        }
        for m in a.iter().chain(&b).chain(&c) {
            if m.rows() != n || m.cols() != n {
                return Err(Error::Shape(format!("slice is {}x{}, expected {n}x{n}", m.rows(), m.cols())));
            }
            if m.data().iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite parameter".into()));
            }
        }
        Ok(FactorParams { n, a, b, c })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of scalar parameters, `3n³`.
    pub fn len(&self) -> usize {
        3 * self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn slices(&self) -> impl Iterator<Item = &Mat> {
        self.a.iter().chain(&self.b).chain(&self.c)
    }

    fn slices_mut(&mut self) -> impl Iterator<Item = &mut Mat> {
        self.a.iter_mut().chain(self.b.iter_mut()).chain(self.c.iter_mut())
    }

    /// Flat view: all `A` slices, then `B`, then `C`, each row-major.
    pub fn to_vec(&self) -> Vec<f64> {
        self.slices().flat_map(|m| m.data().iter().copied()).collect()
    }

    pub fn from_vec(n: usize, theta: &[f64]) -> Result<Self> {
        if theta.len() != 3 * n * n * n {
            return Err(Error::Shape(format!("expected {} parameters, got {}", 3 * n * n * n, theta.len())));
        }
        let mut p = FactorParams::zeros(n);
        p.assign(theta);
        Ok(p)
    }

    pub(crate) fn assign(&mut self, theta: &[f64]) {
        let k = self.n * self.n;
        for (m, chunk) in self.slices_mut().zip(theta.chunks(k)) {
            m.data_mut().copy_from_slice(chunk);
        }
    }

    pub(crate) fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.slices_mut().flat_map(|m| m.data_mut().iter_mut())
    }

    pub(crate) fn values(&self) -> impl Iterator<Item = &f64> {
        self.slices().flat_map(|m| m.data().iter())
    }

    pub fn norm2(&self) -> f64 {
        self.values().map(|x| x * x).sum()
    }

    pub fn max_abs_diff(&self, other: &FactorParams) -> f64 {
        self.values().zip(other.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|x| x.is_finite())
    }

    /// Multiplies every `A` slice by `sa`, `B` by `sb` and `C` by `sc`.
    /// With `sa·sb·sc = 1` the forward map is unchanged.
    pub fn scaled(&self, sa: f64, sb: f64, sc: f64) -> FactorParams {
        FactorParams {
            n: self.n,
            a: self.a.iter().map(|m| m.scale(sa)).collect(),
            b: self.b.iter().map(|m| m.scale(sb)).collect(),
            c: self.c.iter().map(|m| m.scale(sc)).collect(),
        }
    }

    /// Checkpoint JSON. Each entry is the IEEE-754 bit pattern of the value as
    /// a `0x`-prefixed 16-digit hexadecimal string, so round trips are exact.
    pub fn to_checkpoint_json(&self) -> String {
        serde_json::to_string(&Checkpoint::from(self)).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_json(s: &str) -> Result<Self> {
        let raw: Checkpoint = serde_json::from_str(s)?;
        raw.into_params()
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<String>>>,
    #[serde(rename = "B")]
    b: Vec<Vec<Vec<String>>>,
    #[serde(rename = "C")]
    c: Vec<Vec<Vec<String>>>,
}

pub fn f64_to_hex(x: f64) -> String {
    format!("0x{:016x}", x.to_bits())
}

pub fn f64_from_hex(s: &str) -> Result<f64> {
    let digits = s.strip_prefix("0x").ok_or_else(|| Error::Parse(format!("missing 0x prefix in {s:?}")))?;
    u64::from_str_radix(digits, 16)
        .map(f64::from_bits)
        .map_err(|_| Error::Parse(format!("bad hex float {s:?}")))
}

fn encode_stack(stack: &[Mat]) -> Vec<Vec<Vec<String>>> {
    stack
        .iter()
        .map(|m| m.to_rows().into_iter().map(|r| r.into_iter().map(f64_to_hex).collect()).collect())
        .collect()
}

fn decode_stack(stack: &[Vec<Vec<String>>]) -> Result<Vec<Mat>> {
    stack
        .iter()
        .map(|m| {
            let rows = m
                .iter()
                .map(|r| r.iter().map(|s| f64_from_hex(s)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            Mat::from_rows(&rows)
        })
        .collect()
}

impl From<&FactorParams> for Checkpoint {
    fn from(p: &FactorParams) -> Self {
        Checkpoint { n: p.n, a: encode_stack(&p.a), b: encode_stack(&p.b), c: encode_stack(&p.c) }
    }
}

impl Checkpoint {
    fn into_params(self) -> Result<FactorParams> {
        let p = FactorParams::new(decode_stack(&self.a)?, decode_stack(&self.b)?, decode_stack(&self.c)?)?;
        if p.n != self.n {
            return Err(Error::Shape(format!("checkpoint says n = {} but stacks have {}", self.n, p.n)));
        }
        Ok(p)
    }
}

/// Observed table cells `(a, b)`. Each observed cell reveals its whole fiber
/// `δ_ab·`. Cells are kept sorted, which fixes the reduction order of every
/// sum over the set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSet {
    n: usize,
    cells: Vec<(usize, usize)>,
}

impl ObservationSet {
    pub fn new(n: usize, cells: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in cells {
            if a >= n || b >= n {
                return Err(Error::Index(format!("cell ({a}, {b}) out of range for n = {n}")));
            }
            if !set.insert((a, b)) {
                return Err(Error::InvalidInput(format!("duplicate cell ({a}, {b})")));
            }
        }
        Ok(ObservationSet { n, cells: set.into_iter().collect() })
    }

    pub fn full(n: usize) -> Self {
        ObservationSet { n, cells: (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect() }
    }

    pub fn empty(n: usize) -> Self {
        ObservationSet { n, cells: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.cells.len() == self.n * self.n
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.cells.binary_search(&(a, b)).is_ok()
    }

    /// Dense `n×n` membership mask, row-major.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n * self.n];
        for &(a, b) in &self.cells {
            m[a * self.n + b] = true;
        }
        m
    }
}
