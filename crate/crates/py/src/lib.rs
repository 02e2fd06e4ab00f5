//! Python module `cayley`: tables, the factor model, training, probes and the
//! verification suite.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cayley_core::algebra as alg;
use cayley_core::baseline::{encode_table, Encoding};
use cayley_core::engine::{self, TableSpec, TrainConfig};
use cayley_core::model::{self, ObservationSet};
use cayley_core::numerics::{matrix_rank, Rng};

fn err(e: cayley_core::Error) -> PyErr {
    match e {
        cayley_core::Error::Diverged { .. } | cayley_core::Error::ProbeFailed { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Training settings from keyword arguments named like the config keys.
fn train_config(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<TrainConfig> {
    let mut map = match serde_json::to_value(TrainConfig::default()).expect("config serializes") {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("struct serializes to an object"),
    };
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            let slot = map.get(&key).ok_or_else(|| PyValueError::new_err(format!("unknown config key {key:?}")))?;
            let value = if slot.is_u64() {
                serde_json::Value::from(v.extract::<u64>()?)
            } else {
                serde_json::Number::from_f64(v.extract::<f64>()?)
                    .map(serde_json::Value::Number)
                    .ok_or_else(|| PyValueError::new_err(format!("{key} must be finite")))?
            };
            map.insert(key, value);
        }
    }
    let cfg: TrainConfig =
        serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| PyValueError::new_err(e.to_string()))?;
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

#[pyclass(name = "CayleyTable", module = "cayley", eq, frozen)]
#[derive(Clone, PartialEq)]
struct PyTable {
    inner: alg::CayleyTable,
}

#[pymethods]
impl PyTable {
    #[new]
    fn new(rows: Vec<Vec<usize>>) -> PyResult<Self> {
        Ok(PyTable { inner: alg::CayleyTable::from_rows(&rows).map_err(err)? })
    }

    /// `cyclic:6`, `dihedral:4`, `product:2x2`, `random-latin:5:3`,
    /// `nonassoc:5:7`.
    #[staticmethod]
    fn from_spec(spec: &str) -> PyResult<Self> {
        let s: TableSpec = spec.parse().map_err(err)?;
        Ok(PyTable { inner: s.build().map_err(err)? })
    }

    #[staticmethod]
    fn cyclic(n: usize) -> PyResult<Self> {
        Ok(PyTable { inner: alg::cyclic_group(n).map_err(err)? })
    }

    #[staticmethod]
    fn random_latin(n: usize, seed: u64) -> PyResult<Self> {
        Ok(PyTable { inner: alg::random_latin_square(n, seed).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyTable { inner: alg::CayleyTable::from_json(text).map_err(err)? })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyTable { inner: alg::CayleyTable::from_text(text).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn get(&self, a: usize, b: usize) -> PyResult<usize> {
        let n = self.inner.n();
        if a >= n || b >= n {
            return Err(PyValueError::new_err(format!("({a}, {b}) out of range for n = {n}")));
        }
        Ok(self.inner.get(a, b))
    }

    fn rows(&self) -> Vec<Vec<usize>> {
        self.inner.rows()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn is_latin(&self) -> bool {
        alg::is_latin(&self.inner)
    }

    fn is_associative(&self) -> bool {
        alg::is_associative(&self.inner)
    }

    fn is_isotopic_to_group(&self) -> PyResult<bool> {
        alg::is_isotopic_to_group(&self.inner).map_err(err)
    }

    /// Exhaustive isotopy search against `other` (order at most 5).
    fn is_isotopic_to(&self, other: &PyTable) -> PyResult<bool> {
        alg::exhaustive_isotopy_check(&self.inner, &other.inner).map_err(err)
    }

    /// `result[a][b] = h[t[f[a]][g[b]]]`.
    fn isotope(&self, f: Vec<usize>, g: Vec<usize>, h: Vec<usize>) -> PyResult<Self> {
        let iso = alg::Isotopy::new(f, g, h).map_err(err)?;
        Ok(PyTable { inner: alg::apply_isotopy(&self.inner, &iso).map_err(err)? })
    }

    /// Rank of the `ordinal` or `onehot` matrix encoding.
    #[pyo3(signature = (encoding = "ordinal"))]
    fn rank(&self, encoding: &str) -> PyResult<usize> {
        let enc: Encoding = encoding.parse().map_err(err)?;
        Ok(matrix_rank(&encode_table(&self.inner, enc)))
    }

    fn __repr__(&self) -> String {
        format!("CayleyTable(n={}, rows={:?})", self.inner.n(), self.inner.rows())
    }
}

/// Factor stacks `A, B, C` of the operator model.
#[pyclass(name = "Factors", module = "cayley")]
#[derive(Clone)]
struct PyFactors {
    inner: model::FactorParams,
}

fn omega_of(n: usize, cells: Option<Vec<(usize, usize)>>) -> PyResult<ObservationSet> {
    match cells {
        Some(c) => ObservationSet::new(n, c).map_err(err),
        None => Ok(ObservationSet::full(n)),
    }
}

#[pymethods]
impl PyFactors {
    /// Regular representation of a group table.
    #[staticmethod]
    fn regular(table: &PyTable) -> PyResult<Self> {
        Ok(PyFactors { inner: model::regular_representation(&table.inner).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, seed, scale = 1.0))]
    fn random(n: usize, seed: u64, scale: f64) -> PyResult<Self> {
        Ok(PyFactors { inner: model::init_params(n, scale, &mut Rng::new(seed)).map_err(err)? })
    }

    #[staticmethod]
    fn from_checkpoint(text: &str) -> PyResult<Self> {
        Ok(PyFactors { inner: model::FactorParams::from_checkpoint_json(text).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// `(1/n) Tr(A_a B_b C_c)`.
    fn forward(&self, a: usize, b: usize, c: usize) -> PyResult<f64> {
        model::forward(&self.inner, a, b, c).map_err(err)
    }

    /// Flatness over `cells` (all cells when omitted).
    #[pyo3(signature = (cells = None))]
    fn flatness(&self, cells: Option<Vec<(usize, usize)>>) -> PyResult<f64> {
        model::flatness(&self.inner, &omega_of(self.inner.n(), cells)?).map_err(err)
    }

    #[pyo3(signature = (table, cells = None))]
    fn recon_loss(&self, table: &PyTable, cells: Option<Vec<(usize, usize)>>) -> PyResult<f64> {
        model::recon_loss(&self.inner, &table.inner, &omega_of(self.inner.n(), cells)?).map_err(err)
    }

    /// Gradient of `recon_loss + lam * flatness`, flattened A, B, C.
    #[pyo3(signature = (table, lam, cells = None))]
    fn grad(&self, table: &PyTable, lam: f64, cells: Option<Vec<(usize, usize)>>) -> PyResult<Vec<f64>> {
        let g = model::grad(&self.inner, &table.inner, &omega_of(self.inner.n(), cells)?, lam).map_err(err)?;
        Ok(g.to_vec())
    }

    fn to_vec(&self) -> Vec<f64> {
        self.inner.to_vec()
    }

    fn decode(&self) -> PyTable {
        PyTable { inner: engine::decode(&self.inner).table }
    }

    fn sv_spread(&self) -> f64 {
        engine::sv_spread_max(&self.inner)
    }

    fn to_checkpoint(&self) -> String {
        self.inner.to_checkpoint_json()
    }
}

#[pyclass(name = "TrainResult", module = "cayley", frozen)]
struct PyTrainResult {
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    steps_used: usize,
    #[pyo3(get)]
    recon_loss_final: f64,
    #[pyo3(get)]
    flatness_final: f64,
    #[pyo3(get)]
    exact: bool,
    #[pyo3(get)]
    cell_accuracy: f64,
    #[pyo3(get)]
    unobserved_accuracy: f64,
    #[pyo3(get)]
    factors: PyFactors,
    json: String,
}

#[pymethods]
impl PyTrainResult {
    /// Result document with the resolved config, as written by the CLI.
    fn to_json(&self) -> String {
        self.json.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainResult(exact={}, converged={}, steps_used={}, flatness_final={})",
            self.exact, self.converged, self.steps_used, self.flatness_final
        )
    }
}

/// Trains on `m` cells sampled with `seed` (all cells when omitted). Extra
/// keyword arguments override training settings, e.g. `steps_max=5000`.
#[pyfunction]
#[pyo3(signature = (table, m = None, seed = 0, **config))]
fn train(
    py: Python<'_>,
    table: &PyTable,
    m: Option<usize>,
    seed: u64,
    config: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyTrainResult> {
    let cfg = train_config(config)?;
    let t = table.inner.clone();
    let n = t.n();
    let m = m.unwrap_or(n * n);
    let omega = engine::sample_mask(n, m, &mut Rng::new(engine::mask_seed(m, seed))).map_err(err)?;
    let (res, rep) = py
        .detach(|| -> cayley_core::Result<_> {
            let res = engine::train(&t, &omega, &cfg, seed)?;
            let rep = engine::evaluate_decoded(&engine::decode(&res.params), &t, &omega, res.flatness_final)?;
            Ok((res, rep))
        })
        .map_err(err)?;
    let json = engine::train_result_json(&format!("python-n{n}"), m, &cfg, &res, &rep);
    Ok(PyTrainResult {
        converged: res.converged,
        steps_used: res.steps_used,
        recon_loss_final: res.recon_loss_final,
        flatness_final: res.flatness_final,
        exact: rep.exact,
        cell_accuracy: rep.cell_accuracy,
        unobserved_accuracy: rep.unobserved_accuracy,
        factors: PyFactors { inner: res.params },
        json,
    })
}

/// Multi-restart probe at full observation; returns the landscape JSON.
#[pyfunction]
#[pyo3(signature = (table, k = 10, seed = 0, table_id = "table", **config))]
fn landscape(
    py: Python<'_>,
    table: &PyTable,
    k: usize,
    seed: u64,
    table_id: &str,
    config: Option<&Bound<'_, PyDict>>,
) -> PyResult<String> {
    let cfg = train_config(config)?;
    let t = table.inner.clone();
    let s = py.detach(|| engine::landscape_probe(table_id, &t, &cfg, k, seed)).map_err(err)?;
    Ok(s.to_json())
}

/// Runs the verification suite; returns `(passed, report_json)`.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn verify(py: Python<'_>, seed: u64) -> PyResult<(bool, String)> {
    let r = py.detach(|| cayley_core::verify::run_verification(seed)).map_err(err)?;
    Ok((r.passed(), r.to_json()))
}

#[pymodule]
fn cayley(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTable>()?;
    m.add_class::<PyFactors>()?;
    m.add_class::<PyTrainResult>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(landscape, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
