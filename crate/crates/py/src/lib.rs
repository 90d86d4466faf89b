//! Python bindings for the cpdlab library: tensor formats, rank-1 tuples,
//! condition numbers, distances, and the Monte Carlo statistics.
//!
//! Build the cdylib and rename it to `cpdlab.so` (or `cpdlab.pyd`) on the
//! Python path; `python/smoke_test.py` in the repository root automates
//! that for a quick check.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cpdlab::condition::ExtendedReal;
use cpdlab::sampling::{derive_stream, SampleSpec, DOMAIN_ANCHOR};
use cpdlab::tensor::{Rank1Tensor, TensorFormat};

fn to_py_err(e: cpdlab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A tensor format: the mode dimensions (n_1, ..., n_d).
#[pyclass(name = "Format", frozen, from_py_object)]
#[derive(Clone)]
struct PyFormat {
    inner: TensorFormat,
}

#[pymethods]
impl PyFormat {
    #[new]
    fn new(dims: Vec<usize>) -> PyResult<Self> {
        Ok(PyFormat { inner: TensorFormat::new(dims).map_err(to_py_err)? })
    }

    /// The mode dimensions.
    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    /// Product of the dimensions (length of a vectorized tensor).
    #[getter]
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    /// Dimension of the rank-1 manifold: 1 - d + sum of dimensions.
    #[getter]
    fn segre_dim(&self) -> usize {
        self.inner.segre_dim()
    }

    fn __repr__(&self) -> String {
        format!("Format({:?})", self.inner.dims())
    }
}

/// An ordered tuple of rank-1 terms, each term a list of factor vectors.
#[pyclass(name = "Rank1Tuple", from_py_object)]
#[derive(Clone)]
struct PyRank1Tuple {
    inner: cpdlab::tensor::Rank1Tuple,
}

#[pymethods]
impl PyRank1Tuple {
    #[new]
    fn new(format: PyFormat, terms: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let terms = terms
            .into_iter()
            .map(|factors| Rank1Tensor::new(factors).map_err(to_py_err))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyRank1Tuple {
            inner: cpdlab::tensor::Rank1Tuple::new(format.inner, terms).map_err(to_py_err)?,
        })
    }

    /// Draws sample `index` of the seeded Gaussian ensemble.
    #[staticmethod]
    #[pyo3(signature = (format, r, seed, index = 0))]
    fn random(format: PyFormat, r: usize, seed: u64, index: usize) -> PyResult<Self> {
        let spec = SampleSpec::new(format.inner, r, seed, index + 1).map_err(to_py_err)?;
        Ok(PyRank1Tuple {
            inner: cpdlab::sampling::random_rank1_tuple(&spec, index).map_err(to_py_err)?,
        })
    }

    /// Seeded ill-posed tuple whose last term reuses the first term's
    /// mode-1 factor.
    #[staticmethod]
    fn illposed_shared_first(format: PyFormat, r: usize, seed: u64) -> PyResult<Self> {
        let mut rng = derive_stream(seed, DOMAIN_ANCHOR, 0, 0, 0);
        Ok(PyRank1Tuple {
            inner: cpdlab::sampling::illposed_shared_first_factor(&format.inner, r, &mut rng)
                .map_err(to_py_err)?,
        })
    }

    /// Seeded ill-posed tuple whose last term reuses the first term's
    /// mode-3 factor.
    #[staticmethod]
    fn illposed_shared_third(format: PyFormat, r: usize, seed: u64) -> PyResult<Self> {
        let mut rng = derive_stream(seed, DOMAIN_ANCHOR, 0, 0, 0);
        Ok(PyRank1Tuple {
            inner: cpdlab::sampling::illposed_shared_third_factor(&format.inner, r, &mut rng)
                .map_err(to_py_err)?,
        })
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }

    #[getter]
    fn format(&self) -> PyFormat {
        PyFormat { inner: self.inner.format().clone() }
    }

    /// The factors as nested lists: terms, then modes, then entries.
    fn factors(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner
            .terms()
            .iter()
            .map(|t| t.factors().to_vec())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Rank1Tuple(format={:?}, r={})",
            self.inner.format().dims(),
            self.inner.r()
        )
    }
}

/// Result of a condition number computation. `kappa` is None when the
/// condition number is infinite.
#[pyclass(name = "ConditionResult", frozen)]
struct PyConditionResult {
    #[pyo3(get)]
    kappa: Option<f64>,
    #[pyo3(get)]
    sigma_min: f64,
    #[pyo3(get)]
    rows: usize,
    #[pyo3(get)]
    cols: usize,
    #[pyo3(get)]
    shape_forced_infinite: bool,
}

#[pymethods]
impl PyConditionResult {
    #[getter]
    fn infinite(&self) -> bool {
        self.kappa.is_none()
    }

    fn __repr__(&self) -> String {
        match self.kappa {
            Some(k) => format!("ConditionResult(kappa={k})"),
            None => "ConditionResult(kappa=inf)".to_string(),
        }
    }
}

/// The geometric condition number of a tuple.
#[pyfunction]
fn condition_number(t: &PyRank1Tuple) -> PyResult<PyConditionResult> {
    let res = cpdlab::condition::condition_number(&t.inner).map_err(to_py_err)?;
    Ok(PyConditionResult {
        kappa: res.kappa.finite(),
        sigma_min: res.sigma_min,
        rows: res.rows,
        cols: res.cols,
        shape_forced_infinite: res.shape_forced_infinite,
    })
}

/// Independent oracle path for the condition number.
#[pyfunction]
fn condition_oracle(t: &PyRank1Tuple) -> PyResult<f64> {
    cpdlab::condition::condition_oracle(&t.inner).map_err(to_py_err)
}

/// The weighted distance between two tuples of a common format.
#[pyfunction]
fn weighted_distance(a: &PyRank1Tuple, b: &PyRank1Tuple) -> PyResult<f64> {
    cpdlab::geometry::weighted_distance(&a.inner, &b.inner).map_err(to_py_err)
}

/// The Fubini-Study (projective) distance between two nonzero vectors.
#[pyfunction]
fn fubini_study_distance(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    cpdlab::geometry::fubini_study_distance(&x, &y).map_err(to_py_err)
}

/// Condition numbers of `count` seeded random tuples; infinite values come
/// back as float('inf').
#[pyfunction]
fn sample_kappas(format: PyFormat, r: usize, seed: u64, count: usize) -> PyResult<Vec<f64>> {
    let spec = SampleSpec::new(format.inner, r, seed, count).map_err(to_py_err)?;
    let kappas = cpdlab::experiments::sample_condition_numbers(&spec).map_err(to_py_err)?;
    Ok(kappas.iter().map(ExtendedReal::to_f64).collect())
}

fn to_extended(samples: Vec<f64>) -> Vec<ExtendedReal> {
    samples
        .into_iter()
        .map(|k| {
            if k.is_finite() {
                ExtendedReal::Finite(k)
            } else {
                ExtendedReal::Infinite
            }
        })
        .collect()
}

/// Empirical strict ccdf of kappa^power: returns (xs, ccdf) columns.
#[pyfunction]
fn estimate_ccdf(samples: Vec<f64>, power: u32) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let table =
        cpdlab::experiments::estimate_ccdf(&to_extended(samples), power).map_err(to_py_err)?;
    Ok((table.xs().to_vec(), table.ccdf().to_vec()))
}

/// Upper-tail quantile of kappa^power; float('inf') when the infinite mass
/// exceeds p.
#[pyfunction]
fn quantile(samples: Vec<f64>, power: u32, p: f64) -> PyResult<f64> {
    let table =
        cpdlab::experiments::estimate_ccdf(&to_extended(samples), power).map_err(to_py_err)?;
    Ok(cpdlab::experiments::quantile(&table, p).map_err(to_py_err)?.to_f64())
}

/// Least-squares power-law fit of ccdf(x) = a * x**(-b) inside the window.
#[pyfunction]
fn tail_fit<'py>(
    py: Python<'py>,
    xs: Vec<f64>,
    ccdf: Vec<f64>,
    window: (f64, f64),
) -> PyResult<Bound<'py, PyDict>> {
    let fit = cpdlab::experiments::fit_tail_points(&xs, &ccdf, window).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("a", fit.a)?;
    d.set_item("b", fit.b)?;
    d.set_item("r_squared", fit.r_squared)?;
    d.set_item("window_low", fit.window.0)?;
    d.set_item("window_high", fit.window.1)?;
    d.set_item("b_stderr", fit.b_stderr)?;
    d.set_item("n_points", fit.n_points)?;
    Ok(d)
}

#[pymodule(name = "cpdlab")]
fn cpdlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFormat>()?;
    m.add_class::<PyRank1Tuple>()?;
    m.add_class::<PyConditionResult>()?;
    m.add_function(wrap_pyfunction!(condition_number, m)?)?;
    m.add_function(wrap_pyfunction!(condition_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fubini_study_distance, m)?)?;
    m.add_function(wrap_pyfunction!(sample_kappas, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_ccdf, m)?)?;
    m.add_function(wrap_pyfunction!(quantile, m)?)?;
    m.add_function(wrap_pyfunction!(tail_fit, m)?)?;
    Ok(())
}
