//! Python bindings. Objects cross the boundary as the library's JSON documents.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ::witnesskit as wk;
use ::witnesskit::catalog;
use ::witnesskit::channel::{compose, from_measurement, identity_channel};
use ::witnesskit::sampling::random_channel;
use ::witnesskit::witness;
use ::witnesskit::{Error, Factor, JsonFormat};

fn err(e: Error) -> PyErr {
    match e {
        Error::DimensionMismatch(_)
        | Error::AlgebraMismatch(_)
        | Error::InvalidInput(_)
        | Error::NotAState(_)
        | Error::NotInformationallyComplete { .. }
        | Error::NonProjective(_)
        | Error::PairCompatible { .. }
        | Error::DegenerateTask { .. }
        | Error::Parse(_)
        | Error::Json(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn slot(i: usize) -> PyResult<Factor> {
    Factor::from_index(i).map_err(err)
}

/// Finite-dimensional C*-algebra given by its block sizes.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
pub struct Algebra(wk::Algebra);

#[pymethods]
impl Algebra {
    #[new]
    fn new(blocks: Vec<usize>) -> PyResult<Self> {
        wk::Algebra::new(blocks).map(Self).map_err(err)
    }

    #[staticmethod]
    fn full(d: usize) -> Self {
        Self(wk::Algebra::full(d))
    }

    #[staticmethod]
    fn abelian(size: usize) -> Self {
        Self(wk::Algebra::abelian(size))
    }

    #[getter]
    fn blocks(&self) -> Vec<usize> {
        self.0.blocks().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("Algebra({:?})", self.0.blocks())
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
pub struct Channel(wk::Channel);

#[pymethods]
impl Channel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        wk::Channel::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[staticmethod]
    fn identity(a: &Algebra) -> Self {
        Self(identity_channel(&a.0))
    }

    #[staticmethod]
    fn random(input: &Algebra, output: &Algebra, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_channel(&mut rng, &input.0, &output.0).map(Self).map_err(err)
    }

    #[getter]
    fn input(&self) -> Algebra {
        Algebra(self.0.input().clone())
    }

    #[getter]
    fn output(&self) -> Algebra {
        Algebra(self.0.output().clone())
    }

    #[pyo3(signature = (tol = 1e-9))]
    fn is_channel(&self, tol: f64) -> PyResult<bool> {
        self.0.is_channel(tol).map(|r| r.valid).map_err(err)
    }

    /// `self` after `before`.
    fn compose(&self, before: &Channel) -> PyResult<Self> {
        compose(&self.0, &before.0).map(Self).map_err(err)
    }

    fn max_diff(&self, other: &Channel) -> f64 {
        self.0.max_diff(&other.0)
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
pub struct Measurement(wk::Measurement);

#[pymethods]
impl Measurement {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        wk::Measurement::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn channel(&self) -> Channel {
        Channel(from_measurement(&self.0))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
pub struct WitnessForm(wk::WitnessForm);

#[pymethods]
impl WitnessForm {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        wk::WitnessForm::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn delta0(&self) -> f64 {
        self.0.delta0()
    }

    fn evaluate(&self, c1: &Channel, c2: &Channel) -> PyResult<f64> {
        self.0.evaluate(&c1.0, &c2.0).map_err(err)
    }

    fn detects(&self, c1: &Channel, c2: &Channel) -> PyResult<bool> {
        self.0.detects(&c1.0, &c2.0).map_err(err)
    }

    fn tighten(&self) -> PyResult<Self> {
        witness::tighten(&self.0).map(Self).map_err(err)
    }

    /// Minimum over compatible pairs.
    fn minimum(&self) -> PyResult<f64> {
        wk::max_over_compatible(&self.0).map(|m| m.min).map_err(err)
    }

    #[pyo3(signature = (p, slot = 2))]
    fn lift(&self, p: &Measurement, slot: usize) -> PyResult<Self> {
        witness::lift_witness(&self.0, &p.0, self::slot(slot)?).map(Self).map_err(err)
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
pub struct DiscriminationTask(wk::DiscriminationTask);

#[pymethods]
impl DiscriminationTask {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        wk::DiscriminationTask::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn p_prior(&self) -> PyResult<f64> {
        wk::p_prior(&self.0).map_err(err)
    }

    fn p_post(&self) -> PyResult<f64> {
        wk::p_post(&self.0).map_err(err)
    }

    fn p_prior_given(&self, c1: &Channel, c2: &Channel) -> PyResult<f64> {
        wk::p_prior_given(&c1.0, &c2.0, &self.0).map_err(err)
    }
}

/// Compatibility verdict as a dict with `decision`, `compatible`, `slack` and `joint`.
#[pyfunction]
fn check_compatibility<'py>(py: Python<'py>, c1: &Channel, c2: &Channel) -> PyResult<Bound<'py, PyDict>> {
    let v = wk::check_compatibility(&c1.0, &c2.0).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("decision", format!("{:?}", v.decision))?;
    d.set_item("compatible", v.compatible)?;
    d.set_item("slack", v.slack)?;
    d.set_item("joint", v.joint.map(Channel))?;
    Ok(d)
}

/// Task `(T, alpha, delta)` with `W = alpha (delta - P_prior)`; defaults to the canonical IC measurements.
#[pyfunction]
#[pyo3(signature = (w, m1 = None, m2 = None))]
fn task_from_witness(
    w: &WitnessForm,
    m1: Option<&Measurement>,
    m2: Option<&Measurement>,
) -> PyResult<(DiscriminationTask, f64, f64)> {
    let m1 = match m1 {
        Some(m) => m.0.clone(),
        None => wk::algebra::ic_povm(w.0.out1()).map_err(err)?,
    };
    let m2 = match m2 {
        Some(m) => m.0.clone(),
        None => wk::algebra::ic_povm(w.0.out2()).map_err(err)?,
    };
    let t = witness::task_from_witness(&w.0, &m1, &m2).map_err(err)?;
    Ok((DiscriminationTask(t.task), t.alpha, t.delta))
}

#[pyfunction]
fn witness_from_task(t: &DiscriminationTask) -> PyResult<WitnessForm> {
    witness::witness_from_task(&t.0).map(WitnessForm).map_err(err)
}

#[pyfunction]
fn witness_from_incompatible_pair(c1: &Channel, c2: &Channel) -> PyResult<WitnessForm> {
    witness::witness_from_incompatible_pair(&c1.0, &c2.0).map(WitnessForm).map_err(err)
}

#[pyfunction]
fn xi_mm(d: usize) -> PyResult<WitnessForm> {
    catalog::xi_mm(d).map(WitnessForm).map_err(err)
}

#[pyfunction]
fn xi_cc_clone(d: usize) -> PyResult<WitnessForm> {
    catalog::xi_cc_clone(d, None).map(WitnessForm).map_err(err)
}

#[pyfunction]
fn cloning_margins(d: usize) -> PyResult<(Channel, Channel)> {
    catalog::cloning_margins(d).map(|(a, b)| (Channel(a), Channel(b))).map_err(err)
}

#[pyfunction]
fn noisy_mub_channels(d: usize, gamma: f64) -> PyResult<(Channel, Channel)> {
    let (m, n) = catalog::noisy_mub_measurements(d, gamma).map_err(err)?;
    Ok((Channel(from_measurement(&m)), Channel(from_measurement(&n))))
}

#[pyfunction]
fn gamma_threshold(d: usize) -> f64 {
    catalog::gamma_threshold(d)
}

/// Bisection estimate of the noisy MUB compatibility boundary and the probed `(gamma, slack)` values.
#[pyfunction]
#[pyo3(signature = (d, lo = 0.5, hi = 1.0, steps = 12))]
fn bisect_gamma(d: usize, lo: f64, hi: f64, steps: usize) -> PyResult<(f64, Vec<(f64, f64)>)> {
    let (probes, estimate) = catalog::bisect_gamma(d, lo, hi, steps).map_err(err)?;
    Ok((estimate, probes.iter().map(|p| (p.gamma, p.slack)).collect()))
}

#[pymodule]
fn witnesskit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Algebra>()?;
    m.add_class::<Channel>()?;
    m.add_class::<Measurement>()?;
    m.add_class::<WitnessForm>()?;
    m.add_class::<DiscriminationTask>()?;
    m.add_function(wrap_pyfunction!(check_compatibility, m)?)?;
    m.add_function(wrap_pyfunction!(task_from_witness, m)?)?;
    m.add_function(wrap_pyfunction!(witness_from_task, m)?)?;
    m.add_function(wrap_pyfunction!(witness_from_incompatible_pair, m)?)?;
    m.add_function(wrap_pyfunction!(xi_mm, m)?)?;
    m.add_function(wrap_pyfunction!(xi_cc_clone, m)?)?;
    m.add_function(wrap_pyfunction!(cloning_margins, m)?)?;
    m.add_function(wrap_pyfunction!(noisy_mub_channels, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(bisect_gamma, m)?)?;
    Ok(())
}
