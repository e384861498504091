// SPDX-License-Identifier: Apache-2.0

//! Python bindings: regimes, test functions, semigroups, the lattice simulator and the oracles.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use slowbond::testfn::Family;
use slowbond::{RegimeKind, Side};

fn err(e: slowbond::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn side(name: &str) -> PyResult<Side> {
    match name {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        other => Err(PyValueError::new_err(format!("side must be 'left' or 'right', got {other:?}"))),
    }
}

#[pyclass(name = "BetaRegime", frozen, module = "slowbond", skip_from_py_object)]
#[derive(Clone, Copy)]
struct BetaRegime(slowbond::BetaRegime);

#[pymethods]
impl BetaRegime {
    #[new]
    #[pyo3(signature = (beta, alpha = 1.0))]
    fn new(beta: f64, alpha: f64) -> PyResult<Self> {
        slowbond::BetaRegime::new(beta, alpha).map(Self).map_err(err)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    /// `"line"`, `"robin"` or `"neumann"`.
    #[getter]
    fn kind(&self) -> &'static str {
        match self.0.kind() {
            RegimeKind::Line => "line",
            RegimeKind::Robin => "robin",
            RegimeKind::Neumann => "neumann",
        }
    }

    fn __repr__(&self) -> String {
        format!("BetaRegime(beta={}, alpha={})", self.0.beta(), self.0.alpha())
    }
}

#[pyclass(name = "TestFunction", frozen, module = "slowbond", skip_from_py_object)]
#[derive(Clone)]
struct TestFunction(slowbond::TestFunction);

#[pymethods]
impl TestFunction {
    /// Builds a function from its JSON family descriptor, e.g.
    /// `{"family": "hermite_gaussian", "coeffs": [1.0]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let family: Family = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        slowbond::TestFunction::from_family(&family).map(Self).map_err(err)
    }

    /// `p(x) exp(-x^2)` with `coeffs` in increasing powers.
    #[staticmethod]
    fn hermite_gaussian(coeffs: Vec<f64>) -> PyResult<Self> {
        slowbond::TestFunction::from_family(&Family::HermiteGaussian { coeffs }).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(self.0.family()).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[pyo3(signature = (x, k = 0, side = "right"))]
    fn eval(&self, x: f64, k: usize, side: &str) -> PyResult<f64> {
        self.0.eval_sided(x, k, self::side(side)?).map_err(err)
    }

    fn evolve(&self, regime: &BetaRegime, t: f64) -> PyResult<Self> {
        self.0.evolve(&regime.0, t).map(Self).map_err(err)
    }

    fn laplacian(&self) -> PyResult<Self> {
        slowbond::laplace_beta(&self.0).map(Self).map_err(err)
    }

    #[getter]
    fn k_max(&self) -> usize {
        self.0.k_max()
    }
}

/// `(passed, max relative residual)` of the boundary conditions at the origin.
#[pyfunction]
#[pyo3(signature = (h, regime, max_k = 2, tol = 1e-6))]
fn validate_membership(h: &TestFunction, regime: &BetaRegime, max_k: usize, tol: f64) -> PyResult<(bool, f64)> {
    let report = slowbond::validate_membership(&h.0, &regime.0, max_k, tol).map_err(err)?;
    Ok((report.passed(), report.max_relative_residual()))
}

/// `(x, side, value)` records of `d^k T_t H` on `grid`; `side` is `None` off the origin.
#[pyfunction]
#[pyo3(signature = (regime, t, h, grid, k = 0))]
fn semigroup_apply(
    regime: &BetaRegime,
    t: f64,
    h: &TestFunction,
    grid: Vec<f64>,
    k: usize,
) -> PyResult<Vec<(f64, Option<&'static str>, f64)>> {
    let sampled = slowbond::semigroup_apply(&regime.0, t, &h.0, &grid, k).map_err(err)?;
    Ok(sampled
        .records
        .iter()
        .map(|r| {
            let side = r.one_sided.map(|s| match s {
                Side::Left => "left",
                Side::Right => "right",
            });
            (r.x, side, r.value)
        })
        .collect())
}

#[pyclass(name = "LatticeConfig", module = "slowbond", skip_from_py_object)]
#[derive(Clone)]
struct LatticeConfig(slowbond::LatticeConfig);

#[pymethods]
impl LatticeConfig {
    #[new]
    #[pyo3(signature = (n, beta, alpha, rho, horizon, sample_times = None, replicas = 0, seed = 0, half_width = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        beta: f64,
        alpha: f64,
        rho: f64,
        horizon: f64,
        sample_times: Option<Vec<f64>>,
        replicas: usize,
        seed: u64,
        half_width: Option<usize>,
    ) -> PyResult<Self> {
        let mut c = slowbond::LatticeConfig::new(n, beta, alpha, rho, horizon);
        if let Some(times) = sample_times {
            c.sample_times = times;
        }
        if let Some(l) = half_width {
            c.half_width = l;
        }
        c.replicas = replicas;
        c.seed = seed;
        c.validate().map_err(err)?;
        Ok(Self(c))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn replicas(&self) -> usize {
        self.0.replicas
    }

    #[getter]
    fn sample_times(&self) -> Vec<f64> {
        self.0.sample_times.clone()
    }

    #[getter]
    fn regime(&self) -> PyResult<BetaRegime> {
        self.0.regime().map(BetaRegime).map_err(err)
    }
}

/// Runs every replica; returns, per replica, a list of `(t, {probe id: value})`.
#[pyfunction]
fn simulate<'py>(
    py: Python<'py>,
    config: &LatticeConfig,
    probes: Vec<(String, PyRef<'py, TestFunction>)>,
) -> PyResult<Vec<Vec<(f64, Bound<'py, PyDict>)>>> {
    let probes = probes
        .iter()
        .map(|(id, h)| slowbond::FieldProbe::new(id, &h.0, &config.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let cfg = config.0.clone();
    let streams = py.detach(move || slowbond::run_replicas(&cfg, &probes)).map_err(err)?;
    streams
        .into_iter()
        .map(|stream| {
            stream
                .into_iter()
                .map(|s| {
                    let values = PyDict::new(py);
                    for (id, v) in s.values {
                        values.set_item(id, v)?;
                    }
                    Ok((s.t, values))
                })
                .collect()
        })
        .collect()
}

/// `chi <T_t H, G>` of the limiting Ornstein-Uhlenbeck field.
#[pyfunction]
fn ou_covariance(rho: f64, regime: &BetaRegime, h: &TestFunction, g: &TestFunction, t: f64) -> PyResult<f64> {
    let params = slowbond::OUParams::new(rho, regime.0).map_err(err)?;
    slowbond::ou_covariance_oracle(&params, &h.0, &g.0, t).map_err(err)
}

/// Exact `E[Y_t(H) Y_0(G)]` on the finite lattice.
#[pyfunction]
fn lattice_covariance(config: &LatticeConfig, h: &TestFunction, g: &TestFunction, t: f64) -> PyResult<f64> {
    slowbond::lattice_covariance(&config.0, &h.0, &g.0, t).map_err(err)
}

/// `(mean, jackknife standard error)` of a sample.
#[pyfunction]
fn estimate(values: Vec<f64>) -> PyResult<(f64, f64)> {
    let e = slowbond::CovEstimate::from_values(&values).map_err(err)?;
    Ok((e.mean, e.std_error))
}

#[pymodule]
#[pyo3(name = "slowbond")]
fn slowbond_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<BetaRegime>()?;
    m.add_class::<TestFunction>()?;
    m.add_class::<LatticeConfig>()?;
    m.add_function(wrap_pyfunction!(validate_membership, m)?)?;
    m.add_function(wrap_pyfunction!(semigroup_apply, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(ou_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(lattice_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
