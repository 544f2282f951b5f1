//! Python bindings. Structured results cross the boundary as JSON and come
//! back as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use aggdiff::catalog::{branch_expansion, catalog_for, critical_stability_alpha1, critical_stability_gamma};
use aggdiff::config::{self, RunConfig};
use aggdiff::dynamics::simulate as run_simulation;
use aggdiff::stability::{spectrum, stability_verdict, two_species_eigenvalues};
use aggdiff::stationary::{fixed_point_solve, free_energy};
use aggdiff::{kernel_summary, GridState, KernelSpec, ParamKind, SpectralKernel, System};

fn err(e: aggdiff::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize + ?Sized>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = aggdiff::emit::to_json(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn param_kind(name: &str) -> PyResult<ParamKind> {
    match name {
        "alpha1" => Ok(ParamKind::Alpha1),
        "gamma" => Ok(ParamKind::Gamma),
        "alpha" | "alpha-scalar" | "alpha_scalar" => Ok(ParamKind::ScalarAlpha),
        other => Err(PyValueError::new_err(format!(
            "unknown parameter {other:?}; expected alpha1, gamma or alpha-scalar"
        ))),
    }
}

/// Interaction kernel in cosine-series form on a torus of length L.
#[pyclass(frozen)]
struct Kernel {
    inner: SpectralKernel,
}

#[pymethods]
impl Kernel {
    #[staticmethod]
    #[pyo3(signature = (radius, sign, length, k_max = 128))]
    fn tophat(radius: f64, sign: i32, length: f64, k_max: usize) -> PyResult<Self> {
        Self::build(KernelSpec::tophat(radius, sign), length, k_max)
    }

    #[staticmethod]
    #[pyo3(signature = (m, amplitude, length, k_max = 128))]
    fn cosine(m: usize, amplitude: f64, length: f64, k_max: usize) -> PyResult<Self> {
        Self::build(KernelSpec::cosine(m, amplitude), length, k_max)
    }

    /// Samples (x, W(x)) over one period, x ascending.
    #[staticmethod]
    #[pyo3(signature = (samples, length, k_max = 128))]
    fn tabulated(samples: Vec<(f64, f64)>, length: f64, k_max: usize) -> PyResult<Self> {
        Self::build(KernelSpec::tabulated(samples), length, k_max)
    }

    #[getter]
    fn k_max(&self) -> usize {
        self.inner.k_max
    }

    fn coefficient(&self, k: usize) -> f64 {
        self.inner.coefficient(k)
    }

    fn coefficients(&self) -> Vec<f64> {
        self.inner.coeffs.clone()
    }

    /// None where the coefficient vanishes.
    fn h(&self, sigma: f64, k: usize) -> Option<f64> {
        self.inner.h(sigma, k)
    }

    fn summary<'py>(&self, py: Python<'py>, sigma: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &kernel_summary(&self.inner, sigma).map_err(err)?)
    }

    /// (lambda_minus, lambda_plus) of mode k for the two-species system.
    #[pyo3(signature = (k, sigma, alpha1, alpha2, gamma, chi1 = 1, chi2 = 1))]
    #[allow(clippy::too_many_arguments)]
    fn eigenvalues(
        &self,
        k: usize,
        sigma: f64,
        alpha1: f64,
        alpha2: f64,
        gamma: f64,
        chi1: i32,
        chi2: i32,
    ) -> PyResult<(f64, f64)> {
        let p = aggdiff::TwoSpeciesParams::new(sigma, self.inner.length, (alpha1, alpha2, gamma), (chi1, chi2))
            .map_err(err)?;
        Ok(two_species_eigenvalues(&p, &self.inner, k))
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?}, L={}, k_max={})", self.inner.class, self.inner.length, self.inner.k_max)
    }
}

impl Kernel {
    fn build(spec: KernelSpec, length: f64, k_max: usize) -> PyResult<Self> {
        let inner = aggdiff::cosine_transform(&spec, length, k_max).map_err(err)?;
        Ok(Self { inner })
    }
}

/// A validated run configuration: model, kernel, parameters and solver settings.
#[pyclass(frozen)]
struct Config {
    inner: RunConfig,
}

#[pymethods]
impl Config {
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        config::preset(name).map(Self::wrap).map_err(err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        config::parse_toml(text).map(Self::wrap).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        config::parse_json(text).map(Self::wrap).map_err(err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        config::load_config(&path).map(Self::wrap).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn kernel(&self) -> PyResult<Kernel> {
        Ok(Kernel {
            inner: self.inner.spectral().map_err(err)?,
        })
    }

    fn kernel_summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let s = self.inner.spectral().map_err(err)?;
        to_py(py, &kernel_summary(&s, self.inner.model.sigma).map_err(err)?)
    }

    #[pyo3(signature = (k_max = None))]
    fn spectrum<'py>(&self, py: Python<'py>, k_max: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
        let (system, s) = self.parts()?;
        to_py(py, &spectrum(&system, &s, k_max.unwrap_or(s.k_max)))
    }

    /// Linear-stability verdict of the homogeneous state (two species only).
    fn stability<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let (system, s) = self.parts()?;
        let System::TwoSpecies(p) = system else {
            return Err(PyValueError::new_err("stability verdict needs a two_species model"));
        };
        let sum = kernel_summary(&s, p.sigma).map_err(err)?;
        to_py(py, &stability_verdict(&p, &sum))
    }

    fn bifurcation_points<'py>(&self, py: Python<'py>, param: &str) -> PyResult<Bound<'py, PyAny>> {
        let (system, s) = self.parts()?;
        let cat = catalog_for(param_kind(param)?, &system, &s).map_err(err)?;
        to_py(py, &cat.points)
    }

    /// Points where the homogeneous state changes stability as `param` varies.
    fn critical_stability<'py>(&self, py: Python<'py>, param: &str) -> PyResult<Bound<'py, PyAny>> {
        let (system, s) = self.parts()?;
        let System::TwoSpecies(p) = system else {
            return Err(PyValueError::new_err("critical stability needs a two_species model"));
        };
        let sum = kernel_summary(&s, p.sigma).map_err(err)?;
        let report = match param_kind(param)? {
            ParamKind::Alpha1 => critical_stability_alpha1(&p, &sum, &s),
            ParamKind::Gamma => critical_stability_gamma(&p, &sum, &s),
            ParamKind::ScalarAlpha => return Err(PyValueError::new_err("use alpha1 or gamma")),
        };
        to_py(py, &report)
    }

    /// Fixed-point iteration. With `param` and `amplitude` the seed is the
    /// branch expansion at the first bifurcation point for that parameter.
    #[pyo3(signature = (param = None, amplitude = None))]
    fn solve<'py>(&self, py: Python<'py>, param: Option<&str>, amplitude: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        let system = self.inner.system().map_err(err)?;
        let disc = self.inner.discrete().map_err(err)?;
        let mut opts = self.inner.solver_options();
        if let (Some(param), Some(s)) = (param, amplitude) {
            let cat = catalog_for(param_kind(param)?, &system, &disc.kernel).map_err(err)?;
            let bp = cat
                .points
                .first()
                .ok_or_else(|| PyValueError::new_err("no bifurcation point to seed from"))?;
            opts.seed = Some(branch_expansion(bp, s, &disc.grid()));
        }
        let (state, report, energy) = py
            .detach(|| {
                let (state, report) = fixed_point_solve(&system, &disc, &opts)?;
                let energy = free_energy(&state, &system, &disc)?;
                Ok::<_, aggdiff::Error>((state, report, energy))
            })
            .map_err(err)?;
        let out = serde_json::json!({
            "x": state.grid.nodes(),
            "components": state.components,
            "report": report,
            "free_energy": energy,
        });
        to_py(py, &out)
    }

    /// Time-steps from 1/L + amplitude * w_k in every component.
    #[pyo3(signature = (t_end = None, dt = None, amplitude = 0.01, k = 1))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        t_end: Option<f64>,
        dt: Option<f64>,
        amplitude: f64,
        k: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let system = self.inner.system().map_err(err)?;
        let disc = self.inner.discrete().map_err(err)?;
        let mut opts = self.inner.stepper_options();
        if let Some(t) = t_end {
            opts.t_end = t;
        }
        if let Some(dt) = dt {
            opts.dt = dt;
            opts.sample_dt = opts.sample_dt.max(dt);
        }
        let u0 = GridState::mode_perturbation(disc.grid(), k, &vec![amplitude; system.species()]);
        let traj = py.detach(|| run_simulation(&u0, &system, &disc, &opts)).map_err(err)?;
        let fin = traj.final_state();
        let out = serde_json::json!({
            "samples": traj.samples,
            "outcome": traj.outcome,
            "max_mass_error": traj.max_mass_error,
            "x": fin.grid.nodes(),
            "final": fin.components,
        });
        to_py(py, &out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(preset={:?}, model={:?}, N={})",
            self.inner.preset, self.inner.model.kind, self.inner.model.n
        )
    }
}

impl Config {
    fn wrap(inner: RunConfig) -> Self {
        Self { inner }
    }

    fn parts(&self) -> PyResult<(System, SpectralKernel)> {
        Ok((self.inner.system().map_err(err)?, self.inner.spectral().map_err(err)?))
    }
}

/// (name, description) of every built-in preset.
#[pyfunction]
fn presets() -> Vec<(&'static str, &'static str)> {
    config::PRESETS.to_vec()
}

#[pymodule]
fn pyaggdiff(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_class::<Config>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
