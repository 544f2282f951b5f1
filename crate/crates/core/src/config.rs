//! Run configuration: TOML (or JSON) with sections `[model]`, `[kernel]`,
//! `[params]`, `[solver]`, `[output]`, and an optional top-level `preset`
//! whose values are overlaid by whatever the file sets explicitly.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::dynamics::StepperOptions;
use crate::emit::Format;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::kernels::{cosine_transform, KernelSpec, SpectralKernel};
use crate::model::{Discrete, System};
use crate::stability::{ScalarParams, TwoSpeciesParams};
use crate::stationary::SolverOptions;

const SECTIONS: [&str; 5] = ["model", "kernel", "params", "solver", "output"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Scalar,
    TwoSpecies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    pub sigma: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    /// Defaults to N/2 - 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
}

fn default_n() -> usize {
    256
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "plus_one")]
    pub chi1: i32,
    #[serde(default = "plus_one")]
    pub chi2: i32,
}

fn plus_one() -> i32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub dt: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    pub dealias: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverOptions::default();
        let d = StepperOptions::default();
        Self {
            theta: s.theta,
            tol: s.tol,
            max_iter: s.max_iter,
            dt: d.dt,
            t_end: d.t_end,
            sample_dt: d.sample_dt,
            dealias: d.dealias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            format: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub model: ModelSection,
    pub kernel: KernelSpec,
    pub params: ParamsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

pub const PRESETS: [(&str, &str); 5] = [
    ("scalar_tophat_fig1", "scalar, repulsive top-hat R = L/10, L = 2pi, sigma = 1"),
    ("P1", "two species, (chi1 a1, chi2 a2, gamma) = (1.5, 1.0, 1.5), repulsive top-hat R = L/10"),
    ("P2", "two species, (chi1 a1, chi2 a2, gamma) = (1.5, -4.35, 1.5), repulsive top-hat R = L/10"),
    ("P3_adhesion", "two species, (a1, a2, gamma) = (3.5, 6.0, 8.8), attractive top-hat R = 1.25, chi = +1"),
    ("cosine_exact", "W = -cos x on L = 2pi, sigma = 1; a1 = a2 = gamma = 1, scalar alpha = 2.2"),
];

fn preset_value(name: &str) -> Option<Value> {
    let l = 2.0 * PI;
    let repulsive = json!({"type": "tophat", "R": l / 10.0, "sign": 1});
    let model2 = json!({"type": "two_species", "sigma": 1.0, "L": l});
    let v = match name {
        "scalar_tophat_fig1" => json!({
            "model": {"type": "scalar", "sigma": 1.0, "L": l},
            "kernel": repulsive,
            "params": {"alpha": 1.0},
        }),
        "P1" => json!({
            "model": model2,
            "kernel": repulsive,
            "params": {"alpha1": 1.5, "alpha2": 1.0, "gamma": 1.5, "chi1": 1, "chi2": 1},
        }),
        "P2" => json!({
            "model": model2,
            "kernel": repulsive,
            "params": {"alpha1": 1.5, "alpha2": 4.35, "gamma": 1.5, "chi1": 1, "chi2": -1},
        }),
        "P3_adhesion" => json!({
            "model": model2,
            "kernel": {"type": "tophat", "R": 1.25, "sign": -1},
            "params": {"alpha1": 3.5, "alpha2": 6.0, "gamma": 8.8, "chi1": 1, "chi2": 1},
        }),
        "cosine_exact" => json!({
            "model": model2,
            "kernel": {"type": "cosine", "m": 1, "amplitude": -1.0},
            "params": {"alpha": 2.2, "alpha1": 1.0, "alpha2": 1.0, "gamma": 1.0, "chi1": 1, "chi2": 1},
        }),
        _ => return None,
    };
    Some(v)
}

pub fn preset(name: &str) -> Result<RunConfig> {
    from_value(json!({ "preset": name }))
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                // A kernel of a different type replaces the preset kernel wholesale.
                let replace = k == "kernel" && b.get("kernel").and_then(|x| x.get("type")) != v.get("type");
                match b.get_mut(&k) {
                    Some(slot) if !replace => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn unknown_key(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"))
        .unwrap_or("")
        .to_string()
}

fn section<T: DeserializeOwned>(root: &Map<String, Value>, name: &str) -> Result<Option<T>> {
    match root.get(name) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone()).map(Some).map_err(|e| {
            let msg = e.to_string();
            Error::config(name, &unknown_key(&msg), msg)
        }),
    }
}

/// Build a validated config from a structured value, expanding any preset.
pub fn from_value(raw: Value) -> Result<RunConfig> {
    let Value::Object(user) = raw else {
        return Err(Error::config("", "", "configuration must be a table"));
    };
    for k in user.keys() {
        if k != "preset" && !SECTIONS.contains(&k.as_str()) {
            return Err(Error::config(k, "", format!("unknown section `{k}`")));
        }
    }
    let preset = match user.get("preset") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(Error::config("", "preset", "preset must be a string")),
    };
    let mut root = Value::Object(Map::new());
    if let Some(name) = &preset {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
        root = preset_value(name).ok_or_else(|| {
            Error::config("", "preset", format!("unknown preset `{name}`; known: {}", names.join(", ")))
        })?;
    }
    merge(&mut root, Value::Object(user));
    let Value::Object(root) = root else { unreachable!() };

    let need = |name: &str| Error::config(name, "", format!("missing section [{name}]"));
    let cfg = RunConfig {
        preset,
        model: section(&root, "model")?.ok_or_else(|| need("model"))?,
        kernel: section(&root, "kernel")?.ok_or_else(|| need("kernel"))?,
        params: section(&root, "params")?.ok_or_else(|| need("params"))?,
        solver: section(&root, "solver")?.unwrap_or_default(),
        output: section(&root, "output")?.unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_toml(text: &str) -> Result<RunConfig> {
    let v: Value = toml::from_str(text).map_err(|e| Error::config("", "", e.to_string()))?;
    from_value(v)
}

pub fn parse_json(text: &str) -> Result<RunConfig> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::config("", "", e.to_string()))?;
    from_value(v)
}

/// JSON when the extension is `.json`, TOML otherwise. Tabulated kernel
/// files resolve relative to the config's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_json(&text)?,
        _ => parse_toml(&text)?,
    };
    cfg.kernel = cfg
        .kernel
        .resolve(path.parent())
        .map_err(|e| Error::config("kernel", "path", e.to_string()))?;
    Ok(cfg)
}

fn check(ok: bool, section: &str, key: &str, message: String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(section, key, message))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        check(m.sigma.is_finite() && m.sigma > 0.0, "model", "sigma", format!("sigma > 0 violated: {}", m.sigma))?;
        check(m.length.is_finite() && m.length > 0.0, "model", "L", format!("L > 0 violated: {}", m.length))?;
        check(m.n >= 16 && m.n % 2 == 0, "model", "N", format!("N even and >= 16 violated: {}", m.n))?;
        let k_max = self.k_max();
        check(
            k_max >= 1 && k_max < m.n / 2,
            "model",
            "k_max",
            format!("1 <= K_max < N/2 violated: K_max = {k_max}, N = {}", m.n),
        )?;

        match &self.kernel {
            KernelSpec::TopHat { radius, sign } => {
                check(
                    *radius > 0.0 && *radius < m.length / 2.0,
                    "kernel",
                    "R",
                    format!("0 < R < L/2 violated: R = {radius}, L/2 = {}", m.length / 2.0),
                )?;
                check(*sign == 1 || *sign == -1, "kernel", "sign", format!("sign in {{+1, -1}} violated: {sign}"))?;
            }
            KernelSpec::CosineMode { m: mode, amplitude } => {
                check(*mode >= 1, "kernel", "m", "m >= 1 violated".into())?;
                check(amplitude.is_finite(), "kernel", "amplitude", "amplitude must be finite".into())?;
            }
            KernelSpec::Tabulated { path, samples } => {
                check(
                    path.is_some() || !samples.is_empty(),
                    "kernel",
                    "samples",
                    "tabulated kernel needs samples or a path".into(),
                )?;
            }
        }

        let p = &self.params;
        for (key, v) in [("alpha", p.alpha), ("alpha1", p.alpha1), ("alpha2", p.alpha2), ("gamma", p.gamma)] {
            if let Some(v) = v {
                check(v.is_finite() && v >= 0.0, "params", key, format!("{key} >= 0 violated: {v}"))?;
            }
        }
        for (key, v) in [("chi1", p.chi1), ("chi2", p.chi2)] {
            check(v == 1 || v == -1, "params", key, format!("{key} in {{+1, -1}} violated: {v}"))?;
        }
        match m.kind {
            ModelKind::Scalar => check(p.alpha.is_some(), "params", "alpha", "scalar model needs alpha".into())?,
            ModelKind::TwoSpecies => {
                for (key, v) in [("alpha1", p.alpha1), ("alpha2", p.alpha2), ("gamma", p.gamma)] {
                    check(v.is_some(), "params", key, format!("two-species model needs {key}"))?;
                }
            }
        }

        let s = &self.solver;
        check(s.theta > 0.0 && s.theta <= 1.0, "solver", "theta", format!("0 < theta <= 1 violated: {}", s.theta))?;
        check(s.tol > 0.0, "solver", "tol", format!("tol > 0 violated: {}", s.tol))?;
        check(s.max_iter > 0, "solver", "max_iter", "max_iter > 0 violated".into())?;
        check(s.dt > 0.0 && s.dt.is_finite(), "solver", "dt", format!("dt > 0 violated: {}", s.dt))?;
        check(s.t_end > 0.0 && s.t_end.is_finite(), "solver", "t_end", format!("t_end > 0 violated: {}", s.t_end))?;
        check(s.sample_dt >= s.dt, "solver", "sample_dt", "sample_dt >= dt violated".into())?;
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        self.model.k_max.unwrap_or(self.model.n / 2 - 1)
    }

    pub fn system(&self) -> Result<System> {
        let m = &self.model;
        let p = &self.params;
        Ok(match m.kind {
            ModelKind::Scalar => System::Scalar(ScalarParams::new(m.sigma, m.length, p.alpha.unwrap_or(0.0))?),
            ModelKind::TwoSpecies => System::TwoSpecies(TwoSpeciesParams::new(
                m.sigma,
                m.length,
                (p.alpha1.unwrap_or(0.0), p.alpha2.unwrap_or(0.0), p.gamma.unwrap_or(0.0)),
                (p.chi1, p.chi2),
            )?),
        })
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.model.length, self.model.n)
    }

    pub fn spectral(&self) -> Result<SpectralKernel> {
        cosine_transform(&self.kernel, self.model.length, self.k_max())
    }

    pub fn discrete(&self) -> Result<Discrete> {
        Discrete::new(self.grid()?, self.spectral()?)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            theta: self.solver.theta,
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            seed: None,
        }
    }

    pub fn stepper_options(&self) -> StepperOptions {
        StepperOptions {
            dt: self.solver.dt,
            t_end: self.solver.t_end,
            dealias: self.solver.dealias,
            sample_dt: self.solver.sample_dt,
            ..StepperOptions::default()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        crate::emit::to_json(self)
    }
}
