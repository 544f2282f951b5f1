//! Stationary states as fixed points of the Gibbs map T, free energy and
//! dissipation, and natural continuation along bifurcating branches.

use serde::{Deserialize, Serialize};

use crate::catalog::{branch_expansion, BifurcationPoint};
use crate::emit::{CsvRecord, Field};
use crate::error::{Error, Result};
use crate::model::{Discrete, GridState, ParamKind, System};

/// Largest |exponent| accepted inside exp().
pub const EXP_LIMIT: f64 = 700.0;

/// T_i u = exp(-phi_i / sigma) / Z_i, normalized to unit mass on the grid.
pub fn apply_t(state: &GridState, system: &System, disc: &Discrete) -> Result<GridState> {
    state.check_compatible(system)?;
    let grid = disc.grid();
    let sigma = system.sigma();
    let phi = disc.potentials(system, &state.components);
    let mut components = Vec::with_capacity(phi.len());
    for p in phi {
        let expo: Vec<f64> = p.iter().map(|v| -v / sigma).collect();
        let max = expo.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let min = expo.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        if !(max.abs() <= EXP_LIMIT && min.abs() <= EXP_LIMIT) {
            return Err(Error::ExponentOverflow {
                max_exponent: if max.abs() > min.abs() { max } else { min },
            });
        }
        let num: Vec<f64> = expo.iter().map(|e| (e - max).exp()).collect();
        let z = grid.integrate(&num);
        components.push(num.into_iter().map(|v| v / z).collect());
    }
    Ok(GridState { grid, components })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting state; homogeneous when absent.
    #[serde(skip)]
    pub seed: Option<GridState>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            theta: 0.5,
            tol: 1e-10,
            max_iter: 100_000,
            seed: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidParams(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParams(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParams("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub free_energy: f64,
    pub dissipation: f64,
    pub oscillation: bool,
    /// Iterations at which F rose by more than 1e-12 (1 + |F|).
    pub energy_increases: Vec<usize>,
    pub diagnostic: Option<String>,
}

const WINDOW: usize = 50;

pub fn fixed_point_solve(system: &System, disc: &Discrete, opts: &SolverOptions) -> Result<(GridState, ConvergenceReport)> {
    opts.validate()?;
    let grid = disc.grid();
    let mut u = match &opts.seed {
        Some(s) => {
            s.check_compatible(system)?;
            s.symmetrized()
        }
        None => GridState::homogeneous(grid, system.species()),
    };
    if let Some((i, v)) = u
        .components
        .iter()
        .flatten()
        .copied()
        .enumerate()
        .find(|(_, v)| !(*v > 0.0))
    {
        return Err(Error::NonPositiveDensity { index: i, value: v });
    }

    let theta = opts.theta;
    let mut history: Vec<f64> = Vec::new();
    let mut energy_increases = Vec::new();
    let mut oscillation = false;
    let mut last_f = free_energy(&u, system, disc)?.total;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        let tu = apply_t(&u, system, disc)?;
        residual = u.distance(&tu);
        if residual <= opts.tol {
            converged = true;
            break;
        }
        history.push(residual);
        if history.len() > WINDOW {
            let w = &history[history.len() - WINDOW - 1..];
            let rises = w.windows(2).filter(|p| p[1] > p[0]).count();
            if rises >= WINDOW / 5 && w[WINDOW] >= w[0] {
                oscillation = true;
            }
        }
        for (a, b) in u.components.iter_mut().zip(&tu.components) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = (1.0 - theta) * *x + theta * y;
            }
        }
        iterations += 1;
        let f = free_energy(&u, system, disc)?.total;
        if f > last_f + 1e-12 * (1.0 + last_f.abs()) {
            log::debug!("free energy rose at iteration {iterations}: {last_f} -> {f}");
            energy_increases.push(iterations);
        }
        last_f = f;
    }

    let fe = free_energy(&u, system, disc)?;
    let mut diagnostic = None;
    if oscillation {
        diagnostic = Some(format!(
            "residual non-monotone over a {WINDOW}-iteration window; try a smaller theta than {theta}"
        ));
    } else if !converged {
        diagnostic = Some(format!("max_iter {} reached at residual {residual:e}", opts.max_iter));
    }
    Ok((
        u,
        ConvergenceReport {
            converged,
            iterations,
            residual,
            free_energy: fe.total,
            dissipation: fe.dissipation,
            oscillation,
            energy_increases,
            diagnostic,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyBreakdown {
    pub entropy: f64,
    pub interaction: f64,
    pub total: f64,
    pub dissipation: f64,
}

pub fn free_energy(state: &GridState, system: &System, disc: &Discrete) -> Result<FreeEnergyBreakdown> {
    state.check_compatible(system)?;
    let grid = disc.grid();
    for (ci, u) in state.components.iter().enumerate() {
        if let Some((j, v)) = u.iter().copied().enumerate().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::NonPositiveDensity {
                index: ci * grid.n + j,
                value: v,
            });
        }
    }
    let sigma = system.sigma();
    let phi = disc.potentials(system, &state.components);
    let mut entropy = 0.0;
    let mut interaction = 0.0;
    let mut dissipation = 0.0;
    for (u, p) in state.components.iter().zip(&phi) {
        let logu: Vec<f64> = u.iter().map(|v| v.ln()).collect();
        entropy += grid.inner(u, &logu);
        interaction += grid.inner(u, p);
        let f: Vec<f64> = logu.iter().zip(p).map(|(l, q)| sigma * l + q).collect();
        let df = disc.ops.derivative(&f);
        let sq: Vec<f64> = df.iter().map(|d| d * d).collect();
        dissipation += grid.inner(u, &sq);
    }
    Ok(FreeEnergyBreakdown {
        entropy,
        interaction,
        total: sigma * entropy + 0.5 * interaction,
        dissipation,
    })
}

/// L2 norm of (sigma u_x + u phi_x)_x summed over components.
pub fn stationarity_residual(state: &GridState, system: &System, disc: &Discrete) -> Result<f64> {
    state.check_compatible(system)?;
    let grid = disc.grid();
    let sigma = system.sigma();
    let phi = disc.potentials(system, &state.components);
    let mut total = 0.0;
    for (u, p) in state.components.iter().zip(&phi) {
        let ux = disc.ops.derivative(u);
        let px = disc.ops.derivative(p);
        let flux: Vec<f64> = (0..grid.n).map(|j| sigma * ux[j] + u[j] * px[j]).collect();
        let r = disc.ops.derivative(&flux);
        total += grid.inner(&r, &r);
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchEntry {
    pub nu: f64,
    pub amplitude: f64,
    pub free_energy: f64,
    pub residual: f64,
    pub iters: usize,
}

impl CsvRecord for BranchEntry {
    fn header() -> Vec<&'static str> {
        vec!["nu", "amplitude", "free_energy", "residual", "iters"]
    }

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Num(self.nu),
            Field::Num(self.amplitude),
            Field::Num(self.free_energy),
            Field::Num(self.residual),
            Field::Int(self.iters as i64),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTrace {
    pub kind: ParamKind,
    pub k: usize,
    pub entries: Vec<BranchEntry>,
    /// Per-entry projections of every component on w_k.
    pub projections: Vec<Vec<f64>>,
    pub collapsed: bool,
    pub diagnostic: Option<String>,
    #[serde(skip)]
    pub states: Vec<GridState>,
}

/// Natural continuation from `bp` over `steps` equal steps of [start, end].
/// A start at the bifurcation value itself is recorded analytically.
pub fn trace_branch(
    system: &System,
    kind: ParamKind,
    disc: &Discrete,
    bp: &BifurcationPoint,
    (start, end): (f64, f64),
    steps: usize,
    opts: &SolverOptions,
) -> Result<BranchTrace> {
    if bp.kind != kind {
        return Err(Error::InvalidParams(format!(
            "bifurcation point is a {} point, continuation asked for {}",
            bp.kind.label(),
            kind.label()
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidParams("steps must be positive".into()));
    }
    if !bp.simple {
        return Err(Error::InvalidParams("continuation needs a simple bifurcation point".into()));
    }
    let grid = disc.grid();
    let mut trace = BranchTrace {
        kind,
        k: bp.k,
        entries: Vec::new(),
        projections: Vec::new(),
        collapsed: false,
        diagnostic: None,
        states: Vec::new(),
    };
    let nus: Vec<f64> = (0..=steps)
        .map(|i| start + (end - start) * i as f64 / steps as f64)
        .collect();
    let mut seed: Option<GridState> = None;
    for (i, &nu) in nus.iter().enumerate() {
        let sys = system.with_param(kind, nu)?;
        if i == 0 && (nu - bp.value).abs() <= 1e-12 * bp.value.abs().max(1.0) {
            let hom = GridState::homogeneous(grid, sys.species());
            let fe = free_energy(&hom, &sys, disc)?;
            trace.entries.push(BranchEntry {
                nu,
                amplitude: 0.0,
                free_energy: fe.total,
                residual: 0.0,
                iters: 0,
            });
            trace.projections.push(vec![0.0; sys.species()]);
            trace.states.push(hom);
            continue;
        }
        let start_state = match seed.take() {
            Some(s) => s,
            None => {
                let s = bp
                    .predict_amplitude(nu)
                    .unwrap_or_else(|| bp.predict_amplitude(2.0 * bp.value - nu).unwrap_or(0.0))
                    .max(1e-3);
                branch_expansion(bp, s, &grid)
            }
        };
        let o = SolverOptions {
            seed: Some(start_state),
            ..opts.clone()
        };
        let (u, report) = fixed_point_solve(&sys, disc, &o)?;
        let proj = u.amplitudes(bp.k);
        trace.entries.push(BranchEntry {
            nu,
            amplitude: proj[0],
            free_energy: report.free_energy,
            residual: report.residual,
            iters: report.iterations,
        });
        trace.projections.push(proj.clone());
        trace.states.push(u.clone());
        if !report.converged {
            trace.diagnostic = Some(format!(
                "solver did not converge at nu = {nu}: {}",
                report.diagnostic.unwrap_or_default()
            ));
            break;
        }
        if proj[0].abs() < 10.0 * opts.tol {
            trace.collapsed = true;
            trace.diagnostic = Some(format!("branch collapsed to the homogeneous state at nu = {nu}"));
            break;
        }
        seed = Some(u);
    }
    Ok(trace)
}
