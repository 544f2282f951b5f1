//! Pseudo-spectral time stepping for the aggregation-diffusion system:
//!
//!   d_t u_i = sigma d_xx u_i + d_x(u_i d_x phi_i),  phi_i = sum_j a_ij W * u_j
//!
//! Diffusion is absorbed in an integrating factor exp(-sigma q^2 t); the
//! advection term is advanced with classical RK4 in the rotated variables.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::catalog::{BifurcationPoint, Criticality};
use crate::emit::{CsvRecord, Field};
use crate::error::{Error, Result};
use crate::kernels::KernelClass;
use crate::model::{Discrete, GridState, ParamKind, System};

/// Negative densities below this abort the run.
pub const POSITIVITY_FLOOR: f64 = -1e-8;
/// Stopping threshold for both convergence flags.
pub const STOP_TOL: f64 = 1e-10;
/// A stalled state this close to homogeneous is still decaying, not a pattern.
pub const PATTERN_MIN_DIST: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepperOptions {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    /// Interval between recorded samples (and between states compared by
    /// the pattern-convergence test).
    pub sample_dt: f64,
    pub snapshots: Vec<f64>,
    /// Abort when F rises by more than 1e-8 (1 + |F|) in one step.
    pub check_energy: bool,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self {
            dt: 0.05,
            t_end: 100.0,
            dealias: true,
            sample_dt: 1.0,
            snapshots: Vec::new(),
            check_energy: true,
        }
    }
}

impl StepperOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParams(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.sample_dt >= self.dt) {
            return Err(Error::InvalidParams("sample_dt must be at least dt".into()));
        }
        Ok(())
    }
}

type Spectrum = Vec<Complex64>;

struct Stepper<'a> {
    system: &'a System,
    disc: &'a Discrete,
    dealias: bool,
    coupling: [[f64; 2]; 2],
}

impl<'a> Stepper<'a> {
    fn new(system: &'a System, disc: &'a Discrete, dealias: bool) -> Self {
        Self {
            system,
            disc,
            dealias,
            coupling: system.coupling(),
        }
    }

    fn to_hat(&self, state: &GridState) -> Vec<Spectrum> {
        state.components.iter().map(|u| self.disc.ops.forward(u)).collect()
    }

    fn to_state(&self, hat: &[Spectrum]) -> GridState {
        GridState {
            grid: self.disc.grid(),
            components: hat.iter().map(|h| self.disc.ops.inverse(h.clone())).collect(),
        }
    }

    fn multiplier(&self, j: usize) -> f64 {
        let k = self.disc.ops.wavenumber(j).unsigned_abs() as usize;
        if k == 0 {
            0.0
        } else {
            self.disc.kernel.multiplier(k)
        }
    }

    fn keep(&self, j: usize) -> bool {
        let n = self.disc.grid().n as u64;
        !self.dealias || 3 * self.disc.ops.wavenumber(j).unsigned_abs() <= n
    }

    /// Spectrum of d_x(u_i d_x phi_i) and the largest |d_x phi_i|.
    fn rhs(&self, hat: &[Spectrum]) -> (Vec<Spectrum>, f64) {
        let ops = &self.disc.ops;
        let n = self.disc.grid().n;
        let s = hat.len();
        let mut vmax = 0.0_f64;
        let mut out = Vec::with_capacity(s);
        for i in 0..s {
            let mut phi: Spectrum = (0..n)
                .map(|j| {
                    let m = self.multiplier(j);
                    (0..s).map(|l| hat[l][j] * (self.coupling[i][l] * m)).sum()
                })
                .collect();
            ops.differentiate_hat(&mut phi);
            let v = ops.inverse(phi);
            let u = ops.inverse(hat[i].clone());
            vmax = v.iter().fold(vmax, |m, x| m.max(x.abs()));
            let prod: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
            let mut p = ops.forward(&prod);
            for (j, c) in p.iter_mut().enumerate() {
                if !self.keep(j) {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
            ops.differentiate_hat(&mut p);
            out.push(p);
        }
        (out, vmax)
    }

    /// Step bound from the linearized advection symbol at the homogeneous state.
    fn linear_dt(&self) -> f64 {
        let a = self.coupling;
        let rho = if self.system.species() == 1 {
            a[0][0].abs()
        } else {
            let tr = 0.5 * (a[0][0] + a[1][1]);
            let r = (0.5 * (a[0][0] - a[1][1])).hypot(a[0][1]);
            (tr.abs() + r).max((tr - r).abs())
        };
        let l = self.disc.grid().length;
        let n = self.disc.grid().n;
        let stiff = (0..n)
            .filter(|&j| self.keep(j))
            .map(|j| {
                let q = self.disc.ops.angular(j);
                q * q * self.multiplier(j).abs() * rho / l
            })
            .fold(0.0, f64::max);
        if stiff > 0.0 {
            0.5 * 2.78 / stiff
        } else {
            f64::INFINITY
        }
    }

    fn ifrk4(&self, hat: &[Spectrum], dt: f64) -> (Vec<Spectrum>, f64) {
        let ops = &self.disc.ops;
        let sigma = self.system.sigma();
        let n = self.disc.grid().n;
        let e: Vec<f64> = (0..n).map(|j| (-sigma * ops.angular(j).powi(2) * dt).exp()).collect();
        let e2: Vec<f64> = (0..n).map(|j| (-sigma * ops.angular(j).powi(2) * dt * 0.5).exp()).collect();
        let combine = |base: &[Spectrum], f: &dyn Fn(usize, usize, Complex64) -> Complex64| -> Vec<Spectrum> {
            base.iter()
                .enumerate()
                .map(|(i, b)| b.iter().enumerate().map(|(j, c)| f(i, j, *c)).collect())
                .collect()
        };
        let (k1, v1) = self.rhs(hat);
        let a = combine(hat, &|i, j, c| e2[j] * (c + k1[i][j] * (0.5 * dt)));
        let (k2, v2) = self.rhs(&a);
        let b = combine(hat, &|i, j, c| e2[j] * c + k2[i][j] * (0.5 * dt));
        let (k3, v3) = self.rhs(&b);
        let cst = combine(hat, &|i, j, c| e[j] * c + e2[j] * k3[i][j] * dt);
        let (k4, v4) = self.rhs(&cst);
        let next = combine(hat, &|i, j, c| {
            e[j] * c
                + (e[j] * k1[i][j] + e2[j] * (k2[i][j] + k3[i][j]) * 2.0 + k4[i][j]) * (dt / 6.0)
        });
        (next, v1.max(v2).max(v3).max(v4))
    }
}

/// One integrating-factor RK4 step of size dt.
pub fn step(state: &GridState, system: &System, disc: &Discrete, dt: f64, dealias: bool) -> Result<GridState> {
    state.check_compatible(system)?;
    let st = Stepper::new(system, disc, dealias);
    let (next, _) = st.ifrk4(&st.to_hat(state), dt);
    let out = st.to_state(&next);
    let min = out.min();
    if min < POSITIVITY_FLOOR {
        return Err(Error::PositivityBreach { time: dt, min });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mass_err_1: f64,
    pub mass_err_2: f64,
    pub min_u: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub l2_dist: f64,
}

impl CsvRecord for Diagnostics {
    fn header() -> Vec<&'static str> {
        vec!["t", "mass_err_1", "mass_err_2", "min_u", "H", "F", "l2_dist"]
    }

    fn fields(&self) -> Vec<Field> {
        [self.t, self.mass_err_1, self.mass_err_2, self.min_u, self.h, self.f, self.l2_dist]
            .into_iter()
            .map(Field::Num)
            .collect()
    }
}

/// Relative entropy to 1/L and free energy, with log floored at 1e-30.
fn entropy_and_energy(state: &GridState, system: &System, disc: &Discrete) -> (f64, f64) {
    let grid = disc.grid();
    let l = grid.length;
    let sigma = system.sigma();
    let phi = disc.potentials(system, &state.components);
    let mut h = 0.0;
    let mut s = 0.0;
    let mut e = 0.0;
    for (u, p) in state.components.iter().zip(&phi) {
        // u log(L u) - u + 1/L integrates to H for unit mass and avoids
        // cancellation near the homogeneous state.
        h += grid.integrate(
            &u.iter()
                .map(|&v| {
                    let d = l * v.max(1e-30) - 1.0;
                    (v.max(1e-30) * d.ln_1p() - v + 1.0 / l).max(0.0)
                })
                .collect::<Vec<_>>(),
        );
        s += grid.integrate(&u.iter().map(|&v| v * v.max(1e-30).ln()).collect::<Vec<_>>());
        e += grid.inner(u, p);
    }
    (h, sigma * s + 0.5 * e)
}

pub fn diagnostics(t: f64, state: &GridState, system: &System, disc: &Discrete) -> Diagnostics {
    let masses = state.masses();
    let (h, f) = entropy_and_energy(state, system, disc);
    Diagnostics {
        t,
        mass_err_1: masses[0] - 1.0,
        mass_err_2: masses.get(1).map_or(0.0, |m| m - 1.0),
        min_u: state.min(),
        h,
        f,
        l2_dist: state.distance_to_homogeneous(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ConvergedToHomogeneous,
    ConvergedToPattern,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Diagnostics>,
    pub outcome: Outcome,
    pub max_mass_error: f64,
    pub substeps: usize,
    #[serde(skip)]
    pub snapshots: Vec<(f64, GridState)>,
    #[serde(skip)]
    pub final_state: Option<GridState>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|d| d.t).collect()
    }

    pub fn final_state(&self) -> &GridState {
        self.final_state.as_ref().expect("trajectory carries its final state")
    }
}

pub fn simulate(u0: &GridState, system: &System, disc: &Discrete, opts: &StepperOptions) -> Result<Trajectory> {
    opts.validate()?;
    u0.check_compatible(system)?;
    if let Some(v) = u0.components.iter().flatten().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositiveDensity { index: 0, value: *v });
    }
    let st = Stepper::new(system, disc, opts.dealias);
    let lin_dt = st.linear_dt();
    let h = disc.grid().spacing();
    let steps_per_sample = (opts.sample_dt / opts.dt).round().max(1.0) as usize;
    let total_steps = (opts.t_end / opts.dt).round() as usize;

    let mut hat = st.to_hat(u0);
    let mut state = u0.clone();
    let mut samples = vec![diagnostics(0.0, &state, system, disc)];
    let mut last_f = samples[0].f;
    let mut previous_sample = state.clone();
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = opts.snapshots.clone();
    pending.sort_by(f64::total_cmp);
    take_snapshots(&mut pending, &mut snapshots, 0.0, &state, opts.dt);
    let mut max_mass_error = mass_error(&samples[0]);
    let mut outcome = Outcome::Inconclusive;
    let mut substeps = 0;
    let mut vmax = st.rhs(&hat).1;

    if state.distance_to_homogeneous() <= STOP_TOL {
        outcome = Outcome::ConvergedToHomogeneous;
    }
    let mut n = 0;
    while outcome == Outcome::Inconclusive && n < total_steps {
        // Subdivide dt to honour the advective CFL and the linear bound.
        let allowed = lin_dt.min(if vmax > 0.0 { 0.5 * h / vmax } else { f64::INFINITY });
        let m = (opts.dt / allowed).ceil().max(1.0) as usize;
        let sub = opts.dt / m as f64;
        for _ in 0..m {
            let (next, v) = st.ifrk4(&hat, sub);
            hat = next;
            vmax = v;
            substeps += 1;
        }
        n += 1;
        let t = n as f64 * opts.dt;
        state = st.to_state(&hat);
        let min = state.min();
        if min < POSITIVITY_FLOOR {
            return Err(Error::PositivityBreach { time: t, min });
        }
        let d = diagnostics(t, &state, system, disc);
        max_mass_error = max_mass_error.max(mass_error(&d));
        if opts.check_energy && d.f > last_f + 1e-8 * (1.0 + last_f.abs()) {
            return Err(Error::EnergyIncrease {
                time: t,
                before: last_f,
                after: d.f,
            });
        }
        last_f = d.f;
        take_snapshots(&mut pending, &mut snapshots, t, &state, opts.dt);
        if n % steps_per_sample == 0 || n == total_steps {
            samples.push(d);
            if d.l2_dist <= STOP_TOL {
                outcome = Outcome::ConvergedToHomogeneous;
            } else if n % steps_per_sample == 0
                && d.l2_dist > PATTERN_MIN_DIST
                && state.distance(&previous_sample) <= STOP_TOL
            {
                outcome = Outcome::ConvergedToPattern;
            }
            previous_sample = state.clone();
        }
    }
    Ok(Trajectory {
        samples,
        outcome,
        max_mass_error,
        substeps,
        snapshots,
        final_state: Some(state),
    })
}

fn mass_error(d: &Diagnostics) -> f64 {
    d.mass_err_1.abs().max(d.mass_err_2.abs())
}

fn take_snapshots(pending: &mut Vec<f64>, out: &mut Vec<(f64, GridState)>, t: f64, state: &GridState, dt: f64) {
    while let Some(&ts) = pending.first() {
        if ts <= t + 0.5 * dt {
            out.push((ts, state.clone()));
            pending.remove(0);
        } else {
            break;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayStatus {
    Checked,
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyDecay {
    pub measured_rate: f64,
    pub bound: f64,
    pub pass: bool,
    pub status: DecayStatus,
}

/// 4 pi^2 sigma / L^2 - 2 (gamma + max alpha_i) sup|W''|.
pub fn entropy_decay_bound(system: &System, disc: &Discrete) -> Result<f64> {
    if disc.kernel.class == KernelClass::TopHat {
        return Err(Error::Unsupported(
            "W_xx not bounded for a top-hat kernel; the entropy-decay hypothesis fails".into(),
        ));
    }
    let wxx = disc.kernel.second_derivative_sup()?;
    let (amax, gamma) = match system {
        System::Scalar(p) => (p.alpha, 0.0),
        System::TwoSpecies(p) => (p.alpha1.max(p.alpha2), p.gamma),
    };
    let l = system.length();
    Ok(4.0 * PI * PI * system.sigma() / (l * l) - 2.0 * (gamma * wxx + amax * wxx))
}

pub fn entropy_decay_check(u0: &GridState, system: &System, disc: &Discrete, opts: &StepperOptions) -> Result<EntropyDecay> {
    let bound = entropy_decay_bound(system, disc)?;
    if bound <= 0.0 {
        return Ok(EntropyDecay {
            measured_rate: f64::NAN,
            bound,
            pass: false,
            status: DecayStatus::Vacuous,
        });
    }
    let traj = simulate(u0, system, disc, opts)?;
    let t_last = traj.samples.last().map_or(0.0, |d| d.t);
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|d| d.t >= 0.5 * t_last && d.h > 1e-300)
        .map(|d| (d.t, d.h.ln()))
        .collect();
    let measured_rate = -slope(&pts);
    Ok(EntropyDecay {
        measured_rate,
        bound,
        pass: measured_rate >= 0.95 * bound,
        status: DecayStatus::Checked,
    })
}

/// Least-squares slope of y against x.
pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideResult {
    pub nu: f64,
    pub outcome: Outcome,
    /// Projection of each final component on w_k.
    pub projections: Vec<f64>,
    pub l2_dist: f64,
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeVerdict {
    pub below: SideResult,
    pub above: SideResult,
    /// Side on which the homogeneous state is linearly stable.
    pub stable_side: Side,
    /// Stable side relaxed to homogeneous and the other side did not.
    pub consistent: bool,
    pub predicted_amplitude: Option<f64>,
    /// |amplitude| within 15% of the branch law on the patterned side.
    pub branch_law_match: Option<bool>,
    #[serde(skip)]
    pub below_state: Option<GridState>,
    #[serde(skip)]
    pub above_state: Option<GridState>,
}

/// Runs just below and just above a point of critical stability from a
/// homogeneous state perturbed along the kernel direction.
pub fn exchange_experiment(
    bp: &BifurcationPoint,
    system: &System,
    disc: &Discrete,
    eps_param: f64,
    eps_state: f64,
    opts: &StepperOptions,
) -> Result<ExchangeVerdict> {
    if !(eps_param > 0.0 && eps_state > 0.0) {
        return Err(Error::InvalidParams("eps_param and eps_state must be positive".into()));
    }
    let kind = bp.kind;
    let grid = disc.grid();
    let amps: Vec<f64> = match (kind, bp.c) {
        (ParamKind::ScalarAlpha, _) | (_, None) => vec![eps_state],
        (_, Some(c)) => vec![eps_state, eps_state * c],
    };
    let u0 = GridState::mode_perturbation(grid, bp.k, &amps);
    let run = |nu: f64| -> Result<(SideResult, GridState)> {
        let sys = system.with_param(kind, nu)?;
        let traj = simulate(&u0, &sys, disc, opts)?;
        let fin = traj.final_state().clone();
        Ok((
            SideResult {
                nu,
                outcome: traj.outcome,
                projections: fin.amplitudes(bp.k),
                l2_dist: fin.distance_to_homogeneous(),
                final_time: traj.samples.last().map_or(0.0, |d| d.t),
            },
            fin,
        ))
    };
    let (below, below_state) = run(bp.value - eps_param)?;
    let (above, above_state) = run(bp.value + eps_param)?;
    let stable_side = match bp.criticality {
        Criticality::Supercritical => Side::Below,
        Criticality::Subcritical => Side::Above,
    };
    let (stable, unstable) = match stable_side {
        Side::Below => (&below, &above),
        Side::Above => (&above, &below),
    };
    let consistent = stable.outcome == Outcome::ConvergedToHomogeneous
        && unstable.outcome != Outcome::ConvergedToHomogeneous;
    let pattern_nu = match stable_side {
        Side::Below => above.nu,
        Side::Above => below.nu,
    };
    let predicted_amplitude = bp.predict_amplitude(pattern_nu);
    let branch_law_match = predicted_amplitude.and_then(|pred| {
        (unstable.outcome == Outcome::ConvergedToPattern)
            .then(|| (unstable.projections[0].abs() - pred).abs() <= 0.15 * pred)
    });
    Ok(ExchangeVerdict {
        below,
        above,
        stable_side,
        consistent,
        predicted_amplitude,
        branch_law_match,
        below_state: Some(below_state),
        above_state: Some(above_state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::kernels::{cosine_transform, KernelSpec};
    use crate::stability::ScalarParams;

    const L: f64 = 2.0 * PI;

    fn disc() -> Discrete {
        let g = TorusGrid::new(L, 64).unwrap();
        Discrete::new(g, cosine_transform(&KernelSpec::cosine(1, -1.0), L, 31).unwrap()).unwrap()
    }

    fn scalar(a: f64) -> System {
        System::Scalar(ScalarParams::new(1.0, L, a).unwrap())
    }

    #[test]
    fn heat_flow_is_exact_per_mode() {
        let d = disc();
        let u = GridState::mode_perturbation(d.grid(), 3, &[0.05]);
        let dt = 0.7;
        let v = step(&u, &scalar(0.0), &d, dt, true).unwrap();
        let want = 0.05 * (-9.0 * dt).exp();
        assert!((v.amplitudes(3)[0] - want).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_is_an_equilibrium() {
        let d = disc();
        let u = GridState::homogeneous(d.grid(), 1);
        let v = step(&u, &scalar(3.0), &d, 0.1, true).unwrap();
        assert!(v.distance(&u) < 1e-15);
    }

    #[test]
    fn simulate_flags_homogeneous_start() {
        let d = disc();
        let u = GridState::homogeneous(d.grid(), 1);
        let t = simulate(&u, &scalar(1.0), &d, &StepperOptions::default()).unwrap();
        assert_eq!(t.outcome, Outcome::ConvergedToHomogeneous);
    }

    #[test]
    fn tophat_entropy_bound_rejected() {
        let g = TorusGrid::new(L, 64).unwrap();
        let d = Discrete::new(g, cosine_transform(&KernelSpec::tophat(1.0, 1), L, 31).unwrap()).unwrap();
        assert!(entropy_decay_bound(&scalar(0.1), &d).is_err());
    }

    #[test]
    fn vacuous_bound_skips() {
        let d = disc();
        let u = GridState::mode_perturbation(d.grid(), 1, &[0.01]);
        let r = entropy_decay_check(&u, &scalar(1.0), &d, &StepperOptions::default()).unwrap();
        assert_eq!(r.status, DecayStatus::Vacuous);
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        assert!((slope(&pts) + 0.5).abs() < 1e-14);
    }
}
