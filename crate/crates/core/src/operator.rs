//! Derivatives of G = I - T at the homogeneous state: analytic formulas
//! against finite differences of the discrete map.
//!
//! With psi_i = sum_j a_ij W * eta_j / sigma and m_n = (1/L) int psi^n, the
//! derivatives of T at 1/L along a mean-zero direction eta are
//!
//!   DT[eta]       = -psi / L
//!   D2T[eta, eta] = (psi^2 - m_2) / L
//!   D3T[eta^3]    = (-psi^3 + 3 m_2 psi + m_3) / L
//!
//! Probes use the normalized kernel direction v = (w_k, c w_k) / sqrt(1 + c^2).
//! The curvature quotient divides by 1/(1 + c^2) to express nu''(0) in the
//! (1, c) w_k amplitude used by the branch formulas.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::BifurcationPoint;
use crate::error::{Error, Result};
use crate::kernels::{SpectralKernel, EPS_CARD};
use crate::model::{Discrete, GridState, ParamKind, System};
use crate::stationary::apply_t;

/// |det| at or below this counts as singular.
pub const EPS_BLOCK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBlock {
    pub k: usize,
    pub dim: usize,
    pub matrix: [[f64; 2]; 2],
    pub det: f64,
    pub singular: bool,
    pub kernel_direction: Option<[f64; 2]>,
}

pub fn assemble_mode_block(system: &System, spectral: &SpectralKernel, k: usize) -> ModeBlock {
    let dim = system.species();
    let a = system.coupling();
    let Some(h) = spectral.h(system.sigma(), k) else {
        return ModeBlock {
            k,
            dim,
            matrix: [[1.0, 0.0], [0.0, if dim == 2 { 1.0 } else { 0.0 }]],
            det: 1.0,
            singular: false,
            kernel_direction: None,
        };
    };
    if dim == 1 {
        let m = 1.0 + a[0][0] / h;
        let singular = m.abs() <= EPS_BLOCK;
        return ModeBlock {
            k,
            dim,
            matrix: [[m, 0.0], [0.0, 0.0]],
            det: m,
            singular,
            kernel_direction: singular.then_some([1.0, 0.0]),
        };
    }
    let m = [[1.0 + a[0][0] / h, a[0][1] / h], [a[1][0] / h, 1.0 + a[1][1] / h]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let singular = det.abs() <= EPS_BLOCK;
    let gamma = a[0][1];
    let kernel_direction = singular.then(|| {
        if gamma > 0.0 {
            [1.0, -(h + a[0][0]) / gamma]
        } else if m[0][0].abs() <= m[1][1].abs() {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    });
    ModeBlock {
        k,
        dim,
        matrix: m,
        det,
        singular,
        kernel_direction,
    }
}

/// Wavenumbers whose block is singular (|det| <= 1e-9) at nu.
pub fn kernel_dimension(system: &System, spectral: &SpectralKernel, kind: ParamKind, nu: f64) -> Result<(usize, Vec<usize>)> {
    let sys = system.with_param(kind, nu)?;
    let ks: Vec<usize> = (1..=spectral.k_max)
        .filter(|&k| spectral.h(sys.sigma(), k).is_some())
        .filter(|&k| assemble_mode_block(&sys, spectral, k).det.abs() <= EPS_CARD)
        .collect();
    Ok((ks.len(), ks))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOrder {
    First,
    Second,
    Third,
    MixedAlpha,
    MixedAlpha1,
    MixedGamma,
    ParameterOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeProbe {
    pub label: String,
    pub order: ProbeOrder,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub rel_error: f64,
    pub step: f64,
    /// No clean plateau in the step ladder; `rel_error` is the best found.
    pub flagged: bool,
}

/// Mean-zero direction on the grid, one field per species.
pub type Direction = Vec<Vec<f64>>;

fn flatten(d: &[Vec<f64>]) -> Vec<f64> {
    d.iter().flatten().copied().collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    let scale = norm(analytic);
    if scale > 0.0 {
        norm(&diff) / scale
    } else {
        norm(&diff)
    }
}

fn psi(system: &System, disc: &Discrete, eta: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let sigma = system.sigma();
    disc.potentials(system, eta)
        .into_iter()
        .map(|p| p.into_iter().map(|v| v / sigma).collect())
        .collect()
}

fn moment(disc: &Discrete, f: &[f64], n: i32) -> f64 {
    let g = disc.grid();
    g.integrate(&f.iter().map(|v| v.powi(n)).collect::<Vec<_>>()) / g.length
}

/// Analytic n-th derivative of T at the homogeneous state along eta.
pub fn analytic_derivative(system: &System, disc: &Discrete, eta: &[Vec<f64>], order: usize) -> Direction {
    let l = disc.grid().length;
    psi(system, disc, eta)
        .into_iter()
        .map(|p| {
            let m2 = moment(disc, &p, 2);
            let m3 = moment(disc, &p, 3);
            p.iter()
                .map(|&s| match order {
                    1 => -s / l,
                    2 => (s * s - m2) / l,
                    3 => (-s * s * s + 3.0 * m2 * s + m3) / l,
                    _ => unreachable!("orders 1..=3"),
                })
                .collect()
        })
        .collect()
}

fn shifted(base: &GridState, eta: &[Vec<f64>], t: f64) -> GridState {
    let mut s = base.clone();
    for (u, e) in s.components.iter_mut().zip(eta) {
        for (x, y) in u.iter_mut().zip(e) {
            *x += t * y;
        }
    }
    s
}

fn t_along(system: &System, disc: &Discrete, base: &GridState, eta: &[Vec<f64>], t: f64) -> Result<Vec<f64>> {
    Ok(flatten(&apply_t(&shifted(base, eta, t), system, disc)?.components))
}

/// Finite-difference derivative of T along eta at step h.
fn fd_at(system: &System, disc: &Discrete, base: &GridState, eta: &[Vec<f64>], order: usize, h: f64) -> Result<Vec<f64>> {
    // (offset, weight) pairs; the result is divided by h^order.
    let stencil: &[(f64, f64)] = match order {
        1 => &[(1.0, 0.5), (-1.0, -0.5)],
        2 => &[
            (2.0, -1.0 / 12.0),
            (1.0, 16.0 / 12.0),
            (0.0, -30.0 / 12.0),
            (-1.0, 16.0 / 12.0),
            (-2.0, -1.0 / 12.0),
        ],
        3 => &[
            (3.0, -1.0 / 8.0),
            (2.0, 1.0),
            (1.0, -13.0 / 8.0),
            (-1.0, 13.0 / 8.0),
            (-2.0, -1.0),
            (-3.0, 1.0 / 8.0),
        ],
        _ => return Err(Error::InvalidParams(format!("unsupported order {order}"))),
    };
    let mut acc: Vec<f64> = Vec::new();
    for &(off, w) in stencil {
        let v = t_along(system, disc, base, eta, off * h)?;
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += w * b;
        }
    }
    let scale = h.powi(order as i32);
    Ok(acc.into_iter().map(|v| v / scale).collect())
}

/// Evaluate `f` on a geometric step ladder and keep the estimate where
/// consecutive steps agree best. Returns (estimate, step, flagged).
fn ladder<F>(nominal: f64, rungs: std::ops::RangeInclusive<i32>, f: F) -> Result<(Vec<f64>, f64, bool)>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let steps: Vec<f64> = rungs.map(|i| nominal * 2f64.powi(i)).collect();
    let est: Vec<Vec<f64>> = steps.iter().map(|&h| f(h)).collect::<Result<_>>()?;
    let mut best = (f64::INFINITY, 0);
    for i in 0..est.len() - 1 {
        let d = rel_error(&est[i + 1], &est[i]);
        if d < best.0 {
            best = (d, i);
        }
    }
    let flagged = best.0 > 1e-4;
    Ok((est[best.1].clone(), steps[best.1], flagged))
}

fn nominal_step(system: &System, disc: &Discrete, eta: &[Vec<f64>], root: f64) -> f64 {
    let p = psi(system, disc, eta);
    let sup = p.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if sup > 0.0 { 1.0 / sup } else { 1.0 };
    f64::EPSILON.powf(root) * scale
}

/// Finite differences of T in direction eta at the homogeneous state against
/// the analytic formula of the same order.
pub fn fd_frechet(system: &System, disc: &Discrete, order: usize, eta: &[Vec<f64>]) -> Result<DerivativeProbe> {
    if eta.len() != system.species() {
        return Err(Error::InvalidParams("direction has the wrong number of components".into()));
    }
    let base = GridState::homogeneous(disc.grid(), system.species());
    let analytic = flatten(&analytic_derivative(system, disc, eta, order));
    let (root, rungs) = match order {
        1 => (1.0 / 3.0, -2..=3),
        2 => (1.0 / 3.0, -1..=7),
        3 => (1.0 / 5.0, -3..=4),
        _ => return Err(Error::InvalidParams(format!("unsupported order {order}"))),
    };
    let nominal = nominal_step(system, disc, eta, root);
    let (numeric, step, flagged) = ladder(nominal, rungs, |h| fd_at(system, disc, &base, eta, order, h))?;
    Ok(DerivativeProbe {
        label: format!("D{order}T"),
        order: [ProbeOrder::First, ProbeOrder::Second, ProbeOrder::Third][order - 1],
        rel_error: rel_error(&analytic, &numeric),
        analytic,
        numeric,
        step,
        flagged,
    })
}

/// c0 (w_k, c w_k) with c0 = (1 + c^2)^(-1/2); w_k alone for scalar points.
pub fn normalized_direction(bp: &BifurcationPoint, disc: &Discrete) -> (Direction, f64) {
    let w = disc.grid().mode(bp.k);
    match (bp.kind, bp.c) {
        (ParamKind::ScalarAlpha, _) | (_, None) => (vec![w], 1.0),
        (_, Some(c)) => {
            let c0 = 1.0 / (1.0 + c * c).sqrt();
            (
                vec![w.iter().map(|v| c0 * v).collect(), w.iter().map(|v| c0 * c * v).collect()],
                c0,
            )
        }
    }
}

fn inner(disc: &Discrete, a: &[f64], b: &[f64]) -> f64 {
    disc.grid().spacing() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// <D3G[v^3], v> from the analytic formula on the grid.
pub fn third_derivative_inner(system: &System, disc: &Discrete, v: &[Vec<f64>]) -> f64 {
    let d3 = flatten(&analytic_derivative(system, disc, v, 3));
    -inner(disc, &d3, &flatten(v))
}

/// <D2G[v^2], v> from the analytic formula on the grid.
pub fn second_derivative_inner(system: &System, disc: &Discrete, v: &[Vec<f64>]) -> f64 {
    let d2 = flatten(&analytic_derivative(system, disc, v, 2));
    -inner(disc, &d2, &flatten(v))
}

/// d/dnu of DG[v], evaluated analytically: the field (d psi / d nu) / L.
fn mixed_field(system: &System, disc: &Discrete, kind: ParamKind, v: &[Vec<f64>]) -> Result<Vec<f64>> {
    let l = disc.grid().length;
    let sigma = system.sigma();
    let conv: Vec<Vec<f64>> = v.iter().map(|e| disc.convolve(e)).collect();
    let field: Vec<Vec<f64>> = match (kind, system) {
        (ParamKind::ScalarAlpha, System::Scalar(_)) => vec![conv[0].clone()],
        (ParamKind::Alpha1, System::TwoSpecies(p)) => {
            vec![conv[0].iter().map(|x| p.chi1 as f64 * x).collect(), vec![0.0; conv[0].len()]]
        }
        (ParamKind::Gamma, System::TwoSpecies(_)) => vec![conv[1].clone(), conv[0].clone()],
        _ => {
            return Err(Error::InvalidParams(format!(
                "parameter {} does not apply to this model",
                kind.label()
            )))
        }
    };
    Ok(field.iter().flatten().map(|x| x / (sigma * l)).collect())
}

/// Closed-form <D2_{u nu} G v, v> for the normalized direction.
pub fn mixed_closed_form(bp: &BifurcationPoint, system: &System, spectral: &SpectralKernel) -> Result<f64> {
    let h = spectral
        .h(system.sigma(), bp.k)
        .ok_or_else(|| Error::InvalidParams("h_k undefined at the bifurcation wavenumber".into()))?;
    Ok(match (bp.kind, system, bp.c) {
        (ParamKind::ScalarAlpha, _, _) => 1.0 / h,
        (ParamKind::Alpha1, System::TwoSpecies(p), Some(c)) => p.chi1 as f64 / ((1.0 + c * c) * h),
        (ParamKind::Gamma, _, Some(c)) => 2.0 * c / ((1.0 + c * c) * h),
        _ => return Err(Error::InvalidParams("bifurcation point does not match the model".into())),
    })
}

/// Mixed derivative <D2_{u nu} G v, v> at the bifurcation point: analytic
/// against a four-point finite-difference stencil.
pub fn mixed_derivative_checks(bp: &BifurcationPoint, system: &System, disc: &Discrete) -> Result<DerivativeProbe> {
    let sys = system.with_param(bp.kind, bp.value)?;
    let (v, _) = normalized_direction(bp, disc);
    let vf = flatten(&v);
    let analytic = inner(disc, &mixed_field(&sys, disc, bp.kind, &v)?, &vf);
    let base = GridState::homogeneous(disc.grid(), sys.species());
    let nominal = f64::EPSILON.powf(0.25) * nominal_step(&sys, disc, &v, 0.0);
    let (numeric, step, flagged) = ladder(nominal, -1..=5, |h| {
        let delta = h * bp.value.abs().max(1.0);
        let at = |du: f64, dn: f64| -> Result<Vec<f64>> {
            let s = sys.with_param(bp.kind, bp.value + dn)?;
            t_along(&s, disc, &base, &v, du)
        };
        let pp = at(h, delta)?;
        let mp = at(-h, delta)?;
        let pm = at(h, -delta)?;
        let mm = at(-h, -delta)?;
        let d2t: Vec<f64> = (0..pp.len())
            .map(|i| (pp[i] - mp[i] - pm[i] + mm[i]) / (4.0 * h * delta))
            .collect();
        Ok(vec![-inner(disc, &d2t, &vf)])
    })?;
    let order = match bp.kind {
        ParamKind::ScalarAlpha => ProbeOrder::MixedAlpha,
        ParamKind::Alpha1 => ProbeOrder::MixedAlpha1,
        ParamKind::Gamma => ProbeOrder::MixedGamma,
    };
    let noise = 10.0 * f64::EPSILON.sqrt();
    Ok(DerivativeProbe {
        label: format!("D2_u{}G", bp.kind.label()),
        order,
        rel_error: rel_error(&[analytic], &numeric),
        analytic: vec![analytic],
        step,
        flagged: flagged || analytic.abs() < noise,
        numeric,
    })
}

/// d/dnu G at the homogeneous state, which vanishes identically.
pub fn parameter_derivative_probe(bp: &BifurcationPoint, system: &System, disc: &Discrete) -> Result<DerivativeProbe> {
    let base = GridState::homogeneous(disc.grid(), system.species());
    let delta = f64::EPSILON.powf(1.0 / 3.0) * bp.value.abs().max(1.0);
    let plus = apply_t(&base, &system.with_param(bp.kind, bp.value + delta)?, disc)?;
    let minus = apply_t(&base, &system.with_param(bp.kind, bp.value - delta)?, disc)?;
    let numeric: Vec<f64> = flatten(&plus.components)
        .iter()
        .zip(flatten(&minus.components))
        .map(|(a, b)| -(a - b) / (2.0 * delta))
        .collect();
    let analytic = vec![0.0; numeric.len()];
    Ok(DerivativeProbe {
        label: format!("D_{}G at homogeneous", bp.kind.label()),
        order: ProbeOrder::ParameterOnly,
        rel_error: rel_error(&analytic, &numeric),
        analytic,
        numeric,
        step: delta,
        flagged: false,
    })
}

/// <D2G[v^2], v>, which vanishes because odd moments of w_k do.
pub fn quadratic_inner_probe(bp: &BifurcationPoint, system: &System, disc: &Discrete) -> Result<DerivativeProbe> {
    let sys = system.with_param(bp.kind, bp.value)?;
    let (v, _) = normalized_direction(bp, disc);
    let analytic = second_derivative_inner(&sys, disc, &v);
    let fd = fd_frechet(&sys, disc, 2, &v)?;
    let numeric = -inner(disc, &fd.numeric, &flatten(&v));
    Ok(DerivativeProbe {
        label: "<D2G[v^2], v>".into(),
        order: ProbeOrder::Second,
        analytic: vec![analytic],
        numeric: vec![numeric],
        rel_error: (analytic - numeric).abs(),
        step: fd.step,
        flagged: fd.flagged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureCheck {
    pub closed_form: f64,
    pub analytic: f64,
    pub numeric: f64,
    pub analytic_error: f64,
    pub numeric_error: f64,
    pub third: DerivativeProbe,
    pub mixed: DerivativeProbe,
    pub degenerate: bool,
}

/// nu''(0) = -(1/3) <D3G[v^3], v> / <D2_{u nu}G v, v> / c0^2.
pub fn curvature_crosscheck(bp: &BifurcationPoint, system: &System, disc: &Discrete) -> Result<CurvatureCheck> {
    let sys = system.with_param(bp.kind, bp.value)?;
    let (v, c0) = normalized_direction(bp, disc);
    let vf = flatten(&v);

    let d3_analytic = third_derivative_inner(&sys, disc, &v);
    let base = GridState::homogeneous(disc.grid(), sys.species());
    let nominal = nominal_step(&sys, disc, &v, 0.2);
    let (d3_field, step, flagged) = ladder(nominal, -3..=4, |h| fd_at(&sys, disc, &base, &v, 3, h))?;
    let d3_numeric = -inner(disc, &d3_field, &vf);
    let third = DerivativeProbe {
        label: "<D3G[v^3], v>".into(),
        order: ProbeOrder::Third,
        analytic: vec![d3_analytic],
        numeric: vec![d3_numeric],
        rel_error: rel_error(&[d3_analytic], &[d3_numeric]),
        step,
        flagged,
    };
    let mixed = mixed_derivative_checks(bp, system, disc)?;
    let denom_a = mixed.analytic[0];
    let denom_n = mixed.numeric[0];
    let degenerate = denom_a.abs() < 1e-12;
    let quotient = |d3: f64, d2: f64| -d3 / (3.0 * d2) / (c0 * c0);
    let analytic = quotient(d3_analytic, denom_a);
    let numeric = quotient(d3_numeric, denom_n);
    let scale = bp.curvature.abs().max(f64::MIN_POSITIVE);
    Ok(CurvatureCheck {
        closed_form: bp.curvature,
        analytic,
        numeric,
        analytic_error: (analytic - bp.curvature).abs() / scale,
        numeric_error: (numeric - bp.curvature).abs() / scale,
        third,
        mixed,
        degenerate,
    })
}

/// Largest projection of the fd Jacobian of G, applied to a mode-k
/// perturbation, onto modes j != k.
pub fn block_leakage(system: &System, disc: &Discrete, k: usize) -> Result<f64> {
    let grid = disc.grid();
    let base = GridState::homogeneous(grid, system.species());
    let w = grid.mode(k);
    let zero = vec![0.0; grid.n];
    let mut worst = 0.0_f64;
    for slot in 0..system.species() {
        let eta: Direction = (0..system.species())
            .map(|i| if i == slot { w.clone() } else { zero.clone() })
            .collect();
        let h = nominal_step(system, disc, &eta, 1.0 / 3.0);
        let dt = fd_at(system, disc, &base, &eta, 1, h)?;
        for (i, comp) in dt.chunks(grid.n).enumerate() {
            let dg: Vec<f64> = comp.iter().zip(&eta[i]).map(|(t, e)| e - t).collect();
            for j in 0..grid.n / 2 {
                if j != k {
                    worst = worst.max(grid.project(&dg, j).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Every probe for one bifurcation point, run in parallel.
pub fn probe_suite(bp: &BifurcationPoint, system: &System, disc: &Discrete) -> Result<Vec<DerivativeProbe>> {
    let sys = system.with_param(bp.kind, bp.value)?;
    let (v, _) = normalized_direction(bp, disc);
    let jobs: Vec<Box<dyn Fn() -> Result<Vec<DerivativeProbe>> + Sync + '_>> = vec![
        Box::new(|| fd_frechet(&sys, disc, 1, &v).map(|p| vec![p])),
        Box::new(|| fd_frechet(&sys, disc, 2, &v).map(|p| vec![p])),
        Box::new(|| fd_frechet(&sys, disc, 3, &v).map(|p| vec![p])),
        Box::new(|| mixed_derivative_checks(bp, system, disc).map(|p| vec![p])),
        Box::new(|| parameter_derivative_probe(bp, system, disc).map(|p| vec![p])),
        Box::new(|| quadratic_inner_probe(bp, system, disc).map(|p| vec![p])),
        Box::new(|| curvature_crosscheck(bp, system, disc).map(|c| vec![c.third])),
    ];
    let out: Vec<Vec<DerivativeProbe>> = jobs.par_iter().map(|j| j()).collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::kernels::{cosine_transform, KernelSpec};
    use crate::stability::TwoSpeciesParams;
    use std::f64::consts::PI;

    const L: f64 = 2.0 * PI;

    fn setup() -> (Discrete, SpectralKernel) {
        let g = TorusGrid::new(L, 64).unwrap();
        let s = cosine_transform(&KernelSpec::cosine(1, -1.0), L, 31).unwrap();
        (Discrete::new(g, s.clone()).unwrap(), s)
    }

    fn two(a1: f64, a2: f64, g: f64) -> System {
        System::TwoSpecies(TwoSpeciesParams::new(1.0, L, (a1, a2, g), (1, 1)).unwrap())
    }

    #[test]
    fn block_at_gamma_point() {
        let (_, s) = setup();
        let b = assemble_mode_block(&two(1.0, 1.0, 1.0), &s, 1);
        assert_eq!(b.matrix, [[0.5, -0.5], [-0.5, 0.5]]);
        assert!(b.singular);
        assert_eq!(b.kernel_direction, Some([1.0, 1.0]));
    }

    #[test]
    fn identity_and_dead_blocks() {
        let (_, s) = setup();
        let b = assemble_mode_block(&two(0.0, 0.0, 0.0), &s, 1);
        assert_eq!(b.matrix, [[1.0, 0.0], [0.0, 1.0]]);
        let b = assemble_mode_block(&two(1.0, 1.0, 1.0), &s, 2);
        assert_eq!(b.det, 1.0);
        assert!(!b.singular);
    }

    #[test]
    fn first_derivative_scalar_example() {
        let (d, _) = setup();
        let sys = System::Scalar(crate::stability::ScalarParams::new(1.0, L, 1.0).unwrap());
        let w = d.grid().mode(1);
        let p = fd_frechet(&sys, &d, 1, &[w.clone()]).unwrap();
        for (a, x) in p.analytic.iter().zip(&w) {
            assert!((a - 0.5 * x).abs() < 1e-14);
        }
        assert!(p.rel_error < 1e-8, "{}", p.rel_error);
    }

    #[test]
    fn kernel_dimension_at_and_off_criticality() {
        let (_, s) = setup();
        let (n, ks) = kernel_dimension(&two(1.0, 1.0, 0.0), &s, ParamKind::Gamma, 1.0).unwrap();
        assert_eq!((n, ks), (1, vec![1]));
        let (n, _) = kernel_dimension(&two(1.0, 1.0, 0.0), &s, ParamKind::Gamma, 0.7).unwrap();
        assert_eq!(n, 0);
    }
}
