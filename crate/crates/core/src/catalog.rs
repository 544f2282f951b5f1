//! Local bifurcation points from the homogeneous state: locations, kernel
//! directions, branch curvatures and points of critical stability.

use serde::{Deserialize, Serialize};

use crate::emit::{CsvRecord, Field};
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::kernels::{KernelSummary, SpectralKernel, EPS_CARD};
use crate::model::{GridState, ParamKind};
use crate::stability::{degenerate_tolerance, necessary_box, s_star, TwoSpeciesParams};

/// Relative size below which h_k + chi alpha counts as zero.
pub const EPS_RESONANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Supercritical,
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "in_phase")]
    InPhase,
    #[serde(rename = "out_of_phase")]
    OutOfPhase,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Phase {
    fn of(c: Option<f64>) -> Phase {
        match c {
            Some(c) if c > 0.0 => Phase::InPhase,
            Some(c) if c < 0.0 => Phase::OutOfPhase,
            _ => Phase::NotApplicable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub kind: ParamKind,
    pub value: f64,
    pub k: usize,
    pub c: Option<f64>,
    pub curvature: f64,
    pub criticality: Criticality,
    pub phase: Phase,
    pub simple: bool,
}

impl BifurcationPoint {
    fn new(kind: ParamKind, value: f64, k: usize, c: Option<f64>, curvature: f64) -> Self {
        let criticality = if curvature > 0.0 {
            Criticality::Supercritical
        } else {
            Criticality::Subcritical
        };
        Self {
            kind,
            value,
            k,
            c,
            curvature,
            criticality,
            phase: Phase::of(c),
            simple: true,
        }
    }

    /// nu(s) = nu* + nu''(0) s^2 / 2
    pub fn predict_parameter(&self, s: f64) -> f64 {
        self.value + 0.5 * self.curvature * s * s
    }

    /// Positive s with predict_parameter(s) = nu, if nu lies on the branch side.
    pub fn predict_amplitude(&self, nu: f64) -> Option<f64> {
        let s2 = 2.0 * (nu - self.value) / self.curvature;
        (s2 >= 0.0).then(|| s2.sqrt())
    }
}

impl CsvRecord for BifurcationPoint {
    fn header() -> Vec<&'static str> {
        vec!["kind", "value", "k", "c", "curvature", "criticality", "phase", "simple"]
    }

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Text(self.kind.label().into()),
            Field::Num(self.value),
            Field::Int(self.k as i64),
            self.c.map_or(Field::Text(String::new()), Field::Num),
            Field::Num(self.curvature),
            tag(&self.criticality),
            tag(&self.phase),
            Field::Text(self.simple.to_string()),
        ]
    }
}

/// Serde name of a unit enum variant.
fn tag<T: Serialize>(v: &T) -> Field {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => Field::Text(s),
        _ => Field::Text(String::new()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Resonance,
    SignMismatch,
    NonPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub k: usize,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub points: Vec<BifurcationPoint>,
    pub skipped: Vec<Skipped>,
}

impl Catalog {
    fn finish(mut points: Vec<BifurcationPoint>, skipped: Vec<Skipped>) -> Self {
        points.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.k.cmp(&b.k)));
        let values: Vec<f64> = points.iter().map(|p| p.value).collect();
        for (i, p) in points.iter_mut().enumerate() {
            p.simple = !values
                .iter()
                .enumerate()
                .any(|(j, v)| j != i && (v - p.value).abs() <= EPS_CARD * p.value.abs());
        }
        Catalog { points, skipped }
    }
}

fn resonant(a: f64, scale: f64) -> bool {
    a.abs() <= EPS_RESONANCE * scale.max(f64::MIN_POSITIVE)
}

pub fn scalar_points(spectral: &SpectralKernel, sigma: f64) -> Catalog {
    let length = spectral.length;
    let points = (1..=spectral.k_max)
        .filter_map(|k| {
            let h = spectral.h(sigma, k)?;
            (h < 0.0).then(|| {
                let alpha = -h;
                BifurcationPoint::new(ParamKind::ScalarAlpha, alpha, k, None, 0.5 * length * alpha)
            })
        })
        .collect();
    Catalog::finish(points, Vec::new())
}

/// The alpha1 formula at one wavenumber (alpha1 in `p` is ignored).
pub fn alpha1_point_at(p: &TwoSpeciesParams, h: f64, k: usize) -> std::result::Result<BifurcationPoint, SkipReason> {
    let d = h + p.x2();
    if resonant(d, h.abs() + p.alpha2) {
        return Err(SkipReason::Resonance);
    }
    let chi1 = p.chi1 as f64;
    let value = -chi1 * (h - p.gamma * p.gamma / d);
    if !(value > 0.0) {
        return Err(SkipReason::NonPositive);
    }
    let r = p.gamma / d;
    let c = -r;
    let curvature = -chi1 * p.length * h / 2.0 * (1.0 + r.powi(4));
    Ok(BifurcationPoint::new(ParamKind::Alpha1, value, k, Some(c), curvature))
}

pub fn alpha1_points(p: &TwoSpeciesParams, spectral: &SpectralKernel) -> Catalog {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for k in 1..=spectral.k_max {
        let Some(h) = spectral.h(p.sigma, k) else { continue };
        match alpha1_point_at(p, h, k) {
            Ok(bp) => points.push(bp),
            Err(reason) => skipped.push(Skipped { k, reason }),
        }
    }
    Catalog::finish(points, skipped)
}

/// The gamma formula at one wavenumber (gamma in `p` is ignored).
pub fn gamma_point_at(p: &TwoSpeciesParams, h: f64, k: usize) -> std::result::Result<BifurcationPoint, SkipReason> {
    let p1 = h + p.x1();
    let p2 = h + p.x2();
    if resonant(p1, h.abs() + p.alpha1) || resonant(p2, h.abs() + p.alpha2) {
        return Err(SkipReason::Resonance);
    }
    if p1.signum() != p2.signum() {
        return Err(SkipReason::SignMismatch);
    }
    let value = (p1 * p2).sqrt();
    let c = -p1.signum() * (p1 / p2).sqrt();
    let ratio = p1 / p2;
    let curvature = -p.length * h / (4.0 * c) * (1.0 + ratio * ratio);
    Ok(BifurcationPoint::new(ParamKind::Gamma, value, k, Some(c), curvature))
}

pub fn gamma_points(p: &TwoSpeciesParams, spectral: &SpectralKernel) -> Catalog {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for k in 1..=spectral.k_max {
        let Some(h) = spectral.h(p.sigma, k) else { continue };
        match gamma_point_at(p, h, k) {
            Ok(bp) => points.push(bp),
            Err(reason) => skipped.push(Skipped { k, reason }),
        }
    }
    Catalog::finish(points, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityCase {
    OnePoint,
    TwoPoints,
    None,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Stability is lost as the parameter increases through the point.
    Increasing,
    /// Stability is lost as the parameter decreases through the point.
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: BifurcationPoint,
    pub direction: Direction,
    pub exchange: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalStabilityReport {
    pub kind: ParamKind,
    pub case: StabilityCase,
    pub points: Vec<CriticalPoint>,
    /// Parameter interval on which the homogeneous state is linearly stable.
    #[serde(with = "crate::emit::ext_real_pair")]
    pub stable_interval: Option<(f64, f64)>,
    /// Wavenumbers involved in a degenerate crossing.
    pub wavenumbers: Vec<usize>,
}

impl CriticalStabilityReport {
    fn empty(kind: ParamKind, case: StabilityCase) -> Self {
        Self {
            kind,
            case,
            points: Vec::new(),
            stable_interval: None,
            wavenumbers: Vec::new(),
        }
    }
}

fn critical_wavenumbers(summary: &KernelSummary) -> (Option<usize>, Option<usize>) {
    (summary.argmin.first().copied(), summary.argmax.first().copied())
}

/// Points where the homogeneous state changes stability as alpha1 varies.
pub fn critical_stability_alpha1(
    p: &TwoSpeciesParams,
    summary: &KernelSummary,
    spectral: &SpectralKernel,
) -> CriticalStabilityReport {
    let kind = ParamKind::Alpha1;
    let a = summary.alpha_star_plus;
    let b = summary.alpha_star_minus;
    let x2 = p.x2();
    let g2 = p.gamma * p.gamma;
    let gbar = 0.5 * (a + b);
    if !necessary_box(summary, x2) || !(p.gamma < gbar) {
        return CriticalStabilityReport::empty(kind, StabilityCase::None);
    }
    // Composite (chi1 alpha1) endpoints of the stable interval.
    let upper = if a.is_finite() { a - g2 / (a - x2) } else { f64::INFINITY };
    let lower = if b.is_finite() { -b + g2 / (b + x2) } else { f64::NEG_INFINITY };
    let (k_w, k_mw) = critical_wavenumbers(summary);
    if lower.is_finite() && upper.is_finite() && (upper - lower).abs() <= degenerate_tolerance(summary) {
        let mut r = CriticalStabilityReport::empty(kind, StabilityCase::Degenerate);
        r.wavenumbers = [k_w, k_mw].into_iter().flatten().collect();
        return r;
    }
    if !(lower < upper) {
        return CriticalStabilityReport::empty(kind, StabilityCase::None);
    }

    let chi1 = p.chi1 as f64;
    // Map to alpha1 >= 0: alpha1 = chi1 * composite.
    let (lo, hi) = if chi1 > 0.0 { (lower, upper) } else { (-upper, -lower) };
    let lo_c = lo.max(0.0);
    if !(lo_c < hi) {
        return CriticalStabilityReport::empty(kind, StabilityCase::None);
    }
    let catalog = alpha1_points(p, spectral);
    let simple_at = |k: usize, value: f64| {
        catalog
            .points
            .iter()
            .find(|bp| bp.k == k && (bp.value - value).abs() <= 1e-9 * value.abs().max(1.0))
            .map(|bp| bp.simple)
            .unwrap_or(false)
    };

    let mut points = Vec::new();
    // (alpha1 value, composite endpoint is the upper one)
    let mut ends = Vec::new();
    if lo > 0.0 && lo.is_finite() {
        ends.push((lo, Direction::Decreasing));
    }
    if hi.is_finite() {
        ends.push((hi, Direction::Increasing));
    }
    for (value, direction) in ends {
        let composite = chi1 * value;
        let at_upper = (composite - upper).abs() <= (composite - lower).abs();
        let (k, h, unique) = if at_upper {
            (k_w, -a, summary.k_w.is_some())
        } else {
            (k_mw, b, summary.k_minus_w.is_some())
        };
        let Some(k) = k else { continue };
        let Ok(mut bp) = alpha1_point_at(p, h, k) else { continue };
        bp.value = value;
        bp.simple = unique && simple_at(k, value);
        points.push(CriticalPoint {
            exchange: bp.simple,
            point: bp,
            direction,
        });
    }
    let case = match points.len() {
        0 => StabilityCase::None,
        1 => StabilityCase::OnePoint,
        _ => StabilityCase::TwoPoints,
    };
    CriticalStabilityReport {
        kind,
        case,
        points,
        stable_interval: Some((lo_c, hi)),
        wavenumbers: Vec::new(),
    }
}

/// The first point of critical stability as gamma grows from zero.
pub fn critical_stability_gamma(
    p: &TwoSpeciesParams,
    summary: &KernelSummary,
    spectral: &SpectralKernel,
) -> CriticalStabilityReport {
    let kind = ParamKind::Gamma;
    let (x1, x2) = (p.x1(), p.x2());
    let a = summary.alpha_star_plus;
    let b = summary.alpha_star_minus;
    if !(necessary_box(summary, x1) && necessary_box(summary, x2)) || (a.is_infinite() && b.is_infinite()) {
        return CriticalStabilityReport::empty(kind, StabilityCase::None);
    }
    let s = s_star(summary, x1, x2);
    let (k_w, k_mw) = critical_wavenumbers(summary);
    if s.abs() <= degenerate_tolerance(summary) {
        let mut r = CriticalStabilityReport::empty(kind, StabilityCase::Degenerate);
        r.wavenumbers = [k_w, k_mw].into_iter().flatten().collect();
        return r;
    }
    let (k, h, unique) = if s < 0.0 {
        (k_w, -a, summary.k_w.is_some())
    } else {
        (k_mw, b, summary.k_minus_w.is_some())
    };
    let Some(k) = k else {
        return CriticalStabilityReport::empty(kind, StabilityCase::None);
    };
    let Ok(mut bp) = gamma_point_at(p, h, k) else {
        return CriticalStabilityReport::empty(kind, StabilityCase::None);
    };
    let catalog = gamma_points(p, spectral);
    bp.simple = unique
        && catalog
            .points
            .iter()
            .any(|q| q.k == k && q.simple && (q.value - bp.value).abs() <= 1e-9 * bp.value.max(1.0));
    let value = bp.value;
    CriticalStabilityReport {
        kind,
        case: StabilityCase::OnePoint,
        points: vec![CriticalPoint {
            exchange: bp.simple,
            point: bp,
            direction: Direction::Increasing,
        }],
        stable_interval: Some((0.0, value)),
        wavenumbers: Vec::new(),
    }
}

/// (1/L + s w_k, 1/L + s c w_k); a single component for scalar points.
pub fn branch_expansion(bp: &BifurcationPoint, s: f64, grid: &TorusGrid) -> GridState {
    match (bp.kind, bp.c) {
        (ParamKind::ScalarAlpha, _) | (_, None) => GridState::mode_perturbation(*grid, bp.k, &[s]),
        (_, Some(c)) => GridState::mode_perturbation(*grid, bp.k, &[s, s * c]),
    }
}

pub fn catalog_for(kind: ParamKind, system: &crate::model::System, spectral: &SpectralKernel) -> Result<Catalog> {
    use crate::model::System;
    match (kind, system) {
        (ParamKind::ScalarAlpha, System::Scalar(p)) => Ok(scalar_points(spectral, p.sigma)),
        (ParamKind::Alpha1, System::TwoSpecies(p)) => Ok(alpha1_points(p, spectral)),
        (ParamKind::Gamma, System::TwoSpecies(p)) => Ok(gamma_points(p, spectral)),
        _ => Err(Error::InvalidParams(format!(
            "parameter {} does not apply to this model",
            kind.label()
        ))),
    }
}
