//! Dispersion relations and the linear-stability verdict for the homogeneous
//! state, plus the boundary of the stability region in the
//! (chi1 alpha1, chi2 alpha2) plane.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::emit::{CsvRecord, Field};
use crate::error::{Error, Result};
use crate::kernels::{KernelSummary, SpectralKernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarParams {
    pub sigma: f64,
    pub length: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSpeciesParams {
    pub sigma: f64,
    pub length: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub gamma: f64,
    pub chi1: i32,
    pub chi2: i32,
}

impl ScalarParams {
    pub fn new(sigma: f64, length: f64, alpha: f64) -> Result<Self> {
        let p = Self { sigma, length, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sigma", self.sigma)?;
        positive("L", self.length)?;
        nonnegative("alpha", self.alpha)
    }
}

impl TwoSpeciesParams {
    pub fn new(
        sigma: f64,
        length: f64,
        (alpha1, alpha2, gamma): (f64, f64, f64),
        (chi1, chi2): (i32, i32),
    ) -> Result<Self> {
        let p = Self {
            sigma,
            length,
            alpha1,
            alpha2,
            gamma,
            chi1,
            chi2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sigma", self.sigma)?;
        positive("L", self.length)?;
        nonnegative("alpha1", self.alpha1)?;
        nonnegative("alpha2", self.alpha2)?;
        nonnegative("gamma", self.gamma)?;
        for (name, chi) in [("chi1", self.chi1), ("chi2", self.chi2)] {
            if chi != 1 && chi != -1 {
                return Err(Error::InvalidParams(format!("{name} must be +1 or -1, got {chi}")));
            }
        }
        Ok(())
    }

    /// chi1 alpha1
    pub fn x1(&self) -> f64 {
        self.chi1 as f64 * self.alpha1
    }

    /// chi2 alpha2
    pub fn x2(&self) -> f64 {
        self.chi2 as f64 * self.alpha2
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be positive, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")))
    }
}

fn wave(length: f64, k: usize) -> f64 {
    2.0 * PI * k as f64 / length
}

fn decoupled(q: f64, sigma: f64, x: f64, w: f64) -> f64 {
    -q * q * (sigma + x * w)
}

pub fn scalar_eigenvalue(p: &ScalarParams, spectral: &SpectralKernel, k: usize) -> f64 {
    let w = spectral.coefficient(k) / (2.0 * p.length).sqrt();
    decoupled(wave(p.length, k), p.sigma, p.alpha, w)
}

/// (lambda_minus, lambda_plus) of the mode-k symbol.
pub fn two_species_eigenvalues(p: &TwoSpeciesParams, spectral: &SpectralKernel, k: usize) -> (f64, f64) {
    let q = wave(p.length, k);
    let w = spectral.coefficient(k) / (2.0 * p.length).sqrt();
    if p.gamma == 0.0 {
        let (a, b) = (decoupled(q, p.sigma, p.x1(), w), decoupled(q, p.sigma, p.x2(), w));
        return (a.min(b), a.max(b));
    }
    let q2 = q * q;
    let g1 = p.sigma + p.x1() * w;
    let g2 = p.sigma + p.x2() * w;
    let disc = (g1 - g2).hypot(2.0 * p.gamma * w);
    let minus = 0.5 * q2 * (-(g1 + g2) - disc);
    let plus = 0.5 * q2 * (-(g1 + g2) + disc);
    (minus, plus)
}

/// Dispersion relation for k = 1..=k_max (capped at the kernel's K_max).
pub fn spectrum(system: &crate::model::System, spectral: &SpectralKernel, k_max: usize) -> Vec<SpectrumRow> {
    use crate::model::System;
    (1..=k_max.min(spectral.k_max))
        .map(|k| {
            let (lambda_minus, lambda_plus) = match system {
                System::Scalar(p) => {
                    let l = scalar_eigenvalue(p, spectral, k);
                    (l, l)
                }
                System::TwoSpecies(p) => two_species_eigenvalues(p, spectral, k),
            };
            SpectrumRow {
                k,
                lambda_minus,
                lambda_plus,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Branch {
    PlusW,
    MinusW,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    #[serde(rename = "S_star", with = "crate::emit::ext_real")]
    pub s_star: f64,
    pub binding_branch: Branch,
    #[serde(with = "crate::emit::ext_real")]
    pub margin: f64,
    pub necessary_box_ok: bool,
    pub degenerate: bool,
}

pub fn degenerate_tolerance(summary: &KernelSummary) -> f64 {
    let a = summary.alpha_star_plus;
    let b = summary.alpha_star_minus;
    let finite = |v: f64| if v.is_finite() { v.abs() } else { 0.0 };
    1e-9 * (1.0 + finite(a) + finite(b))
}

/// alpha*(W) - alpha*(-W) - (x1 + x2) with +inf handled; zero when both are infinite.
pub fn s_star(summary: &KernelSummary, x1: f64, x2: f64) -> f64 {
    let a = summary.alpha_star_plus;
    let b = summary.alpha_star_minus;
    match (a.is_infinite(), b.is_infinite()) {
        (true, true) => 0.0,
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => a - b - (x1 + x2),
    }
}

/// Branch value [a* - x1][a* - x2] - g^2, +inf when a* is.
fn branch_value(a: f64, x1: f64, x2: f64, gamma: f64) -> f64 {
    if a.is_infinite() {
        f64::INFINITY
    } else {
        (a - x1) * (a - x2) - gamma * gamma
    }
}

pub fn necessary_box(summary: &KernelSummary, x: f64) -> bool {
    -summary.alpha_star_minus < x && x < summary.alpha_star_plus
}

pub fn stability_verdict(p: &TwoSpeciesParams, summary: &KernelSummary) -> StabilityVerdict {
    let (x1, x2) = (p.x1(), p.x2());
    let plus = branch_value(summary.alpha_star_plus, x1, x2, p.gamma);
    let minus = branch_value(summary.alpha_star_minus, -x1, -x2, p.gamma);
    let margin = plus.min(minus);
    let s = s_star(summary, x1, x2);
    let both_infinite = summary.alpha_star_plus.is_infinite() && summary.alpha_star_minus.is_infinite();
    let binding_branch = if both_infinite {
        Branch::None
    } else if s < 0.0 {
        Branch::PlusW
    } else if s > 0.0 {
        Branch::MinusW
    } else {
        Branch::None
    };
    let degenerate = !both_infinite && s.abs() <= degenerate_tolerance(summary);
    let necessary_box_ok = necessary_box(summary, x1) && necessary_box(summary, x2);
    StabilityVerdict {
        stable: margin > 0.0 && necessary_box_ok,
        s_star: s,
        binding_branch,
        margin,
        necessary_box_ok,
        degenerate,
    }
}

/// Scalar verdict: stable iff alpha < alpha*(W).
pub fn scalar_stable(p: &ScalarParams, summary: &KernelSummary) -> bool {
    p.alpha < summary.alpha_star_plus
}

/// (xi_minus, xi_plus)
pub fn xi_roots(p: &TwoSpeciesParams) -> (f64, f64) {
    let (x1, x2) = (p.x1(), p.x2());
    let r = (0.5 * (x1 - x2)).hypot(p.gamma);
    let m = -0.5 * (x1 + x2);
    (m - r, m + r)
}

/// Largest lambda_plus over k = 1..=K_max, and whether the modes beyond K_max
/// are provably stable.
pub fn scan_max_lambda_plus(p: &TwoSpeciesParams, spectral: &SpectralKernel) -> (f64, bool) {
    let max = (1..=spectral.k_max)
        .map(|k| two_species_eigenvalues(p, spectral, k).1)
        .fold(f64::NEG_INFINITY, f64::max);
    (max, tail_stable(p, spectral))
}

/// sigma - (max|chi a| + gamma) * bound / sqrt(2L) > 0 forces every tail
/// symbol to be negative definite.
pub fn tail_stable(p: &TwoSpeciesParams, spectral: &SpectralKernel) -> bool {
    match spectral.tail_bound {
        Some(t) => {
            let w = t / (2.0 * p.length).sqrt();
            p.sigma - (p.alpha1.max(p.alpha2) + p.gamma) * w > 0.0
        }
        None => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionBranch {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub branch: RegionBranch,
    pub chi1a1: f64,
    pub chi2a2: f64,
}

impl CsvRecord for RegionPoint {
    fn header() -> Vec<&'static str> {
        vec!["branch", "chi1a1", "chi2a2"]
    }

    fn fields(&self) -> Vec<Field> {
        let b = match self.branch {
            RegionBranch::Upper => "upper",
            RegionBranch::Lower => "lower",
        };
        vec![Field::Text(b.into()), Field::Num(self.chi1a1), Field::Num(self.chi2a2)]
    }
}

/// One row of the dispersion relation. Scalar models report their single
/// eigenvalue in both columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub k: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

impl CsvRecord for SpectrumRow {
    fn header() -> Vec<&'static str> {
        vec!["k", "lambda_minus", "lambda_plus"]
    }

    fn fields(&self) -> Vec<Field> {
        vec![Field::Int(self.k as i64), Field::Num(self.lambda_minus), Field::Num(self.lambda_plus)]
    }
}

/// Upper and lower boundary curves of the stability region at fixed gamma,
/// sampled between their two intersections on S* = 0. Empty when gamma
/// exceeds the mean of the critical values.
pub fn region_boundary(summary: &KernelSummary, gamma: f64, samples: usize) -> Result<Vec<RegionPoint>> {
    let a = summary.alpha_star_plus;
    let b = summary.alpha_star_minus;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParams(
            "stability region needs both critical values finite".into(),
        ));
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParams(format!("gamma must be >= 0, got {gamma}")));
    }
    if samples < 2 {
        return Err(Error::InvalidParams("need at least 2 samples".into()));
    }
    let gbar = 0.5 * (a + b);
    if gamma > gbar {
        return Ok(Vec::new());
    }
    let r = ((gbar - gamma) * (gbar + gamma)).max(0.0).sqrt();
    let c = 0.5 * (a - b);
    let (left, right) = (c - r, c + r);
    let xs: Vec<f64> = (0..samples)
        .map(|i| left + (right - left) * i as f64 / (samples - 1) as f64)
        .collect();
    let g2 = gamma * gamma;
    let mut out = Vec::with_capacity(2 * samples);
    for &x in &xs {
        out.push(RegionPoint {
            branch: RegionBranch::Upper,
            chi1a1: x,
            chi2a2: if g2 == 0.0 { a } else { a - g2 / (a - x) },
        });
    }
    for &x in &xs {
        out.push(RegionPoint {
            branch: RegionBranch::Lower,
            chi1a1: x,
            chi2a2: if g2 == 0.0 { -b } else { -b + g2 / (b + x) },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{cosine_transform, kernel_summary, KernelSpec};

    const L: f64 = 2.0 * PI;

    fn cosine() -> (SpectralKernel, KernelSummary) {
        let s = cosine_transform(&KernelSpec::cosine(1, -1.0), L, 32).unwrap();
        let sum = kernel_summary(&s, 1.0).unwrap();
        (s, sum)
    }

    fn two(x1: f64, x2: f64, g: f64) -> TwoSpeciesParams {
        TwoSpeciesParams::new(
            1.0,
            L,
            (x1.abs(), x2.abs(), g),
            (if x1 < 0.0 { -1 } else { 1 }, if x2 < 0.0 { -1 } else { 1 }),
        )
        .unwrap()
    }

    #[test]
    fn scalar_eigenvalue_examples() {
        let (s, _) = cosine();
        let p = |a| ScalarParams::new(1.0, L, a).unwrap();
        assert!((scalar_eigenvalue(&p(0.0), &s, 3) + 9.0).abs() < 1e-12);
        assert!(scalar_eigenvalue(&p(2.0), &s, 1).abs() < 1e-14);
        assert!((scalar_eigenvalue(&p(1.0), &s, 1) + 0.5).abs() < 1e-14);
    }

    #[test]
    fn two_species_examples() {
        let (s, _) = cosine();
        let (m, pl) = two_species_eigenvalues(&two(0.0, 0.0, 1.0), &s, 1);
        assert!((pl + 0.5).abs() < 1e-14 && (m + 1.5).abs() < 1e-14);
        let (_, pl) = two_species_eigenvalues(&two(0.0, 0.0, 2.0), &s, 1);
        assert!(pl.abs() < 1e-14);
    }

    #[test]
    fn verdict_examples() {
        let (_, sum) = cosine();
        let v = stability_verdict(&two(0.0, 0.0, 1.0), &sum);
        assert!(v.stable);
        assert_eq!(v.binding_branch, Branch::PlusW);
        assert!((v.margin - 3.0).abs() < 1e-14);
        assert!(v.s_star.is_infinite() && v.s_star < 0.0);
        assert!(!v.degenerate);

        let v = stability_verdict(&two(1.0, 1.0, 2f64.sqrt()), &sum);
        assert!(!v.stable);
        assert!((v.margin + 1.0).abs() < 1e-12);
    }

    #[test]
    fn xi_examples() {
        let (a, b) = xi_roots(&two(0.0, 0.0, 1.5));
        assert_eq!((a, b), (-1.5, 1.5));
        let (a, b) = xi_roots(&two(3.0, 1.0, 0.0));
        assert_eq!((a, b), (-3.0, -1.0));
        let (a, b) = xi_roots(&two(1.0, 1.0, 3f64.sqrt()));
        assert!((a + 1.0 + 3f64.sqrt()).abs() < 1e-14 && (b + 1.0 - 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn region_is_box_at_zero_gamma() {
        let s = cosine_transform(&KernelSpec::tophat(PI / 5.0, 1), L, 128).unwrap();
        let sum = kernel_summary(&s, 1.0).unwrap();
        let pts = region_boundary(&sum, 0.0, 5).unwrap();
        let (a, b) = (sum.alpha_star_plus, sum.alpha_star_minus);
        assert!((pts[0].chi1a1 + b).abs() < 1e-12);
        assert!((pts[4].chi1a1 - a).abs() < 1e-12);
        assert!(pts.iter().filter(|p| p.branch == RegionBranch::Upper).all(|p| p.chi2a2 == a));
        assert!(region_boundary(&sum, a + b, 5).unwrap().is_empty());
    }

    #[test]
    fn region_rejects_infinite_critical_values() {
        let (_, sum) = cosine();
        assert!(region_boundary(&sum, 0.5, 8).is_err());
    }

    #[test]
    fn invalid_params() {
        assert!(TwoSpeciesParams::new(1.0, L, (1.0, 1.0, -0.1), (1, 1)).is_err());
        assert!(TwoSpeciesParams::new(1.0, L, (1.0, 1.0, 0.1), (1, 0)).is_err());
        assert!(ScalarParams::new(0.0, L, 1.0).is_err());
    }
}
