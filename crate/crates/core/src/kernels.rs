//! Even, zero-mean interaction kernels on the torus and their cosine spectra.
//!
//! Kernels are carried as truncated cosine series. Convolution multiplies
//! Fourier mode k by sqrt(L/2) * W~(k), so linear symbols computed from the
//! coefficients agree exactly with the discrete operators.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{basis, Spectral, TorusGrid};

/// Relative threshold under which a coefficient counts as zero.
pub const EPS_ZERO: f64 = 1e-10;
/// Relative tolerance for ties between extremal wavenumbers.
pub const EPS_CARD: f64 = 1e-9;
/// Default spectral truncation.
pub const DEFAULT_K_MAX: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    /// sign / (2R) on |x| <= R, minus its mean.
    #[serde(rename = "tophat")]
    TopHat {
        #[serde(rename = "R")]
        radius: f64,
        sign: i32,
    },
    /// amplitude * cos(2 pi m x / L).
    #[serde(rename = "cosine")]
    CosineMode { m: usize, amplitude: f64 },
    /// Samples x ascending over one period; read from `path` when `samples` is empty.
    #[serde(rename = "tabulated")]
    Tabulated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        samples: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Analytic,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelClass {
    TopHat,
    Cosine,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralKernel {
    pub length: f64,
    /// coeffs[k - 1] = W~(k).
    pub coeffs: Vec<f64>,
    pub k_max: usize,
    pub provenance: Provenance,
    pub class: KernelClass,
    /// Bound on |W~(k)| for every k > K_max, when one is known.
    pub tail_bound: Option<f64>,
}

impl KernelSpec {
    pub fn tophat(radius: f64, sign: i32) -> Self {
        KernelSpec::TopHat { radius, sign }
    }

    pub fn cosine(m: usize, amplitude: f64) -> Self {
        KernelSpec::CosineMode { m, amplitude }
    }

    pub fn tabulated(samples: Vec<(f64, f64)>) -> Self {
        KernelSpec::Tabulated {
            path: None,
            samples,
        }
    }

    /// Sample a function on `grid` as a tabulated kernel.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::tabulated(grid.nodes().into_iter().map(|x| (x, f(x))).collect())
    }

    /// Load `x,value` rows; relative paths resolve against `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<KernelSpec> {
        match self {
            KernelSpec::Tabulated {
                path: Some(p),
                samples,
            } if samples.is_empty() => {
                let full = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                Ok(KernelSpec::Tabulated {
                    path: Some(p.clone()),
                    samples: parse_table(&text)?,
                })
            }
            other => Ok(other.clone()),
        }
    }
}

fn parse_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (a, b) = (parts.next(), parts.next());
        if i == 0 && a == Some("x") {
            continue;
        }
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidKernel(format!("bad row {}: {line}", i + 1)))
        };
        rows.push((parse(a)?, parse(b)?));
    }
    Ok(rows)
}

/// Closed form of W~(k) for the normalized top hat.
pub fn tophat_coefficient(radius: f64, sign: i32, length: f64, k: usize) -> f64 {
    let z = 2.0 * PI * k as f64 * radius / length;
    sign as f64 * (2.0 / length).sqrt() * z.sin() / z
}

pub fn cosine_transform(kernel: &KernelSpec, length: f64, k_max: usize) -> Result<SpectralKernel> {
    if k_max < 1 {
        return Err(Error::InvalidKernel("K_max must be at least 1".into()));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidKernel(format!("L must be positive, got {length}")));
    }
    match *kernel {
        KernelSpec::TopHat { radius, sign } => {
            if !(radius > 0.0 && radius < 0.5 * length) {
                return Err(Error::InvalidKernel(format!(
                    "top hat radius must lie in (0, L/2), got {radius}"
                )));
            }
            if sign != 1 && sign != -1 {
                return Err(Error::InvalidKernel(format!("sign must be +1 or -1, got {sign}")));
            }
            let coeffs = (1..=k_max)
                .map(|k| tophat_coefficient(radius, sign, length, k))
                .collect();
            let tail = (2.0 / length).sqrt() * length / (2.0 * PI * (k_max + 1) as f64 * radius);
            Ok(SpectralKernel {
                length,
                coeffs,
                k_max,
                provenance: Provenance::Analytic,
                class: KernelClass::TopHat,
                tail_bound: Some(tail),
            })
        }
        KernelSpec::CosineMode { m, amplitude } => {
            if m == 0 {
                return Err(Error::InvalidKernel("cosine mode m must be >= 1".into()));
            }
            if !amplitude.is_finite() {
                return Err(Error::InvalidKernel("amplitude must be finite".into()));
            }
            let mut coeffs = vec![0.0; k_max];
            if m <= k_max {
                coeffs[m - 1] = amplitude * (0.5 * length).sqrt();
            }
            let tail = if m <= k_max {
                0.0
            } else {
                amplitude.abs() * (0.5 * length).sqrt()
            };
            Ok(SpectralKernel {
                length,
                coeffs,
                k_max,
                provenance: Provenance::Analytic,
                class: KernelClass::Cosine,
                tail_bound: Some(tail),
            })
        }
        KernelSpec::Tabulated { ref samples, .. } => tabulated_transform(samples, length, k_max),
    }
}

fn tabulated_transform(samples: &[(f64, f64)], length: f64, k_max: usize) -> Result<SpectralKernel> {
    let n = samples.len();
    if n < 16 || n % 2 != 0 {
        return Err(Error::InvalidKernel(format!(
            "tabulated kernel needs an even number (>= 16) of samples, got {n}"
        )));
    }
    let h = length / n as f64;
    let x0 = samples[0].0;
    for (j, &(x, v)) in samples.iter().enumerate() {
        if (x - (x0 + j as f64 * h)).abs() > 1e-9 * length || !v.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "samples must be finite and uniformly spaced over one period (row {j})"
            )));
        }
    }
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let sup = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let wrap = |x: f64| x - length * ((x + 0.5 * length) / length).floor();
    let mut asymmetry = 0.0_f64;
    for (j, &(x, v)) in samples.iter().enumerate() {
        let target = wrap(-x);
        let pos = (target - wrap(x0)) / h;
        let i = pos.round().rem_euclid(n as f64) as usize;
        if (pos - pos.round()).abs() > 1e-6 {
            return Err(Error::InvalidKernel(format!(
                "node -x_{j} is not a sample; the grid must be symmetric about 0"
            )));
        }
        asymmetry = asymmetry.max((v - values[i]).abs());
    }
    let tolerance = 1e-8 * sup;
    if asymmetry > tolerance {
        return Err(Error::NotEven {
            asymmetry,
            tolerance,
        });
    }
    let trapezoid = |k: usize| {
        h * samples
            .iter()
            .map(|&(x, v)| v * basis(length, k, x))
            .sum::<f64>()
    };
    let coeffs = (1..=k_max).map(trapezoid).collect();
    // The samples define a trigonometric interpolant with modes up to n/2.
    let tail_bound = Some(
        (k_max + 1..=n / 2)
            .map(|k| trapezoid(k).abs())
            .fold(0.0, f64::max),
    );
    Ok(SpectralKernel {
        length,
        coeffs,
        k_max,
        provenance: Provenance::Quadrature,
        class: KernelClass::Tabulated,
        tail_bound,
    })
}

impl SpectralKernel {
    /// W~(k) for k >= 1; zero beyond K_max.
    pub fn coefficient(&self, k: usize) -> f64 {
        if k == 0 || k > self.k_max {
            0.0
        } else {
            self.coeffs[k - 1]
        }
    }

    /// sqrt(L/2) W~(k): the factor by which convolution scales mode k.
    pub fn multiplier(&self, k: usize) -> f64 {
        (0.5 * self.length).sqrt() * self.coefficient(k)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn zero_threshold(&self) -> f64 {
        EPS_ZERO * self.max_abs()
    }

    pub fn is_zero(&self, k: usize) -> bool {
        self.coefficient(k).abs() <= self.zero_threshold()
    }

    /// sigma sqrt(2L) / W~(k), or None when W~(k) counts as zero.
    pub fn h(&self, sigma: f64, k: usize) -> Option<f64> {
        if k == 0 || k > self.k_max || self.is_zero(k) {
            None
        } else {
            Some(sigma * (2.0 * self.length).sqrt() / self.coefficient(k))
        }
    }

    /// Kernel values on `grid` from the truncated series.
    pub fn evaluate(&self, grid: &TorusGrid) -> Vec<f64> {
        grid.nodes()
            .into_iter()
            .map(|x| {
                (1..=self.k_max)
                    .map(|k| self.coefficient(k) * basis(self.length, k, x))
                    .sum()
            })
            .collect()
    }

    /// sup |W''| of the truncated series, sampled on 8 K_max points.
    pub fn second_derivative_sup(&self) -> Result<f64> {
        if self.class == KernelClass::TopHat {
            return Err(Error::Unsupported(
                "top-hat kernels have no bounded second derivative".into(),
            ));
        }
        let m = 8 * self.k_max.max(8);
        let l = self.length;
        let sup = (0..m)
            .map(|j| {
                let x = -0.5 * l + j as f64 * l / m as f64;
                (1..=self.k_max)
                    .map(|k| {
                        let q = 2.0 * PI * k as f64 / l;
                        -q * q * self.coefficient(k) * basis(l, k, x)
                    })
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max);
        Ok(sup)
    }
}

pub fn h_k(spectral: &SpectralKernel, sigma: f64, k: usize) -> Option<f64> {
    spectral.h(sigma, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSummary {
    pub sigma: f64,
    pub length: f64,
    pub k_plus: Vec<usize>,
    pub k_minus: Vec<usize>,
    /// alpha*(W); +inf when no coefficient is negative.
    #[serde(with = "crate::emit::ext_real")]
    pub alpha_star_plus: f64,
    /// alpha*(-W); +inf when no coefficient is positive.
    #[serde(with = "crate::emit::ext_real")]
    pub alpha_star_minus: f64,
    pub k_w: Option<usize>,
    pub k_minus_w: Option<usize>,
    /// Wavenumbers attaining min W~ (more than one means non-simple).
    pub argmin: Vec<usize>,
    pub argmax: Vec<usize>,
    /// False when the tail beyond K_max could not be bounded.
    pub tail_verified: bool,
}

impl KernelSummary {
    pub fn non_simple(&self) -> bool {
        self.argmin.len() > 1 || self.argmax.len() > 1
    }

    /// h at k_W, i.e. -alpha*(W).
    pub fn h_w(&self) -> f64 {
        -self.alpha_star_plus
    }

    /// h at k_{-W}, i.e. alpha*(-W).
    pub fn h_minus_w(&self) -> f64 {
        self.alpha_star_minus
    }
}

pub fn kernel_summary(spectral: &SpectralKernel, sigma: f64) -> Result<KernelSummary> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParams(format!("sigma must be positive, got {sigma}")));
    }
    let eps = spectral.zero_threshold();
    let ks = 1..=spectral.k_max;
    let k_plus: Vec<usize> = ks.clone().filter(|&k| spectral.coefficient(k) > eps).collect();
    let k_minus: Vec<usize> = ks.filter(|&k| spectral.coefficient(k) < -eps).collect();
    let scale = sigma * (2.0 * spectral.length).sqrt();

    let extremal = |set: &[usize], pick: fn(f64, f64) -> f64| -> (f64, Vec<usize>) {
        let best = set
            .iter()
            .map(|&k| spectral.coefficient(k))
            .fold(f64::NAN, |a, b| if a.is_nan() { b } else { pick(a, b) });
        let ties = set
            .iter()
            .copied()
            .filter(|&k| (spectral.coefficient(k) - best).abs() <= EPS_CARD * best.abs())
            .collect();
        (best, ties)
    };

    let (min, argmin) = if k_minus.is_empty() {
        (f64::NAN, Vec::new())
    } else {
        extremal(&k_minus, f64::min)
    };
    let (max, argmax) = if k_plus.is_empty() {
        (f64::NAN, Vec::new())
    } else {
        extremal(&k_plus, f64::max)
    };

    let mut tail_verified = true;
    if let Some(tail) = spectral.tail_bound {
        for ext in [min, max] {
            if !ext.is_nan() && tail >= ext.abs() {
                return Err(Error::TruncationTooShort {
                    k_max: spectral.k_max,
                });
            }
        }
    } else {
        tail_verified = false;
    }

    Ok(KernelSummary {
        sigma,
        length: spectral.length,
        alpha_star_plus: if k_minus.is_empty() { f64::INFINITY } else { -scale / min },
        alpha_star_minus: if k_plus.is_empty() { f64::INFINITY } else { scale / max },
        k_w: (argmin.len() == 1).then(|| argmin[0]),
        k_minus_w: (argmax.len() == 1).then(|| argmax[0]),
        k_plus,
        k_minus,
        argmin,
        argmax,
        tail_verified,
    })
}

/// W * u for a field on `spectral.grid` (any parity).
pub fn convolve(ops: &Spectral, kernel: &SpectralKernel, u: &[f64]) -> Result<Vec<f64>> {
    check_resolution(&ops.grid, kernel)?;
    Ok(convolve_unchecked(ops, kernel, u))
}

pub(crate) fn check_resolution(grid: &TorusGrid, kernel: &SpectralKernel) -> Result<()> {
    if kernel.k_max >= grid.n / 2 {
        return Err(Error::Aliasing {
            k_max: kernel.k_max,
            half: grid.n / 2,
        });
    }
    if (kernel.length - grid.length).abs() > 1e-12 * grid.length {
        return Err(Error::InvalidGrid(format!(
            "kernel built for L = {} but grid has L = {}",
            kernel.length, grid.length
        )));
    }
    Ok(())
}

pub(crate) fn convolve_unchecked(ops: &Spectral, kernel: &SpectralKernel, u: &[f64]) -> Vec<f64> {
    ops.filter(u, |k| if k == 0 { 0.0 } else { kernel.multiplier(k) })
}

#[cfg(test)]
mod tests {
    use super::*;

    const L: f64 = 2.0 * PI;

    #[test]
    fn cosine_mode_coefficients() {
        let s = cosine_transform(&KernelSpec::cosine(1, -1.0), L, 16).unwrap();
        assert!((s.coefficient(1) + PI.sqrt()).abs() < 1e-15);
        assert!((2..=16).all(|k| s.coefficient(k) == 0.0));
        assert_eq!(s.h(1.0, 1), Some(-2.0));
        assert_eq!(s.h(1.0, 2), None);
    }

    #[test]
    fn tophat_zero_at_k5() {
        let s = cosine_transform(&KernelSpec::tophat(PI / 5.0, 1), L, 16).unwrap();
        assert!(s.coefficient(5).abs() < 1e-15);
        assert!(s.h(1.0, 5).is_none());
    }

    #[test]
    fn tophat_rejects_bad_radius_and_sign() {
        assert!(cosine_transform(&KernelSpec::tophat(PI, 1), L, 16).is_err());
        assert!(cosine_transform(&KernelSpec::tophat(0.0, 1), L, 16).is_err());
        assert!(cosine_transform(&KernelSpec::tophat(1.0, 2), L, 16).is_err());
    }

    #[test]
    fn summary_cosine_sign_flip() {
        let s = cosine_transform(&KernelSpec::cosine(1, -1.0), L, 16).unwrap();
        let sum = kernel_summary(&s, 1.0).unwrap();
        assert!((sum.alpha_star_plus - 2.0).abs() < 1e-14);
        assert_eq!(sum.k_w, Some(1));
        assert!(sum.alpha_star_minus.is_infinite());
        assert!(sum.k_plus.is_empty());

        let s = cosine_transform(&KernelSpec::cosine(1, 1.0), L, 16).unwrap();
        let sum = kernel_summary(&s, 1.0).unwrap();
        assert!(sum.alpha_star_plus.is_infinite());
        assert!((sum.alpha_star_minus - 2.0).abs() < 1e-14);
        assert_eq!(sum.k_minus_w, Some(1));
    }

    #[test]
    fn summary_flags_ties() {
        let g = TorusGrid::new(L, 64).unwrap();
        let k = KernelSpec::from_fn(&g, |x| -x.cos() - (2.0 * x).cos());
        let s = cosine_transform(&k, L, 31).unwrap();
        let sum = kernel_summary(&s, 1.0).unwrap();
        assert_eq!(sum.argmin, vec![1, 2]);
        assert!(sum.k_w.is_none());
        assert!(sum.non_simple());
    }

    #[test]
    fn short_truncation_is_rejected() {
        // The bound at K_max = 2 exceeds the extremal coefficients.
        let s = cosine_transform(&KernelSpec::tophat(0.2, 1), L, 2).unwrap();
        assert!(matches!(
            kernel_summary(&s, 1.0),
            Err(Error::TruncationTooShort { .. })
        ));
    }

    #[test]
    fn tabulated_rejects_odd_kernel() {
        let g = TorusGrid::new(L, 64).unwrap();
        let k = KernelSpec::from_fn(&g, |x| x.sin());
        assert!(matches!(
            cosine_transform(&k, L, 16),
            Err(Error::NotEven { .. })
        ));
    }

    #[test]
    fn tabulated_matches_cosine_mode() {
        let g = TorusGrid::new(L, 64).unwrap();
        let k = KernelSpec::from_fn(&g, |x| 0.7 * (3.0 * x).cos());
        let s = cosine_transform(&k, L, 31).unwrap();
        let c = cosine_transform(&KernelSpec::cosine(3, 0.7), L, 31).unwrap();
        for kk in 1..=31 {
            assert!((s.coefficient(kk) - c.coefficient(kk)).abs() < 1e-13);
        }
        assert!(s.tail_bound.unwrap() < 1e-13);
    }

    #[test]
    fn convolution_rejects_aliasing() {
        let g = TorusGrid::new(L, 32).unwrap();
        let ops = Spectral::new(g);
        let s = cosine_transform(&KernelSpec::cosine(1, -1.0), L, 16).unwrap();
        assert!(matches!(
            convolve(&ops, &s, &vec![0.0; 32]),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn convolution_of_mode_one() {
        let g = TorusGrid::new(L, 64).unwrap();
        let ops = Spectral::new(g);
        let s = cosine_transform(&KernelSpec::cosine(1, -1.0), L, 16).unwrap();
        let w1 = g.mode(1);
        let c = convolve(&ops, &s, &w1).unwrap();
        for (a, b) in c.iter().zip(&w1) {
            assert!((a + PI * b).abs() < 1e-13);
        }
        let flat = convolve(&ops, &s, &vec![1.0 / L; 64]).unwrap();
        assert!(flat.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn second_derivative_sup_of_cosine() {
        let s = cosine_transform(&KernelSpec::cosine(2, -0.5), L, 16).unwrap();
        assert!((s.second_derivative_sup().unwrap() - 2.0).abs() < 1e-12);
        let t = cosine_transform(&KernelSpec::tophat(1.0, 1), L, 16).unwrap();
        assert!(t.second_derivative_sup().is_err());
    }
}
