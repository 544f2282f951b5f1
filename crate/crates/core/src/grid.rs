//! Uniform periodic grid on (-L/2, L/2) and the FFT plumbing shared by the
//! convolution, differentiation and projection routines.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes x_j = -L/2 + j L / N, j = 0..N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub length: f64,
    pub n: usize,
}

impl TorusGrid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("L must be positive, got {length}")));
        }
        if n < 16 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("N must be even and >= 16, got {n}")));
        }
        Ok(Self { length, n })
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Index of the node at -x_j.
    pub fn mirror(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    /// Orthonormal cosine mode w_k sampled on the nodes.
    pub fn mode(&self, k: usize) -> Vec<f64> {
        self.nodes()
            .into_iter()
            .map(|x| basis(self.length, k, x))
            .collect()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.spacing() * f.iter().sum::<f64>()
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.spacing() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// <f, w_k> by trapezoid quadrature.
    pub fn project(&self, f: &[f64], k: usize) -> f64 {
        let h = self.spacing();
        f.iter()
            .enumerate()
            .map(|(j, v)| v * basis(self.length, k, self.node(j)))
            .sum::<f64>()
            * h
    }

    /// Largest |f(x) - f(-x)| over the nodes.
    pub fn asymmetry(&self, f: &[f64]) -> f64 {
        (0..self.n)
            .map(|j| (f[j] - f[self.mirror(j)]).abs())
            .fold(0.0, f64::max)
    }

    pub fn symmetrize(&self, f: &mut [f64]) {
        let g: Vec<f64> = (0..self.n).map(|j| 0.5 * (f[j] + f[self.mirror(j)])).collect();
        f.copy_from_slice(&g);
    }
}

/// w_k(x) = sqrt(2/L) cos(2 pi k x / L), w_0 = 1/sqrt(L).
pub fn basis(length: f64, k: usize, x: f64) -> f64 {
    if k == 0 {
        1.0 / length.sqrt()
    } else {
        (2.0 / length).sqrt() * (2.0 * PI * k as f64 * x / length).cos()
    }
}

/// Forward/inverse FFT pair for a fixed grid.
#[derive(Clone)]
pub struct Spectral {
    pub grid: TorusGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n),
            inverse: planner.plan_fft_inverse(grid.n),
        }
    }

    /// Signed integer wavenumber stored at FFT index j.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.grid.n;
        if j <= n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    pub fn angular(&self, j: usize) -> f64 {
        2.0 * PI * self.wavenumber(j) as f64 / self.grid.length
    }

    pub fn forward(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    pub fn inverse(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.grid.n as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }

    /// Multiply every Fourier mode by `m(|k|)`.
    pub fn filter(&self, u: &[f64], m: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut hat = self.forward(u);
        for (j, c) in hat.iter_mut().enumerate() {
            *c *= m(self.wavenumber(j).unsigned_abs() as usize);
        }
        self.inverse(hat)
    }

    pub fn derivative(&self, u: &[f64]) -> Vec<f64> {
        let mut hat = self.forward(u);
        self.differentiate_hat(&mut hat);
        self.inverse(hat)
    }

    pub(crate) fn differentiate_hat(&self, hat: &mut [Complex64]) {
        let nyquist = self.grid.n / 2;
        for (j, c) in hat.iter_mut().enumerate() {
            if j == nyquist {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= Complex64::new(0.0, self.angular(j));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_odd_and_small() {
        assert!(TorusGrid::new(1.0, 15).is_err());
        assert!(TorusGrid::new(1.0, 8).is_err());
        assert!(TorusGrid::new(-1.0, 16).is_err());
        assert!(TorusGrid::new(1.0, 16).is_ok());
    }

    #[test]
    fn modes_are_orthonormal() {
        let g = TorusGrid::new(2.0 * PI, 64).unwrap();
        for a in 0..10 {
            for b in 0..10 {
                let ip = g.inner(&g.mode(a), &g.mode(b));
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-13, "{a} {b} {ip}");
            }
        }
    }

    #[test]
    fn mirror_maps_x_to_minus_x() {
        let g = TorusGrid::new(3.0, 32).unwrap();
        for j in 1..g.n {
            assert!((g.node(g.mirror(j)) + g.node(j)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_cosine() {
        let g = TorusGrid::new(2.0 * PI, 64).unwrap();
        let s = Spectral::new(g);
        let u: Vec<f64> = g.nodes().iter().map(|x| (3.0 * x).cos()).collect();
        let du = s.derivative(&u);
        for (x, d) in g.nodes().iter().zip(&du) {
            assert!((d + 3.0 * (3.0 * x).sin()).abs() < 1e-12);
        }
    }
}
