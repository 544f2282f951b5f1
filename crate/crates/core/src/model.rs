//! Scalar or two-species parameter sets behind one interface, and density
//! states on the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Spectral, TorusGrid};
use crate::kernels::{check_resolution, convolve_unchecked, SpectralKernel};
use crate::stability::{ScalarParams, TwoSpeciesParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    ScalarAlpha,
    Alpha1,
    Gamma,
}

impl ParamKind {
    pub fn label(&self) -> &'static str {
        match self {
            ParamKind::ScalarAlpha => "alpha-scalar",
            ParamKind::Alpha1 => "alpha1",
            ParamKind::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum System {
    Scalar(ScalarParams),
    TwoSpecies(TwoSpeciesParams),
}

impl System {
    pub fn sigma(&self) -> f64 {
        match self {
            System::Scalar(p) => p.sigma,
            System::TwoSpecies(p) => p.sigma,
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            System::Scalar(p) => p.length,
            System::TwoSpecies(p) => p.length,
        }
    }

    pub fn species(&self) -> usize {
        match self {
            System::Scalar(_) => 1,
            System::TwoSpecies(_) => 2,
        }
    }

    /// Interaction matrix a_ij: the potential felt by species i is
    /// sum_j a_ij W * u_j.
    pub fn coupling(&self) -> [[f64; 2]; 2] {
        match self {
            System::Scalar(p) => [[p.alpha, 0.0], [0.0, 0.0]],
            System::TwoSpecies(p) => [[p.x1(), p.gamma], [p.gamma, p.x2()]],
        }
    }

    pub fn param(&self, kind: ParamKind) -> Result<f64> {
        match (self, kind) {
            (System::Scalar(p), ParamKind::ScalarAlpha) => Ok(p.alpha),
            (System::TwoSpecies(p), ParamKind::Alpha1) => Ok(p.alpha1),
            (System::TwoSpecies(p), ParamKind::Gamma) => Ok(p.gamma),
            _ => Err(mismatch(kind)),
        }
    }

    pub fn with_param(&self, kind: ParamKind, value: f64) -> Result<System> {
        let out = match (*self, kind) {
            (System::Scalar(mut p), ParamKind::ScalarAlpha) => {
                p.alpha = value;
                p.validate()?;
                System::Scalar(p)
            }
            (System::TwoSpecies(mut p), ParamKind::Alpha1) => {
                p.alpha1 = value;
                p.validate()?;
                System::TwoSpecies(p)
            }
            (System::TwoSpecies(mut p), ParamKind::Gamma) => {
                p.gamma = value;
                p.validate()?;
                System::TwoSpecies(p)
            }
            _ => return Err(mismatch(kind)),
        };
        Ok(out)
    }
}

fn mismatch(kind: ParamKind) -> Error {
    Error::InvalidParams(format!("parameter {} does not apply to this model", kind.label()))
}

/// One density field per species on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub grid: TorusGrid,
    pub components: Vec<Vec<f64>>,
}

impl GridState {
    pub fn homogeneous(grid: TorusGrid, species: usize) -> Self {
        let v = vec![1.0 / grid.length; grid.n];
        Self {
            grid,
            components: vec![v; species],
        }
    }

    /// 1/L + amplitudes[i] * w_k per component.
    pub fn mode_perturbation(grid: TorusGrid, k: usize, amplitudes: &[f64]) -> Self {
        let w = grid.mode(k);
        let components = amplitudes
            .iter()
            .map(|a| w.iter().map(|v| 1.0 / grid.length + a * v).collect())
            .collect();
        Self { grid, components }
    }

    pub fn species(&self) -> usize {
        self.components.len()
    }

    pub fn u1(&self) -> &[f64] {
        &self.components[0]
    }

    pub fn u2(&self) -> Option<&[f64]> {
        self.components.get(1).map(Vec::as_slice)
    }

    pub fn masses(&self) -> Vec<f64> {
        self.components.iter().map(|u| self.grid.integrate(u)).collect()
    }

    pub fn min(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// L2 distance summed over components.
    pub fn distance(&self, other: &GridState) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| {
                let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                self.grid.inner(&d, &d)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance_to_homogeneous(&self) -> f64 {
        self.distance(&GridState::homogeneous(self.grid, self.species()))
    }

    /// <u_i - 1/L, w_k> per component.
    pub fn amplitudes(&self, k: usize) -> Vec<f64> {
        self.components.iter().map(|u| self.grid.project(u, k)).collect()
    }

    pub fn asymmetry(&self) -> f64 {
        self.components
            .iter()
            .map(|u| self.grid.asymmetry(u))
            .fold(0.0, f64::max)
    }

    pub fn symmetrized(&self) -> GridState {
        let mut out = self.clone();
        for u in &mut out.components {
            self.grid.symmetrize(u);
        }
        out
    }

    pub fn check_compatible(&self, system: &System) -> Result<()> {
        if self.species() != system.species() {
            return Err(Error::InvalidParams(format!(
                "state has {} components, model has {}",
                self.species(),
                system.species()
            )));
        }
        if self.components.iter().any(|u| u.len() != self.grid.n) {
            return Err(Error::InvalidGrid("component length differs from N".into()));
        }
        if (self.grid.length - system.length()).abs() > 1e-12 * system.length() {
            return Err(Error::InvalidGrid("state and model disagree on L".into()));
        }
        Ok(())
    }
}

/// A grid with its FFT plans and a kernel resolved on it.
#[derive(Debug, Clone)]
pub struct Discrete {
    pub ops: Spectral,
    pub kernel: SpectralKernel,
}

impl Discrete {
    pub fn new(grid: TorusGrid, kernel: SpectralKernel) -> Result<Self> {
        check_resolution(&grid, &kernel)?;
        Ok(Self {
            ops: Spectral::new(grid),
            kernel,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.ops.grid
    }

    pub fn convolve(&self, u: &[f64]) -> Vec<f64> {
        convolve_unchecked(&self.ops, &self.kernel, u)
    }

    /// phi_i = sum_j a_ij W * u_j for each component.
    pub fn potentials(&self, system: &System, components: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let a = system.coupling();
        let conv: Vec<Vec<f64>> = components.iter().map(|u| self.convolve(u)).collect();
        (0..components.len())
            .map(|i| {
                (0..self.grid().n)
                    .map(|x| (0..components.len()).map(|j| a[i][j] * conv[j][x]).sum())
                    .collect()
            })
            .collect()
    }
}
