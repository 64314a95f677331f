//! Reduction of almost periodic data to a periodic problem on 𝕋ᵐ.
//!
//! Data `u₀(x) = Σ a_λ e^{2πiλ·x}` with spectrum generating a group of rank
//! `m` is written as `u₀(x) = v₀(Λx)`, where the rows of `Λ` are a basis
//! `λ_1..λ_m` of that group and `v₀(y) = Σ a_{λ(k̄)} e^{2πik̄·y}`. The lifted
//! problem carries the flux `φ̃_j = λ_j·φ`. Torus solutions are pulled back
//! along the orbit `y(x) = z + Λx mod 1`, and Besicovitch means are estimated
//! by midpoint quadrature over growing cubes `C_R = [-R/2, R/2]ⁿ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::flux::{flux_along, lift_flux, FluxError, PiecewiseFlux};
use crate::freqlattice::{group_basis, same_basis, Frequency, LatticeError, SpectrumGroupBasis};
use crate::solver::CellField;
use crate::sum::pairwise_sum;
use crate::trigpoly::{TorusPoly, TrigError, TrigPoly};

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("data and flux use different frequency bases")]
    BasisMismatch,
    #[error("data lives in ℝ^{data}, flux in ℝ^{flux}")]
    DimensionMismatch { data: usize, flux: usize },
    #[error("no initial data given")]
    NoData,
    #[error("offset has {got} components, torus has {expected}")]
    OffsetLength { expected: usize, got: usize },
    #[error("cube radii must be positive and strictly increasing")]
    Radii,
    #[error("only p = 1 and p = 2 are supported, got {0}")]
    Exponent(u32),
    #[error("need at least one sample per unit length")]
    Samples,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Flux(#[from] FluxError),
    #[error(transparent)]
    Trig(#[from] TrigError),
}

/// A conservation law on 𝕋ᵐ equivalent to an almost periodic problem on ℝⁿ.
#[derive(Debug, Clone)]
pub struct LiftedProblem {
    group: SpectrumGroupBasis,
    rows: Vec<Frequency>,
    v0: TorusPoly,
    flux: PiecewiseFlux,
    flux_source: PiecewiseFlux,
    lambda: Vec<Vec<f64>>,
    z: Vec<f64>,
}

impl LiftedProblem {
    pub fn group(&self) -> &SpectrumGroupBasis {
        &self.group
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.group.n()
    }

    pub fn v0(&self) -> &TorusPoly {
        &self.v0
    }

    pub fn lifted_flux(&self) -> &PiecewiseFlux {
        &self.flux
    }

    /// Exact rows `λ_j` of `Λ`. The first `group().rank()` rows are the
    /// group basis.
    pub fn lambda(&self) -> &[Frequency] {
        &self.rows
    }

    /// Float shadow of `Λ`, `m × n`.
    pub fn lambda_values(&self) -> &[Vec<f64>] {
        &self.lambda
    }

    pub fn offset(&self) -> &[f64] {
        &self.z
    }

    pub fn with_offset(mut self, z: Vec<f64>) -> Result<Self, LiftError> {
        if z.len() != self.m() {
            return Err(LiftError::OffsetLength {
                expected: self.m(),
                got: z.len(),
            });
        }
        self.z = z;
        Ok(self)
    }

    /// The coordinate set `J ⊂ ℤᵐ` of the data.
    pub fn coordinate_set(&self) -> Vec<Vec<i64>> {
        self.v0.terms().keys().cloned().collect()
    }

    /// Embeds the problem into a larger torus by appending rows to `Λ`.
    /// The data do not depend on the new coordinates, so every Fourier mode
    /// with a nonzero new component lies outside the data's group.
    pub fn enlarge(&self, extra: &[Frequency]) -> Result<LiftedProblem, LiftError> {
        let mut rows = self.rows.clone();
        rows.extend_from_slice(extra);
        let m = rows.len();
        let pad = |k: &Vec<i64>| {
            let mut k = k.clone();
            k.resize(m, 0);
            k
        };
        let terms: Vec<(Vec<i64>, Complex64)> =
            self.v0.terms().iter().map(|(k, a)| (pad(k), *a)).collect();
        let mut z = self.z.clone();
        z.resize(m, 0.0);
        Ok(LiftedProblem {
            group: self.group.clone(),
            v0: TorusPoly::from_terms(m, terms)?,
            flux: flux_along(&self.flux_source, &rows)?,
            lambda: rows.iter().map(Frequency::values).collect(),
            rows,
            flux_source: self.flux_source.clone(),
            z,
        })
    }

    /// `y(x) = z + Λx mod 1`.
    pub fn orbit_point(&self, x: &[f64]) -> Vec<f64> {
        orbit_point(&self.lambda, &self.z, x)
    }
}

fn orbit_point(lambda: &[Vec<f64>], z: &[f64], x: &[f64]) -> Vec<f64> {
    lambda
        .iter()
        .zip(z)
        .map(|(row, zj)| (zj + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).rem_euclid(1.0))
        .collect()
}

fn check_data(u0: &TrigPoly, flux: &PiecewiseFlux) -> Result<(), LiftError> {
    if !same_basis(u0.basis(), flux.basis()) {
        return Err(LiftError::BasisMismatch);
    }
    if u0.n() != flux.n() {
        return Err(LiftError::DimensionMismatch {
            data: u0.n(),
            flux: flux.n(),
        });
    }
    Ok(())
}

fn lift_with(
    u0: &TrigPoly,
    group: &SpectrumGroupBasis,
    flux: &PiecewiseFlux,
) -> Result<LiftedProblem, LiftError> {
    let m = group.rank();
    let mut terms = BTreeMap::new();
    for (lambda, a) in u0.terms() {
        let k = group
            .coords_of(lambda)
            .expect("every spectral point generates the group");
        terms.insert(k.to_vec(), *a);
    }
    Ok(LiftedProblem {
        group: group.clone(),
        rows: group.basis().to_vec(),
        v0: TorusPoly::from_terms(m, terms)?,
        flux: lift_flux(flux, group)?,
        flux_source: flux.clone(),
        lambda: group.lambda_values(),
        z: vec![0.0; m],
    })
}

/// Lifts `u0` using a basis of the group generated by its own spectrum.
pub fn lift_problem(u0: &TrigPoly, flux: &PiecewiseFlux) -> Result<LiftedProblem, LiftError> {
    lift_problems(std::slice::from_ref(u0), flux).map(|mut v| v.remove(0))
}

/// Lifts several data sets onto one torus: the group basis is computed from
/// the union of their spectra, so the lifted problems share `Λ` and flux.
pub fn lift_problems(
    data: &[TrigPoly],
    flux: &PiecewiseFlux,
) -> Result<Vec<LiftedProblem>, LiftError> {
    if data.is_empty() {
        return Err(LiftError::NoData);
    }
    for u in data {
        check_data(u, flux)?;
    }
    let spectrum: Vec<Frequency> = data
        .iter()
        .flat_map(|u| u.spectrum().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let basis: &Arc<_> = flux.basis();
    let group = group_basis(basis, flux.n(), &spectrum)?;
    data.iter().map(|u| lift_with(u, &group, flux)).collect()
}

/// Multilinear periodic interpolation of cell averages, nodes at the cell
/// centers `(i + 1/2)h`.
pub fn interpolate(v: &CellField, y: &[f64]) -> f64 {
    let grid = v.grid();
    let m = grid.m();
    assert_eq!(y.len(), m, "point dimension must match the grid");
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut w = [0.0f64; 3];
    for j in 0..m {
        let n = grid.cells()[j];
        let s = y[j].rem_euclid(1.0) * n as f64 - 0.5;
        let i0 = s.floor();
        w[j] = s - i0;
        let i0 = (i0 as i64).rem_euclid(n as i64) as usize;
        lo[j] = i0;
        hi[j] = (i0 + 1) % n;
    }
    let values = v.values();
    let mut acc = 0.0;
    for corner in 0..(1usize << m) {
        let mut weight = 1.0;
        let mut p = 0;
        for j in 0..m {
            let up = corner >> (m - 1 - j) & 1 == 1;
            weight *= if up { w[j] } else { 1.0 - w[j] };
            p = p * grid.cells()[j] + if up { hi[j] } else { lo[j] };
        }
        acc += weight * values[p];
    }
    acc
}

/// `v(z + Λx mod 1)` for every `x`, by multilinear interpolation.
pub fn pullback_sample(v: &CellField, lambda: &[Vec<f64>], z: &[f64], xs: &[Vec<f64>]) -> Vec<f64> {
    xs.par_iter()
        .map(|x| interpolate(v, &orbit_point(lambda, z, x)))
        .collect()
}

/// Midpoint nodes per axis for a cube of side `r`.
fn nodes(r: f64, samples_per_unit: u32) -> Vec<f64> {
    let count = ((r * samples_per_unit as f64).ceil() as usize).max(1);
    let h = r / count as f64;
    (0..count)
        .map(|i| -0.5 * r + (i as f64 + 0.5) * h)
        .collect()
}

/// Average of `f` over `C_R ⊂ ℝⁿ` by the midpoint rule.
pub fn cube_average(
    f: impl Fn(&[f64]) -> f64 + Sync,
    n: usize,
    r: f64,
    samples_per_unit: u32,
) -> f64 {
    let axis = nodes(r, samples_per_unit);
    let total = axis.len().pow(n as u32);
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|mut p| {
            let mut x = vec![0.0; n];
            for xj in x.iter_mut().rev() {
                *xj = axis[p % axis.len()];
                p /= axis.len();
            }
            f(&x)
        })
        .collect();
    pairwise_sum(&values) / total as f64
}

/// Estimate of `⨍ w(z + y(x)) dx` over `C_R`.
pub fn orbit_mean(
    w: &CellField,
    lambda: &[Vec<f64>],
    z: &[f64],
    r: f64,
    samples_per_unit: u32,
) -> f64 {
    let n = lambda.first().map_or(0, Vec::len);
    cube_average(
        |x| interpolate(w, &orbit_point(lambda, z, x)),
        n,
        r,
        samples_per_unit,
    )
}

/// Orbit mean of `w(y)·e^{-2πik̄·y}`: recovers the Fourier coefficient
/// `a_k̄` of `w` for an ergodic orbit.
pub fn bohr_coefficient(
    w: &CellField,
    k: &[i64],
    lambda: &[Vec<f64>],
    z: &[f64],
    r: f64,
    samples_per_unit: u32,
) -> Complex64 {
    let n = lambda.first().map_or(0, Vec::len);
    let part = |re: bool| {
        cube_average(
            |x| {
                let y = orbit_point(lambda, z, x);
                let phase = -2.0
                    * PI
                    * k.iter()
                        .zip(&y)
                        .map(|(&kj, yj)| kj as f64 * yj)
                        .sum::<f64>();
                let v = interpolate(w, &y);
                if re {
                    v * phase.cos()
                } else {
                    v * phase.sin()
                }
            },
            n,
            r,
            samples_per_unit,
        )
    };
    Complex64::new(part(true), part(false))
}

/// Cube estimates of the mean `Lᵖ` seminorm `N_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeMeanReport {
    pub radii: Vec<f64>,
    pub estimates: Vec<f64>,
    pub value: f64,
}

impl CubeMeanReport {
    /// Whether the last two estimates differ by less than `2·tol`.
    pub fn settled(&self, tol: f64) -> bool {
        match self.estimates.as_slice() {
            [.., a, b] => (a - b).abs() < 2.0 * tol,
            _ => false,
        }
    }
}

pub fn cube_seminorm(
    f: impl Fn(&[f64]) -> f64 + Sync,
    n: usize,
    p: u32,
    radii: &[f64],
    samples_per_unit: u32,
) -> Result<CubeMeanReport, LiftError> {
    if p != 1 && p != 2 {
        return Err(LiftError::Exponent(p));
    }
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LiftError::Radii);
    }
    if samples_per_unit == 0 {
        return Err(LiftError::Samples);
    }
    let estimates: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let avg = cube_average(|x| f(x).abs().powi(p as i32), n, r, samples_per_unit);
            if p == 1 {
                avg
            } else {
                avg.sqrt()
            }
        })
        .collect();
    Ok(CubeMeanReport {
        radii: radii.to_vec(),
        value: *estimates.last().expect("radii are nonempty"),
        estimates,
    })
}
