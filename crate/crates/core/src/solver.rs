//! First-order monotone finite-volume scheme on the periodic torus 𝕋ᵐ.
//!
//! The update is the unsplit conservative Rusanov (local Lax-Friedrichs)
//! scheme with one viscosity per axis and step, taken from [`lip_bound`] over
//! the current data range. Under the CFL restriction
//! `dt·Σ_j α_j/h_j ≤ 1/2` the scheme is monotone, hence conservative,
//! L¹-contractive, bounded by the data range and satisfies a cell entropy
//! inequality for every Kruzhkov entropy `|u - k|`.

use std::f64::consts::PI;
use std::fs;
use std::io::{self, Read};
use std::path::Path;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use thiserror::Error;

use crate::flux::{
    directional, lip_bound, nondegeneracy_check, FluxError, NdVerdict, PiecewiseFlux,
};
use crate::freqlattice::SpectrumGroupBasis;
use crate::lift::LiftedProblem;
use crate::sum::pairwise_sum;
use crate::trigpoly::TorusPoly;

/// Largest admissible CFL number.
pub const CFL_MAX: f64 = 0.5;
pub const DEFAULT_CFL: f64 = 0.45;
const PAR_MIN_LEN: usize = 4096;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("torus dimension {0} is outside 1..=3")]
    Dimension(usize),
    #[error("every axis needs at least 2 cells, got {0:?}")]
    TooFewCells(Vec<usize>),
    #[error("field has {got} values, grid has {expected} cells")]
    FieldLength { expected: usize, got: usize },
    #[error("field contains a non-finite value")]
    NonFinite,
    #[error("grids differ: {0:?} vs {1:?}")]
    GridMismatch(Vec<usize>, Vec<usize>),
    #[error("time step {dt:e} exceeds the CFL limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("problem rank {problem} does not match grid dimension {grid}")]
    RankMismatch { problem: usize, grid: usize },
    #[error("data range [{lo}, {hi}] leaves the flux working range [{flo}, {fhi}]")]
    OutsideFluxRange {
        lo: f64,
        hi: f64,
        flo: f64,
        fhi: f64,
    },
    #[error("traveling wave needs a < b, got [{0}, {1}]")]
    EmptyInterval(String, String),
    #[error("direction k̄ must be nonzero")]
    ZeroDirection,
    #[error("flux is not affine on [{a}, {b}] in the requested direction; non-degeneracy verdict: {verdict:?}")]
    NotAffine {
        a: String,
        b: String,
        verdict: Box<NdVerdict>,
    },
    #[error(transparent)]
    Flux(#[from] FluxError),
    #[error("field dump {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed field dump: {0}")]
    Dump(String),
}

/// Uniform periodic grid on 𝕋ᵐ, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusGrid {
    cells: Vec<usize>,
}

impl TorusGrid {
    pub fn new(cells: &[usize]) -> Result<Self, SolverError> {
        if !(1..=3).contains(&cells.len()) {
            return Err(SolverError::Dimension(cells.len()));
        }
        if cells.iter().any(|&n| n < 2) {
            return Err(SolverError::TooFewCells(cells.to_vec()));
        }
        Ok(TorusGrid {
            cells: cells.to_vec(),
        })
    }

    pub fn uniform(m: usize, n: usize) -> Result<Self, SolverError> {
        Self::new(&vec![n; m])
    }

    /// The zero-dimensional torus: one cell, used for constant data.
    pub fn point() -> Self {
        TorusGrid { cells: Vec::new() }
    }

    pub fn m(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.cells.iter().map(|&n| 1.0 / n as f64).product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.cells[axis + 1..].iter().product()
    }

    pub fn multi_index(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.m()];
        for j in (0..self.m()).rev() {
            idx[j] = p % self.cells[j];
            p /= self.cells[j];
        }
        idx
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.cells)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn center(&self, p: usize) -> Vec<f64> {
        self.multi_index(p)
            .iter()
            .zip(&self.cells)
            .map(|(&i, &n)| (i as f64 + 0.5) / n as f64)
            .collect()
    }

    /// Index of the neighbor `p + e_axis` (periodic).
    #[inline]
    fn forward(&self, p: usize, axis: usize, stride: usize) -> usize {
        let n = self.cells[axis];
        let c = (p / stride) % n;
        if c + 1 == n {
            p - c * stride
        } else {
            p + stride
        }
    }

    /// Index of the neighbor `p - e_axis` (periodic).
    #[inline]
    fn backward(&self, p: usize, axis: usize, stride: usize) -> usize {
        let n = self.cells[axis];
        let c = (p / stride) % n;
        if c == 0 {
            p + (n - 1) * stride
        } else {
            p - stride
        }
    }
}

/// Cell averages on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: TorusGrid,
    values: Vec<f64>,
    min: f64,
    max: f64,
}

impl CellField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self, SolverError> {
        if values.len() != grid.len() {
            return Err(SolverError::FieldLength {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite);
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Ok(CellField {
            grid,
            values,
            min,
            max,
        })
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        CellField::new(grid.clone(), vec![c; grid.len()]).expect("finite constant")
    }

    /// Point samples of `f` at the cell centers.
    pub fn sample(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self, SolverError> {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|p| f(&grid.center(p)))
            .collect();
        CellField::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// `∏h_j · Σ u_p`, the torus integral.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * pairwise_sum(&self.values)
    }

    /// `∏h_j · Σ |u_p - c|`.
    pub fn l1_to(&self, c: f64) -> f64 {
        let d: Vec<f64> = self.values.iter().map(|v| (v - c).abs()).collect();
        self.grid.cell_volume() * pairwise_sum(&d)
    }

    /// Midpoint-rule Fourier coefficient `∏h Σ u_p e^{-2πik·y_p}`.
    pub fn fourier_coeff(&self, k: &[i64]) -> Complex64 {
        assert_eq!(
            k.len(),
            self.grid.m(),
            "frequency dimension must match the grid"
        );
        let (re, im): (Vec<f64>, Vec<f64>) = (0..self.grid.len())
            .map(|p| {
                let y = self.grid.center(p);
                let phase: f64 = k.iter().zip(&y).map(|(&kj, yj)| kj as f64 * yj).sum();
                let z = Complex64::from_polar(self.values[p], -2.0 * PI * phase);
                (z.re, z.im)
            })
            .unzip();
        Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) * self.grid.cell_volume()
    }

    fn check_same_grid(&self, other: &CellField) -> Result<(), SolverError> {
        if self.grid != other.grid {
            return Err(SolverError::GridMismatch(
                self.grid.cells.clone(),
                other.grid.cells.clone(),
            ));
        }
        Ok(())
    }

    /// Conservative restriction onto a grid whose cell counts divide this one's.
    pub fn restrict(&self, coarse: &TorusGrid) -> Result<CellField, SolverError> {
        if coarse.m() != self.grid.m()
            || coarse
                .cells
                .iter()
                .zip(&self.grid.cells)
                .any(|(c, f)| f % c != 0)
        {
            return Err(SolverError::GridMismatch(
                self.grid.cells.clone(),
                coarse.cells.clone(),
            ));
        }
        let ratios: Vec<usize> = coarse
            .cells
            .iter()
            .zip(&self.grid.cells)
            .map(|(c, f)| f / c)
            .collect();
        let block: usize = ratios.iter().product();
        let mut acc = vec![0.0; coarse.len()];
        for p in 0..self.grid.len() {
            let idx = self.grid.multi_index(p);
            let cidx: Vec<usize> = idx.iter().zip(&ratios).map(|(i, r)| i / r).collect();
            acc[coarse.linear_index(&cidx)] += self.values[p];
        }
        CellField::new(
            coarse.clone(),
            acc.into_iter().map(|s| s / block as f64).collect(),
        )
    }
}

/// `∏h_j · Σ |f_p - g_p|`.
pub fn l1_distance(f: &CellField, g: &CellField) -> Result<f64, SolverError> {
    f.check_same_grid(g)?;
    let d: Vec<f64> = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(f.grid.cell_volume() * pairwise_sum(&d))
}

/// Exact cell averages of a torus polynomial.
pub fn exact_cell_average(p: &TorusPoly, grid: &TorusGrid) -> Result<CellField, SolverError> {
    if p.m() != grid.m() {
        return Err(SolverError::RankMismatch {
            problem: p.m(),
            grid: grid.m(),
        });
    }
    // per term and axis: average of e^{2πik y} over each cell
    let factors: Vec<(Complex64, Vec<Vec<Complex64>>)> = p
        .terms()
        .iter()
        .map(|(k, a)| {
            let axes = k
                .iter()
                .zip(grid.cells())
                .map(|(&kj, &n)| {
                    let h = 1.0 / n as f64;
                    (0..n)
                        .map(|i| {
                            if kj == 0 {
                                return Complex64::new(1.0, 0.0);
                            }
                            let w = 2.0 * PI * kj as f64;
                            let lo = Complex64::from_polar(1.0, w * i as f64 * h);
                            let hi = Complex64::from_polar(1.0, w * (i + 1) as f64 * h);
                            (hi - lo) / Complex64::new(0.0, w * h)
                        })
                        .collect()
                })
                .collect();
            (*a, axes)
        })
        .collect();
    let values = (0..grid.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|cell| {
            let idx = grid.multi_index(cell);
            factors
                .iter()
                .map(|(a, axes)| axes.iter().zip(&idx).fold(*a, |acc, (f, &i)| acc * f[i]))
                .sum::<Complex64>()
                .re
        })
        .collect();
    CellField::new(grid.clone(), values)
}

/// Per-axis viscosities `α_j`: the Lipschitz bound of `φ̃_j` over the field's range.
pub fn viscosities(f: &CellField, flux: &PiecewiseFlux) -> Vec<f64> {
    lip_bound(flux, f.min, f.max)
}

fn cfl_denominator(grid: &TorusGrid, alphas: &[f64]) -> f64 {
    alphas
        .iter()
        .enumerate()
        .map(|(j, a)| a / grid.spacing(j))
        .sum()
}

/// Stable time step `cfl / Σ_j α_j/h_j`, or `remaining` when the flux is flat
/// on the data range.
pub fn cfl_dt(f: &CellField, flux: &PiecewiseFlux, cfl: f64, remaining: f64) -> f64 {
    let denom = cfl_denominator(&f.grid, &viscosities(f, flux));
    if denom == 0.0 {
        remaining
    } else {
        cfl / denom
    }
}

/// Rusanov flux `½(φ(a) + φ(b)) - ½α(b - a)`.
#[inline]
pub fn rusanov_flux(a: f64, b: f64, phi: impl Fn(f64) -> f64, alpha: f64) -> f64 {
    0.5 * (phi(a) + phi(b)) - 0.5 * alpha * (b - a)
}

fn check_cfl(grid: &TorusGrid, alphas: &[f64], dt: f64) -> Result<(), SolverError> {
    let denom = cfl_denominator(grid, alphas);
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SolverError::CflViolation {
            dt,
            limit: f64::NAN,
        });
    }
    if denom > 0.0 {
        let limit = CFL_MAX / denom;
        if dt > limit * (1.0 + 1e-12) {
            return Err(SolverError::CflViolation { dt, limit });
        }
    }
    Ok(())
}

/// Face fluxes along `axis`: entry `p` is the flux through the face between
/// `p` and `p + e_axis`.
fn face_fluxes(
    values: &[f64],
    grid: &TorusGrid,
    axis: usize,
    face: impl Fn(f64, f64) -> f64 + Sync,
) -> Vec<f64> {
    let stride = grid.stride(axis);
    (0..values.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|p| face(values[p], values[grid.forward(p, axis, stride)]))
        .collect()
}

/// One conservative step with given viscosities.
pub fn step_with(
    f: &CellField,
    flux: &PiecewiseFlux,
    alphas: &[f64],
    dt: f64,
) -> Result<CellField, SolverError> {
    let grid = &f.grid;
    if flux.n() != grid.m() || alphas.len() != grid.m() {
        return Err(SolverError::RankMismatch {
            problem: flux.n(),
            grid: grid.m(),
        });
    }
    check_cfl(grid, alphas, dt)?;
    let faces: Vec<Vec<f64>> = (0..grid.m())
        .map(|j| {
            let alpha = alphas[j];
            face_fluxes(&f.values, grid, j, |a, b| {
                rusanov_flux(a, b, |u| flux.eval_component(j, u), alpha)
            })
        })
        .collect();
    let strides: Vec<usize> = (0..grid.m()).map(|j| grid.stride(j)).collect();
    let ratios: Vec<f64> = (0..grid.m()).map(|j| dt / grid.spacing(j)).collect();
    let values: Vec<f64> = (0..f.values.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|p| {
            let mut u = f.values[p];
            for j in 0..grid.m() {
                let back = grid.backward(p, j, strides[j]);
                u -= ratios[j] * (faces[j][p] - faces[j][back]);
            }
            u
        })
        .collect();
    CellField::new(grid.clone(), values)
}

/// One step with the viscosities of the current field; refuses steps beyond
/// the CFL limit.
pub fn step(f: &CellField, flux: &PiecewiseFlux, dt: f64) -> Result<CellField, SolverError> {
    step_with(f, flux, &viscosities(f, flux), dt)
}

/// Largest cell residual of the discrete Kruzhkov inequality for entropy
/// `|u - k|`, with numerical entropy flux
/// `Q(a, b; k) = F(a∨k, b∨k) - F(a∧k, b∧k)`.
pub fn entropy_residual_with(
    before: &CellField,
    after: &CellField,
    flux: &PiecewiseFlux,
    alphas: &[f64],
    dt: f64,
    k: f64,
) -> Result<f64, SolverError> {
    before.check_same_grid(after)?;
    let grid = &before.grid;
    let faces: Vec<Vec<f64>> = (0..grid.m())
        .map(|j| {
            let alpha = alphas[j];
            let num = |a: f64, b: f64| rusanov_flux(a, b, |u| flux.eval_component(j, u), alpha);
            face_fluxes(&before.values, grid, j, |a, b| {
                num(a.max(k), b.max(k)) - num(a.min(k), b.min(k))
            })
        })
        .collect();
    let strides: Vec<usize> = (0..grid.m()).map(|j| grid.stride(j)).collect();
    let res = (0..before.values.len())
        .into_par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|p| {
            let mut r = (after.values[p] - k).abs() - (before.values[p] - k).abs();
            for j in 0..grid.m() {
                let back = grid.backward(p, j, strides[j]);
                r += dt / grid.spacing(j) * (faces[j][p] - faces[j][back]);
            }
            r
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(res)
}

pub fn entropy_residual(
    before: &CellField,
    after: &CellField,
    flux: &PiecewiseFlux,
    dt: f64,
    k: f64,
) -> Result<f64, SolverError> {
    entropy_residual_with(before, after, flux, &viscosities(before, flux), dt, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub t_end: f64,
    /// Times in `(0, t_end]` at which the field is recorded, besides 0 and `t_end`.
    pub record_times: Vec<f64>,
}

impl SolverConfig {
    pub fn new(t_end: f64) -> Self {
        SolverConfig {
            cfl: DEFAULT_CFL,
            t_end,
            record_times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.cfl > 0.0 && self.cfl <= CFL_MAX) {
            return Err(SolverError::Config(format!(
                "cfl {} outside (0, {CFL_MAX}]",
                self.cfl
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SolverError::Config(format!(
                "end time {} must be positive",
                self.t_end
            )));
        }
        if let Some(t) = self
            .record_times
            .iter()
            .find(|&&t| !(t > 0.0 && t <= self.t_end))
        {
            return Err(SolverError::Config(format!(
                "record time {t} outside (0, {}]",
                self.t_end
            )));
        }
        Ok(())
    }

    fn targets(&self) -> Vec<f64> {
        let mut t = self.record_times.clone();
        t.push(self.t_end);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

/// Observables at one record time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub t: f64,
    pub l1_to_mean: f64,
    pub min: f64,
    pub max: f64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mean: f64,
    pub records: Vec<Record>,
    pub fields: Vec<CellField>,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_field(&self) -> &CellField {
        self.fields
            .last()
            .expect("a trajectory always holds the initial field")
    }

    pub fn final_record(&self) -> &Record {
        self.records
            .last()
            .expect("a trajectory always holds the initial record")
    }
}

fn record(t: f64, f: &CellField, mean: f64) -> Record {
    Record {
        t,
        l1_to_mean: f.l1_to(mean),
        min: f.min,
        max: f.max,
        mass: f.mass(),
    }
}

fn check_flux_range(f: &CellField, flux: &PiecewiseFlux) -> Result<(), SolverError> {
    let (flo, fhi) = flux.range();
    if f.min < flo || f.max > fhi {
        return Err(SolverError::OutsideFluxRange {
            lo: f.min,
            hi: f.max,
            flo,
            fhi,
        });
    }
    Ok(())
}

/// Evolves `initial` to `cfg.t_end`, recording observables relative to the
/// constant `mean`. `on_step(before, after, alphas, dt)` sees every step.
pub fn evolve(
    initial: CellField,
    flux: &PiecewiseFlux,
    mean: f64,
    cfg: &SolverConfig,
    mut on_step: impl FnMut(&CellField, &CellField, &[f64], f64),
) -> Result<Trajectory, SolverError> {
    cfg.validate()?;
    if flux.n() != initial.grid.m() {
        return Err(SolverError::RankMismatch {
            problem: flux.n(),
            grid: initial.grid.m(),
        });
    }
    check_flux_range(&initial, flux)?;
    let mut field = initial;
    let mut t = 0.0;
    let mut traj = Trajectory {
        mean,
        records: vec![record(0.0, &field, mean)],
        fields: vec![field.clone()],
        steps: 0,
    };
    for target in cfg.targets() {
        while t < target {
            let remaining = target - t;
            let alphas = viscosities(&field, flux);
            let denom = cfl_denominator(&field.grid, &alphas);
            let dt_cfl = if denom == 0.0 {
                remaining
            } else {
                cfg.cfl / denom
            };
            let (dt, last) = if dt_cfl >= remaining {
                (remaining, true)
            } else {
                (dt_cfl, false)
            };
            let next = step_with(&field, flux, &alphas, dt)?;
            on_step(&field, &next, &alphas, dt);
            field = next;
            traj.steps += 1;
            t = if last { target } else { t + dt };
        }
        traj.records.push(record(t, &field, mean));
        traj.fields.push(field.clone());
    }
    Ok(traj)
}

/// Solves the lifted problem from exact cell averages of `v0`, recording the
/// L¹ distance to the mean `a_0` at the configured times.
pub fn run(
    pb: &LiftedProblem,
    grid: &TorusGrid,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    if pb.m() != grid.m() {
        return Err(SolverError::RankMismatch {
            problem: pb.m(),
            grid: grid.m(),
        });
    }
    let v0 = exact_cell_average(pb.v0(), grid)?;
    evolve(v0, pb.lifted_flux(), pb.v0().mean(), cfg, |_, _, _, _| {})
}

/// Evolves two fields with a shared step sequence: viscosities and `dt` are
/// taken over the joint range, so both see the same monotone operator.
/// Returns the final fields and the L¹ distance before the first and after
/// every step.
pub fn evolve_pair(
    a: CellField,
    b: CellField,
    flux: &PiecewiseFlux,
    cfl: f64,
    steps: usize,
) -> Result<(CellField, CellField, Vec<f64>), SolverError> {
    a.check_same_grid(&b)?;
    check_flux_range(&a, flux)?;
    check_flux_range(&b, flux)?;
    let (mut a, mut b) = (a, b);
    let mut dist = vec![l1_distance(&a, &b)?];
    for _ in 0..steps {
        let alphas = lip_bound(flux, a.min.min(b.min), a.max.max(b.max));
        let denom = cfl_denominator(&a.grid, &alphas);
        let dt = if denom == 0.0 { 1.0 } else { cfl / denom };
        a = step_with(&a, flux, &alphas, dt)?;
        b = step_with(&b, flux, &alphas, dt)?;
        dist.push(l1_distance(&a, &b)?);
    }
    Ok((a, b, dist))
}

/// Exact non-decaying solution `(a+b)/2 + ((b-a)/2)·sin(2π(k̄·y - τt))` for a
/// flux whose directional flux is affine with slope `τ` on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelingWave {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub k: Vec<i64>,
    /// Float shadow of `ξ = λ(k̄)` in ℝⁿ.
    pub xi: Vec<f64>,
}

impl TravelingWave {
    pub fn mid(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn amplitude(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    /// Value on the torus at `(t, y)`.
    pub fn eval_torus(&self, t: f64, y: &[f64]) -> f64 {
        let s: f64 = self.k.iter().zip(y).map(|(&kj, yj)| kj as f64 * yj).sum();
        self.mid() + self.amplitude() * (2.0 * PI * (s - self.tau * t)).sin()
    }

    /// Value in physical space at `(t, x)`.
    pub fn eval_space(&self, t: f64, x: &[f64]) -> f64 {
        let s: f64 = self.xi.iter().zip(x).map(|(a, b)| a * b).sum();
        self.mid() + self.amplitude() * (2.0 * PI * (s - self.tau * t)).sin()
    }

    /// The solution at time `t` as a torus polynomial.
    pub fn torus_poly(&self, t: f64) -> TorusPoly {
        TorusPoly::constant(self.k.len(), self.mid())
            .add(&TorusPoly::sine(
                &self.k,
                self.amplitude(),
                -2.0 * PI * self.tau * t,
            ))
            .expect("same dimension")
    }

    /// `∫|v - (a+b)/2|`, constant in time: `(b - a)/π`.
    pub fn l1_to_mean(&self) -> f64 {
        (self.b - self.a) / PI
    }
}

/// Validates that `λ(k̄)·φ` is affine on `[a, b]` and returns the traveling
/// wave it admits; otherwise refuses with the non-degeneracy verdict.
pub fn exact_counterexample(
    flux: &PiecewiseFlux,
    group: &SpectrumGroupBasis,
    a: &BigRational,
    b: &BigRational,
    k: &[i64],
) -> Result<TravelingWave, SolverError> {
    if a >= b {
        return Err(SolverError::EmptyInterval(a.to_string(), b.to_string()));
    }
    if k.iter().all(|&x| x == 0) {
        return Err(SolverError::ZeroDirection);
    }
    let refuse = || -> SolverError {
        match nondegeneracy_check(flux, group) {
            Ok(verdict) => SolverError::NotAffine {
                a: a.to_string(),
                b: b.to_string(),
                verdict: Box::new(verdict),
            },
            Err(e) => e.into(),
        }
    };
    let (lo, hi) = flux.exact_range();
    if a < lo || b > hi {
        return Err(refuse());
    }
    let dir = directional(flux, k, group)?;
    let bps = dir.breakpoints();
    let mut slope = None;
    for p in 0..dir.pieces().len() {
        if &bps[p + 1] <= a || &bps[p] >= b {
            continue;
        }
        if !dir.is_affine_on(p) {
            return Err(refuse());
        }
        let s = dir.coeff(p, 1).cloned();
        let s = s.unwrap_or_else(|| crate::freqlattice::RealQ::zero(flux.basis()));
        match &slope {
            None => slope = Some(s),
            Some(prev) if *prev != s => return Err(refuse()),
            _ => {}
        }
    }
    let tau = slope.map_or(0.0, |s| s.value());
    let xi = group.frequency_of(k).values();
    Ok(TravelingWave {
        a: a.to_f64().unwrap_or(f64::NAN),
        b: b.to_f64().unwrap_or(f64::NAN),
        tau,
        k: k.to_vec(),
        xi,
    })
}

/// Writes `m`, `N_1..N_m` as little-endian `u64` followed by the values as
/// little-endian `f64`.
pub fn write_field_dump(field: &CellField, path: &Path) -> Result<(), SolverError> {
    let mut buf = Vec::with_capacity(8 * (1 + field.grid.m() + field.values.len()));
    buf.extend_from_slice(&(field.grid.m() as u64).to_le_bytes());
    for &n in field.grid.cells() {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|source| SolverError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_field_dump(path: &Path) -> Result<CellField, SolverError> {
    let io_err = |source| SolverError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err)?;
    let mut words = bytes
        .chunks_exact(8)
        .map(|c| <[u8; 8]>::try_from(c).expect("chunk of 8"));
    if bytes.len() % 8 != 0 {
        return Err(SolverError::Dump("length is not a multiple of 8".into()));
    }
    let m = words
        .next()
        .map(u64::from_le_bytes)
        .ok_or_else(|| SolverError::Dump("empty".into()))? as usize;
    if m > 3 {
        return Err(SolverError::Dump(format!("dimension {m}")));
    }
    let cells: Vec<usize> = (&mut words)
        .take(m)
        .map(|w| u64::from_le_bytes(w) as usize)
        .collect();
    if cells.len() != m {
        return Err(SolverError::Dump("truncated header".into()));
    }
    let grid = if m == 0 {
        TorusGrid::point()
    } else {
        TorusGrid::new(&cells)?
    };
    let values = words.map(f64::from_le_bytes).collect();
    CellField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freqlattice::{FrequencyBasis, RealQ};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(p.into(), d.into())
    }

    fn rq(b: &Arc<FrequencyBasis>, p: i64, d: i64) -> RealQ {
        RealQ::from_rational(b, q(p, d)).unwrap()
    }

    fn burgers(m: usize) -> PiecewiseFlux {
        let b = FrequencyBasis::rational();
        let comps = (0..m)
            .map(|_| vec![rq(&b, 0, 1), rq(&b, 0, 1), rq(&b, 1, 2)])
            .collect();
        PiecewiseFlux::polynomial(&b, q(-2, 1), q(2, 1), comps).unwrap()
    }

    fn affine(tau: i64) -> PiecewiseFlux {
        let b = FrequencyBasis::rational();
        PiecewiseFlux::polynomial(
            &b,
            q(-2, 1),
            q(2, 1),
            vec![vec![rq(&b, 0, 1), rq(&b, tau, 1)]],
        )
        .unwrap()
    }

    fn zero_flux() -> PiecewiseFlux {
        let b = FrequencyBasis::rational();
        PiecewiseFlux::polynomial(&b, q(-2, 1), q(2, 1), vec![vec![rq(&b, 0, 1)]]).unwrap()
    }

    fn random_field(grid: &TorusGrid, rng: &mut ChaCha8Rng) -> CellField {
        CellField::new(
            grid.clone(),
            (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn grid_validation_and_indexing() {
        assert!(TorusGrid::new(&[]).is_err());
        assert!(TorusGrid::new(&[4, 4, 4, 4]).is_err());
        assert!(TorusGrid::new(&[1]).is_err());
        let g = TorusGrid::new(&[3, 4, 5]).unwrap();
        assert_eq!(g.len(), 60);
        for p in 0..g.len() {
            assert_eq!(g.linear_index(&g.multi_index(p)), p);
            for j in 0..3 {
                let s = g.stride(j);
                assert_eq!(g.backward(g.forward(p, j, s), j, s), p);
            }
        }
        assert_eq!(g.forward(4, 0, 20), 24);
        assert_eq!(g.forward(44, 0, 20), 4);
    }

    #[test]
    fn cell_average_of_constant() {
        let g = TorusGrid::new(&[8, 4]).unwrap();
        let f = exact_cell_average(&TorusPoly::constant(2, 0.3), &g).unwrap();
        assert!(f.values().iter().all(|&v| (v - 0.3).abs() < 1e-16));
    }

    #[test]
    fn cell_average_of_cosine_matches_quadrature() {
        // Oracle: composite Simpson on each cell.
        let g = TorusGrid::new(&[4]).unwrap();
        let f = exact_cell_average(&TorusPoly::cosine(&[1], 1.0), &g).unwrap();
        for (i, v) in f.values().iter().enumerate() {
            let (a, b) = (i as f64 / 4.0, (i + 1) as f64 / 4.0);
            let n = 2000;
            let h = (b - a) / n as f64;
            let mut s = 0.0;
            for j in 0..=n {
                let w = if j == 0 || j == n {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                s += w * (2.0 * PI * (a + j as f64 * h)).cos();
            }
            let avg = s * h / 3.0 / (b - a);
            assert!((v - avg).abs() < 1e-12, "cell {i}: {v} vs {avg}");
        }
        assert!((f.values()[0] - 2.0 / PI).abs() < 1e-15);
        assert!(f.mass().abs() < 1e-15);
    }

    #[test]
    fn cell_average_mean_is_a0() {
        let p = TorusPoly::sine(&[1, 2], 0.4, 0.1)
            .add(&TorusPoly::cosine(&[3, -1], 0.2))
            .unwrap()
            .add(&TorusPoly::constant(2, -0.7))
            .unwrap();
        let f = exact_cell_average(&p, &TorusGrid::new(&[16, 12]).unwrap()).unwrap();
        assert!((f.mass() - p.mean()).abs() < 1e-14);
    }

    #[test]
    fn cfl_dt_examples() {
        let g = TorusGrid::new(&[100]).unwrap();
        let f = CellField::new(
            g.clone(),
            (0..100)
                .map(|i| if i % 2 == 0 { -1.0 } else { 1.0 })
                .collect(),
        )
        .unwrap();
        let dt = cfl_dt(&f, &burgers(1), 0.45, 1.0);
        assert!((0.0040..=0.0045).contains(&dt), "{dt}");
        let c = CellField::constant(&TorusGrid::new(&[10]).unwrap(), 0.3);
        let dt = cfl_dt(&c, &affine(2), 0.45, 1.0);
        assert!((0.0204..=0.0225).contains(&dt), "{dt}");
        assert_eq!(cfl_dt(&c, &zero_flux(), 0.45, 0.37), 0.37);
    }

    #[test]
    fn rusanov_examples() {
        let phi = |u: f64| 0.5 * u * u;
        assert_eq!(rusanov_flux(0.7, 0.7, phi, 3.0), phi(0.7));
        assert_eq!(rusanov_flux(1.0, -1.0, phi, 1.0), 1.5);
        let (tau, alpha, a, b) = (2.0, 2.5, 0.3, -0.4);
        assert!(
            (rusanov_flux(a, b, |u| tau * u, alpha)
                - (tau * (a + b) / 2.0 - alpha / 2.0 * (b - a)))
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn constant_field_is_stationary() {
        let g = TorusGrid::new(&[16, 16]).unwrap();
        let c = CellField::constant(&g, 0.4);
        let next = step(&c, &burgers(2), 0.001).unwrap();
        assert_eq!(next, c);
    }

    #[test]
    fn step_refuses_cfl_violation() {
        let g = TorusGrid::new(&[64]).unwrap();
        let f = exact_cell_average(&TorusPoly::sine(&[1], 1.0, 0.0), &g).unwrap();
        let limit = 0.5 / cfl_denominator(&g, &viscosities(&f, &burgers(1)));
        assert!(step(&f, &burgers(1), limit * 0.99).is_ok());
        assert!(matches!(
            step(&f, &burgers(1), limit * 1.1),
            Err(SolverError::CflViolation { .. })
        ));
    }

    #[test]
    fn step_conserves_and_respects_bounds_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in 1..=3 {
            let g = TorusGrid::uniform(m, 12).unwrap();
            for _ in 0..10 {
                let f = random_field(&g, &mut rng);
                let dt = cfl_dt(&f, &burgers(m), 0.45, 1.0);
                let next = step(&f, &burgers(m), dt).unwrap();
                assert!(
                    (next.mass() - f.mass()).abs()
                        <= 1e-13 * f.values().iter().map(|v| v.abs()).sum::<f64>() / g.len() as f64
                            + 1e-16
                );
                assert!(next.min() >= f.min() - 1e-14 && next.max() <= f.max() + 1e-14);
            }
        }
    }

    #[test]
    fn step_is_comonotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = TorusGrid::new(&[32]).unwrap();
        let flux = burgers(1);
        for _ in 0..50 {
            let f = random_field(&g, &mut rng);
            let bumps: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(0.0..0.5)).collect();
            let h = CellField::new(
                g.clone(),
                f.values().iter().zip(&bumps).map(|(a, b)| a + b).collect(),
            )
            .unwrap();
            let alphas = lip_bound(&flux, f.min().min(h.min()), f.max().max(h.max()));
            let dt = 0.45 / cfl_denominator(&g, &alphas);
            let sf = step_with(&f, &flux, &alphas, dt).unwrap();
            let sh = step_with(&h, &flux, &alphas, dt).unwrap();
            for (a, b) in sf.values().iter().zip(sh.values()) {
                assert!(*a <= b + 1e-14);
            }
        }
    }

    #[test]
    fn parallel_step_is_bitwise_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = TorusGrid::new(&[128, 96]).unwrap();
        let f = random_field(&g, &mut rng);
        let flux = burgers(2);
        let dt = cfl_dt(&f, &flux, 0.45, 1.0);
        let par = step(&f, &flux, dt).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let seq = pool.install(|| step(&f, &flux, dt).unwrap());
        assert_eq!(
            par.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            seq.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn l1_distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = TorusGrid::new(&[10, 3]).unwrap();
        let f = random_field(&g, &mut rng);
        assert_eq!(l1_distance(&f, &f).unwrap(), 0.0);
        let shifted =
            CellField::new(g.clone(), f.values().iter().map(|v| v - 0.25).collect()).unwrap();
        assert!((l1_distance(&f, &shifted).unwrap() - 0.25).abs() < 1e-15);
        for _ in 0..20 {
            let (a, b, c) = (
                random_field(&g, &mut rng),
                random_field(&g, &mut rng),
                random_field(&g, &mut rng),
            );
            let ab = l1_distance(&a, &b).unwrap();
            let bc = l1_distance(&b, &c).unwrap();
            let ac = l1_distance(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
        let other = CellField::constant(&TorusGrid::new(&[10, 4]).unwrap(), 0.0);
        assert!(matches!(
            l1_distance(&f, &other),
            Err(SolverError::GridMismatch(..))
        ));
    }

    #[test]
    fn entropy_residual_examples() {
        let g = TorusGrid::new(&[64]).unwrap();
        let flux = burgers(1);
        let c = CellField::constant(&g, 0.2);
        let next = step(&c, &flux, 0.001).unwrap();
        assert_eq!(entropy_residual(&c, &next, &flux, 0.001, 0.7).unwrap(), 0.0);

        let riemann = CellField::sample(&g, |y| if y[0] < 0.5 { 1.0 } else { -1.0 }).unwrap();
        let dt = cfl_dt(&riemann, &flux, 0.45, 1.0);
        let after = step(&riemann, &flux, dt).unwrap();
        assert!(entropy_residual(&riemann, &after, &flux, dt, 0.0).unwrap() <= 1e-12);
        // k below the data: |u - k| = u - k and the inequality is conservation
        let r = entropy_residual(&riemann, &after, &flux, dt, -3.0).unwrap();
        assert!(r.abs() <= 1e-12);
    }

    #[test]
    fn run_zero_flux_is_constant_in_time() {
        let f = zero_flux();
        let traj = evolve(
            exact_cell_average(
                &TorusPoly::sine(&[1], 0.5, 0.0),
                &TorusGrid::new(&[32]).unwrap(),
            )
            .unwrap(),
            &f,
            0.0,
            &SolverConfig::new(2.0),
            |_, _, _, _| {},
        )
        .unwrap();
        assert_eq!(traj.fields[0], *traj.final_field());
        assert_eq!(traj.steps, 1);
    }

    #[test]
    fn record_times_are_hit_exactly() {
        let g = TorusGrid::new(&[64]).unwrap();
        let init = exact_cell_average(&TorusPoly::sine(&[1], 0.5, 0.0), &g).unwrap();
        let mut cfg = SolverConfig::new(0.3);
        cfg.record_times = vec![0.1, 0.2];
        let traj = evolve(init, &burgers(1), 0.0, &cfg, |_, _, _, _| {}).unwrap();
        let ts: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0.0, 0.1, 0.2, 0.3]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::new(1.0);
        cfg.cfl = 0.6;
        assert!(cfg.validate().is_err());
        cfg.cfl = 0.5;
        assert!(cfg.validate().is_ok());
        cfg.record_times = vec![2.0];
        assert!(cfg.validate().is_err());
        assert!(SolverConfig::new(0.0).validate().is_err());
    }

    #[test]
    fn data_outside_flux_range_is_refused() {
        let g = TorusGrid::new(&[16]).unwrap();
        let f = CellField::constant(&g, 5.0);
        assert!(matches!(
            evolve(
                f,
                &burgers(1),
                5.0,
                &SolverConfig::new(1.0),
                |_, _, _, _| {}
            ),
            Err(SolverError::OutsideFluxRange { .. })
        ));
    }

    #[test]
    fn field_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let g = TorusGrid::new(&[3, 5]).unwrap();
        let f = CellField::sample(&g, |y| y[0] - 2.0 * y[1]).unwrap();
        write_field_dump(&f, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 * (1 + 2 + 15));
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &3u64.to_le_bytes());
        assert_eq!(read_field_dump(&path).unwrap(), f);
    }

    #[test]
    fn restriction_preserves_mass() {
        let g = TorusGrid::new(&[16, 8]).unwrap();
        let f = CellField::sample(&g, |y| (2.0 * PI * y[0]).sin() + y[1]).unwrap();
        let c = f.restrict(&TorusGrid::new(&[4, 2]).unwrap()).unwrap();
        assert!((c.mass() - f.mass()).abs() < 1e-15);
    }

    mod counterexample {
        use super::*;
        use crate::freqlattice::group_basis;
        use crate::freqlattice::Frequency;

        fn kinked() -> PiecewiseFlux {
            // u + u² on [-1,0], u on [0,1], u² - u + 1 on [1,2]
            let b = FrequencyBasis::rational();
            PiecewiseFlux::new(
                &b,
                1,
                vec![q(-1, 1), q(0, 1), q(1, 1), q(2, 1)],
                vec![
                    vec![vec![rq(&b, 0, 1), rq(&b, 1, 1), rq(&b, 1, 1)]],
                    vec![vec![rq(&b, 0, 1), rq(&b, 1, 1)]],
                    vec![vec![rq(&b, 1, 1), rq(&b, -1, 1), rq(&b, 1, 1)]],
                ],
                (q(-1, 1), q(2, 1)),
            )
            .unwrap()
        }

        fn group() -> SpectrumGroupBasis {
            let b = FrequencyBasis::rational();
            group_basis(&b, 1, &[Frequency::from_rationals(&b, &[q(1, 1)]).unwrap()]).unwrap()
        }

        #[test]
        fn initial_profile_and_range() {
            let w = exact_counterexample(&kinked(), &group(), &q(1, 4), &q(3, 4), &[1]).unwrap();
            assert_eq!(w.tau, 1.0);
            for i in 0..100 {
                let y = i as f64 / 100.0;
                let v = w.eval_torus(0.0, &[y]);
                assert!((v - (0.5 + 0.25 * (2.0 * PI * y).sin())).abs() < 1e-15);
                assert!((0.25..=0.75).contains(&v));
                assert_eq!(w.eval_space(0.3, &[y]), w.eval_torus(0.3, &[y]));
            }
            assert!((w.l1_to_mean() - 0.5 / PI).abs() < 1e-16);
        }

        #[test]
        fn l1_to_mean_is_time_independent() {
            let w = exact_counterexample(&kinked(), &group(), &q(0, 1), &q(1, 1), &[1]).unwrap();
            let g = TorusGrid::new(&[4096]).unwrap();
            for t in [0.0, 0.37, 2.0] {
                let f = exact_cell_average(&w.torus_poly(t), &g).unwrap();
                assert!((f.l1_to(w.mid()) - w.l1_to_mean()).abs() < 1e-6);
            }
        }

        #[test]
        fn nonaffine_interval_is_refused_with_verdict() {
            match exact_counterexample(&kinked(), &group(), &q(-1, 2), &q(1, 2), &[1]) {
                Err(SolverError::NotAffine { verdict, .. }) => assert!(verdict.is_degenerate()),
                other => panic!("expected refusal, got {other:?}"),
            }
            assert!(matches!(
                exact_counterexample(&kinked(), &group(), &q(1, 2), &q(1, 2), &[1]),
                Err(SolverError::EmptyInterval(..))
            ));
            assert!(matches!(
                exact_counterexample(&kinked(), &group(), &q(0, 1), &q(1, 2), &[0]),
                Err(SolverError::ZeroDirection)
            ));
        }
    }
}
