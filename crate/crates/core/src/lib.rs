//! Scalar conservation laws with almost periodic initial data.
//!
//! Trigonometric-polynomial data over an exact frequency basis are lifted to
//! a periodic problem on a torus whose dimension is the rank of the spectrum
//! group, solved there by a monotone finite-volume scheme, and pulled back
//! along the orbit `y = z + Λx`. The crate also decides the linear
//! non-degeneracy condition exactly and builds the traveling-wave solutions
//! that fail to decay when it does not hold.

pub mod flux;
pub mod freqlattice;
pub mod lift;
pub mod solver;
mod sum;
pub mod trigpoly;

pub use flux::{
    directional, flux_along, lift_flux, lip_bound, nondegeneracy_check, Degeneracy, FluxError,
    NdVerdict, PiecewiseFlux, ScalarPiecewise,
};
pub use freqlattice::{
    group_basis, integer_kernel, member_coords, parse_rational, real_value, Frequency,
    FrequencyBasis, LatticeError, RealQ, SpectrumGroupBasis,
};
pub use lift::{
    bohr_coefficient, cube_average, cube_seminorm, lift_problem, lift_problems, orbit_mean,
    pullback_sample, CubeMeanReport, LiftError, LiftedProblem,
};
pub use solver::{
    cfl_dt, entropy_residual, entropy_residual_with, evolve, evolve_pair, exact_cell_average,
    exact_counterexample, l1_distance, read_field_dump, run, rusanov_flux, step, step_with,
    viscosities, write_field_dump, CellField, Record, SolverConfig, SolverError, TorusGrid,
    Trajectory, TravelingWave, CFL_MAX, DEFAULT_CFL,
};
pub use sum::pairwise_sum;
pub use trigpoly::{
    combine, fejer_damp, fejer_factor, mean_and_coeff, truncate, TorusPoly, TrigError, TrigPoly,
};
