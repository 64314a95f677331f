//! Continuous piecewise-polynomial flux vectors with exact coefficients.
//!
//! Coefficients are [`RealQ`] values, so directional fluxes `u ↦ ξ·φ(u)` for
//! frequencies `ξ` of a spectrum group are again exact, and affinity on an
//! interval reduces to exact vanishing of the degree ≥ 2 coefficients. That
//! makes the linear non-degeneracy condition decidable through
//! [`integer_kernel`].

use std::sync::Arc;

use log::warn;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::freqlattice::{
    integer_kernel, same_basis, Frequency, FrequencyBasis, LatticeError, RealQ, SpectrumGroupBasis,
};

const LIP_SAMPLES: usize = 1024;
const LIP_SAFETY: f64 = 1.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluxError {
    #[error("flux needs at least two strictly increasing breakpoints")]
    Breakpoints,
    #[error("expected {expected} pieces for the given breakpoints, got {got}")]
    PieceCount { expected: usize, got: usize },
    #[error("piece {piece} has {got} components, expected {expected}")]
    ComponentCount {
        piece: usize,
        expected: usize,
        got: usize,
    },
    #[error("working range [{lo}, {hi}] is empty or not covered by the breakpoints")]
    Range { lo: String, hi: String },
    #[error("flux component {component} is discontinuous at breakpoint {at}")]
    Discontinuous { component: usize, at: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

fn eval_exact(coeffs: &[RealQ], u: &BigRational) -> RealQ {
    let mut acc = RealQ::zero(coeffs[0].basis());
    for c in coeffs.iter().rev() {
        acc = &acc.scale(u) + c;
    }
    acc
}

/// Scalar piecewise polynomial with exact coefficients, e.g. a directional
/// flux `u ↦ ξ·φ(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPiecewise {
    breakpoints: Vec<BigRational>,
    pieces: Vec<Vec<RealQ>>,
}

impl ScalarPiecewise {
    pub fn breakpoints(&self) -> &[BigRational] {
        &self.breakpoints
    }

    /// Coefficients by ascending degree, per piece.
    pub fn pieces(&self) -> &[Vec<RealQ>] {
        &self.pieces
    }

    pub fn coeff(&self, piece: usize, degree: usize) -> Option<&RealQ> {
        self.pieces[piece].get(degree)
    }

    /// True iff every coefficient of degree ≥ 2 on `piece` is exactly zero.
    pub fn is_affine_on(&self, piece: usize) -> bool {
        self.pieces[piece].iter().skip(2).all(RealQ::is_zero)
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().flatten().all(RealQ::is_zero)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let p = piece_index(&to_f64s(&self.breakpoints), u);
        let c: Vec<f64> = self.pieces[p].iter().map(RealQ::value).collect();
        horner(&c, u)
    }
}

fn to_f64s(v: &[BigRational]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

/// Index of the piece containing `u`: ties at a breakpoint take the right
/// piece, except at the last breakpoint.
fn piece_index(bps: &[f64], u: f64) -> usize {
    let pieces = bps.len() - 1;
    bps.partition_point(|&b| b <= u)
        .saturating_sub(1)
        .min(pieces - 1)
}

#[derive(Debug, Clone)]
struct Compiled {
    breakpoints: Vec<f64>,
    lo: f64,
    hi: f64,
    // [piece][component][degree]
    coeffs: Vec<Vec<Vec<f64>>>,
    deriv: Vec<Vec<Vec<f64>>>,
}

/// Continuous flux vector `φ: [u_min, u_max] → ℝⁿ`, polynomial on each piece.
#[derive(Debug, Clone)]
pub struct PiecewiseFlux {
    basis: Arc<FrequencyBasis>,
    n: usize,
    breakpoints: Vec<BigRational>,
    pieces: Vec<Vec<Vec<RealQ>>>,
    range: (BigRational, BigRational),
    compiled: Compiled,
}

impl PartialEq for PiecewiseFlux {
    fn eq(&self, other: &Self) -> bool {
        same_basis(&self.basis, &other.basis)
            && self.n == other.n
            && self.breakpoints == other.breakpoints
            && self.range == other.range
            && self.pieces.len() == other.pieces.len()
            && self
                .pieces
                .iter()
                .zip(&other.pieces)
                .all(|(a, b)| a.iter().zip(b).all(|(ca, cb)| trimmed(ca) == trimmed(cb)))
    }
}

fn trimmed(c: &[RealQ]) -> &[RealQ] {
    let len = c.iter().rposition(|x| !x.is_zero()).map_or(0, |i| i + 1);
    &c[..len]
}

impl PiecewiseFlux {
    /// Validates and builds a flux; `pieces[p][k][d]` is the degree-`d`
    /// coefficient of component `k` on `[breakpoints[p], breakpoints[p+1]]`.
    pub fn new(
        basis: &Arc<FrequencyBasis>,
        n: usize,
        breakpoints: Vec<BigRational>,
        pieces: Vec<Vec<Vec<RealQ>>>,
        range: (BigRational, BigRational),
    ) -> Result<Self, FluxError> {
        if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FluxError::Breakpoints);
        }
        if pieces.len() != breakpoints.len() - 1 {
            return Err(FluxError::PieceCount {
                expected: breakpoints.len() - 1,
                got: pieces.len(),
            });
        }
        let (lo, hi) = &range;
        if lo > hi || lo < &breakpoints[0] || hi > breakpoints.last().unwrap() {
            return Err(FluxError::Range {
                lo: lo.to_string(),
                hi: hi.to_string(),
            });
        }
        let mut pieces = pieces;
        for (p, piece) in pieces.iter_mut().enumerate() {
            if piece.len() != n {
                return Err(FluxError::ComponentCount {
                    piece: p,
                    expected: n,
                    got: piece.len(),
                });
            }
            for comp in piece.iter_mut() {
                if comp.iter().any(|c| !same_basis(c.basis(), basis)) {
                    return Err(LatticeError::BasisMismatch.into());
                }
                if comp.is_empty() {
                    comp.push(RealQ::zero(basis));
                }
            }
        }
        for (i, u) in breakpoints
            .iter()
            .enumerate()
            .take(breakpoints.len() - 1)
            .skip(1)
        {
            for k in 0..n {
                let left = eval_exact(&pieces[i - 1][k], u);
                let right = eval_exact(&pieces[i][k], u);
                if left != right {
                    return Err(FluxError::Discontinuous {
                        component: k,
                        at: u.to_string(),
                    });
                }
            }
        }
        let compiled = compile(&breakpoints, &pieces, &range);
        Ok(PiecewiseFlux {
            basis: basis.clone(),
            n,
            breakpoints,
            pieces,
            range,
            compiled,
        })
    }

    /// Single polynomial piece on `[lo, hi]`; `components[k][d]` as in [`new`](Self::new).
    pub fn polynomial(
        basis: &Arc<FrequencyBasis>,
        lo: BigRational,
        hi: BigRational,
        components: Vec<Vec<RealQ>>,
    ) -> Result<Self, FluxError> {
        let n = components.len();
        Self::new(
            basis,
            n,
            vec![lo.clone(), hi.clone()],
            vec![components],
            (lo, hi),
        )
    }

    /// Parses breakpoints, `[piece][component][degree]` rational vectors and
    /// the working range from their string forms.
    pub fn parse(
        basis: &Arc<FrequencyBasis>,
        breakpoints: &[String],
        pieces: &[Vec<Vec<Vec<String>>>],
        range: (&str, &str),
    ) -> Result<Self, FluxError> {
        use crate::freqlattice::parse_rational;
        let bps = breakpoints
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>, _>>()?;
        let n = pieces.first().map_or(0, Vec::len);
        let parsed = pieces
            .iter()
            .map(|piece| {
                piece
                    .iter()
                    .map(|comp| {
                        comp.iter()
                            .map(|c| RealQ::parse(basis, c))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let range = (parse_rational(range.0)?, parse_rational(range.1)?);
        Self::new(basis, n, bps, parsed, range)
    }

    pub fn basis(&self) -> &Arc<FrequencyBasis> {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn breakpoints(&self) -> &[BigRational] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<Vec<RealQ>>] {
        &self.pieces
    }

    pub fn range(&self) -> (f64, f64) {
        (self.compiled.lo, self.compiled.hi)
    }

    pub fn exact_range(&self) -> &(BigRational, BigRational) {
        &self.range
    }

    fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.compiled.lo, self.compiled.hi)
    }

    /// `φ(u)`, clamping `u` into the working range.
    pub fn eval(&self, u: f64) -> Vec<f64> {
        let c = self.clamp(u);
        if c != u {
            warn!("flux evaluated at {u} outside its working range, clamped to {c}");
        }
        let p = piece_index(&self.compiled.breakpoints, c);
        self.compiled.coeffs[p]
            .iter()
            .map(|co| horner(co, c))
            .collect()
    }

    /// Component `k` at `u` without range warnings.
    #[inline]
    pub fn eval_component(&self, k: usize, u: f64) -> f64 {
        let c = self.clamp(u);
        let p = piece_index(&self.compiled.breakpoints, c);
        horner(&self.compiled.coeffs[p][k], c)
    }

    fn derivative_on(&self, piece: usize, k: usize, u: f64) -> f64 {
        horner(&self.compiled.deriv[piece][k], u)
    }

    /// Exact `ξ·φ(u)` for a frequency `ξ ∈ ℝⁿ`.
    pub fn dot_frequency(&self, xi: &Frequency) -> Result<ScalarPiecewise, FluxError> {
        if xi.n() != self.n {
            return Err(FluxError::DimensionMismatch {
                expected: self.n,
                got: xi.n(),
            });
        }
        let pieces = self
            .pieces
            .iter()
            .map(|piece| {
                let deg = piece.iter().map(Vec::len).max().unwrap_or(1);
                (0..deg)
                    .map(|d| {
                        let mut acc = RealQ::zero(&self.basis);
                        for (x, comp) in xi.coords().iter().zip(piece) {
                            if let Some(c) = comp.get(d) {
                                acc = &acc + &x.try_mul(c)?;
                            }
                        }
                        Ok(acc)
                    })
                    .collect::<Result<Vec<_>, FluxError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScalarPiecewise {
            breakpoints: self.breakpoints.clone(),
            pieces,
        })
    }

    /// Exact `Σ k_j φ_j(u)` for an integer direction.
    pub fn dot_integer(&self, k: &[i64]) -> Result<ScalarPiecewise, FluxError> {
        if k.len() != self.n {
            return Err(FluxError::DimensionMismatch {
                expected: self.n,
                got: k.len(),
            });
        }
        let pieces =
            self.pieces
                .iter()
                .map(|piece| {
                    let deg = piece.iter().map(Vec::len).max().unwrap_or(1);
                    (0..deg)
                        .map(|d| {
                            piece.iter().zip(k).fold(
                                RealQ::zero(&self.basis),
                                |acc, (comp, &kj)| match comp.get(d) {
                                    Some(c) => &acc + &c.scale_int(&BigInt::from(kj)),
                                    None => acc,
                                },
                            )
                        })
                        .collect()
                })
                .collect();
        Ok(ScalarPiecewise {
            breakpoints: self.breakpoints.clone(),
            pieces,
        })
    }
}

fn compile(
    breakpoints: &[BigRational],
    pieces: &[Vec<Vec<RealQ>>],
    range: &(BigRational, BigRational),
) -> Compiled {
    let coeffs: Vec<Vec<Vec<f64>>> = pieces
        .iter()
        .map(|piece| {
            piece
                .iter()
                .map(|c| c.iter().map(RealQ::value).collect())
                .collect()
        })
        .collect();
    let deriv = coeffs
        .iter()
        .map(|piece: &Vec<Vec<f64>>| {
            piece
                .iter()
                .map(|c| {
                    c.iter()
                        .enumerate()
                        .skip(1)
                        .map(|(d, v)| d as f64 * v)
                        .collect()
                })
                .collect()
        })
        .collect();
    Compiled {
        breakpoints: to_f64s(breakpoints),
        lo: range.0.to_f64().unwrap_or(f64::NAN),
        hi: range.1.to_f64().unwrap_or(f64::NAN),
        coeffs,
        deriv,
    }
}

/// Directional flux `u ↦ λ(k̄)·φ(u)` with `λ(k̄) = Σ k_j λ_j`.
pub fn directional(
    flux: &PiecewiseFlux,
    k: &[i64],
    group: &SpectrumGroupBasis,
) -> Result<ScalarPiecewise, FluxError> {
    if k.len() != group.rank() {
        return Err(FluxError::DimensionMismatch {
            expected: group.rank(),
            got: k.len(),
        });
    }
    if group.rank() == 0 {
        return flux.dot_frequency(&Frequency::zero(flux.basis(), flux.n()));
    }
    flux.dot_frequency(&group.frequency_of(k))
}

/// Lifted flux `φ̃_j = Σ_k λ_{jk} φ_k`, one component per basis frequency.
pub fn lift_flux(
    flux: &PiecewiseFlux,
    group: &SpectrumGroupBasis,
) -> Result<PiecewiseFlux, FluxError> {
    if group.n() != flux.n() {
        return Err(FluxError::DimensionMismatch {
            expected: flux.n(),
            got: group.n(),
        });
    }
    flux_along(flux, group.basis())
}

/// The flux with components `λ_j·φ` for arbitrary rows `λ_j`.
pub fn flux_along(flux: &PiecewiseFlux, rows: &[Frequency]) -> Result<PiecewiseFlux, FluxError> {
    let comps: Vec<ScalarPiecewise> = rows
        .iter()
        .map(|lj| flux.dot_frequency(lj))
        .collect::<Result<_, _>>()?;
    let pieces = (0..flux.pieces.len())
        .map(|p| comps.iter().map(|c| c.pieces[p].clone()).collect())
        .collect();
    PiecewiseFlux::new(
        flux.basis(),
        rows.len(),
        flux.breakpoints.clone(),
        pieces,
        flux.range.clone(),
    )
}

/// Upper bound for `max |φ_k'|` on `[lo, hi]`, per component: the largest
/// sampled `|φ_k'|` (interval endpoints plus uniform samples on every piece
/// meeting the range), times a safety factor of 1.1.
pub fn lip_bound(flux: &PiecewiseFlux, lo: f64, hi: f64) -> Vec<f64> {
    let (lo, hi) = (flux.clamp(lo.min(hi)), flux.clamp(hi.max(lo)));
    let bps = &flux.compiled.breakpoints;
    let mut out = vec![0.0f64; flux.n];
    for p in 0..flux.pieces.len() {
        let a = bps[p].max(lo);
        let b = bps[p + 1].min(hi);
        if a > b {
            continue;
        }
        for (k, bound) in out.iter_mut().enumerate() {
            let mut m = flux
                .derivative_on(p, k, a)
                .abs()
                .max(flux.derivative_on(p, k, b).abs());
            if b > a {
                let h = (b - a) / LIP_SAMPLES as f64;
                for i in 0..LIP_SAMPLES {
                    let u = a + (i as f64 + 0.5) * h;
                    m = m.max(flux.derivative_on(p, k, u).abs());
                }
            }
            *bound = bound.max(m);
        }
    }
    out.iter().map(|m| m * LIP_SAFETY).collect()
}

/// Witness that `ξ·φ` is affine, `τu + c`, on a piece.
#[derive(Debug, Clone, PartialEq)]
pub struct Degeneracy {
    /// Coordinates of `ξ` in the group basis; never zero.
    pub k: Vec<i64>,
    pub piece: usize,
    pub interval: (BigRational, BigRational),
    pub tau: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NdVerdict {
    NonDegenerate,
    Degenerate(Degeneracy),
}

impl NdVerdict {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, NdVerdict::Degenerate(_))
    }
}

/// Decides whether some nonzero `ξ` in the group makes `u ↦ ξ·φ(u)` affine
/// on a piece.
///
/// For each piece the degree ≥ 2 coefficients of `λ(k̄)·φ` are linear in
/// `k̄`; one matrix row per (degree, basis coordinate) pair collects them, and
/// a nonzero integer kernel vector is exactly a witness. A polynomial with a
/// nonzero coefficient of degree ≥ 2 is not affine on any subinterval, so the
/// per-piece test is complete.
pub fn nondegeneracy_check(
    flux: &PiecewiseFlux,
    group: &SpectrumGroupBasis,
) -> Result<NdVerdict, FluxError> {
    let m = group.rank();
    if m == 0 {
        return Ok(NdVerdict::NonDegenerate);
    }
    if group.n() != flux.n() {
        return Err(FluxError::DimensionMismatch {
            expected: flux.n(),
            got: group.n(),
        });
    }
    // directional flux of each basis frequency, on every piece
    let per_basis: Vec<ScalarPiecewise> = group
        .basis()
        .iter()
        .map(|l| flux.dot_frequency(l))
        .collect::<Result<_, _>>()?;
    let q = flux.basis.dim();
    for p in 0..flux.pieces.len() {
        let deg = per_basis
            .iter()
            .map(|s| s.pieces[p].len())
            .max()
            .unwrap_or(0);
        let mut rows = Vec::new();
        for d in 2..deg {
            for coord in 0..q {
                let row: Vec<BigRational> = per_basis
                    .iter()
                    .map(|s| {
                        s.pieces[p]
                            .get(d)
                            .map_or_else(BigRational::zero, |c| c.coeffs()[coord].clone())
                    })
                    .collect();
                rows.push(row);
            }
        }
        let kernel = integer_kernel(&rows, m)?;
        if let Some(w) = kernel.first() {
            let k: Vec<i64> = w
                .iter()
                .map(|x| x.to_i64().ok_or(LatticeError::ArithmeticOverflow))
                .collect::<Result<_, _>>()?;
            let dir = directional(flux, &k, group)?;
            debug_assert!(dir.is_affine_on(p));
            let coeff = |d: usize| dir.coeff(p, d).map_or(0.0, RealQ::value);
            return Ok(NdVerdict::Degenerate(Degeneracy {
                k,
                piece: p,
                interval: (flux.breakpoints[p].clone(), flux.breakpoints[p + 1].clone()),
                tau: coeff(1),
                offset: coeff(0),
            }));
        }
    }
    Ok(NdVerdict::NonDegenerate)
}
