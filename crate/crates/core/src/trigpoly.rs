//! Finite Bohr-Fourier expansions.
//!
//! [`TrigPoly`] is a real almost periodic trigonometric polynomial on ℝⁿ with
//! exact frequencies; [`TorusPoly`] is its periodic counterpart on 𝕋ᵐ indexed
//! by integer frequency vectors. Both keep the reality invariant
//! `a_{-λ} = conj(a_λ)` and never store zero amplitudes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::freqlattice::{same_basis, Frequency, FrequencyBasis};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrigError {
    #[error("point dimension {got} does not match polynomial dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polynomials are expressed over different frequency bases")]
    BasisMismatch,
    #[error("amplitude at {0} conflicts with an existing term or its reality partner")]
    Conflict(String),
}

trait SpectralKey: Ord + Clone + std::fmt::Debug {
    fn negated(&self) -> Self;
    fn is_origin(&self) -> bool;
}

impl SpectralKey for Frequency {
    fn negated(&self) -> Self {
        -self
    }
    fn is_origin(&self) -> bool {
        self.is_zero()
    }
}

impl SpectralKey for Vec<i64> {
    fn negated(&self) -> Self {
        self.iter().map(|k| -k).collect()
    }
    fn is_origin(&self) -> bool {
        self.iter().all(|&k| k == 0)
    }
}

/// Inserts a term and its reality partner, rejecting contradictions.
fn insert_real<K: SpectralKey>(
    terms: &mut BTreeMap<K, Complex64>,
    key: K,
    a: Complex64,
) -> Result<(), TrigError> {
    let conflict = || TrigError::Conflict(format!("{key:?}"));
    if key.is_origin() && a.im != 0.0 {
        return Err(conflict());
    }
    let partner = key.negated();
    if let Some(old) = terms.get(&key) {
        if *old != a {
            return Err(conflict());
        }
    }
    if let Some(old) = terms.get(&partner) {
        if *old != a.conj() {
            return Err(conflict());
        }
    }
    if a.is_zero() {
        return Ok(());
    }
    terms.insert(partner, a.conj());
    terms.insert(key, a);
    Ok(())
}

fn amplitude_sum<K>(terms: &BTreeMap<K, Complex64>) -> f64 {
    terms.values().map(|a| a.norm()).sum()
}

fn finish_eval<K>(terms: &BTreeMap<K, Complex64>, z: Complex64) -> f64 {
    debug_assert!(
        z.im.abs() <= 1e-12 * amplitude_sum(terms) + f64::MIN_POSITIVE,
        "imaginary residue {} breaks the reality invariant",
        z.im
    );
    z.re
}

/// Real trigonometric polynomial `Σ a_λ e^{2πiλ·x}` on ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    basis: Arc<FrequencyBasis>,
    n: usize,
    terms: BTreeMap<Frequency, Complex64>,
}

impl TrigPoly {
    pub fn zero(basis: &Arc<FrequencyBasis>, n: usize) -> Self {
        TrigPoly {
            basis: basis.clone(),
            n,
            terms: BTreeMap::new(),
        }
    }

    /// Builds a polynomial from `(λ, a_λ)` records, adding every reality
    /// partner `(-λ, conj a_λ)` that was not given.
    pub fn from_terms(
        basis: &Arc<FrequencyBasis>,
        n: usize,
        records: impl IntoIterator<Item = (Frequency, Complex64)>,
    ) -> Result<Self, TrigError> {
        let mut p = Self::zero(basis, n);
        for (f, a) in records {
            if !same_basis(f.basis(), basis) {
                return Err(TrigError::BasisMismatch);
            }
            if f.n() != n {
                return Err(TrigError::DimensionMismatch {
                    expected: n,
                    got: f.n(),
                });
            }
            insert_real(&mut p.terms, f, a)?;
        }
        Ok(p)
    }

    pub fn constant(basis: &Arc<FrequencyBasis>, n: usize, c: f64) -> Self {
        Self::from_terms(
            basis,
            n,
            [(Frequency::zero(basis, n), Complex64::new(c, 0.0))],
        )
        .expect("a real constant never conflicts")
    }

    /// `amplitude · sin(2π ξ·x)`.
    pub fn sine(xi: &Frequency, amplitude: f64) -> Self {
        if xi.is_zero() {
            return Self::zero(xi.basis(), xi.n());
        }
        Self::from_terms(
            xi.basis(),
            xi.n(),
            [(xi.clone(), Complex64::new(0.0, -amplitude / 2.0))],
        )
        .expect("a single sine pair never conflicts")
    }

    /// `amplitude · cos(2π ξ·x)`.
    pub fn cosine(xi: &Frequency, amplitude: f64) -> Self {
        let a = if xi.is_zero() {
            amplitude
        } else {
            amplitude / 2.0
        };
        Self::from_terms(xi.basis(), xi.n(), [(xi.clone(), Complex64::new(a, 0.0))])
            .expect("a single cosine pair never conflicts")
    }

    pub fn basis(&self) -> &Arc<FrequencyBasis> {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<Frequency, Complex64> {
        &self.terms
    }

    pub fn spectrum(&self) -> impl Iterator<Item = &Frequency> {
        self.terms.keys()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude_sum(&self) -> f64 {
        amplitude_sum(&self.terms)
    }

    /// `sqrt(Σ |a_λ|²)`, the mean L² norm by Parseval.
    pub fn n2_norm(&self) -> f64 {
        self.terms
            .values()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, TrigError> {
        if x.len() != self.n {
            return Err(TrigError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let z: Complex64 = self
            .terms
            .iter()
            .map(|(f, a)| a * Complex64::from_polar(1.0, 2.0 * PI * f.dot(x)))
            .sum();
        Ok(finish_eval(&self.terms, z))
    }

    /// Bohr-Fourier coefficient at `lambda`; zero for frequencies outside the
    /// spectrum.
    pub fn coeff(&self, lambda: &Frequency) -> Complex64 {
        self.terms.get(lambda).copied().unwrap_or_default()
    }

    /// The mean value `a_0`.
    pub fn mean(&self) -> f64 {
        self.coeff(&Frequency::zero(&self.basis, self.n)).re
    }
}

pub fn mean_and_coeff(p: &TrigPoly, lambda: &Frequency) -> Complex64 {
    p.coeff(lambda)
}

/// `α·p + β·q` with exact frequency merging.
pub fn combine(alpha: f64, p: &TrigPoly, beta: f64, q: &TrigPoly) -> Result<TrigPoly, TrigError> {
    if !same_basis(&p.basis, &q.basis) {
        return Err(TrigError::BasisMismatch);
    }
    if p.n != q.n {
        return Err(TrigError::DimensionMismatch {
            expected: p.n,
            got: q.n,
        });
    }
    let mut terms: BTreeMap<Frequency, Complex64> = p
        .terms
        .iter()
        .map(|(f, a)| (f.clone(), a * alpha))
        .collect();
    for (f, b) in &q.terms {
        *terms.entry(f.clone()).or_default() += b * beta;
    }
    terms.retain(|_, a| !a.is_zero());
    Ok(TrigPoly {
        basis: p.basis.clone(),
        n: p.n,
        terms,
    })
}

/// Drops every term with `|a_λ| ≤ eps`.
pub fn truncate(p: &TrigPoly, eps: f64) -> TrigPoly {
    TrigPoly {
        basis: p.basis.clone(),
        n: p.n,
        terms: p
            .terms
            .iter()
            .filter(|(_, a)| a.norm() > eps)
            .map(|(f, a)| (f.clone(), *a))
            .collect(),
    }
}

/// Real periodic polynomial `Σ a_k e^{2πik·y}` on 𝕋ᵐ.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoly {
    m: usize,
    terms: BTreeMap<Vec<i64>, Complex64>,
}

impl TorusPoly {
    pub fn zero(m: usize) -> Self {
        TorusPoly {
            m,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(
        m: usize,
        records: impl IntoIterator<Item = (Vec<i64>, Complex64)>,
    ) -> Result<Self, TrigError> {
        let mut p = Self::zero(m);
        for (k, a) in records {
            if k.len() != m {
                return Err(TrigError::DimensionMismatch {
                    expected: m,
                    got: k.len(),
                });
            }
            insert_real(&mut p.terms, k, a)?;
        }
        Ok(p)
    }

    pub fn constant(m: usize, c: f64) -> Self {
        Self::from_terms(m, [(vec![0; m], Complex64::new(c, 0.0))])
            .expect("a real constant never conflicts")
    }

    /// `amplitude · sin(2π(k·y) + phase)`.
    pub fn sine(k: &[i64], amplitude: f64, phase: f64) -> Self {
        if k.iter().all(|&x| x == 0) {
            return Self::constant(k.len(), amplitude * phase.sin());
        }
        let a = Complex64::from_polar(amplitude / 2.0, phase) * Complex64::new(0.0, -1.0);
        Self::from_terms(k.len(), [(k.to_vec(), a)]).expect("a single sine pair never conflicts")
    }

    /// `amplitude · cos(2π k·y)`.
    pub fn cosine(k: &[i64], amplitude: f64) -> Self {
        let origin = k.iter().all(|&x| x == 0);
        let a = if origin { amplitude } else { amplitude / 2.0 };
        Self::from_terms(k.len(), [(k.to_vec(), Complex64::new(a, 0.0))])
            .expect("a single cosine pair never conflicts")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn terms(&self) -> &BTreeMap<Vec<i64>, Complex64> {
        &self.terms
    }

    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.terms.get(k).copied().unwrap_or_default()
    }

    pub fn mean(&self) -> f64 {
        self.coeff(&vec![0; self.m]).re
    }

    pub fn amplitude_sum(&self) -> f64 {
        amplitude_sum(&self.terms)
    }

    /// `max_j |k_j|` over the spectrum.
    pub fn max_frequency(&self) -> i64 {
        self.terms
            .keys()
            .flatten()
            .map(|k| k.abs())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64, TrigError> {
        if y.len() != self.m {
            return Err(TrigError::DimensionMismatch {
                expected: self.m,
                got: y.len(),
            });
        }
        let z: Complex64 = self
            .terms
            .iter()
            .map(|(k, a)| {
                let phase: f64 = k.iter().zip(y).map(|(&kj, yj)| kj as f64 * yj).sum();
                a * Complex64::from_polar(1.0, 2.0 * PI * phase)
            })
            .sum();
        Ok(finish_eval(&self.terms, z))
    }

    /// Sum with another torus polynomial of the same dimension.
    pub fn add(&self, other: &TorusPoly) -> Result<TorusPoly, TrigError> {
        if self.m != other.m {
            return Err(TrigError::DimensionMismatch {
                expected: self.m,
                got: other.m,
            });
        }
        let mut terms = self.terms.clone();
        for (k, b) in &other.terms {
            *terms.entry(k.clone()).or_default() += b;
        }
        terms.retain(|_, a| !a.is_zero());
        Ok(TorusPoly { m: self.m, terms })
    }
}

/// Fejér weight `∏ max(0, 1 - |k_j|/r)`, exactly.
pub fn fejer_factor(k: &[i64], r: u32) -> BigRational {
    let r = BigInt::from(r);
    k.iter().fold(BigRational::one(), |acc, &kj| {
        let w = BigRational::new(&r - BigInt::from(kj.unsigned_abs()), r.clone());
        if w <= BigRational::zero() {
            BigRational::zero()
        } else {
            acc * w
        }
    })
}

/// Convolution with the Fejér kernel of order `r`: multiplies each amplitude
/// by its Fejér weight, dropping terms with some `|k_j| ≥ r`.
pub fn fejer_damp(p: &TorusPoly, r: u32) -> TorusPoly {
    assert!(r >= 1, "Fejér order must be at least 1");
    let terms = p
        .terms
        .iter()
        .filter_map(|(k, a)| {
            let w = fejer_factor(k, r);
            (!w.is_zero()).then(|| (k.clone(), a * w.to_f64().expect("weight lies in [0, 1]")))
        })
        .collect();
    TorusPoly { m: p.m, terms }
}
