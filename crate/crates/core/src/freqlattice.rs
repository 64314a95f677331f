//! Exact real frequencies and free-abelian bases of finitely generated
//! frequency groups.
//!
//! A real number is represented as a rational combination of a declared
//! basis of real numbers that the caller asserts to be linearly independent
//! over the rationals (for instance `1, √2`). Under that declaration equality,
//! group membership and integer relations become decidable in exact
//! arithmetic, which is what the integer kernel and Hermite normal form
//! routines below rely on.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Hard cap on the bit length of any intermediate integer.
const MAX_BITS: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("frequency basis must contain at least one element")]
    EmptyBasis,
    #[error("frequency basis labels and values differ in length ({labels} vs {values})")]
    LabelCount { labels: usize, values: usize },
    #[error("frequency basis value {0} is zero, non-finite or repeated")]
    BadBasisValue(f64),
    #[error("expected {expected} rational coordinates, got {got}")]
    CoordinateCount { expected: usize, got: usize },
    #[error("values are expressed over different frequency bases")]
    BasisMismatch,
    #[error("frequency dimension mismatch: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("product of two irrational elements is not representable over the declared basis")]
    IrrationalProduct,
    #[error("the declared basis has no element equal to 1, rationals are not representable")]
    NoUnit,
    #[error("exact integer arithmetic exceeded {MAX_BITS} bits")]
    ArithmeticOverflow,
    #[error("cannot parse rational {0:?}")]
    Parse(String),
}

/// Parses `"p/q"` or `"p"` into a reduced rational.
pub fn parse_rational(s: &str) -> Result<BigRational, LatticeError> {
    let err = || LatticeError::Parse(s.to_string());
    let t = s.trim();
    let (num, den) = match t.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (t, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| err())?;
    let den: BigInt = den.parse().map_err(|_| err())?;
    if den.is_zero() {
        return Err(err());
    }
    Ok(BigRational::new(num, den))
}

pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Declared ℚ-independent real numbers over which every exact quantity is
/// expressed. Independence is recorded, not verified.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBasis {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl FrequencyBasis {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Arc<Self>, LatticeError> {
        if values.is_empty() {
            return Err(LatticeError::EmptyBasis);
        }
        if labels.len() != values.len() {
            return Err(LatticeError::LabelCount {
                labels: labels.len(),
                values: values.len(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if v == 0.0 || !v.is_finite() || values[..i].contains(&v) {
                return Err(LatticeError::BadBasisValue(v));
            }
        }
        Ok(Arc::new(FrequencyBasis { labels, values }))
    }

    /// The basis `{1}`: every exact quantity is a plain rational.
    pub fn rational() -> Arc<Self> {
        Arc::new(FrequencyBasis {
            labels: vec!["1".into()],
            values: vec![1.0],
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the element equal to 1, if declared.
    pub fn unit_index(&self) -> Option<usize> {
        self.values.iter().position(|&v| v == 1.0)
    }
}

pub(crate) fn same_basis(a: &Arc<FrequencyBasis>, b: &Arc<FrequencyBasis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Exact real number: a rational combination of a [`FrequencyBasis`], with a
/// float shadow of its value.
#[derive(Clone)]
pub struct RealQ {
    basis: Arc<FrequencyBasis>,
    coeffs: Vec<BigRational>,
    value: f64,
}

fn shadow(basis: &FrequencyBasis, coeffs: &[BigRational]) -> f64 {
    coeffs
        .iter()
        .zip(&basis.values)
        .fold(0.0, |acc, (c, v)| acc + c.to_f64().unwrap_or(f64::NAN) * v)
}

impl RealQ {
    pub fn new(
        basis: &Arc<FrequencyBasis>,
        coeffs: Vec<BigRational>,
    ) -> Result<Self, LatticeError> {
        if coeffs.len() != basis.dim() {
            return Err(LatticeError::CoordinateCount {
                expected: basis.dim(),
                got: coeffs.len(),
            });
        }
        Ok(Self::from_parts(basis.clone(), coeffs))
    }

    fn from_parts(basis: Arc<FrequencyBasis>, coeffs: Vec<BigRational>) -> Self {
        let value = shadow(&basis, &coeffs);
        RealQ {
            basis,
            coeffs,
            value,
        }
    }

    pub fn zero(basis: &Arc<FrequencyBasis>) -> Self {
        Self::from_parts(basis.clone(), vec![BigRational::zero(); basis.dim()])
    }

    /// The rational `r`, which needs a unit element in the basis.
    pub fn from_rational(
        basis: &Arc<FrequencyBasis>,
        r: BigRational,
    ) -> Result<Self, LatticeError> {
        let unit = basis.unit_index().ok_or(LatticeError::NoUnit)?;
        let mut coeffs = vec![BigRational::zero(); basis.dim()];
        coeffs[unit] = r;
        Ok(Self::from_parts(basis.clone(), coeffs))
    }

    pub fn parse(basis: &Arc<FrequencyBasis>, coeffs: &[String]) -> Result<Self, LatticeError> {
        let c = coeffs
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(basis, c)
    }

    pub fn basis(&self) -> &Arc<FrequencyBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Float shadow `Σ coeffs[q]·values[q]`, summed in declared basis order.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Returns the rational value if this element is a rational multiple of
    /// the unit.
    pub fn as_rational(&self) -> Option<&BigRational> {
        let unit = self.basis.unit_index()?;
        self.coeffs
            .iter()
            .enumerate()
            .all(|(i, c)| i == unit || c.is_zero())
            .then(|| &self.coeffs[unit])
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        Self::from_parts(
            self.basis.clone(),
            self.coeffs.iter().map(|c| c * r).collect(),
        )
    }

    pub fn scale_int(&self, k: &BigInt) -> Self {
        self.scale(&BigRational::from_integer(k.clone()))
    }

    /// Exact product, defined when at least one factor is rational.
    pub fn try_mul(&self, other: &RealQ) -> Result<Self, LatticeError> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(LatticeError::BasisMismatch);
        }
        if let Some(r) = other.as_rational() {
            Ok(self.scale(r))
        } else if let Some(r) = self.as_rational() {
            Ok(other.scale(r))
        } else if self.is_zero() || other.is_zero() {
            Ok(Self::zero(&self.basis))
        } else {
            Err(LatticeError::IrrationalProduct)
        }
    }

    fn zip_with(
        &self,
        other: &RealQ,
        f: impl Fn(&BigRational, &BigRational) -> BigRational,
    ) -> Self {
        assert!(
            same_basis(&self.basis, &other.basis),
            "RealQ arithmetic across different frequency bases"
        );
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| f(a, b))
            .collect();
        Self::from_parts(self.basis.clone(), coeffs)
    }
}

/// Float shadow of an exact real.
pub fn real_value(x: &RealQ) -> f64 {
    x.value()
}

impl<'a> Add<&'a RealQ> for &'a RealQ {
    type Output = RealQ;
    fn add(self, rhs: &'a RealQ) -> RealQ {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a RealQ> for &'a RealQ {
    type Output = RealQ;
    fn sub(self, rhs: &'a RealQ) -> RealQ {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &RealQ {
    type Output = RealQ;
    fn neg(self) -> RealQ {
        RealQ::from_parts(self.basis.clone(), self.coeffs.iter().map(|c| -c).collect())
    }
}

impl PartialEq for RealQ {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl Eq for RealQ {}

impl Hash for RealQ {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.coeffs.hash(state)
    }
}

impl PartialOrd for RealQ {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RealQ {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coeffs.cmp(&other.coeffs)
    }
}

impl fmt::Debug for RealQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for RealQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, l) in self.coeffs.iter().zip(&self.basis.labels) {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})·{}", c, l)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// A frequency vector λ ∈ ℝⁿ with exact coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frequency {
    coords: Vec<RealQ>,
}

impl Frequency {
    pub fn new(coords: Vec<RealQ>) -> Result<Self, LatticeError> {
        let first = coords.first().ok_or(LatticeError::DimensionMismatch {
            expected: 1,
            got: 0,
        })?;
        if coords.iter().any(|c| !same_basis(c.basis(), first.basis())) {
            return Err(LatticeError::BasisMismatch);
        }
        Ok(Frequency { coords })
    }

    pub fn zero(basis: &Arc<FrequencyBasis>, n: usize) -> Self {
        Frequency {
            coords: vec![RealQ::zero(basis); n.max(1)],
        }
    }

    /// Parses a rational matrix: one row of basis coefficients per component.
    pub fn parse(basis: &Arc<FrequencyBasis>, rows: &[Vec<String>]) -> Result<Self, LatticeError> {
        let coords = rows
            .iter()
            .map(|r| RealQ::parse(basis, r))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(coords)
    }

    /// Frequency with plain rational components over a basis that has a unit.
    pub fn from_rationals(
        basis: &Arc<FrequencyBasis>,
        comps: &[BigRational],
    ) -> Result<Self, LatticeError> {
        let coords = comps
            .iter()
            .map(|c| RealQ::from_rational(basis, c.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(coords)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn basis(&self) -> &Arc<FrequencyBasis> {
        self.coords[0].basis()
    }

    pub fn coords(&self) -> &[RealQ] {
        &self.coords
    }

    pub fn values(&self) -> Vec<f64> {
        self.coords.iter().map(RealQ::value).collect()
    }

    /// Float shadow of `λ·x`.
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coords
            .iter()
            .zip(x)
            .map(|(c, xi)| c.value() * xi)
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(RealQ::is_zero)
    }

    pub fn scale_int(&self, k: &BigInt) -> Self {
        Frequency {
            coords: self.coords.iter().map(|c| c.scale_int(k)).collect(),
        }
    }

    /// Row-major `n·q` vector of rational coordinates.
    pub fn flatten(&self) -> Vec<BigRational> {
        self.coords
            .iter()
            .flat_map(|c| c.coeffs().iter().cloned())
            .collect()
    }

    fn from_flat(basis: &Arc<FrequencyBasis>, n: usize, flat: &[BigRational]) -> Self {
        let q = basis.dim();
        Frequency {
            coords: (0..n)
                .map(|i| RealQ::from_parts(basis.clone(), flat[i * q..(i + 1) * q].to_vec()))
                .collect(),
        }
    }

    fn check_compatible(&self, other: &Frequency) -> Result<(), LatticeError> {
        if !same_basis(self.basis(), other.basis()) {
            return Err(LatticeError::BasisMismatch);
        }
        if self.n() != other.n() {
            return Err(LatticeError::DimensionMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        Ok(())
    }
}

impl<'a> Add<&'a Frequency> for &'a Frequency {
    type Output = Frequency;
    fn add(self, rhs: &'a Frequency) -> Frequency {
        assert_eq!(self.n(), rhs.n(), "frequency dimension mismatch");
        Frequency {
            coords: self
                .coords
                .iter()
                .zip(&rhs.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Neg for &Frequency {
    type Output = Frequency;
    fn neg(self) -> Frequency {
        Frequency {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }
}

impl fmt::Debug for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.coords).finish()
    }
}

fn check_bits(x: &BigInt) -> Result<(), LatticeError> {
    if x.bits() > MAX_BITS {
        Err(LatticeError::ArithmeticOverflow)
    } else {
        Ok(())
    }
}

fn lcm_of_denoms<'a>(it: impl IntoIterator<Item = &'a BigRational>) -> BigInt {
    it.into_iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

/// Row Hermite normal form over ℤ: positive pivots, rows ordered by pivot
/// column, entries above each pivot reduced into `[0, pivot)`, zero rows
/// removed. Returns the rows and their pivot columns.
pub fn row_hnf(mut rows: Vec<Vec<BigInt>>) -> Result<(Vec<Vec<BigInt>>, Vec<usize>), LatticeError> {
    let width = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..width {
        if r == rows.len() {
            break;
        }
        loop {
            let best = (r..rows.len())
                .filter(|&i| !rows[i][col].is_zero())
                .min_by(|&a, &b| rows[a][col].abs().cmp(&rows[b][col].abs()));
            let Some(best) = best else { break };
            rows.swap(r, best);
            let mut done = true;
            for i in r + 1..rows.len() {
                if rows[i][col].is_zero() {
                    continue;
                }
                let q = rows[i][col].div_floor(&rows[r][col]);
                let (head, tail) = rows.split_at_mut(i);
                for (x, p) in tail[0].iter_mut().zip(&head[r]) {
                    *x -= &q * p;
                    check_bits(x)?;
                }
                if !tail[0][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if r == rows.len() || rows[r][col].is_zero() {
            continue;
        }
        if rows[r][col].is_negative() {
            for x in rows[r].iter_mut() {
                *x = -&*x;
            }
        }
        for i in 0..r {
            let q = rows[i][col].div_floor(&rows[r][col]);
            if q.is_zero() {
                continue;
            }
            let (head, tail) = rows.split_at_mut(r);
            for (x, p) in head[i].iter_mut().zip(&tail[0]) {
                *x -= &q * p;
                check_bits(x)?;
            }
        }
        pivots.push(col);
        r += 1;
    }
    rows.truncate(r);
    Ok((rows, pivots))
}

/// A ℤ-basis of `{ k ∈ ℤᵐ : A·k = 0 }` for a rational `r × m` matrix, in row
/// Hermite normal form. Empty iff the kernel is trivial.
pub fn integer_kernel(
    a: &[Vec<BigRational>],
    cols: usize,
) -> Result<Vec<Vec<BigInt>>, LatticeError> {
    let mut m: Vec<Vec<BigInt>> = Vec::with_capacity(a.len());
    for row in a {
        if row.len() != cols {
            return Err(LatticeError::DimensionMismatch {
                expected: cols,
                got: row.len(),
            });
        }
        let d = lcm_of_denoms(row);
        let ints: Vec<BigInt> = row.iter().map(|x| (x * &d).to_integer()).collect();
        if ints.iter().any(|x| !x.is_zero()) {
            m.push(ints);
        }
    }
    // Unimodular column operations reduce A·U to [L | 0] with L of full
    // column rank; the trailing columns of U then span the kernel.
    let mut u: Vec<Vec<BigInt>> = (0..cols)
        .map(|i| (0..cols).map(|j| BigInt::from((i == j) as i32)).collect())
        .collect();
    let mut piv = 0;
    for i in 0..m.len() {
        if piv == cols {
            break;
        }
        for c in piv + 1..cols {
            if m[i][c].is_zero() {
                continue;
            }
            if m[i][piv].is_zero() {
                swap_cols(&mut m, &mut u, piv, c);
                continue;
            }
            let ext = m[i][piv].extended_gcd(&m[i][c]);
            let (g, x, y) = (ext.gcd, ext.x, ext.y);
            let p = &m[i][c] / &g;
            let q = &m[i][piv] / &g;
            for mat in [&mut m, &mut u] {
                for row in mat.iter_mut() {
                    let a0 = row[piv].clone();
                    let b0 = row[c].clone();
                    row[piv] = &x * &a0 + &y * &b0;
                    row[c] = &q * &b0 - &p * &a0;
                    check_bits(&row[piv])?;
                    check_bits(&row[c])?;
                }
            }
        }
        if !m[i][piv].is_zero() {
            piv += 1;
        }
    }
    let kernel: Vec<Vec<BigInt>> = (piv..cols)
        .map(|c| u.iter().map(|row| row[c].clone()).collect())
        .collect();
    if kernel.is_empty() {
        return Ok(kernel);
    }
    Ok(row_hnf(kernel)?.0)
}

fn swap_cols(m: &mut [Vec<BigInt>], u: &mut [Vec<BigInt>], a: usize, b: usize) {
    for row in m.iter_mut().chain(u.iter_mut()) {
        row.swap(a, b);
    }
}

/// Free-abelian basis of the group generated by a finite spectrum, together
/// with the integer coordinates of every generator.
#[derive(Debug, Clone)]
pub struct SpectrumGroupBasis {
    freq_basis: Arc<FrequencyBasis>,
    n: usize,
    scale: BigInt,
    hnf: Vec<Vec<BigInt>>,
    pivots: Vec<usize>,
    basis: Vec<Frequency>,
    members: Vec<(Frequency, Vec<i64>)>,
}

impl SpectrumGroupBasis {
    /// The standard lattice ℤⁿ ⊂ ℝⁿ, generated by the unit vectors.
    pub fn standard(freq_basis: &Arc<FrequencyBasis>, n: usize) -> Result<Self, LatticeError> {
        let units = (0..n)
            .map(|i| {
                let comps: Vec<BigRational> = (0..n)
                    .map(|j| BigRational::from_integer(BigInt::from((i == j) as i32)))
                    .collect();
                Frequency::from_rationals(freq_basis, &comps)
            })
            .collect::<Result<Vec<_>, _>>()?;
        group_basis(freq_basis, n, &units)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn freq_basis(&self) -> &Arc<FrequencyBasis> {
        &self.freq_basis
    }

    pub fn basis(&self) -> &[Frequency] {
        &self.basis
    }

    /// Generators in input order with their coordinates.
    pub fn members(&self) -> &[(Frequency, Vec<i64>)] {
        &self.members
    }

    pub fn coords_of(&self, lambda: &Frequency) -> Option<&[i64]> {
        self.members
            .iter()
            .find(|(f, _)| f == lambda)
            .map(|(_, k)| k.as_slice())
    }

    /// λ(k̄) = Σ kⱼλⱼ.
    pub fn frequency_of(&self, k: &[i64]) -> Frequency {
        assert_eq!(
            k.len(),
            self.rank(),
            "coordinate vector length must equal the rank"
        );
        k.iter().zip(&self.basis).fold(
            Frequency::zero(&self.freq_basis, self.n),
            |acc, (kj, lj)| &acc + &lj.scale_int(&BigInt::from(*kj)),
        )
    }

    /// Float shadow of the `m × n` matrix whose rows are the basis frequencies.
    pub fn lambda_values(&self) -> Vec<Vec<f64>> {
        self.basis.iter().map(Frequency::values).collect()
    }

    fn solve(&self, v: &[BigInt]) -> Option<Vec<BigInt>> {
        let mut res = v.to_vec();
        let mut k = Vec::with_capacity(self.rank());
        for (row, &c) in self.hnf.iter().zip(&self.pivots) {
            let (q, rem) = res[c].div_rem(&row[c]);
            if !rem.is_zero() {
                return None;
            }
            for (x, p) in res.iter_mut().zip(row) {
                *x -= &q * p;
            }
            k.push(q);
        }
        res.iter().all(Zero::is_zero).then_some(k)
    }
}

fn to_i64_vec(v: &[BigInt]) -> Result<Vec<i64>, LatticeError> {
    v.iter()
        .map(|x| x.to_i64().ok_or(LatticeError::ArithmeticOverflow))
        .collect()
}

/// Basis of the smallest additive group containing `spectrum`.
///
/// All frequencies are flattened to rational rows of length `n·q`, scaled by
/// the common denominator to an integer matrix and brought to row Hermite
/// normal form; the nonzero rows, scaled back, are the basis.
pub fn group_basis(
    freq_basis: &Arc<FrequencyBasis>,
    n: usize,
    spectrum: &[Frequency],
) -> Result<SpectrumGroupBasis, LatticeError> {
    for f in spectrum {
        if !same_basis(f.basis(), freq_basis) {
            return Err(LatticeError::BasisMismatch);
        }
        if f.n() != n {
            return Err(LatticeError::DimensionMismatch {
                expected: n,
                got: f.n(),
            });
        }
    }
    let flat: Vec<Vec<BigRational>> = spectrum.iter().map(Frequency::flatten).collect();
    let scale = lcm_of_denoms(flat.iter().flatten());
    let ints: Vec<Vec<BigInt>> = flat
        .iter()
        .map(|row| row.iter().map(|x| (x * &scale).to_integer()).collect())
        .collect();
    let (hnf, pivots) = row_hnf(ints.clone())?;
    let scale_q = BigRational::from_integer(scale.clone());
    let basis = hnf
        .iter()
        .map(|row| {
            let flat: Vec<BigRational> = row
                .iter()
                .map(|x| BigRational::from_integer(x.clone()) / &scale_q)
                .collect();
            Frequency::from_flat(freq_basis, n, &flat)
        })
        .collect();
    let mut out = SpectrumGroupBasis {
        freq_basis: freq_basis.clone(),
        n,
        scale,
        hnf,
        pivots,
        basis,
        members: Vec::with_capacity(spectrum.len()),
    };
    for (f, v) in spectrum.iter().zip(&ints) {
        let k = out
            .solve(v)
            .expect("generator must lie in the group it generates");
        out.members.push((f.clone(), to_i64_vec(&k)?));
    }
    Ok(out)
}

/// Integer coordinates of `lambda` in the group basis, or `None` if `lambda`
/// is not a member of the group.
pub fn member_coords(lambda: &Frequency, group: &SpectrumGroupBasis) -> Option<Vec<i64>> {
    lambda
        .check_compatible(&Frequency::zero(&group.freq_basis, group.n))
        .ok()?;
    let scale = BigRational::from_integer(group.scale.clone());
    let mut ints = Vec::new();
    for x in lambda.flatten() {
        let y = x * &scale;
        if !y.is_integer() {
            return None;
        }
        ints.push(y.to_integer());
    }
    group.solve(&ints).and_then(|k| to_i64_vec(&k).ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(p.into(), d.into())
    }

    fn sqrt2_basis() -> Arc<FrequencyBasis> {
        FrequencyBasis::new(vec!["1".into(), "sqrt2".into()], vec![1.0, 2f64.sqrt()]).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn real_value_examples() {
        let b = sqrt2_basis();
        assert_eq!(RealQ::new(&b, vec![q(0, 1), q(0, 1)]).unwrap().value(), 0.0);
        let s = RealQ::new(&b, vec![q(1, 1), q(1, 1)]).unwrap();
        assert!((s.value() - (1.0 + 2f64.sqrt())).abs() <= f64::EPSILON * 2.5);
        assert_eq!(
            real_value(&RealQ::new(&b, vec![q(-3, 2), q(0, 1)]).unwrap()),
            -1.5
        );
    }

    #[test]
    fn basis_validation() {
        assert_eq!(
            FrequencyBasis::new(vec![], vec![]),
            Err(LatticeError::EmptyBasis)
        );
        assert!(FrequencyBasis::new(vec!["a".into(), "b".into()], vec![1.0, 1.0]).is_err());
        assert!(FrequencyBasis::new(vec!["a".into()], vec![0.0]).is_err());
        assert!(FrequencyBasis::new(vec!["a".into()], vec![f64::NAN]).is_err());
    }

    #[test]
    fn irrational_products_are_refused() {
        let b = sqrt2_basis();
        let s = RealQ::new(&b, vec![q(0, 1), q(1, 1)]).unwrap();
        assert_eq!(s.try_mul(&s), Err(LatticeError::IrrationalProduct));
        let half = RealQ::from_rational(&b, q(1, 2)).unwrap();
        assert_eq!(s.try_mul(&half).unwrap().coeffs(), &[q(0, 1), q(1, 2)]);
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("6/4").unwrap(), q(3, 2));
        assert_eq!(parse_rational(" -2 ").unwrap(), q(-2, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn kernel_one_relation() {
        let k = integer_kernel(&[vec![q(1, 1), q(1, 1)]], 2).unwrap();
        assert_eq!(k, vec![ints(&[1, -1])]);
    }

    #[test]
    fn kernel_trivial_for_identity() {
        let a = vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]];
        assert!(integer_kernel(&a, 2).unwrap().is_empty());
    }

    #[test]
    fn kernel_with_denominators() {
        // Cleared to [[3, 2, 0]]; the brute-force box |k|∞ ≤ 3 contains
        // (2,-3,0), (0,0,1) and their combinations only.
        let k = integer_kernel(&[vec![q(1, 2), q(1, 3), q(0, 1)]], 3).unwrap();
        assert_eq!(k, vec![ints(&[2, -3, 0]), ints(&[0, 0, 1])]);
    }

    #[test]
    fn kernel_of_empty_matrix_is_everything() {
        let k = integer_kernel(&[], 2).unwrap();
        assert_eq!(k, vec![ints(&[1, 0]), ints(&[0, 1])]);
    }

    #[test]
    fn periodic_spectrum_has_rank_one() {
        let b = FrequencyBasis::rational();
        let f = |a: i64| Frequency::from_rationals(&b, &[q(a, 1), q(0, 1)]).unwrap();
        let g = group_basis(&b, 2, &[f(1), f(-1)]).unwrap();
        assert_eq!(g.rank(), 1);
        assert_eq!(g.basis()[0], f(1));
        assert_eq!(g.members()[0].1, vec![1]);
        assert_eq!(g.members()[1].1, vec![-1]);
    }

    #[test]
    fn zero_spectrum_has_rank_zero() {
        let b = FrequencyBasis::rational();
        let g = group_basis(&b, 1, &[Frequency::zero(&b, 1)]).unwrap();
        assert_eq!(g.rank(), 0);
        assert_eq!(g.members()[0].1, Vec::<i64>::new());
        assert_eq!(group_basis(&b, 1, &[]).unwrap().rank(), 0);
    }

    #[test]
    fn one_sqrt2_spectrum_has_rank_two() {
        let b = sqrt2_basis();
        let f = |a: i64, c: i64| {
            Frequency::new(vec![RealQ::new(&b, vec![q(a, 1), q(c, 1)]).unwrap()]).unwrap()
        };
        let g = group_basis(&b, 1, &[f(1, 0), f(0, 1), f(1, 1)]).unwrap();
        assert_eq!(g.rank(), 2);
        assert_eq!(g.basis(), &[f(1, 0), f(0, 1)]);
        let coords: Vec<_> = g.members().iter().map(|(_, k)| k.clone()).collect();
        assert_eq!(coords, vec![vec![1, 0], vec![0, 1], vec![1, 1]]);
        // Brute force: no single rational generator g = (a, c)/d with small
        // entries has all three coordinate vectors as integer multiples.
        let targets = [(1i64, 0i64), (0, 1), (1, 1)];
        for d in 1i64..=6 {
            for a in -6i64..=6 {
                for c in -6i64..=6 {
                    if a == 0 && c == 0 {
                        continue;
                    }
                    let all = targets.iter().all(|&(x, y)| {
                        // (x, y) = s·(a, c)/d for integer s
                        let s = if a != 0 { q(x * d, a) } else { q(y * d, c) };
                        s.is_integer() && s.clone() * q(a, d) == q(x, 1) && s * q(c, d) == q(y, 1)
                    });
                    assert!(!all, "rank-one generator found: ({a},{c})/{d}");
                }
            }
        }
    }

    #[test]
    fn member_coords_examples() {
        let b = sqrt2_basis();
        let f = |a: BigRational, c: BigRational| {
            Frequency::new(vec![RealQ::new(&b, vec![a, c]).unwrap()]).unwrap()
        };
        let g = group_basis(&b, 1, &[f(q(2, 1), q(0, 1)), f(q(0, 1), q(1, 1))]).unwrap();
        assert_eq!(member_coords(&g.basis()[0], &g), Some(vec![1, 0]));
        assert_eq!(member_coords(&Frequency::zero(&b, 1), &g), Some(vec![0, 0]));
        assert_eq!(member_coords(&f(q(1, 1), q(0, 1)), &g), None);
        assert_eq!(member_coords(&f(q(1, 3), q(0, 1)), &g), None);
        assert_eq!(member_coords(&f(q(-4, 1), q(3, 1)), &g), Some(vec![-2, 3]));
    }

    #[test]
    fn overflow_guard() {
        let big = BigInt::one() << (MAX_BITS as usize + 8);
        assert_eq!(check_bits(&big), Err(LatticeError::ArithmeticOverflow));
    }
}
