#![allow(dead_code)]

use std::sync::Arc;

use apcl_core::{
    directional, Frequency, FrequencyBasis, PiecewiseFlux, RealQ, SpectrumGroupBasis, TorusPoly,
};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;

pub fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(p.into(), d.into())
}

pub fn rq(b: &Arc<FrequencyBasis>, p: i64, d: i64) -> RealQ {
    RealQ::from_rational(b, q(p, d)).unwrap()
}

pub fn sqrt2() -> Arc<FrequencyBasis> {
    FrequencyBasis::new(vec!["1".into(), "sqrt2".into()], vec![1.0, 2f64.sqrt()]).unwrap()
}

pub fn sqrt23() -> Arc<FrequencyBasis> {
    FrequencyBasis::new(
        vec!["1".into(), "sqrt2".into(), "sqrt3".into()],
        vec![1.0, 2f64.sqrt(), 3f64.sqrt()],
    )
    .unwrap()
}

/// `u²/2` in every component, on `[lo, hi]`.
pub fn burgers(b: &Arc<FrequencyBasis>, n: usize, lo: i64, hi: i64) -> PiecewiseFlux {
    let comps = (0..n)
        .map(|_| vec![rq(b, 0, 1), rq(b, 0, 1), rq(b, 1, 2)])
        .collect();
    PiecewiseFlux::polynomial(b, q(lo, 1), q(hi, 1), comps).unwrap()
}

/// Scalar flux `τu` on `[lo, hi]`.
pub fn affine(tau: i64, lo: i64, hi: i64) -> PiecewiseFlux {
    let b = FrequencyBasis::rational();
    PiecewiseFlux::polynomial(
        &b,
        q(lo, 1),
        q(hi, 1),
        vec![vec![rq(&b, 0, 1), rq(&b, tau, 1)]],
    )
    .unwrap()
}

pub fn freq1(b: &Arc<FrequencyBasis>, coeffs: &[i64]) -> Frequency {
    Frequency::new(vec![RealQ::new(
        b,
        coeffs.iter().map(|&c| q(c, 1)).collect(),
    )
    .unwrap()])
    .unwrap()
}

pub fn random_rational(rng: &mut impl Rng, num: i64, den: i64) -> BigRational {
    q(rng.gen_range(-num..=num), rng.gen_range(1..=den))
}

/// A random real trig polynomial on 𝕋ᵐ with frequencies in `[-kmax, kmax]ᵐ`.
pub fn random_torus_poly(
    rng: &mut impl Rng,
    m: usize,
    kmax: i64,
    terms: usize,
    amp: f64,
) -> TorusPoly {
    let mut p = TorusPoly::constant(m, rng.gen_range(-0.3..0.3));
    for _ in 0..terms {
        let k: Vec<i64> = (0..m).map(|_| rng.gen_range(-kmax..=kmax)).collect();
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
        let mut kneg = k.clone();
        kneg.iter_mut().for_each(|x| *x = -*x);
        let term = TorusPoly::from_terms(m, [(k, a), (kneg, a.conj())]).unwrap();
        p = p.add(&term).unwrap();
    }
    p
}

/// Rank over ℚ of the flattened frequency matrix, by Gaussian elimination.
pub fn rational_rank(rows: &[Vec<BigRational>]) -> usize {
    let mut a: Vec<Vec<BigRational>> = rows.to_vec();
    let cols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..a.len()).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        let pivot = a[rank][c].clone();
        for r in 0..a.len() {
            if r != rank && !a[r][c].is_zero() {
                let f = &a[r][c] / &pivot;
                for j in 0..cols {
                    let delta = &f * &a[rank][j];
                    a[r][j] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Continuous piecewise polynomial on the given breakpoints, as per-piece
/// rational monomial coefficients. Each new piece adds `(u - b)·g(u)` to the
/// previous one; with probability `p_affine` a piece is affine instead.
pub fn random_scalar_pieces(
    rng: &mut impl Rng,
    bps: &[BigRational],
    max_degree: usize,
    p_affine: f64,
) -> Vec<Vec<BigRational>> {
    let pieces = bps.len() - 1;
    let mut out: Vec<Vec<BigRational>> = Vec::with_capacity(pieces);
    let random_poly = |rng: &mut dyn rand::RngCore, deg: usize| -> Vec<BigRational> {
        (0..=deg).map(|_| q(rng.gen_range(-3..=3), 1)).collect()
    };
    for p in 0..pieces {
        let poly = if rng.gen_bool(p_affine) {
            let anchor = if p == 0 {
                q(rng.gen_range(-3..=3), 1)
            } else {
                eval_poly(&out[p - 1], &bps[p])
            };
            let slope = q(rng.gen_range(-3..=3), 1);
            // anchor + slope·(u - b)
            vec![anchor - &slope * &bps[p], slope]
        } else if p == 0 {
            random_poly(rng, max_degree)
        } else {
            let g = random_poly(rng, max_degree - 1);
            let mut next = out[p - 1].clone();
            next.resize(max_degree + 1, BigRational::zero());
            // (u - b)·g(u)
            for (d, c) in g.iter().enumerate() {
                next[d + 1] += c;
                next[d] -= c * &bps[p];
            }
            next
        };
        out.push(poly);
    }
    out
}

pub fn eval_poly(c: &[BigRational], u: &BigRational) -> BigRational {
    c.iter()
        .rev()
        .fold(BigRational::zero(), |acc, x| acc * u + x)
}

/// Rational breakpoints `b_0 < ... < b_P` with small denominators.
pub fn random_breakpoints(rng: &mut impl Rng, pieces: usize) -> Vec<BigRational> {
    let mut b = vec![q(rng.gen_range(-3..=-1), 1)];
    for _ in 0..pieces {
        let step = q(rng.gen_range(1..=4), rng.gen_range(1..=3));
        let next = b.last().unwrap() + step;
        b.push(next);
    }
    b
}

/// A random flux `φ_j = Σ_r c_{jr} ψ_r + affine_j` in ℝⁿ over ℚ, with the
/// standard lattice as group. Rank deficiency of `c` plants degenerate
/// directions with small coordinates.
pub fn random_nd_instance(rng: &mut impl Rng) -> (PiecewiseFlux, SpectrumGroupBasis) {
    let b = FrequencyBasis::rational();
    let n = rng.gen_range(1..=3);
    let pieces = rng.gen_range(1..=3);
    let bps = random_breakpoints(rng, pieces);
    let r = rng.gen_range(1..=n + 1).min(3);
    let psi: Vec<Vec<Vec<BigRational>>> = (0..r)
        .map(|_| random_scalar_pieces(rng, &bps, 4, 0.15))
        .collect();
    let c: Vec<Vec<i64>> = (0..n)
        .map(|_| (0..r).map(|_| rng.gen_range(-1..=1)).collect())
        .collect();
    let affine_part: Vec<(i64, i64)> = (0..n)
        .map(|_| (rng.gen_range(-2..=2), rng.gen_range(-2..=2)))
        .collect();
    let pieces_q: Vec<Vec<Vec<RealQ>>> = (0..pieces)
        .map(|p| {
            (0..n)
                .map(|j| {
                    let mut coeffs = vec![BigRational::zero(); 5];
                    coeffs[0] = q(affine_part[j].0, 1);
                    coeffs[1] = q(affine_part[j].1, 1);
                    for (rr, row) in psi.iter().enumerate() {
                        for (d, x) in row[p].iter().enumerate() {
                            coeffs[d] += x * BigRational::from_integer(BigInt::from(c[j][rr]));
                        }
                    }
                    coeffs
                        .into_iter()
                        .map(|x| RealQ::from_rational(&b, x).unwrap())
                        .collect()
                })
                .collect()
        })
        .collect();
    let range = (bps[0].clone(), bps[pieces].clone());
    let flux = PiecewiseFlux::new(&b, n, bps, pieces_q, range).unwrap();
    let group = SpectrumGroupBasis::standard(&b, n).unwrap();
    (flux, group)
}

/// Brute-force search for `k̄ ≠ 0`, `|k̄|∞ ≤ bound`, making `λ(k̄)·φ` affine
/// on some piece.
pub fn brute_force_witness(
    flux: &PiecewiseFlux,
    group: &SpectrumGroupBasis,
    bound: i64,
) -> Option<Vec<i64>> {
    let m = group.rank();
    let side = (2 * bound + 1) as usize;
    for mut idx in 0..side.pow(m as u32) {
        let mut k = vec![0i64; m];
        for kj in k.iter_mut() {
            *kj = (idx % side) as i64 - bound;
            idx /= side;
        }
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        let dir = directional(flux, &k, group).unwrap();
        if (0..dir.pieces().len()).any(|p| dir.is_affine_on(p)) {
            return Some(k);
        }
    }
    None
}

/// Random spectrum in ℝⁿ over the basis {1, √2, √3}: integer combinations
/// of up to three random generators, so ranks vary.
pub fn random_spectrum(rng: &mut impl Rng) -> (usize, Vec<Frequency>) {
    let b = sqrt23();
    let n = rng.gen_range(1..=3);
    let count = rng.gen_range(1..=6);
    let gens: Vec<Frequency> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let comps = (0..n)
                .map(|_| {
                    let coeffs = (0..3)
                        .map(|i| {
                            if i == 0 || rng.gen_bool(0.4) {
                                random_rational(rng, 4, 6)
                            } else {
                                BigRational::zero()
                            }
                        })
                        .collect();
                    RealQ::new(&b, coeffs).unwrap()
                })
                .collect();
            Frequency::new(comps).unwrap()
        })
        .collect();
    let spectrum = (0..count)
        .map(|_| {
            gens.iter().fold(Frequency::zero(&b, n), |acc, g| {
                &acc + &g.scale_int(&BigInt::from(rng.gen_range(-3..=3)))
            })
        })
        .collect();
    (n, spectrum)
}
