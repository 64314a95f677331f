//! Fixtures shared by the criterion benches.

use apcl_core::{
    exact_cell_average, CellField, FrequencyBasis, PiecewiseFlux, RealQ, TorusGrid, TorusPoly,
};
use num_bigint::BigInt;
use num_rational::BigRational;

pub fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(p.into(), d.into())
}

/// `u²/2` in each of `m` components on `[-2, 2]`.
pub fn burgers(m: usize) -> PiecewiseFlux {
    let b = FrequencyBasis::rational();
    let r = |p, d| RealQ::from_rational(&b, q(p, d)).unwrap();
    let comps = (0..m).map(|_| vec![r(0, 1), r(0, 1), r(1, 2)]).collect();
    PiecewiseFlux::polynomial(&b, q(-2, 1), q(2, 1), comps).unwrap()
}

/// `0.3 + 0.5 sin 2πy₁` plus a cosine along every further axis.
pub fn smooth_field(m: usize, n: usize) -> CellField {
    let mut p = TorusPoly::constant(m, 0.3);
    let mut k = vec![0; m];
    k[0] = 1;
    p = p.add(&TorusPoly::sine(&k, 0.5, 0.0)).unwrap();
    for j in 1..m {
        let mut k = vec![0; m];
        k[j] = 1;
        p = p.add(&TorusPoly::cosine(&k, 0.2)).unwrap();
    }
    exact_cell_average(&p, &TorusGrid::uniform(m, n).unwrap()).unwrap()
}

/// Deterministic dense integer matrix with entries in `[-bound, bound]`.
pub fn integer_matrix(rows: usize, cols: usize, bound: i64, seed: u64) -> Vec<Vec<BigInt>> {
    let mut state = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    BigInt::from((state >> 33) as i64 % (2 * bound + 1) - bound)
                })
                .collect()
        })
        .collect()
}
