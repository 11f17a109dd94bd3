//! Reference instruments used by the tests, the acceptance suite and the CLI.

use crate::instrument::{BiasMatrix, Instrument, OutcomeMap};
use crate::linalg::{diag, re, CMatrix};

/// Real rotation by `theta`.
pub fn rotation(theta: f64) -> CMatrix {
    let (s, c) = theta.sin_cos();
    crate::linalg::from_real_rows(&[&[c, -s], &[s, c]])
}

/// `V_1 = R(theta) diag(sqrt 0.7, sqrt 0.3)`, `V_2 = R(theta) diag(sqrt 0.3, sqrt 0.7)`.
pub fn biased_qubit_ops(theta: f64) -> Vec<CMatrix> {
    let r = rotation(theta);
    vec![
        &r * diag(&[0.7_f64.sqrt(), 0.3_f64.sqrt()]),
        &r * diag(&[0.3_f64.sqrt(), 0.7_f64.sqrt()]),
    ]
}

/// Two-outcome qubit unraveling read through a detector that flips the
/// outcome with probability 0.1.
pub fn biased_qubit(theta: f64) -> Instrument {
    let eta = BiasMatrix::symmetric_flip(0.1).expect("valid flip");
    Instrument::build_imperfect(&biased_qubit_ops(theta), &eta).expect("valid fixture")
}

/// The rotated biased qubit with `theta = 0.7`.
pub fn rotated_biased_qubit() -> Instrument {
    biased_qubit(0.7)
}

/// Perfect measurement in the computational basis.
pub fn projective_qubit() -> Instrument {
    Instrument::perfect(&[diag(&[1.0, 0.0]), diag(&[0.0, 1.0])]).expect("valid fixture")
}

/// `m` outcomes, each equal to `Id / m`: the identity channel seen through a
/// completely uninformative detector.
pub fn uniform_identity(d: usize, m: usize) -> Instrument {
    let v = vec![crate::linalg::identity(d) * re(1.0 / (m as f64).sqrt()); m];
    Instrument::build_imperfect(&v, &BiasMatrix::uniform(m, m)).expect("valid fixture")
}

/// Cyclic shift matrix `P |j> = |j + 1 mod d>`.
pub fn shift(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| if i == (j + 1) % d { re(1.0) } else { re(0.0) })
}

/// Single-outcome instrument with Kraus operators `|j+1><j|`: dephase, then
/// shift. Irreducible with period `d`.
pub fn cycle(d: usize) -> Instrument {
    let ops = (0..d)
        .map(|j| {
            let mut a = CMatrix::zeros(d, d);
            a[((j + 1) % d, j)] = re(1.0);
            a
        })
        .collect();
    Instrument::new(d, vec![OutcomeMap::new("1", ops).expect("shapes")]).expect("valid fixture")
}

/// Unitary conjugation by the cyclic shift; reducible, with a `d`-dimensional
/// fixed space.
pub fn shift_unitary(d: usize) -> Instrument {
    Instrument::new(d, vec![OutcomeMap::new("1", vec![shift(d)]).expect("shapes")]).expect("valid fixture")
}

/// Perfectly monitored amplitude damping towards `|0>`.
pub fn amplitude_damping(gamma: f64) -> Instrument {
    let k0 = diag(&[1.0, (1.0 - gamma).sqrt()]);
    let mut k1 = CMatrix::zeros(2, 2);
    k1[(0, 1)] = re(gamma.sqrt());
    Instrument::perfect(&[k0, k1]).expect("valid fixture")
}

/// Single-outcome fully depolarizing channel `rho -> tr(rho) Id / d`.
pub fn depolarizing(d: usize) -> Instrument {
    let s = re(1.0 / (d as f64).sqrt());
    let mut ops = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut a = CMatrix::zeros(d, d);
            a[(i, j)] = s;
            ops.push(a);
        }
    }
    Instrument::new(d, vec![OutcomeMap::new("1", ops).expect("shapes")]).expect("valid fixture")
}

/// Single-outcome identity channel.
pub fn identity_channel(d: usize) -> Instrument {
    Instrument::new(d, vec![OutcomeMap::identity("1", d)]).expect("valid fixture")
}
