//! Random states, unitaries and instruments.
//!
//! All sampling uses [`SimRng`] (ChaCha20), so results are reproducible from a
//! `u64` seed on every platform.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rand::SeedableRng;

use crate::instrument::{Instrument, OutcomeMap};
use crate::linalg::{c, psd_sqrt, re, CMatrix, CVector, DensityMatrix};

/// Generator used for every simulation in the crate.
pub type SimRng = ChaCha20Rng;

/// Name recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64)";

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| c(gauss(rng), gauss(rng)) * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| c(gauss(rng), gauss(rng)));
    let n = v.norm();
    v / re(n)
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(d, d, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 { z / re(z.norm()) } else { re(1.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Orthonormal basis (as columns) of a Haar-random `k`-dimensional subspace.
pub fn haar_subspace<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(d, k, rng);
    let mut basis = CMatrix::zeros(d, k);
    for j in 0..k {
        let mut v = g.column(j).into_owned();
        for i in 0..j {
            let b = basis.column(i).into_owned();
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let n = v.norm();
        basis.set_column(j, &(v / re(n)));
    }
    basis
}

/// Full-rank random state `G G^dagger / tr` from a square Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(d, d, rng);
    DensityMatrix::normalize(&(&g * g.adjoint())).expect("Ginibre product is PSD")
}

pub fn random_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::pure(&random_unit_vector(d, rng)).expect("unit vector")
}

/// `count` Kraus operators with `sum A^dagger A = Id`.
pub fn random_kraus<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> Vec<CMatrix> {
    let gs: Vec<CMatrix> = (0..count).map(|_| ginibre(d, d, rng)).collect();
    let s = gs.iter().fold(CMatrix::zeros(d, d), |acc, g| acc + g.adjoint() * g);
    let root = psd_sqrt(&s).expect("Gram matrix is PSD");
    let inv = root.try_inverse().expect("Gram matrix is invertible almost surely");
    gs.into_iter().map(|g| g * &inv).collect()
}

/// Random instrument with `m` outcomes, each carrying `kraus_per_outcome`
/// operators, normalized jointly to be trace preserving.
pub fn random_instrument<R: Rng + ?Sized>(d: usize, m: usize, kraus_per_outcome: usize, rng: &mut R) -> Instrument {
    let ops = random_kraus(d, m * kraus_per_outcome, rng);
    let outcomes = ops
        .chunks(kraus_per_outcome)
        .enumerate()
        .map(|(i, ks)| OutcomeMap::new((i + 1).to_string(), ks.to_vec()).expect("shapes agree"))
        .collect();
    Instrument::new(d, outcomes).expect("jointly normalized")
}
