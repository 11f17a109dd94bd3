//! Spectral certification of the averaged channel: invariant state,
//! irreducibility, period and primitivity, plus Cesaro-averaged iterates.

use std::f64::consts::TAU;

use nalgebra::{Schur, SVD};

use crate::error::{Error, Result};
use crate::instrument::{OutcomeMap, SuperOpMatrix};
use crate::linalg::{c, identity, re, trace, unvec, vec_of, CMatrix, CVector, DensityMatrix, C64};
use crate::random::{random_unit_vector, seeded};
use crate::tol::tolerances;

/// Seed of the rank-one probes used by [`is_primitive_map`].
const PROBE_SEED: u64 = 0x70_72_69_6d;

/// Eigenvalues of a superoperator (complex Schur form).
pub fn spectrum(rep: &SuperOpMatrix) -> Vec<C64> {
    let m = rep.matrix().clone();
    let n = m.nrows();
    match Schur::try_new(m, 1e-15, 10_000) {
        Some(s) => {
            let (_, t) = s.unpack();
            (0..n).map(|k| t[(k, k)]).collect()
        }
        None => rep.matrix().clone().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default(),
    }
}

pub fn spectral_radius(rep: &SuperOpMatrix) -> f64 {
    spectrum(rep).iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

struct Kernel {
    right: Vec<CVector>,
    left: Vec<CVector>,
    smallest: f64,
}

fn fixed_kernel(rep: &SuperOpMatrix, tol: f64) -> Kernel {
    let n = rep.matrix().nrows();
    let a = rep.matrix() - identity(n);
    let svd = SVD::new(a, true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^dagger");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let smallest = svd.singular_values[order[0]];
    let mut right = Vec::new();
    let mut left = Vec::new();
    for &k in &order {
        if svd.singular_values[k] >= tol {
            break;
        }
        right.push(v_t.row(k).adjoint());
        left.push(u.column(k).into_owned());
    }
    Kernel { right, left, smallest }
}

/// Numerical dimension of `ker(rep - I)`.
pub fn fixed_space_dim(channel: &OutcomeMap) -> usize {
    fixed_kernel(&channel.rep(), tolerances().fix).right.len()
}

/// A fixed state of a trace-preserving channel.
///
/// The state is the image of `Id/d` under the spectral projection onto the
/// eigenvalue-one eigenspace, `K (L^dagger K)^-1 L^dagger`, where `K` and `L`
/// span the right and left kernels of `rep - I`. That projection is the limit
/// of Cesaro means of the channel, so the image is a state even when the
/// fixed space has dimension above one.
pub fn invariant_state(channel: &OutcomeMap) -> Result<DensityMatrix> {
    let d = channel.dim();
    let rep = channel.rep();
    let mut kernel = fixed_kernel(&rep, tolerances().fix);
    if kernel.right.is_empty() {
        if kernel.smallest > 1e-6 {
            return Err(Error::NoFixedPoint { residual: kernel.smallest });
        }
        kernel = fixed_kernel(&rep, kernel.smallest * 2.0 + f64::MIN_POSITIVE);
    }
    let k = CMatrix::from_columns(&kernel.right);
    let l = CMatrix::from_columns(&kernel.left);
    let gram = l.adjoint() * &k;
    let gram_inv = gram
        .clone()
        .try_inverse()
        .or_else(|| gram.pseudo_inverse(1e-12).ok())
        .ok_or(Error::NoFixedPoint { residual: kernel.smallest })?;
    let start = vec_of(&(identity(d) / re(d as f64)));
    let x = &k * (gram_inv * (l.adjoint() * start));
    let m = unvec(&x, d);
    if trace(&m).re <= 0.0 {
        return Err(Error::NoFixedPoint { residual: kernel.smallest });
    }
    DensityMatrix::normalize(&m)
}

/// Findings of [`certify`].
#[derive(Debug, Clone)]
pub struct ChannelCertificate {
    pub invariant_state: DensityMatrix,
    pub fixed_space_dim: usize,
    pub min_eig_inv: f64,
    pub irreducible: bool,
    /// Present only for irreducible channels whose peripheral spectrum is a
    /// full set of roots of unity.
    pub period: Option<usize>,
    pub peripheral_eigenvalues: Vec<C64>,
    pub primitive: bool,
    pub spectral_radius: f64,
    pub notes: Vec<String>,
}

/// Check that `values` are, up to `tol`, exactly the `l`-th roots of unity.
fn are_roots_of_unity(values: &[C64], tol: f64) -> bool {
    let l = values.len();
    if l == 0 {
        return false;
    }
    let mut used = vec![false; l];
    for k in 0..l {
        let target = C64::from_polar(1.0, TAU * k as f64 / l as f64);
        let hit = (0..l).filter(|&j| !used[j]).min_by(|&a, &b| {
            (values[a] - target).norm().total_cmp(&(values[b] - target).norm())
        });
        match hit {
            Some(j) if (values[j] - target).norm() <= tol => used[j] = true,
            _ => return false,
        }
    }
    true
}

/// Irreducibility, period and primitivity of a trace-preserving channel.
pub fn certify(channel: &OutcomeMap) -> Result<ChannelCertificate> {
    let tol = tolerances();
    let rep = channel.rep();
    let invariant = invariant_state(channel)?;
    let fixed_dim = fixed_kernel(&rep, tol.fix).right.len();
    let min_eig = invariant.min_eigenvalue();
    let irreducible = fixed_dim == 1 && min_eig > tol.rank;
    let eigs = spectrum(&rep);
    let radius = eigs.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    let mut peripheral: Vec<C64> = eigs.into_iter().filter(|z| z.norm() >= 1.0 - tol.peri).collect();
    peripheral.sort_by(|a, b| a.arg().rem_euclid(TAU).total_cmp(&b.arg().rem_euclid(TAU)));
    let mut notes = Vec::new();
    if fixed_dim != 1 {
        notes.push(format!("fixed space has dimension {fixed_dim}"));
    }
    if min_eig <= tol.rank {
        notes.push(format!("invariant state is rank deficient (min eigenvalue {min_eig:e})"));
    }
    let period = if irreducible {
        if are_roots_of_unity(&peripheral, tol.peri) {
            Some(peripheral.len())
        } else {
            notes.push(format!(
                "peripheral spectrum of {} eigenvalues is not a set of roots of unity; period unknown",
                peripheral.len()
            ));
            None
        }
    } else {
        None
    };
    let primitive = irreducible && period == Some(1);
    Ok(ChannelCertificate {
        invariant_state: invariant,
        fixed_space_dim: fixed_dim,
        min_eig_inv: min_eig,
        irreducible,
        period,
        peripheral_eigenvalues: peripheral,
        primitive,
        spectral_radius: radius,
        notes,
    })
}

/// Default power bound for primitivity checks, `4 d^2`.
pub fn default_primitivity_bound(d: usize) -> usize {
    4 * d * d
}

/// Probe states: basis projectors plus `d(d-1)/2` fixed random rank-one states.
fn primitivity_probes(d: usize) -> Vec<CMatrix> {
    let mut rng = seeded(PROBE_SEED);
    let mut probes: Vec<CMatrix> = (0..d).map(|j| DensityMatrix::basis(d, j).into_matrix()).collect();
    for _ in 0..d * (d - 1) / 2 {
        let x = random_unit_vector(d, &mut rng);
        probes.push(&x * x.adjoint());
    }
    probes
}

/// Smallest `n <= n_max` at which every probe is mapped to a positive
/// definite matrix by `map^n`, or `None`.
///
/// Positivity is judged relative to the trace, `lambda_min / tr > tol_rank`,
/// since word maps shrink the trace geometrically.
pub fn primitivity_index(map: &OutcomeMap, n_max: usize) -> Option<usize> {
    let d = map.dim();
    let tol = tolerances().rank;
    let rep = map.rep();
    let mut states = primitivity_probes(d);
    for n in 1..=n_max {
        let mut all_positive = true;
        for x in states.iter_mut() {
            let y = rep.apply(x);
            let tr = trace(&y).re;
            if !(tr > 0.0) {
                return None;
            }
            *x = y / re(tr);
            let min = crate::linalg::hermitian_eigenvalues(x)[0];
            all_positive &= min > tol;
        }
        if all_positive {
            return Some(n);
        }
    }
    None
}

/// One-sided primitivity test: `true` means certified within `n_max` powers.
pub fn is_primitive_map(map: &OutcomeMap, n_max: usize) -> bool {
    primitivity_index(map, n_max).is_some()
}

/// `(1/l) sum_{r<l} Phi^{l n + r}(rho)`.
pub fn cesaro_iterate(channel: &OutcomeMap, rho: &DensityMatrix, period: usize, n: usize) -> Result<CMatrix> {
    if period == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    if rho.dim() != channel.dim() {
        return Err(Error::DimensionMismatch { expected: channel.dim(), found: rho.dim() });
    }
    let t = channel.rep().into_matrix();
    let mut x = vec_of(rho.matrix());
    for _ in 0..period * n {
        x = &t * x;
    }
    let mut acc = CVector::zeros(x.len());
    for _ in 0..period {
        acc += &x;
        x = &t * x;
    }
    Ok(unvec(&(acc / c(period as f64, 0.0)), channel.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::instrument::Instrument;
    use crate::linalg::{hermitian_trace_norm, max_abs, trace_norm};
    use crate::random::{haar_unitary, random_density, random_instrument};

    fn residual(channel: &OutcomeMap, rho: &DensityMatrix) -> f64 {
        trace_norm(&(channel.apply(rho.matrix()).unwrap() - rho.matrix()))
    }

    #[test]
    fn unital_channel_fixes_maximally_mixed() {
        let mut rng = seeded(3);
        let u1 = haar_unitary(3, &mut rng);
        let u2 = haar_unitary(3, &mut rng);
        let ch = OutcomeMap::new("c", vec![u1 * re(0.6_f64.sqrt()), u2 * re(0.4_f64.sqrt())]).unwrap();
        assert_eq!(fixed_space_dim(&ch), 1);
        let rho = invariant_state(&ch).unwrap();
        assert!(max_abs(&(rho.matrix() - identity(3) / re(3.0))) < 1e-9);
    }

    #[test]
    fn unitary_channel_has_full_diagonal_fixed_space() {
        let u = crate::linalg::diag(&[1.0, 0.0, 0.0]) * c(1.0, 0.0)
            + crate::linalg::diag(&[0.0, 1.0, 0.0]) * C64::from_polar(1.0, 0.4)
            + crate::linalg::diag(&[0.0, 0.0, 1.0]) * C64::from_polar(1.0, 1.3);
        let ch = OutcomeMap::new("u", vec![u]).unwrap();
        assert_eq!(fixed_space_dim(&ch), 3);
        let rho = invariant_state(&ch).unwrap();
        assert!(residual(&ch, &rho) < 1e-9);
    }

    #[test]
    fn rotated_biased_qubit_fixed_point_matches_power_iteration() {
        let ch = fixtures::rotated_biased_qubit().total_channel();
        let rho = invariant_state(&ch).unwrap();
        assert!(residual(&ch, &rho) <= 1e-9);
        let t = ch.rep();
        let mut x = DensityMatrix::basis(2, 0).into_matrix();
        for _ in 0..5000 {
            x = t.apply(&x);
        }
        assert!(trace_norm(&(x - rho.matrix())) < 1e-9);
    }

    #[test]
    fn rotated_biased_qubit_is_primitive() {
        let cert = certify(&fixtures::rotated_biased_qubit().total_channel()).unwrap();
        assert!(cert.irreducible);
        assert_eq!(cert.period, Some(1));
        assert!(cert.primitive);
    }

    #[test]
    fn cycle_has_period_d() {
        for d in 2..5 {
            let ch = fixtures::cycle(d).total_channel();
            let cert = certify(&ch).unwrap();
            assert!(cert.irreducible, "{:?}", cert.notes);
            assert_eq!(cert.period, Some(d));
            assert!(!cert.primitive);
            // oracle: the peripheral eigenvalues are the d-th roots of unity
            for (k, z) in cert.peripheral_eigenvalues.iter().enumerate() {
                assert!((z - C64::from_polar(1.0, TAU * k as f64 / d as f64)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn cycle_with_mixing_outcome_has_period_dividing_d() {
        // a second outcome that also maps H_j to H_{j+1}
        let d = 4;
        let base = fixtures::cycle(d);
        let ops: Vec<CMatrix> = base.outcome(0).unwrap().kraus().unwrap().to_vec();
        let half: Vec<CMatrix> = ops.iter().map(|a| a * re(0.5_f64.sqrt())).collect();
        let skip: Vec<CMatrix> = (0..d).map(|j| &ops[(j + 1) % d] * &ops[j] * re(0.5_f64.sqrt())).collect();
        let instr = Instrument::new(
            d,
            vec![OutcomeMap::new("1", half).unwrap(), OutcomeMap::new("2", skip).unwrap()],
        )
        .unwrap();
        let cert = certify(&instr.total_channel()).unwrap();
        assert!(cert.irreducible);
        let l = cert.period.unwrap();
        assert_eq!(d % l, 0);
        assert_eq!(l, 1);
    }

    #[test]
    fn shift_unitary_is_reducible() {
        let cert = certify(&fixtures::shift_unitary(3).total_channel()).unwrap();
        assert_eq!(cert.fixed_space_dim, 3);
        assert!(!cert.irreducible);
        assert_eq!(cert.period, None);
    }

    #[test]
    fn amplitude_damping_is_reducible() {
        let ch = fixtures::amplitude_damping(0.3).total_channel();
        let cert = certify(&ch).unwrap();
        assert!(!cert.irreducible);
        assert!(max_abs(&(cert.invariant_state.matrix() - DensityMatrix::basis(2, 0).matrix())) < 1e-9);
    }

    #[test]
    fn primitivity_checks() {
        assert!(!is_primitive_map(&OutcomeMap::identity("id", 2), 100));
        let dep = fixtures::depolarizing(3).total_channel();
        assert_eq!(primitivity_index(&dep, 1), Some(1));
        let instr = fixtures::rotated_biased_qubit();
        let word = instr.compose_word(&[0, 1]).unwrap();
        let n = primitivity_index(&word, 16).unwrap();
        // explicit powers: the n-th power maps every basis projector to a positive definite matrix
        let mut x0 = DensityMatrix::basis(2, 0).into_matrix();
        let mut x1 = DensityMatrix::basis(2, 1).into_matrix();
        for _ in 0..n {
            x0 = word.apply(&x0).unwrap();
            x1 = word.apply(&x1).unwrap();
        }
        assert!(crate::linalg::hermitian_eigenvalues(&x0)[0] > 0.0);
        assert!(crate::linalg::hermitian_eigenvalues(&x1)[0] > 0.0);
        assert!(!is_primitive_map(&fixtures::cycle(3).total_channel(), 36));
    }

    #[test]
    fn cesaro_iterates() {
        let mut rng = seeded(17);
        let ch = fixtures::rotated_biased_qubit().total_channel();
        let rho = random_density(2, &mut rng);
        let zero = cesaro_iterate(&ch, &rho, 1, 0).unwrap();
        assert!(max_abs(&(zero - rho.matrix())) < 1e-15);
        let inv = invariant_state(&ch).unwrap();
        // subdominant modulus is about 0.957, so 500 steps leave ~1e-10
        let far = cesaro_iterate(&ch, &rho, 1, 500).unwrap();
        assert!(trace_norm(&(far - inv.matrix())) <= 1e-8);
        // orbit average of |0><0| under the 3-cycle is Id/3
        let cyc = fixtures::cycle(3).total_channel();
        let avg = cesaro_iterate(&cyc, &DensityMatrix::basis(3, 0), 3, 5).unwrap();
        assert!(max_abs(&(avg - identity(3) / re(3.0))) <= 1e-12);
        assert!(cesaro_iterate(&cyc, &DensityMatrix::basis(3, 0), 0, 5).is_err());
    }

    #[test]
    fn random_channels_spectral_properties() {
        let mut rng = seeded(2024);
        for k in 0..100 {
            let d = 2 + k % 2;
            let ch = random_instrument(d, 2, 2, &mut rng).total_channel();
            let rep = ch.rep();
            let eigs = spectrum(&rep);
            assert!(eigs.iter().any(|z| (z - c(1.0, 0.0)).norm() <= 1e-9));
            assert!(spectral_radius(&rep) <= 1.0 + 1e-9);
            let rho = invariant_state(&ch).unwrap();
            assert!(residual(&ch, &rho) <= 1e-9);
        }
    }

    #[test]
    fn certificate_is_relabeling_and_basis_invariant() {
        let mut rng = seeded(55);
        for _ in 0..10 {
            let instr = random_instrument(3, 3, 1, &mut rng);
            let base = certify(&instr.total_channel()).unwrap();
            let perm = instr.permuted(&[2, 0, 1]).unwrap();
            let c2 = certify(&perm.total_channel()).unwrap();
            assert_eq!((base.irreducible, base.period, base.primitive), (c2.irreducible, c2.period, c2.primitive));
            let u = haar_unitary(3, &mut rng);
            let rotated = instr.conjugated(&u).unwrap();
            let c3 = certify(&rotated.total_channel()).unwrap();
            assert_eq!((base.irreducible, base.period, base.primitive), (c3.irreducible, c3.period, c3.primitive));
            let expected = &u * base.invariant_state.matrix() * u.adjoint();
            assert!(max_abs(&(c3.invariant_state.matrix() - expected)) <= 1e-8);
        }
    }

    #[test]
    fn cesaro_monotone_on_irreducible_channels() {
        let mut rng = seeded(77);
        let mut checked = 0;
        while checked < 10 {
            let ch = random_instrument(2, 2, 1, &mut rng).total_channel();
            let cert = certify(&ch).unwrap();
            if !cert.irreducible {
                continue;
            }
            let l = cert.period.unwrap();
            let rho = random_density(2, &mut rng);
            let dist = |n| hermitian_trace_norm(&(cesaro_iterate(&ch, &rho, l, n).unwrap() - cert.invariant_state.matrix()));
            let (a, b, c_) = (dist(50), dist(100), dist(200));
            assert!(b <= a + 1e-10 && c_ <= b + 1e-10);
            assert!(dist(400) <= 1e-6);
            checked += 1;
        }
    }
}
