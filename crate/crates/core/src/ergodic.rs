//! Empirical invariant measures of the trajectory kernel, exact pushforwards,
//! Wasserstein-1 distances with trace-norm ground cost, and ergodic means.

pub mod ot;

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instrument::Instrument;
use crate::linalg::{hermitian_eigenvalues, hermitian_trace_norm, max_abs, op_norm, re, trace, CMatrix, DensityMatrix};
use crate::random::seeded;
use crate::trajectory::{step, walk_trajectory};

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_THINNING: usize = 10;
pub const PRUNE_THRESHOLD: f64 = 1e-12;
pub const ATOM_CAP: usize = 100_000;
pub const LP_CAP: usize = 2000;
pub const SUBSAMPLE_REPS: usize = 3;

const WEIGHT_TOL: f64 = 1e-9;

/// Finitely supported probability measure on states.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<(DensityMatrix, f64)>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<(DensityMatrix, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let d = atoms[0].0.dim();
        if let Some((rho, _)) = atoms.iter().find(|a| a.0.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: rho.dim() });
        }
        if let Some(&(_, w)) = atoms.iter().find(|a| !(a.1 >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("negative weight {w}")));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Ok(Self { atoms })
    }

    /// Equal weights on the given states.
    pub fn uniform(states: Vec<DensityMatrix>) -> Result<Self> {
        let w = 1.0 / states.len() as f64;
        Self::new(states.into_iter().map(|s| (s, w)).collect())
    }

    pub fn point(rho: DensityMatrix) -> Self {
        Self { atoms: vec![(rho, 1.0)] }
    }

    /// `alpha mu + (1 - alpha) nu`, atoms concatenated.
    pub fn mixture(alpha: f64, mu: &Self, nu: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("mixture weight {alpha}")));
        }
        let atoms = mu
            .atoms
            .iter()
            .map(|(s, w)| (s.clone(), alpha * w))
            .chain(nu.atoms.iter().map(|(s, w)| (s.clone(), (1.0 - alpha) * w)))
            .collect();
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(DensityMatrix, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].0.dim()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Barycenter `E[rho]`.
    pub fn mean(&self) -> CMatrix {
        let d = self.dim();
        self.atoms.iter().fold(CMatrix::zeros(d, d), |acc, (s, w)| acc + s.matrix() * re(*w))
    }

    pub fn expectation(&self, g: &StateFunctional) -> f64 {
        self.atoms.iter().map(|(s, w)| w * g.eval(s)).sum()
    }

    /// Drop atoms lighter than `threshold` and rescale the rest.
    pub fn pruned(&self, threshold: f64) -> Self {
        let kept: Vec<_> = self.atoms.iter().filter(|a| a.1 >= threshold).cloned().collect();
        let total: f64 = kept.iter().map(|a| a.1).sum();
        Self { atoms: kept.into_iter().map(|(s, w)| (s, w / total)).collect() }
    }

    /// Merge atoms whose entries agree to about twelve digits.
    pub fn merged(&self) -> Self {
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut atoms: Vec<(DensityMatrix, f64)> = Vec::new();
        for (s, w) in &self.atoms {
            let key: Vec<i64> = s.matrix().iter().flat_map(|z| [(z.re * 1e12).round() as i64, (z.im * 1e12).round() as i64]).collect();
            match index.get(&key) {
                Some(&k) => atoms[k].1 += w,
                None => {
                    index.insert(key, atoms.len());
                    atoms.push((s.clone(), *w));
                }
            }
        }
        Self { atoms }
    }
}

/// Record every `thinning`-th state of one trajectory after `burn_in` steps.
///
/// The chain is assumed irreducible; callers should certify the channel
/// first, since otherwise the limit depends on `rho0`.
pub fn sample_invariant(instr: &Instrument, rho0: &DensityMatrix, burn_in: usize, n_samples: usize, thinning: usize, seed: u64) -> Result<EmpiricalMeasure> {
    if n_samples == 0 || thinning == 0 {
        return Err(Error::InvalidArgument("n_samples and thinning must be positive".into()));
    }
    let mut rng = seeded(seed);
    let mut rho = walk_trajectory(instr, rho0, burn_in, &mut rng, |_, _| {})?;
    let mut states = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        for _ in 0..thinning {
            rho = step(instr, &rho, &mut rng)?.1;
        }
        states.push(rho.clone());
    }
    EmpiricalMeasure::uniform(states)
}

/// Exact pushforward `mu Pi`, pruning atoms lighter than `PRUNE_THRESHOLD`.
pub fn kernel_push(instr: &Instrument, mu: &EmpiricalMeasure) -> Result<EmpiricalMeasure> {
    kernel_push_with(instr, mu, PRUNE_THRESHOLD)
}

/// Exact pushforward; `prune = 0` keeps every branch of positive probability.
pub fn kernel_push_with(instr: &Instrument, mu: &EmpiricalMeasure, prune: f64) -> Result<EmpiricalMeasure> {
    let mut atoms = Vec::with_capacity(mu.len() * instr.num_outcomes());
    for (rho, w) in mu.atoms() {
        for o in instr.outcomes() {
            let post = o.apply(rho.matrix())?;
            let p = trace(&post).re;
            if p > 0.0 && w * p > 0.0 {
                atoms.push((DensityMatrix::normalize(&post)?, w * p));
            }
        }
    }
    let pushed = EmpiricalMeasure { atoms };
    Ok(if prune > 0.0 { pushed.pruned(prune) } else { pushed })
}

/// `(1/l) sum_{r<l} mu Pi^{l n + r}`, merging coincident atoms.
pub fn cesaro_push(instr: &Instrument, mu: &EmpiricalMeasure, period: usize, n: usize) -> Result<EmpiricalMeasure> {
    cesaro_push_with(instr, mu, period, n, ATOM_CAP)
}

pub fn cesaro_push_with(instr: &Instrument, mu: &EmpiricalMeasure, period: usize, n: usize, cap: usize) -> Result<EmpiricalMeasure> {
    if period == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    let check = |m: &EmpiricalMeasure| {
        if m.len() > cap {
            Err(Error::AtomBudgetExceeded { atoms: m.len(), cap })
        } else {
            Ok(())
        }
    };
    let mut current = mu.clone();
    for _ in 0..period * n {
        current = kernel_push(instr, &current)?.merged();
        check(&current)?;
    }
    let weight = 1.0 / period as f64;
    let mut atoms: Vec<(DensityMatrix, f64)> = current.atoms.iter().map(|(s, w)| (s.clone(), w * weight)).collect();
    for _ in 1..period {
        current = kernel_push(instr, &current)?.merged();
        check(&current)?;
        atoms.extend(current.atoms.iter().map(|(s, w)| (s.clone(), w * weight)));
    }
    let out = EmpiricalMeasure { atoms }.merged();
    check(&out)?;
    Ok(out)
}

/// Trace-norm ground costs, row-major.
pub fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Vec<f64> {
    let m = nu.len();
    let mut cost = vec![0.0; mu.len() * m];
    cost.par_chunks_mut(m.max(1)).zip(mu.atoms.par_iter()).for_each(|(row, (a, _))| {
        for (c, (b, _)) in row.iter_mut().zip(&nu.atoms) {
            *c = hermitian_trace_norm(&(a.matrix() - b.matrix()));
        }
    });
    cost
}

/// Exact `W_1` with ground cost `||rho - sigma||_1`.
pub fn wasserstein1(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    wasserstein1_with_cap(mu, nu, LP_CAP)
}

pub fn wasserstein1_with_cap(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, cap: usize) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    for m in [mu, nu] {
        if m.len() > cap {
            return Err(Error::TooManyAtoms { atoms: m.len(), cap });
        }
    }
    let cost = cost_matrix(mu, nu);
    let a: Vec<f64> = mu.atoms.iter().map(|x| x.1).collect();
    let b: Vec<f64> = nu.atoms.iter().map(|x| x.1).collect();
    Ok(ot::solve(&a, &b, &cost).cost.max(0.0))
}

/// `W_1` estimate for measures above the LP cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsampledDistance {
    pub mean: f64,
    /// `max - min` over repetitions.
    pub spread: f64,
    pub repetitions: usize,
    pub exact: bool,
}

fn subsample(mu: &EmpiricalMeasure, cap: usize, rng: &mut crate::random::SimRng) -> Result<EmpiricalMeasure> {
    if mu.len() <= cap {
        return Ok(mu.clone());
    }
    let dist = WeightedIndex::new(mu.atoms.iter().map(|a| a.1)).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
    let states = (0..cap).map(|_| mu.atoms[dist.sample(rng)].0.clone()).collect();
    Ok(EmpiricalMeasure::uniform(states)?.merged())
}

/// Exact `W_1` when both measures fit under `cap`; otherwise the mean and
/// spread over `reps` resamplings to `cap` atoms each.
pub fn wasserstein1_subsampled(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, cap: usize, reps: usize, seed: u64) -> Result<SubsampledDistance> {
    if mu.len() <= cap && nu.len() <= cap {
        let w = wasserstein1_with_cap(mu, nu, cap)?;
        return Ok(SubsampledDistance { mean: w, spread: 0.0, repetitions: 1, exact: true });
    }
    let values = (0..reps.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded(seed.wrapping_add(r as u64));
            let a = subsample(mu, cap, &mut rng)?;
            let b = subsample(nu, cap, &mut rng)?;
            wasserstein1_with_cap(&a, &b, cap)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SubsampledDistance { mean: crate::stats::mean(&values), spread: max - min, repetitions: values.len(), exact: false })
}

/// Bounded continuous functions on states.
#[derive(Debug, Clone, PartialEq)]
pub enum StateFunctional {
    Constant(f64),
    /// `Re tr(A rho)` with `||A||_inf <= 1`, so 1-Lipschitz in trace norm.
    Linear(CMatrix),
    Purity,
    VonNeumannEntropy,
    MaxEigenvalue,
    /// `Re sum_k c_k prod_{(i,j)} rho_ij`.
    Polynomial(Vec<(f64, Vec<(usize, usize)>)>),
}

impl StateFunctional {
    pub fn linear(a: CMatrix) -> Result<Self> {
        let norm = op_norm(&a);
        if norm > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!("observable norm {norm} exceeds 1")));
        }
        if max_abs(&(&a - a.adjoint())) > crate::tol::tolerances().herm {
            return Err(Error::NotHermitian { residual: max_abs(&(&a - a.adjoint())) });
        }
        Ok(Self::Linear(a))
    }

    pub fn eval(&self, rho: &DensityMatrix) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Linear(a) => rho.expectation(a).re,
            Self::Purity => rho.purity(),
            Self::VonNeumannEntropy => hermitian_eigenvalues(rho.matrix()).iter().filter(|&&x| x > 0.0).map(|x| -x * x.ln()).sum(),
            Self::MaxEigenvalue => hermitian_eigenvalues(rho.matrix()).last().copied().unwrap_or(0.0),
            Self::Polynomial(terms) => terms
                .iter()
                .map(|(c, factors)| {
                    let prod = factors.iter().fold(re(1.0), |acc, &(i, j)| acc * rho.matrix()[(i, j)]);
                    c * prod.re
                })
                .sum(),
        }
    }
}

/// `(g(rho_1) + ... + g(rho_n)) / n` along one trajectory.
pub fn ergodic_mean(instr: &Instrument, rho0: &DensityMatrix, g: &StateFunctional, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut rng = seeded(seed);
    let mut sum = 0.0;
    walk_trajectory(instr, rho0, n, &mut rng, |_, rho| sum += g.eval(rho))?;
    Ok(sum / n as f64)
}

/// Running means `(k, mean_k)` recorded every `every` steps and at `n`.
pub fn ergodic_mean_trace(instr: &Instrument, rho0: &DensityMatrix, g: &StateFunctional, n: usize, seed: u64, every: usize) -> Result<Vec<(usize, f64)>> {
    let every = every.max(1);
    let mut rng = seeded(seed);
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(n / every + 1);
    walk_trajectory(instr, rho0, n, &mut rng, |k, rho| {
        sum += g.eval(rho);
        if k % every == 0 || k == n {
            out.push((k, sum / k as f64));
        }
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{cesaro_iterate, invariant_state};
    use crate::fixtures;
    use crate::instrument::OutcomeMap;
    use crate::linalg::{diag, trace_norm};
    use crate::random::random_density;
    use crate::trajectory::cylinder_probability;
    use proptest::prelude::*;
    use rand::Rng;

    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force(a: &[DensityMatrix], b: &[DensityMatrix]) -> f64 {
        let k = a.len();
        permutations(k)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| trace_norm(&(a[i].matrix() - b[j].matrix()))).sum::<f64>() / k as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Classical chain `P[j][i]` embedded as an instrument with outcomes `j`.
    fn classical_chain(p: &[[f64; 2]; 2]) -> Instrument {
        let outcomes = (0..2)
            .map(|j| {
                let kraus = (0..2)
                    .map(|i| {
                        let mut k = CMatrix::zeros(2, 2);
                        k[(j, i)] = re(p[j][i].sqrt());
                        k
                    })
                    .collect();
                OutcomeMap::new(format!("{}", j + 1), kraus).unwrap()
            })
            .collect();
        Instrument::new(2, outcomes).unwrap()
    }

    #[test]
    fn measure_validation() {
        let s = DensityMatrix::maximally_mixed(2);
        assert!(EmpiricalMeasure::new(vec![(s.clone(), 0.5)]).is_err());
        assert!(EmpiricalMeasure::new(vec![(s.clone(), 1.5), (s.clone(), -0.5)]).is_err());
        assert!(EmpiricalMeasure::new(vec![]).is_err());
        assert!(EmpiricalMeasure::new(vec![(s.clone(), 0.5), (DensityMatrix::maximally_mixed(3), 0.5)]).is_err());
        let mu = EmpiricalMeasure::uniform(vec![s.clone(), DensityMatrix::basis(2, 0)]).unwrap();
        assert_eq!(mu.merged().len(), 2);
        let twice = EmpiricalMeasure::uniform(vec![s.clone(), s]).unwrap().merged();
        assert_eq!(twice.len(), 1);
        assert!((twice.atoms()[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_single_outcome_primitive_channel() {
        // deterministic iteration oracle
        let instr = fixtures::amplitude_damping(0.3);
        let channel = Instrument::new(2, vec![instr.total_channel().with_label("1")]).unwrap();
        let inv = invariant_state(&channel.total_channel()).unwrap();
        let mu = sample_invariant(&channel, &DensityMatrix::maximally_mixed(2), 500, 50, 1, 1).unwrap();
        assert!(trace_norm(&(mu.mean() - inv.matrix())) <= 1e-6);
    }

    #[test]
    fn sampling_classical_chain() {
        let p = [[0.9, 0.3], [0.1, 0.7]];
        let instr = classical_chain(&p);
        // stationary law of the column-stochastic matrix p: (0.75, 0.25)
        let mu = sample_invariant(&instr, &DensityMatrix::maximally_mixed(2), 100, 20_000, 1, 2).unwrap().merged();
        assert_eq!(mu.len(), 2);
        for (s, w) in mu.atoms() {
            let target = if s == &DensityMatrix::basis(2, 0) { 0.75 } else { 0.25 };
            assert!(max_abs(&(s.matrix() - DensityMatrix::basis(2, if target == 0.75 { 0 } else { 1 }).matrix())) < 1e-12);
            assert!((w - target).abs() < 0.02, "{w} vs {target}");
        }
    }

    #[test]
    fn sampled_mean_is_invariant_state() {
        let instr = fixtures::rotated_biased_qubit();
        let inv = invariant_state(&instr.total_channel()).unwrap();
        let mu = sample_invariant(&instr, &DensityMatrix::basis(2, 0), 1000, 5000, 10, 3).unwrap();
        assert!(trace_norm(&(mu.mean() - inv.matrix())) <= 0.02);
    }

    #[test]
    fn push_fixed_point_and_mass() {
        let instr = fixtures::depolarizing(2);
        let mixed = DensityMatrix::maximally_mixed(2);
        let pushed = kernel_push(&instr, &EmpiricalMeasure::point(mixed.clone())).unwrap().merged();
        assert_eq!(pushed.len(), 1);
        assert!(max_abs(&(pushed.atoms()[0].0.matrix() - mixed.matrix())) < 1e-15);
        let rot = fixtures::rotated_biased_qubit();
        let mut mu = EmpiricalMeasure::point(DensityMatrix::basis(2, 1));
        for _ in 0..5 {
            mu = kernel_push(&rot, &mu).unwrap();
            assert!((mu.total_weight() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn push_weights_are_cylinder_probabilities() {
        let instr = fixtures::rotated_biased_qubit();
        let rho = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let mut mu = EmpiricalMeasure::point(rho.clone());
        for _ in 0..4 {
            mu = kernel_push_with(&instr, &mu, 0.0).unwrap();
        }
        assert_eq!(mu.len(), 16);
        // atoms come out in lexicographic word order
        for (k, (_, w)) in mu.atoms().iter().enumerate() {
            let word: Vec<usize> = (0..4).map(|b| (k >> (3 - b)) & 1).collect();
            assert!((w - cylinder_probability(&instr, &word, &rho).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn push_commutes_with_mixture() {
        let instr = fixtures::rotated_biased_qubit();
        let mut rng = seeded(4);
        let mu = EmpiricalMeasure::uniform(vec![random_density(2, &mut rng), random_density(2, &mut rng)]).unwrap();
        let nu = EmpiricalMeasure::point(random_density(2, &mut rng));
        let lhs = kernel_push_with(&instr, &EmpiricalMeasure::mixture(0.3, &mu, &nu).unwrap(), 0.0).unwrap();
        let rhs = EmpiricalMeasure::mixture(0.3, &kernel_push_with(&instr, &mu, 0.0).unwrap(), &kernel_push_with(&instr, &nu, 0.0).unwrap()).unwrap();
        assert_eq!(lhs.len(), rhs.len());
        let mut l: Vec<_> = lhs.atoms().to_vec();
        let mut r: Vec<_> = rhs.atoms().to_vec();
        let key = |a: &(DensityMatrix, f64)| (a.0.matrix()[(0, 0)].re, a.1);
        l.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        r.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (a, b) in l.iter().zip(&r) {
            assert!((a.1 - b.1).abs() <= 1e-12);
            assert!(max_abs(&(a.0.matrix() - b.0.matrix())) <= 1e-12);
        }
    }

    #[test]
    fn cesaro_push_cases() {
        let instr = fixtures::rotated_biased_qubit();
        let mu = EmpiricalMeasure::uniform(vec![DensityMatrix::basis(2, 0), DensityMatrix::maximally_mixed(2)]).unwrap();
        assert_eq!(cesaro_push(&instr, &mu, 1, 0).unwrap(), mu);
        let ch = instr.total_channel();
        for (period, n) in [(1, 3), (2, 2), (3, 1)] {
            let pushed = cesaro_push(&instr, &mu, period, n).unwrap();
            let mean_rho = DensityMatrix::normalize(&mu.mean()).unwrap();
            let expected = cesaro_iterate(&ch, &mean_rho, period, n).unwrap();
            assert!(max_abs(&(pushed.mean() - expected)) <= 1e-9);
        }
        assert!(matches!(cesaro_push_with(&instr, &mu, 1, 8, 50), Err(Error::AtomBudgetExceeded { .. })));
    }

    #[test]
    fn exact_push_matches_sampling() {
        // a generic random instrument with a wide spectral gap mixes within a few steps
        let instr = crate::random::random_instrument(2, 2, 2, &mut seeded(32));
        let mut moduli: Vec<f64> = crate::channel::spectrum(&instr.total_channel().rep()).iter().map(|z| z.norm()).collect();
        moduli.sort_by(|a, b| b.total_cmp(a));
        assert!(moduli[1] < 0.5, "{moduli:?}");
        let exact = cesaro_push(&instr, &EmpiricalMeasure::point(DensityMatrix::basis(2, 0)), 1, 6).unwrap();
        assert!(exact.len() <= 128);
        let sampled = sample_invariant(&instr, &DensityMatrix::basis(2, 0), 1000, 1000, 10, 5).unwrap();
        assert!(wasserstein1(&exact, &sampled).unwrap() <= 0.1);
    }

    #[test]
    fn wasserstein_trivial_cases() {
        let mut rng = seeded(6);
        let a = random_density(2, &mut rng);
        let b = random_density(2, &mut rng);
        let mu = EmpiricalMeasure::uniform(vec![a.clone(), b.clone()]).unwrap();
        assert!(wasserstein1(&mu, &mu).unwrap().abs() < 1e-15);
        let w = wasserstein1(&EmpiricalMeasure::point(a.clone()), &EmpiricalMeasure::point(b.clone())).unwrap();
        assert!((w - trace_norm(&(a.matrix() - b.matrix()))).abs() < 1e-12);
        let big = EmpiricalMeasure::uniform(vec![a; 2001]).unwrap();
        assert!(matches!(wasserstein1(&big, &mu), Err(Error::TooManyAtoms { atoms: 2001, cap: 2000 })));
    }

    #[test]
    fn wasserstein_matches_brute_force_on_diagonal_states() {
        let mut rng = seeded(7);
        for _ in 0..50 {
            let a: Vec<_> = (0..3).map(|_| DensityMatrix::diagonal(&{ let p: f64 = rng.random(); [p, 1.0 - p] }).unwrap()).collect();
            let b: Vec<_> = (0..3).map(|_| DensityMatrix::diagonal(&{ let p: f64 = rng.random(); [p, 1.0 - p] }).unwrap()).collect();
            let w = wasserstein1(&EmpiricalMeasure::uniform(a.clone()).unwrap(), &EmpiricalMeasure::uniform(b.clone()).unwrap()).unwrap();
            assert!((w - brute_force(&a, &b)).abs() <= 1e-9);
        }
    }

    #[test]
    fn wasserstein_matches_brute_force_on_random_states() {
        let mut rng = seeded(8);
        for k in 1..=5 {
            for _ in 0..20 {
                let d = 2 + k % 2;
                let a: Vec<_> = (0..k).map(|_| random_density(d, &mut rng)).collect();
                let b: Vec<_> = (0..k).map(|_| random_density(d, &mut rng)).collect();
                let w = wasserstein1(&EmpiricalMeasure::uniform(a.clone()).unwrap(), &EmpiricalMeasure::uniform(b.clone()).unwrap()).unwrap();
                assert!((w - brute_force(&a, &b)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn subsampling_reports_spread() {
        let instr = fixtures::rotated_biased_qubit();
        let a = sample_invariant(&instr, &DensityMatrix::basis(2, 0), 100, 300, 2, 9).unwrap();
        let b = sample_invariant(&instr, &DensityMatrix::maximally_mixed(2), 100, 300, 2, 10).unwrap();
        let exact = wasserstein1_subsampled(&a, &b, 2000, 3, 0).unwrap();
        assert!(exact.exact && exact.spread == 0.0);
        let sub = wasserstein1_subsampled(&a, &b, 100, 3, 0).unwrap();
        assert!(!sub.exact && sub.repetitions == 3 && sub.spread >= 0.0);
        assert!(sub.mean >= 0.0 && sub.mean < 1.0);
    }

    #[test]
    fn functionals() {
        let rho = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
        assert_eq!(StateFunctional::Constant(1.0).eval(&rho), 1.0);
        assert!((StateFunctional::Purity.eval(&rho) - 0.625).abs() < 1e-15);
        assert!((StateFunctional::MaxEigenvalue.eval(&rho) - 0.75).abs() < 1e-15);
        let h = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert!((StateFunctional::VonNeumannEntropy.eval(&rho) - h).abs() < 1e-14);
        let z = StateFunctional::linear(diag(&[1.0, -1.0])).unwrap();
        assert!((z.eval(&rho) + 0.5).abs() < 1e-15);
        assert!(StateFunctional::linear(diag(&[2.0, 0.0])).is_err());
        let poly = StateFunctional::Polynomial(vec![(2.0, vec![(0, 0), (1, 1)]), (1.0, vec![])]);
        assert!((poly.eval(&rho) - (1.0 + 2.0 * 0.1875)).abs() < 1e-15);
    }

    #[test]
    fn ergodic_mean_cases() {
        let instr = fixtures::rotated_biased_qubit();
        let rho = DensityMatrix::basis(2, 0);
        assert_eq!(ergodic_mean(&instr, &rho, &StateFunctional::Constant(1.0), 1000, 1).unwrap(), 1.0);
        let single = Instrument::new(2, vec![instr.total_channel().with_label("1")]).unwrap();
        let inv = invariant_state(&single.total_channel()).unwrap();
        let a = diag(&[1.0, -1.0]);
        let g = StateFunctional::linear(a.clone()).unwrap();
        let target = inv.expectation(&a).re;
        let n = 2_000_000;
        let trace_out = ergodic_mean_trace(&single, &rho, &g, n, 2, 100_000).unwrap();
        assert!((trace_out.last().unwrap().1 - target).abs() <= 1e-6);
        assert_eq!(trace_out.last().unwrap().0, n);
        assert!((ergodic_mean(&single, &rho, &g, n, 2).unwrap() - trace_out.last().unwrap().1).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn wasserstein_is_a_metric(seed in any::<u64>(), k in 1usize..8) {
            let mut rng = seeded(seed);
            let draw = |rng: &mut crate::random::SimRng| {
                let atoms: Vec<_> = (0..k).map(|_| (random_density(2, rng), rng.random::<f64>() + 0.05)).collect();
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                EmpiricalMeasure::new(atoms.into_iter().map(|(s, w)| (s, w / total)).collect()).unwrap()
            };
            let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let ab = wasserstein1(&a, &b).unwrap();
            let ba = wasserstein1(&b, &a).unwrap();
            let bc = wasserstein1(&b, &c).unwrap();
            let ac = wasserstein1(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!(wasserstein1(&a, &a).unwrap() <= 1e-12);
        }

        #[test]
        fn wasserstein_dominates_linear_gaps(seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let a = EmpiricalMeasure::uniform((0..5).map(|_| random_density(2, &mut rng)).collect()).unwrap();
            let b = EmpiricalMeasure::uniform((0..4).map(|_| random_density(2, &mut rng)).collect()).unwrap();
            let w = wasserstein1(&a, &b).unwrap();
            let u = crate::random::haar_unitary(2, &mut rng);
            let obs = &u * diag(&[1.0, -rng.random::<f64>()]) * u.adjoint();
            let g = StateFunctional::linear(crate::linalg::hermitize(&obs)).unwrap();
            prop_assert!(w + 1e-12 >= (a.expectation(&g) - b.expectation(&g)).abs());
        }
    }
}
