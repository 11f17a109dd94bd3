//! Quantum trajectories, the mismatched filter and exact path-space
//! quantities (cylinder probabilities, total variation at a horizon, the dual
//! martingale).

use rand::Rng;

use crate::error::{Error, Result};
use crate::instrument::Instrument;
use crate::linalg::{fidelity, hermitian_eigen, identity, psd_sqrt, re, spectral_map, trace, CMatrix, DensityMatrix};
use crate::random::{seeded, SimRng};
use crate::tol::tolerances;

/// Probabilities below this are treated as impossible branches.
pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-14;

/// Default cap on the number of words enumerated at a horizon.
pub const ENUMERATION_CAP: usize = 1_000_000;

/// Sample an outcome by inverse CDF over the exact probabilities and return
/// `(outcome, post-measurement state, probability)`.
pub fn step<R: Rng + ?Sized>(instr: &Instrument, rho: &DensityMatrix, rng: &mut R) -> Result<(usize, DensityMatrix, f64)> {
    let posts = instr
        .outcomes()
        .iter()
        .map(|o| o.apply(rho.matrix()))
        .collect::<Result<Vec<_>>>()?;
    let probs: Vec<f64> = posts.iter().map(|p| trace(p).re.max(0.0)).collect();
    let max = probs.iter().copied().fold(0.0, f64::max);
    if max < NEGLIGIBLE_PROBABILITY {
        return Err(Error::DegenerateDistribution { max_probability: max });
    }
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut pick = probs.iter().rposition(|&p| p > 0.0).expect("some outcome has positive probability");
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum && p > 0.0 {
            pick = i;
            break;
        }
    }
    let state = DensityMatrix::normalize(&posts[pick])?;
    Ok((pick, state, probs[pick] / total))
}

/// Update an estimate with an observed outcome: `Phi_i(rho_hat) / tr`.
pub fn filter_step(instr: &Instrument, rho_hat: &DensityMatrix, outcome: usize) -> Result<DensityMatrix> {
    let post = instr.outcome(outcome)?.apply(rho_hat.matrix())?;
    let p = trace(&post).re;
    if p <= tolerances().filter {
        return Err(Error::FilterCollapse { step: 0, probability: p });
    }
    DensityMatrix::normalize(&post)
}

/// Result of [`kernel_condition`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCondition {
    pub holds: bool,
    /// Smallest `c` with `rho0 <= c * rho_hat0`, when the condition holds.
    pub constant: Option<f64>,
}

/// Check `ker(rho_hat0) ⊂ ker(rho0)`.
pub fn kernel_condition(rho0: &DensityMatrix, rho_hat0: &DensityMatrix) -> KernelCondition {
    let tol = tolerances().rank;
    let (values, vectors) = hermitian_eigen(rho_hat0.matrix());
    for (k, &lam) in values.iter().enumerate() {
        if lam <= tol {
            let v = vectors.column(k);
            let weight = (v.adjoint() * rho0.matrix() * v)[(0, 0)].re;
            if weight > tol {
                return KernelCondition { holds: false, constant: None };
            }
        }
    }
    let inv_sqrt = spectral_map(&values, &vectors, |x| if x > tol { 1.0 / x.sqrt() } else { 0.0 });
    let sandwich = &inv_sqrt * rho0.matrix() * &inv_sqrt;
    let c = crate::linalg::hermitian_eigenvalues(&sandwich).last().copied().unwrap_or(0.0);
    KernelCondition { holds: true, constant: Some(c) }
}

/// One simulated pair of true and estimated trajectories.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub steps: usize,
    pub seed: u64,
    /// Observed outcomes `omega_1 .. omega_n`.
    pub word: Vec<usize>,
    /// `rho_0 .. rho_n` when requested.
    pub states: Option<Vec<DensityMatrix>>,
    /// `rho_hat_0 .. rho_hat_n` when requested.
    pub est_states: Option<Vec<DensityMatrix>>,
    /// `F(rho_k, rho_hat_k)` for `k = 0 .. n`.
    pub fidelities: Vec<f64>,
    /// `log P^{rho_0}(omega_1 .. omega_k)` for `k = 0 .. n`.
    pub log_likelihoods: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihoods.last().copied().unwrap_or(0.0)
    }

    pub fn final_fidelity(&self) -> f64 {
        self.fidelities.last().copied().unwrap_or(f64::NAN)
    }
}

/// Simulate `n` steps driven by the true state, updating the estimate with
/// the same outcomes.
pub fn run_pair(
    instr: &Instrument,
    rho0: &DensityMatrix,
    rho_hat0: &DensityMatrix,
    n: usize,
    seed: u64,
    store_states: bool,
) -> Result<TrajectoryRecord> {
    if !kernel_condition(rho0, rho_hat0).holds {
        return Err(Error::KernelConditionViolated);
    }
    let mut rng = seeded(seed);
    let mut rho = rho0.clone();
    let mut est = rho_hat0.clone();
    let mut word = Vec::with_capacity(n);
    let mut fidelities = Vec::with_capacity(n + 1);
    let mut log_likelihoods = Vec::with_capacity(n + 1);
    let mut states = store_states.then(|| vec![rho.clone()]);
    let mut est_states = store_states.then(|| vec![est.clone()]);
    let mut ll = 0.0;
    fidelities.push(fidelity(&rho, &est)?);
    log_likelihoods.push(ll);
    for k in 1..=n {
        let (i, next, p) = step(instr, &rho, &mut rng)?;
        est = filter_step(instr, &est, i).map_err(|e| match e {
            Error::FilterCollapse { probability, .. } => Error::FilterCollapse { step: k, probability },
            other => other,
        })?;
        rho = next;
        ll += p.ln();
        word.push(i);
        fidelities.push(fidelity(&rho, &est)?);
        log_likelihoods.push(ll);
        if let Some(s) = states.as_mut() {
            s.push(rho.clone());
        }
        if let Some(s) = est_states.as_mut() {
            s.push(est.clone());
        }
    }
    Ok(TrajectoryRecord { steps: n, seed, word, states, est_states, fidelities, log_likelihoods })
}

/// Exact `E[F(rho_1, rho_hat_1) | rho_0 = rho, rho_hat_0 = rho_hat]`.
pub fn conditional_fidelity_expectation(instr: &Instrument, rho: &DensityMatrix, rho_hat: &DensityMatrix) -> Result<f64> {
    let mut total = 0.0;
    for o in instr.outcomes() {
        let a = o.apply(rho.matrix())?;
        let p = trace(&a).re;
        if p < NEGLIGIBLE_PROBABILITY {
            continue;
        }
        let b = o.apply(rho_hat.matrix())?;
        let f = fidelity(&DensityMatrix::normalize(&a)?, &DensityMatrix::normalize(&b)?)?;
        total += p * f;
    }
    Ok(total)
}

/// `tr Phi_word(rho)`; the empty word has probability one.
pub fn cylinder_probability(instr: &Instrument, word: &[usize], rho: &DensityMatrix) -> Result<f64> {
    let mut x = rho.matrix().clone();
    for &i in word {
        x = instr.outcome(i)?.apply(&x)?;
    }
    Ok(trace(&x).re.clamp(0.0, 1.0))
}

fn check_horizon(m: usize, n: usize) -> Result<()> {
    let words = (m as f64).powi(n as i32);
    if words > ENUMERATION_CAP as f64 {
        return Err(Error::HorizonTooLarge { words, cap: ENUMERATION_CAP });
    }
    Ok(())
}

/// Depth-first walk over all words of length `n`, visiting the image of `x`
/// under each word map. Words are visited in lexicographic order.
fn walk_words(instr: &Instrument, x: &CMatrix, n: usize, visit: &mut impl FnMut(&CMatrix)) -> Result<()> {
    if n == 0 {
        visit(x);
        return Ok(());
    }
    for o in instr.outcomes() {
        walk_words(instr, &o.apply(x)?, n - 1, visit)?;
    }
    Ok(())
}

/// Law of the first `n` outcomes: entry `k` is the probability of the word
/// whose base-`m` digits (first letter most significant) spell `k`.
pub fn word_distribution(instr: &Instrument, rho: &DensityMatrix, n: usize) -> Result<Vec<f64>> {
    check_horizon(instr.num_outcomes(), n)?;
    let mut out = Vec::new();
    walk_words(instr, rho.matrix(), n, &mut |y| out.push(trace(y).re.max(0.0)))?;
    Ok(out)
}

/// Dense index of a word, matching [`word_distribution`].
pub fn word_index(word: &[usize], m: usize) -> usize {
    word.iter().fold(0, |acc, &i| acc * m + i)
}

/// Exact total-variation distance between the outcome laws of `rho` and
/// `sigma` over the first `n` steps.
pub fn tv_distance_horizon(instr: &Instrument, rho: &DensityMatrix, sigma: &DensityMatrix, n: usize) -> Result<f64> {
    check_horizon(instr.num_outcomes(), n)?;
    let diff = rho.matrix() - sigma.matrix();
    let mut total = 0.0;
    walk_words(instr, &diff, n, &mut |y| total += trace(y).re.abs())?;
    Ok(0.5 * total)
}

/// Unnormalized dual products `Phi*_{w_1} o ... o Phi*_{w_k}(Id)` for `k = 1..n`.
fn dual_products(instr: &Instrument, word: &[usize]) -> Result<Vec<CMatrix>> {
    let d = instr.dim();
    let mut acc = crate::instrument::SuperOpMatrix::identity(d);
    let mut out = Vec::with_capacity(word.len());
    for &i in word {
        acc = acc.after(&instr.outcome(i)?.adjoint_rep());
        out.push(acc.apply(&identity(d)));
    }
    Ok(out)
}

/// `M_k = Phi*_{w_1} o ... o Phi*_{w_k}(Id) / P^sigma(w_1 .. w_k)` with
/// `sigma = Id/d`, for `k = 1..n`.
pub fn dual_martingale_series(instr: &Instrument, word: &[usize]) -> Result<Vec<CMatrix>> {
    let d = instr.dim() as f64;
    dual_products(instr, word)?
        .into_iter()
        .enumerate()
        .map(|(k, y)| {
            let p = trace(&y).re / d;
            if !(p > 0.0) {
                return Err(Error::ZeroPrefixProbability { position: k + 1 });
            }
            Ok(y / re(p))
        })
        .collect()
}

/// Largest entry of `M_k(prefix) - sum_i P^sigma(i | prefix) M_{k+1}(prefix i)`,
/// with `M_0 = Id`. Next letters of zero probability are skipped.
pub fn dual_martingale_residual(instr: &Instrument, prefix: &[usize]) -> Result<f64> {
    let d = instr.dim();
    let current = if prefix.is_empty() {
        identity(d)
    } else {
        dual_martingale_series(instr, prefix)?.pop().expect("nonempty prefix")
    };
    let base = if prefix.is_empty() { 1.0 } else { trace(dual_products(instr, prefix)?.last().expect("nonempty")).re / d as f64 };
    let mut expected = CMatrix::zeros(d, d);
    let mut extended = prefix.to_vec();
    extended.push(0);
    for i in 0..instr.num_outcomes() {
        *extended.last_mut().expect("pushed") = i;
        let y = dual_products(instr, &extended)?.pop().expect("nonempty");
        let p = trace(&y).re / d as f64;
        if p <= 0.0 {
            continue;
        }
        expected += (y / re(p)) * re(p / base);
    }
    Ok(crate::linalg::max_abs(&(current - expected)))
}

/// Visit `rho_1 .. rho_n` along one sampled trajectory.
pub fn walk_trajectory(
    instr: &Instrument,
    rho0: &DensityMatrix,
    n: usize,
    rng: &mut SimRng,
    mut visit: impl FnMut(usize, &DensityMatrix),
) -> Result<DensityMatrix> {
    let mut rho = rho0.clone();
    for k in 1..=n {
        let (_, next, _) = step(instr, &rho, rng)?;
        rho = next;
        visit(k, &rho);
    }
    Ok(rho)
}

/// PSD square-root based helper: the constant `c` with `rho <= c sigma` for
/// full-rank `sigma`.
pub fn domination_constant(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let r = psd_sqrt(sigma.matrix())?;
    let inv = r.try_inverse().ok_or(Error::KernelConditionViolated)?;
    Ok(crate::linalg::hermitian_eigenvalues(&(&inv * rho.matrix() * &inv)).last().copied().unwrap_or(0.0))
}
