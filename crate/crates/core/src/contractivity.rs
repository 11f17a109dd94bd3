//! Rank-one word maps: primitive-word certificates, trajectory and beam
//! searches for contractive sequences, and a randomized falsifier for
//! non-darkness.

use serde::Serialize;

use crate::channel::{default_primitivity_bound, is_primitive_map};
use crate::error::{Error, Result};
use crate::instrument::{completeness_residual, Instrument, SuperOpMatrix};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, identity, max_abs, op_norm, re, spectral_map, trace, unvec, vec_of, CMatrix, CVector, DensityMatrix};
use crate::random::{haar_subspace, seeded};
use crate::tol::tolerances;
use crate::trajectory::step;

pub const BEAM_WIDTH: usize = 8;
pub const BEAM_DEPTH: usize = 12;

/// Evidence that a sequence of words approaches a rank-one map `Z tr(X .)`.
#[derive(Debug, Clone, Serialize)]
pub struct ContCertificate {
    pub word: Vec<String>,
    pub word_indices: Vec<usize>,
    /// `s2 / s1` of the normalized representation.
    pub defect: f64,
    #[serde(serialize_with = "ser_matrix")]
    pub z_est: CMatrix,
    #[serde(serialize_with = "ser_matrix")]
    pub x_est: CMatrix,
    /// Top singular value of `rep / map_norm`.
    pub top_singular: f64,
    /// Spectral-norm distance between the normalized representation divided
    /// by its top singular value and the rank-one reconstruction.
    pub reconstruction_error: f64,
    /// `(length, defect)` along the search.
    pub defect_trace: Vec<(usize, f64)>,
}

fn ser_matrix<S: serde::Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    crate::io::matrix_to_rows(m).serialize(s)
}

/// Outcome of a certification attempt.
#[derive(Debug, Clone)]
pub enum Certification {
    Certified(ContCertificate),
    NotCertified { best_defect: f64, defect_trace: Vec<(usize, f64)> },
}

impl Certification {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certification::Certified(_))
    }

    pub fn certificate(&self) -> Option<&ContCertificate> {
        match self {
            Certification::Certified(c) => Some(c),
            Certification::NotCertified { .. } => None,
        }
    }

    pub fn best_defect(&self) -> f64 {
        match self {
            Certification::Certified(c) => c.defect,
            Certification::NotCertified { best_defect, .. } => *best_defect,
        }
    }

    pub fn defect_trace(&self) -> &[(usize, f64)] {
        match self {
            Certification::Certified(c) => &c.defect_trace,
            Certification::NotCertified { defect_trace, .. } => defect_trace,
        }
    }
}

struct TopPair {
    s1: f64,
    s2: f64,
    u: CVector,
    v: CVector,
}

/// Top singular triple via the Gram matrix: `v` is the leading eigenvector of
/// `m^dag m` and `u = m v / |m v|`, which stays accurate for nearly rank-one
/// products.
fn top_pair(m: &CMatrix) -> TopPair {
    let (values, vectors) = hermitian_eigen(&(m.adjoint() * m));
    let k = values.len() - 1;
    let v = vectors.column(k).into_owned();
    let mv = m * &v;
    let s1 = mv.norm();
    let u = if s1 > 0.0 { mv / re(s1) } else { v.clone() };
    let sv = crate::linalg::singular_values(m);
    TopPair { s1, s2: sv.get(1).copied().unwrap_or(0.0), u, v }
}

/// `s2 / s1` of a representation matrix.
pub fn rank_one_defect(rep: &SuperOpMatrix) -> Result<f64> {
    let sv = crate::linalg::singular_values(rep.matrix());
    let s1 = sv[0];
    if !(s1 > 0.0) {
        return Err(Error::ZeroMap);
    }
    Ok((sv.get(1).copied().unwrap_or(0.0) / s1).clamp(0.0, 1.0))
}

/// Turn a singular vector into a PSD matrix of unit trace norm.
fn psd_from_vector(v: &CVector, d: usize) -> CMatrix {
    let m = unvec(v, d);
    let tr = trace(&m);
    let phase = if tr.norm() > 1e-300 { tr.conj() / re(tr.norm()) } else { re(1.0) };
    let h = crate::linalg::hermitize(&(m * phase));
    let (values, vectors) = hermitian_eigen(&h);
    let p = spectral_map(&values, &vectors, |x| x.max(0.0));
    let t = trace(&p).re;
    if t > 0.0 {
        p / re(t)
    } else {
        identity(d) / re(d as f64)
    }
}

fn map_norm_of(rep: &SuperOpMatrix) -> f64 {
    let d = rep.dim();
    let y = rep.adjoint().apply(&identity(d));
    hermitian_eigenvalues(&crate::linalg::hermitize(&y)).last().copied().unwrap_or(0.0)
}

fn build_certificate(instr: &Instrument, word: &[usize], rep: &SuperOpMatrix, defect_trace: Vec<(usize, f64)>) -> Result<ContCertificate> {
    let d = rep.dim();
    let norm = map_norm_of(rep);
    if !(norm > 0.0) {
        return Err(Error::ZeroMap);
    }
    let n = rep.matrix() / re(norm);
    let top = top_pair(&n);
    let z = psd_from_vector(&top.u, d);
    let x = psd_from_vector(&top.v, d);
    let zf = vec_of(&z) / re(z.norm());
    let xf = vec_of(&x) / re(x.norm());
    let recon = &zf * xf.adjoint();
    let reconstruction_error = op_norm(&(&n / re(top.s1) - recon));
    let labels = instr.labels();
    Ok(ContCertificate {
        word: word.iter().map(|&i| labels[i].to_string()).collect(),
        word_indices: word.to_vec(),
        defect: (top.s2 / top.s1).clamp(0.0, 1.0),
        z_est: z,
        x_est: x,
        top_singular: top.s1,
        reconstruction_error,
        defect_trace,
    })
}

/// Divide by the spectral norm; `None` for the zero map.
fn renormalized(m: CMatrix) -> Option<CMatrix> {
    let s = op_norm(&m);
    (s > 0.0 && s.is_finite()).then(|| m / re(s))
}

/// Iterate a word whose map is certified primitive and stop once the defect
/// of its powers drops below `tol_cont`.
pub fn certify_primitive_word(instr: &Instrument, word: &[usize], n_max: usize) -> Result<Certification> {
    let map = instr.compose_word(word)?;
    let not_certified = |trace: Vec<(usize, f64)>| Certification::NotCertified {
        best_defect: trace.iter().map(|t| t.1).fold(1.0, f64::min),
        defect_trace: trace,
    };
    if !is_primitive_map(&map, default_primitivity_bound(instr.dim())) {
        return Ok(not_certified(Vec::new()));
    }
    let tol = tolerances().cont;
    let t = instr.word_rep(word)?;
    let mut power = match renormalized(t.matrix().clone()) {
        Some(p) => p,
        None => return Ok(not_certified(Vec::new())),
    };
    let mut trace_out = Vec::new();
    for n in 1..=n_max {
        if n > 1 {
            power = match renormalized(t.matrix() * &power) {
                Some(p) => p,
                None => break,
            };
        }
        let rep = SuperOpMatrix::new(instr.dim(), power.clone())?;
        let defect = rank_one_defect(&rep)?;
        trace_out.push((n * word.len(), defect));
        if defect <= tol {
            let full: Vec<usize> = word.iter().copied().cycle().take(n * word.len()).collect();
            return Ok(Certification::Certified(build_certificate(instr, &full, &rep, trace_out)?));
        }
    }
    Ok(not_certified(trace_out))
}

struct Candidate {
    word: Vec<usize>,
    rep: CMatrix,
    defect: f64,
}

fn defect_of(m: &CMatrix) -> f64 {
    let sv = crate::linalg::singular_values(m);
    if sv[0] > 0.0 {
        (sv.get(1).copied().unwrap_or(0.0) / sv[0]).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Beam search over words of length up to `depth`, ranked by defect.
fn beam_search(instr: &Instrument, width: usize, depth: usize) -> Option<(Candidate, Vec<(usize, f64)>)> {
    let letters: Vec<CMatrix> = instr.outcomes().iter().map(|o| o.rep().into_matrix()).collect();
    let mut beam = vec![Candidate { word: Vec::new(), rep: identity(instr.dim() * instr.dim()), defect: 1.0 }];
    let mut best: Option<Candidate> = None;
    let mut trace_out = Vec::new();
    for len in 1..=depth {
        let mut next: Vec<Candidate> = Vec::with_capacity(beam.len() * letters.len());
        for c in &beam {
            for (i, l) in letters.iter().enumerate() {
                if let Some(rep) = renormalized(l * &c.rep) {
                    let mut word = c.word.clone();
                    word.push(i);
                    let defect = defect_of(&rep);
                    next.push(Candidate { word, rep, defect });
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_by(|a, b| a.defect.total_cmp(&b.defect));
        next.truncate(width);
        trace_out.push((len, next[0].defect));
        if best.as_ref().is_none_or(|b| next[0].defect < b.defect) {
            best = Some(Candidate { word: next[0].word.clone(), rep: next[0].rep.clone(), defect: next[0].defect });
        }
        beam = next;
    }
    best.map(|b| (b, trace_out))
}

/// Search for a contractive word along a sampled trajectory from `rho_probe`
/// and by beam search, keeping whichever reaches the lower defect.
pub fn search_contractive_sequence(instr: &Instrument, rho_probe: &DensityMatrix, max_len: usize, tol: f64, seed: u64) -> Result<Certification> {
    search_contractive_sequence_with(instr, rho_probe, max_len, tol, seed, BEAM_WIDTH, BEAM_DEPTH)
}

pub fn search_contractive_sequence_with(
    instr: &Instrument,
    rho_probe: &DensityMatrix,
    max_len: usize,
    tol: f64,
    seed: u64,
    beam_width: usize,
    beam_depth: usize,
) -> Result<Certification> {
    let d = instr.dim();
    let letters: Vec<CMatrix> = instr.outcomes().iter().map(|o| o.rep().into_matrix()).collect();
    let mut rng = seeded(seed);
    let mut rho = rho_probe.clone();
    let mut acc = identity(d * d);
    let mut word = Vec::with_capacity(max_len);
    let mut traj_trace = Vec::with_capacity(max_len);
    let mut traj_best: Option<(usize, CMatrix, f64)> = None;
    for len in 1..=max_len {
        let (i, next, _) = match step(instr, &rho, &mut rng) {
            Ok(s) => s,
            Err(_) => break,
        };
        rho = next;
        word.push(i);
        acc = match renormalized(&letters[i] * &acc) {
            Some(a) => a,
            None => break,
        };
        let defect = defect_of(&acc);
        traj_trace.push((len, defect));
        if traj_best.as_ref().is_none_or(|b| defect < b.2) {
            traj_best = Some((len, acc.clone(), defect));
        }
        // exact rank one: further letters cannot improve
        if defect == 0.0 {
            break;
        }
    }
    let beam = if beam_width > 0 && beam_depth > 0 { beam_search(instr, beam_width, beam_depth) } else { None };

    let traj_defect = traj_best.as_ref().map_or(f64::INFINITY, |b| b.2);
    let beam_defect = beam.as_ref().map_or(f64::INFINITY, |b| b.0.defect);
    let (best_word, best_rep, best_defect, trace_out) = if beam_defect < traj_defect {
        let (c, t) = beam.expect("finite defect");
        (c.word, c.rep, c.defect, t)
    } else if let Some((len, rep, defect)) = traj_best {
        (word[..len].to_vec(), rep, defect, traj_trace)
    } else {
        return Ok(Certification::NotCertified { best_defect: 1.0, defect_trace: traj_trace });
    };
    if best_defect <= tol {
        let rep = SuperOpMatrix::new(d, best_rep)?;
        Ok(Certification::Certified(build_certificate(instr, &best_word, &rep, trace_out)?))
    } else {
        Ok(Certification::NotCertified { best_defect, defect_trace: trace_out })
    }
}

/// A sampled subspace on which no tested word violated the non-darkness
/// equality.
#[derive(Debug, Clone)]
pub struct DarkCandidate {
    pub dim: usize,
    /// Orthonormal basis as columns.
    pub basis: CMatrix,
}

#[derive(Debug, Clone, Default)]
pub struct DarkSubspaceReport {
    pub subspaces_tested: usize,
    pub words_tested: usize,
    pub candidates: Vec<DarkCandidate>,
    /// Length of the shortest violating word for each refuted subspace.
    pub violation_lengths: Vec<usize>,
}

impl DarkSubspaceReport {
    pub fn mean_violation_length(&self) -> Option<f64> {
        (!self.violation_lengths.is_empty()).then(|| self.violation_lengths.iter().sum::<usize>() as f64 / self.violation_lengths.len() as f64)
    }
}

/// Spread of `Q^dag W^dag W Q`: zero iff `pi W^dag W pi = ||W pi||^2 pi`.
fn nd_gap(w: &CMatrix, q: &CMatrix) -> f64 {
    let wq = w * q;
    let b = wq.adjoint() * wq;
    let ev = hermitian_eigenvalues(&crate::linalg::hermitize(&b));
    ev[ev.len() - 1] - ev[0]
}

/// Sample Haar subspaces of every dimension `2..=d` and search words up to
/// `max_word_len` for a violation of the non-darkness equality.
pub fn nd_falsifier(perfect_ops: &[CMatrix], n_subspaces: usize, max_word_len: usize, seed: u64) -> Result<DarkSubspaceReport> {
    let d = perfect_ops.first().ok_or_else(|| Error::InvalidArgument("no operators".into()))?.nrows();
    let residual = completeness_residual(perfect_ops)?;
    if residual > tolerances().tp {
        return Err(Error::NotUnraveling { residual });
    }
    let tol = tolerances().nd;
    let mut rng = seeded(seed);
    let mut report = DarkSubspaceReport::default();
    for k in 2..=d {
        for _ in 0..n_subspaces {
            let q = haar_subspace(d, k, &mut rng);
            report.subspaces_tested += 1;
            let mut layer = vec![identity(d)];
            let mut found = None;
            'search: for len in 1..=max_word_len {
                let mut next = Vec::with_capacity(layer.len() * perfect_ops.len());
                for w in &layer {
                    for v in perfect_ops {
                        let vw = v * w;
                        report.words_tested += 1;
                        if nd_gap(&vw, &q) > tol {
                            found = Some(len);
                            break 'search;
                        }
                        next.push(vw);
                    }
                }
                layer = next;
            }
            match found {
                Some(len) => report.violation_lengths.push(len),
                None => report.candidates.push(DarkCandidate { dim: k, basis: q }),
            }
        }
    }
    Ok(report)
}

/// `max |Phi(Z)/tr - Z|`, the Perron fixed-point residual of a certificate.
pub fn fixed_point_residual(instr: &Instrument, word: &[usize], z: &CMatrix) -> Result<f64> {
    let y = instr.word_rep(word)?.apply(z);
    let t = trace(&y).re;
    if !(t > 0.0) {
        return Err(Error::ZeroMap);
    }
    Ok(max_abs(&(y / re(t) - z / trace(z))))
}
