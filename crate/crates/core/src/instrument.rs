//! Quantum instruments: finite families of completely positive maps whose sum
//! is trace preserving.
//!
//! Outcome labels are opaque strings at the boundary and dense indices
//! `0..m` everywhere else. A word `(i_1, ..., i_n)` is applied first letter
//! first, i.e. `Phi_word = Phi_{i_n} o ... o Phi_{i_1}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_square, hermitian_eigenvalues, identity, kron, op_norm, re, trace, unvec, vec_of, CMatrix};
use crate::tol::tolerances;

/// Explicit Kraus lists longer than this are replaced by the superoperator.
pub const KRAUS_CAP: usize = 4096;

/// Linear representation of a map on vectorized `d x d` matrices.
///
/// Column-stacking convention: the map `X -> A X A^dagger` is represented
/// by `conj(A) (x) A`, so that `vec(Psi(X)) = rep * vec(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOpMatrix {
    dim: usize,
    mat: CMatrix,
}

impl SuperOpMatrix {
    pub fn new(dim: usize, mat: CMatrix) -> Result<Self> {
        let n = ensure_square(&mat)?;
        if n != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: n });
        }
        Ok(Self { dim, mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, mat: identity(dim * dim) }
    }

    pub fn from_kraus(dim: usize, kraus: &[CMatrix]) -> Self {
        let mut mat = CMatrix::zeros(dim * dim, dim * dim);
        for a in kraus {
            mat += kraus_term(a);
        }
        Self { dim, mat }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Apply to a `d x d` matrix.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        unvec(&(&self.mat * vec_of(x)), self.dim)
    }

    /// Representation of the trace dual, which is the conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self { dim: self.dim, mat: self.mat.adjoint() }
    }

    /// `self o first`: apply `first`, then `self`.
    pub fn after(&self, first: &SuperOpMatrix) -> Self {
        Self { dim: self.dim, mat: &self.mat * &first.mat }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, mat: &self.mat * re(s) }
    }
}

fn kraus_term(a: &CMatrix) -> CMatrix {
    kron(&a.map(|z| z.conj()), a)
}

#[derive(Debug, Clone, PartialEq)]
enum MapRepr {
    Kraus(Vec<CMatrix>),
    SuperOp(SuperOpMatrix),
}

/// One completely positive map, stored as a Kraus list or, for long word
/// compositions, only through its superoperator.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeMap {
    label: String,
    dim: usize,
    repr: MapRepr,
}

impl OutcomeMap {
    pub fn new(label: impl Into<String>, kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?;
        let dim = ensure_square(first)?;
        for a in &kraus {
            let n = ensure_square(a)?;
            if n != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: n });
            }
        }
        Ok(Self { label: label.into(), dim, repr: MapRepr::Kraus(kraus) })
    }

    pub fn from_superop(label: impl Into<String>, rep: SuperOpMatrix) -> Self {
        Self { label: label.into(), dim: rep.dim(), repr: MapRepr::SuperOp(rep) }
    }

    /// The identity channel on dimension `d`.
    pub fn identity(label: impl Into<String>, d: usize) -> Self {
        Self { label: label.into(), dim: d, repr: MapRepr::Kraus(vec![identity(d)]) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Explicit Kraus operators, when still available.
    pub fn kraus(&self) -> Option<&[CMatrix]> {
        match &self.repr {
            MapRepr::Kraus(k) => Some(k),
            MapRepr::SuperOp(_) => None,
        }
    }

    pub fn rep(&self) -> SuperOpMatrix {
        match &self.repr {
            MapRepr::Kraus(k) => SuperOpMatrix::from_kraus(self.dim, k),
            MapRepr::SuperOp(s) => s.clone(),
        }
    }

    /// `sum_k A_k x A_k^dagger`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let n = ensure_square(x)?;
        if n != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: n });
        }
        Ok(match &self.repr {
            MapRepr::Kraus(k) => {
                let mut out = CMatrix::zeros(n, n);
                for a in k {
                    out += a * x * a.adjoint();
                }
                out
            }
            MapRepr::SuperOp(s) => s.apply(x),
        })
    }

    /// Trace dual `sum_k A_k^dagger b A_k`.
    pub fn apply_adjoint(&self, b: &CMatrix) -> Result<CMatrix> {
        let n = ensure_square(b)?;
        if n != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: n });
        }
        Ok(match &self.repr {
            MapRepr::Kraus(k) => {
                let mut out = CMatrix::zeros(n, n);
                for a in k {
                    out += a.adjoint() * b * a;
                }
                out
            }
            MapRepr::SuperOp(s) => s.adjoint().apply(b),
        })
    }

    /// Representation of the trace dual `Psi*`, with `tr(Psi(x) b) = tr(x Psi*(b))`.
    pub fn adjoint_rep(&self) -> SuperOpMatrix {
        self.rep().adjoint()
    }

    /// `sup_rho ||Psi(rho)||_1`, which for a CP map equals `lambda_max(Psi*(Id))`.
    pub fn map_norm(&self) -> f64 {
        let e = self.apply_adjoint(&identity(self.dim)).expect("dimension of the map");
        hermitian_eigenvalues(&e).last().copied().unwrap_or(0.0).max(0.0)
    }

    /// Number of Kraus operators, if the list is explicit.
    pub fn kraus_count(&self) -> Option<usize> {
        self.kraus().map(<[CMatrix]>::len)
    }

    /// `c * Psi` for `c >= 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let repr = match &self.repr {
            MapRepr::Kraus(k) => {
                let s = re(c.max(0.0).sqrt());
                MapRepr::Kraus(k.iter().map(|a| a * s).collect())
            }
            MapRepr::SuperOp(s) => MapRepr::SuperOp(s.scale(c)),
        };
        Self { label: self.label.clone(), dim: self.dim, repr }
    }

    /// `self o first` with an explicit Kraus list when it fits under `cap`.
    pub fn after(&self, first: &OutcomeMap, cap: usize, superop_fallback: bool) -> Result<Self> {
        if self.dim != first.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: first.dim });
        }
        let label = format!("{}.{}", first.label, self.label);
        if let (Some(outer), Some(inner)) = (self.kraus(), first.kraus()) {
            let count = outer.len() * inner.len();
            if count <= cap {
                let mut ops = Vec::with_capacity(count);
                for a in outer {
                    for b in inner {
                        ops.push(a * b);
                    }
                }
                return Ok(Self { label, dim: self.dim, repr: MapRepr::Kraus(ops) });
            }
            if !superop_fallback {
                return Err(Error::WordTooLong { kraus_count: count, cap });
            }
        } else if !superop_fallback {
            return Err(Error::WordTooLong { kraus_count: usize::MAX, cap });
        }
        Ok(Self { label, dim: self.dim, repr: MapRepr::SuperOp(self.rep().after(&first.rep())) })
    }

    /// Residual `||sum_k A_k^dagger A_k - Id||_inf`.
    pub fn completeness_residual(&self) -> f64 {
        let e = self.apply_adjoint(&identity(self.dim)).expect("dimension of the map");
        op_norm(&(e - identity(self.dim)))
    }
}

/// Column-stochastic detector bias `eta[i][j]` = P(report i | true j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct BiasMatrix {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for BiasMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        BiasMatrix::new(rows)
    }
}

impl From<BiasMatrix> for Vec<Vec<f64>> {
    fn from(b: BiasMatrix) -> Self {
        b.rows
    }
}

impl BiasMatrix {
    pub const COLUMN_TOL: f64 = 1e-12;

    /// Row-major `m x m'` matrix; every column must sum to one.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidArgument("empty bias matrix".into()));
        }
        let cols = rows[0].len();
        for r in &rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
        }
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if !(v >= 0.0) {
                    return Err(Error::NegativeBias { row: i, column: j, value: v });
                }
            }
        }
        for j in 0..cols {
            let sum: f64 = rows.iter().map(|r| r[j]).sum();
            if (sum - 1.0).abs() > Self::COLUMN_TOL {
                return Err(Error::NotStochastic { column: j, sum });
            }
        }
        Ok(Self { rows })
    }

    pub fn identity(m: usize) -> Self {
        Self { rows: (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect() }
    }

    /// Every column equal to `(1/m, ..., 1/m)`.
    pub fn uniform(m: usize, cols: usize) -> Self {
        Self { rows: vec![vec![1.0 / m as f64; cols]; m] }
    }

    /// Symmetric binary flip with error probability `p`.
    pub fn symmetric_flip(p: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    pub fn reported(&self) -> usize {
        self.rows.len()
    }

    pub fn ideal(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// A labeled family of CP maps summing to a trace-preserving channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    dim: usize,
    outcomes: Vec<OutcomeMap>,
}

/// Residual `||sum_j V_j^dagger V_j - Id||_inf` of an operator family.
pub fn completeness_residual(ops: &[CMatrix]) -> Result<f64> {
    let first = ops.first().ok_or_else(|| Error::InvalidArgument("empty operator list".into()))?;
    let d = ensure_square(first)?;
    let mut s = CMatrix::zeros(d, d);
    for v in ops {
        let n = ensure_square(v)?;
        if n != d {
            return Err(Error::DimensionMismatch { expected: d, found: n });
        }
        s += v.adjoint() * v;
    }
    Ok(op_norm(&(s - identity(d))))
}

impl Instrument {
    /// Validate shapes, label uniqueness and trace preservation of the sum.
    pub fn new(dim: usize, outcomes: Vec<OutcomeMap>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidArgument("instrument without outcomes".into()));
        }
        for (k, o) in outcomes.iter().enumerate() {
            if o.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: o.dim() });
            }
            if outcomes[..k].iter().any(|p| p.label() == o.label()) {
                return Err(Error::DuplicateLabel(o.label().to_string()));
            }
        }
        let instr = Self { dim, outcomes };
        let residual = instr.completeness_residual();
        if residual > tolerances().tp {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(instr)
    }

    /// Imperfect detection of a perfect unraveling: outcome `i` has Kraus
    /// operators `sqrt(eta[i][j]) V_j` over all `j` with `eta[i][j] > 0`.
    ///
    /// A reported outcome with an all-zero row gets the zero map.
    pub fn build_imperfect(perfect_ops: &[CMatrix], eta: &BiasMatrix) -> Result<Self> {
        let residual = completeness_residual(perfect_ops)?;
        if residual > tolerances().tp {
            return Err(Error::NotTracePreserving { residual });
        }
        if eta.ideal() != perfect_ops.len() {
            return Err(Error::DimensionMismatch { expected: perfect_ops.len(), found: eta.ideal() });
        }
        let d = perfect_ops[0].nrows();
        let outcomes = (0..eta.reported())
            .map(|i| {
                let mut ops: Vec<CMatrix> = perfect_ops
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| eta.get(i, j) > 0.0)
                    .map(|(j, v)| v * re(eta.get(i, j).sqrt()))
                    .collect();
                if ops.is_empty() {
                    ops.push(CMatrix::zeros(d, d));
                }
                OutcomeMap::new((i + 1).to_string(), ops)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(d, outcomes)
    }

    /// Perfect measurement: one outcome per operator.
    pub fn perfect(ops: &[CMatrix]) -> Result<Self> {
        Self::build_imperfect(ops, &BiasMatrix::identity(ops.len()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self) -> &[OutcomeMap] {
        &self.outcomes
    }

    pub fn outcome(&self, i: usize) -> Result<&OutcomeMap> {
        self.outcomes.get(i).ok_or_else(|| Error::UnknownLabel(i.to_string()))
    }

    pub fn labels(&self) -> Vec<&str> {
        self.outcomes.iter().map(OutcomeMap::label).collect()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.outcomes
            .iter()
            .position(|o| o.label() == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Map a word of labels to dense indices.
    pub fn word_from_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.index_of(l.as_ref())).collect()
    }

    pub fn completeness_residual(&self) -> f64 {
        let mut s = CMatrix::zeros(self.dim, self.dim);
        for o in &self.outcomes {
            s += o.apply_adjoint(&identity(self.dim)).expect("validated dimension");
        }
        op_norm(&(s - identity(self.dim)))
    }

    /// `tr Phi_i(rho)` clamped into `[0, 1]`.
    pub fn outcome_probability(&self, i: usize, rho: &CMatrix) -> Result<f64> {
        let post = self.outcome(i)?.apply(rho)?;
        Ok(trace(&post).re.clamp(0.0, 1.0))
    }

    pub fn probabilities(&self, rho: &CMatrix) -> Result<Vec<f64>> {
        (0..self.num_outcomes()).map(|i| self.outcome_probability(i, rho)).collect()
    }

    /// The averaged channel `Phi = sum_i Phi_i`.
    pub fn total_channel(&self) -> OutcomeMap {
        let all: Option<Vec<CMatrix>> = self
            .outcomes
            .iter()
            .map(|o| o.kraus().map(<[CMatrix]>::to_vec))
            .collect::<Option<Vec<_>>>()
            .map(|v| v.into_iter().flatten().collect());
        match all {
            Some(k) => OutcomeMap::new("channel", k).expect("validated shapes"),
            None => {
                let mut mat = DMatrix::zeros(self.dim * self.dim, self.dim * self.dim);
                for o in &self.outcomes {
                    mat += o.rep().into_matrix();
                }
                OutcomeMap::from_superop("channel", SuperOpMatrix { dim: self.dim, mat })
            }
        }
    }

    /// `Phi_{i_n} o ... o Phi_{i_1}`; falls back to the superoperator once the
    /// Kraus product would exceed [`KRAUS_CAP`].
    pub fn compose_word(&self, word: &[usize]) -> Result<OutcomeMap> {
        self.compose_word_with(word, KRAUS_CAP, true)
    }

    pub fn compose_word_with(&self, word: &[usize], cap: usize, superop_fallback: bool) -> Result<OutcomeMap> {
        let (&first, rest) = word.split_first().ok_or(Error::EmptyWord)?;
        let mut acc = self.outcome(first)?.clone();
        for &i in rest {
            acc = self.outcome(i)?.after(&acc, cap, superop_fallback)?;
        }
        Ok(acc)
    }

    /// Superoperator of a word, built by multiplying letter representations.
    pub fn word_rep(&self, word: &[usize]) -> Result<SuperOpMatrix> {
        let mut acc = SuperOpMatrix::identity(self.dim);
        for &i in word {
            acc = self.outcome(i)?.rep().after(&acc);
        }
        Ok(acc)
    }

    /// Rename outcomes with a permutation: outcome `k` of the result is
    /// outcome `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let outcomes = perm.iter().map(|&k| self.outcome(k).cloned()).collect::<Result<Vec<_>>>()?;
        Self::new(self.dim, outcomes)
    }

    /// Conjugate every Kraus operator by a unitary: `A -> U A U^dagger`.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        let outcomes = self
            .outcomes
            .iter()
            .map(|o| match o.kraus() {
                Some(k) => OutcomeMap::new(o.label(), k.iter().map(|a| u * a * u.adjoint()).collect()),
                None => {
                    let w = kron(&u.map(|z| z.conj()), u);
                    let rep = SuperOpMatrix::new(self.dim, &w * o.rep().matrix() * w.adjoint())?;
                    Ok(OutcomeMap::from_superop(o.label(), rep))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.dim, outcomes)
    }
}
