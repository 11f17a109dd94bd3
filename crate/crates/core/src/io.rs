//! Instrument files.
//!
//! JSON document with a `dim` field and one of two bodies:
//!
//! ```json
//! { "dim": 2,
//!   "perfect_ops": [ { "name": "v1", "matrix": [[[re, im], [re, im]], [[re, im], [re, im]]] }, ... ],
//!   "eta": [[0.9, 0.1], [0.1, 0.9]],
//!   "labels": ["click", "no-click"] }
//! ```
//!
//! where `matrix` is row-major with each entry an `[re, im]` pair, `eta` is
//! the row-major `m x m'` bias matrix (identity when omitted) and `labels`
//! optionally names the reported outcomes; or
//!
//! ```json
//! { "dim": 2, "outcomes": [ { "label": "1", "kraus": [ matrix, ... ] }, ... ] }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so load, save and load again reproduces identical matrices.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::instrument::{BiasMatrix, Instrument, OutcomeMap};
use crate::linalg::{c, CMatrix};

/// Row-major matrix of `[re, im]` pairs.
pub type MatrixRows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub name: String,
    pub matrix: MatrixRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub label: String,
    pub kraus: Vec<MatrixRows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perfect_ops: Option<Vec<NamedMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<OutcomeSpec>>,
}

pub fn matrix_to_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn rows_to_matrix(rows: &MatrixRows, dim: usize) -> Result<CMatrix> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Parse(format!("matrix is not {dim}x{dim}")));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

impl InstrumentFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text)?;
        match (&f.perfect_ops, &f.outcomes) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(Error::Parse("exactly one of `perfect_ops` or `outcomes` is required".into())),
        }
        if f.outcomes.is_some() && (f.eta.is_some() || f.labels.is_some()) {
            return Err(Error::Parse("`eta` and `labels` only apply to `perfect_ops`".into()));
        }
        if f.dim == 0 {
            return Err(Error::Parse("`dim` must be positive".into()));
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("serializable");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Describe a perfect unraveling read through `eta`.
    pub fn from_perfect(ops: &[CMatrix], eta: Option<&BiasMatrix>) -> Self {
        Self {
            dim: ops.first().map_or(0, |m| m.nrows()),
            perfect_ops: Some(
                ops.iter()
                    .enumerate()
                    .map(|(k, m)| NamedMatrix { name: format!("v{}", k + 1), matrix: matrix_to_rows(m) })
                    .collect(),
            ),
            eta: eta.map(|e| e.rows().to_vec()),
            labels: None,
            outcomes: None,
        }
    }

    /// Explicit-outcome description of an instrument. Maps stored only as
    /// superoperators have no Kraus form and are rejected.
    pub fn from_instrument(instr: &Instrument) -> Result<Self> {
        let outcomes = instr
            .outcomes()
            .iter()
            .map(|o| {
                let k = o
                    .kraus()
                    .ok_or_else(|| Error::InvalidArgument(format!("outcome {} has no Kraus form", o.label())))?;
                Ok(OutcomeSpec { label: o.label().to_string(), kraus: k.iter().map(matrix_to_rows).collect() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: instr.dim(), perfect_ops: None, eta: None, labels: None, outcomes: Some(outcomes) })
    }

    pub fn perfect_matrices(&self) -> Result<Option<Vec<CMatrix>>> {
        self.perfect_ops
            .as_ref()
            .map(|ops| ops.iter().map(|m| rows_to_matrix(&m.matrix, self.dim)).collect())
            .transpose()
    }

    /// Build and validate the instrument.
    pub fn to_instrument(&self) -> Result<Instrument> {
        if let Some(ops) = self.perfect_matrices()? {
            let eta = match &self.eta {
                Some(rows) => BiasMatrix::new(rows.clone())?,
                None => BiasMatrix::identity(ops.len()),
            };
            let instr = Instrument::build_imperfect(&ops, &eta)?;
            return match &self.labels {
                None => Ok(instr),
                Some(labels) => {
                    if labels.len() != instr.num_outcomes() {
                        return Err(Error::DimensionMismatch { expected: instr.num_outcomes(), found: labels.len() });
                    }
                    let outcomes =
                        instr.outcomes().iter().zip(labels).map(|(o, l)| o.clone().with_label(l.clone())).collect();
                    Instrument::new(self.dim, outcomes)
                }
            };
        }
        let specs = self.outcomes.as_ref().ok_or_else(|| Error::Parse("no instrument body".into()))?;
        let outcomes = specs
            .iter()
            .map(|s| {
                let ks = s.kraus.iter().map(|m| rows_to_matrix(m, self.dim)).collect::<Result<Vec<_>>>()?;
                OutcomeMap::new(s.label.clone(), ks)
            })
            .collect::<Result<Vec<_>>>()?;
        Instrument::new(self.dim, outcomes)
    }
}
