//! Numerical tolerances shared by every module.
//!
//! Defaults live in [`Tolerances::default`]. A process-wide copy is read by
//! the library through [`tolerances`]; binaries may replace it once at
//! startup with [`set_tolerances`].

use std::sync::RwLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Hermiticity residual for density matrices.
    pub herm: f64,
    /// Unit-trace residual for density matrices.
    pub tr: f64,
    /// Eigenvalues in `[-psd, psd)` are treated as zero.
    pub psd: f64,
    /// Reconstruction error allowed for PSD square roots.
    pub sqrt: f64,
    /// Completeness residual for instruments.
    pub tp: f64,
    /// Singular values of `rep - I` below this count as fixed directions.
    pub fix: f64,
    /// Width of the peripheral shell `|lambda| >= 1 - peri`.
    pub peri: f64,
    /// Smallest eigenvalue regarded as strictly positive.
    pub rank: f64,
    /// Rank-one defect required for a contractivity certificate.
    pub cont: f64,
    /// Residual threshold for the non-darkness equality.
    pub nd: f64,
    /// Outcome probability below which the filter is declared collapsed.
    pub filter: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-9,
            tr: 1e-9,
            psd: 1e-9,
            sqrt: 1e-8,
            tp: 1e-9,
            fix: 1e-8,
            peri: 1e-6,
            rank: 1e-8,
            cont: 1e-6,
            nd: 1e-9,
            filter: 1e-12,
        }
    }
}

static GLOBAL: RwLock<Option<Tolerances>> = RwLock::new(None);

/// Current process-wide tolerances.
pub fn tolerances() -> Tolerances {
    GLOBAL
        .read()
        .ok()
        .and_then(|g| *g)
        .unwrap_or_default()
}

/// Replace the process-wide tolerances.
pub fn set_tolerances(tol: Tolerances) {
    if let Ok(mut g) = GLOBAL.write() {
        *g = Some(tol);
    }
}
