//! Parsers for command-line values: states, seed ranges, observables.

use qtraj_core::ergodic::StateFunctional;
use qtraj_core::linalg::{c, diag, CVector};
use qtraj_core::{DensityMatrix, Error, Result};

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad number {x:?}: {e}"))))
        .collect()
}

/// `mixed`, `basis:k`, `diag:p1,p2,...` or `pure:a1,a2,...` (real
/// amplitudes, normalized).
pub fn parse_state(spec: &str, d: usize) -> Result<DensityMatrix> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let check_len = |n: usize| {
        if n == d {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: d, found: n })
        }
    };
    match kind {
        "mixed" => Ok(DensityMatrix::maximally_mixed(d)),
        "basis" => {
            let k: usize = arg.parse().map_err(|_| Error::Parse(format!("bad basis index in {spec:?}")))?;
            if k >= d {
                return Err(Error::InvalidArgument(format!("basis index {k} out of range for dimension {d}")));
            }
            Ok(DensityMatrix::basis(d, k))
        }
        "diag" => {
            let p = numbers(arg)?;
            check_len(p.len())?;
            DensityMatrix::new(diag(&p))
        }
        "pure" => {
            let a = numbers(arg)?;
            check_len(a.len())?;
            DensityMatrix::pure(&CVector::from_iterator(d, a.iter().map(|&x| c(x, 0.0))))
        }
        _ => Err(Error::Parse(format!("unknown state {spec:?} (expected mixed, basis:k, diag:..., pure:...)"))),
    }
}

/// `A..B` (end exclusive) or a single seed.
pub fn parse_seeds(spec: &str) -> std::result::Result<std::ops::Range<u64>, String> {
    let parse = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("bad seed {s:?}: {e}"));
    match spec.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b)?);
            if a >= b {
                return Err(format!("empty seed range {spec}"));
            }
            Ok(a..b)
        }
        None => {
            let a = parse(spec)?;
            Ok(a..a + 1)
        }
    }
}

/// `purity`, `entropy`, `max-eig` or `diag:a1,a2,...` for `tr(diag(a) rho)`.
pub fn parse_observable(spec: &str, d: usize) -> Result<StateFunctional> {
    match spec.split_once(':') {
        None => match spec {
            "purity" => Ok(StateFunctional::Purity),
            "entropy" => Ok(StateFunctional::VonNeumannEntropy),
            "max-eig" => Ok(StateFunctional::MaxEigenvalue),
            _ => Err(Error::Parse(format!("unknown observable {spec:?}"))),
        },
        Some(("diag", arg)) => {
            let a = numbers(arg)?;
            if a.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: a.len() });
            }
            StateFunctional::linear(diag(&a))
        }
        _ => Err(Error::Parse(format!("unknown observable {spec:?}"))),
    }
}

/// File-name friendly form of an observable spec.
pub fn slug(spec: &str) -> String {
    spec.chars().map(|ch| if ch.is_ascii_alphanumeric() || ch == '-' { ch } else { '_' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn states() {
        assert_eq!(parse_state("mixed", 3).unwrap(), DensityMatrix::maximally_mixed(3));
        assert_eq!(parse_state("basis:1", 2).unwrap(), DensityMatrix::basis(2, 1));
        assert_eq!(parse_state("diag:0.8,0.2", 2).unwrap(), DensityMatrix::diagonal(&[0.8, 0.2]).unwrap());
        let plus = parse_state("pure:1,1", 2).unwrap();
        assert!((plus.matrix()[(0, 1)].re - 0.5).abs() < 1e-15);
        assert!(parse_state("basis:2", 2).is_err());
        assert!(parse_state("diag:0.5,0.6", 2).is_err());
        assert!(parse_state("diag:1", 2).is_err());
        assert!(parse_state("thermal", 2).is_err());
    }

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("3..7").unwrap(), 3..7);
        assert_eq!(parse_seeds("5").unwrap(), 5..6);
        assert!(parse_seeds("7..7").is_err());
        assert!(parse_seeds("a..3").is_err());
    }

    #[test]
    fn observables() {
        assert_eq!(parse_observable("purity", 2).unwrap(), StateFunctional::Purity);
        assert!(matches!(parse_observable("diag:1,-1", 2).unwrap(), StateFunctional::Linear(_)));
        assert!(parse_observable("diag:2,0", 2).is_err());
        assert!(parse_observable("energy", 2).is_err());
        assert_eq!(slug("diag:1,-1"), "diag_1_-1");
    }
}
