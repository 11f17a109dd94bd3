//! Text and CSV artifacts with a one-line `# key=value` metadata header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use qtraj_core::random::RNG_ALGORITHM;
use qtraj_core::{CMatrix, Result, Tolerances};

#[derive(Debug, Clone, Default)]
pub struct Metadata {
    pairs: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.push("tool", concat!("qtraj ", env!("CARGO_PKG_VERSION")));
        m.push("command", command);
        m.push("rng", RNG_ALGORITHM);
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.pairs.push((key.to_string(), value.to_string()));
        self
    }

    pub fn tolerances(&mut self, tol: &Tolerances) -> &mut Self {
        for (k, v) in [
            ("tol_herm", tol.herm),
            ("tol_tr", tol.tr),
            ("tol_psd", tol.psd),
            ("tol_sqrt", tol.sqrt),
            ("tol_tp", tol.tp),
            ("tol_fix", tol.fix),
            ("tol_peri", tol.peri),
            ("tol_rank", tol.rank),
            ("tol_cont", tol.cont),
            ("tol_nd", tol.nd),
            ("tol_filter", tol.filter),
        ] {
            self.push(k, format!("{v:e}"));
        }
        self
    }

    pub fn timestamp(&mut self) -> &mut Self {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.push("timestamp_unix", secs)
    }

    /// `# k=v k=v ...` with spaces inside values replaced by `_`.
    pub fn header(&self) -> String {
        let body: Vec<String> = self.pairs.iter().map(|(k, v)| format!("{k}={}", v.replace(' ', "_"))).collect();
        format!("# {}\n", body.join(" "))
    }
}

pub fn complex(z: qtraj_core::C64) -> String {
    let im = num(z.im);
    let sign = if im.starts_with('-') { "" } else { "+" };
    format!("{}{sign}{im}i", num(z.re))
}

/// Matrix block: a `[name]` line followed by comma-separated rows.
pub fn matrix_block(name: &str, m: &CMatrix) -> String {
    let mut s = format!("[{name}]\n");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| complex(m[(i, j)])).collect();
        let _ = writeln!(s, "{}", row.join(", "));
    }
    s
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(meta: &Metadata, columns: &[&str]) -> Self {
        Self { text: format!("{}{}\n", meta.header(), columns.join(",")) }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}
