//! JSON input files and output helpers.

use std::path::Path;

use heisgeo::{Error, LatticeSpec, MetricMatrix, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};

/// `{ "n": …, "lattice": [...], "matrix": [[...], ...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricInput {
    pub n: usize,
    pub lattice: Vec<u64>,
    pub matrix: Vec<Vec<f64>>,
}

pub fn matrix_from_rows(n: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let dim = 2 * n + 1;
    if n == 0 || rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidMetric(format!(
            "expected a {dim}x{dim} matrix for n = {n}"
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

impl MetricInput {
    pub fn metric(&self) -> Result<MetricMatrix> {
        MetricMatrix::new(matrix_from_rows(self.n, &self.matrix)?)
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec> {
        if self.lattice.len() != self.n {
            return Err(Error::InvalidLattice(format!(
                "lattice has {} entries, expected n = {}",
                self.lattice.len(),
                self.n
            )));
        }
        LatticeSpec::new(self.lattice.clone())
    }
}

/// Reading or parsing failed before any geometry was attempted.
#[derive(Debug)]
pub struct InputError(pub String);

pub fn read_text(path: &Path) -> std::result::Result<String, InputError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)
            .map_err(|e| InputError(format!("reading stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> std::result::Result<T, InputError> {
    serde_json::from_str(text).map_err(|e| InputError(format!("invalid input JSON: {e}")))
}

/// Pretty JSON with a trailing newline, the format of every shipped file.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

/// An `f64` that serialises non-finite values as the strings `"inf"`,
/// `"-inf"` and `"nan"`, and `-0.0` as `0.0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(if v == 0.0 { 0.0 } else { v })
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

pub fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<Real>> {
    m.row_iter()
        .map(|r| r.iter().copied().map(Real).collect())
        .collect()
}

/// Parses `"1.5,-2,0"`.
pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, InputError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| InputError(format!("'{t}' is not a finite number")))
        })
        .collect()
}
