use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::QuantError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// Entropies on the diagonal, mutual information off it.
    Characteristic,
    /// Variances on the diagonal, absolute covariances off it.
    Covariance,
    Binary,
}

impl std::fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatrixKind::Characteristic => "characteristic",
            MatrixKind::Covariance => "covariance",
            MatrixKind::Binary => "binary",
        })
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = QuantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "characteristic" => Ok(MatrixKind::Characteristic),
            "covariance" => Ok(MatrixKind::Covariance),
            "binary" => Ok(MatrixKind::Binary),
            other => Err(QuantError::Parse(format!("unknown matrix kind `{other}`"))),
        }
    }
}

/// Slack for symmetry and range checks on stored entries.
const ENTRY_TOL: f64 = 1e-9;

/// A symmetric qubit- or node-level correlation matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct CorrelationMatrix {
    kind: MatrixKind,
    size: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    kind: MatrixKind,
    size: usize,
    entries: Vec<Vec<f64>>,
}

impl TryFrom<RawMatrix> for CorrelationMatrix {
    type Error = QuantError;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        if raw.entries.len() != raw.size {
            return Err(QuantError::NotSquare {
                rows: raw.entries.len(),
                cols: raw.size,
            });
        }
        CorrelationMatrix::from_rows(raw.kind, raw.entries)
    }
}

impl From<CorrelationMatrix> for RawMatrix {
    fn from(m: CorrelationMatrix) -> Self {
        RawMatrix {
            kind: m.kind,
            size: m.size,
            entries: m.rows(),
        }
    }
}

impl CorrelationMatrix {
    /// Validates squareness, symmetry and the per-kind entry range. Slightly
    /// negative characteristic entries (rounding in plug-in estimates) are
    /// clamped to zero.
    pub fn from_rows(kind: MatrixKind, rows: Vec<Vec<f64>>) -> Result<Self, QuantError> {
        let size = rows.len();
        let mut entries = Vec::with_capacity(size * size);
        for row in &rows {
            if row.len() != size {
                return Err(QuantError::NotSquare {
                    rows: size,
                    cols: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_flat(kind, size, entries)
    }

    pub fn from_flat(kind: MatrixKind, size: usize, mut entries: Vec<f64>) -> Result<Self, QuantError> {
        if entries.len() != size * size {
            return Err(QuantError::NotSquare {
                rows: size,
                cols: entries.len().checked_div(size).unwrap_or(0),
            });
        }
        for i in 0..size {
            for j in 0..size {
                let v = entries[i * size + j];
                let bad = |reason: &'static str| QuantError::InvalidEntry {
                    row: i,
                    col: j,
                    value: v,
                    reason,
                };
                if !v.is_finite() {
                    return Err(bad("not finite"));
                }
                if (v - entries[j * size + i]).abs() > ENTRY_TOL {
                    return Err(bad("matrix is not symmetric"));
                }
                match kind {
                    MatrixKind::Binary if v != 0.0 && v != 1.0 => return Err(bad("binary entries must be 0 or 1")),
                    MatrixKind::Characteristic if v < -ENTRY_TOL => return Err(bad("negative entropy or information")),
                    MatrixKind::Covariance if !(-ENTRY_TOL..=1.0 + ENTRY_TOL).contains(&v) => {
                        return Err(bad("covariance entries must lie in [0, 1]"))
                    }
                    _ => {}
                }
            }
        }
        if kind != MatrixKind::Binary {
            entries.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(Self { kind, size, entries })
    }

    pub fn zeros(kind: MatrixKind, size: usize) -> Self {
        Self {
            kind,
            size,
            entries: vec![0.0; size * size],
        }
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// Sets `(i, j)` and `(j, i)`.
    pub(crate) fn set_sym(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.size + j] = value;
        self.entries[j * self.size + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.entries
    }

    /// Entry `(i, j)` of the result is entry `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.size, "permutation length");
        let n = self.size;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self {
            kind: self.kind,
            size: n,
            entries,
        }
    }

    /// `1` where the entry strictly exceeds `threshold`, `0` elsewhere.
    pub fn binarize(&self, threshold: Threshold) -> CorrelationMatrix {
        let t = threshold.value();
        CorrelationMatrix {
            kind: MatrixKind::Binary,
            size: self.size,
            entries: self.entries.iter().map(|&v| if v > t { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Frobenius distance to `ideal`.
    pub fn inference_error(&self, ideal: &CorrelationMatrix) -> Result<f64, QuantError> {
        if self.size != ideal.size {
            return Err(QuantError::SizeMismatch {
                left: self.size,
                right: ideal.size,
            });
        }
        if self.kind != ideal.kind {
            return Err(QuantError::KindMismatch {
                left: self.kind,
                right: ideal.kind,
            });
        }
        Ok(self
            .entries
            .iter()
            .zip(&ideal.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Row-major CSV with 17 significant digits per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.size {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(kind: MatrixKind, text: &str) -> Result<Self, QuantError> {
        let mut rows = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|cell| {
                    cell.trim().parse::<f64>().map_err(|e| {
                        QuantError::Parse(format!("line {}: `{}`: {e}", line_no + 1, cell.trim()))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(kind, rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, QuantError> {
        serde_json::from_str(text).map_err(|e| QuantError::Parse(e.to_string()))
    }
}

/// Binarization cut-off τ.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub const DEFAULT: Threshold = Threshold(0.05);

    pub fn new(value: f64) -> Result<Self, QuantError> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(QuantError::InvalidThreshold(value))
        }
    }

    /// `τ = z / √shots`, a z-score cut on a unit-variance statistic.
    pub fn from_z_score(z: f64, shots: u64) -> Result<Self, QuantError> {
        if shots == 0 {
            return Err(QuantError::InvalidThreshold(f64::INFINITY));
        }
        Self::new(z * (1.0 / shots as f64).sqrt())
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for Threshold {
    type Error = QuantError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Threshold::new(v)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}
