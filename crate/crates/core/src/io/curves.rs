use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named table of equally long columns; the first column is the abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub name: String,
    pub columns: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl CurveSet {
    pub fn new(name: impl Into<String>, columns: Vec<String>, data: Vec<Vec<f64>>) -> Result<Self> {
        let set = Self {
            name: name.into(),
            columns,
            data,
        };
        set.validate()?;
        Ok(set)
    }

    /// Builds from the abscissa plus named series.
    pub fn from_series(name: impl Into<String>, x_label: &str, x: Vec<f64>, series: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut columns = vec![x_label.to_string()];
        let mut data = vec![x];
        for (label, values) in series {
            columns.push(label);
            data.push(values);
        }
        Self::new(name, columns, data)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() < 2 {
            return Err(Error::validation(
                "curves",
                format!("curve set '{}' needs an abscissa and at least one series", self.name),
            ));
        }
        if self.columns.len() != self.data.len() {
            return Err(Error::validation(
                "curves",
                format!("{} column names for {} columns", self.columns.len(), self.data.len()),
            ));
        }
        let len = self.data[0].len();
        if len == 0 {
            return Err(Error::validation("curves", format!("curve set '{}' is empty", self.name)));
        }
        if let Some(j) = self.data.iter().position(|c| c.len() != len) {
            return Err(Error::validation(
                "curves",
                format!("column '{}' has {} rows, expected {len}", self.columns[j], self.data[j].len()),
            ));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == label).map(|j| self.data[j].as_slice())
    }
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with a header row and LF line endings.
pub fn write_csv(curves: &CurveSet, path: &Path) -> Result<()> {
    curves.validate()?;
    let io = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    w.write_record(&curves.columns).map_err(io)?;
    for i in 0..curves.rows() {
        w.write_record(curves.data.iter().map(|c| format_value(c[i]))).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn read_csv(path: &Path) -> Result<CurveSet> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut data = vec![Vec::new(); columns.len()];
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        for (j, field) in record.iter().enumerate() {
            let v = field.trim().parse::<f64>().map_err(|_| {
                Error::Parse(format!("{}: row {}: '{field}' is not a number", path.display(), line + 2))
            })?;
            data[j].push(v);
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    CurveSet::new(name, columns, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let x: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 * 0.0411).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 3.7).sin() / 3.0 + 1e-300).collect();
        let set = CurveSet::from_series("c", "y", x, vec![("U1".into(), y)]).unwrap();
        write_csv(&set, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("y,U1\n"));
        assert!(!text.contains('\r'));
        let back = read_csv(&path).unwrap();
        assert_eq!(back.data, set.data);
        assert_eq!(back.columns, set.columns);
    }

    #[test]
    fn empty_and_ragged_sets_are_rejected() {
        assert!(CurveSet::new("e", vec!["x".into()], vec![vec![]]).is_err());
        assert!(CurveSet::new("e", vec!["x".into(), "u".into()], vec![vec![], vec![]]).is_err());
        assert!(CurveSet::new("r", vec!["x".into(), "u".into()], vec![vec![1.0], vec![]]).is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let set = CurveSet::from_series("c", "x", vec![0.0], vec![("u".into(), vec![1.0])]).unwrap();
        let err = write_csv(&set, Path::new("/nonexistent-dir/x/c.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
