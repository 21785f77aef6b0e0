//! Report writers. Floats are always printed with 17 significant digits so
//! identical runs produce byte-identical files that parse back exactly.

use std::io::{self, Write};
use std::path::Path;

use semispatial::lattice::format_f64;
use semispatial::ComponentCurve;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::CliError;

/// Pretty JSON with fixed-precision scientific floats.
struct FixedFloat<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloat<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_f64(v).as_bytes())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    std::fs::write(path, to_json(value)).map_err(|e| CliError::io(path, e))
}

/// One line of a curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub k: usize,
    pub x: f64,
    pub estimate: Option<f64>,
    pub centered_estimate: Option<f64>,
    pub n_effective: Option<usize>,
}

/// Tabulated nodes of each curve.
pub fn curve_rows(curves: &[ComponentCurve]) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for c in curves {
        for (i, &x) in c.grid.iter().enumerate() {
            rows.push(CurveRow {
                k: c.k,
                x,
                estimate: c.values[i].map(|v| v + c.offset),
                centered_estimate: c.values[i],
                n_effective: Some(c.n_effective[i]),
            });
        }
    }
    rows
}

pub fn write_curves(path: &Path, rows: &[CurveRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e.into()))?;
    let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
    w.write_record(["k", "x", "estimate", "centered_estimate", "n_effective"])
        .and_then(|_| {
            for r in rows {
                w.write_record([
                    r.k.to_string(),
                    format_f64(r.x),
                    opt(r.estimate),
                    opt(r.centered_estimate),
                    r.n_effective.map(|n| n.to_string()).unwrap_or_default(),
                ])?;
            }
            w.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CliError::io(path, e.into()))
}

#[cfg(test)]
pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e.into()))?;
    r.deserialize()
        .collect::<Result<Vec<CurveRow>, _>>()
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let s = to_json(&serde_json::json!({ "a": 0.1, "b": [1.0, -2.5e-300], "n": 3 }));
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("-2.5000000000000000e-300"));
        assert!(s.contains("\"n\": 3"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn non_finite_becomes_null() {
        assert!(to_json(&vec![f64::NAN]).contains("null"));
    }

    #[test]
    fn curve_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let rows = vec![
            CurveRow {
                k: 0,
                x: 0.1,
                estimate: Some(1.0 / 3.0),
                centered_estimate: Some(-2.0),
                n_effective: Some(12),
            },
            CurveRow {
                k: 1,
                x: 1e-7,
                estimate: None,
                centered_estimate: None,
                n_effective: None,
            },
        ];
        write_curves(&path, &rows).unwrap();
        assert_eq!(read_curves(&path).unwrap(), rows);
    }
}
