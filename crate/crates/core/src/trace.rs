//! Sampled 1-D measurement/simulation series and their CSV schema.
//!
//! The CSV schema is shared by the scan simulator output and measured-data
//! ingestion:
//!
//! ```text
//! # key=value          (metadata lines, any number)
//! wavelength_nm,transmission
//! 1549.9,0.98
//! ...
//! ```
//!
//! Exactly two numeric columns, strictly monotone x. The first column header
//! names the x-axis kind and unit.

use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XKind {
    WavelengthNm,
    TimeS,
    FrequencyHz,
    PowerMw,
}

impl XKind {
    pub fn column_label(&self) -> &'static str {
        match self {
            XKind::WavelengthNm => "wavelength_nm",
            XKind::TimeS => "time_s",
            XKind::FrequencyHz => "frequency_hz",
            XKind::PowerMw => "power_mw",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "wavelength_nm" => Some(XKind::WavelengthNm),
            "time_s" => Some(XKind::TimeS),
            "frequency_hz" => Some(XKind::FrequencyHz),
            "power_mw" => Some(XKind::PowerMw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub x_kind: XKind,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Free-form metadata (scan speed, power, RBW, ...), kept in insertion order.
    pub meta: Vec<(String, String)>,
}

impl Trace {
    pub fn new(x_kind: XKind, y_label: &str, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Config(format!(
                "trace x/y length mismatch: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::Config("trace needs at least two samples".into()));
        }
        let increasing = x.windows(2).all(|w| w[1] > w[0]);
        let decreasing = x.windows(2).all(|w| w[1] < w[0]);
        if !increasing && !decreasing {
            return Err(Error::Config("trace x axis must be strictly monotone".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("trace samples must be finite".into()));
        }
        Ok(Self { x_kind, y_label: y_label.to_string(), x, y, meta: Vec::new() })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Returns a copy sorted by ascending x.
    pub fn ascending(&self) -> Trace {
        if self.x.windows(2).all(|w| w[1] > w[0]) {
            return self.clone();
        }
        let mut t = self.clone();
        t.x.reverse();
        t.y.reverse();
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{},{}", self.x_kind.column_label(), self.y_label);
        for (x, y) in self.x.iter().zip(self.y.iter()) {
            let _ = writeln!(out, "{x},{y}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Trace> {
        let mut meta = Vec::new();
        let mut header: Option<(XKind, String)> = None;
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut prev_x: Option<f64> = None;
        let mut direction: Option<bool> = None; // Some(true) = increasing

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some((k, v)) = rest.split_once('=') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if header.is_none() {
                let Some((xl, yl)) = line.split_once(',') else {
                    return Err(Error::Schema {
                        line: line_no,
                        msg: "header must have two comma-separated column labels".into(),
                    });
                };
                let kind = XKind::from_label(xl.trim()).ok_or_else(|| Error::Schema {
                    line: line_no,
                    msg: format!(
                        "unknown x column `{}`; expected one of wavelength_nm, time_s, frequency_hz, power_mw",
                        xl.trim()
                    ),
                })?;
                header = Some((kind, yl.trim().to_string()));
                continue;
            }
            let mut fields = line.split(',');
            let (Some(xs), Some(ys), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Schema {
                    line: line_no,
                    msg: "data rows must have exactly two columns".into(),
                });
            };
            let xv: f64 = xs.trim().parse().map_err(|_| Error::Schema {
                line: line_no,
                msg: format!("`{}` is not a number", xs.trim()),
            })?;
            let yv: f64 = ys.trim().parse().map_err(|_| Error::Schema {
                line: line_no,
                msg: format!("`{}` is not a number", ys.trim()),
            })?;
            if !xv.is_finite() || !yv.is_finite() {
                return Err(Error::Schema { line: line_no, msg: "non-finite sample".into() });
            }
            if let Some(p) = prev_x {
                let inc = xv > p;
                if xv == p {
                    return Err(Error::Schema {
                        line: line_no,
                        msg: "x axis must be strictly monotone (duplicate value)".into(),
                    });
                }
                match direction {
                    None => direction = Some(inc),
                    Some(d) if d != inc => {
                        return Err(Error::Schema {
                            line: line_no,
                            msg: "x axis must be strictly monotone (direction change)".into(),
                        })
                    }
                    _ => {}
                }
            }
            prev_x = Some(xv);
            x.push(xv);
            y.push(yv);
        }

        let (kind, y_label) = header.ok_or(Error::Schema { line: 1, msg: "missing header row".into() })?;
        let mut t = Trace::new(kind, &y_label, x, y)?;
        t.meta = meta;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let t = Trace::new(XKind::WavelengthNm, "transmission", vec![1.0, 2.0, 3.5], vec![0.5, 0.25, 1.0])
            .unwrap()
            .with_meta("scan_speed_nm_per_s", 0.5)
            .with_meta("power_mw", 2);
        let back = Trace::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.x, t.x);
        assert_eq!(back.y, t.y);
        assert_eq!(back.meta, t.meta);
        assert_eq!(back.x_kind, t.x_kind);
        assert_eq!(back.y_label, t.y_label);
    }

    #[test]
    fn non_monotone_is_schema_error_with_line() {
        let text = "wavelength_nm,t\n1.0,0.0\n3.0,0.0\n2.0,0.0\n";
        match Trace::from_csv(text) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn decreasing_axis_is_accepted() {
        let text = "wavelength_nm,t\n3.0,0.0\n2.0,0.5\n1.0,1.0\n";
        let t = Trace::from_csv(text).unwrap();
        let a = t.ascending();
        assert_eq!(a.x, vec![1.0, 2.0, 3.0]);
        assert_eq!(a.y, vec![1.0, 0.5, 0.0]);
    }

    #[test]
    fn unknown_x_column_rejected() {
        assert!(matches!(
            Trace::from_csv("volts,t\n1,2\n2,3\n"),
            Err(Error::Schema { line: 1, .. })
        ));
    }
}
