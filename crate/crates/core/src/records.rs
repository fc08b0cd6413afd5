//! Per-step logs and their CSV/JSON serialization.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::error::{GbtError, Result};

pub const CSV_HEADER: &str = "k,t,target_x,target_y,auv_x,auv_y,auv_psi,u,v,r,tau_u_max_abs,tau_v_max_abs,tau_r_max_abs,bearing_x,bearing_y,avg_err,bound,ccbm,cost,penalty,iters,ms";

/// One control step of an episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub target_x: f64,
    pub target_y: f64,
    /// AUV pose and body velocity at `t`, when the bearing is taken.
    pub auv_x: f64,
    pub auv_y: f64,
    pub auv_psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    /// Largest applied wrench magnitude over `[t, t + T]`.
    pub tau_u_max_abs: f64,
    pub tau_v_max_abs: f64,
    pub tau_r_max_abs: f64,
    pub bearing_x: f64,
    pub bearing_y: f64,
    pub avg_err: f64,
    pub bound: f64,
    pub ccbm: f64,
    pub cost: f64,
    pub penalty: f64,
    pub iters: usize,
    pub ms: f64,
}

impl StepRecord {
    fn fields(&self) -> [Field; 22] {
        use Field::{F, I};
        [
            I(self.k),
            F(self.t),
            F(self.target_x),
            F(self.target_y),
            F(self.auv_x),
            F(self.auv_y),
            F(self.auv_psi),
            F(self.u),
            F(self.v),
            F(self.r),
            F(self.tau_u_max_abs),
            F(self.tau_v_max_abs),
            F(self.tau_r_max_abs),
            F(self.bearing_x),
            F(self.bearing_y),
            F(self.avg_err),
            F(self.bound),
            F(self.ccbm),
            F(self.cost),
            F(self.penalty),
            I(self.iters),
            F(self.ms),
        ]
    }
}

enum Field {
    I(usize),
    F(f64),
}

impl Field {
    fn write(&self, out: &mut String) {
        match self {
            Field::I(v) => write!(out, "{v}").unwrap(),
            Field::F(v) => out.push_str(&format_g9(*v)),
        }
    }
}

/// `%.9g`: nine significant digits, trailing zeros trimmed, exponent form
/// outside `[1e-5, 1e9)`. Non-finite values print as `inf`, `-inf`, `nan`.
pub fn format_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn records_to_csv(records: &[StepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        for (i, f) in r.fields().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            f.write(&mut out);
        }
        out.push('\n');
    }
    out
}

/// JSON array of objects keyed by the CSV columns. Numbers use the same
/// formatting as the CSV; non-finite values become strings.
pub fn records_to_json(records: &[StepRecord]) -> String {
    let names: Vec<&str> = CSV_HEADER.split(',').collect();
    let mut out = String::from("[");
    for (j, r) in records.iter().enumerate() {
        out.push_str(if j == 0 { "\n  {" } else { ",\n  {" });
        for (i, f) in r.fields().iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write!(out, "\"{}\": ", names[i]).unwrap();
            match f {
                Field::F(v) if !v.is_finite() => write!(out, "\"{}\"", format_g9(*v)).unwrap(),
                _ => f.write(&mut out),
            }
        }
        out.push('}');
    }
    out.push_str(if records.is_empty() { "]\n" } else { "\n]\n" });
    out
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> GbtError {
    GbtError::Io {
        context: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `<stem>.csv` or `<stem>.json` into `out_dir`, creating it if needed.
pub fn write_records(
    records: &[StepRecord],
    format: OutputFormat,
    out_dir: &Path,
    stem: &str,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let (path, body) = match format {
        OutputFormat::Csv => (out_dir.join(format!("{stem}.csv")), records_to_csv(records)),
        OutputFormat::Json => (
            out_dir.join(format!("{stem}.json")),
            records_to_json(records),
        ),
    };
    std::fs::write(&path, body).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

/// Parses a CSV produced by [`records_to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<StepRecord>> {
    let bad = |line: usize, msg: &str| GbtError::Io {
        context: format!("csv line {line}"),
        message: msg.to_string(),
    };
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 22 {
                return Err(bad(i + 2, "expected 22 columns"));
            }
            let f = |j: usize| cols[j].parse::<f64>().map_err(|_| bad(i + 2, "bad number"));
            let u = |j: usize| {
                cols[j]
                    .parse::<usize>()
                    .map_err(|_| bad(i + 2, "bad integer"))
            };
            Ok(StepRecord {
                k: u(0)?,
                t: f(1)?,
                target_x: f(2)?,
                target_y: f(3)?,
                auv_x: f(4)?,
                auv_y: f(5)?,
                auv_psi: f(6)?,
                u: f(7)?,
                v: f(8)?,
                r: f(9)?,
                tau_u_max_abs: f(10)?,
                tau_v_max_abs: f(11)?,
                tau_r_max_abs: f(12)?,
                bearing_x: f(13)?,
                bearing_y: f(14)?,
                avg_err: f(15)?,
                bound: f(16)?,
                ccbm: f(17)?,
                cost: f(18)?,
                penalty: f(19)?,
                iters: u(20)?,
                ms: f(21)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(k: usize) -> StepRecord {
        StepRecord {
            k,
            t: k as f64 * 0.1,
            target_x: -1.0 + 0.05 * k as f64,
            target_y: 1.0 / 3.0,
            auv_x: 1.5,
            auv_y: 0.0,
            auv_psi: std::f64::consts::FRAC_PI_2,
            u: 0.0,
            v: -1e-7,
            r: 12345678901.0,
            tau_u_max_abs: 4999.5,
            tau_v_max_abs: 0.0,
            tau_r_max_abs: 1.0,
            bearing_x: 0.6,
            bearing_y: 0.8,
            avg_err: 0.25,
            bound: 3.3,
            ccbm: f64::INFINITY,
            cost: -4.9,
            penalty: 0.0,
            iters: 17,
            ms: 0.0,
        }
    }

    #[test]
    fn g9_formatting() {
        assert_eq!(format_g9(0.0), "0");
        assert_eq!(format_g9(1.0), "1");
        assert_eq!(format_g9(0.1), "0.1");
        assert_eq!(format_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_g9(-2.0 / 3.0), "-0.666666667");
        assert_eq!(format_g9(123456789.0), "123456789");
        assert_eq!(format_g9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_g9(1e-7), "1e-07");
        assert_eq!(format_g9(0.0001), "0.0001");
        assert_eq!(format_g9(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_g9(f64::INFINITY), "inf");
    }

    proptest! {
        #[test]
        fn g9_has_nine_digit_precision(x in -1e12f64..1e12) {
            let back: f64 = format_g9(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 5e-9 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn empty_run_is_header_only() {
        assert_eq!(records_to_csv(&[]), format!("{CSV_HEADER}\n"));
        assert_eq!(records_to_json(&[]), "[]\n");
    }

    #[test]
    fn line_count_and_round_trip() {
        let recs: Vec<_> = (0..200).map(sample).collect();
        let csv = records_to_csv(&recs);
        assert_eq!(csv.lines().count(), 201);
        let back = parse_csv(&csv).unwrap();
        assert_eq!(records_to_csv(&back), csv);
        assert_eq!(back[3].iters, 17);
        assert!(back[3].ccbm.is_infinite());
    }

    #[test]
    fn json_mirrors_columns() {
        let recs: Vec<_> = (0..3).map(sample).collect();
        let v: serde_json::Value = serde_json::from_str(&records_to_json(&recs)).unwrap();
        let arr = v.as_array().unwrap();
        assert_eq!(arr.len(), 3);
        let keys: Vec<&str> = arr[0]
            .as_object()
            .unwrap()
            .keys()
            .map(|s| s.as_str())
            .collect();
        let mut expected: Vec<&str> = CSV_HEADER.split(',').collect();
        expected.sort();
        let mut got = keys.clone();
        got.sort();
        assert_eq!(got, expected);
        assert_eq!(arr[1]["ccbm"], "inf");
        assert_eq!(arr[2]["k"], 2);
    }

    #[test]
    fn io_errors_carry_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = write_records(&[], OutputFormat::Csv, &blocker.join("sub"), "run").unwrap_err();
        match err {
            GbtError::Io { context, .. } => assert!(context.contains("file")),
            e => panic!("{e:?}"),
        }
    }
}
