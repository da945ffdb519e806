//! Coverage reports and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::inference::Functional;

pub const REPORT_HEADER: [&str; 9] = [
    "method",
    "m",
    "T",
    "reps",
    "failed",
    "coverage",
    "mean_length",
    "std_length",
    "seed",
];

/// One (method, m, horizon) cell of a coverage study.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    /// `None` for methods without a functional index (bootstrap).
    pub m: Option<Functional>,
    /// Total steps at evaluation, warm-up included.
    pub steps: usize,
    pub reps: usize,
    /// Repetitions excluded from the statistics (divergence, too few chains).
    pub failed: usize,
    /// Fraction of the surviving repetitions whose interval held the target.
    pub coverage: f64,
    pub mean_length: f64,
    /// Sample standard deviation of the interval lengths.
    pub std_length: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoverageReport {
    pub rows: Vec<ReportRow>,
}

impl CoverageReport {
    pub fn find(&self, method: &str, m: Option<Functional>, steps: usize) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.m == m && r.steps == steps)
    }
}

/// `x` with `digits` significant digits, fixed notation for moderate
/// exponents and `1.5e-7` style otherwise, trailing zeros dropped.
pub fn format_significant(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn sig6(x: f64) -> String {
    format_significant(x, 6)
}

pub fn write_report<W: Write>(report: &CoverageReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse {
        what: "report csv",
        reason: e.to_string(),
    };
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([
            r.method.clone(),
            r.m.map(|m| m.to_string()).unwrap_or_default(),
            r.steps.to_string(),
            r.reps.to_string(),
            r.failed.to_string(),
            sig6(r.coverage),
            sig6(r.mean_length),
            sig6(r.std_length),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn report_to_string(report: &CoverageReport) -> String {
    let mut buf = Vec::new();
    write_report(report, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

pub fn emit_report(report: &CoverageReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_report(report, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_report<R: Read>(input: R) -> Result<CoverageReport> {
    let bad = |reason: String| Error::Parse {
        what: "report csv",
        reason,
    };
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(REPORT_HEADER) {
        return Err(bad(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let rec = record.map_err(|e| bad(e.to_string()))?;
        let int = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .map_err(|_| bad(format!("{} `{}`", REPORT_HEADER[i], &rec[i])))
        };
        let float = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| bad(format!("{} `{}`", REPORT_HEADER[i], &rec[i])))
        };
        rows.push(ReportRow {
            method: rec[0].to_string(),
            m: match &rec[1] {
                "" => None,
                s => Some(s.parse()?),
            },
            steps: int(2)?,
            reps: int(3)?,
            failed: int(4)?,
            coverage: float(5)?,
            mean_length: float(6)?,
            std_length: float(7)?,
            seed: rec[8]
                .parse()
                .map_err(|_| bad(format!("seed `{}`", &rec[8])))?,
        });
    }
    Ok(CoverageReport { rows })
}

pub fn load_report(path: &Path) -> Result<CoverageReport> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_report(file)
}
