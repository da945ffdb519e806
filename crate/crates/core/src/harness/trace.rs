//! One trajectory with its interval recorded along the way.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::coverage::{critical_value_table, estimators, run_repetition_at};
use crate::harness::report::format_significant;
use crate::inference::Functional;

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    /// Total steps so far, warm-up included.
    pub steps: usize,
    pub method: &'static str,
    pub m: Option<Functional>,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub target: f64,
    /// `None` if the run diverged.
    pub points: Option<Vec<TracePoint>>,
}

/// Evaluation points `warmup + every, warmup + 2·every, …`, always ending
/// at `steps`.
pub fn trace_points(warmup: usize, steps: usize, every: usize) -> Vec<usize> {
    let every = every.max(1);
    let mut pts: Vec<usize> = (warmup + every..=steps).step_by(every).collect();
    if pts.last() != Some(&steps) {
        pts.push(steps);
    }
    pts
}

/// Runs repetition `rep` of `cfg` once, recording every estimator's
/// interval each `every` post-warm-up steps.
pub fn single_run(cfg: &ExperimentConfig, rep: usize, every: usize) -> Result<Trace> {
    cfg.validate()?;
    let table = critical_value_table(cfg)?;
    let est = estimators(cfg, &table)?;
    let pts = trace_points(cfg.run.warmup, cfg.run.steps, every);
    let res = run_repetition_at(cfg, &est, rep, &pts)?;
    let points = res.cells.map(|cells| {
        let mut out = Vec::with_capacity(cells.len());
        for (i, &steps) in pts.iter().enumerate() {
            for (j, e) in est.iter().enumerate() {
                if let Some(ci) = cells[i * est.len() + j] {
                    out.push(TracePoint {
                        steps,
                        method: e.method(),
                        m: e.functional(),
                        estimate: ci.center,
                        lower: ci.lower,
                        upper: ci.upper,
                    });
                }
            }
        }
        out
    });
    Ok(Trace {
        target: res.target,
        points,
    })
}

/// CSV with header `T,method,m,estimate,lower,upper,target`.
pub fn write_trace<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse {
        what: "trace csv",
        reason: e.to_string(),
    };
    w.write_record(["T", "method", "m", "estimate", "lower", "upper", "target"])
        .map_err(csv_err)?;
    let target = format_significant(trace.target, 10);
    for p in trace.points.iter().flatten() {
        w.write_record([
            p.steps.to_string(),
            p.method.to_string(),
            p.m.map(|m| m.to_string()).unwrap_or_default(),
            format_significant(p.estimate, 10),
            format_significant(p.lower, 10),
            format_significant(p.upper, 10),
            target.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn emit_trace(trace: &Trace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(trace, std::io::BufWriter::new(file))
}
