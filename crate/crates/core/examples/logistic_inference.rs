//! Interval trace for logistic regression with AR(1) covariates, written as
//! CSV to stdout.

use sa_inference::harness::trace::write_trace;
use sa_inference::harness::{single_run, ExperimentConfig};

fn main() -> sa_inference::Result<()> {
    let cfg = ExperimentConfig::parse(
        r#"
problem.kind = "logistic_ar"
problem.d = 5
schedule.eta_scale = 1.0
schedule.alpha = 0.501
run.steps = 43000
run.warmup = 3000
run.reps = 1
run.seed = 4
inference.m = [2, "inf"]
"#,
    )?;
    let trace = single_run(&cfg, 0, 2_000)?;
    write_trace(&trace, std::io::stdout().lock())
}
