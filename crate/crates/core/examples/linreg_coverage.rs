//! Coverage of random-scaling intervals for linear regression with AR(1)
//! noise, for every tabulated functional.
//!
//! cargo run --release --example linreg_coverage -- [reps]

use sa_inference::harness::report::report_to_string;
use sa_inference::harness::{run_coverage, ExperimentConfig};

fn main() -> sa_inference::Result<()> {
    let reps: usize = std::env::args().nth(1).map_or(100, |a| a.parse().expect("integer reps"));
    let cfg = ExperimentConfig::parse(&format!(
        r#"
problem.kind = "linreg_ar"
problem.d = 10
problem.rho_eps = 0.9
schedule.eta_scale = 0.31622776601683794
schedule.alpha = 0.505
run.steps = 10000
run.warmup = 500
run.reps = {reps}
run.seed = 1
inference.m = [1, 2, 3, 4, 6, "inf"]
inference.rules = ["rectangle", "exact"]
"#
    ))?;
    print!("{}", report_to_string(&run_coverage(&cfg)?));
    Ok(())
}
