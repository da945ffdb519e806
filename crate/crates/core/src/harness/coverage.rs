//! Monte-Carlo coverage studies.

use rayon::prelude::*;

use crate::bootstrap::{run_bootstrap, BootstrapEnsemble, Multiplier};
use crate::critical_values::CriticalValueTable;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Method};
use crate::harness::problem::{rep_seed, with_instance, Instance, InstanceVisitor};
use crate::harness::report::{CoverageReport, ReportRow};
use crate::inference::{ConfidenceInterval, Functional, IntegralRule, RandomScalingTracker};
use crate::rng::{derive_seed, label};
use crate::sa::{run, Oracle, StepSchedule};
use crate::streams::DataStream;

/// Largest tolerated fraction of failed repetitions per report row.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

/// One interval construction compared in a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    RandomScaling {
        functional: Functional,
        rule: IntegralRule,
        /// Two-sided critical value `q_{α,m}`.
        q: f64,
    },
    Bootstrap,
}

impl Estimator {
    /// Method column of the report.
    pub fn method(&self) -> &'static str {
        match self {
            Estimator::RandomScaling {
                rule: IntegralRule::Rectangle,
                ..
            } => "random_scaling",
            Estimator::RandomScaling {
                rule: IntegralRule::Exact,
                ..
            } => "random_scaling_exact",
            Estimator::Bootstrap => "bootstrap",
        }
    }

    pub fn functional(&self) -> Option<Functional> {
        match self {
            Estimator::RandomScaling { functional, .. } => Some(*functional),
            Estimator::Bootstrap => None,
        }
    }
}

/// The critical values named by the config, or the built-in table.
pub fn critical_value_table(cfg: &ExperimentConfig) -> Result<CriticalValueTable> {
    match &cfg.inference.critical_values {
        None => Ok(CriticalValueTable::embedded()),
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            CriticalValueTable::read_csv(file)
        }
    }
}

/// Estimators in report order: rules outermost, then functionals as listed.
pub fn estimators(cfg: &ExperimentConfig, table: &CriticalValueTable) -> Result<Vec<Estimator>> {
    let inf = &cfg.inference;
    match inf.method {
        Method::Bootstrap => Ok(vec![Estimator::Bootstrap]),
        Method::RandomScaling => {
            let mut out = Vec::new();
            for &rule in &inf.rules {
                for &functional in &inf.m {
                    let q = table.two_sided(functional, inf.alpha)?;
                    let e = Estimator::RandomScaling { functional, rule, q };
                    if !out.contains(&e) {
                        out.push(e);
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Interval per (checkpoint, estimator), row-major; `None` where the
/// estimator could not produce one.
pub type Cells = Vec<Option<ConfidenceInterval>>;

/// Outcome of one repetition: `None` if the SA iterate diverged.
#[derive(Debug, Clone, PartialEq)]
pub struct RepResult {
    pub target: f64,
    pub cells: Option<Cells>,
}

struct RepVisitor<'a> {
    schedule: &'a StepSchedule,
    steps: usize,
    warmup: usize,
    checkpoints: &'a [usize],
    estimators: &'a [Estimator],
    alpha: f64,
    chains: usize,
    seed: u64,
}

impl InstanceVisitor for RepVisitor<'_> {
    type Output = RepResult;

    fn visit<O, S>(self, inst: Instance<O, S>) -> Result<RepResult>
    where
        O: Oracle,
        O::Sample: Sync,
        S: DataStream<Sample = O::Sample>,
    {
        let target = inst.target;
        let cells = if self.estimators.contains(&Estimator::Bootstrap) {
            self.bootstrap(inst)?
        } else {
            self.random_scaling(inst)?
        };
        Ok(RepResult { target, cells })
    }
}

impl RepVisitor<'_> {
    fn random_scaling<O, S>(&self, mut inst: Instance<O, S>) -> Result<Option<Cells>>
    where
        O: Oracle,
        S: DataStream<Sample = O::Sample>,
    {
        let functionals: Vec<Functional> = self.estimators.iter().filter_map(Estimator::functional).collect();
        let needs_path = self.estimators.iter().any(|e| {
            matches!(
                e,
                Estimator::RandomScaling {
                    rule: IntegralRule::Exact,
                    ..
                }
            )
        });
        let mut tracker = RandomScalingTracker::new(inst.projection.clone(), &functionals, needs_path)?;
        let mut cells: Cells = Vec::with_capacity(self.checkpoints.len() * self.estimators.len());
        let mut pending = self.checkpoints.iter().peekable();
        let mut failure: Option<Error> = None;
        let level = 1.0 - self.alpha;
        let mut observer = |t: usize, _x: &[f64], xbar: &[f64]| {
            tracker.push(inst.projection.apply(xbar));
            if pending.next_if_eq(&&(self.warmup + t)).is_some() {
                for e in self.estimators {
                    if let Estimator::RandomScaling { functional, rule, q } = *e {
                        match tracker.interval(functional, rule, q, level) {
                            Ok(ci) => cells.push(Some(ci)),
                            Err(err) => {
                                failure.get_or_insert(err);
                            }
                        }
                    }
                }
            }
        };
        let outcome = run(
            &inst.oracle,
            &mut inst.stream,
            self.schedule,
            self.steps,
            self.warmup,
            inst.x0.clone(),
            &mut observer,
        );
        match outcome {
            Err(Error::Divergence { .. }) => return Ok(None),
            Err(e) => return Err(e),
            Ok(_) => {}
        }
        if let Some(err) = failure {
            return Err(err);
        }
        Ok(Some(cells))
    }

    fn bootstrap<O, S>(&self, mut inst: Instance<O, S>) -> Result<Option<Cells>>
    where
        O: Oracle,
        O::Sample: Sync,
        S: DataStream<Sample = O::Sample>,
    {
        let ensemble = BootstrapEnsemble::new(
            inst.x0.clone(),
            self.chains,
            self.warmup,
            Multiplier::ShiftedRademacher,
            derive_seed(self.seed, &[label::MULTIPLIER]),
        );
        let mut cells: Cells = Vec::with_capacity(self.checkpoints.len());
        let mut pending = self.checkpoints.iter().peekable();
        let projection = inst.projection.clone();
        let outcome = run_bootstrap(
            &inst.oracle,
            &mut inst.stream,
            self.schedule,
            self.steps,
            self.warmup,
            ensemble,
            |t, ens| {
                if pending.next_if_eq(&&(self.warmup + t)).is_some() {
                    match ens.interval(&projection, self.alpha) {
                        Ok(ci) => cells.push(Some(ci)),
                        Err(Error::InsufficientChains { .. }) => cells.push(None),
                        Err(e) => return Err(e),
                    }
                }
                Ok(())
            },
        );
        match outcome {
            Err(Error::Divergence { .. }) => Ok(None),
            Err(e) => Err(e),
            Ok(_) => Ok(Some(cells)),
        }
    }
}

/// Runs repetition `rep` of the study: the instance and all randomness come
/// from `rep_seed(cfg.run.seed, rep)`.
pub fn run_repetition(cfg: &ExperimentConfig, estimators: &[Estimator], rep: usize) -> Result<RepResult> {
    run_repetition_at(cfg, estimators, rep, &cfg.checkpoints())
}

/// Like [`run_repetition`] with explicit, strictly increasing evaluation
/// points in `(warmup, steps]`. The run stops at the last one.
pub fn run_repetition_at(
    cfg: &ExperimentConfig,
    estimators: &[Estimator],
    rep: usize,
    checkpoints: &[usize],
) -> Result<RepResult> {
    let seed = rep_seed(cfg.run.seed, rep);
    if checkpoints.windows(2).any(|w| w[0] >= w[1])
        || checkpoints.first().is_none_or(|&c| c <= cfg.run.warmup)
    {
        return Err(Error::invalid("checkpoints", "must be increasing and past the warm-up"));
    }
    let steps = *checkpoints.last().expect("checked non-empty");
    with_instance(
        &cfg.problem,
        seed,
        RepVisitor {
            schedule: &cfg.schedule,
            steps,
            warmup: cfg.run.warmup,
            checkpoints,
            estimators,
            alpha: cfg.inference.alpha,
            chains: cfg.inference.bootstrap_chains,
            seed,
        },
    )
}

/// Running sums for one report row. Merged in repetition order, so the
/// result does not depend on how repetitions were scheduled.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    ok: usize,
    covered: usize,
    sum: f64,
    sum_sq: f64,
}

impl Tally {
    fn add(&mut self, ci: &ConfidenceInterval, target: f64) {
        let len = ci.length();
        self.ok += 1;
        self.covered += usize::from(ci.contains(target));
        self.sum += len;
        self.sum_sq += len * len;
    }

    fn row(&self, method: &str, m: Option<Functional>, steps: usize, reps: usize, seed: u64) -> ReportRow {
        let n = self.ok as f64;
        let mean = self.sum / n;
        let std = if self.ok > 1 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0).sqrt()
        } else {
            0.0
        };
        ReportRow {
            method: method.to_string(),
            m,
            steps,
            reps,
            failed: reps - self.ok,
            coverage: self.covered as f64 / n,
            mean_length: mean,
            std_length: std,
            seed,
        }
    }
}

/// Aggregates per-repetition results into report rows, ordered by
/// checkpoint, then estimator.
pub fn aggregate(
    cfg: &ExperimentConfig,
    estimators: &[Estimator],
    results: &[RepResult],
) -> Result<CoverageReport> {
    let checkpoints = cfg.checkpoints();
    let mut tallies = vec![Tally::default(); checkpoints.len() * estimators.len()];
    for res in results {
        if let Some(cells) = &res.cells {
            for (tally, cell) in tallies.iter_mut().zip(cells) {
                if let Some(ci) = cell {
                    tally.add(ci, res.target);
                }
            }
        }
    }
    let reps = results.len();
    let mut rows = Vec::with_capacity(tallies.len());
    for (i, &steps) in checkpoints.iter().enumerate() {
        for (j, e) in estimators.iter().enumerate() {
            let tally = &tallies[i * estimators.len() + j];
            let failed = reps - tally.ok;
            if failed as f64 > MAX_FAILURE_FRACTION * reps as f64 {
                return Err(Error::TooManyFailures { failed, reps });
            }
            rows.push(tally.row(e.method(), e.functional(), steps, reps, cfg.run.seed));
        }
    }
    Ok(CoverageReport { rows })
}

/// Runs every repetition in parallel on the current rayon pool and
/// aggregates. The report is identical for any number of threads.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let table = critical_value_table(cfg)?;
    let estimators = estimators(cfg, &table)?;
    let results: Vec<RepResult> = (0..cfg.run.reps)
        .into_par_iter()
        .map(|rep| run_repetition(cfg, &estimators, rep))
        .collect::<Result<_>>()?;
    aggregate(cfg, &estimators, &results)
}
