//! Online multiplier bootstrap for linear SA.
//!
//! `B` perturbed chains `x^b_{t+1} = x^b_t − η_t W^b_t H(x^b_t, ξ_t)` share
//! the data stream with the unperturbed run. The spread of
//! `θᵀ(x̄^b_T − x̄_T)` stands in for the sampling law of `θᵀ(x̄_T − x*)`.
//! Each step costs `B + 1` oracle calls, and every chain needs the oracle at
//! its own iterate for the same `ξ_t`, which only a simulator provides.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{ConfidenceInterval, Projection};
use crate::rng::{derive_rng, label, SimRng};
use crate::sa::{Oracle, SaRun, StepSchedule};
use crate::streams::DataStream;

/// Minimum surviving chains for a quantile interval.
pub const MIN_CHAINS: usize = 20;

/// Law of the multiplier weights `W^b_t` (bounded, mean 1, variance 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Multiplier {
    /// `1 + ε` with `ε` Rademacher: `W ∈ {0, 2}` with equal probability.
    #[default]
    ShiftedRademacher,
    /// `W ≡ 1`; every chain replays the base run.
    Unit,
}

impl Multiplier {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Multiplier::ShiftedRademacher => {
                if rng.random::<bool>() {
                    2.0
                } else {
                    0.0
                }
            }
            Multiplier::Unit => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Chain {
    run: SaRun,
    rng: SimRng,
    alive: bool,
}

#[derive(Debug, Clone)]
pub struct BootstrapEnsemble {
    base: SaRun,
    chains: Vec<Chain>,
    multiplier: Multiplier,
    parallel: bool,
}

impl BootstrapEnsemble {
    /// `b` chains, all started at `x0`. Chain `i` draws its multipliers from
    /// the sub-stream `(seed, MULTIPLIER, i)`.
    pub fn new(x0: Vec<f64>, b: usize, warmup: usize, multiplier: Multiplier, seed: u64) -> Self {
        let chains = (0..b)
            .map(|i| Chain {
                run: SaRun::new(x0.clone(), warmup),
                rng: derive_rng(seed, &[label::MULTIPLIER, i as u64]),
                alive: true,
            })
            .collect();
        Self {
            base: SaRun::new(x0, warmup),
            chains,
            multiplier,
            parallel: false,
        }
    }

    /// Update chains on the rayon pool. Results are identical either way.
    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn base(&self) -> &SaRun {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn surviving(&self) -> usize {
        self.chains.iter().filter(|c| c.alive).count()
    }

    /// Averaged iterates `x̄^b_t` of the surviving chains.
    pub fn chain_means(&self) -> impl Iterator<Item = &[f64]> {
        self.chains
            .iter()
            .filter(|c| c.alive)
            .map(|c| c.run.xbar.as_slice())
    }

    /// Oracle evaluations so far, base run included.
    pub fn oracle_calls(&self) -> u64 {
        self.base.oracle_calls + self.chains.iter().map(|c| c.run.oracle_calls).sum::<u64>()
    }

    /// Advances the base run and every live chain on the shared `sample`.
    /// A diverging chain is retired; a diverging base run is an error.
    pub fn step<O: Oracle>(&mut self, oracle: &O, sample: &O::Sample, eta: f64) -> Result<bool>
    where
        O::Sample: Sync,
    {
        let post_warmup = self.base.step(oracle, sample, eta)?;
        let multiplier = self.multiplier;
        let update = |c: &mut Chain| {
            if c.alive {
                let w = multiplier.draw(&mut c.rng);
                if c.run.step(oracle, sample, eta * w).is_err() {
                    c.alive = false;
                }
            }
        };
        if self.parallel {
            self.chains.par_iter_mut().for_each(update);
        } else {
            self.chains.iter_mut().for_each(update);
        }
        Ok(post_warmup)
    }

    /// Basic-bootstrap interval `[ȳ − q_{1−α/2}, ȳ − q_{α/2}]` where `q_p`
    /// are nearest-rank quantiles of `θᵀ(x̄^b − x̄)` and `ȳ = θᵀx̄`.
    pub fn interval(&self, projection: &Projection, alpha: f64) -> Result<ConfidenceInterval> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha", format!("{alpha} not in (0, 1)")));
        }
        let center = self
            .base
            .mean()
            .map(|m| projection.apply(m))
            .ok_or(Error::Empty("no post-warm-up steps observed"))?;
        let surviving = self.surviving();
        if surviving < MIN_CHAINS {
            return Err(Error::InsufficientChains {
                surviving,
                required: MIN_CHAINS,
            });
        }
        let mut dev: Vec<f64> = self
            .chain_means()
            .map(|m| projection.apply(m) - center)
            .collect();
        dev.sort_by(f64::total_cmp);
        let rank = |p: f64| {
            let r = ((p * dev.len() as f64).ceil() as usize).clamp(1, dev.len());
            dev[r - 1]
        };
        let (lo, hi) = (rank(alpha / 2.0), rank(1.0 - alpha / 2.0));
        Ok(ConfidenceInterval {
            center,
            lower: center - hi,
            upper: center - lo,
            level: 1.0 - alpha,
            degenerate: hi == lo,
        })
    }
}

/// Runs the ensemble for `total` steps (the first `warmup` discarded),
/// calling `observe(t, &ensemble)` after every post-warm-up step.
#[allow(clippy::too_many_arguments)]
pub fn run_bootstrap<O, S, F>(
    oracle: &O,
    stream: &mut S,
    schedule: &StepSchedule,
    total: usize,
    warmup: usize,
    mut ensemble: BootstrapEnsemble,
    mut observe: F,
) -> Result<BootstrapEnsemble>
where
    O: Oracle,
    O::Sample: Sync,
    S: DataStream<Sample = O::Sample>,
    F: FnMut(usize, &BootstrapEnsemble) -> Result<()>,
{
    if warmup > total {
        return Err(Error::invalid(
            "warmup",
            format!("{warmup} exceeds total steps {total}"),
        ));
    }
    if ensemble.base.x.len() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: ensemble.base.x.len(),
        });
    }
    schedule.validate()?;
    for k in 1..=total {
        let sample = stream.advance();
        if ensemble.step(oracle, sample, schedule.step_size(k)?)? {
            observe(ensemble.base.t, &ensemble)?;
        }
    }
    Ok(ensemble)
}
