//! Per-repetition problem instances.

use std::sync::Arc;

use crate::error::Result;
use crate::harness::config::{ProblemConfig, ProblemKind};
use crate::inference::Projection;
use crate::mdp::{estimand_mean_qstar, mean_qstar_direction, random_mdp_with_unique_policy};
use crate::rng::{derive_rng, derive_seed, label};
use crate::sa::{LinRegOracle, LogisticOracle, Oracle, QLearningOracle};
use crate::streams::{DataStream, LinRegArStream, LogisticArStream, MdpStream};

/// Everything one repetition needs: the update rule, a fresh data stream,
/// the functional `θ` and the true value `θᵀx*`.
pub struct Instance<O, S> {
    pub oracle: O,
    pub stream: S,
    pub projection: Projection,
    pub target: f64,
    pub x0: Vec<f64>,
}

/// Consumer of an [`Instance`] of whichever problem the config names.
pub trait InstanceVisitor {
    type Output;

    fn visit<O, S>(self, instance: Instance<O, S>) -> Result<Self::Output>
    where
        O: Oracle,
        O::Sample: Sync,
        S: DataStream<Sample = O::Sample>;
}

/// `d` points evenly spread over `[0, 1]`.
pub fn evenly_spread(d: usize) -> Vec<f64> {
    match d {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..d).map(|i| i as f64 / (d - 1) as f64).collect(),
    }
}

/// Seed of repetition `rep` under `master`.
pub fn rep_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, &[label::REPETITION, rep as u64])
}

/// Builds the instance for one repetition. The data stream draws from
/// `(seed, DATA)` and random problem structure from `(seed, PROBLEM)`.
pub fn with_instance<V: InstanceVisitor>(problem: &ProblemConfig, seed: u64, visitor: V) -> Result<V::Output> {
    let data = derive_rng(seed, &[label::DATA]);
    match problem.kind {
        ProblemKind::LinregAr => {
            let x_star = evenly_spread(problem.d);
            let projection = Projection::uniform_unit(problem.d)?;
            let target = projection.apply(&x_star);
            visitor.visit(Instance {
                oracle: LinRegOracle { dim: problem.d },
                stream: LinRegArStream::new(x_star, problem.rho_eps, data)?,
                projection,
                target,
                x0: vec![0.0; problem.d],
            })
        }
        ProblemKind::LogisticAr => {
            let x_star = evenly_spread(problem.d);
            let projection = Projection::uniform_unit(problem.d)?;
            let target = projection.apply(&x_star);
            visitor.visit(Instance {
                oracle: LogisticOracle { dim: problem.d },
                stream: LogisticArStream::new(x_star, data)?,
                projection,
                target,
                x0: vec![0.0; problem.d],
            })
        }
        ProblemKind::Qlearning => {
            let mut rng = derive_rng(seed, &[label::PROBLEM]);
            let (mdp, qstar) =
                random_mdp_with_unique_policy(problem.states, problem.actions, problem.gamma, &mut rng)?;
            let n = mdp.n_pairs();
            visitor.visit(Instance {
                oracle: QLearningOracle {
                    n_states: problem.states,
                    n_actions: problem.actions,
                    gamma: problem.gamma,
                },
                stream: MdpStream::new(Arc::new(mdp), 0, data)?,
                projection: Projection::new(mean_qstar_direction(n))?,
                target: estimand_mean_qstar(&qstar),
                x0: vec![0.0; n],
            })
        }
    }
}
