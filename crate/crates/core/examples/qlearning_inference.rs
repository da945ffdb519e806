//! Asynchronous Q-learning on a random MDP with an interval for the mean of
//! Q*, the ground truth coming from value iteration.

use std::sync::Arc;

use sa_inference::critical_values::CriticalValueTable;
use sa_inference::mdp::{estimand_mean_qstar, mean_qstar_direction, optimality_gap, random_mdp_with_unique_policy};
use sa_inference::rng::{derive_rng, label};
use sa_inference::sa::QLearningOracle;
use sa_inference::streams::MdpStream;
use sa_inference::{run, Functional, IntegralRule, Projection, RandomScalingTracker, StepSchedule};

fn main() -> sa_inference::Result<()> {
    let (states, actions, gamma) = (5, 5, 0.6);
    let (mdp, qstar) = random_mdp_with_unique_policy(states, actions, gamma, &mut derive_rng(11, &[label::PROBLEM]))?;
    println!("optimality gap {:.4}, mean Q* {:.5}", optimality_gap(&qstar), estimand_mean_qstar(&qstar));

    let n = mdp.n_pairs();
    let projection = Projection::new(mean_qstar_direction(n))?;
    let fs = [Functional::Power(2), Functional::Sup];
    let mut tracker = RandomScalingTracker::new(projection, &fs, false)?;
    let mut stream = MdpStream::new(Arc::new(mdp), 0, derive_rng(11, &[label::DATA]))?;
    let oracle = QLearningOracle { n_states: states, n_actions: actions, gamma };
    let schedule = StepSchedule::with_offset(1.0, 0.51, 1.0)?;
    run(&oracle, &mut stream, &schedule, 54_000, 4_000, vec![0.0; n], &mut tracker)?;

    let table = CriticalValueTable::embedded();
    for f in fs {
        let ci = tracker.interval(f, IntegralRule::Rectangle, table.two_sided(f, 0.05)?, 0.95)?;
        println!("m={f:<3} [{:.5}, {:.5}] covers: {}", ci.lower, ci.upper, ci.contains(estimand_mean_qstar(&qstar)));
    }
    Ok(())
}
