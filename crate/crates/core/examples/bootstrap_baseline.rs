//! Online multiplier bootstrap on one linear-regression trajectory, next to
//! the random-scaling interval from the same data.

use sa_inference::bootstrap::{run_bootstrap, BootstrapEnsemble, Multiplier};
use sa_inference::critical_values::CriticalValueTable;
use sa_inference::harness::problem::evenly_spread;
use sa_inference::rng::{derive_rng, label};
use sa_inference::sa::LinRegOracle;
use sa_inference::streams::LinRegArStream;
use sa_inference::{Functional, IntegralRule, Projection, RandomScalingTracker, StepSchedule};

fn main() -> sa_inference::Result<()> {
    let d = 10;
    let (steps, warmup, chains) = (5_000, 400, 200);
    let x_star = evenly_spread(d);
    let projection = Projection::uniform_unit(d)?;
    let target = projection.apply(&x_star);
    let mut stream = LinRegArStream::new(x_star, 0.9, derive_rng(7, &[label::DATA]))?;
    let schedule = StepSchedule::polynomial(0.75, 0.75)?;

    let mut tracker = RandomScalingTracker::new(projection.clone(), &[Functional::Power(2)], false)?;
    let ensemble = BootstrapEnsemble::new(vec![0.0; d], chains, warmup, Multiplier::ShiftedRademacher, 7).parallel(true);
    let ensemble = run_bootstrap(&LinRegOracle { dim: d }, &mut stream, &schedule, steps, warmup, ensemble, |_, ens| {
        tracker.push(projection.apply(&ens.base().xbar));
        Ok(())
    })?;

    let boot = ensemble.interval(&projection, 0.05)?;
    let q = CriticalValueTable::embedded().two_sided(Functional::Power(2), 0.05)?;
    let rs = tracker.interval(Functional::Power(2), IntegralRule::Rectangle, q, 0.95)?;
    println!("target          {target:.5}");
    println!("bootstrap       [{:.5}, {:.5}]  length {:.5}", boot.lower, boot.upper, boot.length());
    println!("random scaling  [{:.5}, {:.5}]  length {:.5}", rs.lower, rs.upper, rs.length());
    println!("oracle calls    {} vs {}", ensemble.oracle_calls(), steps);
    Ok(())
}
