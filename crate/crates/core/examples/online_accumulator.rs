//! Maintains σ_{m,T} online from power sums while streaming a noisy
//! averaged sequence, and checks it against the stored-trajectory value.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use sa_inference::inference::{sigma_offline, ProjectedTrajectory};
use sa_inference::{Functional, IntegralRule, RandomScalingAccumulator};

fn main() -> sa_inference::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut accs: Vec<RandomScalingAccumulator> =
        [2, 4, 6].into_iter().map(RandomScalingAccumulator::new).collect::<Result<_, _>>()?;
    let mut traj = ProjectedTrajectory::new();
    let mut sum = 0.0;
    for t in 1..=100_000u32 {
        let z: f64 = StandardNormal.sample(&mut rng);
        sum += 1.5 + z;
        let ybar = sum / t as f64;
        accs.iter_mut().for_each(|a| a.update(ybar));
        traj.push(ybar);
        if t.is_power_of_two() && t >= 1024 || t == 100_000 {
            let line: Vec<String> = accs
                .iter()
                .map(|a| {
                    let online = a.current_sigma().unwrap();
                    let offline = sigma_offline(&traj, Functional::Power(a.m()), IntegralRule::Rectangle).unwrap();
                    format!("m={} {online:.6} (rel {:.1e})", a.m(), (online / offline - 1.0).abs())
                })
                .collect();
            println!("T={t:>6}  {}", line.join("  "));
        }
    }
    Ok(())
}
