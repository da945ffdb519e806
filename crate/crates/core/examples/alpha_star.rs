//! Optimal step-size exponent and rate as the noise moment order grows.

use sa_inference::harness::{optimal_alpha, Regime};

fn main() -> sa_inference::Result<()> {
    println!("{:>6} {:>10} {:>10} {:>10}", "p", "alpha*", "rate", "iid rate");
    for p in [2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 8.0, 12.0, 50.0] {
        let markov = optimal_alpha(p, Regime::MarkovianOrNonlinear, 0.0)?;
        let iid = optimal_alpha(p, Regime::IidLinear, 0.01)?;
        println!("{p:>6} {:>10.5} {:>10.5} {:>10.5}", markov.alpha, markov.rate, iid.rate);
    }
    Ok(())
}
