//! Simulates the critical values of the random-scaling pivot and compares
//! them with the built-in table.
//!
//! cargo run --release --example critical_values -- [steps] [reps]

use sa_inference::critical_values::{CriticalValueTable, TABLE_FUNCTIONALS, TABLE_LEVELS};

fn main() -> sa_inference::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let steps = args.next().unwrap_or(1_000);
    let reps = args.next().unwrap_or(20_000);

    let simulated = CriticalValueTable::simulate(&TABLE_FUNCTIONALS, &TABLE_LEVELS, steps, reps, 1)?;
    let embedded = CriticalValueTable::embedded();
    println!("{steps} steps, {reps} paths");
    println!("{:>4} {:>9} {:>9} {:>9} {:>9}", "m", "q(10%)", "table", "q(5%)", "table");
    for f in TABLE_FUNCTIONALS {
        println!(
            "{:>4} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            f.to_string(),
            simulated.two_sided(f, 0.10)?,
            embedded.two_sided(f, 0.10)?,
            simulated.two_sided(f, 0.05)?,
            embedded.two_sided(f, 0.05)?,
        );
    }
    Ok(())
}
