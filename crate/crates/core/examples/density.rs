//! Empirical densities of the pivot f_m(W) and its denominator h_m(W).

use sa_inference::critical_values::{empirical_density, simulate_functionals, DensityRange};
use sa_inference::Functional;

fn main() -> sa_inference::Result<()> {
    let fs = [Functional::Power(1), Functional::Power(2), Functional::Sup];
    for s in simulate_functionals(&fs, 500, 20_000, 2)? {
        let h = empirical_density(&s.denominator, 40, DensityRange::Positive)?;
        let f = empirical_density(&s.statistic, 40, DensityRange::Symmetric)?;
        let mode = |d: &[f64]| (0..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        println!(
            "m={:<3} f mode near {:+.2} (range ±{:.1}), h mode near {:.3}",
            s.functional.to_string(),
            f.bin_center(mode(&f.density)),
            f.hi,
            h.bin_center(mode(&h.density)),
        );
    }
    Ok(())
}
