//! Critical values of `f_m(W)` for standard Brownian motion `W`.
//!
//! `W` is approximated by normalized partial sums of `N` i.i.d. standard
//! normals. The denominator uses the same breakpoint rectangle rule as the
//! inference side, `[(1/N) Σ_k |W(k/N) − (k/N) W(1)|^m]^{1/m}`, so that
//! simulated quantiles and test statistics are discretized alike.

use std::fmt;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::Functional;
use crate::rng::{derive_rng, label};

pub const DEFAULT_STEPS: usize = 1_000;
pub const DEFAULT_REPS: usize = 50_000;

/// Signed quantile levels of the embedded table.
pub const TABLE_LEVELS: [f64; 9] = [0.01, 0.025, 0.05, 0.10, 0.50, 0.90, 0.95, 0.975, 0.99];

pub const TABLE_FUNCTIONALS: [Functional; 6] = [
    Functional::Power(1),
    Functional::Power(2),
    Functional::Power(3),
    Functional::Power(4),
    Functional::Power(6),
    Functional::Sup,
];

/// Upper half of the published grid (levels 50%..99%); the lower half is
/// its mirror image.
const EMBEDDED_UPPER: [[f64; 5]; 6] = [
    [0.000, 4.749, 6.569, 8.334, 10.705],
    [0.000, 3.873, 5.316, 6.758, 8.628],
    [0.000, 3.403, 4.650, 5.899, 7.495],
    [0.000, 3.108, 4.232, 5.344, 6.798],
    [0.000, 2.754, 3.728, 4.705, 5.969],
    [0.000, 1.626, 2.175, 2.711, 3.408],
];

/// A discretized Brownian path on `[0, 1]`: `W(k/N)` for `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    values: Vec<f64>,
}

impl BrownianPath {
    pub fn sample<R: Rng + ?Sized>(steps: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (steps as f64).sqrt();
        let mut values = Vec::with_capacity(steps + 1);
        let mut w = 0.0;
        values.push(w);
        for _ in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            w += z * scale;
            values.push(w);
        }
        Self { values }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            Some(&w0) if w0 == 0.0 && values.len() >= 2 => Ok(Self { values }),
            _ => Err(Error::invalid("path", "needs W(0) = 0 and at least one step")),
        }
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn endpoint(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `W(k/N) − (k/N) W(1)` at `k = 1..=N`.
    pub fn bridge(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.steps() as f64;
        let w1 = self.endpoint();
        self.values[1..]
            .iter()
            .enumerate()
            .map(move |(i, w)| w - (i + 1) as f64 / n * w1)
    }

    /// The denominator `h_m(W)`.
    pub fn denominator(&self, functional: Functional) -> f64 {
        match functional {
            Functional::Sup => self.bridge().map(f64::abs).fold(0.0, f64::max),
            Functional::Power(m) => {
                let sum: f64 = self.bridge().map(|b| b.abs().powi(m as i32)).sum();
                (sum / self.steps() as f64).powf(1.0 / m as f64)
            }
        }
    }

    /// `f_m(W) = W(1) / h_m(W)`.
    pub fn statistic(&self, functional: Functional) -> f64 {
        self.endpoint() / self.denominator(functional)
    }
}

/// Samples of `f_m(W)` and its denominator `h_m(W)` for one functional.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSamples {
    pub functional: Functional,
    pub statistic: Vec<f64>,
    pub denominator: Vec<f64>,
}

fn check_budget(steps: usize, reps: usize) -> Result<()> {
    if steps < 2 {
        return Err(Error::invalid("steps", "need at least 2 steps per path"));
    }
    if reps == 0 {
        return Err(Error::invalid("reps", "need at least 1 replication"));
    }
    Ok(())
}

/// Simulates every requested functional on shared paths. Path `r` is drawn
/// from its own derived generator, so results do not depend on the number
/// of threads.
pub fn simulate_functionals(
    functionals: &[Functional],
    steps: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<FunctionalSamples>> {
    check_budget(steps, reps)?;
    let per_path: Vec<Vec<(f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_rng(seed, &[label::BROWNIAN, r as u64]);
            let path = BrownianPath::sample(steps, &mut rng);
            let w1 = path.endpoint();
            functionals
                .iter()
                .map(|&f| {
                    let h = path.denominator(f);
                    (w1 / h, h)
                })
                .collect()
        })
        .collect();
    Ok(functionals
        .iter()
        .enumerate()
        .map(|(i, &functional)| FunctionalSamples {
            functional,
            statistic: per_path.iter().map(|p| p[i].0).collect(),
            denominator: per_path.iter().map(|p| p[i].1).collect(),
        })
        .collect())
}

pub fn simulate_fm_samples(
    functional: Functional,
    steps: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut all = simulate_functionals(&[functional], steps, reps, seed)?;
    Ok(all.remove(0).statistic)
}

fn sorted(samples: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = samples.collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Nearest-rank `p`-quantile of a sorted sample: the smallest value with at
/// least `⌈pR⌉` samples at or below it.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let r = sorted.len();
    let rank = ((p * r as f64).ceil() as usize).clamp(1, r);
    sorted[rank - 1]
}

/// `q_α = sup{q : P̂(|f| ≥ q) ≤ α}` as the nearest-rank `(1 − α)` quantile
/// of `|samples|`.
pub fn two_sided_quantile(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} not in (0, 1)")));
    }
    Ok(nearest_rank(&sorted(samples.iter().map(|s| s.abs())), 1.0 - alpha))
}

/// Nearest-rank quantile of the signed samples.
pub fn signed_quantile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("level", format!("{p} not in (0, 1)")));
    }
    Ok(nearest_rank(&sorted(samples.iter().copied()), p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Embedded,
    Simulated { steps: usize, reps: usize, seed: u64 },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Embedded => f.write_str("embedded"),
            Provenance::Simulated { steps, reps, seed } => {
                write!(f, "simulated:steps={steps}:reps={reps}:seed={seed}")
            }
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "embedded" {
            return Ok(Provenance::Embedded);
        }
        let bad = || Error::Parse {
            what: "provenance",
            reason: format!("`{s}`"),
        };
        let rest = s.strip_prefix("simulated:").ok_or_else(bad)?;
        let mut fields = rest.split(':').map(|kv| kv.split_once('=').map(|(_, v)| v));
        let mut next = || fields.next().flatten().ok_or_else(bad);
        Ok(Provenance::Simulated {
            steps: next()?.parse().map_err(|_| bad())?,
            reps: next()?.parse().map_err(|_| bad())?,
            seed: next()?.parse().map_err(|_| bad())?,
        })
    }
}

/// Signed quantiles `q(p)` of `f_m(W)` on a grid of functionals × levels.
/// The two-sided critical value at tail probability `α` is `q(1 − α/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValueTable {
    functionals: Vec<Functional>,
    levels: Vec<f64>,
    /// `quantiles[i][j]` for `functionals[i]`, `levels[j]`.
    quantiles: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl CriticalValueTable {
    /// The published grid for `m ∈ {1, 2, 3, 4, 6, ∞}`.
    pub fn embedded() -> Self {
        let quantiles = EMBEDDED_UPPER
            .iter()
            .map(|upper| {
                let lower = upper[1..].iter().rev().map(|q| -q);
                lower.chain(upper.iter().copied()).collect()
            })
            .collect();
        Self {
            functionals: TABLE_FUNCTIONALS.to_vec(),
            levels: TABLE_LEVELS.to_vec(),
            quantiles,
            provenance: Provenance::Embedded,
        }
    }

    pub fn simulate(
        functionals: &[Functional],
        levels: &[f64],
        steps: usize,
        reps: usize,
        seed: u64,
    ) -> Result<Self> {
        if let Some(p) = levels.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::invalid("level", format!("{p} not in (0, 1)")));
        }
        let samples = simulate_functionals(functionals, steps, reps, seed)?;
        let quantiles = samples
            .iter()
            .map(|s| {
                let sorted = sorted(s.statistic.iter().copied());
                levels.iter().map(|&p| nearest_rank(&sorted, p)).collect()
            })
            .collect();
        Ok(Self {
            functionals: functionals.to_vec(),
            levels: levels.to_vec(),
            quantiles,
            provenance: Provenance::Simulated { steps, reps, seed },
        })
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn quantile(&self, functional: Functional, level: f64) -> Option<f64> {
        let i = self.functionals.iter().position(|f| *f == functional)?;
        let j = self.levels.iter().position(|l| (l - level).abs() < 1e-12)?;
        Some(self.quantiles[i][j])
    }

    /// `q_{α,m}` for a two-sided test at tail probability `alpha`.
    pub fn two_sided(&self, functional: Functional, alpha: f64) -> Result<f64> {
        self.quantile(functional, 1.0 - alpha / 2.0).ok_or_else(|| {
            Error::invalid(
                "alpha",
                format!("no critical value for m = {functional} at α = {alpha} in this table"),
            )
        })
    }

    /// CSV with header `m,level,q,provenance`, one row per grid cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Parse {
            what: "critical value csv",
            reason: e.to_string(),
        };
        w.write_record(["m", "level", "q", "provenance"]).map_err(csv_err)?;
        let prov = self.provenance.to_string();
        for (f, row) in self.functionals.iter().zip(&self.quantiles) {
            for (level, q) in self.levels.iter().zip(row) {
                w.write_record([f.to_string(), level.to_string(), format!("{q:.3}"), prov.clone()])
                    .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let bad = |reason: String| Error::Parse {
            what: "critical value csv",
            reason,
        };
        let mut reader = csv::Reader::from_reader(input);
        let mut functionals: Vec<Functional> = Vec::new();
        let mut levels: Vec<f64> = Vec::new();
        let mut quantiles: Vec<Vec<f64>> = Vec::new();
        let mut provenance = None;
        for record in reader.records() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            if record.len() != 4 {
                return Err(bad(format!("expected 4 fields, got {}", record.len())));
            }
            let f: Functional = record[0].parse()?;
            let level: f64 = record[1].parse().map_err(|_| bad(format!("level `{}`", &record[1])))?;
            let q: f64 = record[2].parse().map_err(|_| bad(format!("q `{}`", &record[2])))?;
            provenance.get_or_insert(record[3].parse::<Provenance>()?);
            if functionals.last() != Some(&f) {
                functionals.push(f);
                quantiles.push(Vec::new());
            }
            if functionals.len() == 1 {
                levels.push(level);
            }
            quantiles.last_mut().expect("pushed above").push(q);
        }
        if quantiles.iter().any(|row| row.len() != levels.len()) {
            return Err(bad("ragged grid".into()));
        }
        Ok(Self {
            functionals,
            levels,
            quantiles,
            provenance: provenance.ok_or_else(|| bad("no rows".into()))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityRange {
    /// `[−max|s|, max|s|]`, for the symmetric laws of `f_m(W)`.
    Symmetric,
    /// `[0, max s]`, for the positive denominators `h_m(W)`.
    Positive,
}

/// A normalized histogram: `density[i] * bin_width` sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    /// CSV with header `bin_center,density,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Parse {
            what: "density csv",
            reason: e.to_string(),
        };
        w.write_record(["bin_center", "density", "count"]).map_err(csv_err)?;
        for i in 0..self.counts.len() {
            w.write_record([
                format!("{:.6}", self.bin_center(i)),
                format!("{:.6}", self.density[i]),
                self.counts[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

pub fn empirical_density(samples: &[f64], bins: usize, range: DensityRange) -> Result<Histogram> {
    let (lo, hi) = match range {
        DensityRange::Symmetric => {
            let l = samples.iter().map(|s| s.abs()).fold(0.0, f64::max);
            (-l, l)
        }
        DensityRange::Positive => (0.0, samples.iter().copied().fold(0.0, f64::max)),
    };
    empirical_density_in(samples, bins, lo, hi)
}

/// Histogram over `[lo, hi]`; samples outside are counted in the edge bins.
pub fn empirical_density_in(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::invalid("bins", "need at least 2 bins"));
    }
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &s in samples {
        let idx = ((s - lo) / width).floor();
        let idx = if idx.is_nan() { 0 } else { (idx.max(0.0) as usize).min(bins - 1) };
        counts[idx] += 1;
    }
    let norm = 1.0 / (samples.len() as f64 * width);
    let density = counts.iter().map(|&c| c as f64 * norm).collect();
    Ok(Histogram {
        lo,
        hi,
        counts,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_table_entries() {
        let t = CriticalValueTable::embedded();
        assert_eq!(t.quantile(Functional::Power(1), 0.99), Some(10.705));
        assert_eq!(t.quantile(Functional::Power(4), 0.975), Some(5.344));
        assert_eq!(t.quantile(Functional::Power(2), 0.01), Some(-8.628));
        assert_eq!(t.quantile(Functional::Sup, 0.025), Some(-2.711));
        for f in TABLE_FUNCTIONALS {
            assert_eq!(t.quantile(f, 0.5), Some(0.0));
        }
        assert_eq!(t.two_sided(Functional::Power(2), 0.05).unwrap(), 6.758);
        assert!(t.two_sided(Functional::Power(5), 0.05).is_err());
        assert!(t.two_sided(Functional::Power(2), 0.3).is_err());
    }

    #[test]
    fn embedded_table_shape() {
        let t = CriticalValueTable::embedded();
        for row in &t.quantiles {
            // increasing in level, antisymmetric about the median
            assert!(row.windows(2).all(|w| w[0] < w[1]));
            for j in 0..row.len() {
                assert_eq!(row[j], -row[row.len() - 1 - j]);
            }
        }
        // nonincreasing in m at every upper level
        for j in 5..9 {
            for i in 1..6 {
                assert!(t.quantiles[i][j] <= t.quantiles[i - 1][j]);
            }
        }
    }

    #[test]
    fn quantile_rules() {
        let samples: Vec<f64> = [-1.0, 1.0].repeat(500);
        assert_eq!(two_sided_quantile(&samples, 0.5).unwrap(), 1.0);
        assert!(two_sided_quantile(&[], 0.05).is_err());
        assert!(two_sided_quantile(&samples, 1.0).is_err());
        let ladder: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(two_sided_quantile(&ladder, 0.05).unwrap(), 95.0);
        assert_eq!(signed_quantile(&ladder, 0.5).unwrap(), 50.0);
        let mut prev = f64::INFINITY;
        for alpha in [0.01, 0.05, 0.1, 0.5] {
            let q = two_sided_quantile(&ladder, alpha).unwrap();
            assert!(q <= prev);
            prev = q;
        }
    }

    #[test]
    fn path_statistics() {
        let path = BrownianPath::sample(100, &mut derive_rng(0, &[]));
        assert_eq!(path.values()[0], 0.0);
        assert_eq!(path.steps(), 100);
        let h: Vec<f64> = [1, 2, 4, 6]
            .iter()
            .map(|&m| path.denominator(Functional::Power(m)))
            .chain(std::iter::once(path.denominator(Functional::Sup)))
            .collect();
        assert!(h.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12)));
        let scaled = BrownianPath::from_values(path.values().iter().map(|v| 3.0 * v).collect()).unwrap();
        let f = path.statistic(Functional::Power(2));
        assert!((scaled.statistic(Functional::Power(2)) - f).abs() < 1e-12 * f.abs().max(1.0));
        let flipped = BrownianPath::from_values(path.values().iter().map(|v| -v).collect()).unwrap();
        assert!((flipped.statistic(Functional::Sup) + path.statistic(Functional::Sup)).abs() < 1e-12);
    }

    #[test]
    fn simulation_is_thread_count_independent() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_fm_samples(Functional::Power(2), 50, 500, 9).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn histogram_normalization_and_symmetry() {
        let s = simulate_functionals(&[Functional::Power(2)], 200, 20_000, 3).unwrap();
        let hist = empirical_density(&s[0].statistic, 60, DensityRange::Symmetric).unwrap();
        assert!((hist.mass() - 1.0).abs() < 1e-12);
        let half = hist.counts.len() / 2;
        let n = s[0].statistic.len() as f64;
        let left: u64 = hist.counts[..half].iter().sum();
        let right: u64 = hist.counts[half..].iter().sum();
        assert!((left as f64 - right as f64).abs() / n < 0.02);
        assert!(empirical_density(&[1.0], 1, DensityRange::Positive).is_err());
    }

    #[test]
    fn denominators_grow_with_m() {
        let fs = [Functional::Power(1), Functional::Power(2), Functional::Power(4), Functional::Sup];
        let s = simulate_functionals(&fs, 200, 5_000, 4).unwrap();
        let means: Vec<f64> = s
            .iter()
            .map(|x| x.denominator.iter().sum::<f64>() / x.denominator.len() as f64)
            .collect();
        assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
    }

    #[test]
    fn csv_round_trip() {
        let t = CriticalValueTable::embedded();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("m,level,q,provenance\n1,0.01,-10.705,embedded\n"));
        assert_eq!(CriticalValueTable::read_csv(buf.as_slice()).unwrap(), t);

        let sim = CriticalValueTable::simulate(&[Functional::Power(2)], &[0.975], 20, 50, 1).unwrap();
        assert_eq!(
            sim.provenance().to_string().parse::<Provenance>().unwrap(),
            sim.provenance()
        );
    }
}
