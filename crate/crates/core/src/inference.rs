//! Random-scaling inference on a projected SA trajectory.
//!
//! Let `ȳ_n = θᵀx̄_n` be the projected running mean after `n` post-warm-up
//! steps and `φ_{n,T} = (n/√T)(ȳ_n − ȳ_T)`. The random-scaling denominator is
//!
//! ```text
//! σ_{m,T} = [ (1/T) Σ_{n=1}^{T} |φ_{n,T}|^m ]^{1/m}          (rectangle rule)
//! σ_{∞,T} = max_n |φ_{n,T}|
//! ```
//!
//! and the confidence interval for `θᵀx*` is `ȳ_T ± q_{α,m} σ_{m,T} / √T`.
//!
//! For even `m` the rectangle sum expands binomially in `ȳ_T`, so
//! [`RandomScalingAccumulator`] keeps the `m + 1` power sums
//! `S_k = Σ n^m ȳ_n^k` and evaluates `σ_{m,T}` at any `T` in `O(m)`.
//! Odd `m`, `m = ∞`, and the exact integral over the piecewise-linear
//! continuization need the stored trajectory ([`ProjectedTrajectory`]).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sa::Observer;

/// The index `m` of the functional `f_m`; `Sup` is `m = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Functional {
    Power(u32),
    Sup,
}

impl Functional {
    pub fn power(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "functional index must be at least 1"));
        }
        Ok(Functional::Power(m))
    }

    /// Whether `σ_m` can be maintained online by power sums.
    pub fn is_online(&self) -> bool {
        matches!(self, Functional::Power(m) if m % 2 == 0)
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Power(m) => write!(f, "{m}"),
            Functional::Sup => f.write_str("inf"),
        }
    }
}

impl FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Functional::Sup),
            other => other
                .parse::<u32>()
                .map_err(|_| Error::invalid("m", format!("`{other}` is neither an integer nor `inf`")))
                .and_then(Functional::power),
        }
    }
}

impl serde::Serialize for Functional {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Functional::Power(m) => s.serialize_u32(*m),
            Functional::Sup => s.serialize_str("inf"),
        }
    }
}

impl<'de> serde::Deserialize<'de> for Functional {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u32),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Int(m) => Functional::power(m),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// How the denominator integral is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralRule {
    /// Breakpoint values only: `(1/T) Σ |φ_{n,T}|^m`.
    #[default]
    Rectangle,
    /// Exact integral of the piecewise-linear continuization (`φ_{0,T} = 0`).
    Exact,
}

/// Pascal's triangle up to row `m`, row-major.
fn pascal(m: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let mut row = vec![1.0; k + 1];
        for j in 1..k {
            row[j] = rows[k - 1][j - 1] + rows[k - 1][j];
        }
        rows.push(row);
    }
    rows
}

/// Power sums for the online even-`m` denominator.
///
/// Internally the sums are kept about a reference point `c`,
/// `S_k(c) = Σ n^m (ȳ_n − c)^k`, and `c` is moved to the current `ȳ_t`
/// whenever `t` reaches a power of two. Large-`n` terms dominate the sums
/// and their `ȳ_n` sit close to the limit, so centering there keeps the
/// binomial recombination from cancelling catastrophically at `m = 4, 6`.
#[derive(Debug, Clone)]
pub struct RandomScalingAccumulator {
    m: usize,
    t: u64,
    center: f64,
    sums: Vec<f64>,
    binom: Vec<Vec<f64>>,
    last: f64,
}

/// `σ_{m,T}` plus a flag raised when floating cancellation pushed `σ^m`
/// noticeably below zero before clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub value: f64,
    pub cancellation: bool,
}

impl RandomScalingAccumulator {
    pub fn new(m: u32) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(Error::invalid("m", format!("online accumulator needs even m ≥ 2, got {m}")));
        }
        let m = m as usize;
        Ok(Self {
            m,
            t: 0,
            center: 0.0,
            sums: vec![0.0; m + 1],
            binom: pascal(m),
            last: 0.0,
        })
    }

    pub fn m(&self) -> u32 {
        self.m as u32
    }

    /// Steps absorbed.
    pub fn len(&self) -> u64 {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    /// Most recent `ȳ_t`.
    pub fn last(&self) -> f64 {
        self.last
    }

    pub fn update(&mut self, ybar: f64) {
        if self.t == 0 {
            self.center = ybar;
        }
        self.t += 1;
        let w = (self.t as f64).powi(self.m as i32);
        let dev = ybar - self.center;
        let mut p = w;
        for s in self.sums.iter_mut() {
            *s += p;
            p *= dev;
        }
        self.last = ybar;
        if self.t.is_power_of_two() {
            self.recenter(ybar);
        }
    }

    /// `S_k(c') = Σ_j C(k, j) (c − c')^{k−j} S_j(c)`.
    fn recenter(&mut self, new_center: f64) {
        let delta = self.center - new_center;
        let old = self.sums.clone();
        for k in 0..=self.m {
            let mut acc = 0.0;
            let mut pow = 1.0; // delta^{k-j}, j descending from k
            for j in (0..=k).rev() {
                acc += self.binom[k][j] * pow * old[j];
                pow *= delta;
            }
            self.sums[k] = acc;
        }
        self.center = new_center;
    }

    /// The uncentered sums `S_k = Σ_{n≤t} n^m ȳ_n^k`, `k = 0..=m`.
    pub fn raw_sums(&self) -> Vec<f64> {
        let mut copy = self.clone();
        copy.recenter(0.0);
        copy.sums
    }

    pub fn sigma(&self, ybar_t: f64) -> Result<f64> {
        self.sigma_detailed(ybar_t).map(|s| s.value)
    }

    /// `σ_{m,T}` with `T = len()` and the supplied final mean `ȳ_T`.
    pub fn sigma_detailed(&self, ybar_t: f64) -> Result<SigmaEstimate> {
        if self.t == 0 {
            return Err(Error::Empty("accumulator has absorbed no steps"));
        }
        let m = self.m;
        let shift = self.center - ybar_t;
        let mut total = 0.0;
        let mut scale = 0.0;
        let mut pow = 1.0; // shift^{m-k}, k descending from m
        for k in (0..=m).rev() {
            let term = self.binom[m][k] * pow * self.sums[k];
            total += term;
            scale += term.abs();
            pow *= shift;
        }
        let cancellation = total < -1e-9 * scale;
        let t = self.t as f64;
        let moment = total.max(0.0) / t.powf(m as f64 / 2.0 + 1.0);
        Ok(SigmaEstimate {
            value: moment.powf(1.0 / m as f64),
            cancellation,
        })
    }

    pub fn current_sigma(&self) -> Result<f64> {
        self.sigma(self.last)
    }
}

/// The stored sequence `ȳ_1, …, ȳ_T`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectedTrajectory {
    ybar: Vec<f64>,
}

impl ProjectedTrajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(ybar: Vec<f64>) -> Self {
        Self { ybar }
    }

    pub fn push(&mut self, ybar: f64) {
        self.ybar.push(ybar);
    }

    pub fn len(&self) -> usize {
        self.ybar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ybar.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.ybar
    }

    pub fn last(&self) -> Option<f64> {
        self.ybar.last().copied()
    }

    /// The prefix of length `t`, as if the run had stopped there.
    pub fn prefix(&self, t: usize) -> ProjectedTrajectory {
        Self::from_values(self.ybar[..t.min(self.ybar.len())].to_vec())
    }

    /// `φ_{n,T}` for `n = 1..=T`.
    pub fn centered_process(&self) -> Result<Vec<f64>> {
        let last = self.last().ok_or(Error::Empty("trajectory"))?;
        let root_t = (self.ybar.len() as f64).sqrt();
        Ok(self
            .ybar
            .iter()
            .enumerate()
            .map(|(i, y)| (i + 1) as f64 / root_t * (y - last))
            .collect())
    }
}

/// `∫₀¹ |u + s(v − u)|^m ds`.
fn segment_power_integral(u: f64, v: f64, m: u32) -> f64 {
    let (a, b) = (u.abs(), v.abs());
    let m1 = (m + 1) as f64;
    if u * v >= 0.0 {
        // (b^{m+1} − a^{m+1}) / ((m+1)(b − a)) written without the division
        let mut acc = 0.0;
        let mut ai = 1.0;
        for i in 0..=m {
            acc += ai * b.powi((m - i) as i32);
            ai *= a;
        }
        acc / m1
    } else {
        (a.powi(m as i32 + 1) + b.powi(m as i32 + 1)) / (m1 * (a + b))
    }
}

/// Offline `σ_{m,T}` from the stored trajectory.
pub fn sigma_offline(
    traj: &ProjectedTrajectory,
    functional: Functional,
    rule: IntegralRule,
) -> Result<f64> {
    let phi = traj.centered_process()?;
    let t = phi.len() as f64;
    match functional {
        // The continuization is linear between breakpoints and starts at 0,
        // so its sup is attained at a breakpoint under either rule.
        Functional::Sup => Ok(phi.iter().map(|p| p.abs()).fold(0.0, f64::max)),
        Functional::Power(m) => {
            let mf = m as f64;
            let sum: f64 = match rule {
                IntegralRule::Rectangle => phi.iter().map(|p| p.abs().powi(m as i32)).sum(),
                IntegralRule::Exact => std::iter::once(0.0)
                    .chain(phi.iter().copied())
                    .zip(phi.iter().copied())
                    .map(|(u, v)| segment_power_integral(u, v, m))
                    .sum(),
            };
            Ok((sum / t).powf(1.0 / mf))
        }
    }
}

/// Exact `m = 2` integral of the piecewise-linear continuization:
/// `Σ_{n=0}^{T−1} (φ_n² + φ_n φ_{n+1} + φ_{n+1}²) / (3T)`, square-rooted.
pub fn trapezoid_m2(traj: &ProjectedTrajectory) -> Result<f64> {
    let phi = traj.centered_process()?;
    let t = phi.len() as f64;
    let mut prev = 0.0;
    let mut sum = 0.0;
    for &p in &phi {
        sum += prev * prev + prev * p + p * p;
        prev = p;
    }
    Ok((sum / (3.0 * t)).sqrt())
}

/// The pivot `f_m = √T (ȳ_T − target) / σ_{m,T}`.
pub fn f_statistic(ybar_t: f64, target: f64, sigma: f64, t: usize) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::DegeneratePivot);
    }
    Ok((t as f64).sqrt() * (ybar_t - target) / sigma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage `1 − α`.
    pub level: f64,
    /// Zero width because the scale estimate vanished.
    pub degenerate: bool,
}

impl ConfidenceInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn halfwidth(&self) -> f64 {
        0.5 * self.length()
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn translate(&self, by: f64) -> Self {
        Self {
            center: self.center + by,
            lower: self.lower + by,
            upper: self.upper + by,
            ..*self
        }
    }
}

/// `ȳ_T ± q σ_{m,T} / √T` at nominal coverage `level`.
pub fn confidence_interval(
    ybar_t: f64,
    sigma: f64,
    q: f64,
    t: usize,
    level: f64,
) -> Result<ConfidenceInterval> {
    if !(q > 0.0) {
        return Err(Error::invalid("q", "critical value must be positive"));
    }
    if t == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid("sigma", "must be non-negative"));
    }
    let half = q * sigma / (t as f64).sqrt();
    Ok(ConfidenceInterval {
        center: ybar_t,
        lower: ybar_t - half,
        upper: ybar_t + half,
        level,
        degenerate: sigma == 0.0,
    })
}

/// A linear functional `θ` of the iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    theta: Vec<f64>,
    norm: f64,
}

impl Projection {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("theta", "must be finite and nonzero"));
        }
        Ok(Self { theta, norm })
    }

    /// `(1, …, 1) / √d`.
    pub fn uniform_unit(d: usize) -> Result<Self> {
        Self::new(vec![1.0 / (d as f64).sqrt(); d])
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Euclidean norm of `θ`. Since `σ_{m,T}` is homogeneous of degree one,
    /// intervals built with `θ` equal those built with `θ/‖θ‖` scaled by this.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn apply(&self, x: &[f64]) -> f64 {
        self.theta.iter().zip(x).map(|(t, x)| t * x).sum()
    }
}

/// Observer that projects `x̄_t` and keeps every statistic needed for the
/// requested functionals: power sums for even `m` and, when some functional
/// or rule needs it, the full projected trajectory.
#[derive(Debug, Clone)]
pub struct RandomScalingTracker {
    projection: Projection,
    accumulators: Vec<RandomScalingAccumulator>,
    trajectory: Option<ProjectedTrajectory>,
    last: f64,
    t: usize,
}

impl RandomScalingTracker {
    pub fn new(
        projection: Projection,
        functionals: &[Functional],
        store_trajectory: bool,
    ) -> Result<Self> {
        let mut even: Vec<u32> = functionals
            .iter()
            .filter_map(|f| match f {
                Functional::Power(m) if m % 2 == 0 => Some(*m),
                _ => None,
            })
            .collect();
        even.sort_unstable();
        even.dedup();
        let needs_traj = store_trajectory || functionals.iter().any(|f| !f.is_online());
        Ok(Self {
            projection,
            accumulators: even
                .into_iter()
                .map(RandomScalingAccumulator::new)
                .collect::<Result<_>>()?,
            trajectory: needs_traj.then(ProjectedTrajectory::new),
            last: 0.0,
            t: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    /// `θᵀx̄_t`.
    pub fn estimate(&self) -> f64 {
        self.last
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn trajectory(&self) -> Option<&ProjectedTrajectory> {
        self.trajectory.as_ref()
    }

    pub fn push(&mut self, ybar: f64) {
        self.t += 1;
        self.last = ybar;
        for acc in &mut self.accumulators {
            acc.update(ybar);
        }
        if let Some(traj) = &mut self.trajectory {
            traj.push(ybar);
        }
    }

    pub fn sigma(&self, functional: Functional, rule: IntegralRule) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::Empty("no post-warm-up steps observed"));
        }
        if let (Functional::Power(m), IntegralRule::Rectangle) = (functional, rule) {
            if let Some(acc) = self.accumulators.iter().find(|a| a.m() == m) {
                return acc.sigma(self.last);
            }
        }
        let traj = self.trajectory.as_ref().ok_or_else(|| {
            Error::invalid(
                "functional",
                format!("m = {functional} with {rule:?} rule needs the stored trajectory"),
            )
        })?;
        sigma_offline(traj, functional, rule)
    }

    pub fn interval(
        &self,
        functional: Functional,
        rule: IntegralRule,
        q: f64,
        level: f64,
    ) -> Result<ConfidenceInterval> {
        let sigma = self.sigma(functional, rule)?;
        confidence_interval(self.last, sigma, q, self.t, level)
    }
}

impl Observer for RandomScalingTracker {
    fn observe(&mut self, _t: usize, _x: &[f64], xbar: &[f64]) {
        let y = self.projection.apply(xbar);
        self.push(y);
    }
}
