//! Single-trajectory Markovian data generators.
//!
//! Each stream owns its generator and a reusable sample buffer; `advance`
//! moves the chain one step and lends out the new sample.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::rng::SimRng;

/// A Markov chain of observations `ξ_t`.
pub trait DataStream {
    type Sample;

    fn advance(&mut self) -> &Self::Sample;
}

/// `ξ_t = (a_t, y_t)` for the regression problems.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    pub a: Vec<f64>,
    pub y: f64,
}

/// One step `(s_t, a_t, R_t, s_{t+1})` of a behavior-policy trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// `√d` times the first coordinate of a uniform draw from the unit `d`-ball.
///
/// The draw is a Gaussian direction scaled by `U^{1/d}`; only the first
/// coordinate is kept, giving a bounded symmetric scalar with variance
/// `d / (d + 2)`.
pub fn ball_projection_noise<R: Rng + ?Sized>(d: usize, rng: &mut R) -> f64 {
    let mut first = 0.0;
    let mut norm_sq = 0.0;
    for i in 0..d {
        let g: f64 = rng.sample(StandardNormal);
        if i == 0 {
            first = g;
        }
        norm_sq += g * g;
    }
    if norm_sq == 0.0 {
        return 0.0;
    }
    let radius = rng.random::<f64>().powf(1.0 / d as f64);
    (d as f64).sqrt() * radius * first / norm_sq.sqrt()
}

/// Linear regression with AR(1) noise:
/// `a ~ N(0, I_d)`, `ζ ← ρ ζ + ε`, `y = ⟨a, x*⟩ + ζ`.
#[derive(Debug, Clone)]
pub struct LinRegArStream {
    x_star: Vec<f64>,
    rho_eps: f64,
    zeta: f64,
    rng: SimRng,
    sample: RegressionSample,
}

impl LinRegArStream {
    pub fn new(x_star: Vec<f64>, rho_eps: f64, rng: SimRng) -> Result<Self> {
        if x_star.is_empty() {
            return Err(Error::invalid("x_star", "dimension must be positive"));
        }
        if !(0.0..1.0).contains(&rho_eps) {
            return Err(Error::invalid("rho_eps", format!("{rho_eps} not in [0, 1)")));
        }
        if x_star.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("x_star", "coordinates must be finite"));
        }
        let d = x_star.len();
        Ok(Self {
            x_star,
            rho_eps,
            zeta: 0.0,
            rng,
            sample: RegressionSample {
                a: vec![0.0; d],
                y: 0.0,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    /// Current AR noise state `ζ_t`.
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
}

impl DataStream for LinRegArStream {
    type Sample = RegressionSample;

    fn advance(&mut self) -> &RegressionSample {
        let d = self.x_star.len();
        let mut signal = 0.0;
        for (a, x) in self.sample.a.iter_mut().zip(&self.x_star) {
            *a = self.rng.sample(StandardNormal);
            signal += *a * x;
        }
        self.zeta = self.rho_eps * self.zeta + ball_projection_noise(d, &mut self.rng);
        self.sample.y = signal + self.zeta;
        &self.sample
    }
}

/// Logistic regression with autoregressive covariates:
/// `a ← A a + e_1 W`, `y ~ Bernoulli(S(⟨a, x*⟩))`, `A` strictly subdiagonal.
#[derive(Debug, Clone)]
pub struct LogisticArStream {
    x_star: Vec<f64>,
    /// `subdiag[i - 1] = A[i][i - 1]` for `i = 1..d`.
    subdiag: Vec<f64>,
    rng: SimRng,
    sample: RegressionSample,
}

impl LogisticArStream {
    pub const SUBDIAG_RANGE: (f64, f64) = (0.8, 0.99);

    /// Draws the subdiagonal of `A` once from `U[0.8, 0.99]`, then freezes it.
    pub fn new(x_star: Vec<f64>, mut rng: SimRng) -> Result<Self> {
        let (lo, hi) = Self::SUBDIAG_RANGE;
        let subdiag = (1..x_star.len())
            .map(|_| rng.random_range(lo..=hi))
            .collect();
        Self::with_subdiagonal(x_star, subdiag, rng)
    }

    pub fn with_subdiagonal(x_star: Vec<f64>, subdiag: Vec<f64>, rng: SimRng) -> Result<Self> {
        if x_star.is_empty() {
            return Err(Error::invalid("x_star", "dimension must be positive"));
        }
        if subdiag.len() + 1 != x_star.len() {
            return Err(Error::DimensionMismatch {
                expected: x_star.len() - 1,
                got: subdiag.len(),
            });
        }
        let (lo, hi) = Self::SUBDIAG_RANGE;
        if let Some(v) = subdiag.iter().find(|v| !(lo..=hi).contains(*v)) {
            return Err(Error::invalid("subdiag", format!("{v} not in [{lo}, {hi}]")));
        }
        let d = x_star.len();
        Ok(Self {
            x_star,
            subdiag,
            rng,
            sample: RegressionSample {
                a: vec![0.0; d],
                y: 0.0,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    pub fn subdiagonal(&self) -> &[f64] {
        &self.subdiag
    }

    /// Covariate `a_t`.
    pub fn covariate(&self) -> &[f64] {
        &self.sample.a
    }

    /// Advances with explicit shocks: `w` drives the covariate recursion and
    /// `u ∈ [0, 1)` decides the label (`y = 1` iff `u < S(⟨a, x*⟩)`).
    pub fn advance_with(&mut self, w: f64, u: f64) -> &RegressionSample {
        let a = &mut self.sample.a;
        for i in (1..a.len()).rev() {
            a[i] = self.subdiag[i - 1] * a[i - 1];
        }
        a[0] = w;
        let z: f64 = a.iter().zip(&self.x_star).map(|(a, x)| a * x).sum();
        self.sample.y = if u < sigmoid(z) { 1.0 } else { 0.0 };
        &self.sample
    }
}

impl DataStream for LogisticArStream {
    type Sample = RegressionSample;

    fn advance(&mut self) -> &RegressionSample {
        let w: f64 = self.rng.sample(StandardNormal);
        let u: f64 = self.rng.random();
        self.advance_with(w, u)
    }
}

/// Numerically stable `e^z / (1 + e^z)`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A behavior-policy trajectory through a finite MDP with `N(r(s, a), 1)`
/// rewards.
#[derive(Debug, Clone)]
pub struct MdpStream {
    mdp: Arc<Mdp>,
    /// Per-state action probabilities, row-major `(s, a)`.
    behavior: Vec<f64>,
    state: usize,
    rng: SimRng,
    last: Transition,
}

impl MdpStream {
    /// Uniform behavior policy.
    pub fn new(mdp: Arc<Mdp>, initial_state: usize, rng: SimRng) -> Result<Self> {
        let n = mdp.n_pairs();
        let uniform = vec![1.0 / mdp.n_actions() as f64; n];
        Self::with_behavior(mdp, uniform, initial_state, rng)
    }

    pub fn with_behavior(
        mdp: Arc<Mdp>,
        behavior: Vec<f64>,
        initial_state: usize,
        rng: SimRng,
    ) -> Result<Self> {
        if behavior.len() != mdp.n_pairs() {
            return Err(Error::DimensionMismatch {
                expected: mdp.n_pairs(),
                got: behavior.len(),
            });
        }
        for (s, row) in behavior.chunks(mdp.n_actions()).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(
                    "behavior",
                    format!("row {s} is not a probability vector"),
                ));
            }
        }
        if initial_state >= mdp.n_states() {
            return Err(Error::IndexOutOfRange {
                what: "initial_state",
                index: initial_state,
                limit: mdp.n_states(),
            });
        }
        Ok(Self {
            mdp,
            behavior,
            state: initial_state,
            rng,
            last: Transition {
                state: initial_state,
                action: 0,
                reward: 0.0,
                next_state: initial_state,
            },
        })
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding slack above the final cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

impl DataStream for MdpStream {
    type Sample = Transition;

    fn advance(&mut self) -> &Transition {
        let s = self.state;
        let na = self.mdp.n_actions();
        let a = sample_index(&self.behavior[s * na..(s + 1) * na], &mut self.rng);
        let noise: f64 = self.rng.sample(StandardNormal);
        let reward = self.mdp.reward(s, a) + noise;
        let next_state = sample_index(self.mdp.transition_row(s, a), &mut self.rng);
        self.state = next_state;
        self.last = Transition {
            state: s,
            action: a,
            reward,
            next_state,
        };
        &self.last
    }
}
