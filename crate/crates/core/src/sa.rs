//! The stochastic-approximation recursion `x_{t+1} = x_t − η_t H(x_t, ξ_t)`.
//!
//! Problems plug in through [`Oracle`]; data comes from a [`DataStream`].
//! [`run`] discards a warm-up prefix and then reports every post-warm-up
//! iterate, with its running average, to an [`Observer`].

use crate::error::{Error, Result};
use crate::mdp::{max_of, QTable};
use crate::streams::{sigmoid, DataStream, RegressionSample, Transition};

/// Polynomial step sizes `η_t = η · (t + offset)^{−α}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepSchedule {
    pub eta_scale: f64,
    pub alpha: f64,
    #[serde(default)]
    pub offset: f64,
}

impl StepSchedule {
    pub fn polynomial(eta_scale: f64, alpha: f64) -> Result<Self> {
        Self::with_offset(eta_scale, alpha, 0.0)
    }

    /// `offset = 1` gives the `(t + 1)^{−α}` form used for Q-learning.
    pub fn with_offset(eta_scale: f64, alpha: f64, offset: f64) -> Result<Self> {
        let s = Self {
            eta_scale,
            alpha,
            offset,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return Err(Error::invalid(
                "alpha",
                format!("{} not in (0.5, 1)", self.alpha),
            ));
        }
        if !(self.eta_scale > 0.0) || !self.eta_scale.is_finite() {
            return Err(Error::invalid("eta_scale", "must be positive and finite"));
        }
        if !(self.offset >= 0.0) || !self.offset.is_finite() {
            return Err(Error::invalid("offset", "must be non-negative and finite"));
        }
        let first = self.at(1);
        if first > 1.0 {
            return Err(Error::invalid(
                "eta_scale",
                format!("first step size {first} exceeds 1"),
            ));
        }
        Ok(())
    }

    pub fn step_size(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::invalid("t", "step index starts at 1"));
        }
        Ok(self.at(t))
    }

    #[inline]
    pub(crate) fn at(&self, t: usize) -> f64 {
        self.eta_scale * (t as f64 + self.offset).powf(-self.alpha)
    }
}

/// A problem's SA increment `H(x, ξ)`.
pub trait Oracle: Sync {
    type Sample;

    fn dim(&self) -> usize;

    /// In place `x ← x − scale · H(x, ξ)`. Dimensions are checked once by
    /// the caller, not per step.
    fn apply(&self, x: &mut [f64], sample: &Self::Sample, scale: f64);
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Least-squares gradient `a (⟨a, x⟩ − y)`.
pub fn linreg_gradient(x: &[f64], sample: &RegressionSample) -> Result<Vec<f64>> {
    check_dim(x.len(), sample.a.len())?;
    let r = dot(&sample.a, x) - sample.y;
    Ok(sample.a.iter().map(|a| a * r).collect())
}

/// Logistic negative log-likelihood gradient `(S(⟨a, x⟩) − y) a`.
pub fn logistic_gradient(x: &[f64], sample: &RegressionSample) -> Result<Vec<f64>> {
    check_dim(x.len(), sample.a.len())?;
    let r = sigmoid(dot(&sample.a, x)) - sample.y;
    Ok(sample.a.iter().map(|a| a * r).collect())
}

/// The asynchronous Q-learning increment. It is zero except at
/// `(s, a)`, where it is `Q(s, a) − R − γ max_{a'} Q(s', a')`; the returned
/// pair is `(flat index, value)`.
pub fn qlearning_increment(q: &QTable, tr: &Transition, gamma: f64) -> Result<(usize, f64)> {
    let (ns, na) = (q.n_states(), q.n_actions());
    for (what, index, limit) in [
        ("state", tr.state, ns),
        ("action", tr.action, na),
        ("next_state", tr.next_state, ns),
    ] {
        if index >= limit {
            return Err(Error::IndexOutOfRange { what, index, limit });
        }
    }
    let inc = q.get(tr.state, tr.action) - tr.reward - gamma * q.max_value(tr.next_state);
    Ok((tr.state * na + tr.action, inc))
}

#[derive(Debug, Clone, Copy)]
pub struct LinRegOracle {
    pub dim: usize,
}

impl Oracle for LinRegOracle {
    type Sample = RegressionSample;

    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &mut [f64], sample: &RegressionSample, scale: f64) {
        let r = scale * (dot(&sample.a, x) - sample.y);
        for (xi, ai) in x.iter_mut().zip(&sample.a) {
            *xi -= r * ai;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticOracle {
    pub dim: usize,
}

impl Oracle for LogisticOracle {
    type Sample = RegressionSample;

    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &mut [f64], sample: &RegressionSample, scale: f64) {
        let r = scale * (sigmoid(dot(&sample.a, x)) - sample.y);
        for (xi, ai) in x.iter_mut().zip(&sample.a) {
            *xi -= r * ai;
        }
    }
}

/// Q-learning on `vec(Q)` in `(s, a)` row-major order.
#[derive(Debug, Clone, Copy)]
pub struct QLearningOracle {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
}

impl Oracle for QLearningOracle {
    type Sample = Transition;

    fn dim(&self) -> usize {
        self.n_states * self.n_actions
    }

    fn apply(&self, x: &mut [f64], tr: &Transition, scale: f64) {
        let na = self.n_actions;
        let next = max_of(&x[tr.next_state * na..(tr.next_state + 1) * na]);
        let idx = tr.state * na + tr.action;
        x[idx] -= scale * (x[idx] - tr.reward - self.gamma * next);
    }
}

/// Receives `(t, x_t, x̄_t)` after every post-warm-up update, `t` counted
/// from 1 after the warm-up.
pub trait Observer {
    fn observe(&mut self, t: usize, x: &[f64], xbar: &[f64]);
}

impl<F: FnMut(usize, &[f64], &[f64])> Observer for F {
    fn observe(&mut self, t: usize, x: &[f64], xbar: &[f64]) {
        self(t, x, xbar)
    }
}

/// No-op observer.
pub struct Silent;

impl Observer for Silent {
    fn observe(&mut self, _: usize, _: &[f64], _: &[f64]) {}
}

/// State of one SA trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SaRun {
    /// Current iterate.
    pub x: Vec<f64>,
    /// Running mean of post-warm-up iterates (zero before the first one).
    pub xbar: Vec<f64>,
    /// Post-warm-up steps taken.
    pub t: usize,
    /// Total steps taken, warm-up included.
    pub steps: usize,
    pub warmup_remaining: usize,
    pub oracle_calls: u64,
}

impl SaRun {
    pub fn new(x0: Vec<f64>, warmup: usize) -> Self {
        let d = x0.len();
        Self {
            x: x0,
            xbar: vec![0.0; d],
            t: 0,
            steps: 0,
            warmup_remaining: warmup,
            oracle_calls: 0,
        }
    }

    /// The averaged iterate, or `None` if no post-warm-up step has happened.
    pub fn mean(&self) -> Option<&[f64]> {
        (self.t > 0).then_some(self.xbar.as_slice())
    }

    /// One update with step size `eta`; returns `true` when the step was
    /// past the warm-up (and `xbar`/`t` advanced).
    pub fn step<O: Oracle>(&mut self, oracle: &O, sample: &O::Sample, eta: f64) -> Result<bool> {
        oracle.apply(&mut self.x, sample, eta);
        self.oracle_calls += 1;
        self.steps += 1;
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: self.steps });
        }
        if self.warmup_remaining > 0 {
            self.warmup_remaining -= 1;
            return Ok(false);
        }
        self.t += 1;
        let w = 1.0 / self.t as f64;
        for (m, x) in self.xbar.iter_mut().zip(&self.x) {
            *m += (x - *m) * w;
        }
        Ok(true)
    }
}

/// Runs `total` SA steps from `x0`, the first `warmup` of which are
/// discarded for inference. Step sizes are indexed by the global step count.
pub fn run<O, S, Obs>(
    oracle: &O,
    stream: &mut S,
    schedule: &StepSchedule,
    total: usize,
    warmup: usize,
    x0: Vec<f64>,
    observer: &mut Obs,
) -> Result<SaRun>
where
    O: Oracle,
    S: DataStream<Sample = O::Sample>,
    Obs: Observer + ?Sized,
{
    if warmup > total {
        return Err(Error::invalid(
            "warmup",
            format!("{warmup} exceeds total steps {total}"),
        ));
    }
    check_dim(oracle.dim(), x0.len())?;
    schedule.validate()?;
    let mut state = SaRun::new(x0, warmup);
    for k in 1..=total {
        let sample = stream.advance();
        if state.step(oracle, sample, schedule.at(k))? {
            observer.observe(state.t, &state.x, &state.xbar);
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Mdp;
    use crate::rng::derive_rng;
    use crate::streams::{LinRegArStream, MdpStream};
    use std::sync::Arc;

    #[test]
    fn step_sizes() {
        let s = StepSchedule::polynomial(1.0, 0.501).unwrap();
        assert_eq!(s.step_size(1).unwrap(), 1.0);
        assert!(s.step_size(0).is_err());
        for t in 1..1000 {
            assert!(s.at(t) > s.at(t + 1));
        }
        let d: f64 = 10.0;
        let s = StepSchedule::polynomial(d.powf(-0.5), 0.505).unwrap();
        let expected = 10f64.powf(-0.5) * 100f64.powf(-0.505);
        assert!((s.step_size(100).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn schedule_validation() {
        assert!(StepSchedule::polynomial(1.0, 0.5).is_err());
        assert!(StepSchedule::polynomial(1.0, 1.0).is_err());
        assert!(StepSchedule::polynomial(0.0, 0.7).is_err());
        assert!(StepSchedule::polynomial(1.5, 0.7).is_err());
        // (1 + 1)^{-0.51} · 1.5 < 1
        assert!(StepSchedule::with_offset(1.4, 0.51, 1.0).is_ok());
    }

    #[test]
    fn gradient_cases() {
        let e1 = RegressionSample {
            a: vec![1.0, 0.0],
            y: 0.0,
        };
        assert_eq!(linreg_gradient(&[1.0, 0.0], &e1).unwrap(), vec![1.0, 0.0]);
        let exact = RegressionSample {
            a: vec![0.3, -1.2],
            y: 0.3 * 0.5 - 1.2 * 2.0,
        };
        assert!(linreg_gradient(&[0.5, 2.0], &exact)
            .unwrap()
            .iter()
            .all(|g| g.abs() < 1e-15));
        assert!(linreg_gradient(&[1.0], &e1).is_err());

        let zero_a = RegressionSample {
            a: vec![0.0; 3],
            y: 1.0,
        };
        assert_eq!(logistic_gradient(&[1.0, 2.0, 3.0], &zero_a).unwrap(), vec![0.0; 3]);
        let saturated = RegressionSample { a: vec![1.0], y: 1.0 };
        assert!(logistic_gradient(&[25.0], &saturated).unwrap()[0].abs() < 1e-9);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = derive_rng(21, &[]);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = if rng.random::<bool>() { 1.0 } else { 0.0 };
            // negative log-likelihood b(z) − z y with b(z) = log(1 + e^z)
            let nll = |x: &[f64]| {
                let z = dot(&a, x);
                (1.0 + z.exp()).ln() - z * y
            };
            let g = logistic_gradient(&x, &RegressionSample { a: a.clone(), y }).unwrap();
            for i in 0..4 {
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (nll(&xp) - nll(&xm)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn linreg_population_gradient() {
        // E[a (⟨a, x⟩ − y)] = x − x* for isotropic Gaussian a and mean-zero noise.
        let x_star = vec![0.2, -0.4, 1.0];
        let x = vec![1.0, 0.5, -0.5];
        let mut stream = LinRegArStream::new(x_star.clone(), 0.0, derive_rng(3, &[])).unwrap();
        let n = 100_000;
        let mut sum = [0.0; 3];
        let mut sum_sq = [0.0; 3];
        for _ in 0..n {
            let g = linreg_gradient(&x, stream.advance()).unwrap();
            for i in 0..3 {
                sum[i] += g[i];
                sum_sq[i] += g[i] * g[i];
            }
        }
        for i in 0..3 {
            let mean = sum[i] / n as f64;
            let sd = (sum_sq[i] / n as f64 - mean * mean).sqrt();
            let target = x[i] - x_star[i];
            assert!((mean - target).abs() < 3.0 * sd / (n as f64).sqrt(), "{i}");
        }
    }

    #[test]
    fn qlearning_increment_cases() {
        let q = QTable::zeros(2, 2);
        let tr = Transition {
            state: 1,
            action: 0,
            reward: 1.0,
            next_state: 0,
        };
        assert_eq!(qlearning_increment(&q, &tr, 0.0).unwrap(), (2, -1.0));
        let oracle = QLearningOracle {
            n_states: 2,
            n_actions: 2,
            gamma: 0.0,
        };
        let mut x = vec![0.0; 4];
        oracle.apply(&mut x, &tr, 0.3);
        assert_eq!(x, vec![0.0, 0.0, 0.3, 0.0]);

        // Bellman fixed point with a deterministic successor.
        let mdp = Mdp::new(2, 1, 0.5, vec![0.0, 1.0, 1.0, 0.0], vec![0.2, 0.8]).unwrap();
        let qstar = mdp.value_iteration(1e-14).unwrap();
        let tr = Transition {
            state: 0,
            action: 0,
            reward: 0.2,
            next_state: 1,
        };
        assert!(qlearning_increment(&qstar, &tr, 0.5).unwrap().1.abs() < 1e-12);

        let bad = Transition {
            state: 5,
            ..tr
        };
        assert!(qlearning_increment(&qstar, &bad, 0.5).is_err());
    }

    #[test]
    fn qlearning_converges_to_value_iteration() {
        let mdp = Arc::new(
            Mdp::new(
                2,
                2,
                0.5,
                vec![0.7, 0.3, 0.2, 0.8, 0.5, 0.5, 0.9, 0.1],
                vec![0.1, 0.9, 0.6, 0.3],
            )
            .unwrap(),
        );
        let qstar = mdp.value_iteration(1e-12).unwrap();
        let oracle = QLearningOracle {
            n_states: 2,
            n_actions: 2,
            gamma: 0.5,
        };
        let mut stream = MdpStream::new(mdp, 0, derive_rng(17, &[])).unwrap();
        let schedule = StepSchedule::with_offset(1.0, 0.6, 1.0).unwrap();
        let mut state = SaRun::new(vec![0.0; 4], 1000);
        for t in 1..=1_000_000usize {
            let tr = *stream.advance();
            state.step(&oracle, &tr, schedule.step_size(t).unwrap()).unwrap();
        }
        let err = state
            .xbar
            .iter()
            .zip(qstar.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.05, "sup error {err}");
    }

    struct Zero;
    impl Oracle for Zero {
        type Sample = RegressionSample;
        fn dim(&self) -> usize {
            2
        }
        fn apply(&self, _: &mut [f64], _: &RegressionSample, _: f64) {}
    }

    #[test]
    fn zero_oracle_and_empty_window() {
        let schedule = StepSchedule::polynomial(0.5, 0.6).unwrap();
        let mut stream = LinRegArStream::new(vec![1.0, 1.0], 0.5, derive_rng(0, &[])).unwrap();
        let mut fired = 0;
        let run_a = run(&Zero, &mut stream, &schedule, 10, 10, vec![0.3, -0.2], &mut |_: usize,
                                                                                      _: &[f64],
                                                                                      _: &[f64]| {
            fired += 1
        })
        .unwrap();
        assert_eq!(fired, 0);
        assert!(run_a.mean().is_none());

        let run_b = run(&Zero, &mut stream, &schedule, 50, 5, vec![0.3, -0.2], &mut Silent).unwrap();
        assert_eq!(run_b.x, vec![0.3, -0.2]);
        assert_eq!(run_b.t, 45);
        for (m, x) in run_b.mean().unwrap().iter().zip([0.3, -0.2]) {
            assert!((m - x).abs() < 1e-15);
        }
        assert!(run(&Zero, &mut stream, &schedule, 5, 6, vec![0.0; 2], &mut Silent).is_err());
    }

    #[test]
    fn running_mean_is_exact_and_indices_restart() {
        let schedule = StepSchedule::polynomial(10f64.powf(-0.5), 0.505).unwrap();
        let mut stream = LinRegArStream::new(vec![0.5; 10], 0.9, derive_rng(2, &[])).unwrap();
        let mut traj: Vec<Vec<f64>> = Vec::new();
        let mut ts = Vec::new();
        let res = run(
            &LinRegOracle { dim: 10 },
            &mut stream,
            &schedule,
            2000,
            100,
            vec![0.0; 10],
            &mut |t: usize, x: &[f64], _: &[f64]| {
                ts.push(t);
                traj.push(x.to_vec());
            },
        )
        .unwrap();
        assert_eq!(ts, (1..=1900).collect::<Vec<_>>());
        for i in 0..10 {
            let mean = traj.iter().map(|x| x[i]).sum::<f64>() / traj.len() as f64;
            assert!((mean - res.xbar[i]).abs() <= 1e-10 * mean.abs().max(1.0));
        }
        assert_eq!(res.oracle_calls, 2000);
    }

    #[test]
    fn divergence_reports_step() {
        struct Blowup;
        impl Oracle for Blowup {
            type Sample = RegressionSample;
            fn dim(&self) -> usize {
                1
            }
            fn apply(&self, x: &mut [f64], s: &RegressionSample, _: f64) {
                x[0] = if s.y > 1e300 { f64::NAN } else { x[0] * 1e200 + 1.0 };
            }
        }
        let schedule = StepSchedule::polynomial(1.0, 0.6).unwrap();
        let mut stream = LinRegArStream::new(vec![0.0], 0.0, derive_rng(0, &[])).unwrap();
        let err = run(&Blowup, &mut stream, &schedule, 10, 0, vec![1.0], &mut Silent).unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 2 }));
    }
}
