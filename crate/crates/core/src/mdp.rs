//! Finite MDPs: random generation, ground-truth Q* by value iteration, and the
//! optimality-gap diagnostic used to reject MDPs with tied optimal actions.
//!
//! Q-tables are stored row-major over `(s, a)`, i.e. entry `s * n_actions + a`.
//! The same order is used by the Q-learning oracle, so a `QTable`'s slice is
//! directly the SA iterate.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-12;

/// Minimum optimality gap accepted by [`random_mdp_with_unique_policy`].
pub const MIN_OPTIMALITY_GAP: f64 = 1e-6;
/// Sup-norm accuracy of the ground-truth Q*.
pub const VALUE_ITERATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    /// `P(s' | s, a)` at `(s * n_actions + a) * n_states + s'`.
    transitions: Vec<f64>,
    /// Mean reward `r(s, a)`.
    rewards: Vec<f64>,
}

impl Mdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("n_states/n_actions", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid("gamma", format!("{gamma} not in [0, 1)")));
        }
        let pairs = n_states * n_actions;
        if transitions.len() != pairs * n_states {
            return Err(Error::DimensionMismatch {
                expected: pairs * n_states,
                got: transitions.len(),
            });
        }
        if rewards.len() != pairs {
            return Err(Error::DimensionMismatch {
                expected: pairs,
                got: rewards.len(),
            });
        }
        for (pair, row) in transitions.chunks(n_states).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::invalid(
                    "transitions",
                    format!("negative or NaN entry in row {pair}"),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::invalid(
                    "transitions",
                    format!("row {pair} sums to {sum}"),
                ));
            }
        }
        if let Some(r) = rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::invalid("rewards", format!("mean reward {r} not in [0, 1]")));
        }
        Ok(Self {
            n_states,
            n_actions,
            gamma,
            transitions,
            rewards,
        })
    }

    /// Rewards `r(s, a) ~ U[0, 1]`; transition rows `u(s') / Σ u` with
    /// `u ~ U(0, 1)` i.i.d.
    pub fn random<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("n_states/n_actions", "must be at least 1"));
        }
        let pairs = n_states * n_actions;
        let mut transitions = Vec::with_capacity(pairs * n_states);
        let mut rewards = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            rewards.push(rng.random::<f64>());
            let u: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>()).collect();
            transitions.extend(normalized(&u));
        }
        Self::new(n_states, n_actions, gamma, transitions, rewards)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// One application of the Bellman optimality operator `r + γ P max_a Q`.
    pub fn bellman(&self, q: &QTable) -> QTable {
        let v: Vec<f64> = (0..self.n_states).map(|s| q.max_value(s)).collect();
        let values = (0..self.n_pairs())
            .map(|pair| {
                let row = &self.transitions[pair * self.n_states..(pair + 1) * self.n_states];
                let ev: f64 = row.iter().zip(&v).map(|(p, v)| p * v).sum();
                self.rewards[pair] + self.gamma * ev
            })
            .collect();
        QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values,
        }
    }

    /// Q* with sup-norm error at most `tol`.
    pub fn value_iteration(&self, tol: f64) -> Result<QTable> {
        self.value_iteration_trace(tol).map(|(q, _)| q)
    }

    /// Like [`Mdp::value_iteration`], also returning the sup-norm change of
    /// every sweep.
    pub fn value_iteration_trace(&self, tol: f64) -> Result<(QTable, Vec<f64>)> {
        if !(tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        let mut q = QTable::zeros(self.n_states, self.n_actions);
        let mut deltas = Vec::new();
        if self.gamma == 0.0 {
            let next = self.bellman(&q);
            deltas.push(next.sup_distance(&q));
            return Ok((next, deltas));
        }
        // ‖Q_{k+1} − Q*‖ ≤ γ/(1−γ) ‖Q_{k+1} − Q_k‖
        let stop = tol * (1.0 - self.gamma) / self.gamma;
        loop {
            let next = self.bellman(&q);
            let delta = next.sup_distance(&q);
            deltas.push(delta);
            q = next;
            if delta < stop {
                return Ok((q, deltas));
            }
        }
    }

    /// Plain-text dump: a header then one line per `(s, a)` in lexicographic
    /// order holding `s a r(s,a) P(0|s,a) .. P(S-1|s,a)`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# sa-inference mdp v1");
        let _ = writeln!(out, "states {}", self.n_states);
        let _ = writeln!(out, "actions {}", self.n_actions);
        let _ = writeln!(out, "gamma {}", self.gamma);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let _ = write!(out, "{s} {a} {}", self.reward(s, a));
                for p in self.transition_row(s, a) {
                    let _ = write!(out, " {p}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |reason: String| Error::Parse {
            what: "mdp text",
            reason,
        };
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}`")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok(v.trim().to_string()),
                _ => Err(bad(format!("expected `{key} <value>`, found `{line}`"))),
            }
        };
        let n_states: usize = header("states")?.parse().map_err(|e| bad(format!("{e}")))?;
        let n_actions: usize = header("actions")?.parse().map_err(|e| bad(format!("{e}")))?;
        let gamma: f64 = header("gamma")?.parse().map_err(|e| bad(format!("{e}")))?;
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 + n_states {
                return Err(bad(format!("row {i}: expected {} fields", 3 + n_states)));
            }
            let s: usize = fields[0].parse().map_err(|e| bad(format!("{e}")))?;
            let a: usize = fields[1].parse().map_err(|e| bad(format!("{e}")))?;
            if n_actions == 0 || (s, a) != (i / n_actions, i % n_actions) {
                return Err(bad(format!("row {i}: pair ({s}, {a}) out of order")));
            }
            rewards.push(fields[2].parse().map_err(|e| bad(format!("{e}")))?);
            for f in &fields[3..] {
                transitions.push(f.parse().map_err(|e| bad(format!("{e}")))?);
            }
        }
        Self::new(n_states, n_actions, gamma, transitions, rewards)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn normalized(u: &[f64]) -> Vec<f64> {
    let total: f64 = u.iter().sum();
    let mut row: Vec<f64> = u.iter().map(|x| x / total).collect();
    // Push the rounding residue onto the largest entry so the row sums to 1.
    let residue = 1.0 - row.iter().sum::<f64>();
    if let Some(big) = row
        .iter_mut()
        .max_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
    {
        *big += residue;
    }
    row
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                expected: n_states * n_actions,
                got: values.len(),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max_value(&self, s: usize) -> f64 {
        max_of(self.row(s))
    }

    pub fn greedy_action(&self, s: usize) -> usize {
        let row = self.row(s);
        (0..row.len()).fold(0, |best, a| if row[a] > row[best] { a } else { best })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `Δ = min_s min_{a ≠ π*(s)} (V*(s) − Q*(s, a))`. Infinite when there is
/// only one action (no competitor exists).
pub fn optimality_gap(qstar: &QTable) -> f64 {
    if qstar.n_actions < 2 {
        return f64::INFINITY;
    }
    (0..qstar.n_states)
        .map(|s| {
            let row = qstar.row(s);
            let best = qstar.greedy_action(s);
            row.iter()
                .enumerate()
                .filter(|&(a, _)| a != best)
                .map(|(_, &q)| row[best] - q)
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Mean of Q* over state-action pairs drawn uniformly.
pub fn estimand_mean_qstar(qstar: &QTable) -> f64 {
    qstar.values.iter().sum::<f64>() / qstar.values.len() as f64
}

/// The uniform-average functional over `|S × A|` entries (not unit-norm).
pub fn mean_qstar_direction(n_pairs: usize) -> Vec<f64> {
    vec![1.0 / n_pairs as f64; n_pairs]
}

/// Draws random MDPs until one has a unique optimal policy (gap at least
/// [`MIN_OPTIMALITY_GAP`]), returning it with its Q*.
pub fn random_mdp_with_unique_policy<R: Rng + ?Sized>(
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<(Mdp, QTable)> {
    const MAX_ATTEMPTS: usize = 1000;
    for _ in 0..MAX_ATTEMPTS {
        let mdp = Mdp::random(n_states, n_actions, gamma, rng)?;
        let qstar = mdp.value_iteration(VALUE_ITERATION_TOL)?;
        if optimality_gap(&qstar) >= MIN_OPTIMALITY_GAP {
            return Ok((mdp, qstar));
        }
    }
    Err(Error::invalid(
        "mdp",
        format!("no MDP with a unique optimal policy in {MAX_ATTEMPTS} draws"),
    ))
}
