//! Rate-optimal step-size exponents.
//!
//! For step sizes `η_t ∝ t^{−α}` the Lévy–Prokhorov distance between the
//! normalized partial-sum process and its Brownian limit decays like
//! `T^{−J}`. The best `α` depends on the noise moment order `p` and on
//! whether the data are i.i.d. with a linear update.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Linear update with i.i.d. data.
    IidLinear,
    /// Markovian data or a nonlinear update.
    MarkovianOrNonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaStar {
    /// Optimal exponent `α*`.
    pub alpha: f64,
    /// Rate exponent `J` at `α*`.
    pub rate: f64,
}

/// Moment order where the first and middle branches meet. With
/// `δ = (p − 2)/2` it is the root of `4δ³ + 7δ² − 2δ − 3` in `(0.5, 1)`.
pub fn branch_point() -> f64 {
    let ell = |d: f64| ((4.0 * d + 7.0) * d - 2.0) * d - 3.0;
    let (mut lo, mut hi) = (0.5, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ell(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    2.0 + (lo + hi)
}

/// First branch: `α* = (2p² + p − 4)/(3p² + 2p − 4)`,
/// `J = (p − 2)p / (2(3p² + 2p − 4))`.
pub fn low_moment_branch(p: f64) -> AlphaStar {
    let den = 3.0 * p * p + 2.0 * p - 4.0;
    AlphaStar {
        alpha: (2.0 * p * p + p - 4.0) / den,
        rate: (p - 2.0) * p / (2.0 * den),
    }
}

/// Middle branch: `α* = (√(3(p² − p + 1)) − (p + 1))/(p − 2)`,
/// `J = ((2p − 1) − √(3(p² − p + 1)))/(2(p + 1))`.
pub fn middle_branch(p: f64) -> AlphaStar {
    let root = (3.0 * (p * p - p + 1.0)).sqrt();
    AlphaStar {
        alpha: (root - (p + 1.0)) / (p - 2.0),
        rate: ((2.0 * p - 1.0) - root) / (2.0 * (p + 1.0)),
    }
}

/// Saturated branch for `p ≥ 8`: `α* = (√19 − 3)/2`, `J = (5 − √19)/6`.
pub fn high_moment_branch() -> AlphaStar {
    let s19 = 19f64.sqrt();
    AlphaStar {
        alpha: (s19 - 3.0) / 2.0,
        rate: (5.0 - s19) / 6.0,
    }
}

/// `α*` and its rate exponent for noise with `p > 2` moments. In the
/// i.i.d.-linear regime the optimum sits at the boundary `0.5 + ε` of the
/// admissible range, so `eps ∈ (0, 0.5)` is required there and ignored
/// otherwise.
pub fn optimal_alpha(p: f64, regime: Regime, eps: f64) -> Result<AlphaStar> {
    if !(p > 2.0) {
        return Err(Error::invalid("p", format!("moment order {p} must exceed 2")));
    }
    match regime {
        Regime::IidLinear => {
            if !(eps > 0.0 && eps < 0.5) {
                return Err(Error::invalid("eps", format!("{eps} not in (0, 0.5)")));
            }
            let base = ((p - 2.0) / (4.0 * (p + 1.0))).min(1.0 / 6.0);
            let base = if p.is_infinite() { 1.0 / 6.0 } else { base };
            Ok(AlphaStar {
                alpha: 0.5 + eps,
                rate: base * (1.0 - 2.0 * eps),
            })
        }
        Regime::MarkovianOrNonlinear => Ok(if p <= branch_point() {
            low_moment_branch(p)
        } else if p <= 8.0 {
            middle_branch(p)
        } else {
            high_moment_branch()
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_values() {
        let a = optimal_alpha(8.0, Regime::MarkovianOrNonlinear, 0.0).unwrap();
        assert!((a.alpha - 0.679).abs() < 5e-4);
        assert!((a.rate - 0.107).abs() < 5e-4);
        let far = optimal_alpha(100.0, Regime::MarkovianOrNonlinear, 0.0).unwrap();
        assert_eq!(far, high_moment_branch());
    }

    #[test]
    fn continuous_at_eight() {
        let mid = middle_branch(8.0);
        let high = high_moment_branch();
        assert!((mid.rate - high.rate).abs() < 1e-12);
        assert!((mid.alpha - high.alpha).abs() < 1e-12);
    }

    #[test]
    fn continuous_at_branch_point() {
        let p0 = branch_point();
        assert!(p0 > 3.0 && p0 < 4.0);
        let (lo, mid) = (low_moment_branch(p0), middle_branch(p0));
        assert!((lo.rate - mid.rate).abs() < 1e-12, "{lo:?} vs {mid:?}");
        assert!((lo.alpha - mid.alpha).abs() < 1e-12);
        // at p0 the optimum hits 1/(1 + δ) with δ = (p0 − 2)/2
        assert!((lo.alpha - 2.0 / p0).abs() < 1e-12);
    }

    #[test]
    fn rate_increases_with_moments() {
        let mut prev = 0.0;
        for i in 1..=200 {
            let p = 2.0 + i as f64 * 0.05;
            let r = optimal_alpha(p, Regime::MarkovianOrNonlinear, 0.0).unwrap().rate;
            assert!(r >= prev - 1e-15, "p = {p}");
            prev = r;
        }
    }

    #[test]
    fn iid_branch() {
        let eps = 0.01;
        let a = optimal_alpha(4.0, Regime::IidLinear, eps).unwrap();
        assert_eq!(a.alpha, 0.51);
        assert!((a.rate - 0.1 * 0.98).abs() < 1e-15);
        let big = optimal_alpha(1e12, Regime::IidLinear, eps).unwrap();
        assert!((big.rate - 0.98 / 6.0).abs() < 1e-15);
        let inf = optimal_alpha(f64::INFINITY, Regime::IidLinear, eps).unwrap();
        assert!((inf.rate - 0.98 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_low_moments() {
        assert!(optimal_alpha(2.0, Regime::MarkovianOrNonlinear, 0.0).is_err());
        assert!(optimal_alpha(1.5, Regime::IidLinear, 0.1).is_err());
        assert!(optimal_alpha(f64::NAN, Regime::IidLinear, 0.1).is_err());
        assert!(optimal_alpha(4.0, Regime::IidLinear, 0.0).is_err());
    }
}
