//! Detection probability functions.
//!
//! A detection function maps a perturbation size `tau` to the probability
//! that an attack of that size goes *unnoticed* by the operator. Larger
//! perturbations are easier to notice, so every variant is non-increasing
//! in `tau` (a fitted logistic can violate this; callers are expected to
//! warn, see [`LogisticFit::is_increasing`]).
//!
//! Variants:
//! - `Step`: perturbations up to a threshold are never detected, larger
//!   ones always.
//! - `Logistic`: smooth threshold `sigmoid(beta0 - beta1 * tau)`.
//! - `Table`: piecewise-constant lookup, the value of the largest
//!   breakpoint at or below `tau`. Below the first breakpoint the first
//!   value is used (constant extension on both sides).
//! - `EmpiricalAverage`: one minus the average attack success rate over a
//!   pool of comparable models; built by
//!   [`crate::estimators::average_detection_fn`]. This is the variant that
//!   makes detector-free estimation possible.

use std::fmt;

use rand::rngs::StdRng;
use rand::Rng;

use crate::error::{Error, Result};

/// Pooled attack-success data backing the empirical-average variant:
/// every recorded perturbation size of every model over a shared sample.
#[derive(Clone, Debug, PartialEq)]
pub struct AverageAsr {
    /// Finite perturbation sizes of all models, ascending.
    sorted_finite: Vec<f64>,
    /// Total number of (observation, model) pairs, including the pairs
    /// with no successful attack.
    total: usize,
}

impl AverageAsr {
    pub(crate) fn new(sorted_finite: Vec<f64>, total: usize) -> Result<Self> {
        if total == 0 {
            return Err(Error::EmptyInput("empirical average over zero records".into()));
        }
        if sorted_finite.len() > total {
            return Err(Error::invalid(
                "more finite perturbation sizes than records",
            ));
        }
        if sorted_finite.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid(
                "pooled perturbation sizes must be finite and > 0",
            ));
        }
        if sorted_finite.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("pooled perturbation sizes must be sorted"));
        }
        Ok(AverageAsr {
            sorted_finite,
            total,
        })
    }

    /// Number of pooled pairs with perturbation size strictly above
    /// `tau`; pairs without a successful attack count as above every
    /// finite threshold.
    pub fn count_above(&self, tau: f64) -> usize {
        let at_most = self.sorted_finite.partition_point(|d| *d <= tau);
        self.total - at_most
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// Probability that a perturbation of a given size goes undetected.
#[derive(Clone, Debug, PartialEq)]
pub enum DetectionFunction {
    Step { theta: f64 },
    Logistic { beta0: f64, beta1: f64 },
    Table { breakpoints: Vec<(f64, f64)> },
    EmpiricalAverage(AverageAsr),
}

impl DetectionFunction {
    pub fn step(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta < 0.0 {
            return Err(Error::invalid("step threshold must be finite and >= 0"));
        }
        Ok(DetectionFunction::Step { theta })
    }

    pub fn logistic(beta0: f64, beta1: f64) -> Result<Self> {
        if !beta0.is_finite() || !beta1.is_finite() {
            return Err(Error::invalid("logistic parameters must be finite"));
        }
        Ok(DetectionFunction::Logistic { beta0, beta1 })
    }

    /// `(tau, value)` breakpoints, strictly ascending in `tau`, values in
    /// `[0, 1]` and non-increasing.
    pub fn table(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::EmptyInput("detection table".into()));
        }
        for &(tau, v) in &breakpoints {
            if !tau.is_finite() || tau < 0.0 {
                return Err(Error::invalid(format!(
                    "table breakpoint tau must be finite and >= 0, got {tau}"
                )));
            }
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "table value must lie in [0, 1], got {v}"
                )));
            }
        }
        if breakpoints.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid("table breakpoints must be strictly ascending"));
        }
        if breakpoints.windows(2).any(|w| w[0].1 < w[1].1) {
            return Err(Error::invalid(
                "table values must be non-increasing in tau",
            ));
        }
        Ok(DetectionFunction::Table { breakpoints })
    }

    pub(crate) fn empirical_average(avg: AverageAsr) -> Self {
        DetectionFunction::EmpiricalAverage(avg)
    }

    /// Probability of non-detection at perturbation size `tau`. Rejects
    /// negative and non-finite `tau`: an infinite perturbation size means
    /// "no successful attack" and has no detection probability.
    pub fn eval(&self, tau: f64) -> Result<f64> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::invalid(format!(
                "detection functions are defined for finite tau >= 0, got {tau}"
            )));
        }
        Ok(match self {
            DetectionFunction::Step { theta } => {
                if tau <= *theta {
                    1.0
                } else {
                    0.0
                }
            }
            DetectionFunction::Logistic { beta0, beta1 } => sigmoid(beta0 - beta1 * tau),
            DetectionFunction::Table { breakpoints } => {
                let idx = breakpoints.partition_point(|&(t, _)| t <= tau);
                if idx == 0 {
                    breakpoints[0].1
                } else {
                    breakpoints[idx - 1].1
                }
            }
            DetectionFunction::EmpiricalAverage(avg) => {
                avg.count_above(tau) as f64 / avg.total() as f64
            }
        })
    }

    /// Whether the function is guaranteed non-increasing in `tau`. Only a
    /// logistic with negative slope parameter can violate monotonicity;
    /// the other variants enforce it by construction.
    pub fn is_non_increasing(&self) -> bool {
        match self {
            DetectionFunction::Logistic { beta1, .. } => *beta1 >= 0.0,
            _ => true,
        }
    }
}

impl fmt::Display for DetectionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectionFunction::Step { theta } => write!(f, "step({theta})"),
            DetectionFunction::Logistic { beta0, beta1 } => {
                write!(f, "logistic({beta0},{beta1})")
            }
            DetectionFunction::Table { breakpoints } => {
                write!(f, "table({} breakpoints)", breakpoints.len())
            }
            DetectionFunction::EmpiricalAverage(avg) => {
                write!(f, "average({} records)", avg.total())
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// One detector observation: a perturbation of size `tau` that either
/// slipped through (`undetected`) or was caught.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionSample {
    pub tau: f64,
    pub undetected: bool,
}

/// Result of [`fit_logistic`], with fit diagnostics.
#[derive(Clone, Debug)]
pub struct LogisticFit {
    pub beta0: f64,
    pub beta1: f64,
    /// Unpenalized Bernoulli log-likelihood at the optimum.
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn function(&self) -> DetectionFunction {
        DetectionFunction::Logistic {
            beta0: self.beta0,
            beta1: self.beta1,
        }
    }

    /// A fitted curve that increases with `tau` means bigger
    /// perturbations look *less* detectable; almost certainly an artifact
    /// of the sample. Callers should surface a warning.
    pub fn is_increasing(&self) -> bool {
        self.beta1 < 0.0
    }
}

const FIT_MAX_ITERATIONS: usize = 100;
const FIT_TOLERANCE: f64 = 1e-10;

/// Maximum-likelihood fit of `sigmoid(beta0 - beta1 * tau)` to detector
/// samples by Newton iteration (IRLS) with step halving.
///
/// The L2 penalty `l2/2 * |beta|^2` is applied per sample, i.e. the
/// objective is `loglik - n * l2/2 * |beta|^2`; duplicating every sample
/// therefore leaves the optimum unchanged. With `l2 = 0` and degenerate
/// samples (a single label, or perfect separation) the optimum runs off
/// to infinity and the fit reports non-convergence suggesting `l2 > 0`.
pub fn fit_logistic(samples: &[DetectionSample], l2: f64) -> Result<LogisticFit> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("detector samples".into()));
    }
    if !l2.is_finite() || l2 < 0.0 {
        return Err(Error::invalid("l2 penalty must be finite and >= 0"));
    }
    for s in samples {
        if !s.tau.is_finite() || s.tau < 0.0 {
            return Err(Error::invalid(format!(
                "detector sample tau must be finite and >= 0, got {}",
                s.tau
            )));
        }
    }

    let n = samples.len() as f64;
    let ridge = n * l2;
    // eta = b0 + b1 * z with z = -tau, so the fitted slope is the
    // detection-function parameter directly.
    let objective = |b0: f64, b1: f64| -> f64 {
        let mut ll = 0.0;
        for s in samples {
            let eta = b0 - b1 * s.tau;
            ll -= if s.undetected {
                softplus(-eta)
            } else {
                softplus(eta)
            };
        }
        ll - 0.5 * ridge * (b0 * b0 + b1 * b1)
    };

    let mut b0 = 0.0;
    let mut b1 = 0.0;
    let mut obj = objective(b0, b1);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < FIT_MAX_ITERATIONS {
        iterations += 1;
        let mut g0 = -ridge * b0;
        let mut g1 = -ridge * b1;
        let mut h00 = ridge;
        let mut h01 = 0.0;
        let mut h11 = ridge;
        for s in samples {
            let z = -s.tau;
            let p = sigmoid(b0 + b1 * z);
            let r = if s.undetected { 1.0 - p } else { -p };
            g0 += r;
            g1 += r * z;
            let w = p * (1.0 - p);
            h00 += w;
            h01 += w * z;
            h11 += w * z * z;
        }
        let det = h00 * h11 - h01 * h01;
        if !det.is_finite() || det <= 1e-300 {
            return Err(Error::NonConvergence(
                "logistic fit: singular curvature; the samples may all share one label, try l2 > 0"
                    .into(),
            ));
        }
        let mut d0 = (h11 * g0 - h01 * g1) / det;
        let mut d1 = (h00 * g1 - h01 * g0) / det;
        // Halve the Newton step until the penalized objective improves.
        let mut halvings = 0;
        loop {
            let cand = objective(b0 + d0, b1 + d1);
            if cand >= obj || halvings >= 60 {
                b0 += d0;
                b1 += d1;
                obj = cand;
                break;
            }
            d0 *= 0.5;
            d1 *= 0.5;
            halvings += 1;
        }
        if d0.abs().max(d1.abs()) < FIT_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "logistic fit did not converge in {FIT_MAX_ITERATIONS} iterations{}",
            if l2 == 0.0 { "; try l2 > 0" } else { "" }
        )));
    }

    let mut ll = 0.0;
    for s in samples {
        let eta = b0 - b1 * s.tau;
        ll -= if s.undetected {
            softplus(-eta)
        } else {
            softplus(eta)
        };
    }
    Ok(LogisticFit {
        beta0: b0,
        beta1: b1,
        log_likelihood: ll,
        iterations,
    })
}

/// One Bernoulli draw of the detector at perturbation size `tau`:
/// `true` means the attack was detected, which happens with probability
/// `1 - f(tau)`. The caller owns the rng stream, so identical streams
/// replay identical verdicts.
pub fn simulate_detector(f: &DetectionFunction, tau: f64, rng: &mut StdRng) -> Result<bool> {
    let undetected_p = f.eval(tau)?;
    let u: f64 = rng.random();
    Ok(u >= undetected_p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn step_is_one_up_to_and_including_the_threshold() {
        let f = DetectionFunction::step(0.5).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 1.0);
        assert_eq!(f.eval(0.5).unwrap(), 1.0);
        assert_eq!(f.eval(0.5000001).unwrap(), 0.0);
    }

    #[test]
    fn logistic_crosses_half_at_beta0_over_beta1() {
        let f = DetectionFunction::logistic(5.0, 40.0).unwrap();
        assert_eq!(f.eval(0.125).unwrap(), 0.5);
        assert!(f.eval(0.0).unwrap() > 0.99);
        assert!(f.eval(0.3).unwrap() < 0.001);
    }

    #[test]
    fn table_uses_the_largest_breakpoint_at_or_below_tau() {
        let f = DetectionFunction::table(vec![(0.1, 0.9), (0.2, 0.5), (0.4, 0.1)]).unwrap();
        assert_eq!(f.eval(0.05).unwrap(), 0.9); // left extension
        assert_eq!(f.eval(0.1).unwrap(), 0.9);
        assert_eq!(f.eval(0.15).unwrap(), 0.9);
        assert_eq!(f.eval(0.2).unwrap(), 0.5);
        assert_eq!(f.eval(0.39).unwrap(), 0.5);
        assert_eq!(f.eval(5.0).unwrap(), 0.1); // right extension
    }

    #[test]
    fn table_construction_rejects_bad_shapes() {
        assert!(DetectionFunction::table(vec![]).is_err());
        assert!(DetectionFunction::table(vec![(0.2, 0.5), (0.1, 0.9)]).is_err());
        assert!(DetectionFunction::table(vec![(0.1, 0.5), (0.1, 0.5)]).is_err());
        assert!(DetectionFunction::table(vec![(0.1, 0.5), (0.2, 0.9)]).is_err());
        assert!(DetectionFunction::table(vec![(0.1, 1.5)]).is_err());
    }

    #[test]
    fn eval_rejects_negative_and_non_finite_tau() {
        let f = DetectionFunction::step(0.5).unwrap();
        assert!(f.eval(-0.1).is_err());
        assert!(f.eval(f64::NAN).is_err());
        assert!(f.eval(f64::INFINITY).is_err());
    }

    #[test]
    fn step_detector_simulation_is_degenerate() {
        let f = DetectionFunction::step(0.3).unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..200 {
            assert!(!simulate_detector(&f, 0.3, &mut rng).unwrap());
            assert!(simulate_detector(&f, 0.31, &mut rng).unwrap());
        }
    }

    #[test]
    fn detector_simulation_matches_the_curve_in_frequency() {
        let f = DetectionFunction::logistic(2.0, 10.0).unwrap();
        let tau = 0.15;
        let p = f.eval(tau).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let n = 20_000;
        let undetected = (0..n)
            .filter(|_| !simulate_detector(&f, tau, &mut rng).unwrap())
            .count();
        let freq = undetected as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (freq - p).abs() <= 4.0 * se,
            "frequency {freq} vs probability {p}"
        );
    }

    fn sampled_curve(beta0: f64, beta1: f64, n: usize, seed: u64) -> Vec<DetectionSample> {
        let truth = DetectionFunction::logistic(beta0, beta1).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let tau = rng.random_range(0.0..0.3);
                let undetected = rng.random::<f64>() < truth.eval(tau).unwrap();
                DetectionSample { tau, undetected }
            })
            .collect()
    }

    #[test]
    fn fit_recovers_a_logistic_curve_within_five_points_mae() {
        let samples = sampled_curve(5.0, 40.0, 500, 42);
        let fit = fit_logistic(&samples, 1e-6).unwrap();
        let truth = DetectionFunction::logistic(5.0, 40.0).unwrap();
        let fitted = fit.function();
        let grid: Vec<f64> = (0..=60).map(|i| 0.005 * i as f64).collect();
        let mae = grid
            .iter()
            .map(|&t| (fitted.eval(t).unwrap() - truth.eval(t).unwrap()).abs())
            .sum::<f64>()
            / grid.len() as f64;
        assert!(mae <= 0.05, "mae {mae} with fit {fit:?}");
        assert!(!fit.is_increasing());
    }

    #[test]
    fn duplicating_every_sample_leaves_the_fit_unchanged() {
        let samples = sampled_curve(3.0, 20.0, 200, 9);
        let doubled: Vec<DetectionSample> = samples
            .iter()
            .chain(samples.iter())
            .copied()
            .collect();
        let a = fit_logistic(&samples, 1e-6).unwrap();
        let b = fit_logistic(&doubled, 1e-6).unwrap();
        assert!(
            (a.beta0 - b.beta0).abs() <= 1e-9 && (a.beta1 - b.beta1).abs() <= 1e-9,
            "({}, {}) vs ({}, {})",
            a.beta0,
            a.beta1,
            b.beta0,
            b.beta1
        );
    }

    #[test]
    fn single_label_samples_without_ridge_fail_with_advice() {
        let samples: Vec<DetectionSample> = (0..50)
            .map(|i| DetectionSample {
                tau: i as f64 / 100.0,
                undetected: true,
            })
            .collect();
        let err = fit_logistic(&samples, 0.0).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::NonConvergence(_)));
        assert!(msg.contains("l2 > 0"), "unhelpful message: {msg}");

        // The same samples fit fine once the ridge pins the optimum.
        let fit = fit_logistic(&samples, 1e-6).unwrap();
        assert!(fit.beta0.is_finite() && fit.beta1.is_finite());
    }

    #[test]
    fn perfectly_separated_samples_converge_with_default_ridge() {
        let samples: Vec<DetectionSample> = (0..100)
            .map(|i| {
                let tau = i as f64 / 250.0;
                DetectionSample {
                    tau,
                    undetected: tau < 0.2,
                }
            })
            .collect();
        let fit = fit_logistic(&samples, 1e-6).unwrap();
        assert!(fit.beta0.is_finite() && fit.beta1.is_finite());
        assert!(fit.beta1 > 0.0);
    }

    #[test]
    fn non_increasing_flags() {
        assert!(DetectionFunction::step(0.1).unwrap().is_non_increasing());
        assert!(DetectionFunction::logistic(1.0, 5.0).unwrap().is_non_increasing());
        assert!(!DetectionFunction::logistic(1.0, -5.0).unwrap().is_non_increasing());
    }
}
