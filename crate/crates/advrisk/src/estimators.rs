//! Damage-probability estimators and attack statistics.
//!
//! All estimators consume [`AttackOutcomeSet`]s: one smallest successful
//! perturbation size per observation, infinite when no attack succeeded.
//! The damage probability of a model is the chance that an attack on a
//! random observation both succeeds and goes undetected:
//!
//! ```text
//! pdam = (1 / |X|) * sum over observations with finite d_a of psi(d_a)
//! ```
//!
//! where `psi` is a detection function (probability of non-detection).
//! [`pdam_surrogate`] computes exactly that; [`pdam_monte_carlo`] replaces
//! `psi(d_a)` with one simulated detector draw per observation; and
//! [`pdam_detector_free`] needs no detector at all, using the average
//! attack success over a pool of comparable models as an implicit
//! detection function (a small perturbation that fools most models in the
//! pool is treated as hard to notice).
//!
//! Several quantities are deliberately computed along two independent
//! routes and cross-checked: the surrogate integrates `psi` both
//! record-by-record and against the success-rate step function, and the
//! empirical-average function is counted both per model and over the
//! pooled records. The checks are cheap and run unconditionally.

use crate::attack::{attack_strategy_reduce, run_attack_set, AttackContext, AttackSpec};
use crate::detection::{simulate_detector, AverageAsr, DetectionFunction};
use crate::domain::{AttackOutcomeSet, Dataset, PerturbationSize};
use crate::error::{Error, Result};
use crate::hash::{derive_indexed_seed, fnv1a_64};
use crate::models::Predictor;

use rand::rngs::StdRng;
use rand::SeedableRng;

/// How a [`RiskEstimate`] was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateMethod {
    Surrogate,
    MonteCarlo,
    DetectorFree,
}

impl std::fmt::Display for EstimateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimateMethod::Surrogate => write!(f, "surrogate"),
            EstimateMethod::MonteCarlo => write!(f, "monte-carlo"),
            EstimateMethod::DetectorFree => write!(f, "detector-free"),
        }
    }
}

/// Estimated damage probability for one model.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskEstimate {
    pub model_id: String,
    pub pdam: f64,
    /// Sample size the estimate is based on.
    pub n: usize,
    pub method: EstimateMethod,
    /// Human-readable description of the detection function used.
    pub detection: String,
}

/// Expected damage: estimated damage probability times the cost of one
/// damaging event.
pub fn operational_risk(est: &RiskEstimate, c_dam: f64) -> Result<f64> {
    if !c_dam.is_finite() || c_dam < 0.0 {
        return Err(Error::invalid(format!(
            "damage cost must be finite and >= 0, got {c_dam}"
        )));
    }
    Ok(est.pdam * c_dam)
}

fn check_tau(tau: f64) -> Result<()> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::invalid(format!(
            "tau must be finite and >= 0, got {tau}"
        )));
    }
    Ok(())
}

fn check_nonempty(o: &AttackOutcomeSet) -> Result<()> {
    if o.is_empty() {
        return Err(Error::EmptyInput(format!(
            "outcome set for model {}",
            o.model_id()
        )));
    }
    Ok(())
}

/// Compensated (Neumaier) summation; keeps the dual-route cross-checks
/// below rounding noise even on large record sets.
pub(crate) fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Number of observations whose perturbation size is at most `tau`.
pub fn asr_count(o: &AttackOutcomeSet, tau: f64) -> Result<usize> {
    check_nonempty(o)?;
    check_tau(tau)?;
    Ok(o.sorted_finite_distances().partition_point(|d| *d <= tau))
}

/// Attack success rate at perturbation budget `tau`: the fraction of
/// observations with a successful attack of size `<= tau`.
pub fn asr(o: &AttackOutcomeSet, tau: f64) -> Result<f64> {
    Ok(asr_count(o, tau)? as f64 / o.len() as f64)
}

/// Breakpoints of the success-rate step function: one `(tau, asr(tau))`
/// pair per distinct finite perturbation size, ascending. Empty when no
/// attack succeeded anywhere.
pub fn asr_curve(o: &AttackOutcomeSet) -> Result<Vec<(f64, f64)>> {
    check_nonempty(o)?;
    let n = o.len() as f64;
    let sorted = o.sorted_finite_distances();
    let mut curve: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        curve.push((v, j as f64 / n));
        i = j;
    }
    Ok(curve)
}

/// Minimum perturbation size: smallest finite `d_a`, `None` when every
/// attack failed. A biased robustness statistic; it can only shrink as
/// the sample grows.
pub fn mps(o: &AttackOutcomeSet) -> Option<f64> {
    o.sorted_finite_distances().first().copied()
}

/// Average perturbation size over the observations with a successful
/// attack, `None` when there are none. The excluded (unsuccessful)
/// observation count is `o.infinite_count()`.
pub fn aps(o: &AttackOutcomeSet) -> Option<f64> {
    let finite = o.sorted_finite_distances();
    if finite.is_empty() {
        None
    } else {
        Some(neumaier_sum(finite.iter().copied()) / finite.len() as f64)
    }
}

/// Damage probability by integrating the detection function over the
/// recorded perturbation sizes.
///
/// Computed twice: directly record-by-record, and as the integral of
/// `psi` against the success-rate step function. The two routes are
/// algebraically identical; a disagreement above 1e-12 means a broken
/// invariant, so it panics rather than returning an error.
pub fn pdam_surrogate(o: &AttackOutcomeSet, f: &DetectionFunction) -> Result<RiskEstimate> {
    check_nonempty(o)?;
    let n = o.len() as f64;

    let by_record = neumaier_sum(
        o.sorted_finite_distances()
            .iter()
            .map(|&d| f.eval(d))
            .collect::<Result<Vec<f64>>>()?
            .into_iter(),
    ) / n;

    let curve = asr_curve(o)?;
    let mut prev = 0.0;
    let mut increments = Vec::with_capacity(curve.len());
    for &(tau, r) in &curve {
        increments.push(f.eval(tau)? * (r - prev));
        prev = r;
    }
    let by_curve = neumaier_sum(increments.into_iter());

    assert!(
        (by_record - by_curve).abs() <= 1e-12,
        "surrogate estimator routes disagree: {by_record} vs {by_curve}"
    );

    Ok(RiskEstimate {
        model_id: o.model_id().to_string(),
        pdam: by_record,
        n: o.len(),
        method: EstimateMethod::Surrogate,
        detection: f.to_string(),
    })
}

/// Monte Carlo damage estimate on existing records: for every observation
/// with a successful attack, draw the detector once at its perturbation
/// size and count the undetected ones. Detector draws use a per-
/// observation stream derived from `seed`, so the result does not depend
/// on record order.
pub fn pdam_monte_carlo_from_records(
    o: &AttackOutcomeSet,
    f: &DetectionFunction,
    seed: u64,
) -> Result<RiskEstimate> {
    check_nonempty(o)?;
    let mut r = 0usize;
    for rec in o.records() {
        if let Some(d) = rec.d_a.finite_value() {
            let stream =
                derive_indexed_seed(seed, "detector", fnv1a_64(rec.observation_id.as_bytes()));
            let mut rng = StdRng::seed_from_u64(stream);
            if !simulate_detector(f, d, &mut rng)? {
                r += 1;
            }
        }
    }
    Ok(RiskEstimate {
        model_id: o.model_id().to_string(),
        pdam: r as f64 / o.len() as f64,
        n: o.len(),
        method: EstimateMethod::MonteCarlo,
        detection: f.to_string(),
    })
}

/// Full Monte Carlo pipeline: run the attack set, reduce to perturbation
/// records, then simulate one detector verdict per successful attack.
pub fn pdam_monte_carlo(
    ds: &Dataset,
    p: &Predictor,
    specs: &[AttackSpec],
    ctx: &AttackContext,
    f: &DetectionFunction,
    seed: u64,
) -> Result<RiskEstimate> {
    let candidates = run_attack_set(p, ds, specs, ctx)?;
    let outcomes = attack_strategy_reduce(&candidates, ds, p.model_id())?;
    pdam_monte_carlo_from_records(&outcomes, f, seed)
}

/// Outcome sets of several models aligned to one shared observation
/// sample (the record order of the first set).
pub(crate) struct AlignedPool {
    pub model_ids: Vec<String>,
    /// `per_model[j][i]` is the perturbation size of observation `i`
    /// against model `j`.
    pub per_model: Vec<Vec<PerturbationSize>>,
    pub n_obs: usize,
}

pub(crate) fn align(outcomes: &[AttackOutcomeSet]) -> Result<AlignedPool> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput("model pool".into()));
    }
    let first = &outcomes[0];
    check_nonempty(first)?;
    let mut position = std::collections::HashMap::with_capacity(first.len());
    for (i, r) in first.records().iter().enumerate() {
        position.insert(r.observation_id.as_str(), i);
    }
    let mut model_ids = Vec::with_capacity(outcomes.len());
    let mut per_model = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        if model_ids.iter().any(|m| m == o.model_id()) {
            return Err(Error::invalid(format!(
                "model {} appears twice in the pool",
                o.model_id()
            )));
        }
        if o.len() != first.len() {
            return Err(Error::SampleMismatch(format!(
                "model {} has {} observations, model {} has {}",
                o.model_id(),
                o.len(),
                first.model_id(),
                first.len()
            )));
        }
        let mut sizes = vec![PerturbationSize::Infinite; first.len()];
        for r in o.records() {
            match position.get(r.observation_id.as_str()) {
                Some(&i) => sizes[i] = r.d_a,
                None => {
                    return Err(Error::SampleMismatch(format!(
                        "model {} covers observation {} which model {} does not",
                        o.model_id(),
                        r.observation_id,
                        first.model_id()
                    )))
                }
            }
        }
        model_ids.push(o.model_id().to_string());
        per_model.push(sizes);
    }
    Ok(AlignedPool {
        model_ids,
        per_model,
        n_obs: first.len(),
    })
}

/// Number of (observation, model) pairs whose perturbation size exceeds
/// `tau`; pairs with no successful attack count as exceeding every finite
/// threshold. All outcome sets must cover the same sample.
pub fn w_count(outcomes: &[AttackOutcomeSet], tau: f64) -> Result<usize> {
    check_tau(tau)?;
    let pool = align(outcomes)?;
    Ok(pool
        .per_model
        .iter()
        .flatten()
        .filter(|d| d.exceeds(tau))
        .count())
}

/// Detection function implied by a pool of models over a shared sample:
/// the probability that a perturbation of size `tau` goes unnoticed is
/// taken to be one minus the average attack success rate at `tau`.
///
/// Construction cross-checks, at every distinct recorded size, that the
/// per-model counting route (`1 - mean asr`) and the pooled counting
/// route (`W(tau) / (I*J)`) agree exactly.
pub fn average_detection_fn(outcomes: &[AttackOutcomeSet]) -> Result<DetectionFunction> {
    let pool = align(outcomes)?;
    let total = pool.n_obs * outcomes.len();
    let mut pooled: Vec<f64> = pool
        .per_model
        .iter()
        .flatten()
        .filter_map(PerturbationSize::finite_value)
        .collect();
    pooled.sort_by(f64::total_cmp);
    let avg = AverageAsr::new(pooled.clone(), total)?;

    let mut check_points: Vec<f64> = vec![0.0];
    check_points.extend(pooled.iter().copied());
    check_points.dedup();
    for &tau in &check_points {
        let per_model: usize = outcomes
            .iter()
            .map(|o| asr_count(o, tau))
            .sum::<Result<usize>>()?;
        let above = avg.count_above(tau);
        assert!(
            per_model + above == total,
            "average detection function routes disagree at tau {tau}: \
             {per_model} successes per-model vs {above} above pooled, total {total}"
        );
    }
    Ok(DetectionFunction::empirical_average(avg))
}

/// Core of the detector-free estimator, shared with the bootstrap:
/// damage probabilities for `per_model[j][i]` perturbation sizes over a
/// shared sample, using the pool itself as the detection function.
///
/// Sorting all sizes in descending order makes the first occurrence index
/// of a value equal to the number of strictly larger entries, which
/// handles ties and the infinite entries uniformly.
pub(crate) fn pdam_detector_free_sizes(per_model: &[Vec<PerturbationSize>]) -> Vec<f64> {
    let n_obs = per_model.first().map_or(0, Vec::len);
    let j = per_model.len();
    let mut pool: Vec<PerturbationSize> = per_model.iter().flatten().copied().collect();
    pool.sort_unstable_by(|a, b| b.cmp(a));
    let denominator = (n_obs * n_obs * j) as f64;
    per_model
        .iter()
        .map(|sizes| {
            let greater_sum: u64 = sizes
                .iter()
                .filter(|d| d.is_finite())
                .map(|d| pool.partition_point(|x| x > d) as u64)
                .sum();
            greater_sum as f64 / denominator
        })
        .collect()
}

/// Detector-free damage estimate for every model of a pool over a shared
/// sample. Requires no detection data: the pooled attack outcomes double
/// as the detection function, so the estimate for model `j` equals
/// `pdam_surrogate(o_j, average_detection_fn(pool))` up to rounding.
///
/// A pool of one model is permitted but the implied detection function
/// then reflects only that model; callers should warn.
pub fn pdam_detector_free(outcomes: &[AttackOutcomeSet]) -> Result<Vec<RiskEstimate>> {
    let pool = align(outcomes)?;
    let pdams = pdam_detector_free_sizes(&pool.per_model);
    let detection = format!("average({} models)", outcomes.len());
    Ok(pool
        .model_ids
        .iter()
        .zip(pdams)
        .map(|(model_id, pdam)| RiskEstimate {
            model_id: model_id.clone(),
            pdam,
            n: pool.n_obs,
            method: EstimateMethod::DetectorFree,
            detection: detection.clone(),
        })
        .collect())
}

/// One row of the model comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub model_id: String,
    pub pdam: f64,
    /// Attack success rates, one per requested tau, same order.
    pub asrs: Vec<f64>,
    /// Minimum perturbation size; `None` when no attack succeeded.
    pub mps: Option<f64>,
    /// Expected damage (`pdam * c_dam`) when a damage cost was supplied.
    pub risk: Option<f64>,
}

/// Per-row "best value in column" flags; see [`column_bests`].
#[derive(Clone, Debug, PartialEq)]
pub struct RowBests {
    pub pdam: bool,
    pub asrs: Vec<bool>,
    pub mps: bool,
    pub risk: bool,
}

/// Comparison table over a pool of models sharing one sample: damage
/// probability, success rate at each `tau`, and minimum perturbation
/// size. With a detection function the damage column uses the surrogate
/// estimator; without one it falls back to the detector-free estimator
/// over the pool itself.
pub fn summary_table(
    outcomes: &[AttackOutcomeSet],
    taus: &[f64],
    detection: Option<&DetectionFunction>,
) -> Result<Vec<SummaryRow>> {
    if taus.is_empty() {
        return Err(Error::EmptyInput("tau list for success-rate columns".into()));
    }
    for t in taus {
        check_tau(*t)?;
    }
    if taus.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("tau list must be strictly ascending"));
    }
    let pdams: Vec<f64> = match detection {
        Some(f) => {
            align(outcomes)?; // enforce the shared sample either way
            outcomes
                .iter()
                .map(|o| Ok(pdam_surrogate(o, f)?.pdam))
                .collect::<Result<Vec<f64>>>()?
        }
        None => pdam_detector_free(outcomes)?
            .into_iter()
            .map(|e| e.pdam)
            .collect(),
    };
    outcomes
        .iter()
        .zip(pdams)
        .map(|(o, pdam)| {
            Ok(SummaryRow {
                model_id: o.model_id().to_string(),
                pdam,
                asrs: taus
                    .iter()
                    .map(|&t| asr(o, t))
                    .collect::<Result<Vec<f64>>>()?,
                mps: mps(o),
                risk: None,
            })
        })
        .collect()
}

/// Flags the best value per column: minimum for damage probability,
/// success rates and risk, maximum for the minimum perturbation size
/// (a larger smallest-working-perturbation means a more robust model).
/// Ties are all flagged; a column with no defined values flags every row.
pub fn column_bests(rows: &[SummaryRow]) -> Vec<RowBests> {
    let n_taus = rows.first().map_or(0, |r| r.asrs.len());
    let min_of = |values: &mut dyn Iterator<Item = f64>| values.fold(f64::INFINITY, f64::min);
    let best_pdam = min_of(&mut rows.iter().map(|r| r.pdam));
    let best_asrs: Vec<f64> = (0..n_taus)
        .map(|k| min_of(&mut rows.iter().map(|r| r.asrs[k])))
        .collect();
    let best_mps = rows
        .iter()
        .filter_map(|r| r.mps)
        .fold(f64::NEG_INFINITY, f64::max);
    let best_risk = min_of(&mut rows.iter().filter_map(|r| r.risk));
    rows.iter()
        .map(|r| RowBests {
            pdam: r.pdam == best_pdam,
            asrs: (0..n_taus).map(|k| r.asrs[k] == best_asrs[k]).collect(),
            mps: match r.mps {
                Some(v) => v == best_mps,
                None => best_mps == f64::NEG_INFINITY,
            },
            risk: match r.risk {
                Some(v) => v == best_risk,
                None => best_risk == f64::INFINITY,
            },
        })
        .collect()
}
