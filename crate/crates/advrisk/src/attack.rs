//! Attack execution and reduction to per-observation perturbation sizes.
//!
//! An attack run applies every instantiated attack (one per attack name
//! and epsilon) to every observation, producing one [`AttackCandidate`]
//! each. [`attack_strategy_reduce`] then keeps, per observation, the
//! successful candidate with the smallest distance; its distance is the
//! observation's perturbation size `d_a`, or infinite if nothing
//! succeeded. Adding attacks to the set can therefore only shrink `d_a`.
//!
//! Attacks search inside the eps-ball of the run's metric: under `linf`
//! the classic signed-gradient step, under `l2` the normalized-gradient
//! step with ball projection. A candidate that ends up exactly at the
//! original point is never marked successful, even if the unperturbed
//! prediction already violates the criterion.

use std::collections::BTreeMap;
use std::collections::HashMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::domain::{
    distance, evaluate_success, AttackCandidate, AttackOutcomeSet, Dataset, Metric, Observation,
    PerturbationRecord, PerturbationSize, SuccessCriterion,
};
use crate::error::{Error, Result};
use crate::hash::derive_indexed_seed;
use crate::models::Predictor;

/// Run-wide attack settings: how distances are measured, what counts as
/// success, and an optional coordinate box every perturbed point is
/// clipped into (for data with natural bounds, e.g. pixel ranges).
#[derive(Clone, Copy, Debug)]
pub struct AttackContext {
    pub metric: Metric,
    pub criterion: SuccessCriterion,
    pub clip: Option<(f64, f64)>,
}

impl AttackContext {
    pub fn new(metric: Metric, criterion: SuccessCriterion) -> Self {
        AttackContext {
            metric,
            criterion,
            clip: None,
        }
    }

    pub fn with_clip(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::invalid(format!(
                "clip box must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        self.clip = Some((lo, hi));
        Ok(self)
    }

    fn clip_point(&self, x: &mut [f64]) {
        if let Some((lo, hi)) = self.clip {
            for v in x.iter_mut() {
                *v = v.clamp(lo, hi);
            }
        }
    }
}

/// One attack family with its epsilon grid. `run_attack_set` instantiates
/// one concrete attack per grid entry, so the attack set size is the sum
/// of the grid lengths.
#[derive(Clone, Debug)]
pub enum AttackSpec {
    /// Single gradient step to the ball surface.
    Fgsm { epsilon_grid: Vec<f64> },
    /// Iterated gradient ascent, each step projected back into the ball.
    /// `step_size: None` selects `2.5 * eps / steps`.
    Pgd {
        epsilon_grid: Vec<f64>,
        steps: u32,
        step_size: Option<f64>,
    },
    /// Best (smallest successful) of `steps` uniform draws from the ball.
    Random {
        epsilon_grid: Vec<f64>,
        steps: u32,
        seed: u64,
    },
}

impl AttackSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::Fgsm { .. } => "fgsm",
            AttackSpec::Pgd { .. } => "pgd",
            AttackSpec::Random { .. } => "random",
        }
    }

    pub fn epsilon_grid(&self) -> &[f64] {
        match self {
            AttackSpec::Fgsm { epsilon_grid }
            | AttackSpec::Pgd { epsilon_grid, .. }
            | AttackSpec::Random { epsilon_grid, .. } => epsilon_grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.epsilon_grid();
        if grid.is_empty() {
            return Err(Error::invalid(format!(
                "{}: epsilon grid must be nonempty",
                self.name()
            )));
        }
        if grid.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Err(Error::invalid(format!(
                "{}: epsilons must be finite and > 0",
                self.name()
            )));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "{}: epsilon grid must be strictly ascending",
                self.name()
            )));
        }
        match self {
            AttackSpec::Fgsm { .. } => {}
            AttackSpec::Pgd {
                steps, step_size, ..
            } => {
                if *steps == 0 {
                    return Err(Error::invalid("pgd: steps must be at least 1"));
                }
                if let Some(s) = step_size {
                    if !s.is_finite() || *s <= 0.0 {
                        return Err(Error::invalid("pgd: step size must be finite and > 0"));
                    }
                }
            }
            AttackSpec::Random { steps, .. } => {
                if *steps == 0 {
                    return Err(Error::invalid("random: steps must be at least 1"));
                }
            }
        }
        Ok(())
    }

    /// Number of concrete attacks this spec instantiates.
    pub fn instance_count(&self) -> usize {
        self.epsilon_grid().len()
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One ascent step of length `step` from `x` in the direction of `grad`,
/// measured in the run metric.
fn gradient_step(x: &[f64], grad: &[f64], step: f64, metric: Metric) -> Vec<f64> {
    match metric {
        Metric::Linf => x
            .iter()
            .zip(grad)
            .map(|(xi, gi)| xi + step * sign(*gi))
            .collect(),
        Metric::L2 => {
            let norm = l2_norm(grad);
            if norm == 0.0 {
                return x.to_vec();
            }
            x.iter()
                .zip(grad)
                .map(|(xi, gi)| xi + step * gi / norm)
                .collect()
        }
    }
}

/// Projects `point` onto the eps-ball around `origin` in the run metric.
fn project_to_ball(origin: &[f64], point: &mut [f64], eps: f64, metric: Metric) {
    match metric {
        Metric::Linf => {
            for (v, o) in point.iter_mut().zip(origin) {
                *v = v.clamp(o - eps, o + eps);
            }
        }
        Metric::L2 => {
            let delta: Vec<f64> = point.iter().zip(origin).map(|(p, o)| p - o).collect();
            let norm = l2_norm(&delta);
            if norm > eps {
                let scale = eps / norm;
                for ((v, o), d) in point.iter_mut().zip(origin).zip(&delta) {
                    *v = o + d * scale;
                }
            }
        }
    }
}

/// Uniform draw from the eps-ball around `x`.
fn sample_in_ball(x: &[f64], eps: f64, metric: Metric, rng: &mut StdRng) -> Vec<f64> {
    match metric {
        Metric::Linf => x
            .iter()
            .map(|xi| xi + rng.random_range(-eps..=eps))
            .collect(),
        Metric::L2 => {
            // Direction from a spherical gaussian, radius by inverting the
            // volume CDF.
            let dir: Vec<f64> = x
                .iter()
                .map(|_| crate::models::standard_normal(rng))
                .collect();
            let norm = l2_norm(&dir);
            if norm == 0.0 {
                return x.to_vec();
            }
            let u: f64 = rng.random();
            let radius = eps * u.powf(1.0 / x.len() as f64);
            x.iter()
                .zip(&dir)
                .map(|(xi, di)| xi + radius * di / norm)
                .collect()
        }
    }
}

fn fmt_param(v: f64) -> String {
    format!("{v}")
}

/// Assembles a candidate from a perturbed point: measures the distance,
/// predicts, and applies the success criterion. Zero-distance candidates
/// are never successful.
fn finish_candidate(
    p: &Predictor,
    o: &Observation,
    ctx: &AttackContext,
    attack_name: &str,
    params: BTreeMap<String, String>,
    original_label: usize,
    perturbed: Vec<f64>,
) -> Result<AttackCandidate> {
    let d = distance(o.features(), &perturbed, ctx.metric)?;
    let perturbed_label = p.predict(&perturbed)?;
    let criterion_met = evaluate_success(
        ctx.criterion,
        original_label,
        o.label(),
        perturbed_label,
    );
    Ok(AttackCandidate {
        observation_id: o.id().to_string(),
        attack_name: attack_name.to_string(),
        params,
        perturbed_features: perturbed,
        distance: d,
        success: criterion_met && d > 0.0,
    })
}

/// Single gradient step of size `eps`, ascending the loss of the model's
/// own prediction at the original point. A zero gradient leaves the point
/// unchanged.
pub fn fgsm(
    p: &Predictor,
    o: &Observation,
    eps: f64,
    ctx: &AttackContext,
) -> Result<AttackCandidate> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::invalid("fgsm: eps must be finite and > 0"));
    }
    let original_label = p.predict(o.features())?;
    let grad = p.input_gradient(o.features(), original_label)?;
    let mut x = gradient_step(o.features(), &grad, eps, ctx.metric);
    project_to_ball(o.features(), &mut x, eps, ctx.metric);
    ctx.clip_point(&mut x);
    let mut params = BTreeMap::new();
    params.insert("eps".to_string(), fmt_param(eps));
    finish_candidate(p, o, ctx, "fgsm", params, original_label, x)
}

/// Projected gradient ascent: `steps` gradient steps of `step_size`
/// (default `2.5 * eps / steps`), each projected back into the eps-ball.
/// Starts at the original point; with one step of size >= eps this
/// reproduces the fgsm candidate.
pub fn pgd(
    p: &Predictor,
    o: &Observation,
    eps: f64,
    steps: u32,
    step_size: Option<f64>,
    ctx: &AttackContext,
) -> Result<AttackCandidate> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::invalid("pgd: eps must be finite and > 0"));
    }
    if steps == 0 {
        return Err(Error::invalid("pgd: steps must be at least 1"));
    }
    let step = match step_size {
        Some(s) if s.is_finite() && s > 0.0 => s,
        Some(_) => return Err(Error::invalid("pgd: step size must be finite and > 0")),
        None => 2.5 * eps / steps as f64,
    };
    let original_label = p.predict(o.features())?;
    let mut x = o.features().to_vec();
    for _ in 0..steps {
        let grad = p.input_gradient(&x, original_label)?;
        x = gradient_step(&x, &grad, step, ctx.metric);
        project_to_ball(o.features(), &mut x, eps, ctx.metric);
        ctx.clip_point(&mut x);
    }
    let mut params = BTreeMap::new();
    params.insert("eps".to_string(), fmt_param(eps));
    params.insert("steps".to_string(), steps.to_string());
    params.insert("step_size".to_string(), fmt_param(step));
    finish_candidate(p, o, ctx, "pgd", params, original_label, x)
}

/// Best of `steps` uniform draws from the eps-ball: the successful draw
/// with the smallest distance, or the unchanged point when every draw
/// fails (or `steps == 0`). Deterministic in `(seed, observation id,
/// eps)`, independent of evaluation order.
pub fn random_attack(
    p: &Predictor,
    o: &Observation,
    eps: f64,
    steps: u32,
    seed: u64,
    ctx: &AttackContext,
) -> Result<AttackCandidate> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::invalid("random: eps must be finite and > 0"));
    }
    let original_label = p.predict(o.features())?;
    let stream = derive_indexed_seed(seed, &format!("random-attack:{}", o.id()), eps.to_bits());
    let mut rng = StdRng::seed_from_u64(stream);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..steps {
        let mut candidate = sample_in_ball(o.features(), eps, ctx.metric, &mut rng);
        ctx.clip_point(&mut candidate);
        let d = distance(o.features(), &candidate, ctx.metric)?;
        if d == 0.0 {
            continue;
        }
        let label = p.predict(&candidate)?;
        if !evaluate_success(ctx.criterion, original_label, o.label(), label) {
            continue;
        }
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, candidate));
        }
    }

    let perturbed = match best {
        Some((_, x)) => x,
        None => o.features().to_vec(),
    };
    let mut params = BTreeMap::new();
    params.insert("eps".to_string(), fmt_param(eps));
    params.insert("steps".to_string(), steps.to_string());
    params.insert("seed".to_string(), seed.to_string());
    finish_candidate(p, o, ctx, "random", params, original_label, perturbed)
}

/// Applies every instantiated attack to every observation: one candidate
/// per `(observation, attack name, eps)`, observations outermost, specs
/// and grids in the given order. An empty dataset yields an empty list.
pub fn run_attack_set(
    p: &Predictor,
    ds: &Dataset,
    specs: &[AttackSpec],
    ctx: &AttackContext,
) -> Result<Vec<AttackCandidate>> {
    if specs.is_empty() {
        return Err(Error::EmptyInput("attack specs".into()));
    }
    for spec in specs {
        spec.validate()?;
    }
    if ds.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: ds.dim(),
        });
    }
    let per_obs: usize = specs.iter().map(AttackSpec::instance_count).sum();
    let mut candidates = Vec::with_capacity(ds.len() * per_obs);
    for o in ds.observations() {
        for spec in specs {
            for &eps in spec.epsilon_grid() {
                let c = match spec {
                    AttackSpec::Fgsm { .. } => fgsm(p, o, eps, ctx)?,
                    AttackSpec::Pgd {
                        steps, step_size, ..
                    } => pgd(p, o, eps, *steps, *step_size, ctx)?,
                    AttackSpec::Random { steps, seed, .. } => {
                        random_attack(p, o, eps, *steps, *seed, ctx)?
                    }
                };
                candidates.push(c);
            }
        }
    }
    Ok(candidates)
}

/// Reduces candidates to one record per observation: the smallest
/// successful distance, infinite when no candidate succeeded. Ties are
/// broken on `(distance, attack name, eps)` so the chosen witness does
/// not depend on candidate order. Every observation must be covered by
/// at least one candidate, and every candidate must belong to the sample.
pub fn attack_strategy_reduce(
    candidates: &[AttackCandidate],
    ds: &Dataset,
    model_id: &str,
) -> Result<AttackOutcomeSet> {
    let mut positions: HashMap<&str, usize> = HashMap::with_capacity(ds.len());
    for (i, o) in ds.observations().iter().enumerate() {
        positions.insert(o.id(), i);
    }
    let mut covered = vec![false; ds.len()];
    let mut best: Vec<Option<&AttackCandidate>> = vec![None; ds.len()];
    for c in candidates {
        let &i = positions
            .get(c.observation_id.as_str())
            .ok_or_else(|| Error::UnknownObservation(c.observation_id.clone()))?;
        covered[i] = true;
        if !c.success {
            continue;
        }
        if !c.distance.is_finite() || c.distance <= 0.0 {
            return Err(Error::invalid(format!(
                "successful candidate for {} has non-positive distance {}",
                c.observation_id, c.distance
            )));
        }
        let better = match best[i] {
            None => true,
            Some(b) => {
                let key = (c.distance, c.attack_name.as_str(), c.epsilon().unwrap_or(f64::INFINITY));
                let bkey = (b.distance, b.attack_name.as_str(), b.epsilon().unwrap_or(f64::INFINITY));
                (key.0.total_cmp(&bkey.0))
                    .then_with(|| key.1.cmp(bkey.1))
                    .then_with(|| key.2.total_cmp(&bkey.2))
                    .is_lt()
            }
        };
        if better {
            best[i] = Some(c);
        }
    }
    if let Some(i) = covered.iter().position(|c| !c) {
        return Err(Error::invalid(format!(
            "observation {} has no candidates",
            ds.observations()[i].id()
        )));
    }
    let records = ds
        .observations()
        .iter()
        .zip(&best)
        .map(|(o, b)| {
            let d_a = match b {
                Some(c) => PerturbationSize::finite(c.distance)?,
                None => PerturbationSize::Infinite,
            };
            Ok(PerturbationRecord::new(o.id(), model_id, d_a))
        })
        .collect::<Result<Vec<_>>>()?;
    AttackOutcomeSet::new(model_id, records)
}
