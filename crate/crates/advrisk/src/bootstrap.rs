//! Bootstrap bands: how a statistic behaves as the sample grows.
//!
//! The estimators in this crate are consistent but not unbiased at small
//! samples (the minimum perturbation size in particular only shrinks as
//! observations are added). The bands quantify that: for each requested
//! subsample size `n`, observations are resampled with replacement `reps`
//! times, the statistic is recomputed on every resample, and the 5th,
//! 50th and 95th percentiles are reported.
//!
//! Resampling is paired across models: each resample draws one index
//! vector and applies it to every model in the pool, so pooled statistics
//! such as the detector-free damage estimate stay meaningful.

use crate::detection::DetectionFunction;
use crate::domain::{AttackOutcomeSet, PerturbationSize};
use crate::error::{Error, Result};
use crate::estimators::{align, neumaier_sum, pdam_detector_free_sizes};
use crate::hash::derive_indexed_seed;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Statistic to band.
#[derive(Clone, Debug)]
pub enum BandMetric {
    /// Pooled detector-free damage probability.
    PdamDetectorFree,
    /// Damage probability under a fixed detection function.
    PdamSurrogate(DetectionFunction),
    /// Minimum perturbation size (undefined on resamples without a
    /// successful attack; those are excluded and counted).
    Mps,
    /// Average perturbation size over successful attacks (same exclusion
    /// rule as `Mps`).
    Aps,
    /// Attack success rate at the given budget.
    Asr(f64),
}

impl std::fmt::Display for BandMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BandMetric::PdamDetectorFree => write!(f, "pdam-detector-free"),
            BandMetric::PdamSurrogate(func) => write!(f, "pdam-surrogate({func})"),
            BandMetric::Mps => write!(f, "mps"),
            BandMetric::Aps => write!(f, "aps"),
            BandMetric::Asr(tau) => write!(f, "asr({tau})"),
        }
    }
}

/// Percentiles of one statistic at one subsample size.
#[derive(Clone, Debug, PartialEq)]
pub struct BandRow {
    pub n: usize,
    pub p05: f64,
    pub p50: f64,
    pub p95: f64,
    /// Resamples on which the statistic was undefined. When all `reps`
    /// are excluded the percentiles are NaN.
    pub excluded: usize,
}

/// Band of one statistic for one model across the subsample-size grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapBand {
    pub model_id: String,
    pub metric: String,
    pub rows: Vec<BandRow>,
}

/// Nearest-rank percentile of ascending `sorted` values: the element at
/// rank `ceil(q * n)`, at least 1. `q = 0` gives the minimum, `q = 1`
/// the maximum, and no interpolation is performed.
pub fn percentile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput("percentile of no values".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!(
            "percentile rank must be in [0, 1], got {q}"
        )));
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).max(1);
    Ok(sorted[rank - 1])
}

fn eval_per_model(
    metric: &BandMetric,
    sizes: &[PerturbationSize],
    idx: &[usize],
) -> Result<Option<f64>> {
    let n = idx.len() as f64;
    match metric {
        BandMetric::Asr(tau) => {
            let c = idx.iter().filter(|&&i| sizes[i].at_most(*tau)).count();
            Ok(Some(c as f64 / n))
        }
        BandMetric::Mps => Ok(idx
            .iter()
            .filter_map(|&i| sizes[i].finite_value())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))),
        BandMetric::Aps => {
            let finite: Vec<f64> = idx.iter().filter_map(|&i| sizes[i].finite_value()).collect();
            if finite.is_empty() {
                Ok(None)
            } else {
                Ok(Some(neumaier_sum(finite.iter().copied()) / finite.len() as f64))
            }
        }
        BandMetric::PdamSurrogate(f) => {
            let vals = idx
                .iter()
                .filter_map(|&i| sizes[i].finite_value())
                .map(|d| f.eval(d))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Some(neumaier_sum(vals.into_iter()) / n))
        }
        BandMetric::PdamDetectorFree => unreachable!("pooled metric handled by caller"),
    }
}

/// One statistic per model on one resample; `None` marks an undefined
/// (excluded) value.
fn eval_resample(
    metric: &BandMetric,
    per_model: &[Vec<PerturbationSize>],
    idx: &[usize],
) -> Result<Vec<Option<f64>>> {
    if let BandMetric::PdamDetectorFree = metric {
        let resampled: Vec<Vec<PerturbationSize>> = per_model
            .iter()
            .map(|sizes| idx.iter().map(|&i| sizes[i]).collect())
            .collect();
        return Ok(pdam_detector_free_sizes(&resampled)
            .into_iter()
            .map(Some)
            .collect());
    }
    per_model
        .iter()
        .map(|sizes| eval_per_model(metric, sizes, idx))
        .collect()
}

/// Bootstrap percentile bands of `metric` for every model in the pool,
/// at each subsample size of `n_grid`, from `reps` resamples per size.
///
/// Every (size, repetition) pair draws from its own stream derived from
/// `seed`, so any band cell is reproducible independently of the rest of
/// the grid.
pub fn bootstrap_bands(
    outcomes: &[AttackOutcomeSet],
    metric: &BandMetric,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<BootstrapBand>> {
    if n_grid.is_empty() {
        return Err(Error::EmptyInput("subsample size grid".into()));
    }
    if n_grid.contains(&0) {
        return Err(Error::invalid("subsample sizes must be >= 1"));
    }
    if reps < 2 {
        return Err(Error::invalid("resample count must be >= 2"));
    }
    if let BandMetric::Asr(tau) = metric {
        if !tau.is_finite() || *tau < 0.0 {
            return Err(Error::invalid(format!(
                "tau must be finite and >= 0, got {tau}"
            )));
        }
    }
    let pool = align(outcomes)?;
    let mut values: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_grid.len()]; pool.model_ids.len()];
    let mut excluded: Vec<Vec<usize>> = vec![vec![0; n_grid.len()]; pool.model_ids.len()];
    for (gi, &n) in n_grid.iter().enumerate() {
        for rep in 0..reps {
            let stream = derive_indexed_seed(seed, &format!("bootstrap:n={n}"), rep as u64);
            let mut rng = StdRng::seed_from_u64(stream);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..pool.n_obs)).collect();
            for (mi, v) in eval_resample(metric, &pool.per_model, &idx)?.into_iter().enumerate() {
                match v {
                    Some(v) => values[mi][gi].push(v),
                    None => excluded[mi][gi] += 1,
                }
            }
        }
    }
    let metric_name = metric.to_string();
    Ok(pool
        .model_ids
        .iter()
        .enumerate()
        .map(|(mi, model_id)| BootstrapBand {
            model_id: model_id.clone(),
            metric: metric_name.clone(),
            rows: n_grid
                .iter()
                .enumerate()
                .map(|(gi, &n)| {
                    let vals = &mut values[mi][gi];
                    vals.sort_by(f64::total_cmp);
                    let pct = |q: f64| percentile(vals, q).unwrap_or(f64::NAN);
                    BandRow {
                        n,
                        p05: pct(0.05),
                        p50: pct(0.50),
                        p95: pct(0.95),
                        excluded: excluded[mi][gi],
                    }
                })
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PerturbationRecord;

    fn set(model: &str, sizes: &[Option<f64>]) -> AttackOutcomeSet {
        let records = sizes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let d = match s {
                    Some(v) => PerturbationSize::finite(*v).unwrap(),
                    None => PerturbationSize::Infinite,
                };
                PerturbationRecord::new(format!("x{i:04}"), model, d)
            })
            .collect();
        AttackOutcomeSet::new(model, records).unwrap()
    }

    fn spread_set(model: &str, n: usize) -> AttackOutcomeSet {
        let sizes: Vec<Option<f64>> = (0..n)
            .map(|i| {
                if i % 5 == 4 {
                    None
                } else {
                    Some(0.01 + 0.01 * (i % 40) as f64)
                }
            })
            .collect();
        set(model, &sizes)
    }

    #[test]
    fn percentile_uses_nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.5).unwrap(), 2.0);
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 1.0).unwrap(), 4.0);
        assert_eq!(percentile(&v, 0.26).unwrap(), 2.0);
        assert_eq!(percentile(&[7.0], 0.95).unwrap(), 7.0);
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&hundred, 0.95).unwrap(), 95.0);
        assert_eq!(percentile(&hundred, 0.05).unwrap(), 5.0);
        assert!(percentile(&[], 0.5).is_err());
        assert!(percentile(&v, 1.5).is_err());
    }

    #[test]
    fn bands_are_deterministic_per_seed() {
        let pool = vec![spread_set("A", 60), spread_set("B", 60)];
        let grid = [10, 30];
        let a = bootstrap_bands(&pool, &BandMetric::Asr(0.1), &grid, 20, 9).unwrap();
        let b = bootstrap_bands(&pool, &BandMetric::Asr(0.1), &grid, 20, 9).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_bands(&pool, &BandMetric::Asr(0.1), &grid, 20, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn paired_resampling_gives_identical_models_identical_bands() {
        // Two models with identical records can only produce identical
        // detector-free bands if every resample reuses one index vector.
        let a = spread_set("A", 50);
        let b = AttackOutcomeSet::new(
            "B",
            a.records()
                .iter()
                .map(|r| PerturbationRecord::new(r.observation_id.clone(), "B", r.d_a))
                .collect(),
        )
        .unwrap();
        let bands =
            bootstrap_bands(&[a, b], &BandMetric::PdamDetectorFree, &[10, 25], 15, 3).unwrap();
        assert_eq!(bands[0].rows, bands[1].rows);
        assert_eq!(bands[0].metric, "pdam-detector-free");
    }

    #[test]
    fn band_tightens_as_the_subsample_grows() {
        let pool = vec![spread_set("A", 200)];
        let bands = bootstrap_bands(&pool, &BandMetric::Asr(0.15), &[20, 200], 50, 11).unwrap();
        let rows = &bands[0].rows;
        let width = |r: &BandRow| r.p95 - r.p05;
        assert!(
            width(&rows[1]) < width(&rows[0]),
            "width at n=200 {} vs n=20 {}",
            width(&rows[1]),
            width(&rows[0])
        );
    }

    #[test]
    fn mps_band_shrinks_with_sample_size() {
        let pool = vec![spread_set("A", 200)];
        let bands = bootstrap_bands(&pool, &BandMetric::Mps, &[20, 200], 50, 5).unwrap();
        let rows = &bands[0].rows;
        assert!(rows[1].p50 <= rows[0].p50);
        assert_eq!(rows[0].excluded, 0);
    }

    #[test]
    fn undefined_resamples_are_counted_not_averaged() {
        let pool = vec![set("A", &[None, None, None])];
        let bands = bootstrap_bands(&pool, &BandMetric::Mps, &[5], 12, 1).unwrap();
        let row = &bands[0].rows[0];
        assert_eq!(row.excluded, 12);
        assert!(row.p50.is_nan());

        let aps = bootstrap_bands(&pool, &BandMetric::Aps, &[5], 12, 1).unwrap();
        assert_eq!(aps[0].rows[0].excluded, 12);
    }

    #[test]
    fn surrogate_band_stays_in_unit_interval() {
        let pool = vec![spread_set("A", 80)];
        let f = DetectionFunction::logistic(5.0, 40.0).unwrap();
        let bands =
            bootstrap_bands(&pool, &BandMetric::PdamSurrogate(f), &[40], 30, 2).unwrap();
        let row = &bands[0].rows[0];
        assert!(row.p05 >= 0.0 && row.p95 <= 1.0 && row.p05 <= row.p50 && row.p50 <= row.p95);
        assert_eq!(bands[0].metric, "pdam-surrogate(logistic(5,40))");
    }

    #[test]
    fn grid_and_rep_validation() {
        let pool = vec![spread_set("A", 10)];
        assert!(bootstrap_bands(&pool, &BandMetric::Mps, &[], 10, 0).is_err());
        assert!(bootstrap_bands(&pool, &BandMetric::Mps, &[0], 10, 0).is_err());
        assert!(bootstrap_bands(&pool, &BandMetric::Mps, &[5], 0, 0).is_err());
        assert!(bootstrap_bands(&pool, &BandMetric::Mps, &[5], 1, 0).is_err());
        assert!(bootstrap_bands(&pool, &BandMetric::Asr(-1.0), &[5], 10, 0).is_err());
    }
}
