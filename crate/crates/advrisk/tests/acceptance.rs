//! Release acceptance suite: one test per criterion, each printing a
//! single `criterion NN PASS` line with the measured quantities. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines; the
//! harness result per test is the pass/fail verdict either way.

use advrisk::attack::{attack_strategy_reduce, run_attack_set, AttackContext, AttackSpec};
use advrisk::bootstrap::{bootstrap_bands, BandMetric};
use advrisk::detection::{fit_logistic, DetectionFunction, DetectionSample};
use advrisk::domain::{
    AttackOutcomeSet, Metric, PerturbationRecord, PerturbationSize, SuccessCriterion,
};
use advrisk::estimators::{
    asr, asr_count, average_detection_fn, mps, pdam_detector_free, pdam_monte_carlo_from_records,
    pdam_surrogate, SummaryRow,
};
use advrisk::io::{self, ReportFormat};
use advrisk::models::{
    generate_dataset, train, Activation, Architecture, Hyper, Predictor, SyntheticKind,
    SyntheticSpec,
};
use advrisk::Error;
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use std::collections::{BTreeSet, HashMap};
use std::time::Instant;
use tempfile::tempdir;

/// Coarse grid the randomized pools draw perturbation sizes from; the
/// small support forces heavy duplication across records.
const SIZE_GRID: [f64; 6] = [0.02, 0.05, 0.1, 0.15, 0.3, 0.5];

/// Pool of 1..=6 models over a shared sample of 1..=50 observations,
/// with about a quarter of the attacks unsuccessful and record order
/// shuffled per model.
fn random_pool(rng: &mut StdRng) -> Vec<AttackOutcomeSet> {
    let i = rng.random_range(1..=50);
    let j = rng.random_range(1..=6);
    (0..j)
        .map(|m| {
            let model_id = format!("m{m}");
            let mut records: Vec<PerturbationRecord> = (0..i)
                .map(|k| {
                    let d = if rng.random::<f64>() < 0.25 {
                        PerturbationSize::Infinite
                    } else {
                        PerturbationSize::finite(*SIZE_GRID.choose(rng).unwrap()).unwrap()
                    };
                    PerturbationRecord::new(format!("x{k}"), &model_id, d)
                })
                .collect();
            records.shuffle(rng);
            AttackOutcomeSet::new(&model_id, records).unwrap()
        })
        .collect()
}

/// The ensemble-average non-detection probability has two readings: one
/// minus the mean per-model success rate, and the fraction of pooled
/// (observation, model) pairs strictly above tau. Both reduce to the same
/// integer count over the pool, so they must agree to the bit.
fn check_average_forms(pool: &[AttackOutcomeSet], avg: &DetectionFunction, rng: &mut StdRng) {
    let DetectionFunction::EmpiricalAverage(pooled) = avg else {
        panic!("average_detection_fn returned a non-average function");
    };
    let total = pooled.total();
    let mut taus: Vec<f64> = vec![0.0, rng.random_range(0.0..0.6)];
    taus.extend(
        pool.iter()
            .flat_map(|o| o.sorted_finite_distances().iter().copied()),
    );
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    for &tau in &taus {
        let successes: usize = pool.iter().map(|o| asr_count(o, tau).unwrap()).sum();
        assert_eq!(
            pooled.count_above(tau) + successes,
            total,
            "pooled counts inconsistent at tau {tau}"
        );
        let from_asr = (total - successes) as f64 / total as f64;
        let from_count = avg.eval(tau).unwrap();
        assert_eq!(from_count, from_asr, "average forms differ at tau {tau}");
    }
}

#[test]
fn criterion_01_detector_free_equals_surrogate_over_average() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xAC01);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let pool = random_pool(&mut rng);
        let avg = average_detection_fn(&pool).unwrap();
        let free = pdam_detector_free(&pool).unwrap();
        for (set, est) in pool.iter().zip(&free) {
            let gap = (est.pdam - pdam_surrogate(set, &avg).unwrap().pdam).abs();
            worst = worst.max(gap);
            assert!(
                gap <= 1e-12,
                "detector-free vs surrogate gap {gap} for {}",
                set.model_id()
            );
        }
        check_average_forms(&pool, &avg, &mut rng);
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "equivalence sweep took {elapsed:?}"
    );
    println!(
        "criterion 01 PASS: 1000 random pools, worst estimator gap {worst:.2e} (tolerance 1e-12), \
         average-form equality exact, {elapsed:.2?}"
    );
}

fn micro_pool() -> Vec<AttackOutcomeSet> {
    let m1 = AttackOutcomeSet::new(
        "M1",
        vec![
            PerturbationRecord::new("x1", "M1", PerturbationSize::finite(0.1).unwrap()),
            PerturbationRecord::new("x2", "M1", PerturbationSize::finite(0.3).unwrap()),
        ],
    )
    .unwrap();
    let m2 = AttackOutcomeSet::new(
        "M2",
        vec![
            PerturbationRecord::new("x1", "M2", PerturbationSize::finite(0.2).unwrap()),
            PerturbationRecord::new("x2", "M2", PerturbationSize::Infinite),
        ],
    )
    .unwrap();
    vec![m1, m2]
}

#[test]
fn criterion_02_micro_pool_matches_hand_computation() {
    let pool = micro_pool();
    let free = pdam_detector_free(&pool).unwrap();
    assert_eq!(free[0].pdam, 0.5);
    assert_eq!(free[1].pdam, 0.25);
    let avg = average_detection_fn(&pool).unwrap();
    let via_avg: Vec<f64> = pool
        .iter()
        .map(|o| pdam_surrogate(o, &avg).unwrap().pdam)
        .collect();
    assert_eq!(via_avg, vec![0.5, 0.25]);
    println!(
        "criterion 02 PASS: micro pool gives damage probabilities (0.5, 0.25) by both routes, \
         exactly"
    );
}

const POPULATION: usize = 10_000;
const SUBSAMPLES: usize = 500;

/// Fixed synthetic population of minimal perturbation sizes: right-skewed
/// finite sizes in [0.01, 0.31], one fifth with no successful attack.
fn population_sizes() -> Vec<PerturbationSize> {
    let mut rng = StdRng::seed_from_u64(0xAC0F);
    (0..POPULATION)
        .map(|_| {
            if rng.random::<f64>() < 0.2 {
                PerturbationSize::Infinite
            } else {
                let u: f64 = rng.random();
                PerturbationSize::finite(0.01 + 0.3 * u * u).unwrap()
            }
        })
        .collect()
}

fn subsample_set(sizes: &[PerturbationSize], idx: &[usize], model_id: &str) -> AttackOutcomeSet {
    let records = idx
        .iter()
        .map(|&i| PerturbationRecord::new(format!("x{i}"), model_id, sizes[i]))
        .collect();
    AttackOutcomeSet::new(model_id, records).unwrap()
}

/// Independent oracle for the logistic(5, 40) non-detection probability.
fn true_psi(d: f64) -> f64 {
    1.0 / (1.0 + (-(5.0 - 40.0 * d)).exp())
}

#[test]
fn criterion_03_subsample_estimates_are_unbiased() {
    let start = Instant::now();
    let sizes = population_sizes();
    let truth = sizes
        .iter()
        .filter_map(PerturbationSize::finite_value)
        .map(true_psi)
        .sum::<f64>()
        / POPULATION as f64;
    let psi = DetectionFunction::logistic(5.0, 40.0).unwrap();
    let mut rng = StdRng::seed_from_u64(0xAC03);
    let estimates: Vec<f64> = (0..SUBSAMPLES)
        .map(|_| {
            let idx = rand::seq::index::sample(&mut rng, POPULATION, 50).into_vec();
            pdam_surrogate(&subsample_set(&sizes, &idx, "sub"), &psi)
                .unwrap()
                .pdam
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / SUBSAMPLES as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (SUBSAMPLES - 1) as f64;
    let se = (var / SUBSAMPLES as f64).sqrt();
    let gap = (mean - truth).abs();
    assert!(
        gap <= 3.0 * se,
        "subsample mean {mean} vs exhaustive truth {truth}: gap {gap} > 3 se {se}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "unbiasedness run took {elapsed:?}");
    println!(
        "criterion 03 PASS: 500 size-50 subsamples, |mean - truth| = {gap:.2e} <= {:.2e} (3 se), \
         {elapsed:.2?}",
        3.0 * se
    );
}

fn sampling_std(
    sizes: &[PerturbationSize],
    n: usize,
    psi: &DetectionFunction,
    seed: u64,
) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let estimates: Vec<f64> = (0..SUBSAMPLES)
        .map(|_| {
            let idx = rand::seq::index::sample(&mut rng, POPULATION, n).into_vec();
            pdam_surrogate(&subsample_set(sizes, &idx, "sub"), psi)
                .unwrap()
                .pdam
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / SUBSAMPLES as f64;
    (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (SUBSAMPLES - 1) as f64).sqrt()
}

#[test]
fn criterion_04_sampling_std_shrinks_like_root_n() {
    let sizes = population_sizes();
    let psi = DetectionFunction::logistic(5.0, 40.0).unwrap();
    let s100 = sampling_std(&sizes, 100, &psi, 0xAC04);
    let s400 = sampling_std(&sizes, 400, &psi, 0xAC05);
    let ratio = s400 / s100;
    assert!(
        (0.35..=0.65).contains(&ratio),
        "std(n=400)/std(n=100) = {ratio} outside [0.35, 0.65]"
    );
    println!("criterion 04 PASS: std(n=400)/std(n=100) = {ratio:.3}, inside [0.35, 0.65]");
}

#[test]
fn criterion_05_monte_carlo_agrees_with_surrogate() {
    let sizes = population_sizes();
    let idx: Vec<usize> = (0..200).collect();
    let set = subsample_set(&sizes, &idx, "mc");
    let psi = DetectionFunction::logistic(5.0, 40.0).unwrap();
    let sur = pdam_surrogate(&set, &psi).unwrap().pdam;
    let se = (sur * (1.0 - sur) / set.len() as f64).sqrt();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mc = pdam_monte_carlo_from_records(&set, &psi, seed)
            .unwrap()
            .pdam;
        let gap = (mc - sur).abs();
        worst = worst.max(gap);
        assert!(
            gap <= 3.0 * se,
            "seed {seed}: monte carlo {mc} vs surrogate {sur}, gap {gap} > 3 binomial se {se}"
        );
    }
    println!(
        "criterion 05 PASS: 20/20 seeds within 3 binomial se, worst gap {worst:.4} vs bound {:.4}",
        3.0 * se
    );
}

#[test]
fn criterion_06_step_detection_reduces_to_success_rate() {
    let mut rng = StdRng::seed_from_u64(0xAC06);
    for case in 0..100 {
        let pool = random_pool(&mut rng);
        let set = &pool[0];
        // Half the thresholds land exactly on recorded sizes to cover ties.
        let theta = if case % 2 == 0 {
            *SIZE_GRID.choose(&mut rng).unwrap()
        } else {
            rng.random_range(0.0..0.6)
        };
        let step = DetectionFunction::step(theta).unwrap();
        let damage = pdam_surrogate(set, &step).unwrap().pdam;
        let rate = asr(set, theta).unwrap();
        assert_eq!(damage, rate, "step({theta}) damage diverged from success rate");
    }
    println!(
        "criterion 06 PASS: step-threshold damage equals the success rate exactly, 100 random \
         (sample, theta) pairs"
    );
}

#[test]
fn criterion_07_minimum_perturbation_keeps_shrinking() {
    let sizes = population_sizes();
    let n_grid: Vec<usize> = (1..=10).map(|k| 20 * k).collect();
    const REPS: usize = 200;
    let mut rng = StdRng::seed_from_u64(0xAC07);
    let mut mean_mps = vec![0.0f64; n_grid.len()];
    for _ in 0..REPS {
        // One growing sample per resample: evaluating prefixes of a single
        // draw shows the statistic drifting as more data arrives, which is
        // exactly how the minimum misleads in practice.
        let mut idx = rand::seq::index::sample(&mut rng, POPULATION, 200).into_vec();
        idx.shuffle(&mut rng);
        for (k, &n) in n_grid.iter().enumerate() {
            let m = mps(&subsample_set(&sizes, &idx[..n], "m"))
                .expect("prefix with at least one finite size");
            mean_mps[k] += m / REPS as f64;
        }
    }
    for w in mean_mps.windows(2) {
        assert!(
            w[1] <= w[0],
            "mean minimum perturbation increased along the size grid: {mean_mps:?}"
        );
    }
    assert!(mean_mps[n_grid.len() - 1] < mean_mps[0]);

    // The damage estimate has no such drift; its uncertainty band simply
    // narrows over the same range of sample sizes.
    let all: Vec<usize> = (0..POPULATION).collect();
    let pool = vec![subsample_set(&sizes, &all, "pop")];
    let bands =
        bootstrap_bands(&pool, &BandMetric::PdamDetectorFree, &[20, 200], 50, 0xAC17).unwrap();
    let rows = &bands[0].rows;
    let w20 = rows[0].p95 - rows[0].p05;
    let w200 = rows[1].p95 - rows[1].p05;
    assert!(w200 < w20, "damage band failed to narrow: {w20} -> {w200}");
    println!(
        "criterion 07 PASS: mean minimum perturbation {:.4} -> {:.4} over n=20..200 \
         (non-increasing at every step) while the damage band narrows {w20:.3} -> {w200:.3}",
        mean_mps[0],
        mean_mps[n_grid.len() - 1]
    );
}

#[test]
fn criterion_08_bootstrap_bands_deterministic_and_narrowing() {
    let sizes = population_sizes();
    let idx: Vec<usize> = (0..1000).collect();
    let a = subsample_set(&sizes, &idx, "A");
    let b_records: Vec<PerturbationRecord> = idx
        .iter()
        .map(|&i| PerturbationRecord::new(format!("x{i}"), "B", sizes[(i + 5000) % POPULATION]))
        .collect();
    let b = AttackOutcomeSet::new("B", b_records).unwrap();
    let pool = vec![a, b];
    let n_grid: Vec<usize> = (1..=10).map(|k| 20 * k).collect();
    let bands =
        bootstrap_bands(&pool, &BandMetric::PdamDetectorFree, &n_grid, 50, 0xAC08).unwrap();
    let again =
        bootstrap_bands(&pool, &BandMetric::PdamDetectorFree, &n_grid, 50, 0xAC08).unwrap();
    assert_eq!(bands, again, "bands not deterministic at a fixed seed");
    let mut widths = Vec::new();
    for band in &bands {
        let first = &band.rows[0];
        let last = band.rows.last().unwrap();
        assert_eq!((first.n, last.n), (20, 200));
        let (w20, w200) = (first.p95 - first.p05, last.p95 - last.p05);
        assert!(
            w200 < w20,
            "damage band failed to narrow for {}: {w20} -> {w200}",
            band.model_id
        );
        widths.push(format!("{}: {w20:.3} -> {w200:.3}", band.model_id));
    }
    println!(
        "criterion 08 PASS: 50-rep bands over n=20..200 reproduce byte-for-byte and narrow \
         ({})",
        widths.join(", ")
    );
}

#[test]
fn criterion_09_logistic_fit_recovers_the_detector() {
    let mut rng = StdRng::seed_from_u64(0xAC09);
    let samples: Vec<DetectionSample> = (0..500)
        .map(|_| {
            let tau = rng.random_range(0.0..0.3);
            DetectionSample {
                tau,
                undetected: rng.random::<f64>() < true_psi(tau),
            }
        })
        .collect();
    // The penalty is per sample, so even this small value keeps the fit
    // defined on degenerate data without visibly shrinking beta1 = 40.
    let fit = fit_logistic(&samples, 1e-6).unwrap();
    let fitted = fit.function();
    let mae = (0..=60)
        .map(|k| {
            let tau = 0.3 * f64::from(k) / 60.0;
            (fitted.eval(tau).unwrap() - true_psi(tau)).abs()
        })
        .sum::<f64>()
        / 61.0;
    assert!(mae <= 0.05, "fit mae {mae} > 0.05");
    println!(
        "criterion 09 PASS: 500 samples of logistic(5, 40) refit to (beta0 {:.2}, beta1 {:.2}), \
         curve mae {mae:.4} <= 0.05",
        fit.beta0, fit.beta1
    );
}

#[test]
fn criterion_10_input_gradients_match_finite_differences() {
    let mut rng = StdRng::seed_from_u64(0xAC10);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let dim = rng.random_range(2..=6);
        let classes = rng.random_range(2..=4);
        // Tanh keeps the loss smooth so central differences are reliable;
        // the relu path is exercised by the training and attack tests.
        let arch = if case % 2 == 0 {
            Architecture::Linear
        } else {
            Architecture::Mlp {
                hidden: vec![rng.random_range(3..=8), rng.random_range(3..=8)],
                activation: Activation::Tanh,
            }
        };
        let p = Predictor::init(format!("g{case}"), arch, dim, classes, rng.random()).unwrap();
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = rng.random_range(0..classes);
        let grad = p.input_gradient(&x, label).unwrap();
        const H: f64 = 1e-5;
        for k in 0..dim {
            let mut lo = x.clone();
            let mut hi = x.clone();
            lo[k] -= H;
            hi[k] += H;
            let fd = (p.cross_entropy(&hi, label).unwrap()
                - p.cross_entropy(&lo, label).unwrap())
                / (2.0 * H);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(
                rel <= 1e-4,
                "case {case} coordinate {k}: backprop {} vs central difference {fd}, relative \
                 error {rel}",
                grad[k]
            );
        }
    }
    println!(
        "criterion 10 PASS: 100 model/input pairs over both architectures, worst relative \
         gradient error {worst:.2e} <= 1e-4"
    );
}

fn size_by_obs(o: &AttackOutcomeSet) -> HashMap<String, PerturbationSize> {
    o.records()
        .iter()
        .map(|r| (r.observation_id.clone(), r.d_a))
        .collect()
}

fn no_larger(extended: PerturbationSize, base: PerturbationSize) -> bool {
    match (extended.finite_value(), base.finite_value()) {
        (Some(x), Some(y)) => x <= y,
        (None, Some(_)) => false,
        _ => true,
    }
}

#[test]
fn criterion_11_attack_set_growth_never_hurts_and_pgd_beats_fgsm() {
    let ds = generate_dataset(&SyntheticSpec {
        kind: SyntheticKind::GaussianBlobs,
        n: 120,
        dim: 2,
        num_classes: 2,
        noise: 0.5,
        seed: 11,
    })
    .unwrap();
    let p = train(
        "blob-mlp",
        Architecture::Mlp {
            hidden: vec![8],
            activation: Activation::Relu,
        },
        &ds,
        &Hyper {
            learning_rate: 0.2,
            epochs: 200,
            batch_size: 16,
            l2: 0.0,
            seed: 3,
        },
    )
    .unwrap();
    let ctx = AttackContext::new(Metric::Linf, SuccessCriterion::PredictionChange);
    let grid = vec![0.5, 1.0, 2.0];

    let reduce = |specs: &[AttackSpec]| {
        let candidates = run_attack_set(&p, &ds, specs, &ctx).unwrap();
        attack_strategy_reduce(&candidates, &ds, p.model_id()).unwrap()
    };
    let narrow = reduce(&[AttackSpec::Fgsm {
        epsilon_grid: vec![1.0],
    }]);
    let base = reduce(&[AttackSpec::Fgsm {
        epsilon_grid: grid.clone(),
    }]);
    let extended = reduce(&[
        AttackSpec::Fgsm {
            epsilon_grid: grid.clone(),
        },
        AttackSpec::Pgd {
            epsilon_grid: grid.clone(),
            steps: 20,
            step_size: None,
        },
        AttackSpec::Random {
            epsilon_grid: grid.clone(),
            steps: 10,
            seed: 5,
        },
    ]);
    for (small, large) in [(&narrow, &base), (&base, &extended)] {
        let small = size_by_obs(small);
        for (obs, d_large) in size_by_obs(large) {
            assert!(
                no_larger(d_large, small[&obs]),
                "extending the attack set increased the perturbation size of {obs}"
            );
        }
    }

    let success_count = |spec: AttackSpec| {
        run_attack_set(&p, &ds, &[spec], &ctx)
            .unwrap()
            .iter()
            .filter(|c| c.success)
            .count()
    };
    let mut counts = Vec::new();
    for &eps in &grid {
        let f = success_count(AttackSpec::Fgsm {
            epsilon_grid: vec![eps],
        });
        let g = success_count(AttackSpec::Pgd {
            epsilon_grid: vec![eps],
            steps: 20,
            step_size: None,
        });
        assert!(
            g >= f,
            "pgd(20) found {g} successes but fgsm found {f} at eps {eps}"
        );
        counts.push(format!("eps {eps}: pgd {g} >= fgsm {f}"));
    }
    println!(
        "criterion 11 PASS: attack-set extension never increased a perturbation size; {}",
        counts.join("; ")
    );
}

fn reference_rows() -> Vec<SummaryRow> {
    vec![
        SummaryRow {
            model_id: "Baseline".into(),
            pdam: 0.76,
            asrs: vec![0.70, 1.00],
            mps: Some(0.00018),
            risk: None,
        },
        SummaryRow {
            model_id: "Engstrom-Robust".into(),
            pdam: 0.44,
            asrs: vec![0.16, 0.48],
            mps: Some(0.00020),
            risk: None,
        },
        SummaryRow {
            model_id: "Rice-Overfit".into(),
            pdam: 0.43,
            asrs: vec![0.20, 0.42],
            mps: Some(0.00119),
            risk: None,
        },
        SummaryRow {
            model_id: "Carmon-Semi".into(),
            pdam: 0.33,
            asrs: vec![0.13, 0.33],
            mps: Some(0.00095),
            risk: None,
        },
    ]
}

#[test]
fn criterion_12_reference_table_renders_byte_stable() {
    let rows = reference_rows();
    let labels = vec!["2/255".to_string(), "8/255".to_string()];
    let first = io::emit_report(&rows, &labels, ReportFormat::Markdown).unwrap();
    let second = io::emit_report(&rows, &labels, ReportFormat::Markdown).unwrap();
    assert_eq!(first, second, "rendering is not stable");
    let expected = "\
| Model | Pdam | ASR(2/255) | ASR(8/255) | MPS |
| --- | --- | --- | --- | --- |
| Baseline | 0.76 | 0.70 | 1.00 | 0.00018 |
| Engstrom-Robust | 0.44 | 0.16 | 0.48 | 0.00020 |
| Rice-Overfit | 0.43 | 0.20 | 0.42 | **0.00119** |
| Carmon-Semi | **0.33** | **0.13** | **0.33** | 0.00095 |
";
    assert_eq!(first, expected);

    let header: Vec<String> = expected
        .lines()
        .next()
        .unwrap()
        .trim_matches('|')
        .split('|')
        .map(|c| c.trim().to_string())
        .collect();
    let mut bold = BTreeSet::new();
    for line in expected.lines().skip(2) {
        let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
        for (k, cell) in cells.iter().enumerate().skip(1) {
            if cell.starts_with("**") {
                bold.insert((cells[0].to_string(), header[k].clone()));
            }
        }
    }
    let want: BTreeSet<(String, String)> = [
        ("Carmon-Semi", "Pdam"),
        ("Carmon-Semi", "ASR(2/255)"),
        ("Carmon-Semi", "ASR(8/255)"),
        ("Rice-Overfit", "MPS"),
    ]
    .into_iter()
    .map(|(m, c)| (m.to_string(), c.to_string()))
    .collect();
    assert_eq!(bold, want, "best markers on the wrong cells");
    println!(
        "criterion 12 PASS: reference table renders byte-stable with best markers on \
         Carmon-Semi (Pdam, both ASR columns) and Rice-Overfit (MPS)"
    );
}

#[test]
fn criterion_13_round_trips_and_sample_guards() {
    let dir = tempdir().unwrap();
    let d = dir.path();

    let set = AttackOutcomeSet::new(
        "rt",
        vec![
            PerturbationRecord::new("x0", "rt", PerturbationSize::finite(1.0 / 3.0).unwrap()),
            PerturbationRecord::new("x1", "rt", PerturbationSize::finite(0.1).unwrap()),
            PerturbationRecord::new("x2", "rt", PerturbationSize::Infinite),
        ],
    )
    .unwrap();
    let rpath = d.join("rt.records");
    io::write_records(&rpath, &set, Metric::L2).unwrap();
    let (back, metric) = io::read_records(&rpath).unwrap();
    assert_eq!(back.records(), set.records());
    assert_eq!(metric, Metric::L2);

    let ds = generate_dataset(&SyntheticSpec {
        kind: SyntheticKind::GaussianBlobs,
        n: 6,
        dim: 2,
        num_classes: 2,
        noise: 0.3,
        seed: 13,
    })
    .unwrap();
    let dpath = d.join("rt.tsv");
    io::write_dataset(&dpath, &ds).unwrap();
    assert_eq!(io::read_dataset(&dpath).unwrap(), ds);

    let p = Predictor::init("rt-model", Architecture::Linear, 2, 2, 5).unwrap();
    let mpath = d.join("rt.model");
    io::write_model(&mpath, &p).unwrap();
    assert_eq!(io::read_model(&mpath).unwrap(), p);

    let ctx = AttackContext::new(Metric::Linf, SuccessCriterion::PredictionChange);
    let candidates = run_attack_set(
        &p,
        &ds,
        &[AttackSpec::Fgsm {
            epsilon_grid: vec![0.3, 1.0],
        }],
        &ctx,
    )
    .unwrap();
    let cpath = d.join("rt.candidates");
    io::write_candidates(&cpath, &candidates, Metric::Linf, p.model_id(), ds.dim()).unwrap();
    let cf = io::read_candidates(&cpath).unwrap();
    assert_eq!(cf.candidates, candidates);
    assert_eq!((cf.metric, cf.dim), (Metric::Linf, 2));
    assert_eq!(cf.model_id, "rt-model");

    let samples = vec![
        DetectionSample {
            tau: 0.0,
            undetected: true,
        },
        DetectionSample {
            tau: 0.07,
            undetected: true,
        },
        DetectionSample {
            tau: 0.2,
            undetected: false,
        },
        DetectionSample {
            tau: 0.25,
            undetected: false,
        },
    ];
    let spath = d.join("rt.samples");
    io::write_detection_samples(&spath, &samples).unwrap();
    assert_eq!(io::read_detection_samples(&spath).unwrap(), samples);

    let fit = fit_logistic(&samples, 1e-3).unwrap();
    let fpath = d.join("rt.detector");
    io::write_detector_params(&fpath, &fit).unwrap();
    let fit2 = io::read_detector_params(&fpath).unwrap();
    assert_eq!(
        (fit2.beta0, fit2.beta1, fit2.log_likelihood, fit2.iterations),
        (fit.beta0, fit.beta1, fit.log_likelihood, fit.iterations)
    );

    // Records over a different observation sample must not pool.
    let other = AttackOutcomeSet::new(
        "other",
        vec![PerturbationRecord::new(
            "y0",
            "other",
            PerturbationSize::finite(0.5).unwrap(),
        )],
    )
    .unwrap();
    let opath = d.join("other.records");
    io::write_records(&opath, &other, Metric::L2).unwrap();
    let err = io::read_record_pool(&[&rpath, &opath]).unwrap_err();
    assert!(
        matches!(err, Error::SampleMismatch(_)),
        "pooling mismatched samples gave {err:?}"
    );

    // The sample hash covers the observation ids (sizes legitimately vary
    // per model), so renaming an observation breaks the header hash.
    let text = std::fs::read_to_string(&rpath).unwrap();
    let tampered = text.replacen("x0\t", "z0\t", 1);
    assert_ne!(text, tampered, "tamper target line not found");
    let tpath = d.join("tampered.records");
    std::fs::write(&tpath, tampered).unwrap();
    let err = io::read_records(&tpath).unwrap_err();
    assert!(
        matches!(err, Error::Format { .. }),
        "tampered records gave {err:?}"
    );

    println!(
        "criterion 13 PASS: records, candidates, dataset, model, detection samples and \
         detector parameters all round-trip; mismatched and tampered samples rejected"
    );
}
