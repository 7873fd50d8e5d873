//! Command-line pipeline for adversarial damage-probability estimation:
//! generate data, train toy models, attack them, fit or supply a
//! detection function, and estimate damage probabilities with reports,
//! curves, and bootstrap bands.
//!
//! Every subcommand accepts `--config FILE` holding `key = value` lines
//! (keys are the long flag names); flags given on the command line
//! override the file. Exit codes: 0 success, 2 configuration error,
//! 3 file error, 4 numeric failure. All randomness derives from the
//! subcommand's `--seed` through named substreams, so equal seeds give
//! byte-identical output files.

use advrisk::attack::{attack_strategy_reduce, run_attack_set, AttackContext, AttackSpec};
use advrisk::bootstrap::{bootstrap_bands, BandMetric};
use advrisk::detection::{fit_logistic, DetectionFunction};
use advrisk::domain::{evaluate_success, Metric, SuccessCriterion};
use advrisk::estimators::{
    average_detection_fn, operational_risk, pdam_detector_free, pdam_monte_carlo_from_records,
    pdam_surrogate, summary_table, RiskEstimate,
};
use advrisk::io;
use advrisk::models::{generate_dataset, train, Architecture, Hyper, SyntheticKind, SyntheticSpec};
use advrisk::seeds;
use advrisk::{Error, Result};

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

const DEFAULT_EPS_GRID: &str = "1/255,2/255,4/255,8/255,16/255,32/255,64/255,128/255";
const DEFAULT_TAUS: &str = "2/255,8/255";

#[derive(Parser)]
#[command(
    name = "advrisk",
    version,
    args_override_self = true,
    about = "Estimate the damage probability of adversarial attacks on classifiers",
    after_help = "Each subcommand also accepts --config FILE with `key = value` lines \
                  (long flag names as keys); command-line flags override the file."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset
    Generate(GenerateArgs),
    /// Train a toy classifier on a dataset file
    Train(TrainArgs),
    /// Attack a model and record minimal successful perturbation sizes
    Attack(AttackArgs),
    /// Fit a logistic detection function to detector samples
    FitDetector(FitDetectorArgs),
    /// Estimate damage probabilities and print the comparison table
    Estimate(EstimateArgs),
    /// Bootstrap percentile bands of a statistic over sample size
    Bootstrap(BootstrapArgs),
    /// Export the attack success rate curve of a record file
    Curve(CurveArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// gaussian-blobs, two-moons, or xor-grid
    #[arg(long, default_value = "gaussian-blobs")]
    kind: String,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Input dataset file
    #[arg(long)]
    data: PathBuf,
    /// linear, or mlp:SIZES:ACTIVATION (e.g. mlp:16,8:relu)
    #[arg(long, default_value = "linear")]
    arch: String,
    #[arg(long)]
    model_id: String,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// linf or l2
    #[arg(long, default_value = "linf")]
    metric: String,
    /// prediction-change or ground-truth
    #[arg(long, default_value = "prediction-change")]
    criterion: String,
    /// Comma-separated attack names out of fgsm, pgd, random
    #[arg(long, default_value = "fgsm,pgd,random")]
    attacks: String,
    /// Comma-separated perturbation budgets (floats or fractions like 8/255)
    #[arg(long, default_value = DEFAULT_EPS_GRID)]
    eps_grid: String,
    /// Iterations for pgd and random
    #[arg(long, default_value_t = 10)]
    steps: u32,
    /// Override the pgd step size (default 2.5 * eps / steps)
    #[arg(long)]
    pgd_step_size: Option<f64>,
    /// Clip perturbed points to LO,HI per coordinate
    #[arg(long)]
    clip: Option<String>,
    /// Keep observations the model already gets wrong (ground-truth
    /// criterion only; by default they are dropped before the attack)
    #[arg(long)]
    keep_misclassified: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output record file (observation id, minimal perturbation size)
    #[arg(long)]
    records_out: PathBuf,
    /// Output candidate file (default: RECORDS_OUT.candidates)
    #[arg(long)]
    candidates_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitDetectorArgs {
    /// Detection samples file (tau, undetected flag)
    #[arg(long)]
    samples: PathBuf,
    /// Ridge strength; keep > 0 so separated samples stay finite
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    /// Output detector parameter file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Comma-separated record files (one per model, same sample)
    #[arg(long)]
    records: String,
    /// average | step:THETA | logistic:B0,B1 | logistic-file:PATH
    #[arg(long, default_value = "average")]
    detection: String,
    /// surrogate (integrate the detection function) or monte-carlo
    /// (one detector draw per successful attack)
    #[arg(long, default_value = "surrogate")]
    method: String,
    /// Comma-separated budgets for the ASR columns
    #[arg(long, default_value = DEFAULT_TAUS)]
    tau: String,
    /// Cost of one damaging event; adds the Risk column
    #[arg(long)]
    c_dam: Option<f64>,
    /// markdown or tsv
    #[arg(long, default_value = "markdown")]
    format: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the table to this file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BootstrapArgs {
    /// Comma-separated record files (one per model, same sample)
    #[arg(long)]
    records: String,
    /// pdam | pdam-surrogate | mps | aps | asr:TAU
    #[arg(long, default_value = "pdam")]
    metric_name: String,
    /// Detection source for pdam-surrogate (same syntax as estimate)
    #[arg(long, default_value = "average")]
    detection: String,
    /// Subsample sizes: START:END:STEP (inclusive) or a comma list
    #[arg(long, default_value = "20:200:20")]
    n_grid: String,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output band CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    /// Record file to export the success-rate curve of
    #[arg(long)]
    records: PathBuf,
    /// Output CSV (tau,value)
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = match expand_config_args(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => return fail(&e),
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    let code = match e {
        Error::InvalidValue(_)
        | Error::EmptyInput(_)
        | Error::DimensionMismatch { .. }
        | Error::DuplicateObservation(_)
        | Error::UnknownObservation(_)
        | Error::SampleMismatch(_) => 2,
        Error::Io(_) | Error::Format { .. } => 3,
        Error::Training(_) | Error::NonConvergence(_) => 4,
    };
    ExitCode::from(code)
}

/// Splices `--config FILE` contents into the argument list right after
/// the subcommand, so explicit flags (which come later) override the
/// file. `key = value` per line; `#` starts a comment; boolean flags
/// take true/false.
fn expand_config_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config: Option<PathBuf> = None;
    let mut rest: Vec<OsString> = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        match a.to_str() {
            Some("--config") => {
                let v = iter.next().ok_or_else(|| {
                    Error::InvalidValue("--config requires a file path".into())
                })?;
                config = Some(PathBuf::from(v));
            }
            Some(s) if s.starts_with("--config=") => {
                config = Some(PathBuf::from(&s["--config=".len()..]));
            }
            _ => rest.push(a),
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let subcommand_end = rest
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| a.to_str().is_none_or(|s| !s.starts_with('-')))
        .map(|(i, _)| i + 1)
        .ok_or_else(|| Error::InvalidValue("--config requires a subcommand".into()))?;

    let text = std::fs::read_to_string(&path)?;
    let mut injected: Vec<OsString> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            line: i + 1,
            msg: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Format {
                path: path.display().to_string(),
                line: i + 1,
                msg: "empty key".into(),
            });
        }
        match value {
            "true" => injected.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                injected.push(format!("--{key}").into());
                injected.push(value.into());
            }
        }
    }
    let mut merged = rest;
    merged.splice(subcommand_end..subcommand_end, injected);
    Ok(merged)
}

/// Parses a float or a fraction like `8/255`.
fn parse_budget(s: &str) -> Result<f64> {
    let v = match s.split_once('/') {
        Some((num, den)) => {
            let n: f64 = num
                .trim()
                .parse()
                .map_err(|_| Error::InvalidValue(format!("malformed fraction `{s}`")))?;
            let d: f64 = den
                .trim()
                .parse()
                .map_err(|_| Error::InvalidValue(format!("malformed fraction `{s}`")))?;
            if d == 0.0 {
                return Err(Error::InvalidValue(format!("zero denominator in `{s}`")));
            }
            n / d
        }
        None => s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidValue(format!("malformed number `{s}`")))?,
    };
    if !v.is_finite() {
        return Err(Error::InvalidValue(format!("`{s}` is not finite")));
    }
    Ok(v)
}

fn split_list(s: &str, what: &str) -> Result<Vec<String>> {
    let items: Vec<String> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect();
    if items.is_empty() {
        return Err(Error::EmptyInput(what.to_string()));
    }
    Ok(items)
}

/// Budgets with their original spellings, ascending and deduplicated;
/// the spellings become column labels.
fn parse_tau_list(s: &str) -> Result<(Vec<f64>, Vec<String>)> {
    let mut pairs: Vec<(f64, String)> = split_list(s, "tau list")?
        .into_iter()
        .map(|label| Ok((parse_budget(&label)?, label)))
        .collect::<Result<_>>()?;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.dedup_by(|a, b| a.0 == b.0);
    Ok(pairs.into_iter().unzip())
}

fn parse_eps_grid(s: &str) -> Result<Vec<f64>> {
    let mut grid: Vec<f64> = split_list(s, "epsilon grid")?
        .iter()
        .map(|p| parse_budget(p))
        .collect::<Result<_>>()?;
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

enum DetectionSource {
    /// Detector-free: pool the models' own attack outcomes.
    Average,
    Fixed(DetectionFunction),
}

fn parse_detection(s: &str) -> Result<DetectionSource> {
    if s == "average" {
        return Ok(DetectionSource::Average);
    }
    if let Some(theta) = s.strip_prefix("step:") {
        return Ok(DetectionSource::Fixed(DetectionFunction::step(
            parse_budget(theta)?,
        )?));
    }
    if let Some(params) = s.strip_prefix("logistic:") {
        let parts: Vec<&str> = params.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::InvalidValue(format!(
                "expected logistic:BETA0,BETA1, got `{s}`"
            )));
        }
        return Ok(DetectionSource::Fixed(DetectionFunction::logistic(
            parse_budget(parts[0])?,
            parse_budget(parts[1])?,
        )?));
    }
    if let Some(path) = s.strip_prefix("logistic-file:") {
        let fit = io::read_detector_params(path)?;
        if fit.is_increasing() {
            eprintln!(
                "warning: detector file {path} has detection probability \
                 decreasing in perturbation size"
            );
        }
        return Ok(DetectionSource::Fixed(fit.function()));
    }
    Err(Error::InvalidValue(format!(
        "unknown detection source `{s}` \
         (expected average, step:THETA, logistic:B0,B1, or logistic-file:PATH)"
    )))
}

fn record_paths(list: &str) -> Result<Vec<PathBuf>> {
    Ok(split_list(list, "record file list")?
        .into_iter()
        .map(PathBuf::from)
        .collect())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Attack(a) => cmd_attack(a),
        Command::FitDetector(a) => cmd_fit_detector(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Curve(a) => cmd_curve(a),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let spec = SyntheticSpec {
        kind: SyntheticKind::from_str(&a.kind)?,
        n: a.n,
        dim: a.dim,
        num_classes: a.classes,
        noise: a.noise,
        seed: seeds::derive_seed(a.seed, seeds::GENERATE),
    };
    let ds = generate_dataset(&spec)?;
    io::write_dataset(&a.out, &ds)?;
    println!(
        "wrote {} observations (dim {}, {} classes) to {}",
        ds.len(),
        ds.dim(),
        ds.num_classes(),
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let ds = io::read_dataset(&a.data)?;
    let arch = Architecture::from_str(&a.arch)?;
    let hyper = Hyper {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        l2: a.l2,
        seed: seeds::derive_seed(a.seed, seeds::TRAIN),
    };
    let p = train(&a.model_id, arch, &ds, &hyper)?;
    io::write_model(&a.out, &p)?;
    println!(
        "trained {} ({}): accuracy {:.3}, loss {:.4}, saved to {}",
        p.model_id(),
        p.architecture(),
        advrisk::models::accuracy(&p, &ds)?,
        advrisk::models::mean_cross_entropy(&p, &ds)?,
        a.out.display()
    );
    Ok(())
}

fn attack_specs(a: &AttackArgs) -> Result<Vec<AttackSpec>> {
    let grid = parse_eps_grid(&a.eps_grid)?;
    let names = split_list(&a.attacks, "attack list")?;
    let mut specs = Vec::with_capacity(names.len());
    for name in &names {
        let spec = match name.as_str() {
            "fgsm" => AttackSpec::Fgsm {
                epsilon_grid: grid.clone(),
            },
            "pgd" => AttackSpec::Pgd {
                epsilon_grid: grid.clone(),
                steps: a.steps,
                step_size: a.pgd_step_size,
            },
            "random" => AttackSpec::Random {
                epsilon_grid: grid.clone(),
                steps: a.steps,
                seed: seeds::derive_seed(a.seed, seeds::ATTACK),
            },
            other => {
                return Err(Error::InvalidValue(format!(
                    "unknown attack `{other}` (expected fgsm, pgd, or random)"
                )))
            }
        };
        if specs
            .iter()
            .any(|s: &AttackSpec| s.name() == spec.name())
        {
            return Err(Error::InvalidValue(format!("attack `{name}` listed twice")));
        }
        specs.push(spec);
    }
    Ok(specs)
}

fn cmd_attack(a: AttackArgs) -> Result<()> {
    let ds = io::read_dataset(&a.data)?;
    let p = io::read_model(&a.model)?;
    if p.dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: ds.dim(),
        });
    }
    let metric = Metric::from_str(&a.metric)?;
    let criterion = SuccessCriterion::from_str(&a.criterion)?;
    let mut ctx = AttackContext::new(metric, criterion);
    if let Some(clip) = &a.clip {
        let parts: Vec<&str> = clip.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::InvalidValue(format!("expected --clip LO,HI, got `{clip}`")));
        }
        ctx = ctx.with_clip(parse_budget(parts[0])?, parse_budget(parts[1])?)?;
    }

    let ds = if a.keep_misclassified {
        ds
    } else {
        let mut keep = Vec::with_capacity(ds.len());
        for o in ds.observations() {
            let label = p.predict(o.features())?;
            keep.push(!evaluate_success(criterion, label, o.label(), label));
        }
        let mut it = keep.iter();
        let filtered = ds.filter(|_| *it.next().expect("one flag per observation"));
        let dropped = ds.len() - filtered.len();
        if dropped > 0 {
            eprintln!(
                "dropped {dropped} observations the model already gets wrong \
                 (pass --keep-misclassified to keep them)"
            );
        }
        filtered
    };

    let specs = attack_specs(&a)?;
    let instances: usize = specs.iter().map(AttackSpec::instance_count).sum();
    let candidates = run_attack_set(&p, &ds, &specs, &ctx)?;
    let outcomes = attack_strategy_reduce(&candidates, &ds, p.model_id())?;

    let candidates_out = a.candidates_out.unwrap_or_else(|| {
        let mut s: OsString = a.records_out.clone().into();
        s.push(".candidates");
        PathBuf::from(s)
    });
    io::write_candidates(&candidates_out, &candidates, metric, p.model_id(), ds.dim())?;
    io::write_records(&a.records_out, &outcomes, metric)?;

    let successes = outcomes.len() - outcomes.infinite_count();
    println!(
        "attack set size {instances}; {} candidates written to {}",
        candidates.len(),
        candidates_out.display()
    );
    if outcomes.is_empty() {
        println!("no observations to attack; empty records written to {}", a.records_out.display());
    } else {
        println!(
            "{}: {successes}/{} observations successfully attacked (fraction {}), records written to {}",
            p.model_id(),
            outcomes.len(),
            successes as f64 / outcomes.len() as f64,
            a.records_out.display()
        );
    }
    Ok(())
}

fn cmd_fit_detector(a: FitDetectorArgs) -> Result<()> {
    let samples = io::read_detection_samples(&a.samples)?;
    if samples.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "detection samples (found {}, need at least 2)",
            samples.len()
        )));
    }
    let fit = fit_logistic(&samples, a.l2)?;
    if fit.is_increasing() {
        eprintln!(
            "warning: fitted detection probability decreases with perturbation \
             size; the damage estimate will not be monotone"
        );
    }
    io::write_detector_params(&a.out, &fit)?;
    println!(
        "fitted logistic detector on {} samples: beta0 {}, beta1 {}, \
         log-likelihood {:.4}, {} iterations, saved to {}",
        samples.len(),
        fit.beta0,
        fit.beta1,
        fit.log_likelihood,
        fit.iterations,
        a.out.display()
    );
    Ok(())
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let paths = record_paths(&a.records)?;
    let (pool, _metric) = io::read_record_pool(&paths)?;
    let source = parse_detection(&a.detection)?;
    if matches!(source, DetectionSource::Average) && pool.len() == 1 {
        eprintln!(
            "warning: detector-free estimation over a single model uses only \
             that model's attacks as the detection reference; pool more record \
             files for a meaningful average"
        );
    }
    let (taus, labels) = parse_tau_list(&a.tau)?;
    let format = io::ReportFormat::from_str(&a.format)?;

    let estimates: Vec<RiskEstimate> = match (&source, a.method.as_str()) {
        (DetectionSource::Average, "surrogate") => pdam_detector_free(&pool)?,
        (DetectionSource::Fixed(f), "surrogate") => pool
            .iter()
            .map(|o| pdam_surrogate(o, f))
            .collect::<Result<_>>()?,
        (source, "monte-carlo") => {
            let f = match source {
                DetectionSource::Average => average_detection_fn(&pool)?,
                DetectionSource::Fixed(f) => f.clone(),
            };
            let seed = seeds::derive_seed(a.seed, seeds::DETECTOR);
            pool.iter()
                .map(|o| pdam_monte_carlo_from_records(o, &f, seed))
                .collect::<Result<_>>()?
        }
        (_, other) => {
            return Err(Error::InvalidValue(format!(
                "unknown method `{other}` (expected surrogate or monte-carlo)"
            )))
        }
    };

    let mut rows = summary_table(
        &pool,
        &taus,
        match &source {
            DetectionSource::Average => None,
            DetectionSource::Fixed(f) => Some(f),
        },
    )?;
    for (row, est) in rows.iter_mut().zip(&estimates) {
        row.pdam = est.pdam;
        if let Some(c) = a.c_dam {
            row.risk = Some(operational_risk(est, c)?);
        }
    }

    for est in &estimates {
        println!(
            "{}: pdam={} ({}, n={}, detection {})",
            est.model_id, est.pdam, est.method, est.n, est.detection
        );
    }
    let report = io::emit_report(&rows, &labels, format)?;
    println!();
    print!("{report}");
    if let Some(out) = &a.out {
        std::fs::write(out, &report).map_err(Error::from)?;
    }
    Ok(())
}

fn parse_n_grid(s: &str) -> Result<Vec<usize>> {
    let parse_one = |p: &str| -> Result<usize> {
        p.trim()
            .parse()
            .map_err(|_| Error::InvalidValue(format!("malformed subsample size `{p}`")))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidValue(format!(
                "expected START:END:STEP or a comma list, got `{s}`"
            )));
        }
        let (start, end, step) = (parse_one(parts[0])?, parse_one(parts[1])?, parse_one(parts[2])?);
        if step == 0 || end < start {
            return Err(Error::InvalidValue(format!("empty subsample range `{s}`")));
        }
        Ok((start..=end).step_by(step).collect())
    } else {
        split_list(s, "subsample size grid")?
            .iter()
            .map(|p| parse_one(p))
            .collect()
    }
}

fn cmd_bootstrap(a: BootstrapArgs) -> Result<()> {
    let paths = record_paths(&a.records)?;
    let (pool, _metric) = io::read_record_pool(&paths)?;
    let metric = match a.metric_name.as_str() {
        "pdam" | "pdam-detector-free" => BandMetric::PdamDetectorFree,
        "pdam-surrogate" => {
            let f = match parse_detection(&a.detection)? {
                DetectionSource::Average => average_detection_fn(&pool)?,
                DetectionSource::Fixed(f) => f,
            };
            BandMetric::PdamSurrogate(f)
        }
        "mps" => BandMetric::Mps,
        "aps" => BandMetric::Aps,
        other => match other.strip_prefix("asr:") {
            Some(tau) => BandMetric::Asr(parse_budget(tau)?),
            None => {
                return Err(Error::InvalidValue(format!(
                    "unknown statistic `{other}` \
                     (expected pdam, pdam-surrogate, mps, aps, or asr:TAU)"
                )))
            }
        },
    };
    let n_grid = parse_n_grid(&a.n_grid)?;
    let seed = seeds::derive_seed(a.seed, seeds::BOOTSTRAP);
    let bands = bootstrap_bands(&pool, &metric, &n_grid, a.reps, seed)?;
    io::write_bands(&a.out, &bands)?;
    println!(
        "wrote {} band rows ({} models x {} sizes, {} resamples each) to {}",
        bands.len() * n_grid.len(),
        bands.len(),
        n_grid.len(),
        a.reps,
        a.out.display()
    );
    Ok(())
}

fn cmd_curve(a: CurveArgs) -> Result<()> {
    let (outcomes, _metric) = io::read_records(&a.records)?;
    let points = advrisk::estimators::asr_curve(&outcomes)?;
    io::emit_curve(&points, &a.out)?;
    println!(
        "wrote {} breakpoints for {} to {}",
        points.len(),
        outcomes.model_id(),
        a.out.display()
    );
    Ok(())
}
