//! Versioned text formats for every artifact the pipeline produces.
//!
//! All files are UTF-8 with LF line endings and `.` as the decimal
//! separator. Data floats are written with 17 significant digits
//! (`{:.16e}`), which round-trips every finite f64 bit-exactly; the
//! plot-facing CSVs (curves, bands) use the shortest round-trip form
//! instead. Perturbation records use the literal `inf` for observations
//! without a successful attack.
//!
//! Each format starts with a tab-separated header line carrying a magic
//! name and version, plus enough metadata to validate the payload:
//! record files embed a 64-bit FNV-1a hash of the sorted observation ids
//! so that files produced against different samples refuse to pool.

use crate::bootstrap::BootstrapBand;
use crate::detection::{DetectionSample, LogisticFit};
use crate::domain::{
    AttackCandidate, AttackOutcomeSet, Dataset, Metric, Observation, PerturbationRecord,
    PerturbationSize,
};
use crate::error::{Error, Result};
use crate::estimators::{column_bests, SummaryRow};
use crate::models::{Architecture, Predictor};

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

const RECORDS_MAGIC: &str = "advrisk-records";
const CANDIDATES_MAGIC: &str = "advrisk-candidates";
const DATASET_MAGIC: &str = "advrisk-dataset";
const MODEL_MAGIC: &str = "advrisk-model";
const SAMPLES_MAGIC: &str = "advrisk-detection-samples";
const DETECTOR_MAGIC: &str = "advrisk-detector";
const VERSION: &str = "v1";

/// 17 significant digits: enough to reproduce any finite f64 exactly.
fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

/// Shortest round-trip form for plot-facing CSVs.
fn fmt_plot(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

fn parse_float(s: &str, path: &Path, line: usize, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::format(path, line, format!("malformed {what} `{s}`")))
}

/// Splits `key=value`, checking the key.
fn header_value<'a>(field: &'a str, key: &str, path: &Path, line: usize) -> Result<&'a str> {
    match field.split_once('=') {
        Some((k, v)) if k == key => Ok(v),
        _ => Err(Error::format(
            path,
            line,
            format!("expected header field `{key}=...`, found `{field}`"),
        )),
    }
}

fn check_header(parts: &[&str], magic: &str, arity: usize, path: &Path) -> Result<()> {
    if parts.is_empty() || parts[0] != magic {
        return Err(Error::format(
            path,
            1,
            format!("not a {magic} file (magic `{}`)", parts.first().unwrap_or(&"")),
        ));
    }
    if parts.len() < 2 || parts[1] != VERSION {
        return Err(Error::format(
            path,
            1,
            format!(
                "unsupported {magic} version `{}`",
                parts.get(1).unwrap_or(&"")
            ),
        ));
    }
    if parts.len() != arity {
        return Err(Error::format(
            path,
            1,
            format!("expected {arity} header fields, found {}", parts.len()),
        ));
    }
    Ok(())
}

fn reject_separator_chars(s: &str, what: &str) -> Result<()> {
    if s.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
        return Err(Error::invalid(format!(
            "{what} `{}` contains a tab or line break",
            s.escape_default()
        )));
    }
    Ok(())
}

/// Writes one model's perturbation records. The header pins the metric
/// the distances were measured under and the sample hash that guards
/// pooling.
pub fn write_records(path: impl AsRef<Path>, o: &AttackOutcomeSet, metric: Metric) -> Result<()> {
    let mut text = format!(
        "{RECORDS_MAGIC}\t{VERSION}\tmetric={metric}\tmodel={}\tsample={:016x}\n",
        o.model_id(),
        o.sample_hash()
    );
    for r in o.records() {
        let d = match r.d_a {
            PerturbationSize::Finite(v) => fmt_exact(v),
            PerturbationSize::Infinite => "inf".to_string(),
        };
        let _ = writeln!(text, "{}\t{}", r.observation_id, d);
    }
    fs::write(path, text)?;
    Ok(())
}

/// Reads a record file, re-deriving and checking the sample hash.
pub fn read_records(path: impl AsRef<Path>) -> Result<(AttackOutcomeSet, Metric)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty file"))?;
    let parts: Vec<&str> = header.split('\t').collect();
    check_header(&parts, RECORDS_MAGIC, 5, path)?;
    let metric = Metric::from_str(header_value(parts[2], "metric", path, 1)?)
        .map_err(|e| Error::format(path, 1, e.to_string()))?;
    let model_id = header_value(parts[3], "model", path, 1)?.to_string();
    let declared = header_value(parts[4], "sample", path, 1)?;
    let declared = u64::from_str_radix(declared, 16)
        .map_err(|_| Error::format(path, 1, format!("malformed sample hash `{declared}`")))?;

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let (id, d) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, lineno, "expected `observation_id<TAB>d_a`"))?;
        if d.contains('\t') {
            return Err(Error::format(path, lineno, "too many fields"));
        }
        if !seen.insert(id) {
            return Err(Error::format(
                path,
                lineno,
                format!("duplicate observation id `{id}`"),
            ));
        }
        let d_a = if d == "inf" {
            PerturbationSize::Infinite
        } else {
            let v = parse_float(d, path, lineno, "perturbation size")?;
            PerturbationSize::finite(v).map_err(|e| Error::format(path, lineno, e.to_string()))?
        };
        records.push(PerturbationRecord::new(id, model_id.clone(), d_a));
    }
    let set = AttackOutcomeSet::new(model_id, records)?;
    let computed = set.sample_hash();
    if computed != declared {
        return Err(Error::format(
            path,
            1,
            format!("sample hash mismatch: header {declared:016x}, records {computed:016x}"),
        ));
    }
    Ok((set, metric))
}

/// Reads several record files destined for pooled estimation, requiring
/// a common metric and an identical observation sample.
pub fn read_record_pool(
    paths: &[impl AsRef<Path>],
) -> Result<(Vec<AttackOutcomeSet>, Metric)> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("record file list".into()));
    }
    let mut sets = Vec::with_capacity(paths.len());
    let mut metric = None;
    let mut first: Option<(u64, String)> = None;
    for p in paths {
        let p = p.as_ref();
        let (set, m) = read_records(p)?;
        match metric {
            None => metric = Some(m),
            Some(m0) if m0 != m => {
                return Err(Error::format(
                    p,
                    1,
                    format!("metric {m} does not match pooled metric {m0}"),
                ))
            }
            Some(_) => {}
        }
        match &first {
            None => first = Some((set.sample_hash(), p.display().to_string())),
            Some((h0, p0)) if *h0 != set.sample_hash() => {
                return Err(Error::SampleMismatch(format!(
                    "{} and {p0} cover different observation samples ({:016x} vs {h0:016x})",
                    p.display(),
                    set.sample_hash()
                )))
            }
            Some(_) => {}
        }
        sets.push(set);
    }
    Ok((sets, metric.expect("nonempty paths")))
}

/// Attack candidates plus the run context they were produced under.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateFile {
    pub candidates: Vec<AttackCandidate>,
    pub metric: Metric,
    pub model_id: String,
    pub dim: usize,
}

/// Writes the full candidate list of an attack run so it can be
/// re-reduced or audited later.
pub fn write_candidates(
    path: impl AsRef<Path>,
    candidates: &[AttackCandidate],
    metric: Metric,
    model_id: &str,
    dim: usize,
) -> Result<()> {
    reject_separator_chars(model_id, "model id")?;
    let mut text =
        format!("{CANDIDATES_MAGIC}\t{VERSION}\tmetric={metric}\tmodel={model_id}\tdim={dim}\n");
    for c in candidates {
        reject_separator_chars(&c.observation_id, "observation id")?;
        reject_separator_chars(&c.attack_name, "attack name")?;
        if c.perturbed_features.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: c.perturbed_features.len(),
            });
        }
        let params = if c.params.is_empty() {
            "-".to_string()
        } else {
            let mut pairs = Vec::with_capacity(c.params.len());
            for (k, v) in &c.params {
                for (s, what) in [(k, "attack parameter name"), (v, "attack parameter value")] {
                    reject_separator_chars(s, what)?;
                    if s.is_empty() || s.contains(',') || s.contains('=') {
                        return Err(Error::invalid(format!("{what} `{s}` not serializable")));
                    }
                }
                pairs.push(format!("{k}={v}"));
            }
            pairs.join(",")
        };
        let features: Vec<String> = c.perturbed_features.iter().map(|&v| fmt_exact(v)).collect();
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}",
            c.observation_id,
            c.attack_name,
            params,
            c.success,
            fmt_exact(c.distance),
            features.join(",")
        );
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_candidates(path: impl AsRef<Path>) -> Result<CandidateFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty file"))?;
    let parts: Vec<&str> = header.split('\t').collect();
    check_header(&parts, CANDIDATES_MAGIC, 5, path)?;
    let metric = Metric::from_str(header_value(parts[2], "metric", path, 1)?)
        .map_err(|e| Error::format(path, 1, e.to_string()))?;
    let model_id = header_value(parts[3], "model", path, 1)?.to_string();
    let dim_str = header_value(parts[4], "dim", path, 1)?;
    let dim: usize = dim_str
        .parse()
        .map_err(|_| Error::format(path, 1, format!("malformed dim `{dim_str}`")))?;

    let mut candidates = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::format(
                path,
                lineno,
                format!("expected 6 tab-separated fields, found {}", fields.len()),
            ));
        }
        let mut params = BTreeMap::new();
        if fields[2] != "-" {
            for pair in fields[2].split(',') {
                let (k, v) = pair.split_once('=').ok_or_else(|| {
                    Error::format(path, lineno, format!("malformed parameter `{pair}`"))
                })?;
                if params.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(Error::format(
                        path,
                        lineno,
                        format!("duplicate parameter `{k}`"),
                    ));
                }
            }
        }
        let success = match fields[3] {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::format(
                    path,
                    lineno,
                    format!("malformed success flag `{other}`"),
                ))
            }
        };
        let distance = parse_float(fields[4], path, lineno, "distance")?;
        if !distance.is_finite() || distance < 0.0 {
            return Err(Error::format(
                path,
                lineno,
                format!("distance must be finite and >= 0, got {distance}"),
            ));
        }
        let mut features = Vec::with_capacity(dim);
        for f in fields[5].split(',') {
            let v = parse_float(f, path, lineno, "feature")?;
            if !v.is_finite() {
                return Err(Error::format(path, lineno, "non-finite feature"));
            }
            features.push(v);
        }
        if features.len() != dim {
            return Err(Error::format(
                path,
                lineno,
                format!("expected {dim} features, found {}", features.len()),
            ));
        }
        candidates.push(AttackCandidate {
            observation_id: fields[0].to_string(),
            attack_name: fields[1].to_string(),
            params,
            perturbed_features: features,
            distance,
            success,
        });
    }
    Ok(CandidateFile {
        candidates,
        metric,
        model_id,
        dim,
    })
}

pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut text = format!(
        "{DATASET_MAGIC}\t{VERSION}\tdim={}\tclasses={}\tn={}\n",
        ds.dim(),
        ds.num_classes(),
        ds.len()
    );
    for o in ds.observations() {
        let features: Vec<String> = o.features().iter().map(|&v| fmt_exact(v)).collect();
        let _ = writeln!(text, "{}\t{}\t{}", o.id(), o.label(), features.join(","));
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty file"))?;
    let parts: Vec<&str> = header.split('\t').collect();
    check_header(&parts, DATASET_MAGIC, 5, path)?;
    let parse_count = |field: &str, key: &str| -> Result<usize> {
        let v = header_value(field, key, path, 1)?;
        v.parse()
            .map_err(|_| Error::format(path, 1, format!("malformed {key} `{v}`")))
    };
    let dim = parse_count(parts[2], "dim")?;
    let classes = parse_count(parts[3], "classes")?;
    let n = parse_count(parts[4], "n")?;

    let mut observations = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::format(
                path,
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let label: usize = fields[1]
            .parse()
            .map_err(|_| Error::format(path, lineno, format!("malformed label `{}`", fields[1])))?;
        let mut features = Vec::with_capacity(dim);
        for f in fields[2].split(',') {
            features.push(parse_float(f, path, lineno, "feature")?);
        }
        let obs = Observation::new(fields[0], features, label)
            .map_err(|e| Error::format(path, lineno, e.to_string()))?;
        observations.push(obs);
    }
    if observations.len() != n {
        return Err(Error::format(
            path,
            1,
            format!("header declares n={n} but file has {} records", observations.len()),
        ));
    }
    Dataset::new(observations, dim, classes)
}

/// Writes a predictor: text header terminated by LF, then the weights as
/// consecutive little-endian 64-bit floats.
pub fn write_model(path: impl AsRef<Path>, p: &Predictor) -> Result<()> {
    reject_separator_chars(p.model_id(), "model id")?;
    let header = format!(
        "{MODEL_MAGIC}\t{VERSION}\tmodel={}\tarch={}\tdim={}\tclasses={}\tweights={}\n",
        p.model_id(),
        p.architecture(),
        p.dim(),
        p.num_classes(),
        p.weights().len()
    );
    let mut bytes = header.into_bytes();
    bytes.reserve(p.weights().len() * 8);
    for w in p.weights() {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<Predictor> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, 1, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::format(path, 1, "header is not UTF-8"))?;
    let parts: Vec<&str> = header.split('\t').collect();
    check_header(&parts, MODEL_MAGIC, 7, path)?;
    let model_id = header_value(parts[2], "model", path, 1)?.to_string();
    let arch = Architecture::from_str(header_value(parts[3], "arch", path, 1)?)
        .map_err(|e| Error::format(path, 1, e.to_string()))?;
    let parse_count = |field: &str, key: &str| -> Result<usize> {
        let v = header_value(field, key, path, 1)?;
        v.parse()
            .map_err(|_| Error::format(path, 1, format!("malformed {key} `{v}`")))
    };
    let dim = parse_count(parts[4], "dim")?;
    let classes = parse_count(parts[5], "classes")?;
    let count = parse_count(parts[6], "weights")?;
    let payload = &bytes[nl + 1..];
    if payload.len() != count * 8 {
        return Err(Error::format(
            path,
            2,
            format!(
                "expected {} bytes of weight data, found {}",
                count * 8,
                payload.len()
            ),
        ));
    }
    let weights: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks_exact(8)")))
        .collect();
    Predictor::from_parts(model_id, arch, dim, classes, weights)
}

/// Writes detector observations (perturbation size, was it missed) for
/// later fitting.
pub fn write_detection_samples(
    path: impl AsRef<Path>,
    samples: &[DetectionSample],
) -> Result<()> {
    let mut text = format!("{SAMPLES_MAGIC}\t{VERSION}\tn={}\n", samples.len());
    for s in samples {
        if !s.tau.is_finite() || s.tau < 0.0 {
            return Err(Error::invalid(format!(
                "detection sample tau must be finite and >= 0, got {}",
                s.tau
            )));
        }
        let _ = writeln!(text, "{}\t{}", fmt_exact(s.tau), u8::from(s.undetected));
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_detection_samples(path: impl AsRef<Path>) -> Result<Vec<DetectionSample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty file"))?;
    let parts: Vec<&str> = header.split('\t').collect();
    check_header(&parts, SAMPLES_MAGIC, 3, path)?;
    let n_str = header_value(parts[2], "n", path, 1)?;
    let n: usize = n_str
        .parse()
        .map_err(|_| Error::format(path, 1, format!("malformed n `{n_str}`")))?;
    let mut samples = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let (tau, flag) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, lineno, "expected `tau<TAB>undetected`"))?;
        let tau = parse_float(tau, path, lineno, "tau")?;
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::format(
                path,
                lineno,
                format!("tau must be finite and >= 0, got {tau}"),
            ));
        }
        let undetected = match flag {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::format(
                    path,
                    lineno,
                    format!("undetected flag must be 0 or 1, got `{other}`"),
                ))
            }
        };
        samples.push(DetectionSample { tau, undetected });
    }
    if samples.len() != n {
        return Err(Error::format(
            path,
            1,
            format!("header declares n={n} but file has {} samples", samples.len()),
        ));
    }
    Ok(samples)
}

/// Persists a fitted logistic detection function with its diagnostics.
pub fn write_detector_params(path: impl AsRef<Path>, fit: &LogisticFit) -> Result<()> {
    let text = format!(
        "{DETECTOR_MAGIC}\t{VERSION}\tkind=logistic\n\
         beta0\t{}\n\
         beta1\t{}\n\
         log_likelihood\t{}\n\
         iterations\t{}\n",
        fmt_exact(fit.beta0),
        fmt_exact(fit.beta1),
        fmt_exact(fit.log_likelihood),
        fit.iterations
    );
    fs::write(path, text)?;
    Ok(())
}

pub fn read_detector_params(path: impl AsRef<Path>) -> Result<LogisticFit> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty file"))?;
    let parts: Vec<&str> = header.split('\t').collect();
    check_header(&parts, DETECTOR_MAGIC, 3, path)?;
    let kind = header_value(parts[2], "kind", path, 1)?;
    if kind != "logistic" {
        return Err(Error::format(
            path,
            1,
            format!("unsupported detector kind `{kind}`"),
        ));
    }
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let (k, v) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(path, lineno, "expected `name<TAB>value`"))?;
        if fields.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::format(path, lineno, format!("duplicate field `{k}`")));
        }
    }
    let get = |k: &str| -> Result<String> {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| Error::format(path, 1, format!("missing field `{k}`")))
    };
    let beta0 = parse_float(&get("beta0")?, path, 1, "beta0")?;
    let beta1 = parse_float(&get("beta1")?, path, 1, "beta1")?;
    if !beta0.is_finite() || !beta1.is_finite() {
        return Err(Error::format(path, 1, "detector coefficients must be finite"));
    }
    let log_likelihood = parse_float(&get("log_likelihood")?, path, 1, "log_likelihood")?;
    let iter_str = get("iterations")?;
    let iterations: usize = iter_str
        .parse()
        .map_err(|_| Error::format(path, 1, format!("malformed iterations `{iter_str}`")))?;
    Ok(LogisticFit {
        beta0,
        beta1,
        log_likelihood,
        iterations,
    })
}

/// Writes a step curve (success rate or detection probability over tau)
/// as a `tau,value` CSV. The final point is repeated so step-style plots
/// close the last segment.
pub fn emit_curve(points: &[(f64, f64)], path: impl AsRef<Path>) -> Result<()> {
    for w in points.windows(2) {
        if w[0].0 >= w[1].0 {
            return Err(Error::invalid(format!(
                "curve breakpoints must be strictly ascending: {} then {}",
                w[0].0, w[1].0
            )));
        }
    }
    for &(tau, value) in points {
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::invalid(format!(
                "curve tau must be finite and >= 0, got {tau}"
            )));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid(format!(
                "curve value must be in [0, 1], got {value}"
            )));
        }
    }
    let mut text = String::from("tau,value\n");
    for &(tau, value) in points {
        let _ = writeln!(text, "{},{}", fmt_plot(tau), fmt_plot(value));
    }
    if let Some(&(tau, value)) = points.last() {
        let _ = writeln!(text, "{},{}", fmt_plot(tau), fmt_plot(value));
    }
    fs::write(path, text)?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes bootstrap bands as `metric,n,p05,p50,p95,excluded`, one row
/// per (model, subsample size); the metric column is `metric/model_id`.
pub fn write_bands(path: impl AsRef<Path>, bands: &[BootstrapBand]) -> Result<()> {
    let mut text = String::from("metric,n,p05,p50,p95,excluded\n");
    for band in bands {
        let name = csv_field(&format!("{}/{}", band.metric, band.model_id));
        for r in &band.rows {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{}",
                name,
                r.n,
                fmt_plot(r.p05),
                fmt_plot(r.p50),
                fmt_plot(r.p95),
                r.excluded
            );
        }
    }
    fs::write(path, text)?;
    Ok(())
}

/// Output syntax for [`emit_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Tsv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" => Ok(ReportFormat::Markdown),
            "tsv" => Ok(ReportFormat::Tsv),
            other => Err(Error::invalid(format!(
                "unknown report format `{other}` (expected markdown or tsv)"
            ))),
        }
    }
}

/// Renders the model comparison table. Columns are Model, Pdam, one
/// ASR column per label (ascending tau), MPS, and Risk when any row has
/// one. The best value per column is marked: bold in markdown, a `*`
/// suffix in TSV. Both formats print identical numbers.
pub fn emit_report(
    rows: &[SummaryRow],
    tau_labels: &[String],
    format: ReportFormat,
) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("report rows".into()));
    }
    for r in rows {
        if r.asrs.len() != tau_labels.len() {
            return Err(Error::SampleMismatch(format!(
                "row {} has {} success-rate values for {} tau labels",
                r.model_id,
                r.asrs.len(),
                tau_labels.len()
            )));
        }
    }
    let bests = column_bests(rows);
    let with_risk = rows.iter().any(|r| r.risk.is_some());

    let mut header = vec!["Model".to_string(), "Pdam".to_string()];
    header.extend(tau_labels.iter().map(|l| format!("ASR({l})")));
    header.push("MPS".to_string());
    if with_risk {
        header.push("Risk".to_string());
    }

    let mark = |cell: String, best: bool| -> String {
        match (format, best) {
            (_, false) => cell,
            (ReportFormat::Markdown, true) => format!("**{cell}**"),
            (ReportFormat::Tsv, true) => format!("{cell}*"),
        }
    };
    let body: Vec<Vec<String>> = rows
        .iter()
        .zip(&bests)
        .map(|(r, b)| {
            let mut cells = vec![
                r.model_id.clone(),
                mark(format!("{:.2}", r.pdam), b.pdam),
            ];
            cells.extend(
                r.asrs
                    .iter()
                    .zip(&b.asrs)
                    .map(|(v, &best)| mark(format!("{v:.2}"), best)),
            );
            cells.push(mark(
                r.mps.map_or_else(|| "-".to_string(), |v| format!("{v:.5}")),
                b.mps,
            ));
            if with_risk {
                cells.push(mark(
                    r.risk.map_or_else(|| "-".to_string(), |v| format!("{v:.2}")),
                    b.risk,
                ));
            }
            cells
        })
        .collect();

    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", " --- |".repeat(header.len()));
            for cells in body {
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
        }
        ReportFormat::Tsv => {
            let _ = writeln!(out, "{}", header.join("\t"));
            for cells in body {
                let _ = writeln!(out, "{}", cells.join("\t"));
            }
        }
    }
    Ok(out)
}
