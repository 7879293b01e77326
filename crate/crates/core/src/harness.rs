//! File formats and the commands behind the `subsphere` binary.
//!
//! Datasets are long-format CSV with header
//! `obs_id,group_j,coord_0,...,coord_m`, one row per point. JSON outputs
//! carry a `schema_version`; inputs with a different major version are
//! rejected.
//!
//! Exit codes: 0 success, 2 input error, 3 fit did not converge (best effort
//! written), 4 numerical degeneracy.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::asymptotics::{
    axis_confidence_region, axis_wald_test, corollary_blocks, estimate_asymptotics, AsymptoticEstimate,
    ConfidenceRegion, CorollaryBlocks, TestResult,
};
use crate::data::PolysphereSample;
use crate::error::Error;
use crate::fit::{fit, FitConfig, FitResult, Initializer};
use crate::loss::LossKind;
use crate::params::{SubsphereClass, SubsphereParams};
use crate::seed::RandomSeed;
use crate::summation::exact_mean;
use crate::synthetic::{generate, mc_study, GeneratorSpec, McConfig};
use crate::sphere::UnitVector;

pub const SCHEMA_VERSION: &str = "1.0";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

/// Unit-norm deviation tolerated (with a warning) when loading data.
pub const RENORMALIZE_LIMIT: f64 = 1e-6;
const RENORMALIZE_WARN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CommandError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CommandError {}

impl CommandError {
    pub fn input(message: impl Into<String>) -> Self {
        CommandError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CommandError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SingularHessian { .. }
            | Error::SingularCovariance
            | Error::NonSmooth { .. }
            | Error::PoleProjection
            | Error::CutLocus => EXIT_DEGENERATE,
            Error::DimensionMismatch { .. }
            | Error::InvalidInput(_)
            | Error::BaseMismatch
            | Error::OutsideChart
            | Error::TruncationInfeasible => EXIT_INPUT,
        };
        CommandError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CommandResult<T> = std::result::Result<T, CommandError>;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CommandError {
    CommandError::input(format!("{}: {e}", path.display()))
}

/// Parses a long-format dataset. Diagnostics name the offending line.
pub fn read_dataset<R: Read>(input: R) -> CommandResult<PolysphereSample> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| CommandError::input(format!("line 1: {e}")))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 4 || names[0] != "obs_id" || names[1] != "group_j" {
        return Err(CommandError::input(
            "line 1: header must be obs_id,group_j,coord_0,...,coord_m with m >= 1",
        ));
    }
    for (a, name) in names[2..].iter().enumerate() {
        if *name != format!("coord_{a}") {
            return Err(CommandError::input(format!("line 1: expected column coord_{a}, found {name}")));
        }
    }
    let dim = names.len() - 2;
    let mut points: BTreeMap<(usize, usize), UnitVector> = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| CommandError::input(format!("line {line}: {e}")))?;
        if record.len() != dim + 2 {
            return Err(CommandError::input(format!(
                "line {line}: expected {} fields, found {}",
                dim + 2,
                record.len()
            )));
        }
        let index = |k: usize| -> CommandResult<usize> {
            record[k]
                .parse()
                .map_err(|_| CommandError::input(format!("line {line}: {} is not an index: {:?}", names[k], &record[k])))
        };
        let (obs, group) = (index(0)?, index(1)?);
        let coords = (0..dim)
            .map(|a| {
                let v: f64 = record[a + 2]
                    .parse()
                    .map_err(|_| CommandError::input(format!("line {line}: coord_{a} is not a number: {:?}", &record[a + 2])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(CommandError::input(format!("line {line}: coord_{a} is not finite")))
                }
            })
            .collect::<CommandResult<Vec<f64>>>()?;
        let norm = coords.iter().map(|v| v * v).sum::<f64>().sqrt();
        let deviation = (norm - 1.0).abs();
        if deviation > RENORMALIZE_LIMIT {
            return Err(CommandError::input(format!("line {line}: point has norm {norm}, not a unit vector")));
        }
        if deviation > RENORMALIZE_WARN {
            log::warn!("line {line}: renormalizing point with norm {norm}");
        }
        let x = UnitVector::from_slice(&coords).map_err(|e| CommandError::input(format!("line {line}: {e}")))?;
        if points.insert((obs, group), x).is_some() {
            return Err(CommandError::input(format!("line {line}: duplicate point ({obs}, {group})")));
        }
    }
    if points.is_empty() {
        return Err(CommandError::input("dataset has no rows"));
    }
    let n = points.keys().map(|k| k.0).max().unwrap_or(0) + 1;
    let k = points.keys().map(|k| k.1).max().unwrap_or(0) + 1;
    if points.len() != n * k {
        let missing = (0..n)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .find(|key| !points.contains_key(key))
            .unwrap_or((0, 0));
        return Err(CommandError::input(format!(
            "dataset has {} rows but n = {n}, K = {k} needs {}; missing ({}, {})",
            points.len(),
            n * k,
            missing.0,
            missing.1
        )));
    }
    let mut observations = vec![Vec::with_capacity(k); n];
    for ((i, _), x) in points {
        observations[i].push(x);
    }
    Ok(PolysphereSample::new(observations)?)
}

pub fn read_dataset_file(path: &Path) -> CommandResult<PolysphereSample> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    read_dataset(file).map_err(|e| CommandError {
        message: format!("{}: {}", path.display(), e.message),
        ..e
    })
}

/// Writes a dataset with shortest round-trip float formatting, so the same
/// sample always produces the same bytes.
pub fn write_dataset<W: Write>(data: &PolysphereSample, out: W) -> CommandResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CommandError::input(format!("writing dataset: {e}"));
    let mut header = vec!["obs_id".to_string(), "group_j".to_string()];
    header.extend((0..=data.m()).map(|a| format!("coord_{a}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, obs) in data.observations().enumerate() {
        for (j, x) in obs.iter().enumerate() {
            let mut row = vec![i.to_string(), j.to_string()];
            row.extend(x.as_slice().iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CommandError::input(format!("writing dataset: {e}")))?;
    Ok(())
}

/// Serializes `value` with a `schema_version` field added at the top level.
pub fn to_versioned_json<T: Serialize>(value: &T) -> CommandResult<String> {
    let mut v = serde_json::to_value(value).map_err(|e| CommandError::input(e.to_string()))?;
    if let Value::Object(map) = &mut v {
        map.insert("schema_version".into(), Value::String(SCHEMA_VERSION.into()));
    }
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CommandError::input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses JSON whose optional `schema_version` must share our major version.
pub fn from_versioned_json<T: DeserializeOwned>(text: &str) -> CommandResult<T> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| CommandError::input(format!("invalid JSON: {e}")))?;
    if let Value::Object(map) = &mut v {
        if let Some(version) = map.remove("schema_version") {
            let version = version
                .as_str()
                .ok_or_else(|| CommandError::input("schema_version must be a string"))?
                .to_string();
            let major = |s: &str| s.split('.').next().unwrap_or("").to_string();
            if major(&version) != major(SCHEMA_VERSION) {
                return Err(CommandError::input(format!(
                    "unsupported schema_version {version} (expected {SCHEMA_VERSION})"
                )));
            }
        }
    }
    serde_json::from_value(v).map_err(|e| CommandError::input(format!("invalid document: {e}")))
}

fn read_text(path: &Path) -> CommandResult<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_text(path: &Path, text: &str) -> CommandResult<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    /// Mean squared residual per group.
    pub group_means: Vec<f64>,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub loss: LossKind,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    pub params: SubsphereClass,
    pub minimizer: SubsphereParams,
    pub objective: f64,
    pub residuals: ResidualSummary,
    pub converged: bool,
    pub iterations: usize,
    pub initializer: Initializer,
    pub gradient_norm: f64,
    pub a1_warnings: usize,
    pub non_unique: bool,
}

impl FitReport {
    pub fn new(data: &PolysphereSample, result: &FitResult) -> Self {
        let per_point = &result.objective.per_point;
        FitReport {
            loss: result.loss,
            m: data.m(),
            k: data.k(),
            n: data.n(),
            params: result.params.clone(),
            minimizer: result.minimizer.clone(),
            objective: result.objective.total,
            residuals: ResidualSummary {
                group_means: (0..data.k()).map(|j| exact_mean(per_point.column(j).iter().copied())).collect(),
                max: per_point.iter().fold(0.0, |a: f64, b| a.max(*b)),
            },
            converged: result.converged,
            iterations: result.iterations,
            initializer: result.initializer,
            gradient_norm: result.gradient_norm,
            a1_warnings: result.a1_warnings,
            non_unique: result.non_unique,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymReport {
    pub estimate: AsymptoticEstimate,
    pub region: ConfidenceRegion,
    pub blocks: CorollaryBlocks,
    pub test: Option<TestResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitArgs {
    pub input: PathBuf,
    pub loss: LossKind,
    pub restarts: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Fits a dataset and writes a [`FitReport`]. Returns [`EXIT_NONCONVERGED`]
/// when the best start did not meet the gradient tolerance.
pub fn cmd_fit(args: &FitArgs) -> CommandResult<i32> {
    let data = read_dataset_file(&args.input)?;
    let config = FitConfig {
        restarts: args.restarts,
        seed: RandomSeed(args.seed),
        ..FitConfig::new(args.loss)
    };
    let result = fit(&data, &config)?;
    let report = FitReport::new(&data, &result);
    write_text(&args.out, &to_versioned_json(&report)?)?;
    if result.a1_warnings > 0 {
        log::warn!("{} points within the A1 neighbourhood of the fitted axis", result.a1_warnings);
    }
    if result.converged {
        Ok(EXIT_OK)
    } else {
        log::warn!("fit did not converge; wrote best iterate (gradient norm {:e})", result.gradient_norm);
        Ok(EXIT_NONCONVERGED)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymArgs {
    pub input: PathBuf,
    pub fit: PathBuf,
    pub level: f64,
    pub test_axis: Option<Vec<f64>>,
    pub out: PathBuf,
}

pub fn parse_axis(text: &str) -> CommandResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CommandError::input(format!("axis component {s:?} is not a number")))
        })
        .collect()
}

pub fn cmd_asym(args: &AsymArgs) -> CommandResult<i32> {
    let data = read_dataset_file(&args.input)?;
    let report: FitReport = from_versioned_json(&read_text(&args.fit)?)?;
    let rep = report.params.representative();
    if rep.m() != data.m() || rep.k() != data.k() {
        return Err(CommandError::input(format!(
            "fit has m = {}, K = {} but dataset has m = {}, K = {}",
            rep.m(),
            rep.k(),
            data.m(),
            data.k()
        )));
    }
    let estimate = estimate_asymptotics(&data, &report.params, report.loss)?;
    let region = axis_confidence_region(&estimate, args.level)?;
    let test = match &args.test_axis {
        Some(axis) => {
            let c0 = UnitVector::from_slice(axis).map_err(|e| CommandError::input(format!("--test-axis: {e}")))?;
            Some(axis_wald_test(&estimate, &c0).map_err(|e| match e {
                Error::OutsideChart => CommandError::input("--test-axis lies outside the chart of the fitted axis"),
                other => other.into(),
            })?)
        }
        None => None,
    };
    let out = AsymReport {
        blocks: corollary_blocks(&estimate),
        estimate,
        region,
        test,
    };
    write_text(&args.out, &to_versioned_json(&out)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub spec: PathBuf,
    pub out: PathBuf,
    /// Also write the generator truth as JSON.
    pub truth_out: Option<PathBuf>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> CommandResult<i32> {
    let spec: GeneratorSpec = from_versioned_json(&read_text(&args.spec)?)?;
    let generated = generate(&spec)?;
    let file = File::create(&args.out).map_err(|e| io_error(&args.out, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(&generated.sample, &mut w)?;
    w.flush().map_err(|e| io_error(&args.out, e))?;
    if let Some(path) = &args.truth_out {
        write_text(path, &to_versioned_json(&generated.truth)?)?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    /// Per-replicate CSV.
    pub csv_out: Option<PathBuf>,
}

/// Runs a Monte Carlo study; returns the report tables for printing.
pub fn cmd_mc(args: &McArgs) -> CommandResult<String> {
    let config: McConfig = from_versioned_json(&read_text(&args.config)?)?;
    let report = mc_study(&config)?;
    write_text(&args.out, &to_versioned_json(&report)?)?;
    if let Some(path) = &args.csv_out {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        report.write_csv(BufWriter::new(file))?;
    }
    Ok(report.tables())
}
