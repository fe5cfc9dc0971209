//! Command-line interface: `estimate`, `simulate`, and `dgm` subcommands
//! with a flat JSON config file whose keys mirror the long flags (flags win).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::data::{ingest_csv, write_csv, ColumnMapping};
use crate::engine::{
    estimate_effects, EstimateOptions, EstimatorKind, ScmVariant, TargetDiagnostics, VarianceSpec,
};
use crate::error::{Error, Result};
use crate::intervention::{read_policy_csv, write_policy_csv};
use crate::model::ModelSpec;
use crate::simlab::{
    generate_dgm, run_study, DgmSpec, ParameterFlavor, PctBiasMode, SpecArm, StudyConfig,
    StudyVariance,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "stochmed",
    about = "Stochastic-intervention mediation effects: estimation and simulation"
)]
pub struct Cli {
    /// Flat JSON config file; every key is overridable by the flag of the
    /// same name.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate direct and indirect effects from a CSV dataset.
    Estimate(EstimateArgs),
    /// Run an estimator-comparison simulation study.
    Simulate(SimulateArgs),
    /// Generate a synthetic dataset from the reference mechanism.
    Dgm(DgmArgs),
}

#[derive(Args, Debug, Default)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Column mapping, e.g. A=treat,Z=uptake,M=school,Y=use,W=w1+w2,sel=delta
    #[arg(long)]
    pub cols: Option<String>,
    /// tmle | iptw | ee | all
    #[arg(long)]
    pub estimator: Option<String>,
    /// iv | nonrandom-a | direct-ae
    #[arg(long)]
    pub variant: Option<String>,
    /// ic | bootstrap
    #[arg(long)]
    pub variance: Option<String>,
    /// fixed | data-dependent (reported in the output; fixed pairs with
    /// bootstrap variance)
    #[arg(long)]
    pub flavor: Option<String>,
    #[arg(long)]
    pub boot_reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub truncation: Option<f64>,
    /// Treatment level of interest (default 1).
    #[arg(long)]
    pub a: Option<u8>,
    /// Reference level a* (default 0).
    #[arg(long)]
    pub a_star: Option<u8>,
    /// Percentile bootstrap intervals instead of normal-approximation ones.
    #[arg(long)]
    pub percentile: bool,
    /// Externally supplied draw probabilities (single-column CSV, header
    /// g_star) for levels a and a*.
    #[arg(long)]
    pub policy_in_a: Option<PathBuf>,
    #[arg(long)]
    pub policy_in_astar: Option<PathBuf>,
    /// Write the fitted draw probabilities for levels a and a*.
    #[arg(long)]
    pub policy_out_a: Option<PathBuf>,
    #[arg(long)]
    pub policy_out_astar: Option<PathBuf>,
    /// Comma-separated model terms overriding the main-effects defaults,
    /// e.g. --outcome-terms M,Z,W1,W2,Z:W2
    #[arg(long, value_delimiter = ',')]
    pub outcome_terms: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub mediator_terms: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub confounder_terms: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub treatment_terms: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub baseline_terms: Option<Vec<String>>,
}

#[derive(Args, Debug, Default)]
pub struct SimulateArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    pub format: Option<String>,
    /// Sample sizes, comma separated (pre-selection draws per replicate).
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// correct | missy
    #[arg(long)]
    pub arm: Option<String>,
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub variance: Option<String>,
    #[arg(long)]
    pub flavor: Option<String>,
    #[arg(long)]
    pub boot_reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// mean-ratio | per-replicate
    #[arg(long)]
    pub pct_bias: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct DgmArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Pre-selection draw count.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicate index within the seed (default 0).
    #[arg(long)]
    pub replicate: Option<u64>,
}

/// Flat key-value config loaded from JSON.
#[derive(Debug, Default)]
pub struct FileConfig(BTreeMap<String, Value>);

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)?;
        let value: Value = serde_json::from_str(&text)?;
        let map = value
            .as_object()
            .ok_or_else(|| Error::Config("config file must be a flat JSON object".into()))?;
        Ok(FileConfig(map.clone().into_iter().collect()))
    }

    fn string(&self, key: &str) -> Option<String> {
        self.0.get(key).map(|v| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.parse_with(key, |v| v.as_u64())
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, |v| v.as_f64())
    }

    fn parse_with<T>(&self, key: &str, native: impl Fn(&Value) -> Option<T>) -> Result<Option<T>>
    where
        T: std::str::FromStr,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => {
                if let Some(n) = native(v) {
                    return Ok(Some(n));
                }
                if let Value::String(s) = v {
                    return s
                        .parse::<T>()
                        .map(Some)
                        .map_err(|_| Error::Config(format!("config key '{key}' has invalid value '{s}'")));
                }
                Err(Error::Config(format!("config key '{key}' has invalid value {v}")))
            }
        }
    }

    fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_u64()
                        .map(|u| u as usize)
                        .ok_or_else(|| Error::Config(format!("config key '{key}' must list integers")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(Value::String(s)) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("config key '{key}' has invalid entry '{p}'")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(other) => Err(Error::Config(format!("config key '{key}' has invalid value {other}"))),
        }
    }
}

fn parse_estimators(text: &str) -> Result<Vec<EstimatorKind>> {
    match text {
        "all" => Ok(EstimatorKind::all()),
        other => other
            .split('+')
            .map(|p| match p.trim() {
                "tmle" => Ok(EstimatorKind::Tmle),
                "iptw" => Ok(EstimatorKind::Iptw),
                "ee" => Ok(EstimatorKind::Ee),
                bad => Err(Error::Config(format!("unknown estimator '{bad}'"))),
            })
            .collect(),
    }
}

fn parse_variant(text: &str) -> Result<ScmVariant> {
    match text {
        "iv" => Ok(ScmVariant::Iv),
        "nonrandom-a" => Ok(ScmVariant::NonrandomA),
        "direct-ae" => Ok(ScmVariant::DirectAe),
        bad => Err(Error::Config(format!("unknown variant '{bad}'"))),
    }
}

fn parse_flavor(text: &str) -> Result<ParameterFlavor> {
    match text {
        "fixed" => Ok(ParameterFlavor::Fixed),
        "data-dependent" => Ok(ParameterFlavor::DataDependent),
        bad => Err(Error::Config(format!("unknown flavor '{bad}'"))),
    }
}

fn parse_arm(text: &str) -> Result<SpecArm> {
    match text {
        "correct" => Ok(SpecArm::Correct),
        "missy" => Ok(SpecArm::YOnZOnly),
        "missm" => Ok(SpecArm::MediatorZOnly),
        bad => Err(Error::Config(format!("unknown arm '{bad}'"))),
    }
}

fn parse_cols(text: &str) -> Result<ColumnMapping> {
    let mut mapping = ColumnMapping::default();
    let mut w_set = false;
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("bad --cols entry '{part}'")))?;
        let value = value.trim();
        match key.trim() {
            "A" => mapping.a = value.into(),
            "Z" => mapping.z = value.into(),
            "M" => mapping.m = value.into(),
            "Y" => mapping.y = value.into(),
            "W" => {
                mapping.w = value
                    .split('+')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                w_set = true;
            }
            "sel" => {
                mapping.selection = (!value.is_empty()).then(|| value.to_string());
            }
            bad => return Err(Error::Config(format!("unknown --cols key '{bad}'"))),
        }
    }
    if w_set && mapping.w.is_empty() {
        return Err(Error::Config("--cols W= lists no covariates".into()));
    }
    Ok(mapping)
}

fn parse_terms(list: &[String]) -> Result<Vec<crate::model::Term>> {
    list.iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| crate::model::Term::parse(s))
        .collect()
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    schema_version: u32,
    command: &'static str,
    variant: &'a str,
    flavor: &'a str,
    n: usize,
    a: u8,
    a_star: u8,
    seed: u64,
    truncation: f64,
    estimates: &'a [crate::engine::EffectEstimate],
    diagnostics: DiagnosticsOutput<'a>,
}

#[derive(Serialize)]
struct DiagnosticsOutput<'a> {
    targets: &'a [TargetDiagnostics],
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap_replicates: Option<usize>,
    bootstrap_failures: usize,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    #[serde(flatten)]
    report: &'a crate::simlab::SimulationReport,
}

#[derive(Serialize)]
struct ErrorOutput {
    error: ErrorBody,
}

#[derive(Serialize)]
struct ErrorBody {
    message: String,
    exit_code: i32,
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run_estimate(args: &EstimateArgs, cfg: &FileConfig) -> Result<()> {
    let input = args
        .input
        .clone()
        .or_else(|| cfg.string("input").map(PathBuf::from))
        .ok_or_else(|| Error::Config("estimate requires --input".into()))?;
    let cols_text = args.cols.clone().or_else(|| cfg.string("cols"));
    let mapping = match cols_text {
        Some(t) => parse_cols(&t)?,
        None => ColumnMapping::default(),
    };
    let estimators = parse_estimators(
        &args
            .estimator
            .clone()
            .or_else(|| cfg.string("estimator"))
            .unwrap_or_else(|| "all".into()),
    )?;
    let variant = parse_variant(
        &args
            .variant
            .clone()
            .or_else(|| cfg.string("variant"))
            .unwrap_or_else(|| "iv".into()),
    )?;
    let flavor = parse_flavor(
        &args
            .flavor
            .clone()
            .or_else(|| cfg.string("flavor"))
            .unwrap_or_else(|| "data-dependent".into()),
    )?;
    let variance_text = args
        .variance
        .clone()
        .or_else(|| cfg.string("variance"))
        .unwrap_or_else(|| match flavor {
            ParameterFlavor::Fixed => "bootstrap".into(),
            ParameterFlavor::DataDependent => "ic".into(),
        });
    let seed = args.seed.or(cfg.u64("seed")?).unwrap_or(1);
    let boot_reps = args.boot_reps.or(cfg.usize("boot_reps")?).unwrap_or(500);
    let truncation = args.truncation.or(cfg.f64("truncation")?);
    if let Some(tau) = truncation {
        if !(tau > 0.0 && tau <= 0.1) {
            return Err(Error::Config(format!("truncation {tau} outside (0, 0.1]")));
        }
    }
    let a = args.a.or(cfg.u64("a")?.map(|v| v as u8)).unwrap_or(1);
    let a_star = args.a_star.or(cfg.u64("a_star")?.map(|v| v as u8)).unwrap_or(0);
    let percentile = args.percentile || cfg.string("percentile").as_deref() == Some("true");

    let variance = match variance_text.as_str() {
        "ic" => VarianceSpec::Ic,
        "bootstrap" => {
            if boot_reps < 2 {
                return Err(Error::Config("boot_reps must be at least 2".into()));
            }
            VarianceSpec::Bootstrap {
                reps: boot_reps,
                seed,
                percentile,
            }
        }
        bad => return Err(Error::Config(format!("unknown variance method '{bad}'"))),
    };

    let data = ingest_csv(&input, &mapping)?;
    if !data.y_is_binary() {
        eprintln!("note: continuous outcome detected; estimates use a range-bounded scale internally");
    }

    let mut spec = ModelSpec {
        truncation,
        ..ModelSpec::main_effects()
    };
    if let Some(t) = &args.outcome_terms {
        spec.outcome = Some(parse_terms(t)?);
    }
    if let Some(t) = &args.mediator_terms {
        spec.mediator = Some(parse_terms(t)?);
    }
    if let Some(t) = &args.confounder_terms {
        spec.confounder = Some(parse_terms(t)?);
    }
    if let Some(t) = &args.treatment_terms {
        spec.treatment = Some(parse_terms(t)?);
    }
    if let Some(t) = &args.baseline_terms {
        spec.baseline = Some(parse_terms(t)?);
    }

    let mut external_policies = [None, None];
    for (path, level) in [
        (args.policy_in_a.as_ref(), a),
        (args.policy_in_astar.as_ref(), a_star),
    ] {
        if let Some(p) = path {
            external_policies[level as usize] = Some(read_policy_csv(p, level)?);
        }
    }

    let opts = EstimateOptions {
        estimators,
        variance,
        a,
        a_star,
        spec,
        external_policies,
    };
    let report = estimate_effects(&data, variant, &opts)?;

    for (path, level) in [
        (args.policy_out_a.as_ref(), a),
        (args.policy_out_astar.as_ref(), a_star),
    ] {
        if let Some(p) = path {
            match &report.policies[level as usize] {
                Some(fitted) => write_policy_csv(&fitted.policy, p)?,
                None => {
                    return Err(Error::Config(format!(
                        "no fitted policy for level {level} to write (externally supplied?)"
                    )))
                }
            }
        }
    }

    let out = EstimateOutput {
        schema_version: SCHEMA_VERSION,
        command: "estimate",
        variant: variant.as_str(),
        flavor: flavor.as_str(),
        n: report.n,
        a,
        a_star,
        seed,
        truncation: opts.spec.truncation(),
        estimates: &report.estimates,
        diagnostics: DiagnosticsOutput {
            targets: &report.diagnostics,
            bootstrap_replicates: report.bootstrap_replicates,
            bootstrap_failures: report.bootstrap_failures,
        },
    };
    let output = args
        .output
        .clone()
        .or_else(|| cfg.string("output").map(PathBuf::from));
    emit(output.as_deref(), &serde_json::to_string_pretty(&out)?)?;
    Ok(())
}

fn run_simulate(args: &SimulateArgs, cfg: &FileConfig) -> Result<()> {
    let ns = args
        .n
        .clone()
        .or(cfg.usize_list("n")?)
        .unwrap_or_else(|| vec![5000]);
    if ns.is_empty() {
        return Err(Error::Config("simulate requires at least one sample size".into()));
    }
    let reps = args.reps.or(cfg.usize("reps")?).unwrap_or(1000);
    let arm = parse_arm(
        &args
            .arm
            .clone()
            .or_else(|| cfg.string("arm"))
            .unwrap_or_else(|| "correct".into()),
    )?;
    let estimators = parse_estimators(
        &args
            .estimator
            .clone()
            .or_else(|| cfg.string("estimator"))
            .unwrap_or_else(|| "all".into()),
    )?;
    let variant = parse_variant(
        &args
            .variant
            .clone()
            .or_else(|| cfg.string("variant"))
            .unwrap_or_else(|| "iv".into()),
    )?;
    let flavor = parse_flavor(
        &args
            .flavor
            .clone()
            .or_else(|| cfg.string("flavor"))
            .unwrap_or_else(|| "data-dependent".into()),
    )?;
    let variance_text = args
        .variance
        .clone()
        .or_else(|| cfg.string("variance"))
        .unwrap_or_else(|| match flavor {
            ParameterFlavor::Fixed => "bootstrap".into(),
            ParameterFlavor::DataDependent => "ic".into(),
        });
    let boot_reps = args.boot_reps.or(cfg.usize("boot_reps")?).unwrap_or(500);
    let variance = match variance_text.as_str() {
        "ic" => StudyVariance::Ic,
        "bootstrap" => StudyVariance::Bootstrap { reps: boot_reps },
        bad => return Err(Error::Config(format!("unknown variance method '{bad}'"))),
    };
    let seed = args.seed.or(cfg.u64("seed")?).unwrap_or(1);
    let pct_bias = match args
        .pct_bias
        .clone()
        .or_else(|| cfg.string("pct_bias"))
        .unwrap_or_else(|| "mean-ratio".into())
        .as_str()
    {
        "mean-ratio" => PctBiasMode::MeanRatio,
        "per-replicate" => PctBiasMode::PerReplicate,
        bad => return Err(Error::Config(format!("unknown pct-bias mode '{bad}'"))),
    };
    let format = args
        .format
        .clone()
        .or_else(|| cfg.string("format"))
        .unwrap_or_else(|| "csv".into());

    let coefficients = match variant {
        ScmVariant::Iv => crate::simlab::DgmCoefficients::reference(),
        ScmVariant::NonrandomA => crate::simlab::DgmCoefficients::reference_nonrandom_treatment(),
        ScmVariant::DirectAe => crate::simlab::DgmCoefficients::reference_direct_effects(),
    };
    let study = StudyConfig {
        dgm: DgmSpec {
            coefficients,
            arm,
            sample_size: ns[0],
            replicates: reps,
            seed,
        },
        sample_sizes: ns,
        estimators,
        variant,
        variance,
        flavor,
        pct_bias,
    };
    let report = run_study(&study)?;

    let text = match format.as_str() {
        "csv" => report.to_csv(),
        "json" => serde_json::to_string_pretty(&SimulateOutput {
            schema_version: SCHEMA_VERSION,
            command: "simulate",
            seed,
            report: &report,
        })?,
        bad => return Err(Error::Config(format!("unknown format '{bad}'"))),
    };
    emit(args.output.as_deref(), &text)?;
    Ok(())
}

fn run_dgm(args: &DgmArgs, cfg: &FileConfig) -> Result<()> {
    let n = args.n.or(cfg.usize("n")?).unwrap_or(5000);
    let seed = args.seed.or(cfg.u64("seed")?).unwrap_or(1);
    let replicate = args.replicate.or(cfg.u64("replicate")?).unwrap_or(0);
    let output = args
        .output
        .clone()
        .or_else(|| cfg.string("output").map(PathBuf::from))
        .ok_or_else(|| Error::Config("dgm requires --output".into()))?;
    let spec = DgmSpec::reference(n, 1, seed);
    let data = generate_dgm(&spec, replicate);
    write_csv(&data, &output)?;
    Ok(())
}

fn classify(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("STOCHMED_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
    let cfg = match FileConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let result = match &cli.command {
        Command::Estimate(args) => run_estimate(args, &cfg),
        Command::Simulate(args) => run_simulate(args, &cfg),
        Command::Dgm(args) => run_dgm(args, &cfg),
    };
    match result {
        Ok(()) => 0,
        Err(e) => fail(&e),
    }
}

fn fail(err: &Error) -> i32 {
    let code = classify(err);
    let body = ErrorOutput {
        error: ErrorBody {
            message: err.to_string(),
            exit_code: code,
        },
    };
    eprintln!("{}", serde_json::to_string(&body).unwrap_or_else(|_| err.to_string()));
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cols_parsing() {
        let m = parse_cols("A=treat,Z=uptake,M=school,Y=use,W=w1+w2+w3,sel=delta").unwrap();
        assert_eq!(m.a, "treat");
        assert_eq!(m.w, vec!["w1", "w2", "w3"]);
        assert_eq!(m.selection.as_deref(), Some("delta"));
        let m = parse_cols("sel=").unwrap();
        assert!(m.selection.is_none());
        assert!(parse_cols("Q=x").is_err());
        assert!(parse_cols("A").is_err());
    }

    #[test]
    fn estimator_list_parsing() {
        assert_eq!(parse_estimators("all").unwrap().len(), 3);
        assert_eq!(
            parse_estimators("tmle+ee").unwrap(),
            vec![EstimatorKind::Tmle, EstimatorKind::Ee]
        );
        assert!(parse_estimators("bogus").is_err());
    }
}
