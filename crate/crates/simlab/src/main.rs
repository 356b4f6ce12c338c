//! `simlab`: generate scenario data, estimate treatment-rule values, compare
//! models, and run the full Monte-Carlo study grid.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use itrval::krr::{Bandwidth, KrrFitter};
use itrval::propensity::{estimate_propensity_empirical, fit_multinomial_logistic, PropensityModel};
use itrval::simgen::{generate, ScenarioSpec};
use itrval::stats::{z_compare_with, Alternative};
use itrval::value::{value_cv, value_jackknife, ValueEstimate};
use itrval::zom::ZomFitter;

use simlab::config::ExperimentConfig;
use simlab::io::{
    load_dataset, load_estimate, save_dataset, ComparisonFile, EstimateFile, EstimateMetadata,
    ScenarioSidecar,
};
use simlab::study::run_study_to_dir;

#[derive(Parser)]
#[command(
    name = "simlab",
    version,
    about = "Treatment-rule value estimation and simulation studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from one of the four scenarios.
    Gen(GenArgs),
    /// Estimate the value of a learned treatment rule from a dataset CSV.
    Estimate(EstimateArgs),
    /// Compare two saved estimates with the two-sample Z-test.
    Compare(CompareArgs),
    /// Run the full Monte-Carlo study described by a JSON config.
    Study(StudyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Scenario id (1: circles, 2: steps, 3: lines, 4: parabolas).
    #[arg(long)]
    scenario: u8,
    /// Number of subjects.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV path; a JSON sidecar with the generator settings is
    /// written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Outcome noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    /// Covariates are uniform on (-half-width, half-width).
    #[arg(long, default_value_t = 2.0)]
    half_width: f64,
    /// Extra covariate dimensions that do not affect outcomes.
    #[arg(long, default_value_t = 1)]
    nuisance_dims: usize,
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset CSV with header x1,...,xp,a,y.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Number of treatment arms; inferred from the labels when omitted.
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long, value_enum, default_value_t = PropensityArg::Empirical)]
    propensity: PropensityArg,
    /// Gaussian kernel bandwidth: "auto" or a positive number.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    bandwidth: Bandwidth,
    #[arg(long, default_value_t = 0.01)]
    ridge: f64,
    /// Cross-validation folds (with --method cv).
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Cross-validation repeats (with --method cv).
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Seed for the cross-validation fold shuffle.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ridge penalty of the logistic propensity fit.
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Estimate JSON of the precision-medicine model.
    #[arg(long)]
    pmm: PathBuf,
    /// Estimate JSON of the zero-order model.
    #[arg(long)]
    zom: PathBuf,
    #[arg(long, value_enum, default_value_t = AlternativeArg::Greater)]
    alternative: AlternativeArg,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for all study artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Record failed replicates instead of aborting the study.
    #[arg(long)]
    skip_failed: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Jackknife,
    Cv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Krr,
    Zom,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PropensityArg {
    /// Known randomization: 1/K for every arm.
    Uniform,
    /// Per-arm sample frequencies.
    Empirical,
    /// Multinomial logistic regression on the covariates.
    Logistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlternativeArg {
    Greater,
    TwoSided,
}

fn parse_bandwidth(text: &str) -> Result<Bandwidth, String> {
    if text == "auto" {
        return Ok(Bandwidth::Auto);
    }
    match text.parse::<f64>() {
        Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
        _ => Err(format!("expected \"auto\" or a positive number, got `{text}`")),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(args) => gen(args),
        Command::Estimate(args) => estimate(args),
        Command::Compare(args) => compare(args),
        Command::Study(args) => study(args),
    }
}

fn gen(args: GenArgs) -> Result<()> {
    let spec = ScenarioSpec::new(args.scenario)
        .and_then(|s| s.with_half_width(args.half_width))
        .and_then(|s| s.with_noise_sd(args.noise_sd))
        .and_then(|s| s.with_nuisance_dims(args.nuisance_dims))
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let (data, _) = generate(&spec, args.n, args.seed);
    save_dataset(&args.out, &data)?;
    let sidecar_path = args.out.with_extension("json");
    let sidecar = ScenarioSidecar::new(&spec, args.n, args.seed);
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)?)
        .with_context(|| format!("cannot write {}", sidecar_path.display()))?;
    eprintln!(
        "wrote {} subjects to {} (sidecar {})",
        data.n(),
        args.out.display(),
        sidecar_path.display()
    );
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let data = load_dataset(&args.data, args.arms)?;
    let mut metadata = EstimateMetadata::default();

    let prop = match args.propensity {
        PropensityArg::Uniform => PropensityModel::KnownUniform { arms: data.arm_count() },
        PropensityArg::Empirical => estimate_propensity_empirical(&data)?,
        PropensityArg::Logistic => {
            let model = fit_multinomial_logistic(&data, args.l2, 500, 1e-6)?;
            if let PropensityModel::MultinomialLogistic { converged, .. } = &model {
                metadata.logistic_converged = Some(*converged);
            }
            model
        }
    };
    metadata.propensity = match args.propensity {
        PropensityArg::Uniform => "uniform",
        PropensityArg::Empirical => "empirical",
        PropensityArg::Logistic => "logistic",
    }
    .to_string();

    let run = |fitter: &dyn itrval::rule::RuleFitter| -> Result<ValueEstimate> {
        Ok(match args.method {
            MethodArg::Jackknife => value_jackknife(&data, fitter, &prop)?,
            MethodArg::Cv => {
                value_cv(&data, fitter, &prop, args.folds, args.repeats, args.seed)?
            }
        })
    };

    let estimate = match args.model {
        ModelArg::Krr => {
            let fitter = KrrFitter::new(args.bandwidth, args.ridge).resolved(&data)?;
            metadata.model = "krr".to_string();
            metadata.bandwidth = match fitter.bandwidth {
                Bandwidth::Fixed(h) => Some(h),
                Bandwidth::Auto => None,
            };
            metadata.ridge = Some(args.ridge);
            run(&fitter)?
        }
        ModelArg::Zom => {
            metadata.model = "zom".to_string();
            run(&ZomFitter { prop: prop.clone() })?
        }
    };
    if matches!(args.method, MethodArg::Cv) {
        metadata.folds = Some(args.folds);
        metadata.repeats = Some(args.repeats);
        metadata.cv_seed = Some(args.seed);
    }
    metadata.clip_events = estimate.clip_events;

    let file = EstimateFile::from_estimate(&estimate, metadata);
    emit_json(&file, args.out.as_deref())
}

fn compare(args: CompareArgs) -> Result<()> {
    let pmm = load_estimate(&args.pmm)?.to_estimate()?;
    let zom = load_estimate(&args.zom)?.to_estimate()?;
    let alternative = match args.alternative {
        AlternativeArg::Greater => Alternative::Greater,
        AlternativeArg::TwoSided => Alternative::TwoSided,
    };
    let result = z_compare_with(&pmm, &zom, alternative)?;
    let file = ComparisonFile {
        t_stat: result.t_stat,
        p_value: result.p_value,
        se_diff: result.se_diff,
        v_pmm: result.v_pmm,
        v_zom: result.v_zom,
        n: pmm.n,
        alternative: alternative.as_str().to_string(),
    };
    emit_json(&file, args.out.as_deref())
}

fn study(args: StudyArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config {}", args.config.display()))?;
    let config = ExperimentConfig::from_json(&text)?;
    let report = run_study_to_dir(&config, &args.out, args.jobs, args.skip_failed)?;
    eprintln!(
        "study finished: {} replicates, {} failures, artifacts in {}",
        report.records.len(),
        report.failures.len(),
        args.out.display()
    );
    println!("scenario,n,coverage,power,shapiro_p");
    for g in &report.groups {
        println!(
            "{},{},{:.3},{:.3},{}",
            g.scenario,
            g.n,
            g.coverage,
            g.power,
            g.shapiro.map_or_else(|| "-".to_string(), |(_, p)| format!("{p:.3}"))
        );
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&std::path::Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, json)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}
