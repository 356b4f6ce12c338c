//! The Monte-Carlo study runner.
//!
//! For every (scenario, sample size, replicate) cell the runner draws a
//! training set, fits the precision-medicine model (kernel ridge regression
//! Q-learning) and the best-fixed-arm model, computes jackknife value
//! estimates for both, scores the full-data rule on an independent test
//! draw, evaluates the Monte-Carlo ground truth of both fitted rules, and
//! forms the comparison and shifted test statistics. Replicates execute in
//! parallel; every random stream is derived from the master seed and the
//! cell indices, so output bytes are independent of scheduling.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use itrval::krr::KrrFitter;
use itrval::rule::RuleFitter;
use itrval::seed::derive_seed;
use itrval::simgen::{generate, ScenarioSpec};
use itrval::stats::{
    coverage, empirical_qq, normal_qq, power, shapiro_wilk, shifted_statistic, z_compare_with,
};
use itrval::value::{true_value_mc, value_cv, value_empirical, value_jackknife};
use itrval::zom::ZomFitter;

use crate::config::ExperimentConfig;
use crate::io::g17;

// Stream purposes hung off each replicate's seed.
const TRAIN: u64 = 1;
const TEST: u64 = 2;
const V0_PMM: u64 = 3;
const V0_ZOM: u64 = 4;
const CV_PMM: u64 = 5;
const CV_ZOM: u64 = 6;

/// Everything recorded about one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub scenario: u8,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub v_jk_pmm: f64,
    pub se_jk_pmm: f64,
    pub v_jk_zom: f64,
    pub se_jk_zom: f64,
    pub v_emp: Option<f64>,
    pub cv: Option<CvColumns>,
    pub v0_pmm: f64,
    pub v0_zom: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvColumns {
    pub v_cv_pmm: f64,
    pub se_cv_pmm: f64,
    pub v_cv_zom: f64,
    pub se_cv_zom: f64,
}

/// A replicate that failed, kept out of the aggregates under `--skip-failed`.
#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub scenario: u8,
    pub n: usize,
    pub replicate: usize,
    pub error: String,
}

/// Aggregates for one (scenario, n) cell.
#[derive(Debug, Clone)]
pub struct GroupSummary {
    pub scenario: u8,
    pub n: usize,
    pub replicates: usize,
    pub coverage: f64,
    pub power: f64,
    /// Shapiro-Wilk (W, p) of the shifted statistics; absent below 3
    /// replicates or for a degenerate sample.
    pub shapiro: Option<(f64, f64)>,
    pub t0_sample: Vec<f64>,
    pub v_jk_sample: Vec<f64>,
    pub v_emp_sample: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub records: Vec<ReplicateRecord>,
    pub groups: Vec<GroupSummary>,
    pub failures: Vec<FailureRecord>,
}

fn run_replicate(
    config: &ExperimentConfig,
    spec: &ScenarioSpec,
    scenario: u8,
    n: usize,
    replicate: usize,
) -> Result<ReplicateRecord> {
    let seed = derive_seed(config.seed, &[scenario as u64, n as u64, replicate as u64]);
    let (train, prop) = generate(spec, n, derive_seed(seed, &[TRAIN]));

    // Resolve the bandwidth once on the full training covariates so all
    // leave-one-out refits share the same kernel.
    let krr = KrrFitter::new(config.model.krr.bandwidth.to_bandwidth(), config.model.krr.ridge)
        .resolved(&train)
        .context("bandwidth resolution failed")?;
    let zom = ZomFitter { prop: prop.clone() };

    let est_pmm = value_jackknife(&train, &krr, &prop).context("jackknife for the PMM failed")?;
    let est_zom = value_jackknife(&train, &zom, &prop).context("jackknife for the ZOM failed")?;

    let v_emp = if config.estimators.empirical {
        let (test, _) = generate(spec, n, derive_seed(seed, &[TEST]));
        Some(
            value_empirical(&train, &test, &krr, &prop)
                .context("empirical estimator failed")?,
        )
    } else {
        None
    };

    let cv = match config.estimators.cv {
        Some(cv_config) => {
            let cv_pmm = value_cv(
                &train,
                &krr,
                &prop,
                cv_config.folds,
                cv_config.repeats,
                derive_seed(seed, &[CV_PMM]),
            )
            .context("cross-validation for the PMM failed")?;
            let cv_zom = value_cv(
                &train,
                &zom,
                &prop,
                cv_config.folds,
                cv_config.repeats,
                derive_seed(seed, &[CV_ZOM]),
            )
            .context("cross-validation for the ZOM failed")?;
            Some(CvColumns {
                v_cv_pmm: cv_pmm.value,
                se_cv_pmm: cv_pmm.std_error,
                v_cv_zom: cv_zom.value,
                se_cv_zom: cv_zom.std_error,
            })
        }
        None => None,
    };

    let rule_pmm = krr.fit(&train).context("full-data PMM fit failed")?;
    let rule_zom = zom.fit(&train).context("full-data ZOM fit failed")?;
    let v0_pmm = true_value_mc(&rule_pmm, spec, config.mc_draws, derive_seed(seed, &[V0_PMM]));
    let v0_zom = true_value_mc(&rule_zom, spec, config.mc_draws, derive_seed(seed, &[V0_ZOM]));

    let comparison = z_compare_with(&est_pmm, &est_zom, config.alternative.to_alternative())
        .context("model comparison failed")?;
    let t0 = shifted_statistic(&est_pmm, &est_zom, v0_pmm, v0_zom)
        .context("shifted statistic failed")?;

    Ok(ReplicateRecord {
        scenario,
        n,
        replicate,
        seed,
        v_jk_pmm: est_pmm.value,
        se_jk_pmm: est_pmm.std_error,
        v_jk_zom: est_zom.value,
        se_jk_zom: est_zom.std_error,
        v_emp,
        cv,
        v0_pmm,
        v0_zom,
        t_stat: comparison.t_stat,
        p_value: comparison.p_value,
        t0,
    })
}

/// Runs the whole study grid, aborting on the first failed replicate.
pub fn run_study(config: &ExperimentConfig) -> Result<StudyReport> {
    run_study_with(config, false)
}

/// Runs the whole study grid. With `skip_failed`, failed replicates are
/// recorded and left out of the aggregates instead of aborting the study.
pub fn run_study_with(config: &ExperimentConfig, skip_failed: bool) -> Result<StudyReport> {
    config.validate()?;
    let mut cells = Vec::new();
    for &scenario in &config.scenarios {
        let spec = config.scenario_spec(scenario)?;
        for &n in &config.sample_sizes {
            for replicate in 0..config.replicates {
                cells.push((spec, scenario, n, replicate));
            }
        }
    }

    // Parallel over cells; collect preserves index order, so the outcome is
    // independent of thread scheduling.
    let outcomes: Vec<Result<ReplicateRecord, FailureRecord>> = cells
        .par_iter()
        .map(|&(spec, scenario, n, replicate)| {
            run_replicate(config, &spec, scenario, n, replicate).map_err(|e| FailureRecord {
                scenario,
                n,
                replicate,
                error: format!("{e:#}"),
            })
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(record) => records.push(record),
            Err(failure) => {
                if !skip_failed {
                    bail!(
                        "replicate {} of scenario {}, n = {} failed: {}",
                        failure.replicate,
                        failure.scenario,
                        failure.n,
                        failure.error
                    );
                }
                failures.push(failure);
            }
        }
    }

    let groups = aggregate(config, &records)?;
    Ok(StudyReport { records, groups, failures })
}

fn aggregate(config: &ExperimentConfig, records: &[ReplicateRecord]) -> Result<Vec<GroupSummary>> {
    let mut groups = Vec::new();
    for &scenario in &config.scenarios {
        for &n in &config.sample_sizes {
            let cell: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| r.scenario == scenario && r.n == n)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let ci_records: Vec<(f64, f64, f64)> =
                cell.iter().map(|r| (r.v_jk_pmm, r.se_jk_pmm, r.v0_pmm)).collect();
            let p_values: Vec<f64> = cell.iter().map(|r| r.p_value).collect();
            let t0_sample: Vec<f64> = cell.iter().map(|r| r.t0).collect();
            let shapiro = if t0_sample.len() >= 3 {
                shapiro_wilk(&t0_sample).ok()
            } else {
                None
            };
            groups.push(GroupSummary {
                scenario,
                n,
                replicates: cell.len(),
                coverage: coverage(&ci_records, config.ci_level)?,
                power: power(&p_values, config.alpha)?,
                shapiro,
                t0_sample,
                v_jk_sample: cell.iter().map(|r| r.v_jk_pmm).collect(),
                v_emp_sample: cell.iter().filter_map(|r| r.v_emp).collect(),
            });
        }
    }
    Ok(groups)
}

fn replicates_csv(config: &ExperimentConfig, records: &[ReplicateRecord]) -> String {
    let mut out = String::from("scenario,n,replicate,seed,v_jk_pmm,se_jk_pmm,v_jk_zom,se_jk_zom");
    if config.estimators.empirical {
        out.push_str(",v_emp");
    }
    if config.estimators.cv.is_some() {
        out.push_str(",v_cv_pmm,se_cv_pmm,v_cv_zom,se_cv_zom");
    }
    out.push_str(",v0_pmm,v0_zom,t_stat,p_value,t0\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            r.scenario,
            r.n,
            r.replicate,
            r.seed,
            g17(r.v_jk_pmm),
            g17(r.se_jk_pmm),
            g17(r.v_jk_zom),
            g17(r.se_jk_zom)
        ));
        if config.estimators.empirical {
            out.push_str(&format!(",{}", g17(r.v_emp.unwrap_or(f64::NAN))));
        }
        if config.estimators.cv.is_some() {
            let cv = r.cv.expect("cv columns exist when the estimator is enabled");
            out.push_str(&format!(
                ",{},{},{},{}",
                g17(cv.v_cv_pmm),
                g17(cv.se_cv_pmm),
                g17(cv.v_cv_zom),
                g17(cv.se_cv_zom)
            ));
        }
        out.push_str(&format!(
            ",{},{},{},{},{}\n",
            g17(r.v0_pmm),
            g17(r.v0_zom),
            g17(r.t_stat),
            g17(r.p_value),
            g17(r.t0)
        ));
    }
    out
}

fn coverage_csv(groups: &[GroupSummary]) -> String {
    let mut out = String::from("scenario,n,replicates,coverage\n");
    for g in groups {
        out.push_str(&format!("{},{},{},{}\n", g.scenario, g.n, g.replicates, g17(g.coverage)));
    }
    out
}

fn power_csv(groups: &[GroupSummary]) -> String {
    let mut out = String::from("scenario,n,replicates,power\n");
    for g in groups {
        out.push_str(&format!("{},{},{},{}\n", g.scenario, g.n, g.replicates, g17(g.power)));
    }
    out
}

fn normality_csv(groups: &[GroupSummary]) -> String {
    let mut out = String::from("scenario,n,replicates,w,p_value\n");
    for g in groups {
        if let Some((w, p)) = g.shapiro {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                g.scenario,
                g.n,
                g.replicates,
                g17(w),
                g17(p)
            ));
        }
    }
    out
}

fn qq_csv(pairs: &[(f64, f64)]) -> String {
    let mut out = String::from("theoretical_quantile,sample_quantile\n");
    for (theoretical, sample) in pairs {
        out.push_str(&format!("{},{}\n", g17(*theoretical), g17(*sample)));
    }
    out
}

/// Writes sorted sample quantiles against a reference to a Q-Q CSV file.
pub fn emit_qq(path: &Path, pairs: &[(f64, f64)]) -> Result<()> {
    fs::write(path, qq_csv(pairs)).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a ExperimentConfig,
    version: &'static str,
    timestamp_unix_seconds: u64,
    failures: usize,
}

/// Writes every study artifact into `out_dir`: `replicates.csv`, the three
/// aggregate tables, the per-cell Q-Q data files, `metadata.json`, and
/// `failures.csv` when failures were skipped. Everything except the
/// timestamp inside `metadata.json` is a pure function of the config.
pub fn write_study(config: &ExperimentConfig, report: &StudyReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    fs::write(out_dir.join("replicates.csv"), replicates_csv(config, &report.records))?;
    fs::write(out_dir.join("coverage.csv"), coverage_csv(&report.groups))?;
    fs::write(out_dir.join("power.csv"), power_csv(&report.groups))?;
    fs::write(out_dir.join("normality.csv"), normality_csv(&report.groups))?;

    for g in &report.groups {
        if g.t0_sample.len() >= 2 {
            let pairs = normal_qq(&g.t0_sample)?;
            emit_qq(&out_dir.join(format!("qq_t0_s{}_n{}.csv", g.scenario, g.n)), &pairs)?;
        }
        if g.v_emp_sample.len() >= 2 && g.v_jk_sample.len() >= 2 {
            let pairs = empirical_qq(&g.v_jk_sample, &g.v_emp_sample)?;
            emit_qq(&out_dir.join(format!("qq_vjk_s{}_n{}.csv", g.scenario, g.n)), &pairs)?;
        }
    }

    if !report.failures.is_empty() {
        let mut out = String::from("scenario,n,replicate,error\n");
        for f in &report.failures {
            out.push_str(&format!(
                "{},{},{},{:?}\n",
                f.scenario, f.n, f.replicate, f.error
            ));
        }
        fs::write(out_dir.join("failures.csv"), out)?;
    }

    let metadata = Metadata {
        config,
        version: env!("CARGO_PKG_VERSION"),
        timestamp_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        failures: report.failures.len(),
    };
    fs::write(
        out_dir.join("metadata.json"),
        serde_json::to_string_pretty(&metadata)?,
    )?;
    Ok(())
}

/// Runs the study on a dedicated thread pool and writes all artifacts.
pub fn run_study_to_dir(
    config: &ExperimentConfig,
    out_dir: &Path,
    jobs: Option<usize>,
    skip_failed: bool,
) -> Result<StudyReport> {
    let report = match jobs {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .context("cannot build the worker pool")?
            .install(|| run_study_with(config, skip_failed)),
        None => run_study_with(config, skip_failed),
    }?;
    write_study(config, &report, out_dir)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "scenarios": [3],
                "sample_sizes": [24],
                "replicates": 4,
                "seed": 11,
                "mc_draws": 100000,
                "estimators": {"cv": {"folds": 4, "repeats": 2}}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn tiny_study_runs_and_aggregates() {
        let config = tiny_config();
        let report = run_study(&config).unwrap();
        assert_eq!(report.records.len(), 4);
        assert_eq!(report.groups.len(), 1);
        let g = &report.groups[0];
        assert_eq!((g.scenario, g.n, g.replicates), (3, 24, 4));
        assert!((0.0..=1.0).contains(&g.coverage));
        assert!((0.0..=1.0).contains(&g.power));
        assert_eq!(g.t0_sample.len(), 4);
        assert_eq!(g.v_emp_sample.len(), 4);
        for r in &report.records {
            assert!(r.v_jk_pmm.is_finite());
            assert!(r.se_jk_pmm > 0.0);
            assert!(r.cv.is_some());
            assert!(r.v_emp.is_some());
            assert!(r.p_value > 0.0 && r.p_value < 1.0);
        }
    }

    #[test]
    fn studies_are_reproducible() {
        let config = tiny_config();
        let a = run_study(&config).unwrap();
        let b = run_study(&config).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(replicates_csv(&config, &a.records), replicates_csv(&config, &b.records));
    }

    #[test]
    fn csv_column_count_tracks_config() {
        let config = tiny_config();
        let report = run_study(&config).unwrap();
        let text = replicates_csv(&config, &report.records);
        let header_cells = text.lines().next().unwrap().split(',').count();
        assert_eq!(header_cells, 18);
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').count(), header_cells);
        }
    }
}
