//! Loading run output trees and observed data, assembling a [`Report`] and
//! writing it under `<out>/reports/`.
//!
//! Files written:
//!
//! * `marginals.csv`: dimension, category, observed, simulated, range_min,
//!   range_max, difference (shares in [0, 1]; observed and difference are
//!   empty without observed data)
//! * `household_types.csv`: year, household_type, mean, sd, min, max
//!   (household counts over runs)
//! * `household_size_fit.csv`: bin, target, simulated, sd,
//!   relative_difference, rmse (rmse over every year against that year's
//!   target)
//! * `alignment.csv`: bin, unallocated, existing, target,
//!   relative_difference_before, after, relative_difference_after
//! * `alignment_trace.csv`: iteration, bin, surplus, relative_difference,
//!   option
//! * `summary.md`: the same numbers as markdown tables
//!
//! Every number is printed with six significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{
    category_mismatch, compare, fmt_sig, marginal_shares, rmse, summarize, ComparisonRow,
    HouseholdType, MarginalTable, ReportDimension,
};
use crate::alignment::{AlignmentOutcome, AlignmentProblem, TraceRow};
use crate::csvutil::read_rows;
use crate::error::{Error, Result};
use crate::population::snapshot::read_snapshot;
use crate::population::Population;

/// The per-year snapshots and metrics of one run directory.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub label: String,
    pub years: BTreeMap<i32, Population>,
    pub metrics: BTreeMap<i32, BTreeMap<String, f64>>,
}

#[derive(Deserialize)]
struct MetricRow {
    metric: String,
    value: f64,
}

/// Reads every `year_<y>` directory of a run.
pub fn load_run(dir: &Path) -> Result<RunOutput> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut run = RunOutput {
        label: dir.file_name().map_or_else(
            || dir.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        ),
        ..RunOutput::default()
    };
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(year) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("year_"))
            .and_then(|y| y.parse::<i32>().ok())
        else {
            continue;
        };
        if !path.is_dir() {
            continue;
        }
        run.years.insert(year, read_snapshot(&path)?);
        let metrics = path.join("metrics.csv");
        if metrics.exists() {
            let rows: Vec<MetricRow> = read_rows(&metrics)?;
            run.metrics.insert(
                year,
                rows.into_iter().map(|r| (r.metric, r.value)).collect(),
            );
        }
    }
    if run.years.is_empty() {
        return Err(Error::config(format!(
            "{}: no year_<y> directories",
            dir.display()
        )));
    }
    Ok(run)
}

/// Observed marginal tables by dimension.
#[derive(Debug, Clone, Default)]
pub struct Observed {
    pub tables: BTreeMap<ReportDimension, MarginalTable>,
}

#[derive(Deserialize)]
struct CountRow {
    category: String,
    count: u64,
}

/// Observed data from a directory holding a snapshot (`persons.csv`,
/// `households.csv`), per-dimension tables `<dimension>.csv` with columns
/// `category, count`, or both. Tables take precedence over the snapshot.
pub fn load_observed(dir: &Path) -> Result<Observed> {
    let mut observed = Observed::default();
    if dir.join("persons.csv").exists() {
        let pop = read_snapshot(dir)?;
        for d in ReportDimension::ALL {
            observed.tables.insert(d, marginal_shares(&pop, d));
        }
    }
    for d in ReportDimension::ALL {
        let path = dir.join(format!("{}.csv", d.code()));
        if path.exists() {
            let rows: Vec<CountRow> = read_rows(&path)?;
            let counts = rows.into_iter().map(|r| (r.category, r.count)).collect();
            observed
                .tables
                .insert(d, MarginalTable::from_counts(d, counts));
        }
    }
    if observed.tables.is_empty() {
        return Err(Error::config(format!(
            "{}: no snapshot or dimension tables found",
            dir.display()
        )));
    }
    Ok(observed)
}

/// Mean, sample SD and range of one quantity over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub year: i32,
    pub category: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl SeriesRow {
    fn of(year: i32, category: String, values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        SeriesRow {
            year,
            category,
            mean,
            sd,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeFitRow {
    pub bin: String,
    pub target: f64,
    pub mean: f64,
    pub sd: f64,
    /// `(mean - target) / target`, against one when the target is zero.
    pub relative_difference: f64,
    /// Over every year, of the mean count against that year's target.
    pub rmse: f64,
}

/// A solved standalone alignment problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub unallocated: Vec<u64>,
    pub existing: Vec<u64>,
    pub target: Vec<u64>,
    pub after: Vec<u64>,
    pub relative_before: Vec<f64>,
    pub relative_after: Vec<f64>,
    pub score_before: f64,
    pub score_after: f64,
    pub trace: Vec<TraceRow>,
}

impl AlignmentReport {
    pub fn new(problem: &AlignmentProblem, outcome: &AlignmentOutcome) -> Result<Self> {
        Ok(AlignmentReport {
            unallocated: problem.unallocated.clone(),
            existing: outcome.bins_before.clone(),
            target: problem.target.clone(),
            after: outcome.bins_after.clone(),
            relative_before: outcome.relative_before(&problem.target),
            relative_after: outcome.relative_after(&problem.target),
            score_before: outcome.log.score_before()?,
            score_after: outcome.log.score_after()?,
            trace: outcome.log.trace_rows(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    /// Year whose snapshots are compared; defaults to the latest year
    /// every run has.
    pub year: Option<i32>,
    /// Treat categories missing from a table as zero instead of failing.
    pub lenient: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub n_runs: usize,
    pub year: Option<i32>,
    pub marginals: Vec<(ReportDimension, Vec<ComparisonRow>)>,
    pub household_types: Vec<SeriesRow>,
    pub size_fit: Vec<SizeFitRow>,
    pub alignment: Option<AlignmentReport>,
}

fn common_years(runs: &[RunOutput]) -> Vec<i32> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    first
        .years
        .keys()
        .copied()
        .filter(|y| runs.iter().all(|r| r.years.contains_key(y)))
        .collect()
}

fn bin_label(k: usize, n: usize) -> String {
    if k == n {
        format!("{k}+")
    } else {
        k.to_string()
    }
}

fn size_fit(runs: &[RunOutput], years: &[i32], year: i32) -> Result<Vec<SizeFitRow>> {
    let metric = |r: &RunOutput, y: i32, name: &str| -> Option<f64> {
        r.metrics.get(&y).and_then(|m| m.get(name)).copied()
    };
    let years: Vec<i32> = years
        .iter()
        .copied()
        .filter(|&y| runs.iter().all(|r| r.metrics.contains_key(&y)))
        .collect();
    if !years.contains(&year) {
        return Ok(Vec::new());
    }
    let n_bins = (1..)
        .take_while(|k| metric(&runs[0], year, &format!("bin_{k}_count")).is_some())
        .count();
    let mut rows = Vec::new();
    for k in 1..=n_bins {
        let count = format!("bin_{k}_count");
        let target = format!("bin_{k}_target");
        let get = |r: &RunOutput, y: i32, name: &str| {
            metric(r, y, name)
                .ok_or_else(|| Error::config(format!("{}: year {y} lacks metric {name}", r.label)))
        };
        let mut sim_series = Vec::new();
        let mut target_series = Vec::new();
        for &y in &years {
            let mut sum = 0.0;
            for r in runs {
                sum += get(r, y, &count)?;
            }
            sim_series.push(sum / runs.len() as f64);
            target_series.push(get(&runs[0], y, &target)?);
        }
        let values: Vec<f64> = runs
            .iter()
            .map(|r| get(r, year, &count))
            .collect::<Result<_>>()?;
        let s = SeriesRow::of(year, String::new(), &values);
        let t = get(&runs[0], year, &target)?;
        rows.push(SizeFitRow {
            bin: bin_label(k, n_bins),
            target: t,
            mean: s.mean,
            sd: s.sd,
            relative_difference: (s.mean - t) / t.max(1.0),
            rmse: rmse(&sim_series, &target_series)?,
        });
    }
    Ok(rows)
}

impl Report {
    /// Compares the runs against `observed` (when given) at the chosen
    /// year. Mismatched category sets are a config error unless
    /// `opts.lenient`.
    pub fn build(
        runs: &[RunOutput],
        observed: Option<&Observed>,
        alignment: Option<AlignmentReport>,
        opts: &ReportOptions,
    ) -> Result<Report> {
        let years = common_years(runs);
        let year = match (opts.year, years.last()) {
            (_, None) => None,
            (Some(y), _) if !years.contains(&y) => {
                return Err(Error::config(format!(
                    "year {y} is not present in every run"
                )))
            }
            (Some(y), _) => Some(y),
            (None, Some(&y)) => Some(y),
        };
        let mut report = Report {
            n_runs: runs.len(),
            year,
            alignment,
            ..Report::default()
        };
        let Some(year) = year else {
            return Ok(report);
        };

        for d in ReportDimension::ALL {
            let sims: Vec<MarginalTable> = runs
                .iter()
                .map(|r| marginal_shares(&r.years[&year], d))
                .collect();
            let rows = match observed.and_then(|o| o.tables.get(&d)) {
                Some(obs) => {
                    let mismatch = category_mismatch(&sims, obs);
                    if !mismatch.is_empty() && !opts.lenient {
                        return Err(Error::config(format!(
                            "{d}: categories not shared by observed and simulated tables: {}",
                            mismatch.join(", ")
                        )));
                    }
                    compare(&sims, obs)
                }
                None => summarize(&sims),
            };
            report.marginals.push((d, rows));
        }

        for &y in &years {
            let tables: Vec<MarginalTable> = runs
                .iter()
                .map(|r| marginal_shares(&r.years[&y], ReportDimension::HouseholdType))
                .collect();
            for t in HouseholdType::ALL {
                let values: Vec<f64> = tables
                    .iter()
                    .map(|tab| {
                        tab.rows
                            .iter()
                            .find(|r| r.category == t.code())
                            .map_or(0.0, |r| r.count as f64)
                    })
                    .collect();
                report
                    .household_types
                    .push(SeriesRow::of(y, t.code().to_string(), &values));
            }
        }
        report.size_fit = size_fit(runs, &years, year)?;
        Ok(report)
    }
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: Vec<[String; N]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt_sig(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

fn pct(x: f64) -> String {
    fmt_sig(100.0 * x)
}

fn md_table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

/// The before/after table of a solved alignment problem, with its score.
pub fn render_alignment_markdown(a: &AlignmentReport) -> String {
    let mut md = String::new();
    md.push_str("## Household size alignment\n\n");
    let n = a.target.len();
    let mut header = vec![String::new()];
    header.extend((1..=n).map(|k| bin_label(k, n)));
    let ints = |label: &str, v: &[u64]| {
        std::iter::once(label.to_string())
            .chain(v.iter().map(|x| x.to_string()))
            .collect::<Vec<_>>()
    };
    let pcts = |label: &str, v: &[f64]| {
        std::iter::once(label.to_string())
            .chain(v.iter().map(|x| pct(*x)))
            .collect::<Vec<_>>()
    };
    md_table(
        &mut md,
        &header,
        &[
            ints("Unallocated households", &a.unallocated),
            ints("Existing households", &a.existing),
            ints("Target", &a.target),
            pcts("Relative difference before (%)", &a.relative_before),
            ints("After alignment", &a.after),
            pcts("Relative difference after (%)", &a.relative_after),
        ],
    );
    let _ = writeln!(
        md,
        "Score (sample SD of relative differences): {} before, {} after.\n",
        fmt_sig(a.score_before),
        fmt_sig(a.score_after)
    );
    md
}

/// Markdown rendering of the report.
pub fn render_markdown(report: &Report) -> String {
    let mut md = String::from("# Simulation report\n\n");
    let _ = writeln!(
        md,
        "Runs: {}. Compared year: {}.\n",
        report.n_runs,
        report.year.map_or("none".to_string(), |y| y.to_string())
    );

    if let Some(a) = &report.alignment {
        md.push_str(&render_alignment_markdown(a));
    }

    md.push_str("## Household size distribution\n\n");
    md_table(
        &mut md,
        &[
            "Size".into(),
            "Target".into(),
            "Simulated mean (SD)".into(),
            "Relative difference (%)".into(),
            "RMSE over years".into(),
        ],
        &report
            .size_fit
            .iter()
            .map(|r| {
                vec![
                    r.bin.clone(),
                    fmt_sig(r.target),
                    format!("{} ({})", fmt_sig(r.mean), fmt_sig(r.sd)),
                    pct(r.relative_difference),
                    fmt_sig(r.rmse),
                ]
            })
            .collect::<Vec<_>>(),
    );

    md.push_str("## Marginal distributions\n\n");
    for (d, rows) in &report.marginals {
        let _ = writeln!(md, "### {d}\n");
        md_table(
            &mut md,
            &[
                "Category".into(),
                "Observed (%)".into(),
                "Simulated (%)".into(),
                "Range (%)".into(),
                "Difference (%)".into(),
            ],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.category.clone(),
                        r.observed.map(pct).unwrap_or_default(),
                        pct(r.mean),
                        format!("{} - {}", pct(r.min), pct(r.max)),
                        r.difference.map(pct).unwrap_or_default(),
                    ]
                })
                .collect::<Vec<_>>(),
        );
    }

    md.push_str("## Household types\n\n");
    let mut header = vec!["Year".to_string()];
    header.extend(HouseholdType::ALL.map(|t| format!("{t} mean (SD)")));
    let mut by_year: BTreeMap<i32, Vec<String>> = BTreeMap::new();
    for r in &report.household_types {
        by_year
            .entry(r.year)
            .or_default()
            .push(format!("{} ({})", fmt_sig(r.mean), fmt_sig(r.sd)));
    }
    let rows: Vec<Vec<String>> = by_year
        .into_iter()
        .map(|(y, cells)| std::iter::once(y.to_string()).chain(cells).collect())
        .collect();
    md_table(&mut md, &header, &rows);

    md.push_str(
        "Notes:\n\n\
         - Range is the minimum to maximum simulated share over runs.\n\
         - Household types are this engine's own definition: lone person is a one-member \
         household; family has at least one partner or parent-child link between members; \
         group is every other household.\n",
    );
    md
}

/// Writes `alignment.csv` and `alignment_trace.csv` into `dir`, headers
/// only when there is no alignment.
pub fn write_alignment(alignment: Option<&AlignmentReport>, dir: &Path) -> Result<Vec<PathBuf>> {
    let alignment_path = dir.join("alignment.csv");
    let trace_path = dir.join("alignment_trace.csv");
    let (alignment_rows, trace_rows) = match alignment {
        Some(a) => {
            let n = a.target.len();
            let rows = (0..n)
                .map(|k| {
                    [
                        bin_label(k + 1, n),
                        a.unallocated[k].to_string(),
                        a.existing[k].to_string(),
                        a.target[k].to_string(),
                        fmt_sig(a.relative_before[k]),
                        a.after[k].to_string(),
                        fmt_sig(a.relative_after[k]),
                    ]
                })
                .collect();
            let trace = a
                .trace
                .iter()
                .map(|t| {
                    [
                        t.iteration.to_string(),
                        t.bin.to_string(),
                        t.surplus.to_string(),
                        fmt_sig(t.relative_difference),
                        t.option.map(|o| o.to_string()).unwrap_or_default(),
                    ]
                })
                .collect();
            (rows, trace)
        }
        None => (Vec::new(), Vec::new()),
    };
    write_csv(
        &alignment_path,
        [
            "bin",
            "unallocated",
            "existing",
            "target",
            "relative_difference_before",
            "after",
            "relative_difference_after",
        ],
        alignment_rows,
    )?;
    write_csv(&trace_path, TraceRow::HEADER, trace_rows)?;

    Ok(vec![alignment_path, trace_path])
}

/// Writes the report files under `<out>/reports/` and returns their paths.
/// Writing the same report twice gives identical bytes.
pub fn emit_reports(report: &Report, out: &Path) -> Result<Vec<PathBuf>> {
    let dir = out.join("reports");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::new();
    let mut path = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    let mut rows = Vec::new();
    for (d, comparison) in &report.marginals {
        for r in comparison {
            rows.push([
                d.code().to_string(),
                r.category.clone(),
                opt_sig(r.observed),
                fmt_sig(r.mean),
                fmt_sig(r.min),
                fmt_sig(r.max),
                opt_sig(r.difference),
            ]);
        }
    }
    write_csv(
        &path("marginals.csv"),
        [
            "dimension",
            "category",
            "observed",
            "simulated",
            "range_min",
            "range_max",
            "difference",
        ],
        rows,
    )?;

    write_csv(
        &path("household_types.csv"),
        ["year", "household_type", "mean", "sd", "min", "max"],
        report
            .household_types
            .iter()
            .map(|r| {
                [
                    r.year.to_string(),
                    r.category.clone(),
                    fmt_sig(r.mean),
                    fmt_sig(r.sd),
                    fmt_sig(r.min),
                    fmt_sig(r.max),
                ]
            })
            .collect(),
    )?;

    write_csv(
        &path("household_size_fit.csv"),
        [
            "bin",
            "target",
            "simulated",
            "sd",
            "relative_difference",
            "rmse",
        ],
        report
            .size_fit
            .iter()
            .map(|r| {
                [
                    r.bin.clone(),
                    fmt_sig(r.target),
                    fmt_sig(r.mean),
                    fmt_sig(r.sd),
                    fmt_sig(r.relative_difference),
                    fmt_sig(r.rmse),
                ]
            })
            .collect(),
    )?;

    let md_path = path("summary.md");
    fs::write(&md_path, render_markdown(report)).map_err(|e| Error::io(&md_path, e))?;
    written.extend(write_alignment(report.alignment.as_ref(), &dir)?);
    Ok(written)
}
