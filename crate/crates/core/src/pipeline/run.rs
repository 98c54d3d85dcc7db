//! Cycle execution, per-run output trees and replicate aggregation.
//!
//! Output layout under the output directory:
//!
//! ```text
//! run_<seed>/year_<y>/persons.csv
//! run_<seed>/year_<y>/households.csv
//! run_<seed>/year_<y>/metrics.csv        metric, value
//! run_<seed>/occurrences.csv             year, event, count
//! run_<seed>/alignment_trace.csv         year, pass, iteration, bin, surplus, relative_difference, option
//! run_<seed>/notes.csv                   year, event, message
//! summary.csv                            year, metric, mean, sd, min, max, n_runs
//! ```
//!
//! `year_<start_year>` holds the baseline; each cycle adds the next year.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{DrainMode, EventName, RunConfig};
use super::targets::TargetSchedule;
use crate::alignment::{align_households, relative_surplus, TraceRow};
use crate::error::{Error, Result};
use crate::events::{self, AllocationQueue, EventContext, EventNote};
use crate::migration::{
    emigrate, immigrate, load_emigration_targets, load_migrant_pool, load_migration_schedule,
    EmigrationTarget, MigrantPool, MigrationSchedule,
};
use crate::population::snapshot::{read_snapshot, write_snapshot};
use crate::population::{validate_integrity, Population, Sex};
use crate::stochastic::{ModelRegistry, RngStream, StreamLabel};

/// Read-only inputs shared by every replicate.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub baseline: Population,
    pub models: ModelRegistry,
    pub targets: TargetSchedule,
    pub migrant_pool: Option<MigrantPool>,
    pub migration_schedule: Option<MigrationSchedule>,
    pub emigration_targets: BTreeMap<i32, EmigrationTarget>,
}

impl RunInputs {
    pub fn load(config: &RunConfig) -> Result<Self> {
        let inputs = &config.inputs;
        let baseline = read_snapshot(&inputs.population)?;
        let report = validate_integrity(&baseline);
        if !report.is_clean() {
            return Err(Error::config(format!(
                "baseline population {}: {report}",
                inputs.population.display()
            )));
        }
        if baseline.n_unhoused() > 0 {
            return Err(Error::config(format!(
                "baseline population {}: {} persons without a household",
                inputs.population.display(),
                baseline.n_unhoused()
            )));
        }
        let mut models = ModelRegistry::builtin();
        if let Some(dir) = &inputs.models_dir {
            models.load_models_dir(dir)?;
        }
        if let Some(dir) = &inputs.rates_dir {
            models.load_rates_dir(dir)?;
        }
        Ok(RunInputs {
            baseline,
            models,
            targets: TargetSchedule::load(&inputs.targets, config.n_bins)?,
            migrant_pool: inputs
                .migrant_pool
                .as_deref()
                .map(load_migrant_pool)
                .transpose()?,
            migration_schedule: inputs
                .migration_schedule
                .as_deref()
                .map(load_migration_schedule)
                .transpose()?,
            emigration_targets: match &inputs.emigration_target {
                Some(p) => load_emigration_targets(p)?,
                None => BTreeMap::new(),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Occurrence {
    pub year: i32,
    pub event: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearTrace {
    pub year: i32,
    pub pass: usize,
    pub row: TraceRow,
}

/// Everything needed to continue a run: the population, the last completed
/// year and cycle, and the seed. Random streams are derived from the seed
/// and cycle, so no generator state has to be carried over.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub pop: Population,
    pub year: i32,
    pub cycle: u32,
    pub root: RngStream,
    pub queue: AllocationQueue,
    pub occurrences: Vec<Occurrence>,
    pub notes: Vec<EventNote>,
    pub traces: Vec<YearTrace>,
}

impl SimulationState {
    pub fn new(pop: Population, start_year: i32, seed: u64) -> Self {
        SimulationState {
            pop,
            year: start_year,
            cycle: 0,
            root: RngStream::new(seed),
            queue: AllocationQueue::new(),
            occurrences: Vec::new(),
            notes: Vec::new(),
            traces: Vec::new(),
        }
    }
}

fn drain(
    state: &mut SimulationState,
    target: &[u64],
    config: &RunConfig,
    year: i32,
    pass: &mut usize,
) -> Result<u64> {
    if state.queue.is_empty() {
        return Ok(0);
    }
    let pending = state.queue.take();
    let phase = format!("pass_{pass}");
    let mut rng = state
        .root
        .substream(StreamLabel::new(state.cycle, "alignment", &phase));
    let log = align_households(&mut state.pop, pending, target, &mut rng, config.semantics)?;
    for row in log.trace_rows() {
        state.traces.push(YearTrace {
            year,
            pass: *pass,
            row,
        });
    }
    *pass += 1;
    Ok(log.records.len() as u64)
}

/// Runs one simulated year: every event in configured order, alignment of
/// queued households, then the integrity check.
pub fn run_cycle(
    state: &mut SimulationState,
    config: &RunConfig,
    inputs: &RunInputs,
) -> Result<()> {
    let year = state.year + 1;
    let target = inputs.targets.for_year(year)?;
    let last_displacing = config.event_order.iter().rposition(|e| e.displaces());
    let mut pass = 0;
    let mut placed = 0;
    let no_emigration = EmigrationTarget::new();

    for (i, &event) in config.event_order.iter().enumerate() {
        let mut ctx = EventContext {
            pop: &mut state.pop,
            models: &inputs.models,
            params: &config.params,
            root: &state.root,
            cycle: state.cycle,
            year,
            queue: &mut state.queue,
            notes: &mut state.notes,
        };
        let count = match event {
            EventName::Ageing => events::ageing(&mut ctx)? as u64,
            EventName::Birth => events::birth(&mut ctx)? as u64,
            EventName::Death => events::death(&mut ctx)? as u64,
            EventName::Marriage => events::marriage(&mut ctx)? as u64,
            EventName::Divorce => events::divorce(&mut ctx)? as u64,
            EventName::Cohabitation => events::cohabitation(&mut ctx)? as u64,
            EventName::Breakup => events::breakup(&mut ctx)? as u64,
            EventName::LeaveHome => events::leave_parental_home(&mut ctx)? as u64,
            EventName::Socioeconomic => events::update_socioeconomic(&mut ctx)? as u64,
            EventName::Emigration => {
                let target = inputs
                    .emigration_targets
                    .get(&year)
                    .unwrap_or(&no_emigration);
                emigrate(&mut ctx, target, config.emigration_weighting)?.persons_removed
            }
            EventName::Immigration => match (&inputs.migrant_pool, &inputs.migration_schedule) {
                (Some(pool), Some(schedule)) => immigrate(&mut ctx, pool, schedule)?.persons_added,
                _ => 0,
            },
        };
        state.occurrences.push(Occurrence {
            year,
            event: event.code().to_string(),
            count,
        });
        let drain_now = match config.drain {
            DrainMode::PerEvent => true,
            DrainMode::PerCycle => Some(i) == last_displacing,
        };
        if drain_now {
            placed += drain(state, target, config, year, &mut pass)?;
        }
    }
    placed += drain(state, target, config, year, &mut pass)?;
    state.occurrences.push(Occurrence {
        year,
        event: "alignment".to_string(),
        count: placed,
    });

    let report = validate_integrity(&state.pop);
    if !report.is_clean() {
        return Err(Error::integrity(format!("after {year}: {report}")));
    }
    state.year = year;
    state.cycle += 1;
    Ok(())
}

/// Per-year summary numbers written to `metrics.csv`.
pub fn year_metrics(pop: &Population, target: &[u64]) -> Vec<(String, f64)> {
    let n = pop.n_persons() as f64;
    let mut m = vec![
        ("persons".to_string(), n),
        ("households".to_string(), pop.n_households() as f64),
        (
            "mean_age".to_string(),
            if n > 0.0 {
                pop.persons().map(|p| p.age as f64).sum::<f64>() / n
            } else {
                0.0
            },
        ),
        (
            "share_male".to_string(),
            if n > 0.0 {
                pop.persons_of_sex(Sex::Male).count() as f64 / n
            } else {
                0.0
            },
        ),
    ];
    let bins = pop
        .household_size_bins(target.len())
        .expect("target has at least two bins");
    for (k, (&b, &t)) in bins.0.iter().zip(target).enumerate() {
        let d = b as i64 - t as i64;
        m.push((format!("bin_{}_count", k + 1), b as f64));
        m.push((format!("bin_{}_target", k + 1), t as f64));
        m.push((
            format!("bin_{}_relative_difference", k + 1),
            relative_surplus(d, t),
        ));
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub metrics: BTreeMap<i32, Vec<(String, f64)>>,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_year(dir: &Path, pop: &Population, metrics: &[(String, f64)]) -> Result<()> {
    write_snapshot(pop, dir)?;
    write_rows(
        &dir.join("metrics.csv"),
        &["metric", "value"],
        metrics.iter().map(|(k, v)| [k.clone(), v.to_string()]),
    )
}

pub fn run_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("run_{seed}"))
}

/// One full run for `seed`, writing its output tree under `out`.
pub fn run_simulation(
    config: &RunConfig,
    inputs: &RunInputs,
    seed: u64,
    out: &Path,
) -> Result<RunSummary> {
    let dir = run_dir(out, seed);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut state = SimulationState::new(inputs.baseline.clone(), config.start_year, seed);
    let mut metrics = BTreeMap::new();
    let zero = vec![0; config.n_bins];
    let baseline_target = inputs.targets.for_year(state.year).unwrap_or(&zero);
    let baseline_metrics = year_metrics(&state.pop, baseline_target);
    write_year(
        &dir.join(format!("year_{}", state.year)),
        &state.pop,
        &baseline_metrics,
    )?;
    metrics.insert(state.year, baseline_metrics);

    for _ in 0..config.n_cycles {
        run_cycle(&mut state, config, inputs)?;
        let m = year_metrics(&state.pop, inputs.targets.for_year(state.year)?);
        write_year(&dir.join(format!("year_{}", state.year)), &state.pop, &m)?;
        metrics.insert(state.year, m);
    }

    write_rows(
        &dir.join("occurrences.csv"),
        &["year", "event", "count"],
        state
            .occurrences
            .iter()
            .map(|o| [o.year.to_string(), o.event.clone(), o.count.to_string()]),
    )?;
    let mut header = vec!["year", "pass"];
    header.extend(TraceRow::HEADER);
    write_rows(
        &dir.join("alignment_trace.csv"),
        &header,
        state.traces.iter().map(|t| {
            let mut r = vec![t.year.to_string(), t.pass.to_string()];
            r.extend(t.row.fields());
            r
        }),
    )?;
    write_rows(
        &dir.join("notes.csv"),
        &["year", "event", "message"],
        state
            .notes
            .iter()
            .map(|n| [n.year.to_string(), n.event.clone(), n.message.clone()]),
    )?;
    Ok(RunSummary { seed, metrics })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub year: i32,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub n_runs: usize,
}

/// Mean, sample SD and range of every metric across runs, in year and
/// metric order. Runs are sorted by seed first, so the result does not
/// depend on the order they finished in.
pub fn aggregate(runs: &[RunSummary]) -> Vec<AggregateRow> {
    let mut sorted: Vec<&RunSummary> = runs.iter().collect();
    sorted.sort_by_key(|r| r.seed);
    let mut values: BTreeMap<(i32, String), Vec<f64>> = BTreeMap::new();
    for run in sorted {
        for (&year, metrics) in &run.metrics {
            for (name, v) in metrics {
                values.entry((year, name.clone())).or_default().push(*v);
            }
        }
    }
    values
        .into_iter()
        .map(|((year, metric), v)| {
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                year,
                metric,
                mean,
                sd,
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                n_runs: n,
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    write_rows(
        path,
        &["year", "metric", "mean", "sd", "min", "max", "n_runs"],
        rows.iter().map(|r| {
            [
                r.year.to_string(),
                r.metric.clone(),
                r.mean.to_string(),
                r.sd.to_string(),
                r.min.to_string(),
                r.max.to_string(),
                r.n_runs.to_string(),
            ]
        }),
    )
}

/// Runs every seed, `jobs` at a time (0 means one per core), and writes
/// `summary.csv` next to the run directories.
pub fn run_replicates(
    config: &RunConfig,
    inputs: &RunInputs,
    seeds: &[u64],
    jobs: usize,
    out: &Path,
) -> Result<Vec<RunSummary>> {
    if seeds.is_empty() {
        return Err(Error::config("at least one seed is required"));
    }
    let mut distinct = seeds.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != seeds.len() {
        return Err(Error::config("seeds must be distinct"));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let runs: Vec<RunSummary> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_simulation(config, inputs, seed, out))
            .collect::<Result<_>>()
    })?;
    write_summary(&out.join("summary.csv"), &aggregate(&runs))?;
    Ok(runs)
}
