//! Run configuration.
//!
//! A run is described by a TOML file. Relative paths are resolved against
//! the directory holding the file. Unknown keys are rejected.
//!
//! Every key, with its default, is listed in [`CONFIG_REFERENCE`].
//!
//! Event names: `ageing`, `birth`, `death`, `marriage`, `divorce`,
//! `cohabitation`, `breakup`, `leave_home`, `emigration`, `immigration`,
//! `socioeconomic`. Migration events do nothing when their input files are
//! not configured.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::alignment::TopBinSemantics;
use crate::error::{Error, Result};
use crate::events::{EventParams, PartnerScoreParams};
use crate::migration::EmigrationWeighting;
use crate::population::Sex;

/// Annotated example configuration listing every key with its default.
pub const CONFIG_REFERENCE: &str = r#"seeds = [1, 2, 3]          # used when no seed is given on the command line
n_cycles = 10              # simulated years
start_year = 2011          # year of the baseline snapshot
n_bins = 6                 # household-size bins, the last one open (6+)
preset = "default"         # or "appsim": dissolution before formation
# event_order = [...]      # explicit order, overrides the preset
# enabled_events = [...]   # defaults to every event
drain = "per_cycle"        # or "per_event"
output_dir = "output"

[inputs]
population = "population"             # persons.csv + households.csv
targets = "targets.csv"               # year, bin, count
# models_dir = "models"               # override built-in coefficients
# rates_dir = "rates"                 # override built-in rate tables
# migrant_pool = "migrants"           # persons.csv, households.csv, weights.csv
# migration_schedule = "migration_schedule.csv"
# emigration_target = "emigration_target.csv"

[alignment]
semantics = "paper"                   # or "consistent"

[events]
fertility_min_age = 18
fertility_max_age = 49
partnership_min_age = 18
leave_home_min_age = 18
leave_home_max_age = 40
socioeconomic_min_age = 15
orphan_age = 15
custody_to_mother_p = 0.85
dissolution_trigger = "female"
choice_set_size = 30
partner_lambda = 0.2
partner_mu = 2.0

[migration]
emigration_weighting = "person"       # or "household"
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventName {
    Ageing,
    Birth,
    Death,
    Marriage,
    Divorce,
    Cohabitation,
    Breakup,
    LeaveHome,
    Emigration,
    Immigration,
    Socioeconomic,
}

impl EventName {
    pub const ALL: [EventName; 11] = [
        EventName::Ageing,
        EventName::Birth,
        EventName::Death,
        EventName::Marriage,
        EventName::Divorce,
        EventName::Cohabitation,
        EventName::Breakup,
        EventName::LeaveHome,
        EventName::Emigration,
        EventName::Immigration,
        EventName::Socioeconomic,
    ];

    pub fn code(self) -> &'static str {
        match self {
            EventName::Ageing => "ageing",
            EventName::Birth => "birth",
            EventName::Death => "death",
            EventName::Marriage => "marriage",
            EventName::Divorce => "divorce",
            EventName::Cohabitation => "cohabitation",
            EventName::Breakup => "breakup",
            EventName::LeaveHome => "leave_home",
            EventName::Emigration => "emigration",
            EventName::Immigration => "immigration",
            EventName::Socioeconomic => "socioeconomic",
        }
    }

    /// Events that can push households onto the allocation queue.
    pub fn displaces(self) -> bool {
        matches!(
            self,
            EventName::Divorce | EventName::Breakup | EventName::LeaveHome | EventName::Immigration
        )
    }
}

impl fmt::Display for EventName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for EventName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventName::ALL
            .into_iter()
            .find(|e| e.code() == s.trim())
            .ok_or_else(|| Error::config(format!("unknown event {:?}", s.trim())))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Ageing, birth, death, marriage, divorce, cohabitation, break up,
    /// leaving home, emigration, immigration, then socioeconomic update.
    #[default]
    Default,
    /// As `Default` but with divorce and break up before marriage and
    /// cohabitation.
    Appsim,
}

impl Preset {
    pub fn order(self) -> Vec<EventName> {
        use EventName::*;
        match self {
            Preset::Default => vec![
                Ageing,
                Birth,
                Death,
                Marriage,
                Divorce,
                Cohabitation,
                Breakup,
                LeaveHome,
                Emigration,
                Immigration,
                Socioeconomic,
            ],
            Preset::Appsim => vec![
                Ageing,
                Birth,
                Death,
                Divorce,
                Breakup,
                Marriage,
                Cohabitation,
                LeaveHome,
                Emigration,
                Immigration,
                Socioeconomic,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrainMode {
    /// One alignment pass after the last displacing event of the cycle.
    #[default]
    PerCycle,
    /// An alignment pass after every event that leaves households queued.
    PerEvent,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInputs {
    population: PathBuf,
    targets: PathBuf,
    models_dir: Option<PathBuf>,
    rates_dir: Option<PathBuf>,
    migrant_pool: Option<PathBuf>,
    migration_schedule: Option<PathBuf>,
    emigration_target: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlignment {
    semantics: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvents {
    fertility_min_age: Option<u32>,
    fertility_max_age: Option<u32>,
    partnership_min_age: Option<u32>,
    leave_home_min_age: Option<u32>,
    leave_home_max_age: Option<u32>,
    socioeconomic_min_age: Option<u32>,
    orphan_age: Option<u32>,
    custody_to_mother_p: Option<f64>,
    dissolution_trigger: Option<String>,
    choice_set_size: Option<usize>,
    partner_lambda: Option<f64>,
    partner_mu: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMigration {
    emigration_weighting: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seeds: Vec<u64>,
    n_cycles: Option<u32>,
    start_year: Option<i32>,
    n_bins: Option<usize>,
    #[serde(default)]
    preset: Preset,
    event_order: Option<Vec<EventName>>,
    enabled_events: Option<Vec<EventName>>,
    #[serde(default)]
    drain: DrainMode,
    output_dir: Option<PathBuf>,
    inputs: RawInputs,
    #[serde(default)]
    alignment: RawAlignment,
    #[serde(default)]
    events: RawEvents,
    #[serde(default)]
    migration: RawMigration,
}

/// Input files, resolved to usable paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub population: PathBuf,
    pub targets: PathBuf,
    pub models_dir: Option<PathBuf>,
    pub rates_dir: Option<PathBuf>,
    pub migrant_pool: Option<PathBuf>,
    pub migration_schedule: Option<PathBuf>,
    pub emigration_target: Option<PathBuf>,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub n_cycles: u32,
    pub start_year: i32,
    pub n_bins: usize,
    pub event_order: Vec<EventName>,
    pub drain: DrainMode,
    pub output_dir: PathBuf,
    pub inputs: Inputs,
    pub semantics: TopBinSemantics,
    pub params: EventParams,
    pub emigration_weighting: EmigrationWeighting,
}

pub const DEFAULT_N_CYCLES: u32 = 10;
pub const DEFAULT_START_YEAR: i32 = 2011;
pub const DEFAULT_N_BINS: usize = 6;

/// Reads and validates a TOML run configuration.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses configuration text, resolving relative paths against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::config(e.message().to_string()))?;
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let existing = |p: &Path, what: &str| -> Result<PathBuf> {
        let full = resolve(p);
        if !full.exists() {
            return Err(Error::config(format!(
                "{what} {} does not exist",
                full.display()
            )));
        }
        Ok(full)
    };
    let optional = |p: &Option<PathBuf>, what: &str| -> Result<Option<PathBuf>> {
        p.as_deref().map(|p| existing(p, what)).transpose()
    };
    let inputs = Inputs {
        population: existing(&raw.inputs.population, "population")?,
        targets: existing(&raw.inputs.targets, "targets")?,
        models_dir: optional(&raw.inputs.models_dir, "models_dir")?,
        rates_dir: optional(&raw.inputs.rates_dir, "rates_dir")?,
        migrant_pool: optional(&raw.inputs.migrant_pool, "migrant_pool")?,
        migration_schedule: optional(&raw.inputs.migration_schedule, "migration_schedule")?,
        emigration_target: optional(&raw.inputs.emigration_target, "emigration_target")?,
    };
    if inputs.migrant_pool.is_some() != inputs.migration_schedule.is_some() {
        return Err(Error::config(
            "migrant_pool and migration_schedule must be given together",
        ));
    }

    let enabled: BTreeSet<EventName> = match &raw.enabled_events {
        Some(list) => {
            let set: BTreeSet<_> = list.iter().copied().collect();
            if set.len() != list.len() {
                return Err(Error::config("enabled_events lists an event twice"));
            }
            set
        }
        None => EventName::ALL.into_iter().collect(),
    };
    let event_order = match raw.event_order {
        Some(order) => order,
        None => raw
            .preset
            .order()
            .into_iter()
            .filter(|e| enabled.contains(e))
            .collect(),
    };
    let ordered: BTreeSet<EventName> = event_order.iter().copied().collect();
    if ordered.len() != event_order.len() {
        return Err(Error::config("event_order lists an event twice"));
    }
    if let Some(missing) = enabled.difference(&ordered).next() {
        return Err(Error::config(format!(
            "event_order is missing enabled event {missing:?}",
            missing = missing.code()
        )));
    }
    if let Some(extra) = ordered.difference(&enabled).next() {
        return Err(Error::config(format!(
            "event_order contains disabled event {:?}",
            extra.code()
        )));
    }

    let n_bins = raw.n_bins.unwrap_or(DEFAULT_N_BINS);
    if n_bins < 2 {
        return Err(Error::config("n_bins must be at least 2"));
    }

    let defaults = EventParams::default();
    let ev = raw.events;
    let params = EventParams {
        fertility_min_age: ev.fertility_min_age.unwrap_or(defaults.fertility_min_age),
        fertility_max_age: ev.fertility_max_age.unwrap_or(defaults.fertility_max_age),
        partnership_min_age: ev
            .partnership_min_age
            .unwrap_or(defaults.partnership_min_age),
        leave_home_min_age: ev.leave_home_min_age.unwrap_or(defaults.leave_home_min_age),
        leave_home_max_age: ev.leave_home_max_age.unwrap_or(defaults.leave_home_max_age),
        socioeconomic_min_age: ev
            .socioeconomic_min_age
            .unwrap_or(defaults.socioeconomic_min_age),
        orphan_age: ev.orphan_age.unwrap_or(defaults.orphan_age),
        custody_to_mother_p: ev
            .custody_to_mother_p
            .unwrap_or(defaults.custody_to_mother_p),
        dissolution_trigger: match ev.dissolution_trigger {
            Some(s) => s.parse::<Sex>()?,
            None => defaults.dissolution_trigger,
        },
        choice_set_size: ev.choice_set_size.unwrap_or(defaults.choice_set_size),
        partner_score: PartnerScoreParams {
            lambda: ev.partner_lambda.unwrap_or(defaults.partner_score.lambda),
            mu: ev.partner_mu.unwrap_or(defaults.partner_score.mu),
        },
    };
    params.validate()?;

    Ok(RunConfig {
        seeds: raw.seeds,
        n_cycles: raw.n_cycles.unwrap_or(DEFAULT_N_CYCLES),
        start_year: raw.start_year.unwrap_or(DEFAULT_START_YEAR),
        n_bins,
        event_order,
        drain: raw.drain,
        output_dir: resolve(raw.output_dir.as_deref().unwrap_or(Path::new("output"))),
        inputs,
        semantics: match raw.alignment.semantics {
            Some(s) => s.parse()?,
            None => TopBinSemantics::default(),
        },
        params,
        emigration_weighting: match raw.migration.emigration_weighting {
            Some(s) => s.parse()?,
            None => EmigrationWeighting::default(),
        },
    })
}
