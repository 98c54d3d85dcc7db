//! File formats: `migration_schedule.csv` (`year, type, direction, persons,
//! conv_rate`), `emigration_target.csv` (`year, age_band, sex, count`) and a
//! migrant pool directory holding `persons.csv`, `households.csv` and
//! `weights.csv` (`household_id, weight, migrant_type`).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{Direction, EmigrationTarget, MigrantPool, MigrationSchedule, ScheduleEntry};
use crate::csvutil::read_rows;
use crate::error::{Error, Result};
use crate::population::{
    snapshot::read_snapshot, validate_integrity, AgeBand, HouseholdId, MigrantType, Sex,
};

#[derive(Deserialize)]
struct ScheduleRow {
    year: i32,
    #[serde(rename = "type")]
    migrant_type: String,
    direction: String,
    persons: f64,
    conv_rate: f64,
}

#[derive(Deserialize)]
struct TargetRow {
    year: i32,
    age_band: String,
    sex: String,
    count: u64,
}

#[derive(Deserialize)]
struct WeightRow {
    household_id: u64,
    weight: f64,
    migrant_type: String,
}

pub fn load_migration_schedule(path: &Path) -> Result<MigrationSchedule> {
    let mut schedule = MigrationSchedule::new();
    for row in read_rows::<ScheduleRow>(path)? {
        let migrant_type: MigrantType = row.migrant_type.parse()?;
        let direction: Direction = row.direction.parse()?;
        if schedule.get(row.year, migrant_type, direction).is_some() {
            return Err(Error::config(format!(
                "{}: duplicate row for {} {migrant_type} {direction}",
                path.display(),
                row.year
            )));
        }
        schedule.insert(
            row.year,
            migrant_type,
            direction,
            ScheduleEntry {
                persons: row.persons,
                conv_rate: row.conv_rate,
            },
        )?;
    }
    Ok(schedule)
}

/// Emigration targets keyed by year.
pub fn load_emigration_targets(path: &Path) -> Result<BTreeMap<i32, EmigrationTarget>> {
    let mut targets: BTreeMap<i32, EmigrationTarget> = BTreeMap::new();
    for row in read_rows::<TargetRow>(path)? {
        let band: AgeBand = row.age_band.parse()?;
        let sex: Sex = row.sex.parse()?;
        let target = targets.entry(row.year).or_default();
        let count = target.get(band, sex) + row.count;
        target.set(band, sex, count);
    }
    Ok(targets)
}

/// Loads a migrant pool. The persons must form a clean population and every
/// household needs exactly one weight row.
pub fn load_migrant_pool(dir: &Path) -> Result<MigrantPool> {
    let pop = read_snapshot(dir)?;
    let report = validate_integrity(&pop);
    if !report.is_clean() {
        return Err(Error::config(format!(
            "migrant pool {}: {report}",
            dir.display()
        )));
    }
    let path = dir.join("weights.csv");
    let mut weights = BTreeMap::new();
    for row in read_rows::<WeightRow>(&path)? {
        let h = HouseholdId(row.household_id);
        if pop.household(h).is_none() {
            return Err(Error::config(format!(
                "{}: unknown household {h}",
                path.display()
            )));
        }
        let migrant_type: MigrantType = row.migrant_type.parse()?;
        if weights.insert(h, (row.weight, migrant_type)).is_some() {
            return Err(Error::config(format!(
                "{}: duplicate household {h}",
                path.display()
            )));
        }
    }
    MigrantPool::from_population(&pop, &weights)
}
