//! Validation metrics over simulated populations: marginal shares per
//! dimension, comparison against observed shares across runs, RMSE of
//! series, and the lone person / family / group household split.

mod emit;


use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use emit::{
    emit_reports, load_observed, load_run, render_alignment_markdown, render_markdown,
    write_alignment, AlignmentReport, Observed, Report, ReportOptions, RunOutput, SeriesRow,
    SizeFitRow,
};

use crate::error::{Error, Result};
use crate::population::{
    AgeBand, Education, Employment, HouseholdId, MaritalStatus, Population, Sex,
};

/// Household sizes reported separately; larger households share the top
/// category.
pub const HOUSEHOLD_SIZE_BINS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportDimension {
    AgeBand,
    Sex,
    MaritalStatus,
    Education,
    Employment,
    HouseholdSize,
    HouseholdType,
}

impl ReportDimension {
    pub const ALL: [ReportDimension; 7] = [
        ReportDimension::AgeBand,
        ReportDimension::Sex,
        ReportDimension::MaritalStatus,
        ReportDimension::Education,
        ReportDimension::Employment,
        ReportDimension::HouseholdSize,
        ReportDimension::HouseholdType,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ReportDimension::AgeBand => "age_band",
            ReportDimension::Sex => "sex",
            ReportDimension::MaritalStatus => "marital_status",
            ReportDimension::Education => "education",
            ReportDimension::Employment => "employment",
            ReportDimension::HouseholdSize => "household_size",
            ReportDimension::HouseholdType => "household_type",
        }
    }

    /// Household dimensions count households; the others count persons.
    pub fn is_household_level(self) -> bool {
        matches!(
            self,
            ReportDimension::HouseholdSize | ReportDimension::HouseholdType
        )
    }

    /// Every category of the dimension, in reporting order.
    pub fn categories(self) -> Vec<String> {
        fn codes<T: fmt::Display>(all: &[T]) -> Vec<String> {
            all.iter().map(|c| c.to_string()).collect()
        }
        match self {
            ReportDimension::AgeBand => AgeBand::all().map(|b| b.label()).collect(),
            ReportDimension::Sex => codes(Sex::ALL),
            ReportDimension::MaritalStatus => codes(MaritalStatus::ALL),
            ReportDimension::Education => codes(Education::ALL),
            ReportDimension::Employment => codes(Employment::ALL),
            ReportDimension::HouseholdSize => (1..=HOUSEHOLD_SIZE_BINS).map(size_label).collect(),
            ReportDimension::HouseholdType => codes(&HouseholdType::ALL),
        }
    }
}

impl fmt::Display for ReportDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ReportDimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReportDimension::ALL
            .into_iter()
            .find(|d| d.code() == s.trim())
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown report dimension {s:?} (expected one of {})",
                    ReportDimension::ALL.map(|d| d.code()).join(", ")
                ))
            })
    }
}

fn size_label(size: usize) -> String {
    if size >= HOUSEHOLD_SIZE_BINS {
        format!("{HOUSEHOLD_SIZE_BINS}+")
    } else {
        size.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HouseholdType {
    LonePerson,
    Family,
    Group,
}

impl HouseholdType {
    pub const ALL: [HouseholdType; 3] = [
        HouseholdType::LonePerson,
        HouseholdType::Family,
        HouseholdType::Group,
    ];

    pub fn code(self) -> &'static str {
        match self {
            HouseholdType::LonePerson => "lone_person",
            HouseholdType::Family => "family",
            HouseholdType::Group => "group",
        }
    }
}

impl fmt::Display for HouseholdType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One member: lone person. Any partner or parent-child link between two
/// members: family. Otherwise: group.
pub fn classify_household_type(pop: &Population, h: HouseholdId) -> Result<HouseholdType> {
    let hh = pop
        .household(h)
        .ok_or_else(|| Error::integrity(format!("no household {h}")))?;
    if hh.size() == 1 {
        return Ok(HouseholdType::LonePerson);
    }
    let linked = hh.members.iter().any(|&m| {
        pop.person(m).is_some_and(|p| {
            [p.partner, p.mother, p.father]
                .into_iter()
                .flatten()
                .any(|other| hh.members.contains(&other))
        })
    });
    Ok(if linked {
        HouseholdType::Family
    } else {
        HouseholdType::Group
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalRow {
    pub category: String,
    pub count: u64,
    pub share: f64,
}

/// Counts and shares of one dimension. Shares sum to one unless the table
/// is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    pub dimension: ReportDimension,
    pub rows: Vec<MarginalRow>,
}

impl MarginalTable {
    /// Builds a table from category counts, keeping the given order.
    pub fn from_counts(dimension: ReportDimension, counts: Vec<(String, u64)>) -> Self {
        let total: u64 = counts.iter().map(|c| c.1).sum();
        let rows = counts
            .into_iter()
            .map(|(category, count)| MarginalRow {
                share: if total > 0 {
                    count as f64 / total as f64
                } else {
                    0.0
                },
                category,
                count,
            })
            .collect();
        MarginalTable { dimension, rows }
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.count).sum()
    }

    /// Share of `category`, zero when absent.
    pub fn share(&self, category: &str) -> f64 {
        self.rows
            .iter()
            .find(|r| r.category == category)
            .map_or(0.0, |r| r.share)
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.category.as_str())
    }
}

/// Counts every category of `dimension` in `pop`, including empty ones.
pub fn marginal_shares(pop: &Population, dimension: ReportDimension) -> MarginalTable {
    let categories = dimension.categories();
    let mut counts: BTreeMap<String, u64> = categories.iter().map(|c| (c.clone(), 0)).collect();
    let mut bump = |c: String| *counts.entry(c).or_default() += 1;
    match dimension {
        ReportDimension::HouseholdSize => {
            for hh in pop.households() {
                bump(size_label(hh.size()));
            }
        }
        ReportDimension::HouseholdType => {
            for h in pop.household_ids() {
                let t = classify_household_type(pop, h).expect("listed household exists");
                bump(t.to_string());
            }
        }
        _ => {
            for p in pop.persons() {
                bump(match dimension {
                    ReportDimension::AgeBand => AgeBand::of_age(p.age).label(),
                    ReportDimension::Sex => p.sex.to_string(),
                    ReportDimension::MaritalStatus => p.marital_status.to_string(),
                    ReportDimension::Education => p.education.to_string(),
                    ReportDimension::Employment => p.employment.to_string(),
                    _ => unreachable!("household dimensions handled above"),
                });
            }
        }
    }
    let ordered = categories
        .into_iter()
        .map(|c| {
            let n = counts[&c];
            (c, n)
        })
        .collect();
    MarginalTable::from_counts(dimension, ordered)
}

/// Observed share against simulated shares over runs. `observed` and
/// `difference` are absent when no observed data were given.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub category: String,
    pub observed: Option<f64>,
    pub mean: f64,
    /// Smallest and largest simulated share over runs.
    pub min: f64,
    pub max: f64,
    pub difference: Option<f64>,
}

fn union_categories<'a>(tables: impl Iterator<Item = &'a MarginalTable>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in tables {
        for c in t.categories() {
            if !out.iter().any(|o| o == c) {
                out.push(c.to_string());
            }
        }
    }
    out
}

fn sim_row(category: String, sims: &[MarginalTable], observed: Option<f64>) -> ComparisonRow {
    let shares: Vec<f64> = sims.iter().map(|t| t.share(&category)).collect();
    let mean = shares.iter().sum::<f64>() / shares.len() as f64;
    ComparisonRow {
        category,
        observed,
        mean,
        min: shares.iter().copied().fold(f64::INFINITY, f64::min),
        max: shares.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        difference: observed.map(|o| mean - o),
    }
}

/// Mean, min-max range and difference from the observed share for every
/// category in the observed table or any run. Categories a table lacks
/// count as zero. No runs give no rows.
pub fn compare(sims: &[MarginalTable], observed: &MarginalTable) -> Vec<ComparisonRow> {
    if sims.is_empty() {
        return Vec::new();
    }
    union_categories(std::iter::once(observed).chain(sims))
        .into_iter()
        .map(|c| {
            let o = observed.share(&c);
            sim_row(c, sims, Some(o))
        })
        .collect()
}

/// Like [`compare`] without observed data.
pub fn summarize(sims: &[MarginalTable]) -> Vec<ComparisonRow> {
    if sims.is_empty() {
        return Vec::new();
    }
    union_categories(sims.iter())
        .into_iter()
        .map(|c| sim_row(c, sims, None))
        .collect()
}

/// Categories present in some tables but not in others.
pub fn category_mismatch(sims: &[MarginalTable], observed: &MarginalTable) -> Vec<String> {
    let all = union_categories(std::iter::once(observed).chain(sims));
    all.into_iter()
        .filter(|c| {
            !std::iter::once(observed)
                .chain(sims)
                .all(|t| t.categories().any(|x| x == c))
        })
        .collect()
}

/// Root mean squared difference of two equally long, non-empty series.
pub fn rmse(sim: &[f64], obs: &[f64]) -> Result<f64> {
    if sim.len() != obs.len() {
        return Err(Error::config(format!(
            "rmse: series lengths differ ({} vs {})",
            sim.len(),
            obs.len()
        )));
    }
    if sim.is_empty() {
        return Err(Error::config("rmse: empty series"));
    }
    let ss: f64 = sim.iter().zip(obs).map(|(s, o)| (s - o).powi(2)).sum();
    Ok((ss / sim.len() as f64).sqrt())
}

/// Six significant digits, fixed notation between 1e-4 and 1e6.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        format!("{x:.5e}")
    } else {
        format!("{x:.*}", (5 - mag) as usize)
    }
}
