//! Yearly household-size targets from `targets.csv` (`year, bin, count`).
//!
//! `bin` is the household size, `1` to `n_bins`; the top bin may be written
//! `4` or `4+` and counts every larger household too. Years without rows
//! reuse the latest earlier year.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::csvutil::read_rows;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSchedule {
    n_bins: usize,
    by_year: BTreeMap<i32, Vec<u64>>,
}

#[derive(Deserialize)]
struct Row {
    year: i32,
    bin: String,
    count: u64,
}

impl TargetSchedule {
    pub fn new(n_bins: usize) -> Self {
        TargetSchedule {
            n_bins,
            by_year: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, year: i32, target: Vec<u64>) -> Result<()> {
        if target.len() != self.n_bins {
            return Err(Error::config(format!(
                "target for {year} has {} bins, expected {}",
                target.len(),
                self.n_bins
            )));
        }
        self.by_year.insert(year, target);
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Target in force in `year`: its own row set, else the latest earlier.
    pub fn for_year(&self, year: i32) -> Result<&[u64]> {
        self.by_year
            .range(..=year)
            .next_back()
            .map(|(_, t)| t.as_slice())
            .ok_or_else(|| Error::config(format!("no household-size target for {year} or earlier")))
    }

    pub fn load(path: &Path, n_bins: usize) -> Result<Self> {
        let mut rows: BTreeMap<i32, BTreeMap<usize, u64>> = BTreeMap::new();
        for row in read_rows::<Row>(path)? {
            let label = row.bin.trim();
            let (digits, open) = match label.strip_suffix('+') {
                Some(d) => (d, true),
                None => (label, false),
            };
            let bin: usize = digits
                .parse()
                .map_err(|_| Error::config(format!("{}: bad bin {label:?}", path.display())))?;
            if bin == 0 || bin > n_bins || (open && bin != n_bins) {
                return Err(Error::config(format!(
                    "{}: bin {label:?} outside 1..={n_bins}",
                    path.display()
                )));
            }
            if rows
                .entry(row.year)
                .or_default()
                .insert(bin, row.count)
                .is_some()
            {
                return Err(Error::config(format!(
                    "{}: duplicate bin {bin} for {}",
                    path.display(),
                    row.year
                )));
            }
        }
        let mut schedule = TargetSchedule::new(n_bins);
        for (year, bins) in rows {
            if bins.len() != n_bins {
                return Err(Error::config(format!(
                    "{}: year {year} has {} of {n_bins} bins",
                    path.display(),
                    bins.len()
                )));
            }
            schedule.insert(year, bins.into_values().collect())?;
        }
        if schedule.by_year.is_empty() {
            return Err(Error::config(format!("{}: no targets", path.display())));
        }
        Ok(schedule)
    }
}
