//! Standalone alignment problems: an existing bin histogram, a set of
//! unallocated households by size, and a target.
//!
//! File format: CSV with columns `kind, bin, count`, where `kind` is one of
//! `unallocated`, `existing_bins` or `target` and `bin` runs from 1 to `n`.
//! Missing rows count as zero. `n` is the largest bin mentioned.

use std::path::Path;

use rand::Rng;

use super::{align_households, AllocationLog, PendingHousehold, TopBinSemantics};
use crate::error::{Error, Result};
use crate::population::{NewPerson, Population, Sex};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentProblem {
    pub existing: Vec<u64>,
    pub unallocated: Vec<u64>,
    pub target: Vec<u64>,
}

/// Result of solving an [`AlignmentProblem`].
#[derive(Debug, Clone)]
pub struct AlignmentOutcome {
    pub bins_before: Vec<u64>,
    pub bins_after: Vec<u64>,
    pub log: AllocationLog,
    pub persons_before: usize,
    pub persons_after: usize,
}

impl AlignmentOutcome {
    /// `(B - T) / T` of the existing stock, before anything is placed.
    pub fn relative_before(&self, target: &[u64]) -> Vec<f64> {
        relative(&self.bins_before, target)
    }

    pub fn relative_after(&self, target: &[u64]) -> Vec<f64> {
        relative(&self.bins_after, target)
    }
}

fn relative(bins: &[u64], target: &[u64]) -> Vec<f64> {
    bins.iter()
        .zip(target)
        .map(|(&b, &t)| super::relative_surplus(b as i64 - t as i64, t))
        .collect()
}

impl AlignmentProblem {
    pub fn n_bins(&self) -> usize {
        self.target.len()
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::csv(path, e))?;
        let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["kind", "bin", "count"] {
            return Err(Error::config(format!(
                "{}: expected columns kind,bin,count",
                path.display()
            )));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let bad = |what: &str| {
                Error::config(format!(
                    "{}: line {}: bad {what} {:?}",
                    path.display(),
                    rec.position().map_or(0, |p| p.line()),
                    rec.as_slice()
                ))
            };
            let bin: usize = rec[1].parse().map_err(|_| bad("bin"))?;
            let count: u64 = rec[2].parse().map_err(|_| bad("count"))?;
            if bin == 0 {
                return Err(bad("bin"));
            }
            let kind = match &rec[0] {
                "unallocated" => 0,
                "existing_bins" => 1,
                "target" => 2,
                _ => return Err(bad("kind")),
            };
            rows.push((kind, bin, count));
        }
        let n = rows.iter().map(|r| r.1).max().unwrap_or(0);
        if n < 2 {
            return Err(Error::config(format!(
                "{}: a problem needs at least two bins",
                path.display()
            )));
        }
        let mut vecs = [vec![0u64; n], vec![0u64; n], vec![0u64; n]];
        for (kind, bin, count) in rows {
            vecs[kind][bin - 1] += count;
        }
        let [unallocated, existing, target] = vecs;
        Ok(AlignmentProblem {
            existing,
            unallocated,
            target,
        })
    }

    /// Builds a population holding the existing households (top-bin
    /// households get exactly `n` members) and the unallocated households as
    /// unhoused persons.
    pub fn materialize(&self) -> Result<(Population, Vec<PendingHousehold>)> {
        let n = self.n_bins();
        if self.existing.len() != n || self.unallocated.len() != n {
            return Err(Error::config("problem vectors differ in length"));
        }
        let mut pop = Population::new();
        let mut next_sex = 0usize;
        let mut person = |pop: &mut Population| {
            next_sex += 1;
            let sex = if next_sex.is_multiple_of(2) {
                Sex::Female
            } else {
                Sex::Male
            };
            pop.create_person(NewPerson::new(30, sex))
        };
        for (k, &count) in self.existing.iter().enumerate() {
            for _ in 0..count {
                let members = (0..=k)
                    .map(|_| person(&mut pop))
                    .collect::<Result<Vec<_>>>()?;
                pop.create_household(&members)?;
            }
        }
        let mut pending = Vec::new();
        for (k, &count) in self.unallocated.iter().enumerate() {
            for _ in 0..count {
                let members = (0..=k)
                    .map(|_| person(&mut pop))
                    .collect::<Result<Vec<_>>>()?;
                pending.push(PendingHousehold::new(members));
            }
        }
        Ok((pop, pending))
    }

    pub fn solve<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        semantics: TopBinSemantics,
    ) -> Result<AlignmentOutcome> {
        let (mut pop, pending) = self.materialize()?;
        let n = self.n_bins();
        let bins_before = pop.household_size_bins(n)?.0;
        let persons_before = pop.n_persons();
        let log = align_households(&mut pop, pending, &self.target, rng, semantics)?;
        Ok(AlignmentOutcome {
            bins_before,
            bins_after: pop.household_size_bins(n)?.0,
            log,
            persons_before,
            persons_after: pop.n_persons(),
        })
    }
}
