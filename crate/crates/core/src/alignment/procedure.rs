use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    applied_changes, rank_best_size, relative_surplus, score, surplus, AllocationOption,
    TopBinSemantics,
};
use crate::error::{Error, Result};
use crate::population::{HouseholdId, PersonId, Population};

/// A group of unhoused persons waiting to be placed together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingHousehold {
    pub members: Vec<PersonId>,
}

impl PendingHousehold {
    pub fn new(members: Vec<PersonId>) -> Self {
        PendingHousehold { members }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Decides whether a pending household may join a given host.
pub type HostFilter<'a> = Box<dyn Fn(&Population, &PendingHousehold, HouseholdId) -> bool + 'a>;

type Observer<'a> = Box<dyn FnMut(&Population, &AllocationRecord) + 'a>;

/// One placement decision.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRecord {
    /// 1-based position in the processing order.
    pub step: usize,
    pub size: usize,
    pub members: Vec<PersonId>,
    pub chosen: AllocationOption,
    /// Better-ranked options that were skipped because no host was available.
    pub fallbacks: Vec<AllocationOption>,
    /// Score the ranking assigned to `chosen`.
    pub chosen_score: f64,
    /// Household the members ended up in.
    pub household: HouseholdId,
    pub d_before: Vec<i64>,
    pub d_after: Vec<i64>,
}

/// Full record of one alignment pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationLog {
    pub n_bins: usize,
    pub semantics: TopBinSemantics,
    pub target: Vec<u64>,
    pub d_initial: Vec<i64>,
    pub records: Vec<AllocationRecord>,
}

impl AllocationLog {
    pub fn d_final(&self) -> &[i64] {
        self.records
            .last()
            .map_or(self.d_initial.as_slice(), |r| r.d_after.as_slice())
    }

    /// Recomputes the final surplus from `d_initial` and the chosen options.
    pub fn replay(&self) -> Vec<i64> {
        let mut d = self.d_initial.clone();
        for rec in &self.records {
            for (k, delta) in applied_changes(rec.chosen, rec.size, self.n_bins) {
                d[k] += delta;
            }
        }
        d
    }

    pub fn score_before(&self) -> Result<f64> {
        score(&self.d_initial, &self.target)
    }

    pub fn score_after(&self) -> Result<f64> {
        score(self.d_final(), &self.target)
    }

    /// Surplus per iteration in long form: `(iteration, bin, surplus,
    /// relative difference, option)`. Iteration 0 is the starting state.
    pub fn trace_rows(&self) -> Vec<TraceRow> {
        let mut rows = Vec::with_capacity((self.records.len() + 1) * self.n_bins);
        let mut push = |iteration: usize, d: &[i64], option: Option<AllocationOption>| {
            for (k, (&d, &t)) in d.iter().zip(&self.target).enumerate() {
                rows.push(TraceRow {
                    iteration,
                    bin: k + 1,
                    surplus: d,
                    relative_difference: relative_surplus(d, t),
                    option,
                });
            }
        };
        push(0, &self.d_initial, None);
        for rec in &self.records {
            push(rec.step, &rec.d_after, Some(rec.chosen));
        }
        rows
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(TraceRow::HEADER)
            .map_err(|e| Error::csv(path, e))?;
        for row in self.trace_rows() {
            w.write_record(row.fields())
                .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub bin: usize,
    pub surplus: i64,
    pub relative_difference: f64,
    pub option: Option<AllocationOption>,
}

impl TraceRow {
    pub const HEADER: [&'static str; 5] = [
        "iteration",
        "bin",
        "surplus",
        "relative_difference",
        "option",
    ];

    pub fn fields(&self) -> [String; 5] {
        [
            self.iteration.to_string(),
            self.bin.to_string(),
            self.surplus.to_string(),
            format!("{:.6}", self.relative_difference),
            self.option.map(|o| o.to_string()).unwrap_or_default(),
        ]
    }
}

/// Configurable alignment pass.
pub struct Aligner<'a> {
    n_bins: usize,
    semantics: TopBinSemantics,
    host_filter: Option<HostFilter<'a>>,
    observer: Option<Observer<'a>>,
}

impl<'a> Aligner<'a> {
    pub fn new(n_bins: usize, semantics: TopBinSemantics) -> Self {
        Aligner {
            n_bins,
            semantics,
            host_filter: None,
            observer: None,
        }
    }

    /// Restricts which households may host. Hosts are drawn uniformly among
    /// the accepted households of the chosen bin.
    pub fn with_host_filter(
        mut self,
        filter: impl Fn(&Population, &PendingHousehold, HouseholdId) -> bool + 'a,
    ) -> Self {
        self.host_filter = Some(Box::new(filter));
        self
    }

    /// Called after every placement with the updated population.
    pub fn with_observer(
        mut self,
        observer: impl FnMut(&Population, &AllocationRecord) + 'a,
    ) -> Self {
        self.observer = Some(Box::new(observer));
        self
    }

    fn check_pending(&self, pop: &Population, pending: &[PendingHousehold]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for hh in pending {
            if hh.members.is_empty() {
                return Err(Error::integrity("pending household has no members"));
            }
            for &m in &hh.members {
                let person = pop.person(m).ok_or_else(|| {
                    Error::integrity(format!("pending person {m} does not exist"))
                })?;
                if let Some(h) = person.household {
                    return Err(Error::integrity(format!(
                        "pending person {m} still lives in household {h}"
                    )));
                }
                if !seen.insert(m) {
                    return Err(Error::integrity(format!("person {m} is pending twice")));
                }
            }
        }
        Ok(())
    }

    fn pick_host<R: Rng + ?Sized>(
        &self,
        pop: &Population,
        pending: &PendingHousehold,
        bin: usize,
        rng: &mut R,
    ) -> Option<HouseholdId> {
        match &self.host_filter {
            None => pop.random_household_in_bin(bin - 1, self.n_bins, rng),
            Some(filter) => {
                let hosts: Vec<HouseholdId> = pop
                    .households_in_bin(bin - 1, self.n_bins)
                    .into_iter()
                    .filter(|&h| filter(pop, pending, h))
                    .collect();
                hosts.choose(rng).copied()
            }
        }
    }

    /// Places every pending household, in random order, into the population.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        pop: &mut Population,
        mut pending: Vec<PendingHousehold>,
        target: &[u64],
        rng: &mut R,
    ) -> Result<AllocationLog> {
        if target.len() != self.n_bins {
            return Err(Error::domain(format!(
                "target has {} bins, expected {}",
                target.len(),
                self.n_bins
            )));
        }
        if self.n_bins < 2 {
            return Err(Error::domain("alignment needs at least two bins"));
        }
        self.check_pending(pop, &pending)?;

        let n = self.n_bins;
        let bins = pop.household_size_bins(n)?;
        let mut d = surplus(&bins.0, target)?;
        let mut log = AllocationLog {
            n_bins: n,
            semantics: self.semantics,
            target: target.to_vec(),
            d_initial: d.clone(),
            records: Vec::with_capacity(pending.len()),
        };
        pending.shuffle(rng);

        for (i, hh) in pending.into_iter().enumerate() {
            let size = hh.size();
            let ranking = rank_best_size(size, &d, target, self.semantics)?;
            let mut fallbacks = Vec::new();
            let mut placed = None;
            for &(option, option_score) in &ranking.options {
                match option {
                    AllocationOption::NewHousehold => {
                        placed = Some((option, option_score, pop.create_household(&hh.members)?));
                    }
                    AllocationOption::JoinBin(s) => {
                        if let Some(host) = self.pick_host(pop, &hh, s, rng) {
                            for &m in &hh.members {
                                pop.move_person(m, host)?;
                            }
                            placed = Some((option, option_score, host));
                        }
                    }
                }
                if placed.is_some() {
                    break;
                }
                fallbacks.push(option);
            }
            let (chosen, chosen_score, household) =
                placed.expect("a new household is always a feasible option");

            let d_before = d.clone();
            for (k, delta) in applied_changes(chosen, size, n) {
                d[k] += delta;
            }
            let record = AllocationRecord {
                step: i + 1,
                size,
                members: hh.members,
                chosen,
                fallbacks,
                chosen_score,
                household,
                d_before,
                d_after: d.clone(),
            };
            if let Some(observer) = self.observer.as_mut() {
                observer(pop, &record);
            }
            log.records.push(record);
        }
        Ok(log)
    }
}

/// Runs one alignment pass with the default (pass-through) host filter.
pub fn align_households<R: Rng + ?Sized>(
    pop: &mut Population,
    unallocated: Vec<PendingHousehold>,
    target: &[u64],
    rng: &mut R,
    semantics: TopBinSemantics,
) -> Result<AllocationLog> {
    Aligner::new(target.len(), semantics).run(pop, unallocated, target, rng)
}
