//! Annual life-course events.
//!
//! Every event takes an [`EventContext`], draws from its own labelled random
//! substream, mutates the population through the registry primitives and
//! returns how many times it occurred. Persons displaced from their household
//! (leavers, separated partners) are detached and pushed to the
//! [`AllocationQueue`]; the pipeline later places them with the alignment
//! procedure.

mod covariates;
mod family;
mod household;
mod partnership;

use std::collections::BTreeSet;

pub use covariates::PersonCovariates;
pub use family::{ageing, birth, death};
pub use household::{leave_parental_home, update_socioeconomic};
pub use partnership::{
    balance_pools, breakup, choose_partner, cohabitation, couples, divorce, marriage,
    partner_score, run_market, BalanceOutcome, MatchMarket, PartnerScoreParams,
};

use crate::alignment::PendingHousehold;
use crate::error::{Error, Result};
use crate::population::{PersonId, Population, Sex};
use crate::stochastic::{ModelRegistry, RngStream, StreamLabel};

/// Tunable event parameters. Values without a published source are
/// placeholders and are marked as such.
#[derive(Debug, Clone, PartialEq)]
pub struct EventParams {
    pub fertility_min_age: u32,
    pub fertility_max_age: u32,
    /// Lower age bound for entering a partnership market.
    pub partnership_min_age: u32,
    pub leave_home_min_age: u32,
    pub leave_home_max_age: u32,
    /// Lower age bound for socioeconomic transitions.
    pub socioeconomic_min_age: u32,
    /// Households whose remaining members are all younger than this are
    /// removed after a death.
    pub orphan_age: u32,
    /// Placeholder probability that the mother keeps the children.
    pub custody_to_mother_p: f64,
    /// Whose model decides whether a couple dissolves.
    pub dissolution_trigger: Sex,
    pub choice_set_size: usize,
    pub partner_score: PartnerScoreParams,
}

impl Default for EventParams {
    fn default() -> Self {
        EventParams {
            fertility_min_age: 18,
            fertility_max_age: 49,
            partnership_min_age: 18,
            leave_home_min_age: 18,
            leave_home_max_age: 40,
            socioeconomic_min_age: 15,
            orphan_age: 15,
            custody_to_mother_p: 0.85,
            dissolution_trigger: Sex::Female,
            choice_set_size: 30,
            partner_score: PartnerScoreParams::default(),
        }
    }
}

impl EventParams {
    pub fn validate(&self) -> Result<()> {
        if self.fertility_min_age > self.fertility_max_age {
            return Err(Error::config("fertility_min_age exceeds fertility_max_age"));
        }
        if self.leave_home_min_age > self.leave_home_max_age {
            return Err(Error::config(
                "leave_home_min_age exceeds leave_home_max_age",
            ));
        }
        if !(0.0..=1.0).contains(&self.custody_to_mother_p) {
            return Err(Error::config("custody_to_mother_p must lie in [0, 1]"));
        }
        if self.choice_set_size == 0 {
            return Err(Error::config("choice_set_size must be positive"));
        }
        if self.partner_score.lambda.is_nan() || self.partner_score.lambda <= 0.0 {
            return Err(Error::config("partner score lambda must be positive"));
        }
        Ok(())
    }
}

/// Households waiting to be placed by the alignment procedure. Every queued
/// person is unhoused.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AllocationQueue {
    groups: Vec<PendingHousehold>,
}

impl AllocationQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, group: PendingHousehold) {
        if !group.members.is_empty() {
            self.groups.push(group);
        }
    }

    /// Detaches `p` from its household (or from its queued group) and queues
    /// it alone.
    pub fn push_single(&mut self, pop: &mut Population, p: PersonId) -> Result<()> {
        self.remove_person(p);
        pop.detach_person(p)?;
        self.groups.push(PendingHousehold::new(vec![p]));
        Ok(())
    }

    /// Drops `p` from whichever group holds it. Empty groups disappear.
    pub fn remove_person(&mut self, p: PersonId) -> bool {
        let Some(g) = self.group_of(p) else {
            return false;
        };
        self.groups[g].members.retain(|&m| m != p);
        if self.groups[g].members.is_empty() {
            self.groups.remove(g);
        }
        true
    }

    pub fn group_of(&self, p: PersonId) -> Option<usize> {
        self.groups.iter().position(|g| g.members.contains(&p))
    }

    pub fn groups(&self) -> &[PendingHousehold] {
        &self.groups
    }

    /// Adds `p` to the group holding `anchor`.
    pub fn join_group_of(&mut self, anchor: PersonId, p: PersonId) -> Result<()> {
        let g = self
            .group_of(anchor)
            .ok_or_else(|| Error::integrity(format!("person {anchor} is not queued")))?;
        self.groups[g].members.push(p);
        Ok(())
    }

    pub fn contains(&self, p: PersonId) -> bool {
        self.group_of(p).is_some()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_persons(&self) -> usize {
        self.groups.iter().map(PendingHousehold::size).sum()
    }

    pub fn persons(&self) -> BTreeSet<PersonId> {
        self.groups
            .iter()
            .flat_map(|g| g.members.iter().copied())
            .collect()
    }

    pub fn take(&mut self) -> Vec<PendingHousehold> {
        std::mem::take(&mut self.groups)
    }
}

/// A noteworthy event outcome (orphan removal, pool trimming, emigration
/// shortfall, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventNote {
    pub year: i32,
    pub event: String,
    pub message: String,
}

/// Mutable state an event works on.
pub struct EventContext<'a> {
    pub pop: &'a mut Population,
    pub models: &'a ModelRegistry,
    pub params: &'a EventParams,
    pub root: &'a RngStream,
    pub cycle: u32,
    pub year: i32,
    pub queue: &'a mut AllocationQueue,
    pub notes: &'a mut Vec<EventNote>,
}

impl<'a> EventContext<'a> {
    pub fn rng(&self, event: &str, phase: &str) -> RngStream {
        self.root
            .substream(StreamLabel::new(self.cycle, event, phase))
    }

    pub fn note(&mut self, event: &str, message: impl Into<String>) {
        let message = message.into();
        log::info!("{} {event}: {message}", self.year);
        self.notes.push(EventNote {
            year: self.year,
            event: event.to_string(),
            message,
        });
    }

    /// Makes sure `p` is no longer waiting in the queue (after an event housed
    /// or removed them).
    pub(crate) fn dequeue(&mut self, p: PersonId) {
        self.queue.remove_person(p);
    }
}

#[cfg(test)]
pub(crate) mod testkit;
#[cfg(test)]
mod tests;
