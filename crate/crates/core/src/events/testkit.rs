//! Small builders shared by event tests.

use super::{AllocationQueue, EventContext, EventNote, EventParams};
use crate::population::{
    Employment, HouseholdId, MaritalStatus, NewPerson, PartnershipKind, PersonId, Population, Sex,
};
use crate::stochastic::{LogisticModel, ModelRegistry, RngStream};

pub(crate) struct Fixture {
    pub pop: Population,
    pub models: ModelRegistry,
    pub params: EventParams,
    pub root: RngStream,
    pub queue: AllocationQueue,
    pub notes: Vec<EventNote>,
}

impl Fixture {
    pub fn new(seed: u64) -> Self {
        Fixture {
            pop: Population::new(),
            models: ModelRegistry::builtin(),
            params: EventParams::default(),
            root: RngStream::new(seed),
            queue: AllocationQueue::new(),
            notes: Vec::new(),
        }
    }

    pub fn ctx(&mut self, cycle: u32) -> EventContext<'_> {
        EventContext {
            pop: &mut self.pop,
            models: &self.models,
            params: &self.params,
            root: &self.root,
            cycle,
            year: 2011 + cycle as i32,
            queue: &mut self.queue,
            notes: &mut self.notes,
        }
    }

    /// Replaces every group of `sub_model` with a constant probability.
    pub fn force(&mut self, sub_model: &str, groups: &[&str], p: f64) {
        for g in groups {
            self.models.insert_logistic(
                sub_model,
                g,
                LogisticModel::constant(format!("{sub_model}/{g}"), p),
            );
        }
    }
}

pub(crate) const PARTNER_GROUPS: [&str; 4] = [
    "never_married_male",
    "previously_married_male",
    "never_married_female",
    "previously_married_female",
];

pub(crate) fn single(pop: &mut Population, age: u32, sex: Sex) -> (PersonId, HouseholdId) {
    let id = pop
        .create_person(NewPerson::new(age, sex).with_employment(Employment::Employed))
        .unwrap();
    let h = pop.create_household(&[id]).unwrap();
    (id, h)
}

/// A couple with children of the given ages, all in one new household.
pub(crate) fn family(
    pop: &mut Population,
    ages: (u32, u32),
    kind: PartnershipKind,
    children: &[u32],
) -> (PersonId, PersonId, HouseholdId) {
    let (m, h) = single(pop, ages.0, Sex::Male);
    let f = pop
        .create_person(NewPerson::new(ages.1, Sex::Female).in_household(h))
        .unwrap();
    pop.link_partners(m, f, kind).unwrap();
    for (i, &age) in children.iter().enumerate() {
        let sex = if i % 2 == 0 { Sex::Female } else { Sex::Male };
        pop.create_person(
            NewPerson::new(age, sex)
                .in_household(h)
                .with_parents(Some(f), Some(m)),
        )
        .unwrap();
    }
    (m, f, h)
}

pub(crate) fn lone_parent(
    pop: &mut Population,
    age: u32,
    children: &[u32],
) -> (PersonId, HouseholdId) {
    let (f, h) = single(pop, age, Sex::Female);
    pop.set_marital_status(f, MaritalStatus::Divorced).unwrap();
    for &a in children {
        pop.create_person(
            NewPerson::new(a, Sex::Male)
                .in_household(h)
                .with_parents(Some(f), None),
        )
        .unwrap();
    }
    (f, h)
}
