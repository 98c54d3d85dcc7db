use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{AgeBand, HouseholdId, MaritalStatus, PersonId, Population, RelationshipType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    PartnerMissing {
        person: PersonId,
        partner: PersonId,
    },
    PartnerAsymmetric {
        person: PersonId,
        partner: PersonId,
    },
    PartnersApart {
        a: PersonId,
        b: PersonId,
    },
    MarriedWithoutMarriage {
        person: PersonId,
    },
    ParentMissing {
        person: PersonId,
        parent: PersonId,
    },
    HouseholdMissing {
        person: PersonId,
        household: HouseholdId,
    },
    MemberMismatch {
        household: HouseholdId,
        person: PersonId,
    },
    EmptyHousehold {
        household: HouseholdId,
    },
    UnhousedMismatch {
        person: PersonId,
    },
    IndexMismatch {
        index: &'static str,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PartnerMissing { person, partner } => {
                write!(f, "person {person}: partner {partner} does not exist")
            }
            Violation::PartnerAsymmetric { person, partner } => {
                write!(f, "person {person}: partner {partner} does not link back")
            }
            Violation::PartnersApart { a, b } => {
                write!(f, "partners {a} and {b} live in different households")
            }
            Violation::MarriedWithoutMarriage { person } => {
                write!(
                    f,
                    "person {person}: marital status married without a marriage link"
                )
            }
            Violation::ParentMissing { person, parent } => {
                write!(f, "person {person}: parent {parent} does not exist")
            }
            Violation::HouseholdMissing { person, household } => {
                write!(f, "person {person}: household {household} does not exist")
            }
            Violation::MemberMismatch { household, person } => {
                write!(
                    f,
                    "household {household}: member {person} does not point back"
                )
            }
            Violation::EmptyHousehold { household } => write!(f, "household {household} is empty"),
            Violation::UnhousedMismatch { person } => {
                write!(
                    f,
                    "person {person}: unhoused flag disagrees with household field"
                )
            }
            Violation::IndexMismatch { index } => write!(f, "index {index} differs from a rescan"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntegrityReport {
    pub violations: Vec<Violation>,
}

impl IntegrityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for IntegrityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Full rescan of the registry. Never fails; every broken invariant becomes
/// one entry of the report.
pub fn validate_integrity(pop: &Population) -> IntegrityReport {
    let mut out = Vec::new();

    for p in pop.persons.values() {
        if let Some(partner) = p.partner {
            match pop.persons.get(&partner) {
                None => out.push(Violation::PartnerMissing {
                    person: p.id,
                    partner,
                }),
                Some(q) if q.partner != Some(p.id) => out.push(Violation::PartnerAsymmetric {
                    person: p.id,
                    partner,
                }),
                Some(q) => {
                    if p.id < q.id && p.household != q.household {
                        out.push(Violation::PartnersApart { a: p.id, b: q.id });
                    }
                }
            }
        }
        if p.marital_status == MaritalStatus::Married
            && p.relationship_type != RelationshipType::Married
        {
            out.push(Violation::MarriedWithoutMarriage { person: p.id });
        }
        for parent in [p.mother, p.father].into_iter().flatten() {
            if !pop.persons.contains_key(&parent) {
                out.push(Violation::ParentMissing {
                    person: p.id,
                    parent,
                });
            }
        }
        match p.household {
            Some(h) => {
                match pop.households.get(&h) {
                    None => out.push(Violation::HouseholdMissing {
                        person: p.id,
                        household: h,
                    }),
                    Some(hh) if !hh.members.contains(&p.id) => {
                        out.push(Violation::MemberMismatch {
                            household: h,
                            person: p.id,
                        })
                    }
                    Some(_) => {}
                }
                if pop.unhoused.contains(&p.id) {
                    out.push(Violation::UnhousedMismatch { person: p.id });
                }
            }
            None => {
                if !pop.unhoused.contains(&p.id) {
                    out.push(Violation::UnhousedMismatch { person: p.id });
                }
            }
        }
    }
    for &u in &pop.unhoused {
        if !pop.persons.contains_key(&u) {
            out.push(Violation::UnhousedMismatch { person: u });
        }
    }

    for hh in pop.households.values() {
        if hh.members.is_empty() {
            out.push(Violation::EmptyHousehold { household: hh.id });
        }
        for m in &hh.members {
            if pop.persons.get(m).and_then(|p| p.household) != Some(hh.id) {
                out.push(Violation::MemberMismatch {
                    household: hh.id,
                    person: *m,
                });
            }
        }
    }

    check_indices(pop, &mut out);
    IntegrityReport { violations: out }
}

fn check_indices(pop: &Population, out: &mut Vec<Violation>) {
    let mut band: BTreeMap<AgeBand, BTreeSet<PersonId>> = BTreeMap::new();
    let mut sex: BTreeMap<_, BTreeSet<PersonId>> = BTreeMap::new();
    let mut marital: BTreeMap<_, BTreeSet<PersonId>> = BTreeMap::new();
    for p in pop.persons.values() {
        band.entry(AgeBand::of_age(p.age)).or_default().insert(p.id);
        sex.entry(p.sex).or_default().insert(p.id);
        marital.entry(p.marital_status).or_default().insert(p.id);
    }
    if band != pop.by_band.map {
        out.push(Violation::IndexMismatch { index: "age_band" });
    }
    if sex != pop.by_sex.map {
        out.push(Violation::IndexMismatch { index: "sex" });
    }
    if marital != pop.by_marital.map {
        out.push(Violation::IndexMismatch {
            index: "marital_status",
        });
    }

    let mut sizes: BTreeMap<usize, BTreeSet<HouseholdId>> = BTreeMap::new();
    for hh in pop.households.values() {
        sizes.entry(hh.size()).or_default().insert(hh.id);
    }
    let indexed: BTreeMap<usize, BTreeSet<HouseholdId>> = pop
        .by_size
        .iter()
        .map(|(&k, v)| (k, v.iter().copied().collect()))
        .collect();
    if sizes != indexed {
        out.push(Violation::IndexMismatch {
            index: "household_size",
        });
    }
}
