//! Entity registry for persons and households.
//!
//! Every mutation goes through a `Population` method so that the
//! person/household back-references, the symmetric partner links and the
//! secondary indices stay consistent. `validate_integrity` rescans the whole
//! registry and reports anything that drifted.

mod integrity;
pub mod snapshot;
mod types;

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexSet;
use log::warn;
use rand::Rng;

pub use integrity::{validate_integrity, IntegrityReport, Violation};
pub use types::{
    AgeBand, Education, Employment, Household, HouseholdId, MaritalStatus, MigrantType, NewPerson,
    PartnershipKind, Person, PersonId, RelationshipType, Sex, StudentStatus,
};

use crate::error::{Error, Result};

/// Household counts per size bin. Index `k` holds households of size `k + 1`;
/// the last entry is open-ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bins(pub Vec<u64>);

impl Bins {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Zero-based bin index of a household of `size` persons.
    pub fn index_of(size: usize, n_bins: usize) -> usize {
        size.clamp(1, n_bins) - 1
    }
}

#[derive(Debug, Clone)]
struct KeyIndex<K: Ord> {
    map: BTreeMap<K, BTreeSet<PersonId>>,
}

impl<K: Ord> Default for KeyIndex<K> {
    fn default() -> Self {
        KeyIndex {
            map: BTreeMap::new(),
        }
    }
}

impl<K: Ord + Copy> KeyIndex<K> {
    fn insert(&mut self, key: K, id: PersonId) {
        self.map.entry(key).or_default().insert(id);
    }

    fn remove(&mut self, key: K, id: PersonId) {
        if let Some(set) = self.map.get_mut(&key) {
            set.remove(&id);
            if set.is_empty() {
                self.map.remove(&key);
            }
        }
    }

    fn get(&self, key: K) -> impl Iterator<Item = PersonId> + '_ {
        self.map.get(&key).into_iter().flatten().copied()
    }
}

/// The registry of live persons and households.
#[derive(Debug, Clone, Default)]
pub struct Population {
    persons: BTreeMap<PersonId, Person>,
    households: BTreeMap<HouseholdId, Household>,
    /// Persons detached from any household, waiting for allocation.
    unhoused: BTreeSet<PersonId>,
    next_person: u64,
    next_household: u64,
    by_band: KeyIndex<AgeBand>,
    by_sex: KeyIndex<Sex>,
    by_marital: KeyIndex<MaritalStatus>,
    /// Raw household size -> households of that size. Insertion-ordered so
    /// that uniform host selection is O(1) and reproducible.
    by_size: BTreeMap<usize, IndexSet<HouseholdId>>,
}

impl Population {
    pub fn new() -> Self {
        Self::default()
    }

    // ----- read access -------------------------------------------------

    pub fn person(&self, id: PersonId) -> Option<&Person> {
        self.persons.get(&id)
    }

    pub fn household(&self, id: HouseholdId) -> Option<&Household> {
        self.households.get(&id)
    }

    pub fn persons(&self) -> impl Iterator<Item = &Person> {
        self.persons.values()
    }

    pub fn households(&self) -> impl Iterator<Item = &Household> {
        self.households.values()
    }

    pub fn person_ids(&self) -> Vec<PersonId> {
        self.persons.keys().copied().collect()
    }

    pub fn household_ids(&self) -> Vec<HouseholdId> {
        self.households.keys().copied().collect()
    }

    pub fn n_persons(&self) -> usize {
        self.persons.len()
    }

    pub fn n_households(&self) -> usize {
        self.households.len()
    }

    pub fn unhoused(&self) -> impl Iterator<Item = PersonId> + '_ {
        self.unhoused.iter().copied()
    }

    pub fn n_unhoused(&self) -> usize {
        self.unhoused.len()
    }

    pub fn persons_in_band(&self, band: AgeBand) -> impl Iterator<Item = PersonId> + '_ {
        self.by_band.get(band)
    }

    pub fn persons_of_sex(&self, sex: Sex) -> impl Iterator<Item = PersonId> + '_ {
        self.by_sex.get(sex)
    }

    pub fn persons_with_status(
        &self,
        status: MaritalStatus,
    ) -> impl Iterator<Item = PersonId> + '_ {
        self.by_marital.get(status)
    }

    pub fn household_size(&self, id: HouseholdId) -> Option<usize> {
        self.households.get(&id).map(Household::size)
    }

    /// Persons sharing `id`'s household, excluding `id` itself.
    pub fn co_residents(&self, id: PersonId) -> Vec<PersonId> {
        let Some(hh) = self.person(id).and_then(|p| p.household) else {
            return Vec::new();
        };
        self.households[&hh]
            .members
            .iter()
            .copied()
            .filter(|&m| m != id)
            .collect()
    }

    /// Co-resident children of `parent` (mother or father link).
    pub fn coresident_children(&self, parent: PersonId) -> Vec<PersonId> {
        self.co_residents(parent)
            .into_iter()
            .filter(|&c| {
                let child = &self.persons[&c];
                child.mother == Some(parent) || child.father == Some(parent)
            })
            .collect()
    }

    /// Number of live households whose size falls in `bin` (zero-based) of an
    /// `n_bins` layout.
    pub fn count_in_bin(&self, bin: usize, n_bins: usize) -> usize {
        if bin + 1 < n_bins {
            self.by_size.get(&(bin + 1)).map_or(0, IndexSet::len)
        } else {
            self.by_size.range(n_bins..).map(|(_, s)| s.len()).sum()
        }
    }

    /// Households in `bin` in index order.
    pub fn households_in_bin(&self, bin: usize, n_bins: usize) -> Vec<HouseholdId> {
        if bin + 1 < n_bins {
            self.by_size
                .get(&(bin + 1))
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default()
        } else {
            self.by_size
                .range(n_bins..)
                .flat_map(|(_, s)| s.iter().copied())
                .collect()
        }
    }

    /// Uniformly random household from `bin`, or `None` if the bin is empty.
    pub fn random_household_in_bin<R: Rng + ?Sized>(
        &self,
        bin: usize,
        n_bins: usize,
        rng: &mut R,
    ) -> Option<HouseholdId> {
        let total = self.count_in_bin(bin, n_bins);
        if total == 0 {
            return None;
        }
        let mut pick = rng.gen_range(0..total);
        if bin + 1 < n_bins {
            return self.by_size[&(bin + 1)].get_index(pick).copied();
        }
        for (_, set) in self.by_size.range(n_bins..) {
            if pick < set.len() {
                return set.get_index(pick).copied();
            }
            pick -= set.len();
        }
        None
    }

    /// Household-size histogram with an open-ended top bin.
    pub fn household_size_bins(&self, n_bins: usize) -> Result<Bins> {
        if n_bins == 0 {
            return Err(Error::domain("n_bins must be at least 1"));
        }
        let mut bins = vec![0u64; n_bins];
        for (&size, set) in &self.by_size {
            bins[Bins::index_of(size, n_bins)] += set.len() as u64;
        }
        Ok(Bins(bins))
    }

    // ----- creation ----------------------------------------------------

    pub fn create_person(&mut self, attrs: NewPerson) -> Result<PersonId> {
        if let Some(h) = attrs.household {
            if !self.households.contains_key(&h) {
                return Err(Error::integrity(format!("household {h} does not exist")));
            }
        }
        for (role, parent) in [("mother", attrs.mother), ("father", attrs.father)] {
            if let Some(pid) = parent {
                let Some(p) = self.persons.get(&pid) else {
                    return Err(Error::integrity(format!("{role} {pid} does not exist")));
                };
                if p.age <= attrs.age {
                    warn!(
                        "{role} {pid} (age {}) is not older than child (age {})",
                        p.age, attrs.age
                    );
                }
            }
        }
        if let Some(partner) = attrs.partner {
            let Some(p) = self.persons.get(&partner) else {
                return Err(Error::integrity(format!(
                    "partner {partner} does not exist"
                )));
            };
            if p.partner.is_some() {
                return Err(Error::integrity(format!(
                    "partner {partner} is already partnered"
                )));
            }
            if p.household != attrs.household {
                return Err(Error::integrity(format!(
                    "partner {partner} lives in a different household"
                )));
            }
        }

        let id = PersonId(self.next_person);
        self.next_person += 1;
        let mut person = attrs.into_person(id);
        if let Some(partner) = person.partner {
            if person.relationship_type == RelationshipType::None {
                person.relationship_type = if person.marital_status == MaritalStatus::Married {
                    RelationshipType::Married
                } else {
                    RelationshipType::Cohabiting
                };
            }
            let rel = person.relationship_type;
            let other = self.persons.get_mut(&partner).expect("checked above");
            other.partner = Some(id);
            other.relationship_type = rel;
            if rel == RelationshipType::Married {
                let old = other.marital_status;
                other.marital_status = MaritalStatus::Married;
                self.by_marital.remove(old, partner);
                self.by_marital.insert(MaritalStatus::Married, partner);
            }
        }
        self.index_person(&person);
        match person.household {
            Some(h) => {
                let old = self.households[&h].size();
                self.households.get_mut(&h).unwrap().members.insert(id);
                self.resize_index(h, old, old + 1);
            }
            None => {
                self.unhoused.insert(id);
            }
        }
        self.persons.insert(id, person);
        Ok(id)
    }

    /// Creates a household from `members`. Members that currently live
    /// elsewhere are moved; households emptied by the move are deleted.
    pub fn create_household(&mut self, members: &[PersonId]) -> Result<HouseholdId> {
        if members.is_empty() {
            return Err(Error::integrity("cannot create an empty household"));
        }
        let unique: BTreeSet<PersonId> = members.iter().copied().collect();
        if unique.len() != members.len() {
            return Err(Error::integrity("duplicate member in new household"));
        }
        for m in &unique {
            if !self.persons.contains_key(m) {
                return Err(Error::integrity(format!("person {m} does not exist")));
            }
        }
        let id = HouseholdId(self.next_household);
        self.next_household += 1;
        self.households.insert(
            id,
            Household {
                id,
                members: BTreeSet::new(),
            },
        );
        self.by_size.entry(0).or_default().insert(id);
        for m in members {
            self.place(*m, id);
        }
        Ok(id)
    }

    // ----- moves -------------------------------------------------------

    /// Moves every member of `src` into `dst` and deletes `src`.
    pub fn merge_households(&mut self, src: HouseholdId, dst: HouseholdId) -> Result<HouseholdId> {
        if src == dst {
            return Err(Error::integrity(format!(
                "cannot merge household {src} into itself"
            )));
        }
        let members: Vec<PersonId> = self
            .households
            .get(&src)
            .ok_or_else(|| Error::integrity(format!("household {src} does not exist")))?
            .members
            .iter()
            .copied()
            .collect();
        if !self.households.contains_key(&dst) {
            return Err(Error::integrity(format!("household {dst} does not exist")));
        }
        for m in members {
            self.place(m, dst);
        }
        Ok(dst)
    }

    /// Moves `p` (housed or unhoused) into `to`.
    pub fn move_person(&mut self, p: PersonId, to: HouseholdId) -> Result<()> {
        if !self.persons.contains_key(&p) {
            return Err(Error::integrity(format!("person {p} does not exist")));
        }
        if !self.households.contains_key(&to) {
            return Err(Error::integrity(format!("household {to} does not exist")));
        }
        self.place(p, to);
        Ok(())
    }

    /// Takes `p` out of its household and parks it in the unhoused set.
    pub fn detach_person(&mut self, p: PersonId) -> Result<()> {
        if !self.persons.contains_key(&p) {
            return Err(Error::integrity(format!("person {p} does not exist")));
        }
        self.leave_household(p);
        self.unhoused.insert(p);
        Ok(())
    }

    fn place(&mut self, p: PersonId, to: HouseholdId) {
        if self.persons[&p].household == Some(to) {
            return;
        }
        self.leave_household(p);
        self.unhoused.remove(&p);
        let old = self.households[&to].size();
        self.households.get_mut(&to).unwrap().members.insert(p);
        self.resize_index(to, old, old + 1);
        self.persons.get_mut(&p).unwrap().household = Some(to);
    }

    fn leave_household(&mut self, p: PersonId) {
        let Some(h) = self
            .persons
            .get_mut(&p)
            .and_then(|person| person.household.take())
        else {
            return;
        };
        let hh = self.households.get_mut(&h).unwrap();
        hh.members.remove(&p);
        let new = hh.members.len();
        self.resize_index(h, new + 1, new);
        if new == 0 {
            self.households.remove(&h);
            self.drop_size_entry(h, 0);
        }
    }

    fn resize_index(&mut self, h: HouseholdId, old: usize, new: usize) {
        self.drop_size_entry(h, old);
        self.by_size.entry(new).or_default().insert(h);
    }

    fn drop_size_entry(&mut self, h: HouseholdId, size: usize) {
        if let Some(set) = self.by_size.get_mut(&size) {
            set.swap_remove(&h);
            if set.is_empty() {
                self.by_size.remove(&size);
            }
        }
    }

    // ----- partnerships ------------------------------------------------

    pub fn link_partners(&mut self, a: PersonId, b: PersonId, kind: PartnershipKind) -> Result<()> {
        if a == b {
            return Err(Error::integrity(format!(
                "person {a} cannot partner themselves"
            )));
        }
        for id in [a, b] {
            let p = self
                .persons
                .get(&id)
                .ok_or_else(|| Error::integrity(format!("person {id} does not exist")))?;
            if p.partner.is_some() {
                return Err(Error::integrity(format!(
                    "person {id} is already partnered"
                )));
            }
        }
        for (x, y) in [(a, b), (b, a)] {
            let p = self.persons.get_mut(&x).unwrap();
            p.partner = Some(y);
            p.relationship_type = kind.into();
        }
        if kind == PartnershipKind::Married {
            self.set_status_unchecked(a, MaritalStatus::Married);
            self.set_status_unchecked(b, MaritalStatus::Married);
        }
        Ok(())
    }

    pub fn unlink_partners(&mut self, a: PersonId, b: PersonId) -> Result<()> {
        let pa = self
            .persons
            .get(&a)
            .ok_or_else(|| Error::integrity(format!("person {a} does not exist")))?;
        let pb = self
            .persons
            .get(&b)
            .ok_or_else(|| Error::integrity(format!("person {b} does not exist")))?;
        if pa.partner != Some(b) || pb.partner != Some(a) {
            return Err(Error::integrity(format!(
                "{a} and {b} are not mutual partners"
            )));
        }
        for id in [a, b] {
            let p = self.persons.get_mut(&id).unwrap();
            p.partner = None;
            p.relationship_type = RelationshipType::None;
        }
        Ok(())
    }

    /// Turns an existing cohabiting union into a marriage in place.
    pub fn formalize_partnership(&mut self, a: PersonId) -> Result<()> {
        let b = self
            .persons
            .get(&a)
            .ok_or_else(|| Error::integrity(format!("person {a} does not exist")))?
            .partner
            .ok_or_else(|| Error::integrity(format!("person {a} has no partner")))?;
        for id in [a, b] {
            self.persons.get_mut(&id).unwrap().relationship_type = RelationshipType::Married;
            self.set_status_unchecked(id, MaritalStatus::Married);
        }
        Ok(())
    }

    // ----- attribute updates -------------------------------------------

    pub fn set_marital_status(&mut self, p: PersonId, status: MaritalStatus) -> Result<()> {
        let person = self
            .persons
            .get(&p)
            .ok_or_else(|| Error::integrity(format!("person {p} does not exist")))?;
        if status == MaritalStatus::Married && person.relationship_type != RelationshipType::Married
        {
            return Err(Error::integrity(format!(
                "person {p} cannot be married without a marriage link"
            )));
        }
        self.set_status_unchecked(p, status);
        Ok(())
    }

    /// Records `parent` as the mother or father of `child`, by the parent's
    /// sex. Setting an existing link again is a no-op; replacing a different
    /// parent is an error.
    pub fn set_parent(&mut self, child: PersonId, parent: PersonId) -> Result<()> {
        if child == parent {
            return Err(Error::integrity(format!(
                "person {child} cannot be their own parent"
            )));
        }
        let sex = self
            .persons
            .get(&parent)
            .ok_or_else(|| Error::integrity(format!("parent {parent} does not exist")))?
            .sex;
        let c = self
            .persons
            .get_mut(&child)
            .ok_or_else(|| Error::integrity(format!("person {child} does not exist")))?;
        let slot = match sex {
            Sex::Female => &mut c.mother,
            Sex::Male => &mut c.father,
        };
        match *slot {
            Some(existing) if existing != parent => Err(Error::integrity(format!(
                "person {child} already has {} {existing}",
                if sex == Sex::Female {
                    "mother"
                } else {
                    "father"
                }
            ))),
            _ => {
                *slot = Some(parent);
                Ok(())
            }
        }
    }

    fn set_status_unchecked(&mut self, p: PersonId, status: MaritalStatus) {
        let person = self.persons.get_mut(&p).unwrap();
        let old = std::mem::replace(&mut person.marital_status, status);
        if old != status {
            self.by_marital.remove(old, p);
            self.by_marital.insert(status, p);
        }
    }

    pub fn set_employment(&mut self, p: PersonId, employment: Employment) -> Result<()> {
        self.persons
            .get_mut(&p)
            .ok_or_else(|| Error::integrity(format!("person {p} does not exist")))?
            .employment = employment;
        Ok(())
    }

    pub fn set_education(&mut self, p: PersonId, education: Education) -> Result<()> {
        self.persons
            .get_mut(&p)
            .ok_or_else(|| Error::integrity(format!("person {p} does not exist")))?
            .education = education;
        Ok(())
    }

    /// Adds `years` to every person's age.
    pub fn age_everyone(&mut self, years: u32) {
        for person in self.persons.values_mut() {
            let old = AgeBand::of_age(person.age);
            person.age += years;
            let new = AgeBand::of_age(person.age);
            if old != new {
                self.by_band.remove(old, person.id);
                self.by_band.insert(new, person.id);
            }
        }
    }

    // ----- removal -----------------------------------------------------

    /// Removes one person. A surviving spouse becomes widowed, a surviving
    /// cohabiting partner just loses the link, and children lose the parent
    /// reference.
    pub fn remove_person(&mut self, p: PersonId) -> Result<Person> {
        if !self.persons.contains_key(&p) {
            return Err(Error::integrity(format!("person {p} does not exist")));
        }
        self.leave_household(p);
        self.unhoused.remove(&p);
        let person = self.persons.remove(&p).unwrap();
        self.unindex_person(&person);
        if let Some(partner) = person.partner {
            self.bereave(partner, p);
        }
        for child in self.persons.values_mut() {
            if child.mother == Some(p) {
                child.mother = None;
            }
            if child.father == Some(p) {
                child.father = None;
            }
        }
        Ok(person)
    }

    /// Removes a household together with all its members.
    pub fn remove_household(&mut self, h: HouseholdId) -> Result<Vec<Person>> {
        let members: Vec<PersonId> = self
            .households
            .get(&h)
            .ok_or_else(|| Error::integrity(format!("household {h} does not exist")))?
            .members
            .iter()
            .copied()
            .collect();
        let gone: BTreeSet<PersonId> = members.iter().copied().collect();
        let mut removed = Vec::with_capacity(members.len());
        for m in &members {
            self.leave_household(*m);
            let person = self.persons.remove(m).unwrap();
            self.unindex_person(&person);
            removed.push(person);
        }
        for person in self.persons.values_mut() {
            if person.mother.is_some_and(|m| gone.contains(&m)) {
                person.mother = None;
            }
            if person.father.is_some_and(|f| gone.contains(&f)) {
                person.father = None;
            }
        }
        let bereaved: Vec<(PersonId, PersonId)> = removed
            .iter()
            .filter_map(|p| p.partner.filter(|x| !gone.contains(x)).map(|x| (x, p.id)))
            .collect();
        for (survivor, lost) in bereaved {
            warn!("person {survivor} lost a partner living in removed household {h}");
            self.bereave(survivor, lost);
        }
        Ok(removed)
    }

    /// Clears `survivor`'s link to a removed partner. A marriage ended this
    /// way leaves the survivor widowed.
    fn bereave(&mut self, survivor: PersonId, lost: PersonId) {
        let Some(other) = self.persons.get_mut(&survivor) else {
            return;
        };
        if other.partner != Some(lost) {
            return;
        }
        other.partner = None;
        let was_married = other.relationship_type == RelationshipType::Married;
        other.relationship_type = RelationshipType::None;
        if was_married {
            self.set_status_unchecked(survivor, MaritalStatus::Widowed);
        }
    }

    // ----- indices -----------------------------------------------------

    fn index_person(&mut self, p: &Person) {
        self.by_band.insert(AgeBand::of_age(p.age), p.id);
        self.by_sex.insert(p.sex, p.id);
        self.by_marital.insert(p.marital_status, p.id);
    }

    fn unindex_person(&mut self, p: &Person) {
        self.by_band.remove(AgeBand::of_age(p.age), p.id);
        self.by_sex.remove(p.sex, p.id);
        self.by_marital.remove(p.marital_status, p.id);
    }

    /// Builds a population from raw records without any consistency checks.
    /// Used by snapshot loading; call `validate_integrity` afterwards.
    pub(crate) fn from_raw(persons: Vec<Person>, household_ids: Vec<HouseholdId>) -> Self {
        let mut pop = Population::default();
        for h in household_ids {
            pop.households.insert(
                h,
                Household {
                    id: h,
                    members: BTreeSet::new(),
                },
            );
            pop.next_household = pop.next_household.max(h.0 + 1);
        }
        for p in persons {
            pop.next_person = pop.next_person.max(p.id.0 + 1);
            match p.household {
                Some(h) => {
                    if let Some(hh) = pop.households.get_mut(&h) {
                        hh.members.insert(p.id);
                    }
                    pop.next_household = pop.next_household.max(h.0 + 1);
                }
                None => {
                    pop.unhoused.insert(p.id);
                }
            }
            pop.index_person(&p);
            pop.persons.insert(p.id, p);
        }
        let sizes: Vec<(HouseholdId, usize)> =
            pop.households.values().map(|h| (h.id, h.size())).collect();
        for (h, size) in sizes {
            pop.by_size.entry(size).or_default().insert(h);
        }
        pop
    }

    #[cfg(test)]
    pub(crate) fn person_mut_unchecked(&mut self, id: PersonId) -> &mut Person {
        self.persons.get_mut(&id).unwrap()
    }
}
