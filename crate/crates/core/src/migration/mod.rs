//! Immigration from a weighted pool of template households and emigration of
//! whole households against an age-band by sex target.
//!
//! Immigrants are instantiated unhoused and pushed onto the allocation queue;
//! household-size alignment later decides whether each one forms a new
//! household or joins an existing one.

mod io;


use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::alignment::PendingHousehold;
use crate::error::{Error, Result};
use crate::events::EventContext;
use crate::population::{
    AgeBand, HouseholdId, MaritalStatus, MigrantType, NewPerson, PartnershipKind, Person, PersonId,
    Population, RelationshipType, Sex,
};
use crate::stochastic::weighted_sample;

pub use io::{load_emigration_targets, load_migrant_pool, load_migration_schedule};

/// A household of the base-year migrant population.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrantTemplate {
    pub source: HouseholdId,
    pub persons: Vec<Person>,
    pub weight: f64,
    pub migrant_type: MigrantType,
}

impl MigrantTemplate {
    pub fn size(&self) -> usize {
        self.persons.len()
    }

    /// Creates fresh, unhoused copies of the template's persons. Partner and
    /// parent links between members are recreated; links pointing outside the
    /// template are dropped, and a married person whose spouse is not in the
    /// template becomes separated.
    pub fn instantiate(&self, pop: &mut Population) -> Result<PendingHousehold> {
        let inside: BTreeSet<PersonId> = self.persons.iter().map(|p| p.id).collect();
        let mut mapped: HashMap<PersonId, PersonId> = HashMap::new();
        let mut remaining: Vec<&Person> = self.persons.iter().collect();
        while !remaining.is_empty() {
            let before = remaining.len();
            let mut deferred = Vec::new();
            for p in remaining {
                let parent_ready = |parent: Option<PersonId>| {
                    parent.is_none_or(|x| !inside.contains(&x) || mapped.contains_key(&x))
                };
                if !(parent_ready(p.mother) && parent_ready(p.father)) {
                    deferred.push(p);
                    continue;
                }
                let mut attrs = NewPerson::from(p);
                attrs.partner = None;
                attrs.household = None;
                attrs.relationship_type = RelationshipType::None;
                attrs.mother = p.mother.and_then(|m| mapped.get(&m).copied());
                attrs.father = p.father.and_then(|f| mapped.get(&f).copied());
                attrs.migrant_flag = Some(self.migrant_type);
                let spouse_inside = p.partner.is_some_and(|x| inside.contains(&x));
                if attrs.marital_status == MaritalStatus::Married {
                    attrs.marital_status = if spouse_inside {
                        MaritalStatus::NeverMarried
                    } else {
                        MaritalStatus::Separated
                    };
                }
                mapped.insert(p.id, pop.create_person(attrs)?);
            }
            if deferred.len() == before {
                return Err(Error::integrity(format!(
                    "migrant household {}: cyclic parent links",
                    self.source
                )));
            }
            remaining = deferred;
        }

        for p in &self.persons {
            let Some(partner) = p.partner.filter(|x| inside.contains(x) && p.id < *x) else {
                continue;
            };
            let kind = if p.marital_status == MaritalStatus::Married {
                PartnershipKind::Married
            } else {
                PartnershipKind::Cohabiting
            };
            pop.link_partners(mapped[&p.id], mapped[&partner], kind)?;
        }
        Ok(PendingHousehold::new(
            self.persons.iter().map(|p| mapped[&p.id]).collect(),
        ))
    }
}

/// The static base-year migrant population.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MigrantPool {
    pub templates: Vec<MigrantTemplate>,
}

impl MigrantPool {
    /// Builds templates from the households of `pop`. Every household needs a
    /// `(weight, type)` entry.
    pub fn from_population(
        pop: &Population,
        weights: &BTreeMap<HouseholdId, (f64, MigrantType)>,
    ) -> Result<Self> {
        let mut templates = Vec::new();
        for hh in pop.households() {
            let &(weight, migrant_type) = weights.get(&hh.id).ok_or_else(|| {
                Error::config(format!("migrant household {} has no weight", hh.id))
            })?;
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::config(format!(
                    "migrant household {}: weight {weight} must be finite and >= 0",
                    hh.id
                )));
            }
            let persons = hh
                .members
                .iter()
                .map(|&m| pop.person(m).expect("member exists").clone())
                .collect();
            templates.push(MigrantTemplate {
                source: hh.id,
                persons,
                weight,
                migrant_type,
            });
        }
        Ok(MigrantPool { templates })
    }

    pub fn of_type(&self, migrant_type: MigrantType) -> impl Iterator<Item = &MigrantTemplate> {
        self.templates
            .iter()
            .filter(move |t| t.migrant_type == migrant_type)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    In,
    Out,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::In => "in",
            Direction::Out => "out",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "in" => Ok(Direction::In),
            "out" => Ok(Direction::Out),
            other => Err(Error::config(format!(
                "unknown migration direction {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleEntry {
    pub persons: f64,
    pub conv_rate: f64,
}

/// Person totals per year, migrant type and direction, each with its
/// person-to-household conversion rate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MigrationSchedule {
    entries: BTreeMap<(i32, MigrantType, Direction), ScheduleEntry>,
}

impl MigrationSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        year: i32,
        migrant_type: MigrantType,
        direction: Direction,
        entry: ScheduleEntry,
    ) -> Result<()> {
        if !entry.persons.is_finite() || entry.persons < 0.0 {
            return Err(Error::config(format!(
                "migration schedule {year}/{migrant_type}/{direction}: persons must be >= 0"
            )));
        }
        if !entry.conv_rate.is_finite() || entry.conv_rate <= 0.0 {
            return Err(Error::config(format!(
                "migration schedule {year}/{migrant_type}/{direction}: conv_rate must be > 0"
            )));
        }
        self.entries.insert((year, migrant_type, direction), entry);
        Ok(())
    }

    pub fn get(
        &self,
        year: i32,
        migrant_type: MigrantType,
        direction: Direction,
    ) -> Option<ScheduleEntry> {
        self.entries.get(&(year, migrant_type, direction)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Persons to remove this cycle, by five-year age band and sex.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmigrationTarget {
    counts: BTreeMap<(AgeBand, Sex), u64>,
}

impl EmigrationTarget {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, band: AgeBand, sex: Sex, count: u64) {
        if count == 0 {
            self.counts.remove(&(band, sex));
        } else {
            self.counts.insert((band, sex), count);
        }
    }

    pub fn get(&self, band: AgeBand, sex: Sex) -> u64 {
        self.counts.get(&(band, sex)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = ((AgeBand, Sex), u64)> + '_ {
        self.counts.iter().map(|(&k, &v)| (k, v))
    }

    /// Decrements the cells for `persons` if none would go negative.
    fn try_take(&mut self, persons: &[(AgeBand, Sex)]) -> bool {
        let mut need: BTreeMap<(AgeBand, Sex), u64> = BTreeMap::new();
        for &cell in persons {
            *need.entry(cell).or_default() += 1;
        }
        if need.iter().any(|(&cell, &n)| self.get(cell.0, cell.1) < n) {
            return false;
        }
        for (cell, n) in need {
            let left = self.get(cell.0, cell.1) - n;
            self.set(cell.0, cell.1, left);
        }
        true
    }
}

/// How emigrant households are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum EmigrationWeighting {
    /// Draw a person uniformly and take their household, so a household is
    /// picked with probability proportional to its size.
    #[default]
    PersonUniform,
    /// Every household is equally likely regardless of size.
    HouseholdUniform,
}

impl EmigrationWeighting {
    pub fn code(self) -> &'static str {
        match self {
            EmigrationWeighting::PersonUniform => "person",
            EmigrationWeighting::HouseholdUniform => "household",
        }
    }
}

impl fmt::Display for EmigrationWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for EmigrationWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "person" | "person_uniform" => Ok(EmigrationWeighting::PersonUniform),
            "household" | "household_uniform" => Ok(EmigrationWeighting::HouseholdUniform),
            other => Err(Error::config(format!(
                "unknown emigration weighting {other:?}"
            ))),
        }
    }
}

/// Consecutive rejected draws allowed per remaining target person.
pub const REJECTION_CAP_PER_PERSON: u64 = 50;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmigrationOutcome {
    pub persons_removed: u64,
    pub households_removed: u64,
    /// Target persons left unfilled when the procedure stopped.
    pub shortfall: u64,
    pub rejections: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImmigrationOutcome {
    pub persons_added: u64,
    pub households_added: u64,
}

/// Draws `round(persons_target * conv_rate)` templates of one migrant type,
/// with replacement, proportionally to their calibrated weights.
pub fn sample_immigrant_households<'p, R: Rng + ?Sized>(
    pool: &'p MigrantPool,
    migrant_type: MigrantType,
    persons_target: f64,
    conv_rate: f64,
    rng: &mut R,
) -> Result<Vec<&'p MigrantTemplate>> {
    if !persons_target.is_finite() || persons_target < 0.0 {
        return Err(Error::domain(format!(
            "persons target {persons_target} must be >= 0"
        )));
    }
    if !conv_rate.is_finite() || conv_rate <= 0.0 {
        return Err(Error::domain(format!(
            "conversion rate {conv_rate} must be > 0"
        )));
    }
    let n = (persons_target * conv_rate).round() as usize;
    if n == 0 {
        return Ok(Vec::new());
    }
    let templates: Vec<&MigrantTemplate> = pool.of_type(migrant_type).collect();
    if !templates.iter().any(|t| t.weight > 0.0) {
        return Err(Error::config(format!(
            "no {migrant_type} migrant household with positive weight"
        )));
    }
    let weights: Vec<f64> = templates.iter().map(|t| t.weight).collect();
    Ok(weighted_sample(&weights, n, false, rng)?
        .into_iter()
        .map(|i| templates[i])
        .collect())
}

/// Instantiates the scheduled immigrant households for `ctx.year`, one
/// migrant type at a time, and queues them for alignment.
pub fn immigrate(
    ctx: &mut EventContext<'_>,
    pool: &MigrantPool,
    schedule: &MigrationSchedule,
) -> Result<ImmigrationOutcome> {
    let mut outcome = ImmigrationOutcome::default();
    for &migrant_type in MigrantType::ALL {
        let Some(entry) = schedule.get(ctx.year, migrant_type, Direction::In) else {
            continue;
        };
        let mut rng = ctx.rng("immigration", migrant_type.code());
        let drawn = sample_immigrant_households(
            pool,
            migrant_type,
            entry.persons,
            entry.conv_rate,
            &mut rng,
        )?;
        for template in drawn {
            let group = template.instantiate(ctx.pop)?;
            outcome.persons_added += group.size() as u64;
            outcome.households_added += 1;
            ctx.queue.push(group);
        }
    }
    Ok(outcome)
}

/// Removes whole housed households until `target` is met or no further
/// household fits.
///
/// Each draw picks a household (see [`EmigrationWeighting`]) and commits its
/// removal only if no target cell would go negative. Because the target only
/// shrinks, a rejected household can never fit later and is dropped from the
/// candidates. The loop stops when the target is exhausted, no candidates are
/// left, or `REJECTION_CAP_PER_PERSON` times the remaining target persons
/// consecutive draws have been rejected.
pub fn emigrate_households<R: Rng + ?Sized>(
    pop: &mut Population,
    target: &EmigrationTarget,
    weighting: EmigrationWeighting,
    rng: &mut R,
) -> Result<EmigrationOutcome> {
    let mut remaining = target.clone();
    let mut outcome = EmigrationOutcome::default();
    let mut closed: BTreeSet<HouseholdId> = BTreeSet::new();
    let mut candidates: Vec<HouseholdId> = match weighting {
        EmigrationWeighting::PersonUniform => pop.persons().filter_map(|p| p.household).collect(),
        EmigrationWeighting::HouseholdUniform => pop.household_ids(),
    };
    let mut consecutive = 0u64;

    while remaining.total() > 0 && !candidates.is_empty() {
        let i = rng.gen_range(0..candidates.len());
        let h = candidates[i];
        if closed.contains(&h) {
            candidates.swap_remove(i);
            continue;
        }
        let cells: Vec<(AgeBand, Sex)> = pop
            .household(h)
            .expect("open household exists")
            .members
            .iter()
            .map(|&m| {
                let p = pop.person(m).expect("member exists");
                (AgeBand::of_age(p.age), p.sex)
            })
            .collect();
        closed.insert(h);
        candidates.swap_remove(i);
        if remaining.try_take(&cells) {
            pop.remove_household(h)?;
            outcome.persons_removed += cells.len() as u64;
            outcome.households_removed += 1;
            consecutive = 0;
        } else {
            outcome.rejections += 1;
            consecutive += 1;
            if consecutive >= REJECTION_CAP_PER_PERSON * remaining.total() {
                break;
            }
        }
    }
    outcome.shortfall = remaining.total();
    Ok(outcome)
}

/// Emigration event: removes households against `target` and records any
/// shortfall as a note.
pub fn emigrate(
    ctx: &mut EventContext<'_>,
    target: &EmigrationTarget,
    weighting: EmigrationWeighting,
) -> Result<EmigrationOutcome> {
    let mut rng = ctx.rng("emigration", "draw");
    let outcome = emigrate_households(ctx.pop, target, weighting, &mut rng)?;
    if outcome.shortfall > 0 {
        ctx.note(
            "emigration",
            format!(
                "removed {} of {} target emigrants; {} short",
                outcome.persons_removed,
                target.total(),
                outcome.shortfall
            ),
        );
    }
    Ok(outcome)
}
