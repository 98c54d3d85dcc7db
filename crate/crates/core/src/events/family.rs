use std::collections::BTreeSet;

use super::{EventContext, PersonCovariates};
use crate::error::{Error, Result};
use crate::population::{AgeBand, NewPerson, PersonId, RelationshipType, Sex};
use crate::stochastic::{bernoulli, logistic_prob, rate_lookup, weighted_index};

/// Everyone gets one year older.
pub fn ageing(ctx: &mut EventContext<'_>) -> Result<usize> {
    ctx.pop.age_everyone(1);
    Ok(ctx.pop.n_persons())
}

fn fertility_group(relationship: RelationshipType, partnered: bool) -> &'static str {
    match (partnered, relationship) {
        (true, RelationshipType::Married) => "married",
        (true, RelationshipType::Cohabiting) => "cohabiting",
        _ => "single",
    }
}

/// Fertility draw for eligible women, then multiplicity and sex of each
/// baby. Returns the number of newborns.
pub fn birth(ctx: &mut EventContext<'_>) -> Result<usize> {
    let params = ctx.params;
    let mut rng = ctx.rng("birth", "fertility");
    let eligible: Vec<PersonId> = ctx
        .pop
        .persons_of_sex(Sex::Female)
        .filter(|&id| {
            let age = ctx.pop.person(id).map_or(0, |p| p.age);
            (params.fertility_min_age..=params.fertility_max_age).contains(&age)
        })
        .collect();

    let mut mothers = Vec::new();
    for id in eligible {
        let p = ctx.pop.person(id).expect("live id");
        let group = fertility_group(p.relationship_type, p.partner.is_some());
        let model = ctx.models.logistic("fertility", group)?;
        let cov = PersonCovariates::of(ctx.pop, id).expect("live id");
        if bernoulli(logistic_prob(model, &cov)?, &mut rng)? {
            mothers.push(id);
        }
    }
    if mothers.is_empty() {
        return Ok(0);
    }

    let multiplicity = ctx.models.rate("birth_multiplicity")?;
    let mut counts = Vec::new();
    let mut count_weights = Vec::new();
    for (keys, p) in multiplicity.rows() {
        let babies: usize = keys[0]
            .parse()
            .map_err(|_| Error::model(format!("birth_multiplicity: bad count {:?}", keys[0])))?;
        counts.push(babies);
        count_weights.push(p);
    }
    let sex_table = ctx.models.rate("newborn_sex")?;
    let sex_weights = [
        rate_lookup(sex_table, &["male"])?,
        rate_lookup(sex_table, &["female"])?,
    ];

    let mut rng_count = ctx.rng("birth", "multiplicity");
    let mut rng_sex = ctx.rng("birth", "sex");
    let mut born = 0;
    for mother in mothers {
        let babies = counts[weighted_index(&count_weights, &mut rng_count)?];
        let m = ctx.pop.person(mother).expect("live id");
        let household = m.household;
        let father = m
            .partner
            .filter(|&f| ctx.pop.person(f).is_some_and(|f| f.sex == Sex::Male));
        for _ in 0..babies {
            let sex = if weighted_index(&sex_weights, &mut rng_sex)? == 0 {
                Sex::Male
            } else {
                Sex::Female
            };
            let mut baby = NewPerson::new(0, sex).with_parents(Some(mother), father);
            if let Some(h) = household {
                baby = baby.in_household(h);
            }
            let id = ctx.pop.create_person(baby)?;
            if household.is_none() {
                ctx.queue.join_group_of(mother, id)?;
            }
            born += 1;
        }
    }
    Ok(born)
}

/// Mortality draw by age band and sex. Households (or queued groups) left
/// with only young children are removed. Returns the number of deaths.
pub fn death(ctx: &mut EventContext<'_>) -> Result<usize> {
    let table = ctx.models.rate("mortality")?;
    let mut rng = ctx.rng("death", "draw");
    let mut dead = Vec::new();
    for p in ctx.pop.persons() {
        let band = AgeBand::of_age(p.age).label();
        let q = rate_lookup(table, &[band.as_str(), p.sex.code()])?;
        if bernoulli(q, &mut rng)? {
            dead.push(p.id);
        }
    }

    let mut households = BTreeSet::new();
    let mut groups: Vec<Vec<PersonId>> = Vec::new();
    for &id in &dead {
        match ctx.pop.person(id).and_then(|p| p.household) {
            Some(h) => {
                households.insert(h);
            }
            None => {
                if let Some(g) = ctx.queue.group_of(id) {
                    groups.push(ctx.queue.groups()[g].members.clone());
                }
                ctx.dequeue(id);
            }
        }
        ctx.pop.remove_person(id)?;
    }

    let orphan_age = ctx.params.orphan_age;
    let mut orphans = 0;
    for h in households {
        let Some(hh) = ctx.pop.household(h) else {
            continue;
        };
        let all_young = hh
            .members
            .iter()
            .all(|&m| ctx.pop.person(m).is_some_and(|p| p.age < orphan_age));
        if all_young {
            orphans += ctx.pop.remove_household(h)?.len();
        }
    }
    for group in groups {
        let left: Vec<PersonId> = group
            .into_iter()
            .filter(|&m| ctx.pop.person(m).is_some())
            .collect();
        if !left.is_empty()
            && left
                .iter()
                .all(|&m| ctx.pop.person(m).is_some_and(|p| p.age < orphan_age))
        {
            for m in left {
                ctx.dequeue(m);
                ctx.pop.remove_person(m)?;
                orphans += 1;
            }
        }
    }
    if orphans > 0 {
        ctx.note(
            "death",
            format!("removed {orphans} children left without an adult"),
        );
    }
    Ok(dead.len())
}
