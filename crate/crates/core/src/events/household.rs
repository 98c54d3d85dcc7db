use super::{EventContext, PersonCovariates};
use crate::error::Result;
use crate::population::{Education, Employment, MaritalStatus, PersonId};
use crate::stochastic::{bernoulli, logistic_prob, multinomial_probs, weighted_index};

/// Unpartnered, never-married adults still living with a parent may move out.
/// Leavers are queued as single-person households. Returns the number of
/// leavers.
pub fn leave_parental_home(ctx: &mut EventContext<'_>) -> Result<usize> {
    let (lo, hi) = (ctx.params.leave_home_min_age, ctx.params.leave_home_max_age);
    let pop = &*ctx.pop;
    let eligible: Vec<PersonId> = pop
        .persons()
        .filter(|p| {
            p.partner.is_none()
                && p.marital_status == MaritalStatus::NeverMarried
                && (lo..=hi).contains(&p.age)
                && p.household.is_some()
                && [p.mother, p.father].into_iter().flatten().any(|parent| {
                    pop.person(parent)
                        .is_some_and(|q| q.household == p.household)
                })
        })
        .map(|p| p.id)
        .collect();

    let mut rng = ctx.rng("leave_home", "decision");
    let mut leavers = Vec::new();
    for id in eligible {
        let p = ctx.pop.person(id).expect("live id");
        let model = ctx.models.logistic("leave_home", p.sex.code())?;
        let cov = PersonCovariates::of(ctx.pop, id).expect("live id");
        if bernoulli(logistic_prob(model, &cov)?, &mut rng)? {
            leavers.push(id);
        }
    }
    for &id in &leavers {
        ctx.queue.push_single(ctx.pop, id)?;
    }
    Ok(leavers.len())
}

/// Redraws education, then labour force status, for everyone at or above the
/// socioeconomic age floor, conditioned on their current state. Returns the
/// number of persons whose education or employment changed.
pub fn update_socioeconomic(ctx: &mut EventContext<'_>) -> Result<usize> {
    let min_age = ctx.params.socioeconomic_min_age;
    let education = ctx.models.multinomial("education")?;
    let employment = ctx.models.multinomial("employment")?;
    let education_outcomes: Vec<Education> = education
        .outcomes
        .iter()
        .map(|o| o.parse())
        .collect::<Result<_>>()?;
    let employment_outcomes: Vec<Employment> = employment
        .outcomes
        .iter()
        .map(|o| o.parse())
        .collect::<Result<_>>()?;

    let mut rng_edu = ctx.rng("socioeconomic", "education");
    let mut rng_emp = ctx.rng("socioeconomic", "employment");
    let ids: Vec<PersonId> = ctx
        .pop
        .persons()
        .filter(|p| p.age >= min_age)
        .map(|p| p.id)
        .collect();
    let mut changed = 0;
    for id in ids {
        let before = ctx.pop.person(id).expect("live id").clone();
        if before.marital_status == MaritalStatus::NotApplicable {
            ctx.pop
                .set_marital_status(id, MaritalStatus::NeverMarried)?;
        }
        let cov = PersonCovariates::of(ctx.pop, id).expect("live id");
        let probs = multinomial_probs(education, &cov)?;
        let new_education = education_outcomes[weighted_index(&probs, &mut rng_edu)?];
        ctx.pop.set_education(id, new_education)?;

        let cov = PersonCovariates::of(ctx.pop, id).expect("live id");
        let probs = multinomial_probs(employment, &cov)?;
        let new_employment = employment_outcomes[weighted_index(&probs, &mut rng_emp)?];
        ctx.pop.set_employment(id, new_employment)?;

        if new_education != before.education || new_employment != before.employment {
            changed += 1;
        }
    }
    Ok(changed)
}
