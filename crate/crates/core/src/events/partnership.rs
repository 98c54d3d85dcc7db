use std::collections::BTreeSet;

use indexmap::IndexSet;
use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{EventContext, PersonCovariates};
use crate::error::Result;
use crate::population::{
    MaritalStatus, PartnershipKind, PersonId, Population, RelationshipType, Sex,
};
use crate::stochastic::{bernoulli, logistic_prob, weighted_index, weighted_sample};

/// Exponential age-gap compatibility `exp(-lambda * |a - b - mu|)`, with `a`
/// the male's age and `b` the female's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartnerScoreParams {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for PartnerScoreParams {
    fn default() -> Self {
        PartnerScoreParams {
            lambda: 0.2,
            mu: 2.0,
        }
    }
}

pub fn partner_score(age_a: u32, age_b: u32, params: PartnerScoreParams) -> f64 {
    let gap = age_a as f64 - age_b as f64 - params.mu;
    (-params.lambda * gap.abs()).exp()
}

/// Two pools of partner seekers.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchMarket {
    pub males: Vec<PersonId>,
    pub females: Vec<PersonId>,
    pub choice_set_size: usize,
    pub score: PartnerScoreParams,
}

impl MatchMarket {
    pub fn new(choice_set_size: usize, score: PartnerScoreParams) -> Self {
        MatchMarket {
            males: Vec::new(),
            females: Vec::new(),
            choice_set_size,
            score,
        }
    }
}

fn age_of(pop: &Population, id: PersonId) -> u32 {
    pop.person(id).map_or(0, |p| p.age)
}

/// Picks a partner for `seeker` out of `candidates`: a choice set of up to
/// `market.choice_set_size` candidates is drawn uniformly, then one is chosen
/// with probability proportional to its partner score. Returns an index into
/// `candidates`.
pub fn choose_partner<R: Rng + ?Sized>(
    pop: &Population,
    seeker: PersonId,
    seeker_is_male: bool,
    candidates: &IndexSet<PersonId>,
    market: &MatchMarket,
    rng: &mut R,
) -> Result<usize> {
    let k = market.choice_set_size.min(candidates.len());
    let choice: Vec<usize> = index::sample(rng, candidates.len(), k).into_vec();
    let seeker_age = age_of(pop, seeker);
    let weights: Vec<f64> = choice
        .iter()
        .map(|&i| {
            let other = age_of(pop, candidates[i]);
            if seeker_is_male {
                partner_score(seeker_age, other, market.score)
            } else {
                partner_score(other, seeker_age, market.score)
            }
        })
        .collect();
    Ok(choice[weighted_index(&weights, rng)?])
}

/// Matches seekers in random order until one pool is empty. Returns
/// `(male, female)` pairs; unmatched seekers stay in the market.
pub fn run_market<R: Rng + ?Sized>(
    market: &mut MatchMarket,
    pop: &Population,
    rng: &mut R,
) -> Result<Vec<(PersonId, PersonId)>> {
    let mut males: IndexSet<PersonId> = market.males.iter().copied().collect();
    let mut females: IndexSet<PersonId> = market.females.iter().copied().collect();
    let mut seekers: Vec<(PersonId, bool)> = market
        .males
        .iter()
        .map(|&m| (m, true))
        .chain(market.females.iter().map(|&f| (f, false)))
        .collect();
    seekers.shuffle(rng);

    let mut pairs = Vec::new();
    for (seeker, is_male) in seekers {
        if males.is_empty() || females.is_empty() {
            break;
        }
        let (own, other) = if is_male {
            (&mut males, &mut females)
        } else {
            (&mut females, &mut males)
        };
        if !own.contains(&seeker) {
            continue;
        }
        let pick = choose_partner(pop, seeker, is_male, other, market, rng)?;
        let partner = other.swap_remove_index(pick).expect("index in range");
        own.swap_remove(&seeker);
        pairs.push(if is_male {
            (seeker, partner)
        } else {
            (partner, seeker)
        });
    }
    market.males = males.into_iter().collect();
    market.females = females.into_iter().collect();
    Ok(pairs)
}

/// What `balance_pools` did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BalanceOutcome {
    pub added: usize,
    pub trimmed: usize,
}

/// Equalises the pools. The smaller pool is topped up from `reserve` persons
/// of the same sex (weighted by their entry probabilities); if the reserve
/// runs dry the larger pool is trimmed at random.
pub fn balance_pools<R: Rng + ?Sized>(
    market: &mut MatchMarket,
    reserve_males: &[(PersonId, f64)],
    reserve_females: &[(PersonId, f64)],
    rng: &mut R,
) -> Result<BalanceOutcome> {
    let (small, large, reserve) = match market.males.len().cmp(&market.females.len()) {
        std::cmp::Ordering::Equal => return Ok(BalanceOutcome::default()),
        std::cmp::Ordering::Less => (&mut market.males, &mut market.females, reserve_males),
        std::cmp::Ordering::Greater => (&mut market.females, &mut market.males, reserve_females),
    };
    let deficit = large.len() - small.len();
    let in_pool: BTreeSet<PersonId> = small.iter().copied().collect();
    let candidates: Vec<(PersonId, f64)> = reserve
        .iter()
        .copied()
        .filter(|(id, w)| *w > 0.0 && !in_pool.contains(id))
        .collect();
    let k = deficit.min(candidates.len());
    let weights: Vec<f64> = candidates.iter().map(|&(_, w)| w).collect();
    let added = if k > 0 {
        weighted_sample(&weights, k, true, rng)?
    } else {
        Vec::new()
    };
    for i in &added {
        small.push(candidates[*i].0);
    }
    let shortfall = deficit - k;
    if shortfall > 0 {
        let mut drop: Vec<usize> = index::sample(rng, large.len(), shortfall).into_vec();
        drop.sort_unstable_by(|a, b| b.cmp(a));
        for i in drop {
            large.remove(i);
        }
    }
    Ok(BalanceOutcome {
        added: k,
        trimmed: shortfall,
    })
}

/// Every couple with the given relationship type, once, as `(lower id,
/// higher id)`.
pub fn couples(pop: &Population, relationship: RelationshipType) -> Vec<(PersonId, PersonId)> {
    pop.persons()
        .filter(|p| p.relationship_type == relationship)
        .filter_map(|p| p.partner.filter(|&q| p.id < q).map(|q| (p.id, q)))
        .collect()
}

fn sex_of(pop: &Population, id: PersonId) -> Option<Sex> {
    pop.person(id).map(|p| p.sex)
}

/// Person in the couple whose sex is `sex`, else the first.
fn member_of_sex(pop: &Population, (a, b): (PersonId, PersonId), sex: Sex) -> PersonId {
    if sex_of(pop, a) == Some(sex) {
        a
    } else if sex_of(pop, b) == Some(sex) {
        b
    } else {
        a
    }
}

fn other(couple: (PersonId, PersonId), id: PersonId) -> PersonId {
    if couple.0 == id {
        couple.1
    } else {
        couple.0
    }
}

fn status_group(status: MaritalStatus, sex: Sex) -> Option<String> {
    let prefix = if status == MaritalStatus::NeverMarried {
        "never_married"
    } else if status.previously_married() {
        "previously_married"
    } else {
        return None;
    };
    Some(format!("{prefix}_{}", sex.code()))
}

/// Co-resident unpartnered children under 18.
fn dependants(pop: &Population, parent: PersonId) -> Vec<PersonId> {
    pop.coresident_children(parent)
        .into_iter()
        .filter(|&c| {
            pop.person(c)
                .is_some_and(|c| c.age < 18 && c.partner.is_none())
        })
        .collect()
}

/// Market-based partnership formation shared by marriage and cohabitation.
fn partnership_market(
    ctx: &mut EventContext<'_>,
    event: &str,
    sub_model: &str,
    kind: PartnershipKind,
) -> Result<usize> {
    let min_age = ctx.params.partnership_min_age;
    let mut rng = ctx.rng(event, "entry");
    let mut market = MatchMarket::new(ctx.params.choice_set_size, ctx.params.partner_score);
    let mut reserve_males = Vec::new();
    let mut reserve_females = Vec::new();
    let singles: Vec<(PersonId, Sex, String)> = ctx
        .pop
        .persons()
        .filter(|p| p.partner.is_none() && p.age >= min_age)
        .filter_map(|p| status_group(p.marital_status, p.sex).map(|g| (p.id, p.sex, g)))
        .collect();
    for (id, sex, group) in singles {
        let model = ctx.models.logistic(sub_model, &group)?;
        let cov = PersonCovariates::of(ctx.pop, id).expect("live id");
        let p = logistic_prob(model, &cov)?;
        let enters = bernoulli(p, &mut rng)?;
        let (pool, reserve) = match sex {
            Sex::Male => (&mut market.males, &mut reserve_males),
            Sex::Female => (&mut market.females, &mut reserve_females),
        };
        if enters {
            pool.push(id);
        } else {
            reserve.push((id, p));
        }
    }

    let mut rng = ctx.rng(event, "balance");
    let outcome = balance_pools(&mut market, &reserve_males, &reserve_females, &mut rng)?;
    if outcome.trimmed > 0 {
        ctx.note(
            event,
            format!(
                "reserve exhausted, trimmed {} seekers from the larger pool",
                outcome.trimmed
            ),
        );
    }

    let mut rng = ctx.rng(event, "match");
    let pairs = run_market(&mut market, ctx.pop, &mut rng)?;
    debug_assert!(market.males.is_empty() && market.females.is_empty());
    for &(m, f) in &pairs {
        let mut members = vec![m, f];
        let mut seen: BTreeSet<PersonId> = members.iter().copied().collect();
        for parent in [m, f] {
            for d in dependants(ctx.pop, parent) {
                if seen.insert(d) {
                    members.push(d);
                }
            }
        }
        ctx.pop.create_household(&members)?;
        for &x in &members {
            ctx.dequeue(x);
        }
        ctx.pop.link_partners(m, f, kind)?;
    }
    Ok(pairs.len())
}

/// Direct marriage of cohabiting couples (decided by the male partner's
/// model), then market-based marriage of singles. Returns marriages formed.
pub fn marriage(ctx: &mut EventContext<'_>) -> Result<usize> {
    let mut rng = ctx.rng("marriage", "direct");
    let mut direct = 0;
    for couple in couples(ctx.pop, RelationshipType::Cohabiting) {
        let decider = member_of_sex(ctx.pop, couple, Sex::Male);
        let p = ctx.pop.person(decider).expect("live id");
        let Some(group) = status_group(p.marital_status, p.sex) else {
            continue;
        };
        let model = ctx.models.logistic("marriage", &group)?;
        let cov = PersonCovariates::of(ctx.pop, decider).expect("live id");
        if bernoulli(logistic_prob(model, &cov)?, &mut rng)? {
            ctx.pop.formalize_partnership(decider)?;
            direct += 1;
        }
    }
    let indirect = partnership_market(ctx, "marriage", "marriage", PartnershipKind::Married)?;
    Ok(direct + indirect)
}

/// Market-based cohabitation of singles. Returns unions formed.
pub fn cohabitation(ctx: &mut EventContext<'_>) -> Result<usize> {
    partnership_market(
        ctx,
        "cohabitation",
        "cohabitation",
        PartnershipKind::Cohabiting,
    )
}

fn dissolve(
    ctx: &mut EventContext<'_>,
    event: &str,
    sub_model: &str,
    relationship: RelationshipType,
) -> Result<usize> {
    let trigger_sex = ctx.params.dissolution_trigger;
    let custody_p = ctx.params.custody_to_mother_p;
    let mut rng = ctx.rng(event, "decision");
    let mut rng_custody = ctx.rng(event, "custody");
    let mut count = 0;
    for couple in couples(ctx.pop, relationship) {
        let trigger = member_of_sex(ctx.pop, couple, trigger_sex);
        let sex = sex_of(ctx.pop, trigger).expect("live id");
        let model = ctx.models.logistic(sub_model, sex.code())?;
        let cov = PersonCovariates::of(ctx.pop, trigger).expect("live id");
        if !bernoulli(logistic_prob(model, &cov)?, &mut rng)? {
            continue;
        }
        let mut children: BTreeSet<PersonId> =
            ctx.pop.coresident_children(couple.0).into_iter().collect();
        children.extend(ctx.pop.coresident_children(couple.1));
        let leaver = if children.is_empty() {
            let male = member_of_sex(ctx.pop, couple, Sex::Male);
            if sex_of(ctx.pop, male) == Some(Sex::Male) {
                male
            } else {
                couple.1
            }
        } else {
            let mother = member_of_sex(ctx.pop, couple, Sex::Female);
            let keeper = if bernoulli(custody_p, &mut rng_custody)? {
                mother
            } else {
                other(couple, mother)
            };
            other(couple, keeper)
        };
        ctx.pop.unlink_partners(couple.0, couple.1)?;
        if relationship == RelationshipType::Married {
            ctx.pop
                .set_marital_status(couple.0, MaritalStatus::Divorced)?;
            ctx.pop
                .set_marital_status(couple.1, MaritalStatus::Divorced)?;
        }
        ctx.queue.push_single(ctx.pop, leaver)?;
        count += 1;
    }
    Ok(count)
}

/// Dissolution of marriages. Both partners become divorced; one leaves.
pub fn divorce(ctx: &mut EventContext<'_>) -> Result<usize> {
    dissolve(ctx, "divorce", "divorce", RelationshipType::Married)
}

/// Dissolution of cohabiting unions. Marital statuses are unchanged.
pub fn breakup(ctx: &mut EventContext<'_>) -> Result<usize> {
    dissolve(ctx, "breakup", "breakup", RelationshipType::Cohabiting)
}
