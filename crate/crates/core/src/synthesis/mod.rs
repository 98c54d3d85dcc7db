//! Baseline population synthesis: reweight a reference sample against
//! person- and household-level controls, integerise the weights, clone the
//! sample households and link partners and parents from relationship codes.

mod controls;
mod ipu;
mod sample;


use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

pub use controls::{
    load_controls, ControlCategory, ControlLevel, ControlSet, ControlTable, Dimension,
    SizeCategory, ADULT_AGE,
};
pub use ipu::{category_deviation, ipu_fit, CategoryFit, IpuDiagnostics, IpuFit, IpuOptions};
pub use sample::{load_sample, ReferenceSample, RelationshipCode, SampleHousehold, SamplePerson};

use crate::error::{Error, Result};
use crate::population::{
    HouseholdId, MaritalStatus, PartnershipKind, PersonId, Population, RelationshipType, Sex,
};
use crate::stochastic::systematic_pps;

/// Integer household counts from real weights by truncate, replicate,
/// sample: every household keeps `floor(w)` copies, and the
/// `round(sum(w)) - sum(floor(w))` leftover copies go to distinct
/// households drawn with inclusion probability proportional to their
/// fractional remainders.
pub fn trs_integerise<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::domain(format!(
            "weight {w} is not a finite nonnegative number"
        )));
    }
    let mut counts: Vec<u64> = weights.iter().map(|w| w.floor() as u64).collect();
    let remainders: Vec<f64> = weights.iter().map(|w| w - w.floor()).collect();
    let total = weights.iter().sum::<f64>().round() as u64;
    let base: u64 = counts.iter().sum();
    let positive = remainders.iter().filter(|&&r| r > 0.0).count() as u64;
    let extra = total.saturating_sub(base).min(positive) as usize;
    for i in systematic_pps(&remainders, extra, rng)? {
        counts[i] += 1;
    }
    Ok(counts)
}

/// An expanded population with each person's relationship code.
#[derive(Debug, Clone, Default)]
pub struct SyntheticPopulation {
    pub pop: Population,
    pub codes: BTreeMap<PersonId, RelationshipCode>,
    /// Sample household index of every created household.
    pub origin: BTreeMap<HouseholdId, usize>,
}

/// Clones sample household `i` `counts[i]` times with fresh ids. No links
/// are created; see [`link_relationships`].
pub fn expand_population(sample: &ReferenceSample, counts: &[u64]) -> Result<SyntheticPopulation> {
    if counts.len() != sample.households.len() {
        return Err(Error::domain(format!(
            "{} counts for {} sample households",
            counts.len(),
            sample.households.len()
        )));
    }
    let mut out = SyntheticPopulation::default();
    for (i, (hh, &count)) in sample.households.iter().zip(counts).enumerate() {
        for _ in 0..count {
            let mut ids = Vec::with_capacity(hh.size());
            for p in &hh.persons {
                let id = out.pop.create_person(p.attrs.clone())?;
                out.codes.insert(id, p.relationship);
                ids.push(id);
            }
            if ids.is_empty() {
                continue;
            }
            let h = out.pop.create_household(&ids)?;
            out.origin.insert(h, i);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkSummary {
    pub partner_links: usize,
    pub parent_links: usize,
    /// Households where parent links were skipped because the codes span
    /// more than two generations.
    pub multi_generation: usize,
    /// Married persons without a co-resident spouse, recoded as separated.
    pub recoded_separated: usize,
}

/// Links the reference person to a co-resident spouse or partner, and the
/// reference person's children to the reference couple. Households with a
/// parent or grandchild of the reference person get no parent links. Running
/// it again adds nothing.
pub fn link_relationships(
    pop: &mut Population,
    codes: &BTreeMap<PersonId, RelationshipCode>,
) -> Result<LinkSummary> {
    let mut summary = LinkSummary::default();
    for h in pop.household_ids() {
        let members: Vec<(PersonId, RelationshipCode)> = pop
            .household(h)
            .expect("listed household exists")
            .members
            .iter()
            .filter_map(|&m| codes.get(&m).map(|&c| (m, c)))
            .collect();
        let of = |wanted: &[RelationshipCode]| -> Vec<PersonId> {
            members
                .iter()
                .filter(|(_, c)| wanted.contains(c))
                .map(|&(m, _)| m)
                .collect()
        };
        let references = of(&[RelationshipCode::Reference]);
        let partners = of(&[RelationshipCode::Spouse, RelationshipCode::Partner]);
        if references.len() > 1 {
            return Err(Error::integrity(format!(
                "household {h}: more than one reference person"
            )));
        }
        if partners.len() > 1 {
            return Err(Error::integrity(format!(
                "household {h}: more than one spouse or partner of the reference person"
            )));
        }
        let Some(&reference) = references.first() else {
            continue;
        };
        let partner = partners.first().copied();
        if let Some(partner) = partner {
            let already = pop.person(reference).and_then(|p| p.partner) == Some(partner);
            if !already {
                let kind = if codes[&partner] == RelationshipCode::Spouse {
                    PartnershipKind::Married
                } else {
                    PartnershipKind::Cohabiting
                };
                pop.link_partners(reference, partner, kind)?;
                summary.partner_links += 1;
            }
        }

        if members.iter().any(|(_, c)| c.is_multi_generation()) {
            summary.multi_generation += 1;
            continue;
        }
        let parents: Vec<(PersonId, Sex)> = std::iter::once(reference)
            .chain(partner)
            .map(|id| (id, pop.person(id).expect("member exists").sex))
            .collect();
        for child in of(&[RelationshipCode::Child]) {
            for &(parent, sex) in &parents {
                let c = pop.person(child).expect("member exists");
                let slot = if sex == Sex::Female {
                    c.mother
                } else {
                    c.father
                };
                if slot.is_none() {
                    pop.set_parent(child, parent)?;
                    summary.parent_links += 1;
                }
            }
        }
    }

    let stray: Vec<PersonId> = pop
        .persons_with_status(MaritalStatus::Married)
        .filter(|&id| {
            pop.person(id)
                .is_some_and(|p| p.relationship_type != RelationshipType::Married)
        })
        .collect();
    for id in stray {
        pop.set_marital_status(id, MaritalStatus::Separated)?;
        summary.recoded_separated += 1;
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub population: Population,
    pub fit: IpuFit,
    pub counts: Vec<u64>,
    pub links: LinkSummary,
}

/// Fit, integerise, expand and link in one go.
pub fn synthesize<R: Rng + ?Sized>(
    sample: &ReferenceSample,
    controls: &ControlSet,
    opts: &IpuOptions,
    rng: &mut R,
) -> Result<Synthesis> {
    let fit = ipu_fit(sample, controls, opts)?;
    let counts = trs_integerise(&fit.weights, rng)?;
    let mut synthetic = expand_population(sample, &counts)?;
    let links = link_relationships(&mut synthetic.pop, &synthetic.codes)?;
    Ok(Synthesis {
        population: synthetic.pop,
        fit,
        counts,
        links,
    })
}

/// Writes `household_id, initial_weight, weight, count` per sample
/// household.
pub fn write_weights(
    path: &Path,
    sample: &ReferenceSample,
    weights: &[f64],
    counts: &[u64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["household_id", "initial_weight", "weight", "count"])
        .map_err(|e| Error::csv(path, e))?;
    for ((hh, weight), count) in sample.households.iter().zip(weights).zip(counts) {
        w.write_record([
            hh.id.to_string(),
            format!("{}", hh.weight),
            format!("{weight:.6}"),
            count.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
