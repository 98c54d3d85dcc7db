use super::testkit::*;
use super::*;
use crate::population::{
    validate_integrity, Education, Employment, MaritalStatus, NewPerson, PartnershipKind,
    RelationshipType, Sex,
};
use crate::stochastic::models::INTERCEPT;
use crate::stochastic::{LogisticModel, MultinomialModel, RateTable};

fn clean(f: &Fixture) {
    let report = validate_integrity(&f.pop);
    assert!(report.is_clean(), "{report}");
}

fn zero_mortality(f: &mut Fixture) {
    let mut t = RateTable::new("mortality", &["age_band", "sex"]);
    for band in crate::population::AgeBand::all() {
        for sex in ["male", "female"] {
            t.insert(&[band.label().as_str(), sex], 0.0).unwrap();
        }
    }
    f.models.insert_rate(t);
}

fn single_births(f: &mut Fixture) {
    let mut t = RateTable::new("birth_multiplicity", &["babies"]);
    t.insert(&["1"], 1.0).unwrap();
    f.models.insert_rate(t);
}

#[test]
fn ageing_adds_one_year() {
    let mut f = Fixture::new(1);
    let ids: Vec<_> = [0, 34, 85]
        .iter()
        .map(|&a| single(&mut f.pop, a, Sex::Male).0)
        .collect();
    ageing(&mut f.ctx(0)).unwrap();
    let ages: Vec<u32> = ids.iter().map(|&i| f.pop.person(i).unwrap().age).collect();
    assert_eq!(ages, vec![1, 35, 86]);
    assert_eq!(f.pop.n_persons(), 3);
    ageing(&mut f.ctx(1)).unwrap();
    assert_eq!(f.pop.person(ids[1]).unwrap().age, 36);
    clean(&f);
}

#[test]
fn no_eligible_women_no_births() {
    let mut f = Fixture::new(1);
    single(&mut f.pop, 30, Sex::Male);
    single(&mut f.pop, 60, Sex::Female);
    single(&mut f.pop, 12, Sex::Female);
    f.force("fertility", &["single", "cohabiting", "married"], 1.0);
    assert_eq!(birth(&mut f.ctx(0)).unwrap(), 0);
}

#[test]
fn fertility_group_follows_relationship() {
    let mut f = Fixture::new(2);
    single_births(&mut f);
    let (_, wife, h) = family(&mut f.pop, (32, 30), PartnershipKind::Married, &[]);
    let (single_woman, _) = single(&mut f.pop, 30, Sex::Female);
    f.force("fertility", &["single", "cohabiting"], 0.0);
    f.force("fertility", &["married"], 1.0);
    assert_eq!(birth(&mut f.ctx(0)).unwrap(), 1);
    let baby = f.pop.persons().find(|p| p.age == 0).unwrap();
    assert_eq!(baby.mother, Some(wife));
    assert_eq!(baby.father, f.pop.person(wife).unwrap().partner);
    assert_eq!(baby.household, Some(h));
    assert!(f.pop.coresident_children(single_woman).is_empty());
    clean(&f);
}

#[test]
fn birth_count_is_binomial() {
    let mut f = Fixture::new(3);
    single_births(&mut f);
    for _ in 0..10_000 {
        single(&mut f.pop, 25, Sex::Female);
    }
    f.force("fertility", &["single", "cohabiting", "married"], 0.1);
    let born = birth(&mut f.ctx(0)).unwrap() as i64;
    assert!((born - 1000).abs() <= 60, "{born}");
}

#[test]
fn twins_share_mother_and_household() {
    let mut f = Fixture::new(4);
    let mut t = RateTable::new("birth_multiplicity", &["babies"]);
    t.insert(&["2"], 1.0).unwrap();
    f.models.insert_rate(t);
    let (mother, h) = single(&mut f.pop, 28, Sex::Female);
    f.force("fertility", &["single"], 1.0);
    assert_eq!(birth(&mut f.ctx(0)).unwrap(), 2);
    assert_eq!(f.pop.household_size(h), Some(3));
    assert_eq!(f.pop.coresident_children(mother).len(), 2);
    clean(&f);
}

#[test]
fn queued_mother_keeps_baby_in_her_group() {
    let mut f = Fixture::new(5);
    single_births(&mut f);
    let (mother, _) = single(&mut f.pop, 28, Sex::Female);
    f.queue.push_single(&mut f.pop, mother).unwrap();
    f.force("fertility", &["single"], 1.0);
    assert_eq!(birth(&mut f.ctx(0)).unwrap(), 1);
    assert_eq!(f.queue.len(), 1);
    assert_eq!(f.queue.groups()[0].members.len(), 2);
    assert_eq!(f.pop.n_unhoused(), 2);
}

#[test]
fn zero_mortality_no_deaths() {
    let mut f = Fixture::new(6);
    zero_mortality(&mut f);
    for a in [0, 40, 99] {
        single(&mut f.pop, a, Sex::Female);
    }
    assert_eq!(death(&mut f.ctx(0)).unwrap(), 0);
    assert_eq!(f.pop.n_persons(), 3);
}

fn certain_death_at_or_above(f: &mut Fixture, age: u32) {
    let mut t = RateTable::new("mortality", &["age_band", "sex"]);
    for band in crate::population::AgeBand::all() {
        let p = if band.lower() >= age { 1.0 } else { 0.0 };
        for sex in ["male", "female"] {
            t.insert(&[band.label().as_str(), sex], p).unwrap();
        }
    }
    f.models.insert_rate(t);
}

#[test]
fn surviving_spouse_is_widowed() {
    let mut f = Fixture::new(7);
    certain_death_at_or_above(&mut f, 70);
    let (husband, wife, h) = family(&mut f.pop, (72, 60), PartnershipKind::Married, &[]);
    assert_eq!(death(&mut f.ctx(0)).unwrap(), 1);
    assert!(f.pop.person(husband).is_none());
    let w = f.pop.person(wife).unwrap();
    assert_eq!(w.marital_status, MaritalStatus::Widowed);
    assert_eq!(w.partner, None);
    assert_eq!(w.relationship_type, RelationshipType::None);
    assert_eq!(f.pop.household_size(h), Some(1));
    clean(&f);
}

#[test]
fn orphaned_children_are_removed_with_their_household() {
    let mut f = Fixture::new(8);
    certain_death_at_or_above(&mut f, 40);
    let (_, h) = lone_parent(&mut f.pop, 42, &[5, 9]);
    let (_, other) = single(&mut f.pop, 30, Sex::Male);
    assert_eq!(death(&mut f.ctx(0)).unwrap(), 1);
    assert!(f.pop.household(h).is_none());
    assert_eq!(f.pop.n_persons(), 1);
    assert!(f.pop.household(other).is_some());
    assert!(f
        .notes
        .iter()
        .any(|n| n.event == "death" && n.message.contains('2')));
    clean(&f);
}

#[test]
fn partner_score_shape() {
    let params = PartnerScoreParams {
        lambda: 0.2,
        mu: 2.0,
    };
    assert_eq!(partner_score(32, 30, params), 1.0);
    assert_eq!(partner_score(35, 30, params), partner_score(29, 30, params));
    let p = PartnerScoreParams {
        lambda: 0.2,
        mu: 0.0,
    };
    assert!((partner_score(35, 30, p) - (-1.0f64).exp()).abs() < 1e-15);
    assert!(partner_score(90, 18, p) > 0.0);
}

#[test]
fn market_of_one_pair() {
    let mut f = Fixture::new(9);
    let (m, _) = single(&mut f.pop, 30, Sex::Male);
    let (w, _) = single(&mut f.pop, 30, Sex::Female);
    let mut market = MatchMarket::new(30, PartnerScoreParams::default());
    market.males.push(m);
    market.females.push(w);
    let pairs = run_market(&mut market, &f.pop, &mut RngStream::new(1)).unwrap();
    assert_eq!(pairs, vec![(m, w)]);
    assert!(market.males.is_empty() && market.females.is_empty());
}

#[test]
fn equal_pools_clear() {
    let mut f = Fixture::new(10);
    let mut market = MatchMarket::new(30, PartnerScoreParams::default());
    for i in 0..50 {
        market
            .males
            .push(single(&mut f.pop, 20 + i % 30, Sex::Male).0);
        market
            .females
            .push(single(&mut f.pop, 22 + i % 25, Sex::Female).0);
    }
    let pairs = run_market(&mut market, &f.pop, &mut RngStream::new(2)).unwrap();
    assert_eq!(pairs.len(), 50);
    assert!(market.males.is_empty() && market.females.is_empty());
    let mut seen = std::collections::BTreeSet::new();
    for (m, w) in pairs {
        assert!(seen.insert(m) && seen.insert(w));
        assert_eq!(f.pop.person(m).unwrap().sex, Sex::Male);
        assert_eq!(f.pop.person(w).unwrap().sex, Sex::Female);
    }
}

#[test]
fn partner_choice_frequency() {
    let mut f = Fixture::new(11);
    let (seeker, _) = single(&mut f.pop, 26, Sex::Male);
    let (young, _) = single(&mut f.pop, 25, Sex::Female);
    let (old, _) = single(&mut f.pop, 45, Sex::Female);
    let lambda = 0.1;
    let market = MatchMarket::new(30, PartnerScoreParams { lambda, mu: 0.0 });
    let candidates: indexmap::IndexSet<_> = [young, old].into_iter().collect();
    let mut rng = RngStream::new(3);
    let n = 100_000;
    let hits = (0..n)
        .filter(|_| {
            let i = choose_partner(&f.pop, seeker, true, &candidates, &market, &mut rng).unwrap();
            candidates[i] == young
        })
        .count();
    let p = (-lambda).exp() / ((-lambda).exp() + (-19.0 * lambda).exp());
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    let freq = hits as f64 / n as f64;
    assert!((freq - p).abs() < 4.0 * sigma, "{freq} vs {p}");
}

#[test]
fn balance_cases() {
    let mut f = Fixture::new(12);
    let males: Vec<_> = (0..10)
        .map(|_| single(&mut f.pop, 30, Sex::Male).0)
        .collect();
    let females: Vec<_> = (0..10)
        .map(|_| single(&mut f.pop, 30, Sex::Female).0)
        .collect();
    let reserve: Vec<(PersonId, f64)> = (0..8)
        .map(|_| (single(&mut f.pop, 30, Sex::Female).0, 0.2))
        .collect();
    let mut rng = RngStream::new(4);

    let mut market = MatchMarket::new(30, PartnerScoreParams::default());
    market.males = males.clone();
    market.females = females.clone();
    let out = balance_pools(&mut market, &[], &reserve, &mut rng).unwrap();
    assert_eq!(out, BalanceOutcome::default());

    market.females = females[..5].to_vec();
    let out = balance_pools(&mut market, &[], &reserve, &mut rng).unwrap();
    assert_eq!(
        out,
        BalanceOutcome {
            added: 5,
            trimmed: 0
        }
    );
    assert_eq!(market.females.len(), 10);

    market.females = females[..5].to_vec();
    market.males = males.clone();
    let out = balance_pools(&mut market, &[], &reserve[..3], &mut rng).unwrap();
    assert_eq!(
        out,
        BalanceOutcome {
            added: 3,
            trimmed: 2
        }
    );
    assert_eq!(market.females.len(), 8);
    assert_eq!(market.males.len(), 8);
}

#[test]
fn nothing_to_marry() {
    let mut f = Fixture::new(13);
    single(&mut f.pop, 10, Sex::Male);
    assert_eq!(marriage(&mut f.ctx(0)).unwrap(), 0);
    assert_eq!(cohabitation(&mut f.ctx(0)).unwrap(), 0);
}

#[test]
fn direct_marriage_keeps_household() {
    let mut f = Fixture::new(14);
    let (m, w, h) = family(&mut f.pop, (30, 29), PartnershipKind::Cohabiting, &[2]);
    f.force("marriage", &PARTNER_GROUPS, 1.0);
    assert_eq!(marriage(&mut f.ctx(0)).unwrap(), 1);
    for id in [m, w] {
        let p = f.pop.person(id).unwrap();
        assert_eq!(p.marital_status, MaritalStatus::Married);
        assert_eq!(p.relationship_type, RelationshipType::Married);
        assert_eq!(p.household, Some(h));
    }
    assert_eq!(f.pop.household_size(h), Some(3));
    clean(&f);
}

#[test]
fn indirect_marriage_bookkeeping() {
    let mut f = Fixture::new(15);
    let (man, h1) = single(&mut f.pop, 34, Sex::Male);
    let (mother, h2) = lone_parent(&mut f.pop, 31, &[4, 17, 19]);
    let (flatmate, h3) = single(&mut f.pop, 50, Sex::Male);
    f.pop
        .set_marital_status(flatmate, MaritalStatus::Widowed)
        .unwrap();
    f.force("marriage", &PARTNER_GROUPS, 0.0);
    f.force(
        "marriage",
        &["never_married_male", "previously_married_female"],
        1.0,
    );
    let before = f.pop.n_households();
    assert_eq!(marriage(&mut f.ctx(0)).unwrap(), 1);
    let h = f.pop.person(man).unwrap().household.unwrap();
    assert_eq!(f.pop.person(mother).unwrap().household, Some(h));
    assert_eq!(f.pop.person(man).unwrap().partner, Some(mother));
    // The 4- and 17-year-olds follow; the 19-year-old stays behind.
    assert_eq!(f.pop.household_size(h), Some(4));
    assert_eq!(f.pop.household_size(h2), Some(1));
    assert!(f.pop.household(h1).is_none());
    assert!(f.pop.household(h3).is_some());
    let after = f.pop.n_households();
    assert!(after + 2 > before && after <= before + 1);
    clean(&f);
}

#[test]
fn cohabitation_pairs_share_household_and_keep_status() {
    let mut f = Fixture::new(16);
    for i in 0..20 {
        single(&mut f.pop, 25 + i, Sex::Male);
        let (w, _) = single(&mut f.pop, 24 + i, Sex::Female);
        if i % 3 == 0 {
            f.pop
                .set_marital_status(w, MaritalStatus::Divorced)
                .unwrap();
        }
    }
    f.force("cohabitation", &PARTNER_GROUPS, 0.5);
    let formed = cohabitation(&mut f.ctx(0)).unwrap();
    assert!(formed > 0);
    let pairs = couples(&f.pop, RelationshipType::Cohabiting);
    assert_eq!(pairs.len(), formed);
    for (a, b) in pairs {
        let (pa, pb) = (f.pop.person(a).unwrap(), f.pop.person(b).unwrap());
        assert_eq!(pa.household, pb.household);
        assert_ne!(pa.marital_status, MaritalStatus::Married);
        assert_ne!(pb.marital_status, MaritalStatus::Married);
    }
    // Pools are balanced before matching, so nobody who entered is left over.
    let unpartnered_entrants = f
        .notes
        .iter()
        .filter(|n| n.message.contains("trimmed"))
        .count();
    assert!(unpartnered_entrants <= 1);
    clean(&f);
}

#[test]
fn never_married_male_entry_uses_its_own_model() {
    let mut f = Fixture::new(17);
    let (m, _) = single(&mut f.pop, 30, Sex::Male);
    single(&mut f.pop, 16, Sex::Female);
    f.force("cohabitation", &PARTNER_GROUPS, 0.0);
    f.models.insert_logistic(
        "cohabitation",
        "never_married_male",
        LogisticModel::constant("x", 1.0),
    );
    // Only the man enters and no woman is old enough to top up the pool.
    assert_eq!(cohabitation(&mut f.ctx(0)).unwrap(), 0);
    assert_eq!(f.pop.person(m).unwrap().partner, None);
    assert!(f.notes.iter().any(|n| n.message.contains("trimmed 1")));
}

#[test]
fn childless_divorce_male_leaves() {
    let mut f = Fixture::new(18);
    let (m, w, h) = family(&mut f.pop, (40, 38), PartnershipKind::Married, &[]);
    f.force("divorce", &["male", "female"], 1.0);
    assert_eq!(divorce(&mut f.ctx(0)).unwrap(), 1);
    assert_eq!(f.pop.person(w).unwrap().household, Some(h));
    assert_eq!(f.pop.person(m).unwrap().household, None);
    assert_eq!(
        f.queue.groups(),
        &[crate::alignment::PendingHousehold::new(vec![m])]
    );
    for id in [m, w] {
        assert_eq!(
            f.pop.person(id).unwrap().marital_status,
            MaritalStatus::Divorced
        );
    }
}

#[test]
fn custody_to_mother_father_leaves_alone() {
    let mut f = Fixture::new(19);
    f.params.custody_to_mother_p = 1.0;
    let (m, w, h) = family(&mut f.pop, (40, 38), PartnershipKind::Married, &[6, 9]);
    f.force("divorce", &["male", "female"], 1.0);
    assert_eq!(divorce(&mut f.ctx(0)).unwrap(), 1);
    assert_eq!(f.pop.household_size(h), Some(3));
    assert_eq!(f.pop.coresident_children(w).len(), 2);
    assert_eq!(f.queue.groups()[0].members, vec![m]);

    f.params.custody_to_mother_p = 0.0;
    let (m2, w2, h2) = family(&mut f.pop, (40, 38), PartnershipKind::Married, &[6]);
    f.queue.take();
    divorce(&mut f.ctx(1)).unwrap();
    assert_eq!(f.pop.person(m2).unwrap().household, Some(h2));
    assert_eq!(f.queue.groups()[0].members, vec![w2]);
}

#[test]
fn breakup_keeps_marital_status() {
    let mut f = Fixture::new(20);
    let (m, w, _) = family(&mut f.pop, (30, 30), PartnershipKind::Cohabiting, &[]);
    let (hm, hw, _) = family(&mut f.pop, (30, 30), PartnershipKind::Married, &[]);
    f.force("breakup", &["male", "female"], 1.0);
    f.force("divorce", &["male", "female"], 0.0);
    assert_eq!(divorce(&mut f.ctx(0)).unwrap(), 0);
    assert_eq!(breakup(&mut f.ctx(0)).unwrap(), 1);
    assert_eq!(
        f.pop.person(m).unwrap().marital_status,
        MaritalStatus::NeverMarried
    );
    assert_eq!(
        f.pop.person(w).unwrap().relationship_type,
        RelationshipType::None
    );
    assert_eq!(f.pop.person(hm).unwrap().partner, Some(hw));
}

#[test]
fn no_couples_no_dissolutions() {
    let mut f = Fixture::new(21);
    single(&mut f.pop, 30, Sex::Male);
    assert_eq!(divorce(&mut f.ctx(0)).unwrap(), 0);
    assert_eq!(breakup(&mut f.ctx(0)).unwrap(), 0);
}

#[test]
fn divorce_and_breakup_populations_are_disjoint() {
    let mut f = Fixture::new(22);
    for i in 0..10 {
        let kind = if i % 2 == 0 {
            PartnershipKind::Married
        } else {
            PartnershipKind::Cohabiting
        };
        family(&mut f.pop, (30 + i, 28 + i), kind, &[]);
    }
    let married: std::collections::BTreeSet<_> = couples(&f.pop, RelationshipType::Married)
        .into_iter()
        .collect();
    let cohabiting: std::collections::BTreeSet<_> = couples(&f.pop, RelationshipType::Cohabiting)
        .into_iter()
        .collect();
    assert_eq!(married.len(), 5);
    assert_eq!(cohabiting.len(), 5);
    assert!(married.is_disjoint(&cohabiting));
}

#[test]
fn leaving_home() {
    let mut f = Fixture::new(23);
    let (_, _, h) = family(
        &mut f.pop,
        (55, 52),
        PartnershipKind::Married,
        &[22, 25, 12],
    );
    let kids = f.pop.coresident_children(
        f.pop
            .household(h)
            .unwrap()
            .members
            .iter()
            .next()
            .copied()
            .unwrap(),
    );
    // A partnered adult child living with parents is not eligible.
    let partnered = kids
        .iter()
        .copied()
        .find(|&k| f.pop.person(k).unwrap().age == 25)
        .unwrap();
    let spouse = f
        .pop
        .create_person(NewPerson::new(26, Sex::Male).in_household(h))
        .unwrap();
    f.pop
        .link_partners(partnered, spouse, PartnershipKind::Cohabiting)
        .unwrap();
    f.force("leave_home", &["male", "female"], 1.0);
    let before = f.pop.household_size(h).unwrap();
    assert_eq!(leave_parental_home(&mut f.ctx(0)).unwrap(), 1);
    assert_eq!(f.pop.household_size(h), Some(before - 1));
    let leaver = f.queue.groups()[0].members[0];
    assert_eq!(f.pop.person(leaver).unwrap().age, 22);
    assert!(f.pop.person(partnered).unwrap().household.is_some());
    clean(&f);
}

#[test]
fn identity_socioeconomic_transition() {
    let mut f = Fixture::new(24);
    let mut edu_others: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    for e in &Education::ALL[2..] {
        edu_others.push((
            e.code().to_string(),
            vec![
                (INTERCEPT.to_string(), -200.0),
                (format!("edu_{}", e.code()), 400.0),
            ],
        ));
    }
    let edu_terms: Vec<Vec<(&str, f64)>> = edu_others
        .iter()
        .map(|(_, t)| t.iter().map(|(n, c)| (n.as_str(), *c)).collect())
        .collect();
    let others: Vec<(&str, &[(&str, f64)])> = edu_others
        .iter()
        .zip(&edu_terms)
        .map(|((o, _), t)| (o.as_str(), t.as_slice()))
        .collect();
    f.models.insert_multinomial(MultinomialModel::new(
        "education",
        "year_12_or_below",
        &others,
    ));
    f.models.insert_multinomial(MultinomialModel::new(
        "employment",
        "employed",
        &[
            (
                "unemployed",
                &[(INTERCEPT, -200.0), ("emp_unemployed", 400.0)],
            ),
            (
                "not_in_labour_force",
                &[(INTERCEPT, -200.0), ("emp_not_in_labour_force", 400.0)],
            ),
        ],
    ));
    let mut people = Vec::new();
    for (i, e) in Education::ALL[1..].iter().enumerate() {
        let emp = Employment::ALL[1 + i % 3];
        let id = f
            .pop
            .create_person(
                NewPerson::new(30, Sex::Female)
                    .with_education(*e)
                    .with_employment(emp),
            )
            .unwrap();
        f.pop.create_household(&[id]).unwrap();
        people.push((id, *e, emp));
    }
    assert_eq!(update_socioeconomic(&mut f.ctx(0)).unwrap(), 0);
    for (id, e, emp) in people {
        let p = f.pop.person(id).unwrap();
        assert_eq!((p.education, p.employment), (e, emp));
    }
}

#[test]
fn uniform_socioeconomic_transition() {
    let mut f = Fixture::new(25);
    f.models.insert_multinomial(MultinomialModel::new(
        "employment",
        "employed",
        &[
            ("unemployed", &[(INTERCEPT, 0.0)]),
            ("not_in_labour_force", &[(INTERCEPT, 0.0)]),
        ],
    ));
    for _ in 0..30_000 {
        single(&mut f.pop, 40, Sex::Male);
    }
    let child = f.pop.create_person(NewPerson::new(10, Sex::Male)).unwrap();
    f.pop.create_household(&[child]).unwrap();
    update_socioeconomic(&mut f.ctx(0)).unwrap();
    let n = 30_000.0f64;
    for status in [
        Employment::Employed,
        Employment::Unemployed,
        Employment::NotInLabourForce,
    ] {
        let k = f
            .pop
            .persons()
            .filter(|p| p.age == 40 && p.employment == status)
            .count() as f64;
        let p = 1.0f64 / 3.0;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert!((k - n * p).abs() < 4.0 * sigma, "{status}: {k}");
    }
    let c = f.pop.person(child).unwrap();
    assert_eq!(c.employment, Employment::NotApplicable);
    assert_eq!(c.education, Education::NotApplicable);
    assert_eq!(c.marital_status, MaritalStatus::NotApplicable);
}

#[test]
fn queue_helpers() {
    let mut f = Fixture::new(26);
    let (a, h) = single(&mut f.pop, 30, Sex::Male);
    let b = f
        .pop
        .create_person(NewPerson::new(31, Sex::Male).in_household(h))
        .unwrap();
    f.queue.push_single(&mut f.pop, a).unwrap();
    assert!(f.queue.contains(a));
    assert_eq!(f.pop.household_size(h), Some(1));
    assert_eq!(f.queue.n_persons(), 1);
    // Re-queueing does not duplicate.
    f.queue.push_single(&mut f.pop, a).unwrap();
    assert_eq!(f.queue.len(), 1);
    assert!(f.queue.remove_person(a));
    assert!(f.queue.is_empty());
    assert!(!f.queue.remove_person(b));
}
