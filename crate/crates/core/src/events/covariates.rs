use crate::population::{Education, Employment, PersonId, Population};
use crate::stochastic::Covariates;

/// Model covariates of one person, derived from the registry.
///
/// Recognised terms: `age`, `age_sq`, `employed`, `holds_degree`,
/// `has_children`, `has_one_child`, `has_two_or_more_children`,
/// `age_of_youngest_child` (0 without children), `age_65_plus`,
/// `edu_<level>`, `emp_<status>` and age-band/children indicators of the form
/// `age_<lo>_<hi>_<no_child|one_child|two_or_more_children>`. Children are the
/// person's co-resident children.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonCovariates {
    pub age: u32,
    pub employment: Employment,
    pub education: Education,
    pub n_children: usize,
    pub youngest_child_age: Option<u32>,
}

impl PersonCovariates {
    pub fn of(pop: &Population, id: PersonId) -> Option<Self> {
        let p = pop.person(id)?;
        let children = pop.coresident_children(id);
        let youngest_child_age = children
            .iter()
            .filter_map(|&c| pop.person(c).map(|c| c.age))
            .min();
        Some(PersonCovariates {
            age: p.age,
            employment: p.employment,
            education: p.education,
            n_children: children.len(),
            youngest_child_age,
        })
    }

    fn children_class(&self) -> &'static str {
        match self.n_children {
            0 => "no_child",
            1 => "one_child",
            _ => "two_or_more_children",
        }
    }

    fn band_indicator(&self, rest: &str) -> Option<f64> {
        let mut parts = rest.splitn(3, '_');
        let lo: u32 = parts.next()?.parse().ok()?;
        let hi: u32 = parts.next()?.parse().ok()?;
        let class = parts.next()?;
        if !matches!(class, "no_child" | "one_child" | "two_or_more_children") {
            return None;
        }
        let hit = (lo..=hi).contains(&self.age) && class == self.children_class();
        Some(flag(hit))
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Covariates for PersonCovariates {
    fn value(&self, term: &str) -> Option<f64> {
        let age = self.age as f64;
        Some(match term {
            "age" => age,
            "age_sq" => age * age,
            "employed" => flag(self.employment == Employment::Employed),
            "holds_degree" => flag(self.education.holds_degree()),
            "has_children" => flag(self.n_children > 0),
            "has_one_child" => flag(self.n_children == 1),
            "has_two_or_more_children" => flag(self.n_children >= 2),
            "age_of_youngest_child" => self.youngest_child_age.unwrap_or(0) as f64,
            "age_65_plus" => flag(self.age >= 65),
            _ => {
                if let Some(code) = term.strip_prefix("edu_") {
                    return Some(flag(self.education.code() == code));
                }
                if let Some(code) = term.strip_prefix("emp_") {
                    return Some(flag(self.employment.code() == code));
                }
                return term
                    .strip_prefix("age_")
                    .and_then(|rest| self.band_indicator(rest));
            }
        })
    }
}
