//! Reference sample records and `sample.csv`.
//!
//! `sample.csv` has one row per person with columns `household_id, weight,
//! relationship, age, sex, marital_status, employment, education,
//! student_status`. The weight is the household's initial weight and must be
//! the same on every row of a household; it defaults to 1 when the column is
//! absent or empty.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::csvutil::read_rows;
use crate::error::{Error, Result};
use crate::population::{Education, Employment, MaritalStatus, NewPerson, Sex, StudentStatus};

macro_rules! relationship_codes {
    ($($variant:ident => $code:literal),+ $(,)?) => {
        /// A person's relationship to the household reference person.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum RelationshipCode {
            $($variant),+
        }

        impl RelationshipCode {
            pub const ALL: &'static [RelationshipCode] = &[$(RelationshipCode::$variant),+];

            pub fn code(self) -> &'static str {
                match self {
                    $(RelationshipCode::$variant => $code),+
                }
            }
        }

        impl std::str::FromStr for RelationshipCode {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($code => Ok(RelationshipCode::$variant),)+
                    other => Err(Error::config(format!("unknown relationship code {other:?}"))),
                }
            }
        }
    };
}

relationship_codes! {
    Reference => "reference",
    Spouse => "spouse",
    Partner => "partner",
    Child => "child",
    Parent => "parent",
    Grandchild => "grandchild",
    OtherRelative => "other_relative",
    Unrelated => "unrelated",
}

impl std::fmt::Display for RelationshipCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

impl RelationshipCode {
    /// Codes that reveal more than two generations in one household.
    pub fn is_multi_generation(self) -> bool {
        matches!(
            self,
            RelationshipCode::Parent | RelationshipCode::Grandchild
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePerson {
    pub attrs: NewPerson,
    pub relationship: RelationshipCode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleHousehold {
    pub id: u64,
    pub weight: f64,
    pub persons: Vec<SamplePerson>,
}

impl SampleHousehold {
    pub fn size(&self) -> usize {
        self.persons.len()
    }
}

/// Households of the reference sample, in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceSample {
    pub households: Vec<SampleHousehold>,
}

impl ReferenceSample {
    pub fn initial_weights(&self) -> Vec<f64> {
        self.households.iter().map(|h| h.weight).collect()
    }

    pub fn n_persons(&self) -> usize {
        self.households.iter().map(SampleHousehold::size).sum()
    }
}

#[derive(Deserialize)]
struct SampleRow {
    household_id: u64,
    #[serde(default)]
    weight: Option<f64>,
    relationship: String,
    age: u32,
    sex: String,
    marital_status: String,
    employment: String,
    education: String,
    student_status: String,
}

pub fn load_sample(path: &Path) -> Result<ReferenceSample> {
    let mut by_id: BTreeMap<u64, usize> = BTreeMap::new();
    let mut households: Vec<SampleHousehold> = Vec::new();
    for row in read_rows::<SampleRow>(path)? {
        let weight = row.weight.unwrap_or(1.0);
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::config(format!(
                "{}: household {}: weight {weight} must be finite and >= 0",
                path.display(),
                row.household_id
            )));
        }
        let sex: Sex = row.sex.parse()?;
        let attrs = NewPerson {
            marital_status: row.marital_status.parse::<MaritalStatus>()?,
            employment: row.employment.parse::<Employment>()?,
            education: row.education.parse::<Education>()?,
            student_status: row.student_status.parse::<StudentStatus>()?,
            ..NewPerson::new(row.age, sex)
        };
        let person = SamplePerson {
            attrs,
            relationship: row.relationship.parse()?,
        };
        let slot = *by_id.entry(row.household_id).or_insert_with(|| {
            households.push(SampleHousehold {
                id: row.household_id,
                weight,
                persons: Vec::new(),
            });
            households.len() - 1
        });
        if households[slot].weight != weight {
            return Err(Error::config(format!(
                "{}: household {} has conflicting weights",
                path.display(),
                row.household_id
            )));
        }
        households[slot].persons.push(person);
    }
    Ok(ReferenceSample { households })
}
