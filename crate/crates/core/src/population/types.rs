use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PersonId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HouseholdId(pub u64);

impl fmt::Display for PersonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for HouseholdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Declares a C-like enum with a stable snake_case text code used in every
/// CSV surface.
macro_rules! coded_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $code:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn code(self) -> &'static str {
                match self {
                    $($name::$variant => $code),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                match s.trim() {
                    $($code => Ok($name::$variant),)+
                    other => Err(Error::config(format!(
                        "unknown {} code {:?}", stringify!($name), other
                    ))),
                }
            }
        }
    };
}

coded_enum!(Sex {
    Male => "male",
    Female => "female",
});

coded_enum!(MaritalStatus {
    NotApplicable => "not_applicable",
    NeverMarried => "never_married",
    Married => "married",
    Separated => "separated",
    Divorced => "divorced",
    Widowed => "widowed",
});

coded_enum!(Employment {
    NotApplicable => "not_applicable",
    Employed => "employed",
    Unemployed => "unemployed",
    NotInLabourForce => "not_in_labour_force",
});

coded_enum!(
    /// Highest completed education level.
    Education {
        NotApplicable => "not_applicable",
        Year12OrBelow => "year_12_or_below",
        Certificate => "certificate",
        AdvancedDiplomaDiploma => "advanced_diploma_diploma",
        BachelorDegree => "bachelor_degree",
        GraduateDiplomaCertificate => "graduate_diploma_certificate",
        PostgraduateDegree => "postgraduate_degree",
    }
);

coded_enum!(StudentStatus {
    NotApplicable => "not_applicable",
    PartTime => "part_time",
    FullTime => "full_time",
});

coded_enum!(RelationshipType {
    None => "none",
    Cohabiting => "cohabiting",
    Married => "married",
});

coded_enum!(MigrantType {
    InterRegional => "inter_regional",
    OverseasTemporary => "overseas_temporary",
    OverseasPermanent => "overseas_permanent",
});

impl MaritalStatus {
    /// Divorced, separated or widowed.
    pub fn previously_married(self) -> bool {
        matches!(
            self,
            MaritalStatus::Separated | MaritalStatus::Divorced | MaritalStatus::Widowed
        )
    }
}

impl Education {
    pub fn holds_degree(self) -> bool {
        matches!(
            self,
            Education::BachelorDegree
                | Education::GraduateDiplomaCertificate
                | Education::PostgraduateDegree
        )
    }
}

/// Kind of partnership created by `Population::link_partners`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartnershipKind {
    Cohabiting,
    Married,
}

impl From<PartnershipKind> for RelationshipType {
    fn from(kind: PartnershipKind) -> Self {
        match kind {
            PartnershipKind::Cohabiting => RelationshipType::Cohabiting,
            PartnershipKind::Married => RelationshipType::Married,
        }
    }
}

/// One of the eighteen five-year age groups, `00-04` through `85+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgeBand(u8);

impl AgeBand {
    pub const COUNT: usize = 18;

    pub fn of_age(age: u32) -> Self {
        AgeBand((age / 5).min(17) as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (index < Self::COUNT).then_some(AgeBand(index as u8))
    }

    pub fn all() -> impl Iterator<Item = AgeBand> {
        (0..Self::COUNT as u8).map(AgeBand)
    }

    pub fn lower(self) -> u32 {
        self.0 as u32 * 5
    }

    pub fn label(self) -> String {
        if self.0 == 17 {
            "85+".to_string()
        } else {
            format!("{:02}-{:02}", self.lower(), self.lower() + 4)
        }
    }
}

impl fmt::Display for AgeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for AgeBand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        AgeBand::all()
            .find(|b| b.label() == s)
            .ok_or_else(|| Error::config(format!("unknown age band {s:?}")))
    }
}

/// An individual agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    pub id: PersonId,
    pub age: u32,
    pub sex: Sex,
    pub marital_status: MaritalStatus,
    pub employment: Employment,
    pub education: Education,
    pub student_status: StudentStatus,
    pub partner: Option<PersonId>,
    pub mother: Option<PersonId>,
    pub father: Option<PersonId>,
    /// `None` only while the person waits in the allocation queue.
    pub household: Option<HouseholdId>,
    pub relationship_type: RelationshipType,
    pub migrant_flag: Option<MigrantType>,
}

/// Attributes for `Population::create_person`; everything but the id.
#[derive(Debug, Clone, PartialEq)]
pub struct NewPerson {
    pub age: u32,
    pub sex: Sex,
    pub marital_status: MaritalStatus,
    pub employment: Employment,
    pub education: Education,
    pub student_status: StudentStatus,
    pub partner: Option<PersonId>,
    pub mother: Option<PersonId>,
    pub father: Option<PersonId>,
    pub household: Option<HouseholdId>,
    pub relationship_type: RelationshipType,
    pub migrant_flag: Option<MigrantType>,
}

impl NewPerson {
    /// An unpartnered, unhoused person with "not applicable" statuses for
    /// children and never-married/not-in-labour-force defaults for adults.
    pub fn new(age: u32, sex: Sex) -> Self {
        let adult = age >= 15;
        NewPerson {
            age,
            sex,
            marital_status: if adult {
                MaritalStatus::NeverMarried
            } else {
                MaritalStatus::NotApplicable
            },
            employment: if adult {
                Employment::NotInLabourForce
            } else {
                Employment::NotApplicable
            },
            education: if adult {
                Education::Year12OrBelow
            } else {
                Education::NotApplicable
            },
            student_status: StudentStatus::NotApplicable,
            partner: None,
            mother: None,
            father: None,
            household: None,
            relationship_type: RelationshipType::None,
            migrant_flag: None,
        }
    }

    pub fn in_household(mut self, household: HouseholdId) -> Self {
        self.household = Some(household);
        self
    }

    pub fn with_marital_status(mut self, status: MaritalStatus) -> Self {
        self.marital_status = status;
        self
    }

    pub fn with_employment(mut self, employment: Employment) -> Self {
        self.employment = employment;
        self
    }

    pub fn with_education(mut self, education: Education) -> Self {
        self.education = education;
        self
    }

    pub fn with_parents(mut self, mother: Option<PersonId>, father: Option<PersonId>) -> Self {
        self.mother = mother;
        self.father = father;
        self
    }

    pub(crate) fn into_person(self, id: PersonId) -> Person {
        Person {
            id,
            age: self.age,
            sex: self.sex,
            marital_status: self.marital_status,
            employment: self.employment,
            education: self.education,
            student_status: self.student_status,
            partner: self.partner,
            mother: self.mother,
            father: self.father,
            household: self.household,
            relationship_type: self.relationship_type,
            migrant_flag: self.migrant_flag,
        }
    }
}

impl From<&Person> for NewPerson {
    fn from(p: &Person) -> Self {
        NewPerson {
            age: p.age,
            sex: p.sex,
            marital_status: p.marital_status,
            employment: p.employment,
            education: p.education,
            student_status: p.student_status,
            partner: p.partner,
            mother: p.mother,
            father: p.father,
            household: p.household,
            relationship_type: p.relationship_type,
            migrant_flag: p.migrant_flag,
        }
    }
}

/// A non-empty group of co-resident persons.
#[derive(Debug, Clone, PartialEq)]
pub struct Household {
    pub id: HouseholdId,
    pub members: std::collections::BTreeSet<PersonId>,
}

impl Household {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}
