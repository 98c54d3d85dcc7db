//! Control totals for reweighting.
//!
//! A control directory holds one CSV per constraint. Each file has one or
//! more dimension columns followed by a `target` column, for example
//! `age_band,sex,marital_status,target`. Recognised dimensions are
//! `age_band` (`00-04` ... `85+`), `age_group` (`child` under 15, `adult`),
//! `sex`, `marital_status`, `employment`, `education`, `student_status` and
//! `household_size` (`3` or an open top category such as `4+`). A
//! `household_size` table is a household-level constraint and may not be
//! combined with person dimensions.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::population::{
    AgeBand, Education, Employment, MaritalStatus, NewPerson, Sex, StudentStatus,
};

/// Age from which a person counts as an adult in the `age_group` dimension.
pub const ADULT_AGE: u32 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dimension {
    AgeBand,
    AgeGroup,
    Sex,
    MaritalStatus,
    Employment,
    Education,
    StudentStatus,
    HouseholdSize,
}

impl Dimension {
    pub const ALL: [Dimension; 8] = [
        Dimension::AgeBand,
        Dimension::AgeGroup,
        Dimension::Sex,
        Dimension::MaritalStatus,
        Dimension::Employment,
        Dimension::Education,
        Dimension::StudentStatus,
        Dimension::HouseholdSize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::AgeBand => "age_band",
            Dimension::AgeGroup => "age_group",
            Dimension::Sex => "sex",
            Dimension::MaritalStatus => "marital_status",
            Dimension::Employment => "employment",
            Dimension::Education => "education",
            Dimension::StudentStatus => "student_status",
            Dimension::HouseholdSize => "household_size",
        }
    }

    /// The person's category code in this dimension. `None` for
    /// `HouseholdSize`, which is not a person attribute.
    pub fn person_value(self, p: &NewPerson) -> Option<String> {
        Some(match self {
            Dimension::AgeBand => AgeBand::of_age(p.age).label(),
            Dimension::AgeGroup => if p.age >= ADULT_AGE { "adult" } else { "child" }.to_string(),
            Dimension::Sex => p.sex.code().to_string(),
            Dimension::MaritalStatus => p.marital_status.code().to_string(),
            Dimension::Employment => p.employment.code().to_string(),
            Dimension::Education => p.education.code().to_string(),
            Dimension::StudentStatus => p.student_status.code().to_string(),
            Dimension::HouseholdSize => return None,
        })
    }

    /// Checks a category value and returns its canonical spelling.
    fn canonical(self, raw: &str) -> Result<String> {
        let raw = raw.trim();
        Ok(match self {
            Dimension::AgeBand => raw.parse::<AgeBand>()?.label(),
            Dimension::AgeGroup => match raw {
                "adult" | "child" => raw.to_string(),
                other => return Err(Error::config(format!("unknown age group {other:?}"))),
            },
            Dimension::Sex => raw.parse::<Sex>()?.code().to_string(),
            Dimension::MaritalStatus => raw.parse::<MaritalStatus>()?.code().to_string(),
            Dimension::Employment => raw.parse::<Employment>()?.code().to_string(),
            Dimension::Education => raw.parse::<Education>()?.code().to_string(),
            Dimension::StudentStatus => raw.parse::<StudentStatus>()?.code().to_string(),
            Dimension::HouseholdSize => raw.parse::<SizeCategory>()?.to_string(),
        })
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.name() == s.trim())
            .ok_or_else(|| Error::config(format!("unknown control dimension {:?}", s.trim())))
    }
}

/// A household-size category: exactly `k` members, or `k` or more.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeCategory {
    Exactly(usize),
    AtLeast(usize),
}

impl SizeCategory {
    pub fn contains(self, size: usize) -> bool {
        match self {
            SizeCategory::Exactly(k) => size == k,
            SizeCategory::AtLeast(k) => size >= k,
        }
    }
}

impl fmt::Display for SizeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeCategory::Exactly(k) => write!(f, "{k}"),
            SizeCategory::AtLeast(k) => write!(f, "{k}+"),
        }
    }
}

impl FromStr for SizeCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::config(format!("bad household size category {s:?}"));
        let (digits, open) = match s.strip_suffix('+') {
            Some(d) => (d, true),
            None => (s, false),
        };
        let k: usize = digits.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        Ok(if open {
            SizeCategory::AtLeast(k)
        } else {
            SizeCategory::Exactly(k)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlLevel {
    Person,
    Household,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlCategory {
    /// One canonical value per dimension of the table.
    pub values: Vec<String>,
    pub target: f64,
}

impl ControlCategory {
    pub fn label(&self) -> String {
        self.values.join("/")
    }
}

/// One cross-tabulated constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTable {
    pub name: String,
    pub dims: Vec<Dimension>,
    pub categories: Vec<ControlCategory>,
}

impl ControlTable {
    /// Validates dimensions and category values.
    pub fn new(
        name: impl Into<String>,
        dims: Vec<Dimension>,
        rows: Vec<(Vec<String>, f64)>,
    ) -> Result<Self> {
        let name = name.into();
        if dims.is_empty() {
            return Err(Error::config(format!(
                "control {name}: no dimension columns"
            )));
        }
        let distinct: BTreeSet<_> = dims.iter().collect();
        if distinct.len() != dims.len() {
            return Err(Error::config(format!("control {name}: repeated dimension")));
        }
        if dims.contains(&Dimension::HouseholdSize) && dims.len() > 1 {
            return Err(Error::config(format!(
                "control {name}: household_size cannot be crossed with person dimensions"
            )));
        }
        let mut seen = BTreeSet::new();
        let mut categories = Vec::with_capacity(rows.len());
        for (raw, target) in rows {
            if raw.len() != dims.len() {
                return Err(Error::config(format!(
                    "control {name}: expected {} values, got {}",
                    dims.len(),
                    raw.len()
                )));
            }
            if !target.is_finite() || target < 0.0 {
                return Err(Error::config(format!(
                    "control {name}: target {target} must be finite and >= 0"
                )));
            }
            let values = dims
                .iter()
                .zip(&raw)
                .map(|(d, v)| d.canonical(v))
                .collect::<Result<Vec<_>>>()?;
            if !seen.insert(values.clone()) {
                return Err(Error::config(format!(
                    "control {name}: duplicate category {}",
                    values.join("/")
                )));
            }
            categories.push(ControlCategory { values, target });
        }
        Ok(ControlTable {
            name,
            dims,
            categories,
        })
    }

    pub fn level(&self) -> ControlLevel {
        if self.dims == [Dimension::HouseholdSize] {
            ControlLevel::Household
        } else {
            ControlLevel::Person
        }
    }

    pub fn total(&self) -> f64 {
        self.categories.iter().map(|c| c.target).sum()
    }

    /// Index of the category a person falls in, if any.
    pub fn person_category(&self, p: &NewPerson) -> Option<usize> {
        let key: Vec<String> = self
            .dims
            .iter()
            .map(|d| d.person_value(p))
            .collect::<Option<_>>()?;
        self.categories.iter().position(|c| c.values == key)
    }

    /// Index of the first category a household size falls in, if any.
    pub fn household_category(&self, size: usize) -> Option<usize> {
        self.categories.iter().position(|c| {
            c.values[0]
                .parse::<SizeCategory>()
                .is_ok_and(|cat| cat.contains(size))
        })
    }
}

/// The full set of constraints, in load order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlSet {
    pub tables: Vec<ControlTable>,
}

impl ControlSet {
    /// Tables in fitting order: load order, with household-level tables
    /// moved to the end when `household_last` is set.
    pub fn fitting_order(&self, household_last: bool) -> Vec<&ControlTable> {
        let mut order: Vec<&ControlTable> = self.tables.iter().collect();
        if household_last {
            order.sort_by_key(|t| t.level() == ControlLevel::Household);
        }
        order
    }
}

/// Loads every `*.csv` in `dir`, sorted by file name; the table name is the
/// file stem.
pub fn load_controls(dir: &Path) -> Result<ControlSet> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::config(format!(
            "{}: no control tables",
            dir.display()
        )));
    }
    let mut tables = Vec::new();
    for path in paths {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|e| Error::csv(&path, e))?;
        let header = rdr.headers().map_err(|e| Error::csv(&path, e))?.clone();
        let target_col = header
            .iter()
            .position(|h| h == "target")
            .ok_or_else(|| Error::config(format!("{}: missing target column", path.display())))?;
        let mut dims = Vec::new();
        let mut dim_cols = Vec::new();
        for (i, h) in header.iter().enumerate() {
            if i != target_col {
                dims.push(h.parse::<Dimension>()?);
                dim_cols.push(i);
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::csv(&path, e))?;
            let values: Vec<String> = dim_cols.iter().map(|&i| rec[i].to_string()).collect();
            let target: f64 = rec[target_col].parse().map_err(|_| {
                Error::config(format!(
                    "{}: bad target {:?}",
                    path.display(),
                    &rec[target_col]
                ))
            })?;
            rows.push((values, target));
        }
        tables.push(ControlTable::new(name, dims, rows)?);
    }
    Ok(ControlSet { tables })
}
