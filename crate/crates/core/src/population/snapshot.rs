//! `persons.csv` / `households.csv` snapshot format.
//!
//! `persons.csv` columns, in order: `id, age, sex, marital_status,
//! employment, education, student_status, partner_id, mother_id, father_id,
//! household_id, migrant_flag`. Optional fields are written as empty strings.
//! `households.csv` has `id, member_count`; membership itself is derived from
//! `persons.csv`. Relationship type is not stored: a partnered person is
//! `married` when their marital status is married and `cohabiting` otherwise.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{HouseholdId, MaritalStatus, Person, PersonId, Population, RelationshipType};
use crate::error::{Error, Result};

pub const PERSON_COLUMNS: [&str; 12] = [
    "id",
    "age",
    "sex",
    "marital_status",
    "employment",
    "education",
    "student_status",
    "partner_id",
    "mother_id",
    "father_id",
    "household_id",
    "migrant_flag",
];

pub const HOUSEHOLD_COLUMNS: [&str; 2] = ["id", "member_count"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_snapshot(pop: &Population, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("persons.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    w.write_record(PERSON_COLUMNS)
        .map_err(|e| Error::csv(&path, e))?;
    for p in pop.persons() {
        w.write_record([
            p.id.to_string(),
            p.age.to_string(),
            p.sex.to_string(),
            p.marital_status.to_string(),
            p.employment.to_string(),
            p.education.to_string(),
            p.student_status.to_string(),
            opt(p.partner),
            opt(p.mother),
            opt(p.father),
            opt(p.household),
            opt(p.migrant_flag),
        ])
        .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("households.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    w.write_record(HOUSEHOLD_COLUMNS)
        .map_err(|e| Error::csv(&path, e))?;
    for h in pop.households() {
        w.write_record([h.id.to_string(), h.size().to_string()])
            .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    rec.get(i).unwrap_or("").trim().parse().map_err(|_| {
        Error::config(format!(
            "{}: line {}: bad {} value {:?}",
            path.display(),
            rec.position().map_or(0, |p| p.line()),
            PERSON_COLUMNS.get(i).copied().unwrap_or("?"),
            rec.get(i).unwrap_or("")
        ))
    })
}

fn coded<T: FromStr<Err = Error>>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i).unwrap_or("").parse()
}

fn opt_field<T: FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<Option<T>> {
    if rec.get(i).unwrap_or("").trim().is_empty() {
        Ok(None)
    } else {
        field(rec, i, path).map(Some)
    }
}

fn check_header(rdr: &mut csv::Reader<fs::File>, expected: &[&str], path: &Path) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::csv(path, e))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::config(format!(
            "{}: expected columns {:?}, found {:?}",
            path.display(),
            expected,
            got
        )));
    }
    Ok(())
}

/// Loads a snapshot without enforcing invariants; run `validate_integrity`
/// on the result. Only a disagreement between `households.csv` member counts
/// and `persons.csv` is rejected here.
pub fn read_snapshot(dir: &Path) -> Result<Population> {
    let path = dir.join("persons.csv");
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    check_header(&mut rdr, &PERSON_COLUMNS, &path)?;
    let mut persons = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let id: u64 = field(&rec, 0, &path)?;
        let marital_status: MaritalStatus = coded(&rec, 3)?;
        let partner: Option<u64> = opt_field(&rec, 7, &path)?;
        let relationship_type = match (partner, marital_status) {
            (None, _) => RelationshipType::None,
            (Some(_), MaritalStatus::Married) => RelationshipType::Married,
            (Some(_), _) => RelationshipType::Cohabiting,
        };
        let migrant_flag = match rec.get(11).unwrap_or("").trim() {
            "" => None,
            s => Some(s.parse()?),
        };
        persons.push(Person {
            id: PersonId(id),
            age: field(&rec, 1, &path)?,
            sex: coded(&rec, 2)?,
            marital_status,
            employment: coded(&rec, 4)?,
            education: coded(&rec, 5)?,
            student_status: coded(&rec, 6)?,
            partner: partner.map(PersonId),
            mother: opt_field::<u64>(&rec, 8, &path)?.map(PersonId),
            father: opt_field::<u64>(&rec, 9, &path)?.map(PersonId),
            household: opt_field::<u64>(&rec, 10, &path)?.map(HouseholdId),
            relationship_type,
            migrant_flag,
        });
    }

    let path = dir.join("households.csv");
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    check_header(&mut rdr, &HOUSEHOLD_COLUMNS, &path)?;
    let mut declared = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        let id: u64 = field(&rec, 0, &path)?;
        let count: usize = field(&rec, 1, &path)?;
        declared.insert(HouseholdId(id), count);
    }

    let pop = Population::from_raw(persons, declared.keys().copied().collect());
    for (h, count) in declared {
        let actual = pop.household_size(h).unwrap_or(0);
        if actual != count {
            return Err(Error::integrity(format!(
                "household {h}: households.csv declares {count} members, persons.csv has {actual}"
            )));
        }
    }
    Ok(pop)
}
