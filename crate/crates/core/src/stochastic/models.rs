//! Coefficient-table models: binary logit, multinomial logit and rate tables.
//!
//! Coefficients are data. `models/<sub_model>.csv` files carry
//! `group, term, estimate` rows, one logistic model per `(sub_model, group)`.
//! `models/multinomial/<name>.csv` files use the same columns with `group`
//! naming the outcome; the first outcome listed is the base and must have
//! all-zero coefficients. `rates/<name>.csv` files carry any number of key
//! columns followed by a final `probability` column. Lines starting with `#`
//! are comments.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Linear predictors are clamped to this magnitude before `exp`.
pub const PREDICTOR_CLAMP: f64 = 500.0;

/// Name of the term that always evaluates to 1.
pub const INTERCEPT: &str = "intercept";

/// Supplies covariate values by term name.
pub trait Covariates {
    fn value(&self, term: &str) -> Option<f64>;
}

impl Covariates for HashMap<&str, f64> {
    fn value(&self, term: &str) -> Option<f64> {
        self.get(term).copied()
    }
}

impl Covariates for BTreeMap<String, f64> {
    fn value(&self, term: &str) -> Option<f64> {
        self.get(term).copied()
    }
}

impl Covariates for [(&str, f64)] {
    fn value(&self, term: &str) -> Option<f64> {
        self.iter().find(|(k, _)| *k == term).map(|&(_, v)| v)
    }
}

impl<const N: usize> Covariates for [(&str, f64); N] {
    fn value(&self, term: &str) -> Option<f64> {
        self.as_slice().value(term)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub name: String,
    pub terms: Vec<Term>,
}

impl LogisticModel {
    pub fn new(name: impl Into<String>, terms: &[(&str, f64)]) -> Self {
        LogisticModel {
            name: name.into(),
            terms: terms
                .iter()
                .map(|&(n, c)| Term {
                    name: n.to_string(),
                    coefficient: c,
                })
                .collect(),
        }
    }

    /// Model with a single intercept giving probability `p`.
    pub fn constant(name: impl Into<String>, p: f64) -> Self {
        let x = if p <= 0.0 {
            -PREDICTOR_CLAMP
        } else if p >= 1.0 {
            PREDICTOR_CLAMP
        } else {
            (p / (1.0 - p)).ln()
        };
        Self::new(name, &[(INTERCEPT, x)])
    }

    /// Unclamped linear predictor.
    pub fn linear_predictor<C: Covariates + ?Sized>(&self, cov: &C) -> Result<f64> {
        linear_predictor(&self.name, &self.terms, cov)
    }
}

fn linear_predictor<C: Covariates + ?Sized>(name: &str, terms: &[Term], cov: &C) -> Result<f64> {
    let mut x = 0.0;
    for t in terms {
        let v = if t.name == INTERCEPT {
            1.0
        } else {
            cov.value(&t.name).ok_or_else(|| {
                Error::model(format!("model {name}: missing covariate {:?}", t.name))
            })?
        };
        x += t.coefficient * v;
    }
    Ok(x)
}

/// `1 / (1 + exp(-x))` with `x` the clamped linear predictor.
pub fn logistic_prob<C: Covariates + ?Sized>(m: &LogisticModel, cov: &C) -> Result<f64> {
    let x = m
        .linear_predictor(cov)?
        .clamp(-PREDICTOR_CLAMP, PREDICTOR_CLAMP);
    Ok(1.0 / (1.0 + (-x).exp()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialModel {
    pub name: String,
    /// Outcome labels; index 0 is the base outcome with predictor 0.
    pub outcomes: Vec<String>,
    /// Terms for `outcomes[1..]`.
    pub predictors: Vec<Vec<Term>>,
}

impl MultinomialModel {
    pub fn new(name: impl Into<String>, base: &str, others: &[(&str, &[(&str, f64)])]) -> Self {
        let mut outcomes = vec![base.to_string()];
        let mut predictors = Vec::new();
        for (label, terms) in others {
            outcomes.push(label.to_string());
            predictors.push(
                terms
                    .iter()
                    .map(|&(n, c)| Term {
                        name: n.to_string(),
                        coefficient: c,
                    })
                    .collect(),
            );
        }
        MultinomialModel {
            name: name.into(),
            outcomes,
            predictors,
        }
    }

    pub fn outcome_index(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == label)
    }
}

/// Softmax over the clamped linear predictors, base predictor fixed at 0.
pub fn multinomial_probs<C: Covariates + ?Sized>(
    m: &MultinomialModel,
    cov: &C,
) -> Result<Vec<f64>> {
    let mut eta = Vec::with_capacity(m.outcomes.len());
    eta.push(0.0);
    for terms in &m.predictors {
        eta.push(linear_predictor(&m.name, terms, cov)?.clamp(-PREDICTOR_CLAMP, PREDICTOR_CLAMP));
    }
    let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = eta.iter().map(|e| (e - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Probability lookup keyed by discrete covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub name: String,
    pub key_columns: Vec<String>,
    rows: BTreeMap<Vec<String>, f64>,
}

impl RateTable {
    pub fn new(name: impl Into<String>, key_columns: &[&str]) -> Self {
        RateTable {
            name: name.into(),
            key_columns: key_columns.iter().map(|s| s.to_string()).collect(),
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, keys: &[&str], probability: f64) -> Result<()> {
        if keys.len() != self.key_columns.len() {
            return Err(Error::model(format!(
                "rate table {}: expected {} keys, got {}",
                self.name,
                self.key_columns.len(),
                keys.len()
            )));
        }
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::model(format!(
                "rate table {}: probability {probability} outside [0, 1]",
                self.name
            )));
        }
        self.rows
            .insert(keys.iter().map(|s| s.to_string()).collect(), probability);
        Ok(())
    }

    /// Rows in key order.
    pub fn rows(&self) -> impl Iterator<Item = (&[String], f64)> {
        self.rows.iter().map(|(k, &p)| (k.as_slice(), p))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn rate_lookup(t: &RateTable, keys: &[&str]) -> Result<f64> {
    let key: Vec<String> = keys.iter().map(|s| s.to_string()).collect();
    t.rows
        .get(&key)
        .copied()
        .ok_or_else(|| Error::model(format!("rate table {}: no row for {:?}", t.name, keys)))
}

/// All models and rate tables available to a run.
#[derive(Debug, Clone, Default)]
pub struct ModelRegistry {
    logistic: BTreeMap<(String, String), LogisticModel>,
    multinomial: BTreeMap<String, MultinomialModel>,
    rates: BTreeMap<String, RateTable>,
}

macro_rules! builtin {
    ($($path:literal),+ $(,)?) => {
        &[$(($path, include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/", $path)))),+]
    };
}

const BUILTIN_MODELS: &[(&str, &str)] = builtin!(
    "models/fertility.csv",
    "models/cohabitation.csv",
    "models/marriage.csv",
    "models/breakup.csv",
    "models/divorce.csv",
    "models/leave_home.csv",
);

const BUILTIN_MULTINOMIAL: &[(&str, &str)] = builtin!(
    "models/multinomial/education.csv",
    "models/multinomial/employment.csv",
);

const BUILTIN_RATES: &[(&str, &str)] = builtin!(
    "rates/mortality.csv",
    "rates/birth_multiplicity.csv",
    "rates/newborn_sex.csv",
);

fn stem(path: &str) -> &str {
    let file = path.rsplit('/').next().unwrap_or(path);
    file.strip_suffix(".csv").unwrap_or(file)
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn coefficient_rows(origin: &str, text: &str) -> Result<Vec<(String, String, f64)>> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(|e| Error::csv(origin, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["group", "term", "estimate"] {
        return Err(Error::config(format!(
            "{origin}: expected columns group,term,estimate"
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(origin, e))?;
        let estimate: f64 = rec[2]
            .parse()
            .map_err(|_| Error::config(format!("{origin}: bad estimate {:?}", &rec[2])))?;
        rows.push((rec[0].to_string(), rec[1].to_string(), estimate));
    }
    Ok(rows)
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry backed by the coefficient and rate files shipped with the
    /// crate.
    pub fn builtin() -> Self {
        let mut reg = ModelRegistry::new();
        for (path, text) in BUILTIN_MODELS {
            reg.load_logistic_text(stem(path), path, text)
                .expect("builtin model file is valid");
        }
        for (path, text) in BUILTIN_MULTINOMIAL {
            reg.load_multinomial_text(stem(path), path, text)
                .expect("builtin multinomial file is valid");
        }
        for (path, text) in BUILTIN_RATES {
            reg.load_rate_text(stem(path), path, text)
                .expect("builtin rate file is valid");
        }
        reg
    }

    /// Overlays every model file found under `models_dir` (including its
    /// `multinomial/` subdirectory).
    pub fn load_models_dir(&mut self, models_dir: &Path) -> Result<()> {
        for path in csv_files(models_dir)? {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let origin = path.display().to_string();
            self.load_logistic_text(file_stem(&path), &origin, &text)?;
        }
        let multi = models_dir.join("multinomial");
        if multi.is_dir() {
            for path in csv_files(&multi)? {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let origin = path.display().to_string();
                self.load_multinomial_text(file_stem(&path), &origin, &text)?;
            }
        }
        Ok(())
    }

    pub fn load_rates_dir(&mut self, rates_dir: &Path) -> Result<()> {
        for path in csv_files(rates_dir)? {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let origin = path.display().to_string();
            self.load_rate_text(file_stem(&path), &origin, &text)?;
        }
        Ok(())
    }

    fn load_logistic_text(&mut self, sub_model: &str, origin: &str, text: &str) -> Result<()> {
        let mut fresh: BTreeMap<(String, String), LogisticModel> = BTreeMap::new();
        for (group, term, estimate) in coefficient_rows(origin, text)? {
            let key = (sub_model.to_string(), group.clone());
            let model = fresh.entry(key).or_insert_with(|| LogisticModel {
                name: format!("{sub_model}/{group}"),
                terms: Vec::new(),
            });
            if model.terms.iter().any(|t| t.name == term) {
                return Err(Error::config(format!(
                    "{origin}: duplicate term {term} in group {group}"
                )));
            }
            model.terms.push(Term {
                name: term,
                coefficient: estimate,
            });
        }
        self.logistic.extend(fresh);
        Ok(())
    }

    fn load_multinomial_text(&mut self, name: &str, origin: &str, text: &str) -> Result<()> {
        let mut outcomes: Vec<String> = Vec::new();
        let mut terms: Vec<Vec<Term>> = Vec::new();
        for (group, term, estimate) in coefficient_rows(origin, text)? {
            let idx = match outcomes.iter().position(|o| *o == group) {
                Some(i) => i,
                None => {
                    outcomes.push(group);
                    terms.push(Vec::new());
                    outcomes.len() - 1
                }
            };
            terms[idx].push(Term {
                name: term,
                coefficient: estimate,
            });
        }
        if outcomes.len() < 2 {
            return Err(Error::config(format!(
                "{origin}: need at least two outcomes"
            )));
        }
        if terms[0].iter().any(|t| t.coefficient != 0.0) {
            return Err(Error::config(format!(
                "{origin}: base outcome {} must have zero coefficients",
                outcomes[0]
            )));
        }
        terms.remove(0);
        self.multinomial.insert(
            name.to_string(),
            MultinomialModel {
                name: name.to_string(),
                outcomes,
                predictors: terms,
            },
        );
        Ok(())
    }

    fn load_rate_text(&mut self, name: &str, origin: &str, text: &str) -> Result<()> {
        let mut rdr = reader(text);
        let headers = rdr.headers().map_err(|e| Error::csv(origin, e))?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.last() != Some(&"probability") {
            return Err(Error::config(format!(
                "{origin}: last column must be probability"
            )));
        }
        let mut table = RateTable::new(name, &cols[..cols.len() - 1]);
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::csv(origin, e))?;
            let keys: Vec<&str> = rec.iter().take(cols.len() - 1).collect();
            let p: f64 = rec[cols.len() - 1].parse().map_err(|_| {
                Error::config(format!(
                    "{origin}: bad probability {:?}",
                    &rec[cols.len() - 1]
                ))
            })?;
            table
                .insert(&keys, p)
                .map_err(|e| Error::config(format!("{origin}: {e}")))?;
        }
        self.rates.insert(name.to_string(), table);
        Ok(())
    }

    pub fn insert_logistic(&mut self, sub_model: &str, group: &str, model: LogisticModel) {
        self.logistic
            .insert((sub_model.to_string(), group.to_string()), model);
    }

    pub fn insert_multinomial(&mut self, model: MultinomialModel) {
        self.multinomial.insert(model.name.clone(), model);
    }

    pub fn insert_rate(&mut self, table: RateTable) {
        self.rates.insert(table.name.clone(), table);
    }

    pub fn logistic(&self, sub_model: &str, group: &str) -> Result<&LogisticModel> {
        self.logistic
            .get(&(sub_model.to_string(), group.to_string()))
            .ok_or_else(|| Error::model(format!("no model for {sub_model}/{group}")))
    }

    pub fn logistic_models(&self) -> impl Iterator<Item = (&str, &str, &LogisticModel)> {
        self.logistic
            .iter()
            .map(|((s, g), m)| (s.as_str(), g.as_str(), m))
    }

    pub fn multinomial(&self, name: &str) -> Result<&MultinomialModel> {
        self.multinomial
            .get(name)
            .ok_or_else(|| Error::model(format!("no multinomial model {name}")))
    }

    pub fn rate(&self, name: &str) -> Result<&RateTable> {
        self.rates
            .get(name)
            .ok_or_else(|| Error::model(format!("no rate table {name}")))
    }
}

fn file_stem(path: &Path) -> &str {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("")
}

fn csv_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
