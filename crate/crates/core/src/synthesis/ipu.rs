//! Iterative proportional updating of household weights.

use std::collections::BTreeSet;
use std::path::Path;

use super::controls::{ControlLevel, ControlSet};
use super::sample::ReferenceSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpuOptions {
    /// Convergence threshold on the largest category deviation.
    pub tol: f64,
    pub max_iter: usize,
    /// Lower bound applied to every rescaled weight.
    pub floor: f64,
    /// Fit household-level tables after all person-level tables.
    pub household_last: bool,
}

impl Default for IpuOptions {
    fn default() -> Self {
        IpuOptions {
            tol: 0.01,
            max_iter: 500,
            floor: 1e-9,
            household_last: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryFit {
    pub table: String,
    pub category: String,
    pub level: ControlLevel,
    pub target: f64,
    pub fitted: f64,
    pub deviation: f64,
    /// Sample households with at least one member (or the household itself)
    /// in the category.
    pub contributors: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IpuDiagnostics {
    /// Completed passes over all categories.
    pub iterations: usize,
    pub converged: bool,
    pub max_deviation: f64,
    /// Largest deviation before the first pass and after each pass.
    pub history: Vec<f64>,
    pub categories: Vec<CategoryFit>,
    /// Categories that could not be fitted, and sample persons outside every
    /// category of a person-level table.
    pub warnings: Vec<String>,
}

impl IpuDiagnostics {
    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }

    /// Writes `table, category, level, target, fitted, deviation,
    /// contributors`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record([
            "table",
            "category",
            "level",
            "target",
            "fitted",
            "deviation",
            "contributors",
        ])
        .map_err(|e| Error::csv(path, e))?;
        for c in &self.categories {
            let level = match c.level {
                ControlLevel::Person => "person",
                ControlLevel::Household => "household",
            };
            w.write_record([
                c.table.clone(),
                c.category.clone(),
                level.to_string(),
                format!("{}", c.target),
                format!("{:.6}", c.fitted),
                format!("{:.6}", c.deviation),
                c.contributors.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpuFit {
    pub weights: Vec<f64>,
    pub diagnostics: IpuDiagnostics,
}

/// Deviation of a fitted total from its target: relative for targets of at
/// least one, absolute below that so that zero targets stay well defined.
pub fn category_deviation(fitted: f64, target: f64) -> f64 {
    (fitted - target).abs() / target.max(1.0)
}

struct Entry {
    table: String,
    category: String,
    level: ControlLevel,
    target: f64,
    contribs: Vec<(usize, f64)>,
}

impl Entry {
    fn fitted(&self, w: &[f64]) -> f64 {
        self.contribs.iter().map(|&(h, a)| w[h] * a).sum()
    }
}

/// Reweights the sample households so that weighted counts match every
/// control category.
///
/// Each pass visits every category of every table in fitting order and
/// multiplies the weights of contributing households by `target / fitted`.
/// A household contributes the number of its members in the category for
/// person-level tables, or one for household-level tables. Fitting stops
/// once the largest [`category_deviation`] drops below `tol`, or after
/// `max_iter` passes. Categories with a positive target but nothing to scale
/// are skipped and reported.
pub fn ipu_fit(
    sample: &ReferenceSample,
    controls: &ControlSet,
    opts: &IpuOptions,
) -> Result<IpuFit> {
    if opts.tol.is_nan() || opts.tol <= 0.0 || opts.floor.is_nan() || opts.floor < 0.0 {
        return Err(Error::config("ipu: tol must be > 0 and floor >= 0"));
    }
    let mut warnings = BTreeSet::new();
    let mut entries = Vec::new();
    for table in controls.fitting_order(opts.household_last) {
        let level = table.level();
        let mut contribs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); table.categories.len()];
        let mut uncovered = 0usize;
        for (h, hh) in sample.households.iter().enumerate() {
            match level {
                ControlLevel::Household => {
                    if let Some(c) = table.household_category(hh.size()) {
                        contribs[c].push((h, 1.0));
                    }
                }
                ControlLevel::Person => {
                    let mut counts = vec![0.0; table.categories.len()];
                    for p in &hh.persons {
                        match table.person_category(&p.attrs) {
                            Some(c) => counts[c] += 1.0,
                            None => uncovered += 1,
                        }
                    }
                    for (c, n) in counts.into_iter().enumerate() {
                        if n > 0.0 {
                            contribs[c].push((h, n));
                        }
                    }
                }
            }
        }
        if uncovered > 0 {
            warnings.insert(format!(
                "{}: {uncovered} sample persons fall in no category",
                table.name
            ));
        }
        for (cat, contribs) in table.categories.iter().zip(contribs) {
            if contribs.is_empty() && cat.target > 0.0 {
                warnings.insert(format!(
                    "{}: category {} has target {} but no contributing sample household",
                    table.name,
                    cat.label(),
                    cat.target
                ));
            }
            entries.push(Entry {
                table: table.name.clone(),
                category: cat.label(),
                level,
                target: cat.target,
                contribs,
            });
        }
    }

    let mut w = sample.initial_weights();
    let max_dev = |w: &[f64]| {
        entries
            .iter()
            .map(|e| category_deviation(e.fitted(w), e.target))
            .fold(0.0, f64::max)
    };
    let mut history = vec![max_dev(&w)];
    let mut converged = history[0] < opts.tol;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        for e in &entries {
            let fitted = e.fitted(&w);
            if fitted <= 0.0 {
                if e.target > 0.0 && !e.contribs.is_empty() {
                    warnings.insert(format!(
                        "{}: category {} has target {} but no weighted count",
                        e.table, e.category, e.target
                    ));
                }
                continue;
            }
            let factor = e.target / fitted;
            for &(h, _) in &e.contribs {
                w[h] = (w[h] * factor).max(opts.floor);
            }
        }
        iterations += 1;
        let dev = max_dev(&w);
        history.push(dev);
        converged = dev < opts.tol;
    }

    let categories = entries
        .iter()
        .map(|e| {
            let fitted = e.fitted(&w);
            CategoryFit {
                table: e.table.clone(),
                category: e.category.clone(),
                level: e.level,
                target: e.target,
                fitted,
                deviation: category_deviation(fitted, e.target),
                contributors: e.contribs.len(),
            }
        })
        .collect();
    Ok(IpuFit {
        weights: w,
        diagnostics: IpuDiagnostics {
            iterations,
            converged,
            max_deviation: *history.last().expect("history starts non-empty"),
            history,
            categories,
            warnings: warnings.into_iter().collect(),
        },
    })
}
