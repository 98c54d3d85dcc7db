//! Greedy household-size alignment.
//!
//! Households that need a home (leavers, dissolved partners, immigrants) are
//! placed one at a time. For each one every option is scored: start a new
//! household, or join an existing household of size `s` for each bin `s`.
//! The option that leaves the smallest standard deviation of relative bin
//! surpluses `D[k] / T[k]` wins, where `D = B - T` is the current bin count
//! minus the target.
//!
//! Bins are numbered `1..=n` in [`AllocationOption`] and stored zero-based in
//! vectors. The last bin is open-ended.

mod problem;
mod procedure;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use problem::{AlignmentOutcome, AlignmentProblem};
pub use procedure::{
    align_households, Aligner, AllocationLog, AllocationRecord, HostFilter, PendingHousehold,
    TraceRow,
};

/// Penalty multiplier for a nonzero surplus in a bin whose target is 0.
pub const ZERO_TARGET_PENALTY: f64 = 1e6;

/// How a merge into a top-bin household is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TopBinSemantics {
    /// Score the move as `D*[n] += 1`, as the ranking pseudocode does.
    #[default]
    PaperLiteral,
    /// Score the move as no change: the host was already in the top bin and
    /// stays there.
    Consistent,
}

impl TopBinSemantics {
    pub fn code(self) -> &'static str {
        match self {
            TopBinSemantics::PaperLiteral => "paper",
            TopBinSemantics::Consistent => "consistent",
        }
    }
}

impl fmt::Display for TopBinSemantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TopBinSemantics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "paper_literal" => Ok(TopBinSemantics::PaperLiteral),
            "consistent" => Ok(TopBinSemantics::Consistent),
            other => Err(Error::config(format!(
                "unknown top-bin semantics {other:?} (expected paper or consistent)"
            ))),
        }
    }
}

/// One placement choice for an unallocated household.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AllocationOption {
    NewHousehold,
    /// Join a host household currently in bin `s` (`1..=n`).
    JoinBin(usize),
}

impl AllocationOption {
    /// Option number: 0 for a new household, `s` for `JoinBin(s)`. Ties in
    /// score go to the lower number.
    pub fn index(self) -> usize {
        match self {
            AllocationOption::NewHousehold => 0,
            AllocationOption::JoinBin(s) => s,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            AllocationOption::NewHousehold
        } else {
            AllocationOption::JoinBin(i)
        }
    }
}

impl fmt::Display for AllocationOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AllocationOption::NewHousehold => f.write_str("new"),
            AllocationOption::JoinBin(s) => write!(f, "join_{s}"),
        }
    }
}

/// Options sorted best-first with their scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub options: Vec<(AllocationOption, f64)>,
}

impl RankResult {
    pub fn best(&self) -> AllocationOption {
        self.options[0].0
    }

    pub fn order(&self) -> Vec<AllocationOption> {
        self.options.iter().map(|&(o, _)| o).collect()
    }

    pub fn score_of(&self, option: AllocationOption) -> Option<f64> {
        self.options
            .iter()
            .find(|&&(o, _)| o == option)
            .map(|&(_, s)| s)
    }
}

/// `D = B - T` per bin.
pub fn surplus(bins: &[u64], target: &[u64]) -> Result<Vec<i64>> {
    if bins.len() != target.len() {
        return Err(Error::domain(format!(
            "{} bins but {} targets",
            bins.len(),
            target.len()
        )));
    }
    Ok(bins
        .iter()
        .zip(target)
        .map(|(&b, &t)| b as i64 - t as i64)
        .collect())
}

/// Relative surplus of one bin, with the zero-target rule applied.
pub fn relative_surplus(d: i64, t: u64) -> f64 {
    if t == 0 {
        if d == 0 {
            0.0
        } else {
            d.unsigned_abs() as f64 * ZERO_TARGET_PENALTY
        }
    } else {
        d as f64 / t as f64
    }
}

/// Sample standard deviation (`n - 1` denominator) of `D[k] / T[k]`.
pub fn score(d: &[i64], t: &[u64]) -> Result<f64> {
    if d.len() != t.len() {
        return Err(Error::domain(format!(
            "|D| = {} but |T| = {}",
            d.len(),
            t.len()
        )));
    }
    if d.len() < 2 {
        return Err(Error::domain("standard deviation needs at least two bins"));
    }
    let r: Vec<f64> = d
        .iter()
        .zip(t)
        .map(|(&d, &t)| relative_surplus(d, t))
        .collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let ss: f64 = r.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((ss / (n - 1.0)).sqrt())
}

/// Surplus changes `(zero-based bin, delta)` used to score `option` for a
/// household of `h_size` persons.
pub fn scored_changes(
    option: AllocationOption,
    h_size: usize,
    n: usize,
    semantics: TopBinSemantics,
) -> Vec<(usize, i64)> {
    let x = h_size.min(n);
    match option {
        AllocationOption::NewHousehold => vec![(x - 1, 1)],
        AllocationOption::JoinBin(s) if s < n => vec![(s - 1, -1), ((x + s).min(n) - 1, 1)],
        AllocationOption::JoinBin(_) => match semantics {
            TopBinSemantics::PaperLiteral => vec![(n - 1, 1)],
            TopBinSemantics::Consistent => Vec::new(),
        },
    }
}

/// Surplus changes actually caused by carrying out `option`. A merge into a
/// top-bin household leaves every bin count unchanged.
pub fn applied_changes(option: AllocationOption, h_size: usize, n: usize) -> Vec<(usize, i64)> {
    let x = h_size.min(n);
    match option {
        AllocationOption::NewHousehold => vec![(x - 1, 1)],
        AllocationOption::JoinBin(s) if s < n => vec![(s - 1, -1), ((x + s).min(n) - 1, 1)],
        AllocationOption::JoinBin(_) => Vec::new(),
    }
}

fn check_rank_inputs(h_size: usize, d: &[i64], t: &[u64]) -> Result<usize> {
    if h_size == 0 {
        return Err(Error::domain("household size must be at least 1"));
    }
    if d.len() != t.len() {
        return Err(Error::domain(format!(
            "|D| = {} but |T| = {}",
            d.len(),
            t.len()
        )));
    }
    if d.len() < 2 {
        return Err(Error::domain("ranking needs at least two bins"));
    }
    Ok(d.len())
}

fn sort_options(mut scored: Vec<(AllocationOption, f64)>) -> RankResult {
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.index().cmp(&b.0.index())));
    RankResult { options: scored }
}

/// Ranks the `n + 1` placement options for a household of `h_size` persons.
///
/// Each option touches at most two bins, so the score is updated from the
/// mean and sum of squared deviations of the current ratios instead of being
/// recomputed.
pub fn rank_best_size(
    h_size: usize,
    d: &[i64],
    t: &[u64],
    semantics: TopBinSemantics,
) -> Result<RankResult> {
    let n = check_rank_inputs(h_size, d, t)?;
    let nf = n as f64;
    let r: Vec<f64> = d
        .iter()
        .zip(t)
        .map(|(&d, &t)| relative_surplus(d, t))
        .collect();
    let mean = r.iter().sum::<f64>() / nf;
    let m2: f64 = r.iter().map(|v| (v - mean) * (v - mean)).sum();

    let eval = |changes: &[(usize, i64)]| -> f64 {
        let mut ss = m2;
        let mut shift = 0.0;
        for &(k, delta) in changes {
            let new = relative_surplus(d[k] + delta, t[k]);
            ss += (new - mean) * (new - mean) - (r[k] - mean) * (r[k] - mean);
            shift += new - r[k];
        }
        let dm = shift / nf;
        ss -= nf * dm * dm;
        (ss.max(0.0) / (nf - 1.0)).sqrt()
    };

    let scored = (0..=n)
        .map(|i| {
            let option = AllocationOption::from_index(i);
            (option, eval(&scored_changes(option, h_size, n, semantics)))
        })
        .collect();
    Ok(sort_options(scored))
}

/// Reference ranking: builds every hypothetical `D*` and scores it from
/// scratch.
pub fn brute_force_rank(
    h_size: usize,
    d: &[i64],
    t: &[u64],
    semantics: TopBinSemantics,
) -> Result<RankResult> {
    let n = check_rank_inputs(h_size, d, t)?;
    let x = h_size.min(n);
    let mut scored = Vec::with_capacity(n + 1);
    let mut new = d.to_vec();
    new[x - 1] += 1;
    scored.push((AllocationOption::NewHousehold, score(&new, t)?));
    for s in 1..=n {
        let mut star = d.to_vec();
        if s < n {
            star[s - 1] -= 1;
            star[(x + s).min(n) - 1] += 1;
        } else if semantics == TopBinSemantics::PaperLiteral {
            star[n - 1] += 1;
        }
        scored.push((AllocationOption::JoinBin(s), score(&star, t)?));
    }
    Ok(sort_options(scored))
}
