//! Subcommand implementations and the exit-code mapping.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use microsim::alignment::{AlignmentProblem, TopBinSemantics};
use microsim::pipeline::{load_config, run_dir, run_replicates, RunInputs};
use microsim::population::snapshot::{read_snapshot, write_snapshot};
use microsim::population::validate_integrity;
use microsim::reporting::{
    emit_reports, load_observed, load_run, render_alignment_markdown, write_alignment,
    AlignmentReport, Report, ReportOptions,
};
use microsim::stochastic::RngStream;
use microsim::synthesis::{load_controls, load_sample, synthesize, write_weights, IpuOptions};
use microsim::Error;

use crate::{AlignArgs, ReportArgs, SimulateArgs, SynthArgs, ValidateArgs};

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Config(String),
    Convergence(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Config(_) => 2,
            Failure::Convergence(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m)
            | Failure::Config(m)
            | Failure::Convergence(m)
            | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Input errors (missing or malformed files) are configuration failures.
fn input<T>(r: microsim::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e {
        Error::Io { .. } | Error::Integrity(_) | Error::Domain(_) | Error::Model(_) => {
            Failure::Config(e.to_string())
        }
        other => other.into(),
    })
}

fn semantics(s: &str) -> Result<TopBinSemantics, Failure> {
    input(s.parse())
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", dir.display())))
}

pub fn synth(args: &SynthArgs) -> CmdResult {
    let sample = input(load_sample(&args.sample))?;
    let controls = input(load_controls(&args.controls))?;
    let opts = IpuOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        ..IpuOptions::default()
    };
    let mut rng = RngStream::new(args.seed);
    let result = input(synthesize(&sample, &controls, &opts, &mut rng))?;
    let report = validate_integrity(&result.population);
    if !report.is_clean() {
        return Err(Failure::Runtime(format!(
            "synthesized population is inconsistent: {report}"
        )));
    }

    create_dir(&args.out)?;
    write_snapshot(&result.population, &args.out)?;
    write_weights(
        &args.out.join("weights.csv"),
        &sample,
        &result.fit.weights,
        &result.counts,
    )?;
    let diag = &result.fit.diagnostics;
    diag.write_csv(&args.out.join("ipu_diagnostics.csv"))?;

    println!(
        "synthesized {} persons in {} households; IPU {} after {} passes (max deviation {:.6})",
        result.population.n_persons(),
        result.population.n_households(),
        if diag.converged {
            "converged"
        } else {
            "did not converge"
        },
        diag.iterations,
        diag.max_deviation
    );
    for w in &diag.warnings {
        eprintln!("warning: {w}");
    }
    if !diag.converged {
        eprintln!("warning: the IPU fit did not converge in some categories");
    }
    if args.strict && (!diag.converged || diag.has_warnings()) {
        return Err(Failure::Convergence(format!(
            "IPU fit not clean (converged: {}, warnings: {})",
            diag.converged,
            diag.warnings.len()
        )));
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    if !args.config.exists() {
        return Err(Failure::Config(format!(
            "config {} does not exist",
            args.config.display()
        )));
    }
    let mut config = input(load_config(&args.config))?;
    if let Some(s) = &args.semantics {
        config.semantics = semantics(s)?;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    let seeds = if args.seeds.is_empty() {
        config.seeds.clone()
    } else {
        args.seeds.clone()
    };
    if seeds.is_empty() {
        return Err(Failure::Config(
            "no seeds: pass --seed or set seeds in the config".into(),
        ));
    }
    let inputs = input(RunInputs::load(&config))?;
    let out = config.output_dir.clone();
    run_replicates(&config, &inputs, &seeds, args.jobs, &out)?;

    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    let runs = sorted
        .iter()
        .map(|&s| load_run(&run_dir(&out, s)))
        .collect::<microsim::Result<Vec<_>>>()?;
    let report = Report::build(&runs, None, None, &ReportOptions::default())?;
    emit_reports(&report, &out)?;
    println!(
        "{} run(s) of {} cycles written to {}",
        seeds.len(),
        config.n_cycles,
        out.display()
    );
    Ok(())
}

pub fn align(args: &AlignArgs) -> CmdResult {
    let problem = input(AlignmentProblem::from_csv(&args.problem))?;
    let sem = semantics(&args.semantics)?;
    for &seed in &args.seeds {
        let dir = if args.seeds.len() == 1 {
            args.out.clone()
        } else {
            args.out.join(format!("seed_{seed}"))
        };
        create_dir(&dir)?;
        let outcome = problem.solve(&mut RngStream::new(seed), sem)?;
        let report = AlignmentReport::new(&problem, &outcome)?;
        write_alignment(Some(&report), &dir)?;
        let md = render_alignment_markdown(&report);
        let path = dir.join("alignment.md");
        fs::write(&path, &md)
            .map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))?;
        if args.seeds.len() > 1 {
            println!("seed {seed}");
        }
        print!("{md}");
    }
    Ok(())
}

/// Run directories named on the command line, with simulation output
/// directories expanded to their `run_*` children.
fn run_dirs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        let entries =
            fs::read_dir(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
        let mut children = Vec::new();
        let mut is_run = false;
        for entry in entries {
            let path = entry
                .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
                .path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.starts_with("year_") {
                is_run = true;
            } else if name.starts_with("run_") && path.is_dir() {
                children.push(path);
            }
        }
        if is_run {
            out.push(p.clone());
        } else if children.is_empty() {
            return Err(Failure::Config(format!(
                "{} holds no run output",
                p.display()
            )));
        } else {
            children.sort();
            out.extend(children);
        }
    }
    Ok(out)
}

pub fn report(args: &ReportArgs) -> CmdResult {
    let runs = run_dirs(&args.runs)?
        .iter()
        .map(|d| input(load_run(d)))
        .collect::<Result<Vec<_>, _>>()?;
    let observed = args
        .observed
        .as_deref()
        .map(|d| input(load_observed(d)))
        .transpose()?;
    let opts = ReportOptions {
        year: args.year,
        lenient: args.lenient,
    };
    let report = Report::build(&runs, observed.as_ref(), None, &opts)?;
    let files = emit_reports(&report, &args.out)?;
    println!(
        "{} report files written to {}",
        files.len(),
        args.out.join("reports").display()
    );
    Ok(())
}

pub fn validate(args: &ValidateArgs) -> CmdResult {
    let pop = match read_snapshot(&args.snapshot) {
        Ok(pop) => pop,
        Err(e @ Error::Integrity(_)) => {
            println!("{e}");
            return Err(Failure::Validation("snapshot is inconsistent".into()));
        }
        Err(e) => return input(Err(e)),
    };
    let report = validate_integrity(&pop);
    if report.is_clean() {
        println!(
            "ok: {} persons, {} households",
            pop.n_persons(),
            pop.n_households()
        );
        Ok(())
    } else {
        for v in &report.violations {
            println!("{v}");
        }
        Err(Failure::Validation(format!(
            "{} integrity violations",
            report.violations.len()
        )))
    }
}
