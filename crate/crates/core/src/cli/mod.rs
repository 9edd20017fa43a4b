//! Command-line surface: `classify`, `simulate`, `analytics` and
//! `validate`.
//!
//! Exit codes: 0 success, 1 malformed input or a failed run, 2 an
//! inconclusive outcome (undecided verdicts, nothing computable, or
//! validation rows skipped).

pub mod config;
pub mod reports;
pub mod validate;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::{ExperimentConfig, Format, SCHEMA_VERSION};

use crate::simulate::simulate_paths;
use config::{load_config, load_model, RowRequest};
use validate::{run_matrix, RowStatus, ValidationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MALFORMED: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cbre", version, about = "Branching processes with competition in random environments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Model document (JSON); replaces the configuration's `model`.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output directory; reports go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for simulations.
    #[arg(long, global = true, env = "CBRE_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extinction, diffusion and subordinator verdicts for a model.
    Classify,
    /// Monte Carlo hitting-time estimates.
    Simulate {
        /// Also write one CSV per simulated path.
        #[arg(long)]
        paths: bool,
    },
    /// Analytic hitting-time quantities.
    Analytics,
    /// Run the validation matrix.
    Validate {
        /// Row to run (repeatable); all rows when absent.
        #[arg(long = "row")]
        rows: Vec<String>,
    },
}

/// Files written by one command, removed again if the command fails.
struct Outputs {
    dir: Option<PathBuf>,
    created: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        match &self.dir {
            None => {
                print!("{contents}");
                Ok(())
            }
            Some(dir) => {
                let path = dir.join(name);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                self.created.push(path.clone());
                fs::write(&path, contents)
            }
        }
    }

    fn discard(&mut self) {
        for p in self.created.drain(..).rev() {
            let _ = fs::remove_file(&p);
        }
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    formats: Vec<Format>,
    out: Outputs,
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialise");
    s.push('\n');
    s
}

/// Parse arguments from the process and run.
pub fn main_entry() -> i32 {
    run(Cli::parse())
}

pub fn run(cli: Cli) -> i32 {
    let mut cfg = match &cli.config {
        Some(p) => match load_config(p) {
            Ok(c) => c,
            Err(e) => return malformed(&e),
        },
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &cli.model {
        match load_model(p) {
            Ok(m) => cfg.model = Some(m),
            Err(e) => return malformed(&e),
        }
    }
    if let Some(s) = cli.seed {
        cfg.simulation.seed = s;
    }
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return EXIT_MALFORMED;
    }
    cfg.simulation.threads = cli.threads;
    let formats = match cli.format {
        Some(f) => vec![f],
        None if cfg.output.formats.is_empty() => vec![Format::Json],
        None => cfg.output.formats.clone(),
    };
    let dir = cli.out.clone().or_else(|| cfg.output.dir.clone());
    let paths = cfg.output.paths;
    let mut ctx = Ctx { cfg, formats, out: Outputs { dir, created: Vec::new() } };
    let res = match &cli.command {
        Command::Classify => classify(&mut ctx),
        Command::Simulate { paths: p } => simulate(&mut ctx, *p || paths),
        Command::Analytics => analytics(&mut ctx),
        Command::Validate { rows } => validate(&mut ctx, rows),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            ctx.out.discard();
            eprintln!("error: {e}");
            EXIT_MALFORMED
        }
    }
}

fn malformed(e: &config::ConfigError) -> i32 {
    eprintln!("error: {e}");
    EXIT_MALFORMED
}

type CmdResult = Result<i32, Box<dyn std::error::Error>>;

fn require_model(ctx: &Ctx) -> Result<&crate::mechanisms::ModelSpec, Box<dyn std::error::Error>> {
    ctx.cfg.model.as_ref().ok_or_else(|| "no model given: pass --model <file> or set `model` in the configuration".into())
}

fn classify(ctx: &mut Ctx) -> CmdResult {
    let model = require_model(ctx)?.clone();
    let rep = reports::classify(&model);
    ctx.out.write("classify.json", &json(&rep))?;
    Ok(if rep.decided { EXIT_OK } else { EXIT_INCONCLUSIVE })
}

fn simulate(ctx: &mut Ctx, paths: bool) -> CmdResult {
    let model = require_model(ctx)?.clone();
    let sim = &ctx.cfg.simulation;
    let summary = reports::simulate_summary(&model, sim, &ctx.cfg.analytics)?;
    for f in ctx.formats.clone() {
        match f {
            Format::Json => ctx.out.write("summary.json", &json(&summary))?,
            Format::Csv => ctx.out.write("summary.csv", &summary.to_csv())?,
        }
    }
    if paths {
        if ctx.out.dir.is_none() {
            return Err("--paths needs an output directory".into());
        }
        for (i, &x0) in ctx.cfg.analytics.x0s.iter().enumerate() {
            for (j, p) in simulate_paths(&model, x0, sim)?.iter().enumerate() {
                ctx.out.write(&format!("paths/x{i}_path{j}.csv"), &p.to_csv())?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn analytics(ctx: &mut Ctx) -> CmdResult {
    let model = require_model(ctx)?.clone();
    let rep = reports::analytics(&model, &ctx.cfg.analytics);
    for f in ctx.formats.clone() {
        match f {
            Format::Json => ctx.out.write("analytics.json", &json(&rep))?,
            Format::Csv => ctx.out.write("analytics.csv", &rep.to_csv())?,
        }
    }
    Ok(if rep.any_value() { EXIT_OK } else { EXIT_INCONCLUSIVE })
}

fn validation_csv(rep: &ValidationReport) -> String {
    let mut s = String::from("id,row,status,check,measured,reference,discrepancy,tolerance,pass\n");
    for r in &rep.rows {
        let status = serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        if r.checks.is_empty() {
            let _ = writeln!(s, "{},{},{status},,,,,,", r.id, r.row);
        }
        for c in &r.checks {
            let _ = writeln!(s, "{},{},{status},{},{:e},{:e},{:e},{:e},{}", r.id, r.row, c.name, c.measured, c.reference, c.discrepancy, c.tolerance, c.pass);
        }
    }
    s
}

fn validate(ctx: &mut Ctx, rows: &[String]) -> CmdResult {
    let requests: Vec<RowRequest> = if rows.is_empty() { ctx.cfg.validation.rows.clone() } else { rows.iter().cloned().map(RowRequest::Name).collect() };
    let rep = run_matrix(&requests, ctx.cfg.simulation.threads);
    for r in &rep.rows {
        eprintln!("{}", r.summary_line());
    }
    for f in ctx.formats.clone() {
        match f {
            Format::Json => ctx.out.write("validation.json", &json(&rep))?,
            Format::Csv => ctx.out.write("validation.csv", &validation_csv(&rep))?,
        }
    }
    Ok(if rep.all_pass {
        EXIT_OK
    } else if rep.rows.iter().any(|r| r.status == RowStatus::Fail) {
        EXIT_MALFORMED
    } else {
        EXIT_INCONCLUSIVE
    })
}

