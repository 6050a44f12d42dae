//! Command implementations for the command-line front end.
//!
//! Each command exists as a pure string-to-string function so tests can
//! exercise behaviour without processes; [`run`] adds file or stdio
//! plumbing and maps errors to exit codes.

use crate::engine::{self, Checks};
use crate::error::{Error, Result};
use crate::format::{parse_problem, render_quotient_document, serialize_result};
use crate::gen::{generate, GenConfig};
use crate::model::quotient;
use crate::oracle::naive_coarsest_simulation;
use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
/// Unreadable, unparsable or invalid input.
pub const EXIT_INPUT: i32 = 1;
/// An internal invariant failed; the run cannot be trusted.
pub const EXIT_INTERNAL: i32 = 2;
/// Engine and oracle disagree.
pub const EXIT_MISMATCH: i32 = 3;

pub const DEFAULT_ORACLE_CAP: usize = 64;

#[derive(Debug, Clone)]
pub enum Command {
    Sim,
    Verify,
    Quotient,
    Gen(GenConfig),
    Stats,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    /// File path, or stdin when absent or "-".
    pub input: Option<PathBuf>,
    /// File path, or stdout when absent or "-".
    pub output: Option<PathBuf>,
    pub checks: Checks,
    /// Largest state count `verify` hands to the naive oracle.
    pub oracle_cap: usize,
}

/// Computes the coarsest simulation preorder and renders it canonically.
pub fn cmd_sim(input: &str, checks: Checks) -> Result<String> {
    let (ts, init) = parse_problem(input)?;
    let result = engine::run(&ts, &init, checks)?;
    Ok(serialize_result(&result))
}

/// Runs both the engine and the naive oracle and compares state-level
/// relations. Returns "ok"; a disagreement is reported as a mismatch error
/// with one witness pair.
pub fn cmd_verify(input: &str, checks: Checks, oracle_cap: usize) -> Result<String> {
    let (ts, init) = parse_problem(input)?;
    let n = ts.num_states();
    if n > oracle_cap {
        return Err(Error::invalid(format!(
            "oracle cap exceeded: {n} states, cap {oracle_cap}"
        )));
    }
    let got = engine::run(&ts, &init, checks)?.explicit_relation();
    let want = naive_coarsest_simulation(&ts, &init.explicit_relation())?;
    if got == want {
        return Ok("ok\n".to_string());
    }
    for q in 0..n {
        for q2 in 0..n {
            if got.contains(q, q2) != want.contains(q, q2) {
                let (holder, misser) =
                    if got.contains(q, q2) { ("engine", "oracle") } else { ("oracle", "engine") };
                return Err(Error::Mismatch(format!(
                    "pair ({q}, {q2}) found by the {holder} but not the {misser}"
                )));
            }
        }
    }
    Err(Error::internal("relations compare unequal yet no witness pair exists"))
}

/// Quotients the system by simulation equivalence and renders it with a
/// state-to-block mapping comment.
pub fn cmd_quotient(input: &str, checks: Checks) -> Result<String> {
    let (ts, init) = parse_problem(input)?;
    let result = engine::run(&ts, &init, checks)?;
    let reduced = quotient(&ts, result.blocks())?;
    Ok(render_quotient_document(&reduced, result.blocks()))
}

/// Renders a seeded random instance.
pub fn cmd_gen(config: &GenConfig) -> Result<String> {
    generate(config)
}

/// Runs the engine and reports its instrumentation counters.
pub fn cmd_stats(input: &str, checks: Checks) -> Result<String> {
    let (ts, init) = parse_problem(input)?;
    let (_, stats) = engine::run_with_stats(&ts, &init, checks)?;
    Ok(stats.render())
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Invalid(_) => EXIT_INPUT,
        Error::Internal(_) => EXIT_INTERNAL,
        Error::Mismatch(_) => EXIT_MISMATCH,
    }
}

/// Executes the configured command, writing results to the configured
/// output and errors to stderr. Returns the process exit code.
pub fn run(config: &RunConfig) -> i32 {
    match execute(config) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("{err}");
            exit_code_for(&err)
        }
    }
}

fn execute(config: &RunConfig) -> Result<()> {
    let rendered = match &config.command {
        Command::Gen(gen_config) => cmd_gen(gen_config)?,
        Command::Sim => cmd_sim(&read_input(config)?, config.checks)?,
        Command::Verify => cmd_verify(&read_input(config)?, config.checks, config.oracle_cap)?,
        Command::Quotient => cmd_quotient(&read_input(config)?, config.checks)?,
        Command::Stats => cmd_stats(&read_input(config)?, config.checks)?,
    };
    write_output(config, &rendered)
}

fn is_stdio(path: &Option<PathBuf>) -> bool {
    match path {
        None => true,
        Some(p) => p.as_os_str() == "-",
    }
}

fn read_input(config: &RunConfig) -> Result<String> {
    if is_stdio(&config.input) {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|err| Error::invalid(format!("cannot read stdin: {err}")))?;
        Ok(text)
    } else {
        let path = config.input.as_ref().unwrap();
        fs::read_to_string(path)
            .map_err(|err| Error::invalid(format!("cannot read {}: {err}", path.display())))
    }
}

fn write_output(config: &RunConfig, rendered: &str) -> Result<()> {
    if is_stdio(&config.output) {
        std::io::stdout()
            .write_all(rendered.as_bytes())
            .map_err(|err| Error::invalid(format!("cannot write stdout: {err}")))
    } else {
        let path = config.output.as_ref().unwrap();
        fs::write(path, rendered)
            .map_err(|err| Error::invalid(format!("cannot write {}: {err}", path.display())))
    }
}
