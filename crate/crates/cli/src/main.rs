use clap::{Args, Parser, Subcommand, ValueEnum};
use simref_core::cli::{self, Command, RunConfig, DEFAULT_ORACLE_CAP};
use simref_core::engine::Checks;
use simref_core::gen::{GenConfig, PreorderKind};
use std::path::PathBuf;

/// Coarsest simulation preorders over finite transition systems.
#[derive(Parser)]
#[command(name = "simref", version)]
struct CliArgs {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the coarsest simulation preorder inside the input preorder.
    Sim(IoArgs),
    /// Recompute with the naive oracle and compare against the engine.
    Verify {
        #[command(flatten)]
        io: IoArgs,
        /// Largest state count handed to the quartic-time oracle.
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        oracle_cap: usize,
    },
    /// Quotient the system by simulation equivalence.
    Quotient(IoArgs),
    /// Emit a seeded random instance.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        states: usize,
        #[arg(long)]
        arcs: usize,
        /// Initial preorder: unrestricted, by random labels, or an explicit
        /// random block order.
        #[arg(long, value_enum, default_value_t = PreorderArg::Qxq)]
        preorder: PreorderArg,
        /// Output path; "-" or absent writes stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the engine and report its instrumentation counters.
    Stats(IoArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Input path; "-" or absent reads stdin.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path; "-" or absent writes stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Self-auditing level; "full" re-derives every invariant per round.
    #[arg(long, value_enum, default_value_t = ChecksArg::None)]
    checks: ChecksArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChecksArg {
    None,
    Full,
}

impl From<ChecksArg> for Checks {
    fn from(arg: ChecksArg) -> Checks {
        match arg {
            ChecksArg::None => Checks::None,
            ChecksArg::Full => Checks::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PreorderArg {
    Qxq,
    Labels,
    Explicit,
}

impl PreorderArg {
    /// Alphabet and class-count defaults are fixed here; the generator
    /// itself takes them as parameters.
    fn kind(self, num_states: usize) -> PreorderKind {
        match self {
            PreorderArg::Qxq => PreorderKind::Universal,
            PreorderArg::Labels => PreorderKind::Labels { alphabet: 3 },
            PreorderArg::Explicit => PreorderKind::Explicit { classes: num_states.min(4) },
        }
    }
}

fn main() {
    let args = CliArgs::parse();
    let config = match args.command {
        Cmd::Sim(io) => io.into_config(Command::Sim, DEFAULT_ORACLE_CAP),
        Cmd::Verify { io, oracle_cap } => io.into_config(Command::Verify, oracle_cap),
        Cmd::Quotient(io) => io.into_config(Command::Quotient, DEFAULT_ORACLE_CAP),
        Cmd::Stats(io) => io.into_config(Command::Stats, DEFAULT_ORACLE_CAP),
        Cmd::Gen { seed, states, arcs, preorder, output } => RunConfig {
            command: Command::Gen(GenConfig {
                seed,
                num_states: states,
                num_arcs: arcs,
                preorder: preorder.kind(states),
            }),
            input: None,
            output,
            checks: Checks::None,
            oracle_cap: DEFAULT_ORACLE_CAP,
        },
    };
    std::process::exit(cli::run(&config));
}

impl IoArgs {
    fn into_config(self, command: Command, oracle_cap: usize) -> RunConfig {
        RunConfig {
            command,
            input: self.input,
            output: self.output,
            checks: self.checks.into(),
            oracle_cap,
        }
    }
}
