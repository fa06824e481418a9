//! `tcg`: command-line front end for the tree connection game engine.
//!
//! Exit status: 0 success, 1 negative verdict (unstable profile, failed
//! check), 2 usage or input error, 3 resource limit.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tcg_core::equilibrium::Policy;
use tcg_core::report::Formats;
use tcg_core::Error;

#[derive(Parser, Debug)]
#[command(name = "tcg", version, about = "Tree connection game: equilibria, dynamics and metrics")]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    /// Worker threads for parallel scans (default: all cores).
    #[arg(long, global = true, env = "TCG_JOBS")]
    pub jobs: Option<usize>,

    #[command(flatten)]
    pub caps: Caps,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Caps {
    /// Largest agent count for exhaustive equilibrium enumeration.
    #[arg(long, global = true, env = "TCG_ENUM_CAP", default_value_t = tcg_core::enumeration::DEFAULT_ENUMERATION_CAP)]
    pub enum_cap: usize,

    /// Largest agent count for path-game verification.
    #[arg(long, global = true, env = "TCG_PATH_CAP", default_value_t = tcg_core::path_game::DEFAULT_PATH_CAP)]
    pub path_cap: usize,

    /// Largest agent count for the exhaustive path-game search.
    #[arg(long, global = true, env = "TCG_PATH_SEARCH_CAP", default_value_t = tcg_core::path_game::DEFAULT_PATH_SEARCH_CAP)]
    pub path_search_cap: usize,

    /// Expanded-state budget per path-game search.
    #[arg(long, global = true, env = "TCG_SEARCH_BUDGET", default_value_t = tcg_core::path_game::DEFAULT_SEARCH_BUDGET)]
    pub search_budget: u64,

    /// Largest node count for building balanced trees explicitly.
    #[arg(long, global = true, env = "TCG_CONSTRUCTION_CAP", default_value_t = tcg_core::balanced::DEFAULT_CONSTRUCTION_CAP)]
    pub construction_cap: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Find every equilibrium tree with N agents.
    Enumerate {
        #[arg(long)]
        n: usize,
        /// Write report.json, report.csv, DOT drawings and profiles here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the structural audit of each equilibrium.
        #[arg(long)]
        no_audit: bool,
    },
    /// Check whether a profile is a Nash equilibrium.
    Verify {
        #[command(flatten)]
        input: ProfileInput,
        /// Also run the structural audit.
        #[arg(long)]
        audit: bool,
    },
    /// Run best-response dynamics.
    Dynamics {
        /// Start from a random spanning tree on N agents.
        #[arg(long, conflicts_with_all = ["profile", "code"])]
        n: Option<usize>,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        code: Option<String>,
        #[arg(long, default_value = "round-robin", value_parser = parse_policy)]
        policy: Policy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of runs, with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long, default_value_t = tcg_core::equilibrium::DEFAULT_MAX_STEPS)]
        max_steps: usize,
        /// Write the final profile of the last run as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistics and stability of the balanced tree of a degree sequence.
    Balanced {
        /// Degrees from the leaf level up, e.g. "0,1,2,4,9".
        #[arg(long, conflicts_with = "extremal")]
        seq: Option<String>,
        /// Use the extremal sequence of height H.
        #[arg(long)]
        extremal: Option<usize>,
        /// Build the tree and run the full Nash check.
        #[arg(long)]
        verify: bool,
        /// Print level sizes and per-level social cost.
        #[arg(long)]
        stats: bool,
        /// Sweep the swap conditions over the built tree.
        #[arg(long)]
        sweep: bool,
        /// Write the built profile as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Efficiency and fairness over a range of agent counts.
    Metrics {
        /// Inclusive range "A..B", or a single N.
        #[arg(long, value_parser = parse_range)]
        range: (usize, usize),
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the CSV summary here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check a path-game profile for improving paths.
    PathVerify {
        /// Tree profile JSON; each agent uses its tree path.
        #[arg(long, required_unless_present = "paths", conflicts_with = "paths")]
        profile: Option<PathBuf>,
        /// Path profile JSON, {"paths": [[1,0], ...]}.
        #[arg(long)]
        paths: Option<PathBuf>,
        /// Also look for a pair of agents that can both improve together.
        #[arg(long)]
        pairs: bool,
    },
    /// Find every tree with N agents that is stable in the path game.
    PathSearch {
        #[arg(long)]
        n: usize,
    },
    /// Enumerate a range and write every output format.
    Report {
        #[arg(long, value_parser = parse_range)]
        range: (usize, usize),
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of json,csv,dot.
        #[arg(long, default_value = "json,csv,dot", value_parser = parse_formats)]
        formats: Formats,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct ProfileInput {
    /// Profile JSON file: the target of each agent, e.g. [0,1,1].
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Canonical parenthesis code of an unlabeled tree.
    #[arg(long)]
    pub code: Option<String>,
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_formats(s: &str) -> Result<Formats, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => {
            let n = num(s)?;
            (n, n)
        }
    };
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok((a, b))
}

/// Failure of a subcommand, already classified by exit status.
#[derive(Debug)]
pub enum Failure {
    Verdict,
    Core(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ResourceLimit(_) | Error::Overflow { .. } | Error::SearchBudgetExceeded { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("tcg: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("tcg: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("tcg: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
