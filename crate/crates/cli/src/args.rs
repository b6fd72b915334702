use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "otswitch", version, about = "DC optimal transmission switching: exact solves, learned heuristics, studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// `--cardinality` value: a line count or `none`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cardinality(pub Option<usize>);

fn parse_cardinality(s: &str) -> Result<Cardinality, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(Cardinality(None));
    }
    s.parse().map(|k| Cardinality(Some(k))).map_err(|_| format!("expected a non-negative integer or 'none', got '{s}'"))
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// MATPOWER case file (may also be given with --case). `case3` and
    /// `case6` name the bundled cases when no such file exists.
    #[arg(value_name = "CASE")]
    pub case_file: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub case: Option<PathBuf>,
    /// TOML experiment config; flags override its keys.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum number of open lines, or `none`.
    #[arg(long, value_parser = parse_cardinality)]
    pub cardinality: Option<Cardinality>,
    /// Relative optimality gap for exact solves.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Time limit per exact solve, in seconds.
    #[arg(long = "time-limit", value_name = "SEC")]
    pub time_limit: Option<f64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Write all timing fields as 0 so repeated runs give identical files.
    #[arg(long)]
    pub no_timing: bool,
    /// Keep only the linear term of quadratic generator costs.
    #[arg(long)]
    pub linearize_cost: bool,
}

#[derive(Debug, Clone, Args)]
pub struct KnnArgs {
    /// Neighbours to evaluate.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// `euclidean`, `infinity` or a number p >= 1.
    #[arg(long, default_value = "euclidean")]
    pub norm: String,
}

#[derive(Debug, Clone, Args)]
pub struct Data {
    /// Training file (default: <out>/train.jsonl).
    #[arg(long, value_name = "PATH")]
    pub train: Option<PathBuf>,
    /// Instance file from `generate` (default: <out>/instances.json).
    #[arg(long, value_name = "PATH")]
    pub instances: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a case file and print its size.
    Parse {
        #[command(flatten)]
        common: Common,
        /// Run structural checks; exit 2 if any fail.
        #[arg(long)]
        validate: bool,
    },
    /// Generate perturbed instances and the train/test split.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long = "test-count")]
        test_count: Option<usize>,
    },
    /// Solve the training instances exactly; resumes an existing file.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Exact solve of one instance (the nominal one unless --index is given).
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        instances: Option<PathBuf>,
        /// Instance index in the --instances file.
        #[arg(long)]
        index: Option<usize>,
        /// Also write the MIP in CPLEX LP format.
        #[arg(long = "dump-lp", value_name = "PATH")]
        dump_lp: Option<PathBuf>,
    },
    /// Run a heuristic on the test instances (or the nominal instance).
    Heuristic {
        #[command(subcommand)]
        method: HeuristicCommand,
    },
    /// Exact, KNN, greedy and all-closed results on the test instances.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        knn: KnnArgs,
    },
    /// Studies over training and test data.
    Analyze {
        #[command(subcommand)]
        study: AnalyzeCommand,
    },
    /// Summarise the artifacts found in the output directory.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Subcommand)]
pub enum HeuristicCommand {
    Knn {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        knn: KnnArgs,
    },
    Greedy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Unique training topologies and line-opening frequencies.
    Census {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Every unique training topology on every test instance.
    Crosseval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Distance ranks of the best and first ε-optimal training entries.
    Cardinal {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Leave-one-out KNN over the training set.
    Loocv {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        knn: KnnArgs,
    },
    /// Buses grouped by the solution after raising each one's demand.
    /// Uses cardinality 5 and gap 0.01 unless given.
    Classes {
        #[command(flatten)]
        common: Common,
        /// Demand increase per bus, in p.u.
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Largest demand perturbation radius keeping the nominal optimum.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        directions: usize,
        /// Comma-separated radii in p.u.
        #[arg(long, default_value = "0,0.01,0.02,0.05,0.1,0.2,0.5")]
        radii: String,
    },
    /// All-closed congestion figures for the test instances (or nominal).
    Congestion {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        instances: Option<PathBuf>,
    },
}
