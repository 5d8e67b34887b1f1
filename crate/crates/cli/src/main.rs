use std::path::PathBuf;
use std::process::ExitCode;

use awsgd_cli::compare::{compare, load_summary, CompareOptions};
use awsgd_cli::config::{parse_seeds, Method, Scenario};
use awsgd_cli::gendata::{generate, parse_specs};
use awsgd_cli::{build_config, run_experiment, CliError, ConfigSource, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "awsgd", version, about = "Adaptive weighted SGD experiments")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file or a preset.
    Run(RunArgs),
    /// Compare two runs' summaries on one metric.
    Compare(CompareArgs),
    /// Write synthetic datasets described by a JSON spec.
    GenData {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Print the preset config of a scenario.
    Preset { scenario: String },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long, required_unless_present = "scenario", conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Start from this scenario's preset instead of a file.
    #[arg(long)]
    scenario: Option<String>,
    /// Shorthand for `--set algorithm=...`.
    #[arg(long)]
    algorithm: Option<String>,
    /// Comma-separated seeds, e.g. `1,2,3`.
    #[arg(long)]
    seeds: Option<String>,
    /// Shorthand for `--set output=...`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. `params.eta.rate=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sgd,
    Awsgd,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sgd => Method::Sgd,
            MethodArg::Awsgd => Method::Awsgd,
        }
    }
}

#[derive(Args)]
struct CompareArgs {
    /// Summary file or run directory of the candidate.
    #[arg(long)]
    a: PathBuf,
    /// Summary file or run directory of the baseline.
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    metric: String,
    /// Target value for curves; minimum mean improvement for scalars.
    #[arg(long, allow_negative_numbers = true)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "awsgd")]
    a_algorithm: MethodArg,
    #[arg(long, value_enum, default_value = "sgd")]
    b_algorithm: MethodArg,
    #[arg(long)]
    higher_is_better: bool,
    /// Largest passing ratio of median samples-to-threshold, A over B.
    #[arg(long, default_value_t = 1.0)]
    max_ratio: f64,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn scenario(name: &str) -> Result<Scenario> {
    Scenario::from_name(name).ok_or_else(|| {
        let known: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
        CliError::config(format!("unknown scenario `{name}` (known: {})", known.join(", ")))
    })
}

fn run(args: RunArgs) -> Result<bool> {
    let source = match (&args.config, &args.scenario) {
        (Some(path), _) => ConfigSource::File(path.clone()),
        (None, Some(name)) => ConfigSource::Preset(scenario(name)?),
        (None, None) => return Err(CliError::config("either --config or --scenario is required")),
    };
    let mut overrides = Vec::new();
    if let Some(a) = &args.algorithm {
        overrides.push(format!("algorithm={a}"));
    }
    if let Some(s) = &args.seeds {
        overrides.push(format!("seeds={:?}", parse_seeds(s)?));
    }
    if let Some(o) = &args.output {
        let text = serde_json::to_string(&o.to_string_lossy()).expect("strings serialize");
        overrides.push(format!("output={text}"));
    }
    overrides.extend(args.set);
    let cfg = build_config(&source, &overrides)?;
    let summary = run_experiment(&cfg, args.jobs)?;
    println!("{} runs written to {}", summary.runs.len(), cfg.output.display());
    Ok(true)
}

fn compare_runs(args: CompareArgs) -> Result<bool> {
    let a = load_summary(&args.a)?;
    let b = load_summary(&args.b)?;
    let opts = CompareOptions {
        metric: args.metric,
        threshold: args.threshold,
        a_algorithm: args.a_algorithm.into(),
        b_algorithm: args.b_algorithm.into(),
        higher_is_better: args.higher_is_better,
        max_ratio: args.max_ratio,
    };
    let report = compare(&a, &b, &opts)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(report.pass)
}

fn gen_data(spec: PathBuf) -> Result<bool> {
    for s in parse_specs(awsgd_cli::config::read_document(&spec)?)? {
        generate(&s)?;
        println!("wrote {}", s.output().display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare_runs(args),
        Command::GenData { spec } => gen_data(spec),
        Command::Preset { scenario: name } => scenario(&name).map(|s| {
            print!("{}", awsgd_cli::presets::preset_text(s));
            true
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
