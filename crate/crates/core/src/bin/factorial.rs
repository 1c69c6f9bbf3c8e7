use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use factorial_bayes::cli::{
    self, AnalysisInput, AnalyzeOptions, EffectSelector, SensitivityOptions, SimulationSummary,
};
use factorial_bayes::harness::{self, BetaPrior, CaseSource, StudyConfig};
use factorial_bayes::rng::{self, domain};
use factorial_bayes::sensitivity::{self, GammaStructure};
use factorial_bayes::Error;

#[derive(Parser)]
#[command(name = "factorial", version, about = "Interval estimates for factorial effects in 2^K designs with binary outcomes")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "FACTORIAL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Neymanian and Bayesian intervals for observed data.
    Analyze(AnalyzeArgs),
    /// Sweep the AR(1) association parameter and report the widest interval.
    Sensitivity(SensitivityArgs),
    /// Repeated-sampling coverage study driven by a JSON config.
    Simulate(SimulateArgs),
    /// Draw random 2^2 populations as cell-count rows.
    GenCases(GenCasesArgs),
}

#[derive(Args)]
struct InputArgs {
    /// JSON file with fields K, n, n_obs.
    input: PathBuf,
    /// Read `arm,size,successes` CSV rows instead of JSON.
    #[arg(long)]
    from_csv: bool,
}

#[derive(Args)]
struct PriorArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// RNG seed; a random one is chosen and reported when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, default_value_t = cli::DEFAULT_DRAWS)]
    draws: usize,
    /// `all` or a comma list of effect indices.
    #[arg(long, default_value = "all")]
    effects: String,
    /// Also run a sensitivity sweep over this grid (`a:b:step` or a list).
    #[arg(long)]
    rho: Option<String>,
    #[arg(long, default_value_t = cli::DEFAULT_SWEEP_DRAWS)]
    sweep_draws: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long)]
    effect: usize,
    #[arg(long, default_value = "0:0.99:0.01")]
    grid: String,
    #[arg(long, default_value_t = cli::DEFAULT_SWEEP_DRAWS)]
    draws: usize,
    /// Per-ρ CSV destination (stdout when omitted).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Summary JSON destination (stderr when omitted).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Custom J×J association matrix as CSV; replaces the sweep.
    #[arg(long)]
    gamma: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    /// Directory for coverage.csv and summary.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Cases file overriding the one named in the config.
    #[arg(long)]
    cases: Option<PathBuf>,
}

#[derive(Args)]
struct GenCasesArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 800)]
    units: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn load_input(args: &InputArgs) -> Result<AnalysisInput, Error> {
    let text = read_text(&args.input)?;
    if args.from_csv {
        AnalysisInput::from_csv_str(&text, &args.input)
    } else {
        AnalysisInput::from_json_str(&text)
    }
}

fn prior(args: &PriorArgs) -> BetaPrior {
    BetaPrior {
        alpha: args.alpha,
        beta: args.beta,
    }
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let input = load_input(&args.input)?;
    let opts = AnalyzeOptions {
        prior: prior(&args.prior),
        draws: args.draws,
        level: args.prior.level,
        seed: seed_or_random(args.prior.seed),
        effects: args.effects.parse::<EffectSelector>()?,
        rho_grid: args.rho.as_deref().map(sensitivity::parse_rho_grid).transpose()?,
        sweep_draws: args.sweep_draws,
    };
    let report = cli::analyze(&input, &opts)?;
    write_text(args.out.as_deref(), &cli::to_report_json(&report)?)
}

fn sensitivity(args: SensitivityArgs) -> Result<(), Error> {
    let input = load_input(&args.input)?;
    let gamma = args
        .gamma
        .as_deref()
        .map(GammaStructure::from_csv_path)
        .transpose()?;
    let opts = SensitivityOptions {
        prior: prior(&args.prior),
        draws: args.draws,
        level: args.prior.level,
        seed: seed_or_random(args.prior.seed),
        effect: args.effect,
        rho_grid: sensitivity::parse_rho_grid(&args.grid)?,
        gamma,
    };
    let (rows, report) = cli::sensitivity(&input, &opts)?;
    let json = cli::to_report_json(&report)?;
    if opts.gamma.is_none() {
        let mut buf = Vec::new();
        cli::write_sweep_csv(&rows, &mut buf)?;
        write_text(args.csv.as_deref(), &String::from_utf8_lossy(&buf))?;
    }
    match (&args.json, opts.gamma.is_some()) {
        (Some(p), _) => write_text(Some(p), &json),
        (None, true) => write_text(None, &json),
        (None, false) => {
            eprint!("{json}");
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut config = StudyConfig::from_path(&args.config)?;
    let base_dir = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut run_config = config.clone();
    if let Some(cases) = args.cases {
        // resolve against the working directory, but echo the path as given
        let resolved = std::path::absolute(&cases).map_err(|e| Error::Io {
            path: cases.clone(),
            source: e,
        })?;
        run_config.cases = CaseSource::Path(resolved);
        config.cases = CaseSource::Path(cases);
    }
    let report = harness::run_study(&run_config, &base_dir)?;
    let summary = SimulationSummary {
        tool: cli::TOOL.into(),
        version: cli::VERSION.into(),
        config,
        cases: report.rows.iter().map(|r| r.case_id).collect::<std::collections::BTreeSet<_>>().len(),
        summary: report.summary.clone(),
    };
    let json = cli::to_report_json(&summary)?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let path = dir.join("coverage.csv");
        let file = fs::File::create(&path).map_err(|e| Error::Io { path, source: e })?;
        harness::write_coverage_csv(&report.rows, io::BufWriter::new(file))?;
        write_text(Some(&dir.join("summary.json")), &json)?;
    }
    write_text(None, &json)
}

fn gen_cases(args: GenCasesArgs) -> Result<(), Error> {
    let mut rng = rng::substream(args.seed, &[domain::CASES]);
    let cases = harness::generate_cases(args.count, args.units, &mut rng)?;
    let mut buf = Vec::new();
    harness::write_cases_csv(&cases, &mut buf)?;
    write_text(args.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ResourceLimit(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Simulate(a) => simulate(a),
        Command::GenCases(a) => gen_cases(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
