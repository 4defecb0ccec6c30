use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lindblad_steady::io::{self, KernelDocument, StateDocument};
use lindblad_steady::lindblad::build_liouvillian;
use lindblad_steady::scenarios::{self, RandomStateSampler, SamplerKind, ScenarioConfig, ScenarioReport, SCENARIOS};
use lindblad_steady::steady::{self, ResolventOptions, SpectralDecomposition};
use lindblad_steady::algebra::SolveMethod;
use lindblad_steady::Error;
use serde::Serialize;

const OUTPUT_DIR_VAR: &str = "LSS_OUTPUT_DIR";

/// Steady states of Lindblad master equations from the initial state.
#[derive(Parser, Debug)]
#[command(name = "lss", version, about)]
struct Cli {
    /// Worker threads for scenarios that sample many initial states
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady state reached from one initial state
    Solve(SolveArgs),
    /// Kernel vectors and conserved quantities of a model
    Kernel(KernelArgs),
    /// Run a named scenario and write `<scenario>_<seed>.csv/.json`
    Scenario(ScenarioArgs),
    /// Resolvent vs time integration timing table
    Bench(BenchArgs),
    /// Draw seeded random density matrices
    Sample(SampleArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    /// Eigendecomposition with the non-Euclidean metric
    Spectral,
    /// Biorthogonal kernel projection
    Kernel,
    /// Orthogonal projection, Hermitian Liouvillians only
    Hermitian,
    /// One shifted linear solve
    Resolvent,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Solver {
    Direct,
    Iterative,
}

impl From<Solver> for SolveMethod {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Direct => SolveMethod::Direct,
            Solver::Iterative => SolveMethod::Iterative,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Model document (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Initial state document (JSON)
    #[arg(long)]
    state: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Kernel)]
    method: Method,
    /// Resolvent shift
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Linear solver for the resolvent
    #[arg(long, value_enum, default_value_t = Solver::Direct)]
    solver: Solver,
    /// Output path for the steady state
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long)]
    model: PathBuf,
    /// Output path; printed to stdout when absent
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario name
    name: String,
    /// Base configuration (JSON); flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total number of qubits
    #[arg(long = "N", visible_alias = "n")]
    n: Option<usize>,
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Values of γ/Ω for the driven scenario
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerArg>,
    /// Output directory (default: $LSS_OUTPUT_DIR or `out`)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// What to print: the table as CSV or the summary as JSON
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// System sizes
    #[arg(long = "N", visible_alias = "n", value_delimiter = ',', default_values_t = [4usize, 8, 12, 16])]
    n_values: Vec<usize>,
    /// Repetitions per measurement
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Target ‖𝓛ρ‖ for the integrator
    #[arg(long, default_value_t = 1e-9)]
    ode_tol: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SamplerArg {
    MixedGinibre,
    PureHaar,
}

impl From<SamplerArg> for SamplerKind {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::MixedGinibre => SamplerKind::MixedGinibre,
            SamplerArg::PureHaar => SamplerKind::PureHaar,
        }
    }
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SamplerArg::MixedGinibre)]
    kind: SamplerArg,
    /// Output path: one state document, or a JSON list when count > 1
    #[arg(long, short)]
    out: PathBuf,
}

/// Failure with its exit status: 2 for bad input, 3 for a failed solve.
#[derive(Debug)]
enum Failure {
    Input(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Format(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::Config(_)
            | Error::InvalidModel(_)
            | Error::InvalidState(_)
            | Error::NotHermitian { .. }
            | Error::Dimension(_)
            | Error::QuantumNumbers(_) => Failure::Input(e.to_string()),
            _ => Failure::Solver(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

fn write_output<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::Input(format!("{}: {e}", parent.display())))?;
    }
    io::write_json(path, value).map_err(|e| Failure::Input(e.to_string()))
}

fn solve(args: SolveArgs) -> CmdResult {
    let model = io::read_model(&args.model)?;
    let rho0 = io::read_state(&args.state)?;
    if rho0.dim() != model.dim() {
        return Err(Failure::Input(format!("state dimension {} vs model dimension {}", rho0.dim(), model.dim())));
    }
    let sop = build_liouvillian(&model);
    let (rho, n) = match args.method {
        Method::Spectral => {
            let decomp = SpectralDecomposition::new(&sop)?;
            (steady::steady_spectral(&decomp, &rho0)?, Some(decomp.n()))
        }
        Method::Kernel => {
            let basis = steady::kernel_basis(&sop)?;
            (steady::steady_kernel(&basis, &rho0)?, Some(basis.n()))
        }
        Method::Hermitian => {
            let basis = steady::kernel_basis(&sop)?;
            (steady::steady_hermitian(&sop, &basis, &rho0)?, Some(basis.n()))
        }
        Method::Resolvent => {
            if !(args.epsilon.is_finite() && args.epsilon > 0.0) {
                return Err(Failure::Input(format!("epsilon must be positive, got {}", args.epsilon)));
            }
            let opts = ResolventOptions::new(args.epsilon).with_method(args.solver.into());
            (steady::steady_resolvent_with(&sop, &rho0, &opts)?.state, None)
        }
    };
    let residual = sop.residual(rho.matrix())?;
    write_output(&args.out, &StateDocument::from_state(&rho))?;
    match n {
        Some(n) => println!("method={:?} n={n} residual={residual:.3e}", args.method),
        None => println!("method={:?} epsilon={:e} residual={residual:.3e}", args.method, args.epsilon),
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn kernel(args: KernelArgs) -> CmdResult {
    let sop = build_liouvillian(&io::read_model(&args.model)?);
    let basis = steady::kernel_basis(&sop)?;
    let residuals = steady::verify_basis(&sop, &basis);
    let doc = KernelDocument::new(&basis, &residuals);
    eprintln!(
        "n={} biorthogonality={:.3e} orthonormality={:.3e} kernel={:.3e}",
        doc.n, doc.biorthogonality_residual, doc.orthonormality_residual, doc.kernel_residual
    );
    match args.out {
        Some(path) => {
            write_output(&path, &doc)?;
            println!("n={} wrote {}", doc.n, path.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&doc).map_err(|e| Failure::Input(e.to_string()))?),
    }
    Ok(())
}

fn print_report(report: &ScenarioReport, paths: (PathBuf, PathBuf), format: Option<Format>) -> CmdResult {
    match format {
        Some(Format::Csv) => report.table.write_csv(std::io::stdout())?,
        Some(Format::Json) => {
            let text = std::fs::read_to_string(&paths.1).map_err(|e| Failure::Input(e.to_string()))?;
            print!("{text}");
        }
        None => {
            for (k, v) in &report.metrics {
                println!("{k} = {v}");
            }
            for c in &report.checks {
                println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
        }
    }
    eprintln!("wrote {} and {}", paths.0.display(), paths.1.display());
    println!("{}: {}", report.scenario, if report.passed() { "PASS" } else { "FAIL" });
    Ok(())
}

fn scenario(args: ScenarioArgs, threads: usize) -> CmdResult {
    if !SCENARIOS.contains(&args.name.as_str()) {
        return Err(Failure::Input(format!("unknown scenario `{}`; available: {}", args.name, SCENARIOS.join(", "))));
    }
    let mut cfg: ScenarioConfig = match &args.config {
        Some(path) => io::read_json(path)?,
        None => ScenarioConfig::default(),
    };
    cfg.scenario = args.name.clone();
    cfg.threads = threads;
    if let Some(n) = args.n {
        cfg.n = n;
        cfg.n_values = vec![n];
    }
    if let Some(v) = args.eta {
        cfg.eta = v;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.ratios {
        cfg.gamma_over_omega = v;
    }
    if args.epsilon.is_some() {
        cfg.epsilon = args.epsilon;
    }
    if let Some(v) = args.samples {
        cfg.samples = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.sampler {
        cfg.sampler = v.into();
    }
    cfg.validate()?;
    let report = scenarios::run_scenario(&cfg)?;
    let paths = report.write(&output_dir(args.out_dir))?;
    print_report(&report, paths, args.format)
}

fn bench(args: BenchArgs, threads: usize) -> CmdResult {
    let cfg = ScenarioConfig {
        scenario: "benchmark".into(),
        n_values: args.n_values,
        repeats: args.repeats,
        epsilon: args.epsilon,
        ode_tol: args.ode_tol,
        seed: args.seed,
        threads,
        ..ScenarioConfig::default()
    };
    cfg.validate()?;
    let report = scenarios::run_benchmark(&cfg)?;
    let paths = report.write(&output_dir(args.out_dir))?;
    report.table.write_csv(std::io::stdout())?;
    eprintln!("wrote {} and {}", paths.0.display(), paths.1.display());
    Ok(())
}

fn sample(args: SampleArgs) -> CmdResult {
    if args.count == 0 {
        return Err(Failure::Input("count must be at least 1".into()));
    }
    let mut sampler = RandomStateSampler::new(args.seed, args.kind.into());
    let docs = (0..args.count)
        .map(|_| Ok(StateDocument::from_state(&scenarios::sample_state(&mut sampler, args.dim)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    if docs.len() == 1 {
        write_output(&args.out, &docs[0])?;
    } else {
        write_output(&args.out, &docs)?;
    }
    println!("wrote {} state(s) to {}", docs.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    if cli.threads == 0 {
        return Err(Failure::Input("--threads must be at least 1".into()));
    }
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Kernel(a) => kernel(a),
        Command::Scenario(a) => scenario(a, cli.threads),
        Command::Bench(a) => bench(a, cli.threads),
        Command::Sample(a) => sample(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(msg) | Failure::Solver(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
