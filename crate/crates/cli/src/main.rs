//! `advq`: solve the dual adversary SDP, build the reflection graph,
//! simulate the query algorithms and verify their spectral guarantees.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 a checked bound
//! was violated (or the dual is infeasible).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advq_core::advsdp::{solve_dual, DualSolution};
use advq_core::algsim::{self, Algorithm, AlgorithmOutcome, PhaseDistribution};
use advq_core::boolfn::{Bits, BooleanFunction, DEFAULT_COMPOSE_CAP};
use advq_core::config::RunConfig;
use advq_core::graphrefl::{query_oracle_check, AdversaryGraph, GraphDump};
use advq_core::io::to_json_string;
use advq_core::report::{certify, compose_report, verify, Check, GammaFile, Instance};
use advq_core::spectral::input_spectrum;
use advq_core::Error;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "advq",
    version,
    about = "Adversary-bound quantum query algorithms: solve, build, simulate, verify"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// JSON RunConfig; command-line flags override its fields.
    #[arg(long, env = "ADVQ_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    tol_feas: Option<f64>,
    #[arg(long, global = true)]
    tol_obj: Option<f64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the dual SDP and write the witness vectors.
    Solve {
        #[command(flatten)]
        function: FunctionArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write solver statistics here.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Build the graph and kernel projector; check the oracle factorization.
    Build {
        #[command(flatten)]
        function: FunctionArg,
        #[arg(long)]
        dual: PathBuf,
        /// Restrict the per-input section to one input.
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate an algorithm exactly, optionally with Monte-Carlo sampling.
    Simulate {
        #[command(flatten)]
        function: FunctionArg,
        #[arg(long)]
        dual: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        alg: u8,
        #[arg(long, conflicts_with = "all_inputs")]
        input: Option<String>,
        #[arg(long)]
        all_inputs: bool,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run spectral and algorithmic checks; exit 2 if any bound fails.
    Verify {
        #[command(flatten)]
        function: FunctionArg,
        /// Use this dual instead of solving.
        #[arg(long)]
        dual: Option<PathBuf>,
        /// Run every check.
        #[arg(long, conflicts_with = "checks")]
        all: bool,
        /// Checks to run: feasibility, witness, bipartite-gap, effective-gap,
        /// phase-gap, jordan, algorithms.
        #[arg(long = "lemma", alias = "check", value_delimiter = ',')]
        checks: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare W of a block composition with the product of the parts.
    Compose {
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long, default_value_t = DEFAULT_COMPOSE_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an adversary matrix |Gamma| / max_j |Gamma o D_j|.
    Certify {
        #[command(flatten)]
        function: FunctionArg,
        #[arg(long)]
        gamma: PathBuf,
        #[arg(long)]
        dual: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct FunctionArg {
    /// Truth-table JSON file, or `builtin:NAME` (IDENT_1, OR_n, AND_n, PARITY_n, MAJ_n).
    #[arg(long)]
    function: String,
}

/// Failure categories mapped to exit codes.
enum Failure {
    Usage(String),
    Violated(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn load_function(source: &str) -> Result<BooleanFunction, Error> {
    match source.strip_prefix("builtin:") {
        Some(name) => BooleanFunction::builtin(name),
        None => BooleanFunction::load(Path::new(source)),
    }
}

fn function_name(source: &str) -> String {
    match source.strip_prefix("builtin:") {
        Some(name) => name.to_string(),
        None => Path::new(source)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| source.to_string()),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => advq_core::io::write_json(path, value),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", to_json_string(value)).map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        }
    }
}

fn build_config(g: &GlobalArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = g.tol_feas {
        cfg.tol_feas = v;
    }
    if let Some(v) = g.tol_obj {
        cfg.tol_obj = v;
    }
    if let Some(v) = g.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_input(f: &BooleanFunction, text: &str) -> Result<Bits, Error> {
    let x: Bits = text.parse()?;
    f.value(&x)
        .ok_or_else(|| Error::NotInDomain(x.to_string()))?;
    Ok(x)
}

fn cmd_solve(
    cfg: &RunConfig,
    function: &str,
    out: Option<&Path>,
    stats: Option<&Path>,
) -> CmdResult {
    let f = load_function(function)?;
    let solved = solve_dual(&f, &cfg.solver_options())?;
    let st = &solved.stats;
    eprintln!(
        "W = {:.12}  m = {}  residual = {:.3e}  certified gap = {:.3e}  iterations = {}",
        solved.solution.w(),
        solved.solution.m(),
        st.feasibility_residual,
        st.relative_duality_gap,
        st.iterations
    );
    match out {
        Some(path) => solved.solution.save(path)?,
        None => println!("{}", solved.solution.to_json_string()),
    }
    if let Some(path) = stats {
        advq_core::io::write_json(path, st)?;
    }
    if st.feasibility_residual > cfg.tol_feas {
        return Err(Failure::Violated(format!(
            "feasibility: residual {:e} exceeds {:e}",
            st.feasibility_residual, cfg.tol_feas
        )));
    }
    if !st.certified {
        return Err(Failure::Violated(format!(
            "duality gap: relative gap {:e} exceeds {:e}",
            st.relative_duality_gap, cfg.tol_obj
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct InputDump {
    x: String,
    f_x: u8,
    /// Vertices `(j, not x_j, k)` removed by `Pi_x`.
    removed: Vec<String>,
    orthogonality_residual: f64,
    embedding_residual: f64,
    oracle_check: bool,
}

#[derive(Serialize)]
struct BuildOutput {
    graph: GraphDump,
    kernel_residual: f64,
    inputs: Vec<InputDump>,
}

fn cmd_build(
    cfg: &RunConfig,
    function: &str,
    dual: &Path,
    input: Option<&str>,
    out: Option<&Path>,
) -> CmdResult {
    let f = load_function(function)?;
    let d = DualSolution::load(dual, &f)?;
    let g = AdversaryGraph::build(&f, &d, cfg.kappa, cfg.tol_ker)?;
    let xs: Vec<Bits> = match input {
        Some(text) => vec![parse_input(&f, text)?],
        None => f.domain().to_vec(),
    };
    let labels = g.index.labels();
    let mut inputs = Vec::new();
    for x in &xs {
        let ops = g.input_operators(x)?;
        inputs.push(InputDump {
            x: x.to_string(),
            f_x: u8::from(ops.value),
            removed: ops
                .pi
                .iter()
                .enumerate()
                .filter(|(_, &p)| p == 0.0)
                .map(|(i, _)| labels[i].to_string())
                .collect(),
            orthogonality_residual: ops.orthogonality_residual(),
            embedding_residual: ops.embedding_residual(&g),
            oracle_check: query_oracle_check(&g, x)?,
        });
    }
    let output = BuildOutput {
        graph: g.dump(),
        kernel_residual: g.kernel_residual(),
        inputs,
    };
    emit(&output, out)?;
    if let Some(bad) = output.inputs.iter().find(|i| !i.oracle_check) {
        return Err(Failure::Violated(format!(
            "graphrefl: oracle factorization fails at x={}",
            bad.x
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    cfg: &RunConfig,
    function: &str,
    dual: &Path,
    alg: u8,
    input: Option<&str>,
    all_inputs: bool,
    trials: Option<u64>,
    out: Option<&Path>,
) -> CmdResult {
    let f = load_function(function)?;
    let d = DualSolution::load(dual, &f)?;
    let alg = Algorithm::try_from(alg)?;
    let g = AdversaryGraph::build(&f, &d, cfg.kappa, cfg.tol_ker)?;
    let xs: Vec<Bits> = match (input, all_inputs) {
        (Some(text), _) => vec![parse_input(&f, text)?],
        (None, true) => f.domain().to_vec(),
        (None, false) => {
            return Err(Failure::Usage(
                "simulate needs --input or --all-inputs".into(),
            ))
        }
    };
    let trials = trials.unwrap_or(cfg.trials);
    let rows: Vec<AlgorithmOutcome> = xs
        .iter()
        .map(|x| {
            let ops = g.input_operators(x)?;
            let dist = PhaseDistribution::from_spectrum(&input_spectrum(&g, &ops)?);
            if trials > 0 {
                let pos = f.position(x).expect("in domain") as u64;
                algsim::sample(
                    alg,
                    x,
                    ops.value,
                    &dist,
                    g.w,
                    trials,
                    cfg.seed.wrapping_add(pos),
                )
            } else {
                Ok(algsim::run(alg, x, ops.value, &dist, g.w))
            }
        })
        .collect::<Result<_, Error>>()?;
    emit(&rows, out)?;
    Ok(())
}

fn cmd_verify(
    cfg: &RunConfig,
    function: &str,
    dual: Option<&Path>,
    all: bool,
    selected: &[String],
    out: Option<&Path>,
) -> CmdResult {
    let checks: Vec<Check> = if all || selected.is_empty() {
        Check::ALL.to_vec()
    } else {
        selected
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, Error>>()?
    };
    let f = load_function(function)?;
    let name = function_name(function);
    let inst = match dual {
        Some(path) => Instance::with_dual(&name, &f, DualSolution::load(path, &f)?, cfg)?,
        None => Instance::solve(&name, &f, cfg)?,
    };
    let report = verify(&inst, cfg, &checks);
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    match out {
        Some(path) => advq_core::io::write_json(path, &report)?,
        None => emit(&report, None)?,
    }
    if !report.errors.is_empty() && report.failures.is_empty() {
        return Err(Failure::Usage(report.errors.join("; ")));
    }
    if !report.pass {
        return Err(Failure::Violated(format!(
            "failed: {}",
            report.failures.join(", ")
        )));
    }
    Ok(())
}

fn cmd_compose(cfg: &RunConfig, f: &str, g: &str, cap: usize, out: Option<&Path>) -> CmdResult {
    let (ff, gg) = (load_function(f)?, load_function(g)?);
    let report = compose_report(&ff, &gg, cap, &cfg.solver_options())?;
    eprintln!(
        "W_f = {:.9}  W_g = {:.9}  W_fg = {:.9}  W_f W_g = {:.9}  relative deviation = {:.3e}",
        report.w_f, report.w_g, report.w_fg, report.product, report.rel_deviation
    );
    emit(&report, out)?;
    Ok(())
}

fn cmd_certify(function: &str, gamma: &Path, dual: Option<&Path>, out: Option<&Path>) -> CmdResult {
    let f = load_function(function)?;
    let file: GammaFile = advq_core::io::read_json(gamma, "advsdp")?;
    let d = dual.map(|p| DualSolution::load(p, &f)).transpose()?;
    let report = certify(&f, &file.matrix()?, d.as_ref())?;
    emit(&report, out)?;
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let cfg = build_config(&cli.global)?;
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Solve {
            function,
            out,
            stats,
        } => cmd_solve(&cfg, &function.function, out.as_deref(), stats.as_deref()),
        Command::Build {
            function,
            dual,
            input,
            out,
        } => cmd_build(
            &cfg,
            &function.function,
            dual,
            input.as_deref(),
            out.as_deref(),
        ),
        Command::Simulate {
            function,
            dual,
            alg,
            input,
            all_inputs,
            trials,
            out,
        } => cmd_simulate(
            &cfg,
            &function.function,
            dual,
            *alg,
            input.as_deref(),
            *all_inputs,
            *trials,
            out.as_deref(),
        ),
        Command::Verify {
            function,
            dual,
            all,
            checks,
            out,
        } => cmd_verify(
            &cfg,
            &function.function,
            dual.as_deref(),
            *all,
            checks,
            out.as_deref(),
        ),
        Command::Compose { f, g, cap, out } => cmd_compose(&cfg, f, g, *cap, out.as_deref()),
        Command::Certify {
            function,
            gamma,
            dual,
            out,
        } => cmd_certify(&function.function, gamma, dual.as_deref(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("advq: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Violated(msg)) => {
            eprintln!("advq: verification failed: {msg}");
            ExitCode::from(2)
        }
    }
}
