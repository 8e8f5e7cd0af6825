//! Command-line surface.
//!
//! Exit status: 0 on success, 2 for bad arguments, 3 for unreadable input
//! or artifacts, and 10 to 13 for a failure in the generate, screen, refine
//! or interpret stage.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::estim::{exact_fit, fit_mcmle, fit_mple, FitResult, Method};
use crate::fixtures;
use crate::gof::{gof_controls, gof_with_tau};
use crate::ingest::read_network;
use crate::network::Network;
use crate::pipeline::{
    run_pipeline, stage1_generate, stage2_screen, stage3_refine, CandidatePool, Evaluation,
    PipelineConfig, PipelineError, Refinement, Screening, Stage, DEFAULT_FALLBACK, DEFAULT_ROUNDS,
    DEFAULT_SEED,
};
use crate::proposer::{
    HeuristicEngine, ProposalEngine, RemoteConfig, RemoteEngine, DEFAULT_TOKEN_ENV,
};
use crate::sampler::{derive_seed, SimControls};
use crate::terms::{enumerate_universe, validate_spec, ModelSpec};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ergm-search",
    version,
    about = "Guarded search over ERGM specifications"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Florentine,
    Homophily,
    Triangles,
    Reciprocal,
}

#[derive(Debug, Clone, Args)]
pub struct NetworkArgs {
    /// Edge list, one `src,dst` pair per line.
    #[arg(long, required_unless_present = "fixture")]
    pub edges: Option<PathBuf>,
    /// Attribute table with a `node,...` header.
    #[arg(long)]
    pub attrs: Option<PathBuf>,
    #[arg(long)]
    pub directed: bool,
    /// Use a bundled network instead of files.
    #[arg(long, value_enum, conflicts_with_all = ["edges", "attrs"])]
    pub fixture: Option<Fixture>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProposerKind {
    Heuristic,
    Remote,
}

#[derive(Debug, Clone, Args)]
pub struct ProposerArgs {
    #[arg(long, value_enum, default_value = "heuristic")]
    pub proposer: ProposerKind,
    /// Chat-completions URL for the remote proposer.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value = "gpt-4o-mini")]
    pub model: String,
    /// Environment variable holding the bearer token.
    #[arg(long, default_value = DEFAULT_TOKEN_ENV)]
    pub token_env: String,
    #[arg(long, default_value_t = 3)]
    pub max_attempts: u32,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Informal description of the network.
    #[arg(long, default_value = "")]
    pub query: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::gof::TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    pub rounds: usize,
    #[arg(long, default_value_t = DEFAULT_FALLBACK)]
    pub fallback: usize,
    /// Retained draws for MCMLE and GOF simulations.
    #[arg(long)]
    pub draws: Option<usize>,
}

impl SearchArgs {
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            query: self.query.clone(),
            seed: self.seed,
            tau: self.tau,
            rounds: self.rounds,
            fallback: self.fallback,
            draws: self.draws,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage and write run.json, events.ndjson, gof_final.tsv and summary.md.
    Run {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        proposer: ProposerArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print structural diagnostics and attribute metadata as JSON.
    Diagnose {
        #[command(flatten)]
        net: NetworkArgs,
    },
    /// Print the admissible terms, one per line.
    Universe {
        #[command(flatten)]
        net: NetworkArgs,
    },
    /// Generate and screen candidates; writes pool.json.
    Screen {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        proposer: ProposerArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit one specification; writes fit.json.
    Fit {
        #[command(flatten)]
        net: NetworkArgs,
        /// Terms separated by `+` or `,`, e.g. "edges + gwesp(decay=0.5)".
        #[arg(long)]
        spec: String,
        #[arg(long, default_value = "mple")]
        method: Method,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulation GOF for a persisted fit; writes gof_final.tsv.
    Gof {
        #[command(flatten)]
        net: NetworkArgs,
        /// A fit.json written by `fit`.
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = crate::gof::TAU)]
        tau: f64,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fallback refit and edit loop from a pool.json; writes refine.json and gof_final.tsv.
    Refine {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long)]
        pool: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        proposer: ProposerArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Mechanism summary for a refine.json or fit.json; writes summary.md.
    Explain {
        #[command(flatten)]
        net: NetworkArgs,
        /// refine.json or fit.json.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        proposer: ProposerArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Candidate pool plus screening outcome, as written by `screen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenArtifact {
    pub pool: CandidatePool,
    pub screening: Screening,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError {
            code: e.stage.exit_code(),
            message: e.to_string(),
        }
    }
}

fn stage_error(stage: Stage, message: impl Into<String>) -> CliError {
    CliError {
        code: stage.exit_code(),
        message: format!("{stage} stage failed: {}", message.into()),
    }
}

pub fn load_network(args: &NetworkArgs) -> Result<Network, CliError> {
    match args.fixture {
        Some(Fixture::Florentine) => Ok(fixtures::florentine()),
        Some(Fixture::Homophily) => Ok(fixtures::planted_homophily(40, 2, 0.3, 0.02, 7)),
        Some(Fixture::Triangles) => Ok(fixtures::planted_triangles(30, 0.03, 7)),
        Some(Fixture::Reciprocal) => Ok(fixtures::reciprocal(20, 0.1, 0.5, 7)),
        None => {
            let edges = args
                .edges
                .as_deref()
                .ok_or_else(|| CliError::usage("--edges is required"))?;
            read_network(edges, args.attrs.as_deref(), args.directed)
                .map_err(|e| CliError::input(e.to_string()))
        }
    }
}

fn engine(args: &ProposerArgs) -> Result<Box<dyn ProposalEngine>, CliError> {
    match args.proposer {
        ProposerKind::Heuristic => Ok(Box::new(HeuristicEngine)),
        ProposerKind::Remote => {
            let endpoint = args
                .endpoint
                .clone()
                .ok_or_else(|| CliError::usage("--endpoint is required with --proposer remote"))?;
            let config = RemoteConfig {
                token_env: args.token_env.clone(),
                max_attempts: args.max_attempts,
                ..RemoteConfig::new(endpoint, args.model.clone())
            };
            RemoteEngine::from_config(config)
                .map(|e| Box::new(e) as Box<dyn ProposalEngine>)
                .map_err(|e| CliError::usage(e.to_string()))
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    write(dir, name, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

fn cmd_run(
    net: &Network,
    config: &PipelineConfig,
    engine: &dyn ProposalEngine,
    out: &Path,
) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", out.display())))?;
    let events_path = out.join("events.ndjson");
    let mut events = fs::File::create(&events_path)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", events_path.display())))?;
    let result = run_pipeline(net, engine, config, &mut |e| {
        let mut v = serde_json::to_value(e).expect("events serialize");
        v["at_unix_ms"] = serde_json::json!(unix_ms() as u64);
        let _ = writeln!(events, "{v}");
        eprintln!("[{}] {:?} {}", e.stage, e.kind, e.detail);
    });
    let run = result?;
    write_json(out, "run.json", &run)?;
    write(out, "gof_final.tsv", &run.final_eval().gof.to_tsv())?;
    write(out, "summary.md", &run.summary_markdown())?;
    println!("{}", run.summary_markdown());
    Ok(())
}

fn cmd_fit(
    net: &Network,
    spec: &str,
    method: Method,
    seed: u64,
    draws: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let spec = ModelSpec::parse(spec).map_err(|e| CliError::usage(e.to_string()))?;
    validate_spec(&spec, &enumerate_universe(net))
        .map_err(|e| CliError::usage(format!("invalid specification: {e}")))?;
    let fitted = match method {
        Method::Mple => fit_mple(&spec, net),
        Method::Exact => exact_fit(&spec, net),
        Method::Mcmle => {
            let init = match fit_mple(&spec, net) {
                Ok(f) if f.converged => f.theta,
                _ => vec![0.0; spec.len()],
            };
            let mut controls = SimControls::default_for(net, derive_seed(seed, "fit", 0));
            if let Some(d) = draws {
                controls = controls.with_draws(d);
            }
            fit_mcmle(&spec, net, &init, &controls)
        }
    };
    let fit = fitted.map_err(|e| CliError::usage(format!("fit failed: {e}")))?;
    for (name, t) in fit.coefficients() {
        println!("{name}\t{t:.6}");
    }
    println!(
        "log_lik\t{:.6}\nbic\t{:.6}\nconverged\t{}",
        fit.log_lik, fit.bic, fit.converged
    );
    write_json(out, "fit.json", &fit)?;
    Ok(())
}

fn cmd_gof(
    net: &Network,
    fit_path: &Path,
    seed: u64,
    tau: f64,
    draws: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let fit: FitResult = read_json(fit_path)?;
    let mut controls = gof_controls(net, derive_seed(seed, "gof", 0));
    if let Some(d) = draws {
        controls = controls.with_draws(d);
    }
    let report = gof_with_tau(&fit.spec, &fit.theta, net, &controls, tau)
        .map_err(|e| CliError::usage(e.to_string()))?;
    write(out, "gof_final.tsv", &report.to_tsv())?;
    print!("{}", report.to_tsv());
    println!(
        "max |z| {:.3}, {}; simulated edges {:.1} against {}{}",
        report.max_abs_z,
        if report.adequate {
            "adequate"
        } else {
            "not adequate"
        },
        report.sim_edge_mean,
        report.observed_edges,
        if report.degenerate {
            " (degenerate)"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_explain(
    net: &Network,
    input: &Path,
    engine: &dyn ProposalEngine,
    out: &Path,
) -> Result<(), CliError> {
    let text = fs::read_to_string(input)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", input.display())))?;
    let (spec, theta) = if let Ok(r) = serde_json::from_str::<Refinement>(&text) {
        (r.result.spec, r.result.fit.theta)
    } else {
        let f: FitResult = serde_json::from_str(&text).map_err(|e| {
            CliError::input(format!(
                "{}: not a refine.json or fit.json: {e}",
                input.display()
            ))
        })?;
        (f.spec, f.theta)
    };
    let summary = engine
        .synthesize(&spec, &theta, &net.metadata())
        .map_err(|e| stage_error(Stage::Interpret, e.to_string()))?;
    let mut md = format!("# Mechanisms for `{spec}`\n\n{}\n", summary.text);
    if summary.claims.is_empty() {
        md.push_str("No mechanism is supported by the fitted terms.\n");
    }
    write(out, "summary.md", &md)?;
    print!("{md}");
    Ok(())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            net,
            search,
            proposer,
            out,
        } => {
            let config = search.config();
            config.validate().map_err(CliError::usage)?;
            let engine = engine(&proposer)?;
            cmd_run(&load_network(&net)?, &config, engine.as_ref(), &out)
        }
        Command::Diagnose { net } => {
            let net = load_network(&net)?;
            let v =
                serde_json::json!({"diagnostics": net.diagnostics(), "metadata": net.metadata()});
            println!("{}", serde_json::to_string_pretty(&v).unwrap());
            Ok(())
        }
        Command::Universe { net } => {
            let mut stdout = std::io::stdout().lock();
            for name in enumerate_universe(&load_network(&net)?).names() {
                if writeln!(stdout, "{name}").is_err() {
                    break;
                }
            }
            Ok(())
        }
        Command::Screen {
            net,
            search,
            proposer,
            out,
        } => {
            let config = search.config();
            config.validate().map_err(CliError::usage)?;
            let engine = engine(&proposer)?;
            let net = load_network(&net)?;
            let pool = stage1_generate(&net, &config.query, engine.as_ref())?;
            let screening = stage2_screen(&pool, &net, config.seed)?;
            for r in screening.survivors() {
                println!(
                    "{:.4}\t{}",
                    r.bic_s.unwrap_or(f64::NAN),
                    r.spec.as_ref().unwrap()
                );
            }
            write_json(&out, "pool.json", &ScreenArtifact { pool, screening })?;
            Ok(())
        }
        Command::Fit {
            net,
            spec,
            method,
            seed,
            draws,
            out,
        } => cmd_fit(&load_network(&net)?, &spec, method, seed, draws, &out),
        Command::Gof {
            net,
            fit,
            seed,
            tau,
            draws,
            out,
        } => {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(CliError::usage("--tau must be positive"));
            }
            cmd_gof(&load_network(&net)?, &fit, seed, tau, draws, &out)
        }
        Command::Refine {
            net,
            pool,
            search,
            proposer,
            out,
        } => {
            let config = search.config();
            config.validate().map_err(CliError::usage)?;
            let engine = engine(&proposer)?;
            let net = load_network(&net)?;
            let artifact: ScreenArtifact = read_json(&pool)?;
            let refinement = stage3_refine(&artifact.screening, &net, engine.as_ref(), &config)?;
            let Evaluation { spec, fit, gof } = &refinement.result;
            println!("{spec}\tBIC {:.4}\tmax |z| {:.3}", fit.bic, gof.max_abs_z);
            write(&out, "gof_final.tsv", &gof.to_tsv())?;
            write_json(&out, "refine.json", &refinement)?;
            Ok(())
        }
        Command::Explain {
            net,
            input,
            proposer,
            out,
        } => {
            let engine = engine(&proposer)?;
            cmd_explain(&load_network(&net)?, &input, engine.as_ref(), &out)
        }
    }
}

/// Parses the process arguments, runs, and returns the exit status.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
