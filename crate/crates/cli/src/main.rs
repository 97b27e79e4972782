#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use bondlimit::tolerances as tol;
use bondlimit::Error;

const CSV_HELP: &str = "\
CSV columns by command:
  hydrogen    quantity,value,method,tolerance
  mmot        tuple,weight            (tuple = point indices joined by ';')
  partial     index,x,y,z,rho,mu
  envelope    n,cost,excess,bound
  gb-table    alpha,value,method
  dissociate  alpha,gamma_value       (mass on the first nucleus, two nuclei)
  h2          alpha,gamma_value
  staylocal   cluster,mass,within,expected

Exit codes: 0 success, 1 configuration error, 2 invariant violation,
3 solver non-convergence.";

#[derive(Parser, Debug)]
#[command(name = "bondlimit", version, about = "Coulomb transport and bond-dissociation experiments", after_help = CSV_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration of the experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for results.json, results.csv and run.log.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Master seed for all stochastic restarts.
    #[arg(long, global = true, default_value_t = tol::DEFAULT_SEED)]
    seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Nuclear charge, overriding the config.
    #[arg(long = "Z", global = true)]
    z: Option<f64>,

    /// Correlation strength, overriding the config.
    #[arg(long, global = true)]
    b: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Hydrogenic benchmark: direct search and analytic density.
    Hydrogen,
    /// Multi-marginal Coulomb transport of a discrete or radial measure.
    Mmot,
    /// Fractional transport C(ρ, m) by joint LP.
    Partial,
    /// Relaxed envelope and translated copies.
    Envelope,
    /// Tabulate g_b(Z, ·).
    GbTable,
    /// Electron allocation and dissociation limit for a molecule.
    Dissociate,
    /// The H2 dissociation study.
    H2,
    /// Within-cluster plan mass of an optimal plan.
    Staylocal,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Hydrogen => "hydrogen",
            Command::Mmot => "mmot",
            Command::Partial => "partial",
            Command::Envelope => "envelope",
            Command::GbTable => "gb-table",
            Command::Dissociate => "dissociate",
            Command::H2 => "h2",
            Command::Staylocal => "staylocal",
        }
    }
}

/// What a command produces besides the common header.
pub struct Outcome {
    pub config: Value,
    pub results: Value,
    pub csv: String,
    pub log: Vec<String>,
}

/// Shared flags passed to every command.
pub struct Context {
    pub config: Option<String>,
    pub seed: u64,
    pub z: Option<f64>,
    pub b: Option<f64>,
}

/// Failure of a command, with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Run(e) => match e {
                Error::InvariantViolation(_) | Error::TableInvalid { .. } => 2,
                Error::IterationLimit { .. } | Error::Lp(_) => 3,
                _ => 1,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) => format!("config error: {m}"),
            Failure::Run(e) => e.to_string(),
        }
    }
}

fn tolerances() -> Value {
    json!({
        "tol_mass": tol::TOL_MASS,
        "merge_distance": tol::MERGE_DISTANCE,
        "coincidence_eps": tol::COINCIDENCE_EPS,
        "tol_marginal": tol::TOL_MARGINAL,
        "lp_size_cap": tol::LP_SIZE_CAP as f64,
        "sinkhorn_max_iter": tol::SINKHORN_MAX_ITER,
        "entropic_cap_factor": tol::ENTROPIC_CAP_FACTOR,
        "bounds_slack": tol::BOUNDS_SLACK,
        "conv_tol": tol::CONV_TOL,
        "gb_num_tol": tol::GB_NUM_TOL,
        "epsilon_floor": tol::EPSILON_FLOOR,
        "radial_r_max": tol::RADIAL_R_MAX,
        "radial_intervals": tol::RADIAL_INTERVALS,
    })
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, dir.join(name))
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let config = match &cli.config {
        Some(p) => Some(
            fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let ctx = Context {
        config,
        seed: cli.seed,
        z: cli.z,
        b: cli.b,
    };
    match cli.command {
        Command::Hydrogen => commands::hydrogen(&ctx),
        Command::Mmot => commands::mmot(&ctx),
        Command::Partial => commands::partial(&ctx),
        Command::Envelope => commands::envelope(&ctx),
        Command::GbTable => commands::gb_table(&ctx),
        Command::Dissociate => commands::dissociate(&ctx),
        Command::H2 => commands::h2(&ctx),
        Command::Staylocal => commands::staylocal(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("cannot create {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    let start = Instant::now();
    let name = cli.command.name();
    let mut log = vec![format!("command {name}, seed {}", cli.seed)];
    let (code, doc, csv) = match run(&cli) {
        Ok(out) => {
            log.extend(out.log);
            let doc = json!({
                "command": name,
                "status": "ok",
                "seed": cli.seed,
                "tolerances": tolerances(),
                "config": out.config,
                "results": out.results,
            });
            (0u8, doc, out.csv)
        }
        Err(f) => {
            let msg = f.message();
            eprintln!("{msg}");
            log.push(format!("error: {msg}"));
            let doc = json!({
                "command": name,
                "status": "error",
                "seed": cli.seed,
                "exit_code": f.code(),
                "error": msg,
                "tolerances": tolerances(),
            });
            (f.code(), doc, String::new())
        }
    };
    log.push(format!("finished in {:.3} s, exit code {code}", start.elapsed().as_secs_f64()));
    let text = serde_json::to_string_pretty(&doc).expect("plain JSON values") + "\n";
    let written = write_atomic(&cli.out, "results.json", &text)
        .and_then(|_| write_atomic(&cli.out, "results.csv", &csv))
        .and_then(|_| write_atomic(&cli.out, "run.log", &(log.join("\n") + "\n")));
    if let Err(e) = written {
        eprintln!("cannot write outputs to {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
