use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;

use isac_rsma::experiments::{
    run_beampattern_experiment, run_convergence, run_csi_sweep, run_pareto, run_power_sweep, run_validation,
    write_table, ExperimentConfig, ExperimentError, ExperimentKind, Manifest, OutputFormat, SchemeSpec, SweepResult,
};
use isac_rsma::metrics::MaScheme;
use isac_rsma::optimizer::PowerPolicy;
use isac_rsma::scenario::Profile;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "isac-rsma", version, about = "Fairness-aware RSMA ISAC experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON experiment configuration; missing fields take the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// First seed (later seeds count up from it).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated schemes, e.g. RSMA,I_RSMA,SDMA.
    #[arg(long, global = true, value_delimiter = ',')]
    schemes: Option<Vec<MaScheme>>,
    /// Sensing power policy applied to every listed scheme.
    #[arg(long, global = true)]
    policy: Option<PolicyArg>,
    #[arg(long, global = true, default_value = "csv")]
    format: OutputFormat,
    #[arg(long, global = true, default_value = "desk")]
    profile: Profile,
    /// Number of seeds.
    #[arg(long, global = true)]
    seeds: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum PolicyArg {
    Fairness,
    Equality,
}

impl From<PolicyArg> for PowerPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Fairness => PowerPolicy::FairnessAware,
            PolicyArg::Equality => PowerPolicy::EqualityAware,
        }
    }
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Per-iteration CRB traces for several antenna counts.
    Convergence,
    /// CRB against transmit power.
    PowerSweep,
    /// CRB against the CSI error bound.
    CsiSweep,
    /// Sensing/communication frontier over the weight λ₁.
    Pareto,
    /// Beampatterns of converged designs.
    Beampattern,
    /// Runs the oracle suites and prints a pass/fail table.
    Validate,
}

impl Command {
    fn kind(self) -> Option<ExperimentKind> {
        match self {
            Self::Convergence => Some(ExperimentKind::Convergence),
            Self::PowerSweep => Some(ExperimentKind::PowerSweep),
            Self::CsiSweep => Some(ExperimentKind::CsiSweep),
            Self::Pareto => Some(ExperimentKind::Pareto),
            Self::Beampattern => Some(ExperimentKind::Beampattern),
            Self::Validate => None,
        }
    }
}

enum Failure {
    Config(anyhow::Error),
    Solver(anyhow::Error),
    Other(anyhow::Error),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) | ExperimentError::Json(_) => Failure::Config(e.into()),
            e if e.is_solver_failure() => Failure::Solver(e.into()),
            e => Failure::Other(e.into()),
        }
    }
}

fn load_config(kind: ExperimentKind, g: &Global) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Config)?;
            let mut value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(Failure::Config)?;
            // fields absent from the file fall back to this experiment's defaults
            let mut merged = serde_json::to_value(ExperimentConfig::for_kind(kind, g.profile)).expect("config serializes");
            merge(&mut merged, value.take());
            serde_json::from_value(merged)
                .with_context(|| format!("invalid configuration in {}", path.display()))
                .map_err(Failure::Config)?
        }
        None => ExperimentConfig::for_kind(kind, g.profile),
    };
    if let Some(seed) = g.seed {
        cfg.seed0 = seed;
    }
    if let Some(n) = g.seeds {
        cfg.n_seeds = n;
    }
    if let Some(out) = &g.out {
        cfg.output_dir = out.clone();
    }
    if g.schemes.is_some() || g.policy.is_some() {
        let schemes: Vec<MaScheme> = match &g.schemes {
            Some(s) => s.clone(),
            None => {
                let mut s: Vec<MaScheme> = cfg.schemes.iter().map(|s| s.scheme).collect();
                s.dedup();
                s
            }
        };
        let policies: Vec<PowerPolicy> = match g.policy {
            Some(p) => vec![p.into()],
            None => {
                let mut p: Vec<PowerPolicy> = cfg.schemes.iter().map(|s| s.policy).collect();
                p.sort();
                p.dedup();
                p
            }
        };
        cfg.schemes = schemes.iter().flat_map(|&s| policies.iter().map(move |&p| SchemeSpec::new(s, p))).collect();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn emit_sweep(name: &str, cfg: &ExperimentConfig, res: &SweepResult, format: OutputFormat) -> Result<(), Failure> {
    let dir = &cfg.output_dir;
    let files = vec![
        write_table(dir, name, &res.records, format)?,
        write_table(dir, &format!("{name}_summary"), &res.summary, format)?,
    ];
    finish(name, cfg, &files, res.records.len(), res.failed())?;
    for row in &res.summary {
        println!(
            "{:>8} {:<7} {:<9} ok {:>2}  trace CRB {:>8.2} dB  min rate {:>6.3}",
            row.sweep_value, row.scheme, row.policy, row.n_ok, row.crb_trace_db, row.min_rate
        );
    }
    if res.all_infeasible() {
        return Err(Failure::Solver(anyhow::anyhow!("every run was infeasible")));
    }
    Ok(())
}

fn finish(name: &str, cfg: &ExperimentConfig, files: &[PathBuf], rows: usize, failed: usize) -> Result<(), Failure> {
    let manifest = Manifest::new(name, cfg, files, rows, failed).write(&cfg.output_dir)?;
    for f in files.iter().chain(std::iter::once(&manifest)) {
        info!("wrote {}", f.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let g = &cli.global;
    let Some(kind) = cli.command.kind() else {
        return validate(g);
    };
    let cfg = load_config(kind, g)?;
    let name = kind.tag().replace('-', "_");
    match cli.command {
        Command::PowerSweep => emit_sweep(&name, &cfg, &run_power_sweep(&cfg)?, g.format),
        Command::CsiSweep => emit_sweep(&name, &cfg, &run_csi_sweep(&cfg)?, g.format),
        Command::Pareto => emit_sweep(&name, &cfg, &run_pareto(&cfg)?, g.format),
        Command::Convergence => {
            let rows = run_convergence(&cfg)?;
            if rows.is_empty() {
                return Err(Failure::Solver(anyhow::anyhow!("no convergence run produced a trace")));
            }
            let file = write_table(&cfg.output_dir, &name, &rows, g.format)?;
            finish(&name, &cfg, &[file], rows.len(), 0)
        }
        Command::Beampattern => {
            let rows = run_beampattern_experiment(&cfg)?;
            let file = write_table(&cfg.output_dir, &name, &rows, g.format)?;
            finish(&name, &cfg, &[file], rows.len(), 0)
        }
        Command::Validate => unreachable!("handled above"),
    }
}

fn validate(g: &Global) -> Result<(), Failure> {
    let rows = run_validation(g.seed.unwrap_or(1));
    for r in &rows {
        println!("{:<24} {:>6} cases  {}  {}", r.suite, r.cases, if r.passed { "PASS" } else { "FAIL" }, r.detail);
    }
    if let Some(dir) = &g.out {
        write_table(Path::new(dir), "validate", &rows, g.format)?;
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::Other(anyhow::anyhow!("{failed} validation suite(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver failure: {e:#}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
