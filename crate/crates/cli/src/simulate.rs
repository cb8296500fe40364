use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, ValueEnum};
use pfdr::sim::{simulate as run_simulation, SampleMode, SimAggregate, DEFAULT_BUDGET};
use pfdr::{SimConfig, SimFamily};
use serde::{Deserialize, Serialize};

use crate::args::{FamilyArgs, ModelArgs, ProcedureArgs};
use crate::error::CliError;
use crate::output::{csv_bytes, json_bytes, write_bytes};

pub const SCHEMA_SIMULATE: &str = "pfdr.simulate/1";
pub const SCHEMA_MANIFEST: &str = "pfdr.manifest/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeKind {
    /// Draw the sufficient statistic directly.
    Sufficient,
    /// Draw every observation.
    Raw,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub procedure: ProcedureArgs,
    #[arg(long = "n-nulls")]
    pub n_nulls: u64,
    #[arg(long = "n-reps", default_value_t = 1)]
    pub n_reps: u64,
    /// Defaults to 0 with a warning.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeKind::Sufficient)]
    pub mode: ModeKind,
    /// Upper bound on n_nulls * k * n_reps scalar draws.
    #[arg(long, env = "PFDR_BUDGET")]
    pub budget: Option<u64>,
    /// Aggregate JSON path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-repetition CSV path.
    #[arg(long = "reps-csv")]
    pub reps_csv: Option<PathBuf>,
    /// Run manifest path; defaults to `<out>.manifest.json` when --out is given.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRecord {
    pub schema_version: String,
    pub command: String,
    pub aggregate: SimAggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub command: String,
    pub tool_version: String,
    pub argv: Vec<String>,
    pub config: SimConfig,
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<String>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn config(args: &SimulateArgs) -> Result<SimConfig, CliError> {
    let params = args.model.params()?;
    let family_spec = args.family.spec()?;
    let family = SimFamily::try_from(&family_spec)?;
    let seed = args.seed.unwrap_or_else(|| {
        eprintln!("warning: --seed not given, using seed 0");
        0
    });
    let mut c = SimConfig::new(params, family, args.n_nulls, args.n_reps, seed);
    c.procedure = args.procedure.procedure(&params, family_spec.fisher_info())?;
    c.mode = match args.mode {
        ModeKind::Sufficient => SampleMode::SufficientStatistic,
        ModeKind::Raw => SampleMode::RawObservations,
    };
    c.budget = args.budget.unwrap_or(DEFAULT_BUDGET);
    Ok(c)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let started = unix_now();
    let cfg = config(args)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = args.threads {
            if n == 0 {
                return Err(CliError::usage("--threads: must be >= 1"));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::io("thread pool", e))?
    };
    let report = pool.install(|| run_simulation(&cfg))?;

    let record = SimulateRecord {
        schema_version: SCHEMA_SIMULATE.into(),
        command: "simulate".into(),
        aggregate: report.aggregate,
    };
    write_bytes(args.out.as_deref(), &json_bytes(&record)?)?;
    let mut outputs: Vec<String> = args.out.iter().map(|p| p.display().to_string()).collect();
    if let Some(path) = &args.reps_csv {
        write_bytes(Some(path), &csv_bytes(None, &report.reps)?)?;
        outputs.push(path.display().to_string());
    }

    let manifest_path = args.manifest.clone().or_else(|| {
        args.out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = manifest_path {
        write_manifest(&path, &cfg, args.threads, started, outputs)?;
    }
    Ok(())
}

fn write_manifest(
    path: &Path,
    cfg: &SimConfig,
    threads: Option<usize>,
    started: f64,
    outputs: Vec<String>,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        schema_version: SCHEMA_MANIFEST.into(),
        command: "simulate".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        argv: std::env::args().collect(),
        config: *cfg,
        seeds: vec![cfg.seed],
        threads,
        started_unix_s: started,
        finished_unix_s: unix_now(),
        outputs,
    };
    write_bytes(Some(path), &json_bytes(&manifest)?)
}
