//! Argument parsing and dispatch. Flags override config-file values; enums
//! parse from the same tokens the config files use.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pxp_core::hilbert::BoundaryCondition;
use pxp_core::protocols::{EtaMode, ProtocolKind, SequenceKind};
use pxp_core::seqstats::StreamSize;

use crate::config::{
    load_run_config, load_scan_config, parse_axis_target, MetricKind, RunConfig, ScanConfig,
};
use crate::presets::build_preset;
use crate::runners::{
    cmd_basis, cmd_effective, cmd_preset, cmd_run, cmd_scan, cmd_seqstats, SeqstatsJob,
};
use crate::{parse_serde_token, CliError, CliResult};

fn parse_protocol_flag(s: &str) -> Result<ProtocolKind, String> {
    parse_serde_token(s)
        .map_err(|_| format!("unknown protocol `{s}`; expected u3, u4, u5, dp-periodic, dp-random, dp-fib, or dp-tm"))
}

fn parse_bc_flag(s: &str) -> Result<BoundaryCondition, String> {
    parse_serde_token(s).map_err(|_| format!("unknown boundary condition `{s}`; expected pbc or obc"))
}

fn parse_eta_flag(s: &str) -> Result<EtaMode, String> {
    parse_serde_token(s).map_err(|_| format!("unknown jitter mode `{s}`; expected binary or uniform"))
}

fn parse_metric_flag(s: &str) -> Result<MetricKind, String> {
    parse_serde_token(s).map_err(|_| format!("unknown metric `{s}`; expected m0, mbar, or fbar"))
}

fn parse_seq_flag(s: &str) -> Result<SequenceKind, String> {
    match s {
        "tm" => Ok(SequenceKind::ThueMorse),
        "fib" => Ok(SequenceKind::Fibonacci),
        "periodic" => Ok(SequenceKind::Periodic),
        "random" => Ok(SequenceKind::Random),
        _ => Err(format!("unknown protocol `{s}`; expected tm, fib, periodic, or random")),
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "pxp",
    version,
    about = "Simulator for a constrained spin chain under two-rate and dipolar square-pulse drives"
)]
struct Cli {
    /// Worker threads for scan cells (falls back to PXP_THREADS, then all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Inspect the constrained basis: dimension, or the state list
    Basis(BasisArgs),
    /// Run drive trajectories and record magnetization and fidelity
    Run(RunArgs),
    /// Evaluate a metric over a two-axis parameter grid
    Scan(ScanArgs),
    /// Self-check table: closed-form drive analytics against numerics
    Effective(EffectiveArgs),
    /// Symbol-stream reduction statistics
    Seqstats(SeqstatsArgs),
    /// Canned figure-style jobs with system size and cycle budget exposed
    Preset(PresetArgs),
}

/// Drive and layout flags shared by run and scan; each one overrides the
/// matching config-file key.
#[derive(Args, Debug, Default, Clone, Copy)]
struct DriveFlags {
    /// Protocol: u3, u4, u5, dp-periodic, dp-random, dp-fib, dp-tm
    #[arg(long, value_parser = parse_protocol_flag)]
    protocol: Option<ProtocolKind>,
    /// Chain length
    #[arg(long)]
    l: Option<usize>,
    /// Boundary condition: pbc or obc
    #[arg(long, value_parser = parse_bc_flag)]
    bc: Option<BoundaryCondition>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta_w: Option<f64>,
    #[arg(long)]
    delta_lambda: Option<f64>,
    /// Cycle period T
    #[arg(long)]
    period: Option<f64>,
    /// Pulse length jitter amplitude dT
    #[arg(long)]
    dt_amp: Option<f64>,
    /// Jitter draw mode: binary or uniform
    #[arg(long, value_parser = parse_eta_flag)]
    eta: Option<EtaMode>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
}

macro_rules! apply_flags {
    ($flags:expr, $cfg:expr, [$($field:ident),* $(,)?]) => {
        $(if let Some(v) = $flags.$field {
            $cfg.$field = v;
        })*
    };
}

impl DriveFlags {
    fn apply_to_run(&self, cfg: &mut RunConfig) {
        apply_flags!(self, cfg, [
            protocol, l, bc, w, lambda, delta_w, delta_lambda, period, dt_amp, eta, seed,
        ]);
    }

    fn apply_to_scan(&self, cfg: &mut ScanConfig) {
        apply_flags!(self, cfg, [
            protocol, l, bc, w, lambda, delta_w, delta_lambda, period, dt_amp, eta, seed,
        ]);
    }
}

#[derive(Args, Debug)]
struct BasisArgs {
    /// Chain length
    #[arg(long, default_value_t = 12)]
    l: usize,
    /// Boundary condition: pbc or obc
    #[arg(long, default_value = "pbc", value_parser = parse_bc_flag)]
    bc: BoundaryCondition,
    /// List every basis state instead of the dimension summary
    #[arg(long)]
    states: bool,
    /// Output CSV file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config file with flat key = value entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    drive: DriveFlags,
    /// Number of drive cycles
    #[arg(long)]
    cycles: Option<usize>,
    /// Independent noise realizations, written as separate series
    #[arg(long)]
    realizations: Option<usize>,
    /// Output base path; writes BASE.csv and BASE.meta.json
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScanArgs {
    /// TOML config file with flat key = value entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    drive: DriveFlags,
    /// Cycle budget per cell
    #[arg(long)]
    m_max: Option<usize>,
    /// Cell metric: m0, mbar, or fbar
    #[arg(long, value_parser = parse_metric_flag)]
    metric: Option<MetricKind>,
    /// Drift threshold for the m0 metric (defaults per protocol family)
    #[arg(long)]
    epsilon: Option<f64>,
    /// First axis, `key=v1,v2,...` or `key=lo:hi:n`
    #[arg(long)]
    axis1: Option<String>,
    /// Second axis, same syntax
    #[arg(long)]
    axis2: Option<String>,
    /// Output base path; writes BASE.csv and BASE.meta.json
    #[arg(long, default_value = "scan")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EffectiveArgs {
    /// Random draws per integral section
    #[arg(long, default_value_t = 10)]
    draws: usize,
    /// Seed for the draws
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SeqstatsArgs {
    /// Exact reduced-length average over all streams up to this length
    #[arg(long = "bruteforce-N", value_name = "N")]
    bruteforce_n: Option<usize>,
    /// Closed-form reduced-length average at this length
    #[arg(long = "closed-N", value_name = "N")]
    closed_n: Option<usize>,
    /// Stream protocol: tm, fib, periodic, or random
    #[arg(long, value_parser = parse_seq_flag)]
    protocol: Option<SequenceKind>,
    /// Construction level (tm and fib)
    #[arg(long)]
    level: Option<u32>,
    /// Explicit stream length
    #[arg(long)]
    length: Option<usize>,
    /// Seed for the random protocol
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PresetArgs {
    /// Preset name: fig1 ... fig7 (fig3a/fig3b for the two flip drives)
    name: String,
    /// Chain length override
    #[arg(long)]
    l: Option<usize>,
    /// Cycle budget override
    #[arg(long = "m-max")]
    m_max: Option<usize>,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// fig2 only: pulse jitter w dT
    #[arg(long)]
    wdt: Option<f64>,
    /// Output base path (defaults to the preset name)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_run_config(args: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_run_config(path)?,
        None => RunConfig::default(),
    };
    args.drive.apply_to_run(&mut cfg);
    if let Some(c) = args.cycles {
        cfg.cycles = c;
    }
    if let Some(r) = args.realizations {
        cfg.realizations = r;
    }
    Ok(cfg)
}

/// `key=v1,v2,...` or `key=lo:hi:n`.
fn parse_axis_spec(spec: &str) -> CliResult<(String, Vec<f64>)> {
    let (key, rest) = spec
        .split_once('=')
        .ok_or_else(|| CliError::validation(format!("axis spec `{spec}` lacks `=`")))?;
    parse_axis_target(key)?;
    let bad = |what: &str| CliError::validation(format!("axis spec `{spec}`: {what}"));
    let values = if rest.contains(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("range form is lo:hi:n"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad("lo is not a number"))?;
        let hi: f64 = parts[1].parse().map_err(|_| bad("hi is not a number"))?;
        let n: usize = parts[2].parse().map_err(|_| bad("n is not an integer"))?;
        if n == 0 {
            return Err(bad("n must be at least 1"));
        }
        if n == 1 {
            vec![lo]
        } else {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|k| lo + step * k as f64).collect()
        }
    } else {
        rest.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad(&format!("`{v}` is not a number"))))
            .collect::<CliResult<Vec<f64>>>()?
    };
    Ok((key.to_string(), values))
}

fn resolve_scan_config(args: &ScanArgs) -> CliResult<ScanConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_scan_config(path)?,
        None => ScanConfig::default(),
    };
    args.drive.apply_to_scan(&mut cfg);
    if let Some(m) = args.m_max {
        cfg.m_max = m;
    }
    if let Some(m) = args.metric {
        cfg.metric = m;
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = Some(e);
    }
    if let Some(spec) = &args.axis1 {
        (cfg.axis1, cfg.axis1_values) = parse_axis_spec(spec)?;
    }
    if let Some(spec) = &args.axis2 {
        (cfg.axis2, cfg.axis2_values) = parse_axis_spec(spec)?;
    }
    Ok(cfg)
}

fn resolve_seqstats_job(args: &SeqstatsArgs) -> CliResult<SeqstatsJob> {
    let modes = [args.bruteforce_n.is_some(), args.closed_n.is_some(), args.protocol.is_some()];
    if modes.iter().filter(|&&m| m).count() != 1 {
        return Err(CliError::validation(
            "pick exactly one of --bruteforce-N, --closed-N, or --protocol",
        ));
    }
    if let Some(n) = args.bruteforce_n {
        return Ok(SeqstatsJob::Bruteforce { n });
    }
    if let Some(n) = args.closed_n {
        return Ok(SeqstatsJob::Closed { n });
    }
    let kind = args.protocol.expect("third mode");
    let size = match (args.level, args.length) {
        (Some(k), None) => StreamSize::Level(k),
        (None, Some(n)) => StreamSize::Length(n),
        _ => {
            return Err(CliError::validation(
                "--protocol needs exactly one of --level or --length",
            ))
        }
    };
    Ok(SeqstatsJob::Protocol { kind, size, seed: args.seed })
}

fn resolve_threads(flag: Option<usize>) -> CliResult<usize> {
    if let Some(n) = flag {
        if n == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        return Ok(n);
    }
    match std::env::var("PXP_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                CliError::validation(format!("PXP_THREADS must be a positive integer, got `{s}`"))
            }),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn dispatch(cmd: &Cmd, threads: usize) -> CliResult<()> {
    match cmd {
        Cmd::Basis(a) => cmd_basis(a.l, a.bc, a.states, a.out.as_deref()),
        Cmd::Run(a) => cmd_run(&resolve_run_config(a)?, &a.out, threads),
        Cmd::Scan(a) => cmd_scan(&resolve_scan_config(a)?, &a.out, threads),
        Cmd::Effective(a) => cmd_effective(a.draws, a.seed, a.out.as_deref()),
        Cmd::Seqstats(a) => cmd_seqstats(resolve_seqstats_job(a)?, a.out.as_deref()),
        Cmd::Preset(a) => {
            let preset = build_preset(&a.name, a.l, a.m_max, a.seed, a.wdt)?;
            let out = a.out.clone().unwrap_or_else(|| PathBuf::from(preset.name));
            cmd_preset(&preset, &out, threads)
        }
    }
}

/// Parse, run, and map the outcome to the process exit code: 0 success,
/// 1 rejected input, 2 runtime failure.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version through the same path; those exit 0
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            return code;
        }
    };
    let threads = match resolve_threads(cli.threads) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match dispatch(&cli.command, threads) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
