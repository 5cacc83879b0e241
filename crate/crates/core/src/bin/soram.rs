//! Command-line frontend for the ORAM simulators.
//!
//! Subcommands: `run` (workload experiments), `table2` (closed-form
//! comparison-table reproduction), `bins` (balls-into-bins), `oracle`
//! (bounded vs. unbounded equivalence) and `security` (statistical tester).
//! Records go to stdout as JSON lines; `--summary` adds a human-readable
//! digest on stderr. Exit codes: 0 pass, 1 invariant or acceptance failure,
//! 2 configuration error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use soram::analysis::{run_bins, run_oracle_pair, security_test, OracleConfig, SecurityConfig};
use soram::error::ParamError;
use soram::harness::{
    check_table2, load_trace_file, rescale_analog, run_experiment, AnalogRow, ExperimentConfig,
    Workload, WorkloadKind,
};
use soram::params::{derive_params_t1, derive_params_t2, Construction, TreeParams};
use soram::payload::BlockPayload;
use soram::space::{closed_form_report, SpaceMode};
use soram::store::{PhysicalStore, TraceMode};
use soram::succinct::Op;
use soram::tables::TableMode;

#[derive(Parser)]
#[command(name = "soram", version, about = "Succinct tree-ORAM simulators and experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Write JSON-line records to this file instead of stdout. Relative
    /// paths resolve against SORAM_OUT_DIR (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>, String> {
    match out {
        None => Ok(Box::new(std::io::stdout())),
        Some(path) => {
            let resolved = if path.is_absolute() {
                path.clone()
            } else {
                let dir = std::env::var_os("SORAM_OUT_DIR")
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."));
                dir.join(path)
            };
            if let Some(parent) = resolved.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
                }
            }
            let file = std::fs::File::create(&resolved)
                .map_err(|e| format!("{}: {e}", resolved.display()))?;
            Ok(Box::new(std::io::BufWriter::new(file)))
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a workload against one construction, one record per repetition.
    Run(RunArgs),
    /// Reproduce the concrete-parameter comparison table (closed form).
    Table2(Table2Args),
    /// Balls-into-bins simulation with one or two choices.
    Bins(BinsArgs),
    /// Bounded vs. unbounded-bucket equivalence oracle.
    Oracle(OracleArgs),
    /// Statistical access-pattern security test.
    Security(SecurityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConstructionArg {
    Path,
    T1,
    T2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableModeArg {
    Memory,
    Outsourced,
}

impl From<TableModeArg> for TableMode {
    fn from(v: TableModeArg) -> TableMode {
        match v {
            TableModeArg::Memory => TableMode::InMemory,
            TableModeArg::Outsourced => TableMode::Outsourced,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WorkloadArg {
    Scan,
    Uniform,
    Single,
    File,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnalogArg {
    T1Rigorous,
    T1Aggressive,
    T2Aggressive,
}

impl From<AnalogArg> for AnalogRow {
    fn from(v: AnalogArg) -> AnalogRow {
        match v {
            AnalogArg::T1Rigorous => AnalogRow::T1Rigorous,
            AnalogArg::T1Aggressive => AnalogRow::T1Aggressive,
            AnalogArg::T2Aggressive => AnalogRow::T2Aggressive,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value config file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    construction: Option<ConstructionArg>,
    #[arg(long, visible_alias = "N")]
    n_blocks: Option<u64>,
    #[arg(long, visible_alias = "B")]
    block_bits: Option<u32>,
    #[arg(long, visible_alias = "Z")]
    z: Option<u32>,
    #[arg(long, visible_alias = "L")]
    height: Option<u32>,
    #[arg(long, visible_alias = "M")]
    leaf_cap: Option<u32>,
    /// Shrink factor for derived parameters.
    #[arg(long)]
    f: Option<u64>,
    /// Leaf slack coefficient (one-label construction).
    #[arg(long)]
    g: Option<f64>,
    /// Leaf slack epsilon (two-choice construction).
    #[arg(long)]
    eps: Option<f64>,
    /// Rescale a published aggressive/rigorous row to this N.
    #[arg(long, value_enum)]
    analog: Option<AnalogArg>,
    #[arg(long, value_enum)]
    table_mode: Option<TableModeArg>,
    #[arg(long, value_enum)]
    workload: Option<WorkloadArg>,
    /// Address for the single-address workload.
    #[arg(long)]
    addr: Option<u64>,
    #[arg(long)]
    workload_file: Option<PathBuf>,
    /// Total accesses; defaults to passes * N.
    #[arg(long)]
    len: Option<u64>,
    /// Full scans for the scan workload.
    #[arg(long)]
    passes: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print bandwidth and space accounting without executing accesses.
    #[arg(long)]
    dry_run_accounting: bool,
    /// Record the first repetition's physical trace to this CSV file.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Human-readable digest on stderr.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct Table2Args {
    #[arg(long, visible_alias = "N", default_value_t = 1 << 20)]
    n_blocks: u64,
    #[arg(long, visible_alias = "B", default_value_t = 1 << 10)]
    block_bits: u32,
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct BinsArgs {
    #[arg(long, default_value_t = 1)]
    choices: u8,
    #[arg(long)]
    bins: u64,
    #[arg(long)]
    balls: u64,
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "t1")]
    construction: ConstructionArg,
    #[arg(long, visible_alias = "N", default_value_t = 1 << 10)]
    n_blocks: u64,
    #[arg(long, visible_alias = "B", default_value_t = 64)]
    block_bits: u32,
    #[arg(long, default_value_t = 16)]
    f: u64,
    /// Workload length; defaults to one scan.
    #[arg(long)]
    len: Option<u64>,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Desynchronize the tapes; the runs are then expected to differ.
    #[arg(long)]
    negative_control: bool,
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct SecurityArgs {
    #[arg(long, value_enum, default_value = "t1")]
    construction: ConstructionArg,
    #[arg(long, visible_alias = "N", default_value_t = 1 << 14)]
    n_blocks: u64,
    #[arg(long, visible_alias = "B", default_value_t = 1 << 10)]
    block_bits: u32,
    #[arg(long, default_value_t = 10_000)]
    len: u64,
    #[arg(long, default_value_t = 200)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "memory")]
    table_mode: TableModeArg,
    #[arg(long)]
    summary: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = open_out(&cli.out).and_then(|mut out| match cli.cmd {
        Cmd::Run(args) => cmd_run(args, &mut out),
        Cmd::Table2(args) => cmd_table2(args, &mut out),
        Cmd::Bins(args) => cmd_bins(args, &mut out),
        Cmd::Oracle(args) => cmd_oracle(args, &mut out),
        Cmd::Security(args) => cmd_security(args, &mut out),
    });
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn derive_for(
    construction: ConstructionArg,
    n: u64,
    b: u32,
    z: Option<u32>,
    height: Option<u32>,
    leaf_cap: Option<u32>,
    f: Option<u64>,
    g: Option<f64>,
    eps: Option<f64>,
) -> Result<(TreeParams, Vec<String>), String> {
    let explicit = height.is_some() || leaf_cap.is_some();
    let fail = |e: ParamError| e.to_string();
    match construction {
        ConstructionArg::Path => {
            let d = TreeParams::path_oram(n, b, z.unwrap_or(5), height).map_err(fail)?;
            Ok((d.params, d.warnings.iter().map(|w| w.to_string()).collect()))
        }
        ConstructionArg::T1 => {
            if explicit {
                let (h, m) = (
                    height.ok_or("--height required with --leaf-cap")?,
                    leaf_cap.ok_or("--leaf-cap required with --height")?,
                );
                let d = TreeParams::manual(Construction::SuccinctOne, n, b, z.unwrap_or(3), h, m)
                    .map_err(fail)?;
                Ok((d.params, d.warnings.iter().map(|w| w.to_string()).collect()))
            } else {
                let d = derive_params_t1(n, b, f.ok_or("--f required (or --height/--leaf-cap)")?,
                    g.unwrap_or(2.0))
                .map_err(fail)?;
                let mut params = d.params;
                if let Some(z) = z {
                    params.bucket_cap = z;
                }
                Ok((params, d.warnings.iter().map(|w| w.to_string()).collect()))
            }
        }
        ConstructionArg::T2 => {
            if explicit {
                let (h, m) = (
                    height.ok_or("--height required with --leaf-cap")?,
                    leaf_cap.ok_or("--leaf-cap required with --height")?,
                );
                let d = TreeParams::manual(Construction::SuccinctTwo, n, b, z.unwrap_or(4), h, m)
                    .map_err(fail)?;
                Ok((d.params, d.warnings.iter().map(|w| w.to_string()).collect()))
            } else {
                let d = derive_params_t2(n, b, f.ok_or("--f required (or --height/--leaf-cap)")?,
                    eps.unwrap_or(1.0))
                .map_err(fail)?;
                let mut params = d.params;
                if let Some(z) = z {
                    params.bucket_cap = z;
                }
                Ok((params, d.warnings.iter().map(|w| w.to_string()).collect()))
            }
        }
    }
}

fn apply_config_file(args: &mut RunArgs) -> Result<(), String> {
    let Some(path) = &args.config else {
        return Ok(());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let map = soram::harness::config::parse_flat(&text)?;
    let parse = |k: &str, v: &str, what: &str| -> Result<u64, String> {
        v.parse::<u64>().map_err(|e| format!("config {k}: bad {what} {v:?}: {e}"))
    };
    for (k, v) in &map {
        match k.as_str() {
            "construction" => {
                if args.construction.is_none() {
                    args.construction = Some(match v.as_str() {
                        "path" => ConstructionArg::Path,
                        "t1" => ConstructionArg::T1,
                        "t2" => ConstructionArg::T2,
                        other => return Err(format!("config construction: unknown {other:?}")),
                    });
                }
            }
            "n-blocks" => args.n_blocks = args.n_blocks.or(Some(parse(k, v, "integer")?)),
            "block-bits" => {
                args.block_bits = args.block_bits.or(Some(parse(k, v, "integer")? as u32))
            }
            "z" => args.z = args.z.or(Some(parse(k, v, "integer")? as u32)),
            "height" => args.height = args.height.or(Some(parse(k, v, "integer")? as u32)),
            "leaf-cap" => args.leaf_cap = args.leaf_cap.or(Some(parse(k, v, "integer")? as u32)),
            "f" => args.f = args.f.or(Some(parse(k, v, "integer")?)),
            "g" => {
                args.g = args.g.or(Some(
                    v.parse::<f64>().map_err(|e| format!("config g: {e}"))?,
                ))
            }
            "eps" => {
                args.eps = args.eps.or(Some(
                    v.parse::<f64>().map_err(|e| format!("config eps: {e}"))?,
                ))
            }
            "table-mode" => {
                if args.table_mode.is_none() {
                    args.table_mode = Some(match v.as_str() {
                        "memory" => TableModeArg::Memory,
                        "outsourced" => TableModeArg::Outsourced,
                        other => return Err(format!("config table-mode: unknown {other:?}")),
                    });
                }
            }
            "workload" => {
                if args.workload.is_none() {
                    args.workload = Some(match v.as_str() {
                        "scan" => WorkloadArg::Scan,
                        "uniform" => WorkloadArg::Uniform,
                        "single" => WorkloadArg::Single,
                        "file" => WorkloadArg::File,
                        other => return Err(format!("config workload: unknown {other:?}")),
                    });
                }
            }
            "workload-file" => {
                if args.workload_file.is_none() {
                    args.workload_file = Some(PathBuf::from(v));
                }
            }
            "addr" => args.addr = args.addr.or(Some(parse(k, v, "integer")?)),
            "len" => args.len = args.len.or(Some(parse(k, v, "integer")?)),
            "passes" => args.passes = args.passes.or(Some(parse(k, v, "integer")?)),
            "reps" => args.reps = args.reps.or(Some(parse(k, v, "integer")? as u32)),
            "seed" => args.seed = args.seed.or(Some(parse(k, v, "integer")?)),
            other => return Err(format!("config: unknown key {other:?}")),
        }
    }
    Ok(())
}

fn cmd_run(mut args: RunArgs, out: &mut dyn Write) -> Result<ExitCode, String> {
    apply_config_file(&mut args)?;
    let construction = args.construction.ok_or("--construction is required")?;
    let n = args.n_blocks.ok_or("--n-blocks is required")?;
    let b = args.block_bits.unwrap_or(1 << 10);

    let (params, warnings, mut aggressive) = if let Some(analog) = args.analog {
        let (p, mapping) = rescale_analog(analog.into(), n, b).map_err(|e| e.to_string())?;
        let aggr = !matches!(analog, AnalogArg::T1Rigorous);
        (p, vec![mapping], aggr)
    } else {
        let (p, w) = derive_for(
            construction,
            n,
            b,
            args.z,
            args.height,
            args.leaf_cap,
            args.f,
            args.g,
            args.eps,
        )?;
        (p, w, false)
    };
    // Explicit overrides without a stash guarantee are aggressive settings.
    if warnings.iter().any(|w| w.contains("aggressive")) {
        aggressive = true;
    }

    if args.dry_run_accounting {
        let report = closed_form_report(&params, SpaceMode::Table2);
        let full = closed_form_report(&params, SpaceMode::Full);
        let record = serde_json::json!({
            "params": params,
            "bandwidth_data_blocks": params.bandwidth_blocks(),
            "space_table2": report,
            "space_full": full,
            "warnings": warnings,
        });
        writeln!(out, "{record}").map_err(|e| e.to_string())?;
        if args.summary {
            eprintln!(
                "dry-run: Z={} L={} M={} bandwidth={} extra-space={:.4}N",
                params.bucket_cap,
                params.height,
                params.leaf_cap,
                params.bandwidth_blocks(),
                report.extra_blocks_over_n
            );
        }
        return Ok(ExitCode::SUCCESS);
    }

    let default_len = args
        .passes
        .map(|p| p * n)
        .unwrap_or(n);
    let len = args.len.unwrap_or(default_len);
    let seed = args.seed.unwrap_or(0);
    let workload = match args.workload.unwrap_or(WorkloadArg::Scan) {
        WorkloadArg::Scan => Workload::scan(len),
        WorkloadArg::Uniform => Workload::uniform(len, seed ^ 0x5ca1e),
        WorkloadArg::Single => Workload::single(args.addr.unwrap_or(0), len),
        WorkloadArg::File => {
            let path = args
                .workload_file
                .as_ref()
                .ok_or("--workload-file required for --workload file")?;
            let addrs = load_trace_file(path).map_err(|e| e.to_string())?;
            if addrs.is_empty() {
                return Err("workload file contains no addresses".into());
            }
            let n_addrs = addrs.len() as u64;
            Workload {
                kind: WorkloadKind::Trace(addrs),
                len: args.len.unwrap_or(n_addrs),
                seed,
            }
        }
    };

    let cfg = ExperimentConfig {
        params,
        table_mode: args.table_mode.map(Into::into).unwrap_or(TableMode::InMemory),
        workload,
        reps: args.reps.unwrap_or(1),
        base_seed: seed,
        epoch_len: Some(n),
        label: format!("{construction:?}").to_lowercase(),
        aggressive,
    };

    if let Some(trace_path) = &args.trace_out {
        record_trace(&cfg, trace_path)?;
    }

    let results = run_experiment(&cfg).map_err(|e| e.to_string())?;
    for w in &warnings {
        let rec = serde_json::json!({"note": w});
        writeln!(out, "{rec}").map_err(|e| e.to_string())?;
    }
    for r in &results {
        writeln!(out, "{}", serde_json::to_string(r).unwrap()).map_err(|e| e.to_string())?;
    }
    if args.summary {
        let max_stash = results.iter().map(|r| r.max_stash).max().unwrap_or(0);
        let empty_final = results.iter().filter(|r| r.final_stash == 0).count();
        eprintln!(
            "{} reps, {} accesses each, bandwidth {} data blocks/access, max stash {}, {} reps ended with empty stash{}",
            results.len(),
            results.first().map(|r| r.accesses).unwrap_or(0),
            results.first().map(|r| r.bandwidth_data_blocks).unwrap_or(0),
            max_stash,
            empty_final,
            if aggressive { " [no security guarantee]" } else { "" },
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn record_trace(cfg: &ExperimentConfig, path: &PathBuf) -> Result<(), String> {
    use soram::harness::Instance;
    let params = cfg.params;
    if params.n_blocks * cfg.workload.len > (1 << 26) {
        return Err("trace recording is limited to small runs; reduce N or --len".into());
    }
    let mut store = PhysicalStore::with_trace_mode(params.block_bits, TraceMode::Full);
    let mut inst = Instance::build(&mut store, params, cfg.table_mode, cfg.base_seed)
        .map_err(|e| e.to_string())?;
    let payloads: Vec<BlockPayload> = (0..params.n_blocks)
        .map(|a| BlockPayload::from_u64(params.block_bits, a))
        .collect();
    inst.init(&mut store, &payloads).map_err(|e| e.to_string())?;
    store.reset_accounting();
    for a in cfg.workload.addresses(params.n_blocks) {
        inst.access(&mut store, a, Op::Read, None)
            .map_err(|e| e.to_string())?;
    }
    let file = std::fs::File::create(path).map_err(|e| e.to_string())?;
    store
        .export_trace_csv(std::io::BufWriter::new(file))
        .map_err(|e| e.to_string())?;
    Ok(())
}

fn cmd_table2(args: Table2Args, out: &mut dyn Write) -> Result<ExitCode, String> {
    let checks = check_table2(args.n_blocks, args.block_bits);
    for c in &checks {
        writeln!(out, "{}", serde_json::to_string(c).unwrap()).map_err(|e| e.to_string())?;
    }
    if args.summary {
        eprintln!(
            "{:<26} {:>2} {:>2} {:>4} {:>12} {:>8} {:>10} {:>6}",
            "row", "Z", "L", "M", "extra/N", "paper", "bandwidth", "paper"
        );
        for c in &checks {
            eprintln!(
                "{:<26} {:>2} {:>2} {:>4} {:>12.5} {:>8} {:>10} {:>6}  {}",
                c.name,
                c.z,
                c.height,
                c.m,
                c.ours_extra_over_n,
                c.paper_extra_over_n,
                c.ours_bandwidth,
                c.paper_bandwidth,
                if c.matches() { "MATCH" } else { "MISMATCH" }
            );
        }
    }
    if checks.iter().all(|c| c.matches()) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_bins(args: BinsArgs, out: &mut dyn Write) -> Result<ExitCode, String> {
    if args.choices != 1 && args.choices != 2 {
        return Err("--choices must be 1 or 2".into());
    }
    if args.bins == 0 || args.balls == 0 {
        return Err("--bins and --balls must be positive".into());
    }
    let experiments: Vec<_> = (0..args.seeds)
        .into_par_iter()
        .map(|i| run_bins(args.bins, args.balls, args.choices, args.seed + i))
        .collect();
    for e in &experiments {
        writeln!(out, "{}", serde_json::to_string(e).unwrap()).map_err(|e| e.to_string())?;
    }
    if args.summary {
        let max_gap = experiments.iter().map(|e| e.gap).fold(0.0f64, f64::max);
        let mean_gap =
            experiments.iter().map(|e| e.gap).sum::<f64>() / experiments.len() as f64;
        eprintln!(
            "{} seeds: mean gap {mean_gap:.3}, max gap {max_gap:.3} (mean load {})",
            args.seeds,
            args.balls as f64 / args.bins as f64
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: OracleArgs, out: &mut dyn Write) -> Result<ExitCode, String> {
    if args.construction == ConstructionArg::Path {
        return Err("the oracle models the succinct constructions; use t1 or t2".into());
    }
    let params = match args.construction {
        ConstructionArg::T1 => derive_params_t1(args.n_blocks, args.block_bits, args.f, 2.0),
        ConstructionArg::T2 => derive_params_t2(args.n_blocks, args.block_bits, args.f, 1.0),
        ConstructionArg::Path => unreachable!(),
    }
    .map_err(|e| e.to_string())?
    .params;
    let len = args.len.unwrap_or(args.n_blocks);
    let workload: Vec<(u64, Op, Option<BlockPayload>)> = (0..len)
        .map(|i| (i % args.n_blocks, Op::Read, None))
        .collect();
    let verdicts: Vec<_> = (0..args.seeds)
        .into_par_iter()
        .map(|i| {
            let cfg = OracleConfig {
                params,
                seed: args.seed + i,
                desync: args.negative_control,
            };
            run_oracle_pair(&cfg, &workload).map(|v| (args.seed + i, v))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;

    let passes = verdicts.iter().filter(|(_, v)| v.passed()).count();
    for (seed, v) in &verdicts {
        let rec = serde_json::json!({
            "seed": seed,
            "equal": v.equal,
            "post_errors": v.post_errors,
            "diff": v.diff,
        });
        writeln!(out, "{rec}").map_err(|e| e.to_string())?;
    }
    if args.summary {
        eprintln!("{passes}/{} runs equivalent", verdicts.len());
    }
    let ok = if args.negative_control {
        passes == 0
    } else {
        passes == verdicts.len()
    };
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_security(args: SecurityArgs, out: &mut dyn Write) -> Result<ExitCode, String> {
    if args.construction == ConstructionArg::Path {
        return Err("the security tester drives the succinct constructions; use t1 or t2".into());
    }
    let params = match args.construction {
        ConstructionArg::T1 => derive_params_t1(args.n_blocks, args.block_bits, 64, 2.0),
        ConstructionArg::T2 => derive_params_t2(args.n_blocks, args.block_bits, 16, 1.0),
        ConstructionArg::Path => unreachable!(),
    }
    .map_err(|e| e.to_string())?
    .params;
    let cfg = SecurityConfig {
        params,
        table_mode: args.table_mode.into(),
        samples: args.samples,
        base_seed: args.seed,
        alpha: args.alpha,
    };
    let scan = Workload::scan(args.len).addresses(args.n_blocks);
    let hammer = Workload::single(0, args.len).addresses(args.n_blocks);
    let report = security_test(&cfg, &scan, &hammer).map_err(|e| e.to_string())?;
    writeln!(out, "{}", serde_json::to_string(&report).unwrap()).map_err(|e| e.to_string())?;
    if args.summary {
        eprintln!(
            "uniformity p = {:?}, two-sample p = {:.4}, trace lengths equal: {}, eviction sequences equal: {} -> {}",
            report
                .read_leaf_uniformity
                .iter()
                .map(|o| o.p_value)
                .collect::<Vec<_>>(),
            report.two_sample.p_value,
            report.trace_lengths_equal,
            report.eviction_sequences_equal,
            if report.pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
