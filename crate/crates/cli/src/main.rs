mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use cosmos_sim::endurance::{lifetime_years, LifetimeParams};
use cosmos_sim::engine::ns;
use cosmos_sim::geometry::ArrayGeometry;
use cosmos_sim::optics::{
    array_area_and_density, budget_report, parse_budget, read_energy_per_bit, reference_budget_chain,
    write_energy_per_bit, AreaReport, Deviation,
};
use cosmos_sim::sim::stats::{compare, StatsReport};
use cosmos_sim::sim::trace::{gen_trace, load_trace, write_trace, GenOptions, TracePattern};
use cosmos_sim::sim::{run, BackendConfig};
use serde_json::json;

use config::{key_help, RunConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_DEVIATION: u8 = 2;

#[derive(Parser)]
#[command(name = "cosmos", version, about = "Simulator and calculators for an optically controlled phase-change memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trace on one or more configurations
    Run {
        /// Config file or preset name; repeat to run several concurrently
        #[arg(long = "config", required = true)]
        configs: Vec<String>,
        #[arg(long)]
        trace: PathBuf,
        /// Directory for `<name>.json` and `<name>.txt` reports
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Print JSON instead of tables
        #[arg(long)]
        json: bool,
    },
    /// Optical power budget, laser power and per-bit energy
    Budget {
        /// Budget file, one `name,kind,value` per line
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        json: bool,
        /// Exit with status 2 if a figure deviates beyond tolerance
        #[arg(long)]
        strict: bool,
    },
    /// Array area and bit density
    Area {
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        strict: bool,
    },
    /// Lifetime in years from memory size and traffic
    Lifetime {
        /// Memory size, e.g. 2GiB or 2147483648
        #[arg(long)]
        size: String,
        /// Read plus write traffic in bytes per cycle
        #[arg(long)]
        rate: f64,
        /// Core frequency in Hz
        #[arg(long, default_value_t = 1e9)]
        freq: f64,
        /// Writes each cell endures
        #[arg(long, default_value_t = 1e6)]
        max_writes: f64,
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic trace
    GenTrace {
        /// SATURATE_W, SATURATE_R, MIXED(<read fraction>) or RANDOM
        #[arg(long)]
        pattern: String,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Arrival spacing for MIXED and RANDOM, in ns
        #[arg(long, default_value_t = 200.0)]
        gap_ns: f64,
        /// Distinct lines touched by MIXED
        #[arg(long, default_value_t = 4096)]
        working_set_lines: u64,
        /// Geometry source: config file or preset name
        #[arg(long)]
        config: Option<String>,
        /// Output file; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ratios between reports produced from the same trace
    Compare {
        /// Report JSON files written by `run`
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Exit with status 2 if a directional expectation is not met
        #[arg(long)]
        strict: bool,
    },
}

enum Outcome {
    Ok,
    Deviation,
}

fn load_config(source: &str) -> Result<RunConfig> {
    let path = Path::new(source);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))
    } else {
        RunConfig::from_preset(source)
            .with_context(|| format!("`{source}` is neither a readable config file nor a preset"))
    }
}

/// Writes via a sibling temporary file so readers never see partial output.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(contents.as_bytes())?;
    f.sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn cmd_run(configs: &[String], trace: &Path, out_dir: Option<PathBuf>, as_json: bool) -> Result<Outcome> {
    let configs: Vec<RunConfig> = configs.iter().map(|c| load_config(c)).collect::<Result<_>>()?;
    let mut names: Vec<&str> = configs.iter().map(|c| c.system.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        bail!("configurations must have distinct names; set [system] name");
    }
    let text = fs::read_to_string(trace).with_context(|| format!("reading {}", trace.display()))?;

    let results: Vec<Result<StatsReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                let text = &text;
                s.spawn(move || -> Result<StatsReport> {
                    let sys = &cfg.system;
                    let loaded = load_trace(text, sys.cacheline_bytes() as usize, sys.seed)?;
                    for w in &loaded.warnings {
                        eprintln!("warning: {}: {w}", sys.name);
                    }
                    Ok(run(sys, &loaded.requests)?.report)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let mut reports: Vec<StatsReport> = results.into_iter().collect::<Result<_>>()?;
    reports.sort_by(|a, b| a.config.cmp(&b.config));

    let out_dir = out_dir.or_else(|| configs.iter().find_map(|c| c.output_dir.clone()));
    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for r in &reports {
            write_atomic(&dir.join(format!("{}.json", r.config)), &r.to_json())?;
            write_atomic(&dir.join(format!("{}.txt", r.config)), &r.to_table())?;
        }
    }
    if as_json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        for r in &reports {
            println!("{}", r.to_table());
        }
    }
    for r in &reports {
        for rej in &r.rejected {
            eprintln!("warning: {}: request {} rejected: {}", r.config, rej.request_id, rej.reason);
        }
    }
    Ok(Outcome::Ok)
}

fn dev_line(label: &str, d: &Deviation, unit: &str) -> String {
    format!(
        "{label:<34} {:>12.4} {unit:<8} published {:>10.4}  delta {:+.4} ({:+.2}%)",
        d.computed,
        d.published,
        d.delta,
        d.relative * 100.0
    )
}

fn cosmos_parts(cfg: &RunConfig) -> Result<&cosmos_sim::sim::CosmosConfig> {
    match &cfg.system.backend {
        BackendConfig::Cosmos(c) => Ok(c),
        _ => bail!("this calculation needs a cosmos preset"),
    }
}

fn cmd_budget(chain: Option<&Path>, config: Option<&str>, as_json: bool, strict: bool) -> Result<Outcome> {
    let cfg = load_config(config.unwrap_or("cosmos-4bit"))?;
    let c = cosmos_parts(&cfg)?;
    let chain = match chain {
        Some(p) => parse_budget(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("in {}", p.display()))?,
        None => reference_budget_chain(),
    };
    let e = &cfg.energy_model;
    let budget = budget_report(&chain, e.wall_plug_efficiency, cfg.signal_count, &cfg.published)?;
    let write = write_energy_per_bit(e, &c.geometry, &c.timing, &c.caps, &cfg.published);
    let read = read_energy_per_bit(e, &c.geometry, &c.timing, &c.caps, &cfg.published);
    let tol = cfg.tolerances;
    let checks = [
        ("laser power per signal", budget.per_signal_dbm.delta.abs() <= tol.laser_power_db),
        ("write energy per bit", write.pj_per_bit.within(tol.write_energy_rel)),
        ("read energy per bit", read.pj_per_bit.within(tol.read_energy_rel)),
    ];
    if as_json {
        let v = json!({
            "budget": budget,
            "write_energy": write,
            "read_energy": read,
            "checks": checks.iter().map(|(n, ok)| json!({"name": n, "within_tolerance": ok})).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("{:<34} {:>12.4} dB", "chain gain", budget.chain_gain_db);
        println!("{:<34} {:>12.4} dBm", "target power at cell", budget.target_dbm);
        println!("{}", dev_line("laser power per signal", &budget.per_signal_dbm, "dBm"));
        println!("{:<34} {:>12.4} mW", "laser power per signal", budget.per_signal_mw);
        println!("{:<34} {:>12.4} mW", "electrical per signal", budget.per_signal_electrical_mw);
        println!(
            "{:<34} {:>12.4} mW",
            "electrical per signal (reference)", budget.published_per_signal_electrical_mw
        );
        println!("{}", dev_line("total laser power", &budget.total_laser_power_w, "W"));
        println!("{:<34} {:>12.1}", "signals implied by reference total", budget.implied_signal_count);
        println!("{}", dev_line("write energy", &write.pj_per_bit, "pJ/bit"));
        println!(
            "{:<34} {:>12.4} pJ/bit (from the reference write power)",
            "write energy", write.published_power_pj_per_bit
        );
        println!("{}", dev_line("read energy", &read.pj_per_bit, "pJ/bit"));
        for (name, ok) in &checks {
            if !ok {
                println!("DEVIATION: {name} outside tolerance");
            }
        }
    }
    Ok(if strict && checks.iter().any(|(_, ok)| !ok) { Outcome::Deviation } else { Outcome::Ok })
}

fn print_area(a: &AreaReport) {
    println!("{:<34} {:>14} x {}", "cells per layer (col x row)", a.cells_per_column, a.cells_per_row);
    println!("{:<34} {:>14.3} um", "column side", a.column_side_um);
    println!("{:<34} {:>14.3} um", "row side", a.row_side_um);
    println!("{:<34} {:>14.4} mm2", "layer area", a.layer_area_mm2);
    println!("{:<34} {:>14}", "layers", a.layers);
    println!("{:<34} {:>14.4} mm2", "total area", a.total_area_mm2);
    println!("{:<34} {:>14.4} MB/mm2", "density", a.density_mb_per_mm2);
    println!("{:<34} {:>14.4} mm2", "bare GST square", a.bare_square_area_mm2);
    if let Some(d) = &a.published_area_mm2 {
        println!("{}", dev_line("area", d, "mm2"));
    }
    if let Some(d) = &a.published_density_mb_per_mm2 {
        println!("{}", dev_line("density", d, "MB/mm2"));
    }
}

fn cmd_area(config: Option<&str>, as_json: bool, strict: bool) -> Result<Outcome> {
    let cfg = load_config(config.unwrap_or("cosmos-4bit"))?;
    let geom = cfg.geometry().ok_or_else(|| anyhow!("area needs a cosmos geometry"))?;
    let a = array_area_and_density(&cfg.area, &geom, &cfg.published);
    let within = a.published_area_mm2.is_none_or(|d| d.within(cfg.tolerances.area_rel));
    if as_json {
        println!("{}", serde_json::to_string_pretty(&a)?);
    } else {
        print_area(&a);
        if !within {
            println!("DEVIATION: area outside tolerance");
        }
    }
    Ok(if strict && !within { Outcome::Deviation } else { Outcome::Ok })
}

fn parse_size(s: &str) -> Result<f64> {
    let t = s.trim();
    let split = t.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let n: f64 = num.trim().parse().map_err(|_| anyhow!("bad size `{s}`"))?;
    let mult = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1.0,
        "kib" => 1024.0,
        "mib" => 1024f64.powi(2),
        "gib" => 1024f64.powi(3),
        "tib" => 1024f64.powi(4),
        "kb" => 1e3,
        "mb" => 1e6,
        "gb" => 1e9,
        "tb" => 1e12,
        other => bail!("unknown size unit `{other}`"),
    };
    Ok(n * mult)
}

fn cmd_lifetime(size: &str, rate: f64, freq: f64, max_writes: f64, as_json: bool) -> Result<Outcome> {
    let p = LifetimeParams {
        size_bytes: parse_size(size)?,
        max_writes_per_cell: max_writes,
        bytes_per_cycle: rate,
        frequency_hz: freq,
    };
    let years = lifetime_years(&p)?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&json!({"params": p, "lifetime_years": years}))?);
    } else {
        println!("lifetime {years:.6} years");
    }
    Ok(Outcome::Ok)
}

fn cmd_gen_trace(
    pattern: &str,
    length: usize,
    seed: u64,
    gap_ns: f64,
    working_set_lines: u64,
    config: Option<&str>,
    out: Option<&Path>,
) -> Result<Outcome> {
    let label = pattern;
    let pattern: TracePattern = pattern.parse()?;
    if !(gap_ns >= 0.0 && gap_ns.is_finite()) {
        bail!("--gap-ns must be a non-negative number");
    }
    let geom = match config {
        Some(c) => load_config(c)?
            .geometry()
            .ok_or_else(|| anyhow!("gen-trace needs a cosmos geometry"))?,
        None => ArrayGeometry::cosmos_4bit(),
    };
    let opts = GenOptions { gap: ns(gap_ns), working_set_lines };
    let trace = gen_trace(pattern, length, seed, &geom, &opts)?;
    let text = format!(
        "# {label} length {length} seed {seed}\n{}",
        write_trace(&trace)
    );
    match out {
        Some(p) => write_atomic(p, &text)?,
        None => print!("{text}"),
    }
    Ok(Outcome::Ok)
}

fn cmd_compare(paths: &[PathBuf], as_json: bool, strict: bool) -> Result<Outcome> {
    let reports: Vec<StatsReport> = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{} is not a run report", p.display()))
        })
        .collect::<Result<_>>()?;
    let cmp = compare(&reports)?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&cmp)?);
    } else {
        print!("{}", cmp.to_table());
    }
    let unmet = cmp.rows.iter().any(|r| r.expectation_met == Some(false));
    Ok(if strict && unmet { Outcome::Deviation } else { Outcome::Ok })
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Run { configs, trace, out_dir, json } => cmd_run(&configs, &trace, out_dir, json),
        Command::Budget { chain, config, json, strict } => {
            cmd_budget(chain.as_deref(), config.as_deref(), json, strict)
        }
        Command::Area { config, json, strict } => cmd_area(config.as_deref(), json, strict),
        Command::Lifetime { size, rate, freq, max_writes, json } => cmd_lifetime(&size, rate, freq, max_writes, json),
        Command::GenTrace { pattern, length, seed, gap_ns, working_set_lines, config, out } => {
            cmd_gen_trace(&pattern, length, seed, gap_ns, working_set_lines, config.as_deref(), out.as_deref())
        }
        Command::Compare { reports, json, strict } => cmd_compare(&reports, json, strict),
    }
}

fn main() -> ExitCode {
    let help = key_help();
    let command = Cli::command()
        .after_long_help(help.clone())
        .mut_subcommand("run", |c| c.after_long_help(help.clone()))
        .mut_subcommand("budget", |c| c.after_long_help(help.clone()))
        .mut_subcommand("area", |c| c.after_long_help(help.clone()));
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Deviation) => ExitCode::from(EXIT_DEVIATION),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
