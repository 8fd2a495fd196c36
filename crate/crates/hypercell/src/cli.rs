//! Command-line front end.
//!
//! Exit codes: 0 clean, 1 failed conformance verdict, 2 invalid scenario or
//! unparseable trace, 3 transport failure in split mode.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::check::{check_template, CheckOutcome, Template};
use crate::engine::{run_scenario, RunSummary};
use crate::energy::EnergyReport;
use crate::scenario::Scenario;
use crate::split::{split_run, station_worker_main, SplitError, SplitOptions};
use crate::trace::{parse_trace, render_trace, TraceRecord};

const EXIT_OK: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_TRANSPORT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hcn",
    version,
    about = "Cellular split-architecture simulator: one signaling station, \
             sleepy data stations, scenario-driven call flows"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and print a summary (optionally the trace).
    Run(RunArgs),
    /// Check a trace file against a call-flow template.
    Check(CheckArgs),
    /// Run a scenario with every base station in its own OS process,
    /// coordinating over UDP loopback.
    SplitRun(SplitArgs),
    /// Parse and validate a scenario file without running it.
    Validate(ValidateArgs),
    /// Internal: one base station process, spawned by split-run.
    #[command(hide = true)]
    StationWorker(WorkerArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransportArg {
    Inproc,
    Udp,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's seed knob.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "inproc")]
    transport: TransportArg,
    /// Write the trace to this file.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Override the scenario horizon, in microseconds.
    #[arg(long)]
    horizon: Option<u64>,
    /// Print every trace record to stdout as a JSON object per line.
    #[arg(long)]
    json_lines: bool,
    #[command(flatten)]
    ports: PortArgs,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    json_lines: bool,
    #[command(flatten)]
    ports: PortArgs,
}

#[derive(Args)]
struct PortArgs {
    /// UDP port for the signaling station (split mode).
    #[arg(long, default_value_t = 5700)]
    sbs_port: u16,
    /// The k-th data station binds this port plus k (split mode).
    #[arg(long, default_value_t = 5701)]
    dbs_port_base: u16,
    /// Virtual microseconds per real microsecond (split mode).
    #[arg(long, default_value_t = 20.0)]
    speed: f64,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Call-flow template: mo or mt.
    #[arg(long)]
    template: String,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args)]
struct WorkerArgs {
    /// JSON worker configuration.
    config: String,
}

/// Parse argv and dispatch. The binary's whole main.
pub fn run_cli() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Check(args) => cmd_check(args),
        Cmd::SplitRun(args) => cmd_split_run(args),
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::StationWorker(args) => station_worker_main(&args.config) as u8,
    };
    ExitCode::from(code)
}

fn load_scenario(path: &PathBuf, seed: Option<u64>, horizon: Option<u64>) -> Result<Scenario, u8> {
    let mut scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return Err(EXIT_INVALID);
        }
    };
    if let Some(seed) = seed {
        scenario.knobs.seed = seed;
    }
    if let Some(horizon) = horizon {
        scenario.knobs.horizon_us = horizon;
    }
    if let Err(e) = scenario.validate() {
        eprintln!("error: {}: {e}", path.display());
        return Err(EXIT_INVALID);
    }
    Ok(scenario)
}

fn cmd_run(args: RunArgs) -> u8 {
    let scenario = match load_scenario(&args.scenario, args.seed, args.horizon) {
        Ok(s) => s,
        Err(code) => return code,
    };

    if args.transport == TransportArg::Udp {
        return split_with_options(&scenario, &args.ports, args.trace_out, args.json_lines);
    }

    let report = match run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };

    if let Some(path) = &args.trace_out {
        if let Err(e) = std::fs::write(path, render_trace(&report.trace)) {
            eprintln!("error: write {}: {e}", path.display());
            return EXIT_INVALID;
        }
    }
    if args.json_lines {
        print_json_lines(&report.trace);
    } else {
        print_summary(&report.summary);
        println!();
        print_energy(&report.energy);
    }
    EXIT_OK
}

fn cmd_split_run(args: SplitArgs) -> u8 {
    let scenario = match load_scenario(&args.scenario, args.seed, args.horizon) {
        Ok(s) => s,
        Err(code) => return code,
    };
    split_with_options(&scenario, &args.ports, args.trace_out, args.json_lines)
}

fn split_with_options(
    scenario: &Scenario,
    ports: &PortArgs,
    trace_out: Option<PathBuf>,
    json_lines: bool,
) -> u8 {
    let opts = SplitOptions {
        sbs_port: ports.sbs_port,
        dbs_port_base: ports.dbs_port_base,
        speed: ports.speed,
        trace_out,
    };
    let exe = match std::env::current_exe() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot locate own binary: {e}");
            return EXIT_TRANSPORT;
        }
    };
    let argv = vec![exe.to_string_lossy().into_owned(), "station-worker".to_string()];
    match split_run(scenario, &opts, &argv) {
        Ok(report) => {
            if json_lines {
                print_json_lines(&report.trace);
            } else {
                print_summary(&report.summary);
            }
            EXIT_OK
        }
        Err(SplitError::Scenario(e)) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
        Err(SplitError::Transport(e)) => {
            eprintln!("error: transport: {e}");
            EXIT_TRANSPORT
        }
    }
}

fn cmd_check(args: CheckArgs) -> u8 {
    let template: Template = match args.template.parse() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let text = match std::fs::read_to_string(&args.trace) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.trace.display());
            return EXIT_INVALID;
        }
    };
    let records = match parse_trace(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", args.trace.display());
            return EXIT_INVALID;
        }
    };
    match check_template(&records, template) {
        CheckOutcome::Pass { calls } => {
            println!("PASS: {calls} calls match template {}", template.name());
            EXIT_OK
        }
        CheckOutcome::Fail { ms, call_index, reason } => {
            println!("FAIL: ms:{ms} call {call_index}: {reason}");
            EXIT_FAIL
        }
    }
}

fn cmd_validate(args: ValidateArgs) -> u8 {
    match Scenario::load(&args.scenario) {
        Ok(s) => {
            println!(
                "ok: 1 sbs, {} dbs, {} mobiles, {} stimuli, horizon {}us",
                s.dbs.len(),
                s.mobiles.len(),
                s.stimuli.len(),
                s.knobs.horizon_us
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}: {e}", args.scenario.display());
            EXIT_INVALID
        }
    }
}

fn print_json_lines(trace: &[TraceRecord]) {
    use std::io::Write;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for rec in trace {
        let subject = rec.subject.map(|s| s.to_string());
        let obj = serde_json::json!({
            "t": rec.t,
            "actor": rec.actor.to_string(),
            "verb": rec.verb.to_string(),
            "subject": subject,
            "attrs": rec.attrs,
        });
        // A closed pipe (head, etc.) is a normal way to stop reading.
        if writeln!(out, "{obj}").is_err() {
            return;
        }
    }
    let _ = out.flush();
}

fn print_summary(summary: &RunSummary) {
    println!("calls attempted  {:>8}", summary.calls_attempted);
    println!("calls connected  {:>8}", summary.calls_connected);
    println!("calls rejected   {:>8}", summary.calls_rejected);
    println!("wake-ups         {:>8}", summary.wakeups);
    println!("dropped control  {:>8}", summary.dropped_control);
    println!("dead letters     {:>8}", summary.dead_letters);
}

fn print_energy(energy: &EnergyReport) {
    println!(
        "{:<10} {:>12} {:>12} {:>12} {:>12}",
        "station", "sleep", "waking", "active", "energy"
    );
    for st in &energy.stations {
        println!(
            "dbs:{:<6} {:>11.3}s {:>11.3}s {:>11.3}s {:>11.1}J",
            st.station,
            st.sleep_us as f64 / 1e6,
            st.waking_us as f64 / 1e6,
            st.active_us as f64 / 1e6,
            st.joules,
        );
    }
    println!("{:<10} {:>38} {:>11.1}J", "total", "", energy.total_joules);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_declaration_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn template_argument_parses() {
        assert_eq!("mo".parse::<Template>(), Ok(Template::Mo));
        assert_eq!("mt".parse::<Template>(), Ok(Template::Mt));
        assert!("both".parse::<Template>().is_err());
    }
}
