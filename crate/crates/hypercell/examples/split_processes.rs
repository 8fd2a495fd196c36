//! The same call flow with real process isolation: the signaling station
//! and the data station each run in their own OS process and coordinate
//! over UDP loopback in the wire format, while this process hosts the
//! mobiles and merges the trace streams.
//!
//! The example re-executes itself as the station workers: invoked with
//! `station-worker <json>` it becomes one base station and nothing else.

use hypercell::ids::MsId;
use hypercell::entity::PowerState;
use hypercell::scenario::{Action, Knobs, ScenarioBuilder};
use hypercell::split::{station_worker_main, SplitOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    if let (Some(flag), Some(config)) = (args.next(), args.next()) {
        if flag == "station-worker" {
            std::process::exit(station_worker_main(&config));
        }
    }

    let scenario = ScenarioBuilder::new()
        .knobs(Knobs { horizon_us: 4_000_000, idle_timeout_us: 20_000_000, ..Knobs::default() })
        .sbs(0, 50, 1)
        .dbs(1, 60, 1, 4, PowerState::Active)
        .ms(101)
        .at(10_000, Action::PowerOn { ms: MsId(101) })
        .at(500_000, Action::MoCall { ms: MsId(101), duration_us: 1_000_000 })
        .build()
        .unwrap();

    let me = std::env::current_exe().unwrap().to_string_lossy().into_owned();
    let opts = SplitOptions {
        sbs_port: 6700,
        dbs_port_base: 6701,
        speed: 20.0,
        trace_out: None,
    };
    let report = hypercell::split_run(&scenario, &opts, &[me, "station-worker".into()])
        .expect("split run completes");

    for rec in &report.trace {
        println!("{rec}");
    }
    println!();
    println!(
        "attempted {} connected {} over two station processes",
        report.summary.calls_attempted, report.summary.calls_connected
    );
}
