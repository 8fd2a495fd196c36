//! A mobile places a call: channel request on the shared access channel,
//! appointment of a data station over the coordination link, assignment,
//! then traffic. Prints the full trace and the run summary.

use hypercell::entity::PowerState;
use hypercell::scenario::{Action, Knobs, ScenarioBuilder};

fn main() {
    let scenario = ScenarioBuilder::new()
        .knobs(Knobs { horizon_us: 5_000_000, idle_timeout_us: 20_000_000, ..Knobs::default() })
        .sbs(0, 50, 1)
        .dbs(1, 60, 1, 4, PowerState::Active)
        .ms(101)
        .at(10_000, Action::PowerOn { ms: hypercell::ids::MsId(101) })
        .at(500_000, Action::MoCall { ms: hypercell::ids::MsId(101), duration_us: 2_000_000 })
        .build()
        .expect("scenario is well formed");

    let report = hypercell::run_scenario(&scenario).expect("scenario runs");

    for rec in &report.trace {
        println!("{rec}");
    }
    println!();
    println!(
        "attempted {} connected {} rejected {}",
        report.summary.calls_attempted,
        report.summary.calls_connected,
        report.summary.calls_rejected
    );
}
