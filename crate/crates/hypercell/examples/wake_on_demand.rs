//! The only data station is asleep when the call comes in. The signaling
//! station sends a wake-up command, holds the request through the wake
//! latency, and appoints the station once it reports back awake.

use hypercell::ids::MsId;
use hypercell::entity::PowerState;
use hypercell::scenario::{Action, Knobs, ScenarioBuilder};
use hypercell::TraceVerb;

fn main() {
    let scenario = ScenarioBuilder::new()
        .knobs(Knobs {
            horizon_us: 5_000_000,
            wake_latency_us: 100_000,
            idle_timeout_us: 20_000_000,
            ..Knobs::default()
        })
        .sbs(0, 50, 1)
        .dbs(1, 60, 1, 4, PowerState::Sleep)
        .ms(101)
        .at(10_000, Action::PowerOn { ms: MsId(101) })
        .at(500_000, Action::MoCall { ms: MsId(101), duration_us: 1_000_000 })
        .build()
        .expect("scenario is well formed");

    let report = hypercell::run_scenario(&scenario).expect("scenario runs");
    for rec in &report.trace {
        println!("{rec}");
    }

    let wake = report.trace.iter().find(|r| r.verb == TraceVerb::Wakeup).expect("wake sent");
    let ack = report.trace.iter().find(|r| r.verb == TraceVerb::WakeupAck).expect("wake acked");
    println!();
    println!("wake commanded at {}us, acknowledged at {}us", wake.t, ack.t);

    let energy = report.energy.station(hypercell::ids::StationId(1)).expect("ledger entry");
    println!(
        "station spent {}us asleep, {}us waking, {}us active: {:.1}J",
        energy.sleep_us, energy.waking_us, energy.active_us, energy.joules
    );
}
