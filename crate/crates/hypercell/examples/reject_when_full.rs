//! Nowhere to put the call: the single data station has one traffic slot,
//! it is busy, and nobody is asleep to wake. The second request is denied
//! by the station, retried nowhere, and rejected back to the mobile.

use hypercell::ids::MsId;
use hypercell::entity::PowerState;
use hypercell::scenario::{Action, Knobs, ScenarioBuilder};
use hypercell::TraceVerb;

fn main() {
    let scenario = ScenarioBuilder::new()
        .knobs(Knobs { horizon_us: 6_000_000, idle_timeout_us: 20_000_000, ..Knobs::default() })
        .sbs(0, 50, 1)
        .dbs(1, 60, 1, 1, PowerState::Active)
        .ms(101)
        .ms(102)
        .at(10_000, Action::PowerOn { ms: MsId(101) })
        .at(20_000, Action::PowerOn { ms: MsId(102) })
        .at(500_000, Action::MoCall { ms: MsId(101), duration_us: 4_000_000 })
        .at(900_000, Action::MoCall { ms: MsId(102), duration_us: 1_000_000 })
        .build()
        .expect("scenario is well formed");

    let report = hypercell::run_scenario(&scenario).expect("scenario runs");
    for rec in &report.trace {
        println!("{rec}");
    }

    let reject = report.trace.iter().find(|r| r.verb == TraceVerb::Reject).expect("one reject");
    println!();
    println!(
        "ms:102 rejected at {}us, reason {}",
        reject.t,
        reject.get("reason").unwrap_or("?")
    );
    assert_eq!(report.summary.calls_connected, 1);
    assert_eq!(report.summary.calls_rejected, 1);
}
