//! A call arrives for a camped mobile. The signaling station pages on the
//! paging channel; the mobile answers with a channel request and, once
//! assigned, acknowledges the page toward its data station before the
//! traffic link comes up. Watch for PAGING_ACK strictly before
//! LINK_ESTABLISH in the output.

use hypercell::ids::MsId;
use hypercell::entity::PowerState;
use hypercell::scenario::{Action, Knobs, ScenarioBuilder};
use hypercell::TraceVerb;

fn main() {
    let scenario = ScenarioBuilder::new()
        .knobs(Knobs { horizon_us: 5_000_000, idle_timeout_us: 20_000_000, ..Knobs::default() })
        .sbs(0, 50, 1)
        .dbs(1, 60, 1, 4, PowerState::Active)
        .ms(101)
        .at(10_000, Action::PowerOn { ms: MsId(101) })
        .at(500_000, Action::MtCall { ms: MsId(101), duration_us: 2_000_000 })
        .build()
        .expect("scenario is well formed");

    let report = hypercell::run_scenario(&scenario).expect("scenario runs");
    for rec in &report.trace {
        println!("{rec}");
    }

    let ack = report.trace.iter().position(|r| r.verb == TraceVerb::PagingAck);
    let link = report.trace.iter().position(|r| r.verb == TraceVerb::LinkEstablish);
    println!();
    println!("paging ack is record {:?}, link establish is record {:?}", ack, link);
    assert!(ack < link, "the page must be acknowledged before the link");
}
