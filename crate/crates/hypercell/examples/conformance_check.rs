//! Traces are checkable artifacts. Run a scenario, render its trace to
//! text, parse it back, and hold every call episode against the flow
//! templates. Then corrupt one record and watch the checker name the edge
//! that broke.

use hypercell::check::{check_template, CheckOutcome, Template};
use hypercell::ids::MsId;
use hypercell::entity::PowerState;
use hypercell::scenario::{Action, Knobs, ScenarioBuilder};
use hypercell::{parse_trace, render_trace, TraceVerb};

fn main() {
    let scenario = ScenarioBuilder::new()
        .knobs(Knobs { horizon_us: 5_000_000, idle_timeout_us: 20_000_000, ..Knobs::default() })
        .sbs(0, 50, 1)
        .dbs(1, 60, 1, 4, PowerState::Active)
        .ms(101)
        .at(10_000, Action::PowerOn { ms: MsId(101) })
        .at(500_000, Action::MoCall { ms: MsId(101), duration_us: 1_000_000 })
        .build()
        .unwrap();

    let report = hypercell::run_scenario(&scenario).unwrap();
    let text = render_trace(&report.trace);
    let records = parse_trace(&text).expect("own trace parses");

    match check_template(&records, Template::Mo) {
        CheckOutcome::Pass { calls } => println!("mo template: PASS ({calls} calls)"),
        CheckOutcome::Fail { reason, .. } => panic!("clean trace must pass: {reason}"),
    }

    // Swap the terminal TRAFFIC in front of LINK_ESTABLISH.
    let mut corrupted = records.clone();
    let link = corrupted.iter().position(|r| r.verb == TraceVerb::LinkEstablish).unwrap();
    let traffic = corrupted.iter().position(|r| r.verb == TraceVerb::Traffic).unwrap();
    corrupted.swap(link, traffic);

    match check_template(&corrupted, Template::Mo) {
        CheckOutcome::Pass { .. } => panic!("corrupted trace must fail"),
        CheckOutcome::Fail { ms, call_index, reason } => {
            println!("corrupted:   FAIL ms:{ms} call {call_index}: {reason}")
        }
    }
}
