//! What sleeping is worth. The same one-call day is run twice: once with a
//! data station that naps after a short idle window, once with the nap
//! disabled. The ledger splits each station's horizon into time asleep,
//! waking and active, and prices it.

use hypercell::ids::MsId;
use hypercell::entity::PowerState;
use hypercell::scenario::{Action, Knobs, Scenario, ScenarioBuilder};

fn one_call_scenario(idle_timeout_us: u64) -> Scenario {
    ScenarioBuilder::new()
        .knobs(Knobs {
            horizon_us: 30_000_000,
            idle_timeout_us,
            wake_latency_us: 100_000,
            ..Knobs::default()
        })
        .sbs(0, 50, 1)
        .dbs(1, 60, 1, 4, PowerState::Active)
        .ms(101)
        .at(10_000, Action::PowerOn { ms: MsId(101) })
        .at(1_500_000, Action::MoCall { ms: MsId(101), duration_us: 2_000_000 })
        .build()
        .expect("scenario is well formed")
}

fn main() {
    // Effectively never idle long enough to sleep.
    let always_on = hypercell::run_scenario(&one_call_scenario(60_000_000)).unwrap();
    // Nap 800ms after the last link goes down; the call then has to wake
    // the station back up.
    let napping = hypercell::run_scenario(&one_call_scenario(800_000)).unwrap();

    for (label, report) in [("always-on", &always_on), ("napping", &napping)] {
        assert_eq!(report.summary.calls_connected, 1, "{label}: the call must connect");
        let e = report.energy.station(hypercell::ids::StationId(1)).unwrap();
        println!(
            "{label:<10} sleep {:>5.1}s  waking {:>5.1}s  active {:>5.1}s  ->  {:>7.1}J",
            e.sleep_us as f64 / 1e6,
            e.waking_us as f64 / 1e6,
            e.active_us as f64 / 1e6,
            e.joules,
        );
    }

    let saved = always_on.energy.total_joules - napping.energy.total_joules;
    println!("saved {saved:.1}J over a 30s horizon by sleeping when idle");
    assert!(saved > 0.0);
}
