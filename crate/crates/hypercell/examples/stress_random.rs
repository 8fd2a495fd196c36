//! A randomized stress run, stepped one timestamp at a time so the
//! conservation invariant can be sampled between steps: the number of
//! established traffic links across all data stations always equals the
//! number of mobiles in a call.

use hypercell::scenario::random_stress_scenario;
use hypercell::Sim;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let scenario = random_stress_scenario(seed, 40);
    println!(
        "seed {seed}: {} mobiles, {} stimuli, horizon {}s",
        scenario.mobiles.len(),
        scenario.stimuli.len(),
        scenario.knobs.horizon_us / 1_000_000
    );

    let mut sim = Sim::new(&scenario).expect("generated scenarios are valid");
    let mut samples = 0u64;
    let mut peak = 0usize;
    while sim.step().is_some() {
        let established = sim.established_total();
        let in_call = sim.in_call_count();
        assert_eq!(established, in_call, "links and calls diverged at t={}us", sim.now());
        peak = peak.max(established);
        samples += 1;
    }
    let report = sim.finish();

    println!("sampled {samples} timestamps, peak {peak} concurrent links");
    println!(
        "attempted {} connected {} rejected {} wake-ups {}",
        report.summary.calls_attempted,
        report.summary.calls_connected,
        report.summary.calls_rejected,
        report.summary.wakeups
    );
    println!("total energy {:.1}J", report.energy.total_joules);
}
