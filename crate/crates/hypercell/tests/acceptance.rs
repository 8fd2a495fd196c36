//! The acceptance gate: every release-blocking behavior, one test per
//! criterion, each printing `ACCEPTANCE <n> <name>: PASS` or `... FAIL`.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypercell::check::{check_template, CheckOutcome, Template};
use hypercell::entity::MsPhase;
use hypercell::ids::{ActorKind, MsId};
use hypercell::scenario::{random_stress_scenario, Action, Knobs, Scenario, ScenarioBuilder};
use hypercell::split::{split_run, SplitOptions};
use hypercell::trace::TraceVerb;
use hypercell::um::{
    is_permitted_combination, ChannelSet, FrameTime, LogicalChannel, Role,
};
use hypercell::wire::{
    decode, encode, ControlMessage, DecodeError, LoadByte, MessageHeader, ServiceKind, WirePower,
};
use hypercell::{run_scenario, transport_equivalent, Sim, TraceRecord};

fn criterion(n: u32, name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("ACCEPTANCE {n} {name}: PASS"),
        Err(e) => {
            println!("ACCEPTANCE {n} {name}: FAIL ({e})");
            panic!("acceptance criterion {n} {name} failed: {e}");
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn load(name: &str) -> Result<Scenario, String> {
    Scenario::load(&scenario_path(name)).map_err(|e| format!("{name}: {e}"))
}

fn within(elapsed: Duration, bound: Duration) -> Result<(), String> {
    if elapsed <= bound {
        Ok(())
    } else {
        Err(format!("took {elapsed:?}, bound is {bound:?}"))
    }
}

/// The flow verbs of the trace, in order.
fn flow_verbs(trace: &[TraceRecord]) -> Vec<TraceVerb> {
    trace
        .iter()
        .map(|r| r.verb)
        .filter(|v| hypercell::check::ALPHABET.contains(v))
        .collect()
}

/// Runs the installed binary's checker on a rendered trace.
fn cmd_check(trace: &[TraceRecord], template: &str) -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("trace.txt");
    std::fs::write(&path, hypercell::render_trace(trace)).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_hcn"))
        .args(["check", "--trace"])
        .arg(&path)
        .args(["--template", template])
        .output()
        .map_err(|e| format!("spawn checker: {e}"))?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    if !out.status.success() {
        return Err(format!("checker exited {:?}: {stdout}", out.status.code()));
    }
    Ok(stdout)
}

#[test]
fn acceptance_01_mo_conformance() {
    criterion(1, "mo_conformance", || {
        let started = Instant::now();
        let scenario = load("mo_basic.hcn-scn")?;
        let report = run_scenario(&scenario).map_err(|e| e.to_string())?;

        let verdict = cmd_check(&report.trace, "mo")?;
        ensure!(verdict.starts_with("PASS"), "checker said: {verdict}");

        let verbs = flow_verbs(&report.trace);
        let expected = [
            TraceVerb::ChannelRequest,
            TraceVerb::Appointment,
            TraceVerb::AppointmentResponse,
            TraceVerb::Assignment,
            TraceVerb::LinkEstablish,
            TraceVerb::Traffic,
        ];
        ensure!(verbs == expected, "flow verbs {verbs:?}, expected {expected:?}");
        within(started.elapsed(), Duration::from_secs(1))
    });
}

#[test]
fn acceptance_02_mt_conformance() {
    criterion(2, "mt_conformance", || {
        let started = Instant::now();
        let scenario = load("mt_basic.hcn-scn")?;
        let report = run_scenario(&scenario).map_err(|e| e.to_string())?;

        let verdict = cmd_check(&report.trace, "mt")?;
        ensure!(verdict.starts_with("PASS"), "checker said: {verdict}");

        let verbs = flow_verbs(&report.trace);
        let expected = [
            TraceVerb::Page,
            TraceVerb::ChannelRequest,
            TraceVerb::Appointment,
            TraceVerb::AppointmentResponse,
            TraceVerb::Assignment,
            TraceVerb::PagingAck,
            TraceVerb::LinkEstablish,
            TraceVerb::Traffic,
        ];
        ensure!(verbs == expected, "flow verbs {verbs:?}, expected {expected:?}");

        let ack = verbs.iter().position(|&v| v == TraceVerb::PagingAck);
        let link = verbs.iter().position(|&v| v == TraceVerb::LinkEstablish);
        ensure!(ack < link, "paging ack at {ack:?} not strictly before link at {link:?}");
        within(started.elapsed(), Duration::from_secs(1))
    });
}

#[test]
fn acceptance_03_wakeup_rule() {
    criterion(3, "wakeup_rule", || {
        let scenario = load("wakeup.hcn-scn")?;
        let report = run_scenario(&scenario).map_err(|e| e.to_string())?;
        let trace = &report.trace;

        // The loaded station must not be asked; the sleeper is woken, acks,
        // and only then receives the appointment.
        let is_dbs2 = |r: &TraceRecord, kind: ActorKind| {
            (r.actor.kind == kind && r.actor.id == 2)
                || r.subject.is_some_and(|s| s.kind == kind && s.id == 2)
        };
        let wake = trace
            .iter()
            .position(|r| r.verb == TraceVerb::Wakeup && is_dbs2(r, ActorKind::Dbs))
            .ok_or("no WAKEUP targeting dbs:2")?;
        let ack = trace
            .iter()
            .position(|r| r.verb == TraceVerb::WakeupAck && r.actor.id == 2)
            .ok_or("no WAKEUP_ACK from dbs:2")?;
        let appoint = trace
            .iter()
            .position(|r| {
                r.verb == TraceVerb::Appointment
                    && is_dbs2(r, ActorKind::Dbs)
                    && r.get("ms") == Some("102")
            })
            .ok_or("no APPOINTMENT of dbs:2 for ms 102")?;
        ensure!(
            wake < ack && ack < appoint,
            "subsequence out of order: WAKEUP at {wake}, ACK at {ack}, APPOINTMENT at {appoint}"
        );

        let assignment = trace
            .iter()
            .find(|r| {
                r.verb == TraceVerb::Assignment
                    && r.subject.is_some_and(|s| s.kind == ActorKind::Ms && s.id == 102)
            })
            .ok_or("ms 102 never assigned")?;
        ensure!(
            assignment.get("dbs") == Some("2"),
            "ms 102 assigned to dbs {:?}, expected the awakened dbs 2",
            assignment.get("dbs")
        );
        ensure!(report.summary.wakeups == 1, "expected 1 wake-up, saw {}", report.summary.wakeups);
        Ok(())
    });
}

#[test]
fn acceptance_04_rejection_rule() {
    criterion(4, "rejection_rule", || {
        // Zero capacity in its purest form: a network with no data station.
        let scenario = ScenarioBuilder::new()
            .knobs(Knobs { horizon_us: 3_000_000, ..Knobs::default() })
            .sbs(0, 50, 1)
            .ms(101)
            .at(10_000, Action::PowerOn { ms: MsId(101) })
            .at(500_000, Action::MoCall { ms: MsId(101), duration_us: 1_000_000 })
            .build()
            .map_err(|e| e.to_string())?;
        let report = run_scenario(&scenario).map_err(|e| e.to_string())?;

        let reject = report
            .trace
            .iter()
            .find(|r| r.verb == TraceVerb::Reject)
            .ok_or("no REJECT in trace")?;
        ensure!(
            reject.subject.is_some_and(|s| s.kind == ActorKind::Ms && s.id == 101),
            "REJECT subject is {:?}, expected ms:101",
            reject.subject
        );
        ensure!(
            !report.trace.iter().any(|r| r.verb == TraceVerb::Appointment),
            "an APPOINTMENT appeared despite zero capacity"
        );
        ensure!(
            report.final_ms_phases.get(&MsId(101)) == Some(&MsPhase::Camped),
            "ms 101 ended in {:?}, expected Camped",
            report.final_ms_phases.get(&MsId(101))
        );
        ensure!(report.summary.calls_rejected == 1, "rejected count != 1");
        Ok(())
    });
}

#[test]
fn acceptance_05_split_legality() {
    criterion(5, "split_legality", || {
        let started = Instant::now();

        use LogicalChannel::*;
        let dbs_only = [Tch, Sacch, Facch];
        let sbs_only = [Fcch, Sch, Bcch, Pch, Nch, Rach, Agch];
        for ch in dbs_only {
            let roles = ch.allowed_roles();
            ensure!(!roles.contains(Role::Sbs), "{} must never run on the sbs", ch.name());
            ensure!(roles.contains(Role::Dbs), "{} must be allowed on a dbs", ch.name());
        }
        for ch in sbs_only {
            let roles = ch.allowed_roles();
            ensure!(roles.contains(Role::Sbs), "{} must run on the sbs", ch.name());
            ensure!(!roles.contains(Role::Dbs), "{} must never run on a dbs", ch.name());
        }
        let sdcch = Sdcch.allowed_roles();
        ensure!(
            sdcch.contains(Role::Sbs) && sdcch.contains(Role::Dbs),
            "sdcch must be allowed on both sides"
        );
        ensure!(dbs_only.len() + sbs_only.len() + 1 == LogicalChannel::ALL.len(), "channel missed");

        // Independent whitelist, spelled out from scratch, checked against
        // every one of the 2048 subsets.
        let whitelist: BTreeSet<u16> = [
            ChannelSet::of(&[Tch, Sacch]),
            ChannelSet::of(&[Tch, Sacch, Facch]),
            ChannelSet::of(&[Fcch, Sch, Bcch, Pch, Nch, Rach, Agch]),
            ChannelSet::of(&[Sdcch, Sacch]),
        ]
        .into_iter()
        .map(|s| s.bits())
        .collect();
        for bits in 0..=ChannelSet::ALL_MASK {
            let set = ChannelSet::from_bits(bits);
            let expected = whitelist.contains(&bits);
            ensure!(
                is_permitted_combination(set) == expected,
                "combination {bits:#013b} classified wrongly (oracle says {expected})"
            );
        }
        within(started.elapsed(), Duration::from_secs(1))
    });
}

fn random_message(rng: &mut ChaCha8Rng) -> ControlMessage {
    match rng.random_range(0..6) {
        0 => ControlMessage::ChannelAppointment {
            ms_id: rng.random(),
            service: if rng.random() { ServiceKind::MoCall } else { ServiceKind::MtCall },
            slot: rng.random(),
        },
        1 => ControlMessage::AppointmentResponse {
            accept: rng.random(),
            arfcn: rng.random(),
            slot: rng.random(),
        },
        2 => ControlMessage::WakeupCommand { dbs_id: rng.random() },
        3 => ControlMessage::WakeupAck { dbs_id: rng.random() },
        4 => ControlMessage::LinkRelease { ms_id: rng.random() },
        _ => ControlMessage::StatusReport {
            power: if rng.random() { WirePower::Active } else { WirePower::Sleep },
            load: LoadByte::from_raw(rng.random()),
        },
    }
}

#[test]
fn acceptance_06_codec_roundtrip() {
    criterion(6, "codec_roundtrip", || {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);

        for i in 0..10_000 {
            let header = MessageHeader {
                sender_id: rng.random(),
                seq: rng.random(),
                transaction_id: rng.random(),
            };
            let msg = random_message(&mut rng);
            let bytes = encode(&header, &msg);
            let (h2, m2) = decode(&bytes).map_err(|e| format!("case {i}: decode failed: {e}"))?;
            ensure!(h2 == header && m2 == msg, "case {i}: round trip changed the message");
            let again = encode(&h2, &m2);
            ensure!(again == bytes, "case {i}: re-encode differs");
        }

        let good = encode(
            &MessageHeader { sender_id: 0, seq: 1, transaction_id: 7 },
            &ControlMessage::WakeupCommand { dbs_id: 2 },
        );

        let mut bad = good.clone();
        bad[0] ^= 0xff;
        ensure!(
            matches!(decode(&bad), Err(DecodeError::BadMagic { .. })),
            "corrupt magic not flagged"
        );

        let mut bad = good.clone();
        bad[4] = 99;
        ensure!(
            matches!(decode(&bad), Err(DecodeError::BadVersion { found: 99, .. })),
            "wrong version not flagged"
        );

        let mut bad = good.clone();
        bad[5] = 0xee;
        ensure!(
            matches!(decode(&bad), Err(DecodeError::UnknownTag { tag: 0xee, .. })),
            "unknown tag not flagged"
        );

        ensure!(
            matches!(decode(&good[..good.len() - 1]), Err(DecodeError::Truncated { .. })),
            "truncation not flagged"
        );

        let mut bad = good.clone();
        bad.push(0);
        ensure!(
            matches!(decode(&bad), Err(DecodeError::TrailingBytes { remaining: 1, .. })),
            "trailing bytes not flagged"
        );

        within(started.elapsed(), Duration::from_secs(5))
    });
}

#[test]
fn acceptance_07_determinism() {
    criterion(7, "determinism", || {
        for (label, scenario) in [
            ("canonical mo", load("mo_basic.hcn-scn")?),
            ("randomized stress", random_stress_scenario(3, 60)),
        ] {
            let a = run_scenario(&scenario).map_err(|e| e.to_string())?;
            let b = run_scenario(&scenario).map_err(|e| e.to_string())?;
            let ta = hypercell::render_trace(&a.trace);
            let tb = hypercell::render_trace(&b.trace);
            ensure!(ta == tb, "{label}: two runs with equal seeds rendered different traces");
            ensure!(!ta.is_empty(), "{label}: empty trace");
        }
        Ok(())
    });
}

#[test]
fn acceptance_08_transport_equivalence() {
    criterion(8, "transport_equivalence", || {
        let started = Instant::now();
        let exe = env!("CARGO_BIN_EXE_hcn").to_string();
        let argv = vec![exe, "station-worker".to_string()];

        for (name, sbs_port) in [
            ("mo_basic.hcn-scn", 7600u16),
            ("mt_basic.hcn-scn", 7610),
            ("wakeup.hcn-scn", 7620),
        ] {
            let scenario = load(name)?;
            let inproc = run_scenario(&scenario).map_err(|e| e.to_string())?;
            let opts = SplitOptions {
                sbs_port,
                dbs_port_base: sbs_port + 1,
                speed: 40.0,
                trace_out: None,
            };
            let split = split_run(&scenario, &opts, &argv)
                .map_err(|e| format!("{name}: split run failed: {e}"))?;
            transport_equivalent(&inproc.trace, &split.trace)
                .map_err(|e| format!("{name}: {e}"))?;
            ensure!(
                inproc.summary.calls_connected == split.summary.calls_connected,
                "{name}: connected counts differ"
            );
        }
        within(started.elapsed(), Duration::from_secs(10))
    });
}

#[test]
fn acceptance_09_timing_arithmetic() {
    criterion(9, "timing_arithmetic", || {
        for frame in 0..=1000u32 {
            for slot in 0..8u8 {
                let t = FrameTime::new(frame, slot).map_err(|e| e.to_string())?;
                let expected = (frame as u64 * 8 + slot as u64) * 577;
                ensure!(
                    t.slot_start_us() == expected,
                    "frame {frame} slot {slot}: got {}, expected {expected}",
                    t.slot_start_us()
                );
                if slot > 0 {
                    let prev = FrameTime::new(frame, slot - 1).unwrap();
                    ensure!(
                        t.slot_start_us() - prev.slot_start_us() == 577,
                        "slot pitch broken at frame {frame} slot {slot}"
                    );
                }
            }
            if frame > 0 {
                let here = FrameTime::new(frame, 0).unwrap();
                let prev = FrameTime::new(frame - 1, 0).unwrap();
                ensure!(
                    here.slot_start_us() - prev.slot_start_us() == 4616,
                    "frame pitch broken at frame {frame}"
                );
            }
        }
        Ok(())
    });
}

#[test]
fn acceptance_10_conservation_placement() {
    criterion(10, "conservation_placement", || {
        let started = Instant::now();
        let scenario = random_stress_scenario(11, 100);

        let mut sim = Sim::new(&scenario).map_err(|e| e.to_string())?;
        while sim.step().is_some() {
            let established = sim.established_total();
            let in_call = sim.in_call_count();
            ensure!(
                established == in_call,
                "at t={}us: {established} established links vs {in_call} mobiles in call",
                sim.now()
            );
        }
        let report = sim.finish();
        let call_stimuli = scenario
            .stimuli
            .iter()
            .filter(|s| matches!(s.action, Action::MoCall { .. } | Action::MtCall { .. }))
            .count();
        ensure!(call_stimuli == 100, "stress scenario holds {call_stimuli} calls, wanted 100");
        // Calls aimed at a mobile that is already busy never reach the
        // access channel; the bulk must still go through.
        ensure!(
            report.summary.calls_attempted >= 70,
            "only {} of 100 calls reached the access channel",
            report.summary.calls_attempted
        );
        ensure!(report.summary.wakeups > 0, "stress run never exercised wake-up");
        ensure!(report.summary.calls_rejected > 0, "stress run never exercised rejection");

        // Placement: every traced action sits on a channel its actor's role
        // is allowed to operate.
        for rec in &report.trace {
            let expected: Option<(ActorKind, &str)> = match rec.verb {
                TraceVerb::Register => Some((ActorKind::Sbs, "sdcch")),
                TraceVerb::Page => Some((ActorKind::Sbs, "pch")),
                TraceVerb::ChannelRequest => Some((ActorKind::Ms, "rach")),
                TraceVerb::Assignment | TraceVerb::Reject => Some((ActorKind::Sbs, "agch")),
                TraceVerb::PagingAck => Some((ActorKind::Ms, "sdcch")),
                TraceVerb::LinkEstablish => Some((ActorKind::Dbs, "facch")),
                TraceVerb::Traffic => Some((ActorKind::Dbs, "tch")),
                TraceVerb::Release => Some((ActorKind::Ms, "facch")),
                _ => None,
            };
            if let Some((kind, chan)) = expected {
                ensure!(
                    rec.actor.kind == kind,
                    "{} acted by {:?}, expected {kind:?}: {rec}",
                    rec.verb,
                    rec.actor.kind
                );
                ensure!(
                    rec.get("chan") == Some(chan),
                    "{} on channel {:?}, expected {chan}: {rec}",
                    rec.verb,
                    rec.get("chan")
                );
            }
            // Control-plane verbs stay between the stations.
            if matches!(
                rec.verb,
                TraceVerb::Appointment | TraceVerb::Wakeup
            ) {
                ensure!(rec.actor.kind == ActorKind::Sbs, "{} not from sbs: {rec}", rec.verb);
                ensure!(
                    rec.subject.is_some_and(|s| s.kind == ActorKind::Dbs),
                    "{} not aimed at a dbs: {rec}",
                    rec.verb
                );
            }
            if matches!(rec.verb, TraceVerb::AppointmentResponse | TraceVerb::WakeupAck) {
                ensure!(rec.actor.kind == ActorKind::Dbs, "{} not from dbs: {rec}", rec.verb);
                ensure!(
                    rec.subject.is_some_and(|s| s.kind == ActorKind::Sbs),
                    "{} not aimed at the sbs: {rec}",
                    rec.verb
                );
            }
        }

        within(started.elapsed(), Duration::from_secs(30))
    });
}

// The corrupted-fixture case the checker must catch: TRAFFIC cannot precede
// LINK_ESTABLISH.
#[test]
fn checker_names_the_violated_edge() {
    let scenario = Scenario::load(&scenario_path("mo_basic.hcn-scn")).unwrap();
    let report = run_scenario(&scenario).unwrap();
    let mut records = report.trace;
    let link = records.iter().position(|r| r.verb == TraceVerb::LinkEstablish).unwrap();
    let traffic = records.iter().position(|r| r.verb == TraceVerb::Traffic).unwrap();
    records.swap(link, traffic);

    match check_template(&records, Template::Mo) {
        CheckOutcome::Pass { .. } => panic!("corrupted trace passed"),
        CheckOutcome::Fail { reason, .. } => {
            assert!(
                reason.contains("LINK_ESTABLISH") || reason.contains("TRAFFIC"),
                "reason does not name the edge: {reason}"
            );
        }
    }
}
