//! In-process discrete-event engine. One queue orders every input by
//! (virtual time, enqueue sequence); entities never see the queue, only
//! their own inbox items, so runs are reproducible bit for bit.
//!
//! Station-to-station coordination goes through the real wire codec even
//! in process: every control message is encoded, decoded, and passed
//! through the in-order admission filter, exactly as the UDP transport
//! does it.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::energy::{EnergyLedger, EnergyReport, PowerDraw};
use crate::entity::{
    AdmissionPolicy, AirAddr, AirEvent, Command, Dbs, DbsConfig, DbsDescriptor, Input, Ms,
    MsConfig, MsPhase, Outbox, PowerState, Sbs, SbsConfig,
};
use crate::ids::{Actor, ActorKind, Micros, MsId, StationId};
use crate::scenario::{Action, Scenario};
use crate::trace::{TraceRecord, TraceVerb};
use crate::um::{CarrierConfig, Role};
use crate::wire::{decode, encode, Admission, InOrderFilter, MessageHeader, SeqAllocator};

enum Node {
    Sbs(Sbs),
    Dbs(Dbs),
    Ms(Ms),
}

struct QueuedEvent {
    time: Micros,
    seq: u64,
    target: Actor,
    input: Input,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct RunSummary {
    pub calls_attempted: u64,
    pub calls_connected: u64,
    pub calls_rejected: u64,
    pub wakeups: u64,
    /// Control datagrams dropped by the in-order filter.
    pub dropped_control: u64,
    pub dead_letters: u64,
}

impl RunSummary {
    /// Derive the call counters from a trace. Transport-side counters
    /// (drops, dead letters) stay zero; the caller owns those.
    pub fn from_trace(trace: &[TraceRecord]) -> RunSummary {
        let mut s = RunSummary::default();
        for rec in trace {
            match rec.verb {
                TraceVerb::ChannelRequest => s.calls_attempted += 1,
                TraceVerb::Traffic => s.calls_connected += 1,
                TraceVerb::Reject => s.calls_rejected += 1,
                TraceVerb::Wakeup => s.wakeups += 1,
                _ => {}
            }
        }
        s
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub trace: Vec<TraceRecord>,
    pub energy: EnergyReport,
    pub summary: RunSummary,
    pub final_ms_phases: BTreeMap<MsId, MsPhase>,
    pub final_power: BTreeMap<StationId, PowerState>,
}

/// The simulator. Build it from a validated [`Scenario`], then either
/// [`Sim::run`] to the horizon or [`Sim::step`] one timestamp at a time with
/// state snapshots in between.
pub struct Sim {
    now: Micros,
    horizon: Micros,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    next_seq: u64,
    nodes: BTreeMap<Actor, Node>,
    carriers: BTreeMap<u16, Actor>,
    /// Carriers broadcasting a BCH, i.e. what a scan can find.
    broadcast: Vec<(StationId, u16)>,
    air_delay: Micros,
    ctrl_delay: Micros,
    seq_alloc: BTreeMap<u16, SeqAllocator>,
    filters: BTreeMap<u16, InOrderFilter>,
    ledger: EnergyLedger,
    trace: Vec<TraceRecord>,
    summary: RunSummary,
}

impl Sim {
    pub fn new(scenario: &Scenario) -> Result<Sim, crate::scenario::ScenarioError> {
        scenario.validate()?;
        let knobs = &scenario.knobs;
        let sbs_carrier =
            CarrierConfig::new(scenario.sbs.arfcn, scenario.sbs.color_code, Role::Sbs)
                .expect("validated");
        let mut registry = Vec::new();
        let mut nodes = BTreeMap::new();
        let mut carriers = BTreeMap::new();
        let mut ledger = EnergyLedger::new(PowerDraw {
            sleep_w: knobs.sleep_w,
            waking_w: knobs.waking_w,
            active_w: knobs.active_w,
        });

        for d in &scenario.dbs {
            let carrier = CarrierConfig::new(d.arfcn, d.color_code, Role::Dbs).expect("validated");
            registry.push(DbsDescriptor {
                dbs_id: d.id,
                carrier,
                capacity: d.capacity,
                power: d.initial_power,
                occupied: 0,
            });
            let dbs = Dbs::new(DbsConfig {
                dbs_id: d.id,
                carrier,
                capacity: d.capacity,
                wake_latency_us: knobs.wake_latency_us,
                idle_timeout_us: knobs.idle_timeout_us,
                sbs_id: scenario.sbs.id,
                initial_power: d.initial_power,
            });
            nodes.insert(Actor::dbs(d.id), Node::Dbs(dbs));
            carriers.insert(d.arfcn, Actor::dbs(d.id));
            ledger.register(d.id, d.initial_power);
        }

        let sbs = Sbs::new(
            SbsConfig {
                station_id: scenario.sbs.id,
                carrier: sbs_carrier,
                high_load_threshold: knobs.high_load_threshold,
                admission: AdmissionPolicy::Open,
            },
            registry,
        );
        nodes.insert(Actor::sbs(scenario.sbs.id), Node::Sbs(sbs));
        carriers.insert(scenario.sbs.arfcn, Actor::sbs(scenario.sbs.id));

        for &ms in &scenario.mobiles {
            nodes.insert(Actor::ms(ms), Node::Ms(Ms::new(MsConfig { ms_id: ms })));
        }

        let mut sim = Sim {
            now: 0,
            horizon: knobs.horizon_us,
            queue: BinaryHeap::new(),
            next_seq: 0,
            nodes,
            carriers,
            broadcast: vec![(scenario.sbs.id, scenario.sbs.arfcn)],
            air_delay: knobs.air_delay_us,
            ctrl_delay: knobs.ctrl_delay_us,
            seq_alloc: BTreeMap::new(),
            filters: BTreeMap::new(),
            ledger,
            trace: Vec::new(),
            summary: RunSummary::default(),
        };

        for stim in &scenario.stimuli {
            match stim.action {
                Action::PowerOn { ms } => {
                    sim.enqueue(stim.at, Actor::ms(ms), Input::Command(Command::PowerOn));
                }
                Action::MoCall { ms, duration_us } => {
                    sim.enqueue(
                        stim.at,
                        Actor::ms(ms),
                        Input::Command(Command::Originate { duration_us }),
                    );
                }
                Action::MtCall { ms, duration_us } => {
                    // The network side pages; the mobile needs to know how
                    // long to hold the call once it connects.
                    sim.enqueue(
                        stim.at,
                        Actor::ms(ms),
                        Input::Command(Command::ArmCallDuration { duration_us }),
                    );
                    sim.enqueue(
                        stim.at,
                        Actor::sbs(scenario.sbs.id),
                        Input::Command(Command::Page { ms }),
                    );
                }
                Action::DenyNextAppointment { dbs } => {
                    sim.enqueue(
                        stim.at,
                        Actor::dbs(dbs),
                        Input::Command(Command::DenyNextAppointment),
                    );
                }
            }
        }

        sim.start_entities();
        Ok(sim)
    }

    fn start_entities(&mut self) {
        let actors: Vec<Actor> = self.nodes.keys().copied().collect();
        for actor in actors {
            let mut out = Outbox::new();
            match self.nodes.get_mut(&actor).expect("just listed") {
                Node::Sbs(sbs) => sbs.start(0, &mut out),
                Node::Dbs(dbs) => dbs.start(0, &mut out),
                Node::Ms(_) => {}
            }
            self.drain(actor, out);
        }
    }

    fn enqueue(&mut self, time: Micros, target: Actor, input: Input) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(QueuedEvent { time, seq, target, input }));
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn horizon(&self) -> Micros {
        self.horizon
    }

    pub fn ms_phase(&self, ms: MsId) -> Option<MsPhase> {
        match self.nodes.get(&Actor::ms(ms)) {
            Some(Node::Ms(m)) => Some(m.phase()),
            _ => None,
        }
    }

    pub fn dbs_power(&self, id: StationId) -> Option<PowerState> {
        match self.nodes.get(&Actor::dbs(id)) {
            Some(Node::Dbs(d)) => Some(d.power()),
            _ => None,
        }
    }

    pub fn dbs_established(&self, id: StationId) -> Option<u16> {
        match self.nodes.get(&Actor::dbs(id)) {
            Some(Node::Dbs(d)) => Some(d.established_links()),
            _ => None,
        }
    }

    /// Mobiles currently in a call.
    pub fn in_call_count(&self) -> usize {
        self.nodes
            .values()
            .filter(|n| matches!(n, Node::Ms(m) if m.phase() == MsPhase::InCall))
            .count()
    }

    /// Established traffic links summed over every data station.
    pub fn established_total(&self) -> usize {
        self.nodes
            .values()
            .map(|n| match n {
                Node::Dbs(d) => d.established_links() as usize,
                _ => 0,
            })
            .sum()
    }

    pub fn trace_so_far(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Process every event at the next pending timestamp within the
    /// horizon. Returns that timestamp, or None when nothing is left.
    pub fn step(&mut self) -> Option<Micros> {
        let t = match self.queue.peek() {
            Some(Reverse(ev)) if ev.time <= self.horizon => ev.time,
            _ => return None,
        };
        self.now = t;
        while let Some(Reverse(ev)) = self.queue.peek() {
            if ev.time != t {
                break;
            }
            let Reverse(ev) = self.queue.pop().expect("peeked");
            self.dispatch(ev);
        }
        Some(t)
    }

    fn dispatch(&mut self, ev: QueuedEvent) {
        // Control datagrams pass the admission filter of the receiving
        // station before the machine sees them.
        if let Input::Control { header, .. } = &ev.input {
            let Some(station) = ev.target.station_id() else { return };
            let filter = self.filters.entry(station.0).or_default();
            match filter.admit(header) {
                Admission::Deliver => {}
                Admission::DropDuplicate | Admission::DropStale => {
                    self.summary.dropped_control += 1;
                    return;
                }
            }
        }
        let Some(node) = self.nodes.get_mut(&ev.target) else {
            self.summary.dead_letters += 1;
            return;
        };
        let mut out = Outbox::new();
        match node {
            Node::Sbs(sbs) => sbs.handle(ev.time, ev.input, &mut out),
            Node::Dbs(dbs) => dbs.handle(ev.time, ev.input, &mut out),
            Node::Ms(ms) => ms.handle(ev.time, ev.input, &mut out),
        }
        self.drain(ev.target, out);
    }

    /// Apply one entity's effects: collect traces, route air and control
    /// messages, schedule timers, and log power transitions.
    fn drain(&mut self, from: Actor, out: Outbox) {
        self.trace.extend(out.trace);

        if let Some(station) = from.station_id() {
            for state in out.power_transitions {
                self.ledger.transition(station, self.now, state);
            }
        }

        for (at, kind) in out.timers {
            debug_assert!(at >= self.now);
            self.enqueue(at, from, Input::Timer(kind));
        }

        for send in out.control {
            let sender = from.station_id().expect("only stations send control messages");
            let seq = self.seq_alloc.entry(sender.0).or_default().next_seq(send.to.0);
            let header =
                MessageHeader { sender_id: sender.0, seq, transaction_id: send.transaction_id };
            // Round trip through the codec so in-process runs exercise the
            // same bytes the UDP transport puts on the wire.
            let bytes = encode(&header, &send.msg);
            let (header, msg) = decode(&bytes).expect("self-encoded frame decodes");
            let target = match self.nodes.get(&Actor::dbs(send.to)) {
                Some(_) => Actor::dbs(send.to),
                None => Actor::sbs(send.to),
            };
            self.enqueue(self.now + self.ctrl_delay, target, Input::Control { header, msg });
        }

        for (addr, event) in out.air {
            self.route_air(from, addr, event);
        }
    }

    fn route_air(&mut self, from: Actor, addr: AirAddr, event: AirEvent) {
        let deliver_at = self.now + self.air_delay;
        match addr {
            AirAddr::Carrier(arfcn) => match self.carriers.get(&arfcn) {
                Some(&target) => self.enqueue(deliver_at, target, Input::Air(event)),
                None => {
                    self.summary.dead_letters += 1;
                    self.trace.push(
                        TraceRecord::new(self.now, from, TraceVerb::DeadLetter, None)
                            .attr("carrier", arfcn),
                    );
                }
            },
            AirAddr::Ms(ms) => {
                let target = Actor::ms(ms);
                if self.nodes.contains_key(&target) {
                    self.enqueue(deliver_at, target, Input::Air(event));
                } else {
                    self.summary.dead_letters += 1;
                    self.trace.push(
                        TraceRecord::new(self.now, from, TraceVerb::DeadLetter, None)
                            .attr("ms", ms),
                    );
                }
            }
            AirAddr::AllMs => {
                let targets: Vec<Actor> = self
                    .nodes
                    .keys()
                    .filter(|a| a.kind == ActorKind::Ms)
                    .copied()
                    .collect();
                for target in targets {
                    self.enqueue(deliver_at, target, Input::Air(event.clone()));
                }
            }
            AirAddr::Medium => {
                // The medium answers scans itself: it knows who broadcasts.
                if let AirEvent::ScanProbe { ms } = event {
                    self.enqueue(
                        deliver_at,
                        Actor::ms(ms),
                        Input::Air(AirEvent::ScanResult { stations: self.broadcast.clone() }),
                    );
                }
            }
        }
    }

    /// Run to the horizon and close the books.
    pub fn run(mut self) -> RunReport {
        while self.step().is_some() {}
        self.finish()
    }

    /// Close the energy ledger at the horizon and report. Pending events
    /// past the horizon are discarded.
    pub fn finish(self) -> RunReport {
        let mut summary = RunSummary::from_trace(&self.trace);
        summary.dropped_control = self.summary.dropped_control;
        summary.dead_letters = self.summary.dead_letters;
        let mut final_ms_phases = BTreeMap::new();
        let mut final_power = BTreeMap::new();
        for (actor, node) in &self.nodes {
            match node {
                Node::Ms(m) => {
                    final_ms_phases.insert(m.ms_id(), m.phase());
                }
                Node::Dbs(d) => {
                    final_power.insert(d.station_id(), d.power());
                }
                Node::Sbs(_) => {}
            }
            let _ = actor;
        }
        RunReport {
            trace: self.trace,
            energy: self.ledger.finish(self.horizon),
            summary,
            final_ms_phases,
            final_power,
        }
    }
}

/// Build, run, report.
pub fn run_scenario(scenario: &Scenario) -> Result<RunReport, crate::scenario::ScenarioError> {
    Ok(Sim::new(scenario)?.run())
}
