//! Signaling base station: owns camping, paging and access grants, and
//! brokers every traffic channel through appointments to data stations.

use std::collections::{BTreeMap, BTreeSet};

use crate::ids::{Actor, Micros, MsId, StationId};
use crate::trace::{TraceRecord, TraceVerb};
use crate::um::CarrierConfig;
use crate::wire::{ControlMessage, LoadByte, MessageHeader, ServiceKind, WirePower};

use super::{AirAddr, AirEvent, Command, Input, Outbox, PowerState};

/// Who may camp on this SBS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdmissionPolicy {
    Open,
    Allowlist(BTreeSet<MsId>),
}

impl AdmissionPolicy {
    fn admits(&self, ms: MsId) -> bool {
        match self {
            AdmissionPolicy::Open => true,
            AdmissionPolicy::Allowlist(set) => set.contains(&ms),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SbsConfig {
    pub station_id: StationId,
    pub carrier: CarrierConfig,
    /// Loads at or above this fraction count as "high"; such stations are
    /// passed over in favor of waking a sleeper.
    pub high_load_threshold: f64,
    pub admission: AdmissionPolicy,
}

/// The SBS's view of one data station, mirrored from status reports and its
/// own appointment bookkeeping.
#[derive(Debug, Clone)]
pub struct DbsDescriptor {
    pub dbs_id: StationId,
    pub carrier: CarrierConfig,
    pub capacity: u16,
    pub power: PowerState,
    /// Estimated busy traffic slots.
    pub occupied: u16,
}

impl DbsDescriptor {
    /// Load as the wire quantizes it; comparisons and tie breaks happen on
    /// this value.
    pub fn load_byte(&self) -> LoadByte {
        let occ = self.occupied.min(self.capacity);
        LoadByte::from_fraction(occ as f64 / self.capacity as f64).expect("load within [0,1]")
    }
}

/// Outcome of picking a data station for one channel request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppointmentDecision {
    /// Send the appointment to this active station.
    Appoint(StationId),
    /// Wake this sleeping station first, appoint once it acknowledges.
    WakeThenAppoint(StationId),
    Reject(RejectReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    NoDbsAvailable,
}

impl RejectReason {
    pub const fn name(self) -> &'static str {
        match self {
            RejectReason::NoDbsAvailable => "no_dbs_available",
        }
    }
}

/// Picks a data station for a traffic channel.
///
/// Preference order: the least-loaded active station under the high-load
/// threshold; otherwise wake the lowest-id sleeper; otherwise any active
/// station with a free slot; otherwise reject. Ties break toward the lower
/// station id, on quantized loads.
pub fn select_dbs(
    registry: &BTreeMap<StationId, DbsDescriptor>,
    threshold: f64,
) -> AppointmentDecision {
    select_dbs_excluding(registry, threshold, None)
}

/// [`select_dbs`] with one station barred, used when retrying after a denial.
pub fn select_dbs_excluding(
    registry: &BTreeMap<StationId, DbsDescriptor>,
    threshold: f64,
    exclude: Option<StationId>,
) -> AppointmentDecision {
    let threshold_byte = LoadByte::from_fraction(threshold.clamp(0.0, 1.0))
        .expect("threshold within [0,1]");
    let considered =
        || registry.values().filter(|d| Some(d.dbs_id) != exclude);

    let best_under = considered()
        .filter(|d| d.power == PowerState::Active)
        .filter(|d| d.load_byte() < threshold_byte && d.load_byte() < LoadByte::FULL)
        .min_by_key(|d| (d.load_byte(), d.dbs_id));
    if let Some(d) = best_under {
        return AppointmentDecision::Appoint(d.dbs_id);
    }

    let sleeper = considered()
        .filter(|d| d.power == PowerState::Sleep)
        .map(|d| d.dbs_id)
        .min();
    if let Some(id) = sleeper {
        return AppointmentDecision::WakeThenAppoint(id);
    }

    let any_free = considered()
        .filter(|d| d.power == PowerState::Active && d.load_byte() < LoadByte::FULL)
        .min_by_key(|d| (d.load_byte(), d.dbs_id));
    if let Some(d) = any_free {
        return AppointmentDecision::Appoint(d.dbs_id);
    }

    AppointmentDecision::Reject(RejectReason::NoDbsAvailable)
}

#[derive(Debug, Clone)]
struct PendingRequest {
    ms: MsId,
    service: ServiceKind,
    dbs: StationId,
    /// Waiting for the wake acknowledgment before the appointment goes out.
    waking: bool,
    /// A denial has already been retried once; the next one rejects the MS.
    retried: bool,
}

/// The signaling station state machine.
#[derive(Debug)]
pub struct Sbs {
    config: SbsConfig,
    registered: BTreeSet<MsId>,
    registry: BTreeMap<StationId, DbsDescriptor>,
    pending: BTreeMap<u32, PendingRequest>,
    next_txn: u32,
}

impl Sbs {
    pub fn new(config: SbsConfig, dbs_registry: Vec<DbsDescriptor>) -> Sbs {
        let registry = dbs_registry.into_iter().map(|d| (d.dbs_id, d)).collect();
        Sbs { config, registered: BTreeSet::new(), registry, pending: BTreeMap::new(), next_txn: 1 }
    }

    pub fn station_id(&self) -> StationId {
        self.config.station_id
    }

    pub fn carrier(&self) -> CarrierConfig {
        self.config.carrier
    }

    fn actor(&self) -> Actor {
        Actor::sbs(self.config.station_id)
    }

    pub fn is_registered(&self, ms: MsId) -> bool {
        self.registered.contains(&ms)
    }

    pub fn registry(&self) -> &BTreeMap<StationId, DbsDescriptor> {
        &self.registry
    }

    /// Called once when the run starts.
    pub fn start(&mut self, _now: Micros, _out: &mut Outbox) {}

    pub fn handle(&mut self, now: Micros, input: Input, out: &mut Outbox) {
        match input {
            Input::Air(event) => self.handle_air(now, event, out),
            Input::Control { header, msg } => self.handle_control(now, header, msg, out),
            Input::Command(cmd) => self.handle_command(now, cmd, out),
            Input::Timer(_) => {}
        }
    }

    fn handle_air(&mut self, now: Micros, event: AirEvent, out: &mut Outbox) {
        match event {
            AirEvent::RegistrationRequest { ms } => self.handle_registration(now, ms, out),
            AirEvent::ChannelRequest { ms, service } => {
                self.handle_channel_request(now, ms, service, out)
            }
            // Everything else on the air is mobile-bound.
            _ => {}
        }
    }

    fn handle_registration(&mut self, now: Micros, ms: MsId, out: &mut Outbox) {
        // Re-registration is idempotent.
        let accept = self.config.admission.admits(ms);
        if accept {
            self.registered.insert(ms);
        }
        out.trace(
            TraceRecord::new(now, self.actor(), TraceVerb::Register, Some(Actor::ms(ms)))
                .attr("accept", accept as u8)
                .attr("chan", "sdcch"),
        );
        out.air(AirAddr::Ms(ms), AirEvent::RegistrationResult { ms, accept });
    }

    fn handle_channel_request(
        &mut self,
        now: Micros,
        ms: MsId,
        service: ServiceKind,
        out: &mut Outbox,
    ) {
        if !self.registered.contains(&ms) {
            out.trace(
                TraceRecord::new(
                    now,
                    self.actor(),
                    TraceVerb::UnregisteredRequest,
                    Some(Actor::ms(ms)),
                )
                .attr("service", service),
            );
            return;
        }
        let decision = select_dbs(&self.registry, self.config.high_load_threshold);
        let txn = self.next_txn;
        self.next_txn += 1;
        match decision {
            AppointmentDecision::Appoint(dbs) => {
                self.pending.insert(
                    txn,
                    PendingRequest { ms, service, dbs, waking: false, retried: false },
                );
                self.send_appointment(now, txn, dbs, ms, service, out);
            }
            AppointmentDecision::WakeThenAppoint(dbs) => {
                self.pending.insert(
                    txn,
                    PendingRequest { ms, service, dbs, waking: true, retried: false },
                );
                self.send_wakeup(now, txn, dbs, ms, out);
            }
            AppointmentDecision::Reject(reason) => {
                self.reject(now, ms, service, reason, out);
            }
        }
    }

    fn send_appointment(
        &mut self,
        now: Micros,
        txn: u32,
        dbs: StationId,
        ms: MsId,
        service: ServiceKind,
        out: &mut Outbox,
    ) {
        out.trace(
            TraceRecord::new(now, self.actor(), TraceVerb::Appointment, Some(Actor::dbs(dbs)))
                .attr("ms", ms)
                .attr("service", service)
                .attr("txn", txn),
        );
        out.control(
            dbs,
            txn,
            ControlMessage::ChannelAppointment { ms_id: ms.0, service, slot: 0 },
        );
    }

    fn send_wakeup(&mut self, now: Micros, txn: u32, dbs: StationId, ms: MsId, out: &mut Outbox) {
        if let Some(entry) = self.registry.get_mut(&dbs) {
            entry.power = PowerState::Waking;
        }
        out.trace(
            TraceRecord::new(now, self.actor(), TraceVerb::Wakeup, Some(Actor::dbs(dbs)))
                .attr("ms", ms)
                .attr("txn", txn),
        );
        out.control(dbs, txn, ControlMessage::WakeupCommand { dbs_id: dbs.0 as u32 });
    }

    fn reject(
        &mut self,
        now: Micros,
        ms: MsId,
        service: ServiceKind,
        reason: RejectReason,
        out: &mut Outbox,
    ) {
        out.trace(
            TraceRecord::new(now, self.actor(), TraceVerb::Reject, Some(Actor::ms(ms)))
                .attr("chan", "agch")
                .attr("reason", reason.name())
                .attr("service", service),
        );
        out.air(AirAddr::Ms(ms), AirEvent::AssignmentReject { ms });
    }

    fn handle_control(
        &mut self,
        now: Micros,
        header: MessageHeader,
        msg: ControlMessage,
        out: &mut Outbox,
    ) {
        let sender = StationId(header.sender_id);
        match msg {
            ControlMessage::AppointmentResponse { accept, arfcn, slot } => {
                self.handle_response(now, header.transaction_id, sender, accept, arfcn, slot, out)
            }
            ControlMessage::WakeupAck { dbs_id } => {
                self.handle_wakeup_ack(now, header.transaction_id, StationId(dbs_id as u16), out)
            }
            ControlMessage::StatusReport { power, load } => {
                self.handle_status(sender, power, load)
            }
            ControlMessage::LinkRelease { ms_id: _ } => {
                if let Some(entry) = self.registry.get_mut(&sender) {
                    entry.occupied = entry.occupied.saturating_sub(1);
                }
            }
            // SBS-bound senders never emit the remaining variants.
            _ => {
                out.trace(
                    TraceRecord::new(
                        now,
                        self.actor(),
                        TraceVerb::ProtocolViolation,
                        Some(Actor::dbs(sender)),
                    )
                    .attr("what", "unexpected_control_message")
                    .attr("tag", msg.tag()),
                );
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn handle_response(
        &mut self,
        now: Micros,
        txn: u32,
        sender: StationId,
        accept: bool,
        arfcn: u16,
        slot: u8,
        out: &mut Outbox,
    ) {
        let Some(pending) = self.pending.get(&txn).cloned() else {
            out.trace(
                TraceRecord::new(
                    now,
                    self.actor(),
                    TraceVerb::OrphanResponse,
                    Some(Actor::dbs(sender)),
                )
                .attr("txn", txn),
            );
            return;
        };
        if accept {
            if let Some(entry) = self.registry.get_mut(&sender) {
                entry.occupied = (entry.occupied + 1).min(entry.capacity);
            }
            out.trace(
                TraceRecord::new(
                    now,
                    self.actor(),
                    TraceVerb::Assignment,
                    Some(Actor::ms(pending.ms)),
                )
                .attr("arfcn", arfcn)
                .attr("chan", "agch")
                .attr("dbs", sender.0)
                .attr("service", pending.service)
                .attr("slot", slot)
                .attr("txn", txn),
            );
            out.air(
                AirAddr::Ms(pending.ms),
                AirEvent::Assignment {
                    ms: pending.ms,
                    dbs: sender,
                    arfcn,
                    slot,
                    service: pending.service,
                },
            );
            self.pending.remove(&txn);
            return;
        }
        // Denied. Retry once against the rest of the fleet, then give up.
        if pending.retried {
            self.pending.remove(&txn);
            self.reject(now, pending.ms, pending.service, RejectReason::NoDbsAvailable, out);
            return;
        }
        match select_dbs_excluding(&self.registry, self.config.high_load_threshold, Some(sender)) {
            AppointmentDecision::Appoint(dbs) => {
                let entry = self.pending.get_mut(&txn).expect("pending checked above");
                entry.dbs = dbs;
                entry.retried = true;
                entry.waking = false;
                self.send_appointment(now, txn, dbs, pending.ms, pending.service, out);
            }
            AppointmentDecision::WakeThenAppoint(dbs) => {
                let entry = self.pending.get_mut(&txn).expect("pending checked above");
                entry.dbs = dbs;
                entry.retried = true;
                entry.waking = true;
                self.send_wakeup(now, txn, dbs, pending.ms, out);
            }
            AppointmentDecision::Reject(reason) => {
                self.pending.remove(&txn);
                self.reject(now, pending.ms, pending.service, reason, out);
            }
        }
    }

    fn handle_wakeup_ack(&mut self, now: Micros, txn: u32, dbs: StationId, out: &mut Outbox) {
        if let Some(entry) = self.registry.get_mut(&dbs) {
            entry.power = PowerState::Active;
        }
        let Some(pending) = self.pending.get_mut(&txn) else {
            // Ack for a transaction already resolved; the mirror update above
            // is all it is good for.
            return;
        };
        if pending.waking && pending.dbs == dbs {
            pending.waking = false;
            let (ms, service) = (pending.ms, pending.service);
            self.send_appointment(now, txn, dbs, ms, service, out);
        }
    }

    fn handle_status(&mut self, sender: StationId, power: WirePower, load: LoadByte) {
        if let Some(entry) = self.registry.get_mut(&sender) {
            entry.power = match power {
                WirePower::Sleep => PowerState::Sleep,
                WirePower::Active => PowerState::Active,
            };
            // Invert the wire quantization against the known capacity; exact
            // for capacities up to 127.
            entry.occupied =
                (load.fraction() * entry.capacity as f64).round() as u16;
        }
    }

    fn handle_command(&mut self, now: Micros, cmd: Command, out: &mut Outbox) {
        match cmd {
            Command::Page { ms } => {
                if !self.registered.contains(&ms) {
                    out.trace(TraceRecord::new(
                        now,
                        self.actor(),
                        TraceVerb::PageUnknownMs,
                        Some(Actor::ms(ms)),
                    ));
                    return;
                }
                out.trace(
                    TraceRecord::new(now, self.actor(), TraceVerb::Page, Some(Actor::ms(ms)))
                        .attr("chan", "pch"),
                );
                out.air(AirAddr::AllMs, AirEvent::Page { ms });
            }
            _ => {}
        }
    }
}
