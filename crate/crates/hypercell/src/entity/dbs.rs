//! Data base station: serves traffic slots on appointment, sleeps when idle,
//! wakes on command. Keeps radio silence toward mobiles until an appointment
//! names one.

use std::collections::BTreeMap;

use crate::ids::{Actor, Micros, MsId, StationId};
use crate::trace::{TraceRecord, TraceVerb};
use crate::um::CarrierConfig;
use crate::wire::{ControlMessage, LoadByte, MessageHeader, ServiceKind, WirePower};

use super::{AirAddr, AirEvent, Command, Input, Outbox, PowerState, TimerKind};

#[derive(Debug, Clone)]
pub struct DbsConfig {
    pub dbs_id: StationId,
    pub carrier: CarrierConfig,
    /// Traffic slots this station can serve concurrently. The TDMA carrier
    /// keeps one slot for its own signaling, hence 7 by default.
    pub capacity: u16,
    /// Sleep to active takes this long.
    pub wake_latency_us: Micros,
    /// Active with no links for this long means go back to sleep.
    pub idle_timeout_us: Micros,
    pub sbs_id: StationId,
    /// Power state at t=0. Must be `Sleep` or `Active`.
    pub initial_power: PowerState,
}

#[derive(Debug, Clone)]
struct Link {
    slot: u8,
    service: ServiceKind,
    /// Slot is reserved at appointment time, established once the mobile
    /// arrives on it. Only established links count as occupied.
    established: bool,
    paging_ack_seen: bool,
}

/// The data station state machine.
#[derive(Debug)]
pub struct Dbs {
    config: DbsConfig,
    power: PowerState,
    links: BTreeMap<MsId, Link>,
    deny_next: bool,
    /// Wake transactions to acknowledge once active.
    pending_wake_txns: Vec<u32>,
    /// Bumped on every activity; stale idle checks carry an old value.
    idle_generation: u64,
}

impl Dbs {
    pub fn new(config: DbsConfig) -> Dbs {
        let power = config.initial_power;
        Dbs {
            config,
            power,
            links: BTreeMap::new(),
            deny_next: false,
            pending_wake_txns: Vec::new(),
            idle_generation: 0,
        }
    }

    pub fn station_id(&self) -> StationId {
        self.config.dbs_id
    }

    pub fn carrier(&self) -> CarrierConfig {
        self.config.carrier
    }

    pub fn power(&self) -> PowerState {
        self.power
    }

    /// Established traffic links right now.
    pub fn established_links(&self) -> u16 {
        self.links.values().filter(|l| l.established).count() as u16
    }

    /// Reserved plus established links.
    pub fn total_links(&self) -> u16 {
        self.links.len() as u16
    }

    pub fn load_byte(&self) -> LoadByte {
        let occ = self.established_links().min(self.config.capacity);
        LoadByte::from_fraction(occ as f64 / self.config.capacity as f64)
            .expect("load within [0,1]")
    }

    fn actor(&self) -> Actor {
        Actor::dbs(self.config.dbs_id)
    }

    fn sbs_actor(&self) -> Actor {
        Actor::sbs(self.config.sbs_id)
    }

    /// Called once when the run starts: an active station arms its idle
    /// timer so an unused fleet drains back to sleep.
    pub fn start(&mut self, now: Micros, out: &mut Outbox) {
        if self.power == PowerState::Active {
            self.arm_idle_check(now, out);
        }
    }

    fn arm_idle_check(&mut self, now: Micros, out: &mut Outbox) {
        self.idle_generation += 1;
        out.timer(
            now + self.config.idle_timeout_us,
            TimerKind::IdleCheck { generation: self.idle_generation },
        );
    }

    fn cancel_idle_check(&mut self) {
        self.idle_generation += 1;
    }

    pub fn handle(&mut self, now: Micros, input: Input, out: &mut Outbox) {
        match input {
            Input::Control { header, msg } => self.handle_control(now, header, msg, out),
            Input::Air(event) => self.handle_air(now, event, out),
            Input::Timer(kind) => self.handle_timer(now, kind, out),
            Input::Command(Command::DenyNextAppointment) => {
                self.deny_next = true;
            }
            Input::Command(_) => {}
        }
    }

    fn handle_control(
        &mut self,
        now: Micros,
        header: MessageHeader,
        msg: ControlMessage,
        out: &mut Outbox,
    ) {
        match msg {
            ControlMessage::ChannelAppointment { ms_id, service, slot: _ } => {
                self.handle_appointment(now, header.transaction_id, MsId(ms_id), service, out)
            }
            ControlMessage::WakeupCommand { .. } => {
                self.handle_wakeup(now, header.transaction_id, out)
            }
            _ => {
                out.trace(
                    TraceRecord::new(
                        now,
                        self.actor(),
                        TraceVerb::ProtocolViolation,
                        Some(Actor::sbs(StationId(header.sender_id))),
                    )
                    .attr("what", "unexpected_control_message")
                    .attr("tag", msg.tag()),
                );
            }
        }
    }

    fn respond(&mut self, now: Micros, txn: u32, accept: bool, slot: u8, out: &mut Outbox) {
        let arfcn = if accept { self.config.carrier.arfcn } else { 0 };
        let slot = if accept { slot } else { 0 };
        let mut rec = TraceRecord::new(
            now,
            self.actor(),
            TraceVerb::AppointmentResponse,
            Some(self.sbs_actor()),
        )
        .attr("accept", accept as u8)
        .attr("txn", txn);
        if accept {
            rec = rec.attr("arfcn", arfcn).attr("slot", slot);
        }
        out.trace(rec);
        out.control(
            self.config.sbs_id,
            txn,
            ControlMessage::AppointmentResponse { accept, arfcn, slot },
        );
    }

    fn handle_appointment(
        &mut self,
        now: Micros,
        txn: u32,
        ms: MsId,
        service: ServiceKind,
        out: &mut Outbox,
    ) {
        if self.power != PowerState::Active {
            // The SBS's mirror was stale; refuse and say so in the trace.
            out.trace(
                TraceRecord::new(
                    now,
                    self.actor(),
                    TraceVerb::ProtocolViolation,
                    Some(self.sbs_actor()),
                )
                .attr("ms", ms)
                .attr("power", self.power)
                .attr("what", "appointment_while_not_active"),
            );
            self.respond(now, txn, false, 0, out);
            return;
        }
        if self.deny_next {
            self.deny_next = false;
            self.respond(now, txn, false, 0, out);
            return;
        }
        if let Some(link) = self.links.get(&ms) {
            // Duplicate appointment for a mobile already holding a slot.
            let slot = link.slot;
            self.respond(now, txn, true, slot, out);
            return;
        }
        if self.links.len() as u16 >= self.config.capacity {
            self.respond(now, txn, false, 0, out);
            return;
        }
        let slot = self.lowest_free_slot();
        self.links.insert(
            ms,
            Link { slot, service, established: false, paging_ack_seen: false },
        );
        self.cancel_idle_check();
        self.respond(now, txn, true, slot, out);
    }

    fn lowest_free_slot(&self) -> u8 {
        let mut used: Vec<u8> = self.links.values().map(|l| l.slot).collect();
        used.sort_unstable();
        let mut candidate = 0u8;
        for slot in used {
            if slot == candidate {
                candidate += 1;
            }
        }
        candidate
    }

    fn handle_wakeup(&mut self, now: Micros, txn: u32, out: &mut Outbox) {
        match self.power {
            PowerState::Sleep => {
                self.power = PowerState::Waking;
                out.power(PowerState::Waking);
                self.pending_wake_txns.push(txn);
                out.timer(now + self.config.wake_latency_us, TimerKind::WakeComplete);
            }
            PowerState::Waking => {
                self.pending_wake_txns.push(txn);
            }
            PowerState::Active => {
                // Already up: acknowledge immediately.
                self.send_wake_ack(now, txn, out);
            }
        }
    }

    fn send_wake_ack(&mut self, now: Micros, txn: u32, out: &mut Outbox) {
        out.trace(
            TraceRecord::new(now, self.actor(), TraceVerb::WakeupAck, Some(self.sbs_actor()))
                .attr("txn", txn),
        );
        out.control(
            self.config.sbs_id,
            txn,
            ControlMessage::WakeupAck { dbs_id: self.config.dbs_id.0 as u32 },
        );
    }

    fn handle_timer(&mut self, now: Micros, kind: TimerKind, out: &mut Outbox) {
        match kind {
            TimerKind::WakeComplete => {
                if self.power != PowerState::Waking {
                    return;
                }
                self.power = PowerState::Active;
                out.power(PowerState::Active);
                for txn in std::mem::take(&mut self.pending_wake_txns) {
                    self.send_wake_ack(now, txn, out);
                }
                self.arm_idle_check(now, out);
            }
            TimerKind::IdleCheck { generation } => {
                if generation != self.idle_generation
                    || self.power != PowerState::Active
                    || !self.links.is_empty()
                {
                    return;
                }
                self.power = PowerState::Sleep;
                out.power(PowerState::Sleep);
                out.control(
                    self.config.sbs_id,
                    0,
                    ControlMessage::StatusReport { power: WirePower::Sleep, load: LoadByte::ZERO },
                );
            }
            TimerKind::CallEnd { .. } => {}
        }
    }

    fn handle_air(&mut self, now: Micros, event: AirEvent, out: &mut Outbox) {
        match event {
            AirEvent::PagingAck { ms } => match self.links.get_mut(&ms) {
                Some(link) => link.paging_ack_seen = true,
                None => {
                    out.trace(
                        TraceRecord::new(
                            now,
                            self.actor(),
                            TraceVerb::ProtocolViolation,
                            Some(Actor::ms(ms)),
                        )
                        .attr("what", "paging_ack_without_link"),
                    );
                }
            },
            AirEvent::LinkEstablish { ms } => self.handle_link_establish(now, ms, out),
            AirEvent::Release { ms } => self.handle_release(now, ms, out),
            _ => {}
        }
    }

    fn handle_link_establish(&mut self, now: Micros, ms: MsId, out: &mut Outbox) {
        let me = self.actor();
        let violation = move |what: &str| {
            TraceRecord::new(now, me, TraceVerb::ProtocolViolation, Some(Actor::ms(ms)))
                .attr("what", what)
        };
        let Some(link) = self.links.get_mut(&ms) else {
            out.trace(violation("link_establish_without_appointment"));
            return;
        };
        if link.established {
            out.trace(violation("duplicate_link_establish"));
            return;
        }
        if link.service == ServiceKind::MtCall && !link.paging_ack_seen {
            // Terminating calls must acknowledge the page before the link.
            out.trace(violation("link_establish_before_paging_ack"));
            return;
        }
        link.established = true;
        let slot = link.slot;
        out.trace(
            TraceRecord::new(now, self.actor(), TraceVerb::LinkEstablish, Some(Actor::ms(ms)))
                .attr("chan", "facch")
                .attr("slot", slot),
        );
        out.trace(
            TraceRecord::new(now, self.actor(), TraceVerb::Traffic, Some(Actor::ms(ms)))
                .attr("chan", "tch")
                .attr("slot", slot),
        );
        out.air(AirAddr::Ms(ms), AirEvent::LinkConfirm { ms });
        let load = self.load_byte();
        out.control(
            self.config.sbs_id,
            0,
            ControlMessage::StatusReport { power: WirePower::Active, load },
        );
    }

    fn handle_release(&mut self, now: Micros, ms: MsId, out: &mut Outbox) {
        if self.links.remove(&ms).is_none() {
            out.trace(TraceRecord::new(
                now,
                self.actor(),
                TraceVerb::ReleaseUnknownMs,
                Some(Actor::ms(ms)),
            ));
            return;
        }
        out.control(self.config.sbs_id, 0, ControlMessage::LinkRelease { ms_id: ms.0 });
        if self.links.is_empty() {
            self.arm_idle_check(now, out);
        }
    }
}
