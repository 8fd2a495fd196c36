//! The three entity state machines (SBS, DBS, MS) and the event vocabulary
//! they exchange.
//!
//! Each machine is single-threaded: it consumes one serialized inbox of
//! timestamped [`Input`]s and pushes every effect into an [`Outbox`]. The
//! harness (in-process engine or UDP worker) owns delivery, so the same
//! machine code runs unchanged under both transports.

use serde::{Deserialize, Serialize};

use crate::ids::{Micros, MsId, StationId};
use crate::trace::TraceRecord;
use crate::wire::{ControlMessage, MessageHeader, ServiceKind};

pub mod dbs;
pub mod ms;
pub mod sbs;

pub use dbs::{Dbs, DbsConfig};
pub use ms::{Ms, MsConfig, MsPhase};
pub use sbs::{
    select_dbs, AdmissionPolicy, AppointmentDecision, DbsDescriptor, RejectReason, Sbs, SbsConfig,
};

/// DBS power state. `Waking` is the transitional state between a wake-up
/// command and the ready acknowledgment.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum PowerState {
    Sleep,
    Waking,
    Active,
}

impl PowerState {
    pub const fn name(self) -> &'static str {
        match self {
            PowerState::Sleep => "sleep",
            PowerState::Waking => "waking",
            PowerState::Active => "active",
        }
    }
}

impl std::fmt::Display for PowerState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Events crossing the air interface between mobiles and stations.
///
/// These model Um signaling at call-flow granularity; radio details stay
/// abstract. Delivery is lossless with a configurable constant delay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AirEvent {
    /// MS probes for carriers broadcasting a BCH. Answered by the medium.
    ScanProbe { ms: MsId },
    /// Carriers currently broadcasting, sorted by station id.
    ScanResult { stations: Vec<(StationId, u16)> },
    /// MS asks the SBS to camp (SDCCH).
    RegistrationRequest { ms: MsId },
    RegistrationResult { ms: MsId, accept: bool },
    /// SBS pages one mobile (PCH); delivered to every listening MS.
    Page { ms: MsId },
    /// MS requests a traffic channel (RACH).
    ChannelRequest { ms: MsId, service: ServiceKind },
    /// SBS grants access (AGCH): which DBS carrier and slot to use.
    Assignment { ms: MsId, dbs: StationId, arfcn: u16, slot: u8, service: ServiceKind },
    /// SBS denies the channel request (AGCH).
    AssignmentReject { ms: MsId },
    /// MS acknowledges paging toward the assigned DBS (SDCCH).
    PagingAck { ms: MsId },
    /// MS arrives on the assigned traffic slot.
    LinkEstablish { ms: MsId },
    /// DBS confirms the traffic link is up.
    LinkConfirm { ms: MsId },
    /// MS ends the call (FACCH).
    Release { ms: MsId },
}

/// Where an air event is headed. Mobiles address stations by carrier ARFCN;
/// stations address mobiles by id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AirAddr {
    Carrier(u16),
    Ms(MsId),
    /// Paging fan-out to every mobile.
    AllMs,
    /// Scan query answered by the medium itself.
    Medium,
}

/// Scenario-driven stimuli delivered to entities at scheduled times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Command {
    /// MS: power on and start scanning.
    PowerOn,
    /// MS: place a mobile-originated call held for `duration_us` once up.
    Originate { duration_us: Micros },
    /// MS: remember how long to hold the next incoming call.
    ArmCallDuration { duration_us: Micros },
    /// SBS: page a mobile for an incoming call.
    Page { ms: MsId },
    /// DBS: refuse the next channel appointment (fault injection).
    DenyNextAppointment,
}

/// Entity-local timers, scheduled through the outbox and delivered back by
/// the harness. Generation counters invalidate superseded timers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimerKind {
    /// DBS: wake latency elapsed.
    WakeComplete,
    /// DBS: check whether the station has been idle long enough to sleep.
    IdleCheck { generation: u64 },
    /// MS: hang up the current call.
    CallEnd { generation: u64 },
}

/// One inbox item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Input {
    Air(AirEvent),
    Control { header: MessageHeader, msg: ControlMessage },
    Timer(TimerKind),
    Command(Command),
}

/// A coordination message queued for sending; the transport assigns the
/// per-channel sequence number and builds the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlSend {
    pub to: StationId,
    pub transaction_id: u32,
    pub msg: ControlMessage,
}

/// Effects produced while handling one input.
#[derive(Debug, Default)]
pub struct Outbox {
    pub air: Vec<(AirAddr, AirEvent)>,
    pub control: Vec<ControlSend>,
    /// Absolute virtual deadlines.
    pub timers: Vec<(Micros, TimerKind)>,
    pub trace: Vec<TraceRecord>,
    /// Power transitions, applied by the harness to the energy ledger.
    pub power_transitions: Vec<PowerState>,
}

impl Outbox {
    pub fn new() -> Outbox {
        Outbox::default()
    }

    pub fn air(&mut self, to: AirAddr, event: AirEvent) {
        self.air.push((to, event));
    }

    pub fn control(&mut self, to: StationId, transaction_id: u32, msg: ControlMessage) {
        self.control.push(ControlSend { to, transaction_id, msg });
    }

    pub fn timer(&mut self, at: Micros, kind: TimerKind) {
        self.timers.push((at, kind));
    }

    pub fn trace(&mut self, record: TraceRecord) {
        self.trace.push(record);
    }

    pub fn power(&mut self, state: PowerState) {
        self.power_transitions.push(state);
    }
}
