//! Mobile station: scans for the signaling carrier, camps, and runs call
//! attempts against it. Traffic always lands on whatever data carrier the
//! assignment names.

use crate::ids::{Actor, Micros, MsId, StationId};
use crate::trace::{TraceRecord, TraceVerb};
use crate::wire::ServiceKind;

use super::{AirAddr, AirEvent, Command, Input, Outbox, TimerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsPhase {
    Off,
    Scanning,
    Camped,
    Requesting,
    Assigned,
    InCall,
}

impl MsPhase {
    pub fn name(self) -> &'static str {
        match self {
            MsPhase::Off => "off",
            MsPhase::Scanning => "scanning",
            MsPhase::Camped => "camped",
            MsPhase::Requesting => "requesting",
            MsPhase::Assigned => "assigned",
            MsPhase::InCall => "in_call",
        }
    }
}

impl std::fmt::Display for MsPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct MsConfig {
    pub ms_id: MsId,
}

#[derive(Debug, Clone, Copy)]
struct CurrentCall {
    service: ServiceKind,
    dbs: StationId,
    dbs_arfcn: u16,
    duration_us: Micros,
}

/// The mobile station state machine.
#[derive(Debug)]
pub struct Ms {
    config: MsConfig,
    phase: MsPhase,
    /// Every phase transition with its timestamp, oldest first.
    phase_log: Vec<(Micros, MsPhase)>,
    sbs: Option<(StationId, u16)>,
    /// Duration for the originating call being requested.
    pending_mo_duration: Option<Micros>,
    /// Duration handed down for a terminating call, consumed at assignment.
    armed_mt_duration: Option<Micros>,
    call: Option<CurrentCall>,
    /// Invalidates call-end timers from earlier calls.
    call_generation: u64,
}

impl Ms {
    pub fn new(config: MsConfig) -> Ms {
        Ms {
            config,
            phase: MsPhase::Off,
            phase_log: vec![(0, MsPhase::Off)],
            sbs: None,
            pending_mo_duration: None,
            armed_mt_duration: None,
            call: None,
            call_generation: 0,
        }
    }

    pub fn ms_id(&self) -> MsId {
        self.config.ms_id
    }

    pub fn phase(&self) -> MsPhase {
        self.phase
    }

    pub fn phase_log(&self) -> &[(Micros, MsPhase)] {
        &self.phase_log
    }

    fn actor(&self) -> Actor {
        Actor::ms(self.config.ms_id)
    }

    fn set_phase(&mut self, now: Micros, phase: MsPhase) {
        if self.phase != phase {
            self.phase = phase;
            self.phase_log.push((now, phase));
        }
    }

    pub fn handle(&mut self, now: Micros, input: Input, out: &mut Outbox) {
        match input {
            Input::Command(cmd) => self.handle_command(now, cmd, out),
            Input::Air(event) => self.handle_air(now, event, out),
            Input::Timer(kind) => self.handle_timer(now, kind, out),
            Input::Control { .. } => {}
        }
    }

    fn handle_command(&mut self, now: Micros, cmd: Command, out: &mut Outbox) {
        match cmd {
            Command::PowerOn => {
                if self.phase == MsPhase::Off {
                    self.set_phase(now, MsPhase::Scanning);
                    out.air(AirAddr::Medium, AirEvent::ScanProbe { ms: self.config.ms_id });
                }
            }
            Command::Originate { duration_us } => {
                if self.phase != MsPhase::Camped {
                    out.trace(
                        TraceRecord::new(now, self.actor(), TraceVerb::OriginateIgnored, None)
                            .attr("phase", self.phase),
                    );
                    return;
                }
                self.pending_mo_duration = Some(duration_us);
                self.send_channel_request(now, ServiceKind::MoCall, out);
            }
            Command::ArmCallDuration { duration_us } => {
                self.armed_mt_duration = Some(duration_us);
            }
            _ => {}
        }
    }

    fn send_channel_request(&mut self, now: Micros, service: ServiceKind, out: &mut Outbox) {
        let (sbs_id, sbs_arfcn) = self.sbs.expect("camped implies a known signaling carrier");
        self.set_phase(now, MsPhase::Requesting);
        out.trace(
            TraceRecord::new(
                now,
                self.actor(),
                TraceVerb::ChannelRequest,
                Some(Actor::sbs(sbs_id)),
            )
            .attr("chan", "rach")
            .attr("service", service.name()),
        );
        out.air(
            AirAddr::Carrier(sbs_arfcn),
            AirEvent::ChannelRequest { ms: self.config.ms_id, service },
        );
    }

    fn handle_air(&mut self, now: Micros, event: AirEvent, out: &mut Outbox) {
        match event {
            AirEvent::ScanResult { stations } => {
                if self.phase != MsPhase::Scanning {
                    return;
                }
                // The signaling carrier is the only one broadcasting; an
                // empty result means keep scanning.
                if let Some(&(sbs_id, arfcn)) = stations.first() {
                    self.sbs = Some((sbs_id, arfcn));
                    out.air(
                        AirAddr::Carrier(arfcn),
                        AirEvent::RegistrationRequest { ms: self.config.ms_id },
                    );
                }
            }
            AirEvent::RegistrationResult { ms, accept } => {
                if ms != self.config.ms_id || self.phase != MsPhase::Scanning {
                    return;
                }
                if accept {
                    self.set_phase(now, MsPhase::Camped);
                }
            }
            AirEvent::Page { ms } => {
                if ms != self.config.ms_id || self.phase != MsPhase::Camped {
                    return;
                }
                self.send_channel_request(now, ServiceKind::MtCall, out);
            }
            AirEvent::Assignment { ms, dbs, arfcn, slot, service } => {
                if ms != self.config.ms_id {
                    return;
                }
                self.handle_assignment(now, dbs, arfcn, slot, service, out);
            }
            AirEvent::AssignmentReject { ms } => {
                if ms != self.config.ms_id || self.phase != MsPhase::Requesting {
                    return;
                }
                self.pending_mo_duration = None;
                self.set_phase(now, MsPhase::Camped);
            }
            AirEvent::LinkConfirm { ms } => {
                if ms != self.config.ms_id || self.phase != MsPhase::Assigned {
                    return;
                }
                self.set_phase(now, MsPhase::InCall);
                let call = self.call.expect("assigned implies a current call");
                self.call_generation += 1;
                out.timer(
                    now + call.duration_us,
                    TimerKind::CallEnd { generation: self.call_generation },
                );
            }
            _ => {}
        }
    }

    fn handle_assignment(
        &mut self,
        now: Micros,
        dbs: StationId,
        arfcn: u16,
        slot: u8,
        service: ServiceKind,
        out: &mut Outbox,
    ) {
        if self.phase != MsPhase::Requesting {
            out.trace(
                TraceRecord::new(now, self.actor(), TraceVerb::OrphanAssignment, None)
                    .attr("phase", self.phase),
            );
            return;
        }
        let duration_us = match service {
            ServiceKind::MoCall => self.pending_mo_duration.take(),
            ServiceKind::MtCall => self.armed_mt_duration.take(),
        }
        .unwrap_or(1_000_000);
        self.call = Some(CurrentCall { service, dbs, dbs_arfcn: arfcn, duration_us });
        self.set_phase(now, MsPhase::Assigned);
        let _ = slot;
        if service == ServiceKind::MtCall {
            // Terminating calls answer the page on the data carrier before
            // pulling up the link.
            out.trace(
                TraceRecord::new(now, self.actor(), TraceVerb::PagingAck, Some(Actor::dbs(dbs)))
                    .attr("chan", "sdcch"),
            );
            out.air(AirAddr::Carrier(arfcn), AirEvent::PagingAck { ms: self.config.ms_id });
        }
        out.air(AirAddr::Carrier(arfcn), AirEvent::LinkEstablish { ms: self.config.ms_id });
    }

    fn handle_timer(&mut self, now: Micros, kind: TimerKind, out: &mut Outbox) {
        let TimerKind::CallEnd { generation } = kind else { return };
        if generation != self.call_generation {
            return;
        }
        if self.phase != MsPhase::InCall {
            out.trace(
                TraceRecord::new(now, self.actor(), TraceVerb::ReleaseIgnored, None)
                    .attr("phase", self.phase),
            );
            return;
        }
        let call = self.call.take().expect("in a call");
        self.call_generation += 1;
        out.trace(
            TraceRecord::new(now, self.actor(), TraceVerb::Release, Some(Actor::dbs(call.dbs)))
                .attr("chan", "facch")
                .attr("service", call.service.name()),
        );
        out.air(AirAddr::Carrier(call.dbs_arfcn), AirEvent::Release { ms: self.config.ms_id });
        self.set_phase(now, MsPhase::Camped);
    }
}
