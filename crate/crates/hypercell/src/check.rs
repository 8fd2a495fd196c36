//! Call-flow conformance checking over traces.
//!
//! A trace is split into per-mobile episodes. An episode is everything a
//! mobile does from its first call-flow record until a terminal verb:
//! TRAFFIC closes a connected call, REJECT a refused one. Connected
//! episodes must match the originated or terminating template exactly,
//! with one optional WAKEUP/WAKEUP_ACK pair before the first appointment.

use std::collections::BTreeMap;

use crate::ids::MsId;
use crate::trace::{parse_trace, TraceParseError, TraceRecord, TraceVerb};

/// Call setup shapes the checker accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeKind {
    /// Mobile-originated, connected:
    /// CHANNEL_REQUEST [wake] APPOINTMENT APPOINTMENT_RESPONSE ASSIGNMENT
    /// LINK_ESTABLISH TRAFFIC
    MoConnected,
    /// Mobile-terminated, connected: PAGE first, PAGING_ACK before the
    /// link comes up.
    MtConnected,
    /// Refused: request, any number of wake or appointment rounds that
    /// went nowhere, then REJECT. Never an ASSIGNMENT or a link.
    Rejected,
}

/// Verbs that take part in call-flow checking; everything else in a trace
/// (registration, release, guard verbs) is ignored.
pub const ALPHABET: [TraceVerb; 11] = [
    TraceVerb::Page,
    TraceVerb::ChannelRequest,
    TraceVerb::Wakeup,
    TraceVerb::WakeupAck,
    TraceVerb::Appointment,
    TraceVerb::AppointmentResponse,
    TraceVerb::Assignment,
    TraceVerb::PagingAck,
    TraceVerb::LinkEstablish,
    TraceVerb::Traffic,
    TraceVerb::Reject,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckOutcome {
    Pass { calls: usize },
    Fail { ms: MsId, call_index: usize, reason: String },
}

impl CheckOutcome {
    pub fn is_pass(&self) -> bool {
        matches!(self, CheckOutcome::Pass { .. })
    }
}

fn fmt_found(verbs: &[TraceVerb], i: usize) -> String {
    match verbs.get(i) {
        Some(v) => format!("found {v}"),
        None => "episode ended".to_string(),
    }
}

fn need(verbs: &[TraceVerb], i: &mut usize, expected: TraceVerb) -> Result<(), String> {
    if verbs.get(*i) == Some(&expected) {
        *i += 1;
        Ok(())
    } else {
        Err(format!("step {}: expected {expected}, {}", *i + 1, fmt_found(verbs, *i)))
    }
}

/// Match one episode's verb sequence against the templates. The error
/// string names the first step where the sequence diverges.
pub fn episode_matches(verbs: &[TraceVerb]) -> Result<EpisodeKind, String> {
    use TraceVerb::*;
    let Some(&last) = verbs.last() else {
        return Err("empty episode".to_string());
    };
    match last {
        Traffic => match_connected(verbs),
        Reject => match_rejected(verbs),
        other => Err(format!("episode ends with {other}, expected TRAFFIC or REJECT")),
    }
}

fn match_connected(verbs: &[TraceVerb]) -> Result<EpisodeKind, String> {
    use TraceVerb::*;
    let mt = verbs.first() == Some(&Page);
    let mut i = 0;
    if mt {
        need(verbs, &mut i, Page)?;
    }
    need(verbs, &mut i, ChannelRequest)?;
    if verbs.get(i) == Some(&Wakeup) {
        need(verbs, &mut i, Wakeup)?;
        need(verbs, &mut i, WakeupAck)?;
    }
    need(verbs, &mut i, Appointment)?;
    need(verbs, &mut i, AppointmentResponse)?;
    need(verbs, &mut i, Assignment)?;
    if mt {
        need(verbs, &mut i, PagingAck)?;
    }
    need(verbs, &mut i, LinkEstablish)?;
    need(verbs, &mut i, Traffic)?;
    if i != verbs.len() {
        return Err(format!("step {}: unexpected {} after TRAFFIC", i + 1, verbs[i]));
    }
    Ok(if mt { EpisodeKind::MtConnected } else { EpisodeKind::MoConnected })
}

fn match_rejected(verbs: &[TraceVerb]) -> Result<EpisodeKind, String> {
    use TraceVerb::*;
    let mut i = 0;
    if verbs.first() == Some(&Page) {
        i += 1;
    }
    need(verbs, &mut i, ChannelRequest)?;
    loop {
        match verbs.get(i) {
            Some(Reject) => {
                i += 1;
                break;
            }
            Some(Wakeup) => {
                i += 1;
                need(verbs, &mut i, WakeupAck)?;
            }
            Some(Appointment) => {
                i += 1;
                need(verbs, &mut i, AppointmentResponse)?;
            }
            Some(other) => {
                return Err(format!(
                    "step {}: expected APPOINTMENT, WAKEUP or REJECT, found {other}",
                    i + 1
                ))
            }
            None => return Err("episode ends without REJECT".to_string()),
        }
    }
    if i != verbs.len() {
        return Err(format!("step {}: unexpected {} after REJECT", i + 1, verbs[i]));
    }
    Ok(EpisodeKind::Rejected)
}

/// Resolve which mobile a record belongs to: mobiles appear as actor or
/// subject; wire-side records are tied back through their transaction id.
fn resolve_ms(rec: &TraceRecord, txn_to_ms: &BTreeMap<String, MsId>) -> Option<MsId> {
    if let Some(ms) = rec.actor.ms_id() {
        return Some(ms);
    }
    if let Some(ms) = rec.subject.and_then(|s| s.ms_id()) {
        return Some(ms);
    }
    rec.get("txn").and_then(|txn| txn_to_ms.get(txn)).copied()
}

/// Check a full trace. Every completed episode must match a template; a
/// trailing unterminated episode fails as truncated.
type Episodes<'a> = BTreeMap<MsId, Vec<(Vec<TraceVerb>, Vec<&'a TraceRecord>)>>;

/// Splits the trace into per-mobile call episodes, each running up to its
/// TRAFFIC or REJECT terminal. An unattributable record or an episode left
/// open at the end of the trace is already a failure.
fn partition_episodes(records: &[TraceRecord]) -> Result<Episodes<'_>, CheckOutcome> {
    // First pass: transaction ids to mobiles, announced by APPOINTMENT and
    // WAKEUP records which carry both.
    let mut txn_to_ms: BTreeMap<String, MsId> = BTreeMap::new();
    for rec in records {
        if let (Some(txn), Some(ms)) = (rec.get("txn"), rec.get("ms")) {
            if let Ok(id) = ms.parse::<u32>() {
                txn_to_ms.insert(txn.to_string(), MsId(id));
            }
        }
    }

    // Second pass: per-mobile episode streams in trace order.
    let mut episodes: Episodes = BTreeMap::new();
    let mut open: BTreeMap<MsId, (Vec<TraceVerb>, Vec<&TraceRecord>)> = BTreeMap::new();
    for rec in records {
        if !ALPHABET.contains(&rec.verb) {
            continue;
        }
        let Some(ms) = resolve_ms(rec, &txn_to_ms) else {
            return Err(CheckOutcome::Fail {
                ms: MsId(0),
                call_index: 0,
                reason: format!("cannot attribute record to a call: {rec}"),
            });
        };
        let entry = open.entry(ms).or_default();
        entry.0.push(rec.verb);
        entry.1.push(rec);
        if matches!(rec.verb, TraceVerb::Traffic | TraceVerb::Reject) {
            let episode = open.remove(&ms).expect("just inserted");
            episodes.entry(ms).or_default().push(episode);
        }
    }

    if let Some((ms, (verbs, _))) = open.iter().next() {
        let calls = episodes.get(ms).map_or(0, Vec::len);
        return Err(CheckOutcome::Fail {
            ms: *ms,
            call_index: calls,
            reason: match episode_matches(verbs) {
                Err(reason) => reason,
                Ok(_) => unreachable!("open episode has no terminal verb"),
            },
        });
    }

    Ok(episodes)
}

pub fn check_trace(records: &[TraceRecord]) -> CheckOutcome {
    let episodes = match partition_episodes(records) {
        Ok(eps) => eps,
        Err(fail) => return fail,
    };

    let mut calls = 0;
    for (ms, eps) in &episodes {
        for (index, (verbs, records)) in eps.iter().enumerate() {
            let kind = match episode_matches(verbs) {
                Ok(kind) => kind,
                Err(reason) => {
                    return CheckOutcome::Fail { ms: *ms, call_index: index, reason }
                }
            };
            // The request's service tag must agree with the shape: a
            // terminating call is the paged one.
            let service = records
                .iter()
                .find(|r| r.verb == TraceVerb::ChannelRequest)
                .and_then(|r| r.get("service"));
            let mismatch = match (kind, service) {
                (EpisodeKind::MoConnected, Some("mt")) => true,
                (EpisodeKind::MtConnected, Some("mo")) => true,
                _ => false,
            };
            if mismatch {
                return CheckOutcome::Fail {
                    ms: *ms,
                    call_index: index,
                    reason: format!(
                        "service {} does not match episode shape {kind:?}",
                        service.unwrap_or("?"),
                    ),
                };
            }
            calls += 1;
        }
    }
    CheckOutcome::Pass { calls }
}

/// Parse a rendered trace and check it.
pub fn check_text(text: &str) -> Result<CheckOutcome, TraceParseError> {
    Ok(check_trace(&parse_trace(text)?))
}

/// The two connected-call flow templates a trace can be held against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Mo,
    Mt,
}

impl Template {
    pub const fn name(self) -> &'static str {
        match self {
            Template::Mo => "mo",
            Template::Mt => "mt",
        }
    }

    const fn kind(self) -> EpisodeKind {
        match self {
            Template::Mo => EpisodeKind::MoConnected,
            Template::Mt => EpisodeKind::MtConnected,
        }
    }
}

impl std::str::FromStr for Template {
    type Err = String;

    fn from_str(s: &str) -> Result<Template, String> {
        match s {
            "mo" => Ok(Template::Mo),
            "mt" => Ok(Template::Mt),
            other => Err(format!("unknown template {other:?}, expected mo or mt")),
        }
    }
}

/// Strict template check: every episode in the trace must be a connected
/// call of the given flavor (the wake-up insertion stays permitted).
pub fn check_template(records: &[TraceRecord], template: Template) -> CheckOutcome {
    let episodes = match partition_episodes(records) {
        Ok(eps) => eps,
        Err(fail) => return fail,
    };

    let mut calls = 0;
    for (ms, eps) in &episodes {
        for (index, (verbs, _)) in eps.iter().enumerate() {
            let kind = match episode_matches(verbs) {
                Ok(kind) => kind,
                Err(reason) => {
                    return CheckOutcome::Fail { ms: *ms, call_index: index, reason }
                }
            };
            if kind != template.kind() {
                return CheckOutcome::Fail {
                    ms: *ms,
                    call_index: index,
                    reason: format!(
                        "episode is {kind:?}, template {} requires {:?}",
                        template.name(),
                        template.kind(),
                    ),
                };
            }
            calls += 1;
        }
    }
    CheckOutcome::Pass { calls }
}

fn pair_sequences(records: &[TraceRecord]) -> BTreeMap<(String, String), Vec<TraceVerb>> {
    let mut map: BTreeMap<(String, String), Vec<TraceVerb>> = BTreeMap::new();
    for rec in records {
        let subject = rec.subject.map_or("-".to_string(), |s| s.to_string());
        map.entry((rec.actor.to_string(), subject)).or_default().push(rec.verb);
    }
    map
}

fn txn_sequences(records: &[TraceRecord]) -> BTreeMap<String, Vec<(String, TraceVerb)>> {
    let mut map: BTreeMap<String, Vec<(String, TraceVerb)>> = BTreeMap::new();
    for rec in records {
        if let Some(txn) = rec.get("txn") {
            map.entry(txn.to_string()).or_default().push((rec.actor.to_string(), rec.verb));
        }
    }
    map
}

/// Two traces are transport-equivalent when, after erasing timestamps,
/// every (actor, subject) pair saw the same verb sequence and every
/// transaction ran through the same (actor, verb) steps. Concurrent
/// chains may interleave differently in the merged order; causal order
/// within a pair or a transaction may not.
pub fn transport_equivalent(a: &[TraceRecord], b: &[TraceRecord]) -> Result<(), String> {
    let (pa, pb) = (pair_sequences(a), pair_sequences(b));
    if pa != pb {
        for (key, seq) in &pa {
            match pb.get(key) {
                Some(other) if other == seq => {}
                Some(other) => {
                    return Err(format!(
                        "pair {}->{} diverges: {seq:?} vs {other:?}",
                        key.0, key.1
                    ))
                }
                None => return Err(format!("pair {}->{} missing from second trace", key.0, key.1)),
            }
        }
        let extra = pb.keys().find(|k| !pa.contains_key(*k)).expect("maps differ");
        return Err(format!("pair {}->{} missing from first trace", extra.0, extra.1));
    }
    let (ta, tb) = (txn_sequences(a), txn_sequences(b));
    if ta != tb {
        for (txn, seq) in &ta {
            match tb.get(txn) {
                Some(other) if other == seq => {}
                Some(other) => {
                    return Err(format!("transaction {txn} diverges: {seq:?} vs {other:?}"))
                }
                None => return Err(format!("transaction {txn} missing from second trace")),
            }
        }
        let extra = tb.keys().find(|k| !ta.contains_key(*k)).expect("maps differ");
        return Err(format!("transaction {extra} missing from first trace"));
    }
    Ok(())
}
