//! Trace records: the observable output of every run.
//!
//! One record per line, fields in normative order so that identical runs
//! produce byte-identical files:
//!
//! ```text
//! t=<microseconds> actor=<role:id> verb=<VERB> subject=<role:id|-> key=value ...
//! ```
//!
//! Attributes are rendered sorted by key. Values never contain whitespace.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{Actor, Micros};

/// Every verb a trace record can carry. The first block is the protocol
/// vocabulary; the second block records guarded no-ops and violations.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum TraceVerb {
    Register,
    Page,
    ChannelRequest,
    Appointment,
    AppointmentResponse,
    Wakeup,
    WakeupAck,
    Assignment,
    PagingAck,
    LinkEstablish,
    Traffic,
    Release,
    Reject,
    // Guard verbs: something arrived that the state machine refused.
    UnregisteredRequest,
    OrphanResponse,
    PageUnknownMs,
    OrphanAssignment,
    ProtocolViolation,
    ReleaseUnknownMs,
    OriginateIgnored,
    ReleaseIgnored,
    DeadLetter,
}

impl TraceVerb {
    pub const fn name(self) -> &'static str {
        match self {
            TraceVerb::Register => "REGISTER",
            TraceVerb::Page => "PAGE",
            TraceVerb::ChannelRequest => "CHANNEL_REQUEST",
            TraceVerb::Appointment => "APPOINTMENT",
            TraceVerb::AppointmentResponse => "APPOINTMENT_RESPONSE",
            TraceVerb::Wakeup => "WAKEUP",
            TraceVerb::WakeupAck => "WAKEUP_ACK",
            TraceVerb::Assignment => "ASSIGNMENT",
            TraceVerb::PagingAck => "PAGING_ACK",
            TraceVerb::LinkEstablish => "LINK_ESTABLISH",
            TraceVerb::Traffic => "TRAFFIC",
            TraceVerb::Release => "RELEASE",
            TraceVerb::Reject => "REJECT",
            TraceVerb::UnregisteredRequest => "UNREGISTERED_REQUEST",
            TraceVerb::OrphanResponse => "ORPHAN_RESPONSE",
            TraceVerb::PageUnknownMs => "PAGE_UNKNOWN_MS",
            TraceVerb::OrphanAssignment => "ORPHAN_ASSIGNMENT",
            TraceVerb::ProtocolViolation => "PROTOCOL_VIOLATION",
            TraceVerb::ReleaseUnknownMs => "RELEASE_UNKNOWN_MS",
            TraceVerb::OriginateIgnored => "ORIGINATE_IGNORED",
            TraceVerb::ReleaseIgnored => "RELEASE_IGNORED",
            TraceVerb::DeadLetter => "DEAD_LETTER",
        }
    }

    pub const ALL: [TraceVerb; 22] = [
        TraceVerb::Register,
        TraceVerb::Page,
        TraceVerb::ChannelRequest,
        TraceVerb::Appointment,
        TraceVerb::AppointmentResponse,
        TraceVerb::Wakeup,
        TraceVerb::WakeupAck,
        TraceVerb::Assignment,
        TraceVerb::PagingAck,
        TraceVerb::LinkEstablish,
        TraceVerb::Traffic,
        TraceVerb::Release,
        TraceVerb::Reject,
        TraceVerb::UnregisteredRequest,
        TraceVerb::OrphanResponse,
        TraceVerb::PageUnknownMs,
        TraceVerb::OrphanAssignment,
        TraceVerb::ProtocolViolation,
        TraceVerb::ReleaseUnknownMs,
        TraceVerb::OriginateIgnored,
        TraceVerb::ReleaseIgnored,
        TraceVerb::DeadLetter,
    ];
}

impl fmt::Display for TraceVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TraceVerb {
    type Err = String;

    fn from_str(s: &str) -> Result<TraceVerb, String> {
        TraceVerb::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown verb {s:?}"))
    }
}

/// One timestamped event in a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: Micros,
    pub actor: Actor,
    pub verb: TraceVerb,
    /// The peer the action concerns; absent for engine-level records.
    pub subject: Option<Actor>,
    pub attrs: BTreeMap<String, String>,
}

impl TraceRecord {
    pub fn new(t: Micros, actor: Actor, verb: TraceVerb, subject: Option<Actor>) -> TraceRecord {
        TraceRecord { t, actor, verb, subject, attrs: BTreeMap::new() }
    }

    pub fn attr(mut self, key: &str, value: impl fmt::Display) -> TraceRecord {
        self.attrs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).map(|s| s.as_str())
    }

    /// Renders the record as one normative trace line (no newline).
    pub fn render(&self) -> String {
        let mut line = format!("t={} actor={} verb={}", self.t, self.actor, self.verb);
        match self.subject {
            Some(s) => {
                line.push_str(" subject=");
                line.push_str(&s.to_string());
            }
            None => line.push_str(" subject=-"),
        }
        for (k, v) in &self.attrs {
            line.push(' ');
            line.push_str(k);
            line.push('=');
            line.push_str(v);
        }
        line
    }

    /// Parses one trace line.
    pub fn parse(line: &str) -> Result<TraceRecord, String> {
        let mut fields = line.split_whitespace();
        let t = expect_field(fields.next(), "t")?.parse::<u64>().map_err(|e| format!("bad t: {e}"))?;
        let actor: Actor = expect_field(fields.next(), "actor")?.parse()?;
        let verb: TraceVerb = expect_field(fields.next(), "verb")?.parse()?;
        let subject_str = expect_field(fields.next(), "subject")?;
        let subject = if subject_str == "-" { None } else { Some(subject_str.parse()?) };
        let mut attrs = BTreeMap::new();
        for field in fields {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| format!("attribute {field:?} is not key=value"))?;
            attrs.insert(k.to_string(), v.to_string());
        }
        Ok(TraceRecord { t, actor, verb, subject, attrs })
    }
}

fn expect_field<'a>(field: Option<&'a str>, key: &str) -> Result<&'a str, String> {
    let field = field.ok_or_else(|| format!("missing field {key}"))?;
    let (k, v) = field.split_once('=').ok_or_else(|| format!("field {field:?} is not key=value"))?;
    if k != key {
        return Err(format!("expected field {key}, found {k}"));
    }
    Ok(v)
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Error from parsing a trace file, with the 1-based offending line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {msg}")]
pub struct TraceParseError {
    pub line: usize,
    pub msg: String,
}

/// Renders records to the line-oriented trace file format.
pub fn render_trace(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push_str(&rec.render());
        out.push('\n');
    }
    out
}

/// Parses a whole trace file. Blank lines and `#` comment lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceParseError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec = TraceRecord::parse(trimmed)
            .map_err(|msg| TraceParseError { line: idx + 1, msg })?;
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{MsId, StationId};

    fn sample() -> TraceRecord {
        TraceRecord::new(
            1500,
            Actor::sbs(StationId(0)),
            TraceVerb::Appointment,
            Some(Actor::dbs(StationId(1))),
        )
        .attr("ms", 100)
        .attr("txn", 1)
        .attr("service", "mo")
    }

    #[test]
    fn render_is_normative_order() {
        assert_eq!(
            sample().render(),
            "t=1500 actor=sbs:0 verb=APPOINTMENT subject=dbs:1 ms=100 service=mo txn=1"
        );
    }

    #[test]
    fn line_round_trip() {
        let rec = sample();
        assert_eq!(TraceRecord::parse(&rec.render()).unwrap(), rec);

        let no_subject = TraceRecord::new(
            0,
            Actor::ms(MsId(7)),
            TraceVerb::DeadLetter,
            None,
        )
        .attr("addr", "carrier:9");
        assert_eq!(TraceRecord::parse(&no_subject.render()).unwrap(), no_subject);
    }

    #[test]
    fn file_round_trip_and_line_numbers() {
        let text = render_trace(&[sample(), sample()]);
        let records = parse_trace(&text).unwrap();
        assert_eq!(records.len(), 2);

        let bad = format!("{}garbage line\n", text);
        let err = parse_trace(&bad).unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn parse_rejects_wrong_field_order() {
        let err = TraceRecord::parse("actor=sbs:0 t=5 verb=PAGE subject=-").unwrap_err();
        assert!(err.contains("expected field t"), "{err}");
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let text = "# header\n\nt=0 actor=sbs:0 verb=PAGE subject=ms:1\n";
        assert_eq!(parse_trace(text).unwrap().len(), 1);
    }

    #[test]
    fn verb_names_round_trip() {
        for verb in TraceVerb::ALL {
            assert_eq!(verb.name().parse::<TraceVerb>().unwrap(), verb);
        }
    }
}
