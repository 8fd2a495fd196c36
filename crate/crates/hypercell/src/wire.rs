//! Binary coordination protocol spoken between the signaling station and the
//! data stations, carried over UDP datagrams.
//!
//! Every datagram is big-endian with a fixed 16 byte header:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "HCN1"
//!      4     1  version (currently 1)
//!      5     1  message tag
//!      6     2  sender station id
//!      8     4  sequence number (per sender/receiver channel, starts at 1)
//!     12     4  transaction id
//! ```
//!
//! Payloads are fixed-layout per tag and a whole datagram never exceeds
//! [`MAX_DATAGRAM_LEN`] bytes. Decoding is strict: leftover bytes after the
//! payload are an error, as is anything short, unknown or mis-versioned.
//! UDP may duplicate or reorder; receivers push every header through
//! [`InOrderFilter`] and act only on `Deliver`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Datagram magic, first four bytes on the wire.
pub const MAGIC: [u8; 4] = *b"HCN1";
/// Protocol version carried in byte 4.
pub const VERSION: u8 = 1;
/// Fixed header length in bytes.
pub const HEADER_LEN: usize = 16;
/// Upper bound on an encoded datagram.
pub const MAX_DATAGRAM_LEN: usize = 64;

/// Message tags, byte 5 of the header.
pub const TAG_CHANNEL_APPOINTMENT: u8 = 0x01;
pub const TAG_APPOINTMENT_RESPONSE: u8 = 0x02;
pub const TAG_WAKEUP_COMMAND: u8 = 0x03;
pub const TAG_WAKEUP_ACK: u8 = 0x04;
pub const TAG_LINK_RELEASE: u8 = 0x05;
pub const TAG_STATUS_REPORT: u8 = 0x06;

/// Requested service kind inside a channel appointment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ServiceKind {
    /// Mobile-originated call.
    MoCall,
    /// Mobile-terminated call.
    MtCall,
}

impl ServiceKind {
    pub const fn wire_byte(self) -> u8 {
        match self {
            ServiceKind::MoCall => 0x01,
            ServiceKind::MtCall => 0x02,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ServiceKind::MoCall => "mo",
            ServiceKind::MtCall => "mt",
        }
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Power state as reported on the wire: one byte, 0 sleeping, 1 active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WirePower {
    Sleep,
    Active,
}

impl WirePower {
    const fn wire_byte(self) -> u8 {
        match self {
            WirePower::Sleep => 0,
            WirePower::Active => 1,
        }
    }
}

/// Traffic load quantized to 1/255 steps for the one-byte wire field.
///
/// Quantization keeps the field honest to within 0.2%; selection tie breaks
/// downstream happen on the quantized value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LoadByte(u8);

impl LoadByte {
    pub const ZERO: LoadByte = LoadByte(0);
    pub const FULL: LoadByte = LoadByte(255);

    /// Quantizes a load fraction. Rejects anything outside [0, 1].
    pub fn from_fraction(load: f64) -> Result<LoadByte, FieldError> {
        if !(0.0..=1.0).contains(&load) {
            return Err(FieldError::LoadOutOfRange(load));
        }
        Ok(LoadByte((load * 255.0).round() as u8))
    }

    pub const fn from_raw(byte: u8) -> LoadByte {
        LoadByte(byte)
    }

    pub const fn raw(self) -> u8 {
        self.0
    }

    pub fn fraction(self) -> f64 {
        self.0 as f64 / 255.0
    }
}

/// Construction-time payload field errors; encoding itself cannot fail.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FieldError {
    #[error("load {0} outside [0,1]")]
    LoadOutOfRange(f64),
}

/// Fixed header preceding every payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageHeader {
    pub sender_id: u16,
    pub seq: u32,
    pub transaction_id: u32,
}

/// The six coordination messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlMessage {
    /// SBS -> DBS: serve `ms_id` for `service`. `slot` is a proposed traffic
    /// slot and is currently always 0; the data station picks the final slot
    /// in its response.
    ChannelAppointment { ms_id: u32, service: ServiceKind, slot: u8 },
    /// DBS -> SBS: verdict on an appointment. `arfcn` and `slot` are only
    /// meaningful when `accept` is set.
    AppointmentResponse { accept: bool, arfcn: u16, slot: u8 },
    /// SBS -> DBS: leave sleep mode.
    WakeupCommand { dbs_id: u32 },
    /// DBS -> SBS: awake and serving.
    WakeupAck { dbs_id: u32 },
    /// DBS -> SBS: the traffic link for `ms_id` has been torn down.
    LinkRelease { ms_id: u32 },
    /// DBS -> SBS: current power state and quantized traffic load.
    StatusReport { power: WirePower, load: LoadByte },
}

impl ControlMessage {
    pub const fn tag(&self) -> u8 {
        match self {
            ControlMessage::ChannelAppointment { .. } => TAG_CHANNEL_APPOINTMENT,
            ControlMessage::AppointmentResponse { .. } => TAG_APPOINTMENT_RESPONSE,
            ControlMessage::WakeupCommand { .. } => TAG_WAKEUP_COMMAND,
            ControlMessage::WakeupAck { .. } => TAG_WAKEUP_ACK,
            ControlMessage::LinkRelease { .. } => TAG_LINK_RELEASE,
            ControlMessage::StatusReport { .. } => TAG_STATUS_REPORT,
        }
    }
}

/// Encodes a message behind its header. Infallible: field ranges are enforced
/// at construction time.
pub fn encode(header: &MessageHeader, msg: &ControlMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.tag());
    out.extend_from_slice(&header.sender_id.to_be_bytes());
    out.extend_from_slice(&header.seq.to_be_bytes());
    out.extend_from_slice(&header.transaction_id.to_be_bytes());
    match *msg {
        ControlMessage::ChannelAppointment { ms_id, service, slot } => {
            out.extend_from_slice(&ms_id.to_be_bytes());
            out.push(service.wire_byte());
            out.push(slot);
        }
        ControlMessage::AppointmentResponse { accept, arfcn, slot } => {
            out.push(accept as u8);
            out.extend_from_slice(&arfcn.to_be_bytes());
            out.push(slot);
        }
        ControlMessage::WakeupCommand { dbs_id } => {
            out.extend_from_slice(&dbs_id.to_be_bytes());
        }
        ControlMessage::WakeupAck { dbs_id } => {
            out.extend_from_slice(&dbs_id.to_be_bytes());
        }
        ControlMessage::LinkRelease { ms_id } => {
            out.extend_from_slice(&ms_id.to_be_bytes());
        }
        ControlMessage::StatusReport { power, load } => {
            out.push(power.wire_byte());
            out.push(load.raw());
        }
    }
    debug_assert!(out.len() <= MAX_DATAGRAM_LEN);
    out
}

/// Decode failures. Each carries the byte offset where decoding gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic at offset {offset}")]
    BadMagic { offset: usize },
    #[error("unsupported version {found} at offset {offset}")]
    BadVersion { offset: usize, found: u8 },
    #[error("unknown tag {tag:#04x} at offset {offset}")]
    UnknownTag { offset: usize, tag: u8 },
    #[error("truncated at offset {offset}, {needed} more byte(s) needed")]
    Truncated { offset: usize, needed: usize },
    #[error("{remaining} trailing byte(s) at offset {offset}")]
    TrailingBytes { offset: usize, remaining: usize },
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(DecodeError::Truncated {
                offset: self.pos,
                needed: n - (self.buf.len() - self.pos),
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Decodes one datagram. Strict about length: short input is `Truncated`,
/// extra input is `TrailingBytes`. Never panics on arbitrary bytes.
pub fn decode(bytes: &[u8]) -> Result<(MessageHeader, ControlMessage), DecodeError> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(DecodeError::BadMagic { offset: 0 });
    }
    let version_at = r.pos;
    let version = r.u8()?;
    if version != VERSION {
        return Err(DecodeError::BadVersion { offset: version_at, found: version });
    }
    let tag_at = r.pos;
    let tag = r.u8()?;
    let header = MessageHeader {
        sender_id: r.u16()?,
        seq: r.u32()?,
        transaction_id: r.u32()?,
    };
    let msg = match tag {
        TAG_CHANNEL_APPOINTMENT => {
            let ms_id = r.u32()?;
            let service_at = r.pos;
            let service = match r.u8()? {
                0x01 => ServiceKind::MoCall,
                0x02 => ServiceKind::MtCall,
                other => return Err(DecodeError::UnknownTag { offset: service_at, tag: other }),
            };
            let slot = r.u8()?;
            ControlMessage::ChannelAppointment { ms_id, service, slot }
        }
        TAG_APPOINTMENT_RESPONSE => {
            let accept = r.u8()? != 0;
            let arfcn = r.u16()?;
            let slot = r.u8()?;
            ControlMessage::AppointmentResponse { accept, arfcn, slot }
        }
        TAG_WAKEUP_COMMAND => ControlMessage::WakeupCommand { dbs_id: r.u32()? },
        TAG_WAKEUP_ACK => ControlMessage::WakeupAck { dbs_id: r.u32()? },
        TAG_LINK_RELEASE => ControlMessage::LinkRelease { ms_id: r.u32()? },
        TAG_STATUS_REPORT => {
            let power = if r.u8()? == 0 { WirePower::Sleep } else { WirePower::Active };
            let load = LoadByte::from_raw(r.u8()?);
            ControlMessage::StatusReport { power, load }
        }
        other => return Err(DecodeError::UnknownTag { offset: tag_at, tag: other }),
    };
    if r.pos != bytes.len() {
        return Err(DecodeError::TrailingBytes {
            offset: r.pos,
            remaining: bytes.len() - r.pos,
        });
    }
    Ok((header, msg))
}

// ============================================================================
// Sequence numbering
// ============================================================================

/// Verdict of the per-peer ordering filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    /// Fresh message, hand it to the state machine.
    Deliver,
    /// Same sequence number seen before.
    DropDuplicate,
    /// Older than the newest delivered message.
    DropStale,
}

/// Receive-side state for one sending peer.
///
/// Sequence numbers start at 1; `last_seq_seen` is 0 until the first
/// delivery. State changes only on `Deliver`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PeerChannelState {
    last_seq_seen: u32,
    duplicates: u64,
    stale: u64,
}

impl PeerChannelState {
    pub fn admit(&mut self, seq: u32) -> Admission {
        if seq > self.last_seq_seen {
            self.last_seq_seen = seq;
            Admission::Deliver
        } else if seq == self.last_seq_seen {
            self.duplicates += 1;
            Admission::DropDuplicate
        } else {
            self.stale += 1;
            Admission::DropStale
        }
    }

    pub fn last_seq_seen(&self) -> u32 {
        self.last_seq_seen
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    pub fn stale(&self) -> u64 {
        self.stale
    }
}

/// Inbox-side filter keyed by sender id.
#[derive(Debug, Default)]
pub struct InOrderFilter {
    peers: BTreeMap<u16, PeerChannelState>,
}

impl InOrderFilter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn admit(&mut self, header: &MessageHeader) -> Admission {
        self.peers.entry(header.sender_id).or_default().admit(header.seq)
    }

    pub fn peer(&self, sender_id: u16) -> Option<&PeerChannelState> {
        self.peers.get(&sender_id)
    }
}

/// Send-side sequence allocator, one counter per receiving peer. First
/// allocated value is 1.
#[derive(Debug, Default)]
pub struct SeqAllocator {
    next: BTreeMap<u16, u32>,
}

impl SeqAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_seq(&mut self, receiver_id: u16) -> u32 {
        let counter = self.next.entry(receiver_id).or_insert(1);
        let seq = *counter;
        *counter += 1;
        seq
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(sender: u16, seq: u32, txn: u32) -> MessageHeader {
        MessageHeader { sender_id: sender, seq, transaction_id: txn }
    }

    #[test]
    fn wakeup_command_frozen_bytes() {
        let bytes = encode(&header(1, 1, 7), &ControlMessage::WakeupCommand { dbs_id: 2 });
        // Magic "HCN1", version 1, tag 3, then sender/seq/txn big-endian.
        assert_eq!(
            bytes,
            vec![
                0x48, 0x43, 0x4E, 0x31, // "HCN1"
                0x01, // version
                0x03, // wakeup command
                0x00, 0x01, // sender 1
                0x00, 0x00, 0x00, 0x01, // seq 1
                0x00, 0x00, 0x00, 0x07, // txn 7
                0x00, 0x00, 0x00, 0x02, // dbs 2
            ]
        );
    }

    #[test]
    fn appointment_frozen_bytes() {
        let msg = ControlMessage::ChannelAppointment {
            ms_id: 0x0102_0304,
            service: ServiceKind::MtCall,
            slot: 5,
        };
        let bytes = encode(&header(0xBEEF, 0x0A0B_0C0D, 0x0102_0304), &msg);
        assert_eq!(bytes.len(), HEADER_LEN + 6);
        assert_eq!(&bytes[..6], &[0x48, 0x43, 0x4E, 0x31, 0x01, 0x01]);
        assert_eq!(&bytes[6..8], &[0xBE, 0xEF]);
        assert_eq!(&bytes[16..20], &[0x01, 0x02, 0x03, 0x04]);
        assert_eq!(bytes[20], 0x02);
        assert_eq!(bytes[21], 5);
    }

    #[test]
    fn all_variants_round_trip() {
        let cases = [
            ControlMessage::ChannelAppointment {
                ms_id: 42,
                service: ServiceKind::MoCall,
                slot: 0,
            },
            ControlMessage::AppointmentResponse { accept: true, arfcn: 512, slot: 3 },
            ControlMessage::AppointmentResponse { accept: false, arfcn: 0, slot: 0 },
            ControlMessage::WakeupCommand { dbs_id: 9 },
            ControlMessage::WakeupAck { dbs_id: 9 },
            ControlMessage::LinkRelease { ms_id: u32::MAX },
            ControlMessage::StatusReport {
                power: WirePower::Active,
                load: LoadByte::from_fraction(0.5).unwrap(),
            },
            ControlMessage::StatusReport { power: WirePower::Sleep, load: LoadByte::ZERO },
        ];
        for (i, msg) in cases.iter().enumerate() {
            let h = header(i as u16, i as u32 + 1, 1000 + i as u32);
            let bytes = encode(&h, msg);
            assert!(bytes.len() <= MAX_DATAGRAM_LEN);
            let (h2, m2) = decode(&bytes).expect("round trip");
            assert_eq!(h, h2);
            assert_eq!(*msg, m2);
        }
    }

    #[test]
    fn bad_magic_reported_at_offset_zero() {
        let mut bytes = encode(&header(1, 1, 1), &ControlMessage::WakeupAck { dbs_id: 1 });
        bytes[0] = b'X';
        assert_eq!(decode(&bytes), Err(DecodeError::BadMagic { offset: 0 }));
    }

    #[test]
    fn bad_version_reported() {
        let mut bytes = encode(&header(1, 1, 1), &ControlMessage::WakeupAck { dbs_id: 1 });
        bytes[4] = 2;
        assert_eq!(decode(&bytes), Err(DecodeError::BadVersion { offset: 4, found: 2 }));
    }

    #[test]
    fn unknown_tag_reported() {
        let mut bytes = encode(&header(1, 1, 1), &ControlMessage::WakeupAck { dbs_id: 1 });
        bytes[5] = 0x09;
        assert_eq!(decode(&bytes), Err(DecodeError::UnknownTag { offset: 5, tag: 0x09 }));
    }

    #[test]
    fn unknown_service_kind_reported() {
        let msg = ControlMessage::ChannelAppointment {
            ms_id: 1,
            service: ServiceKind::MoCall,
            slot: 0,
        };
        let mut bytes = encode(&header(1, 1, 1), &msg);
        bytes[20] = 0x07;
        assert_eq!(decode(&bytes), Err(DecodeError::UnknownTag { offset: 20, tag: 0x07 }));
    }

    #[test]
    fn every_prefix_is_truncated() {
        let bytes = encode(
            &header(3, 20, 8),
            &ControlMessage::AppointmentResponse { accept: true, arfcn: 60, slot: 1 },
        );
        for cut in 0..bytes.len() {
            match decode(&bytes[..cut]) {
                Err(DecodeError::Truncated { .. }) => {}
                other => panic!("prefix of {cut} bytes gave {other:?}"),
            }
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode(&header(1, 1, 1), &ControlMessage::LinkRelease { ms_id: 5 });
        let expected_end = bytes.len();
        bytes.push(0xAA);
        bytes.push(0xBB);
        assert_eq!(
            decode(&bytes),
            Err(DecodeError::TrailingBytes { offset: expected_end, remaining: 2 })
        );
    }

    #[test]
    fn load_byte_quantization() {
        assert_eq!(LoadByte::from_fraction(0.0).unwrap().raw(), 0);
        assert_eq!(LoadByte::from_fraction(1.0).unwrap().raw(), 255);
        assert_eq!(LoadByte::from_fraction(0.5).unwrap().raw(), 128);
        // 6/7 occupancy rounds to 219.
        assert_eq!(LoadByte::from_fraction(6.0 / 7.0).unwrap().raw(), 219);
        assert!(LoadByte::from_fraction(1.01).is_err());
        assert!(LoadByte::from_fraction(-0.1).is_err());
        // Quantization error stays within half a step.
        for i in 0..=100 {
            let f = i as f64 / 100.0;
            let q = LoadByte::from_fraction(f).unwrap().fraction();
            assert!((q - f).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn ordering_filter_examples() {
        let mut state = PeerChannelState::default();
        assert_eq!(state.admit(5), Admission::Deliver);
        assert_eq!(state.admit(5), Admission::DropDuplicate);
        assert_eq!(state.admit(7), Admission::Deliver);
        assert_eq!(state.admit(6), Admission::DropStale);
        assert_eq!(state.last_seq_seen(), 7);
        assert_eq!(state.duplicates(), 1);
        assert_eq!(state.stale(), 1);
    }

    #[test]
    fn filter_tracks_peers_independently() {
        let mut filter = InOrderFilter::new();
        assert_eq!(filter.admit(&header(1, 4, 0)), Admission::Deliver);
        assert_eq!(filter.admit(&header(2, 1, 0)), Admission::Deliver);
        assert_eq!(filter.admit(&header(1, 4, 0)), Admission::DropDuplicate);
        assert_eq!(filter.admit(&header(2, 2, 0)), Admission::Deliver);
    }

    #[test]
    fn seq_allocator_starts_at_one_per_peer() {
        let mut alloc = SeqAllocator::new();
        assert_eq!(alloc.next_seq(7), 1);
        assert_eq!(alloc.next_seq(7), 2);
        assert_eq!(alloc.next_seq(8), 1);
        assert_eq!(alloc.next_seq(7), 3);
    }

    fn arb_message() -> impl Strategy<Value = ControlMessage> {
        prop_oneof![
            (any::<u32>(), any::<bool>(), any::<u8>()).prop_map(|(ms_id, mt, slot)| {
                ControlMessage::ChannelAppointment {
                    ms_id,
                    service: if mt { ServiceKind::MtCall } else { ServiceKind::MoCall },
                    slot,
                }
            }),
            (any::<bool>(), any::<u16>(), any::<u8>()).prop_map(|(accept, arfcn, slot)| {
                ControlMessage::AppointmentResponse { accept, arfcn, slot }
            }),
            any::<u32>().prop_map(|dbs_id| ControlMessage::WakeupCommand { dbs_id }),
            any::<u32>().prop_map(|dbs_id| ControlMessage::WakeupAck { dbs_id }),
            any::<u32>().prop_map(|ms_id| ControlMessage::LinkRelease { ms_id }),
            (any::<bool>(), any::<u8>()).prop_map(|(active, load)| {
                ControlMessage::StatusReport {
                    power: if active { WirePower::Active } else { WirePower::Sleep },
                    load: LoadByte::from_raw(load),
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn prop_round_trip(sender in any::<u16>(), seq in any::<u32>(), txn in any::<u32>(),
                           msg in arb_message()) {
            let h = MessageHeader { sender_id: sender, seq, transaction_id: txn };
            let bytes = encode(&h, &msg);
            prop_assert!(bytes.len() <= MAX_DATAGRAM_LEN);
            let (h2, m2) = decode(&bytes).unwrap();
            prop_assert_eq!(h, h2);
            prop_assert_eq!(msg, m2);
        }

        #[test]
        fn prop_decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..80)) {
            // Arbitrary input either decodes or yields one of the five errors.
            let _ = decode(&bytes);
        }

        #[test]
        fn prop_delivered_seqs_strictly_increase(seqs in proptest::collection::vec(1u32..50, 1..200)) {
            let mut state = PeerChannelState::default();
            let mut delivered = Vec::new();
            for seq in seqs {
                if state.admit(seq) == Admission::Deliver {
                    delivered.push(seq);
                }
            }
            prop_assert!(delivered.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
