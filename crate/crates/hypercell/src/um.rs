//! Um air interface model: logical channels, their grouping, and which side of
//! the signaling/data split is allowed to carry them.
//!
//! The split assigns every control channel to the signaling station (SBS) and
//! every traffic-bearing channel to the data stations (DBS); SDCCH is the one
//! channel both sides may host. Timing follows plain TDMA arithmetic with
//! eight 577 us slots per frame and no multiframe structure.

use std::fmt;

use thiserror::Error;

/// Duration of one TDMA slot in microseconds.
pub const SLOT_US: u64 = 577;
/// Slots per TDMA frame.
pub const SLOTS_PER_FRAME: u64 = 8;
/// Duration of one TDMA frame in microseconds.
pub const FRAME_US: u64 = SLOT_US * SLOTS_PER_FRAME;

/// The eleven Um logical channels this model knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LogicalChannel {
    /// Frequency correction channel.
    Fcch,
    /// Synchronization channel.
    Sch,
    /// Broadcast control channel.
    Bcch,
    /// Paging channel.
    Pch,
    /// Notification channel.
    Nch,
    /// Random access channel (uplink only).
    Rach,
    /// Access grant channel.
    Agch,
    /// Standalone dedicated control channel.
    Sdcch,
    /// Slow associated control channel.
    Sacch,
    /// Fast associated control channel.
    Facch,
    /// Traffic channel.
    Tch,
}

impl LogicalChannel {
    pub const ALL: [LogicalChannel; 11] = [
        LogicalChannel::Fcch,
        LogicalChannel::Sch,
        LogicalChannel::Bcch,
        LogicalChannel::Pch,
        LogicalChannel::Nch,
        LogicalChannel::Rach,
        LogicalChannel::Agch,
        LogicalChannel::Sdcch,
        LogicalChannel::Sacch,
        LogicalChannel::Facch,
        LogicalChannel::Tch,
    ];

    /// Which channel group this channel belongs to.
    pub const fn group(self) -> ChannelGroup {
        match self {
            LogicalChannel::Fcch | LogicalChannel::Sch | LogicalChannel::Bcch => ChannelGroup::Bch,
            LogicalChannel::Pch
            | LogicalChannel::Nch
            | LogicalChannel::Rach
            | LogicalChannel::Agch => ChannelGroup::Ccch,
            LogicalChannel::Sdcch | LogicalChannel::Sacch | LogicalChannel::Facch => {
                ChannelGroup::Dcch
            }
            LogicalChannel::Tch => ChannelGroup::Tch,
        }
    }

    /// Which station roles may host this channel under the split.
    ///
    /// Broadcast and common control channels stay on the signaling station,
    /// traffic and its associated control channels live on data stations, and
    /// SDCCH may be hosted by either side.
    pub const fn allowed_roles(self) -> RoleSet {
        match self {
            LogicalChannel::Sdcch => RoleSet::BOTH,
            other => match other.group() {
                ChannelGroup::Bch | ChannelGroup::Ccch => RoleSet::SBS_ONLY,
                ChannelGroup::Dcch | ChannelGroup::Tch => RoleSet::DBS_ONLY,
            },
        }
    }

    /// Lowercase short name, as used in trace attributes.
    pub const fn name(self) -> &'static str {
        match self {
            LogicalChannel::Fcch => "fcch",
            LogicalChannel::Sch => "sch",
            LogicalChannel::Bcch => "bcch",
            LogicalChannel::Pch => "pch",
            LogicalChannel::Nch => "nch",
            LogicalChannel::Rach => "rach",
            LogicalChannel::Agch => "agch",
            LogicalChannel::Sdcch => "sdcch",
            LogicalChannel::Sacch => "sacch",
            LogicalChannel::Facch => "facch",
            LogicalChannel::Tch => "tch",
        }
    }

    const fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for LogicalChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Channel groups: broadcast, common control, dedicated control, traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelGroup {
    Bch,
    Ccch,
    Dcch,
    Tch,
}

impl ChannelGroup {
    pub const ALL: [ChannelGroup; 4] = [
        ChannelGroup::Bch,
        ChannelGroup::Ccch,
        ChannelGroup::Dcch,
        ChannelGroup::Tch,
    ];

    /// The member channels of this group.
    pub fn members(self) -> ChannelSet {
        let mut set = ChannelSet::EMPTY;
        for ch in LogicalChannel::ALL {
            if ch.group() == self {
                set = set.with(ch);
            }
        }
        set
    }
}

/// Base station role under the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    /// Signaling base station: synchronization, broadcast, paging, access grants.
    Sbs,
    /// Data base station: traffic channels, sleeps when idle.
    Dbs,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Sbs => "sbs",
            Role::Dbs => "dbs",
        })
    }
}

/// Small set of roles, used for channel and functionality ownership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoleSet(u8);

impl RoleSet {
    pub const EMPTY: RoleSet = RoleSet(0);
    pub const SBS_ONLY: RoleSet = RoleSet(0b01);
    pub const DBS_ONLY: RoleSet = RoleSet(0b10);
    pub const BOTH: RoleSet = RoleSet(0b11);

    const fn role_bit(role: Role) -> u8 {
        match role {
            Role::Sbs => 0b01,
            Role::Dbs => 0b10,
        }
    }

    pub const fn contains(self, role: Role) -> bool {
        self.0 & Self::role_bit(role) != 0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for RoleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        write!(f, "{{")?;
        for role in [Role::Sbs, Role::Dbs] {
            if self.contains(role) {
                if !first {
                    write!(f, ",")?;
                }
                write!(f, "{role}")?;
                first = false;
            }
        }
        write!(f, "}}")
    }
}

/// Network functionalities whose placement the split fixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Functionality {
    Synchronization,
    Broadcasting,
    Paging,
    DataTraffic,
}

impl Functionality {
    pub const ALL: [Functionality; 4] = [
        Functionality::Synchronization,
        Functionality::Broadcasting,
        Functionality::Paging,
        Functionality::DataTraffic,
    ];
}

/// Which roles provide a functionality. Control-plane work is SBS-only,
/// traffic is DBS-only.
pub const fn functionality_roles(f: Functionality) -> RoleSet {
    match f {
        Functionality::Synchronization | Functionality::Broadcasting | Functionality::Paging => {
            RoleSet::SBS_ONLY
        }
        Functionality::DataTraffic => RoleSet::DBS_ONLY,
    }
}

/// A set of logical channels, packed into the low 11 bits of a u16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ChannelSet(u16);

impl ChannelSet {
    pub const EMPTY: ChannelSet = ChannelSet(0);
    /// Mask covering all eleven channels.
    pub const ALL_MASK: u16 = (1 << 11) - 1;

    /// Builds a set from raw bits; bits above the eleventh are discarded.
    pub const fn from_bits(bits: u16) -> ChannelSet {
        ChannelSet(bits & Self::ALL_MASK)
    }

    pub const fn bits(self) -> u16 {
        self.0
    }

    pub const fn with(self, ch: LogicalChannel) -> ChannelSet {
        ChannelSet(self.0 | ch.bit())
    }

    pub const fn without(self, ch: LogicalChannel) -> ChannelSet {
        ChannelSet(self.0 & !ch.bit())
    }

    pub const fn contains(self, ch: LogicalChannel) -> bool {
        self.0 & ch.bit() != 0
    }

    pub const fn union(self, other: ChannelSet) -> ChannelSet {
        ChannelSet(self.0 | other.0)
    }

    pub const fn intersection(self, other: ChannelSet) -> ChannelSet {
        ChannelSet(self.0 & other.0)
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = LogicalChannel> {
        LogicalChannel::ALL.into_iter().filter(move |ch| self.contains(*ch))
    }

    pub const fn of(channels: &[LogicalChannel]) -> ChannelSet {
        let mut bits = 0u16;
        let mut i = 0;
        while i < channels.len() {
            bits |= channels[i].bit();
            i += 1;
        }
        ChannelSet(bits)
    }
}

impl FromIterator<LogicalChannel> for ChannelSet {
    fn from_iter<T: IntoIterator<Item = LogicalChannel>>(iter: T) -> Self {
        let mut set = ChannelSet::EMPTY;
        for ch in iter {
            set = set.with(ch);
        }
        set
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for ch in self.iter() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{ch}")?;
            first = false;
        }
        write!(f, "}}")
    }
}

/// Channel combinations a single physical channel may carry.
///
/// Only these four appear in deployments of this split: the two traffic
/// shapes, the full signaling broadcast/common-control stack, and the
/// standalone dedicated pair.
pub const PERMITTED_COMBINATIONS: [ChannelSet; 4] = [
    ChannelSet::of(&[LogicalChannel::Tch, LogicalChannel::Sacch]),
    ChannelSet::of(&[LogicalChannel::Tch, LogicalChannel::Sacch, LogicalChannel::Facch]),
    ChannelSet::of(&[
        LogicalChannel::Fcch,
        LogicalChannel::Sch,
        LogicalChannel::Bcch,
        LogicalChannel::Pch,
        LogicalChannel::Nch,
        LogicalChannel::Rach,
        LogicalChannel::Agch,
    ]),
    ChannelSet::of(&[LogicalChannel::Sdcch, LogicalChannel::Sacch]),
];

/// Whether `set` is one of the four permitted channel combinations.
pub fn is_permitted_combination(set: ChannelSet) -> bool {
    PERMITTED_COMBINATIONS.contains(&set)
}

/// Channels in `channels` that `role` must not host. Empty result means the
/// assignment is legal.
pub fn channel_violations(role: Role, channels: ChannelSet) -> ChannelSet {
    channels
        .iter()
        .filter(|ch| !ch.allowed_roles().contains(role))
        .collect()
}

/// The channel set a station of `role` hosts in this model.
pub fn role_channel_set(role: Role) -> ChannelSet {
    LogicalChannel::ALL
        .into_iter()
        .filter(|ch| ch.allowed_roles().contains(role))
        .collect()
}

/// Errors for out-of-range Um parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum UmError {
    #[error("slot {0} outside [0,7]")]
    SlotOutOfRange(u8),
    #[error("color code {0} outside [0,7]")]
    ColorCodeOutOfRange(u8),
}

/// Position in the TDMA structure: frame index plus slot within the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameTime {
    frame: u32,
    slot: u8,
}

impl FrameTime {
    /// Rejects slots outside [0,7].
    pub fn new(frame: u32, slot: u8) -> Result<FrameTime, UmError> {
        if slot >= SLOTS_PER_FRAME as u8 {
            return Err(UmError::SlotOutOfRange(slot));
        }
        Ok(FrameTime { frame, slot })
    }

    pub fn frame(self) -> u32 {
        self.frame
    }

    pub fn slot(self) -> u8 {
        self.slot
    }

    /// Start of this slot in microseconds since frame 0 slot 0.
    pub fn slot_start_us(self) -> u64 {
        (self.frame as u64 * SLOTS_PER_FRAME + self.slot as u64) * SLOT_US
    }
}

/// Radio carrier parameters of one station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CarrierConfig {
    pub arfcn: u16,
    pub color_code: u8,
    pub role: Role,
}

impl CarrierConfig {
    /// Rejects color codes outside [0,7].
    pub fn new(arfcn: u16, color_code: u8, role: Role) -> Result<CarrierConfig, UmError> {
        if color_code > 7 {
            return Err(UmError::ColorCodeOutOfRange(color_code));
        }
        Ok(CarrierConfig { arfcn, color_code, role })
    }
}

/// Outcome of checking an SBS/DBS carrier pair.
///
/// The pair is usable iff both stations share a color code and occupy
/// different ARFCNs. An ARFCN collision is reported ahead of a color code
/// mismatch when both apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarrierPairing {
    Ok,
    ArfcnCollision,
    ColorCodeMismatch,
}

impl fmt::Display for CarrierPairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CarrierPairing::Ok => "ok",
            CarrierPairing::ArfcnCollision => "arfcn collision",
            CarrierPairing::ColorCodeMismatch => "color code mismatch",
        })
    }
}

/// Role confusion when pairing carriers; distinct from a failed validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RolePairError {
    #[error("expected an SBS carrier, found {0}")]
    ExpectedSbs(Role),
    #[error("expected a DBS carrier, found {0}")]
    ExpectedDbs(Role),
}

/// Checks that a DBS carrier can operate under an SBS carrier.
pub fn validate_carrier_pair(
    sbs: &CarrierConfig,
    dbs: &CarrierConfig,
) -> Result<CarrierPairing, RolePairError> {
    if sbs.role != Role::Sbs {
        return Err(RolePairError::ExpectedSbs(sbs.role));
    }
    if dbs.role != Role::Dbs {
        return Err(RolePairError::ExpectedDbs(dbs.role));
    }
    if sbs.arfcn == dbs.arfcn {
        Ok(CarrierPairing::ArfcnCollision)
    } else if sbs.color_code != dbs.color_code {
        Ok(CarrierPairing::ColorCodeMismatch)
    } else {
        Ok(CarrierPairing::Ok)
    }
}
