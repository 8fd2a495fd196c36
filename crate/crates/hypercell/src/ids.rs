//! Entity identifiers shared across the simulator: stations carry 16-bit ids
//! (they appear in wire headers), mobiles carry 32-bit ids.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Virtual time in microseconds.
pub type Micros = u64;

/// Mobile station identifier.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct MsId(pub u32);

impl fmt::Display for MsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Base station identifier, SBS or DBS.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct StationId(pub u16);

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Kind half of a trace actor.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum ActorKind {
    Sbs,
    Dbs,
    Ms,
}

impl ActorKind {
    pub const fn name(self) -> &'static str {
        match self {
            ActorKind::Sbs => "sbs",
            ActorKind::Dbs => "dbs",
            ActorKind::Ms => "ms",
        }
    }
}

/// A simulation entity as named in traces: role plus numeric id, rendered
/// `sbs:0`, `dbs:1`, `ms:100`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Actor {
    pub kind: ActorKind,
    pub id: u32,
}

impl Actor {
    pub const fn sbs(id: StationId) -> Actor {
        Actor { kind: ActorKind::Sbs, id: id.0 as u32 }
    }

    pub const fn dbs(id: StationId) -> Actor {
        Actor { kind: ActorKind::Dbs, id: id.0 as u32 }
    }

    pub const fn ms(id: MsId) -> Actor {
        Actor { kind: ActorKind::Ms, id: id.0 }
    }

    pub fn station_id(self) -> Option<StationId> {
        match self.kind {
            ActorKind::Sbs | ActorKind::Dbs => Some(StationId(self.id as u16)),
            ActorKind::Ms => None,
        }
    }

    pub fn ms_id(self) -> Option<MsId> {
        match self.kind {
            ActorKind::Ms => Some(MsId(self.id)),
            _ => None,
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.id)
    }
}

impl FromStr for Actor {
    type Err = String;

    fn from_str(s: &str) -> Result<Actor, String> {
        let (kind, id) = s.split_once(':').ok_or_else(|| format!("bad actor {s:?}"))?;
        let kind = match kind {
            "sbs" => ActorKind::Sbs,
            "dbs" => ActorKind::Dbs,
            "ms" => ActorKind::Ms,
            other => return Err(format!("unknown actor kind {other:?}")),
        };
        let id: u32 = id.parse().map_err(|_| format!("bad actor id {id:?}"))?;
        Ok(Actor { kind, id })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn actor_display_and_parse() {
        let a = Actor::dbs(StationId(3));
        assert_eq!(a.to_string(), "dbs:3");
        assert_eq!("dbs:3".parse::<Actor>().unwrap(), a);
        assert_eq!("ms:100".parse::<Actor>().unwrap(), Actor::ms(MsId(100)));
        assert!("bts:1".parse::<Actor>().is_err());
        assert!("ms".parse::<Actor>().is_err());
        assert!("ms:x".parse::<Actor>().is_err());
    }
}
