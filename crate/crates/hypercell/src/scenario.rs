//! Scenario files drive a run: one signaling station, its data stations, a
//! set of mobiles, and a timed stimulus list. The format is line oriented
//! with `[section]` headers, `#` comments, and `key=value` tokens.
//!
//! ```text
//! [knobs]
//! seed = 42
//! horizon_us = 6000000
//!
//! [stations]
//! sbs 0 arfcn=50 color=1
//! dbs 1 arfcn=60 color=1 capacity=7 power=active
//!
//! [mobiles]
//! ms 100
//!
//! [stimuli]
//! at=100000 power_on ms=100
//! at=500000 mo_call ms=100 duration_us=2000000
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::entity::PowerState;
use crate::ids::{Micros, MsId, StationId};
use crate::um::{validate_carrier_pair, CarrierConfig, CarrierPairing, Role};

/// Run-wide tunables, all optional in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Knobs {
    pub seed: u64,
    pub horizon_us: Micros,
    /// One-way latency for anything over the air.
    pub air_delay_us: Micros,
    /// One-way latency for station-to-station control messages.
    pub ctrl_delay_us: Micros,
    pub wake_latency_us: Micros,
    pub idle_timeout_us: Micros,
    /// Load fraction above which the dispatcher prefers waking a sleeper.
    pub high_load_threshold: f64,
    pub sleep_w: f64,
    pub waking_w: f64,
    pub active_w: f64,
}

impl Default for Knobs {
    fn default() -> Knobs {
        Knobs {
            seed: 0,
            horizon_us: 10_000_000,
            air_delay_us: 0,
            ctrl_delay_us: 1_000,
            wake_latency_us: 100_000,
            idle_timeout_us: 5_000_000,
            high_load_threshold: 0.8,
            sleep_w: 5.0,
            waking_w: 30.0,
            active_w: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SbsDecl {
    pub id: StationId,
    pub arfcn: u16,
    pub color_code: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DbsDecl {
    pub id: StationId,
    pub arfcn: u16,
    pub color_code: u8,
    pub capacity: u16,
    /// `Sleep` or `Active`; a station never starts mid-wake.
    pub initial_power: PowerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    PowerOn { ms: MsId },
    MoCall { ms: MsId, duration_us: Micros },
    MtCall { ms: MsId, duration_us: Micros },
    /// Test hook: the named station refuses its next appointment.
    DenyNextAppointment { dbs: StationId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stimulus {
    pub at: Micros,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub knobs: Knobs,
    pub sbs: SbsDecl,
    pub dbs: Vec<DbsDecl>,
    pub mobiles: Vec<MsId>,
    /// Sorted by time; equal times keep file order.
    pub stimuli: Vec<Stimulus>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scenario declares no signaling station")]
    MissingSbs,
    #[error("station id {0} declared twice")]
    DuplicateStation(StationId),
    #[error("arfcn {0} assigned to more than one station")]
    DuplicateArfcn(u16),
    #[error("mobile id {0} declared twice")]
    DuplicateMs(MsId),
    #[error("carrier for dbs {dbs} does not pair with the signaling carrier: {why}")]
    BadCarrier { dbs: StationId, why: String },
    #[error("dbs {0} has zero capacity")]
    ZeroCapacity(StationId),
    #[error("high_load_threshold {0} outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("stimulus references unknown mobile {0}")]
    UnknownMs(MsId),
    #[error("stimulus references unknown data station {0}")]
    UnknownDbs(StationId),
    #[error("call for mobile {0} has zero duration")]
    ZeroDuration(MsId),
    #[error("horizon_us must be positive")]
    ZeroHorizon,
    #[error("cannot read scenario: {0}")]
    Io(String),
}

impl Scenario {
    /// Parse and semantically validate.
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario = parse_syntax(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        Scenario::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.knobs.horizon_us == 0 {
            return Err(ScenarioError::ZeroHorizon);
        }
        if !(0.0..=1.0).contains(&self.knobs.high_load_threshold) {
            return Err(ScenarioError::ThresholdOutOfRange(self.knobs.high_load_threshold));
        }
        let mut station_ids = BTreeSet::new();
        let mut arfcns = BTreeSet::new();
        station_ids.insert(self.sbs.id);
        arfcns.insert(self.sbs.arfcn);
        let sbs_carrier = CarrierConfig::new(self.sbs.arfcn, self.sbs.color_code, Role::Sbs)
            .map_err(|e| ScenarioError::BadCarrier {
                dbs: self.sbs.id,
                why: e.to_string(),
            })?;
        for d in &self.dbs {
            if !station_ids.insert(d.id) {
                return Err(ScenarioError::DuplicateStation(d.id));
            }
            if !arfcns.insert(d.arfcn) {
                return Err(ScenarioError::DuplicateArfcn(d.arfcn));
            }
            if d.capacity == 0 {
                return Err(ScenarioError::ZeroCapacity(d.id));
            }
            let carrier = CarrierConfig::new(d.arfcn, d.color_code, Role::Dbs).map_err(|e| {
                ScenarioError::BadCarrier { dbs: d.id, why: e.to_string() }
            })?;
            match validate_carrier_pair(&sbs_carrier, &carrier) {
                Ok(CarrierPairing::Ok) => {}
                Ok(verdict) => {
                    return Err(ScenarioError::BadCarrier { dbs: d.id, why: verdict.to_string() })
                }
                Err(e) => {
                    return Err(ScenarioError::BadCarrier { dbs: d.id, why: e.to_string() })
                }
            }
        }
        let mut ms_ids = BTreeSet::new();
        for &ms in &self.mobiles {
            if !ms_ids.insert(ms) {
                return Err(ScenarioError::DuplicateMs(ms));
            }
        }
        for stim in &self.stimuli {
            match stim.action {
                Action::PowerOn { ms } => {
                    if !ms_ids.contains(&ms) {
                        return Err(ScenarioError::UnknownMs(ms));
                    }
                }
                Action::MoCall { ms, duration_us } | Action::MtCall { ms, duration_us } => {
                    if !ms_ids.contains(&ms) {
                        return Err(ScenarioError::UnknownMs(ms));
                    }
                    if duration_us == 0 {
                        return Err(ScenarioError::ZeroDuration(ms));
                    }
                }
                Action::DenyNextAppointment { dbs } => {
                    if !self.dbs.iter().any(|d| d.id == dbs) {
                        return Err(ScenarioError::UnknownDbs(dbs));
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse(render(s))` reproduces `s`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let k = &self.knobs;
        let _ = writeln!(s, "[knobs]");
        let _ = writeln!(s, "seed = {}", k.seed);
        let _ = writeln!(s, "horizon_us = {}", k.horizon_us);
        let _ = writeln!(s, "air_delay_us = {}", k.air_delay_us);
        let _ = writeln!(s, "ctrl_delay_us = {}", k.ctrl_delay_us);
        let _ = writeln!(s, "wake_latency_us = {}", k.wake_latency_us);
        let _ = writeln!(s, "idle_timeout_us = {}", k.idle_timeout_us);
        let _ = writeln!(s, "high_load_threshold = {}", k.high_load_threshold);
        let _ = writeln!(s, "sleep_w = {}", k.sleep_w);
        let _ = writeln!(s, "waking_w = {}", k.waking_w);
        let _ = writeln!(s, "active_w = {}", k.active_w);
        let _ = writeln!(s, "\n[stations]");
        let _ = writeln!(
            s,
            "sbs {} arfcn={} color={}",
            self.sbs.id, self.sbs.arfcn, self.sbs.color_code
        );
        for d in &self.dbs {
            let _ = writeln!(
                s,
                "dbs {} arfcn={} color={} capacity={} power={}",
                d.id,
                d.arfcn,
                d.color_code,
                d.capacity,
                d.initial_power
            );
        }
        let _ = writeln!(s, "\n[mobiles]");
        for ms in &self.mobiles {
            let _ = writeln!(s, "ms {ms}");
        }
        let _ = writeln!(s, "\n[stimuli]");
        for stim in &self.stimuli {
            let _ = write!(s, "at={} ", stim.at);
            match stim.action {
                Action::PowerOn { ms } => {
                    let _ = writeln!(s, "power_on ms={ms}");
                }
                Action::MoCall { ms, duration_us } => {
                    let _ = writeln!(s, "mo_call ms={ms} duration_us={duration_us}");
                }
                Action::MtCall { ms, duration_us } => {
                    let _ = writeln!(s, "mt_call ms={ms} duration_us={duration_us}");
                }
                Action::DenyNextAppointment { dbs } => {
                    let _ = writeln!(s, "deny_next_appointment dbs={dbs}");
                }
            }
        }
        s
    }
}

fn err(line: usize, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse { line, msg: msg.into() }
}

/// Splits `k=v` tokens after the leading words of a line.
struct KvTokens<'a> {
    pairs: Vec<(&'a str, &'a str)>,
    line: usize,
}

impl<'a> KvTokens<'a> {
    fn parse(tokens: &[&'a str], line: usize) -> Result<KvTokens<'a>, ScenarioError> {
        let mut pairs = Vec::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected key=value, got {tok:?}")))?;
            pairs.push((k, v));
        }
        Ok(KvTokens { pairs, line })
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ScenarioError> {
        let idx = self
            .pairs
            .iter()
            .position(|&(k, _)| k == key)
            .ok_or_else(|| err(self.line, format!("missing {key}=")))?;
        let (_, v) = self.pairs.remove(idx);
        v.parse()
            .map_err(|_| err(self.line, format!("bad value for {key}: {v:?}")))
    }

    fn finish(self) -> Result<(), ScenarioError> {
        match self.pairs.first() {
            Some((k, _)) => Err(err(self.line, format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}

fn parse_power(v: &str, line: usize) -> Result<PowerState, ScenarioError> {
    match v {
        "active" => Ok(PowerState::Active),
        "sleep" => Ok(PowerState::Sleep),
        other => Err(err(line, format!("power must be active or sleep, got {other:?}"))),
    }
}

fn parse_syntax(text: &str) -> Result<Scenario, ScenarioError> {
    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Knobs,
        Stations,
        Mobiles,
        Stimuli,
    }
    let mut section = Section::None;
    let mut knobs = Knobs::default();
    let mut sbs: Option<SbsDecl> = None;
    let mut dbs = Vec::new();
    let mut mobiles = Vec::new();
    let mut stimuli: Vec<Stimulus> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.split_once('#') {
            Some((before, _)) => before,
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line, "unterminated section header"))?;
            section = match name {
                "knobs" => Section::Knobs,
                "stations" => Section::Stations,
                "mobiles" => Section::Mobiles,
                "stimuli" => Section::Stimuli,
                other => return Err(err(line, format!("unknown section [{other}]"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(err(line, "content before any [section]")),
            Section::Knobs => {
                let (key, value) = content
                    .split_once('=')
                    .ok_or_else(|| err(line, "expected key = value"))?;
                let (key, value) = (key.trim(), value.trim());
                let bad = |what: &str| err(line, format!("bad value for {what}: {value:?}"));
                match key {
                    "seed" => knobs.seed = value.parse().map_err(|_| bad(key))?,
                    "horizon_us" => knobs.horizon_us = value.parse().map_err(|_| bad(key))?,
                    "air_delay_us" => knobs.air_delay_us = value.parse().map_err(|_| bad(key))?,
                    "ctrl_delay_us" => {
                        knobs.ctrl_delay_us = value.parse().map_err(|_| bad(key))?
                    }
                    "wake_latency_us" => {
                        knobs.wake_latency_us = value.parse().map_err(|_| bad(key))?
                    }
                    "idle_timeout_us" => {
                        knobs.idle_timeout_us = value.parse().map_err(|_| bad(key))?
                    }
                    "high_load_threshold" => {
                        knobs.high_load_threshold = value.parse().map_err(|_| bad(key))?
                    }
                    "sleep_w" => knobs.sleep_w = value.parse().map_err(|_| bad(key))?,
                    "waking_w" => knobs.waking_w = value.parse().map_err(|_| bad(key))?,
                    "active_w" => knobs.active_w = value.parse().map_err(|_| bad(key))?,
                    other => return Err(err(line, format!("unknown knob {other:?}"))),
                }
            }
            Section::Stations => {
                let tokens: Vec<&str> = content.split_whitespace().collect();
                match tokens.first().copied() {
                    Some("sbs") => {
                        if sbs.is_some() {
                            return Err(err(line, "second signaling station"));
                        }
                        let id: u16 = tokens
                            .get(1)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| err(line, "expected: sbs <id> arfcn=.. color=.."))?;
                        let mut kv = KvTokens::parse(&tokens[2..], line)?;
                        let decl = SbsDecl {
                            id: StationId(id),
                            arfcn: kv.take("arfcn")?,
                            color_code: kv.take("color")?,
                        };
                        kv.finish()?;
                        sbs = Some(decl);
                    }
                    Some("dbs") => {
                        let id: u16 = tokens
                            .get(1)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| err(line, "expected: dbs <id> arfcn=.. color=.. capacity=.. power=.."))?;
                        let mut kv = KvTokens::parse(&tokens[2..], line)?;
                        let power: String = kv.take("power")?;
                        let decl = DbsDecl {
                            id: StationId(id),
                            arfcn: kv.take("arfcn")?,
                            color_code: kv.take("color")?,
                            capacity: kv.take("capacity")?,
                            initial_power: parse_power(&power, line)?,
                        };
                        kv.finish()?;
                        dbs.push(decl);
                    }
                    _ => return Err(err(line, "station line must start with sbs or dbs")),
                }
            }
            Section::Mobiles => {
                let tokens: Vec<&str> = content.split_whitespace().collect();
                if tokens.len() != 2 || tokens[0] != "ms" {
                    return Err(err(line, "expected: ms <id>"));
                }
                let id: u32 = tokens[1]
                    .parse()
                    .map_err(|_| err(line, format!("bad mobile id {:?}", tokens[1])))?;
                mobiles.push(MsId(id));
            }
            Section::Stimuli => {
                let tokens: Vec<&str> = content.split_whitespace().collect();
                if tokens.len() < 2 {
                    return Err(err(line, "expected: at=<us> <action> ..."));
                }
                let at: Micros = tokens[0]
                    .strip_prefix("at=")
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line, "stimulus must start with at=<us>"))?;
                let mut kv = KvTokens::parse(&tokens[2..], line)?;
                let action = match tokens[1] {
                    "power_on" => Action::PowerOn { ms: MsId(kv.take("ms")?) },
                    "mo_call" => Action::MoCall {
                        ms: MsId(kv.take("ms")?),
                        duration_us: kv.take("duration_us")?,
                    },
                    "mt_call" => Action::MtCall {
                        ms: MsId(kv.take("ms")?),
                        duration_us: kv.take("duration_us")?,
                    },
                    "deny_next_appointment" => {
                        Action::DenyNextAppointment { dbs: StationId(kv.take("dbs")?) }
                    }
                    other => return Err(err(line, format!("unknown action {other:?}"))),
                };
                kv.finish()?;
                stimuli.push(Stimulus { at, action });
            }
        }
    }
    let sbs = sbs.ok_or(ScenarioError::MissingSbs)?;
    stimuli.sort_by_key(|s| s.at);
    Ok(Scenario { knobs, sbs, dbs, mobiles, stimuli })
}

/// Incremental construction for tests and generators.
#[derive(Debug, Default)]
pub struct ScenarioBuilder {
    knobs: Knobs,
    sbs: Option<SbsDecl>,
    dbs: Vec<DbsDecl>,
    mobiles: Vec<MsId>,
    stimuli: Vec<Stimulus>,
}

impl ScenarioBuilder {
    pub fn new() -> ScenarioBuilder {
        ScenarioBuilder::default()
    }

    pub fn knobs(mut self, knobs: Knobs) -> Self {
        self.knobs = knobs;
        self
    }

    pub fn sbs(mut self, id: u16, arfcn: u16, color_code: u8) -> Self {
        self.sbs = Some(SbsDecl { id: StationId(id), arfcn, color_code });
        self
    }

    pub fn dbs(mut self, id: u16, arfcn: u16, color_code: u8, capacity: u16, power: PowerState) -> Self {
        self.dbs.push(DbsDecl {
            id: StationId(id),
            arfcn,
            color_code,
            capacity,
            initial_power: power,
        });
        self
    }

    pub fn ms(mut self, id: u32) -> Self {
        self.mobiles.push(MsId(id));
        self
    }

    pub fn at(mut self, at: Micros, action: Action) -> Self {
        self.stimuli.push(Stimulus { at, action });
        self
    }

    pub fn build(self) -> Result<Scenario, ScenarioError> {
        let mut stimuli = self.stimuli;
        stimuli.sort_by_key(|s| s.at);
        let scenario = Scenario {
            knobs: self.knobs,
            sbs: self.sbs.ok_or(ScenarioError::MissingSbs)?,
            dbs: self.dbs,
            mobiles: self.mobiles,
            stimuli,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// A randomized many-call scenario: three data stations of mixed capacity,
/// one starting asleep, eight mobiles placing overlapping calls. Short idle
/// timeout and wake latency keep the fleet churning through power states.
pub fn random_stress_scenario(seed: u64, calls: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut knobs = Knobs {
        seed,
        idle_timeout_us: 1_000_000,
        wake_latency_us: 50_000,
        ..Knobs::default()
    };
    let mut b = ScenarioBuilder::new()
        .sbs(0, 50, 1)
        .dbs(1, 60, 1, 2, PowerState::Active)
        .dbs(2, 61, 1, 3, PowerState::Active)
        .dbs(3, 62, 1, 2, PowerState::Sleep);
    let mobiles: Vec<u32> = (100..108).collect();
    for (i, &ms) in mobiles.iter().enumerate() {
        b = b.ms(ms);
        b = b.at(10_000 * (i as Micros + 1), Action::PowerOn { ms: MsId(ms) });
    }
    let mut t: Micros = 300_000;
    for k in 0..calls {
        t += rng.random_range(50_000..400_000);
        let ms = MsId(mobiles[rng.random_range(0..mobiles.len())]);
        let duration_us = rng.random_range(200_000..1_500_000);
        let action = if rng.random_range(0..2) == 0 {
            Action::MoCall { ms, duration_us }
        } else {
            Action::MtCall { ms, duration_us }
        };
        b = b.at(t, action);
        if k % 7 == 3 {
            let dbs = StationId(rng.random_range(1..4));
            b = b.at(t - 1, Action::DenyNextAppointment { dbs });
        }
    }
    knobs.horizon_us = t + 3_000_000;
    b.knobs(knobs).build().expect("generated scenario is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "\
# two mobiles, one call each
[knobs]
seed = 7
horizon_us = 6000000

[stations]
sbs 0 arfcn=50 color=1
dbs 1 arfcn=60 color=1 capacity=7 power=active
dbs 2 arfcn=61 color=1 capacity=2 power=sleep

[mobiles]
ms 100
ms 101

[stimuli]
at=100000 power_on ms=100
at=120000 power_on ms=101
at=500000 mo_call ms=100 duration_us=2000000
at=900000 mt_call ms=101 duration_us=1000000
";

    #[test]
    fn parses_the_example() {
        let s = Scenario::parse(EXAMPLE).unwrap();
        assert_eq!(s.knobs.seed, 7);
        assert_eq!(s.knobs.horizon_us, 6_000_000);
        assert_eq!(s.knobs.ctrl_delay_us, 1_000, "unset knobs take defaults");
        assert_eq!(s.sbs, SbsDecl { id: StationId(0), arfcn: 50, color_code: 1 });
        assert_eq!(s.dbs.len(), 2);
        assert_eq!(s.dbs[1].initial_power, PowerState::Sleep);
        assert_eq!(s.mobiles, vec![MsId(100), MsId(101)]);
        assert_eq!(s.stimuli.len(), 4);
        assert_eq!(
            s.stimuli[2].action,
            Action::MoCall { ms: MsId(100), duration_us: 2_000_000 }
        );
    }

    #[test]
    fn render_parse_round_trip() {
        let s = Scenario::parse(EXAMPLE).unwrap();
        assert_eq!(Scenario::parse(&s.render()).unwrap(), s);
    }

    #[test]
    fn stimuli_sorted_stably() {
        let text = EXAMPLE.replace("at=900000", "at=100000");
        let s = Scenario::parse(&text).unwrap();
        assert!(s.stimuli.windows(2).all(|w| w[0].at <= w[1].at));
        // Three stimuli now share t=100000; file order is kept among them.
        assert_eq!(s.stimuli[0].action, Action::PowerOn { ms: MsId(100) });
        assert_eq!(
            s.stimuli[1].action,
            Action::MtCall { ms: MsId(101), duration_us: 1_000_000 }
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases: Vec<(String, usize, &str)> = vec![
            ("x = 1\n".into(), 1, "before any"),
            ("[nope]\n".into(), 1, "unknown section"),
            ("[knobs]\nseed = abc\n".into(), 2, "bad value"),
            ("[knobs]\nwarp = 9\n".into(), 2, "unknown knob"),
            ("[stations]\nbts 0 arfcn=50 color=1\n".into(), 2, "sbs or dbs"),
            (
                "[stations]\nsbs 0 arfcn=50 color=1\n\n[stimuli]\nat=5 warp ms=1\n".into(),
                5,
                "unknown action",
            ),
            (
                "[stations]\nsbs 0 arfcn=50 color=1 extra=1\n".into(),
                2,
                "unknown key",
            ),
        ];
        for (text, line, needle) in cases {
            match Scenario::parse(&text) {
                Err(ScenarioError::Parse { line: l, msg }) => {
                    assert_eq!(l, line, "for input {text:?}");
                    assert!(msg.contains(needle), "msg {msg:?} lacks {needle:?}");
                }
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn missing_sbs_is_rejected() {
        assert_eq!(
            Scenario::parse("[mobiles]\nms 1\n").unwrap_err(),
            ScenarioError::MissingSbs
        );
    }

    #[test]
    fn semantic_rejections() {
        let base = Scenario::parse(EXAMPLE).unwrap();

        let mut s = base.clone();
        s.dbs[1].arfcn = 60;
        assert_eq!(s.validate().unwrap_err(), ScenarioError::DuplicateArfcn(60));

        let mut s = base.clone();
        s.dbs[1].id = StationId(1);
        assert_eq!(s.validate().unwrap_err(), ScenarioError::DuplicateStation(StationId(1)));

        let mut s = base.clone();
        s.dbs[0].color_code = 3;
        assert!(matches!(s.validate().unwrap_err(), ScenarioError::BadCarrier { dbs: StationId(1), .. }));

        let mut s = base.clone();
        s.dbs[0].capacity = 0;
        assert_eq!(s.validate().unwrap_err(), ScenarioError::ZeroCapacity(StationId(1)));

        let mut s = base.clone();
        s.knobs.high_load_threshold = 1.5;
        assert_eq!(s.validate().unwrap_err(), ScenarioError::ThresholdOutOfRange(1.5));

        let mut s = base.clone();
        s.stimuli[0].action = Action::PowerOn { ms: MsId(999) };
        assert_eq!(s.validate().unwrap_err(), ScenarioError::UnknownMs(MsId(999)));

        let mut s = base.clone();
        s.stimuli[2].action = Action::MoCall { ms: MsId(100), duration_us: 0 };
        assert_eq!(s.validate().unwrap_err(), ScenarioError::ZeroDuration(MsId(100)));

        let mut s = base.clone();
        s.stimuli[0].action = Action::DenyNextAppointment { dbs: StationId(9) };
        assert_eq!(s.validate().unwrap_err(), ScenarioError::UnknownDbs(StationId(9)));

        let mut s = base.clone();
        s.mobiles.push(MsId(100));
        assert_eq!(s.validate().unwrap_err(), ScenarioError::DuplicateMs(MsId(100)));

        let mut s = base;
        s.knobs.horizon_us = 0;
        assert_eq!(s.validate().unwrap_err(), ScenarioError::ZeroHorizon);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = "\n# lead\n[stations]\nsbs 0 arfcn=50 color=1 # trailing\n";
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.sbs.arfcn, 50);
    }

    #[test]
    fn stress_generator_is_valid_and_deterministic() {
        let a = random_stress_scenario(11, 100);
        let b = random_stress_scenario(11, 100);
        assert_eq!(a, b);
        a.validate().unwrap();
        let calls = a
            .stimuli
            .iter()
            .filter(|s| matches!(s.action, Action::MoCall { .. } | Action::MtCall { .. }))
            .count();
        assert_eq!(calls, 100);
        let last = a.stimuli.iter().map(|s| s.at).max().unwrap();
        assert!(a.knobs.horizon_us > last, "horizon clears the last stimulus");
        assert!(a.dbs.iter().any(|d| d.initial_power == PowerState::Sleep));
        // Round trips through the file format too.
        assert_eq!(Scenario::parse(&a.render()).unwrap(), a);
    }

    #[test]
    fn different_seeds_differ() {
        assert_ne!(random_stress_scenario(1, 20), random_stress_scenario(2, 20));
    }
}
