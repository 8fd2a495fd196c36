//! Per-station energy accounting. The ledger integrates time spent in each
//! power state and converts it to joules when the run closes.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::entity::PowerState;
use crate::ids::{Micros, StationId};

/// Draw per power state, in watts.
#[derive(Debug, Clone, Copy)]
pub struct PowerDraw {
    pub sleep_w: f64,
    pub waking_w: f64,
    pub active_w: f64,
}

impl Default for PowerDraw {
    fn default() -> PowerDraw {
        PowerDraw { sleep_w: 5.0, waking_w: 30.0, active_w: 50.0 }
    }
}

impl PowerDraw {
    pub fn watts(&self, state: PowerState) -> f64 {
        match state {
            PowerState::Sleep => self.sleep_w,
            PowerState::Waking => self.waking_w,
            PowerState::Active => self.active_w,
        }
    }
}

#[derive(Debug, Clone)]
struct LedgerEntry {
    state: PowerState,
    since: Micros,
    /// Accumulated time, indexed sleep/waking/active.
    time_in: [Micros; 3],
}

fn slot(state: PowerState) -> usize {
    match state {
        PowerState::Sleep => 0,
        PowerState::Waking => 1,
        PowerState::Active => 2,
    }
}

/// Tracks power transitions as they happen; closed out at the horizon.
#[derive(Debug)]
pub struct EnergyLedger {
    draw: PowerDraw,
    stations: BTreeMap<StationId, LedgerEntry>,
}

impl EnergyLedger {
    pub fn new(draw: PowerDraw) -> EnergyLedger {
        EnergyLedger { draw, stations: BTreeMap::new() }
    }

    /// Declare a station and its state at t=0. Must precede any transition.
    pub fn register(&mut self, station: StationId, initial: PowerState) {
        self.stations
            .insert(station, LedgerEntry { state: initial, since: 0, time_in: [0; 3] });
    }

    pub fn transition(&mut self, station: StationId, now: Micros, state: PowerState) {
        let entry = self.stations.get_mut(&station).expect("station registered");
        debug_assert!(now >= entry.since, "transitions arrive in time order");
        entry.time_in[slot(entry.state)] += now - entry.since;
        entry.state = state;
        entry.since = now;
    }

    /// Close every interval at the horizon and report.
    pub fn finish(self, horizon: Micros) -> EnergyReport {
        let draw = self.draw;
        let mut stations = Vec::new();
        for (id, mut entry) in self.stations {
            debug_assert!(horizon >= entry.since);
            entry.time_in[slot(entry.state)] += horizon - entry.since;
            let [sleep_us, waking_us, active_us] = entry.time_in;
            let joules = draw.sleep_w * sleep_us as f64 / 1e6
                + draw.waking_w * waking_us as f64 / 1e6
                + draw.active_w * active_us as f64 / 1e6;
            stations.push(StationEnergy { station: id, sleep_us, waking_us, active_us, joules });
        }
        let total_joules = stations.iter().map(|s| s.joules).sum();
        EnergyReport { stations, total_joules }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationEnergy {
    pub station: StationId,
    pub sleep_us: Micros,
    pub waking_us: Micros,
    pub active_us: Micros,
    pub joules: f64,
}

impl StationEnergy {
    pub fn time_in(&self, state: PowerState) -> Micros {
        match state {
            PowerState::Sleep => self.sleep_us,
            PowerState::Waking => self.waking_us,
            PowerState::Active => self.active_us,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub stations: Vec<StationEnergy>,
    pub total_joules: f64,
}

impl EnergyReport {
    pub fn station(&self, id: StationId) -> Option<&StationEnergy> {
        self.stations.iter().find(|s| s.station == id)
    }
}
