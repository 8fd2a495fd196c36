//! Split-process transport: each base station runs in its own OS process
//! and coordinates over real UDP datagrams in the wire format, while the
//! parent process hosts the mobiles, the air medium, and the stimulus
//! schedule.
//!
//! Time is shared through CLOCK_MONOTONIC: the coordinator picks an epoch
//! and a speed factor and distributes both in the Start message. Every
//! process stamps its trace records with
//! `virtual = (monotonic - epoch) * speed`, so stamps are causally ordered
//! across processes without clock fields on the wire.
//!
//! Two kinds of datagram share the sockets. Wire-format control messages
//! start with the protocol magic (first byte `H`); everything else is a
//! JSON-encoded [`EnvMsg`] (first byte `{`). Station workers report their
//! trace on stdout, one record per line, with `!`-prefixed control lines
//! (`!ready`, `!error <msg>`).

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, UdpSocket};
use std::path::PathBuf;
use std::process::{Child, Command as ProcessCommand, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::RunSummary;
use crate::entity::{
    AdmissionPolicy, AirAddr, AirEvent, Command, Dbs, DbsConfig, DbsDescriptor, Input, Ms,
    MsConfig, Outbox, Sbs, SbsConfig, TimerKind,
};
use crate::ids::{Micros, MsId};
use crate::scenario::{Action, Scenario, ScenarioError};
use crate::trace::{parse_trace, render_trace, TraceRecord};
use crate::wire::{decode, encode, Admission, InOrderFilter, MessageHeader, SeqAllocator};

/// Current CLOCK_MONOTONIC reading in microseconds.
pub fn mono_micros() -> u64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_MONOTONIC, &mut ts) };
    assert_eq!(rc, 0, "clock_gettime(CLOCK_MONOTONIC) cannot fail");
    ts.tv_sec as u64 * 1_000_000 + ts.tv_nsec as u64 / 1_000
}

fn virtual_now(epoch: u64, speed: f64) -> Micros {
    let real = mono_micros().saturating_sub(epoch);
    (real as f64 * speed) as Micros
}

/// Environment datagrams between the coordinator and station workers.
///
/// Internally tagged so every variant, including the unit ones, encodes as
/// a JSON object: the leading `{` is what separates these from wire frames
/// on a shared socket.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EnvMsg {
    /// Distributed once every worker is ready; arms the shared clock.
    Start { epoch_us: u64, speed: f64, horizon_us: Micros },
    /// An air event crossing the process boundary.
    Air { to: AirAddr, event: AirEvent },
    /// A scenario stimulus addressed to a station.
    Stimulus { command: Command },
    Shutdown,
}

/// Everything a station worker needs, passed as one JSON argv argument.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkerConfig {
    /// The full scenario in its file format; the worker picks out its own
    /// station declaration.
    pub scenario_text: String,
    pub station_id: u16,
    /// UDP bind address, e.g. "127.0.0.1:5700".
    pub bind: String,
    pub coordinator: String,
    /// Peer station addresses for direct control traffic.
    pub ports: Vec<(u16, String)>,
}

#[derive(Debug, Error)]
pub enum SplitError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("transport: {0}")]
    Transport(String),
}

#[derive(Debug, Clone)]
pub struct SplitOptions {
    pub sbs_port: u16,
    /// The k-th data station (ordered by id) binds this port plus k.
    pub dbs_port_base: u16,
    /// Virtual microseconds per real microsecond.
    pub speed: f64,
    pub trace_out: Option<PathBuf>,
}

impl Default for SplitOptions {
    fn default() -> SplitOptions {
        SplitOptions { sbs_port: 5700, dbs_port_base: 5701, speed: 20.0, trace_out: None }
    }
}

#[derive(Debug)]
pub struct SplitRunReport {
    /// Merged trace: coordinator plus every worker, ordered by stamp.
    pub trace: Vec<TraceRecord>,
    pub summary: RunSummary,
}

fn transport<T>(what: impl std::fmt::Display) -> Result<T, SplitError> {
    Err(SplitError::Transport(what.to_string()))
}

// ---------------------------------------------------------------------------
// Station worker (child process)

enum StationNode {
    Sbs(Sbs),
    Dbs(Dbs),
}

impl StationNode {
    fn handle(&mut self, now: Micros, input: Input, out: &mut Outbox) {
        match self {
            StationNode::Sbs(s) => s.handle(now, input, out),
            StationNode::Dbs(d) => d.handle(now, input, out),
        }
    }

    fn start(&mut self, now: Micros, out: &mut Outbox) {
        match self {
            StationNode::Sbs(s) => s.start(now, out),
            StationNode::Dbs(d) => d.start(now, out),
        }
    }
}

struct Worker {
    node: StationNode,
    station_id: u16,
    socket: UdpSocket,
    coordinator: SocketAddr,
    peers: BTreeMap<u16, SocketAddr>,
    filter: InOrderFilter,
    seq: SeqAllocator,
    timers: Vec<(Micros, TimerKind)>,
    epoch: u64,
    speed: f64,
}

impl Worker {
    fn vnow(&self) -> Micros {
        virtual_now(self.epoch, self.speed)
    }

    fn fire_due_timers(&mut self) {
        loop {
            let now = self.vnow();
            let due = self
                .timers
                .iter()
                .enumerate()
                .filter(|(_, &(at, _))| at <= now)
                .min_by_key(|(_, &(at, _))| at)
                .map(|(i, _)| i);
            let Some(i) = due else { return };
            let (_, kind) = self.timers.remove(i);
            let mut out = Outbox::new();
            self.node.handle(now, Input::Timer(kind), &mut out);
            self.drain(out);
        }
    }

    fn drain(&mut self, out: Outbox) {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        for rec in &out.trace {
            let _ = writeln!(lock, "{rec}");
        }
        let _ = lock.flush();
        drop(lock);
        self.timers.extend(out.timers);
        for send in out.control {
            let seq = self.seq.next_seq(send.to.0);
            let header = MessageHeader {
                sender_id: self.station_id,
                seq,
                transaction_id: send.transaction_id,
            };
            let bytes = encode(&header, &send.msg);
            if let Some(addr) = self.peers.get(&send.to.0) {
                let _ = self.socket.send_to(&bytes, addr);
            }
        }
        for (to, event) in out.air {
            let msg = EnvMsg::Air { to, event };
            let bytes = serde_json::to_vec(&msg).expect("env messages serialize");
            let _ = self.socket.send_to(&bytes, self.coordinator);
        }
        // Power transitions feed the energy ledger, which only the
        // in-process engine keeps.
    }

    fn dispatch_datagram(&mut self, buf: &[u8]) -> Result<bool, String> {
        self.fire_due_timers();
        let now = self.vnow();
        if buf.first() == Some(&b'{') {
            let msg: EnvMsg =
                serde_json::from_slice(buf).map_err(|e| format!("bad env datagram: {e}"))?;
            match msg {
                EnvMsg::Air { event, .. } => {
                    let mut out = Outbox::new();
                    self.node.handle(now, Input::Air(event), &mut out);
                    self.drain(out);
                }
                EnvMsg::Stimulus { command } => {
                    let mut out = Outbox::new();
                    self.node.handle(now, Input::Command(command), &mut out);
                    self.drain(out);
                }
                EnvMsg::Shutdown => return Ok(true),
                EnvMsg::Start { .. } => {}
            }
        } else {
            let (header, msg) =
                decode(buf).map_err(|e| format!("undecodable control datagram: {e}"))?;
            if self.filter.admit(&header) == Admission::Deliver {
                let mut out = Outbox::new();
                self.node.handle(now, Input::Control { header, msg }, &mut out);
                self.drain(out);
            }
        }
        Ok(false)
    }
}

fn worker_run(config_json: &str) -> Result<(), String> {
    let config: WorkerConfig =
        serde_json::from_str(config_json).map_err(|e| format!("bad worker config: {e}"))?;
    let scenario =
        Scenario::parse(&config.scenario_text).map_err(|e| format!("bad scenario: {e}"))?;
    let socket = UdpSocket::bind(&config.bind)
        .map_err(|e| format!("bind {}: {e}", config.bind))?;
    let coordinator: SocketAddr = config
        .coordinator
        .parse()
        .map_err(|e| format!("bad coordinator address {}: {e}", config.coordinator))?;
    let mut peers = BTreeMap::new();
    for (id, addr) in &config.ports {
        let addr: SocketAddr =
            addr.parse().map_err(|e| format!("bad peer address {addr}: {e}"))?;
        peers.insert(*id, addr);
    }

    let node = build_station(&scenario, config.station_id)
        .ok_or_else(|| format!("station {} not in scenario", config.station_id))?;

    println!("!ready");
    let _ = std::io::stdout().flush();

    // Hold every datagram that beats the Start message.
    let mut pre_start: VecDeque<Vec<u8>> = VecDeque::new();
    let mut buf = [0u8; 4096];
    socket
        .set_read_timeout(Some(Duration::from_millis(100)))
        .map_err(|e| e.to_string())?;
    let wait_started = Instant::now();
    let (epoch, speed, horizon) = loop {
        if wait_started.elapsed() > Duration::from_secs(30) {
            return Err("no start message within 30s".to_string());
        }
        let n = match socket.recv_from(&mut buf) {
            Ok((n, _)) => n,
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue
            }
            Err(e) => return Err(format!("recv: {e}")),
        };
        if buf.first() == Some(&b'{') {
            if let Ok(EnvMsg::Start { epoch_us, speed, horizon_us }) =
                serde_json::from_slice::<EnvMsg>(&buf[..n])
            {
                break (epoch_us, speed, horizon_us);
            }
        }
        pre_start.push_back(buf[..n].to_vec());
    };

    let mut worker = Worker {
        node,
        station_id: config.station_id,
        socket,
        coordinator,
        peers,
        filter: InOrderFilter::new(),
        seq: SeqAllocator::new(),
        timers: Vec::new(),
        epoch,
        speed,
    };

    let mut out = Outbox::new();
    worker.node.start(0, &mut out);
    worker.drain(out);
    while let Some(datagram) = pre_start.pop_front() {
        if worker.dispatch_datagram(&datagram)? {
            return Ok(());
        }
    }

    // If the coordinator dies we still terminate, well past the horizon.
    let cap = Duration::from_micros((horizon as f64 / speed) as u64) + Duration::from_secs(10);
    let started = Instant::now();
    loop {
        if started.elapsed() > cap {
            return Err("horizon overrun without shutdown".to_string());
        }
        worker.fire_due_timers();
        let wait = worker
            .timers
            .iter()
            .map(|&(at, _)| at)
            .min()
            .map(|at| {
                let now = worker.vnow();
                Duration::from_micros((at.saturating_sub(now) as f64 / speed) as u64)
            })
            .unwrap_or(Duration::from_millis(100))
            .clamp(Duration::from_millis(1), Duration::from_millis(100));
        worker.socket.set_read_timeout(Some(wait)).map_err(|e| e.to_string())?;
        let n = match worker.socket.recv_from(&mut buf) {
            Ok((n, _)) => n,
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue
            }
            Err(e) => return Err(format!("recv: {e}")),
        };
        if worker.dispatch_datagram(&buf[..n])? {
            return Ok(());
        }
    }
}

fn build_station(scenario: &Scenario, station_id: u16) -> Option<StationNode> {
    let knobs = &scenario.knobs;
    if scenario.sbs.id.0 == station_id {
        let carrier = crate::um::CarrierConfig::new(
            scenario.sbs.arfcn,
            scenario.sbs.color_code,
            crate::um::Role::Sbs,
        )
        .ok()?;
        let registry = scenario
            .dbs
            .iter()
            .map(|d| DbsDescriptor {
                dbs_id: d.id,
                carrier: crate::um::CarrierConfig::new(
                    d.arfcn,
                    d.color_code,
                    crate::um::Role::Dbs,
                )
                .expect("validated"),
                capacity: d.capacity,
                power: d.initial_power,
                occupied: 0,
            })
            .collect();
        return Some(StationNode::Sbs(Sbs::new(
            SbsConfig {
                station_id: scenario.sbs.id,
                carrier,
                high_load_threshold: knobs.high_load_threshold,
                admission: AdmissionPolicy::Open,
            },
            registry,
        )));
    }
    let d = scenario.dbs.iter().find(|d| d.id.0 == station_id)?;
    let carrier =
        crate::um::CarrierConfig::new(d.arfcn, d.color_code, crate::um::Role::Dbs).ok()?;
    Some(StationNode::Dbs(Dbs::new(DbsConfig {
        dbs_id: d.id,
        carrier,
        capacity: d.capacity,
        wake_latency_us: knobs.wake_latency_us,
        idle_timeout_us: knobs.idle_timeout_us,
        sbs_id: scenario.sbs.id,
        initial_power: d.initial_power,
    })))
}

/// Entry point for the hidden station-worker subcommand. Returns the
/// process exit code.
pub fn station_worker_main(config_json: &str) -> i32 {
    match worker_run(config_json) {
        Ok(()) => 0,
        Err(msg) => {
            println!("!error {msg}");
            let _ = std::io::stdout().flush();
            3
        }
    }
}

// ---------------------------------------------------------------------------
// Coordinator (parent process)

enum WorkerLine {
    Line(usize, String),
    Eof(usize),
}

struct WorkerHandle {
    child: Child,
    station_id: u16,
    addr: SocketAddr,
}

/// Run a scenario over the split transport. `worker_argv` is the command
/// prefix for one station worker; the coordinator appends the JSON config
/// as the final argument (typically `[hcn_binary, "station-worker"]`).
pub fn split_run(
    scenario: &Scenario,
    opts: &SplitOptions,
    worker_argv: &[String],
) -> Result<SplitRunReport, SplitError> {
    scenario.validate()?;
    if worker_argv.is_empty() {
        return transport("empty worker command");
    }

    let socket = match UdpSocket::bind("127.0.0.1:0") {
        Ok(s) => s,
        Err(e) => return transport(format!("coordinator bind: {e}")),
    };
    let coord_addr = socket.local_addr().map_err(|e| SplitError::Transport(e.to_string()))?;

    let mut stations: Vec<(u16, u16)> = vec![(scenario.sbs.id.0, opts.sbs_port)];
    let mut dbs_ids: Vec<u16> = scenario.dbs.iter().map(|d| d.id.0).collect();
    dbs_ids.sort_unstable();
    for (k, id) in dbs_ids.iter().enumerate() {
        stations.push((*id, opts.dbs_port_base + k as u16));
    }
    let ports: Vec<(u16, String)> =
        stations.iter().map(|&(id, port)| (id, format!("127.0.0.1:{port}"))).collect();

    let scenario_text = scenario.render();
    let (tx, rx) = mpsc::channel::<WorkerLine>();
    let mut workers: Vec<WorkerHandle> = Vec::new();
    for (idx, &(station_id, port)) in stations.iter().enumerate() {
        let config = WorkerConfig {
            scenario_text: scenario_text.clone(),
            station_id,
            bind: format!("127.0.0.1:{port}"),
            coordinator: coord_addr.to_string(),
            ports: ports.clone(),
        };
        let config_json = serde_json::to_string(&config).expect("config serializes");
        let mut cmd = ProcessCommand::new(&worker_argv[0]);
        cmd.args(&worker_argv[1..])
            .arg(config_json)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        let mut child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) => {
                shutdown_workers(&socket, &mut workers);
                return transport(format!("spawn worker: {e}"));
            }
        };
        let stdout = child.stdout.take().expect("piped stdout");
        let tx = tx.clone();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                match line {
                    Ok(line) => {
                        if tx.send(WorkerLine::Line(idx, line)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(WorkerLine::Eof(idx));
        });
        let addr: SocketAddr = format!("127.0.0.1:{port}").parse().expect("fixed format");
        workers.push(WorkerHandle { child, station_id, addr });
    }
    drop(tx);

    // Every worker must report ready before the clock starts.
    let mut ready = vec![false; workers.len()];
    let mut lines: Vec<Vec<String>> = vec![Vec::new(); workers.len()];
    let ready_deadline = Instant::now() + Duration::from_secs(20);
    while ready.iter().any(|r| !r) {
        let remaining = ready_deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            shutdown_workers(&socket, &mut workers);
            return transport("workers not ready within 20s");
        }
        match rx.recv_timeout(remaining) {
            Ok(WorkerLine::Line(idx, line)) => {
                if line == "!ready" {
                    ready[idx] = true;
                } else if let Some(msg) = line.strip_prefix("!error ") {
                    let id = workers[idx].station_id;
                    shutdown_workers(&socket, &mut workers);
                    return transport(format!("station {id}: {msg}"));
                } else {
                    lines[idx].push(line);
                }
            }
            Ok(WorkerLine::Eof(idx)) => {
                let id = workers[idx].station_id;
                shutdown_workers(&socket, &mut workers);
                return transport(format!("station {id} exited before ready"));
            }
            Err(_) => {
                shutdown_workers(&socket, &mut workers);
                return transport("workers not ready within 20s");
            }
        }
    }

    let result = coordinate(scenario, opts, &socket, &workers);

    shutdown_workers(&socket, &mut workers);

    // Collect the remaining worker output.
    let mut eof = vec![false; workers.len()];
    let drain_deadline = Instant::now() + Duration::from_secs(10);
    while eof.iter().any(|e| !e) {
        let remaining = drain_deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            break;
        }
        match rx.recv_timeout(remaining) {
            Ok(WorkerLine::Line(idx, line)) => lines[idx].push(line),
            Ok(WorkerLine::Eof(idx)) => eof[idx] = true,
            Err(_) => break,
        }
    }
    for w in &mut workers {
        let _ = w.child.wait();
    }

    let coordinator_trace = result?;

    let mut merged = coordinator_trace;
    for (idx, worker_lines) in lines.iter().enumerate() {
        let mut text = String::new();
        for line in worker_lines {
            if let Some(msg) = line.strip_prefix("!error ") {
                return transport(format!("station {}: {msg}", workers[idx].station_id));
            }
            if line.starts_with('!') {
                continue;
            }
            text.push_str(line);
            text.push('\n');
        }
        let records = parse_trace(&text).map_err(|e| {
            SplitError::Transport(format!(
                "station {} wrote an unparseable trace: {e}",
                workers[idx].station_id
            ))
        })?;
        merged.extend(records);
    }
    merged.sort_by_key(|r| (r.t, r.actor));

    if let Some(path) = &opts.trace_out {
        std::fs::write(path, render_trace(&merged))
            .map_err(|e| SplitError::Transport(format!("write {}: {e}", path.display())))?;
    }

    let summary = RunSummary::from_trace(&merged);
    Ok(SplitRunReport { trace: merged, summary })
}

fn shutdown_workers(socket: &UdpSocket, workers: &mut [WorkerHandle]) {
    for w in workers.iter() {
        let bytes = serde_json::to_vec(&EnvMsg::Shutdown).expect("env messages serialize");
        let _ = socket.send_to(&bytes, w.addr);
    }
    let deadline = Instant::now() + Duration::from_secs(5);
    for w in workers.iter_mut() {
        loop {
            match w.child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if Instant::now() < deadline => {
                    std::thread::sleep(Duration::from_millis(20))
                }
                _ => {
                    let _ = w.child.kill();
                    let _ = w.child.wait();
                    break;
                }
            }
        }
    }
}

/// The coordinator's own event loop: mobiles, medium, stimuli.
fn coordinate(
    scenario: &Scenario,
    opts: &SplitOptions,
    socket: &UdpSocket,
    workers: &[WorkerHandle],
) -> Result<Vec<TraceRecord>, SplitError> {
    let speed = opts.speed;
    let horizon = scenario.knobs.horizon_us;
    let sbs_id = scenario.sbs.id;

    let station_addr: BTreeMap<u16, SocketAddr> =
        workers.iter().map(|w| (w.station_id, w.addr)).collect();
    let mut arfcn_addr: BTreeMap<u16, SocketAddr> = BTreeMap::new();
    arfcn_addr.insert(scenario.sbs.arfcn, station_addr[&sbs_id.0]);
    for d in &scenario.dbs {
        arfcn_addr.insert(d.arfcn, station_addr[&d.id.0]);
    }
    let broadcast = vec![(sbs_id, scenario.sbs.arfcn)];

    let mut ms_nodes: BTreeMap<MsId, Ms> = scenario
        .mobiles
        .iter()
        .map(|&id| (id, Ms::new(MsConfig { ms_id: id })))
        .collect();
    let mut timers: Vec<(Micros, MsId, TimerKind)> = Vec::new();
    let mut local_q: VecDeque<(MsId, Input)> = VecDeque::new();
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut stim_idx = 0;

    let epoch = mono_micros();
    for w in workers {
        let start = EnvMsg::Start { epoch_us: epoch, speed, horizon_us: horizon };
        let bytes = serde_json::to_vec(&start).expect("env messages serialize");
        socket
            .send_to(&bytes, w.addr)
            .map_err(|e| SplitError::Transport(format!("send start: {e}")))?;
    }

    let send_env = |addr: SocketAddr, msg: &EnvMsg| -> Result<(), SplitError> {
        let bytes = serde_json::to_vec(msg).expect("env messages serialize");
        socket
            .send_to(&bytes, addr)
            .map_err(|e| SplitError::Transport(format!("send: {e}")))?;
        Ok(())
    };

    let mut buf = [0u8; 4096];
    loop {
        let now = virtual_now(epoch, speed);
        if now >= horizon {
            break;
        }

        // Stimuli due now.
        while stim_idx < scenario.stimuli.len() && scenario.stimuli[stim_idx].at <= now {
            let stim = &scenario.stimuli[stim_idx];
            stim_idx += 1;
            match stim.action {
                Action::PowerOn { ms } => local_q.push_back((ms, Input::Command(Command::PowerOn))),
                Action::MoCall { ms, duration_us } => {
                    local_q.push_back((ms, Input::Command(Command::Originate { duration_us })))
                }
                Action::MtCall { ms, duration_us } => {
                    local_q
                        .push_back((ms, Input::Command(Command::ArmCallDuration { duration_us })));
                    send_env(
                        station_addr[&sbs_id.0],
                        &EnvMsg::Stimulus { command: Command::Page { ms } },
                    )?;
                }
                Action::DenyNextAppointment { dbs } => {
                    send_env(
                        station_addr[&dbs.0],
                        &EnvMsg::Stimulus { command: Command::DenyNextAppointment },
                    )?;
                }
            }
        }

        // Mobile timers due now.
        loop {
            let due = timers
                .iter()
                .enumerate()
                .filter(|(_, &(at, _, _))| at <= now)
                .min_by_key(|(_, &(at, _, _))| at)
                .map(|(i, _)| i);
            let Some(i) = due else { break };
            let (_, ms, kind) = timers.remove(i);
            local_q.push_back((ms, Input::Timer(kind)));
        }

        // Local deliveries, which may cascade (scan answers).
        while let Some((ms_id, input)) = local_q.pop_front() {
            let now = virtual_now(epoch, speed);
            let Some(node) = ms_nodes.get_mut(&ms_id) else { continue };
            let mut out = Outbox::new();
            node.handle(now, input, &mut out);
            trace.extend(out.trace);
            for (at, kind) in out.timers {
                timers.push((at, ms_id, kind));
            }
            for (to, event) in out.air {
                match to {
                    AirAddr::Medium => {
                        if let AirEvent::ScanProbe { ms } = event {
                            local_q.push_back((
                                ms,
                                Input::Air(AirEvent::ScanResult { stations: broadcast.clone() }),
                            ));
                        }
                    }
                    AirAddr::Carrier(arfcn) => {
                        if let Some(&addr) = arfcn_addr.get(&arfcn) {
                            send_env(addr, &EnvMsg::Air { to, event })?;
                        }
                    }
                    // Mobiles never address other mobiles.
                    AirAddr::Ms(_) | AirAddr::AllMs => {}
                }
            }
        }

        // Wait for station air traffic until the next deadline.
        let next_deadline = scenario.stimuli.get(stim_idx).map(|s| s.at).into_iter()
            .chain(timers.iter().map(|&(at, _, _)| at))
            .min()
            .unwrap_or(horizon)
            .min(horizon);
        let now = virtual_now(epoch, speed);
        let wait = Duration::from_micros(
            (next_deadline.saturating_sub(now) as f64 / speed) as u64,
        )
        .clamp(Duration::from_millis(1), Duration::from_millis(50));
        socket
            .set_read_timeout(Some(wait))
            .map_err(|e| SplitError::Transport(e.to_string()))?;
        match socket.recv_from(&mut buf) {
            Ok((n, _)) => {
                if let Ok(EnvMsg::Air { to, event }) = serde_json::from_slice::<EnvMsg>(&buf[..n])
                {
                    match to {
                        AirAddr::Ms(ms) => local_q.push_back((ms, Input::Air(event))),
                        AirAddr::AllMs => {
                            for &ms in ms_nodes.keys() {
                                local_q.push_back((ms, Input::Air(event.clone())));
                            }
                        }
                        AirAddr::Carrier(_) | AirAddr::Medium => {}
                    }
                }
            }
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut => {}
            Err(e) => return transport(format!("recv: {e}")),
        }
    }

    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::ServiceKind;
    use crate::wire::ControlMessage;

    #[test]
    fn monotonic_clock_advances() {
        let a = mono_micros();
        std::thread::sleep(Duration::from_millis(2));
        let b = mono_micros();
        assert!(b > a, "{b} must exceed {a}");
    }

    #[test]
    fn virtual_time_scales_by_speed() {
        let epoch = mono_micros().saturating_sub(1_000);
        let v = virtual_now(epoch, 20.0);
        assert!(v >= 20_000, "1ms real at 20x is at least 20ms virtual, got {v}");
        assert!(v < 2_000_000, "far below 2s virtual, got {v}");
    }

    // Both datagram kinds arrive on one socket; the first byte must be
    // enough to route them.
    #[test]
    fn datagram_kinds_differ_in_first_byte() {
        let env = serde_json::to_vec(&EnvMsg::Shutdown).unwrap();
        assert_eq!(env[0], b'{');

        let header = MessageHeader { sender_id: 7, seq: 1, transaction_id: 9 };
        let wire = encode(
            &header,
            &ControlMessage::ChannelAppointment { ms_id: 101, service: ServiceKind::MoCall, slot: 0 },
        );
        assert_eq!(wire[0], b'H');
        assert_ne!(wire[0], b'{');
    }

    #[test]
    fn worker_config_round_trips_through_json() {
        let config = WorkerConfig {
            scenario_text: "[knobs]\nseed = 1\n".to_string(),
            station_id: 3,
            bind: "127.0.0.1:5701".to_string(),
            coordinator: "127.0.0.1:40000".to_string(),
            ports: vec![(0, "127.0.0.1:5700".to_string()), (3, "127.0.0.1:5701".to_string())],
        };
        let json = serde_json::to_string(&config).unwrap();
        let back: WorkerConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.station_id, 3);
        assert_eq!(back.ports.len(), 2);
        assert_eq!(back.scenario_text, config.scenario_text);
    }

    #[test]
    fn env_messages_round_trip_through_json() {
        let msgs = vec![
            EnvMsg::Start { epoch_us: 123, speed: 20.0, horizon_us: 10_000_000 },
            EnvMsg::Air {
                to: AirAddr::Ms(crate::ids::MsId(101)),
                event: AirEvent::LinkConfirm { ms: crate::ids::MsId(101) },
            },
            EnvMsg::Stimulus { command: Command::DenyNextAppointment },
            EnvMsg::Shutdown,
        ];
        for msg in msgs {
            let bytes = serde_json::to_vec(&msg).unwrap();
            let back: EnvMsg = serde_json::from_slice(&bytes).unwrap();
            let again = serde_json::to_vec(&back).unwrap();
            assert_eq!(bytes, again);
        }
    }
}
