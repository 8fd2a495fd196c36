//! Simulator and protocol library for a cellular layout that splits control
//! from traffic: one always-on signaling station owns synchronization,
//! broadcast and paging, while data stations carry calls and sleep whenever
//! nobody needs them.
//!
//! The pieces, bottom up:
//!
//! - [`um`]: the radio-facing vocabulary. Logical channels, the four legal
//!   channel combinations, which side of the split owns each channel, TDMA
//!   frame timing.
//! - [`wire`]: the binary coordination protocol between the signaling
//!   station and its data stations. Big-endian frames, six message kinds,
//!   per-channel sequence numbers with an in-order delivery filter.
//! - [`ids`], [`trace`]: shared identifiers and the line-oriented trace
//!   format every run emits (`t=... actor=... verb=... subject=... k=v`).
//! - [`entity`]: the three state machines. A signaling station that admits,
//!   pages and appoints; data stations that accept links, report load,
//!   sleep when idle and wake on command; mobiles that scan, camp, call and
//!   hang up. All of them speak through an [`entity::Outbox`] and never do
//!   their own I/O, so the same code runs under both transports.
//! - [`scenario`]: the `.hcn-scn` file format describing stations, mobiles
//!   and timed stimuli, plus a builder and a seeded stress generator.
//! - [`engine`]: the in-process deterministic discrete-event simulator.
//!   Same scenario, same trace, byte for byte.
//! - [`split`]: the same scenario with every base station in its own OS
//!   process, coordinating over UDP loopback in the wire format, mobiles
//!   hosted by the parent. Traces come back logically equivalent to the
//!   in-process run.
//! - [`energy`]: per-station time-in-state and joule accounting.
//! - [`check`]: conformance checking of traces against the call-flow
//!   templates, and transport-equivalence comparison.
//! - [`cli`]: the `hcn` binary (`run`, `check`, `split-run`, `validate`).
//!
//! The crate-level re-exports cover the common path: parse a scenario, run
//! it, check the trace.

pub mod check;
pub mod cli;
pub mod energy;
pub mod engine;
pub mod entity;
pub mod ids;
pub mod scenario;
pub mod split;
pub mod trace;
pub mod um;
pub mod wire;

pub use check::{check_template, check_trace, transport_equivalent, CheckOutcome, Template};
pub use engine::{run_scenario, RunReport, RunSummary, Sim};
pub use scenario::{Scenario, ScenarioBuilder};
pub use split::{split_run, SplitOptions, SplitRunReport};
pub use trace::{parse_trace, render_trace, TraceRecord, TraceVerb};
