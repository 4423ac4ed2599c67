//! Core engine for sensing water intake from a scale, pacing hydration against
//! a daily goal, scheduling interventions and measuring how often each kind of
//! intervention is followed by a sip.
//!
//! The modules are layered bottom-up:
//!
//! * [`sensing`] turns a weight-sample stream into sip / refill events.
//! * [`hydration`] derives the hydration level, prompt band and feedback tier.
//! * [`scheduler`] decides when to notify and when the feedback tier changed.
//! * [`eventlog`] is the append-only record file and its history queries.
//! * [`analysis`] computes effectiveness windows, chi-square tests and phase summaries.
//! * [`simulator`] generates labelled weight traces and synthetic study logs.
//! * [`engine`] wires the above together for the daemon.
//!
//! Batch work (effectiveness counting, trace generation, batch detection) runs
//! on rayon when the `parallel` feature is enabled and falls back to plain
//! iterators otherwise. See [`exec::Execution`].

pub mod analysis;
pub mod engine;
pub mod eventlog;
pub mod exec;
pub mod hydration;
pub mod kv;
pub mod scheduler;
pub mod sensing;
pub mod simulator;
pub mod time;

pub use exec::Execution;
