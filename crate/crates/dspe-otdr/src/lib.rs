//! Command-line companion for reference-based OTDR fault analysis.
//!
//! The core library models traces, tests samples, estimates parameters,
//! and answers design questions; this crate wraps it in artifacts an
//! operator touches: scenario files, trace CSVs, a keyed reference store,
//! JSON detection reports, design-curve sweeps, and a Monte Carlo
//! validation harness. Everything is deterministic given a scenario and
//! its seed.
//!
//! The modules mirror the workflow:
//!
//! * [`scenario`] — one TOML file describing network, instrument, faults;
//! * [`seed`] — reproducible stream derivation for every stochastic step;
//! * [`tracefile`] — the CSV-with-header trace format;
//! * [`store`] — the keyed, checksummed reference database;
//! * [`report`] — detect → attribute → estimate → classify;
//! * [`sweep`] — design-space curves as two-column CSV;
//! * [`validate`] — statistical suites that hold the closed forms to
//!   account;
//! * [`cli`] — argument parsing and command dispatch;
//! * [`error`] — one failure type with a stable exit-code mapping.

pub mod cli;
pub mod error;
pub mod report;
pub mod scenario;
pub mod seed;
pub mod store;
pub mod sweep;
pub mod tracefile;
pub mod validate;
