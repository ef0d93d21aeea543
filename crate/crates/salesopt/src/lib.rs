//! Files, configuration, the event-sourced service and its HTTP API on top
//! of `salesopt-core`.

pub mod commands;
pub mod config;
pub mod engine;
pub mod eventlog;
pub mod http;
pub mod service;
pub mod table;
pub mod textgen;

pub use config::Config;
pub use engine::{Engine, MetricsSnapshot, RunInfo, RunManifest};
pub use eventlog::{Event, EventLog, Record};
pub use service::{Service, ServiceError};
