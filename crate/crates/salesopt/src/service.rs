//! Pipeline orchestration over the engine and its event log.
//!
//! Writes (runs and feedback) hold the log lock for their whole duration,
//! so they are serialized and at most one run is in flight. Readers take
//! the engine read lock and never see a half-applied run.

use std::path::Path;
use std::sync::{Mutex, RwLock};

use salesopt_core::domain::{Day, FeedbackEvent, Recommendation, RepId};

use crate::config::Config;
use crate::engine::{Engine, EngineError, FeedbackAck, MetricsSnapshot, RunInfo};
use crate::eventlog::{Event, EventLog, LogError};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("service state poisoned by an earlier panic")]
    Poisoned,
}

pub struct Service {
    engine: RwLock<Engine>,
    log: Mutex<EventLog>,
}

impl Service {
    /// Fresh session; the log starts with the config snapshot.
    pub fn create(config: Config, log: EventLog) -> Result<Self, ServiceError> {
        let mut engine = Engine::new(config.clone())?;
        engine.set_artifacts(artifacts(&log));
        let mut log = log;
        log.append(0, vec![Event::SessionStarted(Box::new(config))])?;
        Ok(Self { engine: RwLock::new(engine), log: Mutex::new(log) })
    }

    pub fn in_memory(config: Config) -> Result<Self, ServiceError> {
        Self::create(config, EventLog::in_memory())
    }

    /// Opens a log file: replays it if it exists, else starts a session.
    pub fn open_or_create(path: &Path, config: Config) -> Result<Self, ServiceError> {
        if path.exists() {
            let log = EventLog::open(path)?;
            let mut engine = Engine::replay(log.records())?;
            engine.set_artifacts(artifacts(&log));
            Ok(Self { engine: RwLock::new(engine), log: Mutex::new(log) })
        } else {
            Self::create(config, EventLog::create(path)?)
        }
    }

    /// Returns `f`'s output and the sequence number of the last record.
    fn write<T>(&self, f: impl FnOnce(&Engine) -> Result<(Day, Vec<Event>, T), ServiceError>) -> Result<(T, u64), ServiceError> {
        let mut log = self.log.lock().map_err(|_| ServiceError::Poisoned)?;
        let (day, events, out) = {
            let engine = self.engine.read().map_err(|_| ServiceError::Poisoned)?;
            f(&engine)?
        };
        let records = log.append(day, events)?;
        let mut engine = self.engine.write().map_err(|_| ServiceError::Poisoned)?;
        for r in &records {
            engine.apply(r);
        }
        Ok((out, records.last().map_or(0, |r| r.seq)))
    }

    /// Closes the open day and serves the next one.
    pub fn run_pipeline(&self) -> Result<RunInfo, ServiceError> {
        let (run_id, _) = self.write(|engine| {
            let (day, events) = engine.plan_next_run()?;
            let run_id = match events.last() {
                Some(Event::RunCommitted(s)) => s.run_id.clone(),
                _ => unreachable!("a run plan ends with its commit"),
            };
            Ok((day, events, run_id))
        })?;
        Ok(self.read()?.run(&run_id)?.clone())
    }

    pub fn serve_recommendations(&self, rep: RepId) -> Result<Vec<Recommendation>, ServiceError> {
        Ok(self.read()?.recommendations_for(rep)?.to_vec())
    }

    pub fn ingest_feedback(&self, event: FeedbackEvent) -> Result<FeedbackAck, ServiceError> {
        let (duplicate, seq) = self.write(|engine| {
            let e = engine.plan_feedback(&event)?;
            let duplicate = matches!(&e, Event::Feedback(f) if f.duplicate);
            Ok((event.t, vec![e], duplicate))
        })?;
        Ok(FeedbackAck { seq, reward: event.feedback.reward(), duplicate })
    }

    pub fn metrics_snapshot(&self) -> Result<MetricsSnapshot, ServiceError> {
        Ok(self.read()?.metrics())
    }

    pub fn run_info(&self, id: &str) -> Result<RunInfo, ServiceError> {
        Ok(self.read()?.run(id)?.clone())
    }

    pub fn read(&self) -> Result<std::sync::RwLockReadGuard<'_, Engine>, ServiceError> {
        self.engine.read().map_err(|_| ServiceError::Poisoned)
    }

    /// Rebuilds an engine from this service's log.
    pub fn replay(&self) -> Result<Engine, ServiceError> {
        let log = self.log.lock().map_err(|_| ServiceError::Poisoned)?;
        Ok(Engine::replay(log.records())?)
    }

    pub fn log_lines(&self) -> Result<Vec<String>, ServiceError> {
        let log = self.log.lock().map_err(|_| ServiceError::Poisoned)?;
        log.records().iter().map(|r| r.to_line().map_err(ServiceError::from)).collect()
    }
}

fn artifacts(log: &EventLog) -> Vec<String> {
    log.path().map(|p| vec![p.display().to_string()]).unwrap_or_default()
}
