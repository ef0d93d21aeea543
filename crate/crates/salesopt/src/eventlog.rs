//! Append-only event log: one JSON record per line with fields
//! `{seq, kind, day, payload}`.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use salesopt_core::domain::{Day, FeedbackEvent, Recommendation};

use crate::config::Config;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("event log io on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("event log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("event log: {0}")]
    Encode(String),
}

/// A recommendation as served, with the bandit context it was chosen under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServedRecord {
    pub run_id: String,
    pub recommendation: Recommendation,
    pub context: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub day: Day,
    pub recommendations: usize,
    pub pool_size: usize,
    pub eligible: usize,
    pub objective: f64,
    /// Bandit updates at serving time; the bandit picks actions once this
    /// reaches the warm-up count.
    pub bandit_updates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub event: FeedbackEvent,
    /// An earlier feedback for the same (rep, account, day) is superseded.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayClosed {
    pub updates: usize,
}

/// Net weights after a day close, for checking a replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub updates: u64,
    pub learning_rate: f64,
    pub net_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    SessionStarted(Box<Config>),
    Recommendation(ServedRecord),
    RunCommitted(RunSummary),
    Feedback(FeedbackRecord),
    DayClosed(DayClosed),
    PolicySnapshot(PolicyCheckpoint),
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::SessionStarted(_) => "session_started",
            Event::Recommendation(_) => "recommendation",
            Event::RunCommitted(_) => "run_committed",
            Event::Feedback(_) => "feedback",
            Event::DayClosed(_) => "day_closed",
            Event::PolicySnapshot(_) => "policy_snapshot",
        }
    }

    fn payload(&self) -> serde_json::Result<serde_json::Value> {
        match self {
            Event::SessionStarted(c) => serde_json::to_value(c),
            Event::Recommendation(r) => serde_json::to_value(r),
            Event::RunCommitted(r) => serde_json::to_value(r),
            Event::Feedback(f) => serde_json::to_value(f),
            Event::DayClosed(d) => serde_json::to_value(d),
            Event::PolicySnapshot(p) => serde_json::to_value(p),
        }
    }

    fn from_parts(kind: &str, payload: serde_json::Value) -> Result<Self, String> {
        let e = |e: serde_json::Error| e.to_string();
        Ok(match kind {
            "session_started" => Event::SessionStarted(Box::new(serde_json::from_value(payload).map_err(e)?)),
            "recommendation" => Event::Recommendation(serde_json::from_value(payload).map_err(e)?),
            "run_committed" => Event::RunCommitted(serde_json::from_value(payload).map_err(e)?),
            "feedback" => Event::Feedback(serde_json::from_value(payload).map_err(e)?),
            "day_closed" => Event::DayClosed(serde_json::from_value(payload).map_err(e)?),
            "policy_snapshot" => Event::PolicySnapshot(serde_json::from_value(payload).map_err(e)?),
            other => return Err(format!("unknown kind {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub seq: u64,
    pub day: Day,
    pub event: Event,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    seq: u64,
    kind: String,
    day: Day,
    payload: serde_json::Value,
}

impl Record {
    pub fn to_line(&self) -> Result<String, LogError> {
        let wire = Wire {
            seq: self.seq,
            kind: self.event.kind().to_string(),
            day: self.day,
            payload: self.event.payload().map_err(|e| LogError::Encode(e.to_string()))?,
        };
        serde_json::to_string(&wire).map_err(|e| LogError::Encode(e.to_string()))
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let wire: Wire = serde_json::from_str(line).map_err(|e| e.to_string())?;
        Ok(Record { seq: wire.seq, day: wire.day, event: Event::from_parts(&wire.kind, wire.payload)? })
    }
}

/// In-memory copy of the log, optionally mirrored to a file.
#[derive(Debug, Default)]
pub struct EventLog {
    path: Option<PathBuf>,
    file: Option<File>,
    records: Vec<Record>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Creates a new log file; fails if one exists.
    pub fn create(path: &Path) -> Result<Self, LogError> {
        let file = OpenOptions::new().write(true).create_new(true).open(path).map_err(|source| io(path, source))?;
        Ok(Self { path: Some(path.to_path_buf()), file: Some(file), records: Vec::new() })
    }

    /// Reads an existing log and keeps it open for appending. A final line
    /// cut short by a crash is dropped from the file.
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let records = read_records(path)?;
        let valid_len: u64 = records.1;
        let file = OpenOptions::new().read(true).write(true).open(path).map_err(|source| io(path, source))?;
        let len = file.metadata().map_err(|source| io(path, source))?.len();
        if len != valid_len {
            log::warn!("dropping {} trailing bytes of a torn write in {}", len - valid_len, path.display());
            file.set_len(valid_len).map_err(|source| io(path, source))?;
        }
        let mut log = Self { path: Some(path.to_path_buf()), file: Some(file), records: records.0 };
        if let Some(f) = log.file.as_mut() {
            use std::io::Seek;
            f.seek(std::io::SeekFrom::End(0)).map_err(|source| io(path, source))?;
        }
        Ok(log)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn next_seq(&self) -> u64 {
        self.records.last().map_or(1, |r| r.seq + 1)
    }

    /// Appends all events with a single write, so a run is either fully on
    /// disk or cut inside its last line.
    pub fn append(&mut self, day: Day, events: Vec<Event>) -> Result<Vec<Record>, LogError> {
        let mut seq = self.next_seq();
        let mut buf = String::new();
        let mut out = Vec::with_capacity(events.len());
        for event in events {
            let r = Record { seq, day, event };
            buf.push_str(&r.to_line()?);
            buf.push('\n');
            out.push(r);
            seq += 1;
        }
        if let (Some(f), Some(p)) = (self.file.as_mut(), self.path.as_ref()) {
            f.write_all(buf.as_bytes()).map_err(|source| io(p, source))?;
            f.flush().map_err(|source| io(p, source))?;
        }
        self.records.extend(out.iter().cloned());
        Ok(out)
    }
}

fn io(path: &Path, source: std::io::Error) -> LogError {
    LogError::Io { path: path.display().to_string(), source }
}

/// Parsed records and the byte length of the well-formed prefix.
pub fn read_records(path: &Path) -> Result<(Vec<Record>, u64), LogError> {
    let file = File::open(path).map_err(|source| io(path, source))?;
    let mut reader = BufReader::new(file);
    let mut records: Vec<Record> = Vec::new();
    let mut valid = 0u64;
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|source| io(path, source))?;
        if read == 0 {
            break;
        }
        n += 1;
        let complete = line.ends_with('\n');
        match Record::from_line(line.trim_end()) {
            Ok(r) if complete => {
                let expected = records.last().map_or(1, |p| p.seq + 1);
                if r.seq != expected {
                    return Err(LogError::Corrupt { line: n, message: format!("seq {} where {expected} expected", r.seq) });
                }
                records.push(r);
                valid += read as u64;
            }
            Ok(_) => break,
            Err(_) if !complete => break,
            Err(message) => return Err(LogError::Corrupt { line: n, message }),
        }
    }
    Ok((records, valid))
}
