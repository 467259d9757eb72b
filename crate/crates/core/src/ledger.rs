//! The append-only event log and its newline-delimited JSON form.
//!
//! One event per line: `{"seq":0,"at":…,"house":"h1","kind":"ResidentAdded","payload":{…}}`.
//! Sequence numbers are dense from zero and timestamps never decrease.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::events::EventBody;
use crate::ids::HouseId;
use crate::time::Timestamp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: Timestamp,
    pub house: HouseId,
    #[serde(flatten)]
    pub body: EventBody,
}

/// Durable sink for committed events. `append` must not return until the
/// events are persisted.
pub trait Journal: Send {
    fn append(&mut self, events: &[Event]) -> io::Result<()>;
}

/// Journal that keeps nothing; the engine's in-memory log is the only copy.
#[derive(Debug, Default)]
pub struct NullJournal;

impl Journal for NullJournal {
    fn append(&mut self, _events: &[Event]) -> io::Result<()> {
        Ok(())
    }
}

/// Checks that `next` may follow `prev`.
pub fn check_order(prev: Option<(u64, Timestamp)>, next: &Event) -> Result<()> {
    let (expected, last_at) = match prev {
        Some((seq, at)) => (seq + 1, at),
        None => (0, Timestamp(0)),
    };
    if next.seq != expected {
        return Err(EngineError::CorruptLog(format!(
            "sequence gap: expected {expected}, found {}",
            next.seq
        )));
    }
    if next.at < last_at {
        return Err(EngineError::CorruptLog(format!(
            "timestamp regression at seq {}: {} < {}",
            next.seq, next.at, last_at
        )));
    }
    Ok(())
}

pub fn to_json_line(event: &Event) -> String {
    serde_json::to_string(event).expect("events serialize")
}

pub fn write_ndjson<W: Write>(mut w: W, events: &[Event]) -> io::Result<()> {
    for e in events {
        w.write_all(to_json_line(e).as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Parses a log strictly; any malformed line is `CorruptLog`.
pub fn read_ndjson<R: BufRead>(r: R) -> Result<Vec<Event>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| EngineError::StoreUnavailable(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: Event = serde_json::from_str(&line)
            .map_err(|e| EngineError::CorruptLog(format!("line {}: {e}", i + 1)))?;
        out.push(ev);
    }
    Ok(out)
}

/// Parses a log written by a process that may have died mid-write: a final
/// line without a terminating newline is dropped. Returns the events and the
/// byte length of the intact prefix.
pub fn read_ndjson_recovering(bytes: &[u8]) -> Result<(Vec<Event>, usize)> {
    let intact = match bytes.iter().rposition(|b| *b == b'\n') {
        Some(i) => i + 1,
        None => 0,
    };
    let events = read_ndjson(&bytes[..intact])?;
    Ok((events, intact))
}
