//! The durable event store: one NDJSON file, appended and fsynced per
//! command batch.
//!
//! A process killed mid-append can leave a final line without its newline.
//! That batch was never acknowledged, so [`open`] drops it and truncates the
//! file back to the last complete line.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use commons_core::ledger::{read_ndjson_recovering, to_json_line};
use commons_core::{EngineError, Event, Journal};

pub struct FileJournal {
    file: File,
}

impl Journal for FileJournal {
    fn append(&mut self, events: &[Event]) -> io::Result<()> {
        let mut buf = Vec::new();
        for e in events {
            buf.extend_from_slice(to_json_line(e).as_bytes());
            buf.push(b'\n');
        }
        self.file.write_all(&buf)?;
        self.file.sync_data()
    }
}

/// Opens (creating if needed) the log at `path`, returning its intact events
/// and a journal positioned to append after them.
pub fn open(path: &Path) -> Result<(Vec<Event>, FileJournal), EngineError> {
    let unavailable = |e: io::Error| EngineError::StoreUnavailable(format!("{}: {e}", path.display()));
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(unavailable(e)),
    };
    let (events, intact) = read_ndjson_recovering(&bytes)?;
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(unavailable)?;
    if intact < bytes.len() {
        tracing::warn!(dropped = bytes.len() - intact, "discarding torn tail of event log");
        file.set_len(intact as u64).map_err(unavailable)?;
        file.sync_data().map_err(unavailable)?;
    }
    Ok((events, FileJournal { file }))
}
