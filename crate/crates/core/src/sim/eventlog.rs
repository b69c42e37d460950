use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::DropReason;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Issue,
    Serve,
    Drop,
}

/// One row of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub time: f64,
    pub event: EventKind,
    pub query: String,
    pub user: u64,
    pub segment: u32,
    pub region: Option<u64>,
    /// Region segment count for serves.
    pub size: Option<usize>,
    pub reason: Option<DropReason>,
    /// Virtual seconds from issue to outcome.
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub rows: Vec<LogRow>,
}

impl EventLog {
    pub fn push(&mut self, row: LogRow) {
        self.rows.push(row);
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.rows.iter().filter(|r| r.event == kind).count()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Report(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::Report(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_csv()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<LogRow>, _>>()
            .map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
        Ok(EventLog { rows })
    }
}
