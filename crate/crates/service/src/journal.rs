//! Append-only session journal: a header line, then one JSON object per
//! handled command. Every append is flushed to disk before the command's
//! reply leaves the session.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use infopower_core::metrics::RuleCatalog;
use infopower_core::plant::PlantConfig;
use infopower_core::tree::DecisionTreePolicy;
use infopower_core::xai::XaiMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::protocol::ProtocolError;
use crate::session::{JournalEntry, Session};

pub const JOURNAL_SCHEMA: &str = "session-journal/v1";

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("journal line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("journal has no header")]
    MissingHeader,
    #[error("journal was written for tree {expected}, got {found}")]
    TreeMismatch { expected: String, found: String },
    #[error("replay diverged at entry {seq}")]
    Divergence { seq: u64 },
    #[error(transparent)]
    Session(#[from] ProtocolError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalHeader {
    pub schema: String,
    pub session_id: String,
    pub mode: XaiMode,
    pub tree_sha256: String,
    pub plant: PlantConfig,
}

impl JournalHeader {
    pub fn new(session: &Session, tree: &DecisionTreePolicy) -> Self {
        JournalHeader {
            schema: JOURNAL_SCHEMA.into(),
            session_id: session.id().to_string(),
            mode: session.mode(),
            tree_sha256: tree_digest(tree),
            plant: session.plant_config().clone(),
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LineRef<'a> {
    Header(&'a JournalHeader),
    Entry(&'a JournalEntry),
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(JournalHeader),
    Entry(JournalEntry),
}

fn render(line: LineRef<'_>) -> String {
    let mut s = serde_json::to_string(&line).expect("journal line serializes");
    s.push('\n');
    s
}

pub fn render_header(h: &JournalHeader) -> String {
    render(LineRef::Header(h))
}

pub fn render_entry(e: &JournalEntry) -> String {
    render(LineRef::Entry(e))
}

/// Hex SHA-256 of the tree's canonical JSON.
pub fn tree_digest(tree: &DecisionTreePolicy) -> String {
    hex::encode(Sha256::digest(tree.to_json().as_bytes()))
}

#[derive(Debug)]
pub struct Journal {
    file: File,
    path: PathBuf,
}

impl Journal {
    pub fn create(path: impl AsRef<Path>, header: &JournalHeader) -> Result<Journal, JournalError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|source| JournalError::Io { path: path.clone(), source })?;
        let mut j = Journal { file, path };
        j.write(&render_header(header))?;
        Ok(j)
    }

    /// Reopen after recovery, dropping any torn tail beyond `valid_len`.
    pub fn reopen(path: impl AsRef<Path>, valid_len: u64) -> Result<Journal, JournalError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| JournalError::Io { path: path.clone(), source };
        let file = OpenOptions::new().append(true).open(&path).map_err(io)?;
        file.set_len(valid_len).map_err(io)?;
        Ok(Journal { file, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, entry: &JournalEntry) -> Result<(), JournalError> {
        self.write(&render_entry(entry))
    }

    fn write(&mut self, line: &str) -> Result<(), JournalError> {
        let io = |source| JournalError::Io { path: self.path.clone(), source };
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.sync_data().map_err(io)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovered {
    pub header: JournalHeader,
    pub entries: Vec<JournalEntry>,
    /// Bytes up to the end of the last complete line.
    pub valid_len: u64,
    /// A partially written last line was found and ignored.
    pub torn_tail: bool,
}

pub fn parse_journal(text: &str) -> Result<Recovered, JournalError> {
    let mut header = None;
    let mut entries = Vec::new();
    let mut valid_len = 0u64;
    let mut torn_tail = false;
    let mut rest = text;
    let mut n = 0;
    while !rest.is_empty() {
        n += 1;
        let Some(end) = rest.find('\n') else {
            torn_tail = true;
            break;
        };
        let raw = &rest[..end];
        rest = &rest[end + 1..];
        let line: Line = serde_json::from_str(raw)
            .map_err(|e| JournalError::Parse { line: n, message: e.to_string() })?;
        match line {
            Line::Header(h) if n == 1 => header = Some(h),
            Line::Entry(e) if header.is_some() => entries.push(e),
            _ => {
                return Err(JournalError::Parse { line: n, message: "unexpected line kind".into() })
            }
        }
        valid_len += end as u64 + 1;
    }
    let header = header.ok_or(JournalError::MissingHeader)?;
    Ok(Recovered { header, entries, valid_len, torn_tail })
}

pub fn read_journal(path: impl AsRef<Path>) -> Result<Recovered, JournalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| JournalError::Io { path: path.to_path_buf(), source })?;
    parse_journal(&text)
}

/// Rebuild a session by feeding it the journaled commands again; every
/// regenerated entry must equal the stored one.
pub fn replay(
    recovered: &Recovered,
    tree: Arc<DecisionTreePolicy>,
    catalog: Arc<RuleCatalog>,
) -> Result<Session, JournalError> {
    let h = &recovered.header;
    let found = tree_digest(&tree);
    if found != h.tree_sha256 {
        return Err(JournalError::TreeMismatch { expected: h.tree_sha256.clone(), found });
    }
    let mut session = Session::new(h.session_id.clone(), h.mode, h.plant.clone(), tree, catalog)?;
    for stored in &recovered.entries {
        let handled = session.handle(stored.command.clone());
        if handled.entry.as_ref() != Some(stored) {
            return Err(JournalError::Divergence { seq: stored.seq });
        }
    }
    Ok(session)
}
