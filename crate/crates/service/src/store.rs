//! On-disk layout and the per-session event log.
//!
//! ```text
//! <data_dir>/LOCK
//! <data_dir>/sessions/<id>/events.jsonl    one PersistedEvent per line
//! <data_dir>/sessions/<id>/snapshot.json   latest snapshot (optional)
//! ```
//!
//! The log is append-only and never rewritten, except that a torn trailing
//! line left by a crash is cut off when the log is opened. A snapshot records
//! the sequence number it covers; loading starts from it and applies the
//! rest of the log. Imported sessions start from a snapshot at sequence 0.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use intentflow_core::{SessionEvent, SessionId, SessionState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("data directory {0} is in use by another service")]
    Locked(PathBuf),
    #[error("{path}:{line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("invalid session id {0:?}")]
    InvalidId(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// One line of the event log: everything one accepted request changed. A
/// panel edit that regenerates carries the edit and the new page together,
/// so a crash can never keep one without the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedEvent {
    pub seq: u64,
    pub events: Vec<SessionEvent>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    document: serde_json::Value,
}

/// Session ids become directory names.
pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// The data directory, held exclusively for the life of this value.
#[derive(Debug)]
pub struct DataDir {
    root: PathBuf,
    _lock: File,
}

impl DataDir {
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(root.join("sessions")).map_err(io(root))?;
        let lock_path = root.join("LOCK");
        let lock = OpenOptions::new().create(true).truncate(false).write(true).open(&lock_path).map_err(io(&lock_path))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(std::fs::TryLockError::WouldBlock) => return Err(StoreError::Locked(root.to_path_buf())),
            Err(std::fs::TryLockError::Error(e)) => return Err(StoreError::Io { path: lock_path, source: e }),
        }
        Ok(DataDir { root: root.to_path_buf(), _lock: lock })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    /// Ids of every stored session, sorted.
    pub fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("sessions");
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(io(&dir))? {
            let entry = entry.map_err(io(&dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if entry.path().is_dir() && valid_session_id(&name) {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }
}

/// Append handle on one session's log.
#[derive(Debug)]
pub struct EventLog {
    dir: PathBuf,
    file: File,
    next_seq: u64,
    since_snapshot: u64,
}

impl EventLog {
    /// Creates the session directory and an empty log. With `base`, the
    /// session starts from that state (an import) instead of empty.
    pub fn create(dir: &Path, base: Option<&SessionState>) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        if let Some(state) = base {
            write_snapshot(dir, 0, state)?;
        }
        let path = dir.join(LOG_FILE);
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        Ok(EventLog { dir: dir.to_path_buf(), file, next_seq: 1, since_snapshot: 0 })
    }

    /// Opens an existing session: cuts a torn trailing line, then rebuilds
    /// the state from the snapshot (if any) and the rest of the log.
    pub fn open(dir: &Path, id: &str) -> Result<(Self, SessionState, Vec<PersistedEvent>), StoreError> {
        let path = dir.join(LOG_FILE);
        let events = read_log(&path)?;
        let snapshot_path = dir.join(SNAPSHOT_FILE);
        let (base_seq, mut state) = if snapshot_path.exists() {
            let text = std::fs::read_to_string(&snapshot_path).map_err(io(&snapshot_path))?;
            let corrupt = |message: String| StoreError::Corrupt { path: snapshot_path.clone(), line: 1, message };
            let snap: Snapshot = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
            let state = SessionState::from_document_json(&snap.document.to_string()).map_err(|e| corrupt(e.to_string()))?;
            (snap.seq, state)
        } else {
            (0, SessionState::with_id(SessionId(id.to_string())))
        };
        for (k, e) in events.iter().enumerate() {
            if e.seq <= base_seq {
                continue;
            }
            for event in &e.events {
                state.apply(event).map_err(|err| StoreError::Corrupt {
                    path: path.clone(),
                    line: k + 1,
                    message: format!("record {} does not apply: {err}", e.seq),
                })?;
            }
        }
        let next_seq = events.last().map_or(base_seq, |e| e.seq.max(base_seq)) + 1;
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        let since_snapshot = events.iter().filter(|e| e.seq > base_seq).count() as u64;
        Ok((EventLog { dir: dir.to_path_buf(), file, next_seq, since_snapshot }, state, events))
    }

    /// Appends one record and syncs it to disk. Returns its sequence number.
    pub fn append(&mut self, events: &[SessionEvent]) -> Result<u64, StoreError> {
        let seq = self.next_seq;
        let mut line =
            serde_json::to_string(&PersistedEvent { seq, events: events.to_vec() }).expect("event serializes");
        line.push('\n');
        let path = self.dir.join(LOG_FILE);
        let before = self.file.metadata().map_err(io(&path))?.len();
        if let Err(e) = self.file.write_all(line.as_bytes()).and_then(|()| self.file.sync_data()) {
            // Leave no partial line behind for the next append to follow.
            let _ = self.file.set_len(before);
            return Err(StoreError::Io { path, source: e });
        }
        self.next_seq += 1;
        self.since_snapshot += 1;
        Ok(seq)
    }

    /// Writes a snapshot of `state` (which must reflect every appended
    /// event) once `every` events have accumulated since the last one.
    pub fn maybe_snapshot(&mut self, state: &SessionState, every: u64) -> Result<(), StoreError> {
        if every > 0 && self.since_snapshot >= every {
            write_snapshot(&self.dir, self.next_seq - 1, state)?;
            self.since_snapshot = 0;
        }
        Ok(())
    }

    pub fn last_seq(&self) -> u64 {
        self.next_seq - 1
    }
}

fn write_snapshot(dir: &Path, seq: u64, state: &SessionState) -> Result<(), StoreError> {
    let document: serde_json::Value = serde_json::from_str(&state.to_document_json()).expect("document is json");
    let body = serde_json::to_string(&Snapshot { seq, document }).expect("snapshot serializes");
    let path = dir.join(SNAPSHOT_FILE);
    let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
    std::fs::write(&tmp, body).map_err(io(&tmp))?;
    std::fs::rename(&tmp, &path).map_err(io(&path))
}

/// Reads every complete record. A final line that does not parse is a
/// write torn by a crash: it is cut from the file. A bad line anywhere else
/// is corruption.
pub fn read_log(path: &Path) -> Result<Vec<PersistedEvent>, StoreError> {
    let mut file = match OpenOptions::new().read(true).write(true).open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(StoreError::Io { path: path.to_path_buf(), source: e }),
    };
    let mut lines = Vec::new();
    {
        let mut reader = BufReader::new(&mut file);
        let mut offset = 0u64;
        loop {
            let mut buf = Vec::new();
            let n = reader.read_until(b'\n', &mut buf).map_err(io(path))?;
            if n == 0 {
                break;
            }
            lines.push((offset, buf));
            offset += n as u64;
        }
    }
    let mut events = Vec::with_capacity(lines.len());
    let total = lines.len();
    for (k, (offset, buf)) in lines.into_iter().enumerate() {
        let complete = buf.last() == Some(&b'\n');
        match serde_json::from_slice::<PersistedEvent>(&buf) {
            Ok(e) if complete => {
                if events.last().is_some_and(|p: &PersistedEvent| e.seq <= p.seq) {
                    return Err(StoreError::Corrupt { path: path.to_path_buf(), line: k + 1, message: "sequence numbers must increase".into() });
                }
                events.push(e);
            }
            _ if k + 1 == total => {
                tracing::warn!(path = %path.display(), line = k + 1, "dropping torn trailing record");
                file.set_len(offset).map_err(io(path))?;
                file.seek(SeekFrom::End(0)).map_err(io(path))?;
                file.sync_data().map_err(io(path))?;
            }
            Ok(_) => unreachable!("only the last line can lack a newline"),
            Err(e) => {
                return Err(StoreError::Corrupt { path: path.to_path_buf(), line: k + 1, message: e.to_string() });
            }
        }
    }
    Ok(events)
}
