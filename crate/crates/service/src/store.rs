//! One workspace plus its append-only JSON-lines log.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use gm_core::osw::{ChangesetId, NewNode, NodeId, OswError, OswNode, WayId, Workspace};

pub const LOG_EXTENSION: &str = "jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Osw(#[from] OswError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("workspace log write failed earlier; restart to replay the log")]
    Poisoned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogEntry {
    OpenChangeset {
        changeset_id: ChangesetId,
        user_id: String,
        at: f64,
    },
    AddNode {
        node: OswNode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_key: Option<String>,
    },
    CloseChangeset {
        changeset_id: ChangesetId,
        user_id: String,
        at: f64,
        way_id: Option<WayId>,
    },
}

struct Log {
    path: PathBuf,
    file: File,
}

pub struct WorkspaceStore {
    id: String,
    ws: Workspace,
    client_keys: HashMap<(ChangesetId, String), NodeId>,
    log: Option<Log>,
    poisoned: bool,
}

pub fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.{LOG_EXTENSION}"))
}

impl WorkspaceStore {
    pub fn in_memory(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ws: Workspace::new(),
            client_keys: HashMap::new(),
            log: None,
            poisoned: false,
        }
    }

    /// Opens or creates `dir/<id>.jsonl` and replays it. A final line without
    /// its newline is an interrupted append and is cut off.
    pub fn open(dir: &Path, id: &str) -> Result<Self, StoreError> {
        let path = log_path(dir, id);
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(dir).map_err(io_err)?;
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        let mut store = Self::in_memory(id);
        let mut reader = BufReader::new(&file);
        let mut good_len = 0u64;
        let mut line = String::new();
        let mut n = 0;
        loop {
            line.clear();
            let read = reader.read_line(&mut line).map_err(io_err)?;
            if read == 0 {
                break;
            }
            n += 1;
            if !line.ends_with('\n') {
                tracing::warn!(path = %path.display(), line = n, "dropping interrupted log line");
                break;
            }
            let corrupt = |message: String| StoreError::Corrupt {
                path: path.clone(),
                line: n,
                message,
            };
            let entry: LogEntry =
                serde_json::from_str(line.trim_end()).map_err(|e| corrupt(e.to_string()))?;
            store.apply(entry).map_err(|e| corrupt(e.to_string()))?;
            good_len += read as u64;
        }
        drop(reader);
        if file.metadata().map_err(io_err)?.len() != good_len {
            file.set_len(good_len).map_err(io_err)?;
            file.seek(SeekFrom::End(0)).map_err(io_err)?;
        }
        store.log = Some(Log { path, file });
        Ok(store)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    fn apply(&mut self, entry: LogEntry) -> Result<(), String> {
        match entry {
            LogEntry::OpenChangeset {
                changeset_id,
                user_id,
                at,
            } => {
                let got = self
                    .ws
                    .open_changeset(&user_id, at)
                    .map_err(|e| e.to_string())?;
                if got != changeset_id {
                    return Err(format!("changeset id {got} replayed as {changeset_id}"));
                }
            }
            LogEntry::AddNode { node, client_key } => {
                let cs = node.changeset_id;
                let id = self.ws.insert_node(cs, node).map_err(|e| e.to_string())?;
                if let Some(k) = client_key {
                    self.client_keys.insert((cs, k), id);
                }
            }
            LogEntry::CloseChangeset {
                changeset_id,
                user_id,
                at,
                way_id,
            } => {
                let got = self
                    .ws
                    .close_changeset(changeset_id, &user_id, at)
                    .map_err(|e| e.to_string())?;
                if got != way_id {
                    return Err(format!("way {got:?} replayed as {way_id:?}"));
                }
            }
        }
        Ok(())
    }

    fn append(&mut self, entry: &LogEntry) -> Result<(), StoreError> {
        let Some(log) = &mut self.log else {
            return Ok(());
        };
        let mut line = serde_json::to_string(entry).expect("log entries serialize");
        line.push('\n');
        let res = log
            .file
            .write_all(line.as_bytes())
            .and_then(|()| log.file.sync_data());
        res.map_err(|source| {
            self.poisoned = true;
            StoreError::Io {
                path: log.path.clone(),
                source,
            }
        })
    }

    fn writable(&self) -> Result<(), StoreError> {
        if self.poisoned {
            Err(StoreError::Poisoned)
        } else {
            Ok(())
        }
    }

    pub fn open_changeset(&mut self, user_id: &str, at: f64) -> Result<ChangesetId, StoreError> {
        self.writable()?;
        let changeset_id = self.ws.open_changeset(user_id, at)?;
        self.append(&LogEntry::OpenChangeset {
            changeset_id,
            user_id: user_id.to_string(),
            at,
        })?;
        Ok(changeset_id)
    }

    /// Returns the node id and whether the client key had been seen before.
    pub fn add_node(
        &mut self,
        cs: ChangesetId,
        user_id: &str,
        node: NewNode,
        client_key: Option<String>,
    ) -> Result<(NodeId, bool), StoreError> {
        self.writable()?;
        if let Some(k) = &client_key {
            if let Some(&id) = self.client_keys.get(&(cs, k.clone())) {
                if self.ws.nodes()[&id].user_id != user_id {
                    return Err(OswError::NotOwner(cs).into());
                }
                return Ok((id, true));
            }
        }
        let id = self.ws.add_node(cs, user_id, node)?;
        let stored = self.ws.nodes()[&id].clone();
        self.append(&LogEntry::AddNode {
            node: stored,
            client_key: client_key.clone(),
        })?;
        if let Some(k) = client_key {
            self.client_keys.insert((cs, k), id);
        }
        Ok((id, false))
    }

    pub fn close_changeset(
        &mut self,
        cs: ChangesetId,
        user_id: &str,
        at: f64,
    ) -> Result<Option<WayId>, StoreError> {
        self.writable()?;
        let way_id = self.ws.close_changeset(cs, user_id, at)?;
        self.append(&LogEntry::CloseChangeset {
            changeset_id: cs,
            user_id: user_id.to_string(),
            at,
            way_id,
        })?;
        Ok(way_id)
    }
}
