//! Single-directory persistence: a metadata file plus an append-only,
//! fsynced journal of [`Event`] records (`wal.jsonl`), one JSON object per
//! line. A running server holds an exclusive lock on `LOCK`.

use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::classroom::Event;

pub const FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "textlab-store";
const META_FILE: &str = "store.json";
const WAL_FILE: &str = "wal.jsonl";
const LOCK_FILE: &str = "LOCK";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no store found in {0}")]
    NotFound(PathBuf),
    #[error("a store already exists in {0}")]
    Exists(PathBuf),
    #[error("store in {0} is locked by another process")]
    Locked(PathBuf),
    #[error("store format version {found} is not supported (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("store is corrupt at journal line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("storage is full or read-only: {0}")]
    StorageFull(String),
    #[error("storage I/O error: {0}")]
    Io(#[from] io::Error),
}

impl StoreError {
    fn from_write(err: io::Error) -> Self {
        // ENOSPC, EROFS and EDQUOT on Linux.
        let full = matches!(err.raw_os_error(), Some(28) | Some(30) | Some(122))
            || matches!(
                err.kind(),
                io::ErrorKind::PermissionDenied
                    | io::ErrorKind::StorageFull
                    | io::ErrorKind::ReadOnlyFilesystem
                    | io::ErrorKind::QuotaExceeded
            );
        if full {
            StoreError::StorageFull(err.to_string())
        } else {
            StoreError::Io(err)
        }
    }
}

/// Something that makes events durable.
pub trait Journal: Send + Sync {
    fn append(&self, event: &Event) -> Result<(), StoreError>;
}

/// Keeps events in memory. Useful for tests and throwaway classrooms.
#[derive(Debug, Default)]
pub struct MemoryJournal {
    events: Mutex<Vec<Event>>,
    fail: std::sync::atomic::AtomicBool,
}

impl MemoryJournal {
    pub fn events(&self) -> Vec<Event> {
        self.events.lock().unwrap().clone()
    }

    /// Makes every later append fail with [`StoreError::StorageFull`].
    pub fn set_failing(&self, failing: bool) {
        self.fail.store(failing, std::sync::atomic::Ordering::SeqCst);
    }
}

impl Journal for MemoryJournal {
    fn append(&self, event: &Event) -> Result<(), StoreError> {
        if self.fail.load(std::sync::atomic::Ordering::SeqCst) {
            return Err(StoreError::StorageFull("journal rejected the write".into()));
        }
        self.events.lock().unwrap().push(event.clone());
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    v: u32,
    seq: u64,
    event: Event,
}

struct Wal {
    file: File,
    seq: u64,
}

/// An open store holding the exclusive lock.
pub struct Store {
    dir: PathBuf,
    wal: Mutex<Wal>,
    _lock: File,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).finish()
    }
}

fn acquire_lock(dir: &Path) -> Result<File, StoreError> {
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(dir.join(LOCK_FILE))?;
    match file.try_lock() {
        Ok(()) => Ok(file),
        Err(TryLockError::WouldBlock) => Err(StoreError::Locked(dir.to_path_buf())),
        Err(TryLockError::Error(e)) => Err(e.into()),
    }
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    File::open(dir)?.sync_all()
}

fn read_meta(dir: &Path) -> Result<(), StoreError> {
    let path = dir.join(META_FILE);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(dir.to_path_buf())),
        Err(e) => return Err(e.into()),
    };
    let meta: Meta = serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
        line: 0,
        reason: format!("{META_FILE}: {e}"),
    })?;
    if meta.format != FORMAT_NAME {
        return Err(StoreError::Corrupt {
            line: 0,
            reason: format!("{META_FILE} names format `{}`", meta.format),
        });
    }
    if meta.version != FORMAT_VERSION {
        return Err(StoreError::UnsupportedVersion { found: meta.version });
    }
    Ok(())
}

struct Replay {
    events: Vec<Event>,
    last_seq: u64,
    /// Byte length of the journal up to the last complete record.
    valid_len: u64,
    torn_tail: bool,
}

/// Parses the journal. An unterminated, unparsable final line is a write that
/// was never acknowledged and is reported as a torn tail; any other bad line
/// is corruption.
fn replay(path: &Path) -> Result<Replay, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Ok(Replay { events: Vec::new(), last_seq: 0, valid_len: 0, torn_tail: false })
        }
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut last_seq = 0;
    let mut valid_len = 0u64;
    let mut line_no = 0;
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let terminated = buf.last() == Some(&b'\n');
        let parsed: Result<Record, String> = std::str::from_utf8(&buf)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str(s.trim_end()).map_err(|e| e.to_string()));
        match parsed {
            Ok(record) => {
                if record.v != FORMAT_VERSION {
                    return Err(StoreError::UnsupportedVersion { found: record.v });
                }
                if record.seq != last_seq + 1 {
                    return Err(StoreError::Corrupt {
                        line: line_no,
                        reason: format!("sequence {} follows {}", record.seq, last_seq),
                    });
                }
                last_seq = record.seq;
                events.push(record.event);
                valid_len += n as u64;
                if !terminated {
                    // Complete record missing only its newline.
                    return Ok(Replay { events, last_seq, valid_len, torn_tail: true });
                }
            }
            Err(_) if !terminated => {
                return Ok(Replay { events, last_seq, valid_len, torn_tail: true });
            }
            Err(reason) => return Err(StoreError::Corrupt { line: line_no, reason }),
        }
    }
    Ok(Replay { events, last_seq, valid_len, torn_tail: false })
}

impl Store {
    pub fn exists(dir: &Path) -> bool {
        dir.join(META_FILE).exists()
    }

    /// Whether another process currently holds the store's lock.
    pub fn is_locked(dir: &Path) -> bool {
        if !dir.join(LOCK_FILE).exists() {
            return false;
        }
        matches!(acquire_lock(dir), Err(StoreError::Locked(_)))
    }

    /// Creates an empty store. With `force`, an existing unlocked store in
    /// `dir` is discarded first.
    pub fn create(dir: &Path, force: bool) -> Result<Store, StoreError> {
        fs::create_dir_all(dir).map_err(StoreError::from_write)?;
        let lock = acquire_lock(dir)?;
        if Self::exists(dir) {
            if !force {
                return Err(StoreError::Exists(dir.to_path_buf()));
            }
            fs::remove_file(dir.join(META_FILE))?;
        }
        let wal_path = dir.join(WAL_FILE);
        let file = OpenOptions::new()
            .create(true)
            .truncate(true)
            .read(true)
            .write(true)
            .open(&wal_path)
            .map_err(StoreError::from_write)?;
        file.sync_all().map_err(StoreError::from_write)?;

        let meta = serde_json::to_vec_pretty(&Meta {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
        })
        .expect("meta serializes");
        let tmp = dir.join(format!("{META_FILE}.tmp"));
        {
            let mut f = File::create(&tmp).map_err(StoreError::from_write)?;
            f.write_all(&meta).map_err(StoreError::from_write)?;
            f.sync_all().map_err(StoreError::from_write)?;
        }
        fs::rename(&tmp, dir.join(META_FILE))?;
        sync_dir(dir)?;

        Ok(Store {
            dir: dir.to_path_buf(),
            wal: Mutex::new(Wal { file, seq: 0 }),
            _lock: lock,
        })
    }

    /// Opens an existing store for writing and returns its journaled events.
    /// A torn final record is cut off.
    pub fn open(dir: &Path) -> Result<(Store, Vec<Event>), StoreError> {
        read_meta(dir)?;
        let lock = acquire_lock(dir)?;
        let wal_path = dir.join(WAL_FILE);
        let replayed = replay(&wal_path)?;
        let mut file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .read(true)
            .write(true)
            .open(&wal_path)?;
        if replayed.torn_tail {
            file.set_len(replayed.valid_len)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        let store = Store {
            dir: dir.to_path_buf(),
            wal: Mutex::new(Wal { file, seq: replayed.last_seq }),
            _lock: lock,
        };
        Ok((store, replayed.events))
    }

    /// Reads the journal without taking the lock, ignoring a torn final record.
    pub fn read_events(dir: &Path) -> Result<Vec<Event>, StoreError> {
        read_meta(dir)?;
        Ok(replay(&dir.join(WAL_FILE))?.events)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl Journal for Store {
    fn append(&self, event: &Event) -> Result<(), StoreError> {
        let mut wal = self.wal.lock().unwrap_or_else(|p| p.into_inner());
        let record = Record {
            v: FORMAT_VERSION,
            seq: wal.seq + 1,
            event: event.clone(),
        };
        let mut line = serde_json::to_vec(&record).expect("events serialize");
        line.push(b'\n');
        let start = wal.file.seek(SeekFrom::End(0))?;
        let written = wal
            .file
            .write_all(&line)
            .and_then(|()| wal.file.sync_data());
        if let Err(e) = written {
            // Drop any partial record so the journal stays well-formed.
            let _ = wal.file.set_len(start);
            return Err(StoreError::from_write(e));
        }
        wal.seq += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classroom::{Role, User, UserId};

    fn event(n: u64) -> Event {
        Event::UserCreated {
            user: User {
                id: UserId(n),
                username: format!("u{n}"),
                password_hash: "x".into(),
                role: Role::Teacher,
                group_ids: Default::default(),
            },
        }
    }

    #[test]
    fn create_append_reopen() {
        let tmp = tempfile::tempdir().unwrap();
        let store = Store::create(tmp.path(), false).unwrap();
        store.append(&event(1)).unwrap();
        store.append(&event(2)).unwrap();
        assert!(Store::is_locked(tmp.path()));
        assert!(matches!(Store::open(tmp.path()), Err(StoreError::Locked(_))));
        assert_eq!(Store::read_events(tmp.path()).unwrap(), vec![event(1), event(2)]);
        drop(store);

        let (store, events) = Store::open(tmp.path()).unwrap();
        assert_eq!(events, vec![event(1), event(2)]);
        store.append(&event(3)).unwrap();
        drop(store);
        let (_, events) = Store::open(tmp.path()).unwrap();
        assert_eq!(events.len(), 3);
    }

    #[test]
    fn create_refuses_existing_store_without_force() {
        let tmp = tempfile::tempdir().unwrap();
        let store = Store::create(tmp.path(), false).unwrap();
        store.append(&event(1)).unwrap();
        drop(store);
        assert!(matches!(Store::create(tmp.path(), false), Err(StoreError::Exists(_))));
        drop(Store::create(tmp.path(), true).unwrap());
        assert!(Store::read_events(tmp.path()).unwrap().is_empty());
    }

    #[test]
    fn torn_tail_is_dropped() {
        let tmp = tempfile::tempdir().unwrap();
        let store = Store::create(tmp.path(), false).unwrap();
        store.append(&event(1)).unwrap();
        drop(store);
        let wal = tmp.path().join(WAL_FILE);
        let mut f = OpenOptions::new().append(true).open(&wal).unwrap();
        f.write_all(br#"{"v":1,"seq":2,"event":{"type":"user_cr"#).unwrap();
        drop(f);

        assert_eq!(Store::read_events(tmp.path()).unwrap().len(), 1);
        let (store, events) = Store::open(tmp.path()).unwrap();
        assert_eq!(events.len(), 1);
        store.append(&event(2)).unwrap();
        drop(store);
        let (_, events) = Store::open(tmp.path()).unwrap();
        assert_eq!(events, vec![event(1), event(2)]);
    }

    #[test]
    fn corrupt_middle_line_is_fatal() {
        let tmp = tempfile::tempdir().unwrap();
        let store = Store::create(tmp.path(), false).unwrap();
        store.append(&event(1)).unwrap();
        drop(store);
        let wal = tmp.path().join(WAL_FILE);
        let mut f = OpenOptions::new().append(true).open(&wal).unwrap();
        f.write_all(b"not json\n").unwrap();
        drop(f);
        assert!(matches!(Store::open(tmp.path()), Err(StoreError::Corrupt { line: 2, .. })));
    }

    #[test]
    fn missing_and_future_versions() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(Store::open(tmp.path()), Err(StoreError::NotFound(_))));
        fs::write(tmp.path().join(META_FILE), br#"{"format":"textlab-store","version":9}"#).unwrap();
        assert!(matches!(
            Store::open(tmp.path()),
            Err(StoreError::UnsupportedVersion { found: 9 })
        ));
    }

    #[test]
    fn memory_journal_failure_mode() {
        let j = MemoryJournal::default();
        j.append(&event(1)).unwrap();
        j.set_failing(true);
        assert!(matches!(j.append(&event(2)), Err(StoreError::StorageFull(_))));
        assert_eq!(j.events().len(), 1);
    }
}
