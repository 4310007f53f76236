use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::corpus::SCHEMA_VERSION;

const KIND: &str = "llm_cache";

/// One cached exchange, one per line of the cache file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub request_digest: String,
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    schema_version: u32,
}

/// Content-addressed response store. Lookups take a shared lock; inserts are
/// appended to the backing file under a writer mutex.
pub struct ResponseCache {
    entries: RwLock<HashMap<String, CacheRecord>>,
    file: Option<(PathBuf, Mutex<()>)>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self { entries: RwLock::new(HashMap::new()), file: None }
    }

    /// Opens (or creates on first insert) a cache file.
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                if i == 0 {
                    let h: Header = serde_json::from_str(&line).map_err(invalid)?;
                    if h.kind != KIND || h.schema_version != SCHEMA_VERSION {
                        return Err(io::Error::new(
                            io::ErrorKind::InvalidData,
                            format!("{}: not a v{SCHEMA_VERSION} response cache", path.display()),
                        ));
                    }
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line).map_err(invalid)?;
                entries.insert(rec.key.clone(), rec);
            }
        }
        Ok(Self { entries: RwLock::new(entries), file: Some((path, Mutex::new(()))) })
    }

    pub fn get(&self, key: &str) -> Option<CacheRecord> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, record: CacheRecord) -> io::Result<()> {
        if let Some((path, lock)) = &self.file {
            let _guard = lock.lock().expect("cache writer");
            if self.get(&record.key).is_some() {
                return Ok(());
            }
            let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let mut buf = String::new();
            if fresh {
                buf.push_str(&header_line());
            }
            buf.push_str(&serde_json::to_string(&record).map_err(invalid)?);
            buf.push('\n');
            f.write_all(buf.as_bytes())?;
        }
        self.entries
            .write()
            .expect("cache lock")
            .entry(record.key.clone())
            .or_insert(record);
        Ok(())
    }

    /// Rewrites the backing file sorted by key, so the file content no longer
    /// depends on the order in which concurrent calls completed.
    pub fn compact(&self) -> io::Result<()> {
        let Some((path, lock)) = &self.file else {
            return Ok(());
        };
        let _guard = lock.lock().expect("cache writer");
        let entries = self.entries.read().expect("cache lock");
        let mut records: Vec<&CacheRecord> = entries.values().collect();
        records.sort_by(|a, b| a.key.cmp(&b.key));
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            w.write_all(header_line().as_bytes())?;
            for r in records {
                serde_json::to_writer(&mut w, r).map_err(invalid)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        std::fs::rename(tmp, path)
    }
}

fn header_line() -> String {
    let h = Header { kind: KIND.into(), schema_version: SCHEMA_VERSION };
    format!("{}\n", serde_json::to_string(&h).expect("header serializes"))
}

fn invalid(e: serde_json::Error) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(key: &str) -> CacheRecord {
        CacheRecord {
            key: key.into(),
            request_digest: "d".into(),
            text: format!("reply {key}"),
            prompt_tokens: 1,
            completion_tokens: 2,
            truncated: false,
        }
    }

    #[test]
    fn reopen_sees_inserted_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let c = ResponseCache::open(&path).unwrap();
        c.insert(rec("b")).unwrap();
        c.insert(rec("a")).unwrap();
        c.insert(rec("a")).unwrap();
        let again = ResponseCache::open(&path).unwrap();
        assert_eq!(again.len(), 2);
        assert_eq!(again.get("a").unwrap().text, "reply a");
    }

    #[test]
    fn compact_sorts_by_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let c = ResponseCache::open(&path).unwrap();
        for k in ["c", "a", "b"] {
            c.insert(rec(k)).unwrap();
        }
        c.compact().unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        let keys: Vec<String> = body
            .lines()
            .skip(1)
            .map(|l| serde_json::from_str::<CacheRecord>(l).unwrap().key)
            .collect();
        assert_eq!(keys, ["a", "b", "c"]);
    }

    #[test]
    fn foreign_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "{\"kind\":\"review\",\"schema_version\":1}\n").unwrap();
        assert!(ResponseCache::open(&path).is_err());
    }
}
