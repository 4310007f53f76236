//! Versioned artifact files.
//!
//! Record streams are line-delimited JSON: a header line carrying the artifact
//! kind and schema version, then one record per line. Single documents
//! (taxonomies, models, snapshots) are one JSON object wrapping the payload
//! with the same header fields.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// A persistable pipeline artifact.
pub trait Artifact: Serialize + DeserializeOwned {
    const KIND: &'static str;
}

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: missing artifact header")]
    MissingHeader { path: PathBuf },
    #[error("{path}: schema version {found}, this build reads version {expected}")]
    SchemaVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: artifact kind `{found}`, expected `{expected}`")]
    KindMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    schema_version: u32,
}

#[derive(Serialize)]
struct DocumentOut<'a, T> {
    kind: &'a str,
    schema_version: u32,
    data: &'a T,
}

#[derive(Deserialize)]
struct DocumentIn<T> {
    kind: String,
    schema_version: u32,
    data: T,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_header(path: &Path, kind: &str, version: u32, expected: &str) -> Result<(), PersistError> {
    if version != SCHEMA_VERSION {
        return Err(PersistError::SchemaVersion {
            path: path.to_path_buf(),
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    if kind != expected {
        return Err(PersistError::KindMismatch {
            path: path.to_path_buf(),
            found: kind.to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(())
}

/// Writes through a sibling temp file and renames, so readers never observe a
/// partially written artifact.
fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), PersistError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let file = File::create(&tmp).map_err(io_err(&tmp))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(io_err(&tmp))?;
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn persist_records<T: Artifact>(records: &[T], path: &Path) -> Result<(), PersistError> {
    let header = serde_json::to_string(&Header {
        kind: T::KIND.to_string(),
        schema_version: SCHEMA_VERSION,
    })
    .expect("header serializes");
    let mut lines = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        lines.push(serde_json::to_string(r).map_err(|source| PersistError::Json {
            path: path.to_path_buf(),
            line: i + 2,
            source,
        })?);
    }
    write_atomic(path, |w| {
        writeln!(w, "{header}")?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })
}

pub fn load_records<T: Artifact>(path: &Path) -> Result<Vec<T>, PersistError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = match lines.next() {
        Some(l) => l.map_err(io_err(path))?,
        None => {
            return Err(PersistError::MissingHeader {
                path: path.to_path_buf(),
            })
        }
    };
    let header: Header =
        serde_json::from_str(&header_line).map_err(|_| PersistError::MissingHeader {
            path: path.to_path_buf(),
        })?;
    check_header(path, &header.kind, header.schema_version, T::KIND)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| PersistError::Json {
                path: path.to_path_buf(),
                line: i + 2,
                source,
            })?,
        );
    }
    Ok(out)
}

pub fn persist_document<T: Artifact>(doc: &T, path: &Path) -> Result<(), PersistError> {
    let body = serde_json::to_string_pretty(&DocumentOut {
        kind: T::KIND,
        schema_version: SCHEMA_VERSION,
        data: doc,
    })
    .map_err(|source| PersistError::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })?;
    write_atomic(path, |w| writeln!(w, "{body}"))
}

pub fn load_document<T: Artifact>(path: &Path) -> Result<T, PersistError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let header: Header = serde_json::from_str(&text).map_err(|_| PersistError::MissingHeader {
        path: path.to_path_buf(),
    })?;
    check_header(path, &header.kind, header.schema_version, T::KIND)?;
    let doc: DocumentIn<T> = serde_json::from_str(&text).map_err(|source| PersistError::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })?;
    debug_assert_eq!(doc.kind, T::KIND);
    debug_assert_eq!(doc.schema_version, SCHEMA_VERSION);
    Ok(doc.data)
}
