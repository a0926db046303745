//! JSONL persistence helpers shared by the entity, embedding and generation
//! caches.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place,
/// creating parent directories as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn write_jsonl_atomic<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> io::Result<()> {
    write_atomic(path, &to_jsonl(items)?)
}

/// Reads one record per non-blank line. A missing file reads as empty. A
/// malformed line fails with `InvalidData` naming the line, unless
/// `skip_malformed` is set, in which case it is logged and skipped (a crash
/// mid-append can leave a truncated last line).
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, skip_malformed: bool) -> io::Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => out.push(v),
            Err(e) if skip_malformed => {
                log::warn!("{}:{}: skipping malformed record: {e}", path.display(), i + 1);
            }
            Err(e) => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                ))
            }
        }
    }
    Ok(out)
}

/// An append-only JSONL file; each record is flushed as it is written.
#[derive(Debug)]
pub struct AppendLog {
    path: PathBuf,
    file: Mutex<BufWriter<File>>,
}

impl AppendLog {
    pub fn open(path: &Path) -> io::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(path)?;
        // a previous run may have died mid-line; start on a fresh line
        let len = file.metadata()?.len();
        if len > 0 {
            use std::io::{Read, Seek, SeekFrom};
            let mut last = [0u8; 1];
            file.seek(SeekFrom::Start(len - 1))?;
            file.read_exact(&mut last)?;
            if last[0] != b'\n' {
                file.write_all(b"\n")?;
            }
        }
        Ok(AppendLog {
            path: path.to_path_buf(),
            file: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append<T: Serialize>(&self, record: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(&line)?;
        f.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::{json, Value};

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_roundtrip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/x.jsonl");
        assert!(read_jsonl::<Value>(&path, false).unwrap().is_empty());
        write_jsonl_atomic(&path, [json!({"a": 1}), json!({"a": 2})]).unwrap();
        let back: Vec<Value> = read_jsonl(&path, false).unwrap();
        assert_eq!(back, [json!({"a": 1}), json!({"a": 2})]);
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn append_log_recovers_from_truncated_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        fs::write(&path, "{\"a\":1}\n{\"a\":").unwrap();
        AppendLog::open(&path).unwrap().append(&json!({"a": 3})).unwrap();
        let back: Vec<Value> = read_jsonl(&path, true).unwrap();
        assert_eq!(back, [json!({"a": 1}), json!({"a": 3})]);
        let err = read_jsonl::<Value>(&path, false).unwrap_err();
        assert!(err.to_string().contains(":2:"));
    }
}
