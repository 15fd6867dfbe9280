//! Append-only, CRC-checked evaluation cache.
//!
//! Record layout (all integers little-endian):
//!
//! | offset    | size | field                                      |
//! |-----------|------|--------------------------------------------|
//! | 0         | 4    | magic `b"GCF1"`                            |
//! | 4         | 8    | Zobrist hash of the position               |
//! | 12        | 1    | side to move (0 = black, 1 = white)        |
//! | 13        | 1    | ruleset (0 = japanese, 1 = chinese)        |
//! | 14        | 8    | komi as IEEE-754 f64 bits                  |
//! | 22        | 4    | visits                                     |
//! | 26        | 2    | engine id length `E`                       |
//! | 28        | 4    | payload length `P`                         |
//! | 32        | E    | engine id, UTF-8                           |
//! | 32+E      | P    | JSON-encoded [`Evaluation`]                |
//! | 32+E+P    | 4    | CRC-32 (IEEE) of bytes `0 .. 32+E+P`       |
//!
//! A later record for the same key supersedes an earlier one. A torn or
//! corrupt tail (an interrupted write) is truncated on open.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use crate::rules::Color;

use super::protocol::Ruleset;
use super::Evaluation;

pub const MAGIC: &[u8; 4] = b"GCF1";
const HEADER_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub zobrist: u64,
    pub to_move: Color,
    pub komi_bits: u64,
    pub ruleset: Ruleset,
    pub visits: u32,
    pub engine_id: String,
}

impl CacheKey {
    pub fn new(zobrist: u64, to_move: Color, komi: f64, ruleset: Ruleset, visits: u32, engine_id: &str) -> Self {
        CacheKey {
            zobrist,
            to_move,
            komi_bits: komi.to_bits(),
            ruleset,
            visits,
            engine_id: engine_id.to_string(),
        }
    }

    pub fn komi(&self) -> f64 {
        f64::from_bits(self.komi_bits)
    }
}

pub fn encode_record(key: &CacheKey, eval: &Evaluation) -> Vec<u8> {
    let payload = serde_json::to_vec(eval).expect("evaluation serializes");
    let id = key.engine_id.as_bytes();
    let mut buf = Vec::with_capacity(HEADER_LEN + id.len() + payload.len() + 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&key.zobrist.to_le_bytes());
    buf.push(match key.to_move {
        Color::Black => 0,
        Color::White => 1,
    });
    buf.push(key.ruleset.code());
    buf.extend_from_slice(&key.komi_bits.to_le_bytes());
    buf.extend_from_slice(&key.visits.to_le_bytes());
    buf.extend_from_slice(&(u16::try_from(id.len()).expect("engine id too long")).to_le_bytes());
    buf.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    buf.extend_from_slice(id);
    buf.extend_from_slice(&payload);
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

/// Decodes the record at the start of `bytes`, returning it and its length.
/// `None` means the bytes do not hold a complete valid record.
pub fn decode_record(bytes: &[u8]) -> Option<(CacheKey, Evaluation, usize)> {
    if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
        return None;
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let id_len = u16::from_le_bytes(bytes[26..28].try_into().unwrap()) as usize;
    let payload_len = u32_at(28) as usize;
    let body_end = HEADER_LEN + id_len + payload_len;
    if bytes.len() < body_end + 4 {
        return None;
    }
    if crc32fast::hash(&bytes[..body_end]) != u32_at(body_end) {
        return None;
    }
    let to_move = match bytes[12] {
        0 => Color::Black,
        1 => Color::White,
        _ => return None,
    };
    let key = CacheKey {
        zobrist: u64_at(4),
        to_move,
        ruleset: Ruleset::from_code(bytes[13])?,
        komi_bits: u64_at(14),
        visits: u32_at(22),
        engine_id: std::str::from_utf8(&bytes[HEADER_LEN..HEADER_LEN + id_len]).ok()?.to_string(),
    };
    let eval = serde_json::from_slice(&bytes[HEADER_LEN + id_len..body_end]).ok()?;
    Some((key, eval, body_end + 4))
}

/// Thread-safe evaluation store; optionally backed by a file.
#[derive(Debug)]
pub struct EvalCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<CacheKey, Evaluation>>,
    file: Option<Mutex<File>>,
}

impl EvalCache {
    pub fn in_memory() -> Self {
        EvalCache {
            path: None,
            entries: RwLock::new(HashMap::new()),
            file: None,
        }
    }

    /// Opens (creating if needed) a cache file, replaying its records.
    pub fn open(path: &Path) -> io::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut bytes = Vec::new();
        file.seek(SeekFrom::Start(0))?;
        file.read_to_end(&mut bytes)?;
        let mut entries = HashMap::new();
        let mut offset = 0;
        while offset < bytes.len() {
            match decode_record(&bytes[offset..]) {
                Some((key, eval, len)) => {
                    entries.insert(key, eval);
                    offset += len;
                }
                None => break,
            }
        }
        if offset < bytes.len() {
            log::warn!(
                "evaluation cache {}: discarding {} trailing bytes after the last valid record",
                path.display(),
                bytes.len() - offset
            );
            file.set_len(offset as u64)?;
        }
        Ok(EvalCache {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            file: Some(Mutex::new(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &CacheKey) -> Option<Evaluation> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends the record durably, then publishes it to readers.
    pub fn put(&self, key: CacheKey, eval: Evaluation) -> io::Result<()> {
        if let Some(file) = &self.file {
            let record = encode_record(&key, &eval);
            let mut f = file.lock().expect("cache file lock");
            f.write_all(&record)?;
            f.flush()?;
        }
        self.entries.write().expect("cache lock").insert(key, eval);
        Ok(())
    }
}
