//! On-disk cache of master data sets, validated by SHA-256 on every load.
//!
//! Layout: `<root>/.torchtime/<key>/{X.bin,y.bin,length.bin,checksums.txt,meta.json}`.
//! `checksums.txt` holds `<hex sha256>  <file>` lines for the three blobs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::master::{MasterData, MasterInfo};
use crate::tensor::PaddedTensor3;
use crate::tensor_file::{DType, RawTensor};

pub const CACHE_DIR: &str = ".torchtime";
pub const FORMAT_VERSION: u32 = 1;
pub const BLOBS: [&str; 3] = ["X.bin", "y.bin", "length.bin"];
pub const CHECKSUMS: &str = "checksums.txt";
pub const META: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub format_version: u32,
    pub dataset: String,
    pub created_utc: String,
    pub source_options: serde_json::Value,
    pub master: MasterInfo,
}

#[derive(Debug)]
pub enum CacheLookup {
    Hit(Box<MasterData>, CacheMeta),
    Miss,
    Corrupt(String),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Stable cache key: a slug of the dataset name plus a short hash of the
/// options that shape the master set.
pub fn cache_key(dataset: &str, source_options: &serde_json::Value) -> String {
    let canonical = serde_json::json!({ "dataset": dataset, "source_options": source_options }).to_string();
    let slug: String = dataset
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("{slug}-{}", &sha256_hex(canonical.as_bytes())[..12])
}

pub fn entry_dir(root: &Path, key: &str) -> PathBuf {
    root.join(CACHE_DIR).join(key)
}

/// Parses `checksums.txt` into `(digest, file)` pairs.
pub fn parse_checksums(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (digest, name) = l
                .split_once("  ")
                .ok_or_else(|| Error::Shape(format!("malformed checksum line {l:?}")))?;
            if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(Error::Shape(format!("malformed digest in {l:?}")));
            }
            Ok((digest.to_string(), name.to_string()))
        })
        .collect()
}

/// Verifies every file listed in a checksum file next to it. Returns the
/// first mismatching file name.
pub fn verify_checksums(dir: &Path) -> Result<std::result::Result<(), String>> {
    let text = match fs::read_to_string(dir.join(CHECKSUMS)) {
        Ok(t) => t,
        Err(_) => return Ok(Err(CHECKSUMS.to_string())),
    };
    let entries = match parse_checksums(&text) {
        Ok(e) => e,
        Err(_) => return Ok(Err(CHECKSUMS.to_string())),
    };
    for (digest, name) in entries {
        match fs::read(dir.join(&name)) {
            Ok(bytes) if sha256_hex(&bytes) == digest => {}
            _ => return Ok(Err(name)),
        }
    }
    Ok(Ok(()))
}

fn write_entry(dir: &Path, master: &MasterData, meta: &CacheMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    let blobs = [
        RawTensor::from_array3(master.x.as_array(), DType::F64),
        RawTensor::from_array2(&master.y, DType::F64),
        RawTensor::from_lengths(&master.length),
    ];
    let mut checksums = String::new();
    for (name, blob) in BLOBS.iter().zip(&blobs) {
        let bytes = blob.encode();
        checksums.push_str(&format!("{}  {name}\n", sha256_hex(&bytes)));
        fs::write(dir.join(name), bytes)?;
    }
    fs::write(dir.join(CHECKSUMS), checksums)?;
    fs::write(dir.join(META), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

/// Writes into a staging directory under the cache root. Nothing is visible
/// under the entry's final name until [`commit`].
pub fn stage(root: &Path, key: &str, master: &MasterData, meta: &CacheMeta) -> Result<PathBuf> {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_nanos());
    let staging = root.join(CACHE_DIR).join(format!(".staging-{key}-{}-{nanos}", std::process::id()));
    if let Err(e) = write_entry(&staging, master, meta) {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    Ok(staging)
}

/// Moves a staged entry to its final name, replacing any previous entry.
pub fn commit(root: &Path, key: &str, staging: &Path) -> Result<PathBuf> {
    let dest = entry_dir(root, key);
    if dest.exists() {
        fs::remove_dir_all(&dest)?;
    }
    fs::rename(staging, &dest)?;
    Ok(dest)
}

pub fn save(root: &Path, key: &str, master: &MasterData, meta: &CacheMeta) -> Result<PathBuf> {
    let staging = stage(root, key, master, meta)?;
    commit(root, key, &staging)
}

/// Loads an entry only if every blob matches its recorded SHA-256.
pub fn load(root: &Path, key: &str) -> Result<CacheLookup> {
    let dir = entry_dir(root, key);
    if !dir.is_dir() {
        return Ok(CacheLookup::Miss);
    }
    if let Err(bad) = verify_checksums(&dir)? {
        return Ok(CacheLookup::Corrupt(format!("checksum mismatch for {bad}")));
    }
    let listed: Vec<String> = parse_checksums(&fs::read_to_string(dir.join(CHECKSUMS))?)?
        .into_iter()
        .map(|(_, n)| n)
        .collect();
    if let Some(missing) = BLOBS.iter().find(|b| !listed.iter().any(|n| n == *b)) {
        return Ok(CacheLookup::Corrupt(format!("{missing} is not covered by checksums")));
    }
    let meta: CacheMeta = match fs::read_to_string(dir.join(META)).map_err(Error::from).and_then(|t| Ok(serde_json::from_str(&t)?)) {
        Ok(m) => m,
        Err(e) => return Ok(CacheLookup::Corrupt(format!("unreadable metadata: {e}"))),
    };
    if meta.format_version != FORMAT_VERSION {
        return Ok(CacheLookup::Corrupt(format!("format version {} != {FORMAT_VERSION}", meta.format_version)));
    }
    let decode = |name: &str| -> Result<RawTensor> {
        RawTensor::decode(&fs::read(dir.join(name))?).map_err(|e| Error::CacheCorrupt { path: dir.join(name), msg: e.to_string() })
    };
    let master = (|| -> Result<MasterData> {
        let m = MasterData {
            x: PaddedTensor3::new(decode(BLOBS[0])?.to_array3()?)?,
            y: decode(BLOBS[1])?.to_array2()?,
            length: decode(BLOBS[2])?.to_lengths()?,
            info: meta.master.clone(),
        };
        m.validate()?;
        Ok(m)
    })();
    match master {
        Ok(m) => Ok(CacheLookup::Hit(Box::new(m), meta)),
        Err(e) => Ok(CacheLookup::Corrupt(e.to_string())),
    }
}
