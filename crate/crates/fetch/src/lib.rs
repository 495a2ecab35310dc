//! Downloads and unpacks the source archives of UEA/UCR problems and the
//! PhysioNet 2012 and 2019 challenges.
//!
//! Files land in `<raw root>/<target>/`: archives under `downloads/`,
//! extracted contents beside them. Re-running a fetch whose files are
//! complete (and verified, when a SHA-256 is known) does nothing.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Component, Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

mod names;

pub use names::{UCR_UNIVARIATE, UEA_MULTIVARIATE};

pub const PHYSIONET_DATASETS: [&str; 3] = ["physionet2012", "physionet2019", "physionet2019binary"];
const DOWNLOADS: &str = "downloads";
const PART_SUFFIX: &str = ".part";
const EXTRACTED_SUFFIX: &str = ".extracted";

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("unknown dataset {name:?}; supported: {supported}")]
    UnknownDataset { name: String, supported: String },

    #[error("download of {url} failed: {msg}")]
    Http { url: String, msg: String },

    #[error("checksum mismatch for {path}: expected {expected}, got {actual}")]
    Checksum { path: PathBuf, expected: String, actual: String },

    #[error("archive {archive} has unsafe entry {entry:?}")]
    UnsafeEntry { archive: PathBuf, entry: String },

    #[error("archive {path} is unreadable: {msg}")]
    Archive { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = FetchError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchiveKind {
    Zip,
    TarGz,
    /// Stored as is, no extraction.
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub url: String,
    pub kind: ArchiveKind,
    pub sha256: Option<String>,
}

impl SourceFile {
    pub fn new(url: impl Into<String>, kind: ArchiveKind) -> Self {
        SourceFile { url: url.into(), kind, sha256: None }
    }

    pub fn file_name(&self) -> &str {
        let path = self.url.split(['?', '#']).next().unwrap_or_default();
        path.rsplit('/').next().unwrap_or(path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDescriptor {
    pub dataset: String,
    pub files: Vec<SourceFile>,
    /// Directory under the raw root.
    pub target: String,
}

impl SourceDescriptor {
    /// Points every file at `base` instead of its original host, keeping the
    /// file name.
    pub fn with_mirror(mut self, base: &str) -> Self {
        let base = base.trim_end_matches('/');
        for f in &mut self.files {
            f.url = format!("{base}/{}", f.file_name());
        }
        self
    }
}

pub fn supported_datasets() -> Vec<&'static str> {
    let mut all: Vec<&str> = UCR_UNIVARIATE.iter().chain(UEA_MULTIVARIATE.iter()).copied().collect();
    all.sort_unstable_by_key(|n| n.to_ascii_lowercase());
    all.dedup();
    all.extend(PHYSIONET_DATASETS);
    all
}

/// Canonical name of a UEA/UCR problem, matched case-insensitively.
pub fn canonical_uea_name(name: &str) -> Option<&'static str> {
    UCR_UNIVARIATE
        .iter()
        .chain(UEA_MULTIVARIATE.iter())
        .find(|n| n.eq_ignore_ascii_case(name))
        .copied()
}

/// Source files of a supported dataset name (case-insensitive).
pub fn descriptor(name: &str) -> Result<SourceDescriptor> {
    let lower = name.to_ascii_lowercase();
    match lower.as_str() {
        "physionet2012" => {
            let mut files = Vec::new();
            for set in ["a", "b", "c"] {
                files.push(SourceFile::new(
                    format!("https://physionet.org/files/challenge-2012/1.0.0/set-{set}.tar.gz"),
                    ArchiveKind::TarGz,
                ));
                files.push(SourceFile::new(
                    format!("https://physionet.org/files/challenge-2012/1.0.0/Outcomes-{set}.txt"),
                    ArchiveKind::Plain,
                ));
            }
            Ok(SourceDescriptor { dataset: "physionet2012".into(), files, target: "physionet2012".into() })
        }
        "physionet2019" | "physionet2019binary" => Ok(SourceDescriptor {
            dataset: lower.clone(),
            files: ["A", "B"]
                .iter()
                .map(|set| {
                    SourceFile::new(
                        format!("https://archive.physionet.org/users/shared/challenge-2019/training_set{set}.zip"),
                        ArchiveKind::Zip,
                    )
                })
                .collect(),
            target: "physionet2019".into(),
        }),
        _ => {
            let canonical = canonical_uea_name(name).ok_or_else(|| FetchError::UnknownDataset {
                name: name.to_string(),
                supported: supported_datasets().join(", "),
            })?;
            Ok(SourceDescriptor {
                dataset: canonical.into(),
                files: vec![SourceFile::new(
                    format!("https://www.timeseriesclassification.com/aeon-toolkit/{canonical}.zip"),
                    ArchiveKind::Zip,
                )],
                target: canonical.into(),
            })
        }
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    io::copy(&mut file, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

fn verify(path: &Path, expected: Option<&str>) -> Result<String> {
    let actual = sha256_file(path)?;
    match expected {
        Some(e) if !e.eq_ignore_ascii_case(&actual) => {
            fs::remove_file(path)?;
            Err(FetchError::Checksum { path: path.to_path_buf(), expected: e.to_string(), actual })
        }
        _ => Ok(actual),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownloadOutcome {
    Downloaded,
    /// Continued from a partial file with a range request.
    Resumed,
    /// A complete file was already present.
    AlreadyPresent,
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_connect(Some(Duration::from_secs(30)))
        .timeout_recv_body(Some(Duration::from_secs(600)))
        .build()
        .into()
}

fn http_error(url: &str, e: impl std::fmt::Display) -> FetchError {
    FetchError::Http { url: url.to_string(), msg: e.to_string() }
}

/// Downloads `url` to `dest`. Data arrives in `<dest>.part`, which is resumed
/// with a range request when present and renamed once complete. A file with
/// a wrong SHA-256 is removed.
pub fn download(agent: &ureq::Agent, url: &str, dest: &Path, sha256: Option<&str>) -> Result<DownloadOutcome> {
    if dest.is_file() {
        verify(dest, sha256)?;
        return Ok(DownloadOutcome::AlreadyPresent);
    }
    if let Some(parent) = dest.parent() {
        fs::create_dir_all(parent)?;
    }
    let part = PathBuf::from(format!("{}{PART_SUFFIX}", dest.display()));
    let offset = fs::metadata(&part).map(|m| m.len()).unwrap_or(0);

    let mut request = agent.get(url);
    if offset > 0 {
        request = request.header("Range", format!("bytes={offset}-"));
    }
    let response = match request.call() {
        Err(ureq::Error::StatusCode(416)) if offset > 0 => {
            // the partial file cannot be continued; start over
            fs::remove_file(&part)?;
            return download(agent, url, dest, sha256);
        }
        other => other.map_err(|e| http_error(url, e))?,
    };
    let resumed = offset > 0 && response.status().as_u16() == 206;
    let mut out = if resumed {
        OpenOptions::new().append(true).open(&part)?
    } else {
        File::create(&part)?
    };
    let mut reader = response.into_body().into_reader();
    copy_body(&mut reader, &mut out).map_err(|e| http_error(url, e))?;
    out.sync_all()?;
    drop(out);
    fs::rename(&part, dest)?;
    verify(dest, sha256)?;
    log::info!("downloaded {url}");
    Ok(if resumed { DownloadOutcome::Resumed } else { DownloadOutcome::Downloaded })
}

fn copy_body(reader: &mut impl Read, out: &mut File) -> io::Result<u64> {
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0;
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            return Ok(total);
        }
        out.write_all(&buf[..n])?;
        total += n as u64;
    }
}

/// Relative path of an archive entry, or `None` if it could escape `dest`.
fn safe_relative(name: &str) -> Option<PathBuf> {
    let path = Path::new(name);
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::Normal(part) => out.push(part),
            Component::CurDir => {}
            Component::ParentDir | Component::RootDir | Component::Prefix(_) => return None,
        }
    }
    (!out.as_os_str().is_empty()).then_some(out)
}

fn write_entry(dest: &Path, rel: &Path, reader: &mut impl Read) -> Result<PathBuf> {
    let path = dest.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = File::create(&path)?;
    io::copy(reader, &mut out)?;
    Ok(path)
}

/// Unpacks `archive` into `dest` and returns the extracted files. Any entry
/// whose path could leave `dest` rejects the whole archive before anything
/// is written.
pub fn extract(archive: &Path, kind: ArchiveKind, dest: &Path) -> Result<Vec<PathBuf>> {
    let bad = |e: &dyn std::fmt::Display| FetchError::Archive { path: archive.to_path_buf(), msg: e.to_string() };
    fs::create_dir_all(dest)?;
    let mut files = Vec::new();
    match kind {
        ArchiveKind::Plain => {
            let name = archive.file_name().ok_or_else(|| bad(&"no file name"))?;
            let target = dest.join(name);
            fs::copy(archive, &target)?;
            files.push(target);
        }
        ArchiveKind::Zip => {
            let mut zip = zip::ZipArchive::new(File::open(archive)?).map_err(|e| bad(&e))?;
            let mut plan = Vec::new();
            for i in 0..zip.len() {
                let entry = zip.by_index(i).map_err(|e| bad(&e))?;
                let rel = safe_relative(entry.name())
                    .filter(|_| entry.enclosed_name().is_some())
                    .ok_or_else(|| FetchError::UnsafeEntry { archive: archive.to_path_buf(), entry: entry.name().to_string() })?;
                if entry.is_file() {
                    plan.push((i, rel));
                }
            }
            for (i, rel) in plan {
                let mut entry = zip.by_index(i).map_err(|e| bad(&e))?;
                files.push(write_entry(dest, &rel, &mut entry)?);
            }
        }
        ArchiveKind::TarGz => {
            let open = || -> Result<tar::Archive<flate2::read::GzDecoder<File>>> {
                Ok(tar::Archive::new(flate2::read::GzDecoder::new(File::open(archive)?)))
            };
            // first pass validates every name
            for entry in open()?.entries().map_err(|e| bad(&e))? {
                let entry = entry.map_err(|e| bad(&e))?;
                let name = entry.path().map_err(|e| bad(&e))?.to_string_lossy().into_owned();
                if safe_relative(&name).is_none() && !matches!(name.as_str(), "." | "./") {
                    return Err(FetchError::UnsafeEntry { archive: archive.to_path_buf(), entry: name });
                }
            }
            for entry in open()?.entries().map_err(|e| bad(&e))? {
                let mut entry = entry.map_err(|e| bad(&e))?;
                if !entry.header().entry_type().is_file() {
                    continue;
                }
                let name = entry.path().map_err(|e| bad(&e))?.to_string_lossy().into_owned();
                let rel = safe_relative(&name).expect("validated above");
                files.push(write_entry(dest, &rel, &mut entry)?);
            }
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileReport {
    pub url: String,
    pub outcome: DownloadOutcome,
    /// Files written by extraction; empty when extraction was already done.
    pub extracted: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchReport {
    pub dataset: String,
    pub dir: PathBuf,
    pub files: Vec<FileReport>,
}

impl FetchReport {
    /// True when nothing was downloaded or extracted.
    pub fn is_noop(&self) -> bool {
        self.files.iter().all(|f| f.outcome == DownloadOutcome::AlreadyPresent && f.extracted.is_empty())
    }
}

/// Downloads and unpacks every file of `desc` into `<raw_root>/<target>`.
/// Extraction is recorded by a marker holding the archive's SHA-256, so a
/// repeated fetch skips it.
pub fn fetch(agent: &ureq::Agent, desc: &SourceDescriptor, raw_root: &Path) -> Result<FetchReport> {
    let dir = raw_root.join(&desc.target);
    let downloads = dir.join(DOWNLOADS);
    let mut reports = Vec::new();
    for file in &desc.files {
        let archive = downloads.join(file.file_name());
        let outcome = download(agent, &file.url, &archive, file.sha256.as_deref())?;
        let digest = sha256_file(&archive)?;
        let marker = PathBuf::from(format!("{}{EXTRACTED_SUFFIX}", archive.display()));
        let done = fs::read_to_string(&marker).is_ok_and(|m| m.trim() == digest);
        let extracted = if done {
            Vec::new()
        } else {
            let files = extract(&archive, file.kind, &dir)?;
            fs::write(&marker, format!("{digest}\n"))?;
            files
        };
        reports.push(FileReport { url: file.url.clone(), outcome, extracted });
    }
    Ok(FetchReport { dataset: desc.dataset.clone(), dir, files: reports })
}
