//! Per-split tensor export with a checksummed manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::cache::sha256_hex;
use crate::dataset::{Dataset, TargetKind};
use crate::error::{Error, Result};
use crate::splits::Split;
use crate::tensor::ChannelKind;
use crate::tensor_file::{DType, RawTensor};

pub const MANIFEST: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    /// The 96-byte-header tensor format, extension `.bin`.
    Tsprep,
    Npy,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Tsprep => "bin",
            ExportFormat::Npy => "npy",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsprep" | "bin" => Ok(ExportFormat::Tsprep),
            "npy" => Ok(ExportFormat::Npy),
            other => Err(Error::Config(format!("unknown export format {other:?}; expected tsprep or npy"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub split_sizes: BTreeMap<String, usize>,
    /// Channel names in layout order.
    pub channel_names: Vec<String>,
    pub channel_kinds: Vec<ChannelKind>,
    pub target: TargetKind,
    pub class_labels: Option<Vec<String>>,
    pub dropped_records: usize,
    pub format: ExportFormat,
    /// Element type of `X` and `y`; lengths are always `i64`.
    pub dtype: DType,
    pub shapes: BTreeMap<String, Vec<usize>>,
    /// SHA-256 of every exported tensor file.
    pub files: BTreeMap<String, String>,
    pub tool_version: String,
    pub created_utc: String,
}

impl Manifest {
    /// Sorted keys, two-space indentation, trailing LF.
    pub fn to_canonical_json(&self) -> Result<String> {
        // serde_json's map is ordered by key, so a round trip through Value sorts.
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Tensors of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTensors {
    pub x: Array3<f64>,
    pub y: Array2<f64>,
    pub length: Vec<usize>,
}

pub fn file_name(field: &str, split: Split, format: ExportFormat) -> String {
    format!("{field}_{}.{}", split.name(), format.extension())
}

fn encode(t: &RawTensor, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Tsprep => t.encode(),
        ExportFormat::Npy => t.encode_npy(),
    }
}

/// Writes the split tensors and a manifest built from `base` (whose format,
/// dtype, shapes, files and timestamp are replaced).
pub fn write_export(dir: &Path, splits: &[(Split, SplitTensors)], base: &Manifest, format: ExportFormat, dtype: DType) -> Result<Manifest> {
    if dtype == DType::I64 {
        return Err(Error::Config("X and y are exported as f32 or f64".into()));
    }
    fs::create_dir_all(dir)?;
    let mut manifest = base.clone();
    manifest.format = format;
    manifest.dtype = dtype;
    manifest.shapes.clear();
    manifest.files.clear();
    manifest.split_sizes.clear();
    manifest.created_utc = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    for (split, t) in splits {
        manifest.split_sizes.insert(split.name().to_string(), t.length.len());
        let tensors = [
            ("X", RawTensor::from_array3(&t.x, dtype)),
            ("y", RawTensor::from_array2(&t.y, dtype)),
            ("length", RawTensor::from_lengths(&t.length)),
        ];
        for (field, tensor) in tensors {
            let name = file_name(field, *split, format);
            let bytes = encode(&tensor, format);
            manifest.shapes.insert(name.clone(), tensor.dims.clone());
            manifest.files.insert(name.clone(), sha256_hex(&bytes));
            fs::write(dir.join(&name), bytes)?;
        }
    }
    fs::write(dir.join(MANIFEST), manifest.to_canonical_json()?)?;
    Ok(manifest)
}

pub fn dataset_splits(ds: &Dataset) -> Vec<(Split, SplitTensors)> {
    Split::ALL
        .iter()
        .map(|&s| (s, SplitTensors { x: ds.x_split(s), y: ds.y_split(s), length: ds.length_split(s) }))
        .collect()
}

pub fn base_manifest(ds: &Dataset, config: serde_json::Value) -> Manifest {
    Manifest {
        dataset: ds.name().to_string(),
        config,
        seed: ds.seed(),
        split_sizes: BTreeMap::new(),
        channel_names: ds.layout().names(),
        channel_kinds: ds.layout().channels().iter().map(|c| c.kind).collect(),
        target: ds.target_kind(),
        class_labels: ds.class_labels().map(<[String]>::to_vec),
        dropped_records: ds.dropped_records(),
        format: ExportFormat::Tsprep,
        dtype: DType::F64,
        shapes: BTreeMap::new(),
        files: BTreeMap::new(),
        tool_version: TOOL_VERSION.to_string(),
        created_utc: String::new(),
    }
}

pub fn export_dataset(ds: &Dataset, config: serde_json::Value, dir: &Path, format: ExportFormat, dtype: DType) -> Result<Manifest> {
    write_export(dir, &dataset_splits(ds), &base_manifest(ds, config), format, dtype)
}

/// Reads a `tsprep`-format export back, verifying checksums first.
pub fn read_export(dir: &Path) -> Result<(Manifest, Vec<(Split, SplitTensors)>)> {
    let manifest = Manifest::read(dir)?;
    if manifest.format != ExportFormat::Tsprep {
        return Err(Error::Config(format!("{} holds an npy export; re-export from a tsprep export", dir.display())));
    }
    if let Err(bad) = validate_dir(dir)? {
        return Err(Error::TensorFile { path: dir.join(bad), msg: "checksum mismatch".into() });
    }
    let read = |name: String| -> Result<RawTensor> {
        let path = dir.join(&name);
        RawTensor::decode(&fs::read(&path)?).map_err(|e| Error::TensorFile { path, msg: e.to_string() })
    };
    let mut splits = Vec::new();
    for split in Split::ALL {
        if !manifest.split_sizes.contains_key(split.name()) {
            continue;
        }
        let fmt = ExportFormat::Tsprep;
        splits.push((
            split,
            SplitTensors {
                x: read(file_name("X", split, fmt))?.to_array3()?,
                y: read(file_name("y", split, fmt))?.to_array2()?,
                length: read(file_name("length", split, fmt))?.to_lengths()?,
            },
        ));
    }
    Ok((manifest, splits))
}

/// Re-checks SHA-256 of an export directory (via its manifest) or a cache
/// entry (via `checksums.txt`). `Ok(Err(file))` names the first bad file.
pub fn validate_dir(dir: &Path) -> Result<std::result::Result<(), String>> {
    if dir.join(MANIFEST).is_file() {
        let manifest = match Manifest::read(dir) {
            Ok(m) => m,
            Err(_) => return Ok(Err(MANIFEST.to_string())),
        };
        for (name, digest) in &manifest.files {
            match fs::read(dir.join(name)) {
                Ok(bytes) if sha256_hex(&bytes) == *digest => {}
                _ => return Ok(Err(name.clone())),
            }
        }
        return Ok(Ok(()));
    }
    if dir.join(crate::cache::CHECKSUMS).is_file() {
        return crate::cache::verify_checksums(dir);
    }
    Err(Error::MissingSources(format!("{} has neither {MANIFEST} nor {}", dir.display(), crate::cache::CHECKSUMS)))
}

/// Fraction of missing entries per channel within each sequence's length.
pub fn missingness(x: ArrayView3<'_, f64>, length: &[usize]) -> Vec<f64> {
    let c = x.dim().2;
    let mut missing = vec![0usize; c];
    let mut total = 0usize;
    for (seq, &len) in x.outer_iter().zip(length) {
        let len = len.min(seq.nrows());
        total += len;
        for row in seq.outer_iter().take(len) {
            for (k, v) in row.iter().enumerate() {
                missing[k] += usize::from(v.is_nan());
            }
        }
    }
    missing.iter().map(|&m| if total == 0 { 0.0 } else { m as f64 / total as f64 }).collect()
}
