use std::collections::BTreeMap;
use std::fmt::Write;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde_json::json;
use tsprep_core::cache::{self, CacheMeta};
use tsprep_core::export::{self, ExportFormat, Manifest};
use tsprep_core::tensor_file::{read_tensor, RawTensor};
use tsprep_core::Split;

#[derive(Debug)]
pub struct Channel {
    pub name: String,
    pub kind: String,
    /// Fraction of NaN entries within sequence lengths, when readable.
    pub missing: Option<f64>,
}

#[derive(Debug)]
pub struct Info {
    pub dataset: String,
    pub entry: &'static str,
    pub format: String,
    pub dtype: String,
    pub seed: Option<u64>,
    pub split_sizes: BTreeMap<String, usize>,
    pub shapes: BTreeMap<String, Vec<usize>>,
    pub channels: Vec<Channel>,
}

impl Info {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "dataset": self.dataset,
            "entry": self.entry,
            "format": self.format,
            "dtype": self.dtype,
            "seed": self.seed,
            "split_sizes": self.split_sizes,
            "shapes": self.shapes,
            "channels": self.channels.iter().map(|c| json!({
                "name": c.name,
                "kind": c.kind,
                "missing": c.missing,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset: {} ({} {}, {})", self.dataset, self.entry, self.format, self.dtype);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed: {seed}");
        }
        if !self.split_sizes.is_empty() {
            let sizes: Vec<String> = self.split_sizes.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(s, "splits: {}", sizes.join(" "));
        }
        let _ = writeln!(s, "shapes:");
        for (file, dims) in &self.shapes {
            let _ = writeln!(s, "  {file:<16} {dims:?}");
        }
        let _ = writeln!(s, "channels:");
        let width = self.channels.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for (i, c) in self.channels.iter().enumerate() {
            let missing = c.missing.map_or_else(|| "n/a".to_string(), |m| format!("{m:.4}"));
            let _ = writeln!(s, "  {i:>4} {:<width$} {:<5} missing {missing}", c.name, c.kind);
        }
        s
    }
}

fn read(path: &Path) -> anyhow::Result<RawTensor> {
    read_tensor(path).with_context(|| format!("reading {}", path.display()))
}

/// Missing fraction per channel over several `(X, length)` pairs, weighted by
/// the number of observed time points.
fn pooled_missingness(parts: &[(RawTensor, RawTensor)]) -> anyhow::Result<Vec<f64>> {
    let mut missing: Vec<f64> = Vec::new();
    let mut total = 0.0;
    for (x, length) in parts {
        let x = x.to_array3()?;
        let length = length.to_lengths()?;
        let steps: usize = length.iter().sum();
        let rates = export::missingness(x.view(), &length);
        missing.resize(rates.len(), 0.0);
        for (m, r) in missing.iter_mut().zip(&rates) {
            *m += r * steps as f64;
        }
        total += steps as f64;
    }
    Ok(missing.into_iter().map(|m| if total > 0.0 { m / total } else { 0.0 }).collect())
}

pub fn from_export(manifest: &Manifest, dir: &Path) -> anyhow::Result<Info> {
    let rates = if manifest.format == ExportFormat::Tsprep {
        let mut parts = Vec::new();
        for split in Split::ALL {
            if manifest.split_sizes.contains_key(split.name()) {
                let x = read(&dir.join(export::file_name("X", split, manifest.format)))?;
                let length = read(&dir.join(export::file_name("length", split, manifest.format)))?;
                parts.push((x, length));
            }
        }
        Some(pooled_missingness(&parts)?)
    } else {
        None
    };
    let channels = manifest
        .channel_names
        .iter()
        .zip(&manifest.channel_kinds)
        .enumerate()
        .map(|(i, (name, kind))| Channel {
            name: name.clone(),
            kind: serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
            missing: rates.as_ref().map(|r| r[i]),
        })
        .collect();
    Ok(Info {
        dataset: manifest.dataset.clone(),
        entry: "export",
        format: serde_json::to_value(manifest.format)?.as_str().unwrap_or_default().to_string(),
        dtype: manifest.dtype.code().to_string(),
        seed: Some(manifest.seed),
        split_sizes: manifest.split_sizes.clone(),
        shapes: manifest.shapes.clone(),
        channels,
    })
}

pub fn from_cache(dir: &Path) -> anyhow::Result<Info> {
    let meta: CacheMeta = serde_json::from_str(&fs::read_to_string(dir.join(cache::META))?)
        .with_context(|| format!("reading {}", dir.join(cache::META).display()))?;
    let mut shapes = BTreeMap::new();
    let mut tensors = BTreeMap::new();
    for name in cache::BLOBS {
        let t = read(&dir.join(name))?;
        shapes.insert(name.to_string(), t.dims.clone());
        tensors.insert(name, t);
    }
    let x = tensors.remove("X.bin").expect("read above");
    let length = tensors.remove("length.bin").expect("read above");
    let rates = pooled_missingness(&[(x, length)])?;
    let channels = meta
        .master
        .channel_names
        .iter()
        .enumerate()
        .map(|(i, name)| Channel {
            name: name.clone(),
            kind: if i == 0 { "time" } else { "data" }.to_string(),
            missing: rates.get(i).copied(),
        })
        .collect();
    Ok(Info {
        dataset: meta.dataset,
        entry: "cache",
        format: "tsprep".into(),
        dtype: "f64".into(),
        seed: None,
        split_sizes: BTreeMap::new(),
        shapes,
        channels,
    })
}
