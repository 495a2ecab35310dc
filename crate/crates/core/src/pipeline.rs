//! The eight-step build: cache, ingest, simulate, time/mask/delta, split,
//! standardise, impute, bind.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{s, Array3, ArrayView3, Axis};
use serde_json::json;

use crate::cache::{self, CacheLookup, CacheMeta};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::master::{self, MasterData};
use crate::par::Parallelism;
use crate::physionet::MECHVENT_2012;
use crate::rng::{entropy_seed, SeededRng};
use crate::splits::{stratified_split_with_rng, Split, SplitSpec};
use crate::stats::{channel_stats, standardise, ChannelStats};
use crate::tensor::{ChannelLayout, PaddedTensor3};
use crate::transforms::{impute, observational_mask, simulate_missing, time_delta, FillValues, ImputeMethod, MissingSpec};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    /// A UEA/UCR problem by name, e.g. `ArrowHead`.
    Uea(String),
    PhysioNet2012,
    PhysioNet2019,
    PhysioNet2019Binary,
}

impl DatasetKind {
    pub fn is_physionet(&self) -> bool {
        !matches!(self, DatasetKind::Uea(_))
    }

    /// Directory name of the raw sources under `.torchtime/raw`.
    pub fn raw_name(&self) -> String {
        match self {
            DatasetKind::Uea(name) => name.clone(),
            DatasetKind::PhysioNet2012 => "physionet2012".into(),
            DatasetKind::PhysioNet2019 | DatasetKind::PhysioNet2019Binary => "physionet2019".into(),
        }
    }

    pub fn cache_name(&self) -> String {
        match self {
            DatasetKind::Uea(name) => name.to_ascii_lowercase(),
            DatasetKind::PhysioNet2012 => "physionet2012".into(),
            DatasetKind::PhysioNet2019 => "physionet2019".into(),
            DatasetKind::PhysioNet2019Binary => "physionet2019binary".into(),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetKind::Uea(name) => f.write_str(name),
            DatasetKind::PhysioNet2012 => f.write_str("physionet2012"),
            DatasetKind::PhysioNet2019 => f.write_str("physionet2019"),
            DatasetKind::PhysioNet2019Binary => f.write_str("physionet2019binary"),
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    /// `physionet2012`, `physionet2019` and `physionet2019binary` (any case)
    /// select PhysioNet; anything else names a UEA/UCR problem.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::Config(format!("invalid dataset name {s:?}")));
        }
        Ok(match s.to_ascii_lowercase().as_str() {
            "physionet2012" => DatasetKind::PhysioNet2012,
            "physionet2019" => DatasetKind::PhysioNet2019,
            "physionet2019binary" => DatasetKind::PhysioNet2019Binary,
            _ => DatasetKind::Uea(s.to_string()),
        })
    }
}

/// Every option of a build. Defaults: time stamps on; masks, deltas,
/// standardisation and cache refresh off; no imputation; no simulated
/// missingness; cache root `.`; seed from entropy.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub dataset: DatasetKind,
    pub split: Split,
    pub train_prop: f64,
    pub val_prop: Option<f64>,
    pub missing: MissingSpec,
    pub impute: ImputeMethod,
    /// Master channel indices (0 is the time stamp, data from 1) imputed
    /// with the training mode instead of the mean.
    pub categorical: BTreeSet<usize>,
    /// Fill-value overrides by master channel index, in raw units.
    pub channel_means: BTreeMap<usize, f64>,
    pub time: bool,
    pub mask: bool,
    pub delta: bool,
    pub standardise: bool,
    pub overwrite_cache: bool,
    pub path: PathBuf,
    pub seed: Option<u64>,
}

impl PipelineConfig {
    pub fn new(dataset: DatasetKind, train_prop: f64) -> Self {
        PipelineConfig {
            dataset,
            split: Split::Train,
            train_prop,
            val_prop: None,
            missing: MissingSpec::default(),
            impute: ImputeMethod::None,
            categorical: BTreeSet::new(),
            channel_means: BTreeMap::new(),
            time: true,
            mask: false,
            delta: false,
            standardise: false,
            overwrite_cache: false,
            path: PathBuf::from("."),
            seed: None,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec { train_prop: self.train_prop, val_prop: self.val_prop, seed: self.seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.split_spec().validate()?;
        if self.dataset.is_physionet() && !self.missing.is_zero() {
            return Err(Error::Config("missing-data simulation only applies to UEA/UCR datasets".into()));
        }
        if self.val_prop.is_none() && self.train_prop >= 1.0 && self.split != Split::Train {
            return Err(Error::Config(format!("split {} is empty with train_prop 1", self.split.name())));
        }
        if let Some(c) = self.categorical.iter().chain(self.channel_means.keys()).find(|&&c| c == 0) {
            return Err(Error::Config(format!("channel {c} is the time stamp, not a data channel")));
        }
        if let Some((c, v)) = self.channel_means.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("channel_means value {v} for channel {c} is not finite")));
        }
        Ok(())
    }

    /// Configuration echo with sorted keys, for manifests.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "dataset": self.dataset.to_string(),
            "split": self.split.name(),
            "train_prop": self.train_prop,
            "val_prop": self.val_prop,
            "missing": self.missing,
            "impute": self.impute.name(),
            "categorical": self.categorical,
            "channel_means": self.channel_means.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>(),
            "time": self.time,
            "mask": self.mask,
            "delta": self.delta,
            "standardise": self.standardise,
            "overwrite_cache": self.overwrite_cache,
            "path": self.path.display().to_string(),
            "seed": self.seed,
        })
    }

    /// Directory holding the raw sources of the configured dataset. UEA
    /// directory names match case-insensitively.
    pub fn raw_dir(&self) -> PathBuf {
        raw_dir(&self.path, &self.dataset)
    }
}

pub fn raw_root(path: &Path) -> PathBuf {
    path.join(cache::CACHE_DIR).join("raw")
}

pub fn raw_dir(path: &Path, dataset: &DatasetKind) -> PathBuf {
    let root = raw_root(path);
    let name = dataset.raw_name();
    let exact = root.join(&name);
    if exact.is_dir() {
        return exact;
    }
    std::fs::read_dir(&root)
        .ok()
        .and_then(|entries| {
            entries
                .flatten()
                .map(|e| e.path())
                .find(|p| p.is_dir() && p.file_name().is_some_and(|f| f.to_string_lossy().eq_ignore_ascii_case(&name)))
        })
        .unwrap_or(exact)
}

fn source_options(dataset: &DatasetKind) -> serde_json::Value {
    match dataset {
        DatasetKind::Uea(name) => json!({ "source": "uea", "name": name.to_ascii_lowercase() }),
        DatasetKind::PhysioNet2012 => json!({ "source": "physionet2012" }),
        DatasetKind::PhysioNet2019 => json!({ "source": "physionet2019", "binary": false }),
        DatasetKind::PhysioNet2019Binary => json!({ "source": "physionet2019", "binary": true, "hours": crate::physionet::BINARY_2019_HOURS }),
    }
}

pub fn ingest(dataset: &DatasetKind, raw_dir: &Path, par: Parallelism) -> Result<MasterData> {
    match dataset {
        DatasetKind::Uea(name) => master::ingest_uea(raw_dir, name, par),
        DatasetKind::PhysioNet2012 => master::ingest_physionet2012(raw_dir, par),
        DatasetKind::PhysioNet2019 => master::ingest_physionet2019(raw_dir, false, par),
        DatasetKind::PhysioNet2019Binary => master::ingest_physionet2019(raw_dir, true, par),
    }
}

/// Steps 1 and 2: returns the cached master set, ingesting and caching it
/// on a miss, on corruption or when `overwrite_cache` is set.
pub fn load_or_ingest(config: &PipelineConfig, par: Parallelism) -> Result<MasterData> {
    let options = source_options(&config.dataset);
    let key = cache::cache_key(&config.dataset.cache_name(), &options);
    if !config.overwrite_cache {
        match cache::load(&config.path, &key).map_err(|e| e.in_step("cache check"))? {
            CacheLookup::Hit(m, _) => {
                log::info!("loaded {} from cache {key}", config.dataset);
                return Ok(*m);
            }
            CacheLookup::Corrupt(why) => log::warn!("cache entry {key} is corrupt ({why}); rebuilding"),
            CacheLookup::Miss => {}
        }
    }
    let master = ingest(&config.dataset, &config.raw_dir(), par).map_err(|e| e.in_step("ingest"))?;
    let meta = CacheMeta {
        format_version: cache::FORMAT_VERSION,
        dataset: config.dataset.to_string(),
        created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        source_options: options,
        master: master.info.clone(),
    };
    cache::save(&config.path, &key, &master, &meta).map_err(|e| e.in_step("cache save"))?;
    Ok(master)
}

pub fn build(config: &PipelineConfig) -> Result<Dataset> {
    build_with(config, Parallelism::default())
}

pub fn build_with(config: &PipelineConfig, par: Parallelism) -> Result<Dataset> {
    config.validate()?;
    let master = load_or_ingest(config, par)?;
    build_from_master(config, master, par)
}

/// PhysioNet 2012 defaults: MechVent and the ICUType indicators are
/// categorical, and MechVent's mode is taken to be zero. User settings win.
fn effective_imputation_options(config: &PipelineConfig) -> (BTreeSet<usize>, BTreeMap<usize, f64>) {
    let mut categorical = config.categorical.clone();
    let mut means = config.channel_means.clone();
    if config.dataset == DatasetKind::PhysioNet2012 {
        categorical.extend([MECHVENT_2012, 39, 41, 42, 43, 44]);
        means.entry(MECHVENT_2012).or_insert(0.0);
    }
    (categorical, means)
}

/// Steps 3 to 8 on an already ingested master set.
pub fn build_from_master(config: &PipelineConfig, master: MasterData, par: Parallelism) -> Result<Dataset> {
    config.validate()?;
    master.validate()?;
    let d = master.n_data_channels();
    if let Some(c) = config.categorical.iter().chain(config.channel_means.keys()).find(|&&c| c > d) {
        return Err(Error::Config(format!("channel {c} does not exist; data channels are 1..={d}")));
    }
    let seed = config.seed.unwrap_or_else(entropy_seed);
    let mut rng = SeededRng::new(seed);
    let MasterData { x, y, length, info } = master;
    let data_channels: Vec<usize> = (1..=d).collect();

    // 3. simulate missing data on the master set
    let mut xm = x.into_array();
    simulate_missing(&mut xm, &length, &data_channels, &config.missing, &mut rng, par)
        .map_err(|e| e.in_step("simulate missing"))?;

    // 4. time stamp, mask and delta channels
    let tracked: Vec<usize> = if info.time_tracked { (0..=d).collect() } else { data_channels.clone() };
    let layout = ChannelLayout::build(&info.channel_names, config.time, &tracked, config.mask, config.delta);
    let x = assemble(xm.view(), &length, &tracked, config).map_err(|e| e.in_step("time, mask and delta"))?;
    debug_assert_eq!(x.dim().2, layout.len());

    // 5. stratified split, continuing the same random stream
    let strata = master::strata(&y, &length, info.target);
    let assignment = stratified_split_with_rng(&strata, &config.split_spec(), &mut rng)
        .map_err(|e| e.in_step("split"))?;
    let train = assignment.indices(Split::Train);

    // 6. standardise data channels with training statistics
    let positions: Vec<usize> = data_channels.iter().map(|&k| layout.data_position(k).expect("data channel in layout")).collect();
    let to_position = |set: &BTreeSet<usize>| -> BTreeSet<usize> { set.iter().map(|&k| positions[k - 1]).collect() };
    let (categorical, means) = effective_imputation_options(config);
    let categorical_pos = to_position(&categorical);
    let train_length: Vec<usize> = train.iter().map(|&i| length[i]).collect();
    let train_stats = |x: &Array3<f64>| channel_stats(x.select(Axis(0), train).view(), &train_length, &positions, &categorical_pos);
    let raw_stats = train_stats(&x);
    let mut x = x;
    if config.standardise {
        standardise(&mut x, &length, &raw_stats, par);
    }

    // 7. impute with statistics of the (standardised) training data
    let (x, y) = if matches!(config.impute, ImputeMethod::None) {
        (x, y)
    } else {
        let fill_stats = if config.standardise { train_stats(&x) } else { raw_stats.clone() };
        let overrides: BTreeMap<usize, f64> = means
            .iter()
            .map(|(&k, &v)| {
                let pos = positions[k - 1];
                let v = match raw_stats.get(pos).filter(|_| config.standardise) {
                    Some(st) => (v - st.mean) / st.scale(),
                    None => v,
                };
                (pos, v)
            })
            .collect();
        let fill = FillValues::from_stats(&fill_stats, &categorical_pos, &overrides);
        impute(x, y, &length, &config.impute, &fill, par).map_err(|e| e.in_step("impute"))?
    };

    // 8. bind the requested split
    Ok(Dataset {
        name: config.dataset.to_string(),
        x: PaddedTensor3::new(x)?,
        y,
        length,
        stats: master_indexed(raw_stats, &data_channels),
        layout,
        assignment,
        split: config.split,
        target: info.target,
        seed,
        class_labels: info.class_labels,
        dropped_records: info.dropped_records,
    })
}

fn master_indexed(stats: ChannelStats, master_channels: &[usize]) -> ChannelStats {
    ChannelStats { channels: master_channels.to_vec(), stats: stats.stats }
}

/// Final tensor in layout order: optional time, data, masks, deltas.
fn assemble(xm: ArrayView3<'_, f64>, length: &[usize], tracked: &[usize], config: &PipelineConfig) -> Result<Array3<f64>> {
    let mut parts: Vec<Array3<f64>> = Vec::new();
    let first = if config.time { 0 } else { 1 };
    parts.push(xm.slice(s![.., .., first..]).to_owned());
    if config.mask || config.delta {
        let mask = observational_mask(xm, length, tracked);
        if config.delta {
            let times = xm.slice(s![.., .., 0]);
            let delta = time_delta(times, mask.view(), length)?;
            if config.mask {
                parts.push(mask);
            }
            parts.push(delta);
        } else {
            parts.push(mask);
        }
    }
    let views: Vec<ArrayView3<'_, f64>> = parts.iter().map(|p| p.view()).collect();
    ndarray::concatenate(Axis(2), &views).map_err(|e| Error::Shape(e.to_string()))
}
