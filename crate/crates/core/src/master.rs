//! The master data set: every sequence of a source, merged before splitting.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::TargetKind;
use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::physionet::{self, PatientRecord};
use crate::tensor::{append_time_channel, index_times, pad_to_longest, PaddedTensor3};
use crate::ts_format::{merge_train_test, parse_ts_file, RawSeries, SourceFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterInfo {
    /// Names of all master channels; index 0 is the time stamp.
    pub channel_names: Vec<String>,
    /// Whether the time stamp is itself a source channel that receives mask
    /// and delta channels (PhysioNet 2012 `Mins`).
    pub time_tracked: bool,
    pub target: TargetKind,
    pub class_labels: Option<Vec<String>>,
    /// Records skipped during ingestion (no usable rows).
    pub dropped_records: usize,
}

/// `X` with the time stamp in channel 0, targets and lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterData {
    pub x: PaddedTensor3,
    pub y: Array2<f64>,
    pub length: Vec<usize>,
    pub info: MasterInfo,
}

impl MasterData {
    pub fn n_data_channels(&self) -> usize {
        self.x.c() - 1
    }

    pub fn strata(&self) -> Vec<u64> {
        strata(&self.y, &self.length, self.info.target)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, s, _) = self.x.shape();
        if self.y.nrows() != n || self.length.len() != n {
            return Err(Error::Shape(format!("{n} sequences but y has {} rows and length {}", self.y.nrows(), self.length.len())));
        }
        if self.info.channel_names.len() != self.x.c() {
            return Err(Error::Shape("channel names do not match X".into()));
        }
        if let Some(i) = self.length.iter().position(|&l| l == 0 || l > s) {
            return Err(Error::Shape(format!("sequence {i} has invalid length {}", self.length[i])));
        }
        Ok(())
    }
}

/// Stratum per sequence: the class for one-hot targets, the binary outcome
/// for `(n, 1)` targets, "ever positive" for per-step targets.
pub fn strata(y: &Array2<f64>, length: &[usize], target: TargetKind) -> Vec<u64> {
    match target {
        TargetKind::Sequence if y.ncols() > 1 => y
            .outer_iter()
            .map(|row| row.iter().position(|&v| v == 1.0).unwrap_or(0) as u64)
            .collect(),
        TargetKind::Sequence => y.column(0).iter().map(|&v| v as u64).collect(),
        TargetKind::PerStep => y
            .outer_iter()
            .zip(length)
            .map(|(row, &len)| row.iter().take(len).any(|&v| v == 1.0) as u64)
            .collect(),
    }
}

fn find_files(root: &Path, pred: &dyn Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if pred(&path) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Builds the master set of a UEA/UCR problem from `<name>_TRAIN.ts` and
/// `<name>_TEST.ts` found anywhere under `raw_dir`.
pub fn ingest_uea(raw_dir: &Path, name: &str, par: Parallelism) -> Result<MasterData> {
    let want = |suffix: &str| format!("{name}_{suffix}.ts").to_ascii_lowercase();
    let locate = |suffix: &str| -> Result<PathBuf> {
        let target = want(suffix);
        find_files(raw_dir, &|p| file_name(p).to_ascii_lowercase() == target)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::MissingSources(format!("{} under {}", want(suffix), raw_dir.display())))
    };
    if !raw_dir.is_dir() {
        return Err(Error::MissingSources(raw_dir.display().to_string()));
    }
    let files = [(locate("TRAIN")?, SourceFile::TrainFile), (locate("TEST")?, SourceFile::TestFile)];
    let mut parsed = par.try_map(&files, |_, (path, src)| {
        let text = std::fs::read_to_string(path)?;
        parse_ts_file(&text, *src).map_err(|e| Error::TsFormat {
            line: 0,
            msg: format!("{}: {e}", path.display()),
        })
    })?;
    let (test_header, test) = parsed.pop().expect("two files");
    let (header, train) = parsed.pop().expect("two files");
    if test_header.class_labels != header.class_labels {
        log::warn!("train and test files declare different class labels; using the train file's");
    }
    let series = merge_train_test(train, test)?;
    from_series(&series, &header.class_labels)
}

/// Master set from parsed `.ts` series: index time stamps, one-hot targets.
pub fn from_series(series: &[RawSeries], class_labels: &[String]) -> Result<MasterData> {
    if series.is_empty() {
        return Err(Error::Shape("no series".into()));
    }
    let d = series[0].n_channels();
    let matrices: Vec<Array2<f64>> = series
        .iter()
        .map(|s| Array2::from_shape_fn((s.len(), d), |(t, c)| s.channels[c][t]))
        .collect();
    let (x, length) = pad_to_longest(&matrices)?;
    let x = append_time_channel(&x, &index_times(&length), &length)?;
    let mut y = Array2::zeros((series.len(), class_labels.len()));
    for (i, s) in series.iter().enumerate() {
        let k = class_labels
            .iter()
            .position(|l| *l == s.label)
            .ok_or_else(|| Error::Shape(format!("label {:?} not declared", s.label)))?;
        y[[i, k]] = 1.0;
    }
    let mut channel_names = vec!["time".to_string()];
    channel_names.extend((0..d).map(|c| format!("dim_{c}")));
    let master = MasterData {
        x,
        y,
        length,
        info: MasterInfo {
            channel_names,
            time_tracked: false,
            target: TargetKind::Sequence,
            class_labels: Some(class_labels.to_vec()),
            dropped_records: 0,
        },
    };
    master.validate()?;
    Ok(master)
}

/// Pads records into `X` with their own time stamps in channel 0.
pub fn from_records(records: &[PatientRecord], time_name: &str) -> Result<(PaddedTensor3, Vec<usize>, Vec<String>)> {
    let first = records.first().ok_or_else(|| Error::Shape("no records".into()))?;
    let matrices: Vec<Array2<f64>> = records
        .iter()
        .map(|r| {
            let d = r.channel_names.len();
            Array2::from_shape_fn((r.n_rows(), d), |(t, c)| r.values[t][c])
        })
        .collect();
    let (x, length) = pad_to_longest(&matrices)?;
    let times: Vec<Vec<f64>> = records.iter().map(|r| r.times.clone()).collect();
    let x = append_time_channel(&x, &times, &length)?;
    let mut names = vec![time_name.to_string()];
    names.extend(first.channel_names.iter().cloned());
    Ok((x, length, names))
}

/// PhysioNet 2012: every `.txt` record under a `set-*` directory, labelled by
/// the `Outcomes-*.txt` files.
pub fn ingest_physionet2012(raw_dir: &Path, par: Parallelism) -> Result<MasterData> {
    if !raw_dir.is_dir() {
        return Err(Error::MissingSources(raw_dir.display().to_string()));
    }
    let outcome_files = find_files(raw_dir, &|p| file_name(p).starts_with("Outcomes") && file_name(p).ends_with(".txt"))?;
    let record_files = find_files(raw_dir, &|p| {
        file_name(p).ends_with(".txt")
            && p.parent().is_some_and(|d| file_name(d).starts_with("set-"))
    })?;
    if outcome_files.is_empty() || record_files.is_empty() {
        return Err(Error::MissingSources(format!("PhysioNet 2012 records or outcomes under {}", raw_dir.display())));
    }
    let mut outcomes = HashMap::new();
    for f in &outcome_files {
        for (id, o) in physionet::parse_outcomes_2012(&std::fs::read_to_string(f)?)? {
            if outcomes.insert(id.clone(), o).is_some() {
                return Err(Error::physionet(id, "outcome listed in more than one file"));
            }
        }
    }
    let records = physionet::read_records(&record_files, par, |_, text| physionet::parse_patient_2012(text))?;
    let total = records.len();
    let records: Vec<PatientRecord> = records.into_iter().filter(|r| r.n_rows() > 0).collect();
    let dropped = total - records.len();
    if dropped > 0 {
        log::warn!("dropped {dropped} PhysioNet 2012 records without time series rows");
    }
    let y = records
        .iter()
        .map(|r| {
            outcomes
                .get(&r.record_id)
                .map(|o| f64::from(o.in_hospital_death))
                .ok_or_else(|| Error::physionet(&r.record_id, "no outcome for record"))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (x, length, names) = from_records(&records, physionet::CHANNELS_2012[0])?;
    let master = MasterData {
        x,
        y: Array2::from_shape_vec((y.len(), 1), y).map_err(|e| Error::Shape(e.to_string()))?,
        length,
        info: MasterInfo {
            channel_names: names,
            time_tracked: true,
            target: TargetKind::Sequence,
            class_labels: None,
            dropped_records: dropped,
        },
    };
    master.validate()?;
    Ok(master)
}

/// PhysioNet 2019: every `.psv` file under `raw_dir`. With `binary`, records
/// are cut to the first 72 hours with one label per patient; otherwise the
/// per-step labels become an `(n, s)` target.
pub fn ingest_physionet2019(raw_dir: &Path, binary: bool, par: Parallelism) -> Result<MasterData> {
    if !raw_dir.is_dir() {
        return Err(Error::MissingSources(raw_dir.display().to_string()));
    }
    let files = find_files(raw_dir, &|p| p.extension().is_some_and(|e| e == "psv"))?;
    if files.is_empty() {
        return Err(Error::MissingSources(format!("PhysioNet 2019 .psv files under {}", raw_dir.display())));
    }
    let records = physionet::read_records(&files, par, |path, text| {
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        physionet::parse_patient_2019(&id, text)
    })?;
    if let Some(r) = records.windows(2).find(|w| w[0].channel_names != w[1].channel_names) {
        return Err(Error::physionet(&r[1].record_id, "columns differ from other records"));
    }
    let total = records.len();
    let (records, labels): (Vec<PatientRecord>, Vec<u8>) = if binary {
        records.iter().filter_map(|r| physionet::to_binary_2019(r).ok()).unzip()
    } else {
        records.into_iter().filter(|r| r.n_rows() > 0).map(|r| (r, 0)).unzip()
    };
    let dropped = total - records.len();
    if dropped > 0 {
        log::warn!("dropped {dropped} PhysioNet 2019 records without usable rows");
    }
    let (x, length, names) = from_records(&records, physionet::TIME_COLUMN_2019)?;
    let (y, target) = if binary {
        let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        (Array2::from_shape_vec((y.len(), 1), y).map_err(|e| Error::Shape(e.to_string()))?, TargetKind::Sequence)
    } else {
        let mut y = Array2::from_elem((records.len(), x.s()), f64::NAN);
        for (mut row, r) in y.axis_iter_mut(Axis(0)).zip(&records) {
            for (t, &l) in r.step_labels.as_deref().unwrap_or_default().iter().enumerate() {
                row[t] = f64::from(l);
            }
        }
        (y, TargetKind::PerStep)
    };
    let master = MasterData {
        x,
        y,
        length,
        info: MasterInfo { channel_names: names, time_tracked: false, target, class_labels: None, dropped_records: dropped },
    };
    master.validate()?;
    Ok(master)
}
