//! PhysioNet 2012 (mortality) and 2019 (sepsis) per-patient record parsers.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::par::Parallelism;

/// Channel names of the wide 2012 matrix, time stamp first.
pub const CHANNELS_2012: [&str; 45] = [
    "Mins", "Albumin", "ALP", "ALT", "AST", "Bilirubin", "BUN", "Cholesterol", "Creatinine",
    "DiasABP", "FiO2", "GCS", "Glucose", "HCO3", "HCT", "HR", "K", "Lactate", "Mg", "MAP",
    "MechVent", "Na", "NIDiasABP", "NIMAP", "NISysABP", "PaCO2", "PaO2", "pH", "Platelets",
    "RespRate", "SaO2", "SysABP", "Temp", "TroponinI", "TroponinT", "Urine", "WBC", "Weight",
    "Age", "Gender", "Height", "ICUType1", "ICUType2", "ICUType3", "ICUType4",
];

/// Index of MechVent in [`CHANNELS_2012`].
pub const MECHVENT_2012: usize = 20;
const FIRST_STATIC_2012: usize = 38;
const ICUTYPE_2012: usize = 41;

/// Column of the 2019 files holding hours since ICU admission.
pub const TIME_COLUMN_2019: &str = "ICULOS";
pub const LABEL_COLUMN_2019: &str = "SepsisLabel";
/// Hours of data kept by the binary 2019 variant.
pub const BINARY_2019_HOURS: f64 = 72.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Statics2012 {
    pub age: f64,
    pub gender: f64,
    pub height: f64,
    /// 1..=4, `None` when missing.
    pub icu_type: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub record_id: String,
    /// Minutes since admission (2012) or ICULOS hours (2019), strictly increasing.
    pub times: Vec<f64>,
    /// One row per time stamp, one column per entry of `channel_names`.
    pub values: Vec<Vec<f64>>,
    /// Data channel names, time channel excluded.
    pub channel_names: Vec<String>,
    pub statics: Option<Statics2012>,
    /// Per-row SepsisLabel (2019 only).
    pub step_labels: Option<Vec<u8>>,
}

impl PatientRecord {
    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    /// Rows with the time stamp prepended as column 0.
    pub fn wide(&self) -> Vec<Vec<f64>> {
        self.times
            .iter()
            .zip(&self.values)
            .map(|(t, row)| std::iter::once(*t).chain(row.iter().copied()).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome2012 {
    pub in_hospital_death: u8,
}

fn channel_2012(parameter: &str) -> Option<usize> {
    let name = match parameter {
        "TropI" => "TroponinI",
        "TropT" => "TroponinT",
        p => p,
    };
    CHANNELS_2012[1..FIRST_STATIC_2012].iter().position(|c| *c == name).map(|i| i + 1)
}

fn parse_clock(record: &str, stamp: &str) -> Result<f64> {
    let (h, m) = stamp
        .split_once(':')
        .ok_or_else(|| Error::physionet(record, format!("unparseable time stamp {stamp:?}")))?;
    match (h.trim().parse::<u32>(), m.trim().parse::<u32>()) {
        (Ok(h), Ok(m)) if m < 60 => Ok(f64::from(h * 60 + m)),
        _ => Err(Error::physionet(record, format!("unparseable time stamp {stamp:?}"))),
    }
}

fn missing_if_negative_one(v: f64) -> f64 {
    if v == -1.0 {
        f64::NAN
    } else {
        v
    }
}

/// Parses one long-format 2012 patient file (`Time,Parameter,Value`) into the
/// wide channel layout of [`CHANNELS_2012`].
///
/// Only time-series parameters create rows. Static descriptors are broadcast
/// to every row, ICUType is one-hot encoded and every `-1` becomes NaN. A
/// parameter measured twice in the same minute keeps the later value.
pub fn parse_patient_2012(text: &str) -> Result<PatientRecord> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some(h) if h.replace(' ', "").eq_ignore_ascii_case("Time,Parameter,Value") => {}
        _ => return Err(Error::physionet("?", "expected header Time,Parameter,Value")),
    }

    let mut record_id: Option<String> = None;
    let mut statics = Statics2012 { age: f64::NAN, gender: f64::NAN, height: f64::NAN, icu_type: None };
    let mut cells: BTreeMap<u64, Vec<(usize, f64)>> = BTreeMap::new();

    for line in lines {
        let rec = record_id.as_deref().unwrap_or("?");
        let mut parts = line.splitn(3, ',');
        let (Some(time), Some(param), Some(value)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::physionet(rec, format!("malformed row {line:?}")));
        };
        let param = param.trim();
        let value = value.trim();
        if param.is_empty() {
            continue;
        }
        let minutes = parse_clock(rec, time)?;
        if param == "RecordID" {
            record_id = Some(value.trim_end_matches(".0").to_string());
            continue;
        }
        let v: f64 = value
            .parse()
            .map_err(|_| Error::physionet(rec, format!("invalid value {value:?} for {param}")))?;
        let v = missing_if_negative_one(v);
        match param {
            "Age" => statics.age = v,
            "Gender" => statics.gender = v,
            "Height" => statics.height = v,
            "ICUType" => {
                statics.icu_type = match v {
                    x if x.is_nan() => None,
                    x if (1.0..=4.0).contains(&x) && x.fract() == 0.0 => Some(x as u8),
                    x => return Err(Error::physionet(rec, format!("invalid ICUType {x}"))),
                }
            }
            _ => {
                let ch = channel_2012(param)
                    .ok_or_else(|| Error::physionet(rec, format!("unknown parameter {param:?}")))?;
                cells.entry(minutes as u64).or_default().push((ch, v));
            }
        }
    }

    let record_id = record_id.ok_or_else(|| Error::physionet("?", "missing RecordID row"))?;
    let n_data = CHANNELS_2012.len() - 1;
    let mut static_cols = vec![f64::NAN; n_data - (FIRST_STATIC_2012 - 1)];
    static_cols[0] = statics.age;
    static_cols[1] = statics.gender;
    static_cols[2] = statics.height;
    if let Some(icu) = statics.icu_type {
        for (k, slot) in static_cols[3..].iter_mut().enumerate() {
            *slot = if k + 1 == icu as usize { 1.0 } else { 0.0 };
        }
    }
    debug_assert_eq!(FIRST_STATIC_2012 + 3, ICUTYPE_2012);

    let mut times = Vec::with_capacity(cells.len());
    let mut values = Vec::with_capacity(cells.len());
    for (minute, obs) in cells {
        let mut row = vec![f64::NAN; n_data];
        for (ch, v) in obs {
            row[ch - 1] = v;
        }
        row[FIRST_STATIC_2012 - 1..].copy_from_slice(&static_cols);
        times.push(minute as f64);
        values.push(row);
    }

    Ok(PatientRecord {
        record_id,
        times,
        values,
        channel_names: CHANNELS_2012[1..].iter().map(|s| s.to_string()).collect(),
        statics: Some(statics),
        step_labels: None,
    })
}

/// Parses an `Outcomes-*.txt` file into record id → in-hospital death.
pub fn parse_outcomes_2012(text: &str) -> Result<HashMap<String, Outcome2012>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::physionet("outcomes", "empty outcomes file"))?
        .split(',')
        .map(str::trim)
        .collect();
    let id_col = header.iter().position(|h| *h == "RecordID").unwrap_or(0);
    let death_col = header
        .iter()
        .position(|h| h.eq_ignore_ascii_case("In-hospital_death"))
        .unwrap_or(header.len().saturating_sub(1));

    let mut out = HashMap::new();
    for line in lines {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let (Some(id), Some(label)) = (cols.get(id_col), cols.get(death_col)) else {
            return Err(Error::physionet("outcomes", format!("short row {line:?}")));
        };
        let in_hospital_death = match *label {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::physionet(*id, format!("outcome {other:?} is not 0 or 1")));
            }
        };
        if out.insert(id.to_string(), Outcome2012 { in_hospital_death }).is_some() {
            return Err(Error::physionet(*id, "duplicate record id in outcomes"));
        }
    }
    Ok(out)
}

/// Parses one pipe-separated 2019 `.psv` file. `ICULOS` becomes the time
/// stamp, `SepsisLabel` the per-row target, every other column a data channel.
pub fn parse_patient_2019(record_id: &str, text: &str) -> Result<PatientRecord> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::physionet(record_id, "empty file"))?
        .split('|')
        .map(str::trim)
        .collect();
    let time_col = header
        .iter()
        .position(|h| *h == TIME_COLUMN_2019)
        .ok_or_else(|| Error::physionet(record_id, "missing ICULOS column"))?;
    let label_col = header
        .iter()
        .position(|h| *h == LABEL_COLUMN_2019)
        .ok_or_else(|| Error::physionet(record_id, "missing SepsisLabel column"))?;
    let data_cols: Vec<usize> = (0..header.len()).filter(|&i| i != time_col && i != label_col).collect();

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row_no, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split('|').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(Error::physionet(
                record_id,
                format!("row {} has {} columns, header has {}", row_no + 1, cells.len(), header.len()),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            if s.is_empty() || s.eq_ignore_ascii_case("nan") {
                Ok(f64::NAN)
            } else {
                s.parse().map_err(|_| Error::physionet(record_id, format!("invalid value {s:?}")))
            }
        };
        let t = parse(cells[time_col])?;
        if t.is_nan() {
            return Err(Error::physionet(record_id, format!("row {} has no ICULOS", row_no + 1)));
        }
        if times.last().is_some_and(|&prev| t <= prev) {
            return Err(Error::physionet(record_id, "ICULOS is not strictly increasing"));
        }
        let label = match parse(cells[label_col])? {
            0.0 => 0,
            1.0 => 1,
            x => return Err(Error::physionet(record_id, format!("SepsisLabel {x} is not 0 or 1"))),
        };
        times.push(t);
        values.push(data_cols.iter().map(|&c| parse(cells[c])).collect::<Result<Vec<_>>>()?);
        labels.push(label);
    }

    Ok(PatientRecord {
        record_id: record_id.to_string(),
        times,
        values,
        channel_names: data_cols.iter().map(|&c| header[c].to_string()).collect(),
        statics: None,
        step_labels: Some(labels),
    })
}

/// Keeps rows within the first 72 ICU hours; the label is 1 when any row of
/// the full stay is septic.
pub fn to_binary_2019(record: &PatientRecord) -> Result<(PatientRecord, u8)> {
    let labels = record
        .step_labels
        .as_ref()
        .ok_or_else(|| Error::physionet(&record.record_id, "record has no per-step labels"))?;
    let label = labels.iter().copied().max().unwrap_or(0);
    let keep = record.times.iter().take_while(|&&t| t <= BINARY_2019_HOURS).count();
    if keep == 0 {
        return Err(Error::physionet(&record.record_id, "no rows within the first 72 hours"));
    }
    let truncated = PatientRecord {
        record_id: record.record_id.clone(),
        times: record.times[..keep].to_vec(),
        values: record.values[..keep].to_vec(),
        channel_names: record.channel_names.clone(),
        statics: None,
        step_labels: Some(labels[..keep].to_vec()),
    };
    Ok((truncated, label))
}

/// Sort key that orders numeric ids numerically and everything else after,
/// lexicographically.
pub fn record_sort_key(id: &str) -> (u8, u64, String) {
    match id.parse::<u64>() {
        Ok(n) => (0, n, String::new()),
        Err(_) => (1, 0, id.to_string()),
    }
}

/// Parses every file in parallel (per `par`) and returns the records sorted by
/// record id, so the result does not depend on file order or thread count.
pub fn read_records<F>(files: &[PathBuf], par: Parallelism, parse: F) -> Result<Vec<PatientRecord>>
where
    F: Fn(&Path, &str) -> Result<PatientRecord> + Sync + Send,
{
    let mut records = par.try_map(files, |_, path| {
        let text = std::fs::read_to_string(path)?;
        parse(path, &text)
    })?;
    records.sort_by_cached_key(|r| record_sort_key(&r.record_id));
    if let Some(w) = records.windows(2).find(|w| w[0].record_id == w[1].record_id) {
        return Err(Error::physionet(&w[0].record_id, "duplicate record across files"));
    }
    Ok(records)
}
