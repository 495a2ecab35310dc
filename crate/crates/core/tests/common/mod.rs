//! Synthetic source files shaped like the real archives.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Small deterministic generator so fixtures never depend on the library's RNG.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 42) as f64
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

pub fn raw_dir(root: &Path, name: &str) -> PathBuf {
    root.join(".torchtime").join("raw").join(name)
}

pub struct UeaSeries {
    pub label: String,
    pub dims: Vec<Vec<Option<f64>>>,
}

pub fn ts_text(name: &str, labels: &[&str], series: &[UeaSeries]) -> String {
    let equal = series.windows(2).all(|w| w[0].dims[0].len() == w[1].dims[0].len());
    let missing = series.iter().any(|s| s.dims.iter().flatten().any(Option::is_none));
    let mut out = String::new();
    writeln!(out, "# synthetic fixture").unwrap();
    writeln!(out, "@problemName {name}").unwrap();
    writeln!(out, "@timeStamps false").unwrap();
    writeln!(out, "@missing {missing}").unwrap();
    writeln!(out, "@univariate {}", series[0].dims.len() == 1).unwrap();
    if series[0].dims.len() > 1 {
        writeln!(out, "@dimensions {}", series[0].dims.len()).unwrap();
    }
    writeln!(out, "@equalLength {equal}").unwrap();
    if equal {
        writeln!(out, "@seriesLength {}", series[0].dims[0].len()).unwrap();
    }
    writeln!(out, "@classLabel true {}", labels.join(" ")).unwrap();
    writeln!(out, "@data").unwrap();
    for s in series {
        for dim in &s.dims {
            let cells: Vec<String> = dim.iter().map(|v| v.map_or("?".to_string(), |v| format!("{v:?}"))).collect();
            write!(out, "{}:", cells.join(",")).unwrap();
        }
        writeln!(out, "{}", s.label).unwrap();
    }
    out
}

fn class_series(rng: &mut Lcg, class: usize, len: usize, n_dims: usize) -> Vec<Vec<Option<f64>>> {
    (0..n_dims)
        .map(|d| {
            (0..len)
                .map(|t| {
                    let base = (t as f64 / 20.0 + class as f64 + d as f64).sin() * (1.0 + class as f64);
                    Some(base + rng.uniform() - 0.5)
                })
                .collect()
        })
        .collect()
}

/// Writes `<name>_TRAIN.ts`/`<name>_TEST.ts` with the given per-class counts.
pub fn write_uea(root: &Path, name: &str, train: &[usize], test: &[usize], len: usize, n_dims: usize, seed: u64) -> PathBuf {
    let dir = raw_dir(root, name);
    fs::create_dir_all(&dir).unwrap();
    let labels: Vec<String> = (0..train.len()).map(|k| k.to_string()).collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let mut rng = Lcg::new(seed);
    for (suffix, counts) in [("TRAIN", train), ("TEST", test)] {
        let mut series = Vec::new();
        for (class, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                series.push(UeaSeries { label: labels[class].clone(), dims: class_series(&mut rng, class, len, n_dims) });
            }
        }
        // interleave classes like the real files
        let mut order: Vec<usize> = (0..series.len()).collect();
        order.sort_by_key(|&i| (i * 7919) % series.len().max(1));
        let series: Vec<UeaSeries> = order.into_iter().map(|i| UeaSeries { label: series[i].label.clone(), dims: series[i].dims.clone() }).collect();
        fs::write(dir.join(format!("{name}_{suffix}.ts")), ts_text(name, &label_refs, &series)).unwrap();
    }
    dir
}

/// ArrowHead-shaped pool: 36 training and 175 test series of length 251,
/// one dimension, classes 0/1/2 with 81/65/65 series overall.
pub fn arrowhead(root: &Path) -> PathBuf {
    write_uea(root, "ArrowHead", &[12, 12, 12], &[69, 53, 53], 251, 1, 211)
}

/// Unequal-length multivariate pool with native missing values.
pub fn ragged_uea(root: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let dir = raw_dir(root, name);
    fs::create_dir_all(&dir).unwrap();
    let mut rng = Lcg::new(seed);
    let mut make = |count: usize| -> Vec<UeaSeries> {
        (0..count)
            .map(|i| {
                let class = i % 2;
                let len = 5 + rng.below(40) as usize;
                let mut dims = class_series(&mut rng, class, len, 3);
                for dim in dims.iter_mut() {
                    for v in dim.iter_mut() {
                        if rng.uniform() < 0.1 {
                            *v = None;
                        }
                    }
                    dim[0] = Some(rng.uniform());
                }
                UeaSeries { label: ["a", "b"][class].to_string(), dims }
            })
            .collect()
    };
    let train = make(n / 2);
    let test = make(n - n / 2);
    fs::write(dir.join(format!("{name}_TRAIN.ts")), ts_text(name, &["a", "b"], &train)).unwrap();
    fs::write(dir.join(format!("{name}_TEST.ts")), ts_text(name, &["a", "b"], &test)).unwrap();
    dir
}

pub const SERIES_2012: [&str; 36] = [
    "Albumin", "ALP", "ALT", "AST", "Bilirubin", "BUN", "Cholesterol", "Creatinine", "DiasABP", "FiO2", "GCS",
    "Glucose", "HCO3", "HCT", "HR", "K", "Lactate", "Mg", "MAP", "MechVent", "Na", "NIDiasABP", "NIMAP",
    "NISysABP", "PaCO2", "PaO2", "pH", "Platelets", "RespRate", "SaO2", "SysABP", "Temp", "TroponinI",
    "TroponinT", "Urine", "WBC",
];

/// `n` PhysioNet 2012 records split over `set-a`/`set-b` with outcome files.
/// Every fifth record dies in hospital; record 3 has no time series rows.
pub fn physionet2012(root: &Path, n: usize, seed: u64) -> PathBuf {
    let dir = raw_dir(root, "physionet2012");
    let mut rng = Lcg::new(seed);
    let mut outcomes = [String::new(), String::new()];
    for o in outcomes.iter_mut() {
        o.push_str("RecordID,SAPS-I,SOFA,Length_of_stay,Survival,In-hospital_death\n");
    }
    for i in 0..n {
        let set = i % 2;
        let set_dir = dir.join(["set-a", "set-b"][set]);
        fs::create_dir_all(&set_dir).unwrap();
        let id = 132_539 + i;
        let mut text = String::from("Time,Parameter,Value\n");
        writeln!(text, "00:00,RecordID,{id}").unwrap();
        writeln!(text, "00:00,Age,{}", 40 + rng.below(50)).unwrap();
        writeln!(text, "00:00,Gender,{}", rng.below(2)).unwrap();
        writeln!(text, "00:00,Height,{}", if i % 4 == 0 { "-1".to_string() } else { format!("{}", 150 + rng.below(40)) }).unwrap();
        writeln!(text, "00:00,ICUType,{}", 1 + i % 4).unwrap();
        if i != 3 {
            writeln!(text, "00:00,Weight,{}", 60 + rng.below(40)).unwrap();
            let steps = 2 + rng.below(12);
            let mut minute = rng.below(30);
            for _ in 0..steps {
                let stamp = format!("{:02}:{:02}", minute / 60, minute % 60);
                for _ in 0..(1 + rng.below(5)) {
                    let p = SERIES_2012[rng.below(SERIES_2012.len() as u64) as usize];
                    let v = match p {
                        "MechVent" => 1.0,
                        "GCS" => (3 + rng.below(13)) as f64,
                        _ => (rng.uniform() * 100.0 * 100.0).round() / 100.0,
                    };
                    writeln!(text, "{stamp},{p},{v}").unwrap();
                }
                minute += 1 + rng.below(180);
            }
        }
        fs::write(set_dir.join(format!("{id}.txt")), text).unwrap();
        let death = u8::from(i % 5 == 0);
        writeln!(outcomes[set], "{id},10,5,8,-1,{death}").unwrap();
    }
    fs::write(dir.join("Outcomes-a.txt"), &outcomes[0]).unwrap();
    fs::write(dir.join("Outcomes-b.txt"), &outcomes[1]).unwrap();
    dir
}

pub const COLUMNS_2019: [&str; 41] = [
    "HR", "O2Sat", "Temp", "SBP", "MAP", "DBP", "Resp", "EtCO2", "BaseExcess", "HCO3", "FiO2", "pH", "PaCO2",
    "SaO2", "AST", "BUN", "Alkalinephos", "Calcium", "Chloride", "Creatinine", "Bilirubin_direct", "Glucose",
    "Lactate", "Magnesium", "Phosphate", "Potassium", "Bilirubin_total", "TroponinI", "Hct", "Hgb", "PTT", "WBC",
    "Fibrinogen", "Platelets", "Age", "Gender", "Unit1", "Unit2", "HospAdmTime", "ICULOS", "SepsisLabel",
];

/// `n` PhysioNet 2019 `.psv` records. Every fourth patient turns septic in
/// its last six hours; stays run up to 120 hours so some exceed 72.
pub fn physionet2019(root: &Path, n: usize, seed: u64) -> PathBuf {
    let dir = raw_dir(root, "physionet2019").join("training_setA");
    fs::create_dir_all(&dir).unwrap();
    let mut rng = Lcg::new(seed);
    for i in 0..n {
        let hours = 3 + rng.below(118) as usize;
        let septic = i % 4 == 0;
        let mut text = COLUMNS_2019.join("|");
        text.push('\n');
        for h in 1..=hours {
            let mut cells: Vec<String> = Vec::new();
            for col in &COLUMNS_2019[..39] {
                let observed = matches!(*col, "Age" | "Gender" | "HospAdmTime") || rng.uniform() < 0.3;
                cells.push(if observed { format!("{:.2}", rng.uniform() * 100.0) } else { "NaN".into() });
            }
            cells.push(h.to_string());
            cells.push(u8::from(septic && h + 6 > hours).to_string());
            text.push_str(&cells.join("|"));
            text.push('\n');
        }
        fs::write(dir.join(format!("p{:06}.psv", i + 1)), text).unwrap();
    }
    dir
}
