//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{s, Array2, Array3};
use tsprep_core::batching::{pack, sort_by_length, unpack, Batch};
use tsprep_core::cache::{self, CacheLookup, CacheMeta};
use tsprep_core::dataset::TargetKind;
use tsprep_core::export::{self, ExportFormat};
use tsprep_core::master::{MasterData, MasterInfo};
use tsprep_core::pipeline::{build_from_master, build_with, DatasetKind, PipelineConfig};
use tsprep_core::rng::SeededRng;
use tsprep_core::splits::{stratified_split, Split, SplitSpec};
use tsprep_core::stats::{channel_stats, standardise};
use tsprep_core::tensor::PaddedTensor3;
use tsprep_core::tensor_file::DType;
use tsprep_core::transforms::{impute, observational_mask, simulate_missing, time_delta, FillValues};
use tsprep_core::{ImputeMethod, MissingSpec, Parallelism};

type Check = Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const NAN: f64 = f64::NAN;

fn same_bits(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> bool {
    let a: Vec<u64> = a.into_iter().map(f64::to_bits).collect();
    let b: Vec<u64> = b.into_iter().map(f64::to_bits).collect();
    a == b
}

fn one_sequence_master(rows: &[[f64; 4]]) -> MasterData {
    let x = Array3::from_shape_fn((1, rows.len(), 4), |(_, t, c)| rows[t][c]);
    MasterData {
        x: PaddedTensor3::new(x).unwrap(),
        y: ndarray::array![[1.0, 0.0]],
        length: vec![rows.len()],
        info: MasterInfo {
            channel_names: ["time", "x", "y", "force"].map(String::from).to_vec(),
            time_tracked: false,
            target: TargetKind::Sequence,
            class_labels: Some(vec!["a".into(), "b".into()]),
            dropped_records: 0,
        },
    }
}

/// First five observations of the simulated CharacterTrajectories sequence.
const LISTING: [[f64; 4]; 5] = [
    [0.0, NAN, 0.1640, 0.6631],
    [1.0, -0.0678, 0.2123, NAN],
    [2.0, -0.1190, 0.2448, NAN],
    [3.0, NAN, NAN, 1.0139],
    [4.0, NAN, 0.2550, NAN],
];

fn listing_config(mask: bool, delta: bool) -> PipelineConfig {
    let mut c = PipelineConfig::new(DatasetKind::Uea("CharacterTrajectories".into()), 0.7);
    c.seed = Some(456);
    c.mask = mask;
    c.delta = delta;
    c
}

fn criterion_1() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::arrowhead(dir.path());
    for seed in [123, 7, 2024] {
        let mut c = PipelineConfig::new(DatasetKind::Uea("ArrowHead".into()), 0.7);
        c.val_prop = Some(0.2);
        c.seed = Some(seed);
        c.path = dir.path().to_path_buf();
        let ds = build_with(&c, Parallelism::default()).map_err(|e| e.to_string())?;
        ensure!(ds.full_x().n() == 211, "pool has {} sequences", ds.full_x().n());
        ensure!(ds.assignment().sizes() == (148, 42, 21), "seed {seed}: sizes {:?}", ds.assignment().sizes());
        ensure!(ds.x_train().dim() == (148, 251, 2), "X_train {:?}", ds.x_train().dim());
        ensure!(ds.x_val().dim() == (42, 251, 2), "X_val {:?}", ds.x_val().dim());
        ensure!(ds.y_test().dim() == (21, 3), "y_test {:?}", ds.y_test().dim());
    }
    Ok("148/42/21 for 3 seeds, X_train (148, 251, 2), X_val (42, 251, 2), y_test (21, 3)".into())
}

fn criterion_2() -> Check {
    let golden = [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [1.0, 1.0, 2.0], [1.0, 1.0, 3.0], [2.0, 2.0, 1.0]];
    let ds = build_from_master(&listing_config(false, true), one_sequence_master(&LISTING), Parallelism::Sequential)
        .map_err(|e| e.to_string())?;
    let x = ds.full_x().as_array();
    ensure!(x.dim().2 == 7, "expected 7 channels, found {}", x.dim().2);
    for (t, row) in golden.iter().enumerate() {
        let got: Vec<f64> = (4..7).map(|c| x[[0, t, c]]).collect();
        ensure!(got == row.to_vec(), "row {t}: {got:?} != {row:?}");
    }
    // the same pattern fed straight to the delta transform
    let mask = observational_mask(one_sequence_master(&LISTING).x.view(), &[5], &[1, 2, 3]);
    let times = Array2::from_shape_fn((1, 5), |(_, t)| t as f64);
    let delta = time_delta(times.view(), mask.view(), &[5]).map_err(|e| e.to_string())?;
    for (t, row) in golden.iter().enumerate() {
        ensure!(delta.slice(s![0, t, ..]).to_vec() == row.to_vec(), "direct transform row {t}");
    }
    Ok("delta rows [[0,0,0],[1,1,1],[1,1,2],[1,1,3],[2,2,1]] exact".into())
}

fn criterion_3() -> Check {
    let golden = [[0.0, 1.0, 1.0], [1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
    let ds = build_from_master(&listing_config(true, false), one_sequence_master(&LISTING), Parallelism::Sequential)
        .map_err(|e| e.to_string())?;
    let x = ds.full_x().as_array();
    for (t, row) in golden.iter().enumerate() {
        let got: Vec<f64> = (4..7).map(|c| x[[0, t, c]]).collect();
        ensure!(got == row.to_vec(), "row {t}: {got:?} != {row:?}");
        // data channels pass through untouched
        ensure!(same_bits((0..4).map(|c| x[[0, t, c]]), LISTING[t]), "row {t} data changed");
    }
    Ok("mask rows match the printed 0/1 pattern".into())
}

const APPENDIX_C: [&str; 45] = [
    "Mins", "Albumin", "ALP", "ALT", "AST", "Bilirubin", "BUN", "Cholesterol", "Creatinine", "DiasABP", "FiO2",
    "GCS", "Glucose", "HCO3", "HCT", "HR", "K", "Lactate", "Mg", "MAP", "MechVent", "Na", "NIDiasABP", "NIMAP",
    "NISysABP", "PaCO2", "PaO2", "pH", "Platelets", "RespRate", "SaO2", "SysABP", "Temp", "TroponinI",
    "TroponinT", "Urine", "WBC", "Weight", "Age", "Gender", "Height", "ICUType1", "ICUType2", "ICUType3",
    "ICUType4",
];

fn criterion_4() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::physionet2012(dir.path(), 30, 11);
    // one hand-written record with known positions
    let set = common::raw_dir(dir.path(), "physionet2012").join("set-a");
    std::fs::write(
        set.join("200001.txt"),
        "Time,Parameter,Value\n00:00,RecordID,200001\n00:00,Age,70\n00:00,Gender,1\n00:00,Height,-1\n00:00,ICUType,3\n\
         00:00,Weight,80\n00:37,HR,88\n00:37,TropI,2.5\n01:30,MechVent,1\n",
    )
    .map_err(|e| e.to_string())?;
    let outcomes = common::raw_dir(dir.path(), "physionet2012").join("Outcomes-a.txt");
    let mut text = std::fs::read_to_string(&outcomes).map_err(|e| e.to_string())?;
    text.push_str("200001,1,1,1,1,1\n");
    std::fs::write(&outcomes, text).map_err(|e| e.to_string())?;

    let mut c = PipelineConfig::new(DatasetKind::PhysioNet2012, 0.7);
    c.path = dir.path().to_path_buf();
    c.seed = Some(3);
    let plain = build_with(&c, Parallelism::default()).map_err(|e| e.to_string())?;
    ensure!(plain.layout().names() == APPENDIX_C.map(String::from).to_vec(), "order {:?}", plain.layout().names());

    c.mask = true;
    c.delta = true;
    let full = build_with(&c, Parallelism::default()).map_err(|e| e.to_string())?;
    ensure!(full.full_x().c() == 135, "time+mask+delta gives {} channels", full.full_x().c());
    c.time = false;
    let no_time = build_with(&c, Parallelism::default()).map_err(|e| e.to_string())?;
    ensure!(no_time.full_x().c() == 134, "mask+delta without time gives {} channels", no_time.full_x().c());

    // the hand-written record is the last by id
    let x = plain.full_x().as_array();
    let i = x.dim().0 - 1;
    let row = |t: usize| x.slice(s![i, t, ..]).to_vec();
    ensure!(plain.full_length()[i] == 3, "length {}", plain.full_length()[i]);
    ensure!(row(0)[0] == 0.0 && row(1)[0] == 37.0 && row(2)[0] == 90.0, "time stamps");
    ensure!(row(1)[15] == 88.0 && row(1)[33] == 2.5 && row(2)[20] == 1.0, "HR/TroponinI/MechVent positions");
    ensure!(row(0)[37] == 80.0 && row(2)[38] == 70.0 && row(1)[39] == 1.0 && row(0)[40].is_nan(), "statics");
    ensure!(row(2)[41..45] == [0.0, 0.0, 1.0, 0.0], "ICUType one-hot {:?}", &row(2)[41..45]);
    Ok("45 channels in order; 135 with time+mask+delta, 134 without time".into())
}

fn full_tensor(rng: &mut common::Lcg, n: usize, s: usize, c: usize) -> (Array3<f64>, Vec<usize>) {
    let lengths: Vec<usize> = (0..n).map(|_| 1 + rng.below(s as u64) as usize).collect();
    let x = Array3::from_shape_fn((n, s, c), |(i, t, _)| if t < lengths[i] { rng.uniform() } else { NAN });
    (x, lengths)
}

fn criterion_5() -> Check {
    let mut rng = common::Lcg::new(5);
    let mut cases = 0;
    for &p in &[0.2, 0.5, 0.8] {
        for trial in 0..50 {
            let (x0, len) = full_tensor(&mut rng, 8, 40, 3);
            let mut x = x0.clone();
            let mut r = SeededRng::new(trial);
            simulate_missing(&mut x, &len, &[0, 1, 2], &MissingSpec::Scalar(p), &mut r, Parallelism::default())
                .map_err(|e| e.to_string())?;
            for i in 0..8 {
                let mut dropped = 0;
                for t in 0..len[i] {
                    let nans = (0..3).filter(|&c| x[[i, t, c]].is_nan()).count();
                    ensure!(nans == 0 || nans == 3, "p={p}: row {t} of sequence {i} partially dropped");
                    dropped += usize::from(nans == 3);
                }
                let expected = (p * len[i] as f64).round() as usize;
                ensure!(dropped == expected, "p={p}: sequence {i} lost {dropped}, expected {expected}");
                ensure!(x.slice(s![i, len[i].., ..]).iter().all(|v| v.is_nan()), "padding disturbed");
            }
            cases += 1;
        }
    }
    for trial in 0..150u64 {
        let ps: Vec<f64> = match trial {
            0 => vec![0.8, 0.2, 0.5],
            _ => (0..3).map(|_| (rng.uniform() * 100.0).round() / 100.0).collect(),
        };
        let (x0, len) = full_tensor(&mut rng, 8, 40, 3);
        let mut seq = x0.clone();
        let mut par = x0.clone();
        let spec = MissingSpec::PerChannel(ps.clone());
        simulate_missing(&mut seq, &len, &[0, 1, 2], &spec, &mut SeededRng::new(trial), Parallelism::Sequential)
            .map_err(|e| e.to_string())?;
        simulate_missing(&mut par, &len, &[0, 1, 2], &spec, &mut SeededRng::new(trial), Parallelism::Rayon)
            .map_err(|e| e.to_string())?;
        ensure!(same_bits(seq.iter().copied(), par.iter().copied()), "sequential and parallel differ");
        for i in 0..8 {
            for (c, &p) in ps.iter().enumerate() {
                let dropped = (0..len[i]).filter(|&t| seq[[i, t, c]].is_nan()).count();
                let expected = (p * len[i] as f64).round() as usize;
                ensure!(dropped == expected, "{ps:?}: channel {c} of sequence {i} lost {dropped}, expected {expected}");
            }
        }
        cases += 1;
    }
    Ok(format!("{cases} cases: counts equal round(p*length), scalar rows all-or-nothing"))
}

/// Most frequent value, smallest on ties.
fn oracle_mode(values: &[f64]) -> Option<f64> {
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for v in values {
        *counts.entry(v.to_bits()).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts
        .into_iter()
        .filter(|&(_, n)| n == best)
        .map(|(b, _)| f64::from_bits(b))
        .min_by(f64::total_cmp)
}

fn forward_oracle(col: &[f64], len: usize, fill: f64) -> Vec<f64> {
    (0..col.len())
        .map(|t| {
            if t >= len {
                return NAN;
            }
            (0..=t).rev().map(|k| col[k]).find(|v| !v.is_nan()).unwrap_or(fill)
        })
        .collect()
}

fn imputation_case(rng: &mut common::Lcg) -> Check {
    let n = 1 + rng.below(6) as usize;
    let s = 1 + rng.below(30) as usize;
    let d = 1 + rng.below(4) as usize;
    let lengths: Vec<usize> = (0..n).map(|_| 1 + rng.below(s as u64) as usize).collect();
    let categorical: BTreeSet<usize> = (0..d).filter(|_| rng.below(3) == 0).collect();
    let mut data = Array3::from_shape_fn((n, s, d), |(i, t, c)| {
        if t >= lengths[i] || rng.uniform() < 0.4 {
            NAN
        } else if categorical.contains(&c) {
            rng.below(3) as f64
        } else {
            (rng.uniform() * 100.0).round() / 10.0
        }
    });
    if rng.below(5) == 0 {
        // a channel without observations forces an override or an error
        data.slice_mut(s![.., .., 0]).fill(NAN);
    }
    let overrides: BTreeMap<usize, f64> = (0..d).filter(|_| rng.below(4) == 0).map(|c| (c, -7.5 - c as f64)).collect();

    // mask and delta channels ride along and must not change
    let channels: Vec<usize> = (0..d).collect();
    let mask = observational_mask(data.view(), &lengths, &channels);
    let times = Array2::from_shape_fn((n, s), |(i, t)| if t < lengths[i] { t as f64 } else { NAN });
    let delta = time_delta(times.view(), mask.view(), &lengths).map_err(|e| e.to_string())?;
    let x = ndarray::concatenate(ndarray::Axis(2), &[data.view(), mask.view(), delta.view()]).unwrap();
    let y = Array2::zeros((n, 1));

    let stats = channel_stats(x.view(), &lengths, &channels, &categorical);
    let fill = FillValues::from_stats(&stats, &categorical, &overrides);
    let expected_fill: Vec<Option<f64>> = (0..d)
        .map(|c| {
            if let Some(v) = overrides.get(&c) {
                return Some(*v);
            }
            let observed: Vec<f64> = (0..n)
                .flat_map(|i| (0..lengths[i]).map(move |t| (i, t)))
                .map(|(i, t)| data[[i, t, c]])
                .filter(|v| !v.is_nan())
                .collect();
            if observed.is_empty() {
                None
            } else if categorical.contains(&c) {
                oracle_mode(&observed)
            } else {
                Some(observed.iter().sum::<f64>() / observed.len() as f64)
            }
        })
        .collect();
    for c in 0..d {
        let (a, b) = (fill.values[c], expected_fill[c]);
        let ok = match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12 * b.abs().max(1.0),
            (None, None) => true,
            _ => false,
        };
        ensure!(ok, "fill of channel {c}: {a:?} vs oracle {b:?}");
    }
    let needs_fill = (0..d).any(|c| expected_fill[c].is_none() && (0..n).any(|i| (0..lengths[i]).any(|t| data[[i, t, c]].is_nan())));

    for method in [ImputeMethod::Zero, ImputeMethod::Mean, ImputeMethod::Forward] {
        let out = impute(x.clone(), y.clone(), &lengths, &method, &fill, Parallelism::default());
        // a channel without a fill has no observations, so both mean and forward need the fill
        let must_fail = needs_fill && !matches!(method, ImputeMethod::Zero);
        ensure!(out.is_err() == must_fail, "{}: error {:?}, expected failure {must_fail}", method.name(), out.as_ref().err());
        if must_fail {
            continue;
        }
        let (out, _) = out.map_err(|e| format!("{}: {e}", method.name()))?;

        ensure!(same_bits(out.slice(s![.., .., d..]).iter().copied(), x.slice(s![.., .., d..]).iter().copied()), "{}: mask/delta changed", method.name());
        for i in 0..n {
            ensure!(out.slice(s![i, lengths[i].., ..]).iter().all(|v| v.is_nan()), "{}: padding filled", method.name());
        }
        let (again, _) = impute(out.clone(), y.clone(), &lengths, &method, &fill, Parallelism::Sequential).map_err(|e| e.to_string())?;
        ensure!(same_bits(again.iter().copied(), out.iter().copied()), "{}: not idempotent", method.name());

        // prefix truncation: imputing the first k steps alone gives the same values
        let k = 1 + rng.below(s as u64) as usize;
        let short_len: Vec<usize> = lengths.iter().map(|&l| l.min(k)).collect();
        let (short, _) = impute(x.slice(s![.., ..k, ..]).to_owned(), y.clone(), &short_len, &method, &fill, Parallelism::Sequential)
            .map_err(|e| e.to_string())?;
        ensure!(same_bits(short.iter().copied(), out.slice(s![.., ..k, ..]).iter().copied()), "{}: not online-safe at k={k}", method.name());

        for i in 0..n {
            for c in 0..d {
                let col: Vec<f64> = data.slice(s![i, .., c]).to_vec();
                let got: Vec<f64> = out.slice(s![i, .., c]).to_vec();
                let want: Vec<f64> = match method {
                    ImputeMethod::Forward => forward_oracle(&col, lengths[i], expected_fill[c].unwrap_or(NAN)),
                    ImputeMethod::Mean => (0..s)
                        .map(|t| if t >= lengths[i] { NAN } else if col[t].is_nan() { expected_fill[c].unwrap_or(NAN) } else { col[t] })
                        .collect(),
                    _ => (0..s).map(|t| if t >= lengths[i] { NAN } else if col[t].is_nan() { 0.0 } else { col[t] }).collect(),
                };
                let close = got.iter().zip(&want).all(|(a, b)| (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12 * b.abs().max(1.0));
                ensure!(close, "{} sequence {i} channel {c}: {got:?} vs oracle {want:?}", method.name());
            }
        }
    }
    Ok(String::new())
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let mut rng = common::Lcg::new(6);
    for case in 0..1000 {
        imputation_case(&mut rng).map_err(|e| format!("case {case}: {e}"))?;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "1000 cases took {elapsed:?}");
    Ok(format!("1000 randomized cases in {:.2}s", elapsed.as_secs_f64()))
}

fn criterion_7() -> Check {
    let mut rng = common::Lcg::new(7);
    for case in 0..1000 {
        let n = 1 + rng.below(300) as usize;
        let k = 1 + rng.below(5);
        let strata: Vec<u64> = (0..n).map(|_| rng.below(k)).collect();
        let tp = 0.05 + rng.uniform() * 0.85;
        let vp = if rng.below(2) == 0 { None } else { Some(0.01 + rng.uniform() * (0.98 - tp).max(0.0)).filter(|v| tp + v < 0.99) };
        let spec = SplitSpec { train_prop: tp, val_prop: vp, seed: Some(rng.next_u64()) };
        if spec.target_sizes(n).0 == 0 {
            continue;
        }
        let a = stratified_split(&strata, &spec).map_err(|e| format!("case {case}: {e}"))?;
        let b = stratified_split(&strata, &spec).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(a == b, "case {case}: same seed gave different assignments");
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        ensure!(all == (0..n).collect::<Vec<_>>(), "case {case}: not a partition");
        let props = match vp {
            Some(v) => [tp, v, 1.0 - tp - v],
            None => [tp, 1.0 - tp, 0.0],
        };
        for stratum in 0..k {
            let m = strata.iter().filter(|&&s| s == stratum).count() as f64;
            for (split, p) in Split::ALL.iter().zip(props) {
                let got = a.indices(*split).iter().filter(|&&i| strata[i] == stratum).count() as f64;
                ensure!((got - p * m).abs() <= 1.0 + 1e-9, "case {case}: stratum {stratum} {split:?} has {got}, requested {}", p * m);
            }
        }
    }

    // thread count of the parsing stage does not change the result
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::physionet2012(dir.path(), 60, 17);
    let build = |par: Parallelism| {
        let mut c = PipelineConfig::new(DatasetKind::PhysioNet2012, 0.6);
        c.val_prop = Some(0.2);
        c.path = dir.path().to_path_buf();
        c.seed = Some(99);
        c.overwrite_cache = true;
        build_with(&c, par)
    };
    let one = build(Parallelism::Sequential).map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().map_err(|e| e.to_string())?;
    let many = pool.install(|| build(Parallelism::Rayon)).map_err(|e| e.to_string())?;
    ensure!(one.assignment() == many.assignment(), "1 vs 4 threads: different assignments");
    ensure!(same_bits(one.full_x().as_array().iter().copied(), many.full_x().as_array().iter().copied()), "1 vs 4 threads: different X");
    Ok("1000 random splits: partition, per-stratum deviation <= 1, seed-stable; 1 vs 4 threads identical".into())
}

fn criterion_8() -> Check {
    // hand oracle: train {1, 3} and {5, NaN} give mean 3, sample std 2
    let mut x = ndarray::array![
        [[1.0], [3.0]],
        [[5.0], [NAN]],
        [[7.0], [11.0]],
        [[3.0], [NAN]],
    ];
    let lengths = [2, 2, 2, 1];
    let stats = channel_stats(x.slice(s![..2, .., ..]), &lengths[..2], &[0], &BTreeSet::new());
    let st = stats.get(0).ok_or("no stats")?;
    ensure!(st.mean == 3.0 && st.std == 2.0, "train stats {} / {}", st.mean, st.std);
    standardise(&mut x, &lengths, &stats, Parallelism::Sequential);
    let got: Vec<f64> = x.iter().copied().collect();
    let want = [-1.0, 0.0, 1.0, NAN, 2.0, 4.0, 0.0, NAN];
    ensure!(got.iter().zip(want).all(|(a, b)| (a.is_nan() && b.is_nan()) || *a == b), "standardised {got:?}");

    // full pipeline: training channels become mean 0 / std 1, validation uses training stats
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::ragged_uea(dir.path(), "Ragged", 80, 8);
    let mut c = PipelineConfig::new(DatasetKind::Uea("Ragged".into()), 0.6);
    c.val_prop = Some(0.2);
    c.path = dir.path().to_path_buf();
    c.seed = Some(8);
    let raw = build_with(&c, Parallelism::default()).map_err(|e| e.to_string())?;
    c.standardise = true;
    c.mask = true;
    let std = build_with(&c, Parallelism::default()).map_err(|e| e.to_string())?;
    let (xr, xs) = (raw.full_x().as_array(), std.full_x().as_array());
    let train = std.assignment().indices(Split::Train).to_vec();
    let len = std.full_length();
    let mut worst = 0.0f64;
    for ch in 1..=3 {
        let observed = |data: &Array3<f64>, idx: &[usize]| -> Vec<f64> {
            idx.iter().flat_map(|&i| (0..len[i]).map(move |t| (i, t))).map(|(i, t)| data[[i, t, ch]]).filter(|v| !v.is_nan()).collect()
        };
        let vals = observed(xs, &train);
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
        ensure!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, "channel {ch}: mean {m:e}, std {sd}");
        worst = worst.max(m.abs()).max((sd - 1.0).abs());

        let raw_train = observed(xr, &train);
        let rm = raw_train.iter().sum::<f64>() / raw_train.len() as f64;
        let rsd = (raw_train.iter().map(|v| (v - rm).powi(2)).sum::<f64>() / (raw_train.len() - 1) as f64).sqrt();
        for &i in std.assignment().indices(Split::Val) {
            for t in 0..len[i] {
                let (r, v) = (xr[[i, t, ch]], xs[[i, t, ch]]);
                ensure!(r.is_nan() == v.is_nan(), "NaN pattern changed");
                if !r.is_nan() {
                    ensure!((v - (r - rm) / rsd).abs() < 1e-9, "validation value {v} vs {}", (r - rm) / rsd);
                }
            }
        }
    }
    // time and mask channels are not standardised
    ensure!(same_bits(xr.slice(s![.., .., 0]).iter().copied(), xs.slice(s![.., .., 0]).iter().copied()), "time channel changed");
    ensure!(xs.slice(s![.., .., 4..]).iter().all(|&v| v.is_nan() || v == 0.0 || v == 1.0), "mask channel changed");
    Ok(format!("hand oracle exact; training mean/std within {worst:.1e} of 0/1"))
}

fn random_batch(rng: &mut common::Lcg) -> Batch {
    let b = 1 + rng.below(12) as usize;
    let s = 1 + rng.below(25) as usize;
    let c = 1 + rng.below(4) as usize;
    let length: Vec<usize> = (0..b).map(|_| 1 + rng.below(s as u64) as usize).collect();
    let x = Array3::from_shape_fn((b, s, c), |(i, t, _)| {
        // padding, then roughly one in six observed entries missing
        if t >= length[i] || rng.below(6) == 0 {
            NAN
        } else {
            rng.uniform() * 2.0 - 1.0
        }
    });
    let per_step = rng.below(2) == 0;
    let (y, target) = if per_step {
        (Array2::from_shape_fn((b, s), |(i, t)| if t < length[i] { rng.below(2) as f64 } else { NAN }), TargetKind::PerStep)
    } else {
        (Array2::from_shape_fn((b, 3), |_| rng.below(2) as f64), TargetKind::Sequence)
    };
    Batch { x, y, length, target }
}

fn criterion_9() -> Check {
    let mut rng = common::Lcg::new(9);
    for case in 0..1000 {
        let batch = random_batch(&mut rng);
        let packed = pack(&batch).map_err(|e| format!("case {case}: {e}"))?;
        let bs = &packed.batch_sizes;
        ensure!(bs.windows(2).all(|w| w[0] >= w[1]), "case {case}: batch_sizes increase {bs:?}");
        ensure!(bs[0] == batch.len(), "case {case}: batch_sizes[0] = {}", bs[0]);
        ensure!(bs.iter().sum::<usize>() == batch.length.iter().sum::<usize>(), "case {case}: sum of batch_sizes");
        let restored = unpack(&packed);
        let (sorted, perm) = sort_by_length(&batch);
        ensure!(perm == packed.sort_order, "case {case}: sort order differs");
        ensure!(same_bits(restored.x.iter().copied(), sorted.x.iter().copied()), "case {case}: X differs");
        ensure!(same_bits(restored.y.iter().copied(), sorted.y.iter().copied()), "case {case}: y differs");
        ensure!(restored.length == sorted.length, "case {case}: lengths differ");
    }
    Ok("1000 random batches round-trip bitwise, batch_sizes non-increasing".into())
}

fn criterion_10() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = common::Lcg::new(10);
    let (x, length) = full_tensor(&mut rng, 3, 6, 2);
    let master = MasterData {
        x: PaddedTensor3::new(x).map_err(|e| e.to_string())?,
        y: ndarray::array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]],
        length,
        info: MasterInfo {
            channel_names: vec!["time".into(), "v".into()],
            time_tracked: false,
            target: TargetKind::Sequence,
            class_labels: Some(vec!["a".into(), "b".into()]),
            dropped_records: 0,
        },
    };
    let meta = CacheMeta {
        format_version: cache::FORMAT_VERSION,
        dataset: "synthetic".into(),
        created_utc: "2024-01-01T00:00:00Z".into(),
        source_options: serde_json::json!({}),
        master: master.info.clone(),
    };
    let entry = cache::save(dir.path(), "k", &master, &meta).map_err(|e| e.to_string())?;
    match cache::load(dir.path(), "k").map_err(|e| e.to_string())? {
        CacheLookup::Hit(m, _) => {
            ensure!(same_bits(m.x.as_array().iter().copied(), master.x.as_array().iter().copied()), "X differs after load");
            ensure!(same_bits(m.y.iter().copied(), master.y.iter().copied()) && m.length == master.length, "y/length differ");
        }
        other => return Err(format!("fresh entry not a hit: {other:?}")),
    }
    let mut flips = 0;
    for blob in cache::BLOBS {
        let path = entry.join(blob);
        let original = std::fs::read(&path).map_err(|e| e.to_string())?;
        for byte in 0..original.len() {
            for bit in 0..8 {
                let mut bytes = original.clone();
                bytes[byte] ^= 1 << bit;
                std::fs::write(&path, &bytes).map_err(|e| e.to_string())?;
                let lookup = cache::load(dir.path(), "k").map_err(|e| e.to_string())?;
                ensure!(matches!(lookup, CacheLookup::Corrupt(_)), "{blob}: flip of bit {bit} in byte {byte} not detected");
                flips += 1;
            }
        }
        std::fs::write(&path, &original).map_err(|e| e.to_string())?;
    }
    ensure!(matches!(cache::load(dir.path(), "k").map_err(|e| e.to_string())?, CacheLookup::Hit(..)), "restored entry not a hit");
    Ok(format!("{flips} single-bit flips detected; round trip bitwise"))
}

/// Second, independent reader of the tensor file format.
fn minimal_read(path: &Path) -> (String, Vec<usize>, Vec<f64>) {
    let bytes = std::fs::read(path).unwrap();
    assert_eq!(&bytes[..7], b"TSPREP\x01");
    assert_eq!(bytes[95], b'\n');
    let header = String::from_utf8(bytes[7..95].to_vec()).unwrap();
    let fields: Vec<&str> = header.split(' ').filter(|f| !f.is_empty()).collect();
    let dtype = fields[0].to_string();
    let rank: usize = fields[1].parse().unwrap();
    let dims: Vec<usize> = fields[2..2 + rank].iter().map(|f| f.parse().unwrap()).collect();
    let body = &bytes[96..];
    let values = match dtype.as_str() {
        "f64" => body.chunks(8).map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])).collect(),
        "f32" => body.chunks(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect(),
        "i64" => body.chunks(8).map(|c| i64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]) as f64).collect(),
        other => panic!("dtype {other}"),
    };
    (dtype, dims, values)
}

fn criterion_11() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::ragged_uea(dir.path(), "Ragged", 50, 11);
    let mut c = PipelineConfig::new(DatasetKind::Uea("Ragged".into()), 0.7);
    c.val_prop = Some(0.15);
    c.path = dir.path().to_path_buf();
    c.seed = Some(11);
    c.mask = true;
    c.delta = true;
    c.standardise = true;
    let ds = build_with(&c, Parallelism::default()).map_err(|e| e.to_string())?;
    let f64_dir = dir.path().join("out64");
    let f32_dir = dir.path().join("out32");
    let manifest = export::export_dataset(&ds, c.to_json(), &f64_dir, ExportFormat::Tsprep, DType::F64).map_err(|e| e.to_string())?;
    export::export_dataset(&ds, c.to_json(), &f32_dir, ExportFormat::Tsprep, DType::F32).map_err(|e| e.to_string())?;
    let mut files = 0;
    for split in Split::ALL {
        let x = ds.x_split(split);
        let y = ds.y_split(split);
        let len: Vec<f64> = ds.length_split(split).iter().map(|&l| l as f64).collect();
        let expect: [(&str, Vec<usize>, Vec<f64>); 3] = [
            ("X", x.shape().to_vec(), x.iter().copied().collect()),
            ("y", y.shape().to_vec(), y.iter().copied().collect()),
            ("length", vec![len.len()], len),
        ];
        for (field, dims, values) in expect {
            let name = export::file_name(field, split, ExportFormat::Tsprep);
            let (dtype, got_dims, got) = minimal_read(&f64_dir.join(&name));
            ensure!(got_dims == dims, "{name}: dims {got_dims:?} != {dims:?}");
            ensure!(manifest.shapes[&name] == dims, "{name}: manifest shape");
            ensure!(dtype == if field == "length" { "i64" } else { "f64" }, "{name}: dtype {dtype}");
            ensure!(same_bits(got, values.iter().copied()), "{name}: values differ at f64");
            let (_, _, got32) = minimal_read(&f32_dir.join(&name));
            ensure!(same_bits(got32, values.iter().map(|&v| v as f32 as f64)), "{name}: f32 values are not the rounded f64 values");
            files += 2;
        }
    }
    Ok(format!("{files} files read back by an independent reader, bit-exact at f64"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "ArrowHead split sizes and shapes", criterion_1),
        (2, "time delta golden values", criterion_2),
        (3, "observational mask golden values", criterion_3),
        (4, "PhysioNet 2012 channel layout", criterion_4),
        (5, "missing-data simulation properties", criterion_5),
        (6, "imputation properties", criterion_6),
        (7, "split properties", criterion_7),
        (8, "standardisation", criterion_8),
        (9, "pack/unpack round trip", criterion_9),
        (10, "cache integrity", criterion_10),
        (11, "export format cross-reader", criterion_11),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
