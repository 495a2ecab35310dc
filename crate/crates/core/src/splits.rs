//! Seeded stratified train/validation/test partitioning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}; expected train, val or test"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_prop: f64,
    pub val_prop: Option<f64>,
    pub seed: Option<u64>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let tp = self.train_prop;
        if !(tp > 0.0 && tp <= 1.0) {
            return Err(Error::Config(format!("train_prop {tp} must be in (0, 1]")));
        }
        match self.val_prop {
            Some(vp) if !(vp > 0.0 && vp < 1.0) => {
                Err(Error::Config(format!("val_prop {vp} must be in (0, 1)")))
            }
            Some(vp) if tp + vp >= 1.0 => Err(Error::Config(format!(
                "train_prop + val_prop = {} must be below 1 to leave a test split",
                tp + vp
            ))),
            None if tp >= 1.0 => Err(Error::Config(
                "train_prop must be below 1 so that a validation split remains".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Global `(train, val, test)` sizes for `n` sequences.
    pub fn target_sizes(&self, n: usize) -> (usize, usize, usize) {
        let round = |p: f64| ((p * n as f64).round() as usize).min(n);
        let train = round(self.train_prop);
        match self.val_prop {
            Some(vp) => {
                let val = round(vp).min(n - train);
                (train, val, n - train - val)
            }
            None => (train, n - train, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitAssignment {
    pub fn indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    /// Split of every sequence index.
    pub fn split_of_index(&self, n: usize) -> Vec<Option<Split>> {
        let mut out = vec![None; n];
        for split in Split::ALL {
            for &i in self.indices(split) {
                out[i] = Some(split);
            }
        }
        out
    }
}

/// Min-cost flow on a tiny dense graph (successive shortest paths with
/// Bellman-Ford). Returns the flow matrix.
fn min_cost_flow(cap: &mut [Vec<i64>], cost: &[Vec<i64>], source: usize, sink: usize) -> Vec<Vec<i64>> {
    let n = cap.len();
    let mut flow = vec![vec![0i64; n]; n];
    loop {
        let mut dist = vec![i64::MAX; n];
        let mut prev = vec![usize::MAX; n];
        dist[source] = 0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u] == i64::MAX {
                    continue;
                }
                for v in 0..n {
                    if cap[u][v] > 0 && dist[u] + cost[u][v] < dist[v] {
                        dist[v] = dist[u] + cost[u][v];
                        prev[v] = u;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink] == i64::MAX {
            return flow;
        }
        let mut push = i64::MAX;
        let mut v = sink;
        while v != source {
            push = push.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = sink;
        while v != source {
            let u = prev[v];
            cap[u][v] -= push;
            cap[v][u] += push;
            flow[u][v] += push;
            flow[v][u] -= push;
            v = u;
        }
    }
}

/// Allocates every stratum over the splits so that each cell is the floor or
/// ceiling of `prop * stratum size` and column sums equal `targets`.
/// Ceilings go preferentially to the largest fractional remainders.
fn controlled_rounding(sizes: &[usize], props: &[f64], targets: &[usize]) -> Vec<Vec<usize>> {
    let (k, j) = (sizes.len(), props.len());
    let quota = |r: usize, c: usize| props[c] * sizes[r] as f64;
    let mut alloc: Vec<Vec<usize>> = (0..k)
        .map(|r| (0..j).map(|c| quota(r, c).floor() as usize).collect())
        .collect();
    // clamp rows whose floors exceed the stratum (floating point slack)
    for (r, row) in alloc.iter_mut().enumerate() {
        while row.iter().sum::<usize>() > sizes[r] {
            let c = (0..j).max_by_key(|&c| row[c]).unwrap_or(0);
            row[c] -= 1;
        }
    }
    let mut blocked = vec![vec![false; j]; k];
    // a target below the sum of floors: lower the cells with the smallest remainders
    for c in 0..j {
        let mut excess = (0..k).map(|r| alloc[r][c]).sum::<usize>() as i64 - targets[c] as i64;
        while excess > 0 {
            let Some(r) = (0..k)
                .filter(|&r| alloc[r][c] > 0 && !blocked[r][c])
                .min_by(|&a, &b| (quota(a, c) - alloc[a][c] as f64).total_cmp(&(quota(b, c) - alloc[b][c] as f64)))
            else {
                break;
            };
            alloc[r][c] -= 1;
            blocked[r][c] = true;
            excess -= 1;
        }
    }
    let (source, sink) = (0, 1 + k + j);
    let nodes = sink + 1;
    let mut cap = vec![vec![0i64; nodes]; nodes];
    let mut cost = vec![vec![0i64; nodes]; nodes];
    for r in 0..k {
        cap[source][1 + r] = (sizes[r] - alloc[r].iter().sum::<usize>()) as i64;
        for c in 0..j {
            if !blocked[r][c] {
                let remainder = (quota(r, c) - alloc[r][c] as f64).clamp(0.0, 1.0);
                let w = ((1.0 - remainder) * 1e9).round() as i64;
                cap[1 + r][1 + k + c] = 1;
                cost[1 + r][1 + k + c] = w;
                cost[1 + k + c][1 + r] = -w;
            }
        }
    }
    for c in 0..j {
        let used: usize = (0..k).map(|r| alloc[r][c]).sum();
        cap[1 + k + c][sink] = targets[c].saturating_sub(used) as i64;
    }
    let flow = min_cost_flow(&mut cap, &cost, source, sink);
    for r in 0..k {
        for c in 0..j {
            alloc[r][c] += flow[1 + r][1 + k + c].max(0) as usize;
        }
    }
    // infeasible corner cases: place what is left greedily
    for r in 0..k {
        while alloc[r].iter().sum::<usize>() < sizes[r] {
            let c = (0..j)
                .max_by_key(|&c| targets[c] as i64 - (0..k).map(|q| alloc[q][c] as i64).sum::<i64>())
                .unwrap_or(0);
            alloc[r][c] += 1;
        }
    }
    alloc
}

/// Stratified split driven by the seed in `spec` (OS entropy when absent).
pub fn stratified_split<S: Ord + Clone>(strata: &[S], spec: &SplitSpec) -> Result<SplitAssignment> {
    stratified_split_with_rng(strata, spec, &mut rng_from_seed(spec.seed))
}

/// Stratified split drawing its shuffles from `rng`.
///
/// Global train and validation sizes equal `round(prop * n)` (test takes the
/// rest); within each stratum every split's count is the floor or ceiling of
/// `prop * stratum size`. Strata are visited in
/// sorted order and each stratum's indices are shuffled before allocation.
/// Returned index lists are sorted ascending.
pub fn stratified_split_with_rng<S: Ord + Clone>(
    strata: &[S],
    spec: &SplitSpec,
    rng: &mut SeededRng,
) -> Result<SplitAssignment> {
    spec.validate()?;
    let n = strata.len();
    if n == 0 {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    let mut groups: BTreeMap<S, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        groups.entry(s.clone()).or_default().push(i);
    }
    let members: Vec<Vec<usize>> = groups.into_values().collect();
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let (n_train, n_val, _) = spec.target_sizes(n);
    if n_train == 0 {
        return Err(Error::Config(format!("train_prop {} leaves no training data for {n} sequences", spec.train_prop)));
    }

    let (props, targets) = match spec.val_prop {
        Some(vp) => (
            vec![spec.train_prop, vp, 1.0 - spec.train_prop - vp],
            vec![n_train, n_val, n - n_train - n_val],
        ),
        None => (vec![spec.train_prop, 1.0 - spec.train_prop], vec![n_train, n - n_train]),
    };
    let alloc = controlled_rounding(&sizes, &props, &targets);

    let mut out = SplitAssignment::default();
    for (k, mut idx) in members.into_iter().enumerate() {
        rng.shuffle(&mut idx);
        let (a, rest) = idx.split_at(alloc[k][0]);
        let (b, c) = rest.split_at(alloc[k][1]);
        if a.is_empty() {
            log::warn!("stratum {k} contributes no training sequences");
        }
        out.train.extend_from_slice(a);
        out.val.extend_from_slice(b);
        out.test.extend_from_slice(c);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    if out.val.is_empty() {
        log::warn!("validation split is empty");
    }
    Ok(out)
}
