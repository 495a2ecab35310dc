//! Per-channel training statistics and standardisation.

use std::collections::BTreeSet;

use ndarray::{ArrayView3, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

use crate::par::Parallelism;

/// Statistics of one channel over its observed (non-NaN, non-padding)
/// training entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStat {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); NaN for one observation.
    pub std: f64,
    /// Most frequent value, smallest on ties. Only computed for categorical
    /// channels.
    pub mode: Option<f64>,
}

impl ChannelStat {
    /// Divisor used by [`standardise`]: the standard deviation, or 1 when it
    /// is zero or undefined.
    pub fn scale(&self) -> f64 {
        if self.count < 2 || !(self.std.is_finite() && self.std > 0.0) {
            1.0
        } else {
            self.std
        }
    }
}

/// Statistics keyed by channel position. `None` marks a channel without any
/// training observation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelStats {
    pub channels: Vec<usize>,
    pub stats: Vec<Option<ChannelStat>>,
}

impl ChannelStats {
    pub fn get(&self, channel: usize) -> Option<&ChannelStat> {
        let k = self.channels.iter().position(|&c| c == channel)?;
        self.stats[k].as_ref()
    }
}

fn observed(x: &ArrayView3<'_, f64>, lengths: &[usize], ch: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, seq) in x.outer_iter().enumerate() {
        let len = lengths[i].min(seq.nrows());
        out.extend(seq.slice(ndarray::s![..len, ch]).iter().copied().filter(|v| !v.is_nan()));
    }
    out
}

fn mode_of(values: &[f64]) -> Option<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, usize)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let run = sorted[i..].iter().take_while(|&&w| w == v).count();
        if best.is_none_or(|(_, n)| run > n) {
            best = Some((v, run));
        }
        i += run;
    }
    best.map(|(v, _)| v)
}

fn stat_of(values: &[f64], categorical: bool) -> Option<ChannelStat> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    Some(ChannelStat {
        count: values.len(),
        mean,
        std,
        mode: if categorical { mode_of(values) } else { None },
    })
}

/// Computes statistics for `channels` of the training tensor, ignoring NaN
/// and padding.
pub fn channel_stats(
    x_train: ArrayView3<'_, f64>,
    lengths: &[usize],
    channels: &[usize],
    categorical: &BTreeSet<usize>,
) -> ChannelStats {
    let stats = channels
        .iter()
        .map(|&ch| stat_of(&observed(&x_train, lengths, ch), categorical.contains(&ch)))
        .collect();
    ChannelStats { channels: channels.to_vec(), stats }
}

/// Applies `(x - mean) / scale` to every valid entry of the stats' channels.
/// Channels without statistics, padding and NaNs are left untouched.
pub fn standardise(x: &mut ndarray::Array3<f64>, lengths: &[usize], stats: &ChannelStats, par: Parallelism) {
    let transforms: Vec<(usize, f64, f64)> = stats
        .channels
        .iter()
        .zip(&stats.stats)
        .filter_map(|(&ch, st)| st.map(|st| (ch, st.mean, st.scale())))
        .collect();
    let mut rows: Vec<ArrayViewMut2<'_, f64>> = x.axis_iter_mut(Axis(0)).collect();
    par.for_each_mut(&mut rows, |i, seq| {
        let len = lengths[i].min(seq.nrows());
        for &(ch, mean, scale) in &transforms {
            for v in seq.slice_mut(ndarray::s![..len, ch]).iter_mut() {
                *v = (*v - mean) / scale;
            }
        }
    });
}
