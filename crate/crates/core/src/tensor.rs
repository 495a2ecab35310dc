//! The `(n, s, c)` NaN-padded data model and its channel layout.

use ndarray::{Array2, Array3, ArrayView3, ArrayViewMut3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Batch-first `(sequences, steps, channels)` array. NaN marks both missing
/// values and padding beyond each sequence's length.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedTensor3(Array3<f64>);

impl PaddedTensor3 {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        if data.shape().contains(&0) {
            return Err(Error::Shape(format!("tensor dimensions must be non-zero, got {:?}", data.shape())));
        }
        Ok(PaddedTensor3(data))
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.0.dim()
    }

    pub fn n(&self) -> usize {
        self.0.dim().0
    }

    pub fn s(&self) -> usize {
        self.0.dim().1
    }

    pub fn c(&self) -> usize {
        self.0.dim().2
    }

    pub fn view(&self) -> ArrayView3<'_, f64> {
        self.0.view()
    }

    pub fn view_mut(&mut self) -> ArrayViewMut3<'_, f64> {
        self.0.view_mut()
    }

    pub fn as_array(&self) -> &Array3<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array3<f64> {
        self.0
    }

    /// Rows for the given sequence indices, in that order.
    pub fn select_sequences(&self, indices: &[usize]) -> Array3<f64> {
        self.0.select(Axis(0), indices)
    }

    /// Copy restricted to `channels`, in that order.
    pub fn select_channels(&self, channels: &[usize]) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Shape("no channels selected".into()));
        }
        PaddedTensor3::new(self.0.select(Axis(2), channels))
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(parts: &[ArrayView3<'_, f64>]) -> Result<Self> {
        let joined = ndarray::concatenate(Axis(2), parts).map_err(|e| Error::Shape(e.to_string()))?;
        PaddedTensor3::new(joined)
    }
}

/// Pads `(length, channels)` series to the longest length with NaN.
pub fn pad_to_longest(series: &[Array2<f64>]) -> Result<(PaddedTensor3, Vec<usize>)> {
    let first = series.first().ok_or_else(|| Error::Shape("no series to pad".into()))?;
    let c = first.ncols();
    if let Some(bad) = series.iter().find(|a| a.ncols() != c) {
        return Err(Error::Shape(format!("series disagree on channel count ({c} vs {})", bad.ncols())));
    }
    let lengths: Vec<usize> = series.iter().map(Array2::nrows).collect();
    let s = lengths.iter().copied().max().unwrap_or(0);
    let mut out = Array3::from_elem((series.len(), s, c), f64::NAN);
    for (i, a) in series.iter().enumerate() {
        out.index_axis_mut(Axis(0), i).slice_mut(ndarray::s![..a.nrows(), ..]).assign(a);
    }
    Ok((PaddedTensor3::new(out)?, lengths))
}

/// Prepends a time stamp channel. `times[i]` holds one stamp per valid step of
/// sequence `i`; the padding region of the new channel is NaN.
pub fn append_time_channel(x: &PaddedTensor3, times: &[Vec<f64>], lengths: &[usize]) -> Result<PaddedTensor3> {
    let (n, s, c) = x.shape();
    if times.len() != n || lengths.len() != n {
        return Err(Error::Shape(format!("{n} sequences but {} time vectors", times.len())));
    }
    let mut out = Array3::from_elem((n, s, c + 1), f64::NAN);
    out.slice_mut(ndarray::s![.., .., 1..]).assign(x.as_array());
    for (i, (t, &len)) in times.iter().zip(lengths).enumerate() {
        if t.len() != len || len > s {
            return Err(Error::Shape(format!("sequence {i}: {} stamps for length {len}", t.len())));
        }
        for (k, &v) in t.iter().enumerate() {
            out[[i, k, 0]] = v;
        }
    }
    PaddedTensor3::new(out)
}

/// Index stamps `0, 1, ..., len - 1` for regularly sampled series.
pub fn index_times(lengths: &[usize]) -> Vec<Vec<f64>> {
    lengths.iter().map(|&l| (0..l).map(|t| t as f64).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Time,
    Data,
    Mask,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDescriptor {
    pub name: String,
    pub kind: ChannelKind,
    /// Index of the source channel in the master layout (time at 0, data
    /// channels from 1).
    pub source: usize,
}

/// Ordered channel descriptors: time stamp, data, mask, then delta blocks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelLayout {
    channels: Vec<ChannelDescriptor>,
}

impl ChannelLayout {
    /// Builds the layout from master channel names (`names[0]` is the time
    /// stamp). `tracked` lists the master channels that receive mask and delta
    /// channels.
    pub fn build(names: &[String], time: bool, tracked: &[usize], mask: bool, delta: bool) -> Self {
        let mut channels = Vec::new();
        if time {
            channels.push(ChannelDescriptor { name: names[0].clone(), kind: ChannelKind::Time, source: 0 });
        }
        for (k, name) in names.iter().enumerate().skip(1) {
            channels.push(ChannelDescriptor { name: name.clone(), kind: ChannelKind::Data, source: k });
        }
        if mask {
            for &k in tracked {
                channels.push(ChannelDescriptor { name: format!("{}_mask", names[k]), kind: ChannelKind::Mask, source: k });
            }
        }
        if delta {
            for &k in tracked {
                channels.push(ChannelDescriptor { name: format!("{}_delta", names[k]), kind: ChannelKind::Delta, source: k });
            }
        }
        ChannelLayout { channels }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[ChannelDescriptor] {
        &self.channels
    }

    pub fn names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }

    pub fn positions(&self, kind: ChannelKind) -> Vec<usize> {
        self.channels.iter().enumerate().filter(|(_, c)| c.kind == kind).map(|(i, _)| i).collect()
    }

    /// Position of the data channel whose master index is `source`.
    pub fn data_position(&self, source: usize) -> Option<usize> {
        self.channels.iter().position(|c| c.kind == ChannelKind::Data && c.source == source)
    }

    /// True when the kinds appear as contiguous blocks in the order
    /// time, data, mask, delta.
    pub fn is_well_ordered(&self) -> bool {
        let rank = |k: ChannelKind| match k {
            ChannelKind::Time => 0,
            ChannelKind::Data => 1,
            ChannelKind::Mask => 2,
            ChannelKind::Delta => 3,
        };
        self.channels.windows(2).all(|w| rank(w[0].kind) <= rank(w[1].kind))
    }
}
