//! The prepared dataset: padded `X`, targets `y`, `length`, layout, training
//! statistics and split membership.

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::splits::{Split, SplitAssignment};
use crate::stats::ChannelStats;
use crate::tensor::{ChannelLayout, PaddedTensor3};

/// Shape of `y`: one row per sequence (`(n, l)` or `(n, 1)`), or one target
/// per time step (`(n, s)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Sequence,
    PerStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub(crate) name: String,
    pub(crate) x: PaddedTensor3,
    pub(crate) y: Array2<f64>,
    pub(crate) length: Vec<usize>,
    pub(crate) layout: ChannelLayout,
    pub(crate) stats: ChannelStats,
    pub(crate) assignment: SplitAssignment,
    pub(crate) split: Split,
    pub(crate) target: TargetKind,
    pub(crate) seed: u64,
    pub(crate) class_labels: Option<Vec<String>>,
    pub(crate) dropped_records: usize,
}

impl Dataset {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Split bound to [`Dataset::x`], [`Dataset::y`] and [`Dataset::length`].
    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn x(&self) -> Array3<f64> {
        self.x_split(self.split)
    }

    pub fn y(&self) -> Array2<f64> {
        self.y_split(self.split)
    }

    pub fn length(&self) -> Vec<usize> {
        self.length_split(self.split)
    }

    pub fn x_split(&self, split: Split) -> Array3<f64> {
        self.x.select_sequences(self.assignment.indices(split))
    }

    pub fn y_split(&self, split: Split) -> Array2<f64> {
        self.y.select(Axis(0), self.assignment.indices(split))
    }

    pub fn length_split(&self, split: Split) -> Vec<usize> {
        self.assignment.indices(split).iter().map(|&i| self.length[i]).collect()
    }

    pub fn x_train(&self) -> Array3<f64> {
        self.x_split(Split::Train)
    }

    pub fn x_val(&self) -> Array3<f64> {
        self.x_split(Split::Val)
    }

    pub fn x_test(&self) -> Array3<f64> {
        self.x_split(Split::Test)
    }

    pub fn y_train(&self) -> Array2<f64> {
        self.y_split(Split::Train)
    }

    pub fn y_val(&self) -> Array2<f64> {
        self.y_split(Split::Val)
    }

    pub fn y_test(&self) -> Array2<f64> {
        self.y_split(Split::Test)
    }

    pub fn length_train(&self) -> Vec<usize> {
        self.length_split(Split::Train)
    }

    pub fn length_val(&self) -> Vec<usize> {
        self.length_split(Split::Val)
    }

    pub fn length_test(&self) -> Vec<usize> {
        self.length_split(Split::Test)
    }

    /// All sequences, in master order.
    pub fn full_x(&self) -> &PaddedTensor3 {
        &self.x
    }

    pub fn full_y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn full_length(&self) -> &[usize] {
        &self.length
    }

    pub fn layout(&self) -> &ChannelLayout {
        &self.layout
    }

    /// Training statistics of the data channels, before standardisation.
    pub fn stats(&self) -> &ChannelStats {
        &self.stats
    }

    pub fn assignment(&self) -> &SplitAssignment {
        &self.assignment
    }

    pub fn split_of_index(&self) -> Vec<Option<Split>> {
        self.assignment.split_of_index(self.length.len())
    }

    pub fn target_kind(&self) -> TargetKind {
        self.target
    }

    /// Seed that reproduces this dataset, including one drawn from entropy.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn class_labels(&self) -> Option<&[String]> {
        self.class_labels.as_deref()
    }

    /// Source records skipped at ingestion because they had no usable rows.
    pub fn dropped_records(&self) -> usize {
        self.dropped_records
    }
}
