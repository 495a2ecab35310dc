//! Batch iteration, length sorting and the packed time-major representation.

use ndarray::{Array2, Array3, Axis};

use crate::dataset::{Dataset, TargetKind};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::splits::Split;

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Array3<f64>,
    pub y: Array2<f64>,
    pub length: Vec<usize>,
    pub target: TargetKind,
}

/// A tensor of a batch looked up by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchField<'a> {
    X(&'a Array3<f64>),
    Y(&'a Array2<f64>),
    Length(&'a [usize]),
}

impl Batch {
    /// Named access: `"X"`, `"y"` or `"length"`.
    pub fn get(&self, name: &str) -> Option<BatchField<'_>> {
        match name {
            "X" => Some(BatchField::X(&self.x)),
            "y" => Some(BatchField::Y(&self.y)),
            "length" => Some(BatchField::Length(&self.length)),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.length.len()
    }

    pub fn is_empty(&self) -> bool {
        self.length.is_empty()
    }
}

/// Iterator over consecutive batches of one split.
#[derive(Debug)]
pub struct Batches<'a> {
    data: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for Batches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let idx = &self.order[self.pos..end];
        self.pos = end;
        Some(Batch {
            x: self.data.full_x().select_sequences(idx),
            y: self.data.full_y().select(Axis(0), idx),
            length: idx.iter().map(|&i| self.data.full_length()[i]).collect(),
            target: self.data.target_kind(),
        })
    }
}

/// Batches of `split` in stored order; the last batch may be smaller.
pub fn batches(data: &Dataset, split: Split, batch_size: usize) -> Result<Batches<'_>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let order = data.assignment().indices(split).to_vec();
    if order.is_empty() {
        return Err(Error::Config(format!("{} split is empty", split.name())));
    }
    Ok(Batches { data, order, batch_size, pos: 0 })
}

/// Like [`batches`] with the split order shuffled by `rng`.
pub fn batches_shuffled<'a>(data: &'a Dataset, split: Split, batch_size: usize, rng: &mut SeededRng) -> Result<Batches<'a>> {
    let mut b = batches(data, split, batch_size)?;
    rng.shuffle(&mut b.order);
    Ok(b)
}

/// Stable descending-length order of a batch.
pub fn length_order(length: &[usize]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..length.len()).collect();
    perm.sort_by(|&a, &b| length[b].cmp(&length[a]));
    perm
}

/// Reorders the batch by descending length, keeping ties in input order.
/// Returns the sorted batch and the permutation applied.
pub fn sort_by_length(batch: &Batch) -> (Batch, Vec<usize>) {
    let perm = length_order(&batch.length);
    let sorted = Batch {
        x: batch.x.select(Axis(0), &perm),
        y: batch.y.select(Axis(0), &perm),
        length: perm.iter().map(|&i| batch.length[i]).collect(),
        target: batch.target,
    };
    (sorted, perm)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PackedTarget {
    /// Sequence-level targets, rows in `sort_order`.
    Sequence(Array2<f64>),
    /// Per-step targets packed like the values.
    PerStep(Vec<f64>),
}

/// Time-major packing of a length-sorted batch: for each step `t`, the rows
/// of every sequence still active at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedBatch {
    pub values: Array2<f64>,
    pub batch_sizes: Vec<usize>,
    pub sort_order: Vec<usize>,
    pub y: PackedTarget,
    /// Padded length to restore on unpacking.
    pub total_length: usize,
}

pub fn pack(batch: &Batch) -> Result<PackedBatch> {
    if batch.length.contains(&0) {
        return Err(Error::Shape("cannot pack a zero-length sequence".into()));
    }
    let (b, s, c) = batch.x.dim();
    if batch.length.iter().any(|&l| l > s) || batch.length.len() != b {
        return Err(Error::Shape("lengths do not fit the batch tensor".into()));
    }
    let order = length_order(&batch.length);
    let max_len = order.first().map_or(0, |&i| batch.length[i]);
    let batch_sizes: Vec<usize> = (0..max_len)
        .map(|t| order.iter().take_while(|&&i| batch.length[i] > t).count())
        .collect();
    let total: usize = batch_sizes.iter().sum();

    let mut values = Array2::from_elem((total, c), f64::NAN);
    let mut per_step = Vec::with_capacity(total);
    let mut row = 0;
    for (t, &active) in batch_sizes.iter().enumerate() {
        for &i in &order[..active] {
            values.row_mut(row).assign(&batch.x.slice(ndarray::s![i, t, ..]));
            if batch.target == TargetKind::PerStep {
                per_step.push(batch.y[[i, t]]);
            }
            row += 1;
        }
    }
    let y = match batch.target {
        TargetKind::Sequence => PackedTarget::Sequence(batch.y.select(Axis(0), &order)),
        TargetKind::PerStep => PackedTarget::PerStep(per_step),
    };
    Ok(PackedBatch { values, batch_sizes, sort_order: order, y, total_length: s })
}

/// Restores the padded batch in `sort_order`, padding re-filled with NaN.
pub fn unpack(packed: &PackedBatch) -> Batch {
    let b = packed.batch_sizes.first().copied().unwrap_or(0);
    let c = packed.values.ncols();
    let s = packed.total_length;
    let mut x = Array3::from_elem((b, s, c), f64::NAN);
    let mut length = vec![0usize; b];
    let (mut y, target) = match &packed.y {
        PackedTarget::Sequence(y) => (y.clone(), TargetKind::Sequence),
        PackedTarget::PerStep(_) => (Array2::from_elem((b, s), f64::NAN), TargetKind::PerStep),
    };
    let mut row = 0;
    for (t, &active) in packed.batch_sizes.iter().enumerate() {
        for k in 0..active {
            x.slice_mut(ndarray::s![k, t, ..]).assign(&packed.values.row(row));
            if let PackedTarget::PerStep(v) = &packed.y {
                y[[k, t]] = v[row];
            }
            length[k] = t + 1;
            row += 1;
        }
    }
    Batch { x, y, length, target }
}
