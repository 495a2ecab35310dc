use ndarray::{Array3, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::rng::SeededRng;

/// Proportion of data to drop: one value for whole time points, or one value
/// per data channel for independent drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MissingSpec {
    Scalar(f64),
    PerChannel(Vec<f64>),
}

impl Default for MissingSpec {
    fn default() -> Self {
        MissingSpec::Scalar(0.0)
    }
}

impl MissingSpec {
    pub fn validate(&self, n_channels: usize) -> Result<()> {
        let props: &[f64] = match self {
            MissingSpec::Scalar(p) => std::slice::from_ref(p),
            MissingSpec::PerChannel(ps) => {
                if ps.len() != n_channels {
                    return Err(Error::Config(format!(
                        "missing has {} proportions for {n_channels} data channels",
                        ps.len()
                    )));
                }
                ps
            }
        };
        match props.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            Some(p) => Err(Error::Config(format!("missing proportion {p} is outside [0, 1]"))),
            None => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            MissingSpec::Scalar(p) => *p == 0.0,
            MissingSpec::PerChannel(ps) => ps.iter().all(|p| *p == 0.0),
        }
    }
}

fn drop_count(p: f64, len: usize) -> usize {
    (p * len as f64).round() as usize
}

/// Replaces values with NaN at random.
///
/// For a scalar proportion `p`, `round(p * length)` whole time points of each
/// sequence lose every channel in `channels`. For per-channel proportions,
/// each channel independently loses `round(p_c * length)` entries. Positions
/// are chosen by a seeded partial shuffle of the valid time indices.
///
/// Exactly one value is drawn from `rng`; it keys a substream per sequence, so
/// the result is identical for sequential and parallel execution.
pub fn simulate_missing(
    x: &mut Array3<f64>,
    lengths: &[usize],
    channels: &[usize],
    spec: &MissingSpec,
    rng: &mut SeededRng,
    par: Parallelism,
) -> Result<()> {
    spec.validate(channels.len())?;
    if lengths.len() != x.dim().0 {
        return Err(Error::Shape(format!("{} lengths for {} sequences", lengths.len(), x.dim().0)));
    }
    let key = rng.next_u64();
    if spec.is_zero() {
        return Ok(());
    }
    let mut rows: Vec<ArrayViewMut2<'_, f64>> = x.axis_iter_mut(Axis(0)).collect();
    par.for_each_mut(&mut rows, |i, seq| {
        let len = lengths[i].min(seq.nrows());
        let mut stream = SeededRng::substream(key, i as u64);
        match spec {
            MissingSpec::Scalar(p) => {
                let mut idx: Vec<usize> = (0..len).collect();
                for &t in stream.choose_prefix(&mut idx, drop_count(*p, len)) {
                    for &ch in channels {
                        seq[[t, ch]] = f64::NAN;
                    }
                }
            }
            MissingSpec::PerChannel(ps) => {
                for (&ch, &p) in channels.iter().zip(ps) {
                    let mut idx: Vec<usize> = (0..len).collect();
                    for &t in stream.choose_prefix(&mut idx, drop_count(p, len)) {
                        seq[[t, ch]] = f64::NAN;
                    }
                }
            }
        }
    });
    Ok(())
}
