use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayViewMut2, Axis};

use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::stats::ChannelStats;

type CustomFn = dyn Fn(Array3<f64>, Array2<f64>, &[f64], &[usize]) -> (Array3<f64>, Array2<f64>) + Send + Sync;

/// User-supplied imputation. Receives `(X, y, fill, select)` where `fill[c]`
/// is the fill value of channel `c` (NaN where none) and `select` lists the
/// channels to impute. Must return `(X, y)` of unchanged shape.
#[derive(Clone)]
pub struct CustomImpute(pub Arc<CustomFn>);

impl CustomImpute {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(Array3<f64>, Array2<f64>, &[f64], &[usize]) -> (Array3<f64>, Array2<f64>) + Send + Sync + 'static,
    {
        CustomImpute(Arc::new(f))
    }
}

impl fmt::Debug for CustomImpute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomImpute(..)")
    }
}

#[derive(Debug, Clone, Default)]
pub enum ImputeMethod {
    #[default]
    None,
    Zero,
    Mean,
    Forward,
    Custom(CustomImpute),
}

impl ImputeMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ImputeMethod::None => "none",
            ImputeMethod::Zero => "zero",
            ImputeMethod::Mean => "mean",
            ImputeMethod::Forward => "forward",
            ImputeMethod::Custom(_) => "custom",
        }
    }
}

impl std::str::FromStr for ImputeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ImputeMethod::None),
            "zero" => Ok(ImputeMethod::Zero),
            "mean" => Ok(ImputeMethod::Mean),
            "forward" => Ok(ImputeMethod::Forward),
            other => Err(Error::Config(format!(
                "unknown imputation {other:?}; expected none, zero, mean or forward"
            ))),
        }
    }
}

/// Fill value per channel position: the override if present, else the mode
/// for categorical channels, else the training mean. `None` where no
/// statistic exists.
#[derive(Debug, Clone, PartialEq)]
pub struct FillValues {
    pub channels: Vec<usize>,
    pub values: Vec<Option<f64>>,
}

impl FillValues {
    pub fn from_stats(stats: &ChannelStats, categorical: &BTreeSet<usize>, overrides: &BTreeMap<usize, f64>) -> Self {
        let values = stats
            .channels
            .iter()
            .zip(&stats.stats)
            .map(|(ch, st)| {
                if let Some(v) = overrides.get(ch) {
                    return Some(*v);
                }
                let st = st.as_ref()?;
                if categorical.contains(ch) {
                    st.mode
                } else {
                    Some(st.mean)
                }
            })
            .collect();
        FillValues { channels: stats.channels.clone(), values }
    }

    /// Dense vector of length `c`, NaN where no fill applies.
    pub fn dense(&self, c: usize) -> Vec<f64> {
        let mut out = vec![f64::NAN; c];
        for (&ch, v) in self.channels.iter().zip(&self.values) {
            if let Some(v) = v {
                out[ch] = *v;
            }
        }
        out
    }
}

fn unavailable(ch: usize) -> Error {
    Error::Impute(format!("channel {ch} has no training observations and no override"))
}

/// Imputes missing values of `fill.channels` within each sequence's valid
/// length. Padding stays NaN and no other channel is touched, so masks and
/// deltas are unaffected.
///
/// Mean and forward imputation only ever use values at or before the imputed
/// time step, plus training statistics.
pub fn impute(
    mut x: Array3<f64>,
    y: Array2<f64>,
    lengths: &[usize],
    method: &ImputeMethod,
    fill: &FillValues,
    par: Parallelism,
) -> Result<(Array3<f64>, Array2<f64>)> {
    let custom = match method {
        ImputeMethod::None => return Ok((x, y)),
        ImputeMethod::Custom(f) => f,
        _ => {
            let errors = {
                let mut rows: Vec<ArrayViewMut2<'_, f64>> = x.axis_iter_mut(Axis(0)).collect();
                let mut errs: Vec<Option<usize>> = vec![None; rows.len()];
                let mut pairs: Vec<_> = rows.iter_mut().zip(errs.iter_mut()).collect();
                par.for_each_mut(&mut pairs, |i, (seq, err)| {
                    **err = impute_sequence(seq, lengths[i], method, fill).err();
                });
                errs
            };
            if let Some(ch) = errors.into_iter().flatten().next() {
                return Err(unavailable(ch));
            }
            return Ok((x, y));
        }
    };

    let (x_shape, y_shape) = (x.dim(), y.dim());
    let dense = fill.dense(x_shape.2);
    let (x2, y2) = (custom.0)(x, y, &dense, &fill.channels);
    if x2.dim() != x_shape || y2.dim() != y_shape {
        return Err(Error::Impute(format!(
            "custom imputation changed shapes from {x_shape:?}/{y_shape:?} to {:?}/{:?}",
            x2.dim(),
            y2.dim()
        )));
    }
    Ok((x2, y2))
}

/// Returns the offending channel when a fill is needed but unavailable.
fn impute_sequence(seq: &mut ArrayViewMut2<'_, f64>, len: usize, method: &ImputeMethod, fill: &FillValues) -> Result<(), usize> {
    let len = len.min(seq.nrows());
    for (&ch, &fv) in fill.channels.iter().zip(&fill.values) {
        let mut col = seq.slice_mut(ndarray::s![..len, ch]);
        match method {
            ImputeMethod::Zero => col.iter_mut().filter(|v| v.is_nan()).for_each(|v| *v = 0.0),
            ImputeMethod::Mean => {
                for v in col.iter_mut().filter(|v| v.is_nan()) {
                    *v = fv.ok_or(ch)?;
                }
            }
            ImputeMethod::Forward => {
                let mut last = fv;
                for v in col.iter_mut() {
                    if v.is_nan() {
                        *v = last.ok_or(ch)?;
                    } else {
                        last = Some(*v);
                    }
                }
            }
            ImputeMethod::None | ImputeMethod::Custom(_) => {}
        }
    }
    Ok(())
}
