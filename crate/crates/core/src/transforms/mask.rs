use ndarray::{Array3, ArrayView2, ArrayView3};

use crate::error::{Error, Result};

/// One mask channel per entry of `channels`: 1 where a value was recorded, 0
/// where it is missing, NaN in the padding region.
pub fn observational_mask(x: ArrayView3<'_, f64>, lengths: &[usize], channels: &[usize]) -> Array3<f64> {
    let (n, s, _) = x.dim();
    Array3::from_shape_fn((n, s, channels.len()), |(i, t, k)| {
        if t >= lengths[i] {
            f64::NAN
        } else if x[[i, t, channels[k]]].is_nan() {
            0.0
        } else {
            1.0
        }
    })
}

/// Time since each channel's previous observation.
///
/// `delta[0] = 0`; afterwards `delta[t] = s[t] - s[t-1]`, plus `delta[t-1]`
/// when the channel was unobserved at `t - 1`. Padding is NaN.
pub fn time_delta(times: ArrayView2<'_, f64>, mask: ArrayView3<'_, f64>, lengths: &[usize]) -> Result<Array3<f64>> {
    let (n, s, k) = mask.dim();
    if times.dim() != (n, s) {
        return Err(Error::Shape(format!("times {:?} do not match mask {:?}", times.dim(), (n, s))));
    }
    let mut delta = Array3::from_elem((n, s, k), f64::NAN);
    for i in 0..n {
        let len = lengths[i].min(s);
        for t in 1..len {
            if times[[i, t]].partial_cmp(&times[[i, t - 1]]) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::Shape(format!(
                    "sequence {i}: time stamps are not increasing at step {t}"
                )));
            }
        }
        for c in 0..k {
            if len == 0 {
                continue;
            }
            delta[[i, 0, c]] = 0.0;
            for t in 1..len {
                let step = times[[i, t]] - times[[i, t - 1]];
                delta[[i, t, c]] = if mask[[i, t - 1, c]] == 0.0 { step + delta[[i, t - 1, c]] } else { step };
            }
        }
    }
    Ok(delta)
}
