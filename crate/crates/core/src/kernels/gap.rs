use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug)]
pub struct GapCache {
    batch: usize,
    len: usize,
    channels: usize,
}

/// Mean over the time axis: `[B, T, C] → [B, C]`.
pub fn global_average_pool<R: Real>(x: &Tensor<R>) -> Result<(Tensor<R>, GapCache)> {
    let [batch, len, channels] = *x.shape() else {
        return Err(Error::dim(format!(
            "global average pooling expects [B, T, C], got {:?}",
            x.shape()
        )));
    };
    let mut out = vec![R::zero(); batch * channels];
    let inv = R::one() / R::of(len as f64);
    for b in 0..batch {
        let acc = &mut out[b * channels..(b + 1) * channels];
        for t in 0..len {
            let row = &x.data()[(b * len + t) * channels..(b * len + t + 1) * channels];
            for (a, v) in acc.iter_mut().zip(row) {
                *a += *v;
            }
        }
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    Ok((
        Tensor::from_vec(&[batch, channels], out)?,
        GapCache {
            batch,
            len,
            channels,
        },
    ))
}

pub fn global_average_pool_backward<R: Real>(cache: GapCache, dy: &Tensor<R>) -> Result<Tensor<R>> {
    let GapCache {
        batch,
        len,
        channels,
    } = cache;
    if dy.shape() != [batch, channels] {
        return Err(Error::dim(format!(
            "pooling upstream gradient {:?} != [{batch}, {channels}]",
            dy.shape()
        )));
    }
    let inv = R::one() / R::of(len as f64);
    let mut dx = Vec::with_capacity(batch * len * channels);
    for b in 0..batch {
        let g = &dy.data()[b * channels..(b + 1) * channels];
        for _ in 0..len {
            dx.extend(g.iter().map(|&v| v * inv));
        }
    }
    Tensor::from_vec(&[batch, len, channels], dx)
}
