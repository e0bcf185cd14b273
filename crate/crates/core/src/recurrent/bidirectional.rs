use super::sequence::{bptt_backward, run_sequence_dir, RecurrentCache, RecurrentGrads};
use super::RecurrentParams;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug)]
pub struct BiCache<R: Real> {
    forward: RecurrentCache<R>,
    backward: RecurrentCache<R>,
    hidden: usize,
}

#[derive(Debug)]
pub struct BiGrads<R: Real> {
    pub forward: RecurrentGrads<R>,
    pub backward: RecurrentGrads<R>,
}

/// `[B, T, D] → [B, T, 2H]`: features `0..H` come from a left-to-right pass,
/// `H..2H` from a right-to-left pass realigned to the original time order.
pub fn bidirectional<R: Real>(
    x: &Tensor<R>,
    fwd: &RecurrentParams<R>,
    bwd: &RecurrentParams<R>,
) -> Result<(Tensor<R>, BiCache<R>)> {
    if fwd.hidden_dim != bwd.hidden_dim {
        return Err(Error::dim(format!(
            "bidirectional halves disagree on hidden width: {} vs {}",
            fwd.hidden_dim, bwd.hidden_dim
        )));
    }
    let (yf, cf) = run_sequence_dir(x, fwd, false)?;
    let (yb, cb) = run_sequence_dir(x, bwd, true)?;
    let hidden = fwd.hidden_dim;
    let rows = yf.len() / hidden;
    let mut out = Vec::with_capacity(2 * yf.len());
    for r in 0..rows {
        out.extend_from_slice(&yf.data()[r * hidden..(r + 1) * hidden]);
        out.extend_from_slice(&yb.data()[r * hidden..(r + 1) * hidden]);
    }
    let [b, t, _] = *yf.shape() else { unreachable!() };
    Ok((
        Tensor::from_vec(&[b, t, 2 * hidden], out)?,
        BiCache {
            forward: cf,
            backward: cb,
            hidden,
        },
    ))
}

pub fn bidirectional_backward<R: Real>(cache: BiCache<R>, dy: &Tensor<R>) -> Result<(Tensor<R>, BiGrads<R>)> {
    let hidden = cache.hidden;
    let [b, t, w] = *dy.shape() else {
        return Err(Error::dim(format!("bidirectional gradient must be rank 3, got {:?}", dy.shape())));
    };
    if w != 2 * hidden {
        return Err(Error::dim(format!("bidirectional gradient width {w} != {}", 2 * hidden)));
    }
    let mut df = Vec::with_capacity(b * t * hidden);
    let mut db = Vec::with_capacity(b * t * hidden);
    for row in dy.data().chunks_exact(w) {
        df.extend_from_slice(&row[..hidden]);
        db.extend_from_slice(&row[hidden..]);
    }
    let (mut dx, gf) = bptt_backward(cache.forward, &Tensor::from_vec(&[b, t, hidden], df)?)?;
    let (dxb, gb) = bptt_backward(cache.backward, &Tensor::from_vec(&[b, t, hidden], db)?)?;
    for (a, v) in dx.data_mut().iter_mut().zip(dxb.data()) {
        *a += *v;
    }
    Ok((dx, BiGrads { forward: gf, backward: gb }))
}
