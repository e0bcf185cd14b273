use super::cell::{gru_cell, input_projection, lstm_cell};
use super::{CellKind, RecurrentParams};
use crate::error::{Error, Result};
use crate::real::{gemm, MatMut, MatRef, Real};
use crate::tensor::Tensor;

/// Per-step state saved by [`run_sequence_dir`]. All per-step buffers are
/// indexed by processing step `s`, which equals time `t` for the forward
/// direction and `T−1−t` when `reversed`.
#[derive(Debug)]
pub struct RecurrentCache<R: Real> {
    kind: CellKind,
    reversed: bool,
    batch: usize,
    len: usize,
    input_dim: usize,
    hidden: usize,
    x: Vec<R>,
    input_weights: Vec<R>,
    recurrent_weights: Vec<R>,
    /// `[T][B × G·H]` activated gates.
    gates: Vec<R>,
    /// `[T][B × H]` hidden states.
    h: Vec<R>,
    /// LSTM: cell states; GRU: `r ⊙ h_prev`. `[T][B × H]`.
    aux: Vec<R>,
}

impl<R: Real> RecurrentCache<R> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn reversed(&self) -> bool {
        self.reversed
    }
}

#[derive(Debug)]
pub struct RecurrentGrads<R: Real> {
    pub d_input_weights: Tensor<R>,
    pub d_recurrent_weights: Tensor<R>,
    pub d_bias: Tensor<R>,
}

/// Runs the cell left-to-right from zero initial states, returning the hidden
/// state at every step: `[B, T, D] → [B, T, H]`.
pub fn run_sequence<R: Real>(
    x: &Tensor<R>,
    params: &RecurrentParams<R>,
) -> Result<(Tensor<R>, RecurrentCache<R>)> {
    run_sequence_dir(x, params, false)
}

/// As [`run_sequence`], optionally consuming the sequence right-to-left. Outputs
/// stay aligned with input time positions.
pub fn run_sequence_dir<R: Real>(
    x: &Tensor<R>,
    params: &RecurrentParams<R>,
    reversed: bool,
) -> Result<(Tensor<R>, RecurrentCache<R>)> {
    params.validate()?;
    let [batch, len, input_dim] = *x.shape() else {
        return Err(Error::dim(format!(
            "recurrent input must be [B, T, D], got {:?}",
            x.shape()
        )));
    };
    if input_dim != params.input_dim {
        return Err(Error::dim(format!(
            "recurrent layer expects input width {}, got {input_dim}",
            params.input_dim
        )));
    }
    x.ensure_finite("recurrent input")?;
    let hidden = params.hidden_dim;
    let gh = params.kind.gates() * hidden;
    let bh = batch * hidden;

    let xw = input_projection(x.data(), params, batch * len);
    let mut gates = vec![R::zero(); len * batch * gh];
    let mut h = vec![R::zero(); len * bh];
    let mut aux = vec![R::zero(); len * bh];
    let w_h = params.recurrent_weights.data();

    for s in 0..len {
        let t = if reversed { len - 1 - s } else { s };
        let (h_done, h_rest) = h.split_at_mut(s * bh);
        let (a_done, a_rest) = aux.split_at_mut(s * bh);
        let h_prev = (s > 0).then(|| &h_done[(s - 1) * bh..]);
        let pre = &mut gates[s * batch * gh..(s + 1) * batch * gh];
        for b in 0..batch {
            let src = (b * len + t) * gh;
            pre[b * gh..(b + 1) * gh].copy_from_slice(&xw[src..src + gh]);
        }
        let h_cur = &mut h_rest[..bh];
        let a_cur = &mut a_rest[..bh];
        match params.kind {
            CellKind::Lstm => {
                let c_prev = (s > 0).then(|| &a_done[(s - 1) * bh..]);
                lstm_cell(pre, h_prev, c_prev, w_h, a_cur, h_cur, batch, hidden);
            }
            CellKind::Gru => gru_cell(pre, h_prev, w_h, a_cur, h_cur, batch, hidden),
        }
    }

    let mut out = vec![R::zero(); batch * len * hidden];
    for s in 0..len {
        let t = if reversed { len - 1 - s } else { s };
        for b in 0..batch {
            let dst = (b * len + t) * hidden;
            out[dst..dst + hidden].copy_from_slice(&h[s * bh + b * hidden..s * bh + (b + 1) * hidden]);
        }
    }
    let cache = RecurrentCache {
        kind: params.kind,
        reversed,
        batch,
        len,
        input_dim,
        hidden,
        x: x.data().to_vec(),
        input_weights: params.input_weights.data().to_vec(),
        recurrent_weights: w_h.to_vec(),
        gates,
        h,
        aux,
    };
    Ok((Tensor::from_vec(&[batch, len, hidden], out)?, cache))
}

/// Full backpropagation through time. Returns the input gradient and the
/// parameter gradients accumulated over all steps.
pub fn bptt_backward<R: Real>(
    cache: RecurrentCache<R>,
    dy: &Tensor<R>,
) -> Result<(Tensor<R>, RecurrentGrads<R>)> {
    let RecurrentCache {
        kind,
        reversed,
        batch,
        len,
        input_dim,
        hidden,
        x,
        input_weights,
        recurrent_weights: w_h,
        gates,
        h,
        aux,
    } = cache;
    if dy.shape() != [batch, len, hidden] {
        return Err(Error::dim(format!(
            "recurrent upstream gradient {:?} != output [{batch}, {len}, {hidden}]",
            dy.shape()
        )));
    }
    let gh = kind.gates() * hidden;
    let bh = batch * hidden;
    let dyd = dy.data();
    let one = R::one();

    // Gradient w.r.t. the affine pre-activations, laid out like the input rows (b, t).
    let mut d_pre = vec![R::zero(); batch * len * gh];
    let mut d_wh = vec![R::zero(); hidden * gh];
    let mut dh_next = vec![R::zero(); bh];
    let mut dc_next = vec![R::zero(); bh];
    let mut step_da = vec![R::zero(); batch * gh];
    let mut d_rh = vec![R::zero(); bh];
    let mut dh_prev = vec![R::zero(); bh];

    for s in (0..len).rev() {
        let t = if reversed { len - 1 - s } else { s };
        let g = &gates[s * batch * gh..(s + 1) * batch * gh];
        let h_prev = (s > 0).then(|| &h[(s - 1) * bh..s * bh]);

        match kind {
            CellKind::Lstm => {
                let c = &aux[s * bh..(s + 1) * bh];
                let c_prev = (s > 0).then(|| &aux[(s - 1) * bh..s * bh]);
                for b in 0..batch {
                    let gb = &g[b * gh..(b + 1) * gh];
                    let da = &mut step_da[b * gh..(b + 1) * gh];
                    for j in 0..hidden {
                        let k = b * hidden + j;
                        let dh = dyd[(b * len + t) * hidden + j] + dh_next[k];
                        let (i, f, gg, o) = (gb[j], gb[hidden + j], gb[2 * hidden + j], gb[3 * hidden + j]);
                        let tc = c[k].tanh();
                        let dc = dh * o * (one - tc * tc) + dc_next[k];
                        let cp = c_prev.map_or(R::zero(), |cp| cp[k]);
                        da[j] = dc * gg * i * (one - i);
                        da[hidden + j] = dc * cp * f * (one - f);
                        da[2 * hidden + j] = dc * i * (one - gg * gg);
                        da[3 * hidden + j] = dh * tc * o * (one - o);
                        dc_next[k] = dc * f;
                    }
                }
                if let Some(hp) = h_prev {
                    gemm(one, MatRef::new(hp, batch, hidden).t(), MatRef::new(&step_da, batch, gh), one, MatMut::new(&mut d_wh, hidden, gh));
                    gemm(one, MatRef::new(&step_da, batch, gh), MatRef::new(&w_h, hidden, gh).t(), R::zero(), MatMut::new(&mut dh_next, batch, hidden));
                }
            }
            CellKind::Gru => {
                let rh = &aux[s * bh..(s + 1) * bh];
                // Candidate block first: it feeds the reset-gate gradient.
                for b in 0..batch {
                    let gb = &g[b * gh..(b + 1) * gh];
                    let da = &mut step_da[b * gh..(b + 1) * gh];
                    for j in 0..hidden {
                        let k = b * hidden + j;
                        let dh = dyd[(b * len + t) * hidden + j] + dh_next[k];
                        let (z, cand) = (gb[j], gb[2 * hidden + j]);
                        let hp = h_prev.map_or(R::zero(), |hp| hp[k]);
                        da[2 * hidden + j] = dh * (one - z) * (one - cand * cand);
                        da[j] = dh * (hp - cand) * z * (one - z);
                        dh_prev[k] = dh * z;
                    }
                }
                if let Some(hp) = h_prev {
                    let cand_da = MatRef::with_row_stride(&step_da[2 * hidden..], batch, hidden, gh);
                    gemm(one, cand_da, MatRef::with_row_stride(&w_h[2 * hidden..], hidden, hidden, gh).t(), R::zero(), MatMut::new(&mut d_rh, batch, hidden));
                    gemm(one, MatRef::new(rh, batch, hidden).t(), cand_da, one, MatMut::with_row_stride(&mut d_wh[2 * hidden..], hidden, hidden, gh));
                    for b in 0..batch {
                        for j in 0..hidden {
                            let k = b * hidden + j;
                            let r = g[b * gh + hidden + j];
                            step_da[b * gh + hidden + j] = d_rh[k] * hp[k] * r * (one - r);
                            dh_prev[k] += d_rh[k] * r;
                        }
                    }
                    let zr_da = MatRef::with_row_stride(&step_da, batch, 2 * hidden, gh);
                    gemm(one, MatRef::new(hp, batch, hidden).t(), zr_da, one, MatMut::with_row_stride(&mut d_wh, hidden, 2 * hidden, gh));
                    gemm(one, zr_da, MatRef::with_row_stride(&w_h, hidden, 2 * hidden, gh).t(), one, MatMut::new(&mut dh_prev, batch, hidden));
                } else {
                    for b in 0..batch {
                        step_da[b * gh + hidden..b * gh + 2 * hidden].iter_mut().for_each(|v| *v = R::zero());
                    }
                }
                dh_next.copy_from_slice(&dh_prev);
            }
        }
        for b in 0..batch {
            let dst = (b * len + t) * gh;
            d_pre[dst..dst + gh].copy_from_slice(&step_da[b * gh..(b + 1) * gh]);
        }
    }

    let rows = batch * len;
    let mut d_wx = vec![R::zero(); input_dim * gh];
    gemm(one, MatRef::new(&x, rows, input_dim).t(), MatRef::new(&d_pre, rows, gh), R::zero(), MatMut::new(&mut d_wx, input_dim, gh));
    let mut dx = vec![R::zero(); rows * input_dim];
    gemm(one, MatRef::new(&d_pre, rows, gh), MatRef::new(&input_weights, input_dim, gh).t(), R::zero(), MatMut::new(&mut dx, rows, input_dim));
    let mut d_bias = vec![R::zero(); gh];
    for r in d_pre.chunks_exact(gh) {
        for (acc, v) in d_bias.iter_mut().zip(r) {
            *acc += *v;
        }
    }
    Ok((
        Tensor::from_vec(&[batch, len, input_dim], dx)?,
        RecurrentGrads {
            d_input_weights: Tensor::from_vec(&[input_dim, gh], d_wx)?,
            d_recurrent_weights: Tensor::from_vec(&[hidden, gh], d_wh)?,
            d_bias: Tensor::from_vec(&[gh], d_bias)?,
        },
    ))
}
