use super::{CellKind, RecurrentParams};
use crate::error::{Error, Result};
use crate::kernels::sigmoid_scalar;
use crate::real::{gemm, MatMut, MatRef, Real};
use crate::tensor::Tensor;

/// Post-activation gate values of one step, in the parameter gate order.
#[derive(Debug, Clone)]
pub struct StepCache<R: Real> {
    pub gates: Tensor<R>,
}

/// One batched LSTM step. `pre` holds `x·W_x + b` on entry (`[B, 4H]`) and the
/// activated gates `[i | f | g | o]` on exit.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_cell<R: Real>(
    pre: &mut [R],
    h_prev: Option<&[R]>,
    c_prev: Option<&[R]>,
    w_h: &[R],
    c: &mut [R],
    h: &mut [R],
    batch: usize,
    hidden: usize,
) {
    let gh = 4 * hidden;
    if let Some(hp) = h_prev {
        gemm(
            R::one(),
            MatRef::new(hp, batch, hidden),
            MatRef::new(w_h, hidden, gh),
            R::one(),
            MatMut::new(pre, batch, gh),
        );
    }
    for b in 0..batch {
        let a = &mut pre[b * gh..(b + 1) * gh];
        for j in 0..hidden {
            let i = sigmoid_scalar(a[j]);
            let f = sigmoid_scalar(a[hidden + j]);
            let g = a[2 * hidden + j].tanh();
            let o = sigmoid_scalar(a[3 * hidden + j]);
            a[j] = i;
            a[hidden + j] = f;
            a[2 * hidden + j] = g;
            a[3 * hidden + j] = o;
            let cp = c_prev.map_or(R::zero(), |cp| cp[b * hidden + j]);
            let ct = f * cp + i * g;
            c[b * hidden + j] = ct;
            h[b * hidden + j] = o * ct.tanh();
        }
    }
}

/// One batched GRU step (reset applied before the recurrent product).
/// `pre` holds `x·W_x + b` on entry (`[B, 3H]`) and `[z | r | h̃]` on exit;
/// `rh` receives `r ⊙ h_prev`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gru_cell<R: Real>(
    pre: &mut [R],
    h_prev: Option<&[R]>,
    w_h: &[R],
    rh: &mut [R],
    h: &mut [R],
    batch: usize,
    hidden: usize,
) {
    let gh = 3 * hidden;
    if let Some(hp) = h_prev {
        gemm(
            R::one(),
            MatRef::new(hp, batch, hidden),
            MatRef::with_row_stride(w_h, hidden, 2 * hidden, gh),
            R::one(),
            MatMut::with_row_stride(pre, batch, 2 * hidden, gh),
        );
    }
    for b in 0..batch {
        let a = &mut pre[b * gh..(b + 1) * gh];
        for j in 0..2 * hidden {
            a[j] = sigmoid_scalar(a[j]);
        }
        for j in 0..hidden {
            let hp = h_prev.map_or(R::zero(), |hp| hp[b * hidden + j]);
            rh[b * hidden + j] = a[hidden + j] * hp;
        }
    }
    if h_prev.is_some() {
        gemm(
            R::one(),
            MatRef::new(rh, batch, hidden),
            MatRef::with_row_stride(&w_h[2 * hidden..], hidden, hidden, gh),
            R::one(),
            MatMut::with_row_stride(&mut pre[2 * hidden..], batch, hidden, gh),
        );
    }
    for b in 0..batch {
        let a = &mut pre[b * gh..(b + 1) * gh];
        for j in 0..hidden {
            let cand = a[2 * hidden + j].tanh();
            a[2 * hidden + j] = cand;
            let z = a[j];
            let hp = h_prev.map_or(R::zero(), |hp| hp[b * hidden + j]);
            h[b * hidden + j] = (R::one() - z) * cand + z * hp;
        }
    }
}

pub(crate) fn input_projection<R: Real>(x: &[R], params: &RecurrentParams<R>, rows: usize) -> Vec<R> {
    let gh = params.kind.gates() * params.hidden_dim;
    let mut out = vec![R::zero(); rows * gh];
    for r in out.chunks_exact_mut(gh) {
        r.copy_from_slice(params.bias.data());
    }
    gemm(
        R::one(),
        MatRef::new(x, rows, params.input_dim),
        MatRef::new(params.input_weights.data(), params.input_dim, gh),
        R::one(),
        MatMut::new(&mut out, rows, gh),
    );
    out
}

fn check_vec<R: Real>(t: &Tensor<R>, len: usize, what: &str) -> Result<()> {
    if t.shape() != [len] {
        return Err(Error::dim(format!("{what} must be [{len}], got {:?}", t.shape())));
    }
    Ok(())
}

/// Single unbatched LSTM step: returns `(h_t, c_t, gates)`.
pub fn lstm_step<R: Real>(
    x_t: &Tensor<R>,
    h_prev: &Tensor<R>,
    c_prev: &Tensor<R>,
    params: &RecurrentParams<R>,
) -> Result<(Tensor<R>, Tensor<R>, StepCache<R>)> {
    if params.kind != CellKind::Lstm {
        return Err(Error::Usage("lstm_step called with GRU parameters".into()));
    }
    params.validate()?;
    let hidden = params.hidden_dim;
    check_vec(x_t, params.input_dim, "x_t")?;
    check_vec(h_prev, hidden, "h_prev")?;
    check_vec(c_prev, hidden, "c_prev")?;
    let mut pre = input_projection(x_t.data(), params, 1);
    let mut c = vec![R::zero(); hidden];
    let mut h = vec![R::zero(); hidden];
    lstm_cell(
        &mut pre,
        Some(h_prev.data()),
        Some(c_prev.data()),
        params.recurrent_weights.data(),
        &mut c,
        &mut h,
        1,
        hidden,
    );
    Ok((
        Tensor::scalar_vec(&h),
        Tensor::scalar_vec(&c),
        StepCache {
            gates: Tensor::scalar_vec(&pre),
        },
    ))
}

/// Single unbatched GRU step: returns `(h_t, gates)`.
pub fn gru_step<R: Real>(
    x_t: &Tensor<R>,
    h_prev: &Tensor<R>,
    params: &RecurrentParams<R>,
) -> Result<(Tensor<R>, StepCache<R>)> {
    if params.kind != CellKind::Gru {
        return Err(Error::Usage("gru_step called with LSTM parameters".into()));
    }
    params.validate()?;
    let hidden = params.hidden_dim;
    check_vec(x_t, params.input_dim, "x_t")?;
    check_vec(h_prev, hidden, "h_prev")?;
    let mut pre = input_projection(x_t.data(), params, 1);
    let mut rh = vec![R::zero(); hidden];
    let mut h = vec![R::zero(); hidden];
    gru_cell(
        &mut pre,
        Some(h_prev.data()),
        params.recurrent_weights.data(),
        &mut rh,
        &mut h,
        1,
        hidden,
    );
    Ok((
        Tensor::scalar_vec(&h),
        StepCache {
            gates: Tensor::scalar_vec(&pre),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sig(v: f64) -> f64 {
        1.0 / (1.0 + (-v).exp())
    }

    fn random_params(kind: CellKind, d: usize, h: usize, rng: &mut ChaCha8Rng) -> RecurrentParams<f64> {
        let mut p = RecurrentParams::zeros(kind, d, h);
        for t in [&mut p.input_weights, &mut p.recurrent_weights, &mut p.bias] {
            t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        p
    }

    /// Affine pre-activation for gate block `gate`, unit `j`, evaluated one
    /// scalar at a time.
    fn affine(p: &RecurrentParams<f64>, gate: usize, j: usize, x: &[f64], h: &[f64]) -> f64 {
        let gh = p.kind.gates() * p.hidden_dim;
        let col = gate * p.hidden_dim + j;
        let mut acc = p.bias.data()[col];
        for (d, xv) in x.iter().enumerate() {
            acc += xv * p.input_weights.data()[d * gh + col];
        }
        for (k, hv) in h.iter().enumerate() {
            acc += hv * p.recurrent_weights.data()[k * gh + col];
        }
        acc
    }

    #[test]
    fn lstm_all_zero() {
        let p = RecurrentParams::<f64>::zeros(CellKind::Lstm, 3, 2);
        let x = Tensor::scalar_vec(&[0.3, -0.1, 0.2]);
        let z = Tensor::zeros(&[2]);
        let (h, c, cache) = lstm_step(&x, &z, &z, &p).unwrap();
        assert_eq!(h.data(), &[0.0, 0.0]);
        assert_eq!(c.data(), &[0.0, 0.0]);
        assert_eq!(cache.gates.data(), &[0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn lstm_saturated_gates_remember() {
        let mut p = RecurrentParams::<f64>::zeros(CellKind::Lstm, 2, 2);
        let b = p.bias.data_mut();
        b[0..2].iter_mut().for_each(|v| *v = -100.0); // input gate off
        b[2..4].iter_mut().for_each(|v| *v = 100.0); // forget gate on
        let c_prev = Tensor::scalar_vec(&[0.7, -1.3]);
        let (_, c, _) = lstm_step(&Tensor::scalar_vec(&[1.0, 2.0]), &Tensor::zeros(&[2]), &c_prev, &p).unwrap();
        for (a, e) in c.data().iter().zip(c_prev.data()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn lstm_matches_scalar_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_params(CellKind::Lstm, 3, 2, &mut rng);
        let x = [0.4, -0.9, 0.1];
        let hp = [0.2, -0.5];
        let cp = [0.8, 0.3];
        let (h, c, _) = lstm_step(&Tensor::scalar_vec(&x), &Tensor::scalar_vec(&hp), &Tensor::scalar_vec(&cp), &p).unwrap();
        for j in 0..2 {
            let i = sig(affine(&p, 0, j, &x, &hp));
            let f = sig(affine(&p, 1, j, &x, &hp));
            let g = affine(&p, 2, j, &x, &hp).tanh();
            let o = sig(affine(&p, 3, j, &x, &hp));
            let ct = f * cp[j] + i * g;
            assert!((c.data()[j] - ct).abs() < 1e-12);
            assert!((h.data()[j] - o * ct.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn gru_zero_params() {
        let p = RecurrentParams::<f64>::zeros(CellKind::Gru, 3, 2);
        let x = Tensor::scalar_vec(&[0.3, -0.1, 0.2]);
        let (h, _) = gru_step(&x, &Tensor::zeros(&[2]), &p).unwrap();
        assert_eq!(h.data(), &[0.0, 0.0]);
        let v = [1.5, -2.0];
        let (h, cache) = gru_step(&x, &Tensor::scalar_vec(&v), &p).unwrap();
        assert_eq!(h.data(), &[0.75, -1.0]);
        assert_eq!(&cache.gates.data()[0..4], &[0.5; 4]);
    }

    #[test]
    fn gru_matches_scalar_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = random_params(CellKind::Gru, 3, 2, &mut rng);
        let x = [0.4, -0.9, 0.1];
        let hp = [0.2, -0.5];
        let (h, _) = gru_step(&Tensor::scalar_vec(&x), &Tensor::scalar_vec(&hp), &p).unwrap();
        let gh = 6;
        for j in 0..2 {
            let z = sig(affine(&p, 0, j, &x, &hp));
            let r: Vec<f64> = (0..2).map(|k| sig(affine(&p, 1, k, &x, &hp))).collect();
            let mut a = p.bias.data()[4 + j];
            for d in 0..3 {
                a += x[d] * p.input_weights.data()[d * gh + 4 + j];
            }
            for k in 0..2 {
                a += r[k] * hp[k] * p.recurrent_weights.data()[k * gh + 4 + j];
            }
            let expect = (1.0 - z) * a.tanh() + z * hp[j];
            assert!((h.data()[j] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = RecurrentParams::<f64>::zeros(CellKind::Lstm, 3, 2);
        let err = lstm_step(&Tensor::zeros(&[4]), &Tensor::zeros(&[2]), &Tensor::zeros(&[2]), &p);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }
}
