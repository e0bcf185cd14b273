use crate::error::{Error, Result};
use crate::real::{gemm, MatMut, MatRef, Real};
use crate::tensor::Tensor;

/// Trainable parameter count of a 1-D convolution with bias.
pub fn conv1d_param_count(kernel: usize, c_in: usize, c_out: usize) -> usize {
    c_out * (kernel * c_in + 1)
}

/// Saved state for [`conv1d_backward`]: the unfolded input and a copy of the weights.
#[derive(Debug)]
pub struct ConvCache<R: Real> {
    cols: Vec<R>,
    weights: Vec<R>,
    batch: usize,
    len: usize,
    c_in: usize,
    c_out: usize,
    kernel: usize,
    input_rank: usize,
}

#[derive(Debug)]
pub struct ConvGrads<R: Real> {
    pub dx: Tensor<R>,
    pub dw: Tensor<R>,
    pub db: Tensor<R>,
}

/// Stride-1 convolution with zero-filled "same" padding.
///
/// `out[b,t,o] = bias[o] + Σ_{k,c} x[b, t+k−⌊K/2⌋, c] · w[k,c,o]`, with out-of-range
/// input positions read as zero. Even kernels pad one more position on the left.
pub fn conv1d_forward<R: Real>(
    x: &Tensor<R>,
    weights: &Tensor<R>,
    bias: &Tensor<R>,
) -> Result<(Tensor<R>, ConvCache<R>)> {
    let (batch, len, c_in) = x.btc()?;
    let [kernel, w_in, c_out] = *weights.shape() else {
        return Err(Error::dim(format!(
            "conv weights must be [K, C_in, C_out], got {:?}",
            weights.shape()
        )));
    };
    if w_in != c_in {
        return Err(Error::dim(format!(
            "conv expects {w_in} input channels, input has {c_in}"
        )));
    }
    if bias.shape() != [c_out] {
        return Err(Error::dim(format!(
            "conv bias must be [{c_out}], got {:?}",
            bias.shape()
        )));
    }
    x.ensure_finite("conv1d input")?;

    let row = kernel * c_in;
    let half = kernel / 2;
    let xd = x.data();
    let mut cols = vec![R::zero(); batch * len * row];
    for b in 0..batch {
        for t in 0..len {
            let dst = &mut cols[(b * len + t) * row..(b * len + t + 1) * row];
            for k in 0..kernel {
                let src_t = t as isize + k as isize - half as isize;
                if src_t < 0 || src_t >= len as isize {
                    continue;
                }
                let src = (b * len + src_t as usize) * c_in;
                dst[k * c_in..(k + 1) * c_in].copy_from_slice(&xd[src..src + c_in]);
            }
        }
    }

    let mut out = vec![R::zero(); batch * len * c_out];
    for r in out.chunks_exact_mut(c_out) {
        r.copy_from_slice(bias.data());
    }
    gemm(
        R::one(),
        MatRef::new(&cols, batch * len, row),
        MatRef::new(weights.data(), row, c_out),
        R::one(),
        MatMut::new(&mut out, batch * len, c_out),
    );

    let shape: Vec<usize> = if x.rank() == 2 {
        vec![len, c_out]
    } else {
        vec![batch, len, c_out]
    };
    let cache = ConvCache {
        cols,
        weights: weights.data().to_vec(),
        batch,
        len,
        c_in,
        c_out,
        kernel,
        input_rank: x.rank(),
    };
    Ok((Tensor::from_vec(&shape, out)?, cache))
}

pub fn conv1d_backward<R: Real>(cache: ConvCache<R>, dy: &Tensor<R>) -> Result<ConvGrads<R>> {
    let ConvCache {
        cols,
        weights,
        batch,
        len,
        c_in,
        c_out,
        kernel,
        input_rank,
    } = cache;
    if dy.len() != batch * len * c_out || dy.shape().last() != Some(&c_out) {
        return Err(Error::dim(format!(
            "conv upstream gradient {:?} does not match output ({batch}, {len}, {c_out})",
            dy.shape()
        )));
    }
    let row = kernel * c_in;
    let rows = batch * len;
    let dyd = dy.data();

    let mut dw = vec![R::zero(); row * c_out];
    gemm(
        R::one(),
        MatRef::new(&cols, rows, row).t(),
        MatRef::new(dyd, rows, c_out),
        R::zero(),
        MatMut::new(&mut dw, row, c_out),
    );

    let mut db = vec![R::zero(); c_out];
    for r in dyd.chunks_exact(c_out) {
        for (acc, v) in db.iter_mut().zip(r) {
            *acc += *v;
        }
    }

    // Reuse the unfolded-input buffer for the unfolded input gradient.
    let mut dcols = cols;
    gemm(
        R::one(),
        MatRef::new(dyd, rows, c_out),
        MatRef::new(&weights, row, c_out).t(),
        R::zero(),
        MatMut::new(&mut dcols, rows, row),
    );
    let half = kernel / 2;
    let mut dx = vec![R::zero(); batch * len * c_in];
    for b in 0..batch {
        for t in 0..len {
            let src = &dcols[(b * len + t) * row..(b * len + t + 1) * row];
            for k in 0..kernel {
                let dst_t = t as isize + k as isize - half as isize;
                if dst_t < 0 || dst_t >= len as isize {
                    continue;
                }
                let dst = (b * len + dst_t as usize) * c_in;
                for (d, s) in dx[dst..dst + c_in].iter_mut().zip(&src[k * c_in..(k + 1) * c_in]) {
                    *d += *s;
                }
            }
        }
    }

    let dx_shape: Vec<usize> = if input_rank == 2 {
        vec![len, c_in]
    } else {
        vec![batch, len, c_in]
    };
    Ok(ConvGrads {
        dx: Tensor::from_vec(&dx_shape, dx)?,
        dw: Tensor::from_vec(&[kernel, c_in, c_out], dw)?,
        db: Tensor::from_vec(&[c_out], db)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    /// Direct triple loop over (t, o, k, c) for a single sequence.
    fn nested_loop_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
        let (len, c_in) = (x.dim(0), x.dim(1));
        let (k_len, _, c_out) = (w.dim(0), w.dim(1), w.dim(2));
        let mut out = vec![0.0; len * c_out];
        for t in 0..len {
            for o in 0..c_out {
                let mut acc = b.data()[o];
                for k in 0..k_len {
                    let src = t as isize + k as isize - (k_len / 2) as isize;
                    if src < 0 || src >= len as isize {
                        continue;
                    }
                    for c in 0..c_in {
                        acc += x.data()[src as usize * c_in + c] * w.data()[(k * c_in + c) * c_out + o];
                    }
                }
                out[t * c_out + o] = acc;
            }
        }
        out
    }

    #[test]
    fn table_shape_first_block() {
        let x = Tensor::<f32>::zeros(&[1000, 12]);
        let w = Tensor::<f32>::zeros(&[15, 12, 64]);
        let b = Tensor::<f32>::zeros(&[64]);
        let (y, _) = conv1d_forward(&x, &w, &b).unwrap();
        assert_eq!(y.shape(), &[1000, 64]);
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::<f64>::from_vec(&[5, 1], vec![1.0, -2.0, 3.5, 0.0, 7.0]).unwrap();
        let w = Tensor::from_vec(&[1, 1, 1], vec![1.0]).unwrap();
        let b = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        let (y, _) = conv1d_forward(&x, &w, &b).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kernel in [3usize, 4, 5] {
            let x = random(&[8, 2], &mut rng);
            let w = random(&[kernel, 2, 2], &mut rng);
            let b = random(&[2], &mut rng);
            let (y, _) = conv1d_forward(&x, &w, &b).unwrap();
            let oracle = nested_loop_conv(&x, &w, &b);
            for (a, e) in y.data().iter().zip(&oracle) {
                assert!((a - e).abs() <= 1e-12, "{a} vs {e}");
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&[2, 6, 3], &mut rng);
        let w = random(&[3, 3, 2], &mut rng);
        let b = random(&[2], &mut rng);
        let (y, cache) = conv1d_forward(&x, &w, &b).unwrap();
        let g = conv1d_backward(cache, &Tensor::zeros(y.shape())).unwrap();
        assert!(g.dx.data().iter().chain(g.dw.data()).chain(g.db.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let x = Tensor::<f64>::from_vec(&[1, 1], vec![1.5]).unwrap();
        let w = Tensor::from_vec(&[1, 1, 1], vec![-0.75]).unwrap();
        let b = Tensor::from_vec(&[1], vec![0.25]).unwrap();
        let (_, cache) = conv1d_forward(&x, &w, &b).unwrap();
        let dy = Tensor::from_vec(&[1, 1], vec![2.0]).unwrap();
        let g = conv1d_backward(cache, &dy).unwrap();
        assert_eq!(g.dw.data(), &[2.0 * 1.5]);
        assert_eq!(g.dx.data(), &[2.0 * -0.75]);
        assert_eq!(g.db.data(), &[2.0]);
    }

    #[test]
    fn rejects_bad_shapes_and_non_finite() {
        let x = Tensor::<f64>::zeros(&[4, 3]);
        let w = Tensor::zeros(&[3, 2, 2]);
        let b = Tensor::zeros(&[2]);
        assert!(matches!(conv1d_forward(&x, &w, &b), Err(Error::Dimension(_))));
        let mut x = Tensor::<f64>::zeros(&[4, 2]);
        x.data_mut()[1] = f64::NAN;
        assert!(matches!(conv1d_forward(&x, &w, &b), Err(Error::Numeric(_))));
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(conv1d_param_count(10, 64, 128), 82_048);
        assert_eq!(conv1d_param_count(5, 128, 256), 164_096);
        assert_eq!(conv1d_param_count(15, 12, 64), 11_584);
    }
}
