use crate::error::{Error, Result};
use crate::real::{gemm, MatMut, MatRef, Real};
use crate::tensor::Tensor;

pub fn dense_param_count(d_in: usize, d_out: usize) -> usize {
    d_in * d_out + d_out
}

#[derive(Debug)]
pub struct DenseCache<R: Real> {
    x: Vec<R>,
    weights: Vec<R>,
    batch: usize,
    d_in: usize,
    d_out: usize,
}

#[derive(Debug)]
pub struct DenseGrads<R: Real> {
    pub dx: Tensor<R>,
    pub dw: Tensor<R>,
    pub db: Tensor<R>,
}

/// `out = x·W + b` for `x: [B, D_in]`, `W: [D_in, D_out]`.
pub fn dense_forward<R: Real>(
    x: &Tensor<R>,
    weights: &Tensor<R>,
    bias: &Tensor<R>,
) -> Result<(Tensor<R>, DenseCache<R>)> {
    let [batch, d_in] = *x.shape() else {
        return Err(Error::dim(format!("dense input must be [B, D], got {:?}", x.shape())));
    };
    let [w_in, d_out] = *weights.shape() else {
        return Err(Error::dim(format!(
            "dense weights must be [D_in, D_out], got {:?}",
            weights.shape()
        )));
    };
    if w_in != d_in || bias.shape() != [d_out] {
        return Err(Error::dim(format!(
            "dense shapes do not conform: x {:?}, W {:?}, b {:?}",
            x.shape(),
            weights.shape(),
            bias.shape()
        )));
    }
    x.ensure_finite("dense input")?;
    let mut out = vec![R::zero(); batch * d_out];
    for r in out.chunks_exact_mut(d_out) {
        r.copy_from_slice(bias.data());
    }
    gemm(
        R::one(),
        MatRef::new(x.data(), batch, d_in),
        MatRef::new(weights.data(), d_in, d_out),
        R::one(),
        MatMut::new(&mut out, batch, d_out),
    );
    let cache = DenseCache {
        x: x.data().to_vec(),
        weights: weights.data().to_vec(),
        batch,
        d_in,
        d_out,
    };
    Ok((Tensor::from_vec(&[batch, d_out], out)?, cache))
}

pub fn dense_backward<R: Real>(cache: DenseCache<R>, dy: &Tensor<R>) -> Result<DenseGrads<R>> {
    let DenseCache {
        x,
        weights,
        batch,
        d_in,
        d_out,
    } = cache;
    if dy.shape() != [batch, d_out] {
        return Err(Error::dim(format!(
            "dense upstream gradient {:?} != output [{batch}, {d_out}]",
            dy.shape()
        )));
    }
    let dyd = dy.data();
    let mut dx = vec![R::zero(); batch * d_in];
    gemm(
        R::one(),
        MatRef::new(dyd, batch, d_out),
        MatRef::new(&weights, d_in, d_out).t(),
        R::zero(),
        MatMut::new(&mut dx, batch, d_in),
    );
    let mut dw = vec![R::zero(); d_in * d_out];
    gemm(
        R::one(),
        MatRef::new(&x, batch, d_in).t(),
        MatRef::new(dyd, batch, d_out),
        R::zero(),
        MatMut::new(&mut dw, d_in, d_out),
    );
    let mut db = vec![R::zero(); d_out];
    for r in dyd.chunks_exact(d_out) {
        for (acc, v) in db.iter_mut().zip(r) {
            *acc += *v;
        }
    }
    Ok(DenseGrads {
        dx: Tensor::from_vec(&[batch, d_in], dx)?,
        dw: Tensor::from_vec(&[d_in, d_out], dw)?,
        db: Tensor::from_vec(&[d_out], db)?,
    })
}
