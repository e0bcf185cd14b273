use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug)]
pub struct PoolCache {
    argmax: Vec<usize>,
    in_shape: Vec<usize>,
    out_shape: Vec<usize>,
}

/// Non-overlapping max pooling along time; trailing samples that do not fill a
/// window are dropped. Ties resolve to the earliest index.
pub fn maxpool1d<R: Real>(x: &Tensor<R>, pool: usize) -> Result<(Tensor<R>, PoolCache)> {
    let (batch, len, c) = x.btc()?;
    if pool == 0 || len < pool {
        return Err(Error::dim(format!(
            "max-pool of size {pool} needs at least {pool} time steps, got {len}"
        )));
    }
    let out_len = len / pool;
    let xd = x.data();
    let mut out = Vec::with_capacity(batch * out_len * c);
    let mut argmax = Vec::with_capacity(batch * out_len * c);
    for b in 0..batch {
        for t in 0..out_len {
            for ch in 0..c {
                let mut best_i = (b * len + t * pool) * c + ch;
                let mut best = xd[best_i];
                for p in 1..pool {
                    let i = (b * len + t * pool + p) * c + ch;
                    if xd[i] > best {
                        best = xd[i];
                        best_i = i;
                    }
                }
                out.push(best);
                argmax.push(best_i);
            }
        }
    }
    let out_shape = if x.rank() == 2 {
        vec![out_len, c]
    } else {
        vec![batch, out_len, c]
    };
    let y = Tensor::from_vec(&out_shape, out)?;
    Ok((
        y,
        PoolCache {
            argmax,
            in_shape: x.shape().to_vec(),
            out_shape,
        },
    ))
}

pub fn maxpool1d_backward<R: Real>(cache: PoolCache, dy: &Tensor<R>) -> Result<Tensor<R>> {
    if dy.shape() != cache.out_shape.as_slice() {
        return Err(Error::dim(format!(
            "max-pool upstream gradient {:?} != output {:?}",
            dy.shape(),
            cache.out_shape
        )));
    }
    let mut dx = Tensor::zeros(&cache.in_shape);
    let dxd = dx.data_mut();
    for (&i, &g) in cache.argmax.iter().zip(dy.data()) {
        dxd[i] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halves_table_shape() {
        let x = Tensor::<f32>::zeros(&[1000, 64]);
        let (y, _) = maxpool1d(&x, 2).unwrap();
        assert_eq!(y.shape(), &[500, 64]);
        let x = Tensor::<f32>::zeros(&[2, 125, 3]);
        assert_eq!(maxpool1d(&x, 2).unwrap().0.shape(), &[2, 62, 3]);
    }

    #[test]
    fn forward_and_routing() {
        let x = Tensor::<f64>::from_vec(&[4, 1], vec![3.0, 1.0, 2.0, 4.0]).unwrap();
        let (y, cache) = maxpool1d(&x, 2).unwrap();
        assert_eq!(y.data(), &[3.0, 4.0]);
        let dx = maxpool1d_backward(cache, &Tensor::from_vec(&[2, 1], vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(dx.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_channel_and_ties_pick_earliest() {
        let x = Tensor::<f64>::from_vec(&[4, 1], vec![2.0; 4]).unwrap();
        let (y, cache) = maxpool1d(&x, 2).unwrap();
        assert_eq!(y.data(), &[2.0, 2.0]);
        let dx = maxpool1d_backward(cache, &Tensor::from_vec(&[2, 1], vec![5.0, 7.0]).unwrap()).unwrap();
        assert_eq!(dx.data(), &[5.0, 0.0, 7.0, 0.0]);
    }

    #[test]
    fn too_short_is_a_dimension_error() {
        let x = Tensor::<f64>::zeros(&[1, 4]);
        assert!(matches!(maxpool1d(&x, 2), Err(Error::Dimension(_))));
    }
}
