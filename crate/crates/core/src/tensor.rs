use crate::error::{Error, Result};
use crate::real::Real;

/// Dense row-major array with an optional same-shape gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<R: Real = f32> {
    shape: Vec<usize>,
    data: Vec<R>,
    grad: Option<Vec<R>>,
}

impl<R: Real> Tensor<R> {
    pub fn from_vec(shape: &[usize], data: Vec<R>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::dim(format!("shape {shape:?} has a zero dimension")));
        }
        if expected != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, R::zero())
    }

    pub fn full(shape: &[usize], value: R) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero dimension in {shape:?}");
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
            grad: None,
        }
    }

    /// Builds a tensor from a function of the flat index.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> R) -> Self {
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(f).collect()).expect("shape matches length")
    }

    pub fn scalar_vec(values: &[R]) -> Self {
        Tensor::from_vec(&[values.len()], values.to_vec()).expect("non-empty vector")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<R> {
        self.data
    }

    pub fn grad(&self) -> Option<&[R]> {
        self.grad.as_deref()
    }

    /// Returns the gradient buffer, allocating a zeroed one if absent.
    pub fn grad_mut(&mut self) -> &mut [R] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![R::zero(); n])
    }

    /// Splits borrows so kernels can read values while writing the gradient.
    pub fn data_and_grad_mut(&mut self) -> (&mut [R], &mut [R]) {
        let n = self.data.len();
        let grad = self.grad.get_or_insert_with(|| vec![R::zero(); n]);
        (&mut self.data, grad)
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = R::zero());
        }
    }

    /// Adds `delta` into the gradient buffer.
    pub fn accumulate_grad(&mut self, delta: &[R]) {
        assert_eq!(delta.len(), self.data.len(), "gradient length mismatch");
        for (g, d) in self.grad_mut().iter_mut().zip(delta) {
            *g += *d;
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::dim(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Numeric(format!(
                "{what}: non-finite value at flat index {i}"
            ))),
        }
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }

    pub fn cast<S: Real>(&self) -> Tensor<S> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| S::of(v.as_f64())).collect(),
            grad: None,
        }
    }

    /// Interprets a rank-2 `[T, C]` or rank-3 `[B, T, C]` tensor as `(B, T, C)`.
    pub fn btc(&self) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [t, c] => Ok((1, t, c)),
            [b, t, c] => Ok((b, t, c)),
            _ => Err(Error::dim(format!(
                "expected [T, C] or [B, T, C], got {:?}",
                self.shape
            ))),
        }
    }

    /// Reverses the time axis of a `[B, T, C]` tensor.
    pub fn reverse_time(&self) -> Result<Self> {
        let (b, t, c) = self.btc()?;
        let mut out = Vec::with_capacity(self.data.len());
        for bi in 0..b {
            for ti in (0..t).rev() {
                let start = (bi * t + ti) * c;
                out.extend_from_slice(&self.data[start..start + c]);
            }
        }
        Tensor::from_vec(&self.shape, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_product_must_match() {
        assert!(Tensor::<f64>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            Tensor::<f64>::from_vec(&[2, 3], vec![0.0; 5]),
            Err(Error::Dimension(_))
        ));
        assert!(Tensor::<f64>::from_vec(&[0, 3], vec![]).is_err());
    }

    #[test]
    fn grad_buffer_mirrors_data() {
        let mut t = Tensor::<f32>::zeros(&[3, 2]);
        assert!(t.grad().is_none());
        t.accumulate_grad(&[1.0; 6]);
        t.accumulate_grad(&[1.0; 6]);
        assert_eq!(t.grad().unwrap(), &[2.0; 6]);
        t.zero_grad();
        assert_eq!(t.grad().unwrap(), &[0.0; 6]);
    }

    #[test]
    fn reverse_time_is_an_involution() {
        let t = Tensor::<f64>::from_fn(&[2, 3, 2], |i| i as f64);
        let r = t.reverse_time().unwrap();
        assert_eq!(&r.data()[0..2], &[4.0, 5.0]);
        assert_eq!(r.reverse_time().unwrap(), t);
    }
}
