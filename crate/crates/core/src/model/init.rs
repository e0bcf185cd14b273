use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::real::Real;
use crate::tensor::Tensor;

/// He-normal: zero-mean Gaussian with variance `2 / fan_in`.
pub(crate) fn he_normal<R: Real, G: Rng + ?Sized>(t: &mut Tensor<R>, fan_in: usize, rng: &mut G) {
    let std = (2.0 / fan_in as f64).sqrt();
    for v in t.data_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = R::of(z * std);
    }
}
