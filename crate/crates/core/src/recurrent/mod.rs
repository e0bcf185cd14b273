//! LSTM and GRU cells, full-sequence runners with backpropagation through
//! time, and the bidirectional wrapper.
//!
//! Gate blocks are laid out contiguously along the last weight axis:
//! `[i | f | g | o]` for LSTM and `[z | r | h̃]` for GRU. A single fused bias
//! vector covers all gates.

mod bidirectional;
mod cell;
mod sequence;

pub use bidirectional::{bidirectional, bidirectional_backward, BiCache, BiGrads};
pub use cell::{gru_step, lstm_step, StepCache};
pub use sequence::{bptt_backward, run_sequence, run_sequence_dir, RecurrentCache, RecurrentGrads};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    /// Number of gate blocks.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentParams<R: Real> {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `[input_dim, G·hidden_dim]`
    pub input_weights: Tensor<R>,
    /// `[hidden_dim, G·hidden_dim]`
    pub recurrent_weights: Tensor<R>,
    /// `[G·hidden_dim]`
    pub bias: Tensor<R>,
}

pub fn recurrent_param_count(kind: CellKind, input_dim: usize, hidden_dim: usize) -> usize {
    kind.gates() * (input_dim * hidden_dim + hidden_dim * hidden_dim + hidden_dim)
}

impl<R: Real> RecurrentParams<R> {
    pub fn zeros(kind: CellKind, input_dim: usize, hidden_dim: usize) -> Self {
        let gh = kind.gates() * hidden_dim;
        RecurrentParams {
            kind,
            input_dim,
            hidden_dim,
            input_weights: Tensor::zeros(&[input_dim, gh]),
            recurrent_weights: Tensor::zeros(&[hidden_dim, gh]),
            bias: Tensor::zeros(&[gh]),
        }
    }

    /// He-normal input weights, orthogonal recurrent weights, zero biases
    /// except the LSTM forget block which starts at one.
    pub fn init<G: Rng + ?Sized>(kind: CellKind, input_dim: usize, hidden_dim: usize, rng: &mut G) -> Self {
        let mut p = Self::zeros(kind, input_dim, hidden_dim);
        let std = (2.0 / input_dim as f64).sqrt();
        for v in p.input_weights.data_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = R::of(z * std);
        }
        let ortho = orthogonal_rows(hidden_dim, kind.gates() * hidden_dim, rng);
        for (v, o) in p.recurrent_weights.data_mut().iter_mut().zip(ortho) {
            *v = R::of(o);
        }
        if kind == CellKind::Lstm {
            for v in &mut p.bias.data_mut()[hidden_dim..2 * hidden_dim] {
                *v = R::one();
            }
        }
        p
    }

    pub fn param_count(&self) -> usize {
        recurrent_param_count(self.kind, self.input_dim, self.hidden_dim)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let gh = self.kind.gates() * self.hidden_dim;
        if self.input_weights.shape() != [self.input_dim, gh]
            || self.recurrent_weights.shape() != [self.hidden_dim, gh]
            || self.bias.shape() != [gh]
        {
            return Err(Error::dim(format!(
                "{:?} parameters inconsistent with input {} / hidden {}",
                self.kind, self.input_dim, self.hidden_dim
            )));
        }
        Ok(())
    }
}

/// `rows × cols` matrix (rows ≤ cols) with orthonormal rows, via modified
/// Gram–Schmidt on a Gaussian draw.
pub(crate) fn orthogonal_rows<G: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut G) -> Vec<f64> {
    assert!(rows <= cols);
    let mut m: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    for i in 0..rows {
        for j in 0..i {
            let dot: f64 = (0..cols).map(|k| m[i * cols + k] * m[j * cols + k]).sum();
            for k in 0..cols {
                m[i * cols + k] -= dot * m[j * cols + k];
            }
        }
        let norm = (0..cols).map(|k| m[i * cols + k].powi(2)).sum::<f64>().sqrt();
        for k in 0..cols {
            m[i * cols + k] /= norm;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_parameter_counts() {
        assert_eq!(recurrent_param_count(CellKind::Lstm, 256, 128), 197_120);
        assert_eq!(2 * recurrent_param_count(CellKind::Lstm, 128, 128), 263_168);
        assert_eq!(recurrent_param_count(CellKind::Gru, 256, 128), 147_840);
    }

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (r, c) = (6, 24);
        let m = orthogonal_rows(r, c, &mut rng);
        for i in 0..r {
            for j in 0..r {
                let dot: f64 = (0..c).map(|k| m[i * c + k] * m[j * c + k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lstm_forget_bias_starts_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = RecurrentParams::<f64>::init(CellKind::Lstm, 3, 2, &mut rng);
        assert_eq!(p.bias.data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let g = RecurrentParams::<f64>::init(CellKind::Gru, 3, 2, &mut rng);
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }
}
