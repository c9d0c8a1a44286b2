//! Minimal reverse-mode differentiation engine.
//!
//! [`Graph`] records executed operations on a tape; [`Graph::backward`] walks
//! the tape once in reverse execution order and accumulates gradients into
//! every tensor flagged `requires_grad`. The operator set is exactly what the
//! classifier needs: dense layers, per-point shared dense maps, 3x3 same
//! convolution, 2x2 max pooling, global max pooling, dropout, the weighted
//! softmax cross-entropy loss and the T-Net orthogonality penalty.
//!
//! All arithmetic is f64. Heavy inner loops live in [`linalg`], which picks an
//! AVX-512 micro-kernel at runtime when available and falls back to portable
//! scalar code otherwise; for a fixed build and machine every result is
//! bit-deterministic.

mod fdcheck;
mod graph;
pub(crate) mod linalg;

pub use fdcheck::finite_difference_check;
pub use graph::{Activation, Graph, Var};

/// Benchmark-only entry points; not part of the public contract.
#[doc(hidden)]
pub fn bench_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    linalg::matmul_bias_act(a, b, None, m, k, n, false)
}

#[doc(hidden)]
#[allow(clippy::too_many_arguments)]
pub fn bench_conv_forward(
    x: &[f64],
    k: &[f64],
    bias: &[f64],
    batch: usize,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
) -> Vec<f64> {
    let shape = linalg::ConvShape { batch, h, w, cin, cout };
    linalg::conv2d_forward(x, k, bias, &shape, false)
}

use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Dense n-dimensional f64 array, row-major. Values are shared behind an
/// `Arc` so inserting parameters into a graph does not copy them.
#[derive(Debug, Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Arc<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "shape {shape:?} does not match {} values",
            values.len()
        );
        Tensor {
            shape,
            values: Arc::new(values),
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::new(vec![1], vec![v])
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            values: Arc::new(vec![0.0; len]),
        }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(usize) -> f64) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            values: Arc::new((0..len).map(&mut f).collect()),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access; clones the buffer only if it is currently shared.
    pub fn values_mut(&mut self) -> &mut [f64] {
        Arc::make_mut(&mut self.values).as_mut_slice()
    }

    pub(crate) fn values_arc(&self) -> Arc<Vec<f64>> {
        Arc::clone(&self.values)
    }

    pub(crate) fn from_arc(shape: Vec<usize>, values: Arc<Vec<f64>>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor { shape, values }
    }

    /// Reinterpret with a new shape of identical element count. Shares the
    /// underlying buffer.
    pub fn reshaped(&self, shape: Vec<usize>) -> Tensor {
        Tensor::from_arc(shape, self.values_arc())
    }
}

impl PartialEq for Tensor {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.values == other.values
    }
}

/// SplitMix64 step; used to derive independent sub-seeds (per epoch, batch,
/// dropout layer) from one master seed without correlated streams.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
