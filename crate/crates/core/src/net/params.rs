use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::net::{NetworkSpec, Scalar, Tensor};

/// Weight and bias of one parametric layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// All trainable tensors, one slot per layer of the spec (`None` for
/// parameter-free layers). Gradients share this type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub layers: Vec<Option<LayerParams<T>>>,
}

impl<T: Scalar> ModelParams<T> {
    /// All-zero parameters shaped for `spec`.
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let layers = spec
            .layers
            .iter()
            .zip(&shapes)
            .map(|(layer, input)| {
                layer.weight_shape(input).map(|ws| LayerParams {
                    bias: Tensor::zeros(vec![ws[0]]),
                    weight: Tensor::zeros(ws),
                })
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    l.as_ref().map(|p| LayerParams {
                        weight: Tensor::zeros(p.weight.shape().to_vec()),
                        bias: Tensor::zeros(p.bias.shape().to_vec()),
                    })
                })
                .collect(),
        }
    }

    /// Weight then bias of every parametric layer, in layer order.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.layers.iter().flatten().flat_map(|p| [&p.weight, &p.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flatten()
            .flat_map(|p| [&mut p.weight, &mut p.bias])
    }

    pub fn num_params(&self) -> usize {
        self.tensors().map(|t| t.len()).sum()
    }

    /// Fails unless every tensor has the shape `spec` requires.
    pub fn check_against(&self, spec: &NetworkSpec) -> Result<()> {
        let want = Self::zeros(spec)?;
        self.check_same_shape(&want)
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![other.layers.len()],
                found: vec![self.layers.len()],
            });
        }
        for (a, b) in self.layers.iter().zip(&other.layers) {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    for (x, y) in [(&a.weight, &b.weight), (&a.bias, &b.bias)] {
                        if x.shape() != y.shape() {
                            return Err(Error::ShapeMismatch {
                                expected: y.shape().to_vec(),
                                found: x.shape().to_vec(),
                            });
                        }
                    }
                }
                _ => {
                    return Err(Error::ShapeMismatch {
                        expected: vec![],
                        found: vec![],
                    })
                }
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    l.as_ref().map(|p| LayerParams {
                        weight: p.weight.cast(),
                        bias: p.bias.cast(),
                    })
                })
                .collect(),
        }
    }
}

/// He-normal initialization: weights ~ N(0, 2 / fan_in), biases zero.
/// Values are drawn in f64 so f32 and f64 models from one seed agree.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<ModelParams<T>> {
    let mut params = ModelParams::<T>::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in params.layers.iter_mut().flatten() {
        let fan_in: usize = layer.weight.shape()[1..].iter().product();
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        for w in layer.weight.data_mut() {
            *w = T::from_f64(normal.sample(&mut rng));
        }
    }
    Ok(params)
}
