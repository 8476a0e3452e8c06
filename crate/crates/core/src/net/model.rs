use crate::error::{Error, Result};
use crate::net::layers::{self, ConvGeom};
use crate::net::{Layer, ModelParams, NetworkSpec, Scalar, Tensor};
use crate::parallel::WorkerPool;

/// Probability clamp used by [`bce_loss`].
pub const BCE_EPSILON: f64 = 1e-7;

/// Activations recorded during a forward pass: `activations[0]` is the input
/// and `activations[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub activations: Vec<Tensor<T>>,
    pool_argmax: Vec<Option<Vec<u32>>>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.activations.last().unwrap()
    }

    /// Flat argmax indices recorded by the pooling layer at `layer`.
    pub fn pool_argmax(&self, layer: usize) -> Option<&[u32]> {
        self.pool_argmax.get(layer)?.as_deref()
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    T::ONE / (T::ONE + (-z).exp())
}

/// Runs every layer of `spec`, keeping all intermediate activations.
pub fn forward_trace<T: Scalar>(params: &ModelParams<T>, spec: &NetworkSpec, x: &Tensor<T>) -> Result<Trace<T>> {
    let shapes = spec.shapes()?;
    if x.shape() != shapes[0].as_slice() {
        return Err(Error::ShapeMismatch {
            expected: shapes[0].clone(),
            found: x.shape().to_vec(),
        });
    }
    if params.layers.len() != spec.layers.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![spec.layers.len()],
            found: vec![params.layers.len()],
        });
    }
    let mut activations = Vec::with_capacity(spec.layers.len() + 1);
    let mut pool_argmax = Vec::with_capacity(spec.layers.len());
    activations.push(x.clone());
    for (i, layer) in spec.layers.iter().enumerate() {
        let input = &activations[i];
        let in_shape = &shapes[i];
        let mut out = Tensor::zeros(shapes[i + 1].clone());
        let mut argmax = None;
        match *layer {
            Layer::Conv { filters, kernel } => {
                let p = layer_params(params, i, layer, in_shape)?;
                let g = ConvGeom {
                    in_channels: in_shape[0],
                    filters,
                    kernel,
                    height: in_shape[1],
                    width: in_shape[2],
                };
                layers::conv_forward(&g, input.data(), p.weight.data(), p.bias.data(), out.data_mut());
            }
            Layer::Relu => {
                for (o, &v) in out.data_mut().iter_mut().zip(input.data()) {
                    *o = if v > T::ZERO { v } else { T::ZERO };
                }
            }
            Layer::MaxPool { size } => {
                argmax = Some(layers::maxpool_forward(
                    input.data(),
                    (in_shape[0], in_shape[1], in_shape[2]),
                    size,
                    out.data_mut(),
                ));
            }
            Layer::Flatten => out.data_mut().copy_from_slice(input.data()),
            Layer::Dense { .. } => {
                let p = layer_params(params, i, layer, in_shape)?;
                layers::dense_forward(input.data(), p.weight.data(), p.bias.data(), out.data_mut());
            }
            Layer::Sigmoid => {
                for (o, &v) in out.data_mut().iter_mut().zip(input.data()) {
                    *o = sigmoid(v);
                }
            }
        }
        if !out.all_finite() {
            return Err(Error::NonFiniteActivation { layer: i });
        }
        activations.push(out);
        pool_argmax.push(argmax);
    }
    Ok(Trace {
        activations,
        pool_argmax,
    })
}

fn layer_params<'a, T: Scalar>(
    params: &'a ModelParams<T>,
    i: usize,
    layer: &Layer,
    in_shape: &[usize],
) -> Result<&'a crate::net::LayerParams<T>> {
    let want = layer.weight_shape(in_shape).expect("parametric layer");
    match params.layers[i].as_ref() {
        Some(p) if p.weight.shape() == want.as_slice() && p.bias.shape() == [want[0]] => Ok(p),
        Some(p) => Err(Error::ShapeMismatch {
            expected: want,
            found: p.weight.shape().to_vec(),
        }),
        None => Err(Error::ShapeMismatch {
            expected: want,
            found: vec![],
        }),
    }
}

/// Probability that `x` is GAN-generated.
pub fn forward<T: Scalar>(params: &ModelParams<T>, spec: &NetworkSpec, x: &Tensor<T>) -> Result<T> {
    spec.validate_classifier()?;
    Ok(forward_trace(params, spec, x)?.output().data()[0])
}

/// Binary cross-entropy with the probability clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(prediction: f64, label: f64) -> f64 {
    let p = prediction.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// Result of back-propagating a single example.
#[derive(Debug, Clone)]
pub struct Backprop<T> {
    pub grads: ModelParams<T>,
    pub prediction: T,
    pub loss: f64,
}

/// Gradient of the BCE loss of one example with respect to every parameter.
/// `label` is 1 for GAN and 0 for real.
pub fn backward<T: Scalar>(
    params: &ModelParams<T>,
    spec: &NetworkSpec,
    x: &Tensor<T>,
    label: f64,
) -> Result<Backprop<T>> {
    spec.validate_classifier()?;
    let trace = forward_trace(params, spec, x)?;
    backward_from_trace(params, spec, &trace, label)
}

pub(crate) fn backward_from_trace<T: Scalar>(
    params: &ModelParams<T>,
    spec: &NetworkSpec,
    trace: &Trace<T>,
    label: f64,
) -> Result<Backprop<T>> {
    let shapes = spec.shapes()?;
    let prediction = trace.output().data()[0];
    let loss = bce_loss(prediction.to_f64(), label);
    let mut grads = params.zeros_like();
    let last = spec.layers.len() - 1;
    // sigmoid followed by BCE: dL/dz = p - y
    let mut delta = Tensor::from_vec(shapes[last].clone(), vec![prediction - T::from_f64(label)]);
    for i in (0..last).rev() {
        let layer = spec.layers[i];
        let input = &trace.activations[i];
        let in_shape = &shapes[i];
        let need_input_grad = i > 0;
        let mut dinput = Tensor::zeros(in_shape.clone());
        match layer {
            Layer::Conv { filters, kernel } => {
                let g = ConvGeom {
                    in_channels: in_shape[0],
                    filters,
                    kernel,
                    height: in_shape[1],
                    width: in_shape[2],
                };
                let p = params.layers[i].as_ref().unwrap();
                let gp = grads.layers[i].as_mut().unwrap();
                layers::conv_backward(
                    &g,
                    input.data(),
                    p.weight.data(),
                    delta.data(),
                    gp.weight.data_mut(),
                    gp.bias.data_mut(),
                    need_input_grad.then_some(dinput.data_mut()),
                );
                if !(gp.weight.all_finite() && gp.bias.all_finite()) {
                    return Err(Error::NonFiniteGradient { layer: i });
                }
            }
            Layer::Dense { .. } => {
                let p = params.layers[i].as_ref().unwrap();
                let gp = grads.layers[i].as_mut().unwrap();
                layers::dense_backward(
                    input.data(),
                    p.weight.data(),
                    delta.data(),
                    gp.weight.data_mut(),
                    gp.bias.data_mut(),
                    need_input_grad.then_some(dinput.data_mut()),
                );
                if !(gp.weight.all_finite() && gp.bias.all_finite()) {
                    return Err(Error::NonFiniteGradient { layer: i });
                }
            }
            Layer::Relu => {
                for ((d, &g), &pre) in dinput.data_mut().iter_mut().zip(delta.data()).zip(input.data()) {
                    *d = if pre > T::ZERO { g } else { T::ZERO };
                }
            }
            Layer::MaxPool { .. } => {
                let argmax = trace.pool_argmax[i].as_ref().unwrap();
                layers::maxpool_backward(delta.data(), argmax, dinput.data_mut());
            }
            Layer::Flatten => dinput.data_mut().copy_from_slice(delta.data()),
            Layer::Sigmoid => {
                let out = &trace.activations[i + 1];
                for ((d, &g), &s) in dinput.data_mut().iter_mut().zip(delta.data()).zip(out.data()) {
                    *d = g * s * (T::ONE - s);
                }
            }
        }
        if !need_input_grad {
            break;
        }
        if !dinput.all_finite() {
            return Err(Error::NonFiniteGradient { layer: i });
        }
        delta = dinput;
    }
    Ok(Backprop {
        grads,
        prediction,
        loss,
    })
}

/// Mean gradient over a mini-batch.
#[derive(Debug, Clone)]
pub struct BatchGradient<T> {
    pub grads: ModelParams<T>,
    pub predictions: Vec<T>,
    pub losses: Vec<f64>,
}

/// Mean gradient of a batch of `(input, label)` pairs. Examples are spread
/// over the pool but summed strictly in example order, so the result does
/// not depend on the worker count.
pub fn batch_gradient<T: Scalar>(
    params: &ModelParams<T>,
    spec: &NetworkSpec,
    batch: &[(&Tensor<T>, f64)],
    pool: &WorkerPool,
) -> Result<BatchGradient<T>> {
    if batch.is_empty() {
        return Err(Error::EmptySplit("batch".into()));
    }
    spec.validate_classifier()?;
    let mut sum = params.zeros_like();
    let mut predictions = Vec::with_capacity(batch.len());
    let mut losses = Vec::with_capacity(batch.len());
    for chunk in batch.chunks(pool.workers()) {
        let results = pool.map_ordered(chunk, |(x, y)| backward(params, spec, x, *y));
        for r in results {
            let bp = r?;
            sum.add_assign(&bp.grads);
            predictions.push(bp.prediction);
            losses.push(bp.loss);
        }
    }
    sum.scale(T::from_f64(1.0 / batch.len() as f64));
    Ok(BatchGradient {
        grads: sum,
        predictions,
        losses,
    })
}

/// Forward pass over many inputs, order-preserving.
pub fn predict_many<T: Scalar>(
    params: &ModelParams<T>,
    spec: &NetworkSpec,
    inputs: &[&Tensor<T>],
    pool: &WorkerPool,
) -> Result<Vec<T>> {
    spec.validate_classifier()?;
    pool.map_ordered(inputs, |x| forward(params, spec, x))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_params;

    fn input(bins: usize, seed: u64) -> Tensor<f64> {
        let n = 3 * bins * bins;
        let data = (0..n)
            .map(|i| ((i as u64 * 7919 + seed * 104729) % 1013) as f64 / 1013.0)
            .collect();
        Tensor::from_vec(vec![3, bins, bins], data)
    }

    #[test]
    fn zero_network_outputs_half() {
        let spec = NetworkSpec::standard(8);
        let params = ModelParams::<f32>::zeros(&spec).unwrap();
        for seed in 0..3 {
            let x = input(8, seed).cast::<f32>();
            assert_eq!(forward(&params, &spec, &x).unwrap(), 0.5);
        }
    }

    #[test]
    fn bce_values() {
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(0.5, 0.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(0.9, 1.0) - 0.105_360_515_657_826_3).abs() < 1e-12);
        assert!(bce_loss(0.0, 1.0).is_finite());
        assert!(bce_loss(1.0, 0.0).is_finite());
        assert!((bce_loss(0.0, 1.0) + (1e-7f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn final_bias_gradient_is_p_minus_y() {
        let spec = NetworkSpec::standard(8);
        let params = ModelParams::<f64>::zeros(&spec).unwrap();
        let bp = backward(&params, &spec, &input(8, 1), 1.0).unwrap();
        assert_eq!(bp.prediction, 0.5);
        let last_dense = spec.layers.len() - 2;
        assert_eq!(bp.grads.layers[last_dense].as_ref().unwrap().bias.data(), &[-0.5]);
    }

    #[test]
    fn gradient_shapes_mirror_params() {
        let spec = NetworkSpec::standard(8);
        let params = init_params::<f32>(&spec, 1).unwrap();
        let bp = backward(&params, &spec, &input(8, 2).cast(), 0.0).unwrap();
        bp.grads.check_same_shape(&params).unwrap();
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let spec = NetworkSpec::standard(8);
        let params = ModelParams::<f64>::zeros(&spec).unwrap();
        let x = input(16, 0);
        assert!(matches!(forward(&params, &spec, &x), Err(Error::ShapeMismatch { .. })));
        let other = ModelParams::<f64>::zeros(&NetworkSpec::standard(16)).unwrap();
        assert!(matches!(
            forward(&other, &spec, &input(8, 0)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_input_is_detected() {
        let spec = NetworkSpec::standard(8);
        let params = init_params::<f64>(&spec, 0).unwrap();
        let mut x = input(8, 0);
        x.data_mut()[5] = f64::NAN;
        assert!(matches!(
            forward(&params, &spec, &x),
            Err(Error::NonFiniteActivation { layer: 0 })
        ));
    }

    #[test]
    fn batch_gradient_is_worker_independent() {
        let spec = NetworkSpec::standard(8);
        let params = init_params::<f32>(&spec, 4).unwrap();
        let xs: Vec<_> = (0..5).map(|s| input(8, s).cast::<f32>()).collect();
        let batch: Vec<_> = xs.iter().enumerate().map(|(i, x)| (x, (i % 2) as f64)).collect();
        let a = batch_gradient(&params, &spec, &batch, &WorkerPool::new(1)).unwrap();
        let b = batch_gradient(&params, &spec, &batch, &WorkerPool::new(3)).unwrap();
        assert_eq!(a.grads, b.grads);
        assert_eq!(a.losses, b.losses);
    }
}
