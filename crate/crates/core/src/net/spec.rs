use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stage of the fixed feed-forward stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    /// Stride-1 cross-correlation with zero "same" padding; `kernel` must be odd.
    Conv {
        filters: usize,
        kernel: usize,
    },
    Relu,
    /// Non-overlapping `size x size` max pooling (stride = size).
    MaxPool {
        size: usize,
    },
    Flatten,
    Dense {
        units: usize,
    },
    Sigmoid,
}

impl Layer {
    pub fn has_params(&self) -> bool {
        matches!(self, Layer::Conv { .. } | Layer::Dense { .. })
    }

    pub(crate) fn tag(&self) -> u8 {
        match self {
            Layer::Conv { .. } => 1,
            Layer::Relu => 2,
            Layer::MaxPool { .. } => 3,
            Layer::Flatten => 4,
            Layer::Dense { .. } => 5,
            Layer::Sigmoid => 6,
        }
    }

    fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match (*self, input) {
            (Layer::Conv { filters, kernel }, &[_, h, w]) => {
                if kernel % 2 == 0 || filters == 0 {
                    return Err(format!("conv needs odd kernel and >0 filters, got {filters}x{kernel}"));
                }
                Ok(vec![filters, h, w])
            }
            (Layer::MaxPool { size }, &[c, h, w]) => {
                if size == 0 || h < size || w < size {
                    return Err(format!("cannot pool {h}x{w} with window {size}"));
                }
                Ok(vec![c, h / size, w / size])
            }
            (Layer::Flatten, shape) => Ok(vec![shape.iter().product()]),
            (Layer::Dense { units }, &[_]) if units > 0 => Ok(vec![units]),
            (Layer::Relu | Layer::Sigmoid, shape) => Ok(shape.to_vec()),
            (layer, shape) => Err(format!("{layer:?} cannot follow shape {shape:?}")),
        }
    }

    /// Weight tensor shape for a layer receiving `input`.
    pub(crate) fn weight_shape(&self, input: &[usize]) -> Option<Vec<usize>> {
        match *self {
            Layer::Conv { filters, kernel } => Some(vec![filters, input[0], kernel, kernel]),
            Layer::Dense { units } => Some(vec![units, input[0]]),
            _ => None,
        }
    }
}

/// Ordered layer list applied to a `3 x bins x bins` co-occurrence tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub bins: usize,
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    /// The detector stack: three conv(3x3)+ReLU+conv(5x5)+maxpool blocks with
    /// 32, 64 and 128 filters, two 256-unit dense layers with ReLU, and a
    /// single sigmoid unit.
    pub fn standard(bins: usize) -> Self {
        let mut layers = Vec::new();
        for filters in [32, 64, 128] {
            layers.extend([
                Layer::Conv { filters, kernel: 3 },
                Layer::Relu,
                Layer::Conv { filters, kernel: 5 },
                Layer::MaxPool { size: 2 },
            ]);
        }
        layers.extend([
            Layer::Flatten,
            Layer::Dense { units: 256 },
            Layer::Relu,
            Layer::Dense { units: 256 },
            Layer::Relu,
            Layer::Dense { units: 1 },
            Layer::Sigmoid,
        ]);
        Self { bins, layers }
    }

    pub fn input_shape(&self) -> Vec<usize> {
        vec![3, self.bins, self.bins]
    }

    /// Input shape of every layer followed by the final output shape
    /// (`layers.len() + 1` entries).
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.bins == 0 {
            return Err(Error::InvalidConfig("network input size must be positive".into()));
        }
        let mut shapes = vec![self.input_shape()];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer
                .output_shape(shapes.last().unwrap())
                .map_err(|e| Error::InvalidConfig(format!("layer {i}: {e}")))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self.shapes()?.pop().unwrap())
    }

    /// Valid shape chain ending in a single sigmoid unit.
    pub fn validate_classifier(&self) -> Result<()> {
        let out = self.output_shape()?;
        if out != [1] || self.layers.last() != Some(&Layer::Sigmoid) {
            return Err(Error::InvalidConfig(format!(
                "network must end in a single sigmoid unit, output shape is {out:?}"
            )));
        }
        Ok(())
    }

    /// Fails with `ShapeMismatch` unless the network expects `bins`.
    pub fn ensure_bins(&self, bins: usize) -> Result<()> {
        if self.bins != bins {
            return Err(Error::ShapeMismatch {
                expected: vec![3, bins, bins],
                found: self.input_shape(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_b32_shapes() {
        let spec = NetworkSpec::standard(32);
        let shapes = spec.shapes().unwrap();
        let pooled: Vec<_> = spec
            .layers
            .iter()
            .zip(&shapes[1..])
            .filter(|(l, _)| matches!(l, Layer::MaxPool { .. }))
            .map(|(_, s)| s[1])
            .collect();
        assert_eq!(pooled, [16, 8, 4]);
        let flat = spec.layers.iter().position(|l| *l == Layer::Flatten).unwrap();
        assert_eq!(shapes[flat + 1], [2048]);
        spec.validate_classifier().unwrap();
    }

    #[test]
    fn standard_b256_flatten() {
        let shapes = NetworkSpec::standard(256).shapes().unwrap();
        assert!(shapes.contains(&vec![128 * 32 * 32]));
    }

    #[test]
    fn rejects_inconsistent_stacks() {
        let spec = NetworkSpec {
            bins: 4,
            layers: vec![Layer::Dense { units: 3 }],
        };
        assert!(spec.shapes().is_err());
        let spec = NetworkSpec {
            bins: 4,
            layers: vec![Layer::Conv { filters: 2, kernel: 4 }],
        };
        assert!(spec.shapes().is_err());
        let spec = NetworkSpec::standard(4);
        assert!(spec.shapes().is_err());
    }

    #[test]
    fn bins_guard() {
        assert!(matches!(
            NetworkSpec::standard(64).ensure_bins(256),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
