use std::fmt;

use crate::error::{Error, Result};

/// One layer of a sequential model.
///
/// `Dense` accepts any input whose element count equals `in_dim` (an implicit
/// flatten). `Conv2d` takes `[channels, height, width]` inputs and uses valid
/// (unpadded) correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
    },
    Relu,
    Flatten,
}

impl Layer {
    pub fn is_parameterized(&self) -> bool {
        matches!(self, Layer::Dense { .. } | Layer::Conv2d { .. })
    }

    /// (weight count, bias count)
    pub fn param_counts(&self) -> (usize, usize) {
        match *self {
            Layer::Dense { in_dim, out_dim } => (in_dim * out_dim, out_dim),
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel_size,
                ..
            } => (
                out_channels * in_channels * kernel_size * kernel_size,
                out_channels,
            ),
            Layer::Relu | Layer::Flatten => (0, 0),
        }
    }

    fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        let numel: usize = input.iter().product();
        match *self {
            Layer::Dense { in_dim, out_dim } => {
                if numel != in_dim {
                    return Err(format!("expects {in_dim} inputs, got {input:?} ({numel})"));
                }
                Ok(vec![out_dim])
            }
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
            } => {
                let [c, h, w] = input else {
                    return Err(format!("expects a [channels, height, width] input, got {input:?}"));
                };
                if *c != in_channels {
                    return Err(format!("expects {in_channels} channels, got {input:?}"));
                }
                if kernel_size == 0 || stride == 0 {
                    return Err("kernel_size and stride must be positive".into());
                }
                if *h < kernel_size || *w < kernel_size {
                    return Err(format!("kernel {kernel_size} larger than input {input:?}"));
                }
                Ok(vec![
                    out_channels,
                    (h - kernel_size) / stride + 1,
                    (w - kernel_size) / stride + 1,
                ])
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![numel]),
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Layer::Dense { in_dim, out_dim } => write!(f, "dense {in_dim} {out_dim}"),
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
            } => write!(f, "conv2d {in_channels} {out_channels} {kernel_size} {stride}"),
            Layer::Relu => f.write_str("relu"),
            Layer::Flatten => f.write_str("flatten"),
        }
    }
}

impl std::str::FromStr for Layer {
    type Err = Error;

    /// Parses the `Display` form, e.g. `dense 784 64` or `conv2d 1 8 3 1`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let nums = |n: usize| -> Result<Vec<usize>> {
            if parts.len() != n + 1 {
                return Err(Error::Config(format!(
                    "layer `{s}`: `{}` takes {n} integer arguments",
                    parts[0]
                )));
            }
            parts[1..]
                .iter()
                .map(|p| {
                    p.parse::<usize>()
                        .map_err(|_| Error::Config(format!("layer `{s}`: `{p}` is not an integer")))
                })
                .collect()
        };
        match parts.first().copied() {
            Some("dense") => {
                let v = nums(2)?;
                Ok(Layer::Dense { in_dim: v[0], out_dim: v[1] })
            }
            Some("conv2d") => {
                let v = nums(4)?;
                Ok(Layer::Conv2d {
                    in_channels: v[0],
                    out_channels: v[1],
                    kernel_size: v[2],
                    stride: v[3],
                })
            }
            Some("relu") if parts.len() == 1 => Ok(Layer::Relu),
            Some("flatten") if parts.len() == 1 => Ok(Layer::Flatten),
            _ => Err(Error::Config(format!(
                "unknown layer `{s}` (expected dense, conv2d, relu or flatten)"
            ))),
        }
    }
}

/// Sequential model topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub layers: Vec<Layer>,
    pub input_shape: Vec<usize>,
    pub num_classes: usize,
}

/// Resolved shapes and parameter offsets of a valid [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the
    /// logits shape.
    pub shapes: Vec<Vec<usize>>,
    /// Start of each layer's parameter slice, `None` for parameter-free layers.
    pub offsets: Vec<Option<usize>>,
    pub total_params: usize,
}

impl Layout {
    pub fn param_layer_count(&self) -> usize {
        self.offsets.iter().flatten().count()
    }

    pub fn numel(&self, i: usize) -> usize {
        self.shapes[i].iter().product()
    }
}

impl ModelSpec {
    pub fn new(layers: Vec<Layer>, input_shape: Vec<usize>, num_classes: usize) -> Result<Self> {
        let spec = ModelSpec {
            layers,
            input_shape,
            num_classes,
        };
        spec.layout()?;
        Ok(spec)
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Validate the topology and compute per-layer shapes and offsets.
    pub fn layout(&self) -> Result<Layout> {
        if self.num_classes == 0 {
            return Err(Error::Shape("num_classes must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Shape("model has no layers".into()));
        }
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::Shape(format!("invalid input shape {:?}", self.input_shape)));
        }
        let mut shapes = vec![self.input_shape.clone()];
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut total = 0usize;
        for (i, layer) in self.layers.iter().enumerate() {
            let input = shapes.last().unwrap();
            let out = layer.output_shape(input).map_err(|msg| {
                let prev = if i == 0 {
                    "the model input".to_string()
                } else {
                    format!("layer {} ({})", i - 1, self.layers[i - 1])
                };
                Error::Shape(format!("layer {i} ({layer}) does not compose with {prev}: {msg}"))
            })?;
            if layer.is_parameterized() {
                offsets.push(Some(total));
                let (w, b) = layer.param_counts();
                total += w + b;
            } else {
                offsets.push(None);
            }
            shapes.push(out);
        }
        let last = shapes.last().unwrap();
        if last.len() != 1 || last[0] != self.num_classes {
            return Err(Error::Shape(format!(
                "final layer {} ({}) outputs {last:?}, expected [{}] classes",
                self.layers.len() - 1,
                self.layers[self.layers.len() - 1],
                self.num_classes
            )));
        }
        if total == 0 {
            return Err(Error::Shape("model has no parameterized layers".into()));
        }
        Ok(Layout {
            shapes,
            offsets,
            total_params: total,
        })
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self.layout()?.total_params)
    }

    pub fn param_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| l.is_parameterized()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_text_roundtrip() {
        for l in [
            Layer::Dense { in_dim: 784, out_dim: 64 },
            Layer::Conv2d { in_channels: 1, out_channels: 8, kernel_size: 3, stride: 2 },
            Layer::Relu,
            Layer::Flatten,
        ] {
            assert_eq!(l.to_string().parse::<Layer>().unwrap(), l);
        }
        assert!("dense 3".parse::<Layer>().is_err());
        assert!("pool 2".parse::<Layer>().is_err());
    }

    #[test]
    fn conv_shapes_compose() {
        let spec = ModelSpec::new(
            vec![
                Layer::Conv2d { in_channels: 1, out_channels: 4, kernel_size: 3, stride: 2 },
                Layer::Relu,
                Layer::Flatten,
                Layer::Dense { in_dim: 4 * 6 * 6, out_dim: 5 },
            ],
            vec![1, 13, 13],
            5,
        )
        .unwrap();
        let layout = spec.layout().unwrap();
        assert_eq!(layout.shapes[1], vec![4, 6, 6]);
        assert_eq!(layout.total_params, 4 * 9 + 4 + 144 * 5 + 5);
        assert_eq!(layout.param_layer_count(), 2);
    }

    #[test]
    fn mismatch_names_layer_pair() {
        let err = ModelSpec::new(
            vec![Layer::Dense { in_dim: 4, out_dim: 3 }, Layer::Dense { in_dim: 5, out_dim: 2 }],
            vec![4],
            2,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("layer 1 (dense 5 2)") && msg.contains("layer 0 (dense 4 3)"), "{msg}");
    }

    #[test]
    fn final_width_must_match_classes() {
        let err = ModelSpec::new(vec![Layer::Dense { in_dim: 4, out_dim: 3 }], vec![4], 2).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }
}
