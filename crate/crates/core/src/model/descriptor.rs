//! Declarative description of the two-stage convolutional classifier.
//!
//! Every input channel runs through a channel pipe (scalar rescaling, then
//! same-padded 1-D convolutions with ReLU and same-padded max pooling). The
//! pipe outputs are stacked into an `(n, channels, filters)` tensor and fed
//! to the joined pipe (a valid 2-D convolution with ReLU, dense ReLU layers
//! and a softmax layer). Channels in the same parameter group share weights.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::signal::ChannelRole;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChannelLayer {
    /// One trainable scalar multiplier.
    Scale { init: f64 },
    /// Unit stride, same padding, ReLU.
    Conv1d { width: usize, filters: usize },
    /// Same padding.
    MaxPool1d { width: usize, stride: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JoinedLayer {
    /// Valid padding, unit stride, ReLU. `height` runs along time, `width`
    /// across the stacked channels.
    Conv2d {
        height: usize,
        width: usize,
        filters: usize,
    },
    /// Flattens its input first.
    Dense { units: usize, activation: Activation },
}

/// Channels (by role) that share one set of channel-pipe parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub roles: Vec<ChannelRole>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureDescriptor {
    pub name: String,
    pub input_len: usize,
    pub channel_roles: Vec<ChannelRole>,
    pub param_groups: Vec<ParamGroup>,
    pub channel_pipe: Vec<ChannelLayer>,
    pub joined_pipe: Vec<JoinedLayer>,
}

/// Tensor shape, displayed as `960×16`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape(pub Vec<usize>);

impl Shape {
    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("×"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipe {
    Channel,
    Joined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerShape {
    pub pipe: Pipe,
    pub name: String,
    pub description: String,
    pub output: Shape,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub input: Shape,
    pub channel: Vec<LayerShape>,
    pub joined_input: Shape,
    pub joined: Vec<LayerShape>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParameterCounts {
    /// Trainable parameters of one channel pipe.
    pub channel_pipe: usize,
    pub joined_pipe: usize,
    /// Number of independent channel-pipe parameter sets.
    pub channel_groups: usize,
    pub total: usize,
}

/// How a parameter tensor is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Constant(f64),
    GlorotUniform { fan_in: usize, fan_out: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

pub(crate) fn channel_layer_names(layers: &[ChannelLayer]) -> Vec<String> {
    let (mut conv, mut pool, mut scale) = (0, 0, 0);
    layers
        .iter()
        .map(|l| match l {
            ChannelLayer::Scale { .. } => {
                scale += 1;
                if scale == 1 { "scale".to_string() } else { format!("scale_{scale}") }
            }
            ChannelLayer::Conv1d { .. } => {
                conv += 1;
                format!("conv1d_{conv}")
            }
            ChannelLayer::MaxPool1d { .. } => {
                pool += 1;
                format!("maxpool_{pool}")
            }
        })
        .collect()
}

pub(crate) fn joined_layer_names(layers: &[JoinedLayer]) -> Vec<String> {
    let (mut conv, mut dense) = (0, 0);
    layers
        .iter()
        .map(|l| match l {
            JoinedLayer::Conv2d { .. } => {
                conv += 1;
                format!("conv2d_{conv}")
            }
            JoinedLayer::Dense { .. } => {
                dense += 1;
                format!("dense_{dense}")
            }
        })
        .collect()
}

/// Output length of same-padded pooling/convolution with the given stride.
pub(crate) fn same_len(len: usize, stride: usize) -> usize {
    len.div_ceil(stride)
}

/// Left padding for a same-padded window of `width` with `stride`
/// (the extra sample of an odd total goes to the right).
pub(crate) fn same_pad_left(len: usize, width: usize, stride: usize) -> usize {
    let out = same_len(len, stride);
    let total = ((out - 1) * stride + width).saturating_sub(len);
    total / 2
}

impl ArchitectureDescriptor {
    /// The full-size network: channel pipes of 16/19/23/27 filters and a
    /// joined pipe of a 20×4 convolution and two 85-unit dense layers.
    pub fn full() -> Self {
        Self::two_stage("full", [16, 19, 23, 27], [16, 19, 23, 27], 10, 85)
    }

    /// Width-reduced variant for desk-scale training: 8 filters per channel
    /// convolution and 32-unit dense layers; kernel widths unchanged.
    pub fn reference() -> Self {
        Self::two_stage("reference", [16, 19, 23, 27], [8, 8, 8, 8], 10, 32)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::full()),
            "reference" => Ok(Self::reference()),
            other => Err(Error::invalid(format!("unknown architecture `{other}`"))),
        }
    }

    fn two_stage(
        name: &str,
        widths: [usize; 4],
        filters: [usize; 4],
        joint_filters: usize,
        dense: usize,
    ) -> Self {
        let mut channel_pipe = vec![ChannelLayer::Scale { init: 0.05 }];
        for (w, f) in widths.into_iter().zip(filters) {
            channel_pipe.push(ChannelLayer::Conv1d { width: w, filters: f });
            channel_pipe.push(ChannelLayer::MaxPool1d { width: 3, stride: 2 });
        }
        Self {
            name: name.to_string(),
            input_len: 960,
            channel_roles: ChannelRole::STANDARD.to_vec(),
            param_groups: vec![
                ParamGroup {
                    name: "eeg".into(),
                    roles: vec![ChannelRole::Eeg1, ChannelRole::Eeg2],
                },
                ParamGroup {
                    name: "eog".into(),
                    roles: vec![ChannelRole::Eog],
                },
                ParamGroup {
                    name: "emg".into(),
                    roles: vec![ChannelRole::Emg],
                },
            ],
            channel_pipe,
            joined_pipe: vec![
                JoinedLayer::Conv2d {
                    height: 20,
                    width: 4,
                    filters: joint_filters,
                },
                JoinedLayer::Dense {
                    units: dense,
                    activation: Activation::Relu,
                },
                JoinedLayer::Dense {
                    units: dense,
                    activation: Activation::Relu,
                },
                JoinedLayer::Dense {
                    units: 6,
                    activation: Activation::Softmax,
                },
            ],
        }
    }

    /// Same network with a `k`-way softmax output.
    pub fn with_n_classes(mut self, k: usize) -> Self {
        if let Some(JoinedLayer::Dense { units, .. }) = self.joined_pipe.last_mut() {
            *units = k;
        }
        self
    }

    pub fn n_inputs(&self) -> usize {
        self.channel_roles.len()
    }

    pub fn n_classes(&self) -> usize {
        match self.joined_pipe.last() {
            Some(JoinedLayer::Dense { units, .. }) => *units,
            _ => 0,
        }
    }

    /// Parameter group index of every input channel.
    pub fn channel_groups(&self) -> Result<Vec<usize>> {
        self.channel_roles
            .iter()
            .map(|role| {
                let hits: Vec<usize> = self
                    .param_groups
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| g.roles.contains(role))
                    .map(|(i, _)| i)
                    .collect();
                match hits.as_slice() {
                    [g] => Ok(*g),
                    [] => Err(Error::shape("input", format!("channel role {role} has no parameter group"))),
                    _ => Err(Error::shape("input", format!("channel role {role} is in several parameter groups"))),
                }
            })
            .collect()
    }

    /// Output shape of every layer, or an error naming the first layer whose
    /// input it cannot accept.
    pub fn infer_shapes(&self) -> Result<ShapeReport> {
        if self.input_len == 0 {
            return Err(Error::shape("input", "input length is zero"));
        }
        if self.channel_roles.is_empty() {
            return Err(Error::shape("input", "no input channels"));
        }
        self.channel_groups()?;
        if let Some(g) = self.param_groups.iter().find(|g| !self.channel_roles.iter().any(|r| g.roles.contains(r))) {
            return Err(Error::shape("input", format!("parameter group `{}` has no channel", g.name)));
        }

        let mut len = self.input_len;
        let mut ch = 1usize;
        let mut channel = Vec::new();
        for (layer, name) in self.channel_pipe.iter().zip(channel_layer_names(&self.channel_pipe)) {
            let (description, params) = match *layer {
                ChannelLayer::Scale { .. } => ("Scalar rescaling".to_string(), 1),
                ChannelLayer::Conv1d { width, filters } => {
                    if width == 0 || filters == 0 {
                        return Err(Error::shape(name, "zero kernel width or filter count"));
                    }
                    let params = width * ch * filters + filters;
                    ch = filters;
                    (format!("W: {width}, F: {filters}, ReLU"), params)
                }
                ChannelLayer::MaxPool1d { width, stride } => {
                    if width == 0 || stride == 0 {
                        return Err(Error::shape(name, "zero pool width or stride"));
                    }
                    len = same_len(len, stride);
                    (format!("W: {width}, S: {stride}"), 0)
                }
            };
            let output = if ch == 1 && !matches!(layer, ChannelLayer::Conv1d { .. }) {
                Shape(vec![len])
            } else {
                Shape(vec![len, ch])
            };
            channel.push(LayerShape {
                pipe: Pipe::Channel,
                name,
                description,
                output,
                params,
            });
        }

        let joined_input = Shape(vec![len, self.n_inputs(), ch]);
        let mut shape = joined_input.0.clone();
        let mut joined = Vec::new();
        let names = joined_layer_names(&self.joined_pipe);
        for (i, (layer, name)) in self.joined_pipe.iter().zip(names).enumerate() {
            let last = i + 1 == self.joined_pipe.len();
            let (description, params) = match *layer {
                JoinedLayer::Conv2d { height, width, filters } => {
                    if shape.len() != 3 {
                        return Err(Error::shape(name, format!("expects a 3-D input, got {}", Shape(shape))));
                    }
                    if height == 0 || width == 0 || filters == 0 {
                        return Err(Error::shape(name, "zero kernel size or filter count"));
                    }
                    if height > shape[0] || width > shape[1] {
                        return Err(Error::shape(
                            name,
                            format!("kernel {height}×{width} does not fit input {}", Shape(shape)),
                        ));
                    }
                    let params = height * width * shape[2] * filters + filters;
                    shape = vec![shape[0] - height + 1, shape[1] - width + 1, filters];
                    (format!("W: {height}×{width}, F: {filters}, ReLU"), params)
                }
                JoinedLayer::Dense { units, activation } => {
                    if units == 0 {
                        return Err(Error::shape(name, "zero units"));
                    }
                    if (activation == Activation::Softmax) != last {
                        return Err(Error::shape(name, "softmax must be the last layer, and only the last"));
                    }
                    let fan_in: usize = shape.iter().product();
                    shape = vec![units];
                    let act = match activation {
                        Activation::Relu => "ReLU",
                        Activation::Softmax => "soft-max",
                    };
                    (format!("{units} neurons, {act}"), fan_in * units + units)
                }
            };
            joined.push(LayerShape {
                pipe: Pipe::Joined,
                name,
                description,
                output: Shape(shape.clone()),
                params,
            });
        }
        match self.joined_pipe.last() {
            Some(JoinedLayer::Dense { activation: Activation::Softmax, .. }) => {}
            _ => return Err(Error::shape("output", "the joined pipe must end in a softmax dense layer")),
        }
        Ok(ShapeReport {
            input: Shape(vec![self.input_len]),
            channel,
            joined_input,
            joined,
        })
    }

    pub fn count_parameters(&self) -> Result<ParameterCounts> {
        let report = self.infer_shapes()?;
        let channel_pipe: usize = report.channel.iter().map(|l| l.params).sum();
        let joined_pipe: usize = report.joined.iter().map(|l| l.params).sum();
        let channel_groups = self.param_groups.len();
        Ok(ParameterCounts {
            channel_pipe,
            joined_pipe,
            channel_groups,
            total: channel_groups * channel_pipe + joined_pipe,
        })
    }

    /// All parameter tensors in canonical order: each group's channel pipe,
    /// then the joined pipe.
    pub fn param_specs(&self) -> Result<Vec<ParamSpec>> {
        let report = self.infer_shapes()?;
        let mut specs = Vec::new();
        let names = channel_layer_names(&self.channel_pipe);
        for group in &self.param_groups {
            let mut ch = 1;
            for (layer, name) in self.channel_pipe.iter().zip(&names) {
                let prefix = format!("{}/{}", group.name, name);
                match *layer {
                    ChannelLayer::Scale { init } => specs.push(ParamSpec {
                        name: format!("{prefix}/scale"),
                        shape: vec![1],
                        init: Init::Constant(init),
                    }),
                    ChannelLayer::Conv1d { width, filters } => {
                        specs.push(ParamSpec {
                            name: format!("{prefix}/kernel"),
                            shape: vec![width, ch, filters],
                            init: Init::GlorotUniform {
                                fan_in: width * ch,
                                fan_out: width * filters,
                            },
                        });
                        specs.push(ParamSpec {
                            name: format!("{prefix}/bias"),
                            shape: vec![filters],
                            init: Init::Constant(0.0),
                        });
                        ch = filters;
                    }
                    ChannelLayer::MaxPool1d { .. } => {}
                }
            }
        }
        let mut shape = report.joined_input.0.clone();
        for (layer, ls) in self.joined_pipe.iter().zip(&report.joined) {
            let prefix = format!("joined/{}", ls.name);
            match *layer {
                JoinedLayer::Conv2d { height, width, filters } => {
                    let cin = shape[2];
                    specs.push(ParamSpec {
                        name: format!("{prefix}/kernel"),
                        shape: vec![height, width, cin, filters],
                        init: Init::GlorotUniform {
                            fan_in: height * width * cin,
                            fan_out: height * width * filters,
                        },
                    });
                    specs.push(ParamSpec {
                        name: format!("{prefix}/bias"),
                        shape: vec![filters],
                        init: Init::Constant(0.0),
                    });
                }
                JoinedLayer::Dense { units, .. } => {
                    let fan_in: usize = shape.iter().product();
                    specs.push(ParamSpec {
                        name: format!("{prefix}/kernel"),
                        shape: vec![fan_in, units],
                        init: Init::GlorotUniform { fan_in, fan_out: units },
                    });
                    specs.push(ParamSpec {
                        name: format!("{prefix}/bias"),
                        shape: vec![units],
                        init: Init::Constant(0.0),
                    });
                }
            }
            shape = ls.output.0.clone();
        }
        Ok(specs)
    }

    /// Hex SHA-256 of the descriptor's canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("descriptor serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shapes(layers: &[LayerShape]) -> Vec<String> {
        layers.iter().map(|l| l.output.to_string()).collect()
    }

    #[test]
    fn channel_pipe_shapes() {
        let report = ArchitectureDescriptor::full().infer_shapes().unwrap();
        let after_scale: Vec<String> = shapes(&report.channel)[1..].to_vec();
        assert_eq!(
            after_scale,
            ["960×16", "480×16", "480×19", "240×19", "240×23", "120×23", "120×27", "60×27"]
        );
        assert_eq!(report.channel[0].output.to_string(), "960");
    }

    #[test]
    fn joined_pipe_shapes() {
        let report = ArchitectureDescriptor::full().infer_shapes().unwrap();
        assert_eq!(report.joined_input.to_string(), "60×4×27");
        assert_eq!(shapes(&report.joined), ["41×1×10", "85", "85", "6"]);
    }

    #[test]
    fn parameter_counts() {
        let counts = ArchitectureDescriptor::full().count_parameters().unwrap();
        assert_eq!(counts.channel_pipe, 32_936);
        assert_eq!(counts.joined_pipe, 64_371);
        assert_eq!(counts.total, 163_179);
        let specs = ArchitectureDescriptor::full().param_specs().unwrap();
        let n: usize = specs.iter().map(|s| s.shape.iter().product::<usize>()).sum();
        assert_eq!(n, counts.total);
    }

    #[test]
    fn same_padding_preserves_length() {
        for len in [1, 2, 7, 960] {
            let mut d = ArchitectureDescriptor::reference();
            d.input_len = len;
            d.channel_pipe = vec![ChannelLayer::Conv1d { width: 16, filters: 3 }];
            d.joined_pipe = vec![JoinedLayer::Dense { units: 2, activation: Activation::Softmax }];
            let r = d.infer_shapes().unwrap();
            assert_eq!(r.channel[0].output, Shape(vec![len, 3]));
            assert_eq!(same_pad_left(len, 16, 1), 7);
        }
        assert_eq!(same_pad_left(960, 3, 2), 0);
    }

    #[test]
    fn mismatches_name_the_layer() {
        let mut d = ArchitectureDescriptor::full();
        d.joined_pipe[0] = JoinedLayer::Conv2d { height: 70, width: 4, filters: 10 };
        match d.infer_shapes() {
            Err(Error::ShapeMismatch { layer, .. }) => assert_eq!(layer, "conv2d_1"),
            other => panic!("unexpected {other:?}"),
        }
        let mut d = ArchitectureDescriptor::full();
        d.joined_pipe.swap(0, 1);
        match d.infer_shapes() {
            Err(Error::ShapeMismatch { layer, .. }) => assert_eq!(layer, "conv2d_1"),
            other => panic!("unexpected {other:?}"),
        }
        let mut d = ArchitectureDescriptor::full();
        d.param_groups.pop();
        assert!(d.infer_shapes().is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ArchitectureDescriptor::full();
        let b = ArchitectureDescriptor::reference();
        assert_eq!(a.fingerprint(), ArchitectureDescriptor::full().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
