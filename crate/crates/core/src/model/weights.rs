use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::descriptor::{ArchitectureDescriptor, Init};
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Parameter tensors in the descriptor's canonical order (each group's
/// channel pipe, then the joined pipe), named `group/layer/kernel` etc.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    tensors: Vec<Tensor>,
}

impl ModelWeights {
    pub fn zeros(descriptor: &ArchitectureDescriptor) -> Result<Self> {
        let tensors = descriptor
            .param_specs()?
            .into_iter()
            .map(|s| Tensor {
                data: vec![0.0; s.shape.iter().product()],
                name: s.name,
                shape: s.shape,
            })
            .collect();
        Ok(Self { tensors })
    }

    /// Glorot-uniform kernels, zero biases and the descriptor's scale init.
    pub fn glorot(descriptor: &ArchitectureDescriptor, seed: u64) -> Result<Self> {
        let mut rng = rng_for(seed, &[stream::INIT]);
        let tensors = descriptor
            .param_specs()?
            .into_iter()
            .map(|s| {
                let n: usize = s.shape.iter().product();
                let data = match s.init {
                    Init::Constant(v) => vec![v; n],
                    Init::GlorotUniform { fan_in, fan_out } => {
                        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                        (0..n).map(|_| rng.random_range(-limit..limit)).collect()
                    }
                };
                Tensor {
                    name: s.name,
                    shape: s.shape,
                    data,
                }
            })
            .collect();
        Ok(Self { tensors })
    }

    pub fn from_tensors(descriptor: &ArchitectureDescriptor, tensors: Vec<Tensor>) -> Result<Self> {
        let w = Self { tensors };
        w.check(descriptor)?;
        Ok(w)
    }

    /// Names and shapes must match the descriptor exactly; values must be finite.
    pub fn check(&self, descriptor: &ArchitectureDescriptor) -> Result<()> {
        let specs = descriptor.param_specs()?;
        if specs.len() != self.tensors.len() {
            return Err(Error::shape(
                "weights",
                format!("expected {} tensors, found {}", specs.len(), self.tensors.len()),
            ));
        }
        for (spec, t) in specs.iter().zip(&self.tensors) {
            if spec.name != t.name || spec.shape != t.shape || t.data.len() != t.numel() {
                return Err(Error::shape(
                    spec.name.clone(),
                    format!("expected {:?}, found `{}` {:?} with {} values", spec.shape, t.name, t.shape, t.data.len()),
                ));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("tensor `{}` has non-finite values", t.name)));
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn n_params(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn into_tensors(self) -> Vec<Tensor> {
        self.tensors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glorot_bounds_and_names() {
        let d = ArchitectureDescriptor::full();
        let w = ModelWeights::glorot(&d, 5).unwrap();
        w.check(&d).unwrap();
        assert_eq!(w.n_params(), 163_179);
        for (spec, t) in d.param_specs().unwrap().iter().zip(w.tensors()) {
            match spec.init {
                Init::GlorotUniform { fan_in, fan_out } => {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    assert!(t.data.iter().all(|v| v.abs() <= limit), "{}", t.name);
                    let max = t.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    assert!(max > 0.5 * limit);
                }
                Init::Constant(c) => assert!(t.data.iter().all(|&v| v == c)),
            }
        }
        assert_eq!(w.tensor("eeg/scale/scale").unwrap().data, vec![0.05]);
        assert_eq!(w.tensor("joined/dense_3/kernel").unwrap().shape, vec![85, 6]);
        assert_eq!(w.tensor("emg/conv1d_2/kernel").unwrap().shape, vec![19, 16, 19]);
    }

    #[test]
    fn check_rejects_mismatches() {
        let d = ArchitectureDescriptor::reference();
        let mut tensors = ModelWeights::zeros(&d).unwrap().into_tensors();
        tensors[3].shape.reverse();
        assert!(ModelWeights::from_tensors(&d, tensors).is_err());
        let mut tensors = ModelWeights::zeros(&d).unwrap().into_tensors();
        tensors[0].data[0] = f64::NAN;
        assert!(ModelWeights::from_tensors(&d, tensors).is_err());
    }
}
