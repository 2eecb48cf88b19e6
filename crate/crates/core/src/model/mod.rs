//! Two-stage convolutional sleep-stage classifier.

mod checkpoint;
mod descriptor;
mod network;
mod optim;
mod train;
mod weights;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint};
pub use descriptor::{
    Activation, ArchitectureDescriptor, ChannelLayer, Init, JoinedLayer, LayerShape, ParamGroup, ParamSpec,
    ParameterCounts, Pipe, Shape, ShapeReport,
};
pub use network::DropoutRates;
pub use optim::{rmsprop_update, RmsProp, RMSPROP_EPSILON};
pub use train::{initial_weights, train, train_reference_classifier, TrainConfig, TrainOutcome};
pub use weights::{ModelWeights, Tensor};

use crate::error::{Error, Result};
use crate::eval::Classifier;
use crate::rng::rng_from_seed;
use crate::signal::Epoch;
use network::{backward, cross_entropy, forward, zero_grads, Plan, Trace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardMode {
    /// Dropout off; the output depends only on weights and input.
    Inference,
    /// Dropout on, with masks drawn from `seed`.
    Training { seed: u64, dropout: DropoutRates },
}

/// A descriptor with matching weights.
#[derive(Debug, Clone)]
pub struct Model {
    descriptor: ArchitectureDescriptor,
    weights: ModelWeights,
    plan: Plan,
}

impl Model {
    pub fn new(descriptor: ArchitectureDescriptor, weights: ModelWeights) -> Result<Self> {
        let plan = Plan::new(&descriptor)?;
        weights.check(&descriptor)?;
        Ok(Self {
            descriptor,
            weights,
            plan,
        })
    }

    pub fn descriptor(&self) -> &ArchitectureDescriptor {
        &self.descriptor
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn into_weights(self) -> ModelWeights {
        self.weights
    }

    pub fn n_classes(&self) -> usize {
        self.plan.n_classes()
    }

    /// Class probabilities for one epoch.
    pub fn forward(&self, epoch: &Epoch, mode: ForwardMode) -> Result<Vec<f64>> {
        Ok(self.trace(epoch, mode)?.probs)
    }

    fn trace(&self, epoch: &Epoch, mode: ForwardMode) -> Result<Trace> {
        let inputs = self.plan.inputs(epoch)?;
        Ok(match mode {
            ForwardMode::Inference => forward(&self.plan, &self.weights, &inputs, None),
            ForwardMode::Training { seed, dropout } => {
                let mut rng = rng_from_seed(seed);
                forward(&self.plan, &self.weights, &inputs, Some((&mut rng, dropout)))
            }
        })
    }

    fn check_label(&self, epoch: &Epoch) -> Result<()> {
        if epoch.label() >= self.n_classes() {
            return Err(Error::invalid(format!(
                "label {} out of range for {} classes",
                epoch.label(),
                self.n_classes()
            )));
        }
        Ok(())
    }

    /// Cross-entropy of the epoch's own label.
    pub fn loss(&self, epoch: &Epoch, mode: ForwardMode) -> Result<f64> {
        self.check_label(epoch)?;
        Ok(cross_entropy(&self.trace(epoch, mode)?.logits, epoch.label()))
    }

    /// [`Model::loss`] and its gradient, laid out like the weights.
    pub fn loss_and_gradient(&self, epoch: &Epoch, mode: ForwardMode) -> Result<(f64, ModelWeights)> {
        self.check_label(epoch)?;
        let trace = self.trace(epoch, mode)?;
        let mut grads = zero_grads(&self.weights);
        let loss = backward(&self.plan, &self.weights, &trace, epoch.label(), &mut grads);
        let mut out = self.weights.clone();
        for (t, g) in out.tensors_mut().iter_mut().zip(grads) {
            t.data = g;
        }
        Ok((loss, out))
    }
}

impl Classifier for Model {
    fn predict(&self, epoch: &Epoch) -> Result<Vec<f64>> {
        self.forward(epoch, ForwardMode::Inference)
    }
}
