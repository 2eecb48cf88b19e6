use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::descriptor::ArchitectureDescriptor;
use super::network::{backward, forward, zero_grads, DropoutRates, Plan};
use super::optim::RmsProp;
use super::weights::ModelWeights;
use super::Model;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub dropout_conv: f64,
    pub dropout_dense: f64,
    pub dropout_after_conv2d: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0016,
            rms_decay: 0.9,
            momentum: 0.0,
            batch_size: 128,
            steps: 2000,
            dropout_conv: 0.33,
            dropout_dense: 0.015,
            dropout_after_conv2d: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !unit(self.rms_decay) || !unit(self.momentum) {
            return Err(Error::invalid("decay and momentum must lie in [0, 1)"));
        }
        if !unit(self.dropout_conv) || !unit(self.dropout_dense) {
            return Err(Error::invalid("dropout rates must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }

    pub fn dropout(&self) -> DropoutRates {
        DropoutRates {
            conv: self.dropout_conv,
            dense: self.dropout_dense,
            after_conv2d: self.dropout_after_conv2d,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: ModelWeights,
    /// Mean cross-entropy of each step's mini-batch.
    pub losses: Vec<f64>,
}

/// Examples per gradient chunk. Chunk sums are reduced in order, so the
/// result does not depend on the thread count.
const CHUNK: usize = 4;

/// Mean loss and mean gradient over `batch`.
pub(crate) fn batch_gradient(
    plan: &Plan,
    weights: &ModelWeights,
    data: &Dataset,
    batch: &[usize],
    dropout: Option<(u64, DropoutRates)>,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let parts = batch
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut grads = zero_grads(weights);
            let mut loss = 0.0;
            for (j, &idx) in chunk.iter().enumerate() {
                let epoch = data.epoch(idx);
                let inputs = plan.inputs(epoch)?;
                let trace = match dropout {
                    Some((seed, rates)) => {
                        let mut rng = rng_for(seed, &[(ci * CHUNK + j) as u64]);
                        forward(plan, weights, &inputs, Some((&mut rng, rates)))
                    }
                    None => forward(plan, weights, &inputs, None),
                };
                loss += backward(plan, weights, &trace, epoch.label(), &mut grads);
            }
            Ok((loss, grads))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().unwrap_or_else(|| (0.0, zero_grads(weights)));
    for (l, g) in iter {
        loss += l;
        for (a, b) in grads.iter_mut().zip(g) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
    let inv = 1.0 / batch.len().max(1) as f64;
    grads.iter_mut().flatten().for_each(|v| *v *= inv);
    Ok((loss * inv, grads))
}

/// Draws mini-batches by walking seeded permutations of the dataset.
struct BatchSampler {
    n: usize,
    seed: u64,
    pass: u64,
    order: Vec<usize>,
    pos: usize,
}

impl BatchSampler {
    fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            pass: 0,
            order: Vec::new(),
            pos: 0,
        }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.pos == self.order.len() {
                self.order = (0..self.n).collect();
                self.order.shuffle(&mut rng_for(self.seed, &[self.pass]));
                self.pass += 1;
                self.pos = 0;
            }
            batch.push(self.order[self.pos]);
            self.pos += 1;
        }
        batch
    }
}

/// The weights [`train`] starts from for `cfg.seed`.
pub fn initial_weights(descriptor: &ArchitectureDescriptor, cfg: &TrainConfig) -> Result<ModelWeights> {
    ModelWeights::glorot(descriptor, derive_seed(cfg.seed, &[stream::INIT]))
}

/// Trains `descriptor` from a Glorot initialization with RMSProp on
/// cross-entropy. Zero steps return the initialization.
pub fn train(descriptor: &ArchitectureDescriptor, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let plan = Plan::new(descriptor)?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if data.n_classes() != plan.n_classes() {
        return Err(Error::shape(
            "output",
            format!("model has {} classes, data has {}", plan.n_classes(), data.n_classes()),
        ));
    }
    plan.inputs(data.epoch(0))?;

    let mut weights = initial_weights(descriptor, cfg)?;
    let mut opt = RmsProp::new(&weights, cfg.learning_rate, cfg.rms_decay, cfg.momentum);
    let mut sampler = BatchSampler::new(data.len(), derive_seed(cfg.seed, &[stream::TRAIN]));
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch = sampler.next_batch(cfg.batch_size);
        let drop_seed = derive_seed(cfg.seed, &[stream::TRAIN, step as u64]);
        let (loss, grads) = batch_gradient(&plan, &weights, data, &batch, Some((drop_seed, cfg.dropout())))?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                step,
                detail: format!("mini-batch loss is {loss}"),
            });
        }
        opt.step(&mut weights, &grads, step)?;
        losses.push(loss);
    }
    Ok(TrainOutcome { weights, losses })
}

/// Trains the width-reduced reference network, with its output layer sized
/// to the dataset's vocabulary.
pub fn train_reference_classifier(data: &Dataset, cfg: &TrainConfig) -> Result<Model> {
    let descriptor = ArchitectureDescriptor::reference().with_n_classes(data.n_classes());
    let outcome = train(&descriptor, data, cfg)?;
    Model::new(descriptor, outcome.weights)
}
