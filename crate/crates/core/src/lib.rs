//! Fourier-transform surrogates for labeled multichannel signal epochs.
//!
//! The crate covers four connected tasks:
//!
//! - generating surrogate signals that keep a signal's Fourier amplitude
//!   spectrum while randomizing its phases ([`surrogate`]), including the
//!   iterative amplitude-adjusted variant and partial (windowed) surrogates;
//! - balancing an imbalanced dataset by repetition and replacing channels of
//!   the repeated epochs with surrogates ([`balance`]);
//! - a two-stage convolutional classifier described declaratively, with shape
//!   inference, parameter counting, inference and RMSProp training ([`model`]);
//! - evaluation with confusion matrices, conditional (surrogate) confusion,
//!   the augmentation sweep ([`eval`]) and surrogate saliency maps
//!   ([`saliency`]).
//!
//! [`synth`] generates labeled synthetic data so every stage can be run
//! without clinical recordings, and [`io`] holds the on-disk formats.

pub mod balance;
pub mod dataset;
pub mod dft;
pub mod error;
pub mod eval;
pub mod filter;
pub mod io;
pub mod model;
pub mod report;
pub mod resample;
pub mod rng;
pub mod saliency;
pub mod signal;
pub mod surrogate;
pub mod synth;

pub use balance::{augment, record_holdout_split, repetition_counts, upsample, BalanceConfig};
pub use dataset::{Dataset, SLEEP_STAGES};
pub use dft::{forward_dft, inverse_dft, Spectrum};
pub use error::{Error, Result};
pub use eval::{
    alpha_sweep, conditional_confusion, evaluate, Classifier, ConfusionMatrix, Evaluation,
    SweepConfig, SweepRow,
};
pub use filter::{butterworth_lowpass, FilterMode};
pub use model::{ArchitectureDescriptor, Model, ModelWeights, TrainConfig};
pub use resample::resample;
pub use saliency::{surrogate_saliency, zero_out_saliency, SaliencyMap, SaliencySpec};
pub use signal::{ChannelRole, Epoch, Signal};
pub use surrogate::{
    epoch_surrogate, ft_surrogate, iaaft_surrogate, partial_ft_surrogate, IaaftReport,
    PartialSurrogateSpec, SurrogateConfig, SurrogateKind,
};
pub use synth::{generate_synthetic, SyntheticClassSpec, SyntheticDataset};
