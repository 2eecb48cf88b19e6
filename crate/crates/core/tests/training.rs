use std::f64::consts::PI;

use fts_core::eval::evaluate;
use fts_core::model::{initial_weights, train, train_reference_classifier, ArchitectureDescriptor, TrainConfig};
use fts_core::rng::rng_for;
use fts_core::synth::{generate_synthetic, SyntheticClassSpec};
use fts_core::{ChannelRole, Dataset, Epoch, Model, Signal};
use rand::Rng as _;

/// Two classes told apart by where the power sits: 2 Hz against 9 Hz.
fn band_power_toy(n: usize, seed: u64) -> Dataset {
    let mut rng = rng_for(seed, &[]);
    let epochs = (0..n)
        .map(|i| {
            let label = i % 2;
            let f = if label == 0 { 2.0 } else { 9.0 };
            let channels = (0..4)
                .map(|_| {
                    let phase = rng.random::<f64>() * 2.0 * PI;
                    let x = (0..960)
                        .map(|t| 30.0 * (2.0 * PI * f * t as f64 / 32.0 + phase).sin() + 10.0 * (rng.random::<f64>() - 0.5))
                        .collect();
                    Signal::new(x, 32.0).unwrap()
                })
                .collect();
            Epoch::new(channels, ChannelRole::STANDARD.to_vec(), label).unwrap()
        })
        .collect();
    let records = (0..n).map(|i| format!("r{}", i % 4)).collect();
    Dataset::new(epochs, records, vec!["low".into(), "high".into()]).unwrap()
}

#[test]
fn separable_toy_set_is_learned() {
    let data = band_power_toy(40, 1);
    let cfg = TrainConfig { steps: 500, batch_size: 4, seed: 5, ..TrainConfig::default() };
    let model = train_reference_classifier(&data, &cfg).unwrap();
    assert_eq!(model.n_classes(), 2);
    let ev = evaluate(&model, &data).unwrap();
    let accuracy = ev.confusion.rows().iter().enumerate().map(|(i, r)| r[i]).sum::<u64>() as f64 / data.len() as f64;
    assert!(accuracy >= 0.99, "train accuracy {accuracy}");
}

#[test]
fn stationary_six_class_set_generalizes() {
    let spec = SyntheticClassSpec::bundled("stationary6").unwrap();
    let train_set = generate_synthetic(&spec, 300, 1).unwrap().dataset;
    let held_out = generate_synthetic(&spec, 300, 2).unwrap().dataset;
    let cfg = TrainConfig { batch_size: 4, seed: 3, ..TrainConfig::default() };
    assert_eq!(cfg.steps, 2000);
    let model = train_reference_classifier(&train_set, &cfg).unwrap();
    let ev = evaluate(&model, &held_out).unwrap();
    assert!(ev.macro_f1 >= 0.8, "macro F1 {} recall {:?}", ev.macro_f1, ev.recall);
}

#[test]
fn zero_steps_return_the_initialization() {
    let data = band_power_toy(4, 2);
    let d = ArchitectureDescriptor::reference().with_n_classes(2);
    let cfg = TrainConfig { steps: 0, seed: 8, ..TrainConfig::default() };
    let out = train(&d, &data, &cfg).unwrap();
    assert!(out.losses.is_empty());
    assert_eq!(out.weights, initial_weights(&d, &cfg).unwrap());
    let one = train(&d, &data, &TrainConfig { steps: 1, ..cfg.clone() }).unwrap();
    assert_ne!(one.weights, out.weights);
    let model = Model::new(d, out.weights).unwrap();
    assert_eq!(model.n_classes(), 2);
}

#[test]
fn loss_falls_and_runs_repeat() {
    let data = band_power_toy(16, 3);
    let d = ArchitectureDescriptor::reference().with_n_classes(2);
    let cfg = TrainConfig { steps: 60, batch_size: 4, seed: 1, ..TrainConfig::default() };
    let a = train(&d, &data, &cfg).unwrap();
    let b = train(&d, &data, &cfg).unwrap();
    assert_eq!(a.losses, b.losses);
    assert_eq!(a.weights, b.weights);
    let head: f64 = a.losses[..10].iter().sum::<f64>() / 10.0;
    let tail: f64 = a.losses[50..].iter().sum::<f64>() / 10.0;
    assert!(tail < head, "{head} -> {tail}");
}
