//! Class balancing by repetition, surrogate augmentation of the repeated
//! epochs, and record-level validation splits.
//!
//! Up-sampling adds `round(beta * (max_count - count_c))` random repetitions
//! of each class `c` (ties round to even), drawn uniformly with replacement
//! within the class, and shuffles the result. Augmentation then replaces each
//! channel of each repeated epoch by its surrogate with probability `alpha`.
//! Original epochs are never replaced.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for, stream};
use crate::signal::Epoch;
use crate::surrogate::{ft_surrogate, iaaft_surrogate, SurrogateConfig, SurrogateKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceConfig {
    pub beta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub surrogate_kind: SurrogateKind,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            alpha: 0.0,
            seed: 0,
            surrogate_kind: SurrogateKind::Ft,
        }
    }
}

impl BalanceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("alpha", self.alpha)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Repetitions per class: `round(beta * (max - count_c))`, ties to even.
pub fn repetition_counts(class_counts: &[usize], beta: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!("beta must lie in [0, 1], got {beta}")));
    }
    let max = class_counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::invalid("no class has any epochs"));
    }
    Ok(class_counts
        .iter()
        .map(|&c| (beta * (max - c) as f64).round_ties_even() as usize)
        .collect())
}

/// Up-sampled dataset with a flag per epoch marking added repetitions.
#[derive(Debug, Clone)]
pub struct Upsampled {
    pub dataset: Dataset,
    pub repeated: Vec<bool>,
}

pub fn upsample(dataset: &Dataset, config: &BalanceConfig) -> Result<Upsampled> {
    config.validate()?;
    let counts = dataset.class_counts();
    let reps = repetition_counts(&counts, config.beta)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes()];
    for (i, e) in dataset.epochs().iter().enumerate() {
        members[e.label()].push(i);
    }

    let mut rng = rng_for(config.seed, &[stream::UPSAMPLE]);
    let mut order: Vec<(usize, bool)> = (0..dataset.len()).map(|i| (i, false)).collect();
    for (class, &n) in reps.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let pool = &members[class];
        if pool.is_empty() {
            return Err(Error::invalid(format!(
                "class `{}` needs {n} repetitions but has no epochs",
                dataset.vocabulary()[class]
            )));
        }
        order.extend((0..n).map(|_| (pool[rng.random_range(0..pool.len())], true)));
    }
    order.shuffle(&mut rng);

    let indices: Vec<usize> = order.iter().map(|&(i, _)| i).collect();
    Ok(Upsampled {
        dataset: dataset.select(&indices),
        repeated: order.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Augmented dataset and how many channels were replaced.
#[derive(Debug, Clone)]
pub struct Augmented {
    pub dataset: Dataset,
    pub replaced_channels: usize,
    pub flagged_channels: usize,
}

fn surrogate_channel(epoch: &Epoch, channel: usize, kind: SurrogateKind, seed: u64) -> Result<Epoch> {
    let sig = epoch.channel(channel);
    let sur = match kind {
        SurrogateKind::Ft => ft_surrogate(sig, seed),
        SurrogateKind::Iaaft => iaaft_surrogate(sig, &SurrogateConfig::iaaft(seed))?.0,
    };
    let mut out = epoch.clone();
    out.replace_channel(channel, sur)?;
    Ok(out)
}

/// Replaces each channel of every flagged epoch by its surrogate with
/// probability `alpha`. Epoch `i` draws from a generator derived from
/// `(seed, i)`, so the result does not depend on scheduling.
pub fn augment(dataset: &Dataset, repeated: &[bool], config: &BalanceConfig) -> Result<Augmented> {
    config.validate()?;
    if repeated.len() != dataset.len() {
        return Err(Error::invalid(format!(
            "{} flags for {} epochs",
            repeated.len(),
            dataset.len()
        )));
    }
    let results: Vec<(Epoch, usize)> = dataset
        .epochs()
        .par_iter()
        .enumerate()
        .map(|(i, epoch)| {
            if !repeated[i] {
                return Ok((epoch.clone(), 0));
            }
            let mut rng = rng_for(config.seed, &[stream::AUGMENT, i as u64]);
            let mut out = epoch.clone();
            let mut replaced = 0;
            for c in 0..epoch.n_channels() {
                if rng.random::<f64>() < config.alpha {
                    let seed = derive_seed(config.seed, &[stream::AUGMENT, i as u64, c as u64]);
                    out = surrogate_channel(&out, c, config.surrogate_kind, seed)?;
                    replaced += 1;
                }
            }
            Ok((out, replaced))
        })
        .collect::<Result<_>>()?;

    let flagged_channels = repeated
        .iter()
        .zip(dataset.epochs())
        .filter(|(r, _)| **r)
        .map(|(_, e)| e.n_channels())
        .sum();
    let replaced_channels = results.iter().map(|(_, r)| r).sum();
    let epochs = results.into_iter().map(|(e, _)| e).collect();
    Ok(Augmented {
        dataset: Dataset::from_parts_trusted(
            epochs,
            dataset.record_ids().to_vec(),
            dataset.vocabulary().to_vec(),
        ),
        replaced_channels,
        flagged_channels,
    })
}

/// Up-sampling followed by augmentation.
pub fn balance(dataset: &Dataset, config: &BalanceConfig) -> Result<Augmented> {
    let up = upsample(dataset, config)?;
    augment(&up.dataset, &up.repeated, config)
}

/// Record-level holdout: for fold `fold`, the validation set holds the
/// `fold`-th record (in sorted order) of every group; training gets the rest.
pub fn record_holdout_split(
    dataset: &Dataset,
    fold: usize,
    n_folds: usize,
    groups: &BTreeMap<String, String>,
) -> Result<(Dataset, Dataset)> {
    if n_folds == 0 {
        return Err(Error::invalid("need at least one fold"));
    }
    if fold >= n_folds {
        return Err(Error::invalid(format!("fold {fold} out of range for {n_folds} folds")));
    }
    let mut by_group: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for rec in dataset.record_ids() {
        let group = groups
            .get(rec)
            .ok_or_else(|| Error::invalid(format!("record `{rec}` has no group")))?;
        by_group.entry(group).or_default().insert(rec);
    }
    let mut held_out: HashSet<&str> = HashSet::new();
    for (group, records) in &by_group {
        if records.len() < n_folds {
            return Err(Error::invalid(format!(
                "group `{group}` has {} records, fewer than {n_folds} folds",
                records.len()
            )));
        }
        held_out.insert(records.iter().nth(fold).expect("checked length"));
    }
    let (val, train): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| held_out.contains(dataset.record_ids()[i].as_str()));
    Ok((dataset.select(&train), dataset.select(&val)))
}

/// Every record in its own group.
pub fn singleton_groups(dataset: &Dataset) -> BTreeMap<String, String> {
    dataset
        .unique_records()
        .into_iter()
        .map(|r| (r.clone(), r))
        .collect()
}

/// All records in one group.
pub fn single_group(dataset: &Dataset) -> BTreeMap<String, String> {
    dataset
        .unique_records()
        .into_iter()
        .map(|r| (r, "all".to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dft::amplitude_spectrum;
    use crate::signal::{ChannelRole, Signal};

    fn toy(counts: &[usize], len: usize) -> Dataset {
        let mut epochs = Vec::new();
        let mut records = Vec::new();
        let mut k = 0usize;
        for (label, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                let x: Vec<f64> = (0..len).map(|i| ((k * 31 + i * 7) % 23) as f64 - 11.0).collect();
                let ch = Signal::new(x, 32.0).unwrap();
                epochs.push(Epoch::new(vec![ch.clone(), ch], vec![ChannelRole::Eeg1, ChannelRole::Eog], label).unwrap());
                records.push(format!("r{}", k % 4));
                k += 1;
            }
        }
        let vocab = (0..counts.len()).map(|c| format!("c{c}")).collect();
        Dataset::new(epochs, records, vocab).unwrap()
    }

    #[test]
    fn repetition_arithmetic() {
        assert_eq!(repetition_counts(&[100, 10, 50], 0.9).unwrap(), vec![0, 81, 45]);
        assert_eq!(repetition_counts(&[100, 10, 50], 0.0).unwrap(), vec![0, 0, 0]);
        assert_eq!(repetition_counts(&[7, 3], 1.0).unwrap(), vec![0, 4]);
        // 0.5 * 5 = 2.5 rounds to even.
        assert_eq!(repetition_counts(&[6, 1], 0.5).unwrap(), vec![0, 2]);
        assert!(repetition_counts(&[], 0.5).is_err());
        assert!(repetition_counts(&[0, 0], 0.5).is_err());
        assert!(repetition_counts(&[1, 0], 1.5).is_err());
    }

    #[test]
    fn upsample_counts() {
        let d = toy(&[100, 10], 4);
        let up = upsample(&d, &BalanceConfig { beta: 1.0, ..Default::default() }).unwrap();
        assert_eq!(up.dataset.class_counts(), vec![100, 100]);
        assert_eq!(up.repeated.iter().filter(|r| **r).count(), 90);

        let d = toy(&[100, 10, 50], 4);
        let up = upsample(&d, &BalanceConfig { beta: 0.9, ..Default::default() }).unwrap();
        assert_eq!(up.dataset.len(), 286);
        assert_eq!(up.dataset.class_counts(), vec![100, 91, 95]);
    }

    #[test]
    fn beta_zero_is_a_permutation() {
        let d = toy(&[5, 3, 2], 4);
        let up = upsample(&d, &BalanceConfig { beta: 0.0, seed: 3, ..Default::default() }).unwrap();
        assert!(up.repeated.iter().all(|r| !r));
        let key = |ds: &Dataset| {
            let mut v: Vec<Vec<u64>> = ds
                .epochs()
                .iter()
                .map(|e| e.channel(0).samples().iter().map(|x| x.to_bits()).collect())
                .collect();
            v.sort();
            v
        };
        assert_eq!(key(&up.dataset), key(&d));
        assert_ne!(up.dataset.labels(), d.labels());
    }

    #[test]
    fn empty_class_needing_repetitions_is_an_error() {
        let d = toy(&[5, 0], 4);
        assert!(upsample(&d, &BalanceConfig { beta: 0.5, ..Default::default() }).is_err());
    }

    #[test]
    fn alpha_zero_changes_nothing() {
        let d = toy(&[10, 2], 16);
        let up = upsample(&d, &BalanceConfig::default()).unwrap();
        let aug = augment(&up.dataset, &up.repeated, &BalanceConfig::default()).unwrap();
        assert_eq!(aug.dataset, up.dataset);
        assert_eq!(aug.replaced_channels, 0);
    }

    #[test]
    fn alpha_one_replaces_every_flagged_channel() {
        let d = toy(&[10, 2], 32);
        let cfg = BalanceConfig { alpha: 1.0, beta: 1.0, seed: 4, ..Default::default() };
        let up = upsample(&d, &cfg).unwrap();
        let aug = augment(&up.dataset, &up.repeated, &cfg).unwrap();
        assert_eq!(aug.replaced_channels, aug.flagged_channels);
        for (i, (a, b)) in aug.dataset.epochs().iter().zip(up.dataset.epochs()).enumerate() {
            assert_eq!(a.label(), b.label());
            for (x, y) in a.channels().iter().zip(b.channels()) {
                if up.repeated[i] {
                    assert_ne!(x.samples(), y.samples());
                    let (sx, sy) = (amplitude_spectrum(x.samples()), amplitude_spectrum(y.samples()));
                    let max = sy.iter().cloned().fold(0.0, f64::max);
                    assert!(sx.iter().zip(&sy).all(|(p, q)| (p - q).abs() <= 1e-9 * max));
                } else {
                    assert_eq!(x, y);
                }
            }
        }
    }

    #[test]
    fn holdout_split_partitions_records() {
        let d = toy(&[20, 20], 4);
        let groups: BTreeMap<String, String> = (0..4)
            .map(|r| (format!("r{r}"), format!("g{}", r % 2)))
            .collect();
        let mut seen = BTreeSet::new();
        for fold in 0..2 {
            let (train, val) = record_holdout_split(&d, fold, 2, &groups).unwrap();
            let vr: BTreeSet<_> = val.record_ids().iter().cloned().collect();
            let tr: BTreeSet<_> = train.record_ids().iter().cloned().collect();
            assert_eq!(vr.len(), 2);
            assert!(vr.is_disjoint(&tr));
            assert_eq!(train.len() + val.len(), d.len());
            seen.extend(vr);
        }
        assert_eq!(seen.len(), 4);
        assert!(record_holdout_split(&d, 2, 2, &groups).is_err());
        assert!(record_holdout_split(&d, 0, 3, &groups).is_err());
    }
}
