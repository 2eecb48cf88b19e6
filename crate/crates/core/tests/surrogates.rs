use std::f64::consts::PI;

use fts_core::rng::rng_for;
use fts_core::surrogate::Splice;
use fts_core::{
    epoch_surrogate, ft_surrogate, iaaft_surrogate, partial_ft_surrogate, ChannelRole, Epoch,
    PartialSurrogateSpec, Signal, SurrogateConfig,
};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

/// Direct O(n^2) one-sided periodogram.
fn naive_periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n / 2 + 1)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let w = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += v * w.cos();
                im += v * w.sin();
            }
            re * re + im * im
        })
        .collect()
}

fn ar2(n: usize, seed: u64) -> Vec<f64> {
    // Poles at radius 0.95, angle 2 pi * 0.1.
    let (a1, a2) = (2.0 * 0.95 * (0.2 * PI).cos(), -0.95 * 0.95);
    let mut rng = rng_for(seed, &[1]);
    let mut x = vec![0.0; n + 200];
    for t in 2..x.len() {
        let e: f64 = StandardNormal.sample(&mut rng);
        x[t] = a1 * x[t - 1] + a2 * x[t - 2] + e;
    }
    x.split_off(200)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn ar2_ft_surrogate_keeps_periodogram_and_loses_waveform() {
    let x = ar2(960, 3);
    let sig = Signal::new(x.clone(), 32.0).unwrap();
    let p0 = naive_periodogram(&x);
    let scale = p0.iter().cloned().fold(0.0, f64::max);

    let mut rs = Vec::new();
    for seed in 0..200 {
        let s = ft_surrogate(&sig, seed);
        let p1 = naive_periodogram(s.samples());
        for (a, b) in p0.iter().zip(&p1) {
            assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
        }
        rs.push(correlation(&x, s.samples()));
    }
    // Against a phase-randomized copy the correlation is a zero-mean draw.
    let mean = rs.iter().sum::<f64>() / rs.len() as f64;
    let sd = (rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rs.len() - 1) as f64).sqrt();
    assert!(mean.abs() < 4.0 * sd / (rs.len() as f64).sqrt(), "mean {mean}, sd {sd}");
    assert!(sd < 0.2, "sd {sd}");
    assert!(rs.iter().all(|r| r.abs() < 0.6));
}

#[test]
fn ar2_iaaft_reaches_small_discrepancy() {
    let x = ar2(960, 5);
    let sig = Signal::new(x.clone(), 32.0).unwrap();
    let (s, report) = iaaft_surrogate(&sig, &SurrogateConfig::iaaft(9)).unwrap();
    assert!(report.discrepancy < 5e-2, "{report:?}");

    // Recompute the discrepancy from the naive periodogram.
    let a0: Vec<f64> = naive_periodogram(&x).iter().map(|p| p.sqrt()).collect();
    let a1: Vec<f64> = naive_periodogram(s.samples()).iter().map(|p| p.sqrt()).collect();
    let num: f64 = a0.iter().zip(&a1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = a0.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!((num / den - report.discrepancy).abs() < 1e-9, "{} vs {}", num / den, report.discrepancy);

    let mut sorted_in = x;
    let mut sorted_out = s.into_samples();
    sorted_in.sort_by(f64::total_cmp);
    sorted_out.sort_by(f64::total_cmp);
    assert_eq!(sorted_in, sorted_out);
}

fn dominant_hz(x: &[f64], rate: f64) -> f64 {
    let p = naive_periodogram(x);
    let k = (1..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    k as f64 * rate / x.len() as f64
}

#[test]
fn alpha_section_keeps_alpha_peak() {
    let rate = 64.0;
    let mut rng = rng_for(11, &[]);
    let x: Vec<f64> = (0..(30.0 * rate) as usize)
        .map(|i| {
            let t = i as f64 / rate;
            let e: f64 = StandardNormal.sample(&mut rng);
            40.0 * (2.0 * PI * 10.0 * t + 0.3 * (0.7 * t).sin()).sin() + 10.0 * e
        })
        .collect();
    let sig = Signal::new(x.clone(), rate).unwrap();
    let spec = PartialSurrogateSpec::new(12.0, 4.0);
    let out = partial_ft_surrogate(&sig, &spec, 4).unwrap();
    let splice = Splice::from_spec(&spec, rate, x.len()).unwrap();
    let section = &out.samples()[splice.region_start()..splice.region_end()];
    let mut remainder = x[..splice.region_start()].to_vec();
    remainder.extend_from_slice(&x[splice.region_end()..]);

    let f_section = dominant_hz(section, rate);
    let f_rest = dominant_hz(&remainder, rate);
    let bin = rate / section.len() as f64;
    assert!((f_section - f_rest).abs() <= bin, "{f_section} vs {f_rest}");
    assert!((f_rest - 10.0).abs() < 0.1);
    assert_ne!(section, &x[splice.region_start()..splice.region_end()]);
}

#[test]
fn epoch_surrogate_preserves_each_channel_periodogram() {
    let channels: Vec<Signal> = (0..4).map(|c| Signal::new(ar2(320, 20 + c), 32.0).unwrap()).collect();
    let epoch = Epoch::new(channels, ChannelRole::STANDARD.to_vec(), 2).unwrap();
    let out = epoch_surrogate(&epoch, &SurrogateConfig::ft(1), 1).unwrap();
    assert_eq!(out.label(), 2);
    for (a, b) in epoch.channels().iter().zip(out.channels()) {
        let (pa, pb) = (naive_periodogram(a.samples()), naive_periodogram(b.samples()));
        let scale = pa.iter().cloned().fold(0.0, f64::max);
        assert!(pa.iter().zip(&pb).all(|(x, y)| (x - y).abs() <= 1e-9 * scale));
        assert_ne!(a.samples(), b.samples());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ft_surrogate_keeps_mean_and_is_deterministic(
        x in prop::collection::vec(-1e3f64..1e3, 2..300),
        seed in any::<u64>(),
    ) {
        let sig = Signal::new(x.clone(), 32.0).unwrap();
        let a = ft_surrogate(&sig, seed);
        let b = ft_surrogate(&sig, seed);
        prop_assert_eq!(a.samples(), b.samples());
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!((a.mean() - sig.mean()).abs() <= 1e-9 * scale);
    }

    #[test]
    fn iaaft_is_deterministic(x in prop::collection::vec(-1e3f64..1e3, 2..200), seed in any::<u64>()) {
        let sig = Signal::new(x, 32.0).unwrap();
        let cfg = SurrogateConfig::iaaft(seed);
        let (a, ra) = iaaft_surrogate(&sig, &cfg).unwrap();
        let (b, rb) = iaaft_surrogate(&sig, &cfg).unwrap();
        prop_assert_eq!(a.samples(), b.samples());
        prop_assert_eq!(ra, rb);
    }
}
