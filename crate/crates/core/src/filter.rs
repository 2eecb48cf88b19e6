//! Butterworth low-pass filtering as cascaded second-order sections.
//!
//! Sections are designed by the bilinear transform with the cutoff
//! pre-warped, so the digital magnitude response is exactly `1/sqrt(2)`
//! (-3 dB) at the cutoff frequency.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Causal (forward-only) or zero-phase (forward-backward) application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterMode {
    #[default]
    Causal,
    /// Runs the cascade forward and then backward. The magnitude response is
    /// squared, so the cutoff sits at -6 dB.
    ZeroPhase,
}

/// Normalized biquad, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Transposed direct form II.
    fn run(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let out = b0 * input + s1;
            s1 = b1 * input - a1 * out + s2;
            s2 = b2 * input - a2 * out;
            *v = out;
        }
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let eval = |c: &[f64; 3]| {
            let re = c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
            let im = -c[1] * w.sin() - c[2] * (2.0 * w).sin();
            (re * re + im * im).sqrt()
        };
        eval(&self.b) / eval(&self.a)
    }
}

/// Second-order sections of an `order`-pole Butterworth low-pass.
///
/// Odd orders end with a first-order section stored as a biquad with zero
/// second-order coefficients.
pub fn butterworth_sections(
    order: usize,
    cutoff_hz: f64,
    sample_rate_hz: f64,
) -> Result<Vec<Biquad>> {
    if order == 0 {
        return Err(Error::invalid("filter order must be at least 1"));
    }
    let nyquist = sample_rate_hz / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    // Pre-warped analog cutoff, expressed in bilinear units.
    let k = (PI * cutoff_hz / sample_rate_hz).tan();
    let k2 = k * k;
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        // Analog prototype pole pair at angle theta from the negative real axis.
        let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
        let damping = 2.0 * theta.sin();
        let norm = 1.0 / (1.0 + damping * k + k2);
        let b0 = k2 * norm;
        sections.push(Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - damping * k + k2) * norm],
        });
    }
    if order % 2 == 1 {
        let norm = 1.0 / (1.0 + k);
        sections.push(Biquad {
            b: [k * norm, k * norm, 0.0],
            a: [1.0, (k - 1.0) * norm, 0.0],
        });
    }
    Ok(sections)
}

pub fn butterworth_lowpass(signal: &Signal, cutoff_hz: f64, order: usize) -> Result<Signal> {
    butterworth_lowpass_with(signal, cutoff_hz, order, FilterMode::Causal)
}

pub fn butterworth_lowpass_with(
    signal: &Signal,
    cutoff_hz: f64,
    order: usize,
    mode: FilterMode,
) -> Result<Signal> {
    let sections = butterworth_sections(order, cutoff_hz, signal.sample_rate_hz())?;
    let mut x = signal.samples().to_vec();
    for s in &sections {
        s.run(&mut x);
    }
    if mode == FilterMode::ZeroPhase {
        x.reverse();
        for s in &sections {
            s.run(&mut x);
        }
        x.reverse();
    }
    signal.with_samples(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate).sin())
            .collect()
    }

    /// Steady-state RMS ratio, skipping the first `skip` samples.
    fn gain(input: &[f64], output: &[f64], skip: usize) -> f64 {
        let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        rms(&output[skip..]) / rms(&input[skip..])
    }

    #[test]
    fn passband_sinusoid_is_unchanged() {
        let x = sine(1.0, 256.0, 256 * 20);
        let y = butterworth_lowpass(&Signal::new(x.clone(), 256.0).unwrap(), 13.0, 4).unwrap();
        let g = gain(&x, y.samples(), 256 * 4);
        assert!((g - 1.0).abs() < 0.02, "gain {g}");
    }

    #[test]
    fn cutoff_sinusoid_has_half_power() {
        let x = sine(13.0, 256.0, 256 * 20);
        let y = butterworth_lowpass(&Signal::new(x.clone(), 256.0).unwrap(), 13.0, 4).unwrap();
        let power = gain(&x, y.samples(), 256 * 4).powi(2);
        assert!((power - 0.5).abs() < 0.05, "power ratio {power}");
    }

    #[test]
    fn analytic_response_is_minus_three_db_at_cutoff() {
        for order in 1..=8 {
            let secs = butterworth_sections(order, 13.0, 256.0).unwrap();
            let mag: f64 = secs.iter().map(|s| s.magnitude(13.0, 256.0)).product();
            let db = 20.0 * mag.log10();
            assert!((db + 3.0103).abs() < 0.5, "order {order}: {db} dB");
            let dc: f64 = secs.iter().map(|s| s.magnitude(0.0, 256.0)).product();
            assert!((dc - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_signal_stays_zero() {
        let y = butterworth_lowpass(&Signal::zeros(100, 256.0).unwrap(), 13.0, 4).unwrap();
        assert!(y.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cutoff_must_be_below_nyquist() {
        let s = Signal::zeros(100, 32.0).unwrap();
        assert!(butterworth_lowpass(&s, 16.0, 4).is_err());
        assert!(butterworth_lowpass(&s, 20.0, 4).is_err());
        assert!(butterworth_lowpass(&s, 0.0, 4).is_err());
        assert!(butterworth_lowpass(&s, 13.0, 0).is_err());
    }

    #[test]
    fn filter_is_linear() {
        let x = sine(3.0, 256.0, 2000);
        let y: Vec<f64> = (0..2000).map(|i| ((i * 7919) % 113) as f64 - 56.0).collect();
        let (a, b) = (2.5, -0.75);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let f = |v: Vec<f64>| {
            butterworth_lowpass(&Signal::new(v, 256.0).unwrap(), 13.0, 4)
                .unwrap()
                .into_samples()
        };
        let (fx, fy, fm) = (f(x), f(y), f(mix));
        let scale = fm.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..fm.len() {
            assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn zero_phase_mode_has_no_lag() {
        // A slow sinusoid passes with negligible delay in zero-phase mode.
        let x = sine(0.5, 256.0, 256 * 10);
        let s = Signal::new(x.clone(), 256.0).unwrap();
        let y = butterworth_lowpass_with(&s, 13.0, 4, FilterMode::ZeroPhase).unwrap();
        let mid = &y.samples()[512..2048];
        let err = mid
            .iter()
            .zip(&x[512..2048])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "max deviation {err}");
    }
}
