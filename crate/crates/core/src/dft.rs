//! One-sided discrete Fourier transform of real signals.
//!
//! Normalization: the forward transform is un-normalized,
//! `X_k = sum_n x_n exp(-2 pi i k n / N)`, and the inverse carries the `1/N`.
//! Parseval then reads `sum_n x_n^2 = (1/N) sum_k |X_k|^2` over the full
//! two-sided spectrum, which [`Spectrum::energy`] evaluates from the
//! one-sided half.
//!
//! Only bins `0..=N/2` are stored. The negative-frequency half is implied by
//! Hermitian symmetry, and on reconstruction the DC bin (and the Nyquist bin
//! for even `N`) are forced real.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::Signal;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Number of one-sided bins for a real signal of length `n`.
pub fn one_sided_len(n: usize) -> usize {
    n / 2 + 1
}

/// One-sided complex spectrum of a real sequence.
pub fn rfft(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));
    buf.truncate(one_sided_len(n));
    buf
}

/// Real sequence of length `n` from its one-sided spectrum.
///
/// The imaginary parts of the DC bin and, for even `n`, the Nyquist bin are
/// ignored, so the result is exactly the real signal the bins describe.
pub fn irfft(bins: &[Complex64], n: usize) -> Vec<f64> {
    irfft_with_residue(bins, n).0
}

/// [`irfft`] that also returns the largest imaginary part of the complex
/// inverse before it is discarded. Hermitian completion makes it round-off.
pub fn irfft_with_residue(bins: &[Complex64], n: usize) -> (Vec<f64>, f64) {
    assert_eq!(bins.len(), one_sided_len(n), "one-sided length mismatch");
    let mut full = vec![Complex64::new(0.0, 0.0); n];
    full[0] = Complex64::new(bins[0].re, 0.0);
    for k in 1..bins.len() {
        if 2 * k == n {
            full[k] = Complex64::new(bins[k].re, 0.0);
        } else {
            full[k] = bins[k];
            full[n - k] = bins[k].conj();
        }
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(&mut full));
    let scale = 1.0 / n as f64;
    let residue = full.iter().fold(0.0f64, |m, c| m.max((c.im * scale).abs()));
    (full.into_iter().map(|c| c.re * scale).collect(), residue)
}

/// Amplitude/phase decomposition of a real signal, `s_k = a_k exp(i phi_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
    len: usize,
    sample_rate_hz: f64,
}

impl Spectrum {
    pub fn new(
        amplitudes: Vec<f64>,
        phases: Vec<f64>,
        len: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if len < 2 {
            return Err(Error::invalid(format!("spectrum length {len} < 2")));
        }
        let m = one_sided_len(len);
        if amplitudes.len() != m || phases.len() != m {
            return Err(Error::invalid(format!(
                "length {len} needs {m} bins, got {} amplitudes and {} phases",
                amplitudes.len(),
                phases.len()
            )));
        }
        if amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::invalid("amplitudes must be finite and non-negative"));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("phases must be finite"));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        let phases = phases.into_iter().map(wrap_phase).collect();
        Ok(Self {
            amplitudes,
            phases,
            len,
            sample_rate_hz,
        })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Sample count of the signal this spectrum describes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn has_nyquist_bin(&self) -> bool {
        self.len % 2 == 0
    }

    /// Frequency of bin `k` in Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz / self.len as f64
    }

    /// `(1/N) sum_k |X_k|^2` over the implied two-sided spectrum; equals the
    /// sum of squared samples.
    pub fn energy(&self) -> f64 {
        let n = self.len;
        let mut total = 0.0;
        for (k, a) in self.amplitudes.iter().enumerate() {
            let weight = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            total += weight * a * a;
        }
        total / n as f64
    }

    pub(crate) fn to_bins(&self) -> Vec<Complex64> {
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }
}

/// Maps any angle into `[-pi, pi)`.
pub fn wrap_phase(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

pub fn forward_dft(signal: &Signal) -> Spectrum {
    let bins = rfft(signal.samples());
    let amplitudes = bins.iter().map(|c| c.norm()).collect();
    let phases = bins.iter().map(|c| wrap_phase(c.arg())).collect();
    Spectrum {
        amplitudes,
        phases,
        len: signal.len(),
        sample_rate_hz: signal.sample_rate_hz(),
    }
}

pub fn inverse_dft(spectrum: &Spectrum) -> Result<Signal> {
    let samples = irfft(&spectrum.to_bins(), spectrum.len);
    Signal::new(samples, spectrum.sample_rate_hz)
}

/// One-sided periodogram `|X_k|^2`.
pub fn periodogram(samples: &[f64]) -> Vec<f64> {
    rfft(samples).iter().map(|c| c.norm_sqr()).collect()
}

/// One-sided amplitude spectrum `|X_k|`.
pub fn amplitude_spectrum(samples: &[f64]) -> Vec<f64> {
    rfft(samples).iter().map(|c| c.norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct O(N^2) summation, independent of the FFT path.
    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..one_sided_len(n))
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, &v)| {
                    let ang = -2.0 * PI * (k * j % n) as f64 / n as f64;
                    acc + Complex64::from_polar(v, ang)
                })
            })
            .collect()
    }

    fn lcg_signal(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn dc_only_signal() {
        let s = Signal::new(vec![5.0; 4], 4.0).unwrap();
        let spec = forward_dft(&s);
        assert_eq!(spec.amplitudes().len(), 3);
        assert!((spec.amplitudes()[0] - 20.0).abs() < 1e-12);
        assert!(spec.amplitudes()[1..].iter().all(|&a| a.abs() < 1e-12));
    }

    #[test]
    fn single_bin_cosine() {
        let n = 32;
        let k = 5;
        let x: Vec<f64> = (0..n)
            .map(|j| (2.0 * PI * (k * j) as f64 / n as f64).cos())
            .collect();
        let spec = forward_dft(&Signal::new(x, 32.0).unwrap());
        for (i, &a) in spec.amplitudes().iter().enumerate() {
            if i == k {
                assert!((a - n as f64 / 2.0).abs() < 1e-9);
                assert!(spec.phases()[i].abs() < 1e-9);
            } else {
                assert!(a < 1e-9, "bin {i} amplitude {a}");
            }
        }
    }

    #[test]
    fn matches_naive_dft_and_round_trips() {
        for (n, seed) in [(64, 1), (63, 2), (2, 3), (3, 4), (17, 5)] {
            let x = lcg_signal(n, seed);
            let fast = rfft(&x);
            let slow = naive_dft(&x);
            let scale = slow.iter().map(|c| c.norm()).fold(1.0, f64::max);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() <= 1e-10 * scale);
            }
            let sig = Signal::new(x.clone(), 1.0).unwrap();
            let back = inverse_dft(&forward_dft(&sig)).unwrap();
            let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in back.samples().iter().zip(&x) {
                assert!((a - b).abs() <= 1e-9 * max);
            }
        }
    }

    #[test]
    fn inverse_of_dc_and_zero_spectra() {
        let spec = Spectrum::new(vec![8.0, 0.0, 0.0], vec![0.0; 3], 4, 1.0).unwrap();
        let s = inverse_dft(&spec).unwrap();
        assert!(s.samples().iter().all(|&v| (v - 2.0).abs() < 1e-12));

        let spec = Spectrum::new(vec![0.0; 5], vec![1.0; 5], 9, 1.0).unwrap();
        let s = inverse_dft(&spec).unwrap();
        assert!(s.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inconsistent_spectrum_rejected() {
        assert!(Spectrum::new(vec![1.0; 3], vec![0.0; 4], 4, 1.0).is_err());
        assert!(Spectrum::new(vec![1.0; 4], vec![0.0; 4], 4, 1.0).is_err());
        assert!(Spectrum::new(vec![-1.0, 0.0, 0.0], vec![0.0; 3], 4, 1.0).is_err());
    }

    #[test]
    fn phases_lie_in_half_open_interval() {
        assert_eq!(wrap_phase(PI), -PI);
        assert_eq!(wrap_phase(-PI), -PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        let s = Signal::new(vec![-1.0, -1.0, -1.0], 1.0).unwrap();
        let spec = forward_dft(&s);
        assert!(spec.phases().iter().all(|&p| (-PI..PI).contains(&p)));
    }

    proptest! {
        #[test]
        fn parseval_holds(n in 2usize..1024, seed in any::<u64>()) {
            let x = lcg_signal(n, seed);
            let time: f64 = x.iter().map(|v| v * v).sum();
            let spec = forward_dft(&Signal::new(x, 1.0).unwrap());
            prop_assert!((spec.energy() - time).abs() <= 1e-9 * time.max(1e-300));
        }

        #[test]
        fn round_trip_is_identity(n in 2usize..1024, seed in any::<u64>()) {
            let x = lcg_signal(n, seed);
            let back = inverse_dft(&forward_dft(&Signal::new(x.clone(), 1.0).unwrap())).unwrap();
            let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in back.samples().iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-9 * max);
            }
        }
    }
}
