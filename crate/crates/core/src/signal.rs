//! Time-domain vibration windows to normalized magnitude spectra.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::rng::Rng as StreamRng;

/// Samples per analysis window.
pub const WINDOW_LEN: usize = 4096;
/// Retained (non-redundant) half of the window's spectrum.
pub const SPECTRUM_LEN: usize = WINDOW_LEN / 2;

/// In-place iterative radix-2 Cooley-Tukey DFT (unnormalized, e^{-i...}).
fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let step = -2.0 * PI / size as f64;
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, step * k as f64))
            .collect();
        for chunk in buf.chunks_exact_mut(size) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
            }
        }
        size *= 2;
    }
}

fn check_pow2(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "FFT length must be a power of two >= 2, got {n}"
        )));
    }
    Ok(())
}

pub fn fft_radix2(input: &[Complex64]) -> Result<Vec<Complex64>> {
    check_pow2(input.len())?;
    let mut buf = input.to_vec();
    fft_in_place(&mut buf);
    Ok(buf)
}

/// Inverse DFT via the conjugation identity `ifft(x) = conj(fft(conj(x))) / N`.
pub fn ifft_radix2(input: &[Complex64]) -> Result<Vec<Complex64>> {
    check_pow2(input.len())?;
    let n = input.len() as f64;
    let mut buf: Vec<Complex64> = input.iter().map(|c| c.conj()).collect();
    fft_in_place(&mut buf);
    Ok(buf.into_iter().map(|c| c.conj() / n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSignal {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl RawSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bad sample rate {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at index {i}"
            )));
        }
        if samples.len() < WINDOW_LEN {
            return Err(Error::InvalidInput(format!(
                "signal has {} samples, need at least {WINDOW_LEN}",
                samples.len()
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
}

/// `count` windows of [`WINDOW_LEN`] samples at independent uniform offsets;
/// windows may overlap.
pub fn window_signal(signal: &RawSignal, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = StreamRng::seed_from_u64(seed);
    window_signal_with(signal.samples(), count, &mut rng)
}

pub(crate) fn window_signal_with<R: Rng + ?Sized>(
    samples: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if samples.len() < WINDOW_LEN {
        return Err(Error::InvalidInput(format!(
            "signal has {} samples, need at least {WINDOW_LEN}",
            samples.len()
        )));
    }
    let max_offset = samples.len() - WINDOW_LEN;
    Ok((0..count)
        .map(|_| {
            let start = rng.random_range(0..=max_offset);
            samples[start..start + WINDOW_LEN].to_vec()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DomainLabel {
    Source,
    Target,
}

impl DomainLabel {
    pub fn as_u8(self) -> u8 {
        match self {
            DomainLabel::Source => 0,
            DomainLabel::Target => 1,
        }
    }
}

impl From<DomainLabel> for u8 {
    fn from(d: DomainLabel) -> u8 {
        d.as_u8()
    }
}

impl TryFrom<u8> for DomainLabel {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(DomainLabel::Source),
            1 => Ok(DomainLabel::Target),
            other => Err(format!("domain label must be 0 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Divide by the largest amplitude of the sample.
    #[default]
    Max,
    None,
}

/// One network input: 2048 non-negative spectrum amplitudes plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    amplitudes: Vec<f64>,
    class_label: usize,
    domain_label: DomainLabel,
}

impl SpectrumSample {
    pub fn new(
        amplitudes: Vec<f64>,
        class_label: usize,
        domain_label: DomainLabel,
    ) -> Result<Self> {
        if amplitudes.len() != SPECTRUM_LEN {
            return Err(shape_err("SpectrumSample", SPECTRUM_LEN, amplitudes.len()));
        }
        if amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidInput(
                "spectrum amplitudes must be finite and non-negative".into(),
            ));
        }
        if class_label == 0 {
            return Err(Error::InvalidInput("class labels start at 1".into()));
        }
        Ok(Self {
            amplitudes,
            class_label,
            domain_label,
        })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn class_label(&self) -> usize {
        self.class_label
    }

    pub fn domain_label(&self) -> DomainLabel {
        self.domain_label
    }

    pub fn with_domain(mut self, domain_label: DomainLabel) -> Self {
        self.domain_label = domain_label;
        self
    }
}

/// `|DFT(window)[k]| / N` for `k < N/2`.
pub fn spectrum_magnitudes(window: &[f64]) -> Result<Vec<f64>> {
    if window.len() != WINDOW_LEN {
        return Err(shape_err("spectrum window", WINDOW_LEN, window.len()));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "window contains non-finite samples".into(),
        ));
    }
    let mut buf: Vec<Complex64> = window.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf);
    let n = WINDOW_LEN as f64;
    Ok(buf[..SPECTRUM_LEN].iter().map(|c| c.norm() / n).collect())
}

pub fn normalize(amplitudes: &mut [f64], normalization: Normalization) {
    if normalization == Normalization::Max {
        let max = amplitudes.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            amplitudes.iter_mut().for_each(|a| *a /= max);
        }
    }
}

/// Max-normalized magnitude spectrum of a 4096-sample window.
pub fn make_spectrum(
    window: &[f64],
    class_label: usize,
    domain_label: DomainLabel,
) -> Result<SpectrumSample> {
    make_spectrum_with(window, class_label, domain_label, Normalization::Max)
}

pub fn make_spectrum_with(
    window: &[f64],
    class_label: usize,
    domain_label: DomainLabel,
    normalization: Normalization,
) -> Result<SpectrumSample> {
    let mut amps = spectrum_magnitudes(window)?;
    normalize(&mut amps, normalization);
    SpectrumSample::new(amps, class_label, domain_label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| {
                        let ang = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                        v * Complex64::from_polar(1.0, ang)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = vec![Complex64::new(0.0, 0.0); 8];
        x[0] = Complex64::new(1.0, 0.0);
        for c in fft_radix2(&x).unwrap() {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn single_tone_lines() {
        let x: Vec<Complex64> = (0..64)
            .map(|n| Complex64::new((2.0 * PI * 5.0 * n as f64 / 64.0).cos(), 0.0))
            .collect();
        let y = fft_radix2(&x).unwrap();
        for (k, c) in y.iter().enumerate() {
            let want = if k == 5 || k == 59 { 32.0 } else { 0.0 };
            assert!((c.norm() - want).abs() < 1e-9, "bin {k}: {}", c.norm());
        }
    }

    #[test]
    fn matches_direct_dft() {
        let mut rng = crate::rng::stream(11, "test");
        let x: Vec<Complex64> = (0..256)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let fast = fft_radix2(&x).unwrap();
        let slow = naive_dft(&x);
        let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() / scale < 1e-9);
        }
    }

    #[test]
    fn inverse_round_trip_4096() {
        let mut rng = crate::rng::stream(12, "test");
        let x: Vec<Complex64> = (0..4096)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let back = ifft_radix2(&fft_radix2(&x).unwrap()).unwrap();
        let norm: f64 = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let err: f64 = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err / norm < 1e-9);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(fft_radix2(&vec![Complex64::new(0.0, 0.0); 12]).is_err());
        assert!(fft_radix2(&[Complex64::new(1.0, 0.0)]).is_err());
        assert!(fft_radix2(&[]).is_err());
    }

    #[test]
    fn exact_length_signal_yields_whole_signal() {
        let samples: Vec<f64> = (0..WINDOW_LEN).map(|i| i as f64).collect();
        let sig = RawSignal::new(samples.clone(), 12_000.0).unwrap();
        for w in window_signal(&sig, 5, 3).unwrap() {
            assert_eq!(w, samples);
        }
    }

    #[test]
    fn windowing_is_seeded() {
        let samples: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let sig = RawSignal::new(samples, 12_000.0).unwrap();
        assert_eq!(
            window_signal(&sig, 20, 42).unwrap(),
            window_signal(&sig, 20, 42).unwrap()
        );
        assert_ne!(
            window_signal(&sig, 20, 42).unwrap(),
            window_signal(&sig, 20, 43).unwrap()
        );
    }

    #[test]
    fn short_signal_is_rejected() {
        assert!(RawSignal::new(vec![0.0; 4095], 12_000.0).is_err());
        assert!(window_signal_with(&[0.0; 100], 1, &mut crate::rng::stream(0, "x")).is_err());
    }

    #[test]
    fn zero_window_maps_to_zero_spectrum() {
        let s = make_spectrum(&vec![0.0; WINDOW_LEN], 1, DomainLabel::Source).unwrap();
        assert!(s.amplitudes().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn bin_aligned_tone_normalizes_to_one() {
        let w: Vec<f64> = (0..WINDOW_LEN)
            .map(|n| (2.0 * PI * 100.0 * n as f64 / WINDOW_LEN as f64).sin())
            .collect();
        let s = make_spectrum(&w, 3, DomainLabel::Target).unwrap();
        let a = s.amplitudes();
        assert!((a[100] - 1.0).abs() < 1e-12);
        for (k, &v) in a.iter().enumerate() {
            if k != 100 {
                assert!(v < 1e-9, "bin {k} = {v}");
            }
        }
        assert_eq!(s.class_label(), 3);
        assert_eq!(s.domain_label(), DomainLabel::Target);
    }

    #[test]
    fn magnitudes_match_direct_dft() {
        let mut rng = crate::rng::stream(5, "test");
        let w: Vec<f64> = (0..WINDOW_LEN)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let fast = spectrum_magnitudes(&w).unwrap();
        let cw: Vec<Complex64> = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        // Only a strided subset of bins: the direct sum is O(N) per bin.
        for k in (0..SPECTRUM_LEN).step_by(37) {
            let direct: Complex64 = cw
                .iter()
                .enumerate()
                .map(|(t, &v)| {
                    v * Complex64::from_polar(
                        1.0,
                        -2.0 * PI * ((k * t) % WINDOW_LEN) as f64 / WINDOW_LEN as f64,
                    )
                })
                .sum();
            let want = direct.norm() / WINDOW_LEN as f64;
            assert!((fast[k] - want).abs() <= 1e-9 * want.max(1e-3), "bin {k}");
        }
    }

    #[test]
    fn wrong_window_length_is_rejected() {
        assert!(make_spectrum(&[0.0; 100], 1, DomainLabel::Source).is_err());
    }

    #[test]
    fn domain_label_serde() {
        assert_eq!(serde_json::to_string(&DomainLabel::Target).unwrap(), "1");
        assert!(serde_json::from_str::<DomainLabel>("2").is_err());
    }
}
