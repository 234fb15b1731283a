//! Waveform I/O, STFT analysis/synthesis, and synthetic mixing.
//!
//! Analysis uses a periodic Hann window of length 510 with hop 127 (75%
//! overlap rounds to a non-integral hop at this window size, so 127 is used
//! and synthesis renormalizes), centered frames with reflection padding and a
//! one-sided 256-bin transform. Synthesis is weighted overlap-add with the
//! same window and per-sample window-energy normalization, which makes
//! reconstruction exact independent of a strict overlap-add identity.

use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{DepseError, Result};
use crate::field::Field;

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(DepseError::NonFinite {
                context: "waveform samples",
                step: None,
            });
        }
        Ok(Waveform {
            samples,
            sample_rate: SAMPLE_RATE,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftParams {
    pub window_len: usize,
    pub hop: usize,
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams {
            window_len: 510,
            hop: 127,
        }
    }
}

impl StftParams {
    pub fn bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 4 || !self.window_len.is_multiple_of(2) {
            return Err(DepseError::InvalidParameter(format!(
                "window length must be even and >= 4, got {}",
                self.window_len
            )));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(DepseError::InvalidParameter(format!(
                "hop must be in 1..=window, got {}",
                self.hop
            )));
        }
        Ok(())
    }
}

/// Analysis output: bins plus the configuration needed to invert it.
#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    pub bins: Field,
    pub params: StftParams,
}

fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / n as f64).cos()))
        .collect()
}

/// Reflection padding without repeating the edge sample.
fn reflect_pad(x: &[f64], left: usize, right: usize) -> Vec<f64> {
    assert!(left < x.len() && right < x.len(), "padding exceeds signal");
    let mut out = Vec::with_capacity(x.len() + left + right);
    for k in 0..left {
        out.push(x[left - k]);
    }
    out.extend_from_slice(x);
    for k in 0..right {
        out.push(x[x.len() - 2 - k]);
    }
    out
}

pub fn stft(w: &Waveform, params: &StftParams) -> Result<ComplexSpectrogram> {
    params.validate()?;
    let win = params.window_len;
    let hop = params.hop;
    if w.len() < win {
        return Err(DepseError::InvalidParameter(format!(
            "signal of {} samples is shorter than one window ({win})",
            w.len()
        )));
    }
    let pad = win / 2;
    let n_frames = 1 + (w.len() + 2 * pad - win).div_ceil(hop);
    let needed = (n_frames - 1) * hop + win;
    let right = needed - w.len() - pad;
    let padded = reflect_pad(&w.samples, pad, right);

    let window = periodic_hann(win);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(win);
    let bins = params.bins();
    let mut out = Field::zeros((bins, n_frames));
    let mut buf = vec![Complex64::default(); win];
    for m in 0..n_frames {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(padded[m * hop + j] * window[j], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..bins {
            out[(k, m)] = buf[k];
        }
    }
    Ok(ComplexSpectrogram {
        bins: out,
        params: *params,
    })
}

pub fn istft(spec: &ComplexSpectrogram, length: usize) -> Result<Waveform> {
    spec.params.validate()?;
    let win = spec.params.window_len;
    let hop = spec.params.hop;
    let bins = spec.params.bins();
    if spec.bins.nrows() != bins {
        return Err(DepseError::ShapeMismatch {
            expected: (bins, spec.bins.ncols()),
            got: spec.bins.dim(),
        });
    }
    let n_frames = spec.bins.ncols();
    let window = periodic_hann(win);
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(win);

    let total = (n_frames - 1) * hop + win;
    let mut acc = vec![0.0; total];
    let mut wsum = vec![0.0; total];
    let mut buf = vec![Complex64::default(); win];
    for m in 0..n_frames {
        // rebuild the full spectrum from the one-sided bins
        for (k, b) in buf.iter_mut().enumerate() {
            *b = if k < bins {
                spec.bins[(k, m)]
            } else {
                spec.bins[(win - k, m)].conj()
            };
        }
        ifft.process(&mut buf);
        for j in 0..win {
            let sample = buf[j].re / win as f64;
            acc[m * hop + j] += sample * window[j];
            wsum[m * hop + j] += window[j] * window[j];
        }
    }
    for (a, &w) in acc.iter_mut().zip(wsum.iter()) {
        if w > 1e-12 {
            *a /= w;
        }
    }
    let pad = win / 2;
    let mut samples = vec![0.0; length];
    for (i, s) in samples.iter_mut().enumerate() {
        if pad + i < acc.len() {
            *s = acc[pad + i];
        }
    }
    Waveform::new(samples)
}

/// Amplitude compression `z -> |z|^beta e^{i arg z}`, applied before
/// enhancement when configured; [`decompress`] inverts it.
pub fn compress(spec: &Field, beta: f64) -> Field {
    spec.mapv(|z| {
        let m = z.norm();
        if m == 0.0 {
            z
        } else {
            z * m.powf(beta - 1.0)
        }
    })
}

pub fn decompress(spec: &Field, beta: f64) -> Field {
    compress(spec, 1.0 / beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

pub fn read_wav<P: AsRef<Path>>(path: P) -> Result<Waveform> {
    let reader = hound::WavReader::open(path).map_err(|e| DepseError::WavFormat(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(DepseError::Multichannel(spec.channels));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(DepseError::WrongSampleRate {
            expected: SAMPLE_RATE,
            got: spec.sample_rate,
        });
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| DepseError::WavFormat(e.to_string()))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| DepseError::WavFormat(e.to_string()))?,
        (fmt, bits) => {
            return Err(DepseError::WavFormat(format!(
                "unsupported sample format {fmt:?}/{bits} bits"
            )))
        }
    };
    Waveform::new(samples)
}

pub fn write_wav<P: AsRef<Path>>(path: P, w: &Waveform, encoding: WavEncoding) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer =
        hound::WavWriter::create(path, spec).map_err(|e| DepseError::WavFormat(e.to_string()))?;
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in &w.samples {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer
                    .write_sample(v)
                    .map_err(|e| DepseError::WavFormat(e.to_string()))?;
            }
        }
        WavEncoding::Float32 => {
            for &s in &w.samples {
                writer
                    .write_sample(s as f32)
                    .map_err(|e| DepseError::WavFormat(e.to_string()))?;
            }
        }
    }
    writer
        .finalize()
        .map_err(|e| DepseError::WavFormat(e.to_string()))?;
    Ok(())
}

/// Scale `n` so the signal-to-noise ratio of `s + alpha n` is `snr_db`;
/// returns the mixture and the scaled noise. The noise is cropped or looped
/// to the signal length first.
pub fn mix_at_snr(s: &Waveform, n: &Waveform, snr_db: f64) -> Result<(Waveform, Waveform)> {
    if !snr_db.is_finite() {
        return Err(DepseError::InvalidParameter(format!(
            "snr must be finite, got {snr_db}"
        )));
    }
    if s.is_empty() || n.is_empty() {
        return Err(DepseError::SilentSignal);
    }
    let mut noise = Vec::with_capacity(s.len());
    while noise.len() < s.len() {
        let take = (s.len() - noise.len()).min(n.len());
        noise.extend_from_slice(&n.samples[..take]);
    }
    let es = s.energy();
    let en: f64 = noise.iter().map(|x| x * x).sum();
    if es <= 0.0 || en <= 0.0 {
        return Err(DepseError::SilentSignal);
    }
    let alpha = (es / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = noise.iter().map(|x| alpha * x).collect();
    let mix: Vec<f64> = s
        .samples
        .iter()
        .zip(scaled.iter())
        .map(|(a, b)| a + b)
        .collect();
    Ok((Waveform::new(mix)?, Waveform::new(scaled)?))
}
