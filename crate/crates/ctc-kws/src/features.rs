//! PCM audio input and the log-magnitude spectrogram fed to the acoustic
//! model. Input is fixed at 8 kHz mono PCM16; there is no resampler.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Sample rate the acoustic model was designed for.
pub const MODEL_SAMPLE_RATE: u32 = 8000;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("not a WAV file: {0}")]
    NotAWav(String),
    #[error("unsupported WAV encoding: expected 16-bit integer PCM, got {0}")]
    UnsupportedEncoding(String),
    #[error("unsupported channel count {0}: expected mono")]
    UnsupportedChannels(u16),
    #[error("sample rate {got} Hz not supported: expected {MODEL_SAMPLE_RATE} Hz (resample the audio before scoring)")]
    WrongSampleRate { got: u32 },
    #[error("frame length {frame_samples} samples exceeds FFT size {fft_size}")]
    FrameLongerThanFft {
        frame_samples: usize,
        fft_size: usize,
    },
    #[error(
        "hop ({hop_ms} ms) must be positive and no longer than the frame ({frame_length_ms} ms)"
    )]
    BadHop { hop_ms: f64, frame_length_ms: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Mono PCM audio normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        AudioBuffer {
            samples,
            sample_rate,
        }
    }

    /// Converts raw PCM16 samples, scaling by 1/32768.
    pub fn from_pcm16(samples: &[i16], sample_rate: u32) -> Self {
        AudioBuffer {
            samples: samples.iter().map(|&s| f32::from(s) / 32768.0).collect(),
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowFunction {
    Hann,
    Rectangular,
}

impl WindowFunction {
    fn coefficients(self, len: usize) -> Vec<f32> {
        match self {
            // Periodic Hann: w[i] = 0.5 (1 - cos(2 pi i / N))
            WindowFunction::Hann => (0..len)
                .map(|i| {
                    let phase = 2.0 * std::f64::consts::PI * i as f64 / len as f64;
                    (0.5 * (1.0 - phase.cos())) as f32
                })
                .collect(),
            WindowFunction::Rectangular => vec![1.0; len],
        }
    }
}

/// Spectrogram parameters. The defaults (20 ms frames, 10 ms hop, 256-point
/// FFT, Hann window) are ordinary values for 8 kHz speech front ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub frame_length_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    pub window: WindowFunction,
    /// Magnitudes are clamped to this before the log.
    pub log_floor: f32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            frame_length_ms: 20.0,
            hop_ms: 10.0,
            fft_size: 256,
            window: WindowFunction::Hann,
            log_floor: 1e-7,
        }
    }
}

impl FeatureConfig {
    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        (self.frame_length_ms * f64::from(sample_rate) / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.hop_ms * f64::from(sample_rate) / 1000.0).round() as usize
    }

    /// One-sided bin count `fft_size / 2 + 1`.
    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    fn validate(&self, sample_rate: u32) -> Result<(), FeatureError> {
        let frame = self.frame_samples(sample_rate);
        if frame > self.fft_size {
            return Err(FeatureError::FrameLongerThanFft {
                frame_samples: frame,
                fft_size: self.fft_size,
            });
        }
        if self.hop_ms <= 0.0 || self.hop_ms > self.frame_length_ms {
            return Err(FeatureError::BadHop {
                hop_ms: self.hop_ms,
                frame_length_ms: self.frame_length_ms,
            });
        }
        Ok(())
    }
}

/// Log-magnitude spectrogram: `num_frames` rows of `num_bins` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<f32>,
    num_bins: usize,
    frame_hop: f64,
    frame_length: f64,
}

impl Spectrogram {
    pub fn from_flat(data: Vec<f32>, num_bins: usize, frame_hop: f64, frame_length: f64) -> Self {
        assert_eq!(data.len() % num_bins, 0);
        Spectrogram {
            data,
            num_bins,
            frame_hop,
            frame_length,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.num_bins
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    /// Seconds between successive frames.
    pub fn frame_hop(&self) -> f64 {
        self.frame_hop
    }

    /// Seconds of audio each frame covers.
    pub fn frame_length(&self) -> f64 {
        self.frame_length
    }

    pub fn row(&self, frame: usize) -> &[f32] {
        &self.data[frame * self.num_bins..(frame + 1) * self.num_bins]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.num_bins)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Reads a RIFF/WAVE file. Only mono 16-bit integer PCM at 8 kHz is
/// accepted; anything else is a distinct error rather than a silent
/// conversion.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, FeatureError> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(|e| match e {
        hound::Error::IoError(io) => FeatureError::Io(io),
        other => FeatureError::NotAWav(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(FeatureError::UnsupportedChannels(spec.channels));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(FeatureError::UnsupportedEncoding(format!(
            "{:?} at {} bits",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.sample_rate != MODEL_SAMPLE_RATE {
        return Err(FeatureError::WrongSampleRate {
            got: spec.sample_rate,
        });
    }
    let samples: Result<Vec<i16>, _> = reader.into_samples::<i16>().collect();
    let samples = samples.map_err(|e| FeatureError::NotAWav(e.to_string()))?;
    Ok(AudioBuffer::from_pcm16(&samples, spec.sample_rate))
}

/// Windows the signal into frames and emits one-sided log magnitudes.
///
/// No padding: `num_frames = floor((N - frame) / hop) + 1`, zero when the
/// signal is shorter than one frame.
pub fn compute_spectrogram(
    audio: &AudioBuffer,
    config: &FeatureConfig,
) -> Result<Spectrogram, FeatureError> {
    if audio.sample_rate() != MODEL_SAMPLE_RATE {
        return Err(FeatureError::WrongSampleRate {
            got: audio.sample_rate(),
        });
    }
    config.validate(audio.sample_rate())?;

    let kernel = FrameKernel::new(config, audio.sample_rate());
    let frame = kernel.frame_samples;
    let hop = kernel.hop_samples;
    let samples = audio.samples();

    let num_frames = if samples.len() < frame {
        0
    } else {
        (samples.len() - frame) / hop + 1
    };
    let mut data = Vec::with_capacity(num_frames * config.num_bins());
    for i in 0..num_frames {
        kernel.append_bins(&samples[i * hop..i * hop + frame], &mut data);
    }
    Ok(Spectrogram {
        data,
        num_bins: config.num_bins(),
        frame_hop: hop as f64 / f64::from(audio.sample_rate()),
        frame_length: frame as f64 / f64::from(audio.sample_rate()),
    })
}

/// Shared per-frame FFT kernel so batch and streaming paths are
/// bit-identical.
struct FrameKernel {
    frame_samples: usize,
    hop_samples: usize,
    fft_size: usize,
    num_bins: usize,
    log_floor: f32,
    window: Vec<f32>,
    fft: Arc<dyn Fft<f32>>,
}

impl FrameKernel {
    fn new(config: &FeatureConfig, sample_rate: u32) -> Self {
        let frame_samples = config.frame_samples(sample_rate);
        FrameKernel {
            frame_samples,
            hop_samples: config.hop_samples(sample_rate),
            fft_size: config.fft_size,
            num_bins: config.num_bins(),
            log_floor: config.log_floor,
            window: config.window.coefficients(frame_samples),
            fft: FftPlanner::new().plan_fft_forward(config.fft_size),
        }
    }

    fn append_bins(&self, frame: &[f32], out: &mut Vec<f32>) {
        debug_assert_eq!(frame.len(), self.frame_samples);
        let mut buf = vec![Complex::new(0.0f32, 0.0f32); self.fft_size];
        for (i, (&s, &w)) in frame.iter().zip(&self.window).enumerate() {
            buf[i].re = s * w;
        }
        self.fft.process(&mut buf);
        out.extend(
            buf[..self.num_bins]
                .iter()
                .map(|c| c.norm().max(self.log_floor).ln()),
        );
    }
}

/// Incremental framer for live audio: push samples in arbitrary chunks and
/// collect spectrogram frames as they complete. Produces the same frames as
/// [`compute_spectrogram`] over the concatenated input.
pub struct SpectrogramStreamer {
    kernel: FrameKernel,
    buffer: Vec<f32>,
}

impl SpectrogramStreamer {
    pub fn new(config: &FeatureConfig, sample_rate: u32) -> Result<Self, FeatureError> {
        if sample_rate != MODEL_SAMPLE_RATE {
            return Err(FeatureError::WrongSampleRate { got: sample_rate });
        }
        config.validate(sample_rate)?;
        Ok(SpectrogramStreamer {
            kernel: FrameKernel::new(config, sample_rate),
            buffer: Vec::new(),
        })
    }

    pub fn num_bins(&self) -> usize {
        self.kernel.num_bins
    }

    /// Seconds between successive output frames.
    pub fn frame_hop(&self) -> f64 {
        self.kernel.hop_samples as f64 / f64::from(MODEL_SAMPLE_RATE)
    }

    /// Consumes samples and returns the frames completed by them, flattened
    /// row-major.
    pub fn push(&mut self, samples: &[f32]) -> Vec<f32> {
        self.buffer.extend_from_slice(samples);
        let mut out = Vec::new();
        let mut consumed = 0;
        while self.buffer.len() - consumed >= self.kernel.frame_samples {
            self.kernel.append_bins(
                &self.buffer[consumed..consumed + self.kernel.frame_samples],
                &mut out,
            );
            consumed += self.kernel.hop_samples;
        }
        self.buffer.drain(..consumed);
        out
    }
}
