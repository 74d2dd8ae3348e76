//! On-line detection over a posterior stream: every `hop_ms` the detector
//! scores the last `window_ms` of posteriors for the keyword and/or speech
//! activity and emits threshold-crossing events.
//!
//! Event decisions depend only on the frames consumed so far, never on how
//! the stream was chunked, so any split of the same stream produces an
//! identical event list.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::alphabet::Alphabet;
use crate::label::{expand_label, Keyword, LabelError};
use crate::posterior::PosteriorMatrix;
use crate::scoring::{keyword_forward_log, speech_log_prob, Rows, ScoringError};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("frame duration must be positive, got {0}")]
    NonPositiveFrameDuration(f64),
    #[error("window of {window_ms} ms rounds to zero frames at {frame_ms} ms per frame")]
    WindowTooShort { window_ms: f64, frame_ms: f64 },
    #[error("window ({window_ms} ms) must be at least the hop ({hop_ms} ms), both positive")]
    BadWindowHop { window_ms: f64, hop_ms: f64 },
    #[error("no task enabled: configure a keyword, a VAD threshold, or both")]
    NoTaskEnabled,
    #[error("keyword task requested but no keyword configured")]
    NoKeyword,
    #[error("pushed {got} values, not a whole number of width-{width} rows")]
    RowWidthMismatch { got: usize, width: usize },
    #[error("utterance has no frames")]
    EmptyUtterance,
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// What to detect and when to fire. At least one of the keyword and VAD
/// tasks must be enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub keyword: Option<Keyword>,
    /// Natural-log score at or above which a keyword event fires.
    pub kws_log_threshold: f64,
    /// Linear speech probability for the VAD latch; `None` disables VAD.
    pub vad_speech_threshold: Option<f64>,
    /// Quiet period after a keyword event during which repeats from
    /// overlapping windows are suppressed.
    pub refractory_ms: f64,
}

impl DetectorConfig {
    pub fn keyword_task(keyword: Keyword, kws_log_threshold: f64) -> Self {
        DetectorConfig {
            keyword: Some(keyword),
            kws_log_threshold,
            ..DetectorConfig::base()
        }
    }

    pub fn vad_task(speech_threshold: f64) -> Self {
        DetectorConfig {
            vad_speech_threshold: Some(speech_threshold),
            ..DetectorConfig::base()
        }
    }

    fn base() -> Self {
        DetectorConfig {
            window_ms: 800.0,
            hop_ms: 100.0,
            keyword: None,
            kws_log_threshold: 0.0,
            vad_speech_threshold: None,
            refractory_ms: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionKind {
    Keyword,
    SpeechOnset,
    SpeechOffset,
}

impl DetectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionKind::Keyword => "keyword",
            DetectionKind::SpeechOnset => "speech-onset",
            DetectionKind::SpeechOffset => "speech-offset",
        }
    }
}

/// A threshold crossing. `time` is seconds of stream at the end of the
/// window that fired; `score` is the keyword log probability or the linear
/// speech probability depending on the kind.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    pub kind: DetectionKind,
    pub time: f64,
    pub score: f64,
}

impl fmt::Display for DetectionEvent {
    /// Stable line format: kind, time (3 decimals), score (6 significant
    /// digits).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:.3} {}",
            self.kind.as_str(),
            self.time,
            format_sig6(self.score)
        )
    }
}

pub(crate) fn format_sig6(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        return "-inf".to_string();
    }
    format!("{x:.5e}")
}

/// Converts a duration in ms to whole frames, rounding to nearest.
pub(crate) fn window_frames_for(
    window_ms: f64,
    frame_duration: f64,
) -> Result<usize, DetectorError> {
    let frames = (window_ms / (frame_duration * 1000.0)).round() as i64;
    if frames < 1 {
        return Err(DetectorError::WindowTooShort {
            window_ms,
            frame_ms: frame_duration * 1000.0,
        });
    }
    Ok(frames as usize)
}

pub(crate) fn hop_frames_for(hop_ms: f64, frame_duration: f64) -> usize {
    ((hop_ms / (frame_duration * 1000.0)).round() as i64).max(1) as usize
}

/// Streaming detector state. One instance per stream; feed it posterior
/// rows as they arrive and collect events.
#[derive(Debug, Clone)]
pub struct Detector {
    width: usize,
    blank: usize,
    window_frames: usize,
    hop_frames: usize,
    frame_duration: f64,
    keyword_states: Option<Vec<usize>>,
    kws_log_threshold: f64,
    vad_threshold: Option<f64>,
    refractory_frames: u64,
    buffer: VecDeque<f64>,
    frames_consumed: u64,
    last_keyword_frame: Option<u64>,
    speech_latched: bool,
    scratch: Vec<f64>,
}

impl Detector {
    /// Builds a detector for posterior rows over `alphabet` arriving every
    /// `frame_duration` seconds.
    pub fn new(
        config: &DetectorConfig,
        alphabet: &Alphabet,
        frame_duration: f64,
    ) -> Result<Self, DetectorError> {
        if frame_duration.is_nan() || frame_duration <= 0.0 {
            return Err(DetectorError::NonPositiveFrameDuration(frame_duration));
        }
        if config.hop_ms.is_nan() || config.hop_ms <= 0.0 || config.window_ms < config.hop_ms {
            return Err(DetectorError::BadWindowHop {
                window_ms: config.window_ms,
                hop_ms: config.hop_ms,
            });
        }
        if config.keyword.is_none() && config.vad_speech_threshold.is_none() {
            return Err(DetectorError::NoTaskEnabled);
        }
        let keyword_states = config
            .keyword
            .as_ref()
            .map(|k| expand_label(k, alphabet).map(|l| l.states().to_vec()))
            .transpose()?;
        let window_frames = window_frames_for(config.window_ms, frame_duration)?;
        let hop_frames = hop_frames_for(config.hop_ms, frame_duration);
        let refractory_frames = (config.refractory_ms / (frame_duration * 1000.0)).ceil() as u64;
        Ok(Detector {
            width: alphabet.len(),
            blank: alphabet.blank_index(),
            window_frames,
            hop_frames,
            frame_duration,
            keyword_states,
            kws_log_threshold: config.kws_log_threshold,
            vad_threshold: config.vad_speech_threshold,
            refractory_frames,
            buffer: VecDeque::with_capacity(window_frames * alphabet.len()),
            frames_consumed: 0,
            last_keyword_frame: None,
            speech_latched: false,
            scratch: Vec::new(),
        })
    }

    pub fn window_frames(&self) -> usize {
        self.window_frames
    }

    pub fn hop_frames(&self) -> usize {
        self.hop_frames
    }

    /// Total posterior frames consumed so far.
    pub fn frames_consumed(&self) -> u64 {
        self.frames_consumed
    }

    /// Feeds whole posterior rows (flat, row-major) and returns the events
    /// they trigger, in stream order.
    pub fn push_frames(&mut self, rows: &[f64]) -> Result<Vec<DetectionEvent>, DetectorError> {
        if !rows.len().is_multiple_of(self.width) {
            return Err(DetectorError::RowWidthMismatch {
                got: rows.len(),
                width: self.width,
            });
        }
        let mut events = Vec::new();
        for row in rows.chunks_exact(self.width) {
            self.buffer.extend(row.iter().copied());
            if self.buffer.len() > self.window_frames * self.width {
                self.buffer.drain(..self.width);
            }
            self.frames_consumed += 1;
            if self.frames_consumed >= self.window_frames as u64
                && (self.frames_consumed - self.window_frames as u64)
                    .is_multiple_of(self.hop_frames as u64)
            {
                self.evaluate_window(&mut events);
            }
        }
        Ok(events)
    }

    fn evaluate_window(&mut self, events: &mut Vec<DetectionEvent>) {
        self.scratch.clear();
        self.scratch.extend(self.buffer.iter().copied());
        let rows = Rows::new(&self.scratch, self.width);
        let time = self.frames_consumed as f64 * self.frame_duration;

        if let Some(states) = &self.keyword_states {
            let log_score = keyword_forward_log(states, self.blank, rows, None);
            if log_score >= self.kws_log_threshold {
                let quiet = match self.last_keyword_frame {
                    None => true,
                    Some(last) => self.frames_consumed - last >= self.refractory_frames,
                };
                if quiet {
                    self.last_keyword_frame = Some(self.frames_consumed);
                    events.push(DetectionEvent {
                        kind: DetectionKind::Keyword,
                        time,
                        score: log_score,
                    });
                }
            }
        }

        if let Some(threshold) = self.vad_threshold {
            let speech = speech_log_prob(self.blank, rows).exp();
            if !self.speech_latched && speech >= threshold {
                self.speech_latched = true;
                events.push(DetectionEvent {
                    kind: DetectionKind::SpeechOnset,
                    time,
                    score: speech,
                });
            } else if self.speech_latched && speech < threshold {
                self.speech_latched = false;
                events.push(DetectionEvent {
                    kind: DetectionKind::SpeechOffset,
                    time,
                    score: speech,
                });
            }
        }
    }
}

/// Outcome of whole-utterance classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtteranceDecision {
    /// Maximum keyword log score over all evaluated windows.
    pub max_log_score: f64,
    /// Whether that maximum reached the configured threshold.
    pub positive: bool,
}

/// Hop-aligned windows over `num_frames`, mirroring the streaming
/// evaluation schedule, plus one final window clipped at the utterance
/// tail. An utterance shorter than the window yields a single truncated
/// window.
pub(crate) fn hop_aligned_windows(
    num_frames: usize,
    window_frames: usize,
    hop_frames: usize,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut j = 0;
    loop {
        let end = window_frames + j * hop_frames;
        let clipped = end.min(num_frames);
        let start = end - window_frames;
        if start >= clipped {
            break;
        }
        out.push((start, clipped - start));
        if end >= num_frames {
            break;
        }
        j += 1;
    }
    out
}

/// Scores every hop-aligned window of the utterance with the configured
/// keyword and compares the maximum against the threshold.
pub fn classify_utterance(
    posteriors: &PosteriorMatrix,
    config: &DetectorConfig,
) -> Result<UtteranceDecision, DetectorError> {
    let keyword = config.keyword.as_ref().ok_or(DetectorError::NoKeyword)?;
    if posteriors.num_frames() == 0 {
        return Err(DetectorError::EmptyUtterance);
    }
    let window = window_frames_for(config.window_ms, posteriors.frame_duration())?;
    let hop = hop_frames_for(config.hop_ms, posteriors.frame_duration());
    let mut max_log = f64::NEG_INFINITY;
    for (start, len) in hop_aligned_windows(posteriors.num_frames(), window, hop) {
        let score = crate::scoring::score_keyword_window(keyword, posteriors, start, len)?;
        max_log = max_log.max(score.log_prob());
    }
    Ok(UtteranceDecision {
        max_log_score: max_log,
        positive: max_log >= config.kws_log_threshold,
    })
}

/// Maximum windowed speech probability over the utterance, using the same
/// window schedule as [`classify_utterance`].
pub fn max_window_speech(
    posteriors: &PosteriorMatrix,
    window_ms: f64,
    hop_ms: f64,
) -> Result<f64, DetectorError> {
    if posteriors.num_frames() == 0 {
        return Err(DetectorError::EmptyUtterance);
    }
    let window = window_frames_for(window_ms, posteriors.frame_duration())?;
    let hop = hop_frames_for(hop_ms, posteriors.frame_duration());
    let mut max_speech = 0.0f64;
    for (start, len) in hop_aligned_windows(posteriors.num_frames(), window, hop) {
        let speech = crate::scoring::vad_score(posteriors, start, len)?.linear();
        max_speech = max_speech.max(speech);
    }
    Ok(max_speech)
}
