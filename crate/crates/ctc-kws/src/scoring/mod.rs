//! CTC label scoring, keyword scoring with absorbing end states, and the
//! blank-complement voice-activity score.
//!
//! All lattice accumulation runs in the natural-log domain with explicit
//! negative-infinity as the exact-zero sentinel; probabilities only become
//! linear again at the caller's request. The production keyword path keeps
//! two lattice columns; [`score_keyword_with_lattice`] materializes the full
//! table for inspection.

pub mod oracle;

use thiserror::Error;

use crate::label::{
    char_indices, expand_label, interleave_blanks, ExpandedLabel, Keyword, LabelError, Transcript,
};
use crate::posterior::PosteriorMatrix;

pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("window [{start}, {start}+{len}) out of range for {frames} frames")]
    WindowOutOfRange {
        start: usize,
        len: usize,
        frames: usize,
    },
    #[error("window length must be at least 1")]
    EmptyWindow,
    #[error("instance too large for exhaustive enumeration: {frames} frames x {symbols} symbols (limits: {max_frames} x {max_symbols})")]
    InstanceTooLarge {
        frames: usize,
        symbols: usize,
        max_frames: usize,
        max_symbols: usize,
    },
}

/// A probability carried as a natural-log value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Score {
    log_prob: f64,
}

impl Score {
    /// Exact zero probability.
    pub const ZERO: Score = Score { log_prob: LOG_ZERO };

    /// Certain event.
    pub const ONE: Score = Score { log_prob: 0.0 };

    pub fn from_log(log_prob: f64) -> Self {
        Score { log_prob }
    }

    pub fn from_linear(p: f64) -> Self {
        Score { log_prob: p.ln() }
    }

    /// Natural-log probability; `-inf` for exact zero.
    pub fn log_prob(self) -> f64 {
        self.log_prob
    }

    /// Probability in [0, 1].
    pub fn linear(self) -> f64 {
        self.log_prob.exp()
    }

    pub fn is_zero(self) -> bool {
        self.log_prob == LOG_ZERO
    }
}

/// Borrowed window of posterior rows (linear probabilities).
#[derive(Clone, Copy)]
pub(crate) struct Rows<'a> {
    data: &'a [f64],
    width: usize,
}

impl<'a> Rows<'a> {
    pub(crate) fn new(data: &'a [f64], width: usize) -> Self {
        debug_assert_eq!(data.len() % width, 0);
        Rows { data, width }
    }

    pub(crate) fn num_frames(&self) -> usize {
        self.data.len() / self.width
    }

    /// Linear probability of symbol `s` at frame `t`.
    fn prob(&self, t: usize, s: usize) -> f64 {
        self.data[t * self.width + s]
    }

    fn log_prob(&self, t: usize, s: usize) -> f64 {
        self.prob(t, s).ln()
    }

    /// Log of the complement probability `1 - p(s, t)`, clamped at zero so
    /// mildly denormalized rows cannot produce NaN.
    fn log_complement(&self, t: usize, s: usize) -> f64 {
        (1.0 - self.prob(t, s)).max(0.0).ln()
    }
}

impl<'a> From<&'a PosteriorMatrix> for Rows<'a> {
    fn from(p: &'a PosteriorMatrix) -> Self {
        Rows::new(p.data(), p.num_symbols())
    }
}

fn window_rows(p: &PosteriorMatrix, start: usize, len: usize) -> Result<Rows<'_>, ScoringError> {
    if len == 0 {
        return Err(ScoringError::EmptyWindow);
    }
    let end = start
        .checked_add(len)
        .filter(|&e| e <= p.num_frames())
        .ok_or(ScoringError::WindowOutOfRange {
            start,
            len,
            frames: p.num_frames(),
        })?;
    let w = p.num_symbols();
    Ok(Rows::new(&p.data()[start * w..end * w], w))
}

/// log(exp(a) + exp(b)) with exact-zero propagation.
fn log_add(a: f64, b: f64) -> f64 {
    if a == LOG_ZERO {
        return b;
    }
    if b == LOG_ZERO {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log(1 - exp(x)) for x <= 0, stable near both endpoints.
fn log_one_minus_exp(x: f64) -> f64 {
    if x == LOG_ZERO {
        return 0.0;
    }
    if x >= 0.0 {
        return LOG_ZERO;
    }
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Probability that the posterior window contains the transcript, summed
/// over every frame alignment the CTC operator admits. The empty transcript
/// yields the probability of pure blank; a window too short to hold the
/// transcript yields exact zero.
pub fn ctc_label_score(
    transcript: &Transcript,
    posteriors: &PosteriorMatrix,
) -> Result<Score, ScoringError> {
    let symbols = char_indices(transcript.chars(), posteriors.alphabet())?;
    Ok(Score::from_log(label_forward_log(
        &symbols,
        posteriors.alphabet().blank_index(),
        posteriors.into(),
    )))
}

/// [`ctc_label_score`] restricted to the frame window `[start, start+len)`.
pub fn ctc_label_score_window(
    transcript: &Transcript,
    posteriors: &PosteriorMatrix,
    start: usize,
    len: usize,
) -> Result<Score, ScoringError> {
    let symbols = char_indices(transcript.chars(), posteriors.alphabet())?;
    let rows = window_rows(posteriors, start, len)?;
    Ok(Score::from_log(label_forward_log(
        &symbols,
        posteriors.alphabet().blank_index(),
        rows,
    )))
}

/// Probability that the window matches `[^k_0]* k [^k_last]*`: the keyword
/// somewhere in the window, with the flanking frames free to emit anything
/// that does not extend the keyword's first or last character run.
pub fn score_keyword(
    keyword: &Keyword,
    posteriors: &PosteriorMatrix,
) -> Result<Score, ScoringError> {
    let label = expand_label(keyword, posteriors.alphabet())?;
    Ok(Score::from_log(keyword_forward_log(
        label.states(),
        label.blank_index(),
        posteriors.into(),
        None,
    )))
}

/// [`score_keyword`] restricted to the frame window `[start, start+len)`.
pub fn score_keyword_window(
    keyword: &Keyword,
    posteriors: &PosteriorMatrix,
    start: usize,
    len: usize,
) -> Result<Score, ScoringError> {
    let label = expand_label(keyword, posteriors.alphabet())?;
    let rows = window_rows(posteriors, start, len)?;
    Ok(Score::from_log(keyword_forward_log(
        label.states(),
        label.blank_index(),
        rows,
        None,
    )))
}

/// Debug variant of [`score_keyword`] that materializes the full S x T
/// lattice instead of the production two-column rotation.
pub fn score_keyword_with_lattice(
    keyword: &Keyword,
    posteriors: &PosteriorMatrix,
) -> Result<(Score, ScoreLattice), ScoringError> {
    let label = expand_label(keyword, posteriors.alphabet())?;
    let num_frames = posteriors.num_frames();
    let mut table = Vec::with_capacity(label.num_states() * num_frames);
    let log = keyword_forward_log(
        label.states(),
        label.blank_index(),
        posteriors.into(),
        Some(&mut table),
    );
    let lattice = ScoreLattice {
        label,
        log_alpha: table,
        num_frames,
    };
    Ok((Score::from_log(log), lattice))
}

/// Probability of speech in the window: one minus the probability that
/// every frame emits the blank, accumulated as a sum of blank log
/// probabilities.
pub fn vad_score(
    posteriors: &PosteriorMatrix,
    start: usize,
    len: usize,
) -> Result<Score, ScoringError> {
    let rows = window_rows(posteriors, start, len)?;
    Ok(Score::from_log(speech_log_prob(
        posteriors.alphabet().blank_index(),
        rows,
    )))
}

/// Full forward lattice of a keyword score, column-major.
#[derive(Debug, Clone)]
pub struct ScoreLattice {
    label: ExpandedLabel,
    log_alpha: Vec<f64>,
    num_frames: usize,
}

impl ScoreLattice {
    pub fn num_states(&self) -> usize {
        self.label.num_states()
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn label(&self) -> &ExpandedLabel {
        &self.label
    }

    /// Log forward probability of being in `state` after emitting frame
    /// `frame` (0-based).
    pub fn log_alpha(&self, state: usize, frame: usize) -> f64 {
        self.log_alpha[frame * self.num_states() + state]
    }
}

/// Standard CTC forward pass over the blank-interleaved expansion of
/// `symbols`. Handles the empty label (no speech) as the pure-blank
/// product. Returns the natural-log score.
pub(crate) fn label_forward_log(symbols: &[usize], blank: usize, rows: Rows<'_>) -> f64 {
    let t_len = rows.num_frames();
    if symbols.is_empty() {
        // Product of per-frame blank probabilities; empty window scores 1.
        return (0..t_len).map(|t| rows.log_prob(t, blank)).sum();
    }
    if t_len == 0 {
        return LOG_ZERO;
    }
    let states = interleave_blanks(symbols, blank);
    let s_len = states.len();

    let mut prev = vec![LOG_ZERO; s_len];
    let mut curr = vec![LOG_ZERO; s_len];
    prev[0] = rows.log_prob(0, states[0]);
    prev[1] = rows.log_prob(0, states[1]);

    for t in 1..t_len {
        for s in 0..s_len {
            let mut sum = prev[s];
            if s >= 1 {
                sum = log_add(sum, prev[s - 1]);
            }
            if s >= 2 && states[s] != blank && states[s] != states[s - 2] {
                sum = log_add(sum, prev[s - 2]);
            }
            curr[s] = rows.log_prob(t, states[s]) + sum;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    log_add(prev[s_len - 1], prev[s_len - 2])
}

/// Forward pass with absorbing end states: the first and last lattice
/// states emit the complement of the adjacent keyword character, so the
/// window may contain arbitrary material before and after the keyword.
/// `states` is the blank-interleaved expanded label (length >= 3).
///
/// When `lattice` is provided, every column is appended to it after being
/// computed; the arithmetic is identical either way.
pub(crate) fn keyword_forward_log(
    states: &[usize],
    blank: usize,
    rows: Rows<'_>,
    mut lattice: Option<&mut Vec<f64>>,
) -> f64 {
    let s_len = states.len();
    debug_assert!(s_len >= 3 && s_len % 2 == 1);
    let t_len = rows.num_frames();
    if t_len == 0 {
        return LOG_ZERO;
    }
    let first_char = states[1];
    let last_char = states[s_len - 2];

    let emission = |s: usize, t: usize| -> f64 {
        if s == 0 {
            rows.log_complement(t, first_char)
        } else if s == s_len - 1 {
            rows.log_complement(t, last_char)
        } else {
            rows.log_prob(t, states[s])
        }
    };

    let mut prev = vec![LOG_ZERO; s_len];
    let mut curr = vec![LOG_ZERO; s_len];
    prev[0] = emission(0, 0);
    prev[1] = rows.log_prob(0, first_char);
    if let Some(table) = lattice.as_deref_mut() {
        table.extend_from_slice(&prev);
    }

    for t in 1..t_len {
        for s in 0..s_len {
            let mut sum = prev[s];
            if s >= 1 {
                sum = log_add(sum, prev[s - 1]);
            }
            if s >= 2 && states[s] != states[s - 2] && states[s] != blank {
                sum = log_add(sum, prev[s - 2]);
            }
            curr[s] = emission(s, t) + sum;
        }
        if let Some(table) = lattice.as_deref_mut() {
            table.extend_from_slice(&curr);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    log_add(prev[s_len - 1], prev[s_len - 2])
}

/// Log probability of speech over the rows: `log(1 - prod_t p_t(blank))`.
pub(crate) fn speech_log_prob(blank: usize, rows: Rows<'_>) -> f64 {
    let log_all_blank: f64 = (0..rows.num_frames())
        .map(|t| rows.log_prob(t, blank))
        .sum();
    log_one_minus_exp(log_all_blank)
}
