//! Exhaustive-enumeration ground truth for the lattice scorers.
//!
//! These walk every length-T symbol sequence over the alphabet, so they are
//! guarded to tiny instances. They accumulate in the linear domain on
//! purpose: an independent arithmetic route from the log-domain lattices.

use crate::label::{char_indices, Keyword, Transcript};
use crate::posterior::PosteriorMatrix;

use super::{Score, ScoringError};

const MAX_FRAMES: usize = 8;
const MAX_SYMBOLS: usize = 5;

fn guard(p: &PosteriorMatrix) -> Result<(), ScoringError> {
    if p.num_frames() > MAX_FRAMES || p.num_symbols() > MAX_SYMBOLS {
        return Err(ScoringError::InstanceTooLarge {
            frames: p.num_frames(),
            symbols: p.num_symbols(),
            max_frames: MAX_FRAMES,
            max_symbols: MAX_SYMBOLS,
        });
    }
    Ok(())
}

/// CTC collapse: merge adjacent repeats, then delete blanks.
fn collapse(seq: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(seq.len());
    let mut prev = None;
    for &s in seq {
        if prev != Some(s) && s != blank {
            out.push(s);
        }
        prev = Some(s);
    }
    out
}

/// Calls `visit` with every length-`len` sequence over `width` symbols.
fn for_each_sequence(len: usize, width: usize, mut visit: impl FnMut(&[usize])) {
    let mut seq = vec![0usize; len];
    loop {
        visit(&seq);
        let mut i = 0;
        loop {
            if i == len {
                return;
            }
            seq[i] += 1;
            if seq[i] < width {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
    }
}

fn sequence_probability(seq: &[usize], p: &PosteriorMatrix) -> f64 {
    seq.iter().enumerate().map(|(t, &s)| p.row(t)[s]).product()
}

/// Sums the probability of every symbol sequence whose CTC collapse equals
/// the transcript. The empty transcript admits only the all-blank sequence.
pub fn brute_force_label_score(
    transcript: &Transcript,
    p: &PosteriorMatrix,
) -> Result<Score, ScoringError> {
    guard(p)?;
    let target = char_indices(transcript.chars(), p.alphabet())?;
    let blank = p.alphabet().blank_index();
    let mut total = 0.0f64;
    for_each_sequence(p.num_frames(), p.num_symbols(), |seq| {
        if collapse(seq, blank) == target {
            total += sequence_probability(seq, p);
        }
    });
    Ok(Score::from_log(total.ln()))
}

/// Sums the probability of every symbol sequence that decomposes as
/// `u v w` where `u` avoids the keyword's first character, `w` avoids its
/// last, and `v` is a CTC alignment of the keyword without leading or
/// trailing blanks. The decomposition, when it exists, is unique, so each
/// sequence is counted once.
pub fn brute_force_keyword_score(
    keyword: &Keyword,
    p: &PosteriorMatrix,
) -> Result<Score, ScoringError> {
    guard(p)?;
    let target = char_indices(keyword.chars(), p.alphabet())?;
    let blank = p.alphabet().blank_index();
    let first = target[0];
    let last = *target.last().expect("keyword is nonempty");
    let mut total = 0.0f64;
    for_each_sequence(p.num_frames(), p.num_symbols(), |seq| {
        // v must start at the first emission of the first character and end
        // at the last emission of the last character.
        let Some(start) = seq.iter().position(|&s| s == first) else {
            return;
        };
        let Some(end) = seq.iter().rposition(|&s| s == last) else {
            return;
        };
        if end < start {
            return;
        }
        if collapse(&seq[start..=end], blank) == target {
            total += sequence_probability(seq, p);
        }
    });
    Ok(Score::from_log(total.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;

    fn matrix(chars: &str, rows: &[Vec<f64>]) -> PosteriorMatrix {
        let alphabet = Alphabet::from_chars_with_blank_last(chars).unwrap();
        PosteriorMatrix::from_rows(alphabet, rows, 0.03).unwrap()
    }

    #[test]
    fn collapse_merges_then_deletes() {
        // a . a collapses to "aa": the blank separates the runs
        assert_eq!(collapse(&[0, 2, 0], 2), vec![0, 0]);
        assert_eq!(collapse(&[0, 0, 2], 2), vec![0]);
        assert_eq!(collapse(&[2, 2, 2], 2), Vec::<usize>::new());
        assert_eq!(collapse(&[0, 1, 1, 2, 1], 2), vec![0, 1, 1]);
    }

    #[test]
    fn keyword_accepted_set_is_contiguous_runs() {
        // Uniform 0.5 over {a, blank}, T=3: six accepted sequences of
        // probability 1/8 each; a.a is rejected.
        let p = matrix("a", &vec![vec![0.5, 0.5]; 3]);
        let k = Keyword::new("a").unwrap();
        let score = brute_force_keyword_score(&k, &p).unwrap();
        assert!((score.linear() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn label_empty_counts_only_all_blank() {
        let p = matrix("a", &[vec![0.3, 0.7], vec![0.4, 0.6]]);
        let score = brute_force_label_score(&Transcript::empty(), &p).unwrap();
        assert!((score.linear() - 0.42).abs() < 1e-12);
    }

    #[test]
    fn label_longer_than_window_scores_zero() {
        let p = matrix("ab", &[vec![0.5, 0.3, 0.2]]);
        let score = brute_force_label_score(&Transcript::new("ab"), &p).unwrap();
        assert!(score.is_zero());
    }

    #[test]
    fn keyword_zero_frames_scores_zero() {
        let p = matrix("ab", &[]);
        let k = Keyword::new("ab").unwrap();
        let score = brute_force_keyword_score(&k, &p).unwrap();
        assert!(score.is_zero());
    }

    #[test]
    fn empty_label_zero_frames_scores_one() {
        let p = matrix("ab", &[]);
        let score = brute_force_label_score(&Transcript::empty(), &p).unwrap();
        assert_eq!(score.log_prob(), 0.0);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let p = matrix("ab", &vec![vec![0.5, 0.3, 0.2]; 9]);
        let k = Keyword::new("a").unwrap();
        assert!(matches!(
            brute_force_keyword_score(&k, &p).unwrap_err(),
            ScoringError::InstanceTooLarge { frames: 9, .. }
        ));
    }
}
