//! Offline measurement: dataset manifests, ROC construction, TPR at a
//! fixed false-positive rate, and synthetic posterior fixtures that give
//! the whole pipeline a desk-scale ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::alphabet::Alphabet;
use crate::detector::{classify_utterance, max_window_speech, DetectorConfig, DetectorError};
use crate::features::{compute_spectrogram, read_wav, FeatureConfig};
use crate::label::{char_indices, Keyword, LabelError};
use crate::model::AcousticModel;
use crate::posterior::{read_posteriors, PosteriorMatrix};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("scores contain only one class ({positives} positives, {negatives} negatives)")]
    SingleClass { positives: usize, negatives: usize },
    #[error("requested FPR {0} outside (0, 1)")]
    BadFpr(f64),
    #[error("kws evaluation requires a keyword")]
    NoKeyword,
    #[error("noise level {0} outside [0, 1]")]
    BadNoiseLevel(f64),
    #[error("{frames} frames cannot embed the keyword (needs at least {needed})")]
    FramesTooShort { frames: usize, needed: usize },
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One dataset record: an audio or posterior file with a binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: bool,
    pub transcript: Option<String>,
}

/// Reads a tab-separated manifest: `path<TAB>label[<TAB>transcript]`, one
/// record per line, labels 0 or 1. Relative paths are resolved against the
/// manifest's directory. Blank lines are skipped; anything else malformed
/// is an error naming the line.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, EvalError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let raw_path =
            fields
                .next()
                .filter(|p| !p.is_empty())
                .ok_or_else(|| EvalError::Manifest {
                    line: line_no,
                    reason: "empty path".to_string(),
                })?;
        let label = match fields.next() {
            Some("0") => false,
            Some("1") => true,
            Some(other) => {
                return Err(EvalError::Manifest {
                    line: line_no,
                    reason: format!("label must be 0 or 1, got {other:?}"),
                })
            }
            None => {
                return Err(EvalError::Manifest {
                    line: line_no,
                    reason: "missing label field".to_string(),
                })
            }
        };
        let transcript = fields.next().map(str::to_string);
        if fields.next().is_some() {
            return Err(EvalError::Manifest {
                line: line_no,
                reason: "too many fields".to_string(),
            });
        }
        let p = PathBuf::from(raw_path);
        let path = if p.is_absolute() { p } else { base.join(p) };
        entries.push(ManifestEntry {
            path,
            label,
            transcript,
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC operating points from a threshold sweep, sorted by threshold
/// descending: FPR and TPR are non-decreasing along the list, with (0,0)
/// and (1,1) as endpoints. Tied scores share a point.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    /// Area under the curve by the trapezoid rule. Equals the probability
    /// that a random positive outscores a random negative, ties at half.
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }
}

/// Builds the ROC curve for `(score, is_positive)` pairs. Requires at
/// least one sample of each class.
pub fn roc_curve(scored: &[(f64, bool)]) -> Result<RocCurve, EvalError> {
    let positives = scored.iter().filter(|(_, label)| *label).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass {
            positives,
            negatives,
        });
    }
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        // consume the whole tie group before emitting a point
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold,
        });
    }
    Ok(RocCurve { points })
}

/// TPR of the best operating point whose FPR stays at or below the
/// requested rate: a conservative step rule with no interpolation between
/// achievable points.
pub fn tpr_at_fpr(curve: &RocCurve, fpr: f64) -> f64 {
    curve
        .points()
        .iter()
        .filter(|p| p.fpr <= fpr)
        .map(|p| p.tpr)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTask {
    Kws,
    Vad,
}

impl EvalTask {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalTask::Kws => "kws",
            EvalTask::Vad => "vad",
        }
    }
}

/// Windowing and reporting parameters for [`evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    /// False-positive rates at which to report TPR.
    pub fprs: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            window_ms: 800.0,
            hop_ms: 100.0,
            fprs: vec![0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedEntry {
    pub index: usize,
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: EvalTask,
    pub curve: RocCurve,
    pub auc: f64,
    /// Requested FPR paired with the achieved TPR.
    pub tpr_at: Vec<(f64, f64)>,
    pub num_positives: usize,
    pub num_negatives: usize,
    pub skipped: Vec<SkippedEntry>,
}

impl EvalReport {
    /// Human-readable report document.
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "task: {}", self.task.as_str()).unwrap();
        writeln!(
            out,
            "entries: {} positive, {} negative, {} skipped",
            self.num_positives,
            self.num_negatives,
            self.skipped.len()
        )
        .unwrap();
        writeln!(out, "auc: {:.6}", self.auc).unwrap();
        writeln!(out, "tpr_at_fpr:").unwrap();
        for (fpr, tpr) in &self.tpr_at {
            writeln!(out, "  {fpr:.6}: {tpr:.6}").unwrap();
        }
        if !self.skipped.is_empty() {
            writeln!(out, "skipped:").unwrap();
            for s in &self.skipped {
                writeln!(out, "  [{}] {}: {}", s.index, s.path.display(), s.reason).unwrap();
            }
        }
        writeln!(out, "curve: # threshold fpr tpr").unwrap();
        for p in self.curve.points() {
            writeln!(
                out,
                "  {} {:.6} {:.6}",
                crate::detector::format_sig6(p.threshold),
                p.fpr,
                p.tpr
            )
            .unwrap();
        }
        out
    }

    /// Two-column `fpr tpr` dump for plotting.
    pub fn curve_dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for p in self.curve.points() {
            writeln!(out, "{:.6} {:.6}", p.fpr, p.tpr).unwrap();
        }
        out
    }
}

/// Scores every manifest entry and assembles the ROC. Posterior files are
/// scored directly; `.wav` entries run through features and the model.
/// Per-entry failures are collected as skips, not fatal errors.
pub fn evaluate(
    task: EvalTask,
    entries: &[ManifestEntry],
    model: Option<&AcousticModel>,
    keyword: Option<&Keyword>,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if task == EvalTask::Kws && keyword.is_none() {
        return Err(EvalError::NoKeyword);
    }
    for &fpr in &config.fprs {
        if !(0.0..1.0).contains(&fpr) || fpr == 0.0 {
            return Err(EvalError::BadFpr(fpr));
        }
    }
    let mut scored = Vec::with_capacity(entries.len());
    let mut skipped = Vec::new();
    for (index, entry) in entries.iter().enumerate() {
        match score_entry(task, entry, model, keyword, config) {
            Ok(score) => scored.push((score, entry.label)),
            Err(reason) => skipped.push(SkippedEntry {
                index,
                path: entry.path.clone(),
                reason,
            }),
        }
    }
    let curve = roc_curve(&scored)?;
    let auc = curve.auc();
    let tpr_at = config
        .fprs
        .iter()
        .map(|&fpr| (fpr, tpr_at_fpr(&curve, fpr)))
        .collect();
    let num_positives = scored.iter().filter(|(_, l)| *l).count();
    Ok(EvalReport {
        task,
        curve,
        auc,
        tpr_at,
        num_positives,
        num_negatives: scored.len() - num_positives,
        skipped,
    })
}

fn score_entry(
    task: EvalTask,
    entry: &ManifestEntry,
    model: Option<&AcousticModel>,
    keyword: Option<&Keyword>,
    config: &EvalConfig,
) -> Result<f64, String> {
    let posteriors = load_entry_posteriors(&entry.path, model)?;
    score_posteriors(task, &posteriors, keyword, config).map_err(|e| e.to_string())
}

fn load_entry_posteriors(
    path: &Path,
    model: Option<&AcousticModel>,
) -> Result<PosteriorMatrix, String> {
    let is_wav = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("wav"))
        .unwrap_or(false);
    if is_wav {
        let model = model.ok_or("audio entry but no model provided")?;
        let audio = read_wav(path).map_err(|e| e.to_string())?;
        let spec =
            compute_spectrogram(&audio, &FeatureConfig::default()).map_err(|e| e.to_string())?;
        model.forward_full(&spec).map_err(|e| e.to_string())
    } else {
        read_posteriors(path).map_err(|e| e.to_string())
    }
}

/// Scores one utterance the way [`evaluate`] does: max windowed keyword
/// log score for KWS, max windowed speech probability for VAD.
pub fn score_posteriors(
    task: EvalTask,
    posteriors: &PosteriorMatrix,
    keyword: Option<&Keyword>,
    config: &EvalConfig,
) -> Result<f64, EvalError> {
    match task {
        EvalTask::Kws => {
            let keyword = keyword.ok_or(EvalError::NoKeyword)?;
            let detector_config = DetectorConfig {
                window_ms: config.window_ms,
                hop_ms: config.hop_ms,
                keyword: Some(keyword.clone()),
                kws_log_threshold: 0.0,
                vad_speech_threshold: None,
                refractory_ms: 0.0,
            };
            Ok(classify_utterance(posteriors, &detector_config)?.max_log_score)
        }
        EvalTask::Vad => Ok(max_window_speech(
            posteriors,
            config.window_ms,
            config.hop_ms,
        )?),
    }
}

/// Frame period used for synthetic posterior fixtures, matching the
/// default model's output rate.
pub const SYNTH_FRAME_DURATION: f64 = 0.03;

/// Generates one synthetic utterance of `frames` posterior rows.
///
/// Positive samples embed a clean CTC alignment of the keyword: each
/// character held for 2 to 4 frames, a separating blank between equal
/// neighbours, blanks elsewhere. Negative samples are blank throughout.
/// Every frame then keeps `1 - noise_level` of its mass on the intended
/// symbol and spreads `noise_level` across the alphabet along a random
/// direction, so rows stay normalized while higher noise levels blur the
/// classes together. Deterministic for a given seed.
pub fn synth_posteriors(
    keyword: &Keyword,
    alphabet: &Alphabet,
    frames: usize,
    noise_level: f64,
    seed: u64,
    positive: bool,
) -> Result<(PosteriorMatrix, bool), EvalError> {
    if !(0.0..=1.0).contains(&noise_level) {
        return Err(EvalError::BadNoiseLevel(noise_level));
    }
    let symbols = char_indices(keyword.chars(), alphabet)?;
    let blank = alphabet.blank_index();
    let separators = symbols.windows(2).filter(|w| w[0] == w[1]).count();
    let needed = 2 * symbols.len() + separators;
    if frames < needed {
        return Err(EvalError::FramesTooShort { frames, needed });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut intended = vec![blank; frames];
    if positive {
        // draw per-character hold lengths, shrinking to the minimum when
        // the draw does not fit
        let mut holds: Vec<usize> = symbols.iter().map(|_| rng.gen_range(2..=4)).collect();
        let total = |h: &[usize]| h.iter().sum::<usize>() + separators;
        if total(&holds) > frames {
            holds = vec![2; symbols.len()];
        }
        let span = total(&holds);
        let offset = rng.gen_range(0..=frames - span);
        let mut t = offset;
        for (i, (&sym, &hold)) in symbols.iter().zip(&holds).enumerate() {
            if i > 0 && symbols[i - 1] == sym {
                t += 1; // separating blank keeps the runs distinct
            }
            for _ in 0..hold {
                intended[t] = sym;
                t += 1;
            }
        }
    }

    let width = alphabet.len();
    let rows: Vec<Vec<f64>> = intended
        .iter()
        .map(|&sym| {
            let mut row = vec![0.0f64; width];
            if noise_level > 0.0 {
                // random simplex direction: normalized exponentials
                let mut sum = 0.0;
                for v in row.iter_mut() {
                    *v = -rng.gen_range(1e-12f64..1.0).ln();
                    sum += *v;
                }
                for v in row.iter_mut() {
                    *v = noise_level * (*v / sum);
                }
            }
            row[sym] += 1.0 - noise_level;
            row
        })
        .collect();
    let matrix = PosteriorMatrix::from_rows(alphabet.clone(), &rows, SYNTH_FRAME_DURATION)
        .expect("constructed rows are well-formed");
    Ok((matrix, positive))
}

/// A labeled dataset of synthetic utterances: even indices positive, odd
/// negative, each sample drawn from its own seeded stream.
pub fn synth_dataset(
    keyword: &Keyword,
    alphabet: &Alphabet,
    count: usize,
    frames: usize,
    noise_level: f64,
    seed: u64,
) -> Result<Vec<(PosteriorMatrix, bool)>, EvalError> {
    (0..count)
        .map(|i| {
            synth_posteriors(
                keyword,
                alphabet,
                frames,
                noise_level,
                seed.wrapping_add(i as u64),
                i % 2 == 0,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{score_keyword, vad_score};
    use rand::rngs::StdRng;
    use tempfile::tempdir;

    #[test]
    fn manifest_parses_records_in_order() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        fs::write(&path, "a.ctcp\t1\tolivia\nsub/b.ctcp\t0\n").unwrap();
        let entries = load_manifest(&path).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].path, dir.path().join("a.ctcp"));
        assert!(entries[0].label);
        assert_eq!(entries[0].transcript.as_deref(), Some("olivia"));
        assert_eq!(entries[1].path, dir.path().join("sub/b.ctcp"));
        assert!(!entries[1].label);
        assert_eq!(entries[1].transcript, None);
    }

    #[test]
    fn manifest_bad_label_names_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        fs::write(&path, "a.ctcp\t1\n\nb.ctcp\t2\n").unwrap();
        let err = load_manifest(&path).unwrap_err();
        assert!(matches!(err, EvalError::Manifest { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_manifest_is_empty() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        fs::write(&path, "").unwrap();
        assert!(load_manifest(&path).unwrap().is_empty());
    }

    #[test]
    fn perfect_separation_has_unit_auc() {
        let curve = roc_curve(&[(0.9, true), (0.1, false)]).unwrap();
        assert_eq!(curve.auc(), 1.0);
        let first = curve.points().first().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        let last = curve.points().last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(tpr_at_fpr(&curve, 0.05), 1.0);
    }

    #[test]
    fn uninformative_scores_give_half_auc() {
        let scored: Vec<(f64, bool)> = (0..10).map(|i| (0.5, i % 2 == 0)).collect();
        let curve = roc_curve(&scored).unwrap();
        assert!((curve.auc() - 0.5).abs() < 1e-12);
        // only (0,0) and (1,1) are achievable: the conservative step rule
        // reports the floor, not the diagonal
        assert_eq!(tpr_at_fpr(&curve, 0.05), 0.0);
    }

    #[test]
    fn interleaved_scores_match_pairwise_statistic() {
        // pairs ordered correctly: (.8 vs .6), (.8 vs .2), (.4 vs .2); one
        // inversion (.4 vs .6): AUC 3/4
        let scored = [(0.8, true), (0.6, false), (0.4, true), (0.2, false)];
        let curve = roc_curve(&scored).unwrap();
        assert!((curve.auc() - 0.75).abs() < 1e-12);
        // at fpr 0.5 the point (0.5, 1.0, thr 0.4) is admissible
        assert_eq!(tpr_at_fpr(&curve, 0.5), 1.0);
        assert_eq!(tpr_at_fpr(&curve, 0.49), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(
            roc_curve(&[(0.5, true), (0.6, true)]).unwrap_err(),
            EvalError::SingleClass {
                positives: 2,
                negatives: 0
            }
        ));
    }

    /// Pairwise-ordering statistic: fraction of positive-negative pairs
    /// ranked correctly, ties counted half.
    fn pairwise_auc(scored: &[(f64, bool)]) -> f64 {
        let positives: Vec<f64> = scored.iter().filter(|(_, l)| *l).map(|(s, _)| *s).collect();
        let negatives: Vec<f64> = scored
            .iter()
            .filter(|(_, l)| !*l)
            .map(|(s, _)| *s)
            .collect();
        let mut total = 0.0;
        for &p in &positives {
            for &n in &negatives {
                total += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / (positives.len() * negatives.len()) as f64
    }

    #[test]
    fn auc_equals_pairwise_statistic_with_ties() {
        use rand::Rng;
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.gen_range(4..120);
            // quantized scores force plenty of ties
            let scored: Vec<(f64, bool)> = (0..n)
                .map(|_| (f64::from(rng.gen_range(0..12)) / 12.0, rng.gen_bool(0.5)))
                .collect();
            let positives = scored.iter().filter(|(_, l)| *l).count();
            if positives == 0 || positives == scored.len() {
                continue;
            }
            let curve = roc_curve(&scored).unwrap();
            let expected = pairwise_auc(&scored);
            assert!(
                (curve.auc() - expected).abs() <= 1e-9,
                "auc {} pairwise {expected}",
                curve.auc()
            );
        }
    }

    #[test]
    fn curve_coordinates_and_tpr_are_monotone() {
        use rand::Rng;
        let mut rng = StdRng::seed_from_u64(37);
        for _ in 0..30 {
            let n = rng.gen_range(4..80);
            let scored: Vec<(f64, bool)> = (0..n)
                .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_bool(0.4)))
                .collect();
            let positives = scored.iter().filter(|(_, l)| *l).count();
            if positives == 0 || positives == scored.len() {
                continue;
            }
            let curve = roc_curve(&scored).unwrap();
            for pair in curve.points().windows(2) {
                assert!(pair[1].fpr >= pair[0].fpr);
                assert!(pair[1].tpr >= pair[0].tpr);
                assert!(pair[1].threshold <= pair[0].threshold);
            }
            let mut last = 0.0;
            for fpr in [0.01, 0.05, 0.1, 0.3, 0.5, 0.9, 0.99] {
                let tpr = tpr_at_fpr(&curve, fpr);
                assert!(tpr >= last);
                last = tpr;
            }
        }
    }

    #[test]
    fn noiseless_positive_scores_near_certainty() {
        let alphabet = Alphabet::default();
        let keyword = Keyword::new("hey").unwrap();
        let (p, label) = synth_posteriors(&keyword, &alphabet, 40, 0.0, 5, true).unwrap();
        assert!(label);
        let score = score_keyword(&keyword, &p).unwrap();
        // embedded frame masses are all exactly 1
        assert!(score.linear() >= 1.0 - 1e-6, "score {}", score.linear());
    }

    #[test]
    fn noiseless_negative_is_pure_blank() {
        let alphabet = Alphabet::default();
        let keyword = Keyword::new("hey").unwrap();
        let (p, label) = synth_posteriors(&keyword, &alphabet, 40, 0.0, 6, false).unwrap();
        assert!(!label);
        assert!(vad_score(&p, 0, 40).unwrap().is_zero());
        assert!(score_keyword(&keyword, &p).unwrap().is_zero());
    }

    #[test]
    fn synthesis_is_deterministic_per_seed() {
        let alphabet = Alphabet::default();
        let keyword = Keyword::new("abba").unwrap();
        let (a, _) = synth_posteriors(&keyword, &alphabet, 50, 0.4, 123, true).unwrap();
        let (b, _) = synth_posteriors(&keyword, &alphabet, 50, 0.4, 123, true).unwrap();
        assert_eq!(a, b);
        let (c, _) = synth_posteriors(&keyword, &alphabet, 50, 0.4, 124, true).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_rows_are_normalized() {
        let alphabet = Alphabet::default();
        let keyword = Keyword::new("abba").unwrap();
        for noise in [0.0, 0.3, 0.9, 1.0] {
            let (p, _) = synth_posteriors(&keyword, &alphabet, 30, noise, 9, true).unwrap();
            assert!(p.validate().passed(), "noise {noise}");
        }
    }

    #[test]
    fn too_few_frames_rejected() {
        let alphabet = Alphabet::default();
        let keyword = Keyword::new("aa").unwrap();
        // "aa" needs 2+2 frames plus one separator
        let err = synth_posteriors(&keyword, &alphabet, 4, 0.0, 0, true).unwrap_err();
        assert!(matches!(
            err,
            EvalError::FramesTooShort {
                frames: 4,
                needed: 5
            }
        ));
        assert!(synth_posteriors(&keyword, &alphabet, 5, 0.0, 0, true).is_ok());
    }

    #[test]
    fn in_memory_dataset_separates_at_moderate_noise() {
        let alphabet = Alphabet::default();
        let keyword = Keyword::new("hey").unwrap();
        let config = EvalConfig::default();
        let data = synth_dataset(&keyword, &alphabet, 60, 60, 0.3, 77).unwrap();
        let scored: Vec<(f64, bool)> = data
            .iter()
            .map(|(p, label)| {
                (
                    score_posteriors(EvalTask::Kws, p, Some(&keyword), &config).unwrap(),
                    *label,
                )
            })
            .collect();
        let curve = roc_curve(&scored).unwrap();
        assert!(curve.auc() >= 0.99, "auc {}", curve.auc());
    }

    #[test]
    fn auc_never_improves_as_noise_rises() {
        let alphabet = Alphabet::default();
        let keyword = Keyword::new("hey").unwrap();
        let config = EvalConfig::default();
        let mut last = f64::INFINITY;
        for noise in [0.0, 0.3, 0.6, 0.9] {
            let data = synth_dataset(&keyword, &alphabet, 200, 80, noise, 42).unwrap();
            let scored: Vec<(f64, bool)> = data
                .iter()
                .map(|(p, label)| {
                    (
                        score_posteriors(EvalTask::Kws, p, Some(&keyword), &config).unwrap(),
                        *label,
                    )
                })
                .collect();
            let auc = roc_curve(&scored).unwrap().auc();
            assert!(
                auc <= last,
                "auc rose from {last} to {auc} at noise {noise}"
            );
            last = auc;
        }
    }

    #[test]
    fn vad_separates_speech_from_blank_negatives() {
        let alphabet = Alphabet::default();
        let keyword = Keyword::new("hey").unwrap();
        let config = EvalConfig::default();
        let data = synth_dataset(&keyword, &alphabet, 40, 60, 0.0, 11).unwrap();
        let scored: Vec<(f64, bool)> = data
            .iter()
            .map(|(p, label)| {
                (
                    score_posteriors(EvalTask::Vad, p, None, &config).unwrap(),
                    *label,
                )
            })
            .collect();
        let curve = roc_curve(&scored).unwrap();
        assert_eq!(curve.auc(), 1.0);
    }

    #[test]
    fn evaluate_collects_skips_and_still_reports() {
        let alphabet = Alphabet::default();
        let keyword = Keyword::new("hi").unwrap();
        let dir = tempdir().unwrap();
        let data = synth_dataset(&keyword, &alphabet, 10, 40, 0.2, 3).unwrap();
        let mut entries = Vec::new();
        for (i, (p, label)) in data.iter().enumerate() {
            let path = dir.path().join(format!("s{i}.ctcp"));
            crate::posterior::write_posteriors(p, &path).unwrap();
            entries.push(ManifestEntry {
                path,
                label: *label,
                transcript: None,
            });
        }
        entries.push(ManifestEntry {
            path: dir.path().join("missing.ctcp"),
            label: true,
            transcript: None,
        });
        let report = evaluate(
            EvalTask::Kws,
            &entries,
            None,
            Some(&keyword),
            &EvalConfig::default(),
        )
        .unwrap();
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.num_positives + report.num_negatives, 10);
        assert!(report.auc > 0.9);
        let text = report.render_text();
        assert!(text.contains("auc:"));
        assert!(text.contains("missing.ctcp"));
        assert!(report.curve_dump().lines().count() >= 2);
    }

    #[test]
    fn evaluate_requires_keyword_for_kws() {
        assert!(matches!(
            evaluate(EvalTask::Kws, &[], None, None, &EvalConfig::default()).unwrap_err(),
            EvalError::NoKeyword
        ));
    }
}
