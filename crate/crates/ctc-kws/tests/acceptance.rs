//! End-to-end acceptance suite. Each test prints one PASS line; a failed
//! assertion is the corresponding FAIL.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ctc_kws::detector::{classify_utterance, Detector, DetectorConfig};
use ctc_kws::eval::{roc_curve, synth_dataset, tpr_at_fpr, EvalConfig};
use ctc_kws::features::Spectrogram;
use ctc_kws::model::{param_count, AcousticModel, ModelConfig};
use ctc_kws::scoring::oracle::{brute_force_keyword_score, brute_force_label_score};
use ctc_kws::scoring::{ctc_label_score_window, score_keyword, vad_score};
use ctc_kws::{Alphabet, Keyword, PosteriorMatrix, Transcript};

const ALPHABET_CHARS: [&str; 3] = ["a", "ab", "abc"];

fn alphabet(chars: &str) -> Alphabet {
    Alphabet::from_chars_with_blank_last(chars).unwrap()
}

/// Dirichlet-style random rows: normalized exponentials.
fn random_matrix(rng: &mut StdRng, chars: &str, frames: usize) -> PosteriorMatrix {
    let width = chars.chars().count() + 1;
    let rows: Vec<Vec<f64>> = (0..frames)
        .map(|_| {
            let raw: Vec<f64> = (0..width)
                .map(|_| -rng.gen_range(1e-9f64..1.0).ln())
                .collect();
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|v| v / sum).collect()
        })
        .collect();
    PosteriorMatrix::from_rows(alphabet(chars), &rows, 0.03).unwrap()
}

fn random_text(rng: &mut StdRng, chars: &str, len: usize) -> String {
    let cs: Vec<char> = chars.chars().collect();
    (0..len).map(|_| cs[rng.gen_range(0..cs.len())]).collect()
}

fn assert_relative(actual: f64, expected: f64, tol: f64, context: &str) {
    if expected == 0.0 {
        assert_eq!(actual, 0.0, "{context}: expected exact zero, got {actual}");
    } else {
        let rel = (actual - expected).abs() / expected;
        assert!(
            rel <= tol,
            "{context}: relative error {rel} (actual {actual}, expected {expected})"
        );
    }
}

#[test]
fn criterion_01_keyword_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(101);
    for case in 0..200 {
        let chars = ALPHABET_CHARS[rng.gen_range(0..3)];
        let frames = rng.gen_range(1..=6);
        let p = random_matrix(&mut rng, chars, frames);
        let len = rng.gen_range(1..=3);
        let text = random_text(&mut rng, chars, len);
        let keyword = Keyword::new(&text).unwrap();
        let dp = score_keyword(&keyword, &p).unwrap().linear();
        let bf = brute_force_keyword_score(&keyword, &p).unwrap().linear();
        assert_relative(
            dp,
            bf,
            1e-9,
            &format!("case {case} keyword {text} T={frames}"),
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 1 PASS: keyword DP matches enumeration on 200 cases within 1e-9 ({elapsed:?})"
    );
}

#[test]
fn criterion_02_label_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(202);
    for case in 0..200 {
        let chars = ALPHABET_CHARS[rng.gen_range(0..3)];
        let frames = rng.gen_range(1..=6);
        let p = random_matrix(&mut rng, chars, frames);
        // alternate between random transcripts and the empty (VAD) one
        let text = if case % 4 == 3 {
            String::new()
        } else {
            let len = rng.gen_range(1..=3);
            random_text(&mut rng, chars, len)
        };
        let transcript = Transcript::new(&text);
        let dp = ctc_kws::scoring::ctc_label_score(&transcript, &p)
            .unwrap()
            .linear();
        let bf = brute_force_label_score(&transcript, &p).unwrap().linear();
        assert_relative(
            dp,
            bf,
            1e-9,
            &format!("case {case} label {text:?} T={frames}"),
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 2 PASS: label DP matches enumeration on 200 cases within 1e-9 ({elapsed:?})"
    );
}

#[test]
fn criterion_03_worked_example() {
    let p = PosteriorMatrix::from_rows(
        alphabet("ab"),
        &[vec![0.5, 0.3, 0.2], vec![0.5, 0.3, 0.2]],
        0.03,
    )
    .unwrap();
    let keyword = Keyword::new("a").unwrap();
    let score = score_keyword(&keyword, &p).unwrap().linear();
    assert!(
        (score - 0.75).abs() <= 1e-12,
        "worked example scored {score}, expected 0.75"
    );
    println!("ACCEPTANCE 3 PASS: two-frame worked example scores 0.75 within 1e-12");
}

#[test]
fn criterion_04_vad_identity() {
    let mut rng = StdRng::seed_from_u64(404);
    for case in 0..100 {
        let chars = ALPHABET_CHARS[rng.gen_range(0..3)];
        let frames = rng.gen_range(1..=30);
        let p = random_matrix(&mut rng, chars, frames);
        let start = rng.gen_range(0..frames);
        let len = rng.gen_range(1..=frames - start);
        let vad = vad_score(&p, start, len).unwrap().linear();
        let blank = ctc_label_score_window(&Transcript::empty(), &p, start, len)
            .unwrap()
            .linear();
        let diff = (vad - (1.0 - blank)).abs();
        assert!(diff <= 1e-12, "case {case}: diff {diff}");
    }
    println!(
        "ACCEPTANCE 4 PASS: vad_score equals 1 - empty-label score on 100 windows within 1e-12"
    );
}

#[test]
fn criterion_05_keyword_dominates_label_score() {
    let mut rng = StdRng::seed_from_u64(505);
    for case in 0..1000 {
        let chars = ALPHABET_CHARS[rng.gen_range(0..3)];
        let frames = rng.gen_range(1..=12);
        let p = random_matrix(&mut rng, chars, frames);
        let len = rng.gen_range(1..=3);
        let text = random_text(&mut rng, chars, len);
        let keyword = Keyword::new(&text).unwrap();
        let relaxed = score_keyword(&keyword, &p).unwrap().linear();
        let strict = ctc_kws::scoring::ctc_label_score(&Transcript::new(&text), &p)
            .unwrap()
            .linear();
        assert!(
            relaxed >= strict - 1e-12,
            "case {case} keyword {text}: relaxed {relaxed} < strict {strict}"
        );
    }
    println!("ACCEPTANCE 5 PASS: window score dominates plain CTC score on 1000 pairs");
}

#[test]
fn criterion_06_log_domain_robustness() {
    // 1000 frames with target probabilities down to 1e-30
    let rows: Vec<Vec<f64>> = (0..1000)
        .map(|_| vec![1e-30, 1e-10, 1.0 - 1e-30 - 1e-10])
        .collect();
    let p = PosteriorMatrix::from_rows(alphabet("ab"), &rows, 0.03).unwrap();

    let keyword_log = score_keyword(&Keyword::new("ab").unwrap(), &p)
        .unwrap()
        .log_prob();
    assert!(keyword_log.is_finite(), "keyword log {keyword_log}");
    let label_log = ctc_kws::scoring::ctc_label_score(&Transcript::new("ab"), &p)
        .unwrap()
        .log_prob();
    assert!(label_log.is_finite(), "label log {label_log}");
    let vad_log = vad_score(&p, 0, 1000).unwrap().log_prob();
    assert!(vad_log.is_finite(), "vad log {vad_log}");
    let empty_log = ctc_kws::scoring::ctc_label_score(&Transcript::empty(), &p)
        .unwrap()
        .log_prob();
    assert!(empty_log.is_finite(), "empty-label log {empty_log}");

    // exact zero stays an exact zero rather than NaN
    let mut zero_rows = rows;
    for row in &mut zero_rows {
        row[2] += row[0];
        row[0] = 0.0;
    }
    let pz = PosteriorMatrix::from_rows(alphabet("ab"), &zero_rows, 0.03).unwrap();
    let z = score_keyword(&Keyword::new("ab").unwrap(), &pz).unwrap();
    assert!(z.is_zero());
    assert!(!z.log_prob().is_nan());
    println!("ACCEPTANCE 6 PASS: T=1000 windows at 1e-30 stay finite; impossible scores are exact log-zero");
}

fn random_small_config(rng: &mut StdRng) -> ModelConfig {
    let conv_filter_freq = rng.gen_range(2..=4);
    let chars = ALPHABET_CHARS[rng.gen_range(0..3)];
    ModelConfig {
        conv_filter_time: rng.gen_range(2..=5),
        conv_filter_freq,
        conv_filters: rng.gen_range(1..=3),
        conv_stride_time: rng.gen_range(1..=3),
        conv_stride_freq: rng.gen_range(1..=3),
        num_recurrent_layers: rng.gen_range(1..=3),
        hidden_size: rng.gen_range(2..=8),
        input_bins: conv_filter_freq + rng.gen_range(0..=6),
        alphabet: alphabet(chars),
    }
}

fn random_spectrogram(rng: &mut StdRng, frames: usize, bins: usize) -> Spectrogram {
    let data: Vec<f32> = (0..frames * bins)
        .map(|_| rng.gen_range(-8.0f32..2.0))
        .collect();
    Spectrogram::from_flat(data, bins, 0.01, 0.02)
}

#[test]
fn criterion_07_streaming_equivalence() {
    let mut rng = StdRng::seed_from_u64(707);

    // model: chunked forward_step vs forward_full
    for case in 0..100 {
        let config = random_small_config(&mut rng);
        let bins = config.input_bins;
        let filter_time = config.conv_filter_time;
        let seed: u64 = rng.gen();
        let model = AcousticModel::random(config, seed).unwrap();
        let frames = rng.gen_range(filter_time..filter_time + 40);
        let spec = random_spectrogram(&mut rng, frames, bins);
        let full = model.forward_full(&spec).unwrap();

        let mut state = model.new_state();
        let mut streamed: Vec<f64> = Vec::new();
        let mut i = 0;
        while i < frames {
            let n = rng.gen_range(1..=frames - i);
            streamed.extend(
                model
                    .forward_step(&spec.data()[i * bins..(i + n) * bins], &mut state)
                    .unwrap(),
            );
            i += n;
        }
        assert_eq!(streamed.len(), full.data().len(), "case {case}");
        for (s, b) in streamed.iter().zip(full.data()) {
            assert!((s - b).abs() <= 1e-6, "case {case}: {s} vs {b}");
        }
    }

    // detector: event lists are chunking-invariant, bit-identical
    for case in 0..50 {
        let chars = ALPHABET_CHARS[rng.gen_range(0..3)];
        let stream_frames = rng.gen_range(30..120);
        let p = random_matrix(&mut rng, chars, stream_frames);
        let len = rng.gen_range(1..=2);
        let text = random_text(&mut rng, chars, len);
        let config = DetectorConfig {
            window_ms: 30.0 * rng.gen_range(5..15) as f64,
            hop_ms: 30.0 * rng.gen_range(1..4) as f64,
            keyword: Some(Keyword::new(&text).unwrap()),
            kws_log_threshold: rng.gen_range(-20.0..-1.0),
            vad_speech_threshold: Some(rng.gen_range(0.3..0.9)),
            refractory_ms: rng.gen_range(0.0..500.0),
        };
        let data: Vec<f64> = p.data().to_vec();
        let width = p.num_symbols();

        let single = {
            let mut d = Detector::new(&config, p.alphabet(), 0.03).unwrap();
            d.push_frames(&data).unwrap()
        };
        let chunked = {
            let mut d = Detector::new(&config, p.alphabet(), 0.03).unwrap();
            let mut events = Vec::new();
            let mut i = 0;
            while i < p.num_frames() {
                let n = rng.gen_range(1..=p.num_frames() - i);
                events.extend(d.push_frames(&data[i * width..(i + n) * width]).unwrap());
                i += n;
            }
            events
        };
        assert_eq!(single.len(), chunked.len(), "case {case}");
        for (a, b) in single.iter().zip(&chunked) {
            assert_eq!(a.kind, b.kind, "case {case}");
            assert_eq!(a.time.to_bits(), b.time.to_bits(), "case {case}");
            assert_eq!(a.score.to_bits(), b.score.to_bits(), "case {case}");
        }
    }
    println!("ACCEPTANCE 7 PASS: 100 chunked forward passes within 1e-6 of batch; 50 detector event lists bit-identical");
}

#[test]
fn criterion_08_shape_law_and_softmax_rows() {
    let mut rng = StdRng::seed_from_u64(808);

    // conv output length over the full input range, with the deployed
    // 11-frame filter and stride 3
    let config = ModelConfig {
        conv_filter_time: 11,
        conv_filter_freq: 4,
        conv_filters: 2,
        conv_stride_time: 3,
        conv_stride_freq: 2,
        num_recurrent_layers: 1,
        hidden_size: 4,
        input_bins: 8,
        alphabet: alphabet("ab"),
    };
    let model = AcousticModel::random(config, 17).unwrap();
    for frames in 11..=200 {
        let spec = random_spectrogram(&mut rng, frames, 8);
        let post = model.forward_full(&spec).unwrap();
        let expected = (frames - 11) / 3 + 1;
        assert_eq!(post.num_frames(), expected, "frames {frames}");
    }

    // softmax normalization across 50 random models
    for case in 0..50 {
        let config = random_small_config(&mut rng);
        let bins = config.input_bins;
        let filter_time = config.conv_filter_time;
        let seed: u64 = rng.gen();
        let model = AcousticModel::random(config, seed).unwrap();
        let extra = rng.gen_range(0..20);
        let spec = random_spectrogram(&mut rng, filter_time + extra, bins);
        let post = model.forward_full(&spec).unwrap();
        for (i, row) in post.rows().enumerate() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-5, "case {case} row {i}: sum {sum}");
        }
    }
    println!("ACCEPTANCE 8 PASS: conv shape law holds for T in [11,200]; softmax rows normalized for 50 models");
}

#[test]
fn criterion_09_parameter_count() {
    let config = ModelConfig::with_alphabet(Alphabet::default());
    let count = param_count(&config);
    assert!(
        (1_000_000..=2_500_000).contains(&count),
        "default config has {count} parameters"
    );
    println!("ACCEPTANCE 9 PASS: default 3x256 config has {count} parameters, within [1.0M, 2.5M]");
}

#[test]
fn criterion_10_synthetic_roc() {
    let start = Instant::now();
    let alphabet = Alphabet::default();
    let keyword = Keyword::new("olivia").unwrap();
    let eval_config = EvalConfig::default();

    let auc_at = |noise: f64| -> f64 {
        let data = synth_dataset(&keyword, &alphabet, 200, 80, noise, 42).unwrap();
        assert_eq!(data.iter().filter(|(_, l)| *l).count(), 100);
        let scored: Vec<(f64, bool)> = data
            .iter()
            .map(|(p, label)| {
                let config = DetectorConfig {
                    window_ms: eval_config.window_ms,
                    hop_ms: eval_config.hop_ms,
                    keyword: Some(keyword.clone()),
                    kws_log_threshold: 0.0,
                    vad_speech_threshold: None,
                    refractory_ms: 0.0,
                };
                (
                    classify_utterance(p, &config).unwrap().max_log_score,
                    *label,
                )
            })
            .collect();
        roc_curve(&scored).unwrap().auc()
    };

    let auc_low = auc_at(0.3);
    let auc_high = auc_at(0.9);
    assert!(auc_low >= 0.99, "AUC at noise 0.3 is {auc_low}");
    assert!(
        auc_high < auc_low,
        "AUC did not degrade: {auc_high} at 0.9 vs {auc_low} at 0.3"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 10 PASS: synthetic ROC AUC {auc_low:.4} at noise 0.3 (>= 0.99), {auc_high:.4} at 0.9 ({elapsed:?})"
    );
}

#[test]
fn criterion_11_roc_correctness() {
    let mut rng = StdRng::seed_from_u64(1111);
    for case in 0..50 {
        let n = rng.gen_range(4..200);
        let quantize = rng.gen_bool(0.5);
        let mut scored: Vec<(f64, bool)> = (0..n)
            .map(|_| {
                let s = if quantize {
                    f64::from(rng.gen_range(0..10)) / 10.0
                } else {
                    rng.gen_range(-30.0..0.0)
                };
                (s, rng.gen_bool(0.5))
            })
            .collect();
        // guarantee both classes
        scored.push((rng.gen_range(-1.0..1.0), true));
        scored.push((rng.gen_range(-1.0..1.0), false));

        let positives: Vec<f64> = scored.iter().filter(|(_, l)| *l).map(|(s, _)| *s).collect();
        let negatives: Vec<f64> = scored
            .iter()
            .filter(|(_, l)| !*l)
            .map(|(s, _)| *s)
            .collect();
        let mut pairwise = 0.0;
        for &p in &positives {
            for &n in &negatives {
                pairwise += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        pairwise /= (positives.len() * negatives.len()) as f64;

        let curve = roc_curve(&scored).unwrap();
        assert!(
            (curve.auc() - pairwise).abs() <= 1e-9,
            "case {case}: auc {} pairwise {pairwise}",
            curve.auc()
        );

        let mut last = 0.0;
        for fpr in [0.02, 0.05, 0.1, 0.25, 0.5, 0.75, 0.95] {
            let tpr = tpr_at_fpr(&curve, fpr);
            assert!(tpr >= last, "case {case}: tpr regressed at fpr {fpr}");
            last = tpr;
        }
    }
    println!("ACCEPTANCE 11 PASS: AUC matches the pairwise statistic on 50 sets within 1e-9; TPR@FPR monotone");
}
