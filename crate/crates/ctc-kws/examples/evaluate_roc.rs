//! ROC evaluation on a synthetic dataset.
//!
//! Generates labeled synthetic utterances at increasing noise levels,
//! scores each with the max-window keyword score, and reports AUC and the
//! true-positive rate at a 5% false-positive rate.
//!
//! Run with: cargo run --example evaluate_roc

use ctc_kws::eval::{roc_curve, score_posteriors, synth_dataset, tpr_at_fpr, EvalConfig, EvalTask};
use ctc_kws::{Alphabet, Keyword};

fn main() {
    let alphabet = Alphabet::default();
    let keyword = Keyword::new("olivia").unwrap();
    let config = EvalConfig::default();

    println!("noise   AUC      TPR@5%FPR");
    for noise in [0.0, 0.3, 0.6, 0.9] {
        let data = synth_dataset(&keyword, &alphabet, 100, 80, noise, 42).unwrap();
        let scored: Vec<(f64, bool)> = data
            .iter()
            .map(|(posteriors, label)| {
                let score =
                    score_posteriors(EvalTask::Kws, posteriors, Some(&keyword), &config).unwrap();
                (score, *label)
            })
            .collect();
        let curve = roc_curve(&scored).unwrap();
        println!(
            "{noise:<7} {:.4}   {:.4}",
            curve.auc(),
            tpr_at_fpr(&curve, 0.05)
        );
    }
}
