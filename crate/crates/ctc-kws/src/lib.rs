//! Keyword spotting and voice activity detection over the posteriors of a
//! CTC-trained acoustic model.
//!
//! The crate scores a moving window of per-frame character probabilities
//! against a keyword (or against the empty transcript for voice activity),
//! entirely as post-processing: the same model, with no retraining, serves
//! both tasks.
//!
//! # Quick start
//!
//! ```
//! use ctc_kws::{Alphabet, Keyword, PosteriorMatrix};
//! use ctc_kws::scoring::score_keyword;
//!
//! let alphabet = Alphabet::from_chars_with_blank_last("ab").unwrap();
//! let posteriors = PosteriorMatrix::from_rows(
//!     alphabet,
//!     &[vec![0.5, 0.3, 0.2], vec![0.5, 0.3, 0.2]],
//!     0.03,
//! ).unwrap();
//! let keyword = Keyword::new("a").unwrap();
//! let score = score_keyword(&keyword, &posteriors).unwrap();
//! assert!((score.linear() - 0.75).abs() < 1e-12);
//! ```
//!
//! # Module guide
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`alphabet`] | Output symbol set, blank included |
//! | [`label`] | Keywords, transcripts, blank-expanded labels |
//! | [`posterior`] | Posterior matrices and the `.ctcp` file format |
//! | [`scoring`] | Label/keyword/VAD scores plus brute-force oracles |
//! | [`features`] | WAV input and log-magnitude spectrograms |
//! | [`model`] | Conv + gated-recurrent acoustic model inference |
//! | [`detector`] | Sliding-window detection events and utterance classification |
//! | [`eval`] | Manifests, ROC curves, TPR at fixed FPR, synthetic fixtures |
//! | [`cli`] | The `ctc-kws` command-line entry point |
//!
//! The `examples/` directory has one runnable program per capability; start
//! with `cargo run --example score_keyword`.

pub mod alphabet;
pub mod cli;
pub mod detector;
pub mod eval;
pub mod features;
pub mod label;
pub mod model;
pub mod posterior;
pub mod scoring;

pub use alphabet::Alphabet;
pub use label::{expand_label, ExpandedLabel, Keyword, Transcript};
pub use posterior::{read_posteriors, write_posteriors, PosteriorMatrix};
pub use scoring::Score;
