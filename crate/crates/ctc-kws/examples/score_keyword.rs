//! Score a keyword against a hand-built posterior window.
//!
//! Builds the two-frame posterior matrix from the crate documentation,
//! scores the keyword "a" with the relaxed window algorithm and the plain
//! CTC label score, and prints the full forward lattice.
//!
//! Run with: cargo run --example score_keyword

use ctc_kws::scoring::{ctc_label_score, score_keyword, score_keyword_with_lattice};
use ctc_kws::{Alphabet, Keyword, PosteriorMatrix, Transcript};

fn main() {
    let alphabet = Alphabet::from_chars_with_blank_last("ab").unwrap();
    let posteriors =
        PosteriorMatrix::from_rows(alphabet, &[vec![0.5, 0.3, 0.2], vec![0.5, 0.3, 0.2]], 0.03)
            .unwrap();

    let keyword = Keyword::new("a").unwrap();
    let relaxed = score_keyword(&keyword, &posteriors).unwrap();
    println!(
        "window score for {keyword:?}: p = {:.6} (log {:.6})",
        relaxed.linear(),
        relaxed.log_prob()
    );

    // the strict label score admits only pure alignments of "a", so it
    // can never exceed the windowed score
    let strict = ctc_label_score(&Transcript::new("a"), &posteriors).unwrap();
    println!(
        "plain CTC score for \"a\":  p = {:.6} (log {:.6})",
        strict.linear(),
        strict.log_prob()
    );

    let (_, lattice) = score_keyword_with_lattice(&keyword, &posteriors).unwrap();
    println!(
        "\nforward lattice ({} states x {} frames), linear domain:",
        lattice.num_states(),
        lattice.num_frames()
    );
    for state in 0..lattice.num_states() {
        let row: Vec<String> = (0..lattice.num_frames())
            .map(|t| format!("{:8.4}", lattice.log_alpha(state, t).exp()))
            .collect();
        println!("  state {state}: {}", row.join(" "));
    }
}
