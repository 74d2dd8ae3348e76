//! Voice activity detection over a synthetic utterance.
//!
//! Generates a posterior sequence with a speech segment in the middle and
//! prints the per-window speech probability, i.e. one minus the
//! probability that the whole window is blank.
//!
//! Run with: cargo run --example vad_windows

use ctc_kws::eval::synth_posteriors;
use ctc_kws::scoring::vad_score;
use ctc_kws::{Alphabet, Keyword};

fn main() {
    let alphabet = Alphabet::default();
    let keyword = Keyword::new("hello").unwrap();
    // a positive sample embeds an alignment of the keyword among blanks
    let (posteriors, _) = synth_posteriors(&keyword, &alphabet, 60, 0.05, 7, true).unwrap();

    let window = 10; // frames of 30 ms -> 300 ms windows
    let hop = 3;
    println!("window end (s)  p(speech)");
    let mut end = window;
    while end <= posteriors.num_frames() {
        let speech = vad_score(&posteriors, end - window, window).unwrap();
        let seconds = end as f64 * posteriors.frame_duration();
        let bar = "#".repeat((speech.linear() * 40.0) as usize);
        println!("{seconds:>13.2}  {:>9.6} {bar}", speech.linear());
        end += hop;
    }
}
