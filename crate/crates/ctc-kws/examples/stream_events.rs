//! Streaming detection events from chunked posterior input.
//!
//! Feeds a synthetic posterior stream to the detector a few frames at a
//! time, the way a live audio pipeline would, and prints keyword and
//! speech events as they fire. The event list is identical for any
//! chunking of the same stream.
//!
//! Run with: cargo run --example stream_events

use ctc_kws::detector::{Detector, DetectorConfig};
use ctc_kws::eval::synth_posteriors;
use ctc_kws::{Alphabet, Keyword};

fn main() {
    let alphabet = Alphabet::default();
    let keyword = Keyword::new("olivia").unwrap();

    // two utterances back to back: a positive then a negative
    let (positive, _) = synth_posteriors(&keyword, &alphabet, 70, 0.05, 11, true).unwrap();
    let (negative, _) = synth_posteriors(&keyword, &alphabet, 70, 0.05, 12, false).unwrap();
    let mut stream: Vec<f64> = positive.data().to_vec();
    stream.extend_from_slice(negative.data());

    let config = DetectorConfig {
        window_ms: 800.0,
        hop_ms: 100.0,
        keyword: Some(keyword.clone()),
        kws_log_threshold: -15.0,
        vad_speech_threshold: Some(0.5),
        refractory_ms: 1000.0,
    };
    let mut detector = Detector::new(&config, &alphabet, positive.frame_duration()).unwrap();
    println!(
        "detector: {} frame window, {} frame hop",
        detector.window_frames(),
        detector.hop_frames()
    );

    let width = alphabet.len();
    for chunk in stream.chunks(5 * width) {
        for event in detector.push_frames(chunk).unwrap() {
            println!("{event}");
        }
    }
    println!("(consumed {} frames)", detector.frames_consumed());
}
