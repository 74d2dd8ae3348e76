//! Acoustic model inference from raw audio, batch and streaming.
//!
//! Builds a randomly initialized model (the weights are fixtures, not a
//! trained network), runs a synthetic tone through spectrogram extraction
//! and the forward pass, saves and reloads the model, and shows that
//! chunked streaming inference reproduces the batch output.
//!
//! Run with: cargo run --example model_inference

use ctc_kws::features::{compute_spectrogram, AudioBuffer, FeatureConfig};
use ctc_kws::model::io::{load_model, save_model};
use ctc_kws::model::{AcousticModel, ModelConfig};
use ctc_kws::Alphabet;

fn main() {
    let config = ModelConfig::with_alphabet(Alphabet::default());
    let model = AcousticModel::random(config, 42).unwrap();
    println!("parameters: {}", model.param_count());

    // one second of a 440 Hz tone at 8 kHz
    let samples: Vec<f32> = (0..8000)
        .map(|i| 0.4 * (2.0 * std::f32::consts::PI * 440.0 * i as f32 / 8000.0).sin())
        .collect();
    let audio = AudioBuffer::new(samples, 8000);
    let spectrogram = compute_spectrogram(&audio, &FeatureConfig::default()).unwrap();
    println!(
        "spectrogram: {} frames x {} bins",
        spectrogram.num_frames(),
        spectrogram.num_bins()
    );

    let posteriors = model.forward_full(&spectrogram).unwrap();
    println!(
        "posteriors: {} frames x {} symbols, {} ms per frame",
        posteriors.num_frames(),
        posteriors.num_symbols(),
        posteriors.frame_duration() * 1000.0
    );
    let first_row_sum: f64 = posteriors.row(0).iter().sum();
    println!("first row sums to {first_row_sum:.8}");

    // chunked inference carries hidden state and pending frames across calls
    let mut state = model.new_state();
    let bins = spectrogram.num_bins();
    let mut streamed = Vec::new();
    for chunk in spectrogram.data().chunks(7 * bins) {
        streamed.extend(model.forward_step(chunk, &mut state).unwrap());
    }
    let max_diff = streamed
        .iter()
        .zip(posteriors.data())
        .map(|(s, b)| (s - b).abs())
        .fold(0.0f64, f64::max);
    println!("streaming vs batch: max |diff| = {max_diff:e}");

    let dir = std::env::temp_dir().join("ctc-kws-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("random.kwsm");
    save_model(&model, &path).unwrap();
    let reloaded = load_model(&path).unwrap();
    println!(
        "saved and reloaded {} ({} bytes), configs equal: {}",
        path.display(),
        std::fs::metadata(&path).unwrap().len(),
        reloaded.config() == model.config()
    );
}
