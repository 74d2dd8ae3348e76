//! The `.ctcp` posterior file format: write, read back, validate.
//!
//! Run with: cargo run --example posterior_files

use ctc_kws::posterior::{read_posteriors, write_posteriors};
use ctc_kws::{Alphabet, PosteriorMatrix};

/// Posterior values on disk are 32-bit floats; building the matrix from
/// f32-valued numbers keeps the round trip bit-exact.
fn row(values: [f32; 4]) -> Vec<f64> {
    values.iter().map(|&v| f64::from(v)).collect()
}

fn main() {
    let alphabet = Alphabet::from_chars_with_blank_last("abc").unwrap();
    let matrix = PosteriorMatrix::from_rows(
        alphabet.clone(),
        &[
            row([0.7, 0.1, 0.1, 0.1]),
            row([0.05, 0.85, 0.05, 0.05]),
            row([0.0, 0.0, 0.0, 1.0]),
        ],
        0.03,
    )
    .unwrap();

    let dir = std::env::temp_dir().join("ctc-kws-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("demo.ctcp");
    write_posteriors(&matrix, &path).unwrap();
    println!(
        "wrote {} ({} bytes)",
        path.display(),
        std::fs::metadata(&path).unwrap().len()
    );

    let restored = read_posteriors(&path).unwrap();
    println!(
        "read back {} frames over {} symbols, round-trip equal: {}",
        restored.num_frames(),
        restored.num_symbols(),
        restored == matrix
    );
    println!("validation: {}", restored.validate());

    // a denormalized matrix fails validation with row detail
    let broken = PosteriorMatrix::from_rows(
        alphabet,
        &[vec![0.7, 0.1, 0.1, 0.1], vec![0.9, 0.9, 0.0, 0.0]],
        0.03,
    )
    .unwrap();
    print!("corrupted matrix: {}", broken.validate());
}
