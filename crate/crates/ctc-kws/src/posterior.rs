//! Per-frame probability distributions over the alphabet, plus the `.ctcp`
//! posterior file format.
//!
//! Files carry linear 32-bit floats; in memory the values are widened to
//! f64 (an exact conversion, so file round-trips stay bit-exact) and all
//! scoring converts to the natural-log domain on entry. Writing a matrix
//! whose values did not originate from 32-bit floats quantizes them.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::alphabet::{Alphabet, AlphabetError};

const MAGIC: &[u8; 4] = b"CTCP";
const VERSION: u32 = 1;

/// Row sums may drift from 1 by at most this much before validation fails.
pub const ROW_SUM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum PosteriorError {
    #[error("frame {frame} has {got} entries, expected {expected}")]
    RowLengthMismatch {
        frame: usize,
        got: usize,
        expected: usize,
    },
    #[error("not a posterior file (bad magic)")]
    BadMagic,
    #[error("unsupported posterior file version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated posterior file: expected {expected} more bytes of {section}")]
    Truncated {
        section: &'static str,
        expected: usize,
    },
    #[error("declared alphabet size {declared} does not match the {got} symbols present")]
    AlphabetSizeMismatch { declared: usize, got: usize },
    #[error("alphabet string is not valid UTF-8")]
    AlphabetNotUtf8,
    #[error("malformed alphabet: {0}")]
    Alphabet(#[from] AlphabetError),
    #[error("trailing data after posterior payload")]
    TrailingData,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// T frames of linear probabilities over the alphabet, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    alphabet: Alphabet,
    data: Vec<f64>,
    num_frames: usize,
    frame_duration: f64,
}

impl PosteriorMatrix {
    /// Builds a matrix from per-frame rows. Every row must have one entry
    /// per alphabet symbol.
    pub fn from_rows(
        alphabet: Alphabet,
        rows: &[Vec<f64>],
        frame_duration: f64,
    ) -> Result<Self, PosteriorError> {
        let width = alphabet.len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for (frame, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(PosteriorError::RowLengthMismatch {
                    frame,
                    got: row.len(),
                    expected: width,
                });
            }
            data.extend_from_slice(row);
        }
        Ok(PosteriorMatrix {
            alphabet,
            num_frames: rows.len(),
            data,
            frame_duration,
        })
    }

    /// Builds a matrix from a flat row-major buffer of `num_frames` rows.
    pub fn from_flat(
        alphabet: Alphabet,
        data: Vec<f64>,
        num_frames: usize,
        frame_duration: f64,
    ) -> Result<Self, PosteriorError> {
        if data.len() != num_frames * alphabet.len() {
            return Err(PosteriorError::RowLengthMismatch {
                frame: num_frames,
                got: data.len(),
                expected: num_frames * alphabet.len(),
            });
        }
        Ok(PosteriorMatrix {
            alphabet,
            data,
            num_frames,
            frame_duration,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Number of frames T.
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    /// Number of symbols per frame.
    pub fn num_symbols(&self) -> usize {
        self.alphabet.len()
    }

    /// Seconds of audio each frame covers.
    pub fn frame_duration(&self) -> f64 {
        self.frame_duration
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        let w = self.alphabet.len();
        &self.data[frame * w..(frame + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.alphabet.len())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Checks that every entry lies in [0, 1] and every row sums to 1
    /// within [`ROW_SUM_TOLERANCE`]. Report-valued: an empty matrix passes.
    pub fn validate(&self) -> ValidationReport {
        let mut bad_rows = Vec::new();
        for (frame, row) in self.rows().enumerate() {
            let mut sum = 0.0f64;
            let mut out_of_range = false;
            for &v in row {
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    out_of_range = true;
                }
                sum += v;
            }
            let sum_error = (sum - 1.0).abs();
            if out_of_range || sum_error > ROW_SUM_TOLERANCE {
                bad_rows.push(RowIssue {
                    frame,
                    sum,
                    out_of_range,
                });
            }
        }
        ValidationReport {
            frames_checked: self.num_frames,
            bad_rows,
        }
    }
}

/// Outcome of [`PosteriorMatrix::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub frames_checked: usize,
    pub bad_rows: Vec<RowIssue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    pub frame: usize,
    pub sum: f64,
    pub out_of_range: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.bad_rows.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            write!(f, "ok: {} frames valid", self.frames_checked)
        } else {
            writeln!(
                f,
                "invalid: {} of {} frames failed",
                self.bad_rows.len(),
                self.frames_checked
            )?;
            for issue in &self.bad_rows {
                write!(f, "  frame {}: sum {:.6}", issue.frame, issue.sum)?;
                if issue.out_of_range {
                    write!(f, " (entries outside [0, 1])")?;
                }
                writeln!(f)?;
            }
            Ok(())
        }
    }
}

/// Writes a posterior matrix in the binary `.ctcp` format.
///
/// Layout, all little-endian: magic `CTCP`, u32 version, u32 T, u32 A,
/// u32 alphabet byte length, the alphabet UTF-8 string with the blank
/// encoded as byte 0x00, u32 blank index, f64 frame duration, then T×A
/// f32 probabilities row-major.
pub fn write_posteriors(
    matrix: &PosteriorMatrix,
    path: impl AsRef<Path>,
) -> Result<(), PosteriorError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_posteriors_to(matrix, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_posteriors_to(
    matrix: &PosteriorMatrix,
    w: &mut impl Write,
) -> Result<(), PosteriorError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(matrix.num_frames as u32).to_le_bytes())?;
    w.write_all(&(matrix.num_symbols() as u32).to_le_bytes())?;
    let alphabet_bytes: String = matrix.alphabet.symbols().iter().collect();
    let alphabet_bytes = alphabet_bytes.as_bytes();
    w.write_all(&(alphabet_bytes.len() as u32).to_le_bytes())?;
    w.write_all(alphabet_bytes)?;
    w.write_all(&(matrix.alphabet.blank_index() as u32).to_le_bytes())?;
    w.write_all(&matrix.frame_duration.to_le_bytes())?;
    for &v in &matrix.data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Reads a `.ctcp` posterior file. See [`write_posteriors`] for the layout.
pub fn read_posteriors(path: impl AsRef<Path>) -> Result<PosteriorMatrix, PosteriorError> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    read_posteriors_from(&mut r)
}

pub fn read_posteriors_from(r: &mut impl Read) -> Result<PosteriorMatrix, PosteriorError> {
    let mut magic = [0u8; 4];
    read_exact_or(r, &mut magic, "header")?;
    if &magic != MAGIC {
        return Err(PosteriorError::BadMagic);
    }
    let version = read_u32(r, "header")?;
    if version != VERSION {
        return Err(PosteriorError::UnsupportedVersion(version));
    }
    let num_frames = read_u32(r, "header")? as usize;
    let num_symbols = read_u32(r, "header")? as usize;
    let alphabet_len = read_u32(r, "header")? as usize;
    let mut alphabet_bytes = vec![0u8; alphabet_len];
    read_exact_or(r, &mut alphabet_bytes, "alphabet")?;
    let alphabet_str =
        String::from_utf8(alphabet_bytes).map_err(|_| PosteriorError::AlphabetNotUtf8)?;
    let symbols: Vec<char> = alphabet_str.chars().collect();
    if symbols.len() != num_symbols {
        return Err(PosteriorError::AlphabetSizeMismatch {
            declared: num_symbols,
            got: symbols.len(),
        });
    }
    let blank_index = read_u32(r, "header")? as usize;
    let alphabet = Alphabet::new(symbols, blank_index)?;
    let mut duration_bytes = [0u8; 8];
    read_exact_or(r, &mut duration_bytes, "header")?;
    let frame_duration = f64::from_le_bytes(duration_bytes);

    let expected = num_frames * num_symbols;
    let mut payload = vec![0u8; expected * 4];
    if let Err(e) = r.read_exact(&mut payload) {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            return Err(PosteriorError::Truncated {
                section: "payload",
                expected: expected * 4,
            });
        }
        return Err(PosteriorError::Io(e));
    }
    let mut one = [0u8; 1];
    match r.read(&mut one)? {
        0 => {}
        _ => return Err(PosteriorError::TrailingData),
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    PosteriorMatrix::from_flat(alphabet, data, num_frames, frame_duration)
}

fn read_u32(r: &mut impl Read, section: &'static str) -> Result<u32, PosteriorError> {
    let mut buf = [0u8; 4];
    read_exact_or(r, &mut buf, section)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact_or(
    r: &mut impl Read,
    buf: &mut [u8],
    section: &'static str,
) -> Result<(), PosteriorError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            PosteriorError::Truncated {
                section,
                expected: buf.len(),
            }
        } else {
            PosteriorError::Io(e)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn ab_alphabet() -> Alphabet {
        Alphabet::from_chars_with_blank_last("ab").unwrap()
    }

    #[test]
    fn validation_passes_on_normalized_rows() {
        let m = PosteriorMatrix::from_rows(
            Alphabet::from_chars_with_blank_last("a").unwrap(),
            &[vec![0.6, 0.4]],
            0.01,
        )
        .unwrap();
        assert!(m.validate().passed());
    }

    #[test]
    fn validation_reports_offending_row_and_sum() {
        let m = PosteriorMatrix::from_rows(
            Alphabet::from_chars_with_blank_last("a").unwrap(),
            &[vec![0.9, 0.2]],
            0.01,
        )
        .unwrap();
        let report = m.validate();
        assert!(!report.passed());
        assert_eq!(report.bad_rows.len(), 1);
        assert_eq!(report.bad_rows[0].frame, 0);
        assert!((report.bad_rows[0].sum - 1.1).abs() < 1e-6);
    }

    #[test]
    fn empty_matrix_passes_vacuously() {
        let m = PosteriorMatrix::from_rows(ab_alphabet(), &[], 0.01).unwrap();
        assert!(m.validate().passed());
        assert_eq!(m.num_frames(), 0);
    }

    #[test]
    fn entries_outside_unit_interval_flagged() {
        let m = PosteriorMatrix::from_rows(
            Alphabet::from_chars_with_blank_last("a").unwrap(),
            &[vec![1.5, -0.5]],
            0.01,
        )
        .unwrap();
        let report = m.validate();
        assert!(!report.passed());
        assert!(report.bad_rows[0].out_of_range);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err =
            PosteriorMatrix::from_rows(ab_alphabet(), &[vec![0.1, 0.2, 0.7], vec![0.5, 0.5]], 0.01)
                .unwrap_err();
        assert!(matches!(
            err,
            PosteriorError::RowLengthMismatch {
                frame: 1,
                got: 2,
                expected: 3
            }
        ));
    }

    /// Rows whose values all originate from 32-bit floats.
    fn f32_rows(raw: &[Vec<f32>]) -> Vec<Vec<f64>> {
        raw.iter()
            .map(|r| r.iter().map(|&v| f64::from(v)).collect())
            .collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.ctcp");
        let m = PosteriorMatrix::from_rows(
            ab_alphabet(),
            &f32_rows(&[
                vec![0.1, 0.2, 0.7],
                vec![0.3, 0.3, 0.4],
                vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            ]),
            0.03,
        )
        .unwrap();
        write_posteriors(&m, &path).unwrap();
        let back = read_posteriors(&path).unwrap();
        assert_eq!(back.alphabet(), m.alphabet());
        assert_eq!(back.frame_duration(), m.frame_duration());
        let original_bits: Vec<u64> = m.data().iter().map(|v| v.to_bits()).collect();
        let restored_bits: Vec<u64> = back.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(original_bits, restored_bits);
    }

    #[test]
    fn bad_magic_detected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.ctcp");
        std::fs::write(&path, b"NOPE00000000").unwrap();
        assert!(matches!(
            read_posteriors(&path).unwrap_err(),
            PosteriorError::BadMagic
        ));
    }

    #[test]
    fn truncated_payload_detected() {
        let m =
            PosteriorMatrix::from_rows(ab_alphabet(), &vec![vec![0.1, 0.2, 0.7]; 5], 0.03).unwrap();
        let mut bytes = Vec::new();
        write_posteriors_to(&m, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 3 * 4); // drop most of the final row
        let err = read_posteriors_from(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(
            err,
            PosteriorError::Truncated {
                section: "payload",
                ..
            }
        ));
    }

    #[test]
    fn version_mismatch_detected() {
        let m = PosteriorMatrix::from_rows(ab_alphabet(), &[], 0.03).unwrap();
        let mut bytes = Vec::new();
        write_posteriors_to(&m, &mut bytes).unwrap();
        bytes[4] = 9;
        let err = read_posteriors_from(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(err, PosteriorError::UnsupportedVersion(9)));
    }

    #[test]
    fn alphabet_size_mismatch_detected() {
        let m = PosteriorMatrix::from_rows(ab_alphabet(), &[], 0.03).unwrap();
        let mut bytes = Vec::new();
        write_posteriors_to(&m, &mut bytes).unwrap();
        bytes[12] = 7; // declared symbol count no longer matches the string
        let err = read_posteriors_from(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(
            err,
            PosteriorError::AlphabetSizeMismatch {
                declared: 7,
                got: 3
            }
        ));
    }

    #[test]
    fn trailing_bytes_detected() {
        let m = PosteriorMatrix::from_rows(ab_alphabet(), &[vec![0.5, 0.25, 0.25]], 0.03).unwrap();
        let mut bytes = Vec::new();
        write_posteriors_to(&m, &mut bytes).unwrap();
        bytes.push(0);
        let err = read_posteriors_from(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(err, PosteriorError::TrailingData));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip_preserves_everything(
                raw in proptest::collection::vec(proptest::collection::vec(0.0f32..1.0, 3), 0..12),
                duration in 0.001f64..0.1,
            ) {
                let m = PosteriorMatrix::from_rows(ab_alphabet(), &f32_rows(&raw), duration).unwrap();
                let mut bytes = Vec::new();
                write_posteriors_to(&m, &mut bytes).unwrap();
                let back = read_posteriors_from(&mut bytes.as_slice()).unwrap();
                prop_assert_eq!(&back, &m);
                let original_bits: Vec<u64> = m.data().iter().map(|v| v.to_bits()).collect();
                let restored_bits: Vec<u64> = back.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(original_bits, restored_bits);
            }
        }
    }
}
