//! Keywords, transcripts and blank-expanded label sequences.

use thiserror::Error;

use crate::alphabet::Alphabet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("keyword must not be empty")]
    EmptyKeyword,
    #[error("character {0:?} is not in the alphabet")]
    CharacterNotInAlphabet(char),
}

/// Search term for the keyword spotter. Nonempty; lowercased on ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Keyword(String);

impl Keyword {
    /// Characters outside the alphabet are only detectable once an alphabet
    /// is known; that check happens in [`expand_label`] and the scoring
    /// entry points. Construction rejects the empty string.
    pub fn new(text: &str) -> Result<Self, LabelError> {
        let lowered = text.to_lowercase();
        if lowered.is_empty() {
            return Err(LabelError::EmptyKeyword);
        }
        Ok(Keyword(lowered))
    }

    pub fn text(&self) -> &str {
        &self.0
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.0.chars()
    }

    pub fn char_count(&self) -> usize {
        self.0.chars().count()
    }
}

impl std::fmt::Display for Keyword {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Reference text for CTC label scoring. May be empty: the empty transcript
/// is the "no speech" hypothesis used by voice activity detection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Transcript(String);

impl Transcript {
    pub fn new(text: &str) -> Self {
        Transcript(text.to_lowercase())
    }

    pub fn empty() -> Self {
        Transcript(String::new())
    }

    pub fn text(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.0.chars()
    }
}

impl std::fmt::Display for Transcript {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Keyword with the blank interleaved: `[ε, k_1, ε, k_2, …, k_n, ε]`,
/// stored as alphabet indices. Always odd length, at least 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedLabel {
    states: Vec<usize>,
    blank: usize,
}

impl ExpandedLabel {
    /// State sequence, as indices into the alphabet.
    pub fn states(&self) -> &[usize] {
        &self.states
    }

    /// Number of lattice states `S = 2·n + 1`.
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn blank_index(&self) -> usize {
        self.blank
    }
}

/// Maps text characters to alphabet indices, failing on the first character
/// the alphabet does not contain.
pub(crate) fn char_indices(
    text: impl Iterator<Item = char>,
    alphabet: &Alphabet,
) -> Result<Vec<usize>, LabelError> {
    text.map(|c| {
        alphabet
            .index_of(c)
            .ok_or(LabelError::CharacterNotInAlphabet(c))
    })
    .collect()
}

/// Interleaves the blank around and between the given symbol indices.
pub(crate) fn interleave_blanks(indices: &[usize], blank: usize) -> Vec<usize> {
    let mut states = Vec::with_capacity(2 * indices.len() + 1);
    states.push(blank);
    for &idx in indices {
        states.push(idx);
        states.push(blank);
    }
    states
}

/// Expands a keyword into its blank-interleaved state sequence over the
/// given alphabet.
pub fn expand_label(keyword: &Keyword, alphabet: &Alphabet) -> Result<ExpandedLabel, LabelError> {
    let indices = char_indices(keyword.chars(), alphabet)?;
    Ok(ExpandedLabel {
        states: interleave_blanks(&indices, alphabet.blank_index()),
        blank: alphabet.blank_index(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_alphabet() -> Alphabet {
        Alphabet::from_chars_with_blank_last("ab").unwrap()
    }

    #[test]
    fn expand_two_char_keyword() {
        let a = tiny_alphabet();
        let k = Keyword::new("ab").unwrap();
        let l = expand_label(&k, &a).unwrap();
        // blank index is 2 for {a, b, ε}
        assert_eq!(l.states(), &[2, 0, 2, 1, 2]);
        assert_eq!(l.num_states(), 5);
    }

    #[test]
    fn expand_single_char_keyword() {
        let a = Alphabet::from_chars_with_blank_last("a").unwrap();
        let k = Keyword::new("a").unwrap();
        let l = expand_label(&k, &a).unwrap();
        assert_eq!(l.states(), &[1, 0, 1]);
    }

    #[test]
    fn expand_repeated_char_keyword() {
        let a = Alphabet::from_chars_with_blank_last("a").unwrap();
        let k = Keyword::new("aa").unwrap();
        let l = expand_label(&k, &a).unwrap();
        assert_eq!(l.states(), &[1, 0, 1, 0, 1]);
    }

    #[test]
    fn unknown_character_is_named_in_error() {
        let a = tiny_alphabet();
        let k = Keyword::new("axb").unwrap();
        let err = expand_label(&k, &a).unwrap_err();
        assert_eq!(err, LabelError::CharacterNotInAlphabet('x'));
    }

    #[test]
    fn keyword_is_lowercased_and_nonempty() {
        assert_eq!(Keyword::new("OLIVIA").unwrap().text(), "olivia");
        assert_eq!(Keyword::new("").unwrap_err(), LabelError::EmptyKeyword);
    }

    #[test]
    fn transcript_may_be_empty() {
        let t = Transcript::empty();
        assert!(t.is_empty());
        assert_eq!(Transcript::new("Hey There").text(), "hey there");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn expansion_has_length_2n_plus_1(text in "[a-z]{1,32}") {
                let a = Alphabet::default();
                let k = Keyword::new(&text).unwrap();
                let l = expand_label(&k, &a).unwrap();
                prop_assert_eq!(l.num_states(), 2 * k.char_count() + 1);
            }

            #[test]
            fn blanks_and_characters_alternate(text in "[a-z' ]{1,32}") {
                let a = Alphabet::default();
                let k = Keyword::new(&text).unwrap();
                let l = expand_label(&k, &a).unwrap();
                let blank = a.blank_index();
                for (i, &s) in l.states().iter().enumerate() {
                    if i % 2 == 0 {
                        prop_assert_eq!(s, blank);
                    } else {
                        prop_assert_ne!(s, blank);
                    }
                }
                let chars: Vec<usize> = l.states().iter().copied()
                    .filter(|&s| s != blank)
                    .collect();
                let expected: Vec<usize> = k.chars()
                    .map(|c| a.index_of(c).unwrap())
                    .collect();
                prop_assert_eq!(chars, expected);
            }
        }
    }
}
