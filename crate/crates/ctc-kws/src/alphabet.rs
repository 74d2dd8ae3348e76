//! Output alphabet of the acoustic model, including the CTC blank.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Placeholder character used internally for the blank symbol. It never
/// appears in user-facing text; text containing it is rejected on lookup.
pub const BLANK_PLACEHOLDER: char = '\0';

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("alphabet is empty")]
    Empty,
    #[error("blank index {index} out of range for {len} symbols")]
    BlankOutOfRange { index: usize, len: usize },
    #[error("duplicate symbol {0:?} in alphabet")]
    DuplicateSymbol(char),
    #[error("blank placeholder appears at index {0}, expected only at the blank index")]
    StrayBlank(usize),
}

/// Ordered set of output symbols with a designated blank (ε) position.
///
/// The blank is stored as [`BLANK_PLACEHOLDER`] at `blank_index` and is not
/// addressable through [`Alphabet::index_of`]: it is an internal symbol of
/// the CTC lattice, never part of a keyword or transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
    blank_index: usize,
    space_index: Option<usize>,
    index_of: HashMap<char, usize>,
}

impl Alphabet {
    /// Builds an alphabet from its symbol list. `symbols[blank_index]` must
    /// be [`BLANK_PLACEHOLDER`]; every other symbol must be unique.
    pub fn new(symbols: Vec<char>, blank_index: usize) -> Result<Self, AlphabetError> {
        if symbols.is_empty() {
            return Err(AlphabetError::Empty);
        }
        if blank_index >= symbols.len() || symbols[blank_index] != BLANK_PLACEHOLDER {
            return Err(AlphabetError::BlankOutOfRange {
                index: blank_index,
                len: symbols.len(),
            });
        }
        let mut index_of = HashMap::with_capacity(symbols.len());
        let mut space_index = None;
        for (i, &c) in symbols.iter().enumerate() {
            if i == blank_index {
                continue;
            }
            if c == BLANK_PLACEHOLDER {
                return Err(AlphabetError::StrayBlank(i));
            }
            if index_of.insert(c, i).is_some() {
                return Err(AlphabetError::DuplicateSymbol(c));
            }
            if c == ' ' {
                space_index = Some(i);
            }
        }
        Ok(Alphabet {
            symbols,
            blank_index,
            space_index,
            index_of,
        })
    }

    /// Builds an alphabet from the character symbols with the blank appended
    /// as the final entry.
    pub fn from_chars_with_blank_last(chars: &str) -> Result<Self, AlphabetError> {
        let mut symbols: Vec<char> = chars.chars().collect();
        symbols.push(BLANK_PLACEHOLDER);
        let blank = symbols.len() - 1;
        Alphabet::new(symbols, blank)
    }

    /// Number of symbols, blank included.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blank_index(&self) -> usize {
        self.blank_index
    }

    pub fn space_index(&self) -> Option<usize> {
        self.space_index
    }

    /// Index of a text character. The blank is not reachable from text.
    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index_of.get(&c).copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.index_of.contains_key(&c)
    }

    /// Symbol at `index`; the blank position yields [`BLANK_PLACEHOLDER`].
    pub fn symbol_at(&self, index: usize) -> Option<char> {
        self.symbols.get(index).copied()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }
}

impl Default for Alphabet {
    /// `a`–`z`, space and apostrophe, with the blank in the final slot.
    /// The set is configuration, not a fixed property of the scoring
    /// algorithms; posterior and model files carry their own alphabet.
    fn default() -> Self {
        Alphabet::from_chars_with_blank_last("abcdefghijklmnopqrstuvwxyz '")
            .expect("default alphabet is well-formed")
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &c) in self.symbols.iter().enumerate() {
            if i == self.blank_index {
                f.write_str("<blank>")?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}
