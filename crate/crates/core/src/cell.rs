//! Cell addresses: finite words over the alphabet {1,2,3}.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{usage, Result};

/// Address of the level-`m` cell `F_{w1} ∘ … ∘ F_{wm}(S)`.
///
/// The empty word addresses the whole gasket.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CellWord(Vec<u8>);

impl CellWord {
    pub fn empty() -> Self {
        CellWord(Vec::new())
    }

    pub fn new(symbols: Vec<u8>) -> Result<Self> {
        if let Some(bad) = symbols.iter().find(|s| !(1..=3).contains(*s)) {
            return Err(usage!("cell symbol {bad} outside {{1,2,3}}"));
        }
        Ok(CellWord(symbols))
    }

    /// Parses `"123"`; the strings `""` and `"-"` give the empty word.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "-" {
            return Ok(Self::empty());
        }
        let symbols = text
            .chars()
            .map(|c| match c {
                '1' => Ok(1),
                '2' => Ok(2),
                '3' => Ok(3),
                other => Err(usage!("invalid cell symbol {other:?} in {text:?}")),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(CellWord(symbols))
    }

    /// The word `i i … i` of length `len`.
    pub fn repeated(symbol: u8, len: usize) -> Result<Self> {
        Self::new(alloc::vec![symbol; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn child(&self, symbol: u8) -> Self {
        debug_assert!((1..=3).contains(&symbol));
        let mut s = self.0.clone();
        s.push(symbol);
        CellWord(s)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(CellWord(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn prefix(&self, len: usize) -> Self {
        CellWord(self.0[..len.min(self.0.len())].to_vec())
    }

    /// Position among all words of the same length in lexicographic order.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0usize, |acc, &s| acc * 3 + (s as usize - 1))
    }

    /// Inverse of [`CellWord::index`].
    pub fn from_index(mut index: usize, len: usize) -> Self {
        let mut s = alloc::vec![1u8; len];
        for slot in s.iter_mut().rev() {
            *slot = (index % 3) as u8 + 1;
            index /= 3;
        }
        CellWord(s)
    }

    /// All words of length `len` in lexicographic order.
    pub fn all(len: usize) -> impl Iterator<Item = CellWord> {
        let count = 3usize.pow(len as u32);
        (0..count).map(move |i| CellWord::from_index(i, len))
    }
}

impl fmt::Display for CellWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl From<&CellWord> for String {
    fn from(w: &CellWord) -> String {
        alloc::format!("{w}")
    }
}
