//! Binary words, the canonical dense family `s_n`, the digraph G0 and finite
//! Cantor schemes.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::systems::{Cell, SystemHandle};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("invalid character {0:?} in binary word")]
    BadChar(char),
    #[error("words have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("word {word} does not lie in the cylinder of s_{n}")]
    NotInCylinder { n: usize, word: Word },
    #[error("depth {depth} is too small, need at least {needed}")]
    DepthTooSmall { depth: usize, needed: usize },
}

/// A finite binary string, most significant (index 0) first.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<bool>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        Word(bits.into_iter().collect())
    }

    pub fn zeros(len: usize) -> Self {
        Word(vec![false; len])
    }

    /// The word of length `len` spelling `value` in binary.
    pub fn from_value(value: u64, len: usize) -> Self {
        assert!(len <= 64 && (len == 64 || value >> len == 0));
        Word((0..len).map(|i| (value >> (len - 1 - i)) & 1 == 1).collect())
    }

    /// Binary value of the word. Panics on words longer than 64 bits.
    pub fn value(&self) -> u64 {
        assert!(self.len() <= 64, "word too long for a u64 value");
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn child(&self, bit: bool) -> Word {
        let mut w = self.clone();
        w.push(bit);
        w
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word(self.0[..len].to_vec())
    }

    pub fn suffix_from(&self, start: usize) -> Word {
        Word(self.0[start.min(self.len())..].to_vec())
    }

    /// `self ⊑ other`.
    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Index of the first disagreement, if the words disagree inside their
    /// common length.
    pub fn first_difference(&self, other: &Word) -> Option<usize> {
        self.0.iter().zip(&other.0).position(|(a, b)| a != b)
    }

    pub fn flip(&self, i: usize) -> Word {
        let mut w = self.clone();
        w.0[i] = !w.0[i];
        w
    }

    /// Position of the word in the length-lex enumeration `ε, 0, 1, 00, ...`.
    pub fn length_lex_index(&self) -> Option<u64> {
        if self.len() >= 64 {
            return None;
        }
        u64::try_from((1u128 << self.len()) - 1 + u128::from(self.value())).ok()
    }

    /// The `index`-th word in length-lex order.
    pub fn nth_length_lex(index: u64) -> Word {
        let len = 63 - (index + 1).leading_zeros() as usize;
        Word::from_value(index + 1 - (1u64 << len), len)
    }

    /// All words of length `len` in increasing binary order.
    pub fn all_of_length(len: usize) -> impl Iterator<Item = Word> {
        assert!(len < 64);
        (0..1u64 << len).map(move |v| Word::from_value(v, len))
    }
}

impl Ord for Word {
    /// Length-lex order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for Word {
    type Err = WordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(WordError::BadChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `s_n`: the `n`-th length-lex word padded on the right with zeros to
/// length `n`.
pub fn canonical_s(n: usize) -> Word {
    let mut w = Word::nth_length_lex(n as u64);
    debug_assert!(w.len() <= n);
    w.0.resize(n, false);
    w
}

/// The least `n` with `s ⊑ s_n`.
///
/// `s_n` has length `n`, so `n ≥ |s|`. Writing `s_n = t_n 0^(n - |t_n|)`,
/// either `t_n = s` (so `n` is the length-lex index of `s`) or `t_n` is a
/// proper prefix of `s` and the rest of `s` is zeros. The minimum over
/// these candidates is the answer.
pub fn density_witness(s: &Word) -> usize {
    let mut best: Option<u64> = None;
    for cut in 0..=s.len() {
        if s.bits()[cut..].iter().any(|&b| b) {
            continue;
        }
        let Some(index) = s.prefix(cut).length_lex_index() else {
            continue;
        };
        if index >= s.len() as u64 && best.is_none_or(|b| index < b) {
            best = Some(index);
        }
    }
    best.expect("density witness does not fit in u64") as usize
}

/// Depth-|u| truncation of G0: `u = s_n 0 w` and `v = s_n 1 w` for some
/// `n < |u|`.
pub fn is_g0_edge(u: &Word, v: &Word) -> Result<bool, WordError> {
    if u.len() != v.len() {
        return Err(WordError::LengthMismatch(u.len(), v.len()));
    }
    Ok(g0_edge_level(u, v).is_some())
}

/// The level `n` of a G0 edge `(s_n 0 w, s_n 1 w)`, if `(u, v)` is one.
pub fn g0_edge_level(u: &Word, v: &Word) -> Option<usize> {
    if u.len() != v.len() {
        return None;
    }
    let mut diffs = u.bits().iter().zip(v.bits()).enumerate().filter(|(_, (a, b))| a != b);
    let (n, (&a, &b)) = diffs.next()?;
    if diffs.next().is_some() || a || !b {
        return None;
    }
    (u.prefix(n) == canonical_s(n)).then_some(n)
}

/// Symmetric closure of G0 at finite depth.
pub fn is_g0_adjacent(u: &Word, v: &Word) -> Result<bool, WordError> {
    Ok(is_g0_edge(u, v)? || is_g0_edge(v, u)?)
}

/// The involution of `⟦s_n⟧` exchanging `s_n 0 c` and `s_n 1 c`.
pub fn g0_involution(n: usize, x: &Word) -> Result<Word, WordError> {
    if x.len() <= n || x.prefix(n) != canonical_s(n) {
        return Err(WordError::NotInCylinder { n, word: x.clone() });
    }
    Ok(x.flip(n))
}

/// A G0 edge of length `depth` with both endpoints inside `⟦s⟧`.
pub fn edge_in_cylinder(s: &Word, depth: usize) -> Result<(Word, Word), WordError> {
    let n = density_witness(s);
    if depth < n + 1 {
        return Err(WordError::DepthTooSmall { depth, needed: n + 1 });
    }
    let base = canonical_s(n);
    let tail = Word::zeros(depth - n - 1);
    Ok((base.child(false).concat(&tail), base.child(true).concat(&tail)))
}

/// All G0 edges `(u, v)` between words of length `depth`, ordered by level
/// then by tail.
pub fn g0_edges_at_depth(depth: usize) -> Vec<(usize, Word, Word)> {
    let mut out = Vec::new();
    for n in 0..depth {
        let base = canonical_s(n);
        for tail in Word::all_of_length(depth - n - 1) {
            out.push((
                n,
                base.child(false).concat(&tail),
                base.child(true).concat(&tail),
            ));
        }
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("scheme level {level} has {got} cells, expected {expected}")]
    LevelSize {
        level: usize,
        got: usize,
        expected: usize,
    },
    #[error("word {0} is outside the scheme")]
    OutOfRange(Word),
}

/// A complete binary tree of cells of the given depth.
///
/// `levels[d][v]` is the cell of the length-`d` word with binary value `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheme {
    levels: Vec<Vec<Cell>>,
}

impl Scheme {
    pub fn from_levels(levels: Vec<Vec<Cell>>) -> Result<Self, SchemeError> {
        if levels.is_empty() {
            return Err(SchemeError::LevelSize {
                level: 0,
                got: 0,
                expected: 1,
            });
        }
        for (d, level) in levels.iter().enumerate() {
            if level.len() != 1usize << d {
                return Err(SchemeError::LevelSize {
                    level: d,
                    got: level.len(),
                    expected: 1 << d,
                });
            }
        }
        Ok(Scheme { levels })
    }

    /// Builds a scheme by evaluating `cell_of` on every word of length at
    /// most `depth`.
    pub fn build(depth: usize, mut cell_of: impl FnMut(&Word) -> Cell) -> Self {
        let levels = (0..=depth)
            .map(|d| Word::all_of_length(d).map(|w| cell_of(&w)).collect())
            .collect();
        Scheme { levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn cell(&self, w: &Word) -> Option<&Cell> {
        if w.len() > self.depth() {
            return None;
        }
        self.levels[w.len()].get(w.value() as usize)
    }

    pub fn level(&self, d: usize) -> &[Cell] {
        &self.levels[d]
    }

    pub fn leaves(&self) -> &[Cell] {
        &self.levels[self.depth()]
    }

    pub fn leaf_words(&self) -> impl Iterator<Item = Word> {
        Word::all_of_length(self.depth())
    }

    /// Every `(word, cell)` entry, level by level.
    pub fn entries(&self) -> impl Iterator<Item = (Word, &Cell)> {
        self.levels.iter().enumerate().flat_map(|(d, level)| {
            level
                .iter()
                .enumerate()
                .map(move |(v, c)| (Word::from_value(v as u64, d), c))
        })
    }

    pub fn set_cell(&mut self, w: &Word, cell: Cell) -> Result<(), SchemeError> {
        if w.len() > self.depth() {
            return Err(SchemeError::OutOfRange(w.clone()));
        }
        self.levels[w.len()][w.value() as usize] = cell;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The cell is not valid for the system.
    InvalidCell { word: Word, reason: String },
    NotNested { word: Word, bit: bool },
    NotDisjoint { word: Word },
    NotShrinking { word: Word },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidCell { word, reason } => {
                write!(f, "cell at \"{word}\" is invalid: {reason}")
            }
            Violation::NotNested { word, bit } => {
                write!(f, "cell at \"{word}{}\" is not inside its parent", u8::from(*bit))
            }
            Violation::NotDisjoint { word } => {
                write!(f, "children of \"{word}\" are not disjoint")
            }
            Violation::NotShrinking { word } => {
                write!(f, "cell at \"{word}\" has diameter above 2^-{}", word.len())
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks nestedness, sibling disjointness and shrinking of every cell.
pub fn validate_scheme(sch: &Scheme, sys: &SystemHandle) -> ValidationReport {
    let mut violations = Vec::new();
    for (w, cell) in sch.entries() {
        if let Err(e) = sys.check_cell(cell) {
            violations.push(Violation::InvalidCell {
                word: w.clone(),
                reason: e.to_string(),
            });
            continue;
        }
        if !cell.diameter_at_most_pow2(w.len()) {
            violations.push(Violation::NotShrinking { word: w.clone() });
        }
        if w.len() == sch.depth() {
            continue;
        }
        let left = sch.cell(&w.child(false)).expect("child in range");
        let right = sch.cell(&w.child(true)).expect("child in range");
        for (bit, child) in [(false, left), (true, right)] {
            if !child.is_subset_of(cell) {
                violations.push(Violation::NotNested {
                    word: w.clone(),
                    bit,
                });
            }
        }
        if !left.is_disjoint_from(right) {
            violations.push(Violation::NotDisjoint { word: w });
        }
    }
    ValidationReport { violations }
}
