//! Finitely presented dynamical systems and exact evaluation over cells.
//!
//! Three systems are supported: the full one-sided shift on `{0,1}^N`, a
//! subshift of finite type given by forbidden words, and the tent map
//! `T(x) = 1 - |2x - 1|` on `[0, 1]`. Sequence spaces carry the metric
//! `d(x, y) = 2^-min{i : x_i != y_i}`; the interval carries `|x - y|`.
//!
//! A symbolic cell is a [`Pattern`]: a finite string over `0`, `1` and the
//! wildcard `*`, standing for every sequence that agrees with it on the
//! determined positions. A pattern without wildcards is a cylinder.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::cantor::Word;
use crate::dyadic::Dyadic;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("cell kind does not match system {system}")]
    KindMismatch { system: String },
    #[error("invalid interval [{lo}, {hi}]")]
    BadInterval { lo: Dyadic, hi: Dyadic },
    #[error("pattern {pattern} contains forbidden word {forbidden}")]
    Forbidden { pattern: String, forbidden: Word },
    #[error("itinerary cells exist only for the tent map")]
    NotTent,
    #[error("subshift {0} is empty")]
    EmptyShift(String),
    #[error("forbidden word list is too long-ranged (max length {0}, limit 20)")]
    ForbiddenTooLong(usize),
    #[error("unknown system {0:?}: expected shift, tent or sft:<path>")]
    UnknownSystem(String),
    #[error("invalid system spec: {0}")]
    BadSpec(String),
    #[error("cannot read system spec {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid cell {0:?}")]
    BadCell(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemKind {
    FullShift,
    Sft { forbidden: Vec<Word> },
    Tent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemHandle {
    pub kind: SystemKind,
    pub name: String,
}

/// Key-value description of a system, as stored in system spec files and
/// certificate headers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbidden: Vec<String>,
    pub kind: String,
    pub name: String,
}

impl SystemHandle {
    pub fn full_shift() -> Self {
        SystemHandle {
            kind: SystemKind::FullShift,
            name: "shift".into(),
        }
    }

    pub fn tent() -> Self {
        SystemHandle {
            kind: SystemKind::Tent,
            name: "tent".into(),
        }
    }

    pub fn sft(name: impl Into<String>, forbidden: Vec<Word>) -> Result<Self, SystemError> {
        let name = name.into();
        if !sft_is_nonempty(&forbidden)? {
            return Err(SystemError::EmptyShift(name));
        }
        Ok(SystemHandle {
            kind: SystemKind::Sft { forbidden },
            name,
        })
    }

    pub fn is_symbolic(&self) -> bool {
        !matches!(self.kind, SystemKind::Tent)
    }

    /// Resolves a CLI system reference: `shift`, `tent` or `sft:<path>`.
    pub fn from_reference(reference: &str) -> Result<Self, SystemError> {
        match reference {
            "shift" => Ok(SystemHandle::full_shift()),
            "tent" => Ok(SystemHandle::tent()),
            other => match other.strip_prefix("sft:") {
                Some(path) => SystemHandle::load(Path::new(path)),
                None => Err(SystemError::UnknownSystem(other.to_string())),
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self, SystemError> {
        let text = fs::read_to_string(path).map_err(|source| SystemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let spec: SystemSpec =
            toml::from_str(&text).map_err(|e| SystemError::BadSpec(e.message().to_string()))?;
        SystemHandle::from_spec(&spec)
    }

    pub fn from_spec(spec: &SystemSpec) -> Result<Self, SystemError> {
        let no_words = || {
            if spec.forbidden.is_empty() {
                Ok(())
            } else {
                Err(SystemError::BadSpec(format!(
                    "{} takes no forbidden words",
                    spec.kind
                )))
            }
        };
        match spec.kind.as_str() {
            "shift" => {
                no_words()?;
                Ok(SystemHandle {
                    kind: SystemKind::FullShift,
                    name: spec.name.clone(),
                })
            }
            "tent" => {
                no_words()?;
                Ok(SystemHandle {
                    kind: SystemKind::Tent,
                    name: spec.name.clone(),
                })
            }
            "sft" => {
                let words = spec
                    .forbidden
                    .iter()
                    .map(|s| s.parse::<Word>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| SystemError::BadSpec(e.to_string()))?;
                SystemHandle::sft(spec.name.clone(), words)
            }
            other => Err(SystemError::BadSpec(format!("unknown kind {other:?}"))),
        }
    }

    pub fn spec(&self) -> SystemSpec {
        let (kind, forbidden) = match &self.kind {
            SystemKind::FullShift => ("shift", Vec::new()),
            SystemKind::Tent => ("tent", Vec::new()),
            SystemKind::Sft { forbidden } => {
                ("sft", forbidden.iter().map(Word::to_string).collect())
            }
        };
        SystemSpec {
            forbidden,
            kind: kind.into(),
            name: self.name.clone(),
        }
    }

    /// Checks that `c` is a cell of this system.
    pub fn check_cell(&self, c: &Cell) -> Result<(), SystemError> {
        match (&self.kind, c) {
            (SystemKind::Tent, Cell::Interval(i)) => i.check(),
            (SystemKind::FullShift, Cell::Symbolic(_)) => Ok(()),
            (SystemKind::Sft { forbidden }, Cell::Symbolic(p)) => {
                match forbidden.iter().find(|f| p.contains_determined(f)) {
                    Some(f) => Err(SystemError::Forbidden {
                        pattern: p.to_string(),
                        forbidden: f.clone(),
                    }),
                    None => Ok(()),
                }
            }
            _ => Err(SystemError::KindMismatch {
                system: self.name.clone(),
            }),
        }
    }

    /// Parses a cell in this system's notation: a pattern over `0`, `1`,
    /// `*` for symbolic systems; `[lo,hi]` with dyadic endpoints or
    /// `itin:<word>` for the tent map.
    pub fn parse_cell(&self, text: &str) -> Result<Cell, SystemError> {
        let bad = || SystemError::BadCell(text.to_string());
        let cell = if self.is_symbolic() {
            Cell::Symbolic(text.parse().map_err(|_| bad())?)
        } else if let Some(word) = text.strip_prefix("itin:") {
            itinerary_cell(self, &word.parse().map_err(|_| bad())?)?
        } else {
            let inner = text
                .strip_prefix('[')
                .and_then(|t| t.strip_suffix(']'))
                .ok_or_else(bad)?;
            let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
            Cell::Interval(Interval {
                lo: lo.trim().parse().map_err(|_| bad())?,
                hi: hi.trim().parse().map_err(|_| bad())?,
            })
        };
        self.check_cell(&cell)?;
        Ok(cell)
    }
}

/// Exact nonemptiness test for a subshift of finite type: the shift is
/// nonempty iff the graph of admissible words of length `M - 1` (with
/// edges given by admissible words of length `M`) contains a cycle.
fn sft_is_nonempty(forbidden: &[Word]) -> Result<bool, SystemError> {
    if forbidden.iter().any(Word::is_empty) {
        return Ok(false);
    }
    let max = forbidden.iter().map(Word::len).max().unwrap_or(0);
    if max > 20 {
        return Err(SystemError::ForbiddenTooLong(max));
    }
    let admissible = |w: &Word| !forbidden.iter().any(|f| contains_factor(w.bits(), f.bits()));
    if max <= 1 {
        return Ok([false, true]
            .iter()
            .any(|&b| admissible(&Word::from_bits([b]))));
    }
    let k = max - 1;
    let mut alive: Vec<bool> = Word::all_of_length(k).map(|w| admissible(&w)).collect();
    let mask = (1u64 << k) - 1;
    loop {
        let mut changed = false;
        for v in 0..alive.len() {
            if !alive[v] {
                continue;
            }
            let has_successor = [0u64, 1].iter().any(|&b| {
                let next = ((v as u64) << 1 | b) & mask;
                let edge = Word::from_value((v as u64) << 1 | b, k + 1);
                alive[next as usize] && admissible(&edge)
            });
            if !has_successor {
                alive[v] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(alive.iter().any(|&a| a))
}

fn contains_factor(hay: &[bool], needle: &[bool]) -> bool {
    needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

/// A finite string over `0`, `1` and `*`; positions past its end are free.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Pattern(Vec<Option<bool>>);

impl Pattern {
    pub fn cylinder(w: &Word) -> Self {
        Pattern(w.bits().iter().map(|&b| Some(b)).collect())
    }

    pub fn from_symbols(symbols: Vec<Option<bool>>) -> Self {
        Pattern(symbols)
    }

    pub fn symbols(&self) -> &[Option<bool>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Length of the fully determined prefix.
    pub fn determined_prefix_len(&self) -> usize {
        self.0.iter().position(Option::is_none).unwrap_or(self.0.len())
    }

    pub fn determined_prefix(&self) -> Word {
        Word::from_bits(self.0[..self.determined_prefix_len()].iter().map(|b| b.unwrap()))
    }

    pub fn shifted(&self, m: usize) -> Pattern {
        Pattern(self.0[m.min(self.0.len())..].to_vec())
    }

    /// Whether `w` occurs inside a run of determined symbols.
    pub fn contains_determined(&self, w: &Word) -> bool {
        self.0
            .split(Option::is_none)
            .any(|run| {
                let bits: Vec<bool> = run.iter().map(|b| b.unwrap()).collect();
                contains_factor(&bits, w.bits())
            })
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(match s {
                Some(false) => "0",
                Some(true) => "1",
                None => "*",
            })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for Pattern {
    type Err = SystemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(Some(false)),
                '1' => Ok(Some(true)),
                '*' => Ok(None),
                _ => Err(SystemError::BadCell(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Pattern)
    }
}

/// Closed interval with dyadic endpoints.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub hi: Dyadic,
    pub lo: Dyadic,
}

impl Interval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        Interval { hi, lo }
    }

    pub fn unit() -> Self {
        Interval::new(Dyadic::zero(), Dyadic::one())
    }

    pub fn length(&self) -> Dyadic {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Dyadic) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    fn check(&self) -> Result<(), SystemError> {
        if self.lo.is_negative() || self.lo > self.hi || self.hi > Dyadic::one() {
            return Err(SystemError::BadInterval {
                lo: self.lo.clone(),
                hi: self.hi.clone(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// A closed region of the phase space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cell {
    Symbolic(Pattern),
    Interval(Interval),
}

impl Cell {
    pub fn cylinder(w: &Word) -> Self {
        Cell::Symbolic(Pattern::cylinder(w))
    }

    pub fn interval(lo: Dyadic, hi: Dyadic) -> Self {
        Cell::Interval(Interval::new(lo, hi))
    }

    pub fn is_subset_of(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Symbolic(a), Cell::Symbolic(b)) => b
                .symbols()
                .iter()
                .enumerate()
                .all(|(i, s)| s.is_none() || a.symbols().get(i).copied().flatten() == *s),
            (Cell::Interval(a), Cell::Interval(b)) => b.lo <= a.lo && a.hi <= b.hi,
            _ => false,
        }
    }

    /// Closed cells sharing an endpoint are not disjoint.
    pub fn is_disjoint_from(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Symbolic(a), Cell::Symbolic(b)) => a
                .symbols()
                .iter()
                .zip(b.symbols())
                .any(|(x, y)| matches!((x, y), (Some(p), Some(q)) if p != q)),
            (Cell::Interval(a), Cell::Interval(b)) => a.hi < b.lo || b.hi < a.lo,
            _ => false,
        }
    }

    /// Whether the diameter is at most `2^-k`.
    pub fn diameter_at_most_pow2(&self, k: usize) -> bool {
        match self {
            Cell::Symbolic(p) => p.determined_prefix_len() >= k,
            Cell::Interval(i) => i.length() <= Dyadic::pow2_neg(k as u32),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Symbolic(p) => write!(f, "{p}"),
            Cell::Interval(i) => write!(f, "[{},{}]", i.lo, i.hi),
        }
    }
}

/// Cells serialize as a pattern string, or as `{"hi": .., "lo": ..}`.
impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Symbolic(p) => serializer.collect_str(p),
            Cell::Interval(i) => i.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pattern(String),
            Interval(Interval),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Pattern(s) => s
                .parse()
                .map(Cell::Symbolic)
                .map_err(serde::de::Error::custom),
            Repr::Interval(i) => Ok(Cell::Interval(i)),
        }
    }
}

/// Bounds on `d(x, y)` valid for every `x` in one cell and `y` in another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistBound {
    pub lower: Dyadic,
    pub upper: Dyadic,
}

/// `T(x) = 1 - |2x - 1|`.
pub fn tent_point(x: &Dyadic) -> Dyadic {
    let two_x = x.double();
    if *x <= Dyadic::new(1, 1) {
        two_x
    } else {
        &Dyadic::new(2, 0) - &two_x
    }
}

fn tent_interval(i: &Interval) -> Interval {
    let half = Dyadic::new(1, 1);
    let two = Dyadic::new(2, 0);
    if i.hi <= half {
        Interval::new(i.lo.double(), i.hi.double())
    } else if i.lo >= half {
        Interval::new(&two - &i.hi.double(), &two - &i.lo.double())
    } else {
        let left = i.lo.double();
        let right = &two - &i.hi.double();
        Interval::new(Dyadic::min_of(&left, &right), Dyadic::one())
    }
}

/// A cell containing `f(x)` for every `x` in `c`.
pub fn step_cell(sys: &SystemHandle, c: &Cell) -> Result<Cell, SystemError> {
    sys.check_cell(c)?;
    Ok(match c {
        Cell::Symbolic(p) => Cell::Symbolic(p.shifted(1)),
        Cell::Interval(i) => Cell::Interval(tent_interval(i)),
    })
}

/// `m`-fold composition of [`step_cell`].
pub fn orbit_cell(sys: &SystemHandle, c: &Cell, m: usize) -> Result<Cell, SystemError> {
    sys.check_cell(c)?;
    Ok(match c {
        Cell::Symbolic(p) => Cell::Symbolic(p.shifted(m)),
        Cell::Interval(i) => {
            let mut cur = i.clone();
            for _ in 0..m {
                cur = tent_interval(&cur);
            }
            Cell::Interval(cur)
        }
    })
}

/// Distance bounds between two symbolic patterns: `2^-i` below for the
/// first forced disagreement `i`, `2^-j` above for the first position `j`
/// that is not a forced agreement.
fn pattern_dist(a: &[Option<bool>], b: &[Option<bool>]) -> DistBound {
    let (lower, upper) = pattern_dist_indices(a, b);
    DistBound {
        lower: lower.map_or_else(Dyadic::zero, |i| Dyadic::pow2_neg(i as u32)),
        upper: Dyadic::pow2_neg(upper as u32),
    }
}

/// `(first forced disagreement, first non-forced-agreement)`.
fn pattern_dist_indices(a: &[Option<bool>], b: &[Option<bool>]) -> (Option<usize>, usize) {
    let n = a.len().min(b.len());
    let mut upper = None;
    for i in 0..n {
        match (a[i], b[i]) {
            (Some(x), Some(y)) if x == y => continue,
            (Some(_), Some(_)) => {
                return (Some(i), upper.unwrap_or(i));
            }
            _ => {
                if upper.is_none() {
                    upper = Some(i);
                }
            }
        }
    }
    (None, upper.unwrap_or(n))
}

fn interval_dist(a: &Interval, b: &Interval) -> DistBound {
    let zero = Dyadic::zero();
    let gap_right = &b.lo - &a.hi;
    let gap_left = &a.lo - &b.hi;
    let lower = Dyadic::max_of(&zero, &Dyadic::max_of(&gap_right, &gap_left));
    let upper = Dyadic::max_of(&(&b.hi - &a.lo), &(&a.hi - &b.lo));
    DistBound { lower, upper }
}

/// Exact bounds on `d(x, y)` over `x ∈ a`, `y ∈ b`.
pub fn dist_cells(sys: &SystemHandle, a: &Cell, b: &Cell) -> Result<DistBound, SystemError> {
    sys.check_cell(a)?;
    sys.check_cell(b)?;
    Ok(match (a, b) {
        (Cell::Symbolic(p), Cell::Symbolic(q)) => pattern_dist(p.symbols(), q.symbols()),
        (Cell::Interval(i), Cell::Interval(j)) => interval_dist(i, j),
        _ => unreachable!("check_cell rejects mixed kinds"),
    })
}

/// The tent-map itinerary interval `I_w`.
pub fn itinerary_cell(sys: &SystemHandle, w: &Word) -> Result<Cell, SystemError> {
    if !matches!(sys.kind, SystemKind::Tent) {
        return Err(SystemError::NotTent);
    }
    Ok(Cell::Interval(itinerary_interval(w)))
}

pub(crate) fn itinerary_interval(w: &Word) -> Interval {
    let one = Dyadic::one();
    let mut cur = Interval::unit();
    for &bit in w.bits().iter().rev() {
        cur = if bit {
            Interval::new(&one - &cur.hi.half(), &one - &cur.lo.half())
        } else {
            Interval::new(cur.lo.half(), cur.hi.half())
        };
    }
    cur
}

/// Precomputed forward orbit of one cell, for repeated distance queries.
#[derive(Debug, Clone)]
pub enum Orbit {
    Symbolic(Pattern),
    Interval(Vec<Interval>),
}

impl Orbit {
    pub fn new(sys: &SystemHandle, c: &Cell, horizon: usize) -> Result<Self, SystemError> {
        sys.check_cell(c)?;
        Ok(match c {
            Cell::Symbolic(p) => Orbit::Symbolic(p.clone()),
            Cell::Interval(i) => {
                let mut v = Vec::with_capacity(horizon + 1);
                v.push(i.clone());
                for m in 0..horizon {
                    v.push(tent_interval(&v[m]));
                }
                Orbit::Interval(v)
            }
        })
    }

    pub fn horizon_covers(&self, m: usize) -> bool {
        match self {
            Orbit::Symbolic(_) => true,
            Orbit::Interval(v) => m < v.len(),
        }
    }

    /// Distance bounds between the time-`m` images of two cells.
    pub fn dist_at(&self, other: &Orbit, m: usize) -> DistBound {
        match (self, other) {
            (Orbit::Symbolic(p), Orbit::Symbolic(q)) => {
                let a = &p.symbols()[m.min(p.len())..];
                let b = &q.symbols()[m.min(q.len())..];
                pattern_dist(a, b)
            }
            (Orbit::Interval(u), Orbit::Interval(v)) => interval_dist(&u[m], &v[m]),
            _ => panic!("orbits of different kinds"),
        }
    }
}
