//! Mycielski fusion: a Cantor scheme of cylinders whose branch pairs land
//! in every set of a countable family of dense open subsets of
//! `2^ℕ × 2^ℕ`, interleaving refiner passes with binary splitting.
//!
//! At step `d` the refiner for the `d`-th set extends every word of the
//! current level so that all pairs of distinct words land in it, then each
//! word splits in two. A branch pair that splits at level `j` is handled
//! by the sets `j, j + 1, …`: by the split itself for `j` and by the
//! refiner passes after that.

use super::FusionError;
use crate::cantor::{Scheme, Word};
use crate::systems::Cell;

/// A family `D_0, D_1, …` of dense open sets of pairs, given through
/// refiners and checkable witnesses.
pub trait DenseOpenFamily: Sync {
    fn name(&self) -> &str;

    /// Extends every word of `level` so that each pair of distinct
    /// entries has all its continuations in `D_k`.
    fn refine(&self, k: usize, level: &[Word]) -> Vec<Word>;

    /// A position certifying `⟦u⟧ × ⟦v⟧ ⊆ D_k`, if there is one.
    fn witness(&self, k: usize, u: &Word, v: &Word) -> Option<usize>;

    fn check_witness(&self, k: usize, u: &Word, v: &Word, pos: usize) -> bool;
}

/// The complement of eventual equality: `D_k = {(x, y) : ∃ i ≥ k, x_i ≠ y_i}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct E0Complement;

/// The complement of equality, the same open set for every `k`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Inequality;

fn differs_at(u: &Word, v: &Word, pos: usize) -> bool {
    matches!((u.get(pos), v.get(pos)), (Some(a), Some(b)) if a != b)
}

fn index_width(len: usize) -> usize {
    len.next_power_of_two().trailing_zeros() as usize
}

impl DenseOpenFamily for E0Complement {
    fn name(&self) -> &str {
        "e0"
    }

    /// Pads to length `k` and appends each word's index in the level.
    fn refine(&self, k: usize, level: &[Word]) -> Vec<Word> {
        let width = index_width(level.len());
        level
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let pad = Word::zeros(k.saturating_sub(w.len()));
                w.concat(&pad).concat(&Word::from_value(i as u64, width))
            })
            .collect()
    }

    /// The last difference, which after a refiner pass lies in the
    /// appended index.
    fn witness(&self, k: usize, u: &Word, v: &Word) -> Option<usize> {
        (k..u.len().min(v.len())).rev().find(|&i| differs_at(u, v, i))
    }

    fn check_witness(&self, k: usize, u: &Word, v: &Word, pos: usize) -> bool {
        pos >= k && differs_at(u, v, pos)
    }
}

impl DenseOpenFamily for Inequality {
    fn name(&self) -> &str {
        "eq"
    }

    fn refine(&self, _k: usize, level: &[Word]) -> Vec<Word> {
        level.to_vec()
    }

    fn witness(&self, _k: usize, u: &Word, v: &Word) -> Option<usize> {
        u.first_difference(v).filter(|&i| i < u.len().min(v.len()))
    }

    fn check_witness(&self, _k: usize, u: &Word, v: &Word, pos: usize) -> bool {
        differs_at(u, v, pos)
    }
}

pub fn family_by_name(name: &str) -> Result<Box<dyn DenseOpenFamily>, FusionError> {
    match name {
        "e0" => Ok(Box::new(E0Complement)),
        "eq" => Ok(Box::new(Inequality)),
        other => Err(FusionError::UnknownRelation(other.to_string())),
    }
}

/// Output of [`mycielski_fuse`].
#[derive(Debug, Clone)]
pub struct MycielskiScheme {
    pub family: String,
    /// `words[d][v]`: the cylinder word at the depth-`d` node with value `v`.
    pub words: Vec<Vec<Word>>,
    /// `refined[d][v]`: the node's word after the pass for `D_d`.
    refined: Vec<Vec<Word>>,
    /// `pair_witness[d][i * 2^d + j]` for `i < j`: the `D_d` witness of the
    /// refined pair.
    pair_witness: Vec<Vec<usize>>,
}

impl MycielskiScheme {
    pub fn depth(&self) -> usize {
        self.words.len() - 1
    }

    pub fn word(&self, w: &Word) -> &Word {
        &self.words[w.len()][w.value() as usize]
    }

    pub fn scheme(&self) -> Scheme {
        Scheme::from_levels(
            self.words
                .iter()
                .map(|level| level.iter().map(Cell::cylinder).collect())
                .collect(),
        )
        .expect("levels have full size")
    }

    /// Witnesses `(k, position)` for a pair of distinct nodes of equal
    /// length: the split for `k = j`, then one per refiner pass below it.
    pub fn pair_witnesses(&self, a: &Word, b: &Word) -> Vec<(usize, usize)> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let Some(j) = a.first_difference(b) else {
            return Vec::new();
        };
        let mut out = vec![(j, self.refined[j][a.prefix(j).value() as usize].len())];
        for k in j + 1..a.len() {
            let i = a.prefix(k).value() as usize;
            let l = b.prefix(k).value() as usize;
            out.push((k, self.pair_witness[k][(i << k) + l]));
        }
        out
    }
}

/// Runs `depth` rounds of refine-then-split, checking every refiner output.
pub fn mycielski_fuse(family: &dyn DenseOpenFamily, depth: usize) -> Result<MycielskiScheme, FusionError> {
    let mut words = vec![vec![Word::empty()]];
    let mut refined_levels = Vec::with_capacity(depth);
    let mut pair_witness = Vec::with_capacity(depth);
    for k in 0..depth {
        let level = words.last().expect("nonempty");
        let refined = family.refine(k, level);
        let fail = |reason: String| FusionError::Refiner { index: k, reason };
        if refined.len() != level.len() {
            return Err(fail("level size changed".into()));
        }
        if let Some((w, _)) = level.iter().zip(&refined).find(|(w, r)| !w.is_prefix_of(r)) {
            return Err(fail(format!("{w} was not extended")));
        }
        let size = level.len();
        let mut table = vec![0usize; size * size];
        for i in 0..size {
            for j in i + 1..size {
                let (u, v) = (&refined[i], &refined[j]);
                let pos = family
                    .witness(k, u, v)
                    .filter(|&p| family.check_witness(k, u, v, p))
                    .ok_or_else(|| fail(format!("no witness for ({u}, {v})")))?;
                table[i * size + j] = pos;
            }
        }
        let next: Vec<Word> = refined.iter().flat_map(|w| [w.child(false), w.child(true)]).collect();
        for (w, pair) in refined.iter().zip(next.chunks(2)) {
            if !family.check_witness(k, &pair[0], &pair[1], w.len()) {
                return Err(fail(format!("split of {w} is not in the set")));
            }
        }
        refined_levels.push(refined);
        pair_witness.push(table);
        words.push(next);
    }
    Ok(MycielskiScheme {
        family: family.name().to_string(),
        words,
        refined: refined_levels,
        pair_witness,
    })
}
