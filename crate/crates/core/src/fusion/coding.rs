//! Concrete presentations `φ_X : ℕ^ℕ → 2^ℕ` and `φ_G : ℕ^ℕ → G` used by
//! the shipped oracles.
//!
//! `φ_X` reads each natural `x` as the nonempty binary word `t_{x+1}` (the
//! `(x+1)`-th word in length-lex order) and concatenates. `φ_G` reads each
//! natural as a block over the pair alphabet `{0,1,2,3}` (letter `2a + b`
//! stands for the pair of bits `(a, b)`): a run of agreeing letters closed
//! by a differing one. Distinct naturals give distinct blocks, every block
//! with at most 62 agreeing letters is named, and the decoded pair of
//! sequences differs infinitely often.

use crate::cantor::Word;

use super::FusionError;

pub type Nat = u64;

/// Longest binary chunk packed into one natural by [`encode_bits`].
pub const CHUNK_BITS: usize = 32;

/// Letter of the pair alphabet.
pub type Letter = u8;

pub fn is_differing(c: Letter) -> bool {
    c == 1 || c == 2
}

pub fn letter(a: bool, b: bool) -> Letter {
    (u8::from(a) << 1) | u8::from(b)
}

pub fn unzip_letters(letters: &[Letter]) -> (Word, Word) {
    (
        Word::from_bits(letters.iter().map(|c| c & 2 != 0)),
        Word::from_bits(letters.iter().map(|c| c & 1 != 0)),
    )
}

pub fn zip_words(a: &Word, b: &Word) -> Vec<Letter> {
    a.bits().iter().zip(b.bits()).map(|(&x, &y)| letter(x, y)).collect()
}

pub fn nat_to_bits(x: Nat) -> Result<Word, FusionError> {
    let index = x.checked_add(1).ok_or(FusionError::Uninterpretable(x))?;
    Ok(Word::nth_length_lex(index))
}

pub fn bits_to_nat(w: &Word) -> Option<Nat> {
    if w.is_empty() {
        return None;
    }
    w.length_lex_index().map(|i| i - 1)
}

pub fn decode_bits(x: &[Nat]) -> Result<Word, FusionError> {
    let mut bits = Vec::new();
    for &n in x {
        bits.extend_from_slice(nat_to_bits(n)?.bits());
    }
    Ok(Word::from_bits(bits))
}

/// Packs a binary word into naturals, [`CHUNK_BITS`] bits at a time.
pub fn encode_bits(w: &Word) -> Vec<Nat> {
    w.bits()
        .chunks(CHUNK_BITS)
        .map(|c| bits_to_nat(&Word::from_bits(c.iter().copied())).expect("chunk fits"))
        .collect()
}

/// The block of pair letters named by `j`: the agreeing head spelled by
/// the `(j / 2)`-th binary word in length-lex order (`0 ↦ 0`, `1 ↦ 3`),
/// then the differing letter `1 + j % 2`.
pub fn nat_to_block(j: Nat) -> Vec<Letter> {
    let mut block: Vec<Letter> = Word::nth_length_lex(j / 2)
        .bits()
        .iter()
        .map(|&b| if b { 3 } else { 0 })
        .collect();
    block.push(1 + (j % 2) as u8);
    block
}

/// Inverse of [`nat_to_block`]; `None` unless `block` is agreeing letters
/// followed by one differing letter and fits in a natural.
pub fn block_to_nat(block: &[Letter]) -> Option<Nat> {
    let (&last, head) = block.split_last()?;
    if !is_differing(last) || head.iter().any(|&c| c != 0 && c != 3) {
        return None;
    }
    let index = Word::from_bits(head.iter().map(|&c| c == 3)).length_lex_index()?;
    index.checked_mul(2)?.checked_add(u64::from(last - 1))
}

pub fn decode_letters(d: &[Nat]) -> Vec<Letter> {
    d.iter().flat_map(|&j| nat_to_block(j)).collect()
}

/// Splits a letter word ending in a differing letter into blocks, each
/// ending at a differing letter, and encodes them.
pub fn encode_letters(letters: &[Letter]) -> Result<Vec<Nat>, FusionError> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &c) in letters.iter().enumerate() {
        if is_differing(c) {
            let block = &letters[start..=i];
            out.push(block_to_nat(block).ok_or(FusionError::BlockTooLong(block.len()))?);
            start = i + 1;
        }
    }
    if start != letters.len() {
        return Err(FusionError::NotInG);
    }
    Ok(out)
}

/// An eventually periodic sequence `prefix ⌢ period ⌢ period ⌢ …`.
#[derive(Debug, Clone)]
pub struct EpSeq<T> {
    pub prefix: Vec<T>,
    pub period: Vec<T>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl<T: Copy + PartialEq> EpSeq<T> {
    pub fn new(prefix: Vec<T>, period: Vec<T>) -> Result<Self, FusionError> {
        if period.is_empty() {
            return Err(FusionError::BadBaire("empty period".into()));
        }
        Ok(EpSeq { prefix, period })
    }

    pub fn at(&self, i: usize) -> T {
        match self.prefix.get(i) {
            Some(&x) => x,
            None => self.period[(i - self.prefix.len()) % self.period.len()],
        }
    }

    pub fn take(&self, len: usize) -> Vec<T> {
        (0..len).map(|i| self.at(i)).collect()
    }

    /// The sequence from position `from` onward.
    pub fn shifted(&self, from: usize) -> EpSeq<T> {
        if from <= self.prefix.len() {
            return EpSeq {
                prefix: self.prefix[from..].to_vec(),
                period: self.period.clone(),
            };
        }
        let q = self.period.len();
        let r = (from - self.prefix.len()) % q;
        let mut period = self.period[r..].to_vec();
        period.extend_from_slice(&self.period[..r]);
        EpSeq {
            prefix: Vec::new(),
            period,
        }
    }

    pub fn zip_with<U: Copy + PartialEq, V>(&self, other: &EpSeq<U>, f: impl Fn(T, U) -> V) -> EpSeq<V> {
        let p = self.prefix.len().max(other.prefix.len());
        let q = lcm(self.period.len(), other.period.len());
        EpSeq {
            prefix: (0..p).map(|i| f(self.at(i), other.at(i))).collect(),
            period: (p..p + q).map(|i| f(self.at(i), other.at(i))).collect(),
        }
    }

    pub fn same_as(&self, other: &EpSeq<T>) -> bool {
        let p = self.prefix.len().max(other.prefix.len());
        let q = lcm(self.period.len(), other.period.len());
        (0..p + q).all(|i| self.at(i) == other.at(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_coding_round_trips() {
        assert_eq!(nat_to_bits(0).unwrap().to_string(), "0");
        assert_eq!(nat_to_bits(1).unwrap().to_string(), "1");
        assert_eq!(nat_to_bits(2).unwrap().to_string(), "00");
        for x in 0..2000 {
            assert_eq!(bits_to_nat(&nat_to_bits(x).unwrap()), Some(x));
        }
        let w: Word = "0110100111010011101001110100111010011101".parse().unwrap();
        let enc = encode_bits(&w);
        assert_eq!(enc.len(), 2);
        assert_eq!(decode_bits(&enc).unwrap(), w);
        assert!(nat_to_bits(u64::MAX).is_err());
    }

    #[test]
    fn block_coding_round_trips() {
        for j in 0..5000 {
            let b = nat_to_block(j);
            assert!(is_differing(*b.last().unwrap()));
            assert!(b[..b.len() - 1].iter().all(|&c| c == 0 || c == 3));
            assert_eq!(block_to_nat(&b), Some(j));
        }
        assert_eq!(block_to_nat(&[0, 3]), None);
        assert_eq!(block_to_nat(&[1, 2]), None);
        assert_eq!(block_to_nat(&[]), None);
        assert_eq!(nat_to_block(0), vec![1]);
        assert_eq!(nat_to_block(1), vec![2]);
        assert_eq!(nat_to_block(2), vec![0, 1]);
        assert_eq!(nat_to_block(5), vec![3, 2]);
        let mut longest = vec![3u8; 62];
        longest.push(2);
        assert!(block_to_nat(&longest).is_some());
        let mut too_long = vec![0u8; 64];
        too_long.push(1);
        assert_eq!(block_to_nat(&too_long), None);
        let max = nat_to_block(u64::MAX);
        assert_eq!(block_to_nat(&max), Some(u64::MAX));
    }

    #[test]
    fn letters_split_into_blocks() {
        let letters = vec![0, 3, 1, 2, 0, 0, 2];
        let enc = encode_letters(&letters).unwrap();
        assert_eq!(enc.len(), 3);
        assert_eq!(decode_letters(&enc), letters);
        assert!(matches!(encode_letters(&[1, 0]), Err(FusionError::NotInG)));
        let (a, b) = unzip_letters(&letters);
        assert_eq!(zip_words(&a, &b), letters);
    }

    #[test]
    fn eventually_periodic_sequences() {
        let s = EpSeq::new(vec![1, 2], vec![3, 4, 5]).unwrap();
        assert_eq!(s.take(8), vec![1, 2, 3, 4, 5, 3, 4, 5]);
        assert_eq!(s.shifted(6).take(4), vec![4, 5, 3, 4]);
        let t = EpSeq::new(vec![1, 2, 3, 4, 5], vec![3, 4, 5, 3, 4, 5]).unwrap();
        assert!(s.same_as(&t));
        let u = EpSeq::new(vec![1, 2], vec![3, 4]).unwrap();
        assert!(!s.same_as(&u));
        let z = s.zip_with(&u, |x, y| x * 10 + y);
        assert_eq!(z.take(7), (0..7).map(|i| s.at(i) * 10 + u.at(i)).collect::<Vec<_>>());
        assert!(EpSeq::<u8>::new(vec![], vec![]).is_err());
    }
}
