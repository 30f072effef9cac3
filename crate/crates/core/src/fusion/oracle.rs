//! The two shipped oracles. Both present `X` as the full shift through
//! [`coding`](super::coding) and `G` as pairs of sequences that differ
//! infinitely often (non-asymptotic pairs). They differ in `R`:
//!
//! * `shift-liyorke`: `R_n` is the proximal filtration, certified by forced
//!   agreement runs;
//! * `e0c`: `R` is everything, so only the edge constraints remain.
//!
//! Extensions append `t^r ⌢ 0^z` to `φ(t)` for every branch `t`, trying
//! `(r, z)` in order of `r + z`, then `r`.

use rayon::prelude::*;

use super::coding::{self, decode_bits, decode_letters, encode_bits, encode_letters, zip_words, EpSeq, Letter, Nat};
use super::{
    check_compatible, check_one_step, Approximation, BaireElem, Configuration, EdgeBox, FusionError,
    FusionOracle, Stage,
};
use crate::cantor::{canonical_s, Word};
use crate::relations::{r_filtration_test, StageEvent, Verdict};
use crate::systems::{Cell, SystemHandle};

#[derive(Debug, Clone)]
pub struct DifferenceOracle {
    name: &'static str,
    proximal: bool,
    system: SystemHandle,
}

impl DifferenceOracle {
    pub fn shift_liyorke() -> Self {
        DifferenceOracle {
            name: "shift-liyorke",
            proximal: true,
            system: SystemHandle::full_shift(),
        }
    }

    pub fn e0c() -> Self {
        DifferenceOracle {
            name: "e0c",
            proximal: false,
            system: SystemHandle::full_shift(),
        }
    }

    pub fn by_name(name: &str) -> Result<Self, FusionError> {
        match name {
            "shift-liyorke" => Ok(DifferenceOracle::shift_liyorke()),
            "e0c" => Ok(DifferenceOracle::e0c()),
            other => Err(FusionError::UnknownOracle(other.to_string())),
        }
    }

    fn letters(&self, d: &BaireElem) -> EpSeq<Letter> {
        EpSeq {
            prefix: decode_letters(&d.prefix),
            period: decode_letters(&d.period),
        }
    }

    /// Encodes the pair sequence from position `from` on as a Baire tail.
    fn encode_pair_tail(seq: &EpSeq<Letter>, from: usize) -> Result<BaireElem, FusionError> {
        let rest = seq.shifted(from);
        let f = rest
            .period
            .iter()
            .position(|&c| coding::is_differing(c))
            .ok_or(FusionError::NotInG)?;
        let mut head = rest.prefix.clone();
        head.extend_from_slice(&rest.period[..=f]);
        let mut period = rest.period[f + 1..].to_vec();
        period.extend_from_slice(&rest.period[..=f]);
        BaireElem::new(encode_letters(&head)?, encode_letters(&period)?)
    }

    fn cells_related(&self, n: usize, a: &Cell, b: &Cell) -> Result<Option<StageEvent>, FusionError> {
        let horizon = match (a, b) {
            (Cell::Symbolic(p), Cell::Symbolic(q)) => p.len().max(q.len()),
            _ => 0,
        };
        Ok(r_filtration_test(&self.system, a, b, n, horizon)?.witness().cloned())
    }

    /// The extension `φ(t) ⌢ code(t^r 0^z)` of `a`, if its `ψ` values and
    /// `R`-compatibility can be completed.
    fn candidate(&self, a: &Approximation, r: usize, z: usize) -> Result<Option<Approximation>, FusionError> {
        let n = a.n + 1;
        let mut phi = Vec::with_capacity(1 << n);
        let mut bits = Vec::with_capacity(1 << n);
        for t in Word::all_of_length(n) {
            let parent = &a.phi[(t.value() >> 1) as usize];
            let mut segment = Word::empty();
            for _ in 0..r {
                segment = segment.concat(&t);
            }
            segment = segment.concat(&Word::zeros(z));
            let mut value = parent.clone();
            value.extend(encode_bits(&segment));
            bits.push(decode_bits(parent)?.concat(&segment));
            phi.push(value);
        }

        let mut psi = Vec::with_capacity(n);
        for k in 0..n {
            let base = canonical_s(k);
            let mut level = Vec::with_capacity(1 << (n - k - 1));
            for u in Word::all_of_length(n - k - 1) {
                let x = &bits[base.child(false).concat(&u).value() as usize];
                let y = &bits[base.child(true).concat(&u).value() as usize];
                let letters = zip_words(x, y);
                let (mut value, mut start, needed) = if k < a.n {
                    let old = a.psi[k][(u.value() >> 1) as usize].clone();
                    let len = decode_letters(&old).len();
                    (old, len, 1)
                } else {
                    (Vec::new(), 0, n)
                };
                for _ in 0..needed {
                    let Some(q) = (start..letters.len()).find(|&i| coding::is_differing(letters[i])) else {
                        return Ok(None);
                    };
                    let Some(j) = coding::block_to_nat(&letters[start..=q]) else {
                        return Ok(None);
                    };
                    value.push(j);
                    start = q + 1;
                }
                level.push(value);
            }
            psi.push(level);
        }
        let b = Stage { n, phi, psi };

        if self.proximal {
            let cells: Vec<Cell> = bits.iter().map(Cell::cylinder).collect();
            let last = cells.len() - 1;
            if self.cells_related(n, &cells[0], &cells[last])?.is_none() {
                return Ok(None);
            }
            let all = (0..cells.len()).into_par_iter().try_for_each(|i| {
                for j in i + 1..cells.len() {
                    match self.cells_related(n, &cells[i], &cells[j]) {
                        Ok(Some(_)) => {}
                        Ok(None) => return Err(None),
                        Err(e) => return Err(Some(e)),
                    }
                }
                Ok(())
            });
            match all {
                Ok(()) => {}
                Err(None) => return Ok(None),
                Err(Some(e)) => return Err(e),
            }
        }
        Ok(Some(b))
    }
}

impl FusionOracle for DifferenceOracle {
    fn name(&self) -> &str {
        self.name
    }

    fn system(&self) -> &SystemHandle {
        &self.system
    }

    fn cell(&self, x: &[Nat]) -> Result<Cell, FusionError> {
        Ok(Cell::cylinder(&decode_bits(x)?))
    }

    fn edge(&self, d: &[Nat]) -> Result<EdgeBox, FusionError> {
        let letters = decode_letters(d);
        let (u, v) = coding::unzip_letters(&letters);
        let differences = letters
            .iter()
            .enumerate()
            .filter(|(_, &c)| coding::is_differing(c))
            .map(|(i, _)| i)
            .collect();
        Ok(EdgeBox {
            left: Cell::cylinder(&u),
            right: Cell::cylinder(&v),
            differences,
        })
    }

    fn point(&self, x: &BaireElem) -> Result<EpSeq<bool>, FusionError> {
        EpSeq::new(
            decode_bits(&x.prefix)?.bits().to_vec(),
            decode_bits(&x.period)?.bits().to_vec(),
        )
    }

    fn edge_point(&self, d: &BaireElem) -> Result<(EpSeq<bool>, EpSeq<bool>), FusionError> {
        let seq = self.letters(d);
        if seq.period.is_empty() {
            return Err(FusionError::BadBaire("empty period".into()));
        }
        Ok((
            EpSeq::new(
                seq.prefix.iter().map(|c| c & 2 != 0).collect(),
                seq.period.iter().map(|c| c & 2 != 0).collect(),
            )?,
            EpSeq::new(
                seq.prefix.iter().map(|c| c & 1 != 0).collect(),
                seq.period.iter().map(|c| c & 1 != 0).collect(),
            )?,
        ))
    }

    fn edge_token(&self, x: &EpSeq<bool>, y: &EpSeq<bool>) -> Result<BaireElem, FusionError> {
        let seq = x.zip_with(y, coding::letter);
        DifferenceOracle::encode_pair_tail(&seq, 0)
    }

    fn r_test(&self, n: usize, a: &Cell, b: &Cell) -> Result<Verdict<Option<StageEvent>>, FusionError> {
        if !self.proximal {
            return Ok(Verdict::Holds(None));
        }
        Ok(match self.cells_related(n, a, b)? {
            Some(e) => Verdict::Holds(Some(e)),
            None => Verdict::Unknown {
                horizon: match (a, b) {
                    (Cell::Symbolic(p), Cell::Symbolic(q)) => p.len().max(q.len()),
                    _ => 0,
                },
            },
        })
    }

    /// Tails `(t ⌢ 0^{n+2} ⌢ v)^∞` after `φ^a(t)`, with `v` the eight bits
    /// of `variant`; `ψ` tails are read off the resulting point pairs.
    fn continuation(&self, a: &Approximation, variant: u8) -> Result<Configuration, FusionError> {
        let n = a.n;
        let v = Word::from_value(u64::from(variant), 8);
        let phi = Word::all_of_length(n)
            .map(|t| {
                let tail = t.concat(&Word::zeros(n + 2)).concat(&v);
                BaireElem::new(a.phi_at(&t).clone(), encode_bits(&tail))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut psi = Vec::with_capacity(n);
        for k in 0..n {
            let base = canonical_s(k);
            let mut level = Vec::new();
            for u in Word::all_of_length(n - k - 1) {
                let x = self.point(&phi[base.child(false).concat(&u).value() as usize])?;
                let y = self.point(&phi[base.child(true).concat(&u).value() as usize])?;
                let seq = x.zip_with(&y, coding::letter);
                let old = a.psi_at(k, &u);
                let known = decode_letters(old);
                if seq.take(known.len()) != known {
                    return Err(FusionError::Clause(format!(
                        "psi_{k}({u}) does not describe its branch pair"
                    )));
                }
                let tail = DifferenceOracle::encode_pair_tail(&seq, known.len())?;
                let mut prefix = old.clone();
                prefix.extend(tail.prefix);
                level.push(BaireElem::new(prefix, tail.period)?);
            }
            psi.push(level);
        }
        Ok(Stage { n, phi, psi })
    }

    fn extend(
        &self,
        a: &Approximation,
        budget: usize,
    ) -> Result<Option<(Approximation, Configuration)>, FusionError> {
        let mut tries = 0;
        for total in 1usize.. {
            for r in 1..=total {
                if tries == budget {
                    return Ok(None);
                }
                tries += 1;
                let Some(b) = self.candidate(a, r, total - r)? else {
                    continue;
                };
                let gamma = self.continuation(&b, 0)?;
                if check_one_step(a, &b) && check_compatible(&gamma, &b) {
                    return Ok(Some((b, gamma)));
                }
            }
        }
        unreachable!("the candidate loop only ends through the budget")
    }
}

#[cfg(test)]
mod tests {
    use super::super::{check_coherent, initial_approximation, merge_configurations, project_configuration};
    use super::*;

    #[test]
    fn first_extension_of_the_shift_oracle() {
        let o = DifferenceOracle::shift_liyorke();
        let a0 = initial_approximation();
        let (a1, g1) = o.extend(&a0, 100).unwrap().unwrap();
        assert_eq!(a1.n, 1);
        assert!(check_one_step(&a0, &a1));
        assert!(check_compatible(&g1, &a1));
        check_coherent(&o, &g1).unwrap();
        // r = 1, z = 2: φ(0) = 000, φ(1) = 100.
        assert_eq!(decode_bits(&a1.phi[0]).unwrap().to_string(), "000");
        assert_eq!(decode_bits(&a1.phi[1]).unwrap().to_string(), "100");
        assert!(o.extend(&a0, 3).unwrap().is_none());
    }

    #[test]
    fn e0c_skips_the_zero_runs() {
        let o = DifferenceOracle::e0c();
        let (a1, _) = o.extend(&initial_approximation(), 100).unwrap().unwrap();
        assert_eq!(decode_bits(&a1.phi[1]).unwrap().to_string(), "1");
        let (a2, g2) = o.extend(&a1, 100).unwrap().unwrap();
        check_coherent(&o, &g2).unwrap();
        assert_eq!(a2.psi[1][0].len(), 2);
    }

    #[test]
    fn merge_round_trip_on_continuations() {
        let o = DifferenceOracle::shift_liyorke();
        let (a1, _) = o.extend(&initial_approximation(), 100).unwrap().unwrap();
        let g0 = o.continuation(&a1, 3).unwrap();
        let g1 = o.continuation(&a1, 200).unwrap();
        let s = canonical_s(1);
        let d = o
            .edge_token(&o.point(g0.phi_at(&s)).unwrap(), &o.point(g1.phi_at(&s)).unwrap())
            .unwrap();
        let merged = merge_configurations(&o, &g0, &g1, &d).unwrap();
        assert_eq!(merged.n, 2);
        check_coherent(&o, &merged).unwrap();
        assert_eq!(project_configuration(&merged, false), g0);
        assert_eq!(project_configuration(&merged, true), g1);
        let b = super::super::one_step_witness(&o, &a1, &merged, 8).unwrap().unwrap();
        assert!(check_compatible(&merged, &b));
        // A token for an eventually equal pair does not exist.
        assert!(o.edge_token(&o.point(g0.phi_at(&s)).unwrap(), &o.point(g0.phi_at(&s)).unwrap()).is_err());
        // A token for the wrong pair is rejected.
        assert!(merge_configurations(&o, &g1, &g0, &d).is_err());
    }
}
