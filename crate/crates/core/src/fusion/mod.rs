//! The fusion engine behind the G0 dichotomy, branch (2): finite
//! approximations `(n, φ, ψ)` are extended one step at a time until a
//! depth-`N` truncation of a continuous homomorphism from G0 to `G`,
//! whose image is an `R`-clique, has been assembled.
//!
//! An [`Approximation`] maps binary words of length `n` to finite words of
//! naturals (`φ`) and, for every `k < n`, words of length `n - k - 1` to
//! natural words of length `n` (`ψ_k`). A [`Configuration`] has the same
//! shape with infinite values, each given as an eventually periodic
//! [`BaireElem`]. Oracles ([`FusionOracle`]) supply the interpretations
//! `φ_X`, `φ_G` and the bounded search for one-step extensions; the engine
//! checks every clause mechanically.

pub mod coding;
pub mod mycielski;
pub mod oracle;

use rayon::prelude::*;
use thiserror::Error;

use crate::cantor::{canonical_s, g0_edges_at_depth, Scheme, Word};
use crate::relations::{SeparationEvent, StageEvent, Verdict};
use crate::systems::{Cell, SystemError, SystemHandle};
use crate::Dyadic;

pub use coding::{EpSeq, Nat};
pub use mycielski::{mycielski_fuse, DenseOpenFamily, E0Complement, Inequality, MycielskiScheme};
pub use oracle::DifferenceOracle;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("fusion depth must be at least 1")]
    ZeroDepth,
    #[error("natural {0} has no interpretation")]
    Uninterpretable(Nat),
    #[error("pair block of {0} letters does not fit in a natural")]
    BlockTooLong(usize),
    #[error("malformed Baire element: {0}")]
    BadBaire(String),
    #[error("pair sequence is eventually equal, so it is not an edge of G")]
    NotInG,
    #[error("configurations have depths {0} and {1}")]
    DepthMismatch(usize, usize),
    #[error("edge token does not certify the branch pair: {0}")]
    BadEdgeToken(String),
    #[error("oracle output violates {0}")]
    Clause(String),
    #[error("unknown oracle {0:?}: expected shift-liyorke or e0c")]
    UnknownOracle(String),
    #[error("unknown relation {0:?}: expected e0 or eq")]
    UnknownRelation(String),
    #[error("refiner {index} failed: {reason}")]
    Refiner { index: usize, reason: String },
    #[error(transparent)]
    System(#[from] SystemError),
}

/// An element of `ℕ^ℕ` given as `prefix ⌢ period ⌢ period ⌢ …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaireElem {
    pub prefix: Vec<Nat>,
    pub period: Vec<Nat>,
}

impl BaireElem {
    pub fn new(prefix: Vec<Nat>, period: Vec<Nat>) -> Result<Self, FusionError> {
        if period.is_empty() {
            return Err(FusionError::BadBaire("empty period".into()));
        }
        Ok(BaireElem { prefix, period })
    }

    pub fn as_seq(&self) -> EpSeq<Nat> {
        EpSeq {
            prefix: self.prefix.clone(),
            period: self.period.clone(),
        }
    }

    pub fn take(&self, len: usize) -> Vec<Nat> {
        self.as_seq().take(len)
    }

    pub fn starts_with(&self, w: &[Nat]) -> bool {
        let seq = self.as_seq();
        w.iter().enumerate().all(|(i, &x)| seq.at(i) == x)
    }
}

/// Shape shared by approximations and configurations: `phi[v]` is the
/// value at the length-`n` word with binary value `v`; `psi[k][v]` the
/// value at the length-`(n - k - 1)` word with value `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage<V> {
    pub n: usize,
    pub phi: Vec<V>,
    pub psi: Vec<Vec<V>>,
}

pub type Approximation = Stage<Vec<Nat>>;
pub type Configuration = Stage<BaireElem>;

impl<V> Stage<V> {
    pub fn phi_at(&self, s: &Word) -> &V {
        &self.phi[s.value() as usize]
    }

    pub fn psi_at(&self, k: usize, t: &Word) -> &V {
        &self.psi[k][t.value() as usize]
    }

    pub fn has_shape(&self) -> bool {
        self.phi.len() == 1 << self.n
            && self.psi.len() == self.n
            && self
                .psi
                .iter()
                .enumerate()
                .all(|(k, level)| level.len() == 1 << (self.n - k - 1))
    }
}

impl Approximation {
    fn psi_lengths_ok(&self) -> bool {
        self.psi.iter().flatten().all(|v| v.len() == self.n)
    }
}

/// The approximation with `n = 0` and `φ(∅) = ∅`.
pub fn initial_approximation() -> Approximation {
    Stage {
        n: 0,
        phi: vec![Vec::new()],
        psi: Vec::new(),
    }
}

fn is_proper_prefix(a: &[Nat], b: &[Nat]) -> bool {
    a.len() < b.len() && b.starts_with(a)
}

/// The first clause of a one-step extension that fails, if any.
pub fn one_step_violation(a: &Approximation, b: &Approximation) -> Option<String> {
    if !a.has_shape() || !b.has_shape() || !a.psi_lengths_ok() || !b.psi_lengths_ok() {
        return Some("approximation shape".into());
    }
    if b.n != a.n + 1 {
        return Some(format!("clause (a): depth {} does not follow {}", b.n, a.n));
    }
    for (v, phi) in b.phi.iter().enumerate() {
        if !is_proper_prefix(&a.phi[v >> 1], phi) {
            let t = Word::from_value(v as u64, b.n);
            return Some(format!("clause (b): phi at {t} does not properly extend its parent"));
        }
    }
    for k in 0..a.n {
        for (v, psi) in b.psi[k].iter().enumerate() {
            if !is_proper_prefix(&a.psi[k][v >> 1], psi) {
                let t = Word::from_value(v as u64, b.n - k - 1);
                return Some(format!("clause (c): psi_{k} at {t} does not extend its parent"));
            }
        }
    }
    None
}

pub fn check_one_step(a: &Approximation, b: &Approximation) -> bool {
    one_step_violation(a, b).is_none()
}

/// The first compatibility clause that fails, if any.
pub fn compatibility_violation(gamma: &Configuration, a: &Approximation) -> Option<String> {
    if !gamma.has_shape() || !a.has_shape() {
        return Some("shape".into());
    }
    if gamma.n != a.n {
        return Some(format!("clause (i): depths {} and {}", gamma.n, a.n));
    }
    for (v, (g, p)) in gamma.phi.iter().zip(&a.phi).enumerate() {
        if !g.starts_with(p) {
            let t = Word::from_value(v as u64, a.n);
            return Some(format!("clause (ii): phi at {t}"));
        }
    }
    for k in 0..a.n {
        for (v, (g, p)) in gamma.psi[k].iter().zip(&a.psi[k]).enumerate() {
            if !g.starts_with(p) {
                let t = Word::from_value(v as u64, a.n - k - 1);
                return Some(format!("clause (iii): psi_{k} at {t}"));
            }
        }
    }
    None
}

pub fn check_compatible(gamma: &Configuration, a: &Approximation) -> bool {
    compatibility_violation(gamma, a).is_none()
}

/// `(φ_X ∘ φ^γ)(s_k ⌢ i ⌢ t)` for `i < 2` must equal `(φ_G ∘ ψ_k^γ)(t)`.
pub fn check_coherent(oracle: &dyn FusionOracle, gamma: &Configuration) -> Result<(), FusionError> {
    for k in 0..gamma.n {
        let base = canonical_s(k);
        for t in Word::all_of_length(gamma.n - k - 1) {
            let (x, y) = oracle.edge_point(gamma.psi_at(k, &t))?;
            let u = base.child(false).concat(&t);
            let v = base.child(true).concat(&t);
            if !x.same_as(&oracle.point(gamma.phi_at(&u))?) || !y.same_as(&oracle.point(gamma.phi_at(&v))?) {
                return Err(FusionError::Clause(format!(
                    "edge coherence at psi_{k}({t}) of a depth-{} configuration",
                    gamma.n
                )));
            }
        }
    }
    Ok(())
}

/// Checks that distinct cells of `a` are related at stage `a.n`.
pub fn check_r_compatible(oracle: &dyn FusionOracle, a: &Approximation) -> Result<(), FusionError> {
    let cells = a.phi.iter().map(|x| oracle.cell(x)).collect::<Result<Vec<_>, _>>()?;
    let failure = (0..cells.len())
        .into_par_iter()
        .map(|i| -> Result<Option<(usize, usize)>, FusionError> {
            for j in i + 1..cells.len() {
                if !oracle.r_test(a.n, &cells[i], &cells[j])?.holds() {
                    return Ok(Some((i, j)));
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .next();
    match failure {
        Some((i, j)) => Err(FusionError::Clause(format!(
            "R-compatibility at stage {}: {} and {}",
            a.n,
            Word::from_value(i as u64, a.n),
            Word::from_value(j as u64, a.n)
        ))),
        None => Ok(()),
    }
}

/// Glues two depth-`n` configurations along an edge token: `φ(t⌢i) =
/// φ^{γ_i}(t)`, `ψ_k(t⌢i) = ψ_k^{γ_i}(t)` and `ψ_n(∅) = d`.
pub fn merge_configurations(
    oracle: &dyn FusionOracle,
    g0: &Configuration,
    g1: &Configuration,
    d: &BaireElem,
) -> Result<Configuration, FusionError> {
    if g0.n != g1.n {
        return Err(FusionError::DepthMismatch(g0.n, g1.n));
    }
    if !g0.has_shape() || !g1.has_shape() {
        return Err(FusionError::BadBaire("configuration shape".into()));
    }
    let n = g0.n;
    let s = canonical_s(n);
    let (x, y) = oracle.edge_point(d)?;
    if !x.same_as(&oracle.point(g0.phi_at(&s))?) || !y.same_as(&oracle.point(g1.phi_at(&s))?) {
        return Err(FusionError::BadEdgeToken(format!("at s_{n} = {s}")));
    }
    let interleave = |a: &[BaireElem], b: &[BaireElem]| -> Vec<BaireElem> {
        a.iter().zip(b).flat_map(|(p, q)| [p.clone(), q.clone()]).collect()
    };
    let mut psi: Vec<Vec<BaireElem>> = (0..n).map(|k| interleave(&g0.psi[k], &g1.psi[k])).collect();
    psi.push(vec![d.clone()]);
    Ok(Stage {
        n: n + 1,
        phi: interleave(&g0.phi, &g1.phi),
        psi,
    })
}

/// Restricts a configuration to the words ending in `i`; inverse of
/// [`merge_configurations`] on each side.
pub fn project_configuration(gamma: &Configuration, i: bool) -> Configuration {
    let pick = |level: &[BaireElem]| -> Vec<BaireElem> {
        level.iter().skip(usize::from(i)).step_by(2).cloned().collect()
    };
    let n = gamma.n - 1;
    Stage {
        n,
        phi: pick(&gamma.phi),
        psi: gamma.psi[..n].iter().map(|l| pick(l)).collect(),
    }
}

/// Searches for a one-step extension `b` of `a` compatible with `gamma`
/// by truncating `gamma`'s values, adding up to `max_extra` naturals to
/// each `φ` value.
pub fn one_step_witness(
    oracle: &dyn FusionOracle,
    a: &Approximation,
    gamma: &Configuration,
    max_extra: usize,
) -> Result<Option<Approximation>, FusionError> {
    if gamma.n != a.n + 1 {
        return Err(FusionError::DepthMismatch(gamma.n, a.n + 1));
    }
    for extra in 1..=max_extra {
        let phi = gamma
            .phi
            .iter()
            .enumerate()
            .map(|(v, g)| g.take(a.phi[v >> 1].len() + extra))
            .collect();
        let psi = gamma
            .psi
            .iter()
            .map(|level| level.iter().map(|g| g.take(gamma.n)).collect())
            .collect();
        let b = Stage { n: gamma.n, phi, psi };
        if check_one_step(a, &b) && check_compatible(gamma, &b) && check_r_compatible(oracle, &b).is_ok() {
            return Ok(Some(b));
        }
    }
    Ok(None)
}

/// Capabilities of a presentation `(φ_X, φ_G, R)` consumed by the engine.
pub trait FusionOracle: Sync {
    fn name(&self) -> &str;

    fn system(&self) -> &SystemHandle;

    /// `Φ_X` on a finite natural word: the cell of all its continuations.
    fn cell(&self, x: &[Nat]) -> Result<Cell, FusionError>;

    /// `Φ_G` on a finite natural word: an ordered cell pair inside which
    /// every continuation is an edge of `G`, with the forced differences.
    fn edge(&self, d: &[Nat]) -> Result<EdgeBox, FusionError>;

    /// `φ_X` on an eventually periodic element.
    fn point(&self, x: &BaireElem) -> Result<EpSeq<bool>, FusionError>;

    /// `φ_G` on an eventually periodic element.
    fn edge_point(&self, d: &BaireElem) -> Result<(EpSeq<bool>, EpSeq<bool>), FusionError>;

    /// A `φ_G`-preimage of the pair `(x, y)`.
    fn edge_token(&self, x: &EpSeq<bool>, y: &EpSeq<bool>) -> Result<BaireElem, FusionError>;

    /// Stage-`n` membership of a cell pair in the open set `R_n`.
    fn r_test(&self, n: usize, a: &Cell, b: &Cell) -> Result<Verdict<Option<StageEvent>>, FusionError>;

    /// A configuration compatible with `a`, selected by `variant`.
    fn continuation(&self, a: &Approximation, variant: u8) -> Result<Configuration, FusionError>;

    /// Bounded search for a one-step extension of `a` together with a
    /// compatible configuration; `None` once `budget` candidates fail.
    fn extend(
        &self,
        a: &Approximation,
        budget: usize,
    ) -> Result<Option<(Approximation, Configuration)>, FusionError>;
}

/// The edge box `Φ_G(d)`: continuations of `left` and `right` paired
/// position by position, differing at every position in `differences`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeBox {
    pub left: Cell,
    pub right: Cell,
    pub differences: Vec<usize>,
}

/// Evidence for one G0 edge `(s_k ⌢ 0 ⌢ t, s_k ⌢ 1 ⌢ t)` of the depth-`N`
/// scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeCertificate {
    pub level: usize,
    pub a: Word,
    pub b: Word,
    pub psi: Vec<Nat>,
    pub separations: Vec<SeparationEvent>,
}

/// Stage event of a branch pair at its split level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairStage {
    pub a: Word,
    pub b: Word,
    pub event: Option<StageEvent>,
}

#[derive(Debug, Clone)]
pub struct HomomorphismCertificate {
    pub oracle: String,
    pub system: SystemHandle,
    pub depth: usize,
    pub scheme: Scheme,
    pub edges: Vec<EdgeCertificate>,
    pub stages: Vec<PairStage>,
}

impl HomomorphismCertificate {
    /// Length of the longest leaf cell, the horizon of its events.
    pub fn horizon(&self) -> usize {
        self.scheme
            .leaves()
            .iter()
            .map(|c| match c {
                Cell::Symbolic(p) => p.len(),
                Cell::Interval(_) => 0,
            })
            .max()
            .unwrap_or(0)
    }
}

/// The chain `a_0, …, a_N` and configurations `γ_1, …, γ_N` behind a
/// certificate.
#[derive(Debug, Clone)]
pub struct FusionTrace {
    pub approximations: Vec<Approximation>,
    pub configurations: Vec<Configuration>,
}

#[derive(Debug, Clone)]
pub enum FuseOutcome {
    Certified {
        certificate: HomomorphismCertificate,
        trace: FusionTrace,
    },
    Exhausted {
        level: usize,
        budget: usize,
    },
}

/// Runs the fusion loop to `depth`, checking every oracle answer.
pub fn fuse(oracle: &dyn FusionOracle, depth: usize, budget: usize) -> Result<FuseOutcome, FusionError> {
    if depth == 0 {
        return Err(FusionError::ZeroDepth);
    }
    let mut approximations = vec![initial_approximation()];
    let mut configurations = Vec::new();
    for level in 0..depth {
        let a = approximations.last().expect("nonempty chain");
        let Some((b, gamma)) = oracle.extend(a, budget)? else {
            return Ok(FuseOutcome::Exhausted { level, budget });
        };
        if let Some(v) = one_step_violation(a, &b) {
            return Err(FusionError::Clause(format!("one-step extension at depth {level}: {v}")));
        }
        if let Some(v) = compatibility_violation(&gamma, &b) {
            return Err(FusionError::Clause(format!("compatibility at depth {}: {v}", level + 1)));
        }
        check_coherent(oracle, &gamma)?;
        check_r_compatible(oracle, &b)?;
        approximations.push(b);
        configurations.push(gamma);
    }
    let certificate = assemble(oracle, depth, &approximations)?;
    Ok(FuseOutcome::Certified {
        certificate,
        trace: FusionTrace {
            approximations,
            configurations,
        },
    })
}

fn assemble(
    oracle: &dyn FusionOracle,
    depth: usize,
    chain: &[Approximation],
) -> Result<HomomorphismCertificate, FusionError> {
    let levels = chain
        .iter()
        .map(|a| a.phi.iter().map(|x| oracle.cell(x)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let scheme = Scheme::from_levels(levels).expect("approximation shapes");
    let top = &chain[depth];

    let mut edges = Vec::new();
    for (level, a, b) in g0_edges_at_depth(depth) {
        let t = a.suffix_from(level + 1);
        let psi = top.psi_at(level, &t).clone();
        let edge = oracle.edge(&psi)?;
        let (ca, cb) = (scheme.cell(&a).expect("leaf"), scheme.cell(&b).expect("leaf"));
        if !ca.is_subset_of(&edge.left) || !cb.is_subset_of(&edge.right) || edge.differences.len() < depth {
            return Err(FusionError::Clause(format!("edge box for ({a}, {b})")));
        }
        let separations = edge
            .differences
            .iter()
            .map(|&time| SeparationEvent {
                time,
                lower: Dyadic::one(),
            })
            .collect();
        edges.push(EdgeCertificate {
            level,
            a,
            b,
            psi,
            separations,
        });
    }

    let leaves = scheme.leaves();
    let stages = (0..leaves.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in i + 1..leaves.len() {
                let a = Word::from_value(i as u64, depth);
                let b = Word::from_value(j as u64, depth);
                let split = a.first_difference(&b).expect("distinct leaves");
                let event = match oracle.r_test(split + 1, &leaves[i], &leaves[j])? {
                    Verdict::Holds(e) => e,
                    _ => {
                        return Err(FusionError::Clause(format!(
                            "R-clique: ({a}, {b}) has no stage-{} event",
                            split + 1
                        )))
                    }
                };
                out.push(PairStage { a, b, event });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, FusionError>>()?
        .into_iter()
        .flatten()
        .collect();

    Ok(HomomorphismCertificate {
        oracle: oracle.name().to_string(),
        system: oracle.system().clone(),
        depth,
        scheme,
        edges,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(n: usize, phi: Vec<Vec<Nat>>, psi: Vec<Vec<Vec<Nat>>>) -> Approximation {
        Stage { n, phi, psi }
    }

    #[test]
    fn one_step_clauses() {
        let a0 = initial_approximation();
        assert!(a0.has_shape());
        let a1 = approx(1, vec![vec![0], vec![1]], vec![vec![vec![0]]]);
        assert!(check_one_step(&a0, &a1));
        assert!(!check_one_step(&a0, &a0));
        assert!(!check_one_step(&a1, &a1));
        let same = approx(1, vec![vec![], vec![1]], vec![vec![vec![0]]]);
        assert!(one_step_violation(&a0, &same).unwrap().contains("(b)"));
        let bad_shape = approx(1, vec![vec![0]], vec![vec![vec![0]]]);
        assert!(!check_one_step(&a0, &bad_shape));
        let a2 = approx(
            2,
            vec![vec![0, 1], vec![0, 2], vec![1, 1], vec![1, 2]],
            vec![vec![vec![5, 1], vec![6, 1]], vec![vec![0, 0]]],
        );
        assert!(one_step_violation(&a1, &a2).unwrap().contains("(c)"));
    }

    #[test]
    fn compatibility_clauses() {
        let a1 = approx(1, vec![vec![0], vec![1]], vec![vec![vec![0]]]);
        let g = |p: Vec<Nat>| BaireElem::new(p, vec![7]).unwrap();
        let gamma = Stage {
            n: 1,
            phi: vec![g(vec![0, 3]), g(vec![1])],
            psi: vec![vec![g(vec![0])]],
        };
        assert!(check_compatible(&gamma, &a1));
        let wrong = Stage {
            n: 1,
            phi: vec![g(vec![2]), g(vec![1])],
            psi: vec![vec![g(vec![0])]],
        };
        assert!(compatibility_violation(&wrong, &a1).unwrap().contains("(ii)"));
        let deeper = Stage {
            n: 0,
            phi: vec![g(vec![])],
            psi: vec![],
        };
        assert!(compatibility_violation(&deeper, &a1).unwrap().contains("(i)"));
    }

    #[test]
    fn baire_prefixes() {
        let x = BaireElem::new(vec![1], vec![2, 3]).unwrap();
        assert!(x.starts_with(&[1, 2, 3, 2]));
        assert!(!x.starts_with(&[1, 3]));
        assert_eq!(x.take(4), vec![1, 2, 3, 2]);
        assert!(BaireElem::new(vec![], vec![]).is_err());
    }
}
