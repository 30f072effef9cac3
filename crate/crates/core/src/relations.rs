//! Finite-horizon evaluation of proximality, asymptoticity and the
//! open filtration `R_n` of the proximal relation.
//!
//! `R = ⋂_n R_n` with `R_n = {(x, y) : ∃ m ≥ n, d(f^m x, f^m y) < 2^-n}`.
//! A cell pair is placed in `R_n` only when the bound holds for every
//! point of both cells. Liminf and limsup conditions cannot be refuted at
//! a finite horizon, so the checks here never produce `Fails`; their
//! verdict types make that branch uninhabited.

use std::convert::Infallible;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cantor::Word;
use crate::dyadic::Dyadic;
use crate::systems::{dist_cells, orbit_cell, Cell, DistBound, Orbit, SystemError, SystemHandle};

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("threshold must be positive, got {0}")]
    NonPositiveThreshold(Dyadic),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Outcome of a finite-horizon test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict<W, F = Infallible> {
    Holds(W),
    Fails(F),
    Unknown { horizon: usize },
}

impl<W, F> Verdict<W, F> {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds(_))
    }

    pub fn witness(&self) -> Option<&W> {
        match self {
            Verdict::Holds(w) => Some(w),
            _ => None,
        }
    }
}

/// `d(f^time x, f^time y) ≤ upper` for all points of the two cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProximalEvent {
    pub time: usize,
    pub upper: Dyadic,
}

/// `d(f^time x, f^time y) ≥ lower` for all points of the two cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeparationEvent {
    pub time: usize,
    pub lower: Dyadic,
}

/// `R_n` membership evidence: the pair is within `2^-n` (plus slack) at
/// time `time ≥ n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StageEvent {
    pub stage: usize,
    pub time: usize,
    pub upper: Dyadic,
}

fn positive(t: &Dyadic) -> Result<(), RelationError> {
    if t.is_positive() {
        Ok(())
    } else {
        Err(RelationError::NonPositiveThreshold(t.clone()))
    }
}

/// Distance bounds of a cell pair at every time `0..=horizon`.
///
/// Symbolic pairs keep only the exponents: at time `m` the upper bound is
/// `2^-runs[m]` (length of the forced agreement run starting at `m`) and
/// the lower bound is `2^-diff[m]` (offset of the next forced
/// disagreement), or zero.
#[derive(Debug, Clone)]
pub struct PairProfile {
    data: ProfileData,
}

#[derive(Debug, Clone)]
enum ProfileData {
    Symbolic {
        runs: Vec<u32>,
        diff: Vec<Option<u32>>,
    },
    General(Vec<DistBound>),
}

/// Smallest `j` with `2^-j < eps`.
fn min_exponent_below(eps: &Dyadic) -> u32 {
    let mut j = 0;
    while Dyadic::pow2_neg(j) >= *eps {
        j += 1;
    }
    j
}

/// Largest `i` with `2^-i >= delta`, if any.
fn max_exponent_at_least(delta: &Dyadic) -> Option<u32> {
    if !delta.is_positive() {
        return Some(u32::MAX);
    }
    if Dyadic::one() < *delta {
        return None;
    }
    Some(delta.floor_log2_inverse())
}

impl PairProfile {
    pub fn new(sys: &SystemHandle, a: &Cell, b: &Cell, horizon: usize) -> Result<Self, SystemError> {
        let oa = Orbit::new(sys, a, horizon)?;
        let ob = Orbit::new(sys, b, horizon)?;
        Ok(PairProfile::from_orbits(&oa, &ob, horizon))
    }

    pub fn from_orbits(a: &Orbit, b: &Orbit, horizon: usize) -> Self {
        if let (Orbit::Symbolic(p), Orbit::Symbolic(q)) = (a, b) {
            return PairProfile::symbolic(p.symbols(), q.symbols(), horizon);
        }
        PairProfile {
            data: ProfileData::General((0..=horizon).map(|m| a.dist_at(b, m)).collect()),
        }
    }

    fn symbolic(a: &[Option<bool>], b: &[Option<bool>], horizon: usize) -> Self {
        let len = a.len().min(b.len());
        let size = horizon + 1;
        let mut runs = vec![0u32; size.max(len + 1)];
        let mut next: Vec<Option<usize>> = vec![None; size.max(len + 1)];
        for i in (0..len).rev() {
            match (a[i], b[i]) {
                (Some(x), Some(y)) if x == y => {
                    runs[i] = runs[i + 1] + 1;
                    next[i] = next[i + 1];
                }
                (Some(_), Some(_)) => next[i] = Some(i),
                _ => next[i] = next[i + 1],
            }
        }
        runs.truncate(size);
        let diff = next[..size]
            .iter()
            .enumerate()
            .map(|(m, n)| n.map(|i| (i - m) as u32))
            .collect();
        PairProfile {
            data: ProfileData::Symbolic { runs, diff },
        }
    }

    pub fn horizon(&self) -> usize {
        match &self.data {
            ProfileData::Symbolic { runs, .. } => runs.len() - 1,
            ProfileData::General(b) => b.len() - 1,
        }
    }

    pub fn at(&self, m: usize) -> DistBound {
        match &self.data {
            ProfileData::Symbolic { runs, diff } => DistBound {
                lower: diff[m].map_or_else(Dyadic::zero, Dyadic::pow2_neg),
                upper: Dyadic::pow2_neg(runs[m]),
            },
            ProfileData::General(b) => b[m].clone(),
        }
    }

    /// First time in `from..=horizon` with upper bound strictly below `eps`.
    pub fn first_close(&self, from: usize, eps: &Dyadic) -> Option<ProximalEvent> {
        let end = self.horizon() + 1;
        let time = match &self.data {
            ProfileData::Symbolic { runs, .. } => {
                let j = min_exponent_below(eps);
                (from..end).find(|&m| runs[m] >= j)
            }
            ProfileData::General(b) => (from..end).find(|&m| b[m].upper < *eps),
        }?;
        Some(ProximalEvent {
            time,
            upper: self.at(time).upper,
        })
    }

    /// All times with lower bound at least `delta`.
    pub fn separations(&self, delta: &Dyadic) -> Vec<SeparationEvent> {
        match &self.data {
            ProfileData::Symbolic { diff, .. } => {
                let Some(max) = max_exponent_at_least(delta) else {
                    return Vec::new();
                };
                diff.iter()
                    .enumerate()
                    .filter_map(|(m, i)| match i {
                        Some(i) if *i <= max => Some(SeparationEvent {
                            time: m,
                            lower: Dyadic::pow2_neg(*i),
                        }),
                        _ => None,
                    })
                    .collect()
            }
            ProfileData::General(bounds) => bounds
                .iter()
                .enumerate()
                .filter(|(_, b)| b.lower >= *delta)
                .map(|(m, b)| SeparationEvent {
                    time: m,
                    lower: b.lower.clone(),
                })
                .collect(),
        }
    }

    /// Evidence for the stage-`n` set of the δ-proximal filtration:
    /// a time `m ≥ n` with upper bound below `slack + 2^-n`.
    pub fn stage_event(&self, n: usize, slack: &Dyadic) -> Option<StageEvent> {
        let eps = slack + &Dyadic::pow2_neg(n as u32);
        self.first_close(n, &eps).map(|e| StageEvent {
            stage: n,
            time: e.time,
            upper: e.upper,
        })
    }

    /// Stage events for `n = 0..=max_stage`; `None` where the horizon is
    /// exhausted.
    pub fn stage_schedule(&self, max_stage: usize, slack: &Dyadic) -> Vec<Option<StageEvent>> {
        (0..=max_stage).map(|n| self.stage_event(n, slack)).collect()
    }
}

/// Bounds on `d(f^m x, f^m y)` over the two cells, from scratch.
pub fn dist_at_time(sys: &SystemHandle, a: &Cell, b: &Cell, m: usize) -> Result<DistBound, SystemError> {
    dist_cells(sys, &orbit_cell(sys, a, m)?, &orbit_cell(sys, b, m)?)
}

/// Certifies `d(f^m x, f^m y) < eps` for all points of the cells at the
/// first such `m ≤ horizon`.
pub fn proximal_check(
    sys: &SystemHandle,
    a: &Cell,
    b: &Cell,
    eps: &Dyadic,
    horizon: usize,
) -> Result<Verdict<ProximalEvent>, RelationError> {
    positive(eps)?;
    let profile = PairProfile::new(sys, a, b, horizon)?;
    Ok(match profile.first_close(0, eps) {
        Some(e) => Verdict::Holds(e),
        None => Verdict::Unknown { horizon },
    })
}

/// Lists every `m ≤ horizon` at which the cells are certified at least
/// `delta` apart.
pub fn separation_check(
    sys: &SystemHandle,
    a: &Cell,
    b: &Cell,
    delta: &Dyadic,
    horizon: usize,
) -> Result<Verdict<Vec<SeparationEvent>>, RelationError> {
    positive(delta)?;
    let profile = PairProfile::new(sys, a, b, horizon)?;
    let events = profile.separations(delta);
    Ok(if events.is_empty() {
        Verdict::Unknown { horizon }
    } else {
        Verdict::Holds(events)
    })
}

pub type LiYorkeVerdict = (Verdict<ProximalEvent>, Verdict<Vec<SeparationEvent>>);

pub fn liyorke_check(
    sys: &SystemHandle,
    a: &Cell,
    b: &Cell,
    eps: &Dyadic,
    delta: &Dyadic,
    horizon: usize,
) -> Result<LiYorkeVerdict, RelationError> {
    Ok((
        proximal_check(sys, a, b, eps, horizon)?,
        separation_check(sys, a, b, delta, horizon)?,
    ))
}

/// Desk certification of a Li-Yorke pair: proximal, with at least `k`
/// separation events.
pub fn is_desk_liyorke(verdict: &LiYorkeVerdict, k: usize) -> bool {
    verdict.0.holds() && verdict.1.witness().is_some_and(|events| events.len() >= k)
}

/// Membership of the cell pair in `R_n` up to the horizon.
pub fn r_filtration_test(
    sys: &SystemHandle,
    a: &Cell,
    b: &Cell,
    n: usize,
    horizon: usize,
) -> Result<Verdict<StageEvent>, SystemError> {
    delta_filtration_test(sys, a, b, &Dyadic::zero(), n, horizon)
}

/// Stage `n` of the δ-proximal filtration: `∃ m ≥ n` with
/// `d < delta + 2^-n`. With `delta = 0` this is `R_n`.
pub fn delta_filtration_test(
    sys: &SystemHandle,
    a: &Cell,
    b: &Cell,
    delta: &Dyadic,
    n: usize,
    horizon: usize,
) -> Result<Verdict<StageEvent>, SystemError> {
    if horizon < n {
        sys.check_cell(a)?;
        sys.check_cell(b)?;
        return Ok(Verdict::Unknown { horizon });
    }
    let profile = PairProfile::new(sys, a, b, horizon)?;
    Ok(match profile.stage_event(n, delta) {
        Some(e) => Verdict::Holds(e),
        None => Verdict::Unknown { horizon },
    })
}

/// What to record for every pair of leaves of a scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventPolicy {
    /// Separation events are all times with lower bound at least `delta`.
    pub delta: Dyadic,
    pub horizon: usize,
    /// Stages `0..=max_stage` of the δ-proximal filtration are scheduled.
    pub max_stage: usize,
    pub slack: Dyadic,
}

/// Events of one leaf pair `a < b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairEvents {
    pub a: Word,
    pub b: Word,
    /// Indexed by stage; `None` where the horizon is exhausted.
    pub stages: Vec<Option<StageEvent>>,
    pub separations: Vec<SeparationEvent>,
}

impl PairEvents {
    pub fn found_stages(&self) -> Vec<StageEvent> {
        self.stages.iter().flatten().cloned().collect()
    }

    pub fn schedule_complete(&self) -> bool {
        self.stages.iter().all(Option::is_some)
    }
}

/// Events of every pair of leaves (cells of words of length `depth`, in
/// binary order), sorted by pair.
pub fn leaf_pair_events(
    sys: &SystemHandle,
    leaves: &[Cell],
    depth: usize,
    policy: &EventPolicy,
) -> Result<Vec<PairEvents>, SystemError> {
    let orbits = leaves
        .par_iter()
        .map(|c| Orbit::new(sys, c, policy.horizon))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Vec<PairEvents>> = (0..orbits.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..orbits.len())
                .map(|j| {
                    let profile = PairProfile::from_orbits(&orbits[i], &orbits[j], policy.horizon);
                    PairEvents {
                        a: Word::from_value(i as u64, depth),
                        b: Word::from_value(j as u64, depth),
                        stages: profile.stage_schedule(policy.max_stage, &policy.slack),
                        separations: profile.separations(&policy.delta),
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}
