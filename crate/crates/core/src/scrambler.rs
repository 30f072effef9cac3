//! Explicit scrambled Cantor schemes.
//!
//! A branch `x ∈ 2^ℕ` is coded stage by stage as
//! `Φ(x) = ∏_m (x_0 … x_m) ⌢ 0^{L(m)} ⌢ marker` with `L(m) = (m + 1)^2`.
//! Long shared zero runs make every pair of branches proximal, and the
//! data segments keep distinct branches apart at every stage after their
//! first difference. For the shift the marker is empty; for the tent map
//! a single `1` follows each zero run and cells are the itinerary
//! intervals of the coded words. On a subshift of finite type each data
//! bit may be followed by a few zeros (the plan's gap) to keep the coded
//! words clear of forbidden words.
//!
//! The transversal pipeline composes a Mycielski scheme with a fusion
//! homomorphism, giving a scheme whose branches are pairwise `R`-related
//! and pairwise split by the dense open sets.

use thiserror::Error;

use crate::cantor::{validate_scheme, Scheme, Word};
use crate::dyadic::Dyadic;
use crate::fusion::{FusionError, FusionOracle, HomomorphismCertificate, MycielskiScheme};
use crate::relations::{leaf_pair_events, EventPolicy, PairEvents, StageEvent, Verdict};
use crate::systems::{itinerary_interval, Cell, Orbit, Pattern, SystemError, SystemHandle, SystemKind};

#[derive(Debug, Error)]
pub enum ScrambleError {
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("a depth-{depth} scheme needs at least {depth} stages, the plan has {stages}")]
    TooFewStages { depth: usize, stages: usize },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("scheme is invalid: {0}")]
    Invalid(String),
    #[error("closed-form prediction failed for ({a}, {b}): {what}")]
    Plan { a: Word, b: Word, what: String },
    #[error("no Mycielski depth fits inside the depth-{0} homomorphism")]
    DepthIncompatible(usize),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

/// Stage layout of the coding `Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    /// Number of marker symbols after each zero run (0 or 1).
    pub marker: usize,
    /// Zeros written after each data bit.
    pub gap: usize,
    /// Number of materialized stages.
    pub stages: usize,
}

/// Largest gap tried by [`plan_for`].
pub const MAX_GAP: usize = 8;

impl BlockPlan {
    pub fn shift(stages: usize) -> Self {
        BlockPlan {
            marker: 0,
            gap: 0,
            stages,
        }
    }

    pub fn tent(stages: usize) -> Self {
        BlockPlan {
            marker: 1,
            gap: 0,
            stages,
        }
    }

    pub fn with_gap(self, gap: usize) -> Self {
        BlockPlan { gap, ..self }
    }

    /// `L(m) = (m + 1)^2`.
    pub fn padding(m: usize) -> usize {
        (m + 1) * (m + 1)
    }

    pub fn stage_len(&self, m: usize) -> usize {
        (m + 1) * (1 + self.gap) + BlockPlan::padding(m) + self.marker
    }

    /// `p_m`.
    pub fn start(&self, m: usize) -> usize {
        (0..m).map(|i| self.stage_len(i)).sum()
    }

    /// Position of data bit `j` of stage `m`.
    pub fn data_time(&self, m: usize, j: usize) -> usize {
        self.start(m) + j * (1 + self.gap)
    }

    /// `r_m = p_m + (m + 1)(1 + gap)`, where the zero run of stage `m` begins.
    pub fn proximal_time(&self, m: usize) -> usize {
        self.data_time(m, m + 1)
    }

    pub fn len(&self) -> usize {
        self.start(self.stages)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of stages `m` with `p_m ≤ horizon` in this layout.
    pub fn stages_within(&self, horizon: usize) -> usize {
        (0..).take_while(|&m| self.start(m) <= horizon).count()
    }

    /// `Φ` on the cylinder of `w`: data bits past `|w|` are wildcards.
    pub fn pattern(&self, w: &Word) -> Pattern {
        let mut symbols = Vec::with_capacity(self.len());
        for m in 0..self.stages {
            for j in 0..=m {
                symbols.push(w.get(j));
                symbols.extend(std::iter::repeat_n(Some(false), self.gap));
            }
            symbols.extend(std::iter::repeat_n(Some(false), BlockPlan::padding(m)));
            symbols.extend(std::iter::repeat_n(Some(true), self.marker));
        }
        Pattern::from_symbols(symbols)
    }
}

/// Thresholds of a scrambled-set certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScrambleParams {
    /// Proximal schedule runs through stage `n` with `2^-n ≤ eps`.
    pub eps: Dyadic,
    /// Separation events are times with lower bound at least `delta`.
    pub delta: Dyadic,
    /// Minimum number of separation events per pair.
    pub k: usize,
    pub horizon: usize,
    /// Added to `2^-n` in the δ-proximal schedule.
    pub slack: Dyadic,
}

impl ScrambleParams {
    pub fn validate(&self) -> Result<(), ScrambleError> {
        if !self.eps.is_positive() || !self.delta.is_positive() {
            return Err(ScrambleError::Params("eps and delta must be positive".into()));
        }
        if self.k == 0 {
            return Err(ScrambleError::Params("k must be at least 1".into()));
        }
        if self.slack.is_negative() {
            return Err(ScrambleError::Params("slack must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn max_stage(&self) -> usize {
        self.eps.ceil_log2_inverse() as usize
    }

    pub fn policy(&self) -> EventPolicy {
        EventPolicy {
            delta: self.delta.clone(),
            horizon: self.horizon,
            max_stage: self.max_stage(),
            slack: self.slack.clone(),
        }
    }
}

fn check_depth(depth: usize, plan: &BlockPlan) -> Result<(), ScrambleError> {
    if depth == 0 {
        return Err(ScrambleError::ZeroDepth);
    }
    if plan.stages < depth {
        return Err(ScrambleError::TooFewStages {
            depth,
            stages: plan.stages,
        });
    }
    Ok(())
}

/// Cells `Φ(⟦w⟧)` for the full shift.
pub fn shift_scramble(depth: usize, plan: &BlockPlan) -> Result<Scheme, ScrambleError> {
    check_depth(depth, plan)?;
    Ok(Scheme::build(depth, |w| Cell::Symbolic(plan.pattern(w))))
}

/// Cells `I_u` for `u` the determined prefix of `Φ'(⟦w⟧)`.
pub fn tent_scramble(depth: usize, plan: &BlockPlan) -> Result<Scheme, ScrambleError> {
    check_depth(depth, plan)?;
    let scheme = Scheme::build(depth, |w| {
        Cell::Interval(itinerary_interval(&plan.pattern(w).determined_prefix()))
    });
    let report = validate_scheme(&scheme, &SystemHandle::tent());
    match report.violations.first() {
        Some(v) => Err(ScrambleError::Invalid(v.to_string())),
        None => Ok(scheme),
    }
}

/// The plan used by [`scramble`]: every stage starting within the horizon
/// for symbolic systems, `depth` stages for the tent map. On a subshift of
/// finite type the gap is the least one, up to [`MAX_GAP`], whose scheme is
/// valid.
pub fn plan_for(sys: &SystemHandle, depth: usize, horizon: usize) -> BlockPlan {
    let symbolic = |gap: usize| {
        let probe = BlockPlan::shift(0).with_gap(gap);
        BlockPlan::shift(depth.max(probe.stages_within(horizon))).with_gap(gap)
    };
    match sys.kind {
        SystemKind::Tent => BlockPlan::tent(depth),
        SystemKind::FullShift => symbolic(0),
        SystemKind::Sft { .. } => (0..=MAX_GAP)
            .map(symbolic)
            .find(|plan| scheme_for(sys, depth, plan).is_ok())
            .unwrap_or_else(|| symbolic(0)),
    }
}

/// Builds the scheme of `sys` at `depth`, checked for validity.
pub fn scheme_for(sys: &SystemHandle, depth: usize, plan: &BlockPlan) -> Result<Scheme, ScrambleError> {
    let scheme = match sys.kind {
        SystemKind::Tent => tent_scramble(depth, plan)?,
        _ => shift_scramble(depth, plan)?,
    };
    let report = validate_scheme(&scheme, sys);
    match report.violations.first() {
        Some(v) => Err(ScrambleError::Invalid(v.to_string())),
        None => Ok(scheme),
    }
}

/// A separation threshold met by every positive lower bound the scheme
/// can produce: `1` for sequence spaces, `2^-e` for intervals whose
/// endpoints have exponent at most `e`.
pub fn default_delta(sch: &Scheme) -> Dyadic {
    let e = sch
        .leaves()
        .iter()
        .filter_map(|c| match c {
            Cell::Interval(i) => Some(i.lo.exponent().max(i.hi.exponent())),
            Cell::Symbolic(_) => None,
        })
        .max();
    e.map_or_else(Dyadic::one, Dyadic::pow2_neg)
}

/// A constructed scheme with the events of every leaf pair.
#[derive(Debug, Clone)]
pub struct Scrambled {
    pub system: SystemHandle,
    pub plan: BlockPlan,
    pub depth: usize,
    pub scheme: Scheme,
    pub params: ScrambleParams,
    pub pairs: Vec<PairEvents>,
}

/// A pair that misses a threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortfall {
    pub a: Word,
    pub b: Word,
    pub reason: String,
}

impl Scrambled {
    /// Pairs whose proximal schedule is incomplete or with fewer than `k`
    /// separation events.
    pub fn shortfalls(&self) -> Vec<Shortfall> {
        self.pairs
            .iter()
            .filter_map(|p| {
                let reason = if !p.schedule_complete() {
                    let n = p.stages.iter().position(Option::is_none).unwrap_or(0);
                    format!("no stage-{n} proximal event within horizon {}", self.params.horizon)
                } else if p.separations.len() < self.params.k {
                    format!("{} separation events, need {}", p.separations.len(), self.params.k)
                } else {
                    return None;
                };
                Some(Shortfall {
                    a: p.a.clone(),
                    b: p.b.clone(),
                    reason,
                })
            })
            .collect()
    }
}

/// Builds the scheme, collects events and checks them against the
/// closed-form predictions of the plan.
pub fn scramble(sys: &SystemHandle, depth: usize, params: &ScrambleParams) -> Result<Scrambled, ScrambleError> {
    params.validate()?;
    let plan = plan_for(sys, depth, params.horizon);
    let scheme = scheme_for(sys, depth, &plan)?;
    check_plan(sys, &plan, &scheme, params.horizon)?;
    let pairs = leaf_pair_events(sys, scheme.leaves(), depth, &params.policy())?;
    Ok(Scrambled {
        system: sys.clone(),
        plan,
        depth,
        scheme,
        params: params.clone(),
        pairs,
    })
}

/// Checks the plan's predictions on every leaf pair with first difference
/// `k`, for stages whose event time is within the horizon: separation at
/// data bit `k` of every stage `m ≥ k` (distance exactly 1 on sequence
/// spaces, positive on the interval), and a bound `2^-L(m)` at `r_m`,
/// strictly decreasing in `m ≥ k` on sequence spaces.
pub fn check_plan(sys: &SystemHandle, plan: &BlockPlan, sch: &Scheme, horizon: usize) -> Result<(), ScrambleError> {
    use rayon::prelude::*;
    let depth = sch.depth();
    let orbits = sch
        .leaves()
        .par_iter()
        .map(|c| Orbit::new(sys, c, horizon))
        .collect::<Result<Vec<_>, _>>()?;
    let stages: Vec<usize> = (0..plan.stages).filter(|&m| plan.proximal_time(m) <= horizon).collect();
    (0..orbits.len()).into_par_iter().try_for_each(|i| {
        for j in i + 1..orbits.len() {
            let a = Word::from_value(i as u64, depth);
            let b = Word::from_value(j as u64, depth);
            let fail = |what: String| ScrambleError::Plan {
                a: a.clone(),
                b: b.clone(),
                what,
            };
            let k = a.first_difference(&b).expect("distinct leaves");
            for m in k..plan.stages {
                let t = plan.data_time(m, k);
                if t > horizon {
                    break;
                }
                let lower = orbits[i].dist_at(&orbits[j], t).lower;
                let ok = if sys.is_symbolic() {
                    lower == Dyadic::one()
                } else {
                    lower.is_positive()
                };
                if !ok {
                    return Err(fail(format!("separation at bit {k} of stage {m} (time {t}) has lower bound {lower}")));
                }
            }
            let mut previous: Option<Dyadic> = None;
            for &m in &stages {
                let upper = orbits[i].dist_at(&orbits[j], plan.proximal_time(m)).upper;
                if upper > Dyadic::pow2_neg(BlockPlan::padding(m) as u32) {
                    return Err(fail(format!("proximal bound {upper} at r_{m} exceeds 2^-L({m})")));
                }
                if sys.is_symbolic() && m >= k {
                    if previous.as_ref().is_some_and(|p| upper >= *p) {
                        return Err(fail(format!("proximal bound at r_{m} does not decrease")));
                    }
                    previous = Some(upper);
                }
            }
        }
        Ok(())
    })
}

/// Outcome of [`epsilon_scramble_report`].
#[derive(Debug, Clone)]
pub struct EpsilonReport {
    pub eps: Dyadic,
    pub pairs: usize,
    pub shortfalls: Vec<Shortfall>,
}

impl EpsilonReport {
    pub fn holds(&self) -> bool {
        self.shortfalls.is_empty()
    }
}

/// Desk check that the scheme's branches are `(ε/2)`-scrambled: every
/// pair needs `k` times with distance certified strictly above `ε/2` and
/// δ-proximal stage events (slack `params.slack`) for stages
/// `0..=stages`.
pub fn epsilon_scramble_report(
    sys: &SystemHandle,
    sch: &Scheme,
    params: &ScrambleParams,
    stages: usize,
) -> Result<EpsilonReport, ScrambleError> {
    params.validate()?;
    let half = params.eps.half();
    let policy = EventPolicy {
        delta: half.clone(),
        horizon: params.horizon,
        max_stage: stages,
        slack: params.slack.clone(),
    };
    let pairs = leaf_pair_events(sys, sch.leaves(), sch.depth(), &policy)?;
    let shortfalls = pairs
        .iter()
        .filter_map(|p| {
            let above = p.separations.iter().filter(|e| e.lower > half).count();
            let reason = if above < params.k {
                format!("{above} times above eps/2 = {half}, need {}", params.k)
            } else {
                let n = p.stages.iter().position(Option::is_none)?;
                format!("no stage-{n} event of the delta-proximal schedule")
            };
            Some(Shortfall {
                a: p.a.clone(),
                b: p.b.clone(),
                reason,
            })
        })
        .collect();
    Ok(EpsilonReport {
        eps: params.eps.clone(),
        pairs: pairs.len(),
        shortfalls,
    })
}

/// One branch pair of a pipeline scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelinePair {
    pub a: Word,
    pub b: Word,
    /// `R` event at the split level of the two labels, when `R` is
    /// nontrivial.
    pub stage: Option<StageEvent>,
    /// `(k, position)` witnesses that the labels lie in the `k`-th dense
    /// open set.
    pub splitting: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct PipelineScheme {
    pub depth: usize,
    pub system: SystemHandle,
    pub oracle: String,
    pub family: String,
    pub scheme: Scheme,
    /// Label (Mycielski word) of every node, level by level.
    pub labels: Vec<Vec<Word>>,
    pub pairs: Vec<PipelinePair>,
}

/// Largest depth whose Mycielski words are all valid inputs of the
/// homomorphism's scheme.
pub fn pipeline_depth(hom: &HomomorphismCertificate, myc: &MycielskiScheme) -> usize {
    (0..=myc.depth())
        .take_while(|&d| myc.words[d].iter().all(|w| w.len() <= hom.depth))
        .last()
        .unwrap_or(0)
}

/// Composes the Mycielski injection with the fusion homomorphism: the
/// cell at `w` is the homomorphism's cell at the Mycielski word of `w`.
pub fn transversal_clique_pipeline(
    oracle: &dyn FusionOracle,
    hom: &HomomorphismCertificate,
    myc: &MycielskiScheme,
) -> Result<PipelineScheme, ScrambleError> {
    use rayon::prelude::*;
    let depth = pipeline_depth(hom, myc);
    if depth == 0 {
        return Err(ScrambleError::DepthIncompatible(hom.depth));
    }
    let labels: Vec<Vec<Word>> = myc.words[..=depth].to_vec();
    let levels = labels
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|u| hom.scheme.cell(u).cloned().expect("label within depth"))
                .collect()
        })
        .collect();
    let scheme = Scheme::from_levels(levels).expect("full levels");
    let leaves = scheme.leaves();
    let leaf_labels = &labels[depth];
    let pairs = (0..leaves.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for j in i + 1..leaves.len() {
                let a = Word::from_value(i as u64, depth);
                let b = Word::from_value(j as u64, depth);
                let split = leaf_labels[i]
                    .first_difference(&leaf_labels[j])
                    .expect("labels of distinct nodes differ");
                let stage = match oracle.r_test(split + 1, &leaves[i], &leaves[j])? {
                    Verdict::Holds(e) => e,
                    _ => {
                        return Err(ScrambleError::Plan {
                            a,
                            b,
                            what: format!("no R event at stage {}", split + 1),
                        })
                    }
                };
                let splitting = myc.pair_witnesses(&a, &b);
                row.push(PipelinePair { a, b, stage, splitting });
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, ScrambleError>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(PipelineScheme {
        depth,
        system: hom.system.clone(),
        oracle: hom.oracle.clone(),
        family: myc.family.clone(),
        scheme,
        labels,
        pairs,
    })
}
