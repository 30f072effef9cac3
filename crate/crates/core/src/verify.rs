//! Independent checking of certificates.
//!
//! Nothing recorded in a certificate is trusted: the system is rebuilt from
//! its spec, the scheme is re-validated, the pair list must be exactly the
//! sorted list of leaf pairs, and every event is recomputed from the leaf
//! cells. Recorded events must equal the recomputation and each one is
//! re-checked on its own through orbit distances.

use std::fmt;

use rayon::prelude::*;

use crate::cantor::{g0_edge_level, validate_scheme, Scheme, Word};
use crate::certificate::{Certificate, PairRecord, SeparationRecord, StageRecord, FORMAT_VERSION};
use crate::dyadic::Dyadic;
use crate::fusion::mycielski::family_by_name;
use crate::fusion::{mycielski_fuse, DenseOpenFamily, DifferenceOracle, FusionOracle};
use crate::relations::{leaf_pair_events, Verdict};
use crate::scrambler::ScrambleParams;
use crate::systems::{Cell, Orbit, SystemHandle};

/// Result of one check class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub class: &'static str,
    pub checked: usize,
    /// First counterexample, if any.
    pub failure: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub construction: String,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed())
    }

    pub fn check(&self, class: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.class == class)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            match &c.failure {
                None => writeln!(f, "ok    {:<11} {} checked", c.class, c.checked)?,
                Some(why) => writeln!(f, "FAIL  {:<11} {why}", c.class)?,
            }
        }
        write!(f, "{}", if self.passed() { "certificate verified" } else { "certificate rejected" })
    }
}

/// Deepest certificate the checker accepts.
pub const MAX_DEPTH: usize = 24;

enum Construction {
    Scramble(ScrambleParams),
    Fuse(DifferenceOracle),
    Mycielski(Box<dyn DenseOpenFamily>),
    Pipeline(DifferenceOracle, Box<dyn DenseOpenFamily>),
}

struct Context<'a> {
    cert: &'a Certificate,
    depth: usize,
    sys: SystemHandle,
    leaves: Vec<Cell>,
    orbits: Vec<Orbit>,
}

impl Context<'_> {
    fn leaf(&self, w: &Word) -> usize {
        w.value() as usize
    }

    fn cells(&self, p: &PairRecord) -> (&Cell, &Cell) {
        (&self.leaves[self.leaf(&p.a)], &self.leaves[self.leaf(&p.b)])
    }

    fn orbits(&self, p: &PairRecord) -> (&Orbit, &Orbit) {
        (&self.orbits[self.leaf(&p.a)], &self.orbits[self.leaf(&p.b)])
    }
}

fn outcome(class: &'static str, checked: usize, failure: Option<String>) -> CheckOutcome {
    CheckOutcome { class, checked, failure }
}

fn per_pair<F>(class: &'static str, pairs: &[PairRecord], check: F) -> CheckOutcome
where
    F: Fn(&PairRecord) -> Result<(), String> + Sync,
{
    let failure = pairs
        .par_iter()
        .find_map_first(|p| check(p).err().map(|why| format!("pair {}: {why}", p.name())));
    outcome(class, pairs.len(), failure)
}

fn check_header(cert: &Certificate) -> Result<(SystemHandle, Construction), String> {
    let h = &cert.header;
    if h.version != FORMAT_VERSION {
        return Err(format!("format version {}, expected {FORMAT_VERSION}", h.version));
    }
    if h.depth == 0 || h.depth > MAX_DEPTH {
        return Err(format!("depth {} outside 1..={MAX_DEPTH}", h.depth));
    }
    let sys = SystemHandle::from_spec(&h.system).map_err(|e| e.to_string())?;
    let oracle = |name: &Option<String>| -> Result<DifferenceOracle, String> {
        let name = name.as_deref().ok_or("missing oracle")?;
        let o = DifferenceOracle::by_name(name).map_err(|e| e.to_string())?;
        if o.system().spec() != h.system {
            return Err(format!("oracle {name} does not present system {}", h.system.name));
        }
        Ok(o)
    };
    let family = |name: &Option<String>| -> Result<Box<dyn DenseOpenFamily>, String> {
        family_by_name(name.as_deref().ok_or("missing relation")?).map_err(|e| e.to_string())
    };
    let construction = match h.construction.as_str() {
        "scramble" => {
            let p = h.params.as_ref().ok_or("missing params")?;
            let params = ScrambleParams {
                eps: p.eps.clone(),
                delta: p.delta.clone(),
                k: p.k,
                horizon: h.horizon,
                slack: p.slack.clone(),
            };
            params.validate().map_err(|e| e.to_string())?;
            if h.oracle.is_some() || h.relation.is_some() {
                return Err("scramble certificates take no oracle or relation".into());
            }
            Construction::Scramble(params)
        }
        "fuse" => {
            if h.relation.is_some() {
                return Err("fuse certificates take no relation".into());
            }
            Construction::Fuse(oracle(&h.oracle)?)
        }
        "mycielski" => {
            if h.oracle.is_some() || sys != SystemHandle::full_shift() {
                return Err("mycielski certificates live on the full shift without an oracle".into());
            }
            Construction::Mycielski(family(&h.relation)?)
        }
        "pipeline" => Construction::Pipeline(oracle(&h.oracle)?, family(&h.relation)?),
        other => return Err(format!("unknown construction {other:?}")),
    };
    if !matches!(construction, Construction::Scramble(_)) && h.params.is_some() {
        return Err("params are only meaningful for scramble certificates".into());
    }
    if cert.labels.is_some() != matches!(construction, Construction::Pipeline(..)) {
        return Err("labels are present exactly for pipeline certificates".into());
    }
    Ok((sys, construction))
}

fn check_scheme(cert: &Certificate, sys: &SystemHandle) -> Result<Scheme, String> {
    let sch = cert.scheme_tree()?;
    if let Some(v) = validate_scheme(&sch, sys).violations.first() {
        return Err(v.to_string());
    }
    Ok(sch)
}

fn check_coverage(cert: &Certificate, construction: &Construction) -> Result<(), String> {
    let depth = cert.header.depth;
    let n = 1u64 << depth;
    let expected = (n * (n - 1) / 2) as usize;
    if cert.pairs.len() != expected {
        return Err(format!("{} pairs listed, expected {expected}", cert.pairs.len()));
    }
    let mut i = 0u64;
    let mut j = 1u64;
    for p in &cert.pairs {
        let (a, b) = (Word::from_value(i, depth), Word::from_value(j, depth));
        if p.a != a || p.b != b {
            return Err(format!("found {} where ({a}, {b}) was expected", p.name()));
        }
        let stray = match construction {
            Construction::Scramble(_) => p.edge.is_some() || !p.splitting.is_empty(),
            Construction::Fuse(_) => !p.splitting.is_empty(),
            Construction::Mycielski(_) => p.edge.is_some() || !p.proximal.is_empty() || !p.separation.is_empty(),
            Construction::Pipeline(..) => p.edge.is_some() || !p.separation.is_empty(),
        };
        if stray {
            return Err(format!("pair {} carries fields foreign to {}", p.name(), cert.header.construction));
        }
        j += 1;
        if j == n {
            i += 1;
            j = i + 1;
        }
    }
    Ok(())
}

fn horizon_of(sch: &Scheme) -> usize {
    sch.leaves()
        .iter()
        .map(|c| match c {
            Cell::Symbolic(p) => p.len(),
            Cell::Interval(_) => 0,
        })
        .max()
        .unwrap_or(0)
}

/// Checks a certificate, stopping after the first structural failure.
pub fn verify(cert: &Certificate) -> VerifyReport {
    let mut report = VerifyReport {
        construction: cert.header.construction.clone(),
        checks: Vec::new(),
    };
    let (sys, construction) = match check_header(cert) {
        Ok(v) => {
            report.checks.push(outcome("header", 1, None));
            v
        }
        Err(why) => {
            report.checks.push(outcome("header", 1, Some(why)));
            return report;
        }
    };
    let sch = match check_scheme(cert, &sys) {
        Ok(s) => s,
        Err(why) => {
            report.checks.push(outcome("scheme", cert.scheme.len(), Some(why)));
            return report;
        }
    };
    let horizon = cert.header.horizon;
    let horizon_failure = match construction {
        Construction::Scramble(_) => None,
        _ if horizon_of(&sch) != horizon => Some(format!(
            "header horizon {horizon}, longest leaf cell has length {}",
            horizon_of(&sch)
        )),
        _ => None,
    };
    let done = horizon_failure.is_some();
    report.checks.push(outcome("scheme", cert.scheme.len(), horizon_failure));
    if done {
        return report;
    }
    let coverage = check_coverage(cert, &construction).err();
    let done = coverage.is_some();
    report.checks.push(outcome("coverage", cert.pairs.len(), coverage));
    if done {
        return report;
    }

    let leaves = sch.leaves().to_vec();
    let orbits = match leaves.par_iter().map(|c| Orbit::new(&sys, c, horizon)).collect() {
        Ok(o) => o,
        Err(e) => {
            report.checks.push(outcome("scheme", leaves.len(), Some(e.to_string())));
            return report;
        }
    };
    let ctx = Context {
        cert,
        depth: cert.header.depth,
        sys,
        leaves,
        orbits,
    };
    let checks = match &construction {
        Construction::Scramble(params) => scramble_checks(&ctx, params),
        Construction::Fuse(oracle) => fuse_checks(&ctx, oracle),
        Construction::Mycielski(family) => vec![splitting_check(&ctx, family.as_ref(), None)],
        Construction::Pipeline(oracle, family) => pipeline_checks(&ctx, oracle, family.as_ref()),
    };
    report.checks.extend(checks);
    report
}

fn scramble_checks(ctx: &Context, params: &ScrambleParams) -> Vec<CheckOutcome> {
    let pairs = &ctx.cert.pairs;
    let events = match leaf_pair_events(&ctx.sys, &ctx.leaves, ctx.depth, &params.policy()) {
        Ok(e) => e,
        Err(e) => return vec![outcome("proximal", pairs.len(), Some(format!("cannot recompute events: {e}")))],
    };
    let index = |p: &PairRecord| {
        let (i, j) = (ctx.leaf(&p.a), ctx.leaf(&p.b));
        let n = ctx.leaves.len();
        i * n - i * (i + 1) / 2 + (j - i - 1)
    };

    let proximal = per_pair("proximal", pairs, |p| {
        let expected: Vec<StageRecord> = events[index(p)].found_stages().iter().map(StageRecord::from).collect();
        if p.proximal != expected {
            let at = p.proximal.iter().zip(&expected).position(|(x, y)| x != y);
            return Err(match at {
                Some(i) => format!("stage event {i} is {:?}, recomputed {:?}", p.proximal[i], expected[i]),
                None => format!("{} stage events, recomputed {}", p.proximal.len(), expected.len()),
            });
        }
        let (x, y) = ctx.orbits(p);
        for StageRecord(n, m, upper) in &p.proximal {
            if *m > params.horizon || !x.horizon_covers(*m) {
                return Err(format!("stage {n} event at time {m} is beyond the horizon"));
            }
            let d = x.dist_at(y, *m);
            if d.upper != *upper {
                return Err(format!("upper bound at time {m} is {}, recorded {upper}", d.upper));
            }
            if d.upper >= &params.slack + &Dyadic::pow2_neg(*n as u32) {
                return Err(format!("time {m} is not stage-{n} close"));
            }
        }
        Ok(())
    });

    let separation = per_pair("separation", pairs, |p| {
        let expected: Vec<SeparationRecord> = events[index(p)].separations.iter().map(SeparationRecord::from).collect();
        if p.separation != expected {
            return Err(format!(
                "{} separation events recorded, recomputation gives {}",
                p.separation.len(),
                expected.len()
            ));
        }
        let (x, y) = ctx.orbits(p);
        for SeparationRecord(m, lower) in &p.separation {
            let d = x.dist_at(y, *m);
            if d.lower != *lower || d.lower < params.delta {
                return Err(format!("lower bound at time {m} is {}, recorded {lower}", d.lower));
            }
        }
        Ok(())
    });

    let max_stage = params.max_stage();
    let thresholds = per_pair("thresholds", pairs, |p| {
        if let Some(n) = (0..=max_stage).find(|&n| p.proximal.get(n).map(|r| r.0) != Some(n)) {
            return Err(format!("no stage-{n} proximal event within horizon {}", params.horizon));
        }
        if p.separation.len() < params.k {
            return Err(format!("{} separation events, need {}", p.separation.len(), params.k));
        }
        Ok(())
    });
    vec![proximal, separation, thresholds]
}

fn r_event(oracle: &dyn FusionOracle, n: usize, a: &Cell, b: &Cell) -> Result<Vec<StageRecord>, String> {
    match oracle.r_test(n, a, b).map_err(|e| e.to_string())? {
        Verdict::Holds(e) => Ok(e.iter().map(StageRecord::from).collect()),
        _ => Err(format!("no R event at stage {n}")),
    }
}

fn proximal_check<F>(ctx: &Context, oracle: &dyn FusionOracle, split_of: F) -> CheckOutcome
where
    F: Fn(&PairRecord) -> usize + Sync,
{
    per_pair("proximal", &ctx.cert.pairs, |p| {
        let (a, b) = ctx.cells(p);
        let n = split_of(p) + 1;
        let expected = r_event(oracle, n, a, b)?;
        if p.proximal != expected {
            return Err(format!("recorded stage-{n} event {:?}, recomputed {:?}", p.proximal, expected));
        }
        Ok(())
    })
}

fn fuse_checks(ctx: &Context, oracle: &DifferenceOracle) -> Vec<CheckOutcome> {
    let pairs = &ctx.cert.pairs;
    let edges = per_pair("edges", pairs, |p| {
        match (g0_edge_level(&p.a, &p.b), &p.edge) {
            (None, None) if p.separation.is_empty() => Ok(()),
            (None, None) => Err("separation events on a non-edge".into()),
            (None, Some(_)) => Err("edge record on a non-edge".into()),
            (Some(l), None) => Err(format!("G0 edge of level {l} without edge record")),
            (Some(l), Some(e)) => {
                if e.level != l {
                    return Err(format!("edge level {}, expected {l}", e.level));
                }
                let bx = oracle.edge(&e.psi).map_err(|e| e.to_string())?;
                let (a, b) = ctx.cells(p);
                if !a.is_subset_of(&bx.left) || !b.is_subset_of(&bx.right) {
                    return Err("leaf cells are not inside the edge box".into());
                }
                if bx.differences.len() < ctx.depth {
                    return Err(format!("edge box forces {} differences", bx.differences.len()));
                }
                let expected: Vec<SeparationRecord> =
                    bx.differences.iter().map(|&t| SeparationRecord(t, Dyadic::one())).collect();
                if p.separation != expected {
                    return Err("separation events differ from the edge box differences".into());
                }
                let (x, y) = ctx.orbits(p);
                match p.separation.iter().find(|r| x.dist_at(y, r.0).lower != Dyadic::one()) {
                    Some(r) => Err(format!("leaf cells are not separated at time {}", r.0)),
                    None => Ok(()),
                }
            }
        }
    });
    let proximal = proximal_check(ctx, oracle, |p| p.a.first_difference(&p.b).expect("distinct"));
    vec![edges, proximal]
}

fn leaf_word(c: &Cell) -> Option<Word> {
    match c {
        Cell::Symbolic(p) if p.determined_prefix_len() == p.len() => Some(p.determined_prefix()),
        _ => None,
    }
}

fn splitting_check(ctx: &Context, family: &dyn DenseOpenFamily, labels: Option<&[Word]>) -> CheckOutcome {
    per_pair("splitting", &ctx.cert.pairs, |p| {
        let (u, v) = match labels {
            Some(l) => (l[ctx.leaf(&p.a)].clone(), l[ctx.leaf(&p.b)].clone()),
            None => {
                let (a, b) = ctx.cells(p);
                (
                    leaf_word(a).ok_or("leaf cell is not a cylinder")?,
                    leaf_word(b).ok_or("leaf cell is not a cylinder")?,
                )
            }
        };
        let j = p.a.first_difference(&p.b).expect("distinct");
        let ks: Vec<usize> = p.splitting.iter().map(|w| w.0).collect();
        if ks != (j..ctx.depth).collect::<Vec<_>>() {
            return Err(format!("witnesses for sets {ks:?}, expected {j}..{}", ctx.depth));
        }
        match p.splitting.iter().find(|&&(k, pos)| !family.check_witness(k, &u, &v, pos)) {
            Some((k, pos)) => Err(format!("position {pos} does not witness set {k}")),
            None => Ok(()),
        }
    })
}

fn pipeline_checks(ctx: &Context, oracle: &DifferenceOracle, family: &dyn DenseOpenFamily) -> Vec<CheckOutcome> {
    let recorded = ctx.cert.labels.as_ref().expect("checked in header");
    let labels_failure = match mycielski_fuse(family, ctx.depth) {
        Err(e) => Some(e.to_string()),
        Ok(m) => {
            let expected: Vec<(String, Word)> = (0..=ctx.depth)
                .flat_map(|d| Word::all_of_length(d).map(|w| (w.to_string(), m.word(&w).clone())).collect::<Vec<_>>())
                .collect();
            if recorded.len() != expected.len() {
                Some(format!("{} labels, expected {}", recorded.len(), expected.len()))
            } else {
                expected
                    .iter()
                    .find(|(w, l)| recorded.get(w) != Some(l))
                    .map(|(w, l)| format!("label of {w:?} should be {l}"))
            }
        }
    };
    if labels_failure.is_some() {
        return vec![outcome("labels", recorded.len(), labels_failure)];
    }
    let leaf_labels: Vec<Word> = Word::all_of_length(ctx.depth)
        .map(|w| recorded[&w.to_string()].clone())
        .collect();
    let splitting = splitting_check(ctx, family, Some(&leaf_labels));
    let proximal = proximal_check(ctx, oracle, |p| {
        leaf_labels[ctx.leaf(&p.a)]
            .first_difference(&leaf_labels[ctx.leaf(&p.b)])
            .unwrap_or(0)
    });
    vec![outcome("labels", recorded.len(), None), splitting, proximal]
}
