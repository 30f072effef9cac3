//! Acceptance criteria 1-8. Each test prints one verdict line; run with
//! `--nocapture` to see them.

mod common;

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use scrambled::cantor::{canonical_s, density_witness, edge_in_cylinder, g0_involution, validate_scheme};
use scrambled::certificate::Certificate;
use scrambled::fusion::{
    check_coherent, check_compatible, check_one_step, check_r_compatible, fuse, merge_configurations,
    mycielski_fuse, project_configuration, DifferenceOracle, E0Complement, FuseOutcome, FusionOracle,
};
use scrambled::scrambler::{default_delta, epsilon_scramble_report, plan_for, scheme_for, scramble, ScrambleParams};
use scrambled::verify::verify;
use scrambled::{cli, Dyadic, SystemHandle, Word};

use common::*;

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn verify_from_file(cert: &Certificate) -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("cert.json");
    cert.emit(&path).map_err(|e| e.to_string())?;
    let loaded = Certificate::load(&path).map_err(|e| e.to_string())?;
    ensure(&loaded == cert, || "certificate changed on reload".into())?;
    let report = verify(&loaded);
    ensure(report.passed(), || format!("verifier rejected:\n{report}"))
}

fn criterion_1() -> Result<String, String> {
    for n in 0..=4096 {
        let s = canonical_s(n);
        ensure(s.len() == n, || format!("|s_{n}| = {}", s.len()))?;
        ensure(s.bits() == oracle_s(n).as_slice(), || format!("s_{n} differs from length-lex order"))?;
    }
    let table: Vec<Vec<bool>> = (0..=4096).map(oracle_s).collect();
    let mut words = 0;
    for len in 0..=10 {
        for w in Word::all_of_length(len) {
            let least = table
                .iter()
                .position(|s| s.starts_with(w.bits()))
                .ok_or_else(|| format!("no s_n below 4096 extends {w}"))?;
            let n = density_witness(&w);
            ensure(table.get(n).is_some_and(|s| s.starts_with(w.bits())), || {
                format!("{w} is not a prefix of s_{n}")
            })?;
            ensure(n == least, || format!("density_witness({w}) = {n}, least is {least}"))?;
            words += 1;
        }
    }
    Ok(format!("4097 lengths, {words} words, least witnesses"))
}

#[test]
fn acceptance_1_canonical_family() {
    let t = Instant::now();
    assert!(report(1, t, criterion_1()));
}

fn criterion_2() -> Result<String, String> {
    let table: Vec<Vec<bool>> = (0..=600).map(oracle_s).collect();
    let mut count = 0;
    for len in 0..=8 {
        for s in Word::all_of_length(len) {
            let least = table.iter().position(|t| t.starts_with(s.bits())).expect("within table");
            let (u, v) = edge_in_cylinder(&s, least + 3).map_err(|e| e.to_string())?;
            ensure(s.is_prefix_of(&u) && s.is_prefix_of(&v), || format!("edge for {s} leaves its cylinder"))?;
            let diffs: Vec<usize> = (0..u.len()).filter(|&i| u.get(i) != v.get(i)).collect();
            ensure(u.len() == v.len() && diffs.len() == 1, || format!("({u}, {v}) differ in {diffs:?}"))?;
            let n = diffs[0];
            ensure(u.bits()[..n] == table[n][..], || format!("({u}, {v}) does not branch at s_{n}"))?;
            ensure(g0_involution(n, &u).ok() == Some(v.clone()), || format!("involution misses {v}"))?;
            ensure(g0_involution(n, &v).ok() == Some(u.clone()), || format!("involution misses {u}"))?;
            count += 1;
        }
    }
    Ok(format!("{count} cylinders"))
}

#[test]
fn acceptance_2_clopen_sets_contain_edges() {
    let t = Instant::now();
    assert!(report(2, t, criterion_2()));
}

fn criterion_3() -> Result<String, String> {
    let sys = SystemHandle::full_shift();
    let horizon = 440;
    let params = ScrambleParams {
        eps: Dyadic::pow2_neg(25),
        delta: Dyadic::one(),
        k: 3,
        horizon,
        slack: Dyadic::zero(),
    };
    let s = scramble(&sys, 8, &params).map_err(|e| e.to_string())?;
    ensure(s.pairs.len() == 32_640, || format!("{} pairs", s.pairs.len()))?;
    ensure(s.shortfalls().is_empty(), || format!("constructor shortfall {:?}", s.shortfalls()[0]))?;
    let bound = Dyadic::pow2_neg(25);
    for p in &s.pairs {
        let close = p.found_stages().iter().any(|e| e.upper <= bound);
        let separated = p.separations.iter().filter(|e| e.lower == Dyadic::one()).count();
        ensure(close && separated >= 3, || format!("constructor events for ({}, {})", p.a, p.b))?;
    }

    let leaves = s.scheme.leaves();
    let mut fewest = usize::MAX;
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            let (p, q) = (symbols(&leaves[i]), symbols(&leaves[j]));
            let runs = agreement_runs(p, q, horizon);
            ensure(runs.iter().any(|&r| r >= 25), || format!("leaves {i}, {j} never 2^-25 close"))?;
            let splits = (0..=horizon).filter(|&m| forced_split(p, q, m)).count();
            ensure(splits >= 3, || format!("leaves {i}, {j} split {splits} times"))?;
            fewest = fewest.min(splits);
        }
    }
    verify_from_file(&Certificate::from_scrambled(&s))?;
    Ok(format!("32640 pairs, at least {fewest} separations each, verifier agrees"))
}

#[test]
fn acceptance_3_shift_scrambled_scheme() {
    let t = Instant::now();
    assert!(report(3, t, criterion_3()));
}

fn criterion_4() -> Result<String, String> {
    let depth = 10;
    let m = mycielski_fuse(&E0Complement, depth).map_err(|e| e.to_string())?;
    let leaves: Vec<Word> = Word::all_of_length(depth).collect();
    let words: Vec<Vec<bool>> = leaves
        .iter()
        .map(|c| {
            let w = m.word(c).bits().to_vec();
            let expected: Vec<bool> = (1..=depth).flat_map(|i| c.bits()[..i].to_vec()).collect();
            if w == expected {
                Ok(w)
            } else {
                Err(format!("{c} is not coded by prefix repetition"))
            }
        })
        .collect::<Result<_, _>>()?;
    let block_of = |p: usize| (0..depth).take_while(|i| i * (i + 1) / 2 <= p).last().expect("p >= 0");
    let mut pairs = 0usize;
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            let k = (0..depth).find(|&t| leaves[i].bits()[t] != leaves[j].bits()[t]).expect("distinct");
            let (u, v) = (&words[i], &words[j]);
            let differing_blocks = (0..depth)
                .filter(|&b| (b * (b + 1) / 2..(b + 1) * (b + 2) / 2).any(|p| u[p] != v[p]))
                .count();
            ensure(differing_blocks >= depth - k, || {
                format!("({}, {}) differ in {differing_blocks} blocks", leaves[i], leaves[j])
            })?;
            let witnesses = m.pair_witnesses(&leaves[i], &leaves[j]);
            let mut blocks: Vec<usize> = witnesses.iter().map(|&(_, p)| block_of(p)).collect();
            ensure(witnesses.iter().all(|&(t, p)| p >= t && u[p] != v[p]), || {
                format!("bad witness for ({}, {})", leaves[i], leaves[j])
            })?;
            blocks.dedup();
            ensure(blocks.len() >= depth - k, || {
                format!("({}, {}) witnessed in {} blocks", leaves[i], leaves[j], blocks.len())
            })?;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} pairs over 1024 branches"))
}

#[test]
fn acceptance_4_mycielski_e0_splitting() {
    let t = Instant::now();
    assert!(report(4, t, criterion_4()));
}

fn criterion_5() -> Result<String, String> {
    let sys = SystemHandle::tent();
    let (depth, horizon) = (6, 118);
    let plan = plan_for(&sys, depth, horizon);
    let scheme = scheme_for(&sys, depth, &plan).map_err(|e| e.to_string())?;
    let params = ScrambleParams {
        eps: Dyadic::pow2_neg(16),
        delta: default_delta(&scheme),
        k: 1,
        horizon,
        slack: Dyadic::zero(),
    };
    let s = scramble(&sys, depth, &params).map_err(|e| e.to_string())?;
    let report = validate_scheme(&s.scheme, &sys);
    ensure(report.is_valid(), || format!("{}", report.violations[0]))?;
    ensure(s.shortfalls().is_empty(), || format!("constructor shortfall {:?}", s.shortfalls()[0]))?;

    let bound = Dyadic::pow2_neg(16);
    let orbits: Vec<_> = s.scheme.leaves().iter().map(|c| tent_orbit(c, horizon)).collect();
    for i in 0..orbits.len() {
        for j in i + 1..orbits.len() {
            let d: Vec<_> = (0..=horizon).map(|m| interval_distance(&orbits[i][m], &orbits[j][m])).collect();
            ensure(d.iter().any(|(_, up)| *up <= bound), || format!("leaves {i}, {j} never 2^-16 close"))?;
            ensure(d.iter().any(|(low, _)| low.is_positive()), || format!("leaves {i}, {j} never apart"))?;
        }
    }
    verify_from_file(&Certificate::from_scrambled(&s))?;
    Ok(format!("2016 pairs, delta = {}", params.delta))
}

#[test]
fn acceptance_5_tent_pushforward() {
    let t = Instant::now();
    assert!(report(5, t, criterion_5()));
}

fn criterion_6() -> Result<String, String> {
    let depth = 4;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("fuse.json");
    let args = ["scrambled", "fuse", "--oracle", "shift-liyorke", "--depth", "4", "--out"];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(
        args.iter().map(|s| s.to_string()).chain([path.display().to_string()]),
        &mut out,
        &mut err,
    );
    ensure(code == 0, || format!("fuse exited {code}: {}", String::from_utf8_lossy(&err)))?;
    let cert = Certificate::load(&path).map_err(|e| e.to_string())?;
    let r = verify(&cert);
    ensure(r.passed(), || format!("verifier rejected:\n{r}"))?;

    let oracle = DifferenceOracle::shift_liyorke();
    let table: Vec<Vec<bool>> = (0..depth).map(oracle_s).collect();
    let mut edges = 0;
    for p in &cert.pairs {
        let (a, b) = (p.a.bits(), p.b.bits());
        let diffs: Vec<usize> = (0..depth).filter(|&i| a[i] != b[i]).collect();
        let is_edge = diffs.len() == 1 && a[..diffs[0]] == table[diffs[0]][..] && a[diffs[0] + 1..] == b[diffs[0] + 1..];
        let (ca, cb) = (&cert.scheme[&p.a.to_string()], &cert.scheme[&p.b.to_string()]);
        let (sa, sb) = (symbols(ca), symbols(cb));
        ensure(is_edge == p.edge.is_some(), || format!("pair {} edge record mismatch", p.name()))?;
        if let Some(e) = &p.edge {
            let bx = oracle.edge(&e.psi).map_err(|e| e.to_string())?;
            ensure(ca.is_subset_of(&bx.left) && cb.is_subset_of(&bx.right), || {
                format!("pair {} outside its edge box", p.name())
            })?;
            ensure(bx.differences.len() >= depth, || format!("pair {} box too coarse", p.name()))?;
            ensure(bx.differences.iter().all(|&t| forced_split(sa, sb, t)), || {
                format!("pair {} not separated at a box difference", p.name())
            })?;
            edges += 1;
        }
        let n = diffs[0] + 1;
        ensure(p.proximal.len() == 1 && p.proximal[0].0 == n, || {
            format!("pair {} lacks its stage-{n} event", p.name())
        })?;
        let m = p.proximal[0].1;
        ensure(m >= n && agreement_run(sa, sb, m) > n, || {
            format!("pair {} is not 2^-{n} close at {m}", p.name())
        })?;
    }
    ensure(edges == 15, || format!("{edges} G0 edges at depth 4"))?;

    let FuseOutcome::Certified { trace, .. } = fuse(&oracle, depth, 1000).map_err(|e| e.to_string())? else {
        return Err("fusion exhausted".into());
    };
    let chain = &trace.approximations;
    for (i, gamma) in trace.configurations.iter().enumerate() {
        ensure(check_one_step(&chain[i], &chain[i + 1]), || format!("one-step clause at level {i}"))?;
        ensure(check_compatible(gamma, &chain[i + 1]), || format!("compatibility at level {}", i + 1))?;
        check_coherent(&oracle, gamma).map_err(|e| e.to_string())?;
        check_r_compatible(&oracle, &chain[i + 1]).map_err(|e| e.to_string())?;
    }

    let mut rng = StdRng::seed_from_u64(6);
    for round in 0..100 {
        let a = &chain[1 + round % depth];
        let v0: u8 = rng.random();
        let v1 = v0.wrapping_add(rng.random_range(1..=255));
        let g0 = oracle.continuation(a, v0).map_err(|e| e.to_string())?;
        let g1 = oracle.continuation(a, v1).map_err(|e| e.to_string())?;
        let s = canonical_s(a.n);
        let x = oracle.point(g0.phi_at(&s)).map_err(|e| e.to_string())?;
        let y = oracle.point(g1.phi_at(&s)).map_err(|e| e.to_string())?;
        let d = oracle.edge_token(&x, &y).map_err(|e| e.to_string())?;
        let merged = merge_configurations(&oracle, &g0, &g1, &d).map_err(|e| e.to_string())?;
        check_coherent(&oracle, &merged).map_err(|e| e.to_string())?;
        ensure(project_configuration(&merged, false) == g0 && project_configuration(&merged, true) == g1, || {
            format!("merge round trip fails for variants {v0}, {v1} at level {}", a.n)
        })?;
    }
    Ok(format!("{edges} edges, 120 R events, {} clause levels, 100 merges", trace.configurations.len()))
}

#[test]
fn acceptance_6_fusion_engine() {
    let t = Instant::now();
    assert!(report(6, t, criterion_6()));
}

fn criterion_7() -> Result<String, String> {
    let sys = SystemHandle::full_shift();
    let horizon = 440;
    let stages = 25;
    let plan = plan_for(&sys, 8, horizon);
    let scheme = scheme_for(&sys, 8, &plan).map_err(|e| e.to_string())?;
    let params = ScrambleParams {
        eps: Dyadic::one(),
        delta: Dyadic::one(),
        k: 1,
        horizon,
        slack: Dyadic::zero(),
    };
    let r = epsilon_scramble_report(&sys, &scheme, &params, stages).map_err(|e| e.to_string())?;
    ensure(r.holds(), || format!("report shortfall {:?}", r.shortfalls[0]))?;
    ensure(r.pairs == 32_640, || format!("{} pairs", r.pairs))?;
    let leaves = scheme.leaves();
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            let (p, q) = (symbols(&leaves[i]), symbols(&leaves[j]));
            ensure((0..=horizon).any(|m| forced_split(p, q, m)), || format!("leaves {i}, {j} never at distance 1"))?;
            let runs = agreement_runs(p, q, horizon);
            let best_from = |n: usize| runs[n..].iter().max().copied().unwrap_or(0);
            ensure((0..=stages).all(|n| best_from(n) > n), || format!("leaves {i}, {j} miss a schedule stage"))?;
        }
    }
    Ok(format!("32640 pairs at eps = 1, stages 0..={stages}"))
}

#[test]
fn acceptance_7_half_epsilon_report() {
    let t = Instant::now();
    assert!(report(7, t, criterion_7()));
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(std::iter::once("scrambled").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&err).into_owned())
}

fn criterion_8() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).display().to_string();
    let invocations: [&[&str]; 4] = [
        &["scramble", "--system", "shift", "--depth", "4", "--horizon", "60", "--out"],
        &["scramble", "--system", "tent", "--depth", "3", "--horizon", "30", "--out"],
        &["fuse", "--oracle", "shift-liyorke", "--depth", "4", "--out"],
        &["mycielski", "--relation", "e0", "--depth", "6", "--out"],
    ];
    for (i, args) in invocations.iter().enumerate() {
        let mut outputs = Vec::new();
        for round in 0..2 {
            let path = p(&format!("{i}-{round}.json"));
            let mut full = args.to_vec();
            full.push(&path);
            let (code, err) = run_cli(&full);
            ensure(code == 0, || format!("{args:?} exited {code}: {err}"))?;
            outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        }
        ensure(outputs[0] == outputs[1], || format!("{args:?} is not deterministic"))?;
    }

    let base = Certificate::load(std::path::Path::new(&p("0-0.json"))).map_err(|e| e.to_string())?;
    ensure(verify(&base).passed(), || "base certificate rejected".into())?;
    let mut rng = StdRng::seed_from_u64(8);
    let mut kinds = [0usize; 7];
    for trial in 0..20 {
        let mut cert = base.clone();
        let idx = rng.random_range(0..cert.pairs.len());
        let pair = &mut cert.pairs[idx];
        let kind = rng.random_range(0..7);
        let np = pair.proximal.len();
        let ns = pair.separation.len();
        match kind {
            0 => {
                let e = &mut pair.proximal[rng.random_range(0..np)];
                e.2 = e.2.double();
            }
            1 => pair.proximal[rng.random_range(0..np)].1 += 1,
            2 => pair.separation[rng.random_range(0..ns)].0 += 1,
            3 => {
                let e = &mut pair.separation[rng.random_range(0..ns)];
                e.1 = e.1.half();
            }
            4 => {
                pair.proximal.remove(rng.random_range(0..np));
            }
            5 => {
                pair.separation.remove(rng.random_range(0..ns));
            }
            _ => {
                let e = pair.separation[rng.random_range(0..ns)].clone();
                pair.separation.push(e);
            }
        }
        kinds[kind] += 1;
        let name = cert.pairs[idx].name();
        let r = verify(&cert);
        let failure = r.first_failure().and_then(|c| c.failure.clone());
        ensure(failure.as_deref().is_some_and(|f| f.contains(&name)), || {
            format!("corruption {trial} (kind {kind}) of {name} gave {failure:?}")
        })?;
    }
    Ok(format!("4 commands byte-identical, 20 corruptions caught (kinds {kinds:?})"))
}

#[test]
fn acceptance_8_determinism_and_tampering() {
    let t = Instant::now();
    assert!(report(8, t, criterion_8()));
}
