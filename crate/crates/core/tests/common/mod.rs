//! Brute-force oracles shared by the integration tests. They work on raw
//! symbols and interval endpoints and call nothing from the library except
//! plain accessors and dyadic arithmetic.

#![allow(dead_code)]

use std::io::Write;
use std::time::Instant;

use scrambled::systems::Interval;
use scrambled::{Cell, Dyadic};

/// `n`-th binary word in length-lex order, padded with zeros to length `n`.
pub fn oracle_s(n: usize) -> Vec<bool> {
    let v = n as u64 + 1;
    let width = 63 - v.leading_zeros() as usize;
    let mut w: Vec<bool> = (0..width).rev().map(|i| v >> i & 1 == 1).collect();
    w.resize(n, false);
    w
}

pub fn bits(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == '1').collect()
}

pub fn symbols(c: &Cell) -> &[Option<bool>] {
    match c {
        Cell::Symbolic(p) => p.symbols(),
        Cell::Interval(_) => panic!("symbolic cell expected"),
    }
}

/// Length of the forced agreement run of two patterns from time `m`.
pub fn agreement_run(p: &[Option<bool>], q: &[Option<bool>], m: usize) -> usize {
    (m..p.len().min(q.len()))
        .take_while(|&i| p[i].is_some() && p[i] == q[i])
        .count()
}

/// Both symbols at `m` are forced and differ: distance exactly 1.
pub fn forced_split(p: &[Option<bool>], q: &[Option<bool>], m: usize) -> bool {
    matches!((p.get(m), q.get(m)), (Some(Some(a)), Some(Some(b))) if a != b)
}

/// `run[m]` for every `m ≤ horizon`, computed backwards.
pub fn agreement_runs(p: &[Option<bool>], q: &[Option<bool>], horizon: usize) -> Vec<usize> {
    let mut run = vec![0; horizon + 2];
    let len = p.len().min(q.len());
    for m in (0..=horizon).rev() {
        if m < len && p[m].is_some() && p[m] == q[m] {
            run[m] = run[m + 1] + 1;
        }
    }
    run.truncate(horizon + 1);
    run
}

fn half() -> Dyadic {
    Dyadic::new(1, 1)
}

fn two() -> Dyadic {
    Dyadic::new(2, 0)
}

/// Exact image of `[lo, hi]` under the tent map.
pub fn tent_image(lo: &Dyadic, hi: &Dyadic) -> (Dyadic, Dyadic) {
    let t = |x: &Dyadic| if *x <= half() { x + x } else { &two() - &(x + x) };
    if *hi <= half() || *lo >= half() {
        let (a, b) = (t(lo), t(hi));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    } else {
        (t(lo).min(t(hi)), Dyadic::one())
    }
}

pub fn tent_orbit(c: &Cell, horizon: usize) -> Vec<(Dyadic, Dyadic)> {
    let Cell::Interval(Interval { lo, hi }) = c else {
        panic!("interval cell expected");
    };
    let mut out = vec![(lo.clone(), hi.clone())];
    for m in 0..horizon {
        let (a, b) = &out[m];
        out.push(tent_image(a, b));
    }
    out
}

/// `(lower, upper)` for the distance between points of two intervals.
pub fn interval_distance(a: &(Dyadic, Dyadic), b: &(Dyadic, Dyadic)) -> (Dyadic, Dyadic) {
    let zero = Dyadic::zero();
    let gap = (&a.0 - &b.1).max(&b.0 - &a.1).max(zero);
    let span = a.1.clone().max(b.1.clone()) - a.0.clone().min(b.0.clone());
    (gap, span)
}

/// Prints the criterion's verdict line and returns it.
pub fn report(criterion: usize, start: Instant, result: Result<String, String>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let line = match &result {
        Ok(detail) => format!("criterion {criterion}: PASS ({secs:.1}s) {detail}\n"),
        Err(why) => format!("criterion {criterion}: FAIL ({secs:.1}s) {why}\n"),
    };
    let _ = std::io::stderr().write_all(line.as_bytes());
    result.is_ok()
}
