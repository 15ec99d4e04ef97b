//! Independent reference implementations shared by test targets.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Student-t CDF for integer degrees of freedom from the closed-form
/// trigonometric series (Abramowitz & Stegun 26.7.3 / 26.7.4).
pub fn t_cdf_exact(t: f64, nu: u32) -> f64 {
    assert!(nu >= 1);
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let theta = (t.abs() / f64::from(nu).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let a = if nu % 2 == 1 {
        let mut sum = 0.0;
        if nu > 1 {
            let mut term = c;
            sum = term;
            let mut k = 2;
            while k + 1 < nu {
                term *= f64::from(k) / f64::from(k + 1) * c * c;
                sum += term;
                k += 2;
            }
        }
        2.0 / PI * (theta + s * sum)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1;
        while k + 1 < nu {
            term *= f64::from(k) / f64::from(k + 1) * c * c;
            sum += term;
            k += 2;
        }
        s * sum
    };
    if t >= 0.0 {
        0.5 + a / 2.0
    } else {
        0.5 - a / 2.0
    }
}

/// Two-pass mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

use hornforge::encode::Segment;
use hornforge::masks::{causal_mask, isolated_corrective_mask, prefix_bidirectional_mask, read_mask, write_mask};

/// Every layout of a prefix followed by up to two branches, for each length up to `max_n`.
pub fn layouts(max_n: usize) -> Vec<Vec<Segment>> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        for p in 0..=n {
            for a in 0..=n - p {
                let b = n - p - a;
                for (x, y) in [(Segment::DirectBranch, Segment::CotBranch), (Segment::CotBranch, Segment::DirectBranch)] {
                    if a == 0 && x == Segment::CotBranch {
                        continue;
                    }
                    let mut s = vec![Segment::Prefix; p];
                    s.extend(std::iter::repeat_n(x, a));
                    s.extend(std::iter::repeat_n(y, b));
                    out.push(s);
                }
            }
        }
    }
    out
}

/// Checks the three mask constructions cell by cell against rules read
/// straight off the segment labels. Returns (cells checked, violations).
pub fn mask_violations(max_n: usize) -> (usize, usize) {
    let (mut checked, mut bad) = (0, 0);
    for segs in layouts(max_n) {
        let n = segs.len();
        let pre = |i: usize| segs[i] == Segment::Prefix;
        let causal = causal_mask(n).unwrap();
        let prefix = prefix_bidirectional_mask(&segs).unwrap();
        let isolated = isolated_corrective_mask(&segs).unwrap();
        let mut buf = Vec::new();
        write_mask(&mut buf, &isolated).unwrap();
        bad += usize::from(read_mask(&buf).map(|m| m != isolated).unwrap_or(true));
        for q in 0..n {
            for k in 0..n {
                let want_causal = k <= q;
                let want_prefix = if pre(q) { pre(k) } else { k <= q };
                let want_isolated = if pre(q) { pre(k) } else { pre(k) || (segs[k] == segs[q] && k <= q) };
                bad += usize::from(causal.allow(q, k) != want_causal);
                bad += usize::from(prefix.allow(q, k) != want_prefix);
                bad += usize::from(isolated.allow(q, k) != want_isolated);
                checked += 3;
            }
        }
    }
    (checked, bad)
}

use hornforge::eval::{marginal_contribution, non_inferiority, AblationTable, Component, NON_INFERIORITY_MARGIN};
use rand::Rng;

/// Compares marginal contributions and non-inferiority tests on `tables`
/// random tables against the closed-form reference. Returns (checks, mismatches).
pub fn stats_mismatches(seed: u64, tables: usize, tol: f64) -> (usize, usize) {
    let mut rng = hornforge::rng::stream(seed, 0);
    let (mut checks, mut bad) = (0, 0);
    let mut check = |ok: bool| {
        checks += 1;
        bad += usize::from(!ok);
    };
    for _ in 0..tables {
        let table = AblationTable {
            cells: (0..3).map(|i| format!("c{i}")).collect(),
            accuracy: (0u8..16).map(|c| (c, (0..3).map(|_| rng.random_range(30.0..100.0)).collect())).collect(),
        };
        for comp in Component::ALL {
            for (cell, m) in marginal_contribution(&table, comp).unwrap().iter().enumerate() {
                let diffs: Vec<f64> = (0u8..16)
                    .filter(|c| c & comp.bit() == 0)
                    .map(|c| table.accuracy[&(c | comp.bit())][cell] - table.accuracy[&c][cell])
                    .collect();
                let (mean, sd) = mean_sd(&diffs);
                let t = mean / (sd / 8f64.sqrt());
                check(close(m.t, t, tol));
                check((m.p - 2.0 * t_cdf_exact(-t.abs(), 7)).abs() <= tol);
            }
        }
        let n = rng.random_range(3..13);
        let direct: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.0)).collect();
        let cot: Vec<f64> = direct.iter().map(|d| d + rng.random_range(-0.03..0.06)).collect();
        let got = non_inferiority(&direct, &cot, NON_INFERIORITY_MARGIN).unwrap();
        let diffs: Vec<f64> = cot.iter().zip(&direct).map(|(c, d)| c - d).collect();
        let (mean, sd) = mean_sd(&diffs);
        let t = (mean - NON_INFERIORITY_MARGIN) / (sd / (n as f64).sqrt());
        check(close(got.t, t, tol));
        check((got.p - t_cdf_exact(t, n as u32 - 1)).abs() <= tol);
    }
    (checks, bad)
}
