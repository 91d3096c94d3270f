//! Independent reference implementations used as test oracles.
//!
//! The belief oracles work on explicit `BTreeSet` subsets rather than
//! bitmasks, so they share no code path with the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use dswater::belief::{Frame, MassFunction, Subset};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub type Set = BTreeSet<usize>;

pub fn to_set(s: Subset) -> Set {
    (0..32).filter(|i| s.bits() & (1 << i) != 0).collect()
}

pub fn to_subset(s: &Set) -> Subset {
    Subset::from_bits(s.iter().fold(0, |acc, i| acc | (1 << i)))
}

/// All subsets of `{0, …, n−1}` built by repeated extension.
pub fn power_set(n: usize) -> Vec<Set> {
    let mut all = vec![Set::new()];
    for i in 0..n {
        let extended: Vec<Set> = all
            .iter()
            .map(|s| {
                let mut t = s.clone();
                t.insert(i);
                t
            })
            .collect();
        all.extend(extended);
    }
    all
}

pub fn as_map(m: &MassFunction) -> BTreeMap<Set, f64> {
    power_set(m.frame().len())
        .into_iter()
        .map(|s| {
            let v = m.mass(to_subset(&s));
            (s, v)
        })
        .collect()
}

pub fn oracle_belief(m: &BTreeMap<Set, f64>, a: &Set) -> f64 {
    m.iter()
        .filter(|(x, _)| !x.is_empty() && x.is_subset(a))
        .map(|(_, v)| v)
        .sum()
}

pub fn oracle_plausibility(m: &BTreeMap<Set, f64>, a: &Set) -> f64 {
    m.iter()
        .filter(|(x, _)| x.intersection(a).next().is_some())
        .map(|(_, v)| v)
        .sum()
}

pub fn oracle_conjunctive(
    m1: &BTreeMap<Set, f64>,
    m2: &BTreeMap<Set, f64>,
) -> BTreeMap<Set, f64> {
    let mut out: BTreeMap<Set, f64> = m1.keys().map(|k| (k.clone(), 0.0)).collect();
    for (x, a) in m1 {
        for (y, b) in m2 {
            let z: Set = x.intersection(y).copied().collect();
            *out.get_mut(&z).unwrap() += a * b;
        }
    }
    out
}

pub fn oracle_average(ms: &[BTreeMap<Set, f64>]) -> BTreeMap<Set, f64> {
    ms[0]
        .keys()
        .map(|k| {
            let v = ms.iter().map(|m| m[k]).sum::<f64>() / ms.len() as f64;
            (k.clone(), v)
        })
        .collect()
}

/// Pignistic probability: spread every focal set evenly over its elements,
/// then sum the singleton shares inside `a`.
pub fn oracle_pignistic(m: &BTreeMap<Set, f64>, a: &Set) -> f64 {
    let empty = m[&Set::new()];
    let mut share: BTreeMap<usize, f64> = BTreeMap::new();
    for (x, v) in m {
        for e in x {
            *share.entry(*e).or_default() += v / x.len() as f64;
        }
    }
    a.iter().map(|e| share.get(e).copied().unwrap_or(0.0)).sum::<f64>() / (1.0 - empty)
}

pub fn frame(n: usize) -> Arc<Frame> {
    Arc::new(Frame::new((0..n).map(|i| format!("h{i}"))).unwrap())
}

/// Random closed-world mass function with a random subset of focal elements.
pub fn random_mass(rng: &mut impl Rng, f: &Arc<Frame>) -> MassFunction {
    let size = f.power_set_size();
    loop {
        let mut masses = vec![0.0; size];
        for m in masses.iter_mut().skip(1) {
            if rng.random_bool(0.6) {
                *m = rng.random::<f64>();
            }
        }
        let total: f64 = masses.iter().sum();
        if total > 0.0 {
            masses.iter_mut().for_each(|m| *m /= total);
            return MassFunction::new(Arc::clone(f), masses).unwrap();
        }
    }
}

/// Samples of a two-component Gaussian mixture.
pub fn two_gaussians(
    rng: &mut impl Rng,
    n: usize,
    weight_first: f64,
    (mu1, mu2): (f64, f64),
    sd: f64,
) -> Vec<f64> {
    let a = Normal::new(mu1, sd).unwrap();
    let b = Normal::new(mu2, sd).unwrap();
    let n1 = (n as f64 * weight_first).round() as usize;
    (0..n)
        .map(|i| if i < n1 { a.sample(rng) } else { b.sample(rng) })
        .collect()
}

/// Brute-force histogram: bin index by scanning the edges linearly.
pub fn scan_bin(edges: &[f64], v: f64) -> usize {
    let nbins = edges.len() - 1;
    (0..nbins)
        .find(|&b| v >= edges[b] && v < edges[b + 1])
        .unwrap_or(nbins - 1)
}

/// Lowest-count bin between two bins, ties resolved to the middle tied bin.
pub fn min_count_bin(counts: &[u64], from: usize, to: usize) -> usize {
    let lowest = counts[from..=to].iter().min().copied().unwrap();
    let tied: Vec<usize> = (from..=to).filter(|&b| counts[b] == lowest).collect();
    tied[tied.len() / 2]
}

/// Least squares by normal equations and Gauss-Jordan elimination with
/// partial pivoting.
pub fn normal_equations_fit(xs: &[f64], ys: &[f64], degree: usize) -> Vec<f64> {
    let k = degree + 1;
    let mut a = vec![vec![0.0; k + 1]; k];
    for (&x, &y) in xs.iter().zip(ys) {
        let pows: Vec<f64> = (0..k).map(|p| x.powi(p as i32)).collect();
        for i in 0..k {
            for j in 0..k {
                a[i][j] += pows[i] * pows[j];
            }
            a[i][k] += pows[i] * y;
        }
    }
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for row in 0..k {
            if row != col {
                let f = a[row][col];
                let pivot_row = a[col].clone();
                for (v, pv) in a[row].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    a.iter().map(|r| r[k]).collect()
}

pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}
