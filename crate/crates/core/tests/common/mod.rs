//! Independent reference computations shared by integration tests.
//!
//! Nothing here calls into the CTW implementation: probabilities are built
//! from exact rational arithmetic, either by explicit enumeration of every
//! suffix set (the Bayes mixture) or by a batch recursion over contexts.

#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Q = BigRational;

fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

/// Closed-form KT probability of any sequence with the given symbol counts:
/// prod_s prod_{k<a_s} (k + 1/2) / prod_{k<n} (k + m/2).
pub fn kt_closed_form(counts: &[u64]) -> Q {
    let m = counts.len() as i64;
    let mut p = Q::one();
    for &a in counts {
        for k in 0..a as i64 {
            p *= q(2 * k + 1, 2);
        }
    }
    let n: u64 = counts.iter().sum();
    for k in 0..n as i64 {
        p /= q(2 * k + m, 2);
    }
    p
}

/// Context of position `i`, most recent symbol first, padded with zeros.
pub fn context(seq: &[u8], i: usize, depth: usize) -> Vec<u8> {
    (1..=depth)
        .map(|back| if back <= i { seq[i - back] } else { 0 })
        .collect()
}

/// Every complete suffix set of depth at most `depth` over `m` symbols.
pub fn suffix_sets(depth: usize, m: usize) -> Vec<Vec<Vec<u8>>> {
    fn grow(prefix: Vec<u8>, remaining: usize, m: usize) -> Vec<Vec<Vec<u8>>> {
        let mut out = vec![vec![prefix.clone()]];
        if remaining == 0 {
            return out;
        }
        let mut partial: Vec<Vec<Vec<u8>>> = vec![Vec::new()];
        for c in 0..m as u8 {
            let mut child = prefix.clone();
            child.push(c);
            let subtrees = grow(child, remaining - 1, m);
            partial = partial
                .iter()
                .flat_map(|acc| {
                    subtrees.iter().map(move |t| {
                        let mut joined = acc.clone();
                        joined.extend(t.iter().cloned());
                        joined
                    })
                })
                .collect();
        }
        out.extend(partial);
        out
    }
    grow(Vec::new(), depth, m)
}

/// Suffix-set prior `2^(-|S| - N(S) + 1)` for binary trees; for m-ary trees
/// the exponent uses the internal-node count `(|S| - 1)/(m - 1)` in place of
/// `|S| - 1`, which is what CTW's 1/2 weighting realises.
pub fn suffix_set_prior(set: &[Vec<u8>], depth: usize, m: usize) -> Q {
    let size = set.len() as i64;
    let short = set.iter().filter(|s| s.len() < depth).count() as i64;
    let internal = (size - 1) / (m as i64 - 1);
    let exponent = internal + short;
    Q::new(BigInt::one(), BigInt::from(2).pow(exponent as u32))
}

/// Bayes mixture over all suffix sets with KT leaves, by enumeration.
pub fn brute_force_mixture(seq: &[u8], m: usize, depth: usize, sets: &[Vec<Vec<u8>>]) -> Q {
    let contexts: Vec<Vec<u8>> = (0..seq.len()).map(|i| context(seq, i, depth)).collect();
    let mut total = Q::zero();
    for set in sets {
        let mut likelihood = Q::one();
        for leaf in set {
            let mut counts = vec![0u64; m];
            for (i, ctx) in contexts.iter().enumerate() {
                if ctx.starts_with(leaf) {
                    counts[seq[i] as usize] += 1;
                }
            }
            likelihood *= kt_closed_form(&counts);
        }
        total += suffix_set_prior(set, depth, m) * likelihood;
    }
    total
}

/// Exact CTW root probability by batch recursion over observed contexts.
pub fn rational_ctw(seq: &[u8], m: usize, depth: usize) -> Q {
    let mut counts: BTreeMap<Vec<u8>, Vec<u64>> = BTreeMap::new();
    for i in 0..seq.len() {
        let ctx = context(seq, i, depth);
        for len in 0..=depth {
            counts
                .entry(ctx[..len].to_vec())
                .or_insert_with(|| vec![0; m])[seq[i] as usize] += 1;
        }
    }
    fn weighted(node: &[u8], depth: usize, m: usize, counts: &BTreeMap<Vec<u8>, Vec<u64>>) -> Q {
        let Some(c) = counts.get(node) else {
            return Q::one();
        };
        let pe = kt_closed_form(c);
        if node.len() == depth {
            return pe;
        }
        let mut children = Q::one();
        for s in 0..m as u8 {
            let mut child = node.to_vec();
            child.push(s);
            children *= weighted(&child, depth, m, counts);
        }
        (pe + children) / q(2, 1)
    }
    weighted(&[], depth, m, &counts)
}

/// log2 of a positive rational, accurate to f64 precision for any magnitude.
pub fn log2_q(x: &Q) -> f64 {
    fn log2_int(v: &BigInt) -> f64 {
        let bits = v.bits() as i64;
        let shift = (bits - 60).max(0);
        let top = (v >> shift as usize).to_f64().unwrap();
        top.log2() + shift as f64
    }
    log2_int(x.numer()) - log2_int(x.denom())
}

/// All sequences of length `n` over `m` symbols.
pub fn all_sequences(n: usize, m: usize) -> impl Iterator<Item = Vec<u8>> {
    let total = (m as u64).pow(n as u32);
    (0..total).map(move |mut code| {
        (0..n)
            .map(|_| {
                let s = (code % m as u64) as u8;
                code /= m as u64;
                s
            })
            .collect()
    })
}
