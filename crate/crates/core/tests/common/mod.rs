//! Fixtures, brute-force oracles and a random instance corpus shared by the
//! integration suites. The oracles only use the public array accessors and
//! re-derive everything else by exhaustive scanning.

#![allow(dead_code)]

use std::path::PathBuf;

use anonarray::io;
use anonarray::{AccessProfileArray, AttributeSchema, ConstraintSet, Credential};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub struct University {
    pub schema: AttributeSchema,
    pub constraints: ConstraintSet,
    pub a: AccessProfileArray,
    pub b: AccessProfileArray,
}

pub fn university() -> University {
    let schema = io::read_schema(&fixture("university/schema.json")).unwrap();
    let constraints = io::read_constraints(&fixture("university/constraints.json"), &schema).unwrap();
    let a = io::read_array(&fixture("university/array_a.csv"), &schema).unwrap();
    let b = io::read_array(&fixture("university/array_b.csv"), &schema).unwrap();
    University {
        schema,
        constraints,
        a,
        b,
    }
}

pub fn binary3_schema() -> AttributeSchema {
    io::read_schema(&fixture("binary3/schema.json")).unwrap()
}

pub fn binary3_array(name: &str) -> AccessProfileArray {
    io::read_array(&fixture(&format!("binary3/{name}.csv")), &binary3_schema()).unwrap()
}

pub fn binary3_constraints(name: &str) -> ConstraintSet {
    io::read_constraints(&fixture(&format!("binary3/{name}.json")), &binary3_schema()).unwrap()
}

pub fn cred(schema: &AttributeSchema, pairs: &[(&str, &str)]) -> Credential {
    Credential::from_labels(schema, pairs).unwrap()
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// All `t`-subsets of `0..k`, built recursively.
pub fn subsets(k: usize, t: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, k: usize, t: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == t {
            out.push(cur.clone());
            return;
        }
        for c in start..k {
            cur.push(c);
            go(c + 1, k, t, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, k, t, &mut Vec::new(), &mut out);
    out
}

/// Every value tuple over `domains`.
pub fn tuples(domains: &[usize]) -> Vec<Vec<usize>> {
    domains.iter().fold(vec![Vec::new()], |acc, &d| {
        acc.into_iter()
            .flat_map(|prefix| {
                (0..d).map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

fn row_has(row: &[usize], pairs: &[(usize, usize)]) -> bool {
    pairs.iter().all(|&(a, v)| row[a] == v)
}

fn pairs_within(small: &[(usize, usize)], big: &[(usize, usize)]) -> bool {
    small.iter().all(|p| big.contains(p))
}

/// Guarantee by enumerating every possible size-`t` credential and scanning
/// all rows for each.
pub fn oracle_guarantee(array: &AccessProfileArray, t: usize, constraints: &ConstraintSet) -> u64 {
    let rows: Vec<&[usize]> = array.rows().collect();
    for row in &rows {
        if constraints.hard().iter().any(|h| row_has(row, h.pairs())) {
            return 0;
        }
    }
    let domains = array.schema().domain_sizes();
    let mut best = u64::MAX;
    for cols in subsets(array.n_cols(), t) {
        let ds: Vec<usize> = cols.iter().map(|&c| domains[c]).collect();
        for values in tuples(&ds) {
            let pairs: Vec<(usize, usize)> = cols.iter().copied().zip(values).collect();
            let count = rows.iter().filter(|r| row_has(r, &pairs)).count() as u64;
            if count == 0 {
                continue;
            }
            let hard = constraints.hard().iter().any(|h| pairs_within(h.pairs(), &pairs));
            let soft = constraints.soft().iter().any(|s| s.pairs() == pairs.as_slice());
            let dont_care = constraints.dont_care().iter().any(|d| pairs_within(d.pairs(), &pairs));
            if dont_care && !hard && !soft {
                continue;
            }
            best = best.min(count);
        }
    }
    if best == u64::MAX {
        array.n_rows() as u64
    } else {
        best
    }
}

/// Local homogeneity straight from the closeness definition: a loop over
/// row pairs and column sets.
pub fn oracle_local_homogeneity(array: &AccessProfileArray, t: usize) -> Vec<BigRational> {
    let rows: Vec<&[usize]> = array.rows().collect();
    let n = rows.len();
    let sets = subsets(array.n_cols(), t);
    let sentinel = BigRational::from_integer(BigInt::from(sets.len()));
    (0..n)
        .map(|i| {
            let mut total = BigRational::zero();
            let mut neighbors = 0;
            for j in (0..n).filter(|&j| j != i) {
                let mut close = BigRational::zero();
                for s in &sets {
                    if s.iter().all(|&c| rows[i][c] == rows[j][c]) {
                        let size = rows.iter().filter(|r| s.iter().all(|&c| r[c] == rows[i][c])).count();
                        close += rat(1, size as i64);
                    }
                }
                if !close.is_zero() {
                    neighbors += 1;
                }
                total += close;
            }
            if neighbors == 0 {
                sentinel.clone()
            } else {
                total / BigRational::from_integer(BigInt::from(neighbors))
            }
        })
        .collect()
}

pub struct Instance {
    pub array: AccessProfileArray,
    pub constraints: ConstraintSet,
}

fn random_credential(rng: &mut ChaCha8Rng, schema: &AttributeSchema, max_len: usize) -> Credential {
    let k = schema.len();
    let len = rng.gen_range(1..=max_len.min(k));
    let mut attrs: Vec<usize> = (0..k).collect();
    attrs.shuffle(rng);
    let pairs = attrs[..len]
        .iter()
        .map(|&a| (a, rng.gen_range(0..schema.domain_size(a))))
        .collect();
    Credential::new(schema, pairs).unwrap()
}

/// A random array (N <= 32, k <= 6, v in {2, 3}) with random constraints.
/// Hard constraints usually avoid the rows so most instances have r >= 1.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=6);
    let domains: Vec<usize> = (0..k).map(|_| rng.gen_range(2..=3)).collect();
    let schema = AttributeSchema::numeric(&domains).unwrap();
    let n = rng.gen_range(1..=32);
    // a few distinct profiles repeated, so counts above 1 are common
    let pool: Vec<Vec<usize>> = (0..rng.gen_range(1..=12))
        .map(|_| domains.iter().map(|&d| rng.gen_range(0..d)).collect())
        .collect();
    let rows: Vec<Vec<usize>> = (0..n).map(|_| pool.choose(&mut rng).unwrap().clone()).collect();
    let array = AccessProfileArray::new(schema.clone(), rows.clone()).unwrap();

    let mut hard = Vec::new();
    let mut soft = Vec::new();
    let mut dont_care = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    for _ in 0..rng.gen_range(0..=6) {
        let c = random_credential(&mut rng, &schema, 3);
        if !used.insert(c.clone()) {
            continue;
        }
        match rng.gen_range(0..10) {
            0..=3 => {
                let present = rows.iter().any(|r| c.matches_row(r));
                if !present || rng.gen_bool(0.2) {
                    hard.push(c);
                }
            }
            4..=7 => soft.push(c),
            _ => dont_care.push(c),
        }
    }
    let constraints = ConstraintSet::new(hard, soft, dont_care).unwrap();
    Instance { array, constraints }
}

pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Maps constraints through a column permutation (`new col j = old order[j]`).
pub fn permute_constraints(
    constraints: &ConstraintSet,
    order: &[usize],
    new_schema: &AttributeSchema,
) -> ConstraintSet {
    let inverse: Vec<usize> = {
        let mut inv = vec![0; order.len()];
        for (j, &c) in order.iter().enumerate() {
            inv[c] = j;
        }
        inv
    };
    let map = |set: &std::collections::BTreeSet<Credential>| -> Vec<Credential> {
        set.iter()
            .map(|c| Credential::new(new_schema, c.pairs().iter().map(|&(a, v)| (inverse[a], v)).collect()).unwrap())
            .collect()
    };
    ConstraintSet::new(
        map(constraints.hard()),
        map(constraints.soft()),
        map(constraints.dont_care()),
    )
    .unwrap()
}
