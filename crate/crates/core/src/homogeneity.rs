//! Homogeneity scores over the multi-hypergraph of an array.
//!
//! Every size-`t` credential that appears is a hyperedge joining the rows
//! that possess it (its neighborhood). Two rows sharing a neighborhood of
//! size `m` gain weight `1/m`; their closeness is the sum over all shared
//! neighborhoods. A row's local homogeneity is its total closeness divided
//! by its number of distinct neighbors. Since each of a row's neighborhoods
//! of size `m` contributes `(m - 1)/m` to that total, the closeness matrix is
//! never needed for the scores themselves.
//!
//! A row with no neighbors gets the sentinel score `C(k, t)`, which no row
//! with neighbors can exceed.
//!
//! All arithmetic is exact.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{binomial, enumerate_column_sets, AccessProfileArray, ColumnSet, Credential};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub column_set: ColumnSet,
    pub credential: Credential,
    /// Rows possessing the credential, ascending.
    pub members: Vec<usize>,
}

impl Neighborhood {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, row: usize) -> bool {
        self.members.binary_search(&row).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomogeneityReport {
    pub t: usize,
    pub local: Vec<BigRational>,
    pub neighbor_counts: Vec<usize>,
    pub min: BigRational,
    pub max: BigRational,
    pub global: BigRational,
    /// Rows without neighbors; their local score is the sentinel.
    pub isolated: Vec<usize>,
    pub sentinel: u64,
}

fn check_t(array: &AccessProfileArray, t: usize) -> Result<()> {
    if array.n_rows() == 0 {
        return Err(Error::invalid("array has no rows"));
    }
    if t == 0 || t > array.n_cols() {
        return Err(Error::invalid(format!(
            "credential size {t} outside 1..={}",
            array.n_cols()
        )));
    }
    Ok(())
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn group_rows(array: &AccessProfileArray, s: &ColumnSet) -> Vec<Neighborhood> {
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (i, row) in array.rows().enumerate() {
        let key: Vec<usize> = s.columns().iter().map(|&c| row[c]).collect();
        groups.entry(key).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|(values, members)| Neighborhood {
            column_set: s.clone(),
            credential: Credential::on_columns(s, &values),
            members,
        })
        .collect()
}

/// One neighborhood per appearing size-`t` credential, grouped by column
/// set in lexicographic order. Identical member sets under different
/// credentials stay separate.
pub fn neighborhoods(array: &AccessProfileArray, t: usize) -> Result<Vec<Neighborhood>> {
    check_t(array, t)?;
    let sets = enumerate_column_sets(array.n_cols(), t)?;
    let grouped: Vec<Vec<Neighborhood>> = sets.par_iter().map(|s| group_rows(array, s)).collect();
    Ok(grouped.into_iter().flatten().collect())
}

/// `1/|members|` when both rows belong to the neighborhood, else 0.
pub fn weight(i: usize, j: usize, neighborhood: &Neighborhood) -> Result<BigRational> {
    if i == j {
        return Err(Error::invalid("weight of a row with itself is undefined"));
    }
    if neighborhood.contains(i) && neighborhood.contains(j) {
        Ok(ratio(1, neighborhood.size() as u64))
    } else {
        Ok(BigRational::zero())
    }
}

/// Sum of weights of two distinct rows over all size-`t` credentials.
pub fn closeness(i: usize, j: usize, array: &AccessProfileArray, t: usize) -> Result<BigRational> {
    check_t(array, t)?;
    let n = array.n_rows();
    if i >= n || j >= n {
        return Err(Error::invalid(format!("row index out of range for {n} rows")));
    }
    if i == j {
        return Err(Error::invalid("closeness of a row with itself is undefined"));
    }
    let (ri, rj) = (array.row(i), array.row(j));
    let mut total = BigRational::zero();
    for s in enumerate_column_sets(array.n_cols(), t)? {
        if s.columns().iter().all(|&c| ri[c] == rj[c]) {
            let size = array
                .rows()
                .filter(|r| s.columns().iter().all(|&c| r[c] == ri[c]))
                .count();
            total += ratio(1, size as u64);
        }
    }
    Ok(total)
}

/// Symmetric `N x N` closeness scores with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosenessMatrix {
    n: usize,
    values: Vec<BigRational>,
}

impl ClosenessMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[BigRational] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// How many other rows sit at each closeness value from row `i`.
    pub fn row_histogram(&self, i: usize) -> BTreeMap<BigRational, usize> {
        let mut hist = BTreeMap::new();
        for (j, v) in self.row(i).iter().enumerate() {
            if j != i {
                *hist.entry(v.clone()).or_insert(0) += 1;
            }
        }
        hist
    }
}

pub fn closeness_matrix(array: &AccessProfileArray, t: usize) -> Result<ClosenessMatrix> {
    let n = array.n_rows();
    let mut values = vec![BigRational::zero(); n * n];
    for nb in neighborhoods(array, t)? {
        let w = ratio(1, nb.size() as u64);
        for &i in &nb.members {
            for &j in &nb.members {
                if i != j {
                    values[i * n + j] += &w;
                }
            }
        }
    }
    Ok(ClosenessMatrix { n, values })
}

/// Row-by-row neighbor relation as packed bitsets.
struct NeighborMatrix {
    words: usize,
    bits: Vec<u64>,
}

impl NeighborMatrix {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        NeighborMatrix {
            words,
            bits: vec![0; n * words],
        }
    }

    fn add_group(&mut self, members: &[usize]) {
        let mut mask = vec![0u64; self.words];
        for &m in members {
            mask[m / 64] |= 1 << (m % 64);
        }
        for &m in members {
            let row = &mut self.bits[m * self.words..(m + 1) * self.words];
            for (w, bit) in row.iter_mut().zip(&mask) {
                *w |= bit;
            }
        }
    }

    /// Neighbors of `i` excluding itself.
    fn count(&self, i: usize) -> usize {
        let row = &self.bits[i * self.words..(i + 1) * self.words];
        let ones: u32 = row.iter().map(|w| w.count_ones()).sum();
        let own = (row[i / 64] >> (i % 64)) & 1;
        (ones as u64 - own) as usize
    }
}

/// Local and global homogeneity at credential size `t`.
pub fn local_homogeneity(array: &AccessProfileArray, t: usize) -> Result<HomogeneityReport> {
    check_t(array, t)?;
    let n = array.n_rows();
    let sets = enumerate_column_sets(array.n_cols(), t)?;
    let sentinel = binomial(array.n_cols(), t);

    // per row: neighborhood size -> number of the row's credentials with it
    let mut size_counts: Vec<HashMap<usize, u64>> = vec![HashMap::new(); n];
    let mut neighbors = NeighborMatrix::new(n);
    let grouped: Vec<Vec<Neighborhood>> = sets.par_iter().map(|s| group_rows(array, s)).collect();
    for nb in grouped.iter().flatten() {
        let m = nb.size();
        for &u in &nb.members {
            *size_counts[u].entry(m).or_insert(0) += 1;
        }
        if m > 1 {
            neighbors.add_group(&nb.members);
        }
    }

    let mut local = Vec::with_capacity(n);
    let mut neighbor_counts = Vec::with_capacity(n);
    let mut isolated = Vec::new();
    for (i, sizes) in size_counts.iter().enumerate() {
        let count = neighbors.count(i);
        neighbor_counts.push(count);
        if count == 0 {
            isolated.push(i);
            local.push(ratio(sentinel, 1));
            continue;
        }
        let mut total = BigRational::zero();
        for (&m, &c) in sizes {
            total += ratio(c * (m as u64 - 1), m as u64);
        }
        local.push(total / BigRational::from_integer(BigInt::from(count)));
    }

    let min = local.iter().min().cloned().unwrap_or_else(BigRational::zero);
    let max = local.iter().max().cloned().unwrap_or_else(BigRational::zero);
    let sum: BigRational = local.iter().fold(BigRational::zero(), |acc, x| acc + x);
    let global = sum / BigRational::from_integer(BigInt::from(n));
    Ok(HomogeneityReport {
        t,
        local,
        neighbor_counts,
        min,
        max,
        global,
        isolated,
        sentinel,
    })
}

pub fn global_homogeneity(array: &AccessProfileArray, t: usize) -> Result<BigRational> {
    Ok(local_homogeneity(array, t)?.global)
}

/// Renders a rational with at most 6 significant digits, trailing zeros
/// removed (`7/12` becomes `0.583333`).
pub fn format_decimal(value: &BigRational) -> String {
    let x = value.to_f64().unwrap_or(f64::NAN);
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HypergraphFormat {
    Json,
    Text,
}

impl FromStr for HypergraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(HypergraphFormat::Json),
            "text" => Ok(HypergraphFormat::Text),
            other => Err(Error::invalid(format!(
                "unknown hypergraph format {other:?} (expected json or text)"
            ))),
        }
    }
}

/// Serializes the multi-hypergraph: one vertex per row and one labeled edge
/// per neighborhood.
pub fn export_hypergraph(array: &AccessProfileArray, t: usize, format: HypergraphFormat) -> Result<String> {
    let edges = neighborhoods(array, t)?;
    let schema = array.schema();
    match format {
        HypergraphFormat::Json => {
            let vertices: Vec<_> = (0..array.n_rows())
                .map(|i| json!({ "id": i, "label": array.row_label(i) }))
                .collect();
            let edges: Vec<_> = edges
                .iter()
                .enumerate()
                .map(|(id, nb)| {
                    let labels = nb.credential.labels(schema);
                    json!({
                        "id": id,
                        "columns": labels.iter().map(|p| p.0).collect::<Vec<_>>(),
                        "values": labels.iter().map(|p| p.1).collect::<Vec<_>>(),
                        "members": nb.members,
                    })
                })
                .collect();
            let doc = json!({
                "format_version": 1,
                "t": t,
                "vertices": vertices,
                "edges": edges,
            });
            Ok(serde_json::to_string_pretty(&doc).expect("json values serialize"))
        }
        HypergraphFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "hypergraph vertices={} edges={} t={t}",
                array.n_rows(),
                edges.len()
            );
            for i in 0..array.n_rows() {
                let _ = writeln!(out, "vertex {i}: {}", array.row_label(i));
            }
            for (id, nb) in edges.iter().enumerate() {
                let labels = nb.credential.labels(schema);
                let members: Vec<String> = nb.members.iter().map(ToString::to_string).collect();
                let columns: Vec<&str> = labels.iter().map(|p| p.0).collect();
                let values: Vec<&str> = labels.iter().map(|p| p.1).collect();
                let _ = writeln!(
                    out,
                    "edge {id}: {{{}}} columns={} values={}",
                    members.join(","),
                    columns.join(","),
                    values.join(",")
                );
            }
            Ok(out)
        }
    }
}
