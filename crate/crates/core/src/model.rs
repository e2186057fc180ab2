//! Schema, access profile array and credential types shared by every
//! analysis, together with the column-set enumeration and per-column-set
//! credential counting that the verifier and homogeneity scorer build on.
//!
//! Values are stored as indices into each attribute's domain. String labels
//! only appear at the file boundary (see [`crate::io`]).

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// One attribute (column) and its finite, ordered value domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttributeDef {
    pub name: String,
    pub values: Vec<String>,
}

impl AttributeDef {
    pub fn new<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        AttributeDef {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn domain_size(&self) -> usize {
        self.values.len()
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.values.iter().position(|v| v == label)
    }
}

/// Ordered list of attributes. Attribute names are unique and non-empty,
/// value labels are unique per attribute and every domain is non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttributeSchema {
    attributes: Vec<AttributeDef>,
}

impl AttributeSchema {
    pub fn new(attributes: Vec<AttributeDef>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Schema("schema has no attributes".into()));
        }
        let mut names = HashSet::new();
        for attr in &attributes {
            if attr.name.is_empty() {
                return Err(Error::Schema("attribute name is empty".into()));
            }
            if !names.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute name {:?}", attr.name)));
            }
            if attr.values.is_empty() {
                return Err(Error::Schema(format!("attribute {:?} has no values", attr.name)));
            }
            let mut labels = HashSet::new();
            for v in &attr.values {
                if !labels.insert(v.as_str()) {
                    return Err(Error::Schema(format!(
                        "attribute {:?} lists value {:?} twice",
                        attr.name, v
                    )));
                }
            }
        }
        Ok(AttributeSchema { attributes })
    }

    /// Schema whose attributes are named `a1..ak` with values `0..v_i`.
    pub fn numeric(domain_sizes: &[usize]) -> Result<Self> {
        let attrs = domain_sizes
            .iter()
            .enumerate()
            .map(|(i, &v)| AttributeDef::new(format!("a{}", i + 1), (0..v).map(|x| x.to_string())))
            .collect();
        Self::new(attrs)
    }

    /// Number of attributes, `k`.
    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    pub fn attribute(&self, index: usize) -> &AttributeDef {
        &self.attributes[index]
    }

    pub fn domain_size(&self, index: usize) -> usize {
        self.attributes[index].values.len()
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        self.attributes.iter().map(AttributeDef::domain_size).collect()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// Attributes with a single value. They are legal but carry no information.
    pub fn trivial_attributes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.domain_size(i) == 1).collect()
    }

    /// Resolves an `(attribute name, value label)` pair to indices.
    pub fn resolve_pair(&self, attribute: &str, value: &str) -> Result<(usize, usize)> {
        let a = self
            .attribute_index(attribute)
            .ok_or_else(|| Error::invalid(format!("unknown attribute {attribute:?}")))?;
        let v = self.attributes[a]
            .value_index(value)
            .ok_or_else(|| Error::invalid(format!("unknown value {value:?} for attribute {attribute:?}")))?;
        Ok((a, v))
    }
}

/// A sorted set of distinct attribute indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnSet(Vec<usize>);

impl ColumnSet {
    pub fn new(k: usize, mut columns: Vec<usize>) -> Result<Self> {
        columns.sort_unstable();
        if columns.is_empty() {
            return Err(Error::invalid("column set is empty"));
        }
        if columns.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("column set {columns:?} repeats a column")));
        }
        if let Some(&c) = columns.iter().find(|&&c| c >= k) {
            return Err(Error::invalid(format!("column {c} out of range for {k} attributes")));
        }
        Ok(ColumnSet(columns))
    }

    pub fn columns(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_subset_of(&self, other: &ColumnSet) -> bool {
        let mut it = other.0.iter();
        self.0.iter().all(|c| it.any(|o| o == c))
    }

    pub fn names<'a>(&self, schema: &'a AttributeSchema) -> Vec<&'a str> {
        self.0.iter().map(|&c| schema.attribute(c).name.as_str()).collect()
    }
}

impl fmt::Display for ColumnSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

/// A set of `(attribute, value)` pairs with distinct attributes, sorted by
/// attribute index. Ordering is lexicographic over the pair list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Credential {
    pairs: Vec<(usize, usize)>,
}

impl Credential {
    pub fn new(schema: &AttributeSchema, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        if pairs.is_empty() {
            return Err(Error::invalid("credential has no attribute-value pairs"));
        }
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("credential names an attribute twice"));
        }
        for &(a, v) in &pairs {
            if a >= schema.len() {
                return Err(Error::invalid(format!("attribute index {a} out of range")));
            }
            if v >= schema.domain_size(a) {
                return Err(Error::invalid(format!(
                    "value index {v} out of range for attribute {:?}",
                    schema.attribute(a).name
                )));
            }
        }
        Ok(Credential { pairs })
    }

    /// Builds a credential from `(attribute name, value label)` pairs.
    pub fn from_labels(schema: &AttributeSchema, pairs: &[(&str, &str)]) -> Result<Self> {
        let resolved = pairs
            .iter()
            .map(|(a, v)| schema.resolve_pair(a, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(schema, resolved)
    }

    /// Caller guarantees pairs are sorted with distinct, in-domain attributes.
    pub(crate) fn from_sorted_pairs(pairs: Vec<(usize, usize)>) -> Self {
        debug_assert!(!pairs.is_empty());
        debug_assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0));
        Credential { pairs }
    }

    pub(crate) fn on_columns(columns: &ColumnSet, values: &[usize]) -> Self {
        Self::from_sorted_pairs(columns.0.iter().copied().zip(values.iter().copied()).collect())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn column_set(&self) -> ColumnSet {
        ColumnSet(self.pairs.iter().map(|p| p.0).collect())
    }

    pub fn values(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    pub fn value_of(&self, attribute: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&attribute, |p| p.0)
            .ok()
            .map(|i| self.pairs[i].1)
    }

    /// True when every pair of `self` also occurs in `other`.
    pub fn is_subset_of(&self, other: &Credential) -> bool {
        pairs_subset(&self.pairs, &other.pairs)
    }

    /// True when the full row assigns every pair of this credential.
    pub fn matches_row(&self, row: &[usize]) -> bool {
        self.pairs.iter().all(|&(a, v)| row.get(a) == Some(&v))
    }

    pub fn labels<'a>(&self, schema: &'a AttributeSchema) -> Vec<(&'a str, &'a str)> {
        self.pairs
            .iter()
            .map(|&(a, v)| {
                let attr = schema.attribute(a);
                (attr.name.as_str(), attr.values[v].as_str())
            })
            .collect()
    }

    /// Renders as `{Role=faculty, Job=grader}`.
    pub fn display<'a>(&'a self, schema: &'a AttributeSchema) -> CredentialDisplay<'a> {
        CredentialDisplay {
            credential: self,
            schema,
        }
    }
}

pub(crate) fn pairs_subset(small: &[(usize, usize)], big: &[(usize, usize)]) -> bool {
    let mut it = big.iter();
    small.iter().all(|p| it.any(|q| q == p))
}

pub struct CredentialDisplay<'a> {
    credential: &'a Credential,
    schema: &'a AttributeSchema,
}

impl fmt::Display for CredentialDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (a, v)) in self.credential.labels(self.schema).into_iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}={v}")?;
        }
        write!(f, "}}")
    }
}

/// An `N x k` matrix of value indices over a schema. Rows are access
/// profiles and may repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessProfileArray {
    schema: AttributeSchema,
    cells: Vec<usize>,
    n_rows: usize,
    row_labels: Option<Vec<String>>,
}

impl AccessProfileArray {
    pub fn new(schema: AttributeSchema, rows: Vec<Vec<usize>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("array has no rows"));
        }
        let mut array = Self::empty(schema);
        for row in rows {
            array.push_row(row)?;
        }
        Ok(array)
    }

    /// An array with zero rows. Only meaningful as a construction base.
    pub fn empty(schema: AttributeSchema) -> Self {
        AccessProfileArray {
            schema,
            cells: Vec::new(),
            n_rows: 0,
            row_labels: None,
        }
    }

    /// Builds an array from value labels, one slice per row.
    pub fn from_labels(schema: AttributeSchema, rows: &[&[&str]]) -> Result<Self> {
        let mut indexed = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::invalid(format!(
                    "row {r} has {} cells, expected {}",
                    row.len(),
                    schema.len()
                )));
            }
            let values = row
                .iter()
                .enumerate()
                .map(|(a, label)| {
                    schema.attribute(a).value_index(label).ok_or_else(|| {
                        Error::invalid(format!(
                            "row {r}: unknown value {label:?} for attribute {:?}",
                            schema.attribute(a).name
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            indexed.push(values);
        }
        Self::new(schema, indexed)
    }

    pub fn with_row_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_rows {
            return Err(Error::invalid(format!(
                "{} row labels for {} rows",
                labels.len(),
                self.n_rows
            )));
        }
        self.row_labels = Some(labels);
        Ok(self)
    }

    pub fn push_row(&mut self, row: Vec<usize>) -> Result<()> {
        if row.len() != self.schema.len() {
            return Err(Error::invalid(format!(
                "row has {} cells, schema has {} attributes",
                row.len(),
                self.schema.len()
            )));
        }
        for (a, &v) in row.iter().enumerate() {
            if v >= self.schema.domain_size(a) {
                return Err(Error::invalid(format!(
                    "value index {v} out of range for attribute {:?}",
                    self.schema.attribute(a).name
                )));
            }
        }
        self.cells.extend(row);
        self.n_rows += 1;
        if let Some(labels) = &mut self.row_labels {
            labels.push(self.n_rows.to_string());
        }
        Ok(())
    }

    pub(crate) fn remove_row(&mut self, index: usize) {
        let k = self.schema.len();
        self.cells.drain(index * k..(index + 1) * k);
        self.n_rows -= 1;
        if let Some(labels) = &mut self.row_labels {
            labels.remove(index);
        }
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, index: usize) -> &[usize] {
        let k = self.schema.len();
        &self.cells[index * k..(index + 1) * k]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.cells.chunks_exact(self.schema.len().max(1)).take(self.n_rows)
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    /// Display label for a row: its explicit label or its 1-based position.
    pub fn row_label(&self, index: usize) -> String {
        match &self.row_labels {
            Some(labels) => labels[index].clone(),
            None => (index + 1).to_string(),
        }
    }

    /// Reorders columns: new column `j` is old column `order[j]`.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        let k = self.n_cols();
        let mut seen = vec![false; k];
        if order.len() != k || order.iter().any(|&c| c >= k || std::mem::replace(&mut seen[c], true)) {
            return Err(Error::invalid("column order is not a permutation"));
        }
        let attrs = order.iter().map(|&c| self.schema.attribute(c).clone()).collect();
        let schema = AttributeSchema::new(attrs)?;
        let mut out = Self::empty(schema);
        for row in self.rows() {
            out.push_row(order.iter().map(|&c| row[c]).collect())?;
        }
        out.row_labels = self.row_labels.clone();
        Ok(out)
    }

    /// Reorders rows: new row `i` is old row `order[i]`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        let n = self.n_rows;
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&r| r >= n || std::mem::replace(&mut seen[r], true)) {
            return Err(Error::invalid("row order is not a permutation"));
        }
        let mut out = Self::empty(self.schema.clone());
        for &r in order {
            out.push_row(self.row(r).to_vec())?;
        }
        out.row_labels = self
            .row_labels
            .as_ref()
            .map(|l| order.iter().map(|&r| l[r].clone()).collect());
        Ok(out)
    }
}

/// Per-column-set occurrence counts. Only tuples that occur are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialCountTable {
    column_set: ColumnSet,
    counts: BTreeMap<Vec<usize>, u64>,
}

impl CredentialCountTable {
    pub fn column_set(&self) -> &ColumnSet {
        &self.column_set
    }

    pub fn count(&self, values: &[usize]) -> u64 {
        self.counts.get(values).copied().unwrap_or(0)
    }

    /// Tuples in lexicographic order with their counts.
    pub fn iter(&self) -> impl Iterator<Item = (&[usize], u64)> + '_ {
        self.counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn credentials(&self) -> impl Iterator<Item = (Credential, u64)> + '_ {
        self.iter()
            .map(|(values, n)| (Credential::on_columns(&self.column_set, values), n))
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// `C(n, r)` for the small arguments used here.
pub fn binomial(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// All sorted `t`-subsets of `0..k` in lexicographic order.
pub fn enumerate_column_sets(k: usize, t: usize) -> Result<Vec<ColumnSet>> {
    if t == 0 || t > k {
        return Err(Error::invalid(format!("credential size {t} outside 1..={k}")));
    }
    let mut out = Vec::with_capacity(binomial(k, t) as usize);
    let mut idx: Vec<usize> = (0..t).collect();
    loop {
        out.push(ColumnSet(idx.clone()));
        // rightmost position that can still advance
        let Some(pos) = (0..t).rev().find(|&i| idx[i] < k - t + i) else {
            break;
        };
        idx[pos] += 1;
        for i in pos + 1..t {
            idx[i] = idx[i - 1] + 1;
        }
    }
    Ok(out)
}

fn check_column_set(array: &AccessProfileArray, column_set: &ColumnSet) -> Result<()> {
    match column_set.0.last() {
        Some(&c) if c < array.n_cols() => Ok(()),
        Some(&c) => Err(Error::invalid(format!(
            "column {c} out of range for {} attributes",
            array.n_cols()
        ))),
        None => Err(Error::invalid("column set is empty")),
    }
}

/// Counts, in one pass over the rows, how often each value tuple occurs on
/// `column_set`.
pub fn count_credentials(array: &AccessProfileArray, column_set: &ColumnSet) -> Result<CredentialCountTable> {
    check_column_set(array, column_set)?;
    let mut counts = BTreeMap::new();
    let mut key = Vec::with_capacity(column_set.len());
    for row in array.rows() {
        key.clear();
        key.extend(column_set.0.iter().map(|&c| row[c]));
        match counts.get_mut(&key) {
            Some(n) => *n += 1,
            None => {
                counts.insert(key.clone(), 1);
            }
        }
    }
    Ok(CredentialCountTable {
        column_set: column_set.clone(),
        counts,
    })
}

/// The single credential `row` presents on the attributes of `column_set`.
pub fn credential_of_row(array: &AccessProfileArray, row: usize, column_set: &ColumnSet) -> Result<Credential> {
    check_column_set(array, column_set)?;
    if row >= array.n_rows() {
        return Err(Error::invalid(format!(
            "row {row} out of range for {} rows",
            array.n_rows()
        )));
    }
    let r = array.row(row);
    let values: Vec<usize> = column_set.0.iter().map(|&c| r[c]).collect();
    Ok(Credential::on_columns(column_set, &values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(v: &[usize]) -> ColumnSet {
        ColumnSet(v.to_vec())
    }

    // Independent count of t-subsets by the Pascal recurrence.
    fn pascal(k: usize, t: usize) -> usize {
        if t == 0 || t == k {
            1
        } else if t > k {
            0
        } else {
            pascal(k - 1, t - 1) + pascal(k - 1, t)
        }
    }

    #[test]
    fn column_sets_small_cases() {
        assert_eq!(
            enumerate_column_sets(3, 2).unwrap(),
            vec![cs(&[0, 1]), cs(&[0, 2]), cs(&[1, 2])]
        );
        assert_eq!(enumerate_column_sets(4, 2).unwrap().len(), 6);
        assert_eq!(enumerate_column_sets(5, 5).unwrap(), vec![cs(&[0, 1, 2, 3, 4])]);
    }

    #[test]
    fn column_sets_match_pascal_and_are_sorted() {
        for k in 1..=9 {
            for t in 1..=k {
                let sets = enumerate_column_sets(k, t).unwrap();
                assert_eq!(sets.len(), pascal(k, t), "k={k} t={t}");
                assert_eq!(sets.len() as u64, binomial(k, t));
                assert!(sets.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn column_sets_reject_bad_t() {
        assert!(matches!(enumerate_column_sets(3, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(enumerate_column_sets(3, 4), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        let dup = vec![AttributeDef::new("a", ["0", "1"]), AttributeDef::new("a", ["0"])];
        assert!(AttributeSchema::new(dup).is_err());
        assert!(AttributeSchema::new(vec![AttributeDef::new("", ["0"])]).is_err());
        assert!(AttributeSchema::new(vec![AttributeDef::new("a", ["x", "x"])]).is_err());
        assert!(AttributeSchema::new(vec![AttributeDef::new("a", Vec::<String>::new())]).is_err());
        let trivial = AttributeSchema::new(vec![
            AttributeDef::new("a", ["only"]),
            AttributeDef::new("b", ["0", "1"]),
        ])
        .unwrap();
        assert_eq!(trivial.trivial_attributes(), vec![0]);
    }

    #[test]
    fn credential_validation() {
        let schema = AttributeSchema::numeric(&[2, 3]).unwrap();
        assert!(Credential::new(&schema, vec![]).is_err());
        assert!(Credential::new(&schema, vec![(0, 0), (0, 1)]).is_err());
        assert!(Credential::new(&schema, vec![(1, 3)]).is_err());
        assert!(Credential::new(&schema, vec![(2, 0)]).is_err());
        let c = Credential::new(&schema, vec![(1, 2), (0, 1)]).unwrap();
        assert_eq!(c.pairs(), &[(0, 1), (1, 2)]);
        assert_eq!(c.display(&schema).to_string(), "{a1=1, a2=2}");
    }

    #[test]
    fn counting_and_row_credentials() {
        let schema = AttributeSchema::numeric(&[1, 2, 2]).unwrap();
        let array = AccessProfileArray::new(schema, vec![vec![0, 0, 1], vec![0, 1, 1], vec![0, 1, 0]]).unwrap();
        let table = count_credentials(&array, &cs(&[0, 1])).unwrap();
        assert_eq!(table.count(&[0, 0]), 1);
        assert_eq!(table.count(&[0, 1]), 2);
        assert_eq!(table.total(), 3);
        // single-valued column: all rows share its value
        let single = count_credentials(&array, &cs(&[0])).unwrap();
        assert_eq!(single.count(&[0]), 3);

        let c = credential_of_row(&array, 1, &cs(&[1, 2])).unwrap();
        assert_eq!(c.pairs(), &[(1, 1), (2, 1)]);
        let full = credential_of_row(&array, 2, &cs(&[0, 1, 2])).unwrap();
        assert_eq!(full.values(), array.row(2).to_vec());
        assert!(credential_of_row(&array, 3, &cs(&[0])).is_err());
        assert!(count_credentials(&array, &cs(&[3])).is_err());
    }

    #[test]
    fn array_rejects_out_of_domain() {
        let schema = AttributeSchema::numeric(&[2, 2]).unwrap();
        assert!(AccessProfileArray::new(schema.clone(), vec![vec![0, 2]]).is_err());
        assert!(AccessProfileArray::new(schema.clone(), vec![vec![0]]).is_err());
        assert!(AccessProfileArray::new(schema, vec![]).is_err());
    }

    #[test]
    fn permutations() {
        let schema = AttributeSchema::numeric(&[2, 3]).unwrap();
        let array = AccessProfileArray::new(schema, vec![vec![0, 2], vec![1, 0]]).unwrap();
        let p = array.permute_columns(&[1, 0]).unwrap();
        assert_eq!(p.row(0), &[2, 0]);
        assert_eq!(p.schema().attribute(0).name, "a2");
        let q = array.permute_rows(&[1, 0]).unwrap();
        assert_eq!(q.row(0), &[1, 0]);
        assert!(array.permute_rows(&[0, 0]).is_err());
    }
}
