//! Anonymity guarantee computation and target validation.
//!
//! For a credential size `t` the guarantee is the smallest non-zero count of
//! any size-`t` credential on any column set in scope, ignoring don't-care
//! credentials. Any row containing a hard constraint drops the guarantee to 0.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::constraints::{classify, ConstraintKind, ConstraintSet};
use crate::error::{Error, Result};
use crate::model::{count_credentials, AccessProfileArray, ColumnSet, Credential};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub column_set: ColumnSet,
    pub credential: Credential,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardViolation {
    pub row: usize,
    pub constraint: Credential,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuaranteeReport {
    pub t: usize,
    /// Computed guarantee; 0 when a hard constraint is violated. When every
    /// appearing credential is don't-care the guarantee is vacuous and
    /// reported as the row count.
    pub r: u64,
    /// Lexicographically first credential achieving `r`.
    pub min_witness: Option<Witness>,
    pub hard_violations: Vec<HardViolation>,
    /// Soft constraints (of size at most `t`) that appear, with counts.
    pub soft_appearances: Vec<(Credential, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortfall {
    pub credential: Credential,
    pub count: u64,
    pub kind: ConstraintKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub valid: bool,
    pub r_target: u64,
    pub report: GuaranteeReport,
    /// Appearing credentials with `0 < count < r_target`, in column-set then
    /// value order.
    pub violations: Vec<Shortfall>,
}

impl Validation {
    pub fn violation_for(&self, credential: &Credential) -> Option<&Shortfall> {
        self.violations.iter().find(|v| &v.credential == credential)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileEntry {
    pub t: usize,
    pub r: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnonymityProfile {
    pub entries: Vec<ProfileEntry>,
    pub hard_violations: Vec<HardViolation>,
}

fn check_inputs(array: &AccessProfileArray, t: usize, constraints: &ConstraintSet) -> Result<Vec<ColumnSet>> {
    if array.n_rows() == 0 {
        return Err(Error::invalid("array has no rows"));
    }
    if t == 0 || t > array.n_cols() {
        return Err(Error::invalid(format!(
            "credential size {t} outside 1..={}",
            array.n_cols()
        )));
    }
    constraints.check_schema(array.schema())?;
    constraints.column_sets(array.n_cols(), t)
}

/// Rows containing a hard constraint, in row order.
pub fn hard_violations(array: &AccessProfileArray, constraints: &ConstraintSet) -> Vec<HardViolation> {
    array
        .rows()
        .enumerate()
        .flat_map(|(row, cells)| {
            constraints
                .hard()
                .iter()
                .filter(move |h| h.matches_row(cells))
                .map(move |h| HardViolation {
                    row,
                    constraint: h.clone(),
                })
        })
        .collect()
}

fn soft_appearances(array: &AccessProfileArray, t: usize, constraints: &ConstraintSet) -> Vec<(Credential, u64)> {
    constraints
        .soft()
        .iter()
        .filter(|c| c.len() <= t)
        .map(|c| (c.clone(), array.rows().filter(|r| c.matches_row(r)).count() as u64))
        .filter(|&(_, n)| n > 0)
        .collect()
}

/// Computes the largest `r` for which the array is `(r, t)`-anonymous.
pub fn compute_guarantee(array: &AccessProfileArray, t: usize, constraints: &ConstraintSet) -> Result<GuaranteeReport> {
    let column_sets = check_inputs(array, t, constraints)?;
    let violations = hard_violations(array, constraints);
    let soft = soft_appearances(array, t, constraints);
    if !violations.is_empty() {
        return Ok(GuaranteeReport {
            t,
            r: 0,
            min_witness: None,
            hard_violations: violations,
            soft_appearances: soft,
        });
    }

    // per column set minimum; the reduction keeps the first minimum in
    // column-set order so the witness does not depend on scheduling
    let minima: Vec<Option<Witness>> = column_sets
        .par_iter()
        .map(|s| -> Result<Option<Witness>> {
            let table = count_credentials(array, s)?;
            let mut best: Option<Witness> = None;
            for (credential, count) in table.credentials() {
                if classify(&credential, constraints) == ConstraintKind::DontCare {
                    continue;
                }
                if best.as_ref().is_none_or(|b| count < b.count) {
                    best = Some(Witness {
                        column_set: s.clone(),
                        credential,
                        count,
                    });
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let min_witness = minima
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<Witness>, w| match acc {
            Some(a) if a.count <= w.count => Some(a),
            _ => Some(w),
        });
    let r = min_witness.as_ref().map_or(array.n_rows() as u64, |w| w.count);
    Ok(GuaranteeReport {
        t,
        r,
        min_witness,
        hard_violations: violations,
        soft_appearances: soft,
    })
}

/// Checks the array against a target guarantee, listing every appearing
/// credential that falls short. Soft constraints must appear zero times or
/// at least `r_target` times.
pub fn validate(
    array: &AccessProfileArray,
    r_target: u64,
    t: usize,
    constraints: &ConstraintSet,
) -> Result<Validation> {
    if r_target == 0 {
        return Err(Error::invalid("anonymity target r must be at least 1"));
    }
    let report = compute_guarantee(array, t, constraints)?;
    let column_sets = constraints.column_sets(array.n_cols(), t)?;
    let per_set: Vec<Vec<Shortfall>> = column_sets
        .par_iter()
        .map(|s| -> Result<Vec<Shortfall>> {
            let table = count_credentials(array, s)?;
            Ok(table
                .credentials()
                .filter(|&(_, n)| n < r_target)
                .filter_map(|(credential, count)| {
                    let kind = classify(&credential, constraints);
                    matches!(kind, ConstraintKind::Unconstrained | ConstraintKind::Soft).then_some(Shortfall {
                        credential,
                        count,
                        kind,
                    })
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut violations: Vec<Shortfall> = per_set.into_iter().flatten().collect();
    // soft constraints smaller than t are not visited by the column scan
    for (credential, count) in &report.soft_appearances {
        if credential.len() < t && *count < r_target {
            violations.push(Shortfall {
                credential: credential.clone(),
                count: *count,
                kind: ConstraintKind::Soft,
            });
        }
    }
    Ok(Validation {
        valid: report.hard_violations.is_empty() && violations.is_empty(),
        r_target,
        report,
        violations,
    })
}

/// True when `extended` contains every row of `base` (with multiplicity)
/// and is `(r, t)`-anonymous.
pub fn is_anonymizing_for(
    base: &AccessProfileArray,
    extended: &AccessProfileArray,
    r: u64,
    t: usize,
    constraints: &ConstraintSet,
) -> Result<bool> {
    if base.schema() != extended.schema() {
        return Err(Error::invalid("base and extended arrays use different schemas"));
    }
    if !contains_multiset(base, extended) {
        return Ok(false);
    }
    Ok(validate(extended, r, t, constraints)?.valid)
}

pub(crate) fn contains_multiset(base: &AccessProfileArray, extended: &AccessProfileArray) -> bool {
    let mut available: HashMap<&[usize], usize> = HashMap::new();
    for row in extended.rows() {
        *available.entry(row).or_default() += 1;
    }
    base.rows().all(|row| match available.get_mut(row) {
        Some(n) if *n > 0 => {
            *n -= 1;
            true
        }
        _ => false,
    })
}

/// Guarantees for `t = 1, 2, ...` until the guarantee reaches 1 (or 0 on a
/// hard violation) or `t_max` is reached.
pub fn anonymity_profile(
    array: &AccessProfileArray,
    constraints: &ConstraintSet,
    t_max: Option<usize>,
) -> Result<AnonymityProfile> {
    let k = array.n_cols();
    let t_max = t_max.unwrap_or(k);
    if t_max == 0 || t_max > k {
        return Err(Error::invalid(format!("t_max {t_max} outside 1..={k}")));
    }
    let mut entries = Vec::new();
    for t in 1..=t_max {
        if t > 1 && constraints.column_sets(k, t).is_err() {
            break;
        }
        let report = compute_guarantee(array, t, constraints)?;
        entries.push(ProfileEntry { t, r: report.r });
        if report.r == 0 {
            return Ok(AnonymityProfile {
                entries,
                hard_violations: report.hard_violations,
            });
        }
        if report.r <= 1 {
            break;
        }
    }
    Ok(AnonymityProfile {
        entries,
        hard_violations: Vec::new(),
    })
}
