//! Padding construction.
//!
//! Starting from a base array, rows are appended one at a time until every
//! unconstrained size-`t` credential appears at least `r` times and every
//! soft credential appears either zero or at least `r` times. Each step
//! draws a pool of candidate rows, seeding each with a random short
//! credential and completing the remaining attributes greedily (in random
//! order, avoiding every explicit and derived hard constraint), then keeps
//! the candidate that removes the most shortfall. Several independently
//! seeded attempts run and the one with the fewest rows wins. Padding rows
//! that turn out to be redundant are dropped at the end.
//!
//! The result is not claimed to be optimal.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constraints::{
    check_feasibility, classify, for_each_tuple, row_lower_bound, ConstraintKind, ConstraintSet, FeasibilityReport,
    ForbiddenSet, InfeasibleCredential,
};
use crate::error::{Error, Result};
use crate::model::{binomial, AccessProfileArray, ColumnSet, Credential};
use crate::verify::{compute_guarantee, hard_violations, GuaranteeReport};

/// Backtracking nodes allowed when completing one candidate row.
const FILL_NODE_BUDGET: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionConfig {
    pub r_target: u64,
    pub t: usize,
    pub seed: u64,
    /// Cap on total rows (base plus padding).
    pub max_rows: Option<usize>,
    pub candidates_per_row: usize,
    /// Additional attempts beyond the first.
    pub restarts: usize,
    /// Trade-off in `[0, 1]` between shortfall removed and the new row's
    /// projected local homogeneity.
    pub homogeneity_weight: f64,
}

impl ConstructionConfig {
    pub fn new(r_target: u64, t: usize) -> Self {
        ConstructionConfig {
            r_target,
            t,
            seed: 0,
            max_rows: None,
            candidates_per_row: 64,
            restarts: 3,
            homogeneity_weight: 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.r_target < 2 {
            return Err(Error::invalid("construction target r must be at least 2"));
        }
        if self.candidates_per_row == 0 {
            return Err(Error::invalid("candidates_per_row must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.homogeneity_weight) {
            return Err(Error::invalid("homogeneity_weight must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Shortfall statistics recorded after each appended padding row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub row: Vec<usize>,
    /// Net shortfall removed by this row (negative when it introduced soft
    /// credentials that now need servicing).
    pub gain: i64,
    pub remaining: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionResult {
    pub array: AccessProfileArray,
    pub padding_count: usize,
    pub achieved: GuaranteeReport,
    pub lower_bound: u64,
    pub trace: Vec<TraceEntry>,
    /// Redundant padding rows dropped after the greedy phase.
    pub pruned: usize,
    /// Index of the winning attempt.
    pub attempt: usize,
}

impl ConstructionResult {
    pub fn meets_lower_bound(&self) -> bool {
        self.array.n_rows() as u64 == self.lower_bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetExceeded {
    pub max_rows: usize,
    pub partial: AccessProfileArray,
    pub remaining: BTreeMap<Credential, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Need {
    /// Must reach `r`.
    Required,
    /// Zero or at least `r`.
    Soft,
    Ignore,
}

fn delta(need: Need, count: u64, r: u64) -> i64 {
    match need {
        Need::Required if count < r => 1,
        Need::Soft if count == 0 => -(r as i64 - 1),
        Need::Soft if count < r => 1,
        _ => 0,
    }
}

fn shortfall(need: Need, count: u64, r: u64) -> u64 {
    match need {
        Need::Required => r.saturating_sub(count),
        Need::Soft if count > 0 => r.saturating_sub(count),
        _ => 0,
    }
}

/// Per-credential counts over the tracked column sets.
#[derive(Clone)]
struct Tracker<'a> {
    constraints: &'a ConstraintSet,
    forbidden: &'a ForbiddenSet,
    r: u64,
    sets: Vec<ColumnSet>,
    /// Column sets of soft constraints smaller than `t`; only the soft tuples matter.
    soft_only: Vec<bool>,
    /// Number of leading sets that are the size-`t` sets in scope.
    scoped: usize,
    by_attr: Vec<Vec<usize>>,
    counts: Vec<HashMap<Vec<usize>, u64>>,
    members: Option<Vec<HashMap<Vec<usize>, Vec<usize>>>>,
    deficient: BTreeSet<(usize, Vec<usize>)>,
    n_rows: usize,
}

impl<'a> Tracker<'a> {
    fn new(
        array: &AccessProfileArray,
        constraints: &'a ConstraintSet,
        forbidden: &'a ForbiddenSet,
        r: u64,
        t: usize,
        track_members: bool,
    ) -> Result<Self> {
        let k = array.n_cols();
        let mut sets = constraints.column_sets(k, t)?;
        let scoped = sets.len();
        let mut soft_only = vec![false; scoped];
        let extra: BTreeSet<ColumnSet> = constraints
            .soft()
            .iter()
            .filter(|c| c.len() < t)
            .map(Credential::column_set)
            .collect();
        for s in extra {
            sets.push(s);
            soft_only.push(true);
        }
        let mut by_attr = vec![Vec::new(); k];
        for (i, s) in sets.iter().enumerate() {
            for &c in s.columns() {
                by_attr[c].push(i);
            }
        }
        let mut tracker = Tracker {
            constraints,
            forbidden,
            r,
            counts: vec![HashMap::new(); sets.len()],
            members: track_members.then(|| vec![HashMap::new(); scoped]),
            sets,
            soft_only,
            scoped,
            by_attr,
            deficient: BTreeSet::new(),
            n_rows: 0,
        };
        for row in array.rows() {
            tracker.record(row);
        }
        // credentials that never appeared but are required
        for s in 0..tracker.scoped {
            let domains: Vec<usize> = tracker.sets[s]
                .columns()
                .iter()
                .map(|&c| array.schema().domain_size(c))
                .collect();
            for_each_tuple(&domains, |values| {
                let n = tracker.count(s, values);
                if shortfall(tracker.need(s, values), n, r) > 0 {
                    tracker.deficient.insert((s, values.to_vec()));
                }
            });
        }
        Ok(tracker)
    }

    fn need(&self, s: usize, values: &[usize]) -> Need {
        let credential = Credential::on_columns(&self.sets[s], values);
        if self.soft_only[s] {
            return if self.constraints.soft().contains(&credential) {
                Need::Soft
            } else {
                Need::Ignore
            };
        }
        if self.forbidden.forbids_credential(&credential) {
            return Need::Ignore;
        }
        match classify(&credential, self.constraints) {
            ConstraintKind::Unconstrained => Need::Required,
            ConstraintKind::Soft => Need::Soft,
            ConstraintKind::Hard | ConstraintKind::DontCare => Need::Ignore,
        }
    }

    fn count(&self, s: usize, values: &[usize]) -> u64 {
        self.counts[s].get(values).copied().unwrap_or(0)
    }

    fn project(&self, s: usize, row: &[usize]) -> Vec<usize> {
        self.sets[s].columns().iter().map(|&c| row[c]).collect()
    }

    fn record(&mut self, row: &[usize]) {
        let index = self.n_rows;
        self.n_rows += 1;
        for s in 0..self.sets.len() {
            let key = self.project(s, row);
            let n = {
                let entry = self.counts[s].entry(key.clone()).or_insert(0);
                *entry += 1;
                *entry
            };
            if let Some(members) = &mut self.members {
                if s < self.scoped {
                    members[s].entry(key.clone()).or_default().push(index);
                }
            }
            if shortfall(self.need(s, &key), n, self.r) > 0 {
                self.deficient.insert((s, key));
            } else {
                self.deficient.remove(&(s, key));
            }
        }
    }

    fn unrecord(&mut self, row: &[usize]) {
        for s in 0..self.sets.len() {
            let key = self.project(s, row);
            if let Some(n) = self.counts[s].get_mut(&key) {
                *n -= 1;
            }
        }
        self.n_rows -= 1;
    }

    /// True when dropping one copy of `row` keeps every credential satisfied.
    fn removable(&self, row: &[usize]) -> bool {
        (0..self.sets.len()).all(|s| {
            let key = self.project(s, row);
            let n = self.count(s, &key) - 1;
            shortfall(self.need(s, &key), n, self.r) == 0
        })
    }

    fn total_shortfall(&self) -> u64 {
        self.deficient
            .iter()
            .map(|(s, v)| shortfall(self.need(*s, v), self.count(*s, v), self.r))
            .sum()
    }

    fn remaining(&self) -> BTreeMap<Credential, u64> {
        self.deficient
            .iter()
            .map(|(s, v)| {
                let need = self.need(*s, v);
                (
                    Credential::on_columns(&self.sets[*s], v),
                    shortfall(need, self.count(*s, v), self.r),
                )
            })
            .collect()
    }

    fn gain(&self, row: &[usize]) -> i64 {
        (0..self.sets.len())
            .map(|s| {
                let key = self.project(s, row);
                delta(self.need(s, &key), self.count(s, &key), self.r)
            })
            .sum()
    }

    /// Local homogeneity the row would have if appended now.
    fn projected_homogeneity(&self, row: &[usize], sentinel: f64) -> f64 {
        let Some(members) = &self.members else {
            return 0.0;
        };
        let mut total = 0.0;
        let mut neighbors = HashSet::new();
        for (s, groups) in members.iter().enumerate().take(self.scoped) {
            if let Some(m) = groups.get(&self.project(s, row)) {
                total += m.len() as f64 / (m.len() + 1) as f64;
                neighbors.extend(m.iter().copied());
            }
        }
        if neighbors.is_empty() {
            sentinel
        } else {
            total / neighbors.len() as f64
        }
    }

    /// Completes a partial row by backtracking, preferring values with the
    /// best marginal gain and breaking ties randomly.
    fn fill(
        &self,
        rng: &mut ChaCha8Rng,
        row: &mut [Option<usize>],
        order: &[usize],
        domains: &[usize],
        budget: &mut usize,
    ) -> bool {
        let Some((&a, rest)) = order.split_first() else {
            return true;
        };
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let mut options: Vec<(i64, usize)> = Vec::with_capacity(domains[a]);
        for x in 0..domains[a] {
            row[a] = Some(x);
            let pairs: Vec<(usize, usize)> = row.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
            if self.forbidden.forbids(&pairs) {
                continue;
            }
            let mut score = 0;
            for &s in &self.by_attr[a] {
                let cols = self.sets[s].columns();
                if cols.iter().all(|&c| row[c].is_some()) {
                    let key: Vec<usize> = cols.iter().map(|&c| row[c].unwrap()).collect();
                    score += delta(self.need(s, &key), self.count(s, &key), self.r);
                }
            }
            options.push((score, x));
        }
        options.shuffle(rng);
        options.sort_by_key(|&(score, _)| std::cmp::Reverse(score));
        for (_, x) in options {
            row[a] = Some(x);
            if self.fill(rng, row, rest, domains, budget) {
                return true;
            }
        }
        row[a] = None;
        false
    }

    /// A full valid row containing the deficient credential `seed`, if found.
    fn candidate(
        &self,
        rng: &mut ChaCha8Rng,
        seed: &(usize, Vec<usize>),
        domains: &[usize],
        budget: usize,
    ) -> Option<Vec<usize>> {
        let mut row = vec![None; domains.len()];
        for (&c, &v) in self.sets[seed.0].columns().iter().zip(&seed.1) {
            row[c] = Some(v);
        }
        let mut order: Vec<usize> = (0..domains.len()).filter(|&a| row[a].is_none()).collect();
        order.shuffle(rng);
        let mut budget = budget;
        self.fill(rng, &mut row, &order, domains, &mut budget)
            .then(|| row.into_iter().map(|v| v.expect("filled")).collect())
    }
}

/// Shortfall of every credential that still needs appearances to reach
/// `r_target`: appearing unconstrained or soft credentials below the target
/// and unconstrained credentials that never appear.
pub fn deficiency(
    array: &AccessProfileArray,
    r_target: u64,
    t: usize,
    constraints: &ConstraintSet,
) -> Result<BTreeMap<Credential, u64>> {
    if r_target == 0 {
        return Err(Error::invalid("anonymity target r must be at least 1"));
    }
    if t == 0 || t > array.n_cols() {
        return Err(Error::invalid(format!(
            "credential size {t} outside 1..={}",
            array.n_cols()
        )));
    }
    constraints.check_schema(array.schema())?;
    let report = check_feasibility(array.schema(), constraints, t)?;
    if !report.feasible {
        return Err(Error::Infeasible(Box::new(report)));
    }
    let forbidden = ForbiddenSet::closure(array.schema(), constraints, t);
    let tracker = Tracker::new(array, constraints, &forbidden, r_target, t, false)?;
    Ok(tracker.remaining())
}

enum AttemptOutcome {
    Done {
        array: AccessProfileArray,
        trace: Vec<TraceEntry>,
        pruned: usize,
    },
    OutOfBudget {
        partial: AccessProfileArray,
        remaining: BTreeMap<Credential, u64>,
    },
    Stuck(Vec<Credential>),
}

fn attempt_rng(seed: u64, attempt: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt as u64);
    rng
}

fn run_attempt(
    base: &AccessProfileArray,
    constraints: &ConstraintSet,
    forbidden: &ForbiddenSet,
    config: &ConstructionConfig,
    attempt: usize,
) -> Result<AttemptOutcome> {
    let mut rng = attempt_rng(config.seed, attempt);
    let weighted = config.homogeneity_weight > 0.0;
    let mut tracker = Tracker::new(base, constraints, forbidden, config.r_target, config.t, weighted)?;
    let domains = base.schema().domain_sizes();
    let sentinel = binomial(base.n_cols(), config.t) as f64;
    let mut array = base.clone();
    let mut trace = Vec::new();

    // each row either lowers the shortfall or introduces a soft credential
    // for the first time, so this many rows always suffice
    let soft_in_scope = tracker.sets.len() as u64 * constraints.soft().len() as u64;
    let guard = base.n_rows() as u64 + tracker.total_shortfall() + soft_in_scope * config.r_target + 1;

    while !tracker.deficient.is_empty() {
        if config.max_rows.is_some_and(|m| array.n_rows() >= m) || array.n_rows() as u64 >= guard {
            return Ok(AttemptOutcome::OutOfBudget {
                remaining: tracker.remaining(),
                partial: array,
            });
        }
        let pool: Vec<&(usize, Vec<usize>)> = tracker.deficient.iter().collect();
        let mut best: Option<(f64, i64, Vec<usize>)> = None;
        for _ in 0..config.candidates_per_row {
            let seed = pool[rng.gen_range(0..pool.len())];
            let Some(row) = tracker.candidate(&mut rng, seed, &domains, FILL_NODE_BUDGET) else {
                continue;
            };
            let gain = tracker.gain(&row);
            let mut score = gain as f64;
            if weighted {
                score -= config.homogeneity_weight * tracker.projected_homogeneity(&row, sentinel);
            }
            let better = match &best {
                None => true,
                Some((s, _, r)) => score > *s || (score == *s && row < *r),
            };
            if better {
                best = Some((score, gain, row));
            }
        }
        if best.is_none() {
            // exhaustive pass over every deficient credential before giving up
            let mut stuck = Vec::new();
            for seed in &pool {
                match tracker.candidate(&mut rng, seed, &domains, usize::MAX) {
                    Some(row) => {
                        let gain = tracker.gain(&row);
                        best = Some((gain as f64, gain, row));
                        break;
                    }
                    None => stuck.push(Credential::on_columns(&tracker.sets[seed.0], &seed.1)),
                }
            }
            if best.is_none() {
                return Ok(AttemptOutcome::Stuck(stuck));
            }
        }
        let (_, gain, row) = best.expect("candidate chosen");
        tracker.record(&row);
        array.push_row(row.clone())?;
        trace.push(TraceEntry {
            row,
            gain,
            remaining: tracker.total_shortfall(),
        });
    }

    // drop padding rows that are no longer needed, newest first
    let mut pruned = 0;
    let mut index = array.n_rows();
    while index > base.n_rows() {
        index -= 1;
        let row = array.row(index).to_vec();
        if tracker.removable(&row) {
            tracker.unrecord(&row);
            array.remove_row(index);
            pruned += 1;
        }
    }
    Ok(AttemptOutcome::Done { array, trace, pruned })
}

/// Appends padding rows to `base` until it is `(r_target, t)`-anonymous with
/// every unconstrained credential present.
pub fn construct_padding(
    base: &AccessProfileArray,
    constraints: &ConstraintSet,
    config: &ConstructionConfig,
) -> Result<ConstructionResult> {
    config.check()?;
    let schema = base.schema();
    let t = config.t;
    if t == 0 || t > schema.len() {
        return Err(Error::invalid(format!(
            "credential size {t} outside 1..={}",
            schema.len()
        )));
    }
    constraints.check_schema(schema)?;
    if let Some(v) = hard_violations(base, constraints).first() {
        return Err(Error::invalid(format!(
            "base row {} contains hard constraint {}",
            v.row + 1,
            v.constraint.display(schema)
        )));
    }
    let feasibility = check_feasibility(schema, constraints, t)?;
    if !feasibility.feasible {
        return Err(Error::Infeasible(Box::new(feasibility)));
    }
    let lower_bound = row_lower_bound(schema, constraints, config.r_target, t)?;
    let forbidden = ForbiddenSet::closure(schema, constraints, t);

    let outcomes: Vec<AttemptOutcome> = (0..=config.restarts)
        .into_par_iter()
        .map(|attempt| run_attempt(base, constraints, &forbidden, config, attempt))
        .collect::<Result<_>>()?;

    let mut best: Option<(usize, AccessProfileArray, Vec<TraceEntry>, usize)> = None;
    let mut closest: Option<(u64, AccessProfileArray, BTreeMap<Credential, u64>)> = None;
    let mut stuck_on = None;
    for (attempt, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            AttemptOutcome::Done { array, trace, pruned } => {
                let better = match &best {
                    None => true,
                    Some((_, b, _, _)) => {
                        (array.n_rows(), array.rows().collect::<Vec<_>>()) < (b.n_rows(), b.rows().collect::<Vec<_>>())
                    }
                };
                if better {
                    best = Some((attempt, array, trace, pruned));
                }
            }
            AttemptOutcome::OutOfBudget { partial, remaining } => {
                let left: u64 = remaining.values().sum();
                if closest.as_ref().is_none_or(|(l, _, _)| left < *l) {
                    closest = Some((left, partial, remaining));
                }
            }
            AttemptOutcome::Stuck(credentials) => {
                stuck_on.get_or_insert(credentials);
            }
        }
    }

    if let Some((attempt, array, trace, pruned)) = best {
        if array.n_rows() == 0 {
            return Err(Error::invalid("nothing to construct: no credential needs to appear"));
        }
        let achieved = compute_guarantee(&array, t, constraints)?;
        return Ok(ConstructionResult {
            padding_count: array.n_rows() - base.n_rows(),
            array,
            achieved,
            lower_bound,
            trace,
            pruned,
            attempt,
        });
    }
    if let Some((_, partial, remaining)) = closest {
        return Err(Error::BudgetExceeded(Box::new(BudgetExceeded {
            max_rows: config.max_rows.unwrap_or(partial.n_rows()),
            partial,
            remaining,
        })));
    }
    let credentials = stuck_on.unwrap_or_default();
    Err(Error::Infeasible(Box::new(FeasibilityReport {
        feasible: false,
        implicit_hard: feasibility.implicit_hard,
        witnesses: credentials
            .into_iter()
            .map(|credential| InfeasibleCredential {
                credential,
                forbidden_by: None,
            })
            .collect(),
        no_valid_row: false,
    })))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CredentialSizeSuggestion {
    /// Largest feasible credential size, 0 when none fits the budget.
    pub t: usize,
    pub result: Option<ConstructionResult>,
}

/// Largest `t` for which padding `base` to `(r_target, t)` fits within
/// `row_budget` total rows.
pub fn suggest_credential_size(
    base: &AccessProfileArray,
    constraints: &ConstraintSet,
    r_target: u64,
    row_budget: usize,
    seed: u64,
) -> Result<CredentialSizeSuggestion> {
    if row_budget < base.n_rows() {
        return Err(Error::invalid(format!(
            "row budget {row_budget} is smaller than the base array ({} rows)",
            base.n_rows()
        )));
    }
    let schema = base.schema();
    for t in (1..=schema.len()).rev() {
        if constraints.column_sets(schema.len(), t).is_err() {
            continue;
        }
        if !check_feasibility(schema, constraints, t)?.feasible {
            continue;
        }
        if row_lower_bound(schema, constraints, r_target, t)? > row_budget as u64 {
            continue;
        }
        let config = ConstructionConfig {
            seed,
            max_rows: Some(row_budget),
            ..ConstructionConfig::new(r_target, t)
        };
        match construct_padding(base, constraints, &config) {
            Ok(result) => {
                return Ok(CredentialSizeSuggestion {
                    t,
                    result: Some(result),
                })
            }
            Err(Error::BudgetExceeded(_)) | Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(CredentialSizeSuggestion { t: 0, result: None })
}
