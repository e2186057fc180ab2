//! Hard, soft and don't-care constraints.
//!
//! A hard constraint forbids every row that contains it, and therefore every
//! credential that is a superset of it. A soft constraint is a credential
//! that may appear zero times or at least `r` times. A don't-care
//! credential (and any superset) is exempt from the appearance rule; it models
//! credentials that cross attribute-authority boundaries and never occur in a
//! policy.
//!
//! Explicit hard constraints can force further credentials to be
//! unrealizable. [`ForbiddenSet::closure`] derives those by value elimination:
//! a credential `c` is forbidden when some attribute `a` outside `c` has
//! every value `x` such that `c + (a, x)` is forbidden. The fixpoint is sound
//! but incomplete; a credential it does not flag may still be unrealizable
//! under more intricate interactions.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::model::{enumerate_column_sets, pairs_subset, AttributeSchema, ColumnSet, Credential};

/// Upper bound on rest combinations explored per attribute per pass.
const MAX_COMBINATIONS_PER_ATTRIBUTE: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintKind {
    Hard,
    Soft,
    DontCare,
    Unconstrained,
}

impl ConstraintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::Hard => "hard",
            ConstraintKind::Soft => "soft",
            ConstraintKind::DontCare => "dont_care",
            ConstraintKind::Unconstrained => "unconstrained",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    hard: BTreeSet<Credential>,
    soft: BTreeSet<Credential>,
    dont_care: BTreeSet<Credential>,
    allowed_column_sets: Option<Vec<ColumnSet>>,
}

impl ConstraintSet {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn new(
        hard: impl IntoIterator<Item = Credential>,
        soft: impl IntoIterator<Item = Credential>,
        dont_care: impl IntoIterator<Item = Credential>,
    ) -> Result<Self> {
        let set = ConstraintSet {
            hard: hard.into_iter().collect(),
            soft: soft.into_iter().collect(),
            dont_care: dont_care.into_iter().collect(),
            allowed_column_sets: None,
        };
        for c in &set.hard {
            if set.soft.contains(c) || set.dont_care.contains(c) {
                return Err(Error::invalid("a credential is listed under two constraint kinds"));
            }
        }
        if set.soft.iter().any(|c| set.dont_care.contains(c)) {
            return Err(Error::invalid("a credential is listed under two constraint kinds"));
        }
        Ok(set)
    }

    /// Restricts analyses to the attribute sets a policy may combine. For
    /// credential size `t` the column sets in scope are the `t`-subsets of
    /// the listed sets.
    pub fn with_allowed_column_sets(mut self, sets: Vec<ColumnSet>) -> Self {
        self.allowed_column_sets = Some(sets);
        self
    }

    pub fn hard(&self) -> &BTreeSet<Credential> {
        &self.hard
    }

    pub fn soft(&self) -> &BTreeSet<Credential> {
        &self.soft
    }

    pub fn dont_care(&self) -> &BTreeSet<Credential> {
        &self.dont_care
    }

    pub fn allowed_column_sets(&self) -> Option<&[ColumnSet]> {
        self.allowed_column_sets.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.hard.is_empty() && self.soft.is_empty() && self.dont_care.is_empty()
    }

    fn all(&self) -> impl Iterator<Item = (ConstraintKind, &Credential)> + '_ {
        self.hard
            .iter()
            .map(|c| (ConstraintKind::Hard, c))
            .chain(self.soft.iter().map(|c| (ConstraintKind::Soft, c)))
            .chain(self.dont_care.iter().map(|c| (ConstraintKind::DontCare, c)))
    }

    /// Checks every credential (and allowed column set) against `schema`.
    pub fn check_schema(&self, schema: &AttributeSchema) -> Result<()> {
        for (kind, c) in self.all() {
            if Credential::new(schema, c.pairs().to_vec()).is_err() {
                return Err(Error::invalid(format!(
                    "{} constraint {:?} does not fit the schema",
                    kind.as_str(),
                    c.pairs()
                )));
            }
        }
        if let Some(sets) = &self.allowed_column_sets {
            for s in sets {
                ColumnSet::new(schema.len(), s.columns().to_vec())?;
            }
        }
        Ok(())
    }

    /// Constraints with more pairs than `t`. Soft and don't-care ones have
    /// no effect at that size; hard ones still forbid whole rows.
    pub fn oversized(&self, t: usize) -> Vec<(ConstraintKind, &Credential)> {
        self.all().filter(|(_, c)| c.len() > t).collect()
    }

    /// Column sets of size `t` that analyses iterate, in lexicographic order.
    pub fn column_sets(&self, k: usize, t: usize) -> Result<Vec<ColumnSet>> {
        let all = enumerate_column_sets(k, t)?;
        let Some(allowed) = &self.allowed_column_sets else {
            return Ok(all);
        };
        let scoped: Vec<ColumnSet> = all
            .into_iter()
            .filter(|s| allowed.iter().any(|a| s.is_subset_of(a)))
            .collect();
        if scoped.is_empty() {
            return Err(Error::invalid(format!("no allowed column set covers {t} attributes")));
        }
        Ok(scoped)
    }
}

/// Classifies a credential. A superset of a hard constraint is hard; an
/// exact soft or don't-care constraint keeps its kind; a superset of a
/// don't-care constraint is don't-care; everything else is unconstrained.
pub fn classify(credential: &Credential, constraints: &ConstraintSet) -> ConstraintKind {
    if constraints.hard.iter().any(|h| h.is_subset_of(credential)) {
        ConstraintKind::Hard
    } else if constraints.soft.contains(credential) {
        ConstraintKind::Soft
    } else if constraints.dont_care.iter().any(|d| d.is_subset_of(credential)) {
        ConstraintKind::DontCare
    } else {
        ConstraintKind::Unconstrained
    }
}

type Pairs = Vec<(usize, usize)>;

/// Minimal forbidden partial assignments implied by the hard constraints.
///
/// An empty member means no full row avoids the hard constraints at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForbiddenSet {
    members: Vec<Pairs>,
}

impl ForbiddenSet {
    /// Runs value-elimination propagation to a fixpoint. Candidates larger
    /// than `max(t, largest hard constraint)` are not explored.
    pub fn closure(schema: &AttributeSchema, constraints: &ConstraintSet, t: usize) -> Self {
        let mut set = ForbiddenSet { members: Vec::new() };
        for h in &constraints.hard {
            set.insert(h.pairs().to_vec());
        }
        let cap = constraints.hard.iter().map(Credential::len).max().unwrap_or(0).max(t);
        loop {
            if set.members.iter().any(Vec::is_empty) {
                break;
            }
            let mut found = Vec::new();
            for a in 0..schema.len() {
                set.eliminate_attribute(schema, a, cap, &mut found);
            }
            let mut changed = false;
            for c in found {
                changed |= set.insert(c);
            }
            if !changed {
                break;
            }
        }
        set.members.sort();
        set
    }

    fn eliminate_attribute(&self, schema: &AttributeSchema, a: usize, cap: usize, out: &mut Vec<Pairs>) {
        // rests[x] = members containing (a, x), with that pair removed
        let mut rests: Vec<Vec<Pairs>> = vec![Vec::new(); schema.domain_size(a)];
        for m in &self.members {
            if let Some(&(_, x)) = m.iter().find(|p| p.0 == a) {
                rests[x].push(m.iter().copied().filter(|p| p.0 != a).collect());
            }
        }
        if rests.iter().any(Vec::is_empty) {
            return;
        }
        let mut budget = MAX_COMBINATIONS_PER_ATTRIBUTE;
        self.combine(&rests, 0, Vec::new(), cap, &mut budget, out);
    }

    fn combine(
        &self,
        rests: &[Vec<Pairs>],
        x: usize,
        acc: Pairs,
        cap: usize,
        budget: &mut usize,
        out: &mut Vec<Pairs>,
    ) {
        if x == rests.len() {
            out.push(acc);
            return;
        }
        for rest in &rests[x] {
            if *budget == 0 {
                return;
            }
            *budget -= 1;
            let Some(merged) = merge_pairs(&acc, rest) else {
                continue;
            };
            if merged.len() > cap || self.forbids(&merged) {
                // supersets of known forbidden assignments add nothing
                continue;
            }
            self.combine(rests, x + 1, merged, cap, budget, out);
        }
    }

    fn insert(&mut self, c: Pairs) -> bool {
        if self.forbids(&c) {
            return false;
        }
        self.members.retain(|m| !pairs_subset(&c, m));
        self.members.push(c);
        true
    }

    /// True when the partial assignment contains a forbidden member.
    pub fn forbids(&self, pairs: &[(usize, usize)]) -> bool {
        self.members.iter().any(|m| pairs_subset(m, pairs))
    }

    pub fn forbids_credential(&self, credential: &Credential) -> bool {
        self.forbids(credential.pairs())
    }

    /// True when a full row contains a forbidden member.
    pub fn forbids_row(&self, row: &[usize]) -> bool {
        self.members.iter().any(|m| m.iter().all(|&(a, v)| row[a] == v))
    }

    /// No full row can avoid the hard constraints.
    pub fn excludes_every_row(&self) -> bool {
        self.members.iter().any(Vec::is_empty)
    }

    pub fn members(&self) -> impl Iterator<Item = &[(usize, usize)]> + '_ {
        self.members.iter().map(Vec::as_slice)
    }
}

fn merge_pairs(a: &[(usize, usize)], b: &[(usize, usize)]) -> Option<Pairs> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (pa, pb) = (a[i], b[j]);
        if pa.0 < pb.0 {
            out.push(pa);
            i += 1;
        } else if pb.0 < pa.0 {
            out.push(pb);
            j += 1;
        } else if pa.1 == pb.1 {
            out.push(pa);
            i += 1;
            j += 1;
        } else {
            return None;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some(out)
}

/// Newly derived minimal forbidden credentials of size at most `t`.
/// Explicit constraints of any kind are not repeated.
pub fn derive_implicit_hard(schema: &AttributeSchema, constraints: &ConstraintSet, t: usize) -> BTreeSet<Credential> {
    let closure = ForbiddenSet::closure(schema, constraints, t);
    closure
        .members()
        .filter(|m| !m.is_empty() && m.len() <= t)
        .map(|m| Credential::from_sorted_pairs(m.to_vec()))
        .filter(|c| {
            !constraints.hard.contains(c) && !constraints.soft.contains(c) && !constraints.dont_care.contains(c)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfeasibleCredential {
    pub credential: Credential,
    /// The forbidden sub-credential responsible, or `None` when no row at
    /// all avoids the hard constraints.
    pub forbidden_by: Option<Credential>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub implicit_hard: BTreeSet<Credential>,
    pub witnesses: Vec<InfeasibleCredential>,
    /// Set when the hard constraints exclude every full row.
    pub no_valid_row: bool,
}

/// Visits every value tuple of the given domains in lexicographic order.
pub(crate) fn for_each_tuple(domains: &[usize], mut f: impl FnMut(&[usize])) {
    if domains.contains(&0) {
        return;
    }
    let mut tuple = vec![0usize; domains.len()];
    loop {
        f(&tuple);
        let mut i = domains.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            tuple[i] += 1;
            if tuple[i] < domains[i] {
                break;
            }
            tuple[i] = 0;
        }
    }
}

/// Decides whether every unconstrained credential of size `t` (on the
/// column sets in scope) can still appear in some row. Infeasible exactly
/// when an unconstrained credential contains an implicitly forbidden one.
pub fn check_feasibility(schema: &AttributeSchema, constraints: &ConstraintSet, t: usize) -> Result<FeasibilityReport> {
    let column_sets = constraints.column_sets(schema.len(), t)?;
    let closure = ForbiddenSet::closure(schema, constraints, t);
    let implicit_hard = derive_implicit_hard(schema, constraints, t);
    let mut witnesses = BTreeSet::new();
    let mut push = |credential: Credential, forbidden_by: Option<Credential>| {
        if classify(&credential, constraints) == ConstraintKind::Unconstrained {
            witnesses.insert((credential, forbidden_by));
        }
    };

    if closure.excludes_every_row() {
        for s in &column_sets {
            let domains: Vec<usize> = s.columns().iter().map(|&c| schema.domain_size(c)).collect();
            for_each_tuple(&domains, |values| push(Credential::on_columns(s, values), None));
        }
    } else {
        for member in closure.members().filter(|m| m.len() <= t) {
            let forbidden = Credential::from_sorted_pairs(member.to_vec());
            let fixed = forbidden.column_set();
            for s in column_sets.iter().filter(|s| fixed.is_subset_of(s)) {
                let free: Vec<usize> = s
                    .columns()
                    .iter()
                    .copied()
                    .filter(|c| forbidden.value_of(*c).is_none())
                    .collect();
                let domains: Vec<usize> = free.iter().map(|&c| schema.domain_size(c)).collect();
                for_each_tuple(&domains, |values| {
                    let mut pairs = member.to_vec();
                    pairs.extend(free.iter().copied().zip(values.iter().copied()));
                    pairs.sort_unstable();
                    push(Credential::from_sorted_pairs(pairs), Some(forbidden.clone()));
                });
            }
        }
    }

    // one witness per credential, keeping the smallest responsible subset
    let mut seen = HashSet::new();
    let witnesses: Vec<InfeasibleCredential> = witnesses
        .into_iter()
        .filter(|(c, _)| seen.insert(c.clone()))
        .map(|(credential, forbidden_by)| InfeasibleCredential {
            credential,
            forbidden_by,
        })
        .collect();
    Ok(FeasibilityReport {
        feasible: witnesses.is_empty(),
        implicit_hard,
        witnesses,
        no_valid_row: closure.excludes_every_row(),
    })
}

/// Number of unconstrained size-`t` credentials on one column set.
fn unconstrained_on(schema: &AttributeSchema, constraints: &ConstraintSet, s: &ColumnSet) -> u64 {
    let domains: Vec<usize> = s.columns().iter().map(|&c| schema.domain_size(c)).collect();
    let total = domains.iter().fold(1u64, |acc, &d| acc.saturating_mul(d as u64));

    let mut constrained: HashSet<Vec<usize>> = HashSet::new();
    let mut extend = |c: &Credential| {
        if !c.column_set().is_subset_of(s) {
            return;
        }
        let free: Vec<usize> = (0..s.len()).filter(|&i| c.value_of(s.columns()[i]).is_none()).collect();
        let free_domains: Vec<usize> = free.iter().map(|&i| domains[i]).collect();
        let mut values: Vec<usize> = s.columns().iter().map(|&col| c.value_of(col).unwrap_or(0)).collect();
        for_each_tuple(&free_domains, |tuple| {
            for (&i, &v) in free.iter().zip(tuple) {
                values[i] = v;
            }
            constrained.insert(values.clone());
        });
    };
    for c in constraints.hard.iter().chain(&constraints.dont_care) {
        extend(c);
    }
    for c in constraints.soft.iter().filter(|c| c.len() == s.len()) {
        extend(c);
    }
    total - constrained.len() as u64
}

/// `r` times the largest number of unconstrained size-`t` credentials on a
/// single column set. Each of those must appear `r` times, so no
/// construction that makes them all appear can use fewer rows.
pub fn row_lower_bound(schema: &AttributeSchema, constraints: &ConstraintSet, r: u64, t: usize) -> Result<u64> {
    if r == 0 {
        return Err(Error::invalid("anonymity target r must be at least 1"));
    }
    let sets = constraints.column_sets(schema.len(), t)?;
    let widest = sets
        .iter()
        .map(|s| unconstrained_on(schema, constraints, s))
        .max()
        .unwrap_or(0);
    Ok(r.saturating_mul(widest))
}
