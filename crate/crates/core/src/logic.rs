//! Propositional Horn-clause problems and their forward/backward semantics.
//!
//! A [`Problem`] is a fact set, an ordered rule list and a query over a fixed
//! vocabulary of [`VOCAB_SIZE`] predicates. [`forward_chain`] computes the
//! least breadth-first fixpoint, assigning every derivable predicate the first
//! layer in which it appears (facts sit in layer 0). The logical depth of a
//! problem is the query's layer when the query is provable, and otherwise the
//! last layer in which anything new was derived.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of predicate symbols.
pub const VOCAB_SIZE: usize = 150;

/// Maximum number of premises in a rule.
pub const MAX_PREMISES: usize = 3;

/// A propositional symbol with id in `[0, VOCAB_SIZE)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Predicate(u8);

impl Predicate {
    pub fn new(id: u32) -> Result<Self> {
        if (id as usize) < VOCAB_SIZE {
            Ok(Predicate(id as u8))
        } else {
            Err(Error::PredicateOutOfRange(id))
        }
    }

    /// Builds a predicate from an index already known to be in range.
    pub(crate) fn from_index(id: usize) -> Self {
        debug_assert!(id < VOCAB_SIZE);
        Predicate(id as u8)
    }

    pub fn id(self) -> u32 {
        self.0 as u32
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<u32> for Predicate {
    type Error = Error;

    fn try_from(id: u32) -> Result<Self> {
        Predicate::new(id)
    }
}

impl From<Predicate> for u32 {
    fn from(p: Predicate) -> u32 {
        p.id()
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fixed-size bit set over the predicate vocabulary.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredSet([u64; 3]);

impl PredSet {
    pub const fn new() -> Self {
        PredSet([0; 3])
    }

    pub fn insert(&mut self, p: Predicate) -> bool {
        let (w, b) = (p.index() / 64, p.index() % 64);
        let fresh = self.0[w] & (1 << b) == 0;
        self.0[w] |= 1 << b;
        fresh
    }

    pub fn remove(&mut self, p: Predicate) -> bool {
        let (w, b) = (p.index() / 64, p.index() % 64);
        let present = self.0[w] & (1 << b) != 0;
        self.0[w] &= !(1 << b);
        present
    }

    pub fn contains(&self, p: Predicate) -> bool {
        self.0[p.index() / 64] & (1 << (p.index() % 64)) != 0
    }

    /// `true` when every member of `other` is in `self`.
    pub fn contains_all(&self, other: &PredSet) -> bool {
        (0..3).all(|i| other.0[i] & !self.0[i] == 0)
    }

    pub fn is_disjoint(&self, other: &PredSet) -> bool {
        (0..3).all(|i| other.0[i] & self.0[i] == 0)
    }

    pub fn union(&self, other: &PredSet) -> PredSet {
        PredSet([self.0[0] | other.0[0], self.0[1] | other.0[1], self.0[2] | other.0[2]])
    }

    pub fn difference(&self, other: &PredSet) -> PredSet {
        PredSet([self.0[0] & !other.0[0], self.0[1] & !other.0[1], self.0[2] & !other.0[2]])
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0 == [0; 3]
    }

    /// Members in increasing id order.
    pub fn iter(&self) -> impl Iterator<Item = Predicate> + '_ {
        (0..VOCAB_SIZE)
            .filter(move |&i| self.0[i / 64] & (1 << (i % 64)) != 0)
            .map(Predicate::from_index)
    }

    pub fn to_vec(&self) -> Vec<Predicate> {
        self.iter().collect()
    }
}

impl FromIterator<Predicate> for PredSet {
    fn from_iter<I: IntoIterator<Item = Predicate>>(iter: I) -> Self {
        let mut s = PredSet::new();
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl fmt::Debug for PredSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A definite clause `p1 ∧ … ∧ pk → c` with `1 ≤ k ≤ 3`.
///
/// Premise order is kept for serialization; identity ignores it.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RuleRepr", into = "RuleRepr")]
pub struct Rule {
    premises: Vec<Predicate>,
    premise_set: PredSet,
    conclusion: Predicate,
}

#[derive(Serialize, Deserialize)]
struct RuleRepr {
    premises: Vec<Predicate>,
    conclusion: Predicate,
}

impl TryFrom<RuleRepr> for Rule {
    type Error = Error;

    fn try_from(r: RuleRepr) -> Result<Self> {
        Rule::new(r.premises, r.conclusion)
    }
}

impl From<Rule> for RuleRepr {
    fn from(r: Rule) -> Self {
        RuleRepr {
            premises: r.premises,
            conclusion: r.conclusion,
        }
    }
}

impl Rule {
    pub fn new(premises: Vec<Predicate>, conclusion: Predicate) -> Result<Self> {
        if premises.is_empty() || premises.len() > MAX_PREMISES {
            return Err(Error::InvalidRule(format!(
                "{} premises (expected 1..={MAX_PREMISES})",
                premises.len()
            )));
        }
        let premise_set: PredSet = premises.iter().copied().collect();
        if premise_set.len() != premises.len() {
            return Err(Error::InvalidRule(format!("repeated premise in {premises:?}")));
        }
        if premise_set.contains(conclusion) {
            return Err(Error::InvalidRule(format!(
                "conclusion {conclusion} is also a premise"
            )));
        }
        Ok(Rule {
            premises,
            premise_set,
            conclusion,
        })
    }

    pub fn premises(&self) -> &[Predicate] {
        &self.premises
    }

    pub fn premise_set(&self) -> &PredSet {
        &self.premise_set
    }

    pub fn conclusion(&self) -> Predicate {
        self.conclusion
    }

    /// Identity under unordered premises.
    pub fn key(&self) -> (PredSet, Predicate) {
        (self.premise_set, self.conclusion)
    }

    pub(crate) fn premises_mut(&mut self) -> &mut Vec<Predicate> {
        &mut self.premises
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.premises.iter().enumerate() {
            if i > 0 {
                write!(f, "∧")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "→{}", self.conclusion)
    }
}

/// Provenance carried alongside a problem.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemMeta {
    #[serde(default)]
    pub generator: String,
    #[serde(default)]
    pub n_pred: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket: Option<String>,
}

/// Facts, rules and a query. Constructed only through [`Problem::new`], which
/// enforces distinct facts and no duplicate rules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ProblemRepr", into = "ProblemRepr")]
pub struct Problem {
    facts: Vec<Predicate>,
    rules: Vec<Rule>,
    query: Predicate,
    meta: ProblemMeta,
}

#[derive(Serialize, Deserialize)]
struct ProblemRepr {
    facts: Vec<Predicate>,
    rules: Vec<Rule>,
    query: Predicate,
    #[serde(default)]
    meta: ProblemMeta,
}

impl TryFrom<ProblemRepr> for Problem {
    type Error = Error;

    fn try_from(r: ProblemRepr) -> Result<Self> {
        Problem::new(r.facts, r.rules, r.query, r.meta)
    }
}

impl From<Problem> for ProblemRepr {
    fn from(p: Problem) -> Self {
        ProblemRepr {
            facts: p.facts,
            rules: p.rules,
            query: p.query,
            meta: p.meta,
        }
    }
}

impl Problem {
    pub fn new(
        facts: Vec<Predicate>,
        rules: Vec<Rule>,
        query: Predicate,
        meta: ProblemMeta,
    ) -> Result<Self> {
        let fact_set: PredSet = facts.iter().copied().collect();
        if fact_set.len() != facts.len() {
            return Err(Error::InvalidProblem("repeated fact".into()));
        }
        let mut seen = HashSet::with_capacity(rules.len());
        for r in &rules {
            if !seen.insert(r.key()) {
                return Err(Error::InvalidProblem(format!("duplicate rule {r:?}")));
            }
        }
        Ok(Problem {
            facts,
            rules,
            query,
            meta,
        })
    }

    /// Builds a problem from raw ids; convenient for fixtures.
    pub fn from_ids(facts: &[u32], rules: &[(&[u32], u32)], query: u32) -> Result<Self> {
        let facts = facts
            .iter()
            .map(|&f| Predicate::new(f))
            .collect::<Result<Vec<_>>>()?;
        let rules = rules
            .iter()
            .map(|(ps, c)| {
                let ps = ps.iter().map(|&p| Predicate::new(p)).collect::<Result<Vec<_>>>()?;
                Rule::new(ps, Predicate::new(*c)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Problem::new(facts, rules, Predicate::new(query)?, ProblemMeta::default())
    }

    pub fn facts(&self) -> &[Predicate] {
        &self.facts
    }

    pub fn fact_set(&self) -> PredSet {
        self.facts.iter().copied().collect()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn query(&self) -> Predicate {
        self.query
    }

    pub fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut ProblemMeta {
        &mut self.meta
    }

    /// Every predicate mentioned in facts, rules or the query.
    pub fn mentioned(&self) -> PredSet {
        let mut s = self.fact_set();
        for r in &self.rules {
            s = s.union(r.premise_set());
            s.insert(r.conclusion());
        }
        s.insert(self.query);
        s
    }

    pub fn with_query(&self, query: Predicate) -> Problem {
        Problem {
            query,
            ..self.clone()
        }
    }

    pub(crate) fn from_parts_unchecked(
        facts: Vec<Predicate>,
        rules: Vec<Rule>,
        query: Predicate,
        meta: ProblemMeta,
    ) -> Problem {
        debug_assert!(Problem::new(facts.clone(), rules.clone(), query, meta.clone()).is_ok());
        Problem {
            facts,
            rules,
            query,
            meta,
        }
    }
}

/// One newly derived predicate in a BFS layer, with the lowest-index rule
/// that derives it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rule: usize,
    pub derived: Predicate,
}

/// Forward-chaining layers. `layers[0]` holds layer 1 (facts are layer 0 and
/// are not listed); steps within a layer are ordered by predicate id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofTrace {
    pub layers: Vec<Vec<TraceStep>>,
}

impl ProofTrace {
    /// Derived predicates in BFS order.
    pub fn derived(&self) -> impl Iterator<Item = Predicate> + '_ {
        self.layers.iter().flatten().map(|s| s.derived)
    }
}

const UNDERIVED: u8 = u8::MAX;

/// Outcome of [`forward_chain`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationResult {
    depth: [u8; VOCAB_SIZE],
    derived: PredSet,
    pub provable: bool,
    pub delta: u32,
    pub trace: ProofTrace,
}

impl DerivationResult {
    /// Layer at which `p` is first derived.
    pub fn depth(&self, p: Predicate) -> Option<u32> {
        match self.depth[p.index()] {
            UNDERIVED => None,
            d => Some(d as u32),
        }
    }

    pub fn derived(&self) -> &PredSet {
        &self.derived
    }

    pub fn derived_depth(&self) -> BTreeMap<Predicate, u32> {
        self.derived.iter().map(|p| (p, self.depth[p.index()] as u32)).collect()
    }

    /// Deepest layer reached before the fixpoint.
    pub fn max_depth(&self) -> u32 {
        self.trace.layers.len() as u32
    }
}

/// Least-layer BFS fixpoint from `facts` under `rules`.
///
/// Layer `k + 1` derives the conclusion of every rule whose premises all have
/// depth `≤ k` and whose conclusion is not yet derived.
pub fn saturate(facts: &PredSet, rules: &[Rule], with_trace: bool) -> (PredSet, [u8; VOCAB_SIZE], Vec<Vec<TraceStep>>) {
    let mut depth = [UNDERIVED; VOCAB_SIZE];
    for f in facts.iter() {
        depth[f.index()] = 0;
    }
    let mut known = *facts;
    let mut pending: Vec<usize> = (0..rules.len())
        .filter(|&i| !known.contains(rules[i].conclusion()))
        .collect();
    let mut layers = Vec::new();
    let mut layer = 0u8;
    loop {
        let mut fresh = PredSet::new();
        let mut steps = Vec::new();
        for &i in &pending {
            let r = &rules[i];
            if known.contains_all(r.premise_set()) && fresh.insert(r.conclusion()) && with_trace {
                steps.push(TraceStep {
                    rule: i,
                    derived: r.conclusion(),
                });
            }
        }
        if fresh.is_empty() {
            break;
        }
        layer += 1;
        for p in fresh.iter() {
            depth[p.index()] = layer;
        }
        known = known.union(&fresh);
        pending.retain(|&i| !known.contains(rules[i].conclusion()));
        if with_trace {
            steps.sort_by_key(|s| s.derived);
        }
        layers.push(steps);
    }
    (known, depth, layers)
}

/// Forward-chain `problem` to its fixpoint.
pub fn forward_chain(problem: &Problem) -> DerivationResult {
    let (derived, depth, layers) = saturate(&problem.fact_set(), problem.rules(), true);
    let provable = derived.contains(problem.query());
    let delta = if provable {
        depth[problem.query().index()] as u32
    } else {
        layers.len() as u32
    };
    DerivationResult {
        depth,
        derived,
        provable,
        delta,
        trace: ProofTrace { layers },
    }
}

/// Predicates derivable from `facts` (no depth bookkeeping).
pub fn reachable_closure(facts: &PredSet, rules: &[Rule]) -> PredSet {
    let mut known = *facts;
    loop {
        let mut changed = false;
        for r in rules {
            if !known.contains(r.conclusion()) && known.contains_all(r.premise_set()) {
                known.insert(r.conclusion());
                changed = true;
            }
        }
        if !changed {
            return known;
        }
    }
}

/// Depth of the backward-chaining search from the query.
///
/// For a provable query this is the smallest `k` for which a depth-bounded
/// backward search succeeds, which coincides with the forward depth. For an
/// unprovable query it is the deepest goal reached by a breadth-first backward
/// expansion (each goal visited once, facts not expanded).
pub fn backward_dfs_depth(problem: &Problem) -> u32 {
    let facts = problem.fact_set();
    let q = problem.query();
    if facts.contains(q) {
        return 0;
    }
    let mut by_conclusion: Vec<Vec<&Rule>> = vec![Vec::new(); VOCAB_SIZE];
    for r in problem.rules() {
        by_conclusion[r.conclusion().index()].push(r);
    }
    let bound = problem.mentioned().len();
    let mut memo = BoundedMemo::new(bound);
    for k in 1..=bound {
        if proves_within(q, k, &facts, &by_conclusion, &mut memo) {
            return k as u32;
        }
    }

    let mut dist = [u32::MAX; VOCAB_SIZE];
    dist[q.index()] = 0;
    let mut queue = VecDeque::from([q]);
    let mut deepest = 0;
    while let Some(g) = queue.pop_front() {
        deepest = deepest.max(dist[g.index()]);
        if facts.contains(g) {
            continue;
        }
        for r in &by_conclusion[g.index()] {
            for &p in r.premises() {
                if dist[p.index()] == u32::MAX {
                    dist[p.index()] = dist[g.index()] + 1;
                    queue.push_back(p);
                }
            }
        }
    }
    deepest
}

struct BoundedMemo {
    bound: usize,
    cells: Vec<Option<bool>>,
}

impl BoundedMemo {
    fn new(bound: usize) -> Self {
        BoundedMemo {
            bound,
            cells: vec![None; VOCAB_SIZE * (bound + 1)],
        }
    }

    fn slot(&mut self, g: Predicate, k: usize) -> &mut Option<bool> {
        &mut self.cells[k.min(self.bound) * VOCAB_SIZE + g.index()]
    }
}

fn proves_within(
    goal: Predicate,
    k: usize,
    facts: &PredSet,
    by_conclusion: &[Vec<&Rule>],
    memo: &mut BoundedMemo,
) -> bool {
    if facts.contains(goal) {
        return true;
    }
    if k == 0 {
        return false;
    }
    if let Some(v) = *memo.slot(goal, k) {
        return v;
    }
    let found = by_conclusion[goal.index()].iter().any(|r| {
        r.premises()
            .iter()
            .all(|&p| proves_within(p, k - 1, facts, by_conclusion, memo))
    });
    *memo.slot(goal, k) = Some(found);
    found
}
