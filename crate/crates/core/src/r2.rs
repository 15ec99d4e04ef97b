//! Counterfactual augmentation.
//!
//! Each strategy turns a problem into a minimally different twin with the
//! opposite solver label while keeping its surface statistics (rule and fact
//! counts, query occurrences) as close as possible:
//!
//! * [`prune_and_add`]: drop one rule whose removal breaks the proof and add
//!   a distractor that concludes the query from premises composed along an
//!   existing chain into the query, chosen so the proof is not restored.
//! * [`query_alteration`]: retarget the query to an unprovable predicate.
//! * [`greedy_iterative`]: repeatedly remove the proof-supporting rule or
//!   fact that leaves the deepest remaining derivation, each removal usually
//!   paired with an inert balancing rule or fact, until the query fails.
//! * [`add_and_prune`]: add a rule proving the query from derived premises,
//!   then drop an existing rule that also concludes the query.
//!
//! [`r2_augment`] dispatches on label and dataset kind.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{reachable_closure, saturate, PredSet, Predicate, Problem, Rule, VOCAB_SIZE};
use crate::rng::HfRng;

/// Removal iterations allowed in [`greedy_iterative`].
pub const GREEDY_MAX_ITERATIONS: u32 = 100;
/// Probability of adding a balancing rule after a rule removal.
pub const BALANCE_RULE_PROB: f64 = 0.8;
/// Probability of adding a balancing fact after a fact removal.
pub const BALANCE_FACT_PROB: f64 = 0.9;
/// Longest rule chain composed into a distractor.
pub const DISTRACTOR_CHAIN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    PruneAndAdd,
    QueryAlteration,
    GreedyIterative,
    AddAndPrune,
    Unaltered,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::PruneAndAdd => "prune_and_add",
            Strategy::QueryAlteration => "query_alteration",
            Strategy::GreedyIterative => "greedy_iterative",
            Strategy::AddAndPrune => "add_and_prune",
            Strategy::Unaltered => "unaltered",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Lp,
    Rp,
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lp" | "lpstar" => Ok(DatasetKind::Lp),
            "rp" => Ok(DatasetKind::Rp),
            other => Err(Error::InvalidParams(format!("unknown dataset kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct R2Result {
    pub counterfactual: Problem,
    pub strategy: Strategy,
    pub flipped: bool,
    /// Removal steps taken by the greedy strategy (0 otherwise).
    pub iterations: u32,
}

impl R2Result {
    fn flipped(counterfactual: Problem, strategy: Strategy) -> Self {
        R2Result {
            counterfactual,
            strategy,
            flipped: true,
            iterations: 0,
        }
    }

    fn unaltered(problem: &Problem) -> Self {
        R2Result {
            counterfactual: problem.clone(),
            strategy: Strategy::Unaltered,
            flipped: false,
            iterations: 0,
        }
    }
}

fn provable(facts: &PredSet, rules: &[Rule], q: Predicate) -> bool {
    reachable_closure(facts, rules).contains(q)
}

fn require(problem: &Problem, want_provable: bool) -> Result<()> {
    if provable(&problem.fact_set(), problem.rules(), problem.query()) == want_provable {
        Ok(())
    } else {
        Err(Error::InvalidProblem(format!(
            "strategy expects a {} query",
            if want_provable { "provable" } else { "unprovable" }
        )))
    }
}

fn rebuild(problem: &Problem, facts: Vec<Predicate>, rules: Vec<Rule>) -> Result<Problem> {
    Problem::new(facts, rules, problem.query(), problem.meta().clone())
}

/// Premise sets of rules within `DISTRACTOR_CHAIN` steps upstream of `q`.
fn chain_premise_sets(rules: &[Rule], q: Predicate) -> Vec<Vec<Predicate>> {
    let mut frontier = PredSet::new();
    frontier.insert(q);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..DISTRACTOR_CHAIN {
        let mut next = PredSet::new();
        for r in rules {
            if frontier.contains(r.conclusion()) && seen.insert(*r.premise_set()) {
                out.push(r.premises().to_vec());
                next = next.union(r.premise_set());
            }
        }
        frontier = next;
    }
    out
}

/// Removes a proof-critical rule and adds a query-concluding distractor.
///
/// Returns `Ok(None)` when no single removal breaks the proof or no
/// distractor can be placed without restoring it.
pub fn prune_and_add(problem: &Problem, rng: &mut HfRng) -> Result<Option<R2Result>> {
    require(problem, true)?;
    let q = problem.query();
    let facts = problem.fact_set();
    if facts.contains(q) {
        return Ok(None);
    }
    let rules = problem.rules();
    let mut order: Vec<usize> = (0..rules.len()).collect();
    order.shuffle(rng);
    // Prefer pruning a rule that concludes the query so its conclusion count is kept.
    order.sort_by_key(|&i| rules[i].conclusion() != q);

    let chains = chain_premise_sets(rules, q);
    for i in order {
        let mut pruned = rules.to_vec();
        let removed = pruned.remove(i);
        let closure = reachable_closure(&facts, &pruned);
        if closure.contains(q) {
            continue;
        }
        let existing: HashSet<_> = pruned.iter().map(Rule::key).collect();
        let admissible = |ps: &Vec<Predicate>| {
            let set: PredSet = ps.iter().copied().collect();
            !set.contains(q) && !closure.contains_all(&set) && !existing.contains(&(set, q))
        };
        let mut candidates: Vec<&Vec<Predicate>> = chains.iter().filter(|ps| admissible(ps)).collect();
        let fallback: Vec<Vec<Predicate>>;
        if candidates.is_empty() {
            fallback = pruned.iter().map(|r| r.premises().to_vec()).collect();
            candidates = fallback.iter().filter(|ps| admissible(ps)).collect();
        }
        let distractor = match candidates.choose(rng) {
            Some(premises) => Rule::new((*premises).clone(), q)?,
            None => match blocked_variant(&removed, &closure, &problem.mentioned(), &existing, q, rng) {
                Some(rule) => rule,
                None => continue,
            },
        };
        debug_assert_ne!(distractor.key(), removed.key());
        pruned.insert(i, distractor);
        let cf = rebuild(problem, problem.facts().to_vec(), pruned)?;
        return Ok(Some(R2Result::flipped(cf, Strategy::PruneAndAdd)));
    }
    Ok(None)
}

/// A predicate absent from the problem, hence unprovable.
fn fresh_predicate(mentioned: &PredSet, rng: &mut HfRng) -> Option<Predicate> {
    let unused: Vec<Predicate> = (0..VOCAB_SIZE as u32)
        .filter_map(|id| Predicate::new(id).ok())
        .filter(|&p| !mentioned.contains(p))
        .collect();
    unused.choose(rng).copied()
}

/// Unprovable predicates usable as rule-blocking premises: mentioned ones
/// outside `exclude` first, else one fresh predicate.
fn blockers(mentioned: &PredSet, derived: &PredSet, exclude: &PredSet, rng: &mut HfRng) -> Vec<Predicate> {
    let found = mentioned.difference(derived).difference(exclude).to_vec();
    if found.is_empty() {
        fresh_predicate(mentioned, rng).into_iter().collect()
    } else {
        found
    }
}

/// `removed` with one premise swapped for an unprovable predicate.
fn blocked_variant(
    removed: &Rule,
    closure: &PredSet,
    mentioned: &PredSet,
    existing: &HashSet<(PredSet, Predicate)>,
    q: Predicate,
    rng: &mut HfRng,
) -> Option<Rule> {
    let mut exclude = *removed.premise_set();
    exclude.insert(q);
    let pool = blockers(mentioned, closure, &exclude, rng);
    for _ in 0..8 {
        let mut premises = removed.premises().to_vec();
        let slot = rng.random_range(0..premises.len());
        premises[slot] = *pool.choose(rng)?;
        if let Ok(rule) = Rule::new(premises, q) {
            if !existing.contains(&rule.key()) {
                return Some(rule);
            }
        }
    }
    None
}

/// Moves the query to a mentioned predicate that is not provable.
pub fn query_alteration(problem: &Problem, rng: &mut HfRng) -> Result<Option<R2Result>> {
    require(problem, true)?;
    let closure = reachable_closure(&problem.fact_set(), problem.rules());
    let options = problem.mentioned().difference(&closure).to_vec();
    Ok(options
        .choose(rng)
        .map(|&q| R2Result::flipped(problem.with_query(q), Strategy::QueryAlteration)))
}

/// Predicates from which `q` is reachable through `rules` (including `q`).
fn ancestors(rules: &[Rule], q: Predicate, only: Option<&PredSet>) -> PredSet {
    let mut anc = PredSet::new();
    anc.insert(q);
    loop {
        let mut grew = false;
        for r in rules {
            if only.is_some_and(|d| !d.contains_all(r.premise_set())) {
                continue;
            }
            if anc.contains(r.conclusion()) && !anc.contains_all(r.premise_set()) {
                anc = anc.union(r.premise_set());
                grew = true;
            }
        }
        if !grew {
            return anc;
        }
    }
}

#[derive(Clone, Copy)]
enum Removal {
    Rule(usize),
    Fact(usize),
}

struct Snapshot {
    derived: PredSet,
    depth: [u8; VOCAB_SIZE],
    max_depth: usize,
}

fn snapshot(facts: &[Predicate], rules: &[Rule]) -> Snapshot {
    let (derived, depth, layers) = saturate(&facts.iter().copied().collect(), rules, false);
    Snapshot {
        derived,
        depth,
        max_depth: layers.len(),
    }
}

/// Rules and facts of the recorded BFS proof of `q`.
fn proof_elements(facts: &[Predicate], rules: &[Rule], q: Predicate) -> Vec<Removal> {
    let (_, _, layers) = saturate(&facts.iter().copied().collect(), rules, true);
    let mut by_pred = [usize::MAX; VOCAB_SIZE];
    for step in layers.iter().flatten() {
        by_pred[step.derived.index()] = step.rule;
    }
    let mut out = Vec::new();
    let mut seen = PredSet::new();
    let mut stack = vec![q];
    while let Some(p) = stack.pop() {
        if !seen.insert(p) {
            continue;
        }
        if let Some(i) = facts.iter().position(|&f| f == p) {
            out.push(Removal::Fact(i));
        } else if by_pred[p.index()] != usize::MAX {
            let i = by_pred[p.index()];
            out.push(Removal::Rule(i));
            stack.extend(rules[i].premises());
        }
    }
    out
}

/// Greedy removal loop for entangled problems.
///
/// Each iteration removes the element of the current proof of the query whose
/// removal leaves the deepest forward derivation. Balancing additions never
/// join a proof of the query, so the set of proof-supporting elements
/// strictly shrinks.
pub fn greedy_iterative(problem: &Problem, rng: &mut HfRng) -> Result<Option<R2Result>> {
    require(problem, true)?;
    let q = problem.query();
    let mut facts = problem.facts().to_vec();
    let mut rules = problem.rules().to_vec();

    for iteration in 0..=GREEDY_MAX_ITERATIONS {
        let snap = snapshot(&facts, &rules);
        if !snap.derived.contains(q) {
            let cf = rebuild(problem, facts, rules)?;
            return Ok(Some(R2Result {
                counterfactual: cf,
                strategy: Strategy::GreedyIterative,
                flipped: true,
                iterations: iteration,
            }));
        }
        if iteration == GREEDY_MAX_ITERATIONS {
            break;
        }
        let mut best = Vec::new();
        let mut best_depth = 0;
        for c in proof_elements(&facts, &rules, q) {
            let depth = match c {
                Removal::Rule(i) => {
                    let mut rs = rules.clone();
                    rs.remove(i);
                    snapshot(&facts, &rs).max_depth
                }
                Removal::Fact(i) => {
                    let mut fs = facts.clone();
                    fs.remove(i);
                    snapshot(&fs, &rules).max_depth
                }
            };
            if best.is_empty() || depth > best_depth {
                best.clear();
                best_depth = depth;
            }
            if depth == best_depth {
                best.push(c);
            }
        }
        let Some(&choice) = best.choose(rng) else {
            break;
        };
        let mentioned = mentioned_by(&facts, &rules, q);
        match choice {
            Removal::Rule(i) => {
                let removed = rules.remove(i);
                if rng.random_bool(BALANCE_RULE_PROB) {
                    let after = snapshot(&facts, &rules);
                    if let Some(b) = balancing_rule(&removed, &rules, &after, &mentioned, q, rng) {
                        rules.insert(i, b);
                    }
                }
            }
            Removal::Fact(i) => {
                let removed = facts.remove(i);
                if rng.random_bool(BALANCE_FACT_PROB) {
                    if let Some(f) = balancing_fact(removed, &facts, &rules, &mentioned, q, rng) {
                        facts.insert(i, f);
                    }
                }
            }
        }
    }
    Ok(None)
}

fn mentioned_by(facts: &[Predicate], rules: &[Rule], q: Predicate) -> PredSet {
    let mut m: PredSet = facts.iter().copied().collect();
    m.insert(q);
    for r in rules {
        m = m.union(r.premise_set());
        m.insert(r.conclusion());
    }
    m
}

/// Derived predicates ordered deepest first, shuffled within each depth.
fn deepest_first(snap: &Snapshot, exclude: &PredSet, rng: &mut HfRng) -> Vec<Predicate> {
    let mut pool: Vec<Predicate> = snap.derived.difference(exclude).to_vec();
    pool.shuffle(rng);
    pool.sort_by_key(|p| std::cmp::Reverse(snap.depth[p.index()]));
    pool
}

/// A rule with the removed rule's conclusion and arity whose premises are
/// disjoint from the removed ones: the deepest derived predicates plus one
/// underivable predicate, so it never fires.
fn balancing_rule(
    removed: &Rule,
    rules: &[Rule],
    snap: &Snapshot,
    mentioned: &PredSet,
    q: Predicate,
    rng: &mut HfRng,
) -> Option<Rule> {
    let c = removed.conclusion();
    let mut exclude = *removed.premise_set();
    exclude.insert(c);
    exclude.insert(q);
    let blockers = blockers(mentioned, &snap.derived, &exclude, rng);
    let existing: HashSet<_> = rules.iter().map(Rule::key).collect();
    let k = removed.premises().len();
    for _ in 0..8 {
        let blocker = *blockers.choose(rng)?;
        let mut premises = vec![blocker];
        premises.extend(deepest_first(snap, &exclude, rng).into_iter().take(k - 1));
        if premises.len() < k {
            let extra: Vec<Predicate> = blockers.iter().copied().filter(|&b| b != blocker).collect();
            premises.extend(extra.choose_multiple(rng, k - premises.len()).copied());
        }
        premises.shuffle(rng);
        let Ok(rule) = Rule::new(premises, c) else { continue };
        if !existing.contains(&rule.key()) {
            return Some(rule);
        }
    }
    None
}

/// A new fact that cannot join a proof of the query, chosen to maximize the
/// remaining forward depth: an already derived predicate outside the query's
/// current derivation ancestry, an underived one from which the query is
/// unreachable, or failing both a predicate new to the problem.
fn balancing_fact(
    removed: Predicate,
    facts: &[Predicate],
    rules: &[Rule],
    mentioned: &PredSet,
    q: Predicate,
    rng: &mut HfRng,
) -> Option<Predicate> {
    let snap = snapshot(facts, rules);
    let live = ancestors(rules, q, Some(&snap.derived));
    let full = ancestors(rules, q, None);
    let current: PredSet = facts.iter().copied().collect();
    let derived_ok = snap.derived.difference(&live);
    let underived_ok = mentioned.difference(&snap.derived).difference(&full);
    let mut best = Vec::new();
    let mut best_depth = 0;
    for p in derived_ok.union(&underived_ok).difference(&current).iter() {
        if p == removed || p == q {
            continue;
        }
        let mut fs = facts.to_vec();
        fs.push(p);
        let depth = snapshot(&fs, rules).max_depth;
        if best.is_empty() || depth > best_depth {
            best.clear();
            best_depth = depth;
        }
        if depth == best_depth {
            best.push(p);
        }
    }
    match best.choose(rng) {
        Some(&p) => Some(p),
        None => fresh_predicate(&mentioned.union(&current), rng),
    }
}

/// Adds a rule proving the query and drops one existing query-concluding rule.
///
/// For RP the new rule's premises are the deepest derived predicates, so the
/// query lands one layer past `delta`; for LP any derived predicates serve.
pub fn add_and_prune(problem: &Problem, delta: u32, kind: DatasetKind, rng: &mut HfRng) -> Result<Option<R2Result>> {
    require(problem, false)?;
    let q = problem.query();
    let snap = snapshot(problem.facts(), problem.rules());
    if snap.derived.is_empty() {
        return Ok(None);
    }
    let rules = problem.rules();
    let concluding: Vec<usize> = (0..rules.len()).filter(|&i| rules[i].conclusion() == q).collect();
    let prune = concluding.choose(rng).copied();
    let k = match prune {
        Some(i) => rules[i].premises().len(),
        None => rules.choose(rng).map_or(1, |r| r.premises().len()),
    }
    .min(snap.derived.len());

    let premises: Vec<Predicate> = match kind {
        DatasetKind::Rp => {
            let pool = deepest_first(&snap, &PredSet::new(), rng);
            let target = delta.min(snap.max_depth as u32) as u8;
            let start = pool.iter().position(|p| snap.depth[p.index()] <= target).unwrap_or(0);
            let mut ps: Vec<Predicate> = pool[start..].iter().take(k).copied().collect();
            if ps.len() < k {
                ps.extend(pool[..start].iter().rev().take(k - ps.len()));
            }
            ps
        }
        DatasetKind::Lp => snap.derived.to_vec().choose_multiple(rng, k).copied().collect(),
    };
    let mut premises = premises;
    premises.shuffle(rng);
    let added = Rule::new(premises, q)?;
    let mut new_rules = rules.to_vec();
    if new_rules.iter().any(|r| r.key() == added.key()) {
        return Ok(None);
    }
    match prune {
        Some(i) => new_rules[i] = added,
        None => {
            let at = rng.random_range(0..=new_rules.len());
            new_rules.insert(at, added);
        }
    }
    let cf = rebuild(problem, problem.facts().to_vec(), new_rules)?;
    debug_assert!(provable(&cf.fact_set(), cf.rules(), q));
    Ok(Some(R2Result::flipped(cf, Strategy::AddAndPrune)))
}

/// Builds the opposite-label twin of `problem`.
///
/// `label` must equal the solver's verdict. When every applicable strategy
/// fails the original problem is returned unaltered with `flipped = false`.
pub fn r2_augment(problem: &Problem, label: bool, kind: DatasetKind, rng: &mut HfRng) -> Result<R2Result> {
    let (derived, _, layers) = saturate(&problem.fact_set(), problem.rules(), false);
    if derived.contains(problem.query()) != label {
        return Err(Error::InvalidProblem("label disagrees with solver".into()));
    }
    let attempt = if label {
        match kind {
            DatasetKind::Lp => match prune_and_add(problem, rng)? {
                Some(r) => Some(r),
                None => query_alteration(problem, rng)?,
            },
            DatasetKind::Rp => greedy_iterative(problem, rng)?,
        }
    } else {
        add_and_prune(problem, layers.len() as u32, kind, rng)?
    };
    Ok(attempt.unwrap_or_else(|| R2Result::unaltered(problem)))
}
