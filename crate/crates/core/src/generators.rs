//! Problem samplers and depth/label balancing.
//!
//! Three samplers are provided:
//!
//! * **RP** (rule priority): random rules over a random predicate subset.
//! * **LP** (label priority): predicates are split into ordered levels with
//!   planted truth labels; a backbone of label-consistent rules connects
//!   consecutive levels and is then hidden among sound distractor rules.
//! * **LP\***: LP with false-conclusion backbone rules drawn from mixed-label
//!   premises and distractors that close cycles onto true predicates.
//!
//! [`balance_dataset`] rejection-samples a generator until every
//! `(depth, label)` cell holds the requested number of problems.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode;
use crate::error::{Error, Result};
use crate::logic::{forward_chain, PredSet, Predicate, Problem, ProblemMeta, Rule, VOCAB_SIZE};
use crate::rng::{self, HfRng};

/// Attempts allowed for drawing one non-duplicate rule.
pub const RULE_ATTEMPTS: usize = 10_000;

/// Candidate problems allowed per open bucket cell since its last fill.
pub const DEFAULT_ATTEMPT_BUDGET: u64 = 10_000_000;

const CHUNK_SIZE: usize = 2048;
const CHUNKS_PER_ROUND: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Rp,
    Lp,
    LpStar,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Rp => "rp",
            GeneratorKind::Lp => "lp",
            GeneratorKind::LpStar => "lpstar",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rp" => Ok(GeneratorKind::Rp),
            "lp" => Ok(GeneratorKind::Lp),
            "lpstar" | "lp*" => Ok(GeneratorKind::LpStar),
            other => Err(Error::InvalidParams(format!("unknown generator {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenParams {
    pub generator: GeneratorKind,
    pub n_pred_min: u32,
    pub n_pred_max: u32,
    pub premise_min: u32,
    pub premise_max: u32,
    pub max_tokens: usize,
    pub seed: u64,
}

impl GenParams {
    /// Training-distribution defaults: 5..=30 predicates, 1..=3 premises.
    pub fn new(generator: GeneratorKind, seed: u64) -> Self {
        GenParams {
            generator,
            n_pred_min: 5,
            n_pred_max: 30,
            premise_min: 1,
            premise_max: 3,
            max_tokens: encode::MAX_TOKENS,
            seed,
        }
    }

    pub fn with_n_pred(mut self, min: u32, max: u32) -> Self {
        self.n_pred_min = min;
        self.n_pred_max = max;
        self
    }

    pub fn with_premises(mut self, min: u32, max: u32) -> Self {
        self.premise_min = min;
        self.premise_max = max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(1 <= self.premise_min && self.premise_min <= self.premise_max && self.premise_max <= 3) {
            return bad(format!("premises {}..{} outside 1..=3", self.premise_min, self.premise_max));
        }
        if self.n_pred_min < self.premise_max + 1 {
            return bad(format!("n_pred_min {} < premise_max + 1", self.n_pred_min));
        }
        if self.n_pred_min > self.n_pred_max {
            return bad(format!("n_pred {}..{} is empty", self.n_pred_min, self.n_pred_max));
        }
        if self.n_pred_max as usize > VOCAB_SIZE {
            return bad(format!("n_pred_max {} exceeds vocabulary", self.n_pred_max));
        }
        Ok(())
    }

    fn meta(&self, n_pred: usize) -> ProblemMeta {
        ProblemMeta {
            generator: self.generator.name().to_string(),
            n_pred: n_pred as u32,
            seed: self.seed,
            bucket: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketSpec {
    pub max_delta: u32,
    pub count_per_bucket: usize,
    pub attempt_budget: u64,
}

impl BucketSpec {
    pub fn new(max_delta: u32, count_per_bucket: usize) -> Self {
        BucketSpec {
            max_delta,
            count_per_bucket,
            attempt_budget: DEFAULT_ATTEMPT_BUDGET,
        }
    }

    fn cells(&self) -> usize {
        2 * (self.max_delta as usize + 1)
    }

    fn cell(&self, delta: u32, label: bool) -> Option<usize> {
        (delta <= self.max_delta).then(|| 2 * delta as usize + label as usize)
    }
}

/// A problem with its solver label and logical depth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledProblem {
    pub problem: Problem,
    #[serde(with = "label01")]
    pub label: bool,
    pub delta: u32,
    #[serde(default)]
    pub bucket: String,
}

impl LabeledProblem {
    /// Labels `problem` with the solver.
    pub fn solve(problem: Problem) -> Self {
        let res = forward_chain(&problem);
        LabeledProblem {
            bucket: bucket_tag(res.delta, res.provable),
            problem,
            label: res.provable,
            delta: res.delta,
        }
    }
}

pub fn bucket_tag(delta: u32, label: bool) -> String {
    format!("d{delta}-l{}", label as u8)
}

/// Serializes a boolean label as 0/1.
pub mod label01 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(serde::de::Error::custom(format!("label must be 0 or 1, got {v}"))),
        }
    }
}

fn sample_predicates(rng: &mut HfRng, n: usize) -> Vec<Predicate> {
    rand::seq::index::sample(rng, VOCAB_SIZE, n)
        .into_iter()
        .map(Predicate::from_index)
        .collect()
}

fn premise_count(params: &GenParams, rng: &mut HfRng) -> usize {
    rng.random_range(params.premise_min..=params.premise_max) as usize
}

/// Draws rules from `draw` until one is not already in `seen`.
fn draw_unique(
    seen: &mut HashSet<(PredSet, Predicate)>,
    rng: &mut HfRng,
    mut draw: impl FnMut(&mut HfRng) -> Option<Rule>,
) -> Result<Rule> {
    for _ in 0..RULE_ATTEMPTS {
        if let Some(rule) = draw(rng) {
            if seen.insert(rule.key()) {
                return Ok(rule);
            }
        }
    }
    Err(Error::Generation(format!(
        "no admissible rule after {RULE_ATTEMPTS} attempts"
    )))
}

fn finish(
    mut facts: Vec<Predicate>,
    mut rules: Vec<Rule>,
    query: Predicate,
    meta: ProblemMeta,
    rng: &mut HfRng,
) -> Problem {
    for r in &mut rules {
        r.premises_mut().shuffle(rng);
    }
    rules.shuffle(rng);
    facts.shuffle(rng);
    Problem::from_parts_unchecked(facts, rules, query, meta)
}

/// Rule-priority sampler.
pub fn gen_rp(params: &GenParams, rng: &mut HfRng) -> Result<Problem> {
    params.validate()?;
    let n = rng.random_range(params.n_pred_min..=params.n_pred_max) as usize;
    let preds = sample_predicates(rng, n);
    let n_rules = rng.random_range(0..=4 * n);
    let n_facts = rng.random_range(0..=n);

    let mut seen = HashSet::with_capacity(n_rules);
    let mut rules = Vec::with_capacity(n_rules);
    for _ in 0..n_rules {
        let rule = draw_unique(&mut seen, rng, |rng| {
            let k = premise_count(params, rng);
            let mut picked: Vec<Predicate> = preds.choose_multiple(rng, k + 1).copied().collect();
            let conclusion = picked.pop()?;
            Rule::new(picked, conclusion).ok()
        });
        // Tiny predicate sets can run out of distinct rules.
        let Ok(rule) = rule else { break };
        rules.push(rule);
    }
    let facts: Vec<Predicate> = preds.choose_multiple(rng, n_facts).copied().collect();
    let query = *preds.choose(rng).expect("n_pred >= 2");
    Ok(finish(facts, rules, query, params.meta(n), rng))
}

/// Planted level structure shared by LP and LP*.
struct Levels {
    levels: Vec<Vec<Predicate>>,
    truth: PredSet,
}

impl Levels {
    fn sample(n: usize, preds: &[Predicate], rng: &mut HfRng) -> Levels {
        let depth = rng.random_range(1..=n / 2);
        let base = n / depth;
        let extra = n % depth;
        let mut levels = Vec::with_capacity(depth);
        let mut next = 0;
        for l in 0..depth {
            let size = base + usize::from(l >= 1 && l <= extra);
            levels.push(preds[next..next + size].to_vec());
            next += size;
        }
        debug_assert_eq!(next, n);
        let mut truth = PredSet::new();
        for level in &levels {
            for (i, &p) in level.iter().enumerate() {
                let label = match i {
                    0 => true,
                    1 => false,
                    _ => rng.random_bool(0.5),
                };
                if label {
                    truth.insert(p);
                }
            }
        }
        Levels { levels, truth }
    }

    fn depth(&self) -> usize {
        self.levels.len()
    }

    fn is_true(&self, p: Predicate) -> bool {
        self.truth.contains(p)
    }

    fn facts(&self) -> Vec<Predicate> {
        self.levels[0].iter().copied().filter(|&p| self.is_true(p)).collect()
    }
}

fn gen_label_priority(params: &GenParams, rng: &mut HfRng, star: bool) -> Result<(Problem, PredSet)> {
    params.validate()?;
    let n = rng.random_range(params.n_pred_min..=params.n_pred_max) as usize;
    let preds = sample_predicates(rng, n);
    let lv = Levels::sample(n, &preds, rng);
    let mut seen = HashSet::new();
    let mut rules = Vec::new();

    for l in 0..lv.depth() - 1 {
        for &conclusion in &lv.levels[l + 1] {
            let label = lv.is_true(conclusion);
            let pool: Vec<Predicate> = lv.levels[l]
                .iter()
                .copied()
                .filter(|&p| (star && !label) || lv.is_true(p) == label)
                .collect();
            let rule = draw_unique(&mut seen, rng, |rng| {
                let k = premise_count(params, rng).min(pool.len());
                let premises: Vec<Predicate> = pool.choose_multiple(rng, k).copied().collect();
                if !label && premises.iter().all(|&p| lv.is_true(p)) {
                    return None;
                }
                Rule::new(premises, conclusion).ok()
            })?;
            rules.push(rule);
        }
    }

    if !star {
        let n_noise = rng.random_range(0..=3 * n);
        for _ in 0..n_noise {
            let rule = draw_unique(&mut seen, rng, |rng| {
                let k = premise_count(params, rng);
                let mut picked: Vec<Predicate> = preds.choose_multiple(rng, k + 1).copied().collect();
                let conclusion = picked.pop()?;
                if !lv.is_true(conclusion) && picked.iter().all(|&p| lv.is_true(p)) {
                    return None;
                }
                Rule::new(picked, conclusion).ok()
            });
            // Tiny predicate sets can run out of admissible distinct rules.
            let Ok(rule) = rule else { break };
            rules.push(rule);
        }
    } else if lv.depth() > 1 {
        let d = lv.depth();
        let n_noise = rng.random_range(0..=3 * n);
        for _ in 0..n_noise {
            let rule = draw_unique(&mut seen, rng, |rng| {
                let l = rng.random_range(0..=d - 2);
                let trues: Vec<Predicate> =
                    lv.levels[l].iter().copied().filter(|&p| lv.is_true(p)).collect();
                let conclusion = *trues.choose(rng)?;
                let pool: Vec<Predicate> = lv.levels[l..]
                    .iter()
                    .flatten()
                    .copied()
                    .filter(|&p| p != conclusion)
                    .collect();
                let k = premise_count(params, rng).min(pool.len());
                let premises = pool.choose_multiple(rng, k).copied().collect();
                Rule::new(premises, conclusion).ok()
            });
            let Ok(rule) = rule else { break };
            rules.push(rule);
        }
    }

    let facts = lv.facts();
    let query = *preds.choose(rng).expect("n_pred >= 2");
    Ok((finish(facts, rules, query, params.meta(n), rng), lv.truth))
}

/// Label-priority sampler.
pub fn gen_lp(params: &GenParams, rng: &mut HfRng) -> Result<Problem> {
    gen_label_priority(params, rng, false).map(|(p, _)| p)
}

/// LP with mixed-label false backbones and cycle-closing distractors.
pub fn gen_lp_star(params: &GenParams, rng: &mut HfRng) -> Result<Problem> {
    gen_label_priority(params, rng, true).map(|(p, _)| p)
}

/// LP or LP* sample together with its planted set of true predicates.
pub fn gen_lp_planted(params: &GenParams, rng: &mut HfRng) -> Result<(Problem, PredSet)> {
    match params.generator {
        GeneratorKind::Lp => gen_label_priority(params, rng, false),
        GeneratorKind::LpStar => gen_label_priority(params, rng, true),
        GeneratorKind::Rp => Err(Error::InvalidParams("RP has no planted labels".into())),
    }
}

/// Dispatches on `params.generator`.
pub fn generate(params: &GenParams, rng: &mut HfRng) -> Result<Problem> {
    match params.generator {
        GeneratorKind::Rp => gen_rp(params, rng),
        GeneratorKind::Lp => gen_lp(params, rng),
        GeneratorKind::LpStar => gen_lp_star(params, rng),
    }
}

/// Rejection-samples `params.generator` into `(δ, label)` cells.
///
/// Candidates are drawn in fixed-size chunks, chunk `i` from random stream
/// `i`; chunks are generated in parallel and merged in index order, so the
/// output depends only on `(params, buckets)`.
pub fn balance_dataset(params: &GenParams, buckets: &BucketSpec) -> Result<Vec<LabeledProblem>> {
    params.validate()?;
    if buckets.count_per_bucket == 0 {
        return Err(Error::InvalidParams("count_per_bucket must be positive".into()));
    }
    let n_cells = buckets.cells();
    let mut filled = vec![0usize; n_cells];
    let mut last_fill = vec![0u64; n_cells];
    let mut attempts = 0u64;
    let mut out = Vec::with_capacity(n_cells * buckets.count_per_bucket);
    let mut round = 0u64;

    while filled.iter().any(|&f| f < buckets.count_per_bucket) {
        let open: Vec<bool> = filled.iter().map(|&f| f < buckets.count_per_bucket).collect();
        let chunks: Vec<Vec<Option<LabeledProblem>>> = (round * CHUNKS_PER_ROUND
            ..(round + 1) * CHUNKS_PER_ROUND)
            .into_par_iter()
            .map(|chunk| -> Result<Vec<Option<LabeledProblem>>> {
                let mut rng = rng::stream(params.seed, chunk);
                (0..CHUNK_SIZE)
                    .map(|_| {
                        let problem = generate(params, &mut rng)?;
                        let res = forward_chain(&problem);
                        let keep = buckets
                            .cell(res.delta, res.provable)
                            .is_some_and(|c| open[c])
                            && encode::direct_len(&problem) <= params.max_tokens;
                        Ok(keep.then(|| LabeledProblem {
                            bucket: bucket_tag(res.delta, res.provable),
                            problem,
                            label: res.provable,
                            delta: res.delta,
                        }))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        round += 1;

        for candidate in chunks.into_iter().flatten() {
            attempts += 1;
            let Some(mut lp) = candidate else { continue };
            let cell = buckets.cell(lp.delta, lp.label).expect("filtered above");
            if filled[cell] < buckets.count_per_bucket {
                filled[cell] += 1;
                last_fill[cell] = attempts;
                lp.problem.meta_mut().bucket = Some(lp.bucket.clone());
                out.push(lp);
            }
        }

        for cell in 0..n_cells {
            if filled[cell] < buckets.count_per_bucket && attempts - last_fill[cell] > buckets.attempt_budget {
                return Err(Error::BucketStarved {
                    delta: (cell / 2) as u32,
                    label: cell % 2 == 1,
                    attempts: attempts - last_fill[cell],
                    filled: filled[cell],
                    wanted: buckets.count_per_bucket,
                });
            }
        }
    }
    Ok(out)
}

/// Exact expected rule count of a sampler over `N_pred ~ UnifInt(n_min, n_max)`.
pub fn expected_rule_mean(kind: GeneratorKind, n_min: u32, n_max: u32) -> Result<Ratio<i128>> {
    if n_min > n_max {
        return Err(Error::InvalidParams(format!("n_pred {n_min}..{n_max} is empty")));
    }
    let mut total = Ratio::from_integer(0i128);
    for n in n_min as i128..=n_max as i128 {
        let per_n = match kind {
            GeneratorKind::Rp => Ratio::from_integer(2 * n),
            GeneratorKind::Lp | GeneratorKind::LpStar => {
                let max_depth = n / 2;
                if max_depth < 1 {
                    return Err(Error::InvalidParams(format!("LP needs n_pred >= 2, got {n}")));
                }
                let mut sum = Ratio::from_integer(0i128);
                for d in 1..=max_depth {
                    let backbone = n - n / d;
                    let noise = if kind == GeneratorKind::Lp || d > 1 {
                        Ratio::new(3 * n, 2)
                    } else {
                        Ratio::from_integer(0)
                    };
                    sum += noise + backbone;
                }
                sum / max_depth
            }
        };
        total += per_n;
    }
    Ok(total / (n_max as i128 - n_min as i128 + 1))
}

/// Histogram of `counts[δ]` for problems matching `provable`.
pub fn depth_histogram<'a>(deltas: impl IntoIterator<Item = &'a (u32, bool)>, provable: bool) -> Vec<u64> {
    let mut hist = Vec::new();
    for &(d, p) in deltas {
        if p != provable {
            continue;
        }
        if hist.len() <= d as usize {
            hist.resize(d as usize + 1, 0);
        }
        hist[d as usize] += 1;
    }
    hist
}

/// Least-squares line through `(δ, ln count)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemilogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `ln(hist[δ])` against `δ` over `lo..=hi`; empty bins are an error.
pub fn semilog_fit(hist: &[u64], lo: u32, hi: u32) -> Result<SemilogFit> {
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .map(|d| match hist.get(d as usize) {
            Some(&c) if c > 0 => Ok((d as f64, (c as f64).ln())),
            _ => Err(Error::Degenerate(format!("no samples at depth {d}"))),
        })
        .collect::<Result<_>>()?;
    if pts.len() < 2 {
        return Err(Error::Degenerate("need at least two depths".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SemilogFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        let p = GenParams::new(GeneratorKind::Rp, 0);
        assert!(p.validate().is_ok());
        assert!(p.clone().with_premises(0, 2).validate().is_err());
        assert!(p.clone().with_premises(2, 1).validate().is_err());
        assert!(p.clone().with_premises(1, 4).validate().is_err());
        assert!(p.clone().with_n_pred(3, 30).validate().is_err());
        assert!(p.clone().with_n_pred(10, 9).validate().is_err());
        assert!(p.with_n_pred(5, 151).validate().is_err());
    }

    #[test]
    fn generator_names_parse() {
        for k in [GeneratorKind::Rp, GeneratorKind::Lp, GeneratorKind::LpStar] {
            assert_eq!(k.name().parse::<GeneratorKind>().unwrap(), k);
        }
        assert!("xp".parse::<GeneratorKind>().is_err());
    }

    #[test]
    fn rule_means_match_closed_forms() {
        assert_eq!(expected_rule_mean(GeneratorKind::Rp, 5, 30).unwrap(), Ratio::from_integer(35));
        assert_eq!(expected_rule_mean(GeneratorKind::Rp, 5, 60).unwrap(), Ratio::from_integer(65));
        for k in 2..40 {
            assert_eq!(
                expected_rule_mean(GeneratorKind::Rp, k, k).unwrap(),
                Ratio::from_integer(2 * k as i128)
            );
        }
        // N = 4: D ∈ {1, 2}; backbone 0 or 2; noise mean 6.
        assert_eq!(expected_rule_mean(GeneratorKind::Lp, 4, 4).unwrap(), Ratio::from_integer(7));
        assert!(expected_rule_mean(GeneratorKind::Rp, 6, 5).is_err());
    }

    #[test]
    fn lp_rule_mean_near_reported_value() {
        let m = expected_rule_mean(GeneratorKind::Lp, 5, 30).unwrap();
        let v = *m.numer() as f64 / *m.denom() as f64;
        assert!((v - 38.4).abs() <= 0.15, "{v}");
        let m = expected_rule_mean(GeneratorKind::Lp, 5, 60).unwrap();
        let v = *m.numer() as f64 / *m.denom() as f64;
        assert!((v - 74.8).abs() <= 0.3, "{v}");
    }

    #[test]
    fn semilog_fit_of_exact_exponential() {
        let hist: Vec<u64> = (0..8).map(|d| 1u64 << (20 - 2 * d)).collect();
        let fit = semilog_fit(&hist, 1, 6).unwrap();
        assert!((fit.slope + 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(semilog_fit(&[5, 0, 3], 0, 2).is_err());
    }

    #[test]
    fn rp_facts_only_when_no_rules_possible() {
        let params = GenParams::new(GeneratorKind::Rp, 1).with_n_pred(5, 5);
        let mut rng = rng::stream(1, 0);
        for _ in 0..50 {
            let p = gen_rp(&params, &mut rng).unwrap();
            if p.rules().is_empty() {
                let res = forward_chain(&p);
                assert_eq!(res.provable, p.fact_set().contains(p.query()));
            }
        }
    }

    #[test]
    fn lp_single_level_has_no_backbone() {
        // N_pred = 3 forces D = 1.
        let params = GenParams::new(GeneratorKind::Lp, 3)
            .with_n_pred(3, 3)
            .with_premises(1, 2);
        let mut rng = rng::stream(3, 0);
        for _ in 0..50 {
            let p = gen_lp(&params, &mut rng).unwrap();
            let res = forward_chain(&p);
            assert_eq!(res.derived(), &p.fact_set());
            assert!(!p.facts().is_empty());
            let star = gen_lp_star(&GenParams { generator: GeneratorKind::LpStar, ..params.clone() }, &mut rng).unwrap();
            assert!(star.rules().is_empty());
        }
    }

    #[test]
    fn starving_cell_is_named() {
        let params = GenParams::new(GeneratorKind::Rp, 5);
        let spec = BucketSpec {
            max_delta: 40,
            count_per_bucket: 1,
            attempt_budget: 5_000,
        };
        match balance_dataset(&params, &spec) {
            Err(Error::BucketStarved { delta, .. }) => assert!(delta > 6),
            other => panic!("expected starvation, got {:?}", other.map(|v| v.len())),
        }
    }

    #[test]
    fn labeled_record_json_shape() {
        let p = Problem::from_ids(&[0], &[(&[0], 1)], 1).unwrap();
        let lp = LabeledProblem::solve(p);
        let v: serde_json::Value = serde_json::to_value(&lp).unwrap();
        assert_eq!(v["label"], 1);
        assert_eq!(v["delta"], 1);
        assert_eq!(v["bucket"], "d1-l1");
        let back: LabeledProblem = serde_json::from_value(v).unwrap();
        assert_eq!(back, lp);
    }
}
