//! Token serialization with compositional type sets.
//!
//! A problem serializes as `[facts][rules][task][query]`, each rule written
//! as its premises followed by its conclusion. Every position carries a set
//! of semantic types (fact, query, rule, premise, conclusion, task) whose
//! embeddings are summed into the token embedding, so rule boundaries are
//! recoverable from the type sets alone and [`decode`] inverts the encoders.
//!
//! Three layouts are produced:
//!
//! * direct: `prefix τ_direct query | answer`
//! * cot: `prefix τ_cot query | steps… answer EOS`
//! * corrective: `prefix query | τ_direct answer | τ_cot steps… answer EOS`
//!
//! CoT steps are the derived predicates in BFS order, each followed by
//! [`VocabLayout::STEP_SEP`].

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{Predicate, Problem, ProblemMeta, ProofTrace, Rule, VOCAB_SIZE};

/// Sequence length cap.
pub const MAX_TOKENS: usize = 1024;

/// Reserved token ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabLayout {
    pub predicates: u16,
    pub task_direct: u16,
    pub task_cot: u16,
    pub provable: u16,
    pub unprovable: u16,
    pub step_sep: u16,
    pub eos: u16,
    pub size: u16,
}

impl VocabLayout {
    pub const TASK_DIRECT: u16 = 200;
    pub const TASK_COT: u16 = 201;
    pub const PROVABLE: u16 = 210;
    pub const UNPROVABLE: u16 = 211;
    pub const STEP_SEP: u16 = 212;
    pub const EOS: u16 = 213;
    pub const SIZE: u16 = 256;

    pub const fn standard() -> Self {
        VocabLayout {
            predicates: VOCAB_SIZE as u16,
            task_direct: Self::TASK_DIRECT,
            task_cot: Self::TASK_COT,
            provable: Self::PROVABLE,
            unprovable: Self::UNPROVABLE,
            step_sep: Self::STEP_SEP,
            eos: Self::EOS,
            size: Self::SIZE,
        }
    }

    pub fn answer_token(label: bool) -> u16 {
        if label {
            Self::PROVABLE
        } else {
            Self::UNPROVABLE
        }
    }

    pub fn answer_label(token: u16) -> Option<bool> {
        match token {
            Self::PROVABLE => Some(true),
            Self::UNPROVABLE => Some(false),
            _ => None,
        }
    }
}

/// Semantic type indices.
pub mod types {
    pub const FACT: u8 = 1;
    pub const QUERY: u8 = 2;
    pub const RULE: u8 = 3;
    pub const PREMISE: u8 = 4;
    pub const CONCLUSION: u8 = 5;
    pub const TASK: u8 = 8;
}

/// A set of type indices in `1..=8`, stored as a bitmask with index `i` at
/// bit `i - 1`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeSet(u8);

impl TypeSet {
    pub const EMPTY: TypeSet = TypeSet(0);
    pub const FACT: TypeSet = TypeSet::of(&[types::FACT]);
    pub const QUERY: TypeSet = TypeSet::of(&[types::QUERY]);
    pub const PREMISE: TypeSet = TypeSet::of(&[types::RULE, types::PREMISE]);
    pub const CONCLUSION: TypeSet = TypeSet::of(&[types::RULE, types::CONCLUSION]);
    pub const TASK: TypeSet = TypeSet::of(&[types::TASK]);

    pub const fn of(indices: &[u8]) -> TypeSet {
        let mut bits = 0u8;
        let mut i = 0;
        while i < indices.len() {
            bits |= 1 << (indices[i] - 1);
            i += 1;
        }
        TypeSet(bits)
    }

    pub fn from_bits(bits: u8) -> TypeSet {
        TypeSet(bits)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, index: u8) -> bool {
        (1..=8).contains(&index) && self.0 & (1 << (index - 1)) != 0
    }

    /// Active type indices in increasing order.
    pub fn indices(self) -> impl Iterator<Item = u8> {
        (1..=8u8).filter(move |&i| self.0 & (1 << (i - 1)) != 0)
    }
}

impl fmt::Debug for TypeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.indices()).finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Segment {
    Prefix = 0,
    DirectBranch = 1,
    CotBranch = 2,
}

impl Segment {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Segment> {
        match code {
            0 => Some(Segment::Prefix),
            1 => Some(Segment::DirectBranch),
            2 => Some(Segment::CotBranch),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Direct,
    Cot,
    Corrective,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Format::Direct),
            "cot" => Ok(Format::Cot),
            "corrective" => Ok(Format::Corrective),
            other => Err(Error::InvalidParams(format!("unknown format {other:?}"))),
        }
    }
}

/// Model-facing encoding of one example.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<u16>,
    pub type_sets: Vec<TypeSet>,
    pub segments: Vec<Segment>,
    /// `true` where the token is a training target.
    pub loss_mask: Vec<bool>,
    pub positions: Vec<u32>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn push(&mut self, token: u16, types: TypeSet, segment: Segment, target: bool) {
        self.positions.push(self.tokens.len() as u32);
        self.tokens.push(token);
        self.type_sets.push(types);
        self.segments.push(segment);
        self.loss_mask.push(target);
    }

    /// Checks the structural invariants shared by every layout.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if [self.type_sets.len(), self.segments.len(), self.loss_mask.len(), self.positions.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::Decode("per-position arrays differ in length".into()));
        }
        if let Some(&t) = self.tokens.iter().find(|&&t| t >= VocabLayout::SIZE) {
            return Err(Error::Decode(format!("token {t} outside vocabulary")));
        }
        if self.positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Decode("positions not strictly increasing".into()));
        }
        if self
            .segments
            .iter()
            .zip(&self.loss_mask)
            .any(|(&s, &l)| l && s == Segment::Prefix)
        {
            return Err(Error::Decode("loss on a prefix position".into()));
        }
        Ok(())
    }

    /// Segment slice `[start, end)` of the first run of `segment`.
    pub fn span(&self, segment: Segment) -> Option<(usize, usize)> {
        let start = self.segments.iter().position(|&s| s == segment)?;
        let len = self.segments[start..].iter().take_while(|&&s| s == segment).count();
        Some((start, start + len))
    }
}

/// Length of the direct encoding of `problem`.
pub fn direct_len(problem: &Problem) -> usize {
    problem.facts().len() + problem.rules().iter().map(|r| r.premises().len() + 1).sum::<usize>() + 3
}

fn push_statement(seq: &mut TokenSequence, problem: &Problem) {
    for f in problem.facts() {
        seq.push(f.id() as u16, TypeSet::FACT, Segment::Prefix, false);
    }
    for r in problem.rules() {
        for p in r.premises() {
            seq.push(p.id() as u16, TypeSet::PREMISE, Segment::Prefix, false);
        }
        seq.push(r.conclusion().id() as u16, TypeSet::CONCLUSION, Segment::Prefix, false);
    }
}

fn check_len(seq: TokenSequence) -> Result<TokenSequence> {
    if seq.len() > MAX_TOKENS {
        Err(Error::TooLong {
            len: seq.len(),
            max: MAX_TOKENS,
        })
    } else {
        Ok(seq)
    }
}

/// CoT target body: derived predicates with separators, then answer and EOS.
///
/// For a provable query the steps stop after the layer that derives it.
pub fn cot_target(problem: &Problem, trace: &ProofTrace, label: bool) -> Vec<u16> {
    let mut out = Vec::new();
    let in_facts = problem.facts().contains(&problem.query());
    if !(label && in_facts) {
        for layer in &trace.layers {
            for step in layer {
                out.push(step.derived.id() as u16);
                out.push(VocabLayout::STEP_SEP);
            }
            if label && layer.iter().any(|s| s.derived == problem.query()) {
                break;
            }
        }
    }
    out.push(VocabLayout::answer_token(label));
    out.push(VocabLayout::EOS);
    out
}

pub fn encode_direct(problem: &Problem, label: bool) -> Result<TokenSequence> {
    let mut seq = TokenSequence::default();
    push_statement(&mut seq, problem);
    seq.push(VocabLayout::TASK_DIRECT, TypeSet::TASK, Segment::Prefix, false);
    seq.push(problem.query().id() as u16, TypeSet::QUERY, Segment::Prefix, false);
    seq.push(VocabLayout::answer_token(label), TypeSet::EMPTY, Segment::DirectBranch, true);
    check_len(seq)
}

pub fn encode_cot(problem: &Problem, trace: &ProofTrace, label: bool) -> Result<TokenSequence> {
    let mut seq = TokenSequence::default();
    push_statement(&mut seq, problem);
    seq.push(VocabLayout::TASK_COT, TypeSet::TASK, Segment::Prefix, false);
    seq.push(problem.query().id() as u16, TypeSet::QUERY, Segment::Prefix, false);
    for t in cot_target(problem, trace, label) {
        seq.push(t, TypeSet::EMPTY, Segment::CotBranch, true);
    }
    check_len(seq)
}

/// Single-sequence layout carrying both the direct answer and the CoT target.
pub fn encode_corrective(problem: &Problem, trace: &ProofTrace, label: bool) -> Result<TokenSequence> {
    let mut seq = TokenSequence::default();
    push_statement(&mut seq, problem);
    seq.push(problem.query().id() as u16, TypeSet::QUERY, Segment::Prefix, false);
    seq.push(VocabLayout::TASK_DIRECT, TypeSet::TASK, Segment::DirectBranch, false);
    seq.push(VocabLayout::answer_token(label), TypeSet::EMPTY, Segment::DirectBranch, true);
    seq.push(VocabLayout::TASK_COT, TypeSet::TASK, Segment::CotBranch, false);
    for t in cot_target(problem, trace, label) {
        seq.push(t, TypeSet::EMPTY, Segment::CotBranch, true);
    }
    check_len(seq)
}

pub fn encode(format: Format, problem: &Problem, trace: &ProofTrace, label: bool) -> Result<TokenSequence> {
    match format {
        Format::Direct => encode_direct(problem, label),
        Format::Cot => encode_cot(problem, trace, label),
        Format::Corrective => encode_corrective(problem, trace, label),
    }
}

/// Result of [`decode`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub problem: Problem,
    pub label: Option<bool>,
    /// Tokens after the CoT task token (steps, answer, EOS), if any.
    pub cot: Vec<u16>,
}

fn predicate_token(t: u16) -> Result<Predicate> {
    Predicate::new(t as u32).map_err(|_| Error::Decode(format!("token {t} is not a predicate")))
}

/// Recovers the problem (and label, when an answer token is present).
pub fn decode(seq: &TokenSequence) -> Result<Decoded> {
    seq.validate()?;
    let mut facts = Vec::new();
    let mut rules = Vec::new();
    let mut premises = Vec::new();
    let mut query = None;
    let mut label = None;
    let mut cot = Vec::new();

    for i in 0..seq.len() {
        let (t, ty, seg) = (seq.tokens[i], seq.type_sets[i], seq.segments[i]);
        if seg == Segment::Prefix {
            match ty {
                TypeSet::FACT if rules.is_empty() && premises.is_empty() => facts.push(predicate_token(t)?),
                TypeSet::PREMISE => premises.push(predicate_token(t)?),
                TypeSet::CONCLUSION => {
                    let ps = std::mem::take(&mut premises);
                    if ps.is_empty() {
                        return Err(Error::Decode(format!("conclusion at {i} without premises")));
                    }
                    rules.push(Rule::new(ps, predicate_token(t)?)?);
                }
                TypeSet::QUERY if query.is_none() => query = Some(predicate_token(t)?),
                TypeSet::TASK if t == VocabLayout::TASK_DIRECT || t == VocabLayout::TASK_COT => {}
                _ => return Err(Error::Decode(format!("unexpected {ty:?} token {t} at {i}"))),
            }
            if !premises.is_empty() && ty != TypeSet::PREMISE {
                return Err(Error::Decode(format!("rule interrupted at {i}")));
            }
            continue;
        }
        if ty == TypeSet::TASK {
            continue;
        }
        match (seg, VocabLayout::answer_label(t)) {
            (Segment::DirectBranch, Some(l)) => label = Some(l),
            (Segment::CotBranch, a) => {
                cot.push(t);
                if label.is_none() {
                    label = a;
                }
            }
            _ => return Err(Error::Decode(format!("unexpected branch token {t} at {i}"))),
        }
    }
    if !premises.is_empty() {
        return Err(Error::Decode("trailing premises without conclusion".into()));
    }
    let query = query.ok_or_else(|| Error::Decode("missing query".into()))?;
    let problem = Problem::new(facts, rules, query, ProblemMeta::default())?;
    Ok(Decoded { problem, label, cot })
}

/// `E_token + Σ W_type[i]` over the active type rows.
pub fn type_embedding_sum(token_emb: &[f64], type_rows: &[&[f64]]) -> Result<Vec<f64>> {
    let mut out = token_emb.to_vec();
    for row in type_rows {
        if row.len() != out.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                got: row.len(),
            });
        }
        for (o, v) in out.iter_mut().zip(row.iter()) {
            *o += v;
        }
    }
    Ok(out)
}

const MAGIC: &[u8; 4] = b"HFTS";
pub const FILE_VERSION: u32 = 1;

/// JSON header of a binary token file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHeader {
    pub version: u32,
    pub format: Format,
    pub count: usize,
    pub total_tokens: usize,
    pub vocab: VocabLayout,
    /// Describes the record layout for readers in other languages.
    pub layout: String,
}

const LAYOUT: &str = "per record: u32 n; u16[n] tokens; u8[n] type bitmask (type i at bit i-1); \
u8[n] segment (0 prefix, 1 direct, 2 cot); u8[n] loss; u32[n] positions; all little-endian";

/// Writes `MAGIC | u32 header_len | header JSON | records`.
pub fn write_file<W: Write>(w: &mut W, format: Format, seqs: &[TokenSequence]) -> Result<FileHeader> {
    let header = FileHeader {
        version: FILE_VERSION,
        format,
        count: seqs.len(),
        total_tokens: seqs.iter().map(TokenSequence::len).sum(),
        vocab: VocabLayout::standard(),
        layout: LAYOUT.to_string(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for s in seqs {
        w.write_all(&(s.len() as u32).to_le_bytes())?;
        for t in &s.tokens {
            w.write_all(&t.to_le_bytes())?;
        }
        w.write_all(&s.type_sets.iter().map(|t| t.bits()).collect::<Vec<_>>())?;
        w.write_all(&s.segments.iter().map(|s| s.code()).collect::<Vec<_>>())?;
        w.write_all(&s.loss_mask.iter().map(|&l| l as u8).collect::<Vec<_>>())?;
        for p in &s.positions {
            w.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(header)
}

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Decode(format!("truncated at byte {}", self.at)))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.at
    }
}

/// Parses a file produced by [`write_file`], validating every record.
pub fn read_file(bytes: &[u8]) -> Result<(FileHeader, Vec<TokenSequence>)> {
    let mut c = Cursor { buf: bytes, at: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Decode("bad magic".into()));
    }
    let hlen = c.u32()? as usize;
    let header: FileHeader = serde_json::from_slice(c.take(hlen)?)?;
    if header.version != FILE_VERSION {
        return Err(Error::Decode(format!("unsupported version {}", header.version)));
    }
    if header.vocab != VocabLayout::standard() {
        return Err(Error::Decode("vocabulary layout mismatch".into()));
    }
    let mut seqs = Vec::new();
    let mut total = 0usize;
    while c.remaining() > 0 {
        let n = c.u32()? as usize;
        if n.checked_mul(9).is_none_or(|b| b > c.remaining()) {
            return Err(Error::Decode(format!("record of {n} tokens exceeds remaining bytes")));
        }
        let tokens = c.take(2 * n)?.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect();
        let type_sets = c.take(n)?.iter().map(|&b| TypeSet::from_bits(b)).collect();
        let segments = c
            .take(n)?
            .iter()
            .map(|&b| Segment::from_code(b).ok_or_else(|| Error::Decode(format!("segment code {b}"))))
            .collect::<Result<_>>()?;
        let loss_mask = c
            .take(n)?
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::Decode(format!("loss byte {b}"))),
            })
            .collect::<Result<_>>()?;
        let positions = c
            .take(4 * n)?
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let seq = TokenSequence {
            tokens,
            type_sets,
            segments,
            loss_mask,
            positions,
        };
        seq.validate()?;
        total += n;
        seqs.push(seq);
    }
    if seqs.len() != header.count || total != header.total_tokens {
        return Err(Error::Decode(format!(
            "header declares {} records / {} tokens, found {} / {}",
            header.count,
            header.total_tokens,
            seqs.len(),
            total
        )));
    }
    Ok((header, seqs))
}
