//! Attention masks over encoded sequences.
//!
//! `allow(q, k)` answers whether query position `q` may attend key position
//! `k`. Three constructions are supported: plain causal, bidirectional prefix
//! (all-to-all inside the problem statement, causal afterwards) and the
//! isolated corrective mask, where the direct and CoT branches both read the
//! statement but never each other. Statement rows do not attend branches.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::encode::Segment;
use crate::error::{Error, Result};

/// Largest `n` materialized as a dense bit matrix; beyond it masks are
/// answered from segment boundaries.
pub const DENSE_MAX: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskRule {
    Causal,
    Prefix { prefix: usize },
    Isolated { prefix: usize, branches: Vec<(usize, usize)> },
}

impl MaskRule {
    fn allow(&self, q: usize, k: usize) -> bool {
        match self {
            MaskRule::Causal => k <= q,
            MaskRule::Prefix { prefix } => {
                if q < *prefix {
                    k < *prefix
                } else {
                    k <= q
                }
            }
            MaskRule::Isolated { prefix, branches } => {
                if q < *prefix {
                    return k < *prefix;
                }
                if k < *prefix {
                    return true;
                }
                branches
                    .iter()
                    .find(|(s, e)| (*s..*e).contains(&q))
                    .is_some_and(|(s, _)| *s <= k && k <= q)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionMask {
    n: usize,
    rule: MaskRule,
    dense: Option<Vec<u64>>,
}

impl AttentionMask {
    fn build(n: usize, rule: MaskRule) -> Self {
        let dense = (n <= DENSE_MAX).then(|| {
            let mut bits = vec![0u64; (n * n).div_ceil(64)];
            for q in 0..n {
                for k in 0..n {
                    if rule.allow(q, k) {
                        let i = q * n + k;
                        bits[i / 64] |= 1 << (i % 64);
                    }
                }
            }
            bits
        });
        AttentionMask { n, rule, dense }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rule(&self) -> &MaskRule {
        &self.rule
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn allow(&self, q: usize, k: usize) -> bool {
        assert!(q < self.n && k < self.n, "({q}, {k}) outside {0}x{0} mask", self.n);
        match &self.dense {
            Some(bits) => {
                let i = q * self.n + k;
                bits[i / 64] & (1 << (i % 64)) != 0
            }
            None => self.rule.allow(q, k),
        }
    }

    /// Allowed keys of row `q`.
    pub fn row(&self, q: usize) -> Vec<usize> {
        (0..self.n).filter(|&k| self.allow(q, k)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        (0..self.n).map(|q| (0..self.n).map(|k| self.allow(q, k)).collect()).collect()
    }

    /// `#` for allowed, `.` for blocked, one row per line.
    pub fn ascii(&self) -> String {
        let mut s = String::with_capacity(self.n * (self.n + 1));
        for q in 0..self.n {
            for k in 0..self.n {
                s.push(if self.allow(q, k) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }
}

pub fn causal_mask(n: usize) -> Result<AttentionMask> {
    if n == 0 {
        return Err(Error::Segmentation("empty sequence".into()));
    }
    Ok(AttentionMask::build(n, MaskRule::Causal))
}

fn prefix_len(segments: &[Segment]) -> Result<usize> {
    let p = segments.iter().take_while(|&&s| s == Segment::Prefix).count();
    if segments[p..].contains(&Segment::Prefix) {
        return Err(Error::Segmentation("prefix positions are not contiguous from 0".into()));
    }
    Ok(p)
}

pub fn prefix_bidirectional_mask(segments: &[Segment]) -> Result<AttentionMask> {
    if segments.is_empty() {
        return Err(Error::Segmentation("empty sequence".into()));
    }
    let prefix = prefix_len(segments)?;
    Ok(AttentionMask::build(segments.len(), MaskRule::Prefix { prefix }))
}

pub fn isolated_corrective_mask(segments: &[Segment]) -> Result<AttentionMask> {
    if segments.is_empty() {
        return Err(Error::Segmentation("empty sequence".into()));
    }
    let prefix = prefix_len(segments)?;
    let mut branches = Vec::new();
    let mut seen = Vec::new();
    let mut i = prefix;
    while i < segments.len() {
        let s = segments[i];
        if seen.contains(&s) {
            return Err(Error::Segmentation(format!("{s:?} is not contiguous")));
        }
        seen.push(s);
        let len = segments[i..].iter().take_while(|&&x| x == s).count();
        branches.push((i, i + len));
        i += len;
    }
    Ok(AttentionMask::build(segments.len(), MaskRule::Isolated { prefix, branches }))
}

const MAGIC: &[u8; 4] = b"HFMK";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskHeader {
    pub version: u32,
    pub n: usize,
    pub rule: MaskRule,
    pub layout: String,
}

/// Writes `MAGIC | u32 header_len | header JSON | row-major bits`, bit
/// `q * n + k` stored LSB-first.
pub fn write_mask<W: Write>(w: &mut W, mask: &AttentionMask) -> Result<()> {
    let header = MaskHeader {
        version: 1,
        n: mask.n,
        rule: mask.rule.clone(),
        layout: "row-major; bit q*n+k is allow[q][k]; LSB-first within each byte".into(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let mut bytes = vec![0u8; (mask.n * mask.n).div_ceil(8)];
    for q in 0..mask.n {
        for k in 0..mask.n {
            if mask.allow(q, k) {
                let i = q * mask.n + k;
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Parses [`write_mask`] output and checks the bits agree with the header.
pub fn read_mask(bytes: &[u8]) -> Result<AttentionMask> {
    let bad = |m: &str| Error::Decode(m.to_string());
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("bad mask magic"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(8..).ok_or_else(|| bad("truncated"))?;
    let header: MaskHeader = serde_json::from_slice(body.get(..hlen).ok_or_else(|| bad("truncated header"))?)?;
    if header.version != 1 {
        return Err(bad("unsupported mask version"));
    }
    let n = header.n;
    if n == 0 || n > DENSE_MAX {
        return Err(bad("mask size outside 1..=4096"));
    }
    let bits = &body[hlen..];
    if bits.len() != (n * n).div_ceil(8) {
        return Err(bad("bit payload length mismatch"));
    }
    if let MaskRule::Prefix { prefix } | MaskRule::Isolated { prefix, .. } = header.rule {
        if prefix > n {
            return Err(bad("prefix beyond sequence"));
        }
    }
    if let MaskRule::Isolated { prefix, branches } = &header.rule {
        let mut at = *prefix;
        for &(s, e) in branches {
            if s != at || e <= s || e > n {
                return Err(bad("branches must tile the suffix"));
            }
            at = e;
        }
        if at != n {
            return Err(bad("branches must tile the suffix"));
        }
    }
    let mask = AttentionMask::build(n, header.rule);
    for q in 0..n {
        for k in 0..n {
            let i = q * n + k;
            if (bits[i / 8] >> (i % 8)) & 1 == 1 {
                if !mask.allow(q, k) {
                    return Err(Error::Decode(format!("bit ({q}, {k}) disagrees with header rule")));
                }
            } else if mask.allow(q, k) {
                return Err(Error::Decode(format!("bit ({q}, {k}) disagrees with header rule")));
            }
        }
    }
    Ok(mask)
}

/// Renders segment codes as `P`/`D`/`C`.
pub fn segment_string(segments: &[Segment]) -> String {
    let mut s = String::new();
    for seg in segments {
        let _ = write!(
            s,
            "{}",
            match seg {
                Segment::Prefix => 'P',
                Segment::DirectBranch => 'D',
                Segment::CotBranch => 'C',
            }
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use Segment::{CotBranch as C, DirectBranch as D, Prefix as P};

    #[test]
    fn causal_small() {
        assert_eq!(causal_mask(1).unwrap().to_rows(), vec![vec![true]]);
        let m = causal_mask(3).unwrap();
        assert_eq!(m.ascii(), "#..\n##.\n###\n");
        for q in 0..3 {
            assert_eq!(m.row(q).len(), q + 1);
        }
        assert!(causal_mask(0).is_err());
    }

    #[test]
    fn prefix_examples() {
        let m = prefix_bidirectional_mask(&[P, P, P]).unwrap();
        assert!(m.to_rows().iter().flatten().all(|&b| b));
        let m = prefix_bidirectional_mask(&[D, D, D]).unwrap();
        assert_eq!(m.to_rows(), causal_mask(3).unwrap().to_rows());
        let m = prefix_bidirectional_mask(&[P, P, D, D]).unwrap();
        assert_eq!(m.row(0), vec![0, 1]);
        assert_eq!(m.row(1), vec![0, 1]);
        assert_eq!(m.row(2), vec![0, 1, 2]);
        assert_eq!(m.row(3), vec![0, 1, 2, 3]);
        assert!(prefix_bidirectional_mask(&[P, D, P]).is_err());
    }

    #[test]
    fn isolated_example() {
        let m = isolated_corrective_mask(&[P, P, D, D, C, C]).unwrap();
        assert_eq!(m.row(0), vec![0, 1]);
        assert_eq!(m.row(1), vec![0, 1]);
        assert_eq!(m.row(2), vec![0, 1, 2]);
        assert_eq!(m.row(3), vec![0, 1, 2, 3]);
        assert_eq!(m.row(4), vec![0, 1, 4]);
        assert_eq!(m.row(5), vec![0, 1, 4, 5]);
    }

    #[test]
    fn isolated_without_cot_is_prefix_mask() {
        let segs = [P, P, P, D, D];
        assert_eq!(
            isolated_corrective_mask(&segs).unwrap().to_rows(),
            prefix_bidirectional_mask(&segs).unwrap().to_rows()
        );
    }

    #[test]
    fn malformed_segmentations() {
        assert!(isolated_corrective_mask(&[P, D, C, D]).is_err());
        assert!(isolated_corrective_mask(&[D, P, C]).is_err());
        assert!(isolated_corrective_mask(&[]).is_err());
    }

    #[test]
    fn large_masks_use_interval_rules() {
        let n = DENSE_MAX + 10;
        let mut segs = vec![P; 100];
        segs.extend(std::iter::repeat_n(D, 10));
        segs.extend(std::iter::repeat_n(C, n - 110));
        let m = isolated_corrective_mask(&segs).unwrap();
        assert!(!m.is_dense());
        assert!(m.allow(n - 1, 0));
        assert!(!m.allow(n - 1, 105));
        assert!(m.allow(n - 1, 110));
        assert!(!m.allow(50, 200));
    }

    #[test]
    fn binary_round_trip() {
        let m = isolated_corrective_mask(&[P, P, D, D, C, C, C]).unwrap();
        let mut buf = Vec::new();
        write_mask(&mut buf, &m).unwrap();
        assert_eq!(read_mask(&buf).unwrap(), m);
        let last = buf.len() - 1;
        buf[last] ^= 0x01;
        assert!(read_mask(&buf).is_err());
    }
}
