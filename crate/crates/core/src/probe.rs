//! Training-free probes over exported hidden states.
//!
//! Hidden states travel as raw little-endian `f32` data, laid out
//! layer-token-dim, next to a JSON sidecar describing the shape and the
//! tokens. Layer 0 is the embedding output; the last layer feeds the
//! unembedding. Each layer gets an orthogonal map onto the last layer's
//! basis, fitted by orthogonal Procrustes on a calibration split.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encode::TypeSet;
use crate::error::{Error, Result};
use crate::rng::HfRng;

pub const RMS_EPS: f64 = 1e-5;
pub const PROBE_THRESHOLD: f64 = 0.5;
pub const CALIBRATION_FRACTION: f64 = 0.1;
/// Token vectors per layer used when fitting maps.
pub const CALIBRATION_MAX_TOKENS: usize = 100_000;
/// Singular values below this fraction of the largest mark a rank-deficient fit.
pub const RANK_TOL: f64 = 1e-10;
pub const LAYOUT: &str = "layer-token-dim";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenMeta {
    pub token: u16,
    /// [`TypeSet`] bits.
    #[serde(default)]
    pub types: u8,
    #[serde(default)]
    pub segment: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    /// `[layers + 1, tokens, d]`.
    pub shape: [usize; 3],
    pub layout: String,
    #[serde(default)]
    pub token_meta: Vec<TokenMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Index of the example in its dataset, when exported from one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HiddenStates {
    pub meta: Sidecar,
    values: Vec<f32>,
}

impl HiddenStates {
    pub fn new(meta: Sidecar, values: Vec<f32>) -> Result<Self> {
        let [l, t, d] = meta.shape;
        if meta.layout != LAYOUT {
            return Err(Error::Decode(format!("unsupported layout {:?}", meta.layout)));
        }
        if l == 0 || d == 0 {
            return Err(Error::Decode(format!("degenerate shape {:?}", meta.shape)));
        }
        let want = l
            .checked_mul(t)
            .and_then(|x| x.checked_mul(d))
            .ok_or_else(|| Error::Decode("shape overflows".into()))?;
        if values.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                got: values.len(),
            });
        }
        if !meta.token_meta.is_empty() && meta.token_meta.len() != t {
            return Err(Error::DimensionMismatch {
                expected: t,
                got: meta.token_meta.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Decode("non-finite hidden state".into()));
        }
        Ok(HiddenStates { meta, values })
    }

    /// Parses a sidecar and its raw data.
    pub fn decode(sidecar: &[u8], data: &[u8]) -> Result<Self> {
        let meta: Sidecar = serde_json::from_slice(sidecar)?;
        if !data.len().is_multiple_of(4) {
            return Err(Error::Decode(format!("{} bytes is not a whole number of f32", data.len())));
        }
        let [l, t, d] = meta.shape;
        if l.checked_mul(t).and_then(|x| x.checked_mul(d)).and_then(|x| x.checked_mul(4)) != Some(data.len()) {
            return Err(Error::Decode(format!(
                "shape {:?} does not match {} data bytes",
                meta.shape,
                data.len()
            )));
        }
        let values = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        HiddenStates::new(meta, values)
    }

    pub fn encode_data(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Reads `<stem>.json` and `<stem>.f32`.
    pub fn load(sidecar_path: &Path) -> Result<Self> {
        let sidecar = fs::read(sidecar_path)?;
        let data = fs::read(data_path(sidecar_path))?;
        HiddenStates::decode(&sidecar, &data)
    }

    /// Writes `<stem>.json` and `<stem>.f32`.
    pub fn save(&self, sidecar_path: &Path) -> Result<()> {
        fs::write(sidecar_path, serde_json::to_vec_pretty(&self.meta)?)?;
        fs::write(data_path(sidecar_path), self.encode_data())?;
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.meta.shape[0]
    }

    pub fn tokens(&self) -> usize {
        self.meta.shape[1]
    }

    pub fn dim(&self) -> usize {
        self.meta.shape[2]
    }

    pub fn state(&self, layer: usize, token: usize) -> &[f32] {
        let d = self.dim();
        let at = (layer * self.tokens() + token) * d;
        &self.values[at..at + d]
    }

    pub fn state_f64(&self, layer: usize, token: usize) -> Vec<f64> {
        self.state(layer, token).iter().map(|&v| f64::from(v)).collect()
    }
}

fn data_path(sidecar: &Path) -> PathBuf {
    sidecar.with_extension("f32")
}

/// An orthogonal `d×d` map applied to row vectors: `h̃ = h·R`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalMap {
    pub r: DMatrix<f64>,
    /// The cross-covariance was rank-deficient, so the fit is not unique.
    pub rank_deficient: bool,
}

impl OrthogonalMap {
    pub fn identity(d: usize) -> Self {
        OrthogonalMap {
            r: DMatrix::identity(d, d),
            rank_deficient: false,
        }
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let d = self.r.nrows();
        (0..d).map(|j| (0..d).map(|i| h[i] * self.r[(i, j)]).sum()).collect()
    }

    /// Largest entry of `|RᵀR − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.r.nrows();
        let g = self.r.transpose() * &self.r - DMatrix::<f64>::identity(d, d);
        g.amax()
    }
}

/// Orthogonal `R` minimizing `‖src·R − dst‖_F`, via the SVD of `srcᵀ·dst`.
pub fn procrustes_fit(src: &DMatrix<f64>, dst: &DMatrix<f64>) -> Result<OrthogonalMap> {
    if src.shape() != dst.shape() {
        return Err(Error::DimensionMismatch {
            expected: src.nrows() * src.ncols(),
            got: dst.nrows() * dst.ncols(),
        });
    }
    if src.ncols() == 0 {
        return Err(Error::Degenerate("zero-dimensional states".into()));
    }
    let m = src.transpose() * dst;
    let svd = m.svd(true, true);
    let s = &svd.singular_values;
    let top = s.max();
    let rank_deficient = top.is_nan() || top <= 0.0 || s.iter().any(|&v| v <= top * RANK_TOL);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Degenerate("SVD did not converge".into()));
    };
    Ok(OrthogonalMap {
        r: u * v_t,
        rank_deficient,
    })
}

/// Frobenius residual `‖src·R − dst‖_F`.
pub fn residual(src: &DMatrix<f64>, r: &DMatrix<f64>, dst: &DMatrix<f64>) -> f64 {
    (src * r - dst).norm()
}

pub fn rmsnorm(x: &[f64], weights: &[f64], eps: f64) -> Vec<f64> {
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
    let scale = 1.0 / (ms + eps).sqrt();
    x.iter().zip(weights).map(|(v, w)| v * w * scale).collect()
}

/// Output rows for the two answer tokens and the final RMSNorm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnembeddingPair {
    pub w_correct: Vec<f64>,
    pub w_incorrect: Vec<f64>,
    pub rms_weights: Vec<f64>,
    #[serde(default = "default_eps")]
    pub rms_eps: f64,
}

fn default_eps() -> f64 {
    RMS_EPS
}

impl UnembeddingPair {
    pub fn dim(&self) -> usize {
        self.w_correct.len()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        for v in [&self.w_correct, &self.w_incorrect, &self.rms_weights] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        if self.rms_eps.is_nan() || self.rms_eps < 0.0 {
            return Err(Error::InvalidParams("rms_eps must be non-negative".into()));
        }
        Ok(())
    }
}

/// Readout parameters exported next to the hidden states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    #[serde(flatten)]
    pub pair: UnembeddingPair,
    /// Type embedding rows keyed by type index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_rows: Option<std::collections::BTreeMap<u8, Vec<f64>>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `P(correct | h)`: the first softmax component over the two answer logits
/// of the aligned, normalized state.
pub fn decision_trace(h: &[f64], map: &OrthogonalMap, pair: &UnembeddingPair) -> f64 {
    let n = rmsnorm(&map.apply(h), &pair.rms_weights, pair.rms_eps);
    let gap = dot(&n, &pair.w_incorrect) - dot(&n, &pair.w_correct);
    1.0 / (1.0 + gap.exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerF1 {
    pub layer: usize,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
    /// No positive ground-truth tokens; `f1` is reported as 0.
    pub no_positives: bool,
}

/// Accumulates confusion counts per layer across examples.
#[derive(Clone, Debug, Default)]
pub struct F1Accumulator {
    tp: Vec<u64>,
    fp: Vec<u64>,
    fn_: Vec<u64>,
    support: Vec<usize>,
}

impl F1Accumulator {
    pub fn new(layers: usize) -> Self {
        F1Accumulator {
            tp: vec![0; layers],
            fp: vec![0; layers],
            fn_: vec![0; layers],
            support: vec![0; layers],
        }
    }

    /// `truth[t]` is `Some(provable)` for predicate tokens and `None` elsewhere.
    pub fn push(
        &mut self,
        states: &HiddenStates,
        maps: &[OrthogonalMap],
        pair: &UnembeddingPair,
        truth: &[Option<bool>],
    ) -> Result<()> {
        check_maps(states, maps)?;
        pair.validate(states.dim())?;
        if truth.len() != states.tokens() {
            return Err(Error::DimensionMismatch {
                expected: states.tokens(),
                got: truth.len(),
            });
        }
        if self.tp.len() != states.layers() {
            return Err(Error::DimensionMismatch {
                expected: self.tp.len(),
                got: states.layers(),
            });
        }
        for (layer, map) in maps.iter().enumerate() {
            for (t, gt) in truth.iter().enumerate() {
                let Some(gt) = *gt else { continue };
                let pred = decision_trace(&states.state_f64(layer, t), map, pair) > PROBE_THRESHOLD;
                self.support[layer] += 1;
                match (pred, gt) {
                    (true, true) => self.tp[layer] += 1,
                    (true, false) => self.fp[layer] += 1,
                    (false, true) => self.fn_[layer] += 1,
                    (false, false) => {}
                }
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> Vec<LayerF1> {
        (0..self.tp.len())
            .map(|l| {
                let (tp, fp, fn_) = (self.tp[l] as f64, self.fp[l] as f64, self.fn_[l] as f64);
                let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
                let precision = ratio(tp, tp + fp);
                let recall = ratio(tp, tp + fn_);
                LayerF1 {
                    layer: l,
                    f1: ratio(2.0 * precision * recall, precision + recall),
                    precision,
                    recall,
                    support: self.support[l],
                    no_positives: tp + fn_ == 0.0,
                }
            })
            .collect()
    }
}

fn check_maps(states: &HiddenStates, maps: &[OrthogonalMap]) -> Result<()> {
    if maps.len() != states.layers() {
        return Err(Error::DimensionMismatch {
            expected: states.layers(),
            got: maps.len(),
        });
    }
    if let Some(m) = maps.iter().find(|m| m.r.nrows() != states.dim()) {
        return Err(Error::DimensionMismatch {
            expected: states.dim(),
            got: m.r.nrows(),
        });
    }
    Ok(())
}

/// Per-layer F1 of the thresholded decision trace at predicate tokens.
pub fn provability_probe(
    states: &HiddenStates,
    maps: &[OrthogonalMap],
    pair: &UnembeddingPair,
    truth: &[Option<bool>],
) -> Result<Vec<LayerF1>> {
    let mut acc = F1Accumulator::new(states.layers());
    acc.push(states, maps, pair, truth)?;
    Ok(acc.finish())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeSimilarity {
    pub layer: usize,
    pub type_index: u8,
    pub raw: f64,
    pub aligned: f64,
    pub count: usize,
}

/// Mean cosine between each token's state and the rows of its input types,
/// per layer and type, before and after alignment.
pub fn type_similarity(
    states: &HiddenStates,
    maps: &[OrthogonalMap],
    type_rows: &std::collections::BTreeMap<u8, Vec<f64>>,
) -> Result<Vec<TypeSimilarity>> {
    check_maps(states, maps)?;
    if states.meta.token_meta.len() != states.tokens() {
        return Err(Error::InvalidParams("type similarity needs token_meta".into()));
    }
    if let Some(row) = type_rows.values().find(|r| r.len() != states.dim()) {
        return Err(Error::DimensionMismatch {
            expected: states.dim(),
            got: row.len(),
        });
    }
    let mut out = Vec::new();
    for (layer, map) in maps.iter().enumerate() {
        let mut sums: std::collections::BTreeMap<u8, (f64, f64, usize)> = Default::default();
        for (t, meta) in states.meta.token_meta.iter().enumerate() {
            let h = states.state_f64(layer, t);
            let aligned = map.apply(&h);
            for ty in TypeSet::from_bits(meta.types).indices() {
                let Some(row) = type_rows.get(&ty) else { continue };
                let e = sums.entry(ty).or_default();
                e.0 += cosine(&h, row);
                e.1 += cosine(&aligned, row);
                e.2 += 1;
            }
        }
        for (ty, (raw, al, n)) in sums {
            out.push(TypeSimilarity {
                layer,
                type_index: ty,
                raw: raw / n as f64,
                aligned: al / n as f64,
                count: n,
            });
        }
    }
    Ok(out)
}

/// Splits example indices into a calibration part and an evaluation part.
pub fn calibration_split(n: usize, rng: &mut HfRng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let k = if n == 0 {
        0
    } else {
        ((n as f64 * CALIBRATION_FRACTION).ceil() as usize).clamp(1, n)
    };
    let eval = idx.split_off(k);
    (idx, eval)
}

/// Fits one map per layer onto the last layer from calibration examples.
///
/// At most [`CALIBRATION_MAX_TOKENS`] token vectors per layer are used, taken
/// in example order. The last layer's map is the identity.
pub fn fit_layer_maps(calibration: &[HiddenStates]) -> Result<Vec<OrthogonalMap>> {
    let first = calibration
        .first()
        .ok_or_else(|| Error::Degenerate("empty calibration set".into()))?;
    let (layers, d) = (first.layers(), first.dim());
    if let Some(h) = calibration.iter().find(|h| h.layers() != layers || h.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: layers * d,
            got: h.layers() * h.dim(),
        });
    }
    let mut tokens = Vec::new();
    'outer: for (e, h) in calibration.iter().enumerate() {
        for t in 0..h.tokens() {
            if tokens.len() == CALIBRATION_MAX_TOKENS {
                break 'outer;
            }
            tokens.push((e, t));
        }
    }
    if tokens.is_empty() {
        return Err(Error::Degenerate("calibration set has no tokens".into()));
    }
    let stack = |layer: usize| {
        DMatrix::from_fn(tokens.len(), d, |row, col| {
            let (e, t) = tokens[row];
            f64::from(calibration[e].state(layer, t)[col])
        })
    };
    let dst = stack(layers - 1);
    (0..layers)
        .map(|l| {
            if l == layers - 1 {
                Ok(OrthogonalMap::identity(d))
            } else {
                procrustes_fit(&stack(l), &dst)
            }
        })
        .collect()
}
