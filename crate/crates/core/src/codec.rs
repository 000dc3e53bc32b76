//! Encode and decode prediction-head output vectors.
//!
//! An object vector is laid out as
//! `[objectness(2) | center(3) | heading bin logits(H) | heading residuals(H)
//!   | size bin logits(S) | size residuals(3S, (w, l, h) per bin) | class logits(C)]`.
//! A quad vector is
//! `[quadness(2) | center(3) | log width | log height | normal(3)]`.
//!
//! Sizes decode as `prior * (1 + residual)` (clamped away from zero) and
//! quad extents as `exp(value)`, so decoding inverts encoding exactly on
//! valid geometry and produces strictly positive extents for any finite
//! input.

use thiserror::Error;

use crate::geom::{GeomError, OrientedBox, Quad, Vec3};

/// Logit magnitude used for one-hot entries in encoded target vectors.
const TARGET_LOGIT: f64 = 30.0;

/// Floor applied to the (1 + residual) size factor when decoding.
const MIN_SIZE_FACTOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("decoded normal vector is degenerate (|n| = {0:.3e})")]
    DegenerateNormal(f64),
    #[error("class id {class_id} out of range for {classes} classes")]
    ClassOutOfRange { class_id: usize, classes: usize },
    #[error("decoded geometry invalid: {0}")]
    InvalidGeometry(#[from] GeomError),
}

/// Object class vocabulary of the synthetic scenes with nominal
/// (w, l, h) extents in meters, used as default size priors.
pub const DEFAULT_CLASS_SPECS: [(&str, (f64, f64, f64)); 18] = [
    ("bathtub", (0.8, 1.6, 0.6)),
    ("bed", (1.5, 2.0, 0.6)),
    ("bookshelf", (0.3, 0.9, 1.8)),
    ("cabinet", (0.5, 1.0, 1.0)),
    ("chair", (0.5, 0.5, 0.9)),
    ("counter", (0.6, 1.5, 0.9)),
    ("curtain", (0.15, 1.5, 2.0)),
    ("desk", (0.7, 1.3, 0.75)),
    ("door", (0.12, 0.9, 2.0)),
    ("garbagebin", (0.35, 0.35, 0.5)),
    ("picture", (0.12, 0.8, 0.6)),
    ("refrigerator", (0.7, 0.7, 1.7)),
    ("showercurtain", (0.12, 1.2, 1.8)),
    ("sink", (0.5, 0.5, 0.3)),
    ("sofa", (0.9, 1.9, 0.8)),
    ("table", (0.8, 1.4, 0.75)),
    ("toilet", (0.4, 0.6, 0.75)),
    ("window", (0.12, 1.2, 1.2)),
];

/// Prediction-head layout: bin counts, class vocabulary and size priors.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadConfig {
    pub heading_bins: usize,
    pub size_bins: usize,
    pub classes: usize,
    pub size_priors: Vec<(f64, f64, f64)>,
    pub class_names: Vec<String>,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            heading_bins: 12,
            size_bins: DEFAULT_CLASS_SPECS.len(),
            classes: DEFAULT_CLASS_SPECS.len(),
            size_priors: DEFAULT_CLASS_SPECS.iter().map(|(_, s)| *s).collect(),
            class_names: DEFAULT_CLASS_SPECS.iter().map(|(n, _)| n.to_string()).collect(),
        }
    }
}

impl HeadConfig {
    /// Length of an object prediction vector under this layout.
    pub fn object_vector_len(&self) -> usize {
        2 + 3 + 2 * self.heading_bins + 4 * self.size_bins + self.classes
    }

    /// Length of a quad prediction vector (layout-independent).
    pub fn quad_vector_len(&self) -> usize {
        10
    }
}

/// Decoded object: raw objectness logits, the box, and class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectPrediction {
    pub objectness: [f64; 2],
    pub box_: OrientedBox,
    pub class_scores: Vec<f64>,
}

/// Decoded quad: raw quadness logits, the quad, and its confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadPrediction {
    pub quadness: [f64; 2],
    pub quad: Quad,
    pub score: f64,
}

/// Encoded regression target plus the bin labels used by classification
/// losses.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTarget {
    pub vector: Vec<f64>,
    pub heading_bin: usize,
    pub size_bin: usize,
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

/// Decode an object prediction vector relative to its proposal position.
pub fn decode_object(
    v: &[f64],
    base: Vec3,
    cfg: &HeadConfig,
) -> Result<ObjectPrediction, CodecError> {
    let expected = cfg.object_vector_len();
    if v.len() != expected {
        return Err(CodecError::LengthMismatch { expected, got: v.len() });
    }
    let h = cfg.heading_bins;
    let s = cfg.size_bins;
    let objectness = [v[0], v[1]];
    let score = softmax(&objectness)[1];
    let center = base + Vec3::new(v[2], v[3], v[4]);

    let heading_logits = &v[5..5 + h];
    let hb = argmax(heading_logits);
    let heading = hb as f64 * 2.0 * std::f64::consts::PI / h as f64 + v[5 + h + hb];

    let size_logits = &v[5 + 2 * h..5 + 2 * h + s];
    let sb = argmax(size_logits);
    let res = &v[5 + 2 * h + s + 3 * sb..5 + 2 * h + s + 3 * sb + 3];
    let prior = cfg.size_priors[sb];
    let size = (
        prior.0 * (1.0 + res[0]).max(MIN_SIZE_FACTOR),
        prior.1 * (1.0 + res[1]).max(MIN_SIZE_FACTOR),
        prior.2 * (1.0 + res[2]).max(MIN_SIZE_FACTOR),
    );

    let class_scores = softmax(&v[5 + 2 * h + 4 * s..]);
    let class_id = argmax(&class_scores);
    let box_ = OrientedBox::new(center, size, heading, class_id, score)?;
    Ok(ObjectPrediction { objectness, box_, class_scores })
}

/// Decode a quad prediction vector relative to its proposal position.
pub fn decode_quad(v: &[f64], base: Vec3) -> Result<QuadPrediction, CodecError> {
    if v.len() != 10 {
        return Err(CodecError::LengthMismatch { expected: 10, got: v.len() });
    }
    let quadness = [v[0], v[1]];
    let score = softmax(&quadness)[1];
    let center = base + Vec3::new(v[2], v[3], v[4]);
    let width = v[5].exp();
    let height = v[6].exp();
    let raw = Vec3::new(v[7], v[8], v[9]);
    if raw.norm() < 1e-6 {
        return Err(CodecError::DegenerateNormal(raw.norm()));
    }
    let quad = Quad::new(center, width, height, raw)?;
    Ok(QuadPrediction { quadness, quad, score })
}

/// Inverse of the deterministic parts of `decode_object`: nearest heading
/// bin with wrapped residual, nearest size prior with multiplicative
/// residual, one-hot logits of magnitude 30.
pub fn encode_object_target(
    gt: &OrientedBox,
    base: Vec3,
    cfg: &HeadConfig,
) -> Result<ObjectTarget, CodecError> {
    if gt.class_id >= cfg.classes {
        return Err(CodecError::ClassOutOfRange { class_id: gt.class_id, classes: cfg.classes });
    }
    let h = cfg.heading_bins;
    let s = cfg.size_bins;
    let mut v = vec![0.0; cfg.object_vector_len()];
    v[1] = TARGET_LOGIT;
    let offset = gt.center - base;
    v[2] = offset.x;
    v[3] = offset.y;
    v[4] = offset.z;

    let step = 2.0 * std::f64::consts::PI / h as f64;
    let wrapped = gt.heading.rem_euclid(2.0 * std::f64::consts::PI);
    let bin_round = (wrapped / step).round();
    let residual = wrapped - bin_round * step;
    let heading_bin = bin_round as usize % h;
    v[5 + heading_bin] = TARGET_LOGIT;
    v[5 + h + heading_bin] = residual;

    let mut size_bin = 0;
    let mut best = f64::INFINITY;
    for (i, p) in cfg.size_priors.iter().enumerate() {
        let d = (gt.size.0 - p.0).powi(2) + (gt.size.1 - p.1).powi(2) + (gt.size.2 - p.2).powi(2);
        if d < best {
            best = d;
            size_bin = i;
        }
    }
    let prior = cfg.size_priors[size_bin];
    v[5 + 2 * h + size_bin] = TARGET_LOGIT;
    let base_idx = 5 + 2 * h + s + 3 * size_bin;
    v[base_idx] = gt.size.0 / prior.0 - 1.0;
    v[base_idx + 1] = gt.size.1 / prior.1 - 1.0;
    v[base_idx + 2] = gt.size.2 / prior.2 - 1.0;

    v[5 + 2 * h + 4 * s + gt.class_id] = TARGET_LOGIT;
    Ok(ObjectTarget { vector: v, heading_bin, size_bin })
}

/// Inverse of `decode_quad` on valid quads: log extents, unit normal, and
/// a positive quadness logit.
pub fn encode_quad_target(gt: &Quad, base: Vec3) -> Vec<f64> {
    let offset = gt.center() - base;
    let n = gt.normal();
    vec![
        0.0,
        TARGET_LOGIT,
        offset.x,
        offset.y,
        offset.z,
        gt.width().ln(),
        gt.height().ln(),
        n.x,
        n.y,
        n.z,
    ]
}
