//! Fixed-weight transformer decoder forward pass.
//!
//! Each block runs multi-head self-attention over the joint proposal set
//! (objects and quads concatenated) followed by cross-attention against the
//! context point features, with residual connections around both. The
//! output projections are affine layers with inference-mode normalization
//! and a ReLU, so with all-zero weights every block is the identity.
//!
//! A position encoding is added to the attention queries of every block.
//! It is a fixed linear map of an 8-wide parameter vector per proposal:
//! block 1 uses the raw proposal position (padded with zeros), later blocks
//! use a per-kind linear readout of the previous block's features whose
//! first three components are added to the proposal position.

use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::proposals::ProposalSet;

/// Width of the decoded parameter vector feeding the position encoding.
pub const PARAM_DIM: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum DecoderError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch { what: String, expected: String, got: String },
    #[error("feature width {d} not divisible by {heads} heads")]
    BadHeads { d: usize, heads: usize },
}

fn shape_err(what: &str, expected: String, got: String) -> DecoderError {
    DecoderError::ShapeMismatch { what: what.to_string(), expected, got }
}

/// Decoder layout: number of blocks, feature width and head count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    pub blocks: usize,
    pub d: usize,
    pub heads: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig { blocks: 6, d: 256, heads: 8 }
    }
}

/// y = x W + b.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearLayer {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        LinearLayer { weight: Array2::zeros((d_in, d_out)), bias: Array1::zeros(d_out) }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>, DecoderError> {
        if x.ncols() != self.weight.nrows() {
            return Err(shape_err(
                "linear input",
                format!("n x {}", self.weight.nrows()),
                format!("n x {}", x.ncols()),
            ));
        }
        Ok(x.dot(&self.weight) + &self.bias)
    }
}

/// Inference-mode normalization: y = (x - mean) / std * scale + shift,
/// applied per feature column with loadable statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NormLayer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
}

impl NormLayer {
    pub fn identity(d: usize) -> Self {
        NormLayer {
            mean: Array1::zeros(d),
            std: Array1::ones(d),
            scale: Array1::ones(d),
            shift: Array1::zeros(d),
        }
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for j in 0..row.len() {
                row[j] = (row[j] - self.mean[j]) / self.std[j] * self.scale[j] + self.shift[j];
            }
        }
        out
    }
}

/// Output projection of an attention layer: ReLU(norm(x W + b)).
#[derive(Debug, Clone, PartialEq)]
pub struct ProjLayer {
    pub linear: LinearLayer,
    pub norm: NormLayer,
}

impl ProjLayer {
    pub fn zeros(d: usize) -> Self {
        ProjLayer { linear: LinearLayer::zeros(d, d), norm: NormLayer::identity(d) }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>, DecoderError> {
        let mut y = self.norm.apply(&self.linear.apply(x)?);
        y.mapv_inplace(|v| v.max(0.0));
        Ok(y)
    }
}

/// Q/K/V projections of one attention layer. Columns chunk into heads.
#[derive(Debug, Clone, PartialEq)]
pub struct MhaWeights {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
}

/// Weights of one decoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub self_attn: MhaWeights,
    pub p_sa: ProjLayer,
    pub cross_attn: MhaWeights,
    pub p_ca: ProjLayer,
}

/// All decoder weights plus the position-encoding maps.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub d: usize,
    /// Width of the context point features used as cross-attention keys.
    pub d_points: usize,
    pub heads: usize,
    pub blocks: Vec<BlockParams>,
    /// Per-kind readout of decoded parameters, d -> PARAM_DIM.
    pub object_param_head: LinearLayer,
    pub quad_param_head: LinearLayer,
    /// PARAM_DIM -> d map producing the additive query encoding.
    pub pos_encoding: LinearLayer,
}

impl AttentionParams {
    /// All-zero projections: the decoder becomes the identity on features.
    pub fn zeros(cfg: &DecoderConfig, d_points: usize) -> Self {
        let d = cfg.d;
        let block = || BlockParams {
            self_attn: MhaWeights {
                wq: Array2::zeros((d, d)),
                wk: Array2::zeros((d, d)),
                wv: Array2::zeros((d, d)),
            },
            p_sa: ProjLayer::zeros(d),
            cross_attn: MhaWeights {
                wq: Array2::zeros((d, d)),
                wk: Array2::zeros((d_points, d)),
                wv: Array2::zeros((d_points, d)),
            },
            p_ca: ProjLayer::zeros(d),
        };
        AttentionParams {
            d,
            d_points,
            heads: cfg.heads,
            blocks: (0..cfg.blocks).map(|_| block()).collect(),
            object_param_head: LinearLayer::zeros(d, PARAM_DIM),
            quad_param_head: LinearLayer::zeros(d, PARAM_DIM),
            pos_encoding: LinearLayer::zeros(PARAM_DIM, d),
        }
    }

    /// Random weights drawn from N(0, 1/sqrt(fan_in)), seeded.
    pub fn random(cfg: &DecoderConfig, d_points: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |r: usize, c: usize| {
            let dist = Normal::new(0.0, 1.0 / (r as f64).sqrt()).unwrap();
            Array2::from_shape_fn((r, c), |_| dist.sample(&mut rng))
        };
        let d = cfg.d;
        let mut blocks = Vec::with_capacity(cfg.blocks);
        for _ in 0..cfg.blocks {
            blocks.push(BlockParams {
                self_attn: MhaWeights { wq: mat(d, d), wk: mat(d, d), wv: mat(d, d) },
                p_sa: ProjLayer {
                    linear: LinearLayer { weight: mat(d, d), bias: Array1::zeros(d) },
                    norm: NormLayer::identity(d),
                },
                cross_attn: MhaWeights {
                    wq: mat(d, d),
                    wk: mat(d_points, d),
                    wv: mat(d_points, d),
                },
                p_ca: ProjLayer {
                    linear: LinearLayer { weight: mat(d, d), bias: Array1::zeros(d) },
                    norm: NormLayer::identity(d),
                },
            });
        }
        AttentionParams {
            d,
            d_points,
            heads: cfg.heads,
            blocks,
            object_param_head: LinearLayer {
                weight: mat(d, PARAM_DIM),
                bias: Array1::zeros(PARAM_DIM),
            },
            quad_param_head: LinearLayer {
                weight: mat(d, PARAM_DIM),
                bias: Array1::zeros(PARAM_DIM),
            },
            pos_encoding: LinearLayer { weight: mat(PARAM_DIM, d), bias: Array1::zeros(d) },
        }
    }

    fn validate(&self, cfg: &DecoderConfig) -> Result<(), DecoderError> {
        if cfg.d % cfg.heads != 0 {
            return Err(DecoderError::BadHeads { d: cfg.d, heads: cfg.heads });
        }
        if self.blocks.len() != cfg.blocks || self.d != cfg.d || self.heads != cfg.heads {
            return Err(shape_err(
                "params",
                format!("{} blocks, d = {}, heads = {}", cfg.blocks, cfg.d, cfg.heads),
                format!("{} blocks, d = {}, heads = {}", self.blocks.len(), self.d, self.heads),
            ));
        }
        let expect = |what: &str, a: &Array2<f64>, r: usize, c: usize| {
            if a.nrows() != r || a.ncols() != c {
                Err(shape_err(what, format!("{r} x {c}"), format!("{} x {}", a.nrows(), a.ncols())))
            } else {
                Ok(())
            }
        };
        for (i, b) in self.blocks.iter().enumerate() {
            expect(&format!("block{i}.self.wq"), &b.self_attn.wq, cfg.d, cfg.d)?;
            expect(&format!("block{i}.self.wk"), &b.self_attn.wk, cfg.d, cfg.d)?;
            expect(&format!("block{i}.self.wv"), &b.self_attn.wv, cfg.d, cfg.d)?;
            expect(&format!("block{i}.self.proj"), &b.p_sa.linear.weight, cfg.d, cfg.d)?;
            expect(&format!("block{i}.cross.wq"), &b.cross_attn.wq, cfg.d, cfg.d)?;
            expect(&format!("block{i}.cross.wk"), &b.cross_attn.wk, self.d_points, cfg.d)?;
            expect(&format!("block{i}.cross.wv"), &b.cross_attn.wv, self.d_points, cfg.d)?;
            expect(&format!("block{i}.cross.proj"), &b.p_ca.linear.weight, cfg.d, cfg.d)?;
        }
        expect("param_head.object", &self.object_param_head.weight, cfg.d, PARAM_DIM)?;
        expect("param_head.quad", &self.quad_param_head.weight, cfg.d, PARAM_DIM)?;
        expect("pos_encoding", &self.pos_encoding.weight, PARAM_DIM, cfg.d)?;
        Ok(())
    }
}

/// Row-wise softmax with max subtraction for numerical stability.
fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Scaled dot-product attention: softmax(Q K^T / sqrt(d)) V.
pub fn attention(
    q: &Array2<f64>,
    k: &Array2<f64>,
    v: &Array2<f64>,
) -> Result<Array2<f64>, DecoderError> {
    if q.ncols() != k.ncols() {
        return Err(shape_err(
            "attention q/k",
            format!("n x {}", q.ncols()),
            format!("n x {}", k.ncols()),
        ));
    }
    if k.nrows() != v.nrows() {
        return Err(shape_err(
            "attention k/v",
            format!("{} rows", k.nrows()),
            format!("{} rows", v.nrows()),
        ));
    }
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let mut a = q.dot(&k.t()) * scale;
    softmax_rows(&mut a);
    Ok(a.dot(v))
}

/// Multi-head attention over projected inputs; heads are column chunks,
/// their outputs concatenate back to width d.
fn multi_head(
    q_in: &Array2<f64>,
    k_in: &Array2<f64>,
    v_in: &Array2<f64>,
    w: &MhaWeights,
    heads: usize,
) -> Result<Array2<f64>, DecoderError> {
    let q = q_in.dot(&w.wq);
    let k = k_in.dot(&w.wk);
    let v = v_in.dot(&w.wv);
    let d = q.ncols();
    if d % heads != 0 {
        return Err(DecoderError::BadHeads { d, heads });
    }
    let dh = d / heads;
    let mut out = Array2::zeros((q.nrows(), d));
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let oh = attention(
            &q.slice(cols).to_owned(),
            &k.slice(cols).to_owned(),
            &v.slice(cols).to_owned(),
        )?;
        out.slice_mut(cols).assign(&oh);
    }
    Ok(out)
}

fn check_width(what: &str, x: &Array2<f64>, d: usize) -> Result<(), DecoderError> {
    if x.ncols() != d {
        return Err(shape_err(what, format!("n x {d}"), format!("n x {}", x.ncols())));
    }
    Ok(())
}

/// One self-attention layer with residual: P_sa(A V) + f_c.
pub fn self_attention_block(
    f_c: &Array2<f64>,
    block: &BlockParams,
    heads: usize,
) -> Result<Array2<f64>, DecoderError> {
    check_width("self-attention input", f_c, block.self_attn.wq.nrows())?;
    let av = multi_head(f_c, f_c, f_c, &block.self_attn, heads)?;
    Ok(block.p_sa.apply(&av)? + f_c)
}

/// One cross-attention layer with residual: queries from the proposals,
/// keys and values from the context point features.
pub fn cross_attention_block(
    f_sa: &Array2<f64>,
    f_p: &Array2<f64>,
    block: &BlockParams,
    heads: usize,
) -> Result<Array2<f64>, DecoderError> {
    check_width("cross-attention query input", f_sa, block.cross_attn.wq.nrows())?;
    check_width("cross-attention key input", f_p, block.cross_attn.wk.nrows())?;
    let av = multi_head(f_sa, f_p, f_p, &block.cross_attn, heads)?;
    Ok(block.p_ca.apply(&av)? + f_sa)
}

/// Decoded parameter vectors for the position encoding: a per-kind linear
/// readout of the features, with the first three components shifted by the
/// proposal positions. With `features = None` (block 1) the readout is
/// zero and the vector is just the padded position.
fn decoded_params(
    features: Option<&Array2<f64>>,
    bases: &[crate::geom::Vec3],
    k1: usize,
    params: &AttentionParams,
) -> Result<Array2<f64>, DecoderError> {
    let k = bases.len();
    let mut p = match features {
        Some(f) => {
            let obj = params.object_param_head.apply(&f.slice(s![..k1, ..]).to_owned())?;
            let quad = params.quad_param_head.apply(&f.slice(s![k1.., ..]).to_owned())?;
            let mut p = Array2::zeros((k, PARAM_DIM));
            p.slice_mut(s![..k1, ..]).assign(&obj);
            p.slice_mut(s![k1.., ..]).assign(&quad);
            p
        }
        None => Array2::zeros((k, PARAM_DIM)),
    };
    for (i, b) in bases.iter().enumerate() {
        p[[i, 0]] += b.x;
        p[[i, 1]] += b.y;
        p[[i, 2]] += b.z;
    }
    Ok(p)
}

/// Full decoder forward pass over the joint proposal set. Returns one
/// feature set per block, each of shape (K1 + K2) x d with object rows
/// first.
pub fn decoder_forward(
    obj: &ProposalSet,
    quad: &ProposalSet,
    f_p: &Array2<f64>,
    params: &AttentionParams,
    cfg: &DecoderConfig,
) -> Result<Vec<Array2<f64>>, DecoderError> {
    params.validate(cfg)?;
    check_width("object proposal features", &obj.features, cfg.d)?;
    check_width("quad proposal features", &quad.features, cfg.d)?;
    check_width("point features", f_p, params.d_points)?;
    let k1 = obj.positions.len();
    let k2 = quad.positions.len();
    let mut f = Array2::zeros((k1 + k2, cfg.d));
    f.slice_mut(s![..k1, ..]).assign(&obj.features);
    f.slice_mut(s![k1.., ..]).assign(&quad.features);
    let bases: Vec<crate::geom::Vec3> =
        obj.positions.iter().chain(quad.positions.iter()).copied().collect();

    let mut outputs = Vec::with_capacity(cfg.blocks);
    for (bi, block) in params.blocks.iter().enumerate() {
        let prev = if bi == 0 { None } else { Some(&f) };
        let p = decoded_params(prev, &bases, k1, params)?;
        let pe = params.pos_encoding.apply(&p)?;

        let q_in = &f + &pe;
        let av = multi_head(&q_in, &f, &f, &block.self_attn, cfg.heads)?;
        let f_sa = block.p_sa.apply(&av)? + &f;

        let q_in2 = &f_sa + &pe;
        let av = multi_head(&q_in2, f_p, f_p, &block.cross_attn, cfg.heads)?;
        let f_ca = block.p_ca.apply(&av)? + &f_sa;

        outputs.push(f_ca.clone());
        f = f_ca;
    }
    Ok(outputs)
}
