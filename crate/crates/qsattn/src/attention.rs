//! Quaternion self-attention, in both formulations.
//!
//! * **Shared score**: one real `T x T` score matrix from the quaternion
//!   inner product, `S = scale · Σ_p Q_p K_p^T` — four real matrix products —
//!   followed by a single row softmax whose map is applied to all four value
//!   planes.
//! * **Component-wise**: the quaternion-valued score `Q ⊗ K^T` (plain
//!   transpose), sixteen real matrix products, with an independent softmax
//!   and value product per component.
//!
//! Every kernel bumps the [`CostCounters`] it is handed, so the
//! 4-vs-16 matmul and 1-vs-4 softmax accounting is observable rather than
//! asserted.

use crate::error::{Error, Result};
use crate::layers::{qrmsnorm, QLinear, QRmsNormParams};
use crate::matrix::Mat;
use crate::tensor::{QTensor, HAMILTON_TERMS};
use serde::{Deserialize, Serialize};

/// Which score formulation a forward pass uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttnMode {
    Shared,
    Componentwise,
}

impl AttnMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttnMode::Shared => "shared",
            AttnMode::Componentwise => "componentwise",
        }
    }
}

impl std::str::FromStr for AttnMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(AttnMode::Shared),
            "componentwise" | "tay" => Ok(AttnMode::Componentwise),
            other => Err(Error::invalid(format!("unknown attention mode {other:?}"))),
        }
    }
}

/// Attention shape and scaling configuration.
///
/// `d_model` and `d_head` are quaternion dimensions; `d_model = heads * d_head`.
/// The shared score is a dot product in the expanded space `R^{4 d_head}`, so
/// it scales by `1/sqrt(4 d_head)`; the component-wise score keeps its
/// original `1/sqrt(d_head)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttnConfig {
    pub seq_len: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_head: usize,
    pub mode: AttnMode,
    pub qk_norm: bool,
    /// Conjugate the keys in the component-wise score. Off by default: the
    /// component-wise formulation is defined with a plain transpose.
    pub tay_conjugate: bool,
}

impl AttnConfig {
    pub fn new(seq_len: usize, d_model: usize, heads: usize, mode: AttnMode) -> Result<Self> {
        if seq_len == 0 || d_model == 0 || heads == 0 {
            return Err(Error::invalid(
                "seq_len, d_model and heads must be nonzero".to_string(),
            ));
        }
        if !d_model.is_multiple_of(heads) {
            return Err(Error::invalid(format!(
                "d_model {d_model} not divisible by heads {heads}"
            )));
        }
        Ok(AttnConfig {
            seq_len,
            d_model,
            heads,
            d_head: d_model / heads,
            mode,
            qk_norm: false,
            tay_conjugate: false,
        })
    }

    pub fn with_qk_norm(mut self, qk_norm: bool) -> Self {
        self.qk_norm = qk_norm;
        self
    }

    pub fn shared_scale(&self) -> f64 {
        1.0 / (4.0 * self.d_head as f64).sqrt()
    }

    pub fn tay_scale(&self) -> f64 {
        1.0 / (self.d_head as f64).sqrt()
    }

    /// The scale the configured mode applies to its score.
    pub fn score_scale(&self) -> f64 {
        match self.mode {
            AttnMode::Shared => self.shared_scale(),
            AttnMode::Componentwise => self.tay_scale(),
        }
    }
}

/// Scores produced by one head: either one real matrix or four component
/// matrices, together with the scale that was already applied.
#[derive(Debug, Clone)]
pub enum ScoreBundle {
    Shared { scores: Mat, scale: f64 },
    Componentwise { scores: [Mat; 4], scale: f64 },
}

/// Per-head projection weights, with optional query/key normalization.
#[derive(Debug, Clone)]
pub struct HeadWeights {
    pub w_q: QLinear,
    pub w_k: QLinear,
    pub w_v: QLinear,
}

#[derive(Debug, Clone)]
pub struct AttnWeights {
    pub heads: Vec<HeadWeights>,
    pub q_norm: Option<QRmsNormParams>,
    pub k_norm: Option<QRmsNormParams>,
}

impl AttnWeights {
    /// Identity projections for every head (requires `d_head == d_model`).
    pub fn identity(cfg: &AttnConfig) -> Self {
        AttnWeights {
            heads: (0..cfg.heads)
                .map(|_| HeadWeights {
                    w_q: QLinear::identity(cfg.d_model),
                    w_k: QLinear::identity(cfg.d_model),
                    w_v: QLinear::identity(cfg.d_model),
                })
                .collect(),
            q_norm: None,
            k_norm: None,
        }
    }

    /// Seeded Gaussian init with std `1/sqrt(4 d_model)`, which preserves
    /// variance through the four-plane Hamilton mix.
    pub fn random(cfg: &AttnConfig, rng: &mut crate::rng::Rng) -> Result<Self> {
        let std = 1.0 / (4.0 * cfg.d_model as f64).sqrt();
        let mut heads = Vec::with_capacity(cfg.heads);
        for _ in 0..cfg.heads {
            let shape = vec![cfg.d_model, cfg.d_head];
            heads.push(HeadWeights {
                w_q: QLinear::new(QTensor::random(shape.clone(), rng, std)?)?,
                w_k: QLinear::new(QTensor::random(shape.clone(), rng, std)?)?,
                w_v: QLinear::new(QTensor::random(shape, rng, std)?)?,
            });
        }
        let (q_norm, k_norm) = if cfg.qk_norm {
            (
                Some(QRmsNormParams::ones(cfg.d_head)),
                Some(QRmsNormParams::ones(cfg.d_head)),
            )
        } else {
            (None, None)
        };
        Ok(AttnWeights {
            heads,
            q_norm,
            k_norm,
        })
    }
}

/// Observed operation counts. `score_matmuls` counts real plane-pair matrix
/// products in the score stage (4 per shared head, 16 per component-wise
/// head); `softmax_calls` counts row-softmax invocations over `T x T`
/// matrices (1 vs 4 per head).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    pub score_matmuls: u64,
    pub softmax_calls: u64,
    pub av_matmuls: u64,
    pub projection_matmuls: u64,
}

fn check_qk(q: &QTensor, k: &QTensor) -> Result<(usize, usize, usize)> {
    let (tq, dq) = match q.shape() {
        [t, d] => (*t, *d),
        other => return Err(Error::shape(format!("query must be 2-D, got {other:?}"))),
    };
    let (tk, dk) = match k.shape() {
        [t, d] => (*t, *d),
        other => return Err(Error::shape(format!("key must be 2-D, got {other:?}"))),
    };
    if dq != dk {
        return Err(Error::shape(format!(
            "query dim {dq} does not match key dim {dk}"
        )));
    }
    Ok((tq, tk, dq))
}

/// Shared real-valued score: `scale · (Q0 K0^T + Q1 K1^T + Q2 K2^T + Q3 K3^T)`.
/// Exactly four real matrix products; entrywise equal to
/// `scale · Re(Q ⊗ K†)`.
pub fn shared_score(q: &QTensor, k: &QTensor, scale: f64) -> Result<Mat> {
    shared_score_counted(q, k, scale, &mut CostCounters::default())
}

pub fn shared_score_counted(
    q: &QTensor,
    k: &QTensor,
    scale: f64,
    counters: &mut CostCounters,
) -> Result<Mat> {
    let (tq, tk, _) = check_qk(q, k)?;
    let mut s = Mat::zeros(tq, tk);
    for plane in 0..4 {
        let qp = q.plane_as_mat(plane)?;
        let kp = k.plane_as_mat(plane)?;
        qp.matmul_acc_into(&kp, true, scale, &mut s)?;
        counters.score_matmuls += 1;
    }
    Ok(s)
}

/// Component-wise quaternion score `scale · (Q ⊗ K^T)` as four real
/// matrices. Sixteen real matrix products with the Hamilton signs.
pub fn tay_score(q: &QTensor, k: &QTensor, scale: f64) -> Result<[Mat; 4]> {
    tay_score_counted(q, k, scale, false, &mut CostCounters::default())
}

/// Variant that conjugates the keys (`Q ⊗ K†`). The component-0 matrix then
/// coincides with the shared score; the imaginary components flip signs.
pub fn tay_score_conjugated(q: &QTensor, k: &QTensor, scale: f64) -> Result<[Mat; 4]> {
    tay_score_counted(q, k, scale, true, &mut CostCounters::default())
}

pub fn tay_score_counted(
    q: &QTensor,
    k: &QTensor,
    scale: f64,
    conjugate: bool,
    counters: &mut CostCounters,
) -> Result<[Mat; 4]> {
    let (tq, tk, _) = check_qk(q, k)?;
    let qp: Vec<Mat> = (0..4).map(|i| q.plane_as_mat(i).unwrap()).collect();
    let kp: Vec<Mat> = (0..4).map(|i| k.plane_as_mat(i).unwrap()).collect();
    let mut out: Vec<Mat> = (0..4).map(|_| Mat::zeros(tq, tk)).collect();
    for (alpha, terms) in HAMILTON_TERMS.iter().enumerate() {
        for &(mu, nu, sign) in terms {
            // Conjugation negates the imaginary key planes before the product.
            let sign = if conjugate && nu != 0 { -sign } else { sign };
            qp[mu].matmul_acc_into(&kp[nu], true, sign * scale, &mut out[alpha])?;
            counters.score_matmuls += 1;
        }
    }
    Ok([
        out.remove(0),
        out.remove(0),
        out.remove(0),
        out.remove(0),
    ])
}

/// Row-wise softmax with row-max subtraction. Every output row is
/// nonnegative and sums to one.
pub fn softmax_rows(s: &Mat) -> Mat {
    softmax_rows_counted(s, &mut CostCounters::default())
}

pub fn softmax_rows_counted(s: &Mat, counters: &mut CostCounters) -> Mat {
    counters.softmax_calls += 1;
    let mut out = s.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = 1.0 / sum;
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    out
}

fn apply_map_to_planes(a: &Mat, v: &QTensor, counters: &mut CostCounters) -> Result<QTensor> {
    let planes: Vec<Mat> = (0..4)
        .map(|i| {
            counters.av_matmuls += 1;
            a.matmul(&v.plane_as_mat(i)?)
        })
        .collect::<Result<Vec<_>>>()?;
    QTensor::from_plane_mats([
        planes[0].clone(),
        planes[1].clone(),
        planes[2].clone(),
        planes[3].clone(),
    ])
}

/// Shared-score attention: one attention map drives all four value planes.
pub fn shared_attention(q: &QTensor, k: &QTensor, v: &QTensor, scale: f64) -> Result<QTensor> {
    shared_attention_counted(q, k, v, scale, &mut CostCounters::default())
}

pub fn shared_attention_counted(
    q: &QTensor,
    k: &QTensor,
    v: &QTensor,
    scale: f64,
    counters: &mut CostCounters,
) -> Result<QTensor> {
    let (_, tk, _) = check_qk(q, k)?;
    if v.ndim() != 2 || v.shape()[0] != tk {
        return Err(Error::shape(format!(
            "value shape {:?} does not match key rows {tk}",
            v.shape()
        )));
    }
    let s = shared_score_counted(q, k, scale, counters)?;
    let a = softmax_rows_counted(&s, counters);
    apply_map_to_planes(&a, v, counters)
}

/// Component-wise attention: independent softmax and value product per
/// quaternion component.
pub fn tay_attention(q: &QTensor, k: &QTensor, v: &QTensor, scale: f64) -> Result<QTensor> {
    tay_attention_counted(q, k, v, scale, false, &mut CostCounters::default())
}

pub fn tay_attention_counted(
    q: &QTensor,
    k: &QTensor,
    v: &QTensor,
    scale: f64,
    conjugate: bool,
    counters: &mut CostCounters,
) -> Result<QTensor> {
    let (tq, tk, _) = check_qk(q, k)?;
    if v.ndim() != 2 || v.shape()[0] != tk {
        return Err(Error::shape(format!(
            "value shape {:?} does not match key rows {tk}",
            v.shape()
        )));
    }
    let scores = tay_score_counted(q, k, scale, conjugate, counters)?;
    let d_v = v.shape()[1];
    let mut planes = Vec::with_capacity(4);
    for (alpha, s_alpha) in scores.iter().enumerate() {
        let a_alpha = softmax_rows_counted(s_alpha, counters);
        counters.av_matmuls += 1;
        planes.push(a_alpha.matmul(&v.plane_as_mat(alpha)?)?);
    }
    debug_assert_eq!(planes[0].rows(), tq);
    debug_assert_eq!(planes[0].cols(), d_v);
    QTensor::from_plane_mats([
        planes[0].clone(),
        planes[1].clone(),
        planes[2].clone(),
        planes[3].clone(),
    ])
}

/// Multi-head forward: per head, project Q/K/V with quaternion linear
/// layers, optionally RMS-normalize queries and keys, run the configured
/// attention, then concatenate head outputs along the feature axis.
/// No output projection.
pub fn mha_forward(x: &QTensor, weights: &AttnWeights, cfg: &AttnConfig) -> Result<QTensor> {
    mha_forward_counted(x, weights, cfg, &mut CostCounters::default())
}

pub fn mha_forward_counted(
    x: &QTensor,
    weights: &AttnWeights,
    cfg: &AttnConfig,
    counters: &mut CostCounters,
) -> Result<QTensor> {
    if cfg.d_model != cfg.heads * cfg.d_head {
        return Err(Error::invalid(format!(
            "d_model {} != heads {} * d_head {}",
            cfg.d_model, cfg.heads, cfg.d_head
        )));
    }
    if x.ndim() != 2 || x.shape()[1] != cfg.d_model {
        return Err(Error::shape(format!(
            "input shape {:?}, expected [T, {}]",
            x.shape(),
            cfg.d_model
        )));
    }
    if weights.heads.len() != cfg.heads {
        return Err(Error::invalid(format!(
            "{} head weights for {} heads",
            weights.heads.len(),
            cfg.heads
        )));
    }

    let mut outputs = Vec::with_capacity(cfg.heads);
    for head in &weights.heads {
        let mut q = head.w_q.forward(x)?;
        let mut k = head.w_k.forward(x)?;
        let v = head.w_v.forward(x)?;
        // Each quaternion linear projection is 16 real matrix products.
        counters.projection_matmuls += 48;
        if let Some(params) = &weights.q_norm {
            q = qrmsnorm(&q, params)?;
        }
        if let Some(params) = &weights.k_norm {
            k = qrmsnorm(&k, params)?;
        }
        let out = match cfg.mode {
            AttnMode::Shared => {
                shared_attention_counted(&q, &k, &v, cfg.shared_scale(), counters)?
            }
            AttnMode::Componentwise => tay_attention_counted(
                &q,
                &k,
                &v,
                cfg.tay_scale(),
                cfg.tay_conjugate,
                counters,
            )?,
        };
        outputs.push(out);
    }
    QTensor::concat_cols(&outputs)
}
