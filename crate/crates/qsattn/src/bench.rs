//! Analytic MACs model and wall-clock microbenchmark harness.
//!
//! MACs convention: per head, the score stage costs `4 · T² · d_head` real
//! multiply-accumulates in shared mode and `16 · T² · d_head` in
//! component-wise mode; the attention-times-value stage costs `4 · T² ·
//! d_head` in both. The default total counts the score and AV stages only —
//! under that convention the totals for `D_model=64, H=8` reproduce the
//! published per-layer MACs at every sequence length — and the quaternion
//! projections (`3 · 16 · T · d_model · d_head` per head) can be included
//! with a flag. Softmax invocations are counted separately, not as MACs.
//!
//! Timing uses a monotonic clock, batch size 1, inputs generated once per
//! configuration and reused across repetitions, single worker. `f64` is the
//! default dtype; an `f32` mode exists here (and only here) to mirror
//! single-precision deployments.

use crate::attention::{
    mha_forward_counted, AttnConfig, AttnMode, AttnWeights, CostCounters,
};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{QTensor, HAMILTON_TERMS};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Closed-form operation counts for one attention layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacsBreakdown {
    pub projections: u64,
    pub score_stage: u64,
    pub av_stage: u64,
    pub softmax_ops: u64,
    /// Real multiplications per quaternion query-key pair: 4 or 16.
    pub score_muls_per_pair: u64,
    pub include_projections: bool,
    pub total: u64,
}

pub fn macs_model(cfg: &AttnConfig, include_projections: bool) -> Result<MacsBreakdown> {
    if cfg.seq_len == 0 || cfg.d_model == 0 || cfg.heads == 0 || cfg.d_head == 0 {
        return Err(Error::invalid("macs model needs nonzero dims".to_string()));
    }
    let t = cfg.seq_len as u64;
    let d_model = cfg.d_model as u64;
    let d_head = cfg.d_head as u64;
    let heads = cfg.heads as u64;

    let (per_pair, softmax_per_head) = match cfg.mode {
        AttnMode::Shared => (4u64, 1u64),
        AttnMode::Componentwise => (16u64, 4u64),
    };
    let projections = heads * 3 * 16 * t * d_model * d_head;
    let score_stage = heads * per_pair * t * t * d_head;
    let av_stage = heads * 4 * t * t * d_head;
    let softmax_ops = heads * softmax_per_head;
    let total = score_stage
        + av_stage
        + if include_projections { projections } else { 0 };

    Ok(MacsBreakdown {
        projections,
        score_stage,
        av_stage,
        softmax_ops,
        score_muls_per_pair: per_pair,
        include_projections,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchDtype {
    F64,
    F32,
}

impl BenchDtype {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchDtype::F64 => "f64",
            BenchDtype::F32 => "f32",
        }
    }
}

impl std::str::FromStr for BenchDtype {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f64" => Ok(BenchDtype::F64),
            "f32" => Ok(BenchDtype::F32),
            other => Err(Error::invalid(format!("unknown dtype {other:?}"))),
        }
    }
}

/// Median latency of one full forward pass (projections + score + softmax +
/// AV) at a fixed configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingResult {
    pub mode: AttnMode,
    pub seq_len: usize,
    pub d_model: usize,
    pub heads: usize,
    pub dtype: BenchDtype,
    pub warmup: usize,
    pub reps: usize,
    pub median_ms: f64,
    /// Median absolute deviation of the per-repetition times.
    pub dispersion_ms: f64,
    /// Operation counts observed during one instrumented forward.
    pub counters: CostCounters,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn median_and_mad(samples: &[f64]) -> (f64, f64) {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = median(&sorted);
    let mut devs: Vec<f64> = sorted.iter().map(|x| (x - med).abs()).collect();
    devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (med, median(&devs))
}

pub fn time_attention(
    cfg: &AttnConfig,
    warmup: usize,
    reps: usize,
    dtype: BenchDtype,
    seed: u64,
) -> Result<TimingResult> {
    if warmup < 1 || reps < 1 {
        return Err(Error::invalid(format!(
            "warmup and reps must be >= 1, got {warmup}/{reps}"
        )));
    }
    let (samples, counters) = match dtype {
        BenchDtype::F64 => time_f64(cfg, warmup, reps, seed)?,
        BenchDtype::F32 => time_f32(cfg, warmup, reps, seed)?,
    };
    let (median_ms, mad_ms) = median_and_mad(&samples);
    Ok(TimingResult {
        mode: cfg.mode,
        seq_len: cfg.seq_len,
        d_model: cfg.d_model,
        heads: cfg.heads,
        dtype,
        warmup,
        reps,
        median_ms,
        dispersion_ms: mad_ms,
        counters,
    })
}

fn time_f64(
    cfg: &AttnConfig,
    warmup: usize,
    reps: usize,
    seed: u64,
) -> Result<(Vec<f64>, CostCounters)> {
    let mut rng = Rng::with_stream(seed, 0xBE);
    let x = QTensor::random(vec![cfg.seq_len, cfg.d_model], &mut rng, 1.0)?;
    let weights = AttnWeights::random(cfg, &mut rng)?;

    let mut counters = CostCounters::default();
    let out = mha_forward_counted(&x, &weights, cfg, &mut counters)?;
    std::hint::black_box(out.plane(0)[0]);

    for _ in 0..warmup.saturating_sub(1) {
        let out = mha_forward_counted(&x, &weights, cfg, &mut CostCounters::default())?;
        std::hint::black_box(out.plane(0)[0]);
    }

    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let out = mha_forward_counted(&x, &weights, cfg, &mut CostCounters::default())?;
        std::hint::black_box(out.plane(0)[0]);
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok((samples, counters))
}

/// Single-precision split-plane kernels, benchmark-only.
mod kern32 {
    use super::*;

    pub struct QT32 {
        pub rows: usize,
        pub cols: usize,
        pub planes: [Vec<f32>; 4],
    }

    impl QT32 {
        pub fn random(rows: usize, cols: usize, rng: &mut Rng, scale: f64) -> Self {
            let len = rows * cols;
            QT32 {
                rows,
                cols,
                planes: std::array::from_fn(|_| {
                    (0..len).map(|_| (scale * rng.gaussian()) as f32).collect()
                }),
            }
        }

        pub fn zeros(rows: usize, cols: usize) -> Self {
            QT32 {
                rows,
                cols,
                planes: std::array::from_fn(|_| vec![0.0; rows * cols]),
            }
        }
    }

    /// `c += alpha * a @ b^(T?)` on row-major buffers.
    #[allow(clippy::too_many_arguments)]
    pub fn sgemm_acc(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: &[f32],
        b: &[f32],
        transpose_b: bool,
        c: &mut [f32],
    ) {
        let (rsb, csb) = if transpose_b {
            (1isize, k as isize)
        } else {
            (n as isize, 1isize)
        };
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                k as isize,
                1,
                b.as_ptr(),
                rsb,
                csb,
                1.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }

    /// Quaternion linear forward: sixteen real products.
    pub fn project(x: &QT32, w: &QT32, counters: &mut CostCounters) -> QT32 {
        let mut out = QT32::zeros(x.rows, w.cols);
        for (alpha, terms) in HAMILTON_TERMS.iter().enumerate() {
            for &(mu, nu, sign) in terms {
                sgemm_acc(
                    x.rows,
                    x.cols,
                    w.cols,
                    sign as f32,
                    &x.planes[mu],
                    &w.planes[nu],
                    false,
                    &mut out.planes[alpha],
                );
                counters.projection_matmuls += 1;
            }
        }
        out
    }

    pub fn softmax_rows_inplace(t: usize, cols: usize, s: &mut [f32], counters: &mut CostCounters) {
        counters.softmax_calls += 1;
        for r in 0..t {
            let row = &mut s[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0.0f32;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            let inv = 1.0 / sum;
            for v in row.iter_mut() {
                *v *= inv;
            }
        }
    }

        pub fn forward(
        x: &QT32,
        w_q: &[QT32],
        w_k: &[QT32],
        w_v: &[QT32],
        cfg: &AttnConfig,
        counters: &mut CostCounters,
    ) -> f32 {
        let t = cfg.seq_len;
        let mut checksum = 0.0f32;
        for head in 0..cfg.heads {
            let q = project(x, &w_q[head], counters);
            let k = project(x, &w_k[head], counters);
            let v = project(x, &w_v[head], counters);
            let d_h = cfg.d_head;

            match cfg.mode {
                AttnMode::Shared => {
                    let scale = cfg.shared_scale() as f32;
                    let mut s = vec![0.0f32; t * t];
                    for plane in 0..4 {
                        sgemm_acc(t, d_h, t, scale, &q.planes[plane], &k.planes[plane], true, &mut s);
                        counters.score_matmuls += 1;
                    }
                    softmax_rows_inplace(t, t, &mut s, counters);
                    let mut o = vec![0.0f32; t * d_h];
                    for plane in 0..4 {
                        o.iter_mut().for_each(|v| *v = 0.0);
                        sgemm_acc(t, t, d_h, 1.0, &s, &v.planes[plane], false, &mut o);
                        counters.av_matmuls += 1;
                        checksum += o[0];
                    }
                }
                AttnMode::Componentwise => {
                    let scale = cfg.tay_scale() as f32;
                    let mut scores: Vec<Vec<f32>> = (0..4).map(|_| vec![0.0f32; t * t]).collect();
                    for (alpha, terms) in HAMILTON_TERMS.iter().enumerate() {
                        for &(mu, nu, sign) in terms {
                            sgemm_acc(
                                t,
                                d_h,
                                t,
                                sign as f32 * scale,
                                &q.planes[mu],
                                &k.planes[nu],
                                true,
                                &mut scores[alpha],
                            );
                            counters.score_matmuls += 1;
                        }
                    }
                    let mut o = vec![0.0f32; t * d_h];
                    for alpha in 0..4 {
                        softmax_rows_inplace(t, t, &mut scores[alpha], counters);
                        o.iter_mut().for_each(|v| *v = 0.0);
                        sgemm_acc(t, t, d_h, 1.0, &scores[alpha], &v.planes[alpha], false, &mut o);
                        counters.av_matmuls += 1;
                        checksum += o[0];
                    }
                }
            }
        }
        checksum
    }
}

fn time_f32(
    cfg: &AttnConfig,
    warmup: usize,
    reps: usize,
    seed: u64,
) -> Result<(Vec<f64>, CostCounters)> {
    let mut rng = Rng::with_stream(seed, 0xBE);
    let x = kern32::QT32::random(cfg.seq_len, cfg.d_model, &mut rng, 1.0);
    let std = 1.0 / (4.0 * cfg.d_model as f64).sqrt();
    let mut w_q = Vec::with_capacity(cfg.heads);
    let mut w_k = Vec::with_capacity(cfg.heads);
    let mut w_v = Vec::with_capacity(cfg.heads);
    for _ in 0..cfg.heads {
        w_q.push(kern32::QT32::random(cfg.d_model, cfg.d_head, &mut rng, std));
        w_k.push(kern32::QT32::random(cfg.d_model, cfg.d_head, &mut rng, std));
        w_v.push(kern32::QT32::random(cfg.d_model, cfg.d_head, &mut rng, std));
    }

    let mut counters = CostCounters::default();
    std::hint::black_box(kern32::forward(&x, &w_q, &w_k, &w_v, cfg, &mut counters));
    for _ in 0..warmup.saturating_sub(1) {
        std::hint::black_box(kern32::forward(
            &x,
            &w_q,
            &w_k,
            &w_v,
            cfg,
            &mut CostCounters::default(),
        ));
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        std::hint::black_box(kern32::forward(
            &x,
            &w_q,
            &w_k,
            &w_v,
            cfg,
            &mut CostCounters::default(),
        ));
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok((samples, counters))
}

/// One row of the benchmark sweep, mirroring the published per-layer table:
/// sequence length, mode, analytic MACs, measured latency, and the
/// shared-vs-componentwise speedup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub seq_len: usize,
    pub mode: AttnMode,
    pub macs_total: u64,
    pub macs_score: u64,
    pub softmax_ops: u64,
    pub median_ms: f64,
    pub dispersion_ms: f64,
    pub speedup_vs_componentwise: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn bench_sweep(
    seq_lens: &[usize],
    d_model: usize,
    heads: usize,
    modes: &[AttnMode],
    warmup: usize,
    reps: usize,
    dtype: BenchDtype,
    include_projections: bool,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &t in seq_lens {
        let mut by_mode: Vec<(AttnMode, MacsBreakdown, TimingResult)> = Vec::new();
        for &mode in modes {
            let cfg = AttnConfig::new(t, d_model, heads, mode)?;
            let macs = macs_model(&cfg, include_projections)?;
            let timing = time_attention(&cfg, warmup, reps, dtype, seed)?;
            by_mode.push((mode, macs, timing));
        }
        let cw_median = by_mode
            .iter()
            .find(|(m, _, _)| *m == AttnMode::Componentwise)
            .map(|(_, _, t)| t.median_ms);
        for (mode, macs, timing) in by_mode {
            let speedup = match (mode, cw_median) {
                (AttnMode::Shared, Some(cw)) => Some(cw / timing.median_ms),
                (AttnMode::Componentwise, Some(_)) => Some(1.0),
                _ => None,
            };
            rows.push(BenchRow {
                seq_len: t,
                mode,
                macs_total: macs.total,
                macs_score: macs.score_stage,
                softmax_ops: macs.softmax_ops,
                median_ms: timing.median_ms,
                dispersion_ms: timing.dispersion_ms,
                speedup_vs_componentwise: speedup,
            });
        }
    }
    Ok(rows)
}
