//! In-process invariant suite behind the `selftest` CLI command.
//!
//! Each check exercises one verifiable identity of the library — algebra
//! axioms, score equivalences, cost counters, gradient correctness, and the
//! decomposition theorems — and reports a named pass/fail with the measured
//! worst-case deviation.

use crate::attention::{
    shared_attention_counted, shared_score, softmax_rows, tay_attention_counted, tay_score,
    AttnMode, CostCounters,
};
use crate::error::Result;
use crate::gradcheck::{max_grad_fd_error, LossKind};
use crate::matrix::Mat;
use crate::quat::Quaternion;
use crate::rng::Rng;
use crate::tensor::QTensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
    pub seed: u64,
    pub all_passed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SelftestTolerances {
    pub algebra: f64,
    pub equivalence: f64,
    pub decomposition: f64,
    pub gradient_rel: f64,
}

impl Default for SelftestTolerances {
    fn default() -> Self {
        SelftestTolerances {
            algebra: 1e-12,
            equivalence: 1e-12,
            decomposition: 1e-9,
            gradient_rel: 1e-6,
        }
    }
}

fn random_quat(rng: &mut Rng) -> Quaternion {
    Quaternion::new(
        rng.uniform_signed(),
        rng.uniform_signed(),
        rng.uniform_signed(),
        rng.uniform_signed(),
    )
}

pub fn run_selftest(seed: u64, tol: SelftestTolerances) -> Result<SelftestReport> {
    let mut checks = Vec::new();
    let mut record = |name: &str, worst: f64, tolerance: f64| {
        checks.push(CheckResult {
            name: name.to_string(),
            passed: worst <= tolerance,
            worst,
            tolerance,
        });
    };

    // Hamilton product: identity, basis relations, associativity.
    {
        let mut rng = Rng::with_stream(seed, 1);
        let mut worst = 0.0f64;
        let ij = Quaternion::I * Quaternion::J;
        let ji = Quaternion::J * Quaternion::I;
        worst = worst.max((ij - Quaternion::K).norm_sq().sqrt());
        worst = worst.max((ji + Quaternion::K).norm_sq().sqrt());
        for _ in 0..1000 {
            let (p, q, r) = (random_quat(&mut rng), random_quat(&mut rng), random_quat(&mut rng));
            let gap = ((p * q) * r - p * (q * r)).norm_sq().sqrt();
            worst = worst.max(gap);
        }
        record("hamilton product relations and associativity", worst, tol.algebra);
    }

    // Scalar product axioms and the conjugate identity.
    {
        let mut rng = Rng::with_stream(seed, 2);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let (x, y, z) = (random_quat(&mut rng), random_quat(&mut rng), random_quat(&mut rng));
            let (a, b) = (rng.uniform_signed(), rng.uniform_signed());
            worst = worst.max((x.dot(y) - y.dot(x)).abs());
            worst = worst.max((x.dot(y) - (x * y.conj()).q0).abs());
            worst = worst.max(((x.scale(a) + y.scale(b)).dot(z) - (a * x.dot(z) + b * y.dot(z))).abs());
            if x.norm_sq() < 0.0 {
                worst = worst.max(1.0);
            }
        }
        // no-conjugate counterexample must be exact
        let counter = Quaternion::I.re_mul_no_conj(Quaternion::I);
        worst = worst.max((counter - (-1.0)).abs());
        record("inner product axioms + no-conjugate counterexample", worst, tol.algebra);
    }

    // Norm multiplicativity.
    {
        let mut rng = Rng::with_stream(seed, 3);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let (p, q) = (random_quat(&mut rng), random_quat(&mut rng));
            let lhs = (p * q).norm_sq();
            let rhs = p.norm_sq() * q.norm_sq();
            worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1e-12));
        }
        record("quaternion norm multiplicativity", worst, 1e-10);
    }

    // Shared score equals the vectorized real dot product.
    {
        let mut rng = Rng::with_stream(seed, 4);
        let mut worst = 0.0f64;
        for trial in 0..100 {
            let t = 1 + trial % 16;
            let d = 1 + trial % 8;
            let q = QTensor::random(vec![t, d], &mut rng, 1.0)?;
            let k = QTensor::random(vec![t, d], &mut rng, 1.0)?;
            let scale = 1.0 / (4.0 * d as f64).sqrt();
            let s = shared_score(&q, &k, scale)?;
            for i in 0..t {
                for j in 0..t {
                    let mut dot = 0.0;
                    for plane in 0..4 {
                        for l in 0..d {
                            dot += q.plane(plane)[i * d + l] * k.plane(plane)[j * d + l];
                        }
                    }
                    worst = worst.max((s.get(i, j) - scale * dot).abs());
                }
            }
        }
        record("shared score = vectorized dot product", worst, tol.equivalence);
    }

    // Component-wise score equals the quaternion matrix product.
    {
        let mut rng = Rng::with_stream(seed, 5);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let q = QTensor::random(vec![5, 3], &mut rng, 1.0)?;
            let k = QTensor::random(vec![5, 3], &mut rng, 1.0)?;
            let s = tay_score(&q, &k, 1.0)?;
            let via = q.matmul(&k.transpose()?)?;
            for alpha in 0..4 {
                worst = worst.max(s[alpha].max_abs_diff(&via.plane_as_mat(alpha)?));
            }
        }
        record("componentwise score = quaternion matmul", worst, tol.equivalence);
    }

    // Row-stochastic attention maps and cost counters.
    {
        let mut rng = Rng::with_stream(seed, 6);
        let mut worst = 0.0f64;
        let q = QTensor::random(vec![6, 2], &mut rng, 1.0)?;
        let k = QTensor::random(vec![6, 2], &mut rng, 1.0)?;
        let v = QTensor::random(vec![6, 2], &mut rng, 1.0)?;

        let mut shared = CostCounters::default();
        shared_attention_counted(&q, &k, &v, 0.5, &mut shared)?;
        let mut tay = CostCounters::default();
        tay_attention_counted(&q, &k, &v, 1.0, false, &mut tay)?;
        if shared.score_matmuls != 4 || shared.softmax_calls != 1 {
            worst = worst.max(1.0);
        }
        if tay.score_matmuls != 16 || tay.softmax_calls != 4 {
            worst = worst.max(1.0);
        }

        let s = shared_score(&q, &k, 0.5)?;
        let a = softmax_rows(&s);
        for r in 0..a.rows() {
            let sum: f64 = a.row(r).iter().sum();
            worst = worst.max((sum - 1.0).abs());
            for &x in a.row(r) {
                if !(0.0..=1.0).contains(&x) {
                    worst = worst.max(1.0);
                }
            }
        }
        record("cost counters 4/1 vs 16/4 and row-stochastic maps", worst, tol.equivalence);
    }

    // Analytic gradients against finite differences.
    {
        let mut rng = Rng::with_stream(seed, 7);
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let q = QTensor::random(vec![4, 2], &mut rng, 1.0)?;
            let k = QTensor::random(vec![4, 2], &mut rng, 1.0)?;
            let v = QTensor::random(vec![4, 2], &mut rng, 1.0)?;
            worst = worst.max(max_grad_fd_error(&q, &k, &v, 0.7, LossKind::MeanSqOutput, 1e-5)?);
        }
        record("score gradients match finite differences", worst, tol.gradient_rel);
    }

    // Decomposition identities.
    {
        let mut rng = Rng::with_stream(seed, 8);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let x = QTensor::random(vec![4, 2], &mut rng, 1.0)?;
            let w_q = QTensor::random(vec![2, 2], &mut rng, 1.0)?;
            let w_k = QTensor::random(vec![2, 2], &mut rng, 1.0)?;
            worst = worst.max(crate::analysis::decompose_tay(&x, &w_q, &w_k)?.residual_max_abs);
            worst = worst.max(crate::analysis::decompose_ours(&x, &w_q, &w_k)?.residual_max_abs);
        }
        record("score decomposition residuals", worst, tol.decomposition);
    }

    // Parameter counting.
    {
        let mut worst = 0.0f64;
        for (d_in, d_out) in [(1usize, 1usize), (8, 16), (64, 64)] {
            let pc = crate::layers::param_count(crate::layers::LayerKind::Linear { d_in, d_out })?;
            worst = worst.max((pc.ratio - 0.25).abs());
        }
        for (c_in, c_out, k) in [(1usize, 1usize, 3usize), (4, 8, 5)] {
            let pc = crate::layers::param_count(crate::layers::LayerKind::Conv2d { c_in, c_out, k })?;
            worst = worst.max((pc.ratio - 0.25).abs());
        }
        record("quaternion parameter ratio = 0.25", worst, 0.0);
    }

    // MACs model structure.
    {
        let mut worst = 0.0f64;
        for t in [64usize, 512] {
            let shared_cfg = crate::attention::AttnConfig::new(t, 64, 8, AttnMode::Shared)?;
            let tay_cfg = crate::attention::AttnConfig::new(t, 64, 8, AttnMode::Componentwise)?;
            let shared = crate::bench::macs_model(&shared_cfg, false)?;
            let tay = crate::bench::macs_model(&tay_cfg, false)?;
            if shared.score_stage * 4 != tay.score_stage {
                worst = worst.max(1.0);
            }
            if shared.softmax_ops * 4 != tay.softmax_ops {
                worst = worst.max(1.0);
            }
        }
        record("macs model score/softmax ratios", worst, 0.0);
    }

    // Scale invariance of the argmax and metric sanity.
    {
        let mut rng = Rng::with_stream(seed, 9);
        let mut worst = 0.0f64;
        let t = 6;
        let s = Mat::from_vec(t, t, (0..t * t).map(|_| rng.uniform_signed()).collect())?;
        let a = softmax_rows(&s);
        let a_scaled = softmax_rows(&s.scaled(2.5));
        for r in 0..t {
            let am = crate::analysis::argmax_row(a.row(r));
            let am2 = crate::analysis::argmax_row(a_scaled.row(r));
            if am != am2 {
                worst = worst.max(1.0);
            }
        }
        let samples: Vec<f64> = (0..64).map(|_| rng.gaussian()).collect();
        worst = worst.max(crate::analysis::ks_statistic(&samples, &samples)?);
        worst = worst.max(crate::analysis::wasserstein1(&samples, &samples)?);
        worst = worst
            .max((crate::analysis::quantile_correlation(&samples, &samples, 32)? - 1.0).abs());
        record("argmax scale invariance + metric identities", worst, tol.equivalence);
    }

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(SelftestReport {
        checks,
        seed,
        all_passed,
    })
}
