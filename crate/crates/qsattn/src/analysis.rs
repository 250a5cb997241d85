//! Inter-component agreement, distribution similarity, and numerical
//! verification of the score-decomposition identities.
//!
//! The decomposition verifiers check, instance by instance, that when queries
//! and keys come from quaternion linear projections, every component-wise
//! score matrix is a bilinear form `Σ X_β Λ^{βγ} X_γ^T` whose coefficient
//! matrices are built from the blocks `Φ_{μβ}(W_Q) Ψ_{νγ}(W_K)^T` — and that
//! the shared score is a bilinear form over the same blocks. Both identities
//! are exact, so the residuals are pure floating-point noise.

use crate::attention::{shared_score, tay_score};
use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::tensor::{QTensor, HAMILTON_TERMS};
use serde::{Deserialize, Serialize};

/// Index of the largest value in a row; ties resolve to the lowest index.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in row.iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

/// Fraction of rows where the two attention maps place their argmax at the
/// same key position.
pub fn agreement_rate(am: &Mat, an: &Mat) -> Result<f64> {
    if am.rows() != an.rows() || am.cols() != an.cols() {
        return Err(Error::shape(format!(
            "agreement of {}x{} vs {}x{}",
            am.rows(),
            am.cols(),
            an.rows(),
            an.cols()
        )));
    }
    if am.rows() == 0 {
        return Err(Error::invalid("agreement of empty maps".to_string()));
    }
    let hits = (0..am.rows())
        .filter(|&r| argmax_row(am.row(r)) == argmax_row(an.row(r)))
        .count();
    Ok(hits as f64 / am.rows() as f64)
}

/// Row indices of the `k` largest entries (value descending, index ascending
/// on ties).
fn topk_indices(row: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| {
        row[b]
            .partial_cmp(&row[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

/// Directional top-k agreement: fraction of rows where the argmax of `am`
/// appears among the `k` largest entries of the matching row of `an`.
/// Chance level is `k/T`. `topk_agreement_symmetric` averages the two
/// directions.
pub fn topk_agreement(am: &Mat, an: &Mat, k: usize) -> Result<f64> {
    if am.rows() != an.rows() || am.cols() != an.cols() {
        return Err(Error::shape(format!(
            "top-k agreement of {}x{} vs {}x{}",
            am.rows(),
            am.cols(),
            an.rows(),
            an.cols()
        )));
    }
    if k == 0 || k > an.cols() {
        return Err(Error::invalid(format!(
            "k must be in 1..={}, got {k}",
            an.cols()
        )));
    }
    let hits = (0..am.rows())
        .filter(|&r| topk_indices(an.row(r), k).contains(&argmax_row(am.row(r))))
        .count();
    Ok(hits as f64 / am.rows() as f64)
}

pub fn topk_agreement_symmetric(am: &Mat, an: &Mat, k: usize) -> Result<f64> {
    Ok(0.5 * (topk_agreement(am, an, k)? + topk_agreement(an, am, k)?))
}

/// Pairwise argmax agreement among the four component attention maps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pair: (usize, usize),
    pub mean: f64,
    pub std: f64,
    pub chance_level: f64,
    /// One agreement value per map set (head) that entered the aggregate.
    pub per_head: Vec<f64>,
}

/// Aggregates pairwise component agreement over a batch of per-head map
/// quadruples. Reports the unweighted per-head mean and std; `k = 1` is
/// plain argmax agreement.
pub fn component_agreement(maps: &[[Mat; 4]], k: usize) -> Result<Vec<AgreementReport>> {
    let first = maps
        .first()
        .ok_or_else(|| Error::invalid("agreement over zero heads".to_string()))?;
    let t = first[0].cols();
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut reports = Vec::with_capacity(pairs.len());
    for (m, n) in pairs {
        let mut per_head = Vec::with_capacity(maps.len());
        for quad in maps {
            let rate = if k == 1 {
                agreement_rate(&quad[m], &quad[n])?
            } else {
                topk_agreement(&quad[m], &quad[n], k)?
            };
            per_head.push(rate);
        }
        let count = per_head.len() as f64;
        let mean = per_head.iter().sum::<f64>() / count;
        let var = per_head.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / count;
        reports.push(AgreementReport {
            pair: (m, n),
            mean,
            std: var.sqrt(),
            chance_level: k as f64 / t as f64,
            per_head,
        });
    }
    Ok(reports)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut out = xs.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Two-sample Kolmogorov-Smirnov statistic: the exact supremum of the ECDF
/// gap, computed by a merge scan of the sorted samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("ks statistic of empty samples".to_string()));
    }
    let xs = sorted(a);
    let ys = sorted(b);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// Exact 1-Wasserstein distance between equal-size empirical distributions:
/// the mean absolute gap of the sorted samples. Unequal sizes are reduced by
/// interpolating both quantile functions at the smaller count; against a
/// single-sample distribution the exact transport cost (mean absolute gap to
/// the lone atom) is used.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("wasserstein of empty samples".to_string()));
    }
    if a.len() == 1 || b.len() == 1 {
        let (atom, rest) = if a.len() == 1 { (a[0], b) } else { (b[0], a) };
        return Ok(rest.iter().map(|y| (y - atom).abs()).sum::<f64>() / rest.len() as f64);
    }
    let (xs, ys) = if a.len() == b.len() {
        (sorted(a), sorted(b))
    } else {
        let n = a.len().min(b.len());
        (quantiles(a, n)?, quantiles(b, n)?)
    };
    let n = xs.len() as f64;
    Ok(xs.iter().zip(&ys).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

/// Empirical quantile function at `n_q` equispaced probabilities in `[0, 1]`,
/// linearly interpolated between order statistics.
pub fn quantiles(samples: &[f64], n_q: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("quantiles of empty samples".to_string()));
    }
    if n_q < 2 {
        return Err(Error::invalid(format!("n_q must be >= 2, got {n_q}")));
    }
    let xs = sorted(samples);
    let n = xs.len();
    let mut out = Vec::with_capacity(n_q);
    for qi in 0..n_q {
        let p = qi as f64 / (n_q - 1) as f64;
        let pos = p * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        out.push(xs[lo] + frac * (xs[hi] - xs[lo]));
    }
    Ok(out)
}

/// Pearson correlation of the two empirical quantile functions evaluated at
/// `n_q` equispaced probabilities. Errors on degenerate (zero-variance)
/// quantile vectors: the correlation is undefined there, not zero.
pub fn quantile_correlation(a: &[f64], b: &[f64], n_q: usize) -> Result<f64> {
    let qa = quantiles(a, n_q)?;
    let qb = quantiles(b, n_q)?;
    crate::gradcheck::pearson(&qa, &qb)
}

/// Similarity of two sample sets under the three distribution metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub ks_stat: f64,
    pub wasserstein: f64,
    pub quantile_corr: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub n_quantiles: usize,
}

pub fn similarity_report(a: &[f64], b: &[f64], n_q: usize) -> Result<SimilarityReport> {
    Ok(SimilarityReport {
        ks_stat: ks_statistic(a, b)?,
        wasserstein: wasserstein1(a, b)?,
        quantile_corr: quantile_correlation(a, b, n_q)?,
        n_a: a.len(),
        n_b: b.len(),
        n_quantiles: n_q,
    })
}

/// `Φ_{μβ}(W)`: the `(μ, β)` block of the component pre-mixing matrix, i.e.
/// the signed weight plane with `Q_μ = Σ_β X_β Φ_{μβ}`. The block table is
/// the Hamilton structure-constant table read with `(β, plane)` as the term
/// indices.
pub fn phi_block(weight: &QTensor, mu: usize, beta: usize) -> Result<Mat> {
    if weight.ndim() != 2 {
        return Err(Error::shape("phi block needs a 2-D weight".to_string()));
    }
    for &(b, plane, sign) in &HAMILTON_TERMS[mu] {
        if b == beta {
            return Ok(weight.plane_as_mat(plane)?.scaled(sign));
        }
    }
    unreachable!("each Hamilton row covers every first index once");
}

/// Result of reconstructing a score matrix from its bilinear decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// Worst absolute gap between the reconstructed and directly computed
    /// (unscaled) scores, over all components and entries.
    pub residual_max_abs: f64,
    /// Worst absolute gap between the coefficient matrices and their
    /// recomputation from the generator blocks.
    pub membership_residual: f64,
    /// Frobenius norms of the coefficient matrices, keyed `(alpha, beta,
    /// gamma)` for the component-wise case and `(0, beta, gamma)` for the
    /// shared case.
    pub coefficient_norms: Vec<((usize, usize, usize), f64)>,
    pub seq_len: usize,
    pub d_in: usize,
    pub d_head: usize,
}

fn check_decompose_shapes(
    x: &QTensor,
    w_q: &QTensor,
    w_k: &QTensor,
) -> Result<(usize, usize, usize)> {
    let (t, d_in) = match x.shape() {
        [t, d] => (*t, *d),
        other => return Err(Error::shape(format!("input must be 2-D, got {other:?}"))),
    };
    let (wq_in, d_h) = match w_q.shape() {
        [a, b] => (*a, *b),
        other => return Err(Error::shape(format!("W_Q must be 2-D, got {other:?}"))),
    };
    let (wk_in, wk_out) = match w_k.shape() {
        [a, b] => (*a, *b),
        other => return Err(Error::shape(format!("W_K must be 2-D, got {other:?}"))),
    };
    if wq_in != d_in || wk_in != d_in || wk_out != d_h {
        return Err(Error::shape(format!(
            "weights {:?} / {:?} incompatible with input {:?}",
            w_q.shape(),
            w_k.shape(),
            x.shape()
        )));
    }
    Ok((t, d_in, d_h))
}

/// Verifies the component-wise score decomposition: builds every coefficient
/// matrix `Λ_α^{βγ} = Σ σ_{α,μν} Φ_{μβ}(W_Q) Ψ_{νγ}(W_K)^T`, reconstructs
/// the bilinear form, and compares against the directly computed unscaled
/// component scores.
pub fn decompose_tay(x: &QTensor, w_q: &QTensor, w_k: &QTensor) -> Result<DecompositionReport> {
    let (t, d_in, d_h) = check_decompose_shapes(x, w_q, w_k)?;

    let q = x.matmul(w_q)?;
    let k = x.matmul(w_k)?;
    let direct = tay_score(&q, &k, 1.0)?;

    let x_planes: Vec<Mat> = (0..4).map(|p| x.plane_as_mat(p).unwrap()).collect();
    let mut residual = 0.0f64;
    let mut membership = 0.0f64;
    let mut norms = Vec::with_capacity(4 * 16);

    for (alpha, terms) in HAMILTON_TERMS.iter().enumerate() {
        let mut recon = Mat::zeros(t, t);
        for beta in 0..4 {
            for gamma in 0..4 {
                // Λ_α^{βγ} from the signed generator blocks.
                let mut lambda = Mat::zeros(d_in, d_in);
                for &(mu, nu, sign) in terms {
                    let phi = phi_block(w_q, mu, beta)?;
                    let psi = phi_block(w_k, nu, gamma)?;
                    let block = phi.matmul_transpose_b(&psi)?;
                    lambda.add_assign_scaled(&block, sign)?;
                }

                // Independent recomputation from scratch, as a membership
                // witness that Λ is exactly this combination of generators.
                let mut again = Mat::zeros(d_in, d_in);
                for &(mu, nu, sign) in terms {
                    let gen = phi_block(w_q, mu, beta)?
                        .matmul_transpose_b(&phi_block(w_k, nu, gamma)?)?;
                    again.add_assign_scaled(&gen, sign)?;
                }
                membership = membership.max(lambda.max_abs_diff(&again));
                norms.push(((alpha, beta, gamma), lambda.frobenius_norm()));

                let xl = x_planes[beta].matmul(&lambda)?;
                let term = xl.matmul_transpose_b(&x_planes[gamma])?;
                recon.add_assign_scaled(&term, 1.0)?;
            }
        }
        residual = residual.max(recon.max_abs_diff(&direct[alpha]));
    }

    Ok(DecompositionReport {
        residual_max_abs: residual,
        membership_residual: membership,
        coefficient_norms: norms,
        seq_len: t,
        d_in,
        d_head: d_h,
    })
}

/// Verifies that the shared score lives in the same interaction subspace:
/// `M^{βγ} = Σ_α Φ_{αβ}(W_Q) Ψ_{αγ}(W_K)^T` reconstructs the unscaled shared
/// score, and each `M^{βγ}` is exactly a unit-coefficient sum of the same
/// generator blocks the component-wise coefficients are built from.
pub fn decompose_ours(x: &QTensor, w_q: &QTensor, w_k: &QTensor) -> Result<DecompositionReport> {
    let (t, d_in, d_h) = check_decompose_shapes(x, w_q, w_k)?;

    let q = x.matmul(w_q)?;
    let k = x.matmul(w_k)?;
    let direct = shared_score(&q, &k, 1.0)?;

    let x_planes: Vec<Mat> = (0..4).map(|p| x.plane_as_mat(p).unwrap()).collect();
    let mut recon = Mat::zeros(t, t);
    let mut membership = 0.0f64;
    let mut norms = Vec::with_capacity(16);

    for beta in 0..4 {
        for gamma in 0..4 {
            let mut m = Mat::zeros(d_in, d_in);
            for alpha in 0..4 {
                let phi = phi_block(w_q, alpha, beta)?;
                let psi = phi_block(w_k, alpha, gamma)?;
                m.add_assign_scaled(&phi.matmul_transpose_b(&psi)?, 1.0)?;
            }

            // Membership in the generator span, recomputed independently
            // with unit coefficients over the diagonal (μ = ν) generators.
            let mut again = Mat::zeros(d_in, d_in);
            for alpha in 0..4 {
                let gen = phi_block(w_q, alpha, beta)?
                    .matmul_transpose_b(&phi_block(w_k, alpha, gamma)?)?;
                again.add_assign_scaled(&gen, 1.0)?;
            }
            membership = membership.max(m.max_abs_diff(&again));
            norms.push(((0usize, beta, gamma), m.frobenius_norm()));

            let xm = x_planes[beta].matmul(&m)?;
            let term = xm.matmul_transpose_b(&x_planes[gamma])?;
            recon.add_assign_scaled(&term, 1.0)?;
        }
    }

    Ok(DecompositionReport {
        residual_max_abs: recon.max_abs_diff(&direct),
        membership_residual: membership,
        coefficient_norms: norms,
        seq_len: t,
        d_in,
        d_head: d_h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_qt(rng: &mut Rng, shape: Vec<usize>) -> QTensor {
        QTensor::random(shape, rng, 1.0).unwrap()
    }

    #[test]
    fn agreement_identical_and_disjoint() {
        let a = Mat::from_rows(&[&[0.9, 0.1], &[0.2, 0.8]]).unwrap();
        assert_eq!(agreement_rate(&a, &a).unwrap(), 1.0);

        let b = Mat::from_rows(&[&[0.1, 0.9], &[0.7, 0.3]]).unwrap();
        assert_eq!(agreement_rate(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn agreement_half_matching() {
        // Rows 0 and 1 agree (argmax 0, 1); rows 2 and 3 disagree.
        let a = Mat::from_rows(&[
            &[0.9, 0.05, 0.03, 0.02],
            &[0.1, 0.6, 0.2, 0.1],
            &[0.5, 0.2, 0.2, 0.1],
            &[0.1, 0.1, 0.7, 0.1],
        ])
        .unwrap();
        let b = Mat::from_rows(&[
            &[0.6, 0.2, 0.1, 0.1],
            &[0.05, 0.8, 0.1, 0.05],
            &[0.1, 0.2, 0.2, 0.5],
            &[0.2, 0.5, 0.2, 0.1],
        ])
        .unwrap();
        assert_eq!(agreement_rate(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn agreement_tie_breaks_to_lowest_index() {
        let a = Mat::from_rows(&[&[0.5, 0.5]]).unwrap();
        let b = Mat::from_rows(&[&[0.6, 0.4]]).unwrap();
        assert_eq!(agreement_rate(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn agreement_symmetric_for_unique_argmaxes() {
        let mut rng = Rng::new(70);
        for _ in 0..50 {
            let t = 5;
            let a = Mat::from_vec(t, t, (0..t * t).map(|_| rng.uniform()).collect()).unwrap();
            let b = Mat::from_vec(t, t, (0..t * t).map(|_| rng.uniform()).collect()).unwrap();
            assert_eq!(
                agreement_rate(&a, &b).unwrap(),
                agreement_rate(&b, &a).unwrap()
            );
        }
    }

    #[test]
    fn topk_reductions() {
        let mut rng = Rng::new(71);
        let t = 4;
        let a = Mat::from_vec(t, t, (0..t * t).map(|_| rng.uniform()).collect()).unwrap();
        let b = Mat::from_vec(t, t, (0..t * t).map(|_| rng.uniform()).collect()).unwrap();
        assert_eq!(topk_agreement(&a, &b, t).unwrap(), 1.0);
        assert_eq!(
            topk_agreement(&a, &b, 1).unwrap(),
            agreement_rate(&a, &b).unwrap()
        );
        assert!(topk_agreement(&a, &b, 0).is_err());
        assert!(topk_agreement(&a, &b, t + 1).is_err());
    }

    #[test]
    fn topk_second_largest_construction() {
        // argmax of `a` is always the second-largest entry of `b`.
        let a = Mat::from_rows(&[
            &[0.9, 0.1, 0.0, 0.0],
            &[0.0, 0.9, 0.1, 0.0],
            &[0.0, 0.0, 0.9, 0.1],
            &[0.1, 0.0, 0.0, 0.9],
        ])
        .unwrap();
        let b = Mat::from_rows(&[
            &[0.3, 0.6, 0.05, 0.05],
            &[0.05, 0.3, 0.6, 0.05],
            &[0.05, 0.05, 0.3, 0.6],
            &[0.6, 0.05, 0.05, 0.3],
        ])
        .unwrap();
        assert_eq!(topk_agreement(&a, &b, 1).unwrap(), 0.0);
        assert_eq!(topk_agreement(&a, &b, 2).unwrap(), 1.0);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[0.0, 1.0], &[0.5, 1.5]).unwrap(), 0.5);
        assert!(ks_statistic(&[], &[1.0]).is_err());
    }

    #[test]
    fn ks_bounded_and_zero_iff_identical() {
        let mut rng = Rng::new(72);
        for _ in 0..20 {
            let a: Vec<f64> = (0..30).map(|_| rng.uniform_signed()).collect();
            let b: Vec<f64> = (0..50).map(|_| rng.uniform_signed()).collect();
            let ks = ks_statistic(&a, &b).unwrap();
            assert!((0.0..=1.0).contains(&ks));
            assert!(ks > 0.0);
            assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        }
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein1(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let a = [0.5, -1.0, 2.0];
        let b: Vec<f64> = a.iter().map(|x| x + 0.7).collect();
        assert!((wasserstein1(&a, &b).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(wasserstein1(&[0.0, 1.0], &[0.0, 3.0]).unwrap(), 1.0);
        assert!(wasserstein1(&[], &[1.0]).is_err());

        // single-atom side: exact transport cost to the atom, (1+1+3)/3
        assert_eq!(wasserstein1(&[1.0], &[0.0, 2.0, 4.0]).unwrap(), 5.0 / 3.0);
        assert_eq!(wasserstein1(&[0.0, 2.0, 4.0], &[1.0]).unwrap(), 5.0 / 3.0);
        assert_eq!(wasserstein1(&[3.0], &[3.0]).unwrap(), 0.0);
    }

    #[test]
    fn quantile_correlation_examples() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!((quantile_correlation(&a, &a, 10).unwrap() - 1.0).abs() < 1e-12);

        let b: Vec<f64> = a.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((quantile_correlation(&a, &b, 10).unwrap() - 1.0).abs() < 1e-12);

        // Pearson of {0..9} against its squares, frozen from the direct
        // order-statistic computation.
        let sq: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let r = quantile_correlation(&a, &sq, 10).unwrap();
        let direct = crate::gradcheck::pearson(&a, &sq).unwrap();
        assert!((r - direct).abs() < 1e-12);
        assert!((r - 0.9627).abs() < 5e-4, "r = {r}");

        assert!(quantile_correlation(&a, &[1.0; 10], 10).is_err());
        assert!(quantile_correlation(&a, &b, 1).is_err());
    }

    #[test]
    fn similarity_identical_inputs() {
        let mut rng = Rng::new(73);
        let a: Vec<f64> = (0..100).map(|_| rng.gaussian()).collect();
        let report = similarity_report(&a, &a, 50).unwrap();
        assert_eq!(report.ks_stat, 0.0);
        assert_eq!(report.wasserstein, 0.0);
        assert!((report.quantile_corr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_blocks_match_projection() {
        // Q_mu = Σ_β X_β Φ_{μβ} reproduces the quaternion linear forward.
        let mut rng = Rng::new(74);
        let x = random_qt(&mut rng, vec![3, 2]);
        let w = random_qt(&mut rng, vec![2, 2]);
        let q = x.matmul(&w).unwrap();
        for mu in 0..4 {
            let mut acc = Mat::zeros(3, 2);
            for beta in 0..4 {
                let xb = x.plane_as_mat(beta).unwrap();
                let phi = phi_block(&w, mu, beta).unwrap();
                acc.add_assign_scaled(&xb.matmul(&phi).unwrap(), 1.0).unwrap();
            }
            assert!(acc.max_abs_diff(&q.plane_as_mat(mu).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn decompose_tay_exact_on_random_instances() {
        let mut rng = Rng::new(75);
        for _ in 0..10 {
            let x = random_qt(&mut rng, vec![4, 2]);
            let w_q = random_qt(&mut rng, vec![2, 2]);
            let w_k = random_qt(&mut rng, vec![2, 2]);
            let report = decompose_tay(&x, &w_q, &w_k).unwrap();
            assert!(report.residual_max_abs < 1e-9, "{}", report.residual_max_abs);
            assert_eq!(report.membership_residual, 0.0);
        }
    }

    #[test]
    fn decompose_ours_exact_on_random_instances() {
        let mut rng = Rng::new(76);
        for _ in 0..10 {
            let x = random_qt(&mut rng, vec![4, 2]);
            let w_q = random_qt(&mut rng, vec![2, 2]);
            let w_k = random_qt(&mut rng, vec![2, 2]);
            let report = decompose_ours(&x, &w_q, &w_k).unwrap();
            assert!(report.residual_max_abs < 1e-9, "{}", report.residual_max_abs);
            assert_eq!(report.membership_residual, 0.0);
        }
    }

    #[test]
    fn decompose_zero_input_is_zero() {
        let mut rng = Rng::new(77);
        let x = QTensor::zeros(vec![3, 2]);
        let w_q = random_qt(&mut rng, vec![2, 2]);
        let w_k = random_qt(&mut rng, vec![2, 2]);
        let report = decompose_tay(&x, &w_q, &w_k).unwrap();
        assert_eq!(report.residual_max_abs, 0.0);
    }

    #[test]
    fn decompose_plane0_weights_specialize() {
        // Real-plane-only weights make Φ and Ψ block-diagonal with
        // Λ_0^{ββ} = ± W_{Q,0} W_{K,0}^T and M^{ββ} = W_{Q,0} W_{K,0}^T.
        let mut rng = Rng::new(78);
        let mut w_q = QTensor::zeros(vec![2, 2]);
        let mut w_k = QTensor::zeros(vec![2, 2]);
        let fill_q = random_qt(&mut rng, vec![2, 2]);
        let fill_k = random_qt(&mut rng, vec![2, 2]);
        w_q.plane_mut(0).copy_from_slice(fill_q.plane(0));
        w_k.plane_mut(0).copy_from_slice(fill_k.plane(0));

        let wq0 = w_q.plane_as_mat(0).unwrap();
        let wk0 = w_k.plane_as_mat(0).unwrap();
        let base = wq0.matmul_transpose_b(&wk0).unwrap();

        // Signs of Λ_0^{ββ}: the (β, β) term of component 0 is +1 for β=0
        // and -1 otherwise, matching the Hamilton diagonal.
        let x = random_qt(&mut rng, vec![3, 2]);
        let report = decompose_tay(&x, &w_q, &w_k).unwrap();
        assert!(report.residual_max_abs < 1e-9);
        let norm = base.frobenius_norm();
        for (key, value) in &report.coefficient_norms {
            let (alpha, beta, gamma) = *key;
            if alpha == 0 && beta == gamma {
                assert!((value - norm).abs() < 1e-12);
            }
        }

        let ours = decompose_ours(&x, &w_q, &w_k).unwrap();
        assert!(ours.residual_max_abs < 1e-9);
        for (key, value) in &ours.coefficient_norms {
            let (_, beta, gamma) = *key;
            if beta == gamma {
                assert!((value - norm).abs() < 1e-12);
            } else {
                assert!(*value < 1e-12);
            }
        }
    }

    #[test]
    fn decompose_shape_checks() {
        let x = QTensor::zeros(vec![3, 2]);
        let w_bad = QTensor::zeros(vec![3, 2]);
        let w_ok = QTensor::zeros(vec![2, 2]);
        assert!(decompose_tay(&x, &w_bad, &w_ok).is_err());
        assert!(decompose_ours(&x, &w_ok, &w_bad).is_err());
    }
}
