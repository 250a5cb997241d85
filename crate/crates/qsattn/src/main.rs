use clap::{Args, Parser, Subcommand};
use qsattn::analysis::{
    component_agreement, decompose_ours, decompose_tay, similarity_report, topk_agreement,
    topk_agreement_symmetric,
};
use qsattn::attention::{shared_attention, tay_attention, AttnConfig, AttnMode, AttnWeights};
use qsattn::bench::{bench_sweep, macs_model, BenchDtype};
use qsattn::gradcheck::{grad_norm_correlation, grad_norm_experiment, GradNormConfig, LossKind};
use qsattn::report::{fmt_f64, write_report, Table};
use qsattn::selftest::{run_selftest, SelftestTolerances};
use qsattn::{qtb, QTensor, Result, Rng};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

/// Quaternion self-attention with shared scores: kernels, verification
/// suites, and benchmarks.
#[derive(Parser)]
#[command(name = "qsattn", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Seed controlling all randomness of the run.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the report to this path (.json or .csv); default prints a table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full invariant suite; nonzero exit on any failure.
    Selftest {
        #[command(flatten)]
        common: CommonOpts,
        /// Tolerance for exact algebra identities.
        #[arg(long, default_value_t = 1e-12)]
        tol_algebra: f64,
        /// Tolerance for decomposition residuals.
        #[arg(long, default_value_t = 1e-9)]
        tol_decomposition: f64,
        /// Relative tolerance for gradient checks.
        #[arg(long, default_value_t = 1e-6)]
        tol_gradient: f64,
    },
    /// Time the attention forward pass across sequence lengths.
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated sequence lengths.
        #[arg(long, value_delimiter = ',', default_value = "512,1024,2048,4096")]
        seq: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        d_model: usize,
        #[arg(long, default_value_t = 8)]
        heads: usize,
        /// shared, componentwise, or both.
        #[arg(long, default_value = "both")]
        mode: String,
        #[arg(long, default_value_t = 50)]
        warmup: usize,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        /// f64 (default) or f32.
        #[arg(long, default_value = "f64")]
        dtype: String,
        /// Count the Q/K/V projections in the MACs total.
        #[arg(long)]
        include_projections: bool,
    },
    /// Print the analytic MACs model without timing anything.
    Macs {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, value_delimiter = ',', default_value = "512,1024,2048,4096")]
        seq: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        d_model: usize,
        #[arg(long, default_value_t = 8)]
        heads: usize,
        #[arg(long)]
        include_projections: bool,
    },
    /// Score-gradient norm experiment over random initializations.
    Gradnorm {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 128)]
        seq: usize,
        #[arg(long, default_value_t = 64)]
        d_model: usize,
        #[arg(long, default_value_t = 1)]
        heads: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// mean-sq or sum.
        #[arg(long, default_value = "mean-sq")]
        loss: String,
        /// equal (both formulations scored at 1/sqrt(4 d_head)) or per-mode.
        #[arg(long, default_value = "equal")]
        scale_policy: String,
        #[arg(long)]
        qk_norm: bool,
        /// Accepted range for the aggregated-vs-separated norm ratio.
        #[arg(long, default_value_t = 0.5)]
        ratio_min: f64,
        #[arg(long, default_value_t = 2.0)]
        ratio_max: f64,
    },
    /// Correlation of component gradient norms across random inputs.
    Gradcorr {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 128)]
        seq: usize,
        #[arg(long, default_value_t = 64)]
        d_model: usize,
        #[arg(long, default_value_t = 1)]
        heads: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value = "mean-sq")]
        loss: String,
        #[arg(long, default_value = "equal")]
        scale_policy: String,
        /// Sample the weights once and hold them fixed across trials
        /// (default resamples fresh weights per trial).
        #[arg(long)]
        fixed_weights: bool,
        /// Off-diagonal magnitude above which the run fails.
        #[arg(long, default_value_t = 0.1)]
        tol_offdiag: f64,
    },
    /// Inter-component agreement of component-wise attention maps.
    Agreement {
        #[command(flatten)]
        common: CommonOpts,
        /// Compare two attention-map files directly instead of generating
        /// component maps from queries and keys.
        #[arg(long, requires = "map_b")]
        map_a: Option<PathBuf>,
        #[arg(long, requires = "map_a")]
        map_b: Option<PathBuf>,
        /// Query tensor file ([T,d] or [H,T,d]); random if omitted.
        #[arg(long, requires = "k")]
        q: Option<PathBuf>,
        /// Key tensor file.
        #[arg(long, requires = "q")]
        k: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        t: usize,
        #[arg(long, default_value_t = 8)]
        d_head: usize,
        #[arg(long, default_value_t = 4)]
        heads: usize,
        /// Also report top-k agreement at this k.
        #[arg(long)]
        topk: Option<usize>,
        /// Write every attention map as `<prefix>_h<head>_{shared,tay<c>}.qtb`
        /// ([T,T] real maps stored in plane q0).
        #[arg(long)]
        export_maps: Option<String>,
    },
    /// Distribution similarity between the two formulations' outputs on the
    /// same queries, keys, and values.
    Simcompare {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, requires_all = ["k", "v"])]
        q: Option<PathBuf>,
        #[arg(long)]
        k: Option<PathBuf>,
        #[arg(long)]
        v: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        t: usize,
        #[arg(long, default_value_t = 8)]
        d_head: usize,
        #[arg(long, default_value_t = 100)]
        quantiles: usize,
    },
    /// Verify the score-decomposition identities; nonzero exit above
    /// tolerance.
    Decompose {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value_t = 4)]
        t: usize,
        #[arg(long, default_value_t = 2)]
        d_in: usize,
        #[arg(long, default_value_t = 2)]
        d_h: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Load X, W_Q, W_K from files instead of generating them:
        /// --from-files X.qtb WQ.qtb WK.qtb
        #[arg(long, num_args = 3, value_names = ["X", "WQ", "WK"])]
        from_files: Option<Vec<PathBuf>>,
    },
    /// Write a seeded random tensor to a QTB file.
    Gen {
        /// input (std 1) or weight (std 1/sqrt(4 d_in)).
        #[arg(long, default_value = "input")]
        kind: String,
        /// Comma-separated shape, e.g. 4,2.
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Override the kind-derived standard deviation.
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, required = true)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn parse_modes(mode: &str) -> Result<Vec<AttnMode>> {
    match mode {
        "both" => Ok(vec![AttnMode::Shared, AttnMode::Componentwise]),
        other => Ok(vec![other.parse()?]),
    }
}

fn emit<T: Serialize>(
    common: &CommonOpts,
    kind: &str,
    payload: &T,
    table: &Table,
) -> Result<()> {
    match &common.out {
        Some(path) => {
            write_report(path, kind, payload, table)?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", table.to_pretty()),
    }
    Ok(())
}

/// Returns Ok(true) on success, Ok(false) on verification failure.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Selftest {
            common,
            tol_algebra,
            tol_decomposition,
            tol_gradient,
        } => {
            let tol = SelftestTolerances {
                algebra: tol_algebra,
                equivalence: tol_algebra,
                decomposition: tol_decomposition,
                gradient_rel: tol_gradient,
            };
            let report = run_selftest(common.seed, tol)?;
            let mut table = Table::new(&["check", "worst", "tolerance", "status"]);
            for check in &report.checks {
                table.push_row(vec![
                    check.name.clone(),
                    fmt_f64(check.worst),
                    fmt_f64(check.tolerance),
                    if check.passed { "pass" } else { "FAIL" }.to_string(),
                ]);
            }
            emit(&common, "selftest", &report, &table)?;
            if !report.all_passed {
                eprintln!("selftest: FAILED");
            }
            Ok(report.all_passed)
        }

        Command::Bench {
            common,
            seq,
            d_model,
            heads,
            mode,
            warmup,
            reps,
            dtype,
            include_projections,
        } => {
            let modes = parse_modes(&mode)?;
            let dtype: BenchDtype = dtype.parse()?;
            let rows = bench_sweep(
                &seq,
                d_model,
                heads,
                &modes,
                warmup,
                reps,
                dtype,
                include_projections,
                common.seed,
            )?;
            let mut table = Table::new(&[
                "T",
                "mode",
                "macs_total",
                "macs_score",
                "softmax_ops",
                "median_ms",
                "dispersion",
                "speedup_vs_componentwise",
            ]);
            for row in &rows {
                table.push_row(vec![
                    row.seq_len.to_string(),
                    row.mode.as_str().to_string(),
                    row.macs_total.to_string(),
                    row.macs_score.to_string(),
                    row.softmax_ops.to_string(),
                    fmt_f64(row.median_ms),
                    fmt_f64(row.dispersion_ms),
                    row.speedup_vs_componentwise
                        .map(fmt_f64)
                        .unwrap_or_default(),
                ]);
            }
            emit(&common, "bench", &rows, &table)?;
            Ok(true)
        }

        Command::Macs {
            common,
            seq,
            d_model,
            heads,
            include_projections,
        } => {
            let mut table = Table::new(&[
                "T",
                "mode",
                "projections",
                "score_stage",
                "av_stage",
                "softmax_ops",
                "total",
            ]);
            let mut payload = Vec::new();
            for &t in &seq {
                for mode in [AttnMode::Shared, AttnMode::Componentwise] {
                    let cfg = AttnConfig::new(t, d_model, heads, mode)?;
                    let macs = macs_model(&cfg, include_projections)?;
                    table.push_row(vec![
                        t.to_string(),
                        mode.as_str().to_string(),
                        macs.projections.to_string(),
                        macs.score_stage.to_string(),
                        macs.av_stage.to_string(),
                        macs.softmax_ops.to_string(),
                        macs.total.to_string(),
                    ]);
                    payload.push(macs);
                }
            }
            emit(&common, "macs", &payload, &table)?;
            Ok(true)
        }

        Command::Gradnorm {
            common,
            batch,
            seq,
            d_model,
            heads,
            trials,
            loss,
            scale_policy,
            qk_norm,
            ratio_min,
            ratio_max,
        } => {
            let cfg = GradNormConfig {
                batch,
                seq_len: seq,
                d_model,
                heads,
                trials,
                loss: loss.parse::<LossKind>()?,
                qk_norm,
                scale_policy: scale_policy.parse()?,
            };
            let report = grad_norm_experiment(&cfg, common.seed)?;
            let mut table = Table::new(&["quantity", "mean", "std"]);
            table.push_row(vec![
                "shared |dL/dS|_F".to_string(),
                fmt_f64(report.shared_norm_mean),
                fmt_f64(report.shared_norm_std),
            ]);
            for alpha in 0..4 {
                table.push_row(vec![
                    format!("componentwise |dL/dS_{alpha}|_F"),
                    fmt_f64(report.tay_norm_mean[alpha]),
                    fmt_f64(report.tay_norm_std[alpha]),
                ]);
            }
            table.push_row(vec![
                "ratio sum(componentwise)/shared".to_string(),
                fmt_f64(report.ratio_tay_sum_over_shared),
                String::new(),
            ]);
            table.push_row(vec![
                "component mean spread".to_string(),
                fmt_f64(report.component_spread),
                String::new(),
            ]);
            table.push_row(vec![
                "fd check max rel error".to_string(),
                fmt_f64(report.max_rel_error),
                String::new(),
            ]);
            emit(&common, "gradnorm", &report, &table)?;

            let ratio_ok = (ratio_min..=ratio_max).contains(&report.ratio_tay_sum_over_shared);
            let fd_ok = report.max_rel_error < 1e-6;
            if !ratio_ok {
                eprintln!(
                    "gradnorm: ratio {} outside [{ratio_min}, {ratio_max}]",
                    report.ratio_tay_sum_over_shared
                );
            }
            if !fd_ok {
                eprintln!("gradnorm: fd check failed ({})", report.max_rel_error);
            }
            Ok(ratio_ok && fd_ok)
        }

        Command::Gradcorr {
            common,
            batch,
            seq,
            d_model,
            heads,
            trials,
            loss,
            scale_policy,
            fixed_weights,
            tol_offdiag,
        } => {
            let cfg = GradNormConfig {
                batch,
                seq_len: seq,
                d_model,
                heads,
                trials,
                loss: loss.parse::<LossKind>()?,
                qk_norm: false,
                scale_policy: scale_policy.parse()?,
            };
            let fixed;
            let weights = if fixed_weights {
                let attn_cfg =
                    AttnConfig::new(seq, d_model, heads, AttnMode::Componentwise)?;
                let mut rng = Rng::with_stream(common.seed, 0xF1);
                fixed = AttnWeights::random(&attn_cfg, &mut rng)?;
                Some(&fixed)
            } else {
                None
            };
            let report = grad_norm_correlation(&cfg, weights, common.seed)?;
            let mut table = Table::new(&["component", "0", "1", "2", "3"]);
            for i in 0..4 {
                let mut row = vec![i.to_string()];
                for j in 0..4 {
                    row.push(fmt_f64(report.matrix[i][j]));
                }
                table.push_row(row);
            }
            emit(&common, "gradcorr", &report, &table)?;
            println!(
                "max |off-diagonal| = {} over {} samples",
                fmt_f64(report.max_abs_off_diagonal),
                report.samples
            );
            if report.max_abs_off_diagonal >= tol_offdiag {
                eprintln!(
                    "gradcorr: off-diagonal {} exceeds {tol_offdiag}",
                    report.max_abs_off_diagonal
                );
                return Ok(false);
            }
            Ok(true)
        }

        Command::Agreement {
            common,
            map_a,
            map_b,
            q,
            k,
            t,
            d_head,
            heads,
            topk,
            export_maps,
        } => {
            if let (Some(a_path), Some(b_path)) = (map_a, map_b) {
                let a = qtb::read_file(&a_path)?.plane_as_mat(0)?;
                let b = qtb::read_file(&b_path)?.plane_as_mat(0)?;
                let k = topk.unwrap_or(1);
                let directional = topk_agreement(&a, &b, k)?;
                let symmetric = topk_agreement_symmetric(&a, &b, k)?;
                let chance = k as f64 / a.cols() as f64;
                let mut table =
                    Table::new(&["k", "agreement", "symmetric", "chance_level"]);
                table.push_row(vec![
                    k.to_string(),
                    fmt_f64(directional),
                    fmt_f64(symmetric),
                    fmt_f64(chance),
                ]);
                #[derive(Serialize)]
                struct MapAgreement {
                    k: usize,
                    agreement: f64,
                    symmetric: f64,
                    chance_level: f64,
                }
                emit(
                    &common,
                    "agreement",
                    &MapAgreement {
                        k,
                        agreement: directional,
                        symmetric,
                        chance_level: chance,
                    },
                    &table,
                )?;
                return Ok(true);
            }

            // Component maps from provided or generated queries and keys.
            let (q_heads, k_heads) = match (q, k) {
                (Some(q_path), Some(k_path)) => {
                    let q = qtb::read_file(&q_path)?;
                    let k = qtb::read_file(&k_path)?;
                    (split_heads(q)?, split_heads(k)?)
                }
                _ => {
                    let mut rng = Rng::with_stream(common.seed, 0xA6);
                    let qs = (0..heads)
                        .map(|_| QTensor::random(vec![t, d_head], &mut rng, 1.0))
                        .collect::<Result<Vec<_>>>()?;
                    let ks = (0..heads)
                        .map(|_| QTensor::random(vec![t, d_head], &mut rng, 1.0))
                        .collect::<Result<Vec<_>>>()?;
                    (qs, ks)
                }
            };
            if q_heads.len() != k_heads.len() {
                return Err(qsattn::Error::InvalidArgument(
                    "query and key head counts differ".to_string(),
                ));
            }
            let mut maps = Vec::with_capacity(q_heads.len());
            for (head, (qh, kh)) in q_heads.iter().zip(&k_heads).enumerate() {
                let d = qh.shape()[1];
                let scale = 1.0 / (d as f64).sqrt();
                let scores = qsattn::attention::tay_score(qh, kh, scale)?;
                let quad = [
                    qsattn::attention::softmax_rows(&scores[0]),
                    qsattn::attention::softmax_rows(&scores[1]),
                    qsattn::attention::softmax_rows(&scores[2]),
                    qsattn::attention::softmax_rows(&scores[3]),
                ];
                if let Some(prefix) = &export_maps {
                    let shared_scale = 1.0 / (4.0 * d as f64).sqrt();
                    let shared_map = qsattn::attention::softmax_rows(
                        &qsattn::attention::shared_score(qh, kh, shared_scale)?,
                    );
                    qtb::write_file(
                        format!("{prefix}_h{head}_shared.qtb"),
                        &QTensor::from_real_mat(&shared_map),
                    )?;
                    for (c, map) in quad.iter().enumerate() {
                        qtb::write_file(
                            format!("{prefix}_h{head}_tay{c}.qtb"),
                            &QTensor::from_real_mat(map),
                        )?;
                    }
                }
                maps.push(quad);
            }
            let k_for_report = topk.unwrap_or(1);
            let reports = component_agreement(&maps, k_for_report)?;
            let mut table =
                Table::new(&["pair", "mean_pct", "std_pct", "chance_pct", "heads"]);
            for r in &reports {
                table.push_row(vec![
                    format!("{}-{}", r.pair.0, r.pair.1),
                    fmt_f64(100.0 * r.mean),
                    fmt_f64(100.0 * r.std),
                    fmt_f64(100.0 * r.chance_level),
                    r.per_head.len().to_string(),
                ]);
            }
            let overall: f64 =
                reports.iter().map(|r| r.mean).sum::<f64>() / reports.len() as f64;
            table.push_row(vec![
                "overall".to_string(),
                fmt_f64(100.0 * overall),
                String::new(),
                String::new(),
                String::new(),
            ]);
            emit(&common, "agreement", &reports, &table)?;
            Ok(true)
        }

        Command::Simcompare {
            common,
            q,
            k,
            v,
            t,
            d_head,
            quantiles,
        } => {
            let (q, k, v) = match (q, k, v) {
                (Some(qp), Some(kp), Some(vp)) => (
                    qtb::read_file(&qp)?,
                    qtb::read_file(&kp)?,
                    qtb::read_file(&vp)?,
                ),
                _ => {
                    let mut rng = Rng::with_stream(common.seed, 0x51);
                    (
                        QTensor::random(vec![t, d_head], &mut rng, 1.0)?,
                        QTensor::random(vec![t, d_head], &mut rng, 1.0)?,
                        QTensor::random(vec![t, d_head], &mut rng, 1.0)?,
                    )
                }
            };
            let d = q.shape()[1];
            let shared = shared_attention(&q, &k, &v, 1.0 / (4.0 * d as f64).sqrt())?;
            let tay = tay_attention(&q, &k, &v, 1.0 / (d as f64).sqrt())?;
            let report = similarity_report(&shared.to_flat(), &tay.to_flat(), quantiles)?;
            let mut table = Table::new(&["metric", "value"]);
            table.push_row(vec!["ks_stat".to_string(), fmt_f64(report.ks_stat)]);
            table.push_row(vec![
                "wasserstein".to_string(),
                fmt_f64(report.wasserstein),
            ]);
            table.push_row(vec![
                "quantile_corr".to_string(),
                fmt_f64(report.quantile_corr),
            ]);
            emit(&common, "simcompare", &report, &table)?;
            Ok(true)
        }

        Command::Decompose {
            common,
            t,
            d_in,
            d_h,
            tol,
            from_files,
        } => {
            let (x, w_q, w_k) = match from_files {
                Some(paths) => (
                    qtb::read_file(&paths[0])?,
                    qtb::read_file(&paths[1])?,
                    qtb::read_file(&paths[2])?,
                ),
                None => {
                    let mut rng = Rng::with_stream(common.seed, 0xDE);
                    let w_std = 1.0 / (4.0 * d_in as f64).sqrt();
                    (
                        QTensor::random(vec![t, d_in], &mut rng, 1.0)?,
                        QTensor::random(vec![d_in, d_h], &mut rng, w_std)?,
                        QTensor::random(vec![d_in, d_h], &mut rng, w_std)?,
                    )
                }
            };
            let tay = decompose_tay(&x, &w_q, &w_k)?;
            let ours = decompose_ours(&x, &w_q, &w_k)?;
            let mut table =
                Table::new(&["decomposition", "residual_max_abs", "membership_residual"]);
            table.push_row(vec![
                "componentwise".to_string(),
                fmt_f64(tay.residual_max_abs),
                fmt_f64(tay.membership_residual),
            ]);
            table.push_row(vec![
                "shared".to_string(),
                fmt_f64(ours.residual_max_abs),
                fmt_f64(ours.membership_residual),
            ]);
            #[derive(Serialize)]
            struct Both {
                componentwise: qsattn::analysis::DecompositionReport,
                shared: qsattn::analysis::DecompositionReport,
            }
            emit(
                &common,
                "decompose",
                &Both {
                    componentwise: tay.clone(),
                    shared: ours.clone(),
                },
                &table,
            )?;
            let ok = tay.residual_max_abs < tol
                && ours.residual_max_abs < tol
                && tay.membership_residual < tol
                && ours.membership_residual < tol;
            if !ok {
                eprintln!("decompose: residual above tolerance {tol}");
            }
            Ok(ok)
        }

        Command::Gen {
            kind,
            shape,
            seed,
            scale,
            out,
        } => {
            let std = match (kind.as_str(), scale) {
                (_, Some(s)) => s,
                ("input", None) => 1.0,
                ("weight", None) => {
                    let d_in = shape.first().copied().unwrap_or(1).max(1);
                    1.0 / (4.0 * d_in as f64).sqrt()
                }
                (other, None) => {
                    return Err(qsattn::Error::InvalidArgument(format!(
                        "unknown kind {other:?} (expected input or weight)"
                    )))
                }
            };
            let mut rng = Rng::new(seed);
            let tensor = QTensor::random(shape, &mut rng, std)?;
            if kind == "weight" && (tensor.ndim() == 2 || tensor.ndim() == 4) {
                let layer_kind = if tensor.ndim() == 2 { "qlinear" } else { "qconv2d" };
                qsattn::layers::save_layer_weights(&out, layer_kind, &tensor)?;
            } else {
                qtb::write_file(&out, &tensor)?;
            }
            println!("wrote {}", out.display());
            Ok(true)
        }
    }
}

/// Splits `[H, T, d]` tensors into per-head `[T, d]` tensors; passes 2-D
/// tensors through as a single head.
fn split_heads(t: QTensor) -> Result<Vec<QTensor>> {
    match *t.shape() {
        [_, _] => Ok(vec![t]),
        [h, rows, cols] => {
            let mut out = Vec::with_capacity(h);
            let plane_len = rows * cols;
            for head in 0..h {
                let planes: [Vec<f64>; 4] = std::array::from_fn(|p| {
                    t.plane(p)[head * plane_len..(head + 1) * plane_len].to_vec()
                });
                out.push(QTensor::new(vec![rows, cols], planes)?);
            }
            Ok(out)
        }
        _ => Err(qsattn::Error::ShapeMismatch(format!(
            "expected [T,d] or [H,T,d], got {:?}",
            t.shape()
        ))),
    }
}
