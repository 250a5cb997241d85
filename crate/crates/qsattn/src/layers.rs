//! Quaternion layers: linear, reference 2-D convolution, RMS normalization,
//! and parameter accounting.
//!
//! All layers share one structural property: a single quaternion weight
//! produces all four output components through the Hamilton product, so a
//! quaternion layer carries exactly one quarter of the real parameters of the
//! real-valued layer with the same input/output dimensionality.

use crate::error::{Error, Result};
use crate::quat::Quaternion;
use crate::tensor::{QTensor, HAMILTON_TERMS};
use serde::{Deserialize, Serialize};

/// Quaternion linear layer `Y = X ⊗ W` with `W ∈ H^{d_in × d_out}`.
#[derive(Debug, Clone)]
pub struct QLinear {
    weight: QTensor,
}

impl QLinear {
    pub fn new(weight: QTensor) -> Result<Self> {
        if weight.ndim() != 2 {
            return Err(Error::shape(format!(
                "linear weight must be 2-D, got {:?}",
                weight.shape()
            )));
        }
        Ok(QLinear { weight })
    }

    pub fn identity(d: usize) -> Self {
        QLinear {
            weight: QTensor::identity(d),
        }
    }

    pub fn weight(&self) -> &QTensor {
        &self.weight
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape()[1]
    }

    /// `Y = X ⊗ W` for a row-stacked input `X ∈ H^{T × d_in}`.
    pub fn forward(&self, x: &QTensor) -> Result<QTensor> {
        x.matmul(&self.weight)
    }
}

/// The 4x4 real matrix `M(w)` with `M(w) · [x0,x1,x2,x3]^T` equal to the
/// components of `x ⊗ w`. One scalar weight couples all four components.
pub fn qlinear_real_matrix(w: Quaternion) -> [[f64; 4]; 4] {
    [
        [w.q0, -w.q1, -w.q2, -w.q3],
        [w.q1, w.q0, w.q3, -w.q2],
        [w.q2, -w.q3, w.q0, w.q1],
        [w.q3, w.q2, -w.q1, w.q0],
    ]
}

/// The expanded `4·d_in x 4·d_out` real block matrix equivalent to a
/// quaternion linear layer acting on vectorized inputs: block `(mu, nu)` is
/// `sigma · W_p` with the Hamilton structure signs, laid out so that
/// `vec(Y) = vec(X) · B` for component-grouped vectorization.
pub fn qlinear_real_block_matrix(weight: &QTensor) -> Result<crate::matrix::Mat> {
    if weight.ndim() != 2 {
        return Err(Error::shape("block matrix needs a 2-D weight".to_string()));
    }
    let (d_in, d_out) = (weight.shape()[0], weight.shape()[1]);
    let mut out = crate::matrix::Mat::zeros(4 * d_in, 4 * d_out);
    // Y_alpha picks up X_mu W_nu with sign sigma for (mu, nu) in row alpha.
    for (alpha, terms) in HAMILTON_TERMS.iter().enumerate() {
        for &(mu, nu, sign) in terms {
            let w = weight.plane(nu);
            for r in 0..d_in {
                for c in 0..d_out {
                    out.set(mu * d_in + r, alpha * d_out + c, sign * w[r * d_out + c]);
                }
            }
        }
    }
    Ok(out)
}

/// Quaternion 2-D convolution, reference implementation: valid padding,
/// stride 1, no bias. Kernel `W ∈ H^{C_out × C_in × k × k}`.
#[derive(Debug, Clone)]
pub struct QConv2d {
    weight: QTensor,
}

impl QConv2d {
    pub fn new(weight: QTensor) -> Result<Self> {
        if weight.ndim() != 4 {
            return Err(Error::shape(format!(
                "conv weight must be 4-D, got {:?}",
                weight.shape()
            )));
        }
        if weight.shape()[2] != weight.shape()[3] {
            return Err(Error::shape("conv kernel must be square".to_string()));
        }
        Ok(QConv2d { weight })
    }

    pub fn weight(&self) -> &QTensor {
        &self.weight
    }

    /// Cross-correlate `x ∈ H^{C_in × H × W}` with the quaternion kernel.
    /// Each output plane is the four-term signed sum of real cross
    /// correlations given by the Hamilton expansion.
    pub fn forward(&self, x: &QTensor) -> Result<QTensor> {
        if x.ndim() != 3 {
            return Err(Error::shape(format!(
                "conv input must be 3-D, got {:?}",
                x.shape()
            )));
        }
        let (c_out, c_in, k) = (
            self.weight.shape()[0],
            self.weight.shape()[1],
            self.weight.shape()[2],
        );
        let (xc, xh, xw) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        if xc != c_in {
            return Err(Error::shape(format!(
                "conv expects {c_in} input channels, got {xc}"
            )));
        }
        if k > xh || k > xw {
            return Err(Error::shape(format!(
                "kernel {k}x{k} larger than input {xh}x{xw}"
            )));
        }
        let (oh, ow) = (xh - k + 1, xw - k + 1);
        let mut out = QTensor::zeros(vec![c_out, oh, ow]);

        for (alpha, terms) in HAMILTON_TERMS.iter().enumerate() {
            for &(mu, nu, sign) in terms {
                let xp = x.plane(mu);
                let wp = self.weight.plane(nu);
                let op = out.plane_mut(alpha);
                for co in 0..c_out {
                    for ci in 0..c_in {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let mut acc = 0.0;
                                for ky in 0..k {
                                    for kx in 0..k {
                                        let xi = (ci * xh + oy + ky) * xw + ox + kx;
                                        let wi = ((co * c_in + ci) * k + ky) * k + kx;
                                        acc += xp[xi] * wp[wi];
                                    }
                                }
                                op[(co * oh + oy) * ow + ox] += sign * acc;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Quaternion RMS normalization parameters: one scalar gain per quaternion
/// unit plus the stabilizer `eps`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QRmsNormParams {
    pub gamma: Vec<f64>,
    pub eps: f64,
}

impl QRmsNormParams {
    pub fn ones(d: usize) -> Self {
        QRmsNormParams {
            gamma: vec![1.0; d],
            eps: 1e-8,
        }
    }

    pub fn with_eps(d: usize, eps: f64) -> Self {
        QRmsNormParams {
            gamma: vec![1.0; d],
            eps,
        }
    }
}

/// Per-unit RMS normalization treating the four quaternion components as one
/// entity: each unit is divided by
/// `sqrt(mean(q0², q1², q2², q3²) + eps)` and multiplied by its gain.
/// The unit axis is the last axis of `x`.
///
/// The RMS is taken over the four components of each unit only, never pooled
/// across the feature axis; a feature-pooled variant would normalize whole
/// rows instead and is deliberately not what this computes.
pub fn qrmsnorm(x: &QTensor, params: &QRmsNormParams) -> Result<QTensor> {
    let d = *x
        .shape()
        .last()
        .ok_or_else(|| Error::shape("rmsnorm input must have at least one axis".to_string()))?;
    if params.gamma.len() != d {
        return Err(Error::shape(format!(
            "gamma has {} gains, last axis is {d}",
            params.gamma.len()
        )));
    }
    let mut out = x.clone();
    let len = x.len();
    for idx in 0..len {
        let q = x.get_quat(idx);
        let rms = (q.norm_sq() / 4.0 + params.eps).sqrt();
        let gain = params.gamma[idx % d];
        let scaled = if rms == 0.0 {
            Quaternion::ZERO
        } else {
            q.scale(gain / rms)
        };
        out.set_quat(idx, scaled);
    }
    Ok(out)
}

/// Kind of layer being counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Linear { d_in: usize, d_out: usize },
    Conv2d { c_in: usize, c_out: usize, k: usize },
}

/// Real-parameter count of a quaternion layer against the real-valued layer
/// of equal input/output dimensionality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamCount {
    pub quaternion_real_params: u64,
    pub equivalent_real_params: u64,
    pub ratio: f64,
}

/// Sidecar metadata written next to serialized layer weights.
#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
struct LayerSidecar {
    schema_version: u32,
    layer: String,
    dims: Vec<usize>,
}

fn sidecar_path(path: &std::path::Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Writes layer weights as a QTB tensor plus a JSON sidecar
/// (`<stem>.json`) naming the layer kind and dimensions.
pub fn save_layer_weights(path: &std::path::Path, kind: &str, weight: &QTensor) -> Result<()> {
    let expected = match kind {
        "qlinear" => 2,
        "qconv2d" => 4,
        other => {
            return Err(Error::invalid(format!(
                "unknown layer kind {other:?} (expected qlinear or qconv2d)"
            )))
        }
    };
    if weight.ndim() != expected {
        return Err(Error::shape(format!(
            "{kind} weights must be {expected}-D, got {:?}",
            weight.shape()
        )));
    }
    crate::qtb::write_file(path, weight)?;
    let sidecar = LayerSidecar {
        schema_version: crate::report::SCHEMA_VERSION,
        layer: kind.to_string(),
        dims: weight.shape().to_vec(),
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Reads layer weights written by [`save_layer_weights`], checking the
/// sidecar against the tensor.
pub fn load_layer_weights(path: &std::path::Path) -> Result<(String, QTensor)> {
    let weight = crate::qtb::read_file(path)?;
    let json = std::fs::read_to_string(sidecar_path(path))?;
    let sidecar: LayerSidecar =
        serde_json::from_str(&json).map_err(|e| Error::Format(e.to_string()))?;
    if sidecar.dims != weight.shape() {
        return Err(Error::Format(format!(
            "sidecar dims {:?} disagree with tensor shape {:?}",
            sidecar.dims,
            weight.shape()
        )));
    }
    Ok((sidecar.layer, weight))
}

pub fn param_count(kind: LayerKind) -> Result<ParamCount> {
    let (quat, real) = match kind {
        LayerKind::Linear { d_in, d_out } => {
            if d_in == 0 || d_out == 0 {
                return Err(Error::invalid("linear dims must be nonzero".to_string()));
            }
            let q = 4 * d_in as u64 * d_out as u64;
            (q, 4 * q)
        }
        LayerKind::Conv2d { c_in, c_out, k } => {
            if c_in == 0 || c_out == 0 || k == 0 {
                return Err(Error::invalid("conv dims must be nonzero".to_string()));
            }
            let q = 4 * c_in as u64 * c_out as u64 * (k * k) as u64;
            (q, 4 * q)
        }
    };
    Ok(ParamCount {
        quaternion_real_params: quat,
        equivalent_real_params: real,
        ratio: quat as f64 / real as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Mat;
    use crate::rng::Rng;

    #[test]
    fn linear_identity_weight() {
        let mut rng = Rng::new(90);
        let x = QTensor::random(vec![3, 4], &mut rng, 1.0).unwrap();
        let layer = QLinear::identity(4);
        let y = layer.forward(&x).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn linear_pure_i_weight_permutes_planes() {
        // x ⊗ i = -x1 + x0 i + x3 j - x2 k
        let x = QTensor::new(
            vec![1, 1],
            [vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
        )
        .unwrap();
        let w = QTensor::new(vec![1, 1], [vec![0.0], vec![1.0], vec![0.0], vec![0.0]]).unwrap();
        let y = QLinear::new(w).unwrap().forward(&x).unwrap();
        assert_eq!(y.get_quat(0), Quaternion::new(-2.0, 1.0, 4.0, -3.0));
    }

    #[test]
    fn real_matrix_form_matches_scalar_product() {
        let mut rng = Rng::new(91);
        assert_eq!(
            qlinear_real_matrix(Quaternion::ONE),
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0]
            ]
        );
        for _ in 0..100 {
            let w = Quaternion::new(
                rng.uniform_signed(),
                rng.uniform_signed(),
                rng.uniform_signed(),
                rng.uniform_signed(),
            );
            let x = Quaternion::new(
                rng.uniform_signed(),
                rng.uniform_signed(),
                rng.uniform_signed(),
                rng.uniform_signed(),
            );
            let m = qlinear_real_matrix(w);
            let xv = [x.q0, x.q1, x.q2, x.q3];
            let want = x * w;
            for (r, row) in m.iter().enumerate() {
                let got: f64 = row.iter().zip(xv).map(|(a, b)| a * b).sum();
                assert!((got - want.component(r)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn real_matrix_on_basis_matches_right_mul_by_i() {
        let m = qlinear_real_matrix(Quaternion::I);
        for b in 0..4 {
            let x = Quaternion::basis(b);
            let want = x * Quaternion::I;
            let xv = [x.q0, x.q1, x.q2, x.q3];
            for (r, row) in m.iter().enumerate() {
                let got: f64 = row.iter().zip(xv).map(|(a, b)| a * b).sum();
                assert_eq!(got, want.component(r));
            }
        }
    }

    #[test]
    fn forward_matches_real_block_matrix() {
        let mut rng = Rng::new(92);
        let x = QTensor::random(vec![5, 3], &mut rng, 1.0).unwrap();
        let w = QTensor::random(vec![3, 2], &mut rng, 1.0).unwrap();
        let y = QLinear::new(w.clone()).unwrap().forward(&x).unwrap();

        // Expand each input row to R^{4 d_in}, multiply by the block matrix,
        // and compare against the component-grouped expansion of the output.
        let block = qlinear_real_block_matrix(&w).unwrap();
        for t in 0..5 {
            let row = x.slice_rows(t, t + 1).unwrap();
            let mut vx = Vec::with_capacity(12);
            for plane in 0..4 {
                vx.extend_from_slice(row.plane(plane));
            }
            let vrow = Mat::from_vec(1, 12, vx).unwrap();
            let vy = vrow.matmul(&block).unwrap();

            let yrow = y.slice_rows(t, t + 1).unwrap();
            let mut want = Vec::with_capacity(8);
            for plane in 0..4 {
                want.extend_from_slice(yrow.plane(plane));
            }
            for (a, b) in vy.data().iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = Rng::new(93);
        let x = QTensor::random(vec![1, 3, 3], &mut rng, 1.0).unwrap();
        let w = QTensor::new(
            vec![1, 1, 1, 1],
            [vec![1.0], vec![0.0], vec![0.0], vec![0.0]],
        )
        .unwrap();
        let y = QConv2d::new(w).unwrap().forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        assert!(y.max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn conv_pure_i_kernel_matches_right_multiplication() {
        let mut rng = Rng::new(94);
        let x = QTensor::random(vec![1, 2, 2], &mut rng, 1.0).unwrap();
        let w = QTensor::new(
            vec![1, 1, 1, 1],
            [vec![0.0], vec![1.0], vec![0.0], vec![0.0]],
        )
        .unwrap();
        let y = QConv2d::new(w).unwrap().forward(&x).unwrap();
        for idx in 0..4 {
            let want = x.get_quat(idx) * Quaternion::I;
            let got = y.get_quat(idx);
            assert!((want - got).norm_sq() < 1e-24);
        }
    }

    #[test]
    fn conv_matches_sliding_window_oracle() {
        let mut rng = Rng::new(95);
        let x = QTensor::random(vec![1, 4, 4], &mut rng, 1.0).unwrap();
        let w = QTensor::random(vec![1, 1, 2, 2], &mut rng, 1.0).unwrap();
        let y = QConv2d::new(w.clone()).unwrap().forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);

        for oy in 0..3 {
            for ox in 0..3 {
                let mut acc = Quaternion::ZERO;
                for ky in 0..2 {
                    for kx in 0..2 {
                        let xq = x.get_quat((oy + ky) * 4 + (ox + kx));
                        let wq = w.get_quat(ky * 2 + kx);
                        acc = acc + xq * wq;
                    }
                }
                let got = y.get_quat(oy * 3 + ox);
                assert!((acc - got).norm_sq() < 1e-20);
            }
        }
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let x = QTensor::zeros(vec![1, 2, 2]);
        let w = QTensor::zeros(vec![1, 1, 3, 3]);
        assert!(matches!(
            QConv2d::new(w).unwrap().forward(&x),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn rmsnorm_examples() {
        let x = QTensor::new(vec![1], [vec![2.0], vec![2.0], vec![2.0], vec![2.0]]).unwrap();
        let params = QRmsNormParams::with_eps(1, 0.0);
        let y = qrmsnorm(&x, &params).unwrap();
        assert_eq!(y.get_quat(0), Quaternion::new(1.0, 1.0, 1.0, 1.0));

        let zero = QTensor::zeros(vec![1]);
        let params = QRmsNormParams::with_eps(1, 1e-8);
        let y = qrmsnorm(&zero, &params).unwrap();
        assert_eq!(y.get_quat(0), Quaternion::ZERO);
    }

    #[test]
    fn rmsnorm_scale_invariance_and_unit_rms() {
        let mut rng = Rng::new(96);
        let x = QTensor::random(vec![2, 3], &mut rng, 2.0).unwrap();
        let params = QRmsNormParams::with_eps(3, 0.0);
        let y = qrmsnorm(&x, &params).unwrap();

        let mut scaled = x.clone();
        for plane in 0..4 {
            for v in scaled.plane_mut(plane) {
                *v *= 3.7;
            }
        }
        let y2 = qrmsnorm(&scaled, &params).unwrap();
        assert!(y.max_abs_diff(&y2) < 1e-12);

        // per-unit RMS of the output equals the gain (1 here)
        for idx in 0..y.len() {
            let q = y.get_quat(idx);
            let rms = (q.norm_sq() / 4.0).sqrt();
            assert!((rms - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rmsnorm_gamma_length_checked() {
        let x = QTensor::zeros(vec![2, 3]);
        let params = QRmsNormParams::ones(2);
        assert!(matches!(
            qrmsnorm(&x, &params),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn layer_weights_roundtrip_with_sidecar() {
        let dir = std::env::temp_dir().join(format!("qsattn-layers-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut rng = Rng::new(97);

        let path = dir.join("linear.qtb");
        let w = QTensor::random(vec![3, 2], &mut rng, 1.0).unwrap();
        save_layer_weights(&path, "qlinear", &w).unwrap();
        let (kind, back) = load_layer_weights(&path).unwrap();
        assert_eq!(kind, "qlinear");
        assert_eq!(back, w);

        let sidecar: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.join("linear.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(sidecar["layer"], "qlinear");
        assert_eq!(sidecar["dims"], serde_json::json!([3, 2]));

        let conv_path = dir.join("conv.qtb");
        let w = QTensor::random(vec![2, 1, 3, 3], &mut rng, 1.0).unwrap();
        save_layer_weights(&conv_path, "qconv2d", &w).unwrap();
        let (kind, back) = load_layer_weights(&conv_path).unwrap();
        assert_eq!(kind, "qconv2d");
        assert_eq!(back, w);

        // kind/rank mismatches are rejected
        assert!(save_layer_weights(&path, "qconv2d", &QTensor::zeros(vec![2, 2])).is_err());
        assert!(save_layer_weights(&path, "mystery", &QTensor::zeros(vec![2, 2])).is_err());
    }

    #[test]
    fn param_counts() {
        let linear = param_count(LayerKind::Linear { d_in: 64, d_out: 64 }).unwrap();
        assert_eq!(linear.quaternion_real_params, 16_384);
        assert_eq!(linear.equivalent_real_params, 65_536);
        assert_eq!(linear.ratio, 0.25);

        let conv = param_count(LayerKind::Conv2d { c_in: 1, c_out: 1, k: 3 }).unwrap();
        assert_eq!(conv.quaternion_real_params, 36);
        assert_eq!(conv.equivalent_real_params, 144);
        assert_eq!(conv.ratio, 0.25);

        assert!(matches!(
            param_count(LayerKind::Linear { d_in: 0, d_out: 4 }),
            Err(Error::InvalidArgument(_))
        ));
    }
}
