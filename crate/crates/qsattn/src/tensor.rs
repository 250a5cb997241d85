//! Quaternion tensors stored as four split real planes.
//!
//! A `QTensor` of shape `[d0, d1, ...]` keeps one contiguous row-major `f64`
//! array per quaternion component (`q0, q1, q2, q3`). Split-plane storage is
//! what lets every quaternion matrix product run as real matrix products over
//! contiguous memory; the attention kernels and their cost accounting are
//! built on that.

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::quat::Quaternion;
use crate::rng::Rng;

/// Hamilton product structure constants.
///
/// Row `alpha` lists the index pairs `(mu, nu)` and signs `sigma` such that
/// `(p ⊗ q)_alpha = Σ sigma · p_mu · q_nu`. Equivalently `e_mu ⊗ e_nu =
/// sigma · e_alpha` for each listed pair; a unit test pins every entry
/// against the scalar Hamilton product on basis quaternions.
pub const HAMILTON_TERMS: [[(usize, usize, f64); 4]; 4] = [
    [(0, 0, 1.0), (1, 1, -1.0), (2, 2, -1.0), (3, 3, -1.0)],
    [(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, -1.0)],
    [(0, 2, 1.0), (1, 3, -1.0), (2, 0, 1.0), (3, 1, 1.0)],
    [(0, 3, 1.0), (1, 2, 1.0), (2, 1, -1.0), (3, 0, 1.0)],
];

#[derive(Debug, Clone, PartialEq)]
pub struct QTensor {
    shape: Vec<usize>,
    planes: [Vec<f64>; 4],
}

impl QTensor {
    /// Validated constructor: all four planes must have `product(shape)`
    /// elements.
    pub fn new(shape: Vec<usize>, planes: [Vec<f64>; 4]) -> Result<Self> {
        let len: usize = shape.iter().product();
        for (i, plane) in planes.iter().enumerate() {
            if plane.len() != len {
                return Err(Error::shape(format!(
                    "plane q{i} has {} elements, shape {:?} needs {len}",
                    plane.len(),
                    shape
                )));
            }
        }
        Ok(QTensor { shape, planes })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len: usize = shape.iter().product();
        QTensor {
            shape,
            planes: std::array::from_fn(|_| vec![0.0; len]),
        }
    }

    /// Quaternion identity matrix: ones on the real-plane diagonal, zero
    /// imaginary planes.
    pub fn identity(n: usize) -> Self {
        let mut t = QTensor::zeros(vec![n, n]);
        for i in 0..n {
            t.planes[0][i * n + i] = 1.0;
        }
        t
    }

    /// Gaussian fill, zero mean, standard deviation `scale`. Deterministic
    /// under the generator state; plane q0 is filled first, then q1, q2, q3.
    pub fn random(shape: Vec<usize>, rng: &mut Rng, scale: f64) -> Result<Self> {
        if scale.is_nan() || scale <= 0.0 {
            return Err(Error::invalid(format!("scale must be > 0, got {scale}")));
        }
        let len: usize = shape.iter().product();
        let planes = std::array::from_fn(|_| {
            (0..len).map(|_| scale * rng.gaussian()).collect::<Vec<f64>>()
        });
        Ok(QTensor { shape, planes })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self, idx: usize) -> &[f64] {
        &self.planes[idx]
    }

    pub fn plane_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.planes[idx]
    }

    pub fn is_finite(&self) -> bool {
        self.planes
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
    }

    fn require_2d(&self, what: &str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::shape(format!(
                "{what} needs a 2-D tensor, got shape {other:?}"
            ))),
        }
    }

    pub fn rows(&self) -> Result<usize> {
        Ok(self.require_2d("rows")?.0)
    }

    pub fn cols(&self) -> Result<usize> {
        Ok(self.require_2d("cols")?.1)
    }

    /// Copy of plane `idx` as a matrix; 2-D tensors only.
    pub fn plane_as_mat(&self, idx: usize) -> Result<Mat> {
        let (r, c) = self.require_2d("plane_as_mat")?;
        Mat::from_vec(r, c, self.planes[idx].clone())
    }

    pub fn from_plane_mats(planes: [Mat; 4]) -> Result<Self> {
        let (r, c) = (planes[0].rows(), planes[0].cols());
        for p in &planes {
            if p.rows() != r || p.cols() != c {
                return Err(Error::shape("plane matrices disagree on shape".to_string()));
            }
        }
        QTensor::new(
            vec![r, c],
            [
                planes[0].data().to_vec(),
                planes[1].data().to_vec(),
                planes[2].data().to_vec(),
                planes[3].data().to_vec(),
            ],
        )
    }

    /// Wrap a real matrix as a quaternion tensor: values in plane q0, zero
    /// imaginary planes. This is the file convention for attention maps.
    pub fn from_real_mat(mat: &Mat) -> Self {
        let len = mat.rows() * mat.cols();
        QTensor {
            shape: vec![mat.rows(), mat.cols()],
            planes: [
                mat.data().to_vec(),
                vec![0.0; len],
                vec![0.0; len],
                vec![0.0; len],
            ],
        }
    }

    pub fn get_quat(&self, flat_idx: usize) -> Quaternion {
        Quaternion::new(
            self.planes[0][flat_idx],
            self.planes[1][flat_idx],
            self.planes[2][flat_idx],
            self.planes[3][flat_idx],
        )
    }

    pub fn set_quat(&mut self, flat_idx: usize, q: Quaternion) {
        self.planes[0][flat_idx] = q.q0;
        self.planes[1][flat_idx] = q.q1;
        self.planes[2][flat_idx] = q.q2;
        self.planes[3][flat_idx] = q.q3;
    }

    /// Row-major flat offset for a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (i, &x) in idx.iter().enumerate() {
            debug_assert!(x < self.shape[i]);
            off = off * self.shape[i] + x;
        }
        off
    }

    /// Quaternion matrix product via the Hamilton expansion: sixteen real
    /// matrix products combined with the structure-constant signs.
    pub fn matmul(&self, rhs: &QTensor) -> Result<QTensor> {
        let (m, p) = self.require_2d("matmul lhs")?;
        let (p2, n) = rhs.require_2d("matmul rhs")?;
        if p != p2 {
            return Err(Error::shape(format!(
                "quaternion matmul {m}x{p} by {p2}x{n}"
            )));
        }
        let a: Vec<Mat> = (0..4).map(|i| self.plane_as_mat(i).unwrap()).collect();
        let b: Vec<Mat> = (0..4).map(|i| rhs.plane_as_mat(i).unwrap()).collect();
        let mut out: Vec<Mat> = (0..4).map(|_| Mat::zeros(m, n)).collect();
        for (alpha, terms) in HAMILTON_TERMS.iter().enumerate() {
            for &(mu, nu, sign) in terms {
                a[mu].matmul_acc_into(&b[nu], false, sign, &mut out[alpha])?;
            }
        }
        let out: [Mat; 4] = [
            out.remove(0),
            out.remove(0),
            out.remove(0),
            out.remove(0),
        ];
        QTensor::from_plane_mats(out)
    }

    /// Conjugate transpose: transpose every plane, negate the imaginary ones.
    pub fn conj_transpose(&self) -> Result<QTensor> {
        let (r, c) = self.require_2d("conj_transpose")?;
        let mut planes: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; r * c]);
        for (idx, plane) in self.planes.iter().enumerate() {
            let sign = if idx == 0 { 1.0 } else { -1.0 };
            for i in 0..r {
                for j in 0..c {
                    planes[idx][j * r + i] = sign * plane[i * c + j];
                }
            }
        }
        QTensor::new(vec![c, r], planes)
    }

    /// Plain transpose (no conjugation).
    pub fn transpose(&self) -> Result<QTensor> {
        let (r, c) = self.require_2d("transpose")?;
        let mut planes: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; r * c]);
        for (idx, plane) in self.planes.iter().enumerate() {
            for i in 0..r {
                for j in 0..c {
                    planes[idx][j * r + i] = plane[i * c + j];
                }
            }
        }
        QTensor::new(vec![c, r], planes)
    }

    /// Real vectorization of a 1-D quaternion vector: all q0 entries, then
    /// all q1, q2, q3. Under this flattening the quaternion inner product is
    /// the Euclidean dot product in `R^{4d}`.
    pub fn vectorize(&self) -> Result<Vec<f64>> {
        if self.ndim() != 1 {
            return Err(Error::shape(format!(
                "vectorize needs a 1-D tensor, got shape {:?}",
                self.shape
            )));
        }
        let mut out = Vec::with_capacity(4 * self.len());
        for plane in &self.planes {
            out.extend_from_slice(plane);
        }
        Ok(out)
    }

    /// Sum of the scalar quaternion products over all positions of two
    /// equal-length 1-D tensors.
    pub fn vec_inner(&self, rhs: &QTensor) -> Result<f64> {
        if self.ndim() != 1 || rhs.ndim() != 1 || self.len() != rhs.len() {
            return Err(Error::shape(format!(
                "vec_inner of shapes {:?} and {:?}",
                self.shape, rhs.shape
            )));
        }
        let mut acc = 0.0;
        for (pa, pb) in self.planes.iter().zip(&rhs.planes) {
            acc += pa.iter().zip(pb).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(acc)
    }

    /// All four planes concatenated (q0 block first). Inverse of
    /// `from_flat`; used by the finite-difference harness.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.len());
        for plane in &self.planes {
            out.extend_from_slice(plane);
        }
        out
    }

    pub fn from_flat(shape: Vec<usize>, flat: &[f64]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if flat.len() != 4 * len {
            return Err(Error::shape(format!(
                "from_flat needs {} values for shape {:?}, got {}",
                4 * len,
                shape,
                flat.len()
            )));
        }
        let planes = std::array::from_fn(|i| flat[i * len..(i + 1) * len].to_vec());
        QTensor::new(shape, planes)
    }

    pub fn max_abs_diff(&self, rhs: &QTensor) -> f64 {
        debug_assert_eq!(self.shape, rhs.shape);
        let mut worst = 0.0f64;
        for (pa, pb) in self.planes.iter().zip(&rhs.planes) {
            for (a, b) in pa.iter().zip(pb) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.planes
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Rows `[r0, r1)` of a 2-D tensor as a new 2-D tensor.
    pub fn slice_rows(&self, r0: usize, r1: usize) -> Result<QTensor> {
        let (r, c) = self.require_2d("slice_rows")?;
        if r0 > r1 || r1 > r {
            return Err(Error::invalid(format!("row slice {r0}..{r1} of {r}")));
        }
        let planes = std::array::from_fn(|i| self.planes[i][r0 * c..r1 * c].to_vec());
        QTensor::new(vec![r1 - r0, c], planes)
    }

    /// Columns `[c0, c1)` of a 2-D tensor.
    pub fn slice_cols(&self, c0: usize, c1: usize) -> Result<QTensor> {
        let (r, c) = self.require_2d("slice_cols")?;
        if c0 > c1 || c1 > c {
            return Err(Error::invalid(format!("col slice {c0}..{c1} of {c}")));
        }
        let w = c1 - c0;
        let planes = std::array::from_fn(|i| {
            let mut out = Vec::with_capacity(r * w);
            for row in 0..r {
                out.extend_from_slice(&self.planes[i][row * c + c0..row * c + c1]);
            }
            out
        });
        QTensor::new(vec![r, w], planes)
    }

    /// Concatenate 2-D tensors along the column (feature) axis.
    pub fn concat_cols(parts: &[QTensor]) -> Result<QTensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat of zero tensors".to_string()))?;
        let (r, _) = first.require_2d("concat_cols")?;
        let total: usize = parts
            .iter()
            .map(|t| t.require_2d("concat_cols").map(|(pr, pc)| {
                debug_assert_eq!(pr, r);
                pc
            }))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .sum();
        let mut out = QTensor::zeros(vec![r, total]);
        for plane in 0..4 {
            let mut col0 = 0;
            for part in parts {
                let (pr, pc) = part.require_2d("concat_cols")?;
                if pr != r {
                    return Err(Error::shape("concat_cols row mismatch".to_string()));
                }
                for row in 0..r {
                    out.planes[plane][row * total + col0..row * total + col0 + pc]
                        .copy_from_slice(&part.planes[plane][row * pc..(row + 1) * pc]);
                }
                col0 += pc;
            }
        }
        Ok(out)
    }
}
