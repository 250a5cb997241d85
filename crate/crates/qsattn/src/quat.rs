//! Scalar quaternion algebra.
//!
//! A quaternion is stored as four real components `(q0, q1, q2, q3)` where
//! `q0` is the real part and `q1, q2, q3` are the imaginary parts along
//! `i`, `j`, `k`. The imaginary units satisfy `i² = j² = k² = ijk = -1`,
//! which fixes the Hamilton product expansion used throughout this crate.
//!
//! All operations are total on finite inputs and propagate NaN; callers
//! validate their own data.

use std::ops::{Add, Mul, Neg, Sub};

/// A quaternion `q0 + q1·i + q2·j + q3·k` over `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Quaternion { q0, q1, q2, q3 }
    }

    /// Basis quaternion `e_idx` for `idx` in `0..4` (1, i, j, k).
    pub fn basis(idx: usize) -> Self {
        match idx {
            0 => Self::ONE,
            1 => Self::I,
            2 => Self::J,
            3 => Self::K,
            _ => panic!("basis index {idx} out of range"),
        }
    }

    pub fn component(&self, idx: usize) -> f64 {
        match idx {
            0 => self.q0,
            1 => self.q1,
            2 => self.q2,
            3 => self.q3,
            _ => panic!("component index {idx} out of range"),
        }
    }

    /// Conjugate: negates the three imaginary components.
    pub fn conj(self) -> Quaternion {
        Quaternion::new(self.q0, -self.q1, -self.q2, -self.q3)
    }

    /// Real-valued scalar product: the coordinate sum `Σ xᵢyᵢ`.
    ///
    /// Equals `Re(self ⊗ rhs.conj())`; positive definite, symmetric, and
    /// R-bilinear, i.e. the Euclidean inner product of the component vectors.
    pub fn dot(self, rhs: Quaternion) -> f64 {
        self.q0 * rhs.q0 + self.q1 * rhs.q1 + self.q2 * rhs.q2 + self.q3 * rhs.q3
    }

    /// Squared norm `q0² + q1² + q2² + q3²` = `dot(self, self)`.
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Real part of the Hamilton product *without* conjugation:
    /// `q0k0 - q1k1 - q2k2 - q3k3`.
    ///
    /// Not positive definite (`re_mul_no_conj(i, i) = -1`), which is why the
    /// scalar product above conjugates its second argument.
    pub fn re_mul_no_conj(self, rhs: Quaternion) -> f64 {
        self.q0 * rhs.q0 - self.q1 * rhs.q1 - self.q2 * rhs.q2 - self.q3 * rhs.q3
    }

    pub fn scale(self, s: f64) -> Quaternion {
        Quaternion::new(self.q0 * s, self.q1 * s, self.q2 * s, self.q3 * s)
    }

    pub fn is_finite(self) -> bool {
        self.q0.is_finite() && self.q1.is_finite() && self.q2.is_finite() && self.q3.is_finite()
    }
}

/// Hamilton product `self ⊗ rhs`. Non-commutative.
impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        let (p0, p1, p2, p3) = (self.q0, self.q1, self.q2, self.q3);
        let (q0, q1, q2, q3) = (rhs.q0, rhs.q1, rhs.q2, rhs.q3);
        Quaternion::new(
            p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
            p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
            p0 * q2 - p1 * q3 + p2 * q0 + p3 * q1,
            p0 * q3 + p1 * q2 - p2 * q1 + p3 * q0,
        )
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(
            self.q0 + rhs.q0,
            self.q1 + rhs.q1,
            self.q2 + rhs.q2,
            self.q3 + rhs.q3,
        )
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(
            self.q0 - rhs.q0,
            self.q1 - rhs.q1,
            self.q2 - rhs.q2,
            self.q3 - rhs.q3,
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.q0, -self.q1, -self.q2, -self.q3)
    }
}
