//! Small fixed-size real vectors and matrices for Bloch-sphere geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real 3-vector, used for measurement directions and Bloch vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub const fn x_hat() -> Self {
        Vec3([1.0, 0.0, 0.0])
    }

    pub const fn y_hat() -> Self {
        Vec3([0.0, 1.0, 0.0])
    }

    pub const fn z_hat() -> Self {
        Vec3([0.0, 0.0, 1.0])
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn add(&self, other: &Vec3) -> Vec3 {
        Vec3([
            self.0[0] + other.0[0],
            self.0[1] + other.0[1],
            self.0[2] + other.0[2],
        ])
    }

    pub fn sub(&self, other: &Vec3) -> Vec3 {
        Vec3([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ])
    }

    pub fn cross(&self, other: &Vec3) -> Vec3 {
        let a = &self.0;
        let b = &other.0;
        Vec3([
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ])
    }

    /// Unit vector in the same direction; rejects vectors shorter than 1e-12.
    pub fn normalized(&self) -> Result<Vec3> {
        let n = self.norm();
        if n < 1e-12 {
            return Err(Error::BadVector(format!(
                "cannot normalize near-zero vector (norm {n:.3e})"
            )));
        }
        Ok(self.scale(1.0 / n))
    }

    /// Any unit vector orthogonal to `self` (which must be nonzero).
    pub fn any_orthogonal(&self) -> Result<Vec3> {
        let u = self.normalized()?;
        // Cross with the axis least aligned with u to keep the result well conditioned.
        let probe = if u.0[0].abs() <= u.0[1].abs() && u.0[0].abs() <= u.0[2].abs() {
            Vec3::x_hat()
        } else if u.0[1].abs() <= u.0[2].abs() {
            Vec3::y_hat()
        } else {
            Vec3::z_hat()
        };
        u.cross(&probe).normalized()
    }
}

/// Real 3x3 matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub fn zeros() -> Self {
        Mat3([[0.0; 3]; 3])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        let mut out = [0.0; 3];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row[0] * v.0[0] + row[1] * v.0[1] + row[2] * v.0[2];
        }
        Vec3(out)
    }

    pub fn transpose(&self) -> Mat3 {
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[j][i];
            }
        }
        out
    }

    pub fn mul(&self, other: &Mat3) -> Mat3 {
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for (k, row) in other.0.iter().enumerate() {
                    s += self.0[i][k] * row[j];
                }
                out.0[i][j] = s;
            }
        }
        out
    }

    /// Gram matrix transpose(self) * self; symmetric positive semidefinite.
    pub fn gram(&self) -> Mat3 {
        self.transpose().mul(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cross_product_is_orthogonal() {
        let a = Vec3::new(0.3, -1.2, 0.5);
        let b = Vec3::new(1.0, 0.4, -2.0);
        let c = a.cross(&b);
        assert_relative_eq!(a.dot(&c), 0.0, epsilon = 1e-12);
        assert_relative_eq!(b.dot(&c), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn any_orthogonal_is_unit_and_orthogonal() {
        for v in [
            Vec3::x_hat(),
            Vec3::z_hat(),
            Vec3::new(0.1, 0.2, 0.97),
            Vec3::new(-3.0, 2.0, 0.01),
        ] {
            let o = v.any_orthogonal().unwrap();
            assert_relative_eq!(o.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(o.dot(&v.normalized().unwrap()), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(Vec3::new(0.0, 0.0, 0.0).normalized().is_err());
    }

    #[test]
    fn gram_of_diag_squares_entries() {
        let t = Mat3::diag([0.5, -0.25, 1.0]);
        let g = t.gram();
        assert_relative_eq!(g.0[0][0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(g.0[1][1], 0.0625, epsilon = 1e-15);
        assert_relative_eq!(g.0[2][2], 1.0, epsilon = 1e-15);
    }
}
