//! Four-vectors, the Minkowski metric and proper orthochronous Lorentz
//! transformations.
//!
//! Conventions: metric signature `diag(+1,-1,-1,-1)`, index order `0..3`
//! with component 0 the time component.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Metric signs `(+1,-1,-1,-1)` indexed by component.
pub const METRIC: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

#[derive(Debug, Error, PartialEq)]
pub enum MinkowskiError {
    /// `Λᵀ η Λ = η` violated beyond tolerance.
    #[error("matrix is not eta-orthogonal (residual {0:.3e})")]
    NotOrthogonal(f64),
    /// `det Λ = +1` or `Λ⁰₀ ≥ 1` violated: not in the identity component.
    #[error("matrix is not proper orthochronous (det {det:.6}, Lambda00 {tt:.6})")]
    NotProperOrthochronous { det: f64, tt: f64 },
    #[error("invalid axis index {0}, expected 1..=3")]
    InvalidAxis(usize),
    #[error("rotation plane must be two distinct spatial axes, got ({0}, {1})")]
    InvalidPlane(usize, usize),
}

/// A contravariant four-vector.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        FourVector([t, x, y, z])
    }

    pub const fn zero() -> Self {
        FourVector([0.0; 4])
    }

    /// Minkowski inner product `x·y = x₀y₀ − x₁y₁ − x₂y₂ − x₃y₃`.
    pub fn dot(&self, other: &FourVector) -> f64 {
        self.0[0] * other.0[0]
            - self.0[1] * other.0[1]
            - self.0[2] * other.0[2]
            - self.0[3] * other.0[3]
    }

    /// `x·x`.
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Euclidean norm of the component vector.
    pub fn euclid_norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Index lowering: returns `(x₀, -x₁, -x₂, -x₃)`.
    pub fn lower(&self) -> [f64; 4] {
        [self.0[0], -self.0[1], -self.0[2], -self.0[3]]
    }

    /// Member of the closed forward cone `p² ≥ 0, p₀ ≥ 0`.
    pub fn in_forward_cone(&self) -> bool {
        self.0[0] >= 0.0 && self.norm_sq() >= 0.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// `minkowskiProduct(x, y)`.
pub fn minkowski_product(x: &FourVector, y: &FourVector) -> f64 {
    x.dot(y)
}

impl Index<usize> for FourVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for FourVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, rhs: FourVector) -> FourVector {
        FourVector([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
            self.0[3] + rhs.0[3],
        ])
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, rhs: FourVector) -> FourVector {
        FourVector([
            self.0[0] - rhs.0[0],
            self.0[1] - rhs.0[1],
            self.0[2] - rhs.0[2],
            self.0[3] - rhs.0[3],
        ])
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector([-self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }
}

impl Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, s: f64) -> FourVector {
        FourVector([self.0[0] * s, self.0[1] * s, self.0[2] * s, self.0[3] * s])
    }
}

/// An element of the identity component of the Lorentz group, stored as an
/// explicit 4×4 matrix acting on contravariant components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzTransform {
    m: [[f64; 4]; 4],
}

/// `‖ΛᵀηΛ − η‖∞`.
pub fn eta_orthogonality_residual(m: &[[f64; 4]; 4]) -> f64 {
    let mut res: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                s += m[k][i] * METRIC[k] * m[k][j];
            }
            let eta = if i == j { METRIC[i] } else { 0.0 };
            res = res.max((s - eta).abs());
        }
    }
    res
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    // Laplace expansion over the first row with 3x3 cofactors.
    let det3 = |a: [[f64; 3]; 3]| -> f64 {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let minor = |col: usize| -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (ri, row) in m.iter().enumerate().skip(1) {
            let mut cj = 0;
            for (ci, v) in row.iter().enumerate() {
                if ci != col {
                    out[ri - 1][cj] = *v;
                    cj += 1;
                }
            }
        }
        out
    };
    let mut det = 0.0;
    for col in 0..4 {
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[0][col] * det3(minor(col));
    }
    det
}

impl LorentzTransform {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        LorentzTransform { m }
    }

    /// Validating constructor: rejects matrices that are not η-orthogonal
    /// within `1e-9` or not proper orthochronous.
    pub fn from_matrix(m: [[f64; 4]; 4]) -> Result<Self, MinkowskiError> {
        let res = eta_orthogonality_residual(&m);
        if res > 1e-9 {
            return Err(MinkowskiError::NotOrthogonal(res));
        }
        let det = det4(&m);
        if (det - 1.0).abs() > 1e-9 || m[0][0] < 1.0 - 1e-12 {
            return Err(MinkowskiError::NotProperOrthochronous { det, tt: m[0][0] });
        }
        Ok(LorentzTransform { m })
    }

    /// Boost with the given rapidity along a spatial axis (1, 2 or 3).
    /// `boost(χ, 1)` maps `(1,0,0,0)` to `(cosh χ, sinh χ, 0, 0)`.
    pub fn boost(rapidity: f64, axis: usize) -> Result<Self, MinkowskiError> {
        if !(1..=3).contains(&axis) {
            return Err(MinkowskiError::InvalidAxis(axis));
        }
        let (ch, sh) = (rapidity.cosh(), rapidity.sinh());
        let mut out = Self::identity();
        out.m[0][0] = ch;
        out.m[0][axis] = sh;
        out.m[axis][0] = sh;
        out.m[axis][axis] = ch;
        Ok(out)
    }

    /// Rotation by `angle` in the spatial plane spanned by two distinct axes.
    pub fn rotation(angle: f64, plane: (usize, usize)) -> Result<Self, MinkowskiError> {
        let (a, b) = plane;
        if !(1..=3).contains(&a) || !(1..=3).contains(&b) || a == b {
            return Err(MinkowskiError::InvalidPlane(a, b));
        }
        let (c, s) = (angle.cos(), angle.sin());
        let mut out = Self::identity();
        out.m[a][a] = c;
        out.m[a][b] = -s;
        out.m[b][a] = s;
        out.m[b][b] = c;
        Ok(out)
    }

    /// Matrix product `a·b` (apply `b` first).
    pub fn compose(&self, other: &LorentzTransform) -> LorentzTransform {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += self.m[i][k] * other.m[k][j];
                }
                m[i][j] = s;
            }
        }
        LorentzTransform { m }
    }

    /// Group inverse `Λ⁻¹ = η Λᵀ η`, exact up to rounding.
    pub fn inverse(&self) -> LorentzTransform {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = METRIC[i] * self.m[j][i] * METRIC[j];
            }
        }
        LorentzTransform { m }
    }

    /// `x ↦ Λx`.
    pub fn apply(&self, x: &FourVector) -> FourVector {
        let mut out = [0.0; 4];
        for (i, row) in self.m.iter().enumerate() {
            out[i] = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3] * x[3];
        }
        FourVector(out)
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn eta_residual(&self) -> f64 {
        eta_orthogonality_residual(&self.m)
    }

    /// Exponential of a Lorentz algebra element given by boost parameters
    /// `b` (generators mixing time with axis 1..3) and rotation parameters
    /// `r` (generators of the 23, 31 and 12 planes).
    pub fn from_generators(b: [f64; 3], r: [f64; 3]) -> LorentzTransform {
        let mut g = [[0.0; 4]; 4];
        // boost part: symmetric in (0, k)
        for k in 0..3 {
            g[0][k + 1] = b[k];
            g[k + 1][0] = b[k];
        }
        // rotation part: antisymmetric spatial block
        g[2][3] = -r[0];
        g[3][2] = r[0];
        g[3][1] = -r[1];
        g[1][3] = r[1];
        g[1][2] = -r[2];
        g[2][1] = r[2];
        LorentzTransform { m: expm4(&g) }
    }

    /// True when the matrix is a signed permutation (each row/column one
    /// entry of magnitude 1), up to `tol`.
    pub fn is_signed_permutation(&self, tol: f64) -> bool {
        for row in &self.m {
            let mut ones = 0;
            for v in row {
                if (v.abs() - 1.0).abs() <= tol {
                    ones += 1;
                } else if v.abs() > tol {
                    return false;
                }
            }
            if ones != 1 {
                return false;
            }
        }
        true
    }
}

/// Matrix exponential of a 4×4 via scaling and squaring with a Taylor series.
fn expm4(g: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let norm: f64 = g
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(s as i32);
    let mut a = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = g[i][j] * scale;
        }
    }
    // Taylor series; the scaled norm is <= 0.5 so ~20 terms reach eps.
    let mut result = [[0.0; 4]; 4];
    for (i, row) in result.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut term = result; // identity
    for k in 1..=20 {
        term = mat_mul(&term, &a);
        let f = 1.0 / (k as f64);
        for i in 0..4 {
            for j in 0..4 {
                term[i][j] *= f;
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        result = mat_mul(&result, &result);
    }
    result
}

pub(crate) fn mat_mul(a: &[[f64; 4]; 4], b: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                s += a[i][k] * b[k][j];
            }
            m[i][j] = s;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn metric_signature() {
        let e0 = FourVector::new(1.0, 0.0, 0.0, 0.0);
        let e1 = FourVector::new(0.0, 1.0, 0.0, 0.0);
        let null = FourVector::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(e0.dot(&e0), 1.0);
        assert_eq!(null.dot(&null), 0.0);
        assert_eq!(e0.dot(&e1), 0.0);
    }

    #[test]
    fn zero_rapidity_boost_is_identity() {
        let b = LorentzTransform::boost(0.0, 1).unwrap();
        assert_eq!(b, LorentzTransform::identity());
    }

    #[test]
    fn boost_acts_on_rest_vector() {
        let b = LorentzTransform::boost(1.0, 1).unwrap();
        let v = b.apply(&FourVector::new(1.0, 0.0, 0.0, 0.0));
        assert_abs_diff_eq!(v[0], 1f64.cosh(), epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1f64.sinh(), epsilon = 1e-15);
        assert_eq!(v[2], 0.0);
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn inverse_composes_to_identity() {
        let a = LorentzTransform::boost(0.7, 2)
            .unwrap()
            .compose(&LorentzTransform::rotation(1.3, (1, 3)).unwrap());
        let id = a.compose(&a.inverse());
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(id.matrix()[i][j], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constructor_rejects_non_orthogonal() {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        m[0][1] = 1e-3;
        assert!(matches!(
            LorentzTransform::from_matrix(m),
            Err(MinkowskiError::NotOrthogonal(_))
        ));
    }

    #[test]
    fn constructor_rejects_time_reversal() {
        // diag(-1,1,1,-1) is eta-orthogonal with det +1 but not orthochronous.
        let m = [
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, -1.0],
        ];
        assert!(matches!(
            LorentzTransform::from_matrix(m),
            Err(MinkowskiError::NotProperOrthochronous { .. })
        ));
    }

    #[test]
    fn generator_exponential_lands_in_group() {
        let l = LorentzTransform::from_generators([0.4, -1.1, 0.3], [2.0, -0.2, 0.9]);
        assert!(l.eta_residual() < 1e-12);
        assert!(l.matrix()[0][0] >= 1.0);
        let pure_boost = LorentzTransform::from_generators([0.8, 0.0, 0.0], [0.0; 3]);
        let b = LorentzTransform::boost(0.8, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(pure_boost.matrix()[i][j], b.matrix()[i][j], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn product_invariance_and_cone_preservation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut l = LorentzTransform::identity();
            for _ in 0..3 {
                let p: f64 = rng.gen_range(-2.0..2.0);
                l = if rng.gen_bool(0.5) {
                    l.compose(&LorentzTransform::boost(p, rng.gen_range(1..4)).unwrap())
                } else {
                    let a = rng.gen_range(1..4);
                    let b = 1 + (a % 3);
                    l.compose(&LorentzTransform::rotation(p, (a, b)).unwrap())
                };
            }
            assert!(l.eta_residual() < 1e-12);
            let x = FourVector::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let y = FourVector::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            assert_abs_diff_eq!(
                l.apply(&x).dot(&l.apply(&y)),
                x.dot(&y),
                epsilon = 1e-10
            );
            // forward cone sample
            let spatial: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let r = (spatial[0] * spatial[0] + spatial[1] * spatial[1] + spatial[2] * spatial[2])
                .sqrt();
            let p = FourVector::new(r * rng.gen_range(1.0..2.0), spatial[0], spatial[1], spatial[2]);
            assert!(p.in_forward_cone());
            let q = l.apply(&p);
            assert!(q[0] >= 0.0 && q.norm_sq() >= -1e-10);
        }
    }
}
