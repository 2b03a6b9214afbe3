//! Noncommutativity matrices, their Lorentz orbits, the section `Λ_θ` and
//! wedge regions.
//!
//! A noncommutativity parameter is a real antisymmetric 4×4 matrix `θ`,
//! stored by its six independent upper-triangle contravariant components so
//! antisymmetry is structural. The orbit `Σ_{κe,κm}` under `θ ↦ ΛθΛᵀ` is
//! labelled by two scalar invariants; each orbit point is covariantly
//! assigned a wedge region `W(θ)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minkowski::{mat_mul, FourVector, LorentzTransform, METRIC};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("theta is not on the orbit ({kappa_e}, {kappa_m}): invariant residuals ({r1:.3e}, {r2:.3e})")]
    NotOnOrbit {
        kappa_e: f64,
        kappa_m: f64,
        r1: f64,
        r2: f64,
    },
    #[error("degenerate orbit: kappa_e * kappa_m = 0")]
    DegenerateOrbit,
    #[error("section solver did not converge (best residual {0:.3e})")]
    NoConvergence(f64),
    #[error("wedge null vectors must be null and linearly independent")]
    InvalidWedge,
    #[error("invalid theta specification: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Minkowski(#[from] crate::minkowski::MinkowskiError),
}

/// Orbit labels `(κe, κm)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitParams {
    pub kappa_e: f64,
    pub kappa_m: f64,
}

impl OrbitParams {
    pub fn new(kappa_e: f64, kappa_m: f64) -> Self {
        OrbitParams { kappa_e, kappa_m }
    }

    pub fn is_degenerate(&self) -> bool {
        self.kappa_e == 0.0 || self.kappa_m == 0.0
    }

    /// The invariant pair every point of `Σ_{κe,κm}` carries.
    pub fn invariants(&self) -> (f64, f64) {
        (
            2.0 * (self.kappa_e * self.kappa_e - self.kappa_m * self.kappa_m),
            -8.0 * self.kappa_e * self.kappa_m,
        )
    }
}

/// Real antisymmetric 4×4 matrix of contravariant components `θ^{μν}`,
/// stored as the upper triangle `[θ01, θ02, θ03, θ12, θ13, θ23]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct NoncommMatrix {
    upper: [f64; 6],
}

/// Flat index of the pair `(mu, nu)` with `mu < nu`.
fn upper_index(mu: usize, nu: usize) -> usize {
    debug_assert!(mu < nu && nu < 4);
    match (mu, nu) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        (2, 3) => 5,
        _ => unreachable!(),
    }
}

impl NoncommMatrix {
    pub fn zero() -> Self {
        NoncommMatrix { upper: [0.0; 6] }
    }

    pub fn from_upper(upper: [f64; 6]) -> Self {
        NoncommMatrix { upper }
    }

    pub fn upper(&self) -> &[f64; 6] {
        &self.upper
    }

    /// The reference matrix with `θ^{01} = κe`, `θ^{23} = κm`.
    pub fn reference(params: &OrbitParams) -> Self {
        NoncommMatrix {
            upper: [params.kappa_e, 0.0, 0.0, 0.0, 0.0, params.kappa_m],
        }
    }

    /// Contravariant entry `θ^{μν}`.
    pub fn entry(&self, mu: usize, nu: usize) -> f64 {
        if mu == nu {
            0.0
        } else if mu < nu {
            self.upper[upper_index(mu, nu)]
        } else {
            -self.upper[upper_index(nu, mu)]
        }
    }

    pub fn as_matrix(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                m[mu][nu] = self.entry(mu, nu);
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.upper.iter().all(|&v| v == 0.0)
    }

    /// `pθq = p_μ θ^{μν} q_ν`, antisymmetric in `(p, q)` exactly: for each
    /// stored component the two products cancel bit-exactly when `p = q`.
    pub fn bilinear(&self, p: &FourVector, q: &FourVector) -> f64 {
        let pl = p.lower();
        let ql = q.lower();
        let u = &self.upper;
        u[0] * (pl[0] * ql[1] - pl[1] * ql[0])
            + u[1] * (pl[0] * ql[2] - pl[2] * ql[0])
            + u[2] * (pl[0] * ql[3] - pl[3] * ql[0])
            + u[3] * (pl[1] * ql[2] - pl[2] * ql[1])
            + u[4] * (pl[1] * ql[3] - pl[3] * ql[1])
            + u[5] * (pl[2] * ql[3] - pl[3] * ql[2])
    }

    /// `(θp)^μ = θ^{μν} p_ν` as a contravariant vector.
    pub fn apply(&self, p: &FourVector) -> FourVector {
        let pl = p.lower();
        let mut out = [0.0; 4];
        for (mu, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (nu, plv) in pl.iter().enumerate() {
                s += self.entry(mu, nu) * plv;
            }
            *o = s;
        }
        FourVector(out)
    }

    /// The orbit action `θ ↦ ΛθΛᵀ`, re-extracted to the stored triangle.
    pub fn conjugate(&self, a: &LorentzTransform) -> NoncommMatrix {
        let m = mat_mul(a.matrix(), &self.as_matrix());
        // m * a^T
        let mut full = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += m[i][k] * a.matrix()[j][k];
                }
                full[i][j] = s;
            }
        }
        let mut upper = [0.0; 6];
        for mu in 0..4 {
            for nu in (mu + 1)..4 {
                upper[upper_index(mu, nu)] = 0.5 * (full[mu][nu] - full[nu][mu]);
            }
        }
        NoncommMatrix { upper }
    }

    /// Scalar orbit invariants `(I₁, I₂)`: the quadratic contraction
    /// `θ^μ_ν θ^ν_μ = tr((θη)²)` and the pseudoscalar
    /// `ε_{μναβ} θ^{μν} θ^{αβ}` with `ε^{0123} = +1`. On `Σ_{κe,κm}` these
    /// equal `2(κe² − κm²)` and `−8 κe κm`.
    pub fn invariants(&self) -> (f64, f64) {
        let u = &self.upper;
        // tr((θη)²): the "electric" entries θ^{0i} enter with +, the spatial
        // ones with −, each pair twice.
        let i1 = 2.0 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
            - 2.0 * (u[3] * u[3] + u[4] * u[4] + u[5] * u[5]);
        let i2 = -8.0 * (u[0] * u[5] - u[1] * u[4] + u[2] * u[3]);
        (i1, i2)
    }

    pub fn is_on_orbit(&self, params: &OrbitParams, tol: f64) -> bool {
        let (i1, i2) = self.invariants();
        let (t1, t2) = params.invariants();
        (i1 - t1).abs() < tol && (i2 - t2).abs() < tol
    }

    /// "Electric" part `e_i = θ^{0i}`.
    pub fn electric(&self) -> [f64; 3] {
        [self.upper[0], self.upper[1], self.upper[2]]
    }

    /// "Magnetic" part `m_i = ½ ε_{ijk} θ^{jk}`.
    pub fn magnetic(&self) -> [f64; 3] {
        [self.upper[5], -self.upper[4], self.upper[3]]
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        (2.0 * self.upper.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Spectral norm. For a 4×4 antisymmetric matrix the squared singular
    /// values are the roots of `t² − S t + Pf²` with `S = ½‖θ‖_F²` and `Pf`
    /// the Pfaffian.
    pub fn operator_norm(&self) -> f64 {
        let u = &self.upper;
        let s: f64 = u.iter().map(|v| v * v).sum();
        let pf = u[0] * u[5] - u[1] * u[4] + u[2] * u[3];
        let disc = (s * s - 4.0 * pf * pf).max(0.0);
        (0.5 * (s + disc.sqrt())).sqrt()
    }

    pub fn max_entry_diff(&self, other: &NoncommMatrix) -> f64 {
        self.upper
            .iter()
            .zip(&other.upper)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl std::ops::Add for NoncommMatrix {
    type Output = NoncommMatrix;
    fn add(self, rhs: NoncommMatrix) -> NoncommMatrix {
        let mut upper = [0.0; 6];
        for (o, (a, b)) in upper.iter_mut().zip(self.upper.iter().zip(&rhs.upper)) {
            *o = a + b;
        }
        NoncommMatrix { upper }
    }
}

impl std::ops::Neg for NoncommMatrix {
    type Output = NoncommMatrix;
    fn neg(self) -> NoncommMatrix {
        let mut upper = self.upper;
        for v in &mut upper {
            *v = -*v;
        }
        NoncommMatrix { upper }
    }
}

impl std::ops::Mul<f64> for NoncommMatrix {
    type Output = NoncommMatrix;
    fn mul(self, s: f64) -> NoncommMatrix {
        let mut upper = self.upper;
        for v in &mut upper {
            *v *= s;
        }
        NoncommMatrix { upper }
    }
}

/// `thetaBilinear(θ, p, q)`.
pub fn theta_bilinear(theta: &NoncommMatrix, p: &FourVector, q: &FourVector) -> f64 {
    theta.bilinear(p, q)
}

/// `referenceTheta(params)`.
pub fn reference_theta(params: &OrbitParams) -> NoncommMatrix {
    NoncommMatrix::reference(params)
}

/// Recovers orbit labels from the invariants, normalised to `κe ≥ 0`.
pub fn recover_orbit_params(theta: &NoncommMatrix) -> Result<OrbitParams, GeometryError> {
    let (i1, i2) = theta.invariants();
    let a = 0.5 * i1; // κe² − κm²
    let b = -i2 / 8.0; // κe κm
    let ke2 = 0.5 * (a + (a * a + 4.0 * b * b).sqrt());
    if ke2 <= 0.0 {
        return Err(GeometryError::DegenerateOrbit);
    }
    let ke = ke2.sqrt();
    let km = b / ke;
    if km == 0.0 {
        return Err(GeometryError::DegenerateOrbit);
    }
    Ok(OrbitParams::new(ke, km))
}

// ---------------------------------------------------------------------------
// The section Λ_θ
// ---------------------------------------------------------------------------

/// Residual vector of `Λ θ₁ Λᵀ − θ` over the six independent entries.
fn section_residual(l: &LorentzTransform, theta1: &NoncommMatrix, theta: &NoncommMatrix) -> [f64; 6] {
    let c = theta1.conjugate(l);
    let mut r = [0.0; 6];
    for (o, (a, b)) in r.iter_mut().zip(c.upper.iter().zip(&theta.upper)) {
        *o = a - b;
    }
    r
}

fn solve6(a: &mut [[f64; 6]; 6], b: &mut [f64; 6]) -> Option<[f64; 6]> {
    // Partial-pivot Gaussian elimination.
    for col in 0..6 {
        let (piv, max) = (col..6)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if max < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..6 {
            let f = a[r][col] / a[col][col];
            for c in col..6 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 6];
    for col in (0..6).rev() {
        let mut s = b[col];
        for c in (col + 1)..6 {
            s -= a[col][c] * x[c];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Rotation taking the unit vector `from` to `to` (both spatial, unit norm).
fn rotation_aligning(from: [f64; 3], to: [f64; 3]) -> LorentzTransform {
    let cross = [
        from[1] * to[2] - from[2] * to[1],
        from[2] * to[0] - from[0] * to[2],
        from[0] * to[1] - from[1] * to[0],
    ];
    let dot: f64 = from.iter().zip(&to).map(|(a, b)| a * b).sum();
    let sin = (cross.iter().map(|c| c * c).sum::<f64>()).sqrt();
    if sin < 1e-14 {
        if dot > 0.0 {
            return LorentzTransform::identity();
        }
        // antiparallel: rotate by pi about any axis orthogonal to `from`
        let axis = if from[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let ortho = [
            from[1] * axis[2] - from[2] * axis[1],
            from[2] * axis[0] - from[0] * axis[2],
            from[0] * axis[1] - from[1] * axis[0],
        ];
        let n = (ortho.iter().map(|c| c * c).sum::<f64>()).sqrt();
        let r = [
            std::f64::consts::PI * ortho[0] / n,
            std::f64::consts::PI * ortho[1] / n,
            std::f64::consts::PI * ortho[2] / n,
        ];
        return LorentzTransform::from_generators([0.0; 3], r);
    }
    let angle = sin.atan2(dot);
    let r = [
        angle * cross[0] / sin,
        angle * cross[1] / sin,
        angle * cross[2] / sin,
    ];
    LorentzTransform::from_generators([0.0; 3], r)
}

/// Levenberg-Marquardt on the Lie algebra: right-increments `Λ ← Λ exp(δ)`
/// with the analytic Jacobian `δᵢ ↦ Λ (Gᵢθ₁ + θ₁Gᵢᵀ) Λᵀ`.
fn refine_section(
    seed: LorentzTransform,
    theta1: &NoncommMatrix,
    theta: &NoncommMatrix,
) -> (LorentzTransform, f64) {
    let mut l = seed;
    let mut lambda = 1e-3;
    let norm = |r: &[f64; 6]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = section_residual(&l, theta1, theta);
    let mut best = (l, norm(&r));
    for _ in 0..200 {
        if norm(&r) < 1e-12 {
            break;
        }
        // Analytic Jacobian columns for the six generators.
        let mut jac = [[0.0; 6]; 6]; // jac[row residual][col parameter]
        for g in 0..6 {
            let mut bpar = [0.0; 3];
            let mut rpar = [0.0; 3];
            if g < 3 {
                bpar[g] = 1.0;
            } else {
                rpar[g - 3] = 1.0;
            }
            // d/dt [ exp(tG) θ₁ exp(tG)ᵀ ]_0 = G θ₁ + θ₁ Gᵀ, conjugated by Λ.
            let gm = generator_matrix(bpar, rpar);
            let t1 = theta1.as_matrix();
            let gt = mat_mul(&gm, &t1);
            let mut sum = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    // (θ₁ Gᵀ)_{ij} = Σ_k θ₁[i][k] G[j][k]
                    let mut s = 0.0;
                    for k in 0..4 {
                        s += t1[i][k] * gm[j][k];
                    }
                    sum[i][j] = gt[i][j] + s;
                }
            }
            let lm = l.matrix();
            let a = mat_mul(lm, &sum);
            let mut conj = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    let mut s = 0.0;
                    for k in 0..4 {
                        s += a[i][k] * lm[j][k];
                    }
                    conj[i][j] = s;
                }
            }
            let mut row = 0;
            for mu in 0..4 {
                for nu in (mu + 1)..4 {
                    jac[row][g] = 0.5 * (conj[mu][nu] - conj[nu][mu]);
                    row += 1;
                }
            }
        }
        // Solve (JᵀJ + λ diag) δ = −Jᵀ r
        let mut jtj = [[0.0; 6]; 6];
        let mut jtr = [0.0; 6];
        for i in 0..6 {
            for j in 0..6 {
                let mut s = 0.0;
                for k in 0..6 {
                    s += jac[k][i] * jac[k][j];
                }
                jtj[i][j] = s;
            }
            let mut s = 0.0;
            for k in 0..6 {
                s += jac[k][i] * r[k];
            }
            jtr[i] = -s;
        }
        let mut sys = jtj;
        for (i, row) in sys.iter_mut().enumerate() {
            row[i] += lambda * (jtj[i][i].max(1e-12));
        }
        let mut rhs = jtr;
        let Some(delta) = solve6(&mut sys, &mut rhs) else {
            lambda *= 10.0;
            continue;
        };
        let step = LorentzTransform::from_generators(
            [delta[0], delta[1], delta[2]],
            [delta[3], delta[4], delta[5]],
        );
        let candidate = l.compose(&step);
        let rc = section_residual(&candidate, theta1, theta);
        if norm(&rc) < norm(&r) {
            l = candidate;
            r = rc;
            lambda = (lambda * 0.3).max(1e-12);
            if norm(&r) < best.1 {
                best = (l, norm(&r));
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    let rb = section_residual(&best.0, theta1, theta);
    let inf: f64 = rb.iter().fold(0.0, |m, v| m.max(v.abs()));
    (best.0, inf)
}

fn generator_matrix(b: [f64; 3], r: [f64; 3]) -> [[f64; 4]; 4] {
    let mut g = [[0.0; 4]; 4];
    for k in 0..3 {
        g[0][k + 1] = b[k];
        g[k + 1][0] = b[k];
    }
    g[2][3] = -r[0];
    g[3][2] = r[0];
    g[3][1] = -r[1];
    g[1][3] = r[1];
    g[1][2] = -r[2];
    g[2][1] = r[2];
    g
}

/// `lambdaTheta`: a residual-certified Lorentz transformation with
/// `Λθ₁Λᵀ = θ` to better than `1e-8` in the max norm. Unique only modulo
/// the stabilizer of `θ₁`; any certified representative is returned.
pub fn lambda_theta(
    theta: &NoncommMatrix,
    params: &OrbitParams,
) -> Result<LorentzTransform, GeometryError> {
    if params.is_degenerate() {
        return Err(GeometryError::DegenerateOrbit);
    }
    if !theta.is_on_orbit(params, 1e-6) {
        let (i1, i2) = theta.invariants();
        let (t1, t2) = params.invariants();
        return Err(GeometryError::NotOnOrbit {
            kappa_e: params.kappa_e,
            kappa_m: params.kappa_m,
            r1: (i1 - t1).abs(),
            r2: (i2 - t2).abs(),
        });
    }
    let theta1 = NoncommMatrix::reference(params);
    // Analytic seeds: align the electric (or magnetic) direction with x1.
    let mut seeds = Vec::new();
    let e = theta.electric();
    let m = theta.magnetic();
    let en = (e.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let mn = (m.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let sign_e = if params.kappa_e >= 0.0 { 1.0 } else { -1.0 };
    let sign_m = if params.kappa_m >= 0.0 { 1.0 } else { -1.0 };
    if en > 1e-12 {
        let ehat = [e[0] / en, e[1] / en, e[2] / en];
        seeds.push(rotation_aligning([sign_e, 0.0, 0.0], ehat));
        seeds.push(rotation_aligning([-sign_e, 0.0, 0.0], ehat));
    }
    if mn > 1e-12 {
        let mhat = [m[0] / mn, m[1] / mn, m[2] / mn];
        seeds.push(rotation_aligning([sign_m, 0.0, 0.0], mhat));
    }
    seeds.push(LorentzTransform::identity());
    // Deterministic fallback seeds spread over the group.
    for k in 0..8 {
        let t = k as f64;
        seeds.push(LorentzTransform::from_generators(
            [0.31 * (t + 1.0).sin(), 0.23 * (2.1 * t).cos(), 0.17 * (0.7 * t).sin()],
            [1.1 * (0.5 * t).cos(), 0.9 * (1.3 * t).sin(), 0.7 * (2.7 * t).cos()],
        ));
    }
    let mut best_res = f64::INFINITY;
    for seed in seeds {
        let (l, res) = refine_section(seed, &theta1, theta);
        if res < 1e-8 {
            return Ok(l);
        }
        best_res = best_res.min(res);
    }
    Err(GeometryError::NoConvergence(best_res))
}

// ---------------------------------------------------------------------------
// Wedges
// ---------------------------------------------------------------------------

/// A wedge region encoded by two null covectors, with membership
/// `x ∈ W ⟺ x·ℓ₁ < 0 ∧ x·ℓ₂ < 0`. The null vectors are stored up to
/// positive rescaling, normalised so the largest-magnitude component is ±1.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Wedge {
    ell1: FourVector,
    ell2: FourVector,
}

fn normalize_null(v: FourVector) -> FourVector {
    let m = v.max_abs();
    if m == 0.0 {
        return v;
    }
    // componentwise division keeps the largest component exactly ±1, so
    // normalisation is idempotent and opposite() round-trips bit-exactly
    FourVector([v[0] / m, v[1] / m, v[2] / m, v[3] / m])
}

impl Wedge {
    /// Validating constructor.
    pub fn new(ell1: FourVector, ell2: FourVector) -> Result<Self, GeometryError> {
        let l1 = normalize_null(ell1);
        let l2 = normalize_null(ell2);
        if l1.norm_sq().abs() > 1e-12 || l2.norm_sq().abs() > 1e-12 {
            return Err(GeometryError::InvalidWedge);
        }
        let diff = (l1 - l2).max_abs();
        let sum = (l1 + l2).max_abs();
        if diff < 1e-12 || sum < 1e-12 {
            return Err(GeometryError::InvalidWedge);
        }
        Ok(Wedge { ell1: l1, ell2: l2 })
    }

    /// The standard wedge `W₁ = {x : x₁ > |x₀|}` with `ℓ₁ = (1,1,0,0)`,
    /// `ℓ₂ = (−1,1,0,0)`.
    pub fn standard() -> Self {
        Wedge {
            ell1: FourVector::new(1.0, 1.0, 0.0, 0.0),
            ell2: FourVector::new(-1.0, 1.0, 0.0, 0.0),
        }
    }

    pub fn null_vectors(&self) -> (FourVector, FourVector) {
        (self.ell1, self.ell2)
    }

    pub fn contains(&self, x: &FourVector) -> bool {
        x.dot(&self.ell1) < 0.0 && x.dot(&self.ell2) < 0.0
    }

    /// Signed membership slack: positive inside, zero on the boundary.
    pub fn slack(&self, x: &FourVector) -> f64 {
        (-x.dot(&self.ell1)).min(-x.dot(&self.ell2))
    }

    /// `ΛW`: the Minkowski product is invariant, so both null covectors
    /// transform by `Λ` itself.
    pub fn transform(&self, a: &LorentzTransform) -> Wedge {
        Wedge {
            ell1: normalize_null(a.apply(&self.ell1)),
            ell2: normalize_null(a.apply(&self.ell2)),
        }
    }

    /// The causal complement `W' = −W`.
    pub fn opposite(&self) -> Wedge {
        Wedge {
            ell1: normalize_null(-self.ell1),
            ell2: normalize_null(-self.ell2),
        }
    }

    /// `wedgeEquals`: each null covector of `self` matches one of `other`
    /// up to positive rescaling within `tol` (both are stored normalised).
    pub fn approx_eq(&self, other: &Wedge, tol: f64) -> bool {
        let close = |a: &FourVector, b: &FourVector| (*a - *b).max_abs() <= tol;
        (close(&self.ell1, &other.ell1) && close(&self.ell2, &other.ell2))
            || (close(&self.ell1, &other.ell2) && close(&self.ell2, &other.ell1))
    }

    /// A point in the interior: `−η(ℓ̂₁+ℓ̂₂)` with Euclidean-normalised null
    /// vectors, whose product with each `ℓᵢ` is `−|ℓᵢ|(1 + ℓ̂₁·ℓ̂₂) < 0`.
    /// For the standard wedge this is `(0, 1, 0, 0)` after rescaling.
    pub fn interior_point(&self) -> FourVector {
        let n1 = self.ell1.euclid_norm();
        let n2 = self.ell2.euclid_norm();
        let mut p = FourVector::zero();
        for i in 0..4 {
            p[i] = -METRIC[i] * (self.ell1[i] / n1 + self.ell2[i] / n2);
        }
        normalize_null(p)
    }
}

/// `wedgeOfTheta`: the covariant assignment `W(Λθ₁Λᵀ) = sign(κe)·ΛW₁`.
pub fn wedge_of_theta(theta: &NoncommMatrix, params: &OrbitParams) -> Result<Wedge, GeometryError> {
    let l = lambda_theta(theta, params)?;
    let w = Wedge::standard().transform(&l);
    if params.kappa_e >= 0.0 {
        Ok(w)
    } else {
        Ok(w.opposite())
    }
}

// ---------------------------------------------------------------------------
// Serialization of θ specifications
// ---------------------------------------------------------------------------

/// One elementary factor of a Lorentz transformation specification.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LorentzFactor {
    Boost { axis: usize, rapidity: f64 },
    Rotation { plane: (usize, usize), angle: f64 },
}

/// JSON form of a noncommutativity parameter: either explicit upper-triangle
/// entries or a Lorentz transform applied to the reference matrix.
///
/// ```json
/// {"kappaE": 0.5, "kappaM": 0.3, "upper": [0.5, 0, 0, 0, 0, 0.3]}
/// {"kappaE": 0.5, "kappaM": 0.3, "lorentz": {"factors": [{"type": "boost", "axis": 2, "rapidity": 0.7}]}}
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaSpec {
    #[serde(rename = "kappaE")]
    pub kappa_e: f64,
    #[serde(rename = "kappaM")]
    pub kappa_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<[f64; 6]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lorentz: Option<LorentzProduct>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LorentzProduct {
    pub factors: Vec<LorentzFactor>,
}

impl LorentzProduct {
    pub fn resolve(&self) -> Result<LorentzTransform, GeometryError> {
        let mut l = LorentzTransform::identity();
        for f in &self.factors {
            let next = match f {
                LorentzFactor::Boost { axis, rapidity } => LorentzTransform::boost(*rapidity, *axis)?,
                LorentzFactor::Rotation { plane, angle } => LorentzTransform::rotation(*angle, *plane)?,
            };
            l = l.compose(&next);
        }
        Ok(l)
    }
}

impl ThetaSpec {
    pub fn params(&self) -> OrbitParams {
        OrbitParams::new(self.kappa_e, self.kappa_m)
    }

    pub fn resolve(&self) -> Result<(NoncommMatrix, OrbitParams), GeometryError> {
        let params = self.params();
        match (&self.upper, &self.lorentz) {
            (Some(upper), None) => Ok((NoncommMatrix::from_upper(*upper), params)),
            (None, Some(product)) => {
                let l = product.resolve()?;
                Ok((NoncommMatrix::reference(&params).conjugate(&l), params))
            }
            (None, None) => Ok((NoncommMatrix::reference(&params), params)),
            (Some(_), Some(_)) => Err(GeometryError::BadSpec(
                "theta spec must not carry both 'upper' and 'lorentz'".into(),
            )),
        }
    }

    pub fn from_theta(theta: &NoncommMatrix, params: &OrbitParams) -> ThetaSpec {
        ThetaSpec {
            kappa_e: params.kappa_e,
            kappa_m: params.kappa_m,
            upper: Some(*theta.upper()),
            lorentz: None,
        }
    }
}
