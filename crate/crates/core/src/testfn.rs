//! Schwartz-class test functions of one spacetime variable: Gaussian wave
//! packets (closed-form Fourier transforms) and compactly supported bump
//! packets (separable cached quadrature transforms), closed under
//! translation, the scalar Poincaré action and the two involutions.
//!
//! Fourier convention: `f̃(p) = (2π)⁻² ∫ f(x) e^{−ip·x} d⁴x` with the
//! Minkowski product in the exponent, so `e^{−ip·x} = e^{−ip₀x₀} e^{+ipⱼxⱼ}`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minkowski::{FourVector, LorentzTransform, METRIC};
use crate::quad::{adaptive_integrate, QuadError};

#[derive(Debug, Error)]
pub enum TestFnError {
    #[error("quadrature failure in bump Fourier transform: {0}")]
    QuadratureFailure(#[from] QuadError),
    #[error("unsupported transformation: {0}")]
    Unsupported(String),
    #[error("quadratic form is not symmetric positive definite")]
    NotPositiveDefinite,
}

/// Flag describing how a support box was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SupportFlag {
    /// The function vanishes identically outside the box.
    Exact,
    /// Outside the box the magnitude is below `eps` times the peak.
    Epsilon(f64),
}

/// An axis-aligned box `∏ [lo_μ, hi_μ]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
    pub flag: SupportFlag,
}

impl SupportBox {
    pub fn contains(&self, x: &FourVector) -> bool {
        (0..4).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    pub fn union(&self, other: &SupportBox) -> SupportBox {
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        for i in 0..4 {
            lo[i] = self.lo[i].min(other.lo[i]);
            hi[i] = self.hi[i].max(other.hi[i]);
        }
        let flag = match (self.flag, other.flag) {
            (SupportFlag::Exact, SupportFlag::Exact) => SupportFlag::Exact,
            (SupportFlag::Epsilon(a), SupportFlag::Epsilon(b)) => SupportFlag::Epsilon(a.max(b)),
            (SupportFlag::Epsilon(a), _) | (_, SupportFlag::Epsilon(a)) => SupportFlag::Epsilon(a),
        };
        SupportBox { lo, hi, flag }
    }

    /// Corner points (16) plus face centers (8).
    pub fn corners_and_face_centers(&self) -> Vec<FourVector> {
        let mut pts = Vec::with_capacity(24);
        for mask in 0..16u32 {
            let mut p = [0.0; 4];
            for (i, v) in p.iter_mut().enumerate() {
                *v = if mask & (1 << i) != 0 {
                    self.hi[i]
                } else {
                    self.lo[i]
                };
            }
            pts.push(FourVector(p));
        }
        let mid: [f64; 4] = std::array::from_fn(|i| 0.5 * (self.lo[i] + self.hi[i]));
        for i in 0..4 {
            for v in [self.lo[i], self.hi[i]] {
                let mut p = mid;
                p[i] = v;
                pts.push(FourVector(p));
            }
        }
        pts
    }

    pub fn center(&self) -> FourVector {
        FourVector(std::array::from_fn(|i| 0.5 * (self.lo[i] + self.hi[i])))
    }

    pub fn inflate(&self, margin: [f64; 4]) -> SupportBox {
        let mut out = *self;
        for i in 0..4 {
            out.lo[i] -= margin[i];
            out.hi[i] += margin[i];
        }
        out
    }
}

/// Which space a support query refers to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Space {
    Position,
    Momentum,
}

// ---------------------------------------------------------------------------
// Gaussian packets
// ---------------------------------------------------------------------------

/// `c · exp(−½ (x−a)ᵀ S (x−a)) · exp(i k·(x−a))` with `S` symmetric positive
/// definite. Axis-aligned widths are a special case; the general quadratic
/// form keeps the family closed under Lorentz transformations.
#[derive(Clone, Debug)]
pub struct GaussianPacket {
    amplitude: Complex64,
    center: FourVector,
    s: [[f64; 4]; 4],
    s_inv: [[f64; 4]; 4],
    inv_sqrt_det: f64,
    wavevector: FourVector,
}

/// Cholesky factorisation; `None` if not positive definite.
fn cholesky4(m: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut l = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn spd_inverse4(m: &[[f64; 4]; 4]) -> Option<([[f64; 4]; 4], f64)> {
    let l = cholesky4(m)?;
    let det_sqrt = l[0][0] * l[1][1] * l[2][2] * l[3][3];
    // Solve L Lᵀ X = I column by column.
    let mut inv = [[0.0; 4]; 4];
    for col in 0..4 {
        let mut y = [0.0; 4];
        for i in 0..4 {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        let mut x = [0.0; 4];
        for i in (0..4).rev() {
            let mut s = y[i];
            for k in (i + 1)..4 {
                s -= l[k][i] * x[k];
            }
            x[i] = s / l[i][i];
        }
        for i in 0..4 {
            inv[i][col] = x[i];
        }
    }
    Some((inv, det_sqrt * det_sqrt))
}

impl GaussianPacket {
    /// Axis-aligned packet `c·exp(−Σ (x_μ−a_μ)²/(2σ_μ²))·exp(i k·x)`.
    pub fn axis_aligned(
        amplitude: Complex64,
        center: FourVector,
        widths: [f64; 4],
        wavevector: FourVector,
    ) -> Self {
        let mut s = [[0.0; 4]; 4];
        for (i, w) in widths.iter().enumerate() {
            assert!(*w > 0.0, "widths must be positive");
            s[i][i] = 1.0 / (w * w);
        }
        // absorb the absolute phase so the stored one is relative to center
        let phase = Complex64::new(0.0, wavevector.dot(&center)).exp();
        Self::general(amplitude * phase, center, s, wavevector)
            .expect("diagonal positive form")
    }

    /// General quadratic-form packet; the phase `k·(x−a)` is relative to the
    /// center.
    pub fn general(
        amplitude: Complex64,
        center: FourVector,
        s: [[f64; 4]; 4],
        wavevector: FourVector,
    ) -> Result<Self, TestFnError> {
        for i in 0..4 {
            for j in 0..4 {
                if (s[i][j] - s[j][i]).abs() > 1e-12 {
                    return Err(TestFnError::NotPositiveDefinite);
                }
            }
        }
        let (s_inv, det) = spd_inverse4(&s).ok_or(TestFnError::NotPositiveDefinite)?;
        Ok(GaussianPacket {
            amplitude,
            center,
            s,
            s_inv,
            inv_sqrt_det: 1.0 / det.sqrt(),
            wavevector,
        })
    }

    pub fn evaluate(&self, x: &FourVector) -> Complex64 {
        let u = *x - self.center;
        let mut q = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                q += u[i] * self.s[i][j] * u[j];
            }
        }
        let phase = self.wavevector.dot(&u);
        self.amplitude * Complex64::new(-0.5 * q, phase).exp()
    }

    /// Closed form: `c · det(S)^{−1/2} · e^{−ip·a} · exp(−½ wᵀS⁻¹w)` with
    /// `w = η(k − p)`.
    pub fn fourier(&self, p: &FourVector) -> Complex64 {
        let d = self.wavevector - *p;
        let w = d.lower();
        let mut q = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                q += w[i] * self.s_inv[i][j] * w[j];
            }
        }
        let phase = -p.dot(&self.center);
        self.amplitude * self.inv_sqrt_det * Complex64::new(-0.5 * q, phase).exp()
    }

    pub fn center(&self) -> &FourVector {
        &self.center
    }

    pub fn wavevector(&self) -> &FourVector {
        &self.wavevector
    }

    pub fn quad_form(&self) -> &[[f64; 4]; 4] {
        &self.s
    }

    pub fn quad_form_inv(&self) -> &[[f64; 4]; 4] {
        &self.s_inv
    }

    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    pub fn inv_sqrt_det(&self) -> f64 {
        self.inv_sqrt_det
    }

    fn poincare(&self, y: &FourVector, a: &LorentzTransform) -> GaussianPacket {
        // f(Λ⁻¹(x−y)): center Λa+y, form Λ⁻ᵀSΛ⁻¹, wavevector Λk.
        let inv = a.inverse();
        let im = inv.matrix();
        let mut s = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    for l in 0..4 {
                        acc += im[k][i] * self.s[k][l] * im[l][j];
                    }
                }
                s[i][j] = acc;
            }
        }
        // re-symmetrise rounding
        for i in 0..4 {
            for j in (i + 1)..4 {
                let v = 0.5 * (s[i][j] + s[j][i]);
                s[i][j] = v;
                s[j][i] = v;
            }
        }
        GaussianPacket::general(
            self.amplitude,
            a.apply(&self.center) + *y,
            s,
            a.apply(&self.wavevector),
        )
        .expect("conjugated SPD form stays SPD")
    }

    fn support(&self, eps: f64, space: Space) -> SupportBox {
        let l = 2.0 * (1.0 / eps).ln();
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        match space {
            Space::Position => {
                for i in 0..4 {
                    let half = (l * self.s_inv[i][i]).sqrt();
                    lo[i] = self.center[i] - half;
                    hi[i] = self.center[i] + half;
                }
            }
            Space::Momentum => {
                for i in 0..4 {
                    let half = (l * self.s[i][i]).sqrt();
                    lo[i] = self.wavevector[i] - half;
                    hi[i] = self.wavevector[i] + half;
                }
            }
        }
        SupportBox {
            lo,
            hi,
            flag: SupportFlag::Epsilon(eps),
        }
    }
}

// ---------------------------------------------------------------------------
// Bump packets
// ---------------------------------------------------------------------------

/// Normalised bump profile `exp(−1/(1−t²))` on `(−1, 1)`, zero outside.
pub fn bump_profile(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

const BUMP_FT_TOL: f64 = 1e-10;
const BUMP_FT_BUDGET: usize = 40_000;

/// Degree of the Chebyshev representation per half-oscillation segment.
const CHEB_DEGREE: usize = 20;

/// Piecewise Chebyshev interpolant of the even profile transform
/// `u ↦ ∫ ψ(t) cos(ut) dt` on `[0, u_max]`, built from adaptive-quadrature
/// samples. Segments are one half-oscillation (π) wide, so the fixed degree
/// reaches quadrature accuracy.
#[derive(Debug, Default)]
struct ProfileInterp {
    // coefficient blocks per segment of width π in u
    segments: Vec<[f64; CHEB_DEGREE]>,
}

impl ProfileInterp {
    const SEG: f64 = std::f64::consts::PI;

    fn ensure(&mut self, u: f64) -> Result<(), QuadError> {
        let needed = (u / Self::SEG).floor() as usize + 1;
        while self.segments.len() < needed {
            let k = self.segments.len();
            let lo = k as f64 * Self::SEG;
            let mut samples = [0.0; CHEB_DEGREE];
            for (j, s) in samples.iter_mut().enumerate() {
                // Chebyshev points of the first kind on [lo, lo + π]
                let t = ((2 * j + 1) as f64 * std::f64::consts::PI / (2.0 * CHEB_DEGREE as f64))
                    .cos();
                let uu = lo + 0.5 * Self::SEG * (t + 1.0);
                let (val, _) = adaptive_integrate(
                    |x| bump_profile(x) * (uu * x).cos(),
                    -1.0,
                    1.0,
                    BUMP_FT_TOL * 0.1,
                    0.444,
                    BUMP_FT_BUDGET,
                )?;
                *s = val;
            }
            // interpolation coefficients by the discrete cosine formula
            let mut coeffs = [0.0; CHEB_DEGREE];
            let n = CHEB_DEGREE as f64;
            for (m, c) in coeffs.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, s) in samples.iter().enumerate() {
                    acc += s * ((m as f64) * (2 * j + 1) as f64 * std::f64::consts::PI / (2.0 * n))
                        .cos();
                }
                *c = acc * if m == 0 { 1.0 / n } else { 2.0 / n };
            }
            self.segments.push(coeffs);
        }
        Ok(())
    }

    fn eval(&self, u: f64) -> f64 {
        let k = ((u / Self::SEG).floor() as usize).min(self.segments.len() - 1);
        let lo = k as f64 * Self::SEG;
        let t = 2.0 * (u - lo) / Self::SEG - 1.0;
        // Clenshaw recurrence
        let c = &self.segments[k];
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &cm in c.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + cm;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + c[0]
    }
}

/// Largest argument served by the interpolant; far beyond every ε-support
/// box that occurs in practice.
const PROFILE_INTERP_CAP: f64 = 6000.0;

fn global_profile() -> &'static Mutex<ProfileInterp> {
    static INTERP: std::sync::OnceLock<Mutex<ProfileInterp>> = std::sync::OnceLock::new();
    INTERP.get_or_init(|| Mutex::new(ProfileInterp::default()))
}

/// The universal even profile transform `I(u) = ∫_{−1}^{1} ψ(t) cos(ut) dt`;
/// all bump transform factors are `h·I(|w|h)`.
fn profile_transform(u: f64) -> Result<f64, QuadError> {
    debug_assert!(u >= 0.0);
    if u <= PROFILE_INTERP_CAP {
        let mut interp = global_profile().lock().unwrap();
        interp.ensure(u)?;
        Ok(interp.eval(u))
    } else {
        let (val, _) = adaptive_integrate(
            |x| bump_profile(x) * (u * x).cos(),
            -1.0,
            1.0,
            BUMP_FT_TOL,
            0.444,
            BUMP_FT_BUDGET,
        )?;
        Ok(val)
    }
}

/// `c · ∏_μ exp(−1/(1−t_μ²)) · exp(i k·(x−a))` with `t_μ = (x_μ−a_μ)/h_μ`,
/// identically zero outside the product box. One-dimensional transform
/// profiles come from adaptive quadrature behind a process-wide
/// interpolating cache plus a per-packet memo; clones share the memo.
#[derive(Clone, Debug)]
pub struct BumpPacket {
    amplitude: Complex64,
    center: FourVector,
    halfwidth: [f64; 4],
    wavevector: FourVector,
    cache: Arc<Mutex<HashMap<(u8, u64), f64>>>,
}

impl BumpPacket {
    /// Packet in the spec form `c·∏ bump((x_μ−a_μ)/h_μ)·e^{ik·x}`.
    pub fn new(
        amplitude: Complex64,
        center: FourVector,
        halfwidth: [f64; 4],
        wavevector: FourVector,
    ) -> Self {
        assert!(halfwidth.iter().all(|h| *h > 0.0));
        let phase = Complex64::new(0.0, wavevector.dot(&center)).exp();
        BumpPacket {
            amplitude: amplitude * phase,
            center,
            halfwidth,
            wavevector,
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    fn with_fields(
        amplitude: Complex64,
        center: FourVector,
        halfwidth: [f64; 4],
        wavevector: FourVector,
    ) -> Self {
        BumpPacket {
            amplitude,
            center,
            halfwidth,
            wavevector,
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn evaluate(&self, x: &FourVector) -> Complex64 {
        let u = *x - self.center;
        let mut profile = 1.0;
        for i in 0..4 {
            let t = u[i] / self.halfwidth[i];
            if t.abs() >= 1.0 {
                return Complex64::new(0.0, 0.0);
            }
            profile *= bump_profile(t);
        }
        let phase = self.wavevector.dot(&u);
        self.amplitude * profile * Complex64::new(0.0, phase).exp()
    }

    /// One-dimensional transform profile
    /// `G_μ(w) = h_μ ∫_{−1}^{1} exp(−1/(1−t²)) cos(w h_μ t) dt`,
    /// real and even in `w`.
    fn profile_ft(&self, axis: usize, w: f64) -> Result<f64, TestFnError> {
        let h = self.halfwidth[axis];
        let u = w.abs() * h;
        if u <= PROFILE_INTERP_CAP {
            return Ok(h * profile_transform(u)?);
        }
        let key = (axis as u8, w.abs().to_bits());
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let out = h * profile_transform(u)?;
        self.cache.lock().unwrap().insert(key, out);
        Ok(out)
    }

    /// `f̃(p) = (2π)⁻² c e^{−ip·a} ∏_μ G_μ(p_μ − k_μ)`.
    pub fn fourier(&self, p: &FourVector) -> Result<Complex64, TestFnError> {
        let mut profile = 1.0;
        for i in 0..4 {
            profile *= self.profile_ft(i, p[i] - self.wavevector[i])?;
        }
        let phase = -p.dot(&self.center);
        let norm = 1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
        Ok(self.amplitude * norm * profile * Complex64::new(0.0, phase).exp())
    }

    pub fn center(&self) -> &FourVector {
        &self.center
    }

    pub fn halfwidth(&self) -> &[f64; 4] {
        &self.halfwidth
    }

    /// Exact position-space box.
    pub fn exact_box(&self) -> SupportBox {
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        for i in 0..4 {
            lo[i] = self.center[i] - self.halfwidth[i];
            hi[i] = self.center[i] + self.halfwidth[i];
        }
        SupportBox {
            lo,
            hi,
            flag: SupportFlag::Exact,
        }
    }

    fn poincare(&self, y: &FourVector, a: &LorentzTransform) -> Result<BumpPacket, TestFnError> {
        if !a.is_signed_permutation(1e-12) {
            return Err(TestFnError::Unsupported(
                "bump packets support only translations and signed axis permutations; \
                 a sheared image is no longer a product bump"
                    .into(),
            ));
        }
        let m = a.matrix();
        let mut halfwidth = [0.0; 4];
        for (i, hw) in halfwidth.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, h) in self.halfwidth.iter().enumerate() {
                acc += m[i][j].abs() * h;
            }
            *hw = acc;
        }
        Ok(BumpPacket::with_fields(
            self.amplitude,
            a.apply(&self.center) + *y,
            halfwidth,
            a.apply(&self.wavevector),
        ))
    }

    fn momentum_support(&self, eps: f64) -> Result<SupportBox, TestFnError> {
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        for axis in 0..4 {
            let g0 = self.profile_ft(axis, 0.0)?;
            let threshold = eps * g0.abs();
            let h = self.halfwidth[axis];
            // Scan the oscillatory tail; the profile decays like
            // exp(−√(wh)) with zeros roughly every π in wh, so a long run
            // of samples below threshold certifies the envelope.
            let step = 0.8 / h;
            let run_target = 60usize;
            let mut w = 0.0;
            let mut run_start = 0.0;
            let mut run = 0usize;
            let half = loop {
                let g = self.profile_ft(axis, w)?;
                if g.abs() < threshold {
                    if run == 0 {
                        run_start = w;
                    }
                    run += 1;
                    if run >= run_target {
                        break run_start;
                    }
                } else {
                    run = 0;
                }
                w += step;
                if w * h > 4000.0 {
                    break w;
                }
            };
            lo[axis] = self.wavevector[axis] - half;
            hi[axis] = self.wavevector[axis] + half;
        }
        Ok(SupportBox {
            lo,
            hi,
            flag: SupportFlag::Epsilon(eps),
        })
    }
}

// ---------------------------------------------------------------------------
// TestFunction
// ---------------------------------------------------------------------------

/// A single-variable test function: Gaussian packet, bump packet, or a
/// finite sum of those.
#[derive(Clone, Debug)]
pub enum TestFunction {
    Gaussian(GaussianPacket),
    Bump(BumpPacket),
    Sum(Vec<TestFunction>),
}

impl TestFunction {
    pub fn gaussian(
        amplitude: Complex64,
        center: FourVector,
        widths: [f64; 4],
        wavevector: FourVector,
    ) -> Self {
        TestFunction::Gaussian(GaussianPacket::axis_aligned(
            amplitude, center, widths, wavevector,
        ))
    }

    pub fn bump(
        amplitude: Complex64,
        center: FourVector,
        halfwidth: [f64; 4],
        wavevector: FourVector,
    ) -> Self {
        TestFunction::Bump(BumpPacket::new(amplitude, center, halfwidth, wavevector))
    }

    /// Unit Gaussian `exp(−|x|²_E / 2)`.
    pub fn unit_gaussian() -> Self {
        Self::gaussian(
            Complex64::new(1.0, 0.0),
            FourVector::zero(),
            [1.0; 4],
            FourVector::zero(),
        )
    }

    pub fn evaluate(&self, x: &FourVector) -> Complex64 {
        match self {
            TestFunction::Gaussian(g) => g.evaluate(x),
            TestFunction::Bump(b) => b.evaluate(x),
            TestFunction::Sum(terms) => terms.iter().map(|t| t.evaluate(x)).sum(),
        }
    }

    pub fn fourier(&self, p: &FourVector) -> Result<Complex64, TestFnError> {
        match self {
            TestFunction::Gaussian(g) => Ok(g.fourier(p)),
            TestFunction::Bump(b) => b.fourier(p),
            TestFunction::Sum(terms) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in terms {
                    acc += t.fourier(p)?;
                }
                Ok(acc)
            }
        }
    }

    pub fn translate(&self, y: &FourVector) -> TestFunction {
        self.poincare(y, &LorentzTransform::identity())
            .expect("translations are always supported")
    }

    /// Scalar Poincaré action `f_{(y,Λ)}(x) = f(Λ⁻¹(x−y))`.
    pub fn poincare(
        &self,
        y: &FourVector,
        a: &LorentzTransform,
    ) -> Result<TestFunction, TestFnError> {
        Ok(match self {
            TestFunction::Gaussian(g) => TestFunction::Gaussian(g.poincare(y, a)),
            TestFunction::Bump(b) => TestFunction::Bump(b.poincare(y, a)?),
            TestFunction::Sum(terms) => TestFunction::Sum(
                terms
                    .iter()
                    .map(|t| t.poincare(y, a))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }

    /// The `*`-involution `f*(x) = conj(f(x))`; in momentum space
    /// `(f*)~(p) = conj(f̃(−p))`.
    pub fn star(&self) -> TestFunction {
        match self {
            TestFunction::Gaussian(g) => {
                let mut out = g.clone();
                out.amplitude = out.amplitude.conj();
                out.wavevector = -out.wavevector;
                TestFunction::Gaussian(out)
            }
            TestFunction::Bump(b) => TestFunction::Bump(BumpPacket::with_fields(
                b.amplitude.conj(),
                b.center,
                b.halfwidth,
                -b.wavevector,
            )),
            TestFunction::Sum(terms) => {
                TestFunction::Sum(terms.iter().map(|t| t.star()).collect())
            }
        }
    }

    /// The TCP involution `f^J(x) = conj(f(−x))`; in momentum space
    /// `(f^J)~(p) = conj(f̃(p))`.
    pub fn reflect_j(&self) -> TestFunction {
        match self {
            TestFunction::Gaussian(g) => {
                // f(−x) has center −a and wavevector −k; conjugation
                // restores k and conjugates the amplitude.
                TestFunction::Gaussian(
                    GaussianPacket::general(g.amplitude.conj(), -g.center, g.s, g.wavevector)
                        .expect("form unchanged"),
                )
            }
            TestFunction::Bump(b) => TestFunction::Bump(BumpPacket::with_fields(
                b.amplitude.conj(),
                -b.center,
                b.halfwidth,
                b.wavevector,
            )),
            TestFunction::Sum(terms) => {
                TestFunction::Sum(terms.iter().map(|t| t.reflect_j()).collect())
            }
        }
    }

    /// Smallest axis-aligned box outside which the magnitude is below
    /// `eps` times the peak (exact for bump packets in position space).
    pub fn eps_support(&self, eps: f64, space: Space) -> Result<SupportBox, TestFnError> {
        assert!(eps > 0.0 && eps < 1.0);
        match (self, space) {
            (TestFunction::Gaussian(g), _) => Ok(g.support(eps, space)),
            (TestFunction::Bump(b), Space::Position) => Ok(b.exact_box()),
            (TestFunction::Bump(b), Space::Momentum) => b.momentum_support(eps),
            (TestFunction::Sum(terms), _) => {
                let mut boxes = terms.iter().map(|t| t.eps_support(eps, space));
                let mut acc = boxes.next().expect("sum terms must be nonempty")?;
                for b in boxes {
                    acc = acc.union(&b?);
                }
                Ok(acc)
            }
        }
    }

    /// Upper bound for `max |f|`.
    pub fn peak_abs_bound(&self) -> f64 {
        match self {
            TestFunction::Gaussian(g) => g.amplitude.norm(),
            TestFunction::Bump(b) => b.amplitude.norm() * (-4.0f64).exp(),
            TestFunction::Sum(terms) => terms.iter().map(|t| t.peak_abs_bound()).sum(),
        }
    }

    /// Upper bound for `max |f̃|`.
    pub fn ft_peak_abs_bound(&self) -> Result<f64, TestFnError> {
        match self {
            TestFunction::Gaussian(g) => Ok(g.amplitude.norm() * g.inv_sqrt_det),
            TestFunction::Bump(b) => {
                let mut profile = 1.0;
                for axis in 0..4 {
                    profile *= b.profile_ft(axis, 0.0)?.abs();
                }
                Ok(b.amplitude.norm() * profile
                    / (4.0 * std::f64::consts::PI * std::f64::consts::PI))
            }
            TestFunction::Sum(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.ft_peak_abs_bound()?;
                }
                Ok(acc)
            }
        }
    }

    /// Oscillation rate of `f̃` along a spatial momentum axis, in radians
    /// per unit momentum: the position-space center enters through the
    /// phase `e^{−ip·a}`, with the time component riding on `ω(q)`.
    pub(crate) fn momentum_osc_rate(&self, axis: usize) -> f64 {
        match self {
            TestFunction::Gaussian(g) => g.center[0].abs() + g.center[axis].abs(),
            TestFunction::Bump(b) => b.center[0].abs() + b.center[axis].abs(),
            TestFunction::Sum(terms) => terms
                .iter()
                .map(|t| t.momentum_osc_rate(axis))
                .fold(0.0, f64::max),
        }
    }

    /// Width of the sharpest feature of `f̃` along a momentum axis: the
    /// transform's decay width for Gaussians, the profile oscillation scale
    /// for bumps.
    pub(crate) fn momentum_feature_scale(&self, axis: usize) -> f64 {
        match self {
            TestFunction::Gaussian(g) => 1.18 / g.s_inv[axis][axis].sqrt(),
            TestFunction::Bump(b) => 1.86 / b.halfwidth[axis],
            TestFunction::Sum(terms) => terms
                .iter()
                .map(|t| t.momentum_feature_scale(axis))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn scale(&self, c: Complex64) -> TestFunction {
        match self {
            TestFunction::Gaussian(g) => {
                let mut out = g.clone();
                out.amplitude *= c;
                TestFunction::Gaussian(out)
            }
            TestFunction::Bump(b) => {
                let mut out = b.clone();
                out.amplitude *= c;
                TestFunction::Bump(out)
            }
            TestFunction::Sum(terms) => {
                TestFunction::Sum(terms.iter().map(|t| t.scale(c)).collect())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// JSON form of one packet. Amplitudes are `[re, im]` pairs; a test-function
/// configuration is a list of packets summed together, e.g.
///
/// ```json
/// [{"type": "bump", "center": [0, 2, 0, 0], "halfwidth": [0.5, 0.5, 0.5, 0.5],
///   "wavevector": [0, 0, 0, 0], "amplitude": [1, 0]}]
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PacketSpec {
    Gaussian {
        center: [f64; 4],
        widths: [f64; 4],
        wavevector: [f64; 4],
        amplitude: [f64; 2],
    },
    Bump {
        center: [f64; 4],
        halfwidth: [f64; 4],
        wavevector: [f64; 4],
        amplitude: [f64; 2],
    },
}

impl PacketSpec {
    pub fn build(&self) -> TestFunction {
        match self {
            PacketSpec::Gaussian {
                center,
                widths,
                wavevector,
                amplitude,
            } => TestFunction::gaussian(
                Complex64::new(amplitude[0], amplitude[1]),
                FourVector(*center),
                *widths,
                FourVector(*wavevector),
            ),
            PacketSpec::Bump {
                center,
                halfwidth,
                wavevector,
                amplitude,
            } => TestFunction::bump(
                Complex64::new(amplitude[0], amplitude[1]),
                FourVector(*center),
                *halfwidth,
                FourVector(*wavevector),
            ),
        }
    }
}

/// Builds one test function from a list of packets.
pub fn function_from_specs(specs: &[PacketSpec]) -> Option<TestFunction> {
    match specs.len() {
        0 => None,
        1 => Some(specs[0].build()),
        _ => Some(TestFunction::Sum(specs.iter().map(|s| s.build()).collect())),
    }
}

// keep METRIC referenced for doc cross-links
const _: [f64; 4] = METRIC;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> FourVector {
        FourVector::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    /// Separable 1-D quadrature oracle for axis-aligned Gaussian transforms.
    fn gaussian_ft_quadrature(
        amp: Complex64,
        center: FourVector,
        widths: [f64; 4],
        k: FourVector,
        p: FourVector,
    ) -> Complex64 {
        let mut out = amp / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
        for axis in 0..4 {
            // phase of e^{-ip·x} and e^{+ik·x} on this axis
            let sign = if axis == 0 { 1.0 } else { -1.0 };
            let w = sign * (p[axis] - k[axis]);
            let a = center[axis];
            let s = widths[axis];
            let r = 10.0 * s;
            let (re, _) = adaptive_integrate(
                |x: f64| (-0.5 * ((x - a) / s).powi(2)).exp() * (w * x).cos(),
                a - r,
                a + r,
                1e-13,
                s,
                60_000,
            )
            .unwrap();
            let (im, _) = adaptive_integrate(
                |x: f64| -(-0.5 * ((x - a) / s).powi(2)).exp() * (w * x).sin(),
                a - r,
                a + r,
                1e-13,
                s,
                60_000,
            )
            .unwrap();
            out *= Complex64::new(re, im);
        }
        out
    }

    #[test]
    fn unit_gaussian_ft_is_self_dual() {
        let f = TestFunction::unit_gaussian();
        assert_abs_diff_eq!(f.evaluate(&FourVector::zero()).re, 1.0, epsilon = 1e-15);
        let p = FourVector::new(0.7, -1.2, 0.4, 2.0);
        let ft = f.fourier(&p).unwrap();
        let pe: f64 = (0..4).map(|i| p[i] * p[i]).sum();
        assert_abs_diff_eq!(ft.re, (-0.5 * pe).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(ft.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gaussian_closed_form_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..12 {
            let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let center = random_vec(&mut rng, 1.5);
            let widths = [
                rng.gen_range(0.5..1.8),
                rng.gen_range(0.5..1.8),
                rng.gen_range(0.5..1.8),
                rng.gen_range(0.5..1.8),
            ];
            let k = random_vec(&mut rng, 1.0);
            let f = TestFunction::gaussian(amp, center, widths, k);
            let p = random_vec(&mut rng, 5.0);
            let closed = f.fourier(&p).unwrap();
            let quad = gaussian_ft_quadrature(amp, center, widths, k, p);
            assert!(
                (closed - quad).norm() <= 1e-10 * quad.norm().max(1e-6),
                "closed {closed} quad {quad}"
            );
        }
    }

    #[test]
    fn translation_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = TestFunction::gaussian(
            Complex64::new(0.8, -0.3),
            FourVector::new(0.1, 0.4, -0.2, 0.0),
            [1.0, 0.7, 1.3, 0.9],
            FourVector::new(0.5, -1.0, 0.0, 0.2),
        );
        for _ in 0..20 {
            let y = random_vec(&mut rng, 2.0);
            let p = random_vec(&mut rng, 3.0);
            let lhs = f.translate(&y).fourier(&p).unwrap();
            let rhs = Complex64::new(0.0, -p.dot(&y)).exp() * f.fourier(&p).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn poincare_defining_property_and_ft_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = TestFunction::gaussian(
            Complex64::new(1.0, 0.4),
            FourVector::new(0.2, -0.1, 0.3, 0.5),
            [0.8, 1.1, 0.9, 1.4],
            FourVector::new(0.3, 0.7, -0.5, 0.0),
        );
        let l = LorentzTransform::boost(0.6, 1)
            .unwrap()
            .compose(&LorentzTransform::rotation(0.9, (2, 3)).unwrap());
        let y = FourVector::new(0.4, -0.8, 0.1, 0.3);
        let g = f.poincare(&y, &l).unwrap();
        assert!(matches!(
            f.poincare(&FourVector::zero(), &LorentzTransform::identity())
                .unwrap(),
            TestFunction::Gaussian(_)
        ));
        for _ in 0..20 {
            let x = random_vec(&mut rng, 2.0);
            // g(Λx + y) = f(x)
            let lhs = g.evaluate(&(l.apply(&x) + y));
            let rhs = f.evaluate(&x);
            assert!((lhs - rhs).norm() < 1e-12);
            // FT covariance: g̃(p) = e^{−ip·y} f̃(Λ⁻¹p)
            let p = random_vec(&mut rng, 3.0);
            let lhs = g.fourier(&p).unwrap();
            let rhs = Complex64::new(0.0, -p.dot(&y)).exp()
                * f.fourier(&l.inverse().apply(&p)).unwrap();
            assert!((lhs - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn involution_ft_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = TestFunction::gaussian(
            Complex64::new(0.3, 0.9),
            FourVector::new(-0.4, 0.2, 0.6, -0.1),
            [1.2, 0.6, 1.0, 0.8],
            FourVector::new(0.9, -0.2, 0.4, 1.1),
        );
        let fs = f.star();
        let fj = f.reflect_j();
        for _ in 0..100 {
            let p = random_vec(&mut rng, 3.0);
            let star_lhs = fs.fourier(&p).unwrap();
            let star_rhs = f.fourier(&(-p)).unwrap().conj();
            assert!((star_lhs - star_rhs).norm() < 1e-13 * star_rhs.norm().max(1.0));
            let j_lhs = fj.fourier(&p).unwrap();
            let j_rhs = f.fourier(&p).unwrap().conj();
            assert!((j_lhs - j_rhs).norm() < 1e-13 * j_rhs.norm().max(1.0));
        }
        // pointwise definitions
        let x = FourVector::new(0.3, -0.6, 0.1, 0.9);
        assert!((fs.evaluate(&x) - f.evaluate(&x).conj()).norm() < 1e-15);
        assert!((fj.evaluate(&x) - f.evaluate(&(-x)).conj()).norm() < 1e-15);
        // i·f ↦ −i·f under star for real f
        let real = TestFunction::unit_gaussian();
        let i_f = real.scale(Complex64::new(0.0, 1.0));
        let x = FourVector::new(0.2, 0.2, 0.2, 0.2);
        assert!((i_f.star().evaluate(&x) + i_f.evaluate(&x)).norm() < 1e-15);
        // double application is the identity
        let back = fj.reflect_j();
        assert!((back.evaluate(&x) - f.evaluate(&x)).norm() < 1e-15);
    }

    #[test]
    fn bump_basic_properties() {
        let b = TestFunction::bump(
            Complex64::new(1.0, 0.0),
            FourVector::new(0.0, 2.0, 0.0, 0.0),
            [0.5; 4],
            FourVector::zero(),
        );
        // exactly zero outside the box
        assert_eq!(
            b.evaluate(&FourVector::new(0.51, 2.0, 0.0, 0.0)),
            Complex64::new(0.0, 0.0)
        );
        assert_eq!(
            b.evaluate(&FourVector::new(0.0, 2.0, 0.0, 0.6)),
            Complex64::new(0.0, 0.0)
        );
        assert!(b.evaluate(&FourVector::new(0.0, 2.0, 0.0, 0.0)).norm() > 0.0);
        let sb = b.eps_support(1e-6, Space::Position).unwrap();
        assert_eq!(sb.flag, SupportFlag::Exact);
        assert_eq!(sb.lo[1], 1.5);
        assert_eq!(sb.hi[1], 2.5);
        // sum of f and −f vanishes
        let cancel = TestFunction::Sum(vec![b.clone(), b.scale(Complex64::new(-1.0, 0.0))]);
        assert_eq!(
            cancel.evaluate(&FourVector::new(0.1, 2.1, 0.0, 0.0)),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn bump_ft_symmetry_and_direct_quadrature() {
        // real even bump: f̃(p) and f̃(−p) are conjugate (and here real)
        let b = TestFunction::bump(
            Complex64::new(2.0, 0.0),
            FourVector::zero(),
            [1.0, 0.8, 1.2, 0.6],
            FourVector::zero(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = random_vec(&mut rng, 4.0);
            let a = b.fourier(&p).unwrap();
            let c = b.fourier(&(-p)).unwrap();
            assert!((a - c.conj()).norm() < 1e-12 * a.norm().max(1e-10));
        }
        // spot check one axis profile against a dense rule
        let w: f64 = 3.7;
        let (direct, _) = adaptive_integrate(
            |t| bump_profile(t) * (w * t).cos(),
            -1.0,
            1.0,
            1e-13,
            0.444,
            60_000,
        )
        .unwrap();
        if let TestFunction::Bump(bp) = &b {
            let g = bp.profile_ft(1, w / 0.8).unwrap();
            assert_abs_diff_eq!(g, 0.8 * direct, epsilon = 1e-11);
        } else {
            unreachable!()
        }
    }

    #[test]
    fn gaussian_support_inversion() {
        let f = TestFunction::unit_gaussian();
        let eps = (-8.0f64).exp();
        let sb = f.eps_support(eps, Space::Position).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(sb.hi[i], 4.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sb.lo[i], -4.0, epsilon = 1e-12);
        }
        // momentum box of the unit gaussian is the same by self-duality
        let mb = f.eps_support(eps, Space::Momentum).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(mb.hi[i], 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bump_momentum_support_certifies_tail() {
        let b = TestFunction::bump(
            Complex64::new(1.0, 0.0),
            FourVector::new(0.0, 2.0, 0.0, 0.0),
            [0.5; 4],
            FourVector::zero(),
        );
        let eps = 1e-4;
        let sb = b.eps_support(eps, Space::Momentum).unwrap();
        let peak = b.ft_peak_abs_bound().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..40 {
            // points just outside a random face
            let axis = rng.gen_range(0..4);
            let mut p = [0.0; 4];
            for (i, v) in p.iter_mut().enumerate() {
                *v = rng.gen_range(sb.lo[i]..sb.hi[i]);
            }
            p[axis] = if rng.gen_bool(0.5) {
                sb.hi[axis] + rng.gen_range(0.0..30.0)
            } else {
                sb.lo[axis] - rng.gen_range(0.0..30.0)
            };
            let v = b.fourier(&FourVector(p)).unwrap().norm();
            assert!(v < eps * peak * 1.05, "tail value {v} vs {}", eps * peak);
        }
    }

    #[test]
    fn bump_rejects_shear_but_permutes_axes() {
        let b = TestFunction::bump(
            Complex64::new(1.0, 0.0),
            FourVector::new(0.0, 2.0, 0.0, 0.0),
            [0.5, 0.4, 0.3, 0.2],
            FourVector::zero(),
        );
        let boost = LorentzTransform::boost(0.3, 1).unwrap();
        assert!(matches!(
            b.poincare(&FourVector::zero(), &boost),
            Err(TestFnError::Unsupported(_))
        ));
        // quarter rotation in the 1-2 plane permutes the axes exactly
        let rot = LorentzTransform::rotation(std::f64::consts::FRAC_PI_2, (1, 2)).unwrap();
        let rb = b.poincare(&FourVector::zero(), &rot).unwrap();
        let x = FourVector::new(0.1, 2.05, 0.1, 0.05);
        assert!((rb.evaluate(&rot.apply(&x)) - b.evaluate(&x)).norm() < 1e-12);
    }

    #[test]
    fn bump_ft_polynomial_decay_proxy() {
        // Schwartz decay proxy: fitted log-log slope at least as steep as -4.
        let b = TestFunction::bump(
            Complex64::new(1.0, 0.0),
            FourVector::zero(),
            [1.0; 4],
            FourVector::zero(),
        );
        let mut pts = Vec::new();
        for k in 0..12 {
            let r = 5.0 + 5.0 * k as f64;
            let p = FourVector::new(r / 2.0, r / 2.0, r / 2.0, r / 2.0);
            // sample the envelope: max of |f̃| over a small neighbourhood to
            // step over zeros of the oscillatory profile
            let mut env: f64 = 0.0;
            for d in -2..=2 {
                let q = FourVector::new(
                    p[0] + 0.3 * d as f64,
                    p[1],
                    p[2] + 0.2 * d as f64,
                    p[3],
                );
                env = env.max(b.fourier(&q).unwrap().norm());
            }
            pts.push(((1.0 + p.euclid_norm()).ln(), env.max(1e-300).ln()));
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(slope < -4.0, "log-log slope {slope}");
    }

    #[test]
    fn packet_spec_round_trip() {
        let json = r#"[{"type":"bump","center":[0,2,0,0],"halfwidth":[0.5,0.5,0.5,0.5],
            "wavevector":[0,0,0,0],"amplitude":[1,0]},
            {"type":"gaussian","center":[0,0,0,0],"widths":[1,1,1,1],
            "wavevector":[0.3,0,0,0],"amplitude":[0,1]}]"#;
        let specs: Vec<PacketSpec> = serde_json::from_str(json).unwrap();
        let f = function_from_specs(&specs).unwrap();
        assert!(matches!(f, TestFunction::Sum(_)));
        let round = serde_json::to_string(&specs).unwrap();
        let back: Vec<PacketSpec> = serde_json::from_str(&round).unwrap();
        assert_eq!(specs.len(), back.len());
    }
}
