//! Numerical wedge-locality experiments: spectator matrix elements of
//! deformed field commutators, the explicit two-particle commutator kernel
//! that certifies every sign convention, and support-property scans.
//!
//! A locality verdict is a contrast statement: the wedge-separated
//! commutator magnitude must sit at the quadrature noise floor while the
//! same-`θ` control stays two orders of magnitude above it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freefield::{
    creation_twist_phase, vacuum_functional_at_scale, FreeFieldError, MassShellMeasure,
};
use crate::geometry::{wedge_of_theta, GeometryError, NoncommMatrix, ThetaSpec, Wedge};
use crate::minkowski::FourVector;
use crate::moyal::{MoyalError, QuadSpec, TensorPoly, TwistedTensor};
use crate::testfn::{PacketSpec, Space, SupportBox, TestFnError, TestFunction};

#[derive(Debug, Error)]
pub enum LocalityError {
    #[error("bump support box is not inside the required wedge region (worst slack {slack:.3e})")]
    SupportViolation { slack: f64 },
    #[error("momentum is off the mass shell: |p² − m²| = {residual:.3e}")]
    OffShell { residual: f64 },
    #[error("test function for a support scan must be a bump packet")]
    NotABump,
    #[error(transparent)]
    FreeField(#[from] FreeFieldError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Moyal(#[from] MoyalError),
    #[error(transparent)]
    TestFn(#[from] TestFnError),
}

/// Outcome of a locality experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Report of one wedge-locality run. `pass` requires the wedge commutator
/// magnitude at or below `10×` the quadrature estimate with the same-`θ`
/// control at or above `100×` the estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalityReport {
    pub magnitude: f64,
    pub quadrature_estimate: f64,
    pub control_magnitude: f64,
    pub verdict: Verdict,
    pub config: LocalityConfig,
}

const PASS_FACTOR: f64 = 10.0;
const CONTROL_FACTOR: f64 = 100.0;

/// Matrix element of the (bosonic) commutator of two deformed fields
/// between spectator vectors:
///
/// ```text
/// ω( g* ⊗ (f₁ ⊗_{θA} (f₂ ⊗_{θB} h)) ) − ω( g* ⊗ (f₂ ⊗_{θB} (f₁ ⊗_{θA} h)) )
/// ```
///
/// The difference is evaluated on shared node scales so its own quadrature
/// error is what the returned estimate measures; the leading error of the
/// individual functionals cancels between the two orderings.
pub fn spectator_matrix_element(
    g: &TensorPoly,
    f1: &TestFunction,
    f2: &TestFunction,
    theta_a: &NoncommMatrix,
    theta_b: &NoncommMatrix,
    h: &TensorPoly,
    mu: &MassShellMeasure,
) -> Result<(Complex64, f64), LocalityError> {
    let g_star = g.star();
    let order = |first: &TestFunction,
                 ta: &NoncommMatrix,
                 second: &TestFunction,
                 tb: &NoncommMatrix|
     -> TensorPoly {
        let inner = TensorPoly::from_function(second.clone()).moyal_product(h, tb);
        let outer = TensorPoly::from_function(first.clone()).moyal_product(&inner, ta);
        g_star.moyal_product(&outer, &NoncommMatrix::zero())
    };
    let fwd = order(f1, theta_a, f2, theta_b);
    let rev = order(f2, theta_b, f1, theta_a);
    let diff = |scale: f64| -> Result<(Complex64, f64), FreeFieldError> {
        let (a, ta) = vacuum_functional_at_scale(&fwd, mu, scale)?;
        let (b, tb) = vacuum_functional_at_scale(&rev, mu, scale)?;
        Ok((a - b, ta + tb))
    };
    let (full, tail) = diff(1.0)?;
    let (half, _) = diff(0.5)?;
    Ok((full, (full - half).norm() + tail))
}

/// The two-particle vacuum matrix element
/// `⟨p₁,p₂| [φ^{θA}(x), φ^{θB}(y)] Ω⟩` expanded into its four twisted
/// plane-wave terms. For `θA = θB = θ` it reduces to
/// `−2i (e^{i(p₁x+p₂y)} − e^{i(p₂x+p₁y)}) sin(p₁θp₂/2)`, the designated
/// certificate for every sign convention in the free-field evaluation.
pub fn two_particle_commutator_kernel(
    theta_a: &NoncommMatrix,
    theta_b: &NoncommMatrix,
    x: &FourVector,
    y: &FourVector,
    p1: &FourVector,
    p2: &FourVector,
    mass: f64,
) -> Result<Complex64, LocalityError> {
    for p in [p1, p2] {
        let residual = (p.norm_sq() - mass * mass).abs();
        if residual > 1e-9 || p[0] <= 0.0 {
            return Err(LocalityError::OffShell { residual });
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (pa, pb) in [(p1, p2), (p2, p1)] {
        // φ^{θA}(x) φ^{θB}(y) Ω: the outer quantum is created on the state
        // of momentum pb, picking up the diagonal twist.
        acc += Complex64::new(0.0, pa.dot(x) + pb.dot(y)).exp()
            * creation_twist_phase(theta_a, pa, pb);
        acc -= Complex64::new(0.0, pa.dot(y) + pb.dot(x)).exp()
            * creation_twist_phase(theta_b, pa, pb);
    }
    Ok(acc)
}

/// Experiment configuration; the default is the canonical run at
/// `θ₁(0.5, 0.3)`, mass 1, bumps of half-width ½ placed at depth 2 inside
/// the two opposite wedges.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalityConfig {
    pub theta: ThetaSpec,
    pub translation: [f64; 4],
    pub halfwidth: [f64; 4],
    /// Plane-wave factors of the two bumps. Nonzero values break the
    /// mirror symmetry of the canonical placement, so cancellations happen
    /// through oscillation rather than exact grid parity.
    pub wavevector1: [f64; 4],
    pub wavevector2: [f64; 4],
    /// Distance of the bump centers along the wedge interior direction.
    pub depth: f64,
    /// The degree-2 spectator pair (position-space packets).
    pub spectator_pair: Vec<PacketSpec>,
    pub mass: f64,
    pub nodes_per_axis: usize,
    /// Node-demand multiplier for the internal measure.
    pub quality: f64,
    /// Allow the placement rule to deepen the centers until the boxes fit
    /// (used by Lorentz-conjugated replicas, where clearance shrinks).
    pub auto_deepen: bool,
}

impl Default for LocalityConfig {
    fn default() -> Self {
        LocalityConfig {
            theta: ThetaSpec {
                kappa_e: 0.5,
                kappa_m: 0.3,
                upper: None,
                lorentz: None,
            },
            translation: [0.0; 4],
            halfwidth: [0.5; 4],
            wavevector1: [0.0; 4],
            wavevector2: [0.0; 4],
            depth: 2.0,
            spectator_pair: vec![
                PacketSpec::Gaussian {
                    center: [0.0; 4],
                    widths: [1.2; 4],
                    wavevector: [0.0, 0.9, 0.0, 0.0],
                    amplitude: [1.0, 0.0],
                },
                PacketSpec::Gaussian {
                    center: [0.0; 4],
                    widths: [1.2; 4],
                    wavevector: [0.0, -0.7, 0.3, 0.0],
                    amplitude: [1.0, 0.0],
                },
            ],
            mass: 1.0,
            nodes_per_axis: 6,
            quality: 0.72,
            auto_deepen: false,
        }
    }
}

impl LocalityConfig {
    /// The same experiment conjugated by a Lorentz transformation: `θ` and
    /// the translation transform, the intrinsic placement rule then follows
    /// the transformed wedge.
    pub fn conjugated(&self, a: &crate::minkowski::LorentzTransform) -> Result<Self, LocalityError> {
        let (theta, params) = self.theta.resolve()?;
        let theta_c = theta.conjugate(a);
        let mut out = self.clone();
        out.theta = ThetaSpec::from_theta(&theta_c, &params);
        out.translation = a.apply(&FourVector(self.translation)).0;
        out.auto_deepen = true;
        Ok(out)
    }
}

/// Verifies that the exact box sits inside `wedge + a` by testing the 16
/// corners and 8 face centers; wedges are convex, so corners decide.
fn box_inside_wedge(
    sb: &SupportBox,
    wedge: &Wedge,
    a: &FourVector,
) -> Result<(), LocalityError> {
    let mut worst = f64::INFINITY;
    for pt in sb.corners_and_face_centers() {
        worst = worst.min(wedge.slack(&(pt - *a)));
    }
    if worst <= 0.0 {
        return Err(LocalityError::SupportViolation { slack: worst });
    }
    Ok(())
}

/// Places a bump of the given half-width at `a + depth·ŵ` inside the wedge,
/// doubling the depth a few times if the box initially pokes out (rotated
/// wedges leave less clearance). Fails with `SupportViolation` if no depth
/// fits.
fn place_bump(
    wedge: &Wedge,
    a: &FourVector,
    halfwidth: &[f64; 4],
    wavevector: &[f64; 4],
    depth: f64,
    auto_deepen: bool,
) -> Result<TestFunction, LocalityError> {
    let dir = wedge.interior_point();
    let tries = if auto_deepen { 6 } else { 1 };
    let mut d = depth;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..tries {
        let center = *a + dir * d;
        let f = TestFunction::bump(
            Complex64::new(1.0, 0.0),
            center,
            *halfwidth,
            FourVector(*wavevector),
        );
        let sb = f.eps_support(1e-6, Space::Position)?;
        match box_inside_wedge(&sb, wedge, a) {
            Ok(()) => return Ok(f),
            Err(LocalityError::SupportViolation { slack }) => worst = worst.max(slack),
            Err(e) => return Err(e),
        }
        d *= 2.0;
    }
    Err(LocalityError::SupportViolation { slack: worst })
}

/// Runs the wedge-locality experiment: bumps placed in `W(θ)+a` and
/// `−W(θ)+a`, the commutator of `φ^θ(f₁)` with `φ^{−θ}(f₂)` evaluated
/// against the vacuum and the degree-2 spectator, with the same-`θ`
/// commutator as contrast control.
pub fn wedge_locality_experiment(
    config: &LocalityConfig,
) -> Result<LocalityReport, LocalityError> {
    let (theta, params) = config.theta.resolve()?;
    let wedge = wedge_of_theta(&theta, &params)?;
    let a = FourVector(config.translation);
    let f1 = place_bump(
        &wedge,
        &a,
        &config.halfwidth,
        &config.wavevector1,
        config.depth,
        config.auto_deepen,
    )?;
    let f2 = place_bump(
        &wedge.opposite(),
        &a,
        &config.halfwidth,
        &config.wavevector2,
        config.depth,
        config.auto_deepen,
    )?;
    // re-verify both boxes explicitly; placement must not silently drift
    box_inside_wedge(&f1.eps_support(1e-6, Space::Position)?, &wedge, &a)?;
    box_inside_wedge(
        &f2.eps_support(1e-6, Space::Position)?,
        &wedge.opposite(),
        &a,
    )?;
    let cutoff = shell_cutoff(&[&f1, &f2], config.mass)?;
    let mu = MassShellMeasure::fixed_grid(config.mass, cutoff, config.nodes_per_axis)
        .adaptive_with_quality(config.quality);
    let vacuum = TensorPoly::unit();
    let pair = TensorPoly::from_tensor(TwistedTensor::plain(vec![
        config.spectator_pair[0].build(),
        config.spectator_pair[1].build(),
    ]));
    let neg = -theta;
    let mut magnitude: f64 = 0.0;
    let mut control: f64 = 0.0;
    let mut estimate: f64 = 0.0;
    for spectator in [&vacuum, &pair] {
        let (wedge_val, wedge_est) =
            spectator_matrix_element(spectator, &f1, &f2, &theta, &neg, &vacuum, &mu)?;
        let (ctrl_val, ctrl_est) =
            spectator_matrix_element(spectator, &f1, &f2, &theta, &theta, &vacuum, &mu)?;
        magnitude = magnitude.max(wedge_val.norm());
        control = control.max(ctrl_val.norm());
        estimate = estimate.max(wedge_est).max(ctrl_est);
    }
    let verdict = if magnitude <= PASS_FACTOR * estimate && control >= CONTROL_FACTOR * estimate {
        Verdict::Pass
    } else if magnitude > PASS_FACTOR * estimate && control >= CONTROL_FACTOR * estimate {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(LocalityReport {
        magnitude,
        quadrature_estimate: estimate,
        control_magnitude: control,
        verdict,
        config: config.clone(),
    })
}

/// Momentum cutoff covering the ε-supports of all participating functions
/// plus the mass scale.
fn shell_cutoff(fs: &[&TestFunction], mass: f64) -> Result<f64, LocalityError> {
    let mut p = mass;
    for f in fs {
        let sb = f.eps_support(crate::freefield::PAIR_BOX_EPS, Space::Momentum)?;
        for axis in 1..4 {
            p = p.max(sb.hi[axis].abs()).max(sb.lo[axis].abs());
        }
    }
    Ok(p + mass)
}

/// Report of a support-property scan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportReport {
    /// Largest `|value| / peak` seen outside the predicted region.
    pub max_ratio: f64,
    pub peak: f64,
    pub points_checked: usize,
    pub pass: bool,
    /// The predicted box for the first argument.
    pub predicted_lo: [f64; 4],
    pub predicted_hi: [f64; 4],
}

const SUPPORT_PASS_RATIO: f64 = 1e-5;

/// Bounding box of `½θ·U` for an axis-aligned momentum box `U`: the image
/// of a box under a linear map is spanned by its corner images.
fn half_theta_box(theta: &NoncommMatrix, u: &SupportBox) -> SupportBox {
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for mask in 0..16u32 {
        let mut p = [0.0; 4];
        for (i, v) in p.iter_mut().enumerate() {
            *v = if mask & (1 << i) != 0 { u.hi[i] } else { u.lo[i] };
        }
        let img = theta.apply(&FourVector(p)) * 0.5;
        for i in 0..4 {
            lo[i] = lo[i].min(img[i]);
            hi[i] = hi[i].max(img[i]);
        }
    }
    SupportBox {
        lo,
        hi,
        flag: u.flag,
    }
}

/// Scans `|(f ⊗_θ g)(x, y₀)|` on probe points outside the predicted region
/// `supp f + ½θ·Ũ_g` (inflated by the ε-box margin) and reports the largest
/// ratio to the peak value.
pub fn support_check_experiment(
    f: &TestFunction,
    g: &TestFunction,
    theta: &NoncommMatrix,
    eps: f64,
    quad: &QuadSpec,
) -> Result<SupportReport, LocalityError> {
    let TestFunction::Bump(bump) = f else {
        return Err(LocalityError::NotABump);
    };
    let fbox = f.eps_support(eps, Space::Position)?;
    let shift = half_theta_box(theta, &g.eps_support(eps, Space::Momentum)?);
    // Minkowski sum of the boxes, inflated by the shift-box margin itself.
    let mut lo = [0.0; 4];
    let mut hi = [0.0; 4];
    for i in 0..4 {
        let margin = 0.5 * (shift.hi[i] - shift.lo[i]).abs() + 0.25;
        lo[i] = fbox.lo[i] + shift.lo[i] - margin;
        hi[i] = fbox.hi[i] + shift.hi[i] + margin;
    }
    let tensor = TwistedTensor::from_function(f.clone())
        .moyal_product(&TwistedTensor::from_function(g.clone()), theta);
    let y0 = match g {
        TestFunction::Gaussian(gp) => *gp.center(),
        TestFunction::Bump(bp) => *bp.center(),
        TestFunction::Sum(_) => FourVector::zero(),
    };
    let (peak_val, _) = tensor.position_evaluate(&[*bump.center(), y0], quad)?;
    let peak = peak_val.norm();
    let center = FourVector(std::array::from_fn(|i| 0.5 * (lo[i] + hi[i])));
    let mut max_ratio: f64 = 0.0;
    let mut points = 0usize;
    for axis in 0..4 {
        for side in [-1.0, 1.0] {
            for step in 1..=3 {
                let mut x = center;
                let face = if side > 0.0 { hi[axis] } else { lo[axis] };
                x[axis] = face + side * 0.4 * step as f64;
                let (v, _) = tensor.position_evaluate(&[x, y0], quad)?;
                max_ratio = max_ratio.max(v.norm() / peak.max(f64::MIN_POSITIVE));
                points += 1;
            }
        }
    }
    Ok(SupportReport {
        max_ratio,
        peak,
        points_checked: points,
        pass: max_ratio < SUPPORT_PASS_RATIO,
        predicted_lo: lo,
        predicted_hi: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrbitParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn on_shell(rng: &mut ChaCha8Rng, mass: f64) -> FourVector {
        let q = [
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        ];
        let om = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + mass * mass).sqrt();
        FourVector::new(om, q[0], q[1], q[2])
    }

    #[test]
    fn commutator_kernel_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let theta = NoncommMatrix::reference(&OrbitParams::new(0.5, 0.3));
        for _ in 0..100 {
            let p1 = on_shell(&mut rng, 1.0);
            let p2 = on_shell(&mut rng, 1.0);
            let x = FourVector::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let y = FourVector::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let k = two_particle_commutator_kernel(&theta, &theta, &x, &y, &p1, &p2, 1.0).unwrap();
            let closed = Complex64::new(0.0, -2.0)
                * (Complex64::new(0.0, p1.dot(&x) + p2.dot(&y)).exp()
                    - Complex64::new(0.0, p2.dot(&x) + p1.dot(&y)).exp())
                * (0.5 * theta.bilinear(&p1, &p2)).sin();
            assert!((k - closed).norm() < 1e-12, "kernel {k} closed {closed}");
        }
        // θ = 0 and coinciding momenta both kill the kernel
        let p = on_shell(&mut rng, 1.0);
        let x = FourVector::new(0.3, 1.0, 0.0, 0.0);
        let y = FourVector::zero();
        let zero = NoncommMatrix::zero();
        let k0 = two_particle_commutator_kernel(&zero, &zero, &x, &y, &p, &p, 1.0).unwrap();
        assert!(k0.norm() < 1e-15);
        let p2 = on_shell(&mut rng, 1.0);
        let keq =
            two_particle_commutator_kernel(&theta, &theta, &x, &y, &p, &p, 1.0).unwrap();
        assert!(keq.norm() < 1e-15);
        assert!(
            two_particle_commutator_kernel(&theta, &theta, &x, &y, &p, &p2, 1.0)
                .unwrap()
                .norm()
                > 0.0
        );
        // off-shell momenta are rejected
        let bad = FourVector::new(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(
            two_particle_commutator_kernel(&theta, &theta, &x, &y, &bad, &p, 1.0),
            Err(LocalityError::OffShell { .. })
        ));
    }

    #[test]
    fn support_violation_is_detected() {
        let config = LocalityConfig {
            depth: 0.2, // box cannot fit this close to the edge
            halfwidth: [2.0; 4],
            ..LocalityConfig::default()
        };
        let r = wedge_locality_experiment(&config);
        assert!(matches!(r, Err(LocalityError::SupportViolation { .. })));
    }

    #[test]
    fn degree2_spectator_matrix_element_vanishes_undeformed_spacelike() {
        // both θ = 0: ordinary locality with spacelike bumps
        let f1 = TestFunction::bump(
            Complex64::new(1.0, 0.0),
            FourVector::new(0.0, 2.0, 0.0, 0.0),
            [0.5; 4],
            FourVector::zero(),
        );
        let f2 = TestFunction::bump(
            Complex64::new(1.0, 0.0),
            FourVector::new(0.0, -2.0, 0.0, 0.0),
            [0.5; 4],
            FourVector::zero(),
        );
        let mu = MassShellMeasure::fixed_grid(1.0, 40.0, 6).adaptive_with_quality(0.62);
        let zero = NoncommMatrix::zero();
        let (v, est) = spectator_matrix_element(
            &TensorPoly::unit(),
            &f1,
            &f2,
            &zero,
            &zero,
            &TensorPoly::unit(),
            &mu,
        )
        .unwrap();
        assert!(v.norm() <= 10.0 * est, "value {} est {est}", v.norm());
    }
}
