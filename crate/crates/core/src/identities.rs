//! Seeded verification suites aggregating the exact kernel identities and
//! geometric properties, shared by the command-line driver and the
//! acceptance tests. Every suite is deterministic for a fixed seed.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::freefield::{
    fock_oracle, vacuum_functional, vacuum_functional_at_scale, FockLattice, FreeFieldError,
    MassShellMeasure,
};
use crate::geometry::{lambda_theta, GeometryError, NoncommMatrix, OrbitParams, Wedge};
use crate::minkowski::{FourVector, LorentzTransform};
use crate::moyal::{MoyalError, TensorPoly, TwistFunction, TwistedTensor};
use crate::testfn::TestFunction;

/// Uniform four-vector with components in `[-s, s]`.
pub fn random_four_vector(rng: &mut ChaCha8Rng, s: f64) -> FourVector {
    FourVector::new(
        rng.gen_range(-s..s),
        rng.gen_range(-s..s),
        rng.gen_range(-s..s),
        rng.gen_range(-s..s),
    )
}

/// Random Gaussian packet with unit-scale widths and mild phases.
pub fn random_gaussian(rng: &mut ChaCha8Rng) -> TestFunction {
    TestFunction::gaussian(
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        random_four_vector(rng, 0.8),
        [
            rng.gen_range(0.7..1.5),
            rng.gen_range(0.7..1.5),
            rng.gen_range(0.7..1.5),
            rng.gen_range(0.7..1.5),
        ],
        random_four_vector(rng, 0.6),
    )
}

/// Random antisymmetric matrix with entries in `[-s, s]`.
pub fn random_theta(rng: &mut ChaCha8Rng, s: f64) -> NoncommMatrix {
    NoncommMatrix::from_upper([
        rng.gen_range(-s..s),
        rng.gen_range(-s..s),
        rng.gen_range(-s..s),
        rng.gen_range(-s..s),
        rng.gen_range(-s..s),
        rng.gen_range(-s..s),
    ])
}

/// Product of up to `factors` random boosts and rotations with parameters
/// in `[-scale, scale]`.
pub fn random_lorentz(rng: &mut ChaCha8Rng, factors: usize, scale: f64) -> LorentzTransform {
    let mut l = LorentzTransform::identity();
    for _ in 0..factors {
        let p: f64 = rng.gen_range(-scale..scale);
        l = if rng.gen_bool(0.5) {
            l.compose(&LorentzTransform::boost(p, rng.gen_range(1..4)).expect("valid axis"))
        } else {
            let a = rng.gen_range(1..4);
            let b = 1 + (a % 3);
            l.compose(&LorentzTransform::rotation(p, (a, b)).expect("valid plane"))
        };
    }
    l
}

/// Maximum residuals of the exact kernel identities over seeded samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentitySuiteReport {
    pub seed: u64,
    pub samples: usize,
    pub function_pairs: usize,
    pub associativity: f64,
    pub exchange_rule: f64,
    pub covariance: f64,
    pub star_involution: f64,
    pub j_involution: f64,
    pub u_theta_laws: f64,
    pub rho_consistency: f64,
    pub continuity_bound_margin: f64,
    pub continuity_violations: usize,
    pub max_residual: f64,
}

/// Runs the kernel identity suite: associativity, the exchange rule, the
/// covariance law, both involutions, the `u_θ` laws, ρ-consistency and the
/// Lipschitz continuity bound.
pub fn identity_suite(
    seed: u64,
    samples: usize,
    function_pairs: usize,
) -> Result<IdentitySuiteReport, MoyalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = IdentitySuiteReport {
        seed,
        samples,
        function_pairs,
        associativity: 0.0,
        exchange_rule: 0.0,
        covariance: 0.0,
        star_involution: 0.0,
        j_involution: 0.0,
        u_theta_laws: 0.0,
        rho_consistency: 0.0,
        continuity_bound_margin: f64::NEG_INFINITY,
        continuity_violations: 0,
        max_residual: 0.0,
    };
    let per_pair = samples.div_ceil(function_pairs);
    for _ in 0..function_pairs {
        let f = random_gaussian(&mut rng);
        let g = random_gaussian(&mut rng);
        let h = random_gaussian(&mut rng);
        let theta = random_theta(&mut rng, 1.0);
        let tf = TwistedTensor::from_function(f.clone());
        let tg = TwistedTensor::from_function(g.clone());
        let th = TwistedTensor::from_function(h.clone());

        // associativity: structural equality of the two bracketings
        let assoc_left = tf.moyal_product(&tg, &theta).moyal_product(&th, &theta);
        let assoc_right = tf.moyal_product(&tg.moyal_product(&th, &theta), &theta);

        // exchange rule tensors
        let exch_left = tf.moyal_product(&tg.moyal_product(&th, &-theta), &theta);
        let exch_right = tg.moyal_product(&tf.moyal_product(&th, &theta), &-theta);

        // covariance data
        let prod = tf.moyal_product(&tg, &theta);
        let l = random_lorentz(&mut rng, 3, 1.2);
        let y = random_four_vector(&mut rng, 1.0);
        let moved = prod.poincare_act(&y, &l)?;
        let linv = l.inverse();

        // involutions
        let starred = prod.star();
        let star_expect = TwistedTensor::from_function(g.star())
            .moyal_product(&TwistedTensor::from_function(f.star()), &theta);
        let reflected = prod.reflect_j();
        let reflect_expect = TwistedTensor::from_function(f.reflect_j())
            .moyal_product(&TwistedTensor::from_function(g.reflect_j()), &-theta);

        // u_theta laws
        let plain = TwistedTensor::plain(vec![f.clone(), g.clone()]);
        let round_trip = plain.u_theta(&theta)?.u_theta(&-theta)?;
        let twisted = plain.u_theta(&theta)?;

        // rho consistency
        let rho_std = tf.rho_product(&tg, &theta, TwistFunction::StandardPhase);

        for _ in 0..per_pair {
            let p1 = random_four_vector(&mut rng, 3.0);
            let p2 = random_four_vector(&mut rng, 3.0);
            let p3 = random_four_vector(&mut rng, 3.0);
            let triple = [p1, p2, p3];
            let pair = [p1, p2];

            let ka = assoc_left.momentum_kernel(&triple)?;
            let kb = assoc_right.momentum_kernel(&triple)?;
            report.associativity = report.associativity.max((ka - kb).norm());

            let ke1 = exch_left.momentum_kernel(&[p2, p1, p3])?;
            let ke2 = exch_right.momentum_kernel(&[p1, p2, p3])?;
            report.exchange_rule = report.exchange_rule.max((ke1 - ke2).norm());

            let kc1 = moved.momentum_kernel(&pair)?;
            let kc2 = Complex64::new(0.0, -y.dot(&(p1 + p2))).exp()
                * prod.momentum_kernel(&[linv.apply(&p1), linv.apply(&p2)])?;
            report.covariance = report.covariance.max((kc1 - kc2).norm());

            let ks1 = starred.momentum_kernel(&pair)?;
            let ks2 = star_expect.momentum_kernel(&pair)?;
            let ks3 = prod.momentum_kernel(&[-p2, -p1])?.conj();
            report.star_involution = report
                .star_involution
                .max((ks1 - ks2).norm())
                .max((ks1 - ks3).norm());

            let kj1 = reflected.momentum_kernel(&pair)?;
            let kj2 = reflect_expect.momentum_kernel(&pair)?;
            let kj3 = prod.momentum_kernel(&pair)?.conj();
            report.j_involution = report
                .j_involution
                .max((kj1 - kj2).norm())
                .max((kj1 - kj3).norm());

            let ku1 = round_trip.momentum_kernel(&pair)?;
            let ku2 = plain.momentum_kernel(&pair)?;
            let ku3 = twisted.momentum_kernel(&pair)?;
            let ku4 = prod.momentum_kernel(&pair)?;
            report.u_theta_laws = report
                .u_theta_laws
                .max((ku1 - ku2).norm())
                .max((ku3 - ku4).norm());

            let kr1 = rho_std.momentum_kernel(&pair)?;
            report.rho_consistency = report.rho_consistency.max((kr1 - ku4).norm());

            // continuity bound
            let theta2 = random_theta(&mut rng, 1.0);
            let prod2 = tf.moyal_product(&tg, &theta2);
            let d = prod2.momentum_kernel(&pair)? - ku4;
            let delta = theta + -theta2;
            let ft = (f.fourier(&p1)? * g.fourier(&p2)?).norm();
            let bound =
                0.5 * p1.euclid_norm() * p2.euclid_norm() * delta.operator_norm() * ft;
            let margin = d.norm() - bound;
            report.continuity_bound_margin = report.continuity_bound_margin.max(margin);
            if margin > 1e-15 {
                report.continuity_violations += 1;
            }
        }
        // structural associativity on top of the kernel comparison
        assert!(assoc_left.same_pair_data(&assoc_right, 0.0));
    }
    report.max_residual = report
        .associativity
        .max(report.exchange_rule)
        .max(report.covariance)
        .max(report.star_involution)
        .max(report.j_involution)
        .max(report.u_theta_laws)
        .max(report.rho_consistency);
    Ok(report)
}

/// Orbit geometry suite: invariants, the section residual, and the wedge
/// facts W1–W4 on seeded samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitReport {
    pub seed: u64,
    pub kappa_e: f64,
    pub kappa_m: f64,
    pub invariants: (f64, f64),
    pub samples: usize,
    pub max_invariant_residual: f64,
    pub max_section_residual: f64,
    /// Minimum slack of `θ₁ V₊ ⊂ −closure(W(θ₁))` over the samples; the
    /// property holds when this is at worst a rounding-level negative.
    pub w4_min_slack: f64,
    pub w1_incomparable_pairs: usize,
    pub w2_opposite_ok: bool,
    pub w3_reflection_ok: bool,
}

pub fn orbit_suite(
    seed: u64,
    params: &OrbitParams,
    samples: usize,
) -> Result<OrbitReport, GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta1 = NoncommMatrix::reference(params);
    let target = params.invariants();
    let mut max_inv: f64 = 0.0;
    let mut max_sec: f64 = 0.0;
    for _ in 0..samples {
        let l = random_lorentz(&mut rng, 3, 2.0);
        let theta = theta1.conjugate(&l);
        let (i1, i2) = theta.invariants();
        max_inv = max_inv.max((i1 - target.0).abs()).max((i2 - target.1).abs());
        if !params.is_degenerate() {
            let section = lambda_theta(&theta, params)?;
            max_sec = max_sec.max(theta1.conjugate(&section).max_entry_diff(&theta));
        }
    }
    // W4 sampling on the reference matrix
    let mut w4_min_slack = f64::INFINITY;
    let w = if params.kappa_e >= 0.0 {
        Wedge::standard()
    } else {
        Wedge::standard().opposite()
    };
    let (l1, l2) = w.opposite().null_vectors();
    for _ in 0..10_000 {
        let spatial: [f64; 3] = [
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
        ];
        let r = (spatial.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let p = FourVector::new(rng.gen_range(r..(r + 10.0)), spatial[0], spatial[1], spatial[2]);
        let y = theta1.apply(&p);
        // closure membership: both products non-positive
        w4_min_slack = w4_min_slack.min(-y.dot(&l1)).min(-y.dot(&l2));
    }
    // W1: distinct wedges are incomparable
    let mut incomparable = 0usize;
    for _ in 0..5 {
        let wa = Wedge::standard().transform(&random_lorentz(&mut rng, 3, 1.2));
        let wb = Wedge::standard().transform(&random_lorentz(&mut rng, 3, 1.2));
        if wa.approx_eq(&wb, 1e-6) {
            continue;
        }
        let (mut a_not_b, mut b_not_a) = (false, false);
        for k in 0..20_000 {
            let deep = 1.0 + (k % 50) as f64;
            let x = random_four_vector(&mut rng, deep);
            if wa.contains(&x) && !wb.contains(&x) {
                a_not_b = true;
            }
            if wb.contains(&x) && !wa.contains(&x) {
                b_not_a = true;
            }
            if a_not_b && b_not_a {
                incomparable += 1;
                break;
            }
        }
    }
    let w2_ok = Wedge::standard().opposite().opposite().approx_eq(&Wedge::standard(), 0.0);
    // W3: θ ↦ −θ reflects the wedge
    let w3_ok = if params.is_degenerate() {
        true
    } else {
        let w_pos = crate::geometry::wedge_of_theta(&theta1, params)?;
        let w_neg = crate::geometry::wedge_of_theta(&-theta1, params)?;
        w_neg.approx_eq(&w_pos.opposite(), 1e-7)
    };
    Ok(OrbitReport {
        seed,
        kappa_e: params.kappa_e,
        kappa_m: params.kappa_m,
        invariants: target,
        samples,
        max_invariant_residual: max_inv,
        max_section_residual: max_sec,
        w4_min_slack,
        w1_incomparable_pairs: incomparable,
        w2_opposite_ok: w2_ok,
        w3_reflection_ok: w3_ok,
    })
}

/// One row of the commutative-limit sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitRow {
    pub scale: f64,
    pub value: [f64; 2],
    pub delta: f64,
    pub estimate: f64,
}

/// The reference Gaussian four-point configuration of the commutative-limit
/// experiment: distinct centers keep the first-order response nonzero.
pub fn limit_reference_poly() -> TensorPoly {
    let centers = [
        FourVector::new(0.0, 0.6, 0.0, 0.0),
        FourVector::new(0.4, 0.0, 0.5, 0.0),
        FourVector::new(0.0, -0.3, 0.0, 0.7),
        FourVector::new(0.2, 0.1, -0.4, 0.0),
    ];
    TensorPoly::from_tensor(TwistedTensor::plain(
        centers
            .iter()
            .map(|c| {
                TestFunction::gaussian(
                    Complex64::new(1.0, 0.0),
                    *c,
                    [1.0; 4],
                    FourVector::zero(),
                )
            })
            .collect(),
    ))
}

/// `|ω₄^{sθ} − ω₄⁰|` for each scale `s` on the reference configuration.
/// The estimate is of the delta itself: the undeformed value is subtracted
/// per node scale before the doubling comparison, so the shared quadrature
/// error cancels.
pub fn limit_sweep(
    theta: &NoncommMatrix,
    scales: &[f64],
    mu: &MassShellMeasure,
) -> Result<Vec<LimitRow>, FreeFieldError> {
    let poly = limit_reference_poly();
    let (base_full, base_tail) = vacuum_functional_at_scale(&poly, mu, 1.0)?;
    let (base_half, _) = vacuum_functional_at_scale(&poly, mu, 0.5)?;
    let mut rows = Vec::with_capacity(scales.len());
    for &s in scales {
        let twisted = poly.u_theta(&(*theta * s))?;
        let (v_full, tail) = vacuum_functional_at_scale(&twisted, mu, 1.0)?;
        let (v_half, _) = vacuum_functional_at_scale(&twisted, mu, 0.5)?;
        let delta_full = v_full - base_full;
        let delta_half = v_half - base_half;
        rows.push(LimitRow {
            scale: s,
            value: [v_full.re, v_full.im],
            delta: delta_full.norm(),
            estimate: (delta_full - delta_half).norm() + tail + base_tail,
        });
    }
    Ok(rows)
}

/// One Wick-versus-Fock comparison case.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleRow {
    pub case: usize,
    pub wick: [f64; 2],
    pub fock: [f64; 2],
    pub relative_difference: f64,
}

/// Seeded degree-4 comparisons of the twisted Wick sum against the
/// truncated-Fock oracle on a shared lattice.
pub fn oracle_comparison(
    seed: u64,
    configs: usize,
    mu: &MassShellMeasure,
    lattice: &FockLattice,
) -> Result<Vec<OracleRow>, FreeFieldError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(configs);
    for case in 0..configs {
        let theta = random_theta(&mut rng, 0.8);
        let fs: Vec<TestFunction> = (0..4).map(|_| random_gaussian(&mut rng)).collect();
        let plain = TensorPoly::from_tensor(TwistedTensor::plain(fs));
        let wick = vacuum_functional(&plain.u_theta(&theta)?, mu)?.0;
        let fock = fock_oracle(&plain, &theta, lattice)?;
        rows.push(OracleRow {
            case,
            wick: [wick.re, wick.im],
            fock: [fock.re, fock.im],
            relative_difference: (wick - fock).norm() / fock.norm().max(f64::MIN_POSITIVE),
        });
    }
    Ok(rows)
}
