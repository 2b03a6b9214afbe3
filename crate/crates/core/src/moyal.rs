//! The twisted tensor algebra: Moyal tensor products, generalized
//! `ρ`-twisted products, exact momentum kernels, involutions, the Poincaré
//! action and position-space evaluation.
//!
//! The central representation is a simple tensor `f₁⊗…⊗fₙ` decorated with a
//! per-pair antisymmetric twist matrix `Θ_{lr}` and twist function `ρ̃_{lr}`;
//! its momentum kernel is
//!
//! ```text
//! K(p₁,…,pₙ) = c · ∏_j f̃_j(p_j) · ∏_{l<r} ρ̃_{lr}(p_l Θ_{lr} p_r)
//! ```
//!
//! Every algebraic law of the product is a structural identity of this
//! data, so associativity, the exchange rule and the involution laws hold
//! exactly rather than up to quadrature.

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::NoncommMatrix;
use crate::minkowski::{FourVector, LorentzTransform};
use crate::quad::{gauss_legendre_on, pairwise_sum};
use crate::testfn::{Space, TestFnError, TestFunction};

#[derive(Debug, Error)]
pub enum MoyalError {
    #[error("momentum tuple of length {got} for a tensor of degree {expected}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("degree {got} exceeds the supported maximum {max} for this operation")]
    DegreeTooLarge { max: usize, got: usize },
    #[error("operation requires the standard phase twist on every pair")]
    UnsupportedTwistFunction,
    #[error(transparent)]
    TestFn(#[from] TestFnError),
}

/// Twist profile `ρ̃` applied to the pair variable `λ = p_l Θ p_r`.
///
/// `StandardPhase` is `ρ̃(λ) = e^{−iλ/2}`, which absorbs the conventional ½
/// so that the ρ-product with this profile is literally the Moyal tensor
/// product. `DampedPhase` multiplies on a Gaussian damping `e^{−σλ²}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TwistFunction {
    StandardPhase,
    DampedPhase { sigma: f64 },
}

impl TwistFunction {
    pub fn eval(&self, lambda: f64) -> Complex64 {
        match self {
            TwistFunction::StandardPhase => Complex64::new(0.0, -0.5 * lambda).exp(),
            TwistFunction::DampedPhase { sigma } => {
                Complex64::new(-sigma * lambda * lambda, -0.5 * lambda).exp()
            }
        }
    }

    pub fn is_standard(&self) -> bool {
        matches!(self, TwistFunction::StandardPhase)
    }
}

fn pair_index(n: usize, l: usize, r: usize) -> usize {
    debug_assert!(l < r && r < n);
    l * (2 * n - l - 1) / 2 + (r - l - 1)
}

/// A simple tensor with per-pair twist data; the closure of all Moyal
/// products of test functions.
#[derive(Clone, Debug)]
pub struct TwistedTensor {
    factors: Vec<TestFunction>,
    pair_twist: Vec<NoncommMatrix>,
    pair_rho: Vec<TwistFunction>,
    coefficient: Complex64,
}

impl TwistedTensor {
    /// Degree-0 scalar.
    pub fn scalar(c: Complex64) -> Self {
        TwistedTensor {
            factors: Vec::new(),
            pair_twist: Vec::new(),
            pair_rho: Vec::new(),
            coefficient: c,
        }
    }

    pub fn unit() -> Self {
        Self::scalar(Complex64::new(1.0, 0.0))
    }

    /// Degree-1 tensor of a single test function.
    pub fn from_function(f: TestFunction) -> Self {
        TwistedTensor {
            factors: vec![f],
            pair_twist: Vec::new(),
            pair_rho: Vec::new(),
            coefficient: Complex64::new(1.0, 0.0),
        }
    }

    /// Plain tensor `f₁⊗…⊗fₙ` (all twists zero).
    pub fn plain(factors: Vec<TestFunction>) -> Self {
        let n = factors.len();
        TwistedTensor {
            factors,
            pair_twist: vec![NoncommMatrix::zero(); n * n.saturating_sub(1) / 2],
            pair_rho: vec![TwistFunction::StandardPhase; n * n.saturating_sub(1) / 2],
            coefficient: Complex64::new(1.0, 0.0),
        }
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn coefficient(&self) -> Complex64 {
        self.coefficient
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.coefficient *= c;
        out
    }

    pub fn factors(&self) -> &[TestFunction] {
        &self.factors
    }

    pub fn pair_twist(&self, l: usize, r: usize) -> &NoncommMatrix {
        &self.pair_twist[pair_index(self.degree(), l, r)]
    }

    pub fn pair_rho(&self, l: usize, r: usize) -> &TwistFunction {
        &self.pair_rho[pair_index(self.degree(), l, r)]
    }

    /// True when every pair carries the standard phase.
    pub fn all_standard_phase(&self) -> bool {
        self.pair_rho.iter().all(|r| r.is_standard())
    }

    /// True when all pair twists vanish and the phases are standard.
    pub fn is_plain(&self) -> bool {
        self.pair_twist.iter().all(|t| t.is_zero()) && self.all_standard_phase()
    }

    /// The generalized product: factors concatenate, existing pair data is
    /// kept and every new `(left, right)` pair acquires `(θ, ρ)`.
    pub fn rho_product(
        &self,
        other: &TwistedTensor,
        theta: &NoncommMatrix,
        rho: TwistFunction,
    ) -> TwistedTensor {
        let n = self.degree();
        let m = other.degree();
        let total = n + m;
        let mut factors = Vec::with_capacity(total);
        factors.extend_from_slice(&self.factors);
        factors.extend_from_slice(&other.factors);
        let pairs = total * (total - 1) / 2;
        let mut pair_twist = vec![NoncommMatrix::zero(); pairs];
        let mut pair_rho = vec![TwistFunction::StandardPhase; pairs];
        for l in 0..total {
            for r in (l + 1)..total {
                let idx = pair_index(total, l, r);
                if r < n {
                    pair_twist[idx] = self.pair_twist[pair_index(n, l, r)];
                    pair_rho[idx] = self.pair_rho[pair_index(n, l, r)];
                } else if l >= n {
                    pair_twist[idx] = other.pair_twist[pair_index(m, l - n, r - n)];
                    pair_rho[idx] = other.pair_rho[pair_index(m, l - n, r - n)];
                } else {
                    pair_twist[idx] = *theta;
                    pair_rho[idx] = rho;
                }
            }
        }
        TwistedTensor {
            factors,
            pair_twist,
            pair_rho,
            coefficient: self.coefficient * other.coefficient,
        }
    }

    /// The Moyal tensor product `⊗_θ`.
    pub fn moyal_product(&self, other: &TwistedTensor, theta: &NoncommMatrix) -> TwistedTensor {
        self.rho_product(other, theta, TwistFunction::StandardPhase)
    }

    /// Exact momentum kernel
    /// `c · ∏ f̃_j(p_j) · ∏_{l<r} ρ̃_{lr}(p_l Θ_{lr} p_r)`.
    pub fn momentum_kernel(&self, momenta: &[FourVector]) -> Result<Complex64, MoyalError> {
        let n = self.degree();
        if momenta.len() != n {
            return Err(MoyalError::DegreeMismatch {
                expected: n,
                got: momenta.len(),
            });
        }
        let mut acc = self.coefficient;
        for (f, p) in self.factors.iter().zip(momenta) {
            acc *= f.fourier(p)?;
        }
        for l in 0..n {
            for r in (l + 1)..n {
                let idx = pair_index(n, l, r);
                let lambda = self.pair_twist[idx].bilinear(&momenta[l], &momenta[r]);
                acc *= self.pair_rho[idx].eval(lambda);
            }
        }
        Ok(acc)
    }

    /// Poincaré action: each factor transforms, each twist conjugates.
    pub fn poincare_act(
        &self,
        y: &FourVector,
        a: &LorentzTransform,
    ) -> Result<TwistedTensor, MoyalError> {
        let factors = self
            .factors
            .iter()
            .map(|f| f.poincare(y, a))
            .collect::<Result<Vec<_>, _>>()?;
        let pair_twist = self.pair_twist.iter().map(|t| t.conjugate(a)).collect();
        Ok(TwistedTensor {
            factors,
            pair_twist,
            pair_rho: self.pair_rho.clone(),
            coefficient: self.coefficient,
        })
    }

    /// The `*`-involution: reversed conjugated factors, pair data mapped by
    /// order reversal (which keeps the twist sign correct), conjugated
    /// coefficient.
    pub fn star(&self) -> TwistedTensor {
        let n = self.degree();
        let factors: Vec<_> = self.factors.iter().rev().map(|f| f.star()).collect();
        let pairs = n * n.saturating_sub(1) / 2;
        let mut pair_twist = vec![NoncommMatrix::zero(); pairs];
        let mut pair_rho = vec![TwistFunction::StandardPhase; pairs];
        for l in 0..n {
            for r in (l + 1)..n {
                let src = pair_index(n, n - 1 - r, n - 1 - l);
                pair_twist[pair_index(n, l, r)] = self.pair_twist[src];
                pair_rho[pair_index(n, l, r)] = self.pair_rho[src];
            }
        }
        TwistedTensor {
            factors,
            pair_twist,
            pair_rho,
            coefficient: self.coefficient.conj(),
        }
    }

    /// The TCP involution: factors reflected in place, every twist negated,
    /// conjugated coefficient.
    pub fn reflect_j(&self) -> TwistedTensor {
        TwistedTensor {
            factors: self.factors.iter().map(|f| f.reflect_j()).collect(),
            pair_twist: self.pair_twist.iter().map(|t| -*t).collect(),
            pair_rho: self.pair_rho.clone(),
            coefficient: self.coefficient.conj(),
        }
    }

    /// The multiplier `u_θ`: adds `θ` to every pair twist. Only defined for
    /// standard phases, where `ρ̃(p(Θ+θ)q) = ρ̃(pΘq)·ρ̃(pθq)`.
    pub fn u_theta(&self, theta: &NoncommMatrix) -> Result<TwistedTensor, MoyalError> {
        if !self.all_standard_phase() {
            return Err(MoyalError::UnsupportedTwistFunction);
        }
        Ok(TwistedTensor {
            factors: self.factors.clone(),
            pair_twist: self.pair_twist.iter().map(|t| *t + *theta).collect(),
            pair_rho: self.pair_rho.clone(),
            coefficient: self.coefficient,
        })
    }

    /// Structural equality of the twist data against another tensor.
    pub fn same_pair_data(&self, other: &TwistedTensor, tol: f64) -> bool {
        self.degree() == other.degree()
            && self
                .pair_twist
                .iter()
                .zip(&other.pair_twist)
                .all(|(a, b)| a.max_entry_diff(b) <= tol)
            && self
                .pair_rho
                .iter()
                .zip(&other.pair_rho)
                .all(|(a, b)| a == b)
    }
}

/// Quadrature parameters for position-space evaluation.
#[derive(Clone, Copy, Debug)]
pub struct QuadSpec {
    /// Gauss-Legendre nodes per momentum axis.
    pub nodes_per_axis: usize,
    /// Relative threshold defining the momentum cutoff box.
    pub support_eps: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            nodes_per_axis: 20,
            support_eps: 1e-6,
        }
    }
}

const POSITION_MAX_DEGREE: usize = 2;

impl TwistedTensor {
    /// Position-space value by inverse Fourier transform of the momentum
    /// kernel, with the non-pivot factor resummed in closed form:
    ///
    /// ```text
    /// (f ⊗_Θ g)(x, y) = (2π)⁻² ∫ d⁴p f̃(p) e^{ip·x} g(y + ½Θηp)
    /// ```
    ///
    /// The pivot side is integrated by tensorized Gauss-Legendre over its
    /// ε-momentum box; the reported estimate compares full and halved node
    /// counts. Degree at most 2.
    pub fn position_evaluate(
        &self,
        points: &[FourVector],
        quad: &QuadSpec,
    ) -> Result<(Complex64, f64), MoyalError> {
        let n = self.degree();
        if n > POSITION_MAX_DEGREE {
            return Err(MoyalError::DegreeTooLarge {
                max: POSITION_MAX_DEGREE,
                got: n,
            });
        }
        if points.len() != n {
            return Err(MoyalError::DegreeMismatch {
                expected: n,
                got: points.len(),
            });
        }
        if n == 0 {
            return Ok((self.coefficient, 0.0));
        }
        let full = self.position_eval_nodes(points, quad, quad.nodes_per_axis)?;
        let half = self.position_eval_nodes(points, quad, (quad.nodes_per_axis / 2).max(4))?;
        Ok((full, (full - half).norm()))
    }

    fn position_eval_nodes(
        &self,
        points: &[FourVector],
        quad: &QuadSpec,
        nodes: usize,
    ) -> Result<Complex64, MoyalError> {
        let norm = 1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
        match self.degree() {
            1 => {
                let f = &self.factors[0];
                let sb = f.eps_support(quad.support_eps, Space::Momentum)?;
                let x = points[0];
                let value = integrate4(&sb, nodes, |p| {
                    Ok(f.fourier(&p)? * Complex64::new(0.0, p.dot(&x)).exp())
                })?;
                Ok(self.coefficient * norm * value)
            }
            2 => {
                if !self.all_standard_phase() {
                    return Err(MoyalError::UnsupportedTwistFunction);
                }
                let theta = self.pair_twist[0];
                let b0 = self.factors[0].eps_support(quad.support_eps, Space::Momentum)?;
                let b1 = self.factors[1].eps_support(quad.support_eps, Space::Momentum)?;
                let vol = |b: &crate::testfn::SupportBox| {
                    (0..4).map(|i| b.hi[i] - b.lo[i]).product::<f64>()
                };
                // integrate over the tighter momentum box
                let (pivot, other, pivot_box, px, ox, sign) = if vol(&b0) <= vol(&b1) {
                    (&self.factors[0], &self.factors[1], b0, points[0], points[1], 0.5)
                } else {
                    (&self.factors[1], &self.factors[0], b1, points[1], points[0], -0.5)
                };
                let value = integrate4(&pivot_box, nodes, |p| {
                    let shift = theta.apply(&p) * sign;
                    Ok(pivot.fourier(&p)?
                        * Complex64::new(0.0, p.dot(&px)).exp()
                        * other.evaluate(&(ox + shift)))
                })?;
                Ok(self.coefficient * norm * value)
            }
            _ => unreachable!(),
        }
    }
}

fn integrate4<F>(
    sb: &crate::testfn::SupportBox,
    nodes: usize,
    mut f: F,
) -> Result<Complex64, MoyalError>
where
    F: FnMut(FourVector) -> Result<Complex64, MoyalError>,
{
    let mut rules = Vec::with_capacity(4);
    for i in 0..4 {
        rules.push(gauss_legendre_on(nodes, sb.lo[i], sb.hi[i]));
    }
    let mut values = Vec::with_capacity(nodes.pow(4));
    for (i0, &x0) in rules[0].0.iter().enumerate() {
        let w0 = rules[0].1[i0];
        for (i1, &x1) in rules[1].0.iter().enumerate() {
            let w01 = w0 * rules[1].1[i1];
            for (i2, &x2) in rules[2].0.iter().enumerate() {
                let w012 = w01 * rules[2].1[i2];
                for (i3, &x3) in rules[3].0.iter().enumerate() {
                    let w = w012 * rules[3].1[i3];
                    values.push(f(FourVector::new(x0, x1, x2, x3))? * w);
                }
            }
        }
    }
    Ok(pairwise_sum(&values))
}

/// `starDiagonal(f, g, θ, x)`: the Moyal star product value
/// `(f ⊗_θ g)(x, x)`.
pub fn star_diagonal(
    f: &TestFunction,
    g: &TestFunction,
    theta: &NoncommMatrix,
    x: &FourVector,
    quad: &QuadSpec,
) -> Result<Complex64, MoyalError> {
    let t = TwistedTensor::from_function(f.clone())
        .moyal_product(&TwistedTensor::from_function(g.clone()), theta);
    Ok(t.position_evaluate(&[*x, *x], quad)?.0)
}

/// `|K((f⊗_{θA}g)⊗_{θB}h) − K(f⊗_{θA}(g⊗_{θB}h))|` at the given momenta;
/// zero exactly when `θA = θB`, positive generically otherwise.
pub fn mixed_associativity_gap(
    f: &TestFunction,
    g: &TestFunction,
    h: &TestFunction,
    theta_a: &NoncommMatrix,
    theta_b: &NoncommMatrix,
    momenta: &[FourVector; 3],
) -> Result<f64, MoyalError> {
    let tf = TwistedTensor::from_function(f.clone());
    let tg = TwistedTensor::from_function(g.clone());
    let th = TwistedTensor::from_function(h.clone());
    let left = tf.moyal_product(&tg, theta_a).moyal_product(&th, theta_b);
    let right = tf.moyal_product(&tg.moyal_product(&th, theta_b), theta_a);
    let kl = left.momentum_kernel(momenta.as_slice())?;
    let kr = right.momentum_kernel(momenta.as_slice())?;
    Ok((kl - kr).norm())
}

/// An element of the (deformed) tensor algebra: a finite sum of twisted
/// tensors of mixed degrees.
#[derive(Clone, Debug, Default)]
pub struct TensorPoly {
    terms: Vec<TwistedTensor>,
}

impl TensorPoly {
    pub fn new(terms: Vec<TwistedTensor>) -> Self {
        TensorPoly { terms }
    }

    pub fn zero() -> Self {
        TensorPoly { terms: Vec::new() }
    }

    pub fn unit() -> Self {
        TensorPoly {
            terms: vec![TwistedTensor::unit()],
        }
    }

    pub fn from_tensor(t: TwistedTensor) -> Self {
        TensorPoly { terms: vec![t] }
    }

    pub fn from_function(f: TestFunction) -> Self {
        Self::from_tensor(TwistedTensor::from_function(f))
    }

    pub fn terms(&self) -> &[TwistedTensor] {
        &self.terms
    }

    pub fn max_degree(&self) -> usize {
        self.terms.iter().map(|t| t.degree()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &TensorPoly) -> TensorPoly {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        TensorPoly { terms }
    }

    pub fn scale(&self, c: Complex64) -> TensorPoly {
        TensorPoly {
            terms: self.terms.iter().map(|t| t.scale(c)).collect(),
        }
    }

    /// Bilinear extension of the ρ-product to sums.
    pub fn rho_product(
        &self,
        other: &TensorPoly,
        theta: &NoncommMatrix,
        rho: TwistFunction,
    ) -> TensorPoly {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(a.rho_product(b, theta, rho));
            }
        }
        TensorPoly { terms }
    }

    pub fn moyal_product(&self, other: &TensorPoly, theta: &NoncommMatrix) -> TensorPoly {
        self.rho_product(other, theta, TwistFunction::StandardPhase)
    }

    pub fn star(&self) -> TensorPoly {
        TensorPoly {
            terms: self.terms.iter().map(|t| t.star()).collect(),
        }
    }

    pub fn reflect_j(&self) -> TensorPoly {
        TensorPoly {
            terms: self.terms.iter().map(|t| t.reflect_j()).collect(),
        }
    }

    pub fn u_theta(&self, theta: &NoncommMatrix) -> Result<TensorPoly, MoyalError> {
        Ok(TensorPoly {
            terms: self
                .terms
                .iter()
                .map(|t| t.u_theta(theta))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn poincare_act(
        &self,
        y: &FourVector,
        a: &LorentzTransform,
    ) -> Result<TensorPoly, MoyalError> {
        Ok(TensorPoly {
            terms: self
                .terms
                .iter()
                .map(|t| t.poincare_act(y, a))
                .collect::<Result<_, _>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrbitParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rv(rng: &mut ChaCha8Rng, s: f64) -> FourVector {
        FourVector::new(
            rng.gen_range(-s..s),
            rng.gen_range(-s..s),
            rng.gen_range(-s..s),
            rng.gen_range(-s..s),
        )
    }

    fn random_gaussian(rng: &mut ChaCha8Rng) -> TestFunction {
        TestFunction::gaussian(
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            rv(rng, 1.0),
            [
                rng.gen_range(0.6..1.6),
                rng.gen_range(0.6..1.6),
                rng.gen_range(0.6..1.6),
                rng.gen_range(0.6..1.6),
            ],
            rv(rng, 0.8),
        )
    }

    fn theta1(ke: f64, km: f64) -> NoncommMatrix {
        NoncommMatrix::reference(&OrbitParams::new(ke, km))
    }

    #[test]
    fn zero_twist_product_kernel_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_gaussian(&mut rng);
        let g = random_gaussian(&mut rng);
        let t = TwistedTensor::from_function(f.clone())
            .moyal_product(&TwistedTensor::from_function(g.clone()), &NoncommMatrix::zero());
        let p = rv(&mut rng, 2.0);
        let q = rv(&mut rng, 2.0);
        let k = t.momentum_kernel(&[p, q]).unwrap();
        let expect = f.fourier(&p).unwrap() * g.fourier(&q).unwrap();
        assert!((k - expect).norm() < 1e-15 * expect.norm().max(1e-12));
    }

    #[test]
    fn reference_twist_phase_at_unit_momenta() {
        // pθ₁q = −1 for p = e₀, q = e₁ and κe = 1, so the twist factor is
        // e^{+i/2}.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_gaussian(&mut rng);
        let g = random_gaussian(&mut rng);
        let t = TwistedTensor::from_function(f.clone())
            .moyal_product(&TwistedTensor::from_function(g.clone()), &theta1(1.0, 0.0));
        let p = FourVector::new(1.0, 0.0, 0.0, 0.0);
        let q = FourVector::new(0.0, 1.0, 0.0, 0.0);
        let k = t.momentum_kernel(&[p, q]).unwrap();
        let expect = f.fourier(&p).unwrap()
            * g.fourier(&q).unwrap()
            * Complex64::new(0.0, 0.5).exp();
        assert!((k - expect).norm() < 1e-14 * expect.norm().max(1e-12));
    }

    #[test]
    fn associativity_is_structural() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = theta1(0.7, -0.4);
        let f = TwistedTensor::from_function(random_gaussian(&mut rng));
        let g = TwistedTensor::from_function(random_gaussian(&mut rng));
        let h = TwistedTensor::from_function(random_gaussian(&mut rng));
        let left = f.moyal_product(&g, &theta).moyal_product(&h, &theta);
        let right = f.moyal_product(&g.moyal_product(&h, &theta), &theta);
        assert!(left.same_pair_data(&right, 0.0));
    }

    #[test]
    fn degree_zero_is_the_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = TwistedTensor::from_function(random_gaussian(&mut rng));
        let two = TwistedTensor::scalar(Complex64::new(2.0, 0.0));
        let prod = two.moyal_product(&f, &theta1(1.0, 1.0));
        assert_eq!(prod.degree(), 1);
        let p = rv(&mut rng, 1.0);
        let k = prod.momentum_kernel(&[p]).unwrap();
        let expect = f.momentum_kernel(&[p]).unwrap() * 2.0;
        assert!((k - expect).norm() < 1e-15 * expect.norm().max(1e-12));
        assert_eq!(
            TwistedTensor::unit().momentum_kernel(&[]).unwrap(),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn uniform_twist_degree_three_matches_direct_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta = theta1(0.5, 0.3);
        let fs: Vec<TestFunction> = (0..3).map(|_| random_gaussian(&mut rng)).collect();
        let tensor = TwistedTensor::plain(fs.clone()).u_theta(&theta).unwrap();
        for _ in 0..50 {
            let p: Vec<FourVector> = (0..3).map(|_| rv(&mut rng, 2.0)).collect();
            let k = tensor.momentum_kernel(&p).unwrap();
            // direct expansion oracle
            let phase = -0.5
                * (theta.bilinear(&p[0], &p[1])
                    + theta.bilinear(&p[0], &p[2])
                    + theta.bilinear(&p[1], &p[2]));
            let mut expect = Complex64::new(0.0, phase).exp();
            for (f, pj) in fs.iter().zip(&p) {
                expect *= f.fourier(pj).unwrap();
            }
            assert!((k - expect).norm() < 1e-13 * expect.norm().max(1e-12));
        }
    }

    #[test]
    fn exchange_rule_kernels_agree() {
        // (f₁⊗_θ(f₂⊗_{−θ}g))~ at (p₂,p₁,q) equals
        // (f₂⊗_{−θ}(f₁⊗_θg))~ at (p₁,p₂,q).
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let theta = theta1(0.9, 0.2);
        let f1 = TwistedTensor::from_function(random_gaussian(&mut rng));
        let f2 = TwistedTensor::from_function(random_gaussian(&mut rng));
        let g = TwistedTensor::from_function(random_gaussian(&mut rng));
        let lhs_t = f1.moyal_product(&f2.moyal_product(&g, &-theta), &theta);
        let rhs_t = f2.moyal_product(&f1.moyal_product(&g, &theta), &-theta);
        for _ in 0..200 {
            let p1 = rv(&mut rng, 2.0);
            let p2 = rv(&mut rng, 2.0);
            let q = rv(&mut rng, 2.0);
            let lhs = lhs_t.momentum_kernel(&[p2, p1, q]).unwrap();
            let rhs = rhs_t.momentum_kernel(&[p1, p2, q]).unwrap();
            assert!((lhs - rhs).norm() <= 1e-13 * lhs.norm().max(1e-12));
        }
    }

    #[test]
    fn covariance_kernel_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let theta = theta1(0.6, 0.8);
        let t = TwistedTensor::from_function(random_gaussian(&mut rng)).moyal_product(
            &TwistedTensor::from_function(random_gaussian(&mut rng)),
            &theta,
        );
        let l = LorentzTransform::boost(0.5, 2)
            .unwrap()
            .compose(&LorentzTransform::rotation(0.8, (1, 3)).unwrap());
        let y = rv(&mut rng, 1.0);
        let moved = t.poincare_act(&y, &l).unwrap();
        let linv = l.inverse();
        for _ in 0..50 {
            let p1 = rv(&mut rng, 2.0);
            let p2 = rv(&mut rng, 2.0);
            let total = p1 + p2;
            let lhs = moved.momentum_kernel(&[p1, p2]).unwrap();
            let rhs = Complex64::new(0.0, -y.dot(&total)).exp()
                * t.momentum_kernel(&[linv.apply(&p1), linv.apply(&p2)]).unwrap();
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1e-12));
        }
        // pure translation leaves pair twists untouched
        let shifted = t
            .poincare_act(&rv(&mut rng, 1.0), &LorentzTransform::identity())
            .unwrap();
        assert!(t.same_pair_data(&shifted, 0.0));
    }

    #[test]
    fn star_involution_matches_lemma() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let theta = theta1(1.1, -0.6);
        let f = random_gaussian(&mut rng);
        let g = random_gaussian(&mut rng);
        let prod = TwistedTensor::from_function(f.clone())
            .moyal_product(&TwistedTensor::from_function(g.clone()), &theta);
        let starred = prod.star();
        // (f⊗_θg)* = g*⊗_θf*
        let expect = TwistedTensor::from_function(g.star())
            .moyal_product(&TwistedTensor::from_function(f.star()), &theta);
        for _ in 0..100 {
            let p = [rv(&mut rng, 2.0), rv(&mut rng, 2.0)];
            let a = starred.momentum_kernel(&p).unwrap();
            let b = expect.momentum_kernel(&p).unwrap();
            assert!((a - b).norm() < 1e-13 * a.norm().max(1e-12));
            // defining identity (F*)~(p₁..pₙ) = conj(F~(−pₙ..−p₁))
            let c = prod.momentum_kernel(&[-p[1], -p[0]]).unwrap().conj();
            assert!((a - c).norm() < 1e-13 * a.norm().max(1e-12));
        }
        // applied twice is the identity
        let twice = starred.star();
        let p = [rv(&mut rng, 2.0), rv(&mut rng, 2.0)];
        let a = twice.momentum_kernel(&p).unwrap();
        let b = prod.momentum_kernel(&p).unwrap();
        assert!((a - b).norm() < 1e-14 * b.norm().max(1e-12));
    }

    #[test]
    fn j_involution_matches_lemma() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let theta = theta1(0.4, 0.9);
        let f = random_gaussian(&mut rng);
        let g = random_gaussian(&mut rng);
        let prod = TwistedTensor::from_function(f.clone())
            .moyal_product(&TwistedTensor::from_function(g.clone()), &theta);
        let reflected = prod.reflect_j();
        // (f⊗_θ g)^J = f^J ⊗_{−θ} g^J
        let expect = TwistedTensor::from_function(f.reflect_j())
            .moyal_product(&TwistedTensor::from_function(g.reflect_j()), &-theta);
        for _ in 0..100 {
            let p = [rv(&mut rng, 2.0), rv(&mut rng, 2.0)];
            let a = reflected.momentum_kernel(&p).unwrap();
            let b = expect.momentum_kernel(&p).unwrap();
            assert!((a - b).norm() < 1e-13 * a.norm().max(1e-12));
            // kernel is the conjugate at the same momenta
            let c = prod.momentum_kernel(&p).unwrap().conj();
            assert!((a - c).norm() < 1e-13 * a.norm().max(1e-12));
        }
        let twice = reflected.reflect_j();
        let p = [rv(&mut rng, 1.0), rv(&mut rng, 1.0)];
        assert!(
            (twice.momentum_kernel(&p).unwrap() - prod.momentum_kernel(&p).unwrap()).norm()
                < 1e-14
        );
    }

    #[test]
    fn u_theta_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let theta = theta1(0.8, 0.5);
        let plain = TwistedTensor::plain(vec![
            random_gaussian(&mut rng),
            random_gaussian(&mut rng),
        ]);
        // u₀ is the identity
        assert!(plain
            .u_theta(&NoncommMatrix::zero())
            .unwrap()
            .same_pair_data(&plain, 0.0));
        // u_θ ∘ u_{−θ} is the identity
        let round = plain.u_theta(&theta).unwrap().u_theta(&-theta).unwrap();
        assert!(round.same_pair_data(&plain, 0.0));
        // u_θ on a plain pair reproduces the Moyal product kernel
        let twisted = plain.u_theta(&theta).unwrap();
        let prod = TwistedTensor::from_function(plain.factors()[0].clone()).moyal_product(
            &TwistedTensor::from_function(plain.factors()[1].clone()),
            &theta,
        );
        let p = [rv(&mut rng, 2.0), rv(&mut rng, 2.0)];
        let a = twisted.momentum_kernel(&p).unwrap();
        let b = prod.momentum_kernel(&p).unwrap();
        assert!((a - b).norm() < 1e-14 * b.norm().max(1e-12));
        // damped pairs refuse the multiplier
        let damped = TwistedTensor::from_function(plain.factors()[0].clone()).rho_product(
            &TwistedTensor::from_function(plain.factors()[1].clone()),
            &theta,
            TwistFunction::DampedPhase { sigma: 0.1 },
        );
        assert!(matches!(
            damped.u_theta(&theta),
            Err(MoyalError::UnsupportedTwistFunction)
        ));
    }

    #[test]
    fn rho_product_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta = theta1(1.0, -1.0);
        let f = TwistedTensor::from_function(random_gaussian(&mut rng));
        let g = TwistedTensor::from_function(random_gaussian(&mut rng));
        let std_rho = f.rho_product(&g, &theta, TwistFunction::StandardPhase);
        let moyal = f.moyal_product(&g, &theta);
        for _ in 0..1000 {
            let p = [rv(&mut rng, 3.0), rv(&mut rng, 3.0)];
            let a = std_rho.momentum_kernel(&p).unwrap();
            let b = moyal.momentum_kernel(&p).unwrap();
            assert!((a - b).norm() < 1e-14 * b.norm().max(1e-300));
        }
        // ρ̃(0) = 1 and the conjugate-pair law for the damped variant
        let damped = TwistFunction::DampedPhase { sigma: 0.3 };
        assert!((damped.eval(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-16);
        for _ in 0..50 {
            let lam: f64 = rng.gen_range(-4.0..4.0);
            assert!((damped.eval(-lam) - damped.eval(lam).conj()).norm() < 1e-16);
        }
    }

    #[test]
    fn continuity_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = random_gaussian(&mut rng);
        let g = random_gaussian(&mut rng);
        for _ in 0..1000 {
            let ta = NoncommMatrix::from_upper([
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]);
            let tb = NoncommMatrix::from_upper([
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]);
            let p = rv(&mut rng, 3.0);
            let q = rv(&mut rng, 3.0);
            let fa = TwistedTensor::from_function(f.clone())
                .moyal_product(&TwistedTensor::from_function(g.clone()), &ta);
            let fb = TwistedTensor::from_function(f.clone())
                .moyal_product(&TwistedTensor::from_function(g.clone()), &tb);
            let ka = fa.momentum_kernel(&[p, q]).unwrap();
            let kb = fb.momentum_kernel(&[p, q]).unwrap();
            let ft = (f.fourier(&p).unwrap() * g.fourier(&q).unwrap()).norm();
            let diff = ta.max_entry_diff(&tb);
            let delta = NoncommMatrix::from_upper({
                let mut u = [0.0; 6];
                for (i, v) in u.iter_mut().enumerate() {
                    *v = ta.upper()[i] - tb.upper()[i];
                }
                u
            });
            let bound = 0.5 * p.euclid_norm() * q.euclid_norm() * delta.operator_norm() * ft;
            assert!(
                (ka - kb).norm() <= bound + 1e-15,
                "violation: {} > {} (diff {diff})",
                (ka - kb).norm(),
                bound
            );
        }
    }

    #[test]
    fn associativity_gap_behaviour() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random_gaussian(&mut rng);
        let g = random_gaussian(&mut rng);
        let h = random_gaussian(&mut rng);
        let ta = theta1(1.0, 0.0);
        // same θ on both pairs: gap vanishes exactly
        let gap = mixed_associativity_gap(
            &f,
            &g,
            &h,
            &ta,
            &ta,
            &[rv(&mut rng, 2.0), rv(&mut rng, 2.0), rv(&mut rng, 2.0)],
        )
        .unwrap();
        assert_eq!(gap, 0.0);
        // different θ at momenta with p₁θ₁p₃ ≠ 0: generically positive
        let p1 = FourVector::new(1.0, 0.0, 0.0, 0.0);
        let p2 = FourVector::new(0.3, 0.4, 0.0, 0.0);
        let p3 = FourVector::new(0.0, 1.0, 0.0, 0.0);
        let gap = mixed_associativity_gap(&f, &g, &h, &NoncommMatrix::zero(), &ta, &[p1, p2, p3])
            .unwrap();
        assert!(gap > 1e-6);
        // parallel momenta: all twist arguments vanish
        let p = FourVector::new(0.5, 0.5, 0.0, 0.0);
        let gap =
            mixed_associativity_gap(&f, &g, &h, &NoncommMatrix::zero(), &ta, &[p, p, p]).unwrap();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn position_evaluate_plain_tensor_factorizes() {
        let f = TestFunction::gaussian(
            Complex64::new(1.0, 0.0),
            FourVector::new(0.1, -0.2, 0.0, 0.3),
            [0.9, 1.1, 1.0, 0.8],
            FourVector::new(0.4, 0.0, -0.3, 0.0),
        );
        let g = TestFunction::unit_gaussian();
        let t = TwistedTensor::from_function(f.clone())
            .moyal_product(&TwistedTensor::from_function(g.clone()), &NoncommMatrix::zero());
        let quad = QuadSpec {
            nodes_per_axis: 24,
            support_eps: 1e-8,
        };
        let x = FourVector::new(0.2, 0.1, -0.1, 0.4);
        let y = FourVector::new(-0.3, 0.2, 0.5, 0.0);
        let (val, est) = t.position_evaluate(&[x, y], &quad).unwrap();
        let expect = f.evaluate(&x) * g.evaluate(&y);
        assert!(
            (val - expect).norm() < 1e-6 + 3.0 * est,
            "val {val} expect {expect} est {est}"
        );
        // degree-1 inverse transform reproduces the function
        let t1 = TwistedTensor::from_function(f.clone());
        let (v1, e1) = t1.position_evaluate(&[x], &quad).unwrap();
        assert!((v1 - f.evaluate(&x)).norm() < 1e-6 + 3.0 * e1);
        // diagonal equals the star product value
        let theta = theta1(0.4, 0.2);
        let tt = TwistedTensor::from_function(f.clone())
            .moyal_product(&TwistedTensor::from_function(g.clone()), &theta);
        let (diag, _) = tt.position_evaluate(&[x, x], &quad).unwrap();
        let star = star_diagonal(&f, &g, &theta, &x, &quad).unwrap();
        assert!((diag - star).norm() < 1e-12);
        // linearity of the diagonal in the first argument
        let f2 = f.scale(Complex64::new(0.0, 2.0));
        let star2 = star_diagonal(&f2, &g, &theta, &x, &quad).unwrap();
        assert!((star2 - star * Complex64::new(0.0, 2.0)).norm() < 1e-10);
    }

    #[test]
    fn position_evaluate_guards() {
        let f = TestFunction::unit_gaussian();
        let t3 = TwistedTensor::plain(vec![f.clone(), f.clone(), f.clone()]);
        assert!(matches!(
            t3.position_evaluate(&[FourVector::zero(); 3], &QuadSpec::default()),
            Err(MoyalError::DegreeTooLarge { .. })
        ));
        let t1 = TwistedTensor::from_function(f);
        assert!(matches!(
            t1.momentum_kernel(&[FourVector::zero(), FourVector::zero()]),
            Err(MoyalError::DegreeMismatch { .. })
        ));
    }
}
