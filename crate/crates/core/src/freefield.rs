//! Wightman functionals of the free scalar field, undeformed and deformed:
//! mass-shell quadrature, twisted Wick contractions, deformed inner
//! products and an independent truncated-Fock oracle.
//!
//! Normalisation: `ω₂(f⊗g) = 2π ∫_{[−P,P]³} d³p/(2ω_p) f̃(p) g̃(−p)` with
//! `p₀ = ω_p` on the upper shell. In a Wick pairing `(i, j)` with `i < j`,
//! leg `i` carries the positive-shell momentum `+q` and leg `j` carries
//! `−q`; this sign convention is certified against the closed-form
//! two-particle commutator in the locality module.

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::NoncommMatrix;
use crate::minkowski::FourVector;
use crate::moyal::{MoyalError, TensorPoly, TwistedTensor};
use crate::quad::{gauss_legendre_on, indexed_map, pairwise_sum};
use crate::testfn::{Space, TestFnError, TestFunction};

#[derive(Debug, Error)]
pub enum FreeFieldError {
    #[error("functional degree {got} exceeds the supported maximum {max}")]
    DegreeTooLarge { max: usize, got: usize },
    #[error("measure failed its convergence certificate: doubling the rule moved the reference value by {rel:.3e}")]
    MeasureNotConverged { rel: f64 },
    #[error("quadrature node budget exceeded: {nodes} nodes requested on one contraction")]
    NodeBudget { nodes: usize },
    #[error("Fock lattice too large: {modes} modes (limit {limit})")]
    LatticeTooLarge { modes: usize, limit: usize },
    #[error("the Fock oracle requires a plain tensor with a uniform external twist")]
    NotPlain,
    #[error(transparent)]
    Moyal(#[from] MoyalError),
    #[error(transparent)]
    TestFn(#[from] TestFnError),
}

const MAX_FUNCTIONAL_DEGREE: usize = 6;
/// Per-leg relative threshold defining contraction momentum boxes.
pub(crate) const PAIR_BOX_EPS: f64 = 1e-5;
const MAX_AXIS_NODES: usize = 700;
const MAX_GRID_NODES: usize = 4_000_000;
const MAX_STREAM_NODES: usize = 100_000_000;
const MAX_PAIRING_TUPLES: f64 = 4e9;

/// Mass parameter plus the quadrature rule for Lorentz-invariant shell
/// integrals `d³p/(2ω_p)` over the box `[−P, P]³`.
///
/// In adaptive mode each contraction restricts its rule to the joint
/// ε-momentum box of the two contracted factors and scales node counts
/// with the integrand's oscillation; `fixed_grid` disables this so the
/// rule coincides node-for-node with a [`FockLattice`] built from the same
/// parameters.
#[derive(Clone, Debug)]
pub struct MassShellMeasure {
    pub mass: f64,
    pub cutoff: f64,
    pub nodes_per_axis: usize,
    adaptive: bool,
    /// Multiplier on the automatic node demand; 1.0 in certified measures.
    quality: f64,
}

impl MassShellMeasure {
    /// Certified constructor: doubling the node count must move a
    /// reference two-point value by less than `1e-8` relatively.
    pub fn new(mass: f64, cutoff: f64, nodes_per_axis: usize) -> Result<Self, FreeFieldError> {
        assert!(mass > 0.0 && cutoff > 0.0 && nodes_per_axis >= 2);
        let mu = MassShellMeasure {
            mass,
            cutoff,
            nodes_per_axis,
            adaptive: true,
            quality: 1.0,
        };
        mu.certify()?;
        Ok(mu)
    }

    /// Convergence certificate: doubling every node count must move the
    /// reference Gaussian-pair two-point value by less than `1e-8`.
    pub fn certify(&self) -> Result<(), FreeFieldError> {
        let f = TestFunction::unit_gaussian();
        let g = TestFunction::gaussian(
            Complex64::new(1.0, 0.0),
            FourVector::new(0.3, 0.2, -0.1, 0.4),
            [1.0; 4],
            FourVector::new(0.2, 0.0, 0.0, 0.0),
        );
        let v1 = self.contract_pair(&f, &g, 1.0)?.0;
        let v2 = self.contract_pair(&f, &g, 2.0)?.0;
        let rel = (v1 - v2).norm() / v2.norm().max(f64::MIN_POSITIVE);
        if rel > 1e-8 {
            return Err(FreeFieldError::MeasureNotConverged { rel });
        }
        Ok(())
    }

    /// Uncertified raw rule on the full box, shared node-for-node with the
    /// Fock oracle lattice. No per-contraction adaptation.
    pub fn fixed_grid(mass: f64, cutoff: f64, nodes_per_axis: usize) -> Self {
        MassShellMeasure {
            mass,
            cutoff,
            nodes_per_axis,
            adaptive: false,
            quality: 1.0,
        }
    }

    /// Scales the automatic node demand; values below 1 trade accuracy for
    /// speed. The result carries no convergence certificate — callers are
    /// expected to report the doubling estimate of whatever they compute.
    pub fn with_quality(mut self, quality: f64) -> Self {
        assert!(quality > 0.0);
        self.quality = quality;
        self
    }

    /// Adaptive variant of this rule with the given demand multiplier;
    /// same certification caveat as [`Self::with_quality`].
    pub fn adaptive_with_quality(mut self, quality: f64) -> Self {
        assert!(quality > 0.0);
        self.adaptive = true;
        self.quality = quality;
        self
    }

    pub fn omega(&self, q: &[f64; 3]) -> f64 {
        (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + self.mass * self.mass).sqrt()
    }

    /// Shell rule on `[lo, hi]` through the substitution `q = m·sinh(u)`,
    /// which moves the `ω` branch point to `|Im u| = π/2` and keeps node
    /// demands essentially mass-independent.
    fn mapped_rule(&self, n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        let ulo = (lo / self.mass).asinh();
        let uhi = (hi / self.mass).asinh();
        let (us, ws) = gauss_legendre_on(n, ulo, uhi);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (u, w) in us.iter().zip(&ws) {
            nodes.push(self.mass * u.sinh());
            weights.push(w * self.mass * u.cosh());
        }
        (nodes, weights)
    }

    /// Axis rules for the contraction of `f` (at `+q`) with `g` (at `−q`).
    /// Returns `None` when the joint box is empty.
    fn axis_rules(
        &self,
        f: &TestFunction,
        g: &TestFunction,
        scale: f64,
    ) -> Result<Option<Vec<(Vec<f64>, Vec<f64>)>>, FreeFieldError> {
        let mut rules = Vec::with_capacity(3);
        if !self.adaptive {
            let n = ((self.nodes_per_axis as f64 * scale).round() as usize).max(2);
            for _ in 0..3 {
                rules.push(self.mapped_rule(n, -self.cutoff, self.cutoff));
            }
            return Ok(Some(rules));
        }
        let bf = f.eps_support(PAIR_BOX_EPS, Space::Momentum)?;
        let bg = g.eps_support(PAIR_BOX_EPS, Space::Momentum)?;
        for axis in 1..4 {
            // spatial component of +q must lie in f's box and of −q in g's
            let lo = bf.lo[axis].max(-bg.hi[axis]).max(-self.cutoff);
            let hi = bf.hi[axis].min(-bg.lo[axis]).min(self.cutoff);
            if lo >= hi {
                return Ok(None);
            }
            let n = self.axis_node_count(f, g, axis, lo, hi, scale);
            rules.push(self.mapped_rule(n, lo, hi));
        }
        Ok(Some(rules))
    }

    /// Node demand per axis: a mass-independent floor for the mapped shell
    /// branch point, an oscillation term from the position centers and a
    /// feature term from the sharper of the two transforms.
    fn axis_node_count(
        &self,
        f: &TestFunction,
        g: &TestFunction,
        axis: usize,
        lo: f64,
        hi: f64,
        scale: f64,
    ) -> usize {
        let extent = hi - lo;
        let du = (hi / self.mass).asinh() - (lo / self.mass).asinh();
        let osc = f.momentum_osc_rate(axis) + g.momentum_osc_rate(axis);
        let feature = f
            .momentum_feature_scale(axis)
            .min(g.momentum_feature_scale(axis));
        let demand = 20.0 + osc * extent / 2.2 + 2.8 * du * self.mass / feature;
        let base = demand.max(self.nodes_per_axis as f64);
        ((self.quality * base * scale).round() as usize).clamp(2, MAX_AXIS_NODES)
    }

    /// Undeformed contraction `2π ∫ d³q/(2ω) f̃(q⁺) g̃(−q⁺)` together with
    /// the summed magnitude (for tail estimates).
    fn contract_pair(
        &self,
        f: &TestFunction,
        g: &TestFunction,
        scale: f64,
    ) -> Result<(Complex64, f64), FreeFieldError> {
        match self.axis_rules(f, g, scale)? {
            None => Ok((Complex64::new(0.0, 0.0), 0.0)),
            Some(rules) => stream_pair(self, f, g, None, &rules),
        }
    }

    /// Builds the stored node list for one contraction; `amp` carries
    /// `2π w/(2ω) · f̃(q⁺) · g̃(−q⁺) · ρ̃(q⁺ Θ (−q⁺))`.
    fn collect_pair(
        &self,
        f: &TestFunction,
        g: &TestFunction,
        in_pair: Option<(&NoncommMatrix, &crate::moyal::TwistFunction)>,
        rules: &[(Vec<f64>, Vec<f64>)],
    ) -> Result<PairGrid, FreeFieldError> {
        let total = rules[0].0.len() * rules[1].0.len() * rules[2].0.len();
        if total > MAX_GRID_NODES {
            return Err(FreeFieldError::NodeBudget { nodes: total });
        }
        let mut qplus = Vec::with_capacity(total);
        let mut weight = Vec::with_capacity(total);
        for (i1, &q1) in rules[0].0.iter().enumerate() {
            for (i2, &q2) in rules[1].0.iter().enumerate() {
                for (i3, &q3) in rules[2].0.iter().enumerate() {
                    let w = rules[0].1[i1] * rules[1].1[i2] * rules[2].1[i3];
                    let om = self.omega(&[q1, q2, q3]);
                    qplus.push(FourVector::new(om, q1, q2, q3));
                    weight.push(std::f64::consts::TAU * w / (2.0 * om));
                }
            }
        }
        let amp = indexed_map(total, |i| -> Result<Complex64, String> {
            let q = qplus[i];
            let mut a = f.fourier(&q).map_err(|e| e.to_string())?
                * g.fourier(&(-q)).map_err(|e| e.to_string())?
                * weight[i];
            if let Some((theta, rho)) = in_pair {
                a *= rho.eval(theta.bilinear(&q, &(-q)));
            }
            Ok(a)
        });
        let mut values = Vec::with_capacity(total);
        for a in amp {
            values.push(a.map_err(|msg| {
                FreeFieldError::TestFn(TestFnError::Unsupported(msg))
            })?);
        }
        let l1 = values.iter().map(|v| v.norm()).sum();
        Ok(PairGrid {
            qplus,
            amp: values,
            l1,
        })
    }
}

/// Streaming contraction sum: no node storage, used for pairs that do not
/// couple to any other pair through a twist.
fn stream_pair(
    mu: &MassShellMeasure,
    f: &TestFunction,
    g: &TestFunction,
    in_pair: Option<(&NoncommMatrix, &crate::moyal::TwistFunction)>,
    rules: &[(Vec<f64>, Vec<f64>)],
) -> Result<(Complex64, f64), FreeFieldError> {
    let total = rules[0].0.len() * rules[1].0.len() * rules[2].0.len();
    if total > MAX_STREAM_NODES {
        return Err(FreeFieldError::NodeBudget { nodes: total });
    }
    let n23 = rules[1].0.len() * rules[2].0.len();
    // parallel over the outer axis, deterministic chunk order
    let partial = indexed_map(rules[0].0.len(), |i1| -> Result<(Complex64, f64), String> {
        let q1 = rules[0].0[i1];
        let w1 = rules[0].1[i1];
        let mut values = Vec::with_capacity(n23);
        let mut l1 = 0.0;
        for (i2, &q2) in rules[1].0.iter().enumerate() {
            let w12 = w1 * rules[1].1[i2];
            for (i3, &q3) in rules[2].0.iter().enumerate() {
                let w = w12 * rules[2].1[i3];
                let om = mu.omega(&[q1, q2, q3]);
                let q = FourVector::new(om, q1, q2, q3);
                let mut a = f.fourier(&q).map_err(|e| e.to_string())?
                    * g.fourier(&(-q)).map_err(|e| e.to_string())?
                    * (std::f64::consts::TAU * w / (2.0 * om));
                if let Some((theta, rho)) = in_pair {
                    a *= rho.eval(theta.bilinear(&q, &(-q)));
                }
                l1 += a.norm();
                values.push(a);
            }
        }
        Ok((pairwise_sum(&values), l1))
    });
    let mut acc = Vec::with_capacity(partial.len());
    let mut l1 = 0.0;
    for p in partial {
        let (v, l) =
            p.map_err(|msg| FreeFieldError::TestFn(TestFnError::Unsupported(msg)))?;
        acc.push(v);
        l1 += l;
    }
    Ok((pairwise_sum(&acc), l1))
}

#[derive(Debug, Default)]
struct PairGrid {
    qplus: Vec<FourVector>,
    amp: Vec<Complex64>,
    l1: f64,
}

/// A perfect matching of `{0, …, n−1}` into ordered pairs `(i, j)`, `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pairing(pub Vec<(usize, usize)>);

/// All perfect matchings of `n` legs; `(n−1)!!` of them, none for odd `n`.
pub fn wick_pairings(n: usize) -> Vec<Pairing> {
    if n % 2 != 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut legs: Vec<usize> = (0..n).collect();
    let mut current = Vec::new();
    fn recurse(
        legs: &mut Vec<usize>,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Pairing>,
    ) {
        if legs.is_empty() {
            out.push(Pairing(current.clone()));
            return;
        }
        let first = legs[0];
        for k in 1..legs.len() {
            let partner = legs[k];
            let mut rest: Vec<usize> = legs
                .iter()
                .copied()
                .filter(|&l| l != first && l != partner)
                .collect();
            current.push((first, partner));
            recurse(&mut rest, current, out);
            current.pop();
        }
    }
    recurse(&mut legs, &mut current, &mut out);
    out
}

/// `ω₂(f⊗g)`: the undeformed smeared two-point function.
pub fn two_point(
    f: &TestFunction,
    g: &TestFunction,
    mu: &MassShellMeasure,
) -> Result<Complex64, FreeFieldError> {
    Ok(mu.contract_pair(f, g, 1.0)?.0)
}

/// Effective antisymmetric matrix combining the four leg-pair twists
/// between two contraction pairs under the standard phase.
fn effective_cross_twist(
    term: &TwistedTensor,
    pa: (usize, usize),
    pb: (usize, usize),
) -> NoncommMatrix {
    let mut m = NoncommMatrix::zero();
    for (u, su) in [(pa.0, 1.0), (pa.1, -1.0)] {
        for (v, sv) in [(pb.0, 1.0), (pb.1, -1.0)] {
            let tau = if u < v {
                *term.pair_twist(u, v)
            } else {
                -*term.pair_twist(v, u)
            };
            m = m + tau * (su * sv);
        }
    }
    m
}

/// `θ`-image of the lowered vector, used in the phase `q_a M q_b =
/// lower(q_a) · (M lower(q_b))`.
fn twist_image(m: &NoncommMatrix, q: &FourVector) -> [f64; 4] {
    let mat = m.as_matrix();
    let ql = q.lower();
    let mut out = [0.0; 4];
    for (mu, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (nu, v) in ql.iter().enumerate() {
            s += mat[mu][nu] * v;
        }
        *o = s;
    }
    out
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// One Wick pairing of one twisted tensor, evaluated on adapted grids.
/// Pairs are partitioned into components connected by nonzero effective
/// twists: uncoupled pairs stream as scalar factors, coupled components run
/// the explicit phase-coupled multiple sums.
fn eval_pairing(
    term: &TwistedTensor,
    pairing: &Pairing,
    mu: &MassShellMeasure,
    scale: f64,
) -> Result<(Complex64, f64), FreeFieldError> {
    let factors = term.factors();
    let k = pairing.0.len();
    let mut rules = Vec::with_capacity(k);
    for &(a, b) in &pairing.0 {
        match mu.axis_rules(&factors[a], &factors[b], scale)? {
            None => return Ok((Complex64::new(0.0, 0.0), 0.0)),
            Some(r) => rules.push(r),
        }
    }
    let in_pair = |alpha: usize| {
        let (a, b) = pairing.0[alpha];
        (term.pair_twist(a, b), term.pair_rho(a, b))
    };
    if !term.all_standard_phase() {
        // general profile path: every pair stored, every leg-pair factor
        // evaluated explicitly
        let mut grids = Vec::with_capacity(k);
        for alpha in 0..k {
            let (a, b) = pairing.0[alpha];
            let (theta, rho) = in_pair(alpha);
            grids.push(mu.collect_pair(
                &factors[a],
                &factors[b],
                Some((theta, rho)),
                &rules[alpha],
            )?);
        }
        let tuples: f64 = grids.iter().map(|g| g.amp.len() as f64).product();
        if tuples > MAX_PAIRING_TUPLES {
            return Err(FreeFieldError::NodeBudget {
                nodes: tuples as usize,
            });
        }
        let tail = PAIR_BOX_EPS * PAIR_BOX_EPS * grids.iter().map(|g| g.l1).product::<f64>();
        return Ok((eval_pairing_general(term, pairing, &grids), tail));
    }
    // effective cross twists and their coupling graph
    let mut cross = vec![NoncommMatrix::zero(); k * k];
    for alpha in 0..k {
        for beta in (alpha + 1)..k {
            cross[alpha * k + beta] =
                effective_cross_twist(term, pairing.0[alpha], pairing.0[beta]);
        }
    }
    let coupled = |a: usize, b: usize| !cross[a.min(b) * k + a.max(b)].is_zero();
    let mut comp_of = vec![usize::MAX; k];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for start in 0..k {
        if comp_of[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut stack = vec![start];
        let mut members = Vec::new();
        comp_of[start] = id;
        while let Some(a) = stack.pop() {
            members.push(a);
            for b in 0..k {
                if b != a && comp_of[b] == usize::MAX && coupled(a, b) {
                    comp_of[b] = id;
                    stack.push(b);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    let mut value = Complex64::new(1.0, 0.0);
    let mut l1_product = 1.0;
    for members in &components {
        match members.as_slice() {
            [alpha] => {
                let (a, b) = pairing.0[*alpha];
                let (theta, rho) = in_pair(*alpha);
                let (v, l1) = stream_pair(
                    mu,
                    &factors[a],
                    &factors[b],
                    Some((theta, rho)),
                    &rules[*alpha],
                )?;
                value *= v;
                l1_product *= l1;
            }
            [alpha, beta] => {
                let ga = grid_for(mu, term, pairing, &rules, *alpha)?;
                let gb = grid_for(mu, term, pairing, &rules, *beta)?;
                let tuples = ga.amp.len() as f64 * gb.amp.len() as f64;
                if tuples > MAX_PAIRING_TUPLES {
                    return Err(FreeFieldError::NodeBudget {
                        nodes: tuples as usize,
                    });
                }
                let m = &cross[*alpha * k + *beta];
                let images: Vec<[f64; 4]> =
                    gb.qplus.iter().map(|q| twist_image(m, q)).collect();
                let partial = indexed_map(ga.amp.len(), |i| {
                    let qa = ga.qplus[i].lower();
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (bj, img) in gb.amp.iter().zip(&images) {
                        let (sin, cos) = (-0.5 * dot4(&qa, img)).sin_cos();
                        acc += bj * Complex64::new(cos, sin);
                    }
                    ga.amp[i] * acc
                });
                value *= pairwise_sum(&partial);
                l1_product *= ga.l1 * gb.l1;
            }
            [alpha, beta, gamma] => {
                let g0 = grid_for(mu, term, pairing, &rules, *alpha)?;
                let g1 = grid_for(mu, term, pairing, &rules, *beta)?;
                let g2 = grid_for(mu, term, pairing, &rules, *gamma)?;
                let tuples = g0.amp.len() as f64 * g1.amp.len() as f64 * g2.amp.len() as f64;
                if tuples > MAX_PAIRING_TUPLES {
                    return Err(FreeFieldError::NodeBudget {
                        nodes: tuples as usize,
                    });
                }
                let m01 = &cross[*alpha * k + *beta];
                let m02 = &cross[*alpha * k + *gamma];
                let m12 = &cross[*beta * k + *gamma];
                let img01: Vec<[f64; 4]> = g1.qplus.iter().map(|q| twist_image(m01, q)).collect();
                let img02: Vec<[f64; 4]> = g2.qplus.iter().map(|q| twist_image(m02, q)).collect();
                let img12: Vec<[f64; 4]> = g2.qplus.iter().map(|q| twist_image(m12, q)).collect();
                let partial = indexed_map(g0.amp.len(), |i| {
                    let q0 = g0.qplus[i].lower();
                    let mut acc_i = Complex64::new(0.0, 0.0);
                    for (j, a1) in g1.amp.iter().enumerate() {
                        let q1 = g1.qplus[j].lower();
                        let arg01 = dot4(&q0, &img01[j]);
                        let mut acc_j = Complex64::new(0.0, 0.0);
                        for (l, a2) in g2.amp.iter().enumerate() {
                            let arg = arg01 + dot4(&q0, &img02[l]) + dot4(&q1, &img12[l]);
                            let (sin, cos) = (-0.5 * arg).sin_cos();
                            acc_j += a2 * Complex64::new(cos, sin);
                        }
                        acc_i += a1 * acc_j;
                    }
                    g0.amp[i] * acc_i
                });
                value *= pairwise_sum(&partial);
                l1_product *= g0.l1 * g1.l1 * g2.l1;
            }
            _ => unreachable!("functional degree is capped at 6"),
        }
    }
    Ok((value, PAIR_BOX_EPS * PAIR_BOX_EPS * l1_product))
}

fn grid_for(
    mu: &MassShellMeasure,
    term: &TwistedTensor,
    pairing: &Pairing,
    rules: &[Vec<(Vec<f64>, Vec<f64>)>],
    alpha: usize,
) -> Result<PairGrid, FreeFieldError> {
    let (a, b) = pairing.0[alpha];
    mu.collect_pair(
        &term.factors()[a],
        &term.factors()[b],
        Some((term.pair_twist(a, b), term.pair_rho(a, b))),
        &rules[alpha],
    )
}

/// Slow general path evaluating every cross leg-pair twist profile.
fn eval_pairing_general(
    term: &TwistedTensor,
    pairing: &Pairing,
    grids: &[PairGrid],
) -> Complex64 {
    let k = grids.len();
    let mut idx = vec![0usize; k];
    let mut values = Vec::new();
    'outer: loop {
        // signed on-shell momenta of every leg under the current tuple
        let mut acc = Complex64::new(1.0, 0.0);
        for (alpha, grid) in grids.iter().enumerate() {
            acc *= grid.amp[idx[alpha]];
        }
        for alpha in 0..k {
            for beta in (alpha + 1)..k {
                let qa = grids[alpha].qplus[idx[alpha]];
                let qb = grids[beta].qplus[idx[beta]];
                for (u, su) in [(pairing.0[alpha].0, 1.0), (pairing.0[alpha].1, -1.0)] {
                    for (v, sv) in [(pairing.0[beta].0, 1.0), (pairing.0[beta].1, -1.0)] {
                        let (lo, hi, sign) = if u < v { (u, v, 1.0) } else { (v, u, -1.0) };
                        let lambda =
                            sign * su * sv * term.pair_twist(lo, hi).bilinear(&qa, &qb);
                        acc *= term.pair_rho(lo, hi).eval(lambda);
                    }
                }
            }
        }
        values.push(acc);
        // advance the multi-index
        for alpha in (0..k).rev() {
            idx[alpha] += 1;
            if idx[alpha] < grids[alpha].amp.len() {
                continue 'outer;
            }
            idx[alpha] = 0;
            if alpha == 0 {
                break 'outer;
            }
        }
    }
    pairwise_sum(&values)
}

/// Raw functional value at one node scale, with the box-truncation tail.
/// Exposed so experiments can evaluate differences whose leading quadrature
/// error cancels and estimate the difference itself by node halving.
pub fn vacuum_functional_at_scale(
    poly: &TensorPoly,
    mu: &MassShellMeasure,
    scale: f64,
) -> Result<(Complex64, f64), FreeFieldError> {
    let mut value = Complex64::new(0.0, 0.0);
    let mut tail = 0.0;
    for term in poly.terms() {
        let n = term.degree();
        if n > MAX_FUNCTIONAL_DEGREE {
            return Err(FreeFieldError::DegreeTooLarge {
                max: MAX_FUNCTIONAL_DEGREE,
                got: n,
            });
        }
        if n == 0 {
            value += term.coefficient();
            continue;
        }
        if n % 2 == 1 {
            continue;
        }
        for pairing in wick_pairings(n) {
            let (v, t) = eval_pairing(term, &pairing, mu, scale)?;
            value += v;
            tail += t;
        }
    }
    Ok((value, tail))
}

/// The deformed vacuum functional `ω` on a twisted tensor polynomial:
/// sum over Wick pairings of products of shell contractions carrying the
/// full pairwise twist. Returns the value and a quadrature estimate from
/// halved node counts plus a box-truncation term.
pub fn vacuum_functional(
    poly: &TensorPoly,
    mu: &MassShellMeasure,
) -> Result<(Complex64, f64), FreeFieldError> {
    let (value, tail) = vacuum_functional_at_scale(poly, mu, 1.0)?;
    let (half_value, _) = vacuum_functional_at_scale(poly, mu, 0.5)?;
    Ok((value, (value - half_value).norm() + tail))
}

/// The deformed inner product `(f, g)_θ = ω^θ(f* ⊗ g)`: star the left
/// argument, join as a plain tensor, twist uniformly, evaluate.
pub fn inner_product_theta(
    f: &TensorPoly,
    g: &TensorPoly,
    theta: &NoncommMatrix,
    mu: &MassShellMeasure,
) -> Result<(Complex64, f64), FreeFieldError> {
    let joined = f.star().moyal_product(g, &NoncommMatrix::zero());
    let twisted = joined.u_theta(theta)?;
    vacuum_functional(&twisted, mu)
}

// ---------------------------------------------------------------------------
// Truncated-Fock oracle
// ---------------------------------------------------------------------------

const MAX_LATTICE_MODES: usize = 4096;

/// Phase picked up when a quantum of momentum `p` is created on a state of
/// total momentum `p_state`: the diagonal twist `T₊(p) = e^{−i/2 pθP}`.
/// Shared by the Fock oracle and the explicit two-particle commutator so
/// both routes carry one sign convention.
pub fn creation_twist_phase(
    theta: &NoncommMatrix,
    p: &FourVector,
    p_state: &FourVector,
) -> Complex64 {
    Complex64::new(0.0, -0.5 * theta.bilinear(p, p_state)).exp()
}

/// A finite set of on-shell modes with weights, over which deformed
/// creation and annihilation operators act on a truncated Fock space.
#[derive(Clone, Debug)]
pub struct FockLattice {
    /// `(q⁺, W)` with `W = 2π w/(2ω)` the contraction weight of the mode.
    pub modes: Vec<(FourVector, f64)>,
}

impl FockLattice {
    /// The lattice sharing nodes and weights with `fixed_grid` rules of the
    /// same measure parameters.
    pub fn from_measure(mu: &MassShellMeasure) -> Result<Self, FreeFieldError> {
        let n = mu.nodes_per_axis;
        if n.pow(3) > MAX_LATTICE_MODES {
            return Err(FreeFieldError::LatticeTooLarge {
                modes: n.pow(3),
                limit: MAX_LATTICE_MODES,
            });
        }
        // identical nodes and weights to the fixed-grid shell rule
        let (xs, ws) = mu.mapped_rule(n, -mu.cutoff, mu.cutoff);
        let mut modes = Vec::with_capacity(n.pow(3));
        for (i1, &q1) in xs.iter().enumerate() {
            for (i2, &q2) in xs.iter().enumerate() {
                for (i3, &q3) in xs.iter().enumerate() {
                    let om = mu.omega(&[q1, q2, q3]);
                    let w = ws[i1] * ws[i2] * ws[i3];
                    modes.push((
                        FourVector::new(om, q1, q2, q3),
                        std::f64::consts::TAU * w / (2.0 * om),
                    ));
                }
            }
        }
        Ok(FockLattice { modes })
    }
}

/// Sparse state on the truncated Fock space: sorted mode multisets with
/// complex amplitudes.
type FockState = HashMap<Vec<u16>, Complex64>;

/// Vacuum expectation value of `φ^θ(f₁)⋯φ^θ(fₙ)` on the lattice Fock
/// space, built from twisted ladder operators
/// `φ^θ(f) = Σ_β √W_β [ f̃(q_β) a_β T₋(q_β) + f̃(−q_β) a†_β T₊(q_β) ]`
/// with the diagonal twists `T∓(p) = e^{±i/2 pθP}` and `P` the lattice
/// total-momentum operator. The input must be a plain tensor polynomial;
/// the uniform twist `θ` is supplied here, exactly as in
/// `vacuum_functional ∘ u_theta`.
pub fn fock_oracle(
    poly: &TensorPoly,
    theta: &NoncommMatrix,
    lattice: &FockLattice,
) -> Result<Complex64, FreeFieldError> {
    if lattice.modes.len() > MAX_LATTICE_MODES {
        return Err(FreeFieldError::LatticeTooLarge {
            modes: lattice.modes.len(),
            limit: MAX_LATTICE_MODES,
        });
    }
    let mut total = Complex64::new(0.0, 0.0);
    for term in poly.terms() {
        let n = term.degree();
        if n > MAX_FUNCTIONAL_DEGREE {
            return Err(FreeFieldError::DegreeTooLarge {
                max: MAX_FUNCTIONAL_DEGREE,
                got: n,
            });
        }
        if !term.is_plain() {
            return Err(FreeFieldError::NotPlain);
        }
        if n == 0 {
            total += term.coefficient();
            continue;
        }
        if n % 2 == 1 {
            continue;
        }
        // per-operator mode coefficients
        let mut annih = Vec::with_capacity(n);
        let mut create = Vec::with_capacity(n);
        for f in term.factors() {
            let mut ca = Vec::with_capacity(lattice.modes.len());
            let mut cc = Vec::with_capacity(lattice.modes.len());
            for (q, w) in &lattice.modes {
                let sw = w.sqrt();
                ca.push(f.fourier(q)? * sw);
                cc.push(f.fourier(&(-*q))? * sw);
            }
            annih.push(ca);
            create.push(cc);
        }
        let mut state: FockState = HashMap::new();
        state.insert(Vec::new(), Complex64::new(1.0, 0.0));
        // apply operators right to left
        for (step, op) in (0..n).rev().enumerate() {
            let remaining = n - 1 - step;
            let mut next: FockState = HashMap::new();
            for (occ, amp) in &state {
                // total momentum of the occupation state
                let mut p_tot = FourVector::zero();
                for &b in occ {
                    p_tot = p_tot + lattice.modes[b as usize].0;
                }
                // creation on every mode
                if occ.len() + 1 <= remaining {
                    for (beta, (q, _)) in lattice.modes.iter().enumerate() {
                        let c = create[op][beta];
                        if c.norm_sqr() == 0.0 {
                            continue;
                        }
                        let phase = creation_twist_phase(theta, q, &p_tot);
                        let mult = occ.iter().filter(|&&m| m == beta as u16).count() as f64;
                        let mut new_occ = occ.clone();
                        let pos = new_occ.partition_point(|&m| m < beta as u16);
                        new_occ.insert(pos, beta as u16);
                        *next.entry(new_occ).or_insert(Complex64::new(0.0, 0.0)) +=
                            amp * c * phase * (mult + 1.0).sqrt();
                    }
                }
                // annihilation on occupied modes
                if occ.len() >= 1 && occ.len() - 1 <= remaining {
                    let mut seen = None;
                    for (pos, &b) in occ.iter().enumerate() {
                        if seen == Some(b) {
                            continue;
                        }
                        seen = Some(b);
                        let c = annih[op][b as usize];
                        if c.norm_sqr() == 0.0 {
                            continue;
                        }
                        let q = lattice.modes[b as usize].0;
                        // T₋ is the conjugate twist
                        let phase = creation_twist_phase(theta, &q, &p_tot).conj();
                        let mult = occ.iter().filter(|&&m| m == b).count() as f64;
                        let mut new_occ = occ.clone();
                        new_occ.remove(pos);
                        *next.entry(new_occ).or_insert(Complex64::new(0.0, 0.0)) +=
                            amp * c * phase * mult.sqrt();
                    }
                }
            }
            // parity pruning: only states that can return to the vacuum
            next.retain(|occ, _| {
                occ.len() <= remaining && (remaining - occ.len()) % 2 == 0
            });
            state = next;
        }
        total += term.coefficient()
            * state
                .get(&Vec::new())
                .copied()
                .unwrap_or(Complex64::new(0.0, 0.0));
    }
    Ok(total)
}
