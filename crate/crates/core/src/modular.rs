//! Modulars on the codomain.
//!
//! A modular `ρ` is a nonnegative functional that vanishes only at zero, is
//! invariant under sign change and is subadditive over convex combinations.
//! It is convex when `ρ(λu + (1-λ)v) ≤ λρ(u) + (1-λ)ρ(v)`, and satisfies the
//! Δ₂-condition with constant `τ` when `ρ(2u) ≤ τρ(u)`.
//!
//! Every shipped modular is an Orlicz sum `Σ Φ(|u_i|)` over the coordinates.
//! Axioms are validated on sample sets; nothing here is proved symbolically.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axioms::{AxiomReport, MarginTracker, Witness, CONVEX_WEIGHTS};
use crate::sum::NeumaierSum;
use crate::vector::CodomainVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModularError {
    #[error("input vector has non-finite entries")]
    NonFinite,
    #[error("modular evaluated to {0}, expected a nonnegative finite value")]
    BadValue(f64),
    #[error("the Luxemburg norm requires a convex modular")]
    NotConvex,
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("no λ ≤ 2^60 satisfies ρ(u/λ) ≤ 1; the Luxemburg norm is unbounded")]
    Unbounded,
    #[error("invalid modular parameter: {0}")]
    InvalidParameter(String),
}

/// Young-type generator `Φ` of an Orlicz sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum OrliczGenerator {
    /// `Φ(t) = t^p`
    Power { p: f64 },
    /// `Φ(t) = e^t − 1`
    ExpMinusOne,
    /// `Φ(t) = e^t − 1 − t`
    ExpMinusOneMinusT,
}

impl OrliczGenerator {
    /// Evaluates `Φ(t)` for `t ≥ 0`.
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            OrliczGenerator::Power { p } => {
                if t == 0.0 {
                    0.0
                } else {
                    t.powf(p)
                }
            }
            OrliczGenerator::ExpMinusOne => t.exp_m1(),
            OrliczGenerator::ExpMinusOneMinusT => {
                if t < 0.1 {
                    // Taylor tail t²/2! + t³/3! + ...; expm1(t) - t cancels badly here
                    let mut term = t * t / 2.0;
                    let mut acc = NeumaierSum::default();
                    for k in 3..20 {
                        acc += term;
                        term *= t / k as f64;
                    }
                    acc.sum()
                } else {
                    t.exp_m1() - t
                }
            }
        }
    }

    pub fn homogeneity_degree(&self) -> Option<f64> {
        match *self {
            OrliczGenerator::Power { p } => Some(p),
            _ => None,
        }
    }

    pub fn id(&self) -> String {
        match self {
            OrliczGenerator::Power { p } => format!("power({p})"),
            OrliczGenerator::ExpMinusOne => "exp-minus-one".into(),
            OrliczGenerator::ExpMinusOneMinusT => "exp-minus-one-minus-t".into(),
        }
    }
}

/// A user-supplied modular, evaluated as given.
#[derive(Clone)]
pub struct CustomModular {
    pub label: String,
    pub eval: Arc<dyn Fn(&CodomainVector) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomModular {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomModular")
            .field("label", &self.label)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum ModularKind {
    /// `ρ(u) = Σ |u_i|`
    AbsoluteValue,
    /// `ρ(u) = Σ |u_i|^p`
    Power {
        p: f64,
    },
    OrliczSum(OrliczGenerator),
    Custom(CustomModular),
}

/// An evaluable modular with its declared convexity and Δ₂ constant.
#[derive(Clone, Debug)]
pub struct ModularDescriptor {
    kind: ModularKind,
    convex: bool,
    delta2_tau: Option<f64>,
}

impl ModularDescriptor {
    /// Builds a descriptor. Declarations are not verified here; run
    /// [`check_modular_axioms`] for that.
    pub fn new(
        kind: ModularKind,
        convex: bool,
        delta2_tau: Option<f64>,
    ) -> Result<Self, ModularError> {
        match &kind {
            ModularKind::Power { p } | ModularKind::OrliczSum(OrliczGenerator::Power { p }) => {
                if !(p.is_finite() && *p > 0.0) {
                    return Err(ModularError::InvalidParameter(format!(
                        "power exponent {p}"
                    )));
                }
            }
            _ => {}
        }
        if let Some(tau) = delta2_tau {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(ModularError::InvalidParameter(format!("Δ₂ constant {tau}")));
            }
        }
        Ok(ModularDescriptor {
            kind,
            convex,
            delta2_tau,
        })
    }

    /// `ρ(u) = Σ|u_i|`, convex, `τ = 2`.
    pub fn absolute_value() -> Self {
        ModularDescriptor {
            kind: ModularKind::AbsoluteValue,
            convex: true,
            delta2_tau: Some(2.0),
        }
    }

    /// `ρ(u) = Σ|u_i|^p`, convex for `p ≥ 1`, `τ = 2^p`.
    pub fn power(p: f64) -> Result<Self, ModularError> {
        Self::new(ModularKind::Power { p }, p >= 1.0, Some(2f64.powf(p)))
    }

    pub fn orlicz(generator: OrliczGenerator) -> Result<Self, ModularError> {
        let tau = generator.homogeneity_degree().map(|p| 2f64.powf(p));
        let convex = match generator {
            OrliczGenerator::Power { p } => p >= 1.0,
            _ => true,
        };
        Self::new(ModularKind::OrliczSum(generator), convex, tau)
    }

    pub fn custom(
        label: impl Into<String>,
        convex: bool,
        delta2_tau: Option<f64>,
        eval: impl Fn(&CodomainVector) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, ModularError> {
        Self::new(
            ModularKind::Custom(CustomModular {
                label: label.into(),
                eval: Arc::new(eval),
            }),
            convex,
            delta2_tau,
        )
    }

    pub fn kind(&self) -> &ModularKind {
        &self.kind
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn delta2_tau(&self) -> Option<f64> {
        self.delta2_tau
    }

    /// Degree `k` with `ρ(cu) = |c|^k ρ(u)`, when the kind is homogeneous.
    ///
    /// This is the exponent of the `k`-homogeneous variant of the Luxemburg
    /// functional; [`luxemburg_norm`] itself always uses `k = 1`.
    pub fn homogeneity_degree(&self) -> Option<f64> {
        match &self.kind {
            ModularKind::AbsoluteValue => Some(1.0),
            ModularKind::Power { p } => Some(*p),
            ModularKind::OrliczSum(g) => g.homogeneity_degree(),
            ModularKind::Custom(_) => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ModularKind::AbsoluteValue => "absolute-value".into(),
            ModularKind::Power { p } => format!("power({p})"),
            ModularKind::OrliczSum(g) => format!("orlicz-sum[{}]", g.id()),
            ModularKind::Custom(c) => format!("custom[{}]", c.label),
        }
    }

    /// Evaluates without the finiteness guard.
    pub(crate) fn raw(&self, u: &CodomainVector) -> f64 {
        let orlicz = |phi: &dyn Fn(f64) -> f64| {
            let mut acc = NeumaierSum::default();
            for c in u.entries() {
                acc += phi(c.abs());
            }
            acc.sum()
        };
        match &self.kind {
            ModularKind::AbsoluteValue => orlicz(&|t| t),
            ModularKind::Power { p } => orlicz(&|t| OrliczGenerator::Power { p: *p }.eval(t)),
            ModularKind::OrliczSum(g) => orlicz(&|t| g.eval(t)),
            ModularKind::Custom(c) => (c.eval)(u),
        }
    }
}

/// `ρ(u)` for a finite `u`.
pub fn eval_modular(m: &ModularDescriptor, u: &CodomainVector) -> Result<f64, ModularError> {
    if !u.is_finite() {
        return Err(ModularError::NonFinite);
    }
    let value = m.raw(u);
    if value.is_nan() || value < 0.0 {
        return Err(ModularError::BadValue(value));
    }
    Ok(value)
}

/// Checks the modular axioms on every pair and on convex combinations with
/// weights `{0, ¼, ½, ¾, 1}`.
///
/// Entries: `zero` (ρ(0)=0, ρ(u)>0 for u≠0), `symmetry` (ρ(−u)=ρ(u)),
/// `convex-combination` (ρ(λu+(1−λ)v) ≤ ρ(u)+ρ(v)), and when declared,
/// `convexity`, `delta2` and `delta2-tau-floor`.
pub fn check_modular_axioms(
    m: &ModularDescriptor,
    samples: &[(CodomainVector, CodomainVector)],
) -> AxiomReport {
    let dim = samples.first().map(|(u, _)| u.dim()).unwrap_or(1);
    let zero = CodomainVector::zeros(dim);

    let mut zero_axiom = MarginTracker::new("zero");
    let at_zero = m.raw(&zero);
    zero_axiom.record(-at_zero, at_zero != 0.0, || Witness::point(&zero));
    let mut symmetry = MarginTracker::new("symmetry");
    let mut combination = MarginTracker::new("convex-combination");
    let mut convexity = MarginTracker::new("convexity");
    let mut delta2 = MarginTracker::new("delta2");

    for (u, v) in samples {
        for w in [u, v] {
            let rw = m.raw(w);
            if !w.is_zero() {
                zero_axiom.record(rw, !(rw > 0.0), || Witness::point(w));
            }
            let diff = (m.raw(&w.neg()) - rw).abs();
            symmetry.record(-diff, !(diff <= 1e-12 * rw.max(1.0)), || Witness::point(w));
            if let Some(tau) = m.delta2_tau {
                delta2.le(m.raw(&w.scale(2.0)), tau * rw, || Witness::point(w));
            }
        }
        let (ru, rv) = (m.raw(u), m.raw(v));
        for lambda in CONVEX_WEIGHTS {
            let mix = u.scale(lambda).add(&v.scale(1.0 - lambda));
            let rmix = m.raw(&mix);
            combination.le(rmix, ru + rv, || Witness::pair(u, v, Some(lambda)));
            if m.convex {
                convexity.le(rmix, lambda * ru + (1.0 - lambda) * rv, || {
                    Witness::pair(u, v, Some(lambda))
                });
            }
        }
    }

    let mut entries = vec![zero_axiom.finish(), symmetry.finish(), combination.finish()];
    if m.convex {
        entries.push(convexity.finish());
    }
    if let Some(tau) = m.delta2_tau {
        entries.push(delta2.finish());
        if m.convex {
            let mut floor = MarginTracker::new("delta2-tau-floor");
            floor.le(2.0, tau, || Witness {
                u: vec![],
                v: None,
                scalar: Some(tau),
            });
            entries.push(floor.finish());
        }
    }
    AxiomReport {
        subject: m.label(),
        entries,
    }
}

/// Geometric ladder of magnitudes `start · factor^i`, `i = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ladder {
    pub start: f64,
    pub factor: f64,
    pub steps: usize,
}

impl Default for Ladder {
    /// `2^-20, 2^-19, …, 2^40`.
    fn default() -> Self {
        Ladder {
            start: 2f64.powi(-20),
            factor: 2.0,
            steps: 60,
        }
    }
}

impl Ladder {
    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |i| self.start * self.factor.powi(i as i32))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Delta2Estimate {
    Tau { tau: f64 },
    Divergent { last_ratio: f64 },
}

/// Number of trailing rungs over which the running sup must settle.
const DELTA2_WINDOW: usize = 10;

/// Estimates the smallest Δ₂ constant along `direction` scaled by the ladder.
///
/// The running sup of `ρ(2u)/ρ(u)` must change by less than 1e-6 (relative)
/// over the last ten rungs; otherwise the estimate is divergent. Rungs where
/// `ρ(u)` underflows to zero are skipped.
pub fn delta2_estimate(
    m: &ModularDescriptor,
    ladder: &Ladder,
    direction: &CodomainVector,
) -> Delta2Estimate {
    let mut running = Vec::new();
    let mut sup = 0.0f64;
    let mut last_ratio = f64::NAN;
    for t in ladder.magnitudes() {
        let u = direction.scale(t);
        let (r1, r2) = (m.raw(&u), m.raw(&u.scale(2.0)));
        if r1 == 0.0 && r2 == 0.0 {
            continue;
        }
        let ratio = r2 / r1;
        last_ratio = ratio;
        if !ratio.is_finite() {
            return Delta2Estimate::Divergent { last_ratio: ratio };
        }
        sup = sup.max(ratio);
        running.push(sup);
    }
    if running.len() <= DELTA2_WINDOW {
        return Delta2Estimate::Divergent { last_ratio };
    }
    let last = running[running.len() - 1];
    let earlier = running[running.len() - 1 - DELTA2_WINDOW];
    if (last - earlier) / last < 1e-6 {
        Delta2Estimate::Tau { tau: last }
    } else {
        Delta2Estimate::Divergent { last_ratio }
    }
}

const LUX_LO: f64 = 8.673617379884035e-19; // 2^-60
const LUX_HI: f64 = 1.152_921_504_606_847e18; // 2^60
const LUX_MAX_ITER: usize = 200;

/// `inf{λ > 0 : ρ(u/λ) ≤ 1}` by bisection on `[2^-60, 2^60]`.
///
/// Returns the upper end of the final bracket, which always satisfies
/// `ρ(u/λ) ≤ 1` and lies within `tol` of the infimum.
pub fn luxemburg_norm(
    m: &ModularDescriptor,
    u: &CodomainVector,
    tol: f64,
) -> Result<f64, ModularError> {
    if !m.convex {
        return Err(ModularError::NotConvex);
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ModularError::BadTolerance(tol));
    }
    if !u.is_finite() {
        return Err(ModularError::NonFinite);
    }
    if u.is_zero() {
        return Ok(0.0);
    }
    let feasible = |lambda: f64| m.raw(&u.scale(1.0 / lambda)) <= 1.0;
    if !feasible(LUX_HI) {
        return Err(ModularError::Unbounded);
    }
    if feasible(LUX_LO) {
        return Ok(LUX_LO);
    }
    let (mut lo, mut hi) = (LUX_LO, LUX_HI);
    for _ in 0..LUX_MAX_ITER {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::sample_pairs;

    fn v(x: &[f64]) -> CodomainVector {
        CodomainVector::new(x.to_vec())
    }

    #[test]
    fn eval_examples() {
        let abs = ModularDescriptor::absolute_value();
        assert_eq!(eval_modular(&abs, &v(&[0.0])).unwrap(), 0.0);
        let sq = ModularDescriptor::power(2.0).unwrap();
        assert_eq!(eval_modular(&sq, &v(&[3.0])).unwrap(), 9.0);
        let orl = ModularDescriptor::orlicz(OrliczGenerator::ExpMinusOneMinusT).unwrap();
        // oracle: two copies of e^1 - 1 - 1 summed directly
        let oracle = 2.0 * (std::f64::consts::E - 2.0);
        assert!((eval_modular(&orl, &v(&[1.0, 1.0])).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 1.436_563_656_918_090_2).abs() < 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        let abs = ModularDescriptor::absolute_value();
        assert_eq!(
            eval_modular(&abs, &v(&[f64::NAN])),
            Err(ModularError::NonFinite)
        );
        assert_eq!(
            eval_modular(&abs, &v(&[f64::INFINITY])),
            Err(ModularError::NonFinite)
        );
    }

    #[test]
    fn small_argument_generator_matches_series() {
        let g = OrliczGenerator::ExpMinusOneMinusT;
        for t in [1e-8f64, 1e-4, 0.05, 0.0999] {
            // oracle: terms t^k/k! for k = 2..12, summed smallest first
            let mut fact = 1.0;
            let mut terms = Vec::new();
            for k in 1..=12 {
                fact *= k as f64;
                if k >= 2 {
                    terms.push(t.powi(k) / fact);
                }
            }
            let direct: f64 = terms.iter().rev().sum();
            assert!((g.eval(t) - direct).abs() <= 1e-14 * direct);
        }
        // continuity across the switch point
        assert!((g.eval(0.1 - 1e-12) - g.eval(0.1)).abs() < 1e-12);
    }

    #[test]
    fn absolute_value_passes_axioms() {
        let report = check_modular_axioms(
            &ModularDescriptor::absolute_value(),
            &sample_pairs(3, 50, 4.0, 1),
        );
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn shifted_modular_fails_zero_axiom() {
        let m = ModularDescriptor::custom("abs-plus-one", false, None, |u| {
            u.entries().iter().map(|c| c.abs()).sum::<f64>() + 1.0
        })
        .unwrap();
        let report = check_modular_axioms(&m, &sample_pairs(1, 10, 4.0, 0));
        let zero = report.entry("zero").unwrap();
        assert!(!zero.passed);
        assert_eq!(zero.witness.as_ref().unwrap().u, vec![0.0]);
        assert_eq!(zero.worst_margin, -1.0);
    }

    #[test]
    fn concave_power_declared_convex_fails_convexity() {
        let m = ModularDescriptor::new(ModularKind::Power { p: 0.5 }, true, None).unwrap();
        let grid: Vec<_> = [0.5, 1.0, 2.0, 3.0]
            .iter()
            .flat_map(|&a| [0.25, 1.0, 4.0].iter().map(move |&b| (v(&[a]), v(&[b]))))
            .collect();
        let report = check_modular_axioms(&m, &grid);
        let convexity = report.entry("convexity").unwrap();
        assert!(!convexity.passed);
        let w = convexity.witness.as_ref().unwrap();
        assert!(w.v.is_some());
        // the witness reproduces the violation
        let (a, b, l) = (w.u[0], w.v.as_ref().unwrap()[0], w.scalar.unwrap());
        let lhs = (l * a + (1.0 - l) * b).abs().sqrt();
        let rhs = l * a.abs().sqrt() + (1.0 - l) * b.abs().sqrt();
        assert!(lhs > rhs);
        // sqrt is still a (non-convex) modular
        assert!(report.entry("convex-combination").unwrap().passed);
    }

    #[test]
    fn delta2_examples() {
        let ladder = Ladder::default();
        let dir = v(&[1.0]);
        assert_eq!(
            delta2_estimate(&ModularDescriptor::absolute_value(), &ladder, &dir),
            Delta2Estimate::Tau { tau: 2.0 }
        );
        assert_eq!(
            delta2_estimate(&ModularDescriptor::power(2.0).unwrap(), &ladder, &dir),
            Delta2Estimate::Tau { tau: 4.0 }
        );
        let exp = ModularDescriptor::orlicz(OrliczGenerator::ExpMinusOne).unwrap();
        assert!(matches!(
            delta2_estimate(&exp, &ladder, &dir),
            Delta2Estimate::Divergent { .. }
        ));
        // a ladder topping out near t = 50 already shows the blow-up
        let short = Ladder {
            start: 2f64.powi(-20),
            factor: 2.0,
            steps: 25,
        };
        assert!(matches!(
            delta2_estimate(&exp, &short, &dir),
            Delta2Estimate::Divergent { .. }
        ));
    }

    #[test]
    fn delta2_power_ladder_matches_two_to_p() {
        for p in [1.0, 1.5, 2.0, 3.0, 4.5] {
            let m = ModularDescriptor::power(p).unwrap();
            match delta2_estimate(&m, &Ladder::default(), &v(&[1.0, -2.0])) {
                Delta2Estimate::Tau { tau } => assert!((tau - 2f64.powf(p)).abs() < 1e-9),
                other => panic!("p={p}: {other:?}"),
            }
        }
    }

    #[test]
    fn luxemburg_examples() {
        let tol = 1e-12;
        let abs = ModularDescriptor::absolute_value();
        assert!((luxemburg_norm(&abs, &v(&[0.5]), tol).unwrap() - 0.5).abs() <= tol);
        let cube = ModularDescriptor::power(3.0).unwrap();
        assert!((luxemburg_norm(&cube, &v(&[8.0]), tol).unwrap() - 8.0).abs() <= tol);
        let sq = ModularDescriptor::orlicz(OrliczGenerator::Power { p: 2.0 }).unwrap();
        assert!((luxemburg_norm(&sq, &v(&[3.0, 4.0]), tol).unwrap() - 5.0).abs() <= tol);
        assert_eq!(luxemburg_norm(&sq, &v(&[0.0, 0.0]), tol).unwrap(), 0.0);
    }

    #[test]
    fn luxemburg_errors() {
        let sqrt = ModularDescriptor::power(0.5).unwrap();
        assert_eq!(
            luxemburg_norm(&sqrt, &v(&[1.0]), 1e-9),
            Err(ModularError::NotConvex)
        );
        let abs = ModularDescriptor::absolute_value();
        assert_eq!(
            luxemburg_norm(&abs, &v(&[1.0]), 0.0),
            Err(ModularError::BadTolerance(0.0))
        );
        let huge = ModularDescriptor::custom("always-big", true, None, |u| {
            if u.is_zero() {
                0.0
            } else {
                2.0
            }
        })
        .unwrap();
        assert_eq!(
            luxemburg_norm(&huge, &v(&[1.0]), 1e-9),
            Err(ModularError::Unbounded)
        );
    }
}
