//! Sample-based axiom reports shared by modulars and F-norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::vector::CodomainVector;

/// Relative slack used when comparing the two sides of an inequality axiom.
pub const AXIOM_SLACK: f64 = 1e-12;

/// Concrete input reproducing the worst case of one axiom.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub u: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    /// Convex weight or scalar multiplier, when the axiom uses one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalar: Option<f64>,
}

impl Witness {
    pub fn point(u: &CodomainVector) -> Self {
        Witness {
            u: u.entries().to_vec(),
            v: None,
            scalar: None,
        }
    }

    pub fn pair(u: &CodomainVector, v: &CodomainVector, scalar: Option<f64>) -> Self {
        Witness {
            u: u.entries().to_vec(),
            v: Some(v.entries().to_vec()),
            scalar,
        }
    }

    pub fn scaled(u: &CodomainVector, scalar: f64) -> Self {
        Witness {
            u: u.entries().to_vec(),
            v: None,
            scalar: Some(scalar),
        }
    }
}

/// Outcome of one axiom over a sample set.
///
/// `worst_margin` is `rhs - lhs` at the worst sample, so a negative value is
/// a violation.
#[derive(Clone, Debug, Serialize)]
pub struct AxiomEntry {
    pub id: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub witness: Option<Witness>,
    pub checks: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AxiomReport {
    pub subject: String,
    pub entries: Vec<AxiomEntry>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn entry(&self, id: &str) -> Option<&AxiomEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AxiomEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

/// Accumulates the worst margin of one inequality axiom.
pub(crate) struct MarginTracker {
    id: &'static str,
    worst: f64,
    witness: Option<Witness>,
    checks: usize,
    failed: bool,
}

impl MarginTracker {
    pub(crate) fn new(id: &'static str) -> Self {
        MarginTracker {
            id,
            worst: f64::INFINITY,
            witness: None,
            checks: 0,
            failed: false,
        }
    }

    /// Records `lhs <= rhs`, tolerating `AXIOM_SLACK` relative to `rhs`.
    pub(crate) fn le(&mut self, lhs: f64, rhs: f64, witness: impl FnOnce() -> Witness) {
        let margin = rhs - lhs;
        let violated = !(margin >= -AXIOM_SLACK * rhs.abs().max(1.0));
        self.record(margin, violated, witness);
    }

    pub(crate) fn record(
        &mut self,
        margin: f64,
        violated: bool,
        witness: impl FnOnce() -> Witness,
    ) {
        self.checks += 1;
        // a violation always outranks a non-violating sample
        let worse = match (violated, self.failed) {
            (true, false) => true,
            (false, true) => false,
            _ => margin < self.worst || margin.is_nan(),
        };
        if worse || self.witness.is_none() {
            self.worst = margin;
            self.witness = Some(witness());
        }
        self.failed |= violated;
    }

    pub(crate) fn finish(self) -> AxiomEntry {
        AxiomEntry {
            id: self.id.to_string(),
            passed: !self.failed,
            worst_margin: if self.checks == 0 { 0.0 } else { self.worst },
            witness: if self.failed { self.witness } else { None },
            checks: self.checks,
        }
    }
}

/// Seeded pairs of codomain vectors with entries uniform in `[-radius, radius]`.
pub fn sample_pairs(
    dim: usize,
    count: usize,
    radius: f64,
    seed: u64,
) -> Vec<(CodomainVector, CodomainVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        CodomainVector::new((0..dim).map(|_| rng.gen_range(-radius..=radius)).collect())
    };
    (0..count)
        .map(|_| (draw(&mut rng), draw(&mut rng)))
        .collect()
}

/// Convex weights tried for every sample pair.
pub const CONVEX_WEIGHTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Scalars tried for the beta-homogeneity scan.
pub const HOMOGENEITY_SCALARS: [f64; 5] = [-2.0, -1.0, -0.5, 0.5, 2.0];
