//! β-homogeneous F-norms `‖u‖ = base(u)^β`.

use serde::{Deserialize, Serialize};

use crate::axioms::{AxiomReport, MarginTracker, Witness, HOMOGENEITY_SCALARS};
use crate::sum::NeumaierSum;
use crate::vector::CodomainVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseNorm {
    Euclidean,
    MaxAbs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FNormDescriptor {
    pub beta: f64,
    pub base: BaseNorm,
}

impl FNormDescriptor {
    /// Any `β > 0` is accepted so that bad declarations can be caught by
    /// [`check_fnorm_axioms`]; only `0 < β ≤ 1` gives an F-norm.
    pub fn new(beta: f64, base: BaseNorm) -> Self {
        FNormDescriptor { beta, base }
    }

    pub fn is_valid(&self) -> bool {
        self.beta > 0.0 && self.beta <= 1.0
    }

    pub fn eval(&self, u: &CodomainVector) -> f64 {
        let base = match self.base {
            BaseNorm::Euclidean => {
                let mut acc = NeumaierSum::default();
                for c in u.entries() {
                    acc += c * c;
                }
                acc.sum().sqrt()
            }
            BaseNorm::MaxAbs => u.max_abs(),
        };
        if base == 0.0 {
            0.0
        } else if self.beta == 1.0 {
            base
        } else {
            base.powf(self.beta)
        }
    }

    pub fn label(&self) -> String {
        let base = match self.base {
            BaseNorm::Euclidean => "euclidean",
            BaseNorm::MaxAbs => "max-abs",
        };
        format!("{base}^{}", self.beta)
    }
}

/// Checks `zero`, `symmetry`, `triangle` on every sample pair, plus
/// `homogeneity` over the scalars `{−2, −1, −½, ½, 2}`.
pub fn check_fnorm_axioms(
    f: &FNormDescriptor,
    samples: &[(CodomainVector, CodomainVector)],
) -> AxiomReport {
    let dim = samples.first().map(|(u, _)| u.dim()).unwrap_or(1);
    let zero = CodomainVector::zeros(dim);
    let mut zero_axiom = MarginTracker::new("zero");
    let at_zero = f.eval(&zero);
    zero_axiom.record(-at_zero, at_zero != 0.0, || Witness::point(&zero));
    let mut symmetry = MarginTracker::new("symmetry");
    let mut triangle = MarginTracker::new("triangle");
    let mut homogeneity = MarginTracker::new("homogeneity");

    for (u, v) in samples {
        for w in [u, v] {
            let nw = f.eval(w);
            if !w.is_zero() {
                zero_axiom.record(nw, !(nw > 0.0), || Witness::point(w));
            }
            let diff = (f.eval(&w.neg()) - nw).abs();
            symmetry.record(-diff, !(diff <= 1e-12 * nw.max(1.0)), || Witness::point(w));
            for a in HOMOGENEITY_SCALARS {
                let expected = a.abs().powf(f.beta) * nw;
                let diff = (f.eval(&w.scale(a)) - expected).abs();
                homogeneity.record(-diff, !(diff <= 1e-12 * expected.max(1.0)), || {
                    Witness::scaled(w, a)
                });
            }
        }
        triangle.le(f.eval(&u.add(v)), f.eval(u) + f.eval(v), || {
            Witness::pair(u, v, None)
        });
    }
    AxiomReport {
        subject: f.label(),
        entries: vec![
            zero_axiom.finish(),
            symmetry.finish(),
            triangle.finish(),
            homogeneity.finish(),
        ],
    }
}
