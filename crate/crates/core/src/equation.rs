//! The nine-term quadratic functional equation
//!
//! ```text
//! φ(x+y−z) + φ(x+z−y) + φ(y+z−x) = φ(x−y) + φ(x−z) + φ(z−y) + φ(x) + φ(y) + φ(z)
//! ```
//!
//! and the control functions `α(x, y, z)` that bound its defect.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{SizeError, Sizer};
use crate::sum::NeumaierSum;
use crate::vector::{CodomainVector, DomainNorm, DomainPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquationError {
    #[error("map `{label}` does not vanish at the origin: φ(0) = {value}")]
    NonzeroAtOrigin { label: String, value: String },
    #[error("invalid control parameter: {0}")]
    InvalidControl(String),
}

type Evaluator = Arc<dyn Fn(&DomainPoint) -> CodomainVector + Send + Sync>;

/// A deterministic map `φ` from domain points to codomain vectors with `φ(0) = 0`.
#[derive(Clone)]
pub struct FunctionHandle {
    label: String,
    domain_dim: usize,
    codomain_dim: usize,
    eval: Evaluator,
}

impl FunctionHandle {
    pub fn new(
        label: impl Into<String>,
        domain_dim: usize,
        codomain_dim: usize,
        eval: impl Fn(&DomainPoint) -> CodomainVector + Send + Sync + 'static,
    ) -> Result<Self, EquationError> {
        let handle = FunctionHandle {
            label: label.into(),
            domain_dim,
            codomain_dim,
            eval: Arc::new(eval),
        };
        let at_origin = handle.eval(&DomainPoint::zeros(domain_dim));
        if !at_origin.is_zero() {
            return Err(EquationError::NonzeroAtOrigin {
                label: handle.label,
                value: at_origin.to_string(),
            });
        }
        Ok(handle)
    }

    /// Scalar map on the real line.
    pub fn scalar(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, EquationError> {
        Self::new(label, 1, 1, move |x| {
            CodomainVector::scalar(f(x.coords()[0]))
        })
    }

    pub fn eval(&self, x: &DomainPoint) -> CodomainVector {
        (self.eval)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }
}

impl fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("label", &self.label)
            .field("domain_dim", &self.domain_dim)
            .field("codomain_dim", &self.codomain_dim)
            .finish()
    }
}

/// The nine evaluation points of the defect, left-hand side first.
pub fn defect_points(x: &DomainPoint, y: &DomainPoint, z: &DomainPoint) -> [DomainPoint; 9] {
    [
        x.add(y).sub(z),
        x.add(z).sub(y),
        y.add(z).sub(x),
        x.sub(y),
        x.sub(z),
        z.sub(y),
        x.clone(),
        y.clone(),
        z.clone(),
    ]
}

/// Combines the nine values `[l1, l2, l3, r1, …, r6]` into `Σl − Σr`.
///
/// Per component, the three left values are added in ascending order, then
/// the six right values are subtracted in ascending order, all in one
/// compensated accumulator. The result therefore only depends on the two
/// multisets of values.
pub fn combine_defect(values: &[CodomainVector; 9]) -> CodomainVector {
    let dim = values[0].dim();
    let out =
        (0..dim).map(|c| combine_defect_scalar(std::array::from_fn(|i| values[i].entries()[c])));
    CodomainVector::new(out.collect())
}

/// One component of [`combine_defect`].
pub fn combine_defect_scalar(values: [f64; 9]) -> f64 {
    let mut lhs = [values[0], values[1], values[2]];
    let mut rhs = [0.0; 6];
    rhs.copy_from_slice(&values[3..]);
    lhs.sort_by(f64::total_cmp);
    rhs.sort_by(f64::total_cmp);
    let mut acc = NeumaierSum::default();
    for l in lhs {
        acc += l;
    }
    for r in rhs {
        acc += -r;
    }
    acc.sum()
}

/// Defect of a scalar map on the real line; agrees bit for bit with [`defect`].
pub fn defect_scalar(f: impl Fn(f64) -> f64, x: f64, y: f64, z: f64) -> f64 {
    combine_defect_scalar([
        f(x + y - z),
        f(x + z - y),
        f(y + z - x),
        f(x - y),
        f(x - z),
        f(z - y),
        f(x),
        f(y),
        f(z),
    ])
}

/// Signed defect of the equation at `(x, y, z)`.
pub fn defect(
    phi: &FunctionHandle,
    x: &DomainPoint,
    y: &DomainPoint,
    z: &DomainPoint,
) -> CodomainVector {
    defect_with(|p| phi.eval(p), x, y, z)
}

/// [`defect`] for any evaluator.
pub fn defect_with(
    mut f: impl FnMut(&DomainPoint) -> CodomainVector,
    x: &DomainPoint,
    y: &DomainPoint,
    z: &DomainPoint,
) -> CodomainVector {
    let points = defect_points(x, y, z);
    let values: [CodomainVector; 9] = std::array::from_fn(|i| f(&points[i]));
    combine_defect(&values)
}

/// Size of the defect under the experiment's modular or F-norm.
pub fn defect_size(
    sizer: &Sizer,
    phi: &FunctionHandle,
    x: &DomainPoint,
    y: &DomainPoint,
    z: &DomainPoint,
) -> Result<f64, SizeError> {
    sizer.size(&defect(phi, x, y, z))
}

pub type ControlFn = dyn Fn(&DomainPoint, &DomainPoint, &DomainPoint) -> f64 + Send + Sync;

/// A user-supplied control function.
#[derive(Clone)]
pub struct CustomControl {
    pub label: String,
    pub eval: Arc<ControlFn>,
}

impl fmt::Debug for CustomControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomControl")
            .field("label", &self.label)
            .finish()
    }
}

/// Bound `α(x, y, z) ≥ 0` on the size of the defect.
#[derive(Clone, Debug)]
pub enum ControlFunction {
    /// `α ≡ ε`
    Constant {
        epsilon: f64,
    },
    /// `α = θ(‖x‖^p + ‖y‖^p + ‖z‖^p)`, with `‖0‖^p = 0`
    Power {
        theta: f64,
        exponent: f64,
        norm: DomainNorm,
    },
    Custom(CustomControl),
}

impl ControlFunction {
    pub fn constant(epsilon: f64) -> Result<Self, EquationError> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(EquationError::InvalidControl(format!("epsilon {epsilon}")));
        }
        Ok(ControlFunction::Constant { epsilon })
    }

    pub fn power(theta: f64, exponent: f64, norm: DomainNorm) -> Result<Self, EquationError> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(EquationError::InvalidControl(format!("theta {theta}")));
        }
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(EquationError::InvalidControl(format!(
                "exponent {exponent}"
            )));
        }
        Ok(ControlFunction::Power {
            theta,
            exponent,
            norm,
        })
    }

    pub fn custom(
        label: impl Into<String>,
        eval: impl Fn(&DomainPoint, &DomainPoint, &DomainPoint) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ControlFunction::Custom(CustomControl {
            label: label.into(),
            eval: Arc::new(eval),
        })
    }

    pub fn eval(&self, x: &DomainPoint, y: &DomainPoint, z: &DomainPoint) -> f64 {
        match self {
            ControlFunction::Constant { epsilon } => *epsilon,
            ControlFunction::Power {
                theta,
                exponent,
                norm,
            } => {
                let term = |p: &DomainPoint| {
                    let n = p.norm(*norm);
                    if n == 0.0 {
                        0.0
                    } else {
                        n.powf(*exponent)
                    }
                };
                let mut acc = NeumaierSum::default();
                acc += term(x);
                acc += term(y);
                acc += term(z);
                theta * acc.sum()
            }
            ControlFunction::Custom(c) => (c.eval)(x, y, z),
        }
    }

    /// Constant and power controls have geometric series with known ratios.
    pub fn is_closed_form(&self) -> bool {
        !matches!(self, ControlFunction::Custom(_))
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            ControlFunction::Constant { epsilon } => *epsilon == 0.0,
            ControlFunction::Power { theta, .. } => *theta == 0.0,
            ControlFunction::Custom(_) => false,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ControlFunction::Constant { epsilon } => format!("constant(ε={epsilon})"),
            ControlFunction::Power {
                theta, exponent, ..
            } => {
                format!("power(θ={theta}, p={exponent})")
            }
            ControlFunction::Custom(c) => format!("custom[{}]", c.label),
        }
    }
}

/// A finite set of `(x, y, z)` triples on which controls are checked.
#[derive(Clone, Debug, Default)]
pub struct TripleGrid {
    triples: Vec<[DomainPoint; 3]>,
}

impl TripleGrid {
    pub fn new(triples: Vec<[DomainPoint; 3]>) -> Self {
        TripleGrid { triples }
    }

    /// All ordered triples drawn from `points`.
    pub fn product(points: &[DomainPoint]) -> Self {
        let mut triples = Vec::with_capacity(points.len().pow(3));
        for x in points {
            for y in points {
                for z in points {
                    triples.push([x.clone(), y.clone(), z.clone()]);
                }
            }
        }
        TripleGrid { triples }
    }

    /// All ordered triples of scalars drawn from `values`.
    pub fn lattice_1d(values: &[f64]) -> Self {
        let points: Vec<_> = values.iter().map(|&v| DomainPoint::scalar(v)).collect();
        Self::product(&points)
    }

    /// `count` seeded triples with coordinates uniform on a lattice of step
    /// `1/4` inside `[-radius, radius]`, so every combination stays exact.
    pub fn random(dim: usize, count: usize, radius: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = (radius * 4.0).floor() as i64;
        let point = |rng: &mut ChaCha8Rng| {
            DomainPoint::new(
                (0..dim)
                    .map(|_| rng.gen_range(-steps..=steps) as f64 / 4.0)
                    .collect(),
            )
        };
        let triples = (0..count)
            .map(|_| [point(&mut rng), point(&mut rng), point(&mut rng)])
            .collect();
        TripleGrid { triples }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[[DomainPoint; 3]] {
        &self.triples
    }
}

/// Slack allowed when comparing a defect size against its control.
pub const CONTROL_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlReport {
    pub passed: bool,
    pub checked: usize,
    /// Smallest `α − size` over the grid.
    pub worst_margin: f64,
    /// The triple attaining `worst_margin` when the check fails.
    pub witness: Option<[Vec<f64>; 3]>,
    pub max_defect_size: f64,
    pub min_alpha: f64,
}

/// Verifies `size(defect) ≤ α + 1e-12` at every triple.
pub fn check_control(
    sizer: &Sizer,
    phi: &FunctionHandle,
    alpha: &ControlFunction,
    grid: &TripleGrid,
) -> ControlReport {
    let rows: Vec<(f64, f64)> = grid
        .triples()
        .par_iter()
        .map(|[x, y, z]| {
            let size = defect_size(sizer, phi, x, y, z).unwrap_or(f64::INFINITY);
            (size, alpha.eval(x, y, z))
        })
        .collect();
    let mut worst = f64::INFINITY;
    let mut worst_idx = None;
    let mut max_defect = 0.0f64;
    let mut min_alpha = f64::INFINITY;
    let mut passed = true;
    for (i, &(size, a)) in rows.iter().enumerate() {
        let margin = a - size;
        if !(margin >= -CONTROL_SLACK) {
            passed = false;
        }
        if margin < worst || margin.is_nan() {
            worst = margin;
            worst_idx = Some(i);
        }
        max_defect = max_defect.max(size);
        min_alpha = min_alpha.min(a);
    }
    let witness = if passed {
        None
    } else {
        worst_idx.map(|i| {
            let [x, y, z] = &grid.triples()[i];
            [
                x.coords().to_vec(),
                y.coords().to_vec(),
                z.coords().to_vec(),
            ]
        })
    };
    ControlReport {
        passed: passed && !rows.is_empty(),
        checked: rows.len(),
        worst_margin: worst,
        witness,
        max_defect_size: max_defect,
        min_alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::ModularDescriptor;

    fn p(x: f64) -> DomainPoint {
        DomainPoint::scalar(x)
    }

    fn square() -> FunctionHandle {
        FunctionHandle::scalar("x^2", |x| x * x).unwrap()
    }

    fn identity() -> FunctionHandle {
        FunctionHandle::scalar("x", |x| x).unwrap()
    }

    #[test]
    fn defect_examples() {
        assert_eq!(
            defect(&square(), &p(1.0), &p(2.0), &p(3.0)).entries(),
            &[0.0]
        );
        // hand evaluation: the additive map leaves 2(y − x)
        assert_eq!(
            defect(&identity(), &p(1.0), &p(2.0), &p(3.0)).entries(),
            &[2.0]
        );
        let abs = FunctionHandle::scalar("|x|", f64::abs).unwrap();
        assert_eq!(defect(&abs, &p(1.0), &p(1.0), &p(0.0)).entries(), &[-2.0]);
    }

    #[test]
    fn origin_must_vanish() {
        let err = FunctionHandle::scalar("x+1", |x| x + 1.0).unwrap_err();
        assert!(matches!(err, EquationError::NonzeroAtOrigin { .. }));
    }

    #[test]
    fn defect_size_examples() {
        let abs = Sizer::from(ModularDescriptor::absolute_value());
        let sq = Sizer::from(ModularDescriptor::power(2.0).unwrap());
        let t = (p(1.0), p(2.0), p(3.0));
        assert_eq!(
            defect_size(&abs, &square(), &p(-3.5), &p(2.0), &p(0.25)).unwrap(),
            0.0
        );
        assert_eq!(
            defect_size(&abs, &identity(), &t.0, &t.1, &t.2).unwrap(),
            2.0
        );
        assert_eq!(
            defect_size(&sq, &identity(), &t.0, &t.1, &t.2).unwrap(),
            4.0
        );
    }

    #[test]
    fn exact_quadratic_control_margin_is_min_alpha() {
        let abs = Sizer::from(ModularDescriptor::absolute_value());
        let alpha = ControlFunction::power(0.5, 1.0, DomainNorm::Euclidean).unwrap();
        let values = [-1.0, 0.0, 1.0, 2.0];
        let report = check_control(&abs, &square(), &alpha, &TripleGrid::lattice_1d(&values));
        assert!(report.passed);
        assert_eq!(report.worst_margin, 0.0);
        assert_eq!(report.worst_margin, report.min_alpha);
    }

    #[test]
    fn cosine_perturbation_passes_on_sampled_grid() {
        // |0.1(1 − cos)| ≤ 0.2 only gives 1.8 by the triangle bound; the
        // sampled defects are what must stay under 0.9.
        let phi =
            FunctionHandle::scalar("x^2+0.1(1-cos x)", |x| x * x + 0.1 * (1.0 - x.cos())).unwrap();
        let abs = Sizer::from(ModularDescriptor::absolute_value());
        let alpha = ControlFunction::constant(0.9).unwrap();
        let grid = TripleGrid::lattice_1d(&[-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(grid.len(), 125);
        let report = check_control(&abs, &phi, &alpha, &grid);
        assert!(report.passed, "{report:?}");
        assert!(report.max_defect_size < 0.9);
    }

    #[test]
    fn additive_map_fails_with_witness() {
        let abs = Sizer::from(ModularDescriptor::absolute_value());
        let alpha = ControlFunction::constant(1.0).unwrap();
        let grid = TripleGrid::new(vec![[p(0.0), p(0.0), p(0.0)], [p(0.0), p(2.0), p(0.0)]]);
        let report = check_control(&abs, &identity(), &alpha, &grid);
        assert!(!report.passed);
        assert_eq!(report.worst_margin, -3.0);
        assert_eq!(report.witness, Some([vec![0.0], vec![2.0], vec![0.0]]));
    }

    #[test]
    fn power_control_vanishes_at_origin() {
        let alpha = ControlFunction::power(2.0, 1.5, DomainNorm::MaxAbs).unwrap();
        let o = DomainPoint::zeros(2);
        assert_eq!(alpha.eval(&o, &o, &o), 0.0);
        let zero_exp = ControlFunction::power(2.0, 0.0, DomainNorm::MaxAbs).unwrap();
        assert_eq!(zero_exp.eval(&o, &o, &o), 0.0);
        assert!(ControlFunction::power(1.0, -1.0, DomainNorm::Euclidean).is_err());
        assert!(ControlFunction::constant(-0.1).is_err());
    }
}
