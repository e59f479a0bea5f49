//! Seeded generators of approximately quadratic maps with fitted controls.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equation::{
    defect_scalar, defect_size, ControlFunction, EquationError, FunctionHandle, TripleGrid,
};
use crate::extractor::{extract_up, ExtractError, ExtractionConfig};
use crate::modular::ModularDescriptor;
use crate::series::{series_up, SeriesError, SeriesMode, DEFAULT_CAP};
use crate::space::{SizeError, Sizer};
use crate::sum::compensated_sum;
use crate::vector::{CodomainVector, DomainNorm, DomainPoint};

/// Safety factor applied to measured power-control ratios.
pub const THETA_SAFETY: f64 = 1.05;
/// Power fits need at least this many triples.
pub const MIN_FIT_TRIPLES: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("form {component} is not symmetric at ({i}, {j})")]
    Asymmetric {
        component: usize,
        i: usize,
        j: usize,
    },
    #[error("form dimensions disagree: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("triple grid has {triples} triples, need at least {MIN_FIT_TRIPLES}")]
    GridTooSmall { triples: usize },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error(transparent)]
    Size(#[from] SizeError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `φ(x) = (xᵀM₁x, …, xᵀMₑx)`, one symmetric matrix per codomain component.
pub fn make_quadratic(forms: &[Vec<Vec<f64>>]) -> Result<FunctionHandle, LabError> {
    let dim = forms
        .first()
        .map(|m| m.len())
        .ok_or_else(|| LabError::DimensionMismatch("no forms given".into()))?;
    if dim == 0 {
        return Err(LabError::DimensionMismatch("empty matrix".into()));
    }
    for (c, m) in forms.iter().enumerate() {
        if m.len() != dim || m.iter().any(|row| row.len() != dim) {
            return Err(LabError::DimensionMismatch(format!(
                "form {c} is not {dim}×{dim}"
            )));
        }
        for i in 0..dim {
            for j in 0..dim {
                if !m[i][j].is_finite() {
                    return Err(LabError::InvalidParameter(format!(
                        "form {c} entry ({i}, {j})"
                    )));
                }
                if m[i][j] != m[j][i] {
                    return Err(LabError::Asymmetric { component: c, i, j });
                }
            }
        }
    }
    let forms: Arc<Vec<Vec<Vec<f64>>>> = Arc::new(forms.to_vec());
    let label = format!("quadratic form ({} components)", forms.len());
    let codim = forms.len();
    Ok(FunctionHandle::new(label, dim, codim, move |x| {
        let c = x.coords();
        CodomainVector::new(
            forms
                .iter()
                .map(|m| {
                    compensated_sum(
                        (0..c.len())
                            .flat_map(|i| (0..c.len()).map(move |j| (i, j)))
                            .map(|(i, j)| c[i] * m[i][j] * c[j]),
                    )
                })
                .collect(),
        )
    })?)
}

/// `w(x) = Σ c_k(1 − cos⟨ω_k, x⟩) / (2Σc_k)`: even, `w(0) = 0`, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationProfile {
    pub weights: Vec<f64>,
    pub frequencies: Vec<Vec<f64>>,
}

impl OscillationProfile {
    pub const TERMS: usize = 3;

    pub fn seeded(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(Self::TERMS);
        let mut frequencies = Vec::with_capacity(Self::TERMS);
        for _ in 0..Self::TERMS {
            weights.push(rng.gen_range(0.2..=1.0));
            frequencies.push(
                (0..dim)
                    .map(|_| {
                        let w: f64 = rng.gen_range(0.5..=2.5);
                        if rng.gen_bool(0.5) {
                            -w
                        } else {
                            w
                        }
                    })
                    .collect(),
            );
        }
        OscillationProfile {
            weights,
            frequencies,
        }
    }

    pub fn eval(&self, x: &DomainPoint) -> f64 {
        let total: f64 = self.weights.iter().sum();
        let s = compensated_sum(self.weights.iter().zip(&self.frequencies).map(|(c, w)| {
            let phase = compensated_sum(w.iter().zip(x.coords()).map(|(a, b)| a * b));
            c * (1.0 - phase.cos())
        }));
        (s / (2.0 * total)).clamp(0.0, 1.0)
    }
}

/// Shape of the multiplier in a power perturbation `δ‖x‖^s·w(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Modulation {
    /// `w ≡ 1`
    Unit,
    /// `w = 1 − ½·osc`, values in `[½, 1]`
    #[default]
    Seeded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    None,
    Bounded {
        delta: f64,
    },
    Power {
        delta: f64,
        exponent: f64,
        #[serde(default)]
        modulation: Modulation,
    },
    Saturating {
        epsilon: f64,
    },
}

/// Declarative description of a test instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    /// One symmetric matrix per codomain component.
    pub forms: Vec<Vec<Vec<f64>>>,
    pub perturbation: Perturbation,
    #[serde(default)]
    pub seed: u64,
}

impl InstanceSpec {
    pub fn dim(&self) -> usize {
        self.forms.first().map(|m| m.len()).unwrap_or(0)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        InstanceSpec {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationInfo {
    pub profile: String,
    /// Measured defect sup of the unscaled profile over the lattice.
    pub profile_defect_sup: f64,
    /// `measured / bound` at `x = 1`; `None` for the degenerate `ε = 0` case.
    pub ratio: Option<f64>,
    pub measured: f64,
    pub bound: f64,
}

/// A generated map with its fitted control and the triples it was fitted on.
#[derive(Clone, Debug)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub phi: FunctionHandle,
    pub control: ControlFunction,
    pub triples: TripleGrid,
    pub measured_defect_sup: f64,
    /// Loose triangle-inequality value of the control parameter (ε or θ).
    pub analytic_parameter: Option<f64>,
    pub saturation: Option<SaturationInfo>,
}

fn add_scalar_perturbation(
    phi0: &FunctionHandle,
    label: String,
    g: impl Fn(&DomainPoint) -> f64 + Send + Sync + 'static,
) -> Result<FunctionHandle, LabError> {
    let base = phi0.clone();
    Ok(FunctionHandle::new(
        label,
        phi0.domain_dim(),
        phi0.codomain_dim(),
        move |x| {
            let v = base.eval(x);
            let gx = g(x);
            CodomainVector::new(v.entries().iter().map(|e| e + gx).collect())
        },
    )?)
}

/// Random triples on a quarter-step lattice plus the dyadic diagonals
/// `(2^k v, 2^k v, 0)` through the integer points `v ∈ {−4, …, 4}^d`.
pub fn declared_triples(dim: usize, seed: u64) -> TripleGrid {
    let mut triples = TripleGrid::random(dim, 512, 4.0, seed ^ 0x5eed)
        .triples()
        .to_vec();
    let zero = DomainPoint::zeros(dim);
    for v in crate::quadratic::integer_grid(dim, -4, 4) {
        if v.is_zero() {
            continue;
        }
        for k in -12..=28 {
            let p = v.scale(2f64.powi(k));
            triples.push([p.clone(), p, zero.clone()]);
        }
    }
    TripleGrid::new(triples)
}

fn defect_sup(sizer: &Sizer, phi: &FunctionHandle, grid: &TripleGrid) -> Result<f64, LabError> {
    let sizes: Vec<Result<f64, SizeError>> = grid
        .triples()
        .par_iter()
        .map(|[x, y, z]| defect_size(sizer, phi, x, y, z))
        .collect();
    let mut sup = 0.0f64;
    for s in sizes {
        sup = sup.max(s?);
    }
    Ok(sup)
}

/// Adds `δ·w(x)` to every component and fits the constant control
/// `ε = size(9δ·𝟙)`.
pub fn perturb_bounded(
    phi0: &FunctionHandle,
    delta: f64,
    seed: u64,
    sizer: &Sizer,
    grid: &TripleGrid,
) -> Result<Instance, LabError> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(LabError::InvalidParameter(format!("δ = {delta}")));
    }
    let phi = if delta == 0.0 {
        phi0.clone()
    } else {
        let w = OscillationProfile::seeded(phi0.domain_dim(), seed);
        add_scalar_perturbation(
            phi0,
            format!("{} + {delta}·osc[seed {seed}]", phi0.label()),
            move |x| delta * w.eval(x),
        )?
    };
    let epsilon = sizer.size(&CodomainVector::splat(phi0.codomain_dim(), 9.0 * delta))?;
    let measured = defect_sup(sizer, &phi, grid)?;
    Ok(Instance {
        spec: InstanceSpec {
            forms: Vec::new(),
            perturbation: Perturbation::Bounded { delta },
            seed,
        },
        phi,
        control: ControlFunction::constant(epsilon)?,
        triples: grid.clone(),
        measured_defect_sup: measured,
        analytic_parameter: Some(epsilon),
        saturation: None,
    })
}

/// Adds `δ‖x‖^s·w(x)` to every component and fits `θ` as 1.05 times the
/// largest measured `size(defect)/Σ‖·‖^s` over `grid`.
pub fn perturb_power(
    phi0: &FunctionHandle,
    delta: f64,
    exponent: f64,
    modulation: Modulation,
    seed: u64,
    sizer: &Sizer,
    grid: &TripleGrid,
) -> Result<Instance, LabError> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(LabError::InvalidParameter(format!("δ = {delta}")));
    }
    if !(exponent.is_finite() && exponent >= 0.0) {
        return Err(LabError::InvalidParameter(format!("s = {exponent}")));
    }
    if grid.len() < MIN_FIT_TRIPLES {
        return Err(LabError::GridTooSmall {
            triples: grid.len(),
        });
    }
    let norm = DomainNorm::Euclidean;
    let phi = if delta == 0.0 {
        phi0.clone()
    } else {
        let osc = OscillationProfile::seeded(phi0.domain_dim(), seed);
        let label = match modulation {
            Modulation::Unit => format!("{} + {delta}‖x‖^{exponent}", phi0.label()),
            Modulation::Seeded => {
                format!("{} + {delta}‖x‖^{exponent}·w[seed {seed}]", phi0.label())
            }
        };
        add_scalar_perturbation(phi0, label, move |x| {
            let r = x.norm(norm);
            if r == 0.0 {
                return 0.0;
            }
            let w = match modulation {
                Modulation::Unit => 1.0,
                Modulation::Seeded => 1.0 - 0.5 * osc.eval(x),
            };
            delta * r.powf(exponent) * w
        })?
    };
    let unit = ControlFunction::power(1.0, exponent, norm)?;
    let ratios: Vec<Result<Option<(f64, f64)>, SizeError>> = grid
        .triples()
        .par_iter()
        .map(|[x, y, z]| {
            let a = unit.eval(x, y, z);
            let d = defect_size(sizer, &phi, x, y, z)?;
            Ok((a > 0.0).then_some((d / a, d)))
        })
        .collect();
    let mut sup_ratio = 0.0f64;
    let mut sup_defect = 0.0f64;
    for r in ratios {
        if let Some((q, d)) = r? {
            sup_ratio = sup_ratio.max(q);
            sup_defect = sup_defect.max(d);
        }
    }
    let theta = THETA_SAFETY * sup_ratio;
    let s = exponent;
    let triangle = 3.0 * 3f64.powf(s - 1.0).max(1.0) + 2.0 * 2f64.powf(s - 1.0).max(1.0) + 1.0;
    Ok(Instance {
        spec: InstanceSpec {
            forms: Vec::new(),
            perturbation: Perturbation::Power {
                delta,
                exponent,
                modulation,
            },
            seed,
        },
        phi,
        control: ControlFunction::power(theta, exponent, norm)?,
        triples: grid.clone(),
        measured_defect_sup: sup_defect,
        analytic_parameter: Some(delta * triangle * phi0.codomain_dim() as f64),
        saturation: None,
    })
}

/// Lattice for the saturating instance: `±(1 + i/4)·2^e`, `i ∈ 0..4`, `e ∈ −3..=3`, and 0.
pub fn saturation_lattice() -> Vec<f64> {
    let mut v = vec![0.0];
    for e in -3..=3 {
        for i in 0..4 {
            let a = (1.0 + i as f64 / 4.0) * 2f64.powi(e);
            v.push(a);
            v.push(-a);
        }
    }
    v
}

/// Half-dyadic bins `[2^k(1 + j/2), 2^k(1 + (j+1)/2))`, `k ∈ −3..=3`, `j ∈ {0, 1}`.
const SHELL_MIN: i32 = -3;
const SHELL_MAX: i32 = 3;
const BINS: usize = 2 * (SHELL_MAX - SHELL_MIN + 1) as usize;

fn bin_of(t: f64) -> Option<usize> {
    let a = t.abs();
    if a == 0.0 || !a.is_finite() {
        return None;
    }
    let mut k = a.log2().floor() as i32;
    while 2f64.powi(k) > a {
        k -= 1;
    }
    while 2f64.powi(k + 1) <= a {
        k += 1;
    }
    if !(SHELL_MIN..=SHELL_MAX).contains(&k) {
        return None;
    }
    let j = ((a / 2f64.powi(k) - 1.0) * 2.0).floor() as usize;
    Some(2 * (k - SHELL_MIN) as usize + j.min(1))
}

/// A profile constant on each bin, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
struct ShellProfile {
    label: String,
    values: [f64; BINS],
}

impl ShellProfile {
    fn eval(&self, t: f64) -> f64 {
        bin_of(t).map_or(0.0, |b| self.values[b])
    }

    fn family(seed: u64) -> Vec<ShellProfile> {
        let mut out = Vec::new();
        let mut shell = [0.0; BINS];
        let one = bin_of(1.0).expect("1 lies in a bin");
        shell[one] = 1.0;
        shell[one + 1] = 1.0;
        out.push(ShellProfile {
            label: "shell[1,2)".into(),
            values: shell,
        });

        let tuned = [0, 0, 0, 0, 132, 132, 744, 420, 516, 192, 480, 408, 360, 381];
        let mut values = [0.0; BINS];
        for (v, t) in values.iter_mut().zip(tuned) {
            *v = t as f64 / 820.0;
        }
        out.push(ShellProfile {
            label: "tuned-bins".into(),
            values,
        });

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for r in 0..3 {
            let mut values = [0.0; BINS];
            for v in values.iter_mut() {
                *v = rng.gen_range(0.0..=1.0);
            }
            values[one] = 1.0;
            out.push(ShellProfile {
                label: format!("random-bins[{r}]"),
                values,
            });
        }
        out
    }
}

/// `max |defect|` over all triples drawn from `values`.
fn scalar_defect_sup(f: impl Fn(f64) -> f64, values: &[f64]) -> f64 {
    let mut sup = 0.0f64;
    for &x in values {
        for &y in values {
            for &z in values {
                sup = sup.max(defect_scalar(&f, x, y, z).abs());
            }
        }
    }
    sup
}

fn scalar_abs() -> Sizer {
    ModularDescriptor::absolute_value().into()
}

/// `φ(x) = x² + (ε/D)·q(x)` where `q` is the member of a small family of
/// shell profiles whose measured ratio `|φ(1) − h(1)| / (ε/3)` is largest
/// and `D` is its defect sup over [`saturation_lattice`].
pub fn saturating_instance(epsilon: f64, seed: u64) -> Result<Instance, LabError> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(LabError::InvalidParameter(format!("ε = {epsilon}")));
    }
    let lattice = TripleGrid::lattice_1d(&saturation_lattice());
    let square = make_quadratic(&[vec![vec![1.0]]])?;
    let spec = InstanceSpec {
        forms: vec![vec![vec![1.0]]],
        perturbation: Perturbation::Saturating { epsilon },
        seed,
    };
    let sizer = scalar_abs();
    if epsilon == 0.0 {
        return Ok(Instance {
            spec,
            phi: square,
            control: ControlFunction::constant(0.0)?,
            triples: lattice,
            measured_defect_sup: 0.0,
            analytic_parameter: None,
            saturation: Some(SaturationInfo {
                profile: "none".into(),
                profile_defect_sup: 0.0,
                ratio: None,
                measured: 0.0,
                bound: 0.0,
            }),
        });
    }
    let one = DomainPoint::scalar(1.0);
    let bound = series_up(
        &ControlFunction::constant(epsilon)?,
        &one,
        &one,
        &DomainPoint::zeros(1),
        1e-14,
        DEFAULT_CAP,
    )?
    .value;

    let values = saturation_lattice();
    let mut best: Option<(f64, Instance)> = None;
    for profile in ShellProfile::family(seed) {
        let d = scalar_defect_sup(|t| profile.eval(t), &values);
        if d == 0.0 {
            continue;
        }
        let scale = epsilon / d;
        let q = profile.clone();
        let phi =
            FunctionHandle::scalar(format!("x^2 + {epsilon}/D·{}", profile.label), move |t| {
                t * t + scale * q.eval(t)
            })?;
        let cfg = ExtractionConfig::new(SeriesMode::Up, 1e-13).with_trace(false);
        let h = extract_up(&sizer, &phi, &one, &cfg)?;
        let measured = sizer.size(&phi.eval(&one).sub(&h.value))?;
        let ratio = measured / bound;
        if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
            let measured_sup =
                scalar_defect_sup(|t| phi.eval(&DomainPoint::scalar(t)).entries()[0], &values);
            best = Some((
                ratio,
                Instance {
                    spec: spec.clone(),
                    phi,
                    control: ControlFunction::constant(epsilon)?,
                    triples: lattice.clone(),
                    measured_defect_sup: measured_sup,
                    analytic_parameter: None,
                    saturation: Some(SaturationInfo {
                        profile: profile.label.clone(),
                        profile_defect_sup: d,
                        ratio: Some(ratio),
                        measured,
                        bound,
                    }),
                },
            ));
        }
    }
    best.map(|(_, inst)| inst)
        .ok_or_else(|| LabError::InvalidParameter("no profile with a nonzero defect".into()))
}

/// Builds the instance described by `spec`, fitting its control under `sizer`.
pub fn build_instance(spec: &InstanceSpec, sizer: &Sizer) -> Result<Instance, LabError> {
    let finish = |mut inst: Instance| {
        inst.spec = spec.clone();
        Ok(inst)
    };
    if let Perturbation::Saturating { epsilon } = spec.perturbation {
        if spec.forms != vec![vec![vec![1.0]]] {
            return Err(LabError::InvalidParameter(
                "saturating instances perturb x² on the line".into(),
            ));
        }
        return finish(saturating_instance(epsilon, spec.seed)?);
    }
    let phi0 = make_quadratic(&spec.forms)?;
    let grid = declared_triples(phi0.domain_dim(), spec.seed);
    match spec.perturbation {
        Perturbation::None | Perturbation::Bounded { delta: 0.0 } => {
            finish(perturb_bounded(&phi0, 0.0, spec.seed, sizer, &grid)?)
        }
        Perturbation::Bounded { delta } => {
            finish(perturb_bounded(&phi0, delta, spec.seed, sizer, &grid)?)
        }
        Perturbation::Power {
            delta,
            exponent,
            modulation,
        } => finish(perturb_power(
            &phi0, delta, exponent, modulation, spec.seed, sizer, &grid,
        )?),
        Perturbation::Saturating { .. } => unreachable!(),
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &[
    "exact-square",
    "bounded-0.1-seed1",
    "power-r3-tau2",
    "power-s1-seed1",
    "saturating-0.3",
    "plane-bounded-0.05",
    "plane-pair-bounded-0.05",
];

pub fn preset(name: &str) -> Result<InstanceSpec, LabError> {
    let square = vec![vec![vec![1.0]]];
    let plane = vec![vec![1.0, 1.0], vec![1.0, 2.0]];
    let spec = |forms, perturbation, seed| InstanceSpec {
        forms,
        perturbation,
        seed,
    };
    Ok(match name {
        "exact-square" => spec(square, Perturbation::None, 0),
        "bounded-0.1-seed1" => spec(square, Perturbation::Bounded { delta: 0.1 }, 1),
        "power-r3-tau2" => spec(
            square,
            Perturbation::Power {
                delta: 0.01,
                exponent: 3.0,
                modulation: Modulation::Unit,
            },
            0,
        ),
        "power-s1-seed1" => spec(
            square,
            Perturbation::Power {
                delta: 0.01,
                exponent: 1.0,
                modulation: Modulation::Seeded,
            },
            1,
        ),
        "saturating-0.3" => spec(square, Perturbation::Saturating { epsilon: 0.3 }, 0),
        "plane-bounded-0.05" => spec(vec![plane], Perturbation::Bounded { delta: 0.05 }, 3),
        "plane-pair-bounded-0.05" => spec(
            vec![plane, vec![vec![2.0, 0.0], vec![0.0, -1.0]]],
            Perturbation::Bounded { delta: 0.05 },
            3,
        ),
        other => return Err(LabError::UnknownPreset(other.to_string())),
    })
}
