//! TOML experiment configuration and its validation.

use std::path::{Path, PathBuf};

use quadstab::{
    integer_grid, BaseNorm, ControlFunction, DomainNorm, DomainPoint, FNormDescriptor,
    InstanceSpec, ModularDescriptor, OrliczGenerator, Perturbation, SeriesMode, Sizer,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Grid coordinates must be multiples of `2^-GRID_BITS` no larger than `2^GRID_BITS`.
pub const GRID_BITS: i32 = 20;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub instance: InstanceSection,
    #[serde(default)]
    pub space: SpaceSection,
    #[serde(default)]
    pub mode: ModeSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub axioms: AxiomSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either a named preset or an inline spec.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    pub preset: Option<String>,
    pub forms: Option<Vec<Vec<Vec<f64>>>>,
    pub perturbation: Option<Perturbation>,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    #[default]
    Modular,
    Fnorm,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    #[serde(default)]
    pub kind: SpaceKind,
    /// One of [`MODULAR_NAMES`].
    pub modular: Option<String>,
    pub p: Option<f64>,
    pub beta: Option<f64>,
    pub base: Option<BaseNorm>,
}

/// Modular names accepted in `space.modular`.
pub const MODULAR_NAMES: &[&str] = &[
    "absolute-value",
    "power",
    "orlicz-power",
    "orlicz-exp-minus-one",
    "orlicz-exp-minus-one-minus-t",
    "abs-plus-one",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    #[default]
    Up,
    Down,
    Beta,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    #[serde(default)]
    pub kind: ModeKind,
    /// Δ₂ constant; defaults to the modular's declared one.
    pub tau: Option<f64>,
    /// Defaults to the F-norm's β.
    pub beta: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    /// The control fitted by the instance builder.
    #[default]
    Fitted,
    Constant,
    Power,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    #[serde(default)]
    pub kind: ControlKind,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    pub exponent: Option<f64>,
    pub norm: Option<DomainNorm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Certificate points on the line.
    pub points: Option<Vec<f64>>,
    /// Certificate points in higher dimension.
    pub vectors: Option<Vec<Vec<f64>>>,
    /// Integer grid `{lo, …, hi}^d` for the quadraticity and uniqueness checks.
    #[serde(default = "default_lo")]
    pub quadratic_lo: i64,
    #[serde(default = "default_hi")]
    pub quadratic_hi: i64,
    /// Largest `n` in the Cauchy profile.
    #[serde(default = "default_cauchy_n")]
    pub cauchy_n_max: usize,
}

fn default_lo() -> i64 {
    -4
}
fn default_hi() -> i64 {
    4
}
fn default_cauchy_n() -> usize {
    20
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            points: None,
            vectors: None,
            quadratic_lo: default_lo(),
            quadratic_hi: default_hi(),
            cauchy_n_max: default_cauchy_n(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_extraction")]
    pub extraction: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Used by the quadraticity and homogeneity checks.
    #[serde(default = "default_quadratic")]
    pub quadratic: f64,
}

fn default_extraction() -> f64 {
    1e-10
}
fn default_n_max() -> usize {
    quadstab::extractor::DEFAULT_N_MAX
}
fn default_quadratic() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            extraction: default_extraction(),
            n_max: default_n_max(),
            quadratic: default_quadratic(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxiomSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_samples() -> usize {
    200
}
fn default_radius() -> f64 {
    4.0
}
fn default_dim() -> usize {
    3
}

impl Default for AxiomSection {
    fn default() -> Self {
        AxiomSection {
            samples: default_samples(),
            radius: default_radius(),
            dim: default_dim(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// A ready-to-run configuration for one of the shipped presets.
    pub fn for_preset(name: &str) -> Result<Self, CliError> {
        let spec = quadstab::preset(name)?;
        let mut cfg = ExperimentConfig {
            instance: InstanceSection {
                preset: Some(name.into()),
                ..Default::default()
            },
            ..Default::default()
        };
        // Power perturbations converge like 2^{(s−2)n} up or 2^{(2−s)n} down.
        if let Perturbation::Power { exponent, .. } = spec.perturbation {
            cfg.tolerances.n_max = quadstab::extractor::N_MAX_LIMIT;
            if exponent >= 2.0 {
                cfg.mode.kind = ModeKind::Down;
                cfg.grid.points = Some(vec![-2.0, -1.0, 1.0, 2.0]);
            } else {
                cfg.tolerances.extraction = 1e-9;
            }
        }
        Ok(cfg)
    }

    /// Resolves the instance spec, applying `seed` over the configured one.
    pub fn instance_spec(&self, seed: Option<u64>) -> Result<InstanceSpec, CliError> {
        let sec = &self.instance;
        let mut spec = match (&sec.preset, &sec.forms) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "instance",
                    "give either `preset` or `forms`, not both",
                ))
            }
            (None, None) => return Err(invalid("instance", "missing `preset` or `forms`")),
            (Some(name), None) => {
                if sec.perturbation.is_some() {
                    return Err(invalid(
                        "instance.perturbation",
                        "cannot be combined with `preset`",
                    ));
                }
                quadstab::preset(name).map_err(|e| invalid("instance.preset", e.to_string()))?
            }
            (None, Some(forms)) => InstanceSpec {
                forms: forms.clone(),
                perturbation: sec.perturbation.clone().unwrap_or(Perturbation::None),
                seed: 0,
            },
        };
        if let Some(s) = sec.seed {
            spec.seed = s;
        }
        if let Some(s) = seed {
            spec.seed = s;
        }
        if spec.dim() == 0 {
            return Err(invalid("instance.forms", "no forms given"));
        }
        Ok(spec)
    }

    pub fn sizer(&self) -> Result<Sizer, CliError> {
        let sp = &self.space;
        match sp.kind {
            SpaceKind::Modular => {
                if sp.beta.is_some() || sp.base.is_some() {
                    return Err(invalid("space", "`beta` and `base` apply to F-norm spaces"));
                }
                let name = sp.modular.as_deref().unwrap_or("absolute-value");
                let need_p = || {
                    sp.p.ok_or_else(|| invalid("space.p", format!("required by `{name}`")))
                };
                let bad = |e: quadstab::ModularError| invalid("space.p", e.to_string());
                let m = match name {
                    "absolute-value" => ModularDescriptor::absolute_value(),
                    "power" => ModularDescriptor::power(need_p()?).map_err(bad)?,
                    "orlicz-power" => {
                        ModularDescriptor::orlicz(OrliczGenerator::Power { p: need_p()? })
                            .map_err(bad)?
                    }
                    "orlicz-exp-minus-one" => {
                        ModularDescriptor::orlicz(OrliczGenerator::ExpMinusOne).map_err(bad)?
                    }
                    "orlicz-exp-minus-one-minus-t" => {
                        ModularDescriptor::orlicz(OrliczGenerator::ExpMinusOneMinusT)
                            .map_err(bad)?
                    }
                    "abs-plus-one" => abs_plus_one(),
                    other => {
                        return Err(invalid(
                            "space.modular",
                            format!("unknown modular `{other}`; expected one of {MODULAR_NAMES:?}"),
                        ))
                    }
                };
                Ok(m.into())
            }
            SpaceKind::Fnorm => {
                if sp.modular.is_some() || sp.p.is_some() {
                    return Err(invalid(
                        "space",
                        "`modular` and `p` apply to modular spaces",
                    ));
                }
                let f = FNormDescriptor::new(
                    sp.beta.unwrap_or(1.0),
                    sp.base.unwrap_or(BaseNorm::Euclidean),
                );
                if !f.is_valid() {
                    return Err(invalid(
                        "space.beta",
                        format!("β = {}, need 0 < β ≤ 1", f.beta),
                    ));
                }
                Ok(f.into())
            }
        }
    }

    pub fn series_mode(&self, sizer: &Sizer) -> Result<SeriesMode, CliError> {
        let m = &self.mode;
        let mode = match m.kind {
            ModeKind::Up => {
                if m.tau.is_some() || m.beta.is_some() {
                    return Err(invalid("mode", "up mode takes no `tau` or `beta`"));
                }
                SeriesMode::Up
            }
            ModeKind::Down => {
                let Sizer::Modular(md) = sizer else {
                    return Err(invalid("mode.kind", "down mode needs a modular space"));
                };
                let tau = m
                    .tau
                    .or(md.delta2_tau())
                    .ok_or_else(|| invalid("mode.tau", "modular declares no Δ₂ constant"))?;
                SeriesMode::Down { tau }
            }
            ModeKind::Beta => {
                let Sizer::FNorm(f) = sizer else {
                    return Err(invalid("mode.kind", "beta mode needs an F-norm space"));
                };
                if let Some(b) = m.beta {
                    if b != f.beta {
                        return Err(invalid(
                            "mode.beta",
                            format!("β = {b} differs from the space's β = {}", f.beta),
                        ));
                    }
                }
                SeriesMode::Beta { beta: f.beta }
            }
        };
        mode.validate().map_err(|e| {
            let field = if matches!(mode, SeriesMode::Beta { .. }) {
                "mode.beta"
            } else {
                "mode.tau"
            };
            invalid(field, e.to_string())
        })?;
        Ok(mode)
    }

    /// Shape of the control, known before the instance is built.
    ///
    /// Fitted controls take their family from the perturbation; the scale is
    /// irrelevant to convergence of the series.
    pub fn control_shape(&self, spec: &InstanceSpec) -> Result<ControlFunction, CliError> {
        let c = &self.control;
        let norm = c.norm.unwrap_or_default();
        fn bad(field: &'static str) -> impl Fn(quadstab::EquationError) -> CliError {
            move |e| invalid(field, e.to_string())
        }
        Ok(match c.kind {
            ControlKind::Fitted => {
                if c.epsilon.is_some() || c.theta.is_some() || c.exponent.is_some() {
                    return Err(invalid("control", "parameters given for a fitted control"));
                }
                match spec.perturbation {
                    Perturbation::None => ControlFunction::constant(0.0).map_err(bad("control"))?,
                    Perturbation::Bounded { delta } => {
                        ControlFunction::constant(if delta == 0.0 { 0.0 } else { 1.0 })
                            .map_err(bad("control"))?
                    }
                    Perturbation::Saturating { epsilon } => {
                        ControlFunction::constant(if epsilon == 0.0 { 0.0 } else { 1.0 })
                            .map_err(bad("control"))?
                    }
                    Perturbation::Power {
                        delta, exponent, ..
                    } => ControlFunction::power(
                        if delta == 0.0 { 0.0 } else { 1.0 },
                        exponent.max(0.0),
                        DomainNorm::Euclidean,
                    )
                    .map_err(bad("control"))?,
                }
            }
            ControlKind::Constant => {
                let eps = c
                    .epsilon
                    .ok_or_else(|| invalid("control.epsilon", "required"))?;
                ControlFunction::constant(eps).map_err(bad("control.epsilon"))?
            }
            ControlKind::Power => {
                let theta = c
                    .theta
                    .ok_or_else(|| invalid("control.theta", "required"))?;
                let p = c
                    .exponent
                    .ok_or_else(|| invalid("control.exponent", "required"))?;
                ControlFunction::power(theta, p, norm).map_err(bad("control"))?
            }
        })
    }

    /// Rejects controls whose series diverges in `mode`.
    pub fn check_mode_control(
        &self,
        mode: SeriesMode,
        shape: &ControlFunction,
    ) -> Result<(), CliError> {
        if shape.is_identically_zero() {
            return Ok(());
        }
        if let Some(ratio) = mode.closed_form_ratio(shape) {
            if !(ratio < 1.0) {
                return Err(CliError::Divergent {
                    field: "control".into(),
                    message: format!(
                        "divergent series: {} in {} mode has term ratio {ratio} ≥ 1",
                        family(shape),
                        mode_name(mode)
                    ),
                });
            }
        }
        Ok(())
    }

    /// The explicit control, if one is configured.
    pub fn explicit_control(
        &self,
        spec: &InstanceSpec,
    ) -> Result<Option<ControlFunction>, CliError> {
        match self.control.kind {
            ControlKind::Fitted => Ok(None),
            _ => self.control_shape(spec).map(Some),
        }
    }

    /// Certificate grid, checked against the instance dimension.
    pub fn certificate_grid(&self, dim: usize) -> Result<Vec<DomainPoint>, CliError> {
        let g = &self.grid;
        let points: Vec<Vec<f64>> = match (&g.points, &g.vectors) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "grid",
                    "give either `points` or `vectors`, not both",
                ))
            }
            (Some(p), None) => {
                if dim != 1 {
                    return Err(invalid(
                        "grid.points",
                        format!("scalar points for a {dim}-dimensional domain"),
                    ));
                }
                p.iter().map(|&x| vec![x]).collect()
            }
            (None, Some(v)) => {
                if let Some(bad) = v.iter().find(|p| p.len() != dim) {
                    return Err(invalid(
                        "grid.vectors",
                        format!("point {bad:?} is not {dim}-dimensional"),
                    ));
                }
                v.clone()
            }
            (None, None) if dim == 1 => [-4.0, -2.0, -1.0, 1.0, 2.0, 4.0]
                .iter()
                .map(|&x| vec![x])
                .collect(),
            (None, None) => integer_grid(dim, -2, 2)
                .into_iter()
                .filter(|p| !p.is_zero())
                .map(|p| p.coords().to_vec())
                .collect(),
        };
        if points.is_empty() {
            return Err(invalid("grid.points", "empty grid"));
        }
        let field = if g.vectors.is_some() {
            "grid.vectors"
        } else {
            "grid.points"
        };
        for p in &points {
            for &c in p {
                if !is_grid_representable(c) {
                    return Err(invalid(
                        field,
                        format!("{c} is not a multiple of 2^-{GRID_BITS} within ±2^{GRID_BITS}"),
                    ));
                }
            }
        }
        Ok(points.into_iter().map(DomainPoint::new).collect())
    }

    pub fn quadratic_grid(&self, dim: usize) -> Result<Vec<DomainPoint>, CliError> {
        let g = &self.grid;
        if g.quadratic_lo > g.quadratic_hi {
            return Err(invalid(
                "grid.quadratic_lo",
                "must not exceed `quadratic_hi`",
            ));
        }
        if g.quadratic_lo < -64 || g.quadratic_hi > 64 {
            return Err(invalid("grid.quadratic_hi", "bounds must lie in [-64, 64]"));
        }
        Ok(integer_grid(dim, g.quadratic_lo, g.quadratic_hi))
    }

    pub fn validate_tolerances(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        if !(t.extraction.is_finite() && t.extraction > 0.0) {
            return Err(invalid(
                "tolerances.extraction",
                format!("{} is not positive", t.extraction),
            ));
        }
        if !(t.quadratic.is_finite() && t.quadratic > 0.0) {
            return Err(invalid(
                "tolerances.quadratic",
                format!("{} is not positive", t.quadratic),
            ));
        }
        if t.n_max > quadstab::extractor::N_MAX_LIMIT {
            return Err(invalid(
                "tolerances.n_max",
                format!("{} exceeds {}", t.n_max, quadstab::extractor::N_MAX_LIMIT),
            ));
        }
        if self.grid.cauchy_n_max > quadstab::extractor::N_MAX_LIMIT {
            return Err(invalid(
                "grid.cauchy_n_max",
                format!("exceeds {}", quadstab::extractor::N_MAX_LIMIT),
            ));
        }
        let a = &self.axioms;
        if a.samples == 0 || a.dim == 0 || !(a.radius.is_finite() && a.radius > 0.0) {
            return Err(invalid(
                "axioms",
                "samples, dim and radius must be positive",
            ));
        }
        Ok(())
    }
}

/// `c` is a multiple of `2^-20` with `|c| ≤ 2^20`, so sums and doublings on
/// the grid stay exact.
pub fn is_grid_representable(c: f64) -> bool {
    let scaled = c * 2f64.powi(GRID_BITS);
    c.is_finite() && c.abs() <= 2f64.powi(GRID_BITS) && scaled.fract() == 0.0
}

fn family(c: &ControlFunction) -> String {
    match c {
        ControlFunction::Constant { .. } => "constant control".into(),
        ControlFunction::Power { exponent, .. } => {
            format!("power control with exponent {exponent}")
        }
        ControlFunction::Custom(_) => "custom control".into(),
    }
}

pub fn mode_name(mode: SeriesMode) -> &'static str {
    match mode {
        SeriesMode::Up => "up",
        SeriesMode::Down { .. } => "down",
        SeriesMode::Beta { .. } => "beta",
    }
}

/// `ρ(u) = Σ|u_i| + 1`, which violates the zero axiom.
pub fn abs_plus_one() -> ModularDescriptor {
    ModularDescriptor::custom("abs-plus-one", true, Some(2.0), |u| {
        let mut s = 1.0;
        for c in u.entries() {
            s += c.abs();
        }
        s
    })
    .expect("valid declaration")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [instance]
            preset = "bounded-0.1-seed1"
            [grid]
            points = [-1.0, 1.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.tolerances.extraction, 1e-10);
        assert_eq!(cfg.mode.kind, ModeKind::Up);
        let spec = cfg.instance_spec(None).unwrap();
        assert_eq!(spec.seed, 1);
        assert_eq!(cfg.instance_spec(Some(7)).unwrap().seed, 7);
        assert_eq!(cfg.certificate_grid(1).unwrap().len(), 2);
    }

    #[test]
    fn unknown_field_is_named() {
        let err = ExperimentConfig::from_toml("[tolerances]\nextracton = 1e-9\n").unwrap_err();
        assert!(err.to_string().contains("extracton"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn inline_instance() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [instance]
            forms = [[[1.0, 0.0], [0.0, 2.0]]]
            perturbation = { kind = "bounded", delta = 0.05 }
            seed = 4
            "#,
        )
        .unwrap();
        let spec = cfg.instance_spec(None).unwrap();
        assert_eq!(spec.dim(), 2);
        assert_eq!(spec.perturbation, Perturbation::Bounded { delta: 0.05 });
        assert_eq!(cfg.certificate_grid(2).unwrap().len(), 24);
    }

    #[test]
    fn grid_points_must_be_dyadic() {
        assert!(is_grid_representable(0.75));
        assert!(is_grid_representable(-1024.0));
        assert!(!is_grid_representable(0.1));
        assert!(!is_grid_representable(f64::NAN));
        let mut cfg = ExperimentConfig::for_preset("exact-square").unwrap();
        cfg.grid.points = Some(vec![1.0, 0.1]);
        match cfg.certificate_grid(1).unwrap_err() {
            CliError::Config { field, .. } => assert_eq!(field, "grid.points"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn down_mode_constant_is_divergent() {
        let mut cfg = ExperimentConfig::for_preset("bounded-0.1-seed1").unwrap();
        cfg.mode.kind = ModeKind::Down;
        let spec = cfg.instance_spec(None).unwrap();
        let sizer = cfg.sizer().unwrap();
        let mode = cfg.series_mode(&sizer).unwrap();
        assert_eq!(mode, SeriesMode::Down { tau: 2.0 });
        let err = cfg
            .check_mode_control(mode, &cfg.control_shape(&spec).unwrap())
            .unwrap_err();
        assert!(err.to_string().contains("divergent series"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn power_ratios_gate_modes() {
        let cfg = ExperimentConfig::for_preset("power-r3-tau2").unwrap();
        let spec = cfg.instance_spec(None).unwrap();
        let shape = cfg.control_shape(&spec).unwrap();
        // r = 3: up ratio 8/4, down ratio 8/16
        assert!(cfg.check_mode_control(SeriesMode::Up, &shape).is_err());
        assert!(cfg
            .check_mode_control(SeriesMode::Down { tau: 2.0 }, &shape)
            .is_ok());
        let exact = ExperimentConfig::for_preset("exact-square").unwrap();
        let zero = exact
            .control_shape(&exact.instance_spec(None).unwrap())
            .unwrap();
        assert!(exact
            .check_mode_control(SeriesMode::Down { tau: 2.0 }, &zero)
            .is_ok());
    }

    #[test]
    fn space_validation() {
        let mut cfg = ExperimentConfig::default();
        cfg.space.modular = Some("power".into());
        match cfg.sizer().unwrap_err() {
            CliError::Config { field, .. } => assert_eq!(field, "space.p"),
            e => panic!("{e}"),
        }
        cfg.space = SpaceSection {
            kind: SpaceKind::Fnorm,
            beta: Some(1.5),
            ..Default::default()
        };
        match cfg.sizer().unwrap_err() {
            CliError::Config { field, .. } => assert_eq!(field, "space.beta"),
            e => panic!("{e}"),
        }
        cfg.space.beta = Some(0.5);
        let sizer = cfg.sizer().unwrap();
        cfg.mode.kind = ModeKind::Beta;
        assert_eq!(
            cfg.series_mode(&sizer).unwrap(),
            SeriesMode::Beta { beta: 0.5 }
        );
        cfg.mode.kind = ModeKind::Down;
        assert!(cfg.series_mode(&sizer).is_err());
    }

    #[test]
    fn toml_round_trip() {
        for name in quadstab::lab::PRESETS {
            let cfg = ExperimentConfig::for_preset(name).unwrap();
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
    }

    #[test]
    fn abs_plus_one_breaks_zero() {
        let m = abs_plus_one();
        assert_eq!(
            quadstab::eval_modular(&m, &quadstab::CodomainVector::scalar(-2.0)).unwrap(),
            3.0
        );
    }
}
