//! Numerical stability lab for the nine-term quadratic functional equation
//!
//! ```text
//! φ(x+y−z) + φ(x+z−y) + φ(y+z−x) = φ(x−y) + φ(x−z) + φ(z−y) + φ(x) + φ(y) + φ(z)
//! ```
//!
//! in modular spaces and β-homogeneous F-normed spaces.
//!
//! Given a map whose defect is bounded by a control `α(x, y, z)`, the lab
//! extracts the nearby quadratic map `h` by the direct method
//! (`φ(2ⁿx)/4ⁿ` or `4ⁿφ(x/2ⁿ)`), certifies `size(φ(x) − h(x))` against the
//! control series, and checks that `h` is quadratic on grids.
//!
//! ```
//! use quadstab::{
//!     certify, extract_up, lab, ControlFunction, DomainPoint, ExtractedMap,
//!     ExtractionConfig, ModularDescriptor, SeriesMode, Sizer,
//! };
//!
//! let sizer: Sizer = ModularDescriptor::absolute_value().into();
//! let inst = lab::build_instance(&lab::preset("bounded-0.1-seed1").unwrap(), &sizer).unwrap();
//! let cfg = ExtractionConfig::new(SeriesMode::Up, 1e-10).with_control(inst.control.clone());
//!
//! let h1 = extract_up(&sizer, &inst.phi, &DomainPoint::scalar(2.0), &cfg).unwrap();
//! assert!((h1.value.entries()[0] - 4.0).abs() < 1e-10);
//!
//! let h = ExtractedMap::new(sizer.clone(), inst.phi.clone(), cfg).unwrap();
//! let grid: Vec<_> = [-4.0, -2.0, -1.0, 1.0, 2.0, 4.0].map(DomainPoint::scalar).to_vec();
//! let cert = certify(&sizer, &inst.phi, &h, &grid, &inst.control, SeriesMode::Up);
//! assert!(cert.passed);
//! assert!(matches!(inst.control, ControlFunction::Constant { .. }));
//! ```

// `!(a <= b)` is used on purpose so that NaN counts as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod equation;
pub mod extractor;
pub mod fnorm;
pub mod lab;
pub mod modular;
pub mod quadratic;
pub mod series;
pub mod space;
pub mod sum;
pub mod vector;

pub use axioms::{sample_pairs, AxiomEntry, AxiomReport, Witness};
pub use equation::{
    check_control, defect, defect_size, ControlFunction, ControlReport, EquationError,
    FunctionHandle, TripleGrid,
};
pub use extractor::{
    cauchy_profile, certify, extract, extract_down, extract_grid, extract_up, homogeneity_check,
    uniqueness_probe, Candidate, Certificate, ExtractError, ExtractedMap, ExtractionConfig,
    ExtractionResult,
};
pub use fnorm::{check_fnorm_axioms, BaseNorm, FNormDescriptor};
pub use lab::{build_instance, preset, Instance, InstanceSpec, LabError, Perturbation};
pub use modular::{
    check_modular_axioms, delta2_estimate, eval_modular, luxemburg_norm, Delta2Estimate,
    ModularDescriptor, ModularError, OrliczGenerator,
};
pub use quadratic::{biadditive_form, check_quadratic, integer_grid, QuadraticityReport};
pub use series::{
    series_beta, series_down, series_up, vanishing_condition, SeriesBound, SeriesError, SeriesMode,
};
pub use space::{SizeError, Sizer};
pub use vector::{CodomainVector, DomainNorm, DomainPoint};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/modulars.md")]
    mod modulars {}
    #[doc = include_str!("../../../book/src/equation.md")]
    mod equation {}
    #[doc = include_str!("../../../book/src/series.md")]
    mod series {}
    #[doc = include_str!("../../../book/src/extraction.md")]
    mod extraction {}
    #[doc = include_str!("../../../book/src/quadratic.md")]
    mod quadratic {}
    #[doc = include_str!("../../../book/src/lab.md")]
    mod lab {}
}
