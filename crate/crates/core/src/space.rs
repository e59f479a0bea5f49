//! The gauge used to measure codomain vectors in an experiment: a modular or
//! a β-homogeneous F-norm.

use thiserror::Error;

use crate::fnorm::FNormDescriptor;
use crate::modular::{eval_modular, ModularDescriptor, ModularError};
use crate::vector::CodomainVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SizeError {
    #[error(transparent)]
    Modular(#[from] ModularError),
    #[error("input vector has non-finite entries")]
    NonFinite,
}

#[derive(Clone, Debug)]
pub enum Sizer {
    Modular(ModularDescriptor),
    FNorm(FNormDescriptor),
}

impl Sizer {
    pub fn size(&self, u: &CodomainVector) -> Result<f64, SizeError> {
        match self {
            Sizer::Modular(m) => Ok(eval_modular(m, u)?),
            Sizer::FNorm(f) => {
                if !u.is_finite() {
                    return Err(SizeError::NonFinite);
                }
                Ok(f.eval(u))
            }
        }
    }

    /// True when partial sums of the control series bound the distance between
    /// iterates: a convex modular, or any F-norm.
    pub fn supports_cauchy_bound(&self) -> bool {
        match self {
            Sizer::Modular(m) => m.is_convex(),
            Sizer::FNorm(f) => f.is_valid(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Sizer::Modular(m) => format!("modular {}", m.label()),
            Sizer::FNorm(f) => format!("f-norm {}", f.label()),
        }
    }
}

impl From<ModularDescriptor> for Sizer {
    fn from(m: ModularDescriptor) -> Self {
        Sizer::Modular(m)
    }
}

impl From<FNormDescriptor> for Sizer {
    fn from(f: FNormDescriptor) -> Self {
        Sizer::FNorm(f)
    }
}
