//! Domain points and codomain vectors.
//!
//! Both are thin newtypes over `Vec<f64>`. The domain is the vector space the
//! maps are defined on; the codomain carries the modular or F-norm.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::sum::NeumaierSum;

/// Norm used on the domain when a control function needs `‖x‖`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DomainNorm {
    #[default]
    Euclidean,
    MaxAbs,
}

/// A point `x` of the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainPoint(Vec<f64>);

impl DomainPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        DomainPoint(coords)
    }

    pub fn scalar(x: f64) -> Self {
        DomainPoint(vec![x])
    }

    pub fn zeros(dim: usize) -> Self {
        DomainPoint(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn add(&self, other: &DomainPoint) -> DomainPoint {
        DomainPoint(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &DomainPoint) -> DomainPoint {
        DomainPoint(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> DomainPoint {
        DomainPoint(self.0.iter().map(|a| -a).collect())
    }

    pub fn scale(&self, c: f64) -> DomainPoint {
        DomainPoint(self.0.iter().map(|a| c * a).collect())
    }

    pub fn norm(&self, kind: DomainNorm) -> f64 {
        match kind {
            DomainNorm::Euclidean => {
                let mut acc = NeumaierSum::default();
                for c in &self.0 {
                    acc += c * c;
                }
                acc.sum().sqrt()
            }
            DomainNorm::MaxAbs => self.0.iter().fold(0.0, |m, c| m.max(c.abs())),
        }
    }

    /// Bit pattern of the coordinates, usable as an exact hash key.
    pub fn key(&self) -> Vec<u64> {
        // +0.0 and -0.0 are the same point
        self.0.iter().map(|c| (c + 0.0).to_bits()).collect()
    }
}

impl From<f64> for DomainPoint {
    fn from(x: f64) -> Self {
        DomainPoint::scalar(x)
    }
}

impl fmt::Display for DomainPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_coords(f, &self.0)
    }
}

/// An element `u` of the codomain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CodomainVector(Vec<f64>);

impl CodomainVector {
    pub fn new(entries: Vec<f64>) -> Self {
        CodomainVector(entries)
    }

    pub fn scalar(u: f64) -> Self {
        CodomainVector(vec![u])
    }

    pub fn zeros(dim: usize) -> Self {
        CodomainVector(vec![0.0; dim])
    }

    pub fn splat(dim: usize, value: f64) -> Self {
        CodomainVector(vec![value; dim])
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn add(&self, other: &CodomainVector) -> CodomainVector {
        CodomainVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &CodomainVector) -> CodomainVector {
        CodomainVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> CodomainVector {
        CodomainVector(self.0.iter().map(|a| -a).collect())
    }

    pub fn scale(&self, c: f64) -> CodomainVector {
        CodomainVector(self.0.iter().map(|a| c * a).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl From<f64> for CodomainVector {
    fn from(u: f64) -> Self {
        CodomainVector::scalar(u)
    }
}

impl From<Vec<f64>> for CodomainVector {
    fn from(entries: Vec<f64>) -> Self {
        CodomainVector(entries)
    }
}

impl fmt::Display for CodomainVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_coords(f, &self.0)
    }
}

fn write_coords(f: &mut fmt::Formatter<'_>, coords: &[f64]) -> fmt::Result {
    write!(f, "(")?;
    for (i, c) in coords.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{c}")?;
    }
    write!(f, ")")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        let p = DomainPoint::new(vec![3.0, -4.0]);
        assert_eq!(p.norm(DomainNorm::Euclidean), 5.0);
        assert_eq!(p.norm(DomainNorm::MaxAbs), 4.0);
    }

    #[test]
    fn signed_zero_keys_match() {
        assert_eq!(
            DomainPoint::scalar(0.0).key(),
            DomainPoint::scalar(-0.0).key()
        );
    }
}
