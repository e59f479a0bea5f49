//! The three control series and their certified tails.
//!
//! | mode   | term `t_j`                                   |
//! |--------|----------------------------------------------|
//! | up     | `4^{-j} α(2^{j-1}x, 2^{j-1}y, 2^{j-1}z)`     |
//! | down   | `(τ³/2)^j α(x/2^j, y/2^j, z/2^j)`            |
//! | beta   | `4^{-βj} α(2^{j-1}x, 2^{j-1}y, 2^{j-1}z)`    |
//!
//! For constant and power controls consecutive terms have an exact ratio
//! `q`, so after `J` terms the remainder is `t_J q/(1−q)`. For custom
//! controls the ratio is estimated from the last ten terms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equation::ControlFunction;
use crate::sum::NeumaierSum;
use crate::vector::DomainPoint;

/// Default number of terms before giving up.
pub const DEFAULT_CAP: usize = 200;

/// Number of trailing term ratios the empirical test inspects.
const RATIO_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SeriesMode {
    Up,
    Down { tau: f64 },
    Beta { beta: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("divergent series: term ratio {ratio} ≥ 1")]
    Divergent { ratio: f64 },
    #[error("tail bound {tail} still above tolerance after {terms} terms")]
    CapExhausted { terms: usize, tail: f64 },
    #[error("non-finite term at j = {j}")]
    NonFinite { j: usize },
    #[error("invalid series parameter: {0}")]
    InvalidParameter(String),
}

/// A certified value `partial_sum + tail_bound` of one control series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesBound {
    pub value: f64,
    pub partial_sum: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
    pub mode: SeriesMode,
}

impl SeriesMode {
    pub fn validate(&self) -> Result<(), SeriesError> {
        match *self {
            SeriesMode::Up => Ok(()),
            SeriesMode::Down { tau } if tau.is_finite() && tau >= 2.0 => Ok(()),
            SeriesMode::Down { tau } => Err(SeriesError::InvalidParameter(format!(
                "τ = {tau}, need τ ≥ 2"
            ))),
            SeriesMode::Beta { beta } if beta > 0.0 && beta <= 1.0 => Ok(()),
            SeriesMode::Beta { beta } => Err(SeriesError::InvalidParameter(format!(
                "β = {beta}, need 0 < β ≤ 1"
            ))),
        }
    }

    /// Weight of the j-th term.
    pub fn weight(&self, j: usize) -> f64 {
        let j = j as i32;
        match *self {
            SeriesMode::Up => 0.25f64.powi(j),
            SeriesMode::Down { tau } => (tau * tau * tau / 2.0).powi(j),
            SeriesMode::Beta { beta } => 4f64.powf(-beta * j as f64),
        }
    }

    /// Scale applied to the arguments of the j-th term.
    pub fn argument_scale(&self, j: usize) -> f64 {
        match self {
            SeriesMode::Up | SeriesMode::Beta { .. } => 2f64.powi(j as i32 - 1),
            SeriesMode::Down { .. } => 2f64.powi(-(j as i32)),
        }
    }

    /// Exact ratio `t_{j+1}/t_j` for closed-form controls.
    pub fn closed_form_ratio(&self, alpha: &ControlFunction) -> Option<f64> {
        let degree = match alpha {
            ControlFunction::Constant { .. } => 0.0,
            ControlFunction::Power { exponent, .. } => *exponent,
            ControlFunction::Custom(_) => return None,
        };
        Some(match *self {
            SeriesMode::Up => 2f64.powf(degree) / 4.0,
            SeriesMode::Down { tau } => tau * tau * tau / 2f64.powf(degree + 1.0),
            SeriesMode::Beta { beta } => 2f64.powf(degree) / 4f64.powf(beta),
        })
    }
}

/// j-th term of the series at `(x, y, z)`, for `j ≥ 1`.
pub fn series_term(
    alpha: &ControlFunction,
    mode: SeriesMode,
    x: &DomainPoint,
    y: &DomainPoint,
    z: &DomainPoint,
    j: usize,
) -> f64 {
    let s = mode.argument_scale(j);
    mode.weight(j) * alpha.eval(&x.scale(s), &y.scale(s), &z.scale(s))
}

/// Sums the series in `mode` until the certified tail is at most `tol`.
pub fn series(
    alpha: &ControlFunction,
    mode: SeriesMode,
    x: &DomainPoint,
    y: &DomainPoint,
    z: &DomainPoint,
    tol: f64,
    cap: usize,
) -> Result<SeriesBound, SeriesError> {
    mode.validate()?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(SeriesError::InvalidParameter(format!("tol = {tol}")));
    }
    if cap == 0 {
        return Err(SeriesError::InvalidParameter("cap = 0".into()));
    }
    let done = |partial: f64, tail: f64, terms: usize| SeriesBound {
        value: partial + tail,
        partial_sum: partial,
        tail_bound: tail,
        terms_used: terms,
        mode,
    };
    if alpha.is_identically_zero() {
        return Ok(done(0.0, 0.0, 0));
    }

    let mut acc = NeumaierSum::default();
    match mode.closed_form_ratio(alpha) {
        Some(q) => {
            let first = series_term(alpha, mode, x, y, z, 1);
            if first == 0.0 {
                // homogeneous control at the origin: every term vanishes
                return Ok(done(0.0, 0.0, 1));
            }
            if q >= 1.0 {
                return Err(SeriesError::Divergent { ratio: q });
            }
            let mut tail = f64::INFINITY;
            for j in 1..=cap {
                let t = if j == 1 {
                    first
                } else {
                    series_term(alpha, mode, x, y, z, j)
                };
                if !t.is_finite() {
                    return Err(SeriesError::NonFinite { j });
                }
                acc += t;
                tail = t * q / (1.0 - q);
                if tail <= tol {
                    return Ok(done(acc.sum(), tail, j));
                }
            }
            Err(SeriesError::CapExhausted { terms: cap, tail })
        }
        None => {
            let mut terms: Vec<f64> = Vec::new();
            let mut tail = f64::INFINITY;
            for j in 1..=cap {
                let t = series_term(alpha, mode, x, y, z, j);
                if !t.is_finite() || t < 0.0 {
                    return Err(SeriesError::NonFinite { j });
                }
                acc += t;
                terms.push(t);
                if terms.len() <= RATIO_WINDOW {
                    continue;
                }
                let window = &terms[terms.len() - RATIO_WINDOW - 1..];
                let q = window
                    .windows(2)
                    .map(|w| match (w[0], w[1]) {
                        (_, 0.0) => 0.0,
                        (0.0, _) => f64::INFINITY,
                        (a, b) => b / a,
                    })
                    .fold(0.0f64, f64::max);
                if q >= 1.0 {
                    if window.iter().skip(1).all(|&t| t > 0.0)
                        && window.windows(2).all(|w| w[1] >= w[0])
                    {
                        return Err(SeriesError::Divergent { ratio: q });
                    }
                    continue;
                }
                tail = t * q / (1.0 - q);
                if tail <= tol {
                    return Ok(done(acc.sum(), tail, j));
                }
            }
            match terms.windows(2).last() {
                Some(w) if w[0] > 0.0 && w[1] / w[0] >= 1.0 => {
                    Err(SeriesError::Divergent { ratio: w[1] / w[0] })
                }
                _ => Err(SeriesError::CapExhausted { terms: cap, tail }),
            }
        }
    }
}

/// `Σ_{j≥1} 4^{-j} α(2^{j-1}x, 2^{j-1}y, 2^{j-1}z)`
pub fn series_up(
    alpha: &ControlFunction,
    x: &DomainPoint,
    y: &DomainPoint,
    z: &DomainPoint,
    tol: f64,
    cap: usize,
) -> Result<SeriesBound, SeriesError> {
    series(alpha, SeriesMode::Up, x, y, z, tol, cap)
}

/// `Σ_{j≥1} (τ³/2)^j α(x/2^j, y/2^j, z/2^j)`
pub fn series_down(
    alpha: &ControlFunction,
    tau: f64,
    x: &DomainPoint,
    y: &DomainPoint,
    z: &DomainPoint,
    tol: f64,
    cap: usize,
) -> Result<SeriesBound, SeriesError> {
    series(alpha, SeriesMode::Down { tau }, x, y, z, tol, cap)
}

/// `Σ_{j≥1} 4^{-βj} α(2^{j-1}x, 2^{j-1}y, 2^{j-1}z)`
pub fn series_beta(
    alpha: &ControlFunction,
    beta: f64,
    x: &DomainPoint,
    y: &DomainPoint,
    z: &DomainPoint,
    tol: f64,
    cap: usize,
) -> Result<SeriesBound, SeriesError> {
    series(alpha, SeriesMode::Beta { beta }, x, y, z, tol, cap)
}

/// Threshold the scaled control must fall below.
pub const VANISHING_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VanishingReport {
    /// `τ^{2n} α(x/2^n, y/2^n, z/2^n)` for `n = 1..=n_max`.
    pub values: Vec<f64>,
    pub passed: bool,
}

/// Checks that `τ^{2n} α(x/2^n, y/2^n, z/2^n) → 0`.
///
/// Passes when the last value is below 1e-9 and the second half of the
/// sequence is non-increasing.
pub fn vanishing_condition(
    alpha: &ControlFunction,
    tau: f64,
    x: &DomainPoint,
    y: &DomainPoint,
    z: &DomainPoint,
    n_max: usize,
) -> VanishingReport {
    let values: Vec<f64> = (1..=n_max)
        .map(|n| {
            let s = 2f64.powi(-(n as i32));
            tau.powi(2 * n as i32) * alpha.eval(&x.scale(s), &y.scale(s), &z.scale(s))
        })
        .collect();
    let tail = &values[values.len() / 2..];
    let passed = !values.is_empty()
        && values.last().is_some_and(|&v| v < VANISHING_THRESHOLD)
        && tail.windows(2).all(|w| w[1] <= w[0]);
    VanishingReport { values, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::DomainNorm;

    fn p(x: f64) -> DomainPoint {
        DomainPoint::scalar(x)
    }

    /// Independent oracle: plain summation of the first `n` terms.
    fn brute(alpha: &ControlFunction, mode: SeriesMode, x: f64, y: f64, z: f64, n: usize) -> f64 {
        let mut s = 0.0;
        for j in 1..=n {
            let (w, a) = match mode {
                SeriesMode::Up => (4f64.powi(-(j as i32)), 2f64.powi(j as i32 - 1)),
                SeriesMode::Down { tau } => {
                    ((tau.powi(3) / 2.0).powi(j as i32), 0.5f64.powi(j as i32))
                }
                SeriesMode::Beta { beta } => (4f64.powf(-beta * j as f64), 2f64.powi(j as i32 - 1)),
            };
            s += w * alpha.eval(&p(a * x), &p(a * y), &p(a * z));
        }
        s
    }

    #[test]
    fn up_examples() {
        let c = ControlFunction::constant(0.3).unwrap();
        let b = series_up(&c, &p(5.0), &p(-1.0), &p(2.0), 1e-12, DEFAULT_CAP).unwrap();
        assert!((b.value - 0.1).abs() < 1e-12);
        assert!(b.tail_bound <= 1e-12);
        assert_eq!(b.value, b.partial_sum + b.tail_bound);

        let zero = ControlFunction::constant(0.0).unwrap();
        assert_eq!(
            series_up(&zero, &p(1.0), &p(1.0), &p(0.0), 1e-12, 10)
                .unwrap()
                .value,
            0.0
        );

        let pow = ControlFunction::power(1.0, 1.0, DomainNorm::Euclidean).unwrap();
        let b = series_up(&pow, &p(1.0), &p(1.0), &p(0.0), 1e-13, DEFAULT_CAP).unwrap();
        let oracle = brute(&pow, SeriesMode::Up, 1.0, 1.0, 0.0, 60);
        assert!((oracle - 1.0).abs() < 1e-15);
        assert!((b.value - oracle).abs() < 1e-12);
    }

    #[test]
    fn down_examples() {
        let pow = ControlFunction::power(1.0, 3.0, DomainNorm::Euclidean).unwrap();
        let b = series_down(&pow, 2.0, &p(1.0), &p(1.0), &p(1.0), 1e-13, DEFAULT_CAP).unwrap();
        let oracle = brute(&pow, SeriesMode::Down { tau: 2.0 }, 1.0, 1.0, 1.0, 60);
        assert!((oracle - 3.0).abs() < 1e-14);
        assert!((b.value - 3.0).abs() < 1e-12);

        let zero = ControlFunction::power(0.0, 3.0, DomainNorm::Euclidean).unwrap();
        assert_eq!(
            series_down(&zero, 2.0, &p(1.0), &p(1.0), &p(1.0), 1e-12, 10)
                .unwrap()
                .value,
            0.0
        );

        let c = ControlFunction::constant(0.1).unwrap();
        assert_eq!(
            series_down(&c, 2.0, &p(1.0), &p(1.0), &p(1.0), 1e-12, DEFAULT_CAP),
            Err(SeriesError::Divergent { ratio: 4.0 })
        );
    }

    #[test]
    fn beta_examples() {
        let c = ControlFunction::constant(0.5).unwrap();
        let b = series_beta(&c, 0.5, &p(1.0), &p(1.0), &p(0.0), 1e-12, DEFAULT_CAP).unwrap();
        assert!((b.value - 0.5).abs() < 1e-11);
        let one = ControlFunction::constant(1.0).unwrap();
        let b = series_beta(&one, 1.0, &p(1.0), &p(1.0), &p(0.0), 1e-12, DEFAULT_CAP).unwrap();
        let oracle = brute(&one, SeriesMode::Beta { beta: 1.0 }, 1.0, 1.0, 0.0, 40);
        assert!((b.value - oracle).abs() < 1e-12);
        assert!((b.value - 1.0 / 3.0).abs() < 1e-12);
        let zero = ControlFunction::constant(0.0).unwrap();
        assert_eq!(
            series_beta(&zero, 0.3, &p(1.0), &p(1.0), &p(0.0), 1e-12, 10)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn divergent_powers_named() {
        let pow2 = ControlFunction::power(1.0, 2.0, DomainNorm::Euclidean).unwrap();
        assert_eq!(
            series_up(&pow2, &p(1.0), &p(1.0), &p(0.0), 1e-12, DEFAULT_CAP),
            Err(SeriesError::Divergent { ratio: 1.0 })
        );
        let pow1 = ControlFunction::power(1.0, 1.0, DomainNorm::Euclidean).unwrap();
        assert!(matches!(
            series_beta(&pow1, 0.5, &p(1.0), &p(1.0), &p(0.0), 1e-12, DEFAULT_CAP),
            Err(SeriesError::Divergent { .. })
        ));
    }

    #[test]
    fn invalid_parameters() {
        let c = ControlFunction::constant(1.0).unwrap();
        assert!(matches!(
            series_down(&c, 1.5, &p(1.0), &p(1.0), &p(1.0), 1e-12, 10),
            Err(SeriesError::InvalidParameter(_))
        ));
        assert!(matches!(
            series_beta(&c, 1.2, &p(1.0), &p(1.0), &p(1.0), 1e-12, 10),
            Err(SeriesError::InvalidParameter(_))
        ));
        assert!(matches!(
            series_up(&c, &p(1.0), &p(1.0), &p(1.0), 0.0, 10),
            Err(SeriesError::InvalidParameter(_))
        ));
    }

    #[test]
    fn cap_is_binding() {
        let c = ControlFunction::constant(1.0).unwrap();
        assert!(matches!(
            series_up(&c, &p(1.0), &p(1.0), &p(0.0), 1e-12, 3),
            Err(SeriesError::CapExhausted { terms: 3, .. })
        ));
    }

    #[test]
    fn custom_ratio_test_agrees_with_closed_form() {
        let custom = ControlFunction::custom("1+|x|", |x, _, _| 1.0 + x.coords()[0].abs());
        let b = series_up(&custom, &p(1.0), &p(1.0), &p(0.0), 1e-12, DEFAULT_CAP).unwrap();
        // Σ 4^-j (1 + 2^{j-1}) = 1/3 + 1/2
        assert!((b.value - (1.0 / 3.0 + 0.5)).abs() < 1e-11);

        let growing = ControlFunction::custom("x^3", |x, _, _| x.coords()[0].abs().powi(3));
        assert!(matches!(
            series_up(&growing, &p(1.0), &p(1.0), &p(0.0), 1e-12, DEFAULT_CAP),
            Err(SeriesError::Divergent { .. })
        ));
    }

    #[test]
    fn custom_compact_support_terminates() {
        let bump = ControlFunction::custom("annulus", |x, _, _| {
            let a = x.coords()[0].abs();
            if (0.5..8.0).contains(&a) {
                1.0
            } else {
                0.0
            }
        });
        let up = series_up(&bump, &p(1.0), &p(1.0), &p(0.0), 1e-12, DEFAULT_CAP).unwrap();
        assert!((up.value - (0.25 + 0.0625 + 0.015625)).abs() < 1e-15);
        let down = series_down(&bump, 2.0, &p(1.0), &p(1.0), &p(1.0), 1e-12, DEFAULT_CAP).unwrap();
        assert_eq!(down.value, 4.0);
    }

    #[test]
    fn vanishing_examples() {
        let pow = ControlFunction::power(1.0, 3.0, DomainNorm::Euclidean).unwrap();
        let r = vanishing_condition(&pow, 2.0, &p(1.0), &p(1.0), &p(1.0), 40);
        assert!(r.passed);
        for (i, v) in r.values.iter().enumerate() {
            let n = (i + 1) as i32;
            assert!((v - 3.0 * 2f64.powi(-n)).abs() <= 1e-15 * v);
        }
        let c = ControlFunction::constant(0.01).unwrap();
        assert!(!vanishing_condition(&c, 2.0, &p(1.0), &p(1.0), &p(1.0), 40).passed);
        let zero = ControlFunction::constant(0.0).unwrap();
        assert!(vanishing_condition(&zero, 2.0, &p(1.0), &p(1.0), &p(1.0), 40).passed);
    }
}
