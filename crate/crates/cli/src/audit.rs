//! Closed-form stability constants against the summed control series.

use quadstab::extractor::BOUND_TOL;
use quadstab::series::DEFAULT_CAP;
use quadstab::{
    series_beta, series_down, series_up, ControlFunction, DomainNorm, DomainPoint, SeriesError,
};
use serde::Serialize;

use crate::experiment::fmt;
use crate::table::Table;

/// Largest relative discrepancy still reported as a match.
pub const MATCH_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Match,
    Discrepant,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorollaryAudit {
    pub id: String,
    pub parameters: String,
    /// The closed form as printed, e.g. `ε/3`.
    pub formula: String,
    /// Value of `formula`; may be non-finite.
    pub closed_form: f64,
    /// Certified series value.
    pub oracle: f64,
    pub relative_discrepancy: f64,
    pub verdict: Verdict,
}

fn audit(
    id: &str,
    parameters: String,
    formula: &str,
    closed_form: f64,
    oracle: f64,
) -> CorollaryAudit {
    let relative_discrepancy = if closed_form == oracle {
        0.0
    } else {
        ((closed_form - oracle) / oracle).abs()
    };
    let verdict = if relative_discrepancy <= MATCH_TOL {
        Verdict::Match
    } else {
        Verdict::Discrepant
    };
    CorollaryAudit {
        id: id.into(),
        parameters,
        formula: formula.into(),
        closed_form,
        oracle,
        relative_discrepancy,
        verdict,
    }
}

/// Constant control in up mode: `ε/3`.
pub fn constant_up(epsilon: f64) -> Result<CorollaryAudit, SeriesError> {
    let (x, z) = (DomainPoint::scalar(1.0), DomainPoint::scalar(0.0));
    let alpha = ControlFunction::Constant { epsilon };
    let oracle = series_up(&alpha, &x, &x, &z, BOUND_TOL, DEFAULT_CAP)?.value;
    Ok(audit(
        "constant-up",
        format!("ε={epsilon}"),
        "ε/3",
        epsilon / 3.0,
        oracle,
    ))
}

/// Power control in up mode at `‖x‖ = 1`, against the printed `2θ/(2−2^p)`.
pub fn power_up(theta: f64, p: f64) -> Result<CorollaryAudit, SeriesError> {
    let (x, z) = (DomainPoint::scalar(1.0), DomainPoint::scalar(0.0));
    let alpha = ControlFunction::Power {
        theta,
        exponent: p,
        norm: DomainNorm::Euclidean,
    };
    let oracle = series_up(&alpha, &x, &x, &z, BOUND_TOL, DEFAULT_CAP)?.value;
    let printed = 2.0 * theta / (2.0 - 2f64.powf(p));
    Ok(audit(
        "power-up",
        format!("θ={theta}, p={p}, ‖x‖=1"),
        "2θ‖x‖^p/(2−2^p)",
        printed,
        oracle,
    ))
}

/// Power control in down mode at `‖x‖ = 1`: `3θτ²/(2(2^{r+1}−τ³))`.
pub fn power_down(theta: f64, r: f64, tau: f64) -> Result<CorollaryAudit, SeriesError> {
    let x = DomainPoint::scalar(1.0);
    let alpha = ControlFunction::Power {
        theta,
        exponent: r,
        norm: DomainNorm::Euclidean,
    };
    let oracle = series_down(&alpha, tau, &x, &x, &x, BOUND_TOL, DEFAULT_CAP)?.value / (2.0 * tau);
    let printed = 3.0 * theta * tau * tau / (2.0 * (2f64.powf(r + 1.0) - tau.powi(3)));
    Ok(audit(
        "power-down",
        format!("θ={theta}, r={r}, τ={tau}, ‖x‖=1"),
        "3θτ²‖x‖^r/(2(2^{r+1}−τ³))",
        printed,
        oracle,
    ))
}

/// Constant control in a β-homogeneous space: `ε/(4^β−1)`.
pub fn constant_beta(epsilon: f64, beta: f64) -> Result<CorollaryAudit, SeriesError> {
    let (x, z) = (DomainPoint::scalar(1.0), DomainPoint::scalar(0.0));
    let alpha = ControlFunction::Constant { epsilon };
    let oracle = series_beta(&alpha, beta, &x, &x, &z, BOUND_TOL, DEFAULT_CAP)?.value;
    Ok(audit(
        "constant-beta",
        format!("ε={epsilon}, β={beta}"),
        "ε/(4^β−1)",
        epsilon / (4f64.powf(beta) - 1.0),
        oracle,
    ))
}

/// The reference rows, including the extra `p = 1.5` power row.
pub fn corollary_table() -> Vec<CorollaryAudit> {
    [
        constant_up(0.3),
        power_up(1.0, 1.0),
        power_up(1.0, 1.5),
        power_down(1.0, 3.0, 2.0),
        constant_beta(0.5, 0.5),
    ]
    .into_iter()
    .map(|r| r.expect("reference parameters give convergent series"))
    .collect()
}

pub fn audit_table(rows: &[CorollaryAudit]) -> Table {
    let mut t = Table::new(
        [
            "id",
            "parameters",
            "formula",
            "closed_form",
            "oracle",
            "relative_discrepancy",
            "verdict",
        ]
        .map(String::from),
    );
    for r in rows {
        t.push(vec![
            r.id.clone(),
            r.parameters.clone(),
            r.formula.clone(),
            fmt(r.closed_form),
            fmt(r.oracle),
            fmt(r.relative_discrepancy),
            match r.verdict {
                Verdict::Match => "match".into(),
                Verdict::Discrepant => "discrepant".into(),
            },
        ]);
    }
    t
}
