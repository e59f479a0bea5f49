//! Direct-method extraction of the quadratic limit `h` and the certificates
//! bounding `φ − h`.
//!
//! Up and beta modes iterate `s_n = φ(2ⁿx)/4ⁿ`; down mode iterates
//! `s_n = 4ⁿφ(x/2ⁿ)`. Row `n` of a trace holds `s_n` and the forward residual
//! `size(s_{n+1} − s_n)`.
//!
//! Stopping: with a closed-form control and a sizer that supports the Cauchy
//! bound, iteration stops once the certified tail `size(s_n − h)` is within
//! `tol`. Otherwise the residuals `r_n, r_{n+1}, r_{n+2}` must all be within
//! `tol`. Exactly stationary iterates stop either way.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equation::{ControlFunction, FunctionHandle};
use crate::series::{series, SeriesError, SeriesMode, DEFAULT_CAP};
use crate::space::{SizeError, Sizer};
use crate::sum::NeumaierSum;
use crate::vector::{CodomainVector, DomainPoint};

pub const DEFAULT_N_MAX: usize = 26;
/// Hard ceiling on `n_max`.
pub const N_MAX_LIMIT: usize = 30;
/// Certificates pass when every margin is at least `-CERTIFICATE_SLACK`.
pub const CERTIFICATE_SLACK: f64 = 1e-9;
/// Tail tolerance used for every certificate bound.
pub const BOUND_TOL: f64 = 1e-13;
/// Down-mode stops once `|φ(x/2ⁿ)|` drops this far below `4^{-n}|φ(x)|`.
const CANCELLATION_GUARD: f64 = 1.0 / (1u64 << 40) as f64;
/// Consecutive residuals that must be within tolerance when no certified tail exists.
pub const RESIDUAL_WINDOW: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error("no convergence within n_max; residuals {residuals:?}")]
    NotConverged { residuals: Vec<f64> },
    #[error("precision exhausted at n = {n}; residuals {residuals:?}")]
    PrecisionExhausted { n: usize, residuals: Vec<f64> },
    #[error("non-finite iterate at n = {n}")]
    NonFinite { n: usize },
    #[error("invalid extraction config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Size(#[from] SizeError),
}

#[derive(Clone, Debug)]
pub struct ExtractionConfig {
    pub mode: SeriesMode,
    pub tol: f64,
    pub n_max: usize,
    pub record_trace: bool,
    /// Enables the tail-bound stopping rule in up and beta modes.
    pub control: Option<ControlFunction>,
}

impl ExtractionConfig {
    pub fn new(mode: SeriesMode, tol: f64) -> Self {
        ExtractionConfig {
            mode,
            tol,
            n_max: DEFAULT_N_MAX,
            record_trace: true,
            control: None,
        }
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn with_control(mut self, control: ControlFunction) -> Self {
        self.control = Some(control);
        self
    }

    pub fn validate(&self) -> Result<(), ExtractError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(ExtractError::InvalidConfig(format!("tol = {}", self.tol)));
        }
        if self.n_max > N_MAX_LIMIT {
            return Err(ExtractError::InvalidConfig(format!(
                "n_max = {} exceeds {N_MAX_LIMIT}",
                self.n_max
            )));
        }
        self.mode
            .validate()
            .map_err(|e| ExtractError::InvalidConfig(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub iterate: Vec<f64>,
    /// `size(s_{n+1} − s_n)`
    pub residual: f64,
    /// Certified distance from `s_n` to the limit, when available.
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub value: CodomainVector,
    pub n_used: usize,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub residual: f64,
}

/// `φ(2ⁿx)/4ⁿ` or `4ⁿφ(x/2ⁿ)`.
pub fn iterate(
    phi: &FunctionHandle,
    x: &DomainPoint,
    mode: SeriesMode,
    n: usize,
) -> CodomainVector {
    let two_n = 2f64.powi(n as i32);
    match mode {
        SeriesMode::Up | SeriesMode::Beta { .. } => {
            phi.eval(&x.scale(two_n)).scale(1.0 / (two_n * two_n))
        }
        SeriesMode::Down { .. } => phi.eval(&x.scale(1.0 / two_n)).scale(two_n * two_n),
    }
}

/// Certified `size(s_n − h)` from the control series.
fn tail_bound(
    sizer: &Sizer,
    alpha: Option<&ControlFunction>,
    mode: SeriesMode,
    x: &DomainPoint,
    n: usize,
) -> Option<f64> {
    let alpha = alpha.filter(|a| a.is_closed_form())?;
    if !sizer.supports_cauchy_bound() {
        return None;
    }
    let scale = match mode {
        SeriesMode::Up => 0.25f64.powi(n as i32),
        SeriesMode::Beta { beta } => 4f64.powf(-beta * n as f64),
        SeriesMode::Down { .. } => return None,
    };
    let y = x.scale(2f64.powi(n as i32));
    let zero = DomainPoint::zeros(x.dim());
    series(alpha, mode, &y, &y, &zero, BOUND_TOL, DEFAULT_CAP)
        .ok()
        .map(|b| scale * b.value)
}

fn run(
    sizer: &Sizer,
    phi: &FunctionHandle,
    x: &DomainPoint,
    cfg: &ExtractionConfig,
) -> Result<ExtractionResult, ExtractError> {
    cfg.validate()?;
    if x.dim() != phi.domain_dim() {
        return Err(ExtractError::InvalidConfig(format!(
            "point has dimension {}, map expects {}",
            x.dim(),
            phi.domain_dim()
        )));
    }
    let down = matches!(cfg.mode, SeriesMode::Down { .. });
    let first = phi.eval(x);
    if !first.is_finite() {
        return Err(ExtractError::NonFinite { n: 0 });
    }
    let reference = first.max_abs();
    let mut iterates = vec![first];
    let mut residuals: Vec<f64> = Vec::new();
    // extends the iterate and residual lists through index k
    let extend = |iterates: &mut Vec<CodomainVector>, residuals: &mut Vec<f64>, k: usize| {
        while iterates.len() <= k {
            let j = iterates.len();
            let next = iterate(phi, x, cfg.mode, j);
            if !next.is_finite() {
                return Err(ExtractError::NonFinite { n: j });
            }
            if down && reference > 0.0 {
                let raw = next.max_abs() * 0.25f64.powi(j as i32);
                let floor = CANCELLATION_GUARD * 0.25f64.powi(j as i32) * reference;
                if raw < floor || (raw != 0.0 && raw < f64::MIN_POSITIVE) {
                    return Err(ExtractError::PrecisionExhausted {
                        n: j,
                        residuals: residuals.clone(),
                    });
                }
            }
            residuals.push(sizer.size(&next.sub(&iterates[j - 1]))?);
            iterates.push(next);
        }
        Ok(())
    };

    let mut trace = Vec::new();
    for n in 0..cfg.n_max {
        let last = (n + RESIDUAL_WINDOW).min(cfg.n_max);
        extend(&mut iterates, &mut residuals, last)?;
        let window = &residuals[n..last];
        let bound = tail_bound(sizer, cfg.control.as_ref(), cfg.mode, x, n);
        if cfg.record_trace {
            trace.push(TraceRow {
                n,
                iterate: iterates[n].entries().to_vec(),
                residual: residuals[n],
                bound,
            });
        }
        let stationary = window.iter().all(|&r| r == 0.0);
        let settled = match bound {
            Some(b) => b <= cfg.tol,
            None => window.iter().all(|&r| r <= cfg.tol),
        };
        if stationary || settled {
            return Ok(ExtractionResult {
                value: iterates.swap_remove(n),
                n_used: n,
                trace,
                converged: true,
                residual: residuals[n],
            });
        }
    }
    Err(ExtractError::NotConverged { residuals })
}

/// Iterates `φ(2ⁿx)/4ⁿ` until the residual or the certified tail is within `tol`.
pub fn extract_up(
    sizer: &Sizer,
    phi: &FunctionHandle,
    x: &DomainPoint,
    cfg: &ExtractionConfig,
) -> Result<ExtractionResult, ExtractError> {
    if matches!(cfg.mode, SeriesMode::Down { .. }) {
        return Err(ExtractError::InvalidConfig(
            "extract_up needs up or beta mode".into(),
        ));
    }
    run(sizer, phi, x, cfg)
}

/// Iterates `4ⁿφ(x/2ⁿ)` until the residual is within `tol`.
pub fn extract_down(
    sizer: &Sizer,
    phi: &FunctionHandle,
    x: &DomainPoint,
    cfg: &ExtractionConfig,
) -> Result<ExtractionResult, ExtractError> {
    if !matches!(cfg.mode, SeriesMode::Down { .. }) {
        return Err(ExtractError::InvalidConfig(
            "extract_down needs down mode".into(),
        ));
    }
    run(sizer, phi, x, cfg)
}

/// Dispatches on `cfg.mode`.
pub fn extract(
    sizer: &Sizer,
    phi: &FunctionHandle,
    x: &DomainPoint,
    cfg: &ExtractionConfig,
) -> Result<ExtractionResult, ExtractError> {
    run(sizer, phi, x, cfg)
}

/// Extracts at every point in parallel; output order follows `points`.
pub fn extract_grid(
    sizer: &Sizer,
    phi: &FunctionHandle,
    points: &[DomainPoint],
    cfg: &ExtractionConfig,
) -> Vec<Result<ExtractionResult, ExtractError>> {
    points.par_iter().map(|x| run(sizer, phi, x, cfg)).collect()
}

/// Anything that can be evaluated pointwise as a candidate quadratic map.
pub trait Candidate: Sync {
    fn label(&self) -> String;
    /// `None` when the candidate is not available at `x`.
    fn value_at(&self, x: &DomainPoint) -> Option<CodomainVector>;
}

impl Candidate for FunctionHandle {
    fn label(&self) -> String {
        FunctionHandle::label(self).to_string()
    }

    fn value_at(&self, x: &DomainPoint) -> Option<CodomainVector> {
        Some(self.eval(x))
    }
}

/// The limit map `h`, extracted lazily and memoized per point.
pub struct ExtractedMap {
    sizer: Sizer,
    phi: FunctionHandle,
    cfg: ExtractionConfig,
    cache: Mutex<HashMap<Vec<u64>, Result<ExtractionResult, ExtractError>>>,
}

impl ExtractedMap {
    pub fn new(
        sizer: Sizer,
        phi: FunctionHandle,
        cfg: ExtractionConfig,
    ) -> Result<Self, ExtractError> {
        cfg.validate()?;
        Ok(ExtractedMap {
            sizer,
            phi,
            cfg,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ExtractionConfig {
        &self.cfg
    }

    pub fn phi(&self) -> &FunctionHandle {
        &self.phi
    }

    pub fn sizer(&self) -> &Sizer {
        &self.sizer
    }

    /// Extraction outcome at `x`, computed on first use.
    pub fn result(&self, x: &DomainPoint) -> Result<ExtractionResult, ExtractError> {
        let key = x.key();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return hit.clone();
        }
        let fresh = run(&self.sizer, &self.phi, x, &self.cfg);
        self.cache
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(fresh)
            .clone()
    }

    /// Fills the cache for `points` in parallel and returns results in order.
    pub fn prefetch(&self, points: &[DomainPoint]) -> Vec<Result<ExtractionResult, ExtractError>> {
        points.par_iter().map(|x| self.result(x)).collect()
    }
}

impl Candidate for ExtractedMap {
    fn label(&self) -> String {
        format!("lim[{}]", self.phi.label())
    }

    fn value_at(&self, x: &DomainPoint) -> Option<CodomainVector> {
        self.result(x).ok().map(|r| r.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub point: Vec<f64>,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    /// Down mode only: the bound with `α(x, x, 0)` in place of `α(x, x, x)`.
    pub alt_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub mode: SeriesMode,
    pub rows: Vec<CertificateRow>,
    pub passed: bool,
    /// First point where the bound or the candidate was unavailable.
    pub witness: Option<Vec<f64>>,
    pub failure: Option<String>,
}

impl Certificate {
    pub fn min_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.margin)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Right-hand side of the stability estimate at `x`, plus the down-mode variant.
pub fn certificate_bound(
    alpha: &ControlFunction,
    mode: SeriesMode,
    x: &DomainPoint,
) -> Result<(f64, Option<f64>), SeriesError> {
    let zero = DomainPoint::zeros(x.dim());
    match mode {
        SeriesMode::Up | SeriesMode::Beta { .. } => Ok((
            series(alpha, mode, x, x, &zero, BOUND_TOL, DEFAULT_CAP)?.value,
            None,
        )),
        SeriesMode::Down { tau } => {
            let main = series(alpha, mode, x, x, x, BOUND_TOL, DEFAULT_CAP)?.value / (2.0 * tau);
            let alt = series(alpha, mode, x, x, &zero, BOUND_TOL, DEFAULT_CAP)
                .ok()
                .map(|b| b.value / (2.0 * tau));
            Ok((main, alt))
        }
    }
}

/// Compares `size(φ(x) − h(x))` with the series bound at every grid point.
pub fn certify(
    sizer: &Sizer,
    phi: &FunctionHandle,
    h: &dyn Candidate,
    grid: &[DomainPoint],
    alpha: &ControlFunction,
    mode: SeriesMode,
) -> Certificate {
    enum Outcome {
        Row(CertificateRow),
        Fail(String),
    }
    let outcomes: Vec<Outcome> = grid
        .par_iter()
        .map(|x| {
            let (bound, alt_bound) = match certificate_bound(alpha, mode, x) {
                Ok(b) => b,
                Err(e) => return Outcome::Fail(e.to_string()),
            };
            let Some(hx) = h.value_at(x) else {
                return Outcome::Fail(format!("candidate `{}` not available", h.label()));
            };
            match sizer.size(&phi.eval(x).sub(&hx)) {
                Ok(measured) => Outcome::Row(CertificateRow {
                    point: x.coords().to_vec(),
                    measured,
                    bound,
                    margin: bound - measured,
                    alt_bound,
                }),
                Err(e) => Outcome::Fail(e.to_string()),
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    let mut witness = None;
    let mut failure = None;
    for (x, outcome) in grid.iter().zip(outcomes) {
        match outcome {
            Outcome::Row(r) => {
                if witness.is_none() && !(r.margin >= -CERTIFICATE_SLACK) {
                    witness = Some(r.point.clone());
                    failure = Some(format!("margin {} below -{CERTIFICATE_SLACK}", r.margin));
                }
                rows.push(r);
            }
            Outcome::Fail(msg) => {
                if witness.is_none() {
                    witness = Some(x.coords().to_vec());
                    failure = Some(msg);
                }
            }
        }
    }
    Certificate {
        mode,
        passed: witness.is_none() && !grid.is_empty(),
        rows,
        witness,
        failure,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub m: usize,
    pub n: usize,
    pub residual: f64,
    pub bound: f64,
}

/// Measured `size(s_n − s_m)` against the partial sum over `k = m+1..=n`.
pub fn cauchy_profile(
    sizer: &Sizer,
    phi: &FunctionHandle,
    x: &DomainPoint,
    alpha: &ControlFunction,
    mode: SeriesMode,
    pairs: &[(usize, usize)],
) -> Result<Vec<CauchyRow>, ExtractError> {
    if matches!(mode, SeriesMode::Down { .. }) {
        return Err(ExtractError::InvalidConfig(
            "cauchy profile is defined for up and beta modes".into(),
        ));
    }
    mode.validate()
        .map_err(|e| ExtractError::InvalidConfig(e.to_string()))?;
    let zero = DomainPoint::zeros(x.dim());
    let weight = |k: usize| match mode {
        SeriesMode::Beta { beta } => 4f64.powf(-beta * k as f64),
        _ => 0.25f64.powi(k as i32),
    };
    pairs
        .iter()
        .map(|&(m, n)| {
            if n < m || n > N_MAX_LIMIT {
                return Err(ExtractError::InvalidConfig(format!(
                    "pair (m, n) = ({m}, {n})"
                )));
            }
            let residual = sizer.size(&iterate(phi, x, mode, n).sub(&iterate(phi, x, mode, m)))?;
            let mut acc = NeumaierSum::default();
            for k in m + 1..=n {
                let y = x.scale(2f64.powi(k as i32 - 1));
                acc += weight(k) * alpha.eval(&y, &y, &zero);
            }
            Ok(CauchyRow {
                m,
                n,
                residual,
                bound: acc.sum(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// Max of `size((h₁(x) − h₂(x))/2)` over the evaluable grid points.
    pub max_discrepancy: f64,
    pub witness: Option<Vec<f64>>,
    pub evaluated: usize,
    pub skipped: usize,
}

pub fn uniqueness_probe(
    sizer: &Sizer,
    h1: &dyn Candidate,
    h2: &dyn Candidate,
    grid: &[DomainPoint],
) -> Result<UniquenessReport, SizeError> {
    let values: Vec<Option<Result<f64, SizeError>>> = grid
        .par_iter()
        .map(|x| match (h1.value_at(x), h2.value_at(x)) {
            (Some(a), Some(b)) => Some(sizer.size(&a.sub(&b).scale(0.5))),
            _ => None,
        })
        .collect();
    let mut report = UniquenessReport {
        max_discrepancy: 0.0,
        witness: None,
        evaluated: 0,
        skipped: 0,
    };
    for (x, v) in grid.iter().zip(values) {
        match v {
            Some(d) => {
                let d = d?;
                report.evaluated += 1;
                if report.witness.is_none() || d > report.max_discrepancy {
                    report.max_discrepancy = d;
                    report.witness = Some(x.coords().to_vec());
                }
            }
            None => report.skipped += 1,
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub passed: bool,
    /// Max of `size(h(2x) − 4h(x))`.
    pub max_residual: f64,
    pub witness: Option<Vec<f64>>,
    pub checked: usize,
}

pub fn homogeneity_check(
    sizer: &Sizer,
    h: &dyn Candidate,
    grid: &[DomainPoint],
    tol: f64,
) -> Result<HomogeneityReport, SizeError> {
    let values: Vec<Option<Result<f64, SizeError>>> = grid
        .par_iter()
        .map(|x| {
            let hx = h.value_at(x)?;
            let h2x = h.value_at(&x.scale(2.0))?;
            Some(sizer.size(&h2x.sub(&hx.scale(4.0))))
        })
        .collect();
    let mut report = HomogeneityReport {
        passed: true,
        max_residual: 0.0,
        witness: None,
        checked: 0,
    };
    for (x, v) in grid.iter().zip(values) {
        let Some(r) = v else { continue };
        let r = r?;
        report.checked += 1;
        if r > report.max_residual || !(r <= tol) && report.passed {
            report.max_residual = r;
            report.witness = Some(x.coords().to_vec());
        }
        if !(r <= tol) {
            report.passed = false;
        }
    }
    if report.passed {
        report.witness = None;
    }
    report.passed &= report.checked > 0;
    Ok(report)
}
