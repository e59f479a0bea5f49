//! Grid checks that a candidate map is quadratic, and its biadditive form
//! `A(x, y) = ½(h(x+y) − h(x) − h(y))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equation::{combine_defect, defect_points};
use crate::extractor::Candidate;
use crate::space::Sizer;
use crate::vector::{CodomainVector, DomainPoint};

/// Above this many triples the triple-based checks use an even stride.
pub const MAX_TRIPLES: usize = 20_000;

/// `{lo, …, hi}^dim` in lexicographic order.
pub fn integer_grid(dim: usize, lo: i64, hi: i64) -> Vec<DomainPoint> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                (lo..=hi).map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v as f64);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(DomainPoint::new).collect()
}

/// `½(h(x+y) − h(x) − h(y))`, when `h` is available at all three points.
pub fn biadditive_form(
    h: &dyn Candidate,
    x: &DomainPoint,
    y: &DomainPoint,
) -> Option<CodomainVector> {
    let sum = h.value_at(&x.add(y))?;
    Some(sum.sub(&h.value_at(x)?).sub(&h.value_at(y)?).scale(0.5))
}

/// The symmetric form attached to a candidate.
pub struct BiadditiveView<'a> {
    h: &'a dyn Candidate,
}

impl<'a> BiadditiveView<'a> {
    pub fn new(h: &'a dyn Candidate) -> Self {
        BiadditiveView { h }
    }

    pub fn eval(&self, x: &DomainPoint, y: &DomainPoint) -> Option<CodomainVector> {
        biadditive_form(self.h, x, y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub passed: bool,
    pub max_residual: f64,
    /// Arguments of the worst residual when the check fails.
    pub witness: Option<Vec<Vec<f64>>>,
    pub tested: usize,
    /// Combinations skipped because `h` was unavailable at some point.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticityReport {
    pub tol: f64,
    pub parallelogram: CheckSummary,
    pub doubling: CheckSummary,
    pub defect: CheckSummary,
    pub biadditivity: CheckSummary,
    pub passed: bool,
}

fn summarize(args: &[Vec<&DomainPoint>], residuals: Vec<Option<f64>>, tol: f64) -> CheckSummary {
    let mut s = CheckSummary {
        passed: true,
        max_residual: 0.0,
        witness: None,
        tested: 0,
        skipped: 0,
    };
    let mut worst = None;
    for (i, r) in residuals.into_iter().enumerate() {
        let Some(r) = r else {
            s.skipped += 1;
            continue;
        };
        s.tested += 1;
        if !(r <= tol) {
            s.passed = false;
        }
        if worst.is_none() || r > s.max_residual || r.is_nan() {
            s.max_residual = r;
            worst = Some(i);
        }
    }
    s.passed &= s.tested > 0;
    if !s.passed {
        s.witness = worst.map(|i| args[i].iter().map(|p| p.coords().to_vec()).collect());
    }
    s
}

fn size_or_inf(sizer: &Sizer, v: &CodomainVector) -> f64 {
    sizer.size(v).unwrap_or(f64::INFINITY)
}

fn triples(grid: &[DomainPoint]) -> Vec<Vec<&DomainPoint>> {
    let total = grid.len().pow(3);
    let stride = total.div_ceil(MAX_TRIPLES).max(1);
    let n = grid.len();
    (0..total)
        .step_by(stride)
        .map(|i| vec![&grid[i / (n * n)], &grid[(i / n) % n], &grid[i % n]])
        .collect()
}

/// Runs the parallelogram, doubling, defect and biadditivity checks on `grid`.
///
/// Combinations needing a point where `h` is unavailable are skipped and
/// counted; each check needs at least one tested combination to pass.
pub fn check_quadratic(
    sizer: &Sizer,
    h: &dyn Candidate,
    grid: &[DomainPoint],
    tol: f64,
) -> QuadraticityReport {
    let pairs: Vec<Vec<&DomainPoint>> = grid
        .iter()
        .flat_map(|x| grid.iter().map(move |y| vec![x, y]))
        .collect();
    let singles: Vec<Vec<&DomainPoint>> = grid.iter().map(|x| vec![x]).collect();
    let trips = triples(grid);

    let parallelogram = pairs
        .par_iter()
        .map(|a| {
            let (x, y) = (a[0], a[1]);
            let v = h
                .value_at(&x.add(y))?
                .add(&h.value_at(&x.sub(y))?)
                .sub(&h.value_at(x)?.scale(2.0))
                .sub(&h.value_at(y)?.scale(2.0));
            Some(size_or_inf(sizer, &v))
        })
        .collect();
    let doubling = singles
        .par_iter()
        .map(|a| {
            let x = a[0];
            Some(size_or_inf(
                sizer,
                &h.value_at(&x.scale(2.0))?.sub(&h.value_at(x)?.scale(4.0)),
            ))
        })
        .collect();
    let defect = trips
        .par_iter()
        .map(|a| {
            let pts = defect_points(a[0], a[1], a[2]);
            let mut vals = Vec::with_capacity(9);
            for p in &pts {
                vals.push(h.value_at(p)?);
            }
            let vals: [CodomainVector; 9] = vals.try_into().ok()?;
            Some(size_or_inf(sizer, &combine_defect(&vals)))
        })
        .collect();
    let biadditivity = trips
        .par_iter()
        .map(|a| {
            let (x, y, z) = (a[0], a[1], a[2]);
            let v = biadditive_form(h, &x.add(y), z)?
                .sub(&biadditive_form(h, x, z)?)
                .sub(&biadditive_form(h, y, z)?);
            Some(size_or_inf(sizer, &v))
        })
        .collect();

    let parallelogram = summarize(&pairs, parallelogram, tol);
    let doubling = summarize(&singles, doubling, tol);
    let defect = summarize(&trips, defect, tol);
    let biadditivity = summarize(&trips, biadditivity, tol);
    let passed = parallelogram.passed && doubling.passed && defect.passed && biadditivity.passed;
    QuadraticityReport {
        tol,
        parallelogram,
        doubling,
        defect,
        biadditivity,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::FunctionHandle;
    use crate::extractor::{ExtractedMap, ExtractionConfig};
    use crate::modular::ModularDescriptor;
    use crate::series::SeriesMode;

    fn p(x: f64) -> DomainPoint {
        DomainPoint::scalar(x)
    }

    fn abs() -> Sizer {
        ModularDescriptor::absolute_value().into()
    }

    fn square() -> FunctionHandle {
        FunctionHandle::scalar("x^2", |x| x * x).unwrap()
    }

    #[test]
    fn biadditive_examples() {
        assert_eq!(
            biadditive_form(&square(), &p(2.0), &p(3.0))
                .unwrap()
                .entries(),
            &[6.0]
        );
        assert_eq!(
            biadditive_form(&square(), &p(5.0), &p(0.0))
                .unwrap()
                .entries(),
            &[0.0]
        );
        let form = FunctionHandle::new("xMx", 2, 1, |x| {
            let c = x.coords();
            CodomainVector::scalar(c[0] * c[0] + 2.0 * c[0] * c[1] + 2.0 * c[1] * c[1])
        })
        .unwrap();
        let e1 = DomainPoint::new(vec![1.0, 0.0]);
        let e2 = DomainPoint::new(vec![0.0, 1.0]);
        // oracle: A(e1, e2) = e1ᵀ M e2 = M[0][1]
        assert_eq!(
            BiadditiveView::new(&form).eval(&e1, &e2).unwrap().entries(),
            &[1.0]
        );
    }

    #[test]
    fn integer_grid_shape() {
        let g = integer_grid(2, -1, 1);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0].coords(), &[-1.0, -1.0]);
        assert_eq!(g[5].coords(), &[0.0, 1.0]);
    }

    #[test]
    fn square_passes_exactly() {
        let r = check_quadratic(&abs(), &square(), &integer_grid(1, -4, 4), 1e-12);
        assert!(r.passed);
        for c in [&r.parallelogram, &r.doubling, &r.defect, &r.biadditivity] {
            assert_eq!(c.max_residual, 0.0);
            assert_eq!(c.skipped, 0);
        }
        assert_eq!(r.defect.tested, 729);
    }

    #[test]
    fn cube_fails_parallelogram() {
        let cube = FunctionHandle::scalar("x^3", |x| x * x * x).unwrap();
        let r = check_quadratic(&abs(), &cube, &[p(1.0)], 1e-9);
        assert!(!r.parallelogram.passed);
        assert_eq!(r.parallelogram.max_residual, 4.0);
        assert_eq!(r.parallelogram.witness, Some(vec![vec![1.0], vec![1.0]]));
    }

    #[test]
    fn extracted_limit_is_quadratic() {
        let phi = FunctionHandle::scalar("cos", |x| x * x + 0.1 * (1.0 - x.cos())).unwrap();
        let tol = 1e-10;
        let h = ExtractedMap::new(abs(), phi, ExtractionConfig::new(SeriesMode::Up, tol)).unwrap();
        let r = check_quadratic(&abs(), &h, &integer_grid(1, -3, 3), 10.0 * tol);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn large_grids_are_strided() {
        let g = integer_grid(1, -15, 15);
        let t = triples(&g);
        assert!(t.len() <= MAX_TRIPLES);
        assert!(t.len() > MAX_TRIPLES / 2);
        assert_eq!(t, triples(&g));
    }
}
