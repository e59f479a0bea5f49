//! The experiment pipeline: control check, vanishing condition, extraction,
//! certificate, quadraticity, uniqueness.

use quadstab::extractor::{CauchyRow, HomogeneityReport, UniquenessReport};
use quadstab::lab::SaturationInfo;
use quadstab::series::VanishingReport;
use quadstab::{
    build_instance, cauchy_profile, certify, check_control, check_quadratic, homogeneity_check,
    uniqueness_probe, vanishing_condition, Certificate, ControlFunction, ControlReport,
    DomainPoint, ExtractError, ExtractedMap, ExtractionConfig, ExtractionResult, Instance,
    InstanceSpec, QuadraticityReport, SeriesMode, Sizer, TripleGrid,
};
use serde::Serialize;

use crate::config::{mode_name, ExperimentConfig};
use crate::error::CliError;
use crate::table::Table;

/// Iterations used for the vanishing condition.
pub const VANISHING_N: usize = 40;

/// Slack allowed on the Cauchy envelope.
pub const CAUCHY_SLACK: f64 = 1e-10;

/// A validated configuration, resolved against its instance.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spec: InstanceSpec,
    pub sizer: Sizer,
    pub mode: SeriesMode,
    pub grid: Vec<DomainPoint>,
    pub quadratic_grid: Vec<DomainPoint>,
    explicit_control: Option<ControlFunction>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Setup {
    pub preset: Option<String>,
    pub instance: InstanceSpec,
    pub space: String,
    pub mode: SeriesMode,
    pub control: String,
    pub tolerance: f64,
    pub n_max: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointExtraction {
    pub point: Vec<f64>,
    pub converged: bool,
    pub n_used: Option<usize>,
    pub value: Option<Vec<f64>>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VanishingRow {
    pub point: Vec<f64>,
    pub last_value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VanishingSummary {
    pub tau: f64,
    pub rows: Vec<VanishingRow>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessSummary {
    pub seeds: [u64; 2],
    /// Discrepancies up to twice the extraction tolerance are accepted.
    pub limit: f64,
    #[serde(flatten)]
    pub report: UniquenessReport,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtractionReport {
    pub setup: Setup,
    pub points: Vec<PointExtraction>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub setup: Setup,
    pub control_check: ControlReport,
    pub vanishing: Option<VanishingSummary>,
    pub extraction: Vec<PointExtraction>,
    pub certificate: Certificate,
    pub quadraticity: QuadraticityReport,
    pub homogeneity: HomogeneityReport,
    pub uniqueness: UniquenessSummary,
    pub saturation: Option<SaturationInfo>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CauchyPoint {
    pub point: Vec<f64>,
    pub rows: Vec<CauchyRow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CauchyReport {
    pub setup: Setup,
    pub slack: f64,
    pub points: Vec<CauchyPoint>,
    /// Smallest `bound − residual` over all pairs.
    pub worst_margin: f64,
    pub passed: bool,
}

/// Output of one subcommand: a JSON report plus CSV tables.
pub struct Bundle<R> {
    pub report: R,
    pub tables: Vec<(&'static str, Table)>,
}

impl Experiment {
    /// Validates `config`; `seed` overrides the instance seed.
    ///
    /// Divergent mode/control pairs are rejected here, before any instance
    /// is built or iterated.
    pub fn new(config: &ExperimentConfig, seed: Option<u64>) -> Result<Self, CliError> {
        config.validate_tolerances()?;
        let spec = config.instance_spec(seed)?;
        let sizer = config.sizer()?;
        let mode = config.series_mode(&sizer)?;
        let shape = config.control_shape(&spec)?;
        config.check_mode_control(mode, &shape)?;
        let dim = spec.dim();
        Ok(Experiment {
            grid: config.certificate_grid(dim)?,
            quadratic_grid: config.quadratic_grid(dim)?,
            explicit_control: config.explicit_control(&spec)?,
            config: config.clone(),
            spec,
            sizer,
            mode,
        })
    }

    pub fn tolerance(&self) -> f64 {
        self.config.tolerances.extraction
    }

    pub fn instance(&self, seed: u64) -> Result<Instance, CliError> {
        Ok(build_instance(&self.spec.with_seed(seed), &self.sizer)?)
    }

    pub fn control(&self, inst: &Instance) -> ControlFunction {
        self.explicit_control
            .clone()
            .unwrap_or_else(|| inst.control.clone())
    }

    pub fn extraction_config(&self, control: &ControlFunction) -> ExtractionConfig {
        ExtractionConfig::new(self.mode, self.tolerance())
            .with_n_max(self.config.tolerances.n_max)
            .with_control(control.clone())
    }

    pub fn extracted(&self, inst: &Instance) -> Result<ExtractedMap, CliError> {
        let cfg = self.extraction_config(&self.control(inst));
        Ok(ExtractedMap::new(
            self.sizer.clone(),
            inst.phi.clone(),
            cfg,
        )?)
    }

    fn setup(&self, control: &ControlFunction) -> Setup {
        Setup {
            preset: self.config.instance.preset.clone(),
            instance: self.spec.clone(),
            space: self.sizer.label(),
            mode: self.mode,
            control: control.label(),
            tolerance: self.tolerance(),
            n_max: self.config.tolerances.n_max,
        }
    }

    /// Extracts `h` on the certificate grid.
    pub fn run_extract(&self) -> Result<Bundle<ExtractionReport>, CliError> {
        let inst = self.instance(self.spec.seed)?;
        let control = self.control(&inst);
        let h = self.extracted(&inst)?;
        let results = h.prefetch(&self.grid);
        let points = summarize_points(&self.grid, &results);
        let passed = points.iter().all(|p| p.converged);
        Ok(Bundle {
            tables: vec![(
                "traces.csv",
                trace_table(
                    &self.grid,
                    &results,
                    self.spec.dim(),
                    inst.phi.codomain_dim(),
                ),
            )],
            report: ExtractionReport {
                setup: self.setup(&control),
                points,
                passed,
            },
        })
    }

    /// The whole pipeline.
    pub fn run(&self) -> Result<Bundle<ExperimentReport>, CliError> {
        let inst = self.instance(self.spec.seed)?;
        let control = self.control(&inst);

        let mut triples = inst.triples.triples().to_vec();
        triples.extend_from_slice(TripleGrid::product(&self.grid).triples());
        let control_check =
            check_control(&self.sizer, &inst.phi, &control, &TripleGrid::new(triples));

        let vanishing = match self.mode {
            SeriesMode::Down { tau } => Some(vanishing_summary(&control, tau, &self.grid)),
            _ => None,
        };

        let h = self.extracted(&inst)?;
        let results = h.prefetch(&self.grid);
        let extraction = summarize_points(&self.grid, &results);
        let certificate = certify(&self.sizer, &inst.phi, &h, &self.grid, &control, self.mode);
        let quadraticity = check_quadratic(
            &self.sizer,
            &h,
            &self.quadratic_grid,
            self.config.tolerances.quadratic,
        );
        let homogeneity = homogeneity_check(
            &self.sizer,
            &h,
            &self.quadratic_grid,
            self.config.tolerances.quadratic,
        )
        .map_err(ExtractError::from)?;
        let uniqueness = self.uniqueness_against(&inst, &h, self.spec.seed.wrapping_add(1))?;

        let passed = control_check.passed
            && vanishing.as_ref().is_none_or(|v| v.passed)
            && extraction.iter().all(|p| p.converged)
            && certificate.passed
            && quadraticity.passed
            && homogeneity.passed
            && uniqueness.passed;
        let dim = self.spec.dim();
        let codim = inst.phi.codomain_dim();
        Ok(Bundle {
            tables: vec![
                ("certificate.csv", certificate_table(&certificate, dim)),
                ("traces.csv", trace_table(&self.grid, &results, dim, codim)),
            ],
            report: ExperimentReport {
                setup: self.setup(&control),
                control_check,
                vanishing,
                extraction,
                certificate,
                quadraticity,
                homogeneity,
                uniqueness,
                saturation: inst.saturation.clone(),
                passed,
            },
        })
    }

    fn uniqueness_against(
        &self,
        inst: &Instance,
        h: &ExtractedMap,
        seed2: u64,
    ) -> Result<UniquenessSummary, CliError> {
        let other = self.instance(seed2)?;
        let h2 = self.extracted(&other)?;
        h.prefetch(&self.quadratic_grid);
        h2.prefetch(&self.quadratic_grid);
        let report = uniqueness_probe(&self.sizer, h, &h2, &self.quadratic_grid)
            .map_err(ExtractError::from)?;
        let limit = 2.0 * self.tolerance();
        let passed = report.evaluated > 0 && report.max_discrepancy <= limit;
        Ok(UniquenessSummary {
            seeds: [inst.spec.seed, seed2],
            limit,
            report,
            passed,
        })
    }

    /// Compares the extractions from the configured seed and the next one.
    pub fn run_uniqueness(&self) -> Result<Bundle<UniquenessSummary>, CliError> {
        let inst = self.instance(self.spec.seed)?;
        let h = self.extracted(&inst)?;
        let report = self.uniqueness_against(&inst, &h, self.spec.seed.wrapping_add(1))?;
        Ok(Bundle {
            report,
            tables: Vec::new(),
        })
    }

    /// `size(s_n − s_m)` against the partial control sums, `0 ≤ m < n ≤ cauchy_n_max`.
    pub fn run_cauchy(&self) -> Result<Bundle<CauchyReport>, CliError> {
        if matches!(self.mode, SeriesMode::Down { .. }) {
            return Err(CliError::Config {
                field: "mode.kind".into(),
                message: "the Cauchy profile is defined for up and beta modes".into(),
            });
        }
        let inst = self.instance(self.spec.seed)?;
        let control = self.control(&inst);
        let n_max = self.config.grid.cauchy_n_max;
        let pairs: Vec<(usize, usize)> = (0..n_max)
            .flat_map(|m| (m + 1..=n_max).map(move |n| (m, n)))
            .collect();
        let mut points = Vec::with_capacity(self.grid.len());
        let mut worst = f64::INFINITY;
        let mut table = Table::new(
            coord_headers("x", self.spec.dim())
                .into_iter()
                .chain(["m", "n", "residual", "bound", "margin"].map(String::from)),
        );
        for x in &self.grid {
            let rows = cauchy_profile(&self.sizer, &inst.phi, x, &control, self.mode, &pairs)?;
            for r in &rows {
                let margin = r.bound - r.residual;
                worst = worst.min(margin);
                let mut rec = fmt_all(x.coords());
                rec.extend([
                    r.m.to_string(),
                    r.n.to_string(),
                    fmt(r.residual),
                    fmt(r.bound),
                    fmt(margin),
                ]);
                table.push(rec);
            }
            points.push(CauchyPoint {
                point: x.coords().to_vec(),
                rows,
            });
        }
        Ok(Bundle {
            report: CauchyReport {
                setup: self.setup(&control),
                slack: CAUCHY_SLACK,
                passed: worst >= -CAUCHY_SLACK,
                worst_margin: worst,
                points,
            },
            tables: vec![("cauchy.csv", table)],
        })
    }
}

fn vanishing_summary(
    control: &ControlFunction,
    tau: f64,
    grid: &[DomainPoint],
) -> VanishingSummary {
    let rows: Vec<VanishingRow> = grid
        .iter()
        .map(|x| {
            let VanishingReport { values, passed } =
                vanishing_condition(control, tau, x, x, x, VANISHING_N);
            VanishingRow {
                point: x.coords().to_vec(),
                last_value: values.last().copied().unwrap_or(f64::NAN),
                passed,
            }
        })
        .collect();
    VanishingSummary {
        tau,
        passed: rows.iter().all(|r| r.passed),
        rows,
    }
}

fn summarize_points(
    grid: &[DomainPoint],
    results: &[Result<ExtractionResult, ExtractError>],
) -> Vec<PointExtraction> {
    grid.iter()
        .zip(results)
        .map(|(x, r)| match r {
            Ok(r) => PointExtraction {
                point: x.coords().to_vec(),
                converged: r.converged,
                n_used: Some(r.n_used),
                value: Some(r.value.entries().to_vec()),
                residual: Some(r.residual),
                error: None,
            },
            Err(e) => PointExtraction {
                point: x.coords().to_vec(),
                converged: false,
                n_used: None,
                value: None,
                residual: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

fn coord_headers(prefix: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![prefix.to_string()]
    } else {
        (0..dim).map(|i| format!("{prefix}{i}")).collect()
    }
}

/// Shortest round-tripping decimal; non-finite values become `NaN`/`inf`.
pub fn fmt(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite float serializes")
    } else {
        v.to_string()
    }
}

fn fmt_all(v: &[f64]) -> Vec<String> {
    v.iter().map(|&c| fmt(c)).collect()
}

/// One row per (grid point, n).
pub fn trace_table(
    grid: &[DomainPoint],
    results: &[Result<ExtractionResult, ExtractError>],
    dim: usize,
    codim: usize,
) -> Table {
    let mut header = coord_headers("x", dim);
    header.push("n".into());
    header.extend(coord_headers("s", codim));
    header.extend(["residual", "bound"].map(String::from));
    let mut table = Table::new(header);
    for (x, r) in grid.iter().zip(results) {
        let Ok(r) = r else { continue };
        for row in &r.trace {
            let mut rec = fmt_all(x.coords());
            rec.push(row.n.to_string());
            rec.extend(fmt_all(&row.iterate));
            rec.push(fmt(row.residual));
            rec.push(row.bound.map(fmt).unwrap_or_default());
            table.push(rec);
        }
    }
    table
}

/// One row per certified grid point.
pub fn certificate_table(cert: &Certificate, dim: usize) -> Table {
    let mut header = coord_headers("x", dim);
    header.extend(["measured", "bound", "margin"].map(String::from));
    let mut table = Table::new(header);
    for r in &cert.rows {
        let mut rec = fmt_all(&r.point);
        rec.extend([fmt(r.measured), fmt(r.bound), fmt(r.margin)]);
        table.push(rec);
    }
    table
}

/// One-line human summary of a run.
pub fn describe(report: &ExperimentReport) -> String {
    format!(
        "{} mode, {}, {}: certificate {} (min margin {}), quadratic {}, uniqueness {} ({})",
        mode_name(report.setup.mode),
        report.setup.space,
        report.setup.control,
        pass_word(report.certificate.passed),
        fmt(report.certificate.min_margin()),
        pass_word(report.quadraticity.passed),
        pass_word(report.uniqueness.passed),
        fmt(report.uniqueness.report.max_discrepancy),
    )
}

pub fn pass_word(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "FAIL"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(name: &str) -> ExperimentReport {
        let cfg = ExperimentConfig::for_preset(name).unwrap();
        Experiment::new(&cfg, None).unwrap().run().unwrap().report
    }

    #[test]
    fn bounded_pipeline_passes() {
        let r = run("bounded-0.1-seed1");
        assert!(r.passed, "{}", describe(&r));
        assert!(r.certificate.max_margin() > 0.0);
        // oracle: ε/3 with ε = 9·0.1
        for row in &r.certificate.rows {
            assert!((row.bound - 0.3).abs() < 1e-12);
        }
        assert!(r.vanishing.is_none());
    }

    #[test]
    fn down_pipeline_uses_three_quarters_theta() {
        let cfg = ExperimentConfig::for_preset("power-r3-tau2").unwrap();
        let e = Experiment::new(&cfg, None).unwrap();
        let theta = match e.control(&e.instance(0).unwrap()) {
            ControlFunction::Power { theta, .. } => theta,
            c => panic!("{c:?}"),
        };
        let r = e.run().unwrap().report;
        assert!(r.passed, "{}", describe(&r));
        for row in &r.certificate.rows {
            let x: f64 = row.point[0];
            // oracle: 3θτ²/(2(2^{r+1} − τ³))·|x|^r at τ = 2, r = 3
            let expected = 3.0 * theta * 4.0 / (2.0 * (16.0 - 8.0)) * x.abs().powi(3);
            assert!(
                (row.bound - expected).abs() <= 1e-10 * expected,
                "{} vs {expected}",
                row.bound
            );
        }
        assert!(r.vanishing.as_ref().unwrap().passed);
    }

    #[test]
    fn tables_have_fixed_columns() {
        let cfg = ExperimentConfig::for_preset("bounded-0.1-seed1").unwrap();
        let b = Experiment::new(&cfg, None).unwrap().run().unwrap();
        let (name, cert) = &b.tables[0];
        assert_eq!(*name, "certificate.csv");
        assert_eq!(cert.header(), ["x", "measured", "bound", "margin"]);
        assert_eq!(cert.len(), 6);
        let (_, traces) = &b.tables[1];
        assert_eq!(traces.header(), ["x", "n", "s", "residual", "bound"]);
        let rows: usize = b
            .report
            .extraction
            .iter()
            .map(|p| p.n_used.unwrap() + 1)
            .sum();
        assert!(traces.len() >= rows);
    }

    #[test]
    fn cauchy_envelope_on_bounded() {
        let cfg = ExperimentConfig::for_preset("bounded-0.1-seed1").unwrap();
        let b = Experiment::new(&cfg, None).unwrap().run_cauchy().unwrap();
        assert!(b.report.passed, "worst {}", b.report.worst_margin);
        assert_eq!(b.report.points[0].rows.len(), 210);
    }

    #[test]
    fn fmt_round_trips() {
        for v in [0.1, 1e-10, -3.0, 0.30000000000000004, 1e300] {
            assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt(2.0), "2.0");
        assert_eq!(fmt(f64::INFINITY), "inf");
    }
}
