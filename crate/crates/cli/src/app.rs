//! Command-line parsing and subcommand dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::audit::{audit_table, corollary_table};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiment::{describe, fmt as num, pass_word, Bundle, Experiment};
use crate::suite::{emit_axiom_suite, shipped_spaces, suite_table};

#[derive(Parser, Debug)]
#[command(
    name = "quadstab",
    version,
    about = "Stability experiments for the nine-term quadratic equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Check modular or F-norm axioms (the shipped suite without --config).
    VerifyAxioms,
    /// Extract the quadratic limit on the certificate grid.
    Extract,
    /// Run the full pipeline and certify the distance bound.
    Certify,
    /// Compare closed-form constants with summed control series.
    CorollaryTable,
    /// Measure successive-iterate distances against partial control sums.
    CauchyProfile,
    /// Compare the limits extracted from two seeds.
    Uniqueness,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the instance seed (or the sample seed for verify-axioms).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; defaults to `output.dir` or `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub parallel: usize,
    /// What to print on stdout; both JSON and CSV files are always written.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Files and stdout text produced by one subcommand.
pub struct Output {
    pub passed: bool,
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("reports serialize");
    v.push(b'\n');
    v
}

fn output<R: Serialize>(
    passed: bool,
    name: &str,
    bundle: Bundle<R>,
    summary: String,
    format: Format,
) -> Output {
    let json = json_bytes(&bundle.report);
    let stdout = match (format, bundle.tables.first()) {
        (Format::Csv, Some((_, t))) => String::from_utf8(t.to_csv()).expect("utf-8 csv"),
        (Format::Json, _) | (_, None) => String::from_utf8(json.clone()).expect("utf-8 json"),
    };
    let mut files = vec![(name.to_string(), json)];
    files.extend(
        bundle
            .tables
            .iter()
            .map(|(n, t)| (n.to_string(), t.to_csv())),
    );
    Output {
        passed,
        files,
        summary: format!("{stdout}{summary}\n"),
    }
}

fn load(common: &Common) -> Result<Option<ExperimentConfig>, CliError> {
    common
        .config
        .as_deref()
        .map(ExperimentConfig::load)
        .transpose()
}

fn require(config: Option<ExperimentConfig>, command: &str) -> Result<ExperimentConfig, CliError> {
    config.ok_or_else(|| CliError::Config {
        field: "--config".into(),
        message: format!("required by `{command}`"),
    })
}

/// Runs one subcommand without touching the file system.
pub fn execute(command: Command, common: &Common) -> Result<Output, CliError> {
    let config = load(common)?;
    let fmt = common.format;
    match command {
        Command::VerifyAxioms => {
            let (spaces, sec) = match &config {
                Some(c) => {
                    c.validate_tolerances()?;
                    (vec![c.sizer()?], c.axioms.clone())
                }
                None => (shipped_spaces(), Default::default()),
            };
            let report = emit_axiom_suite(&spaces, &sec, common.seed.unwrap_or(0));
            let lines: Vec<String> = report
                .entries
                .iter()
                .map(|e| format!("{}: {}", e.subject, pass_word(e.passed)))
                .collect();
            let passed = report.passed;
            let table = suite_table(&report);
            Ok(output(
                passed,
                "axioms.json",
                Bundle {
                    report,
                    tables: vec![("axioms.csv", table)],
                },
                lines.join("\n"),
                fmt,
            ))
        }
        Command::CorollaryTable => {
            let rows = corollary_table();
            let lines: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "{} [{}]: {} = {}, series {} → {:?}",
                        r.id,
                        r.parameters,
                        r.formula,
                        num(r.closed_form),
                        num(r.oracle),
                        r.verdict
                    )
                })
                .collect();
            let table = audit_table(&rows);
            Ok(output(
                true,
                "corollary.json",
                Bundle {
                    report: rows,
                    tables: vec![("corollary.csv", table)],
                },
                lines.join("\n"),
                fmt,
            ))
        }
        Command::Extract => {
            let exp = Experiment::new(&require(config, "extract")?, common.seed)?;
            let b = exp.run_extract()?;
            let passed = b.report.passed;
            let n = b.report.points.iter().filter(|p| p.converged).count();
            let summary = format!("extract: {n}/{} points converged", b.report.points.len());
            Ok(output(passed, "extraction.json", b, summary, fmt))
        }
        Command::Certify => {
            let exp = Experiment::new(&require(config, "certify")?, common.seed)?;
            let b = exp.run()?;
            let summary = format!("certify: {}", describe(&b.report));
            Ok(output(b.report.passed, "report.json", b, summary, fmt))
        }
        Command::CauchyProfile => {
            let exp = Experiment::new(&require(config, "cauchy-profile")?, common.seed)?;
            let b = exp.run_cauchy()?;
            let summary = format!(
                "cauchy-profile: {} (worst margin {})",
                pass_word(b.report.passed),
                num(b.report.worst_margin)
            );
            Ok(output(b.report.passed, "cauchy.json", b, summary, fmt))
        }
        Command::Uniqueness => {
            let exp = Experiment::new(&require(config, "uniqueness")?, common.seed)?;
            let b = exp.run_uniqueness()?;
            let r = &b.report;
            let summary = format!(
                "uniqueness: seeds {:?}, max discrepancy {} (limit {}) {}",
                r.seeds,
                num(r.report.max_discrepancy),
                num(r.limit),
                pass_word(r.passed)
            );
            Ok(output(r.passed, "uniqueness.json", b, summary, fmt))
        }
    }
}

fn out_dir(common: &Common) -> Result<PathBuf, CliError> {
    if let Some(o) = &common.out {
        return Ok(o.clone());
    }
    Ok(load(common)?
        .and_then(|c| c.output.dir)
        .unwrap_or_else(|| PathBuf::from("out")))
}

fn write_files(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Runs `cli` and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.parallel)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 2;
        }
    };
    let result = pool.install(|| {
        let out = execute(cli.command, &cli.common)?;
        write_files(&out_dir(&cli.common)?, &out.files)?;
        Ok::<_, CliError>(out)
    });
    match result {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.summary.as_bytes());
            if out.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
