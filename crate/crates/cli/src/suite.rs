//! Axiom checks over the shipped modulars and F-norms.

use quadstab::modular::Ladder;
use quadstab::{
    check_fnorm_axioms, check_modular_axioms, delta2_estimate, sample_pairs, AxiomReport, BaseNorm,
    CodomainVector, Delta2Estimate, FNormDescriptor, ModularDescriptor, OrliczGenerator, Sizer,
};
use serde::Serialize;

use crate::config::AxiomSection;
use crate::experiment::fmt;
use crate::table::Table;

#[derive(Clone, Debug, Serialize)]
pub struct SuiteEntry {
    pub subject: String,
    pub passed: bool,
    pub report: AxiomReport,
    /// Δ₂ estimate along the all-ones direction, for modulars.
    pub delta2: Option<Delta2Estimate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub samples: usize,
    pub seed: u64,
    pub entries: Vec<SuiteEntry>,
    pub passed: bool,
}

/// Modulars and F-norms the library ships.
pub fn shipped_spaces() -> Vec<Sizer> {
    let mut out: Vec<Sizer> = vec![ModularDescriptor::absolute_value().into()];
    for p in [0.5, 1.0, 2.0, 3.0] {
        out.push(ModularDescriptor::power(p).expect("valid exponent").into());
    }
    for g in [
        OrliczGenerator::Power { p: 1.5 },
        OrliczGenerator::ExpMinusOne,
        OrliczGenerator::ExpMinusOneMinusT,
    ] {
        out.push(
            ModularDescriptor::orlicz(g)
                .expect("valid generator")
                .into(),
        );
    }
    for beta in [0.25, 0.5, 1.0] {
        for base in [BaseNorm::Euclidean, BaseNorm::MaxAbs] {
            out.push(FNormDescriptor::new(beta, base).into());
        }
    }
    out
}

pub fn check_space(sizer: &Sizer, samples: &[(CodomainVector, CodomainVector)]) -> SuiteEntry {
    let dim = samples.first().map(|(u, _)| u.dim()).unwrap_or(1);
    let (report, delta2) = match sizer {
        Sizer::Modular(m) => (
            check_modular_axioms(m, samples),
            Some(delta2_estimate(
                m,
                &Ladder::default(),
                &CodomainVector::new(vec![1.0; dim]),
            )),
        ),
        Sizer::FNorm(f) => (check_fnorm_axioms(f, samples), None),
    };
    SuiteEntry {
        subject: sizer.label(),
        passed: report.passed(),
        report,
        delta2,
    }
}

pub fn emit_axiom_suite(spaces: &[Sizer], sec: &AxiomSection, seed: u64) -> SuiteReport {
    let samples = sample_pairs(sec.dim, sec.samples, sec.radius, seed);
    let entries: Vec<SuiteEntry> = spaces.iter().map(|s| check_space(s, &samples)).collect();
    SuiteReport {
        samples: sec.samples,
        seed,
        passed: entries.iter().all(|e| e.passed),
        entries,
    }
}

/// One row per (subject, axiom).
pub fn suite_table(report: &SuiteReport) -> Table {
    let mut t =
        Table::new(["subject", "axiom", "passed", "worst_margin", "checks"].map(String::from));
    for e in &report.entries {
        for a in &e.report.entries {
            t.push(vec![
                e.subject.clone(),
                a.id.clone(),
                a.passed.to_string(),
                fmt(a.worst_margin),
                a.checks.to_string(),
            ]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::abs_plus_one;

    #[test]
    fn shipped_suite_passes() {
        let r = emit_axiom_suite(&shipped_spaces(), &AxiomSection::default(), 0);
        for e in &r.entries {
            assert!(
                e.passed,
                "{}: {:?}",
                e.subject,
                e.report.failures().collect::<Vec<_>>()
            );
        }
        assert!(r.passed);
    }

    #[test]
    fn abs_plus_one_fails_zero() {
        let r = emit_axiom_suite(&[abs_plus_one().into()], &AxiomSection::default(), 0);
        assert!(!r.passed);
        assert!(!r.entries[0].report.entry("zero").unwrap().passed);
    }

    #[test]
    fn delta2_by_kind() {
        let r = emit_axiom_suite(
            &shipped_spaces(),
            &AxiomSection {
                samples: 4,
                ..Default::default()
            },
            0,
        );
        let find = |s: &str| {
            r.entries
                .iter()
                .find(|e| e.subject.contains(s))
                .unwrap()
                .delta2
                .clone()
        };
        assert!(matches!(
            find("exp"),
            Some(Delta2Estimate::Divergent { .. })
        ));
        assert!(find("^0.5").is_none());
    }
}
