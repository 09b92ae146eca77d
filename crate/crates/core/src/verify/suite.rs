use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::CompletionRule;
use crate::seed::derive_seed;
use crate::theory::{catalog, pithy_expand, TheoryError};

use super::{
    axiom_satisfaction, duplication_test, exchangeability_test, forbidden_test, Subject, Verdict, VerificationReport,
    VerifyConfig, VerifyError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    Full,
    Quick,
}

impl std::str::FromStr for SuiteKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(SuiteKind::Full),
            "quick" => Ok(SuiteKind::Quick),
            _ => Err(format!("unknown suite `{s}`; expected full or quick")),
        }
    }
}

/// What a suite run covers; together with the seed it determines the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub kind: SuiteKind,
    pub seed: u64,
    pub config: VerifyConfig,
    /// Catalog entries checked for duplication and universal violations.
    pub theories: Vec<String>,
    pub exchangeability_theories: Vec<String>,
    pub exchangeability_n: usize,
    pub exchangeability_draws: usize,
    pub forbidden_n: usize,
    pub forbidden_draws: usize,
    /// Entries whose genuine axioms of premise width at most 2 get satisfaction curves.
    pub axiom_theories: Vec<String>,
    pub axiom_sizes: Vec<usize>,
    pub axiom_draws: usize,
}

/// Entries with an invariant measure, then entries failing duplication.
pub const FULL_CATALOG: &[&str] = &[
    "rado",
    "henson3",
    "henson_k(4)",
    "dlo",
    "universal_poset",
    "universal_tournament",
    "equiv_inf_classes",
    "q_min_semigroup",
    "equiv_classes_of(2)",
    "equiv_classes_of(3)",
    "blowup(henson3,2)",
];

pub const EXCHANGEABILITY_CATALOG: &[&str] =
    &["dlo", "rado", "henson3", "universal_poset", "universal_tournament", "equiv_inf_classes"];

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl SuiteSpec {
    pub fn new(kind: SuiteKind, seed: u64) -> Self {
        let config = VerifyConfig {
            bonferroni: EXCHANGEABILITY_CATALOG.len(),
            stop_at_target: true,
            rule: CompletionRule::Seeded(derive_seed(seed, "completion")),
            ..VerifyConfig::default()
        };
        match kind {
            SuiteKind::Full => SuiteSpec {
                kind,
                seed,
                config,
                theories: names(FULL_CATALOG),
                exchangeability_theories: names(EXCHANGEABILITY_CATALOG),
                exchangeability_n: 3,
                exchangeability_draws: 60_000,
                forbidden_n: 30,
                forbidden_draws: 1000,
                axiom_theories: names(&["rado", "dlo"]),
                axiom_sizes: vec![5, 10, 20, 50, 100, 200, 500, 1000, 2000],
                axiom_draws: 1000,
            },
            SuiteKind::Quick => SuiteSpec {
                kind,
                seed,
                config: VerifyConfig { max_width: 48, base_stages: 40, dup_width: 2, ..config },
                theories: names(&["rado", "henson3", "dlo", "equiv_classes_of(2)"]),
                exchangeability_theories: names(&["dlo", "rado"]),
                exchangeability_n: 3,
                exchangeability_draws: 3000,
                forbidden_n: 12,
                forbidden_draws: 50,
                axiom_theories: names(&["dlo"]),
                axiom_sizes: vec![5, 10, 20, 50],
                axiom_draws: 200,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub spec: SuiteSpec,
    pub reports: Vec<VerificationReport>,
}

impl SuiteReport {
    pub fn count(&self, v: Verdict) -> usize {
        self.reports.iter().filter(|r| r.verdict == v).count()
    }
}

#[derive(Clone, Debug)]
enum Task {
    Duplication,
    Forbidden,
    Exchangeability,
    Axiom(String),
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

/// Runs every (theory, test) pair of `spec` in parallel; reports come back in a fixed order.
pub fn run_suite(spec: &SuiteSpec) -> Result<SuiteReport, SuiteError> {
    let mut all: Vec<String> = spec.theories.clone();
    for t in spec.exchangeability_theories.iter().chain(&spec.axiom_theories) {
        if !all.contains(t) {
            all.push(t.clone());
        }
    }
    let subjects: Vec<Subject> = all
        .par_iter()
        .map(|name| Ok(Subject::prepare(Arc::new(pithy_expand(&catalog(name)?)?), &spec.config)))
        .collect::<Result<_, TheoryError>>()?;
    let mut tasks = Vec::new();
    for (i, name) in all.iter().enumerate() {
        if spec.theories.contains(name) {
            tasks.push((i, Task::Duplication));
            tasks.push((i, Task::Forbidden));
        }
        if spec.exchangeability_theories.contains(name) {
            tasks.push((i, Task::Exchangeability));
        }
        if spec.axiom_theories.contains(name) {
            for ax in subjects[i].theory.genuine_axioms().filter(|a| a.premise_width <= 2) {
                tasks.push((i, Task::Axiom(ax.label.clone())));
            }
        }
    }
    let reports = tasks
        .par_iter()
        .map(|(i, task)| {
            let s = &subjects[*i];
            let seed = derive_seed(spec.seed, &format!("{}/{task:?}", s.name));
            match task {
                Task::Duplication => Ok(duplication_test(s)),
                Task::Forbidden => forbidden_test(s, spec.forbidden_n, spec.forbidden_draws, seed),
                Task::Exchangeability => {
                    exchangeability_test(s, spec.exchangeability_n, spec.exchangeability_draws, seed, &spec.config)
                }
                Task::Axiom(label) => {
                    axiom_satisfaction(s, label, &spec.axiom_sizes, spec.axiom_draws, seed, &spec.config)
                }
            }
        })
        .collect::<Result<Vec<_>, VerifyError>>()?;
    Ok(SuiteReport { spec: spec.clone(), reports })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// JUnit-style XML, one test case per report.
pub fn to_junit_xml(r: &SuiteReport) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<testsuite name=\"forge-verify\" tests=\"{}\" failures=\"{}\" skipped=\"{}\">",
        r.reports.len(),
        r.count(Verdict::Fail),
        r.count(Verdict::Skipped)
    );
    for rep in &r.reports {
        let _ = write!(out, "  <testcase classname=\"{}\" name=\"{}\"", escape(&rep.theory), escape(&rep.test));
        let detail = escape(&serde_json::to_string(&rep.statistic).expect("statistics serialize"));
        match rep.verdict {
            Verdict::Pass => out.push_str("/>\n"),
            Verdict::Fail => {
                let _ = writeln!(out, ">\n    <failure message=\"{detail}\"/>\n  </testcase>");
            }
            Verdict::Skipped => {
                let _ = writeln!(out, ">\n    <skipped message=\"{}\"/>\n  </testcase>", escape(&rep.notes.join("; ")));
            }
        }
    }
    out.push_str("</testsuite>\n");
    out
}
