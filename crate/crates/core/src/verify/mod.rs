//! Statistical and exact batteries over sampled structures, with reproducible reports.

mod suite;

pub use suite::{
    run_suite, to_junit_xml, SuiteError, SuiteKind, SuiteReport, SuiteSpec, EXCHANGEABILITY_CATALOG, FULL_CATALOG,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::closure::{check_duplication, DuplicationReport};
use crate::construction::{CompletionRule, ConstructionError, ConstructionTrace, EngineConfig};
use crate::logic::{diagram_of, FiniteStructure};
use crate::sampler::{MeasureSpec, Sampler, SamplerError};
use crate::seed::derive_seed;
use crate::theory::{AgeOracle, PithyTheory};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("unknown axiom `{0}`")]
    UnknownAxiom(String),
    #[error("sample size {n} is smaller than the premise width {k}")]
    SampleTooSmall { n: usize, k: usize },
    #[error("exchangeability needs 1 <= n <= 4, got {0}")]
    SizeOutOfRange(usize),
    #[error("samples have mixed sizes or signatures")]
    MixedSamples,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub successes: usize,
    pub draws: usize,
    pub rate: f64,
    /// 95% Wilson interval.
    pub ci: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    ChiSquare {
        stat: f64,
        dof: usize,
        p_value: f64,
        /// Distinct labeled structures observed.
        observed_cells: usize,
        /// Isomorphism classes contributing at least two merged cells.
        tested_orbits: usize,
    },
    Violations {
        count: usize,
        violating_samples: usize,
        samples: usize,
        first: Option<(String, Vec<usize>)>,
    },
    RateCurve {
        points: Vec<RatePoint>,
        monotone: bool,
    },
    Duplication {
        width: usize,
        checked: usize,
        counterexample: Option<String>,
    },
    None,
}

/// Outcome of one test on one theory. The verdict is a function of statistic and threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theory: String,
    pub test: String,
    pub draws: usize,
    pub statistic: Statistic,
    pub threshold: f64,
    pub verdict: Verdict,
    pub seeds: Vec<u64>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn skipped(theory: &str, test: &str, seeds: Vec<u64>, reason: String) -> Self {
        VerificationReport {
            theory: theory.to_string(),
            test: test.to_string(),
            draws: 0,
            statistic: Statistic::None,
            threshold: 0.0,
            verdict: Verdict::Skipped,
            seeds,
            notes: vec![reason],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }
}

/// Knobs shared by the batteries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Stage cap of the base trace; building also stops at `max_width`.
    pub base_stages: usize,
    pub max_width: usize,
    pub measure: MeasureSpec,
    /// Width bound of the duplication gate.
    pub dup_width: usize,
    /// Per-test significance level before Bonferroni correction.
    pub alpha: f64,
    /// Number of tests sharing `alpha`.
    pub bonferroni: usize,
    /// Satisfaction rate an axiom curve must reach.
    pub target: f64,
    /// Stop a satisfaction curve at the first size reaching `target`.
    pub stop_at_target: bool,
    /// Completion rule of the base trace.
    #[serde(default)]
    pub rule: CompletionRule,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            base_stages: 200,
            max_width: 96,
            measure: MeasureSpec::default(),
            dup_width: 3,
            alpha: 1e-3,
            bonferroni: 1,
            target: 0.95,
            stop_at_target: false,
            rule: CompletionRule::LexMin,
        }
    }
}

impl VerifyConfig {
    pub fn threshold(&self) -> f64 {
        self.alpha / self.bonferroni.max(1) as f64
    }
}

/// A theory with its base sampler, or the reason it cannot be sampled.
#[derive(Clone, Debug)]
pub struct Subject {
    pub name: String,
    pub theory: Arc<PithyTheory>,
    pub oracle: Arc<AgeOracle>,
    pub duplication: DuplicationReport,
    pub sampler: Result<Sampler, String>,
    /// Completion rule the base trace was built with.
    pub rule: CompletionRule,
}

impl Subject {
    /// Gates on duplication at `dup_width`, then builds the base trace up to the
    /// stage or width cap.
    pub fn prepare(theory: Arc<PithyTheory>, cfg: &VerifyConfig) -> Self {
        let oracle = Arc::new(AgeOracle::new(theory.clone()));
        let name = theory.name.clone();
        let dup = check_duplication(&oracle, cfg.dup_width);
        let mut rule = cfg.rule;
        let sampler = if let Some(p) = &dup.counterexample {
            Err(format!(
                "duplication fails at width {}: the type {} has no duplicating extension, \
                 so the age has nontrivial definable closure and no invariant measure exists",
                cfg.dup_width,
                serde_json::to_string(p).expect("types serialize")
            ))
        } else {
            let build = |rule| {
                let config = EngineConfig { max_width: cfg.max_width, rule, ..EngineConfig::default() };
                ConstructionTrace::run_until_cap(theory.clone(), cfg.base_stages, config)
            };
            // A seeded rule whose search runs out of budget falls back to LexMin.
            let built = match build(cfg.rule) {
                Err(ConstructionError::Budget(_)) if cfg.rule != CompletionRule::LexMin => {
                    rule = CompletionRule::LexMin;
                    build(rule)
                }
                other => other,
            };
            match built {
                Ok((t, _)) => Sampler::new(Arc::new(t), cfg.measure.clone()).map_err(|e| e.to_string()),
                Err(e) => Err(skip_reason(&e)),
            }
        };
        Subject { name, theory, oracle, duplication: dup, sampler, rule }
    }

    /// Draws `draws` structures of size `n`; duplication failures become a skip reason.
    pub fn draw(&self, n: usize, draws: usize, seed: u64) -> Result<Result<Vec<FiniteStructure>, String>, VerifyError> {
        let sampler = match &self.sampler {
            Ok(s) => s,
            Err(reason) => return Ok(Err(reason.clone())),
        };
        match sampler.draw_many(n, draws, seed) {
            Ok(v) => Ok(Ok(v.into_iter().map(|s| s.structure).collect())),
            Err(SamplerError::Construction(e @ ConstructionError::DuplicationFailure { .. })) => {
                Ok(Err(skip_reason(&e)))
            }
            Err(e) => Err(e.into()),
        }
    }
}

fn skip_reason(e: &ConstructionError) -> String {
    match e {
        ConstructionError::DuplicationFailure { .. } => format!("{e}; no invariant measure exists"),
        _ => e.to_string(),
    }
}

/// Chi-square statistic of labeled-structure counts against their symmetrization.
///
/// Within an isomorphism class every labeling has the same expected count. Labelings
/// are pooled in encoding order into groups of expected count at least 5; a class with
/// fewer than two groups is not tested.
pub fn symmetrization_chi_square(samples: &[FiniteStructure]) -> Result<Statistic, VerifyError> {
    let Some(first) = samples.first() else {
        return Ok(Statistic::ChiSquare {
            stat: 0.0,
            dof: 0,
            p_value: 1.0,
            observed_cells: 0,
            tested_orbits: 0,
        });
    };
    let n = first.size();
    if !(1..=4).contains(&n) {
        return Err(VerifyError::SizeOutOfRange(n));
    }
    if samples.iter().any(|s| s.size() != n || s.signature() != first.signature()) {
        return Err(VerifyError::MixedSamples);
    }
    let mut counts: HashMap<Vec<u8>, (usize, &FiniteStructure)> = HashMap::new();
    for s in samples {
        counts.entry(s.encode()).or_insert((0, s)).0 += 1;
    }
    let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let mut orbits: BTreeMap<Vec<u8>, BTreeSet<Vec<u8>>> = BTreeMap::new();
    for (_, s) in counts.values() {
        let labelings: BTreeSet<Vec<u8>> = perms.iter().map(|p| s.permute(p).encode()).collect();
        let rep = labelings.iter().next().expect("at least the identity").clone();
        orbits.entry(rep).or_insert(labelings);
    }
    let (mut stat, mut dof, mut tested) = (0.0, 0usize, 0usize);
    for labelings in orbits.values() {
        let size = labelings.len();
        let total: usize = labelings.iter().map(|k| counts.get(k).map_or(0, |c| c.0)).sum();
        let expected = total as f64 / size as f64;
        let per_group = (5.0 / expected).ceil().max(1.0) as usize;
        let groups = size / per_group;
        if groups < 2 {
            continue;
        }
        tested += 1;
        dof += groups - 1;
        let cells: Vec<usize> = labelings.iter().map(|k| counts.get(k).map_or(0, |c| c.0)).collect();
        for g in 0..groups {
            let end = if g + 1 == groups { size } else { (g + 1) * per_group };
            let chunk = &cells[g * per_group..end];
            let obs: usize = chunk.iter().sum();
            let exp = expected * chunk.len() as f64;
            stat += (obs as f64 - exp).powi(2) / exp;
        }
    }
    let p_value = if dof == 0 { 1.0 } else { ChiSquared::new(dof as f64).expect("positive dof").sf(stat) };
    Ok(Statistic::ChiSquare { stat, dof, p_value, observed_cells: counts.len(), tested_orbits: tested })
}

/// Exchangeability verdict for given samples: PASS iff the p-value exceeds `threshold`.
pub fn exchangeability_from_samples(
    theory: &str,
    samples: &[FiniteStructure],
    threshold: f64,
    seeds: Vec<u64>,
) -> Result<VerificationReport, VerifyError> {
    let statistic = symmetrization_chi_square(samples)?;
    let Statistic::ChiSquare { p_value, dof, .. } = statistic else { unreachable!() };
    let mut notes = Vec::new();
    if dof == 0 {
        notes.push("no isomorphism class had enough mass to test".to_string());
    }
    Ok(VerificationReport {
        theory: theory.to_string(),
        test: "exchangeability".into(),
        draws: samples.len(),
        statistic,
        threshold,
        verdict: if p_value > threshold { Verdict::Pass } else { Verdict::Fail },
        seeds,
        notes,
    })
}

pub fn exchangeability_test(
    subject: &Subject,
    n: usize,
    draws: usize,
    seed: u64,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, VerifyError> {
    if !(1..=4).contains(&n) {
        return Err(VerifyError::SizeOutOfRange(n));
    }
    match subject.draw(n, draws, seed)? {
        Ok(samples) => exchangeability_from_samples(&subject.name, &samples, cfg.threshold(), vec![seed]),
        Err(reason) => Ok(VerificationReport::skipped(&subject.name, "exchangeability", vec![seed], reason)),
    }
}

/// 95% Wilson score interval.
pub fn wilson_interval(successes: usize, draws: usize) -> (f64, f64) {
    if draws == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = draws as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Each point's interval reaches at least the lower end of every earlier interval.
pub fn monotone_within_ci(points: &[RatePoint]) -> bool {
    points.iter().enumerate().all(|(j, b)| points[..j].iter().all(|a| b.ci.1 >= a.ci.0))
}

/// Whether the tuple `(0..k-1)` has a witness for `label` in `s`, internal or not.
pub fn witnessed(theory: &PithyTheory, label: &str, s: &FiniteStructure) -> Result<bool, VerifyError> {
    let ax = theory.axioms.iter().find(|a| a.label == label).ok_or_else(|| VerifyError::UnknownAxiom(label.into()))?;
    let k = ax.premise_width;
    if s.size() < k {
        return Err(VerifyError::SampleTooSmall { n: s.size(), k });
    }
    let mut assign: Vec<usize> = (0..=k).collect();
    for b in 0..s.size() {
        assign[k] = b;
        if ax.matrix.eval(s, &assign).expect("matrix over the theory signature") {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Satisfaction rate of one axiom on the label tuple `(0..k-1)` across sample sizes.
pub fn axiom_satisfaction(
    subject: &Subject,
    axiom: &str,
    n_list: &[usize],
    draws: usize,
    seed: u64,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, VerifyError> {
    let test = format!("axiom:{axiom}");
    let ax = subject
        .theory
        .axioms
        .iter()
        .find(|a| a.label == axiom)
        .ok_or_else(|| VerifyError::UnknownAxiom(axiom.into()))?;
    if let Some(&n) = n_list.iter().find(|&&n| n < ax.premise_width.max(1)) {
        return Err(VerifyError::SampleTooSmall { n, k: ax.premise_width });
    }
    let mut points = Vec::new();
    let mut seeds = Vec::new();
    for &n in n_list {
        let s = derive_seed(seed, &format!("n/{n}"));
        seeds.push(s);
        let samples = match subject.draw(n, draws, s)? {
            Ok(v) => v,
            Err(reason) => return Ok(VerificationReport::skipped(&subject.name, &test, vec![seed], reason)),
        };
        let mut successes = 0;
        for x in &samples {
            successes += witnessed(&subject.theory, axiom, x)? as usize;
        }
        let rate = successes as f64 / draws.max(1) as f64;
        points.push(RatePoint { n, successes, draws, rate, ci: wilson_interval(successes, draws) });
        if cfg.stop_at_target && rate >= cfg.target {
            break;
        }
    }
    let monotone = monotone_within_ci(&points);
    let reached = points.iter().any(|p| p.rate >= cfg.target);
    let mut notes = Vec::new();
    if ax.dummy {
        notes.push("universal mirror; always internally witnessed".into());
    }
    if !monotone {
        notes.push("rate drops below an earlier confidence interval".into());
    }
    Ok(VerificationReport {
        theory: subject.name.clone(),
        test,
        draws,
        statistic: Statistic::RateCurve { points, monotone },
        threshold: cfg.target,
        verdict: if monotone && reached { Verdict::Pass } else { Verdict::Fail },
        seeds,
        notes,
    })
}

/// Universal-axiom violations over all samples; PASS iff there are none.
///
/// Instances are counted once per axiom and set of elements involved.
pub fn forbidden_check(samples: &[FiniteStructure], oracle: &AgeOracle, seeds: Vec<u64>) -> VerificationReport {
    let mut count = 0;
    let mut violating = 0;
    let mut first = None;
    for s in samples {
        let all: Vec<usize> = (0..s.size()).collect();
        let t = diagram_of(s, &all).expect("sample uses the theory signature");
        let mut seen = BTreeSet::new();
        for v in oracle.violations(&t) {
            let mut elems = v.assignment.clone();
            elems.sort_unstable();
            elems.dedup();
            if seen.insert((v.label.clone(), elems.clone())) && first.is_none() {
                first = Some((v.label.clone(), elems));
            }
        }
        count += seen.len();
        violating += !seen.is_empty() as usize;
    }
    VerificationReport {
        theory: oracle.theory().name.clone(),
        test: "forbidden".into(),
        draws: samples.len(),
        statistic: Statistic::Violations { count, violating_samples: violating, samples: samples.len(), first },
        threshold: 0.0,
        verdict: if count == 0 { Verdict::Pass } else { Verdict::Fail },
        seeds,
        notes: Vec::new(),
    }
}

/// Draws `draws` structures of size `n` and runs `forbidden_check` on them.
pub fn forbidden_test(subject: &Subject, n: usize, draws: usize, seed: u64) -> Result<VerificationReport, VerifyError> {
    match subject.draw(n, draws, seed)? {
        Ok(samples) => Ok(forbidden_check(&samples, &subject.oracle, vec![seed])),
        Err(reason) => Ok(VerificationReport::skipped(&subject.name, "forbidden", vec![seed], reason)),
    }
}

/// The duplication gate of `subject` as a report.
pub fn duplication_test(subject: &Subject) -> VerificationReport {
    let r = &subject.duplication;
    let counterexample = r.counterexample.as_ref().map(|p| serde_json::to_string(p).expect("types serialize"));
    let mut notes = Vec::new();
    if r.verdicts.iter().any(|v| v.exhausted) {
        notes.push("search budget exhausted on some type".into());
    }
    VerificationReport {
        theory: subject.name.clone(),
        test: "duplication".into(),
        draws: 0,
        statistic: Statistic::Duplication { width: r.width_bound, checked: r.checked, counterexample },
        threshold: 0.0,
        verdict: if r.passed { Verdict::Pass } else { Verdict::Fail },
        seeds: Vec::new(),
        notes,
    }
}
