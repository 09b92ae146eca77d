//! Run configurations and reproducible artifacts for every subcommand of the tool.
//!
//! An artifact is `{"tool", "version", "config", "result"}`; line-oriented outputs
//! carry the same header on their first line. Executing the embedded config again
//! reproduces the artifact byte for byte.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::closure::{acl, check_duplication, check_strong_amalgamation, dcl, orbit_sizes, ClosureError};
use crate::construction::{trace_svg, CompletionRule, ConstructionError, ConstructionTrace, EngineConfig};
use crate::graphon::{compare_with_graphon, export_step_graphon, GraphonError, StepGraphon};
use crate::logic::FiniteStructure;
use crate::sampler::{MeasureSpec, Sampler, SamplerError};
use crate::theory::{catalog, parse_theory, pithy_expand, AgeOracle, PithyTheory, TheoryError};
use crate::verify::{run_suite, to_junit_xml, SuiteError, SuiteKind, SuiteSpec};

pub const TOOL: &str = "forge";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Prefix selecting a built-in theory instead of a file.
pub const CATALOG_PREFIX: &str = "catalog:";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Compile,
    CheckSap,
    CheckDup,
    Dcl,
    Acl,
    Build,
    TraceDump,
    Sample,
    GraphonExport,
    GraphonSample,
    Compare,
    Verify,
}

/// Everything a run depends on besides the input's contents, which are pinned by digest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<CompletionRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    /// Amalgamation size bound, duplication width bound, or orbit bound of `acl`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuple: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub relationalize: bool,
    #[serde(default)]
    pub svg: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteKind>,
    /// Where outputs go; not part of the embedded config, so reruns may write elsewhere.
    #[serde(skip)]
    pub out: Option<String>,
    #[serde(skip)]
    pub junit: Option<String>,
    #[serde(skip)]
    pub verbosity: u8,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            input: None,
            input_sha256: None,
            seed: 0,
            stages: None,
            max_width: None,
            rule: None,
            n: None,
            draws: None,
            bound: None,
            tuple: None,
            measure: None,
            relationalize: false,
            svg: false,
            suite: None,
            out: None,
            junit: None,
            verbosity: 0,
        }
    }
}

pub const DEFAULT_STAGES: usize = 40;
pub const DEFAULT_MAX_WIDTH: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// Missing, unreadable or malformed input; a usage problem.
    #[error("{0}")]
    Input(String),
    /// The input is well formed but the requested computation is impossible.
    #[error("{message}")]
    Domain { kind: &'static str, message: String, details: Value },
}

impl PipelineError {
    fn input(e: impl std::fmt::Display) -> Self {
        PipelineError::Input(e.to_string())
    }

    /// Machine-readable form.
    pub fn to_json(&self) -> String {
        let v = match self {
            PipelineError::Input(m) => json!({ "error": "input", "message": m }),
            PipelineError::Domain { kind, message, details } => {
                json!({ "error": kind, "message": message, "details": details })
            }
        };
        v.to_string()
    }
}

impl From<ConstructionError> for PipelineError {
    fn from(e: ConstructionError) -> Self {
        let message = e.to_string();
        let (kind, details) = match &e {
            ConstructionError::DuplicationFailure { position, point, p, witness } => (
                "duplication_failure",
                json!({
                    "position": position,
                    "point": point,
                    "type": serde_json::to_value(p.as_ref()).expect("types serialize"),
                    "witness": witness,
                    "diagnosis": "the age has nontrivial definable closure, so no invariant measure is concentrated on its limit",
                }),
            ),
            ConstructionError::Inconsistent(_) => ("inconsistent_theory", Value::Null),
            ConstructionError::Unwitnessable { axiom, tuple } => {
                ("unwitnessable", json!({ "axiom": axiom, "tuple": tuple }))
            }
            ConstructionError::InsufficientDepth(_) => ("insufficient_depth", Value::Null),
            ConstructionError::WidthCapExceeded { cap } => ("width_cap", json!({ "cap": cap })),
            ConstructionError::PremiseTooWide { axiom, width, cap } => {
                ("premise_too_wide", json!({ "axiom": axiom, "width": width, "cap": cap }))
            }
            ConstructionError::Budget(b) => ("search_budget", json!({ "budget": b })),
            ConstructionError::InvalidRefinement(_) => ("invalid_refinement", Value::Null),
            ConstructionError::Malformed(_) => return PipelineError::Input(message),
        };
        PipelineError::Domain { kind, message, details }
    }
}

impl From<SamplerError> for PipelineError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Construction(c) => c.into(),
            SamplerError::BadMeasure(_) | SamplerError::EmptySample => PipelineError::Input(e.to_string()),
            other => PipelineError::Domain { kind: "sampler", message: other.to_string(), details: Value::Null },
        }
    }
}

impl From<GraphonError> for PipelineError {
    fn from(e: GraphonError) -> Self {
        PipelineError::Domain { kind: "graphon", message: e.to_string(), details: Value::Null }
    }
}

impl From<ClosureError> for PipelineError {
    fn from(e: ClosureError) -> Self {
        match e {
            ClosureError::OutOfRange(_) => PipelineError::Input(e.to_string()),
            _ => PipelineError::Domain { kind: "closure", message: e.to_string(), details: Value::Null },
        }
    }
}

impl From<SuiteError> for PipelineError {
    fn from(e: SuiteError) -> Self {
        PipelineError::Domain { kind: "verify", message: e.to_string(), details: Value::Null }
    }
}

/// Files produced by one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutput {
    /// Written to `config.out`, or standard output.
    pub main: String,
    /// Written to `config.junit` when set.
    pub junit: Option<String>,
}

fn header(cfg: &RunConfig) -> Value {
    json!({ "tool": TOOL, "version": VERSION, "config": cfg })
}

fn artifact(cfg: &RunConfig, result: Value) -> String {
    let mut v = header(cfg);
    v["result"] = result;
    let mut s = serde_json::to_string_pretty(&v).expect("artifacts serialize");
    s.push('\n');
    s
}

fn lines(cfg: &RunConfig, rows: impl IntoIterator<Item = Value>) -> String {
    let mut s = header(cfg).to_string();
    s.push('\n');
    for r in rows {
        s += &r.to_string();
        s.push('\n');
    }
    s
}

/// Reads the input named by `cfg`, checking it against the recorded digest.
fn read_input(cfg: &mut RunConfig) -> Result<String, PipelineError> {
    let src = cfg.input.clone().ok_or_else(|| PipelineError::Input("no input given".into()))?;
    let text = if let Some(name) = src.strip_prefix(CATALOG_PREFIX) {
        name.to_string()
    } else {
        std::fs::read_to_string(Path::new(&src)).map_err(|e| PipelineError::Input(format!("{src}: {e}")))?
    };
    let digest = format!("{:x}", Sha256::digest(text.as_bytes()));
    match &cfg.input_sha256 {
        Some(d) if *d != digest => {
            return Err(PipelineError::Input(format!("{src}: contents differ from the recorded digest")))
        }
        _ => cfg.input_sha256 = Some(digest),
    }
    Ok(text)
}

/// The `result` of an artifact, or the whole document when it is not one.
fn payload(text: &str) -> Result<Value, PipelineError> {
    let v: Value = serde_json::from_str(text).map_err(PipelineError::input)?;
    Ok(match v.get("result") {
        Some(r) if v.get("tool").is_some() => r.clone(),
        _ => v,
    })
}

fn theory_from(cfg: &RunConfig, text: &str) -> Result<Arc<PithyTheory>, PipelineError> {
    let src = cfg.input.as_deref().unwrap_or_default();
    let expand = |spec| pithy_expand(&spec).map(Arc::new).map_err(theory_error);
    if src.starts_with(CATALOG_PREFIX) {
        let spec = catalog(text).map_err(PipelineError::input)?;
        return expand(spec);
    }
    if text.trim_start().starts_with('{') {
        let t: PithyTheory = serde_json::from_value(payload(text)?).map_err(PipelineError::input)?;
        t.check_invariants().map_err(PipelineError::Input)?;
        return Ok(Arc::new(t));
    }
    expand(parse_theory(text, cfg.relationalize).map_err(theory_error)?)
}

fn theory_error(e: TheoryError) -> PipelineError {
    match e {
        TheoryError::NotRelational(_) | TheoryError::ConstantNeedsRelationalization(_) => {
            PipelineError::Domain { kind: "not_relational", message: e.to_string(), details: Value::Null }
        }
        _ => PipelineError::Input(e.to_string()),
    }
}

fn trace_from(text: &str) -> Result<ConstructionTrace, PipelineError> {
    Ok(ConstructionTrace::from_json(&payload(text)?.to_string())?)
}

fn structure_from(text: &str) -> Result<FiniteStructure, PipelineError> {
    let v = payload(text)?;
    let v = v.get("structure").cloned().unwrap_or(v);
    serde_json::from_value(v).map_err(PipelineError::input)
}

fn engine(cfg: &RunConfig) -> EngineConfig {
    EngineConfig {
        rule: cfg.rule.unwrap_or_default(),
        max_width: cfg.max_width.unwrap_or(DEFAULT_MAX_WIDTH),
        ..EngineConfig::default()
    }
}

fn measure(cfg: &RunConfig) -> Result<MeasureSpec, PipelineError> {
    let m = cfg.measure.clone().unwrap_or_default();
    m.validate().map_err(|e| PipelineError::Input(e.to_string()))?;
    Ok(m)
}

fn need(v: Option<usize>, what: &str) -> Result<usize, PipelineError> {
    v.ok_or_else(|| PipelineError::Input(format!("missing {what}")))
}

fn oracle_checks(cfg: &RunConfig, theory: Arc<PithyTheory>) -> Result<Value, PipelineError> {
    let oracle = AgeOracle::new(theory);
    Ok(match cfg.command {
        Command::CheckSap => {
            serde_json::to_value(check_strong_amalgamation(&oracle, cfg.bound.unwrap_or(4))).expect("reports serialize")
        }
        _ => serde_json::to_value(check_duplication(&oracle, cfg.bound.unwrap_or(3))).expect("reports serialize"),
    })
}

/// Runs `config` and returns the artifacts, with the input digest recorded in the
/// embedded config.
pub fn execute(config: &RunConfig) -> Result<RunOutput, PipelineError> {
    let mut cfg = config.clone();
    let single = |cfg: &RunConfig, result: Value| Ok(RunOutput { main: artifact(cfg, result), junit: None });
    match cfg.command {
        Command::Compile => {
            let text = read_input(&mut cfg)?;
            let t = theory_from(&cfg, &text)?;
            single(&cfg, serde_json::to_value(t.as_ref()).expect("theories serialize"))
        }
        Command::CheckSap | Command::CheckDup => {
            let text = read_input(&mut cfg)?;
            let t = theory_from(&cfg, &text)?;
            let r = oracle_checks(&cfg, t)?;
            single(&cfg, r)
        }
        Command::Dcl | Command::Acl => {
            let text = read_input(&mut cfg)?;
            let s = structure_from(&text)?;
            let tuple = cfg.tuple.clone().unwrap_or_default();
            let result = if cfg.command == Command::Dcl {
                json!({ "tuple": tuple, "dcl": dcl(&s, &tuple)? })
            } else {
                let t = cfg.bound.unwrap_or(1);
                json!({ "tuple": tuple, "bound": t, "acl": acl(&s, &tuple, t)?, "orbit_sizes": orbit_sizes(&s, &tuple)? })
            };
            single(&cfg, result)
        }
        Command::Build => {
            let text = read_input(&mut cfg)?;
            let t = theory_from(&cfg, &text)?;
            let stages = cfg.stages.unwrap_or(DEFAULT_STAGES);
            let (trace, capped) = ConstructionTrace::run_until_cap(t, stages, engine(&cfg))?;
            let mut v: Value = serde_json::from_str(&trace.to_json()).expect("traces serialize");
            v["stopped_at_width_cap"] = json!(capped);
            single(&cfg, v)
        }
        Command::TraceDump => {
            let text = read_input(&mut cfg)?;
            let trace = trace_from(&text)?;
            if cfg.svg {
                let svg = trace_svg(&trace);
                let meta = format!("<metadata>{}</metadata>", xml_escape(&header(&cfg).to_string()));
                let at = svg.find('>').map_or(0, |i| i + 1);
                return Ok(RunOutput { main: format!("{}\n{meta}{}", &svg[..at], &svg[at..]), junit: None });
            }
            let intervals: Vec<Value> = trace
                .order()
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    json!({
                        "index": j,
                        "position": x,
                        "point": trace.points()[x].to_string(),
                        "lower": trace.boundaries()[j].to_string(),
                        "upper": trace.boundaries()[j + 1].to_string(),
                    })
                })
                .collect();
            single(
                &cfg,
                json!({
                    "theory": trace.theory().name,
                    "stage": trace.stage(),
                    "width": trace.width(),
                    "intervals": intervals,
                    "witnesses": trace.witness_log().len(),
                }),
            )
        }
        Command::Sample => {
            let text = read_input(&mut cfg)?;
            let t = theory_from(&cfg, &text)?;
            let n = need(cfg.n, "sample size -n")?;
            let draws = cfg.draws.unwrap_or(1);
            let m = measure(&cfg)?;
            let (base, _) = ConstructionTrace::run_until_cap(t, cfg.stages.unwrap_or(DEFAULT_STAGES), engine(&cfg))?;
            let sampler = Sampler::new(Arc::new(base), m)?;
            let rows = sampler.draw_many(n, draws, cfg.seed)?;
            let out = rows.into_iter().enumerate().map(|(i, d)| {
                json!({
                    "draw": i,
                    "seed": d.seed,
                    "base_stage": d.base_stage,
                    "interior": d.interior,
                    "extension_steps": d.extension_steps,
                    "structure": d.structure,
                })
            });
            Ok(RunOutput { main: lines(&cfg, out), junit: None })
        }
        Command::GraphonExport => {
            let text = read_input(&mut cfg)?;
            let trace = trace_from(&text)?;
            let w = export_step_graphon(&trace, &measure(&cfg)?)?;
            single(&cfg, serde_json::to_value(&w).expect("graphons serialize"))
        }
        Command::GraphonSample => {
            let text = read_input(&mut cfg)?;
            let w: StepGraphon = serde_json::from_value(payload(&text)?).map_err(PipelineError::input)?;
            w.validate()?;
            let n = need(cfg.n, "sample size -n")?;
            let draws = cfg.draws.unwrap_or(1);
            let out = (0..draws).map(|i| {
                let seed = Sampler::draw_seed(cfg.seed, i);
                json!({ "draw": i, "seed": seed, "structure": w.sample_with_parts(n, seed).0 })
            });
            Ok(RunOutput { main: lines(&cfg, out), junit: None })
        }
        Command::Compare => {
            let text = read_input(&mut cfg)?;
            let trace = trace_from(&text)?;
            let sampler = Sampler::new(Arc::new(trace), measure(&cfg)?)?;
            let r = compare_with_graphon(&sampler, cfg.n.unwrap_or(3), cfg.draws.unwrap_or(10_000), cfg.seed)?;
            single(&cfg, serde_json::to_value(&r).expect("reports serialize"))
        }
        Command::Verify => {
            let spec = SuiteSpec::new(cfg.suite.unwrap_or(SuiteKind::Quick), cfg.seed);
            let r = run_suite(&spec)?;
            Ok(RunOutput {
                main: artifact(&cfg, serde_json::to_value(&r).expect("reports serialize")),
                junit: cfg.junit.is_some().then(|| to_junit_xml(&r)),
            })
        }
    }
}

/// The run configuration embedded in an artifact (either form).
pub fn embedded_config(artifact: &str) -> Result<RunConfig, PipelineError> {
    let first = if artifact.trim_start().starts_with("<svg") {
        let a = artifact.find("<metadata>").ok_or_else(|| PipelineError::Input("no metadata".into()))? + 10;
        let b = artifact.find("</metadata>").ok_or_else(|| PipelineError::Input("no metadata".into()))?;
        xml_unescape(&artifact[a..b])
    } else if artifact.trim_start().starts_with("{\n") {
        artifact.to_string()
    } else {
        artifact.lines().next().unwrap_or_default().to_string()
    };
    let v: Value = serde_json::from_str(&first).map_err(PipelineError::input)?;
    serde_json::from_value(v["config"].clone()).map_err(PipelineError::input)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn xml_unescape(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
}
