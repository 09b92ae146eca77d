//! Exchangeable sampling: i.i.d. points from a continuous measure, separated by
//! refining a private copy of a construction trace, then read off as a structure.

mod measure;

use std::borrow::Cow;
use std::cell::RefCell;
use std::collections::HashSet;
use std::sync::Arc;

use astro_float::Consts;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::{rational_serde, Boundary, ConstructionError, ConstructionTrace, EngineConfig, IntervalLocation};
use crate::logic::{for_each_tuple, FiniteStructure, Truth};
use crate::seed::{derive_seed, labeled_rng};
use crate::theory::PithyTheory;

pub use measure::{MeasureFamily, MeasureSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("invalid measure `{0}`")]
    BadMeasure(String),
    #[error("separation not reached after {0} refinements")]
    SeparationNotReached(usize),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

/// `n` pairwise distinct points drawn i.i.d. from `m`, reproducible from `seed`.
pub fn sample_points(m: &MeasureSpec, n: usize, seed: u64) -> Result<Vec<BigRational>, SamplerError> {
    if n == 0 {
        return Err(SamplerError::EmptySample);
    }
    m.validate()?;
    let mut rng = labeled_rng(seed, "points");
    let mut out: Vec<BigRational> = Vec::with_capacity(n);
    let mut seen = HashSet::with_capacity(n);
    CONSTS.with(|cc| {
        let cc = &mut cc.borrow_mut();
        while out.len() < n {
            let q = m.sample(&mut rng, cc);
            if seen.insert((q.numer().clone(), q.denom().clone())) {
                out.push(q);
            }
        }
    });
    Ok(out)
}

/// Whether every point lies in an interval and distinct points lie in distinct intervals.
pub fn is_separated(trace: &ConstructionTrace, points: &[BigRational]) -> bool {
    let mut seen = Vec::with_capacity(points.len());
    for q in points {
        match trace.locate(q) {
            IntervalLocation::Outside => return false,
            IntervalLocation::Interval(j) => {
                if let Some((_, p)) = seen.iter().find(|(k, _)| *k == j) {
                    if *p != q {
                        return false;
                    }
                } else {
                    seen.push((j, q));
                }
            }
        }
    }
    true
}

/// Refines `trace` until `sorted` (increasing, distinct) is separated.
///
/// Outside points are absorbed by new outermost intervals reaching the extreme
/// points. Then, left to right, each interval holding several points is split by a
/// boundary between its two smallest points, the new position going to the one
/// opposite the interval's point, until every point has its own interval.
fn separate_sorted(trace: &mut ConstructionTrace, sorted: &[BigRational]) -> Result<usize, ConstructionError> {
    let mut steps = 0;
    let low = &sorted[0];
    let first = &trace.boundaries()[0];
    if !first.lt_rational(low) {
        let beta = first.mirror(low);
        trace.extend_outside(low, beta)?;
        steps += 1;
    }
    let high = &sorted[sorted.len() - 1];
    let last = &trace.boundaries()[trace.boundaries().len() - 1];
    if last.lt_rational(high) {
        let beta = last.mirror(high);
        trace.extend_outside(high, beta)?;
        steps += 1;
    }
    let located: Vec<usize> = sorted
        .iter()
        .map(|q| match trace.locate(q) {
            IntervalLocation::Interval(j) => j,
            IntervalLocation::Outside => unreachable!("outer intervals reach every point"),
        })
        .collect();
    let mut shift = 0;
    let mut start = 0;
    while start < sorted.len() {
        let end = start + located[start..].iter().take_while(|&&j| j == located[start]).count();
        let mut j = located[start] + shift;
        for k in start..end - 1 {
            let (a, b) = (&sorted[k], &sorted[k + 1]);
            let beta = Boundary::between(a, b);
            let r = &trace.points()[trace.order()[j]];
            let q = if beta.cmp_rational(r).is_gt() { b.clone() } else { a.clone() };
            trace.split(&q, beta)?;
            steps += 1;
            shift += 1;
            j += 1;
        }
        start = end;
    }
    Ok(steps)
}

/// The trace itself when it already separates `points`, else a refined private copy.
pub fn separate<'a>(
    trace: &'a ConstructionTrace,
    points: &[BigRational],
) -> Result<(Cow<'a, ConstructionTrace>, usize), SamplerError> {
    if is_separated(trace, points) {
        return Ok((Cow::Borrowed(trace), 0));
    }
    let mut sorted = points.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut t = trace.clone();
    let limit = sorted.len() + 2;
    t.set_max_width(t.config().max_width.max(t.width() + limit));
    let steps = separate_sorted(&mut t, &sorted)?;
    if !is_separated(&t, points) {
        return Err(SamplerError::SeparationNotReached(steps));
    }
    Ok((Cow::Owned(t), steps))
}

/// The structure on labels `0..n` where label `i` stands for `points[i]`.
pub fn induce(trace: &ConstructionTrace, points: &[BigRational], auto_extend: bool) -> Result<FiniteStructure, SamplerError> {
    if auto_extend {
        let (t, _) = separate(trace, points)?;
        read_off(&t, points)
    } else {
        read_off(trace, points)
    }
}

fn read_off(trace: &ConstructionTrace, points: &[BigRational]) -> Result<FiniteStructure, SamplerError> {
    // Validates membership in B_i and reports the offending points otherwise.
    trace.type_of_tuple(points)?;
    let vars: Vec<usize> = points.iter().map(|q| trace.var_at(q).expect("located")).collect();
    let sig = trace.theory().signature.clone();
    let mut s = FiniteStructure::empty(sig.clone(), points.len());
    let mut buf = Vec::new();
    for rel in 0..sig.relations.len() {
        let mut hits = Vec::new();
        for_each_tuple(points.len(), sig.arity(rel), |t| {
            buf.clear();
            buf.extend(t.iter().map(|&l| vars[l]));
            if trace.p().atom(rel, &buf) == Truth::True {
                hits.push(t.to_vec());
            }
        });
        for t in hits {
            s.insert(rel, t).expect("labels are in range");
        }
    }
    Ok(s)
}

/// One sampled structure with the data needed to reproduce and condition on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledStructure {
    pub seed: u64,
    #[serde(with = "rational_serde::vec")]
    pub points: Vec<BigRational>,
    /// Every point already lay in an interval of the base trace.
    pub interior: bool,
    /// Refinements made on the private copy.
    pub extension_steps: usize,
    pub base_stage: usize,
    pub structure: FiniteStructure,
}

/// Draws structures from one frozen base trace.
#[derive(Clone, Debug)]
pub struct Sampler {
    base: Arc<ConstructionTrace>,
    measure: MeasureSpec,
}

impl Sampler {
    pub fn new(base: Arc<ConstructionTrace>, measure: MeasureSpec) -> Result<Self, SamplerError> {
        measure.validate()?;
        Ok(Sampler { base, measure })
    }

    /// Builds the base trace with `base_stages` scheduled stages.
    pub fn from_theory(
        theory: Arc<PithyTheory>,
        base_stages: usize,
        config: EngineConfig,
        measure: MeasureSpec,
    ) -> Result<Self, SamplerError> {
        let base = ConstructionTrace::run(theory, base_stages, config)?;
        Self::new(Arc::new(base), measure)
    }

    pub fn base(&self) -> &Arc<ConstructionTrace> {
        &self.base
    }

    pub fn measure(&self) -> &MeasureSpec {
        &self.measure
    }

    pub fn draw(&self, n: usize, seed: u64) -> Result<SampledStructure, SamplerError> {
        let points = sample_points(&self.measure, n, seed)?;
        let interior = points.iter().all(|q| self.base.locate(q) != IntervalLocation::Outside);
        let (t, extension_steps) = separate(&self.base, &points)?;
        let structure = read_off(&t, &points)?;
        Ok(SampledStructure { seed, points, interior, extension_steps, base_stage: self.base.stage(), structure })
    }

    /// Seed of draw `i` in a batch rooted at `seed`.
    pub fn draw_seed(seed: u64, i: usize) -> u64 {
        derive_seed(seed, &format!("draw/{i}"))
    }

    /// `draws` structures in parallel, returned in draw order.
    pub fn draw_many(&self, n: usize, draws: usize, seed: u64) -> Result<Vec<SampledStructure>, SamplerError> {
        (0..draws).into_par_iter().map(|i| self.draw(n, Self::draw_seed(seed, i))).collect()
    }
}

/// `run(theory, base_stages)`, then `n` points from `m`, then the induced structure.
pub fn sample_structure(
    theory: Arc<PithyTheory>,
    n: usize,
    m: &MeasureSpec,
    seed: u64,
    base_stages: usize,
) -> Result<FiniteStructure, SamplerError> {
    let sampler = Sampler::from_theory(theory, base_stages, EngineConfig::default(), m.clone())?;
    Ok(sampler.draw(n, seed)?.structure)
}
