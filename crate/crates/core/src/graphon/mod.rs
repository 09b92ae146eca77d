//! Step graphons from graph traces, W-random graphs and distribution comparison.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::ConstructionTrace;
use crate::logic::{FiniteStructure, Signature, Truth};
use crate::sampler::{MeasureSpec, Sampler};
use crate::seed::{derive_seed, labeled_rng};

const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphonError {
    #[error("not a graph trace: {0}")]
    NotAGraph(String),
    #[error("invalid step graphon: {0}")]
    Invalid(String),
    #[error("comparison needs 1 <= n <= 5, got {0}")]
    BadSize(usize),
}

/// A symmetric step function on `[0,1]^2`: part `i` has measure `masses[i]` and
/// pairs of parts `(i, j)` carry edge probability `values[i][j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepGraphon {
    pub masses: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub random_free: bool,
    /// Mass of parts whose edges are not decided by the source trace.
    pub unresolved_mass: f64,
}

impl StepGraphon {
    pub fn new(masses: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, GraphonError> {
        let random_free = values.iter().flatten().all(|&v| v == 0.0 || v == 1.0);
        let w = StepGraphon { masses, values, random_free, unresolved_mass: 0.0 };
        w.validate()?;
        Ok(w)
    }

    pub fn constant(p: f64) -> Result<Self, GraphonError> {
        Self::new(vec![1.0], vec![vec![p]])
    }

    pub fn parts(&self) -> usize {
        self.masses.len()
    }

    pub fn validate(&self) -> Result<(), GraphonError> {
        let n = self.masses.len();
        let bad = |m: &str| Err(GraphonError::Invalid(m.to_string()));
        if n == 0 {
            return bad("no parts");
        }
        if self.masses.iter().any(|&m| !(m >= 0.0)) {
            return bad("negative mass");
        }
        if (self.masses.iter().sum::<f64>() - 1.0).abs() > MASS_TOLERANCE {
            return bad("masses do not sum to 1");
        }
        if self.values.len() != n || self.values.iter().any(|r| r.len() != n) {
            return bad("value matrix has the wrong shape");
        }
        for i in 0..n {
            for j in 0..n {
                let v = self.values[i][j];
                if !(0.0..=1.0).contains(&v) {
                    return bad("value outside [0, 1]");
                }
                if v != self.values[j][i] {
                    return bad("value matrix is not symmetric");
                }
            }
        }
        let random_free = self.values.iter().flatten().all(|&v| v == 0.0 || v == 1.0);
        if random_free != self.random_free {
            return bad("random_free flag disagrees with the values");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graphon serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphonError> {
        let w: StepGraphon = serde_json::from_str(s).map_err(|e| GraphonError::Invalid(e.to_string()))?;
        w.validate()?;
        Ok(w)
    }

    /// Part index for a uniform coordinate.
    pub fn part_of(&self, x: f64) -> usize {
        let mut acc = 0.0;
        for (i, m) in self.masses.iter().enumerate() {
            acc += m;
            if x < acc {
                return i;
            }
        }
        self.masses.iter().rposition(|&m| m > 0.0).unwrap_or(0)
    }

    /// A W-random graph with the part of each label.
    pub fn sample_with_parts(&self, n: usize, seed: u64) -> (FiniteStructure, Vec<usize>) {
        let mut rng = labeled_rng(seed, "w-random");
        let parts: Vec<usize> = (0..n).map(|_| self.part_of(rng.gen::<f64>())).collect();
        let mut g = FiniteStructure::empty(graph_signature(), n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen::<f64>() < self.values[parts[i]][parts[j]] {
                    g.insert(0, vec![i, j]).expect("labels in range");
                    g.insert(0, vec![j, i]).expect("labels in range");
                }
            }
        }
        (g, parts)
    }
}

/// One symmetric binary relation `E`.
pub fn graph_signature() -> Arc<Signature> {
    Arc::new(Signature::relational(&[("E", 2)]).expect("valid signature"))
}

/// The graphon of a graph trace under `m`.
///
/// Parts are the left tail, the intervals in order, and the right tail. Interval
/// pairs take the trace's edge relation; anything touching a tail is 0 and counted
/// in `unresolved_mass`.
pub fn export_step_graphon(trace: &ConstructionTrace, m: &MeasureSpec) -> Result<StepGraphon, GraphonError> {
    let sig = &trace.theory().signature;
    if sig.relations.len() != 1 || sig.arity(0) != 2 {
        return Err(GraphonError::NotAGraph(format!("signature has {} relations", sig.relations.len())));
    }
    let order = trace.order();
    let w = order.len();
    let p = trace.p();
    for &x in order {
        if p.atom(0, &[x, x]) != Truth::False {
            return Err(GraphonError::NotAGraph("relation is not irreflexive".into()));
        }
        for &y in order {
            let (a, b) = (p.atom(0, &[x, y]), p.atom(0, &[y, x]));
            if a != b || !a.is_known() {
                return Err(GraphonError::NotAGraph("relation is not symmetric and decided".into()));
            }
        }
    }
    let masses = m.partition_masses(trace.boundaries());
    let mut values = vec![vec![0.0; w + 2]; w + 2];
    for j in 0..w {
        for k in 0..w {
            if p.atom(0, &[order[j], order[k]]) == Truth::True {
                values[j + 1][k + 1] = 1.0;
            }
        }
    }
    let unresolved_mass = masses[0] + masses[w + 1];
    let mut g = StepGraphon::new(masses, values)?;
    g.unresolved_mass = unresolved_mass;
    Ok(g)
}

/// A W-random graph on `n` labels.
pub fn w_random(w: &StepGraphon, n: usize, seed: u64) -> FiniteStructure {
    w.sample_with_parts(n, seed).0
}

/// An Erdos-Renyi graph on `n` labels.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> FiniteStructure {
    let mut rng = labeled_rng(seed, "erdos-renyi");
    let mut g = FiniteStructure::empty(graph_signature(), n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                g.insert(0, vec![i, j]).expect("labels in range");
                g.insert(0, vec![j, i]).expect("labels in range");
            }
        }
    }
    g
}

/// Adjacency of `g` on pairs `i < j` in lexicographic order, as a bit string.
pub fn labeled_graph_key(g: &FiniteStructure) -> String {
    let n = g.size();
    let mut key = String::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in i + 1..n {
            key.push(if g.holds(0, &[i, j]) { '1' } else { '0' });
        }
    }
    key
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub n: usize,
    pub draws: usize,
    pub accepted_a: usize,
    pub accepted_b: usize,
    pub tv: f64,
    /// Per labeled graph: accepted counts from each generator.
    pub cells: BTreeMap<String, (usize, usize)>,
}

/// Total variation between the labeled `n`-vertex graph distributions of two
/// generators, estimated from `draws` calls each; `None` draws are conditioned away.
pub fn distribution_compare<A, B>(gen_a: A, gen_b: B, n: usize, draws: usize, seed: u64) -> Result<CompareReport, GraphonError>
where
    A: Fn(u64) -> Option<FiniteStructure> + Sync,
    B: Fn(u64) -> Option<FiniteStructure> + Sync,
{
    if n == 0 || n > 5 {
        return Err(GraphonError::BadSize(n));
    }
    let count = |f: &(dyn Fn(u64) -> Option<FiniteStructure> + Sync), label: &str| -> Result<BTreeMap<String, usize>, GraphonError> {
        let keys: Vec<Option<String>> = (0..draws)
            .into_par_iter()
            .map(|i| f(derive_seed(seed, &format!("{label}/{i}"))).map(|g| labeled_graph_key(&g)))
            .collect();
        let mut out = BTreeMap::new();
        for k in keys.into_iter().flatten() {
            if k.len() != n * (n - 1) / 2 {
                return Err(GraphonError::NotAGraph(format!("generator {label} emitted a graph of the wrong size")));
            }
            *out.entry(k).or_insert(0) += 1;
        }
        Ok(out)
    };
    let a = count(&gen_a, "a")?;
    let b = count(&gen_b, "b")?;
    let (na, nb) = (a.values().sum::<usize>(), b.values().sum::<usize>());
    let mut cells = BTreeMap::new();
    for (k, &c) in &a {
        cells.entry(k.clone()).or_insert((0, 0)).0 = c;
    }
    for (k, &c) in &b {
        cells.entry(k.clone()).or_insert((0, 0)).1 = c;
    }
    let tv = if na == 0 || nb == 0 {
        1.0
    } else {
        0.5 * cells.values().map(|&(x, y)| (x as f64 / na as f64 - y as f64 / nb as f64).abs()).sum::<f64>()
    };
    Ok(CompareReport { n, draws, accepted_a: na, accepted_b: nb, tv, cells })
}

/// Sampler draws against W-random graphs of the sampler's exported graphon, both
/// conditioned on every label landing inside the base trace's intervals.
pub fn compare_with_graphon(sampler: &Sampler, n: usize, draws: usize, seed: u64) -> Result<CompareReport, GraphonError> {
    let w = export_step_graphon(sampler.base(), sampler.measure())?;
    let last = w.parts() - 1;
    distribution_compare(
        |s| sampler.draw(n, s).ok().filter(|d| d.interior).map(|d| d.structure),
        |s| {
            let (g, parts) = w.sample_with_parts(n, s);
            parts.iter().all(|&p| p != 0 && p != last).then_some(g)
        },
        n,
        draws,
        seed,
    )
}
