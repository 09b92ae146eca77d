use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::logic::{for_each_tuple, FiniteStructure};

use super::ClosureError;

/// Largest structure the exhaustive automorphism routines accept by default.
pub const DEFAULT_SIZE_BOUND: usize = 10;

/// All automorphisms of a structure, sorted lexicographically as image vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomorphismSet {
    pub size: usize,
    pub perms: Vec<Vec<usize>>,
}

impl AutomorphismSet {
    pub fn order(&self) -> usize {
        self.perms.len()
    }

    pub fn contains(&self, perm: &[usize]) -> bool {
        self.perms.binary_search_by(|p| p.as_slice().cmp(perm)).is_ok()
    }
}

fn check_bound(s: &FiniteStructure, bound: usize) -> Result<(), ClosureError> {
    if s.size() > bound {
        return Err(ClosureError::SizeOverBound { size: s.size(), bound });
    }
    Ok(())
}

/// Iterated colour refinement. `individualized` elements get their own colours,
/// in the given order. The result numbers colours canonically: isomorphic inputs
/// (with matching individualized sequences) get equal colour multisets.
pub fn refine_colors(s: &FiniteStructure, individualized: &[usize]) -> Vec<usize> {
    let n = s.size();
    let mut color: Vec<usize> = vec![0; n];
    for (i, &a) in individualized.iter().enumerate() {
        color[a] = i + 1;
    }
    let sig = s.signature().clone();
    let mut classes = color.iter().collect::<BTreeSet<_>>().len();
    loop {
        let mut keys: Vec<(usize, Vec<(usize, u64, Vec<usize>)>)> =
            color.iter().map(|&c| (c, Vec::new())).collect();
        for rel in 0..sig.relations.len() {
            for t in s.relation(rel) {
                let colors: Vec<usize> = t.iter().map(|&a| color[a]).collect();
                let mut uniq = t.clone();
                uniq.sort_unstable();
                uniq.dedup();
                for a in uniq {
                    let mask = t.iter().enumerate().filter(|(_, &b)| b == a).fold(0u64, |m, (i, _)| m | 1 << i);
                    keys[a].1.push((rel, mask, colors.clone()));
                }
            }
        }
        for k in keys.iter_mut() {
            k.1.sort();
        }
        let mut sorted: Vec<&(usize, Vec<(usize, u64, Vec<usize>)>)> = keys.iter().collect();
        sorted.sort();
        sorted.dedup();
        let next: Vec<usize> = keys.iter().map(|k| sorted.binary_search(&k).expect("present")).collect();
        let count = sorted.len();
        color = next;
        if count == classes {
            return color;
        }
        classes = count;
    }
}

/// Backtracking search for automorphisms extending `fixed` (pairs `from -> to`).
struct Search<'a> {
    s: &'a FiniteStructure,
    color: Vec<usize>,
    order: Vec<usize>,
    perm: Vec<usize>,
    used: Vec<bool>,
}

impl<'a> Search<'a> {
    fn new(s: &'a FiniteStructure, individualized: &[usize], pinned: &[(usize, usize)]) -> Option<Self> {
        let n = s.size();
        let color = refine_colors(s, individualized);
        let mut size = vec![0usize; n.max(1)];
        for &c in &color {
            size[c] += 1;
        }
        let mut uniq: Vec<(usize, usize)> = Vec::new();
        for &(from, to) in pinned {
            match uniq.iter().find(|p| p.0 == from) {
                Some(p) if p.1 != to => return None,
                Some(_) => {}
                None => uniq.push((from, to)),
            }
        }
        let pinned = &uniq[..];
        let mut order: Vec<usize> = pinned.iter().map(|p| p.0).collect();
        let mut rest: Vec<usize> = (0..n).filter(|v| !order.contains(v)).collect();
        rest.sort_by_key(|&v| (size[color[v]], color[v], v));
        order.extend(rest);
        let mut search = Search { s, color, order, perm: vec![usize::MAX; n], used: vec![false; n] };
        for (k, &(from, to)) in pinned.iter().enumerate() {
            if search.used[to] || search.color[from] != search.color[to] || !search.consistent(k, from, to) {
                return None;
            }
            search.perm[from] = to;
            search.used[to] = true;
        }
        Some(search)
    }

    /// Whether mapping `v -> u` agrees on all tuples over the first `k` ordered elements and `v`.
    fn consistent(&self, k: usize, v: usize, u: usize) -> bool {
        let sig = self.s.signature();
        let mut dom: Vec<usize> = self.order[..k].to_vec();
        dom.push(v);
        let mut img: Vec<usize> = self.order[..k].iter().map(|&a| self.perm[a]).collect();
        img.push(u);
        let mut ok = true;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for rel in 0..sig.relations.len() {
            for_each_tuple(k + 1, sig.arity(rel), |t| {
                if !ok || !t.contains(&k) {
                    return;
                }
                a.clear();
                b.clear();
                a.extend(t.iter().map(|&i| dom[i]));
                b.extend(t.iter().map(|&i| img[i]));
                ok = self.s.holds(rel, &a) == self.s.holds(rel, &b);
            });
            if !ok {
                return false;
            }
        }
        true
    }

    /// Visits complete automorphisms from depth `k`; stops when `f` returns false.
    fn run(&mut self, k: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if k == self.order.len() {
            return f(&self.perm);
        }
        let v = self.order[k];
        if self.perm[v] != usize::MAX {
            return self.run(k + 1, f);
        }
        for u in 0..self.s.size() {
            if self.used[u] || self.color[u] != self.color[v] || !self.consistent(k, v, u) {
                continue;
            }
            self.perm[v] = u;
            self.used[u] = true;
            let go_on = self.run(k + 1, f);
            self.used[u] = false;
            self.perm[v] = usize::MAX;
            if !go_on {
                return false;
            }
        }
        true
    }
}

pub fn automorphisms(s: &FiniteStructure) -> Result<AutomorphismSet, ClosureError> {
    automorphisms_with_bound(s, DEFAULT_SIZE_BOUND)
}

pub fn automorphisms_with_bound(s: &FiniteStructure, bound: usize) -> Result<AutomorphismSet, ClosureError> {
    check_bound(s, bound)?;
    let mut perms = Vec::new();
    if let Some(mut search) = Search::new(s, &[], &[]) {
        search.run(0, &mut |p| {
            perms.push(p.to_vec());
            true
        });
    }
    perms.sort();
    Ok(AutomorphismSet { size: s.size(), perms })
}

/// Some automorphism fixing `fixed` pointwise and sending `from` to `to`.
pub fn find_automorphism(s: &FiniteStructure, fixed: &[usize], from: usize, to: usize) -> Option<Vec<usize>> {
    let mut pinned: Vec<(usize, usize)> = fixed.iter().map(|&a| (a, a)).collect();
    if !fixed.contains(&from) {
        pinned.push((from, to));
    } else if from != to {
        return None;
    }
    let mut search = Search::new(s, fixed, &pinned)?;
    let mut found = None;
    search.run(0, &mut |p| {
        found = Some(p.to_vec());
        false
    });
    found
}

/// Orbit of every element under the pointwise stabilizer of `a`, as a class id per element.
fn orbits(s: &FiniteStructure, a: &[usize]) -> Vec<usize> {
    let n = s.size();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let color = refine_colors(s, a);
    for b in 0..n {
        for c in b + 1..n {
            if color[b] != color[c] || root(&mut parent, b) == root(&mut parent, c) {
                continue;
            }
            if let Some(g) = find_automorphism(s, a, b, c) {
                for x in 0..n {
                    let (rx, ry) = (root(&mut parent, x), root(&mut parent, g[x]));
                    parent[rx.max(ry)] = rx.min(ry);
                }
            }
        }
    }
    (0..n).map(|x| root(&mut parent, x)).collect()
}

fn check_tuple(s: &FiniteStructure, a: &[usize]) -> Result<(), ClosureError> {
    match a.iter().find(|&&x| x >= s.size()) {
        Some(&x) => Err(ClosureError::OutOfRange(x)),
        None => Ok(()),
    }
}

/// Size of each element's orbit under the automorphisms fixing `a` pointwise.
pub fn orbit_sizes(s: &FiniteStructure, a: &[usize]) -> Result<Vec<usize>, ClosureError> {
    check_bound(s, DEFAULT_SIZE_BOUND)?;
    check_tuple(s, a)?;
    let ids = orbits(s, a);
    let mut count = vec![0; s.size()];
    for &r in &ids {
        count[r] += 1;
    }
    Ok(ids.iter().map(|&r| count[r]).collect())
}

/// Elements fixed by every automorphism fixing `a` pointwise.
pub fn dcl(s: &FiniteStructure, a: &[usize]) -> Result<BTreeSet<usize>, ClosureError> {
    acl(s, a, 1)
}

/// Elements whose orbit under the pointwise stabilizer of `a` has at most `t` elements.
pub fn acl(s: &FiniteStructure, a: &[usize], t: usize) -> Result<BTreeSet<usize>, ClosureError> {
    Ok(orbit_sizes(s, a)?.iter().enumerate().filter(|(_, &k)| k <= t).map(|(b, _)| b).collect())
}

/// A canonical relabelling: equal for isomorphic structures (with matching
/// individualized prefixes `0..prefix` fixed in place).
pub fn canonical_form(s: &FiniteStructure, prefix: usize) -> Vec<u8> {
    let n = s.size();
    let fixed: Vec<usize> = (0..prefix).collect();
    let color = refine_colors(s, &fixed);
    let mut best: Option<Vec<u8>> = None;
    // Elements are placed in colour order; only ties within a colour are permuted.
    let mut by_color: Vec<usize> = (0..n).collect();
    by_color.sort_by_key(|&v| (color[v], v));
    let mut perm = vec![0usize; n];
    fn rec(
        s: &FiniteStructure,
        color: &[usize],
        slots: &[usize],
        k: usize,
        used: &mut Vec<bool>,
        perm: &mut Vec<usize>,
        best: &mut Option<Vec<u8>>,
    ) {
        if k == slots.len() {
            let e = s.permute(perm).encode();
            if best.as_ref().map_or(true, |b| e < *b) {
                *best = Some(e);
            }
            return;
        }
        let want = color[slots[k]];
        for v in 0..slots.len() {
            if !used[v] && color[v] == want {
                used[v] = true;
                perm[v] = k;
                rec(s, color, slots, k + 1, used, perm, best);
                used[v] = false;
            }
        }
    }
    let mut used = vec![false; n];
    rec(s, &color, &by_color, 0, &mut used, &mut perm, &mut best);
    best.unwrap_or_else(|| s.encode())
}
