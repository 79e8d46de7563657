//! Centralized assembly of local partial matches into crossing matches.

use std::collections::{BTreeSet, HashMap, HashSet};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::{bits, BoundQuery, CompleteMatch, PartialMatch};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssemblyError {
    #[error("partial matches are not joinable")]
    NotJoinable,
    #[error("local partial match {0} has no internal vertex among the anchor order")]
    UnassignedLpm(usize),
}

/// Counters shared by the join algorithms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinStats {
    /// Pairs handed to `joinable`.
    pub attempts: u64,
    /// Pairs that were joinable.
    pub joins: u64,
    /// Distinct intermediate results produced.
    pub intermediates: u64,
}

/// Query edges as endpoint pairs, the part of the query the assembler needs.
#[derive(Debug, Clone)]
pub struct JoinShape {
    edges: Vec<(usize, usize)>,
}

impl JoinShape {
    pub fn new(bq: &BoundQuery) -> Self {
        JoinShape {
            edges: bq.edge_endpoints().collect(),
        }
    }

    pub fn from_edges(edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        JoinShape {
            edges: edges.into_iter().collect(),
        }
    }

    fn covered(&self, internal: u64, v: usize) -> bool {
        internal >> v & 1 == 1
    }
}

fn consistent(a: &PartialMatch, b: &PartialMatch) -> bool {
    a.func.len() == b.func.len()
        && a.func.iter().zip(&b.func).all(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => x == y,
            _ => true,
        })
}

fn has_crossing_edge(shape: &JoinShape, a: &PartialMatch, b: &PartialMatch) -> bool {
    shape.edges.iter().any(|&(x, y)| {
        let crossing = (shape.covered(a.internal, x) && shape.covered(b.internal, y))
            || (shape.covered(b.internal, x) && shape.covered(a.internal, y));
        crossing
            && a.func[x].is_some()
            && a.func[x] == b.func[x]
            && a.func[y].is_some()
            && a.func[y] == b.func[y]
    })
}

/// Two partial matches are joinable when no query vertex is internal in
/// both, no vertex is bound differently, and some query edge has the same
/// images in both with one endpoint internal on each side.
pub fn joinable(shape: &JoinShape, a: &PartialMatch, b: &PartialMatch) -> bool {
    a.internal & b.internal == 0 && consistent(a, b) && has_crossing_edge(shape, a, b)
}

/// A relaxation of [`joinable`] for intermediates that already share a
/// local partial match: consistent matches whose internal sets overlap may
/// also be merged. A shared internal vertex with equal images pins down the
/// same local match on both sides, so the union stays a union of verified
/// local matches.
pub fn mergeable(shape: &JoinShape, a: &PartialMatch, b: &PartialMatch) -> bool {
    consistent(a, b) && (a.internal & b.internal != 0 || has_crossing_edge(shape, a, b))
}

/// Merges two [`mergeable`] partial matches.
pub fn merge(
    shape: &JoinShape,
    a: &PartialMatch,
    b: &PartialMatch,
) -> Result<JoinOutcome, AssemblyError> {
    if !mergeable(shape, a, b) {
        return Err(AssemblyError::NotJoinable);
    }
    Ok(classify_join(shape, union(a, b)))
}

pub(crate) fn union(a: &PartialMatch, b: &PartialMatch) -> PartialMatch {
    PartialMatch {
        func: a.func.iter().zip(&b.func).map(|(x, y)| x.or(*y)).collect(),
        internal: a.internal | b.internal,
        provenance: a.provenance | b.provenance,
        touched: a.touched | b.touched,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JoinOutcome {
    Complete(CompleteMatch),
    Intermediate(PartialMatch),
}

/// Merges two joinable partial matches.
pub fn join(
    shape: &JoinShape,
    a: &PartialMatch,
    b: &PartialMatch,
) -> Result<JoinOutcome, AssemblyError> {
    if !joinable(shape, a, b) {
        return Err(AssemblyError::NotJoinable);
    }
    Ok(classify_join(shape, union(a, b)))
}

/// A merged match is complete once every vertex is bound and every query
/// edge has an endpoint that was internal where it was matched, so every
/// edge has been verified by some fragment.
pub fn is_complete(shape: &JoinShape, pm: &PartialMatch) -> bool {
    pm.is_total()
        && shape
            .edges
            .iter()
            .all(|&(x, y)| shape.covered(pm.internal, x) || shape.covered(pm.internal, y))
}

fn classify_join(shape: &JoinShape, merged: PartialMatch) -> JoinOutcome {
    if is_complete(shape, &merged) {
        JoinOutcome::Complete(merged.to_complete().unwrap())
    } else {
        JoinOutcome::Intermediate(merged)
    }
}

pub(crate) type Key = (Vec<Option<crate::rdf::VertexId>>, u64);

pub(crate) fn key(pm: &PartialMatch) -> Key {
    (pm.func.clone(), pm.internal)
}

/// Iteratively joins the current intermediates with every LPM, for at most
/// `n` rounds or until a round produces nothing new.
pub fn naive_iterative_join(
    shape: &JoinShape,
    omega: &[PartialMatch],
    n: usize,
) -> (BTreeSet<CompleteMatch>, JoinStats) {
    let mut stats = JoinStats::default();
    let mut results = BTreeSet::new();
    let mut seen: HashSet<Key> = omega.iter().map(key).collect();
    let mut ms: Vec<PartialMatch> = omega.to_vec();
    for _ in 0..n {
        let mut next = Vec::new();
        for pm in &ms {
            for other in omega {
                stats.attempts += 1;
                if !joinable(shape, pm, other) {
                    continue;
                }
                stats.joins += 1;
                match join(shape, pm, other).expect("checked joinable") {
                    JoinOutcome::Complete(m) => {
                        results.insert(m);
                    }
                    JoinOutcome::Intermediate(i) => {
                        if seen.insert(key(&i)) {
                            stats.intermediates += 1;
                            next.push(i);
                        }
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        ms = next;
    }
    (results, stats)
}

/// One group of LPMs sharing an internally matched anchor vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    pub anchor: usize,
    pub members: Vec<PartialMatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LpmPartitioning {
    pub parts: Vec<Part>,
}

impl LpmPartitioning {
    pub fn sizes(&self) -> Vec<usize> {
        self.parts.iter().map(|p| p.members.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.parts.iter().map(|p| p.members.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sorted_by_size(mut self) -> Self {
        self.parts
            .sort_by_key(|p| std::cmp::Reverse(p.members.len()));
        self
    }
}

/// Assigns each LPM to the first vertex in `order` it matches internally.
pub fn build_partitioning(
    omega: &[PartialMatch],
    order: &[usize],
) -> Result<LpmPartitioning, AssemblyError> {
    let mut parts: Vec<Part> = order
        .iter()
        .map(|&anchor| Part {
            anchor,
            members: Vec::new(),
        })
        .collect();
    for (i, pm) in omega.iter().enumerate() {
        let slot = order
            .iter()
            .position(|&v| pm.is_internal(v))
            .ok_or(AssemblyError::UnassignedLpm(i))?;
        parts[slot].members.push(pm.clone());
    }
    Ok(LpmPartitioning { parts })
}

/// Product of `(size + 1)` over all parts.
pub fn join_cost_of_sizes(sizes: &[usize]) -> BigUint {
    sizes
        .iter()
        .fold(BigUint::from(1u32), |acc, &s| acc * BigUint::from(s + 1))
}

pub fn join_cost(p: &LpmPartitioning) -> BigUint {
    join_cost_of_sizes(&p.sizes())
}

/// Largest query size handled by the exact search over anchor sets.
pub const MAX_DP_VERTICES: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimalPartitioning {
    /// Parts in join order, largest first.
    pub partitioning: LpmPartitioning,
    pub cost: BigUint,
    /// Anchor order the partitioning was built from.
    pub order: Vec<usize>,
    /// Distinct anchor sets evaluated; 0 when the greedy order was used.
    pub memo_entries: usize,
}

/// Finds an anchor order minimising the join cost by memoised search over
/// sets of used anchors. Falls back to the greedy order above
/// [`MAX_DP_VERTICES`] vertices.
pub fn optimal_partitioning(
    omega: &[PartialMatch],
    n: usize,
) -> Result<OptimalPartitioning, AssemblyError> {
    if let Some(i) = omega.iter().position(|pm| pm.internal & mask(n) == 0) {
        return Err(AssemblyError::UnassignedLpm(i));
    }
    if n > MAX_DP_VERTICES {
        return greedy_partitioning(omega, n);
    }
    let mut dp = CostSearch {
        omega,
        n,
        memo: HashMap::new(),
    };
    dp.cost(0);
    let mut order = Vec::with_capacity(n);
    let mut used = 0u32;
    while let Some(&(_, Some(v))) = dp.memo.get(&used) {
        order.push(v);
        used |= 1 << v;
    }
    order.extend((0..n).filter(|v| used >> v & 1 == 0));
    let partitioning = build_partitioning(omega, &order)?.sorted_by_size();
    let cost = join_cost(&partitioning);
    Ok(OptimalPartitioning {
        partitioning,
        cost,
        order,
        memo_entries: dp.memo.len(),
    })
}

fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

struct CostSearch<'a> {
    omega: &'a [PartialMatch],
    n: usize,
    memo: HashMap<u32, (BigUint, Option<usize>)>,
}

impl CostSearch<'_> {
    fn cost(&mut self, used: u32) -> BigUint {
        if let Some((c, _)) = self.memo.get(&used) {
            return c.clone();
        }
        let remaining: Vec<&PartialMatch> = self
            .omega
            .iter()
            .filter(|pm| pm.internal & u64::from(used) == 0)
            .collect();
        let mut best: (BigUint, Option<usize>) = (BigUint::from(1u32), None);
        if !remaining.is_empty() {
            let mut found: Option<(BigUint, usize)> = None;
            for v in (0..self.n).filter(|v| used >> v & 1 == 0) {
                let size = remaining.iter().filter(|pm| pm.is_internal(v)).count();
                if size == 0 {
                    continue;
                }
                let c = BigUint::from(size + 1) * self.cost(used | 1 << v);
                if found.as_ref().is_none_or(|(b, _)| c < *b) {
                    found = Some((c, v));
                }
            }
            let (c, v) = found.expect("every remaining LPM has an unused internal vertex");
            best = (c, Some(v));
        }
        self.memo.insert(used, best.clone());
        best.0
    }
}

/// Repeatedly takes the anchor with the most remaining LPMs.
pub fn greedy_partitioning(
    omega: &[PartialMatch],
    n: usize,
) -> Result<OptimalPartitioning, AssemblyError> {
    let mut used = 0u64;
    let mut order = Vec::with_capacity(n);
    loop {
        let remaining: Vec<&PartialMatch> =
            omega.iter().filter(|pm| pm.internal & used == 0).collect();
        if remaining.is_empty() {
            break;
        }
        let best = (0..n)
            .filter(|v| used >> v & 1 == 0)
            .map(|v| (remaining.iter().filter(|pm| pm.is_internal(v)).count(), v))
            .filter(|&(c, _)| c > 0)
            .min_by_key(|&(c, v)| (std::cmp::Reverse(c), v));
        let Some((_, v)) = best else { break };
        order.push(v);
        used |= 1 << v;
    }
    order.extend((0..n).filter(|v| used >> v & 1 == 0));
    let partitioning = build_partitioning(omega, &order)?.sorted_by_size();
    let cost = join_cost(&partitioning);
    Ok(OptimalPartitioning {
        partitioning,
        cost,
        order,
        memo_entries: 0,
    })
}

/// Joins across parts only. Each item keeps the set of parts it has already
/// been offered; an LPM of part `i` starts having seen parts `0..=i`, and a
/// new intermediate starts having seen every part whose anchor it already
/// matches internally, since members of those parts overlap it.
pub fn partitioning_based_join(
    shape: &JoinShape,
    p: &LpmPartitioning,
) -> (BTreeSet<CompleteMatch>, JoinStats) {
    let parts: Vec<&Part> = p
        .parts
        .iter()
        .filter(|part| !part.members.is_empty())
        .collect();
    assert!(parts.len() <= 64, "at most 64 nonempty parts");
    let anchored = |pm: &PartialMatch| {
        parts
            .iter()
            .enumerate()
            .filter(|(_, part)| pm.is_internal(part.anchor))
            .fold(0u64, |acc, (j, _)| acc | 1 << j)
    };
    let all = mask(parts.len());
    let mut stats = JoinStats::default();
    let mut results = BTreeSet::new();
    let mut seen: HashSet<Key> = HashSet::new();
    let mut items: Vec<(PartialMatch, u64)> = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        for pm in &part.members {
            if seen.insert(key(pm)) {
                items.push((pm.clone(), mask(i + 1) | anchored(pm)));
            }
        }
    }
    let mut idx = 0;
    while idx < items.len() {
        let (pm, tried) = items[idx].clone();
        for j in bits(all & !tried) {
            for other in &parts[j].members {
                stats.attempts += 1;
                if !joinable(shape, &pm, other) {
                    continue;
                }
                stats.joins += 1;
                match join(shape, &pm, other).expect("checked joinable") {
                    JoinOutcome::Complete(m) => {
                        results.insert(m);
                    }
                    JoinOutcome::Intermediate(i) => {
                        if seen.insert(key(&i)) {
                            stats.intermediates += 1;
                            let t = anchored(&i);
                            items.push((i, t));
                        }
                    }
                }
            }
        }
        idx += 1;
    }
    (results, stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinStrategy {
    Naive,
    #[default]
    Partitioned,
}

/// Crossing matches from all fragments' LPMs.
pub fn assemble_centralized(
    bq: &BoundQuery,
    omega: &[PartialMatch],
    strategy: JoinStrategy,
) -> Result<(BTreeSet<CompleteMatch>, JoinStats), AssemblyError> {
    let shape = JoinShape::new(bq);
    Ok(match strategy {
        JoinStrategy::Naive => naive_iterative_join(&shape, omega, bq.n()),
        JoinStrategy::Partitioned => {
            let opt = optimal_partitioning(omega, bq.n())?;
            partitioning_based_join(&shape, &opt.partitioning)
        }
    })
}
