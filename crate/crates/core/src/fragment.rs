//! Vertex-disjoint partitioning of an [`RdfGraph`] into fragments.
//!
//! A fragment owns its internal vertices and the edges among them. Every edge
//! that crosses two fragments is replicated into both, and its foreign
//! endpoint becomes an *extended* vertex of the fragment that does not own it.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::rdf::{self, Edge, PredicateId, RdfGraph, Term, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FragmentId(pub u32);

impl FragmentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("the number of fragments must be at least 1")]
    ZeroFragments,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: vertex {vertex} does not occur in the graph")]
    UnknownVertex { line: usize, vertex: String },
    #[error("vertex {vertex} has no fragment assignment")]
    MissingVertex { vertex: String },
    #[error("line {line}: vertex {vertex} is assigned to fragments {first} and {second}")]
    DuplicateAssignment {
        line: usize,
        vertex: String,
        first: u32,
        second: u32,
    },
    #[error("line {line}: fragment id {id} is outside 0..{k}")]
    FragmentOutOfRange { line: usize, id: u32, k: usize },
    #[error("partition map covers {map} vertices but the graph has {graph}")]
    SizeMismatch { map: usize, graph: usize },
}

/// Total assignment of graph vertices to fragments `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    assignment: Vec<FragmentId>,
    k: usize,
}

impl PartitionMap {
    pub fn new(assignment: Vec<FragmentId>, k: usize) -> Result<Self, PartitionError> {
        if k == 0 {
            return Err(PartitionError::ZeroFragments);
        }
        if let Some(bad) = assignment.iter().find(|f| f.index() >= k) {
            return Err(PartitionError::FragmentOutOfRange {
                line: 0,
                id: bad.0,
                k,
            });
        }
        Ok(PartitionMap { assignment, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fragment_of(&self, v: VertexId) -> FragmentId {
        self.assignment[v.index()]
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Number of vertices per fragment.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for f in &self.assignment {
            sizes[f.index()] += 1;
        }
        sizes
    }

    /// Serializes in the partition-file format, one `lexical<TAB>fragment` line per vertex.
    pub fn to_file_format(&self, g: &RdfGraph) -> String {
        let mut out = String::new();
        for v in g.vertices() {
            let term = g.term(v);
            let key = match term {
                Term::Iri(iri)
                    if iri.starts_with('<') || iri.starts_with("_:") || iri.starts_with('"') =>
                {
                    term.to_string()
                }
                _ => term.lexical(),
            };
            let _ = writeln!(out, "{key}\t{}", self.fragment_of(v).0);
        }
        out
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Murmur3's 64-bit finalizer; spreads FNV's weak low bits over the whole word.
fn fmix64(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^= h >> 33;
    h
}

/// Seeded, platform-independent 64-bit hash of a term's lexical form.
pub fn vertex_hash(term: &Term, seed: u64) -> u64 {
    fmix64(fnv1a64(term.lexical().as_bytes()) ^ seed)
}

pub fn partition_uniform_hash(
    g: &RdfGraph,
    k: usize,
    seed: u64,
) -> Result<PartitionMap, PartitionError> {
    if k == 0 {
        return Err(PartitionError::ZeroFragments);
    }
    let assignment = g
        .vertices()
        .map(|v| FragmentId((vertex_hash(g.term(v), seed) % k as u64) as u32))
        .collect();
    PartitionMap::new(assignment, k)
}

/// Fragment `j < k-1` receives a vertex with probability `0.5^(j+1)`; the
/// remaining mass goes to fragment `k-1`. The leading-zero count of a uniform
/// 64-bit hash has exactly this geometric distribution.
pub fn partition_exponential_hash(
    g: &RdfGraph,
    k: usize,
    seed: u64,
) -> Result<PartitionMap, PartitionError> {
    if k == 0 {
        return Err(PartitionError::ZeroFragments);
    }
    let assignment = g
        .vertices()
        .map(|v| {
            let j = vertex_hash(g.term(v), seed).leading_zeros() as usize;
            FragmentId(j.min(k - 1) as u32)
        })
        .collect();
    PartitionMap::new(assignment, k)
}

/// Reads a partition file. Vertex keys may be written in N-Triples syntax or,
/// for IRIs, bare. `k` defaults to the largest fragment id plus one.
pub fn parse_partition_map(
    g: &RdfGraph,
    text: &str,
    k: Option<usize>,
) -> Result<PartitionMap, PartitionError> {
    if k == Some(0) {
        return Err(PartitionError::ZeroFragments);
    }
    let mut assignment: Vec<Option<FragmentId>> = vec![None; g.vertex_count()];
    let mut max_id = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (key, id) = line
            .rsplit_once('\t')
            .ok_or_else(|| PartitionError::Syntax {
                line: line_no,
                message: "expected '<vertex>\\t<fragment id>'".into(),
            })?;
        let id: u32 = id.trim().parse().map_err(|_| PartitionError::Syntax {
            line: line_no,
            message: format!("invalid fragment id {:?}", id.trim()),
        })?;
        if let Some(k) = k {
            if id as usize >= k {
                return Err(PartitionError::FragmentOutOfRange {
                    line: line_no,
                    id,
                    k,
                });
            }
        }
        let term = parse_vertex_key(key).map_err(|message| PartitionError::Syntax {
            line: line_no,
            message,
        })?;
        let v = g
            .vertex_id(&term)
            .ok_or_else(|| PartitionError::UnknownVertex {
                line: line_no,
                vertex: term.to_string(),
            })?;
        match assignment[v.index()] {
            Some(prev) if prev.0 != id => {
                return Err(PartitionError::DuplicateAssignment {
                    line: line_no,
                    vertex: term.to_string(),
                    first: prev.0,
                    second: id,
                })
            }
            _ => assignment[v.index()] = Some(FragmentId(id)),
        }
        max_id = max_id.max(Some(id));
    }
    let assignment = assignment
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            f.ok_or_else(|| PartitionError::MissingVertex {
                vertex: g.term(VertexId(i as u32)).to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let k = k.unwrap_or_else(|| max_id.map_or(1, |m| m as usize + 1));
    PartitionMap::new(assignment, k)
}

pub fn partition_from_file(
    g: &RdfGraph,
    path: &std::path::Path,
    k: Option<usize>,
) -> Result<PartitionMap, PartitionFileError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_partition_map(g, &text, k)?)
}

#[derive(Debug, Error)]
pub enum PartitionFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

fn parse_vertex_key(key: &str) -> Result<Term, String> {
    if key.starts_with('<') || key.starts_with('"') || key.starts_with("_:") {
        rdf::parse_term(key).map_err(|e| e.to_string())
    } else if key.is_empty() {
        Err("empty vertex key".into())
    } else {
        Ok(Term::iri(key))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Internal,
    Extended,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    local: u32,
    role: Role,
    owner: FragmentId,
}

/// One site's share of the graph.
#[derive(Debug, Clone)]
pub struct Fragment {
    id: FragmentId,
    internal: Vec<VertexId>,
    extended: Vec<VertexId>,
    slots: HashMap<VertexId, Slot>,
    inner_edges: Vec<Edge>,
    crossing_edges: Vec<Edge>,
    labels: BTreeSet<PredicateId>,
    out: Vec<Vec<(VertexId, PredicateId)>>,
    inc: Vec<Vec<(VertexId, PredicateId)>>,
    with_out_label: HashMap<PredicateId, Vec<VertexId>>,
    with_in_label: HashMap<PredicateId, Vec<VertexId>>,
}

impl Fragment {
    pub fn id(&self) -> FragmentId {
        self.id
    }

    /// Internal vertices, ascending.
    pub fn internal(&self) -> &[VertexId] {
        &self.internal
    }

    /// Extended vertices, ascending.
    pub fn extended(&self) -> &[VertexId] {
        &self.extended
    }

    /// Internal vertices followed by extended ones.
    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.internal.iter().chain(&self.extended).copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.internal.len() + self.extended.len()
    }

    pub fn inner_edges(&self) -> &[Edge] {
        &self.inner_edges
    }

    pub fn crossing_edges(&self) -> &[Edge] {
        &self.crossing_edges
    }

    /// Labels of inner and crossing edges.
    pub fn labels(&self) -> &BTreeSet<PredicateId> {
        &self.labels
    }

    pub fn role(&self, v: VertexId) -> Option<Role> {
        self.slots.get(&v).map(|s| s.role)
    }

    pub fn is_internal(&self, v: VertexId) -> bool {
        self.role(v) == Some(Role::Internal)
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.slots.contains_key(&v)
    }

    /// Home fragment of a vertex known to this fragment.
    pub fn owner(&self, v: VertexId) -> Option<FragmentId> {
        self.slots.get(&v).map(|s| s.owner)
    }

    /// Fragment-local out-edges `(target, label)`, sorted. For an extended
    /// vertex these are only its edges into this fragment's internal vertices.
    pub fn out_edges(&self, v: VertexId) -> &[(VertexId, PredicateId)] {
        self.slots
            .get(&v)
            .map_or(&[], |s| &self.out[s.local as usize])
    }

    pub fn in_edges(&self, v: VertexId) -> &[(VertexId, PredicateId)] {
        self.slots
            .get(&v)
            .map_or(&[], |s| &self.inc[s.local as usize])
    }

    /// Labels of fragment edges `u -> v`.
    pub fn labels_between(
        &self,
        u: VertexId,
        v: VertexId,
    ) -> impl Iterator<Item = PredicateId> + '_ {
        let out = self.out_edges(u);
        let start = out.partition_point(|&(t, _)| t < v);
        out[start..]
            .iter()
            .take_while(move |&&(t, _)| t == v)
            .map(|&(_, p)| p)
    }

    /// Fragment vertices having an out-edge labeled `p`, ascending.
    pub fn vertices_with_out_label(&self, p: PredicateId) -> &[VertexId] {
        self.with_out_label.get(&p).map_or(&[], Vec::as_slice)
    }

    /// Fragment vertices having an in-edge labeled `p`, ascending.
    pub fn vertices_with_in_label(&self, p: PredicateId) -> &[VertexId] {
        self.with_in_label.get(&p).map_or(&[], Vec::as_slice)
    }

    /// Fragment vertices with at least one out-edge (any label).
    pub fn vertices_with_any_out(&self) -> Vec<VertexId> {
        self.vertices()
            .filter(|&v| !self.out_edges(v).is_empty())
            .collect()
    }

    /// Fragment vertices with at least one in-edge (any label).
    pub fn vertices_with_any_in(&self) -> Vec<VertexId> {
        self.vertices()
            .filter(|&v| !self.in_edges(v).is_empty())
            .collect()
    }
}

/// All fragments of a partitioned graph, plus the graph they came from.
#[derive(Debug, Clone)]
pub struct DistributedGraph {
    fragments: Vec<Fragment>,
    source: Arc<RdfGraph>,
    partition: PartitionMap,
}

impl DistributedGraph {
    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn fragment(&self, id: FragmentId) -> &Fragment {
        &self.fragments[id.index()]
    }

    pub fn k(&self) -> usize {
        self.fragments.len()
    }

    pub fn source(&self) -> &Arc<RdfGraph> {
        &self.source
    }

    pub fn partition(&self) -> &PartitionMap {
        &self.partition
    }

    /// Union of inner and crossing edges over all fragments, deduplicated.
    pub fn merged_edges(&self) -> BTreeSet<Edge> {
        self.fragments
            .iter()
            .flat_map(|f| f.inner_edges.iter().chain(&f.crossing_edges).copied())
            .collect()
    }
}

pub fn build_fragments(
    g: Arc<RdfGraph>,
    pm: PartitionMap,
) -> Result<DistributedGraph, PartitionError> {
    if pm.len() != g.vertex_count() {
        return Err(PartitionError::SizeMismatch {
            map: pm.len(),
            graph: g.vertex_count(),
        });
    }
    let k = pm.k();
    let mut internal: Vec<Vec<VertexId>> = vec![Vec::new(); k];
    for v in g.vertices() {
        internal[pm.fragment_of(v).index()].push(v);
    }
    let mut inner: Vec<Vec<Edge>> = vec![Vec::new(); k];
    let mut crossing: Vec<Vec<Edge>> = vec![Vec::new(); k];
    let mut extended: Vec<BTreeSet<VertexId>> = vec![BTreeSet::new(); k];
    for &e in g.edges() {
        let (fs, fo) = (pm.fragment_of(e.s), pm.fragment_of(e.o));
        if fs == fo {
            inner[fs.index()].push(e);
        } else {
            crossing[fs.index()].push(e);
            crossing[fo.index()].push(e);
            extended[fs.index()].insert(e.o);
            extended[fo.index()].insert(e.s);
        }
    }
    let fragments = (0..k)
        .map(|i| {
            let id = FragmentId(i as u32);
            let internal = std::mem::take(&mut internal[i]);
            let extended: Vec<VertexId> = std::mem::take(&mut extended[i]).into_iter().collect();
            let mut slots = HashMap::with_capacity(internal.len() + extended.len());
            for (local, &v) in internal.iter().chain(&extended).enumerate() {
                let role = if local < internal.len() {
                    Role::Internal
                } else {
                    Role::Extended
                };
                slots.insert(
                    v,
                    Slot {
                        local: local as u32,
                        role,
                        owner: pm.fragment_of(v),
                    },
                );
            }
            let n_local = slots.len();
            let mut out = vec![Vec::new(); n_local];
            let mut inc = vec![Vec::new(); n_local];
            let mut labels = BTreeSet::new();
            let mut with_out_label: HashMap<PredicateId, Vec<VertexId>> = HashMap::new();
            let mut with_in_label: HashMap<PredicateId, Vec<VertexId>> = HashMap::new();
            for e in inner[i].iter().chain(&crossing[i]) {
                out[slots[&e.s].local as usize].push((e.o, e.p));
                inc[slots[&e.o].local as usize].push((e.s, e.p));
                labels.insert(e.p);
                with_out_label.entry(e.p).or_default().push(e.s);
                with_in_label.entry(e.p).or_default().push(e.o);
            }
            for list in out.iter_mut().chain(inc.iter_mut()) {
                list.sort_unstable();
            }
            for list in with_out_label
                .values_mut()
                .chain(with_in_label.values_mut())
            {
                list.sort_unstable();
                list.dedup();
            }
            Fragment {
                id,
                internal,
                extended,
                slots,
                inner_edges: std::mem::take(&mut inner[i]),
                crossing_edges: std::mem::take(&mut crossing[i]),
                labels,
                out,
                inc,
                with_out_label,
                with_in_label,
            }
        })
        .collect();
    Ok(DistributedGraph {
        fragments,
        source: g,
        partition: pm,
    })
}

/// Fragmentation topology: fragments are adjacent when a crossing edge joins them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyGraph {
    adjacency: Vec<BTreeSet<FragmentId>>,
    diameter: usize,
}

impl TopologyGraph {
    pub fn from_adjacency(adjacency: Vec<BTreeSet<FragmentId>>) -> Self {
        let diameter = diameter_of(&adjacency);
        TopologyGraph {
            adjacency,
            diameter,
        }
    }

    pub fn k(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, f: FragmentId) -> &BTreeSet<FragmentId> {
        &self.adjacency[f.index()]
    }

    pub fn adjacent(&self, a: FragmentId, b: FragmentId) -> bool {
        self.adjacency[a.index()].contains(&b)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Largest eccentricity over connected components; 0 for isolated fragments.
    pub fn diameter(&self) -> usize {
        self.diameter
    }
}

fn diameter_of(adjacency: &[BTreeSet<FragmentId>]) -> usize {
    let k = adjacency.len();
    let mut best = 0;
    let mut dist = vec![usize::MAX; k];
    let mut queue = VecDeque::new();
    for start in 0..k {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[start] = 0;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            best = best.max(dist[u]);
            for w in &adjacency[u] {
                if dist[w.index()] == usize::MAX {
                    dist[w.index()] = dist[u] + 1;
                    queue.push_back(w.index());
                }
            }
        }
    }
    best
}

pub fn topology(dg: &DistributedGraph) -> TopologyGraph {
    let mut adjacency = vec![BTreeSet::new(); dg.k()];
    for f in dg.fragments() {
        for e in f.crossing_edges() {
            let (a, b) = (dg.partition.fragment_of(e.s), dg.partition.fragment_of(e.o));
            adjacency[a.index()].insert(b);
            adjacency[b.index()].insert(a);
        }
    }
    TopologyGraph::from_adjacency(adjacency)
}
