//! Distributed assembly of crossing matches by bulk-synchronous supersteps.
//!
//! Fragments are ranked by the number of local partial matches they hold
//! (ties by id). Partial results only ever travel to higher-ranked sites
//! adjacent to a fragment that contributed to them, and a complete match is
//! reported by exactly one site: the highest-ranked fragment owning one of
//! its images.

pub mod transport;
pub mod wire;

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{is_complete, key, mergeable, union, JoinShape, Key};
use crate::fragment::{FragmentId, TopologyGraph};
use crate::matcher::{bits, fragment_bit, CompleteMatch, PartialMatch};
use crate::par::parallel_map_mut;
use transport::{Batch, Transport, TransportError};
use wire::WireError;

#[derive(Debug, Error)]
pub enum BspError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("expected {expected} fragments, got {actual}")]
    FragmentCount { expected: usize, actual: usize },
}

/// Total order on fragments used to direct message flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentOrder {
    rank: Vec<usize>,
    by_rank: Vec<FragmentId>,
}

impl FragmentOrder {
    /// Orders fragments by ascending LPM count, then by id.
    pub fn new(omega_sizes: &[usize]) -> Self {
        let mut by_rank: Vec<FragmentId> = (0..omega_sizes.len())
            .map(|i| FragmentId(i as u32))
            .collect();
        by_rank.sort_by_key(|f| (omega_sizes[f.index()], *f));
        let mut rank = vec![0; omega_sizes.len()];
        for (r, f) in by_rank.iter().enumerate() {
            rank[f.index()] = r;
        }
        FragmentOrder { rank, by_rank }
    }

    pub fn rank(&self, f: FragmentId) -> usize {
        self.rank[f.index()]
    }

    /// Fragments from lowest to highest rank.
    pub fn fragments(&self) -> &[FragmentId] {
        &self.by_rank
    }

    pub fn precedes(&self, a: FragmentId, b: FragmentId) -> bool {
        self.rank(a) < self.rank(b)
    }

    /// Highest-ranked fragment of a fragment bitmap.
    pub fn max_of(&self, mask: u64) -> Option<FragmentId> {
        bits(mask)
            .map(|i| FragmentId(i as u32))
            .max_by_key(|&f| self.rank(f))
    }
}

/// Sites a partial result is forwarded to: fragments ranked above all of its
/// provenance that neighbour at least one provenance fragment.
pub fn route(
    pm: &PartialMatch,
    order: &FragmentOrder,
    topo: &TopologyGraph,
) -> BTreeSet<FragmentId> {
    let Some(top) = order.max_of(pm.provenance) else {
        return BTreeSet::new();
    };
    pm.provenance_fragments()
        .flat_map(|f| topo.neighbors(f).iter().copied())
        .filter(|&j| order.precedes(top, j))
        .collect()
}

/// Site that reports a complete match.
pub fn canonical_site(pm: &PartialMatch, order: &FragmentOrder) -> Option<FragmentId> {
    order.max_of(pm.touched)
}

/// Everything a site needs to know about the query and the cluster.
pub struct BspContext<'a> {
    pub shape: &'a JoinShape,
    pub n: usize,
    pub order: &'a FragmentOrder,
    pub topo: &'a TopologyGraph,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocalOutput {
    /// Complete matches this site reports.
    pub matches: Vec<CompleteMatch>,
    /// New intermediates and complete matches owed to another site.
    pub delta_out: Vec<PartialMatch>,
    pub attempts: u64,
}

/// Per-site state carried across supersteps.
#[derive(Debug, Clone)]
pub struct Site {
    pub id: FragmentId,
    pool: Vec<PartialMatch>,
    known: HashSet<Key>,
    emitted: BTreeSet<CompleteMatch>,
}

impl Site {
    pub fn new(id: FragmentId, lpms: Vec<PartialMatch>) -> Self {
        let known = lpms.iter().map(key).collect();
        Site {
            id,
            pool: lpms,
            known,
            emitted: BTreeSet::new(),
        }
    }

    /// The site's retained partial results (its LPMs plus everything it has sent).
    pub fn pool(&self) -> &[PartialMatch] {
        &self.pool
    }

    pub fn emitted(&self) -> &BTreeSet<CompleteMatch> {
        &self.emitted
    }

    /// One computation superstep: joins what arrived with what the site holds,
    /// for at most `n` rounds. A pair is only tried when this site contributed
    /// to one side, so every result carries this site in its provenance.
    pub fn compute(&mut self, ctx: &BspContext<'_>, delta_in: Vec<PartialMatch>) -> LocalOutput {
        let mut out = LocalOutput::default();
        let site_bit = fragment_bit(self.id);
        let mut pool = self.pool.clone();
        let mut ms = Vec::new();
        for pm in delta_in {
            if is_complete(ctx.shape, &pm) {
                self.report(ctx, pm, &mut out);
            } else if self.known.insert(key(&pm)) {
                pool.push(pm.clone());
                ms.push(pm);
            }
        }
        for _ in 0..ctx.n {
            let mut next = Vec::new();
            for pm in &ms {
                for other in &pool {
                    if (pm.provenance | other.provenance) & site_bit == 0 {
                        continue;
                    }
                    out.attempts += 1;
                    if !mergeable(ctx.shape, pm, other) {
                        continue;
                    }
                    let merged = union(pm, other);
                    if !self.known.insert(key(&merged)) {
                        continue;
                    }
                    if is_complete(ctx.shape, &merged) {
                        self.report(ctx, merged, &mut out);
                    } else {
                        out.delta_out.push(merged.clone());
                        next.push(merged);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            ms = next;
        }
        self.pool.extend(
            out.delta_out
                .iter()
                .filter(|pm| !is_complete(ctx.shape, pm))
                .cloned(),
        );
        out
    }

    fn report(&mut self, ctx: &BspContext<'_>, pm: PartialMatch, out: &mut LocalOutput) {
        if canonical_site(&pm, ctx.order) == Some(self.id) {
            let m = pm.to_complete().expect("complete matches are total");
            if self.emitted.insert(m.clone()) {
                out.matches.push(m);
            }
        } else {
            out.delta_out.push(pm);
        }
    }
}

/// One computation superstep on a fresh site holding `pool`.
pub fn local_computation(
    ctx: &BspContext<'_>,
    site: FragmentId,
    delta_in: Vec<PartialMatch>,
    pool: Vec<PartialMatch>,
) -> LocalOutput {
    Site::new(site, pool).compute(ctx, delta_in)
}

/// Destinations of an outgoing item. Complete matches go straight to their
/// reporting site, which always neighbours one of their provenance fragments.
fn destinations(ctx: &BspContext<'_>, pm: &PartialMatch) -> BTreeSet<FragmentId> {
    if is_complete(ctx.shape, pm) {
        canonical_site(pm, ctx.order).into_iter().collect()
    } else {
        route(pm, ctx.order, ctx.topo)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BspStats {
    /// Computation supersteps executed.
    pub supersteps: usize,
    /// Partial results sent, counting each destination separately.
    pub messages: u64,
    pub bytes: u64,
    pub join_attempts: u64,
    /// Items still undelivered when the superstep budget ran out.
    pub pending_at_cap: u64,
    pub diameter: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BspOutcome {
    /// Inner matches together with every reported crossing match.
    pub matches: BTreeSet<CompleteMatch>,
    pub crossing: BTreeSet<CompleteMatch>,
    /// What each site reported, in fragment id order.
    pub reported: Vec<Vec<CompleteMatch>>,
    pub stats: BspStats,
}

impl BspOutcome {
    /// Total reports across sites; equals `crossing.len()` when no match was
    /// reported twice.
    pub fn report_count(&self) -> usize {
        self.reported.iter().map(Vec::len).sum()
    }
}

fn send_all(
    ctx: &BspContext<'_>,
    outboxes: &[(FragmentId, Vec<PartialMatch>)],
    transport: &mut dyn Transport,
    stats: &mut BspStats,
) -> Result<Vec<Vec<PartialMatch>>, BspError> {
    let k = ctx.order.fragments().len();
    let mut batches = Vec::new();
    for (src, items) in outboxes {
        let mut per_dst: Vec<Vec<&PartialMatch>> = vec![Vec::new(); k];
        for pm in items {
            for d in destinations(ctx, pm) {
                per_dst[d.index()].push(pm);
            }
        }
        for (d, items) in per_dst.into_iter().enumerate() {
            if items.is_empty() {
                continue;
            }
            stats.messages += items.len() as u64;
            let payload = wire::encode_batch(*src, items)?;
            stats.bytes += payload.len() as u64;
            batches.push(Batch {
                src: *src,
                dst: FragmentId(d as u32),
                payload,
            });
        }
    }
    let inboxes = transport.exchange(k, batches)?;
    inboxes
        .into_iter()
        .map(|inbox| {
            let mut items = Vec::new();
            for b in inbox {
                items.extend(
                    wire::decode_batch(&b.payload)?
                        .into_iter()
                        .map(|(_, pm)| pm),
                );
            }
            Ok(items)
        })
        .collect()
}

/// Runs the protocol: superstep 0 ships every LPM, then each computation
/// superstep is followed by a communication step, until nothing is sent or
/// the topology diameter is reached.
pub fn run_bsp(
    shape: &JoinShape,
    n: usize,
    topo: &TopologyGraph,
    lpms: Vec<Vec<PartialMatch>>,
    inner: impl IntoIterator<Item = CompleteMatch>,
    transport: &mut dyn Transport,
) -> Result<BspOutcome, BspError> {
    let k = topo.k();
    if lpms.len() != k {
        return Err(BspError::FragmentCount {
            expected: k,
            actual: lpms.len(),
        });
    }
    let order = FragmentOrder::new(&lpms.iter().map(Vec::len).collect::<Vec<_>>());
    let ctx = BspContext {
        shape,
        n,
        order: &order,
        topo,
    };
    let mut stats = BspStats {
        diameter: topo.diameter(),
        ..Default::default()
    };
    let mut sites: Vec<Site> = lpms
        .into_iter()
        .enumerate()
        .map(|(i, l)| Site::new(FragmentId(i as u32), l))
        .collect();

    let initial: Vec<(FragmentId, Vec<PartialMatch>)> =
        sites.iter().map(|s| (s.id, s.pool.clone())).collect();
    let messages_before = stats.messages;
    let mut inboxes = send_all(&ctx, &initial, transport, &mut stats)?;
    let mut sent = stats.messages > messages_before;

    let mut reported = vec![Vec::new(); k];
    while sent {
        if stats.supersteps == stats.diameter {
            stats.pending_at_cap = inboxes.iter().map(|i| i.len() as u64).sum();
            break;
        }
        stats.supersteps += 1;
        let mut work: Vec<(&mut Site, Vec<PartialMatch>)> =
            sites.iter_mut().zip(inboxes.drain(..)).collect();
        let outputs = parallel_map_mut(&mut work, |(site, inbox)| {
            site.compute(&ctx, std::mem::take(inbox))
        });
        let mut outboxes = Vec::with_capacity(k);
        for (i, out) in outputs.into_iter().enumerate() {
            stats.join_attempts += out.attempts;
            reported[i].extend(out.matches);
            outboxes.push((FragmentId(i as u32), out.delta_out));
        }
        let messages_before = stats.messages;
        inboxes = send_all(&ctx, &outboxes, transport, &mut stats)?;
        sent = stats.messages > messages_before;
    }

    let crossing: BTreeSet<CompleteMatch> = reported.iter().flatten().cloned().collect();
    let mut matches: BTreeSet<CompleteMatch> = inner.into_iter().collect();
    matches.extend(crossing.iter().cloned());
    Ok(BspOutcome {
        matches,
        crossing,
        reported,
        stats,
    })
}
