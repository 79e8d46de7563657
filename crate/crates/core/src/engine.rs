//! Coordinator: fragments the data, evaluates every BGP on all fragments in
//! parallel, assembles crossing matches, and applies the query algebra.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{assemble_centralized, AssemblyError, JoinShape, JoinStrategy};
use crate::bsp::transport::{InProcTransport, TcpTransport, Transport};
use crate::bsp::{run_bsp, BspError};
use crate::fragment::{
    build_fragments, parse_partition_map, partition_exponential_hash, partition_uniform_hash,
    topology, DistributedGraph, PartitionError, PartitionMap,
};
use crate::matcher::{evaluate_fragment, BoundQuery, CompleteMatch, LocalMatches, MatchError};
use crate::par::parallel_map;
use crate::query::{GeneralQuery, QueryGraph};
use crate::rdf::{parse_ntriples, write_ntriples, NtError, RdfGraph};
use crate::sparql::{bgp_results_to_table, evaluate_pattern, nat_join, to_tsv, BindingTable};

/// Most fragments a provenance bitmap can address.
pub const MAX_FRAGMENTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionStrategy {
    Uniform,
    Exponential,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssemblyMode {
    #[default]
    Centralized,
    Distributed,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TransportKind {
    #[default]
    InProc,
    Tcp(Vec<SocketAddr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub k: usize,
    pub strategy: PartitionStrategy,
    pub assembly: AssemblyMode,
    pub seed: u64,
    pub join: JoinStrategy,
    pub transport: TransportKind,
    /// Checked between evaluation phases; a phase in progress is not interrupted.
    pub timeout: Option<Duration>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            k: 1,
            strategy: PartitionStrategy::Uniform,
            assembly: AssemblyMode::Centralized,
            seed: 0,
            join: JoinStrategy::Partitioned,
            transport: TransportKind::InProc,
            timeout: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.k == 0 || self.k > MAX_FRAGMENTS {
            return Err(EngineError::FragmentCount(self.k));
        }
        if let TransportKind::Tcp(endpoints) = &self.transport {
            if endpoints.len() != self.k {
                return Err(EngineError::Config(format!(
                    "tcp transport needs {} endpoints, got {}",
                    self.k,
                    endpoints.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("fragment count {0} outside 1..={MAX_FRAGMENTS}")]
    FragmentCount(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Bsp(#[from] BspError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("query exceeded its {0:?} time budget")]
    Timeout(Duration),
    #[error("transport setup failed: {0}")]
    Transport(std::io::Error),
}

/// Counters for one query. Timing fields vary between runs; everything else
/// is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryStats {
    /// |Ω(F_i)| summed over the query's BGP components.
    pub lpms_per_fragment: Vec<u64>,
    pub inner_matches: u64,
    pub crossing_matches: u64,
    pub join_attempts: u64,
    /// Largest superstep count over BGP components (distributed assembly only).
    pub supersteps: usize,
    pub messages: u64,
    pub bytes: u64,
    pub topology_diameter: usize,
    pub result_rows: u64,
    pub partial_eval_ms: f64,
    pub assembly_ms: f64,
}

impl QueryStats {
    pub fn without_timing(&self) -> QueryStats {
        QueryStats {
            partial_eval_ms: 0.0,
            assembly_ms: 0.0,
            ..self.clone()
        }
    }

    /// Total matches over all BGP components.
    pub fn total_matches(&self) -> u64 {
        self.inner_matches + self.crossing_matches
    }
}

/// Splits the graph into `cfg.k` fragments with the configured strategy.
pub fn fragment_graph(
    g: Arc<RdfGraph>,
    cfg: &EngineConfig,
) -> Result<DistributedGraph, EngineError> {
    cfg.validate()?;
    let pm = match &cfg.strategy {
        PartitionStrategy::Uniform => partition_uniform_hash(&g, cfg.k, cfg.seed)?,
        PartitionStrategy::Exponential => partition_exponential_hash(&g, cfg.k, cfg.seed)?,
        PartitionStrategy::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                EngineError::Config(format!("cannot read partition map {}: {e}", path.display()))
            })?;
            parse_partition_map(&g, &text, Some(cfg.k))?
        }
    };
    Ok(build_fragments(g, pm)?)
}

struct Run<'a> {
    dg: &'a DistributedGraph,
    cfg: &'a EngineConfig,
    started: Instant,
    stats: QueryStats,
    transport: Box<dyn Transport>,
}

impl Run<'_> {
    fn check_deadline(&self) -> Result<(), EngineError> {
        match self.cfg.timeout {
            Some(limit) if self.started.elapsed() > limit => Err(EngineError::Timeout(limit)),
            _ => Ok(()),
        }
    }

    fn bgp(&mut self, q: &QueryGraph) -> Result<BindingTable, EngineError> {
        let mut table = BindingTable::unit();
        for component in q.connected_components() {
            let matches = self.component_matches(&component)?;
            let part = bgp_results_to_table(self.dg.source(), &component, &matches);
            table = nat_join(&table, &part);
        }
        Ok(table)
    }

    fn component_matches(&mut self, q: &QueryGraph) -> Result<Vec<CompleteMatch>, EngineError> {
        let bq = BoundQuery::new(q, self.dg.source())?;
        if !bq.is_satisfiable() {
            return Ok(Vec::new());
        }
        let t0 = Instant::now();
        let local: Vec<LocalMatches> =
            parallel_map(self.dg.fragments(), |f| evaluate_fragment(&bq, f));
        self.stats.partial_eval_ms += t0.elapsed().as_secs_f64() * 1e3;
        self.check_deadline()?;

        let t1 = Instant::now();
        let mut inner: BTreeSet<CompleteMatch> = BTreeSet::new();
        let mut lpms = Vec::with_capacity(local.len());
        for (i, l) in local.into_iter().enumerate() {
            self.stats.lpms_per_fragment[i] += l.lpms.len() as u64;
            inner.extend(l.inner);
            lpms.push(l.lpms);
        }
        let crossing = match self.cfg.assembly {
            AssemblyMode::Centralized => {
                let omega: Vec<_> = lpms.into_iter().flatten().collect();
                let (crossing, js) = assemble_centralized(&bq, &omega, self.cfg.join)?;
                self.stats.join_attempts += js.attempts;
                crossing
            }
            AssemblyMode::Distributed => {
                let shape = JoinShape::new(&bq);
                let topo = topology(self.dg);
                let out = run_bsp(
                    &shape,
                    bq.n(),
                    &topo,
                    lpms,
                    std::iter::empty(),
                    self.transport.as_mut(),
                )?;
                self.stats.join_attempts += out.stats.join_attempts;
                self.stats.supersteps = self.stats.supersteps.max(out.stats.supersteps);
                self.stats.messages += out.stats.messages;
                self.stats.bytes += out.stats.bytes;
                out.crossing
            }
        };
        self.stats.assembly_ms += t1.elapsed().as_secs_f64() * 1e3;
        self.check_deadline()?;
        self.stats.inner_matches += inner.len() as u64;
        self.stats.crossing_matches += crossing.len() as u64;
        inner.extend(crossing);
        Ok(inner.into_iter().collect())
    }
}

/// Answers a query over a fragmented graph. The returned table holds only
/// the projected variables.
pub fn execute(
    gq: &GeneralQuery,
    dg: &DistributedGraph,
    cfg: &EngineConfig,
) -> Result<(BindingTable, QueryStats), EngineError> {
    if dg.k() > MAX_FRAGMENTS {
        return Err(EngineError::FragmentCount(dg.k()));
    }
    let transport: Box<dyn Transport> = match (&cfg.transport, cfg.assembly) {
        (TransportKind::Tcp(endpoints), AssemblyMode::Distributed) => {
            if endpoints.len() != dg.k() {
                return Err(EngineError::Config(format!(
                    "tcp transport needs {} endpoints, got {}",
                    dg.k(),
                    endpoints.len()
                )));
            }
            Box::new(TcpTransport::bind(endpoints).map_err(EngineError::Transport)?)
        }
        _ => Box::new(InProcTransport),
    };
    let mut run = Run {
        dg,
        cfg,
        started: Instant::now(),
        stats: QueryStats {
            lpms_per_fragment: vec![0; dg.k()],
            topology_diameter: topology(dg).diameter(),
            ..Default::default()
        },
        transport,
    };
    let table = evaluate_pattern(&gq.pattern, &mut |q: &QueryGraph| run.bgp(q))?;
    run.check_deadline()?;
    let projected = table.project(&gq.projection);
    run.stats.result_rows = projected.len() as u64;
    Ok((projected, run.stats))
}

/// Runs [`execute`] and renders the answer as TSV.
pub fn execute_tsv(
    gq: &GeneralQuery,
    dg: &DistributedGraph,
    cfg: &EngineConfig,
) -> Result<(String, QueryStats), EngineError> {
    let (table, stats) = execute(gq, dg, cfg)?;
    Ok((to_tsv(&gq.projection, &table), stats))
}

/// On-disk database: a directory with `data.nt`, and after partitioning,
/// `partition.tsv` plus `meta.json`. Fragments are rebuilt on load.
pub mod db {
    use super::*;

    pub const DATA_FILE: &str = "data.nt";
    pub const PARTITION_FILE: &str = "partition.tsv";
    pub const META_FILE: &str = "meta.json";

    #[derive(Debug, Error)]
    pub enum DbError {
        #[error("{path}: {source}")]
        Io {
            path: PathBuf,
            source: std::io::Error,
        },
        #[error("{path}: {source}")]
        NTriples { path: PathBuf, source: NtError },
        #[error("{path}: {source}")]
        Partition {
            path: PathBuf,
            source: PartitionError,
        },
        #[error("{path}: {source}")]
        Meta {
            path: PathBuf,
            source: serde_json::Error,
        },
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DbError + '_ {
        move |source| DbError::Io {
            path: path.to_owned(),
            source,
        }
    }

    /// How the stored partition map was produced.
    #[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
    pub struct PartitionMeta {
        pub k: usize,
        pub strategy: PartitionStrategy,
        pub seed: u64,
    }

    pub struct Database {
        pub dir: PathBuf,
        pub graph: Arc<RdfGraph>,
        /// `None` until the database is partitioned.
        pub partition: Option<(PartitionMap, PartitionMeta)>,
    }

    impl Database {
        /// The stored fragmentation, or a single fragment if none was stored.
        pub fn distributed(&self) -> Result<DistributedGraph, PartitionError> {
            let pm = match &self.partition {
                Some((pm, _)) => pm.clone(),
                None => PartitionMap::new(
                    vec![crate::fragment::FragmentId(0); self.graph.vertex_count()],
                    1,
                )?,
            };
            build_fragments(self.graph.clone(), pm)
        }
    }

    /// Parses an N-Triples file and stores a normalized copy in `dir`.
    pub fn create(data: &Path, dir: &Path) -> Result<Database, DbError> {
        let bytes = std::fs::read(data).map_err(io(data))?;
        let graph = parse_ntriples(&bytes).map_err(|source| DbError::NTriples {
            path: data.to_owned(),
            source,
        })?;
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let out = dir.join(DATA_FILE);
        std::fs::write(&out, write_ntriples(&graph)).map_err(io(&out))?;
        for stale in [PARTITION_FILE, META_FILE] {
            let p = dir.join(stale);
            if p.exists() {
                std::fs::remove_file(&p).map_err(io(&p))?;
            }
        }
        Ok(Database {
            dir: dir.to_owned(),
            graph: Arc::new(graph),
            partition: None,
        })
    }

    pub fn open(dir: &Path) -> Result<Database, DbError> {
        let data = dir.join(DATA_FILE);
        let bytes = std::fs::read(&data).map_err(io(&data))?;
        let graph = parse_ntriples(&bytes).map_err(|source| DbError::NTriples {
            path: data.clone(),
            source,
        })?;
        let meta_path = dir.join(META_FILE);
        let partition = if meta_path.exists() {
            let text = std::fs::read_to_string(&meta_path).map_err(io(&meta_path))?;
            let meta: PartitionMeta =
                serde_json::from_str(&text).map_err(|source| DbError::Meta {
                    path: meta_path.clone(),
                    source,
                })?;
            let map_path = dir.join(PARTITION_FILE);
            let text = std::fs::read_to_string(&map_path).map_err(io(&map_path))?;
            let pm = parse_partition_map(&graph, &text, Some(meta.k)).map_err(|source| {
                DbError::Partition {
                    path: map_path.clone(),
                    source,
                }
            })?;
            Some((pm, meta))
        } else {
            None
        };
        Ok(Database {
            dir: dir.to_owned(),
            graph: Arc::new(graph),
            partition,
        })
    }

    /// Stores a partition map and its provenance next to the data.
    pub fn save_partition(
        db: &mut Database,
        pm: PartitionMap,
        meta: PartitionMeta,
    ) -> Result<(), DbError> {
        let map_path = db.dir.join(PARTITION_FILE);
        std::fs::write(&map_path, pm.to_file_format(&db.graph)).map_err(io(&map_path))?;
        let meta_path = db.dir.join(META_FILE);
        let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        std::fs::write(&meta_path, json + "\n").map_err(io(&meta_path))?;
        db.partition = Some((pm, meta));
        Ok(())
    }
}
