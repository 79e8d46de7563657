use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use parteval::assembly::JoinStrategy;
use parteval::engine::db::{self, DbError, PartitionMeta};
use parteval::engine::{
    execute_tsv, fragment_graph, AssemblyMode, EngineConfig, PartitionStrategy, TransportKind,
};
use parteval::fragment::topology;
use parteval::query::parse_sparql;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "parteval",
    version,
    about = "Evaluate SPARQL queries over a vertex-partitioned RDF graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an N-Triples file into a new database directory.
    Load {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split the database into fragments and store the partition map.
    Partition {
        #[arg(long)]
        db: PathBuf,
        #[arg(short = 'k', long = "fragments")]
        k: usize,
        #[arg(long, value_enum, default_value_t = StrategyArg::Uniform)]
        strategy: StrategyArg,
        /// Partition map for `--strategy file`: one `<vertex>\t<fragment>` line per vertex.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Answer a SELECT query; results go to stdout as TSV.
    Query {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        sparql: PathBuf,
        #[arg(long, value_enum, default_value_t = AssemblyArg::C)]
        assembly: AssemblyArg,
        #[arg(long, value_enum, default_value_t = JoinArg::Partitioned)]
        join: JoinArg,
        /// Write query statistics as JSON to this path.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Comma-separated listener addresses, one per fragment, for distributed assembly over TCP.
        #[arg(long, value_delimiter = ',')]
        tcp: Option<Vec<SocketAddr>>,
        #[arg(long)]
        timeout_ms: Option<u64>,
    },
    /// Print database and fragment statistics as JSON.
    Stats {
        #[arg(long)]
        db: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Uniform,
    Exponential,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum AssemblyArg {
    #[value(alias = "centralized")]
    C,
    #[value(alias = "distributed")]
    D,
}

#[derive(Clone, Copy, ValueEnum)]
enum JoinArg {
    Naive,
    Partitioned,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Query(String),
    Io(String),
}

impl From<DbError> for Failure {
    fn from(e: DbError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Load { data, out } => {
            let database = db::create(&data, &out)?;
            eprintln!(
                "loaded {} triples over {} vertices into {}",
                database.graph.edge_count(),
                database.graph.vertex_count(),
                out.display()
            );
        }
        Command::Partition {
            db: dir,
            k,
            strategy,
            map,
            seed,
        } => {
            let mut database = db::open(&dir)?;
            let strategy = match (strategy, map) {
                (StrategyArg::Uniform, _) => PartitionStrategy::Uniform,
                (StrategyArg::Exponential, _) => PartitionStrategy::Exponential,
                (StrategyArg::File, Some(path)) => {
                    if !path.exists() {
                        return Err(Failure::Io(format!("{}: no such file", path.display())));
                    }
                    PartitionStrategy::File(path)
                }
                (StrategyArg::File, None) => {
                    return Err(Failure::Query("--strategy file requires --map".into()))
                }
            };
            let cfg = EngineConfig {
                k,
                strategy: strategy.clone(),
                seed,
                ..Default::default()
            };
            let dg = fragment_graph(database.graph.clone(), &cfg)
                .map_err(|e| Failure::Query(e.to_string()))?;
            let sizes = dg.partition().sizes();
            db::save_partition(
                &mut database,
                dg.partition().clone(),
                PartitionMeta { k, strategy, seed },
            )?;
            eprintln!("partitioned into {k} fragments with sizes {sizes:?}");
        }
        Command::Query {
            db: dir,
            sparql,
            assembly,
            join,
            stats,
            tcp,
            timeout_ms,
        } => {
            let text = read_text(&sparql)?;
            let gq = parse_sparql(&text)
                .map_err(|e| Failure::Query(format!("{}: {e}", sparql.display())))?;
            let database = db::open(&dir)?;
            let dg = database
                .distributed()
                .map_err(|e| Failure::Io(e.to_string()))?;
            let cfg = EngineConfig {
                k: dg.k(),
                assembly: match assembly {
                    AssemblyArg::C => AssemblyMode::Centralized,
                    AssemblyArg::D => AssemblyMode::Distributed,
                },
                join: match join {
                    JoinArg::Naive => JoinStrategy::Naive,
                    JoinArg::Partitioned => JoinStrategy::Partitioned,
                },
                transport: tcp.map_or(TransportKind::InProc, TransportKind::Tcp),
                timeout: timeout_ms.map(Duration::from_millis),
                ..Default::default()
            };
            cfg.validate().map_err(|e| Failure::Query(e.to_string()))?;
            let (tsv, query_stats) =
                execute_tsv(&gq, &dg, &cfg).map_err(|e| Failure::Query(e.to_string()))?;
            if let Some(path) = stats {
                let body =
                    serde_json::to_string_pretty(&query_stats).expect("stats serialize") + "\n";
                std::fs::write(&path, body)
                    .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            }
            print!("{tsv}");
        }
        Command::Stats { db: dir } => {
            let database = db::open(&dir)?;
            let dg = database
                .distributed()
                .map_err(|e| Failure::Io(e.to_string()))?;
            let topo = topology(&dg);
            let fragments: Vec<_> = dg
                .fragments()
                .iter()
                .map(|f| {
                    json!({
                        "id": f.id().0,
                        "internal_vertices": f.internal().len(),
                        "extended_vertices": f.extended().len(),
                        "inner_edges": f.inner_edges().len(),
                        "crossing_edges": f.crossing_edges().len(),
                    })
                })
                .collect();
            let report = json!({
                "triples": database.graph.edge_count(),
                "vertices": database.graph.vertex_count(),
                "predicates": database.graph.predicate_count(),
                "k": dg.k(),
                "partition": database.partition.as_ref().map(|(_, meta)| meta),
                "topology_edges": topo.edge_count(),
                "topology_diameter": topo.diameter(),
                "fragments": fragments,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Query(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
