use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn parteval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parteval"))
        .args(args)
        .output()
        .unwrap()
}

fn parteval_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parteval"))
        .args(args)
        .env(key, value)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A database loaded from the running example and split with its partition map.
fn movies_db() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("db");
    let out = parteval(&["load", "--data", s(&fixture("movies.nt")), "--out", s(&db)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let map = fixture("movies.partition");
    let out = parteval(&[
        "partition",
        "--db",
        s(&db),
        "-k",
        "4",
        "--strategy",
        "file",
        "--map",
        s(&map),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir
}

#[test]
fn query_prints_sorted_tsv_in_both_assembly_modes() {
    let dir = movies_db();
    let db = dir.path().join("db");
    let rq = fixture("married_directors.rq");
    let stats_path = dir.path().join("stats.json");
    let c = parteval(&[
        "query",
        "--db",
        s(&db),
        "--sparql",
        s(&rq),
        "--assembly",
        "c",
        "--stats",
        s(&stats_path),
    ]);
    assert_eq!(
        c.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&c.stderr)
    );
    let stdout = String::from_utf8(c.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("?a\t?d"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.contains(&"<s2:act1>\t<s1:dir1>"));
    let mut sorted = rows.clone();
    sorted.sort();
    assert_eq!(rows, sorted);

    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&stats_path).unwrap()).unwrap();
    assert_eq!(stats["lpms_per_fragment"][0], 5);
    for field in [
        "inner_matches",
        "crossing_matches",
        "partial_eval_ms",
        "assembly_ms",
        "supersteps",
        "messages",
        "bytes",
    ] {
        assert!(stats.get(field).is_some(), "missing {field}");
    }

    for mode in ["d", "distributed"] {
        let d = parteval(&[
            "query",
            "--db",
            s(&db),
            "--sparql",
            s(&rq),
            "--assembly",
            mode,
            "--join",
            "naive",
        ]);
        assert_eq!(d.status.code(), Some(0));
        assert_eq!(String::from_utf8(d.stdout).unwrap(), stdout);
    }
}

#[test]
fn output_is_deterministic_across_runs_and_thread_counts() {
    let dir = movies_db();
    let db = dir.path().join("db");
    let rq = fixture("married_directors.rq");
    let args = [
        "query",
        "--db",
        s(&db),
        "--sparql",
        s(&rq),
        "--assembly",
        "d",
    ];
    let a = parteval(&args);
    let b = parteval(&args);
    let one = parteval_env(&args, "PARTEVAL_THREADS", "1");
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, one.stdout);
}

#[test]
fn missing_files_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let nowhere = dir.path().join("absent.nt");
    let out = parteval(&[
        "load",
        "--data",
        s(&nowhere),
        "--out",
        s(&dir.path().join("db")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.nt"));

    let out = parteval(&[
        "query",
        "--db",
        s(&dir.path().join("nodb")),
        "--sparql",
        s(&fixture("married_directors.rq")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let db = movies_db();
    let out = parteval(&[
        "query",
        "--db",
        s(&db.path().join("db")),
        "--sparql",
        s(&dir.path().join("none.rq")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_sparql_exits_with_code_one_and_a_position() {
    let dir = movies_db();
    let rq = dir.path().join("bad.rq");
    std::fs::write(&rq, "SELECT ?a WHERE {\n  ?a <p> \n}").unwrap();
    let out = parteval(&[
        "query",
        "--db",
        s(&dir.path().join("db")),
        "--sparql",
        s(&rq),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3, column 1"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn stats_reports_fragments() {
    let dir = movies_db();
    let out = parteval(&["stats", "--db", s(&dir.path().join("db"))]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["k"], 4);
    assert_eq!(v["triples"], 18);
    assert_eq!(v["fragments"].as_array().unwrap().len(), 4);
    assert_eq!(v["partition"]["k"], 4);
}

#[test]
fn hash_partitioning_round_trips_through_the_database() {
    let dir = movies_db();
    let db = dir.path().join("db");
    let rq = fixture("married_directors.rq");
    let before = parteval(&["query", "--db", s(&db), "--sparql", s(&rq)]);
    for strategy in ["uniform", "exponential"] {
        let out = parteval(&[
            "partition",
            "--db",
            s(&db),
            "-k",
            "3",
            "--strategy",
            strategy,
            "--seed",
            "7",
        ]);
        assert!(out.status.success());
        let after = parteval(&[
            "query",
            "--db",
            s(&db),
            "--sparql",
            s(&rq),
            "--assembly",
            "d",
        ]);
        assert_eq!(after.stdout, before.stdout, "{strategy}");
    }
    let out = parteval(&["partition", "--db", s(&db), "-k", "3", "--strategy", "file"]);
    assert_eq!(out.status.code(), Some(1));
}
