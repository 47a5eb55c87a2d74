//! The command surface: exit codes, file round trips, grids, and the CSV
//! contract, exercised through the library-level command functions.

use forelem::cli::{
    cmd_generate_graph, cmd_generate_points, cmd_list_variants, cmd_run, cmd_sweep, RunConfig,
    SweepGrid, CSV_HEADER, EXIT_OK, EXIT_USAGE,
};
use forelem::transforms::AppKind;

#[test]
fn generated_files_round_trip_and_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.txt");
    let p2 = dir.path().join("b.txt");
    assert_eq!(cmd_generate_points(100, 3, 4, 9, &p1).unwrap(), EXIT_OK);
    assert_eq!(cmd_generate_points(100, 3, 4, 9, &p2).unwrap(), EXIT_OK);
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    let (points, dim) =
        forelem::apps::io::read_points(std::fs::File::open(&p1).unwrap()).unwrap();
    assert_eq!(dim, 3);
    assert_eq!(points.len(), 300);

    let g1 = dir.path().join("g1.txt");
    let g2 = dir.path().join("g2.txt");
    assert_eq!(cmd_generate_graph(6, 4, 3, false, &g1).unwrap(), EXIT_OK);
    assert_eq!(cmd_generate_graph(6, 4, 3, false, &g2).unwrap(), EXIT_OK);
    assert_eq!(std::fs::read(&g1).unwrap(), std::fs::read(&g2).unwrap());
}

#[test]
fn zero_points_writes_an_empty_file_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.txt");
    assert_eq!(cmd_generate_points(0, 4, 4, 1, &p).unwrap(), EXIT_OK);
    assert_eq!(std::fs::read_to_string(&p).unwrap(), "");
}

#[test]
fn run_from_an_input_file_and_emit_csv() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("points.txt");
    cmd_generate_points(512, 4, 4, 5, &points).unwrap();
    let csv = dir.path().join("out.csv");
    let cfg = RunConfig {
        app: AppKind::KMeans,
        variant: "Kmeans_2".into(),
        input: Some(points),
        partitions: 2,
        workers: 2,
        verify: true,
        csv: Some(csv.clone()),
        ..RunConfig::default()
    };
    assert_eq!(cmd_run(&cfg), EXIT_OK);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let row = lines.next().unwrap();
    assert!(row.starts_with("kmeans,Kmeans_2,2,2,"));
    assert!(row.contains(",pass,"));
}

#[test]
fn unknown_variant_is_a_usage_exit() {
    let cfg = RunConfig { variant: "Missing_1".into(), ..RunConfig::default() };
    assert_eq!(cmd_run(&cfg), EXIT_USAGE);
}

#[test]
fn variant_app_mismatch_is_a_usage_exit() {
    let cfg = RunConfig {
        app: AppKind::PageRank,
        variant: "Kmeans_1".into(),
        gen_scale: 5,
        ..RunConfig::default()
    };
    assert_eq!(cmd_run(&cfg), EXIT_USAGE);
}

#[test]
fn sweep_emits_one_row_per_cell_and_survives_failures() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let cfg = RunConfig {
        app: AppKind::KMeans,
        variant: "Kmeans_4".into(),
        gen_n: 256,
        gen_dim: 2,
        partitions: 2,
        workers: 1,
        csv: Some(csv.clone()),
        ..RunConfig::default()
    };
    let grid = SweepGrid {
        variants: vec!["Kmeans_4".into(), "Broken_1".into()],
        workers: vec![1, 2],
        ..SweepGrid::default()
    };
    assert_eq!(cmd_sweep(&cfg, &grid), EXIT_OK);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], format!("{CSV_HEADER},error"));
    // 2 variants x 2 worker counts
    assert_eq!(lines.len(), 1 + 4);
    let broken: Vec<&&str> = lines.iter().filter(|l| l.contains("Broken_1")).collect();
    assert_eq!(broken.len(), 2);
    assert!(broken.iter().all(|l| l.contains("unknown variant")));
}

#[test]
fn list_variants_includes_config_file_entries() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("extra.toml");
    std::fs::write(
        &file,
        r#"
[[variant]]
name = "PR_master"
app = "pagerank"
pipeline = ["orthogonalize v", "split_value v"]
exchange = "master"
"#,
    )
    .unwrap();
    assert_eq!(cmd_list_variants(Some(&file)), EXIT_OK);
    assert_eq!(cmd_list_variants(None), EXIT_OK);

    // config-file variants are runnable
    let cfg = RunConfig {
        app: AppKind::PageRank,
        variant: "PR_master".into(),
        gen_scale: 6,
        partitions: 2,
        workers: 1,
        verify: true,
        variants_file: Some(file),
        ..RunConfig::default()
    };
    assert_eq!(cmd_run(&cfg), EXIT_OK);
}
