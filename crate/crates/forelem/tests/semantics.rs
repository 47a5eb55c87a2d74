//! End-to-end semantics: transformed programs must reach the same answers
//! as the base programs, and both must agree with independent oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use forelem::apps::{
    self, build_kmeans_spec, build_matmul_spec, build_pagerank_spec, build_sort_spec,
    dense_matmul, init_kmeans, init_matmul, init_pagerank, init_sort, linf,
    oracle_power_iteration, KMeansProblem, PageRankProblem, RunOptions, SparseMatrix,
};
use forelem::datagen::{gen_clustered_points, gen_graph, ClusterGenConfig, GraphGenConfig};
use forelem::executor::{
    run_forelem, run_whilelem, ExecutionState, LinkedPlan, Scheduler, SweepObserver, Termination,
};
use forelem::ir::Tuple;
use forelem::transforms::{
    self, compose, concretize, interchange, materialize, orthogonalize, variant_by_name, Layout,
    Transformation,
};

fn random_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseMatrix {
    let data: Vec<f64> = (0..n * n)
        .map(|_| if rng.gen_bool(density) { rng.gen_range(-4i64..=4) as f64 } else { 0.0 })
        .collect();
    SparseMatrix::from_dense(n, n, &data)
}

#[test]
fn matmul_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let a = random_sparse(&mut rng, 8, 0.4);
        let b = random_sparse(&mut rng, 8, 0.4);
        let program = build_matmul_spec(&a, &b).unwrap();
        let mut state = ExecutionState::new(&program);
        init_matmul(&a, &b, &mut state);
        run_forelem(&program, &mut state, &Scheduler::SweepShuffled { seed: 5 }).unwrap();
        let got = apps::matmul::read_result(&state, 8, 8);
        let want = dense_matmul(&a.to_dense(), &b.to_dense(), 8, 8, 8);
        assert_eq!(got, want);
    }
}

#[test]
fn interchanged_and_jagged_matmul_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for round in 0..10 {
        let n = 16;
        let a = random_sparse(&mut rng, n, 0.3);
        let b = random_sparse(&mut rng, n, 0.3);
        let base = build_matmul_spec(&a, &b).unwrap();
        let want = dense_matmul(&a.to_dense(), &b.to_dense(), n, n, n);

        // grouped nest: orthogonalize on j then i
        let grouped = orthogonalize(orthogonalize(base.clone(), "j").unwrap(), "i").unwrap();
        let swapped = interchange(grouped.clone(), 1, 2).unwrap();
        for program in [grouped.clone(), swapped.clone()] {
            let mut state = ExecutionState::new(&program);
            init_matmul(&a, &b, &mut state);
            run_forelem(&program, &mut state, &Scheduler::SweepInOrder).unwrap();
            assert_eq!(apps::matmul::read_result(&state, n, n), want, "round {round}");
        }

        // interchange is an involution
        let back = interchange(swapped.clone(), 1, 2).unwrap();
        assert_eq!(back.root, grouped.root);

        // concretized jagged-diagonal layout
        let plan = concretize(materialize(swapped), Layout::JaggedDiagonal).unwrap();
        let mut state = ExecutionState::new(&plan.program);
        init_matmul(&a, &b, &mut state);
        plan.run_forelem(&mut state, &Scheduler::SweepInOrder).unwrap();
        assert_eq!(apps::matmul::read_result(&state, n, n), want, "jagged round {round}");
    }
}

#[test]
fn jagged_layout_requires_an_interchanged_nest() {
    let a = SparseMatrix::from_dense(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let base = build_matmul_spec(&a, &a).unwrap();
    let err = concretize(materialize(base), Layout::JaggedDiagonal).unwrap_err();
    assert!(matches!(err, transforms::TransformError::LayoutUnsupported(_)));
}

#[test]
fn sort_terminates_sorted_under_every_policy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for round in 0..60 {
        let n = rng.gen_range(1..=64);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-100i64..100) as f64).collect();
        let mut want = values.clone();
        want.sort_by(f64::total_cmp);
        for sched in [
            Scheduler::SweepInOrder,
            Scheduler::SweepShuffled { seed: round },
            Scheduler::RandomWithReplacement { seed: round, batch: 4 * n },
        ] {
            let program = build_sort_spec(n, true).unwrap();
            let mut state = ExecutionState::new(&program);
            init_sort(&values, &mut state);
            let (_, term) = run_whilelem(&program, &mut state, &sched, 10_000_000).unwrap();
            assert_eq!(term, Termination::Terminated);
            assert_eq!(state.space("A").scalar_contents(), want);
        }
    }
}

/// Counts visits and accumulates an order-independent fingerprint of the
/// visited tuple multiset.
#[derive(Default)]
struct MultisetTrace {
    visits: u64,
    fingerprint: u64,
}

impl SweepObserver for MultisetTrace {
    fn on_visit(&mut self, tuple: &Tuple) {
        self.visits += 1;
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for v in &tuple.values {
            let bits = match v {
                forelem::ir::Value::Index(i) => *i,
                forelem::ir::Value::Scalar(s) => s.to_bits(),
                forelem::ir::Value::Vector(vs) => {
                    vs.iter().fold(0u64, |acc, x| acc.wrapping_mul(31).wrapping_add(x.to_bits()))
                }
            };
            h = (h ^ bits).wrapping_mul(0x100_0000_01b3);
        }
        self.fingerprint = self.fingerprint.wrapping_add(h);
    }
}

fn sweep_fingerprint(program: &forelem::ir::Program) -> (u64, u64) {
    let plan = LinkedPlan::new(program.clone()).unwrap();
    let mut state = ExecutionState::new(&plan.program);
    let mut trace = MultisetTrace::default();
    // a single forced full pass in dry mode visits every tuple once
    plan.run_whilelem_observed(&mut state, &Scheduler::SweepInOrder, 1, Some(&mut trace)).unwrap();
    (trace.visits, trace.fingerprint)
}

#[test]
fn orthogonalize_and_materialize_preserve_the_sweep_multiset() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let edges: Vec<(u32, u32)> =
        (0..300).map(|_| (rng.gen_range(0..32), rng.gen_range(0..32))).collect();
    let prob = PageRankProblem::new(32, edges).unwrap();
    let base = build_pagerank_spec(&prob);
    let (v0, f0) = sweep_fingerprint(&base);
    assert_eq!(v0, base.iterated_reservoir().len() as u64);

    let orth = orthogonalize(base.clone(), "v").unwrap();
    let (v1, f1) = sweep_fingerprint(&orth);
    assert_eq!((v0, f0), (v1, f1));

    let mat = materialize(orth);
    let (v2, f2) = sweep_fingerprint(&mat);
    assert_eq!((v0, f0), (v2, f2));
}

#[test]
fn splits_cover_the_reservoir_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..30 {
        let n = rng.gen_range(1..1000);
        let edges: Vec<(u32, u32)> = (0..n)
            .map(|_| (rng.gen_range(0..64), rng.gen_range(0..64)))
            .filter(|(u, v)| u != v)
            .collect();
        if edges.is_empty() {
            continue;
        }
        let prob = PageRankProblem::new(64, edges).unwrap();
        let base = build_pagerank_spec(&prob);
        let p = rng.gen_range(1..=16);
        let (v0, f0) = sweep_fingerprint(&base);
        for split in [
            Transformation::SplitByValue { field: "u".into(), partitions: Some(p) },
            Transformation::SplitByRange { field: "u".into(), partitions: Some(p) },
        ] {
            let composed = compose(base.clone(), std::slice::from_ref(&split), p).unwrap();
            assert_eq!(composed.partitions.len(), p);
            let (mut visits, mut fp) = (0u64, 0u64);
            for part in &composed.partitions {
                if part.iterated_reservoir().is_empty() {
                    continue;
                }
                let (v, f) = sweep_fingerprint(part);
                visits += v;
                fp = fp.wrapping_add(f);
            }
            assert_eq!((visits, fp), (v0, f0), "round {round} p {p} {split:?}");
        }
    }
}

#[test]
fn split_ranges_match_the_width_rule() {
    // field values 0..=15 into 4 partitions: widths of exactly 4
    let edges: Vec<(u32, u32)> = (0..16).map(|i| (i, (i + 1) % 16)).collect();
    let prob = PageRankProblem::new(16, edges).unwrap();
    let base = build_pagerank_spec(&prob);
    let composed = compose(
        base,
        &[Transformation::SplitByRange { field: "u".into(), partitions: Some(4) }],
        4,
    )
    .unwrap();
    let us: Vec<Vec<u64>> = composed
        .partitions
        .iter()
        .map(|p| p.iterated_reservoir().distinct_values("u").unwrap())
        .collect();
    assert_eq!(us[0], vec![0, 1, 2, 3]);
    assert_eq!(us[1], vec![4, 5, 6, 7]);
    assert_eq!(us[2], vec![8, 9, 10, 11]);
    assert_eq!(us[3], vec![12, 13, 14, 15]);

    // 0..=16: the last range absorbs the remainder
    let edges: Vec<(u32, u32)> = (0..17).map(|i| (i, (i + 1) % 17)).collect();
    let prob = PageRankProblem::new(17, edges).unwrap();
    let base = build_pagerank_spec(&prob);
    let composed = compose(
        base,
        &[Transformation::SplitByRange { field: "u".into(), partitions: Some(4) }],
        4,
    )
    .unwrap();
    let us: Vec<Vec<u64>> = composed
        .partitions
        .iter()
        .map(|p| p.iterated_reservoir().distinct_values("u").unwrap())
        .collect();
    assert_eq!(us[3], vec![12, 13, 14, 15, 16]);
}

fn small_graph(seed: u64, n: u32, m: usize) -> PageRankProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(u32, u32)> =
        (0..m).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
    PageRankProblem::new(n as usize, edges).unwrap().with_epsilon(1e-10)
}

#[test]
fn base_pagerank_matches_the_power_iteration_oracle() {
    for seed in 0..5 {
        let prob = small_graph(seed, 64, 400);
        let program = build_pagerank_spec(&prob);
        let mut state = ExecutionState::new(&program);
        init_pagerank(&prob, &mut state);
        let (_, term) =
            run_whilelem(&program, &mut state, &Scheduler::SweepInOrder, 100_000).unwrap();
        assert_eq!(term, Termination::Terminated);
        let oracle = oracle_power_iteration(&prob).unwrap();
        let got = state.space("PR").scalar_contents();
        assert!(linf(&got, &oracle) <= 1e-6, "seed {seed}: {}", linf(&got, &oracle));
        // every vertex reachable from the push flow: total rank mass is 1
        let mass: f64 = got.iter().sum();
        assert!((mass - 1.0).abs() <= 1e-6, "seed {seed}: mass {mass}");
    }
}

#[test]
fn oracle_is_a_rank_equation_fixed_point_on_generated_graphs() {
    let cfg = GraphGenConfig::new(10, 31);
    let edges = gen_graph(&cfg);
    let prob = PageRankProblem::new(cfg.vertices(), edges).unwrap();
    let pr = oracle_power_iteration(&prob).unwrap();
    let residual = apps::oracle::rank_equation_residual(&prob, &pr);
    assert!(residual <= 1e-10, "residual {residual}");
}

#[test]
fn run_stats_serialize_to_the_documented_csv_shape() {
    let prob = small_graph(3, 32, 120);
    let variant = variant_by_name("PageRank_4", &[]).unwrap();
    let opts = RunOptions { partitions: 2, workers: 1, ..RunOptions::default() };
    let run = apps::run_pagerank_variant(&prob, &variant, &opts, None).unwrap();
    let header = forelem::executor::RunStats::csv_header();
    let row = run.run.stats.csv_row("PageRank_4");
    assert_eq!(header.split(',').count(), row.split(',').count());
    assert!(row.starts_with("PageRank_4,2,1,"));
}

#[test]
fn every_pagerank_variant_matches_the_oracle() {
    for seed in 0..3 {
        let prob = small_graph(100 + seed, 128, 900);
        let oracle = oracle_power_iteration(&prob).unwrap();
        for name in ["PageRank_1", "PageRank_2", "PageRank_3", "PageRank_4", "PageRank_TRR"] {
            let variant = variant_by_name(name, &[]).unwrap();
            for p in [1usize, 4] {
                let opts = RunOptions {
                    partitions: p,
                    workers: 2,
                    ..RunOptions::default()
                };
                let run = apps::run_pagerank_variant(&prob, &variant, &opts, None).unwrap();
                assert_eq!(run.run.termination, Termination::Terminated, "{name} p={p}");
                let err = linf(&run.ranks, &oracle);
                assert!(err <= 1e-6, "{name} p={p} seed {seed}: linf {err}");
            }
        }
    }
}

#[test]
fn whilelem_quiescence_is_checkable_after_termination() {
    let prob = small_graph(7, 32, 150);
    let program = build_pagerank_spec(&prob);
    let plan = LinkedPlan::new(program).unwrap();
    let mut state = ExecutionState::new(&plan.program);
    init_pagerank(&prob, &mut state);
    plan.run_whilelem(&mut state, &Scheduler::SweepInOrder, 100_000).unwrap();
    assert!(plan.is_quiescent(&mut state).unwrap());
}

#[test]
fn pagerank_fixed_point_is_scheduler_independent() {
    let prob = small_graph(11, 64, 500);
    let program = build_pagerank_spec(&prob);
    let mut reference: Option<Vec<f64>> = None;
    let mut scheds = vec![Scheduler::SweepInOrder];
    for seed in 0..10 {
        scheds.push(Scheduler::SweepShuffled { seed });
    }
    for sched in scheds {
        let mut state = ExecutionState::new(&program);
        init_pagerank(&prob, &mut state);
        let (_, term) = run_whilelem(&program, &mut state, &sched, 100_000).unwrap();
        assert_eq!(term, Termination::Terminated);
        let pr = state.space("PR").scalar_contents();
        match &reference {
            None => reference = Some(pr),
            Some(r) => {
                let bound = 10.0 * prob.epsilon * prob.vertices as f64;
                assert!(linf(r, &pr) <= bound, "{sched:?}: {} > {bound}", linf(r, &pr));
            }
        }
    }
}

#[test]
fn reduced_pagerank_matches_unreduced_on_dangling_heavy_graphs() {
    // >= 30% dangling vertices
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for round in 0..3 {
        let n = 80u32;
        let edges: Vec<(u32, u32)> = (0..300)
            .map(|_| (rng.gen_range(0..n / 2), rng.gen_range(0..n)))
            .collect();
        let prob = PageRankProblem::new(n as usize, edges).unwrap().with_epsilon(1e-12);
        let (_, dangling) = apps::pagerank::expanded_degrees(&prob);
        assert!(
            dangling.len() as f64 >= 0.3 * n as f64,
            "need a dangling-heavy graph, got {}",
            dangling.len()
        );

        let expanded = build_pagerank_spec(&prob);
        let d = dangling.len() as u64;
        let real = prob.edges.len() as u64;
        assert_eq!(expanded.iterated_reservoir().len() as u64, real + d * (n as u64 - 1));

        // the reduction transform compacts the expanded reservoir exactly
        let reduced = forelem::transforms::reduce_reservoir(
            expanded.clone(),
            &forelem::transforms::SubsetSpec {
                family: "u".into(),
                member: "v".into(),
                domain_size: Some(n as u64),
            },
        )
        .unwrap();
        assert_eq!(reduced.iterated_reservoir().len() as u64, real + d);

        // and the direct reduced builder agrees on the tuple counts
        let direct = apps::build_pagerank_spec_reduced(&prob);
        assert_eq!(direct.iterated_reservoir().len(), reduced.iterated_reservoir().len());

        let mut results = Vec::new();
        for program in [expanded, reduced, direct] {
            let mut state = ExecutionState::new(&program);
            init_pagerank(&prob, &mut state);
            let (_, term) =
                run_whilelem(&program, &mut state, &Scheduler::SweepInOrder, 100_000).unwrap();
            assert_eq!(term, Termination::Terminated);
            results.push(state.space("PR").scalar_contents());
        }
        assert!(linf(&results[0], &results[1]) <= 1e-9, "round {round}");
        assert!(linf(&results[0], &results[2]) <= 1e-9, "round {round}");
    }
}

/// Expansion trace: every stub expansion logs the enumerated member.
#[derive(Default)]
struct ExpandTrace(Vec<(u64, u64)>);

impl SweepObserver for ExpandTrace {
    fn on_expand(&mut self, family: u64, member: u64) {
        self.0.push((family, member));
    }
}

#[test]
fn stub_expansion_enumerates_exactly_the_deleted_tuples() {
    let prob = PageRankProblem::new(5, vec![(0, 1)]).unwrap();
    let program = apps::build_pagerank_spec_reduced(&prob);
    let plan = LinkedPlan::new(program).unwrap();
    let mut state = ExecutionState::new(&plan.program);
    init_pagerank(&prob, &mut state);
    let mut trace = ExpandTrace::default();
    plan.run_whilelem_observed(&mut state, &Scheduler::SweepInOrder, 1, Some(&mut trace))
        .unwrap();
    // dangling vertices: 1,2,3,4; each expands to the 4 others on first fire
    let mut seen = trace.0;
    seen.sort_unstable();
    let mut want = Vec::new();
    for u in 1..5u64 {
        for w in 0..5u64 {
            if w != u {
                want.push((u, w));
            }
        }
    }
    want.sort_unstable();
    assert_eq!(seen, want);
}

#[test]
fn kmeans_base_reaches_a_lloyd_fixed_point() {
    let cfg = ClusterGenConfig::new(256, 4, 4, 21);
    let (points, _) = gen_clustered_points(&cfg);
    let prob = KMeansProblem::new(points.clone(), 4, 4, 77).unwrap();
    let program = build_kmeans_spec(&prob);
    let mut state = ExecutionState::new(&program);
    init_kmeans(&prob, &mut state);
    let (_, term) =
        run_whilelem(&program, &mut state, &Scheduler::SweepInOrder, 100_000).unwrap();
    assert_eq!(term, Termination::Terminated);

    let assign: Vec<u64> =
        state.space("M").scalar_contents().iter().map(|&v| v as u64).collect();
    let (_, sums) = state.space("M_SUM").vector_contents();
    let sizes = state.space("M_SIZE").scalar_contents();
    let centers = apps::kmeans::verify::centers_from_stats(&sums, &sizes, 4);
    let violation = apps::kmeans::verify::fixed_point_violation(&points, 4, &assign, &centers);
    assert!(violation <= 1e-9, "violation {violation}");
    let (counts_ok, gap) =
        apps::kmeans::verify::stats_consistency(&points, 4, &assign, &sums, &sizes);
    assert!(counts_ok);
    assert!(gap <= 1e-9, "sum gap {gap}");
}

#[test]
fn every_kmeans_variant_reaches_a_consistent_fixed_point() {
    let cfg = ClusterGenConfig::new(512, 4, 4, 33);
    let (points, _) = gen_clustered_points(&cfg);
    for name in ["Kmeans_1", "Kmeans_2", "Kmeans_3", "Kmeans_4"] {
        let variant = variant_by_name(name, &[]).unwrap();
        for p in [1usize, 4] {
            let prob = KMeansProblem::new(points.clone(), 4, 4, 9).unwrap();
            let opts = RunOptions { partitions: p, workers: 2, ..RunOptions::default() };
            let run = apps::run_kmeans_variant(&prob, &variant, &opts, None).unwrap();
            assert_eq!(run.run.termination, Termination::Terminated, "{name} p={p}");
            let centers = apps::kmeans::verify::centers_from_stats(&run.sums, &run.sizes, 4);
            let violation = apps::kmeans::verify::fixed_point_violation(
                &points,
                4,
                &run.assignments,
                &centers,
            );
            assert!(violation <= 1e-9, "{name} p={p}: violation {violation}");
            let (counts_ok, gap) = apps::kmeans::verify::stats_consistency(
                &points,
                4,
                &run.assignments,
                &run.sums,
                &run.sizes,
            );
            assert!(counts_ok, "{name} p={p}: counts drifted");
            assert!(gap <= 1e-9, "{name} p={p}: sum gap {gap}");
            let total: f64 = run.sizes.iter().sum();
            assert_eq!(total, 512.0, "{name} p={p}");
        }
    }
}

#[test]
fn kmeans_wcss_never_increases_per_accepted_change() {
    let cfg = ClusterGenConfig::new(128, 2, 3, 5);
    let (points, _) = gen_clustered_points(&cfg);
    let prob = KMeansProblem::new(points.clone(), 2, 3, 15).unwrap();
    let program = build_kmeans_spec(&prob);
    let plan = LinkedPlan::new(program).unwrap();
    let mut state = ExecutionState::new(&plan.program);
    init_kmeans(&prob, &mut state);

    struct WcssWatch {
        points: Vec<f64>,
        dim: usize,
        last: f64,
    }
    impl SweepObserver for WcssWatch {
        fn on_applied(&mut self, state: &ExecutionState, record: &forelem::executor::ChangeRecord) {
            if record.is_empty() {
                return;
            }
            let assign: Vec<u64> =
                state.space("M").scalar_contents().iter().map(|&v| v as u64).collect();
            let (_, sums) = state.space("M_SUM").vector_contents();
            let sizes = state.space("M_SIZE").scalar_contents();
            let centers = apps::kmeans::verify::centers_from_stats(&sums, &sizes, self.dim);
            let wcss = apps::kmeans::verify::wcss(&self.points, self.dim, &assign, &centers);
            assert!(
                wcss <= self.last + 1e-9,
                "wcss increased: {} -> {wcss}",
                self.last
            );
            self.last = wcss;
        }
    }
    let mut watch = WcssWatch { points, dim: 2, last: f64::INFINITY };
    let (_, term) = plan
        .run_whilelem_observed(&mut state, &Scheduler::SweepInOrder, 100_000, Some(&mut watch))
        .unwrap();
    assert_eq!(term, Termination::Terminated);
}

#[test]
fn partitioned_single_partition_equals_plain_whilelem() {
    let prob = small_graph(19, 64, 400);
    let variant = variant_by_name("PageRank_1", &[]).unwrap();
    let opts = RunOptions { partitions: 1, workers: 1, ..RunOptions::default() };
    let run = apps::run_pagerank_variant(&prob, &variant, &opts, None).unwrap();

    // plain run over the same (single) partition program
    let composed = compose(build_pagerank_spec(&prob), &variant.pipeline, 1).unwrap();
    let program = composed.partitions.into_iter().next().unwrap();
    let mut state = ExecutionState::new(&program);
    init_pagerank(&prob, &mut state);
    let (_, term) = run_whilelem(&program, &mut state, &Scheduler::SweepInOrder, 100_000).unwrap();
    assert_eq!(term, Termination::Terminated);
    assert_eq!(state.space("PR").scalar_contents(), run.ranks);
}

#[test]
fn degenerate_inputs_terminate_cleanly() {
    // empty reservoir: whilelem over a graph with one vertex
    let prob = PageRankProblem::new(1, vec![]).unwrap();
    let program = build_pagerank_spec(&prob);
    let mut state = ExecutionState::new(&program);
    init_pagerank(&prob, &mut state);
    let (sweeps, term) = run_whilelem(&program, &mut state, &Scheduler::SweepInOrder, 5).unwrap();
    assert_eq!(term, Termination::Terminated);
    assert_eq!(sweeps[0].tuples_visited, 0);

    // all points identical: no move can strictly improve
    let prob = KMeansProblem::new(vec![1.0; 64 * 2], 2, 4, 3).unwrap();
    let variant = variant_by_name("Kmeans_4", &[]).unwrap();
    let run = apps::run_kmeans_variant(&prob, &variant, &RunOptions::default(), None).unwrap();
    assert_eq!(run.run.termination, Termination::Terminated);
    assert_eq!(run.sizes.iter().sum::<f64>(), 64.0);

    // k == N: singletons cannot move (the source would empty)
    let (points, _) = gen_clustered_points(&ClusterGenConfig::new(8, 2, 8, 2));
    let prob = KMeansProblem::new(points, 2, 8, 4).unwrap();
    let run = apps::run_kmeans_variant(&prob, &variant, &RunOptions::default(), None).unwrap();
    assert_eq!(run.run.termination, Termination::Terminated);
    assert!(run.sizes.iter().all(|&s| s == 1.0));

    // fully dangling graph: all vertices expand, uniform fixed point
    let gcfg = GraphGenConfig::new(4, 1).keep_dangling();
    let _ = gen_graph(&gcfg);
    let prob = PageRankProblem::new(16, vec![]).unwrap();
    let program = build_pagerank_spec(&prob);
    let mut state = ExecutionState::new(&program);
    init_pagerank(&prob, &mut state);
    let (_, term) = run_whilelem(&program, &mut state, &Scheduler::SweepInOrder, 100_000).unwrap();
    assert_eq!(term, Termination::Terminated);
    let pr = state.space("PR").scalar_contents();
    for v in &pr {
        assert!((v - 1.0 / 16.0).abs() < 1e-9, "uniform rank expected, got {v}");
    }
}
