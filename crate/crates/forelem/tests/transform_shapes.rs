//! Structural checks: each transformation produces the expected loop shape,
//! and composing the built-in pipelines yields the named variants' forms.

use forelem::apps::{build_kmeans_spec, build_pagerank_spec, KMeansProblem, PageRankProblem};
use forelem::ir::{Binder, DomainKind, LoopBody, LoopKind, LoopNest};
use forelem::transforms::{
    compose, localize, materialize, orthogonalize, reduce_reservoir, split_by_value,
    variant_by_name, SubsetSpec, TransformError, Transformation,
};

fn kmeans_program() -> forelem::ir::Program {
    let prob = KMeansProblem::new(vec![0.0, 1.0, 5.0, 6.0, 9.0, 2.0], 2, 2, 1).unwrap();
    build_kmeans_spec(&prob)
}

fn pagerank_program() -> forelem::ir::Program {
    let prob = PageRankProblem::new(4, vec![(0, 1), (1, 2), (2, 0), (3, 1)]).unwrap();
    build_pagerank_spec(&prob)
}

fn domains(root: &LoopNest) -> Vec<DomainKind> {
    root.levels().iter().map(|l| l.domain.clone()).collect()
}

#[test]
fn orthogonalized_kmeans_has_the_grouped_shape() {
    let program = orthogonalize(kmeans_program(), "x").unwrap();
    let levels = program.root.levels();
    assert_eq!(levels.len(), 2);
    // outer: whilelem over the distinct values of x
    assert_eq!(levels[0].kind, LoopKind::Whilelem);
    assert_eq!(levels[0].domain, DomainKind::GroupValues { field: "x".into() });
    assert!(matches!(levels[0].binder, Binder::Ident(_)));
    // inner: forelem over the selected group
    assert_eq!(levels[1].kind, LoopKind::Forelem);
    assert_eq!(levels[1].domain, DomainKind::GroupRows);
    assert_eq!(levels[1].binder, Binder::Tuple);
    // the body is untouched
    assert_eq!(program.root.blocks(), kmeans_program().root.blocks());
}

#[test]
fn orthogonalized_pagerank_groups_by_target() {
    let program = orthogonalize(pagerank_program(), "v").unwrap();
    assert_eq!(
        domains(&program.root),
        vec![DomainKind::GroupValues { field: "v".into() }, DomainKind::GroupRows]
    );
}

#[test]
fn orthogonalize_rejects_unknown_and_non_index_fields() {
    assert!(matches!(
        orthogonalize(kmeans_program(), "nope"),
        Err(TransformError::UnknownField(_))
    ));
}

#[test]
fn degenerate_orthogonalization_single_value() {
    // k = 1: the m field takes one value, so the outer loop has one iteration
    let prob = KMeansProblem::new(vec![0.0, 1.0, 2.0], 1, 1, 1).unwrap();
    let program = orthogonalize(build_kmeans_spec(&prob), "m").unwrap();
    let reservoir = program.iterated_reservoir();
    assert_eq!(reservoir.distinct_values("m").unwrap().len(), 1);
    assert_eq!(reservoir.len(), 3);
}

#[test]
fn split_p1_is_the_whole_reservoir() {
    let program = kmeans_program();
    let total = program.iterated_reservoir().len();
    let (parts, info) = split_by_value(program, "x", 1).unwrap();
    assert_eq!(parts.len(), 1);
    assert_eq!(parts[0].iterated_reservoir().len(), total);
    assert_eq!(info.partitions, 1);
}

#[test]
fn localized_kmeans_has_the_tuple_carried_fields() {
    let grouped = orthogonalize(kmeans_program(), "x").unwrap();
    let local_m = localize(grouped, "M", "c_x").unwrap();
    let localized = localize(local_m, "COORDS", "c").unwrap();
    // both spaces are gone from the declarations
    assert!(localized.space("M").is_none());
    assert!(localized.space("COORDS").is_none());
    assert!(localized.space("M_SUM").is_some());
    // and live on as tuple-carried fields keyed by x
    let c_x = localized.localized_field("c_x").unwrap();
    assert!(c_x.mutable);
    assert_eq!(c_x.key_field, "x");
    let c = localized.localized_field("c").unwrap();
    assert!(!c.mutable);
    assert_eq!(c.key_field, "x");
    // no body expression mentions the localized spaces any more
    for block in localized.root.blocks() {
        let mut seen = false;
        block.guard.visit(&mut |e| {
            if let forelem::ir::Expr::Read { space, .. } = e {
                seen |= space == "M" || space == "COORDS";
            }
        });
        assert!(!seen);
    }
    assert_eq!(forelem::ir::validate_program(&localized), vec![]);
}

#[test]
fn localized_pagerank_carries_old_per_edge() {
    let program = localize(pagerank_program(), "OLD", "old").unwrap();
    let old = program.localized_field("old").unwrap();
    assert!(old.mutable);
    assert_eq!(old.key_field, "e");
    assert!(program.space("OLD").is_none());
}

#[test]
fn rank_space_is_not_localizable() {
    // PR is read through u and written through v: one location is touched
    // by different fields, so it cannot ride on the tuples
    let err = localize(pagerank_program(), "PR", "pr").unwrap_err();
    assert!(matches!(err, TransformError::NotLocalizable { .. }));
}

#[test]
fn materialize_marks_every_level_and_changes_nothing_else() {
    let grouped = orthogonalize(pagerank_program(), "v").unwrap();
    let mat = materialize(grouped.clone());
    assert!(mat.root.levels().iter().all(|l| l.materialized));
    assert_eq!(mat.root.blocks(), grouped.root.blocks());
    assert_eq!(mat.iterated_reservoir(), grouped.iterated_reservoir());

    // empty reservoir materializes to a zero-length interval
    let empty = PageRankProblem::new(1, vec![]).unwrap();
    let mat = materialize(build_pagerank_spec(&empty));
    assert!(mat.iterated_reservoir().is_empty());
}

#[test]
fn reduction_is_identity_without_complete_families() {
    let program = pagerank_program(); // no dangling vertices
    let before = program.iterated_reservoir().len();
    let reduced = reduce_reservoir(
        program,
        &SubsetSpec { family: "u".into(), member: "v".into(), domain_size: Some(4) },
    )
    .unwrap();
    assert_eq!(reduced.iterated_reservoir().len(), before);
}

#[test]
fn compose_of_the_empty_pipeline_is_identity() {
    let program = kmeans_program();
    let composed = compose(program.clone(), &[], 4).unwrap();
    assert_eq!(composed.partitions.len(), 1);
    assert_eq!(composed.partitions[0].root, program.root);
    assert!(composed.split.is_none());
}

#[test]
fn two_split_steps_are_rejected() {
    let err = compose(
        kmeans_program(),
        &[
            Transformation::SplitByValue { field: "x".into(), partitions: Some(2) },
            Transformation::SplitByValue { field: "m".into(), partitions: Some(2) },
        ],
        2,
    )
    .unwrap_err();
    assert!(matches!(err, TransformError::PipelineStep { .. }));
}

#[test]
fn composed_kmeans_4_matches_the_localized_grouped_form() {
    let variant = variant_by_name("Kmeans_4", &[]).unwrap();
    let composed = compose(kmeans_program(), &variant.pipeline, 2).unwrap();
    assert_eq!(composed.partitions.len(), 2);
    for part in &composed.partitions {
        assert_eq!(
            domains(&part.root),
            vec![DomainKind::GroupValues { field: "x".into() }, DomainKind::GroupRows]
        );
        assert!(part.localized_field("c_x").is_some());
        assert!(part.localized_field("c").is_some());
        assert!(part.space("M").is_none());
    }
    // the partitions cover all points
    let total: usize = composed
        .partitions
        .iter()
        .map(|p| p.iterated_reservoir().distinct_values("x").unwrap().len())
        .sum();
    assert_eq!(total, 3);
}

#[test]
fn composed_pagerank_1_keeps_the_flat_edge_loop() {
    let variant = variant_by_name("PageRank_1", &[]).unwrap();
    let composed = compose(pagerank_program(), &variant.pipeline, 2).unwrap();
    assert_eq!(composed.partitions.len(), 2);
    for part in &composed.partitions {
        assert_eq!(domains(&part.root), vec![DomainKind::AllRows]);
        assert_eq!(part.root.kind, LoopKind::Whilelem);
    }
}

#[test]
fn composed_pagerank_2_is_grouped_localized_materialized() {
    let variant = variant_by_name("PageRank_2", &[]).unwrap();
    let composed = compose(pagerank_program(), &variant.pipeline, 2).unwrap();
    for part in &composed.partitions {
        assert_eq!(
            domains(&part.root),
            vec![DomainKind::GroupValues { field: "v".into() }, DomainKind::GroupRows]
        );
        assert!(part.root.levels().iter().all(|l| l.materialized));
        assert!(part.localized_field("old").is_some());
        assert!(part.space("OLD").is_none());
    }
}

#[test]
fn composed_pagerank_3_localizes_then_splits() {
    let variant = variant_by_name("PageRank_3", &[]).unwrap();
    let composed = compose(pagerank_program(), &variant.pipeline, 3).unwrap();
    assert_eq!(composed.partitions.len(), 3);
    for part in &composed.partitions {
        assert!(part.localized_field("old").is_some());
        assert!(!part.root.levels()[0].materialized);
        if let LoopBody::Nest(inner) = &part.root.body {
            assert_eq!(inner.domain, DomainKind::GroupRows);
        } else {
            panic!("expected a nest");
        }
    }
}

#[test]
fn composed_pagerank_4_keeps_old_as_a_space() {
    let variant = variant_by_name("PageRank_4", &[]).unwrap();
    let composed = compose(pagerank_program(), &variant.pipeline, 2).unwrap();
    for part in &composed.partitions {
        assert!(part.space("OLD").is_some());
        assert!(part.localized.is_empty());
    }
}
