//! The transformation catalog.

use std::collections::HashMap;
use std::sync::Arc;

use crate::ir::{
    Binder, CmpOp, DomainKind, Expr, GuardedBlock, LoopBody, LoopKind, LoopNest,
    Program, Stmt, TupleReservoir, SENTINEL_STUB,
};

use super::{SplitInfo, TransformError};

fn index_field_check(program: &Program, field: &str) -> Result<(), TransformError> {
    match program.iterated_reservoir().schema().kind_of(field) {
        None => Err(TransformError::UnknownField(field.to_string())),
        Some(k) if !k.is_index() => Err(TransformError::NotIndexField(field.to_string())),
        Some(_) => Ok(()),
    }
}

/// Introduces an outer loop over the distinct values of `field`, grouping the
/// inner iteration by that field. The executed-tuple multiset per sweep is
/// unchanged. Applying it again to an already-grouped nest adds another
/// grouping level inside.
pub fn orthogonalize(mut program: Program, field: &str) -> Result<Program, TransformError> {
    index_field_check(&program, field)?;
    let reservoir = program.root.reservoir.clone();
    let binder = format!("@{field}");

    // descend to the innermost row-iterating level and split it
    fn rewrite(level: &mut LoopNest, field: &str, binder: String, reservoir: &str) {
        match &mut level.body {
            LoopBody::Nest(inner) => rewrite(inner, field, binder, reservoir),
            LoopBody::Blocks(_) => {
                let blocks = match std::mem::replace(&mut level.body, LoopBody::Blocks(vec![])) {
                    LoopBody::Blocks(b) => b,
                    LoopBody::Nest(_) => unreachable!(),
                };
                let inner = LoopNest {
                    kind: LoopKind::Forelem,
                    reservoir: reservoir.to_string(),
                    binder: Binder::Tuple,
                    domain: DomainKind::GroupRows,
                    materialized: false,
                    body: LoopBody::Blocks(blocks),
                };
                level.domain = DomainKind::GroupValues { field: field.to_string() };
                level.binder = Binder::Ident(binder);
                level.body = LoopBody::Nest(Box::new(inner));
            }
        }
    }
    rewrite(&mut program.root, field, binder, &reservoir);
    Ok(program)
}

fn split_with(
    program: Program,
    field: &str,
    assignment: HashMap<u64, u32>,
    partitions: usize,
) -> (Vec<Program>, SplitInfo) {
    let slot = program.iterated_reservoir().schema().slot(field).expect("checked");
    let name = program.root.reservoir.clone();
    let mut rows_per: Vec<Vec<usize>> = vec![Vec::new(); partitions];
    {
        let r = program.iterated_reservoir();
        for row in 0..r.len() {
            let v = r.index_at(slot, row);
            rows_per[assignment[&v] as usize].push(row);
        }
    }
    let bound = assignment.keys().copied().max().map_or(0, |m| m + 1);
    let mut owners = vec![0u32; bound as usize];
    for (i, o) in owners.iter_mut().enumerate() {
        *o = assignment.get(&(i as u64)).copied().unwrap_or((i % partitions) as u32);
    }
    let parts: Vec<Program> = rows_per
        .iter()
        .map(|rows| {
            let mut part = program.clone();
            let sub = part.iterated_reservoir().gather(&name, rows);
            *part.reservoir_mut(&name).unwrap() = sub;
            part
        })
        .collect();
    (
        parts,
        SplitInfo { field: field.to_string(), owners: Arc::new(owners), partitions },
    )
}

/// Partitions the reservoir by assigning distinct `field` values round-robin
/// (over the sorted values) to `partitions` sub-reservoirs. The multiset
/// union of the partitions equals the original reservoir.
pub fn split_by_value(
    program: Program,
    field: &str,
    partitions: usize,
) -> Result<(Vec<Program>, SplitInfo), TransformError> {
    index_field_check(&program, field)?;
    let values = program
        .iterated_reservoir()
        .distinct_values(field)
        .map_err(|_| TransformError::UnknownField(field.to_string()))?;
    let assignment: HashMap<u64, u32> =
        values.iter().enumerate().map(|(i, &v)| (v, (i % partitions) as u32)).collect();
    Ok(split_with(program, field, assignment, partitions))
}

/// Partitions the reservoir into contiguous value ranges
/// `[min + i*w, min + (i+1)*w - 1]` with `w = (max - min + 1) / partitions`
/// (at least 1); the last range extends to `max`.
pub fn split_by_range(
    program: Program,
    field: &str,
    partitions: usize,
) -> Result<(Vec<Program>, SplitInfo), TransformError> {
    index_field_check(&program, field)?;
    let values = program
        .iterated_reservoir()
        .distinct_values(field)
        .map_err(|_| TransformError::UnknownField(field.to_string()))?;
    if values.is_empty() {
        return Err(TransformError::EmptyReservoir);
    }
    let (min, max) = (values[0], *values.last().unwrap());
    let width = ((max - min + 1) / partitions as u64).max(1);
    let part_of = |v: u64| -> u32 {
        let i = (v - min) / width;
        (i.min(partitions as u64 - 1)) as u32
    };
    let assignment: HashMap<u64, u32> = values.iter().map(|&v| (v, part_of(v))).collect();
    Ok(split_with(program, field, assignment, partitions))
}

/// Scans every access of one space to decide whether localization applies.
struct LocalizeScan<'a> {
    space: &'a str,
    key_field: Option<String>,
    written: bool,
    problem: Option<String>,
}

impl<'a> LocalizeScan<'a> {
    fn check_keys(&mut self, keys: &[Expr]) {
        if keys.len() != 1 {
            self.problem = Some("access key is not a single tuple field".into());
            return;
        }
        match &keys[0] {
            Expr::Field(f) => match &self.key_field {
                None => self.key_field = Some(f.clone()),
                Some(existing) if existing == f => {}
                Some(existing) => {
                    self.problem = Some(format!(
                        "keyed by `{existing}` in one access and `{f}` in another"
                    ));
                }
            },
            other => self.problem = Some(format!("key `{other}` is not a plain tuple field")),
        }
    }

    fn scan_expr(&mut self, e: &Expr) {
        let mut hits: Vec<Vec<Expr>> = Vec::new();
        e.visit(&mut |sub| {
            if let Expr::Read { space: s, keys } = sub {
                if s == self.space {
                    hits.push(keys.clone());
                }
            }
        });
        for keys in hits {
            self.check_keys(&keys);
        }
    }

    fn scan_stmts(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            match s {
                Stmt::Write { space: ws, keys, value, op } => {
                    if ws == self.space {
                        self.written = true;
                        self.check_keys(keys);
                        if !matches!(op, crate::ir::WriteOp::Set) {
                            self.problem =
                                Some("localized fields only take plain assignments".into());
                        }
                    }
                    for k in keys {
                        self.scan_expr(k);
                    }
                    self.scan_expr(value);
                }
                Stmt::FieldWrite { value, .. } => self.scan_expr(value),
                Stmt::ForelemRange { except, body, .. } => {
                    if let Some(e) = except {
                        self.scan_expr(e);
                    }
                    self.scan_stmts(body);
                }
            }
        }
    }
}

/// The key field used by every access of `space`, when localization applies.
fn localization_key(program: &Program, space: &str) -> Result<(String, bool), TransformError> {
    let mut scan = LocalizeScan { space, key_field: None, written: false, problem: None };
    for block in program.root.blocks() {
        scan.scan_expr(&block.guard);
        scan.scan_stmts(&block.body);
    }
    if let Some(reason) = scan.problem {
        return Err(TransformError::NotLocalizable { space: space.to_string(), reason });
    }
    let key = scan.key_field.ok_or_else(|| TransformError::NotLocalizable {
        space: space.to_string(),
        reason: "space is never accessed in the loop body".into(),
    })?;
    if program.iterated_reservoir().schema().kind_of(&key).is_none_or(|k| !k.is_index()) {
        return Err(TransformError::NotLocalizable {
            space: space.to_string(),
            reason: format!("key `{key}` is not an index field of the iterated reservoir"),
        });
    }
    Ok((key, scan.written))
}

/// Moves `space` into the tuples: every `space[f]` access becomes an access
/// of a tuple-carried field named `new_field`, initialized from the space,
/// and the space declaration disappears from the program.
pub fn localize(
    mut program: Program,
    space: &str,
    new_field: &str,
) -> Result<Program, TransformError> {
    let decl = program
        .space(space)
        .ok_or_else(|| TransformError::UnknownSpace(space.to_string()))?
        .clone();
    let (key_field, written) = localization_key(&program, space)?;

    let rewrite_expr = |e: &Expr| -> Expr {
        e.map(&|sub| match &sub {
            Expr::Read { space: s, .. } if s == space => Expr::field(new_field),
            _ => sub,
        })
    };
    fn rewrite_stmts(stmts: &mut [Stmt], space: &str, new_field: &str, rw: &impl Fn(&Expr) -> Expr) {
        for s in stmts.iter_mut() {
            let replacement = match s {
                Stmt::Write { space: ws, keys, value, .. } => {
                    *value = rw(value);
                    for k in keys.iter_mut() {
                        *k = rw(k);
                    }
                    (ws == space).then(|| Stmt::FieldWrite {
                        field: new_field.to_string(),
                        value: value.clone(),
                    })
                }
                Stmt::FieldWrite { value, .. } => {
                    *value = rw(value);
                    None
                }
                Stmt::ForelemRange { except, body, .. } => {
                    if let Some(e) = except {
                        *e = rw(e);
                    }
                    rewrite_stmts(body, space, new_field, rw);
                    None
                }
            };
            if let Some(r) = replacement {
                *s = r;
            }
        }
    }
    for block in program.root.blocks_mut() {
        block.guard = rewrite_expr(&block.guard);
        rewrite_stmts(&mut block.body, space, new_field, &rewrite_expr);
    }

    program.spaces.retain(|s| s.name != space);
    program.localized.push(crate::ir::LocalizedFieldDecl {
        name: new_field.to_string(),
        kind: decl.value_kind,
        key_field,
        source_space: space.to_string(),
        mutable: written,
    });
    Ok(program)
}

/// Marks every nest level as iterating an integer-indexed view of its domain.
/// A pure syntax change; execution order and the per-sweep tuple multiset are
/// untouched, but concretization becomes available.
pub fn materialize(mut program: Program) -> Program {
    fn mark(level: &mut LoopNest) {
        level.materialized = true;
        if let LoopBody::Nest(inner) = &mut level.body {
            mark(inner);
        }
    }
    mark(&mut program.root);
    program
}

/// An enumerable family scheme: for each value `u` of `family`, the family
/// is `{<u, i> : 0 <= i < domain_size, i != u}` over the `member` field.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSpec {
    pub family: String,
    pub member: String,
    /// Enumeration range; `None` infers `max(member) + 1`.
    pub domain_size: Option<u64>,
}

/// Replaces each complete enumerable family with a single stub tuple whose
/// member field carries a sentinel; the body is rewritten to expand the stub
/// through a bounded index loop at execution time.
pub fn reduce_reservoir(
    mut program: Program,
    spec: &SubsetSpec,
) -> Result<Program, TransformError> {
    let reservoir = program.iterated_reservoir();
    let schema = reservoir.schema().clone();
    let fam_slot = schema
        .slot(&spec.family)
        .ok_or_else(|| TransformError::NotReducible(format!("no field `{}`", spec.family)))?;
    let mem_slot = schema
        .slot(&spec.member)
        .ok_or_else(|| TransformError::NotReducible(format!("no field `{}`", spec.member)))?;
    if fam_slot == mem_slot {
        return Err(TransformError::NotReducible("family and member fields coincide".into()));
    }
    if !schema.kind_at(fam_slot).is_index() || !schema.kind_at(mem_slot).is_index() {
        return Err(TransformError::NotReducible("family fields must be index fields".into()));
    }

    let n = match spec.domain_size {
        Some(n) => n,
        None => {
            let mut max = 0;
            for row in 0..reservoir.len() {
                max = max.max(reservoir.index_at(mem_slot, row));
            }
            max + 1
        }
    };

    // group rows by family value and find complete fan-out families
    let mut by_family: HashMap<u64, Vec<usize>> = HashMap::new();
    for row in 0..reservoir.len() {
        by_family.entry(reservoir.index_at(fam_slot, row)).or_default().push(row);
    }
    let mut keep: Vec<usize> = Vec::new();
    let mut stubs: Vec<usize> = Vec::new(); // representative row per family
    let mut families = 0usize;
    let mut family_values: Vec<u64> = by_family.keys().copied().collect();
    family_values.sort_unstable();
    for u in family_values {
        let rows = &by_family[&u];
        let expected = if u < n { n - 1 } else { n };
        let complete = rows.len() as u64 == expected && {
            let mut seen = vec![false; n as usize];
            let mut ok = true;
            for &r in rows {
                let v = reservoir.index_at(mem_slot, r);
                if v >= n || v == u || seen[v as usize] {
                    ok = false;
                    break;
                }
                seen[v as usize] = true;
            }
            ok
        };
        if complete {
            families += 1;
            // representative keeps the remaining fields (first member in row order)
            stubs.push(*rows.iter().min().unwrap());
        } else {
            keep.extend_from_slice(rows);
        }
    }
    if families == 0 {
        return Ok(program);
    }
    keep.sort_unstable();

    let name = program.root.reservoir.clone();
    let reduced = {
        let r = program.iterated_reservoir();
        let mut tuples: Vec<crate::ir::Tuple> = keep.iter().map(|&row| r.tuple_at(row)).collect();
        for &rep in &stubs {
            let mut t = r.tuple_at(rep);
            t.values[mem_slot] = crate::ir::Value::Index(SENTINEL_STUB);
            tuples.push(t);
        }
        TupleReservoir::from_tuples(&name, schema.clone(), &tuples)
            .map_err(|e| TransformError::NotReducible(e.to_string()))?
    };
    *program.reservoir_mut(&name).unwrap() = reduced;

    // rewrite each block into a stub-expanding twin and a pass-through twin
    let binder = format!("@{}", spec.member);
    let member_expr = Expr::field(&spec.member);
    let sentinel = Expr::index(SENTINEL_STUB);
    let blocks = program.root.blocks().to_vec();
    let mut rewritten = Vec::with_capacity(blocks.len() * 2);
    for block in blocks {
        let mentions_member = |s: &Stmt| -> bool {
            fn expr_mentions(e: &Expr, field: &str) -> bool {
                let mut found = false;
                e.visit(&mut |sub| {
                    if matches!(sub, Expr::Field(f) if f == field) {
                        found = true;
                    }
                });
                found
            }
            match s {
                Stmt::Write { keys, value, .. } => {
                    keys.iter().any(|k| expr_mentions(k, &spec.member))
                        || expr_mentions(value, &spec.member)
                }
                Stmt::FieldWrite { value, .. } => expr_mentions(value, &spec.member),
                Stmt::ForelemRange { .. } => false,
            }
        };
        let substitute = |s: &Stmt| -> Stmt {
            let sub_expr = |e: &Expr| {
                e.map(&|x| match &x {
                    Expr::Field(f) if *f == spec.member => Expr::field(&binder),
                    _ => x,
                })
            };
            match s {
                Stmt::Write { space, keys, op, value } => Stmt::Write {
                    space: space.clone(),
                    keys: keys.iter().map(&sub_expr).collect(),
                    op: op.clone(),
                    value: sub_expr(value),
                },
                Stmt::FieldWrite { field, value } => {
                    Stmt::FieldWrite { field: field.clone(), value: sub_expr(value) }
                }
                other => other.clone(),
            }
        };
        let (expand, keep_outside): (Vec<&Stmt>, Vec<&Stmt>) =
            block.body.iter().partition(|s| mentions_member(s));
        let mut stub_body: Vec<Stmt> = Vec::new();
        stub_body.push(Stmt::ForelemRange {
            binder: binder.clone(),
            len: n,
            except: Some(Expr::field(&spec.family)),
            body: expand.iter().map(|s| substitute(s)).collect(),
        });
        stub_body.extend(keep_outside.iter().map(|s| (*s).clone()));
        rewritten.push(GuardedBlock::new(
            Expr::And(vec![
                block.guard.clone(),
                Expr::cmp(CmpOp::Eq, member_expr.clone(), sentinel.clone()),
            ]),
            stub_body,
        ));
        rewritten.push(GuardedBlock::new(
            Expr::And(vec![
                block.guard.clone(),
                Expr::cmp(CmpOp::Ne, member_expr.clone(), sentinel.clone()),
            ]),
            block.body.clone(),
        ));
    }
    *program.root.blocks_mut() = rewritten;
    Ok(program)
}

/// Swaps two nest levels of a perfectly nested grouped forelem pair. Applied
/// to a two-level grouping it yields the position-major (jagged) form, with
/// the inner ragged bound replaced by the per-group maximum and an implicit
/// `position < |group|` guard; applied again it swaps back.
pub fn interchange(mut program: Program, a: usize, b: usize) -> Result<Program, TransformError> {
    if (a, b) != (1, 2) && (a, b) != (2, 1) {
        return Err(TransformError::NotPerfectlyNested(format!(
            "only the middle/inner swap of a 3-deep nest is defined, got ({a},{b})"
        )));
    }
    let kinds: Vec<LoopKind> = program.root.levels().iter().map(|l| l.kind).collect();
    if kinds.iter().any(|k| *k != LoopKind::Forelem) {
        return Err(TransformError::NotPerfectlyNested(
            "all interchanged levels must be forelem".into(),
        ));
    }
    let domains: Vec<DomainKind> =
        program.root.levels().iter().map(|l| l.domain.clone()).collect();
    match domains.as_slice() {
        [DomainKind::GroupValues { .. }, DomainKind::GroupValues { field: mid }, DomainKind::GroupRows] =>
        {
            let mid = mid.clone();
            let inner = match &mut program.root.body {
                LoopBody::Nest(n) => n,
                LoopBody::Blocks(_) => unreachable!("3-deep nest"),
            };
            let blocks = inner.blocks().to_vec();
            **inner = LoopNest {
                kind: LoopKind::Forelem,
                reservoir: program.root.reservoir.clone(),
                binder: Binder::Ident("@pos".into()),
                domain: DomainKind::PositionRange { field: mid.clone() },
                materialized: inner.materialized,
                body: LoopBody::Nest(Box::new(LoopNest {
                    kind: LoopKind::Forelem,
                    reservoir: program.root.reservoir.clone(),
                    binder: Binder::Tuple,
                    domain: DomainKind::RowsAtPosition,
                    materialized: inner.materialized,
                    body: LoopBody::Blocks(blocks),
                })),
            };
            Ok(program)
        }
        [DomainKind::GroupValues { .. }, DomainKind::PositionRange { field: mid }, DomainKind::RowsAtPosition] =>
        {
            let mid = mid.clone();
            let inner = match &mut program.root.body {
                LoopBody::Nest(n) => n,
                LoopBody::Blocks(_) => unreachable!("3-deep nest"),
            };
            let blocks = inner.blocks().to_vec();
            let binder = format!("@{mid}");
            **inner = LoopNest {
                kind: LoopKind::Forelem,
                reservoir: program.root.reservoir.clone(),
                binder: Binder::Ident(binder),
                domain: DomainKind::GroupValues { field: mid },
                materialized: inner.materialized,
                body: LoopBody::Nest(Box::new(LoopNest {
                    kind: LoopKind::Forelem,
                    reservoir: program.root.reservoir.clone(),
                    binder: Binder::Tuple,
                    domain: DomainKind::GroupRows,
                    materialized: inner.materialized,
                    body: LoopBody::Blocks(blocks),
                })),
            };
            Ok(program)
        }
        other => Err(TransformError::NotPerfectlyNested(format!(
            "nest shape {other:?} cannot be interchanged"
        ))),
    }
}
