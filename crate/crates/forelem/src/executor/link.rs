//! Linking: resolve names to slots and build the iteration plan.

use std::collections::HashMap;


use crate::ir::{
    ArithOp, Binder, CmpOp, DomainKind, Expr, FieldKind, LoopKind, LoopNest, Program,
    Stmt, Tuple, TupleSchema, Value, WriteOp,
};

use super::store::{GroupIndex, GroupIndex2, Layout, TupleStore};
use super::ExecError;

/// How the (validated) nest iterates, flattened from the domain chain.
#[derive(Debug, Clone, PartialEq)]
pub enum NestShape {
    Flat,
    Grouped { field: String },
    Grouped2 { outer: String, mid: String },
    /// Interchanged: outer groups, then diagonal positions, then the
    /// subgroups long enough to have a row at that position.
    Grouped2Jagged { outer: String, mid: String },
}

/// Linked expression: names resolved, constants unpacked.
#[derive(Debug, Clone)]
pub enum LExpr {
    RowIndex(u32),
    RowScalar(u32),
    RowVector(u32),
    /// Localized field by cell id (kind carried by the cell store).
    Cell(u32),
    Binder(u8),
    ConstIndex(u64),
    ConstScalar(f64),
    ConstVector(Box<[f64]>),
    ReadScalar { space: u32, keys: Box<[LExpr]> },
    ReadVector { space: u32, keys: Box<[LExpr]> },
    Arith { op: ArithOp, lhs: Box<LExpr>, rhs: Box<LExpr> },
    Cmp { op: CmpOp, lhs: Box<LExpr>, rhs: Box<LExpr> },
    And(Box<[LExpr]>),
    Dist(Box<LExpr>, Box<LExpr>),
}

#[derive(Debug, Clone)]
pub enum LStmt {
    Write { space: u32, keys: Box<[LExpr]>, op: WriteOp, value: LExpr },
    CellWrite { cell: u32, value: LExpr },
    Range { binder_depth: u8, len: u64, except: Option<LExpr>, body: Vec<LStmt> },
}

#[derive(Debug, Clone)]
pub struct LBlock {
    pub guard: LExpr,
    pub body: Vec<LStmt>,
}

/// Row-to-cell maps for the localized fields, aligned with the state's cell
/// stores.
#[derive(Debug, Clone, Default)]
pub struct CellMaps {
    pub row_cell: Vec<Vec<u32>>,
}

/// A program linked for execution: physical store, group indexes, resolved
/// blocks. Immutable during runs; all mutation goes through `ExecutionState`.
#[derive(Debug)]
pub struct LinkedPlan {
    pub program: Program,
    pub shape: NestShape,
    pub kind: LoopKind,
    pub layout: Layout,
    pub store: TupleStore,
    pub group1: Option<GroupIndex>,
    pub group2: Option<GroupIndex2>,
    pub blocks: Vec<LBlock>,
    pub cell_maps: CellMaps,
    pub epsilon: f64,
}

struct Linker<'a> {
    program: &'a Program,
    schema: &'a TupleSchema,
    space_ids: HashMap<&'a str, u32>,
    binder_depths: HashMap<String, u8>,
}

impl<'a> Linker<'a> {
    fn resolve_field(&self, name: &str) -> Result<LExpr, ExecError> {
        if let Some(&d) = self.binder_depths.get(name) {
            return Ok(LExpr::Binder(d));
        }
        if let Some(slot) = self.schema.slot(name) {
            return Ok(match self.schema.kind_at(slot) {
                FieldKind::Index => LExpr::RowIndex(slot as u32),
                FieldKind::Scalar => LExpr::RowScalar(slot as u32),
                FieldKind::Vector(_) => LExpr::RowVector(slot as u32),
            });
        }
        if let Some(pos) = self.program.localized.iter().position(|l| l.name == name) {
            return Ok(LExpr::Cell(pos as u32));
        }
        Err(ExecError::UnknownName(name.to_string()))
    }

    fn link_expr(&self, e: &Expr) -> Result<LExpr, ExecError> {
        Ok(match e {
            Expr::Field(name) => self.resolve_field(name)?,
            Expr::Const(Value::Index(v)) => LExpr::ConstIndex(*v),
            Expr::Const(Value::Scalar(v)) => LExpr::ConstScalar(*v),
            Expr::Const(Value::Vector(v)) => LExpr::ConstVector(v.to_vec().into_boxed_slice()),
            Expr::Read { space, keys } => {
                let id = *self
                    .space_ids
                    .get(space.as_str())
                    .ok_or_else(|| ExecError::UnknownName(space.clone()))?;
                let keys = keys
                    .iter()
                    .map(|k| self.link_expr(k))
                    .collect::<Result<Vec<_>, _>>()?
                    .into_boxed_slice();
                match self.program.spaces[id as usize].value_kind {
                    FieldKind::Vector(_) => LExpr::ReadVector { space: id, keys },
                    _ => LExpr::ReadScalar { space: id, keys },
                }
            }
            Expr::Arith { op, lhs, rhs } => LExpr::Arith {
                op: *op,
                lhs: Box::new(self.link_expr(lhs)?),
                rhs: Box::new(self.link_expr(rhs)?),
            },
            Expr::Cmp { op, lhs, rhs } => LExpr::Cmp {
                op: *op,
                lhs: Box::new(self.link_expr(lhs)?),
                rhs: Box::new(self.link_expr(rhs)?),
            },
            Expr::And(terms) => LExpr::And(
                terms
                    .iter()
                    .map(|t| self.link_expr(t))
                    .collect::<Result<Vec<_>, _>>()?
                    .into_boxed_slice(),
            ),
            Expr::Dist(a, b) => {
                LExpr::Dist(Box::new(self.link_expr(a)?), Box::new(self.link_expr(b)?))
            }
        })
    }

    fn link_stmt(&mut self, s: &Stmt) -> Result<LStmt, ExecError> {
        Ok(match s {
            Stmt::Write { space, keys, op, value } => {
                let id = *self
                    .space_ids
                    .get(space.as_str())
                    .ok_or_else(|| ExecError::UnknownName(space.clone()))?;
                LStmt::Write {
                    space: id,
                    keys: keys
                        .iter()
                        .map(|k| self.link_expr(k))
                        .collect::<Result<Vec<_>, _>>()?
                        .into_boxed_slice(),
                    op: op.clone(),
                    value: self.link_expr(value)?,
                }
            }
            Stmt::FieldWrite { field, value } => {
                let pos = self
                    .program
                    .localized
                    .iter()
                    .position(|l| l.name == *field)
                    .ok_or_else(|| ExecError::UnknownName(field.clone()))?;
                LStmt::CellWrite { cell: pos as u32, value: self.link_expr(value)? }
            }
            Stmt::ForelemRange { binder, len, except, body } => {
                let depth = self.binder_depths.len() as u8;
                let except = except.as_ref().map(|e| self.link_expr(e)).transpose()?;
                self.binder_depths.insert(binder.clone(), depth);
                let body =
                    body.iter().map(|s| self.link_stmt(s)).collect::<Result<Vec<_>, _>>()?;
                self.binder_depths.remove(binder);
                LStmt::Range { binder_depth: depth, len: *len, except, body }
            }
        })
    }
}

fn nest_shape(root: &LoopNest) -> Result<NestShape, ExecError> {
    let levels = root.levels();
    let domains: Vec<&DomainKind> = levels.iter().map(|l| &l.domain).collect();
    Ok(match domains.as_slice() {
        [DomainKind::AllRows] => NestShape::Flat,
        [DomainKind::GroupValues { field }, DomainKind::GroupRows] => {
            NestShape::Grouped { field: field.clone() }
        }
        [DomainKind::GroupValues { field: f1 }, DomainKind::GroupValues { field: f2 }, DomainKind::GroupRows] => {
            NestShape::Grouped2 { outer: f1.clone(), mid: f2.clone() }
        }
        [DomainKind::GroupValues { field: f1 }, DomainKind::PositionRange { field: f2 }, DomainKind::RowsAtPosition] => {
            NestShape::Grouped2Jagged { outer: f1.clone(), mid: f2.clone() }
        }
        _ => {
            return Err(ExecError::UnsupportedNest(format!(
                "domain chain {domains:?} has no execution shape"
            )))
        }
    })
}

impl LinkedPlan {
    pub fn new(program: Program) -> Result<LinkedPlan, ExecError> {
        Self::with_layout(program, Layout::Soa)
    }

    pub fn with_layout(mut program: Program, layout: Layout) -> Result<LinkedPlan, ExecError> {
        let diags = crate::ir::validate_program(&program);
        if !diags.is_empty() {
            return Err(ExecError::Invalid(diags));
        }
        let shape = nest_shape(&program.root)?;

        if layout == Layout::JaggedDiagonal {
            let NestShape::Grouped2Jagged { outer, mid } = &shape else {
                return Err(ExecError::LayoutUnsupported(
                    "jagged-diagonal layout requires an interchanged nest".into(),
                ));
            };
            // permute the reservoir so the diagonals are contiguous
            let name = program.root.reservoir.clone();
            let reservoir = program.reservoir(&name).unwrap();
            let g2 = GroupIndex2::build(reservoir.schema(), reservoir, outer, mid);
            let order = g2.jagged_order();
            let rows: Vec<usize> = order.iter().map(|&r| r as usize).collect();
            let permuted = reservoir.gather(&name.clone(), &rows);
            *program.reservoir_mut(&name).unwrap() = permuted;
        }

        let reservoir = program.iterated_reservoir();
        let schema = reservoir.schema().clone();
        let store = TupleStore::build(reservoir, layout, None);
        let (group1, group2) = match &shape {
            NestShape::Flat => (None, None),
            NestShape::Grouped { field } => {
                (Some(GroupIndex::build(&schema, reservoir, field)), None)
            }
            NestShape::Grouped2 { outer, mid } | NestShape::Grouped2Jagged { outer, mid } => {
                (None, Some(GroupIndex2::build(&schema, reservoir, outer, mid)))
            }
        };

        let cell_maps = CellMaps {
            row_cell: program
                .localized
                .iter()
                .map(|decl| {
                    let keys = reservoir.distinct_values(&decl.key_field).expect("validated");
                    let slot = schema.slot(&decl.key_field).expect("validated");
                    (0..reservoir.len())
                        .map(|row| {
                            let k = reservoir.index_at(slot, row);
                            keys.binary_search(&k).expect("key present") as u32
                        })
                        .collect()
                })
                .collect(),
        };

        let mut binder_depths = HashMap::new();
        for level in program.root.levels() {
            if let Binder::Ident(name) = &level.binder {
                let d = binder_depths.len() as u8;
                binder_depths.insert(name.clone(), d);
            }
        }
        let space_ids: HashMap<&str, u32> = program
            .spaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.as_str(), i as u32))
            .collect();
        let mut linker = Linker { program: &program, schema: &schema, space_ids, binder_depths };
        let blocks = program
            .root
            .blocks()
            .iter()
            .map(|b| {
                Ok(LBlock {
                    guard: linker.link_expr(&b.guard)?,
                    body: b
                        .body
                        .iter()
                        .map(|s| linker.link_stmt(s))
                        .collect::<Result<Vec<_>, _>>()?,
                })
            })
            .collect::<Result<Vec<_>, ExecError>>()?;

        let kind = program.root.kind;
        let epsilon = program.epsilon;
        Ok(LinkedPlan {
            program,
            shape,
            kind,
            layout,
            store,
            group1,
            group2,
            blocks,
            cell_maps,
            epsilon,
        })
    }

    /// Number of top-level scheduling units (rows or groups).
    pub fn top_len(&self) -> usize {
        match &self.shape {
            NestShape::Flat => self.store.len(),
            NestShape::Grouped { .. } => self.group1.as_ref().unwrap().n_groups(),
            NestShape::Grouped2 { .. } | NestShape::Grouped2Jagged { .. } => {
                self.group2.as_ref().unwrap().n_outer()
            }
        }
    }

    /// Links a bare expression against an explicit tuple by inlining its
    /// field values as constants (slow path, used by tests and the
    /// quiescence checker).
    pub fn link_expr_for_tuple(
        program: &Program,
        schema: &TupleSchema,
        expr: &Expr,
        tuple: &Tuple,
    ) -> Result<LExpr, ExecError> {
        let inlined = expr.map(&|e| match &e {
            Expr::Field(name) => match schema.slot(name) {
                Some(slot) => Expr::Const(tuple.values[slot].clone()),
                None => e,
            },
            _ => e,
        });
        let space_ids: HashMap<&str, u32> = program
            .spaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.as_str(), i as u32))
            .collect();
        let linker =
            Linker { program, schema, space_ids, binder_depths: HashMap::new() };
        linker.link_expr(&inlined)
    }
}
