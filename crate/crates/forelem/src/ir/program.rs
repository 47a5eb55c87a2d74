//! Loop nests, statements, and whole programs.

use std::fmt;

use super::expr::Expr;
use super::reservoir::TupleReservoir;
use super::schema::FieldKind;
use super::space::SpaceDecl;

/// Stub marker for compacted tuple families: a reserved index value that no
/// real key ever takes.
pub const SENTINEL_STUB: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopKind {
    Forelem,
    Whilelem,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WriteOp {
    Set,
    Add,
    Sub,
}

/// A statement inside a guarded block.
#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    /// `space[keys] op= value`. All right-hand sides and keys in a block are
    /// evaluated against the state at block entry, then applied together.
    Write { space: String, keys: Vec<Expr>, op: WriteOp, value: Expr },
    /// Write to a localized (tuple-carried) mutable field.
    FieldWrite { field: String, value: Expr },
    /// Bounded index loop inside a block, used to expand compacted tuple
    /// families at execution time: `forelem (b in [0,len) \ {except})`.
    ForelemRange { binder: String, len: u64, except: Option<Expr>, body: Vec<Stmt> },
}

/// Guard plus statements, executed as one atomic unit or not at all.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardedBlock {
    pub guard: Expr,
    pub body: Vec<Stmt>,
}

impl GuardedBlock {
    pub fn new(guard: Expr, body: Vec<Stmt>) -> GuardedBlock {
        GuardedBlock { guard, body }
    }

    /// Unguarded block (guard is the constant truth `0 == 0`).
    pub fn always(body: Vec<Stmt>) -> GuardedBlock {
        GuardedBlock { guard: Expr::cmp(super::CmpOp::Eq, Expr::index(0), Expr::index(0)), body }
    }
}

/// What one nest level binds.
#[derive(Debug, Clone, PartialEq)]
pub enum Binder {
    /// Binds the reservoir schema's fields by name (innermost level).
    Tuple,
    /// Named value binder introduced by a transformation (group value,
    /// row index, or diagonal position).
    Ident(String),
}

/// How one nest level iterates, relative to its ancestors' grouping.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    /// Every tuple of the reservoir.
    AllRows,
    /// Distinct values of an index field (within the enclosing groups).
    GroupValues { field: String },
    /// The tuples of the group selected by the enclosing binders.
    GroupRows,
    /// Positions `[0, max group length)` over the subgroups of the enclosing
    /// group; produced by loop interchange.
    PositionRange { field: String },
    /// The subgroups whose length exceeds the enclosing position binder,
    /// yielding each one's row at that position.
    RowsAtPosition,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoopBody {
    Blocks(Vec<GuardedBlock>),
    Nest(Box<LoopNest>),
}

/// One level of a forelem/whilelem nest over a single reservoir.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopNest {
    pub kind: LoopKind,
    pub reservoir: String,
    pub binder: Binder,
    pub domain: DomainKind,
    /// Whether this level has been rewritten to iterate an integer-indexed
    /// view of its domain. Purely a syntax change; recorded for concretize.
    pub materialized: bool,
    pub body: LoopBody,
}

impl LoopNest {
    pub fn flat(kind: LoopKind, reservoir: impl Into<String>, blocks: Vec<GuardedBlock>) -> LoopNest {
        LoopNest {
            kind,
            reservoir: reservoir.into(),
            binder: Binder::Tuple,
            domain: DomainKind::AllRows,
            materialized: false,
            body: LoopBody::Blocks(blocks),
        }
    }

    /// The guarded blocks at the innermost level.
    pub fn blocks(&self) -> &[GuardedBlock] {
        match &self.body {
            LoopBody::Blocks(b) => b,
            LoopBody::Nest(n) => n.blocks(),
        }
    }

    pub fn blocks_mut(&mut self) -> &mut Vec<GuardedBlock> {
        match &mut self.body {
            LoopBody::Blocks(b) => b,
            LoopBody::Nest(n) => n.blocks_mut(),
        }
    }

    /// Levels from the outside in.
    pub fn levels(&self) -> Vec<&LoopNest> {
        let mut out = vec![self];
        let mut cur = self;
        while let LoopBody::Nest(n) = &cur.body {
            out.push(n);
            cur = n;
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.levels().len()
    }

    /// The grouping fields introduced by `GroupValues` levels, outermost first.
    pub fn grouping_fields(&self) -> Vec<&str> {
        self.levels()
            .iter()
            .filter_map(|l| match &l.domain {
                DomainKind::GroupValues { field } => Some(field.as_str()),
                DomainKind::PositionRange { field } => Some(field.as_str()),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for LoopNest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kw = match self.kind {
            LoopKind::Forelem => "forelem",
            LoopKind::Whilelem => "whilelem",
        };
        let binder = match &self.binder {
            Binder::Tuple => "t".to_string(),
            Binder::Ident(n) => n.clone(),
        };
        let domain = match &self.domain {
            DomainKind::AllRows if self.materialized => format!("[0,|P{}|-1]", self.reservoir),
            DomainKind::AllRows => self.reservoir.clone(),
            DomainKind::GroupValues { field } if self.materialized => {
                format!("[0,|{}.{}|-1]", self.reservoir, field)
            }
            DomainKind::GroupValues { field } => format!("{}.{}", self.reservoir, field),
            DomainKind::GroupRows if self.materialized => "[0,|group|-1]".to_string(),
            DomainKind::GroupRows => "group".to_string(),
            DomainKind::PositionRange { field } => {
                format!("[0,max_{}(|group|)-1]", field)
            }
            DomainKind::RowsAtPosition => "groups-at-position".to_string(),
        };
        write!(f, "{kw} ({binder} in {domain})")?;
        if let LoopBody::Nest(n) = &self.body {
            write!(f, " {{ {n} }}")?;
        }
        Ok(())
    }
}

/// A localized field: shared-space data moved into the tuples.
///
/// Cells are keyed by the original space key (one cell per distinct key
/// value), so tuples sharing a key share the cell. Mutable cells are the only
/// tuple-side state the executor updates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedFieldDecl {
    pub name: String,
    pub kind: FieldKind,
    /// Tuple field whose value keyed the original space.
    pub key_field: String,
    /// Space the initial cell contents come from.
    pub source_space: String,
    pub mutable: bool,
}

/// A complete loop program: reservoirs, space declarations, localized fields,
/// and the root nest.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub name: String,
    pub reservoirs: Vec<TupleReservoir>,
    pub spaces: Vec<SpaceDecl>,
    pub localized: Vec<LocalizedFieldDecl>,
    pub root: LoopNest,
    /// Tolerance used by `DeltaExceeds` guards and strict-`<` guard margins.
    pub epsilon: f64,
}

impl Program {
    pub fn new(
        name: impl Into<String>,
        reservoirs: Vec<TupleReservoir>,
        spaces: Vec<SpaceDecl>,
        root: LoopNest,
    ) -> Program {
        Program {
            name: name.into(),
            reservoirs,
            spaces,
            localized: Vec::new(),
            root,
            epsilon: 0.0,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Program {
        self.epsilon = epsilon;
        self
    }

    pub fn reservoir(&self, name: &str) -> Option<&TupleReservoir> {
        self.reservoirs.iter().find(|r| r.name() == name)
    }

    pub fn reservoir_mut(&mut self, name: &str) -> Option<&mut TupleReservoir> {
        self.reservoirs.iter_mut().find(|r| r.name() == name)
    }

    pub fn space(&self, name: &str) -> Option<&SpaceDecl> {
        self.spaces.iter().find(|s| s.name == name)
    }

    pub fn localized_field(&self, name: &str) -> Option<&LocalizedFieldDecl> {
        self.localized.iter().find(|l| l.name == name)
    }

    /// The reservoir the root nest iterates.
    pub fn iterated_reservoir(&self) -> &TupleReservoir {
        self.reservoir(&self.root.reservoir).expect("validated program")
    }
}
