//! Static checks over programs: name resolution, kinds, dimensions, and loop
//! structure. Diagnostics are values, not errors; an empty list means the
//! program is well-formed.

use std::fmt;

use super::expr::{ArithOp, CmpOp, Expr};
use super::program::{Binder, DomainKind, LoopBody, LoopKind, LoopNest, Program, Stmt};
use super::schema::FieldKind;

#[derive(Debug, Clone, PartialEq)]
pub enum DiagnosticKind {
    UnknownReservoir(String),
    UnknownSpace(String),
    UnknownField(String),
    ArityMismatch { space: String, expected: usize, got: usize },
    KindMismatch { expected: String, got: String },
    DimMismatch { left: usize, right: usize },
    MissingGuard,
    GuardNotBoolean,
    InvalidNest(String),
    NotIndexField(String),
}

/// One finding, anchored to a path through the program tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub path: String,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}", self.path, self.kind)
    }
}

/// Inferred expression kind; `Bool` only appears in guard position.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Index,
    Scalar,
    Vector(usize),
    Bool,
    /// Already diagnosed; suppress cascading errors.
    Unknown,
}

impl Kind {
    fn numeric(self) -> bool {
        matches!(self, Kind::Index | Kind::Scalar | Kind::Unknown)
    }
}

struct Checker<'a> {
    program: &'a Program,
    binders: Vec<String>,
    diags: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn emit(&mut self, path: &str, kind: DiagnosticKind) {
        self.diags.push(Diagnostic { path: path.to_string(), kind });
    }

    fn field_kind(&self, name: &str) -> Option<Kind> {
        if self.binders.iter().any(|b| b == name) {
            return Some(Kind::Index);
        }
        let reservoir = self.program.reservoir(&self.program.root.reservoir)?;
        if let Some(k) = reservoir.schema().kind_of(name) {
            return Some(match k {
                FieldKind::Index => Kind::Index,
                FieldKind::Scalar => Kind::Scalar,
                FieldKind::Vector(d) => Kind::Vector(d),
            });
        }
        self.program.localized_field(name).map(|l| match l.kind {
            FieldKind::Index => Kind::Index,
            FieldKind::Scalar => Kind::Scalar,
            FieldKind::Vector(d) => Kind::Vector(d),
        })
    }

    fn check_expr(&mut self, e: &Expr, path: &str) -> Kind {
        match e {
            Expr::Field(name) => match self.field_kind(name) {
                Some(k) => k,
                None => {
                    self.emit(path, DiagnosticKind::UnknownField(name.clone()));
                    Kind::Unknown
                }
            },
            Expr::Const(v) => match v.kind() {
                FieldKind::Index => Kind::Index,
                FieldKind::Scalar => Kind::Scalar,
                FieldKind::Vector(d) => Kind::Vector(d),
            },
            Expr::Read { space, keys } => {
                let Some(decl) = self.program.space(space) else {
                    self.emit(path, DiagnosticKind::UnknownSpace(space.clone()));
                    return Kind::Unknown;
                };
                if keys.len() != decl.key_arity {
                    self.emit(
                        path,
                        DiagnosticKind::ArityMismatch {
                            space: space.clone(),
                            expected: decl.key_arity,
                            got: keys.len(),
                        },
                    );
                }
                for (i, k) in keys.iter().enumerate() {
                    let kk = self.check_expr(k, &format!("{path}.key[{i}]"));
                    if !kk.numeric() {
                        self.emit(
                            &format!("{path}.key[{i}]"),
                            DiagnosticKind::KindMismatch {
                                expected: "index".into(),
                                got: format!("{kk:?}"),
                            },
                        );
                    }
                }
                match decl.value_kind {
                    FieldKind::Vector(d) => Kind::Vector(d),
                    _ => Kind::Scalar,
                }
            }
            Expr::Arith { op, lhs, rhs } => {
                let lk = self.check_expr(lhs, &format!("{path}.lhs"));
                let rk = self.check_expr(rhs, &format!("{path}.rhs"));
                match (lk, rk) {
                    (Kind::Unknown, _) | (_, Kind::Unknown) => Kind::Unknown,
                    (Kind::Vector(a), Kind::Vector(b)) => {
                        if a != b {
                            self.emit(path, DiagnosticKind::DimMismatch { left: a, right: b });
                            Kind::Unknown
                        } else if matches!(op, ArithOp::Add | ArithOp::Sub) {
                            Kind::Vector(a)
                        } else {
                            self.emit(
                                path,
                                DiagnosticKind::KindMismatch {
                                    expected: "scalar operand".into(),
                                    got: "vector*vector".into(),
                                },
                            );
                            Kind::Unknown
                        }
                    }
                    (Kind::Vector(a), k) | (k, Kind::Vector(a)) if k.numeric() => Kind::Vector(a),
                    (a, b) if a.numeric() && b.numeric() => Kind::Scalar,
                    _ => {
                        self.emit(
                            path,
                            DiagnosticKind::KindMismatch {
                                expected: "numeric operands".into(),
                                got: format!("{lk:?} {rk:?}"),
                            },
                        );
                        Kind::Unknown
                    }
                }
            }
            Expr::Cmp { op: _, lhs, rhs } => {
                let lk = self.check_expr(lhs, &format!("{path}.lhs"));
                let rk = self.check_expr(rhs, &format!("{path}.rhs"));
                if !(lk.numeric() || matches!(lk, Kind::Vector(_)))
                    || !(rk.numeric() || matches!(rk, Kind::Vector(_)))
                {
                    self.emit(
                        path,
                        DiagnosticKind::KindMismatch {
                            expected: "comparable operands".into(),
                            got: format!("{lk:?} {rk:?}"),
                        },
                    );
                }
                if let (Kind::Vector(a), Kind::Vector(b)) = (lk, rk) {
                    if a != b {
                        self.emit(path, DiagnosticKind::DimMismatch { left: a, right: b });
                    }
                } else if matches!(lk, Kind::Vector(_)) != matches!(rk, Kind::Vector(_)) {
                    self.emit(
                        path,
                        DiagnosticKind::KindMismatch {
                            expected: "matching comparison kinds".into(),
                            got: format!("{lk:?} vs {rk:?}"),
                        },
                    );
                }
                Kind::Bool
            }
            Expr::And(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    let k = self.check_expr(t, &format!("{path}.and[{i}]"));
                    if k != Kind::Bool && k != Kind::Unknown {
                        self.emit(&format!("{path}.and[{i}]"), DiagnosticKind::GuardNotBoolean);
                    }
                }
                Kind::Bool
            }
            Expr::Dist(a, b) => {
                let ak = self.check_expr(a, &format!("{path}.0"));
                let bk = self.check_expr(b, &format!("{path}.1"));
                match (ak, bk) {
                    (Kind::Vector(x), Kind::Vector(y)) if x == y => Kind::Scalar,
                    (Kind::Vector(x), Kind::Vector(y)) => {
                        self.emit(path, DiagnosticKind::DimMismatch { left: x, right: y });
                        Kind::Unknown
                    }
                    (Kind::Unknown, _) | (_, Kind::Unknown) => Kind::Unknown,
                    _ => {
                        self.emit(
                            path,
                            DiagnosticKind::KindMismatch {
                                expected: "vector operands".into(),
                                got: format!("{ak:?} {bk:?}"),
                            },
                        );
                        Kind::Unknown
                    }
                }
            }
        }
    }

    fn check_stmt(&mut self, s: &Stmt, path: &str) {
        match s {
            Stmt::Write { space, keys, op, value } => {
                let value_kind = self.check_expr(value, &format!("{path}.value"));
                let Some(decl) = self.program.space(space) else {
                    self.emit(path, DiagnosticKind::UnknownSpace(space.clone()));
                    return;
                };
                if keys.len() != decl.key_arity {
                    self.emit(
                        path,
                        DiagnosticKind::ArityMismatch {
                            space: space.clone(),
                            expected: decl.key_arity,
                            got: keys.len(),
                        },
                    );
                }
                for (i, k) in keys.iter().enumerate() {
                    self.check_expr(k, &format!("{path}.key[{i}]"));
                }
                let ok = match (decl.value_kind, value_kind) {
                    (_, Kind::Unknown) => true,
                    (FieldKind::Vector(d), Kind::Vector(v)) => d == v,
                    (FieldKind::Vector(_), _) => false,
                    (_, Kind::Vector(_)) => false,
                    _ => true,
                };
                if !ok {
                    self.emit(
                        path,
                        DiagnosticKind::KindMismatch {
                            expected: format!("{:?}", decl.value_kind),
                            got: format!("{value_kind:?}"),
                        },
                    );
                }
                let _ = op;
            }
            Stmt::FieldWrite { field, value } => {
                self.check_expr(value, &format!("{path}.value"));
                match self.program.localized_field(field) {
                    Some(l) if l.mutable => {}
                    Some(_) => self.emit(
                        path,
                        DiagnosticKind::KindMismatch {
                            expected: "mutable localized field".into(),
                            got: format!("immutable `{field}`"),
                        },
                    ),
                    None => self.emit(path, DiagnosticKind::UnknownField(field.clone())),
                }
            }
            Stmt::ForelemRange { binder, except, body, .. } => {
                if let Some(e) = except {
                    self.check_expr(e, &format!("{path}.except"));
                }
                self.binders.push(binder.clone());
                for (i, s) in body.iter().enumerate() {
                    self.check_stmt(s, &format!("{path}.body[{i}]"));
                }
                self.binders.pop();
            }
        }
    }

    fn check_nest(&mut self, nest: &LoopNest, depth: usize, path: &str) {
        if self.program.reservoir(&nest.reservoir).is_none() {
            self.emit(path, DiagnosticKind::UnknownReservoir(nest.reservoir.clone()));
            return;
        }
        if depth > 0 && nest.kind == LoopKind::Whilelem {
            self.emit(path, DiagnosticKind::InvalidNest("whilelem below the root".into()));
        }
        let binder_ok = matches!(
            (&nest.domain, &nest.binder),
            (DomainKind::GroupValues { .. } | DomainKind::PositionRange { .. }, Binder::Ident(_))
                | (
                    DomainKind::AllRows | DomainKind::GroupRows | DomainKind::RowsAtPosition,
                    Binder::Tuple,
                )
        );
        if !binder_ok {
            self.emit(path, DiagnosticKind::InvalidNest("binder does not fit domain".into()));
        }
        if let DomainKind::GroupValues { field } | DomainKind::PositionRange { field } =
            &nest.domain
        {
            let reservoir = self.program.reservoir(&nest.reservoir).unwrap();
            match reservoir.schema().kind_of(field) {
                None => self.emit(path, DiagnosticKind::UnknownField(field.clone())),
                Some(k) if !k.is_index() => {
                    self.emit(path, DiagnosticKind::NotIndexField(field.clone()))
                }
                _ => {}
            }
        }
        if let Binder::Ident(name) = &nest.binder {
            self.binders.push(name.clone());
        }
        match &nest.body {
            LoopBody::Nest(inner) => {
                let legal = matches!(
                    (&nest.domain, &inner.domain),
                    (DomainKind::GroupValues { .. }, DomainKind::GroupValues { .. })
                        | (DomainKind::GroupValues { .. }, DomainKind::GroupRows)
                        | (DomainKind::GroupValues { .. }, DomainKind::PositionRange { .. })
                        | (DomainKind::PositionRange { .. }, DomainKind::RowsAtPosition)
                );
                if !legal {
                    self.emit(
                        path,
                        DiagnosticKind::InvalidNest(format!(
                            "{:?} cannot enclose {:?}",
                            nest.domain, inner.domain
                        )),
                    );
                }
                if inner.reservoir != nest.reservoir {
                    self.emit(
                        path,
                        DiagnosticKind::InvalidNest("nest levels iterate different reservoirs".into()),
                    );
                }
                self.check_nest(inner, depth + 1, &format!("{path}.body"));
            }
            LoopBody::Blocks(blocks) => {
                if !matches!(
                    nest.domain,
                    DomainKind::AllRows | DomainKind::GroupRows | DomainKind::RowsAtPosition
                ) {
                    self.emit(
                        path,
                        DiagnosticKind::InvalidNest("grouping level must enclose a nest".into()),
                    );
                }
                for (bi, block) in blocks.iter().enumerate() {
                    let guard_path = format!("{path}.block[{bi}].guard");
                    let k = self.check_expr(&block.guard, &guard_path);
                    if k != Kind::Bool && k != Kind::Unknown {
                        self.emit(&guard_path, DiagnosticKind::GuardNotBoolean);
                    }
                    for (si, s) in block.body.iter().enumerate() {
                        self.check_stmt(s, &format!("{path}.block[{bi}].stmt[{si}]"));
                    }
                }
            }
        }
        if let Binder::Ident(_) = &nest.binder {
            self.binders.pop();
        }
    }
}

fn is_trivial_guard(guard: &Expr) -> bool {
    matches!(guard, Expr::Cmp { op: CmpOp::Eq, lhs, rhs } if lhs == rhs)
}

/// Checks the whole program; an empty result means it is well-formed.
pub fn validate_program(program: &Program) -> Vec<Diagnostic> {
    let mut checker = Checker { program, binders: Vec::new(), diags: Vec::new() };
    checker.check_nest(&program.root, 0, "root");
    if program.root.kind == LoopKind::Whilelem
        && program.root.blocks().iter().all(|b| is_trivial_guard(&b.guard))
    {
        checker.emit("root", DiagnosticKind::MissingGuard);
    }
    checker.diags
}
