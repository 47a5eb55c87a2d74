//! Expression evaluation against a row context.
//!
//! Evaluation is pure: the same expression against unchanged state yields
//! bit-identical results. Vector temporaries stay inline up to dimension 8.

use smallvec::SmallVec;

use crate::ir::{ArithOp, CmpOp, Key, Value};

use super::link::{CellMaps, LExpr};
use super::state::{CellData, ExecutionState};
use super::store::TupleStore;
use super::ExecError;

/// Evaluation result. `V` borrows space or cell contents; `VO` is a computed
/// temporary.
pub enum Val<'a> {
    I(u64),
    S(f64),
    V(&'a [f64]),
    VO(SmallVec<[f64; 8]>),
    B(bool),
}

impl<'a> Val<'a> {
    #[inline]
    pub fn as_f64(&self) -> f64 {
        match self {
            Val::I(v) => *v as f64,
            Val::S(v) => *v,
            Val::B(b) => *b as u64 as f64,
            Val::V(_) | Val::VO(_) => panic!("vector used as scalar"),
        }
    }

    #[inline]
    pub fn slice(&self) -> &[f64] {
        match self {
            Val::V(s) => s,
            Val::VO(s) => s,
            _ => panic!("scalar used as vector"),
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Val::I(v) => Value::Index(*v),
            Val::S(v) => Value::Scalar(*v),
            Val::B(b) => Value::Scalar(*b as u64 as f64),
            Val::V(s) => Value::vector(s),
            Val::VO(s) => Value::vector(s),
        }
    }
}

/// Everything needed to evaluate expressions for one tuple visit.
pub struct RowCtx<'a> {
    pub state: &'a ExecutionState,
    pub store: &'a TupleStore,
    pub cell_maps: &'a CellMaps,
    pub row: usize,
    pub binders: &'a [u64],
    pub epsilon: f64,
}

impl<'a> RowCtx<'a> {
    #[inline]
    fn cell_of(&self, cell_field: u32) -> usize {
        self.cell_maps.row_cell[cell_field as usize][self.row] as usize
    }

    pub fn eval(&self, e: &'a LExpr) -> Result<Val<'a>, ExecError> {
        Ok(match e {
            LExpr::RowIndex(slot) => Val::I(self.store.index_at(*slot as usize, self.row)),
            LExpr::RowScalar(slot) => Val::S(self.store.scalar_at(*slot as usize, self.row)),
            LExpr::RowVector(slot) => {
                let v = self.store.vector_at(*slot as usize, self.row);
                Val::VO(SmallVec::from_slice(&v))
            }
            LExpr::Cell(cf) => {
                let store = self.state.cell_at(*cf);
                let cell = self.cell_of(*cf);
                match &store.data {
                    CellData::Index(v) => Val::I(v[cell]),
                    CellData::Scalar(v) => Val::S(v[cell]),
                    CellData::Vector { dim, data } => Val::V(&data[cell * dim..(cell + 1) * dim]),
                }
            }
            LExpr::Binder(d) => Val::I(self.binders[*d as usize]),
            LExpr::ConstIndex(v) => Val::I(*v),
            LExpr::ConstScalar(v) => Val::S(*v),
            LExpr::ConstVector(v) => Val::V(v),
            LExpr::ReadScalar { space, keys } => {
                let key = self.eval_key(keys)?;
                Val::S(self.state.space_at(*space).read(&key)[0])
            }
            LExpr::ReadVector { space, keys } => {
                let key = self.eval_key(keys)?;
                Val::V(self.state.space_at(*space).read(&key))
            }
            LExpr::Arith { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                self.arith(*op, l, r)?
            }
            LExpr::Cmp { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                Val::B(self.compare(*op, &l, &r))
            }
            LExpr::And(terms) => {
                for t in terms.iter() {
                    match self.eval(t)? {
                        Val::B(true) => continue,
                        Val::B(false) => return Ok(Val::B(false)),
                        _ => panic!("non-boolean conjunct"),
                    }
                }
                Val::B(true)
            }
            LExpr::Dist(a, b) => {
                let av = self.eval(a)?;
                let bv = self.eval(b)?;
                let (pa, pb) = (av.slice(), bv.slice());
                debug_assert_eq!(pa.len(), pb.len());
                let mut acc = 0.0;
                for i in 0..pa.len() {
                    let d = pa[i] - pb[i];
                    acc += d * d;
                }
                Val::S(acc.sqrt())
            }
        })
    }

    pub fn eval_key(&self, keys: &'a [LExpr]) -> Result<Key, ExecError> {
        let mut out = Key::new();
        for k in keys {
            out.push(match self.eval(k)? {
                Val::I(v) => v,
                Val::S(v) => {
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(ExecError::BadKey(v));
                    }
                    v as u64
                }
                _ => return Err(ExecError::BadKey(f64::NAN)),
            });
        }
        Ok(out)
    }

    fn arith(&self, op: ArithOp, l: Val<'a>, r: Val<'a>) -> Result<Val<'a>, ExecError> {
        use Val::*;
        let vectorish = |v: &Val| matches!(v, V(_) | VO(_));
        if vectorish(&l) && vectorish(&r) {
            let (a, b) = (l.slice(), r.slice());
            debug_assert_eq!(a.len(), b.len());
            let mut out: SmallVec<[f64; 8]> = SmallVec::with_capacity(a.len());
            match op {
                ArithOp::Add => out.extend(a.iter().zip(b).map(|(x, y)| x + y)),
                ArithOp::Sub => out.extend(a.iter().zip(b).map(|(x, y)| x - y)),
                _ => panic!("vector*vector arithmetic is not defined"),
            }
            return Ok(VO(out));
        }
        if vectorish(&l) || vectorish(&r) {
            let (vec, scalar, scalar_on_right) = if vectorish(&l) {
                (l.slice(), r.as_f64(), true)
            } else {
                (r.slice(), l.as_f64(), false)
            };
            let mut out: SmallVec<[f64; 8]> = SmallVec::with_capacity(vec.len());
            match op {
                ArithOp::Mul => out.extend(vec.iter().map(|x| x * scalar)),
                ArithOp::Div if scalar_on_right => {
                    if scalar == 0.0 {
                        return Err(ExecError::DivByZero);
                    }
                    out.extend(vec.iter().map(|x| x / scalar));
                }
                ArithOp::Add => out.extend(vec.iter().map(|x| x + scalar)),
                ArithOp::Sub if scalar_on_right => out.extend(vec.iter().map(|x| x - scalar)),
                _ => panic!("unsupported scalar/vector arithmetic"),
            }
            return Ok(VO(out));
        }
        let (a, b) = (l.as_f64(), r.as_f64());
        Ok(S(match op {
            ArithOp::Add => a + b,
            ArithOp::Sub => a - b,
            ArithOp::Mul => a * b,
            ArithOp::Div => {
                if b == 0.0 {
                    return Err(ExecError::DivByZero);
                }
                a / b
            }
        }))
    }

    fn compare(&self, op: CmpOp, l: &Val, r: &Val) -> bool {
        // index/index comparisons stay in integers
        if let (Val::I(a), Val::I(b)) = (l, r) {
            return match op {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
                CmpOp::DeltaExceeds => {
                    (*a as f64 - *b as f64).abs() > self.epsilon
                }
            };
        }
        let (a, b) = (l.as_f64(), r.as_f64());
        match op {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::DeltaExceeds => (a - b).abs() > self.epsilon,
        }
    }
}
