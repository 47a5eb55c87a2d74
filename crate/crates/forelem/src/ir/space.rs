//! Shared spaces: keyed stores behind an affine address function.
//!
//! A space is declared with a key arity and value kind; contents are a total
//! mapping from key-tuples to values where unwritten locations read the
//! default. Distinct keys always address distinct locations. The physical
//! backing (dense array vs hash map) is picked from the declared key bounds
//! and is not observable through reads and writes.

use std::collections::HashMap;

use smallvec::SmallVec;
use thiserror::Error;

use super::schema::{FieldKind, Value, VecStorage};

pub type Key = SmallVec<[u64; 2]>;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("space `{space}` expects {expected} key components, got {got}")]
    ArityMismatch { space: String, expected: usize, got: usize },
    #[error("space `{space}` value kind mismatch: expected {expected:?}, got {got:?}")]
    KindMismatch { space: String, expected: FieldKind, got: FieldKind },
}

/// Declaration of a shared space within a program.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceDecl {
    pub name: String,
    pub key_arity: usize,
    pub value_kind: FieldKind,
    pub default: Value,
    /// Per-component exclusive key bounds. Non-empty bounds select a dense
    /// backing; empty means unbounded (hash backing).
    pub bounds: Vec<u64>,
    /// Never written by the loop body; lets the executor skip change tracking.
    pub read_only: bool,
    /// Maintain a running compensation term so long chains of additive
    /// updates stay within a few ulps of the exact sum.
    pub compensated: bool,
}

impl SpaceDecl {
    pub fn scalar(name: impl Into<String>, key_arity: usize, default: f64) -> SpaceDecl {
        SpaceDecl {
            name: name.into(),
            key_arity,
            value_kind: FieldKind::Scalar,
            default: Value::Scalar(default),
            bounds: Vec::new(),
            read_only: false,
            compensated: false,
        }
    }

    pub fn vector(name: impl Into<String>, key_arity: usize, dim: usize) -> SpaceDecl {
        SpaceDecl {
            name: name.into(),
            key_arity,
            value_kind: FieldKind::Vector(dim),
            default: Value::Vector(SmallVec::from_elem(0.0, dim)),
            bounds: Vec::new(),
            read_only: false,
            compensated: false,
        }
    }

    pub fn bounded(mut self, bounds: &[u64]) -> SpaceDecl {
        assert_eq!(bounds.len(), self.key_arity);
        self.bounds = bounds.to_vec();
        self
    }

    pub fn read_only(mut self) -> SpaceDecl {
        self.read_only = true;
        self
    }

    pub fn compensated(mut self) -> SpaceDecl {
        self.compensated = true;
        self
    }

    pub fn dim(&self) -> usize {
        match self.value_kind {
            FieldKind::Vector(d) => d,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
enum Backing {
    /// Dense storage over the product of the key bounds, flattened row-major.
    /// `data` holds `capacity * dim` floats.
    Dense { strides: SmallVec<[u64; 2]>, data: Vec<f64>, comp: Option<Vec<f64>> },
    /// Unbounded fallback.
    Map { entries: HashMap<Key, VecStorage>, comp: HashMap<Key, VecStorage> },
}

/// Contents of one shared space.
#[derive(Debug, Clone)]
pub struct SpaceStore {
    decl: SpaceDecl,
    dim: usize,
    default: VecStorage,
    backing: Backing,
}

impl SpaceStore {
    pub fn new(decl: &SpaceDecl) -> SpaceStore {
        let dim = decl.dim();
        let default: VecStorage = match &decl.default {
            Value::Scalar(s) => SmallVec::from_slice(&[*s]),
            Value::Vector(v) => v.clone(),
            Value::Index(i) => SmallVec::from_slice(&[*i as f64]),
        };
        let backing = if decl.bounds.is_empty() {
            Backing::Map { entries: HashMap::new(), comp: HashMap::new() }
        } else {
            let mut strides: SmallVec<[u64; 2]> = SmallVec::from_elem(1, decl.key_arity);
            for i in (0..decl.key_arity.saturating_sub(1)).rev() {
                strides[i] = strides[i + 1] * decl.bounds[i + 1];
            }
            let capacity = (decl.bounds.iter().product::<u64>() as usize) * dim;
            let mut data = Vec::with_capacity(capacity);
            for _ in 0..capacity / dim {
                data.extend_from_slice(&default);
            }
            let comp = decl.compensated.then(|| vec![0.0; capacity]);
            Backing::Dense { strides, data, comp }
        };
        SpaceStore { decl: decl.clone(), dim, default, backing }
    }

    pub fn decl(&self) -> &SpaceDecl {
        &self.decl
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_key(&self, key: &[u64]) -> Result<(), SpaceError> {
        if key.len() != self.decl.key_arity {
            return Err(SpaceError::ArityMismatch {
                space: self.decl.name.clone(),
                expected: self.decl.key_arity,
                got: key.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn dense_offset(strides: &[u64], dim: usize, key: &[u64]) -> usize {
        let mut off = 0u64;
        for (k, s) in key.iter().zip(strides) {
            off += k * s;
        }
        off as usize * dim
    }

    /// Borrowed read; unwritten keys yield the default.
    #[inline]
    pub fn read(&self, key: &[u64]) -> &[f64] {
        debug_assert_eq!(key.len(), self.decl.key_arity);
        match &self.backing {
            Backing::Dense { strides, data, .. } => {
                let off = Self::dense_offset(strides, self.dim, key);
                &data[off..off + self.dim]
            }
            Backing::Map { entries, .. } => entries
                .get(key)
                .map(|v| v.as_slice())
                .unwrap_or(&self.default),
        }
    }

    pub fn read_value(&self, key: &[u64]) -> Result<Value, SpaceError> {
        self.check_key(key)?;
        let slice = self.read(key);
        Ok(match self.decl.value_kind {
            FieldKind::Vector(_) => Value::Vector(SmallVec::from_slice(slice)),
            _ => Value::Scalar(slice[0]),
        })
    }

    /// Overwrites a location. Returns true when the stored bits changed.
    pub fn write(&mut self, key: &[u64], value: &[f64]) -> bool {
        debug_assert_eq!(value.len(), self.dim);
        match &mut self.backing {
            Backing::Dense { strides, data, comp } => {
                let off = Self::dense_offset(strides, self.dim, key);
                let slot = &mut data[off..off + self.dim];
                let changed = slot != value;
                slot.copy_from_slice(value);
                if let Some(comp) = comp {
                    comp[off..off + self.dim].fill(0.0);
                }
                changed
            }
            Backing::Map { entries, comp } => {
                comp.remove(key);
                let entry = entries
                    .entry(SmallVec::from_slice(key))
                    .or_insert_with(|| self.default.clone());
                let changed = entry.as_slice() != value;
                entry.copy_from_slice(value);
                changed
            }
        }
    }

    pub fn write_value(&mut self, key: &[u64], value: &Value) -> Result<bool, SpaceError> {
        self.check_key(key)?;
        let slice: VecStorage = match value {
            Value::Scalar(s) => SmallVec::from_slice(&[*s]),
            Value::Vector(v) => v.clone(),
            Value::Index(i) => SmallVec::from_slice(&[*i as f64]),
        };
        if slice.len() != self.dim
            || matches!(
                (self.decl.value_kind, value.kind()),
                (FieldKind::Scalar, FieldKind::Vector(_)) | (FieldKind::Vector(_), FieldKind::Scalar)
                    | (FieldKind::Vector(_), FieldKind::Index)
            )
        {
            return Err(SpaceError::KindMismatch {
                space: self.decl.name.clone(),
                expected: self.decl.value_kind,
                got: value.kind(),
            });
        }
        Ok(self.write(key, &slice))
    }

    /// Adds `delta` (negated for subtraction by the caller) into a location.
    /// Compensated spaces use Neumaier summation per component. Returns true
    /// when any stored component changed.
    pub fn add(&mut self, key: &[u64], delta: &[f64]) -> bool {
        debug_assert_eq!(delta.len(), self.dim);
        match &mut self.backing {
            Backing::Dense { strides, data, comp } => {
                let off = Self::dense_offset(strides, self.dim, key);
                match comp {
                    Some(comp) => {
                        let mut changed = false;
                        for i in 0..self.dim {
                            changed |= neumaier_add(
                                &mut data[off + i],
                                &mut comp[off + i],
                                delta[i],
                            );
                        }
                        changed
                    }
                    None => plain_add(&mut data[off..off + self.dim], delta),
                }
            }
            Backing::Map { entries, comp } => {
                let entry = entries
                    .entry(SmallVec::from_slice(key))
                    .or_insert_with(|| self.default.clone());
                if self.decl.compensated {
                    let c = comp
                        .entry(SmallVec::from_slice(key))
                        .or_insert_with(|| SmallVec::from_elem(0.0, self.dim));
                    let mut changed = false;
                    for i in 0..self.dim {
                        changed |= neumaier_add(&mut entry[i], &mut c[i], delta[i]);
                    }
                    changed
                } else {
                    plain_add(entry, delta)
                }
            }
        }
    }

    /// Visits every location that was ever written (dense: every location).
    pub fn for_each(&self, mut f: impl FnMut(&[u64], &[f64])) {
        match &self.backing {
            Backing::Dense { data, .. } => {
                let mut key: SmallVec<[u64; 2]> = SmallVec::from_elem(0, self.decl.key_arity);
                for loc in 0..data.len() / self.dim {
                    let mut rem = loc as u64;
                    for (i, b) in self.decl.bounds.iter().enumerate().rev() {
                        key[i] = rem % b;
                        rem /= b;
                    }
                    f(&key, &data[loc * self.dim..(loc + 1) * self.dim]);
                }
            }
            Backing::Map { entries, .. } => {
                for (k, v) in entries {
                    f(k, v);
                }
            }
        }
    }

    /// Dense scalar contents as a plain vector (verification helper).
    pub fn scalar_contents(&self) -> Vec<f64> {
        match &self.backing {
            Backing::Dense { data, .. } if self.dim == 1 => data.clone(),
            _ => panic!("scalar_contents requires a dense scalar space"),
        }
    }

    pub fn vector_contents(&self) -> (usize, Vec<f64>) {
        match &self.backing {
            Backing::Dense { data, .. } => (self.dim, data.clone()),
            _ => panic!("vector_contents requires a dense space"),
        }
    }
}

#[inline]
fn plain_add(slot: &mut [f64], delta: &[f64]) -> bool {
    let mut changed = false;
    for (s, d) in slot.iter_mut().zip(delta) {
        let next = *s + *d;
        changed |= next.to_bits() != s.to_bits();
        *s = next;
    }
    changed
}

/// Compensated add with double-double renormalization: `value` always holds
/// the correctly rounded running sum, `comp` the residual. Reads see `value`.
#[inline]
fn neumaier_add(value: &mut f64, comp: &mut f64, delta: f64) -> bool {
    let s = *value + delta;
    let e = if value.abs() >= delta.abs() { (*value - s) + delta } else { (delta - s) + *value };
    let lo = *comp + e;
    let hi = s + lo;
    let changed = hi.to_bits() != value.to_bits();
    *comp = lo - (hi - s);
    *value = hi;
    changed
}
