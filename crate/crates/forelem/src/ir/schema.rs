//! Tuple schemas and values.

use smallvec::SmallVec;

use super::IrError;

/// Inline capacity for vector values; points of dimension <= 4 never allocate.
pub type VecStorage = SmallVec<[f64; 4]>;

/// The kind of a tuple field or shared-space value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Non-negative integer, used for cross-references and space keys.
    Index,
    Scalar,
    /// Fixed-dimension dense float vector.
    Vector(usize),
}

impl FieldKind {
    pub fn is_index(self) -> bool {
        matches!(self, FieldKind::Index)
    }
}

/// A single value of one of the three field kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Index(u64),
    Scalar(f64),
    Vector(VecStorage),
}

impl Value {
    pub fn kind(&self) -> FieldKind {
        match self {
            Value::Index(_) => FieldKind::Index,
            Value::Scalar(_) => FieldKind::Scalar,
            Value::Vector(v) => FieldKind::Vector(v.len()),
        }
    }

    pub fn vector(components: &[f64]) -> Value {
        Value::Vector(SmallVec::from_slice(components))
    }

    pub fn as_index(&self) -> Option<u64> {
        match self {
            Value::Index(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(s) => Some(*s),
            _ => None,
        }
    }
}

/// An ordered list of named, kinded fields. Field names are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleSchema {
    fields: Vec<(String, FieldKind)>,
}

impl TupleSchema {
    pub fn new(fields: Vec<(String, FieldKind)>) -> Result<TupleSchema, IrError> {
        for (i, (name, kind)) in fields.iter().enumerate() {
            if fields[..i].iter().any(|(n, _)| n == name) {
                return Err(IrError::DuplicateField(name.clone()));
            }
            if let FieldKind::Vector(0) = kind {
                return Err(IrError::ZeroDimVector(name.clone()));
            }
        }
        Ok(TupleSchema { fields })
    }

    /// Schema of all-index fields, the common case for iteration domains.
    pub fn indices(names: &[&str]) -> TupleSchema {
        TupleSchema::new(names.iter().map(|n| (n.to_string(), FieldKind::Index)).collect())
            .expect("index schema")
    }

    pub fn arity(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, FieldKind)> {
        self.fields.iter().map(|(n, k)| (n.as_str(), *k))
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|(n, _)| n == name)
    }

    pub fn kind_of(&self, name: &str) -> Option<FieldKind> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }

    pub fn kind_at(&self, slot: usize) -> FieldKind {
        self.fields[slot].1
    }

    pub fn name_at(&self, slot: usize) -> &str {
        &self.fields[slot].0
    }

    /// Checks arity and per-field kind conformance.
    pub fn check_tuple(&self, index: usize, tuple: &Tuple) -> Result<(), IrError> {
        if tuple.values.len() != self.fields.len() {
            return Err(IrError::SchemaMismatch {
                index,
                reason: format!(
                    "arity {} does not match schema arity {}",
                    tuple.values.len(),
                    self.fields.len()
                ),
            });
        }
        for (v, (name, kind)) in tuple.values.iter().zip(&self.fields) {
            if v.kind() != *kind {
                return Err(IrError::SchemaMismatch {
                    index,
                    reason: format!("field `{name}` expects {kind:?}, got {:?}", v.kind()),
                });
            }
        }
        Ok(())
    }
}

/// One record conforming to a [`TupleSchema`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tuple {
    pub values: Vec<Value>,
}

impl Tuple {
    pub fn new(values: Vec<Value>) -> Tuple {
        Tuple { values }
    }

    /// All-index tuple shorthand.
    pub fn indices(values: &[u64]) -> Tuple {
        Tuple { values: values.iter().map(|&v| Value::Index(v)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_field_names_rejected() {
        let err = TupleSchema::new(vec![
            ("u".into(), FieldKind::Index),
            ("u".into(), FieldKind::Scalar),
        ])
        .unwrap_err();
        assert_eq!(err, IrError::DuplicateField("u".into()));
    }

    #[test]
    fn zero_dim_vector_rejected() {
        let err =
            TupleSchema::new(vec![("p".into(), FieldKind::Vector(0))]).unwrap_err();
        assert_eq!(err, IrError::ZeroDimVector("p".into()));
    }

    #[test]
    fn tuple_conformance() {
        let schema = TupleSchema::indices(&["m", "x"]);
        assert!(schema.check_tuple(0, &Tuple::indices(&[1, 2])).is_ok());
        let bad = Tuple::new(vec![Value::Index(1), Value::Scalar(2.0)]);
        assert!(matches!(
            schema.check_tuple(3, &bad),
            Err(IrError::SchemaMismatch { index: 3, .. })
        ));
    }
}
