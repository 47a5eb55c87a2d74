//! Tuple reservoirs: unordered multisets of fixed-schema tuples.
//!
//! Storage is columnar internally; no iteration order is part of the reservoir
//! contract. Enumeration order observed through `iter` or row ids is an
//! executor/scheduler choice, never program semantics.

use smallvec::SmallVec;

use super::schema::{FieldKind, Tuple, TupleSchema, Value};
use super::IrError;

/// Column storage for one field across all tuples.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Index(Vec<u64>),
    Scalar(Vec<f64>),
    /// Flattened row-major `len * dim` components.
    Vector { dim: usize, data: Vec<f64> },
}

impl ColumnData {
    fn push(&mut self, value: &Value) {
        match (self, value) {
            (ColumnData::Index(col), Value::Index(v)) => col.push(*v),
            (ColumnData::Scalar(col), Value::Scalar(v)) => col.push(*v),
            (ColumnData::Vector { data, .. }, Value::Vector(v)) => data.extend_from_slice(v),
            _ => unreachable!("push after schema check"),
        }
    }
}

/// An unordered multiset of tuples sharing one schema. Duplicates are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleReservoir {
    name: String,
    schema: TupleSchema,
    len: usize,
    columns: Vec<ColumnData>,
}

impl TupleReservoir {
    pub fn empty(name: impl Into<String>, schema: TupleSchema) -> TupleReservoir {
        let columns = schema
            .fields()
            .map(|(_, kind)| match kind {
                FieldKind::Index => ColumnData::Index(Vec::new()),
                FieldKind::Scalar => ColumnData::Scalar(Vec::new()),
                FieldKind::Vector(dim) => ColumnData::Vector { dim, data: Vec::new() },
            })
            .collect();
        TupleReservoir { name: name.into(), schema, len: 0, columns }
    }

    /// Builds a reservoir containing exactly the given multiset.
    ///
    /// Fails with `SchemaMismatch` naming the first offending tuple.
    pub fn from_tuples(
        name: impl Into<String>,
        schema: TupleSchema,
        tuples: &[Tuple],
    ) -> Result<TupleReservoir, IrError> {
        let mut r = TupleReservoir::empty(name, schema);
        for (i, t) in tuples.iter().enumerate() {
            r.schema.check_tuple(i, t)?;
            r.push_unchecked(t);
        }
        Ok(r)
    }

    /// Bulk constructor from pre-built all-index columns (equal lengths).
    pub fn from_index_columns(
        name: impl Into<String>,
        schema: TupleSchema,
        columns: Vec<Vec<u64>>,
    ) -> TupleReservoir {
        assert_eq!(columns.len(), schema.arity());
        assert!(schema.fields().all(|(_, k)| k.is_index()));
        let len = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == len));
        TupleReservoir {
            name: name.into(),
            schema,
            len,
            columns: columns.into_iter().map(ColumnData::Index).collect(),
        }
    }

    fn push_unchecked(&mut self, tuple: &Tuple) {
        for (col, v) in self.columns.iter_mut().zip(&tuple.values) {
            col.push(v);
        }
        self.len += 1;
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn schema(&self) -> &TupleSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn column(&self, slot: usize) -> &ColumnData {
        &self.columns[slot]
    }

    #[inline]
    pub fn index_at(&self, slot: usize, row: usize) -> u64 {
        match &self.columns[slot] {
            ColumnData::Index(col) => col[row],
            _ => panic!("field is not an index column"),
        }
    }

    #[inline]
    pub fn scalar_at(&self, slot: usize, row: usize) -> f64 {
        match &self.columns[slot] {
            ColumnData::Scalar(col) => col[row],
            _ => panic!("field is not a scalar column"),
        }
    }

    #[inline]
    pub fn vector_at(&self, slot: usize, row: usize) -> &[f64] {
        match &self.columns[slot] {
            ColumnData::Vector { dim, data } => &data[row * dim..(row + 1) * dim],
            _ => panic!("field is not a vector column"),
        }
    }

    pub fn value_at(&self, slot: usize, row: usize) -> Value {
        match &self.columns[slot] {
            ColumnData::Index(col) => Value::Index(col[row]),
            ColumnData::Scalar(col) => Value::Scalar(col[row]),
            ColumnData::Vector { dim, data } => {
                Value::Vector(SmallVec::from_slice(&data[row * dim..(row + 1) * dim]))
            }
        }
    }

    pub fn tuple_at(&self, row: usize) -> Tuple {
        Tuple::new((0..self.schema.arity()).map(|s| self.value_at(s, row)).collect())
    }

    /// Enumerates the multiset. Each tuple appears exactly once per
    /// enumeration; the order carries no meaning.
    pub fn iter(&self) -> impl Iterator<Item = Tuple> + '_ {
        (0..self.len).map(|row| self.tuple_at(row))
    }

    fn index_column(&self, field: &str) -> Result<(usize, &[u64]), IrError> {
        let slot = self.schema.slot(field).ok_or_else(|| IrError::UnknownField(field.into()))?;
        match &self.columns[slot] {
            ColumnData::Index(col) => Ok((slot, col)),
            _ => Err(IrError::NotIndexField(field.into())),
        }
    }

    /// The sub-multiset of tuples whose index field equals `value`.
    pub fn select_by_field(&self, field: &str, value: u64) -> Result<TupleReservoir, IrError> {
        let (_, col) = self.index_column(field)?;
        let rows: Vec<usize> =
            col.iter().enumerate().filter(|(_, &v)| v == value).map(|(r, _)| r).collect();
        Ok(self.gather(&format!("{}.{}[{}]", self.name, field, value), &rows))
    }

    /// New reservoir containing the given rows (duplicates allowed).
    pub fn gather(&self, name: &str, rows: &[usize]) -> TupleReservoir {
        let columns = self
            .columns
            .iter()
            .map(|col| match col {
                ColumnData::Index(c) => ColumnData::Index(rows.iter().map(|&r| c[r]).collect()),
                ColumnData::Scalar(c) => ColumnData::Scalar(rows.iter().map(|&r| c[r]).collect()),
                ColumnData::Vector { dim, data } => {
                    let mut out = Vec::with_capacity(rows.len() * dim);
                    for &r in rows {
                        out.extend_from_slice(&data[r * dim..(r + 1) * dim]);
                    }
                    ColumnData::Vector { dim: *dim, data: out }
                }
            })
            .collect();
        TupleReservoir { name: name.into(), schema: self.schema.clone(), len: rows.len(), columns }
    }

    /// Sorted distinct values of an index field.
    pub fn distinct_values(&self, field: &str) -> Result<Vec<u64>, IrError> {
        let (_, col) = self.index_column(field)?;
        let mut vals: Vec<u64> = col.to_vec();
        vals.sort_unstable();
        vals.dedup();
        Ok(vals)
    }
}

/// `build_reservoir` spelled as a free function.
pub fn build_reservoir(
    name: &str,
    schema: TupleSchema,
    tuples: &[Tuple],
) -> Result<TupleReservoir, IrError> {
    TupleReservoir::from_tuples(name, schema, tuples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cross_product_reservoir() {
        let schema = TupleSchema::indices(&["m", "x"]);
        let tuples: Vec<Tuple> = (0..2u64)
            .flat_map(|m| (0..2u64).map(move |x| Tuple::indices(&[m, x])))
            .collect();
        let r = TupleReservoir::from_tuples("T", schema, &tuples).unwrap();
        assert_eq!(r.len(), 4);
    }

    #[test]
    fn empty_reservoir() {
        let r = TupleReservoir::from_tuples("E", TupleSchema::indices(&["u", "v"]), &[]).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn duplicates_are_kept() {
        let schema = TupleSchema::indices(&["i", "j", "k"]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut tuples: Vec<Tuple> = (0..6)
            .map(|_| {
                Tuple::indices(&[rng.gen_range(0..4), rng.gen_range(0..4), rng.gen_range(0..4)])
            })
            .collect();
        tuples.push(tuples[2].clone());
        let r = TupleReservoir::from_tuples("X", schema, &tuples).unwrap();
        assert_eq!(r.len(), 7);
    }

    #[test]
    fn schema_mismatch_carries_tuple_index() {
        let schema = TupleSchema::indices(&["u", "v"]);
        let tuples =
            vec![Tuple::indices(&[0, 1]), Tuple::new(vec![Value::Index(0), Value::Scalar(1.0)])];
        let err = TupleReservoir::from_tuples("E", schema, &tuples).unwrap_err();
        assert!(matches!(err, IrError::SchemaMismatch { index: 1, .. }));
    }

    #[test]
    fn select_by_field_filters() {
        let schema = TupleSchema::indices(&["u", "v"]);
        let tuples =
            vec![Tuple::indices(&[0, 1]), Tuple::indices(&[1, 0]), Tuple::indices(&[2, 0])];
        let r = TupleReservoir::from_tuples("E", schema, &tuples).unwrap();
        let sel = r.select_by_field("v", 0).unwrap();
        assert_eq!(sel.len(), 2);
        let mut us: Vec<u64> = (0..sel.len()).map(|row| sel.index_at(0, row)).collect();
        us.sort_unstable();
        assert_eq!(us, vec![1, 2]);

        assert!(r.select_by_field("v", 9).unwrap().is_empty());
        assert!(matches!(r.select_by_field("w", 0), Err(IrError::UnknownField(_))));
    }

    #[test]
    fn selection_partitions_the_reservoir() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let tuples: Vec<Tuple> = (0..1000)
            .map(|_| Tuple::indices(&[rng.gen_range(0..64), rng.gen_range(0..64)]))
            .collect();
        let r =
            TupleReservoir::from_tuples("E", TupleSchema::indices(&["u", "v"]), &tuples).unwrap();
        let total: usize =
            (0..64).map(|w| r.select_by_field("v", w).unwrap().len()).sum();
        assert_eq!(total, r.len());
    }
}
