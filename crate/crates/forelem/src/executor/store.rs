//! Physical tuple storage and group indexes.
//!
//! The conceptual reservoir has no layout; execution needs one. The default
//! reads straight through the reservoir's columns. Concretization may rebuild
//! the rows as an interleaved record buffer (AoS), per-field arrays (SoA), or
//! a jagged-diagonal permutation for interchanged nests.

use smallvec::SmallVec;

use crate::ir::{ColumnData, FieldKind, TupleReservoir, TupleSchema};

/// Physical layout fixed at concretization time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Aos,
    Soa,
    JaggedDiagonal,
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Layout::Aos => write!(f, "aos"),
            Layout::Soa => write!(f, "soa"),
            Layout::JaggedDiagonal => write!(f, "jagged"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum SlotShape {
    Index,
    Scalar,
    Vector(usize),
}

/// Row-addressable tuple data in one of the physical layouts.
///
/// Values are stored as raw u64 words (float fields bit-cast) so every layout
/// is a flat buffer plus indexing arithmetic.
#[derive(Debug, Clone)]
pub struct TupleStore {
    len: usize,
    layout: Layout,
    shapes: Vec<SlotShape>,
    /// Word offset of each slot within a row.
    offsets: Vec<usize>,
    stride: usize,
    /// AoS / jagged: one interleaved buffer. SoA: one buffer per slot.
    interleaved: Vec<u64>,
    columns: Vec<Vec<u64>>,
}

impl TupleStore {
    pub fn build(reservoir: &TupleReservoir, layout: Layout, order: Option<&[u32]>) -> TupleStore {
        let schema = reservoir.schema();
        let shapes: Vec<SlotShape> = schema
            .fields()
            .map(|(_, k)| match k {
                FieldKind::Index => SlotShape::Index,
                FieldKind::Scalar => SlotShape::Scalar,
                FieldKind::Vector(d) => SlotShape::Vector(d),
            })
            .collect();
        let widths: Vec<usize> = shapes
            .iter()
            .map(|s| match s {
                SlotShape::Vector(d) => *d,
                _ => 1,
            })
            .collect();
        let mut offsets = Vec::with_capacity(widths.len());
        let mut stride = 0;
        for w in &widths {
            offsets.push(stride);
            stride += w;
        }
        let len = reservoir.len();
        let row_at = |i: usize| order.map_or(i, |o| o[i] as usize);

        let mut store = TupleStore {
            len,
            layout,
            shapes,
            offsets,
            stride,
            interleaved: Vec::new(),
            columns: Vec::new(),
        };
        match layout {
            Layout::Aos | Layout::JaggedDiagonal => {
                let mut buf = vec![0u64; len * stride];
                for i in 0..len {
                    let row = row_at(i);
                    let base = i * stride;
                    for (slot, shape) in store.shapes.iter().enumerate() {
                        let off = base + store.offsets[slot];
                        match (shape, reservoir.column(slot)) {
                            (SlotShape::Index, ColumnData::Index(c)) => buf[off] = c[row],
                            (SlotShape::Scalar, ColumnData::Scalar(c)) => {
                                buf[off] = c[row].to_bits()
                            }
                            (SlotShape::Vector(d), ColumnData::Vector { data, .. }) => {
                                for j in 0..*d {
                                    buf[off + j] = data[row * d + j].to_bits();
                                }
                            }
                            _ => unreachable!("schema/column agreement"),
                        }
                    }
                }
                store.interleaved = buf;
            }
            Layout::Soa => {
                let mut columns = Vec::with_capacity(store.shapes.len());
                for (slot, shape) in store.shapes.iter().enumerate() {
                    let mut col = Vec::with_capacity(len * widths[slot]);
                    for i in 0..len {
                        let row = row_at(i);
                        match (shape, reservoir.column(slot)) {
                            (SlotShape::Index, ColumnData::Index(c)) => col.push(c[row]),
                            (SlotShape::Scalar, ColumnData::Scalar(c)) => {
                                col.push(c[row].to_bits())
                            }
                            (SlotShape::Vector(d), ColumnData::Vector { data, .. }) => {
                                col.extend(data[row * d..(row + 1) * d].iter().map(|v| v.to_bits()))
                            }
                            _ => unreachable!("schema/column agreement"),
                        }
                    }
                    columns.push(col);
                }
                store.columns = columns;
            }
        }
        store
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    #[inline]
    pub fn index_at(&self, slot: usize, row: usize) -> u64 {
        match self.layout {
            Layout::Aos | Layout::JaggedDiagonal => {
                self.interleaved[row * self.stride + self.offsets[slot]]
            }
            Layout::Soa => self.columns[slot][row],
        }
    }

    #[inline]
    pub fn scalar_at(&self, slot: usize, row: usize) -> f64 {
        f64::from_bits(self.index_at(slot, row))
    }

    #[inline]
    pub fn vector_at(&self, slot: usize, row: usize) -> SmallVec<[f64; 4]> {
        let d = match self.shapes[slot] {
            SlotShape::Vector(d) => d,
            _ => panic!("not a vector slot"),
        };
        let words = match self.layout {
            Layout::Aos | Layout::JaggedDiagonal => {
                let off = row * self.stride + self.offsets[slot];
                &self.interleaved[off..off + d]
            }
            Layout::Soa => &self.columns[slot][row * d..(row + 1) * d],
        };
        words.iter().map(|w| f64::from_bits(*w)).collect()
    }
}

/// CSR grouping of rows by one index field, values sorted ascending.
#[derive(Debug, Clone)]
pub struct GroupIndex {
    pub values: Vec<u64>,
    pub offsets: Vec<u32>,
    pub rows: Vec<u32>,
}

impl GroupIndex {
    pub fn build(schema: &TupleSchema, reservoir: &TupleReservoir, field: &str) -> GroupIndex {
        let slot = schema.slot(field).expect("validated grouping field");
        Self::build_over(reservoir, slot, None)
    }

    /// Groups `subset` (or all rows) by the given slot.
    fn build_over(reservoir: &TupleReservoir, slot: usize, subset: Option<&[u32]>) -> GroupIndex {
        let n = subset.map_or(reservoir.len(), <[u32]>::len);
        let mut tagged: Vec<(u64, u32)> = (0..n)
            .map(|i| {
                let row = subset.map_or(i as u32, |s| s[i]);
                (reservoir.index_at(slot, row as usize), row)
            })
            .collect();
        tagged.sort_unstable();
        let mut values = Vec::new();
        let mut offsets = vec![0u32];
        let mut rows = Vec::with_capacity(n);
        for (v, row) in tagged {
            if values.last() != Some(&v) {
                if !values.is_empty() {
                    offsets.push(rows.len() as u32);
                }
                values.push(v);
            }
            rows.push(row);
        }
        offsets.push(rows.len() as u32);
        GroupIndex { values, offsets, rows }
    }

    pub fn n_groups(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn group_rows(&self, g: usize) -> &[u32] {
        &self.rows[self.offsets[g] as usize..self.offsets[g + 1] as usize]
    }
}

/// Two-level CSR: rows grouped by an outer field, then by a mid field.
#[derive(Debug, Clone)]
pub struct GroupIndex2 {
    pub outer_values: Vec<u64>,
    /// Offsets into the subgroup arrays, one span per outer group.
    pub outer_offsets: Vec<u32>,
    pub sub_values: Vec<u64>,
    pub sub_offsets: Vec<u32>,
    pub rows: Vec<u32>,
    /// Per outer group: max subgroup length (position-range bound).
    pub max_sub_len: Vec<u32>,
}

impl GroupIndex2 {
    pub fn build(
        schema: &TupleSchema,
        reservoir: &TupleReservoir,
        outer_field: &str,
        mid_field: &str,
    ) -> GroupIndex2 {
        let outer_slot = schema.slot(outer_field).expect("validated grouping field");
        let mid_slot = schema.slot(mid_field).expect("validated grouping field");
        let outer = GroupIndex::build_over(reservoir, outer_slot, None);
        let mut out = GroupIndex2 {
            outer_values: outer.values.clone(),
            outer_offsets: vec![0],
            sub_values: Vec::new(),
            sub_offsets: vec![0],
            rows: Vec::new(),
            max_sub_len: Vec::new(),
        };
        for g in 0..outer.n_groups() {
            let sub = GroupIndex::build_over(reservoir, mid_slot, Some(outer.group_rows(g)));
            let mut max_len = 0u32;
            for s in 0..sub.n_groups() {
                let rows = sub.group_rows(s);
                max_len = max_len.max(rows.len() as u32);
                out.sub_values.push(sub.values[s]);
                out.rows.extend_from_slice(rows);
                out.sub_offsets.push(out.rows.len() as u32);
            }
            out.max_sub_len.push(max_len);
            out.outer_offsets.push(out.sub_values.len() as u32);
        }
        out
    }

    pub fn n_outer(&self) -> usize {
        self.outer_values.len()
    }

    /// Subgroup span (indexes into `sub_values`/`sub_offsets`) of outer group g.
    #[inline]
    pub fn subgroups(&self, g: usize) -> std::ops::Range<usize> {
        self.outer_offsets[g] as usize..self.outer_offsets[g + 1] as usize
    }

    #[inline]
    pub fn sub_rows(&self, s: usize) -> &[u32] {
        &self.rows[self.sub_offsets[s] as usize..self.sub_offsets[s + 1] as usize]
    }

    /// Row order that lays the jagged diagonals contiguously:
    /// for each outer group, position-major over its subgroups.
    pub fn jagged_order(&self) -> Vec<u32> {
        let mut order = Vec::with_capacity(self.rows.len());
        for g in 0..self.n_outer() {
            for kk in 0..self.max_sub_len[g] as usize {
                for s in self.subgroups(g) {
                    let rows = self.sub_rows(s);
                    if kk < rows.len() {
                        order.push(rows[kk]);
                    }
                }
            }
        }
        order
    }
}
