//! Mutable execution state: shared-space contents plus localized field cells.

use std::collections::HashMap;

use crate::ir::{FieldKind, LocalizedFieldDecl, Program, SpaceStore, Value};

/// Storage for one localized field. One cell per distinct key value of the
/// originating space; tuples sharing the key share the cell.
#[derive(Debug, Clone)]
pub struct CellStore {
    pub name: String,
    /// Sorted distinct key values; cell id is the position.
    pub keys: Vec<u64>,
    pub data: CellData,
    pub mutable: bool,
}

#[derive(Debug, Clone)]
pub enum CellData {
    Index(Vec<u64>),
    Scalar(Vec<f64>),
    Vector { dim: usize, data: Vec<f64> },
}

impl CellStore {
    #[inline]
    pub fn index(&self, cell: usize) -> u64 {
        match &self.data {
            CellData::Index(v) => v[cell],
            _ => panic!("cell field is not index-kinded"),
        }
    }

    #[inline]
    pub fn scalar(&self, cell: usize) -> f64 {
        match &self.data {
            CellData::Scalar(v) => v[cell],
            _ => panic!("cell field is not scalar-kinded"),
        }
    }

    #[inline]
    pub fn vector(&self, cell: usize) -> &[f64] {
        match &self.data {
            CellData::Vector { dim, data } => &data[cell * dim..(cell + 1) * dim],
            _ => panic!("cell field is not vector-kinded"),
        }
    }

    pub fn value(&self, cell: usize) -> Value {
        match &self.data {
            CellData::Index(v) => Value::Index(v[cell]),
            CellData::Scalar(v) => Value::Scalar(v[cell]),
            CellData::Vector { .. } => Value::vector(self.vector(cell)),
        }
    }
}

/// All mutable state of one run (or one partition's replica).
#[derive(Debug, Clone)]
pub struct ExecutionState {
    spaces: Vec<SpaceStore>,
    space_ids: HashMap<String, u32>,
    cells: Vec<CellStore>,
    pub epsilon: f64,
    pub rng_seed: u64,
}

impl ExecutionState {
    /// Fresh state: spaces at their defaults, cells zeroed.
    pub fn new(program: &Program) -> ExecutionState {
        Self::build(program, None)
    }

    /// Replica state: space contents copied from `base`, localized cells
    /// initialized from the source spaces that localization removed.
    pub fn derive(program: &Program, base: &ExecutionState) -> ExecutionState {
        Self::build(program, Some(base))
    }

    fn build(program: &Program, base: Option<&ExecutionState>) -> ExecutionState {
        let mut spaces = Vec::with_capacity(program.spaces.len());
        let mut space_ids = HashMap::new();
        for (i, decl) in program.spaces.iter().enumerate() {
            let store = match base.and_then(|b| b.space_opt(&decl.name)) {
                Some(src) => src.clone(),
                None => SpaceStore::new(decl),
            };
            spaces.push(store);
            space_ids.insert(decl.name.clone(), i as u32);
        }
        let reservoir = program.iterated_reservoir();
        let cells = program
            .localized
            .iter()
            .map(|decl| build_cells(decl, reservoir, base))
            .collect();
        ExecutionState {
            spaces,
            space_ids,
            cells,
            epsilon: program.epsilon,
            rng_seed: 0,
        }
    }

    pub fn space_id(&self, name: &str) -> Option<u32> {
        self.space_ids.get(name).copied()
    }

    pub fn space(&self, name: &str) -> &SpaceStore {
        self.space_opt(name).unwrap_or_else(|| panic!("unknown space `{name}`"))
    }

    pub fn space_opt(&self, name: &str) -> Option<&SpaceStore> {
        self.space_ids.get(name).map(|&i| &self.spaces[i as usize])
    }

    pub fn space_mut(&mut self, name: &str) -> &mut SpaceStore {
        let id = *self.space_ids.get(name).unwrap_or_else(|| panic!("unknown space `{name}`"));
        &mut self.spaces[id as usize]
    }

    #[inline]
    pub(crate) fn space_at(&self, id: u32) -> &SpaceStore {
        &self.spaces[id as usize]
    }

    #[inline]
    pub(crate) fn space_at_mut(&mut self, id: u32) -> &mut SpaceStore {
        &mut self.spaces[id as usize]
    }

    pub fn spaces(&self) -> impl Iterator<Item = &SpaceStore> {
        self.spaces.iter()
    }

    pub fn n_spaces(&self) -> usize {
        self.spaces.len()
    }

    pub fn cell_store(&self, name: &str) -> Option<&CellStore> {
        self.cells.iter().find(|c| c.name == name)
    }

    #[inline]
    pub(crate) fn cell_at(&self, id: u32) -> &CellStore {
        &self.cells[id as usize]
    }

    #[inline]
    pub(crate) fn cell_at_mut(&mut self, id: u32) -> &mut CellStore {
        &mut self.cells[id as usize]
    }

    pub fn cell_stores(&self) -> impl Iterator<Item = &CellStore> {
        self.cells.iter()
    }
}

fn build_cells(
    decl: &LocalizedFieldDecl,
    reservoir: &crate::ir::TupleReservoir,
    base: Option<&ExecutionState>,
) -> CellStore {
    let keys = reservoir.distinct_values(&decl.key_field).expect("validated key field");
    let source = base.and_then(|b| b.space_opt(&decl.source_space));
    let data = match decl.kind {
        FieldKind::Index => CellData::Index(
            keys.iter()
                .map(|&k| source.map_or(0, |s| s.read(&[k])[0] as u64))
                .collect(),
        ),
        FieldKind::Scalar => CellData::Scalar(
            keys.iter().map(|&k| source.map_or(0.0, |s| s.read(&[k])[0])).collect(),
        ),
        FieldKind::Vector(dim) => {
            let mut data = Vec::with_capacity(keys.len() * dim);
            for &k in &keys {
                match source {
                    Some(s) => data.extend_from_slice(s.read(&[k])),
                    None => data.extend(std::iter::repeat_n(0.0, dim)),
                }
            }
            CellData::Vector { dim, data }
        }
    };
    CellStore { name: decl.name.clone(), keys, data, mutable: decl.mutable }
}
