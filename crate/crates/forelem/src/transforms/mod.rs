//! Source-to-source transformations over loop programs, and their
//! composition into named variants.
//!
//! Every transformation (except concretization) maps a program to a program,
//! so pipelines compose freely. Reservoir splitting is the one step that
//! fans a program out into per-partition programs; later steps apply to each
//! partition.

mod config;
mod ops;
mod variants;

pub use config::{load_variants_file, parse_pipeline_step};
pub use ops::{
    interchange, localize, materialize, orthogonalize, reduce_reservoir, split_by_range,
    split_by_value, SubsetSpec,
};
pub use variants::{builtin_variants, variant_by_name, AppKind, ExchangeKind, Variant};

pub use crate::executor::Layout;

use std::sync::Arc;

use thiserror::Error;

use crate::executor::{ExecError, LinkedPlan};
use crate::ir::Program;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{0}` is not an index field")]
    NotIndexField(String),
    #[error("reservoir is empty")]
    EmptyReservoir,
    #[error("space `{space}` cannot be localized: {reason}")]
    NotLocalizable { space: String, reason: String },
    #[error("unknown space `{0}`")]
    UnknownSpace(String),
    #[error("loop levels are not a perfectly nested forelem pair: {0}")]
    NotPerfectlyNested(String),
    #[error("reservoir reduction not applicable: {0}")]
    NotReducible(String),
    #[error("program must be materialized before concretization")]
    NotMaterialized,
    #[error("layout unsupported: {0}")]
    LayoutUnsupported(String),
    #[error("pipeline step {step} ({desc}) failed: {source}")]
    PipelineStep { step: usize, desc: String, source: Box<TransformError> },
    #[error("pipeline may contain at most one split step")]
    DoubleSplit,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// One step of a variant pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Transformation {
    Orthogonalize { field: String },
    /// Single-value splitting; `partitions: None` takes the count from the
    /// compose call.
    SplitByValue { field: String, partitions: Option<usize> },
    SplitByRange { field: String, partitions: Option<usize> },
    Localize { space: String, field: String },
    Materialize,
    ReduceReservoir(SubsetSpec),
    /// Swap nest levels by position (outermost is 0). Only the (1, 2) swap
    /// of a two-level grouped forelem nest is meaningful.
    Interchange { a: usize, b: usize },
}

impl std::fmt::Display for Transformation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Transformation::Orthogonalize { field } => write!(f, "orthogonalize {field}"),
            Transformation::SplitByValue { field, partitions: Some(p) } => {
                write!(f, "split_value {field} {p}")
            }
            Transformation::SplitByValue { field, partitions: None } => {
                write!(f, "split_value {field}")
            }
            Transformation::SplitByRange { field, partitions: Some(p) } => {
                write!(f, "split_range {field} {p}")
            }
            Transformation::SplitByRange { field, partitions: None } => {
                write!(f, "split_range {field}")
            }
            Transformation::Localize { space, field } => write!(f, "localize {space} {field}"),
            Transformation::Materialize => write!(f, "materialize"),
            Transformation::ReduceReservoir(s) => write!(f, "reduce {} {}", s.family, s.member),
            Transformation::Interchange { a, b } => write!(f, "interchange {a} {b}"),
        }
    }
}

/// How tuples were distributed by a split step.
#[derive(Debug, Clone)]
pub struct SplitInfo {
    pub field: String,
    /// Field value to owning partition, dense over `[0, bound)`.
    pub owners: Arc<Vec<u32>>,
    pub partitions: usize,
}

/// Result of composing a pipeline: per-partition programs (a single entry
/// when the pipeline has no split step) plus split bookkeeping.
#[derive(Debug)]
pub struct Composed {
    pub partitions: Vec<Program>,
    pub split: Option<SplitInfo>,
}

/// Applies a pipeline in order. Split steps fan out; later steps apply to
/// every partition. `default_partitions` fills split steps whose count was
/// left open.
pub fn compose(
    base: Program,
    pipeline: &[Transformation],
    default_partitions: usize,
) -> Result<Composed, TransformError> {
    let mut programs = vec![base];
    let mut split: Option<SplitInfo> = None;
    for (i, step) in pipeline.iter().enumerate() {
        let wrap = |source: TransformError| TransformError::PipelineStep {
            step: i,
            desc: step.to_string(),
            source: Box::new(source),
        };
        match step {
            Transformation::Orthogonalize { field } => {
                programs = programs
                    .into_iter()
                    .map(|p| orthogonalize(p, field))
                    .collect::<Result<_, _>>()
                    .map_err(wrap)?;
            }
            Transformation::SplitByValue { field, partitions }
            | Transformation::SplitByRange { field, partitions } => {
                if split.is_some() {
                    return Err(wrap(TransformError::DoubleSplit));
                }
                let p = partitions.unwrap_or(default_partitions).max(1);
                let by_value = matches!(step, Transformation::SplitByValue { .. });
                let program = programs.pop().expect("pre-split single program");
                let (parts, info) = if by_value {
                    split_by_value(program, field, p).map_err(wrap)?
                } else {
                    split_by_range(program, field, p).map_err(wrap)?
                };
                programs = parts;
                split = Some(info);
            }
            Transformation::Localize { space, field } => {
                programs = programs
                    .into_iter()
                    .map(|p| localize(p, space, field))
                    .collect::<Result<_, _>>()
                    .map_err(wrap)?;
            }
            Transformation::Materialize => {
                programs = programs.into_iter().map(materialize).collect();
            }
            Transformation::ReduceReservoir(spec) => {
                programs = programs
                    .into_iter()
                    .map(|p| reduce_reservoir(p, spec))
                    .collect::<Result<_, _>>()
                    .map_err(wrap)?;
            }
            Transformation::Interchange { a, b } => {
                programs = programs
                    .into_iter()
                    .map(|p| interchange(p, *a, *b))
                    .collect::<Result<_, _>>()
                    .map_err(wrap)?;
            }
        }
    }
    Ok(Composed { partitions: programs, split })
}

/// Fixes iteration order and physical layout for a materialized program.
pub fn concretize(program: Program, layout: Layout) -> Result<LinkedPlan, TransformError> {
    if !program.root.levels().iter().all(|l| l.materialized) {
        return Err(TransformError::NotMaterialized);
    }
    LinkedPlan::with_layout(program, layout).map_err(|e| match e {
        ExecError::LayoutUnsupported(msg) => TransformError::LayoutUnsupported(msg),
        other => TransformError::Exec(other),
    })
}
