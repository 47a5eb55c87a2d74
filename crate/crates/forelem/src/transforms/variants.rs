//! Named transformation pipelines.

use super::{Layout, SubsetSpec, Transformation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppKind {
    KMeans,
    PageRank,
    Matmul,
    Sort,
}

impl std::fmt::Display for AppKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppKind::KMeans => write!(f, "kmeans"),
            AppKind::PageRank => write!(f, "pagerank"),
            AppKind::Matmul => write!(f, "matmul"),
            AppKind::Sort => write!(f, "sort"),
        }
    }
}

impl std::str::FromStr for AppKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kmeans" => Ok(AppKind::KMeans),
            "pagerank" => Ok(AppKind::PageRank),
            "matmul" => Ok(AppKind::Matmul),
            "sort" => Ok(AppKind::Sort),
            other => Err(format!("unknown app `{other}`")),
        }
    }
}

/// Replica reconciliation choice carried by a variant; the app driver
/// supplies the indirect scheme's assertions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeKind {
    Buffered,
    Master,
    Indirect,
}

impl std::fmt::Display for ExchangeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExchangeKind::Buffered => write!(f, "buffered"),
            ExchangeKind::Master => write!(f, "master"),
            ExchangeKind::Indirect => write!(f, "indirect"),
        }
    }
}

impl std::str::FromStr for ExchangeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "buffered" => Ok(ExchangeKind::Buffered),
            "master" => Ok(ExchangeKind::Master),
            "indirect" => Ok(ExchangeKind::Indirect),
            other => Err(format!("unknown exchange scheme `{other}`")),
        }
    }
}

/// A named, ordered composition of transformations plus an exchange scheme
/// and layout choice.
#[derive(Debug, Clone)]
pub struct Variant {
    pub name: String,
    pub app: AppKind,
    pub pipeline: Vec<Transformation>,
    pub exchange: ExchangeKind,
    pub layout: Layout,
}

impl Variant {
    pub fn pipeline_display(&self) -> String {
        if self.pipeline.is_empty() {
            "(base)".to_string()
        } else {
            self.pipeline.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" | ")
        }
    }
}

fn orth(field: &str) -> Transformation {
    Transformation::Orthogonalize { field: field.into() }
}

fn split(field: &str) -> Transformation {
    Transformation::SplitByValue { field: field.into(), partitions: None }
}

fn loc(space: &str, field: &str) -> Transformation {
    Transformation::Localize { space: space.into(), field: field.into() }
}

/// The built-in variant catalog.
///
/// The k-means pipelines group the point/cluster tuples point-by-point and
/// split over points; the localized pair additionally moves the point
/// coordinates and assignment into the tuples. The pagerank pipelines range
/// from edge-splitting with every partition writing remote ranks
/// (PageRank_1) to the grouped, localized, materialized form with one writer
/// per rank entry (PageRank_2).
pub fn builtin_variants() -> Vec<Variant> {
    let kmeans_grouped = vec![orth("x"), split("x")];
    let kmeans_localized =
        vec![orth("x"), split("x"), loc("M", "c_x"), loc("COORDS", "c")];
    vec![
        Variant {
            name: "Kmeans_1".into(),
            app: AppKind::KMeans,
            pipeline: kmeans_grouped.clone(),
            exchange: ExchangeKind::Buffered,
            layout: Layout::Aos,
        },
        Variant {
            name: "Kmeans_2".into(),
            app: AppKind::KMeans,
            pipeline: kmeans_grouped,
            exchange: ExchangeKind::Indirect,
            layout: Layout::Aos,
        },
        Variant {
            name: "Kmeans_3".into(),
            app: AppKind::KMeans,
            pipeline: kmeans_localized.clone(),
            exchange: ExchangeKind::Indirect,
            layout: Layout::Aos,
        },
        Variant {
            name: "Kmeans_4".into(),
            app: AppKind::KMeans,
            pipeline: kmeans_localized,
            exchange: ExchangeKind::Buffered,
            layout: Layout::Aos,
        },
        Variant {
            name: "PageRank_1".into(),
            app: AppKind::PageRank,
            pipeline: vec![split("u")],
            exchange: ExchangeKind::Buffered,
            layout: Layout::Aos,
        },
        Variant {
            name: "PageRank_2".into(),
            app: AppKind::PageRank,
            pipeline: vec![
                orth("v"),
                split("v"),
                loc("OLD", "old"),
                Transformation::Materialize,
            ],
            exchange: ExchangeKind::Buffered,
            layout: Layout::Aos,
        },
        Variant {
            name: "PageRank_3".into(),
            app: AppKind::PageRank,
            pipeline: vec![orth("v"), loc("OLD", "old"), split("v")],
            exchange: ExchangeKind::Buffered,
            layout: Layout::Aos,
        },
        Variant {
            name: "PageRank_4".into(),
            app: AppKind::PageRank,
            pipeline: vec![orth("v"), split("v")],
            exchange: ExchangeKind::Buffered,
            layout: Layout::Aos,
        },
        Variant {
            name: "PageRank_TRR".into(),
            app: AppKind::PageRank,
            pipeline: vec![
                Transformation::ReduceReservoir(SubsetSpec {
                    family: "u".into(),
                    member: "v".into(),
                    domain_size: None,
                }),
                split("u"),
            ],
            exchange: ExchangeKind::Buffered,
            layout: Layout::Aos,
        },
    ]
}

/// Looks a variant up among the built-ins plus any user-supplied extras
/// (extras shadow built-ins with the same name).
pub fn variant_by_name(name: &str, extras: &[Variant]) -> Option<Variant> {
    extras
        .iter()
        .find(|v| v.name == name)
        .cloned()
        .or_else(|| builtin_variants().into_iter().find(|v| v.name == name))
}
