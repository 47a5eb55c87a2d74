//! Variant definitions loaded from a TOML config file, so new compositions
//! can be run without recompiling.
//!
//! ```toml
//! [[variant]]
//! name = "PR_reduced_ranges"
//! app = "pagerank"
//! pipeline = ["reduce u v", "orthogonalize v", "split_range v"]
//! exchange = "buffered"
//! layout = "soa"
//! ```

use serde::Deserialize;

use super::{AppKind, ExchangeKind, Layout, SubsetSpec, TransformError, Transformation, Variant};

#[derive(Debug, Deserialize)]
struct VariantsFile {
    #[serde(default)]
    variant: Vec<VariantEntry>,
}

#[derive(Debug, Deserialize)]
struct VariantEntry {
    name: String,
    app: String,
    #[serde(default)]
    pipeline: Vec<String>,
    #[serde(default = "default_exchange")]
    exchange: String,
    #[serde(default = "default_layout")]
    layout: String,
}

fn default_exchange() -> String {
    "buffered".into()
}

fn default_layout() -> String {
    "aos".into()
}

/// Parses one pipeline step of the form used by the config file.
pub fn parse_pipeline_step(s: &str) -> Result<Transformation, TransformError> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    let usage = |msg: &str| TransformError::Config(format!("step `{s}`: {msg}"));
    let parse_p = |t: Option<&&str>| -> Result<Option<usize>, TransformError> {
        t.map(|p| p.parse::<usize>().map_err(|_| usage("partition count must be an integer")))
            .transpose()
    };
    match toks.as_slice() {
        ["orthogonalize", field] => Ok(Transformation::Orthogonalize { field: field.to_string() }),
        ["split_value", field, rest @ ..] => Ok(Transformation::SplitByValue {
            field: field.to_string(),
            partitions: parse_p(rest.first())?,
        }),
        ["split_range", field, rest @ ..] => Ok(Transformation::SplitByRange {
            field: field.to_string(),
            partitions: parse_p(rest.first())?,
        }),
        ["localize", space, field] => {
            Ok(Transformation::Localize { space: space.to_string(), field: field.to_string() })
        }
        ["materialize"] => Ok(Transformation::Materialize),
        ["reduce", family, member] => Ok(Transformation::ReduceReservoir(SubsetSpec {
            family: family.to_string(),
            member: member.to_string(),
            domain_size: None,
        })),
        ["interchange", a, b] => Ok(Transformation::Interchange {
            a: a.parse().map_err(|_| usage("levels must be integers"))?,
            b: b.parse().map_err(|_| usage("levels must be integers"))?,
        }),
        _ => Err(usage("unrecognized step")),
    }
}

fn parse_layout(s: &str) -> Result<Layout, TransformError> {
    match s {
        "aos" => Ok(Layout::Aos),
        "soa" => Ok(Layout::Soa),
        "jagged" => Ok(Layout::JaggedDiagonal),
        other => Err(TransformError::Config(format!("unknown layout `{other}`"))),
    }
}

/// Loads user variants from a TOML file.
pub fn load_variants_file(text: &str) -> Result<Vec<Variant>, TransformError> {
    let parsed: VariantsFile =
        toml::from_str(text).map_err(|e| TransformError::Config(e.to_string()))?;
    parsed
        .variant
        .into_iter()
        .map(|entry| {
            let app: AppKind = entry.app.parse().map_err(TransformError::Config)?;
            let exchange: ExchangeKind =
                entry.exchange.parse().map_err(TransformError::Config)?;
            let pipeline = entry
                .pipeline
                .iter()
                .map(|s| parse_pipeline_step(s))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Variant {
                name: entry.name,
                app,
                pipeline,
                exchange,
                layout: parse_layout(&entry.layout)?,
            })
        })
        .collect()
}
