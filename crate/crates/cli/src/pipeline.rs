//! Loading and preprocessing the experiment dataset.

use std::path::Path;

use anyhow::{Context, Result};
use demandstack::dataset::{
    aggregate_weekly, derive_popularity, drop_columns, drop_sparse, fill_missing, generate_synthetic, ingest_csv,
    remove_outliers, CategoricalColumn, Column, ColumnKind, ColumnRole, ColumnSpec, Dataset, PreprocessParams, Schema,
    SchemaConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::{DataConfig, SyntheticSection};

/// Row and column counts through the preprocessing steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub source: String,
    pub rows_ingested: usize,
    pub rows_after_aggregation: usize,
    pub rows_after_outliers: usize,
    pub columns_dropped: Vec<String>,
    pub popularity_derived: bool,
}

impl PreprocessSummary {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "source: {}\nrows ingested: {}\nrows after weekly aggregation: {}\nrows after outlier removal: {}\n",
            self.source, self.rows_ingested, self.rows_after_aggregation, self.rows_after_outliers
        );
        if !self.columns_dropped.is_empty() {
            out.push_str(&format!("columns dropped: {}\n", self.columns_dropped.join(", ")));
        }
        if self.popularity_derived {
            out.push_str("popularity derived from view events\n");
        }
        out
    }
}

/// A preprocessed dataset together with the schema config that re-reads it.
pub struct Prepared {
    pub dataset: Dataset,
    pub schema: SchemaConfig,
    pub summary: PreprocessSummary,
}

/// Reads one view-event table, keeping only its product key column.
pub fn read_view_table(path: &Path, key: &str) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading view table {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h.trim() == key)
        .with_context(|| format!("view table {} has no `{key}` column", path.display()))?;
    let mut ids = CategoricalColumn::new();
    for record in reader.records() {
        let record = record.with_context(|| format!("reading view table {}", path.display()))?;
        let cell = record.get(idx).map(str::trim).unwrap_or("");
        ids.push((!cell.is_empty()).then_some(cell));
    }
    let n = ids.len();
    let schema = Schema::new(vec![
        ColumnSpec::new(key, ColumnKind::Identifier, ColumnRole::Key),
        ColumnSpec::new("event", ColumnKind::Numeric, ColumnRole::Target),
    ])?;
    Ok(Dataset::new(
        schema,
        vec![Column::Categorical(ids), Column::Numeric(vec![Some(1.0); n])],
    )?)
}

/// Drop list, sparse columns, missing values, weekly aggregation,
/// popularity, outliers.
pub fn preprocess(
    d: &Dataset,
    drop: &[String],
    params: &PreprocessParams,
    views: &[Dataset],
    source: &str,
) -> Result<Prepared> {
    let rows_ingested = d.n_rows();
    let before: Vec<String> = d.schema().columns().iter().map(|c| c.name.clone()).collect();
    let d = drop_columns(d, drop)?;
    let d = drop_sparse(&d, params.sparse_threshold)?;
    let after: Vec<&str> = d.schema().columns().iter().map(|c| c.name.as_str()).collect();
    let columns_dropped = before.into_iter().filter(|c| !after.contains(&c.as_str())).collect();
    let d = fill_missing(&d, params.numeric_fill, params.categorical_fill)?;
    let d = if params.aggregate {
        aggregate_weekly(&d, &params.product_key, &params.week_keys, params.demand)?
    } else {
        d
    };
    let rows_after_aggregation = d.n_rows();
    let popularity_derived = !views.is_empty();
    let d = if popularity_derived {
        let refs: Vec<&Dataset> = views.iter().collect();
        derive_popularity(
            &refs,
            &params.view_product_key,
            &d,
            &params.product_key,
            &params.popularity_column,
        )?
    } else {
        d
    };
    let d = remove_outliers(&d, params.max_demand)?;
    let schema = SchemaConfig {
        columns: d.schema().clone(),
        drop: Vec::new(),
        preprocess: PreprocessParams {
            aggregate: false,
            ..params.clone()
        },
    };
    let summary = PreprocessSummary {
        source: source.to_string(),
        rows_ingested,
        rows_after_aggregation,
        rows_after_outliers: d.n_rows(),
        columns_dropped,
        popularity_derived,
    };
    Ok(Prepared {
        dataset: d,
        schema,
        summary,
    })
}

pub fn synthetic_dataset(section: &SyntheticSection, seed: u64) -> Result<Dataset> {
    Ok(generate_synthetic(&section.spec(seed))?.dataset)
}

/// Loads the configured data source and preprocesses it.
pub fn load(data: &DataConfig, seed: u64) -> Result<Prepared> {
    if let Some(section) = &data.synthetic {
        let d = synthetic_dataset(section, seed)?;
        return preprocess(&d, &[], &section.preprocess, &[], "synthetic");
    }
    let csv = data.csv.as_ref().context("no data source configured")?;
    let schema_cfg =
        SchemaConfig::load(&csv.schema).with_context(|| format!("loading schema {}", csv.schema.display()))?;
    let d = ingest_csv(&csv.path, &schema_cfg.columns).with_context(|| format!("ingesting {}", csv.path.display()))?;
    let source = csv.path.display().to_string();
    if !csv.preprocess {
        let summary = PreprocessSummary {
            source,
            rows_ingested: d.n_rows(),
            rows_after_aggregation: d.n_rows(),
            rows_after_outliers: d.n_rows(),
            columns_dropped: Vec::new(),
            popularity_derived: false,
        };
        return Ok(Prepared {
            dataset: d,
            schema: schema_cfg,
            summary,
        });
    }
    let views = csv
        .views
        .iter()
        .map(|p| read_view_table(p, &schema_cfg.preprocess.view_product_key))
        .collect::<Result<Vec<_>>>()?;
    preprocess(&d, &schema_cfg.drop, &schema_cfg.preprocess, &views, &source)
}
