//! Data ingestion, preprocessing, splitting and synthetic data.

mod csv_io;
mod frame;
mod preprocess;
mod sampling;
mod schema;
mod synthetic;

pub use csv_io::{ingest_csv, ingest_reader, write_csv};
pub use frame::{
    feature_kind, CategoricalColumn, Column, Dataset, Feature, FeatureDesc, FeatureFrame, FeatureKind, FeatureValues,
};
pub use preprocess::{
    aggregate_weekly, derive_popularity, drop_columns, drop_sparse, fill_missing, remove_outliers, MISSING_SENTINEL,
};
pub use sampling::{kfold, split, subsample_subsets, FoldPlan, SplitIndices, DEFAULT_FRACTIONS};
pub use schema::{
    CategoricalFill, ColumnKind, ColumnRole, ColumnSpec, DemandAggregation, NumericFill, PreprocessParams, Schema,
    SchemaConfig, TimePart,
};
pub use synthetic::{
    expand_to_sales, generate_synthetic, synthetic_schema, synthetic_schema_config, view_events, GroundTruth,
    SyntheticData, SyntheticSpec, BRANDS,
};
