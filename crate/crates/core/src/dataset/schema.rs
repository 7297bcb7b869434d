//! Column schema and the schema config file.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Part of a sale timestamp stored as its own integer column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimePart {
    Year,
    Month,
    Week,
    Day,
}

/// Storage kind of a column.
///
/// In the config file the kind is written as one of `numeric`,
/// `categorical`, `identifier`, `year`, `month`, `week` or `day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Identifier,
    Year,
    Month,
    Week,
    Day,
}

impl ColumnKind {
    /// Numeric and timestamp-part columns hold reals; the rest hold symbols.
    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            ColumnKind::Numeric | ColumnKind::Year | ColumnKind::Month | ColumnKind::Week | ColumnKind::Day
        )
    }

    pub fn time_part(self) -> Option<TimePart> {
        match self {
            ColumnKind::Year => Some(TimePart::Year),
            ColumnKind::Month => Some(TimePart::Month),
            ColumnKind::Week => Some(TimePart::Week),
            ColumnKind::Day => Some(TimePart::Day),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Feature,
    Target,
    Key,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind, role: ColumnRole) -> Self {
        ColumnSpec {
            name: name.into(),
            kind,
            role,
        }
    }
}

/// Ordered list of column specs with unique names and exactly one target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ColumnSpec>", into = "Vec<ColumnSpec>")]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
        }
        let targets: Vec<&ColumnSpec> = columns.iter().filter(|c| c.role == ColumnRole::Target).collect();
        match targets.as_slice() {
            [t] if t.kind.is_numeric() => {}
            [t] => {
                return Err(Error::Schema(format!("target column `{}` must be numeric", t.name)));
            }
            _ => {
                return Err(Error::Schema(format!(
                    "exactly one target column required, found {}",
                    targets.len()
                )))
            }
        }
        Ok(Schema { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.role == ColumnRole::Target)
            .expect("schema invariant: one target")
    }

    pub fn target(&self) -> &ColumnSpec {
        &self.columns[self.target_index()]
    }

    pub(crate) fn without(&self, remove: &[usize]) -> Result<Schema> {
        let columns = self
            .columns
            .iter()
            .enumerate()
            .filter(|(i, _)| !remove.contains(i))
            .map(|(_, c)| c.clone())
            .collect();
        Schema::new(columns)
    }

    pub(crate) fn with_column(&self, spec: ColumnSpec) -> Result<Schema> {
        let mut columns = self.columns.clone();
        columns.push(spec);
        Schema::new(columns)
    }
}

impl TryFrom<Vec<ColumnSpec>> for Schema {
    type Error = Error;

    fn try_from(columns: Vec<ColumnSpec>) -> Result<Self> {
        Schema::new(columns)
    }
}

impl From<Schema> for Vec<ColumnSpec> {
    fn from(s: Schema) -> Self {
        s.columns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NumericFill {
    #[default]
    ColumnMean,
    ColumnMedian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CategoricalFill {
    #[default]
    Mode,
    Sentinel,
}

/// How weekly demand is formed from sale-level rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DemandAggregation {
    /// Demand is the number of sale rows in the product-week.
    #[default]
    Count,
    /// Demand is the sum of the target column over the product-week.
    Sum,
}

/// Preprocessing parameters carried by the schema config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessParams {
    pub numeric_fill: NumericFill,
    pub categorical_fill: CategoricalFill,
    pub sparse_threshold: f64,
    pub max_demand: u32,
    pub aggregate: bool,
    pub product_key: String,
    pub week_keys: Vec<String>,
    pub demand: DemandAggregation,
    pub popularity_column: String,
    pub view_product_key: String,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            numeric_fill: NumericFill::ColumnMean,
            categorical_fill: CategoricalFill::Mode,
            sparse_threshold: 0.5,
            max_demand: 20,
            aggregate: true,
            product_key: "product_id".into(),
            week_keys: vec!["year".into(), "week".into()],
            demand: DemandAggregation::Count,
            popularity_column: "popularity".into(),
            view_product_key: "product_id".into(),
        }
    }
}

/// Contents of a schema config file.
///
/// ```toml
/// drop = ["seller_name"]
///
/// [[columns]]
/// name = "product_id"
/// kind = "identifier"
/// role = "key"
///
/// [preprocess]
/// max_demand = 20
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub columns: Schema,
    #[serde(default)]
    pub drop: Vec<String>,
    #[serde(default)]
    pub preprocess: PreprocessParams,
}

impl SchemaConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SchemaConfig = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        for name in &cfg.drop {
            match cfg.columns.index_of(name) {
                None => return Err(Error::Schema(format!("drop-list column `{name}` is not in the schema"))),
                Some(i) if cfg.columns.columns()[i].role == ColumnRole::Target => {
                    return Err(Error::Schema(format!("cannot drop target column `{name}`")))
                }
                _ => {}
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}
