//! Column-major tables: the raw [`Dataset`] and the model-facing [`FeatureFrame`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::schema::{ColumnKind, ColumnRole, ColumnSpec, Schema};
use crate::error::{Error, Result};

/// Interned string column. Levels are kept in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct CategoricalColumn {
    codes: Vec<Option<u32>>,
    levels: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl PartialEq for CategoricalColumn {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && (0..self.len()).all(|i| self.get(i) == other.get(i))
    }
}

impl CategoricalColumn {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values<'a, I>(values: I) -> Self
    where
        I: IntoIterator<Item = Option<&'a str>>,
    {
        let mut col = Self::new();
        for v in values {
            col.push(v);
        }
        col
    }

    pub fn intern(&mut self, value: &str) -> u32 {
        if let Some(&code) = self.lookup.get(value) {
            return code;
        }
        let code = self.levels.len() as u32;
        self.levels.push(value.to_string());
        self.lookup.insert(value.to_string(), code);
        code
    }

    pub fn push(&mut self, value: Option<&str>) {
        let code = value.map(|v| self.intern(v));
        self.codes.push(code);
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn get(&self, row: usize) -> Option<&str> {
        self.codes[row].map(|c| self.levels[c as usize].as_str())
    }

    pub fn code(&self, row: usize) -> Option<u32> {
        self.codes[row]
    }

    pub fn codes(&self) -> &[Option<u32>] {
        &self.codes
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub(crate) fn set(&mut self, row: usize, value: &str) {
        let code = self.intern(value);
        self.codes[row] = Some(code);
    }

    fn select(&self, rows: &[usize]) -> Self {
        CategoricalColumn {
            codes: rows.iter().map(|&r| self.codes[r]).collect(),
            levels: self.levels.clone(),
            lookup: self.lookup.clone(),
        }
    }
}

/// One column of a [`Dataset`]. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical(CategoricalColumn),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Categorical(c) => c.code(row).is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&r| self.is_missing(r)).count()
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match self {
            Column::Numeric(v) => Some(v),
            Column::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&CategoricalColumn> {
        match self {
            Column::Categorical(c) => Some(c),
            Column::Numeric(_) => None,
        }
    }

    /// Cell rendered as text; empty string for missing.
    pub fn render(&self, row: usize) -> String {
        match self {
            Column::Numeric(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
            Column::Categorical(c) => c.get(row).unwrap_or("").to_string(),
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical(c) => Column::Categorical(c.select(rows)),
        }
    }
}

/// A table conforming to a [`Schema`].
///
/// Numeric cells are finite; the target, where present, is non-negative.
/// Missing cells are allowed until `fill_missing` has run.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::Schema(format!(
                "{} schema columns but {} data columns",
                schema.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::LengthMismatch(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    spec.name,
                    col.len()
                )));
            }
            match (spec.kind.is_numeric(), col) {
                (true, Column::Numeric(values)) => {
                    if values.iter().flatten().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite(format!("column `{}`", spec.name)));
                    }
                    if spec.role == ColumnRole::Target && values.iter().flatten().any(|&x| x < 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "target column `{}` has negative values",
                            spec.name
                        )));
                    }
                }
                (false, Column::Categorical(_)) => {}
                _ => {
                    return Err(Error::Schema(format!(
                        "column `{}` storage does not match kind {:?}",
                        spec.name, spec.kind
                    )))
                }
            }
        }
        Ok(Dataset {
            schema,
            columns,
            n_rows,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.schema
            .index_of(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column_at(&self, index: usize) -> &Column {
        &self.columns[index]
    }

    pub(crate) fn into_parts(self) -> (Schema, Vec<Column>) {
        (self.schema, self.columns)
    }

    pub fn is_complete(&self) -> bool {
        self.columns.iter().all(|c| c.missing_count() == 0)
    }

    /// Rows in the given order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Target values; errors if any is missing.
    pub fn targets(&self) -> Result<Vec<f64>> {
        let idx = self.schema.target_index();
        let name = &self.schema.columns()[idx].name;
        let values = self.columns[idx].as_numeric().expect("target is numeric");
        values
            .iter()
            .map(|v| v.ok_or_else(|| Error::Incomplete(name.clone())))
            .collect()
    }

    /// Feature-role columns as a [`FeatureFrame`]; errors on missing cells.
    pub fn feature_frame(&self) -> Result<FeatureFrame> {
        let mut features = Vec::new();
        for (spec, col) in self.schema.columns().iter().zip(&self.columns) {
            if spec.role != ColumnRole::Feature {
                continue;
            }
            let values = match col {
                Column::Numeric(v) => FeatureValues::Numeric(
                    v.iter()
                        .map(|x| x.ok_or_else(|| Error::Incomplete(spec.name.clone())))
                        .collect::<Result<_>>()?,
                ),
                Column::Categorical(c) => FeatureValues::Categorical {
                    codes: c
                        .codes()
                        .iter()
                        .map(|x| x.ok_or_else(|| Error::Incomplete(spec.name.clone())))
                        .collect::<Result<_>>()?,
                    levels: c.levels().to_vec(),
                },
            };
            features.push(Feature {
                name: spec.name.clone(),
                values,
            });
        }
        FeatureFrame::new(self.n_rows, features)
    }

    pub(crate) fn with_column(&self, spec: ColumnSpec, column: Column) -> Result<Dataset> {
        let schema = self.schema.with_column(spec)?;
        let mut columns = self.columns.clone();
        columns.push(column);
        Dataset::new(schema, columns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// Name and kind of a feature a model was trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDesc {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValues {
    Numeric(Vec<f64>),
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

impl FeatureValues {
    pub fn len(&self) -> usize {
        match self {
            FeatureValues::Numeric(v) => v.len(),
            FeatureValues::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureValues::Numeric(_) => FeatureKind::Numeric,
            FeatureValues::Categorical { .. } => FeatureKind::Categorical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub values: FeatureValues,
}

impl Feature {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Feature {
            name: name.into(),
            values: FeatureValues::Numeric(values),
        }
    }

    /// Categorical feature from string values, levels in first-seen order.
    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, values: &[S]) -> Self {
        let col = CategoricalColumn::from_values(values.iter().map(|s| Some(s.as_ref())));
        Feature {
            name: name.into(),
            values: FeatureValues::Categorical {
                codes: col.codes().iter().map(|c| c.expect("present")).collect(),
                levels: col.levels().to_vec(),
            },
        }
    }

    pub fn desc(&self) -> FeatureDesc {
        FeatureDesc {
            name: self.name.clone(),
            kind: self.values.kind(),
        }
    }

    /// Category string at `row`, if categorical.
    pub fn category(&self, row: usize) -> Option<&str> {
        match &self.values {
            FeatureValues::Categorical { codes, levels } => Some(levels[codes[row] as usize].as_str()),
            FeatureValues::Numeric(_) => None,
        }
    }
}

/// Complete, model-ready feature columns (no target, no missing cells).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    n_rows: usize,
    features: Vec<Feature>,
}

impl FeatureFrame {
    pub fn new(n_rows: usize, features: Vec<Feature>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for f in &features {
            if f.values.len() != n_rows {
                return Err(Error::LengthMismatch(format!(
                    "feature `{}` has {} rows, expected {n_rows}",
                    f.name,
                    f.values.len()
                )));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate feature `{}`", f.name)));
            }
            if let FeatureValues::Numeric(v) = &f.values {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("feature `{}`", f.name)));
                }
            }
        }
        Ok(FeatureFrame { n_rows, features })
    }

    /// Numeric frame from row-major values.
    pub fn from_rows(names: &[&str], rows: &[Vec<f64>]) -> Result<Self> {
        let features = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let col = rows
                    .iter()
                    .map(|r| {
                        r.get(j)
                            .copied()
                            .ok_or_else(|| Error::LengthMismatch(format!("row shorter than {} columns", names.len())))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(Feature::numeric(*name, col))
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureFrame::new(rows.len(), features)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn descs(&self) -> Vec<FeatureDesc> {
        self.features.iter().map(Feature::desc).collect()
    }

    /// Rows in the given order (repeats allowed). Category levels are kept.
    pub fn select(&self, rows: &[usize]) -> FeatureFrame {
        let features = self
            .features
            .iter()
            .map(|f| Feature {
                name: f.name.clone(),
                values: match &f.values {
                    FeatureValues::Numeric(v) => FeatureValues::Numeric(rows.iter().map(|&r| v[r]).collect()),
                    FeatureValues::Categorical { codes, levels } => FeatureValues::Categorical {
                        codes: rows.iter().map(|&r| codes[r]).collect(),
                        levels: levels.clone(),
                    },
                },
            })
            .collect();
        FeatureFrame {
            n_rows: rows.len(),
            features,
        }
    }

    /// Positions of `wanted` features in this frame, matched by name and kind.
    pub fn resolve(&self, wanted: &[FeatureDesc]) -> Result<Vec<usize>> {
        wanted
            .iter()
            .map(|w| {
                let pos = self
                    .features
                    .iter()
                    .position(|f| f.name == w.name)
                    .ok_or_else(|| Error::MissingColumn(w.name.clone()))?;
                let kind = self.features[pos].values.kind();
                if kind != w.kind {
                    return Err(Error::SchemaMismatch(format!(
                        "feature `{}` is {:?} but the model expects {:?}",
                        w.name, kind, w.kind
                    )));
                }
                Ok(pos)
            })
            .collect()
    }
}

/// Kind a schema column takes when used as a model feature.
pub fn feature_kind(kind: ColumnKind) -> FeatureKind {
    if kind.is_numeric() {
        FeatureKind::Numeric
    } else {
        FeatureKind::Categorical
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSpec::new("brand", ColumnKind::Categorical, ColumnRole::Feature),
            ColumnSpec::new("price", ColumnKind::Numeric, ColumnRole::Feature),
            ColumnSpec::new("id", ColumnKind::Identifier, ColumnRole::Key),
            ColumnSpec::new("demand", ColumnKind::Numeric, ColumnRole::Target),
        ])
        .unwrap()
    }

    fn data() -> Dataset {
        Dataset::new(
            schema(),
            vec![
                Column::Categorical(CategoricalColumn::from_values([Some("a"), Some("b"), Some("a")])),
                Column::Numeric(vec![Some(1.0), Some(2.0), Some(3.0)]),
                Column::Categorical(CategoricalColumn::from_values([Some("x"), Some("y"), Some("z")])),
                Column::Numeric(vec![Some(4.0), Some(5.0), Some(6.0)]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn frame_contains_only_features() {
        let frame = data().feature_frame().unwrap();
        assert_eq!(frame.n_features(), 2);
        assert_eq!(frame.features()[0].category(1), Some("b"));
        assert_eq!(data().targets().unwrap(), vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn rejects_negative_target_and_non_finite() {
        let cols = vec![
            Column::Categorical(CategoricalColumn::from_values([Some("a")])),
            Column::Numeric(vec![Some(f64::NAN)]),
            Column::Categorical(CategoricalColumn::from_values([Some("x")])),
            Column::Numeric(vec![Some(1.0)]),
        ];
        assert!(matches!(Dataset::new(schema(), cols), Err(Error::NonFinite(_))));
        let cols = vec![
            Column::Categorical(CategoricalColumn::from_values([Some("a")])),
            Column::Numeric(vec![Some(1.0)]),
            Column::Categorical(CategoricalColumn::from_values([Some("x")])),
            Column::Numeric(vec![Some(-1.0)]),
        ];
        assert!(Dataset::new(schema(), cols).is_err());
    }

    #[test]
    fn missing_feature_blocks_frame() {
        let mut d = data();
        if let Column::Numeric(v) = &mut d.columns[1] {
            v[0] = None;
        }
        assert!(matches!(d.feature_frame(), Err(Error::Incomplete(_))));
    }

    #[test]
    fn resolve_checks_name_and_kind() {
        let frame = data().feature_frame().unwrap();
        let ok = frame.resolve(&[FeatureDesc {
            name: "price".into(),
            kind: FeatureKind::Numeric,
        }]);
        assert_eq!(ok.unwrap(), vec![1]);
        let missing = frame.resolve(&[FeatureDesc {
            name: "stock".into(),
            kind: FeatureKind::Numeric,
        }]);
        assert!(matches!(missing, Err(Error::MissingColumn(n)) if n == "stock"));
        let wrong = frame.resolve(&[FeatureDesc {
            name: "brand".into(),
            kind: FeatureKind::Numeric,
        }]);
        assert!(wrong.is_err());
    }
}
