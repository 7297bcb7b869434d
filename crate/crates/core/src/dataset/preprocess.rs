//! Cleaning steps applied before modelling: missing values, sparse columns,
//! weekly aggregation, popularity, and demand outliers.

use std::collections::HashMap;

use super::frame::{CategoricalColumn, Column, Dataset};
use super::schema::{CategoricalFill, ColumnKind, ColumnRole, ColumnSpec, DemandAggregation, NumericFill};
use crate::error::{Error, Result};

/// Value written into categorical cells by [`CategoricalFill::Sentinel`].
pub const MISSING_SENTINEL: &str = "__missing__";

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Most frequent code; ties go to the code seen first in row order.
fn mode_code<I: IntoIterator<Item = u32>>(codes: I) -> Option<u32> {
    let mut counts: HashMap<u32, (usize, usize)> = HashMap::new();
    for (pos, c) in codes.into_iter().enumerate() {
        counts.entry(c).or_insert((0, pos)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(c, _)| c)
}

/// Replaces every missing cell using a per-column statistic computed over
/// that column's non-missing values.
pub fn fill_missing(d: &Dataset, numeric: NumericFill, categorical: CategoricalFill) -> Result<Dataset> {
    let mut columns = Vec::with_capacity(d.columns().len());
    for (spec, col) in d.schema().columns().iter().zip(d.columns()) {
        let missing = col.missing_count();
        if missing == 0 {
            columns.push(col.clone());
            continue;
        }
        if missing == col.len() {
            return Err(Error::EntirelyMissing(spec.name.clone()));
        }
        let filled = match col {
            Column::Numeric(values) => {
                let present: Vec<f64> = values.iter().flatten().copied().collect();
                let fill = match numeric {
                    NumericFill::ColumnMean => mean(&present),
                    NumericFill::ColumnMedian => median(&present),
                };
                Column::Numeric(values.iter().map(|v| Some(v.unwrap_or(fill))).collect())
            }
            Column::Categorical(cat) => {
                let mut out = cat.clone();
                let fill = match categorical {
                    CategoricalFill::Mode => {
                        let code = mode_code(cat.codes().iter().flatten().copied()).expect("non-empty");
                        cat.levels()[code as usize].clone()
                    }
                    CategoricalFill::Sentinel => MISSING_SENTINEL.to_string(),
                };
                for row in 0..cat.len() {
                    if cat.code(row).is_none() {
                        out.set(row, &fill);
                    }
                }
                Column::Categorical(out)
            }
        };
        columns.push(filled);
    }
    Dataset::new(d.schema().clone(), columns)
}

/// Removes columns whose missing fraction exceeds `threshold`.
pub fn drop_sparse(d: &Dataset, threshold: f64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!(
            "sparse threshold {threshold} outside [0, 1]"
        )));
    }
    if d.n_rows() == 0 {
        return Ok(d.clone());
    }
    let n = d.n_rows() as f64;
    let mut remove = Vec::new();
    for (i, (spec, col)) in d.schema().columns().iter().zip(d.columns()).enumerate() {
        let frac = col.missing_count() as f64 / n;
        if frac > threshold {
            if spec.role == ColumnRole::Target {
                return Err(Error::InvalidInput(format!(
                    "target column `{}` is {:.1}% missing, above the sparse threshold",
                    spec.name,
                    frac * 100.0
                )));
            }
            remove.push(i);
        }
    }
    remove_columns(d, &remove)
}

/// Removes the named columns plus every column whose role is `drop`.
pub fn drop_columns(d: &Dataset, names: &[String]) -> Result<Dataset> {
    let mut remove = Vec::new();
    for name in names {
        let i = d
            .schema()
            .index_of(name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        if d.schema().columns()[i].role == ColumnRole::Target {
            return Err(Error::InvalidInput(format!("cannot drop target column `{name}`")));
        }
        remove.push(i);
    }
    for (i, spec) in d.schema().columns().iter().enumerate() {
        if spec.role == ColumnRole::Drop && !remove.contains(&i) {
            remove.push(i);
        }
    }
    remove_columns(d, &remove)
}

fn remove_columns(d: &Dataset, remove: &[usize]) -> Result<Dataset> {
    if remove.is_empty() {
        return Ok(d.clone());
    }
    let schema = d.schema().without(remove)?;
    let columns = d
        .columns()
        .iter()
        .enumerate()
        .filter(|(i, _)| !remove.contains(i))
        .map(|(_, c)| c.clone())
        .collect();
    Dataset::new(schema, columns)
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum KeyPart {
    Num(u64),
    Sym(u32),
}

/// Collapses sale-level rows into one row per (product, week keys) group.
///
/// Groups appear in order of first occurrence. The target becomes the row
/// count (or the target sum, for [`DemandAggregation::Sum`]); other numeric
/// columns take the group mean and categorical columns the group mode, both
/// over non-missing cells.
pub fn aggregate_weekly(
    d: &Dataset,
    product_key: &str,
    week_keys: &[String],
    demand: DemandAggregation,
) -> Result<Dataset> {
    let schema = d.schema();
    let product_idx = schema
        .index_of(product_key)
        .ok_or_else(|| Error::MissingColumn(product_key.to_string()))?;
    if week_keys.is_empty() {
        return Err(Error::InvalidInput("at least one week key column is required".into()));
    }
    let mut key_idx = vec![product_idx];
    for k in week_keys {
        let i = schema.index_of(k).ok_or_else(|| Error::MissingColumn(k.clone()))?;
        if schema.columns()[i].kind.time_part().is_none() {
            return Err(Error::InvalidInput(format!(
                "week key `{k}` is not a timestamp-part column"
            )));
        }
        key_idx.push(i);
    }
    let target_idx = schema.target_index();

    let mut group_of: HashMap<Vec<KeyPart>, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for row in 0..d.n_rows() {
        let mut key = Vec::with_capacity(key_idx.len());
        for &ci in &key_idx {
            let part = match d.column_at(ci) {
                Column::Numeric(v) => v[row].map(|x| KeyPart::Num(x.to_bits())),
                Column::Categorical(c) => c.code(row).map(KeyPart::Sym),
            };
            key.push(part.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "row {} has a missing key in column `{}`",
                    row + 1,
                    schema.columns()[ci].name
                ))
            })?);
        }
        let next = groups.len();
        let g = *group_of.entry(key).or_insert(next);
        if g == next {
            groups.push(Vec::new());
        }
        groups[g].push(row);
    }

    let mut columns = Vec::with_capacity(schema.len());
    for (ci, col) in d.columns().iter().enumerate() {
        let out = match col {
            Column::Numeric(values) if ci == target_idx => Column::Numeric(
                groups
                    .iter()
                    .map(|rows| {
                        Some(match demand {
                            DemandAggregation::Count => rows.len() as f64,
                            DemandAggregation::Sum => rows.iter().filter_map(|&r| values[r]).sum(),
                        })
                    })
                    .collect(),
            ),
            Column::Numeric(values) => Column::Numeric(
                groups
                    .iter()
                    .map(|rows| {
                        let present: Vec<f64> = rows.iter().filter_map(|&r| values[r]).collect();
                        (!present.is_empty()).then(|| mean(&present))
                    })
                    .collect(),
            ),
            Column::Categorical(cat) => {
                let mut out = CategoricalColumn::new();
                for rows in &groups {
                    let code = mode_code(rows.iter().filter_map(|&r| cat.code(r)));
                    out.push(code.map(|c| cat.levels()[c as usize].as_str()));
                }
                Column::Categorical(out)
            }
        };
        columns.push(out);
    }
    Dataset::new(schema.clone(), columns)
}

/// Adds a numeric feature counting view events per product across all
/// `view_tables` (purchases and abandoned views alike, weighted 1:1).
/// Products with no events get 0.
pub fn derive_popularity(
    view_tables: &[&Dataset],
    view_product_key: &str,
    d: &Dataset,
    product_key: &str,
    column_name: &str,
) -> Result<Dataset> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for table in view_tables {
        let col = table.column(view_product_key)?;
        for row in 0..table.n_rows() {
            if !col.is_missing(row) {
                *counts.entry(col.render(row)).or_insert(0) += 1;
            }
        }
    }
    let products = d.column(product_key)?;
    let values = (0..d.n_rows())
        .map(|row| {
            if products.is_missing(row) {
                None
            } else {
                Some(counts.get(&products.render(row)).copied().unwrap_or(0) as f64)
            }
        })
        .collect();
    d.with_column(
        ColumnSpec::new(column_name, ColumnKind::Numeric, ColumnRole::Feature),
        Column::Numeric(values),
    )
}

/// Keeps rows whose demand is strictly below `max_demand`.
///
/// Rows with a missing target are kept; their demand is unknown.
pub fn remove_outliers(d: &Dataset, max_demand: u32) -> Result<Dataset> {
    let target = d
        .column_at(d.schema().target_index())
        .as_numeric()
        .expect("target is numeric");
    let limit = f64::from(max_demand);
    let keep: Vec<usize> = (0..d.n_rows())
        .filter(|&r| target[r].is_none_or(|y| y < limit))
        .collect();
    if keep.is_empty() {
        return Err(Error::Empty(format!("no rows with demand below {max_demand}")));
    }
    Ok(d.select_rows(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::schema::Schema;

    fn num(v: &[Option<f64>]) -> Column {
        Column::Numeric(v.to_vec())
    }

    fn cat(v: &[Option<&str>]) -> Column {
        Column::Categorical(CategoricalColumn::from_values(v.iter().copied()))
    }

    fn two_col(feature: Column, target: Column) -> Dataset {
        let kind = if matches!(feature, Column::Numeric(_)) {
            ColumnKind::Numeric
        } else {
            ColumnKind::Categorical
        };
        let schema = Schema::new(vec![
            ColumnSpec::new("x", kind, ColumnRole::Feature),
            ColumnSpec::new("demand", ColumnKind::Numeric, ColumnRole::Target),
        ])
        .unwrap();
        Dataset::new(schema, vec![feature, target]).unwrap()
    }

    #[test]
    fn mean_fill() {
        let d = two_col(num(&[Some(1.0), None, Some(3.0)]), num(&[Some(1.0); 3]));
        let f = fill_missing(&d, NumericFill::ColumnMean, CategoricalFill::Mode).unwrap();
        assert_eq!(
            f.column("x").unwrap().as_numeric().unwrap(),
            &[Some(1.0), Some(2.0), Some(3.0)]
        );
    }

    #[test]
    fn median_fill() {
        let d = two_col(num(&[Some(1.0), None, Some(3.0), Some(10.0)]), num(&[Some(1.0); 4]));
        let f = fill_missing(&d, NumericFill::ColumnMedian, CategoricalFill::Mode).unwrap();
        assert_eq!(f.column("x").unwrap().as_numeric().unwrap()[1], Some(3.0));
    }

    #[test]
    fn mode_and_sentinel_fill() {
        let d = two_col(cat(&[Some("a"), None, Some("a")]), num(&[Some(1.0); 3]));
        let f = fill_missing(&d, NumericFill::ColumnMean, CategoricalFill::Mode).unwrap();
        let c = f.column("x").unwrap().as_categorical().unwrap();
        assert_eq!((0..3).map(|r| c.get(r).unwrap()).collect::<Vec<_>>(), ["a", "a", "a"]);
        let s = fill_missing(&d, NumericFill::ColumnMean, CategoricalFill::Sentinel).unwrap();
        assert_eq!(
            s.column("x").unwrap().as_categorical().unwrap().get(1),
            Some(MISSING_SENTINEL)
        );
    }

    #[test]
    fn mode_tie_goes_to_first_seen() {
        let d = two_col(
            cat(&[Some("b"), Some("a"), Some("a"), Some("b"), None]),
            num(&[Some(1.0); 5]),
        );
        let f = fill_missing(&d, NumericFill::ColumnMean, CategoricalFill::Mode).unwrap();
        assert_eq!(f.column("x").unwrap().as_categorical().unwrap().get(4), Some("b"));
    }

    #[test]
    fn fill_without_missing_is_identity() {
        let d = two_col(num(&[Some(1.0), Some(2.0)]), num(&[Some(1.0), Some(2.0)]));
        assert_eq!(
            fill_missing(&d, NumericFill::ColumnMean, CategoricalFill::Mode).unwrap(),
            d
        );
    }

    #[test]
    fn entirely_missing_column_is_an_error() {
        let d = two_col(num(&[None, None]), num(&[Some(1.0), Some(2.0)]));
        let err = fill_missing(&d, NumericFill::ColumnMean, CategoricalFill::Mode).unwrap_err();
        assert!(matches!(err, Error::EntirelyMissing(c) if c == "x"));
    }

    #[test]
    fn sparse_columns() {
        let mut eighty = vec![None; 8];
        eighty.extend([Some(1.0), Some(2.0)]);
        let d = two_col(num(&eighty), num(&[Some(1.0); 10]));
        assert_eq!(drop_sparse(&d, 0.5).unwrap().schema().len(), 1);

        let mut ten = vec![Some(1.0); 9];
        ten.push(None);
        let d = two_col(num(&ten), num(&[Some(1.0); 10]));
        assert_eq!(drop_sparse(&d, 0.5).unwrap().schema().len(), 2);
        assert_eq!(drop_sparse(&d, 0.0).unwrap().schema().len(), 1);
    }

    #[test]
    fn sparse_target_is_hard_error() {
        let d = two_col(num(&[Some(1.0); 4]), num(&[None, None, None, Some(1.0)]));
        assert!(drop_sparse(&d, 0.5).is_err());
    }

    #[test]
    fn outliers_strictly_below_limit() {
        let d = two_col(
            num(&[Some(1.0), Some(2.0), Some(3.0), Some(4.0)]),
            num(&[Some(5.0), Some(19.0), Some(20.0), Some(25.0)]),
        );
        let kept = remove_outliers(&d, 20).unwrap();
        assert_eq!(kept.targets().unwrap(), vec![5.0, 19.0]);
        assert_eq!(remove_outliers(&kept, 20).unwrap(), kept);
        assert!(matches!(remove_outliers(&d, 1), Err(Error::Empty(_))));
    }

    fn sales() -> Dataset {
        let schema = Schema::new(vec![
            ColumnSpec::new("product_id", ColumnKind::Identifier, ColumnRole::Key),
            ColumnSpec::new("year", ColumnKind::Year, ColumnRole::Key),
            ColumnSpec::new("week", ColumnKind::Week, ColumnRole::Feature),
            ColumnSpec::new("price", ColumnKind::Numeric, ColumnRole::Feature),
            ColumnSpec::new("seller", ColumnKind::Categorical, ColumnRole::Feature),
            ColumnSpec::new("demand", ColumnKind::Numeric, ColumnRole::Target),
        ])
        .unwrap();
        Dataset::new(
            schema,
            vec![
                cat(&[Some("A"), Some("A"), Some("A"), Some("B")]),
                num(&[Some(2017.0); 4]),
                num(&[Some(1.0), Some(1.0), Some(2.0), Some(1.0)]),
                num(&[Some(10.0), Some(12.0), Some(9.0), Some(5.0)]),
                cat(&[Some("s1"), Some("s2"), Some("s1"), Some("s3")]),
                num(&[Some(1.0), Some(2.0), Some(1.0), Some(1.0)]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn aggregation_counts_and_means() {
        let keys = vec!["year".to_string(), "week".to_string()];
        let agg = aggregate_weekly(&sales(), "product_id", &keys, DemandAggregation::Count).unwrap();
        assert_eq!(agg.n_rows(), 3);
        assert_eq!(agg.targets().unwrap(), vec![2.0, 1.0, 1.0]);
        assert_eq!(agg.column("price").unwrap().as_numeric().unwrap()[0], Some(11.0));
        // tie between s1 and s2 -> first occurrence
        assert_eq!(
            agg.column("seller").unwrap().as_categorical().unwrap().get(0),
            Some("s1")
        );

        let summed = aggregate_weekly(&sales(), "product_id", &keys, DemandAggregation::Sum).unwrap();
        assert_eq!(summed.targets().unwrap(), vec![3.0, 1.0, 1.0]);
    }

    #[test]
    fn aggregation_requires_week_columns() {
        let err = aggregate_weekly(&sales(), "product_id", &["month".to_string()], DemandAggregation::Count);
        assert!(matches!(err, Err(Error::MissingColumn(c)) if c == "month"));
        let err = aggregate_weekly(&sales(), "product_id", &["price".to_string()], DemandAggregation::Count);
        assert!(err.is_err());
    }

    #[test]
    fn popularity_counts_both_tables() {
        let view_schema = Schema::new(vec![
            ColumnSpec::new("product_id", ColumnKind::Identifier, ColumnRole::Key),
            ColumnSpec::new("n", ColumnKind::Numeric, ColumnRole::Target),
        ])
        .unwrap();
        let purchases = Dataset::new(view_schema.clone(), vec![cat(&[Some("A")]), num(&[Some(0.0)])]).unwrap();
        let abandons = Dataset::new(view_schema, vec![cat(&[Some("A")]), num(&[Some(0.0)])]).unwrap();
        let d = derive_popularity(
            &[&purchases, &abandons],
            "product_id",
            &sales(),
            "product_id",
            "popularity",
        )
        .unwrap();
        let pop = d.column("popularity").unwrap().as_numeric().unwrap();
        assert_eq!(pop, &[Some(2.0), Some(2.0), Some(2.0), Some(0.0)]);
    }
}
