//! Seeded synthetic weekly demand data with a recorded ground truth.
//!
//! Each product has a brand, a base price, a seller rating and a total view
//! count (popularity). Each product-week draws a price around the base price
//! and a stock level. Expected demand is
//!
//! ```text
//! intercept + price·b_price + stock·b_stock + popularity·b_pop
//!   + seller_rating·b_rating + week·b_week + brand_effect
//!   + interaction · price · popularity / 100
//! ```
//!
//! and the observed demand is `max(0, round(expected + N(0, noise_std²)))`.
//! All generated features are integers, so integer coefficients with zero
//! noise give demand that is exactly linear in the features.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::frame::{CategoricalColumn, Column, Dataset};
use super::schema::{ColumnKind, ColumnRole, ColumnSpec, PreprocessParams, Schema, SchemaConfig};
use crate::error::{Error, Result};
use crate::seed::labeled_rng;

pub const BRANDS: [&str; 4] = ["Samsung", "Apple", "Nokia", "Xiaomi"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundTruth {
    pub intercept: f64,
    pub price: f64,
    pub stock: f64,
    pub popularity: f64,
    pub seller_rating: f64,
    pub week: f64,
    /// Additive effect per entry of [`BRANDS`]; missing entries are 0.
    pub brand_effects: Vec<f64>,
    pub interaction: f64,
}

impl Default for GroundTruth {
    fn default() -> Self {
        GroundTruth {
            intercept: 4.0,
            price: -0.03,
            stock: 0.1,
            popularity: 0.05,
            seller_rating: 0.5,
            week: 0.0,
            brand_effects: vec![2.0, 1.0, 0.0, -1.0],
            interaction: -0.02,
        }
    }
}

impl GroundTruth {
    /// Purely linear truth with all-integer coefficients.
    pub fn integer_linear() -> Self {
        GroundTruth {
            intercept: 2.0,
            price: 0.0,
            stock: 1.0,
            popularity: 0.0,
            seller_rating: 2.0,
            week: 0.0,
            brand_effects: vec![3.0, 1.0, 0.0, 2.0],
            interaction: 0.0,
        }
    }

    fn brand_effect(&self, brand: usize) -> f64 {
        self.brand_effects.get(brand).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_products: usize,
    pub weeks: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub start_year: u32,
    pub truth: GroundTruth,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_products: 40,
            weeks: 50,
            noise_std: 1.0,
            seed: 0,
            start_year: 2017,
            truth: GroundTruth::default(),
        }
    }
}

/// Generated data together with the noise-free expected demand per row.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub expected: Vec<f64>,
}

impl SyntheticData {
    /// RMSE of the ground-truth mean against the observed demand on `rows`.
    pub fn bayes_rmse(&self, rows: &[usize]) -> Result<f64> {
        let y = self.dataset.targets()?;
        let pred: Vec<f64> = rows.iter().map(|&r| self.expected[r]).collect();
        let act: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        crate::evalstat::rmse(&pred, &act)
    }
}

/// Schema of the weekly table produced by [`generate_synthetic`].
pub fn synthetic_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::new("product_id", ColumnKind::Identifier, ColumnRole::Key),
        ColumnSpec::new("year", ColumnKind::Year, ColumnRole::Key),
        ColumnSpec::new("week", ColumnKind::Week, ColumnRole::Feature),
        ColumnSpec::new("brand", ColumnKind::Categorical, ColumnRole::Feature),
        ColumnSpec::new("price", ColumnKind::Numeric, ColumnRole::Feature),
        ColumnSpec::new("stock", ColumnKind::Numeric, ColumnRole::Feature),
        ColumnSpec::new("popularity", ColumnKind::Numeric, ColumnRole::Feature),
        ColumnSpec::new("seller_rating", ColumnKind::Numeric, ColumnRole::Feature),
        ColumnSpec::new("demand", ColumnKind::Numeric, ColumnRole::Target),
    ])
    .expect("static schema is valid")
}

/// Schema config matching [`synthetic_schema`] with default preprocessing.
pub fn synthetic_schema_config() -> SchemaConfig {
    SchemaConfig {
        columns: synthetic_schema(),
        drop: Vec::new(),
        preprocess: PreprocessParams::default(),
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.n_products == 0 || spec.weeks == 0 {
        return Err(Error::InvalidInput(format!(
            "synthetic spec needs products and weeks, got {} x {}",
            spec.n_products, spec.weeks
        )));
    }
    if !(spec.noise_std.is_finite() && spec.noise_std >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise_std {} must be finite and >= 0",
            spec.noise_std
        )));
    }
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut product_rng = labeled_rng(spec.seed, "synthetic/products");
    let mut week_rng = labeled_rng(spec.seed, "synthetic/weeks");
    let mut noise_rng = labeled_rng(spec.seed, "synthetic/noise");

    struct Product {
        id: String,
        brand: usize,
        base_price: i64,
        rating: i64,
        popularity: i64,
    }
    let products: Vec<Product> = (0..spec.n_products)
        .map(|p| Product {
            id: format!("P{p:04}"),
            brand: product_rng.random_range(0..BRANDS.len()),
            base_price: product_rng.random_range(20..=200),
            rating: product_rng.random_range(1..=5),
            popularity: product_rng.random_range(10..=300),
        })
        .collect();

    let n = spec.n_products * spec.weeks;
    let mut ids = CategoricalColumn::new();
    let mut brands = CategoricalColumn::new();
    let mut year = Vec::with_capacity(n);
    let mut week = Vec::with_capacity(n);
    let mut price = Vec::with_capacity(n);
    let mut stock = Vec::with_capacity(n);
    let mut popularity = Vec::with_capacity(n);
    let mut rating = Vec::with_capacity(n);
    let mut demand = Vec::with_capacity(n);
    let mut expected = Vec::with_capacity(n);
    let t = &spec.truth;

    for p in &products {
        for w in 0..spec.weeks {
            let y = f64::from(spec.start_year) + (w / 52) as f64;
            let wk = (w % 52 + 1) as f64;
            let pr = (p.base_price + week_rng.random_range(-10..=10)).max(1) as f64;
            let st = week_rng.random_range(0..=50) as f64;
            let pop = p.popularity as f64;
            let rt = p.rating as f64;
            let mean = t.intercept
                + t.price * pr
                + t.stock * st
                + t.popularity * pop
                + t.seller_rating * rt
                + t.week * wk
                + t.brand_effect(p.brand)
                + t.interaction * pr * pop / 100.0;
            let eps = if spec.noise_std > 0.0 {
                noise.sample(&mut noise_rng)
            } else {
                0.0
            };
            ids.push(Some(&p.id));
            brands.push(Some(BRANDS[p.brand]));
            year.push(Some(y));
            week.push(Some(wk));
            price.push(Some(pr));
            stock.push(Some(st));
            popularity.push(Some(pop));
            rating.push(Some(rt));
            demand.push(Some((mean + eps).round().max(0.0)));
            expected.push(mean);
        }
    }

    let dataset = Dataset::new(
        synthetic_schema(),
        vec![
            Column::Categorical(ids),
            Column::Numeric(year),
            Column::Numeric(week),
            Column::Categorical(brands),
            Column::Numeric(price),
            Column::Numeric(stock),
            Column::Numeric(popularity),
            Column::Numeric(rating),
            Column::Numeric(demand),
        ],
    )?;
    Ok(SyntheticData { dataset, expected })
}

/// Sale-level view of a weekly table: a product-week with demand `d`
/// becomes `d` rows with demand 1 and the popularity column removed.
/// Weekly aggregation by count maps the result back onto the rows with
/// non-zero demand.
pub fn expand_to_sales(weekly: &Dataset) -> Result<Dataset> {
    let y = weekly.targets()?;
    let mut rows = Vec::new();
    for (r, &d) in y.iter().enumerate() {
        rows.extend(std::iter::repeat_n(r, d as usize));
    }
    let sales = weekly.select_rows(&rows);
    let pop = sales.schema().index_of("popularity");
    let (schema, mut columns) = sales.into_parts();
    let target = schema.target_index();
    columns[target] = Column::Numeric(vec![Some(1.0); rows.len()]);
    let (schema, columns) = match pop {
        Some(i) => {
            columns.remove(i);
            (schema.without(&[i])?, columns)
        }
        None => (schema, columns),
    };
    Dataset::new(schema, columns)
}

/// Two view-event tables (purchases, abandoned views) keyed by
/// `product_id` whose combined per-product count equals the product's
/// popularity, with purchases capped at that popularity.
pub fn view_events(weekly: &Dataset) -> Result<(Dataset, Dataset)> {
    let ids = weekly.column("product_id")?;
    let pop = weekly
        .column("popularity")?
        .as_numeric()
        .ok_or_else(|| Error::InvalidInput("popularity must be numeric".into()))?;
    let y = weekly.targets()?;
    let mut order: Vec<String> = Vec::new();
    let mut totals: std::collections::HashMap<String, (f64, f64)> = Default::default();
    for r in 0..weekly.n_rows() {
        let id = ids.render(r);
        let entry = totals.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            (0.0, 0.0)
        });
        entry.0 += y[r];
        entry.1 = pop[r].unwrap_or(0.0);
    }
    let schema = Schema::new(vec![
        ColumnSpec::new("product_id", ColumnKind::Identifier, ColumnRole::Key),
        ColumnSpec::new("event", ColumnKind::Numeric, ColumnRole::Target),
    ])?;
    let mut purchases = CategoricalColumn::new();
    let mut abandons = CategoricalColumn::new();
    for id in &order {
        let (sold, views) = totals[id];
        let bought = sold.min(views) as usize;
        let left = (views as usize).saturating_sub(bought);
        for _ in 0..bought {
            purchases.push(Some(id));
        }
        for _ in 0..left {
            abandons.push(Some(id));
        }
    }
    let np = purchases.len();
    let na = abandons.len();
    Ok((
        Dataset::new(
            schema.clone(),
            vec![Column::Categorical(purchases), Column::Numeric(vec![Some(1.0); np])],
        )?,
        Dataset::new(
            schema,
            vec![Column::Categorical(abandons), Column::Numeric(vec![Some(0.0); na])],
        )?,
    ))
}
