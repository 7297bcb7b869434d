use demandstack::dataset::kfold;
use demandstack::dataset::{
    aggregate_weekly, fill_missing, generate_synthetic, remove_outliers, split, CategoricalColumn, CategoricalFill,
    Column, ColumnKind, ColumnRole, ColumnSpec, Dataset, DemandAggregation, GroundTruth, NumericFill, Schema,
    SyntheticSpec, DEFAULT_FRACTIONS,
};
use demandstack::ensemble::ForestConfig;
use demandstack::evalstat::rmse;
use demandstack::linear::{ElasticNetConfig, EncodedColumn, LinearModel};
use demandstack::model::{LearnerConfig, Model, ModelFile};
use demandstack::stacking::{train_stacked, LearnerSpec, StackingData};
use demandstack::tree::TreeConfig;
use proptest::prelude::*;

fn schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::new("product_id", ColumnKind::Identifier, ColumnRole::Key),
        ColumnSpec::new("week", ColumnKind::Week, ColumnRole::Key),
        ColumnSpec::new("price", ColumnKind::Numeric, ColumnRole::Feature),
        ColumnSpec::new("color", ColumnKind::Categorical, ColumnRole::Feature),
        ColumnSpec::new("demand", ColumnKind::Numeric, ColumnRole::Target),
    ])
    .unwrap()
}

type RawRow = (u8, u8, Option<f64>, Option<u8>, u8);

fn dataset(rows: &[RawRow]) -> Dataset {
    let ids: Vec<String> = rows.iter().map(|r| format!("p{}", r.0)).collect();
    let colors: Vec<Option<String>> = rows.iter().map(|r| r.3.map(|c| format!("c{c}"))).collect();
    let mut color_col = CategoricalColumn::new();
    for c in &colors {
        color_col.push(c.as_deref());
    }
    Dataset::new(
        schema(),
        vec![
            Column::Categorical(CategoricalColumn::from_values(ids.iter().map(|s| Some(s.as_str())))),
            Column::Numeric(rows.iter().map(|r| Some(f64::from(r.1))).collect()),
            Column::Numeric(rows.iter().map(|r| r.2).collect()),
            Column::Categorical(color_col),
            Column::Numeric(rows.iter().map(|r| Some(f64::from(r.4))).collect()),
        ],
    )
    .unwrap()
}

fn raw_rows() -> impl Strategy<Value = Vec<RawRow>> {
    prop::collection::vec(
        (
            0u8..5,
            1u8..4,
            prop::option::weighted(0.8, 0.0f64..100.0),
            prop::option::weighted(0.8, 0u8..3),
            0u8..30,
        ),
        2..40,
    )
    .prop_filter("need observed feature values", |rows| {
        rows.iter().any(|r| r.2.is_some()) && rows.iter().any(|r| r.3.is_some())
    })
}

proptest! {
    #[test]
    fn fill_and_outlier_removal_commute_on_observed_cells(rows in raw_rows()) {
        let d = dataset(&rows);
        prop_assume!(rows.iter().any(|r| r.4 < 20));
        let filled = fill_missing(&d, NumericFill::ColumnMean, CategoricalFill::Mode).unwrap();
        let a = remove_outliers(&filled, 20).unwrap();
        let trimmed = remove_outliers(&d, 20).unwrap();
        // The trimmed table may lose every observed value of a column.
        let Ok(b) = fill_missing(&trimmed, NumericFill::ColumnMean, CategoricalFill::Mode) else { return Ok(()) };
        prop_assert_eq!(a.n_rows(), b.n_rows());
        prop_assert!(a.is_complete() && b.is_complete());
        for (c, col) in trimmed.columns().iter().enumerate() {
            for r in 0..trimmed.n_rows() {
                if !col.is_missing(r) {
                    prop_assert_eq!(a.column_at(c).render(r), b.column_at(c).render(r));
                }
            }
        }
    }

    #[test]
    fn outlier_removal_keeps_only_small_demand(rows in raw_rows(), limit in 1u32..30) {
        let d = dataset(&rows);
        if let Ok(out) = remove_outliers(&d, limit) {
            prop_assert!(out.targets().unwrap().iter().all(|&y| y < f64::from(limit)));
        }
    }

    #[test]
    fn count_aggregation_conserves_rows(rows in raw_rows()) {
        let d = fill_missing(&dataset(&rows), NumericFill::ColumnMean, CategoricalFill::Mode).unwrap();
        let weekly = aggregate_weekly(&d, "product_id", &["week".to_string()], DemandAggregation::Count).unwrap();
        prop_assert!(weekly.n_rows() <= d.n_rows());
        prop_assert_eq!(weekly.targets().unwrap().iter().sum::<f64>(), d.n_rows() as f64);
    }
}

#[test]
fn noise_free_linear_truth_is_recovered() {
    let spec = SyntheticSpec {
        noise_std: 0.0,
        truth: GroundTruth::integer_linear(),
        ..Default::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    let frame = data.dataset.feature_frame().unwrap();
    let y = data.dataset.targets().unwrap();
    let cfg = ElasticNetConfig {
        lambda: 0.0,
        tol: 1e-13,
        max_iters: 200_000,
        ..Default::default()
    };
    let (model, _) = LinearModel::fit(&frame, &y, &cfg).unwrap();
    let (beta, _) = model.fit.original_scale();
    let truth = GroundTruth::integer_linear();
    for (col, b) in model.encoding.columns.iter().zip(&beta) {
        if let EncodedColumn::Numeric { source } = col {
            let want = match source.as_str() {
                "price" => truth.price,
                "stock" => truth.stock,
                "popularity" => truth.popularity,
                "seller_rating" => truth.seller_rating,
                "week" => truth.week,
                other => panic!("unexpected column {other}"),
            };
            assert!((b - want).abs() < 1e-6, "{source}: {b} vs {want}");
        }
    }
    assert!(rmse(&model.predict(&frame).unwrap(), &y).unwrap() < 1e-6);
}

#[test]
fn stacked_model_survives_serialization_and_sees_only_meta_features() {
    let data = generate_synthetic(&SyntheticSpec {
        n_products: 10,
        weeks: 20,
        ..Default::default()
    })
    .unwrap();
    let d = &data.dataset;
    let s = split(d.n_rows(), DEFAULT_FRACTIONS, 1).unwrap();
    let frame = d.feature_frame().unwrap();
    let y = d.targets().unwrap();
    let pick = |rows: &[usize]| rows.iter().map(|&r| y[r]).collect::<Vec<f64>>();
    let (train, val) = (frame.select(&s.train), frame.select(&s.validation));
    let (train_y, val_y) = (pick(&s.train), pick(&s.validation));
    let first = vec![
        LearnerSpec::single("LR", LearnerConfig::Linear(ElasticNetConfig::default())),
        LearnerSpec::single("DT", LearnerConfig::Tree(TreeConfig::with_max_depth(4))),
        LearnerSpec::single(
            "RF",
            LearnerConfig::Forest(ForestConfig {
                n_trees: 5,
                ..Default::default()
            }),
        ),
    ];
    let second = LearnerSpec::single("LR", LearnerConfig::Linear(ElasticNetConfig::default()));
    let folds = kfold(s.train.len(), 5, 2).unwrap();
    let data = StackingData {
        train: &train,
        train_y: &train_y,
        validation: &val,
        validation_y: &val_y,
    };
    let stacked = train_stacked(data, &first, &second, &folds, 8).unwrap();

    let Model::Linear(level2) = &stacked.second_level.model else {
        panic!("second level should be linear")
    };
    let inputs: Vec<&str> = level2.encoding.inputs.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(
        inputs,
        stacked.meta_layout.iter().map(String::as_str).collect::<Vec<_>>()
    );
    assert_eq!(inputs.len(), 3);

    let model = Model::Stacked(Box::new(stacked));
    let text = ModelFile::new(model.clone(), "demand").to_json().unwrap();
    let back = ModelFile::from_json(&text).unwrap().model;
    let test = frame.select(&s.test);
    let a = model.predict(&test).unwrap();
    let b = back.predict(&test).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
