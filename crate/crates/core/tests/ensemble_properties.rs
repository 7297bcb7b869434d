use demandstack::dataset::{Feature, FeatureFrame};
use demandstack::ensemble::{bootstrap_sample, fit_forest, fit_gbt, ForestConfig, GbtConfig};
use demandstack::evalstat::rmse;
use demandstack::seed::{labeled_rng, seeded_rng};
use demandstack::tree::TreeConfig;
use rand::Rng;

#[test]
fn out_of_bag_fraction_near_one_over_e() {
    let mut rng = seeded_rng(1);
    let mean = (0..100)
        .map(|_| bootstrap_sample(10_000, &mut rng).unwrap().oob_fraction())
        .sum::<f64>()
        / 100.0;
    assert!((mean - 0.368).abs() < 0.01, "{mean}");
}

fn random_frame(seed: u64, n: usize) -> (FeatureFrame, Vec<f64>) {
    let mut rng = seeded_rng(seed);
    let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let c: Vec<String> = (0..n).map(|_| format!("k{}", rng.random_range(0..4))).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| a[i].sqrt() * 3.0 + b[i] + if c[i] == "k1" { 2.0 } else { 0.0 } + rng.random::<f64>())
        .collect();
    let frame = FeatureFrame::new(
        n,
        vec![
            Feature::numeric("a", a),
            Feature::numeric("b", b),
            Feature::categorical("c", &c),
        ],
    )
    .unwrap();
    (frame, y)
}

#[test]
fn boosting_loss_never_increases() {
    for inst in 0..50u64 {
        let mut rng = labeled_rng(inst, "gbt-instance");
        let n = rng.random_range(5..60);
        let (frame, y) = random_frame(inst, n);
        for rate in [0.1, 0.5, 1.0] {
            let cfg = GbtConfig {
                n_stages: 30,
                learning_rate: rate,
                tree: TreeConfig::with_max_depth(rng.random_range(1..4)),
                seed: inst,
            };
            let model = fit_gbt(&frame, &y, &cfg).unwrap();
            let mean = y.iter().sum::<f64>() / n as f64;
            let j0: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            let mut prev = j0;
            for &j in &model.stage_losses {
                assert!(
                    j <= prev + 1e-9 * (1.0 + prev),
                    "instance {inst}, rate {rate}: {j} > {prev}"
                );
                prev = j;
            }
        }
    }
}

#[test]
fn boosting_fits_separable_rows_exactly() {
    let frame = FeatureFrame::from_rows(
        &["x"],
        &[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0], vec![6.0]],
    )
    .unwrap();
    let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
    let cfg = GbtConfig {
        n_stages: 3,
        learning_rate: 1.0,
        tree: TreeConfig::default(),
        seed: 0,
    };
    let model = fit_gbt(&frame, &y, &cfg).unwrap();
    assert!(rmse(&model.predict(&frame).unwrap(), &y).unwrap() < 1e-9);
}

#[test]
fn forest_trees_differ_and_refits_are_identical() {
    let (frame, y) = random_frame(3, 200);
    let cfg = ForestConfig {
        n_trees: 20,
        seed: 99,
        ..Default::default()
    };
    let forest = fit_forest(&frame, &y, &cfg).unwrap();
    let distinct = forest.trees.iter().skip(1).filter(|t| **t != forest.trees[0]).count();
    assert!(distinct > 0);
    assert_eq!(forest, fit_forest(&frame, &y, &cfg).unwrap());
    let other = fit_forest(&frame, &y, &ForestConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(forest.trees, other.trees);
    let oob = forest.oob_rmse().unwrap();
    assert!(oob.is_finite() && oob > 0.0);
}
