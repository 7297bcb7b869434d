//! The four subcommands. Each returns the text it would print.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use demandstack::dataset::{
    expand_to_sales, generate_synthetic, split, view_events, write_csv, Dataset, Feature, FeatureFrame, FeatureKind,
    PreprocessParams, SchemaConfig,
};
use demandstack::evalstat::{fit_entry, ProtocolConfig};
use demandstack::model::ModelFile;
use demandstack::seed::derive_seed;
use serde::{Deserialize, Serialize};

use crate::config::{CsvSection, DataConfig, ExperimentConfig};
use crate::experiment::{
    anova_verdicts, build_tables, run_all, succeeded_matrix, t_test_verdict, table_csv, table_text, verdict_text,
    AnovaVerdict, Plan, TTestVerdict, TableResult,
};
use crate::output::{file_stem, write_atomic};
use crate::pipeline::{self, PreprocessSummary};

fn csv_bytes(d: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(d, &mut buf)?;
    Ok(buf)
}

/// Writes a synthetic weekly table, its sale-level expansion with view
/// events, the schema configs for both, and an experiment config that runs
/// the sale-level data through the full pipeline.
pub fn cmd_synth(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let section = cfg.data.synthetic.clone().unwrap_or_default();
    let data = generate_synthetic(&section.spec(cfg.seed))?;
    let weekly = &data.dataset;
    let sales = expand_to_sales(weekly)?;
    let (purchases, abandoned) = view_events(weekly)?;

    let weekly_schema = SchemaConfig {
        columns: weekly.schema().clone(),
        drop: Vec::new(),
        preprocess: section.preprocess.clone(),
    };
    let sales_schema = SchemaConfig {
        columns: sales.schema().clone(),
        drop: Vec::new(),
        preprocess: PreprocessParams::default(),
    };
    let mut pipeline_cfg = cfg.clone();
    pipeline_cfg.data = DataConfig {
        synthetic: None,
        csv: Some(CsvSection {
            path: "sales.csv".into(),
            schema: "sales_schema.toml".into(),
            views: vec!["purchases.csv".into(), "abandoned.csv".into()],
            preprocess: true,
        }),
    };
    pipeline_cfg.output.dir = "results".into();

    let files: Vec<(&str, Vec<u8>)> = vec![
        ("weekly.csv", csv_bytes(weekly)?),
        ("schema.toml", weekly_schema.to_toml_string()?.into_bytes()),
        ("sales.csv", csv_bytes(&sales)?),
        ("sales_schema.toml", sales_schema.to_toml_string()?.into_bytes()),
        ("purchases.csv", csv_bytes(&purchases)?),
        ("abandoned.csv", csv_bytes(&abandoned)?),
        ("experiment.toml", toml::to_string_pretty(&pipeline_cfg)?.into_bytes()),
    ];
    for (name, bytes) in &files {
        write_atomic(&out.join(name), bytes)?;
    }
    Ok(format!(
        "wrote {} weekly rows, {} sale rows and {} view events to {}\n",
        weekly.n_rows(),
        sales.n_rows(),
        purchases.n_rows() + abandoned.n_rows(),
        out.display()
    ))
}

/// Loads and preprocesses the configured data and writes
/// `processed.csv`, `processed_schema.toml` and `preprocess_summary.json`.
pub fn cmd_preprocess(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let prepared = pipeline::load(&cfg.data, cfg.seed)?;
    write_atomic(&out.join("processed.csv"), &csv_bytes(&prepared.dataset)?)?;
    write_atomic(
        &out.join("processed_schema.toml"),
        prepared.schema.to_toml_string()?.as_bytes(),
    )?;
    write_atomic(
        &out.join("preprocess_summary.json"),
        serde_json::to_string_pretty(&prepared.summary)?.as_bytes(),
    )?;
    Ok(prepared.summary.to_text())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub name: String,
    pub file: Option<String>,
    pub error: Option<String>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub rows: usize,
    pub split: SplitSizes,
    pub repetitions: usize,
    pub preprocess: PreprocessSummary,
    pub tables: Vec<TableResult>,
    pub anova: Vec<AnovaVerdict>,
    pub t_test: TTestVerdict,
    pub models: Vec<ModelArtifact>,
}

/// Runs the repeated evaluation and writes the four tables, the run
/// matrix, the statistical verdicts and (optionally) the final models.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let prepared = pipeline::load(&cfg.data, cfg.seed)?;
    let d = &prepared.dataset;
    let split = split(d.n_rows(), cfg.split.fractions, derive_seed(cfg.seed, "split"))?;
    let protocol = ProtocolConfig {
        repetitions: cfg.protocol.repetitions,
        subset_fraction: cfg.protocol.subset_fraction,
        folds: cfg.protocol.folds,
        seed: derive_seed(cfg.seed, "protocol"),
    };
    let plan = Plan::new(cfg);
    let results = run_all(d, &split, &plan, &protocol);
    let tables = build_tables(&plan, &results);
    let anova = anova_verdicts(&plan, &results);
    let t_test = t_test_verdict(&plan, &results, &cfg.stats);

    let mut models = Vec::new();
    let mut model_files = Vec::new();
    if cfg.output.save_models {
        let frame = d.feature_frame()?;
        let y = d.targets()?;
        let target = d.schema().target().name.clone();
        let seed = derive_seed(cfg.seed, "final-models");
        for entry in &plan.entries {
            let name = entry.name().to_string();
            match fit_entry(&frame, &y, &split.train, &split.validation, entry, protocol.folds, seed) {
                Ok(model) => {
                    let file = format!("models/{}.json", file_stem(&name));
                    model_files.push((file.clone(), ModelFile::new(model, target.clone()).to_json()?));
                    models.push(ModelArtifact {
                        name,
                        file: Some(file),
                        error: None,
                    });
                }
                Err(e) => models.push(ModelArtifact {
                    name,
                    file: None,
                    error: Some(format!("{:#}", anyhow::Error::from(e))),
                }),
            }
        }
    }

    let summary = RunSummary {
        seed: cfg.seed,
        rows: d.n_rows(),
        split: SplitSizes {
            train: split.train.len(),
            validation: split.validation.len(),
            test: split.test.len(),
        },
        repetitions: protocol.repetitions,
        preprocess: prepared.summary.clone(),
        tables: tables.clone(),
        anova: anova.clone(),
        t_test: t_test.clone(),
        models,
    };

    let mut report = format!(
        "{} rows (train {}, validation {}, test {}), {} repetitions, seed {}\n\n",
        summary.rows, summary.split.train, summary.split.validation, summary.split.test, summary.repetitions, cfg.seed
    );
    for t in &tables {
        let text = table_text(t);
        write_atomic(&out.join(format!("table{}.csv", t.number)), table_csv(t)?.as_bytes())?;
        write_atomic(&out.join(format!("table{}.txt", t.number)), text.as_bytes())?;
        report.push_str(&text);
        report.push('\n');
    }
    report.push_str(&verdict_text(&anova, &t_test));
    for (file, json) in &model_files {
        write_atomic(&out.join(file), json.as_bytes())?;
    }
    write_atomic(
        &out.join("run_matrix.csv"),
        succeeded_matrix(&results).to_csv().as_bytes(),
    )?;
    write_atomic(
        &out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    write_atomic(&out.join("report.txt"), report.as_bytes())?;
    Ok(report)
}

/// Reads the columns a model needs from a CSV file. Extra columns are ignored.
pub fn read_prediction_input(path: &Path, model: &ModelFile) -> Result<FeatureFrame> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let missing: Vec<&str> = model
        .features
        .iter()
        .filter(|f| !header.contains(&f.name))
        .map(|f| f.name.as_str())
        .collect();
    if !missing.is_empty() {
        bail!(
            "{} is missing column(s) required by the model: {}",
            path.display(),
            missing.join(", ")
        );
    }
    let positions: Vec<usize> = model
        .features
        .iter()
        .map(|f| header.iter().position(|h| *h == f.name).expect("checked above"))
        .collect();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); positions.len()];
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        n += 1;
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        for (j, &pos) in positions.iter().enumerate() {
            cells[j].push(record.get(pos).unwrap_or("").trim().to_string());
            if cells[j][r].is_empty() {
                bail!("column `{}`, data row {}: missing value", model.features[j].name, r + 1);
            }
        }
    }
    let features = model
        .features
        .iter()
        .zip(cells)
        .map(|(desc, values)| match desc.kind {
            FeatureKind::Numeric => values
                .iter()
                .enumerate()
                .map(|(r, v)| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .with_context(|| format!("column `{}`, data row {}: `{v}` is not a number", desc.name, r + 1))
                })
                .collect::<Result<Vec<f64>>>()
                .map(|v| Feature::numeric(desc.name.clone(), v)),
            FeatureKind::Categorical => Ok(Feature::categorical(desc.name.clone(), &values)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureFrame::new(n, features)?)
}

/// Writes one prediction per input row, in input order.
pub fn cmd_predict(model_path: &Path, input: &Path, output: &Path) -> Result<String> {
    let model = ModelFile::load(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    let frame = read_prediction_input(input, &model)?;
    let predictions = if frame.n_rows() == 0 {
        Vec::new()
    } else {
        model.model.predict(&frame)?
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([format!("predicted_{}", model.target)])?;
    for p in &predictions {
        w.write_record([p.to_string()])?;
    }
    write_atomic(output, &w.into_inner()?)?;
    Ok(format!(
        "wrote {} predictions to {}\n",
        predictions.len(),
        output.display()
    ))
}

/// Default location of `predict` output.
pub fn default_predictions_path(out: &Path) -> PathBuf {
    out.join("predictions.csv")
}
