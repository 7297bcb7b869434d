//! Elastic-net linear regression fitted by cyclic coordinate descent.
//!
//! The minimized objective is
//!
//! ```text
//! (1/n)·‖y − Xβ − b‖² + λ·(l1_ratio·‖β‖₁ + (1 − l1_ratio)·‖β‖₂²)
//! ```
//!
//! with an unpenalized intercept `b`. When `standardize` is on, the penalty
//! acts on coefficients of the standardized columns.

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureDesc, FeatureFrame, FeatureValues};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElasticNetConfig {
    pub lambda: f64,
    pub l1_ratio: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub standardize: bool,
    pub fit_intercept: bool,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        ElasticNetConfig {
            lambda: 0.3,
            l1_ratio: 0.8,
            max_iters: 10_000,
            tol: 1e-7,
            standardize: true,
            fit_intercept: true,
        }
    }
}

impl ElasticNetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::Config(format!(
                "l1_ratio must lie in [0, 1], got {}",
                self.l1_ratio
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Plain least squares (λ = 0).
    pub fn ols() -> Self {
        ElasticNetConfig {
            lambda: 0.0,
            ..Default::default()
        }
    }
}

/// Dense column-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn from_columns(n_rows: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(c) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(Error::LengthMismatch(format!(
                "column of length {} in {n_rows}-row matrix",
                c.len()
            )));
        }
        Ok(DesignMatrix { n_rows, columns })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::LengthMismatch("ragged rows".into()));
        }
        let columns = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Ok(DesignMatrix {
            n_rows: rows.len(),
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EncodedColumn {
    Numeric { source: String },
    Indicator { source: String, level: String },
}

/// Mapping from frame features to design-matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub inputs: Vec<FeatureDesc>,
    pub columns: Vec<EncodedColumn>,
}

impl FeatureEncoding {
    /// Builds the design matrix for `frame`. Categories not seen at encoding
    /// time produce all-zero indicators.
    pub fn transform(&self, frame: &FeatureFrame) -> Result<DesignMatrix> {
        let positions = frame.resolve(&self.inputs)?;
        let n = frame.n_rows();
        let mut columns = Vec::with_capacity(self.columns.len());
        for col in &self.columns {
            let (source, level) = match col {
                EncodedColumn::Numeric { source } => (source, None),
                EncodedColumn::Indicator { source, level } => (source, Some(level)),
            };
            let input = self
                .inputs
                .iter()
                .position(|d| &d.name == source)
                .expect("encoding inputs are consistent");
            let feature = &frame.features()[positions[input]];
            let values = match (&feature.values, level) {
                (FeatureValues::Numeric(v), None) => v.clone(),
                (FeatureValues::Categorical { codes, levels }, Some(level)) => {
                    match levels.iter().position(|l| l == level) {
                        Some(code) => codes.iter().map(|&c| f64::from(u8::from(c as usize == code))).collect(),
                        None => vec![0.0; n],
                    }
                }
                _ => unreachable!("resolve checked feature kinds"),
            };
            columns.push(values);
        }
        DesignMatrix::from_columns(n, columns)
    }
}

/// One-hot encodes categorical features (one indicator per category present
/// in `frame`, first-seen order) and passes numeric features through.
pub fn encode_features(frame: &FeatureFrame) -> (DesignMatrix, FeatureEncoding) {
    let mut columns = Vec::new();
    for feature in frame.features() {
        match &feature.values {
            FeatureValues::Numeric(_) => columns.push(EncodedColumn::Numeric {
                source: feature.name.clone(),
            }),
            FeatureValues::Categorical { codes, levels } => {
                let mut seen = vec![false; levels.len()];
                for &c in codes {
                    if !std::mem::replace(&mut seen[c as usize], true) {
                        columns.push(EncodedColumn::Indicator {
                            source: feature.name.clone(),
                            level: levels[c as usize].clone(),
                        });
                    }
                }
            }
        }
    }
    let encoding = FeatureEncoding {
        inputs: frame.descs(),
        columns,
    };
    let matrix = encoding.transform(frame).expect("frame matches its own encoding");
    (matrix, encoding)
}

/// Coefficients in the (possibly standardized) working space.
///
/// A prediction is `intercept + Σ_j beta_j · (x_j − centers_j) / scales_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
}

impl LinearFit {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .beta
                .iter()
                .zip(row)
                .zip(self.centers.iter().zip(&self.scales))
                .map(|((b, x), (c, s))| b * (x - c) / s)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.beta.len() {
            return Err(Error::LengthMismatch(format!(
                "matrix has {} columns, model has {} coefficients",
                x.n_cols(),
                self.beta.len()
            )));
        }
        let mut out = vec![self.intercept; x.n_rows()];
        for (j, b) in self.beta.iter().enumerate() {
            let (c, s) = (self.centers[j], self.scales[j]);
            for (o, v) in out.iter_mut().zip(x.column(j)) {
                *o += b * (v - c) / s;
            }
        }
        Ok(out)
    }

    /// Coefficients and intercept on the raw column scale.
    pub fn original_scale(&self) -> (Vec<f64>, f64) {
        let beta: Vec<f64> = self.beta.iter().zip(&self.scales).map(|(b, s)| b / s).collect();
        let intercept = self.intercept - beta.iter().zip(&self.centers).map(|(b, c)| b * c).sum::<f64>();
        (beta, intercept)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Objective value at the returned coefficients (working space).
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `y_i − ŷ_i` per training row.
    pub residuals: Vec<f64>,
    /// Objective after each coordinate sweep.
    pub objective_trace: Vec<f64>,
}

/// Elastic-net objective of `(beta, intercept)` on raw `x`.
pub fn elastic_net_objective(
    x: &DesignMatrix,
    y: &[f64],
    beta: &[f64],
    intercept: f64,
    lambda: f64,
    l1_ratio: f64,
) -> f64 {
    let n = x.n_rows() as f64;
    let mut pred = vec![intercept; x.n_rows()];
    for (j, b) in beta.iter().enumerate() {
        for (p, v) in pred.iter_mut().zip(x.column(j)) {
            *p += b * v;
        }
    }
    let sse: f64 = pred.iter().zip(y).map(|(p, t)| (t - p).powi(2)).sum();
    sse / n + penalty(beta, lambda, l1_ratio)
}

fn penalty(beta: &[f64], lambda: f64, l1_ratio: f64) -> f64 {
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    lambda * (l1_ratio * l1 + (1.0 - l1_ratio) * l2)
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub fn fit_elastic_net(x: &DesignMatrix, y: &[f64], cfg: &ElasticNetConfig) -> Result<(LinearFit, TrainReport)> {
    cfg.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::Empty("cannot fit a linear model on zero rows".into()));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch(format!("{} targets for {n} rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets".into()));
    }
    if x.columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix".into()));
    }
    let nf = n as f64;
    let p = x.n_cols();

    let mut centers = vec![0.0; p];
    let mut scales = vec![1.0; p];
    let mut work: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let col = x.column(j);
        if cfg.fit_intercept {
            centers[j] = col.iter().sum::<f64>() / nf;
        }
        if cfg.standardize {
            let ms = col.iter().map(|v| (v - centers[j]).powi(2)).sum::<f64>() / nf;
            if ms > 0.0 {
                scales[j] = ms.sqrt();
            }
        }
        work.push(col.iter().map(|v| (v - centers[j]) / scales[j]).collect());
    }
    let curvature: Vec<f64> = work.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf).collect();

    let intercept = if cfg.fit_intercept {
        y.iter().sum::<f64>() / nf
    } else {
        0.0
    };
    let mut residuals: Vec<f64> = y.iter().map(|v| v - intercept).collect();
    let mut beta = vec![0.0; p];
    let l1 = cfg.lambda * cfg.l1_ratio / 2.0;
    let l2 = cfg.lambda * (1.0 - cfg.l1_ratio);

    let objective =
        |r: &[f64], b: &[f64]| r.iter().map(|v| v * v).sum::<f64>() / nf + penalty(b, cfg.lambda, cfg.l1_ratio);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let denom = curvature[j] + l2;
            let old = beta[j];
            let new = if denom > 0.0 {
                let rho = work[j].iter().zip(&residuals).map(|(a, r)| a * r).sum::<f64>() / nf + curvature[j] * old;
                soft_threshold(rho, l1) / denom
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                for (r, a) in residuals.iter_mut().zip(&work[j]) {
                    *r -= a * delta;
                }
                beta[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        trace.push(objective(&residuals, &beta));
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }

    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("fitted coefficients".into()));
    }
    let fit = LinearFit {
        beta,
        intercept,
        centers,
        scales,
    };
    // recompute residuals from scratch to avoid drift from the incremental updates
    let pred = fit.predict(x)?;
    let residuals: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
    let report = TrainReport {
        final_loss: objective(&residuals, &fit.beta),
        iterations,
        converged,
        residuals,
        objective_trace: trace,
    };
    Ok((fit, report))
}

/// Elastic-net model over a [`FeatureFrame`], including its encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub encoding: FeatureEncoding,
    pub fit: LinearFit,
}

impl LinearModel {
    pub fn fit(frame: &FeatureFrame, y: &[f64], cfg: &ElasticNetConfig) -> Result<(LinearModel, TrainReport)> {
        let (x, encoding) = encode_features(frame);
        let (fit, report) = fit_elastic_net(&x, y, cfg)?;
        Ok((LinearModel { encoding, fit }, report))
    }

    pub fn predict(&self, frame: &FeatureFrame) -> Result<Vec<f64>> {
        let x = self.encoding.transform(frame)?;
        self.fit.predict(&x)
    }
}
