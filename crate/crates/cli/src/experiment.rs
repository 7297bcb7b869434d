//! Table layout, protocol execution and statistical verdicts for `run`.

use std::fmt::Write as _;

use anyhow::Result;
use demandstack::dataset::{Dataset, SplitIndices};
use demandstack::evalstat::{
    anova, paired_t_test, run_protocol, t_test, AnovaResult, ProtocolConfig, ProtocolEntry, RunMatrix, TTestResult,
};
use demandstack::model::{LearnerConfig, LearnerKind};
use demandstack::stacking::LearnerSpec;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, LearnerGrids, StatsConfig, TTestVariant};

pub fn learner_spec(kind: LearnerKind, grids: &LearnerGrids) -> LearnerSpec {
    let grid = match kind {
        LearnerKind::Linear => grids.lr.iter().cloned().map(LearnerConfig::Linear).collect(),
        LearnerKind::Tree => grids.dt.iter().cloned().map(LearnerConfig::Tree).collect(),
        LearnerKind::Forest => grids.rf.iter().cloned().map(LearnerConfig::Forest).collect(),
        LearnerKind::Gbt => grids.gbt.iter().cloned().map(LearnerConfig::Gbt).collect(),
        LearnerKind::Passthrough => Vec::new(),
    };
    LearnerSpec::new(kind.abbreviation(), grid)
}

fn combo_label(kinds: &[LearnerKind]) -> String {
    kinds.iter().map(|k| k.abbreviation()).collect::<Vec<_>>().join("+")
}

/// Where a table row takes its numbers from.
#[derive(Debug, Clone, PartialEq)]
pub enum RowSource {
    Column(String),
    /// The lowest-mean successful column among these.
    BestOf(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRowSpec {
    pub label: String,
    pub source: RowSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub number: usize,
    pub title: String,
    pub rows: Vec<TableRowSpec>,
}

/// Protocol entries (one per distinct model) and the four tables over them.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub entries: Vec<ProtocolEntry>,
    pub tables: Vec<TableSpec>,
}

impl Plan {
    pub fn new(cfg: &ExperimentConfig) -> Plan {
        let mut plan = Plan {
            entries: Vec::new(),
            tables: Vec::new(),
        };
        let t = &cfg.tables;
        let g = &cfg.learners;

        let mut sweep = Vec::new();
        for &level2 in &t.level2 {
            let name = format!("SG({level2})");
            sweep.push(plan.stacked(name, &t.full, level2, g));
        }
        let level1: Vec<String> = sweep.iter().map(|r| r.label.clone()).collect();
        plan.tables.push(TableSpec {
            number: 1,
            title: format!("SG over {} by second-level learner", combo_label(&t.full)),
            rows: sweep,
        });

        let mut singles: Vec<TableRowSpec> = t.singles.iter().map(|&k| plan.single(k, g)).collect();
        singles.push(TableRowSpec {
            label: "best SG".into(),
            source: RowSource::BestOf(level1),
        });
        plan.tables.push(TableSpec {
            number: 2,
            title: "Single learners and the best SG".into(),
            rows: singles,
        });

        for (number, combos, what) in [(3, &t.binaries, "binary"), (4, &t.triples, "triple")] {
            let rows = combos
                .iter()
                .map(|c| {
                    let name = format!("SG({}): {}", t.combo_level2, combo_label(c));
                    let mut row = plan.stacked(name, c, t.combo_level2, g);
                    row.label = combo_label(c);
                    row
                })
                .collect();
            plan.tables.push(TableSpec {
                number,
                title: format!("SG({}) with {what} combinations", t.combo_level2),
                rows,
            });
        }
        plan
    }

    fn stacked(&mut self, name: String, first: &[LearnerKind], second: LearnerKind, g: &LearnerGrids) -> TableRowSpec {
        let mut first: Vec<LearnerSpec> = first.iter().map(|&k| learner_spec(k, g)).collect();
        first.sort_by(|a, b| a.label.cmp(&b.label));
        let second = learner_spec(second, g);
        let existing = self.entries.iter().find_map(|e| match e {
            ProtocolEntry::Stacked {
                name: n,
                first: f,
                second: s,
            } if *f == first && *s == second => Some(n.clone()),
            _ => None,
        });
        let column = existing.unwrap_or_else(|| {
            self.entries.push(ProtocolEntry::Stacked {
                name: name.clone(),
                first,
                second,
            });
            name.clone()
        });
        TableRowSpec {
            label: name,
            source: RowSource::Column(column),
        }
    }

    fn single(&mut self, kind: LearnerKind, g: &LearnerGrids) -> TableRowSpec {
        let name = kind.abbreviation().to_string();
        if !self.entries.iter().any(|e| e.name() == name) {
            self.entries.push(ProtocolEntry::Single {
                name: name.clone(),
                spec: learner_spec(kind, g),
            });
        }
        TableRowSpec {
            label: name.clone(),
            source: RowSource::Column(name),
        }
    }

    pub fn is_stacked(&self, column: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.name() == column && matches!(e, ProtocolEntry::Stacked { .. }))
    }
}

/// Per-repetition RMSEs of one entry, or why it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnResult {
    pub name: String,
    pub outcome: Result<Vec<f64>, String>,
}

/// Runs all entries together; if that fails, runs each alone so the
/// failing ones can be reported next to the rest.
pub fn run_all(d: &Dataset, split: &SplitIndices, plan: &Plan, protocol: &ProtocolConfig) -> Vec<ColumnResult> {
    match run_protocol(d, split, &plan.entries, protocol) {
        Ok(matrix) => matrix
            .columns
            .iter()
            .map(|c| ColumnResult {
                name: c.clone(),
                outcome: Ok(matrix.column(c).expect("column exists")),
            })
            .collect(),
        Err(_) => plan
            .entries
            .iter()
            .map(|e| ColumnResult {
                name: e.name().to_string(),
                outcome: run_protocol(d, split, std::slice::from_ref(e), protocol)
                    .map(|m| m.column(e.name()).expect("column exists"))
                    .map_err(|err| err.to_string()),
            })
            .collect(),
    }
}

/// The matrix of the columns that succeeded.
pub fn succeeded_matrix(results: &[ColumnResult]) -> RunMatrix {
    let ok: Vec<(&str, &Vec<f64>)> = results
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|v| (r.name.as_str(), v)))
        .collect();
    let reps = ok.first().map_or(0, |(_, v)| v.len());
    RunMatrix {
        columns: ok.iter().map(|(n, _)| n.to_string()).collect(),
        rows: (0..reps).map(|r| ok.iter().map(|(_, v)| v[r]).collect()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean_rmse: Option<f64>,
    pub std_rmse: Option<f64>,
    pub min_rmse: Option<f64>,
    pub max_rmse: Option<f64>,
    pub status: String,
}

impl ColumnStats {
    fn of(label: &str, r: &ColumnResult) -> ColumnStats {
        match &r.outcome {
            Ok(v) => {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                ColumnStats {
                    name: label.to_string(),
                    mean_rmse: Some(mean),
                    std_rmse: Some(sd),
                    min_rmse: v.iter().copied().reduce(f64::min),
                    max_rmse: v.iter().copied().reduce(f64::max),
                    status: "ok".into(),
                }
            }
            Err(e) => ColumnStats {
                name: label.to_string(),
                mean_rmse: None,
                std_rmse: None,
                min_rmse: None,
                max_rmse: None,
                status: format!("FAILED: {e}"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub number: usize,
    pub title: String,
    pub rows: Vec<ColumnStats>,
}

fn mean_of(r: &ColumnResult) -> Option<f64> {
    r.outcome.as_ref().ok().map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

fn best_of<'a>(results: &'a [ColumnResult], names: &[String]) -> Option<&'a ColumnResult> {
    let mut best: Option<(&ColumnResult, f64)> = None;
    for name in names {
        if let Some(r) = results.iter().find(|r| &r.name == name) {
            if let Some(m) = mean_of(r) {
                if best.is_none_or(|(_, b)| m < b) {
                    best = Some((r, m));
                }
            }
        }
    }
    best.map(|(r, _)| r)
}

pub fn build_tables(plan: &Plan, results: &[ColumnResult]) -> Vec<TableResult> {
    plan.tables
        .iter()
        .map(|t| TableResult {
            number: t.number,
            title: t.title.clone(),
            rows: t
                .rows
                .iter()
                .map(|row| match &row.source {
                    RowSource::Column(c) => {
                        let r = results
                            .iter()
                            .find(|r| &r.name == c)
                            .expect("every column has a result");
                        ColumnStats::of(&row.label, r)
                    }
                    RowSource::BestOf(names) => match best_of(results, names) {
                        Some(r) => ColumnStats::of(&r.name, r),
                        None => ColumnStats::of(
                            &row.label,
                            &ColumnResult {
                                name: row.label.clone(),
                                outcome: Err("no SG combination succeeded".into()),
                            },
                        ),
                    },
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaVerdict {
    pub grouping: String,
    pub members: Vec<String>,
    pub result: Option<AnovaResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestVerdict {
    pub variant: TTestVariant,
    pub alpha: f64,
    pub best_single: Option<String>,
    pub best_stacked: Option<String>,
    pub result: Option<TTestResult>,
    pub error: Option<String>,
}

fn anova_over(grouping: &str, names: &[String], results: &[ColumnResult]) -> AnovaVerdict {
    let mut members = Vec::new();
    let mut groups = Vec::new();
    for name in names {
        if members.contains(name) {
            continue;
        }
        if let Some(Ok(v)) = results.iter().find(|r| &r.name == name).map(|r| &r.outcome) {
            members.push(name.clone());
            groups.push(v.clone());
        }
    }
    let (result, error) = match anova(&groups) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    AnovaVerdict {
        grouping: grouping.into(),
        members,
        result,
        error,
    }
}

/// ANOVA across every model, across the single learners (first level),
/// across the second-level sweep, and within each combination table.
pub fn anova_verdicts(plan: &Plan, results: &[ColumnResult]) -> Vec<AnovaVerdict> {
    let columns_of = |number: usize| -> Vec<String> {
        plan.tables
            .iter()
            .filter(|t| t.number == number)
            .flat_map(|t| &t.rows)
            .filter_map(|r| match &r.source {
                RowSource::Column(c) => Some(c.clone()),
                RowSource::BestOf(_) => None,
            })
            .collect()
    };
    let all: Vec<String> = plan.entries.iter().map(|e| e.name().to_string()).collect();
    vec![
        anova_over("all models", &all, results),
        anova_over("single learners", &columns_of(2), results),
        anova_over("second-level sweep", &columns_of(1), results),
        anova_over("binary combinations", &columns_of(3), results),
        anova_over("triple combinations", &columns_of(4), results),
    ]
}

/// Best single learner against the best SG combination.
pub fn t_test_verdict(plan: &Plan, results: &[ColumnResult], stats: &StatsConfig) -> TTestVerdict {
    let (stacked, singles): (Vec<String>, Vec<String>) = plan
        .entries
        .iter()
        .map(|e| e.name().to_string())
        .partition(|n| plan.is_stacked(n));
    let a = best_of(results, &singles);
    let b = best_of(results, &stacked);
    let mut verdict = TTestVerdict {
        variant: stats.t_test,
        alpha: stats.alpha,
        best_single: a.map(|r| r.name.clone()),
        best_stacked: b.map(|r| r.name.clone()),
        result: None,
        error: None,
    };
    match (a, b) {
        (Some(a), Some(b)) => {
            let (x, y) = (
                a.outcome.as_ref().expect("best has values"),
                b.outcome.as_ref().expect("best has values"),
            );
            let r = match stats.t_test {
                TTestVariant::Welch => t_test(x, y, stats.alpha),
                TTestVariant::Paired => paired_t_test(x, y, stats.alpha),
            };
            match r {
                Ok(r) => verdict.result = Some(r),
                Err(e) => verdict.error = Some(e.to_string()),
            }
        }
        _ => verdict.error = Some("needs a successful single learner and a successful SG combination".into()),
    }
    verdict
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn table_csv(t: &TableResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "mean_rmse", "std_rmse", "min_rmse", "max_rmse", "status"])?;
    for r in &t.rows {
        w.write_record([
            r.name.clone(),
            opt(r.mean_rmse),
            opt(r.std_rmse),
            opt(r.min_rmse),
            opt(r.max_rmse),
            r.status.clone(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn table_text(t: &TableResult) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    let header = ["Model", "RMSE", "Std", "Min", "Max", "Status"];
    let rows: Vec<[String; 6]> = t
        .rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                fmt(r.mean_rmse),
                fmt(r.std_rmse),
                fmt(r.min_rmse),
                fmt(r.max_rmse),
                r.status.clone(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..6)
        .map(|j| {
            rows.iter()
                .map(|r| r[j].len())
                .chain([header[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = format!("Table {}: {}\n", t.number, t.title);
    let line = |cells: &[&str]| {
        let mut s = String::new();
        for (j, c) in cells.iter().enumerate() {
            if j == 0 {
                let _ = write!(s, "{c:<w$}", w = widths[j]);
            } else if j == 5 {
                let _ = write!(s, "  {c}");
            } else {
                let _ = write!(s, "  {c:>w$}", w = widths[j]);
            }
        }
        s.trim_end().to_string()
    };
    out.push_str(&line(&header));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 10));
    out.push('\n');
    for r in &rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        out.push_str(&line(&cells));
        out.push('\n');
    }
    out
}

pub fn verdict_text(anovas: &[AnovaVerdict], t: &TTestVerdict) -> String {
    let mut out = String::from("Significance tests\n");
    for a in anovas {
        match (&a.result, &a.error) {
            (Some(r), _) => {
                let _ = writeln!(
                    out,
                    "ANOVA, {}: F = {:.4} (df {}, {}), p = {:.4e}; {}",
                    a.grouping,
                    r.f_statistic,
                    r.df_between,
                    r.df_within,
                    r.p_value,
                    if r.reject_at_005 {
                        "means differ at the 5% level"
                    } else {
                        "no significant difference at the 5% level"
                    }
                );
            }
            (None, err) => {
                let _ = writeln!(
                    out,
                    "ANOVA, {}: not computed ({})",
                    a.grouping,
                    err.as_deref().unwrap_or("unknown")
                );
            }
        }
    }
    let variant = match t.variant {
        TTestVariant::Welch => "Welch",
        TTestVariant::Paired => "paired",
    };
    let pair = format!(
        "{} vs {}",
        t.best_single.as_deref().unwrap_or("-"),
        t.best_stacked.as_deref().unwrap_or("-")
    );
    match (&t.result, &t.error) {
        (Some(r), _) => {
            let _ = writeln!(
                out,
                "{variant} t-test, {pair}: t = {:.4}, df = {:.2}, p = {:.4e}; {} at alpha = {}",
                r.t_statistic,
                r.df,
                r.p_value,
                if r.reject_at_005 {
                    "significant"
                } else {
                    "not significant"
                },
                t.alpha
            );
        }
        (None, err) => {
            let _ = writeln!(
                out,
                "{variant} t-test, {pair}: not computed ({})",
                err.as_deref().unwrap_or("unknown")
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_has_table_shapes() {
        let plan = Plan::new(&ExperimentConfig::default());
        let sizes: Vec<usize> = plan.tables.iter().map(|t| t.rows.len()).collect();
        assert_eq!(sizes, vec![4, 5, 6, 4]);
        // 4 sweep + 4 singles + 6 pairs + 4 triples, no duplicates.
        assert_eq!(plan.entries.len(), 18);
        let labels: Vec<&str> = plan.tables[2].rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["GBT+DT", "GBT+LR", "LR+DT", "DT+RF", "GBT+RF", "LR+RF"]);
    }

    #[test]
    fn identical_combinations_share_a_column() {
        let mut cfg = ExperimentConfig::default();
        cfg.tables.triples = vec![vec![LearnerKind::Tree, LearnerKind::Linear, LearnerKind::Gbt]];
        cfg.tables.binaries = vec![];
        cfg.tables.full = vec![LearnerKind::Gbt, LearnerKind::Tree, LearnerKind::Linear];
        let plan = Plan::new(&cfg);
        let triple = &plan.tables[3].rows[0];
        assert_eq!(triple.source, RowSource::Column("SG(LR)".into()));
    }

    #[test]
    fn best_row_and_failure_marker() {
        let mut cfg = ExperimentConfig::default();
        cfg.tables.binaries = vec![];
        cfg.tables.triples = vec![];
        let plan = Plan::new(&cfg);
        let results: Vec<ColumnResult> = plan
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| ColumnResult {
                name: e.name().into(),
                outcome: if e.name() == "SG(RF)" {
                    Err("boom".into())
                } else {
                    Ok(vec![i as f64 + 1.0, i as f64 + 1.5])
                },
            })
            .collect();
        let tables = build_tables(&plan, &results);
        assert_eq!(tables[0].rows[2].status, "FAILED: boom");
        assert_eq!(tables[1].rows[4].name, "SG(DT)");
        let csv = table_csv(&tables[0]).unwrap();
        assert!(csv.contains("SG(RF),,,,,FAILED: boom"));
        let t = t_test_verdict(&plan, &results, &StatsConfig::default());
        assert_eq!(t.best_single.as_deref(), Some("DT"));
        assert_eq!(t.best_stacked.as_deref(), Some("SG(DT)"));
    }
}
