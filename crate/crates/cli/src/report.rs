//! Reports. The JSON and CSV forms hold only seed-determined values, so
//! re-running a configuration reproduces them byte for byte; wall times go
//! to the aligned table and to a separate timings file.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Metric;
use crate::run::{CellOutcome, CellResult, Status};
use crate::{CliError, Result};

pub const REPORT_SCHEMA: &str = "hdmn-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Average {
    pub cells: usize,
    pub failed: usize,
    pub goal_accuracy: Option<f64>,
    pub route_fp: Option<f64>,
    pub route_fn: Option<f64>,
    pub rejection_rate: Option<f64>,
    pub ess: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub metrics: Vec<Metric>,
    pub rows: Vec<CellResult>,
    pub average: Average,
}

fn mean(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl Report {
    pub fn new(outcomes: &[CellOutcome], metrics: Vec<Metric>) -> Self {
        let rows: Vec<CellResult> = outcomes.iter().map(|o| o.result.clone()).collect();
        let average = Average {
            cells: rows.len(),
            failed: rows.iter().filter(|r| r.status == Status::Failed).count(),
            goal_accuracy: mean(rows.iter().map(|r| r.goal_accuracy)),
            route_fp: mean(rows.iter().map(|r| r.route_fp)),
            route_fn: mean(rows.iter().map(|r| r.route_fn)),
            rejection_rate: mean(rows.iter().map(|r| r.rejection_rate)),
            ess: mean(rows.iter().map(|r| r.ess)),
        };
        Report { schema: REPORT_SCHEMA.into(), metrics, rows, average }
    }

    /// Parse a JSON report, rejecting anything off-schema.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text).map_err(|e| CliError::Format(e.to_string()))?;
        if r.schema != REPORT_SCHEMA {
            return Err(CliError::Format(format!("unknown report schema `{}`", r.schema)));
        }
        Ok(r)
    }

    pub fn failed(&self) -> usize {
        self.average.failed
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    fn columns(&self) -> Vec<Metric> {
        self.metrics.iter().copied().filter(|&m| m != Metric::Time).collect()
    }

    pub fn to_csv(&self) -> String {
        let cols = self.columns();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["scenario", "model", "inference", "seed", "status"];
        header.extend(cols.iter().map(|m| m.header()));
        header.push("error");
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.scenario.clone(),
                r.variant.to_string(),
                r.algorithm.clone(),
                r.seed.to_string(),
                status_str(r.status).into(),
            ];
            rec.extend(cols.iter().map(|&m| opt(metric_of(r, m))));
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec).expect("in-memory write");
        }
        let a = &self.average;
        let mut rec = vec!["Average".to_string(), String::new(), String::new(), String::new(), format!("{}/{}", a.cells - a.failed, a.cells)];
        rec.extend(cols.iter().map(|&m| opt(average_of(a, m))));
        rec.push(String::new());
        w.write_record(&rec).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Aligned text in the layout of the goal-prediction tables.
    pub fn to_table(&self, times: &[f64]) -> String {
        let mut header: Vec<String> = ["Scenario", "Model", "Inference", "Seed"].iter().map(|s| s.to_string()).collect();
        let show_time = self.metrics.contains(&Metric::Time);
        if show_time {
            header.push("Time".into());
        }
        let cols = self.columns();
        header.extend(cols.iter().map(|m| column_title(*m).to_string()));
        header.push("Status".into());
        let mut rows = vec![header];
        for (k, r) in self.rows.iter().enumerate() {
            let mut row = vec![r.scenario.clone(), r.variant.to_string(), r.algorithm.clone(), r.seed.to_string()];
            if show_time {
                row.push(times.get(k).map_or("-".into(), |t| format!("{t:.3}")));
            }
            row.extend(cols.iter().map(|&m| fixed(metric_of(r, m))));
            row.push(if r.status == Status::Ok { "ok".into() } else { "FAILED".into() });
            rows.push(row);
        }
        let a = &self.average;
        let mut avg = vec!["Average".to_string(), String::new(), String::new(), String::new()];
        if show_time {
            avg.push(mean(times.iter().map(|&t| Some(t))).map_or("-".into(), |t| format!("{t:.3}")));
        }
        avg.extend(cols.iter().map(|&m| fixed(average_of(a, m))));
        avg.push(format!("{}/{} ok", a.cells - a.failed, a.cells));
        rows.push(avg);

        let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (k, r) in rows.iter().enumerate() {
            let cells: Vec<String> = r.iter().zip(&widths).map(|(s, &w)| format!("{s:<w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if k == 0 || k == rows.len() - 2 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        for r in self.rows.iter().filter(|r| r.status == Status::Failed) {
            let _ = writeln!(
                out,
                "FAILED {} {} {} seed {}: {}",
                r.scenario,
                r.variant,
                r.algorithm,
                r.seed,
                r.error.as_deref().unwrap_or("")
            );
        }
        out
    }

    pub fn timings_csv(&self, times: &[f64]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scenario", "model", "inference", "seed", "time_s"]).expect("in-memory write");
        for (r, t) in self.rows.iter().zip(times) {
            w.write_record([r.scenario.clone(), r.variant.to_string(), r.algorithm.clone(), r.seed.to_string(), t.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Write `report.json`, `report.csv`, `report.txt` and `timings.csv`.
    pub fn write_dir(&self, dir: &Path, times: &[f64]) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.into(), e))?;
        for (name, body) in [
            ("report.json", self.to_json()),
            ("report.csv", self.to_csv()),
            ("report.txt", self.to_table(times)),
            ("timings.csv", self.timings_csv(times)),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| CliError::Io(p, e))?;
        }
        Ok(())
    }
}

fn status_str(s: Status) -> &'static str {
    match s {
        Status::Ok => "ok",
        Status::Failed => "FAILED",
    }
}

fn column_title(m: Metric) -> &'static str {
    match m {
        Metric::GoalAccuracy => "Accuracy",
        Metric::RouteFp => "FP",
        Metric::RouteFn => "FN",
        Metric::RejectionRate => "Rejection",
        Metric::Ess => "ESS",
        Metric::Time => "Time",
    }
}

fn metric_of(r: &CellResult, m: Metric) -> Option<f64> {
    match m {
        Metric::GoalAccuracy => r.goal_accuracy,
        Metric::RouteFp => r.route_fp,
        Metric::RouteFn => r.route_fn,
        Metric::RejectionRate => r.rejection_rate,
        Metric::Ess => r.ess,
        Metric::Time => None,
    }
}

fn average_of(a: &Average, m: Metric) -> Option<f64> {
    match m {
        Metric::GoalAccuracy => a.goal_accuracy,
        Metric::RouteFp => a.route_fp,
        Metric::RouteFn => a.route_fn,
        Metric::RejectionRate => a.rejection_rate,
        Metric::Ess => a.ess,
        Metric::Time => None,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

fn fixed(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.3}"))
}
