//! Serialized artifacts and their text renderings.
//!
//! Every report carries `config` (the resolved run configuration) and `inputs` (SHA-256
//! of each input file). CSV files repeat both as leading `#` comment lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use fairkg_core::metrics::Group;
use fairkg_core::report::{FairnessReport, ReportConfig};
use serde::{Deserialize, Serialize};

pub const RERANK_FILE: &str = "rerank.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const EXPLANATIONS_FILE: &str = "explanations.txt";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const TABLE_FILE: &str = "table.txt";
pub const SID_CSV: &str = "sid_distribution.csv";
pub const GINI_CSV: &str = "gini_curve.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_CSV: &str = "sweep.csv";

pub const ARTIFACT_SCHEMA: u64 = 1;

/// Input file name → hex SHA-256.
pub type InputHashes = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    /// `Σ` predicted preference of the selected items.
    pub objective: f64,
    /// Constrained quantities, quality first.
    pub values: [f64; 2],
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLists {
    pub user: String,
    pub group: Group,
    pub baseline: Vec<String>,
    pub fair: Vec<String>,
    pub baseline_quality: f64,
    pub fair_quality: f64,
    pub baseline_sid: f64,
    pub fair_sid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankFile {
    pub schema: u64,
    pub config: serde_json::Value,
    pub inputs: InputHashes,
    pub resolved: ReportConfig,
    pub constraints: [String; 2],
    pub baseline: SelectionSummary,
    pub fair: SelectionSummary,
    pub iterations: usize,
    pub kicks: usize,
    pub users: Vec<UserLists>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub user: String,
    pub group: Group,
    pub baseline_ndcg: f64,
    pub fair_ndcg: f64,
    pub baseline_f1: f64,
    pub fair_f1: f64,
    pub baseline_sid: f64,
    pub fair_sid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema: u64,
    pub config: serde_json::Value,
    pub inputs: InputHashes,
    pub baseline: FairnessReport,
    pub fair: FairnessReport,
    pub users: Vec<UserMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub report: FairnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    pub schema: u64,
    pub config: serde_json::Value,
    pub inputs: InputHashes,
    pub baseline: FairnessReport,
    pub rows: Vec<SweepRow>,
}

/// `# config: {...}` and `# inputs: {...}` lines for CSV and text outputs.
pub fn provenance_header(config: &serde_json::Value, inputs: &InputHashes) -> String {
    format!(
        "# config: {}\n# inputs: {}\n",
        serde_json::to_string(config).expect("json value"),
        serde_json::to_string(inputs).expect("string map")
    )
}

const METRIC_COLUMNS: &str = "ndcg_overall,ndcg_inactive,ndcg_active,ndcg_gru,\
f1_overall,f1_inactive,f1_active,f1_gru,iru_ndcg,iru_f1,\
sid_overall,sid_inactive,sid_active,gedu,iedu,proxy_gru,proxy_iru,objective,feasible";

fn metric_cells(r: &FairnessReport) -> String {
    let v = [
        r.ndcg.overall,
        r.ndcg.inactive,
        r.ndcg.active,
        r.gru_ndcg,
        r.f1.overall,
        r.f1.inactive,
        r.f1.active,
        r.gru_f1,
        r.iru_ndcg,
        r.iru_f1,
        r.sid.overall,
        r.sid.inactive,
        r.sid.active,
        r.gedu,
        r.iedu,
        r.proxy_gru,
        r.proxy_iru,
        r.objective,
    ];
    let mut out = v
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let _ = write!(out, ",{}", r.feasible);
    out
}

/// One row per report: overall / inactive / active / GRU for NDCG and F1, then the
/// individual and diversity measures.
pub fn report_csv(file: &ReportFile) -> String {
    let mut out = provenance_header(&file.config, &file.inputs);
    let _ = writeln!(out, "label,{METRIC_COLUMNS}");
    for r in [&file.baseline, &file.fair] {
        let _ = writeln!(out, "{},{}", r.label, metric_cells(r));
    }
    out
}

pub fn sweep_csv(file: &SweepFile) -> String {
    let mut out = provenance_header(&file.config, &file.inputs);
    let _ = writeln!(out, "alpha,beta,{METRIC_COLUMNS}");
    for row in &file.rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            row.alpha,
            row.beta,
            metric_cells(&row.report)
        );
    }
    out
}

pub fn trace_csv(rows: &[fairkg_core::rerank::TraceRow]) -> String {
    let mut out = String::from("iter,objective,violation_1,violation_2,accepted_move\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iter,
            r.objective,
            r.violations[0],
            r.violations[1],
            r.event.label()
        );
    }
    out
}

fn pct(v: f64) -> String {
    format!("{:.3}", 100.0 * v)
}

/// Fixed-width table in percent, baseline above fair.
pub fn table_text(file: &ReportFile) -> String {
    let mut out = provenance_header(&file.config, &file.inputs);
    let r0 = &file.baseline;
    let _ = writeln!(
        out,
        "\nK = {}   users = {} (active {}, inactive {}, with test purchases {})   values in %\n",
        r0.config.k, r0.users, r0.active_users, r0.inactive_users, r0.covered_users
    );
    let head = [
        "",
        "NDCG all",
        "NDCG inact",
        "NDCG act",
        "NDCG GRU",
        "F1 all",
        "F1 inact",
        "F1 act",
        "F1 GRU",
    ];
    let div = [
        "",
        "IRU NDCG",
        "IRU F1",
        "SID all",
        "SID inact",
        "SID act",
        "GEDU",
        "IEDU",
    ];
    let row = |cells: &[String]| {
        let mut line = format!("{:<10}", cells[0]);
        for c in &cells[1..] {
            let _ = write!(line, "{c:>11}");
        }
        line.trim_end().to_string()
    };
    let heading = |h: &[&str]| row(&h.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let _ = writeln!(out, "{}", heading(&head));
    for r in [&file.baseline, &file.fair] {
        let cells = [
            r.label.clone(),
            pct(r.ndcg.overall),
            pct(r.ndcg.inactive),
            pct(r.ndcg.active),
            pct(r.gru_ndcg),
            pct(r.f1.overall),
            pct(r.f1.inactive),
            pct(r.f1.active),
            pct(r.gru_f1),
        ];
        let _ = writeln!(out, "{}", row(&cells));
    }
    let _ = writeln!(out, "\n{}", heading(&div));
    for r in [&file.baseline, &file.fair] {
        let cells = [
            r.label.clone(),
            pct(r.iru_ndcg),
            pct(r.iru_f1),
            pct(r.sid.overall),
            pct(r.sid.inactive),
            pct(r.sid.active),
            pct(r.gedu),
            pct(r.iedu),
        ];
        let _ = writeln!(out, "{}", row(&cells));
    }
    out
}

pub fn sid_distribution_csv(file: &ReportFile) -> String {
    let mut out = provenance_header(&file.config, &file.inputs);
    out.push_str("user,group,baseline_sid,fair_sid\n");
    for u in &file.users {
        let group = match u.group {
            Group::Active => "active",
            Group::Inactive => "inactive",
        };
        let _ = writeln!(out, "{},{group},{},{}", u.user, u.baseline_sid, u.fair_sid);
    }
    out
}

/// Lorenz curve points `(population share, cumulative value share)` of `values`,
/// starting at `(0, 0)`.
pub fn lorenz_curve(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    let m = sorted.len() as f64;
    let mut points = vec![(0.0, 0.0)];
    let mut acc = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        acc += v;
        let share = if total > 0.0 {
            acc / total
        } else {
            (i + 1) as f64 / m
        };
        points.push(((i + 1) as f64 / m, share));
    }
    points
}

/// Lorenz curves of per-user SID and NDCG, baseline and fair.
pub fn gini_curve_csv(file: &ReportFile) -> String {
    let mut out = provenance_header(&file.config, &file.inputs);
    out.push_str("metric,selection,population_share,cumulative_share\n");
    type Getter = fn(&UserMetrics) -> f64;
    let series: [(&str, &str, Getter); 4] = [
        ("sid", "baseline", |u| u.baseline_sid),
        ("sid", "fair", |u| u.fair_sid),
        ("ndcg", "baseline", |u| u.baseline_ndcg),
        ("ndcg", "fair", |u| u.fair_ndcg),
    ];
    for (metric, selection, get) in series {
        let values: Vec<f64> = file.users.iter().map(get).collect();
        for (x, y) in lorenz_curve(&values) {
            let _ = writeln!(out, "{metric},{selection},{x},{y}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorenz_of_equal_values_is_the_diagonal() {
        let c = lorenz_curve(&[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(c.len(), 5);
        for (x, y) in c {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn lorenz_of_one_holder() {
        let c = lorenz_curve(&[0.0, 0.0, 3.0]);
        assert_eq!(c[2], (2.0 / 3.0, 0.0));
        assert_eq!(c[3], (1.0, 1.0));
    }
}
