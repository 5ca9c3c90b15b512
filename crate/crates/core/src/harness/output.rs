use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use super::config::{Experiment, ExperimentConfig};
use super::record::RunRecord;
use super::run::{summarize, Aggregate, MethodSummary, RunOutput};
use crate::error::Result;

fn f(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn u(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `rep,method,volume,volume_se,eps_bound,risk_mc,risk_se,T_size`
pub fn reach_runs_csv(records: &[RunRecord]) -> String {
    table(
        "rep,method,volume,volume_se,eps_bound,risk_mc,risk_se,T_size",
        records.iter().map(|r| {
            vec![
                r.rep.to_string(),
                r.method.clone(),
                f(r.volume),
                f(r.volume_se),
                f(r.eps),
                f(r.risk_mc),
                f(r.risk_se),
                u(r.t_size),
            ]
        }),
    )
}

fn pm(a: Option<&Aggregate>) -> String {
    a.map(|a| format!("{:.4} ± {:.4}", a.mean, a.std)).unwrap_or_default()
}

/// Metrics as rows, methods as columns, cells `mean ± std`.
pub fn reach_summary_csv(summary: &[MethodSummary]) -> String {
    let header = std::iter::once("metric".to_string())
        .chain(summary.iter().map(|m| m.method.clone()))
        .collect::<Vec<_>>()
        .join(",");
    let metric_row = |label: &str, key: &str| {
        std::iter::once(label.to_string())
            .chain(summary.iter().map(|m| pm(m.metrics.get(key))))
            .collect::<Vec<_>>()
    };
    let count_row = |label: &str, pick: fn(&MethodSummary) -> usize| {
        std::iter::once(label.to_string())
            .chain(summary.iter().map(|m| pick(m).to_string()))
            .collect::<Vec<_>>()
    };
    table(
        &header,
        [
            metric_row("Volume", "volume"),
            metric_row("Risk", "risk_mc"),
            metric_row("Bound", "eps"),
            count_row("runs", |m| m.ok),
            count_row("failed", |m| m.failed),
        ],
    )
}

/// `rep,N,theta1,theta2,T_size,eps_bound,risk_mc`
pub fn oc_runs_csv(records: &[RunRecord]) -> String {
    table(
        "rep,N,theta1,theta2,T_size,eps_bound,risk_mc",
        records.iter().map(|r| {
            vec![
                r.rep.to_string(),
                u(r.n),
                f(r.theta1),
                f(r.theta2),
                u(r.t_size),
                f(r.eps),
                f(r.risk_mc),
            ]
        }),
    )
}

/// `rep,gamma,k,eps,tail_mc`
pub fn oc_cdf_csv(records: &[RunRecord]) -> String {
    table(
        "rep,gamma,k,eps,tail_mc",
        records.iter().flat_map(|r| {
            r.levels.iter().map(move |l| {
                vec![
                    r.rep.to_string(),
                    l.gamma.to_string(),
                    l.k.to_string(),
                    l.eps.to_string(),
                    l.tail_mc.to_string(),
                ]
            })
        }),
    )
}

/// `k,N,delta,eps`
pub fn bound_table_csv(records: &[RunRecord]) -> String {
    table(
        "k,N,delta,eps",
        records
            .iter()
            .map(|r| vec![u(r.k), u(r.n), f(r.delta), f(r.eps)]),
    )
}

/// File names and bodies of the CSVs of a finished sweep.
pub fn csv_files(config: &ExperimentConfig, output: &RunOutput) -> Vec<(&'static str, String)> {
    let r = &output.records;
    match &config.experiment {
        Experiment::BoundTable(_) => vec![("bound_table.csv", bound_table_csv(r))],
        Experiment::Reach(_) => vec![
            ("reach_runs.csv", reach_runs_csv(r)),
            ("reach_summary.csv", reach_summary_csv(&summarize(r))),
        ],
        Experiment::Oc(_) => vec![("oc_runs.csv", oc_runs_csv(r))],
        Experiment::OcCdf(_) => vec![("oc_runs.csv", oc_runs_csv(r)), ("oc_cdf.csv", oc_cdf_csv(r))],
    }
}

/// Mean certificate and Monte-Carlo tail per level.
fn level_means(records: &[RunRecord]) -> Vec<serde_json::Value> {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| !r.is_failed()).collect();
    let Some(first) = ok.first() else {
        return Vec::new();
    };
    (0..first.levels.len())
        .map(|i| {
            let eps: Vec<f64> = ok.iter().map(|r| r.levels[i].eps).collect();
            let tail: Vec<f64> = ok.iter().map(|r| r.levels[i].tail_mc).collect();
            json!({
                "gamma": first.levels[i].gamma,
                "eps": Aggregate::of(&eps),
                "tail_mc": Aggregate::of(&tail),
            })
        })
        .collect()
}

pub fn summary_json(config: &ExperimentConfig, output: &RunOutput) -> serde_json::Value {
    let mut v = json!({
        "experiment": config.experiment.name(),
        "config": config,
        "methods": summarize(&output.records),
        "versions": {
            "p2l-core": env!("CARGO_PKG_VERSION"),
        },
        "threads": output.threads,
        "wall_clock_s": output.wall_clock_s,
    });
    match &config.experiment {
        Experiment::Reach(r) if r.baselines.enabled => {
            let plan = r.split_plan(config.seed);
            v["baseline_confidence"] = json!({
                "delta_per_fraction": plan.delta_per_fraction,
                "fractions": plan.fractions.len(),
                "joint_confidence": plan.joint_confidence(),
            });
        }
        Experiment::OcCdf(c) => {
            v["joint_confidence"] = json!(1.0 - c.levels.len() as f64 * c.delta_per_level);
            v["levels"] = json!(level_means(&output.records));
        }
        _ => {}
    }
    v
}

fn stamp() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Creates a fresh `<root>/<experiment>-<unix millis>` directory, adding a
/// suffix if that name is taken.
fn fresh_dir(root: &Path, experiment: &str) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    let base = format!("{experiment}-{}", stamp());
    for i in 0.. {
        let name = if i == 0 { base.clone() } else { format!("{base}-{i}") };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!("unbounded suffix search")
}

/// Writes the CSVs and `summary.json` of a sweep into a new directory under
/// `config.output_dir` and returns that directory.
pub fn write_outputs(config: &ExperimentConfig, output: &RunOutput) -> Result<PathBuf> {
    let dir = fresh_dir(&config.output_dir, config.experiment.name())?;
    for (name, body) in csv_files(config, output) {
        fs::write(dir.join(name), body)?;
    }
    let mut text = serde_json::to_string_pretty(&summary_json(config, output))?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(dir)
}

/// Plain-text report of the per-method aggregates.
pub fn render_summary(summary: &[MethodSummary]) -> String {
    let mut out = String::new();
    for m in summary {
        let _ = write!(out, "{:<6} ok={} failed={}", m.method, m.ok, m.failed);
        for (k, a) in &m.metrics {
            let _ = write!(out, "  {k}={:.4}±{:.4}", a.mean, a.std);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::BoundTableConfig;
    use crate::harness::record::LevelRecord;

    fn output(records: Vec<RunRecord>) -> RunOutput {
        RunOutput {
            records,
            threads: 1,
            wall_clock_s: 0.0,
        }
    }

    #[test]
    fn failed_rows_keep_ids_and_blank_numbers() {
        let body = oc_runs_csv(&[RunRecord {
            n: Some(128),
            ..RunRecord::failed(3, "P2L", "x")
        }]);
        assert_eq!(body, "rep,N,theta1,theta2,T_size,eps_bound,risk_mc\n3,128,,,,,\n");
    }

    #[test]
    fn cdf_rows_per_level() {
        let rec = RunRecord {
            levels: vec![
                LevelRecord {
                    gamma: 0.4,
                    k: 5,
                    eps: 0.5,
                    tail_mc: 0.25,
                },
                LevelRecord {
                    gamma: 0.8,
                    k: 2,
                    eps: 0.3,
                    tail_mc: 0.125,
                },
            ],
            ..RunRecord::new(1, "P2L")
        };
        assert_eq!(
            oc_cdf_csv(&[rec]),
            "rep,gamma,k,eps,tail_mc\n1,0.4,5,0.5,0.25\n1,0.8,2,0.3,0.125\n"
        );
    }

    #[test]
    fn summary_layout() {
        let recs: Vec<RunRecord> = ["P2L", "Conf", "TS"]
            .iter()
            .map(|m| RunRecord {
                volume: Some(0.5),
                risk_mc: Some(0.01),
                eps: Some(0.03),
                ..RunRecord::new(0, *m)
            })
            .collect();
        let csv = reach_summary_csv(&summarize(&recs));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "metric,P2L,Conf,TS");
        assert_eq!(lines[1], "Volume,0.5000 ± 0.0000,0.5000 ± 0.0000,0.5000 ± 0.0000");
        assert!(lines[2].starts_with("Risk,"));
    }

    #[test]
    fn writes_new_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            output_dir: tmp.path().to_path_buf(),
            ..ExperimentConfig::new(Experiment::BoundTable(BoundTableConfig::default()))
        };
        let out = output(vec![RunRecord {
            k: Some(0),
            n: Some(1),
            delta: Some(0.1),
            eps: Some(0.9),
            ..RunRecord::new(0, "bound")
        }]);
        let a = write_outputs(&cfg, &out).unwrap();
        let b = write_outputs(&cfg, &out).unwrap();
        assert_ne!(a, b);
        assert_eq!(
            fs::read_to_string(a.join("bound_table.csv")).unwrap(),
            "k,N,delta,eps\n0,1,0.1,0.9\n"
        );
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(b.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["experiment"], "bound-table");
        assert!(summary["versions"]["p2l-core"].is_string());
    }
}
