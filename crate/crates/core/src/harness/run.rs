use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BoundTableConfig, Experiment, ExperimentConfig, OcCdfConfig, OcConfig, ReachConfig};
use super::record::{LevelRecord, RunRecord};
use crate::baselines::{conformal_reach, testset_reach, BaselineOutcome};
use crate::bounds::{eps_bar, BoundQuery};
use crate::control::{certify_cdf, cost_tail_curve, estimate_cost_risk, oc_p2l, scenario_dataset};
use crate::error::{Error, Result};
use crate::reach::{
    duffing_dataset, duffing_samples, model_risk_on_pool, reach_p2l, volume_mc, AxisBox, ChristoffelModel,
    MonomialBasis, VolumeEstimate,
};
use crate::rng::{purpose, rep_seed};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "P2L_THREADS";

pub const METHOD_P2L: &str = "P2L";
pub const METHOD_CONF: &str = "Conf";
pub const METHOD_TS: &str = "TS";

/// Records of a sweep, ordered by repetition and then method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub threads: usize,
    pub wall_clock_s: f64,
}

/// Worker count: `threads` if given, else `P2L_THREADS`, else all cores.
pub fn resolve_threads(threads: Option<usize>) -> usize {
    threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every repetition of `config` on a pool of `threads` workers.
/// Failures inside a repetition become failed rows.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutput> {
    config.validate()?;
    let threads = resolve_threads(threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} workers: {e}")))?;
    let start = Instant::now();
    let records = pool.install(|| run_all(config))?;
    Ok(RunOutput {
        records,
        threads,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

fn run_all(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let reps = config.reps;
    let per_rep: Vec<Vec<RunRecord>> = match &config.experiment {
        Experiment::BoundTable(t) => (0..reps).map(|rep| bound_table_rep(rep, t)).collect(),
        Experiment::Reach(r) => {
            let dynamics = r.dynamics();
            let pool = duffing_samples(r.mc_samples, &dynamics, config.seed, purpose::MC_POOL)?;
            (0..reps)
                .into_par_iter()
                .map(|rep| reach_rep(rep, rep_seed(config.seed, rep as u64), r, &pool))
                .collect()
        }
        Experiment::Oc(o) => (0..reps)
            .into_par_iter()
            .map(|rep| vec![oc_rep(rep, rep_seed(config.seed, rep as u64), o)])
            .collect(),
        Experiment::OcCdf(o) => (0..reps)
            .into_par_iter()
            .map(|rep| vec![oc_cdf_rep(rep, rep_seed(config.seed, rep as u64), o)])
            .collect(),
    };
    Ok(per_rep.into_iter().flatten().collect())
}

fn bound_table_rep(rep: usize, t: &BoundTableConfig) -> Vec<RunRecord> {
    t.rows()
        .into_par_iter()
        .map(|(k, n, delta)| match BoundQuery::new(k, n, delta) {
            Ok(q) => RunRecord {
                eps: Some(eps_bar(&q).eps),
                k: Some(k),
                n: Some(n),
                delta: Some(delta),
                ..RunRecord::new(rep, "bound")
            },
            Err(e) => RunRecord {
                k: Some(k),
                n: Some(n),
                delta: Some(delta),
                ..RunRecord::failed(rep, "bound", e)
            },
        })
        .collect()
}

fn with_volume(mut rec: RunRecord, v: &VolumeEstimate) -> RunRecord {
    rec.volume = Some(v.volume);
    rec.volume_se = Some(v.std_error);
    rec.volume_samples = Some(v.n_samples);
    rec
}

fn set_record(
    rep: usize,
    method: &str,
    model: &ChristoffelModel,
    eps: f64,
    volume: &VolumeEstimate,
    pool: &[Vec<f64>],
) -> Result<RunRecord> {
    let risk = model_risk_on_pool(model, pool)?;
    Ok(with_volume(
        RunRecord {
            eps: Some(eps),
            risk_mc: Some(risk.risk),
            risk_se: Some(risk.std_error),
            risk_samples: Some(risk.n_samples),
            ..RunRecord::new(rep, method)
        },
        volume,
    ))
}

fn baseline_record(
    rep: usize,
    method: &str,
    out: Result<BaselineOutcome>,
    vol: &dyn Fn(&ChristoffelModel) -> Result<VolumeEstimate>,
    pool: &[Vec<f64>],
) -> RunRecord {
    let run = || -> Result<RunRecord> {
        let out = out?;
        let mut rec = set_record(rep, method, &out.model, out.eps, &vol(&out.model)?, pool)?;
        rec.k = Some(out.k);
        rec.fraction = Some(out.fraction);
        rec.fallback = Some(out.fallback);
        Ok(rec)
    };
    run().unwrap_or_else(|e| RunRecord::failed(rep, method, e))
}

fn reach_rep(rep: usize, seed: u64, cfg: &ReachConfig, pool: &[Vec<f64>]) -> Vec<RunRecord> {
    let methods = if cfg.baselines.enabled {
        vec![METHOD_P2L, METHOD_CONF, METHOD_TS]
    } else {
        vec![METHOD_P2L]
    };
    let fail_all = |e: Error| methods.iter().map(|m| RunRecord::failed(rep, *m, &e)).collect();
    let data = match duffing_dataset(cfg.n, cfg.n_init, &cfg.dynamics(), seed) {
        Ok(d) => d,
        Err(e) => return fail_all(e),
    };
    let basis = match MonomialBasis::new(2, cfg.degree) {
        Ok(b) => b,
        Err(e) => return fail_all(e),
    };
    let bbox: AxisBox = match cfg.volume_box.resolve(data.points()) {
        Ok(b) => b,
        Err(e) => return fail_all(e),
    };
    // every method is measured on the same volume samples
    let vol = |m: &ChristoffelModel| volume_mc(m, &bbox, cfg.volume_samples, seed);

    let p2l = reach_p2l(&data, cfg.degree, cfg.delta, cfg.ridge);
    let mut out = Vec::with_capacity(methods.len());
    let target = match &p2l {
        Ok(o) => Some(o.eps),
        Err(_) => None,
    };
    out.push(match p2l.and_then(|o| {
        let mut rec = set_record(rep, METHOD_P2L, o.model(), o.eps, &vol(o.model())?, pool)?;
        rec.t_size = Some(o.result.train.len());
        rec.n = Some(data.n_working());
        Ok(rec)
    }) {
        Ok(r) => r,
        Err(e) => RunRecord::failed(rep, METHOD_P2L, e),
    });
    if !cfg.baselines.enabled {
        return out;
    }
    let Some(target) = target else {
        out.push(RunRecord::failed(rep, METHOD_CONF, "no P2L certificate to match"));
        out.push(RunRecord::failed(rep, METHOD_TS, "no P2L certificate to match"));
        return out;
    };
    let plan = cfg.split_plan(seed);
    let vol_only = |m: &ChristoffelModel| vol(m).map(|v| v.volume);
    let conf = conformal_reach(data.points(), &plan, &basis, cfg.ridge, target, vol_only);
    out.push(baseline_record(rep, METHOD_CONF, conf, &vol, pool));
    let ts = testset_reach(data.points(), &plan, &basis, cfg.ridge, target, vol_only);
    out.push(baseline_record(rep, METHOD_TS, ts, &vol, pool));
    out
}

fn oc_rep(rep: usize, seed: u64, cfg: &OcConfig) -> RunRecord {
    let run = || -> Result<RunRecord> {
        let data = scenario_dataset(cfg.n, cfg.n_init, &cfg.bench, seed)?;
        let out = oc_p2l(&data, &cfg.bench, &cfg.grid, cfg.j_bar, cfg.delta)?;
        let p = out.policy();
        let risk = estimate_cost_risk(&p, &cfg.bench, cfg.j_bar, cfg.mc_samples, seed)?;
        Ok(RunRecord {
            eps: Some(out.eps),
            risk_mc: Some(risk.risk),
            risk_se: Some(risk.std_error),
            risk_samples: Some(risk.n_samples),
            t_size: Some(out.result.train.len()),
            n: Some(cfg.n),
            delta: Some(cfg.delta),
            theta1: Some(p.theta1),
            theta2: Some(p.theta2),
            ..RunRecord::new(rep, METHOD_P2L)
        })
    };
    run().unwrap_or_else(|e| RunRecord {
        n: Some(cfg.n),
        ..RunRecord::failed(rep, METHOD_P2L, e)
    })
}

fn oc_cdf_rep(rep: usize, seed: u64, cfg: &OcCdfConfig) -> RunRecord {
    let run = || -> Result<RunRecord> {
        let data = scenario_dataset(cfg.n, cfg.n_init, &cfg.bench, seed)?;
        let cert = certify_cdf(&data, &cfg.bench, &cfg.grid, &cfg.levels, cfg.delta_per_level)?;
        let p = cert.outcome.policy();
        let tails = cost_tail_curve(&p, &cfg.bench, &cfg.levels, cfg.mc_samples, seed)?;
        Ok(RunRecord {
            eps: Some(cert.outcome.eps),
            risk_mc: tails.last().map(|t| t.risk),
            risk_samples: Some(cfg.mc_samples),
            t_size: Some(cert.outcome.result.train.len()),
            n: Some(cfg.n),
            delta: Some(cfg.delta_per_level),
            theta1: Some(p.theta1),
            theta2: Some(p.theta2),
            levels: cert
                .levels
                .iter()
                .zip(&tails)
                .map(|(l, t)| LevelRecord {
                    gamma: l.gamma,
                    k: l.k,
                    eps: l.eps,
                    tail_mc: t.risk,
                })
                .collect(),
            ..RunRecord::new(rep, METHOD_P2L)
        })
    };
    run().unwrap_or_else(|e| RunRecord {
        n: Some(cfg.n),
        ..RunRecord::failed(rep, METHOD_P2L, e)
    })
}

/// Mean and sample standard deviation over successful records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            std,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub ok: usize,
    pub failed: usize,
    pub metrics: BTreeMap<String, Aggregate>,
}

/// Per-method aggregates, methods in order of first appearance.
pub fn summarize(records: &[RunRecord]) -> Vec<MethodSummary> {
    let mut order: Vec<String> = Vec::new();
    for r in records {
        if !order.contains(&r.method) {
            order.push(r.method.clone());
        }
    }
    order
        .into_iter()
        .map(|method| {
            let rows: Vec<&RunRecord> = records.iter().filter(|r| r.method == method).collect();
            let ok: Vec<&&RunRecord> = rows.iter().filter(|r| !r.is_failed()).collect();
            let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in &ok {
                for (name, v) in r.metrics() {
                    values.entry(name.to_string()).or_default().push(v);
                }
            }
            MethodSummary {
                ok: ok.len(),
                failed: rows.len() - ok.len(),
                metrics: values
                    .into_iter()
                    .filter_map(|(k, v)| Aggregate::of(&v).map(|a| (k, a)))
                    .collect(),
                method,
            }
        })
        .collect()
}
