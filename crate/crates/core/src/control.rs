//! Certified cost thresholds for a scalar linear system under a grid of
//! affine state-feedback policies.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::risk_bound;
use crate::error::{domain, Result};
use crate::meta::{run_p2l, CompressionResult, Dataset, Synthesizer};
use crate::reach::RiskEstimate;
use crate::rng::{self, purpose};

/// How the second parameter of `N(mean, s)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseParam {
    #[default]
    Variance,
    #[serde(alias = "stddev")]
    StdDev,
}

/// `x_{t+1} = a x_t + b u_t + w_t` with stage cost `q x^2 + r u^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearBenchmark {
    pub a: f64,
    pub b: f64,
    pub horizon: usize,
    pub q: f64,
    pub r: f64,
    pub x0_mean: f64,
    pub x0_var: f64,
    pub w_mean: f64,
    pub w_var: f64,
    pub noise_param: NoiseParam,
}

impl Default for LinearBenchmark {
    fn default() -> Self {
        Self {
            a: 0.8,
            b: 0.1,
            horizon: 9,
            q: 5.0,
            r: 0.003,
            x0_mean: 2.3,
            x0_var: 0.009,
            w_mean: 0.3,
            w_var: 0.009,
            noise_param: NoiseParam::Variance,
        }
    }
}

impl LinearBenchmark {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(domain("horizon must be at least 1"));
        }
        if !(self.q > 0.0 && self.r > 0.0) {
            return Err(domain("cost weights q and r must be positive"));
        }
        if !(self.x0_var >= 0.0 && self.w_var >= 0.0) {
            return Err(domain("noise spreads must be nonnegative"));
        }
        Ok(())
    }

    fn spread(&self, s: f64) -> f64 {
        match self.noise_param {
            NoiseParam::Variance => s.sqrt(),
            NoiseParam::StdDev => s,
        }
    }

    pub fn x0_std(&self) -> f64 {
        self.spread(self.x0_var)
    }

    pub fn w_std(&self) -> f64 {
        self.spread(self.w_var)
    }

    pub fn sample_scenario<R: Rng + ?Sized>(&self, rng: &mut R) -> Scenario {
        let x0 = Normal::new(self.x0_mean, self.x0_std()).expect("validated spread");
        let w = Normal::new(self.w_mean, self.w_std()).expect("validated spread");
        Scenario {
            x0: x0.sample(rng),
            w: (0..self.horizon).map(|_| w.sample(rng)).collect(),
        }
    }
}

/// Initial state and noise sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub x0: f64,
    pub w: Vec<f64>,
}

/// Equally spaced `(theta1, theta2)` grid including the endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyGrid {
    pub theta1_range: [f64; 2],
    pub theta2_range: [f64; 2],
    pub points_per_axis: usize,
}

impl Default for PolicyGrid {
    fn default() -> Self {
        Self {
            theta1_range: [-18.0, 2.0],
            theta2_range: [-5.0, 5.0],
            points_per_axis: 100,
        }
    }
}

fn grid_value(range: [f64; 2], n: usize, i: usize) -> f64 {
    if n == 1 {
        return range[0];
    }
    if i == n - 1 {
        return range[1];
    }
    range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64
}

impl PolicyGrid {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis == 0 {
            return Err(domain("policy grid needs at least one point per axis"));
        }
        if !(self.theta1_range[0] <= self.theta1_range[1] && self.theta2_range[0] <= self.theta2_range[1]) {
            return Err(domain("policy grid ranges must be ordered"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points_per_axis * self.points_per_axis
    }

    pub fn is_empty(&self) -> bool {
        self.points_per_axis == 0
    }

    pub fn policy(&self, i: usize, j: usize) -> Policy {
        let n = self.points_per_axis;
        Policy {
            theta1: grid_value(self.theta1_range, n, i),
            theta2: grid_value(self.theta2_range, n, j),
            grid_index: (i, j),
        }
    }

    /// Policy at flat index `i * points_per_axis + j`.
    pub fn policy_at(&self, flat: usize) -> Policy {
        self.policy(flat / self.points_per_axis, flat % self.points_per_axis)
    }
}

/// `u = theta1 x + theta2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub theta1: f64,
    pub theta2: f64,
    pub grid_index: (usize, usize),
}

impl Policy {
    pub fn gains(theta1: f64, theta2: f64) -> Self {
        Self {
            theta1,
            theta2,
            grid_index: (0, 0),
        }
    }
}

/// `sum_{t<H} (q x_t^2 + r u_t^2) + q x_H^2` along the closed loop.
pub fn rollout_cost(policy: &Policy, z: &Scenario, bench: &LinearBenchmark) -> f64 {
    let mut x = z.x0;
    let mut cost = 0.0;
    for &w in &z.w[..bench.horizon] {
        let u = policy.theta1 * x + policy.theta2;
        cost += bench.q * x * x + bench.r * u * u;
        x = bench.a * x + bench.b * u + w;
    }
    cost + bench.q * x * x
}

/// Per-policy cost sums over a scenario list, in scenario order.
fn add_costs(sums: &mut [f64], scenarios: &[&Scenario], grid: &PolicyGrid, bench: &LinearBenchmark) {
    let n = grid.points_per_axis;
    sums.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, s) in row.iter_mut().enumerate() {
            let p = grid.policy(i, j);
            for z in scenarios {
                *s += rollout_cost(&p, z, bench);
            }
        }
    });
}

/// Lowest sum; ties go to the smallest `(i, j)`.
fn argmin(sums: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in sums.iter().enumerate().skip(1) {
        if s < sums[best] {
            best = k;
        }
    }
    best
}

fn check_scenarios(train: &[&Scenario], bench: &LinearBenchmark) -> Result<()> {
    if train.is_empty() {
        return Err(domain("grid synthesis needs at least one scenario"));
    }
    if let Some(z) = train.iter().find(|z| z.w.len() != bench.horizon) {
        return Err(crate::Error::DimensionMismatch {
            expected: bench.horizon,
            got: z.w.len(),
        });
    }
    Ok(())
}

/// Grid policy minimizing the empirical mean cost over `train`.
pub fn grid_synthesize(train: &[&Scenario], grid: &PolicyGrid, bench: &LinearBenchmark) -> Result<Policy> {
    Ok(GridSynth::new(&[], grid.clone(), bench.clone())
        .synthesize(train)?
        .policy)
}

/// Synthesized policy together with the per-policy cost sums it was chosen
/// from, so one appended scenario costs one grid sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDecision {
    pub policy: Policy,
    #[serde(skip)]
    sums: Arc<Vec<f64>>,
    n_scenarios: usize,
}

impl GridDecision {
    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    /// Empirical mean cost of every grid policy, flat-indexed.
    pub fn mean_costs(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s / self.n_scenarios as f64).collect()
    }
}

/// Grid search on the initialization scenarios followed by the training
/// list.
pub struct GridSynth<'a> {
    init: Vec<&'a Scenario>,
    grid: PolicyGrid,
    bench: LinearBenchmark,
}

impl<'a> GridSynth<'a> {
    pub fn new(init: &'a [Scenario], grid: PolicyGrid, bench: LinearBenchmark) -> Self {
        Self {
            init: init.iter().collect(),
            grid,
            bench,
        }
    }

    fn decide(&self, sums: Vec<f64>, n_scenarios: usize) -> GridDecision {
        GridDecision {
            policy: self.grid.policy_at(argmin(&sums)),
            sums: Arc::new(sums),
            n_scenarios,
        }
    }
}

impl Synthesizer<Scenario> for GridSynth<'_> {
    type Decision = GridDecision;

    fn synthesize(&self, train: &[&Scenario]) -> Result<GridDecision> {
        self.grid.validate()?;
        let all: Vec<&Scenario> = self.init.iter().copied().chain(train.iter().copied()).collect();
        check_scenarios(&all, &self.bench)?;
        let mut sums = vec![0.0; self.grid.len()];
        add_costs(&mut sums, &all, &self.grid, &self.bench);
        Ok(self.decide(sums, all.len()))
    }

    fn synthesize_from(&self, previous: &GridDecision, train: &[&Scenario]) -> Result<GridDecision> {
        let total = self.init.len() + train.len();
        if previous.sums.len() != self.grid.len() || previous.n_scenarios + 1 != total {
            return self.synthesize(train);
        }
        let last = &train[train.len() - 1..];
        check_scenarios(last, &self.bench)?;
        let mut sums = previous.sums.as_ref().clone();
        add_costs(&mut sums, last, &self.grid, &self.bench);
        Ok(self.decide(sums, total))
    }
}

/// Output of [`oc_p2l`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcOutcome {
    pub result: CompressionResult<GridDecision>,
    /// `eps_bar(|T|, delta, N - N_i)`.
    pub eps: f64,
}

impl OcOutcome {
    pub fn policy(&self) -> Policy {
        self.result.decision.policy
    }
}

/// P2L certifying `P[J > j_bar]`. The initial policy is synthesized on the
/// dataset's initialization scenarios; dissatisfaction is the cost itself.
pub fn oc_p2l(
    data: &Dataset<Scenario>,
    bench: &LinearBenchmark,
    grid: &PolicyGrid,
    j_bar: f64,
    delta: f64,
) -> Result<OcOutcome> {
    bench.validate()?;
    if data.n_init() == 0 {
        return Err(domain("oc_p2l needs at least one initialization scenario"));
    }
    let synth = GridSynth::new(data.init_points(), grid.clone(), bench.clone());
    let h0 = synth.synthesize(&[])?;
    let result = run_p2l(
        data,
        &synth,
        &|h: &GridDecision, z: &Scenario| rollout_cost(&h.policy, z, bench) <= j_bar,
        |h: &GridDecision, z: &Scenario| rollout_cost(&h.policy, z, bench),
        h0,
    )?;
    let eps = risk_bound(result.train.len(), data.n_working(), delta)?;
    Ok(OcOutcome { result, eps })
}

/// Certificate at one cost level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfLevel {
    pub gamma: f64,
    /// `|U_gamma|`.
    pub exceed: usize,
    /// `|T| + |U_gamma|`.
    pub k: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdfCertificate {
    pub outcome: OcOutcome,
    pub levels: Vec<CdfLevel>,
    pub delta_per_level: f64,
    /// `1 - r * delta_per_level`.
    pub joint_confidence: f64,
}

/// One P2L run at the largest level, then a bound on `P[J > gamma]` for
/// every level from the working points outside `T` that exceed it.
pub fn certify_cdf(
    data: &Dataset<Scenario>,
    bench: &LinearBenchmark,
    grid: &PolicyGrid,
    levels: &[f64],
    delta_per_level: f64,
) -> Result<CdfCertificate> {
    if levels.is_empty() || levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("levels must be nonempty and strictly increasing"));
    }
    let top = *levels.last().expect("nonempty");
    let outcome = oc_p2l(data, bench, grid, top, delta_per_level)?;
    let policy = outcome.policy();
    let mut in_t = vec![false; data.len()];
    for &i in &outcome.result.train {
        in_t[i] = true;
    }
    let rest: Vec<f64> = data
        .working_indices()
        .filter(|&i| !in_t[i])
        .map(|i| rollout_cost(&policy, data.get(i), bench))
        .collect();
    let t = outcome.result.train.len();
    let levels = levels
        .iter()
        .map(|&gamma| {
            let exceed = rest.iter().filter(|&&c| c > gamma).count();
            let k = t + exceed;
            Ok(CdfLevel {
                gamma,
                exceed,
                k,
                eps: risk_bound(k, data.n_working(), delta_per_level)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let joint_confidence = 1.0 - levels.len() as f64 * delta_per_level;
    Ok(CdfCertificate {
        outcome,
        levels,
        delta_per_level,
        joint_confidence,
    })
}

/// Cost levels `0.4, 0.8, ..., 4.0`.
pub fn default_cost_levels() -> Vec<f64> {
    (1..=10).map(|i| (4 * i) as f64 / 10.0).collect()
}

/// `n` scenarios drawn block-wise under `(seed, purpose)`.
pub fn sample_scenarios(n: usize, bench: &LinearBenchmark, seed: u64, purpose: u64) -> Result<Vec<Scenario>> {
    bench.validate()?;
    Ok(rng::sample_blocks(n, seed, purpose, |r| bench.sample_scenario(r)))
}

/// Dataset of `n` scenarios whose first `n_init` entries initialize P2L.
pub fn scenario_dataset(n: usize, n_init: usize, bench: &LinearBenchmark, seed: u64) -> Result<Dataset<Scenario>> {
    Dataset::new(sample_scenarios(n, bench, seed, purpose::DATASET)?, n_init)
}

/// Fraction of `n_mc` fresh scenarios with cost above `threshold`.
pub fn estimate_cost_risk(
    policy: &Policy,
    bench: &LinearBenchmark,
    threshold: f64,
    n_mc: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    Ok(cost_tail_curve(policy, bench, &[threshold], n_mc, seed)?[0])
}

/// Tail probabilities `P[J > gamma]` for each level from one shared set of
/// `n_mc` fresh scenarios.
pub fn cost_tail_curve(
    policy: &Policy,
    bench: &LinearBenchmark,
    levels: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<Vec<RiskEstimate>> {
    bench.validate()?;
    if n_mc == 0 {
        return Err(domain("need at least one risk sample"));
    }
    let costs = rng::sample_blocks(n_mc, seed, purpose::RISK, |r| {
        rollout_cost(policy, &bench.sample_scenario(r), bench)
    });
    Ok(levels
        .iter()
        .map(|&g| RiskEstimate::from_counts(costs.iter().filter(|&&c| c > g).count(), n_mc))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench() -> LinearBenchmark {
        LinearBenchmark::default()
    }

    fn still(x0: f64) -> Scenario {
        Scenario {
            x0,
            w: vec![0.0; 9],
        }
    }

    #[test]
    fn open_loop_geometric_sum() {
        let j = rollout_cost(&Policy::gains(0.0, 0.0), &still(1.0), &bench());
        let expected = 5.0 * (1.0 - 0.64f64.powi(10)) / 0.36;
        assert!((j - expected).abs() < 1e-12);
        assert!((j - 13.7288).abs() < 1e-4);
    }

    #[test]
    fn zero_trajectory() {
        assert_eq!(rollout_cost(&Policy::gains(0.0, 0.0), &still(0.0), &bench()), 0.0);
    }

    #[test]
    fn deadbeat() {
        for c in [0.5, 1.0, 2.3] {
            let j = rollout_cost(&Policy::gains(-8.0, 0.0), &still(c), &bench());
            assert!((j - 5.192 * c * c).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_values() {
        let g = PolicyGrid::default();
        assert_eq!(g.len(), 10_000);
        assert_eq!(g.policy(0, 0).theta1, -18.0);
        assert_eq!(g.policy(99, 99).theta1, 2.0);
        assert_eq!(g.policy(99, 99).theta2, 5.0);
        assert!((g.policy(1, 0).theta1 - (-18.0 + 20.0 / 99.0)).abs() < 1e-14);
        assert_eq!(g.policy_at(250).grid_index, (2, 50));
    }

    #[test]
    fn zero_scenario_tie_break() {
        // x0 = 0, w = 0: x stays 0 iff theta2 = 0, which needs an odd grid
        let grid = PolicyGrid {
            points_per_axis: 11,
            ..PolicyGrid::default()
        };
        let z = still(0.0);
        let p = grid_synthesize(&[&z], &grid, &bench()).unwrap();
        assert_eq!(p.grid_index, (0, 5));
        assert_eq!(p.theta2, 0.0);
        // brute force: every theta2 = 0 policy costs exactly 0
        for i in 0..11 {
            assert_eq!(rollout_cost(&grid.policy(i, 5), &z, &bench()), 0.0);
        }
    }

    #[test]
    fn synthesis_is_optimal_and_permutation_invariant() {
        let b = bench();
        let grid = PolicyGrid {
            points_per_axis: 30,
            ..PolicyGrid::default()
        };
        let zs = sample_scenarios(7, &b, 3, 99).unwrap();
        let refs: Vec<&Scenario> = zs.iter().collect();
        let p = grid_synthesize(&refs, &grid, &b).unwrap();
        let mean = |p: &Policy| refs.iter().map(|z| rollout_cost(p, z, &b)).sum::<f64>() / refs.len() as f64;
        let best = mean(&p);
        for k in 0..grid.len() {
            assert!(mean(&grid.policy_at(k)) >= best - 1e-12 * best.abs());
        }
        let rev: Vec<&Scenario> = zs.iter().rev().collect();
        assert_eq!(grid_synthesize(&rev, &grid, &b).unwrap().grid_index, p.grid_index);
    }

    #[test]
    fn warm_start_matches_full_synthesis() {
        let b = bench();
        let grid = PolicyGrid {
            points_per_axis: 20,
            ..PolicyGrid::default()
        };
        let zs = sample_scenarios(6, &b, 4, 1).unwrap();
        let synth = GridSynth::new(&zs[..1], grid, b);
        let mut h = synth.synthesize(&[]).unwrap();
        let mut train: Vec<&Scenario> = Vec::new();
        for z in &zs[1..] {
            train.push(z);
            h = synth.synthesize_from(&h, &train).unwrap();
            let full = synth.synthesize(&train).unwrap();
            assert_eq!(h, full);
            assert_eq!(h.mean_costs(), full.mean_costs());
        }
    }

    #[test]
    fn oc_immediate_termination_and_unsatisfiable() {
        let b = bench();
        let grid = PolicyGrid {
            points_per_axis: 10,
            ..PolicyGrid::default()
        };
        let data = scenario_dataset(5, 1, &b, 2).unwrap();
        let loose = oc_p2l(&data, &b, &grid, 1e18, 0.01).unwrap();
        assert!(loose.result.train.is_empty());
        let tight = oc_p2l(&data, &b, &grid, -1.0, 0.01).unwrap();
        assert_eq!(tight.result.train.len(), 4);
        assert_eq!(tight.eps, 1.0);
    }

    #[test]
    fn cdf_levels_are_monotone() {
        let b = LinearBenchmark {
            x0_mean: 0.3,
            ..bench()
        };
        let grid = PolicyGrid {
            points_per_axis: 15,
            ..PolicyGrid::default()
        };
        let data = scenario_dataset(40, 1, &b, 6).unwrap();
        let levels = default_cost_levels();
        let cert = certify_cdf(&data, &b, &grid, &levels, 0.01).unwrap();
        let last = cert.levels.last().unwrap();
        assert_eq!(last.exceed, 0);
        assert_eq!(last.eps, cert.outcome.eps);
        assert!(cert.levels.windows(2).all(|w| w[0].k >= w[1].k && w[0].eps >= w[1].eps));
        assert!((cert.joint_confidence - 0.9).abs() < 1e-12);
        assert!(certify_cdf(&data, &b, &grid, &[1.0, 1.0], 0.01).is_err());
    }

    #[test]
    fn trivial_cost_risks() {
        let p = Policy::gains(-8.0, 0.0);
        assert_eq!(estimate_cost_risk(&p, &bench(), 1e18, 1000, 1).unwrap().risk, 0.0);
        assert_eq!(estimate_cost_risk(&p, &bench(), -1.0, 1000, 1).unwrap().risk, 1.0);
    }

    #[test]
    fn deadbeat_risk_matches_larger_sample() {
        let b = LinearBenchmark {
            x0_var: 1e-4,
            w_var: 1e-4,
            ..bench()
        };
        let p = Policy::gains(-8.0, 0.0);
        let nominal = rollout_cost(
            &p,
            &Scenario {
                x0: b.x0_mean,
                w: vec![b.w_mean; 9],
            },
            &b,
        );
        let threshold = nominal * 1.01;
        let small = estimate_cost_risk(&p, &b, threshold, 10_000, 1).unwrap();
        let big = estimate_cost_risk(&p, &b, threshold, 100_000, 2).unwrap();
        assert!(small.risk > 0.0 && small.risk < 0.5);
        let sigma = (small.std_error.powi(2) + big.std_error.powi(2)).sqrt();
        assert!((small.risk - big.risk).abs() <= 3.0 * sigma);
    }

    #[test]
    fn stddev_reading() {
        let b = LinearBenchmark {
            noise_param: NoiseParam::StdDev,
            ..bench()
        };
        assert_eq!(b.x0_std(), 0.009);
        assert!((bench().x0_std() - 0.009f64.sqrt()).abs() < 1e-15);
    }
}
