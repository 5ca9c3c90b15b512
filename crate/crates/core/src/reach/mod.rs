//! Data-driven reachable sets: sublevel sets of the empirical inverse
//! Christoffel function, learned with P2L on terminal states of the Duffing
//! oscillator.

pub mod basis;
pub mod christoffel;
pub mod duffing;
pub mod mc;

use serde::{Deserialize, Serialize};

use crate::bounds::risk_bound;
use crate::error::{domain, Result};
use crate::meta::{run_p2l, CompressionResult, Dataset, Synthesizer};
use crate::rng;

pub use basis::MonomialBasis;
pub use christoffel::{fit_christoffel, ChristoffelModel, Evaluator, SINGULAR_RATIO};
pub use duffing::{duffing_terminal, rk4_step, DuffingConfig, InitDistribution};
pub use mc::{estimate_risk, model_risk_on_pool, risk_on_pool, volume_mc, AxisBox, RiskEstimate, VolumeEstimate};

/// Fits the Christoffel model on the initialization points followed by the
/// training list.
pub struct ChristoffelSynth<'a> {
    init: Vec<&'a [f64]>,
    basis: MonomialBasis,
    ridge: f64,
}

impl<'a> ChristoffelSynth<'a> {
    pub fn new(init: &'a [Vec<f64>], basis: MonomialBasis, ridge: f64) -> Self {
        Self {
            init: init.iter().map(Vec::as_slice).collect(),
            basis,
            ridge,
        }
    }

    pub fn initial(&self) -> Result<ChristoffelModel> {
        fit_christoffel(&self.init, &self.basis, self.ridge)
    }
}

impl Synthesizer<Vec<f64>> for ChristoffelSynth<'_> {
    type Decision = ChristoffelModel;

    fn synthesize(&self, train: &[&Vec<f64>]) -> Result<ChristoffelModel> {
        let all: Vec<&[f64]> = self
            .init
            .iter()
            .copied()
            .chain(train.iter().map(|z| z.as_slice()))
            .collect();
        fit_christoffel(&all, &self.basis, self.ridge)
    }
}

/// Output of [`reach_p2l`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReachOutcome {
    pub result: CompressionResult<ChristoffelModel>,
    /// `eps_bar(|T|, delta, N - N_i)`.
    pub eps: f64,
}

impl ReachOutcome {
    pub fn model(&self) -> &ChristoffelModel {
        &self.result.decision
    }
}

/// P2L for reachable sets. The decision is refit after every append; the
/// property is membership in the sublevel set and the dissatisfaction of a
/// point is its level `k(z)`.
pub fn reach_p2l(data: &Dataset<Vec<f64>>, degree: u32, delta: f64, ridge: f64) -> Result<ReachOutcome> {
    if data.n_init() == 0 {
        return Err(domain("reach_p2l needs at least one initialization point"));
    }
    let n_x = data.get(0).len();
    let synth = ChristoffelSynth::new(data.init_points(), MonomialBasis::new(n_x, degree)?, ridge);
    let h0 = synth.initial()?;
    let result = run_p2l(
        data,
        &synth,
        &|h: &ChristoffelModel, z: &Vec<f64>| h.contains(z).unwrap_or(false),
        |h: &ChristoffelModel, z: &Vec<f64>| h.inv_christoffel(z).unwrap_or(f64::INFINITY),
        h0,
    )?;
    let eps = risk_bound(result.train.len(), data.n_working(), delta)?;
    Ok(ReachOutcome { result, eps })
}

/// `n` terminal states from independent initial states, drawn block-wise
/// under `(seed, purpose)`.
pub fn duffing_samples(n: usize, cfg: &DuffingConfig, seed: u64, purpose: u64) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    rng::sample_blocks(n, seed, purpose, |r| {
        let x0 = cfg.init_distribution.sample(r);
        duffing_terminal(x0, cfg).map(|x| x.to_vec())
    })
    .into_iter()
    .collect()
}

/// Dataset of `n` terminal states whose first `n_init` entries initialize P2L.
pub fn duffing_dataset(n: usize, n_init: usize, cfg: &DuffingConfig, seed: u64) -> Result<Dataset<Vec<f64>>> {
    Dataset::new(duffing_samples(n, cfg, seed, rng::purpose::DATASET)?, n_init)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::eps_bar;
    use crate::BoundQuery;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn inside_initial_set_terminates_immediately() {
        let data = Dataset::new(pts(&[0.0, 1.0, 0.2, 0.5, 0.9]), 2).unwrap();
        let out = reach_p2l(&data, 1, 0.05, 0.0).unwrap();
        assert!(out.result.train.is_empty());
        assert_eq!(out.eps, eps_bar(&BoundQuery::new(0, 3, 0.05).unwrap()).eps);
    }

    #[test]
    fn one_dimensional_hand_trace() {
        // d = 1 in 1-D: k(x) = 1 + (x - mean)^2 / var, so the set is the
        // interval centred at the mean reaching the farthest training point.
        // init {0, 1}: S = [0, 1]; worst violator 3.0 -> S = [-1/3, 3];
        // worst violator -0.4 -> S = [-1.2, 3]; nothing left outside.
        let data = Dataset::new(pts(&[0.0, 1.0, 0.5, 3.0, -0.4, 1.2, 2.0, 0.9]), 2).unwrap();
        let out = reach_p2l(&data, 1, 0.1, 0.0).unwrap();
        assert_eq!(out.result.train, vec![3, 4]);
        assert_eq!(out.eps, risk_bound(2, 6, 0.1).unwrap());
        for i in data.working_indices() {
            assert!(out.model().contains(data.get(i)).unwrap());
        }
        assert!(!out.model().contains(&[-1.3]).unwrap());
        assert!(!out.model().contains(&[3.1]).unwrap());
    }

    #[test]
    fn working_points_outside_t_are_covered() {
        let cfg = DuffingConfig {
            t1: 5.0,
            dt: 0.05,
            ..DuffingConfig::default()
        };
        let data = duffing_dataset(300, 40, &cfg, 5).unwrap();
        let out = reach_p2l(&data, 3, 0.01, 0.0).unwrap();
        let model = out.model();
        for i in data.working_indices() {
            if !out.result.train.contains(&i) {
                assert!(model.contains(data.get(i)).unwrap());
            }
        }
        for &i in &out.result.train {
            assert!(model.contains(data.get(i)).unwrap());
        }
        assert!(out.eps > 0.0 && out.eps < 1.0);
    }

    #[test]
    fn requires_init_points() {
        let data = Dataset::new(pts(&[0.0, 1.0]), 0).unwrap();
        assert!(reach_p2l(&data, 1, 0.1, 0.0).is_err());
    }

    #[test]
    fn dataset_generation_is_reproducible() {
        let cfg = DuffingConfig {
            t1: 2.0,
            ..DuffingConfig::default()
        };
        let a = duffing_samples(50, &cfg, 8, rng::purpose::DATASET).unwrap();
        let b = duffing_samples(50, &cfg, 8, rng::purpose::DATASET).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, duffing_samples(50, &cfg, 9, rng::purpose::DATASET).unwrap());
    }
}
