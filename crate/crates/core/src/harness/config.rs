use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::SplitPlan;
use crate::control::{default_cost_levels, LinearBenchmark, PolicyGrid};
use crate::error::{Error, Result};
use crate::reach::{AxisBox, DuffingConfig, InitDistribution};

/// A complete experiment description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub reps: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn one() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    BoundTable(BoundTableConfig),
    Reach(ReachConfig),
    Oc(OcConfig),
    OcCdf(OcCdfConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::BoundTable(_) => "bound-table",
            Experiment::Reach(_) => "reach",
            Experiment::Oc(_) => "oc",
            Experiment::OcCdf(_) => "oc-cdf",
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            reps: 1,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        let c = |e: Error| Error::Config(e.to_string());
        match &self.experiment {
            Experiment::BoundTable(b) => b.validate(),
            Experiment::Reach(r) => r.validate().map_err(c),
            Experiment::Oc(o) => o.validate().map_err(c),
            Experiment::OcCdf(o) => o.validate().map_err(c),
        }
    }
}

/// Rows `(k, N, delta)` of the bound table. Without `ks`, every
/// `k = 0..=N` is listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundTableConfig {
    pub ns: Vec<usize>,
    pub deltas: Vec<f64>,
    pub ks: Option<Vec<usize>>,
}

impl Default for BoundTableConfig {
    fn default() -> Self {
        Self {
            ns: vec![500],
            deltas: vec![1e-2, 1e-4, 1e-6],
            ks: None,
        }
    }
}

impl BoundTableConfig {
    fn validate(&self) -> Result<()> {
        if self.ns.contains(&0) || self.deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(Error::Config("bound table needs N >= 1 and delta in (0, 1)".into()));
        }
        Ok(())
    }

    /// `(k, n, delta)` in emission order: by `n`, then `delta`, then `k`.
    pub fn rows(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &delta in &self.deltas {
                let ks: Vec<usize> = match &self.ks {
                    Some(ks) => ks.iter().copied().filter(|&k| k <= n).collect(),
                    None => (0..=n).collect(),
                };
                out.extend(ks.into_iter().map(|k| (k, n, delta)));
            }
        }
        out
    }
}

/// Region used for Monte-Carlo volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VolumeBox {
    Fixed { low: Vec<f64>, high: Vec<f64> },
    /// Bounding box of the repetition's dataset, widened by `margin` times
    /// its width on each side.
    Auto { margin: f64 },
}

impl Default for VolumeBox {
    fn default() -> Self {
        VolumeBox::Fixed {
            low: vec![-3.0, -3.5],
            high: vec![3.0, 3.5],
        }
    }
}

impl VolumeBox {
    pub fn resolve(&self, points: &[Vec<f64>]) -> Result<AxisBox> {
        match self {
            VolumeBox::Fixed { low, high } => AxisBox::new(low.clone(), high.clone()),
            VolumeBox::Auto { margin } => AxisBox::around(points, *margin),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub enabled: bool,
    pub fractions: Vec<f64>,
    /// Confidence parameter of each fraction; defaults to the P2L delta.
    pub delta_per_fraction: Option<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            fractions: SplitPlan::default().fractions,
            delta_per_fraction: None,
        }
    }
}

/// Reachable-set experiment on the Duffing oscillator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachConfig {
    #[serde(alias = "N")]
    pub n: usize,
    #[serde(alias = "N_i")]
    pub n_init: usize,
    #[serde(alias = "d")]
    pub degree: u32,
    pub delta: f64,
    pub ridge: f64,
    pub duffing: DuffingConfig,
    /// Overrides `duffing.init_distribution` when present.
    pub init_distribution: Option<InitDistribution>,
    pub volume_box: VolumeBox,
    pub volume_samples: usize,
    /// Size of the fresh terminal-state pool used for empirical risks,
    /// drawn once per experiment.
    pub mc_samples: usize,
    pub baselines: BaselineConfig,
}

impl Default for ReachConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            n_init: 200,
            degree: 10,
            delta: 0.01,
            ridge: 0.0,
            duffing: DuffingConfig::default(),
            init_distribution: None,
            volume_box: VolumeBox::default(),
            volume_samples: 200_000,
            mc_samples: 50_000,
            baselines: BaselineConfig::default(),
        }
    }
}

impl ReachConfig {
    pub fn dynamics(&self) -> DuffingConfig {
        let mut d = self.duffing.clone();
        if let Some(init) = &self.init_distribution {
            d.init_distribution = init.clone();
        }
        d
    }

    pub fn split_plan(&self, seed: u64) -> SplitPlan {
        SplitPlan {
            fractions: self.baselines.fractions.clone(),
            delta_per_fraction: self.baselines.delta_per_fraction.unwrap_or(self.delta),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        self.dynamics().validate()?;
        if self.n_init == 0 || self.n_init >= self.n {
            return Err(Error::Config("need 1 <= N_i < N".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config("delta must lie in (0, 1)".into()));
        }
        if self.volume_samples == 0 || self.mc_samples == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        if let VolumeBox::Fixed { low, high } = &self.volume_box {
            AxisBox::new(low.clone(), high.clone())?;
            if low.len() != 2 {
                return Err(Error::Config("volume box must be two-dimensional".into()));
            }
        }
        if self.baselines.enabled {
            self.split_plan(0).validate()?;
        }
        Ok(())
    }
}

/// Certified cost threshold for the scalar linear benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcConfig {
    #[serde(alias = "N")]
    pub n: usize,
    #[serde(alias = "N_i")]
    pub n_init: usize,
    pub delta: f64,
    pub j_bar: f64,
    pub bench: LinearBenchmark,
    pub grid: PolicyGrid,
    pub mc_samples: usize,
}

impl Default for OcConfig {
    fn default() -> Self {
        Self {
            n: 128,
            n_init: 1,
            delta: 0.01,
            j_bar: 4.0,
            bench: LinearBenchmark::default(),
            grid: PolicyGrid::default(),
            mc_samples: 10_000,
        }
    }
}

impl OcConfig {
    fn validate(&self) -> Result<()> {
        self.bench.validate()?;
        self.grid.validate()?;
        if self.n < 2 || self.n_init == 0 || self.n_init >= self.n {
            return Err(Error::Config("need N >= 2 and 1 <= N_i < N".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) || self.mc_samples == 0 {
            return Err(Error::Config("need delta in (0, 1) and mc_samples >= 1".into()));
        }
        Ok(())
    }
}

/// Simultaneous certificates at several cost levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcCdfConfig {
    #[serde(alias = "N")]
    pub n: usize,
    #[serde(alias = "N_i")]
    pub n_init: usize,
    pub delta_per_level: f64,
    pub levels: Vec<f64>,
    pub bench: LinearBenchmark,
    pub grid: PolicyGrid,
    pub mc_samples: usize,
}

impl Default for OcCdfConfig {
    fn default() -> Self {
        Self {
            n: 128,
            n_init: 1,
            delta_per_level: 0.01,
            levels: default_cost_levels(),
            bench: LinearBenchmark::default(),
            grid: PolicyGrid::default(),
            mc_samples: 10_000,
        }
    }
}

impl OcCdfConfig {
    fn validate(&self) -> Result<()> {
        OcConfig {
            n: self.n,
            n_init: self.n_init,
            delta: self.delta_per_level,
            j_bar: 0.0,
            bench: self.bench.clone(),
            grid: self.grid.clone(),
            mc_samples: self.mc_samples,
        }
        .validate()?;
        if self.levels.is_empty() || self.levels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("levels must be nonempty and strictly increasing".into()));
        }
        Ok(())
    }
}
