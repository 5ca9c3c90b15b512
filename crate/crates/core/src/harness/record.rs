use serde::{Deserialize, Serialize};

/// One certificate at one cost level, with its Monte-Carlo tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub gamma: f64,
    pub k: usize,
    pub eps: f64,
    pub tail_mc: f64,
}

/// Outcome of one method in one repetition. Fields that do not apply to
/// the experiment are `None`; a failed run keeps `rep` and `method` and
/// carries the error message.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunRecord {
    pub rep: usize,
    pub method: String,
    pub eps: Option<f64>,
    pub risk_mc: Option<f64>,
    pub risk_se: Option<f64>,
    pub risk_samples: Option<usize>,
    pub volume: Option<f64>,
    pub volume_se: Option<f64>,
    pub volume_samples: Option<usize>,
    pub t_size: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub delta: Option<f64>,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    /// Training fraction chosen by a split baseline.
    pub fraction: Option<f64>,
    /// A split baseline found no fraction meeting its target.
    pub fallback: Option<bool>,
    pub levels: Vec<LevelRecord>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn new(rep: usize, method: impl Into<String>) -> Self {
        Self {
            rep,
            method: method.into(),
            ..Self::default()
        }
    }

    pub fn failed(rep: usize, method: impl Into<String>, error: impl ToString) -> Self {
        Self {
            error: Some(error.to_string()),
            ..Self::new(rep, method)
        }
    }

    pub fn is_failed(&self) -> bool {
        self.error.is_some()
    }

    /// Named scalar metrics used by the summary.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let mut push = |name, v: Option<f64>| {
            if let Some(v) = v {
                out.push((name, v));
            }
        };
        push("eps", self.eps);
        push("risk_mc", self.risk_mc);
        push("volume", self.volume);
        push("t_size", self.t_size.map(|t| t as f64));
        push("theta1", self.theta1);
        push("theta2", self.theta2);
        push("fraction", self.fraction);
        out
    }
}
