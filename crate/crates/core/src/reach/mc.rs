use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::reach::christoffel::{ChristoffelModel, Evaluator};
use crate::rng::{self, purpose, StreamRng};

/// Axis-aligned box `[low_i, high_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl AxisBox {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != high.len() || low.is_empty() {
            return Err(domain("box bounds need equal, positive length"));
        }
        if low.iter().zip(&high).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(domain("box needs finite low < high on every axis"));
        }
        Ok(Self { low, high })
    }

    /// Bounding box of `points` widened by `margin` times its width on each
    /// side.
    pub fn around<P: AsRef<[f64]>>(points: &[P], margin: f64) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| domain("cannot bound an empty point set"))?
            .as_ref();
        let mut low = first.to_vec();
        let mut high = first.to_vec();
        for p in points {
            for (i, &v) in p.as_ref().iter().enumerate() {
                low[i] = low[i].min(v);
                high[i] = high[i].max(v);
            }
        }
        for (l, h) in low.iter_mut().zip(high.iter_mut()) {
            let w = (*h - *l).max(1e-12);
            *l -= margin * w;
            *h += margin * w;
        }
        Self::new(low, high)
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn volume(&self) -> f64 {
        self.low.iter().zip(&self.high).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.low.iter().zip(&self.high))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        for (o, (l, h)) in out.iter_mut().zip(self.low.iter().zip(&self.high)) {
            *o = l + (h - l) * rng.random::<f64>();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Hit-or-miss estimate of `vol(S ∩ box)`.
pub fn volume_mc(model: &ChristoffelModel, bbox: &AxisBox, n_samples: usize, seed: u64) -> Result<VolumeEstimate> {
    if n_samples == 0 {
        return Err(domain("need at least one volume sample"));
    }
    if bbox.dim() != model.basis().n_x() {
        return Err(crate::Error::DimensionMismatch {
            expected: model.basis().n_x(),
            got: bbox.dim(),
        });
    }
    let hits = rng::count_hits_with(
        n_samples,
        seed,
        purpose::VOLUME,
        || (model.evaluator(), vec![0.0; bbox.dim()]),
        |(ev, x): &mut (Evaluator<'_>, Vec<f64>), r| {
            bbox.sample_into(r, x);
            ev.contains(x)
        },
    );
    let p = hits as f64 / n_samples as f64;
    let v = bbox.volume();
    Ok(VolumeEstimate {
        volume: p * v,
        std_error: v * (p * (1.0 - p) / n_samples as f64).sqrt(),
        n_samples,
    })
}

/// Fraction of samples outside a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub risk: f64,
    pub std_error: f64,
    pub violations: usize,
    pub n_samples: usize,
}

impl RiskEstimate {
    pub fn from_counts(violations: usize, n_samples: usize) -> Self {
        let p = violations as f64 / n_samples as f64;
        Self {
            risk: p,
            std_error: (p * (1.0 - p) / n_samples as f64).sqrt(),
            violations,
            n_samples,
        }
    }
}

/// Draws `n_mc` fresh scenarios from `sampler` and counts those rejected by
/// `membership`.
pub fn estimate_risk<Z, S, M>(membership: M, sampler: S, n_mc: usize, seed: u64) -> Result<RiskEstimate>
where
    S: Fn(&mut StreamRng) -> Z + Sync,
    M: Fn(&Z) -> bool + Sync,
{
    if n_mc == 0 {
        return Err(domain("need at least one risk sample"));
    }
    let misses = rng::count_hits(n_mc, seed, purpose::RISK, |r| !membership(&sampler(r)));
    Ok(RiskEstimate::from_counts(misses, n_mc))
}

/// Risk against a pre-drawn sample pool; `init` builds per-worker scratch.
pub fn risk_on_pool<Z, St, I, M>(pool: &[Z], init: I, membership: M) -> Result<RiskEstimate>
where
    Z: Sync,
    I: Fn() -> St + Sync + Send,
    M: Fn(&mut St, &Z) -> bool + Sync + Send,
{
    if pool.is_empty() {
        return Err(domain("empty risk pool"));
    }
    let misses: usize = pool
        .par_chunks(rng::BLOCK)
        .map(|chunk| {
            let mut st = init();
            chunk.iter().filter(|z| !membership(&mut st, z)).count()
        })
        .sum();
    Ok(RiskEstimate::from_counts(misses, pool.len()))
}

/// Fraction of `pool` outside the reachable set of `model`.
pub fn model_risk_on_pool<P: AsRef<[f64]> + Sync>(model: &ChristoffelModel, pool: &[P]) -> Result<RiskEstimate> {
    risk_on_pool(pool, || model.evaluator(), |ev, z| ev.contains(z.as_ref()))
}
