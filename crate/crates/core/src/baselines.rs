//! Split-based reachability baselines: the test-set certificate and split
//! conformal prediction, each swept over training fractions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bounds::{binomial_tail_inversion, conformal_eps};
use crate::error::{domain, Result};
use crate::reach::{fit_christoffel, ChristoffelModel, MonomialBasis};
use crate::rng::{self, purpose};

/// Candidate training fractions and the confidence spent on each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitPlan {
    /// Share of the dataset used for fitting; the rest tests or calibrates.
    pub fractions: Vec<f64>,
    pub delta_per_fraction: f64,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            fractions: (1..=9).map(|i| i as f64 / 10.0).collect(),
            delta_per_fraction: 0.01,
            seed: 0,
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(domain("split plan needs at least one fraction"));
        }
        if self.fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(domain("fractions must lie in (0, 1)"));
        }
        if self.fractions.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(domain("fractions must be strictly increasing"));
        }
        if !(self.delta_per_fraction > 0.0 && self.delta_per_fraction < 1.0) {
            return Err(domain("delta_per_fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Confidence of the whole sweep by the union bound.
    pub fn joint_confidence(&self) -> f64 {
        1.0 - self.fractions.len() as f64 * self.delta_per_fraction
    }

    /// Seeded permutation of `0..n`, shared by every fraction.
    pub fn permutation(&self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng::stream(self.seed, purpose::SPLIT, 0));
        idx
    }

    /// `(fit, held_out)` index sets for `fraction`: a prefix/suffix split of
    /// the permutation, each side holding at least one point.
    pub fn split(&self, n: usize, fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
        if n < 2 {
            return Err(domain("splitting needs at least two points"));
        }
        let n_fit = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut perm = self.permutation(n);
        let held = perm.split_off(n_fit);
        Ok((perm, held))
    }
}

/// One evaluated fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub fraction: f64,
    pub n_fit: usize,
    pub n_held: usize,
    /// Test violations (test-set) or order-statistic index (conformal).
    pub k: usize,
    pub eps: f64,
    /// Only evaluated for candidates that meet the target.
    pub volume: Option<f64>,
}

/// Selected set of a baseline sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub model: ChristoffelModel,
    pub eps: f64,
    pub fraction: f64,
    pub k: usize,
    pub volume: Option<f64>,
    /// No candidate met the target; the result is the smallest-eps one.
    pub fallback: bool,
    pub candidates: Vec<Candidate>,
    /// Fractions dropped, with the reason.
    pub skipped: Vec<(f64, String)>,
}

fn gather<'a>(points: &'a [Vec<f64>], idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().map(|&i| points[i].as_slice()).collect()
}

fn pick_min_volume(feasible: Vec<(Candidate, ChristoffelModel)>) -> Option<(Candidate, ChristoffelModel)> {
    // ties in volume keep the smaller fraction
    feasible.into_iter().reduce(|best, c| {
        if c.0.volume.unwrap_or(f64::INFINITY) < best.0.volume.unwrap_or(f64::INFINITY) {
            c
        } else {
            best
        }
    })
}

/// Test-set baseline: fit on the training split, count violations on the
/// test split, certify with binomial tail inversion, and keep the smallest
/// volume among fractions with `eps <= target_eps`.
pub fn testset_reach<V>(
    points: &[Vec<f64>],
    plan: &SplitPlan,
    basis: &MonomialBasis,
    ridge: f64,
    target_eps: f64,
    volume: V,
) -> Result<BaselineOutcome>
where
    V: Fn(&ChristoffelModel) -> Result<f64>,
{
    plan.validate()?;
    let mut candidates = Vec::new();
    let mut skipped = Vec::new();
    let mut feasible = Vec::new();
    let mut best_eps: Option<(Candidate, ChristoffelModel)> = None;
    for &fraction in &plan.fractions {
        let (fit_idx, test_idx) = plan.split(points.len(), fraction)?;
        let model = match fit_christoffel(&gather(points, &fit_idx), basis, ridge) {
            Ok(m) => m,
            Err(e) => {
                skipped.push((fraction, e.to_string()));
                continue;
            }
        };
        let mut ev = model.evaluator();
        let k = test_idx.iter().filter(|&&i| !ev.contains(&points[i])).count();
        let eps = binomial_tail_inversion(k, test_idx.len(), plan.delta_per_fraction)?;
        let mut cand = Candidate {
            fraction,
            n_fit: fit_idx.len(),
            n_held: test_idx.len(),
            k,
            eps,
            volume: None,
        };
        if eps <= target_eps {
            cand.volume = Some(volume(&model)?);
            feasible.push((cand.clone(), model));
        } else if best_eps.as_ref().is_none_or(|(b, _)| eps < b.eps) {
            best_eps = Some((cand.clone(), model));
        }
        candidates.push(cand);
    }
    let fallback = feasible.is_empty();
    let (chosen, model) = match pick_min_volume(feasible) {
        Some(c) => c,
        None => best_eps.ok_or_else(|| domain("every split fraction failed to fit"))?,
    };
    Ok(BaselineOutcome {
        model,
        eps: chosen.eps,
        fraction: chosen.fraction,
        k: chosen.k,
        volume: chosen.volume,
        fallback,
        candidates,
        skipped,
    })
}

/// Calibration scores sorted by `(score, index)`.
pub fn sorted_scores(model: &ChristoffelModel, points: &[Vec<f64>], cal_idx: &[usize]) -> Vec<(f64, usize)> {
    let mut ev = model.evaluator();
    let mut s: Vec<(f64, usize)> = cal_idx.iter().map(|&i| (ev.level(&points[i]), i)).collect();
    s.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    s
}

/// Largest `k` in `1..=n` with `conformal_eps(k, n, delta) >= target`, i.e.
/// the smallest certificate not below the target. A target of 1 or more
/// places no constraint and gives `k = 1`.
pub fn conformal_index(n: usize, delta: f64, target: f64) -> Result<Option<usize>> {
    if target >= 1.0 {
        return Ok(Some(1));
    }
    if conformal_eps(1, n, delta)? < target {
        return Ok(None);
    }
    // conformal_eps decreases in k
    let (mut lo, mut hi) = (1, n);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if conformal_eps(mid, n, delta)? >= target {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(Some(lo))
}

/// Split conformal baseline: scores are levels of the model fitted on the
/// training split; the set is the sublevel set at the `k`-th smallest
/// calibration score, with `k` chosen so the certificate is the smallest one
/// not below `target_eps`. Fractions where no `k` qualifies are dropped. The
/// smallest volume across fractions wins.
pub fn conformal_reach<V>(
    points: &[Vec<f64>],
    plan: &SplitPlan,
    basis: &MonomialBasis,
    ridge: f64,
    target_eps: f64,
    volume: V,
) -> Result<BaselineOutcome>
where
    V: Fn(&ChristoffelModel) -> Result<f64>,
{
    plan.validate()?;
    let mut candidates = Vec::new();
    let mut skipped = Vec::new();
    let mut feasible = Vec::new();
    for &fraction in &plan.fractions {
        let (fit_idx, cal_idx) = plan.split(points.len(), fraction)?;
        let model = match fit_christoffel(&gather(points, &fit_idx), basis, ridge) {
            Ok(m) => m,
            Err(e) => {
                skipped.push((fraction, e.to_string()));
                continue;
            }
        };
        let n_cal = cal_idx.len();
        let Some(k) = conformal_index(n_cal, plan.delta_per_fraction, target_eps)? else {
            skipped.push((
                fraction,
                format!("no order statistic of {n_cal} calibration scores reaches eps {target_eps}"),
            ));
            continue;
        };
        let scores = sorted_scores(&model, points, &cal_idx);
        let set = model.with_level(scores[k - 1].0);
        let cand = Candidate {
            fraction,
            n_fit: fit_idx.len(),
            n_held: n_cal,
            k,
            eps: conformal_eps(k, n_cal, plan.delta_per_fraction)?,
            volume: Some(volume(&set)?),
        };
        candidates.push(cand.clone());
        feasible.push((cand, set));
    }
    let (chosen, model) =
        pick_min_volume(feasible).ok_or_else(|| domain("no split fraction reaches the target certificate"))?;
    Ok(BaselineOutcome {
        model,
        eps: chosen.eps,
        fraction: chosen.fraction,
        k: chosen.k,
        volume: chosen.volume,
        fallback: false,
        candidates,
        skipped,
    })
}
