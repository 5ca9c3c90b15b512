//! The Pick-to-Learn family of meta-algorithms.
//!
//! All variants share one loop: keep an ordered training list `T`, pick the
//! top-ranked point not yet in `T`, append it, re-synthesize. They differ in
//! when the loop stops and what is reported at the end:
//!
//! * [`run_p2l`] stops once the decision satisfies the property on every
//!   unused working point.
//! * [`run_p2l_plus`] stops once no unused point ranks above the `Stop`
//!   threshold of a [`SelectionOrder`], then reports the property violators
//!   `U` among the unused points.
//! * [`run_p2l_tts`] runs exactly `M` appends.
//! * [`run_all_iterations`] records every prefix of a single full run.
//!
//! The certificate for an output `(h, T, U)` is `eps_bar(|T| + |U|, delta, n)`
//! with `n` the number of working points (see [`certify`]).
//!
//! Every selection ties are broken by ascending dataset index, so given a
//! deterministic synthesizer each run is a pure function of the dataset.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{domain, Error, Result};

/// Ordered scenarios with stable indices `0..len`.
///
/// The first `n_init` points are reserved for initialization; the remaining
/// ones form the working set the meta-algorithms draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<Z> {
    points: Vec<Z>,
    n_init: usize,
}

impl<Z> Dataset<Z> {
    pub fn new(points: Vec<Z>, n_init: usize) -> Result<Self> {
        if n_init >= points.len() {
            return Err(domain(format!(
                "dataset of {} points leaves no working points after {} initialization points",
                points.len(),
                n_init
            )));
        }
        Ok(Self { points, n_init })
    }

    /// Dataset whose every point is a working point.
    pub fn working(points: Vec<Z>) -> Result<Self> {
        Self::new(points, 0)
    }

    pub fn points(&self) -> &[Z] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_init(&self) -> usize {
        self.n_init
    }

    pub fn init_points(&self) -> &[Z] {
        &self.points[..self.n_init]
    }

    pub fn working_indices(&self) -> std::ops::Range<usize> {
        self.n_init..self.points.len()
    }

    /// `N - N_i`, the sample size that enters the certificate.
    pub fn n_working(&self) -> usize {
        self.points.len() - self.n_init
    }

    pub fn get(&self, index: usize) -> &Z {
        &self.points[index]
    }

    pub fn into_points(self) -> Vec<Z> {
        self.points
    }
}

/// Maps an ordered training list to a decision.
///
/// Must be deterministic: the same list (same points, same order) always
/// yields the same decision.
pub trait Synthesizer<Z> {
    type Decision;

    fn synthesize(&self, train: &[&Z]) -> Result<Self::Decision>;

    /// Re-synthesis after one point was appended to the list that produced
    /// `previous`. Implementations may warm-start from `previous`, but the
    /// result must equal `synthesize(train)`.
    fn synthesize_from(&self, previous: &Self::Decision, train: &[&Z]) -> Result<Self::Decision> {
        let _ = previous;
        self.synthesize(train)
    }
}

impl<Z, D, F> Synthesizer<Z> for F
where
    F: Fn(&[&Z]) -> Result<D>,
{
    type Decision = D;

    fn synthesize(&self, train: &[&Z]) -> Result<D> {
        self(train)
    }
}

/// The property `phi(h, z)`: `true` when decision `h` is satisfactory on `z`.
pub trait Property<Z, D> {
    fn holds(&self, decision: &D, z: &Z) -> bool;
}

impl<Z, D, F> Property<Z, D> for F
where
    F: Fn(&D, &Z) -> bool,
{
    fn holds(&self, decision: &D, z: &Z) -> bool {
        self(decision, z)
    }
}

/// A total order over scenarios extended with a `Stop` threshold, possibly
/// depending on the current training list and decision.
pub trait SelectionOrder<Z, D> {
    /// `Greater` when `a` ranks above `b`. Returning `Equal` defers to the
    /// dataset index (lower index ranks higher).
    fn compare(&self, train: &[&Z], decision: &D, a: &Z, b: &Z) -> Ordering;

    /// `Stop <= z`: the loop continues while some unused point exceeds the
    /// threshold.
    fn exceeds_stop(&self, train: &[&Z], decision: &D, z: &Z) -> bool;
}

/// The order under which P2L+ reproduces P2L: violators rank above `Stop` by
/// dissatisfaction, satisfied points below it.
pub struct PropertyOrder<P, F> {
    pub property: P,
    pub dissatisfaction: F,
}

impl<P, F> PropertyOrder<P, F> {
    pub fn new(property: P, dissatisfaction: F) -> Self {
        Self {
            property,
            dissatisfaction,
        }
    }
}

impl<Z, D, P, F> SelectionOrder<Z, D> for PropertyOrder<P, F>
where
    P: Property<Z, D>,
    F: Fn(&D, &Z) -> f64,
{
    fn compare(&self, _train: &[&Z], decision: &D, a: &Z, b: &Z) -> Ordering {
        let va = !self.property.holds(decision, a);
        let vb = !self.property.holds(decision, b);
        match (va, vb) {
            (true, true) => (self.dissatisfaction)(decision, a)
                .total_cmp(&(self.dissatisfaction)(decision, b)),
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => Ordering::Equal,
        }
    }

    fn exceeds_stop(&self, _train: &[&Z], decision: &D, z: &Z) -> bool {
        !self.property.holds(decision, z)
    }
}

/// Ranks points by a real-valued score of `(h, z)`; never stops on its own.
/// Used as the selection criterion for time-triggered runs.
pub struct ScoreOrder<F>(pub F);

impl<Z, D, F> SelectionOrder<Z, D> for ScoreOrder<F>
where
    F: Fn(&D, &Z) -> f64,
{
    fn compare(&self, _train: &[&Z], decision: &D, a: &Z, b: &Z) -> Ordering {
        (self.0)(decision, a).total_cmp(&(self.0)(decision, b))
    }

    fn exceeds_stop(&self, _train: &[&Z], _decision: &D, _z: &Z) -> bool {
        true
    }
}

/// Wraps an order so that `Stop` sits below every point while `|T| < M` and
/// above every point afterwards.
pub struct TimeTriggered<O> {
    pub inner: O,
    pub budget: usize,
}

impl<Z, D, O: SelectionOrder<Z, D>> SelectionOrder<Z, D> for TimeTriggered<O> {
    fn compare(&self, train: &[&Z], decision: &D, a: &Z, b: &Z) -> Ordering {
        self.inner.compare(train, decision, a, b)
    }

    fn exceeds_stop(&self, train: &[&Z], _decision: &D, _z: &Z) -> bool {
        train.len() < self.budget
    }
}

/// Output `(h, T, U)` of a meta-algorithm run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionResult<D> {
    pub decision: D,
    /// Dataset indices in append order.
    pub train: Vec<usize>,
    /// Dataset indices of unused working points violating the property.
    pub violations: Vec<usize>,
    pub iterations: usize,
}

impl<D> CompressionResult<D> {
    /// `|T| + |U|`.
    pub fn compression_size(&self) -> usize {
        self.train.len() + self.violations.len()
    }

    pub fn train_points<'a, Z>(&self, data: &'a Dataset<Z>) -> Vec<&'a Z> {
        self.train.iter().map(|&i| data.get(i)).collect()
    }
}

/// Training-list bookkeeping shared by every variant.
struct Loop<'a, Z> {
    data: &'a Dataset<Z>,
    used: Vec<bool>,
    train: Vec<usize>,
    train_refs: Vec<&'a Z>,
}

impl<'a, Z> Loop<'a, Z> {
    fn new(data: &'a Dataset<Z>) -> Self {
        Self {
            data,
            used: vec![false; data.len()],
            train: Vec::new(),
            train_refs: Vec::new(),
        }
    }

    fn unused(&self) -> impl Iterator<Item = usize> + '_ {
        self.data.working_indices().filter(move |&i| !self.used[i])
    }

    fn append<S>(&mut self, index: usize, synth: &S, current: &S::Decision) -> Result<S::Decision>
    where
        S: Synthesizer<Z>,
    {
        self.used[index] = true;
        self.train.push(index);
        self.train_refs.push(self.data.get(index));
        synth
            .synthesize_from(current, &self.train_refs)
            .map_err(|e| Error::Synthesis {
                train: self.train.clone(),
                source: Box::new(e),
            })
    }

    /// Top-ranked unused point under `order`; ties go to the lower index.
    fn select_max<D, O: SelectionOrder<Z, D>>(&self, order: &O, decision: &D) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in self.unused() {
            best = match best {
                None => Some(i),
                Some(b) => {
                    let ord = order.compare(&self.train_refs, decision, self.data.get(i), self.data.get(b));
                    // strictly greater wins; equal keeps the earlier (lower) index
                    if ord == Ordering::Greater {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best
    }

    fn violators<D, P: Property<Z, D>>(&self, prop: &P, decision: &D) -> Vec<usize> {
        self.unused()
            .filter(|&i| !prop.holds(decision, self.data.get(i)))
            .collect()
    }

    fn finish<D>(self, decision: D, violations: Vec<usize>) -> CompressionResult<D> {
        let iterations = self.train.len();
        CompressionResult {
            decision,
            train: self.train,
            violations,
            iterations,
        }
    }
}

/// Basic P2L: append the most dissatisfied violator until none is left.
pub fn run_p2l<Z, S, P, F>(
    data: &Dataset<Z>,
    synth: &S,
    prop: &P,
    dissatisfaction: F,
    init_decision: S::Decision,
) -> Result<CompressionResult<S::Decision>>
where
    S: Synthesizer<Z>,
    P: Property<Z, S::Decision>,
    F: Fn(&S::Decision, &Z) -> f64,
{
    let mut state = Loop::new(data);
    let mut h = init_decision;
    loop {
        let mut worst: Option<(usize, f64)> = None;
        for i in state.unused() {
            let z = data.get(i);
            if prop.holds(&h, z) {
                continue;
            }
            let score = dissatisfaction(&h, z);
            if worst.is_none_or(|(_, s)| score.total_cmp(&s) == Ordering::Greater) {
                worst = Some((i, score));
            }
        }
        let Some((pick, _)) = worst else {
            break;
        };
        h = state.append(pick, synth, &h)?;
    }
    Ok(state.finish(h, Vec::new()))
}

/// P2L+: run until no unused point exceeds `Stop`, then collect the property
/// violators among the unused points.
pub fn run_p2l_plus<Z, S, O, P>(
    data: &Dataset<Z>,
    synth: &S,
    order: &O,
    prop: &P,
    init_decision: S::Decision,
) -> Result<CompressionResult<S::Decision>>
where
    S: Synthesizer<Z>,
    O: SelectionOrder<Z, S::Decision>,
    P: Property<Z, S::Decision>,
{
    let mut state = Loop::new(data);
    let mut h = init_decision;
    loop {
        let any_above = state
            .unused()
            .any(|i| order.exceeds_stop(&state.train_refs, &h, data.get(i)));
        if !any_above {
            break;
        }
        let pick = state
            .select_max(order, &h)
            .expect("a point above Stop is unused");
        h = state.append(pick, synth, &h)?;
    }
    let violations = state.violators(prop, &h);
    Ok(state.finish(h, violations))
}

/// P2L with a time-triggered stop: exactly `m` appends.
pub fn run_p2l_tts<Z, S, O, P>(
    data: &Dataset<Z>,
    m: usize,
    synth: &S,
    selection_order: &O,
    prop: &P,
    init_decision: S::Decision,
) -> Result<CompressionResult<S::Decision>>
where
    S: Synthesizer<Z>,
    O: SelectionOrder<Z, S::Decision>,
    P: Property<Z, S::Decision>,
{
    if m > data.n_working() {
        return Err(domain(format!(
            "iteration budget {m} exceeds the {} working points",
            data.n_working()
        )));
    }
    let mut state = Loop::new(data);
    let mut h = init_decision;
    for _ in 0..m {
        let pick = state
            .select_max(selection_order, &h)
            .expect("budget bounded by the working set");
        h = state.append(pick, synth, &h)?;
    }
    let violations = state.violators(prop, &h);
    Ok(state.finish(h, violations))
}

/// One prefix of a full time-triggered run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationCertificate<D> {
    pub m: usize,
    pub result: CompressionResult<D>,
    /// `eps_bar(|T_M| + |U_M|, delta, N - N_i)`.
    pub eps: f64,
}

/// Outputs of [`run_all_iterations`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllIterations<D> {
    /// The `M = 0` output (initial decision, `T` empty). Not part of the
    /// certified family.
    pub initial: CompressionResult<D>,
    /// Outputs for `M = 1, ..., N - N_i`, each with its own bound.
    pub levels: Vec<IterationCertificate<D>>,
    /// Per-statement confidence parameter.
    pub delta: f64,
    /// `1 - (N - N_i) * delta`, the confidence with which every bound in
    /// `levels` holds at once.
    pub joint_confidence: f64,
}

impl<D> AllIterations<D> {
    /// The level with the smallest `|T_M| + |U_M|` (earliest on ties).
    pub fn best(&self) -> Option<&IterationCertificate<D>> {
        self.levels
            .iter()
            .min_by_key(|c| (c.result.compression_size(), c.m))
    }
}

/// Runs the time-triggered loop once to exhaustion, keeping `(h_M, T_M, U_M)`
/// and its certificate at every step.
pub fn run_all_iterations<Z, S, O, P>(
    data: &Dataset<Z>,
    synth: &S,
    selection_order: &O,
    prop: &P,
    init_decision: S::Decision,
    delta: f64,
) -> Result<AllIterations<S::Decision>>
where
    S: Synthesizer<Z>,
    S::Decision: Clone,
    O: SelectionOrder<Z, S::Decision>,
    P: Property<Z, S::Decision>,
{
    let n = data.n_working();
    bounds::BoundQuery::new(0, n, delta)?;
    let mut state = Loop::new(data);
    let mut h = init_decision;
    let snapshot = |state: &Loop<'_, Z>, h: &S::Decision| CompressionResult {
        decision: h.clone(),
        train: state.train.clone(),
        violations: state.violators(prop, h),
        iterations: state.train.len(),
    };
    let initial = snapshot(&state, &h);
    let mut levels = Vec::with_capacity(n);
    for m in 1..=n {
        let pick = state
            .select_max(selection_order, &h)
            .expect("m bounded by the working set");
        h = state.append(pick, synth, &h)?;
        let result = snapshot(&state, &h);
        let eps = bounds::risk_bound(result.compression_size(), n, delta)?;
        levels.push(IterationCertificate { m, result, eps });
    }
    Ok(AllIterations {
        initial,
        levels,
        delta,
        joint_confidence: 1.0 - n as f64 * delta,
    })
}

/// `eps_bar(|T| + |U|, delta, n_effective)` for a finished run.
pub fn certify<D>(result: &CompressionResult<D>, delta: f64, n_effective: usize) -> Result<f64> {
    let k = result.compression_size();
    if k > n_effective {
        return Err(domain(format!(
            "compression size {k} exceeds the effective sample size {n_effective}"
        )));
    }
    bounds::risk_bound(k, n_effective, delta)
}
