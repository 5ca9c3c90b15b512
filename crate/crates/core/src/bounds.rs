//! Distribution-free risk certificates.
//!
//! The main quantity is `eps_bar(k, delta, n)`: the risk bound attached to a
//! compression of size `k` out of `n` scenarios at confidence `1 - delta`.
//! It is the root on `[k/n, 1]` of
//!
//! ```text
//! psi(eps) = (delta / n) * sum_{m=k}^{n-1} [C(m,k) / C(n,k)] * (1 - eps)^-(n-m)  = 1
//! ```
//!
//! and is set to 1 when `k = n`. Two independent routes are provided:
//! [`eps_bar`] bisects an incomplete-beta reformulation of the same equation,
//! [`eps_bar_oracle`] bisects `psi` itself in log space. The second exists to
//! cross-check the first.
//!
//! Test-set and split-conformal certificates are exact binomial tail
//! inversions ([`binomial_tail_inversion`], [`conformal_eps`]).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{ln_choose, log_sum_exp, reg_inc_beta};

/// Interval width at which the incomplete-beta bisection stops.
pub const BISECTION_TOL: f64 = 1e-10;
/// Hard cap on bisection steps.
pub const MAX_BISECTION_ITERS: usize = 200;
/// Largest `|psi - 1|` accepted from the oracle.
pub const ORACLE_MAX_RESIDUAL: f64 = 1e-6;

/// A `(k, n, delta)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    k: usize,
    n: usize,
    delta: f64,
}

impl BoundQuery {
    pub fn new(k: usize, n: usize, delta: f64) -> Result<Self> {
        if n == 0 {
            return Err(domain("sample size n must be positive"));
        }
        if k > n {
            return Err(domain(format!("compression size k = {k} exceeds n = {n}")));
        }
        check_delta(delta)?;
        Ok(Self { k, n, delta })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    IncompleteBetaBisection,
    DirectPsiBisection,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub eps: f64,
    pub method: BoundMethod,
    pub iterations: usize,
    /// Method-specific: final bracket width for the beta route, `|psi - 1|`
    /// for the oracle, zero for the closed form.
    pub residual: f64,
}

impl BoundResult {
    fn closed_form(eps: f64) -> Self {
        Self {
            eps,
            method: BoundMethod::ClosedForm,
            iterations: 0,
            residual: 0.0,
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("confidence parameter delta = {delta} not in (0, 1)")))
    }
}

/// `ln psi` as a function of `u = -ln(1 - eps)`.
fn ln_psi_at(k: usize, n: usize, delta: f64, u: f64) -> f64 {
    let ln_cnk = ln_choose(n, k);
    let terms = (k..n).map(move |m| ln_choose(m, k) - ln_cnk + (n - m) as f64 * u);
    delta.ln() - (n as f64).ln() + log_sum_exp(terms)
}

/// Evaluates `psi_{k,delta}(eps)` in log space.
///
/// Requires `k < n` and `eps` in the open unit interval. May return `+inf`
/// when the true value exceeds the `f64` range.
pub fn psi_value(query: &BoundQuery, eps: f64) -> Result<f64> {
    if query.k >= query.n {
        return Err(domain("psi is only defined for k < n"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("eps = {eps} not in (0, 1)")));
    }
    let u = -(-eps).ln_1p();
    Ok(ln_psi_at(query.k, query.n, query.delta, u).exp())
}

/// Risk bound through bisection on incomplete beta functions.
///
/// Mirrors the reference bisection: on `[0, 1]`, shrink towards the
/// crossing of `delta * I_t(k+1, n-k)` and `t * n * (I_t(k, n-k+1) - I_t(k+1, n-k))`,
/// stopping when the bracket is narrower than [`BISECTION_TOL`] and returning
/// its upper end.
pub fn eps_bar(query: &BoundQuery) -> BoundResult {
    let BoundQuery { k, n, delta } = *query;
    if k == n {
        return BoundResult::closed_form(1.0);
    }
    let (kf, nf) = (k as f64, n as f64);
    let (mut t1, mut t2) = (0.0f64, 1.0f64);
    let mut iterations = 0;
    while t2 - t1 > BISECTION_TOL && iterations < MAX_BISECTION_ITERS {
        let t = 0.5 * (t1 + t2);
        let upper = reg_inc_beta(kf + 1.0, nf - kf, t);
        let left = delta * upper;
        let right = t * nf * (reg_inc_beta(kf, nf - kf + 1.0, t) - upper);
        if left > right {
            t2 = t;
        } else {
            t1 = t;
        }
        iterations += 1;
    }
    BoundResult {
        eps: t2,
        method: BoundMethod::IncompleteBetaBisection,
        iterations,
        residual: t2 - t1,
    }
}

/// Risk bound by solving `psi(eps) = 1` directly.
///
/// Bisects in `u = -ln(1 - eps)`, where `ln psi` is smooth and convex, so
/// roots that sit within `1e-13` of one are still resolved.
pub fn eps_bar_oracle(query: &BoundQuery) -> Result<BoundResult> {
    let BoundQuery { k, n, delta } = *query;
    if k == n {
        return Ok(BoundResult::closed_form(1.0));
    }
    let floor = k as f64 / n as f64;
    let mut lo = -(-floor).ln_1p();
    let mut hi = lo.max(0.5) * 2.0;
    let mut iterations = 0;
    while ln_psi_at(k, n, delta, hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if iterations >= MAX_BISECTION_ITERS {
            return Err(Error::Convergence {
                residual: f64::INFINITY,
                iterations,
            });
        }
    }
    while iterations < MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_psi_at(k, n, delta, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    let u = 0.5 * (lo + hi);
    let residual = (ln_psi_at(k, n, delta, u).exp() - 1.0).abs();
    if residual > ORACLE_MAX_RESIDUAL {
        return Err(Error::Convergence {
            residual,
            iterations,
        });
    }
    let eps = (-(-u).exp_m1()).clamp(floor, 1.0);
    Ok(BoundResult {
        eps,
        method: BoundMethod::DirectPsiBisection,
        iterations,
        residual,
    })
}

/// Shorthand for `eps_bar(BoundQuery::new(k, n, delta)?).eps`.
pub fn risk_bound(k: usize, n: usize, delta: f64) -> Result<f64> {
    Ok(eps_bar(&BoundQuery::new(k, n, delta)?).eps)
}

/// `ln P[Bin(n, eps) <= k]`, computed term by term.
fn ln_binomial_cdf(ln_coef: &[f64], n: usize, eps: f64) -> f64 {
    let ln_p = eps.ln();
    let ln_q = (-eps).ln_1p();
    log_sum_exp(
        ln_coef
            .iter()
            .enumerate()
            .map(move |(j, c)| c + j as f64 * ln_p + (n - j) as f64 * ln_q),
    )
}

/// Exact upper confidence bound on a Bernoulli rate from `k` failures in `n`
/// independent trials: the `eps` solving `P[Bin(n, eps) <= k] = delta`.
///
/// Returns 1 when `k = n`.
pub fn binomial_tail_inversion(k: usize, n: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("number of trials must be positive"));
    }
    if k > n {
        return Err(domain(format!("failure count {k} exceeds trials {n}")));
    }
    check_delta(delta)?;
    if k == n {
        return Ok(1.0);
    }
    let ln_coef: Vec<f64> = (0..=k).map(|j| ln_choose(n, j)).collect();
    let ln_delta = delta.ln();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_binomial_cdf(&ln_coef, n, mid) > ln_delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Split-conformal risk bound for the `k`-th smallest of `n_cal` calibration
/// scores.
pub fn conformal_eps(k: usize, n_cal: usize, delta: f64) -> Result<f64> {
    if k == 0 || k > n_cal {
        return Err(domain(format!(
            "order statistic index {k} outside 1..={n_cal}"
        )));
    }
    binomial_tail_inversion(n_cal - k, n_cal, delta)
}

/// Per-statement confidence budget for `r` simultaneous statements.
pub fn union_delta(delta_total: f64, r: usize) -> Result<f64> {
    check_delta(delta_total)?;
    if r == 0 {
        return Err(domain("number of statements must be positive"));
    }
    Ok(delta_total / r as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(k: usize, n: usize, delta: f64) -> BoundQuery {
        BoundQuery::new(k, n, delta).unwrap()
    }

    #[test]
    fn query_validation() {
        assert!(BoundQuery::new(3, 2, 0.1).is_err());
        assert!(BoundQuery::new(0, 0, 0.1).is_err());
        assert!(BoundQuery::new(0, 5, 0.0).is_err());
        assert!(BoundQuery::new(0, 5, 1.0).is_err());
        assert!(BoundQuery::new(5, 5, 0.5).is_ok());
    }

    #[test]
    fn psi_hand_values() {
        // single term: delta * (1 - eps)^-1
        assert!((psi_value(&q(0, 1, 0.5), 0.5).unwrap() - 1.0).abs() < 1e-15);
        // (0.2 / 2) * (1 / 2) * 0.5^-1
        assert!((psi_value(&q(1, 2, 0.2), 0.5).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn psi_domain_errors() {
        assert!(psi_value(&q(2, 2, 0.1), 0.5).is_err());
        assert!(psi_value(&q(0, 2, 0.1), 0.0).is_err());
        assert!(psi_value(&q(0, 2, 0.1), 1.0).is_err());
    }

    #[test]
    fn psi_increases_and_diverges() {
        let query = q(3, 40, 0.05);
        let mut prev = 0.0;
        for i in 1..1000 {
            let v = psi_value(&query, i as f64 / 1000.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(psi_value(&query, 1.0 - 1e-12).unwrap() > 1e100);
    }

    #[test]
    fn full_compression_is_vacuous() {
        let r = eps_bar(&q(500, 500, 0.01));
        assert_eq!(r.eps, 1.0);
        assert_eq!(r.method, BoundMethod::ClosedForm);
        assert_eq!(eps_bar_oracle(&q(500, 500, 0.01)).unwrap().eps, 1.0);
    }

    #[test]
    fn single_point_closed_form() {
        // psi = delta / (1 - eps) = 1  =>  eps = 1 - delta
        assert!((eps_bar(&q(0, 1, 0.1)).eps - 0.9).abs() < 1e-9);
        assert!((eps_bar_oracle(&q(0, 1, 0.1)).unwrap().eps - 0.9).abs() < 1e-12);
    }

    #[test]
    fn two_point_quadratic() {
        // (delta/2) (y^2 + y) = 1 with y = 1/(1-eps)
        let delta = 0.5;
        let y = (-1.0 + (1.0f64 + 8.0 / delta).sqrt()) / 2.0;
        let expected = 1.0 - 1.0 / y;
        let got = eps_bar_oracle(&q(0, 2, delta)).unwrap();
        assert!((got.eps - expected).abs() < 1e-12);
        assert!((eps_bar(&q(0, 2, delta)).eps - expected).abs() < 1e-9);
    }

    #[test]
    fn beta_route_agrees_with_oracle() {
        let query = q(5, 500, 0.01);
        let a = eps_bar(&query);
        let b = eps_bar_oracle(&query).unwrap();
        assert!(a.eps >= 0.01 && a.eps <= 1.0);
        assert!((a.eps - b.eps).abs() <= 1e-7, "{} vs {}", a.eps, b.eps);
        assert!(a.residual <= BISECTION_TOL);
    }

    #[test]
    fn oracle_resolves_roots_next_to_one() {
        // psi = delta / (n^2 (1 - eps)) for k = n - 1
        let r = eps_bar_oracle(&q(1999, 2000, 1e-6)).unwrap();
        let expected_gap = 1e-6 / (2000.0f64 * 2000.0);
        assert!(((1.0 - r.eps) - expected_gap).abs() < 1e-3 * expected_gap + 1e-16);
    }

    #[test]
    fn binomial_inversion_closed_form() {
        for &n in &[10usize, 100, 1000] {
            let got = binomial_tail_inversion(0, n, 0.01).unwrap();
            let expected = 1.0 - 0.01f64.powf(1.0 / n as f64);
            assert!((got - expected).abs() < 1e-9);
        }
        assert_eq!(binomial_tail_inversion(50, 50, 0.05).unwrap(), 1.0);
    }

    #[test]
    fn binomial_inversion_grid_scan() {
        // brute-force: first grid point where the lower tail drops to delta
        let (k, n, delta) = (2usize, 50usize, 0.05);
        let cdf = |e: f64| -> f64 {
            let mut total = 0.0;
            let mut coef = 1.0;
            for j in 0..=k {
                if j > 0 {
                    coef *= (n - j + 1) as f64 / j as f64;
                }
                total += coef * e.powi(j as i32) * (1.0 - e).powi((n - j) as i32);
            }
            total
        };
        let step = 1e-6;
        let mut i = 1u64;
        while cdf(i as f64 * step) > delta {
            i += 1;
        }
        let scanned = i as f64 * step;
        let got = binomial_tail_inversion(k, n, delta).unwrap();
        assert!(got <= scanned && scanned - got <= step, "{got} vs {scanned}");
    }

    #[test]
    fn binomial_inversion_domain() {
        assert!(binomial_tail_inversion(3, 2, 0.1).is_err());
        assert!(binomial_tail_inversion(0, 0, 0.1).is_err());
        assert!(binomial_tail_inversion(0, 3, 1.5).is_err());
    }

    #[test]
    fn conformal_reduces_to_test_set() {
        let expected = 1.0 - 0.01f64.powf(0.01);
        assert!((conformal_eps(100, 100, 0.01).unwrap() - expected).abs() < 1e-9);
        assert_eq!(
            conformal_eps(17, 60, 0.05).unwrap(),
            binomial_tail_inversion(43, 60, 0.05).unwrap()
        );
        assert!(conformal_eps(0, 10, 0.1).is_err());
        assert!(conformal_eps(11, 10, 0.1).is_err());
    }

    #[test]
    fn conformal_first_order_statistic() {
        // k = 1 leaves n - 1 allowed exceedances: 1 - eps^n = delta
        let got = conformal_eps(1, 50, 0.05).unwrap();
        assert!((got - 0.95f64.powf(1.0 / 50.0)).abs() < 1e-12);
    }

    #[test]
    fn union_budget() {
        assert!((union_delta(0.1, 10).unwrap() - 0.01).abs() < 1e-18);
        assert_eq!(union_delta(0.3, 1).unwrap(), 0.3);
        assert_eq!(union_delta(0.5, 2).unwrap(), 0.25);
        assert!(union_delta(0.5, 0).is_err());
    }
}
