//! Special functions needed by the risk certificates.

use statrs::function::gamma::ln_gamma;

const CF_MAX_ITER: usize = 10_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// `ln C(n, k)` through log-gamma.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Evaluated with the Lentz continued fraction, switching to
/// `1 - I_{1-x}(b, a)` when `x > (a + 1) / (a + b + 2)`.
/// The degenerate shape `a = 0` is the point mass at zero, so `I_x(0, b) = 1`
/// for every `x > 0`; likewise `I_x(a, 0) = 0` for `x < 1`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0 && (0.0..=1.0).contains(&x));
    if x <= 0.0 {
        return if a == 0.0 { 1.0 } else { 0.0 };
    }
    if x >= 1.0 {
        return if b == 0.0 { 0.0 } else { 1.0 };
    }
    if a == 0.0 {
        return 1.0;
    }
    if b == 0.0 {
        return 0.0;
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Numerically stable `ln Σ exp(v_i)`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_beta_endpoints_and_uniform() {
        assert_eq!(reg_inc_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(reg_inc_beta(2.0, 3.0, 1.0), 1.0);
        assert!((reg_inc_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-15);
        assert_eq!(reg_inc_beta(0.0, 7.0, 0.2), 1.0);
    }

    #[test]
    fn incomplete_beta_matches_binomial_tail() {
        // I_x(k, n-k+1) = P[Bin(n, x) >= k]
        let (n, x) = (12usize, 0.37f64);
        for k in 1..=n {
            let direct: f64 = (k..=n)
                .map(|j| ln_choose(n, j).exp() * x.powi(j as i32) * (1.0 - x).powi((n - j) as i32))
                .sum();
            let got = reg_inc_beta(k as f64, (n - k + 1) as f64, x);
            assert!((got - direct).abs() < 1e-13, "k={k}: {got} vs {direct}");
        }
    }

    #[test]
    fn incomplete_beta_agrees_with_statrs() {
        for &(a, b) in &[(1.0, 2000.0), (5.0, 496.0), (125.0, 376.0), (1999.0, 2.0), (0.5, 0.5)] {
            for &x in &[1e-6, 1e-3, 0.01, 0.25, 0.5, 0.9, 0.999999] {
                let ours = reg_inc_beta(a, b, x);
                let theirs = statrs::function::beta::beta_reg(a, b, x);
                assert!((ours - theirs).abs() < 1e-12, "a={a} b={b} x={x}: {ours} vs {theirs}");
            }
        }
    }

    #[test]
    fn log_sum_exp_handles_large_values() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
