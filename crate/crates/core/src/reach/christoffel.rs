//! Empirical inverse Christoffel function and its sublevel sets.
//!
//! For training points `z_1..z_n` and monomial vector `v`, the moment matrix
//! is `M = (1/n) sum v(z_i) v(z_i)^T` and `k(x) = v(x)^T M^-1 v(x)`. The set
//! `S = {x : k(x) <= alpha}` with `alpha = max_i k(z_i)` approximates the
//! support of the data.
//!
//! Internally the coordinates are mapped affinely onto the training bounding
//! box before building monomials; `k` is unchanged by any invertible affine
//! change of variables (the polynomial space is the same), but the moment
//! matrix is far better conditioned. `M` is never formed: the scaled data
//! matrix is QR-factorized, `R` is the Cholesky factor of `M`, and
//! `k(x) = |R^-T v(x)|^2` is one triangular solve.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::MonomialBasis;
use crate::error::{Error, Result};

/// Eigenvalue ratio below which an unregularized moment matrix is rejected.
pub const SINGULAR_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChristoffelModel {
    basis: MonomialBasis,
    center: Vec<f64>,
    scale: Vec<f64>,
    /// `R^T`, row-major `m x m`, lower triangular.
    factor_t: Vec<f64>,
    alpha: f64,
    condition_estimate: f64,
    n_train: usize,
    ridge: f64,
}

impl ChristoffelModel {
    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// Level threshold.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `lambda_max / lambda_min` of the (regularized) moment matrix.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Same function, different level: `{x : k(x) <= alpha}`.
    pub fn with_level(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }

    /// Reusable evaluation buffers.
    pub fn evaluator(&self) -> Evaluator<'_> {
        let m = self.basis.size();
        Evaluator {
            model: self,
            scaled: vec![0.0; self.basis.n_x()],
            powers: vec![0.0; self.basis.n_x() * (self.basis.degree() as usize + 1)],
            v: vec![0.0; m],
        }
    }

    /// `k(x)`. Allocates; use [`ChristoffelModel::evaluator`] in loops.
    pub fn inv_christoffel(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.evaluator().level(x))
    }

    /// `k(z) <= alpha`; boundary points count as inside.
    pub fn contains(&self, z: &[f64]) -> Result<bool> {
        Ok(self.inv_christoffel(z)? <= self.alpha)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.basis.n_x() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.n_x(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Evaluates `k(x)` without allocating. Inputs are assumed to have the
/// model's dimension.
pub struct Evaluator<'a> {
    model: &'a ChristoffelModel,
    scaled: Vec<f64>,
    powers: Vec<f64>,
    v: Vec<f64>,
}

impl Evaluator<'_> {
    pub fn level(&mut self, x: &[f64]) -> f64 {
        let model = self.model;
        for ((s, &xi), (&c, &h)) in self
            .scaled
            .iter_mut()
            .zip(x)
            .zip(model.center.iter().zip(&model.scale))
        {
            *s = (xi - c) / h;
        }
        model.basis.fill(&self.scaled, &mut self.powers, &mut self.v);
        // forward substitution R^T s = v, in place
        let m = self.v.len();
        let l = &model.factor_t;
        let mut total = 0.0;
        for i in 0..m {
            let row = &l[i * m..i * m + i];
            let dot: f64 = row.iter().zip(&self.v[..i]).map(|(a, b)| a * b).sum();
            let s = (self.v[i] - dot) / l[i * m + i];
            self.v[i] = s;
            total += s * s;
        }
        total
    }

    pub fn contains(&mut self, x: &[f64]) -> bool {
        self.level(x) <= self.model.alpha
    }
}

/// Fits `k` on `train` and sets `alpha` to the largest training level.
///
/// `ridge` is added to the diagonal of the moment matrix of the normalized
/// monomials. With `ridge = 0` a numerically singular moment matrix (fewer
/// points than monomials, or points on an algebraic curve) is an error.
pub fn fit_christoffel<P: AsRef<[f64]>>(
    train: &[P],
    basis: &MonomialBasis,
    ridge: f64,
) -> Result<ChristoffelModel> {
    let n = train.len();
    let n_x = basis.n_x();
    let m = basis.size();
    if n == 0 {
        return Err(Error::Domain("cannot fit on an empty training list".into()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Domain(format!("ridge = {ridge} must be finite and >= 0")));
    }
    for p in train {
        if p.as_ref().len() != n_x {
            return Err(Error::DimensionMismatch {
                expected: n_x,
                got: p.as_ref().len(),
            });
        }
    }

    let mut lo = vec![f64::INFINITY; n_x];
    let mut hi = vec![f64::NEG_INFINITY; n_x];
    for p in train {
        for (j, &x) in p.as_ref().iter().enumerate() {
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let scale: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| {
            let h = 0.5 * (b - a);
            if h > 0.0 {
                h
            } else {
                1.0
            }
        })
        .collect();

    let singular = |ratio: f64| Error::SingularMoments {
        ratio,
        n_points: n,
        basis_size: m,
    };
    let extra = if ridge > 0.0 { m } else { 0 };
    if n + extra < m {
        return Err(singular(0.0));
    }

    let mut data = DMatrix::<f64>::zeros(n + extra, m);
    let weight = 1.0 / (n as f64).sqrt();
    let mut scaled = vec![0.0; n_x];
    let mut powers = vec![0.0; n_x * (basis.degree() as usize + 1)];
    let mut v = vec![0.0; m];
    for (i, p) in train.iter().enumerate() {
        for (j, &x) in p.as_ref().iter().enumerate() {
            scaled[j] = (x - center[j]) / scale[j];
        }
        basis.fill(&scaled, &mut powers, &mut v);
        for (j, &vj) in v.iter().enumerate() {
            data[(i, j)] = vj * weight;
        }
    }
    if ridge > 0.0 {
        let r = ridge.sqrt();
        for j in 0..m {
            data[(n + j, j)] = r;
        }
    }

    let r = data.qr().r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let ratio = if smax > 0.0 { (smin / smax).powi(2) } else { 0.0 };
    if ridge == 0.0 && !(ratio > SINGULAR_RATIO) {
        return Err(singular(ratio));
    }
    if (0..m).any(|i| r[(i, i)] == 0.0 || !r[(i, i)].is_finite()) {
        return Err(singular(ratio));
    }

    let mut factor_t = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            factor_t[i * m + j] = r[(j, i)];
        }
    }

    let mut model = ChristoffelModel {
        basis: basis.clone(),
        center,
        scale,
        factor_t,
        alpha: 0.0,
        condition_estimate: if ratio > 0.0 { 1.0 / ratio } else { f64::INFINITY },
        n_train: n,
        ridge,
    };
    let mut ev = model.evaluator();
    let alpha = train
        .iter()
        .map(|p| ev.level(p.as_ref()))
        .fold(f64::NEG_INFINITY, f64::max);
    model.alpha = alpha;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]]
    }

    #[test]
    fn constant_basis_is_trivial() {
        let basis = MonomialBasis::new(1, 0).unwrap();
        let model = fit_christoffel(&[[3.0], [-1.0], [8.0]], &basis, 0.0).unwrap();
        assert!((model.alpha() - 1.0).abs() < 1e-14);
        assert!((model.inv_christoffel(&[1e6]).unwrap() - 1.0).abs() < 1e-14);
        assert!(model.contains(&[-1e9]).unwrap());
    }

    #[test]
    fn five_point_square() {
        let basis = MonomialBasis::new(2, 1).unwrap();
        let train = square();
        let model = fit_christoffel(&train, &basis, 0.0).unwrap();
        let levels: Vec<f64> = train.iter().map(|p| model.inv_christoffel(p).unwrap()).collect();
        let mean = levels.iter().sum::<f64>() / 5.0;
        assert!((mean - 3.0).abs() < 1e-12);
        assert!(train.iter().all(|p| model.contains(p).unwrap()));
        // d = 1: k(x) = 1 + (x - mean)^T Cov^-1 (x - mean) with Cov = 0.2 I,
        // so corners sit at 1 + 0.5 / 0.2 = 3.5 and the center at 1
        assert!((model.alpha() - 3.5).abs() < 1e-12, "alpha = {}", model.alpha());
        assert!((levels[4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_points_fall_outside() {
        let basis = MonomialBasis::new(2, 2).unwrap();
        let mut train = square();
        train.extend([[0.5, 0.0], [0.0, 0.5], [1.0, 0.5], [0.5, 1.0], [0.25, 0.75]]);
        let model = fit_christoffel(&train, &basis, 0.0).unwrap();
        assert!(!model.contains(&[10.0, 10.0]).unwrap());
        assert!(!model.contains(&[-7.0, 3.0]).unwrap());
        let five = fit_christoffel(&square(), &MonomialBasis::new(2, 1).unwrap(), 0.0).unwrap();
        assert!(!five.contains(&[7.0, 7.0]).unwrap());
    }

    #[test]
    fn too_few_points_is_singular() {
        let basis = MonomialBasis::new(2, 2).unwrap();
        assert!(matches!(
            fit_christoffel(&square()[..3], &basis, 0.0),
            Err(Error::SingularMoments { .. })
        ));
        // collinear data: x2 - x1 vanishes on every point
        let line: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, i as f64]).collect();
        assert!(matches!(
            fit_christoffel(&line, &basis, 0.0),
            Err(Error::SingularMoments { .. })
        ));
        let regularized = fit_christoffel(&line, &basis, 1e-8).unwrap();
        assert!(line.iter().all(|p| regularized.contains(p).unwrap()));
    }

    #[test]
    fn affine_invariance() {
        let basis = MonomialBasis::new(2, 2).unwrap();
        let train: Vec<[f64; 2]> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.sin() + 0.1 * t.cos(), (2.0 * t).cos() * 0.5 + 0.05 * i as f64]
            })
            .collect();
        let moved: Vec<[f64; 2]> = train
            .iter()
            .map(|p| [3.0 * p[0] - p[1] + 100.0, 0.5 * p[1] - 40.0])
            .collect();
        let a = fit_christoffel(&train, &basis, 0.0).unwrap();
        let b = fit_christoffel(&moved, &basis, 0.0).unwrap();
        let (x, y) = ([0.3, -0.2], [3.0 * 0.3 + 0.2 + 100.0, -0.1 - 40.0]);
        let (ka, kb) = (a.inv_christoffel(&x).unwrap(), b.inv_christoffel(&y).unwrap());
        assert!((ka - kb).abs() < 1e-8 * ka.abs().max(1.0));
    }

    #[test]
    fn empty_or_mismatched_input() {
        let basis = MonomialBasis::new(2, 1).unwrap();
        let empty: Vec<[f64; 2]> = vec![];
        assert!(fit_christoffel(&empty, &basis, 0.0).is_err());
        assert!(fit_christoffel(&[[1.0, 2.0, 3.0]], &basis, 0.0).is_err());
        let model = fit_christoffel(&square(), &basis, 0.0).unwrap();
        assert!(model.contains(&[1.0]).is_err());
    }
}
