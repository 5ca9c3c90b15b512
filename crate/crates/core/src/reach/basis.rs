use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All monomials of total degree at most `d` in `n_x` variables.
///
/// Ordered by total degree; within a degree, monomials with a more
/// concentrated exponent pattern come first (pure powers before mixed
/// terms), and equal patterns are listed in descending lexicographic order
/// of their exponent tuples. For `n_x = 3, d = 2` this gives
/// `1, x1, x2, x3, x1^2, x2^2, x3^2, x1 x2, x1 x3, x2 x3`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialBasis {
    n_x: usize,
    degree: u32,
    exponents: Vec<Vec<u32>>,
}

impl MonomialBasis {
    pub fn new(n_x: usize, degree: u32) -> Result<Self> {
        if n_x == 0 {
            return Err(Error::Domain("state dimension must be positive".into()));
        }
        let mut exponents = Vec::new();
        for deg in 0..=degree {
            let mut level = Vec::new();
            compositions(n_x, deg, &mut Vec::with_capacity(n_x), &mut level);
            level.sort_by(|a, b| {
                let mut pa = a.clone();
                let mut pb = b.clone();
                pa.sort_unstable_by(|x, y| y.cmp(x));
                pb.sort_unstable_by(|x, y| y.cmp(x));
                pb.cmp(&pa).then_with(|| b.cmp(a))
            });
            exponents.extend(level);
        }
        Ok(Self {
            n_x,
            degree,
            exponents,
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// `C(n_x + d, d)`.
    pub fn size(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Monomial vector `v(x)`.
    pub fn monomial_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_x {
            return Err(Error::DimensionMismatch {
                expected: self.n_x,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.size()];
        let mut powers = vec![0.0; self.n_x * (self.degree as usize + 1)];
        self.fill(x, &mut powers, &mut out);
        Ok(out)
    }

    /// Writes `v(x)` into `out`. `powers` is scratch of length
    /// `n_x * (d + 1)`; no length checks.
    pub(crate) fn fill(&self, x: &[f64], powers: &mut [f64], out: &mut [f64]) {
        let stride = self.degree as usize + 1;
        for (i, &xi) in x.iter().enumerate() {
            let row = &mut powers[i * stride..(i + 1) * stride];
            row[0] = 1.0;
            for p in 1..stride {
                row[p] = row[p - 1] * xi;
            }
        }
        for (slot, exps) in out.iter_mut().zip(&self.exponents) {
            let mut v = 1.0;
            for (i, &e) in exps.iter().enumerate() {
                if e > 0 {
                    v *= powers[i * stride + e as usize];
                }
            }
            *slot = v;
        }
    }
}

fn compositions(parts: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(parts - 1, total - first, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_variables_degree_two() {
        let b = MonomialBasis::new(3, 2).unwrap();
        let (x1, x2, x3) = (2.0, 3.0, 5.0);
        let v = b.monomial_vector(&[x1, x2, x3]).unwrap();
        assert_eq!(
            v,
            vec![1.0, x1, x2, x3, x1 * x1, x2 * x2, x3 * x3, x1 * x2, x1 * x3, x2 * x3]
        );
    }

    #[test]
    fn smallest_basis() {
        let b = MonomialBasis::new(1, 1).unwrap();
        assert_eq!(b.monomial_vector(&[0.7]).unwrap(), vec![1.0, 0.7]);
    }

    #[test]
    fn sizes_follow_binomial_formula() {
        assert_eq!(MonomialBasis::new(2, 10).unwrap().size(), 66);
        assert_eq!(MonomialBasis::new(2, 10).unwrap().monomial_vector(&[0.1, 0.2]).unwrap().len(), 66);
        assert_eq!(MonomialBasis::new(3, 4).unwrap().size(), 35);
        assert_eq!(MonomialBasis::new(1, 0).unwrap().size(), 1);
    }

    #[test]
    fn structure_invariants() {
        let b = MonomialBasis::new(3, 5).unwrap();
        assert!(b.exponents()[0].iter().all(|&e| e == 0));
        let degrees: Vec<u32> = b.exponents().iter().map(|e| e.iter().sum()).collect();
        assert!(degrees.windows(2).all(|w| w[0] <= w[1]));
        assert!(degrees.iter().all(|&d| d <= 5));
        let mut unique = b.exponents().to_vec();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), b.size());
    }

    #[test]
    fn dimension_mismatch() {
        let b = MonomialBasis::new(2, 2).unwrap();
        assert!(matches!(
            b.monomial_vector(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }
}
