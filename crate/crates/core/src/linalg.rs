//! Small banded and dense linear solvers used by the 1D elliptic solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Square matrix with at most two sub- and two super-diagonals, stored by
/// rows as `(col, value)` triples relative to the diagonal.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    // rows[i][k] holds entry (i, i + k - 2)
    rows: Vec<[f64; 5]>,
}

impl Banded {
    pub fn zeros(n: usize) -> Self {
        Banded {
            n,
            rows: vec![[0.0; 5]; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = j as isize - i as isize + 2;
        assert!((0..5).contains(&k), "entry ({i},{j}) outside band");
        self.rows[i][k as usize] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let k = j as isize - i as isize + 2;
        if (0..5).contains(&k) {
            self.rows[i][k as usize]
        } else {
            0.0
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut s = 0.0;
                for k in 0..5 {
                    let j = i as isize + k as isize - 2;
                    if j >= 0 && (j as usize) < self.n {
                        s += self.rows[i][k] * x[j as usize];
                    }
                }
                s
            })
            .collect()
    }

    /// Gaussian elimination without pivoting inside the band. The
    /// matrices assembled here are diagonally dominant up to the two
    /// boundary rows, which are reduced first.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut a: Vec<[f64; 5]> = self.rows.clone();
        let mut b = rhs.to_vec();
        let at = |a: &Vec<[f64; 5]>, i: usize, j: usize| -> f64 {
            let k = j as isize - i as isize + 2;
            if (0..5).contains(&k) {
                a[i][k as usize]
            } else {
                0.0
            }
        };
        for p in 0..n {
            let piv = at(&a, p, p);
            if piv.abs() < 1e-300 || !piv.is_finite() {
                return Err(Error::ContractViolation(format!(
                    "singular banded system at pivot {p}"
                )));
            }
            for i in p + 1..(p + 3).min(n) {
                let f = at(&a, i, p) / piv;
                if f == 0.0 {
                    continue;
                }
                for j in p..(p + 3).min(n) {
                    let v = at(&a, p, j);
                    let k = (j as isize - i as isize + 2) as usize;
                    a[i][k] -= f * v;
                }
                b[i] -= f * b[p];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..(i + 3).min(n) {
                s -= at(&a, i, j) * x[j];
            }
            x[i] = s / at(&a, i, i);
        }
        Ok(x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// Linear operator handed to the Newton engine.
pub trait LinearSystem {
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>>;
}

impl LinearSystem for Banded {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        Banded::apply(self, x)
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Banded::solve(self, rhs)
    }
}

/// Dense system solved by partial-pivoting LU.
#[derive(Debug, Clone)]
pub struct Dense(pub DMatrix<f64>);

impl LinearSystem for Dense {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.0
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(rhs))
            .map(|v| v.as_slice().to_vec())
            .ok_or_else(|| Error::ContractViolation("singular dense system".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_matches_dense_solve() {
        let n = 12;
        let mut m = Banded::zeros(n);
        for i in 0..n {
            m.add(i, i, 4.0 + i as f64 * 0.1);
            if i > 0 {
                m.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                m.add(i, i + 1, -1.3);
            }
        }
        m.add(0, 2, 0.5);
        m.add(n - 1, n - 3, 0.7);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = m.solve(&rhs).unwrap();
        let y = Dense(m.to_dense()).solve(&rhs).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
        let back = m.apply(&x);
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
