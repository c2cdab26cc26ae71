//! Covariate design matrices and least squares by Householder QR.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LampError, Result};

pub const INTERCEPT: &str = "(Intercept)";

/// Row-major covariate matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    names: Vec<String>,
    nrows: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn new(names: Vec<String>, nrows: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * names.len() {
            return Err(LampError::LengthMismatch {
                what: "design data",
                expected: nrows * names.len(),
                found: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(LampError::InvalidInput(format!("non-finite covariate value {v}")));
        }
        Ok(Design { names, nrows, data })
    }

    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(LampError::LengthMismatch {
                what: "column names",
                expected: columns.len(),
                found: names.len(),
            });
        }
        let nrows = columns.first().map_or(0, Vec::len);
        for c in columns {
            if c.len() != nrows {
                return Err(LampError::LengthMismatch {
                    what: "design column",
                    expected: nrows,
                    found: c.len(),
                });
            }
        }
        let mut data = Vec::with_capacity(nrows * columns.len());
        for i in 0..nrows {
            for c in columns {
                data.push(c[i]);
            }
        }
        Design::new(names, nrows, data)
    }

    /// Prepends an intercept column to the given covariates.
    pub fn with_intercept(names: &[String], columns: &[Vec<f64>], nrows: usize) -> Result<Self> {
        let mut all_names = vec![INTERCEPT.to_string()];
        all_names.extend(names.iter().cloned());
        let mut cols = vec![vec![1.0; nrows]];
        cols.extend(columns.iter().cloned());
        Design::from_columns(all_names, &cols)
    }

    /// Intercept-only design.
    pub fn intercept(nrows: usize) -> Self {
        Design {
            names: vec![INTERCEPT.to_string()],
            nrows,
            data: vec![1.0; nrows],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.ncols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i)[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let p = self.ncols();
        self.data[i * p + j] = v;
    }

    pub fn select_rows(&self, rows: &[usize]) -> Design {
        let mut data = Vec::with_capacity(rows.len() * self.ncols());
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Design {
            names: self.names.clone(),
            nrows: rows.len(),
            data,
        }
    }

    /// Drops the intercept column, if any.
    pub fn without_intercept(&self) -> Design {
        let keep: Vec<usize> = (0..self.ncols())
            .filter(|&j| self.names[j] != INTERCEPT)
            .collect();
        let mut data = Vec::with_capacity(self.nrows * keep.len());
        for i in 0..self.nrows {
            let r = self.row(i);
            data.extend(keep.iter().map(|&j| r[j]));
        }
        Design {
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            nrows: self.nrows,
            data,
        }
    }

    pub fn dot_row(&self, i: usize, beta: &[f64]) -> f64 {
        self.row(i).iter().zip(beta).map(|(x, b)| x * b).sum()
    }
}

/// Least-squares coefficients with their covariance `s²(X'X)⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub beta: Vec<f64>,
    /// Row-major p x p covariance of `beta`.
    pub cov: Vec<f64>,
    /// Residual mean square.
    pub sigma2: f64,
}

impl OlsFit {
    pub fn std_errors(&self) -> Vec<f64> {
        let p = self.beta.len();
        (0..p).map(|j| self.cov[j * p + j].max(0.0).sqrt()).collect()
    }
}

/// A QR factorization of a fixed set of design rows, reusable for many
/// right-hand sides.
pub struct OlsSolver {
    rows: Vec<usize>,
    qt: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
}

impl OlsSolver {
    pub fn new(x: &Design, rows: &[usize]) -> Result<Self> {
        let n = rows.len();
        let p = x.ncols();
        if n <= p {
            return Err(LampError::InvalidInput(format!(
                "least squares needs more rows ({n}) than columns ({p})"
            )));
        }
        let m = DMatrix::from_fn(n, p, |i, j| x.row(rows[i])[j]);
        let norms: Vec<f64> = (0..p).map(|j| m.column(j).norm()).collect();
        let qr = m.qr();
        let r = qr.r();
        let collinear: Vec<String> = (0..p)
            .filter(|&j| norms[j] == 0.0 || r[(j, j)].abs() <= 1e-9 * norms[j])
            .map(|j| x.names()[j].clone())
            .collect();
        if !collinear.is_empty() {
            return Err(LampError::RankDeficient { columns: collinear });
        }
        let qt = qr.q().transpose();
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or_else(|| LampError::RankDeficient {
                columns: x.names().to_vec(),
            })?;
        Ok(OlsSolver {
            rows: rows.to_vec(),
            qt,
            r,
            r_inv,
        })
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Coefficients for the full-length response `y` restricted to the solver's rows.
    pub fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        let yv = DVector::from_iterator(self.rows.len(), self.rows.iter().map(|&i| y[i]));
        let qty = &self.qt * yv;
        self.r
            .solve_upper_triangular(&qty)
            .expect("R checked nonsingular at construction")
            .iter()
            .copied()
            .collect()
    }

    pub fn fit(&self, x: &Design, y: &[f64]) -> OlsFit {
        let beta = self.coefficients(y);
        let n = self.rows.len();
        let p = beta.len();
        let rss: f64 = self
            .rows
            .iter()
            .map(|&i| {
                let e = y[i] - x.dot_row(i, &beta);
                e * e
            })
            .sum();
        let sigma2 = rss / (n - p) as f64;
        let xtx_inv = &self.r_inv * self.r_inv.transpose();
        let cov = (0..p * p).map(|k| sigma2 * xtx_inv[(k / p, k % p)]).collect();
        OlsFit { beta, cov, sigma2 }
    }
}

/// Ordinary least squares on the given rows (all rows when `rows` is `None`).
pub fn ols(x: &Design, y: &[f64], rows: Option<&[usize]>) -> Result<OlsFit> {
    if y.len() != x.nrows() {
        return Err(LampError::LengthMismatch {
            what: "response",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..x.nrows()).collect();
            &all
        }
    };
    Ok(OlsSolver::new(x, rows)?.fit(x, y))
}

/// Lower Cholesky factor of a row-major p x p matrix, retrying once with a
/// 1e-12 (relative) diagonal jitter.
pub fn cholesky_lower(cov: &[f64], p: usize) -> Result<Vec<f64>> {
    // A zero matrix is a legitimate degenerate covariance.
    if cov.iter().all(|v| *v == 0.0) {
        return Ok(vec![0.0; p * p]);
    }
    let m = DMatrix::from_row_slice(p, p, cov);
    if let Some(c) = m.clone().cholesky() {
        return Ok(row_major(&c.l()));
    }
    let scale = (0..p).map(|j| m[(j, j)].abs()).fold(0.0, f64::max);
    let jittered = &m + DMatrix::identity(p, p) * (1e-12 * scale);
    match jittered.cholesky() {
        Some(c) => Ok(row_major(&c.l())),
        None => Err(LampError::NotPositiveSemidefinite),
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    (0..r * c).map(|k| m[(k / c, k % c)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_linear_data() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let d = Design::with_intercept(&["x".into()], &[xs], 10).unwrap();
        let fit = ols(&d, &y, None).unwrap();
        assert!(fit.beta[0].abs() < 1e-12);
        assert!((fit.beta[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_gives_mean() {
        let y = [1.0, 4.0, 2.0, 9.0];
        let fit = ols(&Design::intercept(4), &y, None).unwrap();
        assert!((fit.beta[0] - 4.0).abs() < 1e-12);
        // s²/n for the mean.
        let s2 = y.iter().map(|v| (v - 4.0f64).powi(2)).sum::<f64>() / 3.0;
        assert!((fit.cov[0] - s2 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 20;
        let cols: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d = Design::with_intercept(&["a".into(), "b".into()], &cols, n).unwrap();
        let fit = ols(&d, &y, None).unwrap();

        // Oracle: form X'X and X'y densely and solve by LU.
        let x = DMatrix::from_fn(n, 3, |i, j| d.row(i)[j]);
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * DVector::from_column_slice(&y);
        let beta = xtx.clone().lu().solve(&xty).unwrap();
        for j in 0..3 {
            assert!((fit.beta[j] - beta[j]).abs() < 1e-10);
        }
        let inv = xtx.try_inverse().unwrap();
        for j in 0..3 {
            for k in 0..3 {
                assert!((fit.cov[j * 3 + k] - fit.sigma2 * inv[(j, k)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_covariate_is_named() {
        let d = Design::with_intercept(
            &["x".into(), "flat".into()],
            &[vec![1.0, 2.0, 3.0, 5.0, 8.0], vec![3.0; 5]],
            5,
        )
        .unwrap();
        match ols(&d, &[1.0, 2.0, 3.0, 4.0, 5.0], None) {
            Err(LampError::RankDeficient { columns }) => assert_eq!(columns, vec!["flat"]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_handles_zero_matrix() {
        assert_eq!(cholesky_lower(&[0.0; 4], 2).unwrap(), vec![0.0; 4]);
        assert!(cholesky_lower(&[1.0, 2.0, 2.0, 1.0], 2).is_err());
    }
}
