//! Small dense kernels for the reduced systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot below which a reduced matrix is declared singular.
pub const SINGULAR_PIVOT: f64 = 1e-13;

/// Cholesky factorisation with symmetric (diagonal) pivoting.
#[derive(Clone, Debug)]
pub struct PivotedCholesky {
    perm: Vec<usize>,
    l: DMatrix<f64>,
    pivots: Vec<f64>,
}

impl PivotedCholesky {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "pivoted Cholesky needs a square matrix");
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| w[(i, i)].total_cmp(&w[(j, j)]))
                .expect("non-empty pivot range");
            if p != k {
                w.swap_rows(k, p);
                w.swap_columns(k, p);
                perm.swap(k, p);
            }
            let d = w[(k, k)];
            if !(d > SINGULAR_PIVOT * scale) || !d.is_finite() {
                let condition = if d > 0.0 { scale / d } else { f64::INFINITY };
                return Err(Error::ReducedSingularity { condition });
            }
            pivots.push(d);
            let s = d.sqrt();
            w[(k, k)] = s;
            for i in k + 1..n {
                w[(i, k)] /= s;
                w[(k, i)] = w[(i, k)];
            }
            // keep the trailing block fully symmetric so later swaps stay valid
            for j in k + 1..n {
                let ljk = w[(j, k)];
                for i in k + 1..n {
                    w[(i, j)] -= w[(i, k)] * ljk;
                }
            }
        }
        let l = DMatrix::from_fn(n, n, |i, j| if i >= j { w[(i, j)] } else { 0.0 });
        Ok(Self { perm, l, pivots })
    }

    /// Ratio of the largest to the smallest pivot, an estimate of the
    /// spectral condition number.
    pub fn condition_estimate(&self) -> f64 {
        match (self.pivots.first(), self.pivots.last()) {
            (Some(a), Some(b)) => a / b,
            _ => 1.0,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let pb = DVector::from_iterator(n, self.perm.iter().map(|&i| b[i]));
        let y = self.l.solve_lower_triangular(&pb).expect("non-zero pivots");
        let z = self
            .l
            .transpose()
            .solve_upper_triangular(&y)
            .expect("non-zero pivots");
        let mut x = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = z[k];
        }
        x
    }
}

/// Solves an SPD reduced system.
pub fn solve_spd(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let chol = PivotedCholesky::new(a)?;
    let x = chol.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::ReducedSingularity {
            condition: chol.condition_estimate(),
        });
    }
    Ok(x)
}

/// `xᵀ A y` over the leading sub-block matching the vector lengths.
pub fn bilinear(a: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for (j, yj) in y.iter().enumerate() {
            row += a[(i, j)] * yj;
        }
        s += xi * row;
    }
    s
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Neumaier-compensated sum; quadrature over the whole mesh goes through
/// this so that block integrals and field integrals agree to a few ulps.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let (mut s, mut c) = (0.0_f64, 0.0_f64);
    for x in terms {
        let t = s + x;
        c += if s.abs() >= x.abs() {
            (s - t) + x
        } else {
            (x - t) + s
        };
        s = t;
    }
    s + c
}

/// Leading `n × m` block.
pub fn leading(a: &DMatrix<f64>, n: usize, m: usize) -> DMatrix<f64> {
    a.view((0, 0), (n, m)).into_owned()
}
