use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ridge fit with an unpenalised intercept. Returns `(intercept, beta)`.
///
/// Solved through the thin SVD of the centred design; singular values under
/// the rank tolerance are dropped, which yields the minimum-norm solution
/// when `lambda == 0` and the design is rank deficient.
pub(crate) fn solve(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Model(format!(
            "ridge penalty must be finite and non-negative, got {lambda}"
        )));
    }
    let n = y.len();
    if n == 0 || x.len() != n {
        return Err(Error::Model(
            "ridge needs a non-empty design with one row per target".into(),
        ));
    }
    let p = x[0].len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok((y_mean, Vec::new()));
    }
    let x_mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let xc = DMatrix::from_fn(n, p, |i, j| x[i][j] - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let svd = xc
        .try_svd(true, true, 5.0 * f64::EPSILON, 0)
        .ok_or_else(|| Error::Model("SVD did not converge".into()))?;
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    let s = svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let tol = n.max(p) as f64 * f64::EPSILON * s_max;
    let uty = u.transpose() * yc;
    let shrunk = DVector::from_fn(s.len(), |i, _| {
        if s[i] > tol {
            s[i] / (s[i] * s[i] + lambda) * uty[i]
        } else {
            0.0
        }
    });
    let beta = v_t.transpose() * shrunk;
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok((intercept, beta.iter().copied().collect()))
}
