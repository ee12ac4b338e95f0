//! Correlation and least-squares primitives shared by the experiments and the
//! event study.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pearson correlation. `None` when either series is constant.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> Option<T> {
    debug_assert_eq!(xs.len(), ys.len());
    let n = T::of_usize(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return None;
    }
    let r = sxy / (sxx * syy).sqrt();
    Some(r.max(-T::one()).min(T::one()))
}

/// Ranks starting at 1, ties receive the average of their positions.
pub fn average_ranks<T: Scalar>(xs: &[T]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("ranks of NaN"));
    let mut ranks = vec![T::zero(); xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..=j share rank (i+1 + j+1)/2
        let r = T::of_usize(i + j + 2) / T::of(2.0);
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
///
/// A constant input makes the coefficient undefined and is reported as
/// [`Error::Undefined`], distinct from contract violations.
pub fn spearman<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() != ys.len() {
        return Err(Error::Contract(format!(
            "spearman: length mismatch {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::Contract("spearman needs at least 3 observations".into()));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::Contract("spearman: NaN input".into()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
        .ok_or_else(|| Error::Undefined("spearman of a constant series".into()))
}

/// Least-squares fit with classical standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsResult<T> {
    /// Intercept first when one was requested, then one entry per regressor.
    pub coefficients: Vec<T>,
    pub standard_errors: Vec<T>,
    /// `coefficient / standard_error`; NaN where the standard error is zero.
    pub t_stats: Vec<T>,
    pub r_squared: T,
    pub n_obs: usize,
    pub residuals: Vec<T>,
}

impl<T: Scalar> OlsResult<T> {
    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }
}

/// Ordinary least squares of `y` on `regressors` (one column per slice),
/// optionally preceded by an intercept column.
///
/// Solved by Householder QR. σ̂² = SSR/(n−k). R² is centred when an
/// intercept is present and uncentred otherwise.
pub fn ols_fit<T: Scalar>(y: &[T], regressors: &[Vec<T>], intercept: bool) -> Result<OlsResult<T>> {
    let n = y.len();
    let k = regressors.len() + usize::from(intercept);
    if k == 0 {
        return Err(Error::Contract("ols: empty design".into()));
    }
    if let Some(bad) = regressors.iter().find(|c| c.len() != n) {
        return Err(Error::Contract(format!(
            "ols: regressor length {} differs from response length {n}",
            bad.len()
        )));
    }
    if n <= k {
        return Err(Error::Contract(format!("ols: need n_obs > n_params, got {n} <= {k}")));
    }
    if y.iter().chain(regressors.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::Contract("ols: non-finite input".into()));
    }

    let mut columns: Vec<Vec<T>> = Vec::with_capacity(k);
    if intercept {
        columns.push(vec![T::one(); n]);
    }
    columns.extend(regressors.iter().cloned());
    let design = columns.clone();

    let (r, qty) = householder_qr(&mut columns, y.to_vec());

    let tol = T::epsilon().sqrt() * T::of(1e-2);
    for j in 0..k {
        let norm = design[j].iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm == T::zero() || r[j][j].abs() <= tol * norm {
            return Err(Error::Numerical(format!("ols: design matrix is rank deficient (column {j})")));
        }
    }

    let coefficients = back_substitute(&r, &qty[..k]);

    let residuals: Vec<T> = (0..n)
        .map(|i| {
            let fitted: T = (0..k).map(|j| design[j][i] * coefficients[j]).sum();
            y[i] - fitted
        })
        .collect();
    let ssr: T = residuals.iter().map(|&e| e * e).sum();
    let sigma2 = ssr / T::of_usize(n - k);

    let r_inv = upper_inverse(&r);
    let standard_errors: Vec<T> = (0..k)
        .map(|j| {
            let row: T = (j..k).map(|m| r_inv[j][m] * r_inv[j][m]).sum();
            (sigma2 * row).sqrt()
        })
        .collect();
    let t_stats = coefficients
        .iter()
        .zip(&standard_errors)
        .map(|(&b, &se)| if se > T::zero() { b / se } else { T::nan() })
        .collect();

    let sst: T = if intercept {
        let my = y.iter().copied().sum::<T>() / T::of_usize(n);
        y.iter().map(|&v| (v - my) * (v - my)).sum()
    } else {
        y.iter().map(|&v| v * v).sum()
    };
    let r_squared = if sst > T::zero() {
        (T::one() - ssr / sst).max(T::zero()).min(T::one())
    } else {
        T::one()
    };

    Ok(OlsResult {
        coefficients,
        standard_errors,
        t_stats,
        r_squared,
        n_obs: n,
        residuals,
    })
}

/// In-place Householder QR of the column-major `columns` (n × k). Returns the
/// k × k upper-triangular factor and Qᵀy.
fn householder_qr<T: Scalar>(columns: &mut [Vec<T>], mut y: Vec<T>) -> (Vec<Vec<T>>, Vec<T>) {
    let k = columns.len();
    let n = y.len();
    for j in 0..k {
        let norm = columns[j][j..].iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if columns[j][j] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = columns[j][j..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        let reflect = |col: &mut [T]| {
            let dot: T = v.iter().zip(col.iter()).map(|(&a, &b)| a * b).sum();
            let f = (dot + dot) / vnorm2;
            for (c, &vi) in col.iter_mut().zip(&v) {
                *c = *c - f * vi;
            }
        };
        for col in columns.iter_mut().skip(j) {
            reflect(&mut col[j..n]);
        }
        reflect(&mut y[j..n]);
    }
    let r = (0..k)
        .map(|i| (0..k).map(|j| if j >= i { columns[j][i] } else { T::zero() }).collect())
        .collect();
    (r, y)
}

fn back_substitute<T: Scalar>(r: &[Vec<T>], b: &[T]) -> Vec<T> {
    let k = b.len();
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        let s: T = ((i + 1)..k).map(|j| r[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / r[i][i];
    }
    x
}

fn upper_inverse<T: Scalar>(r: &[Vec<T>]) -> Vec<Vec<T>> {
    let k = r.len();
    let mut inv = vec![vec![T::zero(); k]; k];
    for col in 0..k {
        let e: Vec<T> = (0..k).map(|i| if i == col { T::one() } else { T::zero() }).collect();
        let x = back_substitute(r, &e);
        for (row, xi) in inv.iter_mut().zip(x) {
            row[col] = xi;
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(), 0.5, epsilon = 1e-15);
        let x = [0.3, -1.0, 4.0, 2.5];
        assert_abs_diff_eq!(spearman(&x, &x).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Undefined(_))));
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::Contract(_))));
        assert!(matches!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn ties_get_average_ranks() {
        let r = average_ranks(&[10.0, 20.0, 10.0, 30.0]);
        assert_eq!(r, vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn exact_fit() {
        let fit = ols_fit(&[2.0, 4.0, 6.0], &[vec![1.0, 2.0, 3.0]], true).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit.residuals.iter().all(|e: &f64| e.abs() < 1e-10));
    }

    #[test]
    fn three_point_hand_fit() {
        let fit = ols_fit(&[0.0, 1.0, 3.0], &[vec![0.0, 1.0, 2.0]], true).unwrap();
        assert_abs_diff_eq!(fit.coefficients[1], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[0], -1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 27.0 / 28.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.t_stats[1], 27f64.sqrt(), epsilon = 1e-9);
        assert_eq!(fit.n_obs, 3);
    }

    #[test]
    fn rank_deficiency_and_contracts() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            ols_fit(&[1.0, 2.0, 2.0, 5.0], &[x.clone(), x.clone()], true),
            Err(Error::Numerical(_))
        ));
        assert!(matches!(
            ols_fit(&[1.0, 2.0], &[vec![1.0, 2.0]], true),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            ols_fit(&[1.0, 2.0, 3.0], &[vec![1.0, 2.0]], true),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn no_intercept_uses_uncentred_r2() {
        let fit = ols_fit(&[1.0, 2.0, 3.1], &[vec![1.0, 2.0, 3.0]], false).unwrap();
        assert_eq!(fit.coefficients.len(), 1);
        assert!(fit.r_squared > 0.99 && fit.r_squared <= 1.0);
    }

    #[test]
    fn f32_fit() {
        let fit = ols_fit(&[0.0f32, 1.0, 3.0], &[vec![0.0, 1.0, 2.0]], true).unwrap();
        assert!((fit.coefficients[1] - 1.5).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn residuals_orthogonal_to_design(
            rows in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 8..60)
        ) {
            let x1: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let x2: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let y: Vec<f64> = rows.iter().map(|r| 0.5 * r.0 - r.1 + r.2).collect();
            let fit = match ols_fit(&y, &[x1.clone(), x2.clone()], true) {
                Ok(f) => f,
                Err(Error::Numerical(_)) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let n = y.len() as f64;
            let dots = [
                fit.residuals.iter().sum::<f64>(),
                fit.residuals.iter().zip(&x1).map(|(e, x)| e * x).sum::<f64>(),
                fit.residuals.iter().zip(&x2).map(|(e, x)| e * x).sum::<f64>(),
            ];
            for d in dots {
                prop_assert!(d.abs() < 1e-8 * n, "dot {d}");
            }
            prop_assert!((0.0..=1.0).contains(&fit.r_squared));
            for j in 0..3 {
                if fit.standard_errors[j] > 0.0 {
                    prop_assert!((fit.t_stats[j] - fit.coefficients[j] / fit.standard_errors[j]).abs() < 1e-9 * fit.t_stats[j].abs().max(1.0));
                }
            }
        }

        #[test]
        fn spearman_in_unit_interval(xs in prop::collection::vec(-5.0f64..5.0, 3..40), seed in any::<u64>()) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| ((i as u64 ^ seed) % 7) as f64 - x).collect();
            if let Ok(r) = spearman(&xs, &ys) {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
