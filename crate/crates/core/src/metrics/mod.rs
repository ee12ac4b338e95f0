//! Market outcome measures and realised action similarity.
//!
//! Conventions: prices are additive, so "returns" are price differences.
//! Pricing error is reported as a loss (lower is more efficient) and expected
//! shortfall is positive under losses.

pub mod stats;

use serde::{Deserialize, Serialize};

pub use stats::{average_ranks, ols_fit, pearson, spearman, OlsResult};

use crate::error::{Error, Result};
use crate::scalar::{mean, population_std, Scalar};

/// Run-level outcome measures computed from post-burn-in records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle<T> {
    /// RMSE of price against fundamental (efficiency, as a loss).
    pub pricing_error_rmse: T,
    /// Population standard deviation of price changes.
    pub volatility: T,
    /// Mean depth relative to baseline depth, in (0, 1].
    pub liquidity_level: T,
    /// Mean of the worst tail of price changes, sign-flipped.
    pub expected_shortfall: T,
    /// Mean windowed action similarity; `None` when no window was valid.
    pub mean_rho: Option<T>,
}

pub fn pricing_error<T: Scalar>(prices: &[T], fundamentals: &[T]) -> Result<T> {
    if prices.is_empty() || prices.len() != fundamentals.len() {
        return Err(Error::Contract(format!(
            "pricing_error: need equal nonempty series, got {} and {}",
            prices.len(),
            fundamentals.len()
        )));
    }
    let mse = prices
        .iter()
        .zip(fundamentals)
        .map(|(&p, &v)| (p - v) * (p - v))
        .sum::<T>()
        / T::of_usize(prices.len());
    Ok(mse.sqrt())
}

pub fn realized_volatility<T: Scalar>(returns: &[T]) -> Result<T> {
    if returns.len() < 2 {
        return Err(Error::Contract("realized_volatility needs at least 2 returns".into()));
    }
    Ok(population_std(returns).expect("nonempty"))
}

/// Mean depth over `baseline_depth`, clipped to (0, 1].
pub fn liquidity_level<T: Scalar>(depths: &[T], baseline_depth: T) -> Result<T> {
    if !(baseline_depth > T::zero()) {
        return Err(Error::Contract("liquidity_level: baseline depth must be positive".into()));
    }
    let m = mean(depths).ok_or_else(|| Error::Contract("liquidity_level: empty depth series".into()))?;
    Ok((m / baseline_depth).min(T::one()).max(T::min_positive_value()))
}

/// `-mean` of the `ceil(tail * n)` smallest returns.
pub fn expected_shortfall<T: Scalar>(returns: &[T], tail: T) -> Result<T> {
    if returns.is_empty() {
        return Err(Error::Contract("expected_shortfall: empty returns".into()));
    }
    if !(tail > T::zero() && tail <= T::half()) {
        return Err(Error::Contract(format!("expected_shortfall: tail {tail} outside (0, 0.5]")));
    }
    let n = returns.len();
    // Guard against 0.05 * 20 landing a hair above 1.
    let k = (tail.as_f64() * n as f64 * (1.0 - 1e-12)).ceil().clamp(1.0, n as f64) as usize;
    let mut sorted = returns.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN return"));
    let worst = sorted[..k].iter().copied().sum::<T>() / T::of_usize(k);
    Ok(-worst)
}

/// One point of the similarity series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoPoint<T> {
    /// Index of the last observation in the window.
    pub t: usize,
    pub rho: T,
}

/// Trailing-window action similarity.
///
/// `actions[i]` is agent `i`'s realised-trade series. For each `t >= window-1`
/// the value is the mean Pearson correlation over `pairs` of the two agents'
/// trades in `[t-window+1, t]`. Pairs where either series is constant in the
/// window are skipped; windows where every pair is skipped are omitted.
pub fn action_similarity<T: Scalar>(
    actions: &[Vec<T>],
    window: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<RhoPoint<T>>> {
    if window < 2 {
        return Err(Error::Contract("action_similarity: window must be >= 2".into()));
    }
    let len = actions.first().map_or(0, Vec::len);
    if actions.iter().any(|s| s.len() != len) {
        return Err(Error::Contract("action_similarity: ragged action matrix".into()));
    }
    for &(i, j) in pairs {
        if i >= j || j >= actions.len() {
            return Err(Error::Contract(format!("action_similarity: invalid pair ({i},{j})")));
        }
    }
    if len < window {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for t in (window - 1)..len {
        let lo = t + 1 - window;
        let (mut sum, mut count) = (T::zero(), 0usize);
        for &(i, j) in pairs {
            if let Some(r) = pearson(&actions[i][lo..=t], &actions[j][lo..=t]) {
                sum = sum + r;
                count += 1;
            }
        }
        if count > 0 {
            out.push(RhoPoint {
                t,
                rho: sum / T::of_usize(count),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pricing_error_examples() {
        let v = [100.0, 101.0, 102.0, 103.0];
        assert_eq!(pricing_error(&v, &v).unwrap(), 0.0);
        let p = [101.0, 100.0, 103.0, 102.0];
        assert_abs_diff_eq!(pricing_error(&p, &v).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pricing_error(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 12.5f64.sqrt(), epsilon = 1e-12);
        assert!(matches!(pricing_error::<f64>(&[], &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn volatility_examples() {
        assert_eq!(realized_volatility(&[0.3, 0.3, 0.3]).unwrap(), 0.0);
        assert_abs_diff_eq!(realized_volatility(&[0.01, -0.01, 0.01, -0.01]).unwrap(), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(realized_volatility(&[2.0, 2.0, 2.0, 6.0]).unwrap(), 3f64.sqrt(), epsilon = 1e-12);
        assert!(realized_volatility(&[1.0]).is_err());
    }

    #[test]
    fn liquidity_examples() {
        assert_eq!(liquidity_level(&[50.0, 50.0], 50.0).unwrap(), 1.0);
        assert_eq!(liquidity_level(&[25.0, 25.0], 50.0).unwrap(), 0.5);
        assert_eq!(liquidity_level(&[50.0, 25.0], 50.0).unwrap(), 0.75);
        assert!(liquidity_level(&[50.0], 0.0).is_err());
        assert!(liquidity_level::<f64>(&[], 1.0).is_err());
    }

    #[test]
    fn expected_shortfall_examples() {
        let mut r = vec![-0.10];
        r.extend((0..19).map(|i| i as f64 * 0.001));
        assert_abs_diff_eq!(expected_shortfall(&r, 0.05).unwrap(), 0.10, epsilon = 1e-15);
        assert_abs_diff_eq!(expected_shortfall(&[-2.0, -1.0, 1.0, 2.0], 0.5).unwrap(), 1.5, epsilon = 1e-15);
        assert_eq!(expected_shortfall(&[0.7; 9], 0.01).unwrap(), -0.7);
        assert!(expected_shortfall(&[1.0], 0.0).is_err());
        assert!(expected_shortfall(&[1.0], 0.6).is_err());
    }

    #[test]
    fn similarity_examples() {
        let pos = action_similarity(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]], 3, &[(0, 1)]).unwrap();
        assert_eq!(pos.len(), 1);
        assert_abs_diff_eq!(pos[0].rho, 1.0, epsilon = 1e-15);

        let neg = action_similarity(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]], 3, &[(0, 1)]).unwrap();
        assert_abs_diff_eq!(neg[0].rho, -1.0, epsilon = 1e-15);

        let three = [vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]];
        let r = action_similarity(&three, 3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        assert_abs_diff_eq!(r[0].rho, -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_series_are_skipped() {
        let r = action_similarity(&[vec![0.0; 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]], 3, &[(0, 1)]).unwrap();
        assert!(r.is_empty());
        assert!(action_similarity(&[vec![1.0, 2.0]], 1, &[]).is_err());
        assert!(action_similarity(&[vec![1.0, 2.0], vec![1.0, 2.0]], 2, &[(1, 0)]).is_err());
    }

    proptest! {
        #[test]
        fn rho_bounded_and_affine_invariant(
            raw in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 30), 4),
            scales in prop::collection::vec((0.1f64..10.0, -5.0f64..5.0), 4),
        ) {
            let pairs = [(0, 1), (0, 2), (1, 3), (2, 3)];
            let base = action_similarity(&raw, 6, &pairs).unwrap();
            let scaled: Vec<Vec<f64>> = raw
                .iter()
                .zip(&scales)
                .map(|(s, &(a, b))| s.iter().map(|x| a * x + b).collect())
                .collect();
            let moved = action_similarity(&scaled, 6, &pairs).unwrap();
            prop_assert_eq!(base.len(), moved.len());
            for (x, y) in base.iter().zip(&moved) {
                prop_assert!((-1.0..=1.0).contains(&x.rho));
                prop_assert!((x.rho - y.rho).abs() < 1e-9);
            }
        }

        #[test]
        fn expected_shortfall_translation_equivariant(
            r in prop::collection::vec(-1.0f64..1.0, 1..200),
            c in -2.0f64..2.0,
            tail in 0.01f64..0.5,
        ) {
            let shifted: Vec<f64> = r.iter().map(|x| x - c).collect();
            let a = expected_shortfall(&r, tail).unwrap();
            let b = expected_shortfall(&shifted, tail).unwrap();
            prop_assert!((b - (a + c)).abs() < 1e-12);
        }

        #[test]
        fn sign_flip_invariance(d in prop::collection::vec(-5.0f64..5.0, 2..100)) {
            let zero = vec![0.0; d.len()];
            let flipped: Vec<f64> = d.iter().map(|x| -x).collect();
            prop_assert!((pricing_error(&d, &zero).unwrap() - pricing_error(&flipped, &zero).unwrap()).abs() < 1e-12);
            let m = d.iter().sum::<f64>() / d.len() as f64;
            let demeaned_flip: Vec<f64> = d.iter().map(|x| m - (x - m)).collect();
            prop_assert!((realized_volatility(&d).unwrap() - realized_volatility(&demeaned_flip).unwrap()).abs() < 1e-9);
        }
    }
}
